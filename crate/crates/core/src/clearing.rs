//! Maximal clearing states.
//!
//! The clearing state of a network is the greatest fixed point of the
//! monotone payment map: every bank's assets are its externals plus incoming
//! payments, and its outgoing payments are its payment function evaluated at
//! those assets.  Three solvers are provided:
//!
//! * [`clear_proportional`]: fictitious-default iteration, exact rationals.
//! * [`clear_edge_ranking`]: downward iteration from the all-liabilities
//!   vector, exact; integral on integral inputs.
//! * [`clear_general`]: downward iteration with a tolerance and an iteration
//!   budget for arbitrary mixes of payment kinds.
//!
//! The downward iteration shares a common engine.  Plain rounds apply the
//! payment map; two accelerations keep it fast without sacrificing
//! exactness.  First, whenever the active linear segment of every payment
//! function is known, the engine solves the induced affine fixed-point system
//! directly and verifies the candidate exactly before accepting it.  Second,
//! when one round's decrement repeats the previous one (a deficit circling a
//! cycle), the engine computes how many identical rounds fit before any
//! segment boundary is hit and jumps over all of them at once; the jump is
//! provably identical to that many plain rounds.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::money::{parse_rational, Money, Rational};
use crate::net_model::{Bank, BankId, ClaimId, FinancialNetwork, PaymentFunction};

/// A clearing state: per-claim payments with derived per-bank assets and
/// recovery rates.  `tolerance` is `None` for exact states; otherwise the
/// state satisfies the fixed-point conditions up to the stored componentwise
/// tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct ClearingState {
    pub payments: BTreeMap<ClaimId, Money>,
    pub assets: BTreeMap<BankId, Money>,
    pub recovery: BTreeMap<BankId, Rational>,
    pub tolerance: Option<Money>,
}

impl ClearingState {
    pub fn payment(&self, claim: &str) -> &Money {
        &self.payments[claim]
    }

    pub fn assets_of(&self, bank: &str) -> &Money {
        &self.assets[bank]
    }

    pub fn recovery_of(&self, bank: &str) -> &Rational {
        &self.recovery[bank]
    }

    /// Strictness threshold for comparisons against this state: zero for
    /// exact states, twice the tolerance otherwise (conservative).
    pub fn strictness_margin(&self) -> Rational {
        match &self.tolerance {
            None => Rational::zero(),
            Some(t) => t.rat() * Rational::from_integer(2.into()),
        }
    }
}

/// Default componentwise tolerance for `clear_general` when dispatched via
/// [`clear`]: overridable through the `CLEARNET_TOLERANCE` environment
/// variable (integer, decimal, or `p/q` fraction), else 2^-40.
pub fn default_tolerance() -> Money {
    if let Ok(raw) = std::env::var("CLEARNET_TOLERANCE") {
        if let Some(r) = parse_rational(&raw) {
            if let Some(m) = Money::try_from_rational(r) {
                if !m.is_zero() {
                    return m;
                }
            }
        }
    }
    Money::from_ratio(1, 1 << 40)
}

/// Indexed view of a network used by the solvers.
struct Ctx<'a> {
    net: &'a FinancialNetwork,
    bank_ids: Vec<BankId>,
    banks: Vec<&'a Bank>,

    ext: Vec<Rational>,
    claim_ids: Vec<ClaimId>,
    claim_index: BTreeMap<ClaimId, usize>,
    debtor: Vec<usize>,
    creditor: Vec<usize>,
    liability: Vec<Rational>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl<'a> Ctx<'a> {
    fn new(net: &'a FinancialNetwork) -> Self {
        let bank_ids: Vec<BankId> = net.bank_ids().cloned().collect();
        let index: BTreeMap<BankId, usize> = bank_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let banks: Vec<&Bank> = bank_ids.iter().map(|id| net.bank(id).unwrap()).collect();
        let ext: Vec<Rational> = banks
            .iter()
            .map(|b| b.external_assets.rat().clone())
            .collect();
        let claim_ids: Vec<ClaimId> = net.claims().map(|c| c.id.clone()).collect();
        let claim_index: BTreeMap<ClaimId, usize> = claim_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let mut debtor = Vec::new();
        let mut creditor = Vec::new();
        let mut liability = Vec::new();
        for id in &claim_ids {
            let c = net.claim(id).unwrap();
            debtor.push(index[&c.debtor]);
            creditor.push(index[&c.creditor]);
            liability.push(c.liability.rat().clone());
        }
        let mut outgoing = vec![Vec::new(); bank_ids.len()];
        let mut incoming = vec![Vec::new(); bank_ids.len()];
        for (e, (&d, &c)) in debtor.iter().zip(&creditor).enumerate() {
            outgoing[d].push(e);
            incoming[c].push(e);
        }
        Ctx {
            net,
            bank_ids,
            banks,
            ext,
            claim_ids,
            claim_index,
            debtor,
            creditor,
            liability,
            outgoing,
            incoming,
        }
    }

    fn n_banks(&self) -> usize {
        self.bank_ids.len()
    }

    fn n_claims(&self) -> usize {
        self.claim_ids.len()
    }

    /// Per-claim payments given per-bank funds.
    fn eval_payments(&self, funds: &[Rational]) -> Vec<Rational> {
        let mut p = vec![Rational::zero(); self.n_claims()];
        for (v, bank) in self.banks.iter().enumerate() {
            if self.outgoing[v].is_empty() {
                continue;
            }
            let pay = self.net.evaluate_payment_unchecked(bank, &funds[v]);
            for (claim_id, amount) in pay {
                p[self.claim_index[&claim_id]] = amount.into_rat();
            }
        }
        p
    }

    /// Per-bank assets given per-claim payments.
    fn eval_assets(&self, payments: &[Rational]) -> Vec<Rational> {
        let mut a = self.ext.clone();
        for (e, &c) in self.creditor.iter().enumerate() {
            a[c] += &payments[e];
        }
        a
    }

    fn state_from(&self, funds: &[Rational], tolerance: Option<Money>) -> ClearingState {
        let p = self.eval_payments(funds);
        let a = self.eval_assets(&p);
        let mut payments = BTreeMap::new();
        for (e, id) in self.claim_ids.iter().enumerate() {
            payments.insert(id.clone(), Money::try_from_rational(p[e].clone()).unwrap());
        }
        let mut assets = BTreeMap::new();
        let mut recovery = BTreeMap::new();
        for (v, id) in self.bank_ids.iter().enumerate() {
            let total: Rational = self.outgoing[v].iter().map(|&e| self.liability[e].clone()).sum();
            let r = if total.is_zero() {
                Rational::one()
            } else {
                let ratio = &a[v] / &total;
                if ratio > Rational::one() {
                    Rational::one()
                } else {
                    ratio
                }
            };
            assets.insert(id.clone(), Money::try_from_rational(a[v].clone()).unwrap());
            recovery.insert(id.clone(), r);
        }
        ClearingState {
            payments,
            assets,
            recovery,
            tolerance,
        }
    }

    /// Number of distinct linear-segment breakpoints over all payment
    /// functions; controls the iteration budget.
    fn breakpoint_count(&self) -> usize {
        let mut count = 0usize;
        for bank in &self.banks {
            count += match &bank.payment {
                PaymentFunction::Proportional => 1,
                PaymentFunction::EdgeRanking(order) => order.len(),
                PaymentFunction::GeneralMonotone(tables) => {
                    tables.values().map(|t| t.points().len()).sum()
                }
            };
        }
        count
    }
}

/// Solves the square linear system `m x = rhs` exactly; `None` if singular.
fn solve_linear_system(mut m: Vec<Vec<Rational>>, mut rhs: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let p = m[col][col].clone();
        for j in col..n {
            m[col][j] = &m[col][j] / &p;
        }
        rhs[col] = &rhs[col] / &p;
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for j in col..n {
                    let delta = &factor * &m[col][j];
                    m[r][j] -= delta;
                }
                let delta = &factor * &rhs[col];
                rhs[r] -= delta;
            }
        }
    }
    Some(rhs)
}

/// Outcome of the downward engine.
enum EngineOutcome {
    Exact(Vec<Rational>),
    Budget {
        funds: Vec<Rational>,
        last_delta_max: Rational,
    },
}

/// Downward fixed-point iteration from the all-liabilities upper bound.
fn downward_engine(ctx: &Ctx<'_>, budget: usize) -> EngineOutcome {

    // Upper bound: externals plus all incoming liabilities.
    let mut a: Vec<Rational> = ctx.ext.clone();
    for (e, &c) in ctx.creditor.iter().enumerate() {
        a[c] += &ctx.liability[e];
    }
    let mut prev_delta: Option<Vec<Rational>> = None;
    let mut last_delta_max = Rational::zero();
    for round in 0..budget {
        let p = ctx.eval_payments(&a);
        let next = ctx.eval_assets(&p);
        if next == a {
            return EngineOutcome::Exact(a);
        }
        let delta: Vec<Rational> = a.iter().zip(&next).map(|(x, y)| x - y).collect();
        debug_assert!(
            delta.iter().all(|d| !d.is_negative()),
            "downward iteration increased"
        );
        last_delta_max = delta.iter().cloned().fold(Rational::zero(), |m, d| m.max(d));

        // Translation acceleration: the same decrement twice in a row means a
        // deficit is circulating through fixed linear segments; jump over all
        // identical future rounds at once.
        if let Some(prev) = &prev_delta {
            if *prev == delta {
                if let Some(jumped) = try_translation_jump(ctx, &next, &delta) {
                    prev_delta = None;
                    a = jumped;
                    continue;
                }
            }
        }

        // Affine acceleration: solve the fixed point of the currently active
        // linear segments and accept it only after exact verification.
        if round % 3 == 2 {
            if let Some(fixed) = try_affine_solve(ctx, &next) {
                return EngineOutcome::Exact(fixed);
            }
        }

        prev_delta = Some(delta);
        a = next;
    }
    EngineOutcome::Budget {
        funds: a,
        last_delta_max,
    }
}

/// If the payment map is affine with slope matrix `M` on the current
/// segments and `M·delta = delta`, then each further round subtracts exactly
/// `delta` until a segment boundary is reached.  Returns the state after the
/// maximal number of such rounds, or `None` when no extra round fits.
fn try_translation_jump(ctx: &Ctx<'_>, a: &[Rational], delta: &[Rational]) -> Option<Vec<Rational>> {
    use num::BigInt;
    // Verify M·delta = delta for the active segments.
    let mut m_delta = vec![Rational::zero(); ctx.n_banks()];
    let mut lo = vec![Rational::zero(); ctx.n_banks()];
    let mut lo_set = vec![false; ctx.n_banks()];
    for (e, &d) in ctx.debtor.iter().enumerate() {
        let piece = ctx
            .net
            .payment_piece(ctx.banks[d], &ctx.claim_ids[e], &a[d]);
        m_delta[ctx.creditor[e]] += &piece.slope * &delta[d];
        if !lo_set[d] || piece.lo > lo[d] {
            lo[d] = piece.lo.clone();
            lo_set[d] = true;
        }
    }
    if m_delta != delta {
        return None;
    }
    // Largest t with a - t·delta inside every active segment.
    let mut t_max: Option<BigInt> = None;
    for v in 0..ctx.n_banks() {
        if lo_set[v] && delta[v].is_positive() {
            let room = (&a[v] - &lo[v]) / &delta[v];
            let t = room.floor().to_integer();
            t_max = Some(match t_max {
                None => t,
                Some(cur) => cur.min(t),
            });
        }
    }
    let t = t_max?;
    if t <= BigInt::one() {
        return None;
    }
    let factor = Rational::from_integer(t);
    Some(
        a.iter()
            .zip(delta)
            .map(|(x, d)| x - d * &factor)
            .collect(),
    )
}

/// Solves the affine fixed point of the active segments at `a` and verifies
/// it is the exact clearing point: the solution must lie within every active
/// segment, below `a`, and satisfy the full payment map exactly.  When the
/// system is nonsingular these conditions pin the greatest fixed point.
fn try_affine_solve(ctx: &Ctx<'_>, a: &[Rational]) -> Option<Vec<Rational>> {
    let n = ctx.n_banks();
    let mut matrix = vec![vec![Rational::zero(); n]; n];
    let mut rhs = ctx.ext.clone();
    let mut lo = vec![Rational::zero(); n];
    for v in 0..n {
        matrix[v][v] = Rational::one();
    }
    for (e, &d) in ctx.debtor.iter().enumerate() {
        let piece = ctx
            .net
            .payment_piece(ctx.banks[d], &ctx.claim_ids[e], &a[d]);
        let c = ctx.creditor[e];
        matrix[c][d] -= &piece.slope;
        rhs[c] += &piece.intercept;
        if piece.lo > lo[d] {
            lo[d] = piece.lo.clone();
        }
    }
    let x = solve_linear_system(matrix, rhs)?;
    for v in 0..n {
        if x[v] > a[v] || x[v] < lo[v] || x[v].is_negative() {
            return None;
        }
    }
    // Exact verification against the full (piecewise) payment map.
    let p = ctx.eval_payments(&x);
    let check = ctx.eval_assets(&p);
    if check == x {
        Some(x)
    } else {
        None
    }
}

fn iteration_budget(ctx: &Ctx<'_>) -> usize {
    let breakpoints = ctx.breakpoint_count().max(1);
    (10 * ctx.n_claims().max(1) * breakpoints).max(1000)
}

/// Maximal clearing state for all-proportional networks via
/// fictitious-default iteration: assume full payments, solve the linear
/// recovery system for the current default set, and grow the set until
/// stable.  Falls back to the downward engine in the (unreached in practice)
/// singular case.
pub fn clear_proportional(network: &FinancialNetwork) -> Result<ClearingState> {
    for bank in network.banks() {
        if network.outgoing(&bank.id).len() > 1
            && !matches!(bank.payment, PaymentFunction::Proportional)
        {
            return Err(Error::WrongPaymentKind(format!(
                "bank {} is not proportional",
                bank.id
            )));
        }
    }
    let ctx = Ctx::new(network);
    let n = ctx.n_banks();
    let totals: Vec<Rational> = (0..n)
        .map(|v| ctx.outgoing[v].iter().map(|&e| ctx.liability[e].clone()).sum())
        .collect();
    let mut recovery = vec![Rational::one(); n];
    let mut defaults = vec![false; n];
    for _round in 0..=n {
        // Assets under the current recovery vector.
        let mut assets = ctx.ext.clone();
        for (e, &c) in ctx.creditor.iter().enumerate() {
            assets[c] += &ctx.liability[e] * &recovery[ctx.debtor[e]];
        }
        let mut changed = false;
        for v in 0..n {
            if !defaults[v] && !totals[v].is_zero() && assets[v] < totals[v] {
                defaults[v] = true;
                changed = true;
            }
        }
        if !changed {
            // Stable default set: recovery vector is consistent.
            let funds = assets;
            return Ok(ctx.state_from(&funds, None));
        }
        let solved = solve_default_system(&ctx, &totals, &defaults);
        match solved {
            Some(r) => recovery = r,
            None => return clear_via_engine(network, None),
        }
    }
    // The default set grows every round, so n+1 rounds always suffice.
    Err(Error::NonConvergence(n + 1))
}

/// Solves r_v·L_v = ext_v + Σ_in r_{de}·ℓ_e for the defaulting banks, with
/// non-defaulting banks fixed at recovery 1.
fn solve_default_system(
    ctx: &Ctx<'_>,
    totals: &[Rational],
    defaults: &[bool],
) -> Option<Vec<Rational>> {
    let vars: Vec<usize> = (0..ctx.n_banks()).filter(|&v| defaults[v]).collect();
    let pos: BTreeMap<usize, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let k = vars.len();
    let mut matrix = vec![vec![Rational::zero(); k]; k];
    let mut rhs: Vec<Rational> = vars.iter().map(|&v| ctx.ext[v].clone()).collect();
    for (i, &v) in vars.iter().enumerate() {
        matrix[i][i] = totals[v].clone();
        for &e in &ctx.incoming[v] {
            let d = ctx.debtor[e];
            if let Some(&j) = pos.get(&d) {
                matrix[i][j] -= &ctx.liability[e];
            } else {
                rhs[i] += &ctx.liability[e];
            }
        }
    }
    let solution = solve_linear_system(matrix, rhs)?;
    let mut recovery = vec![Rational::one(); ctx.n_banks()];
    for (i, &v) in vars.iter().enumerate() {
        // Clamp into [0, 1]; values outside can only appear transiently
        // while the default set is still growing.
        let mut r = solution[i].clone();
        if r.is_negative() {
            r = Rational::zero();
        }
        if r > Rational::one() {
            r = Rational::one();
        }
        recovery[v] = r;
    }
    Some(recovery)
}

fn clear_via_engine(network: &FinancialNetwork, tolerance: Option<&Money>) -> Result<ClearingState> {
    let ctx = Ctx::new(network);
    let budget = iteration_budget(&ctx);
    match downward_engine(&ctx, budget) {
        EngineOutcome::Exact(funds) => Ok(ctx.state_from(&funds, None)),
        EngineOutcome::Budget {
            funds,
            last_delta_max,
        } => match tolerance {
            Some(t) if last_delta_max <= *t.rat() => Ok(ctx.state_from(&funds, Some(t.clone()))),
            _ => Err(Error::NonConvergence(budget)),
        },
    }
}

/// Maximal clearing state for edge-ranking networks (banks with at most one
/// outgoing claim may use any kind: all kinds coincide there).  Exact;
/// integral whenever liabilities and externals are integral.
pub fn clear_edge_ranking(network: &FinancialNetwork) -> Result<ClearingState> {
    for bank in network.banks() {
        if network.outgoing(&bank.id).len() > 1
            && !matches!(bank.payment, PaymentFunction::EdgeRanking(_))
        {
            return Err(Error::WrongPaymentKind(format!(
                "bank {} is not edge-ranking",
                bank.id
            )));
        }
    }
    clear_via_engine(network, None)
}

/// Maximal clearing state for arbitrary payment-kind mixes, within the given
/// componentwise tolerance.  Piecewise-linear functions normally stabilize
/// exactly (the result then reports `tolerance: None`).
pub fn clear_general(network: &FinancialNetwork, tolerance: &Money) -> Result<ClearingState> {
    if tolerance.is_zero() {
        return Err(Error::SpecViolation("tolerance must be positive".into()));
    }
    clear_via_engine(network, Some(tolerance))
}

/// The clearing oracle: dispatches to the specialized solver when all banks
/// share a payment kind, otherwise to [`clear_general`] with the default
/// tolerance.
pub fn clear(network: &FinancialNetwork) -> Result<ClearingState> {
    let mut proportional_ok = true;
    let mut edge_ranking_ok = true;
    for bank in network.banks() {
        let single = network.outgoing(&bank.id).len() <= 1;
        match &bank.payment {
            PaymentFunction::Proportional => {
                if !single {
                    edge_ranking_ok = false;
                }
            }
            PaymentFunction::EdgeRanking(_) => {
                if !single {
                    proportional_ok = false;
                }
            }
            PaymentFunction::GeneralMonotone(_) => {
                proportional_ok = false;
                edge_ranking_ok = false;
            }
        }
    }
    if edge_ranking_ok {
        clear_edge_ranking(network)
    } else if proportional_ok {
        clear_proportional(network)
    } else {
        clear_general(network, &default_tolerance())
    }
}
