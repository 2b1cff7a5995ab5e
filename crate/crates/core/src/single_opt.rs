//! Optimal haircut rates for a single claims trade.
//!
//! * Edge-ranking payments: exact optimum via the return network.
//! * Proportional payments: exact optimum via a linear program.
//! * Arbitrary monotone payments: additive approximation via binary search
//!   over asset targets with the split-network budget test.
//! * Fixed rate: plain before/after decision.

use num::{One, Signed, Zero};

use crate::clearing::{clear, ClearingState};
use crate::error::{Error, Result};
use crate::lp_solver::{solve_lp, LinearProgram, LpSolution, Relation};
use crate::money::{Money, Rational};
use crate::net_model::{FinancialNetwork, TradeDirection, TradeSpec};
use crate::trade_transform::{
    apply_trade, budget_differences, return_claim_id, return_network, split_network, TradeOutcome,
};

/// A found single-trade optimum; `None` results mean no creditor-positive
/// trade exists ("Absent").
#[derive(Clone, Debug)]
pub struct SingleTradeResult {
    pub alpha: Rational,
    pub return_paid: Money,
    /// Seller's post-trade assets.
    pub achieved_assets: Money,
    pub outcome: TradeOutcome,
}

fn single_spec(v: &str, w: &str, e: &str, alpha: Rational) -> TradeSpec {
    TradeSpec::new(
        TradeDirection::Incoming,
        v,
        w,
        vec![e.to_string()],
        vec![alpha],
    )
}

fn check_single_trade_shape<'a>(
    network: &'a FinancialNetwork,
    e: &str,
    w: &str,
) -> Result<&'a str> {
    let claim = network.claim(e)?;
    network.bank(w)?;
    if claim.creditor == w {
        return Err(Error::SpecViolation(format!("claim {e} is already held by {w}")));
    }
    if claim.debtor == w {
        return Err(Error::SpecViolation(format!("claim {e} is owed by the buyer {w}")));
    }
    Ok(&claim.creditor)
}

/// Builds the verified result for a concrete α, requiring creditor
/// positivity in the recomputed clearing state.
fn realize(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    e: &str,
    alpha: Rational,
) -> Result<Option<SingleTradeResult>> {
    let outcome = apply_trade(network, &single_spec(v, w, e, alpha.clone()))?;
    if !outcome.creditor_positive {
        return Ok(None);
    }
    let achieved = outcome.post_state.assets_of(v).clone();
    let return_paid = outcome.return_paid.clone();
    Ok(Some(SingleTradeResult {
        alpha,
        return_paid,
        achieved_assets: achieved,
        outcome,
    }))
}

/// Exact optimal creditor-positive α for edge-ranking networks, or `None`
/// when no such trade exists.
///
/// The return network is cleared once; the optimal return is the payment on
/// the return claim, provided the buyer can outbid the current payment
/// (`a_w^x > p_e`), strictly gains income above its pre-trade assets
/// (`a_w^ret ∈ (a_w, a_w + ℓ_{e_r}]`), and the seller strictly improves
/// (`a_v^ret > a_v`).
pub fn optimal_single_edge_ranking(
    network: &FinancialNetwork,
    e: &str,
    w: &str,
) -> Result<Option<SingleTradeResult>> {
    let v = check_single_trade_shape(network, e, w)?.to_string();
    let pre = clear(network)?;
    let p_e = pre.payment(e).clone();
    let a_w_x = network.bank(w)?.external_assets.clone();
    if a_w_x <= p_e {
        return Ok(None);
    }
    let liability = network.claim(e)?.liability.clone();
    let liability_ret = liability.clone().min(a_w_x);
    let ret = return_network(network, e, w)?;
    let state = clear(&ret)?;
    let a_w = pre.assets_of(w);
    let a_v = pre.assets_of(v.as_str());
    let a_w_ret = state.assets_of(w);
    let a_v_ret = state.assets_of(v.as_str());
    let upper = a_w.clone() + &liability_ret;
    if !(a_w_ret > a_w && *a_w_ret <= upper && a_v_ret > a_v) {
        return Ok(None);
    }
    let rho = state.payment(&return_claim_id(e)).clone();
    let alpha = &rho / &liability;
    realize(network, &v, w, e, alpha)
}

/// Exact optimal creditor-positive α for proportional networks via the
/// clearing linear program, or `None` when no such trade exists
/// (equivalently, when the optimal return does not exceed the current
/// payment on the claim).
pub fn optimal_single_proportional(
    network: &FinancialNetwork,
    e: &str,
    w: &str,
) -> Result<Option<SingleTradeResult>> {
    let v = check_single_trade_shape(network, e, w)?.to_string();
    let pre = clear(network)?;
    let p_e = pre.payment(e).clone();
    let liability = network.claim(e)?.liability.clone();
    let a_w_x = network.bank(w)?.external_assets.clone();

    // Variables: recovery r'_b for every bank with outgoing claims, then ρ.
    let debtors: Vec<String> = network
        .bank_ids()
        .filter(|id| !network.outgoing(id).is_empty())
        .cloned()
        .collect();
    let var_of = |id: &str| debtors.iter().position(|d| d == id);
    let n_vars = debtors.len() + 1;
    let rho_var = debtors.len();

    let mut constraints: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
    let mut row = |entries: Vec<(usize, Rational)>, rel: Relation, bound: Rational| {
        let mut coeffs = vec![Rational::zero(); n_vars];
        for (i, c) in entries {
            coeffs[i] += c;
        }
        constraints.push((coeffs, rel, bound));
    };

    // Post-trade incoming claims per bank: claim e is rewired to w.
    let incoming_post = |bank: &str| -> Vec<&str> {
        let mut list: Vec<&str> = network
            .incoming(bank)
            .iter()
            .filter(|id| id.as_str() != e)
            .map(|id| id.as_str())
            .collect();
        if bank == w {
            list.push(e);
        }
        list
    };

    // Seller must weakly improve, buyer must stay exactly at its pre-trade
    // recovery (it is never strictly improved by a creditor-positive trade).
    if let Some(i) = var_of(&v) {
        row(
            vec![(i, Rational::one())],
            Relation::Ge,
            pre.recovery_of(&v).clone(),
        );
    }
    if let Some(i) = var_of(w) {
        row(
            vec![(i, Rational::one())],
            Relation::Eq,
            pre.recovery_of(w).clone(),
        );
    }
    // The buyer's assets must not drop.  Recovery equality alone cannot
    // express this for a surplus buyer (recovery pinned at 1 while cash
    // drains), so the asset-level constraint is always included:
    //   Σ_{e'∈E'^-(w)} ℓ_{e'}·r'_{de(e')} − ρ ≥ a_w − a_w^x.
    {
        let mut entries = vec![(rho_var, -Rational::one())];
        for claim_id in incoming_post(w) {
            let claim = network.claim(claim_id)?;
            let i = var_of(&claim.debtor).expect("claim debtor has outgoing claims");
            entries.push((i, claim.liability.rat().clone()));
        }
        row(
            entries,
            Relation::Ge,
            pre.assets_of(w).rat() - network.bank(w)?.external_assets.rat(),
        );
    }

    // Recovery/budget inequality per debtor bank:
    //   L_b·r'_b − Σ_{e'∈E'^-(b)} ℓ_{e'}·r'_{de(e')} ∓ ρ ≤ a_b^x.
    for (i, b) in debtors.iter().enumerate() {
        let total = network.total_liabilities(b)?.into_rat();
        let mut entries = vec![(i, total)];
        for claim_id in incoming_post(b) {
            let claim = network.claim(claim_id)?;
            let j = var_of(&claim.debtor).expect("claim debtor has outgoing claims");
            entries.push((j, -claim.liability.rat().clone()));
        }
        if *b == v {
            entries.push((rho_var, -Rational::one()));
        }
        if b == w {
            entries.push((rho_var, Rational::one()));
        }
        row(
            entries,
            Relation::Le,
            network.bank(b)?.external_assets.rat().clone(),
        );
    }

    let mut bounds: Vec<(Rational, Option<Rational>)> =
        vec![(Rational::zero(), Some(Rational::one())); debtors.len()];
    let rho_cap = liability.clone().min(a_w_x).into_rat();
    bounds.push((Rational::zero(), Some(rho_cap)));

    // Objective: the seller's post-trade assets (minus its constant
    // externals): Σ_{e'∈E^-(v)\{e}} ℓ_{e'}·r'_{de(e')} + ρ.  Sub-clearing
    // vectors are feasible, and assets are monotone in the recoveries, so
    // the optimum sits at the true clearing point of the best rate.
    let mut objective = vec![Rational::zero(); n_vars];
    objective[rho_var] = Rational::one();
    for claim_id in incoming_post(&v) {
        let claim = network.claim(claim_id)?;
        let i = var_of(&claim.debtor).expect("claim debtor has outgoing claims");
        objective[i] += claim.liability.rat();
    }

    let lp = LinearProgram {
        objective: objective.clone(),
        constraints: constraints.clone(),
        bounds: bounds.clone(),
    };
    let best_total = match solve_lp(&lp)? {
        LpSolution::Optimal { objective, .. } => objective,
        // Infeasible means no post-trade state can weakly improve the seller
        // while keeping the buyer whole under the buyer's cash cap.
        LpSolution::Infeasible => return Ok(None),
        LpSolution::Unbounded => {
            return Err(Error::LpInfeasible("trade LP unbounded".into()))
        }
    };

    // Among payment-optimal solutions, pick the one with maximal return.
    let mut tie_constraints = constraints;
    tie_constraints.push((objective, Relation::Eq, best_total));
    let mut rho_objective = vec![Rational::zero(); n_vars];
    rho_objective[rho_var] = Rational::one();
    let tie_lp = LinearProgram {
        objective: rho_objective,
        constraints: tie_constraints,
        bounds,
    };
    let rho = match solve_lp(&tie_lp)? {
        LpSolution::Optimal { values, .. } => values[rho_var].clone(),
        _ => return Err(Error::LpInfeasible("tie-break LP failed".into())),
    };

    if rho <= *p_e.rat() {
        return Ok(None);
    }
    let alpha = &rho / liability.rat();
    realize(network, &v, w, e, alpha)
}

/// Additive approximation of the optimal single trade for arbitrary
/// payment-kind mixes: binary search over asset targets spaced `delta`
/// apart, probing each target with the split-network budget test.  The
/// achieved improvement is within `delta` of the optimum.
pub fn approx_single_general(
    network: &FinancialNetwork,
    e: &str,
    w: &str,
    delta: &Money,
) -> Result<Option<SingleTradeResult>> {
    if delta.is_zero() {
        return Err(Error::SpecViolation("delta must be positive".into()));
    }
    let v = check_single_trade_shape(network, e, w)?.to_string();
    let pre = clear(network)?;
    let a_v = pre.assets_of(&v).clone();
    let a_w = pre.assets_of(w).clone();
    let a_w_x = network.bank(w)?.external_assets.clone();
    let liability = network.claim(e)?.liability.clone();

    // Maximum achievable assets: all other incoming liabilities paid fully,
    // plus externals, plus the best possible return on e.
    let mut m_v = network.bank(&v)?.external_assets.clone();
    for claim_id in network.incoming(&v) {
        if claim_id != e {
            m_v += &network.claim(claim_id)?.liability;
        }
    }
    m_v += &liability.clone().min(a_w_x.clone());
    if m_v <= a_v {
        return Ok(None);
    }

    let span = m_v.rat() - a_v.rat();
    let steps = (&span / delta.rat()).ceil().to_integer();
    let steps: u64 = match steps.try_into() {
        Ok(s) => s,
        Err(_) => {
            return Err(Error::SpecViolation(
                "delta too small for the target range".into(),
            ))
        }
    };
    let target_at = |k: u64| -> Money {
        let t = a_v.rat() + delta.rat() * Rational::from_integer(k.into());
        Money::try_from_rational(t).unwrap().min(m_v.clone())
    };
    let rho_cap = liability.clone().min(a_w_x).into_rat();

    // Probe: trade reaching assets ≥ A exists iff d_v = d_w > 0 in the
    // split network cleared at level A (with the return also constructible:
    // positive and within the rate/affordability caps).
    let probe = |a: &Money| -> Result<Option<Rational>> {
        let split = split_network(network, &v, w, a, &a_w)?;
        let state = clear(&split.network)?;
        let d = budget_differences(&split, &state, std::slice::from_ref(&e.to_string()));
        let margin = state.strictness_margin();
        let equal = if margin.is_zero() {
            d.d_v == d.d_w
        } else {
            let diff = &d.d_v - &d.d_w;
            diff.abs() <= margin
        };
        if equal && d.d_v > margin && d.d_v <= rho_cap {
            Ok(Some(d.d_v))
        } else {
            Ok(None)
        }
    };

    let mut best: Option<(u64, Rational)> = None;
    let mut lo = 1u64;
    let mut hi = steps;
    while lo <= hi {
        let mid = lo + (hi - lo) / 2;
        match probe(&target_at(mid))? {
            Some(rho) => {
                if best.as_ref().map_or(true, |(k, _)| mid > *k) {
                    best = Some((mid, rho));
                }
                lo = mid + 1;
            }
            None => {
                if mid == 0 {
                    break;
                }
                hi = mid - 1;
            }
        }
    }
    let Some((_, rho)) = best else {
        return Ok(None);
    };
    let alpha = &rho / liability.rat();
    realize(network, &v, w, e, alpha)
}

/// Decides whether the single trade at a fixed rate is creditor-positive.
pub fn decide_single_fixed_alpha(
    network: &FinancialNetwork,
    e: &str,
    w: &str,
    alpha: &Rational,
) -> Result<TradeOutcome> {
    let v = check_single_trade_shape(network, e, w)?.to_string();
    if alpha.is_negative() || *alpha > Rational::one() {
        return Err(Error::SpecViolation(format!("alpha {alpha} outside [0, 1]")));
    }
    apply_trade(network, &single_spec(&v, w, e, alpha.clone()))
}

/// Convenience: the pre-trade clearing state (used by callers needing the
/// baseline for comparisons).
pub fn baseline(network: &FinancialNetwork) -> Result<ClearingState> {
    clear(network)
}
