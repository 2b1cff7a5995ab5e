//! Multi-trades of a defaulting debtor's outgoing claims: the buyer takes
//! over claims against the debtor and compensates each creditor directly.
//! A good trade here is Pareto-positive: every creditor of the debtor weakly
//! improves, at least one strictly, and the buyer weakly improves.

use num::{One, Zero};

use crate::clearing::clear;
use crate::error::{Error, Result};
use crate::lp_solver::{solve_lp, LinearProgram, LpSolution, Relation};
use crate::money::{Money, Rational};
use crate::multi_in_opt::{network_kind, NetworkKind};
use crate::net_model::{ClaimId, FinancialNetwork, TradeDirection, TradeSpec};
use crate::trade_transform::{apply_trade, TradeOutcome};

/// A found outgoing trade with its per-claim compensations.
#[derive(Clone, Debug)]
pub struct OutgoingTradeResult {
    pub claims: Vec<ClaimId>,
    pub rates: Vec<Rational>,
    /// Per-claim compensation ρ_i = α_i·ℓ_i paid to the claim's creditor.
    pub returns: Vec<Money>,
    /// Σ (a′_v − a_v) over all creditors of the debtor.
    pub creditor_profit_total: Rational,
    /// Every creditor of the debtor weakly improves, at least one strictly,
    /// and the buyer weakly improves.
    pub pareto_positive: bool,
    pub outcome: TradeOutcome,
}

fn out_spec(u: &str, w: &str, claims: Vec<ClaimId>, rates: Vec<Rational>) -> TradeSpec {
    TradeSpec::new(TradeDirection::Outgoing, u, w, claims, rates)
}

fn creditors_of(network: &FinancialNetwork, u: &str) -> Vec<String> {
    let mut list: Vec<String> = network
        .outgoing(u)
        .iter()
        .map(|id| network.claim(id).unwrap().creditor.clone())
        .collect();
    list.sort();
    list.dedup();
    list
}

fn check_out_trade_shape(
    network: &FinancialNetwork,
    u: &str,
    w: &str,
    claim_set: &[ClaimId],
) -> Result<()> {
    network.bank(u)?;
    network.bank(w)?;
    if u == w {
        return Err(Error::SpecViolation("debtor and buyer must differ".into()));
    }
    for id in claim_set {
        let claim = network.claim(id)?;
        if claim.debtor != u {
            return Err(Error::SpecViolation(format!("claim {id} is not owed by {u}")));
        }
        if claim.creditor == w {
            return Err(Error::SpecViolation(format!(
                "claim {id} is already held by the buyer {w}"
            )));
        }
    }
    Ok(())
}

/// Packages an applied outgoing trade, evaluating the Pareto flags over the
/// debtor's creditors and the buyer.
fn package(
    network: &FinancialNetwork,
    u: &str,
    w: &str,
    claims: Vec<ClaimId>,
    rates: Vec<Rational>,
) -> Result<OutgoingTradeResult> {
    let returns: Vec<Money> = claims
        .iter()
        .zip(&rates)
        .map(|(id, alpha)| Ok(&network.claim(id)?.liability * alpha))
        .collect::<Result<_>>()?;
    let outcome = apply_trade(network, &out_spec(u, w, claims.clone(), rates.clone()))?;
    let margin = outcome
        .pre_state
        .strictness_margin()
        .max(outcome.post_state.strictness_margin());
    let creditors = creditors_of(network, u);
    let mut profit = Rational::zero();
    let mut all_weak = true;
    let mut any_strict = false;
    for v in &creditors {
        let delta = &outcome.deltas[v];
        profit += delta;
        all_weak &= *delta >= -margin.clone();
        any_strict |= *delta > margin;
    }
    let buyer_weak = outcome.deltas[w] >= -margin.clone();
    Ok(OutgoingTradeResult {
        claims,
        rates,
        returns,
        creditor_profit_total: profit,
        pareto_positive: all_weak && any_strict && buyer_weak,
        outcome,
    })
}

/// Optimal compensations for trading the fixed claim set `C` of debtor `u`
/// to buyer `w` on a proportional network, or `None` when no Pareto-positive
/// compensation vector exists.
///
/// The clearing conditions are relaxed to a linear program over recovery
/// rates and per-claim compensations; because the relaxation may admit
/// non-clearing optima, the result is always re-verified against the exact
/// clearing state at the returned rates.
pub fn optimal_out_proportional(
    network: &FinancialNetwork,
    u: &str,
    w: &str,
    claim_set: &[ClaimId],
) -> Result<Option<OutgoingTradeResult>> {
    if network_kind(network) != NetworkKind::Proportional {
        return Err(Error::WrongPaymentKind(
            "outgoing-trade optimization requires a proportional network".into(),
        ));
    }
    check_out_trade_shape(network, u, w, claim_set)?;
    if claim_set.is_empty() {
        return Ok(None);
    }
    let pre = clear(network)?;
    let a_w_x = network.bank(w)?.external_assets.clone();

    let debtors: Vec<String> = network
        .bank_ids()
        .filter(|id| !network.outgoing(id).is_empty())
        .cloned()
        .collect();
    let var_of = |id: &str| debtors.iter().position(|d| d == id);
    let n_vars = debtors.len() + claim_set.len();
    let rho_var = |i: usize| debtors.len() + i;

    let mut constraints: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
    let mut row = |entries: Vec<(usize, Rational)>, rel: Relation, bound: Rational| {
        let mut coeffs = vec![Rational::zero(); n_vars];
        for (i, c) in entries {
            coeffs[i] += c;
        }
        constraints.push((coeffs, rel, bound));
    };

    // Post-trade incoming claims: traded claims move from their creditors to
    // the buyer.
    let incoming_post = |bank: &str| -> Vec<&str> {
        let mut list: Vec<&str> = network
            .incoming(bank)
            .iter()
            .filter(|id| !claim_set.iter().any(|c| c == *id))
            .map(|id| id.as_str())
            .collect();
        if bank == w {
            list.extend(claim_set.iter().map(|id| id.as_str()));
        }
        list
    };
    // Compensations credited to a bank: ρ_i for each traded claim it held.
    let credits = |bank: &str| -> Vec<usize> {
        claim_set
            .iter()
            .enumerate()
            .filter(|(_, id)| network.claim(id).unwrap().creditor == bank)
            .map(|(i, _)| rho_var(i))
            .collect()
    };

    // Affordability: Σ ρ_i ≤ a_w^x.
    row(
        (0..claim_set.len()).map(|i| (rho_var(i), Rational::one())).collect(),
        Relation::Le,
        a_w_x.rat().clone(),
    );

    let creditors = creditors_of(network, u);
    let traded_creditors: Vec<String> = {
        let mut list: Vec<String> = claim_set
            .iter()
            .map(|id| network.claim(id).unwrap().creditor.clone())
            .collect();
        list.sort();
        list.dedup();
        list
    };

    // Each creditor of u must weakly improve in assets, and so must the
    // buyer.  Recovery lower bounds alone cannot express this for surplus
    // banks (recovery saturates at 1 while cash drains), so every affected
    // bank gets an explicit asset-level row:
    //   Σ credits + Σ_{e'∈E'^-(b)} ℓ_{e'}·r'_{de(e')} (− Σρ for the buyer)
    //     ≥ a_b − a_b^x.
    for v in &creditors {
        if v == w {
            continue; // handled by the buyer rows below
        }
        if let Some(i) = var_of(v) {
            row(
                vec![(i, Rational::one())],
                Relation::Ge,
                pre.recovery_of(v).clone(),
            );
        }
        let mut entries: Vec<(usize, Rational)> =
            credits(v).into_iter().map(|i| (i, Rational::one())).collect();
        for claim_id in incoming_post(v) {
            let claim = network.claim(claim_id)?;
            let i = var_of(&claim.debtor).expect("claim debtor has outgoing claims");
            entries.push((i, claim.liability.rat().clone()));
        }
        row(
            entries,
            Relation::Ge,
            pre.assets_of(v).rat() - network.bank(v)?.external_assets.rat(),
        );
    }
    if let Some(i) = var_of(w) {
        row(
            vec![(i, Rational::one())],
            Relation::Ge,
            pre.recovery_of(w).clone(),
        );
    }
    {
        let mut entries: Vec<(usize, Rational)> = (0..claim_set.len())
            .map(|i| (rho_var(i), -Rational::one()))
            .collect();
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

    // Recovery/budget inequality per debtor bank.
    for (i, b) in debtors.iter().enumerate() {
        let total = network.total_liabilities(b)?.into_rat();
        let mut entries = vec![(i, total)];
        for claim_id in incoming_post(b) {
            let claim = network.claim(claim_id)?;
            let j = var_of(&claim.debtor).expect("claim debtor has outgoing claims");
            entries.push((j, -claim.liability.rat().clone()));
        }
        for rho in credits(b) {
            entries.push((rho, -Rational::one()));
        }
        if b == w {
            for k in 0..claim_set.len() {
                entries.push((rho_var(k), Rational::one()));
            }
        }
        row(
            entries,
            Relation::Le,
            network.bank(b)?.external_assets.rat().clone(),
        );
    }

    let mut bounds: Vec<(Rational, Option<Rational>)> =
        vec![(Rational::zero(), Some(Rational::one())); debtors.len()];
    for id in claim_set {
        bounds.push((
            Rational::zero(),
            Some(network.claim(id)?.liability.rat().clone()),
        ));
    }

    // Objective: total post-trade assets of the traded claims' creditors
    // (their externals are constants and omitted).
    let mut objective = vec![Rational::zero(); n_vars];
    for v in &traded_creditors {
        for rho in credits(v) {
            objective[rho] += Rational::one();
        }
        for claim_id in incoming_post(v) {
            let claim = network.claim(claim_id)?;
            let i = var_of(&claim.debtor).expect("claim debtor has outgoing claims");
            objective[i] += claim.liability.rat().clone();
        }
    }

    let lp = LinearProgram {
        objective: objective.clone(),
        constraints,
        bounds,
    };
    let (values, best) = match solve_lp(&lp)? {
        LpSolution::Optimal { values, objective } => (values, objective),
        LpSolution::Infeasible => return Ok(None),
        LpSolution::Unbounded => {
            return Err(Error::LpInfeasible("outgoing-trade LP unbounded".into()))
        }
    };

    // The pre-trade state itself is LP-feasible (ρ_i = current payments), so
    // a strict aggregate improvement requires the optimum to exceed the
    // pre-trade counterpart.
    let mut pre_counterpart = Rational::zero();
    for v in &traded_creditors {
        pre_counterpart += pre.assets_of(v).rat() - network.bank(v)?.external_assets.rat();
    }
    if best <= pre_counterpart {
        return Ok(None);
    }

    let rates: Vec<Rational> = claim_set
        .iter()
        .enumerate()
        .map(|(i, id)| Ok(&values[rho_var(i)] / network.claim(id)?.liability.rat()))
        .collect::<Result<_>>()?;
    let result = package(network, u, w, claim_set.to_vec(), rates)?;
    if result.pareto_positive {
        Ok(Some(result))
    } else {
        Ok(None)
    }
}

/// Decides an outgoing trade at fixed per-claim rates, reporting the Pareto
/// flags and the creditors' total profit.
pub fn decide_out_fixed(
    network: &FinancialNetwork,
    u: &str,
    w: &str,
    claim_set: &[ClaimId],
    rates: &[Rational],
) -> Result<OutgoingTradeResult> {
    check_out_trade_shape(network, u, w, claim_set)?;
    package(network, u, w, claim_set.to_vec(), rates.to_vec())
}

/// Exhaustive subset search for the most profitable Pareto-positive
/// outgoing trade.  Proportional networks use the exact compensation LP per
/// subset; other kinds fall back to a per-claim rate grid of the given
/// resolution.  `limit` overrides the soft bound of 12 tradeable claims.
pub fn brute_force_out_select(
    network: &FinancialNetwork,
    u: &str,
    w: &str,
    grid_resolution: u32,
    limit: Option<usize>,
) -> Result<Option<OutgoingTradeResult>> {
    let tradeable: Vec<ClaimId> = network
        .outgoing(u)
        .iter()
        .filter(|id| network.claim(id).unwrap().creditor != w)
        .cloned()
        .collect();
    let cap = limit.unwrap_or(12);
    if tradeable.len() > cap {
        return Err(Error::InstanceTooLarge(format!(
            "{} tradeable outgoing claims exceed the limit {cap}",
            tradeable.len()
        )));
    }
    if grid_resolution == 0 {
        return Err(Error::SpecViolation("grid resolution must be positive".into()));
    }
    let proportional = network_kind(network) == NetworkKind::Proportional;
    let mut best: Option<OutgoingTradeResult> = None;
    let mut consider = |result: OutgoingTradeResult| {
        if !result.pareto_positive {
            return;
        }
        if best
            .as_ref()
            .map_or(true, |b| result.creditor_profit_total > b.creditor_profit_total)
        {
            best = Some(result);
        }
    };
    for mask in 1u64..(1 << tradeable.len()) {
        let subset: Vec<ClaimId> = tradeable
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, id)| id.clone())
            .collect();
        if proportional {
            if let Some(result) = optimal_out_proportional(network, u, w, &subset)? {
                consider(result);
            }
        } else {
            let levels = grid_resolution as u64 + 1;
            let combos = (levels as u128).pow(subset.len() as u32);
            if combos > 1 << 22 {
                return Err(Error::InstanceTooLarge(format!(
                    "rate grid of {combos} combinations for subset of {}",
                    subset.len()
                )));
            }
            for combo in 0..combos {
                let mut rest = combo;
                let mut rates = Vec::with_capacity(subset.len());
                for _ in 0..subset.len() {
                    let step = (rest % levels as u128) as i64;
                    rest /= levels as u128;
                    rates.push(Rational::new(step.into(), (grid_resolution as i64).into()));
                }
                match decide_out_fixed(network, u, w, &subset, &rates) {
                    Ok(result) => consider(result),
                    Err(Error::Unaffordable { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(best)
}
