//! Multi-trades of incoming claims: fixed-set optimization via the
//! accumulator reduction, subset selection via the knapsack conditions and
//! the level/bicriteria approximation schemes, and the fixed-rate variants
//! including the subsidized two-dimensional dynamic program.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};

use crate::clearing::{clear, default_tolerance};
use crate::error::{Error, Result};
use crate::money::{Money, Rational};
use crate::net_model::{
    ClaimId, FinancialNetwork, PaymentFunction, TradeDirection, TradeSpec,
};
use crate::single_opt::{
    approx_single_general, optimal_single_edge_ranking, optimal_single_proportional,
};
use crate::trade_transform::{
    accumulator_network, apply_trade, split_network, TradeOutcome,
};

/// One tradeable incoming claim viewed as a knapsack item at a fixed asset
/// level: its weight is the claim's payment in the split clearing, its value
/// the unpaid residual.
#[derive(Clone, Debug)]
pub struct KnapsackItem {
    pub claim: ClaimId,
    pub weight: Money,
    pub value: Money,
}

/// The knapsack decision data at asset level `A`: a trade of some claim set
/// `C` reaching assets ≥ `A` exists iff `feasible_eq1` holds and `C`
/// satisfies `Σ value ≥ value_bound` and `Σ weight ≤ weight_bound`.
#[derive(Clone, Debug)]
pub struct KnapsackView {
    pub target_assets: Money,
    pub items: Vec<KnapsackItem>,
    pub value_bound: Rational,
    pub weight_bound: Rational,
    pub feasible_eq1: bool,
    /// Split-clearing payments of every incoming claim of the seller.
    pub incoming_payments: BTreeMap<ClaimId, Money>,
}

/// A found multi-trade; rates may exceed 1 by up to the recorded epsilon.
#[derive(Clone, Debug)]
pub struct MultiTradeResult {
    pub claims: Vec<ClaimId>,
    pub rates: Vec<Rational>,
    pub return_paid: Money,
    pub achieved_assets: Money,
    pub epsilon_used: Rational,
    /// External subsidies (to the seller, to the buyer) granted by the
    /// subsidized fixed-rate scheme; `None` for unsubsidized trades.
    pub subsidies: Option<(Money, Money)>,
    pub outcome: TradeOutcome,
}

fn multi_spec(v: &str, w: &str, claims: Vec<ClaimId>, rates: Vec<Rational>) -> TradeSpec {
    TradeSpec::new(TradeDirection::Incoming, v, w, claims, rates)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkKind {
    EdgeRanking,
    Proportional,
    General,
}

/// Payment kind of the network as seen by the specialized solvers: banks
/// with at most one outgoing claim behave identically under every kind.
pub fn network_kind(network: &FinancialNetwork) -> NetworkKind {
    let mut seen_er = false;
    let mut seen_prop = false;
    for bank in network.banks() {
        if network.outgoing(&bank.id).len() < 2 {
            continue;
        }
        match &bank.payment {
            PaymentFunction::EdgeRanking(_) => seen_er = true,
            PaymentFunction::Proportional => seen_prop = true,
            PaymentFunction::GeneralMonotone(_) => return NetworkKind::General,
        }
    }
    match (seen_er, seen_prop) {
        (true, true) => NetworkKind::General,
        (false, true) => NetworkKind::Proportional,
        _ => NetworkKind::EdgeRanking,
    }
}

/// Optimal trade of the fixed claim set `C` (all held by `v`) to `w` at a
/// uniform rate: the set is bundled through an accumulator bank and the
/// single-trade machinery runs on the bundle claim.
pub fn optimal_multi_in_fixed_set(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    claim_set: &[ClaimId],
) -> Result<Option<MultiTradeResult>> {
    for id in claim_set {
        let claim = network.claim(id)?;
        if claim.debtor == w {
            return Err(Error::SpecViolation(format!(
                "claim {id} is owed by the buyer {w}"
            )));
        }
    }
    let (acc_net, acc_claim) = accumulator_network(network, v, claim_set)?;
    let single = match network_kind(network) {
        NetworkKind::EdgeRanking => optimal_single_edge_ranking(&acc_net, &acc_claim, w)?,
        NetworkKind::Proportional => optimal_single_proportional(&acc_net, &acc_claim, w)?,
        NetworkKind::General => {
            approx_single_general(&acc_net, &acc_claim, w, &default_tolerance())?
        }
    };
    let Some(single) = single else {
        return Ok(None);
    };
    let rates = vec![single.alpha.clone(); claim_set.len()];
    let outcome = apply_trade(network, &multi_spec(v, w, claim_set.to_vec(), rates.clone()))?;
    if !outcome.creditor_positive {
        return Ok(None);
    }
    Ok(Some(MultiTradeResult {
        claims: claim_set.to_vec(),
        rates,
        return_paid: outcome.return_paid.clone(),
        achieved_assets: outcome.post_state.assets_of(v).clone(),
        epsilon_used: Rational::zero(),
        subsidies: None,
        outcome,
    }))
}

/// Clears the split network at asset level `A` and packages the knapsack
/// decision data.  Items are independent of any hypothetical traded subset;
/// claims owed by the buyer itself are not tradeable and carry no item.
pub fn knapsack_view(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    target: &Money,
) -> Result<KnapsackView> {
    let pre = clear(network)?;
    let a_v = pre.assets_of(v);
    if target <= a_v {
        return Err(Error::SpecViolation(format!(
            "target level {} does not exceed current assets {}",
            target.rat(),
            a_v.rat()
        )));
    }
    let a_w = pre.assets_of(w).clone();
    let split = split_network(network, v, w, target, &a_w)?;
    let state = clear(&split.network)?;
    let margin = pre.strictness_margin().max(state.strictness_margin());

    let a_v_x = network.bank(v)?.external_assets.rat().clone();
    let a_w_x = network.bank(w)?.external_assets.rat().clone();
    let mut incoming_payments = BTreeMap::new();
    let mut p_sum = Rational::zero();
    let mut items = Vec::new();
    for claim_id in network.incoming(v) {
        let claim = network.claim(claim_id)?;
        let p = state.payment(claim_id).clone();
        p_sum += p.rat();
        if claim.debtor != w {
            items.push(KnapsackItem {
                claim: claim_id.clone(),
                weight: p.clone(),
                value: claim.liability.clone() - p.clone(),
            });
        }
        incoming_payments.insert(claim_id.clone(), p);
    }
    let mut w_in_sum = Rational::zero();
    for claim_id in network.incoming(w) {
        w_in_sum += state.payment(claim_id).rat();
    }

    let value_bound = target.rat() - &a_v_x - &p_sum;
    let weight_bound = &a_w_x - target.rat() + &a_v_x + &p_sum;
    let lhs = (target.rat() - &a_v_x) + (a_w.rat() - &a_w_x);
    let rhs = &p_sum + &w_in_sum;
    let feasible_eq1 = (lhs - rhs).abs() <= margin;
    Ok(KnapsackView {
        target_assets: target.clone(),
        items,
        value_bound,
        weight_bound,
        feasible_eq1,
        incoming_payments,
    })
}

/// Minimum-weight-per-value knapsack table over rounded values.  Returns,
/// for each reachable rounded-value total, the minimum weight and the
/// (deterministically tie-broken) item subset achieving it.
fn min_weight_table(
    units: &[u64],
    weights: &[Rational],
) -> Vec<Option<(Rational, u64)>> {
    let total: u64 = units.iter().sum();
    let mut dp: Vec<Option<(Rational, u64)>> = vec![None; total as usize + 1];
    dp[0] = Some((Rational::zero(), 0));
    for (i, unit) in units.iter().enumerate() {
        for t in (0..dp.len()).rev() {
            let Some((weight, mask)) = dp[t].clone() else {
                continue;
            };
            let nt = t + *unit as usize;
            let cand = (weight + &weights[i], mask | (1 << i));
            match &dp[nt] {
                Some((best, best_mask)) if (best, *best_mask) <= (&cand.0, cand.1) => {}
                _ => dp[nt] = Some(cand),
            }
        }
    }
    dp
}

fn mask_to_claims(items: &[KnapsackItem], mask: u64) -> (Vec<ClaimId>, Rational, Rational) {
    let mut claims = Vec::new();
    let mut weight = Rational::zero();
    let mut liability_sum = Rational::zero();
    for (i, item) in items.iter().enumerate() {
        if mask & (1 << i) != 0 {
            claims.push(item.claim.clone());
            weight += item.weight.rat();
            liability_sum += item.weight.rat() + item.value.rat();
        }
    }
    (claims, weight, liability_sum)
}

/// Finds an ε-approximate trade reaching assets ≥ `A`, or `None` when the
/// knapsack conditions admit no claim set.  The returned total ρ satisfies
/// `ρ ≤ (1+ε)·Σ_{e∈C} ℓ_e` and `ρ ≤ a_w^x`; rates are uniform.
pub fn level_fptas(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    target: &Money,
    epsilon: &Rational,
) -> Result<Option<MultiTradeResult>> {
    if !epsilon.is_positive() {
        return Err(Error::SpecViolation("epsilon must be positive".into()));
    }
    let view = knapsack_view(network, v, w, target)?;
    if !view.feasible_eq1 || view.weight_bound.is_negative() {
        return Ok(None);
    }
    let items: Vec<KnapsackItem> = view
        .items
        .iter()
        .filter(|it| *it.weight.rat() <= view.weight_bound)
        .cloned()
        .collect();
    if items.len() > 62 {
        return Err(Error::InstanceTooLarge(format!(
            "{} knapsack items exceed the subset-mask capacity",
            items.len()
        )));
    }

    let chosen: Option<(Vec<ClaimId>, Rational, Rational)> = if view.value_bound.is_positive() {
        let m = Rational::from_integer((network.incoming(v).len().max(1) as u64).into());
        let r_max = items
            .iter()
            .map(|it| it.value.rat().clone())
            .max()
            .unwrap_or_else(Rational::zero);
        if !r_max.is_positive() {
            return Ok(None);
        }
        let scale = epsilon * &r_max / &m;
        let units: Vec<u64> = items
            .iter()
            .map(|it| {
                (it.value.rat() / &scale)
                    .ceil()
                    .to_integer()
                    .try_into()
                    .expect("rounded value fits in u64")
            })
            .collect();
        let need: u64 = (&view.value_bound / &scale)
            .ceil()
            .to_integer()
            .try_into()
            .expect("value bound fits in u64");
        let dp = min_weight_table(&units, &items.iter().map(|it| it.weight.rat().clone()).collect::<Vec<_>>());
        let mut best: Option<(Rational, usize, u64)> = None;
        for (t, entry) in dp.iter().enumerate() {
            let Some((weight, mask)) = entry else { continue };
            if (t as u64) < need || *weight > view.weight_bound || *mask == 0 {
                continue;
            }
            let cand = (weight.clone(), t, *mask);
            if best.as_ref().map_or(true, |b| cand < *b) {
                best = Some(cand);
            }
        }
        best.map(|(_, _, mask)| mask_to_claims(&items, mask))
    } else {
        // The level barely exceeds current assets: any single claim whose
        // payment makes the return positive works; take the cheapest.
        items
            .iter()
            .filter(|it| it.weight.rat() + &view.value_bound > Rational::zero())
            .min_by(|a, b| a.weight.rat().cmp(b.weight.rat()).then(a.claim.cmp(&b.claim)))
            .map(|it| {
                (
                    vec![it.claim.clone()],
                    it.weight.rat().clone(),
                    it.weight.rat() + it.value.rat(),
                )
            })
    };
    let Some((claims, weight, liability_sum)) = chosen else {
        return Ok(None);
    };

    let rho = &view.value_bound + &weight;
    let cap = Rational::one() + epsilon;
    let alpha = (&rho / &liability_sum).min(cap.clone());
    let rates = vec![alpha; claims.len()];
    let spec = multi_spec(v, w, claims.clone(), rates.clone()).with_cap(cap);
    let outcome = apply_trade(network, &spec)?;
    if !outcome.creditor_positive {
        return Ok(None);
    }
    Ok(Some(MultiTradeResult {
        claims,
        rates,
        return_paid: outcome.return_paid.clone(),
        achieved_assets: outcome.post_state.assets_of(v).clone(),
        epsilon_used: epsilon.clone(),
        subsidies: None,
        outcome,
    }))
}

/// Binary search over asset levels spaced `delta` apart, probing each level
/// with [`level_fptas`]; returns the trade found at the highest successful
/// level.  The achieved assets fall short of the best exact trade's level by
/// less than `delta`.
pub fn bicriteria_fptas(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    epsilon: &Rational,
    delta: &Money,
) -> Result<Option<MultiTradeResult>> {
    if delta.is_zero() {
        return Err(Error::SpecViolation("delta must be positive".into()));
    }
    let pre = clear(network)?;
    let a_v = pre.assets_of(v).clone();
    let mut m_v = network.bank(v)?.external_assets.rat()
        + network.bank(w)?.external_assets.rat();
    for claim_id in network.incoming(v) {
        m_v += network.claim(claim_id)?.liability.rat();
    }
    if m_v <= *a_v.rat() {
        return Ok(None);
    }
    let steps: u64 = ((&m_v - a_v.rat()) / delta.rat())
        .ceil()
        .to_integer()
        .try_into()
        .map_err(|_| Error::SpecViolation("delta too small for the level range".into()))?;
    let target_at = |k: u64| -> Money {
        let t = (a_v.rat() + delta.rat() * Rational::from_integer(k.into())).min(m_v.clone());
        Money::try_from_rational(t).unwrap()
    };
    let mut best: Option<(u64, MultiTradeResult)> = None;
    let mut lo = 1u64;
    let mut hi = steps;
    while lo <= hi {
        let mid = lo + (hi - lo) / 2;
        match level_fptas(network, v, w, &target_at(mid), epsilon)? {
            Some(result) => {
                if best.as_ref().map_or(true, |(k, _)| mid > *k) {
                    best = Some((mid, result));
                }
                lo = mid + 1;
            }
            None => {
                if mid == 1 {
                    break;
                }
                hi = mid - 1;
            }
        }
    }
    Ok(best.map(|(_, r)| r))
}

/// On edge-ranking networks with integral liabilities and externals the
/// optimal level is integral, so the bicriteria search at unit spacing is
/// exactly optimal.
pub fn exact_level_edge_ranking(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    epsilon: &Rational,
) -> Result<Option<MultiTradeResult>> {
    if network_kind(network) != NetworkKind::EdgeRanking {
        return Err(Error::WrongPaymentKind(
            "exact level search requires an edge-ranking network".into(),
        ));
    }
    for bank in network.banks() {
        if !bank.external_assets.is_integer() {
            return Err(Error::SpecViolation(format!(
                "bank {} has non-integral external assets",
                bank.id
            )));
        }
    }
    for claim in network.claims() {
        if !claim.liability.is_integer() {
            return Err(Error::SpecViolation(format!(
                "claim {} has non-integral liability",
                claim.id
            )));
        }
    }
    bicriteria_fptas(network, v, w, epsilon, &Money::from_int(1))
}

/// Decides whether trading the claim set `C` at the given fixed per-claim
/// rates is creditor-positive.
pub fn decide_fixed_rates_set(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    claim_set: &[ClaimId],
    rates: &[Rational],
) -> Result<TradeOutcome> {
    apply_trade(
        network,
        &multi_spec(v, w, claim_set.to_vec(), rates.to_vec()),
    )
}

/// Sparse two-dimensional subset table keyed by the rounded-up and
/// rounded-down net-payment totals; stores the minimum exact return and a
/// deterministic subset mask per key.
fn signed_dp(
    ups: &[i64],
    downs: &[i64],
    returns: &[Rational],
) -> BTreeMap<(i64, i64), (Rational, u64)> {
    let mut dp: BTreeMap<(i64, i64), (Rational, u64)> = BTreeMap::new();
    dp.insert((0, 0), (Rational::zero(), 0));
    for i in 0..ups.len() {
        let snapshot: Vec<((i64, i64), (Rational, u64))> =
            dp.iter().map(|(k, v)| (*k, v.clone())).collect();
        for ((x, y), (ret, mask)) in snapshot {
            let key = (x + ups[i], y + downs[i]);
            let cand = (ret + &returns[i], mask | (1 << i));
            match dp.get(&key) {
                Some(best) if (best.0.clone(), best.1) <= (cand.0.clone(), cand.1) => {}
                _ => {
                    dp.insert(key, cand);
                }
            }
        }
    }
    dp
}

/// Fixed-rate trades with external subsidies: scans asset levels spaced by
/// the coarse step `s = Σℓ·δ/n` from the top, and at each level fills a
/// two-dimensional subset table over rounded net payments.  An accepted
/// subset yields an exact creditor-positive trade after subsidies of at most
/// `2s` to the seller and `s` to the buyer; both subsidies are verified by
/// re-clearing the subsidized post-trade network.
///
/// `rates` must give a rate in `[0, 1]` for every incoming claim of `v` not
/// owed by `w`.  The result's `achieved_assets` is the seller's asset level
/// in the subsidized clearing.
pub fn subsidized_fptas_fixed_rates(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    rates: &BTreeMap<ClaimId, Rational>,
    delta: &Rational,
) -> Result<Option<MultiTradeResult>> {
    if !delta.is_positive() {
        return Err(Error::SpecViolation("delta must be positive".into()));
    }
    let tradeable: Vec<ClaimId> = network
        .incoming(v)
        .iter()
        .filter(|id| network.claim(id).unwrap().debtor != w)
        .cloned()
        .collect();
    if tradeable.len() > 62 {
        return Err(Error::InstanceTooLarge(format!(
            "{} tradeable claims exceed the subset-mask capacity",
            tradeable.len()
        )));
    }
    for id in &tradeable {
        let rate = rates.get(id).ok_or_else(|| {
            Error::SpecViolation(format!("no rate given for incoming claim {id}"))
        })?;
        if rate.is_negative() || *rate > Rational::one() {
            return Err(Error::SpecViolation(format!("rate for {id} outside [0, 1]")));
        }
    }
    let n = network.incoming(v).len();
    if n == 0 || tradeable.is_empty() {
        return Ok(None);
    }

    let pre = clear(network)?;
    let a_v = pre.assets_of(v).clone();
    let a_w = pre.assets_of(w).clone();
    let a_v_x = network.bank(v)?.external_assets.rat().clone();
    let a_w_x = network.bank(w)?.external_assets.clone();
    let mut liability_total = Rational::zero();
    for id in network.incoming(v) {
        liability_total += network.claim(id)?.liability.rat();
    }
    let n_rat = Rational::from_integer((n as u64).into());
    let step = &liability_total * delta / &n_rat;
    if !step.is_positive() {
        return Ok(None);
    }
    let outer: u64 = (&n_rat / delta)
        .ceil()
        .to_integer()
        .try_into()
        .expect("outer step count fits in u64");

    let fixed_return = |id: &ClaimId| -> Rational {
        network.claim(id).unwrap().liability.rat() * &rates[id]
    };

    for i in (1..=outer).rev() {
        let level_rat = a_v.rat() + &step * Rational::from_integer(i.into());
        let level = Money::try_from_rational(level_rat.clone()).unwrap();
        let split = split_network(network, v, w, &level, &a_w)?;
        let state = clear(&split.network)?;
        let margin = state.strictness_margin();

        let mut p_sum = Rational::zero();
        for id in network.incoming(v) {
            p_sum += state.payment(id).rat();
        }
        let mut w_in_sum = Rational::zero();
        for id in network.incoming(w) {
            w_in_sum += state.payment(id).rat();
        }

        let nets: Vec<Rational> = tradeable
            .iter()
            .map(|id| fixed_return(id) - state.payment(id).rat())
            .collect();
        let returns: Vec<Rational> = tradeable.iter().map(&fixed_return).collect();
        let mut fine = nets.iter().map(|r| r.abs()).sum::<Rational>() * delta / (&n_rat * &n_rat);
        if !fine.is_positive() {
            fine = Rational::one();
        }
        let to_i64 = |r: Rational| -> i64 { r.to_integer().try_into().expect("rounded net fits in i64") };
        let ups: Vec<i64> = nets.iter().map(|r| to_i64((r / &fine).ceil())).collect();
        let downs: Vec<i64> = nets.iter().map(|r| to_i64((r / &fine).floor())).collect();

        let need_v = &level_rat - &step - &a_v_x - &p_sum;
        let room_w = a_w_x.rat() + &w_in_sum - a_w.rat();
        let dp = signed_dp(&ups, &downs, &returns);
        let mut candidates: Vec<(Rational, u64)> = dp
            .into_iter()
            .filter(|((x, y), (ret, mask))| {
                *mask != 0
                    && Rational::from_integer((*x).into()) * &fine >= need_v
                    && Rational::from_integer((*y).into()) * &fine <= room_w
                    && *ret <= *a_w_x.rat()
            })
            .map(|(_, entry)| entry)
            .collect();
        candidates.sort();
        candidates.dedup();

        for (_, mask) in candidates {
            let mut claims = Vec::new();
            let mut claim_rates = Vec::new();
            for (j, id) in tradeable.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    claims.push(id.clone());
                    claim_rates.push(rates[id].clone());
                }
            }
            let spec = multi_spec(v, w, claims.clone(), claim_rates.clone());
            let Ok(outcome) = apply_trade(network, &spec) else {
                continue;
            };
            let a_v_post = outcome.post_state.assets_of(v).clone();
            let a_w_post = outcome.post_state.assets_of(w).clone();
            let to_v = Money::saturating_from_rational(&level_rat - a_v_post.rat());
            let to_w = Money::saturating_from_rational(a_w.rat() - a_w_post.rat());
            let two_step = &step * Rational::from_integer(2.into());
            if *to_v.rat() > two_step || *to_w.rat() > step {
                continue;
            }
            let subsidized = outcome
                .post_network
                .clone()
                .with_external_assets(
                    v,
                    outcome.post_network.bank(v)?.external_assets.clone() + &to_v,
                )?
                .with_external_assets(
                    w,
                    outcome.post_network.bank(w)?.external_assets.clone() + &to_w,
                )?;
            let sub_state = clear(&subsidized)?;
            let a_v_sub = sub_state.assets_of(v).clone();
            let a_w_sub = sub_state.assets_of(w).clone();
            let ok = a_v_sub.rat() + &margin >= level_rat
                && *a_v_sub.rat() > a_v.rat() - &margin
                && a_w_sub.rat() + &margin >= *a_w.rat();
            if !ok {
                continue;
            }
            let return_paid = outcome.return_paid.clone();
            return Ok(Some(MultiTradeResult {
                claims,
                rates: claim_rates,
                return_paid,
                achieved_assets: a_v_sub,
                epsilon_used: delta.clone(),
                subsidies: Some((to_v, to_w)),
                outcome,
            }));
        }
    }
    Ok(None)
}
