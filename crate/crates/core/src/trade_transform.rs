//! Trade application and the auxiliary network constructions used by the
//! optimizers: the post-trade network, the accumulator network (bundling a
//! set of incoming claims into one edge), the return network (modelling the
//! buyer's surplus as an explicit return edge), and the split network with
//! its budget-difference test.

use std::collections::BTreeMap;

use num::Zero;

use crate::clearing::{clear, ClearingState};
use crate::error::{Error, Result};
use crate::money::{Money, Rational};
use crate::net_model::{
    validate_trade, Bank, BankId, Claim, ClaimId, FinancialNetwork, PaymentFunction,
    PiecewiseLinear, TradeDirection, TradeSpec,
};

/// Result of applying a trade: the rewired network, both clearing states,
/// per-bank asset deltas, and the classification flags.
#[derive(Clone, Debug)]
pub struct TradeOutcome {
    pub post_network: FinancialNetwork,
    pub pre_state: ClearingState,
    pub post_state: ClearingState,
    pub deltas: BTreeMap<BankId, Rational>,
    pub return_paid: Money,
    pub creditor_positive: bool,
    pub pareto_positive: bool,
    pub both_strict: bool,
}

/// Budget differences of a split-network clearing (see
/// [`budget_differences`]): a trade reaching asset level `A` exists iff
/// `d_v = d_w > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetDifference {
    pub d_v: Rational,
    pub d_w: Rational,
}

/// Builds the post-trade network without clearing it: traded claims are
/// rewired to the buyer, the selling side is credited with the return, and
/// the buyer's externals are debited.
pub fn post_trade_network(
    network: &FinancialNetwork,
    trade: &TradeSpec,
) -> Result<FinancialNetwork> {
    let return_paid = validate_trade(network, trade)?;
    let (banks, claims) = network.clone().into_parts();
    let mut banks: BTreeMap<BankId, Bank> = banks.into_iter().map(|b| (b.id.clone(), b)).collect();
    let mut claims: BTreeMap<ClaimId, Claim> =
        claims.into_iter().map(|c| (c.id.clone(), c)).collect();
    for (claim_id, rate) in trade.claims.iter().zip(&trade.rates) {
        let claim = claims.get_mut(claim_id).unwrap();
        let credit = &claim.liability * rate;
        match trade.direction {
            TradeDirection::Incoming => {
                claim.creditor = trade.buyer.clone();
            }
            TradeDirection::Outgoing => {
                let creditor = claim.creditor.clone();
                claim.creditor = trade.buyer.clone();
                let bank = banks.get_mut(&creditor).unwrap();
                bank.external_assets += &credit;
            }
        }
    }
    if trade.direction == TradeDirection::Incoming {
        let focal = banks.get_mut(&trade.focal_bank).unwrap();
        focal.external_assets += &return_paid;
    }
    let buyer = banks.get_mut(&trade.buyer).unwrap();
    buyer.external_assets = buyer
        .external_assets
        .checked_sub(&return_paid)
        .expect("validate_trade checked affordability");
    FinancialNetwork::build_lenient(banks.into_values().collect(), claims.into_values().collect())
}

/// Applies a trade and classifies it by comparing exact clearing states.
/// For states computed with a tolerance, strictness requires exceeding twice
/// the tolerance (conservative).
pub fn apply_trade(network: &FinancialNetwork, trade: &TradeSpec) -> Result<TradeOutcome> {
    let return_paid = validate_trade(network, trade)?;
    let post_network = post_trade_network(network, trade)?;
    let pre_state = clear(network)?;
    let post_state = clear(&post_network)?;
    let margin = pre_state.strictness_margin().max(post_state.strictness_margin());
    let mut deltas = BTreeMap::new();
    for id in network.bank_ids() {
        let delta = post_state.assets_of(id).rat() - pre_state.assets_of(id).rat();
        deltas.insert(id.clone(), delta);
    }
    let strict = |d: &Rational| *d > margin;
    let weak = |d: &Rational| *d >= -margin.clone();
    let focal = &deltas[&trade.focal_bank];
    let buyer = &deltas[&trade.buyer];
    let creditor_positive = strict(focal) && weak(buyer);
    let pareto_positive =
        deltas.values().all(weak) && deltas.values().any(|d| strict(d));
    let both_strict = strict(focal) && strict(buyer);
    Ok(TradeOutcome {
        post_network,
        pre_state,
        post_state,
        deltas,
        return_paid,
        creditor_positive,
        pareto_positive,
        both_strict,
    })
}

/// Classification flags of a trade: (creditor_positive, pareto_positive,
/// both_strict).  `both_strict` must always come back false for incoming
/// trades (seller and buyer never both improve strictly).
pub fn classify_trade(
    network: &FinancialNetwork,
    trade: &TradeSpec,
) -> Result<(bool, bool, bool)> {
    let outcome = apply_trade(network, trade)?;
    Ok((
        outcome.creditor_positive,
        outcome.pareto_positive,
        outcome.both_strict,
    ))
}

fn fresh_id(base: String, taken: impl Fn(&str) -> bool) -> String {
    let mut id = base;
    while taken(&id) {
        id.push('_');
    }
    id
}

/// Adds an accumulator bank `v̂` collecting the payments of the claim set
/// `C` (all held by `v`) and forwarding them to `v` over a single claim `ê`
/// with liability `Σ ℓ_e`.  The clearing state restricted to the original
/// claims is unchanged, so a multi-trade of `C` is equivalent to the single
/// trade of `ê`.
pub fn accumulator_network(
    network: &FinancialNetwork,
    v: &str,
    claim_set: &[ClaimId],
) -> Result<(FinancialNetwork, ClaimId)> {
    if claim_set.is_empty() {
        return Err(Error::SpecViolation("accumulator needs a non-empty claim set".into()));
    }
    network.bank(v)?;
    let mut total = Money::zero();
    for id in claim_set {
        let claim = network.claim(id)?;
        if claim.creditor != v {
            return Err(Error::SpecViolation(format!("claim {id} is not held by {v}")));
        }
        total += &claim.liability;
    }
    let acc_bank = fresh_id(format!("{v}__acc"), |id| network.has_bank(id));
    let acc_claim = fresh_id(format!("{v}__acc_claim"), |id| network.claim(id).is_ok());
    let (mut banks, mut claims) = network.clone().into_parts();
    for claim in claims.iter_mut() {
        if claim_set.contains(&claim.id) {
            claim.creditor = acc_bank.clone();
        }
    }
    claims.push(Claim {
        id: acc_claim.clone(),
        debtor: acc_bank.clone(),
        creditor: v.to_string(),
        liability: total,
    });
    banks.push(Bank {
        id: acc_bank,
        external_assets: Money::zero(),
        payment: PaymentFunction::EdgeRanking(vec![acc_claim.clone()]),
    });
    let net = FinancialNetwork::build_lenient(banks, claims)?;
    Ok((net, acc_claim))
}

/// Identifier of the return claim added by [`return_network`].
pub fn return_claim_id(claim: &str) -> String {
    format!("{claim}__ret")
}

/// Builds the return network for trading claim `e` (held by `v`) to buyer
/// `w`: `e` is rewired to `w`, and a return claim `e_r: w→v` with liability
/// `min(ℓ_e, a_w^x)` carries every unit of income `w` receives above its
/// pre-trade assets `a_w`.  `w`'s own payments are frozen at their pre-trade
/// levels (liabilities truncated to the pre-trade payments).
///
/// For an edge-ranking buyer the modified function stays an edge-ranking:
/// truncated original claims first, then (when `w` retained equity
/// pre-trade) a claim to a fresh absorbing bank covering the retained
/// amount, then the return claim.  Otherwise the modified function is
/// stored as a general-monotone table.
pub fn return_network(
    network: &FinancialNetwork,
    e: &str,
    w: &str,
) -> Result<FinancialNetwork> {
    let claim = network.claim(e)?.clone();
    let v = claim.creditor.clone();
    if v == w {
        return Err(Error::SpecViolation(format!("claim {e} is already held by {w}")));
    }
    if claim.debtor == w {
        return Err(Error::SpecViolation(format!("claim {e} is owed by the buyer {w}")));
    }
    let buyer = network.bank(w)?.clone();
    let pre = clear(network)?;
    let a_w = pre.assets_of(w).clone();
    let liability_ret = claim.liability.clone().min(buyer.external_assets.clone());
    let ret_id = fresh_id(return_claim_id(e), |id| network.claim(id).is_ok());

    let (mut banks, mut claims) = network.clone().into_parts();
    for c in claims.iter_mut() {
        if c.id == e {
            c.creditor = w.to_string();
        }
    }
    claims.push(Claim {
        id: ret_id.clone(),
        debtor: w.to_string(),
        creditor: v,
        liability: liability_ret.clone(),
    });

    // Pre-trade payments of w, which become the truncated liabilities.
    let frozen = network.evaluate_payment(w, &a_w.clone().min(network.max_funds(w)?))?;
    let paid_total: Money = frozen.values().fold(Money::zero(), |mut acc, p| {
        acc += p;
        acc
    });
    for c in claims.iter_mut() {
        if frozen.contains_key(&c.id) {
            c.liability = frozen[&c.id].clone();
        }
    }

    let is_ranking = matches!(buyer.payment, PaymentFunction::EdgeRanking(_))
        || network.outgoing(w).is_empty();
    if is_ranking {
        let mut order = match &buyer.payment {
            PaymentFunction::EdgeRanking(order) => order.clone(),
            _ => network.outgoing(w).to_vec(),
        };
        // Equity retained by w pre-trade sits between its (truncated) claims
        // and the return claim in the filling order.
        let gap = a_w.checked_sub(&paid_total).unwrap_or_else(Money::zero);
        if !gap.is_zero() {
            let equity_bank = fresh_id(format!("{w}__equity"), |id| network.has_bank(id));
            let equity_claim = fresh_id(format!("{e}__equity"), |id| network.claim(id).is_ok());
            banks.push(Bank {
                id: equity_bank.clone(),
                external_assets: Money::zero(),
                payment: PaymentFunction::EdgeRanking(vec![]),
            });
            claims.push(Claim {
                id: equity_claim.clone(),
                debtor: w.to_string(),
                creditor: equity_bank,
                liability: gap,
            });
            order.push(equity_claim);
        }
        order.push(ret_id.clone());
        for bank in banks.iter_mut() {
            if bank.id == w {
                bank.payment = PaymentFunction::EdgeRanking(order.clone());
            }
        }
    } else {
        // Cap each original map at a_w and route the surplus to the return
        // claim, as piecewise-linear tables.
        let mut tables: BTreeMap<ClaimId, PiecewiseLinear> = BTreeMap::new();
        for claim_id in network.outgoing(w) {
            let original_bank = network.bank(w)?;
            let mut points: Vec<(Rational, Rational)> = Vec::new();
            points.push((Rational::zero(), Rational::zero()));
            // Sample the original function's pieces strictly below a_w.
            let breakpoints = table_breakpoints(network, original_bank, claim_id);
            for x in breakpoints {
                if x > Rational::zero() && x < *a_w.rat() {
                    let y = network
                        .evaluate_payment_unchecked(original_bank, &x)
                        .remove(claim_id)
                        .unwrap()
                        .into_rat();
                    points.push((x, y));
                }
            }
            if !a_w.is_zero() {
                points.push((a_w.rat().clone(), frozen[claim_id].rat().clone()));
            }
            points.sort_by(|p, q| p.0.cmp(&q.0));
            points.dedup_by(|p, q| p.0 == q.0);
            tables.insert(claim_id.clone(), PiecewiseLinear::new(points).unwrap());
        }
        let mut ret_points = vec![(Rational::zero(), Rational::zero())];
        if !a_w.is_zero() {
            ret_points.push((a_w.rat().clone(), Rational::zero()));
        }
        if !liability_ret.is_zero() {
            ret_points.push((
                a_w.rat() + liability_ret.rat(),
                liability_ret.rat().clone(),
            ));
        }
        tables.insert(ret_id, PiecewiseLinear::new(ret_points).unwrap());
        for bank in banks.iter_mut() {
            if bank.id == w {
                bank.payment = PaymentFunction::GeneralMonotone(tables.clone());
            }
        }
    }
    FinancialNetwork::build_lenient(banks, claims)
}

/// Breakpoint x-coordinates of a bank's payment map for one claim.
fn table_breakpoints(network: &FinancialNetwork, bank: &Bank, claim_id: &str) -> Vec<Rational> {
    match &bank.payment {
        PaymentFunction::Proportional => {
            vec![network.total_liabilities(&bank.id).unwrap().into_rat()]
        }
        PaymentFunction::EdgeRanking(order) => {
            let mut prefix = Rational::zero();
            let mut points = Vec::new();
            for id in order {
                let l = network.claim(id).unwrap().liability.rat().clone();
                if id == claim_id {
                    points.push(prefix.clone());
                    points.push(&prefix + &l);
                    break;
                }
                prefix += &l;
            }
            points
        }
        PaymentFunction::GeneralMonotone(tables) => tables[claim_id]
            .points()
            .iter()
            .map(|(x, _)| x.clone())
            .collect(),
    }
}

/// A split network plus the bookkeeping needed for budget differences.
#[derive(Clone, Debug)]
pub struct SplitNetwork {
    pub network: FinancialNetwork,
    pub v: BankId,
    pub w: BankId,
    pub v_in: BankId,
    pub v_out: BankId,
    pub w_in: BankId,
    pub w_out: BankId,
    /// Target asset level assigned to v's out-source.
    pub target: Money,
    /// Buyer's pre-trade total assets, assigned to w's out-source.
    pub w_assets: Money,
}

/// Splits `v` and `w` each into an in-sink (keeping the incoming claims and
/// the original externals, for bookkeeping) and an out-source holding the
/// outgoing claims and payment function.  The out-sources receive external
/// assets `A` (for `v`) and the buyer's pre-trade assets `a_w` (for `w`).
///
/// Incoming claims of `v` keep pointing at `v`'s sink regardless of any
/// hypothetical traded subset: sinks pay nothing, so payments are unaffected
/// by which sink a claim targets, and [`budget_differences`] accounts for
/// the traded subset explicitly.
pub fn split_network(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    target: &Money,
    w_assets: &Money,
) -> Result<SplitNetwork> {
    if v == w {
        return Err(Error::SpecViolation("split endpoints must differ".into()));
    }
    let v_bank = network.bank(v)?.clone();
    let w_bank = network.bank(w)?.clone();
    let mk = |base: String| fresh_id(base, |id| network.has_bank(id));
    let v_in = mk(format!("{v}__in"));
    let v_out = mk(format!("{v}__out"));
    let w_in = mk(format!("{w}__in"));
    let w_out = mk(format!("{w}__out"));
    let (banks, mut claims) = network.clone().into_parts();
    let mut banks: Vec<Bank> = banks
        .into_iter()
        .filter(|b| b.id != v && b.id != w)
        .collect();
    banks.push(Bank {
        id: v_in.clone(),
        external_assets: v_bank.external_assets.clone(),
        payment: PaymentFunction::EdgeRanking(vec![]),
    });
    banks.push(Bank {
        id: v_out.clone(),
        external_assets: target.clone(),
        payment: v_bank.payment.clone(),
    });
    banks.push(Bank {
        id: w_in.clone(),
        external_assets: w_bank.external_assets.clone(),
        payment: PaymentFunction::EdgeRanking(vec![]),
    });
    banks.push(Bank {
        id: w_out.clone(),
        external_assets: w_assets.clone(),
        payment: w_bank.payment.clone(),
    });
    for claim in claims.iter_mut() {
        if claim.creditor == v {
            claim.creditor = v_in.clone();
        } else if claim.creditor == w {
            claim.creditor = w_in.clone();
        }
        if claim.debtor == v {
            claim.debtor = v_out.clone();
        } else if claim.debtor == w {
            claim.debtor = w_out.clone();
        }
    }
    let network = FinancialNetwork::build_lenient(banks, claims)?;
    Ok(SplitNetwork {
        network,
        v: v.to_string(),
        w: w.to_string(),
        v_in,
        v_out,
        w_in,
        w_out,
        target: target.clone(),
        w_assets: w_assets.clone(),
    })
}

/// Budget differences for a hypothetical trade of the claim subset `traded`
/// (claims of `v`, possibly empty) at the split's target level `A`:
///
/// * `d_v = A − (a_v^x + Σ_{e ∈ E^-(v) \ traded} p_e)` — what `v` spends
///   beyond its untraded income to reach `A`.
/// * `d_w = (a_w^x + Σ_{e ∈ E^-(w) ∪ traded} p_e) − a_w` — what `w` earns
///   beyond its pre-trade assets.
pub fn budget_differences(
    split: &SplitNetwork,
    state: &ClearingState,
    traded: &[ClaimId],
) -> BudgetDifference {
    let net = &split.network;
    let a_v_x = net.bank(&split.v_in).unwrap().external_assets.rat().clone();
    let a_w_x = net.bank(&split.w_in).unwrap().external_assets.rat().clone();
    let mut untraded_in_v = Rational::zero();
    let mut traded_sum = Rational::zero();
    for claim_id in net.incoming(&split.v_in) {
        let p = state.payment(claim_id).rat();
        if traded.contains(claim_id) {
            traded_sum += p;
        } else {
            untraded_in_v += p;
        }
    }
    let mut in_w = Rational::zero();
    for claim_id in net.incoming(&split.w_in) {
        in_w += state.payment(claim_id).rat();
    }
    let d_v = split.target.rat() - (a_v_x + untraded_in_v);
    let d_w = (a_w_x + in_w + traded_sum) - split.w_assets.rat();
    BudgetDifference { d_v, d_w }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::clear;
    use crate::money::Money;
    use crate::testkit::{ex1_edge_ranking, ex1_proportional};
    use num::One;

    fn single_trade(alpha: i64, den: i64) -> TradeSpec {
        TradeSpec::new(
            TradeDirection::Incoming,
            "v",
            "w",
            vec!["e_uv".into()],
            vec![Rational::new(alpha.into(), den.into())],
        )
    }

    #[test]
    fn ex1_single_trade_alpha_one() {
        let outcome = apply_trade(&ex1_edge_ranking(), &single_trade(1, 1)).unwrap();
        assert_eq!(outcome.return_paid, Money::from_int(2));
        assert_eq!(outcome.deltas["v"], Rational::from_integer(3.into()));
        assert_eq!(outcome.deltas["y"], Rational::from_integer(2.into()));
        assert_eq!(outcome.deltas["u"], Rational::zero());
        assert_eq!(outcome.deltas["w"], Rational::zero());
        assert!(outcome.creditor_positive);
        assert!(outcome.pareto_positive);
        assert!(!outcome.both_strict);
    }

    #[test]
    fn trade_at_current_payment_is_neutral() {
        // Return exactly the current payment p_e = 1 (α = 1/2): nothing moves.
        let outcome = apply_trade(&ex1_edge_ranking(), &single_trade(1, 2)).unwrap();
        assert!(outcome.deltas.values().all(|d| d.is_zero()));
        assert!(!outcome.creditor_positive);
        assert!(!outcome.pareto_positive);
    }

    #[test]
    fn zero_rate_on_zero_payment_claim_is_neutral() {
        // (y,v) carries no payment pre-trade; buying it for free from u's
        // perspective... use buyer u with α = 0.
        let trade = TradeSpec::new(
            TradeDirection::Incoming,
            "v",
            "u",
            vec!["e_yv".into()],
            vec![Rational::zero()],
        );
        let outcome = apply_trade(&ex1_edge_ranking(), &trade).unwrap();
        assert!(outcome.deltas.values().all(|d| d.is_zero()));
    }

    #[test]
    fn accumulator_preserves_clearing() {
        let net = ex1_edge_ranking();
        let base = clear(&net).unwrap();
        for set in [vec!["e_uv".to_string()], vec!["e_uv".to_string(), "e_yv".to_string()]] {
            let (acc, acc_claim) = accumulator_network(&net, "v", &set).unwrap();
            let state = clear(&acc).unwrap();
            for claim in net.claims() {
                assert_eq!(
                    state.payment(&claim.id),
                    base.payment(&claim.id),
                    "claim {} changed",
                    claim.id
                );
            }
            let expected: Money = set
                .iter()
                .fold(Money::zero(), |mut acc, id| {
                    acc += base.payment(id);
                    acc
                });
            assert_eq!(state.payment(&acc_claim), &expected);
        }
    }

    #[test]
    fn accumulator_rejects_empty_set() {
        assert!(accumulator_network(&ex1_edge_ranking(), "v", &[]).is_err());
    }

    #[test]
    fn return_network_reproduces_example_optimum() {
        let net = ex1_edge_ranking();
        let ret = return_network(&net, "e_uv", "w").unwrap();
        let state = clear(&ret).unwrap();
        let ret_claim = return_claim_id("e_uv");
        assert_eq!(state.payment(&ret_claim), &Money::from_int(2));
        assert_eq!(state.assets_of("v"), &Money::from_int(4));
        // a_w^ret ∈ (a_w, a_w + ℓ_ret] = (3, 5]
        let a_w_ret = state.assets_of("w");
        assert!(a_w_ret.rat() > &Rational::from_integer(3.into()));
        assert!(a_w_ret.rat() <= &Rational::from_integer(5.into()));
    }

    #[test]
    fn return_network_proportional_buyer_uses_tables() {
        let net = ex1_proportional();
        // Buyer y (proportional, one outgoing claim... use v's debtor u as
        // buyer is not allowed; buy (y,v) for w instead: w has no outgoing
        // claims, so the cap construction has an empty claim part.
        let ret = return_network(&net, "e_yv", "w").unwrap();
        let state = clear(&ret).unwrap();
        // w's pre-trade assets are 3; all income above 3 flows back to v.
        let ret_claim = return_claim_id("e_yv");
        let p_ret = state.payment(&ret_claim);
        let a_w = state.assets_of("w");
        assert_eq!(
            a_w.rat() - p_ret.rat(),
            Rational::from_integer(3.into())
        );
    }

    #[test]
    fn split_network_ex1_at_target_four() {
        let net = ex1_edge_ranking();
        let pre = clear(&net).unwrap();
        let split = split_network(
            &net,
            "v",
            "w",
            &Money::from_int(4),
            pre.assets_of("w"),
        )
        .unwrap();
        let state = clear(&split.network).unwrap();
        assert_eq!(state.payment("e_vw"), &Money::from_int(2));
        assert_eq!(state.payment("e_vy"), &Money::from_int(2));
        let d = budget_differences(&split, &state, &["e_uv".to_string()]);
        assert_eq!(d.d_v, Rational::from_integer(2.into()));
        assert_eq!(d.d_w, Rational::from_integer(2.into()));
    }

    #[test]
    fn split_at_pretrade_assets_is_neutral() {
        let net = ex1_edge_ranking();
        let pre = clear(&net).unwrap();
        let split = split_network(
            &net,
            "v",
            "w",
            pre.assets_of("v"),
            pre.assets_of("w"),
        )
        .unwrap();
        let state = clear(&split.network).unwrap();
        for claim in net.claims() {
            assert_eq!(state.payment(&claim.id), pre.payment(&claim.id));
        }
        let d = budget_differences(&split, &state, &["e_uv".to_string()]);
        // d_v = 1 − (0 + p_yv=0) = 1, d_w = 2 + p_vw(1) + p_uv(1) − 3 = 1:
        // equal but the level equals the pre-trade assets, so no strict gain.
        assert_eq!(d.d_v, d.d_w);
        assert_eq!(d.d_v, Rational::one());
    }

    #[test]
    fn classify_matches_apply() {
        let flags = classify_trade(&ex1_edge_ranking(), &single_trade(1, 1)).unwrap();
        assert_eq!(flags, (true, true, false));
    }
}
