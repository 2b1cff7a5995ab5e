//! End-to-end acceptance suite.  Each test covers one release criterion and
//! prints a single `criterion N: pass` line on success; a panic marks the
//! criterion as failed.

use std::collections::BTreeMap;
use std::time::Instant;

use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clearnet::clearing::{clear, clear_proportional};
use clearnet::money::{Money, Rational};
use clearnet::multi_in_opt::{
    bicriteria_fptas, exact_level_edge_ranking, knapsack_view, network_kind,
    subsidized_fptas_fixed_rates, NetworkKind,
};
use clearnet::multi_out_opt::{decide_out_fixed, optimal_out_proportional};
use clearnet::net_model::{FinancialNetwork, TradeDirection, TradeSpec};
use clearnet::single_opt::{
    approx_single_general, optimal_single_edge_ranking, optimal_single_proportional,
};
use clearnet::testkit::{
    check_integrality, check_monotonicity, check_no_double_strict, check_non_expansivity,
    ex1_edge_ranking, ex1_post_trade_edge_ranking, ex1_proportional, gen_set_packing_prop,
    gen_subset_sum_incoming, gen_subset_sum_incoming_fixed, oracle_fixed_rates, oracle_multi_in,
    oracle_single_alpha, random_network, subset_sum_exists, RandomKind,
};
use clearnet::trade_transform::{apply_trade, TradeOutcome};
use clearnet::Error;

fn rat(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(p.into(), q.into())
}

/// Picks a buyer bank with positive external assets, excluding some ids.
fn pick_buyer(network: &FinancialNetwork, exclude: &[&str]) -> Option<String> {
    network
        .banks()
        .find(|b| !b.external_assets.is_zero() && !exclude.contains(&b.id.as_str()))
        .map(|b| b.id.clone())
}

/// A random single-claim trade instance of the requested payment kind.
fn single_instance(kind: RandomKind, seed: u64) -> Option<(FinancialNetwork, String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    let banks = rng.gen_range(3..=7);
    let claims = rng.gen_range(2..=10);
    let net = random_network(banks, claims, 6, kind, seed).ok()?;
    if net.n_claims() == 0 {
        return None;
    }
    let ids: Vec<String> = net.claims().map(|c| c.id.clone()).collect();
    let e = ids[rng.gen_range(0..ids.len())].clone();
    let claim = net.claim(&e).unwrap();
    let buyer = pick_buyer(&net, &[claim.creditor.as_str(), claim.debtor.as_str()])?;
    Some((net, e, buyer))
}

/// A random incoming multi-trade instance: a seller with 1..=`max_in`
/// tradeable incoming claims and a funded buyer.
fn multi_instance(
    kind: RandomKind,
    max_in: usize,
    seed: u64,
) -> Option<(FinancialNetwork, String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA0);
    let banks = rng.gen_range(3..=7);
    let claims = rng.gen_range(2..=10);
    let net = random_network(banks, claims, 6, kind, seed).ok()?;
    let bank_ids: Vec<String> = net.bank_ids().cloned().collect();
    for v in &bank_ids {
        let incoming = net.incoming(v).len();
        if incoming == 0 || incoming > max_in {
            continue;
        }
        let debtors: Vec<&str> = net
            .incoming(v)
            .iter()
            .map(|id| net.claim(id).unwrap().debtor.as_str())
            .collect();
        let mut exclude = vec![v.as_str()];
        exclude.extend(debtors);
        if let Some(w) = pick_buyer(&net, &exclude) {
            return Some((net.clone(), v.clone(), w));
        }
    }
    None
}

fn pareto_margin(outcome: &TradeOutcome) -> Rational {
    outcome
        .pre_state
        .strictness_margin()
        .max(outcome.post_state.strictness_margin())
}

/// Every pre-trade claim payment must survive (weakly increase) after a
/// creditor-positive trade.
fn assert_pareto_payments(outcome: &TradeOutcome, label: &str) {
    let margin = pareto_margin(outcome);
    for (claim, before) in &outcome.pre_state.payments {
        let after = &outcome.post_state.payments[claim];
        assert!(
            after.rat() + &margin >= *before.rat(),
            "{label}: payment of {claim} dropped from {} to {}",
            before.rat(),
            after.rat()
        );
    }
}

#[test]
fn criterion_01_edge_ranking_example_reproduction() {
    let start = Instant::now();
    let net = ex1_edge_ranking();
    let state = clear(&net).unwrap();
    assert_eq!(state.payment("e_uv"), &Money::from_int(1));
    assert_eq!(state.payment("e_vw"), &Money::from_int(1));
    assert_eq!(state.payment("e_vy"), &Money::from_int(0));
    assert_eq!(state.payment("e_yv"), &Money::from_int(0));
    assert_eq!(state.assets_of("u"), &Money::from_int(1));
    assert_eq!(state.assets_of("v"), &Money::from_int(1));
    assert_eq!(state.assets_of("w"), &Money::from_int(3));
    assert_eq!(state.assets_of("y"), &Money::from_int(0));

    let post = clear(&ex1_post_trade_edge_ranking()).unwrap();
    assert_eq!(post.assets_of("u"), &Money::from_int(1));
    assert_eq!(post.assets_of("v"), &Money::from_int(4));
    assert_eq!(post.assets_of("w"), &Money::from_int(3));
    assert_eq!(post.assets_of("y"), &Money::from_int(2));
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1, "took {elapsed:?}");
    println!("criterion 1: pass (edge-ranking example exact, {elapsed:?})");
}

#[test]
fn criterion_02_proportional_example_reproduction() {
    let net = ex1_proportional();
    let state = clear_proportional(&net).unwrap();
    assert_eq!(state.payment("e_vw"), &Money::from_int(1));
    assert_eq!(state.payment("e_vy"), &Money::from_int(1));

    let spec = TradeSpec::new(
        TradeDirection::Incoming,
        "v",
        "w",
        vec!["e_uv".into()],
        vec![Rational::one()],
    );
    let outcome = apply_trade(&net, &spec).unwrap();
    assert!(outcome.creditor_positive);
    assert_eq!(outcome.post_state.payment("e_vw"), &Money::from_int(2));
    assert_eq!(outcome.post_state.payment("e_vy"), &Money::from_int(2));
    println!("criterion 2: pass (proportional example exact)");
}

#[test]
fn criterion_03_no_double_strict_improvement() {
    let start = Instant::now();
    let violations = check_no_double_strict(1000, 0xC3).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(violations, 0);
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!("criterion 3: pass (1000 trials, 0 violations, {elapsed:?})");
}

#[test]
fn criterion_04_trades_are_pareto_improvements() {
    let mut found = 0u32;
    let mut seed = 0u64;
    while found < 200 && seed < 4000 {
        seed += 1;
        if let Some((net, e, w)) = single_instance(RandomKind::EdgeRanking, seed) {
            if let Ok(Some(res)) = optimal_single_edge_ranking(&net, &e, &w) {
                assert_pareto_payments(&res.outcome, "edge-ranking single");
                found += 1;
            }
        }
        if let Some((net, e, w)) = single_instance(RandomKind::Proportional, seed) {
            if let Ok(Some(res)) = optimal_single_proportional(&net, &e, &w) {
                assert_pareto_payments(&res.outcome, "proportional single");
                found += 1;
            }
        }
        if let Some((net, e, w)) = single_instance(RandomKind::Mixed, seed) {
            let delta = Money::from_ratio(1, 1024);
            if let Ok(Some(res)) = approx_single_general(&net, &e, &w, &delta) {
                assert_pareto_payments(&res.outcome, "general single");
                found += 1;
            }
        }
        if let Some((net, v, w)) = multi_instance(RandomKind::Mixed, 5, seed) {
            let eps = ratio(1, 100);
            let delta = Money::from_ratio(1, 1 << 20);
            if let Ok(Some(res)) = bicriteria_fptas(&net, &v, &w, &eps, &delta) {
                assert_pareto_payments(&res.outcome, "incoming multi");
                found += 1;
            }
        }
    }
    assert!(found >= 200, "only {found} positive trades found");
    println!("criterion 4: pass ({found} optimizer trades, all payments weakly improved)");
}

#[test]
fn criterion_05_single_trade_cross_validation() {
    // Proportional: exact LP vs level binary search, agreement within delta.
    let delta = Money::from_ratio(1, 1 << 20);
    let mut prop = 0u32;
    let mut seed = 0u64;
    while prop < 100 && seed < 3000 {
        seed += 1;
        let Some((net, e, w)) = single_instance(RandomKind::Proportional, seed) else {
            continue;
        };
        let pre = clear(&net).unwrap();
        let v = net.claim(&e).unwrap().creditor.clone();
        let base = pre.assets_of(&v).clone();
        let lp = optimal_single_proportional(&net, &e, &w).unwrap();
        let approx = approx_single_general(&net, &e, &w, &delta).unwrap();
        let lp_assets = lp.as_ref().map_or(base.clone(), |r| r.achieved_assets.clone());
        let ap_assets = approx
            .as_ref()
            .map_or(base.clone(), |r| r.achieved_assets.clone());
        let diff = if lp_assets >= ap_assets {
            lp_assets.rat() - ap_assets.rat()
        } else {
            ap_assets.rat() - lp_assets.rat()
        };
        assert!(
            diff <= *delta.rat(),
            "seed {seed}: LP {} vs search {}",
            lp_assets.rat(),
            ap_assets.rat()
        );
        prop += 1;
    }
    assert!(prop >= 100);

    // Edge-ranking: closed-form optimum vs refined brute-force oracle, exact.
    let mut er = 0u32;
    seed = 0;
    while er < 100 && seed < 3000 {
        seed += 1;
        let Some((net, e, w)) = single_instance(RandomKind::EdgeRanking, seed) else {
            continue;
        };
        let pre = clear(&net).unwrap();
        let v = net.claim(&e).unwrap().creditor.clone();
        let base = pre.assets_of(&v).clone();
        let exact = optimal_single_edge_ranking(&net, &e, &w).unwrap();
        let oracle = oracle_single_alpha(&net, &e, &w, 64).unwrap();
        let exact_assets = exact
            .as_ref()
            .map_or(base.clone(), |r| r.achieved_assets.clone());
        assert_eq!(
            exact_assets, oracle.best_assets,
            "seed {seed}: algorithm {} vs oracle {}",
            exact_assets.rat(),
            oracle.best_assets.rat()
        );
        er += 1;
    }
    assert!(er >= 100);
    println!("criterion 5: pass ({prop} proportional within 2^-20, {er} edge-ranking exact)");
}

/// All achievable seller asset levels for a small integral edge-ranking
/// instance, by enumerating claim subsets and integral per-claim payments.
fn brute_force_best_level(net: &FinancialNetwork, v: &str, w: &str) -> Option<Money> {
    let tradeable: Vec<String> = net
        .incoming(v)
        .iter()
        .filter(|id| net.claim(id).unwrap().debtor != w)
        .cloned()
        .collect();
    let mut best: Option<Money> = None;
    for mask in 1u32..(1 << tradeable.len()) {
        let claims: Vec<String> = tradeable
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, c)| c.clone())
            .collect();
        let caps: Vec<u64> = claims
            .iter()
            .map(|c| {
                let l = net.claim(c).unwrap().liability.rat().clone();
                (l.numer() / l.denom()).try_into().unwrap()
            })
            .collect();
        // Odometer over integral payments 0..=liability per traded claim.
        let mut x = vec![0u64; claims.len()];
        loop {
            let rates: Vec<Rational> = x
                .iter()
                .zip(&caps)
                .map(|(&xi, &cap)| ratio(xi as i64, cap as i64))
                .collect();
            let spec = TradeSpec::new(
                TradeDirection::Incoming,
                v,
                w,
                claims.clone(),
                rates,
            );
            match apply_trade(net, &spec) {
                Ok(outcome) if outcome.creditor_positive => {
                    let a = outcome.post_state.assets_of(v).clone();
                    if best.as_ref().map_or(true, |b| a > *b) {
                        best = Some(a);
                    }
                }
                Ok(_) => {}
                Err(Error::Unaffordable { .. }) => {}
                Err(e) => panic!("unexpected error: {e}"),
            }
            let mut i = 0;
            loop {
                if i == x.len() {
                    break;
                }
                if x[i] < caps[i] {
                    x[i] += 1;
                    break;
                }
                x[i] = 0;
                i += 1;
            }
            if i == x.len() {
                break;
            }
        }
    }
    best
}

#[test]
fn criterion_06_knapsack_decision_equals_exact_existence() {
    let mut instances = 0u32;
    let mut levels_checked = 0u32;
    let mut seed = 0u64;
    while instances < 50 && seed < 4000 {
        seed += 1;
        let Some((net, v, w)) = multi_instance(RandomKind::EdgeRanking, 3, seed) else {
            continue;
        };
        // Keep the odometer small: liabilities are bounded by the generator.
        let tradeable: Vec<String> = net
            .incoming(&v)
            .iter()
            .filter(|id| net.claim(id).unwrap().debtor != w)
            .cloned()
            .collect();
        if tradeable.is_empty() {
            continue;
        }
        let pre = clear(&net).unwrap();
        let a_v = pre.assets_of(&v).clone();
        let best = brute_force_best_level(&net, &v, &w);
        for step in 1..=10i64 {
            let target = Money::saturating_from_rational(a_v.rat() + rat(step));
            let view = knapsack_view(&net, &v, &w, &target).unwrap();
            let knapsack_yes = view.feasible_eq1 && {
                let n = view.items.len();
                (1u32..(1u32 << n)).any(|mask| {
                    let mut value = Rational::zero();
                    let mut weight = Rational::zero();
                    for (i, item) in view.items.iter().enumerate() {
                        if mask & (1 << i) != 0 {
                            value += item.value.rat();
                            weight += item.weight.rat();
                        }
                    }
                    value >= view.value_bound && weight <= view.weight_bound
                })
            };
            let brute_yes = best.as_ref().map_or(false, |b| *b >= target);
            assert_eq!(
                knapsack_yes, brute_yes,
                "seed {seed} level {step}: knapsack {knapsack_yes} vs brute force {brute_yes}"
            );
            levels_checked += 1;
        }
        instances += 1;
    }
    assert!(instances >= 50);
    println!(
        "criterion 6: pass ({instances} instances, {levels_checked} levels, decisions agree)"
    );
}

#[test]
fn criterion_07_bicriteria_guarantees() {
    let eps = ratio(1, 100);
    let delta = Money::from_ratio(1, 1 << 20);
    let mut instances = 0u32;
    let mut trades = 0u32;
    let mut seed = 0u64;
    while instances < 100 && seed < 4000 {
        seed += 1;
        let Some((net, v, w)) = multi_instance(RandomKind::Mixed, 5, seed) else {
            continue;
        };
        let start = Instant::now();
        let result = bicriteria_fptas(&net, &v, &w, &eps, &delta).unwrap();
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs() < 5, "seed {seed}: took {elapsed:?}");
        let oracle = oracle_multi_in(&net, &v, &w, 16).unwrap();
        let pre = clear(&net).unwrap();
        let a_v = pre.assets_of(&v).clone();
        let a_w_x = net.bank(&w).unwrap().external_assets.clone();
        match result {
            Some(res) => {
                // Within delta of the best exact trade the oracle certifies.
                assert!(
                    res.achieved_assets.rat() + delta.rat() >= *oracle.best_assets.rat(),
                    "seed {seed}: achieved {} vs oracle {}",
                    res.achieved_assets.rat(),
                    oracle.best_assets.rat()
                );
                let total: Rational = res
                    .claims
                    .iter()
                    .map(|c| net.claim(c).unwrap().liability.rat().clone())
                    .sum();
                let cap = (Rational::one() + &eps) * &total;
                assert!(
                    *res.return_paid.rat() <= cap,
                    "seed {seed}: return {} exceeds (1+eps) liabilities {}",
                    res.return_paid.rat(),
                    cap
                );
                assert!(res.return_paid <= a_w_x, "seed {seed}: return beyond buyer cash");
                trades += 1;
            }
            None => {
                assert!(
                    *oracle.best_assets.rat() <= a_v.rat() + delta.rat(),
                    "seed {seed}: oracle found {} from {}",
                    oracle.best_assets.rat(),
                    a_v.rat()
                );
            }
        }
        instances += 1;
    }
    assert!(instances >= 100);
    println!("criterion 7: pass ({instances} instances, {trades} trades within guarantees)");
}

#[test]
fn criterion_08_subset_sum_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x55AA);
    let eps = ratio(1, 48);

    let mut yes = 0u32;
    while yes < 50 {
        let n = rng.gen_range(3..=12usize);
        let values: Vec<u64> = (0..n).map(|_| rng.gen_range(2..=10)).collect();
        let take = rng.gen_range(1..=n);
        let target: u64 = values.iter().take(take).sum();
        assert!(subset_sum_exists(&values, target));
        let net = gen_subset_sum_incoming(&values, target).unwrap();
        let l_v = net.total_liabilities("v").unwrap();
        let found = exact_level_edge_ranking(&net, "v", "w", &eps)
            .unwrap()
            .unwrap_or_else(|| panic!("yes-instance {values:?}/{target} not saved"));
        assert!(
            found.achieved_assets >= l_v,
            "yes-instance {values:?}/{target}: reached {} < {}",
            found.achieved_assets.rat(),
            l_v.rat()
        );
        yes += 1;
    }

    let mut no = 0u32;
    while no < 50 {
        let n = rng.gen_range(3..=6usize);
        // All-even values with an odd target can never sum exactly.
        let values: Vec<u64> = (0..n).map(|_| 2 * rng.gen_range(1..=5u64)).collect();
        let total: u64 = values.iter().sum();
        let target = rng.gen_range(1..total / 2) * 2 + 1;
        if target > total {
            continue;
        }
        assert!(!subset_sum_exists(&values, target));
        let net = gen_subset_sum_incoming(&values, target).unwrap();
        let l_v = net.total_liabilities("v").unwrap();
        let oracle = oracle_multi_in(&net, "v", "w", 8).unwrap();
        assert!(
            oracle.best_assets < l_v,
            "no-instance {values:?}/{target}: oracle reached {}",
            oracle.best_assets.rat()
        );
        no += 1;
    }
    println!("criterion 8: pass ({yes} yes-instances saved, {no} no-instances unsavable)");
}

#[test]
fn criterion_09_subsidized_fixed_rate_scheme() {
    let delta = ratio(1, 10);

    // Subsidy caps derived from the seller's tradeable claim volume.
    let caps = |net: &FinancialNetwork, v: &str, w: &str| -> (Rational, Rational) {
        let tradeable: Vec<&String> = net
            .incoming(v)
            .iter()
            .filter(|id| net.claim(id).unwrap().debtor != w)
            .collect();
        let total: Rational = tradeable
            .iter()
            .map(|c| net.claim(c).unwrap().liability.rat().clone())
            .sum();
        let s = total * &delta / rat(tradeable.len() as i64);
        (rat(2) * &s, s)
    };

    let check = |net: &FinancialNetwork,
                 rates: &BTreeMap<String, Rational>,
                 label: &str,
                 must_trade: bool| {
        let result = subsidized_fptas_fixed_rates(net, "v", "w", rates, &delta).unwrap();
        let oracle = oracle_fixed_rates(net, "v", "w", rates).unwrap();
        match result {
            Some(res) => {
                let (cap_v, cap_w) = caps(net, "v", "w");
                let (to_v, to_w) = res.subsidies.clone().expect("subsidy record");
                assert!(*to_v.rat() <= cap_v, "{label}: seller subsidy {} > {}", to_v.rat(), cap_v);
                assert!(*to_w.rat() <= cap_w, "{label}: buyer subsidy {} > {}", to_w.rat(), cap_w);
                assert!(
                    res.achieved_assets >= oracle.best_assets,
                    "{label}: level {} below oracle {}",
                    res.achieved_assets.rat(),
                    oracle.best_assets.rat()
                );
            }
            None => {
                assert!(!must_trade, "{label}: certified instance found no trade");
                assert!(
                    oracle.best_trade.is_none(),
                    "{label}: oracle found a trade the scheme missed"
                );
            }
        }
    };

    // Fixed-rate reduction corpus: every instance carries a certificate.
    let mut rng = ChaCha8Rng::seed_from_u64(0x99);
    let mut corpus = 0u32;
    while corpus < 15 {
        let n = rng.gen_range(2..=6usize);
        let values: Vec<u64> = (0..n).map(|_| rng.gen_range(2..=9)).collect();
        let take = rng.gen_range(1..=n);
        let target: u64 = values.iter().take(take).sum();
        let (net, rates) = gen_subset_sum_incoming_fixed(&values, target).unwrap();
        check(&net, &rates, &format!("fixed corpus {values:?}/{target}"), true);
        corpus += 1;
    }

    // Random small instances with grid rates.
    let mut random = 0u32;
    let mut seed = 0u64;
    while random < 50 && seed < 4000 {
        seed += 1;
        let Some((net, v, w)) = multi_instance(RandomKind::Mixed, 5, seed) else {
            continue;
        };
        let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 0x9A);
        let rates: BTreeMap<String, Rational> = net
            .incoming(&v)
            .iter()
            .filter(|id| net.claim(id).unwrap().debtor != w)
            .map(|id| (id.clone(), ratio(rng2.gen_range(0..=4), 4)))
            .collect();
        if rates.is_empty() {
            continue;
        }
        let result = subsidized_fptas_fixed_rates(&net, &v, &w, &rates, &delta).unwrap();
        let oracle = oracle_fixed_rates(&net, &v, &w, &rates).unwrap();
        let tradeable_total: Rational = rates
            .keys()
            .map(|c| net.claim(c).unwrap().liability.rat().clone())
            .sum();
        let s = tradeable_total * &delta / rat(rates.len() as i64);
        match result {
            Some(res) => {
                let (to_v, to_w) = res.subsidies.clone().expect("subsidy record");
                assert!(*to_v.rat() <= rat(2) * &s, "seed {seed}: seller subsidy too large");
                assert!(*to_w.rat() <= s, "seed {seed}: buyer subsidy too large");
                assert!(
                    res.achieved_assets >= oracle.best_assets,
                    "seed {seed}: level {} below oracle {}",
                    res.achieved_assets.rat(),
                    oracle.best_assets.rat()
                );
            }
            None => assert!(
                oracle.best_trade.is_none(),
                "seed {seed}: oracle found a fixed-rate trade the scheme missed"
            ),
        }
        random += 1;
    }
    assert!(random >= 50);
    println!("criterion 9: pass ({corpus} certified + {random} random fixed-rate instances)");
}

#[test]
fn criterion_10_outgoing_proportional_lp() {
    // Certificate instances: a disjoint packing of k sets exists among the
    // leading sets; trading exactly those at full rate yields profit k*d.
    let cases: Vec<(usize, Vec<Vec<usize>>, usize)> = vec![
        (4, vec![vec![1, 2], vec![3, 4], vec![2, 3]], 2),
        (6, vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![1, 3]], 3),
        (6, vec![vec![1, 2, 3], vec![4, 5, 6], vec![2, 3, 4]], 2),
    ];
    for (universe, sets, k) in &cases {
        let d = sets[0].len() as i64;
        let net = gen_set_packing_prop(*universe, sets, *k, None).unwrap();
        let claims: Vec<String> = (1..=*k).map(|i| format!("e_v_s{i}")).collect();
        let result = optimal_out_proportional(&net, "v", "w", &claims)
            .unwrap()
            .expect("certificate trade exists");
        assert!(result.pareto_positive);
        for rate in &result.rates {
            assert!(rate.is_one(), "certificate rate {rate} != 1");
        }
        assert_eq!(
            result.creditor_profit_total,
            rat(*k as i64 * d),
            "universe {universe}: profit {}",
            result.creditor_profit_total
        );
        assert!(result.outcome.deltas["w"].is_zero());
    }

    // Random cross-validation against a rate-grid brute force.
    let mut compared = 0u32;
    let mut seed = 0u64;
    while compared < 50 && seed < 6000 {
        seed += 1;
        let Some((net, u, w)) = outgoing_instance(seed, if compared < 30 { 1 } else { 2 }) else {
            continue;
        };
        let tradeable: Vec<String> = net
            .outgoing(&u)
            .iter()
            .filter(|id| net.claim(id).unwrap().creditor != w)
            .cloned()
            .collect();
        let lp = optimal_out_proportional(&net, &u, &w, &tradeable).unwrap();
        let grid = grid_best_outgoing(&net, &u, &w, &tradeable, 50);
        match (&lp, &grid) {
            (Some(l), Some(g)) => {
                assert!(
                    l.creditor_profit_total >= *g,
                    "seed {seed}: LP {} below grid {}",
                    l.creditor_profit_total,
                    g
                );
            }
            (None, Some(g)) => panic!("seed {seed}: grid found profit {g} but LP found none"),
            _ => {}
        }
        compared += 1;
    }
    assert!(compared >= 50);
    println!(
        "criterion 10: pass ({} certificates exact, {compared} random instances match the grid)",
        cases.len()
    );
}

/// A random proportional instance whose debtor has exactly `n_claims`
/// tradeable outgoing claims.
fn outgoing_instance(seed: u64, n_claims: usize) -> Option<(FinancialNetwork, String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x07);
    let banks = rng.gen_range(3..=6);
    let claims = rng.gen_range(2..=8);
    let net = random_network(banks, claims, 5, RandomKind::Proportional, seed).ok()?;
    if network_kind(&net) != NetworkKind::Proportional {
        return None;
    }
    let bank_ids: Vec<String> = net.bank_ids().cloned().collect();
    for u in &bank_ids {
        for w in &bank_ids {
            if u == w || net.bank(w).unwrap().external_assets.is_zero() {
                continue;
            }
            let tradeable = net
                .outgoing(u)
                .iter()
                .filter(|id| net.claim(id).unwrap().creditor != *w)
                .count();
            if tradeable == n_claims && net.outgoing(u).len() == tradeable {
                return Some((net.clone(), u.clone(), w.clone()));
            }
        }
    }
    None
}

/// Best Pareto-positive profit over a per-claim rate grid of the given
/// resolution.
fn grid_best_outgoing(
    net: &FinancialNetwork,
    u: &str,
    w: &str,
    claims: &[String],
    resolution: i64,
) -> Option<Rational> {
    let mut best: Option<Rational> = None;
    let mut x = vec![0i64; claims.len()];
    loop {
        let rates: Vec<Rational> = x.iter().map(|&xi| ratio(xi, resolution)).collect();
        match decide_out_fixed(net, u, w, claims, &rates) {
            Ok(result) if result.pareto_positive => {
                let profit = result.creditor_profit_total.clone();
                if best.as_ref().map_or(true, |b| profit > *b) {
                    best = Some(profit);
                }
            }
            Ok(_) => {}
            Err(Error::Unaffordable { .. }) => {}
            Err(e) => panic!("unexpected error: {e}"),
        }
        let mut i = 0;
        loop {
            if i == x.len() {
                break;
            }
            if x[i] < resolution {
                x[i] += 1;
                break;
            }
            x[i] = 0;
            i += 1;
        }
        if i == x.len() {
            break;
        }
    }
    best
}

#[test]
fn criterion_11_property_suites() {
    let integral = check_integrality(500, 0x11A).unwrap();
    assert_eq!(integral, 0, "integrality violations");
    let monotone = check_monotonicity(500, 0x11B).unwrap();
    assert_eq!(monotone, 0, "monotonicity violations");
    let nonexp = check_non_expansivity(500, 0x11C).unwrap();
    assert_eq!(nonexp, 0, "non-expansivity violations");
    println!("criterion 11: pass (500 cases each: integrality, monotonicity, non-expansivity)");
}
