//! Reference fixtures, brute-force oracles, and hardness-reduction instance
//! generators used for cross-validation and acceptance testing.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::money::{Money, Rational};
use crate::net_model::{
    Bank, Claim, ClaimId, FinancialNetwork, PaymentFunction, PiecewiseLinear, TradeDirection,
    TradeSpec,
};
use crate::trade_transform::apply_trade;

fn bank(id: &str, ext: u64, payment: PaymentFunction) -> Bank {
    Bank {
        id: id.into(),
        external_assets: Money::from_int(ext),
        payment,
    }
}

fn claim(id: &str, debtor: &str, creditor: &str, liability: u64) -> Claim {
    Claim {
        id: id.into(),
        debtor: debtor.into(),
        creditor: creditor.into(),
        liability: Money::from_int(liability),
    }
}

fn ranking(order: &[&str]) -> PaymentFunction {
    PaymentFunction::EdgeRanking(order.iter().map(|s| s.to_string()).collect())
}

/// Four-bank reference network: `u` owes `v`, `v` owes `w` and `y`, `y` owes
/// `v` back; `v` prioritizes `w`.  In the maximal clearing state `v` holds
/// assets 1 and the `v↔y` cycle carries no payments.
pub fn ex1_edge_ranking() -> FinancialNetwork {
    FinancialNetwork::build(
        vec![
            bank("u", 1, ranking(&["e_uv"])),
            bank("v", 0, ranking(&["e_vw", "e_vy"])),
            bank("w", 2, ranking(&[])),
            bank("y", 0, ranking(&["e_yv"])),
        ],
        vec![
            claim("e_uv", "u", "v", 2),
            claim("e_vw", "v", "w", 2),
            claim("e_vy", "v", "y", 2),
            claim("e_yv", "y", "v", 2),
        ],
    )
    .unwrap()
}

/// The same network with proportional payments everywhere: every claim pays
/// 1 and `v` recovers half its liabilities.
pub fn ex1_proportional() -> FinancialNetwork {
    let (banks, claims) = ex1_edge_ranking().into_parts();
    let banks = banks
        .into_iter()
        .map(|mut b| {
            b.payment = PaymentFunction::Proportional;
            b
        })
        .collect();
    FinancialNetwork::build(banks, claims).unwrap()
}

/// The reference network after selling `e_uv` to `w` at rate 1: the claim
/// pays to `w`, `v` starts with the return of 2, and the `v↔y` cycle clears
/// fully.
pub fn ex1_post_trade_edge_ranking() -> FinancialNetwork {
    FinancialNetwork::build(
        vec![
            bank("u", 1, ranking(&["e_uv"])),
            bank("v", 2, ranking(&["e_vw", "e_vy"])),
            bank("w", 0, ranking(&[])),
            bank("y", 0, ranking(&["e_yv"])),
        ],
        vec![
            claim("e_uv", "u", "w", 2),
            claim("e_vw", "v", "w", 2),
            claim("e_vy", "v", "y", 2),
            claim("e_yv", "y", "v", 2),
        ],
    )
    .unwrap()
}

/// Result of a brute-force search over trades.
#[derive(Clone, Debug)]
pub struct OracleResult {
    /// Best post-trade assets of the focal bank; its pre-trade assets when
    /// no positive trade was found.
    pub best_assets: Money,
    pub best_trade: Option<TradeSpec>,
    pub search_space_size: u64,
}

/// Evaluates a candidate rate: post-trade seller assets, the buyer's asset
/// delta, and the creditor-positive flag.  Unaffordable rates count as
/// infeasible.
fn probe_spec(
    network: &FinancialNetwork,
    spec: &TradeSpec,
) -> Result<Option<(Money, Rational, bool)>> {
    match apply_trade(network, spec) {
        Ok(outcome) => {
            let assets = outcome.post_state.assets_of(&spec.focal_bank).clone();
            let dw = outcome.deltas[&spec.buyer].clone();
            Ok(Some((assets, dw, outcome.creditor_positive)))
        }
        Err(Error::Unaffordable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Grid search over a uniform rate followed by an exact refinement: the
/// buyer's asset delta is piecewise linear in the rate, so a secant
/// iteration on the cell where it changes sign lands on the exact boundary
/// rate after finitely many steps.  Every candidate is verified by clearing.
fn best_uniform_rate(
    network: &FinancialNetwork,
    make: &dyn Fn(Rational) -> TradeSpec,
    grid_points: u32,
) -> Result<Option<(Money, TradeSpec)>> {
    let g = grid_points.max(1) as i64;
    let mut best: Option<(Money, TradeSpec)> = None;
    let mut feasible = vec![false; g as usize + 1];
    let mut deltas: Vec<Option<Rational>> = vec![None; g as usize + 1];
    for j in 0..=g {
        let alpha = Rational::new(j.into(), g.into());
        let spec = make(alpha);
        if let Some((assets, dw, positive)) = probe_spec(network, &spec)? {
            feasible[j as usize] = positive;
            deltas[j as usize] = Some(dw);
            if positive && best.as_ref().map_or(true, |(b, _)| assets > *b) {
                best = Some((assets, spec));
            }
        }
    }
    // The optimum may sit exactly at the buyer's affordability cap, which no
    // grid cell hits.  The return scales linearly with the uniform rate, so
    // the cap rate is recoverable from the overshoot at rate 1.
    if let Err(Error::Unaffordable {
        return_paid,
        available,
    }) = apply_trade(network, &make(Rational::one()))
    {
        if let (Some(ret), Some(avail)) = (
            crate::money::parse_rational(&return_paid),
            crate::money::parse_rational(&available),
        ) {
            if ret.is_positive() {
                let cap = avail / ret;
                if cap > Rational::zero() && cap < Rational::one() {
                    if let Some((assets, _, positive)) = probe_spec(network, &make(cap.clone()))? {
                        if positive && best.as_ref().map_or(true, |(b, _)| assets > *b) {
                            best = Some((assets, make(cap)));
                        }
                    }
                }
            }
        }
    }
    // Refine the largest feasible cell boundary exactly.
    let Some(j) = (0..g).rev().find(|&j| feasible[j as usize] && !feasible[j as usize + 1])
    else {
        return Ok(best);
    };
    let (Some(d_lo), Some(d_hi)) = (deltas[j as usize].clone(), deltas[j as usize + 1].clone())
    else {
        return Ok(best);
    };
    if !d_hi.is_negative() || d_lo.is_negative() {
        return Ok(best);
    }
    let mut lo = Rational::new(j.into(), g.into());
    let mut hi = Rational::new((j + 1).into(), g.into());
    let mut d_lo = d_lo;
    let mut d_hi = d_hi;
    // The buyer delta is piecewise linear in the rate, so the boundary root
    // is hit exactly once two probes land on the segment adjacent to it.
    // Keep the previous probe of each side for same-segment extrapolation;
    // plain interpolation across the bracket is the fallback.
    let mut prev_lo: Option<(Rational, Rational)> = None;
    let mut prev_hi: Option<(Rational, Rational)> = None;
    let extrapolate = |a1: &Rational, d1: &Rational, a2: &Rational, d2: &Rational| {
        if d1 == d2 {
            None
        } else {
            Some(a1 - d1 * (a2 - a1) / (d2 - d1))
        }
    };
    for _ in 0..64 {
        let mut alpha = prev_hi
            .as_ref()
            .and_then(|(a2, d2)| extrapolate(&hi, &d_hi, a2, d2))
            .filter(|r| *r > lo && *r < hi);
        if alpha.is_none() {
            alpha = prev_lo
                .as_ref()
                .and_then(|(a2, d2)| extrapolate(&lo, &d_lo, a2, d2))
                .filter(|r| *r > lo && *r < hi);
        }
        let alpha = match alpha {
            Some(a) => a,
            None => {
                // Interpolate across the bracket; bisect when degenerate
                // (e.g. a zero plateau on the feasible side).
                let a = if d_lo == d_hi {
                    (&lo + &hi) / Rational::from_integer(2.into())
                } else {
                    &lo + (&hi - &lo) * &d_lo / (&d_lo - &d_hi)
                };
                if a <= lo || a >= hi {
                    (&lo + &hi) / Rational::from_integer(2.into())
                } else {
                    a
                }
            }
        };
        if alpha <= lo || alpha >= hi {
            break;
        }
        let spec = make(alpha.clone());
        let Some((assets, dw, positive)) = probe_spec(network, &spec)? else {
            break;
        };
        if positive {
            if best.as_ref().map_or(true, |(b, _)| assets > *b) {
                best = Some((assets, spec));
            }
            prev_lo = Some((lo.clone(), d_lo.clone()));
            lo = alpha;
            d_lo = dw;
        } else {
            prev_hi = Some((hi.clone(), d_hi.clone()));
            hi = alpha;
            d_hi = dw;
        }
    }
    Ok(best)
}

/// Exhaustive oracle for the optimal single trade of claim `e` to buyer `w`:
/// rate grid of `grid_points` cells plus exact boundary refinement.
pub fn oracle_single_alpha(
    network: &FinancialNetwork,
    e: &str,
    w: &str,
    grid_points: u32,
) -> Result<OracleResult> {
    let v = network.claim(e)?.creditor.clone();
    let pre = crate::clearing::clear(network)?;
    let make = |alpha: Rational| {
        TradeSpec::new(
            TradeDirection::Incoming,
            v.as_str(),
            w,
            vec![e.to_string()],
            vec![alpha],
        )
    };
    let best = best_uniform_rate(network, &make, grid_points)?;
    Ok(match best {
        Some((assets, spec)) => OracleResult {
            best_assets: assets,
            best_trade: Some(spec),
            search_space_size: grid_points as u64 + 1,
        },
        None => OracleResult {
            best_assets: pre.assets_of(&v).clone(),
            best_trade: None,
            search_space_size: grid_points as u64 + 1,
        },
    })
}

/// Exhaustive oracle for incoming multi-trades: every claim subset is tried
/// with a uniform rate grid plus exact boundary refinement.
pub fn oracle_multi_in(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    grid_points: u32,
) -> Result<OracleResult> {
    let tradeable: Vec<ClaimId> = network
        .incoming(v)
        .iter()
        .filter(|id| network.claim(id).unwrap().debtor != w)
        .cloned()
        .collect();
    if tradeable.len() > 16 {
        return Err(Error::InstanceTooLarge(format!(
            "{} incoming claims exceed the oracle limit",
            tradeable.len()
        )));
    }
    let pre = crate::clearing::clear(network)?;
    let mut best_assets = pre.assets_of(v).clone();
    let mut best_trade = None;
    let mut space = 0u64;
    for mask in 1u64..(1 << tradeable.len()) {
        let subset: Vec<ClaimId> = tradeable
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, id)| id.clone())
            .collect();
        space += grid_points as u64 + 1;
        let make = |alpha: Rational| {
            TradeSpec::new(
                TradeDirection::Incoming,
                v,
                w,
                subset.clone(),
                vec![alpha; subset.len()],
            )
        };
        if let Some((assets, spec)) = best_uniform_rate(network, &make, grid_points)? {
            if assets > best_assets {
                best_assets = assets;
                best_trade = Some(spec);
            }
        }
    }
    Ok(OracleResult {
        best_assets,
        best_trade,
        search_space_size: space,
    })
}

/// Exhaustive oracle for incoming multi-trades at fixed per-claim rates:
/// tries every claim subset and keeps the creditor-positive trade with the
/// highest seller assets.
pub fn oracle_fixed_rates(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    rates: &BTreeMap<ClaimId, Rational>,
) -> Result<OracleResult> {
    let tradeable: Vec<ClaimId> = network
        .incoming(v)
        .iter()
        .filter(|id| network.claim(id).unwrap().debtor != w)
        .cloned()
        .collect();
    if tradeable.len() > 16 {
        return Err(Error::InstanceTooLarge(format!(
            "{} incoming claims exceed the oracle limit",
            tradeable.len()
        )));
    }
    let pre = crate::clearing::clear(network)?;
    let mut best_assets = pre.assets_of(v).clone();
    let mut best_trade = None;
    for mask in 1u64..(1 << tradeable.len()) {
        let mut subset = Vec::new();
        let mut subset_rates = Vec::new();
        for (i, id) in tradeable.iter().enumerate() {
            if mask & (1 << i) != 0 {
                subset.push(id.clone());
                subset_rates.push(rates.get(id).cloned().ok_or_else(|| {
                    Error::SpecViolation(format!("no rate given for claim {id}"))
                })?);
            }
        }
        let spec = TradeSpec::new(TradeDirection::Incoming, v, w, subset, subset_rates);
        if let Some((assets, _, positive)) = probe_spec(network, &spec)? {
            if positive && assets > best_assets {
                best_assets = assets;
                best_trade = Some(spec);
            }
        }
    }
    Ok(OracleResult {
        best_assets,
        best_trade,
        search_space_size: (1 << tradeable.len()) - 1,
    })
}

/// Independent exhaustive subset-sum decision for verifying generator
/// instances.
pub fn subset_sum_exists(values: &[u64], target: u64) -> bool {
    let mut reachable = vec![false; target as usize + 1];
    reachable[0] = true;
    for &b in values {
        for t in (b as usize..reachable.len()).rev() {
            reachable[t] |= reachable[t - b as usize];
        }
    }
    reachable[target as usize]
}

/// Subset-sum reduction for variable-rate incoming trades: saving `v`
/// (reaching assets `L_v = T + Σb_i`) is possible iff some subset of the
/// integers sums to exactly `T`.
pub fn gen_subset_sum_incoming(values: &[u64], target: u64) -> Result<FinancialNetwork> {
    if values.is_empty() || values.iter().any(|&b| b == 0) {
        return Err(Error::BadParameters("values must be positive".into()));
    }
    if target == 0 || target > values.iter().sum() {
        return Err(Error::BadParameters(
            "target must be in [1, sum of values]".into(),
        ));
    }
    let total: u64 = values.iter().sum();
    let mut banks = vec![
        bank("v", 0, ranking(&["e_vw"])),
        bank("w", 2 * target, ranking(&[])),
    ];
    let mut claims = vec![claim("e_vw", "v", "w", target + total)];
    for (i, &b) in values.iter().enumerate() {
        let bid = format!("b_{}", i + 1);
        let cid = format!("e_{}", i + 1);
        banks.push(Bank {
            id: bid.clone(),
            external_assets: Money::from_int(b),
            payment: PaymentFunction::EdgeRanking(vec![cid.clone()]),
        });
        claims.push(Claim {
            id: cid,
            debtor: bid,
            creditor: "v".into(),
            liability: Money::from_int(2 * b),
        });
    }
    FinancialNetwork::build(banks, claims)
}

/// Subset-sum reduction for fixed-rate incoming trades: returns the network
/// and the fixed rate vector (1 on the integer claims, 0 on the claim from
/// `u`).  Saving `v` (assets `L_v = T`) is possible iff some subset sums to
/// exactly `T`.
pub fn gen_subset_sum_incoming_fixed(
    values: &[u64],
    target: u64,
) -> Result<(FinancialNetwork, BTreeMap<ClaimId, Rational>)> {
    if values.is_empty() || values.iter().any(|&b| b <= 1) {
        return Err(Error::BadParameters("values must exceed 1".into()));
    }
    if target == 0 || target > values.iter().sum() {
        return Err(Error::BadParameters(
            "target must be in [1, sum of values]".into(),
        ));
    }
    let mut banks = vec![
        bank("v", 0, ranking(&["e_vw"])),
        bank("w", target, ranking(&[])),
        bank("u", target - 1, ranking(&["e_prime"])),
    ];
    let mut claims = vec![
        claim("e_vw", "v", "w", target),
        claim("e_prime", "u", "v", target - 1),
    ];
    let mut rates = BTreeMap::new();
    rates.insert("e_prime".to_string(), Rational::zero());
    for (i, &b) in values.iter().enumerate() {
        let bid = format!("b_{}", i + 1);
        let cid = format!("e_{}", i + 1);
        banks.push(Bank {
            id: bid.clone(),
            external_assets: Money::zero(),
            payment: PaymentFunction::EdgeRanking(vec![cid.clone()]),
        });
        claims.push(Claim {
            id: cid.clone(),
            debtor: bid,
            creditor: "v".into(),
            liability: Money::from_int(b),
        });
        rates.insert(cid, Rational::one());
    }
    let network = if target == 1 {
        // ℓ(e') would be zero; the claim from u degenerates away.
        return Err(Error::BadParameters("target must exceed 1".into()));
    } else {
        FinancialNetwork::build(banks, claims)?
    };
    Ok((network, rates))
}

/// Set-packing reduction for outgoing trades on edge-ranking networks:
/// trading the claims of a size-`k` packing at rate 1 is Pareto-positive
/// with creditor profit `k·M + Σ|S_i|`; overlapping sets harm the buyer.
pub fn gen_set_packing_outgoing(
    universe: usize,
    sets: &[Vec<usize>],
    k: usize,
) -> Result<FinancialNetwork> {
    if universe == 0 || sets.is_empty() || k == 0 || k > sets.len() {
        return Err(Error::BadParameters(
            "need a non-empty universe, sets, and 1 ≤ k ≤ number of sets".into(),
        ));
    }
    for (i, s) in sets.iter().enumerate() {
        if s.is_empty() || s.iter().any(|&j| j == 0 || j > universe) {
            return Err(Error::BadParameters(format!(
                "set {} must be a non-empty subset of the universe",
                i + 1
            )));
        }
    }
    let m = universe as u64;
    let big = m * m * m;
    let mut banks = Vec::new();
    let mut claims = Vec::new();
    let v_claims: Vec<String> = (1..=sets.len()).map(|i| format!("e_v_s{i}")).collect();
    banks.push(Bank {
        id: "v".into(),
        external_assets: Money::zero(),
        payment: PaymentFunction::EdgeRanking(v_claims.clone()),
    });
    banks.push(bank("w", k as u64 * (big + m), ranking(&[])));
    for j in 1..=universe {
        let cid = format!("e_u{j}_w");
        banks.push(Bank {
            id: format!("u{j}"),
            external_assets: Money::zero(),
            payment: PaymentFunction::EdgeRanking(vec![cid.clone()]),
        });
        claims.push(Claim {
            id: cid,
            debtor: format!("u{j}"),
            creditor: "w".into(),
            liability: Money::from_int(1),
        });
    }
    for (i, s) in sets.iter().enumerate() {
        let sid = format!("s{}", i + 1);
        let mut order: Vec<String> = s.iter().map(|j| format!("e_s{}_u{j}", i + 1)).collect();
        for (cid, j) in order.iter().zip(s) {
            claims.push(Claim {
                id: cid.clone(),
                debtor: sid.clone(),
                creditor: format!("u{j}"),
                liability: Money::from_int(1),
            });
        }
        // The claim to the buyer is paid off last.
        let wc = format!("e_s{}_w", i + 1);
        claims.push(Claim {
            id: wc.clone(),
            debtor: sid.clone(),
            creditor: "w".into(),
            liability: Money::from_int(big),
        });
        order.push(wc);
        banks.push(Bank {
            id: sid,
            external_assets: Money::zero(),
            payment: PaymentFunction::EdgeRanking(order),
        });
        claims.push(Claim {
            id: v_claims[i].clone(),
            debtor: "v".into(),
            creditor: format!("s{}", i + 1),
            liability: Money::from_int(big + s.len() as u64),
        });
    }
    FinancialNetwork::build(banks, claims)
}

/// Set-packing reduction for outgoing trades on proportional networks
/// (`d`-uniform sets): trading a size-`k` packing's claims at rate 1 yields
/// total creditor profit `k·d`.  `big` overrides the default scale
/// `M = d·m³`; it must be a positive multiple of `d`.
pub fn gen_set_packing_prop(
    universe: usize,
    sets: &[Vec<usize>],
    k: usize,
    big: Option<u64>,
) -> Result<FinancialNetwork> {
    if universe == 0 || sets.is_empty() || k == 0 || k > sets.len() {
        return Err(Error::BadParameters(
            "need a non-empty universe, sets, and 1 ≤ k ≤ number of sets".into(),
        ));
    }
    let d = sets[0].len() as u64;
    if d == 0 {
        return Err(Error::BadParameters("sets must be non-empty".into()));
    }
    for (i, s) in sets.iter().enumerate() {
        if s.len() as u64 != d || s.iter().any(|&j| j == 0 || j > universe) {
            return Err(Error::BadParameters(format!(
                "set {} must have exactly {d} elements from the universe",
                i + 1
            )));
        }
    }
    let m = universe as u64;
    let big = big.unwrap_or(d * m * m * m);
    if big == 0 || big % d != 0 {
        return Err(Error::BadParameters(
            "scale must be a positive multiple of the set size".into(),
        ));
    }
    let mut occurrences = vec![0u64; universe + 1];
    for s in sets {
        for &j in s {
            occurrences[j] += 1;
        }
    }
    let mut banks = vec![
        Bank {
            id: "v".into(),
            external_assets: Money::from_int(sets.len() as u64 * big),
            payment: PaymentFunction::Proportional,
        },
        Bank {
            id: "w".into(),
            external_assets: Money::from_int(k as u64 * (big + d)),
            payment: PaymentFunction::Proportional,
        },
    ];
    let mut claims = Vec::new();
    for j in 1..=universe {
        if occurrences[j] == 0 {
            continue;
        }
        banks.push(Bank {
            id: format!("u{j}"),
            external_assets: Money::zero(),
            payment: PaymentFunction::Proportional,
        });
        claims.push(Claim {
            id: format!("e_u{j}_w"),
            debtor: format!("u{j}"),
            creditor: "w".into(),
            liability: Money::from_int(occurrences[j] * (big / d) + 1),
        });
    }
    for (i, s) in sets.iter().enumerate() {
        let sid = format!("s{}", i + 1);
        banks.push(Bank {
            id: sid.clone(),
            external_assets: Money::zero(),
            payment: PaymentFunction::Proportional,
        });
        claims.push(Claim {
            id: format!("e_v_s{}", i + 1),
            debtor: "v".into(),
            creditor: sid.clone(),
            liability: Money::from_int(big + d),
        });
        claims.push(Claim {
            id: format!("e_s{}_w", i + 1),
            debtor: sid.clone(),
            creditor: "w".into(),
            liability: Money::from_int(big),
        });
        for &j in s {
            claims.push(Claim {
                id: format!("e_s{}_u{j}", i + 1),
                debtor: sid.clone(),
                creditor: format!("u{j}"),
                liability: Money::from_int(big / d + 1),
            });
        }
    }
    FinancialNetwork::build(banks, claims)
}

/// Payment-kind mix for random instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomKind {
    EdgeRanking,
    Proportional,
    GeneralMonotone,
    Mixed,
}

/// Deterministic random multigraph with integer liabilities and externals.
/// General-monotone banks get tables exactly tabulating either a
/// proportional or a ranking base behavior, so every instance passes strict
/// validation.
pub fn random_network(
    n_banks: usize,
    n_claims: usize,
    max_liability: u64,
    kind: RandomKind,
    seed: u64,
) -> Result<FinancialNetwork> {
    if n_banks < 2 && n_claims > 0 {
        return Err(Error::BadParameters("need at least two banks for claims".into()));
    }
    if n_banks == 0 || max_liability == 0 {
        return Err(Error::BadParameters("need banks and a positive liability cap".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bank_id = |i: usize| format!("n{i}");
    let mut claims = Vec::new();
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); n_banks];
    for c in 0..n_claims {
        let debtor = rng.gen_range(0..n_banks);
        let mut creditor = rng.gen_range(0..n_banks - 1);
        if creditor >= debtor {
            creditor += 1;
        }
        let liability = rng.gen_range(1..=max_liability);
        outgoing[debtor].push(c);
        claims.push(Claim {
            id: format!("c{c}"),
            debtor: bank_id(debtor),
            creditor: bank_id(creditor),
            liability: Money::from_int(liability),
        });
    }
    let mut banks = Vec::new();
    for i in 0..n_banks {
        let ext = rng.gen_range(0..=max_liability);
        let my_claims: Vec<String> = outgoing[i].iter().map(|c| format!("c{c}")).collect();
        let bank_kind = match kind {
            RandomKind::Mixed => match rng.gen_range(0..3) {
                0 => RandomKind::EdgeRanking,
                1 => RandomKind::Proportional,
                _ => RandomKind::GeneralMonotone,
            },
            k => k,
        };
        let payment = match bank_kind {
            RandomKind::EdgeRanking => {
                let mut order = my_claims.clone();
                // Deterministic shuffle.
                for idx in (1..order.len()).rev() {
                    order.swap(idx, rng.gen_range(0..=idx));
                }
                PaymentFunction::EdgeRanking(order)
            }
            RandomKind::Proportional => PaymentFunction::Proportional,
            RandomKind::GeneralMonotone | RandomKind::Mixed => {
                general_monotone_table(&mut rng, i, &outgoing[i], &claims)
            }
        };
        banks.push(Bank {
            id: bank_id(i),
            external_assets: Money::from_int(ext),
            payment,
        });
    }
    FinancialNetwork::build(banks, claims)
}

/// Exact general-monotone tables reproducing either proportional sharing or
/// a random ranking over the bank's outgoing claims.
fn general_monotone_table(
    rng: &mut ChaCha8Rng,
    _bank: usize,
    claim_indices: &[usize],
    claims: &[Claim],
) -> PaymentFunction {
    let mut tables = BTreeMap::new();
    let total: Rational = claim_indices
        .iter()
        .map(|&c| claims[c].liability.rat().clone())
        .sum();
    if claim_indices.is_empty() {
        return PaymentFunction::GeneralMonotone(tables);
    }
    if rng.gen_bool(0.5) {
        // Proportional base: each claim pays ℓ_e·b/L linearly up to L.
        for &c in claim_indices {
            let claim = &claims[c];
            tables.insert(
                claim.id.clone(),
                PiecewiseLinear::new(vec![
                    (Rational::zero(), Rational::zero()),
                    (total.clone(), claim.liability.rat().clone()),
                ])
                .unwrap(),
            );
        }
    } else {
        // Ranking base: cumulative thresholds along a random order.
        let mut order: Vec<usize> = claim_indices.to_vec();
        for idx in (1..order.len()).rev() {
            order.swap(idx, rng.gen_range(0..=idx));
        }
        let mut acc = Rational::zero();
        for &c in &order {
            let claim = &claims[c];
            let lo = acc.clone();
            acc += claim.liability.rat();
            let mut points = vec![(lo.clone(), Rational::zero())];
            if lo.is_zero() {
                points = vec![(Rational::zero(), Rational::zero())];
            }
            points.push((acc.clone(), claim.liability.rat().clone()));
            tables.insert(claim.id.clone(), PiecewiseLinear::new(points).unwrap());
        }
    }
    PaymentFunction::GeneralMonotone(tables)
}

/// Seeded corpus driver: derives per-trial instance seeds and sizes from a
/// master seed, deterministically.
fn trial_rng(seed: u64, trial: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(trial as u64))
}

fn random_trial_network(rng: &mut ChaCha8Rng, kind: RandomKind) -> Result<FinancialNetwork> {
    let n_banks = rng.gen_range(2..=8);
    let n_claims = rng.gen_range(0..=14);
    let seed = rng.gen::<u64>();
    random_network(n_banks, n_claims, 9, kind, seed)
}

/// A seller and buyer never both strictly improve through an incoming
/// multi-trade.  Returns the number of violating trials.
pub fn check_no_double_strict(trials: u32, seed: u64) -> Result<u32> {
    let mut violations = 0;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let net = random_trial_network(&mut rng, RandomKind::Mixed)?;
        if net.n_claims() == 0 {
            continue;
        }
        let claim_ids: Vec<ClaimId> = net.claims().map(|c| c.id.clone()).collect();
        let e = &claim_ids[rng.gen_range(0..claim_ids.len())];
        let v = net.claim(e)?.creditor.clone();
        let buyers: Vec<String> = net
            .bank_ids()
            .filter(|b| **b != v)
            .cloned()
            .collect();
        if buyers.is_empty() {
            continue;
        }
        let w = buyers[rng.gen_range(0..buyers.len())].clone();
        let subset: Vec<ClaimId> = net
            .incoming(&v)
            .iter()
            .filter(|id| net.claim(id).unwrap().debtor != w)
            .filter(|_| rng.gen_bool(0.6))
            .cloned()
            .collect();
        if subset.is_empty() {
            continue;
        }
        let rates: Vec<Rational> = (0..subset.len())
            .map(|_| Rational::new(rng.gen_range(0..=10).into(), 10.into()))
            .collect();
        let spec = TradeSpec::new(TradeDirection::Incoming, v.as_str(), w.as_str(), subset, rates);
        match apply_trade(&net, &spec) {
            Ok(outcome) => {
                if outcome.both_strict {
                    violations += 1;
                }
            }
            Err(Error::Unaffordable { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(violations)
}

/// Edge-ranking clearing of integral instances yields integral payments.
pub fn check_integrality(trials: u32, seed: u64) -> Result<u32> {
    let mut violations = 0;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let net = random_trial_network(&mut rng, RandomKind::EdgeRanking)?;
        let state = crate::clearing::clear(&net)?;
        if state.payments.values().any(|p| !p.is_integer()) {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Reducing a bank's external assets never increases any clearing payment.
pub fn check_monotonicity(trials: u32, seed: u64) -> Result<u32> {
    let mut violations = 0;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let net = random_trial_network(&mut rng, RandomKind::Mixed)?;
        let candidates: Vec<String> = net
            .banks()
            .filter(|b| !b.external_assets.is_zero())
            .map(|b| b.id.clone())
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let b = &candidates[rng.gen_range(0..candidates.len())];
        let ext = net.bank(b)?.external_assets.clone();
        let cut = ext.rat() * Rational::new(rng.gen_range(1i64..=4).into(), 4.into());
        let reduced = net.with_external_assets(
            b,
            Money::saturating_from_rational(ext.rat() - &cut),
        )?;
        let before = crate::clearing::clear(&net)?;
        let after = crate::clearing::clear(&reduced)?;
        let margin = before.strictness_margin().max(after.strictness_margin());
        for (claim, p) in &before.payments {
            if *after.payment(claim).rat() > p.rat() + &margin {
                violations += 1;
                break;
            }
        }
    }
    Ok(violations)
}

/// Reducing a bank's external assets by ε reduces the total intake of sink
/// banks (banks without outgoing claims) by at most ε, and never increases
/// it.
pub fn check_non_expansivity(trials: u32, seed: u64) -> Result<u32> {
    let mut violations = 0;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let net = random_trial_network(&mut rng, RandomKind::Mixed)?;
        let candidates: Vec<String> = net
            .banks()
            .filter(|b| !b.external_assets.is_zero())
            .map(|b| b.id.clone())
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let b = &candidates[rng.gen_range(0..candidates.len())];
        let ext = net.bank(b)?.external_assets.clone();
        let cut = ext.rat() * Rational::new(rng.gen_range(1i64..=4).into(), 4.into());
        let reduced = net.with_external_assets(
            b,
            Money::saturating_from_rational(ext.rat() - &cut),
        )?;
        let before = crate::clearing::clear(&net)?;
        let after = crate::clearing::clear(&reduced)?;
        let margin = before.strictness_margin().max(after.strictness_margin());
        let intake = |state: &crate::clearing::ClearingState| -> Rational {
            net.bank_ids()
                .filter(|id| net.outgoing(id).is_empty())
                .flat_map(|id| net.incoming(id))
                .map(|claim| state.payment(claim).rat().clone())
                .sum()
        };
        let drop = intake(&before) - intake(&after);
        if drop < -margin.clone() || drop > &cut + &margin {
            violations += 1;
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::clear;
    use crate::multi_in_opt::{decide_fixed_rates_set, exact_level_edge_ranking};
    use crate::multi_out_opt::decide_out_fixed;

    #[test]
    fn oracle_single_matches_reference_numbers() {
        let oracle = oracle_single_alpha(&ex1_edge_ranking(), "e_uv", "w", 100).unwrap();
        assert_eq!(oracle.best_assets, Money::from_int(4));
        let spec = oracle.best_trade.unwrap();
        assert_eq!(spec.rates, vec![Rational::one()]);
    }

    #[test]
    fn oracle_absent_without_buyer_funds() {
        let net = ex1_edge_ranking()
            .with_external_assets("w", Money::zero())
            .unwrap();
        let oracle = oracle_single_alpha(&net, "e_uv", "w", 20).unwrap();
        assert!(oracle.best_trade.is_none());
        assert_eq!(oracle.best_assets, Money::from_int(1));
    }

    #[test]
    fn oracle_multi_matches_reference_numbers() {
        let oracle = oracle_multi_in(&ex1_edge_ranking(), "v", "w", 20).unwrap();
        assert_eq!(oracle.best_assets, Money::from_int(4));
    }

    #[test]
    fn subset_sum_generator_certificate() {
        // 3 + 5 = 8: trading those two claims at rate 1 saves v.
        let net = gen_subset_sum_incoming(&[3, 5, 7], 8).unwrap();
        let outcome = decide_fixed_rates_set(
            &net,
            "v",
            "w",
            &["e_1".into(), "e_2".into()],
            &[Rational::one(), Rational::one()],
        )
        .unwrap();
        assert!(outcome.creditor_positive);
        // L_v = T + Σb = 8 + 15 = 23.
        assert_eq!(outcome.post_state.assets_of("v"), &Money::from_int(23));
        assert!(outcome.deltas["w"].is_zero());

        let found = exact_level_edge_ranking(&net, "v", "w", &Rational::new(1.into(), 100.into()))
            .unwrap()
            .expect("savable instance");
        assert!(*found.achieved_assets.rat() >= Rational::from_integer(23.into()));
    }

    #[test]
    fn subset_sum_no_instance_not_savable() {
        assert!(!subset_sum_exists(&[2, 4], 5));
        let net = gen_subset_sum_incoming(&[2, 4], 5).unwrap();
        let oracle = oracle_multi_in(&net, "v", "w", 8).unwrap();
        // L_v = 5 + 6 = 11 is unreachable.
        assert!(*oracle.best_assets.rat() < Rational::from_integer(11.into()));
    }

    #[test]
    fn fixed_rate_generator_certificate() {
        let (net, rates) = gen_subset_sum_incoming_fixed(&[3, 5, 7], 8).unwrap();
        let outcome = decide_fixed_rates_set(
            &net,
            "v",
            "w",
            &["e_1".into(), "e_2".into(), "e_prime".into()],
            &[rates["e_1"].clone(), rates["e_2"].clone(), rates["e_prime"].clone()],
        )
        .unwrap();
        assert!(outcome.creditor_positive);
        assert_eq!(outcome.post_state.assets_of("v"), &Money::from_int(8));
        assert!(outcome.deltas["w"].is_zero());
    }

    #[test]
    fn set_packing_outgoing_certificate() {
        // Two disjoint sets of a 4-element universe; pick both.
        let net =
            gen_set_packing_outgoing(4, &[vec![1, 2], vec![3, 4], vec![2, 3]], 2).unwrap();
        let result = decide_out_fixed(
            &net,
            "v",
            "w",
            &["e_v_s1".into(), "e_v_s2".into()],
            &[Rational::one(), Rational::one()],
        )
        .unwrap();
        assert!(result.pareto_positive);
        // Profit k·M + Σ|S_i| with M = 64.
        assert_eq!(
            result.creditor_profit_total,
            Rational::from_integer((2 * 64 + 4).into())
        );

        let overlap = decide_out_fixed(
            &net,
            "v",
            "w",
            &["e_v_s1".into(), "e_v_s3".into()],
            &[Rational::one(), Rational::one()],
        )
        .unwrap();
        assert!(!overlap.pareto_positive);
    }

    #[test]
    fn set_packing_prop_certificate() {
        let net = gen_set_packing_prop(4, &[vec![1, 2], vec![3, 4], vec![2, 3]], 2, None).unwrap();
        let result = decide_out_fixed(
            &net,
            "v",
            "w",
            &["e_v_s1".into(), "e_v_s2".into()],
            &[Rational::one(), Rational::one()],
        )
        .unwrap();
        assert!(result.pareto_positive);
        assert_eq!(result.creditor_profit_total, Rational::from_integer(4.into()));
    }

    #[test]
    fn random_network_is_deterministic_and_valid() {
        let a = random_network(6, 10, 9, RandomKind::Mixed, 1).unwrap();
        let b = random_network(6, 10, 9, RandomKind::Mixed, 1).unwrap();
        let sa = clear(&a).unwrap();
        let sb = clear(&b).unwrap();
        assert_eq!(sa.payments, sb.payments);
        let claimless = random_network(3, 0, 5, RandomKind::Proportional, 7).unwrap();
        assert_eq!(claimless.n_claims(), 0);
    }
}
