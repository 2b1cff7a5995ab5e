//! JSON network/report formats and the command-line driver.
//!
//! Numbers in documents are written as integer, decimal, or `"p/q"` fraction
//! strings and always map to exact rationals; reports carry each value both
//! as an exact fraction and a decimal rendering.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num::Zero;
use serde::{Deserialize, Serialize};

use crate::clearing::{clear, default_tolerance, ClearingState};
use crate::error::{Error, Result};
use crate::money::{approx_decimal, parse_rational, Money, Rational};
use crate::multi_in_opt::{
    bicriteria_fptas, decide_fixed_rates_set, network_kind, optimal_multi_in_fixed_set,
    subsidized_fptas_fixed_rates, MultiTradeResult, NetworkKind,
};
use crate::multi_out_opt::{
    brute_force_out_select, decide_out_fixed, optimal_out_proportional, OutgoingTradeResult,
};
use crate::net_model::{
    Bank, Claim, FinancialNetwork, PaymentFunction, PiecewiseLinear, TradeSpec,
};
use crate::single_opt::{
    approx_single_general, decide_single_fixed_alpha, optimal_single_edge_ranking,
    optimal_single_proportional, SingleTradeResult,
};
use crate::testkit;
use crate::trade_transform::TradeOutcome;

pub const FORMAT_VERSION: &str = "1";

// ---------------------------------------------------------------------------
// Documents

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub version: String,
    pub banks: Vec<BankDoc>,
    pub claims: Vec<ClaimDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BankDoc {
    pub id: String,
    pub external_assets: String,
    pub payments: PaymentDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PaymentDoc {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<BTreeMap<String, Vec<[String; 2]>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClaimDoc {
    pub id: String,
    pub debtor: String,
    pub creditor: String,
    pub liability: String,
}

/// An exact value with a human-readable decimal rendering.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NumberDoc {
    pub fraction: String,
    pub decimal: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClearingDoc {
    pub payments: BTreeMap<String, NumberDoc>,
    pub assets: BTreeMap<String, NumberDoc>,
    pub recovery: BTreeMap<String, NumberDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TradeDoc {
    pub direction: String,
    pub focal_bank: String,
    pub buyer: String,
    pub claims: Vec<String>,
    pub rates: Vec<NumberDoc>,
    pub return_paid: NumberDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlagsDoc {
    pub creditor_positive: bool,
    pub pareto_positive: bool,
    pub both_strict: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GuaranteeDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<NumberDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<NumberDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsidies: Option<[NumberDoc; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportDocument {
    pub clearing: ClearingDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trade: Option<TradeDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<BTreeMap<String, NumberDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flags: Option<FlagsDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guarantees: Option<GuaranteeDoc>,
}

// ---------------------------------------------------------------------------
// Conversions

fn rational_string(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn number_doc(r: &Rational) -> NumberDoc {
    NumberDoc {
        fraction: rational_string(r),
        decimal: approx_decimal(r),
    }
}

fn parse_money(raw: &str, context: &str) -> Result<Money> {
    let r = parse_rational(raw)
        .ok_or_else(|| Error::ParseError(format!("{context}: bad number {raw:?}")))?;
    Money::try_from_rational(r)
        .ok_or_else(|| Error::ParseError(format!("{context}: negative amount {raw:?}")))
    }

fn parse_rational_field(raw: &str, context: &str) -> Result<Rational> {
    parse_rational(raw).ok_or_else(|| Error::ParseError(format!("{context}: bad number {raw:?}")))
}

pub fn network_to_document(network: &FinancialNetwork) -> NetworkDocument {
    let banks = network
        .banks()
        .map(|b| {
            let payments = match &b.payment {
                PaymentFunction::Proportional => PaymentDoc {
                    kind: "proportional".into(),
                    order: None,
                    table: None,
                },
                PaymentFunction::EdgeRanking(order) => PaymentDoc {
                    kind: "edge-ranking".into(),
                    order: Some(order.clone()),
                    table: None,
                },
                PaymentFunction::GeneralMonotone(tables) => PaymentDoc {
                    kind: "general-monotone".into(),
                    order: None,
                    table: Some(
                        tables
                            .iter()
                            .map(|(claim, table)| {
                                (
                                    claim.clone(),
                                    table
                                        .points()
                                        .iter()
                                        .map(|(x, y)| [rational_string(x), rational_string(y)])
                                        .collect(),
                                )
                            })
                            .collect(),
                    ),
                },
            };
            BankDoc {
                id: b.id.clone(),
                external_assets: rational_string(b.external_assets.rat()),
                payments,
            }
        })
        .collect();
    let claims = network
        .claims()
        .map(|c| ClaimDoc {
            id: c.id.clone(),
            debtor: c.debtor.clone(),
            creditor: c.creditor.clone(),
            liability: rational_string(c.liability.rat()),
        })
        .collect();
    NetworkDocument {
        version: FORMAT_VERSION.into(),
        banks,
        claims,
    }
}

pub fn document_to_network(doc: &NetworkDocument) -> Result<FinancialNetwork> {
    let mut banks = Vec::new();
    for b in &doc.banks {
        let context = format!("bank {}", b.id);
        let payment = match b.payments.kind.as_str() {
            "proportional" => PaymentFunction::Proportional,
            "edge-ranking" => {
                PaymentFunction::EdgeRanking(b.payments.order.clone().unwrap_or_default())
            }
            "general-monotone" => {
                let mut tables = BTreeMap::new();
                for (claim, points) in b.payments.table.clone().unwrap_or_default() {
                    let pts = points
                        .iter()
                        .map(|[x, y]| {
                            Ok((
                                parse_rational_field(x, &context)?,
                                parse_rational_field(y, &context)?,
                            ))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let table = PiecewiseLinear::new(pts).ok_or_else(|| {
                        Error::ParseError(format!("{context}: table for {claim} not increasing"))
                    })?;
                    tables.insert(claim, table);
                }
                PaymentFunction::GeneralMonotone(tables)
            }
            other => {
                return Err(Error::ParseError(format!(
                    "{context}: unknown payment kind {other:?}"
                )))
            }
        };
        banks.push(Bank {
            id: b.id.clone(),
            external_assets: parse_money(&b.external_assets, &context)?,
            payment,
        });
    }
    let mut claims = Vec::new();
    for c in &doc.claims {
        claims.push(Claim {
            id: c.id.clone(),
            debtor: c.debtor.clone(),
            creditor: c.creditor.clone(),
            liability: parse_money(&c.liability, &format!("claim {}", c.id))?,
        });
    }
    FinancialNetwork::build(banks, claims)
}

pub fn parse_network(text: &str) -> Result<FinancialNetwork> {
    let doc: NetworkDocument =
        serde_json::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;
    document_to_network(&doc)
}

pub fn emit_network(network: &FinancialNetwork) -> String {
    serde_json::to_string_pretty(&network_to_document(network)).expect("document serializes")
}

pub fn clearing_doc(state: &ClearingState) -> ClearingDoc {
    ClearingDoc {
        payments: state
            .payments
            .iter()
            .map(|(k, v)| (k.clone(), number_doc(v.rat())))
            .collect(),
        assets: state
            .assets
            .iter()
            .map(|(k, v)| (k.clone(), number_doc(v.rat())))
            .collect(),
        recovery: state
            .recovery
            .iter()
            .map(|(k, v)| (k.clone(), number_doc(v)))
            .collect(),
    }
}

fn trade_doc(spec: &TradeSpec, return_paid: &Money) -> TradeDoc {
    TradeDoc {
        direction: match spec.direction {
            crate::net_model::TradeDirection::Incoming => "incoming".into(),
            crate::net_model::TradeDirection::Outgoing => "outgoing".into(),
        },
        focal_bank: spec.focal_bank.clone(),
        buyer: spec.buyer.clone(),
        claims: spec.claims.clone(),
        rates: spec.rates.iter().map(number_doc).collect(),
        return_paid: number_doc(return_paid.rat()),
    }
}

fn outcome_report(spec: &TradeSpec, outcome: &TradeOutcome) -> ReportDocument {
    ReportDocument {
        clearing: clearing_doc(&outcome.post_state),
        trade: Some(trade_doc(spec, &outcome.return_paid)),
        deltas: Some(
            outcome
                .deltas
                .iter()
                .map(|(k, v)| (k.clone(), number_doc(v)))
                .collect(),
        ),
        flags: Some(FlagsDoc {
            creditor_positive: outcome.creditor_positive,
            pareto_positive: outcome.pareto_positive,
            both_strict: outcome.both_strict,
        }),
        guarantees: None,
    }
}

fn single_report(
    network: &FinancialNetwork,
    claim: &str,
    buyer: &str,
    result: &SingleTradeResult,
) -> Result<ReportDocument> {
    let creditor = network.claim(claim)?.creditor.clone();
    let spec = TradeSpec::new(
        crate::net_model::TradeDirection::Incoming,
        creditor.as_str(),
        buyer,
        vec![claim.to_string()],
        vec![result.alpha.clone()],
    );
    Ok(outcome_report(&spec, &result.outcome))
}

// ---------------------------------------------------------------------------
// CLI

#[derive(Parser, Debug)]
#[command(name = "clearnet", version, about = "Clearing and claims trading in financial networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the maximal clearing state of a network file.
    Clear { file: PathBuf },
    /// Evaluate or optimize claims trades.
    Trade {
        #[command(subcommand)]
        what: TradeCmd,
    },
    /// Emit hardness-reduction or random instances.
    Generate {
        #[command(subcommand)]
        what: GenCmd,
    },
    /// Run property suites over seeded random corpora.
    Verify {
        /// `random` for generated corpora, or a network file for round-trip
        /// checks.
        target: String,
        #[arg(long, value_delimiter = ',')]
        properties: Vec<String>,
        #[arg(long, default_value_t = 100)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
enum TradeCmd {
    /// Trade one incoming claim.
    Single {
        file: PathBuf,
        #[arg(long)]
        claim: String,
        #[arg(long)]
        buyer: String,
        /// Decide a fixed haircut rate.
        #[arg(long)]
        alpha: Option<String>,
        /// Find the optimal rate instead.
        #[arg(long)]
        optimize: bool,
        /// Level spacing for the general-network approximation.
        #[arg(long)]
        delta: Option<String>,
    },
    /// Trade a set of the creditor's incoming claims.
    MultiIn {
        file: PathBuf,
        #[arg(long)]
        creditor: String,
        #[arg(long)]
        buyer: String,
        #[arg(long, value_delimiter = ',')]
        claims: Vec<String>,
        /// Optimize a uniform rate for the given claim set.
        #[arg(long)]
        uniform: bool,
        /// Choose the claim set via the bicriteria approximation.
        #[arg(long)]
        choose: bool,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        delta: Option<String>,
        /// JSON file mapping claim ids to fixed rates.
        #[arg(long)]
        rates: Option<PathBuf>,
        /// Choose the claim set for the fixed rates (subsidized scheme).
        #[arg(long)]
        choose_fixed: bool,
    },
    /// Trade a set of the debtor's outgoing claims.
    MultiOut {
        file: PathBuf,
        #[arg(long)]
        debtor: String,
        #[arg(long)]
        buyer: String,
        #[arg(long, value_delimiter = ',')]
        claims: Vec<String>,
        /// JSON file mapping claim ids to fixed rates.
        #[arg(long)]
        rates: Option<PathBuf>,
        /// Optimize compensations for the given claim set (proportional).
        #[arg(long)]
        optimize: bool,
        /// Exhaustive subset search.
        #[arg(long)]
        brute_force: bool,
        #[arg(long, default_value_t = 50)]
        grid: u32,
    },
}

#[derive(Subcommand, Debug)]
enum GenCmd {
    /// Subset-sum reduction (variable rates).
    SubsetSum {
        #[arg(long, value_delimiter = ',')]
        values: Vec<u64>,
        #[arg(long)]
        target: u64,
    },
    /// Subset-sum reduction (fixed rates); emits `{network, rates}`.
    SubsetSumFixed {
        #[arg(long, value_delimiter = ',')]
        values: Vec<u64>,
        #[arg(long)]
        target: u64,
    },
    /// Set-packing reduction, edge-ranking payments.  Sets are given as
    /// semicolon-separated comma lists, e.g. `1,2;3,4`.
    SetPacking {
        #[arg(long)]
        universe: usize,
        #[arg(long)]
        sets: String,
        #[arg(long)]
        k: usize,
    },
    /// Set-packing reduction, proportional payments (d-uniform sets).
    SetPackingProp {
        #[arg(long)]
        universe: usize,
        #[arg(long)]
        sets: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        big: Option<u64>,
    },
    /// Seeded random network.
    Random {
        #[arg(long)]
        banks: usize,
        #[arg(long)]
        claims: usize,
        #[arg(long, default_value_t = 9)]
        max_liability: u64,
        #[arg(long, default_value = "mixed")]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Exit code for a successful negative answer ("no trade exists").
pub const EXIT_NO_TRADE: i32 = 2;

fn read_network(path: &PathBuf) -> Result<FinancialNetwork> {
    parse_network(&std::fs::read_to_string(path)?)
}

fn read_rates(path: &PathBuf) -> Result<BTreeMap<String, Rational>> {
    let raw: BTreeMap<String, String> =
        serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::ParseError(e.to_string()))?;
    raw.iter()
        .map(|(k, v)| Ok((k.clone(), parse_rational_field(v, "rates")?)))
        .collect()
}

fn print_report(report: &ReportDocument) {
    print_line(&serde_json::to_string_pretty(report).expect("report serializes"));
}

/// Prints a line to stdout, ignoring broken pipes from truncated consumers.
fn print_line(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn parse_sets(raw: &str) -> Result<Vec<Vec<usize>>> {
    raw.split(';')
        .map(|part| {
            part.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::ParseError(format!("bad set element {x:?}")))
                })
                .collect()
        })
        .collect()
}

fn multi_result_report(
    network: &FinancialNetwork,
    v: &str,
    w: &str,
    result: &MultiTradeResult,
    delta: Option<&Rational>,
) -> ReportDocument {
    let spec = TradeSpec::new(
        crate::net_model::TradeDirection::Incoming,
        v,
        w,
        result.claims.clone(),
        result.rates.clone(),
    );
    let _ = network;
    let mut report = outcome_report(&spec, &result.outcome);
    report.guarantees = Some(GuaranteeDoc {
        epsilon: Some(number_doc(&result.epsilon_used)),
        delta: delta.map(number_doc),
        subsidies: result
            .subsidies
            .as_ref()
            .map(|(a, b)| [number_doc(a.rat()), number_doc(b.rat())]),
    });
    report
}

fn out_result_report(u: &str, w: &str, result: &OutgoingTradeResult) -> ReportDocument {
    let spec = TradeSpec::new(
        crate::net_model::TradeDirection::Outgoing,
        u,
        w,
        result.claims.clone(),
        result.rates.clone(),
    );
    let mut report = outcome_report(&spec, &result.outcome);
    if let Some(flags) = &mut report.flags {
        flags.pareto_positive = result.pareto_positive;
    }
    report
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Clear { file } => {
            let network = read_network(&file)?;
            let state = clear(&network)?;
            let report = ReportDocument {
                clearing: clearing_doc(&state),
                trade: None,
                deltas: None,
                flags: None,
                guarantees: None,
            };
            print_report(&report);
            eprintln!("cleared {} banks, {} claims", network.n_banks(), network.n_claims());
            Ok(0)
        }
        Command::Trade { what } => run_trade(what),
        Command::Generate { what } => run_generate(what),
        Command::Verify {
            target,
            properties,
            trials,
            seed,
        } => run_verify(&target, &properties, trials, seed),
    }
}

fn run_trade(cmd: TradeCmd) -> Result<i32> {
    match cmd {
        TradeCmd::Single {
            file,
            claim,
            buyer,
            alpha,
            optimize,
            delta,
        } => {
            let network = read_network(&file)?;
            if let Some(raw) = alpha {
                let alpha = parse_rational_field(&raw, "--alpha")?;
                let outcome = decide_single_fixed_alpha(&network, &claim, &buyer, &alpha)?;
                let v = network.claim(&claim)?.creditor.clone();
                let spec = TradeSpec::new(
                    crate::net_model::TradeDirection::Incoming,
                    v.as_str(),
                    buyer.as_str(),
                    vec![claim.clone()],
                    vec![alpha],
                );
                let positive = outcome.creditor_positive;
                print_report(&outcome_report(&spec, &outcome));
                eprintln!(
                    "fixed-rate trade is {}creditor-positive",
                    if positive { "" } else { "not " }
                );
                return Ok(if positive { 0 } else { EXIT_NO_TRADE });
            }
            if !optimize {
                return Err(Error::SpecViolation(
                    "pass --alpha R or --optimize".into(),
                ));
            }
            let result = match network_kind(&network) {
                NetworkKind::EdgeRanking => {
                    optimal_single_edge_ranking(&network, &claim, &buyer)?
                }
                NetworkKind::Proportional => {
                    optimal_single_proportional(&network, &claim, &buyer)?
                }
                NetworkKind::General => {
                    let delta = match delta {
                        Some(raw) => Money::try_from_rational(parse_rational_field(
                            &raw, "--delta",
                        )?)
                        .ok_or_else(|| Error::ParseError("--delta must be positive".into()))?,
                        None => default_tolerance(),
                    };
                    approx_single_general(&network, &claim, &buyer, &delta)?
                }
            };
            match result {
                Some(result) => {
                    let report = single_report(&network, &claim, &buyer, &result)?;
                    print_report(&report);
                    eprintln!(
                        "optimal rate {} achieves assets {}",
                        result.alpha,
                        approx_decimal(result.achieved_assets.rat())
                    );
                    Ok(0)
                }
                None => {
                    eprintln!("no creditor-positive trade exists");
                    Ok(EXIT_NO_TRADE)
                }
            }
        }
        TradeCmd::MultiIn {
            file,
            creditor,
            buyer,
            claims,
            uniform,
            choose,
            epsilon,
            delta,
            rates,
            choose_fixed,
        } => {
            let network = read_network(&file)?;
            let epsilon = match epsilon {
                Some(raw) => parse_rational_field(&raw, "--epsilon")?,
                None => Rational::new(1.into(), 100.into()),
            };
            let delta_rat = match delta {
                Some(raw) => parse_rational_field(&raw, "--delta")?,
                None => Rational::new(1.into(), (1i64 << 20).into()),
            };
            if let Some(rates_file) = rates {
                let rate_map = read_rates(&rates_file)?;
                if choose_fixed {
                    let delta = if delta_rat.is_zero() {
                        Rational::new(1.into(), 10.into())
                    } else {
                        delta_rat.clone()
                    };
                    return match subsidized_fptas_fixed_rates(
                        &network, &creditor, &buyer, &rate_map, &delta,
                    )? {
                        Some(result) => {
                            print_report(&multi_result_report(
                                &network, &creditor, &buyer, &result, Some(&delta),
                            ));
                            eprintln!(
                                "subsidized trade of {} claims reaches assets {}",
                                result.claims.len(),
                                approx_decimal(result.achieved_assets.rat())
                            );
                            Ok(0)
                        }
                        None => {
                            eprintln!("no subsidized fixed-rate trade exists");
                            Ok(EXIT_NO_TRADE)
                        }
                    };
                }
                let rate_vec = claims
                    .iter()
                    .map(|c| {
                        rate_map.get(c).cloned().ok_or_else(|| {
                            Error::SpecViolation(format!("no rate for claim {c}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let outcome =
                    decide_fixed_rates_set(&network, &creditor, &buyer, &claims, &rate_vec)?;
                let spec = TradeSpec::new(
                    crate::net_model::TradeDirection::Incoming,
                    creditor.as_str(),
                    buyer.as_str(),
                    claims.clone(),
                    rate_vec,
                );
                let positive = outcome.creditor_positive;
                print_report(&outcome_report(&spec, &outcome));
                return Ok(if positive { 0 } else { EXIT_NO_TRADE });
            }
            if uniform {
                return match optimal_multi_in_fixed_set(&network, &creditor, &buyer, &claims)? {
                    Some(result) => {
                        print_report(&multi_result_report(&network, &creditor, &buyer, &result, None));
                        Ok(0)
                    }
                    None => {
                        eprintln!("no creditor-positive trade exists for this claim set");
                        Ok(EXIT_NO_TRADE)
                    }
                };
            }
            if choose {
                let delta_money = Money::try_from_rational(delta_rat.clone())
                    .ok_or_else(|| Error::ParseError("--delta must be positive".into()))?;
                return match bicriteria_fptas(&network, &creditor, &buyer, &epsilon, &delta_money)? {
                    Some(result) => {
                        print_report(&multi_result_report(
                            &network, &creditor, &buyer, &result, Some(&delta_rat),
                        ));
                        Ok(0)
                    }
                    None => {
                        eprintln!("no creditor-positive multi-trade exists");
                        Ok(EXIT_NO_TRADE)
                    }
                };
            }
            Err(Error::SpecViolation(
                "pass --uniform, --choose, or --rates".into(),
            ))
        }
        TradeCmd::MultiOut {
            file,
            debtor,
            buyer,
            claims,
            rates,
            optimize,
            brute_force,
            grid,
        } => {
            let network = read_network(&file)?;
            if let Some(rates_file) = rates {
                let rate_map = read_rates(&rates_file)?;
                let rate_vec = claims
                    .iter()
                    .map(|c| {
                        rate_map.get(c).cloned().ok_or_else(|| {
                            Error::SpecViolation(format!("no rate for claim {c}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let result = decide_out_fixed(&network, &debtor, &buyer, &claims, &rate_vec)?;
                let positive = result.pareto_positive;
                print_report(&out_result_report(&debtor, &buyer, &result));
                return Ok(if positive { 0 } else { EXIT_NO_TRADE });
            }
            if optimize {
                return match optimal_out_proportional(&network, &debtor, &buyer, &claims)? {
                    Some(result) => {
                        print_report(&out_result_report(&debtor, &buyer, &result));
                        Ok(0)
                    }
                    None => {
                        eprintln!("no Pareto-positive compensation exists for this claim set");
                        Ok(EXIT_NO_TRADE)
                    }
                };
            }
            if brute_force {
                return match brute_force_out_select(&network, &debtor, &buyer, grid, None)? {
                    Some(result) => {
                        print_report(&out_result_report(&debtor, &buyer, &result));
                        Ok(0)
                    }
                    None => {
                        eprintln!("no Pareto-positive outgoing trade exists");
                        Ok(EXIT_NO_TRADE)
                    }
                };
            }
            Err(Error::SpecViolation(
                "pass --rates, --optimize, or --brute-force".into(),
            ))
        }
    }
}

fn run_generate(cmd: GenCmd) -> Result<i32> {
    match cmd {
        GenCmd::SubsetSum { values, target } => {
            let net = testkit::gen_subset_sum_incoming(&values, target)?;
            print_line(&emit_network(&net));
        }
        GenCmd::SubsetSumFixed { values, target } => {
            let (net, rates) = testkit::gen_subset_sum_incoming_fixed(&values, target)?;
            let rates: BTreeMap<String, String> = rates
                .iter()
                .map(|(k, v)| (k.clone(), rational_string(v)))
                .collect();
            let wrapper = serde_json::json!({
                "network": network_to_document(&net),
                "rates": rates,
            });
            print_line(&serde_json::to_string_pretty(&wrapper).unwrap());
        }
        GenCmd::SetPacking { universe, sets, k } => {
            let sets = parse_sets(&sets)?;
            let net = testkit::gen_set_packing_outgoing(universe, &sets, k)?;
            print_line(&emit_network(&net));
        }
        GenCmd::SetPackingProp {
            universe,
            sets,
            k,
            big,
        } => {
            let sets = parse_sets(&sets)?;
            let net = testkit::gen_set_packing_prop(universe, &sets, k, big)?;
            print_line(&emit_network(&net));
        }
        GenCmd::Random {
            banks,
            claims,
            max_liability,
            kind,
            seed,
        } => {
            let kind = match kind.as_str() {
                "edge-ranking" => testkit::RandomKind::EdgeRanking,
                "proportional" => testkit::RandomKind::Proportional,
                "general-monotone" => testkit::RandomKind::GeneralMonotone,
                "mixed" => testkit::RandomKind::Mixed,
                other => {
                    return Err(Error::ParseError(format!("unknown kind {other:?}")))
                }
            };
            let net = testkit::random_network(banks, claims, max_liability, kind, seed)?;
            print_line(&emit_network(&net));
        }
    }
    Ok(0)
}

fn run_verify(target: &str, properties: &[String], trials: u32, seed: u64) -> Result<i32> {
    if target != "random" {
        let network = read_network(&PathBuf::from(target))?;
        let round_trip = parse_network(&emit_network(&network))?;
        let ok = round_trip == network;
        println!("property round-trip: {}", if ok { "pass" } else { "fail" });
        return Ok(if ok { 0 } else { 1 });
    }
    let mut all_ok = true;
    for prop in properties {
        let violations = match prop.as_str() {
            "no-double-strict" => testkit::check_no_double_strict(trials, seed)?,
            "integrality" => testkit::check_integrality(trials, seed)?,
            "monotonicity" => testkit::check_monotonicity(trials, seed)?,
            "non-expansivity" => testkit::check_non_expansivity(trials, seed)?,
            "round-trip" => {
                let mut bad = 0;
                for t in 0..trials {
                    let net = testkit::random_network(
                        4 + (t as usize % 5),
                        t as usize % 12,
                        9,
                        testkit::RandomKind::Mixed,
                        seed.wrapping_add(t as u64),
                    )?;
                    if parse_network(&emit_network(&net))? != net {
                        bad += 1;
                    }
                }
                bad
            }
            other => {
                return Err(Error::SpecViolation(format!("unknown property {other:?}")))
            }
        };
        let ok = violations == 0;
        all_ok &= ok;
        println!(
            "property {prop}: {} ({violations} violations in {trials} trials)",
            if ok { "pass" } else { "fail" }
        );
    }
    Ok(if all_ok { 0 } else { 1 })
}

/// Parses `argv` and executes; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{ex1_edge_ranking, random_network, RandomKind};

    #[test]
    fn round_trip_ex1() {
        let net = ex1_edge_ranking();
        let text = emit_network(&net);
        let parsed = parse_network(&text).unwrap();
        assert_eq!(parsed, net);
    }

    #[test]
    fn round_trip_random_mixed() {
        for seed in 0..10 {
            let net = random_network(5, 9, 9, RandomKind::Mixed, seed).unwrap();
            let parsed = parse_network(&emit_network(&net)).unwrap();
            assert_eq!(parsed, net);
        }
    }

    #[test]
    fn bad_fraction_rejected() {
        let net = ex1_edge_ranking();
        let text = emit_network(&net).replace("\"1\"", "\"3/0\"");
        assert!(matches!(parse_network(&text), Err(Error::ParseError(_))));
    }

    #[test]
    fn report_numbers_are_exact() {
        let state = clear(&ex1_edge_ranking()).unwrap();
        let doc = clearing_doc(&state);
        assert_eq!(doc.assets["w"].fraction, "3");
        assert_eq!(doc.payments["e_uv"].fraction, "1");
        let r = parse_rational(&doc.recovery["v"].fraction).unwrap();
        assert_eq!(r, Rational::new(1.into(), 4.into()));
    }
}
