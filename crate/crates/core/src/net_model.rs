//! Financial-network data model: banks, claims, payment functions, and trade
//! specifications, with full structural validation.

use std::collections::{BTreeMap, BTreeSet};

use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::money::{Money, Rational};

pub type BankId = String;
pub type ClaimId = String;

/// A claim (edge of the multigraph): `debtor` owes `creditor` an amount of
/// `liability`.  Liabilities are strictly positive in user-built networks;
/// internally constructed auxiliary networks may truncate a liability to zero,
/// in which case the claim simply never carries a payment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim {
    pub id: ClaimId,
    pub debtor: BankId,
    pub creditor: BankId,
    pub liability: Money,
}

/// A piecewise-linear non-decreasing map from funds to a payment amount,
/// given by breakpoints with strictly increasing x-coordinates.  Below the
/// first breakpoint the map is constant at the first y-value; above the last
/// breakpoint it is constant at the last y-value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiecewiseLinear {
    points: Vec<(Rational, Rational)>,
}

/// One linear segment of a payment map: `f(x) = intercept + slope * x` for
/// `x` in `[lo, hi]` (`hi = None` means unbounded above).
#[derive(Clone, Debug)]
pub struct Piece {
    pub lo: Rational,
    pub hi: Option<Rational>,
    pub intercept: Rational,
    pub slope: Rational,
}

impl Piece {
    fn constant(lo: Rational, hi: Option<Rational>, value: Rational) -> Self {
        Piece {
            lo,
            hi,
            intercept: value,
            slope: Rational::zero(),
        }
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        &self.intercept + &self.slope * x
    }
}

impl PiecewiseLinear {
    /// Builds a table from breakpoints; requires strictly increasing x and at
    /// least one point.  Monotonicity of y is checked by network validation.
    pub fn new(points: Vec<(Rational, Rational)>) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 {
                return None;
            }
        }
        Some(PiecewiseLinear { points })
    }

    pub fn points(&self) -> &[(Rational, Rational)] {
        &self.points
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.piece_at(x).eval(x)
    }

    /// Returns the linear segment containing `x`.  Boundary points are
    /// assigned to the lower segment so that downward-moving fixed-point
    /// iteration sees the piece that extends below the current value.
    pub fn piece_at(&self, x: &Rational) -> Piece {
        let pts = &self.points;
        if *x <= pts[0].0 {
            return Piece::constant(Rational::zero(), Some(pts[0].0.clone()), pts[0].1.clone());
        }
        for i in 1..pts.len() {
            if *x <= pts[i].0 {
                let (x0, y0) = &pts[i - 1];
                let (x1, y1) = &pts[i];
                let slope = (y1 - y0) / (x1 - x0);
                let intercept = y0 - &slope * x0;
                return Piece {
                    lo: x0.clone(),
                    hi: Some(x1.clone()),
                    intercept,
                    slope,
                };
            }
        }
        let last = pts.last().unwrap();
        Piece::constant(last.0.clone(), None, last.1.clone())
    }

    fn is_non_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0].1 <= w[1].1)
    }
}

/// How a bank distributes its available funds over its outgoing claims.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PaymentFunction {
    /// Every claim receives the same fraction of its liability.
    Proportional,
    /// Water-filling: claims are paid fully in the given priority order until
    /// funds run out; the order must be a permutation of the outgoing claims.
    EdgeRanking(Vec<ClaimId>),
    /// Explicit piecewise-linear per-claim payment tables.
    GeneralMonotone(BTreeMap<ClaimId, PiecewiseLinear>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bank {
    pub id: BankId,
    pub external_assets: Money,
    pub payment: PaymentFunction,
}

/// Direction of a multi-trade: `Incoming` trades claims held by the focal
/// creditor; `Outgoing` trades claims owed by the focal debtor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TradeDirection {
    Incoming,
    Outgoing,
}

/// A proposed trade: the buyer purchases the listed claims at per-claim
/// haircut rates, paying the return `Σ α_i ℓ_i` out of its external assets.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeSpec {
    pub direction: TradeDirection,
    pub focal_bank: BankId,
    pub buyer: BankId,
    pub claims: Vec<ClaimId>,
    pub rates: Vec<Rational>,
    /// Upper bound for rates; 1 for exact trades, 1+ε for approximate ones.
    pub rate_cap: Rational,
}

impl TradeSpec {
    pub fn new(
        direction: TradeDirection,
        focal_bank: impl Into<BankId>,
        buyer: impl Into<BankId>,
        claims: Vec<ClaimId>,
        rates: Vec<Rational>,
    ) -> Self {
        TradeSpec {
            direction,
            focal_bank: focal_bank.into(),
            buyer: buyer.into(),
            claims,
            rates,
            rate_cap: Rational::one(),
        }
    }

    pub fn with_cap(mut self, cap: Rational) -> Self {
        self.rate_cap = cap;
        self
    }
}

/// A validated financial network: directed multigraph of banks and claims
/// plus per-bank payment functions.  Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FinancialNetwork {
    banks: BTreeMap<BankId, Bank>,
    claims: BTreeMap<ClaimId, Claim>,
    outgoing: BTreeMap<BankId, Vec<ClaimId>>,
    incoming: BTreeMap<BankId, Vec<ClaimId>>,
}

/// Validation profile: `Strict` enforces the full payment-function contract
/// (payments exhaust funds until all liabilities are settled).  `Lenient` is
/// used for internally constructed auxiliary networks whose modified payment
/// functions may intentionally withhold funds (e.g. a buyer capped at its
/// pre-trade assets), and allows zero-liability claims.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Validation {
    Strict,
    Lenient,
}

/// Builds and validates a network from raw bank and claim records.
pub fn build_network(banks: Vec<Bank>, claims: Vec<Claim>) -> Result<FinancialNetwork> {
    FinancialNetwork::build(banks, claims)
}

impl FinancialNetwork {
    pub fn build(banks: Vec<Bank>, claims: Vec<Claim>) -> Result<Self> {
        Self::build_with(banks, claims, Validation::Strict)
    }

    /// Lenient construction for internally derived auxiliary networks.
    pub(crate) fn build_lenient(banks: Vec<Bank>, claims: Vec<Claim>) -> Result<Self> {
        Self::build_with(banks, claims, Validation::Lenient)
    }

    fn build_with(banks: Vec<Bank>, claims: Vec<Claim>, mode: Validation) -> Result<Self> {
        let mut bank_map = BTreeMap::new();
        for bank in banks {
            let id = bank.id.clone();
            if bank_map.insert(id.clone(), bank).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        let mut claim_map: BTreeMap<ClaimId, Claim> = BTreeMap::new();
        let mut outgoing: BTreeMap<BankId, Vec<ClaimId>> = BTreeMap::new();
        let mut incoming: BTreeMap<BankId, Vec<ClaimId>> = BTreeMap::new();
        for id in bank_map.keys() {
            outgoing.insert(id.clone(), Vec::new());
            incoming.insert(id.clone(), Vec::new());
        }
        for claim in claims {
            if claim.debtor == claim.creditor {
                return Err(Error::SelfLoop(claim.id));
            }
            for endpoint in [&claim.debtor, &claim.creditor] {
                if !bank_map.contains_key(endpoint) {
                    return Err(Error::DanglingEndpoint {
                        claim: claim.id.clone(),
                        bank: endpoint.clone(),
                    });
                }
            }
            let positive = !claim.liability.is_zero();
            if mode == Validation::Strict && !positive {
                return Err(Error::NonPositiveLiability(claim.id));
            }
            outgoing.get_mut(&claim.debtor).unwrap().push(claim.id.clone());
            incoming.get_mut(&claim.creditor).unwrap().push(claim.id.clone());
            let id = claim.id.clone();
            if claim_map.insert(id.clone(), claim).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        for list in outgoing.values_mut().chain(incoming.values_mut()) {
            list.sort();
        }
        let net = FinancialNetwork {
            banks: bank_map,
            claims: claim_map,
            outgoing,
            incoming,
        };
        for bank in net.banks.values() {
            net.validate_payment_function(bank, mode)?;
        }
        Ok(net)
    }

    fn validate_payment_function(&self, bank: &Bank, mode: Validation) -> Result<()> {
        let out: BTreeSet<&ClaimId> = self.outgoing[&bank.id].iter().collect();
        match &bank.payment {
            PaymentFunction::Proportional => Ok(()),
            PaymentFunction::EdgeRanking(order) => {
                let ordered: BTreeSet<&ClaimId> = order.iter().collect();
                if ordered.len() != order.len() || ordered != out {
                    return Err(Error::PaymentFunctionMismatch {
                        bank: bank.id.clone(),
                        detail: "ranking is not a permutation of outgoing claims".into(),
                    });
                }
                Ok(())
            }
            PaymentFunction::GeneralMonotone(tables) => {
                let keyed: BTreeSet<&ClaimId> = tables.keys().collect();
                if keyed != out {
                    return Err(Error::PaymentFunctionMismatch {
                        bank: bank.id.clone(),
                        detail: "tables do not cover exactly the outgoing claims".into(),
                    });
                }
                self.validate_tables(bank, tables, mode)
            }
        }
    }

    /// Checks the payment conditions on a general-monotone table: each
    /// per-claim map non-decreasing within [0, ℓ_e], and the per-bank sum
    /// equal to min(b, L_v) (strict) or at most min(b, L_v) (lenient).
    /// All maps involved are piecewise linear, so checking every breakpoint,
    /// the kink at L_v, and one point beyond the last breakpoint is exhaustive.
    fn validate_tables(
        &self,
        bank: &Bank,
        tables: &BTreeMap<ClaimId, PiecewiseLinear>,
        mode: Validation,
    ) -> Result<()> {
        let violation = |detail: &str| Error::MonotonicityViolation {
            bank: bank.id.clone(),
            detail: detail.into(),
        };
        let total = self.total_liabilities(&bank.id)?.into_rat();
        let mut checkpoints: BTreeSet<Rational> = BTreeSet::new();
        checkpoints.insert(Rational::zero());
        checkpoints.insert(total.clone());
        for (claim_id, table) in tables {
            if !table.is_non_decreasing() {
                return Err(violation(&format!("table for {claim_id} decreases")));
            }
            let liability = self.claims[claim_id].liability.rat();
            for (x, y) in table.points() {
                if x.is_negative() || y.is_negative() || y > liability {
                    return Err(violation(&format!(
                        "table for {claim_id} leaves [0, liability] range"
                    )));
                }
                checkpoints.insert(x.clone());
            }
        }
        let beyond = checkpoints.iter().last().unwrap() + Rational::one();
        checkpoints.insert(beyond);
        for b in &checkpoints {
            let sum: Rational = tables.values().map(|t| t.eval(b)).sum();
            let expected = if *b < total { b.clone() } else { total.clone() };
            match mode {
                Validation::Strict if sum != expected => {
                    return Err(violation(&format!(
                        "payments at funds {b} sum to {sum}, expected {expected}"
                    )))
                }
                Validation::Lenient if sum > expected => {
                    return Err(violation(&format!(
                        "payments at funds {b} sum to {sum}, exceeding {expected}"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn bank(&self, id: &str) -> Result<&Bank> {
        self.banks.get(id).ok_or_else(|| Error::UnknownBank(id.into()))
    }

    pub fn claim(&self, id: &str) -> Result<&Claim> {
        self.claims.get(id).ok_or_else(|| Error::UnknownClaim(id.into()))
    }

    pub fn banks(&self) -> impl Iterator<Item = &Bank> {
        self.banks.values()
    }

    pub fn claims(&self) -> impl Iterator<Item = &Claim> {
        self.claims.values()
    }

    pub fn bank_ids(&self) -> impl Iterator<Item = &BankId> {
        self.banks.keys()
    }

    pub fn n_banks(&self) -> usize {
        self.banks.len()
    }

    pub fn n_claims(&self) -> usize {
        self.claims.len()
    }

    pub fn has_bank(&self, id: &str) -> bool {
        self.banks.contains_key(id)
    }

    /// Outgoing claim ids of a bank, sorted.
    pub fn outgoing(&self, bank: &str) -> &[ClaimId] {
        self.outgoing.get(bank).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Incoming claim ids of a bank, sorted.
    pub fn incoming(&self, bank: &str) -> &[ClaimId] {
        self.incoming.get(bank).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Σ_{e ∈ E^+(v)} ℓ_e.
    pub fn total_liabilities(&self, bank: &str) -> Result<Money> {
        self.bank(bank)?;
        let mut sum = Money::zero();
        for claim_id in self.outgoing(bank) {
            sum += &self.claims[claim_id].liability;
        }
        Ok(sum)
    }

    /// Maximum funds a bank can ever hold: externals plus all incoming
    /// liabilities.
    pub fn max_funds(&self, bank: &str) -> Result<Money> {
        let mut sum = self.bank(bank)?.external_assets.clone();
        for claim_id in self.incoming(bank) {
            sum += &self.claims[claim_id].liability;
        }
        Ok(sum)
    }

    /// Evaluates a bank's payment function at the given funds level,
    /// returning per-claim payments.
    pub fn evaluate_payment(&self, bank: &str, funds: &Money) -> Result<BTreeMap<ClaimId, Money>> {
        let record = self.bank(bank)?;
        let max = self.max_funds(bank)?;
        if *funds > max {
            return Err(Error::FundsOutOfRange {
                bank: bank.into(),
                funds: funds.to_string(),
                max: max.to_string(),
            });
        }
        Ok(self.evaluate_payment_unchecked(record, funds.rat()))
    }

    /// Payment evaluation without the funds-range check; used by the clearing
    /// iteration whose intermediate upper bounds always stay in range.
    pub(crate) fn evaluate_payment_unchecked(
        &self,
        bank: &Bank,
        funds: &Rational,
    ) -> BTreeMap<ClaimId, Money> {
        let mut result = BTreeMap::new();
        match &bank.payment {
            PaymentFunction::Proportional => {
                let total = self
                    .total_liabilities(&bank.id)
                    .expect("bank exists")
                    .into_rat();
                let ratio = if total.is_zero() {
                    Rational::zero()
                } else if *funds >= total {
                    Rational::one()
                } else {
                    funds / &total
                };
                for claim_id in self.outgoing(&bank.id) {
                    let pay = self.claims[claim_id].liability.rat() * &ratio;
                    result.insert(claim_id.clone(), Money::try_from_rational(pay).unwrap());
                }
            }
            PaymentFunction::EdgeRanking(order) => {
                let mut remaining = funds.clone();
                for claim_id in order {
                    let liability = self.claims[claim_id].liability.rat();
                    let pay = if remaining >= *liability {
                        liability.clone()
                    } else {
                        remaining.clone()
                    };
                    remaining -= &pay;
                    result.insert(claim_id.clone(), Money::try_from_rational(pay).unwrap());
                }
            }
            PaymentFunction::GeneralMonotone(tables) => {
                for (claim_id, table) in tables {
                    let liability = self.claims[claim_id].liability.rat();
                    let mut pay = table.eval(funds);
                    if pay > *liability {
                        pay = liability.clone();
                    }
                    if pay.is_negative() {
                        pay = Rational::zero();
                    }
                    result.insert(claim_id.clone(), Money::try_from_rational(pay).unwrap());
                }
            }
        }
        result
    }

    /// The linear segment of `f_{claim}` active at the given funds level.
    pub(crate) fn payment_piece(&self, bank: &Bank, claim_id: &ClaimId, funds: &Rational) -> Piece {
        match &bank.payment {
            PaymentFunction::Proportional => {
                let total = self
                    .total_liabilities(&bank.id)
                    .expect("bank exists")
                    .into_rat();
                let liability = self.claims[claim_id].liability.rat();
                if total.is_zero() {
                    Piece::constant(Rational::zero(), None, Rational::zero())
                } else if *funds <= total {
                    Piece {
                        lo: Rational::zero(),
                        hi: Some(total.clone()),
                        intercept: Rational::zero(),
                        slope: liability / &total,
                    }
                } else {
                    Piece::constant(total, None, liability.clone())
                }
            }
            PaymentFunction::EdgeRanking(order) => {
                let mut prefix = Rational::zero();
                for id in order {
                    let liability = self.claims[id].liability.rat();
                    if id == claim_id {
                        let upper = &prefix + liability;
                        return if *funds <= prefix {
                            Piece::constant(Rational::zero(), Some(prefix), Rational::zero())
                        } else if *funds <= upper {
                            Piece {
                                lo: prefix.clone(),
                                hi: Some(upper),
                                intercept: -prefix,
                                slope: Rational::one(),
                            }
                        } else {
                            Piece::constant(upper, None, liability.clone())
                        };
                    }
                    prefix += liability;
                }
                unreachable!("claim not in ranking");
            }
            PaymentFunction::GeneralMonotone(tables) => tables[claim_id].piece_at(funds),
        }
    }

    /// Returns a copy with one bank's external assets replaced.
    pub(crate) fn with_external_assets(&self, bank: &str, assets: Money) -> Result<Self> {
        let mut net = self.clone();
        net.banks
            .get_mut(bank)
            .ok_or_else(|| Error::UnknownBank(bank.into()))?
            .external_assets = assets;
        Ok(net)
    }

    pub(crate) fn into_parts(self) -> (Vec<Bank>, Vec<Claim>) {
        (
            self.banks.into_values().collect(),
            self.claims.into_values().collect(),
        )
    }
}

/// Validates a trade specification against a network; returns the total
/// return ρ = Σ α_i ℓ_i on success.
pub fn validate_trade(network: &FinancialNetwork, trade: &TradeSpec) -> Result<Money> {
    if trade.claims.is_empty() {
        return Err(Error::SpecViolation("trade needs a non-empty claim set".into()));
    }
    if trade.claims.len() != trade.rates.len() {
        return Err(Error::SpecViolation(
            "trade rates and claims differ in length".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for claim_id in &trade.claims {
        if !seen.insert(claim_id) {
            return Err(Error::SpecViolation(format!("claim {claim_id} listed twice")));
        }
    }
    if trade.buyer == trade.focal_bank {
        return Err(Error::SpecViolation("buyer equals focal bank".into()));
    }
    let buyer = network.bank(&trade.buyer)?;
    network.bank(&trade.focal_bank)?;
    let mut return_paid = Money::zero();
    for (claim_id, rate) in trade.claims.iter().zip(&trade.rates) {
        let claim = network.claim(claim_id)?;
        if rate.is_negative() || *rate > trade.rate_cap {
            return Err(Error::SpecViolation(format!(
                "rate {rate} for claim {claim_id} outside [0, {}]",
                trade.rate_cap
            )));
        }
        match trade.direction {
            TradeDirection::Incoming => {
                if claim.creditor != trade.focal_bank {
                    return Err(Error::SpecViolation(format!(
                        "claim {claim_id} is not held by {}",
                        trade.focal_bank
                    )));
                }
                if claim.debtor == trade.buyer {
                    return Err(Error::SpecViolation(format!(
                        "claim {claim_id} is owed by the buyer"
                    )));
                }
            }
            TradeDirection::Outgoing => {
                if claim.debtor != trade.focal_bank {
                    return Err(Error::SpecViolation(format!(
                        "claim {claim_id} is not owed by {}",
                        trade.focal_bank
                    )));
                }
                if claim.creditor == trade.buyer {
                    return Err(Error::SpecViolation(format!(
                        "claim {claim_id} is held by the buyer"
                    )));
                }
            }
        }
        return_paid += &(&claim.liability * rate);
    }
    if return_paid > buyer.external_assets {
        return Err(Error::Unaffordable {
            return_paid: return_paid.to_string(),
            available: buyer.external_assets.to_string(),
        });
    }
    Ok(return_paid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::Zero;

    fn rat(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    /// The four-bank example network: u→v, v→w, v→y, y→v, all liability 2,
    /// externals a_u=1, a_w=2, v ranks (v,w) before (v,y).
    pub fn ex1() -> FinancialNetwork {
        build_network(
            vec![
                Bank {
                    id: "u".into(),
                    external_assets: Money::from_int(1),
                    payment: PaymentFunction::EdgeRanking(vec!["e_uv".into()]),
                },
                Bank {
                    id: "v".into(),
                    external_assets: Money::zero(),
                    payment: PaymentFunction::EdgeRanking(vec!["e_vw".into(), "e_vy".into()]),
                },
                Bank {
                    id: "w".into(),
                    external_assets: Money::from_int(2),
                    payment: PaymentFunction::EdgeRanking(vec![]),
                },
                Bank {
                    id: "y".into(),
                    external_assets: Money::zero(),
                    payment: PaymentFunction::EdgeRanking(vec!["e_yv".into()]),
                },
            ],
            vec![
                Claim {
                    id: "e_uv".into(),
                    debtor: "u".into(),
                    creditor: "v".into(),
                    liability: Money::from_int(2),
                },
                Claim {
                    id: "e_vw".into(),
                    debtor: "v".into(),
                    creditor: "w".into(),
                    liability: Money::from_int(2),
                },
                Claim {
                    id: "e_vy".into(),
                    debtor: "v".into(),
                    creditor: "y".into(),
                    liability: Money::from_int(2),
                },
                Claim {
                    id: "e_yv".into(),
                    debtor: "y".into(),
                    creditor: "v".into(),
                    liability: Money::from_int(2),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn ex1_builds_and_sums_liabilities() {
        let net = ex1();
        assert_eq!(net.total_liabilities("v").unwrap(), Money::from_int(4));
        assert_eq!(net.total_liabilities("u").unwrap(), Money::from_int(2));
        assert_eq!(net.total_liabilities("w").unwrap(), Money::zero());
    }

    #[test]
    fn trivial_network_no_claims() {
        let net = build_network(
            vec![Bank {
                id: "solo".into(),
                external_assets: Money::from_int(5),
                payment: PaymentFunction::Proportional,
            }],
            vec![],
        )
        .unwrap();
        assert_eq!(net.total_liabilities("solo").unwrap(), Money::zero());
    }

    #[test]
    fn self_loop_rejected() {
        let err = build_network(
            vec![Bank {
                id: "a".into(),
                external_assets: Money::zero(),
                payment: PaymentFunction::Proportional,
            }],
            vec![Claim {
                id: "e".into(),
                debtor: "a".into(),
                creditor: "a".into(),
                liability: Money::from_int(1),
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::SelfLoop(_)));
    }

    #[test]
    fn edge_ranking_evaluation() {
        let net = ex1();
        let pay = net.evaluate_payment("v", &Money::from_int(1)).unwrap();
        assert_eq!(pay["e_vw"], Money::from_int(1));
        assert_eq!(pay["e_vy"], Money::zero());
        let zero = net.evaluate_payment("v", &Money::zero()).unwrap();
        assert!(zero.values().all(Money::is_zero));
    }

    #[test]
    fn proportional_evaluation() {
        let mut banks: Vec<Bank> = ex1().into_parts().0;
        for b in &mut banks {
            b.payment = PaymentFunction::Proportional;
        }
        let net = build_network(banks, ex1().into_parts().1).unwrap();
        let pay = net.evaluate_payment("v", &Money::from_int(2)).unwrap();
        assert_eq!(pay["e_vw"], Money::from_int(1));
        assert_eq!(pay["e_vy"], Money::from_int(1));
    }

    #[test]
    fn funds_out_of_range_rejected() {
        let net = ex1();
        // max funds of v: 0 externals + incoming liabilities 2 + 2 = 4
        assert!(net.evaluate_payment("v", &Money::from_int(5)).is_err());
        assert!(net.evaluate_payment("nobody", &Money::zero()).is_err());
    }

    #[test]
    fn strict_table_validation_enforces_exhaustive_payments() {
        // A table that withholds funds must be rejected strictly but pass
        // leniently.
        let banks = vec![
            Bank {
                id: "a".into(),
                external_assets: Money::from_int(3),
                payment: PaymentFunction::GeneralMonotone(BTreeMap::from([(
                    "e".to_string(),
                    PiecewiseLinear::new(vec![
                        (Rational::zero(), Rational::zero()),
                        (rat(1), Rational::zero()),
                        (rat(3), rat(2)),
                    ])
                    .unwrap(),
                )])),
            },
            Bank {
                id: "b".into(),
                external_assets: Money::zero(),
                payment: PaymentFunction::Proportional,
            },
        ];
        let claims = vec![Claim {
            id: "e".into(),
            debtor: "a".into(),
            creditor: "b".into(),
            liability: Money::from_int(2),
        }];
        let err = build_network(banks.clone(), claims.clone()).unwrap_err();
        assert!(matches!(err, Error::MonotonicityViolation { .. }));
        assert!(FinancialNetwork::build_lenient(banks, claims).is_ok());
    }

    #[test]
    fn tabulated_edge_ranking_matches_general_monotone() {
        // Tabulating v's water-filling function into explicit tables must
        // reproduce the same payments on a grid.
        let net = ex1();
        let tables = BTreeMap::from([
            (
                "e_vw".to_string(),
                PiecewiseLinear::new(vec![
                    (Rational::zero(), Rational::zero()),
                    (rat(2), rat(2)),
                ])
                .unwrap(),
            ),
            (
                "e_vy".to_string(),
                PiecewiseLinear::new(vec![
                    (Rational::zero(), Rational::zero()),
                    (rat(2), Rational::zero()),
                    (rat(4), rat(2)),
                ])
                .unwrap(),
            ),
        ]);
        let (mut banks, claims) = net.clone().into_parts();
        for b in &mut banks {
            if b.id == "v" {
                b.payment = PaymentFunction::GeneralMonotone(tables.clone());
            }
        }
        let tabulated = build_network(banks, claims).unwrap();
        for i in 0..=16 {
            let funds = Money::from_ratio(i, 4);
            assert_eq!(
                net.evaluate_payment("v", &funds).unwrap(),
                tabulated.evaluate_payment("v", &funds).unwrap(),
                "mismatch at funds {funds}"
            );
        }
    }

    #[test]
    fn trade_validation() {
        let net = ex1();
        let ok = TradeSpec::new(
            TradeDirection::Incoming,
            "v",
            "w",
            vec!["e_uv".into()],
            vec![Rational::one()],
        );
        assert_eq!(validate_trade(&net, &ok).unwrap(), Money::from_int(2));

        // buyer cannot buy a claim it owes itself
        let bad = TradeSpec::new(
            TradeDirection::Incoming,
            "v",
            "y",
            vec!["e_yv".into()],
            vec![Rational::one()],
        );
        assert!(validate_trade(&net, &bad).is_err());

        // unaffordable: return 2 exceeds y's externals 0
        let poor = TradeSpec::new(
            TradeDirection::Incoming,
            "v",
            "y",
            vec!["e_uv".into()],
            vec![Rational::one()],
        );
        assert!(matches!(
            validate_trade(&net, &poor).unwrap_err(),
            Error::Unaffordable { .. }
        ));
    }
}
