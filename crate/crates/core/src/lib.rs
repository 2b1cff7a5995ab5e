//! Clearing and claims-trading engine for financial networks.
//!
//! The crate models a financial system as a directed multigraph of banks and
//! claims.  Each bank owns external assets and distributes whatever funds it
//! has over its outgoing claims according to a payment function (proportional,
//! edge-ranking, or a general monotone piecewise-linear table).  On top of the
//! clearing machinery the crate implements claims trades: a buyer purchases
//! one or more claims against an immediate liquidity payment (the "return"),
//! and the optimizers search for haircut rates and claim sets that improve the
//! seller's position without harming the buyer.

pub mod clearing;
pub mod cli_io;
pub mod error;
pub mod lp_solver;
pub mod money;
pub mod multi_in_opt;
pub mod multi_out_opt;
pub mod net_model;
pub mod single_opt;
pub mod testkit;
pub mod trade_transform;

pub use error::{Error, Result};
pub use money::{Money, Rational};
pub use net_model::{Bank, Claim, FinancialNetwork, PaymentFunction, TradeDirection, TradeSpec};
