//! Discrete-time equity markets on a finite binary lattice.
//!
//! The crate covers the Cox-Ross-Rubinstein model end to end:
//!
//! - [`lattice`]: toss paths, Bernoulli path measures, adapted processes,
//!   expectation and one-step conditional expectation;
//! - [`market`]: markets, predictable quantity processes and the portfolio
//!   algebra (value and closing-value processes, self-financing);
//! - [`crr`]: the binomial market, discounting, viability and the
//!   risk-neutral parameter;
//! - [`pricing`]: fair prices, backward induction, replicating portfolios
//!   and the replication, martingale and arbitrage predicates;
//! - [`payoff`]: a small expression language for path-dependent payoffs;
//! - [`io`]: CSV formats for portfolios, value trees and payoff tables;
//! - [`format`]: number formatting for human-readable reports.
//!
//! ```
//! use crr_core::crr::{CrrMarket, CrrParams};
//! use crr_core::payoff::parse_payoff;
//! use crr_core::pricing::fair_price;
//!
//! let market = CrrMarket::new(CrrParams::new(1.2, 0.8, 10.0, 0.03, 0.5)?, 2)?;
//! let lookback = parse_payoff("lookback")?;
//! let price = fair_price(&market, &lookback, 2)?;
//! assert!((price - 1.2579).abs() < 5e-4);
//! # Ok::<(), crr_core::Error>(())
//! ```

pub mod crr;
mod error;
pub mod format;
pub mod io;
pub mod lattice;
pub mod market;
pub mod payoff;
pub mod pricing;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/portfolios.md")]
    mod portfolios {}
    #[doc = include_str!("../../../book/src/crr.md")]
    mod crr {}
    #[doc = include_str!("../../../book/src/pricing.md")]
    mod pricing {}
    #[doc = include_str!("../../../book/src/arbitrage.md")]
    mod arbitrage {}
    #[doc = include_str!("../../../book/src/payoffs.md")]
    mod payoffs {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
