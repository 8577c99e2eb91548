use thiserror::Error;

use crate::payoff::{EvalError, ParseError};

/// Errors raised by lattice, market and pricing operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("horizon {requested} exceeds the configured limit of {limit}")]
    HorizonTooLarge { requested: usize, limit: usize },

    #[error("time {time} is outside the lattice horizon {horizon}")]
    TimeOutOfRange { time: usize, horizon: usize },

    #[error("prefix of length {found} cannot be used at time {expected}")]
    PrefixLength { expected: usize, found: usize },

    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },

    #[error("probability {0} is not in [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid market parameters: {0}")]
    InvalidParams(String),

    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("unknown asset `{0}`")]
    UnknownAsset(String),

    #[error("asset `{asset}` has a zero price at time {time}, prefix {prefix}")]
    ZeroFundingPrice {
        asset: String,
        time: usize,
        prefix: String,
    },

    #[error("portfolio holds `{0}`, which is not a stock")]
    NonStockSupport(String),

    #[error("quantity of `{asset}` at time {time} depends on the toss at time {time}")]
    NotPredictable { asset: String, time: usize },

    #[error("no risk-neutral measure: market not viable, requires d < 1+r < u")]
    NotViable,

    #[error("market is viable; no arbitrage portfolio exists")]
    MarketViable,

    #[error("payoff evaluates to {value} on path {path}")]
    NonFinitePayoff { path: String, value: f64 },

    #[error("payoff evaluation failed on path {path}: {source}")]
    Payoff { path: String, source: EvalError },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("path table: {0}")]
    PathTable(String),

    #[error(
        "backward induction gives {lattice} at the root but the expectation gives {expectation}"
    )]
    Inconsistent { lattice: f64, expectation: f64 },

    #[error("{0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
