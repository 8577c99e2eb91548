//! Risk-neutral pricing, replication by backward induction, and the
//! verification predicates for replication, martingales and arbitrage.

use std::fmt;

use crate::crr::{disc_rfr_proc, discount_factor, discounted_value, CrrMarket, RISKY, RISK_FREE};
use crate::error::{Error, Result};
use crate::format::sig6;
use crate::lattice::{
    step_at, weighted_step, BinaryLattice, LatticeProcess, PathMeasure, TossPath,
};
use crate::market::{
    closing_at, closing_value_lattice, init_value, qty_single, qty_sum, self_financing_gap, Market,
    PathwiseQuantities, Portfolio, PredictableProcess,
};
use crate::payoff::{eval_payoff, PayoffExpr};

/// Default tolerance for replication and martingale checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// A derivative payoff: a function of the first `T` tosses.
pub trait Payoff {
    /// Payoff on the scenario `path` (length `T`) whose risky prices are
    /// `prices = S_0..=S_T`.
    fn evaluate(&self, path: &TossPath, prices: &[f64]) -> Result<f64>;
}

impl Payoff for PayoffExpr {
    fn evaluate(&self, path: &TossPath, prices: &[f64]) -> Result<f64> {
        eval_payoff(self, prices).map_err(|source| Error::Payoff {
            path: path.to_string(),
            source,
        })
    }
}

/// Payoff given explicitly per terminal path, for functions the expression
/// language cannot state.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    horizon: usize,
    values: Vec<f64>,
}

impl PathTable {
    /// `values[k]` is the payoff on the `k`-th length-`horizon` path in node order.
    pub fn new(horizon: usize, values: Vec<f64>) -> Result<Self> {
        BinaryLattice::new(horizon)?;
        if values.len() != BinaryLattice::width(horizon) {
            return Err(Error::PathTable(format!(
                "{} values given, maturity {horizon} needs {}",
                values.len(),
                BinaryLattice::width(horizon)
            )));
        }
        Ok(Self { horizon, values })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Payoff for PathTable {
    fn evaluate(&self, path: &TossPath, _prices: &[f64]) -> Result<f64> {
        if path.len() != self.horizon {
            return Err(Error::PathTable(format!(
                "table has maturity {}, asked for a path of length {}",
                self.horizon,
                path.len()
            )));
        }
        Ok(self.values[path.index()])
    }
}

fn check_maturity(crr: &CrrMarket, maturity: usize) -> Result<()> {
    if maturity > crr.horizon() {
        return Err(Error::TimeOutOfRange {
            time: maturity,
            horizon: crr.horizon(),
        });
    }
    Ok(())
}

/// Payoff on every length-`maturity` path, in node order.
pub fn terminal_payoffs<P: Payoff + ?Sized>(
    crr: &CrrMarket,
    payoff: &P,
    maturity: usize,
) -> Result<Vec<f64>> {
    check_maturity(crr, maturity)?;
    let risky = crr.risky_prices();
    BinaryLattice::new(maturity)?
        .paths(maturity)
        .map(|w| {
            let prices: Vec<f64> = (0..=maturity)
                .map(|n| risky.along(n, &w))
                .collect::<Result<_>>()?;
            let value = payoff.evaluate(&w, &prices)?;
            if !value.is_finite() {
                return Err(Error::NonFinitePayoff {
                    path: w.to_string(),
                    value,
                });
            }
            Ok(value)
        })
        .collect()
}

/// Discounted expectation of the payoff under the risk-neutral measure.
pub fn fair_price<P: Payoff + ?Sized>(crr: &CrrMarket, payoff: &P, maturity: usize) -> Result<f64> {
    let q = crr.risk_neutral_q()?;
    let payoffs = terminal_payoffs(crr, payoff, maturity)?;
    Ok(discounted_expectation(
        q,
        crr.params().r,
        &payoffs,
        maturity,
    ))
}

fn discounted_expectation(q: f64, r: f64, payoffs: &[f64], maturity: usize) -> f64 {
    let weights = PathMeasure::new(q)
        .expect("risk-neutral parameter lies in (0, 1)")
        .level_weights(maturity);
    let expected: f64 = weights.iter().zip(payoffs).map(|(w, x)| w * x).sum();
    expected * discount_factor(r, maturity).expect("rate validated with the market")
}

/// Option values at every node up to the maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceLattice {
    values: LatticeProcess,
    q: f64,
    r: f64,
}

impl PriceLattice {
    pub fn values(&self) -> &LatticeProcess {
        &self.values
    }

    pub fn maturity(&self) -> usize {
        self.values.horizon()
    }

    /// Value at the root, i.e. the fair price.
    pub fn price(&self) -> f64 {
        self.values.at(0, 0)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn value(&self, n: usize, prefix: &TossPath) -> Result<f64> {
        self.values.get(n, prefix)
    }
}

/// Backward induction from the payoff: each node holds the discounted one-step
/// risk-neutral expectation of its children.
pub fn price_lattice<P: Payoff + ?Sized>(
    crr: &CrrMarket,
    payoff: &P,
    maturity: usize,
) -> Result<PriceLattice> {
    let q = crr.risk_neutral_q()?;
    let r = crr.params().r;
    let payoffs = terminal_payoffs(crr, payoff, maturity)?;
    let measure = PathMeasure::new(q)?;

    let mut levels = vec![Vec::new(); maturity + 1];
    levels[maturity] = payoffs.clone();
    let growth = 1.0 + r;
    for n in (0..maturity).rev() {
        levels[n] = (0..BinaryLattice::width(n))
            .map(|k| {
                let up = levels[n + 1][2 * k];
                let down = levels[n + 1][2 * k + 1];
                weighted_step(&measure, up, down) / growth
            })
            .collect();
    }
    let values = LatticeProcess::from_levels(levels)?;

    let expectation = discounted_expectation(q, r, &payoffs, maturity);
    let root = values.at(0, 0);
    let scale = payoffs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if (root - expectation).abs() > DEFAULT_TOLERANCE * scale {
        return Err(Error::Inconsistent {
            lattice: root,
            expectation,
        });
    }
    Ok(PriceLattice { values, q, r })
}

/// Replicating stock portfolio: at each node hold
/// `delta = (V_up - V_down) / (S_up - S_down)` risky shares and put the rest of
/// the node value in the risk-free asset. Positions set at the last rebalancing
/// date are kept unchanged after the maturity.
pub fn replicating_portfolio<P: Payoff + ?Sized>(
    crr: &CrrMarket,
    payoff: &P,
    maturity: usize,
) -> Result<Portfolio> {
    let prices = price_lattice(crr, payoff, maturity)?;
    let horizon = crr.horizon();
    let risky = crr.risky_prices();
    let r = crr.params().r;

    let hedge_at = |n: usize, k: usize| -> (f64, f64) {
        let v = prices.values.at(n, k);
        let s = risky.at(n, k);
        let delta = (prices.values.at(n + 1, 2 * k) - prices.values.at(n + 1, 2 * k + 1))
            / (risky.at(n + 1, 2 * k) - risky.at(n + 1, 2 * k + 1));
        let bond = (v - delta * s) / disc_rfr_proc(r, n).expect("rate validated");
        (delta, bond)
    };

    // position held over ]t-1, t], decided at node (t-1, k)
    let position = |t: usize, k: usize| -> (f64, f64) {
        let decided = t - 1;
        if maturity == 0 {
            (0.0, prices.price())
        } else if decided < maturity {
            hedge_at(decided, k)
        } else {
            hedge_at(maturity - 1, k >> (decided - (maturity - 1)))
        }
    };

    let delta = PredictableProcess::from_fn(horizon, |t, w| position(t, w.index()).0)?;
    let bond = PredictableProcess::from_fn(horizon, |t, w| position(t, w.index()).1)?;
    Portfolio::new(
        crr.market(),
        qty_sum(&qty_single(RISKY, delta), &qty_single(RISK_FREE, bond))?,
    )
}

/// Outcome of checking a portfolio against a payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub self_financing: bool,
    pub trading_strategy: bool,
    /// Largest `|closing value - payoff|` over the terminal paths.
    pub max_terminal_error: f64,
    pub init_value: f64,
    /// Largest `|value(n) - closing value(n)|` over the rebalancing dates.
    pub self_financing_gap: f64,
    pub tolerance: f64,
}

impl ReplicationReport {
    pub fn is_replicating(&self) -> bool {
        self.self_financing && self.trading_strategy && self.max_terminal_error <= self.tolerance
    }
}

impl fmt::Display for ReplicationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(f, "trading-strategy: {}", verdict(self.trading_strategy))?;
        writeln!(
            f,
            "self-financing: {} (max gap {})",
            verdict(self.self_financing),
            sig6(self.self_financing_gap)
        )?;
        writeln!(
            f,
            "terminal-value: {} (max error {})",
            verdict(self.max_terminal_error <= self.tolerance),
            sig6(self.max_terminal_error)
        )?;
        write!(
            f,
            "replicating: {}",
            if self.is_replicating() { "yes" } else { "no" }
        )
    }
}

fn check_stock_support<'a>(market: &Market, assets: impl Iterator<Item = &'a str>) -> Result<()> {
    for asset in assets {
        if market.asset(asset).is_none() {
            return Err(Error::UnknownAsset(asset.to_string()));
        }
        if !market.is_stock(asset) {
            return Err(Error::NonStockSupport(asset.to_string()));
        }
    }
    Ok(())
}

/// Checks that `p` is a self-financing stock trading strategy whose closing
/// value at the maturity equals the payoff on every path.
pub fn verify_replication<P: Payoff + ?Sized>(
    crr: &CrrMarket,
    p: &Portfolio,
    payoff: &P,
    maturity: usize,
    tolerance: f64,
) -> Result<ReplicationReport> {
    let market = crr.market();
    check_stock_support(market, p.support().iter().map(String::as_str))?;
    let payoffs = terminal_payoffs(crr, payoff, maturity)?;
    let max_terminal_error = payoffs
        .iter()
        .enumerate()
        .map(|(k, x)| (closing_at(market, p, maturity, k) - x).abs())
        .fold(0.0, f64::max);
    let gap = self_financing_gap(market, p);
    Ok(ReplicationReport {
        self_financing: gap <= tolerance,
        trading_strategy: p.quantities().is_trading_strategy(),
        max_terminal_error,
        init_value: init_value(market, p),
        self_financing_gap: gap,
        tolerance,
    })
}

/// [`verify_replication`] for an externally supplied per-path table, which
/// may fail predictability.
pub fn verify_replication_table<P: Payoff + ?Sized>(
    crr: &CrrMarket,
    table: &PathwiseQuantities,
    payoff: &P,
    maturity: usize,
    tolerance: f64,
) -> Result<ReplicationReport> {
    if table.horizon() != crr.horizon() {
        return Err(Error::HorizonMismatch {
            left: table.horizon(),
            right: crr.horizon(),
        });
    }
    let market = crr.market();
    let held: Vec<&str> = table
        .assets()
        .filter(|a| {
            (1..=table.horizon()).any(|n| {
                (0..BinaryLattice::width(table.horizon())).any(|k| table.quantity(a, n, k) != 0.0)
            })
        })
        .collect();
    check_stock_support(market, held.into_iter())?;
    if table.is_trading_strategy() {
        let p = Portfolio::new(market, table.to_quantity_process()?)?;
        return verify_replication(crr, &p, payoff, maturity, tolerance);
    }

    let horizon = table.horizon();
    let payoffs = terminal_payoffs(crr, payoff, maturity)?;
    let paths = BinaryLattice::width(horizon);
    let max_terminal_error = (0..paths)
        .map(|k| {
            let payoff = payoffs[k >> (horizon - maturity)];
            (table.closing_along(market, maturity, k) - payoff).abs()
        })
        .fold(0.0, f64::max);
    let gap = (1..horizon)
        .flat_map(|n| (0..paths).map(move |k| (n, k)))
        .map(|(n, k)| (table.value_along(market, n, k) - table.closing_along(market, n, k)).abs())
        .fold(0.0, f64::max);
    Ok(ReplicationReport {
        self_financing: gap <= tolerance,
        trading_strategy: false,
        max_terminal_error,
        init_value: table.value_along(market, 0, 0),
        self_financing_gap: gap,
        tolerance,
    })
}

/// Largest one-step residual `|X_n - E[X_{n+1} | F_n]|` over all nodes with `n < horizon`.
pub fn martingale_residual(m: &PathMeasure, x: &LatticeProcess, horizon: usize) -> Result<f64> {
    if horizon > x.horizon() {
        return Err(Error::TimeOutOfRange {
            time: horizon,
            horizon: x.horizon(),
        });
    }
    Ok((0..horizon)
        .flat_map(|n| (0..BinaryLattice::width(n)).map(move |k| (n, k)))
        .map(|(n, k)| (x.at(n, k) - step_at(m, x, n, k)).abs())
        .fold(0.0, f64::max))
}

/// One-step martingale check; the multi-step property follows by the tower rule.
pub fn is_martingale(m: &PathMeasure, x: &LatticeProcess, horizon: usize) -> bool {
    martingale_residual(m, x, horizon).is_ok_and(|res| res <= DEFAULT_TOLERANCE)
}

/// Every discounted stock price is a martingale under `m`.
pub fn is_risk_neutral(crr: &CrrMarket, m: &PathMeasure) -> bool {
    let r = crr.params().r;
    crr.market().stocks().all(|a| {
        let prices = crr.market().prices(&a.id).expect("stock is priced");
        discounted_value(r, prices).is_ok_and(|x| is_martingale(m, &x, crr.horizon()))
    })
}

/// Discounted closing value of a portfolio; a martingale under the risk-neutral
/// measure whenever the portfolio is a self-financing stock strategy.
pub fn discounted_closing_value(crr: &CrrMarket, p: &Portfolio) -> Result<LatticeProcess> {
    discounted_value(crr.params().r, &closing_value_lattice(crr.market(), p))
}

/// First clause of the arbitrage definition that a portfolio fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArbitrageClause {
    InitNonzero,
    NotSelfFinancing,
    NotPredictable,
    NegativeClosingValue,
    NoStrictGain,
    None,
}

impl fmt::Display for ArbitrageClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::InitNonzero => "init-nonzero",
            Self::NotSelfFinancing => "not-self-financing",
            Self::NotPredictable => "not-predictable",
            Self::NegativeClosingValue => "negative-closing-value",
            Self::NoStrictGain => "no-strict-gain",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArbitrageVerdict {
    pub is_arbitrage: bool,
    /// First time at which the closing value is nonnegative everywhere and
    /// positive somewhere.
    pub witness_time: Option<usize>,
    pub violated_clause: ArbitrageClause,
}

impl ArbitrageVerdict {
    fn violated(clause: ArbitrageClause) -> Self {
        Self {
            is_arbitrage: false,
            witness_time: None,
            violated_clause: clause,
        }
    }
}

/// Numerical slack for the zero-initial-value and sign clauses.
pub const ARBITRAGE_TOLERANCE: f64 = 1e-9;

/// Decides whether `p` is an arbitrage under `m`: a self-financing trading
/// strategy with zero initial value whose closing value at some time up to the
/// horizon is nonnegative on every positive-probability path and positive on at
/// least one.
pub fn is_arbitrage_process(market: &Market, m: &PathMeasure, p: &Portfolio) -> ArbitrageVerdict {
    if !p.quantities().is_trading_strategy() {
        return ArbitrageVerdict::violated(ArbitrageClause::NotPredictable);
    }
    if init_value(market, p).abs() > ARBITRAGE_TOLERANCE {
        return ArbitrageVerdict::violated(ArbitrageClause::InitNonzero);
    }
    if self_financing_gap(market, p) > ARBITRAGE_TOLERANCE {
        return ArbitrageVerdict::violated(ArbitrageClause::NotSelfFinancing);
    }
    let closing = closing_value_lattice(market, p);
    let mut nonnegative_somewhere = false;
    for n in 1..=market.horizon() {
        let weights = m.level_weights(n);
        let relevant = || {
            closing
                .level(n)
                .iter()
                .zip(&weights)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&x, _)| x)
        };
        if relevant().all(|x| x >= -ARBITRAGE_TOLERANCE) {
            nonnegative_somewhere = true;
            if relevant().any(|x| x > ARBITRAGE_TOLERANCE) {
                return ArbitrageVerdict {
                    is_arbitrage: true,
                    witness_time: Some(n),
                    violated_clause: ArbitrageClause::None,
                };
            }
        }
    }
    ArbitrageVerdict::violated(if nonnegative_somewhere {
        ArbitrageClause::NoStrictGain
    } else {
        ArbitrageClause::NegativeClosingValue
    })
}

/// [`is_arbitrage_process`] for a per-path quantity table.
pub fn is_arbitrage_table(
    market: &Market,
    m: &PathMeasure,
    table: &PathwiseQuantities,
) -> Result<ArbitrageVerdict> {
    if !table.is_trading_strategy() {
        return Ok(ArbitrageVerdict::violated(ArbitrageClause::NotPredictable));
    }
    let p = Portfolio::new(market, table.to_quantity_process()?)?;
    Ok(is_arbitrage_process(market, m, &p))
}

/// Explicit arbitrage in an inviable market. If `1 + r <= d` the stock beats
/// the bond in every state: buy one share with `v` borrowed at the risk-free
/// rate. If `u <= 1 + r` do the reverse.
pub fn construct_arbitrage(crr: &CrrMarket) -> Result<Portfolio> {
    if crr.is_viable() {
        return Err(Error::MarketViable);
    }
    let params = crr.params();
    let stock_side = if 1.0 + params.r <= params.d {
        1.0
    } else {
        -1.0
    };
    let horizon = crr.horizon();
    let risky = PredictableProcess::constant(horizon, stock_side)?;
    let bond = PredictableProcess::constant(horizon, -stock_side * params.v)?;
    Portfolio::new(
        crr.market(),
        qty_sum(&qty_single(RISKY, risky), &qty_single(RISK_FREE, bond))?,
    )
}

/// At every node the two one-step gross returns of the risky asset straddle
/// the risk-free growth strictly.
pub fn one_step_no_arbitrage_check(crr: &CrrMarket) -> bool {
    let s = crr.risky_prices();
    let growth = 1.0 + crr.params().r;
    (0..crr.horizon()).all(|n| {
        (0..BinaryLattice::width(n)).all(|k| {
            let funded = growth * s.at(n, k);
            s.at(n + 1, 2 * k + 1) < funded && funded < s.at(n + 1, 2 * k)
        })
    })
}
