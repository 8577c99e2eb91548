//! The Cox-Ross-Rubinstein market: a risky asset following a geometric random
//! walk and a risk-free asset growing at a constant per-period rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeProcess, TossPath, MAX_HORIZON};
use crate::market::{Asset, Market};

pub const RISKY: &str = "S";
pub const RISK_FREE: &str = "R";
/// Non-stock slot that every CRR market carries for derivative products.
pub const DERIVATIVE_SLOT: &str = "X";

/// Model parameters: up and down factors, initial risky price, per-period
/// risk-free rate and physical up-probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrrParams {
    pub u: f64,
    pub d: f64,
    pub v: f64,
    pub r: f64,
    pub p: f64,
}

impl CrrParams {
    pub fn new(u: f64, d: f64, v: f64, r: f64, p: f64) -> Result<Self> {
        let params = Self { u, d, v, r, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        let all_finite = [self.u, self.d, self.v, self.r, self.p]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite {
            return fail("all parameters must be finite numbers");
        }
        if self.d <= 0.0 {
            return fail("requires 0 < d");
        }
        if self.d >= self.u {
            return fail("requires d < u");
        }
        if self.v <= 0.0 {
            return fail("requires 0 < v");
        }
        if self.r <= -1.0 {
            return fail("requires -1 < r");
        }
        if !(0.0 < self.p && self.p < 1.0) {
            return fail("requires 0 < p < 1");
        }
        Ok(())
    }
}

/// Serialized market configuration: the model parameters plus the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub u: f64,
    pub d: f64,
    pub v: f64,
    pub r: f64,
    pub p: f64,
    pub horizon: usize,
}

impl MarketConfig {
    pub fn params(&self) -> CrrParams {
        CrrParams {
            u: self.u,
            d: self.d,
            v: self.v,
            r: self.r,
            p: self.p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if self.horizon == 0 {
            return Err(Error::InvalidParams("requires horizon >= 1".into()));
        }
        if self.horizon > MAX_HORIZON {
            return Err(Error::InvalidParams(format!(
                "requires horizon <= {MAX_HORIZON}"
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParams(format!("malformed config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn market(&self) -> Result<CrrMarket> {
        self.validate()?;
        CrrMarket::new(self.params(), self.horizon)
    }
}

/// `v * prod_{i<n} (u if toss i is up else d)`.
pub fn geom_rand_walk(params: &CrrParams, n: usize, scenario: &TossPath) -> f64 {
    scenario.outcomes()[..n]
        .iter()
        .fold(params.v, |s, &up| s * if up { params.u } else { params.d })
}

fn check_rate(r: f64) -> Result<()> {
    if r.is_nan() || r <= -1.0 {
        return Err(Error::InvalidParams(format!("rate {r} must exceed -1")));
    }
    Ok(())
}

/// Risk-free price `(1 + r)^n`.
pub fn disc_rfr_proc(r: f64, n: usize) -> Result<f64> {
    check_rate(r)?;
    Ok((0..n).fold(1.0, |acc, _| acc * (1.0 + r)))
}

/// `(1 + r)^-n`.
pub fn discount_factor(r: f64, n: usize) -> Result<f64> {
    Ok(1.0 / disc_rfr_proc(r, n)?)
}

pub fn discounted_value(r: f64, x: &LatticeProcess) -> Result<LatticeProcess> {
    let factors = (0..=x.horizon())
        .map(|n| discount_factor(r, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(x.map(|n, value| factors[n] * value))
}

/// No arbitrage among stock portfolios iff `d < 1 + r < u`. Strict, no tolerance.
pub fn is_viable(params: &CrrParams) -> bool {
    let growth = 1.0 + params.r;
    params.d < growth && growth < params.u
}

/// The up-probability of the unique risk-neutral Bernoulli measure.
pub fn risk_neutral_q(params: &CrrParams) -> Result<f64> {
    if !is_viable(params) {
        return Err(Error::NotViable);
    }
    Ok((1.0 + params.r - params.d) / (params.u - params.d))
}

/// Per-step rate `r` with `(1 + r)^steps = 1 + annual`.
pub fn step_rate_from_annual(annual: f64, steps_per_year: u32) -> Result<f64> {
    check_rate(annual)?;
    if steps_per_year == 0 {
        return Err(Error::InvalidParams(
            "steps per year must be at least 1".into(),
        ));
    }
    if steps_per_year == 1 {
        return Ok(annual);
    }
    Ok((annual.ln_1p() / f64::from(steps_per_year)).exp_m1())
}

/// Whether the Bernoulli(p) and Bernoulli(q) measures on `horizon` tosses have
/// the same null events.
pub fn filtration_equivalent_bernoulli(p: f64, q: f64, horizon: usize) -> bool {
    if horizon == 0 {
        return true;
    }
    let interior = |x: f64| 0.0 < x && x < 1.0;
    (interior(p) && interior(q)) || (p == q && (p == 0.0 || p == 1.0))
}

/// A CRR market over a finite horizon, with stocks `S` (risky) and `R`
/// (risk-free) and a non-stock slot `X`.
#[derive(Debug, Clone)]
pub struct CrrMarket {
    params: CrrParams,
    horizon: usize,
    market: Market,
}

impl CrrMarket {
    pub fn new(params: CrrParams, horizon: usize) -> Result<Self> {
        params.validate()?;
        let risky = LatticeProcess::from_fn(horizon, |n, w| geom_rand_walk(&params, n, w))?;
        let growth = (0..=horizon)
            .map(|n| disc_rfr_proc(params.r, n))
            .collect::<Result<Vec<_>>>()?;
        let risk_free = LatticeProcess::from_fn(horizon, |n, _| growth[n])?;
        let slot = LatticeProcess::constant(horizon, 0.0)?;
        let market = Market::new(
            horizon,
            vec![
                (Asset::stock(RISKY), risky),
                (Asset::stock(RISK_FREE), risk_free),
                (Asset::extra(DERIVATIVE_SLOT), slot),
            ],
        )?;
        Ok(Self {
            params,
            horizon,
            market,
        })
    }

    pub fn params(&self) -> &CrrParams {
        &self.params
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn risky_prices(&self) -> &LatticeProcess {
        self.market.prices(RISKY).expect("risky asset is present")
    }

    pub fn risk_free_prices(&self) -> &LatticeProcess {
        self.market
            .prices(RISK_FREE)
            .expect("risk-free asset is present")
    }

    pub fn is_viable(&self) -> bool {
        is_viable(&self.params)
    }

    pub fn risk_neutral_q(&self) -> Result<f64> {
        risk_neutral_q(&self.params)
    }
}
