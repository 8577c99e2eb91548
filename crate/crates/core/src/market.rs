//! Discrete market structure and portfolio algebra.
//!
//! A quantity process assigns to each asset a *predictable* process: the
//! quantity held over the interval `]n-1, n]` is chosen with the information
//! available at time `n-1`, so it is keyed by the first `n-1` tosses. Times run
//! from `1` to the horizon; the time-0 quantity is never stored.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::lattice::{index_of, BinaryLattice, LatticeProcess, TossPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AssetKind {
    Stock,
    /// A non-stock slot, e.g. a derivative product.
    Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Asset {
    pub id: String,
    pub kind: AssetKind,
}

impl Asset {
    pub fn stock(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: AssetKind::Stock,
        }
    }

    pub fn extra(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: AssetKind::Extra,
        }
    }
}

/// Assets with their adapted price processes over a common horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    horizon: usize,
    assets: BTreeMap<String, (Asset, LatticeProcess)>,
}

impl Market {
    pub fn new(horizon: usize, priced: Vec<(Asset, LatticeProcess)>) -> Result<Self> {
        BinaryLattice::new(horizon)?;
        let mut assets = BTreeMap::new();
        for (asset, prices) in priced {
            if prices.horizon() != horizon {
                return Err(Error::InvalidMarket(format!(
                    "price process of `{}` has horizon {}, market horizon is {horizon}",
                    asset.id,
                    prices.horizon()
                )));
            }
            let id = asset.id.clone();
            if assets.insert(id.clone(), (asset, prices)).is_some() {
                return Err(Error::InvalidMarket(format!("duplicate asset id `{id}`")));
            }
        }
        if assets.values().all(|(a, _)| a.kind == AssetKind::Stock) {
            return Err(Error::InvalidMarket(
                "every asset is a stock; at least one non-stock slot is required".into(),
            ));
        }
        Ok(Self { horizon, assets })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn assets(&self) -> impl Iterator<Item = &Asset> {
        self.assets.values().map(|(a, _)| a)
    }

    pub fn stocks(&self) -> impl Iterator<Item = &Asset> {
        self.assets().filter(|a| a.kind == AssetKind::Stock)
    }

    pub fn asset(&self, id: &str) -> Option<&Asset> {
        self.assets.get(id).map(|(a, _)| a)
    }

    pub fn is_stock(&self, id: &str) -> bool {
        self.asset(id).is_some_and(|a| a.kind == AssetKind::Stock)
    }

    pub fn prices(&self, id: &str) -> Result<&LatticeProcess> {
        self.assets
            .get(id)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::UnknownAsset(id.to_string()))
    }
}

/// A process defined for times `1..=horizon` whose value at time `n` depends
/// on the first `n - 1` tosses only.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictableProcess {
    // levels[n - 1] holds the 2^(n-1) values for time n
    levels: Vec<Vec<f64>>,
}

impl PredictableProcess {
    pub fn from_fn(horizon: usize, mut f: impl FnMut(usize, &TossPath) -> f64) -> Result<Self> {
        let lattice = BinaryLattice::new(horizon)?;
        let levels = (1..=horizon)
            .map(|n| lattice.paths(n - 1).map(|w| f(n, &w)).collect())
            .collect();
        Ok(Self { levels })
    }

    pub fn constant(horizon: usize, value: f64) -> Result<Self> {
        Self::from_fn(horizon, |_, _| value)
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    /// Value at time `n` given the first `n - 1` tosses of `scenario`.
    pub fn along(&self, n: usize, scenario: &TossPath) -> Result<f64> {
        if n == 0 || n > self.horizon() {
            return Err(Error::TimeOutOfRange {
                time: n,
                horizon: self.horizon(),
            });
        }
        if scenario.len() + 1 < n {
            return Err(Error::PrefixLength {
                expected: n - 1,
                found: scenario.len(),
            });
        }
        Ok(self.levels[n - 1][index_of(&scenario.outcomes()[..n - 1])])
    }

    /// Value at time `n` on node `index` of time `n - 1`.
    pub fn at(&self, n: usize, index: usize) -> f64 {
        self.levels[n - 1][index]
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    fn is_zero(&self) -> bool {
        self.levels.iter().flatten().all(|&x| x == 0.0)
    }
}

/// Per-asset predictable quantities. Assets without an entry hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantityProcess {
    horizon: usize,
    quantities: BTreeMap<String, PredictableProcess>,
}

impl QuantityProcess {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Quantity of `asset` held over `]n-1, n]` in `scenario`.
    pub fn quantity(&self, asset: &str, n: usize, scenario: &TossPath) -> Result<f64> {
        match self.quantities.get(asset) {
            Some(q) => q.along(n, scenario),
            None if n >= 1 && n <= self.horizon => Ok(0.0),
            None => Err(Error::TimeOutOfRange {
                time: n,
                horizon: self.horizon,
            }),
        }
    }

    /// Assets with a stored (possibly zero) process.
    pub fn assets(&self) -> impl Iterator<Item = (&str, &PredictableProcess)> {
        self.quantities.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn check_horizon(&self, other_horizon: usize) -> Result<()> {
        if self.horizon != other_horizon {
            return Err(Error::HorizonMismatch {
                left: self.horizon,
                right: other_horizon,
            });
        }
        Ok(())
    }

    /// `true`: predictability holds by construction. Quantities loaded from
    /// per-path tables are checked by [`PathwiseQuantities::is_trading_strategy`].
    pub fn is_trading_strategy(&self) -> bool {
        true
    }
}

pub fn qty_empty(horizon: usize) -> QuantityProcess {
    QuantityProcess {
        horizon,
        quantities: BTreeMap::new(),
    }
}

pub fn qty_single(asset: &str, process: PredictableProcess) -> QuantityProcess {
    QuantityProcess {
        horizon: process.horizon(),
        quantities: BTreeMap::from([(asset.to_string(), process)]),
    }
}

pub fn qty_sum(q1: &QuantityProcess, q2: &QuantityProcess) -> Result<QuantityProcess> {
    q1.check_horizon(q2.horizon)?;
    let mut quantities = q1.quantities.clone();
    for (asset, process) in &q2.quantities {
        let summed = match quantities.get(asset) {
            Some(existing) => existing.zip_with(process, |a, b| a + b),
            None => process.clone(),
        };
        quantities.insert(asset.clone(), summed);
    }
    Ok(QuantityProcess {
        horizon: q1.horizon,
        quantities,
    })
}

/// Scales every quantity pointwise by a predictable process.
pub fn qty_mult_comp(q: &QuantityProcess, factor: &PredictableProcess) -> Result<QuantityProcess> {
    q.check_horizon(factor.horizon())?;
    Ok(QuantityProcess {
        horizon: q.horizon,
        quantities: q
            .quantities
            .iter()
            .map(|(a, p)| (a.clone(), p.zip_with(factor, |x, y| x * y)))
            .collect(),
    })
}

pub fn qty_rem_comp(q: &QuantityProcess, asset: &str) -> QuantityProcess {
    let mut quantities = q.quantities.clone();
    quantities.remove(asset);
    QuantityProcess {
        horizon: q.horizon,
        quantities,
    }
}

/// Assets held in a nonzero quantity at some node.
pub fn support_set(q: &QuantityProcess) -> BTreeSet<String> {
    q.quantities
        .iter()
        .filter(|(_, p)| !p.is_zero())
        .map(|(a, _)| a.clone())
        .collect()
}

/// A quantity process whose support lies within a market's assets.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    quantities: QuantityProcess,
}

impl Portfolio {
    pub fn new(market: &Market, quantities: QuantityProcess) -> Result<Self> {
        quantities.check_horizon(market.horizon())?;
        if let Some(unknown) = support_set(&quantities)
            .into_iter()
            .find(|a| market.asset(a).is_none())
        {
            return Err(Error::UnknownAsset(unknown));
        }
        Ok(Self { quantities })
    }

    pub fn quantities(&self) -> &QuantityProcess {
        &self.quantities
    }

    pub fn into_quantities(self) -> QuantityProcess {
        self.quantities
    }

    pub fn support(&self) -> BTreeSet<String> {
        support_set(&self.quantities)
    }

    pub fn horizon(&self) -> usize {
        self.quantities.horizon
    }
}

fn check_node(horizon: usize, n: usize, scenario: &TossPath) -> Result<usize> {
    if n > horizon {
        return Err(Error::TimeOutOfRange { time: n, horizon });
    }
    if scenario.len() < n {
        return Err(Error::PrefixLength {
            expected: n,
            found: scenario.len(),
        });
    }
    Ok(index_of(&scenario.outcomes()[..n]))
}

/// Sum over the support of `price(n) * quantity(held)`, with prices at node
/// `index` of time `n` and quantities for time `held` on the same node.
fn priced_holdings(mkt: &Market, p: &Portfolio, n: usize, held: usize, index: usize) -> f64 {
    // quantities for time `held` are keyed by the first held-1 tosses
    let q_index = index >> (n + 1 - held);
    p.quantities
        .quantities
        .iter()
        .map(|(a, q)| {
            let price = mkt.prices(a).map_or(0.0, |pr| pr.at(n, index));
            price * q.at(held, q_index)
        })
        .sum()
}

pub(crate) fn value_at(mkt: &Market, p: &Portfolio, n: usize, index: usize) -> f64 {
    if n == mkt.horizon() {
        closing_at(mkt, p, n, index)
    } else {
        priced_holdings(mkt, p, n, n + 1, index)
    }
}

pub(crate) fn closing_at(mkt: &Market, p: &Portfolio, n: usize, index: usize) -> f64 {
    if n == 0 {
        if mkt.horizon() == 0 {
            return 0.0;
        }
        value_at(mkt, p, 0, index)
    } else {
        priced_holdings(mkt, p, n, n, index)
    }
}

/// Cash needed at time `n` to set up the positions held over `]n, n+1]`.
/// At the horizon there is no further rebalancing and the value equals the
/// closing value.
pub fn value_process(mkt: &Market, p: &Portfolio, n: usize, scenario: &TossPath) -> Result<f64> {
    let index = check_node(mkt.horizon(), n, scenario)?;
    Ok(value_at(mkt, p, n, index))
}

/// Cash obtained by liquidating the positions held over `]n-1, n]` at time-`n`
/// prices. At time 0 this is the value process.
pub fn closing_value_process(
    mkt: &Market,
    p: &Portfolio,
    n: usize,
    scenario: &TossPath,
) -> Result<f64> {
    let index = check_node(mkt.horizon(), n, scenario)?;
    Ok(closing_at(mkt, p, n, index))
}

/// The value process at every node.
pub fn value_lattice(mkt: &Market, p: &Portfolio) -> LatticeProcess {
    LatticeProcess::from_fn(mkt.horizon(), |n, w| value_at(mkt, p, n, w.index()))
        .expect("market horizon is within the lattice limit")
}

/// The closing-value process at every node.
pub fn closing_value_lattice(mkt: &Market, p: &Portfolio) -> LatticeProcess {
    LatticeProcess::from_fn(mkt.horizon(), |n, w| closing_at(mkt, p, n, w.index()))
        .expect("market horizon is within the lattice limit")
}

/// Largest `|value(n) - closing(n)|` over all nodes with `1 <= n < horizon`.
pub fn self_financing_gap(mkt: &Market, p: &Portfolio) -> f64 {
    (1..mkt.horizon())
        .flat_map(|n| (0..BinaryLattice::width(n)).map(move |k| (n, k)))
        .map(|(n, k)| (value_at(mkt, p, n, k) - closing_at(mkt, p, n, k)).abs())
        .fold(0.0, f64::max)
}

pub const SELF_FINANCING_TOLERANCE: f64 = 1e-9;

pub fn is_self_financing(mkt: &Market, p: &Portfolio) -> bool {
    self_financing_gap(mkt, p) <= SELF_FINANCING_TOLERANCE
}

/// Value at time 0; a single number because time 0 has a single node.
pub fn init_value(mkt: &Market, p: &Portfolio) -> f64 {
    value_at(mkt, p, 0, 0)
}

/// Rebalances `funding` so that `p` becomes self-financing with initial value
/// `v0`. Every other asset keeps its quantities.
pub fn make_self_financing(
    mkt: &Market,
    p: &Portfolio,
    funding: &str,
    v0: f64,
) -> Result<Portfolio> {
    let funding_prices = mkt.prices(funding)?;
    for (n, w, price) in funding_prices.nodes() {
        if price == 0.0 {
            return Err(Error::ZeroFundingPrice {
                asset: funding.to_string(),
                time: n,
                prefix: w.to_string(),
            });
        }
    }
    let horizon = mkt.horizon();
    let others = Portfolio {
        quantities: qty_rem_comp(&p.quantities, funding),
    };

    // funding quantity for time n+1 is fixed at each time-n node, forward in time
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    for n in 0..horizon {
        let level = (0..BinaryLattice::width(n))
            .map(|k| {
                let target = if n == 0 {
                    v0
                } else {
                    let held = levels[n - 1][k >> 1];
                    priced_holdings(mkt, &others, n, n, k) + funding_prices.at(n, k) * held
                };
                let rest = priced_holdings(mkt, &others, n, n + 1, k);
                (target - rest) / funding_prices.at(n, k)
            })
            .collect();
        levels.push(level);
    }
    let funding_qty = PredictableProcess { levels };
    Ok(Portfolio {
        quantities: qty_sum(&others.quantities, &qty_single(funding, funding_qty))?,
    })
}

/// Quantities given per full scenario: for each asset and time `n`, one value
/// per length-`horizon` path. This is the shape of externally supplied tables,
/// which need not be predictable.
#[derive(Debug, Clone, PartialEq)]
pub struct PathwiseQuantities {
    horizon: usize,
    // asset -> time n (index n-1) -> full path index
    quantities: BTreeMap<String, Vec<Vec<f64>>>,
}

impl PathwiseQuantities {
    pub fn new(horizon: usize) -> Result<Self> {
        BinaryLattice::new(horizon)?;
        Ok(Self {
            horizon,
            quantities: BTreeMap::new(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Sets the quantity of `asset` at time `n` on every full path extending `prefix`.
    pub fn set(&mut self, asset: &str, n: usize, prefix: &TossPath, quantity: f64) -> Result<()> {
        if n == 0 || n > self.horizon {
            return Err(Error::TimeOutOfRange {
                time: n,
                horizon: self.horizon,
            });
        }
        if prefix.len() > self.horizon {
            return Err(Error::PrefixLength {
                expected: self.horizon,
                found: prefix.len(),
            });
        }
        let width = BinaryLattice::width(self.horizon);
        let levels = self
            .quantities
            .entry(asset.to_string())
            .or_insert_with(|| vec![vec![0.0; width]; self.horizon]);
        let block = 1usize << (self.horizon - prefix.len());
        let start = prefix.index() * block;
        levels[n - 1][start..start + block].fill(quantity);
        Ok(())
    }

    pub fn quantity(&self, asset: &str, n: usize, path_index: usize) -> f64 {
        self.quantities
            .get(asset)
            .map_or(0.0, |levels| levels[n - 1][path_index])
    }

    pub fn assets(&self) -> impl Iterator<Item = &str> {
        self.quantities.keys().map(String::as_str)
    }

    /// First asset and time whose quantity is not determined by the tosses
    /// before that time.
    pub fn predictability_violation(&self) -> Option<(String, usize)> {
        for (asset, levels) in &self.quantities {
            for (i, level) in levels.iter().enumerate() {
                let n = i + 1;
                let block = 1usize << (self.horizon - (n - 1));
                if level.chunks(block).any(|c| c.iter().any(|&x| x != c[0])) {
                    return Some((asset.clone(), n));
                }
            }
        }
        None
    }

    /// Each quantity over `]n-1, n]` is constant across paths sharing their first `n-1` tosses.
    pub fn is_trading_strategy(&self) -> bool {
        self.predictability_violation().is_none()
    }

    pub fn to_quantity_process(&self) -> Result<QuantityProcess> {
        if let Some((asset, time)) = self.predictability_violation() {
            return Err(Error::NotPredictable { asset, time });
        }
        let quantities = self
            .quantities
            .iter()
            .map(|(asset, levels)| {
                let levels = levels
                    .iter()
                    .enumerate()
                    .map(|(i, level)| {
                        let block = 1usize << (self.horizon - i);
                        level.iter().step_by(block).copied().collect()
                    })
                    .collect();
                (asset.clone(), PredictableProcess { levels })
            })
            .collect();
        Ok(QuantityProcess {
            horizon: self.horizon,
            quantities,
        })
    }

    pub fn from_quantity_process(q: &QuantityProcess) -> Result<Self> {
        let mut table = Self::new(q.horizon)?;
        let lattice = BinaryLattice::new(q.horizon)?;
        for (asset, process) in &q.quantities {
            for n in 1..=q.horizon {
                for w in lattice.paths(n - 1) {
                    table.set(asset, n, &w, process.at(n, w.index()))?;
                }
            }
        }
        Ok(table)
    }

    fn holdings(&self, mkt: &Market, n: usize, held: usize, path: usize) -> f64 {
        let node = path >> (self.horizon - n);
        self.quantities
            .keys()
            .map(|a| {
                let price = mkt.prices(a).map_or(0.0, |pr| pr.at(n, node));
                price * self.quantity(a, held, path)
            })
            .sum()
    }

    /// Value process along a full path; same conventions as [`value_process`].
    pub fn value_along(&self, mkt: &Market, n: usize, path: usize) -> f64 {
        if n == self.horizon {
            self.closing_along(mkt, n, path)
        } else {
            self.holdings(mkt, n, n + 1, path)
        }
    }

    /// Closing-value process along a full path.
    pub fn closing_along(&self, mkt: &Market, n: usize, path: usize) -> f64 {
        if n == 0 {
            if self.horizon == 0 {
                0.0
            } else {
                self.value_along(mkt, 0, path)
            }
        } else {
            self.holdings(mkt, n, n, path)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Deterministic prices given per time; the last entry repeats up to the horizon.
    fn deterministic(horizon: usize, by_time: &[f64]) -> LatticeProcess {
        LatticeProcess::from_fn(horizon, |n, _| by_time[n.min(by_time.len() - 1)]).unwrap()
    }

    fn example_market() -> Market {
        let h = 4;
        Market::new(
            h,
            vec![
                (
                    Asset::stock("Apl"),
                    deterministic(h, &[100.0, 98.0, 96.0, 98.0]),
                ),
                (
                    Asset::stock("Goog"),
                    deterministic(h, &[90.0, 92.0, 98.0, 95.5]),
                ),
                (Asset::stock("Fbk"), deterministic(h, &[5.0, 4.0, 4.0, 5.0])),
                (Asset::extra("Opt"), deterministic(h, &[0.0])),
            ],
        )
        .unwrap()
    }

    fn p1(horizon: usize) -> QuantityProcess {
        qty_sum(
            &qty_single(
                "Apl",
                PredictableProcess::from_fn(horizon, |n, _| n as f64).unwrap(),
            ),
            &qty_single(
                "Goog",
                PredictableProcess::from_fn(horizon, |n, _| -(n as f64)).unwrap(),
            ),
        )
        .unwrap()
    }

    fn row(f: impl Fn(usize, &TossPath) -> f64, times: std::ops::Range<usize>) -> Vec<f64> {
        let w = TossPath::new(vec![true; 4]);
        times.map(|n| f(n, &w)).collect()
    }

    #[test]
    fn example_quantity_ladder() {
        let q = p1(4);
        let w = TossPath::new(vec![false; 4]);
        let apl: Vec<f64> = (1..=4).map(|n| q.quantity("Apl", n, &w).unwrap()).collect();
        let goog: Vec<f64> = (1..=4)
            .map(|n| q.quantity("Goog", n, &w).unwrap())
            .collect();
        assert_eq!(apl, [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(goog, [-1.0, -2.0, -3.0, -4.0]);
        assert_eq!(
            support_set(&q),
            BTreeSet::from(["Apl".into(), "Goog".into()])
        );
    }

    #[test]
    fn example_value_and_closing_rows() {
        let mkt = example_market();
        let p = Portfolio::new(&mkt, p1(4)).unwrap();
        let values = row(|n, w| value_process(&mkt, &p, n, w).unwrap(), 0..4);
        let closing = row(|n, w| closing_value_process(&mkt, &p, n, w).unwrap(), 0..4);
        assert_eq!(values, [10.0, 12.0, -6.0, 10.0]);
        assert_eq!(closing, [10.0, 6.0, -4.0, 7.5]);
        assert!(!is_self_financing(&mkt, &p));
        assert_eq!(init_value(&mkt, &p), 10.0);
    }

    #[test]
    fn example_self_financed_variant() {
        let mkt = example_market();
        let p = Portfolio::new(&mkt, p1(4)).unwrap();
        let p2 = make_self_financing(&mkt, &p, "Fbk", 0.0).unwrap();
        let fbk = row(|n, w| p2.quantities().quantity("Fbk", n, w).unwrap(), 1..5);
        for (got, want) in fbk.iter().zip([-2.0, -3.5, -3.0, -3.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let values = row(|n, w| value_process(&mkt, &p2, n, w).unwrap(), 0..4);
        let closing = row(|n, w| closing_value_process(&mkt, &p2, n, w).unwrap(), 0..4);
        for (v, c, want) in itertools_zip3(&values, &closing, &[0.0, -2.0, -18.0, -7.5]) {
            assert_abs_diff_eq!(v, want, epsilon = 1e-12);
            assert_abs_diff_eq!(c, want, epsilon = 1e-12);
        }
        assert!(is_self_financing(&mkt, &p2));
        assert_eq!(init_value(&mkt, &p2), 0.0);
        // other assets untouched
        for n in 1..=4 {
            let w = TossPath::new(vec![true, false, true, false]);
            assert_eq!(
                p2.quantities().quantity("Apl", n, &w).unwrap(),
                p.quantities().quantity("Apl", n, &w).unwrap()
            );
        }
    }

    fn itertools_zip3<'a>(
        a: &'a [f64],
        b: &'a [f64],
        c: &'a [f64],
    ) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
        a.iter().zip(b).zip(c).map(|((x, y), z)| (*x, *y, *z))
    }

    #[test]
    fn empty_portfolio() {
        let mkt = example_market();
        let p = Portfolio::new(&mkt, qty_empty(4)).unwrap();
        assert!(support_set(p.quantities()).is_empty());
        assert!(is_self_financing(&mkt, &p));
        assert_eq!(init_value(&mkt, &p), 0.0);
        assert!(value_lattice(&mkt, &p)
            .levels()
            .iter()
            .flatten()
            .all(|&x| x == 0.0));
        assert_eq!(qty_sum(&qty_empty(4), &p1(4)).unwrap(), p1(4));
    }

    #[test]
    fn single_and_removal() {
        let zero = qty_single("Apl", PredictableProcess::constant(4, 0.0).unwrap());
        assert!(support_set(&zero).is_empty());
        let single = qty_single("Apl", PredictableProcess::constant(4, 2.0).unwrap());
        assert_eq!(support_set(&single), BTreeSet::from(["Apl".into()]));
        let w = TossPath::new(vec![true; 4]);
        assert_eq!(single.quantity("Goog", 3, &w).unwrap(), 0.0);
        assert!(support_set(&qty_rem_comp(&single, "Apl")).is_empty());

        let only_apl = qty_rem_comp(&p1(4), "Goog");
        assert_eq!(support_set(&only_apl), BTreeSet::from(["Apl".into()]));
        let apl: Vec<f64> = (1..=4)
            .map(|n| only_apl.quantity("Apl", n, &w).unwrap())
            .collect();
        assert_eq!(apl, [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn multiplication_by_predictable_factor() {
        let q = p1(4);
        let w = TossPath::new(vec![false; 4]);
        let doubled = qty_mult_comp(&q, &PredictableProcess::constant(4, 2.0).unwrap()).unwrap();
        for n in 1..=4 {
            assert_eq!(doubled.quantity("Apl", n, &w).unwrap(), 2.0 * n as f64);
            assert_eq!(doubled.quantity("Goog", n, &w).unwrap(), -2.0 * n as f64);
        }
        assert_eq!(
            qty_mult_comp(&q, &PredictableProcess::constant(4, 1.0).unwrap()).unwrap(),
            q
        );
        let zeroed = qty_mult_comp(&q, &PredictableProcess::constant(4, 0.0).unwrap()).unwrap();
        assert!(support_set(&zeroed).is_empty());
        assert!(qty_mult_comp(&q, &PredictableProcess::constant(3, 1.0).unwrap()).is_err());
        assert!(qty_sum(&q, &qty_empty(3)).is_err());
    }

    #[test]
    fn constant_composition_closing_equals_value() {
        let mkt = example_market();
        let q = qty_single("Apl", PredictableProcess::constant(4, 3.0).unwrap());
        let p = Portfolio::new(&mkt, q).unwrap();
        let values = value_lattice(&mkt, &p);
        let closing = closing_value_lattice(&mkt, &p);
        assert_eq!(values, closing);
        assert!(is_self_financing(&mkt, &p));
    }

    #[test]
    fn funding_with_zero_price_is_rejected() {
        let mkt = example_market();
        let p = Portfolio::new(&mkt, p1(4)).unwrap();
        assert!(matches!(
            make_self_financing(&mkt, &p, "Opt", 0.0),
            Err(Error::ZeroFundingPrice { .. })
        ));
        assert!(make_self_financing(&mkt, &p, "Nope", 0.0).is_err());
    }

    #[test]
    fn market_validation() {
        let h = 2;
        let s = || deterministic(h, &[1.0]);
        assert!(Market::new(h, vec![(Asset::stock("A"), s())]).is_err());
        assert!(Market::new(h, vec![(Asset::stock("A"), s()), (Asset::extra("A"), s())]).is_err());
        assert!(Market::new(
            h,
            vec![
                (Asset::stock("A"), deterministic(3, &[1.0])),
                (Asset::extra("X"), s())
            ]
        )
        .is_err());
        let mkt = Market::new(h, vec![(Asset::stock("A"), s()), (Asset::extra("X"), s())]).unwrap();
        assert!(Portfolio::new(
            &mkt,
            qty_single("B", PredictableProcess::constant(h, 1.0).unwrap())
        )
        .is_err());
    }

    #[test]
    fn pathwise_tables() {
        let q = p1(3);
        let table = PathwiseQuantities::from_quantity_process(&q).unwrap();
        assert!(table.is_trading_strategy());
        assert_eq!(table.to_quantity_process().unwrap(), q);

        // time-1 quantity differing across the two time-1 nodes
        let mut bad = PathwiseQuantities::new(2).unwrap();
        bad.set("S", 1, &"U".parse().unwrap(), 1.0).unwrap();
        bad.set("S", 1, &"D".parse().unwrap(), 2.0).unwrap();
        assert!(!bad.is_trading_strategy());
        assert_eq!(bad.predictability_violation(), Some(("S".into(), 1)));
        assert!(matches!(
            bad.to_quantity_process(),
            Err(Error::NotPredictable { .. })
        ));
    }

    fn random_market(h: usize, seed: &[f64]) -> Market {
        let price = |shift: usize| {
            LatticeProcess::from_fn(h, |n, w| {
                1.0 + seed[(n * 13 + w.index() * 5 + shift) % seed.len()]
            })
            .unwrap()
        };
        Market::new(
            h,
            vec![
                (Asset::stock("A"), price(0)),
                (Asset::stock("B"), price(3)),
                (Asset::stock("F"), price(7)),
                (Asset::extra("X"), price(11)),
            ],
        )
        .unwrap()
    }

    fn random_qty(h: usize, asset: &str, seed: &[f64], shift: usize) -> QuantityProcess {
        qty_single(
            asset,
            PredictableProcess::from_fn(h, |n, w| {
                seed[(n * 17 + w.index() * 3 + shift) % seed.len()] - 2.0
            })
            .unwrap(),
        )
    }

    proptest! {
        #[test]
        fn value_processes_are_additive(seed in prop::collection::vec(0.0f64..4.0, 3..30)) {
            let h = 3;
            let mkt = random_market(h, &seed);
            let q1 = qty_sum(&random_qty(h, "A", &seed, 1), &random_qty(h, "B", &seed, 2)).unwrap();
            let q2 = qty_sum(&random_qty(h, "B", &seed, 5), &random_qty(h, "X", &seed, 9)).unwrap();
            let sum = Portfolio::new(&mkt, qty_sum(&q1, &q2).unwrap()).unwrap();
            let (p1, p2) = (Portfolio::new(&mkt, q1).unwrap(), Portfolio::new(&mkt, q2).unwrap());
            for lattice in [value_lattice, closing_value_lattice] {
                let (s, a, b) = (lattice(&mkt, &sum), lattice(&mkt, &p1), lattice(&mkt, &p2));
                for ((x, y), z) in s.levels().iter().flatten().zip(a.levels().iter().flatten()).zip(b.levels().iter().flatten()) {
                    prop_assert!((x - (y + z)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn make_self_financing_properties(seed in prop::collection::vec(0.0f64..4.0, 3..30), v0 in -50.0f64..50.0) {
            let h = 4;
            let mkt = random_market(h, &seed);
            let q = qty_sum(&random_qty(h, "A", &seed, 1), &random_qty(h, "B", &seed, 4)).unwrap();
            let p = Portfolio::new(&mkt, q).unwrap();
            let sf = make_self_financing(&mkt, &p, "F", v0).unwrap();
            prop_assert!(is_self_financing(&mkt, &sf));
            prop_assert!((init_value(&mkt, &sf) - v0).abs() < 1e-9);
            let lattice = BinaryLattice::new(h).unwrap();
            for n in 1..=h {
                for w in lattice.paths(n - 1) {
                    for a in ["A", "B", "X"] {
                        prop_assert_eq!(sf.quantities().quantity(a, n, &w).unwrap(), p.quantities().quantity(a, n, &w).unwrap());
                    }
                }
            }
        }

        #[test]
        fn removal_drops_only_that_asset(seed in prop::collection::vec(0.0f64..4.0, 3..30)) {
            let h = 2;
            let q = qty_sum(&random_qty(h, "A", &seed, 1), &random_qty(h, "B", &seed, 4)).unwrap();
            let mut expected = support_set(&q);
            expected.remove("A");
            prop_assert_eq!(support_set(&qty_rem_comp(&q, "A")), expected);
        }
    }
}
