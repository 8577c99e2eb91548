//! Finite binary scenario lattice.
//!
//! A scenario is a sequence of coin tosses. Up to a horizon `T` only the first
//! `T` tosses matter, so a scenario is represented by a [`TossPath`] of length
//! at most `T`. Processes are stored per node of the non-recombining tree:
//! the value at time `n` is keyed by the first `n` tosses, which makes every
//! [`LatticeProcess`] adapted to the natural filtration by construction.
//!
//! Nodes at time `n` are numbered `0..2^n` in lexicographic order with an up
//! move sorting before a down move. With that numbering the children of node
//! `k` are `2k` (up) and `2k + 1` (down).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default cap on the lattice horizon. A process over `T` periods stores
/// `2^(T+1) - 1` values.
pub const MAX_HORIZON: usize = 24;

/// A finite prefix of a coin-toss scenario. `true` is an up move (head).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TossPath {
    outcomes: Vec<bool>,
}

impl TossPath {
    pub fn new(outcomes: Vec<bool>) -> Self {
        Self { outcomes }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Path of length `len` whose node number at that length is `index`.
    pub fn from_index(len: usize, index: usize) -> Self {
        debug_assert!(len >= usize::BITS as usize || index < (1usize << len));
        let outcomes = (0..len)
            .map(|i| (index >> (len - 1 - i)) & 1 == 0)
            .collect();
        Self { outcomes }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    /// Outcome of the toss at position `i` (0-based), if the path is long enough.
    pub fn toss(&self, i: usize) -> Option<bool> {
        self.outcomes.get(i).copied()
    }

    /// Node number of this path among the paths of the same length.
    pub fn index(&self) -> usize {
        index_of(&self.outcomes)
    }

    /// First `n` outcomes.
    pub fn truncate(&self, n: usize) -> Result<TossPath> {
        if n > self.len() {
            return Err(Error::PrefixLength {
                expected: n,
                found: self.len(),
            });
        }
        Ok(Self {
            outcomes: self.outcomes[..n].to_vec(),
        })
    }

    /// The path extended by one more toss.
    pub fn child(&self, up: bool) -> TossPath {
        let mut outcomes = Vec::with_capacity(self.len() + 1);
        outcomes.extend_from_slice(&self.outcomes);
        outcomes.push(up);
        Self { outcomes }
    }

    pub fn is_prefix_of(&self, other: &TossPath) -> bool {
        other.outcomes.starts_with(&self.outcomes)
    }
}

pub(crate) fn index_of(outcomes: &[bool]) -> usize {
    outcomes
        .iter()
        .fold(0usize, |acc, &up| (acc << 1) | usize::from(!up))
}

/// Free-function form of [`TossPath::truncate`].
pub fn truncate(path: &TossPath, n: usize) -> Result<TossPath> {
    path.truncate(n)
}

/// Paths print over the alphabet `{U, D}`; the empty path prints as `-`.
impl fmt::Display for TossPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.outcomes.is_empty() {
            return f.write_str("-");
        }
        for &up in &self.outcomes {
            f.write_str(if up { "U" } else { "D" })?;
        }
        Ok(())
    }
}

impl FromStr for TossPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "-" || s.is_empty() {
            return Ok(Self::empty());
        }
        s.chars()
            .map(|c| match c {
                'U' | 'u' => Ok(true),
                'D' | 'd' => Ok(false),
                other => Err(Error::Format(format!(
                    "invalid toss `{other}` in path `{s}`, expected U or D"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

/// The finite carrier of the natural filtration up to a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryLattice {
    horizon: usize,
}

impl BinaryLattice {
    pub fn new(horizon: usize) -> Result<Self> {
        Self::with_limit(horizon, MAX_HORIZON)
    }

    pub fn with_limit(horizon: usize, limit: usize) -> Result<Self> {
        if horizon > limit {
            return Err(Error::HorizonTooLarge {
                requested: horizon,
                limit,
            });
        }
        Ok(Self { horizon })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of nodes at time `n`.
    pub fn width(n: usize) -> usize {
        1usize << n
    }

    /// All paths of length `n`, up before down.
    pub fn paths(&self, n: usize) -> impl Iterator<Item = TossPath> {
        (0..Self::width(n)).map(move |k| TossPath::from_index(n, k))
    }
}

/// All `2^horizon` paths of the given length in lexicographic order, up first.
pub fn enumerate_paths(horizon: usize) -> Result<Vec<TossPath>> {
    let lattice = BinaryLattice::new(horizon)?;
    Ok(lattice.paths(horizon).collect())
}

/// I.i.d. Bernoulli measure on tosses: an up move has probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMeasure {
    p: f64,
}

impl PathMeasure {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn weight(&self, up: bool) -> f64 {
        if up {
            self.p
        } else {
            1.0 - self.p
        }
    }

    /// Probability of the cylinder of all scenarios starting with `path`.
    pub fn path_probability(&self, path: &TossPath) -> f64 {
        path.outcomes()
            .iter()
            .fold(1.0, |acc, &up| acc * self.weight(up))
    }

    /// Probabilities of every node at time `n`, in node order.
    pub fn level_weights(&self, n: usize) -> Vec<f64> {
        let mut weights = vec![1.0];
        for _ in 0..n {
            weights = weights
                .iter()
                .flat_map(|&w| [w * self.p, w * (1.0 - self.p)])
                .collect();
        }
        weights
    }

    /// A path is negligible when its cylinder has probability zero. This only
    /// happens for the degenerate measures `p = 0` and `p = 1`.
    pub fn is_negligible(&self, path: &TossPath) -> bool {
        self.path_probability(path) == 0.0
    }
}

/// Free-function form of [`PathMeasure::path_probability`].
pub fn path_probability(m: &PathMeasure, path: &TossPath) -> f64 {
    m.path_probability(path)
}

/// A real-valued adapted process on the lattice: one value per node
/// `(n, prefix)` with `|prefix| = n` and `n <= horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeProcess {
    levels: Vec<Vec<f64>>,
}

impl LatticeProcess {
    pub fn from_fn(horizon: usize, mut f: impl FnMut(usize, &TossPath) -> f64) -> Result<Self> {
        let lattice = BinaryLattice::new(horizon)?;
        let levels = (0..=horizon)
            .map(|n| lattice.paths(n).map(|path| f(n, &path)).collect())
            .collect();
        Ok(Self { levels })
    }

    pub fn constant(horizon: usize, value: f64) -> Result<Self> {
        BinaryLattice::new(horizon)?;
        Ok(Self {
            levels: (0..=horizon)
                .map(|n| vec![value; BinaryLattice::width(n)])
                .collect(),
        })
    }

    /// Builds a process from per-time node vectors. Level `n` must hold
    /// exactly `2^n` values.
    pub fn from_levels(levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Format(
                "a process needs at least the time-0 level".into(),
            ));
        }
        BinaryLattice::new(levels.len() - 1)?;
        for (n, level) in levels.iter().enumerate() {
            if level.len() != BinaryLattice::width(n) {
                return Err(Error::Format(format!(
                    "level {n} holds {} values, expected {}",
                    level.len(),
                    BinaryLattice::width(n)
                )));
            }
        }
        Ok(Self { levels })
    }

    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    /// Value at time `n` on the node reached by `prefix`; requires `|prefix| = n`.
    pub fn get(&self, n: usize, prefix: &TossPath) -> Result<f64> {
        self.check_time(n)?;
        if prefix.len() != n {
            return Err(Error::PrefixLength {
                expected: n,
                found: prefix.len(),
            });
        }
        Ok(self.levels[n][prefix.index()])
    }

    /// Value at time `n` along a scenario of length at least `n`.
    pub fn along(&self, n: usize, scenario: &TossPath) -> Result<f64> {
        self.check_time(n)?;
        if scenario.len() < n {
            return Err(Error::PrefixLength {
                expected: n,
                found: scenario.len(),
            });
        }
        Ok(self.levels[n][index_of(&scenario.outcomes()[..n])])
    }

    /// Value at node number `index` of time `n`.
    ///
    /// Panics if the node does not exist.
    pub fn at(&self, n: usize, index: usize) -> f64 {
        self.levels[n][index]
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn map(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        Self {
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(n, level)| level.iter().map(|&x| f(n, x)).collect())
                .collect(),
        }
    }

    /// `(time, prefix, value)` for every node, time-major, node order within a time.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, TossPath, f64)> + '_ {
        self.levels.iter().enumerate().flat_map(|(n, level)| {
            level
                .iter()
                .enumerate()
                .map(move |(k, &x)| (n, TossPath::from_index(n, k), x))
        })
    }

    fn check_time(&self, n: usize) -> Result<()> {
        if n > self.horizon() {
            return Err(Error::TimeOutOfRange {
                time: n,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }
}

/// `E[f_n]`: the probability-weighted sum of the process over the nodes at time `n`.
pub fn expectation(m: &PathMeasure, f: &LatticeProcess, n: usize) -> Result<f64> {
    f.check_time(n)?;
    Ok(m.level_weights(n)
        .iter()
        .zip(f.level(n))
        .map(|(w, x)| w * x)
        .sum())
}

/// One-step conditional expectation `E[f_{n+1} | first n tosses = prefix]`.
pub fn conditional_expectation_step(
    m: &PathMeasure,
    f: &LatticeProcess,
    n: usize,
    prefix: &TossPath,
) -> Result<f64> {
    if prefix.len() != n {
        return Err(Error::PrefixLength {
            expected: n,
            found: prefix.len(),
        });
    }
    f.check_time(n + 1)?;
    Ok(step_at(m, f, n, prefix.index()))
}

pub(crate) fn step_at(m: &PathMeasure, f: &LatticeProcess, n: usize, index: usize) -> f64 {
    weighted_step(m, f.at(n + 1, 2 * index), f.at(n + 1, 2 * index + 1))
}

/// `p * up + (1 - p) * down`, exact when both children agree.
pub(crate) fn weighted_step(m: &PathMeasure, up: f64, down: f64) -> f64 {
    if up == down {
        return up;
    }
    m.p() * up + (1.0 - m.p()) * down
}

/// Whether `f`, a function of full length-`T` scenarios, is determined by the
/// first `n` tosses. Checked exhaustively; `n >= T` is trivially true.
pub fn is_measurable_at(f: impl Fn(&TossPath) -> f64, lattice: &BinaryLattice, n: usize) -> bool {
    let horizon = lattice.horizon();
    if n >= horizon {
        return true;
    }
    let block = 1usize << (horizon - n);
    let values: Vec<f64> = lattice.paths(horizon).map(|w| f(&w)).collect();
    // paths sharing their first n tosses are contiguous in node order
    values.chunks(block).all(|class| {
        let first = class[0];
        class
            .iter()
            .all(|&x| x == first || (x.is_nan() && first.is_nan()))
    })
}
