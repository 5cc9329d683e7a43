//! Finite Markov chains, finite paths, entry times and trajectory sampling.
//!
//! A [`MarkovChain`] stores its kernel as sparse rows over state indices
//! `0..n`; labels exist only for I/O. The numeric mode is the scalar type
//! parameter, so a chain is either exact ([`Rational`](crate::Rational)) or
//! `f64` for its whole lifetime.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::hash::Hash;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{NumericMode, Scalar};

/// Default hard cap on the number of steps in one sampled trajectory.
pub const DEFAULT_STEP_CAP: u64 = 100_000_000;

/// A non-empty finite path `(w_0, …, w_η)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FinitePath<T = usize>(Vec<T>);

impl<T> FinitePath<T> {
    pub fn new(states: Vec<T>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyPath);
        }
        Ok(FinitePath(states))
    }

    pub fn single(state: T) -> Self {
        FinitePath(vec![state])
    }

    pub fn states(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn first(&self) -> &T {
        &self.0[0]
    }

    pub fn last(&self) -> &T {
        &self.0[self.0.len() - 1]
    }

    /// Number of points, `η + 1`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of steps `η`.
    pub fn steps(&self) -> usize {
        self.0.len() - 1
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> FinitePath<U> {
        FinitePath(self.0.iter().map(f).collect())
    }
}

impl<T: Eq + Hash> FinitePath<T> {
    pub fn is_self_avoiding(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.0.len());
        self.0.iter().all(|s| seen.insert(s))
    }
}

impl<T> std::ops::Deref for FinitePath<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T: fmt::Display> fmt::Display for FinitePath<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// A set of state indices, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StateSet(Vec<usize>);

impl StateSet {
    pub fn empty() -> Self {
        StateSet(Vec::new())
    }

    pub fn full(n: usize) -> Self {
        StateSet((0..n).collect())
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        StateSet(
            mask.iter()
                .enumerate()
                .filter_map(|(i, &m)| m.then_some(i))
                .collect(),
        )
    }

    pub fn contains(&self, s: usize) -> bool {
        self.0.binary_search(&s).is_ok()
    }

    pub fn insert(&mut self, s: usize) {
        if let Err(pos) = self.0.binary_search(&s) {
            self.0.insert(pos, s);
        }
    }

    pub fn remove(&mut self, s: usize) {
        if let Ok(pos) = self.0.binary_search(&s) {
            self.0.remove(pos);
        }
    }

    pub fn with(&self, s: usize) -> Self {
        let mut out = self.clone();
        out.insert(s);
        out
    }

    pub fn without(&self, s: usize) -> Self {
        let mut out = self.clone();
        out.remove(s);
        out
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.0.iter().all(|&s| other.contains(s))
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        self.0.iter().chain(other.0.iter()).copied().collect()
    }

    pub fn difference(&self, other: &StateSet) -> StateSet {
        self.0.iter().copied().filter(|&s| !other.contains(s)).collect()
    }

    pub fn complement(&self, n: usize) -> StateSet {
        (0..n).filter(|&s| !self.contains(s)).collect()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &s in &self.0 {
            if s < n {
                m[s] = true;
            }
        }
        m
    }
}

impl FromIterator<usize> for StateSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        StateSet(v)
    }
}

impl<const N: usize> From<[usize; N]> for StateSet {
    fn from(arr: [usize; N]) -> Self {
        arr.into_iter().collect()
    }
}

/// A finite Markov chain with a validated row-stochastic kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain<S> {
    labels: Vec<String>,
    rows: Vec<Vec<(usize, S)>>,
    absorbing: Option<usize>,
}

/// Build and validate a chain from dense kernel rows.
pub fn build_chain<S: Scalar>(
    states: &[&str],
    kernel_rows: Vec<Vec<S>>,
) -> Result<MarkovChain<S>> {
    MarkovChain::new(states.iter().map(|s| s.to_string()).collect(), kernel_rows)
}

impl<S: Scalar> MarkovChain<S> {
    pub fn new(labels: Vec<String>, kernel_rows: Vec<Vec<S>>) -> Result<Self> {
        let n = labels.len();
        if kernel_rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: kernel_rows.len(),
            });
        }
        let mut rows = Vec::with_capacity(n);
        for row in kernel_rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            rows.push(
                row.into_iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .collect(),
            );
        }
        Self::from_sparse(labels, rows)
    }

    /// Build from sparse rows of `(column, probability)`; zero entries may
    /// be omitted.
    pub fn from_sparse(labels: Vec<String>, rows: Vec<Vec<(usize, S)>>) -> Result<Self> {
        let n = labels.len();
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rows.len(),
            });
        }
        let mut seen = HashSet::with_capacity(n);
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateState(l.clone()));
            }
        }
        let one = S::one();
        let mut clean = Vec::with_capacity(n);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.retain(|(_, p)| !p.is_zero());
            row.sort_by_key(|(c, _)| *c);
            let mut sum = S::zero();
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Precondition(format!(
                        "row {r} lists column {} twice",
                        w[0].0
                    )));
                }
            }
            for (c, p) in &row {
                if *c >= n {
                    return Err(Error::StateOutOfRange(*c));
                }
                if *p < S::zero() {
                    return Err(Error::NegativeEntry { row: r, col: *c });
                }
                if *p > one.clone() && !(p.clone() - one.clone()).is_negligible(1.0) {
                    return Err(Error::EntryAboveOne { row: r, col: *c });
                }
                sum = sum + p.clone();
            }
            if !sum.sums_to_one() {
                return Err(Error::RowSum {
                    row: r,
                    sum: sum.to_string(),
                });
            }
            clean.push(row);
        }
        Ok(MarkovChain {
            labels,
            rows: clean,
            absorbing: None,
        })
    }

    /// Designate `state` as the absorbing cemetery `Δ`.
    pub fn with_absorbing(mut self, state: usize) -> Result<Self> {
        if state >= self.len() {
            return Err(Error::StateOutOfRange(state));
        }
        let row = &self.rows[state];
        if row.len() != 1 || row[0].0 != state || !row[0].1.is_one() {
            return Err(Error::AbsorbingRow(self.labels[state].clone()));
        }
        self.absorbing = Some(state);
        Ok(self)
    }

    pub fn mode(&self) -> NumericMode {
        S::MODE
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub fn absorbing(&self) -> Option<usize> {
        self.absorbing
    }

    /// Nonzero entries of row `state`, sorted by column.
    pub fn row(&self, state: usize) -> &[(usize, S)] {
        &self.rows[state]
    }

    pub fn prob(&self, from: usize, to: usize) -> S {
        let row = &self.rows[from];
        match row.binary_search_by_key(&to, |(c, _)| *c) {
            Ok(i) => row[i].1.clone(),
            Err(_) => S::zero(),
        }
    }

    pub fn successors(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[state].iter().map(|(c, _)| *c)
    }

    /// Dense copy of the kernel.
    pub fn dense_rows(&self) -> Vec<Vec<S>> {
        let n = self.len();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![S::zero(); n];
                for (c, p) in row {
                    dense[*c] = p.clone();
                }
                dense
            })
            .collect()
    }

    pub fn to_f64(&self) -> MarkovChain<f64> {
        MarkovChain {
            labels: self.labels.clone(),
            rows: self
                .rows
                .iter()
                .map(|row| row.iter().map(|(c, p)| (*c, p.to_f64())).collect())
                .collect(),
            absorbing: self.absorbing,
        }
    }

    /// Probability of the exact finite trajectory `path`.
    pub fn path_probability(&self, path: &[usize]) -> S {
        path.windows(2)
            .fold(S::one(), |acc, w| acc * self.prob(w[0], w[1]))
    }

    pub fn parse_states(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.index_of(n)).collect()
    }

    pub fn state_set(&self, names: &[&str]) -> Result<StateSet> {
        Ok(self.parse_states(names)?.into_iter().collect())
    }

    pub fn render_path(&self, path: &[usize]) -> String {
        path.iter()
            .map(|&s| self.labels[s].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// States `x` with `P_x(τ_A < ∞) = 1`, decided on the kernel's support graph.
///
/// A state qualifies iff no trajectory from it can, before entering `A`,
/// reach a state from which `A` is unreachable.
pub fn reachability_closure<S: Scalar>(chain: &MarkovChain<S>, target: &StateSet) -> StateSet {
    let n = chain.len();
    let in_target = target.mask(n);
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for x in 0..n {
        if in_target[x] {
            continue;
        }
        for y in chain.successors(x) {
            reverse[y].push(x);
        }
    }
    // States that can reach A.
    let mut reaches = in_target.clone();
    let mut queue: VecDeque<usize> = target.iter().filter(|&s| s < n).collect();
    while let Some(y) = queue.pop_front() {
        for &x in &reverse[y] {
            if !reaches[x] {
                reaches[x] = true;
                queue.push_back(x);
            }
        }
    }
    // States that can reach a trap (a state outside A that cannot reach A).
    let mut doomed: Vec<bool> = (0..n).map(|x| !reaches[x]).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&x| doomed[x]).collect();
    while let Some(y) = queue.pop_front() {
        for &x in &reverse[y] {
            if !doomed[x] {
                doomed[x] = true;
                queue.push_back(x);
            }
        }
    }
    (0..n).filter(|&x| in_target[x] || !doomed[x]).collect()
}

/// Samples `X|_{[0, τ_A]}` for a fixed chain and target set.
#[derive(Debug, Clone)]
pub struct EntrySampler {
    in_target: Vec<bool>,
    closure: Vec<bool>,
    cols: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
    step_cap: u64,
}

impl EntrySampler {
    pub fn new<S: Scalar>(chain: &MarkovChain<S>, target: &StateSet) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::Precondition("target set must be non-empty".into()));
        }
        if let Some(bad) = target.iter().find(|&s| s >= chain.len()) {
            return Err(Error::StateOutOfRange(bad));
        }
        let n = chain.len();
        let closure = reachability_closure(chain, target).mask(n);
        let mut cols = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        for x in 0..n {
            let row = chain.row(x);
            let mut acc = 0.0;
            let mut c = Vec::with_capacity(row.len());
            let mut cum = Vec::with_capacity(row.len());
            for (col, p) in row {
                acc += p.to_f64();
                c.push(*col);
                cum.push(acc);
            }
            cols.push(c);
            cumulative.push(cum);
        }
        Ok(EntrySampler {
            in_target: target.mask(n),
            closure,
            cols,
            cumulative,
            step_cap: DEFAULT_STEP_CAP,
        })
    }

    pub fn with_step_cap(mut self, cap: u64) -> Self {
        self.step_cap = cap;
        self
    }

    pub fn can_start(&self, start: usize) -> bool {
        self.closure.get(start).copied().unwrap_or(false)
    }

    fn step<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let cum = &self.cumulative[x];
        let cols = &self.cols[x];
        let u: f64 = rng.gen::<f64>() * cum[cum.len() - 1];
        let idx = if cum.len() <= 8 {
            cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
        } else {
            cum.partition_point(|&c| c <= u).min(cum.len() - 1)
        };
        cols[idx]
    }

    /// One trajectory from `start` up to and including its entry into the
    /// target set.
    pub fn sample<R: Rng + ?Sized>(&self, start: usize, rng: &mut R) -> Result<FinitePath> {
        if start >= self.closure.len() {
            return Err(Error::StateOutOfRange(start));
        }
        if !self.closure[start] {
            return Err(Error::UnreachableTarget(start));
        }
        let mut path = vec![start];
        let mut x = start;
        let mut steps = 0u64;
        while !self.in_target[x] {
            if steps >= self.step_cap {
                return Err(Error::StepCapExceeded(self.step_cap));
            }
            x = self.step(x, rng);
            path.push(x);
            steps += 1;
        }
        Ok(FinitePath(path))
    }
}

/// Sample `X|_{[0, τ_A]}` from `start`.
///
/// Unreachable targets are reported before any sampling.
pub fn sample_until_entry<S: Scalar, R: Rng + ?Sized>(
    chain: &MarkovChain<S>,
    start: usize,
    target: &StateSet,
    rng: &mut R,
) -> Result<FinitePath> {
    EntrySampler::new(chain, target)?.sample(start, rng)
}
