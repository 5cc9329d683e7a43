//! Exact computations on small chains: Green's functions, the product
//! formula for loop-erased path probabilities, exact laws of erasure
//! pipelines by enumeration, and traced (induced) chains.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::chain::{reachability_closure, FinitePath, MarkovChain, StateSet};
use crate::erasure::{Stages, StreamingErasure};
use crate::error::{Error, Result};
use crate::linalg::{solve, DenseMatrix};
use crate::scalar::{Rational, Scalar};

/// Label given to the cemetery state added by [`traced_kernel`].
pub const CEMETERY: &str = "Δ";

fn check_states<S: Scalar>(chain: &MarkovChain<S>, set: &StateSet) -> Result<()> {
    match set.iter().find(|&s| s >= chain.len()) {
        Some(bad) => Err(Error::StateOutOfRange(bad)),
        None => Ok(()),
    }
}

/// States reachable from `from` along transitions that stay inside `domain`.
fn reachable_within<S: Scalar>(chain: &MarkovChain<S>, from: usize, domain: &[bool]) -> Vec<usize> {
    let mut seen = vec![false; chain.len()];
    let mut order = vec![from];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(z) = queue.pop_front() {
        for y in chain.successors(z) {
            if domain[y] && !seen[y] {
                seen[y] = true;
                order.push(y);
                queue.push_back(y);
            }
        }
    }
    order.sort_unstable();
    order
}

/// `I - P` restricted to `states`.
fn killed_generator<S: Scalar>(chain: &MarkovChain<S>, states: &[usize]) -> DenseMatrix<S> {
    let n = chain.len();
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in states.iter().enumerate() {
        pos[s] = i;
    }
    let mut m: DenseMatrix<S> = DenseMatrix::identity(states.len());
    for (i, &s) in states.iter().enumerate() {
        for (c, p) in chain.row(s) {
            if pos[*c] != usize::MAX {
                let v = m.get(i, pos[*c]).clone() - p.clone();
                m.set(i, pos[*c], v);
            }
        }
    }
    m
}

/// `G_B(x, y)` solved on the states reachable from `x` inside `B`. Assumes
/// those states leave `B` almost surely.
fn green_from<S: Scalar>(chain: &MarkovChain<S>, domain: &[bool], x: usize, y: usize) -> Result<S> {
    let states = reachable_within(chain, x, domain);
    let Ok(iy) = states.binary_search(&y) else {
        return Ok(S::zero());
    };
    let ix = states.binary_search(&x).expect("source is reachable from itself");
    let a = killed_generator(chain, &states);
    let mut rhs = DenseMatrix::zeros(states.len(), 1);
    rhs.set(iy, 0, S::one());
    let col = solve(&a, &rhs)?;
    Ok(col.get(ix, 0).clone())
}

fn check_green_domain<S: Scalar>(chain: &MarkovChain<S>, domain: &StateSet) -> Result<()> {
    check_states(chain, domain)?;
    if domain.len() >= chain.len() {
        return Err(Error::Precondition("the domain must be a proper subset".into()));
    }
    let outside = domain.complement(chain.len());
    let exits = reachability_closure(chain, &outside);
    if let Some(bad) = domain.iter().find(|&s| !exits.contains(s)) {
        return Err(Error::Singular(format!(
            "state {} does not leave the domain almost surely",
            chain.label(bad)
        )));
    }
    Ok(())
}

/// Expected visits to `y` before leaving `B`, started at `x`.
pub fn green<S: Scalar>(chain: &MarkovChain<S>, domain: &StateSet, x: usize, y: usize) -> Result<S> {
    check_green_domain(chain, domain)?;
    for s in [x, y] {
        if !domain.contains(s) {
            return Err(Error::Precondition(format!("state {s} is outside the domain")));
        }
    }
    green_from(chain, &domain.mask(chain.len()), x, y)
}

/// The full matrix `G_B` over `B × B`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenTable<S> {
    domain: Vec<usize>,
    values: DenseMatrix<S>,
}

impl<S: Scalar> GreenTable<S> {
    /// Solve `(I - P_BB) G = I`. In exact mode the table is checked against
    /// `G_B(x,y) = P_x(τ_y < τ_{V∖B}) G_B(y,y)` before it is returned.
    pub fn new(chain: &MarkovChain<S>, domain: &StateSet) -> Result<Self> {
        check_green_domain(chain, domain)?;
        let states = domain.as_slice().to_vec();
        let a = killed_generator(chain, &states);
        let values = solve(&a, &DenseMatrix::identity(states.len()))?;
        let table = GreenTable {
            domain: states,
            values,
        };
        if S::is_exact() {
            table.check_hitting_identity(chain)?;
        }
        Ok(table)
    }

    /// `h(x) = G(x,y)/G(y,y)` must solve the hitting problem for `y`:
    /// `h(y) = 1` and `h = P h` on the rest of the domain (zero outside).
    /// The solution is unique because the domain is left almost surely.
    fn check_hitting_identity(&self, chain: &MarkovChain<S>) -> Result<()> {
        let n = self.domain.len();
        let mut pos = vec![usize::MAX; chain.len()];
        for (i, &s) in self.domain.iter().enumerate() {
            pos[s] = i;
        }
        for iy in 0..n {
            let gyy = self.values.get(iy, iy).clone();
            if gyy < S::one() {
                return Err(Error::Precondition("G_B(y,y) < 1".into()));
            }
            let h = |i: usize| self.values.get(i, iy).clone() / gyy.clone();
            for (iz, &z) in self.domain.iter().enumerate() {
                if iz == iy {
                    continue;
                }
                let mut ph = S::zero();
                for (c, p) in chain.row(z) {
                    if pos[*c] != usize::MAX {
                        ph = ph + p.clone() * h(pos[*c]);
                    }
                }
                if ph != h(iz) {
                    return Err(Error::Precondition(format!(
                        "Green table fails the hitting identity at ({z}, {})",
                        self.domain[iy]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &[usize] {
        &self.domain
    }

    pub fn get(&self, x: usize, y: usize) -> Result<S> {
        let find = |s: usize| {
            self.domain
                .binary_search(&s)
                .map_err(|_| Error::Precondition(format!("state {s} is outside the domain")))
        };
        Ok(self.values.get(find(x)?, find(y)?).clone())
    }
}

/// `F_B(y_0, …, y_n) = G_B(y_0,y_0) · G_{B∖{y_0}}(y_1,y_1) ⋯`.
pub fn f_product<S: Scalar>(chain: &MarkovChain<S>, domain: &StateSet, points: &[usize]) -> Result<S> {
    check_green_domain(chain, domain)?;
    let mut seen = StateSet::empty();
    for &p in points {
        if !domain.contains(p) {
            return Err(Error::Precondition(format!("state {p} is outside the domain")));
        }
        if seen.contains(p) {
            return Err(Error::Precondition(format!("state {p} is repeated")));
        }
        seen.insert(p);
    }
    let mut mask = domain.mask(chain.len());
    let mut product = S::one();
    for &p in points {
        product = product * green_from(chain, &mask, p, p)?;
        mask[p] = false;
    }
    Ok(product)
}

/// `P_x(𝔏(X|[0,τ_A]) = w)` by the Green product
/// `∏ G_{A^c ∖ {w_0..w_{n-1}}}(w_n, w_n) · P(w_n, w_{n+1})`.
pub fn le_path_probability<S: Scalar>(chain: &MarkovChain<S>, target: &StateSet, w: &FinitePath) -> Result<S> {
    check_states(chain, target)?;
    let n = chain.len();
    if let Some(&bad) = w.iter().find(|&&s| s >= n) {
        return Err(Error::StateOutOfRange(bad));
    }
    if !w.is_self_avoiding() {
        return Err(Error::Precondition("the path must be self-avoiding".into()));
    }
    if !target.contains(*w.last()) {
        return Err(Error::Precondition("the path must end in the target set".into()));
    }
    if w[..w.len() - 1].iter().any(|&s| target.contains(s)) {
        return Err(Error::Precondition(
            "only the last point of the path may lie in the target set".into(),
        ));
    }
    if w.len() == 1 {
        return Ok(S::one());
    }
    if !reachability_closure(chain, target).contains(*w.first()) {
        return Err(Error::UnreachableTarget(*w.first()));
    }
    let mut domain = target.complement(n).mask(n);
    let mut product = S::one();
    for pair in w.windows(2) {
        let step = chain.prob(pair[0], pair[1]);
        if step.is_zero() {
            return Ok(S::zero());
        }
        product = product * green_from(chain, &domain, pair[0], pair[0])? * step;
        domain[pair[0]] = false;
    }
    Ok(product)
}

/// Every self-avoiding path from `x` along positive transitions whose last
/// point is its only point in `target`, in lexicographic order.
pub fn admissible_paths<S: Scalar>(chain: &MarkovChain<S>, x: usize, target: &StateSet) -> Vec<FinitePath> {
    let n = chain.len();
    let in_target = target.mask(n);
    if in_target[x] {
        return vec![FinitePath::single(x)];
    }
    let mut out = Vec::new();
    let mut path = vec![x];
    let mut used = vec![false; n];
    used[x] = true;
    fn dfs<S: Scalar>(
        chain: &MarkovChain<S>,
        in_target: &[bool],
        path: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<FinitePath>,
    ) {
        let z = *path.last().expect("non-empty");
        for y in chain.successors(z).collect::<Vec<_>>() {
            if used[y] {
                continue;
            }
            path.push(y);
            if in_target[y] {
                out.push(FinitePath::new(path.clone()).expect("non-empty"));
            } else {
                used[y] = true;
                dfs(chain, in_target, path, used, out);
                used[y] = false;
            }
            path.pop();
        }
    }
    dfs(chain, &in_target, &mut path, &mut used, &mut out);
    out.sort();
    out
}

/// The operator applied to `X|[0,τ_A]` before its law is taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pipeline {
    LoopErasure,
    /// Partial erasures with `V_1 ⊆ V_2 ⊆ …`, applied in order.
    Refinement(Vec<StateSet>),
}

impl Pipeline {
    pub fn stages(&self, n: usize) -> Result<Stages> {
        match self {
            Pipeline::LoopErasure => Ok(Stages::loop_erasure(n)),
            Pipeline::Refinement(sets) => {
                for set in sets {
                    if let Some(bad) = set.iter().find(|&s| s >= n) {
                        return Err(Error::StateOutOfRange(bad));
                    }
                }
                Stages::refinement(n, sets)
            }
        }
    }
}

/// Limits for [`enumerate_erasure_law`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLawOptions {
    /// Longest trajectory (in steps) that is enumerated.
    pub length_cap: usize,
    /// Stop early once the unenumerated mass is at most this; fail if it is
    /// still above it at `length_cap`.
    pub tolerance: Option<f64>,
    pub max_chain_states: usize,
    pub max_length_cap: usize,
    /// Cap on distinct intermediate erasure states.
    pub max_work_states: usize,
    #[doc(hidden)]
    pub inject_fault: bool,
}

impl Default for ExactLawOptions {
    fn default() -> Self {
        ExactLawOptions {
            length_cap: 40,
            tolerance: None,
            max_chain_states: 8,
            max_length_cap: 40,
            max_work_states: 1_000_000,
            inject_fault: false,
        }
    }
}

impl ExactLawOptions {
    /// Enumerate until the residual mass is at most `tolerance`, allowing up
    /// to `max_length_cap` steps.
    pub fn to_tolerance(tolerance: f64, max_length_cap: usize) -> Self {
        ExactLawOptions {
            length_cap: max_length_cap,
            tolerance: Some(tolerance),
            max_length_cap,
            ..Self::default()
        }
    }
}

/// A finite law on paths plus the mass that lies outside its support.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLaw<S> {
    pub support: BTreeMap<FinitePath, S>,
    /// Probability that the trajectory was not finished within `steps`.
    pub tail_bound: S,
    /// Number of steps enumerated.
    pub steps: usize,
}

impl<S: Scalar> PathLaw<S> {
    pub fn dirac(path: FinitePath) -> Self {
        PathLaw {
            support: BTreeMap::from([(path, S::one())]),
            tail_bound: S::zero(),
            steps: 0,
        }
    }

    pub fn total_mass(&self) -> S {
        self.support.values().fold(S::zero(), |a, p| a + p.clone())
    }

    pub fn get(&self, path: &FinitePath) -> S {
        self.support.get(path).cloned().unwrap_or_else(S::zero)
    }

    /// `½ Σ |p(w) - q(w)|` over the union of supports.
    pub fn total_variation(&self, other: &PathLaw<S>) -> S {
        let mut sum = S::zero();
        for (path, p) in &self.support {
            sum = sum + (p.clone() - other.get(path)).abs_val();
        }
        for (path, q) in &other.support {
            if !self.support.contains_key(path) {
                sum = sum + q.abs_val();
            }
        }
        sum / S::from_ratio(2, 1)
    }

    /// First support path that differs most between the two laws.
    pub fn largest_discrepancy(&self, other: &PathLaw<S>) -> Option<(FinitePath, S, S)> {
        let mut best: Option<(FinitePath, S, S)> = None;
        let mut best_gap = S::zero();
        let keys = self.support.keys().chain(other.support.keys());
        for path in keys {
            let (p, q) = (self.get(path), other.get(path));
            let gap = (p.clone() - q.clone()).abs_val();
            if gap > best_gap {
                best_gap = gap;
                best = Some((path.clone(), p, q));
            }
        }
        best
    }
}

/// Arithmetic used by the enumeration: exact integers over a common
/// denominator, or plain doubles.
trait Mass: Clone {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign(&mut self, other: &Self);
    fn mul(&self, other: &Self) -> Self;
}

impl Mass for BigUint {
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

impl Mass for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

#[derive(Debug, Clone, Copy)]
enum Dest {
    Live(usize),
    Absorbed(usize),
}

struct Enumeration<'a, M> {
    stages: &'a Stages,
    weights: Vec<Vec<(usize, M)>>,
    in_target: Vec<bool>,
    states: Vec<StreamingErasure>,
    index: HashMap<StreamingErasure, usize>,
    moves: Vec<Option<Vec<(Dest, M)>>>,
    atoms: Vec<Vec<usize>>,
    atom_index: HashMap<Vec<usize>, usize>,
    max_work_states: usize,
}

impl<'a, M: Mass> Enumeration<'a, M> {
    fn intern(&mut self, state: StreamingErasure) -> Result<usize> {
        if let Some(&id) = self.index.get(&state) {
            return Ok(id);
        }
        if self.states.len() >= self.max_work_states {
            return Err(Error::Guard(format!(
                "more than {} distinct erasure states",
                self.max_work_states
            )));
        }
        let id = self.states.len();
        self.index.insert(state.clone(), id);
        self.states.push(state);
        self.moves.push(None);
        Ok(id)
    }

    fn atom(&mut self, path: &[usize]) -> usize {
        if let Some(&id) = self.atom_index.get(path) {
            return id;
        }
        let id = self.atoms.len();
        self.atom_index.insert(path.to_vec(), id);
        self.atoms.push(path.to_vec());
        id
    }

    fn moves_from(&mut self, id: usize) -> Result<Vec<(Dest, M)>> {
        if let Some(m) = &self.moves[id] {
            return Ok(m.clone());
        }
        let state = self.states[id].clone();
        let row = self.weights[state.current()].clone();
        let mut out = Vec::with_capacity(row.len());
        for (y, w) in row {
            let mut next = state.clone();
            next.push(self.stages, y);
            let dest = if self.in_target[y] {
                Dest::Absorbed(self.atom(next.output()))
            } else {
                Dest::Live(self.intern(next)?)
            };
            out.push((dest, w));
        }
        self.moves[id] = Some(out.clone());
        Ok(out)
    }
}

struct RawLaw<M> {
    atoms: Vec<(Vec<usize>, M)>,
    residual: M,
    steps: usize,
}

/// Step the distribution of pipeline states forward. Each step, masses are
/// multiplied by a kernel weight; `rescale` brings absorbed mass to the new
/// step's denominator and `within_tolerance` decides early stopping.
fn run_enumeration<M: Mass>(
    stages: &Stages,
    weights: Vec<Vec<(usize, M)>>,
    in_target: Vec<bool>,
    x: usize,
    opts: &ExactLawOptions,
    mut rescale: impl FnMut(&mut [M]),
    mut within_tolerance: impl FnMut(&M, usize) -> bool,
    one: M,
) -> Result<RawLaw<M>> {
    let mut en = Enumeration {
        stages,
        weights,
        in_target,
        states: Vec::new(),
        index: HashMap::new(),
        moves: Vec::new(),
        atoms: Vec::new(),
        atom_index: HashMap::new(),
        max_work_states: opts.max_work_states,
    };
    let start = en.intern(StreamingErasure::new(stages, x))?;
    let mut frontier: Vec<(usize, M)> = vec![(start, one)];
    let mut absorbed: Vec<M> = Vec::new();
    let mut steps = 0;
    let mut residual = M::zero();
    while steps < opts.length_cap && !frontier.is_empty() {
        steps += 1;
        rescale(&mut absorbed);
        let mut next: Vec<M> = Vec::new();
        let mut touched: Vec<usize> = Vec::new();
        for (id, mass) in &frontier {
            for (dest, w) in en.moves_from(*id)? {
                let m = mass.mul(&w);
                match dest {
                    Dest::Live(j) => {
                        if j >= next.len() {
                            next.resize(j + 1, M::zero());
                        }
                        if next[j].is_zero() {
                            touched.push(j);
                        }
                        next[j].add_assign(&m);
                    }
                    Dest::Absorbed(a) => {
                        if a >= absorbed.len() {
                            absorbed.resize(a + 1, M::zero());
                        }
                        absorbed[a].add_assign(&m);
                    }
                }
            }
        }
        touched.sort_unstable();
        frontier = touched
            .into_iter()
            .map(|j| (j, std::mem::replace(&mut next[j], M::zero())))
            .filter(|(_, m)| !m.is_zero())
            .collect();
        residual = M::zero();
        for (_, m) in &frontier {
            residual.add_assign(m);
        }
        if opts.tolerance.is_some() && within_tolerance(&residual, steps) {
            break;
        }
    }
    let atoms = en
        .atoms
        .into_iter()
        .zip(absorbed.into_iter().chain(std::iter::repeat(M::zero())))
        .collect();
    Ok(RawLaw {
        atoms,
        residual,
        steps,
    })
}

/// The law of `pipeline(X|[0,τ_A])` under `P_x`, enumerated over all
/// trajectories of at most `length_cap` steps. `tail_bound` is the exact
/// probability that the trajectory is longer.
///
/// Exact chains are enumerated with integer masses over a common
/// denominator, so the result is exact.
pub fn enumerate_erasure_law<S: Scalar>(
    chain: &MarkovChain<S>,
    x: usize,
    target: &StateSet,
    pipeline: &Pipeline,
    opts: &ExactLawOptions,
) -> Result<PathLaw<S>> {
    let n = chain.len();
    if n > opts.max_chain_states {
        return Err(Error::Guard(format!(
            "{n} states exceeds the enumeration limit of {}",
            opts.max_chain_states
        )));
    }
    if opts.length_cap > opts.max_length_cap {
        return Err(Error::Guard(format!(
            "length cap {} exceeds the limit of {}",
            opts.length_cap, opts.max_length_cap
        )));
    }
    if x >= n {
        return Err(Error::StateOutOfRange(x));
    }
    check_states(chain, target)?;
    if target.is_empty() {
        return Err(Error::Precondition("target set must be non-empty".into()));
    }
    let mut stages = pipeline.stages(n)?;
    if opts.inject_fault {
        stages = stages.with_injected_fault();
    }
    if target.contains(x) {
        return Ok(PathLaw::dirac(FinitePath::single(x)));
    }
    if !reachability_closure(chain, target).contains(x) {
        return Err(Error::UnreachableTarget(x));
    }
    let in_target = target.mask(n);
    let law = if S::is_exact() {
        enumerate_exact(chain, &stages, in_target, x, opts)?
    } else {
        enumerate_double(chain, &stages, in_target, x, opts)?
    };
    if let Some(tol) = opts.tolerance {
        let tail = law.tail_bound.to_f64();
        if tail > tol {
            return Err(Error::TailTooLarge { tail, tolerance: tol });
        }
    }
    Ok(law)
}

fn enumerate_exact<S: Scalar>(
    chain: &MarkovChain<S>,
    stages: &Stages,
    in_target: Vec<bool>,
    x: usize,
    opts: &ExactLawOptions,
) -> Result<PathLaw<S>> {
    let n = chain.len();
    let rows: Vec<Vec<(usize, Rational)>> = (0..n)
        .map(|s| chain.row(s).iter().map(|(c, p)| (*c, p.to_rational())).collect())
        .collect();
    let mut denom = num_bigint::BigInt::one();
    for row in &rows {
        for (_, p) in row {
            denom = denom.lcm(p.denom());
        }
    }
    let denom = denom.to_biguint().expect("denominators are positive");
    let weights: Vec<Vec<(usize, BigUint)>> = rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|(c, p)| {
                    (*c, p.numer().magnitude() * (&denom / p.denom().magnitude()))
                })
                .collect()
        })
        .collect();
    let tolerance = opts.tolerance.and_then(Rational::from_float);
    let mut scale = BigUint::one();
    let d = denom.clone();
    let mut scale_for_check = BigUint::one();
    let raw = run_enumeration(
        stages,
        weights,
        in_target,
        x,
        opts,
        |absorbed| {
            scale *= &d;
            for a in absorbed.iter_mut() {
                *a *= &d;
            }
        },
        |residual, _| {
            scale_for_check *= &d;
            match &tolerance {
                Some(tol) => {
                    Rational::from_integer(residual.clone().into())
                        <= tol.clone() * Rational::from_integer(scale_for_check.clone().into())
                }
                None => false,
            }
        },
        BigUint::one(),
    )?;
    let total_denom = Rational::from_integer(num_traits::pow(denom, raw.steps).into());
    let convert = |m: BigUint| S::from_rational(&(Rational::from_integer(m.into()) / total_denom.clone()));
    let mut support = BTreeMap::new();
    for (path, m) in raw.atoms {
        if !Zero::is_zero(&m) {
            support.insert(FinitePath::new(path)?, convert(m));
        }
    }
    Ok(PathLaw {
        support,
        tail_bound: convert(raw.residual),
        steps: raw.steps,
    })
}

fn enumerate_double<S: Scalar>(
    chain: &MarkovChain<S>,
    stages: &Stages,
    in_target: Vec<bool>,
    x: usize,
    opts: &ExactLawOptions,
) -> Result<PathLaw<S>> {
    let weights: Vec<Vec<(usize, f64)>> = (0..chain.len())
        .map(|s| chain.row(s).iter().map(|(c, p)| (*c, p.to_f64())).collect())
        .collect();
    let tol = opts.tolerance.unwrap_or(0.0);
    let raw = run_enumeration(stages, weights, in_target, x, opts, |_| {}, |r, _| *r <= tol, 1.0)?;
    let mut support = BTreeMap::new();
    for (path, m) in raw.atoms {
        if m != 0.0 {
            support.insert(FinitePath::new(path)?, S::from_f64_lossy(m));
        }
    }
    Ok(PathLaw {
        support,
        tail_bound: S::from_f64_lossy(raw.residual),
        steps: raw.steps,
    })
}

/// `(1 - p_min)^⌊cap/D⌋` with `D` the number of states and `p_min` the
/// smallest `P_y(τ_A ≤ D)` over `y ∈ V_A ∖ A`: an a priori bound on
/// `P_x(τ_A > cap)` for every `x ∈ V_A`.
pub fn apriori_tail_bound<S: Scalar>(chain: &MarkovChain<S>, target: &StateSet, length_cap: usize) -> f64 {
    let n = chain.len();
    let in_target = target.mask(n);
    let closure = reachability_closure(chain, target);
    let mut hit: Vec<S> = (0..n)
        .map(|s| if in_target[s] { S::one() } else { S::zero() })
        .collect();
    for _ in 0..n {
        hit = (0..n)
            .map(|s| {
                if in_target[s] {
                    S::one()
                } else {
                    chain
                        .row(s)
                        .iter()
                        .fold(S::zero(), |acc, (c, p)| acc + p.clone() * hit[*c].clone())
                }
            })
            .collect();
    }
    let p_min = closure
        .iter()
        .filter(|&s| !in_target[s])
        .map(|s| hit[s].to_f64())
        .fold(1.0_f64, f64::min);
    (1.0 - p_min).max(0.0).powi((length_cap / n.max(1)) as i32)
}

/// Which induced chain [`traced_kernel`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceVariant {
    /// `X̃_n = X_{τ̊_Ṽ^{(n)} ∧ τ_A}` on `V_A`: the next visit to the subset
    /// (returns to the current point count), frozen once `A` is entered.
    HittingSet,
    /// The next visit to the subset minus the current point, killed at `A`
    /// (the cemetery [`CEMETERY`] replaces `A`).
    ExcludeCurrent,
}

/// An induced chain together with the original index of each of its states
/// (`None` for the cemetery).
#[derive(Debug, Clone, PartialEq)]
pub struct Traced<S> {
    pub chain: MarkovChain<S>,
    pub origin: Vec<Option<usize>>,
}

impl<S: Scalar> Traced<S> {
    /// Index in the traced chain of original state `s`.
    pub fn position(&self, s: usize) -> Option<usize> {
        self.origin.iter().position(|o| *o == Some(s))
    }

    pub fn cemetery(&self) -> Option<usize> {
        self.origin.iter().position(Option::is_none)
    }
}

/// First-entry distribution on `targets` after one step from each source.
/// Rows are indexed like `sources`, columns like `targets`.
fn entry_after_one_step<S: Scalar>(
    chain: &MarkovChain<S>,
    source: usize,
    is_target: &[bool],
    targets: &[usize],
) -> Result<Vec<S>> {
    let n = chain.len();
    let free: Vec<bool> = (0..n).map(|s| !is_target[s]).collect();
    // Free states reachable in one step from the source, then onwards.
    let mut seen = vec![false; n];
    let mut inner = Vec::new();
    for y in chain.successors(source) {
        if free[y] && !seen[y] {
            for z in reachable_within(chain, y, &free) {
                if !seen[z] {
                    seen[z] = true;
                    inner.push(z);
                }
            }
        }
    }
    inner.sort_unstable();
    let mut tpos = vec![usize::MAX; n];
    for (i, &t) in targets.iter().enumerate() {
        tpos[t] = i;
    }
    let mut result = vec![S::zero(); targets.len()];
    for (c, p) in chain.row(source) {
        if is_target[*c] {
            let i = tpos[*c];
            result[i] = result[i].clone() + p.clone();
        }
    }
    if inner.is_empty() {
        return Ok(result);
    }
    let a = killed_generator(chain, &inner);
    let mut rhs: DenseMatrix<S> = DenseMatrix::zeros(inner.len(), targets.len());
    for (i, &z) in inner.iter().enumerate() {
        for (c, p) in chain.row(z) {
            if is_target[*c] {
                let v = rhs.get(i, tpos[*c]).clone() + p.clone();
                rhs.set(i, tpos[*c], v);
            }
        }
    }
    let h = solve(&a, &rhs)
        .map_err(|e| Error::Singular(format!("trace from {}: {e}", chain.label(source))))?;
    for (c, p) in chain.row(source) {
        if let Ok(i) = inner.binary_search(c) {
            for (j, r) in result.iter_mut().enumerate() {
                *r = r.clone() + p.clone() * h.get(i, j).clone();
            }
        }
    }
    Ok(result)
}

/// The chain induced on `subset` by watching `X` only at its visits there,
/// stopped or killed at `target`.
pub fn traced_kernel<S: Scalar>(
    chain: &MarkovChain<S>,
    subset: &StateSet,
    target: &StateSet,
    variant: TraceVariant,
) -> Result<Traced<S>> {
    check_states(chain, subset)?;
    check_states(chain, target)?;
    if subset.is_empty() {
        return Err(Error::Precondition("the traced subset must be non-empty".into()));
    }
    match variant {
        TraceVariant::HittingSet => trace_hitting_set(chain, subset, target),
        TraceVariant::ExcludeCurrent => trace_exclude_current(chain, subset, target),
    }
}

fn trace_hitting_set<S: Scalar>(chain: &MarkovChain<S>, subset: &StateSet, target: &StateSet) -> Result<Traced<S>> {
    let n = chain.len();
    let v_a = if target.is_empty() {
        // Without a target the trace is only defined where the subset is
        // revisited almost surely.
        let states = StateSet::full(n);
        let ok = reachability_closure(chain, subset);
        if let Some(bad) = states.iter().find(|&s| !ok.contains(s)) {
            return Err(Error::Singular(format!(
                "state {} does not reach the traced subset almost surely",
                chain.label(bad)
            )));
        }
        states
    } else {
        reachability_closure(chain, target)
    };
    let states: Vec<usize> = v_a.iter().collect();
    let stop = subset.union(target);
    let is_stop = stop.mask(n);
    let stop_states: Vec<usize> = stop.iter().filter(|&s| v_a.contains(s)).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in states.iter().enumerate() {
        pos[s] = i;
    }
    let mut rows = Vec::with_capacity(states.len());
    for &s in &states {
        if target.contains(s) {
            rows.push(vec![(pos[s], S::one())]);
            continue;
        }
        let dist = entry_after_one_step(chain, s, &is_stop, &stop_states)?;
        rows.push(
            stop_states
                .iter()
                .zip(dist)
                .filter(|(_, p)| !p.is_zero())
                .map(|(&t, p)| (pos[t], p))
                .collect(),
        );
    }
    let labels = states.iter().map(|&s| chain.label(s).to_string()).collect();
    Ok(Traced {
        chain: MarkovChain::from_sparse(labels, rows)?,
        origin: states.into_iter().map(Some).collect(),
    })
}

fn trace_exclude_current<S: Scalar>(
    chain: &MarkovChain<S>,
    subset: &StateSet,
    target: &StateSet,
) -> Result<Traced<S>> {
    let n = chain.len();
    let mut killing = target.clone();
    if let Some(d) = chain.absorbing() {
        killing.insert(d);
    }
    let kept: Vec<usize> = subset.iter().filter(|&s| !killing.contains(s)).collect();
    if kept.is_empty() {
        return Err(Error::Precondition("every traced state lies in the target".into()));
    }
    let has_cemetery = !killing.is_empty();
    let m = kept.len() + usize::from(has_cemetery);
    let mut rows: Vec<Vec<(usize, S)>> = Vec::with_capacity(m);
    for (i, &x) in kept.iter().enumerate() {
        let mut is_stop = killing.mask(n);
        for &y in &kept {
            if y != x {
                is_stop[y] = true;
            }
        }
        let stops: Vec<usize> = (0..n).filter(|&s| is_stop[s]).collect();
        if !reachability_closure(chain, &stops.iter().copied().collect()).contains(x) {
            return Err(Error::Singular(format!(
                "from {} the rest of the traced subset is not reached almost surely",
                chain.label(x)
            )));
        }
        let dist = entry_after_one_step(chain, x, &is_stop, &stops)?;
        let mut row: Vec<(usize, S)> = Vec::new();
        let mut killed = S::zero();
        for (&t, p) in stops.iter().zip(dist) {
            if p.is_zero() {
                continue;
            }
            if killing.contains(t) {
                killed = killed + p;
            } else {
                let j = kept.binary_search(&t).expect("stop state is kept");
                row.push((j, p));
            }
        }
        if !killed.is_zero() {
            row.push((kept.len(), killed));
        }
        debug_assert!(row.iter().all(|(j, _)| *j != i));
        rows.push(row);
    }
    let mut labels: Vec<String> = kept.iter().map(|&s| chain.label(s).to_string()).collect();
    let mut origin: Vec<Option<usize>> = kept.iter().map(|&s| Some(s)).collect();
    if has_cemetery {
        let mut name = CEMETERY.to_string();
        while labels.contains(&name) {
            name.push('\'');
        }
        labels.push(name);
        origin.push(None);
        rows.push(vec![(kept.len(), S::one())]);
    }
    let mut traced = MarkovChain::from_sparse(labels, rows)?;
    if has_cemetery {
        traced = traced.with_absorbing(kept.len())?;
    }
    Ok(Traced { chain: traced, origin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    /// a ↔ b with escape 1/2 to the absorbing c.
    fn escape() -> MarkovChain<Rational> {
        build_chain(
            &["a", "b", "c"],
            vec![
                vec![r(0, 1), r(1, 2), r(1, 2)],
                vec![r(1, 2), r(0, 1), r(1, 2)],
                vec![r(0, 1), r(0, 1), r(1, 1)],
            ],
        )
        .unwrap()
    }

    fn line() -> MarkovChain<Rational> {
        build_chain(
            &["a", "b", "c"],
            vec![
                vec![r(0, 1), r(1, 1), r(0, 1)],
                vec![r(0, 1), r(0, 1), r(1, 1)],
                vec![r(0, 1), r(0, 1), r(1, 1)],
            ],
        )
        .unwrap()
    }

    fn path(v: &[usize]) -> FinitePath {
        FinitePath::new(v.to_vec()).unwrap()
    }

    #[test]
    fn green_examples() {
        let c = build_chain(&["x", "y"], vec![vec![r(0, 1), r(1, 1)], vec![r(1, 1), r(0, 1)]]).unwrap();
        assert_eq!(green(&c, &StateSet::from([0]), 0, 0).unwrap(), r(1, 1));
        let e = escape();
        let ab = StateSet::from([0, 1]);
        assert_eq!(green(&e, &ab, 0, 0).unwrap(), r(4, 3));
        assert_eq!(green(&e, &ab, 0, 1).unwrap(), r(2, 3));
        let t = GreenTable::new(&e, &ab).unwrap();
        assert_eq!(t.get(1, 0).unwrap(), r(2, 3));
        let l = line();
        assert_eq!(green(&l, &ab, 0, 0).unwrap(), r(1, 1));
        assert_eq!(green(&l, &ab, 0, 1).unwrap(), r(1, 1));
        assert_eq!(green(&l, &ab, 1, 0).unwrap(), r(0, 1));
        assert!(green(&l, &ab, 0, 2).is_err());
    }

    #[test]
    fn green_without_exit_is_singular() {
        let c = build_chain(
            &["a", "b", "c"],
            vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(green(&c, &StateSet::from([0, 1]), 0, 0), Err(Error::Singular(_))));
    }

    #[test]
    fn f_product_examples() {
        let e = escape();
        let ab = StateSet::from([0, 1]);
        assert_eq!(f_product(&e, &ab, &[1]).unwrap(), green(&e, &ab, 1, 1).unwrap());
        assert_eq!(f_product(&e, &ab, &[0, 1]).unwrap(), r(4, 3));
        assert_eq!(f_product(&e, &ab, &[1, 0]).unwrap(), r(4, 3));
    }

    #[test]
    fn product_formula_examples() {
        let e = escape();
        let a = StateSet::from([2]);
        assert_eq!(le_path_probability(&e, &a, &path(&[0, 2])).unwrap(), r(2, 3));
        assert_eq!(le_path_probability(&e, &a, &path(&[0, 1, 2])).unwrap(), r(1, 3));
        assert_eq!(le_path_probability(&line(), &a, &path(&[0, 1, 2])).unwrap(), r(1, 1));
        let total: Rational = admissible_paths(&e, 0, &a)
            .iter()
            .map(|w| le_path_probability(&e, &a, w).unwrap())
            .sum();
        assert_eq!(total, r(1, 1));
        assert!(le_path_probability(&e, &a, &path(&[0, 1, 0, 2])).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let l = line();
        let law = enumerate_erasure_law(&l, 0, &StateSet::from([2]), &Pipeline::LoopErasure, &Default::default())
            .unwrap();
        assert_eq!(law.support.len(), 1);
        assert_eq!(law.get(&path(&[0, 1, 2])), r(1, 1));
        assert_eq!(law.tail_bound, r(0, 1));

        let e = escape();
        let a = StateSet::from([2]);
        let le = enumerate_erasure_law(&e, 0, &a, &Pipeline::LoopErasure, &Default::default()).unwrap();
        // Mass of (a,c) is Σ_k 4^{-k}/2 truncated; exact closed forms differ
        // from the enumeration by at most the tail.
        let gap = (le.get(&path(&[0, 2])) - r(2, 3)).abs_val() + (le.get(&path(&[0, 1, 2])) - r(1, 3)).abs_val();
        assert!(gap <= le.tail_bound);
        assert_eq!(le.total_mass() + le.tail_bound.clone(), r(1, 1));
        let refined = enumerate_erasure_law(
            &e,
            0,
            &a,
            &Pipeline::Refinement(vec![StateSet::from([0]), StateSet::from([0, 1])]),
            &Default::default(),
        )
        .unwrap();
        assert!(le.total_variation(&refined) <= le.tail_bound.clone() + refined.tail_bound.clone());
    }

    #[test]
    fn enumeration_in_double_mode_and_guards() {
        let e = escape().to_f64();
        let a = StateSet::from([2]);
        let law = enumerate_erasure_law(&e, 0, &a, &Pipeline::LoopErasure, &ExactLawOptions::to_tolerance(1e-12, 200))
            .unwrap();
        assert!((law.get(&path(&[0, 2])) - 2.0 / 3.0).abs() < 1e-11);
        assert!((law.total_mass() + law.tail_bound - 1.0).abs() < 1e-12);
        let too_long = ExactLawOptions {
            length_cap: 41,
            ..Default::default()
        };
        assert!(matches!(
            enumerate_erasure_law(&e, 0, &a, &Pipeline::LoopErasure, &too_long),
            Err(Error::Guard(_))
        ));
        let strict = ExactLawOptions {
            length_cap: 4,
            tolerance: Some(1e-9),
            ..Default::default()
        };
        assert!(matches!(
            enumerate_erasure_law(&e, 0, &a, &Pipeline::LoopErasure, &strict),
            Err(Error::TailTooLarge { .. })
        ));
    }

    #[test]
    fn apriori_bound_dominates_residual() {
        let e = escape();
        let a = StateSet::from([2]);
        for cap in [3, 6, 12, 24] {
            let opts = ExactLawOptions {
                length_cap: cap,
                ..Default::default()
            };
            let law = enumerate_erasure_law(&e, 0, &a, &Pipeline::LoopErasure, &opts).unwrap();
            assert!(Scalar::to_f64(&law.tail_bound) <= apriori_tail_bound(&e, &a, cap));
        }
    }

    #[test]
    fn cycle_trace_with_killing() {
        // SRW on the 4-cycle a-b-c-d, killed at d, traced on {a, c}.
        let h = r(1, 2);
        let z = r(0, 1);
        let c = build_chain(
            &["a", "b", "c", "d"],
            vec![
                vec![z.clone(), h.clone(), z.clone(), h.clone()],
                vec![h.clone(), z.clone(), h.clone(), z.clone()],
                vec![z.clone(), h.clone(), z.clone(), h.clone()],
                vec![h.clone(), z.clone(), h.clone(), z.clone()],
            ],
        )
        .unwrap();
        let t = traced_kernel(&c, &StateSet::from([0, 2]), &StateSet::from([3]), TraceVariant::ExcludeCurrent).unwrap();
        let (ia, ic, id) = (t.position(0).unwrap(), t.position(2).unwrap(), t.cemetery().unwrap());
        assert_eq!(t.chain.prob(ia, ic), r(1, 3));
        assert_eq!(t.chain.prob(ia, id), r(2, 3));
        assert_eq!(t.chain.label(id), CEMETERY);

        let full = traced_kernel(&c, &StateSet::full(4), &StateSet::empty(), TraceVariant::ExcludeCurrent).unwrap();
        assert_eq!(full.chain.dense_rows(), c.dense_rows());
    }
}
