//! Metrics on compact sets and path laws, and the experiments that probe the
//! scaling limit of loop erasure on fractal graphs.

use std::collections::{BTreeMap, VecDeque};

use crate::chain::{EntrySampler, FinitePath, MarkovChain, StateSet};
use crate::erasure::{loop_erase, refinement_erase};
use crate::error::{Error, Result};
use crate::exactlaw::{Pipeline, CEMETERY};
use crate::fractal::{carpet_graph, gasket_graph, uniform_network, FractalGraph, FractalKind};
use crate::network::{effective_resistance, trace_network, walk_from_network};
use crate::rng::{parallel_map, trajectory_rng};
use crate::scalar::{Rational, Scalar};

/// Largest `|support_1| · |support_2|` accepted by [`prokhorov`].
pub const PROKHOROV_PAIR_CAP: usize = 4_000_000;

/// Planar frame of lattice coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Frame {
    Cartesian,
    /// Skew coordinates over the unit equilateral triangle.
    Triangular,
}

/// A non-empty finite planar set with exact lattice coordinates.
///
/// The representation is canonical: points are sorted and deduplicated, and
/// the common factor of the scale and every coordinate is divided out, so
/// equal sets compare and hash equal whatever level they came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointSet {
    frame: Frame,
    scale: u64,
    points: Vec<(u64, u64)>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl PointSet {
    pub fn new(frame: Frame, scale: u64, points: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut points: Vec<(u64, u64)> = points.into_iter().collect();
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if scale == 0 {
            return Err(Error::Precondition("scale must be positive".into()));
        }
        let g = points.iter().fold(scale, |g, &(a, b)| gcd(gcd(g, a), b));
        for p in &mut points {
            *p = (p.0 / g, p.1 / g);
        }
        points.sort_unstable();
        points.dedup();
        Ok(PointSet {
            frame,
            scale: scale / g,
            points,
        })
    }

    /// The image of a path of vertex ids.
    pub fn from_path(graph: &FractalGraph, path: &[usize]) -> Result<Self> {
        let frame = match graph.kind() {
            FractalKind::Gasket => Frame::Triangular,
            FractalKind::Carpet(_) => Frame::Cartesian,
        };
        PointSet::new(frame, graph.scale(), path.iter().map(|&v| graph.lattice(v)))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn lattice_points(&self) -> &[(u64, u64)] {
        &self.points
    }

    pub fn positions(&self) -> Vec<(f64, f64)> {
        let s = self.scale as f64;
        self.points
            .iter()
            .map(|&(a, b)| match self.frame {
                Frame::Cartesian => (a as f64 / s, b as f64 / s),
                Frame::Triangular => ((a as f64 + b as f64 / 2.0) / s, b as f64 * 3f64.sqrt() / 2.0 / s),
            })
            .collect()
    }

    /// Whether every point of `self` lies in `other`.
    pub fn is_subset(&self, other: &PointSet) -> bool {
        if self.frame != other.frame {
            return false;
        }
        let l = self.scale / gcd(self.scale, other.scale) * other.scale;
        let (fs, fo) = (l / self.scale, l / other.scale);
        let theirs: std::collections::HashSet<(u64, u64)> =
            other.points.iter().map(|&(a, b)| (a * fo, b * fo)).collect();
        self.points.iter().all(|&(a, b)| theirs.contains(&(a * fs, b * fs)))
    }
}

/// Hausdorff distance between two point sets in the Euclidean metric.
pub fn hausdorff(a: &PointSet, b: &PointSet) -> f64 {
    let pa = a.positions();
    let pb = b.positions();
    hausdorff_by(&pa, &pb, |p, q| (p.0 - q.0).hypot(p.1 - q.1)).expect("point sets are non-empty")
}

/// Hausdorff distance for any ground metric.
pub fn hausdorff_by<T, F>(a: &[T], b: &[T], metric: F) -> Result<f64>
where
    F: Fn(&T, &T) -> f64,
{
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let directed = |from: &[T], to: &[T], floor: f64| {
        let mut worst = floor;
        for p in from {
            let mut nearest = f64::INFINITY;
            for q in to {
                nearest = nearest.min(metric(p, q));
                // This point cannot raise the maximum any further.
                if nearest <= worst {
                    break;
                }
            }
            worst = worst.max(nearest);
        }
        worst
    };
    let one = directed(a, b, 0.0);
    Ok(directed(b, a, one))
}

/// Sample counts over hashable outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalLaw<K: Ord> {
    atoms: BTreeMap<K, u64>,
    total: u64,
}

/// Law of images of erased paths.
pub type EmpiricalSetLaw = EmpiricalLaw<PointSet>;

impl<K: Ord> Default for EmpiricalLaw<K> {
    fn default() -> Self {
        EmpiricalLaw {
            atoms: BTreeMap::new(),
            total: 0,
        }
    }
}

impl<K: Ord> FromIterator<K> for EmpiricalLaw<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut law = EmpiricalLaw::default();
        for k in iter {
            law.add(k);
        }
        law
    }
}

impl<K: Ord> EmpiricalLaw<K> {
    pub fn add(&mut self, outcome: K) {
        *self.atoms.entry(outcome).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn atoms(&self) -> &BTreeMap<K, u64> {
        &self.atoms
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn probability(&self, outcome: &K) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.atoms.get(outcome).copied().unwrap_or(0) as f64 / self.total as f64
    }

    /// `(outcome, frequency)` pairs in key order.
    pub fn weighted(&self) -> Vec<(&K, f64)> {
        self.atoms
            .iter()
            .map(|(k, &c)| (k, c as f64 / self.total as f64))
            .collect()
    }

    pub fn total_variation(&self, other: &EmpiricalLaw<K>) -> f64 {
        let mut sum = 0.0;
        for (k, _) in &self.atoms {
            sum += (self.probability(k) - other.probability(k)).abs();
        }
        for (k, _) in &other.atoms {
            if !self.atoms.contains_key(k) {
                sum += other.probability(k);
            }
        }
        sum / 2.0
    }

    /// Outcomes seen in either law.
    pub fn joint_support(&self, other: &EmpiricalLaw<K>) -> usize {
        self.atoms.len() + other.atoms.keys().filter(|k| !self.atoms.contains_key(k)).count()
    }

    /// Allowed TV between two samples of one law: `4·sqrt(S/N)` with `S` the
    /// joint support and `N` the smaller sample.
    pub fn tv_tolerance(&self, other: &EmpiricalLaw<K>) -> f64 {
        let n = self.total.min(other.total).max(1) as f64;
        4.0 * (self.joint_support(other) as f64 / n).sqrt()
    }
}

/// Prokhorov distance between two finitely supported laws of point sets in
/// the Hausdorff metric.
pub fn prokhorov(p: &EmpiricalSetLaw, q: &EmpiricalSetLaw) -> Result<f64> {
    let a = p.weighted();
    let b = q.weighted();
    prokhorov_by(&a, &b, |x, y| hausdorff(x, y))
}

/// Prokhorov distance for weighted atoms and any ground metric.
///
/// For a candidate `ε`, Strassen's theorem makes `μ(F) ≤ ν(F^ε) + ε` for
/// every `F` equivalent to a transport of mass at least `1 − ε` along pairs
/// at distance below `ε`, which is a bipartite max-flow. The flow value only
/// changes at the pairwise distances `d_0 < d_1 < …`; on `(d_j, d_{j+1}]` it
/// equals the flow `f_j` along pairs with `d ≤ d_j`, so the distance is
/// exactly `min(1, min_j max(d_j, 1 − f_j))`. The flow is symmetric in the
/// two laws, so both one-sided conditions hold together.
pub fn prokhorov_by<K, F>(p: &[(K, f64)], q: &[(K, f64)], metric: F) -> Result<f64>
where
    F: Fn(&K, &K) -> f64,
{
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyInput);
    }
    if p.len().saturating_mul(q.len()) > PROKHOROV_PAIR_CAP {
        return Err(Error::Guard(format!(
            "{} x {} atom pairs exceed the cap {PROKHOROV_PAIR_CAP}",
            p.len(),
            q.len()
        )));
    }
    let dist: Vec<Vec<f64>> = p.iter().map(|(x, _)| q.iter().map(|(y, _)| metric(x, y)).collect()).collect();
    let mut levels: Vec<f64> = dist.iter().flatten().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mass_p: Vec<f64> = p.iter().map(|(_, w)| *w).collect();
    let mass_q: Vec<f64> = q.iter().map(|(_, w)| *w).collect();
    // Masses are sums of floating weights; treat rounding-level shortfall as none.
    let flow_at = |j: usize| {
        let f = transport_flow(&mass_p, &mass_q, &dist, levels[j]);
        if 1.0 - f < 1e-12 {
            1.0
        } else {
            f
        }
    };
    let score = |j: usize| levels[j].max(1.0 - flow_at(j));
    // `d_j` increases and `1 − f_j` decreases: find where they cross.
    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if levels[mid] >= 1.0 - flow_at(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut best = score(lo);
    if lo > 0 {
        best = best.min(score(lo - 1));
    }
    Ok(best.clamp(0.0, 1.0))
}

/// Largest mass movable from `p` to `q` along pairs with `dist ≤ radius`.
fn transport_flow(p: &[f64], q: &[f64], dist: &[Vec<f64>], radius: f64) -> f64 {
    let (np, nq) = (p.len(), q.len());
    let source = np + nq;
    let sink = source + 1;
    let mut flow = MaxFlow::new(np + nq + 2);
    for (i, &w) in p.iter().enumerate() {
        flow.add_edge(source, i, w);
    }
    for (j, &w) in q.iter().enumerate() {
        flow.add_edge(np + j, sink, w);
    }
    for (i, row) in dist.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            if d <= radius {
                flow.add_edge(i, np + j, f64::INFINITY);
            }
        }
    }
    flow.run(source, sink)
}

/// Dinic's algorithm on real capacities.
struct MaxFlow {
    to: Vec<usize>,
    cap: Vec<f64>,
    head: Vec<Vec<usize>>,
}

const FLOW_EPS: f64 = 1e-15;

impl MaxFlow {
    fn new(n: usize) -> Self {
        MaxFlow {
            to: Vec::new(),
            cap: Vec::new(),
            head: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
    }

    fn run(&mut self, s: usize, t: usize) -> f64 {
        let n = self.head.len();
        let mut total = 0.0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.head[u] {
                    let v = self.to[e];
                    if self.cap[e] > FLOW_EPS && level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; n];
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut next);
                if pushed <= FLOW_EPS {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(&mut self, u: usize, t: usize, limit: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if u == t {
            return limit;
        }
        while next[u] < self.head[u].len() {
            let e = self.head[u][next[u]];
            let v = self.to[e];
            if self.cap[e] > FLOW_EPS && level[v] == level[u] + 1 {
                let pushed = self.augment(v, t, limit.min(self.cap[e]), level, next);
                if pushed > FLOW_EPS {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0.0
    }
}

/// How many trajectories to draw and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOptions {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; `0` uses the global pool. Results never depend on it.
    pub workers: usize,
    pub step_cap: u64,
}

impl SampleOptions {
    pub fn new(samples: u64, seed: u64) -> Self {
        SampleOptions {
            samples,
            seed,
            workers: 0,
            step_cap: crate::chain::DEFAULT_STEP_CAP,
        }
    }
}

/// Apply a pipeline to one trajectory.
pub fn apply_pipeline(pipeline: &Pipeline, walk: &FinitePath) -> Result<FinitePath> {
    match pipeline {
        Pipeline::LoopErasure => Ok(loop_erase(walk).path),
        Pipeline::Refinement(sets) => refinement_erase(walk, sets),
    }
}

/// Draw `X|[0,τ_A]` from `start` for each trajectory index, erase it with
/// `pipeline` and hand `(walk, erased)` to `visit`. Results come back in
/// trajectory order.
pub fn sample_erasures<S, R, F>(
    chain: &MarkovChain<S>,
    start: usize,
    target: &StateSet,
    pipeline: &Pipeline,
    options: &SampleOptions,
    visit: F,
) -> Result<Vec<R>>
where
    S: Scalar,
    R: Send,
    F: Fn(&FinitePath, FinitePath) -> R + Sync + Send,
{
    let sampler = EntrySampler::new(chain, target)?.with_step_cap(options.step_cap);
    if !sampler.can_start(start) {
        return Err(Error::UnreachableTarget(start));
    }
    pipeline.stages(chain.len())?;
    parallel_map(options.samples, options.workers, |i| {
        let walk = sampler.sample(start, &mut trajectory_rng(options.seed, i))?;
        let erased = apply_pipeline(pipeline, &walk)?;
        Ok(visit(&walk, erased))
    })
    .into_iter()
    .collect()
}

/// An empirical law of erased-path images with per-sample sanity counts.
#[derive(Debug, Clone)]
pub struct SetLawRun {
    pub law: EmpiricalSetLaw,
    /// Outputs that are self-avoiding.
    pub simple: u64,
    /// Outputs that start at `x` and meet `A` exactly once, at the end.
    pub endpoints_ok: u64,
}

pub fn lerw_set_law<S: Scalar>(
    graph: &FractalGraph,
    chain: &MarkovChain<S>,
    start: usize,
    target: &StateSet,
    pipeline: &Pipeline,
    options: &SampleOptions,
) -> Result<SetLawRun> {
    let outcomes = sample_erasures(chain, start, target, pipeline, options, |_, erased| {
        let simple = erased.is_self_avoiding();
        let ok = *erased.first() == start && endpoints_ok(&erased, target);
        (PointSet::from_path(graph, &erased), simple, ok)
    })?;
    let mut run = SetLawRun {
        law: EmpiricalLaw::default(),
        simple: 0,
        endpoints_ok: 0,
    };
    for (image, simple, ok) in outcomes {
        run.law.add(image?);
        run.simple += u64::from(simple);
        run.endpoints_ok += u64::from(ok);
    }
    Ok(run)
}

fn endpoints_ok(path: &FinitePath, target: &StateSet) -> bool {
    let hits = path.iter().filter(|&&s| target.contains(s)).count();
    hits == 1 && target.contains(*path.last())
}

/// Order statistics of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            // Linear interpolation between closest ranks.
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Ok(Summary {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Per-sample `d_H` between the coarse and fine refinement images.
#[derive(Debug, Clone)]
pub struct CoupledDistances {
    pub coarse: usize,
    pub fine: usize,
    pub distances: Vec<f64>,
    pub summary: Summary,
}

/// Sample the walk on `graph` (level `m′`) and erase each trajectory along
/// `V_1 ⊆ … ⊆ V_m` and along `V_1 ⊆ … ⊆ V_{m′}`; the second image is always
/// contained in the first, and their distance measures how much the coarse
/// erasure leaves to be removed.
pub fn coupled_refinement_distance(
    graph: &FractalGraph,
    coarse: usize,
    start: usize,
    target: &StateSet,
    options: &SampleOptions,
) -> Result<CoupledDistances> {
    let fine = graph.level();
    if coarse == 0 || coarse > fine {
        return Err(Error::Precondition(format!("need 1 ≤ m ≤ m′ = {fine}, got m = {coarse}")));
    }
    let chain = walk_from_network(&uniform_network::<f64>(graph));
    let coarse_sets: Vec<StateSet> = (1..=coarse).map(|j| graph.nested(j)).collect();
    let fine_pipeline = Pipeline::Refinement((1..=fine).map(|j| graph.nested(j)).collect());
    let distances = sample_erasures(&chain, start, target, &fine_pipeline, options, |walk, fine_path| {
        let coarse_path = refinement_erase(walk, &coarse_sets)?;
        let a = PointSet::from_path(graph, &coarse_path)?;
        let b = PointSet::from_path(graph, &fine_path)?;
        Ok(hausdorff(&a, &b))
    })?
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let summary = Summary::of(&distances)?;
    Ok(CoupledDistances {
        coarse,
        fine,
        distances,
        summary,
    })
}

/// Build the level-`m` graph of a fractal.
pub fn fractal_graph(kind: &FractalKind, m: usize) -> Result<FractalGraph> {
    match kind {
        FractalKind::Gasket => gasket_graph(m),
        FractalKind::Carpet(t) => carpet_graph(t, m),
    }
}

/// Lattice points per unit length at level 1.
fn base(kind: &FractalKind) -> u64 {
    match kind {
        FractalKind::Gasket => 2,
        FractalKind::Carpet(t) => t.k() as u64,
    }
}

/// Effective resistances across levels for fixed probe pairs.
#[derive(Debug, Clone)]
pub struct ScalingTable<S> {
    pub levels: Vec<usize>,
    /// `resistances[p][i]`: pair `p` at `levels[i]`.
    pub resistances: Vec<Vec<S>>,
    /// `ratios[p][i] = R_{levels[i+1]} / R_{levels[i]}`.
    pub ratios: Vec<Vec<S>>,
    /// Euclidean distance of each pair.
    pub distances: Vec<f64>,
    /// `log R_m` slope in `m` divided by `log k`, averaged over pairs.
    pub gamma_hat: f64,
    /// Extremes of `k^{-mγ̂} R_m / d^γ̂` over pairs and levels.
    pub c1: f64,
    pub c2: f64,
}

impl<S: Scalar> ScalingTable<S> {
    /// Relative spread `(max − min) / min` of one pair's ratios.
    pub fn ratio_band(&self, pair: usize) -> f64 {
        let r: Vec<f64> = self.ratios[pair].iter().map(Scalar::to_f64).collect();
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / lo
    }

    /// Whether every ratio of the pair is the same value.
    pub fn ratios_identical(&self, pair: usize) -> bool {
        self.ratios[pair].windows(2).all(|w| w[0] == w[1])
    }

    /// `0 < C1 ≤ C2 < ∞`.
    pub fn envelope_nondegenerate(&self) -> bool {
        self.c1 > 0.0 && self.c1 <= self.c2 && self.c2.is_finite()
    }
}

/// Exact frame coordinates of a probe point.
pub type Probe = (Rational, Rational);

/// `R_m(x, y)` on the level-`m` graphs for each probe pair, with successive
/// ratios and the two-sided power-law envelope they imply.
pub fn resistance_scaling<S: Scalar>(
    kind: &FractalKind,
    levels: &[usize],
    pairs: &[(Probe, Probe)],
) -> Result<ScalingTable<S>> {
    if levels.len() < 2 || pairs.is_empty() {
        return Err(Error::Precondition("need two levels and one probe pair".into()));
    }
    let mut resistances = vec![Vec::new(); pairs.len()];
    let mut distances = vec![0.0; pairs.len()];
    for &m in levels {
        let graph = fractal_graph(kind, m)?;
        let net = uniform_network::<S>(&graph);
        for (p, (a, b)) in pairs.iter().enumerate() {
            let locate = |pt: &Probe| {
                graph
                    .locate(&pt.0, &pt.1)
                    .ok_or_else(|| Error::Precondition(format!("probe ({}, {}) is not a vertex at level {m}", pt.0, pt.1)))
            };
            let (x, y) = (locate(a)?, locate(b)?);
            if x == y {
                return Err(Error::Precondition("probe pair has equal endpoints".into()));
            }
            distances[p] = graph.distance(x, y);
            resistances[p].push(effective_resistance(&net, x, y)?);
        }
    }
    let ratios: Vec<Vec<S>> = resistances
        .iter()
        .map(|r| r.windows(2).map(|w| w[1].clone() / w[0].clone()).collect())
        .collect();
    let log_k = (base(kind) as f64).ln();
    let ms: Vec<f64> = levels.iter().map(|&m| m as f64).collect();
    let gamma_hat = resistances
        .iter()
        .map(|r| {
            let logs: Vec<f64> = r.iter().map(|v| v.to_f64().ln()).collect();
            least_squares_slope(&ms, &logs) / log_k
        })
        .sum::<f64>()
        / pairs.len() as f64;
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    for (p, r) in resistances.iter().enumerate() {
        for (i, v) in r.iter().enumerate() {
            let q = (-(levels[i] as f64) * gamma_hat * log_k).exp() * v.to_f64() / distances[p].powf(gamma_hat);
            c1 = c1.min(q);
            c2 = c2.max(q);
        }
    }
    Ok(ScalingTable {
        levels: levels.to_vec(),
        resistances,
        ratios,
        distances,
        gamma_hat,
        c1,
        c2,
    })
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Traced kernels of the level-`m′` walks on `V_m`, killed at `y`.
#[derive(Debug, Clone)]
pub struct KernelTable<S> {
    pub levels: Vec<usize>,
    /// Labels of `V_m ∖ {y}` followed by the cemetery.
    pub states: Vec<String>,
    /// `kernels[i][a][b]` for `levels[i]`; the cemetery row is omitted.
    pub kernels: Vec<Vec<Vec<S>>>,
    /// Largest entrywise change between consecutive levels.
    pub differences: Vec<f64>,
}

impl<S> KernelTable<S> {
    /// Strict decrease of the successive differences.
    pub fn strictly_decreasing(&self) -> bool {
        self.differences.windows(2).all(|w| w[1] < w[0])
    }
}

/// For each `m′` in `levels`, the walk on `G_{m′}` watched only on `V_m`
/// (consecutive distinct visits), killed on reaching `y`. Its kernel comes
/// from the trace of the unit network onto `V_m`.
pub fn kernel_convergence<S: Scalar>(
    kind: &FractalKind,
    m: usize,
    y: usize,
    levels: &[usize],
) -> Result<KernelTable<S>> {
    if levels.iter().any(|&l| l < m) || levels.is_empty() {
        return Err(Error::Precondition(format!("levels must be at least m = {m}")));
    }
    let base_graph = fractal_graph(kind, m)?;
    let size = base_graph.len();
    if y >= size {
        return Err(Error::StateOutOfRange(y));
    }
    let kept: Vec<usize> = (0..size).filter(|&v| v != y).collect();
    let mut states: Vec<String> = kept.iter().map(|&v| base_graph.label(v).to_string()).collect();
    states.push(CEMETERY.to_string());
    let mut kernels = Vec::new();
    for &level in levels {
        let graph = fractal_graph(kind, level)?;
        let net = uniform_network::<S>(&graph);
        let traced = if level == m {
            net
        } else {
            trace_network(&net, &graph.nested(m))?
        };
        // Vertex ids of V_m agree across levels, so `traced` is indexed by them.
        let kernel: Vec<Vec<S>> = kept
            .iter()
            .map(|&a| {
                let total = traced.weight(a);
                let mut row: Vec<S> = kept.iter().map(|&b| traced.conductance(a, b) / total.clone()).collect();
                row.push(traced.conductance(a, y) / total);
                row
            })
            .collect();
        kernels.push(kernel);
    }
    let differences = kernels
        .windows(2)
        .map(|w| {
            w[0].iter()
                .flatten()
                .zip(w[1].iter().flatten())
                .map(|(a, b)| (a.clone() - b.clone()).to_f64().abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(KernelTable {
        levels: levels.to_vec(),
        states,
        kernels,
        differences,
    })
}
