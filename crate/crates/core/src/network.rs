//! Electrical networks: conductances, the reversible walks they induce,
//! effective resistance, harmonic extension and the Schur-complement trace.
//!
//! Exact networks are solved by Gaussian elimination over rationals. Double
//! networks use dense elimination up to [`DENSE_LIMIT`] unknowns and
//! Jacobi-preconditioned conjugate gradients beyond it.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::chain::{MarkovChain, StateSet};
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, solve, CsrMatrix, DenseMatrix};
use crate::scalar::Scalar;

/// Largest interior (unknown count) solved densely in double mode.
pub const DENSE_LIMIT: usize = 800;

/// Relative residual target for iterative double-mode solves.
pub const CG_TOLERANCE: f64 = 1e-13;

/// A finite connected network with symmetric positive conductances.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectricalNetwork<S> {
    labels: Vec<String>,
    /// Conductance per unordered pair, keyed `(min, max)`.
    conductances: BTreeMap<(usize, usize), S>,
    adjacency: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> ElectricalNetwork<S> {
    /// Build from `(u, v, c_uv)` triples. Loops, non-positive conductances,
    /// repeated pairs and disconnected graphs are rejected.
    pub fn new(labels: Vec<String>, edges: Vec<(usize, usize, S)>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("no vertices".into()));
        }
        let mut conductances = BTreeMap::new();
        for (u, v, c) in edges {
            if u >= n || v >= n {
                return Err(Error::StateOutOfRange(u.max(v)));
            }
            if u == v {
                return Err(Error::InvalidNetwork(format!("loop at {}", labels[u])));
            }
            if c <= S::zero() {
                return Err(Error::InvalidNetwork(format!(
                    "conductance between {} and {} is not positive",
                    labels[u], labels[v]
                )));
            }
            if conductances.insert((u.min(v), u.max(v)), c).is_some() {
                return Err(Error::InvalidNetwork(format!(
                    "pair {} {} listed twice",
                    labels[u], labels[v]
                )));
            }
        }
        let net = Self::from_map(labels, conductances);
        if !net.is_connected() {
            return Err(Error::InvalidNetwork("graph is disconnected".into()));
        }
        Ok(net)
    }

    fn from_map(labels: Vec<String>, conductances: BTreeMap<(usize, usize), S>) -> Self {
        let mut adjacency = vec![Vec::new(); labels.len()];
        for (&(u, v), c) in &conductances {
            adjacency[u].push((v, c.clone()));
            adjacency[v].push((u, c.clone()));
        }
        for row in &mut adjacency {
            row.sort_by_key(|(v, _)| *v);
        }
        ElectricalNetwork {
            labels,
            conductances,
            adjacency,
        }
    }

    /// Unit conductance on every edge.
    pub fn unit(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(labels, edges.iter().map(|&(u, v)| (u, v, S::one())).collect())
    }

    fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for (v, _) in &self.adjacency[u] {
                if !seen[*v] {
                    seen[*v] = true;
                    count += 1;
                    queue.push_back(*v);
                }
            }
        }
        count == n
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

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub fn conductance(&self, u: usize, v: usize) -> S {
        self.conductances
            .get(&(u.min(v), u.max(v)))
            .cloned()
            .unwrap_or_else(S::zero)
    }

    /// Every edge once, as `((u, v), c)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (&(usize, usize), &S)> {
        self.conductances.iter()
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, S)] {
        &self.adjacency[u]
    }

    /// `c_x = Σ_y c_{xy}`.
    pub fn weight(&self, x: usize) -> S {
        self.adjacency[x].iter().fold(S::zero(), |a, (_, c)| a + c.clone())
    }

    pub fn to_f64(&self) -> ElectricalNetwork<f64> {
        ElectricalNetwork::from_map(
            self.labels.clone(),
            self.conductances.iter().map(|(k, c)| (*k, c.to_f64())).collect(),
        )
    }
}

/// The walk `P(x,y) = c_{xy} / c_x`, reversible with respect to `c_x`.
pub fn walk_from_network<S: Scalar>(net: &ElectricalNetwork<S>) -> MarkovChain<S> {
    let rows = (0..net.len())
        .map(|x| {
            let cx = net.weight(x);
            net.neighbors(x)
                .iter()
                .map(|(y, c)| (*y, c.clone() / cx.clone()))
                .collect()
        })
        .collect();
    MarkovChain::from_sparse(net.labels.clone(), rows).expect("rows of a connected network sum to one")
}

/// Solve the Dirichlet problem: harmonic off `boundary`, prescribed on it.
pub fn harmonic_extension<S: Scalar>(net: &ElectricalNetwork<S>, boundary: &[(usize, S)]) -> Result<Vec<S>> {
    let n = net.len();
    if boundary.is_empty() {
        return Err(Error::Precondition("boundary set must be non-empty".into()));
    }
    let mut fixed: Vec<Option<S>> = vec![None; n];
    for (v, val) in boundary {
        if *v >= n {
            return Err(Error::StateOutOfRange(*v));
        }
        fixed[*v] = Some(val.clone());
    }
    let interior: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    check_interior_contact(net, &fixed)?;
    let data: Vec<(usize, S)> = fixed
        .iter()
        .enumerate()
        .filter_map(|(v, f)| f.clone().map(|val| (v, val)))
        .collect();
    let values = solve_interior_columns(net, &interior, &[data])?;
    Ok((0..n)
        .map(|v| match &fixed[v] {
            Some(val) => val.clone(),
            None => values[interior.binary_search(&v).expect("interior vertex")][0].clone(),
        })
        .collect())
}

/// Every interior component must touch the boundary, or the problem is
/// singular.
fn check_interior_contact<S: Scalar>(net: &ElectricalNetwork<S>, fixed: &[Option<S>]) -> Result<()> {
    let n = net.len();
    let mut reached = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| fixed[v].is_some()).collect();
    for &v in &queue {
        reached[v] = true;
    }
    while let Some(u) = queue.pop_front() {
        for (v, _) in net.neighbors(u) {
            if !reached[*v] {
                reached[*v] = true;
                queue.push_back(*v);
            }
        }
    }
    match reached.iter().position(|r| !r) {
        Some(v) => Err(Error::Singular(format!(
            "vertex {} has no path to the boundary",
            net.label(v)
        ))),
        None => Ok(()),
    }
}

/// For each column, boundary data as `(vertex, value)`; all other boundary
/// vertices (those not in `interior`) are zero. Returns `u[i][col]`.
fn solve_interior_columns<S: Scalar>(
    net: &ElectricalNetwork<S>,
    interior: &[usize],
    columns: &[Vec<(usize, S)>],
) -> Result<Vec<Vec<S>>> {
    let n = net.len();
    let m = interior.len();
    let k = columns.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in interior.iter().enumerate() {
        pos[v] = i;
    }
    // rhs[i][col] = Σ_{b boundary} c_{v_i b} g_col(b)
    let mut rhs = vec![vec![S::zero(); k]; m];
    for (col, data) in columns.iter().enumerate() {
        for (b, g) in data {
            if g.is_zero() {
                continue;
            }
            for (v, c) in net.neighbors(*b) {
                if pos[*v] != usize::MAX {
                    let i = pos[*v];
                    rhs[i][col] = rhs[i][col].clone() + c.clone() * g.clone();
                }
            }
        }
    }
    if S::is_exact() || m <= DENSE_LIMIT {
        let mut a: DenseMatrix<S> = DenseMatrix::zeros(m, m);
        for (i, &v) in interior.iter().enumerate() {
            a.set(i, i, net.weight(v));
            for (w, c) in net.neighbors(v) {
                if pos[*w] != usize::MAX {
                    let j = pos[*w];
                    let cur = a.get(i, j).clone() - c.clone();
                    a.set(i, j, cur);
                }
            }
        }
        let b = DenseMatrix::from_rows(rhs)?;
        let x = solve(&a, &b)?;
        return Ok((0..m).map(|i| x.row(i).to_vec()).collect());
    }
    let rows: Vec<Vec<(usize, f64)>> = interior
        .iter()
        .map(|&v| {
            let mut row = vec![(pos[v], net.weight(v).to_f64())];
            for (w, c) in net.neighbors(v) {
                if pos[*w] != usize::MAX {
                    row.push((pos[*w], -c.to_f64()));
                }
            }
            row
        })
        .collect();
    let a = CsrMatrix::from_rows(rows);
    let mut out = vec![vec![S::zero(); k]; m];
    for col in 0..k {
        let b: Vec<f64> = rhs.iter().map(|r| r[col].to_f64()).collect();
        let x = conjugate_gradient(&a, &b, CG_TOLERANCE)?;
        for (i, xi) in x.into_iter().enumerate() {
            out[i][col] = S::from_f64_lossy(xi);
        }
    }
    Ok(out)
}

/// Effective resistance between disjoint non-empty vertex sets.
pub fn effective_resistance_between<S: Scalar>(
    net: &ElectricalNetwork<S>,
    source: &StateSet,
    sink: &StateSet,
) -> Result<S> {
    if source.is_empty() || sink.is_empty() {
        return Err(Error::Precondition("both sets must be non-empty".into()));
    }
    if source.iter().any(|v| sink.contains(v)) {
        return Err(Error::Precondition("the sets must be disjoint".into()));
    }
    let mut boundary: Vec<(usize, S)> = source.iter().map(|v| (v, S::one())).collect();
    boundary.extend(sink.iter().map(|v| (v, S::zero())));
    let h = harmonic_extension(net, &boundary)?;
    // Current leaving the source.
    let mut current = S::zero();
    for x in source.iter() {
        for (y, c) in net.neighbors(x) {
            current = current + c.clone() * (S::one() - h[*y].clone());
        }
    }
    if current.is_negligible(1.0) || current <= S::zero() {
        return Err(Error::Singular("no current flows between the sets".into()));
    }
    Ok(S::one() / current)
}

pub fn effective_resistance<S: Scalar>(net: &ElectricalNetwork<S>, x: usize, y: usize) -> Result<S> {
    if x == y {
        return Ok(S::zero());
    }
    effective_resistance_between(net, &StateSet::from([x]), &StateSet::from([y]))
}

pub fn effective_resistance_to_set<S: Scalar>(net: &ElectricalNetwork<S>, x: usize, target: &StateSet) -> Result<S> {
    if target.contains(x) {
        return Ok(S::zero());
    }
    effective_resistance_between(net, &StateSet::from([x]), target)
}

/// The network on `subset` whose effective resistances agree with `net` on
/// every pair of `subset` (Schur complement of the Laplacian).
pub fn trace_network<S: Scalar>(net: &ElectricalNetwork<S>, subset: &StateSet) -> Result<ElectricalNetwork<S>> {
    let n = net.len();
    if subset.len() < 2 {
        return Err(Error::Precondition("trace needs at least two vertices".into()));
    }
    if let Some(bad) = subset.iter().find(|&v| v >= n) {
        return Err(Error::StateOutOfRange(bad));
    }
    let kept: Vec<usize> = subset.iter().collect();
    let conductances = if S::is_exact() {
        star_mesh(net, subset)
    } else {
        schur_by_columns(net, &kept)?
    };
    let mut map = BTreeMap::new();
    let mut new_index = vec![usize::MAX; n];
    for (i, &v) in kept.iter().enumerate() {
        new_index[v] = i;
    }
    for ((u, v), c) in conductances {
        if !c.is_negligible(1.0) && c > S::zero() {
            let (a, b) = (new_index[u], new_index[v]);
            map.insert((a.min(b), a.max(b)), c);
        }
    }
    let labels = kept.iter().map(|&v| net.labels[v].clone()).collect();
    let traced = ElectricalNetwork::from_map(labels, map);
    if !traced.is_connected() {
        return Err(Error::InvalidNetwork("trace is disconnected".into()));
    }
    Ok(traced)
}

/// Eliminate the vertices outside `subset` one at a time, smallest degree
/// first: removing `z` adds `c_{uz} c_{vz} / c_z` between its neighbours.
fn star_mesh<S: Scalar>(net: &ElectricalNetwork<S>, subset: &StateSet) -> BTreeMap<(usize, usize), S> {
    let n = net.len();
    let mut adj: Vec<HashMap<usize, S>> = (0..n)
        .map(|u| net.neighbors(u).iter().cloned().collect())
        .collect();
    let mut remaining: Vec<usize> = (0..n).filter(|&v| !subset.contains(v)).collect();
    while !remaining.is_empty() {
        let (k, &z) = remaining
            .iter()
            .enumerate()
            .min_by_key(|(_, &z)| (adj[z].len(), z))
            .expect("non-empty");
        remaining.swap_remove(k);
        let nbrs: Vec<(usize, S)> = adj[z].drain().collect();
        let cz = nbrs.iter().fold(S::zero(), |a, (_, c)| a + c.clone());
        for (u, _) in &nbrs {
            adj[*u].remove(&z);
        }
        for (i, (u, cu)) in nbrs.iter().enumerate() {
            for (v, cv) in &nbrs[i + 1..] {
                let add = cu.clone() * cv.clone() / cz.clone();
                let e = adj[*u].entry(*v).or_insert_with(S::zero);
                *e = e.clone() + add.clone();
                let e = adj[*v].entry(*u).or_insert_with(S::zero);
                *e = e.clone() + add;
            }
        }
    }
    let mut out = BTreeMap::new();
    for u in subset.iter() {
        for (v, c) in &adj[u] {
            if u < *v {
                out.insert((u, *v), c.clone());
            }
        }
    }
    out
}

/// Traced conductances from harmonic measures: with `h_v` the harmonic
/// function equal to 1 at `v` and 0 on the rest of `kept`, the traced
/// conductance between `u` and `v` is the current `Σ_w c_{uw} h_v(w)`
/// flowing into `u`, with `u ≠ v`.
fn schur_by_columns<S: Scalar>(net: &ElectricalNetwork<S>, kept: &[usize]) -> Result<BTreeMap<(usize, usize), S>> {
    let n = net.len();
    let is_kept: Vec<bool> = {
        let mut m = vec![false; n];
        for &v in kept {
            m[v] = true;
        }
        m
    };
    let interior: Vec<usize> = (0..n).filter(|&v| !is_kept[v]).collect();
    let columns: Vec<Vec<(usize, S)>> = kept.iter().map(|&v| vec![(v, S::one())]).collect();
    let values = solve_interior_columns(net, &interior, &columns)?;
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in interior.iter().enumerate() {
        pos[v] = i;
    }
    let mut out = BTreeMap::new();
    for (col, &v) in kept.iter().enumerate() {
        for &u in kept {
            if u <= v {
                continue;
            }
            let mut current = S::zero();
            for (w, c) in net.neighbors(u) {
                let h = if *w == v {
                    S::one()
                } else if pos[*w] != usize::MAX {
                    values[pos[*w]][col].clone()
                } else {
                    S::zero()
                };
                current = current + c.clone() * h;
            }
            out.insert((v, u), current);
        }
    }
    Ok(out)
}

/// `P_x(τ_y < τ_A)` against the lower bound `1 - R(x,y) / (R(x,A) - R(x,y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingBoundReport<S> {
    pub probability: S,
    pub resistance_xy: S,
    pub resistance_xa: S,
    /// `None` when `R(x,A) ≤ R(x,y)` and the bound says nothing.
    pub bound: Option<S>,
}

impl<S: Scalar> HittingBoundReport<S> {
    pub fn holds(&self) -> bool {
        match &self.bound {
            Some(b) => {
                let slack = if S::is_exact() { 0.0 } else { 1e-9 };
                self.probability.to_f64() + slack >= b.to_f64() && (slack > 0.0 || self.probability >= *b)
            }
            None => true,
        }
    }

    pub fn vacuous(&self) -> bool {
        self.bound.is_none()
    }
}

pub fn check_hitting_bound<S: Scalar>(
    net: &ElectricalNetwork<S>,
    x: usize,
    y: usize,
    target: &StateSet,
) -> Result<HittingBoundReport<S>> {
    if target.contains(x) || target.contains(y) {
        return Err(Error::Precondition("x and y must lie outside the target".into()));
    }
    let resistance_xy = effective_resistance(net, x, y)?;
    let resistance_xa = effective_resistance_to_set(net, x, target)?;
    let probability = if x == y {
        S::one()
    } else {
        let mut boundary = vec![(y, S::one())];
        boundary.extend(target.iter().map(|a| (a, S::zero())));
        harmonic_extension(net, &boundary)?[x].clone()
    };
    let bound = (resistance_xa > resistance_xy).then(|| {
        S::one() - resistance_xy.clone() / (resistance_xa.clone() - resistance_xy.clone())
    });
    Ok(HittingBoundReport {
        probability,
        resistance_xy,
        resistance_xa,
        bound,
    })
}

/// Expected exit time of the induced walk against `c(A^c) · R(x, A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitTimeReport<S> {
    pub expected_time: S,
    pub bound: S,
}

impl<S: Scalar> ExitTimeReport<S> {
    pub fn holds(&self) -> bool {
        if S::is_exact() {
            self.expected_time <= self.bound
        } else {
            self.expected_time.to_f64() <= self.bound.to_f64() * (1.0 + 1e-9)
        }
    }
}

/// `E_x τ_A ≤ μ(A^c) R(x, A)` with `μ = c` (vertex weights).
pub fn check_exit_time_bound<S: Scalar>(
    net: &ElectricalNetwork<S>,
    x: usize,
    target: &StateSet,
) -> Result<ExitTimeReport<S>> {
    if target.is_empty() {
        return Err(Error::Precondition("target set must be non-empty".into()));
    }
    let n = net.len();
    let interior: Vec<usize> = (0..n).filter(|&v| !target.contains(v)).collect();
    let mut mass = S::zero();
    for &v in &interior {
        mass = mass + net.weight(v);
    }
    let resistance = effective_resistance_to_set(net, x, target)?;
    let expected_time = if target.contains(x) {
        S::zero()
    } else {
        // c_v t(v) - Σ c_vw t(w) = c_v on the interior, t = 0 on the target.
        let columns = vec![interior.iter().map(|&v| (v, net.weight(v))).collect::<Vec<_>>()];
        let t = solve_with_sources(net, &interior, &columns)?;
        t[interior.binary_search(&x).expect("x is interior")][0].clone()
    };
    Ok(ExitTimeReport {
        expected_time,
        bound: mass * resistance,
    })
}

/// Solve `L_II u = f` with zero boundary data; `sources` lists `f` per column.
fn solve_with_sources<S: Scalar>(
    net: &ElectricalNetwork<S>,
    interior: &[usize],
    sources: &[Vec<(usize, S)>],
) -> Result<Vec<Vec<S>>> {
    let n = net.len();
    let m = interior.len();
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in interior.iter().enumerate() {
        pos[v] = i;
    }
    let mut a: DenseMatrix<S> = DenseMatrix::zeros(m, m);
    for (i, &v) in interior.iter().enumerate() {
        a.set(i, i, net.weight(v));
        for (w, c) in net.neighbors(v) {
            if pos[*w] != usize::MAX {
                let cur = a.get(i, pos[*w]).clone() - c.clone();
                a.set(i, pos[*w], cur);
            }
        }
    }
    let mut b: DenseMatrix<S> = DenseMatrix::zeros(m, sources.len());
    for (col, f) in sources.iter().enumerate() {
        for (v, val) in f {
            b.set(pos[*v], col, val.clone());
        }
    }
    let x = solve(&a, &b)?;
    Ok((0..m).map(|i| x.row(i).to_vec()).collect())
}
