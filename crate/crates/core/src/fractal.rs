//! Sierpiński gasket and carpet graphs with exact coordinates.
//!
//! Vertices are stored as integer coordinates on the level-`m` lattice
//! (scale `2^m` for the gasket, `k^m` for a carpet). Gasket coordinates are
//! skew: `(a, b)` is the point `(a·q2 + b·q3) / 2^m` for the corner triangle
//! `q1 = (0,0)`, `q2 = (1,0)`, `q3 = (1/2, √3/2)`; carpet coordinates are
//! Cartesian. Vertices are numbered by the level at which they first appear,
//! so the nested set `V_j` is always the prefix `0..|V_j|`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use num_traits::{ToPrimitive, Zero};

use crate::chain::StateSet;
use crate::error::{Error, Result};
use crate::network::ElectricalNetwork;
use crate::scalar::{Rational, Scalar};

/// Default refusal threshold for generated vertex counts.
pub const DEFAULT_VERTEX_CAP: usize = 5_000_000;

/// Cells kept by the first-level carpet map. Cells are 1-based `(i, j)` with
/// `i` the column and `j` the row, as in the grid `Q` of the unit square.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CarpetTemplate {
    k: usize,
    cells: Vec<(usize, usize)>,
}

/// One reason a template fails to define a planar carpet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateViolation {
    GridTooSmall(usize),
    CellOutOfRange((usize, usize)),
    DuplicateCell((usize, usize)),
    CellCount { count: usize, k: usize },
    Symmetry,
    Connected,
    /// Lower-left cell of a 2×2 block whose kept cells meet only diagonally.
    Nondiagonality((usize, usize)),
    /// A missing cell touching the boundary of the square.
    BordersIncluded((usize, usize)),
}

impl fmt::Display for TemplateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateViolation::GridTooSmall(k) => write!(f, "grid size {k} is below 3"),
            TemplateViolation::CellOutOfRange((i, j)) => write!(f, "cell ({i},{j}) lies outside the grid"),
            TemplateViolation::DuplicateCell((i, j)) => write!(f, "cell ({i},{j}) listed twice"),
            TemplateViolation::CellCount { count, k } => {
                write!(f, "{count} cells, need between {} and {}", 4 * k - 4, k * k - 1)
            }
            TemplateViolation::Symmetry => write!(f, "not preserved by every isometry of the square"),
            TemplateViolation::Connected => write!(f, "union of kept cells is disconnected"),
            TemplateViolation::Nondiagonality((i, j)) => {
                write!(f, "2x2 block at ({i},{j}) meets only diagonally")
            }
            TemplateViolation::BordersIncluded((i, j)) => write!(f, "border cell ({i},{j}) is missing"),
        }
    }
}

impl CarpetTemplate {
    /// The standard carpet: `k = 3`, every cell but the centre.
    pub fn standard() -> Self {
        let cells = (1..=3)
            .flat_map(|j| (1..=3).map(move |i| (i, j)))
            .filter(|&c| c != (2, 2))
            .collect();
        CarpetTemplate { k: 3, cells }
    }

    /// Validate and build.
    pub fn new(k: usize, cells: Vec<(usize, usize)>) -> Result<Self> {
        let template = Self::unchecked(k, cells);
        let violations = template.violations();
        if violations.is_empty() {
            Ok(template)
        } else {
            Err(Error::InvalidTemplate(violations.iter().map(ToString::to_string).collect()))
        }
    }

    /// Build without validation, for inspecting violations.
    pub fn unchecked(k: usize, mut cells: Vec<(usize, usize)>) -> Self {
        cells.sort_by_key(|&(i, j)| (j, i));
        CarpetTemplate { k, cells }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    /// All four carpet conditions plus the shape checks; empty when valid.
    pub fn violations(&self) -> Vec<TemplateViolation> {
        let k = self.k;
        let mut out = Vec::new();
        if k < 3 {
            out.push(TemplateViolation::GridTooSmall(k));
            return out;
        }
        let mut kept = HashSet::new();
        for &c in &self.cells {
            if c.0 == 0 || c.1 == 0 || c.0 > k || c.1 > k {
                out.push(TemplateViolation::CellOutOfRange(c));
            } else if !kept.insert(c) {
                out.push(TemplateViolation::DuplicateCell(c));
            }
        }
        if !out.is_empty() {
            return out;
        }
        let count = kept.len();
        if count < 4 * k - 4 || count >= k * k {
            out.push(TemplateViolation::CellCount { count, k });
        }
        let isometries: [fn(usize, usize, usize) -> (usize, usize); 8] = [
            |_, i, j| (i, j),
            |k, i, j| (k + 1 - i, j),
            |k, i, j| (i, k + 1 - j),
            |k, i, j| (k + 1 - i, k + 1 - j),
            |_, i, j| (j, i),
            |k, i, j| (k + 1 - j, i),
            |k, i, j| (j, k + 1 - i),
            |k, i, j| (k + 1 - j, k + 1 - i),
        ];
        if isometries
            .iter()
            .any(|g| kept.iter().any(|&(i, j)| !kept.contains(&g(k, i, j))))
        {
            out.push(TemplateViolation::Symmetry);
        }
        if !closed_cells_connected(&kept) {
            out.push(TemplateViolation::Connected);
        }
        for j in 1..k {
            for i in 1..k {
                let a = kept.contains(&(i, j));
                let b = kept.contains(&(i + 1, j));
                let c = kept.contains(&(i, j + 1));
                let d = kept.contains(&(i + 1, j + 1));
                if (a && d && !b && !c) || (b && c && !a && !d) {
                    out.push(TemplateViolation::Nondiagonality((i, j)));
                }
            }
        }
        for j in 1..=k {
            for i in 1..=k {
                let border = i == 1 || j == 1 || i == k || j == k;
                if border && !kept.contains(&(i, j)) {
                    out.push(TemplateViolation::BordersIncluded((i, j)));
                }
            }
        }
        out
    }
}

/// Closed squares touching at a corner already form a connected union.
fn closed_cells_connected(kept: &HashSet<(usize, usize)>) -> bool {
    let Some(&start) = kept.iter().next() else {
        return false;
    };
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((i, j)) = queue.pop_front() {
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let next = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
                if kept.contains(&next) && seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
    }
    seen.len() == kept.len()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FractalKind {
    Gasket,
    Carpet(CarpetTemplate),
}

/// A level-`m` pre-fractal graph with its nested vertex sets.
#[derive(Debug, Clone)]
pub struct FractalGraph {
    kind: FractalKind,
    level: usize,
    scale: u64,
    coords: Vec<(u64, u64)>,
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
    /// `|V_j|` for `j = 0..=level`.
    nested_sizes: Vec<usize>,
    index: HashMap<(u64, u64), usize>,
}

impl FractalGraph {
    pub fn kind(&self) -> &FractalKind {
        &self.kind
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Lattice points per unit length: `2^m` or `k^m`.
    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
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

    /// Integer lattice coordinates.
    pub fn lattice(&self, v: usize) -> (u64, u64) {
        self.coords[v]
    }

    /// Exact coordinates in the graph's frame (skew for the gasket).
    pub fn coordinates(&self, v: usize) -> (Rational, Rational) {
        let (a, b) = self.coords[v];
        let s = self.scale as i64;
        (Rational::from_ratio(a as i64, s), Rational::from_ratio(b as i64, s))
    }

    /// Planar position.
    pub fn position(&self, v: usize) -> (f64, f64) {
        let (a, b) = self.coords[v];
        let s = self.scale as f64;
        match self.kind {
            FractalKind::Gasket => ((a as f64 + b as f64 / 2.0) / s, b as f64 * 3f64.sqrt() / 2.0 / s),
            FractalKind::Carpet(_) => (a as f64 / s, b as f64 / s),
        }
    }

    /// Euclidean distance between two vertices.
    pub fn distance(&self, u: usize, v: usize) -> f64 {
        let (x1, y1) = self.position(u);
        let (x2, y2) = self.position(v);
        (x1 - x2).hypot(y1 - y2)
    }

    /// Vertex at exact frame coordinates, if any.
    pub fn locate(&self, x: &Rational, y: &Rational) -> Option<usize> {
        let s = Rational::from_ratio(self.scale as i64, 1);
        let (a, b) = (x.clone() * s.clone(), y.clone() * s);
        if !a.is_integer() || !b.is_integer() || a < Rational::zero() || b < Rational::zero() {
            return None;
        }
        let a = a.to_integer().to_u64()?;
        let b = b.to_integer().to_u64()?;
        self.index.get(&(a, b)).copied()
    }

    /// `V_j` as vertex ids of this graph.
    pub fn nested(&self, j: usize) -> StateSet {
        (0..self.nested_sizes[j.min(self.level)]).collect()
    }

    pub fn nested_sizes(&self) -> &[usize] {
        &self.nested_sizes
    }

    /// `V_0`: the three corners of the triangle or the four of the square.
    pub fn corners(&self) -> StateSet {
        self.nested(0)
    }

    /// The same vertex in a finer graph of the same fractal.
    pub fn refine_vertex(&self, v: usize, finer: &FractalGraph) -> Option<usize> {
        if finer.kind != self.kind || finer.scale % self.scale != 0 {
            return None;
        }
        let f = finer.scale / self.scale;
        let (a, b) = self.coords[v];
        finer.index.get(&(a * f, b * f)).copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }
}

/// Unit conductance on every edge, so the induced walk is simple random walk.
pub fn uniform_network<S: Scalar>(graph: &FractalGraph) -> ElectricalNetwork<S> {
    ElectricalNetwork::unit(graph.labels.clone(), &graph.edges).expect("fractal graphs are connected")
}

pub fn gasket_graph(m: usize) -> Result<FractalGraph> {
    gasket_graph_with_cap(m, DEFAULT_VERTEX_CAP)
}

pub fn gasket_graph_with_cap(m: usize, cap: usize) -> Result<FractalGraph> {
    let predicted = 3f64.powi(m as i32 + 1).mul_add(0.5, 1.5);
    if m > 40 || predicted > cap as f64 {
        return Err(Error::Guard(format!("gasket level {m} exceeds the vertex cap {cap}")));
    }
    let scale = 1u64 << m;
    // Lower-left corners of the level-m triangles, side 1 in lattice units.
    let mut cells = vec![(0u64, 0u64)];
    let mut side = scale;
    let mut first_level: HashMap<(u64, u64), usize> = HashMap::new();
    for level in 0..=m {
        for &(a, b) in &cells {
            for p in [(a, b), (a + side, b), (a, b + side)] {
                first_level.entry(p).or_insert(level);
            }
        }
        if level < m {
            let half = side / 2;
            cells = cells
                .iter()
                .flat_map(|&(a, b)| [(a, b), (a + half, b), (a, b + half)])
                .collect();
            side = half;
        }
    }
    let mut graph = assemble(FractalKind::Gasket, m, scale, first_level, |coords| {
        let mut edges = Vec::with_capacity(3 * cells.len());
        for &(a, b) in &cells {
            let p = [coords[&(a, b)], coords[&(a + 1, b)], coords[&(a, b + 1)]];
            for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                edges.push((p[i].min(p[j]), p[i].max(p[j])));
            }
        }
        edges
    });
    for (i, name) in ["q1", "q2", "q3"].into_iter().enumerate() {
        graph.labels[i] = name.to_string();
    }
    Ok(graph)
}

pub fn carpet_graph(template: &CarpetTemplate, m: usize) -> Result<FractalGraph> {
    carpet_graph_with_cap(template, m, DEFAULT_VERTEX_CAP)
}

pub fn carpet_graph_with_cap(template: &CarpetTemplate, m: usize, cap: usize) -> Result<FractalGraph> {
    let violations = template.violations();
    if !violations.is_empty() {
        return Err(Error::InvalidTemplate(violations.iter().map(ToString::to_string).collect()));
    }
    let k = template.k as u64;
    let n_cells = template.cells.len() as f64;
    // Each cell brings at most one new corner beyond those it shares.
    let predicted = n_cells.powi(m as i32) + 2.0 * (k as f64).powi(m as i32) + 1.0;
    if predicted > cap as f64 {
        return Err(Error::Guard(format!("carpet level {m} exceeds the vertex cap {cap}")));
    }
    let scale = k.pow(m as u32);
    let offsets: Vec<(u64, u64)> = template
        .cells
        .iter()
        .map(|&(i, j)| (i as u64 - 1, j as u64 - 1))
        .collect();
    let mut cells = vec![(0u64, 0u64)];
    let mut side = scale;
    let mut first_level: HashMap<(u64, u64), usize> = HashMap::new();
    for level in 0..=m {
        for &(a, b) in &cells {
            for p in [(a, b), (a + side, b), (a, b + side), (a + side, b + side)] {
                first_level.entry(p).or_insert(level);
            }
        }
        if level < m {
            let sub = side / k;
            cells = cells
                .iter()
                .flat_map(|&(a, b)| offsets.iter().map(move |&(i, j)| (a + i * sub, b + j * sub)))
                .collect();
            side = sub;
        }
    }
    let mut graph = assemble(FractalKind::Carpet(template.clone()), m, scale, first_level, |coords| {
        // Pairs at distance exactly one lattice step.
        let mut edges = Vec::new();
        for (&(a, b), &u) in coords {
            for q in [(a + 1, b), (a, b + 1)] {
                if let Some(&v) = coords.get(&q) {
                    edges.push((u.min(v), u.max(v)));
                }
            }
        }
        edges
    });
    for (i, name) in ["c00", "c10", "c01", "c11"].into_iter().enumerate() {
        graph.labels[i] = name.to_string();
    }
    Ok(graph)
}

/// Number the vertices by first level, then by `(b, a)`, and build edges.
fn assemble(
    kind: FractalKind,
    level: usize,
    scale: u64,
    first_level: HashMap<(u64, u64), usize>,
    edges_of: impl FnOnce(&HashMap<(u64, u64), usize>) -> Vec<(usize, usize)>,
) -> FractalGraph {
    let mut order: Vec<((u64, u64), usize)> = first_level.into_iter().collect();
    order.sort_by_key(|&((a, b), l)| (l, b, a));
    let mut nested_sizes = vec![0; level + 1];
    for &(_, l) in &order {
        for size in &mut nested_sizes[l..] {
            *size += 1;
        }
    }
    let coords: Vec<(u64, u64)> = order.iter().map(|&(p, _)| p).collect();
    let index: HashMap<(u64, u64), usize> = coords.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut edges = edges_of(&index);
    edges.sort_unstable();
    edges.dedup();
    let labels = (0..coords.len()).map(|i| i.to_string()).collect();
    FractalGraph {
        kind,
        level,
        scale,
        coords,
        labels,
        edges,
        nested_sizes,
        index,
    }
}
