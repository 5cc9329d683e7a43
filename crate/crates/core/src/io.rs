//! Plain-text formats for chains, paths, path laws, networks, fractal graphs
//! and carpet templates.
//!
//! All readers skip blank lines and treat `#` as the start of a comment,
//! except where a `#` line carries data (the path-law header).

use std::fmt::Write as _;

use crate::chain::{FinitePath, MarkovChain};
use crate::error::{Error, Result};
use crate::exactlaw::PathLaw;
use crate::fractal::{CarpetTemplate, FractalGraph};
use crate::network::ElectricalNetwork;
use crate::scalar::Scalar;

/// Numbered lines with comments stripped; line numbers are 1-based.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

fn number<S: Scalar>(line: usize, token: &str) -> Result<S> {
    S::parse_token(token).ok_or_else(|| Error::parse(line, format!("not a number: {token}")))
}

/// Chain file: state names on the first line, then one row of transition
/// probabilities per state, then optional `absorbing <name>`.
///
/// ```text
/// # escape chain
/// a b c
/// 0 1/2 1/2
/// 1/2 0 1/2
/// 0 0 1
/// absorbing c
/// ```
pub fn parse_chain<S: Scalar>(text: &str) -> Result<MarkovChain<S>> {
    let mut lines = content_lines(text);
    let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
    let labels: Vec<String> = header.split_whitespace().map(str::to_string).collect();
    let n = labels.len();
    let mut rows = Vec::with_capacity(n);
    let mut absorbing = None;
    for (line, body) in lines {
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens[0] == "absorbing" {
            if tokens.len() != 2 {
                return Err(Error::parse(line, "expected `absorbing <name>`"));
            }
            absorbing = Some((line, tokens[1].to_string()));
            continue;
        }
        if absorbing.is_some() {
            return Err(Error::parse(line, "rows must precede `absorbing`"));
        }
        if tokens.len() != n {
            return Err(Error::parse(line, format!("expected {n} entries, found {}", tokens.len())));
        }
        rows.push(tokens.iter().map(|t| number(line, t)).collect::<Result<Vec<S>>>()?);
    }
    let chain = MarkovChain::new(labels, rows)?;
    match absorbing {
        Some((line, name)) => {
            let idx = chain
                .index_of(&name)
                .map_err(|_| Error::parse(line, format!("unknown state {name}")))?;
            chain.with_absorbing(idx)
        }
        None => Ok(chain),
    }
}

pub fn write_chain<S: Scalar>(chain: &MarkovChain<S>) -> String {
    let mut out = chain.labels().join(" ");
    out.push('\n');
    for row in chain.dense_rows() {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    if let Some(a) = chain.absorbing() {
        let _ = writeln!(out, "absorbing {}", chain.label(a));
    }
    out
}

/// Whitespace-separated state names.
pub fn parse_path<S: Scalar>(chain: &MarkovChain<S>, text: &str) -> Result<FinitePath> {
    let mut states = Vec::new();
    for (line, body) in content_lines(text) {
        for name in body.split_whitespace() {
            states.push(
                chain
                    .index_of(name)
                    .map_err(|_| Error::parse(line, format!("unknown state {name}")))?,
            );
        }
    }
    FinitePath::new(states)
}

/// `# tail_bound <v>` then one `path<TAB>probability` line per atom, in path
/// order.
pub fn write_path_law<S: Scalar>(chain: &MarkovChain<S>, law: &PathLaw<S>) -> String {
    let mut out = format!("# tail_bound {}\n", law.tail_bound);
    for (path, p) in &law.support {
        let _ = writeln!(out, "{}\t{}", chain.render_path(path), p);
    }
    out
}

pub fn parse_path_law<S: Scalar>(chain: &MarkovChain<S>, text: &str) -> Result<PathLaw<S>> {
    let mut tail_bound = None;
    let mut support = std::collections::BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix("# tail_bound") {
            tail_bound = Some(number::<S>(line, rest.trim())?);
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (path, prob) = trimmed
            .split_once('\t')
            .ok_or_else(|| Error::parse(line, "expected path<TAB>probability"))?;
        let path = parse_path(chain, path).map_err(|e| Error::parse(line, e.to_string()))?;
        support.insert(path, number::<S>(line, prob.trim())?);
    }
    Ok(PathLaw {
        support,
        tail_bound: tail_bound.ok_or_else(|| Error::parse(1, "missing `# tail_bound` header"))?,
        steps: 0,
    })
}

/// Network file: one `u v conductance` line per edge. Vertices are named by
/// first appearance.
pub fn parse_network<S: Scalar>(text: &str) -> Result<ElectricalNetwork<S>> {
    let mut labels: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut edges = Vec::new();
    for (line, body) in content_lines(text) {
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::parse(line, "expected `u v conductance`"));
        }
        let mut id = |name: &str| {
            *index.entry(name.to_string()).or_insert_with(|| {
                labels.push(name.to_string());
                labels.len() - 1
            })
        };
        let (u, v) = (id(tokens[0]), id(tokens[1]));
        edges.push((u, v, number::<S>(line, tokens[2])?));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    ElectricalNetwork::new(labels, edges)
}

pub fn write_network<S: Scalar>(net: &ElectricalNetwork<S>) -> String {
    let mut out = String::new();
    for (&(u, v), c) in net.edges() {
        let _ = writeln!(out, "{} {} {}", net.label(u), net.label(v), c);
    }
    out
}

/// Vertex file: `id num_x den_x num_y den_y` with exact frame coordinates.
pub fn write_vertices(graph: &FractalGraph) -> String {
    let mut out = String::new();
    for v in 0..graph.len() {
        let (x, y) = graph.coordinates(v);
        let _ = writeln!(out, "{v} {} {} {} {}", x.numer(), x.denom(), y.numer(), y.denom());
    }
    out
}

/// Edge file: `id1 id2`, smaller id first.
pub fn write_edges(graph: &FractalGraph) -> String {
    let mut out = String::new();
    for &(u, v) in graph.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

/// Read back a vertex file as `(id, x, y)` rationals.
pub fn parse_vertices(text: &str) -> Result<Vec<(usize, crate::Rational, crate::Rational)>> {
    content_lines(text)
        .map(|(line, body)| {
            let t: Vec<&str> = body.split_whitespace().collect();
            if t.len() != 5 {
                return Err(Error::parse(line, "expected `id num_x den_x num_y den_y`"));
            }
            let int = |s: &str| s.parse::<i64>().map_err(|_| Error::parse(line, format!("not an integer: {s}")));
            let id = t[0].parse::<usize>().map_err(|_| Error::parse(line, "bad id"))?;
            let (dx, dy) = (int(t[2])?, int(t[4])?);
            if dx == 0 || dy == 0 {
                return Err(Error::parse(line, "zero denominator"));
            }
            Ok((id, crate::Rational::from_ratio(int(t[1])?, dx), crate::Rational::from_ratio(int(t[3])?, dy)))
        })
        .collect()
}

pub fn parse_edges(text: &str) -> Result<Vec<(usize, usize)>> {
    content_lines(text)
        .map(|(line, body)| {
            let t: Vec<&str> = body.split_whitespace().collect();
            match t.as_slice() {
                [a, b] => Ok((
                    a.parse().map_err(|_| Error::parse(line, "bad id"))?,
                    b.parse().map_err(|_| Error::parse(line, "bad id"))?,
                )),
                _ => Err(Error::parse(line, "expected `id1 id2`")),
            }
        })
        .collect()
}

/// Template file: `k` on the first line, then one `i j` cell per line.
pub fn parse_template(text: &str) -> Result<CarpetTemplate> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or(Error::EmptyInput)?;
    let k: usize = header.parse().map_err(|_| Error::parse(line, "expected grid size k"))?;
    let mut cells = Vec::new();
    for (line, body) in lines {
        let t: Vec<&str> = body.split_whitespace().collect();
        let cell = match t.as_slice() {
            [i, j] => (
                i.parse().map_err(|_| Error::parse(line, "bad cell"))?,
                j.parse().map_err(|_| Error::parse(line, "bad cell"))?,
            ),
            _ => return Err(Error::parse(line, "expected `i j`")),
        };
        cells.push(cell);
    }
    CarpetTemplate::new(k, cells)
}

pub fn write_template(template: &CarpetTemplate) -> String {
    let mut out = format!("{}\n", template.k());
    for (i, j) in template.cells() {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}
