//! Loop erasure, partial loop erasure and the path algebra around them.
//!
//! Indices are 0-based: the erasure of `w` starts at index `n_0 = 0`, and for
//! a point `w_n` whose loops are erased the next index is one past its last
//! visit. For instance the loop erasure of `(a,b,c,d,b,e,d)` keeps indices
//! `(0,1,5,6)`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::Hash;

use crate::chain::{FinitePath, StateSet};
use crate::error::{Error, Result};

/// Set membership used to select the points whose loops are erased.
pub trait Subset<T> {
    fn has(&self, state: &T) -> bool;

    /// Whether every member of `self` is a member of `other`.
    fn within(&self, other: &Self) -> bool;
}

impl Subset<usize> for StateSet {
    fn has(&self, state: &usize) -> bool {
        self.contains(*state)
    }

    fn within(&self, other: &Self) -> bool {
        self.is_subset(other)
    }
}

impl<T: Eq + Hash> Subset<T> for HashSet<T> {
    fn has(&self, state: &T) -> bool {
        self.contains(state)
    }

    fn within(&self, other: &Self) -> bool {
        self.is_subset(other)
    }
}

impl<T: Ord> Subset<T> for BTreeSet<T> {
    fn has(&self, state: &T) -> bool {
        self.contains(state)
    }

    fn within(&self, other: &Self) -> bool {
        self.is_subset(other)
    }
}

/// Output of an erasure: the kept path and the kept indices of the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErasureResult<T = usize> {
    pub path: FinitePath<T>,
    pub indices: Vec<usize>,
}

fn last_visits<T: Eq + Hash>(w: &[T]) -> HashMap<&T, usize> {
    let mut last = HashMap::with_capacity(w.len());
    for (i, s) in w.iter().enumerate() {
        last.insert(s, i);
    }
    last
}

fn restrict<T: Clone>(w: &[T], indices: Vec<usize>) -> ErasureResult<T> {
    let path = indices.iter().map(|&i| w[i].clone()).collect();
    ErasureResult {
        path: FinitePath::new(path).expect("index set is never empty"),
        indices,
    }
}

/// Chronological loop erasure, `O(η)`.
pub fn loop_erase<T: Eq + Hash + Clone>(w: &FinitePath<T>) -> ErasureResult<T> {
    let w = w.states();
    let end = &w[w.len() - 1];
    let last = last_visits(w);
    let mut indices = Vec::new();
    let mut n = 0;
    loop {
        indices.push(n);
        if w[n] == *end {
            break;
        }
        n = last[&w[n]] + 1;
    }
    restrict(w, indices)
}

/// Partial loop erasure: only loops rooted at points of `subset` are erased.
pub fn partial_loop_erase<T, V>(w: &FinitePath<T>, subset: &V) -> ErasureResult<T>
where
    T: Eq + Hash + Clone,
    V: Subset<T> + ?Sized,
{
    let w = w.states();
    let eta = w.len() - 1;
    let end = &w[eta];
    let last = last_visits(w);
    let mut indices = Vec::new();
    let mut n = 0;
    loop {
        indices.push(n);
        if subset.has(&w[n]) {
            if w[n] == *end {
                break;
            }
            n = last[&w[n]] + 1;
        } else {
            if n == eta {
                break;
            }
            n += 1;
        }
    }
    restrict(w, indices)
}

/// Apply partial loop erasure with each set in turn, `V_1` first.
pub fn refinement_erase<T, V>(w: &FinitePath<T>, sets: &[V]) -> Result<FinitePath<T>>
where
    T: Eq + Hash + Clone,
    V: Subset<T>,
{
    check_nested(sets)?;
    let mut current = w.clone();
    for set in sets {
        current = partial_loop_erase(&current, set).path;
    }
    Ok(current)
}

pub(crate) fn check_nested<T, V: Subset<T>>(sets: &[V]) -> Result<()> {
    for (i, pair) in sets.windows(2).enumerate() {
        if !pair[0].within(&pair[1]) {
            return Err(Error::NotNested(i + 1));
        }
    }
    Ok(())
}

pub fn reverse<T: Clone>(w: &FinitePath<T>) -> FinitePath<T> {
    let mut v = w.states().to_vec();
    v.reverse();
    FinitePath::new(v).expect("reversal of a non-empty path")
}

/// Glue `w2` onto the end of `w1`; the shared endpoint appears once.
pub fn concat<T: Clone + PartialEq>(w1: &FinitePath<T>, w2: &FinitePath<T>) -> Result<FinitePath<T>> {
    if w1.last() != w2.first() {
        return Err(Error::EndpointMismatch);
    }
    let mut v = Vec::with_capacity(w1.len() + w2.len() - 1);
    v.extend_from_slice(w1.states());
    v.extend_from_slice(&w2.states()[1..]);
    FinitePath::new(v)
}

/// Position `j` of `b` in the loop erasure, with the input index `n_j`.
fn locate_in_erasure<T: Eq>(le: &ErasureResult<T>, b: &T) -> Option<(usize, usize)> {
    le.path.iter().position(|s| s == b).map(|j| (j, le.indices[j]))
}

/// Chronological erasure up to the visit of `b` that survives in the loop
/// erasure, then reverse-order erasure of the remainder.
pub fn algorithm_one<T: Eq + Hash + Clone>(w: &FinitePath<T>, b: &T) -> FinitePath<T> {
    let le = loop_erase(w);
    let Some((j, nj)) = locate_in_erasure(&le, b) else {
        return le.path;
    };
    let head = FinitePath::new(le.path[..=j].to_vec()).expect("non-empty prefix");
    let tail = FinitePath::new(w[nj..].to_vec()).expect("non-empty suffix");
    let tail = reverse(&loop_erase(&reverse(&tail)).path);
    concat(&head, &tail).expect("both pieces meet at b")
}

/// The pre-erasure path of the second algorithm: as [`algorithm_one`] but
/// the remainder is only partially erased with respect to `v1 = V ∖ {b}`.
/// Its loop erasure equals [`algorithm_one`].
pub fn algorithm_two<T, V>(w: &FinitePath<T>, b: &T, v1: &V) -> Result<FinitePath<T>>
where
    T: Eq + Hash + Clone,
    V: Subset<T> + ?Sized,
{
    if v1.has(b) {
        return Err(Error::Precondition("the partial set must exclude b".into()));
    }
    if w.iter().any(|s| s != b && !v1.has(s)) {
        return Err(Error::Precondition(
            "the partial set must contain every point other than b".into(),
        ));
    }
    let le = loop_erase(w);
    let Some((j, nj)) = locate_in_erasure(&le, b) else {
        return Ok(partial_loop_erase(w, v1).path);
    };
    let head = FinitePath::new(le.path[..=j].to_vec()).expect("non-empty prefix");
    let tail = FinitePath::new(w[nj..].to_vec()).expect("non-empty suffix");
    let tail = reverse(&partial_loop_erase(&reverse(&tail), v1).path);
    concat(&head, &tail)
}

/// Which witnessing index pairs a detector reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detection {
    /// Pairs not strictly contained in another reported pair of the same kind.
    #[default]
    Maximal,
    All,
}

/// Loops `w[s1] = w[s2]` (`s1 < s2`) whose excursion leaves the open ball of
/// radius `rho` around `w[s1]`.
///
/// In [`Detection::Maximal`] mode one pair is reported per repeated point,
/// from its first to its last visit, which is the widest loop rooted there.
pub fn detect_loops<T, F>(w: &[T], rho: f64, metric: F, mode: Detection) -> Vec<(usize, usize)>
where
    T: Eq + Hash,
    F: Fn(&T, &T) -> f64,
{
    let mut visits: HashMap<&T, Vec<usize>> = HashMap::new();
    for (i, s) in w.iter().enumerate() {
        visits.entry(s).or_default().push(i);
    }
    let leaves = |s1: usize, s2: usize| w[s1..=s2].iter().any(|p| metric(&w[s1], p) >= rho);
    let mut out = Vec::new();
    match mode {
        Detection::Maximal => {
            for times in visits.values() {
                if times.len() < 2 {
                    continue;
                }
                let (s1, s2) = (times[0], times[times.len() - 1]);
                if leaves(s1, s2) {
                    out.push((s1, s2));
                }
            }
        }
        Detection::All => {
            for times in visits.values() {
                for (a, &s1) in times.iter().enumerate() {
                    for &s2 in &times[a + 1..] {
                        if leaves(s1, s2) {
                            out.push((s1, s2));
                        }
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Subpaths `w[s1..=s2]` that avoid `v` entirely and whose endpoints are at
/// least `rho` apart.
pub fn detect_long_jumps<T, V, F>(
    w: &[T],
    rho: f64,
    v: &V,
    metric: F,
    mode: Detection,
) -> Vec<(usize, usize)>
where
    V: Subset<T> + ?Sized,
    F: Fn(&T, &T) -> f64,
{
    let mut out = Vec::new();
    let mut start = 0;
    while start < w.len() {
        if v.has(&w[start]) {
            start += 1;
            continue;
        }
        let mut end = start;
        while end + 1 < w.len() && !v.has(&w[end + 1]) {
            end += 1;
        }
        match mode {
            Detection::All => {
                for s1 in start..=end {
                    for s2 in s1 + 1..=end {
                        if metric(&w[s1], &w[s2]) >= rho {
                            out.push((s1, s2));
                        }
                    }
                }
            }
            Detection::Maximal => {
                // Widest s2 for each s1; keep it unless an earlier s1 reaches
                // at least as far.
                let mut reach_so_far: Option<usize> = None;
                for s1 in start..=end {
                    let widest = (s1 + 1..=end).rev().find(|&s2| metric(&w[s1], &w[s2]) >= rho);
                    if let Some(s2) = widest {
                        if reach_so_far.map_or(true, |r| s2 > r) {
                            out.push((s1, s2));
                            reach_so_far = Some(s2);
                        }
                    }
                }
            }
        }
        start = end + 1;
    }
    out
}

/// Membership tables for the stages of a streaming erasure pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stages {
    masks: Vec<Vec<bool>>,
    fault: bool,
}

impl Stages {
    /// Loop erasure on states `0..n`.
    pub fn loop_erasure(n: usize) -> Self {
        Stages {
            masks: vec![vec![true; n]],
            fault: false,
        }
    }

    /// Partial erasures with `sets[0]`, then `sets[1]`, and so on.
    pub fn refinement(n: usize, sets: &[StateSet]) -> Result<Self> {
        check_nested(sets)?;
        Ok(Stages {
            masks: sets.iter().map(|s| s.mask(n)).collect(),
            fault: false,
        })
    }

    /// Deliberately wrong first stage, for negative controls: when a loop
    /// closes it also erases the point emitted before the loop's root.
    #[doc(hidden)]
    pub fn with_injected_fault(mut self) -> Self {
        self.fault = true;
        self
    }

    pub fn depth(&self) -> usize {
        self.masks.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    Sink(Vec<usize>),
    Stage {
        /// Erasable points currently in this stage's output, each with the
        /// downstream state right after it was emitted.
        anchors: Vec<(usize, Node)>,
        downstream: Box<Node>,
    },
}

impl Node {
    fn empty(depth: usize) -> Node {
        (0..depth).fold(Node::Sink(Vec::new()), |down, _| Node::Stage {
            anchors: Vec::new(),
            downstream: Box::new(down),
        })
    }

    fn push(&mut self, masks: &[Vec<bool>], y: usize, fault: bool) {
        match self {
            Node::Sink(out) => out.push(y),
            Node::Stage {
                anchors,
                downstream,
            } => {
                if masks[0][y] {
                    if let Some(pos) = anchors.iter().position(|(s, _)| *s == y) {
                        if fault && pos > 0 {
                            **downstream = anchors[pos - 1].1.clone();
                            anchors.truncate(pos);
                            downstream.push(&masks[1..], y, false);
                            anchors.push((y, (**downstream).clone()));
                            return;
                        }
                        **downstream = anchors[pos].1.clone();
                        anchors.truncate(pos + 1);
                        return;
                    }
                    downstream.push(&masks[1..], y, false);
                    anchors.push((y, (**downstream).clone()));
                } else {
                    downstream.push(&masks[1..], y, false);
                }
            }
        }
    }

    fn output(&self) -> &[usize] {
        match self {
            Node::Sink(out) => out,
            Node::Stage { downstream, .. } => downstream.output(),
        }
    }
}

/// Online evaluation of a pipeline of (partial) loop erasures.
///
/// Points are pushed one at a time; after each push, [`output`] equals the
/// offline pipeline applied to the prefix seen so far. Two prefixes with
/// equal states have equal outputs for every continuation, which is what
/// makes the exact law enumeration finite.
///
/// [`output`]: StreamingErasure::output
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamingErasure(Node);

impl StreamingErasure {
    pub fn new(stages: &Stages, start: usize) -> Self {
        let mut node = Node::empty(stages.depth());
        node.push(&stages.masks, start, stages.fault);
        StreamingErasure(node)
    }

    pub fn push(&mut self, stages: &Stages, y: usize) {
        self.0.push(&stages.masks, y, stages.fault);
    }

    pub fn output(&self) -> &[usize] {
        self.0.output()
    }

    /// The most recently pushed point.
    pub fn current(&self) -> usize {
        *self.output().last().expect("a started stream is never empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(s: &str) -> FinitePath<char> {
        FinitePath::new(s.chars().collect()).unwrap()
    }

    fn set(s: &str) -> HashSet<char> {
        s.chars().collect()
    }

    fn text(p: &FinitePath<char>) -> String {
        p.iter().collect()
    }

    /// Literal transcription of the index recursion, scanning for the
    /// maximum on every step.
    fn naive_partial(w: &[usize], in_subset: &dyn Fn(usize) -> bool) -> Vec<usize> {
        let eta = w.len() - 1;
        let mut idx = vec![0];
        loop {
            let prev = *idx.last().unwrap();
            let next = if in_subset(w[prev]) {
                if w[prev] == w[eta] {
                    break;
                }
                let mut max = prev;
                for n in prev..=eta {
                    if w[n] == w[prev] {
                        max = n;
                    }
                }
                max + 1
            } else {
                if prev == eta {
                    break;
                }
                prev + 1
            };
            idx.push(next);
        }
        idx
    }

    #[test]
    fn worked_example() {
        let w = path("abcdbed");
        let le = loop_erase(&w);
        assert_eq!(text(&le.path), "abed");
        assert_eq!(le.indices, vec![0, 1, 5, 6]);
        let ple = partial_loop_erase(&w, &set("acde"));
        assert_eq!(text(&ple.path), "abcd");
        assert_eq!(ple.indices, vec![0, 1, 2, 3]);
        let composed = refinement_erase(&w, &[set("acde"), set("abcde")]).unwrap();
        assert_eq!(text(&composed), "abcd");
        assert_ne!(composed, le.path);
    }

    #[test]
    fn small_cases() {
        assert_eq!(text(&loop_erase(&path("abab")).path), "ab");
        assert_eq!(loop_erase(&path("a")).indices, vec![0]);
        assert_eq!(loop_erase(&path("abc")).indices, vec![0, 1, 2]);
        assert_eq!(text(&loop_erase(&path("aba")).path), "a");
        assert_eq!(text(&partial_loop_erase(&path("abcdbed"), &set("")).path), "abcdbed");
        assert_eq!(text(&refinement_erase::<char, HashSet<char>>(&path("abab"), &[]).unwrap()), "abab");
    }

    #[test]
    fn non_nested_sequence_is_rejected() {
        let err = refinement_erase(&path("abc"), &[set("ab"), set("a")]).unwrap_err();
        assert_eq!(err, Error::NotNested(1));
    }

    #[test]
    fn reverse_and_concat() {
        assert_eq!(text(&reverse(&path("abc"))), "cba");
        assert_eq!(text(&concat(&path("ab"), &path("bc")).unwrap()), "abc");
        assert_eq!(concat(&path("ab"), &path("cd")), Err(Error::EndpointMismatch));
    }

    #[test]
    fn algorithms_hand_trace() {
        // LE(abcdbed) = abed hits e at n_j = 5; the remainder (e,d) is
        // loop-free either way.
        let w = path("abcdbed");
        assert_eq!(text(&algorithm_one(&w, &'e')), "abed");
        let v1 = set("abcd");
        assert_eq!(text(&algorithm_two(&w, &'e', &v1).unwrap()), "abed");
        // b at n_j = 1: remainder (b,c,d,b,e,d) reversed is (d,e,b,d,c,b),
        // LE of that is (d,c,b), so L1 = (a,b) ⊕ (b,c,d) = (a,b,c,d).
        assert_eq!(text(&algorithm_one(&w, &'b')), "abcd");
        // PLE without b on (d,e,b,d,c,b): d jumps past its last visit to c,
        // c is kept, then b: (d,c,b). L2 pre-path = (a,b,c,d).
        let v1 = set("acde");
        assert_eq!(text(&algorithm_two(&w, &'b', &v1).unwrap()), "abcd");
        // Case 1: c does not survive the loop erasure.
        assert_eq!(text(&algorithm_one(&w, &'c')), "abed");
    }

    #[test]
    fn algorithm_two_checks_partial_set() {
        let w = path("abc");
        assert!(algorithm_two(&w, &'b', &set("abc")).is_err());
        assert!(algorithm_two(&w, &'b', &set("a")).is_err());
    }

    #[test]
    fn loop_detection_on_crafted_path() {
        // Points on a line: 0 at x=0, 1 at x=2ρ, 2 at x=ρ/2.
        let pos = [0.0_f64, 2.0, 0.5];
        let metric = |a: &usize, b: &usize| (pos[*a] - pos[*b]).abs();
        let w = [0usize, 2, 1, 2, 0];
        let loops = detect_loops(&w, 1.0, metric, Detection::Maximal);
        assert_eq!(loops, brute_force_loops(&w, 1.0, &metric, true));
        // Root 0 reaches distance 2; root 2 reaches distance 1.5.
        assert_eq!(loops, vec![(0, 4), (1, 3)]);
        let w = [0usize, 2, 0];
        assert!(detect_loops(&w, 1.0, metric, Detection::Maximal).is_empty());
        let simple = [0usize, 1, 2];
        assert!(detect_loops(&simple, 0.0, metric, Detection::All).is_empty());
    }

    fn brute_force_loops(
        w: &[usize],
        rho: f64,
        metric: &dyn Fn(&usize, &usize) -> f64,
        maximal: bool,
    ) -> Vec<(usize, usize)> {
        let mut all = Vec::new();
        for s1 in 0..w.len() {
            for s2 in s1 + 1..w.len() {
                if w[s1] == w[s2] && (s1..=s2).any(|t| metric(&w[s1], &w[t]) >= rho) {
                    all.push((s1, s2));
                }
            }
        }
        if !maximal {
            return all;
        }
        let roots: HashSet<usize> = all.iter().map(|p| w[p.0]).collect();
        let mut out: Vec<(usize, usize)> = roots
            .into_iter()
            .map(|r| {
                let first = w.iter().position(|&s| s == r).unwrap();
                let last = w.iter().rposition(|&s| s == r).unwrap();
                (first, last)
            })
            .collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn long_jumps() {
        let pos = [0.0_f64, 1.0, 2.0, 3.0];
        let metric = |a: &usize, b: &usize| (pos[*a] - pos[*b]).abs();
        let v: HashSet<usize> = [0].into_iter().collect();
        let w = [0usize, 1, 2, 3, 0];
        assert_eq!(detect_long_jumps(&w, 2.0, &v, metric, Detection::Maximal), vec![(1, 3)]);
        assert_eq!(detect_long_jumps(&w, 1.0, &v, metric, Detection::All), vec![(1, 2), (1, 3), (2, 3)]);
        let every: HashSet<usize> = (0..4).collect();
        assert!(detect_long_jumps(&w, 0.0, &every, metric, Detection::All).is_empty());
    }

    fn arb_path(alphabet: usize, max_len: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0..alphabet, 1..max_len)
    }

    fn fp(v: &[usize]) -> FinitePath {
        FinitePath::new(v.to_vec()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn le_properties(w in arb_path(6, 40)) {
            let p = fp(&w);
            let le = loop_erase(&p);
            prop_assert!(le.path.is_self_avoiding());
            prop_assert_eq!(le.path.first(), p.first());
            prop_assert_eq!(le.path.last(), p.last());
            prop_assert_eq!(le.indices[0], 0);
            prop_assert!(le.indices.windows(2).all(|x| x[0] < x[1]));
            prop_assert_eq!(&le.indices, &naive_partial(&w, &|_| true));
            prop_assert_eq!(&loop_erase(&le.path).path, &le.path);
        }

        #[test]
        fn ple_properties(w in arb_path(6, 40), mask in prop::collection::vec(any::<bool>(), 6)) {
            let p = fp(&w);
            let subset: StateSet = (0..6).filter(|&i| mask[i]).collect();
            let ple = partial_loop_erase(&p, &subset);
            prop_assert_eq!(&ple.indices, &naive_partial(&w, &|s| mask[s]));
            prop_assert_eq!(ple.path.first(), p.first());
            prop_assert_eq!(ple.path.last(), p.last());
            prop_assert!(ple.path.iter().all(|s| w.contains(s)));
            prop_assert_eq!(&partial_loop_erase(&ple.path, &subset).path, &ple.path);
            let full = StateSet::full(6);
            prop_assert_eq!(&partial_loop_erase(&p, &full), &loop_erase(&p));
            prop_assert_eq!(&partial_loop_erase(&p, &StateSet::empty()).path, &p);
        }

        #[test]
        fn two_stage_algorithms_agree(body in arb_path(5, 40), b in 0usize..5) {
            // Paths stopped at the first entry into a target: the last point
            // does not occur earlier.
            let mut w: Vec<usize> = body;
            w.push(5);
            let p = fp(&w);
            let v1: StateSet = (0..6).filter(|&s| s != b).collect();
            let one = algorithm_one(&p, &b);
            let two = algorithm_two(&p, &b, &v1).unwrap();
            prop_assert_eq!(&one, &loop_erase(&two).path);
        }

        #[test]
        fn images_shrink_along_refinement(w in arb_path(6, 40), cut in 1usize..6) {
            let p = fp(&w);
            let sets = [(0..cut).collect::<StateSet>(), StateSet::full(6)];
            let first = partial_loop_erase(&p, &sets[0]).path;
            let second = partial_loop_erase(&first, &sets[1]).path;
            let img = |q: &FinitePath| q.iter().copied().collect::<HashSet<usize>>();
            prop_assert!(img(&first).is_subset(&img(&p)));
            prop_assert!(img(&second).is_subset(&img(&first)));
        }

        #[test]
        fn streaming_matches_offline(
            w in arb_path(6, 30),
            sizes in prop::collection::vec(0usize..=6, 0..4),
        ) {
            let mut sizes = sizes;
            sizes.sort_unstable();
            let sets: Vec<StateSet> = sizes.iter().map(|&k| (0..k).collect()).collect();
            let stages = Stages::refinement(6, &sets).unwrap();
            let mut stream = StreamingErasure::new(&stages, w[0]);
            for t in 1..=w.len() {
                if t > 1 {
                    stream.push(&stages, w[t - 1]);
                }
                let offline = refinement_erase(&fp(&w[..t]), &sets).unwrap();
                prop_assert_eq!(stream.output(), offline.states());
            }
            let le_stages = Stages::loop_erasure(6);
            let mut le = StreamingErasure::new(&le_stages, w[0]);
            for &y in &w[1..] {
                le.push(&le_stages, y);
            }
            let offline = loop_erase(&fp(&w));
            prop_assert_eq!(le.output(), offline.path.states());
        }
    }
}
