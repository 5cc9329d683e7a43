//! Random instances for property checks: rational chains, subsets and nested
//! subset sequences.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::chain::{MarkovChain, StateSet};
use crate::scalar::{Rational, Scalar};

/// A random chain on `n` states whose entries are multiples of `1/denominator`.
///
/// Each state keeps every transition with probability `density` (at least
/// one is always kept), and the `denominator` units are shared among the
/// kept transitions with each getting at least one.
pub fn random_rational_chain<R: Rng + ?Sized>(
    n: usize,
    denominator: u32,
    density: f64,
    rng: &mut R,
) -> MarkovChain<Rational> {
    assert!(n > 0 && denominator as usize >= n);
    let rows = (0..n)
        .map(|_| {
            let mut support: Vec<usize> = (0..n).filter(|_| rng.gen_bool(density)).collect();
            if support.is_empty() {
                support.push(rng.gen_range(0..n));
            }
            let mut units = vec![0u32; n];
            for &s in &support {
                units[s] = 1;
            }
            for _ in 0..denominator - support.len() as u32 {
                units[*support.choose(rng).expect("non-empty")] += 1;
            }
            units
                .into_iter()
                .map(|u| Rational::from_ratio(i64::from(u), i64::from(denominator)))
                .collect()
        })
        .collect();
    let labels = (0..n).map(|i| format!("s{i}")).collect();
    MarkovChain::new(labels, rows).expect("rows sum to one by construction")
}

/// All subsets of `0..n`, in binary counting order.
pub fn all_subsets(n: usize) -> impl Iterator<Item = StateSet> {
    (0u64..1 << n).map(move |bits| (0..n).filter(|&i| bits >> i & 1 == 1).collect())
}

/// Every strictly increasing sequence `∅ ≠ V_1 ⊊ ⋯ ⊊ V_levels = {0..n}`.
pub fn nested_sequences(n: usize, levels: usize) -> Vec<Vec<StateSet>> {
    fn extend(top: &StateSet, remaining: usize, n: usize, out: &mut Vec<Vec<StateSet>>) {
        // Sequences ending at `top` with `remaining` sets before it.
        if remaining == 0 {
            out.push(vec![top.clone()]);
            return;
        }
        for below in all_subsets(n) {
            if below.is_empty() || below.len() >= top.len() || !below.is_subset(top) {
                continue;
            }
            let mut tails = Vec::new();
            extend(&below, remaining - 1, n, &mut tails);
            for mut seq in tails {
                seq.push(top.clone());
                out.push(seq);
            }
        }
    }
    let mut out = Vec::new();
    if levels > 0 {
        extend(&StateSet::full(n), levels - 1, n, &mut out);
    }
    out
}
