//! `verify-theorem1` and `verify-green`: exact checks over chain families.

use std::fmt::Write as _;

use lerw::exactlaw::{enumerate_erasure_law, f_product, green as green_fn};
use lerw::fuzz::{all_subsets, nested_sequences, random_rational_chain};
use lerw::io::{parse_chain, write_chain};
use lerw::rng::{derive_seed, parallel_map, trajectory_rng, StreamRng};
use lerw::{reachability_closure, ExactLawOptions, MarkovChain, Pipeline, Rational, Scalar, StateSet};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

use super::{mode_name, positive, read_file, render_set};
use crate::args::{GreenArgs, Theorem1Args};
use crate::config::Mode;
use crate::report::{csv, Report, COUNTEREXAMPLE};
use crate::{CliError, Context};

/// Largest slack allowed for floating comparisons in double mode.
const DOUBLE_SLACK: f64 = 1e-12;

#[derive(Debug, Default)]
struct ChainOutcome {
    states: usize,
    targets: usize,
    sequences: usize,
    cases: usize,
    max_tv: f64,
    max_tail: f64,
    failures: usize,
    counterexample: Option<String>,
}

/// LE law against every refinement law for every target reached from `x`.
fn check_chain<S: Scalar>(
    chain: &MarkovChain<S>,
    x: usize,
    levels: &[usize],
    opts: &ExactLawOptions,
    inject_fault: bool,
) -> lerw::Result<ChainOutcome> {
    let n = chain.len();
    let sequences: Vec<Vec<StateSet>> = levels.iter().flat_map(|&l| nested_sequences(n, l)).collect();
    let faulty = ExactLawOptions {
        inject_fault,
        ..opts.clone()
    };
    let mut out = ChainOutcome {
        states: n,
        sequences: sequences.len(),
        ..Default::default()
    };
    for target in all_subsets(n).filter(|a| !a.is_empty()) {
        if !target.contains(x) && !reachability_closure(chain, &target).contains(x) {
            continue;
        }
        out.targets += 1;
        let le = enumerate_erasure_law(chain, x, &target, &Pipeline::LoopErasure, opts)?;
        for sets in &sequences {
            let refined = enumerate_erasure_law(chain, x, &target, &Pipeline::Refinement(sets.clone()), &faulty)?;
            let tv = le.total_variation(&refined);
            let bound = le.tail_bound.clone() + refined.tail_bound.clone();
            let ok = if S::is_exact() {
                tv <= bound
            } else {
                tv.to_f64() <= bound.to_f64() + DOUBLE_SLACK
            };
            out.cases += 1;
            out.max_tv = out.max_tv.max(tv.to_f64());
            out.max_tail = out.max_tail.max(le.tail_bound.to_f64()).max(refined.tail_bound.to_f64());
            if ok {
                continue;
            }
            out.failures += 1;
            if out.counterexample.is_none() {
                let mut text = write_chain(chain);
                let _ = writeln!(text, "start {}", chain.label(x));
                let _ = writeln!(text, "target {}", render_set(chain, &target));
                let rendered: Vec<String> = sets.iter().map(|s| render_set(chain, s)).collect();
                let _ = writeln!(text, "sets {}", rendered.join(" "));
                let _ = writeln!(
                    text,
                    "total variation {tv} (~{}) exceeds tails {bound} (~{})",
                    tv.to_f64(),
                    bound.to_f64()
                );
                if let Some((path, p, q)) = le.largest_discrepancy(&refined) {
                    let _ = writeln!(
                        text,
                        "path {}: loop erasure {p} (~{}), refinement {q} (~{})",
                        chain.render_path(&path),
                        p.to_f64(),
                        q.to_f64()
                    );
                }
                out.counterexample = Some(text);
            }
        }
    }
    Ok(out)
}

enum Family {
    File { chain: MarkovChain<Rational>, start: usize },
    Random { count: u64, min: usize, max: usize, denominator: u32, density: f64, seed: u64 },
}

impl Family {
    fn len(&self) -> u64 {
        match self {
            Family::File { .. } => 1,
            Family::Random { count, .. } => *count,
        }
    }

    fn chain(&self, i: u64) -> (MarkovChain<Rational>, usize) {
        match self {
            Family::File { chain, start } => (chain.clone(), *start),
            Family::Random { count, min, max, denominator, density, seed } => {
                // Sizes sweep evenly from `min` to `max` across the family.
                let span = (max - min + 1) as u64;
                let n = min + (i * span / count) as usize;
                let chain = random_rational_chain(n, *denominator, *density, &mut trajectory_rng(*seed, i));
                (chain, 0)
            }
        }
    }
}

pub fn theorem1(ctx: &Context, args: &Theorem1Args) -> Result<Report, CliError> {
    let mode = ctx.mode.unwrap_or(Mode::Rational);
    let levels = args.levels.clone().unwrap_or_else(|| vec![2, 3]);
    if levels.is_empty() || levels.contains(&0) {
        return Err(CliError::Usage("--levels must list positive sequence lengths".into()));
    }
    let tolerance = positive("tolerance", args.tolerance.unwrap_or(1e-9))?;
    let max_length = positive("max-length", args.max_length.unwrap_or(10_000))?;
    let opts = ExactLawOptions::to_tolerance(tolerance, max_length);
    let mut config = json!({
        "mode": mode_name(mode),
        "levels": levels,
        "tolerance": tolerance,
        "max_length": max_length,
        "inject_fault": args.inject_fault,
    });
    let (family, seed) = match &args.chain {
        Some(path) => {
            let chain: MarkovChain<Rational> = parse_chain(&read_file(path)?)?;
            let start = match &args.from {
                Some(label) => chain.index_of(label)?,
                None => 0,
            };
            config["chain"] = json!(path);
            config["chain_sha256"] = json!(crate::config::config_hash(&json!(write_chain(&chain))));
            config["from"] = json!(chain.label(start));
            (Family::File { chain, start }, None)
        }
        None => {
            let count = positive("chains", args.chains.unwrap_or(100))?;
            let min = args.min_states.unwrap_or(3);
            let max = args.max_states.unwrap_or(5);
            let denominator = args.denominator.unwrap_or(12);
            let density = args.density.unwrap_or(0.8);
            if min < 1 || max < min || (denominator as usize) < max || !(0.0..=1.0).contains(&density) {
                return Err(CliError::Usage(
                    "need 1 ≤ min-states ≤ max-states ≤ denominator and density in [0, 1]".into(),
                ));
            }
            config["chains"] = json!(count);
            config["min_states"] = json!(min);
            config["max_states"] = json!(max);
            config["denominator"] = json!(denominator);
            config["density"] = json!(density);
            config["seed"] = json!(ctx.seed);
            let family = Family::Random { count, min, max, denominator, density, seed: ctx.seed };
            (family, Some(ctx.seed))
        }
    };
    let outcomes = parallel_map(family.len(), ctx.workers, |i| {
        let (chain, start) = family.chain(i);
        match mode {
            Mode::Rational => check_chain(&chain, start, &levels, &opts, args.inject_fault),
            Mode::Double => check_chain(&chain.to_f64(), start, &levels, &opts, args.inject_fault),
        }
    })
    .into_iter()
    .collect::<lerw::Result<Vec<ChainOutcome>>>()?;

    let mut report = Report::new("verify-theorem1", config, seed);
    let rows = outcomes.iter().enumerate().map(|(i, o)| {
        vec![
            i.to_string(),
            o.states.to_string(),
            o.targets.to_string(),
            o.sequences.to_string(),
            o.cases.to_string(),
            o.max_tv.to_string(),
            o.max_tail.to_string(),
            o.failures.to_string(),
        ]
    });
    report.file(
        "theorem1.csv",
        csv(&["chain", "states", "targets", "sequences", "cases", "max_tv", "max_tail", "failures"], rows),
    );
    let cases: usize = outcomes.iter().map(|o| o.cases).sum();
    let failures: usize = outcomes.iter().map(|o| o.failures).sum();
    let max_tv = outcomes.iter().map(|o| o.max_tv).fold(0.0, f64::max);
    let max_tail = outcomes.iter().map(|o| o.max_tail).fold(0.0, f64::max);
    report.result("chains", outcomes.len());
    report.result("cases", cases);
    report.result("failures", failures);
    report.result("max_tv", max_tv);
    report.result("max_tail", max_tail);
    report.check("laws_agree_within_tails", failures == 0);
    report.check("tails_within_tolerance", max_tail <= tolerance);
    if let Some((i, o)) = outcomes.iter().enumerate().find(|(_, o)| o.counterexample.is_some()) {
        let text = format!("# chain {i}\n{}", o.counterexample.as_deref().unwrap_or_default());
        report.file(COUNTEREXAMPLE, text);
    }
    Ok(report)
}

struct GreenFamily {
    min: usize,
    max: usize,
    denominator: u32,
    density: f64,
}

const MAX_DRAWS: usize = 10_000;

impl GreenFamily {
    fn chain(&self, rng: &mut StreamRng, min: usize) -> MarkovChain<Rational> {
        let n = rng.gen_range(min.max(self.min)..=self.max);
        random_rational_chain(n, self.denominator, self.density, rng)
    }
}

/// Random subset of `0..n` with between `lo` and `n - 1` elements.
fn proper_subset(n: usize, lo: usize, rng: &mut StreamRng) -> StateSet {
    let size = rng.gen_range(lo..n);
    let mut states: Vec<usize> = (0..n).collect();
    states.shuffle(rng);
    states[..size].iter().copied().collect()
}

fn equal<S: Scalar>(a: &S, b: &S) -> bool {
    if S::is_exact() {
        a == b
    } else {
        let (x, y) = (a.to_f64(), b.to_f64());
        (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0)
    }
}

struct SwapRow {
    cells: Vec<String>,
    ok: bool,
    chain: String,
}

fn swap_instance<S: Scalar>(chain: &MarkovChain<S>, domain: &StateSet, x: usize, y: usize) -> lerw::Result<SwapRow> {
    let lhs = green_fn(chain, &domain.without(y), x, x)? * green_fn(chain, domain, y, y)?;
    let rhs = green_fn(chain, domain, x, x)? * green_fn(chain, &domain.without(x), y, y)?;
    Ok(SwapRow {
        ok: equal(&lhs, &rhs),
        cells: vec![
            chain.len().to_string(),
            render_set(chain, domain),
            chain.label(x).to_string(),
            chain.label(y).to_string(),
            lhs.to_string(),
            rhs.to_string(),
        ],
        chain: write_chain(chain),
    })
}

fn permutation_instance<S: Scalar>(chain: &MarkovChain<S>, domain: &StateSet, points: &[usize]) -> lerw::Result<SwapRow> {
    let [a, b, c] = [points[0], points[1], points[2]];
    let orders = [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]];
    let values = orders
        .iter()
        .map(|o| f_product(chain, domain, o))
        .collect::<lerw::Result<Vec<S>>>()?;
    Ok(SwapRow {
        ok: values.iter().all(|v| equal(v, &values[0])),
        cells: vec![
            chain.len().to_string(),
            render_set(chain, domain),
            chain.render_path(points),
            values[0].to_string(),
        ],
        chain: write_chain(chain),
    })
}

/// Draw instances until `build` succeeds; chains where `B` is not left
/// almost surely make the Green's function infinite and are redrawn.
fn draw<F>(seed: u64, i: u64, mut build: F) -> Result<SwapRow, CliError>
where
    F: FnMut(&mut StreamRng) -> Option<lerw::Result<SwapRow>>,
{
    let mut rng = trajectory_rng(seed, i);
    for _ in 0..MAX_DRAWS {
        match build(&mut rng) {
            Some(Ok(row)) => return Ok(row),
            Some(Err(lerw::Error::Singular(_))) | None => continue,
            Some(Err(e)) => return Err(e.into()),
        }
    }
    Err(CliError::Usage(format!("instance {i}: no usable draw in {MAX_DRAWS} attempts")))
}

pub fn green(ctx: &Context, args: &GreenArgs) -> Result<Report, CliError> {
    let mode = ctx.mode.unwrap_or(Mode::Rational);
    let instances = args.instances.unwrap_or(1000);
    let perm_instances = args.perm_instances.unwrap_or(100);
    let family = GreenFamily {
        min: args.min_states.unwrap_or(3),
        max: args.max_states.unwrap_or(5),
        denominator: args.denominator.unwrap_or(10),
        density: args.density.unwrap_or(0.7),
    };
    if family.min < 3 || family.max < family.min || (family.denominator as usize) < family.max {
        return Err(CliError::Usage("need 3 ≤ min-states ≤ max-states ≤ denominator".into()));
    }
    if perm_instances > 0 && family.max < 4 {
        return Err(CliError::Usage("permutation instances need max-states ≥ 4".into()));
    }
    let config = json!({
        "mode": mode_name(mode),
        "seed": ctx.seed,
        "instances": instances,
        "perm_instances": perm_instances,
        "min_states": family.min,
        "max_states": family.max,
        "denominator": family.denominator,
        "density": family.density,
    });
    let swap_seed = derive_seed(ctx.seed, "swap");
    let swaps = parallel_map(instances, ctx.workers, |i| {
        draw(swap_seed, i, |rng| {
            let chain = family.chain(rng, 3);
            let domain = proper_subset(chain.len(), 2, rng);
            let mut pts: Vec<usize> = domain.iter().collect();
            pts.shuffle(rng);
            let (x, y) = (pts[0], pts[1]);
            Some(match mode {
                Mode::Rational => swap_instance(&chain, &domain, x, y),
                Mode::Double => swap_instance(&chain.to_f64(), &domain, x, y),
            })
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let perm_seed = derive_seed(ctx.seed, "permutations");
    let perms = parallel_map(perm_instances, ctx.workers, |i| {
        draw(perm_seed, i, |rng| {
            let chain = family.chain(rng, 4);
            let domain = proper_subset(chain.len(), 3, rng);
            let mut pts: Vec<usize> = domain.iter().collect();
            pts.shuffle(rng);
            Some(match mode {
                Mode::Rational => permutation_instance(&chain, &domain, &pts[..3]),
                Mode::Double => permutation_instance(&chain.to_f64(), &domain, &pts[..3]),
            })
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut report = Report::new("verify-green", config, Some(ctx.seed));
    fn table(rows: &[SwapRow]) -> Vec<Vec<String>> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                let mut cells = vec![i.to_string()];
                cells.extend(r.cells.iter().cloned());
                cells.push(r.ok.to_string());
                cells
            })
            .collect()
    }
    report.file(
        "green.csv",
        csv(&["instance", "states", "domain", "x", "y", "lhs", "rhs", "equal"], table(&swaps)),
    );
    report.file(
        "permutations.csv",
        csv(&["instance", "states", "domain", "points", "value", "equal"], table(&perms)),
    );
    let swap_failures = swaps.iter().filter(|r| !r.ok).count();
    let perm_failures = perms.iter().filter(|r| !r.ok).count();
    report.result("identity_instances", swaps.len());
    report.result("identity_failures", swap_failures);
    report.result("permutation_instances", perms.len());
    report.result("permutation_failures", perm_failures);
    report.check("swap_identity", swap_failures == 0);
    report.check("permutation_invariance", perm_failures == 0);
    let first_bad = swaps
        .iter()
        .enumerate()
        .find(|(_, r)| !r.ok)
        .map(|(i, r)| ("green.csv", i, r))
        .or_else(|| perms.iter().enumerate().find(|(_, r)| !r.ok).map(|(i, r)| ("permutations.csv", i, r)));
    if let Some((table, i, row)) = first_bad {
        report.file(COUNTEREXAMPLE, format!("# {table} instance {i}: {}\n{}", row.cells.join(" | "), row.chain));
    }
    Ok(report)
}
