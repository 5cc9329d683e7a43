//! `graph`, `resist`, `simulate` and `converge` on gasket and carpet graphs.

use std::fmt::Write as _;

use lerw::fractal::uniform_network;
use lerw::io::{write_edges, write_vertices};
use lerw::limits::{
    coupled_refinement_distance, fractal_graph, kernel_convergence, lerw_set_law, resistance_scaling, Probe,
    SampleOptions, ScalingTable,
};
use lerw::network::walk_from_network;
use lerw::rng::derive_seed;
use lerw::scalar::parse_rational;
use lerw::{FractalGraph, FractalKind, Pipeline, Rational, Scalar, StateSet};
use serde_json::json;

use super::{mode_name, positive};
use crate::args::{ConvergeArgs, GraphArgs, ResistArgs, SimulateArgs};
use crate::config::{parse_levels, resolve_fractal, Mode};
use crate::report::{csv, Report};
use crate::{CliError, Context};

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn graph(_ctx: &Context, args: &GraphArgs) -> Result<Report, CliError> {
    let (kind, fractal) = resolve_fractal(&args.fractal)?;
    let level = args.level.unwrap_or(2);
    let g = fractal_graph(&kind, level)?;
    let mut report = Report::new("graph", json!({ "fractal": fractal, "level": level }), None);
    report.file("vertices.txt", write_vertices(&g));
    report.file("edges.txt", write_edges(&g));
    let sizes = g.nested_sizes();
    let first_level = |v: usize| sizes.iter().position(|&s| v < s).unwrap_or(level);
    let rows = (0..g.len()).map(|v| {
        let (x, y) = g.position(v);
        vec![v.to_string(), g.label(v).to_string(), first_level(v).to_string(), x.to_string(), y.to_string()]
    });
    report.file("labels.csv", csv(&["id", "label", "level", "x", "y"], rows));
    report.result("vertices", g.len());
    report.result("edges", g.edges().len());
    report.result("nested_sizes", sizes.to_vec());
    if matches!(kind, FractalKind::Gasket) {
        let p = 3usize.pow(level as u32 + 1);
        report.check("gasket_counts", g.len() == (p + 3) / 2 && g.edges().len() == p);
    }
    Ok(report)
}

/// Corner-to-corner probe: adjacent corners of the triangle, opposite
/// corners of the square.
fn corner_pair(kind: &FractalKind) -> (Probe, Probe) {
    match kind {
        FractalKind::Gasket => ((r(0, 1), r(0, 1)), (r(1, 1), r(0, 1))),
        FractalKind::Carpet(_) => ((r(0, 1), r(0, 1)), (r(1, 1), r(1, 1))),
    }
}

/// Three pairs at different distances and directions, all vertices from
/// level 1 on. Gasket coordinates are along the sides from the first corner.
fn probe_pairs(kind: &FractalKind) -> Vec<(Probe, Probe)> {
    match kind {
        FractalKind::Gasket => vec![
            ((r(0, 1), r(0, 1)), (r(1, 1), r(0, 1))),
            ((r(0, 1), r(0, 1)), (r(0, 1), r(1, 1))),
            ((r(1, 2), r(0, 1)), (r(0, 1), r(1, 2))),
        ],
        FractalKind::Carpet(t) => {
            let k = t.k() as i64;
            vec![
                ((r(0, 1), r(0, 1)), (r(1, 1), r(1, 1))),
                ((r(0, 1), r(0, 1)), (r(1, 1), r(0, 1))),
                ((r(1, k), r(0, 1)), (r(k - 1, k), r(1, 1))),
            ]
        }
    }
}

fn parse_pair(text: &str) -> Option<(Probe, Probe)> {
    let point = |s: &str| -> Option<Probe> {
        let (x, y) = s.split_once(',')?;
        Some((parse_rational(x.trim())?, parse_rational(y.trim())?))
    };
    let (a, b) = text.split_once(':')?;
    Some((point(a)?, point(b)?))
}

fn render_point(p: &Probe) -> String {
    format!("{} {}", p.0, p.1)
}

fn scaling_report<S: Scalar>(
    report: &mut Report,
    table: &ScalingTable<S>,
    pairs: &[(Probe, Probe)],
    band: Option<f64>,
    expect_constant: bool,
) {
    let mut rows = Vec::new();
    for (p, (a, b)) in pairs.iter().enumerate() {
        for (i, level) in table.levels.iter().enumerate() {
            let res = &table.resistances[p][i];
            let (ratio, ratio_f64) = match i.checked_sub(1).map(|j| &table.ratios[p][j]) {
                Some(q) => (q.to_string(), q.to_f64().to_string()),
                None => (String::new(), String::new()),
            };
            rows.push(vec![
                p.to_string(),
                render_point(a),
                render_point(b),
                level.to_string(),
                res.to_string(),
                res.to_f64().to_string(),
                ratio,
                ratio_f64,
            ]);
        }
    }
    report.file(
        "resistance.csv",
        csv(&["pair", "from", "to", "level", "resistance", "resistance_f64", "ratio", "ratio_f64"], rows),
    );
    let bands: Vec<f64> = (0..pairs.len()).map(|p| table.ratio_band(p)).collect();
    let identical: Vec<bool> = (0..pairs.len()).map(|p| table.ratios_identical(p)).collect();
    report.result("ratio_bands", bands.clone());
    report.result("ratios_identical", identical.clone());
    report.result("gamma_hat", table.gamma_hat);
    report.result("c1", table.c1);
    report.result("c2", table.c2);
    report.check("envelope_nondegenerate", table.envelope_nondegenerate());
    if let Some(band) = band {
        report.check("ratio_band_within", bands.iter().all(|&b| b <= band));
    }
    if expect_constant {
        report.check("ratios_identical", identical.iter().all(|&b| b));
    }
}

pub fn resist(ctx: &Context, args: &ResistArgs) -> Result<Report, CliError> {
    let (kind, fractal) = resolve_fractal(&args.fractal)?;
    let mode = ctx.mode.unwrap_or(Mode::Rational);
    let levels_text = args.levels.clone().unwrap_or_else(|| "1..3".into());
    let levels = parse_levels(&levels_text)?;
    if levels.len() < 2 {
        return Err(CliError::Usage("resistance scaling needs at least two levels".into()));
    }
    let requested = args.pairs.clone().unwrap_or_else(|| vec!["corners".into()]);
    let mut pairs = Vec::new();
    for name in &requested {
        match name.as_str() {
            "corners" => pairs.push(corner_pair(&kind)),
            "probes" => pairs.extend(probe_pairs(&kind)),
            other => pairs.push(
                parse_pair(other)
                    .ok_or_else(|| CliError::Usage(format!("cannot read pair `{other}`; use x1,y1:x2,y2")))?,
            ),
        }
    }
    let config = json!({
        "fractal": fractal,
        "mode": mode_name(mode),
        "levels": levels,
        "pairs": pairs.iter().map(|(a, b)| format!("{}:{}", render_point(a), render_point(b))).collect::<Vec<_>>(),
        "band": args.band,
        "expect_constant": args.expect_constant,
    });
    let mut report = Report::new("resist", config, None);
    match mode {
        Mode::Rational => {
            let table = resistance_scaling::<Rational>(&kind, &levels, &pairs)?;
            scaling_report(&mut report, &table, &pairs, args.band, args.expect_constant);
        }
        Mode::Double => {
            let table = resistance_scaling::<f64>(&kind, &levels, &pairs)?;
            scaling_report(&mut report, &table, &pairs, args.band, args.expect_constant);
        }
    }
    Ok(report)
}

/// First corner, and by default the remaining corners of the triangle or
/// the opposite corner of the square.
fn default_ends(kind: &FractalKind) -> (String, Vec<String>) {
    match kind {
        FractalKind::Gasket => ("q1".into(), vec!["q2".into(), "q3".into()]),
        FractalKind::Carpet(_) => ("c00".into(), vec!["c11".into()]),
    }
}

fn ends(
    g: &FractalGraph,
    kind: &FractalKind,
    from: &Option<String>,
    to: &Option<Vec<String>>,
) -> Result<(String, Vec<String>, usize, StateSet), CliError> {
    let (df, dt) = default_ends(kind);
    let from = from.clone().unwrap_or(df);
    let to = to.clone().unwrap_or(dt);
    let start = g.index_of(&from)?;
    let target = to.iter().map(|l| g.index_of(l)).collect::<lerw::Result<StateSet>>()?;
    if target.is_empty() {
        return Err(CliError::Usage("--to needs at least one vertex".into()));
    }
    Ok((from, to, start, target))
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<Report, CliError> {
    let (kind, fractal) = resolve_fractal(&args.fractal)?;
    let level = args.level.unwrap_or(2);
    let samples = positive("samples", args.samples.unwrap_or(10_000))?;
    let pipeline_name = args.pipeline.clone().unwrap_or_else(|| "le".into());
    let g = fractal_graph(&kind, level)?;
    let (from, to, start, target) = ends(&g, &kind, &args.from, &args.to)?;
    let pipeline = match pipeline_name.as_str() {
        "le" => Pipeline::LoopErasure,
        "refine" => Pipeline::Refinement((1..=level).map(|j| g.nested(j)).collect()),
        other => return Err(CliError::Usage(format!("unknown pipeline `{other}`; use le or refine"))),
    };
    let mut options = SampleOptions::new(samples, ctx.seed);
    options.workers = ctx.workers;
    if let Some(cap) = args.step_cap {
        options.step_cap = positive("step-cap", cap)?;
    }
    let config = json!({
        "fractal": fractal,
        "level": level,
        "from": from,
        "to": to,
        "samples": samples,
        "pipeline": pipeline_name,
        "step_cap": options.step_cap,
        "seed": ctx.seed,
    });
    let chain = walk_from_network(&uniform_network::<f64>(&g));
    let run = lerw_set_law(&g, &chain, start, &target, &pipeline, &options)?;
    let mut law = String::from("# count\tprobability\tscale\tpoints (lattice units of 1/scale)\n");
    for (set, count) in run.law.atoms() {
        let points: Vec<String> = set.lattice_points().iter().map(|(a, b)| format!("{a},{b}")).collect();
        let _ = writeln!(
            law,
            "{count}\t{}\t{}\t{}",
            *count as f64 / samples as f64,
            set.scale(),
            points.join(" ")
        );
    }
    let mut report = Report::new("simulate", config, Some(ctx.seed));
    report.file("law.txt", law);
    report.result("samples", samples);
    report.result("support_size", run.law.support_size());
    report.result("simple", run.simple);
    report.result("endpoints_ok", run.endpoints_ok);
    report.check("all_simple", run.simple == samples);
    report.check("endpoints_correct", run.endpoints_ok == samples);
    Ok(report)
}

pub fn converge(ctx: &Context, args: &ConvergeArgs) -> Result<Report, CliError> {
    let (kind, fractal) = resolve_fractal(&args.fractal)?;
    let mode = ctx.mode.unwrap_or(Mode::Double);
    let levels = parse_levels(&args.levels.clone().unwrap_or_else(|| "1..3".into()))?;
    let samples = positive("samples", args.samples.unwrap_or(10_000))?;
    let base = args.kernel_base.unwrap_or(levels[0]);
    let kernel_levels = match &args.kernel_levels {
        Some(t) => parse_levels(t)?,
        None => levels.clone(),
    };
    let base_graph = fractal_graph(&kind, base)?;
    let kernel_target = args
        .kernel_target
        .clone()
        .unwrap_or_else(|| base_graph.label(base_graph.len() - 1).to_string());
    let y = base_graph.index_of(&kernel_target)?;
    let (from, to, _, _) = ends(&base_graph, &kind, &args.from, &args.to)?;
    let config = json!({
        "fractal": fractal,
        "mode": mode_name(mode),
        "levels": levels,
        "from": from,
        "to": to,
        "samples": samples,
        "kernel_base": base,
        "kernel_levels": kernel_levels,
        "kernel_target": kernel_target,
        "seed": ctx.seed,
    });
    let mut report = Report::new("converge", config, Some(ctx.seed));

    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for pair in levels.windows(2) {
        let (coarse, fine) = (pair[0], pair[1]);
        let g = fractal_graph(&kind, fine)?;
        let (_, _, start, target) = ends(&g, &kind, &Some(from.clone()), &Some(to.clone()))?;
        let mut options = SampleOptions::new(samples, derive_seed(ctx.seed, &format!("couple-{coarse}-{fine}")));
        options.workers = ctx.workers;
        let run = coupled_refinement_distance(&g, coarse, start, &target, &options)?;
        let s = &run.summary;
        medians.push(s.median);
        rows.push(
            [coarse as f64, fine as f64, s.count as f64, s.mean, s.min, s.q25, s.median, s.q75, s.max]
                .iter()
                .map(f64::to_string)
                .collect(),
        );
    }
    report.file(
        "distances.csv",
        csv(&["coarse", "fine", "count", "mean", "min", "q25", "median", "q75", "max"], rows),
    );
    report.result("medians", medians.clone());
    if medians.len() >= 2 {
        report.check("median_strictly_decreasing", medians.windows(2).all(|w| w[1] < w[0]));
    }

    let (differences, kernel_rows) = match mode {
        Mode::Rational => kernel_table::<Rational>(&kind, base, y, &kernel_levels)?,
        Mode::Double => kernel_table::<f64>(&kind, base, y, &kernel_levels)?,
    };
    report.file("kernels.csv", csv(&["level", "from", "to", "probability"], kernel_rows));
    let diff_rows = kernel_levels
        .windows(2)
        .zip(&differences)
        .map(|(w, d)| vec![w[0].to_string(), w[1].to_string(), d.to_string()]);
    report.file("kernel_differences.csv", csv(&["from_level", "to_level", "max_difference"], diff_rows));
    report.result("kernel_differences", differences.clone());
    if differences.len() >= 2 {
        report.check("kernel_differences_strictly_decreasing", differences.windows(2).all(|w| w[1] < w[0]));
    }
    Ok(report)
}

fn kernel_table<S: Scalar>(
    kind: &FractalKind,
    base: usize,
    y: usize,
    levels: &[usize],
) -> Result<(Vec<f64>, Vec<Vec<String>>), CliError> {
    let table = kernel_convergence::<S>(kind, base, y, levels)?;
    let mut rows = Vec::new();
    for (level, kernel) in table.levels.iter().zip(&table.kernels) {
        for (a, row) in kernel.iter().enumerate() {
            for (b, p) in row.iter().enumerate() {
                if !p.is_zero() {
                    rows.push(vec![level.to_string(), table.states[a].clone(), table.states[b].clone(), p.to_string()]);
                }
            }
        }
    }
    Ok((table.differences, rows))
}
