//! `exact-law`: the exact law of an erased walk on a chain file.

use lerw::io::{parse_chain, write_chain, write_path_law};
use lerw::{enumerate_erasure_law, ExactLawOptions, MarkovChain, Pipeline, Rational, Scalar, StateSet};
use serde_json::json;

use super::{mode_name, positive, read_file};
use crate::args::ExactLawArgs;
use crate::config::Mode;
use crate::report::Report;
use crate::{CliError, Context};

fn parse_sets(chain: &MarkovChain<Rational>, text: &str) -> Result<Vec<StateSet>, CliError> {
    text.split(';')
        .map(|group| {
            let names: Vec<&str> = group.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            Ok(chain.state_set(&names)?)
        })
        .collect()
}

fn run<S: Scalar>(
    report: &mut Report,
    chain: &MarkovChain<S>,
    start: usize,
    target: &StateSet,
    pipeline: &Pipeline,
    opts: &ExactLawOptions,
    compare: bool,
) -> Result<(), CliError> {
    let law = enumerate_erasure_law(chain, start, target, pipeline, opts)?;
    report.file("law.txt", write_path_law(chain, &law));
    let accounted = law.total_mass() + law.tail_bound.clone();
    let mass_ok = if S::is_exact() {
        accounted == S::one()
    } else {
        (accounted.to_f64() - 1.0).abs() <= 1e-12
    };
    report.result("support_size", law.support.len());
    report.result("tail_bound", law.tail_bound.to_string());
    report.result("steps", law.steps);
    report.check("mass_accounted", mass_ok);
    if compare {
        let le = enumerate_erasure_law(chain, start, target, &Pipeline::LoopErasure, opts)?;
        let tv = law.total_variation(&le);
        let bound = law.tail_bound.clone() + le.tail_bound.clone();
        report.file("le_law.txt", write_path_law(chain, &le));
        report.result("tv_to_loop_erasure", tv.to_string());
        report.result("tails", bound.to_string());
        let ok = if S::is_exact() { tv <= bound } else { tv.to_f64() <= bound.to_f64() + 1e-12 };
        report.check("matches_loop_erasure", ok);
    }
    Ok(())
}

pub fn exact_law(ctx: &Context, args: &ExactLawArgs) -> Result<Report, CliError> {
    let path = args.chain.as_ref().ok_or_else(|| CliError::Usage("--chain FILE is required".into()))?;
    let chain: MarkovChain<Rational> = parse_chain(&read_file(path)?)?;
    let mode = ctx.mode.unwrap_or(Mode::Rational);
    let from = args.from.clone().unwrap_or_else(|| chain.label(0).to_string());
    let start = chain.index_of(&from)?;
    let to = args.to.clone().ok_or_else(|| CliError::Usage("--to is required".into()))?;
    let names: Vec<&str> = to.iter().map(String::as_str).collect();
    let target = chain.state_set(&names)?;
    let pipeline_name = args.pipeline.clone().unwrap_or_else(|| "le".into());
    let pipeline = match (pipeline_name.as_str(), &args.sets) {
        ("le", None) => Pipeline::LoopErasure,
        ("refine", Some(sets)) => Pipeline::Refinement(parse_sets(&chain, sets)?),
        ("le", Some(_)) => return Err(CliError::Usage("--sets only applies to --pipeline refine".into())),
        ("refine", None) => return Err(CliError::Usage("--pipeline refine needs --sets".into())),
        (other, _) => return Err(CliError::Usage(format!("unknown pipeline `{other}`; use le or refine"))),
    };
    let tolerance = positive("tolerance", args.tolerance.unwrap_or(1e-9))?;
    let max_length = positive("max-length", args.max_length.unwrap_or(10_000))?;
    let opts = ExactLawOptions::to_tolerance(tolerance, max_length);
    let config = json!({
        "chain": path,
        "chain_sha256": crate::config::config_hash(&json!(write_chain(&chain))),
        "mode": mode_name(mode),
        "from": from,
        "to": to,
        "pipeline": pipeline_name,
        "sets": args.sets,
        "tolerance": tolerance,
        "max_length": max_length,
        "compare": args.compare,
    });
    let mut report = Report::new("exact-law", config, None);
    match mode {
        Mode::Rational => run(&mut report, &chain, start, &target, &pipeline, &opts, args.compare)?,
        Mode::Double => run(&mut report, &chain.to_f64(), start, &target, &pipeline, &opts, args.compare)?,
    }
    Ok(report)
}
