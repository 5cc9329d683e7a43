//! Command-line flags. Every parameter is optional here so that flags can be
//! laid over a JSON config file; defaults are filled in by each command.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::Mode;

#[derive(Debug, Parser)]
#[command(name = "lerw", version, about = "Loop-erasure verification and fractal random-walk experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalArgs {
    /// Master seed; drawn at random (and printed) when absent.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Arithmetic for exact computations.
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// JSON file with parameters; flags given on the command line win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory; each subcommand writes into its own subdirectory.
    #[arg(long, global = true, env = "LERW_OUT_DIR")]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Compare loop-erasure and refinement laws exactly over a chain family.
    VerifyTheorem1(Theorem1Args),
    /// Check the Green's function swap identity and symmetry of F_B.
    VerifyGreen(GreenArgs),
    /// Export a gasket or carpet graph.
    Graph(GraphArgs),
    /// Effective-resistance scaling across levels.
    Resist(ResistArgs),
    /// Sample loop-erased walks on a fractal graph.
    Simulate(SimulateArgs),
    /// Coupled refinement distances and traced-kernel convergence.
    Converge(ConvergeArgs),
    /// Exact law of an erased walk on a chain file.
    ExactLaw(ExactLawArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyTheorem1(_) => "verify-theorem1",
            Command::VerifyGreen(_) => "verify-green",
            Command::Graph(_) => "graph",
            Command::Resist(_) => "resist",
            Command::Simulate(_) => "simulate",
            Command::Converge(_) => "converge",
            Command::ExactLaw(_) => "exact-law",
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct Theorem1Args {
    /// Chain file to verify instead of a random family.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<PathBuf>,
    /// Start state for a chain file (default: its first state).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    /// Number of random chains.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_states: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_states: Option<usize>,
    /// Random entries are multiples of 1/denominator.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denominator: Option<u32>,
    /// Probability that a transition is present.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    /// Lengths of the nested sequences, e.g. `2,3`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    /// Largest unenumerated mass allowed per law.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Longest trajectory enumerated.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_length: Option<usize>,
    /// Corrupt the first partial erasure (negative control).
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub inject_fault: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GreenArgs {
    /// Random (chain, B, x, y) instances for the swap identity.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<u64>,
    /// Random (chain, B, points) instances for the permutation check.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perm_instances: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_states: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_states: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denominator: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FractalArgs {
    /// Sierpinski gasket graphs.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub gasket: bool,
    /// Carpet graphs from `standard` or a template file.
    #[arg(long, value_name = "standard|FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carpet: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub fractal: FractalArgs,
    /// Level.
    #[arg(short = 'm', long = "level")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ResistArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub fractal: FractalArgs,
    /// Levels, e.g. `1..4` or `1,2,3`.
    #[arg(short = 'm', long = "levels")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<String>,
    /// `corners`, `probes`, or `x1,y1:x2,y2` in exact frame coordinates.
    #[arg(long = "pair")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<String>>,
    /// Assert that each pair's successive ratios spread by at most this
    /// relative band.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    /// Assert that each pair's successive ratios are identical.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub expect_constant: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub fractal: FractalArgs,
    #[arg(short = 'm', long = "level")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Start vertex label (default: first corner).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    /// Target vertex labels, comma separated (default: the other corners).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<Vec<String>>,
    /// Number of trajectories.
    #[arg(short = 'n', long = "samples")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    /// `le` or `refine` (partial erasures along V_1, ..., V_m).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    /// Longest trajectory allowed before a run is aborted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub fractal: FractalArgs,
    /// Levels; consecutive pairs are coupled, e.g. `1..3`.
    #[arg(short = 'm', long = "levels")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<Vec<String>>,
    #[arg(short = 'n', long = "samples")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    /// Level m of the vertex set V_m the kernels live on.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_base: Option<usize>,
    /// Levels m' of the walks whose traces are compared, e.g. `1..4`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_levels: Option<String>,
    /// Killing vertex y (default: the last vertex of V_m).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_target: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactLawArgs {
    /// Chain file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<Vec<String>>,
    /// `le` or `refine`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    /// Nested sets for `refine`: `a,c;a,b,c` (the last must be every state).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sets: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_length: Option<usize>,
    /// Also compute the loop-erasure law and check the total variation
    /// against the two tails.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub compare: bool,
}
