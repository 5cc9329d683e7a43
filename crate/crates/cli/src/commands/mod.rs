//! Subcommand implementations.

pub mod exact;
pub mod fractal;
pub mod verify;

use lerw::{MarkovChain, Scalar, StateSet};

use crate::config::Mode;
use crate::CliError;

/// `{a c d}` using chain labels.
pub(crate) fn render_set<S: Scalar>(chain: &MarkovChain<S>, set: &StateSet) -> String {
    let names: Vec<&str> = set.iter().map(|s| chain.label(s)).collect();
    format!("{{{}}}", names.join(" "))
}

pub(crate) fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Rational => "rational",
        Mode::Double => "double",
    }
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub(crate) fn positive<T: PartialOrd + Default + std::fmt::Display>(name: &str, v: T) -> Result<T, CliError> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}
