//! Merging a JSON config file with flags, config hashing and small parsers
//! shared by the subcommands.

use std::collections::hash_map::RandomState;
use std::hash::{BuildHasher, Hasher};
use std::path::Path;

use clap::ValueEnum;
use lerw::fractal::CarpetTemplate;
use lerw::io::parse_template;
use lerw::FractalKind;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::FractalArgs;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rational,
    Double,
}

/// Lay `flags` over `file`; keys present in `flags` win, nested objects
/// merge key by key.
pub fn merge(file: Value, flags: Value) -> Value {
    match (file, flags) {
        (Value::Object(mut base), Value::Object(over)) => {
            for (k, v) in over {
                let merged = match base.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                base.insert(k, merged);
            }
            Value::Object(base)
        }
        (_, flags) => flags,
    }
}

pub fn read_config_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::Usage(format!("config {} must hold a JSON object", path.display())));
    }
    Ok(value)
}

/// SHA-256 of the compact JSON form (object keys are sorted).
pub fn config_hash(config: &Value) -> String {
    let text = serde_json::to_string(config).expect("JSON values serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// A fresh seed for runs that did not ask for one.
pub fn auto_seed() -> u64 {
    let mut h = RandomState::new().build_hasher();
    h.write_u64(u64::from(std::process::id()));
    h.finish()
}

/// `3`, `1,2,4` or the inclusive range `1..4`.
pub fn parse_levels(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("cannot read levels `{text}`; use 3, 1,2,4 or 1..4"));
    let levels: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        text.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad());
    }
    Ok(levels)
}

/// The chosen fractal plus a description that goes into the config.
pub fn resolve_fractal(args: &FractalArgs) -> Result<(FractalKind, Value), CliError> {
    match (args.gasket, &args.carpet) {
        (true, None) => Ok((FractalKind::Gasket, Value::from("gasket"))),
        (false, Some(name)) if name == "standard" => Ok((
            FractalKind::Carpet(CarpetTemplate::standard()),
            serde_json::json!({ "carpet": "standard" }),
        )),
        (false, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read template {path}: {e}")))?;
            let template = parse_template(&text)?;
            let description = serde_json::json!({ "carpet": path, "k": template.k(), "cells": template.cells() });
            Ok((FractalKind::Carpet(template), description))
        }
        (true, Some(_)) => Err(CliError::Usage("choose one of --gasket and --carpet".into())),
        (false, None) => Err(CliError::Usage("a fractal is required: --gasket or --carpet <standard|FILE>".into())),
    }
}
