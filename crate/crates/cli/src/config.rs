//! Experiment configuration files.
//!
//! A config is a TOML document:
//!
//! ```toml
//! name = "fig1_coin_toss_alpha1"
//! seeds = [1]
//! output_dir = "out/fig1"
//! emit_plots = true
//!
//! [environment]
//! name = "coin_toss"
//!
//! [algorithm]
//! name = "fixed_fraction"
//! alpha = 1.0
//! ```
//!
//! Sweeps add a `[sweep]` table mapping dotted parameter paths to value
//! lists, e.g. `"algorithm.lambda" = [0.0, 0.5, 1.0]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Overrides the root that relative output directories are resolved against.
pub const OUTPUT_ROOT_VAR: &str = "ERGO_OUTPUT_ROOT";

#[derive(Debug, Clone, Deserialize)]
pub struct Component {
    pub name: String,
    #[serde(flatten)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub emit_plots: bool,
    pub environment: Component,
    pub algorithm: Component,
    #[serde(default)]
    pub sweep: Option<toml::Table>,
}

fn default_output_dir() -> String {
    "out".into()
}

/// A parsed config together with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Directory of the config file; relative paths inside it resolve here.
    pub base_dir: PathBuf,
    pub hash: String,
}

pub fn load(path: &Path) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse(&text, base_dir).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str, base_dir: PathBuf) -> CliResult<LoadedConfig> {
    let raw: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if config.seeds.is_empty() {
        return Err(CliError::Config("`seeds` must list at least one seed".into()));
    }
    let mut unique = config.seeds.clone();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() != config.seeds.len() {
        return Err(CliError::Config("`seeds` contains duplicates".into()));
    }
    Ok(LoadedConfig {
        hash: config_hash(&raw),
        config,
        base_dir,
    })
}

impl LoadedConfig {
    /// Output directory: the explicit override, else `output_dir` under
    /// `$ERGO_OUTPUT_ROOT` when set, else `output_dir` as written.
    pub fn output_dir(&self, explicit: Option<&Path>) -> PathBuf {
        if let Some(p) = explicit {
            return p.to_path_buf();
        }
        let dir = PathBuf::from(&self.config.output_dir);
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
            _ => dir,
        }
    }
}

/// SHA-256 of the canonical JSON form (keys sorted at every level), so
/// reordering keys or tables leaves the hash unchanged.
pub fn config_hash(raw: &toml::Table) -> String {
    let mut canon = String::new();
    canonical_table(raw, &mut canon);
    let digest = Sha256::digest(canon.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn canonical_table(t: &toml::Table, out: &mut String) {
    let sorted: BTreeMap<&String, &toml::Value> = t.iter().collect();
    out.push('{');
    for (i, (k, v)) in sorted.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(k).expect("strings serialize"));
        out.push(':');
        canonical_value(v, out);
    }
    out.push('}');
}

fn canonical_value(v: &toml::Value, out: &mut String) {
    match v {
        toml::Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        toml::Value::Integer(i) => {
            let _ = write!(out, "{i}");
        }
        toml::Value::Float(f) => {
            let _ = write!(out, "{f:?}");
        }
        toml::Value::Boolean(b) => {
            let _ = write!(out, "{b}");
        }
        toml::Value::Datetime(d) => out.push_str(&serde_json::to_string(&d.to_string()).expect("strings serialize")),
        toml::Value::Array(xs) => {
            out.push('[');
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical_value(x, out);
            }
            out.push(']');
        }
        toml::Value::Table(t) => canonical_table(t, out),
    }
}

/// Typed view of a component's parameters; unknown keys are rejected.
pub fn params<T: serde::de::DeserializeOwned>(component: &Component, kind: &str) -> CliResult<T> {
    toml::Value::Table(component.params.clone())
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{kind} `{}`: {}", component.name, e.message())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
seeds = [1, 2]

[environment]
name = "coin_toss"
p_win = 0.5

[algorithm]
name = "fixed_fraction"
alpha = 1.0
horizon = 10
"#;

    #[test]
    fn hash_ignores_key_order() {
        let reordered = r#"
seeds = [1, 2]
name = "t"

[algorithm]
horizon = 10
alpha = 1.0
name = "fixed_fraction"

[environment]
p_win = 0.5
name = "coin_toss"
"#;
        let a = parse(BASE, PathBuf::new()).unwrap();
        let b = parse(reordered, PathBuf::new()).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.hash.len(), 64);
        let c = parse(&BASE.replace("horizon = 10", "horizon = 11"), PathBuf::new()).unwrap();
        assert_ne!(a.hash, c.hash);
    }

    #[test]
    fn empty_seeds_rejected() {
        let err = parse(&BASE.replace("[1, 2]", "[]"), PathBuf::new()).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse("name = \"x\"\nseeds = [1,\n[environment", PathBuf::new()).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn component_params_are_kept() {
        let c = parse(BASE, PathBuf::new()).unwrap();
        assert_eq!(c.config.algorithm.name, "fixed_fraction");
        assert_eq!(c.config.algorithm.params["horizon"].as_integer(), Some(10));
        assert!(!c.config.algorithm.params.contains_key("name"));
    }
}
