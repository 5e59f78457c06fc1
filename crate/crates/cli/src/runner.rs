//! `run` and `sweep`: fan seeds and grid points out in parallel, write the
//! CSVs, render plots in a second pass, and write the manifest last.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, Component, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::experiments::{run_seed, Artifacts};
use crate::plot;
use crate::registry::{check_algorithm, check_pair, resolve_environment};

pub const MANIFEST: &str = "manifest.json";
const CONFIG_COPY: &str = "config.toml";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// Grid point for sweeps, as `key=value` pairs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub point: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub command: String,
    pub config_hash: String,
    pub artifact_version: String,
    pub environment: String,
    pub algorithm: String,
    pub runs: Vec<RunRecord>,
    /// Every file in the output directory except the manifest itself.
    pub files: Vec<String>,
}

/// Prepares the output directory. A directory holding an earlier manifest
/// is cleared of the files it lists; any other non-empty directory is refused.
fn prepare_output(dir: &Path) -> CliResult<()> {
    if dir.exists() {
        let manifest = dir.join(MANIFEST);
        if manifest.exists() {
            let old: RunManifest = serde_json::from_str(&fs::read_to_string(&manifest)?)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", manifest.display())))?;
            fs::remove_file(&manifest)?;
            let mut subdirs = std::collections::BTreeSet::new();
            for f in &old.files {
                let p = dir.join(f);
                if p.is_file() {
                    fs::remove_file(&p)?;
                }
                let mut rel = Path::new(f).parent();
                while let Some(r) = rel.filter(|r| !r.as_os_str().is_empty()) {
                    subdirs.insert(r.to_path_buf());
                    rel = r.parent();
                }
            }
            let mut subdirs: Vec<PathBuf> = subdirs.into_iter().collect();
            subdirs.sort_by_key(|p| std::cmp::Reverse(p.components().count()));
            for d in subdirs {
                let _ = fs::remove_dir(dir.join(d));
            }
        }
        if fs::read_dir(dir)?.next().is_some() {
            return Err(CliError::Config(format!(
                "output directory {} is not empty and holds no manifest",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8]) -> CliResult<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> CliResult<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    let tmp = dir.join(format!("{MANIFEST}.tmp"));
    fs::write(&tmp, text + "\n")?;
    fs::rename(&tmp, dir.join(MANIFEST))?;
    Ok(())
}

fn seed_dir(seed: u64) -> String {
    format!("seed_{seed}")
}

/// Resolves and checks every component before any output is written.
fn validate(cfg: &LoadedConfig, env: &Component, algorithm: &Component) -> CliResult<()> {
    let spec = resolve_environment(env, &cfg.base_dir)?;
    check_algorithm(algorithm)?;
    check_pair(&spec, &algorithm.name)
}

pub fn cmd_run(config_path: &Path, out: Option<&Path>) -> CliResult<PathBuf> {
    let cfg = config::load(config_path)?;
    let c = &cfg.config;
    validate(&cfg, &c.environment, &c.algorithm)?;
    let env = resolve_environment(&c.environment, &cfg.base_dir)?;
    let results: Vec<(u64, Artifacts, f64)> = c
        .seeds
        .par_iter()
        .map(|&seed| {
            let start = Instant::now();
            run_seed(&env, &c.algorithm, seed).map(|a| (seed, a, start.elapsed().as_secs_f64()))
        })
        .collect::<CliResult<_>>()?;

    let dir = cfg.output_dir(out);
    prepare_output(&dir)?;
    let mut all_files = vec![CONFIG_COPY.to_string()];
    fs::copy(config_path, dir.join(CONFIG_COPY))?;
    let mut runs = Vec::new();
    for (seed, art, secs) in &results {
        let sd = seed_dir(*seed);
        let mut files = Vec::new();
        for (name, bytes) in &art.files {
            let rel = format!("{sd}/{name}");
            write_file(&dir, &rel, bytes)?;
            files.push(rel);
        }
        let rel = format!("{sd}/summary.csv");
        write_file(&dir, &rel, &art.summary_csv())?;
        files.push(rel);
        runs.push(RunRecord {
            seed: *seed,
            point: BTreeMap::new(),
            wall_clock_seconds: *secs,
            files,
        });
    }
    if c.emit_plots {
        for ((seed, art, _), run) in results.iter().zip(&mut runs) {
            let sd = seed_dir(*seed);
            for job in &art.plots {
                let inputs = job
                    .inputs
                    .iter()
                    .map(|f| {
                        let rel = format!("{sd}/{f}");
                        fs::read_to_string(dir.join(&rel)).map(|text| (rel, text))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let svg = plot::render(&inputs, &job.spec)?;
                let rel = format!("{sd}/plots/{}", job.output);
                write_file(&dir, &rel, svg.as_bytes())?;
                run.files.push(rel);
            }
        }
    }
    for r in &runs {
        all_files.extend(r.files.iter().cloned());
    }
    all_files.sort();
    write_manifest(
        &dir,
        &RunManifest {
            experiment: c.name.clone(),
            command: "run".into(),
            config_hash: cfg.hash.clone(),
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            environment: c.environment.name.clone(),
            algorithm: c.algorithm.name.clone(),
            runs,
            files: all_files,
        },
    )?;
    Ok(dir)
}

/// One grid axis: a dotted parameter path and its values.
#[derive(Debug, Clone)]
struct GridAxis {
    key: String,
    target: Target,
    param: String,
    values: Vec<toml::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Environment,
    Algorithm,
}

fn grid_axes(sweep: Option<&toml::Table>) -> CliResult<Vec<GridAxis>> {
    let table = sweep.ok_or_else(|| CliError::Config("sweep needs a [sweep] table".into()))?;
    if table.is_empty() {
        return Err(CliError::Config("[sweep] grid is empty".into()));
    }
    let mut axes = Vec::new();
    let sorted: BTreeMap<&String, &toml::Value> = table.iter().collect();
    for (key, value) in sorted {
        let (target, param) = match key.split_once('.') {
            Some(("environment", p)) => (Target::Environment, p),
            Some(("algorithm", p)) => (Target::Algorithm, p),
            _ => {
                return Err(CliError::Config(format!(
                    "sweep key `{key}` must start with `environment.` or `algorithm.`"
                )))
            }
        };
        if param == "name" {
            return Err(CliError::Config("sweeping component names is not supported".into()));
        }
        let values = value
            .as_array()
            .ok_or_else(|| CliError::Config(format!("sweep key `{key}` must map to a list")))?
            .clone();
        if values.is_empty() {
            return Err(CliError::Config(format!("sweep key `{key}` has no values")));
        }
        axes.push(GridAxis {
            key: key.clone(),
            target,
            param: param.to_string(),
            values,
        });
    }
    Ok(axes)
}

fn cartesian(axes: &[GridAxis]) -> Vec<Vec<usize>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..axis.values.len()).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    points
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Float(f) => f.to_string(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn cmd_sweep(config_path: &Path, out: Option<&Path>) -> CliResult<PathBuf> {
    let cfg = config::load(config_path)?;
    let c = &cfg.config;
    let axes = grid_axes(c.sweep.as_ref())?;
    let points = cartesian(&axes);
    let components: Vec<(Component, Component)> = points
        .iter()
        .map(|idx| {
            let (mut env, mut alg) = (c.environment.clone(), c.algorithm.clone());
            for (axis, &i) in axes.iter().zip(idx) {
                let target = match axis.target {
                    Target::Environment => &mut env,
                    Target::Algorithm => &mut alg,
                };
                target.params.insert(axis.param.clone(), axis.values[i].clone());
            }
            (env, alg)
        })
        .collect();
    for (env, alg) in &components {
        validate(&cfg, env, alg)?;
    }
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| c.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results: Vec<(usize, u64, Artifacts, f64)> = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let (env, alg) = &components[p];
            let start = Instant::now();
            let spec = resolve_environment(env, &cfg.base_dir)?;
            run_seed(&spec, alg, seed).map(|a| (p, seed, a, start.elapsed().as_secs_f64()))
        })
        .collect::<CliResult<_>>()?;

    let mut csv = String::new();
    for axis in &axes {
        csv.push_str(&csv_field(&axis.key));
        csv.push(',');
    }
    csv.push_str("seed,metric,value\n");
    let mut runs = Vec::new();
    for (p, seed, art, secs) in &results {
        let labels: Vec<String> = axes.iter().zip(&points[*p]).map(|(a, &i)| value_text(&a.values[i])).collect();
        for (metric, value) in &art.metrics {
            for l in &labels {
                csv.push_str(&csv_field(l));
                csv.push(',');
            }
            csv.push_str(&format!("{seed},{metric},{value}\n"));
        }
        runs.push(RunRecord {
            seed: *seed,
            point: axes.iter().map(|a| a.key.clone()).zip(labels).collect(),
            wall_clock_seconds: *secs,
            files: vec!["sweep.csv".into()],
        });
    }

    let dir = cfg.output_dir(out);
    prepare_output(&dir)?;
    fs::copy(config_path, dir.join(CONFIG_COPY))?;
    write_file(&dir, "sweep.csv", csv.as_bytes())?;
    write_manifest(
        &dir,
        &RunManifest {
            experiment: c.name.clone(),
            command: "sweep".into(),
            config_hash: cfg.hash.clone(),
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            environment: c.environment.name.clone(),
            algorithm: c.algorithm.name.clone(),
            runs,
            files: vec![CONFIG_COPY.into(), "sweep.csv".into()],
        },
    )?;
    Ok(dir)
}
