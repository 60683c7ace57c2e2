//! Executes configs on a sized thread pool and persists every artifact with checksums.

use std::fs;
use std::path::{Path, PathBuf};

use noiselab::Caps;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::presets::Outcome;

/// Version tag of `results.json` and `manifest.json`.
pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub artifact_version: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub threads: Option<usize>,
    pub started_at: String,
    pub finished_at: String,
    /// `ok`, `failed` (a check failed) or `error` (the experiment could not run).
    pub status: String,
    pub failures: Vec<String>,
    pub error: Option<String>,
    /// Every emitted file except the manifest itself, sorted by path.
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        if self.status == "ok" {
            0
        } else {
            1
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs the config's preset, on a dedicated pool of `threads` workers when given.
pub fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Outcome> {
    let preset = cfg.preset()?;
    Caps::install(cfg.caps);
    match threads {
        None => preset.run(cfg),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| CliError::ThreadPool(e.to_string()))?;
            pool.install(|| preset.run(cfg))
        }
    }
}

/// Canonical `results.json` text: sorted keys, no timestamps, trailing newline.
pub fn results_json(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<String> {
    let record = json!({
        "schema": SCHEMA,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "results": outcome.results,
        "failures": outcome.failures,
    });
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    Ok(text)
}

struct Writer {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl Writer {
    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(contents.as_bytes()), bytes: contents.len() as u64 });
        Ok(())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Writes `config.json`, `results.json`, tables, figures and `manifest.json` under `out`.
/// An experiment error still produces a manifest (status `error`) before being returned.
pub fn run_to_dir(cfg: &ExperimentConfig, out: &Path, threads: Option<usize>) -> Result<RunManifest> {
    let started_at = now();
    let mut w = Writer { root: out.to_path_buf(), files: Vec::new() };
    let mut config_text = serde_json::to_string_pretty(cfg)?;
    config_text.push('\n');
    w.write("config.json", &config_text)?;
    let outcome = execute(cfg, threads);
    let (status, failures, error) = match &outcome {
        Ok(o) => {
            w.write("results.json", &results_json(cfg, o)?)?;
            for a in o.tables.iter().chain(&o.figures) {
                w.write(&a.path, &a.contents)?;
            }
            let status = if o.failures.is_empty() { "ok" } else { "failed" };
            (status, o.failures.clone(), None)
        }
        Err(e) => ("error", Vec::new(), Some(e.to_string())),
    };
    w.files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        schema: SCHEMA,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.clone(),
        config: cfg.clone(),
        threads,
        started_at,
        finished_at: now(),
        status: status.to_string(),
        failures,
        error,
        files: w.files.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let path = out.join("manifest.json");
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    outcome?;
    Ok(manifest)
}

/// Recomputes every checksum listed in a run directory's manifest.
pub fn check_manifest(out: &Path) -> Result<Vec<String>> {
    let path = out.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let mut problems = Vec::new();
    for f in &manifest.files {
        let p = out.join(&f.path);
        match fs::read(&p) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
            Ok(_) => problems.push(format!("{}: checksum mismatch", f.path)),
            Err(e) => problems.push(format!("{}: {e}", f.path)),
        }
    }
    Ok(problems)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminismRun {
    pub threads: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminismReport {
    pub experiment: String,
    pub passed: bool,
    pub runs: Vec<DeterminismRun>,
    /// First differing line against the first run, when any run differs.
    pub diff: Option<String>,
}

fn first_difference(a: &str, b: &str) -> Option<String> {
    let mut la = a.lines();
    let mut lb = b.lines();
    let mut line = 1;
    loop {
        match (la.next(), lb.next()) {
            (None, None) => return None,
            (x, y) if x == y => line += 1,
            (x, y) => return Some(format!("line {line}: `{}` vs `{}`", x.unwrap_or(""), y.unwrap_or(""))),
        }
    }
}

/// Runs the config under each thread count; passes iff every `results.json` is byte-identical.
pub fn verify_determinism(cfg: &ExperimentConfig, thread_counts: &[usize]) -> Result<DeterminismReport> {
    let mut texts = Vec::new();
    for &k in thread_counts {
        let outcome = execute(cfg, Some(k))?;
        texts.push((k, results_json(cfg, &outcome)?));
    }
    let diff = texts.iter().skip(1).find_map(|(k, t)| first_difference(&texts[0].1, t).map(|d| format!("threads {k}: {d}")));
    Ok(DeterminismReport {
        experiment: cfg.experiment.clone(),
        passed: diff.is_none(),
        runs: texts.iter().map(|(k, t)| DeterminismRun { threads: *k, sha256: sha256_hex(t.as_bytes()) }).collect(),
        diff,
    })
}

/// `results.json` of an existing run directory as a JSON value.
pub fn read_results(out: &Path) -> Result<Value> {
    let path = out.join("results.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
