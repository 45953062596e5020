//! Output directory handling: result CSVs and JSON, the `plots/` tree and
//! the experiment manifest with its file inventory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::experiments::{DualityReport, EdgeSeries, SymmetryReport, TailCurve};
use crate::grid::fmt_f64;
use crate::pfde::PfdeSolution;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOTS_DIR: &str = "plots";
pub const SEED_RULE: &str =
    "replicate k of an experiment uses seed base + k (wrapping); ChaCha8 stream spde=1, dual=2, onoff_path=3, brownian=4";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory, `/` separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Seeds consumed by one experiment: `base + k` for `k < count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedBlock {
    pub experiment: String,
    pub base: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Config,
    /// Canonical config text; reloading it reproduces the run.
    pub config_text: String,
    pub config_hash: String,
    pub base_seed: u64,
    pub seed_rule: String,
    pub seeds: Vec<SeedBlock>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub timings: Vec<Timing>,
    pub files: Vec<FileEntry>,
}

impl ExperimentManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn config(&self) -> Result<Config> {
        Config::from_text(&self.config_text)
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Single writer for one output directory. Every file written through it
/// ends up in the manifest inventory.
#[derive(Debug)]
pub struct ReportWriter {
    root: PathBuf,
    files: Vec<FileEntry>,
    seeds: Vec<SeedBlock>,
    timings: Vec<Timing>,
    started_unix: f64,
}

impl ReportWriter {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let plots = root.join(PLOTS_DIR);
        fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
        Ok(Self {
            root,
            files: Vec::new(),
            seeds: Vec::new(),
            timings: Vec::new(),
            started_unix: unix_now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        self.files.retain(|e| e.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_csv(&mut self, rel: &str, header: &str, rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut text = String::with_capacity(64 * (rows.len() + 1));
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn record_seeds(&mut self, experiment: &str, base: u64, count: usize) {
        self.seeds.push(SeedBlock {
            experiment: experiment.to_string(),
            base,
            count: count as u64,
        });
    }

    pub fn record_timing(&mut self, name: &str, seconds: f64) {
        self.timings.push(Timing {
            name: name.to_string(),
            seconds,
        });
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(mut self, command: &str, config: &Config) -> Result<ExperimentManifest> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = ExperimentManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            config_text: config.to_text(),
            config_hash: config.content_hash(),
            base_seed: config.sim.seed,
            seed_rule: SEED_RULE.to_string(),
            seeds: std::mem::take(&mut self.seeds),
            started_unix: self.started_unix,
            finished_unix: unix_now(),
            timings: std::mem::take(&mut self.timings),
            files: std::mem::take(&mut self.files),
        };
        let path = self.root.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

pub fn write_duality_gaps(w: &mut ReportWriter, reports: &[DualityReport]) -> Result<()> {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.spec.clone(),
                f(r.t),
                f(r.spde.mean),
                f(r.spde.stderr),
                f(r.dual.mean),
                f(r.dual.stderr),
                f(r.z),
            ]
        })
        .collect();
    let header = "spec,t,spde_mean,spde_se,dual_mean,dual_se,z";
    w.write_csv("duality_gaps.csv", header, &rows)?;
    w.write_csv("plots/duality_gaps.csv", header, &rows)?;
    w.write_json("duality.json", &reports)?;
    Ok(())
}

pub fn write_edges(w: &mut ReportWriter, k: usize, e: &EdgeSeries) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..e.times.len())
        .map(|i| vec![f(e.times[i]), f(e.l_u[i]), f(e.r_u[i]), f(e.l_v[i]), f(e.r_v[i])])
        .collect();
    w.write_csv(&format!("plots/edges_rep{k}.csv"), "t,L_u,R_u,L_v,R_v", &rows)?;
    Ok(())
}

pub fn write_tail_curve(w: &mut ReportWriter, curve: &TailCurve) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .rows
        .iter()
        .map(|r| vec![f(r.b), f(r.p_hat), f(r.ci_lo), f(r.ci_hi)])
        .collect();
    w.write_csv("tail_curve.csv", "b,p_hat,ci_lo,ci_hi", &rows)?;
    w.write_csv("plots/tail_curve.csv", "b,p_hat,ci_lo,ci_hi", &rows)?;
    Ok(())
}

pub fn write_symmetry(w: &mut ReportWriter, report: &SymmetryReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![f(r.x), f(r.mirror), f(r.stat.mean), f(r.stat.stderr), f(r.z)])
        .collect();
    w.write_csv("symmetry.csv", "x,mirror,mean,se,z", &rows)?;
    w.write_json("symmetry.json", report)?;
    Ok(())
}

/// Final-time `phi`, `varphi` and `phi (x - b)^2` profiles.
pub fn write_pfde_profile(w: &mut ReportWriter, rel: &str, sol: &PfdeSolution) -> Result<()> {
    let g = sol.grid();
    let b = sol.config.b;
    let phi = sol.phi.last().expect("solution has an initial step");
    let varphi = sol.varphi.last().expect("solution has an initial step");
    let rows: Vec<Vec<String>> = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            vec![
                f(x),
                f(phi.values[i]),
                f(varphi.values[i]),
                f(phi.values[i] * (x - b) * (x - b)),
            ]
        })
        .collect();
    w.write_csv(rel, "x,phi,varphi,phi_scaled", &rows)?;
    Ok(())
}

/// Paths of files that differ between two output directories, comparing
/// every inventoried file except the manifest.
pub fn compare_outputs(a: &ExperimentManifest, b: &ExperimentManifest) -> Vec<String> {
    let mut diffs = Vec::new();
    for fa in &a.files {
        match b.files.iter().find(|fb| fb.path == fa.path) {
            Some(fb) if fb == fa => {}
            Some(_) => diffs.push(format!("{} differs", fa.path)),
            None => diffs.push(format!("{} missing from rerun", fa.path)),
        }
    }
    for fb in &b.files {
        if !a.files.iter().any(|fa| fa.path == fb.path) {
            diffs.push(format!("{} only in rerun", fb.path));
        }
    }
    diffs
}

/// Byte comparison of the inventoried files of two output directories.
pub fn compare_dirs(a: &Path, b: &Path, files: &[FileEntry]) -> Result<Vec<String>> {
    let mut diffs = Vec::new();
    for e in files {
        let pa = a.join(&e.path);
        let pb = b.join(&e.path);
        let da = fs::read(&pa).map_err(|err| Error::io(&pa, err))?;
        match fs::read(&pb) {
            Ok(db) if db == da => {}
            Ok(_) => diffs.push(format!("{} differs", e.path)),
            Err(_) => diffs.push(format!("{} missing", e.path)),
        }
    }
    Ok(diffs)
}
