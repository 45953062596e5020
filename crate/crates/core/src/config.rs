//! Flat text configuration: `[section]` headers followed by `key = value`
//! lines. `#` starts a comment. Every key is optional; missing keys keep
//! their defaults. Lists are comma separated, moment specs are separated by
//! `|`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dual::Marker;
use crate::error::{Error, Result};
use crate::experiments::{EdgeOptions, MomentSpec};
use crate::grid::{Grid1D, DEFAULT_EDGE_TOL};
use crate::pfde::PfdeConfig;
use crate::spde::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSection {
    pub c: f64,
    pub c_prime: f64,
    pub dx: f64,
    pub dt: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub t_max: f64,
    pub seed: u64,
    pub reps: usize,
    pub noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualitySection {
    pub t: f64,
    pub dual_reps: usize,
    pub allowance: f64,
    pub specs: Vec<Vec<(f64, Marker)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySection {
    pub reps: usize,
    /// Allowed max grid error in units of `dt`.
    pub error_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSection {
    pub reps: usize,
    pub margin: f64,
    pub edge_tol: f64,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrySection {
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfdeSection {
    pub lambdas: Vec<f64>,
    pub b: f64,
    pub c: f64,
    pub dx: f64,
    pub dt: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub t_max: f64,
    pub rel_tol: f64,
    pub alpha: f64,
    pub alpha_low: f64,
    pub envelope_lambda: f64,
    pub envelope_b: f64,
    pub envelope_t: f64,
    pub envelope_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkSection {
    pub lambda: f64,
    pub b: f64,
    pub reps: usize,
    /// `(s, x)` evaluation points.
    pub points: Vec<(f64, f64)>,
    pub allowance: f64,
    pub tail_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub sim: SimSection,
    pub duality: DualitySection,
    pub delay: DelaySection,
    pub interface: InterfaceSection,
    pub symmetry: SymmetrySection,
    pub pfde: PfdeSection,
    pub fk: FkSection,
}

impl Default for Config {
    fn default() -> Self {
        use Marker::{Active as A, Dormant as D};
        Self {
            sim: SimSection {
                c: 1.0,
                c_prime: 1.0,
                dx: 0.1,
                dt: 0.004,
                x_min: -15.0,
                x_max: 15.0,
                t_max: 1.0,
                seed: 20_240_601,
                reps: 2000,
                noise: true,
            },
            duality: DualitySection {
                t: 0.5,
                dual_reps: 20_000,
                allowance: 0.02,
                specs: vec![
                    vec![(0.0, A)],
                    vec![(0.0, D)],
                    vec![(0.0, A), (0.0, A)],
                    vec![(0.0, A), (0.5, D)],
                ],
            },
            delay: DelaySection {
                reps: 20,
                error_factor: 5.0,
            },
            interface: InterfaceSection {
                reps: 200,
                margin: 3.0,
                edge_tol: DEFAULT_EDGE_TOL,
                levels: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            },
            symmetry: SymmetrySection {
                points: vec![0.0, 0.5, 1.0],
            },
            pfde: PfdeSection {
                lambdas: vec![1.0, 10.0, 100.0],
                b: 5.0,
                c: 1.0,
                dx: 0.1,
                dt: 0.0005,
                x_min: -15.0,
                x_max: 15.0,
                t_max: 1.0,
                rel_tol: 1e-3,
                alpha: 12.0,
                alpha_low: 4.0,
                envelope_lambda: 1.0,
                envelope_b: 6.0,
                envelope_t: 1.0,
                envelope_k: 1000.0,
            },
            fk: FkSection {
                lambda: 1.0,
                b: 3.0,
                reps: 100_000,
                points: vec![(0.25, 0.0), (0.5, 0.0), (0.5, -1.0)],
                allowance: 0.01,
                tail_reps: 100_000,
            },
        }
    }
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    v.parse().map_err(|_| format!("expected a number, got {v:?}"))
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.replace('_', "")
        .parse()
        .map_err(|_| format!("expected a non-negative integer, got {v:?}"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_f64)
        .collect()
}

fn parse_pairs(v: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| format!("expected s:x, got {p:?}"))?;
            Ok((parse_f64(a.trim())?, parse_f64(b.trim())?))
        })
        .collect()
}

fn parse_specs(v: &str) -> std::result::Result<Vec<Vec<(f64, Marker)>>, String> {
    v.split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| MomentSpec::parse_points(s).map_err(|e| e.to_string()))
        .collect()
}

fn join<T>(items: &[T], sep: &str, f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(sep)
}

fn spec_text(points: &[(f64, Marker)]) -> String {
    join(points, ",", |(x, m)| format!("{x}:{}", m.symbol()))
}

impl Config {
    fn set(&mut self, section: &str, key: &str, v: &str) -> std::result::Result<(), String> {
        match (section, key) {
            ("sim", "c") => self.sim.c = parse_f64(v)?,
            ("sim", "c_prime") => self.sim.c_prime = parse_f64(v)?,
            ("sim", "dx") => self.sim.dx = parse_f64(v)?,
            ("sim", "dt") => self.sim.dt = parse_f64(v)?,
            ("sim", "x_min") => self.sim.x_min = parse_f64(v)?,
            ("sim", "x_max") => self.sim.x_max = parse_f64(v)?,
            ("sim", "t_max") => self.sim.t_max = parse_f64(v)?,
            ("sim", "seed") => {
                self.sim.seed = v
                    .replace('_', "")
                    .parse()
                    .map_err(|_| format!("expected a 64-bit seed, got {v:?}"))?
            }
            ("sim", "reps") => self.sim.reps = parse_usize(v)?,
            ("sim", "noise") => self.sim.noise = parse_bool(v)?,
            ("duality", "t") => self.duality.t = parse_f64(v)?,
            ("duality", "dual_reps") => self.duality.dual_reps = parse_usize(v)?,
            ("duality", "allowance") => self.duality.allowance = parse_f64(v)?,
            ("duality", "specs") => self.duality.specs = parse_specs(v)?,
            ("delay", "reps") => self.delay.reps = parse_usize(v)?,
            ("delay", "error_factor") => self.delay.error_factor = parse_f64(v)?,
            ("interface", "reps") => self.interface.reps = parse_usize(v)?,
            ("interface", "margin") => self.interface.margin = parse_f64(v)?,
            ("interface", "edge_tol") => self.interface.edge_tol = parse_f64(v)?,
            ("interface", "levels") => self.interface.levels = parse_list(v)?,
            ("symmetry", "points") => self.symmetry.points = parse_list(v)?,
            ("pfde", "lambdas") => self.pfde.lambdas = parse_list(v)?,
            ("pfde", "b") => self.pfde.b = parse_f64(v)?,
            ("pfde", "c") => self.pfde.c = parse_f64(v)?,
            ("pfde", "dx") => self.pfde.dx = parse_f64(v)?,
            ("pfde", "dt") => self.pfde.dt = parse_f64(v)?,
            ("pfde", "x_min") => self.pfde.x_min = parse_f64(v)?,
            ("pfde", "x_max") => self.pfde.x_max = parse_f64(v)?,
            ("pfde", "t_max") => self.pfde.t_max = parse_f64(v)?,
            ("pfde", "rel_tol") => self.pfde.rel_tol = parse_f64(v)?,
            ("pfde", "alpha") => self.pfde.alpha = parse_f64(v)?,
            ("pfde", "alpha_low") => self.pfde.alpha_low = parse_f64(v)?,
            ("pfde", "envelope_lambda") => self.pfde.envelope_lambda = parse_f64(v)?,
            ("pfde", "envelope_b") => self.pfde.envelope_b = parse_f64(v)?,
            ("pfde", "envelope_t") => self.pfde.envelope_t = parse_f64(v)?,
            ("pfde", "envelope_k") => self.pfde.envelope_k = parse_f64(v)?,
            ("fk", "lambda") => self.fk.lambda = parse_f64(v)?,
            ("fk", "b") => self.fk.b = parse_f64(v)?,
            ("fk", "reps") => self.fk.reps = parse_usize(v)?,
            ("fk", "points") => self.fk.points = parse_pairs(v)?,
            ("fk", "allowance") => self.fk.allowance = parse_f64(v)?,
            ("fk", "tail_reps") => self.fk.tail_reps = parse_usize(v)?,
            ("", _) => return Err(format!("key {key:?} outside a section")),
            _ => return Err(format!("unknown key {key:?} in section [{section}]")),
        }
        Ok(())
    }

    /// Parses without validating.
    pub fn parse(text: &str) -> Result<Self> {
        const SECTIONS: [&str; 7] = ["sim", "duality", "delay", "interface", "symmetry", "pfde", "fk"];
        let mut cfg = Config::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: n + 1, message };
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header {line:?}")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            cfg.set(&section, key.trim(), value.trim()).map_err(err)?;
        }
        Ok(cfg)
    }

    /// Parses and validates, reporting every violation at once.
    pub fn from_text(text: &str) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let s = &self.sim;
        match Grid1D::new(s.x_min, s.x_max, s.dx) {
            Ok(grid) => {
                let sim = SimConfig {
                    c: s.c,
                    c_prime: s.c_prime,
                    grid,
                    dt: s.dt,
                    t_max: s.t_max,
                    seed: s.seed,
                    boundary: crate::spde::Boundary::PinnedFront,
                    noise_on: s.noise,
                };
                out.extend(sim.violations().into_iter().map(|v| format!("sim: {v}")));
                if s.dt > 0.0 {
                    let steps = self.duality.t / s.dt;
                    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                        out.push(format!(
                            "duality: t = {} is not a multiple of dt = {}",
                            self.duality.t, s.dt
                        ));
                    }
                }
                for spec in &self.duality.specs {
                    if let Err(e) = MomentSpec::new(spec.clone(), self.duality.t) {
                        out.push(format!("duality: {e}"));
                    }
                    for (x, _) in spec {
                        if grid.index_of(*x).is_none() {
                            out.push(format!("duality: point {x} is not a lattice site"));
                        }
                    }
                }
                for &x in &self.symmetry.points {
                    if grid.index_of(x).is_none() || grid.index_of(s.dx - x).is_none() {
                        out.push(format!("symmetry: point {x} or its mirror is off the lattice"));
                    }
                }
                for &b in &self.interface.levels {
                    if !(b < s.x_max - self.interface.margin) {
                        out.push(format!("interface: level {b} lies inside the boundary margin"));
                    }
                }
            }
            Err(e) => out.push(format!("sim: {e}")),
        }
        if s.reps < 2 {
            out.push(format!("sim: reps = {} must be at least 2", s.reps));
        }
        if !(self.duality.t > 0.0 && self.duality.t <= s.t_max) {
            out.push(format!("duality: t = {} must lie in (0, t_max]", self.duality.t));
        }
        if self.duality.dual_reps < 2 {
            out.push("duality: dual_reps must be at least 2".into());
        }
        if !(self.duality.allowance >= 0.0) {
            out.push("duality: allowance must be non-negative".into());
        }
        if self.delay.reps < 1 {
            out.push("delay: reps must be at least 1".into());
        }
        if self.interface.reps < 1 {
            out.push("interface: reps must be at least 1".into());
        }
        if !(self.interface.edge_tol >= 0.0 && self.interface.edge_tol < 0.5) {
            out.push(format!("interface: edge_tol = {} must lie in [0, 0.5)", self.interface.edge_tol));
        }
        if !(self.interface.margin >= 0.0) {
            out.push("interface: margin must be non-negative".into());
        }

        let p = &self.pfde;
        if p.lambdas.is_empty() {
            out.push("pfde: lambdas is empty".into());
        }
        for &lambda in &p.lambdas {
            match self.pfde_config(lambda, p.b) {
                Ok(cfg) => out.extend(cfg.violations().into_iter().map(|v| format!("pfde: {v}"))),
                Err(e) => {
                    out.push(format!("pfde: {e}"));
                    break;
                }
            }
        }
        if let Ok(cfg) = self.pfde_config(self.fk.lambda, self.fk.b) {
            out.extend(cfg.violations().into_iter().map(|v| format!("fk: {v}")));
        }
        if let Ok(cfg) = self.pfde_config(p.envelope_lambda, p.envelope_b) {
            out.extend(cfg.violations().into_iter().map(|v| format!("pfde envelope: {v}")));
        }
        if !(p.envelope_t > 0.0 && p.envelope_t <= p.t_max) {
            out.push(format!("pfde: envelope_t = {} must lie in (0, t_max]", p.envelope_t));
        }
        for &(s, _) in &self.fk.points {
            if !(s >= 0.0 && s <= p.t_max) {
                out.push(format!("fk: evaluation time {s} outside [0, {}]", p.t_max));
            }
        }
        if self.fk.reps < 2 || self.fk.tail_reps < 2 {
            out.push("fk: reps and tail_reps must be at least 2".into());
        }
        out.dedup();
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.sim.x_min, self.sim.x_max, self.sim.dx)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = &self.sim;
        Ok(SimConfig::new(s.c, s.c_prime, self.grid()?, s.dt, s.t_max, s.seed)?.with_noise(s.noise))
    }

    pub fn pfde_grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.pfde.x_min, self.pfde.x_max, self.pfde.dx)
    }

    /// PFDE configuration with the section's grid and rate, unvalidated.
    pub fn pfde_config(&self, lambda: f64, b: f64) -> Result<PfdeConfig> {
        let p = &self.pfde;
        Ok(PfdeConfig {
            lambda,
            b,
            c: p.c,
            grid: self.pfde_grid()?,
            dt: p.dt,
            t_max: p.t_max,
            psi_shape: crate::pfde::PsiShape::QuadraticExponential,
        })
    }

    pub fn edge_options(&self) -> EdgeOptions {
        EdgeOptions {
            tol: self.interface.edge_tol,
            margin: self.interface.margin,
        }
    }

    pub fn moment_specs(&self) -> Result<Vec<MomentSpec>> {
        self.duality
            .specs
            .iter()
            .map(|p| MomentSpec::new(p.clone(), self.duality.t))
            .collect()
    }

    /// Canonical text form; `Config::parse(&c.to_text())` returns `c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.sim;
        let d = &self.duality;
        let p = &self.pfde;
        let f = &self.fk;
        let num = |xs: &[f64]| join(xs, ", ", |x| x.to_string());
        let sections: [(&str, Vec<(&str, String)>); 7] = [
            (
                "sim",
                vec![
                    ("c", s.c.to_string()),
                    ("c_prime", s.c_prime.to_string()),
                    ("dx", s.dx.to_string()),
                    ("dt", s.dt.to_string()),
                    ("x_min", s.x_min.to_string()),
                    ("x_max", s.x_max.to_string()),
                    ("t_max", s.t_max.to_string()),
                    ("seed", s.seed.to_string()),
                    ("reps", s.reps.to_string()),
                    ("noise", s.noise.to_string()),
                ],
            ),
            (
                "duality",
                vec![
                    ("t", d.t.to_string()),
                    ("dual_reps", d.dual_reps.to_string()),
                    ("allowance", d.allowance.to_string()),
                    ("specs", join(&d.specs, " | ", |sp| spec_text(sp))),
                ],
            ),
            (
                "delay",
                vec![
                    ("reps", self.delay.reps.to_string()),
                    ("error_factor", self.delay.error_factor.to_string()),
                ],
            ),
            (
                "interface",
                vec![
                    ("reps", self.interface.reps.to_string()),
                    ("margin", self.interface.margin.to_string()),
                    ("edge_tol", self.interface.edge_tol.to_string()),
                    ("levels", num(&self.interface.levels)),
                ],
            ),
            ("symmetry", vec![("points", num(&self.symmetry.points))]),
            (
                "pfde",
                vec![
                    ("lambdas", num(&p.lambdas)),
                    ("b", p.b.to_string()),
                    ("c", p.c.to_string()),
                    ("dx", p.dx.to_string()),
                    ("dt", p.dt.to_string()),
                    ("x_min", p.x_min.to_string()),
                    ("x_max", p.x_max.to_string()),
                    ("t_max", p.t_max.to_string()),
                    ("rel_tol", p.rel_tol.to_string()),
                    ("alpha", p.alpha.to_string()),
                    ("alpha_low", p.alpha_low.to_string()),
                    ("envelope_lambda", p.envelope_lambda.to_string()),
                    ("envelope_b", p.envelope_b.to_string()),
                    ("envelope_t", p.envelope_t.to_string()),
                    ("envelope_k", p.envelope_k.to_string()),
                ],
            ),
            (
                "fk",
                vec![
                    ("lambda", f.lambda.to_string()),
                    ("b", f.b.to_string()),
                    ("reps", f.reps.to_string()),
                    ("points", join(&f.points, ", ", |(s, x)| format!("{s}:{x}"))),
                    ("allowance", f.allowance.to_string()),
                    ("tail_reps", f.tail_reps.to_string()),
                ],
            ),
        ];
        for (k, (name, entries)) in sections.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (key, value) in entries {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        out
    }

    /// Git-style object hash of the canonical text: SHA-256 over
    /// `"blob <len>\0" + text`, hex encoded.
    pub fn content_hash(&self) -> String {
        let text = self.to_text();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", text.len()).as_bytes());
        h.update(text.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Config::from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_valid_defaults() {
        let c = Config::from_text("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!((c.sim.c, c.sim.c_prime, c.sim.dx, c.sim.dt), (1.0, 1.0, 0.1, 0.004));
        assert_eq!((c.sim.x_min, c.sim.x_max, c.sim.t_max, c.sim.reps), (-15.0, 15.0, 1.0, 2000));
    }

    #[test]
    fn stability_violation_reported() {
        let err = Config::from_text("[sim]\ndt = 0.1\ndx = 0.1\n").unwrap_err();
        let Error::InvalidConfig(v) = err else { panic!("{err}") };
        assert!(v.iter().any(|m| m.contains("stability") && m.contains("0.005")), "{v:?}");
    }

    #[test]
    fn negative_rate_reported_with_others() {
        let err = Config::from_text("[sim]\nc = -1\nreps = 1\n[pfde]\nb = 14\n").unwrap_err();
        let Error::InvalidConfig(v) = err else { panic!("{err}") };
        assert!(v.iter().any(|m| m.starts_with("sim:") && m.contains("c ")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("reps = 1")), "{v:?}");
        assert!(v.iter().any(|m| m.starts_with("pfde:") && m.contains("margin")), "{v:?}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, line) in [
            ("[sim]\n\nc = x\n", 3),
            ("[nope]\n", 1),
            ("c = 1\n", 1),
            ("[sim]\n# comment\nfoo = 1\n", 3),
            ("[sim\n", 1),
            ("[sim]\nc 1\n", 2),
        ] {
            match Config::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn comments_and_lists() {
        let c = Config::from_text(
            "[interface] # trailing\nlevels = 1, 2.5\n[duality]\nspecs = 0:a | 0:a,0.5:d\n[fk]\npoints = 0.5:-1\n",
        )
        .unwrap();
        assert_eq!(c.interface.levels, vec![1.0, 2.5]);
        assert_eq!(c.duality.specs.len(), 2);
        assert_eq!(c.duality.specs[1][1], (0.5, Marker::Dormant));
        assert_eq!(c.fk.points, vec![(0.5, -1.0)]);
    }

    #[test]
    fn off_lattice_points_reported() {
        let err = Config::from_text("[duality]\nspecs = 0.05:a\n[symmetry]\npoints = 0.33\n").unwrap_err();
        let Error::InvalidConfig(v) = err else { panic!("{err}") };
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_config(dir.path().join("none.cfg")), Err(Error::Io { .. })));
        let path = dir.path().join("a.cfg");
        std::fs::write(&path, Config::default().to_text()).unwrap();
        assert_eq!(load_config(&path).unwrap(), Config::default());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let mut b = a.clone();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
        b.sim.seed += 1;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    proptest! {
        #[test]
        fn text_round_trip(
            c in 0.0..5.0f64,
            seed in any::<u64>(),
            reps in 2usize..100_000,
            levels in proptest::collection::vec(-10.0..10.0f64, 1..6),
            noise in any::<bool>(),
            tol in 0.0..1e-3f64,
            points in proptest::collection::vec((0.0..1.0f64, -5.0..5.0f64), 0..4),
        ) {
            let mut cfg = Config::default();
            cfg.sim.c = c;
            cfg.sim.seed = seed;
            cfg.sim.reps = reps;
            cfg.sim.noise = noise;
            cfg.interface.levels = levels;
            cfg.interface.edge_tol = tol;
            cfg.fk.points = points;
            prop_assert_eq!(Config::parse(&cfg.to_text()).unwrap(), cfg);
        }
    }
}
