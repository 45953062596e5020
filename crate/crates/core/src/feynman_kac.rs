//! Monte Carlo evaluation of the on/off Feynman–Kac representation of the
//! delay solution `phi`:
//!
//! ```text
//! phi(s, x) = E_(x, active)[ int_{I ∩ [0,s]} lambda psi_b(B_r)
//!                            exp(-k int_{I ∩ [0,r]} phi(s - u, B_u) du) dr ]
//! ```
//!
//! where `B` is an on/off Brownian motion, `I` its active time set and
//! `k = QUADRATIC_DAMPING`, the killing rate generated by the `-phi^2/4`
//! term. The stored PFDE solution is fed into the weight.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{sample_onoff_path, Marker, OnOffPath};
use crate::error::{Error, Result};
use crate::pfde::{PfdeSolution, QUADRATIC_DAMPING};
use crate::stats::{replicate_rng, McEstimate, Stream};

/// Largest tolerated share of paths leaving the solution grid.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FkWeight {
    /// `exp(-k int phi)` along active time.
    Killing,
    /// Weight forced to one.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkOptions {
    /// Path quadrature step; `None` uses the solution's time step.
    pub dt_path: Option<f64>,
    pub weight: FkWeight,
}

impl Default for FkOptions {
    fn default() -> Self {
        Self {
            dt_path: None,
            weight: FkWeight::Killing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkEstimate {
    pub s: f64,
    pub x: f64,
    pub value: McEstimate,
    pub path_count: usize,
    pub excluded: usize,
    pub dt_path: f64,
}

/// Integrand of one path with left-endpoint quadrature on every active
/// segment; `None` if the path needs `phi` off the grid.
fn path_functional(path: &OnOffPath, s: f64, pfde: &PfdeSolution, weight: FkWeight) -> Option<f64> {
    let cfg = &pfde.config;
    let mut exponent: f64 = 0.0;
    let mut total = 0.0;
    for seg in path.segments() {
        if seg.marker != Marker::Active {
            continue;
        }
        let len = seg.t1 - seg.t0;
        let forcing = cfg.lambda * cfg.psi_shape.eval(seg.x0 - cfg.b);
        total += forcing * (-exponent).exp() * len;
        if weight == FkWeight::Killing {
            let phi = pfde.phi_interp(s - seg.t0, seg.x0)?;
            exponent += QUADRATIC_DAMPING * phi * len;
        }
    }
    Some(total)
}

/// Estimates `phi(s, x)` from `replicates` on/off paths started active at `x`.
pub fn fk_estimate(
    s: f64,
    x: f64,
    pfde: &PfdeSolution,
    opts: FkOptions,
    replicates: usize,
    base_seed: u64,
) -> Result<FkEstimate> {
    if replicates < 2 {
        return Err(Error::Precondition(format!("need at least 2 paths, got {replicates}")));
    }
    if s < 0.0 || s > pfde.config.t_max * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "s = {s} outside the solved horizon [0, {}]",
            pfde.config.t_max
        )));
    }
    let dt_path = opts.dt_path.unwrap_or(pfde.dt());
    let c = pfde.config.c;
    let values: Vec<Option<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(base_seed, r, Stream::OnOffPath);
            let path = sample_onoff_path((x, Marker::Active), s, dt_path, c, c, &mut rng)
                .expect("dt_path validated");
            path_functional(&path, s, pfde, opts.weight)
        })
        .collect();
    let kept: Vec<f64> = values.iter().flatten().copied().collect();
    let excluded = replicates - kept.len();
    if excluded as f64 > MAX_EXCLUDED_FRACTION * replicates as f64 {
        return Err(Error::GridTooSmall {
            excluded,
            total: replicates,
        });
    }
    Ok(FkEstimate {
        s,
        x,
        value: McEstimate::from_samples(&kept)?,
        path_count: kept.len(),
        excluded,
        dt_path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailOptions {
    pub c: f64,
    pub c_prime: f64,
    pub start: Marker,
    pub dt_path: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppedTailReport {
    pub s: f64,
    pub x: f64,
    pub level: f64,
    pub onoff: McEstimate,
    pub brownian: McEstimate,
    /// `exp(-(b - x)^2 / (20 t))`.
    pub gaussian_bound: f64,
    pub below_brownian: bool,
    pub below_bound: bool,
}

fn hits_before(path: &OnOffPath, level: f64, s: f64) -> bool {
    path.times
        .iter()
        .zip(&path.positions)
        .any(|(&t, &x)| t <= s && x >= level)
}

/// Probability that the on/off path started at `x` reaches `b - sqrt(t)` by
/// time `s`, compared with a standard Brownian motion run on matched seeds
/// and with the Gaussian bound.
pub fn fk_stopped_tail(
    s: f64,
    x: f64,
    b: f64,
    t: f64,
    opts: TailOptions,
    replicates: usize,
    base_seed: u64,
) -> Result<StoppedTailReport> {
    let level = b - t.sqrt();
    if !(x < level) {
        return Err(Error::Precondition(format!("start {x} must lie below b - sqrt(t) = {level}")));
    }
    if replicates < 2 {
        return Err(Error::Precondition(format!("need at least 2 paths, got {replicates}")));
    }
    let run = |c: f64, c_prime: f64, start: Marker| -> Result<McEstimate> {
        let hits: Vec<f64> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(base_seed, r, Stream::OnOffPath);
                let path = sample_onoff_path((x, start), s, opts.dt_path, c, c_prime, &mut rng)
                    .expect("dt_path validated");
                if hits_before(&path, level, s) { 1.0 } else { 0.0 }
            })
            .collect();
        McEstimate::from_samples(&hits)
    };
    if !(opts.dt_path > 0.0) {
        return Err(Error::Domain { what: "dt_path", value: opts.dt_path });
    }
    let onoff = run(opts.c, opts.c_prime, opts.start)?;
    let brownian = run(0.0, 0.0, Marker::Active)?;
    let gaussian_bound = (-(b - x) * (b - x) / (20.0 * t)).exp();
    let se = onoff.combined_stderr(&brownian);
    Ok(StoppedTailReport {
        s,
        x,
        level,
        onoff,
        brownian,
        gaussian_bound,
        below_brownian: onoff.mean <= brownian.mean + 3.0 * se,
        below_bound: onoff.mean <= gaussian_bound + 3.0 * onoff.stderr,
    })
}
