//! Experiments built on the SPDE and dual simulators: moment duality,
//! interface edges, first passage, tail curves and the front symmetry.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{dual_moment_estimate, DualRates, EventCounts, FrontIndicator, Marker};
use crate::error::{Error, Result};
use crate::grid::{
    left_edge_with_tol, right_edge_with_tol, Grid1D, DEFAULT_EDGE_TOL, MINUS_INF, PLUS_INF,
};
use crate::spde::{initial_heaviside, simulate, SimConfig, SpdeState, SpdeTrajectory};
use crate::stats::{replicate_seed, wilson_interval, McEstimate};

pub const MAX_MOMENT_POINTS: usize = 4;

/// Product moment `prod_active u(t, x) prod_dormant v(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub points: Vec<(f64, Marker)>,
    pub t: f64,
}

impl MomentSpec {
    pub fn new(points: Vec<(f64, Marker)>, t: f64) -> Result<Self> {
        if points.is_empty() || points.len() > MAX_MOMENT_POINTS {
            return Err(Error::Precondition(format!(
                "a moment needs 1 to {MAX_MOMENT_POINTS} points, got {}",
                points.len()
            )));
        }
        if !(t >= 0.0) {
            return Err(Error::Domain { what: "t", value: t });
        }
        Ok(Self { points, t })
    }

    /// Parses `"x:marker,x:marker"`, e.g. `"0:a,0.5:d"`.
    pub fn parse_points(s: &str) -> Result<Vec<(f64, Marker)>> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                let (x, m) = p
                    .split_once(':')
                    .ok_or_else(|| Error::Precondition(format!("expected x:marker, got {p:?}")))?;
                let x: f64 = x
                    .trim()
                    .parse()
                    .map_err(|_| Error::Precondition(format!("bad position {x:?}")))?;
                let m = Marker::parse(m)
                    .ok_or_else(|| Error::Precondition(format!("bad marker {m:?}")))?;
                Ok((x, m))
            })
            .collect()
    }

    fn site_indices(&self, grid: Grid1D) -> Result<Vec<(usize, Marker)>> {
        self.points
            .iter()
            .map(|&(x, m)| {
                grid.index_of(x)
                    .map(|i| (i, m))
                    .ok_or_else(|| Error::Precondition(format!("point {x} is not a lattice site")))
            })
            .collect()
    }

    pub fn evaluate(&self, state: &SpdeState) -> Result<f64> {
        let sites = self.site_indices(state.grid())?;
        Ok(product_at(&sites, state))
    }
}

impl fmt::Display for MomentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (x, m)) in self.points.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, "{x}:{}", m.symbol())?;
        }
        Ok(())
    }
}

fn product_at(sites: &[(usize, Marker)], state: &SpdeState) -> f64 {
    sites
        .iter()
        .map(|&(i, m)| match m {
            Marker::Active => state.u.values[i],
            Marker::Dormant => state.v.values[i],
        })
        .product()
}

/// Final states of `replicates` independent runs from the Heaviside front,
/// replicate `r` seeded by `replicate_seed(cfg.seed, r)`, in replicate order.
pub fn spde_final_states(cfg: &SimConfig, replicates: usize) -> Result<Vec<SpdeState>> {
    cfg.validate()?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let c = cfg.with_seed(replicate_seed(cfg.seed, r));
            simulate(&c, initial_heaviside(c.grid), |_, _| {})
        })
        .collect()
}

pub fn moment_from_states(spec: &MomentSpec, states: &[SpdeState]) -> Result<McEstimate> {
    let first = states
        .first()
        .ok_or_else(|| Error::Precondition("no SPDE states".into()))?;
    let sites = spec.site_indices(first.grid())?;
    for s in states {
        if (s.t - spec.t).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "state at t = {} does not match moment time {}",
                s.t, spec.t
            )));
        }
    }
    let samples: Vec<f64> = states.iter().map(|s| product_at(&sites, s)).collect();
    McEstimate::from_samples(&samples)
}

/// Monte Carlo moment over SPDE replicates. At `t = 0` the product of the
/// initial indicators is returned with zero standard error.
pub fn spde_moment_estimate(spec: &MomentSpec, cfg: &SimConfig, replicates: usize) -> Result<McEstimate> {
    if replicates < 2 {
        return Err(Error::Precondition(format!("need at least 2 replicates, got {replicates}")));
    }
    if spec.t == 0.0 {
        let mean = spec.evaluate(&initial_heaviside(cfg.grid))?;
        return Ok(McEstimate {
            mean,
            stderr: 0.0,
            n: replicates,
        });
    }
    let cfg = cfg.with_horizon(spec.t)?;
    moment_from_states(spec, &spde_final_states(&cfg, replicates)?)
}

/// Signed z-score; a zero error bar gives 0 for a zero gap and infinity
/// otherwise.
pub fn z_score(gap: f64, se: f64) -> f64 {
    if se > 0.0 {
        gap / se
    } else if gap.abs() < 1e-12 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub spec: String,
    pub t: f64,
    pub spde: McEstimate,
    pub dual: McEstimate,
    pub gap: f64,
    pub combined_se: f64,
    pub z: f64,
    pub allowance: f64,
    pub pass: bool,
    pub dual_events: EventCounts,
}

/// Compares an SPDE moment estimate against the dual estimate. Passes when
/// `|gap| <= 3 se + allowance`.
pub fn duality_from_estimate(
    spec: &MomentSpec,
    spde: McEstimate,
    cfg: &SimConfig,
    reps_dual: usize,
    allowance: f64,
) -> Result<DualityReport> {
    let rates = DualRates::from_sim(cfg);
    let (dual, dual_events) = if spec.t == 0.0 {
        let mean = spec
            .points
            .iter()
            .map(|&(x, _)| FrontIndicator::HEAVISIDE.eval(x))
            .product();
        (
            McEstimate {
                mean,
                stderr: 0.0,
                n: reps_dual,
            },
            EventCounts::default(),
        )
    } else {
        let d = dual_moment_estimate(
            &spec.points,
            FrontIndicator::HEAVISIDE,
            FrontIndicator::HEAVISIDE,
            spec.t,
            reps_dual,
            rates,
            cfg.seed,
        )?;
        (d.estimate, d.events)
    };
    let gap = spde.mean - dual.mean;
    let combined_se = spde.combined_stderr(&dual);
    Ok(DualityReport {
        spec: spec.to_string(),
        t: spec.t,
        spde,
        dual,
        gap,
        combined_se,
        z: z_score(gap, combined_se),
        allowance,
        pass: gap.abs() <= 3.0 * combined_se + allowance,
        dual_events,
    })
}

pub fn duality_from_states(
    spec: &MomentSpec,
    states: &[SpdeState],
    cfg: &SimConfig,
    reps_dual: usize,
    allowance: f64,
) -> Result<DualityReport> {
    let spde = moment_from_states(spec, states)?;
    duality_from_estimate(spec, spde, cfg, reps_dual, allowance)
}

pub fn duality_gap(
    spec: &MomentSpec,
    cfg: &SimConfig,
    reps_spde: usize,
    reps_dual: usize,
    allowance: f64,
) -> Result<DualityReport> {
    let spde = spde_moment_estimate(spec, cfg, reps_spde)?;
    duality_from_estimate(spec, spde, cfg, reps_dual, allowance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeOptions {
    pub tol: f64,
    /// Distance to the domain boundary below which an edge is flagged.
    pub margin: f64,
}

impl Default for EdgeOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_EDGE_TOL,
            margin: 3.0,
        }
    }
}

/// Edge time series of one replicate with running extrema and checks.
///
/// The dormant monotonicity flags use the support edges (`tol = 0`): the
/// dormant update is a convex combination with the old value, so its support
/// can only grow, while a thresholded edge may recede when a tiny value
/// decays below the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSeries {
    pub times: Vec<f64>,
    pub l_u: Vec<f64>,
    pub r_u: Vec<f64>,
    pub l_v: Vec<f64>,
    pub r_v: Vec<f64>,
    pub sup_r_u: Vec<f64>,
    pub inf_l_u: Vec<f64>,
    pub sup_r_v: Vec<f64>,
    pub inf_l_v: Vec<f64>,
    /// Snapshot indices with an edge inside the boundary margin.
    pub margin_flags: Vec<usize>,
    /// `R(v) <= max(R(v0), sup R(u))` and `L(v) >= min(L(v0), inf L(u))` at every index.
    pub ordering_ok: bool,
    pub r_v_monotone: bool,
    pub l_v_monotone: bool,
}

impl EdgeSeries {
    pub fn flagged(&self) -> bool {
        !self.margin_flags.is_empty()
    }

    pub fn sup_r_u_final(&self) -> f64 {
        self.sup_r_u.last().copied().unwrap_or(MINUS_INF)
    }
}

/// Streaming builder for [`EdgeSeries`].
#[derive(Debug, Clone)]
pub struct EdgeTracker {
    opts: EdgeOptions,
    series: EdgeSeries,
    r_v0: f64,
    l_v0: f64,
    prev_support: Option<(f64, f64)>,
}

impl EdgeTracker {
    pub fn new(opts: EdgeOptions) -> Self {
        Self {
            opts,
            series: EdgeSeries {
                times: Vec::new(),
                l_u: Vec::new(),
                r_u: Vec::new(),
                l_v: Vec::new(),
                r_v: Vec::new(),
                sup_r_u: Vec::new(),
                inf_l_u: Vec::new(),
                sup_r_v: Vec::new(),
                inf_l_v: Vec::new(),
                margin_flags: Vec::new(),
                ordering_ok: true,
                r_v_monotone: true,
                l_v_monotone: true,
            },
            r_v0: MINUS_INF,
            l_v0: PLUS_INF,
            prev_support: None,
        }
    }

    pub fn observe(&mut self, state: &SpdeState) {
        let tol = self.opts.tol;
        let s = &mut self.series;
        let (l_u, r_u) = (left_edge_with_tol(&state.u, tol), right_edge_with_tol(&state.u, tol));
        let (l_v, r_v) = (left_edge_with_tol(&state.v, tol), right_edge_with_tol(&state.v, tol));
        let k = s.times.len();
        if k == 0 {
            self.r_v0 = r_v;
            self.l_v0 = l_v;
        }
        let last = |v: &Vec<f64>, init: f64| v.last().copied().unwrap_or(init);
        let sup_r_u = last(&s.sup_r_u, MINUS_INF).max(r_u);
        let inf_l_u = last(&s.inf_l_u, PLUS_INF).min(l_u);
        s.sup_r_v.push(last(&s.sup_r_v, MINUS_INF).max(r_v));
        s.inf_l_v.push(last(&s.inf_l_v, PLUS_INF).min(l_v));
        s.sup_r_u.push(sup_r_u);
        s.inf_l_u.push(inf_l_u);
        s.times.push(state.t);
        s.l_u.push(l_u);
        s.r_u.push(r_u);
        s.l_v.push(l_v);
        s.r_v.push(r_v);

        if r_v > self.r_v0.max(sup_r_u) || l_v < self.l_v0.min(inf_l_u) {
            s.ordering_ok = false;
        }

        let g = state.grid();
        let near_right = |r: f64| r.is_finite() && r >= g.x_max() - self.opts.margin;
        let near_left = |l: f64| l.is_finite() && l <= g.x_min() + self.opts.margin;
        if near_right(r_u) || near_right(r_v) || near_left(l_u) || near_left(l_v) {
            s.margin_flags.push(k);
        }

        let support = (left_edge_with_tol(&state.v, 0.0), right_edge_with_tol(&state.v, 0.0));
        if let Some((l_prev, r_prev)) = self.prev_support {
            if support.1 < r_prev {
                s.r_v_monotone = false;
            }
            if support.0 > l_prev {
                s.l_v_monotone = false;
            }
        }
        self.prev_support = Some(support);
    }

    pub fn finish(self) -> EdgeSeries {
        self.series
    }
}

pub fn track_edges(trajectory: &SpdeTrajectory, opts: EdgeOptions) -> EdgeSeries {
    let mut tracker = EdgeTracker::new(opts);
    for s in &trajectory.snapshots {
        tracker.observe(s);
    }
    tracker.finish()
}

fn check_passage_level(grid: Grid1D, b: f64) -> Result<usize> {
    grid.index_of(b / 2.0)
        .or_else(|| (b / 2.0 < grid.x_min()).then_some(0))
        .ok_or_else(|| Error::Precondition(format!("b/2 = {} is not on the grid", b / 2.0)))
}

fn passed(state: &SpdeState, from: usize) -> bool {
    state.u.values[from..].iter().any(|&u| u >= 0.5)
}

/// First snapshot time at which `u >= 1/2` somewhere in `x >= b/2`.
pub fn first_passage_tau_b(trajectory: &SpdeTrajectory, b: f64) -> Result<Option<f64>> {
    let from = check_passage_level(trajectory.config.grid, b)?;
    Ok(trajectory
        .snapshots
        .iter()
        .find(|s| passed(s, from))
        .map(|s| s.t))
}

/// Per-replicate output of an interface run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceReplicate {
    pub seed: u64,
    pub edges: EdgeSeries,
    /// First passage time for each requested level, in order.
    pub tau: Vec<Option<f64>>,
}

/// Runs `replicates` SPDE paths, tracking edges at every step and the first
/// passage times of `tau_levels`.
pub fn interface_replicates(
    cfg: &SimConfig,
    replicates: usize,
    opts: EdgeOptions,
    tau_levels: &[f64],
) -> Result<Vec<InterfaceReplicate>> {
    cfg.validate()?;
    let starts: Vec<usize> = tau_levels
        .iter()
        .map(|&b| check_passage_level(cfg.grid, b))
        .collect::<Result<_>>()?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(cfg.seed, r);
            let c = cfg.with_seed(seed);
            let mut tracker = EdgeTracker::new(opts);
            let mut tau = vec![None; starts.len()];
            simulate(&c, initial_heaviside(c.grid), |_, s| {
                tracker.observe(s);
                for (t, &from) in tau.iter_mut().zip(&starts) {
                    if t.is_none() && passed(s, from) {
                        *t = Some(s.t);
                    }
                }
            })?;
            Ok(InterfaceReplicate {
                seed,
                edges: tracker.finish(),
                tau,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub b: f64,
    pub exceed: usize,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub rows: Vec<TailRow>,
    pub replicates: usize,
    /// Replicates with a boundary-margin flag; included in the rows.
    pub flagged: usize,
    pub monotone: bool,
}

/// Empirical `P(sup R(u) > b)` with 95% Wilson intervals. Levels are sorted.
pub fn tail_curve_from_suprema(suprema: &[f64], levels: &[f64], flagged: usize) -> TailCurve {
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    let n = suprema.len();
    let rows: Vec<TailRow> = levels
        .iter()
        .map(|&b| {
            let exceed = suprema.iter().filter(|&&s| s > b).count();
            let (ci_lo, ci_hi) = wilson_interval(exceed, n, 1.96);
            TailRow {
                b,
                exceed,
                p_hat: if n == 0 { 0.0 } else { exceed as f64 / n as f64 },
                ci_lo,
                ci_hi,
            }
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].p_hat <= w[0].p_hat);
    TailCurve {
        rows,
        replicates: n,
        flagged,
        monotone,
    }
}

pub fn tail_curve_from_replicates(reps: &[InterfaceReplicate], levels: &[f64]) -> TailCurve {
    let suprema: Vec<f64> = reps.iter().map(|r| r.edges.sup_r_u_final()).collect();
    let flagged = reps.iter().filter(|r| r.edges.flagged()).count();
    tail_curve_from_suprema(&suprema, levels, flagged)
}

pub fn edge_tail_curve(
    replicates: usize,
    cfg: &SimConfig,
    levels: &[f64],
    opts: EdgeOptions,
) -> Result<TailCurve> {
    for &b in levels {
        if !(b < cfg.grid.x_max() - opts.margin) {
            return Err(Error::Precondition(format!(
                "level {b} lies inside the boundary margin"
            )));
        }
    }
    let reps = interface_replicates(cfg, replicates, opts, &[])?;
    Ok(tail_curve_from_replicates(&reps, levels))
}

/// Reflection of `x` that exchanges the occupied and empty phases of the
/// lattice Heaviside front, which is centred half a spacing right of 0.
pub fn front_mirror(x: f64, dx: f64) -> f64 {
    dx - x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryRow {
    pub x: f64,
    pub mirror: f64,
    /// Per-replicate `u(x) + u(mirror) - 1`.
    pub stat: McEstimate,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub t: f64,
    pub rows: Vec<SymmetryRow>,
    pub pass: bool,
}

pub fn symmetry_from_states(states: &[SpdeState], points: &[f64]) -> Result<SymmetryReport> {
    let first = states
        .first()
        .ok_or_else(|| Error::Precondition("no SPDE states".into()))?;
    let g = first.grid();
    let rows = points
        .iter()
        .map(|&x| {
            let mirror = front_mirror(x, g.dx());
            let (i, j) = match (g.index_of(x), g.index_of(mirror)) {
                (Some(i), Some(j)) => (i, j),
                _ => {
                    return Err(Error::Precondition(format!(
                        "point {x} or its mirror {mirror} is off the grid"
                    )))
                }
            };
            let w: Vec<f64> = states
                .iter()
                .map(|s| s.u.values[i] + s.u.values[j] - 1.0)
                .collect();
            let stat = McEstimate::from_samples(&w)?;
            let z = z_score(stat.mean, stat.stderr);
            Ok(SymmetryRow {
                x,
                mirror,
                stat,
                z,
                pass: z.abs() <= 3.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetryReport {
        t: first.t,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

pub fn symmetry_check(cfg: &SimConfig, replicates: usize, points: &[f64]) -> Result<SymmetryReport> {
    symmetry_from_states(&spde_final_states(cfg, replicates)?, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spde::run_spde;

    fn grid() -> Grid1D {
        Grid1D::new(-15.0, 15.0, 0.1).unwrap()
    }

    fn cfg(t: f64) -> SimConfig {
        SimConfig::new(1.0, 1.0, grid(), 0.004, t, 5).unwrap()
    }

    #[test]
    fn spec_size_limits() {
        assert!(MomentSpec::new(vec![], 0.5).is_err());
        assert!(MomentSpec::new(vec![(0.0, Marker::Active); 5], 0.5).is_err());
        assert!(MomentSpec::new(vec![(0.0, Marker::Active); 4], 0.5).is_ok());
    }

    #[test]
    fn parse_and_display() {
        let pts = MomentSpec::parse_points("0:a, 0.5:d").unwrap();
        assert_eq!(pts, vec![(0.0, Marker::Active), (0.5, Marker::Dormant)]);
        assert_eq!(MomentSpec::new(pts, 0.5).unwrap().to_string(), "0:a;0.5:d");
        assert!(MomentSpec::parse_points("0:x").is_err());
        assert!(MomentSpec::parse_points("0").is_err());
    }

    #[test]
    fn off_lattice_point_rejected() {
        let spec = MomentSpec::new(vec![(0.05, Marker::Active)], 0.0).unwrap();
        assert!(spde_moment_estimate(&spec, &cfg(0.1), 10).is_err());
    }

    #[test]
    fn time_zero_moment_and_gap() {
        let spec = MomentSpec::new(vec![(0.0, Marker::Active), (-1.0, Marker::Dormant)], 0.0).unwrap();
        let m = spde_moment_estimate(&spec, &cfg(0.1), 10).unwrap();
        assert_eq!((m.mean, m.stderr), (1.0, 0.0));
        let r = duality_gap(&spec, &cfg(0.1), 10, 10, 0.02).unwrap();
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.z, 0.0);
        assert!(r.pass);

        let spec = MomentSpec::new(vec![(0.1, Marker::Active)], 0.0).unwrap();
        let m = spde_moment_estimate(&spec, &cfg(0.1), 10).unwrap();
        assert_eq!(m.mean, 0.0);
    }

    #[test]
    fn deep_occupied_point() {
        let spec = MomentSpec::new(vec![(-8.0, Marker::Active)], 0.25).unwrap();
        let c = SimConfig::new(1.0, 1.0, grid(), 0.0025, 1.0, 5).unwrap();
        let m = spde_moment_estimate(&spec, &c, 50).unwrap();
        assert!(m.mean >= 0.99, "{m:?}");
    }

    #[test]
    fn single_active_duality_small_run() {
        let spec = MomentSpec::new(vec![(0.0, Marker::Active)], 0.5).unwrap();
        let r = duality_gap(&spec, &cfg(1.0), 400, 4000, 0.02).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn states_must_match_moment_time() {
        let states = spde_final_states(&cfg(0.1), 3).unwrap();
        let spec = MomentSpec::new(vec![(0.0, Marker::Active)], 0.5).unwrap();
        assert!(moment_from_states(&spec, &states).is_err());
    }

    #[test]
    fn replicate_states_are_reproducible() {
        let a = spde_final_states(&cfg(0.1), 4).unwrap();
        let b = spde_final_states(&cfg(0.1), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn initial_edges() {
        let c = cfg(0.1);
        let traj = run_spde(&c).unwrap();
        let e = track_edges(&traj, EdgeOptions::default());
        assert_eq!(e.r_u[0], 0.0);
        assert!((e.l_u[0] - 0.1).abs() < 1e-12);
        assert_eq!(e.times.len(), traj.snapshots.len());
        assert!(e.ordering_ok && e.r_v_monotone && e.l_v_monotone);
    }

    #[test]
    fn deterministic_heat_flow_reaches_the_margin() {
        let c = SimConfig::new(0.0, 0.0, grid(), 0.004, 1.0, 0)
            .unwrap()
            .with_noise(false);
        let traj = run_spde(&c).unwrap();
        let e = track_edges(&traj, EdgeOptions { tol: 0.0, margin: 3.0 });
        assert!(e.flagged());
        assert!(e.r_u.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn running_extrema_are_monotone() {
        let traj = run_spde(&cfg(0.5)).unwrap();
        let e = track_edges(&traj, EdgeOptions::default());
        assert!(e.sup_r_u.windows(2).all(|w| w[1] >= w[0]));
        assert!(e.inf_l_u.windows(2).all(|w| w[1] <= w[0]));
        for k in 0..e.times.len() {
            assert!(e.sup_r_u[k] >= e.r_u[k] && e.inf_l_u[k] <= e.l_u[k]);
        }
        assert!(e.ordering_ok);
        assert!(e.r_v_monotone);
    }

    #[test]
    fn passage_times_ordered_by_level() {
        let reps = interface_replicates(&cfg(1.0), 41, EdgeOptions::default(), &[1.0, 2.0]).unwrap();
        let mut taus: Vec<f64> = reps.iter().map(|r| r.tau[0].unwrap_or(f64::INFINITY)).collect();
        taus.sort_by(f64::total_cmp);
        assert!(taus[20] < 0.5, "{taus:?}");
        for r in &reps {
            match (r.tau[0], r.tau[1]) {
                (Some(a), Some(b)) => assert!(a <= b),
                (None, Some(_)) => panic!("higher level reached first"),
                _ => {}
            }
        }
    }

    #[test]
    fn deterministic_passage_never_happens() {
        let c = SimConfig::new(0.0, 0.0, grid(), 0.004, 1.0, 0)
            .unwrap()
            .with_noise(false);
        let traj = run_spde(&c).unwrap();
        assert_eq!(first_passage_tau_b(&traj, 1.0).unwrap(), None);
        assert!(first_passage_tau_b(&traj, 1.05).is_err());
    }

    #[test]
    fn streamed_passage_matches_trajectory() {
        let c = cfg(0.3);
        let reps = interface_replicates(&c, 3, EdgeOptions::default(), &[1.0, 2.0]).unwrap();
        for r in &reps {
            let traj = run_spde(&c.with_seed(r.seed)).unwrap();
            assert_eq!(r.tau[0], first_passage_tau_b(&traj, 1.0).unwrap());
            assert_eq!(r.tau[1], first_passage_tau_b(&traj, 2.0).unwrap());
            assert_eq!(r.edges, track_edges(&traj, EdgeOptions::default()));
        }
    }

    #[test]
    fn tail_curve_counts() {
        let curve = tail_curve_from_suprema(&[0.5, 1.5, 2.5, 3.5], &[3.0, 1.0, 2.0], 1);
        let p: Vec<f64> = curve.rows.iter().map(|r| r.p_hat).collect();
        assert_eq!(p, vec![0.75, 0.5, 0.25]);
        assert!(curve.monotone);
        assert_eq!(curve.flagged, 1);
        for r in &curve.rows {
            assert!(r.ci_lo <= r.p_hat && r.p_hat <= r.ci_hi);
        }
    }

    #[test]
    fn tail_level_in_margin_rejected() {
        assert!(edge_tail_curve(2, &cfg(0.1), &[13.0], EdgeOptions::default()).is_err());
    }

    #[test]
    fn tail_at_zero_level() {
        let curve = edge_tail_curve(20, &cfg(0.2), &[0.0], EdgeOptions::default()).unwrap();
        assert!(curve.rows[0].p_hat >= 0.5);
    }

    #[test]
    fn deterministic_symmetry_is_exact() {
        let c = SimConfig::new(0.0, 0.0, grid(), 0.004, 0.5, 0)
            .unwrap()
            .with_noise(false);
        let s = simulate(&c, initial_heaviside(c.grid), |_, _| {}).unwrap();
        for x in [0.0, 0.5, 1.0, 3.0] {
            let i = grid().index_of(x).unwrap();
            let j = grid().index_of(front_mirror(x, 0.1)).unwrap();
            assert!((s.u.values[i] + s.u.values[j] - 1.0).abs() < 1e-10);
        }
        let r = symmetry_from_states(&[s.clone(), s], &[0.0, 1.0]).unwrap();
        assert!(r.pass);
        assert!(r.rows.iter().all(|row| row.z == 0.0));
    }

    #[test]
    fn z_score_conventions() {
        assert_eq!(z_score(0.0, 0.0), 0.0);
        assert_eq!(z_score(0.1, 0.0), f64::INFINITY);
        assert_eq!(z_score(-0.1, 0.0), f64::NEG_INFINITY);
        assert_eq!(z_score(0.2, 0.1), 2.0);
    }
}
