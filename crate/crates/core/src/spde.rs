//! Explicit Euler–Maruyama finite differences for the stochastic heat
//! equation with seed bank,
//!
//! ```text
//! du = [ (1/2) u_xx + c (v - u) ] dt + sqrt(u (1 - u)) dW
//! dv = c' (u - v) dt
//! ```
//!
//! on a truncated lattice whose two outermost sites at each end are held at
//! their initial values. Site noise has variance `dt / dx`, the lattice
//! scaling of space-time white noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, LatticeField};
use crate::stats::{stream_rng, Stream};

/// Number of held sites at each end of the lattice.
pub const PINNED_SITES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// The two outermost sites on each side keep their initial values.
    PinnedFront,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Active-to-dormant coupling rate in the `u` equation.
    pub c: f64,
    /// Dormant-to-active rate in the `v` equation.
    pub c_prime: f64,
    pub grid: Grid1D,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub boundary: Boundary,
    pub noise_on: bool,
}

impl SimConfig {
    pub fn new(c: f64, c_prime: f64, grid: Grid1D, dt: f64, t_max: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            c,
            c_prime,
            grid,
            dt,
            t_max,
            seed,
            boundary: Boundary::PinnedFront,
            noise_on: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_noise(mut self, on: bool) -> Self {
        self.noise_on = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same configuration with a different horizon; re-validated.
    pub fn with_horizon(mut self, t_max: f64) -> Result<Self> {
        self.t_max = t_max;
        self.validate()?;
        Ok(self)
    }

    /// Every violated invariant, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.c >= 0.0 && self.c.is_finite()) {
            out.push(format!("rate c must be >= 0, got {}", self.c));
        }
        if !(self.c_prime >= 0.0 && self.c_prime.is_finite()) {
            out.push(format!("rate c_prime must be >= 0, got {}", self.c_prime));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be > 0, got {}", self.dt));
        } else {
            let limit = self.grid.dx() * self.grid.dx() / 2.0;
            if self.dt > limit * (1.0 + 1e-12) {
                out.push(format!(
                    "stability: dt = {} exceeds dx^2/2 = {}",
                    self.dt, limit
                ));
            }
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            out.push(format!("t_max must be > 0, got {}", self.t_max));
        } else if self.dt > 0.0 {
            let ratio = self.t_max / self.dt;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                out.push(format!(
                    "t_max / dt = {ratio} is not an integer number of steps"
                ));
            }
        }
        if self.grid.len() < 2 * PINNED_SITES + 1 {
            out.push(format!(
                "grid needs at least {} points, got {}",
                2 * PINNED_SITES + 1,
                self.grid.len()
            ));
        }
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

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn is_stable(&self) -> bool {
        self.dt <= self.grid.dx() * self.grid.dx() / 2.0 * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdeState {
    pub t: f64,
    pub u: LatticeField,
    pub v: LatticeField,
}

impl SpdeState {
    pub fn grid(&self) -> Grid1D {
        self.u.grid
    }
}

#[derive(Debug, Clone)]
pub struct SpdeTrajectory {
    pub config: SimConfig,
    pub snapshots: Vec<SpdeState>,
}

impl SpdeTrajectory {
    pub fn last(&self) -> &SpdeState {
        self.snapshots.last().expect("trajectory has an initial snapshot")
    }
}

/// Per-site Gaussian increments with variance `dt / dx`.
#[derive(Debug, Clone)]
pub struct NoiseIncrement {
    pub values: Vec<f64>,
    scale: f64,
}

impl NoiseIncrement {
    pub fn new(sites: usize, dt: f64, dx: f64) -> Self {
        Self {
            values: vec![0.0; sites],
            scale: (dt / dx).sqrt(),
        }
    }

    pub fn variance(&self) -> f64 {
        self.scale * self.scale
    }

    /// Redraws every site in index order.
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for x in &mut self.values {
            let z: f64 = rng.sample(StandardNormal);
            *x = self.scale * z;
        }
    }
}

/// `u = v = 1_{x <= 0}` at `t = 0`.
pub fn initial_heaviside(grid: Grid1D) -> SpdeState {
    let f = LatticeField::step_down(grid, 0.0);
    SpdeState {
        t: 0.0,
        u: f.clone(),
        v: f,
    }
}

/// Advances `state` by one step in place. `noise` is scratch space; its
/// interior entries are redrawn in site order when noise is on.
pub fn step_in_place<R: Rng + ?Sized>(
    state: &mut SpdeState,
    next_u: &mut Vec<f64>,
    noise: &mut NoiseIncrement,
    cfg: &SimConfig,
    rng: &mut R,
    step_index: usize,
) -> Result<()> {
    let n = state.u.values.len();
    let dx = cfg.grid.dx();
    let dt = cfg.dt;
    let diff = dt / (2.0 * dx * dx);
    let u = &state.u.values;
    let v = &mut state.v.values;
    let interior = PINNED_SITES..n - PINNED_SITES;

    if cfg.noise_on {
        let scale = noise.scale;
        for i in interior.clone() {
            let z: f64 = rng.sample(StandardNormal);
            noise.values[i] = scale * z;
        }
    }

    next_u.clear();
    next_u.extend_from_slice(u);
    for i in interior.clone() {
        let ui = u[i];
        let vi = v[i];
        let mut x = ui + diff * (u[i - 1] - 2.0 * ui + u[i + 1]) + dt * cfg.c * (vi - ui);
        if cfg.noise_on {
            x += (ui * (1.0 - ui)).max(0.0).sqrt() * noise.values[i];
        }
        if !x.is_finite() {
            return Err(Error::Numerical { step: step_index, site: i });
        }
        next_u[i] = x.clamp(0.0, 1.0);
    }
    for i in interior {
        let y = v[i] + dt * cfg.c_prime * (u[i] - v[i]);
        if !y.is_finite() {
            return Err(Error::Numerical { step: step_index, site: i });
        }
        v[i] = y.clamp(0.0, 1.0);
    }
    std::mem::swap(&mut state.u.values, next_u);
    state.t = (step_index + 1) as f64 * dt;
    Ok(())
}

/// One explicit step, returning the new state.
pub fn spde_step<R: Rng + ?Sized>(
    state: &SpdeState,
    cfg: &SimConfig,
    rng: &mut R,
    step_index: usize,
) -> Result<SpdeState> {
    let mut next = state.clone();
    let mut scratch = Vec::with_capacity(state.u.values.len());
    let mut noise = NoiseIncrement::new(state.u.values.len(), cfg.dt, cfg.grid.dx());
    step_in_place(&mut next, &mut scratch, &mut noise, cfg, rng, step_index)?;
    Ok(next)
}

/// Integrates from `initial` to `cfg.t_max`, calling `observe(step, state)`
/// at step 0 and after every step. The random stream is derived from
/// `cfg.seed` alone.
pub fn simulate<F>(cfg: &SimConfig, initial: SpdeState, mut observe: F) -> Result<SpdeState>
where
    F: FnMut(usize, &SpdeState),
{
    cfg.validate()?;
    if initial.u.grid != cfg.grid || initial.v.grid != cfg.grid {
        return Err(Error::Precondition(
            "initial state is not on the configured grid".into(),
        ));
    }
    let mut rng = stream_rng(cfg.seed, Stream::Spde);
    let n = cfg.grid.len();
    let mut state = initial;
    let mut scratch = Vec::with_capacity(n);
    let mut noise = NoiseIncrement::new(n, cfg.dt, cfg.grid.dx());
    observe(0, &state);
    for k in 0..cfg.n_steps() {
        step_in_place(&mut state, &mut scratch, &mut noise, cfg, &mut rng, k)?;
        observe(k + 1, &state);
    }
    Ok(state)
}

/// Runs from the Heaviside front and keeps every snapshot.
pub fn run_spde(cfg: &SimConfig) -> Result<SpdeTrajectory> {
    run_spde_strided(cfg, 1)
}

/// Keeps snapshots at multiples of `stride` steps plus the final one.
pub fn run_spde_strided(cfg: &SimConfig, stride: usize) -> Result<SpdeTrajectory> {
    let stride = stride.max(1);
    let last = cfg.n_steps();
    let mut snapshots = Vec::with_capacity(last / stride + 2);
    simulate(cfg, initial_heaviside(cfg.grid), |k, s| {
        if k % stride == 0 || k == last {
            snapshots.push(s.clone());
        }
    })?;
    Ok(SpdeTrajectory {
        config: *cfg,
        snapshots,
    })
}

/// Dormant field reconstructed from the active path:
/// `e^{-r t} v0 + sum_k r e^{-r (t - s_k)} u(s_k) dt` over left endpoints
/// `s_k < t`, with `r` the rate of the `v` equation.
pub fn delay_quadrature_v(
    u_path: &[SpdeState],
    v0: &LatticeField,
    rate: f64,
    t: f64,
) -> Result<LatticeField> {
    if u_path.is_empty() {
        return Err(Error::Precondition("empty path".into()));
    }
    if t == 0.0 {
        return Ok(v0.clone());
    }
    if u_path.len() < 2 {
        return Err(Error::Precondition("path needs at least two epochs".into()));
    }
    let dt = u_path[1].t - u_path[0].t;
    if !(dt > 0.0) || u_path[0].t.abs() > 1e-12 {
        return Err(Error::Precondition("path must start at t = 0 with positive spacing".into()));
    }
    let steps = (t / dt).round() as usize;
    if (steps as f64 * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::Precondition(format!("t = {t} is not on the path's time lattice")));
    }
    if u_path.len() < steps {
        return Err(Error::Precondition(format!(
            "path covers {} epochs but {steps} are needed",
            u_path.len()
        )));
    }
    for (k, s) in u_path.iter().take(steps).enumerate() {
        if (s.t - k as f64 * dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::Precondition(format!("path gap at epoch {k} (t = {})", s.t)));
        }
    }
    let mut out = LatticeField {
        grid: v0.grid,
        values: v0.values.iter().map(|&x| (-rate * t).exp() * x).collect(),
    };
    for (k, s) in u_path.iter().take(steps).enumerate() {
        let w = rate * (-rate * (t - k as f64 * dt)).exp() * dt;
        for (o, &x) in out.values.iter_mut().zip(&s.u.values) {
            *o += w * x;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{heat_semigroup_heaviside, left_edge, right_edge};
    use crate::stats::stream_rng;

    fn cfg(c: f64, dx: f64, dt: f64, t_max: f64) -> SimConfig {
        let grid = Grid1D::new(-15.0, 15.0, dx).unwrap();
        SimConfig::new(c, c, grid, dt, t_max, 11).unwrap()
    }

    #[test]
    fn heaviside_on_small_grid() {
        let g = Grid1D::new(-2.0, 2.0, 1.0).unwrap();
        let s = initial_heaviside(g);
        assert_eq!(s.u.values, vec![1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.u, s.v);
        assert_eq!(s.t, 0.0);
        assert_eq!(left_edge(&s.u), 1.0);
        assert_eq!(right_edge(&s.u), 0.0);
    }

    #[test]
    fn validation_reports_everything() {
        let g = Grid1D::new(-1.0, 1.0, 0.1).unwrap();
        let bad = SimConfig {
            c: -1.0,
            c_prime: 1.0,
            grid: g,
            dt: 0.1,
            t_max: 0.25,
            seed: 0,
            boundary: Boundary::PinnedFront,
            noise_on: true,
        };
        let v = bad.violations();
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v.iter().any(|m| m.contains("stability")));
        assert!(v.iter().any(|m| m.contains("rate c ")));
        assert!(v.iter().any(|m| m.contains("integer")));
    }

    #[test]
    fn absorbing_states_are_fixed() {
        let c = cfg(1.0, 0.1, 0.004, 0.04);
        let mut rng = stream_rng(3, Stream::Spde);
        for value in [0.0, 1.0] {
            let s = SpdeState {
                t: 0.0,
                u: LatticeField::constant(c.grid, value),
                v: LatticeField::constant(c.grid, value),
            };
            let next = spde_step(&s, &c, &mut rng, 0).unwrap();
            assert!(next.u.values.iter().all(|&x| x == value));
            assert!(next.v.values.iter().all(|&x| x == value));
            assert_eq!(next.t, 0.004);
        }
    }

    #[test]
    fn forced_euler_update() {
        let g = Grid1D::new(-1.0, 1.0, 0.2).unwrap();
        let c = SimConfig::new(1.0, 1.0, g, 0.01, 0.01, 0).unwrap().with_noise(false);
        let s = SpdeState {
            t: 0.0,
            u: LatticeField::zeros(g),
            v: LatticeField::constant(g, 1.0),
        };
        let mut rng = stream_rng(0, Stream::Spde);
        let next = spde_step(&s, &c, &mut rng, 0).unwrap();
        for i in PINNED_SITES..g.len() - PINNED_SITES {
            assert!((next.u.values[i] - 0.01).abs() < 1e-15);
            assert!((next.v.values[i] - 0.99).abs() < 1e-15);
        }
        assert_eq!(next.u.values[0], 0.0);
        assert_eq!(next.v.values[0], 1.0);
    }

    #[test]
    fn noise_increment_variance() {
        let mut noise = NoiseIncrement::new(1000, 0.004, 0.1);
        let mut rng = stream_rng(5, Stream::Spde);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut n = 0.0;
        for _ in 0..200 {
            noise.fill(&mut rng);
            for &x in &noise.values {
                sum += x;
                sum2 += x * x;
                n += 1.0;
            }
        }
        let var = 0.04;
        let mean = sum / n;
        let emp_var = sum2 / n - mean * mean;
        // stderr of the mean is sqrt(var/n); of the variance about var*sqrt(2/n)
        assert!(mean.abs() < 3.0 * (var / n).sqrt());
        assert!((emp_var - var).abs() < 3.0 * var * (2.0 / n).sqrt());
        assert!((noise.variance() - var).abs() < 1e-15);
    }

    #[test]
    fn deterministic_heat_flow_matches_semigroup() {
        // The sampled indicator 1_{x <= 0} is centred at dx/2 on the lattice.
        let c = cfg(0.0, 0.1, 0.0025, 0.25).with_noise(false);
        let traj = run_spde_strided(&c, 1000).unwrap();
        let last = traj.last();
        assert!((last.t - 0.25).abs() < 1e-12);
        let g = c.grid;
        let mut err: f64 = 0.0;
        for i in PINNED_SITES..g.len() - PINNED_SITES {
            let x = g.point(i) - g.dx() / 2.0;
            err = err.max((last.u.values[i] - heat_semigroup_heaviside(last.t, x).unwrap()).abs());
        }
        assert!(err < 5e-3, "max error {err}");
    }

    #[test]
    fn same_seed_same_trajectory() {
        let c = cfg(1.0, 0.1, 0.004, 0.2);
        let a = run_spde(&c).unwrap();
        let b = run_spde(&c).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        let d = run_spde(&c.with_seed(12)).unwrap();
        assert_ne!(a.last().u, d.last().u);
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let c = cfg(1.0, 0.1, 0.004, 1.0);
        simulate(&c, initial_heaviside(c.grid), |_, s| {
            assert!(s.u.in_unit_range() && s.v.in_unit_range());
        })
        .unwrap();
    }

    #[test]
    fn snapshots_start_at_initial_condition() {
        let c = cfg(1.0, 0.1, 0.004, 0.1);
        let traj = run_spde_strided(&c, 4).unwrap();
        assert_eq!(traj.snapshots[0], initial_heaviside(c.grid));
        // 25 steps: snapshots at 0,4,...,24 and the final step 25
        assert_eq!(traj.snapshots.len(), 8);
        assert!(traj.snapshots.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn quadrature_fixed_point_and_decay() {
        let g = Grid1D::new(-1.0, 1.0, 0.1).unwrap();
        let dt = 0.001;
        let kappa = 0.3;
        let path: Vec<_> = (0..1000)
            .map(|k| SpdeState {
                t: k as f64 * dt,
                u: LatticeField::constant(g, kappa),
                v: LatticeField::constant(g, kappa),
            })
            .collect();
        let v = delay_quadrature_v(&path, &LatticeField::constant(g, kappa), 1.0, 1.0).unwrap();
        assert!(v.values.iter().all(|x| (x - kappa).abs() < dt));

        let zero_path: Vec<_> = path
            .iter()
            .map(|s| SpdeState { t: s.t, u: LatticeField::zeros(g), v: s.v.clone() })
            .collect();
        let v = delay_quadrature_v(&zero_path, &LatticeField::constant(g, 1.0), 1.0, 1.0).unwrap();
        assert!(v.values.iter().all(|x| (x - 0.367_879_4).abs() < 1e-7));
    }

    #[test]
    fn quadrature_rejects_gaps() {
        let g = Grid1D::new(-1.0, 1.0, 0.1).unwrap();
        let mut path: Vec<_> = (0..10)
            .map(|k| SpdeState {
                t: k as f64 * 0.01,
                u: LatticeField::zeros(g),
                v: LatticeField::zeros(g),
            })
            .collect();
        path.remove(4);
        assert!(delay_quadrature_v(&path, &LatticeField::zeros(g), 1.0, 0.09).is_err());
        assert!(delay_quadrature_v(&path[..3], &LatticeField::zeros(g), 1.0, 0.09).is_err());
    }

    #[test]
    fn stepped_v_matches_quadrature_pathwise() {
        let c = cfg(1.0, 0.1, 0.004, 1.0);
        let traj = run_spde(&c).unwrap();
        let v0 = &traj.snapshots[0].v;
        for s in traj.snapshots.iter().step_by(25).skip(1) {
            let q = delay_quadrature_v(&traj.snapshots, v0, c.c_prime, s.t).unwrap();
            assert!(q.max_abs_diff(&s.v) <= 5.0 * c.dt);
        }
    }

    #[test]
    fn dormant_support_grows_and_trails_active_edge() {
        let c = cfg(1.0, 0.1, 0.004, 1.0);
        let mut prev_rv = f64::NEG_INFINITY;
        let mut max_ru = f64::NEG_INFINITY;
        let mut rv0 = None;
        simulate(&c, initial_heaviside(c.grid), |_, s| {
            let rv = crate::grid::right_edge_with_tol(&s.v, 0.0);
            let rv0 = *rv0.get_or_insert(rv);
            assert!(rv >= prev_rv);
            assert!(rv <= rv0.max(max_ru));
            max_ru = max_ru.max(crate::grid::right_edge_with_tol(&s.u, 0.0));
            prev_rv = rv;
        })
        .unwrap();
    }

    #[test]
    fn noiseless_run_matches_independent_two_component_stepper() {
        let c = cfg(1.0, 0.1, 0.004, 0.5).with_noise(false);
        let out = run_spde_strided(&c, 10_000).unwrap();
        // independent stepper: same explicit scheme, written directly
        let n = c.grid.len();
        let init = initial_heaviside(c.grid);
        let (mut u, mut v) = (init.u.values, init.v.values);
        let r = c.dt / (2.0 * c.grid.dx() * c.grid.dx());
        for _ in 0..c.n_steps() {
            let mut nu = u.clone();
            let mut nv = v.clone();
            for i in 2..n - 2 {
                nu[i] = u[i] + r * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + c.dt * (v[i] - u[i]);
                nv[i] = v[i] + c.dt * (u[i] - v[i]);
            }
            u = nu;
            v = nv;
        }
        let last = out.last();
        for i in 0..n {
            assert!((last.u.values[i] - u[i]).abs() <= 1e-12);
            assert!((last.v.values[i] - v[i]).abs() <= 1e-12);
        }
    }
}
