//! Deterministic solver for the forced delay reaction–diffusion system
//!
//! ```text
//! d_s phi    = (1/2) phi_xx - phi^2 / 4 + c (varphi - phi) + lambda psi_b
//! d_s varphi = c (phi - varphi),           phi(0) = varphi(0) = 0
//! ```
//!
//! in two formulations: the local two-component system, and the functional
//! form where `varphi` is replaced by the exponentially weighted memory
//! `m(s) = c e^{-cs} int_0^s e^{cr} phi(r) dr`. Also hosts the numerical
//! checks of the comparison machinery built on top of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, LatticeField};

/// Coefficient of the quadratic damping term.
pub const QUADRATIC_DAMPING: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiShape {
    /// `psi(y) = y^2 e^{-y}` for `y > 0`, zero otherwise.
    QuadraticExponential,
}

impl PsiShape {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            PsiShape::QuadraticExponential => {
                if y > 0.0 {
                    y * y * (-y).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Shifted test function `psi(x - b)`.
pub fn psi_b(x: f64, b: f64) -> f64 {
    PsiShape::QuadraticExponential.eval(x - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfdeConfig {
    pub lambda: f64,
    pub b: f64,
    pub c: f64,
    pub grid: Grid1D,
    pub dt: f64,
    pub t_max: f64,
    pub psi_shape: PsiShape,
}

impl PfdeConfig {
    pub fn new(lambda: f64, b: f64, c: f64, grid: Grid1D, dt: f64, t_max: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            b,
            c,
            grid,
            dt,
            t_max,
            psi_shape: PsiShape::QuadraticExponential,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            out.push(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            out.push(format!("rate c must be >= 0, got {}", self.c));
        }
        if !(self.b > 0.0) {
            out.push(format!("front offset b must be > 0, got {}", self.b));
        }
        if self.b < self.grid.x_min() + 2.0 || self.b > self.grid.x_max() - 2.0 {
            out.push(format!(
                "b = {} needs a margin of 2 inside [{}, {}]",
                self.b,
                self.grid.x_min(),
                self.grid.x_max()
            ));
        }
        if !(self.dt > 0.0) {
            out.push(format!("dt must be > 0, got {}", self.dt));
        } else if self.dt > self.grid.dx() * self.grid.dx() / 2.0 * (1.0 + 1e-12) {
            out.push(format!(
                "stability: dt = {} exceeds dx^2/2 = {}",
                self.dt,
                self.grid.dx() * self.grid.dx() / 2.0
            ));
        }
        if !(self.t_max > 0.0) {
            out.push(format!("t_max must be > 0, got {}", self.t_max));
        } else if self.dt > 0.0 {
            let r = self.t_max / self.dt;
            if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                out.push(format!("t_max / dt = {r} is not an integer number of steps"));
            }
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

    fn forcing(&self) -> Vec<f64> {
        self.grid
            .points()
            .map(|x| self.lambda * self.psi_shape.eval(x - self.b))
            .collect()
    }
}

/// Time-indexed `phi` and `varphi` at every step. For the two-component
/// scheme `memory` equals the final `varphi`; for the functional scheme it is
/// the final quadrature accumulator.
#[derive(Debug, Clone)]
pub struct PfdeSolution {
    pub config: PfdeConfig,
    pub times: Vec<f64>,
    pub phi: Vec<LatticeField>,
    pub varphi: Vec<LatticeField>,
    pub memory: LatticeField,
}

impl PfdeSolution {
    pub fn grid(&self) -> Grid1D {
        self.config.grid
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    /// `phi` at the stored step closest to `s`.
    pub fn phi_at_time(&self, s: f64) -> &LatticeField {
        let k = ((s / self.dt()).round() as usize).min(self.phi.len() - 1);
        &self.phi[k]
    }

    /// Bilinear interpolation of `phi` in `(s, x)`; `None` off the grid.
    pub fn phi_interp(&self, s: f64, x: f64) -> Option<f64> {
        let g = self.grid();
        if !g.contains(x) || s < 0.0 {
            return None;
        }
        let last_t = (self.phi.len() - 1) as f64;
        let ts = (s / self.dt()).min(last_t);
        let k0 = (ts.floor() as usize).min(self.phi.len() - 1);
        let k1 = (k0 + 1).min(self.phi.len() - 1);
        let wt = ts - k0 as f64;
        let xs = g.fractional_index(x).clamp(0.0, (g.len() - 1) as f64);
        let i0 = (xs.floor() as usize).min(g.len() - 1);
        let i1 = (i0 + 1).min(g.len() - 1);
        let wx = xs - i0 as f64;
        let row = |k: usize| {
            let v = &self.phi[k].values;
            v[i0] * (1.0 - wx) + v[i1] * wx
        };
        Some(row(k0) * (1.0 - wt) + row(k1) * wt)
    }

    /// `sup |phi_a - phi_b| / sup |phi_a|` over all stored steps and sites,
    /// taken as the larger of the `phi` and `varphi` discrepancies.
    pub fn relative_sup_difference(&self, other: &PfdeSolution) -> f64 {
        fn rel(a: &[LatticeField], b: &[LatticeField]) -> f64 {
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for (fa, fb) in a.iter().zip(b) {
                for (x, y) in fa.values.iter().zip(&fb.values) {
                    diff = diff.max((x - y).abs());
                    scale = scale.max(x.abs());
                }
            }
            if scale == 0.0 {
                diff
            } else {
                diff / scale
            }
        }
        rel(&self.phi, &other.phi).max(rel(&self.varphi, &other.varphi))
    }

    pub fn min_value(&self) -> f64 {
        self.phi
            .iter()
            .chain(&self.varphi)
            .flat_map(|f| f.values.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coupling {
    /// `varphi` advanced by explicit Euler.
    TwoComponent,
    /// `varphi` replaced by the left-endpoint exponential memory sum.
    MemoryQuadrature,
}

fn laplacian_neumann(phi: &[f64], i: usize) -> f64 {
    let n = phi.len();
    let left = if i == 0 { phi[1] } else { phi[i - 1] };
    let right = if i == n - 1 { phi[n - 2] } else { phi[i + 1] };
    left - 2.0 * phi[i] + right
}

fn solve(cfg: &PfdeConfig, coupling: Coupling, damping: f64) -> Result<PfdeSolution> {
    cfg.validate()?;
    let g = cfg.grid;
    let n = g.len();
    let dt = cfg.dt;
    let c = cfg.c;
    let diff = dt / (2.0 * g.dx() * g.dx());
    let forcing = cfg.forcing();
    let decay = (-c * dt).exp();

    let steps = cfg.n_steps();
    let mut times = Vec::with_capacity(steps + 1);
    let mut phis = Vec::with_capacity(steps + 1);
    let mut varphis = Vec::with_capacity(steps + 1);

    let mut phi = vec![0.0; n];
    let mut coupled = vec![0.0; n];
    let mut next = vec![0.0; n];
    times.push(0.0);
    phis.push(LatticeField { grid: g, values: phi.clone() });
    varphis.push(LatticeField { grid: g, values: coupled.clone() });

    for k in 0..steps {
        for i in 0..n {
            let p = phi[i];
            let x = p
                + diff * laplacian_neumann(&phi, i)
                + dt * (-damping * p * p + c * (coupled[i] - p) + forcing[i]);
            if !x.is_finite() {
                return Err(Error::Numerical { step: k, site: i });
            }
            next[i] = x;
        }
        for i in 0..n {
            coupled[i] = match coupling {
                Coupling::TwoComponent => coupled[i] + dt * c * (phi[i] - coupled[i]),
                // m(s_{k+1}) = e^{-c dt} (m(s_k) + c dt phi(s_k))
                Coupling::MemoryQuadrature => decay * (coupled[i] + c * dt * phi[i]),
            };
        }
        std::mem::swap(&mut phi, &mut next);
        times.push((k + 1) as f64 * dt);
        phis.push(LatticeField { grid: g, values: phi.clone() });
        varphis.push(LatticeField { grid: g, values: coupled.clone() });
    }
    Ok(PfdeSolution {
        config: *cfg,
        times,
        phi: phis,
        memory: LatticeField { grid: g, values: coupled },
        varphi: varphis,
    })
}

/// Explicit Euler on the local two-component system, Neumann ends.
pub fn solve_two_component(cfg: &PfdeConfig) -> Result<PfdeSolution> {
    solve(cfg, Coupling::TwoComponent, QUADRATIC_DAMPING)
}

/// Same `phi` update, coupled to the explicit memory quadrature
/// `c e^{-c s} sum_k e^{c s_k} phi(s_k) dt` carried in O(1) storage.
pub fn solve_memory_quadrature(cfg: &PfdeConfig) -> Result<PfdeSolution> {
    solve(cfg, Coupling::MemoryQuadrature, QUADRATIC_DAMPING)
}

/// The two-component system without the quadratic damping; an upper
/// solution for [`solve_two_component`].
pub fn solve_linear(cfg: &PfdeConfig) -> Result<PfdeSolution> {
    solve(cfg, Coupling::TwoComponent, 0.0)
}

/// Residual of `xi(s, x) = alpha / (x - b)^2` in the delay differential
/// inequality, for `x < b`:
/// `alpha (alpha - 12) / (4 (x-b)^4) - c (1 - e^{-cs}) alpha/(x-b)^2 + c alpha/(x-b)^2`.
pub fn supersolution_residual(alpha: f64, b: f64, c: f64, s: f64, x: f64) -> Result<f64> {
    if x >= b {
        return Err(Error::Domain { what: "x (must be < b)", value: x });
    }
    let d2 = (x - b) * (x - b);
    let xi = alpha / d2;
    Ok(alpha * (alpha - 12.0) / (4.0 * d2 * d2) - c * (1.0 - (-c * s).exp()) * xi + c * xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound1Report {
    pub alpha: f64,
    /// `max phi(s, x) (x - b)^2` over `s <= t_max`, `x <= b - dx`.
    pub max_scaled: f64,
    /// Same maximum restricted to `x <= b / 2`.
    pub max_scaled_half: f64,
    pub argmax_s: f64,
    pub argmax_x: f64,
    pub holds: bool,
}

/// Checks `phi(s, x) <= alpha / (x - b)^2` on the stored solution.
pub fn verify_bound1(solution: &PfdeSolution, alpha: f64, b: f64) -> Bound1Report {
    let g = solution.grid();
    let mut report = Bound1Report {
        alpha,
        max_scaled: 0.0,
        max_scaled_half: 0.0,
        argmax_s: 0.0,
        argmax_x: g.x_min(),
        holds: true,
    };
    let x_cut = b - g.dx() * (1.0 - 1e-9);
    for (k, f) in solution.phi.iter().enumerate() {
        for (i, &p) in f.values.iter().enumerate() {
            let x = g.point(i);
            if x > x_cut {
                break;
            }
            let scaled = p * (x - b) * (x - b);
            if scaled > report.max_scaled {
                report.max_scaled = scaled;
                report.argmax_s = solution.times[k];
                report.argmax_x = x;
            }
            if x <= b / 2.0 {
                report.max_scaled_half = report.max_scaled_half.max(scaled);
            }
        }
    }
    report.holds = report.max_scaled <= alpha;
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub t: f64,
    pub k: f64,
    /// `max phi(s, x) / [(1/t) exp(-(b - x)^2 / (20 t))]` over `s <= t`, `x < b - sqrt(t)`.
    pub k_star: f64,
    pub holds: bool,
    /// Ratio profile at `s = t` over the tested sites, for trend checks.
    pub profile_x: Vec<f64>,
    pub profile_ratio: Vec<f64>,
}

/// Envelope `phi(s, x) <= (K/t) exp(-(b - x)^2 / (20 t))` for `x < b - sqrt(t)`.
pub fn verify_envelope(solution: &PfdeSolution, b: f64, t: f64, k: f64) -> Result<EnvelopeReport> {
    if !(t > 0.0) {
        return Err(Error::Domain { what: "t", value: t });
    }
    let g = solution.grid();
    let x_cut = b - t.sqrt();
    let envelope = |x: f64| (-(b - x) * (b - x) / (20.0 * t)).exp() / t;
    let last = ((t / solution.dt()).round() as usize).min(solution.phi.len() - 1);
    let mut k_star: f64 = 0.0;
    for f in &solution.phi[..=last] {
        for (i, &p) in f.values.iter().enumerate() {
            let x = g.point(i);
            if x >= x_cut {
                break;
            }
            k_star = k_star.max(p / envelope(x));
        }
    }
    let mut profile_x = Vec::new();
    let mut profile_ratio = Vec::new();
    for (i, &p) in solution.phi[last].values.iter().enumerate() {
        let x = g.point(i);
        if x >= x_cut {
            break;
        }
        profile_x.push(x);
        profile_ratio.push(p / envelope(x));
    }
    Ok(EnvelopeReport {
        t,
        k,
        k_star,
        holds: k_star <= k,
        profile_x,
        profile_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::new(-15.0, 15.0, 0.1).unwrap()
    }

    fn cfg(lambda: f64, b: f64, t_max: f64) -> PfdeConfig {
        PfdeConfig::new(lambda, b, 1.0, grid(), 0.004, t_max).unwrap()
    }

    #[test]
    fn psi_support_and_maximum() {
        assert_eq!(psi_b(2.0, 3.0), 0.0);
        assert_eq!(psi_b(3.0, 3.0), 0.0);
        assert!((psi_b(5.0, 3.0) - 4.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((psi_b(5.0, 3.0) - 0.541_341_1).abs() < 1e-7);
        // maximum over a fine scan sits at y = 2
        let best = (1..40_000)
            .map(|k| k as f64 * 1e-3)
            .fold((0.0, 0.0), |acc, y| {
                let v = psi_b(y, 0.0);
                if v > acc.1 { (y, v) } else { acc }
            });
        assert!((best.0 - 2.0).abs() < 2e-3);
        // C^1 at zero: difference quotients vanish from both sides
        let h = 1e-6;
        assert!((psi_b(h, 0.0) / h).abs() < 1e-5);
        assert_eq!(psi_b(-h, 0.0), 0.0);
    }

    #[test]
    fn config_violations() {
        let bad = PfdeConfig {
            lambda: -1.0,
            b: 14.5,
            c: 1.0,
            grid: grid(),
            dt: 0.01,
            t_max: 1.0,
            psi_shape: PsiShape::QuadraticExponential,
        };
        let v = bad.violations();
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn zero_forcing_stays_zero() {
        for sol in [
            solve_two_component(&cfg(0.0, 5.0, 0.5)).unwrap(),
            solve_memory_quadrature(&cfg(0.0, 5.0, 0.5)).unwrap(),
        ] {
            assert!(sol.phi.iter().all(|f| f.values.iter().all(|&x| x == 0.0)));
            assert!(sol.varphi.iter().all(|f| f.values.iter().all(|&x| x == 0.0)));
        }
    }

    #[test]
    fn first_step_is_pure_forcing() {
        let c = PfdeConfig::new(1.0, 5.0, 1.0, grid(), 0.004, 0.004).unwrap();
        let sol = solve_two_component(&c).unwrap();
        for (i, x) in c.grid.points().enumerate() {
            assert!((sol.phi[1].values[i] - 0.004 * psi_b(x, 5.0)).abs() < 1e-18);
            assert_eq!(sol.varphi[1].values[i], 0.0);
        }
    }

    #[test]
    fn nonlinear_solution_sits_between_zero_and_linear() {
        let c = cfg(10.0, 5.0, 1.0);
        let sol = solve_two_component(&c).unwrap();
        let lin = solve_linear(&c).unwrap();
        assert!(sol.min_value() >= -1e-12);
        for (a, b) in sol.phi.iter().zip(&lin.phi) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(*x <= *y + 1e-12);
            }
        }
    }

    #[test]
    fn memory_never_exceeds_running_max() {
        let sol = solve_memory_quadrature(&cfg(10.0, 5.0, 1.0)).unwrap();
        let n = sol.grid().len();
        let mut running = vec![0.0f64; n];
        for (p, m) in sol.phi.iter().zip(&sol.varphi) {
            for i in 0..n {
                assert!(m.values[i] <= running[i].max(p.values[i]) + 1e-15);
                running[i] = running[i].max(p.values[i]);
            }
        }
    }

    #[test]
    fn formulations_agree_at_fine_step() {
        for lambda in [1.0, 10.0, 100.0] {
            let c = PfdeConfig::new(lambda, 5.0, 1.0, grid(), 0.001, 1.0).unwrap();
            let a = solve_two_component(&c).unwrap();
            let b = solve_memory_quadrature(&c).unwrap();
            let abs = a.varphi.iter().zip(&b.varphi).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max);
            assert!(abs <= 1e-3 * lambda, "lambda {lambda}: {abs}");
            assert!(a.relative_sup_difference(&b) <= 1e-3);
        }
    }

    #[test]
    fn monotone_in_lambda() {
        let ladder: Vec<_> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&l| solve_two_component(&cfg(l, 5.0, 1.0)).unwrap())
            .collect();
        for w in ladder.windows(2) {
            for (a, b) in w[0].phi.iter().zip(&w[1].phi) {
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert!(*x <= *y + 1e-9);
                }
            }
        }
    }

    #[test]
    fn residual_examples() {
        assert_eq!(supersolution_residual(12.0, 5.0, 1.0, 0.0, 4.0).unwrap(), 12.0);
        let late = supersolution_residual(12.0, 5.0, 1.0, 30.0, 4.0).unwrap();
        assert!(late > 0.0 && late < 1e-11);
        assert!(supersolution_residual(4.0, 5.0, 1.0, 20.0, -5.0).unwrap() < 0.0);
        assert!(supersolution_residual(12.0, 5.0, 1.0, 0.0, 5.0).is_err());
    }

    #[test]
    fn residual_matches_finite_difference_oracle() {
        // Evaluate the inequality's left side directly: d_s xi = 0, the
        // Laplacian by central differences, the memory integral by Simpson.
        let (alpha, b, c) = (7.0, 2.0, 1.3);
        let xi = |x: f64| alpha / ((x - b) * (x - b));
        for &(s, x) in &[(0.0, 1.0), (0.4, -0.5), (2.0, 0.2), (5.0, -3.0)] {
            let h = 1e-3;
            let lap = (xi(x - h) - 2.0 * xi(x) + xi(x + h)) / (h * h);
            let n = 2000;
            let step = s / n as f64;
            let mut integral = 0.0;
            if s > 0.0 {
                for k in 0..=n {
                    let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                    integral += w * (c * k as f64 * step).exp() * xi(x);
                }
                integral *= step / 3.0;
            }
            let memory = c * (-c * s).exp() * integral;
            let oracle = -0.5 * lap + 0.25 * xi(x) * xi(x) - c * (memory - xi(x));
            let r = supersolution_residual(alpha, b, c, s, x).unwrap();
            assert!((r - oracle).abs() < 1e-4 * oracle.abs().max(1.0), "s={s} x={x}: {r} vs {oracle}");
        }
    }

    #[test]
    fn bound1_checks() {
        let zero = solve_two_component(&cfg(0.0, 5.0, 1.0)).unwrap();
        assert_eq!(verify_bound1(&zero, 0.0, 5.0).max_scaled, 0.0);
        let one = solve_two_component(&cfg(1.0, 5.0, 1.0)).unwrap();
        let ten = solve_two_component(&cfg(10.0, 5.0, 1.0)).unwrap();
        let r1 = verify_bound1(&one, 12.0, 5.0);
        let r10 = verify_bound1(&ten, 12.0, 5.0);
        assert!(r1.holds && r10.holds);
        assert!(r10.max_scaled >= r1.max_scaled);
        assert!(r1.max_scaled_half <= r1.max_scaled);
    }

    #[test]
    fn envelope_checks() {
        let zero = solve_two_component(&cfg(0.0, 6.0, 1.0)).unwrap();
        assert_eq!(verify_envelope(&zero, 6.0, 1.0, 1.0).unwrap().k_star, 0.0);
        let sol = solve_two_component(&cfg(1.0, 6.0, 1.0)).unwrap();
        let rep = verify_envelope(&sol, 6.0, 1.0, 1e3).unwrap();
        assert!(rep.k_star > 0.0 && rep.k_star < 1e3);
        assert!(rep.holds);
    }

    #[test]
    fn interpolation_hits_nodes() {
        let sol = solve_two_component(&cfg(10.0, 5.0, 0.2)).unwrap();
        let g = sol.grid();
        let x = g.point(200);
        assert_eq!(sol.phi_interp(0.1, x).unwrap(), sol.phi[25].values[200]);
        assert!(sol.phi_interp(0.1, 20.0).is_none());
        let mid = sol.phi_interp(0.1, x + g.dx() / 2.0).unwrap();
        let expect = 0.5 * (sol.phi[25].values[200] + sol.phi[25].values[201]);
        assert!((mid - expect).abs() < 1e-15);
    }
}
