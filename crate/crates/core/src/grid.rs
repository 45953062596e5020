//! Uniform one-dimensional lattices, fields on them, edge functionals and the
//! Gaussian utilities shared by every solver.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Returned by [`right_edge`] when no site is positive.
pub const MINUS_INF: f64 = f64::NEG_INFINITY;
/// Returned by [`left_edge`] when every site equals one.
pub const PLUS_INF: f64 = f64::INFINITY;
/// Values within this distance of 0 (resp. 1) count as 0 (resp. 1).
pub const DEFAULT_EDGE_TOL: f64 = 1e-12;

/// Relative slack used when deciding whether a coordinate sits on the lattice.
const LATTICE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    dx: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::Precondition(format!(
                "grid needs x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Domain { what: "dx", value: dx });
        }
        let n = ((x_max - x_min) / dx).round() as usize + 1;
        if n < 3 {
            return Err(Error::Precondition(format!(
                "grid needs at least 3 points, got {n}"
            )));
        }
        Ok(Self { x_min, x_max, dx, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.point(i))
    }

    /// Index of the site at `x`, if `x` lies on the lattice.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let r = (x - self.x_min) / self.dx;
        let i = r.round();
        if (r - i).abs() > LATTICE_SLACK || i < 0.0 || i >= self.n as f64 {
            return None;
        }
        Some(i as usize)
    }

    /// Fractional index of `x`; used for interpolation.
    pub fn fractional_index(&self, x: f64) -> f64 {
        (x - self.x_min) / self.dx
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.point(self.n - 1)
    }
}

/// One snapshot of `u` or `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(grid: Grid1D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid1D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.points().map(f).collect(),
        }
    }

    /// `1` on `x <= edge`, `0` beyond, sampled at lattice points.
    pub fn step_down(grid: Grid1D, edge: f64) -> Self {
        let slack = grid.dx() * LATTICE_SLACK;
        Self::from_fn(grid, |x| if x <= edge + slack { 1.0 } else { 0.0 })
    }

    pub fn at(&self, x: f64) -> Option<f64> {
        self.grid.index_of(x).map(|i| self.values[i])
    }

    pub fn in_unit_range(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn max_abs_diff(&self, other: &LatticeField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub left_edge: f64,
    pub right_edge: f64,
}

impl EdgeReport {
    pub fn of(f: &LatticeField, tol: f64) -> Self {
        Self {
            left_edge: left_edge_with_tol(f, tol),
            right_edge: right_edge_with_tol(f, tol),
        }
    }
}

/// Smallest lattice point where `f < 1`, or [`PLUS_INF`].
pub fn left_edge(f: &LatticeField) -> f64 {
    left_edge_with_tol(f, DEFAULT_EDGE_TOL)
}

pub fn left_edge_with_tol(f: &LatticeField, tol: f64) -> f64 {
    f.values
        .iter()
        .position(|&v| v < 1.0 - tol)
        .map_or(PLUS_INF, |i| f.grid.point(i))
}

/// Largest lattice point where `f > 0`, or [`MINUS_INF`].
pub fn right_edge(f: &LatticeField) -> f64 {
    right_edge_with_tol(f, DEFAULT_EDGE_TOL)
}

pub fn right_edge_with_tol(f: &LatticeField, tol: f64) -> f64 {
    f.values
        .iter()
        .rposition(|&v| v > tol)
        .map_or(MINUS_INF, |i| f.grid.point(i))
}

/// Gaussian transition density of Brownian motion, `G(t, x, y)`.
pub fn heat_kernel(t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain { what: "t", value: t });
    }
    let d = x - y;
    Ok((-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt())
}

/// Standard normal CDF through `erfc`; relative error well below 1e-10.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Heat semigroup applied to `1_{x <= 0}`, i.e. `Phi(-x / sqrt(t))`.
pub fn heat_semigroup_heaviside(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain { what: "t", value: t });
    }
    Ok(std_normal_cdf(-x / t.sqrt()))
}

/// Upper bound `exp(-x^2/2) / (x sqrt(2 pi))` on the standard normal tail.
pub fn gaussian_tail_bound(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain { what: "x", value: x });
    }
    Ok((-0.5 * x * x).exp() / (x * (2.0 * PI).sqrt()))
}

/// Writes one snapshot as `t,x,u,v` rows with 17 significant digits.
pub fn write_snapshot_csv<W: Write>(
    mut w: W,
    t: f64,
    u: &LatticeField,
    v: &LatticeField,
) -> io::Result<()> {
    writeln!(w, "t,x,u,v")?;
    for (i, x) in u.grid.points().enumerate() {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(t),
            fmt_f64(x),
            fmt_f64(u.values[i]),
            fmt_f64(v.values[i])
        )?;
    }
    Ok(())
}

/// Fixed 17-significant-digit rendering used in every CSV we emit.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x > 0.0 {
        "inf".to_owned()
    } else if x < 0.0 {
        "-inf".to_owned()
    } else {
        "nan".to_owned()
    }
}
