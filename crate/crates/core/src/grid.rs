//! Periodic spatial grid and time-stepping parameters.

use crate::error::{domain, Result};

/// A periodic grid of `n` points per axis on the torus `[0, l)^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub l: f64,
    pub dt: f64,
    pub t_end: f64,
    pub t_min: f64,
}

impl GridSpec {
    /// Grid with the default step dt = h²/2 and burn-in t_min = t_end/10.
    pub fn new(dim: usize, n: usize, l: f64, t_end: f64) -> Result<Self> {
        let h = l / n as f64;
        let g = GridSpec { dim, n, l, dt: 0.5 * h * h, t_end, t_min: 0.1 * t_end };
        g.validate()?;
        Ok(g)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_t_min(mut self, t_min: f64) -> Result<Self> {
        self.t_min = t_min;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return domain(format!("grid dimension must be 1 or 2, got {}", self.dim));
        }
        if self.n < 2 || !self.n.is_power_of_two() {
            return domain(format!("points per axis must be a power of two, got {}", self.n));
        }
        if !(self.l > 0.0) || !self.l.is_finite() {
            return domain(format!("domain length must be positive, got {}", self.l));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return domain(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_min >= 0.0 && self.t_min < self.t_end) {
            return domain(format!("need 0 <= t_min < t_end, got t_min = {}, t_end = {}", self.t_min, self.t_end));
        }
        Ok(())
    }

    /// Grid spacing.
    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Total number of grid points, n^dim.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume h^dim.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Number of whole steps up to `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Coordinates of flat index `idx` (row-major, last axis fastest).
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let h = self.h();
        if self.dim == 1 {
            [idx as f64 * h, 0.0]
        } else {
            [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h]
        }
    }

    /// Signed integer frequency of DFT index `k` on an axis of `n` points.
    pub fn frequency_index(&self, k: usize) -> i64 {
        if k <= self.n / 2 { k as i64 } else { k as i64 - self.n as i64 }
    }

    /// |ξ|² for the flat mode index, with ξ = k/L.
    pub fn wavenumber_sq(&self, idx: usize) -> f64 {
        let scale = 1.0 / self.l;
        if self.dim == 1 {
            let k = self.frequency_index(idx) as f64 * scale;
            k * k
        } else {
            let k0 = self.frequency_index(idx / self.n) as f64 * scale;
            let k1 = self.frequency_index(idx % self.n) as f64 * scale;
            k0 * k0 + k1 * k1
        }
    }

    /// Whether `t` is a whole multiple of `dt` (to 1e-9 relative).
    pub fn on_step_lattice(&self, t: f64) -> bool {
        let m = t / self.dt;
        (m - m.round()).abs() <= 1e-9 * m.abs().max(1.0)
    }

    pub fn canonical(&self) -> String {
        format!(
            "grid dim={} n={} l={:e} dt={:e} t_end={:e} t_min={:e}",
            self.dim, self.n, self.l, self.dt, self.t_end, self.t_min
        )
    }
}
