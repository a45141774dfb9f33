//! Spectral synthesis of spatially colored, temporally white Gaussian noise
//! increments on a periodic grid.
//!
//! A field is drawn as `f = F⁻¹[a_k · F[ε]] / √N` with ε white on the grid,
//! so the grid covariance is `Σ_k a_k² e^{2πik·(x−y)/L}`. For Riesz kernels
//! the nonzero modes carry `c_R |ξ_k|^{α−d} / L^d` (the continuum spectral
//! density at ξ_k = k/L) and the zero mode carries the cell average of the
//! kernel over the fundamental domain, which the power law leaves
//! undetermined. Modes beyond the Nyquist band are dropped, which mollifies
//! the r → 0 singularity at the grid scale.

use crate::error::{LabError, Result};
use crate::grid::GridSpec;
use crate::kernels::{kernel_eval, riesz_constant, KernelKind, KernelSpec};
use crate::quad::gauss_kronrod;
use crate::rng::RngStream;
use crate::spectral::{circular_autocorrelation, GridFft};
use rustfft::num_complex::Complex64;
use std::f64::consts::FRAC_PI_4;

/// One noise increment ΔW on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    pub dt: f64,
    pub stream: RngStream,
    pub values: Vec<f64>,
    /// Largest |imaginary part| left by the inverse transform, relative to
    /// the largest real part, before it was discarded.
    pub imag_residue: f64,
}

/// Average of |r|^{-α} over the fundamental cell [-L/2, L/2]^d.
pub fn riesz_cell_mean(alpha: f64, l: f64, dim: usize) -> Result<f64> {
    match dim {
        1 => Ok((0.5 * l).powf(-alpha) / (1.0 - alpha)),
        2 => {
            // eight triangles, polar coordinates: r ≤ L / (2 cos θ), θ ∈ [0, π/4]
            let q = gauss_kronrod(
                |theta| (0.5 * l / theta.cos()).powf(2.0 - alpha),
                0.0,
                FRAC_PI_4,
                1e-15,
                1e-13,
            )?;
            Ok(8.0 * q.value / ((2.0 - alpha) * l * l))
        }
        _ => Err(LabError::Domain(format!("cell mean only implemented for d <= 2, got {dim}"))),
    }
}

/// Per-mode variances a_k² per unit time, indexed like the grid's DFT.
pub fn spectral_variances(grid: &GridSpec, kspec: &KernelSpec) -> Result<Vec<f64>> {
    grid.validate()?;
    kspec.validate()?;
    if kspec.dim != grid.dim {
        return Err(LabError::Input(format!(
            "kernel dimension {} does not match grid dimension {}",
            kspec.dim, grid.dim
        )));
    }
    let volume = grid.l.powi(grid.dim as i32);
    let d = grid.dim as f64;
    let mut var = vec![0.0; grid.len()];
    match kspec.kind {
        KernelKind::Riesz | KernelKind::RieszPlusConstant => {
            let alpha = kspec.alpha;
            if alpha >= d {
                return Err(LabError::Spectral(format!(
                    "Riesz exponent {alpha} has no spectral density in d = {}",
                    grid.dim
                )));
            }
            let c = riesz_constant(alpha, grid.dim)?;
            for (idx, v) in var.iter_mut().enumerate().skip(1) {
                let xi = grid.wavenumber_sq(idx).sqrt();
                *v = kspec.amplitude * c * xi.powf(alpha - d) / volume;
            }
            let mut dc = riesz_cell_mean(alpha, grid.l, grid.dim)?;
            if kspec.kind == KernelKind::RieszPlusConstant {
                dc += 1.0;
            }
            var[0] = kspec.amplitude * dc;
        }
        KernelKind::BoundedConstant => var[0] = kspec.amplitude,
        KernelKind::White => var.iter_mut().for_each(|v| *v = kspec.amplitude / volume),
    }
    if let Some((i, v)) = var.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(LabError::Spectral(format!("mode {i} has invalid variance {v}")));
    }
    Ok(var)
}

/// Per-mode standard deviations per unit time.
pub fn spectral_amplitudes(grid: &GridSpec, kspec: &KernelSpec) -> Result<Vec<f64>> {
    Ok(spectral_variances(grid, kspec)?.into_iter().map(f64::sqrt).collect())
}

/// Reusable sampler holding the FFT plans and mode amplitudes.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    grid: GridSpec,
    kernel: KernelSpec,
    amplitudes: Vec<f64>,
    fft: GridFft,
}

impl NoiseSampler {
    pub fn new(grid: &GridSpec, kernel: &KernelSpec) -> Result<Self> {
        Ok(NoiseSampler {
            grid: *grid,
            kernel: *kernel,
            amplitudes: spectral_amplitudes(grid, kernel)?,
            fft: GridFft::new(grid),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Draw the increment over a step of length `dt` for `stream`.
    pub fn sample(&self, dt: f64, stream: RngStream) -> Result<NoiseField> {
        let mut values = vec![0.0; self.grid.len()];
        let imag_residue = self.sample_into(dt, stream, &mut values)?;
        Ok(NoiseField { grid: self.grid, kernel: self.kernel, dt, stream, values, imag_residue })
    }

    /// As [`sample`](Self::sample) but writing into a caller buffer;
    /// returns the relative imaginary residue.
    pub fn sample_into(&self, dt: f64, stream: RngStream, out: &mut [f64]) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(LabError::Domain(format!("noise increment needs dt > 0, got {dt}")));
        }
        let n = self.grid.len();
        assert_eq!(out.len(), n);
        stream.fill_normal(out);
        let mut buf: Vec<Complex64> = out.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        let scale = (dt / n as f64).sqrt();
        for (z, a) in buf.iter_mut().zip(&self.amplitudes) {
            *z *= a * scale;
        }
        self.fft.inverse(&mut buf);
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        for (o, z) in out.iter_mut().zip(&buf) {
            *o = z.re;
            max_re = max_re.max(z.re.abs());
            max_im = max_im.max(z.im.abs());
        }
        Ok(if max_re > 0.0 { max_im / max_re } else { max_im })
    }
}

/// Convenience wrapper building a sampler for a single draw.
pub fn sample_increment(grid: &GridSpec, kspec: &KernelSpec, dt: f64, stream: RngStream) -> Result<NoiseField> {
    NoiseSampler::new(grid, kspec)?.sample(dt, stream)
}

/// Periodic fractional Gaussian field with spectral density ∝ |ξ|^{−d−2H},
/// zero mean mode and unit variance per point.
pub fn fractional_field(grid: &GridSpec, hurst: f64, stream: RngStream) -> Result<Vec<f64>> {
    grid.validate()?;
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(LabError::Domain(format!("Hurst index must lie in (0, 1), got {hurst}")));
    }
    let n = grid.len();
    let d = grid.dim as f64;
    let mut white = vec![0.0; n];
    stream.fill_normal(&mut white);
    let mut buf: Vec<Complex64> = white.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fft = GridFft::new(grid);
    fft.forward(&mut buf);
    let amp: Vec<f64> = (0..n)
        .map(|i| if i == 0 { 0.0 } else { grid.wavenumber_sq(i).powf(-0.25 * (d + 2.0 * hurst)) })
        .collect();
    let norm = (amp.iter().map(|a| a * a).sum::<f64>()).sqrt();
    for (z, a) in buf.iter_mut().zip(&amp) {
        *z *= a / (norm * (n as f64).sqrt());
    }
    fft.inverse(&mut buf);
    Ok(buf.iter().map(|z| z.re).collect())
}

/// Covariance estimate at one lag.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    /// Lag in grid points along an axis.
    pub lag_index: usize,
    /// Lag in space units.
    pub lag: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// dt · k(lag), or `None` for white noise.
    pub theory: Option<f64>,
}

impl CovarianceEstimate {
    pub fn relative_error(&self) -> Option<f64> {
        self.theory.map(|t| (self.estimate - t) / t)
    }
}

/// Spatially and replica averaged products f(x) f(x + lag) along the grid
/// axes, with the standard error across replicas.
pub fn empirical_covariance(fields: &[NoiseField], lags: &[usize]) -> Result<Vec<CovarianceEstimate>> {
    if fields.len() < 2 {
        return Err(LabError::Input("need at least two fields".into()));
    }
    let first = &fields[0];
    for f in fields.iter().skip(1) {
        if f.grid != first.grid || f.kernel != first.kernel || f.dt != first.dt {
            return Err(LabError::Input("fields do not share grid, kernel and dt".into()));
        }
    }
    let grid = first.grid;
    for &lag in lags {
        if lag == 0 && first.kernel.kind.is_riesz() {
            return Err(LabError::Singularity("lag 0 is excluded for Riesz kernels: k(0) is infinite".into()));
        }
        if lag >= grid.n {
            return Err(LabError::Input(format!("lag {lag} exceeds the grid of {} points", grid.n)));
        }
    }
    let fft = GridFft::new(&grid);
    let per_field: Vec<Vec<f64>> = fields
        .iter()
        .map(|f| {
            let ac = circular_autocorrelation(&fft, &f.values);
            lags.iter()
                .map(|&j| if grid.dim == 1 { ac[j] } else { 0.5 * (ac[j * grid.n] + ac[j]) })
                .collect()
        })
        .collect();
    let m = fields.len() as f64;
    lags.iter()
        .enumerate()
        .map(|(i, &j)| {
            let vals: Vec<f64> = per_field.iter().map(|v| v[i]).collect();
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
            let lag = j as f64 * grid.h();
            let theory = kernel_eval(&first.kernel, lag)?.finite().map(|k| k * first.dt);
            Ok(CovarianceEstimate { lag_index: j, lag, estimate: mean, stderr: (var / m).sqrt(), theory })
        })
        .collect()
}

/// Sum of the per-mode variances at lag vector `lag` (grid units along
/// axis 0): the exact covariance of the synthesized grid field per unit dt.
pub fn synthesized_covariance(grid: &GridSpec, kspec: &KernelSpec, lag: usize) -> Result<f64> {
    let var = spectral_variances(grid, kspec)?;
    let n = grid.n;
    let mut total = 0.0;
    for (idx, v) in var.iter().enumerate() {
        let k0 = if grid.dim == 1 { idx } else { idx / n };
        let phase = 2.0 * std::f64::consts::PI * (k0 * lag % n) as f64 / n as f64;
        total += v * phase.cos();
    }
    Ok(total)
}
