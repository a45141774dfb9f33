//! Thin FFT layer over `rustfft` for one- and two-dimensional periodic
//! grids. Transforms are unnormalized in both directions.

use crate::grid::GridSpec;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone)]
pub struct GridFft {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFft").field("n", &self.n).field("dim", &self.dim).finish()
    }
}

impl GridFft {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        GridFft {
            n: grid.n,
            dim: grid.dim,
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&self.forward, data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(&self.inverse, data);
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n.pow(self.dim as u32));
        // rows
        plan.process(data);
        if self.dim == 2 {
            let n = self.n;
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                plan.process(&mut col);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
    }
}

/// Circular autocorrelation Σ_x f(x) f(x + j) / N for every lag j, using
/// one forward and one inverse transform.
pub fn circular_autocorrelation(fft: &GridFft, values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    fft.inverse(&mut buf);
    let scale = 1.0 / (n as f64 * n as f64);
    buf.iter().map(|z| z.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_1d_and_2d() {
        for dim in 1..=2 {
            let g = GridSpec::new(dim, 16, 1.0, 1.0).unwrap();
            let fft = GridFft::new(&g);
            let orig: Vec<Complex64> =
                (0..g.len()).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos())).collect();
            let mut buf = orig.clone();
            fft.forward(&mut buf);
            fft.inverse(&mut buf);
            for (a, b) in buf.iter().zip(&orig) {
                assert!((a / g.len() as f64 - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let g = GridSpec::new(1, 32, 1.0, 1.0).unwrap();
        let fft = GridFft::new(&g);
        let v: Vec<f64> = (0..32).map(|i| ((i * i) as f64 * 0.1).sin()).collect();
        let ac = circular_autocorrelation(&fft, &v);
        for j in 0..32 {
            let direct: f64 = (0..32).map(|x| v[x] * v[(x + j) % 32]).sum::<f64>() / 32.0;
            assert!((ac[j] - direct).abs() < 1e-13);
        }
    }
}
