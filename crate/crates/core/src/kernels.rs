//! Closed-form kernel mathematics: the heat kernel and its Fourier
//! multiplier, noise correlation kernels and their spectral densities,
//! Dalang-type integrability arithmetic, Gaussian negative moments, and the
//! classifier mapping (kernel, σ) pairs onto the known uniqueness regimes.
//!
//! Fourier transforms use the convention `f̂(ξ) = ∫ f(x) e^{-2πiξ·x} dx`,
//! so discrete frequencies on a torus of side `L` are `k / L`.

use crate::error::{domain, LabError, Result};
use crate::sigma::SigmaSpec;
use crate::special::gamma;
use std::f64::consts::PI;

/// Noise correlation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// k(r) = amplitude · r^{-α}
    Riesz,
    /// k(r) = amplitude · (r^{-α} + 1)
    RieszPlusConstant,
    /// k(r) = amplitude
    BoundedConstant,
    /// amplitude · δ(r), only in one dimension
    White,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Riesz => "riesz",
            KernelKind::RieszPlusConstant => "riesz-plus-constant",
            KernelKind::BoundedConstant => "bounded-constant",
            KernelKind::White => "white",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            KernelKind::Riesz => 0,
            KernelKind::RieszPlusConstant => 1,
            KernelKind::BoundedConstant => 2,
            KernelKind::White => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => KernelKind::Riesz,
            1 => KernelKind::RieszPlusConstant,
            2 => KernelKind::BoundedConstant,
            3 => KernelKind::White,
            _ => return None,
        })
    }

    pub fn is_riesz(self) -> bool {
        matches!(self, KernelKind::Riesz | KernelKind::RieszPlusConstant)
    }
}

impl std::str::FromStr for KernelKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "riesz" => KernelKind::Riesz,
            "riesz-plus-constant" => KernelKind::RieszPlusConstant,
            "bounded-constant" => KernelKind::BoundedConstant,
            "white" => KernelKind::White,
            other => return Err(LabError::Input(format!("unknown kernel kind '{other}'"))),
        })
    }
}

/// A spatially homogeneous noise correlation kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub alpha: f64,
    pub amplitude: f64,
    pub dim: usize,
}

impl KernelSpec {
    /// Build and validate a kernel.
    pub fn new(kind: KernelKind, alpha: f64, amplitude: f64, dim: usize) -> Result<Self> {
        let k = KernelSpec { kind, alpha, amplitude, dim };
        k.validate()?;
        Ok(k)
    }

    pub fn riesz(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(KernelKind::Riesz, alpha, 1.0, dim)
    }

    pub fn white() -> Self {
        KernelSpec { kind: KernelKind::White, alpha: 0.0, amplitude: 1.0, dim: 1 }
    }

    pub fn canonical(&self) -> String {
        format!(
            "kernel kind={} alpha={:e} amplitude={:e} dim={}",
            self.kind.name(),
            self.alpha,
            self.amplitude,
            self.dim
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return domain("dimension must be positive");
        }
        // zero amplitude is allowed and switches the noise off
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return domain(format!("amplitude must be non-negative, got {}", self.amplitude));
        }
        match self.kind {
            KernelKind::Riesz | KernelKind::RieszPlusConstant => {
                let cap = 2f64.min(self.dim as f64);
                if !(self.alpha > 0.0 && self.alpha < cap) {
                    return domain(format!(
                        "Riesz exponent must lie in (0, {cap}) for d = {}, got {}",
                        self.dim, self.alpha
                    ));
                }
            }
            KernelKind::White => {
                if self.dim != 1 {
                    return domain("white noise kernel is only supported in one dimension");
                }
            }
            KernelKind::BoundedConstant => {}
        }
        Ok(())
    }
}

/// Pointwise covariance value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelValue {
    Finite(f64),
    /// White noise has no pointwise covariance.
    Distributional,
}

impl KernelValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            KernelValue::Finite(v) => Some(v),
            KernelValue::Distributional => None,
        }
    }
}

/// Regime verdict of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ProvenUniqueHolder,
    ProvenUniqueYwBounded,
    ProvenUniqueLipschitz,
    Open,
    NoFunctionSolution,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::ProvenUniqueHolder => "proven-unique-holder",
            Verdict::ProvenUniqueYwBounded => "proven-unique-yw-bounded",
            Verdict::ProvenUniqueLipschitz => "proven-unique-lipschitz",
            Verdict::Open => "open",
            Verdict::NoFunctionSolution => "no-function-solution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegimeVerdict {
    pub verdict: Verdict,
    pub citation: &'static str,
}

impl std::fmt::Display for RegimeVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.verdict.name(), self.citation)
    }
}

/// Heat kernel p_t(x) = (2πt)^{-d/2} exp(-|x|²/(2t)), with d = `x.len()`.
pub fn heat_kernel(t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((2.0 * PI * t).powf(-0.5 * d) * (-r2 / (2.0 * t)).exp())
}

/// One-dimensional heat kernel without the domain check.
#[inline]
pub fn heat_kernel_1d(t: f64, x: f64) -> f64 {
    (2.0 * PI * t).powf(-0.5) * (-x * x / (2.0 * t)).exp()
}

/// Fourier multiplier of the heat semigroup generated by Δ/2:
/// exp(-2π²|ξ|² t).
pub fn semigroup_multiplier(xi: &[f64], t: f64) -> f64 {
    let r2: f64 = xi.iter().map(|v| v * v).sum();
    (-2.0 * PI * PI * r2 * t).exp()
}

/// Pointwise covariance k(r) at separation r ≥ 0.
pub fn kernel_eval(spec: &KernelSpec, r: f64) -> Result<KernelValue> {
    spec.validate()?;
    if r < 0.0 {
        return domain(format!("separation must be non-negative, got {r}"));
    }
    Ok(match spec.kind {
        KernelKind::Riesz | KernelKind::RieszPlusConstant => {
            if r == 0.0 {
                return Err(LabError::Singularity(format!(
                    "{} kernel with alpha = {} has no value at r = 0",
                    spec.kind.name(),
                    spec.alpha
                )));
            }
            let base = r.powf(-spec.alpha);
            let extra = if spec.kind == KernelKind::RieszPlusConstant { 1.0 } else { 0.0 };
            KernelValue::Finite(spec.amplitude * (base + extra))
        }
        KernelKind::BoundedConstant => KernelValue::Finite(spec.amplitude),
        KernelKind::White => KernelValue::Distributional,
    })
}

/// Constant c_R(α, d) = π^{α-d/2} Γ((d-α)/2) / Γ(α/2) in the Fourier
/// transform of the Riesz kernel, ∫|x|^{-α} e^{-2πiξ·x} dx = c_R |ξ|^{α-d}.
pub fn riesz_constant(alpha: f64, d: usize) -> Result<f64> {
    let df = d as f64;
    if !(alpha > 0.0 && alpha < df) {
        return domain(format!("Riesz transform constant needs 0 < alpha < d, got alpha = {alpha}, d = {d}"));
    }
    Ok(PI.powf(alpha - 0.5 * df) * gamma(0.5 * (df - alpha)) / gamma(0.5 * alpha))
}

/// Spectral density c_R(α, d) |ξ|^{α-d} of the Riesz kernel. Returns +∞ at
/// ξ = 0.
pub fn spectral_density(xi: &[f64], alpha: f64, d: usize) -> Result<f64> {
    let c = riesz_constant(alpha, d)?;
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(c * r.powf(alpha - d as f64))
}

/// Finiteness of ∫ μ(dξ) / (1 + |ξ|²)^η for the Riesz spectral measure:
/// true iff α < min(2η, d).
pub fn dalang_condition(alpha: f64, d: usize, eta: f64) -> bool {
    alpha > 0.0 && alpha < (2.0 * eta).min(d as f64)
}

/// E₀|B₁|^{-α} = 2^{-α/2} Γ((d-α)/2) / Γ(d/2) for a standard d-dimensional
/// Brownian motion; by scaling E₀|B_t|^{-α} is this times t^{-α/2}.
pub fn negative_moment_constant(alpha: f64, d: usize) -> Result<f64> {
    let df = d as f64;
    if !(alpha >= 0.0 && alpha < df) {
        return domain(format!("negative moment needs 0 <= alpha < d, got alpha = {alpha}, d = {d}"));
    }
    Ok(2f64.powf(-0.5 * alpha) * gamma(0.5 * (df - alpha)) / gamma(0.5 * df))
}

pub const CITE_HOLDER: &str = "Hölder-σ uniqueness under Riesz-bounded correlations";
pub const CITE_YW_BOUNDED: &str = "Yamada-Watanabe uniqueness under bounded correlations";
pub const CITE_LIPSCHITZ: &str = "Lipschitz uniqueness under Dalang's condition";
pub const CITE_NO_FUNCTION: &str = "no function-valued solutions beyond 2∧d";
pub const CITE_OPEN: &str = "no uniqueness result applies";

/// Map a kernel and a diffusion coefficient to the strongest applicable
/// uniqueness statement.
///
/// Precedence: non-existence for Riesz exponents above 2∧d, then
/// Lipschitz σ (which wins over Hölder when both apply), then the bounded
/// kernel Yamada–Watanabe rule, then the Hölder rule γ > (1+α)/2 for
/// α ∈ (0, 1). Everything else is open.
pub fn classify_regime(kspec: &KernelSpec, sspec: &SigmaSpec) -> RegimeVerdict {
    let cap = 2f64.min(kspec.dim as f64);
    let verdict = |verdict, citation| RegimeVerdict { verdict, citation };
    if kspec.kind.is_riesz() && kspec.alpha > cap {
        return verdict(Verdict::NoFunctionSolution, CITE_NO_FUNCTION);
    }
    let dalang_ok = match kspec.kind {
        KernelKind::Riesz | KernelKind::RieszPlusConstant => kspec.alpha > 0.0 && kspec.alpha < cap,
        KernelKind::BoundedConstant => true,
        KernelKind::White => kspec.dim == 1,
    };
    if sspec.is_lipschitz() && dalang_ok {
        return verdict(Verdict::ProvenUniqueLipschitz, CITE_LIPSCHITZ);
    }
    if kspec.kind == KernelKind::BoundedConstant && sspec.has_yamada_watanabe_modulus() {
        return verdict(Verdict::ProvenUniqueYwBounded, CITE_YW_BOUNDED);
    }
    let g = sspec.gamma();
    if kspec.kind.is_riesz() && kspec.alpha > 0.0 && kspec.alpha < 1.0 && g > 0.5 * (1.0 + kspec.alpha) && g <= 1.0
    {
        return verdict(Verdict::ProvenUniqueHolder, CITE_HOLDER);
    }
    verdict(Verdict::Open, CITE_OPEN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{gauss_kronrod, tanh_sinh, trapezoid};

    #[test]
    fn heat_kernel_at_origin_and_symmetry() {
        for &t in &[0.1, 1.0, 3.7] {
            for d in 1..=3 {
                let zero = vec![0.0; d];
                let v = heat_kernel(t, &zero).unwrap();
                assert!((v - (2.0 * PI * t).powf(-(d as f64) / 2.0)).abs() < 1e-15);
            }
            let x = [0.3, -1.2];
            let nx = [-0.3, 1.2];
            assert_eq!(heat_kernel(t, &x).unwrap(), heat_kernel(t, &nx).unwrap());
        }
        assert!(heat_kernel(0.0, &[1.0]).is_err());
        assert!(heat_kernel(-1.0, &[1.0]).is_err());
    }

    #[test]
    fn heat_kernel_integrates_to_one() {
        for &t in &[0.05, 0.5, 2.0] {
            let half = 10.0 * f64::sqrt(t);
            let m = 4001;
            let dx = 2.0 * half / (m - 1) as f64;
            let s: Vec<f64> = (0..m).map(|i| heat_kernel_1d(t, -half + i as f64 * dx)).collect();
            assert!((trapezoid(&s, dx) - 1.0).abs() < 1e-8);
            // two dimensions: the product rule on the same grid
            let m2 = 801;
            let dx2 = 2.0 * half / (m2 - 1) as f64;
            let mut rows = Vec::with_capacity(m2);
            for i in 0..m2 {
                let x = -half + i as f64 * dx2;
                let row: Vec<f64> = (0..m2)
                    .map(|j| heat_kernel(t, &[x, -half + j as f64 * dx2]).unwrap())
                    .collect();
                rows.push(trapezoid(&row, dx2));
            }
            assert!((trapezoid(&rows, dx2) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn multiplier_identities() {
        assert_eq!(semigroup_multiplier(&[0.0], 5.0), 1.0);
        assert_eq!(semigroup_multiplier(&[3.0, 1.0], 0.0), 1.0);
        for &(t, s) in &[(0.1, 0.2), (0.5, 1.0), (0.01, 0.03)] {
            let xi = [1.5, -0.5];
            let lhs = semigroup_multiplier(&xi, t) * semigroup_multiplier(&xi, s);
            let rhs = semigroup_multiplier(&xi, t + s);
            assert!(((lhs - rhs) / rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn dft_of_sampled_heat_kernel_matches_multiplier() {
        // sample p_t on a periodic grid wide enough that wrap-around is
        // negligible; the scaled DFT approximates the continuum transform
        let t = 0.3;
        let l = 20.0;
        let n = 512;
        let h = l / n as f64;
        let samples: Vec<f64> = (0..n)
            .map(|j| {
                let x = if j < n / 2 { j as f64 * h } else { (j as f64 - n as f64) * h };
                heat_kernel_1d(t, x)
            })
            .collect();
        for k in 0..n / 2 {
            let xi = k as f64 / l;
            let mut re = 0.0;
            for (j, s) in samples.iter().enumerate() {
                re += s * (-2.0 * PI * (k * j) as f64 / n as f64).cos();
            }
            re *= h;
            assert!((re - semigroup_multiplier(&[xi], t)).abs() < 1e-6, "mode {k}");
        }
    }

    #[test]
    fn chapman_kolmogorov_on_grid() {
        let ts = [0.1, 0.5, 1.0];
        for &t in &ts {
            for &s in &ts {
                let half = 20.0 * f64::sqrt(t + s);
                let h = 0.01;
                let m = (2.0 * half / h) as usize + 1;
                let grid: Vec<f64> = (0..m).map(|i| -half + i as f64 * h).collect();
                let ps: Vec<f64> = grid.iter().map(|&y| heat_kernel_1d(s, y)).collect();
                let mut worst = 0.0f64;
                for &x in [-2.0, -0.7, 0.0, 0.4, 1.9].iter() {
                    let conv: Vec<f64> =
                        grid.iter().zip(&ps).map(|(&y, &py)| heat_kernel_1d(t, x - y) * py).collect();
                    let lhs = trapezoid(&conv, h);
                    worst = worst.max((lhs - heat_kernel_1d(t + s, x)).abs());
                }
                assert!(worst < 1e-6, "t = {t}, s = {s}: {worst}");
            }
        }
    }

    #[test]
    fn kernel_values() {
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        assert!((kernel_eval(&k, 4.0).unwrap().finite().unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(kernel_eval(&k, 0.0), Err(LabError::Singularity(_))));
        let b = KernelSpec::new(KernelKind::BoundedConstant, 0.0, 2.0, 1).unwrap();
        assert_eq!(kernel_eval(&b, 7.0).unwrap(), KernelValue::Finite(2.0));
        assert_eq!(kernel_eval(&b, 0.0).unwrap(), KernelValue::Finite(2.0));
        assert_eq!(kernel_eval(&KernelSpec::white(), 1.0).unwrap(), KernelValue::Distributional);
        assert!(KernelSpec::new(KernelKind::RieszPlusConstant, 1.0, 1.0, 1).is_err());
        assert!(KernelSpec::new(KernelKind::White, 0.0, 1.0, 2).is_err());
        assert!(KernelSpec::new(KernelKind::Riesz, 0.5, -1.0, 1).is_err());
        let rp = KernelSpec::new(KernelKind::RieszPlusConstant, 0.5, 3.0, 1).unwrap();
        assert!((kernel_eval(&rp, 4.0).unwrap().finite().unwrap() - 4.5).abs() < 1e-14);
    }

    #[test]
    fn spectral_density_power_law() {
        for &(alpha, d) in &[(0.5, 1usize), (1.3, 2), (0.2, 3)] {
            let a = spectral_density(&[2.0], alpha, d).unwrap();
            let b = spectral_density(&[4.0], alpha, d).unwrap();
            assert!(((b / a).log2() - (alpha - d as f64)).abs() < 1e-12);
        }
        assert_eq!(spectral_density(&[0.0], 0.5, 1).unwrap(), f64::INFINITY);
        assert!(spectral_density(&[1.0], 1.0, 1).is_err());
    }

    #[test]
    fn spectral_density_matches_fourier_transform_of_riesz_kernel() {
        // ∫ |x|^{-1/2} cos(2πξx) dx over [-R, R], with a smooth window
        // removing the truncation ripple; compared mid-band
        let alpha = 0.5;
        let r_max = 200.0;
        let window = |x: f64| {
            let u = x / r_max;
            if u >= 1.0 { 0.0 } else { 0.5 * (1.0 + (PI * u).cos()) }
        };
        for &xi in &[0.5, 1.0, 2.0, 4.0] {
            // split at the cosine zeros so each panel is smooth
            let period = 1.0 / xi;
            let mut total = 0.0;
            let first = tanh_sinh(
                |_, l, _| 2.0 * l.powf(-alpha) * (2.0 * PI * xi * l).cos() * window(l),
                0.0,
                period,
                1e-12,
                12,
            )
            .unwrap()
            .value;
            total += first;
            let mut a = period;
            while a < r_max {
                let b = (a + period).min(r_max);
                total += gauss_kronrod(
                    |x| 2.0 * x.powf(-alpha) * (2.0 * PI * xi * x).cos() * window(x),
                    a,
                    b,
                    1e-13,
                    1e-11,
                )
                .unwrap()
                .value;
                a = b;
            }
            let closed = spectral_density(&[xi], alpha, 1).unwrap();
            assert!(((total - closed) / closed).abs() < 0.02, "xi = {xi}: {total} vs {closed}");
        }
    }

    #[test]
    fn dalang_examples_and_monotonicity() {
        assert!(dalang_condition(0.5, 1, 0.5));
        assert!(!dalang_condition(1.5, 1, 1.0));
        assert!(dalang_condition(1.9, 2, 1.0));
        let alphas: Vec<f64> = (1..40).map(|i| i as f64 * 0.075).collect();
        let etas: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        for &a in &alphas {
            for d in 1..=3usize {
                for w in etas.windows(2) {
                    assert!(!dalang_condition(a, d, w[0]) || dalang_condition(a, d, w[1]));
                }
                for &e in &etas {
                    assert!(!dalang_condition(a, d, e) || dalang_condition(a, d + 1, e));
                }
            }
        }
        for w in alphas.windows(2) {
            for &e in &etas {
                assert!(dalang_condition(w[0], 2, e) || !dalang_condition(w[1], 2, e));
            }
        }
    }

    /// Independent check: ∫|w|^{-α} φ_d(w) dw computed radially with the
    /// surface area of the unit sphere.
    fn negative_moment_by_quadrature(alpha: f64, d: usize) -> f64 {
        let df = d as f64;
        let area = 2.0 * PI.powf(df / 2.0) / crate::special::gamma(df / 2.0);
        let norm = (2.0 * PI).powf(-df / 2.0);
        let inner = tanh_sinh(
            |_, r, _| r.powf(df - 1.0 - alpha) * (-r * r / 2.0).exp(),
            0.0,
            12.0,
            1e-13,
            12,
        )
        .unwrap()
        .value;
        area * norm * inner
    }

    #[test]
    fn negative_moment_constants() {
        assert!((negative_moment_constant(1e-12, 1).unwrap() - 1.0).abs() < 1e-10);
        assert!((negative_moment_constant(0.5, 1).unwrap() - 1.7200).abs() < 1e-4);
        assert!((negative_moment_constant(1.0, 2).unwrap() - (PI / 2.0).sqrt()).abs() < 1e-13);
        assert!(negative_moment_constant(1.0, 1).is_err());
        for d in 1..=3usize {
            for &a in &[0.25, 0.5, 0.9 * (d as f64).min(2.0)] {
                let closed = negative_moment_constant(a, d).unwrap();
                let quad = negative_moment_by_quadrature(a, d);
                assert!(((closed - quad) / quad).abs() <= 1e-6, "d = {d}, alpha = {a}");
            }
        }
    }

    #[test]
    fn negative_moment_one_dimensional_direct() {
        // direct 1-D quadrature of ∫ |w|^{-1/2} (2π)^{-1/2} e^{-w²/2} dw
        let v = 2.0
            * tanh_sinh(
                |_, w, _| w.powf(-0.5) * (2.0 * PI).powf(-0.5) * (-w * w / 2.0).exp(),
                0.0,
                14.0,
                1e-13,
                12,
            )
            .unwrap()
            .value;
        assert!((v - negative_moment_constant(0.5, 1).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn regime_examples() {
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let v = classify_regime(&k, &SigmaSpec::HolderPower { scale: 1.0, gamma: 0.8 });
        assert_eq!(v.verdict, Verdict::ProvenUniqueHolder);
        let v = classify_regime(&k, &SigmaSpec::HolderPower { scale: 1.0, gamma: 0.7 });
        assert_eq!(v.verdict, Verdict::Open);
        let b = KernelSpec::new(KernelKind::BoundedConstant, 0.0, 1.0, 1).unwrap();
        let v = classify_regime(&b, &SigmaSpec::Viot { scale: 1.0 });
        assert_eq!(v.verdict, Verdict::ProvenUniqueYwBounded);
        let v = classify_regime(&k, &SigmaSpec::LipschitzLinear { scale: 1.0 });
        assert_eq!(v.verdict, Verdict::ProvenUniqueLipschitz);
        let wide = KernelSpec { kind: KernelKind::Riesz, alpha: 2.5, amplitude: 1.0, dim: 3 };
        assert_eq!(classify_regime(&wide, &SigmaSpec::LipschitzLinear { scale: 1.0 }).verdict, Verdict::NoFunctionSolution);
        assert!(!v.citation.is_empty());
    }
}
