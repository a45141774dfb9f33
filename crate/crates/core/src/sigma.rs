//! Diffusion coefficients σ(u) multiplying the noise.

use crate::error::{domain, LabError, Result};

/// Family of diffusion coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    /// σ(u) = scale · u.
    LipschitzLinear { scale: f64 },
    /// σ(u) = scale · |u|^γ.
    HolderPower { scale: f64, gamma: f64 },
    /// σ(u) = scale · √(u₊).
    SqrtPlus { scale: f64 },
    /// σ(u) = scale · √((u(1−u))₊).
    Viot { scale: f64 },
    /// σ(u) = value for every u.
    Constant { value: f64 },
    /// Piecewise-linear interpolation of tabulated values. `gamma` is the
    /// declared Hölder index; `lipschitz` marks a table meant as Lipschitz.
    Table { xs: Vec<f64>, ys: Vec<f64>, gamma: f64, lipschitz: bool },
}

impl SigmaSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SigmaSpec::LipschitzLinear { scale }
            | SigmaSpec::SqrtPlus { scale }
            | SigmaSpec::Viot { scale } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return domain(format!("sigma scale must be positive, got {scale}"));
                }
            }
            SigmaSpec::HolderPower { scale, gamma } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return domain(format!("sigma scale must be positive, got {scale}"));
                }
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return domain(format!("Hölder index must lie in (0, 1], got {gamma}"));
                }
            }
            SigmaSpec::Constant { value } => {
                if !value.is_finite() {
                    return domain("constant sigma must be finite");
                }
            }
            SigmaSpec::Table { xs, ys, gamma, .. } => {
                if xs.len() < 2 || xs.len() != ys.len() {
                    return domain("sigma table needs at least two (x, y) pairs of equal length");
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return domain("sigma table abscissae must be strictly increasing");
                }
                if ys.iter().any(|y| !y.is_finite()) {
                    return domain("sigma table values must be finite");
                }
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return domain(format!("Hölder index must lie in (0, 1], got {gamma}"));
                }
            }
        }
        Ok(())
    }

    /// Evaluate σ(u).
    pub fn eval(&self, u: f64) -> Result<f64> {
        Ok(match self {
            SigmaSpec::LipschitzLinear { scale } => scale * u,
            SigmaSpec::HolderPower { scale, gamma } => scale * u.abs().powf(*gamma),
            SigmaSpec::SqrtPlus { scale } => scale * u.max(0.0).sqrt(),
            SigmaSpec::Viot { scale } => scale * (u * (1.0 - u)).max(0.0).sqrt(),
            SigmaSpec::Constant { value } => *value,
            SigmaSpec::Table { xs, ys, .. } => {
                let (lo, hi) = (xs[0], xs[xs.len() - 1]);
                if !(u >= lo && u <= hi) {
                    return Err(LabError::Extrapolation(format!("u = {u} outside [{lo}, {hi}]")));
                }
                let i = match xs.partition_point(|&x| x <= u) {
                    0 => 0,
                    k if k >= xs.len() => xs.len() - 2,
                    k => k - 1,
                };
                let w = (u - xs[i]) / (xs[i + 1] - xs[i]);
                ys[i] * (1.0 - w) + ys[i + 1] * w
            }
        })
    }

    /// Hölder index; Lipschitz coefficients report 1.
    pub fn gamma(&self) -> f64 {
        match self {
            SigmaSpec::LipschitzLinear { .. } | SigmaSpec::Constant { .. } => 1.0,
            SigmaSpec::HolderPower { gamma, .. } => *gamma,
            SigmaSpec::SqrtPlus { .. } | SigmaSpec::Viot { .. } => 0.5,
            SigmaSpec::Table { gamma, .. } => *gamma,
        }
    }

    /// Lipschitz flag. A Hölder power with γ = 1 keeps γ = 1 but is not
    /// flagged; the flag marks coefficients declared Lipschitz.
    pub fn is_lipschitz(&self) -> bool {
        match self {
            SigmaSpec::LipschitzLinear { .. } | SigmaSpec::Constant { .. } => true,
            SigmaSpec::Table { lipschitz, .. } => *lipschitz,
            _ => false,
        }
    }

    /// Whether |σ(u) − σ(v)| ≤ ρ(|u − v|) for a modulus with ∫₀₊ ρ⁻² = ∞.
    /// Hölder indices of at least one half qualify (ρ(x) = C x^γ).
    pub fn has_yamada_watanabe_modulus(&self) -> bool {
        self.is_lipschitz() || self.gamma() >= 0.5
    }

    /// Constant c with |σ(u)| ≤ c (1 + |u|).
    pub fn growth_constant(&self) -> f64 {
        match self {
            SigmaSpec::LipschitzLinear { scale } => *scale,
            // |u|^γ ≤ 1 + |u| for γ ∈ (0, 1]
            SigmaSpec::HolderPower { scale, .. } => *scale,
            // √u ≤ 1 + u and √(u(1−u)) ≤ 1/2
            SigmaSpec::SqrtPlus { scale } => *scale,
            SigmaSpec::Viot { scale } => 0.5 * scale,
            SigmaSpec::Constant { value } => value.abs(),
            SigmaSpec::Table { ys, .. } => ys.iter().fold(0.0f64, |m, y| m.max(y.abs())),
        }
    }

    /// Check the growth bound on a lattice of points, returning the worst
    /// ratio |σ(u)| / (c (1 + |u|)).
    pub fn verify_growth(&self, lattice: &[f64]) -> Result<f64> {
        let c = self.growth_constant();
        let mut worst = 0.0f64;
        for &u in lattice {
            let s = match self.eval(u) {
                Ok(v) => v,
                Err(LabError::Extrapolation(_)) => continue,
                Err(e) => return Err(e),
            };
            let bound = c * (1.0 + u.abs());
            if bound > 0.0 {
                worst = worst.max(s.abs() / bound);
            } else if s != 0.0 {
                worst = f64::INFINITY;
            }
        }
        Ok(worst)
    }

    /// Short kind name used in configs and manifests.
    pub fn kind_name(&self) -> &'static str {
        match self {
            SigmaSpec::LipschitzLinear { .. } => "lipschitz-linear",
            SigmaSpec::HolderPower { .. } => "holder-power",
            SigmaSpec::SqrtPlus { .. } => "sqrt-plus",
            SigmaSpec::Viot { .. } => "viot",
            SigmaSpec::Constant { .. } => "constant",
            SigmaSpec::Table { .. } => "table",
        }
    }

    /// Canonical text used in fingerprints.
    pub fn canonical(&self) -> String {
        match self {
            SigmaSpec::LipschitzLinear { scale } => format!("lipschitz-linear scale={scale:e}"),
            SigmaSpec::HolderPower { scale, gamma } => format!("holder-power scale={scale:e} gamma={gamma:e}"),
            SigmaSpec::SqrtPlus { scale } => format!("sqrt-plus scale={scale:e}"),
            SigmaSpec::Viot { scale } => format!("viot scale={scale:e}"),
            SigmaSpec::Constant { value } => format!("constant value={value:e}"),
            SigmaSpec::Table { xs, ys, gamma, lipschitz } => {
                format!("table xs={xs:?} ys={ys:?} gamma={gamma:e} lipschitz={lipschitz}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_values() {
        assert_eq!(SigmaSpec::SqrtPlus { scale: 1.0 }.eval(4.0).unwrap(), 2.0);
        assert_eq!(SigmaSpec::Viot { scale: 1.0 }.eval(0.5).unwrap(), 0.5);
        let h = SigmaSpec::HolderPower { scale: 1.0, gamma: 0.5 };
        assert_eq!(h.eval(-4.0).unwrap(), 2.0);
        assert_eq!(SigmaSpec::SqrtPlus { scale: 1.0 }.eval(-3.0).unwrap(), 0.0);
        assert_eq!(SigmaSpec::Viot { scale: 1.0 }.eval(1.5).unwrap(), 0.0);
    }

    #[test]
    fn table_rejects_extrapolation() {
        let t = SigmaSpec::Table { xs: vec![0.0, 1.0, 2.0], ys: vec![0.0, 1.0, 1.5], gamma: 1.0, lipschitz: true };
        t.validate().unwrap();
        assert!((t.eval(1.5).unwrap() - 1.25).abs() < 1e-15);
        assert_eq!(t.eval(2.0).unwrap(), 1.5);
        assert!(matches!(t.eval(2.5), Err(LabError::Extrapolation(_))));
    }

    #[test]
    fn growth_bound_holds_on_lattice() {
        let lattice: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.05).collect();
        let specs = [
            SigmaSpec::LipschitzLinear { scale: 2.0 },
            SigmaSpec::HolderPower { scale: 1.5, gamma: 0.3 },
            SigmaSpec::SqrtPlus { scale: 1.0 },
            SigmaSpec::Viot { scale: 3.0 },
            SigmaSpec::Constant { value: -0.7 },
        ];
        for s in &specs {
            let worst = s.verify_growth(&lattice).unwrap();
            assert!(worst <= 1.0 + 1e-12, "{} worst ratio {worst}", s.kind_name());
        }
    }

    #[test]
    fn holder_power_modulus() {
        let s = SigmaSpec::HolderPower { scale: 1.0, gamma: 0.7 };
        for i in 0..50 {
            for j in 0..50 {
                let u = -3.0 + 0.13 * i as f64;
                let v = -2.0 + 0.11 * j as f64;
                let lhs = (s.eval(u).unwrap() - s.eval(v).unwrap()).abs();
                assert!(lhs <= (u - v).abs().powf(0.7) + 1e-12);
            }
        }
    }

    #[test]
    fn validation() {
        assert!(SigmaSpec::HolderPower { scale: 1.0, gamma: 1.2 }.validate().is_err());
        assert!(SigmaSpec::SqrtPlus { scale: 0.0 }.validate().is_err());
        assert!(SigmaSpec::Table { xs: vec![1.0, 0.0], ys: vec![0.0, 0.0], gamma: 1.0, lipschitz: false }
            .validate()
            .is_err());
    }
}
