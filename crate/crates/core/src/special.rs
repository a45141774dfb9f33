//! Special functions used by the closed-form kernel constants.

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Natural log of |Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Beta function B(a, b) for positive arguments.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_reference_values() {
        assert!(rel(gamma(0.5), PI.sqrt()) < 1e-13);
        assert!(rel(gamma(1.0), 1.0) < 1e-13);
        assert!(rel(gamma(5.0), 24.0) < 1e-13);
        assert!(rel(gamma(0.25), 3.625_609_908_221_908_3) < 1e-13);
        assert!(rel(gamma(1.5), 0.886_226_925_452_758) < 1e-13);
        assert!(rel(gamma(0.1), 9.513_507_698_668_732) < 1e-12);
        assert!(rel(gamma(10.3), 716_430.689_249_5) < 1e-9);
    }

    #[test]
    fn gamma_recurrence() {
        for i in 1..200 {
            let x = 0.01 + 0.037 * i as f64;
            assert!(rel(gamma(x + 1.0), x * gamma(x)) < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.3, 0.5, 1.7, 4.2, 9.9] {
            assert!((ln_gamma(x) - gamma(x).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn erfc_reference_values() {
        assert!((erfc(0.0) - 1.0).abs() < 1e-15);
        assert!(rel(erfc(1.0), 0.157_299_207_050_285_13) < 1e-14);
        assert!(rel(erfc(3.0), 2.209_049_699_858_544e-5) < 1e-13);
        assert!(rel(erfc(6.0), 2.151_973_671_249_891_3e-17) < 1e-12);
        assert!(rel(erfc(-0.3), 1.328_626_759_459_127_4) < 1e-14);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
    }
}
