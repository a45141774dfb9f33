//! Yamada–Watanabe test functions: a modulus ρ with ∫₀₊ ρ⁻² = ∞, the
//! sequence aₙ ↓ 0 with ∫_{aₙ}^{aₙ₋₁} ρ⁻² = n, bumps ψₙ supported in
//! (aₙ, aₙ₋₁) with ∫ψₙ = 1 and ψₙ ≤ 2ρ⁻²/n, and the smoothed absolute
//! values φₙ(x) = ∫₀^{|x|}∫₀^y ψₙ.
//!
//! Everything is computed in the logarithmic coordinate s = ln x, where the
//! integrands stay of order one even when aₙ is close to the underflow
//! threshold.

use crate::error::{LabError, Result};
use crate::quad::adaptive_simpson;

const SIMPSON_TOL: f64 = 1e-12;
const CACHE_POINTS: usize = 10_000;

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneTable {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(LabError::Input("table needs at least two (x, y) pairs of equal length".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || ys.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::Input("table must be strictly increasing in x and in y".into()));
        }
        if !(xs[0] > 0.0) || ys[0] <= 0.0 {
            return Err(LabError::Input("table must live on (0, ∞) with positive values".into()));
        }
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            // weighted harmonic mean keeps the interpolant monotone
            let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            slopes[i] = (w1 + w2) / (w1 / secants[i - 1] + w2 / secants[i]);
        }
        Ok(MonotoneTable { xs, ys, slopes })
    }

    pub fn floor(&self) -> f64 {
        self.xs[0]
    }

    pub fn ceiling(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < self.floor() || x > self.ceiling() {
            return Err(LabError::Resolution(format!(
                "ρ table covers [{:e}, {:e}], asked for {x:e}",
                self.floor(),
                self.ceiling()
            )));
        }
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            p => (p - 1).min(self.xs.len() - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[i]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[i + 1]
            + (t3 - t2) * h * self.slopes[i + 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhoKind {
    Sqrt,
    Custom(MonotoneTable),
}

/// The modulus ρ, optionally replaced by ρ + √x.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoSpec {
    pub kind: RhoKind,
    pub augmented: bool,
}

/// Evidence that ∫ ρ⁻² diverges at zero, down to the table floor.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub certified: bool,
    /// ∫ ρ⁻² over successive decades approaching the floor.
    pub decade_integrals: Vec<f64>,
    pub warning: Option<String>,
}

impl RhoSpec {
    pub fn sqrt() -> Self {
        RhoSpec { kind: RhoKind::Sqrt, augmented: false }
    }

    /// Tabulated ρ on [floor, 1]. Without `augmented` the table must already
    /// dominate √x.
    pub fn custom(xs: Vec<f64>, ys: Vec<f64>, augmented: bool) -> Result<Self> {
        let table = MonotoneTable::new(xs, ys)?;
        if table.ceiling() < 1.0 {
            return Err(LabError::Input("ρ table must extend to x = 1".into()));
        }
        let spec = RhoSpec { kind: RhoKind::Custom(table), augmented };
        if !augmented {
            if let RhoKind::Custom(t) = &spec.kind {
                if let Some(i) = (0..t.xs.len()).find(|&i| t.ys[i] < t.xs[i].sqrt()) {
                    return Err(LabError::Construction(format!(
                        "ρ({:e}) = {:e} is below √x; set the augmented flag",
                        t.xs[i], t.ys[i]
                    )));
                }
            }
        }
        Ok(spec)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let base = match &self.kind {
            RhoKind::Sqrt => x.sqrt(),
            RhoKind::Custom(t) => t.eval(x)?,
        };
        Ok(if self.augmented { base + x.sqrt() } else { base })
    }

    /// Smallest x where ρ is known (0 for the closed form).
    pub fn floor(&self) -> f64 {
        match &self.kind {
            RhoKind::Sqrt => 0.0,
            RhoKind::Custom(t) => t.floor(),
        }
    }

    /// x ρ(x)⁻², the integrand of ∫ρ⁻² in the coordinate s = ln x.
    fn log_weight(&self, s: f64) -> Result<f64> {
        let x = s.exp();
        match (&self.kind, self.augmented) {
            (RhoKind::Sqrt, false) => Ok(1.0),
            (RhoKind::Sqrt, true) => Ok(0.25),
            _ => {
                let r = self.eval(x)?;
                Ok(x / (r * r))
            }
        }
    }

    /// ∫_{e^{s0}}^{e^{s1}} ρ⁻²(x) dx.
    fn log_integral(&self, s0: f64, s1: f64) -> Result<f64> {
        let mut err = None;
        let v = adaptive_simpson(
            |s| match self.log_weight(s) {
                Ok(w) => w,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            s0,
            s1,
            SIMPSON_TOL,
        );
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// Analytic for the closed form; for tables, checks that the decade
    /// integrals of ρ⁻² do not shrink over the last three decades above
    /// the floor. This certifies nothing below the floor.
    pub fn divergence_check(&self) -> Result<DivergenceReport> {
        match &self.kind {
            RhoKind::Sqrt => Ok(DivergenceReport { certified: true, decade_integrals: Vec::new(), warning: None }),
            RhoKind::Custom(t) => {
                let top = 0f64.min(t.ceiling().ln());
                let bottom = t.floor().ln();
                let decades = ((top - bottom) / std::f64::consts::LN_10).floor() as usize;
                if decades < 3 {
                    return Err(LabError::Resolution("ρ table spans fewer than three decades".into()));
                }
                let mut ints = Vec::with_capacity(decades);
                for j in 0..decades {
                    let s1 = top - j as f64 * std::f64::consts::LN_10;
                    ints.push(self.log_integral(s1 - std::f64::consts::LN_10, s1)?);
                }
                let tail = &ints[decades - 3..];
                let certified = tail.windows(2).all(|w| w[1] >= 0.95 * w[0]);
                let warning = Some(format!(
                    "divergence of ∫ρ⁻² is only checked down to the table floor {:e}",
                    t.floor()
                ));
                Ok(DivergenceReport { certified, decade_integrals: ints, warning })
            }
        }
    }
}

/// aₙ; closed form e^{−n(n+1)/2} for the plain square root.
pub fn a_sequence(n: usize, rho: &RhoSpec) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    match (&rho.kind, rho.augmented) {
        (RhoKind::Sqrt, false) => Ok((-((n * (n + 1)) as f64) / 2.0).exp()),
        _ => Ok(a_sequence_numeric(n, rho)?[n]),
    }
}

/// a₀, …, aₙ by root-solving ∫_{aₖ}^{aₖ₋₁} ρ⁻² = k with quadrature.
pub fn a_sequence_numeric(n: usize, rho: &RhoSpec) -> Result<Vec<f64>> {
    let mut out = vec![1.0];
    let mut s_prev = 0.0f64;
    let s_floor = if rho.floor() > 0.0 { rho.floor().ln() } else { f64::NEG_INFINITY };
    for k in 1..=n {
        let target = k as f64;
        // bracket: step down until the integral exceeds k
        let mut hi = s_prev;
        let mut lo = s_prev - 1.0;
        loop {
            if lo < s_floor {
                if rho.log_integral(s_floor, s_prev)? < target {
                    return Err(LabError::Resolution(format!(
                        "table floor {:e} reached before ∫ρ⁻² accumulated {k}",
                        rho.floor()
                    )));
                }
                lo = s_floor;
                break;
            }
            if rho.log_integral(lo, s_prev)? >= target {
                break;
            }
            hi = lo;
            lo = s_prev - 2.0 * (s_prev - lo);
        }
        // safeguarded Newton on G(s) = ∫_s^{s_prev} x ρ⁻² ds − k, G' = −weight(s)
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = rho.log_integral(s, s_prev)? - target;
            if g > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let w = rho.log_weight(s)?;
            let mut next = s + g / w;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-15 * s.abs().max(1.0) {
                s = next;
                break;
            }
            s = next;
        }
        out.push(s.exp());
        s_prev = s;
    }
    Ok(out)
}

/// C^∞ step rising from 0 at t ≤ 0 to 1 at t ≥ 1.
fn smooth_step(t: f64) -> f64 {
    let f = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        f(t) / (f(t) + f(1.0 - t))
    }
}

/// One member of the Yamada–Watanabe family.
#[derive(Debug, Clone)]
pub struct YWFamily {
    pub n: usize,
    pub rho: RhoSpec,
    pub a_prev: f64,
    pub a_n: f64,
    /// Normalizer c in ψₙ = c ρ⁻² · bump.
    pub scale: f64,
    /// Width of each transition of the bump in normalized log coordinate.
    pub transition: f64,
    s_lo: f64,
    s_hi: f64,
    nodes: Vec<f64>,
    // cumulative ∫ψ and ∫xψ from aₙ up to each node
    mass: Vec<f64>,
    moment: Vec<f64>,
}

impl YWFamily {
    fn bump(&self, s: f64) -> f64 {
        let u = (s - self.s_lo) / (self.s_hi - self.s_lo);
        smooth_step(u / self.transition) * smooth_step((1.0 - u) / self.transition)
    }

    /// x ψ(x) at x = e^s, the integrand of ∫ψ in log coordinate.
    fn log_density(&self, s: f64) -> f64 {
        if s <= self.s_lo || s >= self.s_hi {
            return 0.0;
        }
        self.scale * self.rho.log_weight(s).unwrap_or(0.0) * self.bump(s)
    }

    pub fn psi(&self, x: f64) -> f64 {
        if !(x > self.a_n && x < self.a_prev) {
            return 0.0;
        }
        self.log_density(x.ln()) / x
    }

    /// (∫₀^x ψ, ∫₀^x zψ) for x ≥ 0.
    fn cumulative(&self, x: f64) -> (f64, f64) {
        if x <= self.a_n {
            return (0.0, 0.0);
        }
        let x = x.min(self.a_prev);
        let s = x.ln();
        let i = self.nodes.partition_point(|&v| v <= s).saturating_sub(1);
        let s0 = self.nodes[i];
        let m = self.mass[i] + adaptive_simpson(|v| self.log_density(v), s0, s, SIMPSON_TOL);
        let q = self.moment[i] + adaptive_simpson(|v| self.log_density(v) * v.exp(), s0, s, SIMPSON_TOL * self.a_prev);
        (m, q)
    }

    pub fn phi(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax <= self.a_n {
            return 0.0;
        }
        // φ(x) = ∫₀^x (x − z) ψ(z) dz
        let (m, q) = self.cumulative(ax);
        (ax * m - q).max(0.0)
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        x.signum() * self.cumulative(x.abs()).0 * if x == 0.0 { 0.0 } else { 1.0 }
    }

    pub fn phi_second(&self, x: f64) -> f64 {
        self.psi(x.abs())
    }

    /// ∫ψₙ over its support from the cache.
    pub fn total_mass(&self) -> f64 {
        self.mass[self.mass.len() - 1]
    }

    /// sup ψₙ n ρ² / 2 on a log-spaced sample of the support.
    pub fn bound_ratio(&self, samples: usize) -> f64 {
        (1..samples)
            .map(|i| {
                let s = self.s_lo + (self.s_hi - self.s_lo) * i as f64 / samples as f64;
                let x = s.exp();
                let r = self.rho.eval(x).unwrap_or(f64::NAN);
                self.psi(x) * self.n as f64 * r * r / 2.0
            })
            .fold(0.0, f64::max)
    }
}

pub fn phi_eval(family: &YWFamily, x: f64) -> f64 {
    family.phi(x)
}

pub fn phi_prime(family: &YWFamily, x: f64) -> f64 {
    family.phi_prime(x)
}

pub fn phi_second(family: &YWFamily, x: f64) -> f64 {
    family.phi_second(x)
}

/// Build ψₙ and φₙ. The bump's transitions are narrowed until the captured
/// share of ∫ρ⁻² reaches one half, which is what ψₙ ≤ 2ρ⁻²/n requires.
pub fn build_family(n: usize, rho: &RhoSpec) -> Result<YWFamily> {
    if n == 0 {
        return Err(LabError::Domain("the family index starts at 1".into()));
    }
    let (a_prev, a_n) = match (&rho.kind, rho.augmented) {
        (RhoKind::Sqrt, false) => (a_sequence(n - 1, rho)?, a_sequence(n, rho)?),
        _ => {
            let a = a_sequence_numeric(n, rho)?;
            (a[n - 1], a[n])
        }
    };
    let mut fam = YWFamily {
        n,
        rho: rho.clone(),
        a_prev,
        a_n,
        scale: 1.0,
        transition: 0.25,
        s_lo: a_n.ln(),
        s_hi: a_prev.ln(),
        nodes: Vec::new(),
        mass: Vec::new(),
        moment: Vec::new(),
    };
    loop {
        fam.scale = 1.0;
        let captured = adaptive_simpson(|s| fam.log_density(s), fam.s_lo, fam.s_hi, SIMPSON_TOL);
        let fraction = captured / n as f64;
        if fraction >= 0.5 {
            fam.scale = 1.0 / captured;
            break;
        }
        fam.transition *= 0.5;
        if fam.transition < 1e-4 {
            return Err(LabError::Construction(format!(
                "ψ bound 2ρ⁻²/n is infeasible: the bump captures only {fraction:.3} of ∫ρ⁻²"
            )));
        }
    }
    // cumulative cache on a log grid over [aₙ/2, 2]
    let (g0, g1) = ((0.5 * a_n).ln(), 2f64.ln());
    fam.nodes = (0..CACHE_POINTS).map(|i| g0 + (g1 - g0) * i as f64 / (CACHE_POINTS - 1) as f64).collect();
    let mut mass = Vec::with_capacity(CACHE_POINTS);
    let mut moment = Vec::with_capacity(CACHE_POINTS);
    let (mut m, mut q) = (0.0, 0.0);
    mass.push(0.0);
    moment.push(0.0);
    for w in fam.nodes.windows(2) {
        let (lo, hi) = (w[0].max(fam.s_lo), w[1].min(fam.s_hi));
        if hi > lo {
            m += adaptive_simpson(|v| fam.log_density(v), lo, hi, SIMPSON_TOL);
            q += adaptive_simpson(|v| fam.log_density(v) * v.exp(), lo, hi, SIMPSON_TOL * a_prev);
        }
        mass.push(m);
        moment.push(q);
    }
    fam.mass = mass;
    fam.moment = moment;
    let ratio = fam.bound_ratio(4000);
    if ratio > 1.0 + 1e-9 {
        return Err(LabError::Construction(format!("ψ exceeds 2ρ⁻²/n by the factor {ratio}")));
    }
    if (fam.total_mass() - 1.0).abs() > 1e-6 {
        return Err(LabError::Construction(format!("∫ψ = {} instead of 1", fam.total_mass())));
    }
    Ok(fam)
}

/// ∫ φₙ″(x) h(x) dx = ∫ ψₙ(x) (h(x) + h(−x)) dx over the support. The
/// quadrature is divided by the same rule's ∫ψₙ, so the unit mass is
/// exact and the result tends to 2h(0).
pub fn delta_approx_check<H: Fn(f64) -> f64>(family: &YWFamily, h: H) -> f64 {
    let mass = adaptive_simpson(|s| family.log_density(s), family.s_lo, family.s_hi, SIMPSON_TOL);
    adaptive_simpson(
        |s| {
            let x = s.exp();
            family.log_density(s) * (h(x) + h(-x))
        },
        family.s_lo,
        family.s_hi,
        SIMPSON_TOL,
    ) / mass
}

/// Discrete check of (∂ᵢf)²/f ≤ 2 maxᵢ ‖∂ᵢ²f‖∞ for a non-negative grid
/// function that vanishes on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalculusBound {
    pub lhs_sup: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `values` is row-major with `shape` of one or two axes and uniform spacing.
///
/// The left side uses (∂ᵢf)²/f = 4(∂ᵢ√f)² with central differences of √f
/// at points whose stencil lies inside {f > 0}. The right side takes
/// centered second differences everywhere, plus one-sided four-point
/// second derivatives at the edge of the support, where f″ may jump.
pub fn calculus_bound_check(values: &[f64], shape: &[usize], spacing: f64) -> Result<CalculusBound> {
    let total: usize = shape.iter().product();
    if shape.is_empty() || shape.len() > 2 || total != values.len() || shape.iter().any(|&s| s < 3) {
        return Err(LabError::Input("grid function must have one or two axes of at least three points".into()));
    }
    if let Some(i) = values.iter().position(|&v| !(v >= 0.0)) {
        return Err(LabError::Domain(format!("precondition violated: f is negative at index {i}")));
    }
    let fmax = values.iter().fold(0.0f64, |m, &v| m.max(v));
    if fmax == 0.0 {
        return Err(LabError::Domain("precondition violated: f vanishes identically".into()));
    }
    let tol = 1e-12 * fmax;
    let (rows, cols) = if shape.len() == 1 { (1, shape[0]) } else { (shape[0], shape[1]) };
    let boundary = |r: usize, c: usize| c == 0 || c == cols - 1 || (shape.len() == 2 && (r == 0 || r == rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            if boundary(r, c) && values[r * cols + c] > tol {
                return Err(LabError::Domain("precondition violated: f must vanish on the boundary".into()));
            }
        }
    }
    // every grid line along every axis
    let mut lines: Vec<Vec<f64>> = (0..rows).map(|r| values[r * cols..(r + 1) * cols].to_vec()).collect();
    if shape.len() == 2 {
        lines.extend((0..cols).map(|c| (0..rows).map(|r| values[r * cols + c]).collect()));
    }
    let h2 = spacing * spacing;
    let (mut lhs, mut d2) = (0.0f64, 0.0f64);
    for f in &lines {
        let n = f.len();
        let inside = |i: usize| f[i] > tol;
        for i in 1..n - 1 {
            d2 = d2.max((f[i + 1] - 2.0 * f[i] + f[i - 1]).abs() / h2);
            if inside(i - 1) && inside(i) && inside(i + 1) {
                let g = (f[i + 1].sqrt() - f[i - 1].sqrt()) / spacing;
                lhs = lhs.max(g * g);
            }
            if inside(i) && !inside(i + 1) && i >= 3 && (i - 3..i).all(inside) {
                d2 = d2.max((2.0 * f[i] - 5.0 * f[i - 1] + 4.0 * f[i - 2] - f[i - 3]).abs() / h2);
            }
            if inside(i) && !inside(i - 1) && i + 3 < n && (i + 1..i + 4).all(inside) {
                d2 = d2.max((2.0 * f[i] - 5.0 * f[i + 1] + 4.0 * f[i + 2] - f[i + 3]).abs() / h2);
            }
        }
    }
    let rhs = 2.0 * d2;
    Ok(CalculusBound { lhs_sup: lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-3) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_and_numeric_sequences_agree() {
        let rho = RhoSpec::sqrt();
        assert_eq!(a_sequence(0, &rho).unwrap(), 1.0);
        assert!((a_sequence(1, &rho).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((a_sequence(2, &rho).unwrap() - 0.049_787_068_367_863_944).abs() < 1e-15);
        let numeric = a_sequence_numeric(6, &rho).unwrap();
        for (k, a) in numeric.iter().enumerate() {
            let exact = (-((k * (k + 1)) as f64) / 2.0).exp();
            assert!((a - exact).abs() <= 1e-12, "k = {k}");
        }
    }

    #[test]
    fn log_integral_residual() {
        let rho = RhoSpec::sqrt();
        for n in 1..=8 {
            let (a0, a1) = (a_sequence(n - 1, &rho).unwrap(), a_sequence(n, &rho).unwrap());
            let i = rho.log_integral(a1.ln(), a0.ln()).unwrap();
            assert!((i - n as f64).abs() <= 1e-10);
            assert!(a1 / n as f64 <= (-((n * (n + 1)) as f64) / 2.0).exp());
        }
    }

    #[test]
    fn monotone_table_interpolates_and_preserves_order() {
        let xs: Vec<f64> = (0..30).map(|i| 10f64.powf(-6.0 + 0.2 * i as f64)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sqrt() * 2.0).collect();
        let t = MonotoneTable::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((t.eval(*x).unwrap() - y).abs() < 1e-14);
        }
        let mut prev = 0.0;
        for i in 0..2000 {
            let x = xs[0] + (xs[29] - xs[0]) * i as f64 / 1999.0;
            let v = t.eval(x).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(matches!(t.eval(1e-7), Err(LabError::Resolution(_))));
    }

    fn sqrt_table(scale: f64, power: f64) -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..=600).map(|i| 10f64.powf(-12.0 + 0.02 * i as f64)).collect();
        let ys = xs.iter().map(|x| scale * x.powf(power)).collect();
        (xs, ys)
    }

    #[test]
    fn custom_rho_matches_closed_form_rescaled() {
        // ρ = 2√x gives ∫ρ⁻² = ln/4, so aₙ = e^{−2n(n+1)}
        let (xs, ys) = sqrt_table(2.0, 0.5);
        let rho = RhoSpec::custom(xs, ys, false).unwrap();
        let a = a_sequence_numeric(2, &rho).unwrap();
        // the interpolated table carries a small error
        assert!((a[1] / (-4.0f64).exp() - 1.0).abs() < 1e-4);
        assert!((a[2] / (-12.0f64).exp() - 1.0).abs() < 1e-4);
        assert!(rho.divergence_check().unwrap().certified);
        assert!(matches!(a_sequence_numeric(4, &rho), Err(LabError::Resolution(_))));
    }

    #[test]
    fn custom_rho_below_sqrt_needs_augmentation() {
        let (xs, ys) = sqrt_table(0.5, 0.5);
        assert!(matches!(RhoSpec::custom(xs.clone(), ys.clone(), false), Err(LabError::Construction(_))));
        let rho = RhoSpec::custom(xs, ys, true).unwrap();
        // (0.5 + 1)²: ρ ≥ √x holds after augmentation
        assert!(rho.eval(0.01).unwrap() >= 0.1);
    }

    #[test]
    fn integrable_rho_is_not_certified() {
        let (xs, ys) = sqrt_table(1.0, 0.3);
        let rho = RhoSpec::custom(xs, ys, false).unwrap();
        let report = rho.divergence_check().unwrap();
        assert!(!report.certified);
        assert!(report.warning.is_some());
    }

    #[test]
    fn family_constraints_hold() {
        let rho = RhoSpec::sqrt();
        for n in 1..=8 {
            let f = build_family(n, &rho).unwrap();
            assert!((f.total_mass() - 1.0).abs() < 1e-6, "n = {n}");
            assert!(f.bound_ratio(5000) <= 1.0 + 1e-9);
            assert_eq!(f.psi(f.a_n), 0.0);
            assert_eq!(f.psi(f.a_prev), 0.0);
            assert_eq!(f.psi(0.5 * f.a_n), 0.0);
        }
    }

    #[test]
    fn phi_properties() {
        let rho = RhoSpec::sqrt();
        let f = build_family(3, &rho).unwrap();
        assert_eq!(f.phi(0.0), 0.0);
        assert_eq!(f.phi_prime(0.0), 0.0);
        let xs: Vec<f64> = (0..400).map(|i| -1.5 + 3.0 * i as f64 / 399.0).collect();
        for &x in &xs {
            assert!(f.phi_prime(x).abs() <= 1.0 + 1e-9);
            assert!(x.abs() - f.phi(x) <= f.a_prev + 1e-12);
            assert!((f.phi(x) - f.phi(-x)).abs() < 1e-15);
        }
        // derivative consistency inside the support
        for i in 1..50 {
            let x = (f.a_n.ln() + (f.a_prev.ln() - f.a_n.ln()) * i as f64 / 50.0).exp();
            let h = 1e-4 * x;
            let numeric = (f.phi(x + h) - f.phi(x - h)) / (2.0 * h);
            assert!((numeric - f.phi_prime(x)).abs() < 1e-5, "x = {x}");
        }
    }

    #[test]
    fn delta_limits() {
        let rho = RhoSpec::sqrt();
        let mut prev = f64::INFINITY;
        for n in 2..=8 {
            let f = build_family(n, &rho).unwrap();
            assert!((delta_approx_check(&f, |_| 1.0) - 2.0).abs() < 1e-12);
            assert!(delta_approx_check(&f, |x| x).abs() < 1e-12);
            // the error is of order a²ₙ₋₁ and reaches round-off from n = 7 on
            let err = (delta_approx_check(&f, f64::cos) - 2.0).abs();
            assert!(err < prev || err <= 1e-15, "n = {n}: {err} after {prev}");
            prev = err;
        }
    }

    #[test]
    fn calculus_bound_cosine_square_is_tight() {
        let m = 4001;
        let h = 4.0 / (m - 1) as f64;
        let f: Vec<f64> = (0..m)
            .map(|i| {
                let x = -2.0 + i as f64 * h;
                if x.abs() < 1.0 { (std::f64::consts::FRAC_PI_2 * x).cos().powi(2) } else { 0.0 }
            })
            .collect();
        let r = calculus_bound_check(&f, &[m], h).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(r.pass);
        assert!((r.lhs_sup - pi2).abs() / pi2 < 1e-3, "{r:?}");
        assert!((r.rhs - pi2).abs() / pi2 < 1e-3);
    }

    #[test]
    fn calculus_bound_other_shapes() {
        let m = 801;
        let h = 3.0 / (m - 1) as f64;
        let x = |i: usize| -1.5 + i as f64 * h;
        let f: Vec<f64> = (0..m).map(|i| (1.0 - x(i) * x(i)).max(0.0).powi(2)).collect();
        assert!(calculus_bound_check(&f, &[m], h).unwrap().pass);
        // smooth plateau: the flat interior contributes nothing, so the
        // supremum comes from the flanks alone
        let plateau: Vec<f64> = (0..m).map(|i| smooth_step((1.2 - x(i).abs()) / 0.5)).collect();
        let flat_only: Vec<f64> = plateau.iter().map(|&v| if v == 1.0 { 1.0 } else { 0.0 }).collect();
        assert!(calculus_bound_check(&plateau, &[m], h).unwrap().pass);
        let interior = (1..m - 1).filter(|&i| flat_only[i - 1] == 1.0 && flat_only[i + 1] == 1.0).count();
        assert!(interior > 100);
        for i in (1..m - 1).filter(|&i| flat_only[i - 1] == 1.0 && flat_only[i + 1] == 1.0) {
            assert_eq!(plateau[i + 1].sqrt() - plateau[i - 1].sqrt(), 0.0);
        }
        // two dimensions, product of bumps
        let k = 121;
        let hh = 3.0 / (k - 1) as f64;
        let g: Vec<f64> = (0..k * k)
            .map(|idx| {
                let (a, b) = (-1.5 + (idx / k) as f64 * hh, -1.5 + (idx % k) as f64 * hh);
                (1.0 - a * a).max(0.0).powi(3) * (1.0 - b * b).max(0.0).powi(3)
            })
            .collect();
        assert!(calculus_bound_check(&g, &[k, k], hh).unwrap().pass);
        let mut neg = f.clone();
        neg[400] = -1.0;
        assert!(matches!(calculus_bound_check(&neg, &[m], h), Err(LabError::Domain(_))));
    }
}
