//! Quadrature checks of the Gaussian kernel estimates used in the
//! regularity argument, computed independently of the simulator.
//!
//! Every check produces an [`OracleCase`]: a left-hand side computed by
//! singularity-aware quadrature, a right-hand side bound, and the ratio.
//! Bounds that only hold up to an unspecified constant use constants
//! calibrated once by [`calibrate`] and frozen below; they are never refit
//! at test time.

use crate::error::{LabError, Result};
use crate::kernels::{heat_kernel_1d, negative_moment_constant};
use crate::quad::{gauss_kronrod_pieces, tanh_sinh, tanh_sinh_fixed};
use crate::special::{beta, ln_gamma};
use std::cell::RefCell;
use std::f64::consts::{LN_2, PI};

/// Frozen constant for the L¹ heat-kernel difference bound.
pub const KERNEL_DIFFERENCE_CONSTANT: f64 = 1.0;
/// Frozen constant shared by the squared space- and time-difference bounds.
pub const DIFFERENCE_CORRELATION_CONSTANT: f64 = 4.1;
/// Relative slack allowed on every inequality.
pub const BOUND_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimate {
    /// Double Gaussian integral of |w − z|^{-α} and its moment bound.
    Correlation,
    /// Weighted L¹ distance of two heat kernels.
    KernelDifference,
    /// Squared spatial kernel difference against a singular kernel.
    SpaceCorrelation,
    /// Squared temporal kernel difference against a singular kernel.
    TimeCorrelation,
    /// Triple time integral Q(t, a, b, c, α).
    TimeIntegral,
    /// ∫_s^t (t−r)^{a−1}(r−s)^{−a} dr = π / sin(πa).
    Factorization,
}

impl Estimate {
    pub fn tag(self) -> &'static str {
        match self {
            Estimate::Correlation => "correlation",
            Estimate::KernelDifference => "kernel-difference",
            Estimate::SpaceCorrelation => "space-correlation",
            Estimate::TimeCorrelation => "time-correlation",
            Estimate::TimeIntegral => "time-integral",
            Estimate::Factorization => "factorization",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    pub estimate: Estimate,
    pub params: Vec<(&'static str, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs / rhs, with 0/0 read as 0.
    pub ratio: f64,
    /// lhs ≤ rhs·(1 + tol).
    pub pass: bool,
    /// Largest relative residual of the exact identities checked alongside
    /// the bound (0 when there are none).
    pub residual: f64,
}

impl OracleCase {
    fn new(estimate: Estimate, params: Vec<(&'static str, f64)>, lhs: f64, rhs: f64, residual: f64) -> Result<Self> {
        if !(lhs.is_finite() && rhs.is_finite()) || lhs < 0.0 || rhs < 0.0 {
            return Err(LabError::Oracle(format!("{}: non-finite or negative sides lhs = {lhs}, rhs = {rhs}", estimate.tag())));
        }
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Ok(OracleCase { estimate, params, lhs, rhs, ratio, pass: lhs <= rhs * (1.0 + BOUND_TOLERANCE), residual })
    }

    pub fn csv_header() -> &'static str {
        "lemma,params,lhs,rhs,ratio,pass,residual"
    }

    pub fn csv_row(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
        format!(
            "{},{},{:.17e},{:.17e},{:.17e},{},{:.3e}",
            self.estimate.tag(),
            params.join(";"),
            self.lhs,
            self.rhs,
            self.ratio,
            self.pass,
            self.residual
        )
    }
}

fn domain<T>(msg: String) -> Result<T> {
    Err(LabError::Domain(msg))
}

/// ₁F₁(a; b; −z) for z ≥ 0.
pub fn kummer_negative(a: f64, b: f64, z: f64) -> f64 {
    if z < 0.0 {
        return f64::NAN;
    }
    if z < 500.0 {
        // Kummer's transformation leaves a series of positive terms
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            term *= (b - a + k) / (b + k) * z / (k + 1.0);
            sum += term;
            k += 1.0;
            if k > z && term < 1e-17 * sum {
                break;
            }
        }
        (-z).exp() * sum
    } else {
        let lead = (ln_gamma(b) - ln_gamma(b - a) - a * z.ln()).exp();
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 0..60 {
            let nf = n as f64;
            let next = term * (a + nf) * (a - b + 1.0 + nf) / (nf + 1.0) / z;
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        lead * sum
    }
}

/// E|m + B_s|^{-α} for a d-dimensional Brownian motion, in closed form.
pub fn shifted_negative_moment(alpha: f64, d: usize, m2: f64, s: f64) -> Result<f64> {
    let c0 = negative_moment_constant(alpha, d)?;
    Ok(c0 * s.powf(-0.5 * alpha) * kummer_negative(0.5 * alpha, 0.5 * d as f64, m2 / (2.0 * s)))
}

/// ∫ p_t(x − v) p_{t'}(y − v + u) dv in one dimension, by quadrature.
fn gaussian_overlap(t: f64, tp: f64, x: f64, y: f64, u: f64) -> Result<f64> {
    let c1 = x;
    let c2 = y + u;
    let (lo, hi) = (c1.min(c2), c1.max(c2));
    let sig = t.max(tp).sqrt();
    let mut f = |v: f64| heat_kernel_1d(t, x - v) * heat_kernel_1d(tp, y - v + u);
    let breaks = [lo - 14.0 * sig, lo, hi, hi + 14.0 * sig];
    let peak = heat_kernel_1d(t + tp, x - y - u).max(f64::MIN_POSITIVE);
    Ok(gauss_kronrod_pieces(&mut f, &breaks, 1e-16 * peak, 1e-12)?.value)
}

fn integrate_singular_line<G: FnMut(f64) -> Result<f64>>(mut g: G, alpha: f64, centre: f64, width: f64) -> Result<f64> {
    // ∫_ℝ |u|^{-α} g(u) du, with g concentrated near `centre` at scale `width`
    let reach = centre.abs() + 16.0 * width;
    let near = (0.25 * width).min(reach);
    let mut err = None;
    let mut inner = |u: f64, du: f64| -> f64 {
        match g(u) {
            Ok(v) => du.powf(-alpha) * v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let mut total = 0.0;
    total += tanh_sinh(|_, dl, _| inner(dl, dl), 0.0, near, 1e-11, 10)?.value;
    total += tanh_sinh(|_, dl, _| inner(-dl, dl), 0.0, near, 1e-11, 10)?.value;
    for sign in [1.0, -1.0] {
        let mut breaks = vec![near];
        let c = sign * centre;
        if c > near {
            breaks.extend([(c - 2.0 * width).max(near), c, c + 2.0 * width]);
        }
        breaks.push(reach.max(near * 2.0));
        breaks.dedup();
        breaks.sort_by(f64::total_cmp);
        let mut h = |v: f64| inner(sign * v, v);
        total += gauss_kronrod_pieces(&mut h, &breaks, 0.0, 1e-11)?.value;
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok(total)
}

/// The double integral ∬ p_t(x−w) p_{t'}(y−z) |w−z|^{-α} dw dz for d = 1, 2,
/// by the substitution u = w − z and numeric inner Gaussian overlaps.
pub fn correlation_integral(t: f64, tp: f64, x: &[f64], y: &[f64], alpha: f64) -> Result<f64> {
    let d = x.len();
    if y.len() != d || !(d == 1 || d == 2) {
        return domain(format!("correlation quadrature needs matching points in d = 1 or 2, got {} and {}", x.len(), y.len()));
    }
    if !(t > 0.0 && tp > 0.0) || !(alpha > 0.0 && alpha < d as f64) {
        return domain(format!("need t, t' > 0 and 0 < α < d, got t = {t}, t' = {tp}, α = {alpha}"));
    }
    let width = (t + tp).sqrt();
    if d == 1 {
        let m = x[0] - y[0];
        return integrate_singular_line(|u| gaussian_overlap(t, tp, x[0], y[0], u), alpha, m, width);
    }
    // polar coordinates around u = 0 absorb the singularity into r^{1-α}
    let m = [x[0] - y[0], x[1] - y[1]];
    let mr = m[0].hypot(m[1]);
    let phase = m[1].atan2(m[0]);
    let reach = mr + 14.0 * width;
    let mut err: Option<LabError> = None;
    let mut radial = |r: f64| -> f64 {
        let mut ang = |th: f64| -> f64 {
            let (s, c) = (phase + th).sin_cos();
            let g0 = gaussian_overlap(t, tp, x[0], y[0], r * c);
            let g1 = gaussian_overlap(t, tp, x[1], y[1], r * s);
            match (g0, g1) {
                (Ok(a), Ok(b)) => a * b,
                (Err(e), _) | (_, Err(e)) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        };
        let spread = (width / r.max(1e-300)).min(PI);
        let breaks = [-PI, -spread, 0.0, spread, PI];
        let q = gauss_kronrod_pieces(&mut ang, &breaks, 1e-300, 1e-10);
        match q {
            Ok(q) => r.powf(1.0 - alpha) * q.value,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let mut breaks = vec![0.0, 0.25 * width];
    if mr > 0.25 * width {
        breaks.extend([(mr - 2.0 * width).max(0.25 * width), mr, mr + 2.0 * width]);
    }
    breaks.push(reach);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let q = gauss_kronrod_pieces(&mut radial, &breaks, 0.0, 1e-9)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(q.value)
}

/// E₀|B_s|^{-α} by radial quadrature.
fn origin_moment_quadrature(alpha: f64, d: usize, s: f64) -> Result<f64> {
    let surface = if d == 1 { 2.0 } else { 2.0 * PI };
    let norm = (2.0 * PI * s).powf(-0.5 * d as f64);
    let reach = 12.0 * s.sqrt();
    let q = tanh_sinh(
        |_, r, _| r.powf(d as f64 - 1.0 - alpha) * (-r * r / (2.0 * s)).exp(),
        0.0,
        reach,
        1e-11,
        12,
    )?;
    Ok(surface * norm * q.value)
}

/// Checks the chain
/// ∬ p_t(x−w)p_{t'}(y−z)|w−z|^{-α} = E_{x−y}|B_{t+t'}|^{-α} ≤ E₀|B_{t+t'}|^{-α} = c(α,d)(t+t')^{-α/2}.
/// `lhs` is the double integral, `rhs` the origin moment; `residual` is the
/// larger relative error of the two equalities.
pub fn verify_correst(t: f64, tp: f64, x: &[f64], y: &[f64], alpha: f64) -> Result<OracleCase> {
    let d = x.len();
    let lhs = correlation_integral(t, tp, x, y, alpha)?;
    let s = t + tp;
    let m2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    let shifted = shifted_negative_moment(alpha, d, m2, s)?;
    let closed = negative_moment_constant(alpha, d)? * s.powf(-0.5 * alpha);
    let quad = origin_moment_quadrature(alpha, d, s)?;
    let residual = ((lhs - shifted).abs() / shifted).max((quad - closed).abs() / closed);
    let mut params = vec![("t", t), ("t_prime", tp), ("alpha", alpha), ("d", d as f64)];
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        params.push((["x0", "x1"][i], *a));
        params.push((["y0", "y1"][i], *b));
    }
    OracleCase::new(Estimate::Correlation, params, lhs, quad, residual)
}

fn kernel_difference_crossings(t: f64, tp: f64, x: f64, y: f64) -> Vec<f64> {
    // zeros of ln p_t(x−w) − ln p_{t'}(y−w), a quadratic in w
    let a = 0.5 / tp - 0.5 / t;
    let b = x / t - y / tp;
    let c = 0.5 * y * y / tp - 0.5 * x * x / t + 0.5 * (tp / t).ln();
    if a.abs() < 1e-14 * (0.5 / t) {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut r = vec![q / a];
    if q != 0.0 {
        r.push(c / q);
    }
    r
}

/// ∫|p_t(x−w) − p_{t'}(y−w)| e^{λ'|w|} dw in one dimension.
pub fn kernel_difference_integral(t: f64, tp: f64, x: f64, y: f64, lambda: f64) -> Result<f64> {
    if !(t > 0.0 && tp >= t) || !(lambda >= 0.0) {
        return domain(format!("need 0 < t ≤ t' and λ' ≥ 0, got t = {t}, t' = {tp}, λ' = {lambda}"));
    }
    if t == tp && x == y {
        return Ok(0.0);
    }
    let sig = tp.sqrt();
    let shift = 2.0 * lambda * tp;
    let lo = x.min(y).min(0.0) - shift - 16.0 * sig;
    let hi = x.max(y).max(0.0) + shift + 16.0 * sig;
    let mut breaks = vec![lo, hi, 0.0, x, y];
    breaks.extend(kernel_difference_crossings(t, tp, x, y).into_iter().filter(|w| *w > lo && *w < hi));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut f = |w: f64| (heat_kernel_1d(t, x - w) - heat_kernel_1d(tp, y - w)).abs() * (lambda * w.abs()).exp();
    Ok(gauss_kronrod_pieces(&mut f, &breaks, 1e-15, 1e-11)?.value)
}

/// Shape of the L¹ difference bound without its constant.
pub fn kernel_difference_shape(t: f64, tp: f64, x: f64, y: f64, beta: f64, lambda: f64) -> f64 {
    let v = (x - y).abs();
    (2.0 * lambda * lambda * tp).exp()
        * ((lambda * x.abs()).exp() + (lambda * y.abs()).exp())
        * (2.0 * beta * lambda * v).exp()
        * (t.powf(-0.5 * beta) * v.powf(beta) + t.powf(-beta) * (tp - t).powf(beta))
}

pub fn verify_pdiffest(t: f64, tp: f64, x: f64, y: f64, beta: f64, lambda: f64) -> Result<OracleCase> {
    if !(beta > 0.0 && beta <= 1.0) {
        return domain(format!("β must lie in (0, 1], got {beta}"));
    }
    let lhs = kernel_difference_integral(t, tp, x, y, lambda)?;
    let rhs = KERNEL_DIFFERENCE_CONSTANT * kernel_difference_shape(t, tp, x, y, beta, lambda);
    let params = vec![("t", t), ("t_prime", tp), ("x", x), ("y", y), ("beta", beta), ("lambda", lambda)];
    OracleCase::new(Estimate::KernelDifference, params, lhs, rhs, 0.0)
}

/// 2∫_0^∞ (u^{-α} + 1) G(u) du with G(u) = ∫ D(w) D(w − u) dw.
fn difference_correlation<D: Fn(f64) -> f64>(
    diff: D,
    kinks: &[f64],
    peaks: &[f64],
    support: (f64, f64),
    width: f64,
    alpha: f64,
) -> Result<f64> {
    let (lo, hi) = support;
    let peak = (0..=400).map(|i| diff(lo + (hi - lo) * i as f64 / 400.0)).fold(0.0, f64::max);
    let floor = 1e-16 * peak * peak * width;
    let overlap = |u: f64| -> Result<f64> {
        let mut breaks: Vec<f64> = vec![lo, hi];
        for &k in kinks.iter().chain(peaks) {
            breaks.push(k);
            breaks.push(k + u);
        }
        breaks.retain(|b| *b >= lo && *b <= hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut f = |w: f64| diff(w) * diff(w - u);
        Ok(gauss_kronrod_pieces(&mut f, &breaks, floor, 1e-13)?.value)
    };
    let g0 = overlap(0.0)?;
    if g0 == 0.0 {
        return Ok(0.0);
    }
    let reach = hi - lo;
    let near = (0.25 * width).min(reach);
    let mut err = None;
    let mut integrand = |u: f64| -> f64 {
        match overlap(u) {
            Ok(g) => (u.powf(-alpha) + 1.0) * g,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let mut total = tanh_sinh(|_, dl, _| integrand(dl), 0.0, near, 1e-9, 12)?.value;
    let mut breaks = vec![near];
    let mut span = near;
    while span < reach {
        span = (span * 2.0).min(reach);
        breaks.push(span);
    }
    total += gauss_kronrod_pieces(&mut integrand, &breaks, 1e-14 * g0 * width, 1e-9)?.value;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(2.0 * total)
}

/// ∬|p_t(x−w)−p_t(y−w)||p_t(x−z)−p_t(y−z)|[|w−z|^{-α}+1] dw dz in one dimension.
pub fn space_correlation_integral(t: f64, x: f64, y: f64, alpha: f64) -> Result<f64> {
    if !(t > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("need t > 0 and 0 < α < 1, got t = {t}, α = {alpha}"));
    }
    if x == y {
        return Ok(0.0);
    }
    let sig = t.sqrt();
    let support = (x.min(y) - 16.0 * sig, x.max(y) + 16.0 * sig);
    difference_correlation(
        // p_t(x−w) − p_t(y−w) = −p_t(x−w)·expm1((x−y)(x+y−2w)/(2t)), free of cancellation
        |w| heat_kernel_1d(t, x - w) * ((x - y) * (x + y - 2.0 * w) / (2.0 * t)).exp_m1().abs(),
        &[0.5 * (x + y)],
        &[x, y],
        support,
        sig,
        alpha,
    )
}

/// ∬|p_t(x−w)−p_{t'}(x−w)||p_t(x−z)−p_{t'}(x−z)|[|w−z|^{-α}+1] dw dz in one dimension.
pub fn time_correlation_integral(t: f64, tp: f64, x: f64, alpha: f64) -> Result<f64> {
    if !(t > 0.0 && tp >= t) || !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("need 0 < t ≤ t' and 0 < α < 1, got t = {t}, t' = {tp}, α = {alpha}"));
    }
    if tp == t {
        return Ok(0.0);
    }
    let wc = (t * tp / (tp - t) * (tp / t).ln()).sqrt();
    let sig = tp.sqrt();
    difference_correlation(
        |w| {
            let z2 = (x - w) * (x - w);
            // ln(p_t' / p_t), applied to whichever kernel is larger
            let a = 0.5 * (t / tp).ln() + z2 * (tp - t) / (2.0 * t * tp);
            if a > 0.0 {
                heat_kernel_1d(tp, x - w) * -(-a).exp_m1()
            } else {
                heat_kernel_1d(t, x - w) * -a.exp_m1()
            }
        },
        &[x - wc, x + wc],
        &[x],
        (x - 16.0 * sig, x + 16.0 * sig),
        t.sqrt(),
        alpha,
    )
}

pub fn verify_spacecorrest(t: f64, x: f64, y: f64, alpha: f64) -> Result<OracleCase> {
    let lhs = space_correlation_integral(t, x, y, alpha)?;
    let rhs = DIFFERENCE_CORRELATION_CONSTANT * (t.powf(-1.0 - 0.5 * alpha) + 1.0 / t) * (x - y).powi(2);
    OracleCase::new(Estimate::SpaceCorrelation, vec![("t", t), ("x", x), ("y", y), ("alpha", alpha)], lhs, rhs, 0.0)
}

pub fn verify_timecorrest(t: f64, tp: f64, x: f64, alpha: f64) -> Result<OracleCase> {
    let lhs = time_correlation_integral(t, tp, x, alpha)?;
    let rhs = DIFFERENCE_CORRELATION_CONSTANT * (t.powf(-2.0 - 0.5 * alpha) + t.powi(-2)) * (tp - t).powi(2);
    OracleCase::new(Estimate::TimeCorrelation, vec![("t", t), ("t_prime", tp), ("x", x), ("alpha", alpha)], lhs, rhs, 0.0)
}

fn check_time_integral_params(a: f64, b: f64, c: f64, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("α must lie in (0, 1), got {alpha}"));
    }
    if !(b >= 0.0 && c >= 0.0) {
        return domain(format!("need b, c ≥ 0, got b = {b}, c = {c}"));
    }
    if !(c < 0.5 * (b + 1.0 - 0.5 * alpha)) {
        return domain(format!("need c < (b + 1 − α/2)/2, got c = {c}"));
    }
    if !(a > c && a < 1.0 - 0.5 * alpha) {
        return domain(format!("need a ∈ (c, 1 − α/2), got a = {a}"));
    }
    Ok(())
}

/// The two parts of Q(t): the one carrying the singular kernel and the one
/// carrying the constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeIntegral {
    pub singular: f64,
    pub constant: f64,
    /// Relative tolerance the quadrature reached.
    pub rel_tol: f64,
}

impl TimeIntegral {
    pub fn total(&self) -> f64 {
        self.singular + self.constant
    }
}

/// Kernel term k₀·(r + r' − 2s)^{−κ} of the reduced space integral.
#[derive(Debug, Clone, Copy)]
struct TimeKernel {
    k0: f64,
    kappa: f64,
}

/// ln ∫_0^r (tr + q)^b q^{−a} (q + gap)^{−a} k₀(2q + gap)^{−κ} dq, over
/// q = e^y in the log domain so that arbitrarily small gaps neither
/// overflow nor hide the near-singular layer at q ≈ gap.
fn ln_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

fn ln_inner_time_integral(lr: f64, lgap: f64, ltr: f64, a: f64, b: f64, kern: TimeKernel, tol: f64) -> Result<f64> {
    let lg = lgap.min(lr);
    let lo = lg - 40.0 / (1.0 - a);
    let ln_f = |y: f64| {
        b * ln_add_exp(ltr, y) - a * y - a * ln_add_exp(y, lgap) - kern.kappa * ln_add_exp(y + LN_2, lgap) + y
    };
    let shift = ln_f(lg).max(ln_f(lr));
    let mut f = |y: f64| (ln_f(y) - shift).exp();
    let mut breaks = vec![lo, lr];
    breaks.extend([lg - 5.0, lg, lg + 5.0].into_iter().filter(|v| *v > lo && *v < lr));
    breaks.sort_by(f64::total_cmp);
    let q = gauss_kronrod_pieces(&mut f, &breaks, 0.0, tol)?;
    Ok(kern.k0.ln() + shift + q.value.ln())
}

fn time_integral_part(t: f64, a: f64, b: f64, c: f64, kern: TimeKernel, tol: f64) -> Result<f64> {
    let failure: RefCell<Option<LabError>> = RefCell::new(None);
    let record = |e: LabError| {
        failure.borrow_mut().get_or_insert(e);
    };
    let e = a - 1.0 - c;
    // by symmetry in (r, r') integrate over r < r' and double; r' − r = (t − r)v
    // and all magnitudes are carried as logarithms relative to v = 1/2
    // the outer integrand behaves like (t − r)^{−p} as r → t; with
    // t − r = t·u^k, k = 1/(1 − p), it becomes bounded in u
    let p = (1.0 + 2.0 * c - 2.0 * a).max(2.0 * c + kern.kappa);
    let k = 1.0 / (1.0 - p);
    let outer = tanh_sinh(
        |u, _, w| {
            let tr = t * u.powf(k);
            let r = -t * (k * (-w).ln_1p()).exp_m1();
            if tr == 0.0 || r == 0.0 {
                return 0.0;
            }
            let jac = t * k * u.powf(k - 1.0);
            let (lr, ltr) = (r.ln(), tr.ln());
            let ln_mid = match ln_inner_time_integral(lr, ltr - LN_2, ltr, a, b, kern, 1e-2 * tol) {
                Ok(v) => v,
                Err(err) => {
                    record(err);
                    return 0.0;
                }
            };
            let middle = tanh_sinh(
                |_, v, w| match ln_inner_time_integral(lr, ltr + v.ln(), ltr, a, b, kern, 1e-2 * tol) {
                    Ok(li) => (e * w.ln() + li - ln_mid).exp(),
                    Err(err) => {
                        record(err);
                        0.0
                    }
                },
                0.0,
                1.0,
                1e-1 * tol,
                12,
            );
            match middle {
                Ok(q) => (2.0 * e * tr.ln() + tr.ln() + ln_mid + jac.ln()).exp() * q.value,
                Err(err) => {
                    record(err);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        tol,
        12,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(2.0 * outer.value)
}

/// Q(t, a, b, c, α) in one dimension by nested tanh–sinh over (r, r', s),
/// with the inner space integrals replaced by c(α,1)(r + r' − 2s)^{-α/2} + 1.
pub fn time_integral_quadrature(t: f64, a: f64, b: f64, c: f64, alpha: f64) -> Result<TimeIntegral> {
    check_time_integral_params(a, b, c, alpha)?;
    if !(t > 0.0) {
        return domain(format!("need t > 0, got {t}"));
    }
    let c0 = negative_moment_constant(alpha, 1)?;
    let singular = TimeKernel { k0: c0, kappa: 0.5 * alpha };
    let constant = TimeKernel { k0: 1.0, kappa: 0.0 };
    // near the parameter limits the integrand approaches non-integrability
    // and the double-exponential rule loses the mass below the smallest
    // representable node, so the tolerance is relaxed stepwise
    let mut last = None;
    for tol in [1e-8, 1e-6, 1e-4] {
        let attempt = time_integral_part(t, a, b, c, singular, tol)
            .and_then(|s| Ok((s, time_integral_part(t, a, b, c, constant, tol)?)));
        match attempt {
            Ok((singular, constant)) => return Ok(TimeIntegral { singular, constant, rel_tol: tol }),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Q(t) = A t^{e₁} + B t^{e₂}: after r = s + (t−s)ρ the part with the
/// constant kernel is a squared Beta integral and the singular part reduces
/// to a two-dimensional integral over the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeIntegralScaling {
    pub a_coeff: f64,
    pub b_coeff: f64,
    pub e1: f64,
    pub e2: f64,
}

impl TimeIntegralScaling {
    pub fn eval(&self, t: f64) -> TimeIntegral {
        TimeIntegral { singular: self.a_coeff * t.powf(self.e1), constant: self.b_coeff * t.powf(self.e2), rel_tol: 0.0 }
    }

    /// Smallest constant with Q(t) ≤ C [t^{e₁} + t^{e₂}] for all t > 0.
    pub fn bound_constant(&self) -> f64 {
        self.a_coeff.max(self.b_coeff)
    }
}

pub fn time_integral_scaling(a: f64, b: f64, c: f64, alpha: f64) -> Result<TimeIntegralScaling> {
    check_time_integral_params(a, b, c, alpha)?;
    let c0 = negative_moment_constant(alpha, 1)?;
    let e1 = b + 1.0 - 0.5 * alpha - 2.0 * c;
    let e2 = b + 1.0 - 2.0 * c;
    let failure: RefCell<Option<LabError>> = RefCell::new(None);
    let square = tanh_sinh(
        |_, p, q1| {
            let inner = tanh_sinh(
                |_, pp, qq| qq.powf(a - 1.0 - c) * pp.powf(-a) * (p + pp).powf(-0.5 * alpha),
                0.0,
                1.0,
                1e-12,
                12,
            );
            match inner {
                Ok(v) => q1.powf(a - 1.0 - c) * p.powf(-a) * v.value,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        1e-11,
        12,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let bt = beta(a - c, 1.0 - a);
    Ok(TimeIntegralScaling { a_coeff: c0 * square.value / e1, b_coeff: bt * bt / e2, e1, e2 })
}

/// Q(t) from the triple quadrature against the bound with the smallest
/// admissible constant; `residual` compares the quadrature with the
/// reduced two-term form.
pub fn verify_jest(t: f64, a: f64, b: f64, c: f64, alpha: f64) -> Result<OracleCase> {
    let scaling = time_integral_scaling(a, b, c, alpha)?;
    let q = time_integral_quadrature(t, a, b, c, alpha)?;
    let reduced = scaling.eval(t).total();
    let rhs = scaling.bound_constant() * (t.powf(scaling.e1) + t.powf(scaling.e2));
    let params = vec![("t", t), ("a", a), ("b", b), ("c", c), ("alpha", alpha)];
    OracleCase::new(Estimate::TimeIntegral, params, q.total(), rhs, (q.total() - reduced).abs() / reduced)
}

/// Least-squares slope of ln y on ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted: f64,
    pub expected: f64,
}

impl ExponentFit {
    pub fn error(&self) -> f64 {
        (self.fitted - self.expected).abs()
    }
}

/// Small-t exponent of Q: the singular part from the triple quadrature at
/// t = 2^{-7}, …, 2^{-2}, fitted against b + 1 − α/2 − 2c.
pub fn jest_small_time_exponent(a: f64, b: f64, c: f64, alpha: f64) -> Result<ExponentFit> {
    check_time_integral_params(a, b, c, alpha)?;
    let ts: Vec<f64> = (2..=7).rev().map(|k| 0.5f64.powi(k)).collect();
    let values = ts
        .iter()
        .map(|&t| time_integral_quadrature(t, a, b, c, alpha).map(|q| q.singular))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ExponentFit { fitted: loglog_slope(&ts, &values), expected: b + 1.0 - 0.5 * alpha - 2.0 * c, abscissae: ts, values })
}

/// Slope of the L¹ kernel difference in |x − y| at λ' = 0, t = t'.
pub fn kernel_difference_space_exponent(t: f64) -> Result<ExponentFit> {
    let vs: Vec<f64> = (3..=7).map(|k| 0.5f64.powi(k) * t.sqrt()).collect();
    let values = vs.iter().map(|&v| kernel_difference_integral(t, t, 0.0, v, 0.0)).collect::<Result<Vec<f64>>>()?;
    Ok(ExponentFit { fitted: loglog_slope(&vs, &values), expected: 1.0, abscissae: vs, values })
}

/// Slope of the squared space difference in |x − y|.
pub fn space_correlation_exponent(t: f64, alpha: f64) -> Result<ExponentFit> {
    let vs: Vec<f64> = (3..=7).map(|k| 0.5f64.powi(k)).collect();
    let values = vs.iter().map(|&v| space_correlation_integral(t, 0.0, v, alpha)).collect::<Result<Vec<f64>>>()?;
    Ok(ExponentFit { fitted: loglog_slope(&vs, &values), expected: 2.0, abscissae: vs, values })
}

/// Slope of the squared time difference in |t' − t|.
pub fn time_correlation_exponent(t: f64, alpha: f64) -> Result<ExponentFit> {
    let gaps: Vec<f64> = (5..=9).map(|k| 0.5f64.powi(k) * t).collect();
    let values =
        gaps.iter().map(|&g| time_correlation_integral(t, t + g, 0.0, alpha)).collect::<Result<Vec<f64>>>()?;
    Ok(ExponentFit { fitted: loglog_slope(&gaps, &values), expected: 2.0, abscissae: gaps, values })
}

/// |∫_s^t (t−r)^{a−1}(r−s)^{−a} dr − π/sin(πa)|, with the endpoint
/// singularities handled by the double-exponential substitution.
pub fn verify_factorization(a: f64, t: f64, s: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) || !(s < t) {
        return domain(format!("need 0 < a < 1 and s < t, got a = {a}, s = {s}, t = {t}"));
    }
    let f = |_: f64, rs: f64, tr: f64| tr.powf(a - 1.0) * rs.powf(-a);
    // the convergence test can stall at round-off; then take a fine fixed level
    let value = match tanh_sinh(f, s, t, 1e-15, 14) {
        Ok(q) => q.value,
        Err(_) => tanh_sinh_fixed(f, s, t, 9),
    };
    Ok((value - PI / (PI * a).sin()).abs())
}

pub fn factorization_case(a: f64, t: f64, s: f64) -> Result<OracleCase> {
    let residual = verify_factorization(a, t, s)?;
    let exact = PI / (PI * a).sin();
    OracleCase::new(Estimate::Factorization, vec![("a", a), ("t", t), ("s", s)], exact, exact, residual / exact)
}

/// Supremum of lhs / shape over a calibration set, for each frozen constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub name: &'static str,
    pub observed_sup: f64,
    pub frozen: f64,
}

/// Recomputes the suprema behind the frozen constants. The frozen values
/// were set to 1.5 × the observed suprema, rounded up.
pub fn calibrate() -> Result<Vec<Calibration>> {
    let mut kd = 0.0f64;
    for &t in &[0.01, 0.1, 1.0] {
        for &ratio in &[1.0, 1.25, 2.0, 4.0] {
            for &v in &[0.0, 0.02, 0.2, 1.0, 3.0] {
                for &x in &[0.0, 1.0] {
                    for &beta in &[0.25, 0.5, 1.0] {
                        for &lambda in &[0.0, 0.5, 2.0] {
                            let tp = t * ratio;
                            if ratio == 1.0 && v == 0.0 {
                                continue;
                            }
                            let lhs = kernel_difference_integral(t, tp, x, x + v, lambda)?;
                            kd = kd.max(lhs / kernel_difference_shape(t, tp, x, x + v, beta, lambda));
                        }
                    }
                }
            }
        }
    }
    let mut dc = 0.0f64;
    for &alpha in &[0.1, 0.5, 0.9] {
        for &t in &[0.01, 0.25, 1.0] {
            for &v in &[0.01, 0.1, 0.5, 2.0] {
                let lhs = space_correlation_integral(t, 0.0, v, alpha)?;
                dc = dc.max(lhs / ((t.powf(-1.0 - 0.5 * alpha) + 1.0 / t) * v * v));
            }
            for &g in &[0.01, 0.1, 1.0, 4.0] {
                let tp = t * (1.0 + g);
                let lhs = time_correlation_integral(t, tp, 0.0, alpha)?;
                dc = dc.max(lhs / ((t.powf(-2.0 - 0.5 * alpha) + t.powi(-2)) * (tp - t).powi(2)));
            }
        }
    }
    Ok(vec![
        Calibration { name: "kernel-difference", observed_sup: kd, frozen: KERNEL_DIFFERENCE_CONSTANT },
        Calibration { name: "difference-correlation", observed_sup: dc, frozen: DIFFERENCE_CORRELATION_CONSTANT },
    ])
}

/// Draws a reproducible sweep of parameters from a seeded stream.
pub fn sweep_points(seed: u64, count: usize) -> Vec<[f64; 4]> {
    use rand::Rng;
    let mut rng = crate::rng::RngStream::new(seed, 0, 0).generator();
    (0..count)
        .map(|_| [rng.random_range(0.01..1.0), rng.random_range(0.01..1.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_chain_is_exact_on_the_diagonal() {
        for &(t, tp) in &[(0.1, 0.1), (0.05, 0.4), (1.0, 2.0)] {
            let case = verify_correst(t, tp, &[0.3], &[0.3], 0.5).unwrap();
            assert!(case.residual < 1e-6, "{case:?}");
            assert!((case.lhs - case.rhs).abs() / case.rhs < 1e-6);
            assert!(case.pass);
        }
    }

    #[test]
    fn vanishing_singularity_gives_unit_mass() {
        let case = verify_correst(0.2, 0.3, &[0.0], &[0.4], 1e-3).unwrap();
        assert!((case.lhs - 1.0).abs() < 5e-3, "{}", case.lhs);
    }

    #[test]
    fn correlation_inequality_on_a_random_sweep() {
        for p in sweep_points(11, 50) {
            let case = verify_correst(p[0], p[1], &[p[2]], &[p[3]], 0.5).unwrap();
            assert!(case.pass && case.residual < 1e-6, "{case:?}");
        }
    }

    #[test]
    fn correlation_in_two_dimensions() {
        let case = verify_correst(0.2, 0.3, &[0.1, -0.2], &[0.4, 0.3], 1.0).unwrap();
        assert!(case.pass && case.residual < 1e-6, "{case:?}");
    }

    #[test]
    fn kummer_branches_agree() {
        // reference values from a 50-digit evaluation
        assert!((kummer_negative(0.25, 0.5, 499.999) / 0.103422436552367 - 1.0).abs() < 1e-12);
        assert!((kummer_negative(0.25, 0.5, 500.0) / 0.10342238476323 - 1.0).abs() < 1e-12);
        assert!((kummer_negative(0.25, 0.5, 50.0) / 0.184549966571775 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_kernels_have_zero_difference() {
        let case = verify_pdiffest(0.3, 0.3, 0.2, 0.2, 0.5, 1.0).unwrap();
        assert_eq!(case.lhs, 0.0);
        assert!(case.pass);
    }

    #[test]
    fn kernel_difference_bounded_on_a_random_sweep() {
        for p in sweep_points(5, 30) {
            let case = verify_pdiffest(p[0], p[0], p[2], p[3], 0.5, 0.0).unwrap();
            assert!(case.pass, "{case:?}");
        }
        for &t in &[0.01, 0.1, 1.0] {
            let case = verify_pdiffest(t, 2.0 * t, 0.4, 0.4, 1.0, 0.0).unwrap();
            assert!(case.pass, "{case:?}");
        }
    }

    #[test]
    fn kernel_difference_is_linear_in_space() {
        let fit = kernel_difference_space_exponent(0.1).unwrap();
        assert!(fit.error() < 0.05, "{fit:?}");
    }

    #[test]
    fn squared_differences_vanish_and_scale_quadratically() {
        assert_eq!(space_correlation_integral(0.25, 0.3, 0.3, 0.5).unwrap(), 0.0);
        assert_eq!(time_correlation_integral(0.25, 0.25, 0.3, 0.5).unwrap(), 0.0);
        let space = space_correlation_exponent(0.25, 0.5).unwrap();
        assert!(space.error() < 0.05, "{space:?}");
        let time = time_correlation_exponent(0.25, 0.5).unwrap();
        assert!(time.error() < 0.05, "{time:?}");
        assert!(verify_spacecorrest(0.25, 0.0, 0.1, 0.5).unwrap().pass);
        assert!(verify_timecorrest(0.25, 0.3, 0.0, 0.5).unwrap().pass);
    }

    #[test]
    fn wide_time_gaps_stay_finite() {
        for &(t, tp) in &[(0.01, 0.02), (1.0, 3.0)] {
            let case = verify_timecorrest(t, tp, 0.0, 0.5).unwrap();
            assert!(case.lhs.is_finite() && case.pass, "{case:?}");
        }
    }

    #[test]
    fn time_integral_small_time_exponent() {
        let fit = jest_small_time_exponent(0.4, 0.0, 0.0, 0.5).unwrap();
        assert!((fit.expected - 0.75).abs() < 1e-12);
        assert!(fit.error() < 0.1, "{fit:?}");
    }

    #[test]
    fn time_integral_near_the_limit_is_large_but_bounded() {
        let c = 0.5 * (1.0 - 0.25) - 0.01;
        let case = verify_jest(0.1, 0.5, 0.0, c, 0.5).unwrap();
        let regular = verify_jest(0.1, 0.5, 0.0, 0.0, 0.5).unwrap();
        assert!(case.lhs > 100.0 * regular.lhs);
        assert!(case.pass && case.residual < 1e-6, "{case:?}");
    }

    #[test]
    fn time_integral_with_positive_b() {
        let case = verify_jest(0.1, 0.3, 1.0, 0.25, 0.8).unwrap();
        assert!(case.pass && case.residual < 1e-6, "{case:?}");
    }

    #[test]
    fn time_integral_rejects_a_below_c() {
        assert!(matches!(verify_jest(0.1, 0.2, 0.0, 0.2, 0.5), Err(LabError::Domain(_))));
        assert!(matches!(verify_jest(0.1, 0.1, 0.0, 0.2, 0.5), Err(LabError::Domain(_))));
    }

    #[test]
    fn factorization_identity() {
        for &a in &[0.2, 0.5, 0.8] {
            assert!(verify_factorization(a, 1.0, 0.0).unwrap() <= 1e-8);
        }
        assert!((factorization_case(0.3, 1.0, 0.0).unwrap().lhs - 3.8833).abs() < 1e-4);
        let exact = PI / (PI * 0.3).sin();
        let w1 = verify_factorization(0.3, 1.0, 0.0).unwrap();
        let w2 = verify_factorization(0.3, 5.5, 2.0).unwrap();
        assert!(w1 <= 1e-8 * exact && w2 <= 1e-8 * exact);
    }

    #[test]
    fn translation_invariance() {
        let shift = 1.7;
        let a = correlation_integral(0.2, 0.3, &[0.1], &[0.5], 0.5).unwrap();
        let b = correlation_integral(0.2, 0.3, &[0.1 + shift], &[0.5 + shift], 0.5).unwrap();
        assert!((a - b).abs() / a < 1e-8);
        let a = kernel_difference_integral(0.2, 0.3, 0.1, 0.5, 0.0).unwrap();
        let b = kernel_difference_integral(0.2, 0.3, 0.1 + shift, 0.5 + shift, 0.0).unwrap();
        assert!((a - b).abs() / a < 1e-8);
        let a = space_correlation_integral(0.2, 0.1, 0.5, 0.5).unwrap();
        let b = space_correlation_integral(0.2, 0.1 + shift, 0.5 + shift, 0.5).unwrap();
        assert!((a - b).abs() / a < 1e-6);
        let a = time_correlation_integral(0.2, 0.3, 0.1, 0.5).unwrap();
        let b = time_correlation_integral(0.2, 0.3, 0.1 + shift, 0.5).unwrap();
        assert!((a - b).abs() / a < 1e-6);
    }

    #[test]
    fn frozen_constants_cover_the_calibration_set() {
        for cal in calibrate().unwrap() {
            assert!(cal.observed_sup <= cal.frozen, "{cal:?}");
        }
    }

    #[test]
    fn csv_rows_have_the_header_width() {
        let case = factorization_case(0.5, 1.0, 0.0).unwrap();
        assert_eq!(case.csv_row().split(',').count(), OracleCase::csv_header().split(',').count());
        assert!(case.csv_row().starts_with("factorization,"));
    }
}
