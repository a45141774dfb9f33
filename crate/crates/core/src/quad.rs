//! Quadrature rules shared by the kernel oracles and the Yamada–Watanabe
//! tools: globally adaptive Gauss–Kronrod, double-exponential (tanh–sinh)
//! for algebraic endpoint singularities, and adaptive Simpson.

use crate::error::{LabError, Result};
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(PartialEq)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive 7/15-point Gauss–Kronrod on a finite interval.
///
/// Bisects the panel with the largest error estimate until the summed error
/// is below `max(abs_tol, rel_tol * |I|)`. Returns an oracle error when the
/// panel budget is exhausted first.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    gauss_kronrod_budget(&mut f, a, b, abs_tol, rel_tol, 2000)
}

pub fn gauss_kronrod_budget<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, evals: 0 });
    }
    let (v, e) = kronrod15(f, a, b);
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= max_panels {
            return Err(LabError::Oracle(format!(
                "Gauss-Kronrod did not converge on [{a}, {b}]: {} panels, value {total:e}, error {err:e}",
                heap.len()
            )));
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = kronrod15(f, p.a, m);
        let (v2, e2) = kronrod15(f, m, p.b);
        evals += 30;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
        if !total.is_finite() {
            return Err(LabError::Oracle(format!("non-finite integrand on [{a}, {b}]")));
        }
    }
    // Re-sum to avoid drift from the incremental updates.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok(Quadrature { value, error, evals })
}

/// Gauss–Kronrod over a sequence of breakpoints, integrating each piece
/// separately so that kinks and singular points sit on panel edges.
pub fn gauss_kronrod_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    let mut out = Quadrature { value: 0.0, error: 0.0, evals: 0 };
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let q = gauss_kronrod_budget(&mut f, w[0], w[1], abs_tol / pieces, rel_tol, 2000)?;
        out.value += q.value;
        out.error += q.error;
        out.evals += q.evals;
    }
    Ok(out)
}

/// Tanh–sinh quadrature on `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)`; the two distances are
/// computed without cancellation so integrands with algebraic endpoint
/// singularities such as `(x - a)^{-p}` stay accurate arbitrarily close to
/// the ends. Levels are refined by halving the step until two successive
/// estimates agree to `rel_tol`.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_level: usize,
) -> Result<Quadrature> {
    let half = 0.5 * (b - a);
    if half == 0.0 {
        return Ok(Quadrature { value: 0.0, error: 0.0, evals: 0 });
    }
    let mut evals = 0;
    // Contribution of abscissa t (and -t).
    let eval_pair = |t: f64, f: &mut F| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        // distance of the node from the near endpoint, in units of `half`
        let d = (-u).exp() / cu;
        if t == 0.0 {
            return w * f(a + half, half, half);
        }
        let dl = half * d;
        let dr = 2.0 * half - dl;
        let left = if dl > 0.0 { f(a + dl, dl, dr) } else { 0.0 };
        let right = if dl > 0.0 { f(b - dl, dr, dl) } else { 0.0 };
        w * (left + right)
    };
    let t_max = 6.5;
    let mut h = 1.0;
    let mut sum = eval_pair(0.0, &mut f);
    evals += 1;
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let term = eval_pair(k as f64 * h, &mut f);
        evals += 2;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() && k > 3 {
            break;
        }
        k += 1;
    }
    let mut estimate = sum * h * half;
    for _level in 1..=max_level {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let term = eval_pair(k as f64 * h, &mut f);
            evals += 2;
            add += term;
            if term.abs() < 1e-18 * (sum + add).abs() && k > 7 {
                break;
            }
            k += 2;
        }
        sum += add;
        let next = sum * h * half;
        let err = (next - estimate).abs();
        estimate = next;
        if !estimate.is_finite() {
            return Err(LabError::Oracle(format!("tanh-sinh produced a non-finite value on [{a}, {b}]")));
        }
        if err <= rel_tol * estimate.abs() {
            return Ok(Quadrature { value: estimate, error: err, evals });
        }
    }
    Err(LabError::Oracle(format!(
        "tanh-sinh did not reach relative tolerance {rel_tol:e} on [{a}, {b}] within {max_level} levels"
    )))
}

/// Tanh–sinh with a fixed number of refinement levels and no convergence
/// test; used for the inner layers of nested multi-dimensional rules where a
/// uniform node set is preferable to per-call adaptivity.
pub fn tanh_sinh_fixed<F: FnMut(f64, f64, f64) -> f64>(mut f: F, a: f64, b: f64, level: usize) -> f64 {
    let half = 0.5 * (b - a);
    if half == 0.0 {
        return 0.0;
    }
    let h = 0.5f64.powi(level as i32);
    let mut sum = FRAC_PI_2 * f(a + half, half, half);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > 6.5 {
            break;
        }
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        let dl = half * (-u).exp() / cu;
        if dl == 0.0 || w == 0.0 {
            break;
        }
        let dr = 2.0 * half - dl;
        let term = w * (f(a + dl, dl, dr) + f(b - dl, dr, dl));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() && t > 3.0 {
            break;
        }
        k += 1;
    }
    sum * h * half
}

/// Adaptive Simpson with an absolute per-panel tolerance.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&mut f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(samples: &[f64], spacing: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => spacing * (samples[1..n - 1].iter().sum::<f64>() + 0.5 * (samples[0] + samples[n - 1])),
    }
}
