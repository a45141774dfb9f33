//! Regularity and divergence statistics computed from simulated
//! trajectories: structure functions and their scaling exponents,
//! weighted sup-moments, the small-value exponent recursion, conditional
//! regularity of solution differences, and per-δ divergence tables.

use crate::error::{LabError, Result};
use crate::grid::GridSpec;
use crate::solver::{Field, PairTrajectory, Trajectory};
use std::collections::HashMap;

pub const MIN_ANCHORS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Space,
    Time,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Space => "space",
            Direction::Time => "time",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "space" => Ok(Direction::Space),
            "time" => Ok(Direction::Time),
            other => Err(LabError::Input(format!("unknown direction '{other}'"))),
        }
    }
}

/// Anchor times t are kept when t ≥ t_min and every field the increment
/// touches lies at or before t_max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t_min: f64,
    pub t_max: f64,
}

impl Window {
    pub fn of_grid(grid: &GridSpec) -> Self {
        Window { t_min: grid.t_min, t_max: grid.t_end }
    }

    fn contains(&self, t: f64) -> bool {
        // small slack so that lattice times computed as m·dt are not lost
        let eps = 1e-12 * self.t_max.abs().max(1.0);
        t >= self.t_min - eps && t <= self.t_max + eps
    }
}

/// Snapshots of one run: step indices and values on a common grid.
#[derive(Debug, Clone, Copy)]
pub struct Snapshots<'a> {
    pub grid: &'a GridSpec,
    pub steps: &'a [usize],
    pub fields: &'a [Field],
}

impl<'a> Snapshots<'a> {
    pub fn of(traj: &'a Trajectory) -> Result<Self> {
        let grid = traj
            .fields
            .first()
            .map(|f| &f.grid)
            .ok_or_else(|| LabError::InsufficientData("trajectory has no snapshots".into()))?;
        Ok(Snapshots { grid, steps: &traj.steps, fields: &traj.fields })
    }

    pub fn of_diff(pair: &'a PairTrajectory) -> Result<Self> {
        let grid = pair
            .diff
            .first()
            .map(|f| &f.grid)
            .ok_or_else(|| LabError::InsufficientData("pair has no snapshots".into()))?;
        Ok(Snapshots { grid, steps: &pair.first.steps, fields: &pair.diff })
    }
}

fn shifted(grid: &GridSpec, idx: usize, axis: usize, lag: usize) -> usize {
    let n = grid.n;
    if grid.dim == 1 {
        (idx + lag) % n
    } else if axis == 0 {
        (idx + lag * n) % (n * n)
    } else {
        (idx / n) * n + (idx % n + lag) % n
    }
}

/// Sum and count of |increment|^p per lag for one anchor time.
type BatchSums = Vec<(f64, usize)>;

/// Per-anchor-time sums of |increments|^p for one run. Anchors are kept
/// when `mask(snapshot, point)` holds.
fn run_sums(
    snaps: &Snapshots,
    p: f64,
    direction: Direction,
    lags: &[usize],
    window: Window,
    mask: Option<&dyn Fn(usize, usize) -> bool>,
) -> Result<Vec<BatchSums>> {
    let grid = snaps.grid;
    if lags.is_empty() {
        return Err(LabError::Input("no lags given".into()));
    }
    let pos: HashMap<usize, usize> = snaps.steps.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut batches = Vec::new();
    for (i, f) in snaps.fields.iter().enumerate() {
        if !window.contains(f.t) {
            continue;
        }
        let mut sums = vec![(0.0, 0usize); lags.len()];
        match direction {
            Direction::Space => {
                for (j, &lag) in lags.iter().enumerate() {
                    if lag == 0 || lag >= grid.n {
                        return Err(LabError::Input(format!("spatial lag {lag} not resolvable on {} points", grid.n)));
                    }
                    for axis in 0..grid.dim {
                        for x in 0..grid.len() {
                            if mask.is_some_and(|m| !m(i, x)) {
                                continue;
                            }
                            let d = f.values[shifted(grid, x, axis, lag)] - f.values[x];
                            sums[j].0 += pow_abs(d, p);
                            sums[j].1 += 1;
                        }
                    }
                }
            }
            Direction::Time => {
                for (j, &lag) in lags.iter().enumerate() {
                    if lag == 0 {
                        return Err(LabError::Input("temporal lag must be positive".into()));
                    }
                    let Some(&k) = pos.get(&(snaps.steps[i] + lag)) else { continue };
                    let later = &snaps.fields[k];
                    if !window.contains(later.t) {
                        continue;
                    }
                    for x in 0..grid.len() {
                        if mask.is_some_and(|m| !m(i, x)) {
                            continue;
                        }
                        sums[j].0 += pow_abs(later.values[x] - f.values[x], p);
                        sums[j].1 += 1;
                    }
                }
            }
        }
        batches.push(sums);
    }
    Ok(batches)
}

fn pow_abs(d: f64, p: f64) -> f64 {
    if p == 2.0 {
        d * d
    } else {
        d.abs().powf(p)
    }
}

/// Moments of increments at each lag with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub direction: Direction,
    pub p: f64,
    /// Lags in grid points (space) or steps (time).
    pub lag_index: Vec<usize>,
    /// Lags in physical units.
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
    pub stderr: Vec<f64>,
    pub anchors: Vec<usize>,
    pub window: Window,
}

/// Streaming accumulation of structure functions over replicas. Each
/// replica is one batch for the standard error; with a single replica the
/// anchor times are the batches instead.
#[derive(Debug, Clone)]
pub struct StructureAccumulator {
    p: f64,
    direction: Direction,
    lags: Vec<usize>,
    window: Window,
    grid: Option<GridSpec>,
    runs: Vec<Vec<BatchSums>>,
}

impl StructureAccumulator {
    pub fn new(p: f64, direction: Direction, lags: &[usize], window: Window) -> Result<Self> {
        if !(p > 0.0) {
            return Err(LabError::Domain(format!("moment order must be positive, got {p}")));
        }
        if window.t_max < window.t_min {
            return Err(LabError::Input("empty estimation window".into()));
        }
        Ok(StructureAccumulator { p, direction, lags: lags.to_vec(), window, grid: None, runs: Vec::new() })
    }

    /// Per-run sums, computable in parallel and merged with [`push`](Self::push).
    pub fn run_partial(&self, snaps: &Snapshots, mask: Option<&dyn Fn(usize, usize) -> bool>) -> Result<Vec<BatchSums>> {
        run_sums(snaps, self.p, self.direction, &self.lags, self.window, mask)
    }

    pub fn push(&mut self, grid: &GridSpec, partial: Vec<BatchSums>) -> Result<()> {
        match &self.grid {
            Some(g) if g != grid => return Err(LabError::Input("runs live on different grids".into())),
            _ => self.grid = Some(*grid),
        }
        self.runs.push(partial);
        Ok(())
    }

    pub fn add(&mut self, traj: &Trajectory) -> Result<()> {
        let snaps = Snapshots::of(traj)?;
        let partial = self.run_partial(&snaps, None)?;
        self.push(snaps.grid, partial)
    }

    pub fn finish(&self) -> Result<MomentTable> {
        let grid = self.grid.ok_or_else(|| LabError::InsufficientData("no runs accumulated".into()))?;
        let batches: Vec<BatchSums> = if self.runs.len() >= 2 {
            self.runs
                .iter()
                .map(|run| {
                    let mut acc = vec![(0.0, 0usize); self.lags.len()];
                    for b in run {
                        for (a, v) in acc.iter_mut().zip(b) {
                            a.0 += v.0;
                            a.1 += v.1;
                        }
                    }
                    acc
                })
                .collect()
        } else {
            self.runs.iter().flatten().cloned().collect()
        };
        let mut moments = Vec::with_capacity(self.lags.len());
        let mut stderr = Vec::with_capacity(self.lags.len());
        let mut anchors = Vec::with_capacity(self.lags.len());
        for j in 0..self.lags.len() {
            let (sum, count) = batches.iter().fold((0.0, 0usize), |a, b| (a.0 + b[j].0, a.1 + b[j].1));
            if count < MIN_ANCHORS {
                return Err(LabError::InsufficientData(format!(
                    "lag {} has {count} anchor samples, at least {MIN_ANCHORS} are needed",
                    self.lags[j]
                )));
            }
            let mean = sum / count as f64;
            let means: Vec<f64> = batches.iter().filter(|b| b[j].1 > 0).map(|b| b[j].0 / b[j].1 as f64).collect();
            let se = if means.len() >= 2 {
                let m = means.iter().sum::<f64>() / means.len() as f64;
                (means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0) / means.len() as f64).sqrt()
            } else {
                f64::NAN
            };
            moments.push(mean);
            stderr.push(se);
            anchors.push(count);
        }
        let unit = match self.direction {
            Direction::Space => grid.h(),
            Direction::Time => grid.dt,
        };
        Ok(MomentTable {
            direction: self.direction,
            p: self.p,
            lag_index: self.lags.clone(),
            lags: self.lags.iter().map(|&l| l as f64 * unit).collect(),
            moments,
            stderr,
            anchors,
            window: self.window,
        })
    }
}

/// Average |u(t, x+ℓ) − u(t, x)|^p (or the temporal analogue) over the
/// anchors of all runs in the window.
pub fn structure_function(
    trajs: &[Trajectory],
    p: f64,
    direction: Direction,
    lags: &[usize],
    window: Window,
) -> Result<MomentTable> {
    let mut acc = StructureAccumulator::new(p, direction, lags, window)?;
    for t in trajs {
        acc.add(t)?;
    }
    acc.finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conditioning {
    None,
    SmallValue { xi: f64, eps: f64 },
}

/// Scaling exponent from a log-log fit of a moment table.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderReport {
    pub direction: Direction,
    pub p: f64,
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
    pub slope: f64,
    /// slope / p clamped to [0, 1.5].
    pub exponent: f64,
    pub stderr: f64,
    pub window: Window,
    pub conditioning: Conditioning,
    pub anchors: usize,
}

/// Ordinary least squares of ln moment on ln lag.
pub fn fit_holder(table: &MomentTable, conditioning: Conditioning) -> Result<HolderReport> {
    let k = table.lags.len();
    if k < 3 {
        return Err(LabError::Input("a scaling fit needs at least three lags".into()));
    }
    let (lo, hi) = table.lags.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if hi / lo < 8.0 * (1.0 - 1e-12) {
        return Err(LabError::Input(format!("lag band spans {:.2} octaves, at least 3 are needed", (hi / lo).log2())));
    }
    if table.moments.iter().any(|&m| !(m > 0.0)) {
        return Err(LabError::InsufficientData("vanishing moments: the field has no increments".into()));
    }
    let xs: Vec<f64> = table.lags.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = table.moments.iter().map(|v| v.ln()).collect();
    let xm = xs.iter().sum::<f64>() / k as f64;
    let ym = ys.iter().sum::<f64>() / k as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let residual_var = if k > 2 { ssr / (k as f64 - 2.0) / sxx } else { 0.0 };
    // sampling error of each ln moment, propagated through the fit weights
    let sampling_var: f64 = xs
        .iter()
        .zip(table.moments.iter().zip(&table.stderr))
        .map(|(x, (m, se))| {
            let w = (x - xm) / sxx;
            let rel = if se.is_finite() { se / m } else { 0.0 };
            w * w * rel * rel
        })
        .sum();
    let stderr = ((residual_var + sampling_var).sqrt() / table.p).max(f64::EPSILON);
    Ok(HolderReport {
        direction: table.direction,
        p: table.p,
        lags: table.lags.clone(),
        moments: table.moments.clone(),
        slope,
        exponent: (slope / table.p).clamp(0.0, 1.5),
        stderr,
        window: table.window,
        conditioning,
        anchors: table.anchors.iter().copied().min().unwrap_or(0),
    })
}

pub fn holder_exponent(
    trajs: &[Trajectory],
    p: f64,
    direction: Direction,
    lags: &[usize],
    window: Window,
) -> Result<HolderReport> {
    fit_holder(&structure_function(trajs, p, direction, lags, window)?, Conditioning::None)
}

/// sup_t sup_x |u(t,x)|^p e^{−λ|x̃|} per run, x̃ measured from the domain centre.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSupMoment {
    pub p: f64,
    pub lambda: f64,
    pub per_run: Vec<f64>,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub max: f64,
}

/// Linear-interpolated empirical quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn run_weighted_sup(traj: &Trajectory, p: f64, lambda: f64) -> f64 {
    let mut best = 0.0f64;
    for f in &traj.fields {
        let g = &f.grid;
        for (i, &u) in f.values.iter().enumerate() {
            let c = g.coords(i);
            let r2: f64 = c[..g.dim].iter().map(|x| (x - 0.5 * g.l).powi(2)).sum();
            let w = (-lambda * r2.sqrt()).exp();
            if w > 0.0 {
                best = best.max(u.abs().powf(p) * w);
            }
        }
    }
    best
}

pub fn weighted_sup_moment(trajs: &[Trajectory], p: f64, lambda: f64) -> Result<WeightedSupMoment> {
    let per_run: Vec<f64> = trajs.iter().map(|t| run_weighted_sup(t, p, lambda)).collect();
    summarize_weighted(per_run, p, lambda)
}

pub fn summarize_weighted(per_run: Vec<f64>, p: f64, lambda: f64) -> Result<WeightedSupMoment> {
    if !(p > 0.0) || !(lambda > 0.0) {
        return Err(LabError::Domain(format!("need p > 0 and λ > 0, got p = {p}, λ = {lambda}")));
    }
    if per_run.is_empty() {
        return Err(LabError::InsufficientData("no runs".into()));
    }
    let mut sorted = per_run.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(WeightedSupMoment {
        p,
        lambda,
        median: quantile(&sorted, 0.5),
        q10: quantile(&sorted, 0.1),
        q90: quantile(&sorted, 0.9),
        max: sorted[sorted.len() - 1],
        per_run,
    })
}

/// Relative change of the median statistic from grid n to 2n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementCheck {
    pub coarse: f64,
    pub fine: f64,
    pub drift: f64,
    pub stable: bool,
}

pub fn refinement_drift(coarse: &WeightedSupMoment, fine: &WeightedSupMoment) -> RefinementCheck {
    let drift = if coarse.median == 0.0 && fine.median == 0.0 {
        0.0
    } else {
        (fine.median - coarse.median).abs() / coarse.median.abs().max(f64::MIN_POSITIVE)
    };
    RefinementCheck { coarse: coarse.median, fine: fine.median, drift, stable: drift.is_finite() && drift <= 0.15 }
}

fn check_alpha_gamma(alpha: f64, gamma: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::Domain(format!("α must lie in (0, 1), got {alpha}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(LabError::Domain(format!("γ must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// min((1 − α/2)/(1 − γ), 1), with γ = 1 giving 1.
pub fn critical_exponent_limit(alpha: f64, gamma: f64) -> Result<f64> {
    check_alpha_gamma(alpha, gamma)?;
    if gamma >= 1.0 {
        return Ok(1.0);
    }
    Ok(((1.0 - alpha / 2.0) / (1.0 - gamma)).min(1.0))
}

/// ξ₀ = (1 − α/2)/2, ξₙ₊₁ = min(ξₙγ + 1 − α/2, 1)·(1 − 1/(n+3)).
pub fn exponent_recursion(alpha: f64, gamma: f64, steps: usize) -> Result<Vec<f64>> {
    check_alpha_gamma(alpha, gamma)?;
    let mut xi = Vec::with_capacity(steps + 1);
    xi.push(0.5 * (1.0 - alpha / 2.0));
    for n in 0..steps {
        let prev = xi[n];
        xi.push((prev * gamma + 1.0 - alpha / 2.0).min(1.0) * (1.0 - 1.0 / (n as f64 + 3.0)));
    }
    Ok(xi)
}

/// Midpoint of the admissible window (1 − α/2, min((1 − α/2)/(1 − γ), 1)).
pub fn default_conditioning_xi(alpha: f64, gamma: f64) -> Result<f64> {
    Ok(0.5 * ((1.0 - alpha / 2.0) + critical_exponent_limit(alpha, gamma)?))
}

/// Conditional vs unconditional spatial exponent of ũ for one ε.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalReport {
    pub eps: f64,
    pub threshold: f64,
    pub conditional: HolderReport,
    pub unconditional: HolderReport,
    /// Share of window anchors that satisfy the small-value condition.
    pub occupancy: f64,
    pub gap: f64,
}

/// Pointwise min of |v| over the periodic neighbourhood of radius `r`
/// grid points (Euclidean in two dimensions).
fn neighbourhood_min_abs(grid: &GridSpec, v: &[f64], r: usize) -> Vec<f64> {
    let n = grid.n;
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    if grid.dim == 1 {
        (0..n)
            .map(|i| (0..=2 * r).map(|k| abs[(i + n * (r + 1) + k - r) % n]).fold(f64::INFINITY, f64::min))
            .collect()
    } else {
        let ri = r as i64;
        let offsets: Vec<(i64, i64)> = (-ri..=ri)
            .flat_map(|a| (-ri..=ri).map(move |b| (a, b)))
            .filter(|(a, b)| a * a + b * b <= ri * ri)
            .collect();
        let ni = n as i64;
        (0..n * n)
            .map(|idx| {
                let (x, y) = ((idx / n) as i64, (idx % n) as i64);
                offsets
                    .iter()
                    .map(|(a, b)| abs[((x + a).rem_euclid(ni) * ni + (y + b).rem_euclid(ni)) as usize])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// Partial sums for conditional regularity from one pair, for merging
/// across replicas.
#[derive(Debug, Clone)]
pub struct ConditionalPartial {
    pub conditional: Vec<Vec<BatchSums>>,
    pub unconditional: Vec<BatchSums>,
    pub occupied: Vec<usize>,
    pub total: usize,
}

/// How the conditioning radius relates to the increment lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditioningScale {
    /// One radius ε for every lag.
    Fixed,
    /// Radius ε at the smallest lag, growing in proportion to the lag, so
    /// each increment is conditioned at its own scale.
    Coupled,
}

/// Structure-function exponents of ũ over anchors (t, x) with
/// |ũ(t, x̂)| ≤ ε^ξ for some |x̂ − x| ≤ ε, next to the unconditional one.
pub struct ConditionalEstimator {
    pub xi: f64,
    pub scale: ConditioningScale,
    pub eps: Vec<f64>,
    pub p: f64,
    pub lags: Vec<usize>,
    pub window: Window,
    grid: Option<GridSpec>,
    parts: Vec<ConditionalPartial>,
}

impl ConditionalEstimator {
    pub fn new(xi: f64, eps: &[f64], p: f64, lags: &[usize], window: Window) -> Result<Self> {
        if !(xi > 0.0) || eps.is_empty() || !(p > 0.0) {
            return Err(LabError::Domain("need ξ > 0, p > 0 and at least one ε".into()));
        }
        Ok(ConditionalEstimator { xi, scale: ConditioningScale::Coupled, eps: eps.to_vec(), p, lags: lags.to_vec(), window, grid: None, parts: Vec::new() })
    }

    pub fn with_scale(mut self, scale: ConditioningScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn partial(&self, pair: &PairTrajectory) -> Result<ConditionalPartial> {
        let snaps = Snapshots::of_diff(pair)?;
        let grid = snaps.grid;
        if pair.diff.iter().all(|f| f.values.iter().all(|&v| v == 0.0)) {
            return Err(LabError::InsufficientData("ũ vanishes identically: conditioning is degenerate".into()));
        }
        let acc = StructureAccumulator::new(self.p, Direction::Space, &self.lags, self.window)?;
        let unconditional = acc.run_partial(&snaps, None)?;
        let mut conditional = Vec::with_capacity(self.eps.len());
        let mut occupied = Vec::with_capacity(self.eps.len());
        let mut total = 0;
        let base_lag = self.lags.iter().copied().min().unwrap_or(1).max(1) as f64;
        let mask_for = |radius: f64| -> Vec<Vec<bool>> {
            let r = (radius / grid.h() + 1e-9).floor() as usize;
            let threshold = radius.powf(self.xi);
            snaps
                .fields
                .iter()
                .map(|f| {
                    if self.window.contains(f.t) {
                        neighbourhood_min_abs(grid, &f.values, r).iter().map(|&m| m <= threshold).collect()
                    } else {
                        Vec::new()
                    }
                })
                .collect()
        };
        for &eps in &self.eps {
            if eps < 4.0 * grid.h() * (1.0 - 1e-12) {
                return Err(LabError::Input(format!("ε = {eps} is below the resolvable 4h = {}", 4.0 * grid.h())));
            }
            let base = mask_for(eps);
            occupied.push(base.iter().map(|m| m.iter().filter(|&&b| b).count()).sum());
            total = base.iter().map(|m| m.len()).sum();
            let mut merged: Vec<BatchSums> = Vec::new();
            for (j, &lag) in self.lags.iter().enumerate() {
                let scaled;
                let masks = match self.scale {
                    ConditioningScale::Fixed => &base,
                    ConditioningScale::Coupled => {
                        scaled = mask_for(eps * lag as f64 / base_lag);
                        &scaled
                    }
                };
                let mask = |i: usize, x: usize| masks[i].get(x).copied().unwrap_or(false);
                let sums = run_sums(&snaps, self.p, Direction::Space, &[lag], self.window, Some(&mask))?;
                if j == 0 {
                    merged = sums.iter().map(|_| vec![(0.0, 0usize); self.lags.len()]).collect();
                }
                for (m, s) in merged.iter_mut().zip(&sums) {
                    m[j] = s[0];
                }
            }
            conditional.push(merged);
        }
        Ok(ConditionalPartial { conditional, unconditional, occupied, total })
    }

    pub fn push(&mut self, grid: &GridSpec, part: ConditionalPartial) -> Result<()> {
        match &self.grid {
            Some(g) if g != grid => return Err(LabError::Input("pairs live on different grids".into())),
            _ => self.grid = Some(*grid),
        }
        self.parts.push(part);
        Ok(())
    }

    pub fn add(&mut self, pair: &PairTrajectory) -> Result<()> {
        let part = self.partial(pair)?;
        let grid = pair.diff[0].grid;
        self.push(&grid, part)
    }

    pub fn finish(&self) -> Result<Vec<ConditionalReport>> {
        let grid = self.grid.ok_or_else(|| LabError::InsufficientData("no pairs accumulated".into()))?;
        let mut base = StructureAccumulator::new(self.p, Direction::Space, &self.lags, self.window)?;
        for part in &self.parts {
            base.push(&grid, part.unconditional.clone())?;
        }
        let unconditional = fit_holder(&base.finish()?, Conditioning::None)?;
        let total: usize = self.parts.iter().map(|p| p.total).sum();
        let mut out = Vec::with_capacity(self.eps.len());
        for (e, &eps) in self.eps.iter().enumerate() {
            let occupied: usize = self.parts.iter().map(|p| p.occupied[e]).sum();
            if occupied < MIN_ANCHORS {
                return Err(LabError::InsufficientData(format!(
                    "ε = {eps}: {occupied} of {total} anchors satisfy the small-value condition, at least {MIN_ANCHORS} are needed"
                )));
            }
            let mut acc = StructureAccumulator::new(self.p, Direction::Space, &self.lags, self.window)?;
            for part in &self.parts {
                acc.push(&grid, part.conditional[e].clone())?;
            }
            let conditional = fit_holder(&acc.finish()?, Conditioning::SmallValue { xi: self.xi, eps })?;
            out.push(ConditionalReport {
                eps,
                threshold: eps.powf(self.xi),
                gap: conditional.exponent - unconditional.exponent,
                conditional,
                unconditional: unconditional.clone(),
                occupancy: occupied as f64 / total.max(1) as f64,
            });
        }
        Ok(out)
    }
}

pub fn conditional_regularity(
    pairs: &[PairTrajectory],
    xi: f64,
    eps: &[f64],
    p: f64,
    lags: &[usize],
    window: Window,
) -> Result<Vec<ConditionalReport>> {
    let mut est = ConditionalEstimator::new(xi, eps, p, lags, window)?;
    for pair in pairs {
        est.add(pair)?;
    }
    est.finish()
}

/// ∫|ũ| and sup|ũ| at each snapshot of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSummary {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub sup: Vec<f64>,
}

impl PairSummary {
    pub fn of(pair: &PairTrajectory) -> Self {
        PairSummary {
            times: pair.diff.iter().map(|f| f.t).collect(),
            l1: pair.diff.iter().map(Field::l1_norm).collect(),
            sup: pair.diff.iter().map(Field::sup_abs).collect(),
        }
    }

    pub fn sup_l1(&self) -> f64 {
        self.l1.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub delta: f64,
    pub replicas: usize,
    pub times: Vec<f64>,
    pub median_l1: Vec<f64>,
    pub median_sup: Vec<f64>,
    /// Median over replicas of sup_t ∫|ũ|.
    pub median_sup_l1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    /// Rows in the order given.
    pub rows: Vec<GapRow>,
    /// Whether median sup_t ∫|ũ| strictly decreases as δ decreases.
    pub strictly_decreasing: bool,
}

/// Per-δ divergence table from groups of pair summaries.
pub fn uniqueness_gap(groups: &[(f64, Vec<PairSummary>)]) -> Result<UniquenessReport> {
    let mut rows = Vec::with_capacity(groups.len());
    let mut reference: Option<&Vec<f64>> = None;
    for (delta, runs) in groups {
        if runs.is_empty() {
            return Err(LabError::InsufficientData(format!("no replicas for δ = {delta}")));
        }
        for r in runs {
            match reference {
                Some(t) if t != &r.times => {
                    return Err(LabError::Input("pairs do not share snapshot times".into()));
                }
                _ => reference = Some(&r.times),
            }
        }
        let times = runs[0].times.clone();
        let per_time = |get: &dyn Fn(&PairSummary) -> &Vec<f64>| -> Vec<f64> {
            (0..times.len()).map(|i| median(&runs.iter().map(|r| get(r)[i]).collect::<Vec<_>>())).collect()
        };
        rows.push(GapRow {
            delta: *delta,
            replicas: runs.len(),
            median_l1: per_time(&|r| &r.l1),
            median_sup: per_time(&|r| &r.sup),
            median_sup_l1: median(&runs.iter().map(PairSummary::sup_l1).collect::<Vec<_>>()),
            times,
        });
    }
    let mut order: Vec<&GapRow> = rows.iter().collect();
    order.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let strictly_decreasing = order.windows(2).all(|w| w[1].median_sup_l1 < w[0].median_sup_l1);
    Ok(UniquenessReport { rows, strictly_decreasing })
}
