//! Exponential-Euler integration of the mild form
//! `u_{m+1} = S_dt (u_m + σ(u_m) ΔW_m)` on the periodic grid, where `S_dt`
//! is applied exactly in Fourier space.

use crate::error::{LabError, Result};
use crate::grid::GridSpec;
use crate::io::{fnv1a, read_records, write_records, RecordHeader};
use crate::kernels::{semigroup_multiplier, KernelSpec};
use crate::noise::{spectral_variances, NoiseField, NoiseSampler};
use crate::rng::RngStream;
use crate::sigma::SigmaSpec;
use crate::spectral::GridFft;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// One spatial snapshot of the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub t: f64,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, t: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::Input(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::Input(format!("field value {i} is not finite")));
        }
        Ok(Field { grid, t, values })
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Riemann sum of |u| over the torus.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }
}

/// Initial condition.
#[derive(Debug, Clone, PartialEq)]
pub enum U0Spec {
    Constant(f64),
    /// offset + amplitude · sin(2π k x / l) along the first axis.
    Sine { k: f64, amplitude: f64, offset: f64 },
    /// Smooth compactly supported bump `height · exp(1 − 1/(1 − (r/width)²))`
    /// around `center` (same coordinate on every axis), periodic distance.
    Bump { center: f64, width: f64, height: f64 },
    /// First record of a field file; its grid must match.
    File(PathBuf),
}

impl U0Spec {
    pub fn canonical(&self) -> String {
        match self {
            U0Spec::Constant(c) => format!("constant:{c:e}"),
            U0Spec::Sine { k, amplitude, offset } => format!("sine:{k:e},{amplitude:e},{offset:e}"),
            U0Spec::Bump { center, width, height } => format!("bump:{center:e},{width:e},{height:e}"),
            U0Spec::File(p) => format!("file:{}", p.display()),
        }
    }
}

impl fmt::Display for U0Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for U0Spec {
    type Err = LabError;

    /// `constant:c`, `sine:k,a,offset`, `bump:center,width,height` or `file:path`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let nums = |expected: usize| -> Result<Vec<f64>> {
            let v: std::result::Result<Vec<f64>, _> = rest.split(',').map(|p| p.trim().parse::<f64>()).collect();
            match v {
                Ok(v) if v.len() == expected => Ok(v),
                _ => Err(LabError::Input(format!("'{s}' needs {expected} comma-separated numbers"))),
            }
        };
        match kind.trim() {
            "constant" => Ok(U0Spec::Constant(nums(1)?[0])),
            "sine" => {
                let v = nums(3)?;
                Ok(U0Spec::Sine { k: v[0], amplitude: v[1], offset: v[2] })
            }
            "bump" => {
                let v = nums(3)?;
                Ok(U0Spec::Bump { center: v[0], width: v[1], height: v[2] })
            }
            "file" if !rest.is_empty() => Ok(U0Spec::File(PathBuf::from(rest))),
            _ => Err(LabError::Input(format!("unknown initial condition '{s}'"))),
        }
    }
}

fn smooth_bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn periodic_distance(x: f64, c: f64, l: f64) -> f64 {
    let d = (x - c).rem_euclid(l);
    d.min(l - d)
}

/// Sample the initial condition on the grid.
pub fn initial_field(grid: &GridSpec, u0: &U0Spec) -> Result<Field> {
    grid.validate()?;
    let values: Vec<f64> = match u0 {
        U0Spec::Constant(c) => vec![*c; grid.len()],
        U0Spec::Sine { k, amplitude, offset } => (0..grid.len())
            .map(|i| offset + amplitude * (2.0 * PI * k * grid.coords(i)[0] / grid.l).sin())
            .collect(),
        U0Spec::Bump { center, width, height } => {
            if !(*width > 0.0) {
                return Err(LabError::Input(format!("bump width must be positive, got {width}")));
            }
            (0..grid.len())
                .map(|i| {
                    let c = grid.coords(i);
                    let r2: f64 = c[..grid.dim].iter().map(|x| periodic_distance(*x, *center, grid.l).powi(2)).sum();
                    height * smooth_bump(r2.sqrt() / width)
                })
                .collect()
        }
        U0Spec::File(path) => {
            let records = read_records(path)?;
            let (h, v) = records
                .into_iter()
                .next()
                .ok_or_else(|| LabError::Input(format!("{} holds no field record", path.display())))?;
            if h.dim as usize != grid.dim || h.n as usize != grid.n || h.l != grid.l {
                return Err(LabError::Input(format!(
                    "{} holds a dim {} n {} l {} field, grid is dim {} n {} l {}",
                    path.display(),
                    h.dim,
                    h.n,
                    h.l,
                    grid.dim,
                    grid.n,
                    grid.l
                )));
            }
            v
        }
    };
    Field::new(*grid, 0.0, values)
}

/// Write a field as a single record.
pub fn write_field(path: &Path, field: &Field, kernel: &KernelSpec, stream: RngStream) -> Result<()> {
    let header = header_for(&field.grid, kernel, stream);
    write_records(path, &[(header, &field.values)])
}

fn header_for(grid: &GridSpec, kernel: &KernelSpec, stream: RngStream) -> RecordHeader {
    RecordHeader {
        dim: grid.dim as u8,
        n: grid.n as u32,
        l: grid.l,
        dt: grid.dt,
        kernel: kernel.kind,
        alpha: kernel.alpha,
        stream,
    }
}

/// Count and size of post-step projections into the state space.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClipStats {
    pub count: u64,
    pub max_magnitude: f64,
}

impl ClipStats {
    fn merge(&mut self, other: ClipStats) {
        self.count += other.count;
        self.max_magnitude = self.max_magnitude.max(other.max_magnitude);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimOptions {
    /// Clip to [0, ∞) for sqrt-plus and to [0, 1] for viot after each step.
    pub clip: bool,
}

fn clip_range(sigma: &SigmaSpec, opts: &SimOptions) -> Option<(f64, f64)> {
    if !opts.clip {
        return None;
    }
    match sigma {
        SigmaSpec::SqrtPlus { .. } => Some((0.0, f64::INFINITY)),
        SigmaSpec::Viot { .. } => Some((0.0, 1.0)),
        _ => None,
    }
}

/// Owns the transforms, semigroup factors and working buffers for one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: GridSpec,
    sigma: SigmaSpec,
    sampler: NoiseSampler,
    fft: GridFft,
    decay: Vec<f64>,
    buf: Vec<Complex64>,
    noise: Vec<f64>,
    clip: Option<(f64, f64)>,
    stats: ClipStats,
}

impl Stepper {
    pub fn new(grid: &GridSpec, kernel: &KernelSpec, sigma: &SigmaSpec, opts: SimOptions) -> Result<Self> {
        grid.validate()?;
        sigma.validate()?;
        let sampler = NoiseSampler::new(grid, kernel)?;
        let n = grid.len() as f64;
        let decay = (0..grid.len())
            .map(|i| semigroup_multiplier(&[grid.wavenumber_sq(i).sqrt()], grid.dt) / n)
            .collect();
        Ok(Stepper {
            grid: *grid,
            sigma: sigma.clone(),
            sampler,
            fft: GridFft::new(grid),
            decay,
            buf: vec![Complex64::new(0.0, 0.0); grid.len()],
            noise: vec![0.0; grid.len()],
            clip: clip_range(sigma, &opts),
            stats: ClipStats::default(),
        })
    }

    pub fn clip_stats(&self) -> ClipStats {
        self.stats
    }

    /// Draw ΔW for step `step` of `stream` into the internal buffer.
    pub fn draw_noise(&mut self, stream: RngStream, step: usize) -> Result<&[f64]> {
        self.sampler.sample_into(self.grid.dt, stream.at_step(step as u64), &mut self.noise)?;
        Ok(&self.noise)
    }

    /// Advance `u` in place by one step using freshly drawn noise.
    pub fn advance(&mut self, u: &mut [f64], stream: RngStream, step: usize) -> Result<()> {
        self.draw_noise(stream, step)?;
        let noise = std::mem::take(&mut self.noise);
        let r = self.apply(u, &noise, step);
        self.noise = noise;
        r
    }

    /// Advance two states with one shared noise draw.
    pub fn advance_pair(&mut self, u1: &mut [f64], u2: &mut [f64], stream: RngStream, step: usize) -> Result<()> {
        self.draw_noise(stream, step)?;
        let noise = std::mem::take(&mut self.noise);
        let r = self.apply(u1, &noise, step).and_then(|_| self.apply(u2, &noise, step));
        self.noise = noise;
        r
    }

    /// `u ← S_dt(u + σ(u) dw)`.
    pub fn apply(&mut self, u: &mut [f64], dw: &[f64], step: usize) -> Result<()> {
        for ((z, &v), &w) in self.buf.iter_mut().zip(u.iter()).zip(dw) {
            let s = self.sigma.eval(v)?;
            *z = Complex64::new(v + s * w, 0.0);
        }
        self.fft.forward(&mut self.buf);
        for (z, m) in self.buf.iter_mut().zip(&self.decay) {
            *z *= *m;
        }
        self.fft.inverse(&mut self.buf);
        for (i, (v, z)) in u.iter_mut().zip(&self.buf).enumerate() {
            if !z.re.is_finite() {
                return Err(LabError::BlowUp { step, detail: format!("non-finite value at grid index {i}") });
            }
            *v = z.re;
        }
        if let Some((lo, hi)) = self.clip {
            for v in u.iter_mut() {
                let c = v.clamp(lo, hi);
                if c != *v {
                    self.stats.count += 1;
                    self.stats.max_magnitude = self.stats.max_magnitude.max((c - *v).abs());
                    *v = c;
                }
            }
        }
        Ok(())
    }
}

/// One exponential-Euler step from `u` with the increment `dw`.
pub fn step(u: &Field, dw: &NoiseField, sspec: &SigmaSpec) -> Result<Field> {
    if u.grid != dw.grid {
        return Err(LabError::Input("field and noise live on different grids".into()));
    }
    if dw.dt != u.grid.dt {
        return Err(LabError::Input(format!("noise drawn with dt {} but grid dt is {}", dw.dt, u.grid.dt)));
    }
    let mut stepper = Stepper::new(&u.grid, &dw.kernel, sspec, SimOptions::default())?;
    let mut values = u.values.clone();
    stepper.apply(&mut values, &dw.values, dw.stream.step_index as usize)?;
    Ok(Field { grid: u.grid, t: u.t + u.grid.dt, values })
}

/// A sequence of snapshots with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub fingerprint: u64,
    pub kernel: KernelSpec,
    pub stream: RngStream,
    pub steps: Vec<usize>,
    pub fields: Vec<Field>,
    pub clip: ClipStats,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.t).collect()
    }

    /// Dump every snapshot as a record tagged with its step index.
    pub fn write(&self, path: &Path) -> Result<()> {
        let records: Vec<(RecordHeader, &[f64])> = self
            .steps
            .iter()
            .zip(&self.fields)
            .map(|(&s, f)| (header_for(&f.grid, &self.kernel, self.stream.at_step(s as u64)), f.values.as_slice()))
            .collect();
        write_records(path, &records)
    }
}

/// A run that stopped early, with whatever was recorded before.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationFailure {
    pub error: LabError,
    pub partial: Trajectory,
}

impl fmt::Display for SimulationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} snapshots recorded)", self.error, self.partial.fields.len())
    }
}

impl std::error::Error for SimulationFailure {}

impl From<SimulationFailure> for LabError {
    fn from(f: SimulationFailure) -> Self {
        f.error
    }
}

/// Fingerprint of everything that determines a trajectory.
pub fn fingerprint(grid: &GridSpec, kernel: &KernelSpec, sigma: &SigmaSpec, u0: &U0Spec, stream: RngStream) -> u64 {
    let text = format!(
        "{}\n{}\n{}\nu0 {}\nseed={} replica={}",
        grid.canonical(),
        kernel.canonical(),
        sigma.canonical(),
        u0.canonical(),
        stream.master_seed,
        stream.replica_id
    );
    fnv1a(text.as_bytes())
}

/// Convert snapshot times to step indices.
pub fn snapshot_steps(grid: &GridSpec, times: &[f64]) -> Result<Vec<usize>> {
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= 0.0) || !grid.on_step_lattice(t) {
            return Err(LabError::Input(format!("snapshot time {t} is not on the step lattice of dt {}", grid.dt)));
        }
        let s = (t / grid.dt).round() as usize;
        if let Some(&last) = steps.last() {
            if s <= last {
                return Err(LabError::Input("snapshot times must be strictly increasing".into()));
            }
        }
        steps.push(s);
    }
    Ok(steps)
}

fn check_steps(steps: &[usize]) -> Result<()> {
    if steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Input("snapshot steps must be strictly increasing".into()));
    }
    Ok(())
}

pub fn simulate(
    grid: &GridSpec,
    kspec: &KernelSpec,
    sspec: &SigmaSpec,
    u0: &U0Spec,
    stream: RngStream,
    snapshot_times: &[f64],
) -> std::result::Result<Trajectory, SimulationFailure> {
    let empty = || empty_trajectory(grid, kspec, sspec, u0, stream);
    let steps = snapshot_steps(grid, snapshot_times).map_err(|error| SimulationFailure { error, partial: empty() })?;
    simulate_steps(grid, kspec, sspec, u0, stream, &steps, SimOptions::default())
}

fn empty_trajectory(grid: &GridSpec, kspec: &KernelSpec, sspec: &SigmaSpec, u0: &U0Spec, stream: RngStream) -> Trajectory {
    Trajectory {
        fingerprint: fingerprint(grid, kspec, sspec, u0, stream),
        kernel: *kspec,
        stream,
        steps: Vec::new(),
        fields: Vec::new(),
        clip: ClipStats::default(),
    }
}

/// As [`simulate`] with snapshots given as step indices.
pub fn simulate_steps(
    grid: &GridSpec,
    kspec: &KernelSpec,
    sspec: &SigmaSpec,
    u0: &U0Spec,
    stream: RngStream,
    snapshot_steps: &[usize],
    opts: SimOptions,
) -> std::result::Result<Trajectory, SimulationFailure> {
    let mut traj = empty_trajectory(grid, kspec, sspec, u0, stream);
    let fail = |error: LabError, partial: Trajectory| SimulationFailure { error, partial };
    if let Err(e) = check_steps(snapshot_steps) {
        return Err(fail(e, traj));
    }
    let setup = initial_field(grid, u0).and_then(|f| Ok((f, Stepper::new(grid, kspec, sspec, opts)?)));
    let (init, mut stepper) = match setup {
        Ok(v) => v,
        Err(e) => return Err(fail(e, traj)),
    };
    let mut u = init.values;
    let mut next = 0;
    let last = snapshot_steps.last().copied().unwrap_or(0);
    for m in 0..=last {
        if next < snapshot_steps.len() && snapshot_steps[next] == m {
            traj.steps.push(m);
            traj.fields.push(Field { grid: *grid, t: m as f64 * grid.dt, values: u.clone() });
            next += 1;
        }
        if m == last {
            break;
        }
        if let Err(e) = stepper.advance(&mut u, stream, m) {
            traj.clip = stepper.clip_stats();
            return Err(fail(e, traj));
        }
    }
    traj.clip = stepper.clip_stats();
    Ok(traj)
}

/// Two solutions driven by one noise realization, and their difference.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTrajectory {
    pub first: Trajectory,
    pub second: Trajectory,
    /// ũ = u¹ − u² at each snapshot.
    pub diff: Vec<Field>,
}

impl PairTrajectory {
    /// sup over snapshots of ∫|ũ|.
    pub fn sup_l1_diff(&self) -> f64 {
        self.diff.iter().map(Field::l1_norm).fold(0.0, f64::max)
    }
}

/// Run u¹ from `u0` and u² from `u0 + delta · perturbation` with shared noise.
#[allow(clippy::too_many_arguments)]
pub fn simulate_pair(
    grid: &GridSpec,
    kspec: &KernelSpec,
    sspec: &SigmaSpec,
    u0: &U0Spec,
    perturbation: &U0Spec,
    delta: f64,
    stream: RngStream,
    snapshot_steps: &[usize],
    opts: SimOptions,
) -> Result<PairTrajectory> {
    check_steps(snapshot_steps)?;
    let base = initial_field(grid, u0)?;
    let mut u1 = base.values.clone();
    let mut u2 = base.values;
    if delta != 0.0 {
        let p = initial_field(grid, perturbation)?;
        for (v, q) in u2.iter_mut().zip(&p.values) {
            *v += delta * q;
        }
    }
    let mut stepper = Stepper::new(grid, kspec, sspec, opts)?;
    let mut first = empty_trajectory(grid, kspec, sspec, u0, stream);
    let mut second = first.clone();
    second.fingerprint = fnv1a(format!("{:016x} perturbed delta={delta:e} by {perturbation}", first.fingerprint).as_bytes());
    let mut diff = Vec::with_capacity(snapshot_steps.len());
    let last = snapshot_steps.last().copied().unwrap_or(0);
    let mut next = 0;
    for m in 0..=last {
        if next < snapshot_steps.len() && snapshot_steps[next] == m {
            let t = m as f64 * grid.dt;
            for (traj, u) in [(&mut first, &u1), (&mut second, &u2)] {
                traj.steps.push(m);
                traj.fields.push(Field { grid: *grid, t, values: u.clone() });
            }
            diff.push(Field { grid: *grid, t, values: u1.iter().zip(&u2).map(|(a, b)| a - b).collect() });
            next += 1;
        }
        if m == last {
            break;
        }
        stepper.advance_pair(&mut u1, &mut u2, stream, m)?;
    }
    let stats = stepper.clip_stats();
    first.clip = stats;
    second.clip = stats;
    Ok(PairTrajectory { first, second, diff })
}

/// Exact per-point variance of the scheme after `steps` steps for
/// additive noise (σ ≡ 1) started from zero:
/// `dt Σ_k a_k² Σ_{i=1}^{steps} e^{−4π²|ξ_k|² dt i}`.
pub fn additive_variance(grid: &GridSpec, kspec: &KernelSpec, steps: usize) -> Result<f64> {
    let var = spectral_variances(grid, kspec)?;
    let mut total = 0.0;
    for (i, a2) in var.iter().enumerate() {
        let q = semigroup_multiplier(&[grid.wavenumber_sq(i).sqrt()], grid.dt).powi(2);
        let geometric = if q == 1.0 { steps as f64 } else { q * (1.0 - q.powi(steps as i32)) / (1.0 - q) };
        total += a2 * geometric;
    }
    Ok(total * grid.dt)
}

/// Merge the clip statistics of several runs.
pub fn merged_clip_stats<'a>(runs: impl IntoIterator<Item = &'a Trajectory>) -> ClipStats {
    let mut s = ClipStats::default();
    for t in runs {
        s.merge(t.clip);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;

    fn grid1(n: usize) -> GridSpec {
        GridSpec::new(1, n, 1.0, 0.01).unwrap()
    }

    #[test]
    fn initial_conditions() {
        let g = grid1(64);
        assert!(initial_field(&g, &U0Spec::Constant(1.0)).unwrap().values.iter().all(|&v| v == 1.0));
        let s = initial_field(&g, &U0Spec::Sine { k: 1.0, amplitude: 1.0, offset: 0.0 }).unwrap();
        assert!((s.values[16] - 1.0).abs() < 1e-15);
        let b = initial_field(&g, &U0Spec::Bump { center: 0.5, width: 0.25, height: 2.0 }).unwrap();
        assert_eq!(b.values[32], 2.0);
        assert_eq!(b.values[0], 0.0);
        assert!(b.values.iter().all(|&v| (0.0..=2.0).contains(&v)));
    }

    #[test]
    fn u0_parsing_roundtrip() {
        for s in ["constant:1", "sine:1,0.5,2", "bump:0.5,0.1,1", "file:/tmp/x.bin"] {
            let u: U0Spec = s.parse().unwrap();
            let again: U0Spec = u.canonical().parse().unwrap();
            assert_eq!(u, again);
        }
        assert!("sine:1,2".parse::<U0Spec>().is_err());
        assert!("blob:1".parse::<U0Spec>().is_err());
    }

    #[test]
    fn field_file_roundtrip_and_grid_check() {
        let dir = std::env::temp_dir().join(format!("spdelab-u0-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("u0.bin");
        let g = grid1(32);
        let f = initial_field(&g, &U0Spec::Sine { k: 3.0, amplitude: 0.7, offset: 0.1 }).unwrap();
        write_field(&path, &f, &KernelSpec::white(), RngStream::new(1, 2, 3)).unwrap();
        let back = initial_field(&g, &U0Spec::File(path.clone())).unwrap();
        assert_eq!(back.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), f.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert!(matches!(initial_field(&grid1(64), &U0Spec::File(path)), Err(LabError::Input(_))));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn eigenfunction_decay_is_exact() {
        let g = grid1(128);
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let u = initial_field(&g, &U0Spec::Sine { k: 1.0, amplitude: 1.0, offset: 0.0 }).unwrap();
        let dw = NoiseField {
            grid: g,
            kernel: k,
            dt: g.dt,
            stream: RngStream::new(0, 0, 0),
            values: vec![0.0; 128],
            imag_residue: 0.0,
        };
        let next = step(&u, &dw, &SigmaSpec::LipschitzLinear { scale: 1.0 }).unwrap();
        let factor = (-2.0 * PI * PI * g.dt).exp();
        for (a, b) in next.values.iter().zip(&u.values) {
            assert!((a - factor * b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sigma_ignores_noise() {
        let g = grid1(64);
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let u = initial_field(&g, &U0Spec::Bump { center: 0.3, width: 0.2, height: 1.0 }).unwrap();
        let sampler = NoiseSampler::new(&g, &k).unwrap();
        let dw = sampler.sample(g.dt, RngStream::new(3, 0, 0)).unwrap();
        let zero = NoiseField { values: vec![0.0; 64], ..dw.clone() };
        let sig = SigmaSpec::Constant { value: 0.0 };
        assert_eq!(step(&u, &dw, &sig).unwrap(), step(&u, &zero, &sig).unwrap());
    }

    #[test]
    fn zero_amplitude_keeps_constants() {
        let g = grid1(64);
        let k = KernelSpec::new(KernelKind::Riesz, 0.5, 0.0, 1).unwrap();
        let sig = SigmaSpec::LipschitzLinear { scale: 1.0 };
        let t = simulate(&g, &k, &sig, &U0Spec::Constant(2.5), RngStream::new(1, 0, 0), &[0.0, 10.0 * g.dt, 50.0 * g.dt]).unwrap();
        for f in &t.fields {
            assert!(f.values.iter().all(|&v| (v - 2.5).abs() < 1e-13));
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let g = grid1(64);
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let sig = SigmaSpec::HolderPower { scale: 1.0, gamma: 0.7 };
        let times = [0.0, 20.0 * g.dt, 40.0 * g.dt];
        let a = simulate(&g, &k, &sig, &U0Spec::Constant(1.0), RngStream::new(5, 1, 0), &times).unwrap();
        let b = simulate(&g, &k, &sig, &U0Spec::Constant(1.0), RngStream::new(5, 1, 0), &times).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps, vec![0, 20, 40]);
        let c = simulate(&g, &k, &sig, &U0Spec::Constant(1.0), RngStream::new(5, 2, 0), &times).unwrap();
        assert_ne!(a.fingerprint, c.fingerprint);
        assert_ne!(a.fields[2], c.fields[2]);
    }

    #[test]
    fn off_lattice_snapshot_rejected() {
        let g = grid1(64);
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let sig = SigmaSpec::LipschitzLinear { scale: 1.0 };
        let err = simulate(&g, &k, &sig, &U0Spec::Constant(1.0), RngStream::new(1, 0, 0), &[0.37 * g.dt]).unwrap_err();
        assert!(matches!(err.error, LabError::Input(_)));
        assert!(err.partial.fields.is_empty());
    }

    #[test]
    fn blow_up_reports_step_and_keeps_partial() {
        let g = grid1(32).with_dt(1.0).unwrap();
        let k = KernelSpec::new(KernelKind::BoundedConstant, 0.0, 1e300, 1).unwrap();
        let sig = SigmaSpec::LipschitzLinear { scale: 1e300 };
        let err = simulate_steps(&g, &k, &sig, &U0Spec::Constant(1e300), RngStream::new(1, 0, 0), &[0, 1, 50], SimOptions::default()).unwrap_err();
        assert!(matches!(err.error, LabError::BlowUp { .. }), "{err}");
        assert!(!err.partial.fields.is_empty());
    }

    #[test]
    fn pair_with_zero_delta_is_bitwise_equal() {
        let g = grid1(64);
        let k = KernelSpec::riesz(0.3, 1).unwrap();
        let sig = SigmaSpec::HolderPower { scale: 1.0, gamma: 0.8 };
        let bump = U0Spec::Bump { center: 0.5, width: 0.1, height: 1.0 };
        let p = simulate_pair(&g, &k, &sig, &U0Spec::Constant(1.0), &bump, 0.0, RngStream::new(2, 0, 0), &[0, 10, 30], SimOptions::default()).unwrap();
        assert!(p.diff.iter().all(|f| f.values.iter().all(|v| v.to_bits() == 0)));
        assert_eq!(p.sup_l1_diff(), 0.0);
    }

    #[test]
    fn pair_without_noise_is_heat_flow_of_perturbation() {
        let g = grid1(64);
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let bump = U0Spec::Bump { center: 0.5, width: 0.2, height: 1.0 };
        let p = simulate_pair(&g, &k, &SigmaSpec::Constant { value: 0.0 }, &U0Spec::Constant(1.0), &bump, 0.1, RngStream::new(2, 0, 0), &[0, 25], SimOptions::default()).unwrap();
        // exact heat flow of the bump: mode-wise decay of its DFT
        let b = initial_field(&g, &bump).unwrap();
        let fft = GridFft::new(&g);
        let mut z: Vec<Complex64> = b.values.iter().map(|&v| Complex64::new(0.1 * v, 0.0)).collect();
        fft.forward(&mut z);
        for (i, c) in z.iter_mut().enumerate() {
            *c *= semigroup_multiplier(&[g.wavenumber_sq(i).sqrt()], 25.0 * g.dt) / 64.0;
        }
        fft.inverse(&mut z);
        for (d, e) in p.diff[1].values.iter().zip(&z) {
            assert!((-d - e.re).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_sigma_is_affine() {
        // u(u0_a + u0_b, noise) = u(u0_a, noise) + heat flow of u0_b
        let g = grid1(64);
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let sig = SigmaSpec::Constant { value: 0.7 };
        let a = U0Spec::Sine { k: 2.0, amplitude: 0.3, offset: 1.0 };
        let run = |u0: &U0Spec, s: &SigmaSpec| {
            simulate_steps(&g, &k, s, u0, RngStream::new(8, 0, 0), &[40], SimOptions::default()).unwrap().fields[0].values.clone()
        };
        let noisy_a = run(&a, &sig);
        let noisy_zero = run(&U0Spec::Constant(0.0), &sig);
        let quiet_a = run(&a, &SigmaSpec::Constant { value: 0.0 });
        for i in 0..64 {
            assert!((noisy_a[i] - noisy_zero[i] - quiet_a[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn clipping_is_counted() {
        let g = grid1(64);
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let sig = SigmaSpec::SqrtPlus { scale: 20.0 };
        let u0 = U0Spec::Constant(0.01);
        let plain = simulate_steps(&g, &k, &sig, &u0, RngStream::new(4, 0, 0), &[200], SimOptions::default()).unwrap();
        assert_eq!(plain.clip.count, 0);
        let clipped = simulate_steps(&g, &k, &sig, &u0, RngStream::new(4, 0, 0), &[200], SimOptions { clip: true }).unwrap();
        assert!(clipped.clip.count > 0);
        assert!(clipped.fields[0].values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn additive_variance_matches_monte_carlo() {
        let g = GridSpec::new(1, 64, 1.0, 1.0).unwrap();
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let sig = SigmaSpec::Constant { value: 1.0 };
        let checkpoints = [10usize, 50, 200];
        let reps = 500;
        let mut sums = [Vec::new(), Vec::new(), Vec::new()];
        for r in 0..reps {
            let t = simulate_steps(&g, &k, &sig, &U0Spec::Constant(0.0), RngStream::new(12, r, 0), &checkpoints, SimOptions::default()).unwrap();
            for (j, f) in t.fields.iter().enumerate() {
                sums[j].push(f.values.iter().map(|v| v * v).sum::<f64>() / 64.0);
            }
        }
        for (j, &m) in checkpoints.iter().enumerate() {
            let exact = additive_variance(&g, &k, m).unwrap();
            let mean = sums[j].iter().sum::<f64>() / reps as f64;
            let sd = (sums[j].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
            let se = sd / (reps as f64).sqrt();
            assert!((mean - exact).abs() < 3.0 * se, "step {m}: {mean} vs {exact} (se {se})");
        }
    }

    #[test]
    fn trajectory_dump_roundtrip() {
        let dir = std::env::temp_dir().join(format!("spdelab-traj-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = grid1(32);
        let k = KernelSpec::riesz(0.5, 1).unwrap();
        let t = simulate_steps(&g, &k, &SigmaSpec::LipschitzLinear { scale: 1.0 }, &U0Spec::Constant(1.0), RngStream::new(1, 4, 0), &[0, 5, 9], SimOptions::default()).unwrap();
        let path = dir.join("t.bin");
        t.write(&path).unwrap();
        let recs = read_records(&path).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].0.stream.step_index, 9);
        assert_eq!(recs[2].1, t.fields[2].values);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
