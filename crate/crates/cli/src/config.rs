//! Plain-text experiment configuration: `section.key = value` lines with
//! `#` comments, command-line overrides and a canonical fingerprint.

use crate::error::CliError;
use sha2::{Digest, Sha256};
use spdelab::rng::DEFAULT_SEED;
use spdelab::solver::U0Spec;
use spdelab::{GridSpec, KernelKind, KernelSpec, SigmaSpec};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Keys that do not influence results and stay out of the fingerprint.
const UNFINGERPRINTED: &[&str] = &["run.out"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<(String, String)>, CliError> {
    let body = line.split_once('#').map_or(line, |(b, _)| b).trim();
    if body.is_empty() {
        return Ok(None);
    }
    let (key, value) = body
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("line {lineno}: expected 'section.key = value', got '{body}'")))?;
    let key = key.trim();
    let value = value.trim();
    let valid = key.split_once('.').is_some_and(|(s, k)| {
        let ok = |p: &str| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        ok(s) && ok(k)
    });
    if !valid {
        return Err(CliError::Parse(format!("line {lineno}: key '{key}' is not of the form section.key")));
    }
    if value.is_empty() {
        return Err(CliError::Parse(format!("line {lineno}: key '{key}' has no value")));
    }
    Ok(Some((key.to_string(), value.to_string())))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if let Some((k, v)) = parse_line(line, i + 1)? {
                if entries.insert(k.clone(), v).is_some() {
                    return Err(CliError::Parse(format!("line {}: duplicate key '{k}'", i + 1)));
                }
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Precondition(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Apply a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        match parse_line(assignment, 0)? {
            Some((k, v)) => {
                self.entries.insert(k, v);
                Ok(())
            }
            None => Err(CliError::Parse(format!("empty override '{assignment}'"))),
        }
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Sorted `key = value` lines of everything that affects results.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            if !UNFINGERPRINTED.contains(&k.as_str()) {
                out.push_str(k);
                out.push_str(" = ");
                out.push_str(v);
                out.push('\n');
            }
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Parse(format!("{key} = {v}: {e}"))))
            .transpose()
    }

    pub fn value<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?.ok_or_else(|| CliError::Parse(format!("missing required key '{key}'")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T::Err: std::fmt::Display,
        T: Clone,
    {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|p| p.trim().parse::<T>().map_err(|e| CliError::Parse(format!("{key} = {v}: {e}"))))
                .collect(),
        }
    }
}

/// Parses an unsigned integer in decimal or `0x` hexadecimal.
pub fn parse_seed(text: &str) -> Result<u64, CliError> {
    let t = text.trim();
    let r = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    r.map_err(|e| CliError::Parse(format!("seed '{text}': {e}")))
}

/// Everything an experiment needs, validated.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    pub sigma: SigmaSpec,
    pub u0: U0Spec,
    pub perturbation: U0Spec,
    pub seed: u64,
    pub replicas: usize,
    pub deltas: Vec<f64>,
    /// Conditioning radii in grid spacings.
    pub eps: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda: f64,
    pub out: PathBuf,
    pub fingerprint: String,
}

fn sigma_from(raw: &RawConfig) -> Result<SigmaSpec, CliError> {
    let kind = raw.value("sigma.kind", "lipschitz-linear".to_string())?;
    let scale = raw.value("sigma.scale", 1.0)?;
    Ok(match kind.as_str() {
        "lipschitz-linear" => SigmaSpec::LipschitzLinear { scale },
        "holder-power" => SigmaSpec::HolderPower { scale, gamma: raw.required("sigma.gamma")? },
        "sqrt-plus" => SigmaSpec::SqrtPlus { scale },
        "viot" => SigmaSpec::Viot { scale },
        "constant" => SigmaSpec::Constant { value: raw.value("sigma.value", 1.0)? },
        other => return Err(CliError::Parse(format!("unknown sigma.kind '{other}'"))),
    })
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let dim = raw.value("grid.dim", 1usize)?;
        let mut grid = GridSpec::new(dim, raw.value("grid.n", 256usize)?, raw.value("grid.l", 1.0)?, raw.value("grid.t_end", 0.05)?)
            .map_err(CliError::precondition)?;
        if let Some(dt) = raw.parsed::<f64>("grid.dt")? {
            grid = grid.with_dt(dt).map_err(CliError::precondition)?;
        }
        if let Some(t_min) = raw.parsed::<f64>("grid.t_min")? {
            grid = grid.with_t_min(t_min).map_err(CliError::precondition)?;
        }
        let kind: KernelKind = raw.value("kernel.kind", "riesz".to_string())?.parse().map_err(CliError::parse)?;
        let alpha = if kind == KernelKind::White { 0.0 } else { raw.value("kernel.alpha", 0.5)? };
        let kernel = KernelSpec::new(kind, alpha, raw.value("kernel.amplitude", 1.0)?, dim).map_err(CliError::precondition)?;
        let sigma = sigma_from(&raw)?;
        sigma.validate().map_err(CliError::precondition)?;
        let u0: U0Spec = raw.value("init.u0", "constant:1".to_string())?.parse().map_err(CliError::parse)?;
        let perturbation: U0Spec = raw
            .value("init.perturbation", format!("bump:{},{},1", 0.5 * grid.l, 0.1 * grid.l))?
            .parse()
            .map_err(CliError::parse)?;
        let seed = match raw.get("run.seed") {
            Some(s) => parse_seed(s)?,
            None => DEFAULT_SEED,
        };
        let replicas = raw.value("run.replicas", 8usize)?;
        if replicas == 0 {
            return Err(CliError::Precondition("run.replicas must be at least 1".into()));
        }
        let fingerprint = raw.fingerprint();
        Ok(ExperimentConfig {
            grid,
            kernel,
            sigma,
            u0,
            perturbation,
            seed,
            replicas,
            deltas: raw.list("pair.deltas", &[0.1, 0.01, 0.001])?,
            eps: raw.list("estimator.eps", &[4.0])?,
            p: raw.list("estimator.p", &[2.0])?,
            lambda: raw.value("estimator.lambda", 1.0)?,
            out: PathBuf::from(raw.value("run.out", "out".to_string())?),
            fingerprint,
            raw,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let raw = RawConfig::parse("# header\ngrid.n = 128  # points\n\n  kernel.alpha=0.3\n").unwrap();
        assert_eq!(raw.get("grid.n"), Some("128"));
        assert_eq!(raw.get("kernel.alpha"), Some("0.3"));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(RawConfig::parse("grid.n 128"), Err(CliError::Parse(_))));
        assert!(matches!(RawConfig::parse("n = 128"), Err(CliError::Parse(_))));
        assert!(matches!(RawConfig::parse("grid.n ="), Err(CliError::Parse(_))));
        assert!(matches!(RawConfig::parse("grid.n = 1\ngrid.n = 2"), Err(CliError::Parse(_))));
    }

    #[test]
    fn fingerprint_ignores_order_comments_and_output() {
        let a = RawConfig::parse("grid.n = 128\nkernel.alpha = 0.3\nrun.out = a").unwrap();
        let b = RawConfig::parse("# x\nkernel.alpha   =   0.3\nrun.out = elsewhere\ngrid.n=128").unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = RawConfig::parse("grid.n = 128\nkernel.alpha = 0.4").unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = RawConfig::parse("kernel.alpha = 0.3").unwrap();
        raw.set("kernel.alpha=0.7").unwrap();
        assert_eq!(raw.get("kernel.alpha"), Some("0.7"));
        assert!(raw.set("alpha").is_err());
    }

    #[test]
    fn builds_defaults() {
        let cfg = ExperimentConfig::from_raw(RawConfig::default()).unwrap();
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.grid.n, 256);
        assert_eq!(cfg.deltas, vec![0.1, 0.01, 0.001]);
    }

    #[test]
    fn invalid_specs_are_preconditions() {
        let raw = RawConfig::parse("kernel.alpha = 1.5").unwrap();
        assert!(matches!(ExperimentConfig::from_raw(raw), Err(CliError::Precondition(_))));
        let raw = RawConfig::parse("grid.n = 100").unwrap();
        assert!(matches!(ExperimentConfig::from_raw(raw), Err(CliError::Precondition(_))));
        let raw = RawConfig::parse("grid.n = many").unwrap();
        assert!(matches!(ExperimentConfig::from_raw(raw), Err(CliError::Parse(_))));
    }

    #[test]
    fn seeds_accept_hex() {
        assert_eq!(parse_seed("0xC0FFEE").unwrap(), 0xC0FFEE);
        assert_eq!(parse_seed("42").unwrap(), 42);
        assert!(parse_seed("x").is_err());
    }
}
