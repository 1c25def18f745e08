//! Experiment description and its `key = value` text format.
//!
//! ```text
//! # Fig. 3 style sweep
//! antennas = 32
//! users = 8
//! pilots = 4, 8
//! powers_db = 5, 10, 15, 20, 25, 30, 35, 40
//! covariance = steered_exponential(0.9)
//! algorithms = awamse, iwmmse_perfect_csi, mmse_only
//! setups = 20
//! trials = 20
//! ```
//!
//! Lists are comma separated, `#` starts a comment, unknown or repeated keys
//! are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use miso_precoding::{AwamseOptions64, CovarianceKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Precoder design compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Awamse,
    Siwmmse,
    IwmmseNaiveOnEstimate,
    IwmmsePerfectCsi,
    MmseOnly,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Awamse, Algorithm::Siwmmse, Algorithm::IwmmseNaiveOnEstimate, Algorithm::IwmmsePerfectCsi, Algorithm::MmseOnly];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Awamse => "awamse",
            Algorithm::Siwmmse => "siwmmse",
            Algorithm::IwmmseNaiveOnEstimate => "iwmmse_naive_on_estimate",
            Algorithm::IwmmsePerfectCsi => "iwmmse_perfect_csi",
            Algorithm::MmseOnly => "mmse_only",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            format!("unknown algorithm `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub antennas: usize,
    pub users: usize,
    /// Pilot counts `T_dl` to sweep.
    pub pilots: Vec<usize>,
    pub powers_db: Vec<f64>,
    pub covariance: CovarianceKind<f64>,
    pub algorithms: Vec<Algorithm>,
    pub setups: usize,
    pub trials: usize,
    /// SIWMMSE sample count `N`.
    pub samples: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Record measured solve times in the CSV; off by default so that output
    /// files depend on the spec alone.
    pub timing: bool,
    /// `sweep` exits with status 2 when a larger share of rows is degenerate.
    pub max_degenerate_fraction: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            antennas: 32,
            users: 8,
            pilots: vec![4],
            powers_db: vec![40.0],
            covariance: CovarianceKind::SteeredExponential { rho: 0.9 },
            algorithms: vec![Algorithm::Awamse],
            setups: 20,
            trials: 20,
            samples: 100,
            seed: 1,
            max_iters: 100,
            rel_tol: 1e-6,
            timing: false,
            max_degenerate_fraction: 0.1,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.antennas == 0 || self.users == 0 {
            return bad("antennas and users must be positive");
        }
        if self.pilots.is_empty() || self.powers_db.is_empty() || self.algorithms.is_empty() {
            return bad("pilots, powers_db and algorithms must be non-empty");
        }
        if let Some(t) = self.pilots.iter().find(|&&t| t == 0 || t > self.antennas) {
            return Err(ConfigError::Invalid(format!("pilot count {t} must lie in 1..={}", self.antennas)));
        }
        if self.powers_db.iter().any(|p| !p.is_finite()) {
            return bad("powers_db must be finite");
        }
        if self.setups == 0 || self.trials == 0 || self.samples == 0 || self.max_iters == 0 {
            return bad("setups, trials, samples and max_iters must be positive");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        if !(0.0..=1.0).contains(&self.max_degenerate_fraction) {
            return bad("max_degenerate_fraction must lie in [0, 1]");
        }
        match self.covariance {
            CovarianceKind::Exponential { rho } | CovarianceKind::SteeredExponential { rho } if !(0.0..1.0).contains(&rho) => {
                bad("correlation coefficient must lie in [0, 1)")
            }
            CovarianceKind::ScaledIdentity { variance } if !(variance > 0.0) => bad("variance must be positive"),
            CovarianceKind::RandomPsd { rank, loading } if rank > self.antennas || !(loading > 0.0) => {
                bad("random_psd needs rank <= antennas and positive loading")
            }
            _ => Ok(()),
        }
    }

    pub fn awamse_options(&self) -> AwamseOptions64 {
        AwamseOptions64 { max_iters: self.max_iters, rel_tol: self.rel_tol, record_trace: false }
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        text.parse()
    }
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

fn parse_scalar<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("`{value}`: {e}"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{value}` is not a boolean")),
    }
}

/// `exponential(0.9)`, `steered_exponential(0.9)`, `scaled_identity(1)` or `random_psd(4, 0.01)`.
pub fn parse_covariance(value: &str) -> Result<CovarianceKind<f64>, String> {
    let (name, args) = match value.split_once('(') {
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| format!("missing `)` in `{value}`"))?;
            (name.trim(), inner.split(',').map(str::trim).collect::<Vec<_>>())
        }
        None => (value.trim(), Vec::new()),
    };
    let arity = |n: usize| if args.len() == n { Ok(()) } else { Err(format!("`{name}` takes {n} argument(s)")) };
    match name {
        "exponential" => {
            arity(1)?;
            Ok(CovarianceKind::Exponential { rho: parse_scalar(args[0])? })
        }
        "steered_exponential" => {
            arity(1)?;
            Ok(CovarianceKind::SteeredExponential { rho: parse_scalar(args[0])? })
        }
        "scaled_identity" => {
            arity(1)?;
            Ok(CovarianceKind::ScaledIdentity { variance: parse_scalar(args[0])? })
        }
        "random_psd" => {
            arity(2)?;
            Ok(CovarianceKind::RandomPsd { rank: parse_scalar(args[0])?, loading: parse_scalar(args[1])? })
        }
        _ => Err(format!("unknown covariance model `{name}`")),
    }
}

impl FromStr for ExperimentSpec {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut spec = ExperimentSpec::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax { line, message };
            let (key, value) = content.split_once('=').ok_or_else(|| syntax("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(syntax(format!("duplicate key `{key}`")));
            }
            let result = match key {
                "antennas" => parse_scalar(value).map(|v| spec.antennas = v),
                "users" => parse_scalar(value).map(|v| spec.users = v),
                "pilots" => parse_list(value).map(|v| spec.pilots = v),
                "powers_db" => parse_list(value).map(|v| spec.powers_db = v),
                "covariance" => parse_covariance(value).map(|v| spec.covariance = v),
                "algorithms" => parse_list(value).map(|v| spec.algorithms = v),
                "setups" => parse_scalar(value).map(|v| spec.setups = v),
                "trials" => parse_scalar(value).map(|v| spec.trials = v),
                "samples" => parse_scalar(value).map(|v| spec.samples = v),
                "seed" => parse_scalar(value).map(|v| spec.seed = v),
                "max_iters" => parse_scalar(value).map(|v| spec.max_iters = v),
                "rel_tol" => parse_scalar(value).map(|v| spec.rel_tol = v),
                "timing" => parse_bool(value).map(|v| spec.timing = v),
                "max_degenerate_fraction" => parse_scalar(value).map(|v| spec.max_degenerate_fraction = v),
                _ => Err(format!("unknown key `{key}`")),
            };
            result.map_err(syntax)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let spec: ExperimentSpec = "
            # comment
            antennas = 8
            users = 4   # trailing
            pilots = 2, 4
            powers_db = 0, 10.5
            covariance = random_psd(3, 0.01)
            algorithms = awamse, mmse_only
            setups = 2
            trials = 3
            samples = 7
            seed = 99
            max_iters = 12
            rel_tol = 1e-4
            timing = true
            max_degenerate_fraction = 0.5
        "
        .parse()
        .unwrap();
        assert_eq!((spec.antennas, spec.users), (8, 4));
        assert_eq!(spec.pilots, vec![2, 4]);
        assert_eq!(spec.powers_db, vec![0.0, 10.5]);
        assert_eq!(spec.covariance, CovarianceKind::RandomPsd { rank: 3, loading: 0.01 });
        assert_eq!(spec.algorithms, vec![Algorithm::Awamse, Algorithm::MmseOnly]);
        assert_eq!((spec.setups, spec.trials, spec.samples, spec.seed, spec.max_iters), (2, 3, 7, 99, 12));
        assert!(spec.timing);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = "antennas = 4\nfoo = 1".parse::<ExperimentSpec>().unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_and_malformed_lines_are_rejected() {
        assert!("users = 2\nusers = 3".parse::<ExperimentSpec>().is_err());
        assert!("users 2".parse::<ExperimentSpec>().is_err());
        assert!("algorithms = awamse, zf".parse::<ExperimentSpec>().is_err());
        assert!("covariance = exponential(0.9, 1)".parse::<ExperimentSpec>().is_err());
    }

    #[test]
    fn semantic_checks() {
        assert!("pilots = 40".parse::<ExperimentSpec>().is_err());
        assert!("covariance = exponential(1.0)".parse::<ExperimentSpec>().is_err());
        assert!("powers_db =".parse::<ExperimentSpec>().is_err());
        assert!("setups = 0".parse::<ExperimentSpec>().is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_linear(40.0) - 1e4).abs() < 1e-9);
        assert_eq!(db_to_linear(0.0), 1.0);
    }
}
