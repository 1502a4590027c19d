//! Flat `key=value` run configuration.
//!
//! Every key has one type across all experiments, so a value can be
//! type-checked before the experiment is known. Each experiment then accepts a
//! subset of keys, each with a default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use super::format_f64;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("key {key:?}: expected {expected}, found {value:?}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key:?} is not accepted by experiment {experiment}")]
    KeyNotAllowed { key: String, experiment: Experiment },
    #[error("key {key:?}: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("no experiment given")]
    MissingExperiment,
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("{0}")]
    Usage(String),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Syntax { .. } => "config-syntax",
            ConfigError::DuplicateKey(_) => "duplicate-key",
            ConfigError::TypeMismatch { .. } => "type-mismatch",
            ConfigError::UnknownKey(_) => "unknown-key",
            ConfigError::KeyNotAllowed { .. } => "key-not-allowed",
            ConfigError::InvalidValue { .. } => "invalid-value",
            ConfigError::MissingExperiment => "missing-experiment",
            ConfigError::UnknownExperiment(_) => "unknown-experiment",
            ConfigError::Usage(_) => "usage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    ExpandEval,
    RemainderAudit,
    FitFunction,
    FitPde,
    PdeResidual,
    HeatBench,
    RcdBench,
    PortfolioBench,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::ExpandEval,
        Experiment::RemainderAudit,
        Experiment::FitFunction,
        Experiment::FitPde,
        Experiment::PdeResidual,
        Experiment::HeatBench,
        Experiment::RcdBench,
        Experiment::PortfolioBench,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::ExpandEval => "expand-eval",
            Experiment::RemainderAudit => "remainder-audit",
            Experiment::FitFunction => "fit-function",
            Experiment::FitPde => "fit-pde",
            Experiment::PdeResidual => "pde-residual",
            Experiment::HeatBench => "heat-bench",
            Experiment::RcdBench => "rcd-bench",
            Experiment::PortfolioBench => "portfolio-bench",
        }
    }

    /// Accepted keys and their defaults. `None` marks an optional key with no default.
    pub fn keys(&self) -> &'static [(&'static str, Option<KeyDefault>)] {
        use KeyDefault::{Int as I, Real as R, Text as T};
        match self {
            Experiment::ExpandEval => &[
                ("a1", Some(R(0.5))),
                ("a2", Some(R(-1.0))),
                ("a3", Some(R(2.0))),
                ("x_min", Some(R(0.0))),
                ("x_max", Some(R(5.0))),
                ("n", Some(I(101))),
            ],
            Experiment::RemainderAudit => &[
                ("c", Some(R(1.0))),
                ("alpha", Some(R(1.0))),
                ("f_c", Some(R(0.0))),
                ("fprime_c", Some(R(1.0))),
                ("x_min", Some(R(1.0))),
                ("x_max", Some(R(3.0))),
                ("n", Some(I(41))),
                ("abs_tol", Some(R(1e-10))),
                ("max_depth", Some(I(50))),
            ],
            Experiment::FitFunction => &[
                ("target", Some(T("sin"))),
                ("a1", Some(R(0.5))),
                ("a2", Some(R(-1.0))),
                ("a3", Some(R(2.0))),
                ("x_min", Some(R(0.1))),
                ("x_max", Some(R(2.0))),
                ("n", Some(I(200))),
                ("n_probes", Some(I(64))),
                ("refine_tol", Some(R(1e-10))),
                ("shift_lo", None),
                ("shift_hi", None),
                ("fixed_a2", None),
            ],
            Experiment::FitPde => &[
                ("equation", Some(T("rcd"))),
                ("r", Some(R(0.05))),
                ("sigma", Some(R(0.2))),
                ("k", Some(R(1.0))),
                ("x_min", Some(R(0.5))),
                ("x_max", Some(R(2.0))),
                ("n", Some(I(31))),
                ("t_min", Some(R(0.0))),
                ("t_max", Some(R(1.0))),
                ("nt", Some(I(11))),
                ("bc_penalty_weight", Some(R(1e3))),
                ("n_probes", Some(I(64))),
                ("refine_tol", Some(R(1e-10))),
                ("shift_lo", None),
                ("shift_hi", None),
                ("fixed_a2", None),
            ],
            Experiment::PdeResidual => &[
                ("equation", Some(T("rcd"))),
                ("r", Some(R(0.05))),
                ("sigma", Some(R(0.2))),
                ("k", Some(R(1.0))),
                ("a1", Some(R(0.5))),
                ("a2", Some(R(-1.0))),
                ("a3", Some(R(2.0))),
                ("x_min", Some(R(0.5))),
                ("x_max", Some(R(2.0))),
                ("n", Some(I(101))),
                ("t_min", Some(R(0.0))),
                ("t_max", Some(R(1.0))),
                ("nt", Some(I(101))),
            ],
            Experiment::HeatBench => &[
                ("k", Some(R(1.0))),
                ("n", Some(I(200))),
                ("nt", Some(I(200))),
                ("t_max", Some(R(1.0))),
                ("levels", Some(I(3))),
            ],
            Experiment::RcdBench => &[
                ("r", Some(R(0.05))),
                ("sigma", Some(R(0.2))),
                ("x_min", Some(R(0.1))),
                ("x_max", Some(R(3.0))),
                ("n", Some(I(200))),
                ("nt", Some(I(200))),
                ("t_max", Some(R(1.0))),
                ("strike", Some(R(1.0))),
                ("levels", Some(I(3))),
            ],
            Experiment::PortfolioBench => &[
                ("mu", Some(R(0.10))),
                ("r", Some(R(0.05))),
                ("sigma", Some(R(0.2))),
                ("horizon", Some(R(1.0))),
                ("x0", Some(R(1.0))),
                ("gamma", Some(R(1.0))),
                ("a1", Some(R(0.0))),
                ("a2", Some(R(-1.0))),
                ("a3", Some(R(0.0))),
                ("constant_pi", Some(R(0.0))),
                ("n_paths", Some(I(10_000))),
                ("n_steps", None),
                ("utility", Some(T("log"))),
            ],
        }
    }

    fn accepts(&self, key: &str) -> bool {
        self.keys().iter().any(|(k, _)| *k == key)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeyDefault {
    Real(f64),
    Int(u64),
    Text(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Int,
    Text,
}

impl Kind {
    fn expected(&self) -> &'static str {
        match self {
            Kind::Real => "a real number",
            Kind::Int => "a non-negative integer",
            Kind::Text => "text",
        }
    }
}

/// Type of every known key.
fn key_kind(key: &str) -> Option<Kind> {
    Some(match key {
        "experiment" | "out" | "target" | "equation" | "utility" => Kind::Text,
        "n" | "nt" | "n_probes" | "max_depth" | "n_paths" | "n_steps" | "seed" | "levels" => {
            Kind::Int
        }
        "a1" | "a2" | "a3" | "c" | "alpha" | "f_c" | "fprime_c" | "x_min" | "x_max" | "t_min"
        | "t_max" | "k" | "r" | "sigma" | "mu" | "horizon" | "x0" | "gamma" | "strike"
        | "constant_pi" | "bc_penalty_weight" | "refine_tol" | "abs_tol" | "shift_lo"
        | "shift_hi" | "fixed_a2" => Kind::Real,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Int(u64),
    Text(String),
}

impl Value {
    fn parse(key: &str, raw: &str) -> Result<Self, ConfigError> {
        let kind = key_kind(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        let mismatch = || ConfigError::TypeMismatch {
            key: key.to_string(),
            expected: kind.expected(),
            value: raw.to_string(),
        };
        match kind {
            Kind::Real => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Value::Real)
                .ok_or_else(mismatch),
            Kind::Int => raw.parse::<u64>().map(Value::Int).map_err(|_| mismatch()),
            Kind::Text if raw.is_empty() => Err(mismatch()),
            Kind::Text => Ok(Value::Text(raw.to_string())),
        }
    }

    fn from_default(d: KeyDefault) -> Self {
        match d {
            KeyDefault::Real(v) => Value::Real(v),
            KeyDefault::Int(v) => Value::Int(v),
            KeyDefault::Text(v) => Value::Text(v.to_string()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(v) => f.write_str(&format_f64(*v)),
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

/// Ordered `key=value` pairs before experiment validation.
pub type Pairs = Vec<(String, String)>;

/// Splits config text into pairs. `#` starts a comment anywhere on a line.
pub fn parse_pairs(text: &str) -> Result<Pairs, ConfigError> {
    let mut pairs: Pairs = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw_line.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw_line.to_string(),
            });
        }
        if pairs.iter().any(|(k, _)| k == key) {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Effective parameters: supplied values plus defaults.
    pub params: BTreeMap<String, Value>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Parses a complete config file; the text must name the experiment.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_pairs(None, parse_pairs(text)?, Vec::new())
}

impl RunConfig {
    /// Merges file pairs with command-line pairs (the latter win) and
    /// validates against the experiment's key set.
    pub fn from_pairs(
        experiment: Option<Experiment>,
        file: Pairs,
        flags: Pairs,
    ) -> Result<Self, ConfigError> {
        let mut typed: BTreeMap<String, Value> = BTreeMap::new();
        let mut seen_flags: Vec<&str> = Vec::new();
        for (k, _) in &flags {
            if seen_flags.contains(&k.as_str()) {
                return Err(ConfigError::DuplicateKey(k.clone()));
            }
            seen_flags.push(k);
        }
        for (k, raw) in file.iter().chain(flags.iter()) {
            typed.insert(k.clone(), Value::parse(k, raw)?);
        }

        let experiment = match (experiment, typed.remove("experiment")) {
            (Some(e), _) => e,
            (None, Some(Value::Text(name))) => name.parse()?,
            (None, _) => return Err(ConfigError::MissingExperiment),
        };
        let output_dir = match typed.remove("out") {
            Some(Value::Text(dir)) => PathBuf::from(dir),
            _ => PathBuf::from(DEFAULT_OUT),
        };
        let seed = match typed.remove("seed") {
            Some(Value::Int(s)) => s,
            _ => DEFAULT_SEED,
        };
        if let Some(key) = typed.keys().find(|k| !experiment.accepts(k)) {
            return Err(ConfigError::KeyNotAllowed {
                key: key.clone(),
                experiment,
            });
        }
        for (key, default) in experiment.keys() {
            if let Some(d) = default {
                typed
                    .entry(key.to_string())
                    .or_insert_with(|| Value::from_default(*d));
            }
        }
        Ok(Self {
            experiment,
            params: typed,
            output_dir,
            seed,
        })
    }

    pub fn real(&self, key: &str) -> Option<f64> {
        match self.params.get(key) {
            Some(Value::Real(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn int(&self, key: &str) -> Option<u64> {
        match self.params.get(key) {
            Some(Value::Int(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.params.get(key) {
            Some(Value::Text(v)) => Some(v),
            _ => None,
        }
    }

    pub(crate) fn req_real(&self, key: &str) -> f64 {
        self.real(key)
            .unwrap_or_else(|| panic!("key {key} has a default for this experiment"))
    }

    pub(crate) fn req_int(&self, key: &str) -> u64 {
        self.int(key)
            .unwrap_or_else(|| panic!("key {key} has a default for this experiment"))
    }

    pub(crate) fn req_usize(&self, key: &str) -> usize {
        self.req_int(key) as usize
    }

    pub(crate) fn req_text(&self, key: &str) -> &str {
        self.text(key)
            .unwrap_or_else(|| panic!("key {key} has a default for this experiment"))
    }

    pub(crate) fn invalid(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// `key=value` lines of the effective configuration, sorted by key.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut lines = vec![
            ("experiment".to_string(), self.experiment.to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        lines.extend(self.params.iter().map(|(k, v)| (k.clone(), v.to_string())));
        lines.sort();
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_config("experiment=heat-bench\nk=1.0").unwrap();
        assert_eq!(cfg.experiment, Experiment::HeatBench);
        assert_eq!(cfg.real("k"), Some(1.0));
        assert_eq!(cfg.int("n"), Some(200));
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = parse_config("experiment=heat-bench\nk=1.0\nk=2.0").unwrap_err();
        assert_eq!(err, ConfigError::DuplicateKey("k".into()));
        assert_eq!(err.code(), "duplicate-key");
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let err = parse_config("k=abc").unwrap_err();
        match &err {
            ConfigError::TypeMismatch { key, .. } => assert_eq!(key, "k"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("\"k\""));
        assert!(matches!(
            parse_config("experiment=heat-bench\nn=1.5"),
            Err(ConfigError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = parse_config("# heat\n\nexperiment = heat-bench  # inline\n k = 2.5 \n").unwrap();
        assert_eq!(cfg.real("k"), Some(2.5));
    }

    #[test]
    fn unknown_and_foreign_keys() {
        assert_eq!(
            parse_config("experiment=heat-bench\nbogus=1").unwrap_err(),
            ConfigError::UnknownKey("bogus".into())
        );
        assert!(matches!(
            parse_config("experiment=heat-bench\nmu=0.1"),
            Err(ConfigError::KeyNotAllowed { .. })
        ));
        assert_eq!(parse_config("k=1").unwrap_err(), ConfigError::MissingExperiment);
        assert!(matches!(
            parse_config("experiment=nope"),
            Err(ConfigError::UnknownExperiment(_))
        ));
        assert!(matches!(parse_config("just text"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn flags_override_file_values() {
        let file = parse_pairs("experiment=heat-bench\nk=1.0\nseed=3").unwrap();
        let flags = vec![("k".to_string(), "4".to_string()), ("out".to_string(), "dir".to_string())];
        let cfg = RunConfig::from_pairs(None, file, flags).unwrap();
        assert_eq!(cfg.real("k"), Some(4.0));
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.output_dir, PathBuf::from("dir"));
        let dup = vec![("k".to_string(), "1".to_string()), ("k".to_string(), "2".to_string())];
        assert!(matches!(
            RunConfig::from_pairs(Some(Experiment::HeatBench), Vec::new(), dup),
            Err(ConfigError::DuplicateKey(_))
        ));
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }
}
