//! Experiment runner: one experiment per invocation, deterministic CSV
//! artifacts, and a `manifest.txt` written last with a SHA-256 line per file.

mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{parse_config, parse_pairs, ConfigError, Experiment, RunConfig, Value};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TOOL_NAME: &str = "taylor-audit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{experiment}: {source}")]
    Numeric {
        experiment: Experiment,
        #[source]
        source: crate::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn code(&self) -> &'static str {
        match self {
            RunError::Config(e) => e.code(),
            RunError::Numeric { source, .. } => source.code(),
            RunError::Io { .. } => "io",
        }
    }
}

/// Round-trip exact decimal rendering with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV artifact built row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub file_name: &'static str,
    text: String,
}

impl CsvTable {
    pub fn new(file_name: &'static str, header: &str) -> Self {
        Self {
            file_name,
            text: format!("{header}\n"),
        }
    }

    pub fn push_row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let row: Vec<String> = fields.into_iter().map(|s| s.as_ref().to_string()).collect();
        self.text.push_str(&row.join(","));
        self.text.push('\n');
    }

    pub fn contents(&self) -> &str {
        &self.text
    }
}

/// Files and summary scalars produced by one experiment.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<CsvTable>,
    pub summary: Vec<(String, String)>,
}

impl Outcome {
    pub(crate) fn scalar(&mut self, key: &str, v: f64) {
        self.summary.push((key.to_string(), format_f64(v)));
    }

    pub(crate) fn text(&mut self, key: &str, v: impl ToString) {
        self.summary.push((key.to_string(), v.to_string()));
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactDigest {
    pub file_name: String,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub config: Vec<(String, String)>,
    pub artifacts: Vec<ArtifactDigest>,
    pub summary: Vec<(String, String)>,
    pub wall_clock_seconds: f64,
    pub version: &'static str,
    pub path: PathBuf,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = format!("tool={TOOL_NAME}\nversion={}\n", self.version);
        for (k, v) in &self.config {
            out.push_str(&format!("config.{k}={v}\n"));
        }
        for (k, v) in &self.summary {
            out.push_str(&format!("summary.{k}={v}\n"));
        }
        out.push_str(&format!("wall_clock_seconds={:.3}\n", self.wall_clock_seconds));
        for a in &self.artifacts {
            out.push_str(&format!("sha256 {} {}\n", a.sha256, a.file_name));
        }
        out
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs the experiment in memory without touching the filesystem.
pub fn execute(config: &RunConfig) -> Result<Outcome, RunError> {
    experiments::dispatch(config)
}

/// Runs the experiment, writes its CSVs into `config.output_dir`, then the manifest.
pub fn run(config: &RunConfig) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    let outcome = execute(config)?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut artifacts = Vec::with_capacity(outcome.tables.len());
    for table in &outcome.tables {
        let path = dir.join(table.file_name);
        write_file(&path, table.contents())?;
        artifacts.push(ArtifactDigest {
            file_name: table.file_name.to_string(),
            sha256: sha256_hex(table.contents().as_bytes()),
        });
    }
    let manifest = RunManifest {
        experiment: config.experiment,
        config: config.echo(),
        artifacts,
        summary: outcome.summary,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        version: TOOL_VERSION,
        path: dir.join(MANIFEST_FILE),
    };
    write_file(&manifest.path, &manifest.render())?;
    Ok(manifest)
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Command-line form: `<experiment> [--config <file>] [--key value ...] [--out <dir>] [--seed <n>]`.
/// `--key=value` is accepted as well.
pub fn parse_cli_args<S: AsRef<str>>(args: &[S]) -> Result<RunConfig, RunError> {
    let mut experiment = None;
    let mut config_file: Option<PathBuf> = None;
    let mut flags = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let arg = args[i].as_ref();
        if let Some(flag) = arg.strip_prefix("--") {
            let (key, value) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    i += 1;
                    let v = args.get(i).ok_or_else(|| {
                        ConfigError::Usage(format!("flag --{flag} needs a value"))
                    })?;
                    (flag.to_string(), v.as_ref().to_string())
                }
            };
            if key == "config" {
                if config_file.replace(PathBuf::from(value)).is_some() {
                    return Err(ConfigError::DuplicateKey("config".into()).into());
                }
            } else {
                flags.push((key, value));
            }
        } else if experiment.is_none() {
            experiment = Some(arg.parse::<Experiment>()?);
        } else {
            return Err(ConfigError::Usage(format!("unexpected argument {arg:?}")).into());
        }
        i += 1;
    }
    let file_pairs = match &config_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    Ok(RunConfig::from_pairs(experiment, file_pairs, flags)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for v in [0.1, -1.0 / 3.0, 6.02214076e23, 1e-300, 0.0, 2.5] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn cli_args_parse() {
        let cfg = parse_cli_args(&["heat-bench", "--k", "2", "--seed=7", "--out", "x"]).unwrap();
        assert_eq!(cfg.experiment, Experiment::HeatBench);
        assert_eq!(cfg.real("k"), Some(2.0));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.output_dir, PathBuf::from("x"));
        assert!(parse_cli_args(&["heat-bench", "--k"]).is_err());
        assert!(parse_cli_args(&["heat-bench", "extra"]).is_err());
        assert_eq!(parse_cli_args(&["nope"]).unwrap_err().code(), "unknown-experiment");
        assert_eq!(parse_cli_args(&["heat-bench", "--k", "abc"]).unwrap_err().code(), "type-mismatch");
    }

    #[test]
    fn csv_table_layout() {
        let mut t = CsvTable::new("a.csv", "x,y");
        t.push_row(["1", "2"]);
        assert_eq!(t.contents(), "x,y\n1,2\n");
    }
}
