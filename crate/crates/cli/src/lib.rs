//! Command implementations behind the `qretro` binary.
//!
//! Each command takes a serde config (every field has a default except the
//! tomography detector), validates it before doing any work, and writes its
//! results under an output directory. Errors map onto process exit codes
//! through [`CliError::exit_code`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod args;
pub mod fidelity;
pub mod hd;
pub mod negativity;
pub mod table;
pub mod tomo;

pub use table::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read config {path}: {source}")]
    ConfigFile { path: PathBuf, source: std::io::Error },

    #[error("malformed config {path}: {source}")]
    ConfigJson { path: PathBuf, source: serde_json::Error },

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] qretro::Error),
}

impl CliError {
    /// 3 for non-convergence, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(qretro::Error::NoConvergence(_)) => EXIT_NO_CONVERGENCE,
            _ => EXIT_CONFIG,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct Globals {
    pub out: PathBuf,
    /// Overrides the seed of stochastic commands.
    pub seed: Option<u64>,
    /// Overrides the Fock truncation of commands that use one.
    pub dim: Option<usize>,
}

impl Default for Globals {
    fn default() -> Self {
        Self { out: PathBuf::from("."), seed: None, dim: None }
    }
}

/// Read a JSON config, or the type's defaults when no path is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => parse_config(p),
    }
}

pub fn parse_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|source| CliError::ConfigFile { path: path.to_owned(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::ConfigJson { path: path.to_owned(), source })
}

pub(crate) fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.to_owned(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Output { path: path.to_owned(), source })
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(qretro::Error::from)?;
    text.push('\n');
    write_text(path, &text)
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Machine-readable `--version` payload.
pub fn version_json() -> serde_json::Value {
    serde_json::json!({
        "name": "qretro",
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": qretro::VERSION,
        "commands": ["negativity-map", "fidelity-curves", "hd-wigner", "tomo"],
        "exit_codes": { "ok": EXIT_OK, "config_error": EXIT_CONFIG, "no_convergence": EXIT_NO_CONVERGENCE },
    })
}
