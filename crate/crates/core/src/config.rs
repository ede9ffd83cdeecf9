//! Run configuration read from a flat `key = value` file.
//!
//! Blank lines and lines starting with `#` are ignored. Keys use snake case
//! (`query_mode`); dashes are accepted too, so command-line flag names can be
//! fed through [`RunConfig::set`] unchanged. Relative paths are resolved
//! against the directory of the file they were read from.

use std::fs;
use std::path::{Path, PathBuf};

use crate::encoder::{QueryMode, TargetMode};
use crate::error::{Error, Result};
use crate::filter::{default_nu, default_rho, FilterConfig, FilterMethod};
use crate::rerank::Rerank;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub judgments: Option<PathBuf>,
    pub codebook: Option<PathBuf>,
    pub query_mode: QueryMode,
    pub target_mode: TargetMode,
    pub filter: FilterMethod,
    pub nu_th: Option<f64>,
    pub rho_th: Option<f64>,
    pub rerank: Rerank,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub exclude_query_images: bool,
    pub train_days: Vec<String>,
    pub eval_days: Vec<String>,
    /// Codebook size for `build-codebook`.
    pub words: usize,
    pub max_iters: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            queries: None,
            judgments: None,
            codebook: None,
            query_mode: QueryMode::FullImage,
            target_mode: TargetMode::FullImage,
            filter: FilterMethod::Nndr,
            nu_th: None,
            rho_th: None,
            rerank: Rerank::TimeSort,
            seed: 0,
            out: None,
            exclude_query_images: false,
            train_days: Vec::new(),
            eval_days: Vec::new(),
            words: crate::codebook::DEFAULT_WORDS,
            max_iters: 50,
        }
    }
}

fn parse_threshold(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: `{value}` is not a number")))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("{key}: {v} outside [0, 1]")));
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: `{value}` is not a non-negative integer")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::invalid(format!("{key}: `{value}` is not a boolean"))),
    }
}

fn parse_list(value: &str) -> Vec<String> {
    value
        .split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, base).map_err(|(line, e)| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    /// Applies `key = value` lines; errors carry the 1-based line number.
    pub fn apply_text(&mut self, text: &str, base: &Path) -> std::result::Result<(), (usize, Error)> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| (i + 1, Error::invalid(format!("expected `key = value`, got `{line}`"))))?;
            self.set_in(key.trim(), value.trim(), base).map_err(|e| (i + 1, e))?;
        }
        Ok(())
    }

    /// Sets one key. Paths are taken as given.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_in(key, value, Path::new(""))
    }

    fn set_in(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || Some(base.join(value));
        match key.replace('-', "_").as_str() {
            "manifest" => self.manifest = path(),
            "queries" => self.queries = path(),
            "judgments" => self.judgments = path(),
            "codebook" => self.codebook = path(),
            "out" => self.out = path(),
            "query_mode" => self.query_mode = value.parse()?,
            "target_mode" => self.target_mode = value.parse()?,
            "filter" => self.filter = value.parse()?,
            "nu_th" => self.nu_th = Some(parse_threshold(key, value)?),
            "rho_th" => self.rho_th = Some(parse_threshold(key, value)?),
            "rerank" => self.rerank = value.parse()?,
            "seed" => self.seed = parse_int(key, value)?,
            "exclude_query_images" => self.exclude_query_images = parse_bool(key, value)?,
            "train_days" => self.train_days = parse_list(value),
            "eval_days" => self.eval_days = parse_list(value),
            "words" | "k" => self.words = parse_int(key, value)?,
            "max_iters" => self.max_iters = parse_int(key, value)?,
            other => return Err(Error::invalid(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Configured thresholds, falling back to the per-query-mode defaults.
    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            method: self.filter,
            nu_th: self.nu_th.unwrap_or(default_nu(self.query_mode)),
            rho_th: self.rho_th.unwrap_or(default_rho(self.query_mode)),
        }
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("missing `{name}` (set it in the config file or with --{name})")))
    }
}
