use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::goldfix::Hyperparams;

pub const DATA_DIR_ENV: &str = "BD_DATA_DIR";

/// The (learning rate, momentum weight) axes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    etas: Vec<f64>,
    alphas: Vec<f64>,
}

impl GridSpec {
    pub fn new(etas: Vec<f64>, alphas: Vec<f64>) -> Result<Self> {
        if etas.is_empty() || alphas.is_empty() {
            return Err(Error::domain("grid axes must be non-empty"));
        }
        if let Some(e) = etas.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::domain(format!(
                "grid learning rates must be positive, got {e}"
            )));
        }
        if let Some(a) = alphas.iter().find(|&&a| !(0.0..1.0).contains(&a)) {
            return Err(Error::domain(format!(
                "grid momentum weights must lie in [0, 1), got {a}"
            )));
        }
        Ok(Self { etas, alphas })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn cell_count(&self) -> usize {
        self.etas.len() * self.alphas.len()
    }
}

/// The 6×10 grid of learning rates and momentum weights.
pub fn default_grid() -> GridSpec {
    GridSpec {
        etas: vec![0.0001, 0.001, 0.01, 0.016, 0.1, 0.2],
        alphas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 0.825, 0.85, 0.874, 0.9, 0.925],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// IDX files from the data directory.
    Mnist,
    /// [`crate::data::synthetic_blobs`].
    Synthetic,
}

/// Which samples the cross-validation folds are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldSource {
    /// The 90% training part of the train/validation split.
    Train,
    /// Everything, before the train/validation split.
    All,
}

/// Settings for `train` and `grid`, read from a `key=value` file.
///
/// ```text
/// # comment
/// data_dir=data/mnist-10k
/// train_fraction=0.3
/// epochs=2
/// folds=3
/// batch_size=64
/// seed=42
/// etas=0.001,0.016,0.1
/// alphas=0.6,0.874,0.925
/// threads=4
/// dataset=mnist            # or synthetic
/// synthetic_per_class=100
/// fold_source=train        # or all
/// eta=0.016                # single-run learning rate for `train`
/// alpha=0.874
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub train_fraction: f64,
    pub epochs: usize,
    pub folds: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub grid: GridSpec,
    pub threads: usize,
    pub dataset: DatasetKind,
    pub synthetic_per_class: usize,
    pub fold_source: FoldSource,
    pub eta: f64,
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let h = Hyperparams::derived();
        Self {
            data_dir: None,
            train_fraction: 1.0,
            epochs: 1,
            folds: 10,
            batch_size: 64,
            seed: 0,
            grid: default_grid(),
            threads: 1,
            dataset: DatasetKind::Mnist,
            synthetic_per_class: 100,
            fold_source: FoldSource::Train,
            eta: h.eta,
            alpha: h.alpha,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value {value:?} for {key}")))
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_value(line, key, v.trim()))
        .collect()
}

impl RunConfig {
    /// Parse `key=value` lines. Blank lines and `#` comments are ignored;
    /// unknown keys are errors. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut etas = None;
        let mut alphas = None;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line}: expected key=value, got {content:?}"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "data_dir" => cfg.data_dir = Some(PathBuf::from(value)),
                "train_fraction" => cfg.train_fraction = parse_value(line, key, value)?,
                "epochs" => cfg.epochs = parse_value(line, key, value)?,
                "folds" => cfg.folds = parse_value(line, key, value)?,
                "batch_size" => cfg.batch_size = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "etas" => etas = Some(parse_list(line, key, value)?),
                "alphas" => alphas = Some(parse_list(line, key, value)?),
                "threads" => cfg.threads = parse_value(line, key, value)?,
                "synthetic_per_class" => cfg.synthetic_per_class = parse_value(line, key, value)?,
                "eta" => cfg.eta = parse_value(line, key, value)?,
                "alpha" => cfg.alpha = parse_value(line, key, value)?,
                "dataset" => {
                    cfg.dataset = match value {
                        "mnist" => DatasetKind::Mnist,
                        "synthetic" => DatasetKind::Synthetic,
                        _ => {
                            return Err(Error::Config(format!(
                                "line {line}: unknown dataset {value:?}"
                            )))
                        }
                    }
                }
                "fold_source" => {
                    cfg.fold_source = match value {
                        "train" => FoldSource::Train,
                        "all" => FoldSource::All,
                        _ => {
                            return Err(Error::Config(format!(
                                "line {line}: unknown fold_source {value:?}"
                            )))
                        }
                    }
                }
                _ => return Err(Error::Config(format!("line {line}: unknown key {key:?}"))),
            }
        }
        if etas.is_some() || alphas.is_some() {
            let d = default_grid();
            cfg.grid = GridSpec::new(etas.unwrap_or(d.etas), alphas.unwrap_or(d.alphas))
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("epochs", self.epochs),
            ("folds", self.folds),
            ("batch_size", self.batch_size),
            ("threads", self.threads),
            ("synthetic_per_class", self.synthetic_per_class),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) || !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "invalid eta={} alpha={}",
                self.eta, self.alpha
            )));
        }
        Ok(())
    }

    /// `data_dir`, else the `BD_DATA_DIR` environment variable.
    pub fn resolved_data_dir(&self) -> Result<PathBuf> {
        if let Some(dir) = &self.data_dir {
            return Ok(dir.clone());
        }
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Ok(PathBuf::from(dir)),
            _ => Err(Error::Data(format!(
                "no data directory: set data_dir in the config, pass --data-dir or set {DATA_DIR_ENV}"
            ))),
        }
    }
}
