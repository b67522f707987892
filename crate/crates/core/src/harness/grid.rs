use rayon::prelude::*;

use super::config::{DatasetKind, FoldSource, GridSpec, RunConfig};
use crate::data::{self, LabeledSet};
use crate::error::{Error, Result};
use crate::nn::{
    build_appendix_cnn, evaluate, train_epoch, Dataset, Metrics, Network, SgdMomentum,
};
use crate::rng::{derive_seed, SplitMix64};

/// Seed for one (eta index, alpha index, fold) work item.
///
/// The indices are packed into one integer (16 bits per grid axis, 16 bits
/// of fold) before mixing, and the mixer is a bijection, so distinct work
/// items below 2¹⁶ per axis always get distinct seeds.
pub fn cell_seed(seed: u64, eta_idx: usize, alpha_idx: usize, fold: usize) -> u64 {
    let packed =
        ((eta_idx as u64) << 32) | ((alpha_idx as u64 & 0xFFFF) << 16) | (fold as u64 & 0xFFFF);
    derive_seed(seed, packed)
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub eta: f64,
    pub alpha: f64,
    /// Validation-fold accuracy, fold order.
    pub fold_accuracies: Vec<f64>,
    /// Held-out accuracy of each fold's model; empty when no held-out set.
    pub test_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl CellResult {
    pub fn new(eta: f64, alpha: f64, fold_accuracies: Vec<f64>, test_accuracies: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&fold_accuracies);
        Self {
            eta,
            alpha,
            fold_accuracies,
            test_accuracies,
            mean,
            std,
        }
    }
}

/// Cells in eta-major order over the grid axes, plus the ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub etas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub cells: Vec<CellResult>,
    pub top10: Vec<(f64, f64)>,
    pub best: Vec<(f64, f64)>,
    /// What the held-out accuracies were measured on, if anything.
    pub test_source: Option<String>,
}

impl GridReport {
    /// An unranked report; call [`rank`] to fill `top10` and `best`.
    pub fn new(etas: Vec<f64>, alphas: Vec<f64>, cells: Vec<CellResult>) -> Self {
        Self {
            etas,
            alphas,
            cells,
            top10: vec![],
            best: vec![],
            test_source: None,
        }
    }

    /// Whether the cells are exactly the eta-major product of the axes.
    pub fn is_grid_complete(&self) -> bool {
        self.cells.len() == self.etas.len() * self.alphas.len()
            && self.cells.iter().enumerate().all(|(i, c)| {
                let (e, a) = (i / self.alphas.len(), i % self.alphas.len());
                c.eta == self.etas[e] && c.alpha == self.alphas[a]
            })
    }

    /// Competition rank (1 = best) of the cell at `(eta, alpha)`.
    pub fn rank_of(&self, eta: f64, alpha: f64) -> Option<usize> {
        let cell = self
            .cells
            .iter()
            .find(|c| c.eta == eta && c.alpha == alpha)?;
        Some(1 + self.cells.iter().filter(|c| c.mean > cell.mean).count())
    }
}

/// Fill `top10` and `best`.
///
/// `best` is every cell attaining the maximum mean, in grid order. `top10`
/// is the ten highest means, cutoff ties going to lower eta and then lower
/// alpha; if more than ten cells share the maximum, `top10` is all of them.
pub fn rank(report: &GridReport) -> GridReport {
    let mut out = report.clone();
    let Some(max) = report.cells.iter().map(|c| c.mean).reduce(f64::max) else {
        out.top10.clear();
        out.best.clear();
        return out;
    };
    out.best = report
        .cells
        .iter()
        .filter(|c| c.mean == max)
        .map(|c| (c.eta, c.alpha))
        .collect();

    let mut order: Vec<&CellResult> = report.cells.iter().collect();
    order.sort_by(|a, b| {
        b.mean
            .total_cmp(&a.mean)
            .then(a.eta.total_cmp(&b.eta))
            .then(a.alpha.total_cmp(&b.alpha))
    });
    let keep = order.len().min(10).max(out.best.len());
    out.top10 = order[..keep].iter().map(|c| (c.eta, c.alpha)).collect();
    out
}

/// The samples a grid run needs: a pool to fold, and an optional held-out
/// set that every fold's model is also scored on.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub pool: LabeledSet,
    pub holdout: Option<(String, LabeledSet)>,
}

/// Load and split the data for `config`.
///
/// The source (MNIST files or synthetic blobs) is subsampled to
/// `train_fraction`, then split 90/10 into train and validation. Folds come
/// from the training part or from everything, per `fold_source`. The
/// held-out set is the `t10k` test files when present, otherwise the 10%
/// validation part (only with `fold_source=train`, where it is disjoint
/// from every fold).
pub fn prepare_experiment(config: &RunConfig) -> Result<Experiment> {
    let (source, test) = load_source(config)?;
    let source = subsample(source, config)?;
    let (train, val) = data::split_train_val(&source, derive_seed(config.seed, 2))?;
    let pool = match config.fold_source {
        FoldSource::Train => train,
        FoldSource::All => source,
    };
    let holdout = match (test, config.fold_source) {
        (Some(t), _) => Some(("test files".to_string(), t)),
        (None, FoldSource::Train) if !val.is_empty() => Some(("validation split".to_string(), val)),
        _ => None,
    };
    Ok(Experiment { pool, holdout })
}

fn load_source(config: &RunConfig) -> Result<(LabeledSet, Option<LabeledSet>)> {
    match config.dataset {
        DatasetKind::Mnist => {
            let files = data::load_mnist_dir(&config.resolved_data_dir()?)?;
            Ok((files.train, files.test))
        }
        DatasetKind::Synthetic => Ok((
            data::synthetic_blobs(
                config.synthetic_per_class,
                data::CLASSES,
                derive_seed(config.seed, 3),
            )?,
            None,
        )),
    }
}

fn subsample(source: LabeledSet, config: &RunConfig) -> Result<LabeledSet> {
    if config.train_fraction < 1.0 {
        data::stratified_subset(&source, config.train_fraction, derive_seed(config.seed, 4))
    } else {
        Ok(source)
    }
}

/// Train a fresh [`build_appendix_cnn`] network for `epochs` epochs. The
/// network is initialised from `seed`; shuffling and dropout draw from a
/// generator derived from it. `on_epoch` sees the 1-based epoch and its metrics.
pub fn train_model(
    train: &Dataset,
    eta: f64,
    alpha: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    mut on_epoch: impl FnMut(usize, &Network, Metrics) -> Result<()>,
) -> Result<Network> {
    let mut net = build_appendix_cnn(seed);
    let mut opt = SgdMomentum::for_network(eta, alpha, &net)?;
    let mut rng = SplitMix64::new(derive_seed(seed, 0));
    for epoch in 1..=epochs {
        let m = train_epoch(&mut net, &mut opt, train, batch_size, &mut rng)?;
        on_epoch(epoch, &net, m)?;
    }
    Ok(net)
}

struct WorkItem {
    eta_idx: usize,
    alpha_idx: usize,
    fold: usize,
}

/// Load data per `config` and run the cross-validated grid.
pub fn run_grid(config: &RunConfig) -> Result<GridReport> {
    config.validate()?;
    let exp = prepare_experiment(config)?;
    run_grid_on(config, &exp)
}

/// Run every (eta, alpha, fold) work item on a pool of `config.threads`
/// workers. Each item trains its own network from its own seed, and results
/// are collected in grid order, so the report does not depend on the
/// thread count.
pub fn run_grid_on(config: &RunConfig, exp: &Experiment) -> Result<GridReport> {
    let grid: &GridSpec = &config.grid;
    let plan = data::make_folds(exp.pool.labels(), config.folds, derive_seed(config.seed, 5))?;
    let folds: Vec<(Dataset, Dataset)> = (0..plan.k())
        .map(|f| {
            let (train, val) = plan.split(f);
            (
                exp.pool.select(&train).to_dataset(),
                exp.pool.select(&val).to_dataset(),
            )
        })
        .collect();
    let holdout = exp.holdout.as_ref().map(|(_, set)| set.to_dataset());

    let mut items = Vec::new();
    for eta_idx in 0..grid.etas().len() {
        for alpha_idx in 0..grid.alphas().len() {
            for fold in 0..plan.k() {
                items.push(WorkItem {
                    eta_idx,
                    alpha_idx,
                    fold,
                });
            }
        }
    }

    let run_item = |item: &WorkItem| -> Result<(f64, Option<f64>)> {
        let (eta, alpha) = (grid.etas()[item.eta_idx], grid.alphas()[item.alpha_idx]);
        let seed = cell_seed(config.seed, item.eta_idx, item.alpha_idx, item.fold);
        let (train, val) = &folds[item.fold];
        let result = train_model(
            train,
            eta,
            alpha,
            config.epochs,
            config.batch_size,
            seed,
            |_, _, _| Ok(()),
        )
        .and_then(|net| {
            let acc = evaluate(&net, val)?.accuracy;
            let test = holdout
                .as_ref()
                .map(|h| evaluate(&net, h).map(|m| m.accuracy))
                .transpose()?;
            Ok((acc, test))
        });
        result.map_err(|e| Error::Cell {
            eta,
            alpha,
            fold: item.fold,
            source: Box::new(e),
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| {
            Error::Config(format!(
                "cannot start {} worker threads: {e}",
                config.threads
            ))
        })?;
    let outcomes: Vec<Result<(f64, Option<f64>)>> =
        pool.install(|| items.par_iter().map(run_item).collect());

    let mut cells = Vec::with_capacity(grid.cell_count());
    let mut it = outcomes.into_iter();
    for &eta in grid.etas() {
        for &alpha in grid.alphas() {
            let mut accs = Vec::with_capacity(plan.k());
            let mut tests = Vec::new();
            for _ in 0..plan.k() {
                let (acc, test) = it.next().expect("one outcome per work item")?;
                accs.push(acc);
                tests.extend(test);
            }
            cells.push(CellResult::new(eta, alpha, accs, tests));
        }
    }
    let mut report = GridReport::new(grid.etas().to_vec(), grid.alphas().to_vec(), cells);
    report.test_source = exp.holdout.as_ref().map(|(name, _)| name.clone());
    Ok(rank(&report))
}
