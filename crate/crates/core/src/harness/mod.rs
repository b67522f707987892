//! Cross-validated grid search over (learning rate, momentum weight),
//! with ranking and CSV/SVG reports.

pub mod config;
pub mod grid;
pub mod report;
pub mod verify;

pub use config::{default_grid, DatasetKind, FoldSource, GridSpec, RunConfig, DATA_DIR_ENV};
pub use grid::{
    cell_seed, mean_std, prepare_experiment, rank, run_grid, run_grid_on, train_model, CellResult,
    Experiment, GridReport,
};
pub use report::{
    emit_csv, emit_heatmap, parse_csv, render_csv, render_heatmap, ParsedCsv, DERIVED_PAIR,
};
