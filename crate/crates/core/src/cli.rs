//! The `dbayes` command line.
//!
//! Exit codes: 0 on success, 1 on a runtime error or failed verification,
//! 2 on a usage error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::data::{self, IMAGE_MAGIC, LABEL_MAGIC};
use crate::error::{Error, Result};
use crate::goldfix::{Hyperparams, LogBase};
use crate::harness::{self, verify, RunConfig};
use crate::nn::{checkpoint, evaluate};
use crate::numfmt::sig;
use crate::rng::derive_seed;
use crate::solution::{self, LogMode};

#[derive(Debug, Parser)]
#[command(
    name = "dbayes",
    version,
    about = "Golden-ratio SGD hyperparameters and a CNN grid-search harness"
)]
struct Cli {
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory holding the MNIST IDX files (falls back to BD_DATA_DIR).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    /// Read every logarithm as its own argument.
    Fixed,
    /// Ordinary logarithm in the base given by --base.
    Explicit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the derived momentum weight and learning rate.
    Derive,
    /// Run the numeric identity checks.
    Verify,
    /// Sample both unit-circle forms over [0, pi/2] as CSV.
    Sweep {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Mode::Fixed)]
        mode: Mode,
        /// Logarithm base for explicit mode.
        #[arg(long, default_value_t = std::f64::consts::E)]
        base: f64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print every stage of a transformation chain.
    Chain {
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum, default_value_t = Mode::Fixed)]
        mode: Mode,
        #[arg(long, default_value_t = std::f64::consts::E)]
        base: f64,
        #[arg(long, value_enum, default_value_t = Direction::Forward)]
        direction: Direction,
    },
    /// Train one network and print metrics per epoch.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Write the trained weights to this checkpoint file.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Run the cross-validated grid and write CSV and SVG.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_svg: PathBuf,
    },
    /// Dataset utilities.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
}

#[derive(Debug, Subcommand)]
enum DataCommand {
    /// Summarise an IDX image file and, optionally, its label file.
    Inspect {
        images: PathBuf,
        labels: Option<PathBuf>,
    },
}

/// Parse `args` (including the program name) and run. Normal output goes to
/// `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn mode_of(mode: Mode, base: f64) -> Result<LogMode> {
    Ok(match mode {
        Mode::Fixed => LogMode::FixedPoint,
        Mode::Explicit => LogMode::Explicit(LogBase::new(base)?),
    })
}

fn load_config(path: &Path, cli_seed: Option<u64>, cli_dir: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(seed) = cli_seed {
        cfg.seed = seed;
    }
    if cli_dir.is_some() {
        cfg.data_dir = cli_dir;
    }
    Ok(cfg)
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Derive => {
            let h = Hyperparams::derived();
            writeln!(out, "alpha={:.9} eta={:.9}", h.alpha, h.eta)?;
        }
        Command::Verify => {
            let checks = verify::identity_suite();
            let mut failed = 0;
            for c in &checks {
                let status = if c.passed() { "ok  " } else { "FAIL" };
                writeln!(
                    out,
                    "{status} {:<26} worst {:e} (tol {:e})",
                    c.name, c.worst, c.tolerance
                )?;
                failed += usize::from(!c.passed());
            }
            if failed > 0 {
                writeln!(err, "{failed} of {} checks failed", checks.len())?;
                return Ok(1);
            }
        }
        Command::Sweep {
            n,
            mode,
            base,
            out: path,
        } => {
            let points = solution::sweep(n, mode_of(mode, base)?)?;
            match path {
                Some(p) => {
                    let mut w = BufWriter::new(File::create(&p)?);
                    solution::write_sweep_csv(&points, &mut w)?;
                    w.flush()?;
                }
                None => {
                    solution::write_sweep_csv(&points, &mut *out)?;
                }
            }
        }
        Command::Chain {
            p,
            mode,
            base,
            direction,
        } => {
            let mode = mode_of(mode, base)?;
            let trace = match direction {
                Direction::Forward => solution::chain_eval_forward(p, mode)?,
                Direction::Reverse => solution::chain_eval_reverse(p, mode)?,
            };
            write!(out, "{}", trace.to_table())?;
        }
        Command::Train { config, save } => {
            let cfg = load_config(&config, cli.seed, cli.data_dir)?;
            train(&cfg, save.as_deref(), out)?;
        }
        Command::Grid {
            config,
            out_csv,
            out_svg,
        } => {
            let cfg = load_config(&config, cli.seed, cli.data_dir)?;
            let report = harness::run_grid(&cfg)?;
            let csv = harness::render_csv(&report)?;
            let svg = harness::render_heatmap(&report)?;
            std::fs::write(&out_csv, &csv)?;
            std::fs::write(&out_svg, &svg)?;
            for (e, a) in &report.best {
                writeln!(out, "best eta={} alpha={}", sig(*e, 9), sig(*a, 9))?;
            }
            if let Some(line) = csv.lines().find(|l| l.starts_with("# derived pair")) {
                writeln!(out, "{}", &line[2..])?;
            }
            writeln!(out, "wrote {} and {}", out_csv.display(), out_svg.display())?;
        }
        Command::Data {
            command: DataCommand::Inspect { images, labels },
        } => {
            inspect(&images, labels.as_deref(), out)?;
        }
    }
    Ok(0)
}

fn train(cfg: &RunConfig, save: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let exp = harness::prepare_experiment(&RunConfig {
        fold_source: harness::FoldSource::Train,
        ..cfg.clone()
    })?;
    let train_set = exp.pool.to_dataset();
    let held = exp
        .holdout
        .as_ref()
        .map(|(name, set)| (name.clone(), set.to_dataset()));
    writeln!(
        out,
        "training on {} samples, eta={} alpha={} epochs={} batch={}",
        train_set.len(),
        sig(cfg.eta, 9),
        sig(cfg.alpha, 9),
        cfg.epochs,
        cfg.batch_size
    )?;
    let net = harness::train_model(
        &train_set,
        cfg.eta,
        cfg.alpha,
        cfg.epochs,
        cfg.batch_size,
        derive_seed(cfg.seed, 6),
        |epoch, net, m| {
            write!(
                out,
                "epoch={epoch} train_loss={} train_accuracy={}",
                sig(m.loss, 6),
                sig(m.accuracy, 6)
            )?;
            if let Some((name, set)) = &held {
                let e = evaluate(net, set)?;
                let tag = if name == "test files" { "test" } else { "val" };
                write!(
                    out,
                    " {tag}_loss={} {tag}_accuracy={}",
                    sig(e.loss, 6),
                    sig(e.accuracy, 6)
                )?;
            }
            writeln!(out)?;
            Ok(())
        },
    )?;
    if let Some(path) = save {
        checkpoint::save(&net, BufWriter::new(File::create(path)?))?;
        writeln!(out, "saved {}", path.display())?;
    }
    Ok(())
}

fn inspect(images: &Path, labels: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let bytes = data::read_maybe_gz(images)?;
    let set = data::parse_idx_images(&bytes)?;
    writeln!(
        out,
        "{}: magic 0x{IMAGE_MAGIC:08x} images={} rows={} cols={}",
        images.display(),
        set.count(),
        data::ROWS,
        data::COLS
    )?;
    if let Some(path) = labels {
        let l = data::parse_idx_labels(&data::read_maybe_gz(path)?)?;
        if l.count() != set.count() {
            return Err(Error::Size(format!(
                "{} images but {} labels",
                set.count(),
                l.count()
            )));
        }
        writeln!(
            out,
            "{}: magic 0x{LABEL_MAGIC:08x} labels={}",
            path.display(),
            l.count()
        )?;
        let counts = data::class_counts(l.labels());
        let hist: Vec<String> = counts
            .iter()
            .enumerate()
            .map(|(c, n)| format!("{c}:{n}"))
            .collect();
        writeln!(out, "per class: {}", hist.join(" "))?;
    }
    Ok(())
}
