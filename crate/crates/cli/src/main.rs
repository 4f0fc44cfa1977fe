//! `vo2tcn`: simulate cohorts, train and grid-search TCN VO2 estimators,
//! evaluate them and predict on new recordings.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vo2tcn::pipeline::{evaluate, prepare, select_participants, train_model, write_evaluation, EVAL_FILES};
use vo2tcn::report::{write_grid_results, write_history, write_predictions};
use vo2tcn::sim::generate_cohort_with;
use vo2tcn::store::{load_cohort, write_cohort};
use vo2tcn::train::grid_search_with_progress;
use vo2tcn::{Error, ErrorClass, ProtocolKind, ProtocolRecording, RunConfig, SavedModel};

const EFFECTIVE_CONFIG: &str = "effective_config.toml";

#[derive(Parser)]
#[command(name = "vo2tcn", version, about = "VO2 estimation with temporal convolutional networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a cohort: four protocol recordings per participant plus a manifest.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of participants.
        #[arg(long)]
        cohort: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Disable measurement noise.
        #[arg(long)]
        noiseless: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one architecture and save the best-epoch model.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Cohort directory written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        filters: Option<usize>,
        #[arg(long)]
        kernel: Option<usize>,
        #[arg(long)]
        dilations: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every configuration of a grid and rank by validation MSE.
    Grid {
        /// Config file whose [grid] section lists filters, kernels and dilations.
        #[arg(long, visible_alias = "config")]
        grid: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Results CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Error table, Bland-Altman, METs trace and confusion matrix for held-out participants.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated participant IDs; defaults to the model's test split.
        #[arg(long, value_delimiter = ',')]
        participants: Vec<String>,
        /// Allow evaluating participants the model was trained on.
        #[arg(long)]
        allow_train_leak: bool,
    },
    /// Per-second predictions for one recording CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Body mass used for the METs columns.
        #[arg(long, default_value_t = 70.0)]
        mass: f64,
        /// Protocol label stored with the recording (RAMP, L-M, L-H, VT-H).
        #[arg(long, default_value = "L-H")]
        kind: ProtocolKind,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Data(format!("cannot create {}: {}", dir.display(), e)))
}

fn echo_config(cfg: &RunConfig, path: &Path) -> Result<(), Error> {
    let text = cfg.to_toml();
    eprintln!("effective configuration:\n{}", text);
    std::fs::write(path, text).map_err(|e| Error::Data(format!("cannot write {}: {}", path.display(), e)))
}

fn load_members(dir: &Path) -> Result<Vec<vo2tcn::CohortMember>, Error> {
    if !dir.is_dir() {
        return Err(Error::Data(format!("data directory {} does not exist", dir.display())));
    }
    load_cohort(dir)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, cohort, seed, noiseless, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(n) = cohort {
                cfg.simulation.participants = n;
            }
            if let Some(s) = seed {
                cfg.simulation.seed = s;
            }
            if noiseless {
                cfg.simulation.kinetics.noise = false;
            }
            cfg.validate()?;
            let members =
                generate_cohort_with(cfg.simulation.participants, cfg.simulation.seed, &cfg.simulation.kinetics)?;
            create_dir(&out)?;
            let manifest = write_cohort(&out, &members, Some(cfg.simulation.seed))?;
            echo_config(&cfg, &out.join(EFFECTIVE_CONFIG))?;
            println!(
                "wrote {} participants × {} recordings; manifest {}",
                members.len(),
                ProtocolKind::ALL.len(),
                manifest.display()
            );
        }
        Command::Train { config, data, filters, kernel, dilations, epochs, seed, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(f) = filters {
                cfg.model.filters = f;
            }
            if let Some(k) = kernel {
                cfg.model.kernel = k;
            }
            if let Some(n) = dilations {
                cfg.model.dilations = n;
            }
            if let Some(e) = epochs {
                cfg.training.epochs = e;
            }
            if let Some(s) = seed {
                cfg.training.seed = s;
            }
            cfg.validate()?;
            let members = load_members(&data)?;
            create_dir(&out)?;
            echo_config(&cfg, &out.join(EFFECTIVE_CONFIG))?;
            let (saved, history) = train_model(&members, &cfg, |r| {
                eprintln!("epoch {:>4}  train {:.6}  val {:.6}", r.epoch, r.train_mse, r.val_mse)
            })?;
            saved.save(&out.join("model.bin"))?;
            write_history(&out.join("history.csv"), &history)?;
            println!(
                "best epoch {} of {}, validation MSE {:.6}; model {}",
                saved.best_epoch,
                history.len(),
                saved.best_val_mse,
                out.join("model.bin").display()
            );
        }
        Command::Grid { grid, data, jobs, epochs, out } => {
            let mut cfg = load_config(grid.as_deref())?;
            if let Some(j) = jobs {
                cfg.grid.jobs = j;
            }
            if let Some(e) = epochs {
                cfg.training.epochs = e;
            }
            cfg.validate()?;
            let features = cfg.data.feature_set()?;
            let configs = cfg.grid.configs(features.len(), cfg.training.dropout)?;
            let members = load_members(&data)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            echo_config(&cfg, &out.with_extension("config.toml"))?;
            let prepared = prepare(&members, &features, cfg.data.split_seed)?;
            let grid_data = prepared.grid_data(cfg.data.train_stride, cfg.data.val_stride);
            let total = configs.len();
            let results = grid_search_with_progress(&configs, &cfg.training, &grid_data, cfg.grid.jobs, |r| {
                eprintln!(
                    "({:>2}, {}, {}) RF {:>3}  best val {:.6} at epoch {}",
                    r.config.num_filters,
                    r.config.kernel_size,
                    r.config.dilation_depth,
                    r.receptive_field,
                    r.best_val_mse,
                    r.best_epoch
                )
            })?;
            write_grid_results(&out, &results)?;
            println!("{} configurations ranked in {}", total, out.display());
        }
        Command::Evaluate { model, data, out, participants, allow_train_leak } => {
            let saved = SavedModel::load(&model)?;
            let requested = (!participants.is_empty()).then_some(participants.as_slice());
            let ids = select_participants(&saved, requested, allow_train_leak)?;
            let members = load_members(&data)?;
            let ev = evaluate(&saved, &members, &ids)?;
            write_evaluation(&out, &ev)?;
            println!(
                "evaluated {} participants ({} s); METs accuracy {:.4}; wrote {} to {}",
                ids.len(),
                ev.confusion.total(),
                ev.confusion.accuracy(),
                EVAL_FILES.join(", "),
                out.display()
            );
        }
        Command::Predict { model, input, output, mass, kind } => {
            let saved = SavedModel::load(&model)?;
            let id = input.file_stem().map_or("input".to_string(), |s| s.to_string_lossy().into_owned());
            let rec = ProtocolRecording::read_csv(&input, id, kind)?;
            let p = vo2tcn::eval::predict_protocol(&saved.model, &rec, &saved.scaler, &saved.features)?;
            if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            write_predictions(&output, &p, mass)?;
            println!("{} prediction rows written to {}", p.len(), output.display());
        }
    }
    Ok(())
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // only the grid search is parallel; it builds its own pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code(e.class()))
        }
    }
}
