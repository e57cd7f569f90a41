//! `voxshape`: the standard shape-modeling pipeline and the trained-network
//! path as composable commands, plus `pipeline`, which runs every stage
//! from one config and records a digest manifest.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error (missing or
//! malformed inputs), 3 numeric failure. Failures print one line on stderr:
//! `voxshape: error[<kind>]: <message>`.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod data;
pub mod manifest;
pub mod pipeline;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use voxshape_core::Error;

use crate::commands::Template;
use crate::config::PipelineConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Core(e) => match e {
                Error::InvalidArgument(_) => 1,
                Error::Io { .. } | Error::Format { .. } | Error::Data(_) | Error::Json(_) => 2,
                Error::Numeric(_) => 3,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Core(e) => match e {
                Error::InvalidArgument(_) => "invalid_argument",
                Error::Io { .. } => "io",
                Error::Format { .. } => "format",
                Error::Data(_) => "data",
                Error::Json(_) => "json",
                Error::Numeric(_) => "numeric",
            },
        }
    }

    /// The single diagnostic line written to stderr.
    pub fn diagnostic(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("voxshape: error[{}]: {}", self.kind(), msg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "voxshape", version, about = "Shape models from volumes: statistical shape space, augmentation, CNN regression and evaluation")]
pub struct Cli {
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Caps worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes a synthetic population (particles, volumes, meshes, labels, template).
    Synth,
    /// Fits the PCA shape space to every shape of a particles directory.
    FitShapeSpace {
        #[arg(long, value_name = "DIR")]
        particles: Option<PathBuf>,
    },
    /// Fits a Gaussian mixture to loadings, choosing the component count by BIC.
    FitGmm {
        #[arg(long, value_name = "FILE")]
        loadings: PathBuf,
    },
    /// Samples new shapes from the mixture and warps volumes to match them.
    Augment {
        #[arg(long, value_name = "FILE")]
        shape_space: PathBuf,
        #[arg(long, value_name = "FILE")]
        gmm: PathBuf,
        #[arg(long, value_name = "DIR")]
        particles: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        volumes: Option<PathBuf>,
    },
    /// Trains the volume → loadings CNN on an augmented set.
    TrainRegressor {
        #[arg(long, value_name = "FILE")]
        shape_space: PathBuf,
        #[arg(long, value_name = "DIR")]
        augmented: PathBuf,
    },
    /// Volume → loadings → particles (→ mesh with a template).
    Predict {
        #[arg(long, value_name = "FILE")]
        regressor: PathBuf,
        #[arg(long, value_name = "FILE")]
        shape_space: PathBuf,
        #[command(flatten)]
        template: TemplateArgs,
        /// `.mhd` files or directories of them.
        #[arg(required = true, value_name = "VOLUME")]
        volumes: Vec<PathBuf>,
    },
    /// Trains the loadings → recurrence-probability network.
    TrainRecurrence {
        #[arg(long, value_name = "FILE")]
        loadings: PathBuf,
        #[arg(long, value_name = "FILE")]
        labels: Option<PathBuf>,
    },
    /// Recurrence probabilities for a loadings table.
    PredictRecurrence {
        #[arg(long, value_name = "FILE")]
        recurrence: PathBuf,
        #[arg(long, value_name = "FILE")]
        loadings: PathBuf,
    },
    /// Evaluation reports.
    #[command(subcommand)]
    Evaluate(Evaluate),
    /// Runs every stage from the config; resumes completed stages.
    Pipeline,
}

#[derive(Debug, Args)]
pub struct TemplateArgs {
    #[arg(long, value_name = "FILE", requires = "template_particles")]
    pub template_mesh: Option<PathBuf>,
    #[arg(long, value_name = "FILE", requires = "template_mesh")]
    pub template_particles: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Evaluate {
    /// Hotelling T² between predicted and ground-truth loadings.
    Loadings {
        #[arg(long, value_name = "FILE")]
        predicted: PathBuf,
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,
    },
    /// Per-point correspondence errors and boxplot table.
    Points {
        #[arg(long, value_name = "DIR")]
        predicted: PathBuf,
        #[arg(long, value_name = "DIR")]
        truth: PathBuf,
    },
    /// Vertex-to-surface distances between meshes matched by name.
    Surface {
        #[arg(long, value_name = "DIR")]
        predicted: PathBuf,
        #[arg(long, value_name = "DIR")]
        truth: PathBuf,
    },
    /// TOST equivalence of recurrence probabilities.
    Recurrence {
        #[arg(long, value_name = "FILE")]
        recurrence: PathBuf,
        #[arg(long, value_name = "FILE")]
        predicted: PathBuf,
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,
    },
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_string()).diagnostic());
            return 1;
        }
    };
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // A second initialization (tests call `run` repeatedly) is harmless.
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("VOXSHAPE_LOG")
        .format_timestamp(None)
        .try_init();
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| dispatch(cli.command, &cfg))
        }
        None => dispatch(cli.command, &cfg),
    }
}

fn required(value: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    value
        .or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Usage(format!("{flag} is required (or set it in the config paths)")))
}

fn report(written: &[PathBuf]) {
    for p in written {
        println!("{}", p.display());
    }
}

fn dispatch(command: Command, cfg: &PipelineConfig) -> Result<(), CliError> {
    let out = cfg.paths.output_dir.as_path();
    let paths = &cfg.paths;
    let written = match command {
        Command::Synth => {
            let mut spec = cfg.synth.clone();
            spec.seed = cfg.seed;
            commands::synth(&spec, out)?
        }
        Command::FitShapeSpace { particles } => {
            let dir = required(particles, &paths.particles_dir, "--particles")?;
            commands::fit_shape_space_cmd(&dir, None, cfg.variance_threshold, out)?
        }
        Command::FitGmm { loadings } => commands::fit_gmm_cmd(&loadings, &cfg.gmm, cfg.seed, out)?,
        Command::Augment { shape_space, gmm, particles, volumes } => {
            let particles = required(particles, &paths.particles_dir, "--particles")?;
            let volumes = required(volumes, &paths.volumes_dir, "--volumes")?;
            commands::augment_cmd(&shape_space, &gmm, &particles, &volumes, None, &cfg.augment, cfg.seed, out)?
        }
        Command::TrainRegressor { shape_space, augmented } => {
            commands::train_regressor_cmd(&shape_space, &augmented, &cfg.train.with_seed(cfg.seed), out)?
        }
        Command::Predict { regressor, shape_space, template, volumes } => {
            let template = match (template.template_mesh, template.template_particles) {
                (Some(m), Some(p)) => Some(Template::load(&m, &p)?),
                _ => match (&paths.template_mesh, &paths.template_particles) {
                    (Some(m), Some(p)) => Some(Template::load(m, p)?),
                    _ => None,
                },
            };
            let files = expand_volumes(&volumes)?;
            commands::predict_cmd(&regressor, &shape_space, &files, template.as_ref(), out)?
        }
        Command::TrainRecurrence { loadings, labels } => {
            let labels = required(labels, &paths.labels, "--labels")?;
            commands::train_recurrence_cmd(&loadings, &labels, &cfg.recurrence.with_seed(cfg.seed), out)?
        }
        Command::PredictRecurrence { recurrence, loadings } => commands::predict_recurrence_cmd(&recurrence, &loadings, out)?,
        Command::Evaluate(e) => match e {
            Evaluate::Loadings { predicted, truth } => commands::evaluate_loadings(&predicted, &truth, cfg.hotelling, out)?,
            Evaluate::Points { predicted, truth } => commands::evaluate_points(&predicted, &truth, cfg.voxel_spacing_mm, out)?,
            Evaluate::Surface { predicted, truth } => commands::evaluate_surface(
                &commands::load_meshes(&predicted)?,
                &commands::load_meshes(&truth)?,
                cfg.symmetric_surface_distance,
                out,
            )?,
            Evaluate::Recurrence { recurrence, predicted, truth } => {
                commands::evaluate_recurrence(&recurrence, &truth, &predicted, &cfg.tost, out)?
            }
        },
        Command::Pipeline => {
            let summary = pipeline::run_pipeline(cfg)?;
            print!("{summary}");
            return Ok(());
        }
    };
    report(&written);
    Ok(())
}

/// Directories expand to their `.mhd` files, sorted.
fn expand_volumes(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = commands::files_under(p)?
                .into_iter()
                .filter(|f| f.extension().is_some_and(|e| e == "mhd"))
                .collect();
            if found.is_empty() {
                return Err(Error::data(format!("{}: no .mhd volumes", p.display())).into());
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

/// Whether `path` exists, as a data error naming it otherwise.
pub fn require_dir(path: &Path) -> Result<(), CliError> {
    if !path.is_dir() {
        return Err(Error::data(format!("{}: directory not found", path.display())).into());
    }
    Ok(())
}
