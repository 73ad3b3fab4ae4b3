use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use presetpick::config::RunConfig;
use presetpick::dataset::{
    assemble_dataset, generate_synthetic, load_dataset, split_dataset, write_dataset, AssembleOptions, ChunkInput,
    CommandTemplate, Dataset, SyntheticSpec,
};
use presetpick::featselect::{curves_csv, retrain_with_selected};
use presetpick::features::{csv_header, extract_features, CategoricalCodebook};
use presetpick::regression::{evaluate_bundle, load_bundle, save_bundle, train_all_presets, Family, Hyperparams};
use presetpick::report::{featsel_csv, featsel_text, simulation_csv, simulation_text, training_csv, training_text};
use presetpick::selector::{
    decision_csv_header, decision_csv_row, predict_all_presets, predict_times, select_preset_with_margin,
};
use presetpick::simulate::{
    load_ground_truth, read_chunk_features, simulate_oracle, simulate_with_bundle, SimulationMode,
};
use presetpick::stats::read_chunk_stats;
use presetpick::{Error, Preset};

#[derive(Parser)]
#[command(
    name = "presetpick",
    version,
    about = "Pick the slowest encoder preset that fits a live chunk budget"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// `key = value` run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for splits, folds and randomized models.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model bundle to read (or, for `train`, the default output).
    #[arg(long, global = true)]
    bundle: Option<PathBuf>,
    /// Output file; most commands print to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Chunk duration in seconds.
    #[arg(long, global = true)]
    budget_duration: Option<f64>,
    /// Seconds reserved for feature extraction and prediction.
    #[arg(long, global = true)]
    budget_overhead: Option<f64>,
    /// Multiplier applied to predicted times before the budget check.
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Simulation policy: `oracle` (measured times) or `predicted`.
    #[arg(long, global = true)]
    mode: Option<SimulationMode>,
    /// Timed runs per measured cell; the median is kept.
    #[arg(long, global = true)]
    repeat: Option<usize>,
    /// Color token codes, one `field token code` per line.
    #[arg(long, global = true)]
    codebook: Option<PathBuf>,
    /// Directory for CSV report artifacts.
    #[arg(long, global = true)]
    reports: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the feature row of one chunk statistics file.
    Extract {
        stats: PathBuf,
        /// Target output bitrate, kbps.
        #[arg(long)]
        bitrate: f64,
        #[arg(long)]
        header: bool,
    },
    /// Write a training dataset, either synthetic or measured.
    BuildDataset(BuildArgs),
    /// Select the best model per preset and save the bundle.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Hold out part of the data and report metrics on it.
        #[arg(long)]
        holdout: bool,
        /// Comma-separated model families to consider.
        #[arg(long, value_delimiter = ',')]
        models: Vec<Family>,
    },
    /// Recursive feature elimination per preset, then retrain.
    Featsel {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Print predicted transcode times for every preset.
    Predict {
        stats: PathBuf,
        #[arg(long)]
        bitrate: f64,
    },
    /// Choose a preset for one chunk.
    Select {
        stats: PathBuf,
        #[arg(long)]
        bitrate: f64,
        #[arg(long)]
        header: bool,
    },
    /// Replay a ground-truth table under a selection policy.
    Simulate {
        #[arg(long)]
        ground_truth: PathBuf,
        /// Per-chunk feature CSV, needed in predicted mode.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Print CSV instead of the text report.
        #[arg(long)]
        csv: bool,
    },
    /// Report bundle metrics on a dataset.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, conflicts_with_all = ["chunk", "command"])]
    synthetic: bool,
    #[arg(long, default_value_t = 200, requires = "synthetic")]
    chunks: usize,
    #[arg(long, default_value_t = 0.03, requires = "synthetic")]
    noise: f64,
    /// A statistics file and the media file it describes.
    #[arg(long, num_args = 2, value_names = ["STATS", "MEDIA"], action = clap::ArgAction::Append)]
    chunk: Vec<PathBuf>,
    /// Target bitrates in kbps.
    #[arg(long, value_delimiter = ',', default_value = "6000")]
    bitrates: Vec<f64>,
    /// Transcoder command with {input} {preset} {bitrate} {output} placeholders.
    #[arg(long)]
    command: Option<String>,
    /// Where transcoded outputs are written.
    #[arg(long)]
    work_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 4 } else { 3 })
        }
    }
}

fn config_from(g: &GlobalOpts) -> Result<RunConfig, Failure> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = &g.bundle {
        cfg.bundle = Some(v.clone());
    }
    if let Some(v) = &g.codebook {
        cfg.codebook = Some(v.clone());
    }
    if let Some(v) = &g.reports {
        cfg.reports = Some(v.clone());
    }
    if let Some(v) = g.k {
        cfg.k_folds = v;
    }
    if let Some(v) = g.budget_duration {
        cfg.chunk_duration = v;
    }
    if let Some(v) = g.budget_overhead {
        cfg.overhead = v;
    }
    if let Some(v) = g.margin {
        cfg.margin = v;
    }
    if let Some(v) = g.repeat {
        cfg.repeat = v;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn need<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, Failure> {
    value
        .as_deref()
        .ok_or_else(|| Failure::Usage(format!("{what} is required (flag or config key)")))
}

fn codebook(cfg: &RunConfig) -> Result<CategoricalCodebook, Failure> {
    match &cfg.codebook {
        None => Ok(CategoricalCodebook::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| Error::File {
                path: p.clone(),
                source,
            })?;
            Ok(CategoricalCodebook::parse(&text).map_err(|e| e.context(p.display().to_string()))?)
        }
    }
}

/// Writes to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => write_file(p, text),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|source| {
        Failure::Core(Error::File {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn write_report(cfg: &RunConfig, name: &str, text: &str) -> CliResult {
    if let Some(dir) = &cfg.reports {
        fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.clone(),
            source,
        })?;
        write_file(&dir.join(name), text)?;
        info!("wrote {}", dir.join(name).display());
    }
    Ok(())
}

fn dataset_path<'a>(flag: &'a Option<PathBuf>, cfg: &'a RunConfig) -> Result<&'a Path, Failure> {
    match flag {
        Some(p) => Ok(p),
        None => need(&cfg.dataset, "--dataset"),
    }
}

fn run(cli: Cli) -> CliResult {
    let g = &cli.global;
    let cfg = config_from(g)?;
    match cli.command {
        Command::Extract { stats, bitrate, header } => {
            let book = codebook(&cfg)?;
            let chunk = read_chunk_stats(&stats)?;
            let fv = extract_features(&chunk, bitrate, &book)?;
            let mut out = String::new();
            if header {
                out.push_str(&csv_header());
                out.push('\n');
            }
            out.push_str(&fv.to_csv_row());
            out.push('\n');
            emit(g.out.as_deref(), &out)
        }
        Command::BuildDataset(args) => build_dataset(&cfg, g.out.as_deref(), args),
        Command::Train {
            dataset,
            holdout,
            models,
        } => {
            let out = match &g.out {
                Some(p) => p.as_path(),
                None => need(&cfg.bundle, "--out")?,
            };
            let data = load_dataset(dataset_path(&dataset, &cfg)?)?;
            let families = if models.is_empty() {
                Family::ALL.to_vec()
            } else {
                models
            };
            let zoo: Vec<Hyperparams> = families.iter().map(|f| Hyperparams::default_for(*f)).collect();
            let (bundle, report) = if holdout {
                let (train, test) = split_dataset(&data, cfg.train_fraction, cfg.seed)?;
                let bundle = train_all_presets(&train, &zoo, cfg.k_folds, cfg.seed)?;
                let report = evaluate_bundle(&bundle, &test)?;
                (bundle, report)
            } else {
                let bundle = train_all_presets(&data, &zoo, cfg.k_folds, cfg.seed)?;
                let report = bundle.cv_report();
                (bundle, report)
            };
            save_bundle(&bundle, out)?;
            info!("saved bundle to {}", out.display());
            write_report(&cfg, "training.csv", &training_csv(&report))?;
            print!("{}", training_text(&report));
            Ok(())
        }
        Command::Featsel { dataset } => {
            let out = need(&g.out, "--out")?;
            let bundle = load_bundle(need(&cfg.bundle, "--bundle")?)?;
            let data = load_dataset(dataset_path(&dataset, &cfg)?)?;
            let outcome = retrain_with_selected(&bundle, &data, cfg.k_folds, cfg.seed)?;
            save_bundle(&outcome.bundle, out)?;
            write_report(&cfg, "featsel.csv", &featsel_csv(&outcome.report))?;
            write_report(&cfg, "curves.csv", &curves_csv(&outcome.rfecv))?;
            write_report(&cfg, "indicator.csv", &outcome.indicator.to_csv())?;
            print!("{}", featsel_text(&outcome.report));
            Ok(())
        }
        Command::Predict { stats, bitrate } => {
            let bundle = load_bundle(need(&cfg.bundle, "--bundle")?)?;
            let fv = extract_features(&read_chunk_stats(&stats)?, bitrate, &codebook(&cfg)?)?;
            let times = predict_times(&bundle, &fv)?;
            let mut out = String::from("preset,predicted_time\n");
            for (p, t) in times.iter() {
                out.push_str(&format!("{p},{t}\n"));
            }
            emit(g.out.as_deref(), &out)
        }
        Command::Select { stats, bitrate, header } => {
            let bundle = load_bundle(need(&cfg.bundle, "--bundle")?)?;
            let book = codebook(&cfg)?;
            let start = Instant::now();
            let chunk = read_chunk_stats(&stats)?;
            let fv = extract_features(&chunk, bitrate, &book)?;
            let extract_time = start.elapsed();
            let (times, latency) = predict_all_presets(&bundle, &fv, extract_time)?;
            let mut decision = select_preset_with_margin(&times, &cfg.budget()?, cfg.margin)?;
            decision.latency = Some(latency);
            if !decision.feasible {
                log::warn!(
                    "no preset fits the budget for {}; using {}",
                    chunk.chunk_id,
                    Preset::Ultrafast
                );
            }
            let mut out = String::new();
            if header {
                out.push_str(&decision_csv_header());
                out.push('\n');
            }
            out.push_str(&decision_csv_row(&chunk.chunk_id, &decision));
            out.push('\n');
            emit(g.out.as_deref(), &out)
        }
        Command::Simulate {
            ground_truth,
            features,
            csv,
        } => {
            let table = load_ground_truth(&ground_truth)?;
            let budget = cfg.budget()?;
            let report = match g.mode.unwrap_or(SimulationMode::Oracle) {
                SimulationMode::Oracle => simulate_oracle(&table, &budget, cfg.margin)?,
                SimulationMode::Predicted => {
                    let bundle = load_bundle(need(&cfg.bundle, "--bundle")?)?;
                    let path = need(&features, "--features")?;
                    let file = fs::File::open(path).map_err(|source| Error::File {
                        path: path.to_path_buf(),
                        source,
                    })?;
                    let rows = read_chunk_features(file).map_err(|e| e.context(path.display().to_string()))?;
                    simulate_with_bundle(&table, &bundle, &rows, &budget, cfg.margin)?
                }
            };
            write_report(&cfg, "simulation.csv", &simulation_csv(&report))?;
            let text = if csv {
                simulation_csv(&report)
            } else {
                simulation_text(&report)
            };
            emit(g.out.as_deref(), &text)
        }
        Command::Evaluate { dataset } => {
            let bundle = load_bundle(need(&cfg.bundle, "--bundle")?)?;
            let data = load_dataset(dataset_path(&dataset, &cfg)?)?;
            let report = evaluate_bundle(&bundle, &data)?;
            write_report(&cfg, "evaluation.csv", &training_csv(&report))?;
            emit(g.out.as_deref(), &training_text(&report))
        }
    }
}

fn build_dataset(cfg: &RunConfig, out: Option<&Path>, args: BuildArgs) -> CliResult {
    let dataset: Dataset = if args.synthetic {
        generate_synthetic(&SyntheticSpec {
            n_chunks: args.chunks,
            noise_level: args.noise,
            seed: cfg.seed,
        })?
    } else {
        if args.chunk.is_empty() {
            return Err(Failure::Usage(
                "give --synthetic or at least one --chunk STATS MEDIA".into(),
            ));
        }
        let template = args
            .command
            .as_deref()
            .ok_or_else(|| Failure::Usage("--command is required for measured datasets".into()))?;
        let template = CommandTemplate::parse(template).map_err(|e| Failure::Usage(e.to_string()))?;
        let chunks = args
            .chunk
            .chunks_exact(2)
            .map(|pair| {
                Ok(ChunkInput {
                    stats: read_chunk_stats(&pair[0])?,
                    media: pair[1].clone(),
                })
            })
            .collect::<presetpick::Result<Vec<_>>>()?;
        let opts = AssembleOptions {
            repeat: cfg.repeat,
            output_dir: args.work_dir.unwrap_or_else(std::env::temp_dir),
        };
        assemble_dataset(&chunks, &args.bitrates, &template, &codebook(cfg)?, &opts)?
    };
    info!("{} records from {}", dataset.len(), dataset.provenance);
    let mut buf = Vec::new();
    write_dataset(&dataset, &mut buf)?;
    emit(out, &String::from_utf8_lossy(&buf))
}
