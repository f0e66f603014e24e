use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use eegret::data::npy::read_npy;
use eegret::data::{generate_synthetic, load_dataset, EegDataset, FeatureBank, SplitTag, SyntheticSpec};
use eegret::experiment::{ablate, run_experiment, ExperimentConfig, StreamSetting};
use eegret::features::{cache_features, provide_features, ProviderSource, ProviderSpec};
use eegret::metrics::score_directories;
use eegret::nn::EncoderParams;
use eegret::preproc::{build_blur_pyramid, compose_rsvp, BlurSpec, Image, RsvpSpec};
use eegret::retrieval::{evaluate_retrieval, Protocol};
use eegret::train::RunRecord;
use eegret::{Error, Result};

/// Exit status when a run finished but some seeds failed.
const EXIT_INCOMPLETE: u8 = 10;

#[derive(Parser)]
#[command(name = "eegret", version, about = "Contrastive EEG-to-image retrieval toolkit")]
struct Cli {
    /// Log progress (per-epoch metrics) to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or import EEG datasets.
    #[command(subcommand)]
    Data(DataCmd),
    /// Generate or import feature banks.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Train every seed of an experiment config and aggregate.
    Train(RunArgs),
    /// Evaluate a checkpoint on a test set.
    Eval(EvalArgs),
    /// Run an experiment once per visual-stream setting.
    Ablate(AblateArgs),
    /// Reconstruction-quality metrics.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Plot learning curves from run records.
    Curves(CurvesArgs),
    /// Write the blur pyramid (optionally of the RSVP composite) of an image.
    Preproc(PreprocArgs),
}

#[derive(Subcommand)]
enum DataCmd {
    /// Synthetic dataset: train/, test/, bank/ and latents.json.
    Synth {
        /// SyntheticSpec JSON; defaults to the standard benchmark.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an NPY array `[n, reps, channels, time]` (or `[n, channels, time]`).
    Import {
        #[arg(long)]
        eeg: PathBuf,
        /// JSON array of integer labels, one per sample.
        #[arg(long)]
        labels: PathBuf,
        /// JSON array of class names (image ids); defaults to `class_<i>`.
        #[arg(long)]
        classes: Option<PathBuf>,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum FeaturesCmd {
    /// Synthetic bank for the images of a `data synth` directory.
    Synth {
        /// Directory written by `data synth`.
        #[arg(long)]
        data: PathBuf,
        /// Provider seed (defaults to the dataset seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated stream names (defaults to the dataset's streams).
        #[arg(long, value_delimiter = ',')]
        streams: Vec<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an NPY array `[images, streams, dim]` into a bank.
    Import {
        #[arg(long)]
        npy: PathBuf,
        /// JSON array of image ids, one per row.
        #[arg(long)]
        ids: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        streams: Vec<String>,
        #[arg(long, default_value = "imported")]
        provider: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Restrict to these seeds (repeatable).
    #[arg(long)]
    seed: Vec<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Settings to compare (default: all four).
    #[arg(long, value_delimiter = ',')]
    streams: Vec<StreamSetting>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test dataset container.
    #[arg(long)]
    data: PathBuf,
    /// Feature bank whose rows the test labels index.
    #[arg(long)]
    bank: PathBuf,
    #[arg(long, default_value = "both")]
    streams: StreamSetting,
    /// Blur kernel sizes (comma-separated); defaults to the standard eight.
    #[arg(long, value_delimiter = ',')]
    blur: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "standard,hungarian")]
    protocol: Vec<Protocol>,
    /// Recorded in the output.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the metrics JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Score generated images against ground truth (PNG files paired by name).
    Score {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// `NAME=DIR` feature banks holding `gen` and `gt` streams (repeatable).
        #[arg(long)]
        feats: Vec<String>,
        /// Directory for report.json and report.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CurvesArgs {
    /// Record files, seed directories or experiment directories.
    #[arg(long, required = true, num_args = 1..)]
    records: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocArgs {
    #[arg(long)]
    image: PathBuf,
    /// BlurSpec JSON; defaults to the standard eight kernels.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Composite onto the RSVP display first (optional RsvpSpec JSON path).
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    rsvp: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

#[derive(Serialize, Deserialize)]
struct LatentTable {
    spec: SyntheticSpec,
    latents: Vec<(String, Vec<f64>)>,
}

fn data_synth(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut spec: SyntheticSpec = match config {
        Some(p) => read_json(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let syn = generate_synthetic(&spec)?;
    create_dir(out)?;
    syn.train.write(&out.join("train"))?;
    syn.test.write(&out.join("test"))?;
    cache_features(&syn.bank, &out.join("bank"))?;
    let latents = syn.image_ids().iter().cloned().zip(syn.latents.iter().cloned()).collect();
    write_json(&out.join("latents.json"), &LatentTable { spec, latents })?;
    println!(
        "wrote {} train / {} test samples and a {}-image bank to {}",
        syn.train.n_samples(),
        syn.test.n_samples(),
        syn.bank.n_images(),
        out.display()
    );
    Ok(())
}

fn data_import(eeg: &Path, labels: &Path, classes: Option<&Path>, split: &str, out: &Path) -> Result<()> {
    let arr = read_npy(eeg)?;
    let shape: [usize; 4] = match arr.shape.as_slice() {
        &[n, r, c, t] => [n, r, c, t],
        &[n, c, t] => [n, 1, c, t],
        other => {
            return Err(Error::Shape(format!(
                "EEG array must have 3 or 4 axes, got {other:?}"
            )))
        }
    };
    let labels: Vec<usize> = read_json(labels)?;
    let classes: Vec<String> = match classes {
        Some(p) => read_json(p)?,
        None => {
            let n = labels.iter().max().map_or(0, |m| m + 1);
            (0..n).map(|i| format!("class_{i}")).collect()
        }
    };
    let split = match split {
        "train" => SplitTag::Train,
        "val" => SplitTag::Val,
        "test" => SplitTag::Test,
        other => return Err(Error::Parameter(format!("unknown split {other:?}"))),
    };
    let d = EegDataset::new(arr.to_f32(), shape, labels, classes, split)?;
    d.write(out)?;
    println!("imported {:?} into {}", d.shape(), out.display());
    Ok(())
}

fn features_synth(
    data: &Path,
    seed: Option<u64>,
    streams: Vec<String>,
    dim: Option<usize>,
    out: &Path,
) -> Result<()> {
    let table: LatentTable = read_json(&data.join("latents.json"))?;
    let spec = ProviderSpec {
        source: ProviderSource::Synthetic {
            seed: seed.unwrap_or(table.spec.seed),
        },
        streams: if streams.is_empty() { table.spec.streams.clone() } else { streams },
        feature_dim: dim.unwrap_or(table.spec.feature_dim),
    };
    let ids: Vec<String> = table.latents.iter().map(|(id, _)| id.clone()).collect();
    let bank = provide_features(&spec, &ids, Some(&table.latents))?;
    cache_features(&bank, out)?;
    println!("wrote {} images x {} streams to {}", bank.n_images(), bank.streams().len(), out.display());
    Ok(())
}

fn features_import(npy: &Path, ids: &Path, streams: Vec<String>, provider: &str, out: &Path) -> Result<()> {
    let arr = read_npy(npy)?;
    let ids: Vec<String> = read_json(ids)?;
    let dim = match arr.shape.as_slice() {
        &[n, s, d] if n == ids.len() && s == streams.len() => d,
        other => {
            return Err(Error::Shape(format!(
                "feature array {other:?} does not match {} ids x {} streams x dim",
                ids.len(),
                streams.len()
            )))
        }
    };
    let bank = FeatureBank::new(arr.to_f32(), dim, streams, ids, provider)?;
    cache_features(&bank, out)?;
    println!("imported {} images into {}", bank.n_images(), out.display());
    Ok(())
}

fn load_experiment(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if !args.seed.is_empty() {
        cfg.train.seeds = args.seed.clone();
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn incomplete_exit(complete: bool) -> ExitCode {
    if complete {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: not every requested seed completed; see the report");
        ExitCode::from(EXIT_INCOMPLETE)
    }
}

fn cmd_train(args: &RunArgs) -> Result<ExitCode> {
    let cfg = load_experiment(args)?;
    let report = run_experiment(&cfg)?;
    print!("{}", report.to_table());
    Ok(incomplete_exit(report.is_complete()))
}

fn cmd_ablate(args: &AblateArgs) -> Result<ExitCode> {
    let cfg = load_experiment(&args.run)?;
    let settings = if args.streams.is_empty() {
        StreamSetting::ALL.to_vec()
    } else {
        args.streams.clone()
    };
    let outcome = ablate(&cfg, &settings)?;
    print!("{}", outcome.table.to_markdown());
    Ok(incomplete_exit(outcome.is_complete()))
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let params = EncoderParams::<f32>::load_checkpoint(&args.checkpoint)?;
    let test = load_dataset(&args.data)?;
    let bank = FeatureBank::load(&args.bank)?;
    let blur = if args.blur.is_empty() {
        BlurSpec::default()
    } else {
        BlurSpec {
            kernel_sizes: args.blur.clone(),
        }
    };
    let streams = args.streams.selection(&blur);
    let metrics = args
        .protocol
        .iter()
        .map(|&p| {
            let mut m = evaluate_retrieval(&params, &test, &bank, &streams, p)?;
            m.seed = args.seed;
            m.checkpoint = Some(args.checkpoint.display().to_string());
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    match &args.out {
        Some(p) => write_json(p, &metrics),
        None => {
            println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
            Ok(())
        }
    }
}

fn cmd_metrics(gen: &Path, gt: &Path, feats: &[String], out: Option<&Path>) -> Result<()> {
    let banks = feats
        .iter()
        .map(|f| {
            let (name, dir) = f
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("--feats expects NAME=DIR, got {f:?}")))?;
            Ok((name.to_string(), FeatureBank::load(Path::new(dir))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = score_directories(gen, gt, &banks)?;
    match out {
        Some(dir) => {
            create_dir(dir)?;
            write_json(&dir.join("report.json"), &report)?;
            let csv_path = dir.join("report.csv");
            fs::write(&csv_path, report.to_csv()?).map_err(|e| io_err(&csv_path, e))?;
            for m in &report.metrics {
                println!("{:<24} {:.6} ± {:.6} (n={})", m.name, m.mean, m.std, m.n);
            }
            Ok(())
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
    }
}

/// Expands experiment directories (with `seed_*` children) and seed
/// directories into record files.
fn collect_records(paths: &[PathBuf]) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for p in paths {
        if p.is_dir() && !p.join("record.json").exists() {
            let mut seeds: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|c| c.join("record.json").exists())
                .collect();
            seeds.sort();
            if seeds.is_empty() {
                return Err(Error::Lookup(format!("no run records under {}", p.display())));
            }
            for s in seeds {
                records.push(RunRecord::load(&s)?);
            }
        } else {
            records.push(RunRecord::load(p)?);
        }
    }
    records.sort_by_key(|r| r.seed);
    Ok(records)
}

fn cmd_preproc(args: &PreprocArgs) -> Result<()> {
    let spec: BlurSpec = match &args.config {
        Some(p) => read_json(p)?,
        None => BlurSpec::default(),
    };
    let mut img = Image::load_png(&args.image)?;
    if let Some(r) = &args.rsvp {
        let rs: RsvpSpec = if r.as_os_str().is_empty() { RsvpSpec::default() } else { read_json(r)? };
        img = compose_rsvp(&img, &rs)?;
    }
    create_dir(&args.out)?;
    let stem = args
        .image
        .file_stem()
        .map_or("image".into(), |s| s.to_string_lossy().into_owned());
    for (k, level) in spec.kernel_sizes.iter().zip(build_blur_pyramid(&img, &spec)?) {
        level.save_png(&args.out.join(format!("{stem}_blur_k{k}.png")))?;
    }
    println!("wrote {} levels to {}", spec.kernel_sizes.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Data(DataCmd::Synth { config, seed, out }) => data_synth(config.as_deref(), seed, &out)?,
        Command::Data(DataCmd::Import {
            eeg,
            labels,
            classes,
            split,
            out,
        }) => data_import(&eeg, &labels, classes.as_deref(), &split, &out)?,
        Command::Features(FeaturesCmd::Synth {
            data,
            seed,
            streams,
            dim,
            out,
        }) => features_synth(&data, seed, streams, dim, &out)?,
        Command::Features(FeaturesCmd::Import {
            npy,
            ids,
            streams,
            provider,
            out,
        }) => features_import(&npy, &ids, streams, &provider, &out)?,
        Command::Train(args) => return cmd_train(&args),
        Command::Ablate(args) => return cmd_ablate(&args),
        Command::Eval(args) => cmd_eval(&args)?,
        Command::Metrics(MetricsCmd::Score { gen, gt, feats, out }) => {
            cmd_metrics(&gen, &gt, &feats, out.as_deref())?
        }
        Command::Curves(args) => {
            let records = collect_records(&args.records)?;
            eegret::experiment::emit_curves(&records, &args.out)?;
            println!("wrote {} curves to {}", records.len(), args.out.display());
        }
        Command::Preproc(args) => cmd_preproc(&args)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code().clamp(1, 255) as u8)
        }
    }
}
