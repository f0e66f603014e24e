use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{
    aggregate, emit_curves, AggregateReport, ComparisonTable, DataSource, ExperimentConfig,
    SeedFailure, SeedMetric, SeedRow, StreamSetting,
};
use crate::data::{generate_synthetic, load_dataset, split_train_val, EegDataset, FeatureBank};
use crate::error::{Error, Result};
use crate::features::provide_features;
use crate::retrieval::{Protocol, RetrievalMetrics, HUNGARIAN_TOPK_RULE};
use crate::train::{
    select_checkpoint, train, EpochMetrics, EvalSets, LabelledSet, RunRecord, SelectionPolicy,
};

/// Datasets and banks shared by every seed of an experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: EegDataset,
    pub train_bank: FeatureBank,
    pub val: Option<EegDataset>,
    pub test: EegDataset,
    pub test_bank: FeatureBank,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let (train, train_bank, test, test_bank) = match &cfg.data {
        DataSource::Synthetic(spec) => {
            let syn = generate_synthetic(spec)?;
            let bank = match &cfg.features {
                Some(p) => {
                    let latents: Vec<(String, Vec<f64>)> = syn
                        .image_ids()
                        .iter()
                        .cloned()
                        .zip(syn.latents.iter().cloned())
                        .collect();
                    provide_features(p, syn.image_ids(), Some(&latents))?
                }
                None => syn.bank.clone(),
            };
            (syn.train, bank.clone(), syn.test, bank)
        }
        DataSource::Files { train, test } => {
            let p = cfg
                .features
                .as_ref()
                .ok_or_else(|| Error::Config("file datasets need a features provider".into()))?;
            let train = load_dataset(train)?;
            let test = load_dataset(test)?;
            let train_bank = provide_features(p, train.classes(), None)?;
            let test_bank = provide_features(p, test.classes(), None)?;
            (train, train_bank, test, test_bank)
        }
    };
    let (train, val) = match &cfg.split {
        Some(s) => {
            let (t, v) = split_train_val(&train, s)?;
            (t, Some(v))
        }
        None => (train, None),
    };
    Ok(PreparedData {
        train,
        train_bank,
        val,
        test,
        test_bank,
    })
}

/// Digest of the config with the output directory blanked, so identical
/// experiments written to different places hash identically.
pub fn experiment_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.out_dir = PathBuf::new();
    Sha256::digest(c.to_json().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Checkpoint policies reported for a config, headline first.
pub fn reported_policies(cfg: &ExperimentConfig) -> Vec<SelectionPolicy> {
    let mut p = vec![SelectionPolicy::FinalEpoch];
    if cfg.split.is_some() {
        p.push(SelectionPolicy::ValSelected);
    }
    if cfg.report_best_test_diagnostic {
        p.push(SelectionPolicy::BestTestDiagnostic);
    }
    p
}

fn protocol_values(e: &EpochMetrics, protocol: Protocol) -> Result<(f64, f64)> {
    match protocol {
        Protocol::Standard => Ok((e.top1, e.top5)),
        Protocol::Hungarian => match (e.hungarian_top1, e.hungarian_top5) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::Config(
                "hungarian metrics need a square test set (one image per query)".into(),
            )),
        },
    }
}

/// Per-seed metrics for every requested protocol and checkpoint policy, read
/// off the epoch history (each epoch was evaluated on the test set).
pub fn seed_metrics(
    record: &RunRecord,
    protocols: &[Protocol],
    policies: &[SelectionPolicy],
) -> Result<Vec<SeedMetric>> {
    let mut out = Vec::new();
    for &protocol in protocols {
        for &selection in policies {
            let epoch = select_checkpoint(&record.epochs, selection)?;
            let (top1, top5) = protocol_values(&record.epochs[epoch], protocol)?;
            out.push(SeedMetric {
                protocol,
                selection,
                epoch,
                top1,
                top5,
            });
        }
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

struct SeedOutput {
    row: SeedRow,
    record: RunRecord,
    wall_seconds: f64,
}

fn run_seed(cfg: &ExperimentConfig, data: &PreparedData, seed: u64) -> Result<SeedOutput> {
    let streams = cfg.stream_selection();
    let eval = EvalSets {
        test: Some(LabelledSet {
            data: &data.test,
            bank: &data.test_bank,
        }),
        val: data.val.as_ref().map(|v| LabelledSet {
            data: v,
            bank: &data.train_bank,
        }),
    };
    let outcome = train(&data.train, &data.train_bank, &streams, &cfg.train, seed, eval)?;
    let dir = seed_dir(&cfg.out_dir, seed);
    outcome.record.write(&dir)?;
    outcome.final_params.save_checkpoint(&dir.join("final.ckpt"))?;
    let last = outcome.record.epochs.len() - 1;
    if outcome.record.selected_epoch != last {
        outcome.selected_params.save_checkpoint(&dir.join("selected.ckpt"))?;
    }
    let metrics = seed_metrics(&outcome.record, &cfg.protocols, &reported_policies(cfg))?;
    let detailed: Vec<RetrievalMetrics> = metrics
        .iter()
        .map(|m| RetrievalMetrics {
            protocol: m.protocol,
            top1: m.top1,
            top5: m.top5,
            n: data.test.n_samples(),
            seed: Some(seed),
            checkpoint: Some(format!("{}@epoch{}", m.selection.label(), m.epoch)),
            prior_knowledge_assisted: m.protocol == Protocol::Hungarian,
            topk_rule: (m.protocol == Protocol::Hungarian).then(|| HUNGARIAN_TOPK_RULE.to_string()),
        })
        .collect();
    write_text(
        &dir.join("metrics.json"),
        &(serde_json::to_string_pretty(&detailed).expect("metrics serialize") + "\n"),
    )?;
    Ok(SeedOutput {
        row: SeedRow { seed, metrics },
        record: outcome.record,
        wall_seconds: outcome.wall_seconds,
    })
}

#[derive(Serialize)]
struct Timing {
    seconds_per_seed: BTreeMap<u64, f64>,
}

/// Trains and evaluates every seed, then writes `report.json`, `report.csv`,
/// `summary.md`, `curves.svg` and (kept apart from the deterministic
/// artifacts) `timing.json` under `cfg.out_dir`.
///
/// A failing seed does not abort the others; it is listed in
/// `report.incomplete`. The call only errors when nothing can run at all.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateReport> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(&out.join("config.json"), &(cfg.to_json() + "\n"))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<(u64, Result<SeedOutput>)> = pool.install(|| {
        cfg.train
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_seed(cfg, &data, seed)))
            .collect()
    });

    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut incomplete = Vec::new();
    let mut timing = Timing {
        seconds_per_seed: BTreeMap::new(),
    };
    for (seed, r) in results {
        match r {
            Ok(o) => {
                timing.seconds_per_seed.insert(seed, o.wall_seconds);
                rows.push(o.row);
                records.push(o.record);
            }
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                incomplete.push(SeedFailure {
                    seed,
                    reason: e.to_string(),
                });
            }
        }
    }
    let mut report = if rows.is_empty() {
        AggregateReport {
            name: cfg.name.clone(),
            streams: None,
            config_hash: String::new(),
            n: 0,
            seeds: Vec::new(),
            entries: Vec::new(),
            rows: Vec::new(),
            incomplete: Vec::new(),
            hungarian_topk_rule: HUNGARIAN_TOPK_RULE.into(),
        }
    } else {
        aggregate(&cfg.name, &rows)?
    };
    report.streams = Some(cfg.streams);
    report.config_hash = experiment_hash(cfg);
    report.incomplete = incomplete;

    write_text(&out.join("report.json"), &report.to_json())?;
    write_text(&out.join("report.csv"), &report.rows_csv()?)?;
    write_text(&out.join("summary.md"), &report.to_table())?;
    records.sort_by_key(|r| r.seed);
    if !records.is_empty() {
        emit_curves(&records, &out.join("curves.svg"))?;
    }
    write_text(
        &out.join("timing.json"),
        &(serde_json::to_string_pretty(&timing).expect("timing serializes") + "\n"),
    )?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub reports: Vec<AggregateReport>,
    pub table: ComparisonTable,
}

impl AblationOutcome {
    pub fn is_complete(&self) -> bool {
        self.reports.iter().all(|r| r.is_complete())
    }
}

/// Runs `cfg` once per stream setting (in `settings` order) under
/// `out_dir/<setting>/` and writes `comparison.md` / `comparison.json`.
pub fn ablate(cfg: &ExperimentConfig, settings: &[StreamSetting]) -> Result<AblationOutcome> {
    if settings.is_empty() {
        return Err(Error::Config("ablation needs at least one stream setting".into()));
    }
    let mut reports = Vec::with_capacity(settings.len());
    for &s in settings {
        let mut c = cfg.clone();
        c.streams = s;
        c.name = format!("{}/{}", cfg.name, s.as_str());
        c.out_dir = cfg.out_dir.join(s.as_str());
        reports.push(run_experiment(&c)?);
    }
    let table = ComparisonTable::from_reports(&reports)?;
    let out = &cfg.out_dir;
    write_text(&out.join("comparison.md"), &table.to_markdown())?;
    write_text(
        &out.join("comparison.json"),
        &(serde_json::to_string_pretty(&table).expect("table serializes") + "\n"),
    )?;
    Ok(AblationOutcome { reports, table })
}
