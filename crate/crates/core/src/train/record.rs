use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which epoch's parameters a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    #[default]
    FinalEpoch,
    ValSelected,
    /// Picks the epoch with the highest test Top-1. Selecting on the test set
    /// biases the number upwards; it is only ever reported as a diagnostic.
    BestTestDiagnostic,
}

impl SelectionPolicy {
    pub fn label(self) -> &'static str {
        match self {
            SelectionPolicy::FinalEpoch => "final_epoch",
            SelectionPolicy::ValSelected => "val_selected",
            SelectionPolicy::BestTestDiagnostic => "best_test_diagnostic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub top1: f64,
    pub top5: f64,
    pub val_acc: Option<f64>,
    pub hungarian_top1: Option<f64>,
    pub hungarian_top5: Option<f64>,
}

/// Per-epoch history of one (seed, config) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub config_hash: String,
    pub selection: SelectionPolicy,
    pub selected_epoch: usize,
    pub epochs: Vec<EpochMetrics>,
}

impl RunRecord {
    pub fn selected(&self) -> &EpochMetrics {
        &self.epochs[self.selected_epoch]
    }

    pub fn final_epoch(&self) -> &EpochMetrics {
        self.epochs.last().expect("records are never empty")
    }

    /// CSV with one row per epoch; absent optional metrics are empty cells.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format(format!("record CSV: {e}"));
        w.write_record(["epoch", "loss", "top1", "top5", "val_acc", "hungarian_top1", "hungarian_top5"])
            .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.loss.to_string(),
                e.top1.to_string(),
                e.top5.to_string(),
                opt(e.val_acc),
                opt(e.hungarian_top1),
                opt(e.hungarian_top5),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("record.csv");
        fs::write(&csv_path, self.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join("record.json");
        let json = serde_json::to_string_pretty(self).expect("record serializes");
        fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let path = if path.is_dir() { path.join("record.json") } else { path.to_path_buf() };
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Index of the first maximum (earliest epoch wins ties).
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn select_checkpoint(epochs: &[EpochMetrics], policy: SelectionPolicy) -> Result<usize> {
    if epochs.is_empty() {
        return Err(Error::Parameter("cannot select from an empty record".into()));
    }
    Ok(match policy {
        SelectionPolicy::FinalEpoch => epochs.len() - 1,
        SelectionPolicy::ValSelected => {
            let vals = epochs
                .iter()
                .map(|e| e.val_acc)
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| {
                    Error::Config("val_selected needs validation accuracy on every epoch".into())
                })?;
            argmax(vals.into_iter())
        }
        SelectionPolicy::BestTestDiagnostic => argmax(epochs.iter().map(|e| e.top1)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn epochs(vals: &[Option<f64>], top1: &[f64]) -> Vec<EpochMetrics> {
        vals.iter()
            .zip(top1)
            .enumerate()
            .map(|(i, (&v, &t))| EpochMetrics {
                epoch: i,
                loss: 1.0 / (i + 1) as f64,
                top1: t,
                top5: t,
                val_acc: v,
                hungarian_top1: None,
                hungarian_top5: None,
            })
            .collect()
    }

    #[test]
    fn single_epoch_selects_zero_everywhere() {
        let e = epochs(&[Some(0.2)], &[0.1]);
        for p in [
            SelectionPolicy::FinalEpoch,
            SelectionPolicy::ValSelected,
            SelectionPolicy::BestTestDiagnostic,
        ] {
            assert_eq!(select_checkpoint(&e, p).unwrap(), 0);
        }
    }

    #[test]
    fn val_peak_and_ties() {
        let vals: Vec<Option<f64>> = [0.1, 0.2, 0.3, 0.9, 0.5, 0.4, 0.9, 0.2, 0.1, 0.3]
            .iter()
            .map(|&v| Some(v))
            .collect();
        let e = epochs(&vals, &[0.0; 10]);
        assert_eq!(select_checkpoint(&e, SelectionPolicy::ValSelected).unwrap(), 3);
        let rising: Vec<Option<f64>> = (0..5).map(|i| Some(i as f64)).collect();
        let e = epochs(&rising, &[0.0; 5]);
        assert_eq!(select_checkpoint(&e, SelectionPolicy::ValSelected).unwrap(), 4);
    }

    #[test]
    fn missing_val_is_configuration_error() {
        let e = epochs(&[Some(0.1), None], &[0.1, 0.2]);
        assert!(matches!(
            select_checkpoint(&e, SelectionPolicy::ValSelected),
            Err(Error::Config(_))
        ));
        assert!(matches!(select_checkpoint(&[], SelectionPolicy::FinalEpoch), Err(Error::Parameter(_))));
    }

    #[test]
    fn csv_has_empty_cells_for_missing_metrics() {
        let r = RunRecord {
            seed: 1,
            config_hash: "abc".into(),
            selection: SelectionPolicy::FinalEpoch,
            selected_epoch: 1,
            epochs: epochs(&[None, None], &[0.25, 0.5]),
        };
        let csv = r.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,loss,top1,top5,val_acc,hungarian_top1,hungarian_top5");
        assert_eq!(lines[2], "1,0.5,0.5,0.5,,,");
    }
}
