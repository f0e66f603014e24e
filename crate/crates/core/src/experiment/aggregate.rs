use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::StreamSetting;
use crate::error::{Error, Result};
use crate::retrieval::{Protocol, HUNGARIAN_TOPK_RULE};
use crate::train::SelectionPolicy;

/// Accuracy of one seed under one (protocol, checkpoint policy) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetric {
    pub protocol: Protocol,
    pub selection: SelectionPolicy,
    pub epoch: usize,
    pub top1: f64,
    pub top5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub metrics: Vec<SeedMetric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n − 1). Reported as 0 when `n == 1`.
    pub std: f64,
    pub n: usize,
    /// False when `n == 1` and the deviation is undefined.
    pub std_defined: bool,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let std_defined = n > 1;
        let std = if std_defined {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            n,
            std_defined,
        }
    }

    /// `mean% ± std%`, e.g. `86.60% ± 1.80%`.
    pub fn percent(&self) -> String {
        let s = format!("{:.2}% ± {:.2}%", 100.0 * self.mean, 100.0 * self.std);
        if self.std_defined {
            s
        } else {
            s + " (n=1)"
        }
    }
}

/// Seed-aggregated value of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateEntry {
    pub protocol: Protocol,
    pub selection: SelectionPolicy,
    pub metric: String,
    #[serde(flatten)]
    pub stat: Stat,
    /// `headline`, `val-selected`, `prior-knowledge-assisted` and/or
    /// `diagnostic (test-selected)`.
    pub label: String,
}

pub fn label_for(protocol: Protocol, selection: SelectionPolicy) -> String {
    let mut parts = Vec::new();
    match selection {
        SelectionPolicy::FinalEpoch if protocol == Protocol::Standard => parts.push("headline"),
        SelectionPolicy::FinalEpoch => {}
        SelectionPolicy::ValSelected => parts.push("val-selected"),
        SelectionPolicy::BestTestDiagnostic => parts.push("diagnostic (test-selected)"),
    }
    if protocol == Protocol::Hungarian {
        parts.push("prior-knowledge-assisted");
    }
    parts.join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub name: String,
    pub streams: Option<StreamSetting>,
    /// Digest of the experiment config (output directory excluded).
    pub config_hash: String,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub entries: Vec<AggregateEntry>,
    pub rows: Vec<SeedRow>,
    pub incomplete: Vec<SeedFailure>,
    pub hungarian_topk_rule: String,
}

/// Folds per-seed rows into mean ± std per (protocol, policy, metric). Rows
/// are ordered by seed first, so the result does not depend on input order.
pub fn aggregate(name: &str, rows: &[SeedRow]) -> Result<AggregateReport> {
    if rows.is_empty() {
        return Err(Error::Parameter("aggregation needs at least one seed".into()));
    }
    let mut rows = rows.to_vec();
    rows.sort_by_key(|r| r.seed);
    let keys: Vec<(Protocol, SelectionPolicy)> =
        rows[0].metrics.iter().map(|m| (m.protocol, m.selection)).collect();
    for r in &rows {
        let k: Vec<_> = r.metrics.iter().map(|m| (m.protocol, m.selection)).collect();
        if k != keys {
            return Err(Error::Parameter(format!(
                "seed {} reports a different metric set than seed {}",
                r.seed, rows[0].seed
            )));
        }
    }
    let mut entries = Vec::new();
    for (i, &(protocol, selection)) in keys.iter().enumerate() {
        for metric in ["top1", "top5"] {
            let values: Vec<f64> = rows
                .iter()
                .map(|r| match metric {
                    "top1" => r.metrics[i].top1,
                    _ => r.metrics[i].top5,
                })
                .collect();
            entries.push(AggregateEntry {
                protocol,
                selection,
                metric: metric.into(),
                stat: Stat::of(&values),
                label: label_for(protocol, selection),
            });
        }
    }
    Ok(AggregateReport {
        name: name.into(),
        streams: None,
        config_hash: String::new(),
        n: rows.len(),
        seeds: rows.iter().map(|r| r.seed).collect(),
        entries,
        rows,
        incomplete: Vec::new(),
        hungarian_topk_rule: HUNGARIAN_TOPK_RULE.into(),
    })
}

impl AggregateReport {
    pub fn entry(&self, protocol: Protocol, selection: SelectionPolicy, metric: &str) -> Option<&AggregateEntry> {
        self.entries
            .iter()
            .find(|e| e.protocol == protocol && e.selection == selection && e.metric == metric)
    }

    pub fn headline(&self) -> Option<&AggregateEntry> {
        self.entry(Protocol::Standard, SelectionPolicy::FinalEpoch, "top1")
    }

    pub fn is_complete(&self) -> bool {
        self.incomplete.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Markdown summary, one line per aggregated metric.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} (n = {})\n", self.name, self.n);
        let _ = writeln!(s, "| Protocol | Checkpoint | Metric | Value | Label |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                e.protocol,
                e.selection.label(),
                e.metric,
                e.stat.percent(),
                e.label
            );
        }
        if self.entries.iter().any(|e| e.protocol == Protocol::Hungarian) {
            let _ = writeln!(s, "\nHungarian Top-k rule: {}.", self.hungarian_topk_rule);
        }
        for f in &self.incomplete {
            let _ = writeln!(s, "\nSeed {} incomplete: {}", f.seed, f.reason);
        }
        s
    }

    /// One CSV row per (seed, protocol, checkpoint).
    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Format(format!("report CSV: {e}"));
        w.write_record(["seed", "protocol", "selection", "epoch", "top1", "top5"])
            .map_err(err)?;
        for r in &self.rows {
            for m in &r.metrics {
                w.write_record([
                    r.seed.to_string(),
                    m.protocol.to_string(),
                    m.selection.label().to_string(),
                    m.epoch.to_string(),
                    m.top1.to_string(),
                    m.top5.to_string(),
                ])
                .map_err(err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub streams: StreamSetting,
    pub description: String,
    pub val_selected_top1: Option<Stat>,
    pub final_top1: Option<Stat>,
    pub best_test_top1: Option<Stat>,
    pub hungarian_final_top1: Option<Stat>,
    pub incomplete_seeds: Vec<u64>,
}

/// Side-by-side view of several stream settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// Settings by decreasing final-epoch mean Top-1 (reported, not asserted).
    pub ordering: Vec<StreamSetting>,
}

impl ComparisonTable {
    pub fn from_reports(reports: &[AggregateReport]) -> Result<Self> {
        let rows = reports
            .iter()
            .map(|r| {
                let streams = r
                    .streams
                    .ok_or_else(|| Error::Parameter(format!("report {} has no stream setting", r.name)))?;
                let get = |p, s| r.entry(p, s, "top1").map(|e| e.stat);
                Ok(ComparisonRow {
                    streams,
                    description: streams.description().into(),
                    val_selected_top1: get(Protocol::Standard, SelectionPolicy::ValSelected),
                    final_top1: get(Protocol::Standard, SelectionPolicy::FinalEpoch),
                    best_test_top1: get(Protocol::Standard, SelectionPolicy::BestTestDiagnostic),
                    hungarian_final_top1: get(Protocol::Hungarian, SelectionPolicy::FinalEpoch),
                    incomplete_seeds: r.incomplete.iter().map(|f| f.seed).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ordering: Vec<(f64, StreamSetting)> = rows
            .iter()
            .map(|r| (r.final_top1.map_or(f64::NEG_INFINITY, |s| s.mean), r.streams))
            .collect();
        ordering.sort_by(|a, b| b.0.total_cmp(&a.0));
        Ok(Self {
            rows,
            ordering: ordering.into_iter().map(|(_, s)| s).collect(),
        })
    }

    /// `a > b = c`: equal means are joined with `=`.
    pub fn ordering_line(&self) -> String {
        let mean = |s: StreamSetting| {
            self.rows
                .iter()
                .find(|r| r.streams == s)
                .and_then(|r| r.final_top1)
                .map_or(f64::NEG_INFINITY, |st| st.mean)
        };
        let mut line = String::new();
        for (i, &s) in self.ordering.iter().enumerate() {
            if i > 0 {
                line.push_str(if mean(self.ordering[i - 1]) == mean(s) { " = " } else { " > " });
            }
            line.push_str(s.as_str());
        }
        line
    }

    pub fn to_markdown(&self) -> String {
        let cell = |s: &Option<Stat>| s.map_or("—".to_string(), |s| s.percent());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "| Configuration | Val-sel Top-1 | Final Epoch Top-1 | Best-test Top-1 † | Hungarian Top-1 ‡ |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                r.description,
                cell(&r.val_selected_top1),
                cell(&r.final_top1),
                cell(&r.best_test_top1),
                cell(&r.hungarian_final_top1)
            );
        }
        let _ = writeln!(out, "\n† Selected on the test set; diagnostic only, biased upwards.");
        let _ = writeln!(out, "‡ Final epoch, one-to-one assignment; prior-knowledge-assisted.");
        let _ = writeln!(out, "\nOrdering by final-epoch mean Top-1: {}", self.ordering_line());
        for r in self.rows.iter().filter(|r| !r.incomplete_seeds.is_empty()) {
            let _ = writeln!(out, "\n{}: incomplete seeds {:?}", r.streams.as_str(), r.incomplete_seeds);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, top1: f64) -> SeedRow {
        SeedRow {
            seed,
            metrics: vec![SeedMetric {
                protocol: Protocol::Standard,
                selection: SelectionPolicy::FinalEpoch,
                epoch: 3,
                top1,
                top5: 1.0,
            }],
        }
    }

    #[test]
    fn single_seed_flags_std() {
        let r = aggregate("x", &[row(7, 0.5)]).unwrap();
        let h = r.headline().unwrap();
        assert_eq!((h.stat.mean, h.stat.std, h.stat.std_defined), (0.5, 0.0, false));
        assert!(h.stat.percent().ends_with("(n=1)"));
    }

    #[test]
    fn two_seeds_and_order_independence() {
        let a = aggregate("x", &[row(1, 0.8), row(2, 0.9)]).unwrap();
        let b = aggregate("x", &[row(2, 0.9), row(1, 0.8)]).unwrap();
        assert_eq!(a, b);
        let h = a.headline().unwrap();
        assert!((h.stat.mean - 0.85).abs() < 1e-15);
        assert!((h.stat.std - 0.005f64.sqrt()).abs() < 1e-12);
        assert_eq!(h.stat.percent(), "85.00% ± 7.07%");
        assert_eq!(h.label, "headline");
    }

    #[test]
    fn labels_mark_assisted_and_diagnostic() {
        assert_eq!(
            label_for(Protocol::Hungarian, SelectionPolicy::FinalEpoch),
            "prior-knowledge-assisted"
        );
        assert_eq!(
            label_for(Protocol::Standard, SelectionPolicy::BestTestDiagnostic),
            "diagnostic (test-selected)"
        );
    }

    #[test]
    fn ordering_marks_ties() {
        let report = |s, vals: &[f64]| {
            let rows: Vec<_> = vals.iter().enumerate().map(|(i, &v)| row(i as u64, v)).collect();
            let mut r = aggregate("x", &rows).unwrap();
            r.streams = Some(s);
            r
        };
        let t = ComparisonTable::from_reports(&[
            report(StreamSetting::None, &[0.5, 0.7]),
            report(StreamSetting::Both, &[0.9, 0.9]),
            report(StreamSetting::BlurOnly, &[0.6, 0.6]),
        ])
        .unwrap();
        assert_eq!(t.ordering_line(), "both > none = blur_only");
        assert!(t.to_markdown().contains("60.00% ± 0.00%"));
    }
}
