use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{correlation_distance, pixcorr, ssim_with, two_way_identification, SsimParams, PIXCORR_SIZE};
use crate::data::FeatureBank;
use crate::error::{Error, Result};
use crate::preproc::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Higher,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub direction: Direction,
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 when n = 1.
    pub std: f64,
    pub n: usize,
}

impl MetricSummary {
    pub fn from_values(name: &str, direction: Direction, values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            name: name.into(),
            direction,
            mean,
            std,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub id: String,
    pub ssim: f64,
    pub pixcorr: f64,
}

/// Scores of a generated set against its ground truth, with the settings used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: Vec<MetricSummary>,
    pub pairs: Vec<PairScore>,
    pub ssim_params: SsimParams,
    pub pixcorr_size: usize,
    pub two_way_convention: String,
}

impl MetricReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Format(format!("report CSV: {e}"));
        w.write_record(["id", "ssim", "pixcorr"]).map_err(err)?;
        for p in &self.pairs {
            w.write_record([p.id.clone(), p.ssim.to_string(), p.pixcorr.to_string()])
                .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
    }
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Pairs `gen_dir/*.png` with same-named files in `gt_dir`, scores SSIM and
/// PixCorr per pair, and two-way identification / correlation distance for
/// every named bank (each holding a `gen` and a `gt` stream).
pub fn score_directories(
    gen_dir: &Path,
    gt_dir: &Path,
    banks: &[(String, FeatureBank)],
) -> Result<MetricReport> {
    let names = png_names(gen_dir)?;
    if names.is_empty() {
        return Err(Error::Lookup(format!("no PNG images in {}", gen_dir.display())));
    }
    let params = SsimParams::default();
    let mut pairs = Vec::with_capacity(names.len());
    for name in &names {
        let gt_path: PathBuf = gt_dir.join(name);
        if !gt_path.exists() {
            return Err(Error::Lookup(format!("{} has no ground truth {}", name, gt_path.display())));
        }
        let g = Image::load_png(&gen_dir.join(name))?;
        let t = Image::load_png(&gt_path)?;
        let t = if (t.height(), t.width()) != (g.height(), g.width()) {
            t.resize_bilinear(g.height(), g.width())?
        } else {
            t
        };
        pairs.push(PairScore {
            id: name.clone(),
            ssim: ssim_with(&g, &t, &params)?,
            pixcorr: pixcorr(&g, &t)?,
        });
    }
    let mut metrics = vec![
        MetricSummary::from_values(
            "ssim",
            Direction::Higher,
            &pairs.iter().map(|p| p.ssim).collect::<Vec<_>>(),
        ),
        MetricSummary::from_values(
            "pixcorr",
            Direction::Higher,
            &pairs.iter().map(|p| p.pixcorr).collect::<Vec<_>>(),
        ),
    ];
    for (label, bank) in banks {
        let (gen, gt) = gen_gt(bank)?;
        let dim = bank.dim();
        metrics.push(MetricSummary::from_values(
            &format!("{label}_two_way"),
            Direction::Higher,
            &[two_way_identification(&gen, &gt, dim)?],
        ));
        metrics.push(MetricSummary::from_values(
            &format!("{label}_corr_distance"),
            Direction::Lower,
            &[correlation_distance(&gen, &gt, dim)?],
        ));
    }
    Ok(MetricReport {
        metrics,
        pairs,
        ssim_params: params,
        pixcorr_size: PIXCORR_SIZE,
        two_way_convention: "ordered pairs (i, j != i), Pearson over feature dimensions, ties count 0.5".into(),
    })
}

fn gen_gt(bank: &FeatureBank) -> Result<(Vec<f64>, Vec<f64>)> {
    let idx = |s: &str| {
        bank.stream_index(s)
            .ok_or_else(|| Error::Config(format!("metric bank needs a {s:?} stream")))
    };
    let (gi, ti) = (idx("gen")?, idx("gt")?);
    let rows = |s: usize| -> Vec<f64> {
        (0..bank.n_images())
            .flat_map(|i| bank.vector(i, s).iter().map(|&v| v as f64))
            .collect()
    };
    Ok((rows(gi), rows(ti)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let s = MetricSummary::from_values("x", Direction::Higher, &[0.8, 0.9]);
        assert!((s.mean - 0.85).abs() < 1e-15);
        assert!((s.std - 0.0707106781186548).abs() < 1e-12);
        let one = MetricSummary::from_values("x", Direction::Higher, &[0.5]);
        assert_eq!((one.mean, one.std), (0.5, 0.0));
    }

    #[test]
    fn scores_png_directories() {
        let dir = tempfile::tempdir().unwrap();
        let (gen, gt) = (dir.path().join("gen"), dir.path().join("gt"));
        fs::create_dir_all(&gen).unwrap();
        fs::create_dir_all(&gt).unwrap();
        for i in 0..3 {
            let img = Image::from_fn(24, 24, |y, x| {
                [((x * (i + 1) + y) % 24) as f64 / 23.0, (y as f64) / 23.0, 0.5]
            })
            .unwrap();
            img.save_png(&gen.join(format!("{i}.png"))).unwrap();
            img.save_png(&gt.join(format!("{i}.png"))).unwrap();
        }
        let report = score_directories(&gen, &gt, &[]).unwrap();
        assert_eq!(report.pairs.len(), 3);
        assert!((report.metrics[0].mean - 1.0).abs() < 1e-12);
        assert!((report.metrics[1].mean - 1.0).abs() < 1e-12);
        fs::remove_file(gt.join("2.png")).unwrap();
        assert!(matches!(score_directories(&gen, &gt, &[]), Err(Error::Lookup(_))));
    }
}
