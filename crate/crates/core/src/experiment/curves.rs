//! Hand-written SVG learning curves: Top-1 and loss against epoch, one thin
//! line per seed, the seed mean, and a ±1 σ band (n − 1 denominator).
//!
//! Palette: seeds `#9ecae1`, mean `#08519c`, band `#6baed6` at 30 % opacity.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::Stat;
use crate::error::{Error, Result};
use crate::train::RunRecord;

pub const PANEL_WIDTH: f64 = 900.0;
pub const PANEL_HEIGHT: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const SEED_COLOR: &str = "#9ecae1";
const MEAN_COLOR: &str = "#08519c";
const BAND_COLOR: &str = "#6baed6";

/// Per-epoch mean and σ of one curve across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn curve_stats(series: &[Vec<f64>]) -> CurveStats {
    let epochs = series[0].len();
    let stats: Vec<Stat> = (0..epochs)
        .map(|e| Stat::of(&series.iter().map(|s| s[e]).collect::<Vec<_>>()))
        .collect();
    CurveStats {
        mean: stats.iter().map(|s| s.mean).collect(),
        std: stats.iter().map(|s| s.std).collect(),
    }
}

/// Maps data coordinates of one panel to canvas pixels.
#[derive(Debug, Clone, Copy)]
pub struct PanelScale {
    pub epochs: usize,
    pub y_min: f64,
    pub y_max: f64,
    /// Vertical offset of the panel on the canvas.
    pub offset: f64,
}

impl PanelScale {
    pub fn x(&self, epoch: usize) -> f64 {
        let w = PANEL_WIDTH - LEFT - RIGHT;
        if self.epochs <= 1 {
            LEFT + w / 2.0
        } else {
            LEFT + w * epoch as f64 / (self.epochs - 1) as f64
        }
    }

    pub fn y(&self, value: f64) -> f64 {
        let h = PANEL_HEIGHT - TOP - BOTTOM;
        self.offset + TOP + h * (self.y_max - value) / (self.y_max - self.y_min)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn polyline(scale: &PanelScale, values: &[f64]) -> String {
    values
        .iter()
        .enumerate()
        .map(|(e, &v)| format!("{},{}", fmt(scale.x(e)), fmt(scale.y(v))))
        .collect::<Vec<_>>()
        .join(" ")
}

fn panel(
    svg: &mut String,
    id: &str,
    title: &str,
    scale: &PanelScale,
    series: &[(u64, Vec<f64>)],
    stats: &CurveStats,
) {
    let (x0, x1) = (LEFT, PANEL_WIDTH - RIGHT);
    let (y0, y1) = (scale.offset + TOP, scale.offset + PANEL_HEIGHT - BOTTOM);
    let _ = writeln!(svg, r#"<g class="panel" id="{id}">"#);
    let _ = writeln!(
        svg,
        r#"<clipPath id="clip-{id}"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath>"#,
        fmt(x0),
        fmt(y0),
        fmt(x1 - x0),
        fmt(y1 - y0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="15" text-anchor="middle">{title}</text>"#,
        fmt(PANEL_WIDTH / 2.0),
        fmt(scale.offset + 24.0)
    );
    let _ = writeln!(
        svg,
        r#"<path class="axes" d="M{},{} V{} H{}" fill="none" stroke="black"/>"#,
        fmt(x0),
        fmt(y0),
        fmt(y1),
        fmt(x1)
    );
    for t in 0..=4 {
        let v = scale.y_min + (scale.y_max - scale.y_min) * t as f64 / 4.0;
        let y = scale.y(v);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{v:.2}</text>"#,
            fmt(x0 - 6.0),
            fmt(y + 4.0)
        );
    }
    let step = scale.epochs.div_ceil(10).max(1);
    for e in (0..scale.epochs).step_by(step) {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{e}</text>"#,
            fmt(scale.x(e)),
            fmt(y1 + 16.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">epoch</text>"#,
        fmt((x0 + x1) / 2.0),
        fmt(y1 + 36.0)
    );
    let _ = writeln!(svg, r#"<g clip-path="url(#clip-{id})">"#);
    if series.len() > 1 {
        let upper: Vec<f64> = stats.mean.iter().zip(&stats.std).map(|(m, s)| m + s).collect();
        let lower: Vec<f64> = stats.mean.iter().zip(&stats.std).map(|(m, s)| m - s).collect();
        let mut pts: Vec<String> = upper
            .iter()
            .enumerate()
            .map(|(e, &v)| format!("{},{}", fmt(scale.x(e)), fmt(scale.y(v))))
            .collect();
        pts.extend(
            lower
                .iter()
                .enumerate()
                .rev()
                .map(|(e, &v)| format!("{},{}", fmt(scale.x(e)), fmt(scale.y(v)))),
        );
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{}" fill="{BAND_COLOR}" fill-opacity="0.3" stroke="none"/>"#,
            pts.join(" ")
        );
    }
    for (seed, values) in series {
        let _ = writeln!(
            svg,
            r#"<polyline class="seed" data-seed="{seed}" points="{}" fill="none" stroke="{SEED_COLOR}" stroke-width="0.8"/>"#,
            polyline(scale, values)
        );
    }
    if series.len() > 1 {
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{MEAN_COLOR}" stroke-width="2"/>"#,
            polyline(scale, &stats.mean)
        );
    }
    let _ = writeln!(svg, "</g>\n</g>");
}

/// Range of the loss panel: every seed value and both band edges.
fn loss_range(series: &[(u64, Vec<f64>)], stats: &CurveStats) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in series.iter().flat_map(|(_, s)| s.iter()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    for (m, s) in stats.mean.iter().zip(&stats.std) {
        lo = lo.min(m - s);
        hi = hi.max(m + s);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Scales of the Top-1 (fixed `[0, 1]`) and loss panels for `records`.
pub fn panel_scales(records: &[RunRecord]) -> Result<(PanelScale, PanelScale)> {
    check(records)?;
    let epochs = records[0].epochs.len();
    let loss: Vec<(u64, Vec<f64>)> = records
        .iter()
        .map(|r| (r.seed, r.epochs.iter().map(|e| e.loss).collect()))
        .collect();
    let stats = curve_stats(&loss.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>());
    let (lo, hi) = loss_range(&loss, &stats);
    Ok((
        PanelScale {
            epochs,
            y_min: 0.0,
            y_max: 1.0,
            offset: 0.0,
        },
        PanelScale {
            epochs,
            y_min: lo,
            y_max: hi,
            offset: PANEL_HEIGHT,
        },
    ))
}

fn check(records: &[RunRecord]) -> Result<()> {
    let first = records
        .first()
        .ok_or_else(|| Error::Parameter("no records to plot".into()))?;
    if first.epochs.is_empty() {
        return Err(Error::Parameter("record has no epochs".into()));
    }
    if let Some(r) = records.iter().find(|r| r.epochs.len() != first.epochs.len()) {
        return Err(Error::Parameter(format!(
            "records disagree on epoch count ({} for seed {}, {} for seed {})",
            first.epochs.len(),
            first.seed,
            r.epochs.len(),
            r.seed
        )));
    }
    Ok(())
}

pub fn render_curves(records: &[RunRecord]) -> Result<String> {
    let (top_scale, loss_scale) = panel_scales(records)?;
    let top1: Vec<(u64, Vec<f64>)> = records
        .iter()
        .map(|r| (r.seed, r.epochs.iter().map(|e| e.top1).collect()))
        .collect();
    let loss: Vec<(u64, Vec<f64>)> = records
        .iter()
        .map(|r| (r.seed, r.epochs.iter().map(|e| e.loss).collect()))
        .collect();
    let plain = |s: &[(u64, Vec<f64>)]| s.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>();
    let top_stats = curve_stats(&plain(&top1));
    let loss_stats = curve_stats(&plain(&loss));

    #[derive(Serialize)]
    struct Desc<'a> {
        epochs: usize,
        n: usize,
        top1: &'a CurveStats,
        loss: &'a CurveStats,
    }
    let desc = serde_json::to_string(&Desc {
        epochs: top_scale.epochs,
        n: records.len(),
        top1: &top_stats,
        loss: &loss_stats,
    })
    .expect("curve stats serialize");

    let height = 2.0 * PANEL_HEIGHT;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_WIDTH}" height="{height}" viewBox="0 0 {PANEL_WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, "<desc>{desc}</desc>");
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(&mut svg, "top1", "Test Top-1 accuracy", &top_scale, &top1, &top_stats);
    panel(&mut svg, "loss", "Training loss", &loss_scale, &loss, &loss_stats);
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_curves(records: &[RunRecord], path: &Path) -> Result<()> {
    let svg = render_curves(records)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
