use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{SplitSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::features::{blur_stream_name, ProviderSource, ProviderSpec, EVNET_STREAM};
use crate::preproc::{BlurSpec, RsvpSpec};
use crate::retrieval::Protocol;
use crate::train::{SelectionPolicy, StreamSelection, TrainConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Which visual streams feed the encoder. `none` and `evnet_only` keep the
/// unblurred image (kernel 1) as the single "blur" level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamSetting {
    None,
    EvnetOnly,
    BlurOnly,
    Both,
}

impl StreamSetting {
    pub const ALL: [StreamSetting; 4] = [
        StreamSetting::None,
        StreamSetting::EvnetOnly,
        StreamSetting::BlurOnly,
        StreamSetting::Both,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StreamSetting::None => "none",
            StreamSetting::EvnetOnly => "evnet_only",
            StreamSetting::BlurOnly => "blur_only",
            StreamSetting::Both => "both",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            StreamSetting::None => "No blur, no EVNet (baseline)",
            StreamSetting::EvnetOnly => "EVNet, no blur",
            StreamSetting::BlurOnly => "Multi-blur",
            StreamSetting::Both => "Multi-blur + EVNet",
        }
    }

    pub fn selection(self, blur: &BlurSpec) -> StreamSelection {
        let all_levels = matches!(self, StreamSetting::BlurOnly | StreamSetting::Both);
        let blur = if all_levels {
            blur.kernel_sizes.iter().map(|&k| blur_stream_name(k)).collect()
        } else {
            vec![blur_stream_name(1)]
        };
        let evnet = matches!(self, StreamSetting::EvnetOnly | StreamSetting::Both)
            .then(|| EVNET_STREAM.to_string());
        StreamSelection { blur, evnet }
    }
}

impl std::str::FromStr for StreamSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StreamSetting::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown stream setting {s:?} (expected none, evnet_only, blur_only or both)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Generated in-process; the generated bank is used unless `features`
    /// overrides it.
    Synthetic(SyntheticSpec),
    /// Dataset containers on disk. Labels index the images of `features`,
    /// looked up by the dataset's class names.
    Files { train: PathBuf, test: PathBuf },
}

fn default_name() -> String {
    "experiment".into()
}
fn default_protocols() -> Vec<Protocol> {
    vec![Protocol::Standard, Protocol::Hungarian]
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    pub data: DataSource,
    /// Feature source; required for file datasets.
    #[serde(default)]
    pub features: Option<ProviderSpec>,
    pub streams: StreamSetting,
    #[serde(default)]
    pub blur: BlurSpec,
    /// Stimuli are composited onto the acquisition display before feature
    /// extraction. Only affects image preprocessing for external extractors.
    #[serde(default)]
    pub rsvp: Option<RsvpSpec>,
    pub train: TrainConfig,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<Protocol>,
    /// Hold out a validation split of the training set.
    #[serde(default)]
    pub split: Option<SplitSpec>,
    /// Also report the test-selected epoch, labelled as a diagnostic.
    #[serde(default)]
    pub report_best_test_diagnostic: bool,
    pub out_dir: PathBuf,
    /// Seeds trained concurrently.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentConfig {
    /// The standard synthetic benchmark with the full-scale schedule shortened
    /// to desk scale (30 epochs, batch 256).
    pub fn synthetic_benchmark(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: default_name(),
            data: DataSource::Synthetic(SyntheticSpec::default()),
            features: None,
            streams: StreamSetting::Both,
            blur: BlurSpec::default(),
            rsvp: None,
            train: TrainConfig {
                epochs: 30,
                batch_size: 256,
                seeds: (0..5).collect(),
                ..TrainConfig::default()
            },
            protocols: default_protocols(),
            split: None,
            report_best_test_diagnostic: true,
            out_dir: out_dir.into(),
            workers: 1,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        cfg.check_schema()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    fn check_schema(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        Ok(())
    }

    pub fn stream_selection(&self) -> StreamSelection {
        self.streams.selection(&self.blur)
    }

    /// Checks everything that can be checked before any seed runs, including
    /// that referenced paths exist.
    pub fn validate(&self) -> Result<()> {
        self.check_schema()?;
        self.train.validate()?;
        self.blur.validate()?;
        if self.train.seeds.is_empty() {
            return Err(Error::Config("no seeds requested".into()));
        }
        let mut seeds = self.train.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.train.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.protocols.is_empty() {
            return Err(Error::Config("no retrieval protocol requested".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.protocols.contains(&Protocol::Hungarian) && !self.train.eval_hungarian {
            return Err(Error::Config(
                "the hungarian protocol needs train.eval_hungarian = true".into(),
            ));
        }
        if self.train.selection == SelectionPolicy::BestTestDiagnostic {
            return Err(Error::Config(
                "best_test_diagnostic cannot be the reported selection; set \
                 report_best_test_diagnostic instead"
                    .into(),
            ));
        }
        if self.train.selection == SelectionPolicy::ValSelected && self.split.is_none() {
            return Err(Error::Config("val_selected needs a validation split".into()));
        }
        let must_exist = |p: &Path| -> Result<()> {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{} does not exist", p.display())))
            }
        };
        if let DataSource::Files { train, test } = &self.data {
            must_exist(train)?;
            must_exist(test)?;
            if self.features.is_none() {
                return Err(Error::Config("file datasets need a features provider".into()));
            }
        }
        if let Some(spec) = &self.features {
            if let ProviderSource::Precomputed { path } = &spec.source {
                must_exist(path)?;
            }
            let sel = self.stream_selection();
            for s in sel.blur.iter().chain(&sel.evnet) {
                if !spec.streams.contains(s) {
                    return Err(Error::Config(format!(
                        "provider does not supply stream {s:?} needed by '{}'",
                        self.streams.as_str()
                    )));
                }
            }
        }
        if let Some(r) = &self.rsvp {
            if !(r.image_area_fraction > 0.0 && r.image_area_fraction <= 1.0) {
                return Err(Error::Config("rsvp image_area_fraction outside (0, 1]".into()));
            }
        }
        Ok(())
    }
}
