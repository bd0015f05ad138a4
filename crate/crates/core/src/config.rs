//! Run configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//! parallel = 4
//! methods = ["cot-0.2", "cot-0.4", "direct"]
//! domains = ["motion2d"]
//!
//! [samples]
//! motion2d = 5
//!
//! [backend]
//! kind = "oracle"
//!
//! [noise]
//! sigma_derender = 0.0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::AggregateOptions;
use crate::cot::{ContextMode, MethodConfig, RemoteDescriptor};
use crate::mental::{DetectorSet, NoiseConfig, ParamBias};
use crate::physics::{Domain, GridOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendChoice {
    #[default]
    Oracle,
    Remote,
    Replay,
}

impl std::str::FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(BackendChoice::Oracle),
            "remote" => Ok(BackendChoice::Remote),
            "replay" => Ok(BackendChoice::Replay),
            _ => Err(format!("unknown backend `{s}` (expected oracle, remote or replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendChoice,
    /// Id used in cache keys for the oracle backend.
    pub oracle_id: String,
    pub remote: RemoteDescriptor,
    /// Store to replay from.
    pub replay_store: Option<PathBuf>,
    /// Backend id the replayed frames were stored under.
    pub replay_source_id: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendChoice::Oracle,
            oracle_id: "oracle".into(),
            remote: RemoteDescriptor::default(),
            replay_store: None,
            replay_source_id: "oracle".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    #[serde(flatten)]
    pub aggregate: AggregateOptions,
    /// Minimum fraction of generated frames the detectors must find.
    pub min_detection_coverage: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { aggregate: AggregateOptions::default(), min_detection_coverage: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub parallel: usize,
    /// Output directory; the frame store defaults to `<out>/store`.
    pub out: PathBuf,
    pub store: Option<PathBuf>,
    pub methods: Vec<String>,
    pub domains: Vec<Domain>,
    /// Only stimuli whose id contains this substring.
    pub stimulus_filter: Option<String>,
    /// Samples per stimulus, by domain name.
    pub samples: BTreeMap<String, u32>,
    pub context: ContextMode,
    pub record_wall_clock: bool,
    pub backend: BackendConfig,
    pub noise: NoiseConfig,
    pub bias: ParamBias,
    pub detectors: DetectorSet,
    pub grid: GridOptions,
    pub analysis: AnalysisConfig,
}

pub fn default_samples(domain: Domain) -> u32 {
    match domain {
        Domain::Motion2d => 5,
        Domain::Gravity2d => 20,
        Domain::Fluids | Domain::Bouncing => 10,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            parallel: std::thread::available_parallelism().map_or(1, |n| n.get()),
            out: PathBuf::from("out"),
            store: None,
            methods: MethodConfig::ALL.iter().map(MethodConfig::label).collect(),
            domains: Domain::ALL.to_vec(),
            stimulus_filter: None,
            samples: BTreeMap::new(),
            context: ContextMode::Full,
            record_wall_clock: false,
            backend: BackendConfig::default(),
            noise: NoiseConfig::default(),
            bias: ParamBias::default(),
            detectors: DetectorSet::default(),
            grid: GridOptions::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: RunConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.parallel == 0 {
            return bad("parallel must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        self.method_configs()?;
        if self.domains.is_empty() {
            return bad("no domains selected".into());
        }
        for key in self.samples.keys() {
            if key.parse::<Domain>().is_err() {
                return bad(format!("samples: unknown domain `{key}`"));
            }
        }
        self.noise.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.detectors.water.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.analysis.min_detection_coverage) {
            return bad("analysis.min_detection_coverage must be in [0, 1]".into());
        }
        if self.analysis.aggregate.resamples == 0 {
            return bad("analysis.resamples must be positive".into());
        }
        match self.backend.kind {
            BackendChoice::Remote => {
                self.backend.remote.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
            BackendChoice::Replay => {
                if self.backend.replay_store.is_none() {
                    return bad("replay backend needs backend.replay_store".into());
                }
            }
            BackendChoice::Oracle => {}
        }
        Ok(())
    }

    pub fn method_configs(&self) -> Result<Vec<MethodConfig>, ConfigError> {
        self.methods
            .iter()
            .map(|m| MethodConfig::from_label(m).map_err(|e| ConfigError::Invalid(e.to_string())))
            .collect()
    }

    pub fn samples_for(&self, domain: Domain) -> u32 {
        self.samples.get(domain.name()).copied().unwrap_or_else(|| default_samples(domain))
    }

    pub fn store_dir(&self) -> PathBuf {
        self.store.clone().unwrap_or_else(|| self.out.join("store"))
    }
}
