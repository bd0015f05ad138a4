use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::store::{CacheKey, FrameStore};
use super::PromptParams;
use crate::mental::{oracle_generate, DetectorSet, MentalError, NoiseConfig, OracleSetup, ParamBias};
use crate::physics::StimulusSpec;
use crate::render::{CanvasStyle, Frame, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    RemoteImageService,
    Oracle,
    Replay,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("malformed image payload: {0}")]
    Payload(String),
    #[error("replay miss: {0}")]
    ReplayMiss(String),
    #[error("de-render failed: {0}")]
    Derender(String),
    #[error("oracle could not produce a frame: {0}")]
    Invalid(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

/// One prompt of the conversation, with the images sent alongside it and the
/// image the backend answered with (absent for the pending prompt).
#[derive(Debug, Clone)]
pub struct Turn<'a> {
    pub prompt: &'a str,
    pub images: Vec<&'a Frame>,
    pub reply: Option<&'a Frame>,
}

/// What a backend sees when asked for the next frame. The last turn is the
/// pending prompt.
#[derive(Debug, Clone)]
pub struct ConversationView<'a> {
    pub spec: &'a StimulusSpec,
    pub turns: Vec<Turn<'a>>,
    pub params: &'a PromptParams,
    pub step_index: usize,
    pub session_id: &'a str,
    pub session_seed: u64,
    pub key: &'a CacheKey,
}

impl ConversationView<'_> {
    pub fn prompt(&self) -> &str {
        self.turns.last().map_or("", |t| t.prompt)
    }

    /// Every image in the conversation, sorted by time.
    pub fn frames(&self) -> Vec<&Frame> {
        let mut v: Vec<&Frame> = self
            .turns
            .iter()
            .flat_map(|t| t.images.iter().copied().chain(t.reply))
            .collect();
        v.sort_by(|a, b| a.time_sec.total_cmp(&b.time_sec));
        v
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub frame: Frame,
    pub attempts: u32,
}

/// Anything that can answer a conversation with one image.
pub trait Backend: Send + Sync {
    /// Stable identifier, part of every cache key.
    fn id(&self) -> &str;
    fn kind(&self) -> BackendKind;
    fn generate(&self, view: &ConversationView<'_>) -> Result<Generated, BackendError>;
    fn attachment_mode(&self) -> Option<super::AttachmentMode> {
        None
    }
}

/// Image generator built from the noisy de-render / simulate / render kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleBackend {
    pub id: String,
    pub noise: NoiseConfig,
    pub bias: ParamBias,
    pub detectors: DetectorSet,
}

impl OracleBackend {
    pub fn new(noise: NoiseConfig) -> Self {
        OracleBackend { id: "oracle".into(), noise, bias: ParamBias::default(), detectors: DetectorSet::default() }
    }
}

impl Backend for OracleBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Oracle
    }

    fn generate(&self, view: &ConversationView<'_>) -> Result<Generated, BackendError> {
        let setup = OracleSetup {
            spec: view.spec.clone(),
            style: CanvasStyle::for_domain(view.spec.domain()),
            detectors: self.detectors.clone(),
            noise: self.noise.clone(),
            bias: self.bias.clone(),
        };
        let frames: Vec<Frame> = view.frames().into_iter().cloned().collect();
        let frame = oracle_generate(
            &frames,
            &setup,
            view.params.seconds_forward,
            view.session_seed,
            view.step_index as u64,
        )
        .map_err(|e| match e {
            MentalError::Derender { .. } | MentalError::NoFrames => BackendError::Derender(e.to_string()),
            MentalError::Config(_) | MentalError::DetectorConfig(_) => BackendError::Config(e.to_string()),
            _ => BackendError::Invalid(e.to_string()),
        })?;
        Ok(Generated { frame, attempts: 1 })
    }
}

/// Serves frames from an existing store; never generates.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    source: FrameStore,
    /// Backend id under which the source frames were stored.
    source_id: String,
}

impl ReplayBackend {
    pub fn new(source: FrameStore, source_id: impl Into<String>) -> Result<Self, BackendError> {
        if !source.root().is_dir() {
            return Err(BackendError::Config(format!("replay store {} does not exist", source.root().display())));
        }
        Ok(ReplayBackend { source, source_id: source_id.into() })
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> &str {
        &self.source_id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn generate(&self, view: &ConversationView<'_>) -> Result<Generated, BackendError> {
        let rel = view.key.path();
        if !self.source.exists(&rel) {
            return Err(BackendError::ReplayMiss(rel));
        }
        let frame = self
            .source
            .read_frame(&rel, 0.0, Provenance::Generated)
            .map_err(|e| BackendError::Payload(e.to_string()))?;
        Ok(Generated { frame, attempts: 1 })
    }
}
