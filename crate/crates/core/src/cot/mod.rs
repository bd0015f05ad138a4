//! Chain-of-Time protocol driver: methods, prompts, sessions, backends and
//! the session runner.

mod backend;
mod prompts;
mod remote;
mod runner;
mod store;

pub use backend::{
    Backend, BackendError, BackendKind, ConversationView, Generated, OracleBackend, ReplayBackend, Turn,
};
pub use prompts::{
    fill_prompt, prompt_for_step, template, PromptError, PromptFamily, PromptParams, PromptRole, PromptTemplate,
    ALLOWED_SECONDS, BOUNCE_FALLING_SCENE, BOUNCE_RISING_SCENE, FLUIDS_SCENE,
};
pub use remote::{AttachmentMode, RemoteBackend, RemoteDescriptor};
pub use runner::{derive_session_seed, expected_calls, Job, Runner};
pub use store::{cache_key, CacheKey, FrameStore, StoreError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::Domain;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MethodError {
    #[error("horizon {horizon}s is not a positive integer multiple of step {step}s")]
    NotMultiple { step: f64, horizon: f64 },
    #[error("unknown method label {0:?}")]
    UnknownLabel(String),
}

/// Step size and horizon of one prediction method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub step_size_sec: f64,
    pub horizon_sec: f64,
}

pub const DEFAULT_HORIZON_SEC: f64 = 0.8;

impl MethodConfig {
    pub const COT_02: MethodConfig = MethodConfig { step_size_sec: 0.2, horizon_sec: DEFAULT_HORIZON_SEC };
    pub const COT_04: MethodConfig = MethodConfig { step_size_sec: 0.4, horizon_sec: DEFAULT_HORIZON_SEC };
    pub const DIRECT: MethodConfig = MethodConfig { step_size_sec: 0.8, horizon_sec: DEFAULT_HORIZON_SEC };
    pub const ALL: [MethodConfig; 3] = [Self::COT_02, Self::COT_04, Self::DIRECT];

    pub fn new(step_size_sec: f64, horizon_sec: f64) -> Result<Self, MethodError> {
        let m = MethodConfig { step_size_sec, horizon_sec };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MethodError> {
        let err = MethodError::NotMultiple { step: self.step_size_sec, horizon: self.horizon_sec };
        if !(self.step_size_sec > 0.0 && self.horizon_sec > 0.0) {
            return Err(err);
        }
        let ratio = self.horizon_sec / self.step_size_sec;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(err);
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon_sec / self.step_size_sec).round() as usize
    }

    pub fn is_direct(&self) -> bool {
        self.steps() == 1
    }

    /// `direct` for single-step methods, `cot-<s>` otherwise.
    pub fn label(&self) -> String {
        if self.is_direct() {
            "direct".to_string()
        } else {
            format!("cot-{:.1}", self.step_size_sec)
        }
    }

    pub fn from_label(label: &str) -> Result<Self, MethodError> {
        let m = match label {
            "direct" => Self::DIRECT,
            _ => {
                let s = label
                    .strip_prefix("cot-")
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| MethodError::UnknownLabel(label.to_string()))?;
                MethodConfig { step_size_sec: s, horizon_sec: DEFAULT_HORIZON_SEC }
            }
        };
        m.validate().map_err(|_| MethodError::UnknownLabel(label.to_string()))?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    /// Follow-ups carry every earlier prompt and image.
    #[default]
    Full,
    /// Follow-ups carry only the most recent generated frame.
    LastFrameOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Complete,
    DerenderFailed,
    BackendFailed,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub role: PromptRole,
    pub prompt_text: String,
    /// Store-relative refs of the images sent with this prompt.
    pub attached_frames: Vec<String>,
    pub generated_frame: Option<String>,
    pub generated_time_sec: Option<f64>,
    /// Seconds since the Unix epoch; only recorded when enabled.
    pub wall_clock_unix: Option<f64>,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub stimulus_id: String,
    pub domain: Domain,
    pub method: MethodConfig,
    pub method_label: String,
    pub backend_id: String,
    pub backend_kind: BackendKind,
    pub sample_index: u32,
    /// Run seed used in the cache key.
    pub run_seed: u64,
    /// Seed of this session's noise streams.
    pub rng_seed: u64,
    pub rng_algorithm: String,
    pub context: ContextMode,
    pub attachment: Option<AttachmentMode>,
    pub transcript: Vec<TranscriptEntry>,
    pub status: SessionStatus,
    pub error: Option<String>,
}

impl Session {
    pub fn generated_frames(&self) -> impl Iterator<Item = (&str, f64)> {
        self.transcript
            .iter()
            .filter_map(|e| Some((e.generated_frame.as_deref()?, e.generated_time_sec?)))
    }

    /// Transcript-shape invariants; complete sessions must have exactly one
    /// prompt and one frame per step.
    pub fn check_shape(&self) -> Result<(), String> {
        let n = self.method.steps();
        if self.transcript.len() > n {
            return Err(format!("{} prompts for {n} steps", self.transcript.len()));
        }
        for (i, e) in self.transcript.iter().enumerate() {
            let want = if i == 0 { PromptRole::Instruction } else { PromptRole::FollowUp };
            if e.role != want {
                return Err(format!("prompt {i} is {:?}, expected {want:?}", e.role));
            }
        }
        if self.status == SessionStatus::Complete {
            if self.transcript.len() != n {
                return Err(format!("complete session has {} prompts, expected {n}", self.transcript.len()));
            }
            let times: Vec<f64> = self.generated_frames().map(|(_, t)| t).collect();
            if times.len() != n {
                return Err(format!("complete session has {} frames, expected {n}", times.len()));
            }
            for pair in times.windows(2) {
                if (pair[1] - pair[0] - self.method.step_size_sec).abs() > 1e-9 {
                    return Err(format!("frame times {times:?} are not spaced by the step"));
                }
            }
        }
        Ok(())
    }
}
