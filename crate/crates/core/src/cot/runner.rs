use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use super::backend::{Backend, BackendError, BackendKind, ConversationView, Turn};
use super::prompts::{prompt_for_step, PromptParams, PromptRole};
use super::store::{CacheKey, FrameStore, StoreError};
use super::{ContextMode, MethodConfig, Session, SessionStatus, TranscriptEntry};
use crate::mental::RNG_ALGORITHM;
use crate::physics::StimulusSpec;
use crate::render::{Frame, Provenance};

/// One session to run.
#[derive(Debug, Clone)]
pub struct Job {
    pub spec: Arc<StimulusSpec>,
    pub inputs: Arc<Vec<Frame>>,
    pub method: MethodConfig,
    pub sample_index: u32,
}

/// Generation calls for `n_stimuli` stimuli run `samples` times with every method.
pub fn expected_calls(n_stimuli: usize, samples: u32, methods: &[MethodConfig]) -> u64 {
    let steps: usize = methods.iter().map(MethodConfig::steps).sum();
    (n_stimuli * steps) as u64 * u64::from(samples)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-session noise seed, stable across runs and platforms.
pub fn derive_session_seed(run_seed: u64, stimulus_id: &str, method_label: &str, sample_index: u32) -> u64 {
    // FNV-1a over the identifying fields.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stimulus_id.bytes().chain([0]).chain(method_label.bytes()).chain([0]).chain(sample_index.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(h ^ splitmix64(run_seed))
}

fn round_time(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

pub struct Runner {
    store: FrameStore,
    backend: Arc<dyn Backend>,
    context: ContextMode,
    record_wall_clock: bool,
    calls: AtomicU64,
}

impl Runner {
    pub fn new(store: FrameStore, backend: Arc<dyn Backend>) -> Self {
        Runner { store, backend, context: ContextMode::Full, record_wall_clock: false, calls: AtomicU64::new(0) }
    }

    pub fn with_context(mut self, context: ContextMode) -> Self {
        self.context = context;
        self
    }

    pub fn with_wall_clock(mut self, on: bool) -> Self {
        self.record_wall_clock = on;
        self
    }

    pub fn store(&self) -> &FrameStore {
        &self.store
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Backend generation calls issued so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    fn provenance(&self) -> Provenance {
        match self.backend.kind() {
            BackendKind::Oracle => Provenance::OracleRendered,
            _ => Provenance::Generated,
        }
    }

    /// Run (or resume) one session. A completed session already in the store
    /// is returned as is, without calling the backend.
    pub fn run_session(
        &self,
        spec: &StimulusSpec,
        inputs: &[Frame],
        method: MethodConfig,
        sample_index: u32,
        run_seed: u64,
    ) -> Result<Session, StoreError> {
        let label = method.label();
        let key = CacheKey {
            stimulus_id: spec.stimulus_id.clone(),
            method_label: label.clone(),
            backend_id: self.backend.id().to_string(),
            sample_index,
            seed: run_seed,
            step_index: 0,
        };
        if let Some(done) = self.store.read_session(&key)? {
            if done.status == SessionStatus::Complete {
                return Ok(done);
            }
        }
        let input_refs = self.store.write_stimulus(spec, inputs)?;
        let session_seed = derive_session_seed(run_seed, &spec.stimulus_id, &label, sample_index);
        let mut session = Session {
            session_id: key.session_dir(),
            stimulus_id: spec.stimulus_id.clone(),
            domain: spec.domain(),
            method,
            method_label: label,
            backend_id: self.backend.id().to_string(),
            backend_kind: self.backend.kind(),
            sample_index,
            run_seed,
            rng_seed: session_seed,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            context: self.context,
            attachment: self.backend.attachment_mode(),
            transcript: Vec::new(),
            status: SessionStatus::Complete,
            error: None,
        };

        let partial_rel = FrameStore::partial_manifest(&key);
        let mut resumed: Vec<TranscriptEntry> = if self.store.exists(&partial_rel) {
            self.store.read_json(&partial_rel).unwrap_or_default()
        } else {
            Vec::new()
        };
        resumed.retain(|e| e.generated_frame.as_deref().is_some_and(|r| self.store.exists(r)));

        let s = method.step_size_sec;
        let params = PromptParams::for_spec(spec, s);
        let t0 = spec.last_input_time();
        let mut generated: Vec<Frame> = Vec::new();
        let mut prompts: Vec<String> = Vec::new();

        for k in 0..method.steps() {
            let prompt = match prompt_for_step(spec, s, k) {
                Ok(p) => p,
                Err(e) => {
                    session.status = SessionStatus::Invalid;
                    session.error = Some(e.to_string());
                    break;
                }
            };
            let time = round_time(t0 + s * (k + 1) as f64);
            let step_key = key.with_step(k);

            if let Some(entry) = resumed.get(k).filter(|e| e.prompt_text == prompt) {
                let frame = self.store.read_frame(&step_key.path(), time, self.provenance())?;
                generated.push(frame);
                prompts.push(prompt);
                session.transcript.push(entry.clone());
                continue;
            }
            resumed.truncate(k);

            let attached: Vec<&Frame> = if k == 0 {
                inputs.iter().collect()
            } else if self.context == ContextMode::LastFrameOnly {
                vec![&generated[k - 1]]
            } else {
                Vec::new()
            };
            let attached_refs: Vec<String> = if k == 0 {
                input_refs.clone()
            } else if self.context == ContextMode::LastFrameOnly {
                vec![key.with_step(k - 1).path()]
            } else {
                Vec::new()
            };
            let mut turns: Vec<Turn<'_>> = Vec::new();
            if self.context == ContextMode::Full || k == 0 {
                for (i, p) in prompts.iter().enumerate() {
                    let images = if i == 0 { inputs.iter().collect() } else { Vec::new() };
                    turns.push(Turn { prompt: p, images, reply: Some(&generated[i]) });
                }
            }
            turns.push(Turn { prompt: &prompt, images: attached, reply: None });
            let view = ConversationView {
                spec,
                turns,
                params: &params,
                step_index: k,
                session_id: &session.session_id,
                session_seed,
                key: &step_key,
            };

            self.calls.fetch_add(1, Ordering::SeqCst);
            let result = self.backend.generate(&view);
            let role = if k == 0 { PromptRole::Instruction } else { PromptRole::FollowUp };
            match result {
                Ok(g) => {
                    let frame = g.frame.with_time(time, self.provenance());
                    let rel = step_key.path();
                    self.store.write_frame(&rel, &frame)?;
                    session.transcript.push(TranscriptEntry {
                        role,
                        prompt_text: prompt.clone(),
                        attached_frames: attached_refs,
                        generated_frame: Some(rel),
                        generated_time_sec: Some(time),
                        wall_clock_unix: self.record_wall_clock.then(wall_clock),
                        attempts: g.attempts,
                    });
                    self.store.write_json(&partial_rel, &session.transcript)?;
                    generated.push(frame);
                    prompts.push(prompt);
                }
                Err(e) => {
                    session.status = match e {
                        BackendError::Derender(_) => SessionStatus::DerenderFailed,
                        BackendError::Invalid(_) => SessionStatus::Invalid,
                        _ => SessionStatus::BackendFailed,
                    };
                    session.error = Some(e.to_string());
                    session.transcript.push(TranscriptEntry {
                        role,
                        prompt_text: prompt,
                        attached_frames: attached_refs,
                        generated_frame: None,
                        generated_time_sec: None,
                        wall_clock_unix: self.record_wall_clock.then(wall_clock),
                        attempts: 0,
                    });
                    break;
                }
            }
        }

        self.store.write_json(&FrameStore::session_manifest(&key), &session)?;
        if session.status == SessionStatus::Complete {
            self.store.remove(&partial_rel)?;
        }
        Ok(session)
    }

    /// Run jobs with up to `parallel` sessions at once; results keep job order.
    pub fn run_jobs(&self, jobs: &[Job], run_seed: u64, parallel: usize) -> Result<Vec<Session>, StoreError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| {
            jobs.par_iter()
                .map(|j| self.run_session(&j.spec, &j.inputs, j.method, j.sample_index, run_seed))
                .collect()
        })
    }
}

fn wall_clock() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}
