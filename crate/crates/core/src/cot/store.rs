//! On-disk frame and session store.
//!
//! Layout under the root:
//! `<stimulusId>/stimulus.toml`, `<stimulusId>/inputs/frame_XXXX.png`,
//! `<stimulusId>/<method>/<backend>/s<sample>_<seed>/step<k>.png` and a
//! `session.json` manifest beside the step images.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use super::Session;
use crate::physics::StimulusSpec;
use crate::render::{frame_file_name, Frame, FrameError, Provenance};

pub const SESSION_MANIFEST: &str = "session.json";
pub const PARTIAL_MANIFEST: &str = "partial.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("frame at {path}: {source}")]
    Frame { path: PathBuf, source: FrameError },
    #[error("manifest at {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Identity of one generated frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub stimulus_id: String,
    pub method_label: String,
    pub backend_id: String,
    pub sample_index: u32,
    pub seed: u64,
    pub step_index: usize,
}

/// Percent-encode everything outside `[A-Za-z0-9_.-]`, plus a leading dot,
/// so distinct components never map to the same path segment.
fn encode_component(s: &str) -> String {
    if s.is_empty() {
        return "%".to_string();
    }
    let mut out = String::with_capacity(s.len());
    for (i, b) in s.bytes().enumerate() {
        let plain = b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || (b == b'.' && i > 0);
        if plain {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

impl CacheKey {
    /// Store-relative directory of the session this step belongs to.
    pub fn session_dir(&self) -> String {
        format!(
            "{}/{}/{}/s{}_{:016x}",
            encode_component(&self.stimulus_id),
            encode_component(&self.method_label),
            encode_component(&self.backend_id),
            self.sample_index,
            self.seed
        )
    }

    /// Store-relative path of the step image.
    pub fn path(&self) -> String {
        format!("{}/step{}.png", self.session_dir(), self.step_index)
    }

    pub fn with_step(&self, step_index: usize) -> CacheKey {
        CacheKey { step_index, ..self.clone() }
    }
}

pub fn cache_key(
    stimulus_id: &str,
    method_label: &str,
    sample_index: u32,
    step_index: usize,
    backend_id: &str,
    seed: u64,
) -> String {
    CacheKey {
        stimulus_id: stimulus_id.into(),
        method_label: method_label.into(),
        backend_id: backend_id.into(),
        sample_index,
        seed,
        step_index,
    }
    .path()
}

#[derive(Debug, Clone)]
pub struct FrameStore {
    root: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl FrameStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FrameStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.resolve(rel).is_file()
    }

    /// Write via a temporary file and rename, so readers never see a torn file.
    pub fn write_atomic(&self, rel: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let path = self.resolve(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp{}-{n}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(bytes).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    pub fn remove(&self, rel: &str) -> Result<(), StoreError> {
        let path = self.resolve(rel);
        match fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(&path)(e)),
            _ => Ok(()),
        }
    }

    pub fn write_frame(&self, rel: &str, frame: &Frame) -> Result<(), StoreError> {
        let path = self.resolve(rel);
        let bytes = frame.encode_png().map_err(|source| StoreError::Frame { path, source })?;
        self.write_atomic(rel, &bytes)
    }

    pub fn read_frame(&self, rel: &str, time_sec: f64, provenance: Provenance) -> Result<Frame, StoreError> {
        let path = self.resolve(rel);
        Frame::load_png(&path, time_sec, provenance).map_err(|source| StoreError::Frame { path, source })
    }

    pub fn write_json<T: serde::Serialize>(&self, rel: &str, value: &T) -> Result<(), StoreError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| StoreError::Manifest {
            path: self.resolve(rel),
            message: e.to_string(),
        })?;
        text.push('\n');
        self.write_atomic(rel, text.as_bytes())
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, rel: &str) -> Result<T, StoreError> {
        let path = self.resolve(rel);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| StoreError::Manifest { path, message: e.to_string() })
    }

    pub fn stimulus_manifest(stimulus_id: &str) -> String {
        format!("{}/stimulus.toml", encode_component(stimulus_id))
    }

    pub fn input_frame(stimulus_id: &str, time_sec: f64) -> String {
        format!("{}/inputs/{}", encode_component(stimulus_id), frame_file_name(time_sec))
    }

    /// Persist a stimulus spec and its input frames (skipping files already present).
    pub fn write_stimulus(&self, spec: &StimulusSpec, inputs: &[Frame]) -> Result<Vec<String>, StoreError> {
        let manifest = Self::stimulus_manifest(&spec.stimulus_id);
        if !self.exists(&manifest) {
            let text = spec.to_toml().map_err(|e| StoreError::Manifest {
                path: self.resolve(&manifest),
                message: e.to_string(),
            })?;
            self.write_atomic(&manifest, text.as_bytes())?;
        }
        let mut refs = Vec::with_capacity(inputs.len());
        for f in inputs {
            let rel = Self::input_frame(&spec.stimulus_id, f.time_sec);
            if !self.exists(&rel) {
                self.write_frame(&rel, f)?;
            }
            refs.push(rel);
        }
        Ok(refs)
    }

    pub fn read_spec(&self, stimulus_id: &str) -> Result<StimulusSpec, StoreError> {
        let rel = Self::stimulus_manifest(stimulus_id);
        let path = self.resolve(&rel);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        StimulusSpec::from_toml(&text).map_err(|e| StoreError::Manifest { path, message: e.to_string() })
    }

    pub fn read_stimulus(&self, stimulus_id: &str) -> Result<(StimulusSpec, Vec<Frame>), StoreError> {
        let spec = self.read_spec(stimulus_id)?;
        let frames = spec
            .input_frame_times
            .iter()
            .map(|&t| self.read_frame(&Self::input_frame(stimulus_id, t), t, Provenance::Input))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((spec, frames))
    }

    /// Every stimulus id with a manifest, sorted.
    pub fn stimulus_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        let rd = match fs::read_dir(&self.root) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(ids),
            Err(e) => return Err(io_err(&self.root)(e)),
        };
        for entry in rd {
            let entry = entry.map_err(io_err(&self.root))?;
            let path = entry.path();
            if path.join("stimulus.toml").is_file() {
                let text = fs::read_to_string(path.join("stimulus.toml")).map_err(io_err(&path))?;
                if let Ok(spec) = StimulusSpec::from_toml(&text) {
                    ids.push(spec.stimulus_id);
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn session_manifest(key: &CacheKey) -> String {
        format!("{}/{SESSION_MANIFEST}", key.session_dir())
    }

    pub fn partial_manifest(key: &CacheKey) -> String {
        format!("{}/{PARTIAL_MANIFEST}", key.session_dir())
    }

    pub fn read_session(&self, key: &CacheKey) -> Result<Option<Session>, StoreError> {
        let rel = Self::session_manifest(key);
        if !self.exists(&rel) {
            return Ok(None);
        }
        self.read_json(&rel).map(Some)
    }

    /// All session manifests under the root, sorted by path.
    pub fn sessions(&self) -> Result<Vec<Session>, StoreError> {
        let mut paths = Vec::new();
        collect_named(&self.root, SESSION_MANIFEST, &mut paths)?;
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let text = fs::read_to_string(p).map_err(io_err(p))?;
                serde_json::from_str(&text).map_err(|e| StoreError::Manifest { path: p.clone(), message: e.to_string() })
            })
            .collect()
    }
}

fn collect_named(dir: &Path, name: &str, out: &mut Vec<PathBuf>) -> Result<(), StoreError> {
    let rd = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io_err(dir)(e)),
    };
    for entry in rd {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        if path.is_dir() {
            collect_named(&path, name, out)?;
        } else if path.file_name().is_some_and(|n| n == name) {
            out.push(path);
        }
    }
    Ok(())
}
