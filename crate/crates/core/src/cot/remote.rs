//! JSON-over-HTTP image service adapter.
//!
//! Request body:
//!
//! ```json
//! {
//!   "model": "<model name>",
//!   "size": "1536x1024",
//!   "n": 1,
//!   "conversation_id": "<session id, server-state mode only>",
//!   "messages": [
//!     {"role": "user", "text": "<prompt>", "images": ["<base64 png>", ...]},
//!     {"role": "assistant", "text": "", "images": ["<base64 png>"]}
//!   ]
//! }
//! ```
//!
//! The response must carry a base64 PNG either as `image_b64` or as
//! `data[0].b64_json`.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{Backend, BackendError, BackendKind, ConversationView, Generated};
use crate::render::{Frame, Provenance};
use crate::vision::resize_area_frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttachmentMode {
    /// Every earlier prompt and image is re-sent with each request.
    #[default]
    FullHistory,
    /// Only the pending prompt is sent; the service keeps the conversation.
    ServerState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteDescriptor {
    pub id: String,
    pub endpoint_url: String,
    pub model_name: String,
    pub image_width: u32,
    pub image_height: u32,
    pub timeout_sec: f64,
    pub max_retries: u32,
    pub backoff_base_sec: f64,
    /// Name of the environment variable holding the API key.
    pub credential_env: String,
    pub attachment: AttachmentMode,
}

impl Default for RemoteDescriptor {
    fn default() -> Self {
        RemoteDescriptor {
            id: "remote".into(),
            endpoint_url: String::new(),
            model_name: "gpt-image-1".into(),
            image_width: 1536,
            image_height: 1024,
            timeout_sec: 180.0,
            max_retries: 5,
            backoff_base_sec: 2.0,
            credential_env: "COT_API_KEY".into(),
            attachment: AttachmentMode::FullHistory,
        }
    }
}

impl RemoteDescriptor {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.endpoint_url.trim().is_empty() {
            return Err(BackendError::Config("remote backend needs endpoint_url".into()));
        }
        if self.credential_env.trim().is_empty() {
            return Err(BackendError::Config("remote backend needs credential_env".into()));
        }
        if self.max_retries == 0 {
            return Err(BackendError::Config("max_retries must be at least 1".into()));
        }
        if !(self.timeout_sec > 0.0) || !(self.backoff_base_sec >= 0.0) {
            return Err(BackendError::Config("timeout and backoff must be positive".into()));
        }
        Ok(())
    }
}

pub struct RemoteBackend {
    desc: RemoteDescriptor,
    agent: ureq::Agent,
    sleep: fn(Duration),
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend").field("desc", &self.desc).finish()
    }
}

enum Failure {
    Retry(String),
    Fatal(BackendError),
}

impl RemoteBackend {
    pub fn new(desc: RemoteDescriptor) -> Result<Self, BackendError> {
        desc.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(desc.timeout_sec)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteBackend { desc, agent, sleep: std::thread::sleep })
    }

    /// Replace the sleep used between retries (tests use a no-op).
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn descriptor(&self) -> &RemoteDescriptor {
        &self.desc
    }

    /// JSON request for a conversation view.
    pub fn request_body(&self, view: &ConversationView<'_>) -> Result<Value, BackendError> {
        let encode = |f: &Frame| -> Result<String, BackendError> {
            let png = f.encode_png().map_err(|e| BackendError::Payload(e.to_string()))?;
            Ok(B64.encode(png))
        };
        let turns = match self.desc.attachment {
            AttachmentMode::FullHistory => &view.turns[..],
            AttachmentMode::ServerState => &view.turns[view.turns.len().saturating_sub(1)..],
        };
        let mut messages = Vec::new();
        for t in turns {
            let images = t.images.iter().map(|f| encode(f)).collect::<Result<Vec<_>, _>>()?;
            messages.push(json!({"role": "user", "text": t.prompt, "images": images}));
            if let Some(r) = t.reply {
                messages.push(json!({"role": "assistant", "text": "", "images": [encode(r)?]}));
            }
        }
        let mut body = json!({
            "model": self.desc.model_name,
            "size": format!("{}x{}", self.desc.image_width, self.desc.image_height),
            "n": 1,
            "messages": messages,
        });
        if self.desc.attachment == AttachmentMode::ServerState {
            body["conversation_id"] = json!(view.session_id);
        }
        Ok(body)
    }

    fn attempt(&self, key: &str, body: &str) -> Result<Vec<u8>, Failure> {
        let resp = self
            .agent
            .post(&self.desc.endpoint_url)
            .header("Authorization", &format!("Bearer {key}"))
            .header("Content-Type", "application/json")
            .send(body.as_bytes());
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Err(Failure::Retry(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(256 << 20)
            .read_to_string()
            .map_err(|e| Failure::Retry(e.to_string()))?;
        if status == 408 || status == 429 || status >= 500 {
            return Err(Failure::Retry(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            let body: String = text.chars().take(400).collect();
            return Err(Failure::Fatal(BackendError::Status { status, body }));
        }
        decode_image_payload(&text).map_err(Failure::Fatal)
    }
}

/// Extract the PNG bytes from a service response.
pub(crate) fn decode_image_payload(text: &str) -> Result<Vec<u8>, BackendError> {
    let v: Value = serde_json::from_str(text).map_err(|e| BackendError::Payload(format!("not JSON: {e}")))?;
    let b64 = v
        .get("image_b64")
        .and_then(Value::as_str)
        .or_else(|| v.pointer("/data/0/b64_json").and_then(Value::as_str))
        .ok_or_else(|| {
            let keys: Vec<String> = v.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default();
            BackendError::Payload(format!("no image_b64 or data[0].b64_json field; keys {keys:?}"))
        })?;
    B64.decode(b64.trim()).map_err(|e| BackendError::Payload(format!("bad base64: {e}")))
}

impl Backend for RemoteBackend {
    fn id(&self) -> &str {
        &self.desc.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::RemoteImageService
    }

    fn attachment_mode(&self) -> Option<AttachmentMode> {
        Some(self.desc.attachment)
    }

    fn generate(&self, view: &ConversationView<'_>) -> Result<Generated, BackendError> {
        let key = std::env::var(&self.desc.credential_env).map_err(|_| {
            BackendError::Config(format!("environment variable {} is not set", self.desc.credential_env))
        })?;
        let body = self.request_body(view)?.to_string();
        let mut last = String::new();
        for attempt in 1..=self.desc.max_retries {
            match self.attempt(&key, &body) {
                Ok(bytes) => {
                    let frame = Frame::decode_png(&bytes, 0.0, Provenance::Generated)
                        .map_err(|e| BackendError::Payload(format!("undecodable image ({} bytes): {e}", bytes.len())))?
                        .to_rgb();
                    let (w, h) = (view.spec.canvas_width as usize, view.spec.canvas_height as usize);
                    let frame = if (frame.width(), frame.height()) != (w, h) {
                        resize_area_frame(&frame, w, h).map_err(|e| BackendError::Payload(e.to_string()))?
                    } else {
                        frame
                    };
                    return Ok(Generated { frame, attempts: attempt });
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) => {
                    log::warn!("remote attempt {attempt}/{} failed: {msg}", self.desc.max_retries);
                    last = msg;
                    if attempt < self.desc.max_retries {
                        let jitter: f64 = rand::rng().random_range(0.5..1.5);
                        let wait = self.desc.backoff_base_sec * 2f64.powi(attempt as i32 - 1) * jitter;
                        (self.sleep)(Duration::from_secs_f64(wait));
                    }
                }
            }
        }
        Err(BackendError::RetriesExhausted { attempts: self.desc.max_retries, last })
    }
}
