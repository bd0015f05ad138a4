use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{BouncePhase, Domain, DomainParams, StimulusSpec};

const TEMPLATE_FILE: &str = include_str!("prompts.toml");

pub const PH_SECONDS: &str = "number of seconds forward";
pub const PH_DIRECTION: &str = "direction";
pub const PH_SCENE: &str = "scene content";
pub const PH_IMAGES: &str = "image sequence";

pub const FLUIDS_SCENE: &str = "a glass mug being filled with water, at a constant rate";
pub const BOUNCE_FALLING_SCENE: &str = "a bouncy ball falling towards the ground";
pub const BOUNCE_RISING_SCENE: &str = "a bouncy ball bouncing upward after hitting the ground";

/// Step sizes the templates are instantiated with.
pub const ALLOWED_SECONDS: [f64; 3] = [0.2, 0.4, 0.8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptFamily {
    Motion2d,
    Gravity2d,
    SceneContent,
}

impl PromptFamily {
    pub const ALL: [PromptFamily; 3] = [PromptFamily::Motion2d, PromptFamily::Gravity2d, PromptFamily::SceneContent];

    pub fn for_domain(domain: Domain) -> Self {
        match domain {
            Domain::Motion2d => PromptFamily::Motion2d,
            Domain::Gravity2d => PromptFamily::Gravity2d,
            Domain::Fluids | Domain::Bouncing => PromptFamily::SceneContent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptRole {
    Instruction,
    FollowUp,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct PromptTemplate {
    pub family: PromptFamily,
    pub role: PromptRole,
    pub text: String,
}

#[derive(Deserialize)]
struct TemplateFile {
    template: Vec<PromptTemplate>,
}

fn all_templates() -> &'static [PromptTemplate] {
    static CELL: OnceLock<Vec<PromptTemplate>> = OnceLock::new();
    CELL.get_or_init(|| {
        let f: TemplateFile = toml::from_str(TEMPLATE_FILE).expect("bundled prompt templates parse");
        f.template
    })
}

/// The bundled template for a family and role.
pub fn template(family: PromptFamily, role: PromptRole) -> &'static PromptTemplate {
    all_templates()
        .iter()
        .find(|t| t.family == family && t.role == role)
        .expect("every family has both roles")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptParams {
    pub seconds_forward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_content: Option<String>,
}

impl PromptParams {
    /// Parameters for a stimulus at step size `seconds_forward`.
    pub fn for_spec(spec: &StimulusSpec, seconds_forward: f64) -> Self {
        let mut p = PromptParams { seconds_forward, ..Default::default() };
        match &spec.params {
            DomainParams::Motion2d(_) => {}
            DomainParams::Gravity2d(g) => p.direction = Some(g.launch_position.prompt_name().to_string()),
            DomainParams::Fluids(_) => p.scene_content = Some(FLUIDS_SCENE.to_string()),
            DomainParams::Bouncing(b) => {
                let scene = match b.partition {
                    Some(BouncePhase::After) => BOUNCE_RISING_SCENE,
                    _ => BOUNCE_FALLING_SCENE,
                };
                p.scene_content = Some(scene.to_string());
            }
        }
        p
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("missing prompt parameter for placeholder {{{{{0}}}}}")]
    MissingParameter(String),
    #[error("unknown placeholder {{{{{0}}}}} in template")]
    UnknownPlaceholder(String),
    #[error("unterminated placeholder in template")]
    Unterminated,
    #[error("seconds forward must be one of 0.2, 0.4, 0.8; got {0}")]
    BadSeconds(f64),
    #[error("parameter value contains braces: {0:?}")]
    BadValue(String),
}

fn format_seconds(s: f64) -> Result<String, PromptError> {
    if !ALLOWED_SECONDS.iter().any(|a| (a - s).abs() < 1e-9) {
        return Err(PromptError::BadSeconds(s));
    }
    Ok(format!("{s:.1}"))
}

/// Instantiate a template. The image-sequence marker is dropped (images are
/// sent as attachments after the text) and trailing whitespace is trimmed.
pub fn fill_prompt(template: &PromptTemplate, params: &PromptParams) -> Result<String, PromptError> {
    fill_text(&template.text, params)
}

pub(crate) fn fill_text(text: &str, params: &PromptParams) -> Result<String, PromptError> {
    for v in [&params.direction, &params.scene_content].into_iter().flatten() {
        if v.contains('{') || v.contains('}') {
            return Err(PromptError::BadValue(v.clone()));
        }
    }
    let mut out = String::with_capacity(text.len() + 64);
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after.find("}}").ok_or(PromptError::Unterminated)?;
        let name = &after[..close];
        let missing = || PromptError::MissingParameter(name.to_string());
        match name {
            PH_SECONDS => out.push_str(&format_seconds(params.seconds_forward)?),
            PH_DIRECTION => out.push_str(params.direction.as_deref().ok_or_else(missing)?),
            PH_SCENE => out.push_str(params.scene_content.as_deref().ok_or_else(missing)?),
            PH_IMAGES => {}
            _ => return Err(PromptError::UnknownPlaceholder(name.to_string())),
        }
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out.trim_end().to_string())
}

/// Prompt for step `step_index` (0 = instruction) of a stimulus.
pub fn prompt_for_step(spec: &StimulusSpec, step_sec: f64, step_index: usize) -> Result<String, PromptError> {
    let role = if step_index == 0 { PromptRole::Instruction } else { PromptRole::FollowUp };
    let t = template(PromptFamily::for_domain(spec.domain()), role);
    fill_prompt(t, &PromptParams::for_spec(spec, step_sec))
}
