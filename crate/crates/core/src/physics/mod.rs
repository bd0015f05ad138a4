//! Ground-truth dynamics for the four stimulus domains.
//!
//! All coordinates are image pixels with the origin at the top-left pixel
//! center and `y` growing downward, so gravity acts along `+y`.

mod grid;
mod vec2;

pub use grid::{enumerate_grid, BounceBall, GridOptions, BOUNCE_BALLS, FLUID_RATE_SCALE};
pub use vec2::Vec2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default frame times of the five input frames shown to a backend.
pub const DEFAULT_INPUT_TIMES: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];

/// Margin between a launch position and the canvas edge.
pub const LAUNCH_MARGIN_PX: f64 = 96.0;

/// Rebound speeds below this are treated as the ball coming to rest.
const REST_SPEED_PX_PER_SEC: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("state domain {found:?} does not match stimulus domain {expected:?}")]
    DomainMismatch { expected: Domain, found: Domain },
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("invalid stimulus {id}: {reason}")]
    InvalidSpec { id: String, reason: String },
    #[error("state is missing its {0} component")]
    MissingComponent(&'static str),
    #[error("phase partitioning needs a bouncing trajectory")]
    NotBouncing,
    #[error("trajectory times must be sorted ascending")]
    UnsortedTimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Motion2d,
    Gravity2d,
    Fluids,
    Bouncing,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Motion2d,
        Domain::Gravity2d,
        Domain::Fluids,
        Domain::Bouncing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Motion2d => "motion2d",
            Domain::Gravity2d => "gravity2d",
            Domain::Fluids => "fluids",
            Domain::Bouncing => "bouncing",
        }
    }

    pub fn has_ball(self) -> bool {
        !matches!(self, Domain::Fluids)
    }

    /// Default canvas size for the domain.
    pub fn default_canvas(self) -> (u32, u32) {
        match self {
            Domain::Bouncing => (1080, 720),
            _ => (1024, 1024),
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown domain `{s}`"))
    }
}

/// Uniform motion without friction or gravity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub speed_px_per_sec: f64,
    /// Unit direction of travel.
    pub heading: Vec2,
    pub start_pos: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaunchPosition {
    LeftBottom,
    LeftMiddle,
    RightBottom,
    RightMiddle,
}

impl LaunchPosition {
    pub const ALL: [LaunchPosition; 4] = [
        LaunchPosition::LeftBottom,
        LaunchPosition::LeftMiddle,
        LaunchPosition::RightMiddle,
        LaunchPosition::RightBottom,
    ];

    /// Spelling used in prompt text and stimulus ids.
    pub fn prompt_name(self) -> &'static str {
        match self {
            LaunchPosition::LeftBottom => "leftbottom",
            LaunchPosition::LeftMiddle => "leftmiddle",
            LaunchPosition::RightBottom => "rightbottom",
            LaunchPosition::RightMiddle => "rightmiddle",
        }
    }

    pub fn is_right(self) -> bool {
        matches!(self, LaunchPosition::RightBottom | LaunchPosition::RightMiddle)
    }

    /// Launch point on a `width` x `height` canvas.
    pub fn point(self, width: u32, height: u32) -> Vec2 {
        let (w, h) = (f64::from(width), f64::from(height));
        let x = if self.is_right() { w - LAUNCH_MARGIN_PX } else { LAUNCH_MARGIN_PX };
        let y = match self {
            LaunchPosition::LeftBottom | LaunchPosition::RightBottom => h - LAUNCH_MARGIN_PX,
            _ => h / 2.0,
        };
        Vec2::new(x, y)
    }
}

/// Projectile launched under constant downward gravity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectileParams {
    pub launch_speed: f64,
    /// Degrees above the horizontal.
    pub launch_angle_deg: f64,
    pub launch_position: LaunchPosition,
    pub gravity_px_per_sec2: f64,
}

impl ProjectileParams {
    /// Launch velocity; launches from the right side travel toward `-x`.
    pub fn launch_velocity(&self) -> Vec2 {
        let theta = self.launch_angle_deg.to_radians();
        let dir = if self.launch_position.is_right() { -1.0 } else { 1.0 };
        Vec2::new(
            dir * self.launch_speed * theta.cos(),
            -self.launch_speed * theta.sin(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MugSize {
    Small,
    Medium,
    Large,
}

impl MugSize {
    pub const ALL: [MugSize; 3] = [MugSize::Small, MugSize::Medium, MugSize::Large];

    pub fn name(self) -> &'static str {
        match self {
            MugSize::Small => "small",
            MugSize::Medium => "medium",
            MugSize::Large => "large",
        }
    }
}

/// A mug filling at a constant rate; the water level is a scalar fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub flow_rate_param: f64,
    pub mug_size: MugSize,
    pub initial_fill_fraction: f64,
    pub fill_rate_per_sec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BouncePhase {
    Before,
    During,
    After,
}

impl BouncePhase {
    pub const ALL: [BouncePhase; 3] = [BouncePhase::Before, BouncePhase::During, BouncePhase::After];

    pub fn name(self) -> &'static str {
        match self {
            BouncePhase::Before => "before",
            BouncePhase::During => "during",
            BouncePhase::After => "after",
        }
    }
}

/// A ball dropped from rest onto a flat ground line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BounceParams {
    /// Coefficient of restitution in `(0, 1]`.
    pub restitution: f64,
    /// Height of the ball center above the ground line at release.
    pub drop_height_px: f64,
    pub gravity_px_per_sec2: f64,
    /// How long the ball stays deformed on the ground before rebounding.
    pub contact_duration_sec: f64,
    /// Row of the ground line.
    pub ground_y: f64,
    pub ball_radius_px: f64,
    /// Horizontal position of the ball (it only moves vertically).
    pub x_px: f64,
    /// Release time relative to the first input frame; zero or negative.
    #[serde(default)]
    pub release_time_sec: f64,
    /// Which partition of the bounce this stimulus window shows.
    #[serde(default)]
    pub partition: Option<BouncePhase>,
}

impl BounceParams {
    /// Ball-center row while touching the ground.
    pub fn contact_y(&self) -> f64 {
        self.ground_y - self.ball_radius_px
    }

    pub fn release_y(&self) -> f64 {
        self.ground_y - self.drop_height_px
    }

    /// Absolute time of the first ground contact.
    pub fn first_contact_time(&self) -> f64 {
        let fall = self.drop_height_px - self.ball_radius_px;
        self.release_time_sec + (2.0 * fall / self.gravity_px_per_sec2).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum DomainParams {
    Motion2d(MotionParams),
    Gravity2d(ProjectileParams),
    Fluids(FluidParams),
    Bouncing(BounceParams),
}

/// Full parameterization of one stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub stimulus_id: String,
    pub canvas_width: u32,
    pub canvas_height: u32,
    #[serde(default = "default_input_times")]
    pub input_frame_times: Vec<f64>,
    pub params: DomainParams,
}

fn default_input_times() -> Vec<f64> {
    DEFAULT_INPUT_TIMES.to_vec()
}

impl StimulusSpec {
    pub fn new(stimulus_id: impl Into<String>, params: DomainParams) -> Self {
        let domain = params.domain();
        let (canvas_width, canvas_height) = domain.default_canvas();
        StimulusSpec {
            stimulus_id: stimulus_id.into(),
            canvas_width,
            canvas_height,
            input_frame_times: default_input_times(),
            params,
        }
    }

    pub fn domain(&self) -> Domain {
        self.params.domain()
    }

    /// Time of the last input frame, the start of every prediction.
    pub fn last_input_time(&self) -> f64 {
        self.input_frame_times.last().copied().unwrap_or(0.0)
    }

    pub fn bounce(&self) -> Option<&BounceParams> {
        match &self.params {
            DomainParams::Bouncing(b) => Some(b),
            _ => None,
        }
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let fail = |reason: String| PhysicsError::InvalidSpec {
            id: self.stimulus_id.clone(),
            reason,
        };
        if self.canvas_width == 0 || self.canvas_height == 0 {
            return Err(fail("canvas dimensions must be positive".into()));
        }
        if self.input_frame_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(fail("input frame times must be finite and non-negative".into()));
        }
        if self.input_frame_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(fail("input frame times must be strictly increasing".into()));
        }
        match &self.params {
            DomainParams::Motion2d(m) => {
                if !(m.speed_px_per_sec > 0.0) {
                    return Err(fail("speed must be positive".into()));
                }
                if (m.heading.norm() - 1.0).abs() > 1e-12 {
                    return Err(fail("heading must be a unit vector".into()));
                }
            }
            DomainParams::Gravity2d(p) => {
                if !(p.launch_speed > 0.0) {
                    return Err(fail("launch speed must be positive".into()));
                }
                if !(p.launch_angle_deg > 0.0 && p.launch_angle_deg < 90.0) {
                    return Err(fail("launch angle must lie in (0, 90) degrees".into()));
                }
                if !(p.gravity_px_per_sec2 > 0.0) {
                    return Err(fail("gravity must be positive".into()));
                }
            }
            DomainParams::Fluids(f) => {
                if !(0.0..=1.0).contains(&f.initial_fill_fraction) {
                    return Err(fail("initial fill fraction must lie in [0, 1]".into()));
                }
                if !(f.fill_rate_per_sec >= 0.0) {
                    return Err(fail("fill rate must be non-negative".into()));
                }
            }
            DomainParams::Bouncing(b) => {
                if !(b.restitution > 0.0 && b.restitution <= 1.0) {
                    return Err(fail("restitution must lie in (0, 1]".into()));
                }
                if !(b.contact_duration_sec >= 0.0) {
                    return Err(fail("contact duration must be non-negative".into()));
                }
                if !(b.drop_height_px > b.ball_radius_px) {
                    return Err(fail("drop height must exceed the ball radius".into()));
                }
                if !(b.gravity_px_per_sec2 > 0.0) {
                    return Err(fail("gravity must be positive".into()));
                }
                if !(b.release_time_sec <= 0.0) {
                    return Err(fail("release time must not be after the first frame".into()));
                }
            }
        }
        Ok(())
    }
}

impl DomainParams {
    pub fn domain(&self) -> Domain {
        match self {
            DomainParams::Motion2d(_) => Domain::Motion2d,
            DomainParams::Gravity2d(_) => Domain::Gravity2d,
            DomainParams::Fluids(_) => Domain::Fluids,
            DomainParams::Bouncing(_) => Domain::Bouncing,
        }
    }
}

/// Pending rebound while the ball is deformed against the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub remaining_sec: f64,
    /// Downward speed at the moment of impact.
    pub impact_speed: f64,
}

/// Latent physical state at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub domain: Domain,
    pub time_sec: f64,
    pub ball_pos: Option<Vec2>,
    pub ball_vel: Option<Vec2>,
    pub fill_fraction: Option<f64>,
    pub bounce_phase: Option<BouncePhase>,
    #[serde(default)]
    pub contact: Option<Contact>,
}

impl WorldState {
    pub fn ball(domain: Domain, time_sec: f64, pos: Vec2, vel: Vec2) -> Self {
        WorldState {
            domain,
            time_sec,
            ball_pos: Some(pos),
            ball_vel: Some(vel),
            fill_fraction: None,
            bounce_phase: (domain == Domain::Bouncing).then_some(BouncePhase::Before),
            contact: None,
        }
    }

    pub fn fluid(time_sec: f64, fill_fraction: f64) -> Self {
        WorldState {
            domain: Domain::Fluids,
            time_sec,
            ball_pos: None,
            ball_vel: None,
            fill_fraction: Some(fill_fraction),
            bounce_phase: None,
            contact: None,
        }
    }

    fn pos(&self) -> Result<Vec2, PhysicsError> {
        self.ball_pos.ok_or(PhysicsError::MissingComponent("ball position"))
    }

    fn vel(&self) -> Vec2 {
        self.ball_vel.unwrap_or_default()
    }
}

/// State of the stimulus at its first input frame.
pub fn initial_state(spec: &StimulusSpec) -> WorldState {
    let domain = spec.domain();
    match &spec.params {
        DomainParams::Motion2d(m) => {
            WorldState::ball(domain, 0.0, m.start_pos, m.heading * m.speed_px_per_sec)
        }
        DomainParams::Gravity2d(p) => WorldState::ball(
            domain,
            0.0,
            p.launch_position.point(spec.canvas_width, spec.canvas_height),
            p.launch_velocity(),
        ),
        DomainParams::Fluids(f) => WorldState::fluid(0.0, f.initial_fill_fraction),
        DomainParams::Bouncing(b) => {
            let release = release_state(b);
            if b.release_time_sec < 0.0 {
                advance_bounce(release, -b.release_time_sec, b)
            } else {
                release
            }
        }
    }
}

fn release_state(b: &BounceParams) -> WorldState {
    WorldState::ball(
        Domain::Bouncing,
        b.release_time_sec,
        Vec2::new(b.x_px, b.release_y()),
        Vec2::default(),
    )
}

/// Advance `state` by `dt` seconds without noise.
pub fn step(state: &WorldState, dt: f64, spec: &StimulusSpec) -> Result<WorldState, PhysicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PhysicsError::InvalidTimeStep(dt));
    }
    if state.domain != spec.domain() {
        return Err(PhysicsError::DomainMismatch {
            expected: spec.domain(),
            found: state.domain,
        });
    }
    let t = state.time_sec + dt;
    Ok(match &spec.params {
        DomainParams::Motion2d(_) => {
            let (p, v) = (state.pos()?, state.vel());
            WorldState::ball(Domain::Motion2d, t, p + v * dt, v)
        }
        DomainParams::Gravity2d(params) => {
            let (p, v) = (state.pos()?, state.vel());
            let (pos, vel) = ballistic(p, v, params.gravity_px_per_sec2, dt);
            WorldState::ball(Domain::Gravity2d, t, pos, vel)
        }
        DomainParams::Fluids(f) => {
            let fill = state
                .fill_fraction
                .ok_or(PhysicsError::MissingComponent("fill fraction"))?;
            WorldState::fluid(t, (fill + f.fill_rate_per_sec * dt).min(1.0))
        }
        DomainParams::Bouncing(b) => {
            state.pos()?;
            advance_bounce(state.clone(), dt, b)
        }
    })
}

fn ballistic(p: Vec2, v: Vec2, g: f64, dt: f64) -> (Vec2, Vec2) {
    let pos = Vec2::new(p.x + v.x * dt, p.y + v.y * dt + 0.5 * g * dt * dt);
    (pos, Vec2::new(v.x, v.y + g * dt))
}

/// Time until a ballistic fall from `y` with vertical speed `vy` reaches `yc`.
fn time_to_contact(y: f64, vy: f64, g: f64, yc: f64) -> f64 {
    let gap = yc - y;
    if gap <= 0.0 {
        return if vy >= 0.0 { 0.0 } else { -2.0 * vy / g };
    }
    let root = (vy * vy + 2.0 * g * gap).sqrt();
    // Pick the algebraically stable form for each sign of vy.
    if vy >= 0.0 {
        2.0 * gap / (vy + root)
    } else {
        (root - vy) / g
    }
}

/// Event-resolved bounce advance: ballistic flight, dwell on contact, rebound.
fn advance_bounce(mut s: WorldState, dt: f64, b: &BounceParams) -> WorldState {
    let g = b.gravity_px_per_sec2;
    let yc = b.contact_y();
    let target = s.time_sec + dt;
    let mut remaining = dt;
    let mut pos = s.ball_pos.unwrap_or_default();
    let mut vel = s.vel();
    let mut phase = s.bounce_phase.unwrap_or(BouncePhase::Before);
    let mut contact = s.contact;
    let mut resting = contact.is_none() && pos.y >= yc && vel.y == 0.0 && phase == BouncePhase::After;

    while remaining > 0.0 {
        if let Some(c) = contact {
            if c.remaining_sec > remaining {
                contact = Some(Contact {
                    remaining_sec: c.remaining_sec - remaining,
                    ..c
                });
                remaining = 0.0;
            } else {
                remaining -= c.remaining_sec;
                contact = None;
                phase = BouncePhase::After;
                let rebound = b.restitution * c.impact_speed;
                if rebound < REST_SPEED_PX_PER_SEC {
                    resting = true;
                    vel = Vec2::new(vel.x, 0.0);
                } else {
                    vel = Vec2::new(vel.x, -rebound);
                }
            }
            continue;
        }
        if resting {
            pos = Vec2::new(pos.x + vel.x * remaining, yc);
            break;
        }
        let tau = time_to_contact(pos.y, vel.y, g, yc);
        if tau > remaining {
            let (p, v) = ballistic(pos, vel, g, remaining);
            pos = p;
            vel = v;
            break;
        }
        let (p, v) = ballistic(pos, vel, g, tau);
        remaining -= tau;
        pos = Vec2::new(p.x, yc);
        let impact = v.y.max(0.0);
        vel = Vec2::new(v.x, 0.0);
        if phase == BouncePhase::Before {
            phase = BouncePhase::During;
        }
        contact = Some(Contact {
            remaining_sec: b.contact_duration_sec,
            impact_speed: impact,
        });
        if b.contact_duration_sec == 0.0 && b.restitution * impact < REST_SPEED_PX_PER_SEC {
            contact = None;
            phase = BouncePhase::After;
            resting = true;
        }
    }
    s.time_sec = target;
    s.ball_pos = Some(pos);
    s.ball_vel = Some(vel);
    s.bounce_phase = Some(phase);
    s.contact = contact;
    s
}

/// Exact state at absolute time `t`.
pub fn state_at(spec: &StimulusSpec, t: f64) -> WorldState {
    let domain = spec.domain();
    match &spec.params {
        DomainParams::Motion2d(m) => {
            let v = m.heading * m.speed_px_per_sec;
            WorldState::ball(domain, t, m.start_pos + v * t, v)
        }
        DomainParams::Gravity2d(p) => {
            let start = p.launch_position.point(spec.canvas_width, spec.canvas_height);
            let (pos, vel) = ballistic(start, p.launch_velocity(), p.gravity_px_per_sec2, t);
            WorldState::ball(domain, t, pos, vel)
        }
        DomainParams::Fluids(f) => {
            WorldState::fluid(t, (f.initial_fill_fraction + f.fill_rate_per_sec * t).min(1.0))
        }
        DomainParams::Bouncing(b) => {
            let release = release_state(b);
            let dt = t - b.release_time_sec;
            if dt > 0.0 {
                advance_bounce(release, dt, b)
            } else {
                release
            }
        }
    }
}

/// Ground-truth states at exactly the requested (ascending) times.
pub fn ground_truth_trajectory(
    spec: &StimulusSpec,
    times: &[f64],
) -> Result<Vec<WorldState>, PhysicsError> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(PhysicsError::UnsortedTimes);
    }
    Ok(times.iter().map(|&t| state_at(spec, t)).collect())
}

/// One ground contact of a bouncing ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent {
    pub start_sec: f64,
    pub end_sec: f64,
    /// Vertical velocity just before contact (positive, downward).
    pub vy_before: f64,
    /// Vertical velocity just after the dwell (negative, upward).
    pub vy_after: f64,
}

/// Contacts of a bouncing stimulus up to time `until`.
pub fn contact_events(b: &BounceParams, until: f64) -> Vec<ContactEvent> {
    let g = b.gravity_px_per_sec2;
    let yc = b.contact_y();
    let mut events = Vec::new();
    let mut t = b.release_time_sec;
    let mut y = b.release_y();
    let mut vy = 0.0_f64;
    while t <= until && events.len() < 10_000 {
        let tau = time_to_contact(y, vy, g, yc);
        let impact = vy + g * tau;
        let start = t + tau;
        if start > until {
            break;
        }
        let rebound = b.restitution * impact;
        let end = start + b.contact_duration_sec;
        events.push(ContactEvent {
            start_sec: start,
            end_sec: end,
            vy_before: impact,
            vy_after: -rebound,
        });
        if rebound < REST_SPEED_PX_PER_SEC {
            break;
        }
        t = end;
        y = yc;
        vy = -rebound;
    }
    events
}

/// Label each state of a bouncing trajectory with its bounce phase.
pub fn partition_bounce(trajectory: &[WorldState]) -> Result<Vec<BouncePhase>, PhysicsError> {
    trajectory
        .iter()
        .map(|s| {
            if s.domain != Domain::Bouncing {
                return Err(PhysicsError::NotBouncing);
            }
            s.bounce_phase.ok_or(PhysicsError::MissingComponent("bounce phase"))
        })
        .collect()
}
