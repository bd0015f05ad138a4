//! Noisy de-render / simulate / render kernels and the oracle generator
//! built from them.
//!
//! The oracle never carries hidden state between steps: every call
//! re-de-renders the frames it is shown, so a rollout is a Markov chain over
//! images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derender::{
    detect_ball, detect_red_centroid, detect_water_level, BallDetectorParams, DetectorConfigError, WaterDetectorParams,
};
use crate::physics::{
    self, BouncePhase, Contact, Domain, DomainParams, PhysicsError, StimulusSpec, Vec2, WorldState,
};
use crate::render::{render_scene, CanvasStyle, Frame, Provenance, RenderError};

/// Identifier of the generator behind every noise draw, recorded in sessions.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64+set_stream";

/// Step length at which `sigma_simulate` applies unscaled under
/// [`TauNoiseScaling::LinearInDt`].
pub const TAU_REFERENCE_DT: f64 = 0.2;

/// Observed ball rows within this distance of the contact row count as touching.
pub const GROUND_BAND_PX: f64 = 2.0;

/// Random stream for one step of one rollout.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gauss(rng: &mut impl Rng, sigma: f64) -> f64 {
    // Always draw, so the stream layout does not depend on sigma.
    let z: f64 = rng.sample(StandardNormal);
    z * sigma
}

#[derive(Debug, Error)]
pub enum MentalError {
    #[error("no frames to de-render")]
    NoFrames,
    #[error("detector found nothing in the frame at t={time_sec:.3}s")]
    Derender { time_sec: f64 },
    #[error(transparent)]
    DetectorConfig(#[from] DetectorConfigError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("invalid noise config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauNoiseScaling {
    PerStepConstant,
    /// `sigma_simulate * dt / 0.2`: long single steps pay a larger penalty.
    LinearInDt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityEstimator {
    /// Finite difference of the last two frames.
    LastTwo,
    /// Least-squares fit over every frame.
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Pixels, per de-rendered frame component.
    pub sigma_derender: f64,
    /// Pixels per simulation step.
    pub sigma_simulate: f64,
    /// Pixels, applied before rendering.
    pub sigma_render: f64,
    pub rng_seed: u64,
    pub tau_scaling: TauNoiseScaling,
    pub velocity: VelocityEstimator,
    /// Frames used by the bouncing trajectory fit.
    pub bounce_fit_window: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_derender: 0.0,
            sigma_simulate: 0.0,
            sigma_render: 0.0,
            rng_seed: 0,
            tau_scaling: TauNoiseScaling::PerStepConstant,
            velocity: VelocityEstimator::LastTwo,
            bounce_fit_window: 3,
        }
    }
}

impl NoiseConfig {
    pub fn zero() -> Self {
        NoiseConfig::default()
    }

    pub fn validate(&self) -> Result<(), MentalError> {
        for (name, v) in [
            ("sigma_derender", self.sigma_derender),
            ("sigma_simulate", self.sigma_simulate),
            ("sigma_render", self.sigma_render),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(MentalError::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.bounce_fit_window < 2 {
            return Err(MentalError::Config("bounce_fit_window must be at least 2".into()));
        }
        Ok(())
    }

    /// Effective transition noise for a step of `dt` seconds.
    pub fn tau_sigma(&self, dt: f64) -> f64 {
        match self.tau_scaling {
            TauNoiseScaling::PerStepConstant => self.sigma_simulate,
            TauNoiseScaling::LinearInDt => self.sigma_simulate * dt / TAU_REFERENCE_DT,
        }
    }
}

/// Systematic misperception of physical parameters by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamBias {
    pub restitution_scale: f64,
    pub fill_rate_scale: f64,
    pub gravity_scale: f64,
}

impl Default for ParamBias {
    fn default() -> Self {
        ParamBias { restitution_scale: 1.0, fill_rate_scale: 1.0, gravity_scale: 1.0 }
    }
}

impl ParamBias {
    pub fn is_identity(&self) -> bool {
        *self == ParamBias::default()
    }

    /// The spec as the biased observer believes it to be.
    pub fn apply(&self, spec: &StimulusSpec) -> StimulusSpec {
        let mut s = spec.clone();
        match &mut s.params {
            DomainParams::Motion2d(_) => {}
            DomainParams::Gravity2d(p) => p.gravity_px_per_sec2 *= self.gravity_scale,
            DomainParams::Fluids(f) => f.fill_rate_per_sec *= self.fill_rate_scale,
            DomainParams::Bouncing(b) => {
                b.restitution = (b.restitution * self.restitution_scale).clamp(f64::MIN_POSITIVE, 1.0);
                b.gravity_px_per_sec2 *= self.gravity_scale;
            }
        }
        s
    }
}

/// Detector settings used when de-rendering.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSet {
    pub water: WaterDetectorParams,
    pub ball: BallDetectorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    pub state: WorldState,
    pub source_frame_time: f64,
    pub noise_applied: bool,
    /// Velocity could not be estimated (single frame); it is treated as zero.
    pub partial: bool,
}

/// De-rendered observable of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    Ball(Vec2),
    Fill(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub time_sec: f64,
    pub value: Observable,
}

/// Run the domain's detector on one frame, without noise.
pub fn observe(
    frame: &Frame,
    spec: &StimulusSpec,
    style: &CanvasStyle,
    detectors: &DetectorSet,
) -> Result<Observation, MentalError> {
    let miss = || MentalError::Derender { time_sec: frame.time_sec };
    let value = match spec.domain() {
        Domain::Motion2d | Domain::Gravity2d => {
            let (x, y) = detect_red_centroid(frame).precise_center().ok_or_else(miss)?;
            Observable::Ball(Vec2::new(x, y))
        }
        Domain::Bouncing => {
            let (x, y) = detect_ball(frame, &detectors.ball).precise_center().ok_or_else(miss)?;
            Observable::Ball(Vec2::new(x, y))
        }
        Domain::Fluids => {
            let d = detect_water_level(frame, &detectors.water)?;
            let top = d.top_y.ok_or_else(miss)?;
            // Erosion pushes the detected top down; undo it before mapping to a fill.
            let row = (top - detectors.water.erosion_bias_rows()) as f64;
            Observable::Fill(style.mug.fill_from_row(row))
        }
    };
    Ok(Observation { time_sec: frame.time_sec, value })
}

/// How many trailing frames the estimator looks at.
fn frames_needed(spec: &StimulusSpec, noise: &NoiseConfig) -> usize {
    match spec.domain() {
        Domain::Fluids => 1,
        Domain::Bouncing => noise.bounce_fit_window,
        _ => match noise.velocity {
            VelocityEstimator::LastTwo => 2,
            VelocityEstimator::Regression => usize::MAX,
        },
    }
}

/// Noisy de-render of the latest state from a time-sorted frame sequence.
pub fn derender_noisy(
    frames: &[Frame],
    spec: &StimulusSpec,
    style: &CanvasStyle,
    detectors: &DetectorSet,
    noise: &NoiseConfig,
    rng: &mut impl Rng,
) -> Result<StateEstimate, MentalError> {
    noise.validate()?;
    if frames.is_empty() {
        return Err(MentalError::NoFrames);
    }
    let k = frames_needed(spec, noise).min(frames.len());
    let obs = frames[frames.len() - k..]
        .iter()
        .map(|f| observe(f, spec, style, detectors))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(estimate_from_observations(&obs, spec, style, noise, rng))
}

/// Turn clean observations into a state estimate, adding de-render noise to
/// each observation first.
pub fn estimate_from_observations(
    obs: &[Observation],
    spec: &StimulusSpec,
    style: &CanvasStyle,
    noise: &NoiseConfig,
    rng: &mut impl Rng,
) -> StateEstimate {
    let sigma = noise.sigma_derender;
    let level_scale = 1.0 / style.mug.inner_height as f64;
    let noisy: Vec<Observation> = obs
        .iter()
        .map(|o| Observation {
            time_sec: o.time_sec,
            value: match o.value {
                Observable::Ball(p) => {
                    let (dx, dy) = (gauss(rng, sigma), gauss(rng, sigma));
                    Observable::Ball(p + Vec2::new(dx, dy))
                }
                Observable::Fill(f) => Observable::Fill(f - gauss(rng, sigma) * level_scale),
            },
        })
        .collect();
    let last = *noisy.last().expect("at least one observation");
    let t = last.time_sec;
    let partial = spec.domain().has_ball() && noisy.len() < 2;
    let state = match (last.value, &spec.params) {
        (Observable::Fill(f), _) => WorldState::fluid(t, f),
        (Observable::Ball(p), DomainParams::Bouncing(b)) => {
            if partial {
                WorldState::ball(Domain::Bouncing, t, p, Vec2::default())
            } else {
                fit_bounce(&noisy, spec, b.contact_y())
            }
        }
        (Observable::Ball(p), params) => {
            let g = match params {
                DomainParams::Gravity2d(g) => g.gravity_px_per_sec2,
                _ => 0.0,
            };
            let v = if partial {
                Vec2::default()
            } else {
                match noise.velocity {
                    VelocityEstimator::LastTwo => {
                        let prev = noisy[noisy.len() - 2];
                        let q = ball(prev);
                        let dt = t - prev.time_sec;
                        Vec2::new((p.x - q.x) / dt, (p.y - q.y) / dt + 0.5 * g * dt)
                    }
                    VelocityEstimator::Regression => regress_velocity(&noisy, g),
                }
            };
            WorldState::ball(spec.domain(), t, p, v)
        }
    };
    StateEstimate {
        state: clamp_state(state, spec),
        source_frame_time: t,
        noise_applied: sigma > 0.0,
        partial,
    }
}

fn ball(o: Observation) -> Vec2 {
    match o.value {
        Observable::Ball(p) => p,
        Observable::Fill(_) => unreachable!("fill observation in a ball domain"),
    }
}

/// Velocity at the last observation from an OLS fit of `x(t)` and
/// `y(t) - g t^2 / 2`.
fn regress_velocity(obs: &[Observation], g: f64) -> Vec2 {
    let n = obs.len() as f64;
    let ts: Vec<f64> = obs.iter().map(|o| o.time_sec).collect();
    let tm = ts.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let slope = |vals: &[f64]| {
        let vm = vals.iter().sum::<f64>() / n;
        ts.iter().zip(vals).map(|(t, v)| (t - tm) * (v - vm)).sum::<f64>() / sxx
    };
    let xs: Vec<f64> = obs.iter().map(|o| ball(*o).x).collect();
    let ys: Vec<f64> = obs.iter().map(|o| ball(*o).y - 0.5 * g * o.time_sec.powi(2)).collect();
    let t_last = *ts.last().expect("non-empty");
    Vec2::new(slope(&xs), slope(&ys) + g * t_last)
}

/// Fit the believed bounce dynamics to the observed heights.
///
/// The state at the first observation is either free flight with unknown
/// vertical speed, or (when the ball is on the ground) a contact with unknown
/// remaining dwell and impact speed. The best hypothesis is simulated forward
/// to the last observation.
fn fit_bounce(obs: &[Observation], spec: &StimulusSpec, contact_y: f64) -> WorldState {
    let first = obs[0];
    let last = *obs.last().expect("non-empty");
    let p0 = ball(first);
    let x = ball(last).x;
    let b = spec.bounce().expect("bouncing spec");
    let t0 = first.time_sec;

    let cost = |s0: &WorldState| -> f64 {
        let mut s = s0.clone();
        let mut c = 0.0;
        for o in &obs[1..] {
            if let Ok(next) = physics::step(&s, o.time_sec - s.time_sec, spec) {
                s = next;
            }
            let y = s.ball_pos.map_or(f64::INFINITY, |p| p.y);
            c += (y - ball(*o).y).powi(2);
        }
        c
    };
    let free = |v: f64| {
        let mut s = WorldState::ball(Domain::Bouncing, t0, Vec2::new(x, p0.y.min(contact_y)), Vec2::new(0.0, v));
        s.bounce_phase = Some(if v < 0.0 { BouncePhase::After } else { BouncePhase::Before });
        s
    };
    let touching = |remaining: f64, impact: f64| {
        let mut s = WorldState::ball(Domain::Bouncing, t0, Vec2::new(x, contact_y), Vec2::default());
        s.bounce_phase = Some(BouncePhase::During);
        s.contact = Some(Contact { remaining_sec: remaining.max(0.0), impact_speed: impact.max(0.0) });
        s
    };

    let v_max = 4.0 * (2.0 * b.gravity_px_per_sec2 * f64::from(spec.canvas_height)).sqrt();
    let mut best_v = 0.0;
    let mut best = f64::INFINITY;
    let coarse = 400;
    for i in 0..=coarse {
        let v = -v_max + 2.0 * v_max * i as f64 / coarse as f64;
        let c = cost(&free(v));
        if c < best {
            best = c;
            best_v = v;
        }
    }
    let mut step = 2.0 * v_max / coarse as f64;
    while step > 1e-4 {
        for v in [best_v - step, best_v + step] {
            let c = cost(&free(v));
            if c < best {
                best = c;
                best_v = v;
            }
        }
        step *= 0.5;
    }
    let mut start = free(best_v);

    if p0.y >= contact_y - GROUND_BAND_PX && b.contact_duration_sec > 0.0 {
        let d = b.contact_duration_sec;
        let (mut br, mut bi, mut bc) = (0.0, 0.0, f64::INFINITY);
        for i in 0..=20 {
            for j in 0..=100 {
                let (r, imp) = (d * i as f64 / 20.0, v_max * j as f64 / 100.0);
                let c = cost(&touching(r, imp));
                if c < bc {
                    (br, bi, bc) = (r, imp, c);
                }
            }
        }
        let (mut sr, mut si) = (d / 20.0, v_max / 100.0);
        while si > 1e-4 {
            for (r, imp) in [(br - sr, bi), (br + sr, bi), (br, bi - si), (br, bi + si)] {
                if !(0.0..=d).contains(&r) || imp < 0.0 {
                    continue;
                }
                let c = cost(&touching(r, imp));
                if c < bc {
                    (br, bi, bc) = (r, imp, c);
                }
            }
            sr *= 0.5;
            si *= 0.5;
        }
        if bc < best {
            start = touching(br, bi);
        }
    }

    let mut s = start;
    if last.time_sec > s.time_sec {
        if let Ok(next) = physics::step(&s, last.time_sec - s.time_sec, spec) {
            s = next;
        }
    }
    s.time_sec = last.time_sec;
    if s.contact.is_none() {
        // Keep the observed height; the fit only supplies the motion.
        s.ball_pos = Some(Vec2::new(x, ball(last).y.min(contact_y)));
    }
    s
}

fn clamp_state(mut s: WorldState, spec: &StimulusSpec) -> WorldState {
    if let Some(f) = s.fill_fraction.as_mut() {
        *f = f.clamp(0.0, 1.0);
    }
    if let Some(p) = s.ball_pos.as_mut() {
        p.x = p.x.clamp(0.0, f64::from(spec.canvas_width) - 1.0);
        p.y = p.y.clamp(0.0, f64::from(spec.canvas_height) - 1.0);
        if let Some(b) = spec.bounce() {
            p.y = p.y.min(b.contact_y());
        }
    }
    s
}

/// Exact transition followed by additive Gaussian noise on the observable.
pub fn simulate_noisy(
    est: &StateEstimate,
    dt: f64,
    spec: &StimulusSpec,
    style: &CanvasStyle,
    noise: &NoiseConfig,
    rng: &mut impl Rng,
) -> Result<StateEstimate, MentalError> {
    let mut state = physics::step(&est.state, dt, spec)?;
    let sigma = noise.tau_sigma(dt);
    if let Some(p) = state.ball_pos.as_mut() {
        p.x += gauss(rng, sigma);
        p.y += gauss(rng, sigma);
    }
    if let Some(f) = state.fill_fraction.as_mut() {
        *f += gauss(rng, sigma) / style.mug.inner_height as f64;
    }
    Ok(StateEstimate {
        state: clamp_state(state, spec),
        source_frame_time: est.source_frame_time,
        noise_applied: est.noise_applied || sigma > 0.0,
        partial: est.partial,
    })
}

/// Jitter the observable by `sigma_render` and rasterize.
pub fn render_noisy(
    est: &StateEstimate,
    spec: &StimulusSpec,
    style: &CanvasStyle,
    noise: &NoiseConfig,
    rng: &mut impl Rng,
) -> Result<Frame, MentalError> {
    let sigma = noise.sigma_render;
    let mut state = est.state.clone();
    if let Some(p) = state.ball_pos.as_mut() {
        p.x += gauss(rng, sigma);
        p.y += gauss(rng, sigma);
    }
    if let Some(f) = state.fill_fraction.as_mut() {
        *f = (*f - gauss(rng, sigma) / style.mug.inner_height as f64).clamp(0.0, 1.0);
    }
    Ok(render_scene(&state, spec, style)?)
}

/// Everything the oracle needs besides the frames.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSetup {
    pub spec: StimulusSpec,
    pub style: CanvasStyle,
    pub detectors: DetectorSet,
    pub noise: NoiseConfig,
    pub bias: ParamBias,
}

/// One oracle generation: de-render the shown frames, simulate `step_sec`
/// forward under the believed parameters, render.
///
/// `frames` must be time-sorted and include every input and previously
/// generated frame of the conversation. The noise stream is
/// `(noise.rng_seed ^ session_seed, step_index)`.
pub fn oracle_generate(
    frames: &[Frame],
    setup: &OracleSetup,
    step_sec: f64,
    session_seed: u64,
    step_index: u64,
) -> Result<Frame, MentalError> {
    let mut rng = stream_rng(setup.noise.rng_seed ^ session_seed, step_index);
    let believed = setup.bias.apply(&setup.spec);
    let est = derender_noisy(frames, &believed, &setup.style, &setup.detectors, &setup.noise, &mut rng)?;
    let next = simulate_noisy(&est, step_sec, &believed, &setup.style, &setup.noise, &mut rng)?;
    let frame = render_noisy(&next, &believed, &setup.style, &setup.noise, &mut rng)?;
    let t = frames.last().map_or(0.0, |f| f.time_sec) + step_sec;
    Ok(frame.with_time(t, Provenance::OracleRendered))
}
