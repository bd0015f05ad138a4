//! Enumerates the stimulus grids used in the experiments.

use serde::{Deserialize, Serialize};

use super::{
    BounceParams, BouncePhase, Domain, DomainParams, FluidParams, LaunchPosition, MotionParams,
    MugSize, ProjectileParams, StimulusSpec, Vec2, LAUNCH_MARGIN_PX,
};

/// Fill rate (fraction per second) per unit of the flow-rate parameter.
pub const FLUID_RATE_SCALE: f64 = 0.002;

/// Surrogate for one of the recorded balls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BounceBall {
    pub id: u8,
    pub material: &'static str,
    pub restitution: f64,
    /// Video resampling rates (frames/second) the ball was shown at.
    pub rates: [f64; 2],
}

pub const BOUNCE_BALLS: [BounceBall; 9] = [
    BounceBall { id: 1, material: "transparent toy bouncing ball", restitution: 0.85, rates: [25.0, 50.0] },
    BounceBall { id: 2, material: "white bouncy ball", restitution: 0.80, rates: [25.0, 50.0] },
    BounceBall { id: 3, material: "black bouncy ball", restitution: 0.75, rates: [25.0, 50.0] },
    BounceBall { id: 4, material: "squash ball", restitution: 0.40, rates: [25.0, 50.0] },
    BounceBall { id: 5, material: "tennis ball", restitution: 0.70, rates: [25.0, 50.0] },
    BounceBall { id: 6, material: "soccer ball", restitution: 0.65, rates: [10.0, 15.0] },
    BounceBall { id: 7, material: "tennis ball", restitution: 0.70, rates: [10.0, 15.0] },
    BounceBall { id: 8, material: "purple bouncy ball", restitution: 0.80, rates: [10.0, 15.0] },
    BounceBall { id: 9, material: "tennis ball", restitution: 0.70, rates: [10.0, 15.0] },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridOptions {
    pub motion_speeds: Vec<f64>,
    pub gravity_speeds: Vec<f64>,
    pub gravity_angles_deg: Vec<f64>,
    pub gravity_px_per_sec2: f64,
    pub fluid_flow_rates: Vec<f64>,
    /// Initial fill levels in twelfths.
    pub fluid_levels_twelfths: Vec<u32>,
    pub fluid_rate_scale: f64,
    pub ball_radius_px: f64,
    pub bounce_ball_radius_px: f64,
    pub bounce_contact_sec: f64,
    /// Fall time from release to first contact, shared by all windows.
    pub bounce_fall_time_sec: f64,
    /// Peak apparent gravity; each ball's slower rate scales it down quadratically.
    pub bounce_peak_gravity: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            motion_speeds: vec![100.0, 300.0, 500.0],
            gravity_speeds: vec![230.0, 240.0, 250.0],
            gravity_angles_deg: vec![45.0, 60.0],
            gravity_px_per_sec2: 240.0,
            fluid_flow_rates: vec![25.0, 50.0, 75.0],
            fluid_levels_twelfths: vec![1, 3, 5, 7, 9],
            fluid_rate_scale: FLUID_RATE_SCALE,
            ball_radius_px: 40.0,
            bounce_ball_radius_px: 60.0,
            bounce_contact_sec: 0.1,
            bounce_fall_time_sec: 1.65,
            bounce_peak_gravity: 400.0,
        }
    }
}

impl GridOptions {
    /// Release time of each partition window, relative to the first frame.
    ///
    /// `before` never touches the ground inside the horizon, `during` hits
    /// the ground at 1.0 s, and `after` has already rebounded by the last
    /// input frame.
    pub fn bounce_release_time(&self, partition: BouncePhase) -> f64 {
        let contact_at = match partition {
            BouncePhase::Before => self.bounce_fall_time_sec,
            BouncePhase::During => 1.0,
            BouncePhase::After => 0.3,
        };
        contact_at - self.bounce_fall_time_sec
    }
}

/// Every stimulus of the domain's experimental grid.
pub fn enumerate_grid(domain: Domain, opts: &GridOptions) -> Vec<StimulusSpec> {
    let (w, h) = domain.default_canvas();
    match domain {
        Domain::Motion2d => opts
            .motion_speeds
            .iter()
            .map(|&speed| {
                StimulusSpec::new(
                    format!("motion2d_v{}", fmt_num(speed)),
                    DomainParams::Motion2d(MotionParams {
                        speed_px_per_sec: speed,
                        heading: Vec2::new(1.0, 0.0),
                        start_pos: Vec2::new(LAUNCH_MARGIN_PX, f64::from(h) / 2.0),
                    }),
                )
            })
            .collect(),
        Domain::Gravity2d => {
            let mut out = Vec::new();
            for &speed in &opts.gravity_speeds {
                for &angle in &opts.gravity_angles_deg {
                    for pos in LaunchPosition::ALL {
                        out.push(StimulusSpec::new(
                            format!(
                                "gravity2d_v{}_a{}_{}",
                                fmt_num(speed),
                                fmt_num(angle),
                                pos.prompt_name()
                            ),
                            DomainParams::Gravity2d(ProjectileParams {
                                launch_speed: speed,
                                launch_angle_deg: angle,
                                launch_position: pos,
                                gravity_px_per_sec2: opts.gravity_px_per_sec2,
                            }),
                        ));
                    }
                }
            }
            out
        }
        Domain::Fluids => {
            let mut out = Vec::new();
            for &rate in &opts.fluid_flow_rates {
                for mug in MugSize::ALL {
                    for &level in &opts.fluid_levels_twelfths {
                        out.push(StimulusSpec::new(
                            format!("fluids_f{}_{}_l{:02}", fmt_num(rate), mug.name(), level),
                            DomainParams::Fluids(FluidParams {
                                flow_rate_param: rate,
                                mug_size: mug,
                                initial_fill_fraction: f64::from(level) / 12.0,
                                fill_rate_per_sec: rate * opts.fluid_rate_scale,
                            }),
                        ));
                    }
                }
            }
            out
        }
        Domain::Bouncing => {
            let mut out = Vec::new();
            let ground_y = f64::from(h) - 40.0;
            for ball in BOUNCE_BALLS {
                let top_rate = ball.rates[1];
                for &rate in &ball.rates {
                    let g = opts.bounce_peak_gravity * (rate / top_rate).powi(2);
                    let t = opts.bounce_fall_time_sec;
                    for partition in BouncePhase::ALL {
                        out.push(StimulusSpec::new(
                            format!("bouncing_b{}_r{}_{}", ball.id, fmt_num(rate), partition.name()),
                            DomainParams::Bouncing(BounceParams {
                                restitution: ball.restitution,
                                drop_height_px: opts.bounce_ball_radius_px + 0.5 * g * t * t,
                                gravity_px_per_sec2: g,
                                contact_duration_sec: opts.bounce_contact_sec,
                                ground_y,
                                ball_radius_px: opts.bounce_ball_radius_px,
                                x_px: f64::from(w) / 2.0,
                                release_time_sec: opts.bounce_release_time(partition),
                                partition: Some(partition),
                            }),
                        ));
                    }
                }
            }
            out
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}").replace('.', "p")
    }
}
