//! Deterministic rasterization of world states into stimulus frames.
//!
//! Curved edges are anti-aliased with a 4x4 supersampling grid evaluated in
//! fixed point (1/1024 px), so output is bit-identical across platforms.
//! Pixel `(x, y)` is centered on the continuous coordinate `(x, y)`.

mod frame;

pub use frame::{frame_file_name, Frame, FrameError, Provenance};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{Domain, DomainParams, MugSize, StimulusSpec, Vec2, WorldState};

const FIXED_ONE: i64 = 1024;
/// Sub-sample offsets within a pixel, in fixed-point units: -3/8, -1/8, 1/8, 3/8.
const SUBSAMPLE: [i64; 4] = [-384, -128, 128, 384];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("ball at ({x:.1}, {y:.1}) lies entirely outside the canvas")]
    OutOfFrame { x: f64, y: f64 },
    #[error("state for {found} cannot be rendered into a {expected} stimulus")]
    DomainMismatch { expected: Domain, found: Domain },
    #[error("state is missing its {0} component")]
    MissingComponent(&'static str),
}

/// Half-open integer rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RectPx {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl RectPx {
    pub fn width(&self) -> i64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0
    }
}

/// Schematic mug drawn in the fluids scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MugGeometry {
    pub center_x: i64,
    /// First row below the water (the inner floor of the mug).
    pub inner_bottom: i64,
    pub inner_height: i64,
    /// Inner widths for small, medium and large mugs.
    pub inner_widths: [i64; 3],
    pub wall_px: i64,
    /// How far the walls extend above the inner top.
    pub rim_px: i64,
}

impl MugGeometry {
    pub fn inner_width(&self, size: MugSize) -> i64 {
        self.inner_widths[size as usize]
    }

    pub fn inner_rect(&self, size: MugSize) -> RectPx {
        let w = self.inner_width(size);
        let x0 = self.center_x - w / 2;
        RectPx {
            x0,
            y0: self.inner_bottom - self.inner_height,
            x1: x0 + w,
            y1: self.inner_bottom,
        }
    }

    /// Exact (unrounded) row of the water surface.
    pub fn water_surface_y(&self, fill_fraction: f64) -> f64 {
        self.inner_bottom as f64 - fill_fraction * self.inner_height as f64
    }

    /// First rendered water row, rounded half up.
    pub fn water_top_row(&self, fill_fraction: f64) -> i64 {
        (self.water_surface_y(fill_fraction) + 0.5).floor() as i64
    }

    /// Inverse of [`Self::water_surface_y`].
    pub fn fill_from_row(&self, row: f64) -> f64 {
        (self.inner_bottom as f64 - row) / self.inner_height as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasStyle {
    pub background: [u8; 3],
    pub ball_color: [u8; 3],
    pub ball_radius_px: f64,
    pub water_color: [u8; 3],
    pub mug: MugGeometry,
    pub mug_wall_color: [u8; 3],
    pub pipe: RectPx,
    pub pipe_color: [u8; 3],
    pub stream_width_px: i64,
    pub ground_color: [u8; 3],
    pub ground_thickness_px: i64,
    /// Vertical scale of the ball while it is deformed on the ground.
    pub squash_factor: f64,
}

impl CanvasStyle {
    pub fn for_domain(domain: Domain) -> Self {
        let base = CanvasStyle {
            background: [255, 255, 255],
            ball_color: [255, 0, 0],
            ball_radius_px: 40.0,
            water_color: [70, 160, 230],
            mug: MugGeometry {
                center_x: 512,
                inner_bottom: 900,
                inner_height: 600,
                inner_widths: [240, 320, 400],
                wall_px: 10,
                rim_px: 20,
            },
            mug_wall_color: [175, 185, 195],
            pipe: RectPx { x0: 496, y0: 0, x1: 528, y1: 220 },
            pipe_color: [70, 70, 75],
            stream_width_px: 4,
            ground_color: [90, 90, 90],
            ground_thickness_px: 4,
            squash_factor: 0.7,
        };
        match domain {
            Domain::Motion2d | Domain::Gravity2d => base,
            Domain::Fluids => CanvasStyle { background: [225, 238, 248], ..base },
            Domain::Bouncing => CanvasStyle {
                background: [236, 236, 230],
                ball_color: [190, 70, 40],
                ball_radius_px: 60.0,
                ..base
            },
        }
    }
}

/// Rasterize `state` into an RGB frame at the state's time.
pub fn render_scene(state: &WorldState, spec: &StimulusSpec, style: &CanvasStyle) -> Result<Frame, RenderError> {
    if state.domain != spec.domain() {
        return Err(RenderError::DomainMismatch { expected: spec.domain(), found: state.domain });
    }
    let (w, h) = (spec.canvas_width as usize, spec.canvas_height as usize);
    let time = state.time_sec.max(0.0);
    let mut frame = Frame::filled(w, h, style.background, time, Provenance::Input);
    match &spec.params {
        DomainParams::Motion2d(_) | DomainParams::Gravity2d(_) => {
            let pos = state.ball_pos.ok_or(RenderError::MissingComponent("ball position"))?;
            let r = style.ball_radius_px;
            check_in_frame(pos, r, r, w, h)?;
            fill_ellipse(&mut frame, pos, r, r, style.ball_color);
        }
        DomainParams::Fluids(f) => {
            let fill = state.fill_fraction.ok_or(RenderError::MissingComponent("fill fraction"))?;
            draw_fluid_scene(&mut frame, style, f.mug_size, fill.clamp(0.0, 1.0));
        }
        DomainParams::Bouncing(b) => {
            let pos = state.ball_pos.ok_or(RenderError::MissingComponent("ball position"))?;
            let ground = b.ground_y.round() as i64;
            fill_rect(
                &mut frame,
                RectPx { x0: 0, y0: ground, x1: w as i64, y1: ground + style.ground_thickness_px },
                style.ground_color,
            );
            let r = b.ball_radius_px;
            let ry = if state.contact.is_some() { r * style.squash_factor } else { r };
            check_in_frame(pos, r, ry, w, h)?;
            fill_ellipse(&mut frame, pos, r, ry, style.ball_color);
        }
    }
    Ok(frame)
}

fn check_in_frame(pos: Vec2, rx: f64, ry: f64, w: usize, h: usize) -> Result<(), RenderError> {
    let outside = !pos.x.is_finite()
        || !pos.y.is_finite()
        || pos.x + rx < -0.5
        || pos.y + ry < -0.5
        || pos.x - rx > w as f64 - 0.5
        || pos.y - ry > h as f64 - 0.5;
    if outside {
        Err(RenderError::OutOfFrame { x: pos.x, y: pos.y })
    } else {
        Ok(())
    }
}

fn draw_fluid_scene(frame: &mut Frame, style: &CanvasStyle, size: MugSize, fill: f64) {
    let mug = &style.mug;
    let inner = mug.inner_rect(size);
    let top = mug.water_top_row(fill).clamp(inner.y0, inner.y1);

    fill_rect(frame, style.pipe, style.pipe_color);
    let sx0 = mug.center_x - style.stream_width_px / 2;
    fill_rect(
        frame,
        RectPx { x0: sx0, y0: style.pipe.y1, x1: sx0 + style.stream_width_px, y1: top },
        style.water_color,
    );

    let wall_top = inner.y0 - mug.rim_px;
    let wall_bottom = inner.y1 + mug.wall_px;
    for wall in [
        RectPx { x0: inner.x0 - mug.wall_px, y0: wall_top, x1: inner.x0, y1: wall_bottom },
        RectPx { x0: inner.x1, y0: wall_top, x1: inner.x1 + mug.wall_px, y1: wall_bottom },
        RectPx { x0: inner.x0, y0: inner.y1, x1: inner.x1, y1: wall_bottom },
    ] {
        fill_rect(frame, wall, style.mug_wall_color);
    }
    fill_rect(frame, RectPx { y0: top, ..inner }, style.water_color);
}

fn fill_rect(frame: &mut Frame, r: RectPx, color: [u8; 3]) {
    let x0 = r.x0.clamp(0, frame.width() as i64) as usize;
    let x1 = r.x1.clamp(0, frame.width() as i64) as usize;
    let y0 = r.y0.clamp(0, frame.height() as i64) as usize;
    let y1 = r.y1.clamp(0, frame.height() as i64) as usize;
    for y in y0..y1 {
        for x in x0..x1 {
            frame.pixel_mut(x, y)[..3].copy_from_slice(&color);
        }
    }
}

fn to_fixed(v: f64) -> i64 {
    (v * FIXED_ONE as f64).round() as i64
}

/// Axis-aligned filled ellipse with coverage-based anti-aliasing.
fn fill_ellipse(frame: &mut Frame, center: Vec2, rx: f64, ry: f64, color: [u8; 3]) {
    let (cx, cy) = (to_fixed(center.x), to_fixed(center.y));
    let (ax, ay) = (to_fixed(rx).max(1) as i128, to_fixed(ry).max(1) as i128);
    let (ax2, ay2) = (ax * ax, ay * ay);
    let limit = ax2 * ay2;
    let x_lo = ((center.x - rx).floor() as i64 - 1).max(0);
    let x_hi = ((center.x + rx).ceil() as i64 + 1).min(frame.width() as i64 - 1);
    let y_lo = ((center.y - ry).floor() as i64 - 1).max(0);
    let y_hi = ((center.y + ry).ceil() as i64 + 1).min(frame.height() as i64 - 1);
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let mut covered = 0u16;
            for oy in SUBSAMPLE {
                let dy = (y * FIXED_ONE + oy - cy) as i128;
                let ty = dy * dy * ax2;
                for ox in SUBSAMPLE {
                    let dx = (x * FIXED_ONE + ox - cx) as i128;
                    if dx * dx * ay2 + ty <= limit {
                        covered += 1;
                    }
                }
            }
            if covered > 0 {
                let px = frame.pixel_mut(x as usize, y as usize);
                for c in 0..3 {
                    let bg = u16::from(px[c]);
                    let fg = u16::from(color[c]);
                    px[c] = ((bg * (16 - covered) + fg * covered + 8) / 16) as u8;
                }
            }
        }
    }
}
