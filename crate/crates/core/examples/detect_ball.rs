//! Run the detectors on rendered frames, or on a PNG given as argument.
//!
//! ```text
//! cargo run --example detect_ball -- frame.png
//! ```

use cot_harness::derender::{detect_ball, detect_red_centroid, detect_water_level, BallDetectorParams, WaterDetectorParams};
use cot_harness::physics::{enumerate_grid, state_at, Domain, GridOptions};
use cot_harness::render::{render_scene, CanvasStyle, Frame, Provenance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if let Some(path) = std::env::args().nth(1) {
        let frame = Frame::load_png(path.as_ref(), 0.0, Provenance::Generated)?;
        let d = detect_ball(&frame, &BallDetectorParams::default());
        println!("{}", serde_json::to_string_pretty(&d)?);
        return Ok(());
    }
    for domain in Domain::ALL {
        let spec = enumerate_grid(domain, &GridOptions::default()).remove(0);
        let truth = state_at(&spec, 1.0);
        let frame = render_scene(&truth, &spec, &CanvasStyle::for_domain(domain))?;
        let d = match domain {
            Domain::Motion2d | Domain::Gravity2d => detect_red_centroid(&frame),
            Domain::Bouncing => detect_ball(&frame, &BallDetectorParams::default()),
            Domain::Fluids => detect_water_level(&frame, &WaterDetectorParams::default())?,
        };
        let stage = d.diagnostics.stage.map_or("-", |s| s.name());
        match (truth.ball_pos, d.precise_center()) {
            (Some(p), Some((x, y))) => println!(
                "{:<10} truth ({:.1}, {:.1}) detected ({x:.2}, {y:.2}) via {stage}",
                domain.name(), p.x, p.y
            ),
            _ => println!("{:<10} fill {:.3} top row {:?}", domain.name(), truth.fill_fraction.unwrap_or(0.0), d.top_y),
        }
    }
    Ok(())
}
