//! Render the input frames of one stimulus per domain as PNG files.
//!
//! ```text
//! cargo run --example render_stimuli -- /tmp/stimuli
//! ```

use std::path::PathBuf;

use cot_harness::physics::{enumerate_grid, Domain, GridOptions};
use cot_harness::pipeline::render_inputs;
use cot_harness::render::frame_file_name;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "stimuli".into()));
    for domain in Domain::ALL {
        let spec = enumerate_grid(domain, &GridOptions::default()).remove(0);
        let dir = out.join(&spec.stimulus_id);
        std::fs::create_dir_all(&dir)?;
        for frame in render_inputs(&spec)? {
            frame.save_png(&dir.join(frame_file_name(frame.time_sec)))?;
        }
        println!("{} ({}x{}) -> {}", spec.stimulus_id, spec.canvas_width, spec.canvas_height, dir.display());
    }
    Ok(())
}
