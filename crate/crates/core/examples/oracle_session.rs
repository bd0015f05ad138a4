//! One Chain-of-Time session against the simulated-observer oracle.

use std::sync::Arc;

use cot_harness::analysis::build_report;
use cot_harness::cot::{FrameStore, MethodConfig, OracleBackend, Runner};
use cot_harness::mental::{DetectorSet, NoiseConfig};
use cot_harness::physics::{enumerate_grid, Domain, GridOptions};
use cot_harness::pipeline::render_inputs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("cot-oracle-session");
    let spec = enumerate_grid(Domain::Gravity2d, &GridOptions::default()).remove(0);
    let inputs = render_inputs(&spec)?;
    let noise = NoiseConfig { sigma_derender: 1.0, sigma_simulate: 3.0, ..NoiseConfig::zero() };
    let runner = Runner::new(FrameStore::new(&dir), Arc::new(OracleBackend::new(noise)));
    let session = runner.run_session(&spec, &inputs, MethodConfig::COT_02, 0, 42)?;
    for e in &session.transcript {
        println!("[{:?}] {}", e.role, e.prompt_text.lines().next().unwrap_or(""));
    }
    let report = build_report(runner.store(), &session, &spec, &DetectorSet::default())?;
    for r in &report.records {
        println!("t={:.1}s error {:.2} px", r.time_sec, r.error_px.unwrap_or(f64::NAN));
    }
    println!("frames in {}", dir.display());
    Ok(())
}
