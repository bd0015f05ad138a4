//! Full pipeline on the 2D Motion grid with the oracle, ending in a report.
//!
//! ```text
//! cargo run --release --example analysis_report -- /tmp/report
//! ```

use cot_harness::config::RunConfig;
use cot_harness::physics::Domain;
use cot_harness::pipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.out = std::env::args().nth(1).unwrap_or_else(|| "report-example".into()).into();
    cfg.domains = vec![Domain::Motion2d];
    cfg.noise.sigma_derender = 2.0;
    cfg.noise.sigma_simulate = 4.0;
    let summary = pipeline::all(&cfg)?;
    println!("{} sessions, {} calls", summary.sessions.len(), summary.calls);
    let reports = pipeline::detect(&cfg, &cfg.out)?;
    for a in pipeline::analyze(&cfg, &reports)?.aggregates {
        println!("{:<8} rmse {:7.3} px  95% CI [{:.3}, {:.3}]  n={}", a.method, a.rmse, a.ci_lo, a.ci_hi, a.n);
    }
    println!("report in {}", cfg.out.join("report").display());
    Ok(())
}
