//! Print ground-truth trajectories, including the bounce phases of a ball.

use cot_harness::physics::{contact_events, enumerate_grid, ground_truth_trajectory, Domain, GridOptions};

fn main() {
    let times: Vec<f64> = (0..=8).map(|i| f64::from(i) * 0.2).collect();
    for domain in Domain::ALL {
        let spec = enumerate_grid(domain, &GridOptions::default()).remove(1);
        println!("{}", spec.stimulus_id);
        for s in ground_truth_trajectory(&spec, &times).expect("sorted times") {
            match (s.ball_pos, s.fill_fraction) {
                (Some(p), _) => {
                    let phase = s.bounce_phase.map_or(String::new(), |p| format!(" {}", p.name()));
                    println!("  t={:.1}  x={:8.2}  y={:8.2}{phase}", s.time_sec, p.x, p.y)
                }
                (None, Some(f)) => println!("  t={:.1}  fill={f:.4}", s.time_sec),
                _ => {}
            }
        }
        if let Some(b) = spec.bounce() {
            for e in contact_events(b, 3.0) {
                println!("  contact {:.3}-{:.3}s  in {:.1} px/s  out {:.1} px/s", e.start_sec, e.end_sec, e.vy_before, e.vy_after);
            }
        }
    }
}
