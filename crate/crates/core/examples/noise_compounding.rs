//! How per-step transition noise accumulates over chained steps.

use cot_harness::mental::{simulate_noisy, stream_rng, NoiseConfig, StateEstimate, TauNoiseScaling};
use cot_harness::physics::{enumerate_grid, state_at, Domain, GridOptions};
use cot_harness::render::CanvasStyle;

fn std_dev(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn main() {
    let spec = enumerate_grid(Domain::Motion2d, &GridOptions::default()).remove(1);
    let style = CanvasStyle::for_domain(Domain::Motion2d);
    let start = StateEstimate { state: state_at(&spec, 0.8), source_frame_time: 0.8, noise_applied: false, partial: false };
    for scaling in [TauNoiseScaling::PerStepConstant, TauNoiseScaling::LinearInDt] {
        let noise = NoiseConfig { sigma_simulate: 5.0, tau_scaling: scaling, ..NoiseConfig::zero() };
        print!("{scaling:?}:");
        for (step, n) in [(0.2, 4), (0.4, 2), (0.8, 1)] {
            let xs: Vec<f64> = (0..2000)
                .map(|seed| {
                    let mut rng = stream_rng(seed, 0);
                    let mut e = start.clone();
                    for _ in 0..n {
                        e = simulate_noisy(&e, step, &spec, &style, &noise, &mut rng).unwrap();
                    }
                    e.state.ball_pos.unwrap().x
                })
                .collect();
            print!("  {n} x {step}s -> std {:.2} px", std_dev(&xs));
        }
        println!();
    }
}
