//! Print every prompt a session would send for one stimulus of each domain.

use cot_harness::cot::{prompt_for_step, MethodConfig};
use cot_harness::physics::{enumerate_grid, Domain, GridOptions};

fn main() {
    for domain in Domain::ALL {
        let spec = enumerate_grid(domain, &GridOptions::default()).pop().expect("grid is not empty");
        let m = MethodConfig::COT_04;
        for k in 0..m.steps() {
            println!("=== {} step {k} ({}) ===", spec.stimulus_id, m.label());
            println!("{}\n", prompt_for_step(&spec, m.step_size_sec, k).expect("grid prompts fill"));
        }
    }
}
