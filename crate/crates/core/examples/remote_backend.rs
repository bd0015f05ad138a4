//! Drive one Direct Prediction session through a remote image service.
//!
//! The API key is read from the environment variable named in the
//! descriptor (`COT_API_KEY` by default); it is never written anywhere.
//!
//! ```text
//! COT_API_KEY=... cargo run --example remote_backend -- https://host/v1/images
//! ```

use std::sync::Arc;

use cot_harness::cot::{FrameStore, MethodConfig, RemoteBackend, RemoteDescriptor, Runner};
use cot_harness::physics::{enumerate_grid, Domain, GridOptions};
use cot_harness::pipeline::render_inputs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let Some(url) = std::env::args().nth(1) else {
        eprintln!("usage: remote_backend <endpoint-url>");
        return Ok(());
    };
    let desc = RemoteDescriptor { endpoint_url: url, ..Default::default() };
    if std::env::var_os(&desc.credential_env).is_none() {
        eprintln!("{} is not set", desc.credential_env);
        return Ok(());
    }
    let spec = enumerate_grid(Domain::Motion2d, &GridOptions::default()).remove(1);
    let inputs = render_inputs(&spec)?;
    let runner = Runner::new(FrameStore::new(std::env::temp_dir().join("cot-remote")), Arc::new(RemoteBackend::new(desc)?));
    let s = runner.run_session(&spec, &inputs, MethodConfig::DIRECT, 0, 0)?;
    println!("{:?} {:?}", s.status, s.error);
    Ok(())
}
