//! Driving the batch interface from code: a JSON configuration, a validated
//! run, and the report that `gbc-mass mass` would write.
//!
//!     cargo run --release --example run_config

use gbc_mass::cli::{cmd_mass, cmd_verify, Run, RunConfig};

fn main() {
    let text = r#"{
        "model": {"name": "ellipsoid_level", "semi_axes": [1.0, 1.0, 1.5],
                  "profile": {"kind": "power", "amplitude": 0.5, "exponent": 1.0}},
        "order": 16,
        "samples": 16,
        "bulk_order": 4
    }"#;
    let config: RunConfig = serde_json::from_str(text).expect("valid configuration");
    let run = Run::new(config, None, 3).expect("consistent configuration");
    let verify = cmd_verify(&run).expect("identity suite runs");
    match verify.first_failure() {
        Some(f) => println!("identity {} failed", f.identity),
        None => println!(
            "{} identities hold on {} points",
            verify.identities.len(),
            verify.samples
        ),
    }
    match cmd_mass(&run) {
        Ok(out) => println!(
            "{}",
            serde_json::to_string_pretty(&out.reports).expect("report serialises")
        ),
        Err(e) => println!("mass run failed with exit code {}: {e}", e.exit_code()),
    }
}
