//! The built-in models with their decay orders and reference values.
//!
//!     cargo run --release --example catalog

use gbc_mass::models::ModelSpec;

fn main() -> gbc_mass::Result<()> {
    for spec in ModelSpec::catalog() {
        let info = spec.info()?;
        println!(
            "{} n={} m={} tau={} flat normal bundle: {} q = {:?}",
            info.name, info.n, info.m, info.tau, info.flat_normal_bundle, info.supported_q
        );
        for r in &info.references {
            let q = r.q.map(|q| format!(" (q={q})")).unwrap_or_default();
            println!(
                "    {}{q} = {:.6} [{:?}]",
                r.quantity, r.value, r.provenance
            );
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&ModelSpec::catalog()[2]).expect("spec serialises")
    );
    Ok(())
}
