//! Pointwise identity suite on seeded sample points of two models: a radial
//! hypersurface and a codimension-two graph whose normal bundle is curved.
//!
//!     cargo run --release --example verify_identities

use gbc_mass::cli::{identity_suite, Tolerances};
use gbc_mass::models::{sample_points, ModelSpec};

fn main() -> gbc_mass::Result<()> {
    let specs = [
        ModelSpec::Schwarzschild {
            n: 5,
            q: 2,
            mass: 0.5,
            clip: 1e-3,
            excess: 0.0,
            decay: 1.0,
        },
        ModelSpec::Skew {
            n: 3,
            amplitude: 1.0,
            decay: 4.0,
        },
    ];
    for spec in specs {
        let map = spec.build()?;
        let qs = spec.info()?.supported_q;
        let points = sample_points(map.as_ref(), 32, 11);
        let (results, commutator) =
            identity_suite(map.as_ref(), &qs, &points, &Tolerances::default(), 1e-3)?;
        println!("{} (n = {}, q = {qs:?})", spec.label(), map.dim());
        for r in results {
            let q = r.q.map(|q| format!("q={q}")).unwrap_or_default();
            println!(
                "  {:<36} {q:<4} {:.2e}  {}",
                r.identity,
                r.max_residual,
                if r.passed { "ok" } else { "FAIL" }
            );
        }
        println!("  max |commutator term| = {commutator:.3e}");
    }
    Ok(())
}
