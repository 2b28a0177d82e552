//! Penrose-type inequality: equality at the Schwarzschild horizon, strict
//! inequality when the mass function keeps growing outside it.
//!
//!     cargo run --release --example penrose

use gbc_mass::mass::{penrose_check, PenroseSettings, PenroseVerdict};
use gbc_mass::models::ModelSpec;

fn main() -> gbc_mass::Result<()> {
    let cases = [
        ("horizon", 3, 1, 0.0),
        ("horizon", 5, 2, 0.0),
        ("growing mass", 3, 1, 0.5),
        ("growing mass", 5, 2, 0.5),
    ];
    for (label, n, q, excess) in cases {
        let map = ModelSpec::Schwarzschild {
            n,
            q,
            mass: 1.0,
            clip: 1e-3,
            excess,
            decay: 1.0,
        }
        .build()?;
        let settings = PenroseSettings {
            order: if n == 3 { 16 } else { 8 },
            ..Default::default()
        };
        match penrose_check(map.as_ref(), q, &settings)? {
            PenroseVerdict::Evaluated {
                mass, rhs, margin, ..
            } => println!(
                "{label:<13} n={n} q={q}: m_q = {:.6}, bound = {rhs:.6}, margin = {:+.3e}",
                mass.value, margin.value
            ),
            PenroseVerdict::HypothesesNotMet {
                hypothesis, detail, ..
            } => {
                println!("{label:<13} n={n} q={q}: not applicable ({hypothesis}: {detail})")
            }
        }
    }

    // The theorem needs a gradient blow-up at Σ; a smooth extension is refused.
    let smooth = ModelSpec::MassProfile {
        n: 3,
        q: 1,
        mass: 0.5,
        excess: 0.5,
        decay: 1.0,
        truncation: 1.5,
    }
    .build()?;
    if let PenroseVerdict::HypothesesNotMet { hypothesis, .. } =
        penrose_check(smooth.as_ref(), 1, &PenroseSettings::default())?
    {
        println!("smooth extension: hypothesis `{hypothesis}` not met");
    }
    Ok(())
}
