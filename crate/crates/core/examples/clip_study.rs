//! The horizon of a q-Schwarzschild graph approached through the clip
//! surfaces {|F'| = 1/δ}: bulk plus weighted boundary tends to the limit
//! with the unweighted horizon term.
//!
//!     cargo run --release --example clip_study

use gbc_mass::mass::{clip_study, BulkSettings};
use gbc_mass::models::ModelSpec;
use gbc_mass::quadrature::sphere_rule;

fn main() -> gbc_mass::Result<()> {
    let spec = ModelSpec::Schwarzschild {
        n: 3,
        q: 1,
        mass: 1.0,
        clip: 1e-3,
        excess: 0.5,
        decay: 1.0,
    };
    let map = spec.build()?;
    let profile = spec.horizon().expect("schwarzschild has a horizon");
    let study = clip_study(
        map.as_ref(),
        &profile,
        1,
        &[0.3, 0.1, 0.03, 0.01],
        &sphere_rule(3, 6)?,
        &BulkSettings::default(),
    )?;
    println!(
        "horizon radius {:.6}, limit {:.8} ± {:.1e}",
        study.horizon_radius, study.limit.value, study.limit.error
    );
    println!(
        "{:>8} {:>12} {:>14} {:>14} {:>14}",
        "delta", "level", "bulk", "boundary", "total"
    );
    for r in &study.rows {
        println!(
            "{:>8} {:>12.8} {:>14.10} {:>14.10} {:>14.10}",
            r.delta, r.level, r.bulk.value, r.weighted_boundary, r.total
        );
    }
    println!("monotone approach: {}", study.monotone);
    Ok(())
}
