//! Flux at infinity for the q-Schwarzschild graphs, extrapolated in the radius.
//!
//!     cargo run --release --example surface_mass

use gbc_mass::mass::surface_mass_series;
use gbc_mass::models::ModelSpec;
use gbc_mass::quadrature::sphere_rule;

fn main() -> gbc_mass::Result<()> {
    let radii = [20.0, 40.0, 80.0, 160.0];
    for (n, q, mass, order) in [
        (3, 1, 1.0, 24),
        (4, 1, 0.7, 12),
        (5, 2, 1.0, 8),
        (6, 2, 0.8, 6),
    ] {
        let map = ModelSpec::Schwarzschild {
            n,
            q,
            mass,
            clip: 1e-3,
            excess: 0.0,
            decay: 1.0,
        }
        .build()?;
        let rule = sphere_rule(n, order)?;
        let (values, ex) = surface_mass_series(map.as_ref(), q, &radii, &rule)?;
        println!(
            "n = {n}, q = {q}, m = {mass}: expected m^q = {:.6}",
            mass.powi(q as i32)
        );
        for (r, v) in radii.iter().zip(&values) {
            println!("  r = {r:>5}: {v:.12}");
        }
        println!("  extrapolated {:.9} ± {:.1e}", ex.mass, ex.error);
    }

    // With a mass function that still grows at large r the series converges like r^{-1}.
    let map = ModelSpec::Schwarzschild {
        n: 3,
        q: 1,
        mass: 1.0,
        clip: 1e-3,
        excess: 0.5,
        decay: 1.0,
    }
    .build()?;
    let (values, ex) = surface_mass_series(map.as_ref(), 1, &radii, &sphere_rule(3, 24)?)?;
    println!("growing mass function: {values:.6?}");
    println!(
        "  extrapolated {:.9} ± {:.1e}, fitted exponent {:?}",
        ex.mass, ex.error, ex.exponent
    );
    Ok(())
}
