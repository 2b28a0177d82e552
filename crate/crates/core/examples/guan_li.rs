//! Minkowski-type inequality for (2q−1)-convex star-shaped hypersurfaces:
//! equality on round spheres, positive margin on ellipsoids.
//!
//!     cargo run --release --example guan_li

use gbc_mass::graph_geometry::StarShaped;
use gbc_mass::mass::guan_li_check;
use gbc_mass::quadrature::sphere_rule;

fn main() -> gbc_mass::Result<()> {
    let rule = sphere_rule(3, 32)?;
    println!("n = 3, q = 1");
    for c in [1.0, 1.1, 1.25, 1.5, 2.0, 3.0] {
        let sigma = StarShaped::ellipsoid(vec![0.0; 3], vec![1.0, 1.0, c])?;
        let g = guan_li_check(&sigma, 1, &rule)?;
        println!(
            "  axes (1, 1, {c:<4}): lhs {:.8}  rhs {:.8}  margin {:+.3e}",
            g.lhs, g.rhs, g.margin
        );
    }

    let rule = sphere_rule(5, 10)?;
    println!("n = 5, q = 2");
    for axes in [
        vec![1.0; 5],
        vec![1.0, 1.0, 1.0, 1.0, 1.3],
        vec![1.0, 1.1, 1.2, 1.3, 1.4],
    ] {
        let sigma = StarShaped::ellipsoid(vec![0.0; 5], axes.clone())?;
        match guan_li_check(&sigma, 2, &rule) {
            Ok(g) => println!("  axes {axes:?}: margin {:+.3e}", g.margin),
            Err(e) => println!("  axes {axes:?}: {e}"),
        }
    }
    Ok(())
}
