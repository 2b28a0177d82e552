//! A user-defined graph: implement `GraphMap` with analytic jets and every
//! routine in the crate applies to it.
//!
//!     cargo run --release --example custom_model

use gbc_mass::graph_geometry::{DomainDescriptor, GraphJet, GraphMap};
use gbc_mass::jet::ScalarJet;
use gbc_mass::mass::{bulk_mass, surface_mass_series, BulkSettings};
use gbc_mass::models::sampled_decay_order;
use gbc_mass::quadrature::sphere_rule;

/// `f(x) = a (1 + |x|²)^{-1/2} + b x_1 (1 + |x|²)^{-1}` on all of ℝ^3.
struct Dipole {
    a: f64,
    b: f64,
    domain: DomainDescriptor,
}

impl GraphMap for Dipole {
    fn dim(&self) -> usize {
        3
    }
    fn codim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64]) -> gbc_mass::Result<GraphJet> {
        let s = ScalarJet::weighted_square_distance(x, &[0.0; 3], &[1.0; 3]);
        // t ↦ (1 + t)^{-1/2} and (1 + t)^{-1} with three derivatives.
        let p = |e: f64, t: f64| {
            let u = 1.0 + t;
            [
                u.powf(-e),
                -e * u.powf(-e - 1.0),
                e * (e + 1.0) * u.powf(-e - 2.0),
                -e * (e + 1.0) * (e + 2.0) * u.powf(-e - 3.0),
            ]
        };
        let mono = s.compose(p(0.5, s.value)).scale(self.a);
        let dip = ScalarJet::coordinate(x, 0)
            .mul(&s.compose(p(1.0, s.value)))
            .scale(self.b);
        Ok(GraphJet::new(vec![mono.plus(&dip)]))
    }
    fn domain(&self) -> &DomainDescriptor {
        &self.domain
    }
    fn tau(&self) -> f64 {
        1.0
    }
}

fn main() -> gbc_mass::Result<()> {
    let map = Dipole {
        a: 0.8,
        b: 0.5,
        domain: DomainDescriptor::full_space(),
    };
    let rule = sphere_rule(3, 16)?;
    let dirs = rule.nodes.clone();
    println!(
        "sampled decay order {:.3}",
        sampled_decay_order(&map, &[50.0, 100.0, 200.0, 400.0], &dirs)?
    );
    let (values, ex) = surface_mass_series(&map, 1, &[20.0, 40.0, 80.0, 160.0], &rule)?;
    println!("surface values {values:.8?}");
    println!("extrapolated {:.8} ± {:.1e}", ex.mass, ex.error);
    let bulk = bulk_mass(&map, 1, &sphere_rule(3, 8)?, &BulkSettings::default())?;
    println!("bulk {:.8} ± {:.1e}", bulk.value, bulk.estimate().error);
    Ok(())
}
