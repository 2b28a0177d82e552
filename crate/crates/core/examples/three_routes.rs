//! Surface mass against bulk integral plus the weighted boundary term on a
//! model that extends smoothly across its inner boundary.
//!
//!     cargo run --release --example three_routes

use gbc_mass::mass::{mass_report, MassSettings};
use gbc_mass::models::ModelSpec;

fn main() -> gbc_mass::Result<()> {
    let spec = ModelSpec::MassProfile {
        n: 3,
        q: 1,
        mass: 0.5,
        excess: 0.5,
        decay: 1.0,
        truncation: 1.5,
    };
    let map = spec.build()?;
    let report = mass_report(map.as_ref(), 1, &MassSettings::for_dimension(3))?;

    let show = |label: &str, e: Option<gbc_mass::mass::Estimate>| {
        if let Some(e) = e {
            println!("{label:<20} {:>14.10} ± {:.1e}", e.value, e.error);
        }
    };
    show("surface (r → ∞)", Some(report.extrapolated));
    show("bulk", report.bulk);
    show("weighted boundary", report.weighted_boundary);
    show("residual", report.residual_theorem);
    if let Some(e) = report.bulk_decay_exponent {
        println!("bulk density decays like r^-{e:.2}");
    }
    for d in &report.diagnostics {
        println!("note: {d}");
    }
    Ok(())
}
