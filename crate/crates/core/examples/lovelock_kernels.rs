//! Gauss–Bonnet curvatures and Newton tensors of constant-curvature data,
//! against the closed forms `L_q = κ^q n!/(n−2q)!` and `H_r = C(d, r) λ^r`.
//!
//!     cargo run --release --example lovelock_kernels

use gbc_mass::numerics::{binomial, factorial};
use gbc_mass::tensor_algebra::{lovelock_scalar, mean_curvature_r, Matrix, Riemann4};

fn main() -> gbc_mass::Result<()> {
    let kappa = 0.3;
    for n in 2..=8 {
        let r = Riemann4::from_fn(n, |a, b, c, d| {
            let e = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
            kappa * (e(a, c) * e(b, d) - e(a, d) * e(b, c))
        });
        for q in (1..).take_while(|q| 2 * q <= n) {
            let exact = kappa.powi(q as i32) * factorial(n) / factorial(n - 2 * q);
            println!(
                "n={n} q={q}: L_q = {:.12} (closed form {exact:.12})",
                lovelock_scalar(&r, q)?
            );
        }
    }
    let lambda = 1.7;
    let d = 6;
    let k = Matrix::identity(d, d) * lambda;
    for r in 1..=d {
        let exact = binomial(d, r) * lambda.powi(r as i32);
        println!(
            "H_{r} = {:.10} (closed form {exact:.10})",
            mean_curvature_r(&k, r)?
        );
    }
    Ok(())
}
