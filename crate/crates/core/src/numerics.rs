//! Small numerical helpers shared by the kernels and the integrators.

use std::f64::consts::PI;

/// Fixed-order pairwise (cascade) summation.
///
/// The recursion splits at the midpoint, so the result only depends on the
/// order of `values`, never on thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Volume ω_d of the unit sphere S^d ⊂ ℝ^{d+1}, via ω_d = 2π/(d−1)·ω_{d−2}.
pub fn unit_sphere_volume(d: usize) -> f64 {
    match d {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 1.0) * unit_sphere_volume(d - 2),
    }
}

/// ∫_0^π sin^k θ dθ (Wallis recursion).
pub fn sine_power_integral(k: usize) -> f64 {
    match k {
        0 => PI,
        1 => 2.0,
        _ => (k as f64 - 1.0) / k as f64 * sine_power_integral(k - 2),
    }
}

/// The GBC normalisation c_q(n) = (n−2q)! / (2^{q−1} (n−1)! ω_{n−1}).
pub fn gbc_constant(n: usize, q: usize) -> f64 {
    factorial(n - 2 * q) / (2f64.powi(q as i32 - 1) * factorial(n - 1) * unit_sphere_volume(n - 1))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
