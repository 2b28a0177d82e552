//! Gauss rules on [-1, 1] and tensor-product rules on round spheres.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{GbcError, Result};
use crate::numerics::sine_power_integral;

/// Nodes and weights for `∫_{-1}^{1} h(t) w(t) dt`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Map onto `[a, b]` (for the unweighted rule).
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(t, w)| (mid + half * t, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on_interval(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

pub fn gauss_legendre(points: usize) -> Result<GaussRule> {
    gauss_jacobi_symmetric(points, 0.0)
}

/// Gauss rule for the weight `(1 − t²)^alpha`, with `2·alpha` a non-negative integer.
pub fn gauss_jacobi_symmetric(points: usize, alpha: f64) -> Result<GaussRule> {
    if points == 0 {
        return Err(GbcError::Argument(
            "quadrature needs at least one node".into(),
        ));
    }
    let k2 = 2.0 * alpha;
    if alpha < 0.0 || (k2 - k2.round()).abs() > 1e-12 {
        return Err(GbcError::Argument(format!(
            "unsupported Jacobi exponent {alpha}"
        )));
    }
    let mu0 = sine_power_integral(k2.round() as usize + 1);
    // monic three-term recurrence P_{k+1} = t P_k − b_k P_{k−1}
    let b = |k: usize| {
        let k = k as f64;
        k * (k + k2) / ((2.0 * k + k2 + 1.0) * (2.0 * k + k2 - 1.0))
    };
    let jac = DMatrix::from_fn(points, points, |i, j| {
        if i.abs_diff(j) == 1 {
            b(i.max(j)).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    nodes.sort_by(f64::total_cmp);

    let mut weights = Vec::with_capacity(points);
    for t in nodes.iter_mut() {
        for _ in 0..3 {
            let (mut p0, mut p1, mut d0, mut d1) = (0.0, 1.0, 0.0, 0.0);
            for k in 0..points {
                let bk = if k == 0 { 0.0 } else { b(k) };
                let p2 = *t * p1 - bk * p0;
                let d2 = p1 + *t * d1 - bk * d0;
                (p0, p1, d0, d1) = (p1, p2, d1, d2);
            }
            if d1 != 0.0 {
                *t -= p1 / d1;
            }
        }
        // Christoffel number from the orthonormal polynomials
        let (mut q0, mut q1, mut sum) = (0.0, 1.0, 1.0);
        for k in 1..points {
            let bprev = if k == 1 { 0.0 } else { b(k - 1) };
            let q2 = (*t * q1 - bprev.sqrt() * q0) / b(k).sqrt();
            (q0, q1) = (q1, q2);
            sum += q1 * q1;
        }
        weights.push(mu0 / sum);
    }
    Ok(GaussRule { nodes, weights })
}

/// Cubature on the unit sphere `S^{n−1} ⊂ ℝ^n`, exact for polynomials of degree `< 2·order`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub ambient_dim: usize,
    pub order: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        crate::numerics::pairwise_sum(&self.weights)
    }
}

pub fn sphere_rule(n: usize, order: usize) -> Result<SphereRule> {
    if n < 2 {
        return Err(GbcError::Argument(format!(
            "sphere rule needs n ≥ 2, got {n}"
        )));
    }
    if order == 0 {
        return Err(GbcError::Argument(
            "sphere rule order must be positive".into(),
        ));
    }
    let (nodes, weights) = sphere_nodes(n - 1, order)?;
    Ok(SphereRule {
        ambient_dim: n,
        order,
        nodes,
        weights,
    })
}

fn sphere_nodes(d: usize, order: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if d == 1 {
        let m = 2 * order;
        let w = std::f64::consts::TAU / m as f64;
        let nodes = (0..m)
            .map(|j| {
                let phi = std::f64::consts::TAU * (j as f64 + 0.5) / m as f64;
                vec![phi.cos(), phi.sin()]
            })
            .collect();
        return Ok((nodes, vec![w; m]));
    }
    let polar = gauss_jacobi_symmetric(order, 0.5 * (d as f64 - 2.0))?;
    let (sub_nodes, sub_weights) = sphere_nodes(d - 1, order)?;
    let mut nodes = Vec::with_capacity(order * sub_nodes.len());
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (t, wt) in polar.nodes.iter().zip(&polar.weights) {
        let s = (1.0 - t * t).sqrt();
        for (y, wy) in sub_nodes.iter().zip(&sub_weights) {
            let mut x = Vec::with_capacity(d + 1);
            x.push(*t);
            x.extend(y.iter().map(|v| s * v));
            nodes.push(x);
            weights.push(wt * wy);
        }
    }
    Ok((nodes, weights))
}
