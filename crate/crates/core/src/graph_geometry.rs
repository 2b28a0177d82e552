//! Pointwise geometry of a graph `M = {(x, f(x))} ⊂ ℝ^{n+m}`.

use serde::{Deserialize, Serialize};

use crate::error::{GbcError, Result};
use crate::jet::ScalarJet;
use crate::numerics::norm;
use crate::tensor_algebra::{compose, Matrix, Riemann4, Tensor3, Tensor4, Vector};

/// `f = (f^1, …, f^m)` and its derivatives up to third order at one point.
#[derive(Debug, Clone)]
pub struct GraphJet {
    pub components: Vec<ScalarJet>,
}

impl GraphJet {
    pub fn new(components: Vec<ScalarJet>) -> Self {
        Self { components }
    }

    pub fn codim(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, ScalarJet::dim)
    }

    /// `Df` as an `m × n` matrix.
    pub fn jacobian(&self) -> Matrix {
        Matrix::from_fn(self.codim(), self.dim(), |a, i| self.components[a].d1(i))
    }

    pub fn hessian(&self, alpha: usize) -> Matrix {
        let c = &self.components[alpha];
        Matrix::from_fn(self.dim(), self.dim(), |i, j| c.d2(i, j))
    }
}

/// Sign of the behaviour of `f` as `x → Σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryBehavior {
    SmoothExtension,
    GradientBlowup,
}

/// A star-shaped boundary component: the ellipsoid `{u = 1}` with
/// `u(x) = sqrt(Σ (x_i − c_i)² / a_i²)`. A sphere has equal semi-axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarShaped {
    pub center: Vec<f64>,
    pub semi_axes: Vec<f64>,
}

impl StarShaped {
    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Self> {
        let n = center.len();
        Self::ellipsoid(center, vec![radius; n])
    }

    pub fn ellipsoid(center: Vec<f64>, semi_axes: Vec<f64>) -> Result<Self> {
        if center.len() != semi_axes.len() || center.len() < 2 {
            return Err(GbcError::Argument(
                "boundary component dimension mismatch".into(),
            ));
        }
        if semi_axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(GbcError::Argument(format!(
                "semi-axes must be positive, got {semi_axes:?}"
            )));
        }
        Ok(Self { center, semi_axes })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn is_round(&self) -> bool {
        self.semi_axes
            .iter()
            .all(|a| (a - self.semi_axes[0]).abs() <= 1e-15 * a)
    }

    /// The gauge `u` (1-homogeneous about the center, `Σ = {u = 1}`).
    pub fn gauge_jet(&self, x: &[f64]) -> ScalarJet {
        let w: Vec<f64> = self.semi_axes.iter().map(|a| 1.0 / (a * a)).collect();
        ScalarJet::weighted_square_distance(x, &self.center, &w).sqrt()
    }

    pub fn gauge(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .zip(&self.semi_axes)
            .map(|((xi, ci), a)| ((xi - ci) / a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `ρ(θ)`: distance from the center to `Σ` along the unit direction `θ`.
    pub fn radius_along(&self, theta: &[f64]) -> f64 {
        let s: f64 = theta
            .iter()
            .zip(&self.semi_axes)
            .map(|(t, a)| (t / a).powi(2))
            .sum();
        1.0 / s.sqrt()
    }

    pub fn point_along(&self, theta: &[f64]) -> Vec<f64> {
        let rho = self.radius_along(theta);
        self.center
            .iter()
            .zip(theta)
            .map(|(c, t)| c + rho * t)
            .collect()
    }

    /// The level set `{u = t}`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            center: self.center.clone(),
            semi_axes: self.semi_axes.iter().map(|a| a * t).collect(),
        }
    }

    pub fn min_axis(&self) -> f64 {
        self.semi_axes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_axis(&self) -> f64 {
        self.semi_axes.iter().copied().fold(0.0, f64::max)
    }

    /// Radius of the smallest origin-centered ball containing the component.
    pub fn circumradius(&self) -> f64 {
        norm(&self.center) + self.max_axis()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDescriptor {
    pub boundary: Vec<StarShaped>,
    pub behavior: BoundaryBehavior,
}

impl DomainDescriptor {
    pub fn full_space() -> Self {
        Self {
            boundary: Vec::new(),
            behavior: BoundaryBehavior::SmoothExtension,
        }
    }

    pub fn exterior(boundary: Vec<StarShaped>, behavior: BoundaryBehavior) -> Result<Self> {
        for (i, a) in boundary.iter().enumerate() {
            for b in &boundary[i + 1..] {
                let d: f64 = a
                    .center
                    .iter()
                    .zip(&b.center)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d <= a.max_axis() + b.max_axis() {
                    return Err(GbcError::Argument("boundary components may overlap".into()));
                }
            }
        }
        Ok(Self { boundary, behavior })
    }

    pub fn is_full_space(&self) -> bool {
        self.boundary.is_empty()
    }

    /// `x ∈ ℝ^n \ Ω̄`.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.boundary.iter().all(|c| c.gauge(x) > 1.0)
    }

    /// Conservative test that the closed ball `B(x, radius)` avoids `Ω̄`.
    pub fn contains_ball(&self, x: &[f64], radius: f64) -> bool {
        self.boundary
            .iter()
            .all(|c| c.gauge(x) - radius / c.min_axis() > 1.0)
    }

    pub fn circumradius(&self) -> f64 {
        self.boundary
            .iter()
            .map(StarShaped::circumradius)
            .fold(0.0, f64::max)
    }
}

/// A graph map `f: ℝ^n \ Ω → ℝ^m` with analytic derivatives to third order.
///
/// Implementations must be reentrant: integrators evaluate them concurrently.
pub trait GraphMap: Send + Sync {
    fn dim(&self) -> usize;
    fn codim(&self) -> usize;
    /// Analytic jet, without the domain check.
    fn eval(&self, x: &[f64]) -> Result<GraphJet>;
    fn domain(&self) -> &DomainDescriptor;
    /// Declared decay order `τ`.
    fn tau(&self) -> f64;

    /// A level function `u` with every `f^α` constant on the level sets of `u`,
    /// when the model has one.
    fn level_function(&self, _x: &[f64]) -> Option<ScalarJet> {
        None
    }

    fn jet(&self, x: &[f64]) -> Result<GraphJet> {
        if x.len() != self.dim() {
            return Err(GbcError::Argument(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.domain().contains(x) {
            return Err(GbcError::Domain(format!("{x:?} lies in Ω̄")));
        }
        self.eval(x)
    }
}

/// First-order data of the graph at a point.
#[derive(Debug, Clone)]
pub struct PointFrame {
    pub x: Vec<f64>,
    pub jet: GraphJet,
    pub df: Matrix,
    pub g: Matrix,
    pub g_inv: Matrix,
    pub det_g: f64,
    pub u: Matrix,
    pub u_inv: Matrix,
    /// `christoffel.get(k, i, j) = Γ^k_{ij}`.
    pub christoffel: Tensor3,
    /// `dg.get(j, k, l) = ∂_l g_{jk}`.
    pub dg: Tensor3,
    pub tangent_lifts: Vec<Vector>,
}

impl PointFrame {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn codim(&self) -> usize {
        self.df.nrows()
    }

    /// `|Df|²` (Frobenius).
    pub fn gradient_norm_sq(&self) -> f64 {
        self.df.norm_squared()
    }
}

pub fn point_frame(map: &dyn GraphMap, x: &[f64]) -> Result<PointFrame> {
    let jet = map.jet(x)?;
    frame_from_jet(x, jet)
}

pub(crate) fn frame_from_jet(x: &[f64], jet: GraphJet) -> Result<PointFrame> {
    let n = x.len();
    let m = jet.codim();
    let df = jet.jacobian();
    let g = Matrix::identity(n, n) + df.tr_mul(&df);
    let u = Matrix::identity(m, m) + &df * df.transpose();
    let chol = g.clone().cholesky().ok_or_else(|| {
        GbcError::Numerical(format!("induced metric not positive definite at {x:?}"))
    })?;
    let g_inv = chol.inverse();
    let det_g = chol.determinant();
    let u_inv = u
        .clone()
        .cholesky()
        .ok_or_else(|| {
            GbcError::Numerical(format!("normal Gram matrix not positive definite at {x:?}"))
        })?
        .inverse();

    let c = &jet.components;
    let dg = Tensor3::from_fn(n, |j, k, l| {
        c.iter()
            .map(|f| f.d2(j, l) * f.d1(k) + f.d1(j) * f.d2(k, l))
            .sum()
    });
    // w_l,ij = Σ_α f_l f_ij
    let w = Tensor3::from_fn(n, |l, i, j| c.iter().map(|f| f.d1(l) * f.d2(i, j)).sum());
    let christoffel = Tensor3::from_fn(n, |k, i, j| {
        (0..n).map(|l| g_inv[(k, l)] * w.get(l, i, j)).sum()
    });
    let tangent_lifts = (0..m).map(|a| &g_inv * df.row(a).transpose()).collect();

    Ok(PointFrame {
        x: x.to_vec(),
        jet,
        df,
        g,
        g_inv,
        det_g,
        u,
        u_inv,
        christoffel,
        dg,
        tangent_lifts,
    })
}

/// Second-order data: shape operators, Gauss-equation curvature, normal curvature.
#[derive(Debug, Clone)]
pub struct CurvatureFrame {
    pub hessians: Vec<Matrix>,
    /// `A_α = Hess f^α · g^{-1}`, stored lower index first.
    pub shape: Vec<Matrix>,
    /// `inner.get(a, b, c, d) = ⟨B_a^b, B_c^d⟩ = U^{αγ} (A_α)_a^b (A_γ)_c^d`.
    pub inner: Tensor4,
    pub riemann: Riemann4,
    /// `commutators[α][β] = A_α ∘ A_β − A_β ∘ A_α`.
    pub commutators: Vec<Vec<Matrix>>,
}

impl CurvatureFrame {
    /// Largest entry of any commutator; zero iff the normal bundle is flat here.
    pub fn normal_curvature_norm(&self) -> f64 {
        self.commutators
            .iter()
            .flatten()
            .map(|c| c.amax())
            .fold(0.0, f64::max)
    }
}

pub fn curvature_frame(pf: &PointFrame) -> CurvatureFrame {
    let n = pf.dim();
    let m = pf.codim();
    let hessians: Vec<Matrix> = (0..m).map(|a| pf.jet.hessian(a)).collect();
    let shape: Vec<Matrix> = hessians.iter().map(|h| h * &pf.g_inv).collect();
    let inner = Tensor4::from_fn(n, |a, b, c, d| {
        let mut s = 0.0;
        for al in 0..m {
            let x = shape[al][(a, b)];
            if x == 0.0 {
                continue;
            }
            for ga in 0..m {
                s += pf.u_inv[(al, ga)] * x * shape[ga][(c, d)];
            }
        }
        s
    });
    let riemann = Riemann4::from_fn(n, |a, b, c, d| {
        inner.get(a, c, b, d) - inner.get(a, d, b, c)
    });
    let commutators = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| compose(&shape[a], &shape[b]) - compose(&shape[b], &shape[a]))
                .collect()
        })
        .collect();
    CurvatureFrame {
        hessians,
        shape,
        inner,
        riemann,
        commutators,
    }
}

/// Geometry of a level set `{u = u(x)}` at `x`: unit normal `N = Du/|Du|`,
/// an orthonormal tangent frame, and the shape operator `K = Eᵀ Hess(u) E / |Du|`.
///
/// With this orientation round spheres about the center have `K = Id/ρ`.
#[derive(Debug, Clone)]
pub struct LevelSetFrame {
    pub normal: Vec<f64>,
    pub tangent: Matrix,
    pub shape: Matrix,
    pub gradient_norm: f64,
}

pub fn level_set_frame(u: &ScalarJet) -> Result<LevelSetFrame> {
    let n = u.dim();
    let gn = norm(u.gradient());
    if !(gn > 0.0) || !gn.is_finite() {
        return Err(GbcError::Precondition(
            "level function has a critical point".into(),
        ));
    }
    let normal: Vec<f64> = u.gradient().iter().map(|v| v / gn).collect();
    // Householder reflection sending e_k to ∓N; its other columns span N^⊥.
    let k = (0..n)
        .max_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()))
        .unwrap_or(0);
    let mut v = Vector::from_column_slice(&normal);
    v[k] += normal[k].signum();
    let h = Matrix::identity(n, n) - (&v * v.transpose()) * (2.0 / v.norm_squared());
    let cols: Vec<usize> = (0..n).filter(|&j| j != k).collect();
    let tangent = Matrix::from_fn(n, n - 1, |i, a| h[(i, cols[a])]);
    let hess = Matrix::from_fn(n, n, |i, j| u.d2(i, j));
    let shape = tangent.tr_mul(&(&hess * &tangent)) / gn;
    Ok(LevelSetFrame {
        normal,
        tangent,
        shape,
        gradient_norm: gn,
    })
}

fn metric_at(map: &dyn GraphMap, y: &[f64]) -> Result<Matrix> {
    let df = map.eval(y)?.jacobian();
    let n = y.len();
    Ok(Matrix::identity(n, n) + df.tr_mul(&df))
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// `Γ^k_{ij}` from central differences of the metric alone.
fn christoffel_fd(map: &dyn GraphMap, y: &[f64], h: f64) -> Result<Tensor3> {
    let n = y.len();
    let mut dg = Vec::with_capacity(n);
    for l in 0..n {
        let gp = metric_at(map, &shifted(y, &[(l, h)]))?;
        let gm = metric_at(map, &shifted(y, &[(l, -h)]))?;
        dg.push((gp - gm) / (2.0 * h));
    }
    let g_inv = metric_at(map, y)?
        .try_inverse()
        .ok_or_else(|| GbcError::Numerical("singular metric".into()))?;
    Ok(Tensor3::from_fn(n, |k, i, j| {
        0.5 * (0..n)
            .map(|l| g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
            .sum::<f64>()
    }))
}

/// Riemann tensor `R_{ab}^{cd}` from the induced metric by nested central differences.
/// Independent of the Gauss equation; intended as a test oracle.
pub fn finite_difference_riemann(map: &dyn GraphMap, x: &[f64], h: f64) -> Result<Riemann4> {
    let n = map.dim();
    if !(h > 0.0) {
        return Err(GbcError::Argument("step must be positive".into()));
    }
    if !map.domain().contains_ball(x, 2.0 * h * (n as f64).sqrt()) {
        return Err(GbcError::Domain(format!(
            "difference stencil of {x:?} leaves the domain"
        )));
    }
    let gamma = christoffel_fd(map, x, h)?;
    let mut dgamma = Vec::with_capacity(n);
    for mu in 0..n {
        let p = christoffel_fd(map, &shifted(x, &[(mu, h)]), h)?;
        let m = christoffel_fd(map, &shifted(x, &[(mu, -h)]), h)?;
        dgamma.push(Tensor3::from_fn(n, |k, i, j| {
            (p.get(k, i, j) - m.get(k, i, j)) / (2.0 * h)
        }));
    }
    // R^ρ_{σμν} = ∂_μ Γ^ρ_{νσ} − ∂_ν Γ^ρ_{μσ} + Γ^ρ_{μλ} Γ^λ_{νσ} − Γ^ρ_{νλ} Γ^λ_{μσ}
    let up = Tensor4::from_fn(n, |r, s, mu, nu| {
        let mut v = dgamma[mu].get(r, nu, s) - dgamma[nu].get(r, mu, s);
        for l in 0..n {
            v += gamma.get(r, mu, l) * gamma.get(l, nu, s)
                - gamma.get(r, nu, l) * gamma.get(l, mu, s);
        }
        v
    });
    let g = metric_at(map, x)?;
    let lowered = Tensor4::from_fn(n, |r, s, mu, nu| {
        (0..n).map(|a| g[(r, a)] * up.get(a, s, mu, nu)).sum()
    });
    let g_inv = g
        .try_inverse()
        .ok_or_else(|| GbcError::Numerical("singular metric".into()))?;
    Ok(Riemann4::from_covariant(&lowered, &g_inv))
}

/// Residuals of the first-order identities at one point.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct FirstOrderResiduals {
    /// `g_{jk,l}` against central differences of the metric.
    pub metric_derivative: f64,
    /// `g^{ij} f^α_j = U^{αβ} f^β_i`.
    pub tangent_lift: f64,
    /// `Γ^k_{ij} = g^{kl} f_l f_{ij}` against the Levi-Civita formula.
    pub christoffel: f64,
    /// `det g = det U`, relative.
    pub determinant: f64,
    /// symmetry of `D²f` and `D³f`.
    pub jet_symmetry: f64,
}

pub fn first_order_residuals(
    map: &dyn GraphMap,
    pf: &PointFrame,
    h: f64,
) -> Result<FirstOrderResiduals> {
    let n = pf.dim();
    let m = pf.codim();
    let x = &pf.x;
    let mut metric_derivative: f64 = 0.0;
    if map.domain().contains_ball(x, h) {
        for l in 0..n {
            let gp = metric_at(map, &shifted(x, &[(l, h)]))?;
            let gm = metric_at(map, &shifted(x, &[(l, -h)]))?;
            for j in 0..n {
                for k in 0..n {
                    let fd = (gp[(j, k)] - gm[(j, k)]) / (2.0 * h);
                    metric_derivative = metric_derivative.max((fd - pf.dg.get(j, k, l)).abs());
                }
            }
        }
    } else {
        return Err(GbcError::Domain(format!(
            "difference stencil of {x:?} leaves the domain"
        )));
    }

    let mut tangent_lift: f64 = 0.0;
    for a in 0..m {
        for i in 0..n {
            let lhs = pf.tangent_lifts[a][i];
            let rhs: f64 = (0..m).map(|b| pf.u_inv[(a, b)] * pf.df[(b, i)]).sum();
            tangent_lift = tangent_lift.max((lhs - rhs).abs());
        }
    }

    let mut christoffel: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let lc = 0.5
                    * (0..n)
                        .map(|l| {
                            pf.g_inv[(k, l)]
                                * (pf.dg.get(j, l, i) + pf.dg.get(i, l, j) - pf.dg.get(i, j, l))
                        })
                        .sum::<f64>();
                christoffel = christoffel.max((lc - pf.christoffel.get(k, i, j)).abs());
            }
        }
    }

    let determinant = (pf.det_g - pf.u.determinant()).abs() / pf.det_g;

    let mut jet_symmetry: f64 = 0.0;
    for c in &pf.jet.components {
        for i in 0..n {
            for j in 0..n {
                jet_symmetry = jet_symmetry.max((c.d2(i, j) - c.d2(j, i)).abs());
                for k in 0..n {
                    jet_symmetry = jet_symmetry
                        .max((c.d3(i, j, k) - c.d3(j, i, k)).abs())
                        .max((c.d3(i, j, k) - c.d3(k, j, i)).abs());
                }
            }
        }
    }
    Ok(FirstOrderResiduals {
        metric_derivative,
        tangent_lift,
        christoffel,
        determinant,
        jet_symmetry,
    })
}

/// Largest deviation of the analytic jet from central differences of lower orders.
pub fn jet_consistency(map: &dyn GraphMap, x: &[f64], h: f64) -> Result<f64> {
    let n = map.dim();
    let j0 = map.eval(x)?;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let p = map.eval(&shifted(x, &[(k, h)]))?;
        let q = map.eval(&shifted(x, &[(k, -h)]))?;
        for (a, c) in j0.components.iter().enumerate() {
            let (cp, cm) = (&p.components[a], &q.components[a]);
            worst = worst.max(((cp.value - cm.value) / (2.0 * h) - c.d1(k)).abs());
            for i in 0..n {
                worst = worst.max(((cp.d1(i) - cm.d1(i)) / (2.0 * h) - c.d2(i, k)).abs());
                for j in 0..n {
                    worst =
                        worst.max(((cp.d2(i, j) - cm.d2(i, j)) / (2.0 * h) - c.d3(i, j, k)).abs());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `f^α = ½ xᵀ A_α x + c_α x_0³`, full space.
    struct Polynomial {
        quad: Vec<Matrix>,
        cubic: Vec<f64>,
        domain: DomainDescriptor,
    }

    impl Polynomial {
        fn new(quad: Vec<Matrix>, cubic: Vec<f64>) -> Self {
            Self {
                quad,
                cubic,
                domain: DomainDescriptor::full_space(),
            }
        }
    }

    impl GraphMap for Polynomial {
        fn dim(&self) -> usize {
            self.quad[0].nrows()
        }
        fn codim(&self) -> usize {
            self.quad.len()
        }
        fn eval(&self, x: &[f64]) -> Result<GraphJet> {
            let n = x.len();
            let comps = self
                .quad
                .iter()
                .zip(&self.cubic)
                .map(|(a, &c)| {
                    let mut f = ScalarJet::constant(n, 0.0);
                    for i in 0..n {
                        for j in 0..n {
                            let xij = ScalarJet::coordinate(x, i).mul(&ScalarJet::coordinate(x, j));
                            f = f.plus(&xij.scale(0.5 * a[(i, j)]));
                        }
                    }
                    let x0 = ScalarJet::coordinate(x, 0);
                    f.plus(&x0.mul(&x0).mul(&x0).scale(c))
                })
                .collect();
            Ok(GraphJet::new(comps))
        }
        fn domain(&self) -> &DomainDescriptor {
            &self.domain
        }
        fn tau(&self) -> f64 {
            -1.0
        }
    }

    fn sym(n: usize, seed: &[f64]) -> Matrix {
        let a = Matrix::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()]);
        (&a + a.transpose()) * 0.5
    }

    fn sample_map() -> Polynomial {
        let a = sym(4, &[0.3, -0.7, 0.2, 0.9, -0.4, 0.5, 0.1]);
        let b = sym(4, &[-0.2, 0.6, 0.8, -0.5, 0.3]);
        Polynomial::new(vec![a, b], vec![0.2, -0.1])
    }

    #[test]
    fn riemann_at_critical_point_is_gauss_product() {
        let map = sample_map();
        let pf = point_frame(&map, &[0.0; 4]).unwrap();
        let cf = curvature_frame(&pf);
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let expect: f64 = map
                            .quad
                            .iter()
                            .map(|m| m[(a, c)] * m[(b, d)] - m[(a, d)] * m[(b, c)])
                            .sum();
                        worst = worst.max((cf.riemann.get(a, b, c, d) - expect).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-14, "{worst}");
        assert!((pf.det_g - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_graph_has_no_curvature() {
        let map = Polynomial::new(vec![Matrix::zeros(3, 3)], vec![0.0]);
        let pf = point_frame(&map, &[0.4, -1.0, 2.0]).unwrap();
        let cf = curvature_frame(&pf);
        assert_eq!(cf.riemann.as_tensor().max_abs(), 0.0);
        assert_eq!(pf.g, Matrix::identity(3, 3));
    }

    #[test]
    fn sphere_level_set_frame() {
        let x = [0.6, -0.8, 1.2];
        let u = ScalarJet::weighted_square_distance(&x, &[0.0; 3], &[1.0; 3]);
        let ls = level_set_frame(&u).unwrap();
        let rho = norm(&x);
        assert!((&ls.shape - Matrix::identity(2, 2) / rho).abs().max() < 1e-14);
        let e = &ls.tangent;
        assert!((e.tr_mul(e) - Matrix::identity(2, 2)).abs().max() < 1e-14);
        let nv = Vector::from_column_slice(&ls.normal);
        assert!(e.tr_mul(&nv).abs().max() < 1e-14);
        assert!((ls.gradient_norm - 2.0 * rho).abs() < 1e-14);
    }

    #[test]
    fn critical_level_function_is_rejected() {
        let u = ScalarJet::weighted_square_distance(&[0.0; 3], &[0.0; 3], &[1.0; 3]);
        assert!(matches!(
            level_set_frame(&u),
            Err(GbcError::Precondition(_))
        ));
    }

    #[test]
    fn domain_checks() {
        let sigma = StarShaped::sphere(vec![0.0; 3], 2.0).unwrap();
        let dom =
            DomainDescriptor::exterior(vec![sigma.clone()], BoundaryBehavior::SmoothExtension)
                .unwrap();
        assert!(!dom.contains(&[1.0, 0.0, 0.0]));
        assert!(dom.contains(&[2.5, 0.0, 0.0]));
        assert!(!dom.contains_ball(&[2.5, 0.0, 0.0], 1.0));
        let on = sigma.point_along(&[0.0, 0.6, 0.8]);
        assert!((sigma.gauge(&on) - 1.0).abs() < 1e-14);
        let overlap = vec![
            sigma.clone(),
            StarShaped::sphere(vec![1.0, 0.0, 0.0], 2.0).unwrap(),
        ];
        assert!(DomainDescriptor::exterior(overlap, BoundaryBehavior::SmoothExtension).is_err());

        let map = sample_map();
        assert!(matches!(map.jet(&[0.0; 3]), Err(GbcError::Argument(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gauss_equation_matches_metric_differences(x in prop::collection::vec(-1.0f64..1.0, 4)) {
            let map = sample_map();
            let pf = point_frame(&map, &x).unwrap();
            let cf = curvature_frame(&pf);
            let coarse = finite_difference_riemann(&map, &x, 2e-3).unwrap();
            let fine = finite_difference_riemann(&map, &x, 1e-3).unwrap();
            let fd = Riemann4::from_fn(4, |a, b, c, d| (4.0 * fine.get(a, b, c, d) - coarse.get(a, b, c, d)) / 3.0);
            prop_assert!(fd.max_abs_diff(&cf.riemann) < 1e-6);
            prop_assert!(cf.riemann.symmetry_residual(&pf.g) < 1e-12);
        }

        #[test]
        fn first_order_identities(x in prop::collection::vec(-2.0f64..2.0, 4)) {
            let map = sample_map();
            let pf = point_frame(&map, &x).unwrap();
            let res = first_order_residuals(&map, &pf, 1e-5).unwrap();
            prop_assert!(res.metric_derivative < 1e-6 * (1.0 + pf.dg.max_abs()));
            prop_assert!(res.tangent_lift < 1e-12);
            prop_assert!(res.christoffel < 1e-12);
            prop_assert!(res.determinant < 1e-12);
            prop_assert!(res.jet_symmetry == 0.0);
            let g = Matrix::identity(4, 4) + pf.df.tr_mul(&pf.df);
            prop_assert!((g - &pf.g).abs().max() < 1e-14);
            prop_assert!(jet_consistency(&map, &x, 1e-4).unwrap() < 1e-6);
        }
    }
}
