//! Mass integrals: surface flux at infinity, bulk curvature integral, boundary
//! terms, ADM mass, and the Penrose and Guan–Li checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GbcError, Result};
use crate::gbc::{flux_at, GbcFrame};
use crate::graph_geometry::{
    curvature_frame, frame_from_jet, level_set_frame, point_frame, BoundaryBehavior, GraphMap,
    StarShaped,
};
use crate::numerics::{dot, factorial, gbc_constant, pairwise_sum, unit_sphere_volume};
use crate::quadrature::{gauss_legendre, sphere_rule, GaussRule, SphereRule};
use crate::tensor_algebra::{lovelock_scalar, mean_curvature_r};

/// A computed number with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

fn check_rule(map: &dyn GraphMap, rule: &SphereRule) -> Result<()> {
    if rule.ambient_dim != map.dim() {
        return Err(GbcError::Argument(format!(
            "quadrature rule is for n = {}, model has n = {}",
            rule.ambient_dim,
            map.dim()
        )));
    }
    Ok(())
}

/// Weighted sum over the rule with a fixed-order reduction.
fn sphere_sum(rule: &SphereRule, f: impl Fn(&[f64]) -> Result<f64> + Sync) -> Result<f64> {
    let vals = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(th, w)| f(th).map(|v| v * w))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&vals))
}

/// `c_q(n) ∮_{S_r} X_(q)·ν dS_r`.
pub fn surface_mass(map: &dyn GraphMap, q: usize, r: f64, rule: &SphereRule) -> Result<f64> {
    check_rule(map, rule)?;
    let n = map.dim();
    if r <= map.domain().circumradius() {
        return Err(GbcError::Domain(format!("sphere of radius {r} meets Ω")));
    }
    let flux = sphere_sum(rule, |th| {
        let x: Vec<f64> = th.iter().map(|t| r * t).collect();
        Ok(dot(&flux_at(map, &x, q)?, th))
    })?;
    Ok(gbc_constant(n, q) * flux * r.powi(n as i32 - 1))
}

/// ADM surface integrand `(1/(2(n−1)ω_{n−1})) ∮ (g_{ij,i} − g_{ii,j}) ν^j dS_r`.
pub fn adm_surface(map: &dyn GraphMap, r: f64, rule: &SphereRule) -> Result<f64> {
    check_rule(map, rule)?;
    let n = map.dim();
    if r <= map.domain().circumradius() {
        return Err(GbcError::Domain(format!("sphere of radius {r} meets Ω")));
    }
    let flux = sphere_sum(rule, |th| {
        let x: Vec<f64> = th.iter().map(|t| r * t).collect();
        let pf = point_frame(map, &x)?;
        let mut s = 0.0;
        for j in 0..n {
            let div: f64 = (0..n)
                .map(|i| pf.dg.get(i, j, i) - pf.dg.get(i, i, j))
                .sum();
            s += div * th[j];
        }
        Ok(s)
    })?;
    Ok(flux * r.powi(n as i32 - 1) / (2.0 * (n as f64 - 1.0) * unit_sphere_volume(n - 1)))
}

/// Power-law extrapolation of a sequence of surface values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub mass: f64,
    /// Fitted `s` in `mass + b r^{−s}`; absent when the series is constant.
    pub exponent: Option<f64>,
    pub error: f64,
    /// Set when the series was non-monotone and the raw tail value was returned.
    pub flagged: bool,
}

impl Extrapolation {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.mass, self.error)
    }
}

/// Least-squares `(m, b)` for a fixed exponent, with the rms residual.
fn fit_fixed_exponent(samples: &[(f64, f64)], s: f64) -> (f64, f64, f64) {
    let k = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(r, y) in samples {
        let x = r.powf(-s);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = k * sxx - sx * sx;
    let b = (k * sxy - sx * sy) / det;
    let m = (sy - b * sx) / k;
    let rss: f64 = samples
        .iter()
        .map(|&(r, y)| (y - m - b * r.powf(-s)).powi(2))
        .sum();
    (m, b, (rss / k).sqrt())
}

fn fit_power_law(samples: &[(f64, f64)]) -> (f64, f64, f64) {
    let objective = |ls: f64| fit_fixed_exponent(samples, ls.exp()).2;
    // coarse scan in log s, then golden-section refinement
    let (lo, hi) = (0.02f64.ln(), 12f64.ln());
    let steps = 240;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let ls = lo + (hi - lo) * i as f64 / steps as f64;
        let v = objective(ls);
        if v < best.1 {
            best = (ls, v);
        }
    }
    let h = (hi - lo) / steps as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..120 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = objective(d);
        }
    }
    let s = (0.5 * (a + b)).exp();
    let (m, _, rms) = fit_fixed_exponent(samples, s);
    (m, s, rms)
}

/// Fit `mass(r) = m + b r^{−s}` and return `m`.
pub fn extrapolate_mass(samples: &[(f64, f64)]) -> Result<Extrapolation> {
    if samples.len() < 3 {
        return Err(GbcError::Argument(
            "extrapolation needs at least three radii".into(),
        ));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) || samples.iter().any(|s| !(s.0 > 0.0)) {
        return Err(GbcError::Argument(
            "radii must be positive and increasing".into(),
        ));
    }
    if samples.iter().any(|s| !s.1.is_finite()) {
        return Err(GbcError::Numerical("non-finite surface value".into()));
    }
    let last = samples[samples.len() - 1].1;
    let scale = samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    let spread = samples
        .iter()
        .map(|s| (s.1 - last).abs())
        .fold(0.0, f64::max);
    if spread <= 1e-13 * (1.0 + scale) {
        return Ok(Extrapolation {
            mass: last,
            exponent: None,
            error: spread,
            flagged: false,
        });
    }
    let diffs: Vec<f64> = samples.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let monotone = diffs.iter().all(|d| *d >= 0.0) || diffs.iter().all(|d| *d <= 0.0);
    // differences at the noise level of the values carry no trend
    let noise = 1e-11 * (1.0 + scale);
    if !monotone && spread > noise * 10.0 {
        return Ok(Extrapolation {
            mass: last,
            exponent: None,
            error: spread,
            flagged: true,
        });
    }
    let (m, s, rms) = fit_power_law(samples);
    let drop = if samples.len() > 3 {
        fit_power_law(&samples[1..]).0
    } else {
        last
    };
    let error = rms.max((m - drop).abs()).max(noise);
    Ok(Extrapolation {
        mass: m,
        exponent: Some(s),
        error,
        flagged: false,
    })
}

/// Surface values at each radius plus the extrapolated limit.
pub fn surface_mass_series(
    map: &dyn GraphMap,
    q: usize,
    radii: &[f64],
    rule: &SphereRule,
) -> Result<(Vec<f64>, Extrapolation)> {
    let values = radii
        .iter()
        .map(|&r| surface_mass(map, q, r, rule))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<(f64, f64)> = radii.iter().copied().zip(values.iter().copied()).collect();
    Ok((values, extrapolate_mass(&samples)?))
}

pub fn adm_mass(
    map: &dyn GraphMap,
    radii: &[f64],
    rule: &SphereRule,
) -> Result<(Vec<f64>, Extrapolation)> {
    let values = radii
        .iter()
        .map(|&r| adm_surface(map, r, rule))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<(f64, f64)> = radii.iter().copied().zip(values.iter().copied()).collect();
    Ok((values, extrapolate_mass(&samples)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BulkSettings {
    /// Outer radius of the quadrature region; beyond it a fitted tail is added.
    pub r_max: f64,
    /// Gauss–Legendre points per radial panel.
    pub radial_points: usize,
    /// Width of the first radial panel relative to `max(ρ, 1)`.
    pub first_panel: f64,
}

impl Default for BulkSettings {
    fn default() -> Self {
        Self {
            r_max: 1e4,
            radial_points: 16,
            first_panel: 1.0 / 32.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkResult {
    /// Quadrature over the truncated region plus the tail.
    pub value: f64,
    pub quadrature_error: f64,
    pub tail: f64,
    pub tail_error: f64,
    /// Fitted decay exponent of the integrand density, `|density| ~ r^{−β}`.
    pub decay_exponent: Option<f64>,
}

impl BulkResult {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.quadrature_error + self.tail_error)
    }
}

/// `c_q(n) · div_e X_(q) = ½ c_q(n) (L_(q) + commutator term)` at `x`.
fn bulk_density(map: &dyn GraphMap, x: &[f64], q: usize) -> Result<f64> {
    let pf = frame_from_jet(x, map.eval(x)?)?;
    let cf = curvature_frame(&pf);
    let gf = GbcFrame::new(&pf, &cf, q)?;
    Ok(gbc_constant(x.len(), q) * gf.divergence)
}

fn panel_edges(start: f64, end: f64, first: f64) -> Vec<f64> {
    let mut edges = vec![start];
    let mut k = 1;
    loop {
        let e = start + first * (2f64.powi(k) - 1.0);
        if e >= end * (1.0 - 1e-12) {
            edges.push(end);
            return edges;
        }
        edges.push(e);
        k += 1;
    }
}

fn bulk_region(
    map: &dyn GraphMap,
    q: usize,
    rule: &SphereRule,
    radial: &GaussRule,
    inner: Option<&StarShaped>,
    settings: &BulkSettings,
) -> Result<f64> {
    let n = map.dim();
    let rays = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(th, w)| {
            let start = inner.map_or(0.0, |s| s.radius_along(th));
            let first = settings.first_panel * start.max(1.0);
            let edges = panel_edges(start, settings.r_max, first);
            let mut vals = Vec::with_capacity(edges.len() * radial.nodes.len());
            for pair in edges.windows(2) {
                for (s, ws) in radial.on_interval(pair[0], pair[1]) {
                    let x: Vec<f64> = th.iter().map(|t| s * t).collect();
                    vals.push(ws * s.powi(n as i32 - 1) * bulk_density(map, &x, q)?);
                }
            }
            Ok(w * pairwise_sum(&vals))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&rays))
}

fn shell(map: &dyn GraphMap, q: usize, rule: &SphereRule, s: f64) -> Result<f64> {
    let n = map.dim();
    let v = sphere_sum(rule, |th| {
        let x: Vec<f64> = th.iter().map(|t| s * t).collect();
        bulk_density(map, &x, q)
    })?;
    Ok(v * s.powi(n as i32 - 1))
}

/// `½ c_q(n) ∫ (L_(q) + (2q−1)! ⟨[T, A] e^⊤, e^⊤⟩) dV` over the exterior of `inner`
/// (the whole space when `None`), integrated along rays from the origin.
pub fn bulk_mass_outside(
    map: &dyn GraphMap,
    q: usize,
    rule: &SphereRule,
    inner: Option<&StarShaped>,
    settings: &BulkSettings,
) -> Result<BulkResult> {
    check_rule(map, rule)?;
    if let Some(s) = inner {
        if crate::numerics::norm(&s.center) > 1e-12 {
            return Err(GbcError::Argument(
                "bulk integration needs the boundary centred at the origin".into(),
            ));
        }
        if s.circumradius() * 4.0 >= settings.r_max {
            return Err(GbcError::Argument(
                "r_max too small for the boundary".into(),
            ));
        }
    }
    let radial = gauss_legendre(settings.radial_points)?;
    let value = bulk_region(map, q, rule, &radial, inner, settings)?;
    let coarse_radial = gauss_legendre((settings.radial_points / 2).max(2) + 2)?;
    let v_r = bulk_region(map, q, rule, &coarse_radial, inner, settings)?;
    let coarse_rule = sphere_rule(map.dim(), (rule.order / 2).max(1))?;
    let v_a = bulk_region(map, q, &coarse_rule, &radial, inner, settings)?;
    let quadrature_error = (value - v_r).abs() + (value - v_a).abs();

    let r = settings.r_max;
    let shells = [
        shell(map, q, rule, r / 4.0)?,
        shell(map, q, rule, r / 2.0)?,
        shell(map, q, rule, r)?,
    ];
    // Below this the shells are roundoff (e.g. vacuum models with L = 0).
    let tiny = 1e-12 * (1.0 + value.abs());
    let (tail, tail_error, decay_exponent) = if shells.iter().all(|v| v.abs() * r <= tiny) {
        (0.0, shells[2].abs() * r, None)
    } else {
        if shells[0] * shells[1] <= 0.0 || shells[1] * shells[2] <= 0.0 {
            return Err(GbcError::Numerical(format!(
                "integrand changes sign in the far field: {shells:?}"
            )));
        }
        let gamma = (shells[1] / shells[2]).ln() / 2f64.ln();
        let gamma_in = (shells[0] / shells[1]).ln() / 2f64.ln();
        let beta = gamma + map.dim() as f64 - 1.0;
        if gamma <= 1.05 {
            return Err(GbcError::NonIntegrable(format!(
                "density decays like r^-{beta:.3}, not faster than r^-{}",
                map.dim()
            )));
        }
        let t = shells[2] * r / (gamma - 1.0);
        let t_in = shells[2] * r / (gamma_in - 1.0).max(0.05);
        (t, (t - t_in).abs() + 1e-3 * t.abs(), Some(beta))
    };
    Ok(BulkResult {
        value: value + tail,
        quadrature_error,
        tail,
        tail_error,
        decay_exponent,
    })
}

/// Bulk integral over the model's own domain.
pub fn bulk_mass(
    map: &dyn GraphMap,
    q: usize,
    rule: &SphereRule,
    settings: &BulkSettings,
) -> Result<BulkResult> {
    let boundary = &map.domain().boundary;
    if boundary.len() > 1 {
        return Err(GbcError::Argument(
            "bulk integration supports at most one boundary component".into(),
        ));
    }
    bulk_mass_outside(map, q, rule, boundary.first(), settings)
}

/// `∮_Σ w H_(2q−1) dΣ` and `|Σ|` over a star-shaped component; `w` is
/// `(|Df|²/(1+|Df|²))^q` when `weight_map` is given and 1 otherwise.
fn boundary_integrals(
    sigma: &StarShaped,
    q: usize,
    weight_map: Option<&dyn GraphMap>,
    rule: &SphereRule,
) -> Result<(f64, f64)> {
    let n = sigma.dim();
    if rule.ambient_dim != n {
        return Err(GbcError::Argument(
            "quadrature rule dimension mismatch".into(),
        ));
    }
    if q == 0 || 2 * q > n {
        return Err(GbcError::Argument(format!(
            "q = {q} out of range for n = {n}"
        )));
    }
    let parts = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(th, w)| {
            let x = sigma.point_along(th);
            let u = sigma.gauge_jet(&x);
            let level = level_set_frame(&u)?;
            let rho = sigma.radius_along(th);
            let jac = rho.powi(n as i32 - 1) / dot(th, &level.normal);
            let h = mean_curvature_r(&level.shape, 2 * q - 1)?;
            let weight = match weight_map {
                Some(map) => {
                    let d2 = map.eval(&x)?.jacobian().norm_squared();
                    (d2 / (1.0 + d2)).powi(q as i32)
                }
                None => 1.0,
            };
            Ok((w * jac * weight * h, w * jac))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (hs, areas): (Vec<f64>, Vec<f64>) = parts.into_iter().unzip();
    Ok((pairwise_sum(&hs), pairwise_sum(&areas)))
}

pub fn area(sigma: &StarShaped, rule: &SphereRule) -> Result<f64> {
    Ok(boundary_integrals(sigma, 1, None, rule)?.1)
}

/// `½ (2q−1)! c_q(n) ∮_Σ w H_(2q−1) dΣ` on one surface.
pub fn boundary_term(
    sigma: &StarShaped,
    q: usize,
    weight_map: Option<&dyn GraphMap>,
    rule: &SphereRule,
) -> Result<f64> {
    let n = sigma.dim();
    let (h, _) = boundary_integrals(sigma, q, weight_map, rule)?;
    Ok(0.5 * factorial(2 * q - 1) * gbc_constant(n, q) * h)
}

/// Boundary term over the model's `Σ`: weighted for smooth extensions,
/// unweighted for gradient blowup.
pub fn boundary_mass(
    map: &dyn GraphMap,
    q: usize,
    weighted: bool,
    rule: &SphereRule,
) -> Result<f64> {
    let domain = map.domain();
    if domain.is_full_space() {
        return Err(GbcError::Precondition("the model has no boundary".into()));
    }
    match (weighted, domain.behavior) {
        (true, BoundaryBehavior::GradientBlowup) => {
            return Err(GbcError::Precondition(
                "weighted boundary term needs a smooth extension to Σ".into(),
            ))
        }
        (false, BoundaryBehavior::SmoothExtension) => {
            return Err(GbcError::Precondition(
                "unweighted boundary term needs gradient blowup at Σ".into(),
            ))
        }
        _ => {}
    }
    let mut total = Vec::new();
    for sigma in &domain.boundary {
        total.push(boundary_term(sigma, q, weighted.then_some(map), rule)?);
    }
    Ok(pairwise_sum(&total))
}

/// `Σ_i A_i^s` and `(Σ_i A_i)^s`.
pub fn superadditivity(areas: &[f64], s: f64) -> (f64, f64) {
    let lhs = areas.iter().map(|a| a.powf(s)).sum();
    (lhs, areas.iter().sum::<f64>().powf(s))
}

/// `2^{−q} (A/ω_{n−1})^{(n−2q)/(n−1)}`.
pub fn penrose_bound(n: usize, q: usize, area: f64) -> f64 {
    let s = (n as f64 - 2.0 * q as f64) / (n as f64 - 1.0);
    0.5f64.powi(q as i32) * (area / unit_sphere_volume(n - 1)).powf(s)
}

/// Smallest `H_r`, `1 ≤ r ≤ 2q−1`, over the rule's points on `Σ`, with the point.
fn min_mean_curvature(sigma: &StarShaped, q: usize, rule: &SphereRule) -> Result<(f64, Vec<f64>)> {
    let mut worst = (f64::INFINITY, Vec::new());
    for th in &rule.nodes {
        let x = sigma.point_along(th);
        let level = level_set_frame(&sigma.gauge_jet(&x))?;
        for r in 1..=(2 * q - 1) {
            let h = mean_curvature_r(&level.shape, r)?;
            if h < worst.0 {
                worst = (h, x.clone());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuanLi {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub area: f64,
}

/// `½ (2q−1)! c_q(n) ∮_Σ H_(2q−1)` against `2^{−q} (|Σ|/ω_{n−1})^{(n−2q)/(n−1)}`.
pub fn guan_li_check(sigma: &StarShaped, q: usize, rule: &SphereRule) -> Result<GuanLi> {
    let n = sigma.dim();
    if q == 0 || 2 * q > n {
        return Err(GbcError::Argument(format!(
            "2q − 1 = {} exceeds n − 1 = {}",
            2 * q as i64 - 1,
            n - 1
        )));
    }
    let (h, x) = min_mean_curvature(sigma, q, rule)?;
    if !(h > 0.0) {
        return Err(GbcError::Precondition(format!(
            "Σ is not strictly {}-mean convex at {x:?}",
            2 * q - 1
        )));
    }
    let (hs, area) = boundary_integrals(sigma, q, None, rule)?;
    let lhs = 0.5 * factorial(2 * q - 1) * gbc_constant(n, q) * hs;
    let rhs = penrose_bound(n, q, area);
    Ok(GuanLi {
        lhs,
        rhs,
        margin: lhs - rhs,
        area,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenroseSettings {
    pub order: usize,
    pub radii: [f64; 4],
    /// Sampling tolerance for the flatness and sign hypotheses.
    pub tolerance: f64,
}

impl Default for PenroseSettings {
    fn default() -> Self {
        Self {
            order: 16,
            radii: [20.0, 40.0, 80.0, 160.0],
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PenroseVerdict {
    Evaluated {
        mass: Estimate,
        areas: Vec<f64>,
        area: Estimate,
        rhs: f64,
        margin: Estimate,
        superadditivity_lhs: f64,
        superadditivity_rhs: f64,
        samples_checked: usize,
    },
    HypothesesNotMet {
        hypothesis: String,
        sample: Option<Vec<f64>>,
        detail: String,
    },
}

fn not_met(h: &str, sample: Option<Vec<f64>>, detail: String) -> PenroseVerdict {
    PenroseVerdict::HypothesesNotMet {
        hypothesis: h.into(),
        sample,
        detail,
    }
}

/// Sample points in the domain: shells at multiples of the boundary size.
pub fn hypothesis_samples(map: &dyn GraphMap, per_shell: usize) -> Vec<Vec<f64>> {
    let n = map.dim();
    let base = map.domain().circumradius().max(1.0);
    let rule = sphere_rule(n, 2).expect("fixed order");
    let stride = (rule.len() / per_shell.max(1)).max(1);
    let mut out = Vec::new();
    for factor in [1.01, 1.1, 1.5, 3.0, 10.0] {
        for th in rule.nodes.iter().step_by(stride) {
            let x: Vec<f64> = th.iter().map(|t| factor * base * t).collect();
            if map.domain().contains(&x) {
                out.push(x);
            }
        }
    }
    out
}

pub fn penrose_check(
    map: &dyn GraphMap,
    q: usize,
    settings: &PenroseSettings,
) -> Result<PenroseVerdict> {
    let n = map.dim();
    if q == 0 || 2 * q >= n {
        return Err(GbcError::Argument(format!("q = {q} outside 1 ≤ q < n/2")));
    }
    let domain = map.domain();
    if domain.is_full_space() {
        return Ok(not_met(
            "boundary",
            None,
            "the model has no horizon boundary".into(),
        ));
    }
    if domain.behavior != BoundaryBehavior::GradientBlowup {
        return Ok(not_met(
            "gradient-blowup",
            None,
            "f extends smoothly across Σ".into(),
        ));
    }
    let rule = sphere_rule(n, settings.order)?;
    let probe = sphere_rule(n, 3)?;
    for sigma in &domain.boundary {
        let (h, x) = min_mean_curvature(sigma, q, &probe)?;
        if !(h > 0.0) {
            return Ok(not_met(
                "strict mean convexity",
                Some(x),
                format!("H = {h:e}"),
            ));
        }
    }
    let samples = hypothesis_samples(map, 8);
    for x in &samples {
        let pf = point_frame(map, x)?;
        let cf = curvature_frame(&pf);
        let scale = 1.0 + cf.shape.iter().map(|a| a.norm_squared()).sum::<f64>();
        let comm = cf.normal_curvature_norm();
        if comm > settings.tolerance * scale {
            return Ok(not_met(
                "flat normal bundle",
                Some(x.clone()),
                format!("|[A, A]| = {comm:e}"),
            ));
        }
        let l = lovelock_scalar(&cf.riemann, q)?;
        if l < -settings.tolerance * scale.powi(q as i32) {
            return Ok(not_met(
                "nonnegative L_q",
                Some(x.clone()),
                format!("L_q = {l:e}"),
            ));
        }
    }
    let (_, ex) = surface_mass_series(map, q, &settings.radii, &rule)?;
    let mut areas = Vec::new();
    let mut area_err = 0.0;
    let coarse = sphere_rule(n, (settings.order / 2).max(1))?;
    for sigma in &domain.boundary {
        let a = area(sigma, &rule)?;
        area_err += (a - area(sigma, &coarse)?).abs();
        areas.push(a);
    }
    let total: f64 = areas.iter().sum();
    let rhs = penrose_bound(n, q, total);
    let s = (n as f64 - 2.0 * q as f64) / (n as f64 - 1.0);
    let (sl, sr) = superadditivity(&areas, s);
    let rhs_err = rhs * s * area_err / total;
    Ok(PenroseVerdict::Evaluated {
        mass: ex.estimate(),
        areas,
        area: Estimate::new(total, area_err),
        rhs,
        margin: Estimate::new(ex.mass - rhs, ex.error + rhs_err),
        superadditivity_lhs: sl,
        superadditivity_rhs: sr,
        samples_checked: samples.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipRow {
    pub delta: f64,
    pub level: f64,
    pub bulk: Estimate,
    pub weighted_boundary: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipStudy {
    pub rows: Vec<ClipRow>,
    /// Bulk over the whole exterior of the horizon plus the unweighted horizon term.
    pub limit: Estimate,
    pub horizon_radius: f64,
    /// `|total − limit|` is non-increasing as `δ` decreases (within the reported errors).
    pub monotone: bool,
}

/// Bulk plus weighted boundary on the clip surfaces `{|F′| = 1/δ}` of a radial
/// horizon model, against the `δ → 0` limit.
pub fn clip_study(
    map: &dyn GraphMap,
    horizon: &crate::models::Profile,
    q: usize,
    deltas: &[f64],
    rule: &SphereRule,
    settings: &BulkSettings,
) -> Result<ClipStudy> {
    let n = map.dim();
    let rh = horizon
        .horizon_radius()
        .ok_or_else(|| GbcError::Argument("clip study needs a horizon profile".into()))?;
    if deltas.len() < 3 || deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(GbcError::Argument(
            "need at least three decreasing clip values".into(),
        ));
    }
    let mut rows = Vec::new();
    for &delta in deltas {
        let level = horizon.level_with_slope(1.0 / delta)?;
        let sigma = StarShaped::sphere(vec![0.0; n], level)?;
        let bulk = bulk_mass_outside(map, q, rule, Some(&sigma), settings)?;
        let wb = boundary_term(&sigma, q, Some(map), rule)?;
        rows.push(ClipRow {
            delta,
            level,
            bulk: bulk.estimate(),
            weighted_boundary: wb,
            total: bulk.value + wb,
        });
    }
    let horizon_sphere = StarShaped::sphere(vec![0.0; n], rh)?;
    let full = bulk_mass_outside(map, q, rule, Some(&horizon_sphere), settings)?;
    let unweighted = boundary_term(&horizon_sphere, q, None, rule)?;
    let limit = Estimate::new(
        full.value + unweighted,
        full.quadrature_error + full.tail_error,
    );
    let gaps: Vec<f64> = rows.iter().map(|r| (r.total - limit.value).abs()).collect();
    let slack: Vec<f64> = rows
        .iter()
        .map(|r| r.bulk.error + limit.error + 1e-12)
        .collect();
    let monotone = gaps
        .windows(2)
        .zip(slack.windows(2))
        .all(|(g, s)| g[1] <= g[0] + s[0] + s[1]);
    Ok(ClipStudy {
        rows,
        limit,
        horizon_radius: rh,
        monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSettings {
    pub order: usize,
    pub radii: Vec<f64>,
    pub bulk: BulkSettings,
    /// Angular order of the bulk quadrature.
    pub bulk_order: usize,
    pub compute_bulk: bool,
}

impl MassSettings {
    pub fn for_dimension(n: usize) -> Self {
        Self {
            order: default_order(n),
            radii: vec![20.0, 40.0, 80.0, 160.0],
            bulk: BulkSettings::default(),
            bulk_order: 6,
            compute_bulk: true,
        }
    }
}

pub fn default_order(n: usize) -> usize {
    match n {
        0..=3 => 24,
        4 => 12,
        _ => 8,
    }
}

/// Every route to `m_q` for one model and order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub q: usize,
    pub radii: Vec<f64>,
    pub surface_mass: Vec<Estimate>,
    pub extrapolated: Estimate,
    pub fit_exponent: Option<f64>,
    pub fit_flagged: bool,
    pub bulk: Option<Estimate>,
    pub bulk_tail: Option<Estimate>,
    pub bulk_decay_exponent: Option<f64>,
    pub weighted_boundary: Option<Estimate>,
    pub unweighted_boundary: Option<Estimate>,
    /// `surface − bulk − weighted boundary` (boundary term omitted without `Σ`).
    pub residual_theorem: Option<Estimate>,
    pub penrose: Option<PenroseVerdict>,
    pub guan_li: Vec<GuanLi>,
    pub adm_surface: Vec<Estimate>,
    pub adm_mass: Option<Estimate>,
    /// Numerical-hypothesis failures that left parts of the report empty.
    pub diagnostics: Vec<String>,
}

impl MassReport {
    pub fn numerical_failure(&self) -> bool {
        !self.diagnostics.is_empty()
    }
}

fn boundary_with_error(
    map: &dyn GraphMap,
    q: usize,
    weighted: bool,
    rule: &SphereRule,
    coarse: &SphereRule,
) -> Result<Estimate> {
    let v = boundary_mass(map, q, weighted, rule)?;
    let c = boundary_mass(map, q, weighted, coarse)?;
    Ok(Estimate::new(v, (v - c).abs()))
}

pub fn mass_report(map: &dyn GraphMap, q: usize, settings: &MassSettings) -> Result<MassReport> {
    let n = map.dim();
    if q == 0 || 2 * q >= n {
        return Err(GbcError::Argument(format!(
            "q = {q} outside 1 ≤ q < n/2 (n = {n})"
        )));
    }
    let rule = sphere_rule(n, settings.order)?;
    let coarse = sphere_rule(n, (settings.order / 2).max(1))?;
    let mut diagnostics = Vec::new();

    let mut surface = Vec::new();
    for &r in &settings.radii {
        let v = surface_mass(map, q, r, &rule)?;
        let c = surface_mass(map, q, r, &coarse)?;
        surface.push(Estimate::new(v, (v - c).abs()));
    }
    let samples: Vec<(f64, f64)> = settings
        .radii
        .iter()
        .copied()
        .zip(surface.iter().map(|e| e.value))
        .collect();
    let ex = extrapolate_mass(&samples)?;
    let quad_err = surface.last().map_or(0.0, |e| e.error);
    let extrapolated = Estimate::new(ex.mass, ex.error + quad_err);
    if ex.flagged {
        diagnostics.push("surface series is not monotone; raw tail value reported".into());
    }

    let domain = map.domain();
    let mut bulk = None;
    let mut bulk_tail = None;
    let mut bulk_decay_exponent = None;
    if settings.compute_bulk {
        let brule = sphere_rule(n, settings.bulk_order)?;
        match bulk_mass(map, q, &brule, &settings.bulk) {
            Ok(b) => {
                bulk = Some(b.estimate());
                bulk_tail = Some(Estimate::new(b.tail, b.tail_error));
                bulk_decay_exponent = b.decay_exponent;
            }
            Err(e @ (GbcError::NonIntegrable(_) | GbcError::Numerical(_))) => {
                diagnostics.push(format!("bulk: {e}"))
            }
            Err(e) => diagnostics.push(format!("bulk skipped: {e}")),
        }
    }

    let (weighted_boundary, unweighted_boundary) = if domain.is_full_space() {
        (None, None)
    } else {
        // the weighted term is defined on the model's Σ whenever f is smooth up to it
        let mut total = Vec::new();
        let mut err = 0.0;
        for sigma in &domain.boundary {
            let v = boundary_term(sigma, q, Some(map), &rule)?;
            err += (v - boundary_term(sigma, q, Some(map), &coarse)?).abs();
            total.push(v);
        }
        let weighted = Some(Estimate::new(pairwise_sum(&total), err));
        let unweighted = match domain.behavior {
            BoundaryBehavior::GradientBlowup => {
                Some(boundary_with_error(map, q, false, &rule, &coarse)?)
            }
            BoundaryBehavior::SmoothExtension => None,
        };
        (weighted, unweighted)
    };

    let residual_theorem = bulk.map(|b| {
        let wb = weighted_boundary.unwrap_or(Estimate::exact(0.0));
        Estimate::new(
            extrapolated.value - b.value - wb.value,
            extrapolated.error + b.error + wb.error,
        )
    });

    let mut guan_li = Vec::new();
    for sigma in &domain.boundary {
        match guan_li_check(sigma, q, &rule) {
            Ok(g) => guan_li.push(g),
            Err(e) => diagnostics.push(format!("guan-li: {e}")),
        }
    }
    let penrose = if domain.behavior == BoundaryBehavior::GradientBlowup && !domain.is_full_space()
    {
        let mut radii = [0.0; 4];
        if settings.radii.len() == 4 {
            radii.copy_from_slice(&settings.radii);
            Some(penrose_check(
                map,
                q,
                &PenroseSettings {
                    order: settings.order,
                    radii,
                    tolerance: 1e-9,
                },
            )?)
        } else {
            None
        }
    } else {
        None
    };

    let (adm_surface, adm_mass) = if q == 1 {
        let mut values = Vec::new();
        for &r in &settings.radii {
            let v = adm_surface(map, r, &rule)?;
            values.push(Estimate::new(v, (v - adm_surface(map, r, &coarse)?).abs()));
        }
        let samples: Vec<(f64, f64)> = settings
            .radii
            .iter()
            .copied()
            .zip(values.iter().map(|e| e.value))
            .collect();
        let ex = extrapolate_mass(&samples)?;
        (values, Some(ex.estimate()))
    } else {
        (Vec::new(), None)
    };

    Ok(MassReport {
        q,
        radii: settings.radii.clone(),
        surface_mass: surface,
        extrapolated,
        fit_exponent: ex.exponent,
        fit_flagged: ex.flagged,
        bulk,
        bulk_tail,
        bulk_decay_exponent,
        weighted_boundary,
        unweighted_boundary,
        residual_theorem,
        penrose,
        guan_li,
        adm_surface,
        adm_mass,
        diagnostics,
    })
}


#[cfg(test)]
mod invariants {
    use super::*;
    use crate::models::ModelSpec;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn extrapolation_recovers_power_laws(m in -3.0f64..3.0, b in -5.0f64..5.0, s in 0.3f64..3.0) {
            prop_assume!(b.abs() > 1e-3);
            let samples: Vec<(f64, f64)> = [20.0f64, 40.0, 80.0, 160.0].iter().map(|&r| (r, m + b * r.powf(-s))).collect();
            let ex = extrapolate_mass(&samples).unwrap();
            prop_assert!((ex.mass - m).abs() <= 1e-6 * (1.0 + b.abs()), "{ex:?}");
            prop_assert!(!ex.flagged);
        }

        /// `Σ a_i^s ≥ (Σ a_i)^s` for `s ∈ (0, 1]`.
        #[test]
        fn superadditivity_holds(areas in prop::collection::vec(0.01f64..100.0, 1..6), s in 0.05f64..1.0) {
            let (lhs, rhs) = superadditivity(&areas, s);
            prop_assert!(lhs >= rhs * (1.0 - 1e-14));
        }

        /// The surface mass of a radial model does not depend on where Σ's quadrature nodes fall.
        #[test]
        fn surface_mass_is_scale_consistent(mass in 0.2f64..2.0, r in 30.0f64..200.0) {
            let map = ModelSpec::Schwarzschild { n: 3, q: 1, mass, clip: 1e-3, excess: 0.0, decay: 1.0 }.build().unwrap();
            let v = surface_mass(map.as_ref(), 1, r, &sphere_rule(3, 6).unwrap()).unwrap();
            prop_assert!((v - mass).abs() <= 1e-12 * mass);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let map = ModelSpec::catalog()[5].build().unwrap();
        let settings = MassSettings {
            order: 8,
            bulk_order: 4,
            ..MassSettings::for_dimension(3)
        };
        let a = mass_report(map.as_ref(), 1, &settings).unwrap();
        let b = mass_report(map.as_ref(), 1, &settings).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
