//! Model catalog: analytic graph maps with boundary descriptors and reference values.

use num_dual::{second_derivative, third_derivative, DualNum};
use serde::{Deserialize, Serialize};

use crate::error::{GbcError, Result};
use crate::graph_geometry::{BoundaryBehavior, DomainDescriptor, GraphJet, GraphMap, StarShaped};
use crate::jet::ScalarJet;
use crate::numerics::{linear_slope, unit_sphere_volume};
use crate::quadrature::{gauss_legendre, GaussRule};

/// Univariate profile `F` composed with a level function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// Slope `F′ = sqrt(share · φ/(1 − φ))`, `φ(s) = 2 M(s) s^{−p}`,
    /// `M(s) = mass + excess (1 − (r_h/s)^decay)`, anchored by `F(r_h) = 0`
    /// at the horizon `r_h = (2 mass)^{1/p}`.
    Horizon {
        p: f64,
        mass: f64,
        #[serde(default)]
        excess: f64,
        #[serde(default = "one")]
        decay: f64,
        #[serde(default = "one")]
        share: f64,
    },
    /// Smooth everywhere: `φ(s) = c s² (1 + s²)^{−1−p/2}`, anchored by `F(0) = 0`.
    Bowl {
        amplitude: f64,
        p: f64,
        #[serde(default = "one")]
        share: f64,
    },
    /// `F(s) = a s^{−e}`, `e > −1`.
    Power {
        amplitude: f64,
        exponent: f64,
    },
    /// `F(s) = a (1 + s²)^{−e/2}`.
    Lorentzian {
        amplitude: f64,
        exponent: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn schwarzschild(n: usize, q: usize, mass: f64) -> Self {
        Profile::Horizon {
            p: (n as f64 - 2.0 * q as f64) / q as f64,
            mass,
            excess: 0.0,
            decay: 1.0,
            share: 1.0,
        }
    }

    pub fn horizon_radius(&self) -> Option<f64> {
        match self {
            Profile::Horizon { p, mass, .. } => Some((2.0 * mass).powf(1.0 / p)),
            _ => None,
        }
    }

    /// Declared decay order contributed by this profile.
    pub fn tau(&self) -> f64 {
        match self {
            Profile::Zero => f64::INFINITY,
            Profile::Horizon { p, .. } | Profile::Bowl { p, .. } => *p,
            Profile::Power { exponent, .. } | Profile::Lorentzian { exponent, .. } => {
                2.0 * (exponent + 1.0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GbcError::Argument(msg));
        match *self {
            Profile::Zero => Ok(()),
            Profile::Horizon {
                p,
                mass,
                excess,
                decay,
                share,
            } => {
                if !(p > 0.0
                    && mass > 0.0
                    && excess >= 0.0
                    && decay > 0.0
                    && share > 0.0
                    && share <= 1.0)
                {
                    return bad(format!("invalid horizon profile {self:?}"));
                }
                let rh = (2.0 * mass).powf(1.0 / p);
                // φ < 1 strictly outside the horizon
                for k in 0..=480 {
                    let s = rh * (1.0 + 1e-6 * 10f64.powf(k as f64 / 40.0));
                    let m = mass + excess * (1.0 - (rh / s).powf(decay));
                    if 2.0 * m * s.powf(-p) >= 1.0 {
                        return bad(format!(
                            "profile {self:?} has a second horizon near s = {s}"
                        ));
                    }
                }
                Ok(())
            }
            Profile::Bowl {
                amplitude,
                p,
                share,
            } => {
                if !(amplitude > 0.0 && amplitude < 1.0 && p > 0.0 && share > 0.0 && share <= 1.0) {
                    return bad(format!(
                        "invalid bowl profile {self:?} (need 0 < amplitude < 1)"
                    ));
                }
                Ok(())
            }
            // growing power profiles are allowed down to linear growth
            Profile::Power { exponent, .. } if exponent > -1.0 && exponent != 0.0 => Ok(()),
            Profile::Lorentzian { exponent, .. } if exponent > 0.0 => Ok(()),
            Profile::Power { .. } | Profile::Lorentzian { .. } => {
                bad(format!("unsupported exponent in {self:?}"))
            }
        }
    }

    fn slope<D: DualNum<Primitive = f64> + Copy>(&self, s: D) -> D {
        match *self {
            Profile::Horizon {
                p,
                mass,
                excess,
                decay,
                share,
            } => {
                let rh = (2.0 * mass).powf(1.0 / p);
                let m = (D::from(1.0) - (D::from(rh) / s).powf(decay)) * excess + mass;
                let phi = m * s.powf(-p) * 2.0;
                (phi * share / (D::from(1.0) - phi)).sqrt()
            }
            Profile::Bowl {
                amplitude,
                p,
                share,
            } => {
                let w = (s * s + 1.0).powf(-1.0 - 0.5 * p) * amplitude;
                let phi = w * s * s;
                s * (w * share / (D::from(1.0) - phi)).sqrt()
            }
            _ => unreachable!("slope-defined profiles only"),
        }
    }

    fn value<D: DualNum<Primitive = f64> + Copy>(&self, s: D) -> D {
        match *self {
            Profile::Power {
                amplitude,
                exponent,
            } => s.powf(-exponent) * amplitude,
            Profile::Lorentzian {
                amplitude,
                exponent,
            } => (s * s + 1.0).powf(-0.5 * exponent) * amplitude,
            _ => unreachable!("value-defined profiles only"),
        }
    }

    fn slope_f64(&self, s: f64) -> f64 {
        self.slope(s)
    }

    fn anchor(&self) -> f64 {
        self.horizon_radius().unwrap_or(0.0)
    }

    /// `F(s)` for slope-defined profiles, by graded Gauss–Legendre panels in `t`,
    /// `s = anchor + t²`, which removes the square-root singularity at a horizon.
    fn integrated_value(&self, s: f64) -> f64 {
        let a = self.anchor();
        let t_end = (s - a).max(0.0).sqrt();
        let rule = panel_rule();
        let mut lo = 0.0;
        let mut hi = (0.5 * a.max(1.0).sqrt()).min(t_end);
        let mut total = 0.0;
        while lo < t_end {
            total += rule.integrate(lo, hi, |t| 2.0 * t * self.slope_f64(a + t * t));
            lo = hi;
            hi = (2.0 * hi).min(t_end);
        }
        total
    }

    /// `[F, F′, F″, F‴]` at `s`.
    pub fn derivatives(&self, s: f64) -> Result<[f64; 4]> {
        match self {
            Profile::Zero => Ok([0.0; 4]),
            Profile::Horizon { .. } | Profile::Bowl { .. } => {
                if s <= self.anchor() || (matches!(self, Profile::Bowl { .. }) && s < 0.0) {
                    return Err(GbcError::Domain(format!("profile undefined at s = {s}")));
                }
                let (d1, d2, d3) = second_derivative(|x| self.slope(x), s);
                let out = [self.integrated_value(s), d1, d2, d3];
                if out.iter().all(|v| v.is_finite()) {
                    Ok(out)
                } else {
                    Err(GbcError::Domain(format!("profile singular at s = {s}")))
                }
            }
            Profile::Power { .. } | Profile::Lorentzian { .. } => {
                if s <= 0.0 && matches!(self, Profile::Power { .. }) {
                    return Err(GbcError::Domain(format!(
                        "power profile undefined at s = {s}"
                    )));
                }
                let (d0, d1, d2, d3) = third_derivative(|x| self.value(x), s);
                Ok([d0, d1, d2, d3])
            }
        }
    }

    /// Level `s > r_h` where the slope equals `target` (slope-defined profiles, decreasing branch).
    pub fn level_with_slope(&self, target: f64) -> Result<f64> {
        let a = self.anchor();
        if !matches!(self, Profile::Horizon { .. }) || !(target > 0.0) {
            return Err(GbcError::Argument(
                "slope inversion needs a horizon profile".into(),
            ));
        }
        let (mut lo, mut hi) = (a * (1.0 + 1e-15), a * 2.0);
        while self.slope_f64(hi) > target {
            hi *= 2.0;
            if hi > 1e12 * a {
                return Err(GbcError::Numerical("slope inversion failed".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.slope_f64(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn panel_rule() -> &'static GaussRule {
    static RULE: std::sync::OnceLock<GaussRule> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(24).expect("fixed order"))
}

/// `f^α = F^α(u)` for a star-shaped gauge `u`; radial when the gauge is a unit sphere.
#[derive(Debug, Clone)]
pub struct LevelGraph {
    gauge: StarShaped,
    profiles: Vec<Profile>,
    domain: DomainDescriptor,
    tau: f64,
}

impl LevelGraph {
    pub fn new(
        gauge: StarShaped,
        profiles: Vec<Profile>,
        domain: DomainDescriptor,
    ) -> Result<Self> {
        if profiles.is_empty() {
            return Err(GbcError::Argument(
                "a graph needs at least one component".into(),
            ));
        }
        for p in &profiles {
            p.validate()?;
        }
        let tau = profiles
            .iter()
            .map(Profile::tau)
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            gauge,
            profiles,
            domain,
            tau,
        })
    }

    pub fn radial(n: usize, profiles: Vec<Profile>, domain: DomainDescriptor) -> Result<Self> {
        Self::new(StarShaped::sphere(vec![0.0; n], 1.0)?, profiles, domain)
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }
}

impl GraphMap for LevelGraph {
    fn dim(&self) -> usize {
        self.gauge.dim()
    }

    fn codim(&self) -> usize {
        self.profiles.len()
    }

    fn eval(&self, x: &[f64]) -> Result<GraphJet> {
        let u = self.gauge.gauge_jet(x);
        if !(u.value > 0.0) {
            return Err(GbcError::Domain(
                "level function is singular at its center".into(),
            ));
        }
        let comps = self
            .profiles
            .iter()
            .map(|p| Ok(u.compose(p.derivatives(u.value)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GraphJet::new(comps))
    }

    fn domain(&self) -> &DomainDescriptor {
        &self.domain
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn level_function(&self, x: &[f64]) -> Option<ScalarJet> {
        Some(self.gauge.gauge_jet(x))
    }
}

/// `f ≡ 0 ∈ ℝ^m`.
#[derive(Debug, Clone)]
pub struct FlatGraph {
    n: usize,
    m: usize,
    domain: DomainDescriptor,
}

impl GraphMap for FlatGraph {
    fn dim(&self) -> usize {
        self.n
    }

    fn codim(&self) -> usize {
        self.m
    }

    fn eval(&self, x: &[f64]) -> Result<GraphJet> {
        Ok(GraphJet::new(vec![
            ScalarJet::constant(x.len(), 0.0);
            self.m
        ]))
    }

    fn domain(&self) -> &DomainDescriptor {
        &self.domain
    }

    fn tau(&self) -> f64 {
        f64::INFINITY
    }
}

/// `f = a (1 + |x|²)^{−k/2} (x₁x₂, x₁x₃)`: a normal bundle that is not flat.
#[derive(Debug, Clone)]
pub struct SkewGraph {
    n: usize,
    amplitude: f64,
    decay: f64,
    domain: DomainDescriptor,
}

impl GraphMap for SkewGraph {
    fn dim(&self) -> usize {
        self.n
    }

    fn codim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> Result<GraphJet> {
        let n = self.n;
        let q = ScalarJet::weighted_square_distance(x, &vec![0.0; n], &vec![1.0; n]);
        let e = -0.5 * self.decay;
        let b = 1.0 + q.value;
        let chi = q.compose([
            b.powf(e),
            e * b.powf(e - 1.0),
            e * (e - 1.0) * b.powf(e - 2.0),
            e * (e - 1.0) * (e - 2.0) * b.powf(e - 3.0),
        ]);
        let x1 = ScalarJet::coordinate(x, 0);
        let comps = [1, 2].map(|k| {
            x1.mul(&ScalarJet::coordinate(x, k))
                .mul(&chi)
                .scale(self.amplitude)
        });
        Ok(GraphJet::new(comps.to_vec()))
    }

    fn domain(&self) -> &DomainDescriptor {
        &self.domain
    }

    fn tau(&self) -> f64 {
        2.0 * (self.decay - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// `(1 − |x − c|²/w²)^4` inside the ball, zero outside (C³).
    Bump { center: Vec<f64>, width: f64 },
    /// `x₁ (1 + |x|²)^{−e/2}`.
    Decaying { exponent: f64 },
}

impl Perturbation {
    fn jet(&self, x: &[f64]) -> ScalarJet {
        let n = x.len();
        match self {
            Perturbation::Bump { center, width } => {
                let q =
                    ScalarJet::weighted_square_distance(x, center, &vec![1.0 / (width * width); n]);
                if q.value >= 1.0 {
                    return ScalarJet::constant(n, 0.0);
                }
                let v = 1.0 - q.value;
                q.compose([v.powi(4), -4.0 * v.powi(3), 12.0 * v * v, -24.0 * v])
            }
            Perturbation::Decaying { exponent } => {
                let q = ScalarJet::weighted_square_distance(x, &vec![0.0; n], &vec![1.0; n]);
                let e = -0.5 * exponent;
                let b = 1.0 + q.value;
                let w = q.compose([
                    b.powf(e),
                    e * b.powf(e - 1.0),
                    e * (e - 1.0) * b.powf(e - 2.0),
                    e * (e - 1.0) * (e - 2.0) * b.powf(e - 3.0),
                ]);
                ScalarJet::coordinate(x, 0).mul(&w)
            }
        }
    }

    fn tau(&self) -> f64 {
        match self {
            Perturbation::Bump { .. } => f64::INFINITY,
            Perturbation::Decaying { exponent } => 2.0 * exponent,
        }
    }
}

/// A base graph plus `ε ψ` added to its first component.
pub struct PerturbedGraph {
    base: Box<dyn GraphMap>,
    epsilon: f64,
    perturbation: Perturbation,
}

impl GraphMap for PerturbedGraph {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn codim(&self) -> usize {
        self.base.codim()
    }

    fn eval(&self, x: &[f64]) -> Result<GraphJet> {
        let mut jet = self.base.eval(x)?;
        if self.epsilon != 0.0 {
            let psi = self.perturbation.jet(x).scale(self.epsilon);
            let first = jet.components[0].clone().plus(&psi);
            jet.components[0] = first;
        }
        Ok(jet)
    }

    fn domain(&self) -> &DomainDescriptor {
        self.base.domain()
    }

    fn tau(&self) -> f64 {
        if self.epsilon == 0.0 {
            self.base.tau()
        } else {
            self.base.tau().min(self.perturbation.tau())
        }
    }

    fn level_function(&self, x: &[f64]) -> Option<ScalarJet> {
        if self.epsilon == 0.0 {
            self.base.level_function(x)
        } else {
            None
        }
    }
}

/// Fault injection: scales the second derivatives reported by the inner model.
pub struct CorruptedGraph {
    inner: Box<dyn GraphMap>,
    factor: f64,
}

impl GraphMap for CorruptedGraph {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn codim(&self) -> usize {
        self.inner.codim()
    }

    fn eval(&self, x: &[f64]) -> Result<GraphJet> {
        let mut jet = self.inner.eval(x)?;
        for c in &mut jet.components {
            c.scale_second(self.factor);
        }
        Ok(jet)
    }

    fn domain(&self) -> &DomainDescriptor {
        self.inner.domain()
    }

    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    fn level_function(&self, x: &[f64]) -> Option<ScalarJet> {
        self.inner.level_function(x)
    }
}

/// Where a stated reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Stated in the source literature.
    Literature,
    /// Closed form derived for this model.
    Derived,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub quantity: String,
    pub q: Option<usize>,
    pub value: f64,
    pub provenance: Provenance,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub n: usize,
    pub m: usize,
    /// `null` in JSON when the model is flat outside a compact set.
    #[serde(with = "unbounded")]
    pub tau: f64,
    pub flat_normal_bundle: bool,
    /// Orders with `1 ≤ q < n/2` and `τ > (n − 2q)/(q + 1)`.
    pub supported_q: Vec<usize>,
    pub references: Vec<ReferenceValue>,
}

impl ModelInfo {
    pub fn reference(&self, quantity: &str, q: Option<usize>) -> Option<f64> {
        self.references
            .iter()
            .find(|r| r.quantity == quantity && r.q == q)
            .map(|r| r.value)
    }
}

/// Serializable model description, the unit of configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelSpec {
    Flat {
        n: usize,
        #[serde(default = "one_usize")]
        m: usize,
    },
    /// The q-Schwarzschild graph over the exterior of `r_0 (1 + clip)`; with
    /// `excess > 0` the mass function grows towards `mass + excess` at infinity.
    Schwarzschild {
        n: usize,
        q: usize,
        mass: f64,
        #[serde(default = "default_clip")]
        clip: f64,
        #[serde(default)]
        excess: f64,
        #[serde(default = "one")]
        decay: f64,
    },
    /// Same family as `schwarzschild`, truncated at `truncation · r_h > r_h`
    /// where it extends smoothly across the boundary.
    MassProfile {
        n: usize,
        q: usize,
        mass: f64,
        excess: f64,
        #[serde(default = "one")]
        decay: f64,
        truncation: f64,
    },
    /// `f^α = F^α(|x|)`; full space when `inner_radius` is absent.
    RadialMultigraph {
        n: usize,
        profiles: Vec<Profile>,
        #[serde(default)]
        inner_radius: Option<f64>,
    },
    Skew {
        n: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_skew_decay")]
        decay: f64,
    },
    PerturbedSchwarzschild {
        n: usize,
        q: usize,
        mass: f64,
        epsilon: f64,
        perturbation: Perturbation,
        #[serde(default = "default_clip")]
        clip: f64,
    },
    /// `f = F(u)` over the exterior of the ellipsoid `{u = 1}`.
    EllipsoidLevel {
        semi_axes: Vec<f64>,
        profile: Profile,
    },
    /// Test hook: second derivatives of `inner` multiplied by `factor`.
    Corrupted { inner: Box<ModelSpec>, factor: f64 },
}

fn one_usize() -> usize {
    1
}

fn default_clip() -> f64 {
    1e-3
}

fn default_skew_decay() -> f64 {
    4.0
}

fn check_order(n: usize, q: usize) -> Result<()> {
    if n < 3 || q == 0 || 2 * q >= n {
        return Err(GbcError::Argument(format!(
            "need n ≥ 3 and 1 ≤ q < n/2, got n = {n}, q = {q}"
        )));
    }
    Ok(())
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Flat { .. } => "flat",
            ModelSpec::Schwarzschild { .. } => "schwarzschild",
            ModelSpec::MassProfile { .. } => "mass_profile",
            ModelSpec::RadialMultigraph { .. } => "radial_multigraph",
            ModelSpec::Skew { .. } => "skew",
            ModelSpec::PerturbedSchwarzschild { .. } => "perturbed_schwarzschild",
            ModelSpec::EllipsoidLevel { .. } => "ellipsoid_level",
            ModelSpec::Corrupted { .. } => "corrupted",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Flat { n, .. }
            | ModelSpec::Schwarzschild { n, .. }
            | ModelSpec::MassProfile { n, .. }
            | ModelSpec::RadialMultigraph { n, .. }
            | ModelSpec::Skew { n, .. }
            | ModelSpec::PerturbedSchwarzschild { n, .. } => *n,
            ModelSpec::EllipsoidLevel { semi_axes, .. } => semi_axes.len(),
            ModelSpec::Corrupted { inner, .. } => inner.dim(),
        }
    }

    fn horizon_profile(n: usize, q: usize, mass: f64, excess: f64, decay: f64) -> Profile {
        Profile::Horizon {
            p: (n as f64 - 2.0 * q as f64) / q as f64,
            mass,
            excess,
            decay,
            share: 1.0,
        }
    }

    pub fn build(&self) -> Result<Box<dyn GraphMap>> {
        Ok(match self {
            ModelSpec::Flat { n, m } => {
                if *n < 2 || *m < 1 {
                    return Err(GbcError::Argument(
                        "flat model needs n ≥ 2 and m ≥ 1".into(),
                    ));
                }
                Box::new(FlatGraph {
                    n: *n,
                    m: *m,
                    domain: DomainDescriptor::full_space(),
                })
            }
            &ModelSpec::Schwarzschild {
                n,
                q,
                mass,
                clip,
                excess,
                decay,
            } => {
                check_order(n, q)?;
                if !(mass > 0.0 && clip > 0.0) {
                    return Err(GbcError::Argument(
                        "schwarzschild needs mass > 0 and clip > 0".into(),
                    ));
                }
                let prof = Self::horizon_profile(n, q, mass, excess, decay);
                let rh = prof.horizon_radius().unwrap_or_default();
                let sigma = StarShaped::sphere(vec![0.0; n], rh * (1.0 + clip))?;
                let domain =
                    DomainDescriptor::exterior(vec![sigma], BoundaryBehavior::GradientBlowup)?;
                Box::new(LevelGraph::radial(n, vec![prof], domain)?)
            }
            &ModelSpec::MassProfile {
                n,
                q,
                mass,
                excess,
                decay,
                truncation,
            } => {
                check_order(n, q)?;
                if !(truncation > 1.0) {
                    return Err(GbcError::Argument(
                        "mass_profile needs truncation > 1".into(),
                    ));
                }
                let prof = Self::horizon_profile(n, q, mass, excess, decay);
                let rh = prof.horizon_radius().unwrap_or_default();
                let sigma = StarShaped::sphere(vec![0.0; n], rh * truncation)?;
                let domain =
                    DomainDescriptor::exterior(vec![sigma], BoundaryBehavior::SmoothExtension)?;
                Box::new(LevelGraph::radial(n, vec![prof], domain)?)
            }
            ModelSpec::RadialMultigraph {
                n,
                profiles,
                inner_radius,
            } => {
                let domain = match inner_radius {
                    Some(r) => DomainDescriptor::exterior(
                        vec![StarShaped::sphere(vec![0.0; *n], *r)?],
                        BoundaryBehavior::SmoothExtension,
                    )?,
                    None => {
                        if profiles
                            .iter()
                            .any(|p| matches!(p, Profile::Power { .. } | Profile::Horizon { .. }))
                        {
                            return Err(GbcError::Argument(
                                "singular profiles need an inner_radius".into(),
                            ));
                        }
                        DomainDescriptor::full_space()
                    }
                };
                let shares: f64 = profiles
                    .iter()
                    .map(|p| match p {
                        Profile::Horizon { share, .. } | Profile::Bowl { share, .. } => *share,
                        _ => 0.0,
                    })
                    .sum();
                if shares > 1.0 + 1e-12 {
                    return Err(GbcError::Argument(
                        "profile shares must sum to at most 1".into(),
                    ));
                }
                Box::new(LevelGraph::radial(*n, profiles.clone(), domain)?)
            }
            &ModelSpec::Skew {
                n,
                amplitude,
                decay,
            } => {
                if n < 3 || !(decay > 2.0) {
                    return Err(GbcError::Argument(
                        "skew model needs n ≥ 3 and decay > 2".into(),
                    ));
                }
                Box::new(SkewGraph {
                    n,
                    amplitude,
                    decay,
                    domain: DomainDescriptor::full_space(),
                })
            }
            ModelSpec::PerturbedSchwarzschild {
                n,
                q,
                mass,
                epsilon,
                perturbation,
                clip,
            } => {
                let base = ModelSpec::Schwarzschild {
                    n: *n,
                    q: *q,
                    mass: *mass,
                    clip: *clip,
                    excess: 0.0,
                    decay: 1.0,
                }
                .build()?;
                match perturbation {
                    Perturbation::Bump { center, width } => {
                        if center.len() != *n || !(*width > 0.0) {
                            return Err(GbcError::Argument(
                                "bump needs an n-dimensional center and width > 0".into(),
                            ));
                        }
                        let sigma = &base.domain().boundary[0];
                        let gap = crate::numerics::norm(center) - width - sigma.max_axis();
                        if gap <= 0.0 {
                            return Err(GbcError::Argument(
                                "bump support must avoid the boundary".into(),
                            ));
                        }
                    }
                    Perturbation::Decaying { exponent } => {
                        if !(*exponent > 0.0) {
                            return Err(GbcError::Argument(
                                "perturbation exponent must be positive".into(),
                            ));
                        }
                    }
                }
                Box::new(PerturbedGraph {
                    base,
                    epsilon: *epsilon,
                    perturbation: perturbation.clone(),
                })
            }
            ModelSpec::EllipsoidLevel { semi_axes, profile } => {
                let n = semi_axes.len();
                let sigma = StarShaped::ellipsoid(vec![0.0; n], semi_axes.clone())?;
                let domain = DomainDescriptor::exterior(
                    vec![sigma.clone()],
                    BoundaryBehavior::SmoothExtension,
                )?;
                if matches!(profile, Profile::Horizon { .. } | Profile::Bowl { .. }) {
                    return Err(GbcError::Argument(
                        "ellipsoid_level supports power and lorentzian profiles".into(),
                    ));
                }
                Box::new(LevelGraph::new(sigma, vec![profile.clone()], domain)?)
            }
            ModelSpec::Corrupted { inner, factor } => Box::new(CorruptedGraph {
                inner: inner.build()?,
                factor: *factor,
            }),
        })
    }

    /// The gradient-blowup horizon profile, when the model has one.
    pub fn horizon(&self) -> Option<Profile> {
        match *self {
            ModelSpec::Schwarzschild {
                n,
                q,
                mass,
                excess,
                decay,
                ..
            } => Some(Self::horizon_profile(n, q, mass, excess, decay)),
            ModelSpec::PerturbedSchwarzschild { n, q, mass, .. } => {
                Some(Profile::schwarzschild(n, q, mass))
            }
            _ => None,
        }
    }

    pub fn info(&self) -> Result<ModelInfo> {
        let map = self.build()?;
        let (n, m, tau) = (map.dim(), map.codim(), map.tau());
        let supported_q = (1..)
            .take_while(|q| 2 * q < n)
            .filter(|&q| tau > (n as f64 - 2.0 * q as f64) / (q as f64 + 1.0))
            .collect::<Vec<_>>();
        let flat_normal_bundle = !matches!(self, ModelSpec::Skew { .. })
            && !matches!(self, ModelSpec::PerturbedSchwarzschild { epsilon, .. } if *epsilon != 0.0);
        let mut references = Vec::new();
        let mut push = |quantity: &str, q: Option<usize>, value: f64, provenance| {
            references.push(ReferenceValue {
                quantity: quantity.into(),
                q,
                value,
                provenance,
            })
        };
        let omega = unit_sphere_volume(n - 1);
        match self {
            ModelSpec::Flat { .. } => {
                for &q in &supported_q {
                    push("m_q", Some(q), 0.0, Provenance::Trivial);
                }
            }
            &ModelSpec::Schwarzschild {
                q, mass, excess, ..
            } => {
                let rh = self
                    .horizon()
                    .and_then(|p| p.horizon_radius())
                    .unwrap_or_default();
                let prov = if excess == 0.0 {
                    Provenance::Literature
                } else {
                    Provenance::Derived
                };
                push("m_q", Some(q), (mass + excess).powi(q as i32), prov);
                push("horizon_radius", None, rh, Provenance::Literature);
                push(
                    "horizon_area",
                    None,
                    omega * rh.powi(n as i32 - 1),
                    Provenance::Literature,
                );
                push(
                    "penrose_rhs",
                    Some(q),
                    mass.powi(q as i32),
                    Provenance::Literature,
                );
            }
            &ModelSpec::MassProfile {
                q,
                mass,
                excess,
                decay,
                truncation,
                ..
            } => {
                let rh = Self::horizon_profile(n, q, mass, excess, decay)
                    .horizon_radius()
                    .unwrap_or_default();
                let rho = rh * truncation;
                let m_rho = mass + excess * (1.0 - truncation.powf(-decay));
                push(
                    "m_q",
                    Some(q),
                    (mass + excess).powi(q as i32),
                    Provenance::Derived,
                );
                push(
                    "weighted_boundary",
                    Some(q),
                    m_rho.powi(q as i32),
                    Provenance::Derived,
                );
                push(
                    "bulk",
                    Some(q),
                    (mass + excess).powi(q as i32) - m_rho.powi(q as i32),
                    Provenance::Derived,
                );
                push("boundary_radius", None, rho, Provenance::Derived);
            }
            ModelSpec::RadialMultigraph {
                profiles,
                inner_radius: None,
                ..
            } => {
                // every component a share of one bowl: the induced metric is that of the bowl
                if let Some(Profile::Bowl { amplitude, p, .. }) = profiles.first() {
                    let same = profiles.iter().all(|x| matches!(x, Profile::Bowl { amplitude: a, p: pp, .. } if a == amplitude && pp == p));
                    let total: f64 = profiles
                        .iter()
                        .map(|x| {
                            if let Profile::Bowl { share, .. } = x {
                                *share
                            } else {
                                0.0
                            }
                        })
                        .sum();
                    if same && (total - 1.0).abs() < 1e-12 {
                        for &q in &supported_q {
                            if (*p - (n as f64 - 2.0 * q as f64) / q as f64).abs() < 1e-12 {
                                push(
                                    "m_q",
                                    Some(q),
                                    (0.5 * amplitude).powi(q as i32),
                                    Provenance::Derived,
                                );
                            }
                        }
                    }
                }
            }
            ModelSpec::PerturbedSchwarzschild {
                q,
                mass,
                perturbation,
                ..
            } => {
                if matches!(perturbation, Perturbation::Bump { .. }) {
                    push("m_q", Some(*q), mass.powi(*q as i32), Provenance::Derived);
                }
            }
            _ => {}
        }
        Ok(ModelInfo {
            name: self.label().into(),
            n,
            m,
            tau,
            flat_normal_bundle,
            supported_q,
            references,
        })
    }

    /// The default catalog exercised by the test suites and the `catalog` command.
    pub fn catalog() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Flat { n: 3, m: 1 },
            ModelSpec::Flat { n: 5, m: 2 },
            ModelSpec::Schwarzschild {
                n: 3,
                q: 1,
                mass: 1.0,
                clip: 1e-3,
                excess: 0.0,
                decay: 1.0,
            },
            ModelSpec::Schwarzschild {
                n: 5,
                q: 2,
                mass: 1.0,
                clip: 1e-3,
                excess: 0.0,
                decay: 1.0,
            },
            ModelSpec::Schwarzschild {
                n: 5,
                q: 1,
                mass: 1.0,
                clip: 1e-3,
                excess: 0.0,
                decay: 1.0,
            },
            ModelSpec::MassProfile {
                n: 3,
                q: 1,
                mass: 0.5,
                excess: 0.5,
                decay: 1.0,
                truncation: 1.5,
            },
            ModelSpec::RadialMultigraph {
                n: 3,
                profiles: vec![
                    Profile::Bowl {
                        amplitude: 0.5,
                        p: 1.0,
                        share: 0.6,
                    },
                    Profile::Bowl {
                        amplitude: 0.5,
                        p: 1.0,
                        share: 0.4,
                    },
                ],
                inner_radius: None,
            },
            ModelSpec::RadialMultigraph {
                n: 4,
                profiles: vec![
                    Profile::Power {
                        amplitude: 0.5,
                        exponent: 1.0,
                    },
                    Profile::Power {
                        amplitude: -0.3,
                        exponent: 1.0,
                    },
                ],
                inner_radius: Some(1.0),
            },
            ModelSpec::Skew {
                n: 3,
                amplitude: 1.0,
                decay: 4.0,
            },
            ModelSpec::PerturbedSchwarzschild {
                n: 3,
                q: 1,
                mass: 1.0,
                epsilon: 0.1,
                perturbation: Perturbation::Bump {
                    center: vec![6.0, 0.0, 0.0],
                    width: 2.0,
                },
                clip: 1e-3,
            },
            ModelSpec::EllipsoidLevel {
                semi_axes: vec![1.0, 1.0, 1.5],
                profile: Profile::Power {
                    amplitude: 0.5,
                    exponent: 1.0,
                },
            },
        ]
    }
}

/// Sampled decay order: `−2 ×` the log-log slope of
/// `max_θ (|Df| + r|D²f| + r²|D³f|)` over the given radii.
pub fn sampled_decay_order(
    map: &dyn GraphMap,
    radii: &[f64],
    directions: &[Vec<f64>],
) -> Result<f64> {
    let n = map.dim();
    let mut logs_r = Vec::new();
    let mut logs_d = Vec::new();
    for &r in radii {
        let mut worst: f64 = 0.0;
        for th in directions {
            let x: Vec<f64> = th.iter().map(|t| r * t).collect();
            let jet = map.jet(&x)?;
            let (mut d1, mut d2, mut d3) = (0.0, 0.0, 0.0);
            for c in &jet.components {
                for i in 0..n {
                    d1 += c.d1(i).powi(2);
                    for j in 0..n {
                        d2 += c.d2(i, j).powi(2);
                        for k in 0..n {
                            d3 += c.d3(i, j, k).powi(2);
                        }
                    }
                }
            }
            worst = worst.max(d1.sqrt() + r * d2.sqrt() + r * r * d3.sqrt());
        }
        if worst == 0.0 {
            return Ok(f64::INFINITY);
        }
        logs_r.push(r.ln());
        logs_d.push(worst.ln());
    }
    Ok(-2.0 * linear_slope(&logs_r, &logs_d))
}

/// Deterministic sample of `count` interior points: uniform directions and
/// log-uniform radii in `[1.1 b, 4 b]` with `b` the boundary circumradius
/// (`[0.2, 4]` without boundary).
pub fn sample_points(map: &dyn GraphMap, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = map.dim();
    let domain = map.domain();
    let (lo, hi) = if domain.is_full_space() {
        (0.2, 4.0)
    } else {
        let b = domain.circumradius();
        (1.1 * b, 4.0 * b)
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = crate::numerics::norm(&dir);
        if !(len > 1e-3 && len <= 1.0) {
            continue;
        }
        let r = (lo * (hi / lo).powf(rng.random::<f64>())).max(lo);
        let x: Vec<f64> = dir.iter().map(|d| r * d / len).collect();
        if domain.contains(&x) {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_geometry::jet_consistency;

    #[test]
    fn schwarzschild_horizon_radius() {
        let p = Profile::schwarzschild(3, 1, 1.0);
        assert!((p.horizon_radius().unwrap() - 2.0).abs() < 1e-15);
        let p = Profile::schwarzschild(5, 2, 1.0);
        assert!((p.horizon_radius().unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn schwarzschild_slope_closed_form() {
        // n = 3, q = 1: F′² = 2m/(s − 2m)
        let p = Profile::schwarzschild(3, 1, 1.0);
        let d = p.derivatives(5.0).unwrap();
        assert!((d[1] - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        // F(s) = sqrt(8m(s − 2m))
        assert!((d[0] - (8.0f64 * 3.0).sqrt()).abs() < 1e-12, "{}", d[0]);
    }

    #[test]
    fn bowl_value_integrates_slope() {
        let p = Profile::Bowl {
            amplitude: 0.5,
            p: 1.0,
            share: 1.0,
        };
        let h = 1e-5;
        let s = 3.0;
        let fd = (p.derivatives(s + h).unwrap()[0] - p.derivatives(s - h).unwrap()[0]) / (2.0 * h);
        assert!((fd - p.derivatives(s).unwrap()[1]).abs() < 1e-9);
    }

    #[test]
    fn slope_inversion() {
        let p = Profile::schwarzschild(3, 1, 1.0);
        let s = p.level_with_slope(100.0).unwrap();
        assert!((p.derivatives(s).unwrap()[1] - 100.0).abs() < 1e-8);
    }

    #[test]
    fn every_catalog_jet_matches_differences() {
        for spec in ModelSpec::catalog() {
            let map = spec.build().unwrap();
            let n = map.dim();
            let mut x = vec![0.0; n];
            for (i, v) in x.iter_mut().enumerate() {
                *v = 2.3 + 0.7 * i as f64;
            }
            let err = jet_consistency(map.as_ref(), &x, 1e-5).unwrap();
            assert!(err < 1e-6, "{}: {err}", spec.label());
        }
    }

    #[test]
    fn declared_decay_matches_samples() {
        let dirs = vec![
            vec![0.6, 0.0, 0.8],
            vec![0.0, 1.0, 0.0],
            vec![0.48, 0.6, 0.64],
        ];
        let radii = [40.0, 80.0, 160.0, 320.0];
        for spec in [
            ModelSpec::Schwarzschild {
                n: 3,
                q: 1,
                mass: 1.0,
                clip: 1e-3,
                excess: 0.0,
                decay: 1.0,
            },
            ModelSpec::Skew {
                n: 3,
                amplitude: 1.0,
                decay: 4.0,
            },
            ModelSpec::EllipsoidLevel {
                semi_axes: vec![1.0, 1.0, 1.5],
                profile: Profile::Power {
                    amplitude: 0.5,
                    exponent: 1.0,
                },
            },
        ] {
            let map = spec.build().unwrap();
            let tau = sampled_decay_order(map.as_ref(), &radii, &dirs).unwrap();
            assert!(
                (tau - map.tau()).abs() < 0.3,
                "{}: sampled {tau}, declared {}",
                spec.label(),
                map.tau()
            );
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(ModelSpec::Schwarzschild {
            n: 4,
            q: 2,
            mass: 1.0,
            clip: 1e-3,
            excess: 0.0,
            decay: 1.0
        }
        .build()
        .is_err());
        assert!(ModelSpec::MassProfile {
            n: 3,
            q: 1,
            mass: 1.0,
            excess: 0.0,
            decay: 1.0,
            truncation: 0.9
        }
        .build()
        .is_err());
        let spec = ModelSpec::Schwarzschild {
            n: 3,
            q: 1,
            mass: 1.0,
            clip: 1e-3,
            excess: 0.0,
            decay: 1.0,
        };
        assert!(spec.build().unwrap().jet(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        for spec in ModelSpec::catalog() {
            let text = serde_json::to_string(&spec).unwrap();
            let back: ModelSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(spec, back);
        }
    }
}
