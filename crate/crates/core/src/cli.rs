//! Batch interface: configuration, commands and machine-readable reports.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::GbcError;
use crate::gbc::{
    boundary_flux, divergence_identity, flux_field_route_p, flux_field_route_t,
    gbc_scalar_two_routes, restricted_curvature_checks, GbcFrame,
};
use crate::graph_geometry::{
    curvature_frame, finite_difference_riemann, first_order_residuals, level_set_frame,
    point_frame, GraphMap,
};
use crate::mass::{
    clip_study, default_order, guan_li_check, mass_report, penrose_check, surface_mass,
    BulkSettings, ClipStudy, GuanLi, MassReport, MassSettings, PenroseSettings, PenroseVerdict,
};
use crate::models::{sample_points, ModelInfo, ModelSpec};
use crate::numerics::linear_slope;
use crate::quadrature::sphere_rule;
use crate::tensor_algebra::Riemann4;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IDENTITY_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const NUMERICAL_FAILURE: i32 = 3;
    pub const HYPOTHESES_NOT_MET: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(
    name = "gbc-mass",
    version,
    about = "Gauss–Bonnet–Chern mass of graphs: batch experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for reports (overrides the config)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of the point sampler
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Sphere quadrature order (overrides the config)
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Suppress the summary on stdout
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// All mass routes, residuals and verdicts
    Mass,
    /// Pointwise identity suite on seeded sample points
    Verify,
    /// Penrose and Guan–Li checks
    Penrose,
    /// Radius, order, step and clip convergence tables
    Convergence,
    /// The built-in model catalog
    Catalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Algebraic identities on O(1) quantities.
    pub identity: f64,
    /// Identities checked against central differences (relative to the local scale).
    pub finite_difference: f64,
    /// Divergence identity at the smallest configured step.
    pub divergence: f64,
    /// Sign and flatness sampling for theorem hypotheses.
    pub hypothesis: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-9,
            finite_difference: 1e-5,
            divergence: 1e-5,
            hypothesis: 1e-9,
        }
    }
}

/// Run configuration. All quantities are dimensionless (geometric units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Orders to evaluate; empty means every supported order.
    #[serde(default)]
    pub q: Vec<usize>,
    #[serde(default)]
    pub order: Option<usize>,
    /// Radii for the limit at infinity; default `{20, 40, 80, 160} · max(1, circumradius)`.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default = "default_clips")]
    pub clip_deltas: Vec<f64>,
    #[serde(default = "default_steps")]
    pub fd_steps: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub bulk: BulkSettings,
    #[serde(default = "default_bulk_order")]
    pub bulk_order: usize,
    #[serde(default = "yes")]
    pub compute_bulk: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub report_format: ReportFormat,
}

/// Layout of the JSON report; CSV tables are always written.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Pretty,
    Compact,
}

fn default_clips() -> Vec<f64> {
    vec![1e-1, 3e-2, 1e-2]
}

fn default_steps() -> Vec<f64> {
    vec![1e-2, 5e-3, 2.5e-3]
}

fn default_samples() -> usize {
    64
}

fn default_bulk_order() -> usize {
    6
}

fn yes() -> bool {
    true
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("identity failure: {0}")]
    Identity(String),
    #[error("numerical hypothesis failure: {0}")]
    Numerical(String),
    #[error("theorem hypotheses not met: {0}")]
    Hypotheses(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => exit::CONFIG_ERROR,
            CliError::Identity(_) => exit::IDENTITY_FAILURE,
            CliError::Numerical(_) => exit::NUMERICAL_FAILURE,
            CliError::Hypotheses(_) => exit::HYPOTHESES_NOT_MET,
        }
    }
}

impl From<GbcError> for CliError {
    fn from(e: GbcError) -> Self {
        match e {
            GbcError::Argument(_) | GbcError::Domain(_) => CliError::Config(e.to_string()),
            GbcError::Precondition(_) => CliError::Hypotheses(e.to_string()),
            GbcError::NonIntegrable(_) | GbcError::Numerical(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

/// A validated configuration with its model built.
pub struct Run {
    pub config: RunConfig,
    pub map: Box<dyn GraphMap>,
    pub info: ModelInfo,
    pub qs: Vec<usize>,
    pub order: usize,
    pub radii: Vec<f64>,
    pub seed: u64,
}

impl Run {
    pub fn new(
        config: RunConfig,
        order_override: Option<usize>,
        seed: u64,
    ) -> Result<Self, CliError> {
        let cfg = |m: String| CliError::Config(m);
        let map = config.model.build().map_err(|e| cfg(e.to_string()))?;
        let info = config.model.info().map_err(|e| cfg(e.to_string()))?;
        let n = map.dim();
        let qs = if config.q.is_empty() {
            info.supported_q.clone()
        } else {
            config.q.clone()
        };
        if qs.is_empty() {
            return Err(cfg(format!(
                "{} decays too slowly for every order q",
                info.name
            )));
        }
        if let Some(q) = qs.iter().find(|&&q| q == 0 || 2 * q >= n) {
            return Err(cfg(format!("q = {q} outside 1 ≤ q < n/2 for n = {n}")));
        }
        let order = order_override
            .or(config.order)
            .unwrap_or_else(|| default_order(n));
        if order == 0 {
            return Err(cfg("quadrature order must be positive".into()));
        }
        let scale = map.domain().circumradius().max(1.0);
        let radii = config
            .radii
            .clone()
            .unwrap_or_else(|| [20.0, 40.0, 80.0, 160.0].map(|r| r * scale).to_vec());
        if radii.len() < 3 || radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(cfg(
                "radii must hold at least three increasing values".into()
            ));
        }
        if radii[0] <= map.domain().circumradius() {
            return Err(cfg(format!("radius {} meets the boundary", radii[0])));
        }
        if config.samples == 0 {
            return Err(cfg("samples must be positive".into()));
        }
        let decreasing = |v: &[f64]| {
            v.len() >= 3 && v.iter().all(|x| *x > 0.0) && v.windows(2).all(|w| w[1] < w[0])
        };
        if !decreasing(&config.fd_steps) {
            return Err(cfg(
                "fd_steps must hold at least three decreasing positive steps".into(),
            ));
        }
        if !decreasing(&config.clip_deltas) {
            return Err(cfg(
                "clip_deltas must hold at least three decreasing positive values".into(),
            ));
        }
        if !(config.bulk.r_max > 4.0 * scale)
            || config.bulk.radial_points < 2
            || !(config.bulk.first_panel > 0.0)
        {
            return Err(cfg("invalid bulk settings".into()));
        }
        if config.bulk_order == 0 {
            return Err(cfg("bulk_order must be positive".into()));
        }
        Ok(Self {
            config,
            map,
            info,
            qs,
            order,
            radii,
            seed,
        })
    }

    pub fn mass_settings(&self) -> MassSettings {
        MassSettings {
            order: self.order,
            radii: self.radii.clone(),
            bulk: self.config.bulk,
            bulk_order: self.config.bulk_order,
            compute_bulk: self.config.compute_bulk,
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    value: &T,
    format: ReportFormat,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = match format {
        ReportFormat::Pretty => serde_json::to_string_pretty(value),
        ReportFormat::Compact => serde_json::to_string(value),
    }
    .map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn write_csv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(path)
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassOutput {
    pub model: ModelSpec,
    pub info: ModelInfo,
    pub order: usize,
    pub reports: Vec<MassReport>,
}

pub fn cmd_mass(run: &Run) -> Result<MassOutput, CliError> {
    let settings = run.mass_settings();
    let reports = run
        .qs
        .iter()
        .map(|&q| mass_report(run.map.as_ref(), q, &settings))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MassOutput {
        model: run.config.model.clone(),
        info: run.info.clone(),
        order: run.order,
        reports,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityResult {
    pub identity: String,
    pub q: Option<usize>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub worst_point: Option<Vec<f64>>,
    pub evaluated: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub model: ModelSpec,
    pub seed: u64,
    pub samples: usize,
    pub identities: Vec<IdentityResult>,
    /// Largest `|commutator term|` seen; zero on flat normal bundles.
    pub max_commutator_term: f64,
}

impl VerifyOutput {
    pub fn first_failure(&self) -> Option<&IdentityResult> {
        self.identities.iter().find(|r| !r.passed)
    }
}

/// `(identity, q, residual / tolerance-scale, tolerance)` rows for one point.
type Row = (&'static str, Option<usize>, f64, f64);

fn point_rows(
    map: &dyn GraphMap,
    x: &[f64],
    qs: &[usize],
    tol: &Tolerances,
    h: f64,
) -> Result<(Vec<Row>, f64), GbcError> {
    let pf = point_frame(map, x)?;
    let cf = curvature_frame(&pf);
    let mut rows: Vec<Row> = Vec::new();
    let first = first_order_residuals(map, &pf, 1e-5)?;
    let dg_scale = 1.0 + pf.dg.max_abs();
    rows.push((
        "metric_derivative",
        None,
        first.metric_derivative / dg_scale,
        tol.finite_difference,
    ));
    rows.push(("tangent_lift", None, first.tangent_lift, tol.identity));
    rows.push((
        "christoffel",
        None,
        first.christoffel / dg_scale,
        tol.identity,
    ));
    rows.push((
        "sylvester_determinant",
        None,
        first.determinant,
        tol.identity,
    ));
    rows.push(("jet_symmetry", None, first.jet_symmetry, tol.identity));
    let r_scale = 1.0 + cf.riemann.as_tensor().max_abs();
    // Richardson step pair keeps the truncation error O(h^4) near the blow-up set.
    let coarse = finite_difference_riemann(map, x, 2e-3)?;
    let fine = finite_difference_riemann(map, x, 1e-3)?;
    let fd = Riemann4::from_fn(pf.dim(), |a, b, c, d| {
        (4.0 * fine.get(a, b, c, d) - coarse.get(a, b, c, d)) / 3.0
    });
    rows.push((
        "gauss_equation",
        None,
        fd.max_abs_diff(&cf.riemann) / r_scale,
        tol.finite_difference,
    ));
    rows.push((
        "riemann_symmetries",
        None,
        cf.riemann.symmetry_residual(&pf.g) / r_scale,
        tol.identity,
    ));

    let level = map.level_function(x).map(|u| (level_set_frame(&u), u));
    let mut max_comm: f64 = 0.0;
    for &q in qs {
        let gf = GbcFrame::new(&pf, &cf, q)?;
        max_comm = max_comm.max(gf.commutator_term.abs());
        let p = flux_field_route_p(&pf, &cf, q)?;
        let t = flux_field_route_t(&pf, &cf, q)?;
        let xs = 1.0 + t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let dev = p
            .iter()
            .zip(&t)
            .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        rows.push(("flux_routes", Some(q), dev / xs, tol.identity * 0.1));
        let (l1, l2) = gbc_scalar_two_routes(&pf, &cf, q)?;
        rows.push((
            "lovelock_routes",
            Some(q),
            (l1 - l2).abs() / (1.0 + l1.abs()),
            tol.identity,
        ));
        // Richardson pair (h, 2h): the O(h²) truncation is large near a horizon.
        let fine = divergence_identity(map, x, q, h)?;
        let coarse = divergence_identity(map, x, q, 2.0 * h)?;
        let residual = ((4.0 * fine.lhs - coarse.lhs) / 3.0 - fine.rhs).abs();
        let scale = 1.0 + gf.lovelock.abs() + gf.commutator_term.abs();
        rows.push((
            "divergence_identity",
            Some(q),
            residual / scale,
            tol.divergence,
        ));
        if let Some((Ok(ls), u)) = &level {
            if let Ok(bf) = boundary_flux(&pf, &gf, ls) {
                rows.push((
                    "boundary_flux",
                    Some(q),
                    (bf.lhs - bf.rhs).abs() / (1.0 + bf.rhs.abs()),
                    tol.identity,
                ));
                let rc = restricted_curvature_checks(&pf, &cf, ls, u)?;
                let k2 = 1.0 + ls.shape.norm_squared();
                rows.push((
                    "restricted_second_fundamental_form",
                    Some(q),
                    rc.second_fundamental_form,
                    tol.identity,
                ));
                rows.push((
                    "restricted_curvature",
                    Some(q),
                    rc.curvature / k2,
                    tol.identity,
                ));
            }
        }
    }
    Ok((rows, max_comm))
}

/// The pointwise identity suite over seeded sample points.
pub fn identity_suite(
    map: &dyn GraphMap,
    qs: &[usize],
    points: &[Vec<f64>],
    tol: &Tolerances,
    h: f64,
) -> Result<(Vec<IdentityResult>, f64), GbcError> {
    let per_point = points
        .par_iter()
        .map(|x| point_rows(map, x, qs, tol, h))
        .collect::<Result<Vec<_>, _>>()?;
    let mut results: Vec<IdentityResult> = Vec::new();
    let mut max_comm: f64 = 0.0;
    for ((rows, comm), x) in per_point.iter().zip(points) {
        max_comm = max_comm.max(*comm);
        for &(name, q, res, t) in rows {
            let entry = match results.iter_mut().find(|r| r.identity == name && r.q == q) {
                Some(e) => e,
                None => {
                    results.push(IdentityResult {
                        identity: name.into(),
                        q,
                        max_residual: 0.0,
                        tolerance: t,
                        passed: true,
                        worst_point: None,
                        evaluated: 0,
                    });
                    results.last_mut().expect("just pushed")
                }
            };
            entry.evaluated += 1;
            if res > entry.max_residual || entry.worst_point.is_none() || !res.is_finite() {
                entry.max_residual = res;
                entry.worst_point = Some(x.clone());
            }
            entry.passed &= res <= t;
        }
    }
    Ok((results, max_comm))
}

pub fn cmd_verify(run: &Run) -> Result<VerifyOutput, CliError> {
    let points = sample_points(run.map.as_ref(), run.config.samples, run.seed);
    let h = 1e-3;
    let (identities, max_commutator_term) = identity_suite(
        run.map.as_ref(),
        &run.qs,
        &points,
        &run.config.tolerances,
        h,
    )?;
    Ok(VerifyOutput {
        model: run.config.model.clone(),
        seed: run.seed,
        samples: points.len(),
        identities,
        max_commutator_term,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenroseOutput {
    pub model: ModelSpec,
    pub verdicts: Vec<(usize, PenroseVerdict)>,
    pub guan_li: Vec<(usize, Vec<GuanLi>)>,
}

impl PenroseOutput {
    pub fn hypotheses_met(&self) -> bool {
        self.verdicts
            .iter()
            .all(|(_, v)| matches!(v, PenroseVerdict::Evaluated { .. }))
    }
}

pub fn cmd_penrose(run: &Run) -> Result<PenroseOutput, CliError> {
    let map = run.map.as_ref();
    let mut radii = [0.0; 4];
    if run.radii.len() != 4 {
        return Err(CliError::Config("penrose needs exactly four radii".into()));
    }
    radii.copy_from_slice(&run.radii);
    let settings = PenroseSettings {
        order: run.order,
        radii,
        tolerance: run.config.tolerances.hypothesis,
    };
    let mut verdicts = Vec::new();
    let mut guan_li = Vec::new();
    let rule = sphere_rule(map.dim(), run.order)?;
    for &q in &run.qs {
        verdicts.push((q, penrose_check(map, q, &settings)?));
        let mut per = Vec::new();
        for sigma in &map.domain().boundary {
            per.push(guan_li_check(sigma, q, &rule)?);
        }
        guan_li.push((q, per));
    }
    Ok(PenroseOutput {
        model: run.config.model.clone(),
        verdicts,
        guan_li,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRow {
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderRow {
    pub order: usize,
    pub surface_mass: f64,
    /// Change from the previous (lower) order.
    pub change: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceOutput {
    pub model: ModelSpec,
    pub q: usize,
    pub radii: Vec<f64>,
    pub surface_mass: Vec<f64>,
    pub orders: Vec<OrderRow>,
    pub point: Vec<f64>,
    pub steps: Vec<StepRow>,
    pub step_slope: Option<f64>,
    pub clip: Option<ClipStudy>,
}

pub fn cmd_convergence(run: &Run) -> Result<ConvergenceOutput, CliError> {
    let map = run.map.as_ref();
    let n = map.dim();
    let q = run.qs[0];
    let rule = sphere_rule(n, run.order)?;
    let surface = run
        .radii
        .iter()
        .map(|&r| surface_mass(map, q, r, &rule))
        .collect::<Result<Vec<_>, _>>()?;
    let r_last = *run.radii.last().expect("validated");
    let mut orders = Vec::new();
    let mut candidates = vec![(run.order / 2).max(1), run.order];
    if n <= 4 {
        candidates.push(2 * run.order);
    }
    candidates.dedup();
    let mut prev: Option<f64> = None;
    for o in candidates {
        let v = surface_mass(map, q, r_last, &sphere_rule(n, o)?)?;
        orders.push(OrderRow {
            order: o,
            surface_mass: v,
            change: prev.map(|p| (v - p).abs()),
        });
        prev = Some(v);
    }
    let point = sample_points(map, 1, run.seed).remove(0);
    let steps = run
        .config
        .fd_steps
        .iter()
        .map(|&h| {
            divergence_identity(map, &point, q, h).map(|d| StepRow {
                h,
                lhs: d.lhs,
                rhs: d.rhs,
                residual: d.residual,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let step_slope = if steps.iter().all(|s| s.residual > 0.0) {
        let hs: Vec<f64> = steps.iter().map(|s| s.h.ln()).collect();
        let rs: Vec<f64> = steps.iter().map(|s| s.residual.ln()).collect();
        Some(linear_slope(&hs, &rs))
    } else {
        None
    };
    let clip = match run.config.model.horizon() {
        Some(profile) if run.info.flat_normal_bundle && run.config.compute_bulk => {
            let brule = sphere_rule(n, run.config.bulk_order)?;
            Some(clip_study(
                map,
                &profile,
                q,
                &run.config.clip_deltas,
                &brule,
                &run.config.bulk,
            )?)
        }
        _ => None,
    };
    Ok(ConvergenceOutput {
        model: run.config.model.clone(),
        q,
        radii: run.radii.clone(),
        surface_mass: surface,
        orders,
        point,
        steps,
        step_slope,
        clip,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub spec: ModelSpec,
    pub info: ModelInfo,
}

pub fn cmd_catalog() -> Result<Vec<CatalogEntry>, CliError> {
    ModelSpec::catalog()
        .into_iter()
        .map(|spec| {
            Ok(CatalogEntry {
                info: spec.info()?,
                spec,
            })
        })
        .collect()
}

fn say(quiet: bool, line: String) {
    if !quiet {
        println!("{line}");
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    if cli.command == Command::Catalog {
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let entries = cmd_catalog()?;
        write_json(&out, "catalog.json", &entries, ReportFormat::Pretty)?;
        let rows: Vec<Vec<String>> = entries
            .iter()
            .map(|e| {
                vec![
                    e.info.name.clone(),
                    e.info.n.to_string(),
                    e.info.m.to_string(),
                    num(e.info.tau),
                    e.info.flat_normal_bundle.to_string(),
                    format!("{:?}", e.info.supported_q),
                ]
            })
            .collect();
        write_csv(
            &out,
            "catalog.csv",
            &["name", "n", "m", "tau", "flat_normal_bundle", "supported_q"],
            &rows,
        )?;
        for e in &entries {
            say(
                cli.quiet,
                format!(
                    "{:<24} n={} m={} tau={:.3} q={:?}",
                    e.info.name, e.info.n, e.info.m, e.info.tau, e.info.supported_q
                ),
            );
        }
        return Ok(exit::OK);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = load_config(path)?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let format = config.report_format;
    let run = Run::new(config, cli.order, cli.seed)?;
    match cli.command {
        Command::Mass => {
            let report = cmd_mass(&run)?;
            write_json(&out, "mass_report.json", &report, format)?;
            let mut rows = Vec::new();
            for r in &report.reports {
                for (i, radius) in r.radii.iter().enumerate() {
                    let adm = r.adm_surface.get(i);
                    rows.push(vec![
                        r.q.to_string(),
                        num(*radius),
                        num(r.surface_mass[i].value),
                        num(r.surface_mass[i].error),
                        adm.map_or(String::new(), |a| num(a.value)),
                        adm.map_or(String::new(), |a| num(a.error)),
                    ]);
                }
            }
            write_csv(
                &out,
                "mass_convergence.csv",
                &[
                    "q",
                    "r",
                    "surface_mass",
                    "surface_error",
                    "adm",
                    "adm_error",
                ],
                &rows,
            )?;
            let mut failed = Vec::new();
            for r in &report.reports {
                say(
                    cli.quiet,
                    format!(
                        "q={} m_q = {:.6} ± {:.1e}",
                        r.q, r.extrapolated.value, r.extrapolated.error
                    ),
                );
                if let Some(res) = r.residual_theorem {
                    say(
                        cli.quiet,
                        format!(
                            "q={} surface − bulk − boundary = {:.3e} ± {:.1e}",
                            r.q, res.value, res.error
                        ),
                    );
                }
                failed.extend(r.diagnostics.iter().map(|d| format!("q={}: {d}", r.q)));
            }
            if failed.is_empty() {
                Ok(exit::OK)
            } else {
                Err(CliError::Numerical(failed.join("; ")))
            }
        }
        Command::Verify => {
            let report = cmd_verify(&run)?;
            write_json(&out, "verify_report.json", &report, format)?;
            let rows: Vec<Vec<String>> = report
                .identities
                .iter()
                .map(|r| {
                    vec![
                        r.identity.clone(),
                        r.q.map_or(String::new(), |q| q.to_string()),
                        num(r.max_residual),
                        num(r.tolerance),
                        r.passed.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &out,
                "verify_residuals.csv",
                &["identity", "q", "max_residual", "tolerance", "passed"],
                &rows,
            )?;
            for r in &report.identities {
                let q = r.q.map_or(String::new(), |q| format!(" q={q}"));
                let mark = if r.passed { "ok  " } else { "FAIL" };
                say(
                    cli.quiet,
                    format!(
                        "{mark} {:<36}{q:<5} {:.2e} (tol {:.0e})",
                        r.identity, r.max_residual, r.tolerance
                    ),
                );
            }
            say(
                cli.quiet,
                format!("max |commutator term| = {:.3e}", report.max_commutator_term),
            );
            match report.first_failure() {
                Some(f) => Err(CliError::Identity(format!(
                    "{} failed at x = {:?} (residual {:e})",
                    f.identity,
                    f.worst_point.as_deref().unwrap_or(&[]),
                    f.max_residual
                ))),
                None => Ok(exit::OK),
            }
        }
        Command::Penrose => {
            let report = cmd_penrose(&run)?;
            write_json(&out, "penrose_report.json", &report, format)?;
            let mut rows = Vec::new();
            for (q, v) in &report.verdicts {
                match v {
                    PenroseVerdict::Evaluated {
                        mass,
                        area,
                        rhs,
                        margin,
                        ..
                    } => {
                        say(
                            cli.quiet,
                            format!(
                                "q={q} m_q = {:.6}, bound = {:.6}, margin = {:.3e} ± {:.1e}",
                                mass.value, rhs, margin.value, margin.error
                            ),
                        );
                        rows.push(vec![
                            q.to_string(),
                            "penrose".into(),
                            num(mass.value),
                            num(*rhs),
                            num(margin.value),
                            num(margin.error),
                            num(area.value),
                        ]);
                    }
                    PenroseVerdict::HypothesesNotMet {
                        hypothesis, detail, ..
                    } => {
                        say(
                            cli.quiet,
                            format!("q={q} hypotheses not met: {hypothesis} ({detail})"),
                        );
                    }
                }
            }
            for (q, gl) in &report.guan_li {
                for g in gl {
                    say(
                        cli.quiet,
                        format!("q={q} guan-li margin = {:.3e}", g.margin),
                    );
                    rows.push(vec![
                        q.to_string(),
                        "guan_li".into(),
                        num(g.lhs),
                        num(g.rhs),
                        num(g.margin),
                        String::new(),
                        num(g.area),
                    ]);
                }
            }
            write_csv(
                &out,
                "penrose_margins.csv",
                &["q", "check", "lhs", "rhs", "margin", "margin_error", "area"],
                &rows,
            )?;
            if report.hypotheses_met() {
                Ok(exit::OK)
            } else {
                Err(CliError::Hypotheses("see penrose_report.json".into()))
            }
        }
        Command::Convergence => {
            let report = cmd_convergence(&run)?;
            write_json(&out, "convergence_report.json", &report, format)?;
            let rows: Vec<Vec<String>> = report
                .radii
                .iter()
                .zip(&report.surface_mass)
                .map(|(r, m)| vec![num(*r), num(*m)])
                .collect();
            write_csv(&out, "convergence_radii.csv", &["r", "surface_mass"], &rows)?;
            let rows: Vec<Vec<String>> = report
                .orders
                .iter()
                .map(|o| {
                    vec![
                        o.order.to_string(),
                        num(o.surface_mass),
                        o.change.map_or(String::new(), num),
                    ]
                })
                .collect();
            write_csv(
                &out,
                "convergence_order.csv",
                &["order", "surface_mass", "change"],
                &rows,
            )?;
            let rows: Vec<Vec<String>> = report
                .steps
                .iter()
                .map(|s| vec![num(s.h), num(s.lhs), num(s.rhs), num(s.residual)])
                .collect();
            write_csv(
                &out,
                "convergence_steps.csv",
                &["h", "lhs", "rhs", "residual"],
                &rows,
            )?;
            if let Some(c) = &report.clip {
                let rows: Vec<Vec<String>> = c
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            num(r.delta),
                            num(r.level),
                            num(r.bulk.value),
                            num(r.weighted_boundary),
                            num(r.total),
                        ]
                    })
                    .collect();
                write_csv(
                    &out,
                    "convergence_clip.csv",
                    &["delta", "level", "bulk", "weighted_boundary", "total"],
                    &rows,
                )?;
            }
            if let Some(s) = report.step_slope {
                say(
                    cli.quiet,
                    format!("divergence identity step slope = {s:.3}"),
                );
            }
            for o in &report.orders {
                say(
                    cli.quiet,
                    format!("order {}: surface mass {:.10}", o.order, o.surface_mass),
                );
            }
            Ok(exit::OK)
        }
        Command::Catalog => unreachable!("handled above"),
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::CONFIG_ERROR
            } else {
                exit::OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, name: &str, body: &str) -> String {
        let path = dir.join(name);
        fs::write(&path, body).unwrap();
        path.display().to_string()
    }

    fn invoke(cmd: &str, config: Option<&str>, out: &Path, extra: &[&str]) -> i32 {
        let mut args = vec![
            "gbc-mass".to_string(),
            cmd.into(),
            "--quiet".into(),
            "--out".into(),
            out.display().to_string(),
        ];
        if let Some(c) = config {
            args.push("--config".into());
            args.push(c.into());
        }
        args.extend(extra.iter().map(|s| s.to_string()));
        run(args)
    }

    const SCHWARZSCHILD: &str =
        r#"{"model": {"name": "schwarzschild", "n": 3, "q": 1, "mass": 1.0}, "samples": 8}"#;

    #[test]
    fn catalog_writes_json_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(invoke("catalog", None, dir.path(), &[]), exit::OK);
        let entries: Vec<CatalogEntry> =
            serde_json::from_str(&fs::read_to_string(dir.path().join("catalog.json")).unwrap())
                .unwrap();
        assert_eq!(entries.len(), ModelSpec::catalog().len());
        let csv = fs::read_to_string(dir.path().join("catalog.csv")).unwrap();
        assert_eq!(csv.lines().count(), entries.len() + 1);
    }

    #[test]
    fn verify_passes_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "s.json", SCHWARZSCHILD);
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        assert_eq!(invoke("verify", Some(&cfg), &a, &["--seed", "7"]), exit::OK);
        assert_eq!(invoke("verify", Some(&cfg), &b, &["--seed", "7"]), exit::OK);
        for f in ["verify_report.json", "verify_residuals.csv"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        }
    }

    #[test]
    fn corrupted_second_derivatives_fail_the_metric_identity() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"model": {"name": "corrupted", "factor": 1.01,
            "inner": {"name": "schwarzschild", "n": 3, "q": 1, "mass": 1.0}}, "samples": 8}"#;
        let cfg = write_config(dir.path(), "c.json", body);
        assert_eq!(
            invoke("verify", Some(&cfg), dir.path(), &[]),
            exit::IDENTITY_FAILURE
        );
        let run = Run::new(load_config(Path::new(&cfg)).unwrap(), None, 0).unwrap();
        let report = cmd_verify(&run).unwrap();
        let failure = report.first_failure().unwrap();
        assert_eq!(failure.identity, "metric_derivative");
        assert!(failure.worst_point.is_some());
    }

    #[test]
    fn configuration_errors_exit_with_two() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.json").display().to_string();
        assert_eq!(
            invoke("mass", Some(&missing), dir.path(), &[]),
            exit::CONFIG_ERROR
        );
        assert_eq!(invoke("verify", None, dir.path(), &[]), exit::CONFIG_ERROR);
        for body in [
            r#"{"model": {"name": "schwarzschild", "n": 3, "q": 1, "mass": 1.0}, "unknown": 1}"#,
            r#"{"model": {"name": "schwarzschild", "n": 3, "q": 1, "mass": 1.0}, "q": [2]}"#,
            r#"{"model": {"name": "schwarzschild", "n": 3, "q": 1, "mass": -1.0}}"#,
            r#"{"model": {"name": "schwarzschild", "n": 3, "q": 1, "mass": 1.0}, "radii": [40, 20, 80]}"#,
            r#"{"model": {"name": "schwarzschild", "n": 3, "q": 1, "mass": 1.0}, "fd_steps": [1e-3, 1e-2, 1e-4]}"#,
            "not json",
        ] {
            let cfg = write_config(dir.path(), "bad.json", body);
            assert_eq!(
                invoke("mass", Some(&cfg), dir.path(), &[]),
                exit::CONFIG_ERROR,
                "{body}"
            );
        }
        assert_eq!(run(["gbc-mass", "frobnicate"]), exit::CONFIG_ERROR);
    }

    #[test]
    fn penrose_without_horizon_exits_with_four() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            "k.json",
            r#"{"model": {"name": "skew", "n": 3}}"#,
        );
        assert_eq!(
            invoke("penrose", Some(&cfg), dir.path(), &["--order", "6"]),
            exit::HYPOTHESES_NOT_MET
        );
        let report: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join("penrose_report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report["verdicts"][0][1]["status"], "hypotheses-not-met");
    }

    #[test]
    fn non_integrable_density_exits_with_three() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"model": {"name": "radial_multigraph", "n": 3, "inner_radius": 1.0,
            "profiles": [{"kind": "power", "amplitude": 0.5, "exponent": -0.8}]},
            "q": [1], "bulk_order": 4}"#;
        let cfg = write_config(dir.path(), "p.json", body);
        assert_eq!(
            invoke("mass", Some(&cfg), dir.path(), &["--order", "8"]),
            exit::NUMERICAL_FAILURE
        );
        let report: MassOutput =
            serde_json::from_str(&fs::read_to_string(dir.path().join("mass_report.json")).unwrap())
                .unwrap();
        assert!(report.reports[0].numerical_failure());
    }

    #[test]
    fn mass_and_convergence_on_smooth_extension_model() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"model": {"name": "mass_profile", "n": 3, "q": 1, "mass": 0.5, "excess": 0.5,
            "truncation": 1.5}, "bulk_order": 4, "bulk": {"radial_points": 12}}"#;
        let cfg = write_config(dir.path(), "m.json", body);
        assert_eq!(
            invoke("mass", Some(&cfg), dir.path(), &["--order", "12"]),
            exit::OK
        );
        let report: MassOutput =
            serde_json::from_str(&fs::read_to_string(dir.path().join("mass_report.json")).unwrap())
                .unwrap();
        assert_eq!(report.order, 12);
        let r = &report.reports[0];
        assert!((r.extrapolated.value - 1.0).abs() < 1e-6);
        assert!(r.residual_theorem.unwrap().value.abs() < 1e-6);
        assert!(dir.path().join("mass_convergence.csv").exists());
        assert_eq!(
            invoke("convergence", Some(&cfg), dir.path(), &["--order", "8"]),
            exit::OK
        );
        let conv: ConvergenceOutput = serde_json::from_str(
            &fs::read_to_string(dir.path().join("convergence_report.json")).unwrap(),
        )
        .unwrap();
        assert!((conv.step_slope.unwrap() - 2.0).abs() < 0.2);
    }
}
