//! Property checks behind one trait, looked up by name.
//!
//! Every check reads a shared [`CheckContext`], which builds the atlases, the
//! Legendre solver and the pair scans once and hands them to whichever
//! checks ask first.

use std::cell::OnceCell;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::atlas::{
    convexity_certificate, family_scan, overlap_check, sharpness_check, ConeAtlas, ConfirmedAtlas, RegionClass,
    SampleLabel,
};
use crate::catalogue::{CatalogueEntry, Fixture};
use crate::error::{LabError, Result};
use crate::inequalities::{
    classify_hyperplane, growth_scan, hyperplane_normal, hyperplane_through_kernel, scan_pairs, support_scan,
    HyperplaneClass, PairScan, EQUALITY_MARGIN,
};
use crate::lagrangian::{LagrangianSpec, Reversibility};
use crate::legendre::{
    antipodal_momentum_pair, antisymmetry_ray, dual_norm, on_shell_injectivity_probe, polar_membership,
    symmetrized_legendre, symmetrized_legendre_solve, DualNormProbe, LegendreSolver, PolarClass,
};
use crate::metric::{
    beem_validity_scan, certify_parameter, euler_residuals, scan_directions, CausalLabel, EulerResiduals,
    MetricSource, ParameterCertificate, Signature, ValidityVerdict, EPS_SIG,
};
use crate::sampling::{log_uniform, negated, norm, random_unit_vector, scaled, stream};
use crate::sphere::{default_count, default_strategy, sample_sphere, SphereStrategy};

/// Names accepted by `check --property`, besides `all`.
pub const PROPERTY_NAMES: [&str; 10] = [
    "validity",
    "euler",
    "cones",
    "convexity",
    "cs",
    "triangle",
    "legendre",
    "hamiltonian",
    "dualnorm",
    "borsuk",
];

pub const EULER_TOLERANCE: f64 = 1e-6;
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-8;
pub const HAMILTONIAN_TOLERANCE: f64 = 1e-9;
pub const CLASSICAL_TOLERANCE: f64 = 1e-12;
pub const DUAL_HESSIAN_TOLERANCE: f64 = 1e-5;
pub const DUAL_HESSIAN_STEP: f64 = 1e-4;
pub const DUAL_NORM_GAP: f64 = 0.01;
/// Unit directions used as dual-norm test points satisfy `2L <= -DUAL_DEPTH`.
pub const DUAL_DEPTH: f64 = 0.3;
pub const RESTART_AGREEMENT: f64 = 1e-8;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
pub const SOLUTION_TOLERANCE: f64 = 1e-8;
pub const TRIVIAL_TOLERANCE: f64 = 1e-10;
pub const GRADIENT_FORM_TOLERANCE: f64 = 1e-8;
pub const PARAMETER_TOLERANCE: f64 = 1e-4;
pub const PARAMETER_CEILING: f64 = 1e3;

const TAG_EULER: u64 = 1;
const TAG_REVERSE: u64 = 2;
const TAG_PAIRS: u64 = 3;
const TAG_CHORDS: u64 = 4;
const TAG_TRIPS: u64 = 5;
const TAG_POINTS: u64 = 6;
const TAG_PROBE: u64 = 7;
const TAG_SUPPORT: u64 = 8;
const TAG_GROWTH: u64 = 9;
const TAG_PLANES: u64 = 10;
const TAG_BORSUK: u64 = 11;
const TAG_INJECTIVE: u64 = 12;

fn sub_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
}

/// Sample sizes and seed shared by every check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub seed: u64,
    /// First-resolution sphere samples; the dimension default if unset.
    pub samples: Option<usize>,
    pub strategy: Option<SphereStrategy>,
    pub pairs: usize,
    pub chords: usize,
    pub validity_samples: usize,
    pub dual_samples: usize,
    pub euler_samples: usize,
    pub round_trips: usize,
    pub dual_points: usize,
    pub hyperplanes: usize,
    pub support_trials: usize,
    pub growth_trials: usize,
    pub family_points: usize,
    pub borsuk_vectors: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            seed: 1,
            samples: None,
            strategy: None,
            pairs: 100_000,
            chords: 100_000,
            validity_samples: 4000,
            dual_samples: 100_000,
            euler_samples: 100,
            round_trips: 1000,
            dual_points: 20,
            hyperplanes: 5,
            support_trials: 2000,
            growth_trials: 1000,
            family_points: 10,
            borsuk_vectors: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub property: String,
    pub status: Status,
    pub verdict: String,
    /// Whether the observed verdict is the one the catalogue expects, when
    /// it expects anything.
    pub matches_expected: Option<bool>,
    pub details: Value,
}

impl CheckOutcome {
    /// Passes when the property holds and nothing contradicts the
    /// expectations.
    pub fn judged(property: &str, holds: bool, verdict: impl Into<String>, matches_expected: Option<bool>, details: Value) -> Self {
        let status = if holds && matches_expected != Some(false) {
            Status::Pass
        } else {
            Status::Fail
        };
        CheckOutcome {
            property: property.to_string(),
            status,
            verdict: verdict.into(),
            matches_expected,
            details,
        }
    }

    pub fn skipped(property: &str, reason: impl Into<String>) -> Self {
        let reason = reason.into();
        CheckOutcome {
            property: property.to_string(),
            status: Status::Skipped,
            verdict: "SKIPPED".into(),
            matches_expected: None,
            details: json!({ "reason": reason }),
        }
    }

    pub fn error(property: &str, e: &LabError) -> Self {
        CheckOutcome {
            property: property.to_string(),
            status: Status::Fail,
            verdict: "ERROR".into(),
            matches_expected: None,
            details: json!({ "error": e.to_string() }),
        }
    }
}

fn pass_word(holds: bool) -> &'static str {
    if holds {
        "PASS"
    } else {
        "FAIL"
    }
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

/// Shared, lazily built state of one analysis run.
pub struct CheckContext {
    pub entry: CatalogueEntry,
    pub config: CheckConfig,
    validity: OnceCell<ValidityVerdict>,
    reversibility: OnceCell<Reversibility>,
    certificate: OnceCell<Option<std::result::Result<ParameterCertificate, String>>>,
    atlas: OnceCell<std::result::Result<ConfirmedAtlas, String>>,
    solver: OnceCell<std::result::Result<LegendreSolver, String>>,
    pair_scans: OnceCell<std::result::Result<Vec<PairScan>, String>>,
}

fn cached<T>(cell: &OnceCell<std::result::Result<T, String>>, build: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(|| build().map_err(|e| e.to_string()))
        .as_ref()
        .map_err(|e| LabError::precondition(e.clone()))
}

impl CheckContext {
    pub fn new(entry: CatalogueEntry, config: CheckConfig) -> Self {
        CheckContext {
            entry,
            config,
            validity: OnceCell::new(),
            reversibility: OnceCell::new(),
            certificate: OnceCell::new(),
            atlas: OnceCell::new(),
            solver: OnceCell::new(),
            pair_scans: OnceCell::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn dimension(&self) -> usize {
        self.entry.dimension()
    }

    pub fn sample_count(&self) -> usize {
        self.config.samples.unwrap_or_else(|| default_count(self.dimension()))
    }

    pub fn strategy(&self) -> SphereStrategy {
        self.config.strategy.unwrap_or_else(|| default_strategy(self.dimension()))
    }

    /// Signature scan of the Lagrangian; metric fields are not scanned here.
    pub fn validity(&self) -> Option<&ValidityVerdict> {
        let spec = self.entry.spec()?;
        Some(
            self.validity
                .get_or_init(|| beem_validity_scan(spec, self.config.validity_samples, self.seed())),
        )
    }

    /// The declared reversibility, or the observed one if undeclared.
    pub fn reversibility(&self) -> Reversibility {
        *self.reversibility.get_or_init(|| match self.entry.spec() {
            None => Reversibility::Unknown,
            Some(spec) if spec.reversibility() != Reversibility::Unknown => spec.reversibility(),
            Some(spec) => observed_reversibility(
                spec,
                &scan_directions(spec.dimension(), self.config.validity_samples, sub_seed(self.seed(), TAG_REVERSE)),
            ),
        })
    }

    /// Certified parameter range for entries that belong to a family.
    pub fn certificate(&self) -> Option<Result<&ParameterCertificate>> {
        let cell = self.certificate.get_or_init(|| {
            let family = self.entry.family()?;
            let range = self.entry.expected.parameter.as_ref()?;
            let current = self.entry.parameters().get(&range.name).copied().unwrap_or(range.default);
            let probe = if current > range.lower { current } else { range.default };
            Some(
                certify_parameter(
                    family,
                    range.lower,
                    probe,
                    PARAMETER_CEILING,
                    self.config.validity_samples,
                    self.seed(),
                    PARAMETER_TOLERANCE,
                )
                .map_err(|e| e.to_string()),
            )
        });
        cell.as_ref()
            .map(|r| r.as_ref().map_err(|e| LabError::precondition(e.clone())))
    }

    pub fn atlas(&self) -> Result<&ConfirmedAtlas> {
        cached(&self.atlas, || {
            let spec = self.lagrangian()?;
            ConfirmedAtlas::build(spec, self.strategy(), self.sample_count(), self.seed())
        })
    }

    pub fn solver(&self) -> Result<&LegendreSolver> {
        cached(&self.solver, || LegendreSolver::new(self.lagrangian()?))
    }

    /// One pair scan per timelike component of the coarse atlas.
    pub fn pair_scans(&self) -> Result<&Vec<PairScan>> {
        cached(&self.pair_scans, || {
            let spec = self.lagrangian()?;
            let atlas = &self.atlas()?.coarse;
            atlas
                .ids_of(RegionClass::TimelikeRegion)
                .into_iter()
                .map(|c| scan_pairs(spec, atlas, c, self.config.pairs, sub_seed(self.seed(), TAG_PAIRS) + c as u64))
                .collect()
        })
    }

    fn lagrangian(&self) -> Result<&LagrangianSpec> {
        self.entry
            .spec()
            .ok_or_else(|| LabError::precondition(format!("{} is a metric field without a Lagrangian", self.entry.name)))
    }

    /// The Lagrangian if it passed the signature scan, else the reason.
    pub fn lorentz_finsler(&self) -> std::result::Result<&LagrangianSpec, String> {
        let spec = self.lagrangian().map_err(|e| e.to_string())?;
        match self.validity() {
            Some(v) if v.is_valid() => Ok(spec),
            Some(v) => Err(format!("not a Lorentz-Finsler Lagrangian ({})", v.label())),
            None => Err("no validity verdict".into()),
        }
    }

    /// The timelike component around the time axis, or the first one.
    pub fn primary_component(&self) -> Result<usize> {
        let atlas = &self.atlas()?.coarse;
        let ids = atlas.ids_of(RegionClass::TimelikeRegion);
        let mut axis = vec![0.0; self.dimension()];
        axis[0] = 1.0;
        match atlas.locate(&axis) {
            Some(c) if ids.contains(&c) => Ok(c),
            _ => ids
                .first()
                .copied()
                .ok_or_else(|| LabError::precondition("no timelike component")),
        }
    }

    /// Unit timelike directions of `component` with `2L <= -depth`.
    fn timelike_directions(&self, spec: &LagrangianSpec, component: usize, count: usize, depth: f64, tag: u64) -> Vec<Vec<f64>> {
        let atlas = match self.atlas() {
            Ok(a) => &a.coarse,
            Err(_) => return Vec::new(),
        };
        let seed = sub_seed(self.seed(), tag);
        let mut out = Vec::with_capacity(count);
        for i in 0..(count as u64) * 10_000 {
            if out.len() == count {
                break;
            }
            let u = random_unit_vector(&mut stream(seed, i), spec.dimension());
            let Ok(l) = spec.eval_f64(&u) else { continue };
            if 2.0 * l <= -depth && atlas.locate(&u) == Some(component) {
                out.push(u);
            }
        }
        out
    }
}

fn observed_reversibility(spec: &LagrangianSpec, directions: &[Vec<f64>]) -> Reversibility {
    let mut compared = 0;
    for v in directions {
        if let (Ok(a), Ok(b)) = (spec.eval_f64(v), spec.eval_f64(&negated(v))) {
            compared += 1;
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Reversibility::No;
            }
        }
    }
    if compared == 0 {
        Reversibility::Unknown
    } else {
        Reversibility::Yes
    }
}

/// One named property suite.
pub trait PropertyCheck: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome>;
}

pub fn checks() -> Vec<Box<dyn PropertyCheck>> {
    vec![
        Box::new(Validity),
        Box::new(Euler),
        Box::new(Cones),
        Box::new(Convexity),
        Box::new(CauchySchwarz),
        Box::new(Triangle),
        Box::new(Legendre),
        Box::new(Hamiltonian),
        Box::new(DualNorm),
        Box::new(Borsuk),
    ]
}

pub fn check_by_name(name: &str) -> Result<Box<dyn PropertyCheck>> {
    checks()
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| LabError::UnknownName(format!("property {name}")))
}

/// Runs one check; errors become failing outcomes.
pub fn run_check(check: &dyn PropertyCheck, ctx: &CheckContext) -> CheckOutcome {
    check.run(ctx).unwrap_or_else(|e| CheckOutcome::error(check.name(), &e))
}

/// Runs the named property, or every property for `all`.
pub fn run_property(ctx: &CheckContext, property: &str) -> Result<Vec<CheckOutcome>> {
    if property == "all" {
        return Ok(checks().iter().map(|c| run_check(c.as_ref(), ctx)).collect());
    }
    let check = check_by_name(property)?;
    Ok(vec![run_check(check.as_ref(), ctx)])
}

macro_rules! require_lorentz {
    ($ctx:expr, $name:expr) => {
        match $ctx.lorentz_finsler() {
            Ok(spec) => spec,
            Err(reason) => return Ok(CheckOutcome::skipped($name, reason)),
        }
    };
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
struct EulerSummary {
    evaluated: usize,
    skipped: usize,
    max: EulerResidualsMax,
    /// Extremes of `g_v(v, v)` over the unit directions.
    min_quadratic: f64,
    max_quadratic: f64,
    tolerance: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
struct EulerResidualsMax {
    gradient: f64,
    contracted_index: f64,
    contracted_derivative: f64,
}

impl EulerSummary {
    fn finsler(&self) -> bool {
        self.max.gradient <= EULER_TOLERANCE
            && self.max.contracted_index <= EULER_TOLERANCE
            && self.max.contracted_derivative <= EULER_TOLERANCE
    }
}

fn euler_summary(source: &dyn MetricSource, samples: usize, seed: u64) -> Result<EulerSummary> {
    let mut s = EulerSummary {
        min_quadratic: f64::INFINITY,
        max_quadratic: f64::NEG_INFINITY,
        tolerance: EULER_TOLERANCE,
        ..Default::default()
    };
    for v in scan_directions(source.source_dimension(), samples, sub_seed(seed, TAG_EULER)) {
        let r: EulerResiduals = match euler_residuals(source, &v) {
            Ok(r) => r,
            Err(_) => {
                s.skipped += 1;
                continue;
            }
        };
        let g = source.metric_matrix(&v)?;
        let q = (0..v.len())
            .flat_map(|i| (0..v.len()).map(move |j| (i, j)))
            .map(|(i, j)| g[(i, j)] * v[i] * v[j])
            .sum::<f64>();
        s.evaluated += 1;
        s.max.gradient = s.max.gradient.max(r.gradient);
        s.max.contracted_index = s.max.contracted_index.max(r.contracted_index);
        s.max.contracted_derivative = s.max.contracted_derivative.max(r.contracted_derivative);
        s.min_quadratic = s.min_quadratic.min(q);
        s.max_quadratic = s.max_quadratic.max(q);
    }
    if s.evaluated == 0 {
        return Err(LabError::precondition("no sampled direction could be evaluated"));
    }
    Ok(s)
}

pub struct Validity;

impl PropertyCheck for Validity {
    fn name(&self) -> &'static str {
        "validity"
    }
    fn description(&self) -> &'static str {
        "Lorentzian signature of g_v on the whole sphere, reversibility and the certified parameter range"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let expected = &ctx.entry.expected;
        match &ctx.entry.fixture {
            Fixture::Field(field) => {
                let euler = euler_summary(field, ctx.config.euler_samples, ctx.seed())?;
                let lorentz = Signature::lorentzian(field.source_dimension());
                let (mut scanned, mut lorentzian) = (0, 0);
                for v in scan_directions(field.source_dimension(), ctx.config.validity_samples, ctx.seed()) {
                    let Ok(g) = field.metric_matrix(&v) else { continue };
                    scanned += 1;
                    let m = crate::metric::MetricTensor::from_matrix(g, &v);
                    if m.signature == lorentz && !m.degenerate {
                        lorentzian += 1;
                    }
                }
                let verdict = if !euler.finsler() {
                    "NON_FINSLER"
                } else if lorentzian == scanned {
                    "VALID_LORENTZ_FINSLER"
                } else {
                    "SIGNATURE_WITNESS"
                };
                let matches = expected.validity.as_ref().map(|e| e.value == verdict);
                Ok(CheckOutcome::judged(
                    self.name(),
                    verdict == "VALID_LORENTZ_FINSLER",
                    verdict,
                    matches,
                    json!({
                        "samples": ctx.config.validity_samples,
                        "seed": ctx.seed(),
                        "evaluated": scanned,
                        "lorentzian": lorentzian,
                        "euler": to_json(&euler),
                        "eps_sig": EPS_SIG,
                    }),
                ))
            }
            Fixture::Lagrangian(spec) => {
                let verdict = ctx.validity().expect("Lagrangian entries have a verdict");
                let declared = spec.reversibility();
                let observed = observed_reversibility(
                    spec,
                    &scan_directions(spec.dimension(), ctx.config.validity_samples, sub_seed(ctx.seed(), TAG_REVERSE)),
                );
                let mut holds = verdict.is_valid();
                let mut matches = expected.validity.as_ref().map(|e| e.value == verdict.label());
                if let Some(e) = &expected.reversible {
                    let same = e.value == ctx.reversibility();
                    matches = Some(matches.unwrap_or(true) && same);
                }
                let mut parameter = Value::Null;
                if verdict.is_valid() {
                    if let (Some(cert), Some(range)) = (ctx.certificate(), expected.parameter.as_ref()) {
                        let current = ctx.entry.parameters().get(&range.name).copied();
                        match cert {
                            Ok(cert) => {
                                let inside = current.is_none_or(|x| x <= cert.threshold);
                                holds &= inside;
                                parameter = json!({
                                    "name": range.name,
                                    "value": current,
                                    "certificate": to_json(cert),
                                    "within_certified_range": inside,
                                    "relative_tolerance": PARAMETER_TOLERANCE,
                                });
                            }
                            Err(e) => parameter = json!({ "name": range.name, "error": e.to_string() }),
                        }
                    }
                }
                Ok(CheckOutcome::judged(
                    self.name(),
                    holds,
                    verdict.label(),
                    matches,
                    json!({
                        "verdict": to_json(verdict),
                        "samples": ctx.config.validity_samples,
                        "seed": ctx.seed(),
                        "eps_sig": EPS_SIG,
                        "reversibility": { "declared": declared, "observed": observed, "used": ctx.reversibility() },
                        "parameter": parameter,
                    }),
                ))
            }
        }
    }
}

pub struct Euler;

impl PropertyCheck for Euler {
    fn name(&self) -> &'static str {
        "euler"
    }
    fn description(&self) -> &'static str {
        "homogeneity identities dL/dv = g_v v and (dg/dv) v = 0"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let s = euler_summary(ctx.entry.metric_source(), ctx.config.euler_samples, ctx.seed())?;
        let finsler = s.finsler();
        let matches = ctx.entry.expected.finsler.as_ref().map(|e| e.value == finsler);
        let mut details = to_json(&s);
        details["samples"] = json!(ctx.config.euler_samples);
        details["seed"] = json!(ctx.seed());
        Ok(CheckOutcome::judged(
            self.name(),
            finsler,
            if finsler { "FINSLER" } else { "NON_FINSLER" },
            matches,
            details,
        ))
    }
}

pub struct Cones;

impl Cones {
    fn field(&self, ctx: &CheckContext, source: &dyn MetricSource) -> Result<CheckOutcome> {
        let sample = sample_sphere(source.source_dimension(), ctx.sample_count(), ctx.strategy(), ctx.seed())?;
        let labels: Vec<SampleLabel> = sample
            .points
            .iter()
            .map(|v| match source.metric_matrix(v) {
                Ok(g) => {
                    let q: f64 = (0..v.len())
                        .flat_map(|i| (0..v.len()).map(move |j| (i, j)))
                        .map(|(i, j)| g[(i, j)] * v[i] * v[j])
                        .sum();
                    CausalLabel::from_value(q, 1.0).into()
                }
                Err(_) => SampleLabel::Hole,
            })
            .collect();
        let atlas = ConeAtlas::from_labels(sample, labels)?;
        let counts = atlas.counts();
        let matches = ctx
            .entry
            .expected
            .timelike_components
            .as_ref()
            .map(|e| e.value == counts.timelike);
        Ok(CheckOutcome::judged(
            self.name(),
            counts.timelike > 0,
            format!("{} timelike components", counts.timelike),
            matches,
            json!({
                "samples": atlas.sample.len(),
                "seed": ctx.seed(),
                "strategy": ctx.strategy(),
                "counts": to_json(&counts),
                "labels": to_json(&atlas.label_census()),
            }),
        ))
    }
}

impl PropertyCheck for Cones {
    fn name(&self) -> &'static str {
        "cones"
    }
    fn description(&self) -> &'static str {
        "cone components at two resolutions, sharpness, hyperplane normals, support functions and the family scan"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        if let Fixture::Field(f) = &ctx.entry.fixture {
            return self.field(ctx, f);
        }
        let spec = require_lorentz!(ctx, self.name());
        let confirmed = ctx.atlas()?;
        let atlas = &confirmed.coarse;
        let agreement = confirmed.agreement();
        let sharp = sharpness_check(atlas);
        let boundary = atlas.boundary_report();
        let timelike = atlas.ids_of(RegionClass::TimelikeRegion);
        let reversible = ctx.reversibility() == Reversibility::Yes;
        let paired = timelike.iter().all(|&c| atlas.components[c].opposite.is_some());
        let overlap = if timelike.len() >= 2 {
            to_json(&overlap_check(atlas, timelike[0], timelike[1])?)
        } else {
            Value::Null
        };

        let mut holds = agreement.agree
            && sharp.pass
            && boundary.timelike_spacelike_contacts == 0
            && !timelike.is_empty()
            && (!reversible || paired);

        let primary = ctx.primary_component()?;
        let solver = ctx.solver()?;
        let (planes, planes_ok) = hyperplane_suite(ctx, spec, solver, atlas, primary)?;
        holds &= planes_ok;

        let support = support_scan(spec, atlas, primary, ctx.config.support_trials, sub_seed(ctx.seed(), TAG_SUPPORT))?;
        holds &= support.mismatches_off_band == 0;

        let mut family = Value::Null;
        if let (Some(Ok(cert)), Some(f)) = (ctx.certificate(), ctx.entry.family()) {
            let n = ctx.config.family_points;
            let grid: Vec<f64> = (1..=n).map(|k| cert.threshold * k as f64 / (n + 1) as f64).collect();
            let scan = family_scan(f, &grid, ctx.strategy(), ctx.sample_count(), ctx.config.validity_samples, ctx.seed())?;
            let ok = scan.validity_failures.is_empty() && scan.constant_count == Some(agreement.coarse.timelike);
            holds &= ok;
            family = json!({ "pass": ok, "scan": to_json(&scan) });
        }

        let matches = ctx
            .entry
            .expected
            .timelike_components
            .as_ref()
            .map(|e| e.value == agreement.coarse.timelike && e.value == agreement.fine.timelike);
        let c = agreement.coarse;
        Ok(CheckOutcome::judged(
            self.name(),
            holds,
            format!("{} timelike, {} null, {} spacelike components", c.timelike, c.null, c.spacelike),
            matches,
            json!({
                "seed": ctx.seed(),
                "strategy": ctx.strategy(),
                "resolution": atlas.sample.resolution(),
                "agreement": to_json(&agreement),
                "labels": to_json(&atlas.label_census()),
                "boundary": to_json(&boundary),
                "sharpness": to_json(&sharp),
                "antipodal_pairing": timelike.iter().map(|&c| json!({ "component": c, "opposite": atlas.components[c].opposite })).collect::<Vec<_>>(),
                "overlap": overlap,
                "primary_component": primary,
                "hyperplanes": planes,
                "support": { "scan": to_json(&support), "agreement_rate": support.agreement_rate() },
                "family": family,
            }),
        ))
    }
}

fn hyperplane_suite(
    ctx: &CheckContext,
    spec: &LagrangianSpec,
    solver: &LegendreSolver,
    atlas: &ConeAtlas,
    primary: usize,
) -> Result<(Value, bool)> {
    let dim = spec.dimension();
    let coordinate: Vec<Vec<f64>> = (1..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e
        })
        .collect();
    let coordinate_class = classify_hyperplane(solver, atlas, &coordinate, primary)?;
    let coordinate_normal = if coordinate_class.class == HyperplaneClass::Timelike {
        Value::Null
    } else {
        match hyperplane_normal(solver, atlas, &coordinate, primary) {
            Ok(n) => to_json(&n),
            Err(e) => json!({ "error": e.to_string() }),
        }
    };

    let mut ok = true;
    let mut trials = Vec::new();
    for u in ctx.timelike_directions(spec, primary, ctx.config.hyperplanes, 0.1, TAG_PLANES) {
        let basis = hyperplane_through_kernel(solver, &u)?;
        let target = scaled(&u, 1.0 / (-2.0 * spec.eval_f64(&u)?).sqrt());
        match hyperplane_normal(solver, atlas, &basis, primary) {
            Ok(n) => {
                let distance = norm(&n.u.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>());
                let good = n.class == HyperplaneClass::Spacelike
                    && n.restart_spread <= RESTART_AGREEMENT
                    && n.normalization_residual <= NORMALIZATION_TOLERANCE
                    && n.orthogonality_residual <= NORMALIZATION_TOLERANCE
                    && distance <= RESTART_AGREEMENT;
                ok &= good;
                trials.push(json!({ "pass": good, "normal": to_json(&n), "distance_to_generator": distance }));
            }
            Err(e) => {
                ok = false;
                trials.push(json!({ "pass": false, "error": e.to_string() }));
            }
        }
    }
    if trials.is_empty() {
        ok = false;
    }
    Ok((
        json!({
            "coordinate": { "classification": to_json(&coordinate_class), "normal": coordinate_normal },
            "random_spacelike": trials,
            "restart_tolerance": RESTART_AGREEMENT,
            "normalization_tolerance": NORMALIZATION_TOLERANCE,
        }),
        ok,
    ))
}

pub struct Convexity;

impl PropertyCheck for Convexity {
    fn name(&self) -> &'static str {
        "convexity"
    }
    fn description(&self) -> &'static str {
        "random chords of the level sets 2L = -1 and of the closed cones"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let spec = require_lorentz!(ctx, self.name());
        let atlas = &ctx.atlas()?.coarse;
        let mut certs = Vec::new();
        for c in atlas.ids_of(RegionClass::TimelikeRegion) {
            for level in [1.0, 0.0] {
                let seed = sub_seed(ctx.seed(), TAG_CHORDS) + 2 * c as u64 + (level == 0.0) as u64;
                certs.push(convexity_certificate(spec, atlas, c, level, ctx.config.chords, seed)?);
            }
        }
        let holds = !certs.is_empty() && certs.iter().all(|c| c.pass);
        Ok(CheckOutcome::judged(
            self.name(),
            holds,
            pass_word(holds),
            None,
            json!({ "certificates": to_json(&certs) }),
        ))
    }
}

fn pair_summary(scans: &[PairScan]) -> Value {
    json!({
        "pairs": scans.iter().map(|s| s.pairs).sum::<usize>(),
        "min_cs_margin": scans.iter().map(|s| s.min_cs_margin).fold(f64::INFINITY, f64::min),
        "min_triangle_margin": scans.iter().map(|s| s.min_triangle_margin).fold(f64::INFINITY, f64::min),
        "equality_margin": EQUALITY_MARGIN,
        "scans": to_json(&scans),
    })
}

pub struct CauchySchwarz;

impl PropertyCheck for CauchySchwarz {
    fn name(&self) -> &'static str {
        "cs"
    }
    fn description(&self) -> &'static str {
        "reverse Cauchy-Schwarz inequality on same-cone causal pairs"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        require_lorentz!(ctx, self.name());
        let scans = ctx.pair_scans()?;
        let holds = !scans.is_empty()
            && scans.iter().all(|s| {
                s.min_cs_margin >= -EQUALITY_MARGIN
                    && s.nonproportional_equalities == 0
                    && s.gradient_form_max_residual <= GRADIENT_FORM_TOLERANCE
            });
        let mut details = pair_summary(scans);
        details["gradient_form_tolerance"] = json!(GRADIENT_FORM_TOLERANCE);
        Ok(CheckOutcome::judged(self.name(), holds, pass_word(holds), None, details))
    }
}

pub struct Triangle;

impl PropertyCheck for Triangle {
    fn name(&self) -> &'static str {
        "triangle"
    }
    fn description(&self) -> &'static str {
        "reverse triangle inequality and growth of L off the g_v-orthogonal complement"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let spec = require_lorentz!(ctx, self.name());
        let scans = ctx.pair_scans()?;
        let mut holds = !scans.is_empty()
            && scans
                .iter()
                .all(|s| s.min_triangle_margin >= -EQUALITY_MARGIN && s.nonproportional_equalities == 0);
        let mut details = pair_summary(scans);
        if ctx.reversibility() == Reversibility::Yes && spec.dimension() >= 3 {
            let atlas = &ctx.atlas()?.coarse;
            let growth = growth_scan(spec, atlas, ctx.primary_component()?, ctx.config.growth_trials, sub_seed(ctx.seed(), TAG_GROWTH))?;
            holds &= growth.failures == 0;
            details["orthogonal_growth"] = to_json(&growth);
        }
        Ok(CheckOutcome::judged(self.name(), holds, pass_word(holds), None, details))
    }
}

fn random_vector(seed: u64, i: u64, dim: usize) -> Vec<f64> {
    let mut rng = stream(seed, i);
    let u = random_unit_vector(&mut rng, dim);
    scaled(&u, log_uniform(&mut rng, 0.1, 10.0))
}

pub struct Legendre;

impl PropertyCheck for Legendre {
    fn name(&self) -> &'static str {
        "legendre"
    }
    fn description(&self) -> &'static str {
        "round trips through the Legendre map, polar cones and injectivity on the cone"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let spec = require_lorentz!(ctx, self.name());
        let solver = ctx.solver()?;
        let dim = spec.dimension();
        let seed = sub_seed(ctx.seed(), TAG_TRIPS);
        let (mut trips, mut failures, mut alternate) = (0, 0, 0);
        let mut max_residual = 0.0f64;
        let mut witness = None;
        for i in 0..ctx.config.round_trips as u64 {
            let v = random_vector(seed, i, dim);
            let Ok(p) = solver.legendre(&v) else { continue };
            trips += 1;
            match solver.inverse(&p, None) {
                Ok(inv) => {
                    let r = norm(&inv.v.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(&v);
                    if r > ROUND_TRIP_TOLERANCE && inv.may_be_nonunique && inv.residual <= ROUND_TRIP_TOLERANCE {
                        alternate += 1;
                        continue;
                    }
                    if r > max_residual {
                        max_residual = r;
                        witness = Some(v.clone());
                    }
                }
                Err(_) => {
                    failures += 1;
                    witness.get_or_insert(v.clone());
                }
            }
        }

        let atlas = &ctx.atlas()?.coarse;
        let primary = ctx.primary_component()?;
        let mut polar_hits = 0;
        let points = ctx.timelike_directions(spec, primary, ctx.config.dual_points, 0.0, TAG_POINTS);
        for u in &points {
            let p = solver.legendre(u)?;
            if polar_membership(solver, atlas, &p, primary)?.class == PolarClass::TimelikeDual {
                polar_hits += 1;
            }
        }
        let injectivity = if dim >= 3 {
            Some(on_shell_injectivity_probe(solver, atlas, primary, ctx.config.round_trips, sub_seed(ctx.seed(), TAG_INJECTIVE))?)
        } else {
            None
        };

        let holds = trips > 0
            && failures == 0
            && max_residual < ROUND_TRIP_TOLERANCE
            && polar_hits == points.len()
            && injectivity.is_none_or(|p| p.collisions == 0);
        Ok(CheckOutcome::judged(
            self.name(),
            holds,
            pass_word(holds),
            None,
            json!({
                "round_trips": trips,
                "seed": seed,
                "max_relative_residual": max_residual,
                "tolerance": ROUND_TRIP_TOLERANCE,
                "failures": failures,
                "alternate_preimages": alternate,
                "witness": witness,
                "polar": { "points": points.len(), "timelike_dual": polar_hits },
                "injectivity": to_json(&injectivity),
            }),
        ))
    }
}

pub struct Hamiltonian;

impl PropertyCheck for Hamiltonian {
    fn name(&self) -> &'static str {
        "hamiltonian"
    }
    fn description(&self) -> &'static str {
        "H(l(v)) = L(v) and the Hessian of H against the inverse fundamental tensor"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let spec = require_lorentz!(ctx, self.name());
        let solver = ctx.solver()?;
        let seed = sub_seed(ctx.seed(), TAG_TRIPS);
        let (mut points, mut failures) = (0, 0);
        let mut max_identity = 0.0f64;
        let mut max_classical: Option<f64> = None;
        for i in 0..ctx.config.round_trips as u64 {
            let v = random_vector(seed, i, spec.dimension());
            let (Ok(p), Ok(l)) = (solver.legendre(&v), spec.eval_f64(&v)) else { continue };
            points += 1;
            match solver.hamiltonian(&p) {
                Ok(h) => {
                    max_identity = max_identity.max((h - l).abs() / norm(&v).powi(2).max(1.0));
                    if let Some(c) = ctx.entry.classical_hamiltonian(&p) {
                        max_classical = Some(max_classical.unwrap_or(0.0).max((h - c).abs()));
                    }
                }
                Err(_) => failures += 1,
            }
        }
        let primary = ctx.primary_component()?;
        let mut max_hessian = 0.0f64;
        let dual = ctx.timelike_directions(spec, primary, ctx.config.dual_points, 0.0, TAG_POINTS);
        for u in &dual {
            let p = solver.legendre(u)?;
            max_hessian = max_hessian.max(solver.dual_hessian_check(&p, DUAL_HESSIAN_STEP)?);
        }
        let holds = points > 0
            && failures == 0
            && max_identity <= HAMILTONIAN_TOLERANCE
            && max_hessian < DUAL_HESSIAN_TOLERANCE
            && !dual.is_empty()
            && max_classical.is_none_or(|c| c <= CLASSICAL_TOLERANCE);
        Ok(CheckOutcome::judged(
            self.name(),
            holds,
            pass_word(holds),
            None,
            json!({
                "points": points,
                "seed": seed,
                "failures": failures,
                "max_identity_residual": max_identity,
                "identity_tolerance": HAMILTONIAN_TOLERANCE,
                "max_classical_residual": max_classical,
                "classical_tolerance": CLASSICAL_TOLERANCE,
                "dual_hessian": {
                    "points": dual.len(),
                    "step": DUAL_HESSIAN_STEP,
                    "max_deviation": max_hessian,
                    "tolerance": DUAL_HESSIAN_TOLERANCE,
                },
            }),
        ))
    }
}

pub struct DualNorm;

impl PropertyCheck for DualNorm {
    fn name(&self) -> &'static str {
        "dualnorm"
    }
    fn description(&self) -> &'static str {
        "sampled infimum of |p(v)| over F(v) = 1 against sqrt(2|H(p)|)"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let spec = require_lorentz!(ctx, self.name());
        let solver = ctx.solver()?;
        let atlas = &ctx.atlas()?.coarse;
        let primary = ctx.primary_component()?;
        let probe_seed = sub_seed(ctx.seed(), TAG_PROBE);
        let probe = DualNormProbe::new(atlas, primary, ctx.config.dual_samples, probe_seed)?;
        let mut records = Vec::new();
        let seed = sub_seed(ctx.seed(), TAG_POINTS);
        for (i, u) in ctx
            .timelike_directions(spec, primary, ctx.config.dual_points, DUAL_DEPTH, TAG_POINTS + 100)
            .into_iter()
            .enumerate()
        {
            let r = log_uniform(&mut stream(seed, 1_000_000 + i as u64), 0.1, 10.0);
            let p = solver.legendre(&scaled(&u, r))?;
            records.push((p.clone(), dual_norm(solver, atlas, &probe, &p)?));
        }
        let holds = !records.is_empty()
            && records
                .iter()
                .all(|(_, r)| r.sampled_inf >= r.closed_form * (1.0 - 1e-9) && r.relative_gap <= DUAL_NORM_GAP);
        let worst = records.iter().map(|(_, r)| r.relative_gap).fold(f64::NEG_INFINITY, f64::max);
        Ok(CheckOutcome::judged(
            self.name(),
            holds,
            pass_word(holds),
            None,
            json!({
                "samples": ctx.config.dual_samples,
                "seed": probe_seed,
                "directions_used": probe.directions_used(),
                "points": records.len(),
                "max_relative_gap": worst,
                "gap_tolerance": DUAL_NORM_GAP,
                "records": records.iter().map(|(p, r)| json!({ "p": p, "record": to_json(r) })).collect::<Vec<_>>(),
            }),
        ))
    }
}

pub struct Borsuk;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

impl PropertyCheck for Borsuk {
    fn name(&self) -> &'static str {
        "borsuk"
    }
    fn description(&self) -> &'static str {
        "antipodal momentum pairs, the symmetrized Legendre map and the antisymmetry ray"
    }
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let spec = require_lorentz!(ctx, self.name());
        let dim = spec.dimension();
        if dim < 3 {
            return Ok(CheckOutcome::skipped(self.name(), "the antipodal solvers need dimension at least 3"));
        }
        let solver = ctx.solver()?;
        let reversible = ctx.reversibility() == Reversibility::Yes;
        let mut ws: Vec<Vec<f64>> = vec![(0..dim).map(|i| [1.0, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005][i]).collect()];
        let seed = sub_seed(ctx.seed(), TAG_BORSUK);
        ws.extend((1..ctx.config.borsuk_vectors as u64).map(|i| random_unit_vector(&mut stream(seed, i), dim)));

        let mut holds = true;
        let mut max_trivial = 0.0f64;
        let mut rows = Vec::new();
        for w in &ws {
            let wn = norm(w);
            let mut row = json!({ "w": w });
            match antipodal_momentum_pair(spec, w) {
                Ok(pair) => {
                    let ok = pair.momentum_residual <= SOLUTION_TOLERANCE * wn.max(1.0)
                        && pair.difference_residual <= SOLUTION_TOLERANCE * wn.max(1.0);
                    let trivial = distance(&pair.v1, &negated(w)).max(distance(&pair.v2, w)) / wn;
                    holds &= ok;
                    max_trivial = max_trivial.max(trivial);
                    row["pair"] = json!({ "pass": ok, "solution": to_json(&pair), "distance_from_trivial": trivial });
                }
                Err(e) => {
                    holds = false;
                    row["pair"] = json!({ "pass": false, "error": e.to_string() });
                }
            }
            let q = symmetrized_legendre(spec, w)?;
            match symmetrized_legendre_solve(solver, &q) {
                Ok(sol) => {
                    let ok = sol.residual <= SOLUTION_TOLERANCE;
                    let trivial = distance(&sol.v, w) / wn;
                    holds &= ok;
                    if reversible {
                        max_trivial = max_trivial.max(trivial);
                    }
                    row["symmetrized"] = json!({ "pass": ok, "q": q, "solution": to_json(&sol), "distance_from_w": trivial });
                }
                Err(e) => {
                    holds = false;
                    row["symmetrized"] = json!({ "pass": false, "error": e.to_string() });
                }
            }
            match antisymmetry_ray(solver, w) {
                Ok(ray) => {
                    let ok = ray.residual <= SOLUTION_TOLERANCE && ray.s > 0.0;
                    holds &= ok;
                    max_trivial = max_trivial.max((ray.s - 1.0).abs());
                    row["ray"] = json!({ "pass": ok, "solution": to_json(&ray) });
                }
                Err(e) => {
                    holds = false;
                    row["ray"] = json!({ "pass": false, "error": e.to_string() });
                }
            }
            rows.push(row);
        }
        if reversible {
            holds &= max_trivial <= TRIVIAL_TOLERANCE;
        }
        let verdict = match (holds, reversible) {
            (false, _) => "FAIL",
            (true, true) => "TRIVIAL_SOLUTIONS",
            (true, false) => "SOLUTIONS_VERIFIED",
        };
        Ok(CheckOutcome::judged(
            self.name(),
            holds,
            verdict,
            None,
            json!({
                "reversible": reversible,
                "seed": seed,
                "solution_tolerance": SOLUTION_TOLERANCE,
                "trivial_tolerance": TRIVIAL_TOLERANCE,
                "max_distance_from_trivial": max_trivial,
                "vectors": rows,
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::get;

    fn small(name: &str) -> CheckContext {
        let config = CheckConfig {
            pairs: 2000,
            chords: 2000,
            dual_samples: 20_000,
            round_trips: 100,
            dual_points: 5,
            family_points: 2,
            borsuk_vectors: 2,
            hyperplanes: 2,
            support_trials: 300,
            growth_trials: 100,
            validity_samples: 1000,
            ..CheckConfig::default()
        };
        CheckContext::new(get(name).unwrap(), config)
    }

    #[test]
    fn registry_covers_every_name() {
        let names: Vec<&str> = checks().iter().map(|c| c.name()).collect();
        assert_eq!(names, PROPERTY_NAMES.to_vec());
        assert!(check_by_name("euler").is_ok());
        assert!(check_by_name("nope").is_err());
    }

    #[test]
    fn minkowski_passes_everything() {
        let ctx = small("minkowski2");
        for out in run_property(&ctx, "all").unwrap() {
            assert_eq!(out.status, Status::Pass, "{}: {}", out.property, out.details);
        }
    }

    #[test]
    fn randers_is_a_negative_control() {
        let ctx = small("randers4");
        let v = run_property(&ctx, "validity").unwrap().remove(0);
        assert_eq!(v.verdict, "DOMAIN_WITNESS");
        assert_eq!(v.status, Status::Fail);
        assert_eq!(v.matches_expected, Some(true));
        let cs = run_property(&ctx, "cs").unwrap().remove(0);
        assert_eq!(cs.status, Status::Skipped);
    }

    #[test]
    fn hopf_is_flagged() {
        let ctx = small("hopf4");
        let e = run_property(&ctx, "euler").unwrap().remove(0);
        assert_eq!(e.verdict, "NON_FINSLER");
        assert_eq!(e.matches_expected, Some(true));
        assert!(e.details["max"]["contracted_index"].as_f64().unwrap() > 0.1);
        let c = run_property(&ctx, "cones").unwrap().remove(0);
        assert_eq!(c.matches_expected, Some(true));
    }

    #[test]
    fn unknown_property_is_an_error() {
        let ctx = small("minkowski2");
        assert!(run_property(&ctx, "spin").is_err());
    }
}
