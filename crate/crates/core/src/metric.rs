//! The fundamental tensor and everything evaluated pointwise from it: the
//! metric `g_v`, its signature, the causal character of `v`, the Euler
//! identities forced by homogeneity and the Lorentz-Finsler validity scan.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::autodiff::fd_gradient;
use crate::error::{LabError, Result};
use crate::lagrangian::LagrangianSpec;
use crate::sampling::{norm, random_unit_vector, stream};

/// Relative eigenvalue threshold below which `g_v` counts as degenerate.
pub const EPS_SIG: f64 = 1e-9;
/// Threshold on `|2L(v)| / |v|^2` for the lightlike class.
pub const EPS_CLS: f64 = 1e-9;
/// Finite-difference step used for derivatives of `g`.
pub const METRIC_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl Signature {
    pub fn lorentzian(dimension: usize) -> Self {
        Signature {
            negative: 1,
            zero: 0,
            positive: dimension - 1,
        }
    }
}

/// `g_v` at a basepoint, with its sorted spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    pub matrix: DMatrix<f64>,
    pub basepoint: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub signature: Signature,
    pub degenerate: bool,
}

impl MetricTensor {
    /// Symmetrizes `matrix` and computes its spectrum and signature.
    pub fn from_matrix(matrix: DMatrix<f64>, basepoint: &[f64]) -> Self {
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(matrix.clone());
        let mut indexed: Vec<(usize, f64)> = eig.eigenvalues.iter().copied().enumerate().collect();
        indexed.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let eigenvalues: Vec<f64> = indexed.into_iter().map(|(_, x)| x).collect();
        let scale = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let eps = EPS_SIG * scale;
        let mut signature = Signature {
            negative: 0,
            zero: 0,
            positive: 0,
        };
        for &x in &eigenvalues {
            if x.abs() < eps || scale == 0.0 {
                signature.zero += 1;
            } else if x < 0.0 {
                signature.negative += 1;
            } else {
                signature.positive += 1;
            }
        }
        MetricTensor {
            degenerate: signature.zero > 0,
            matrix,
            basepoint: basepoint.to_vec(),
            eigenvalues,
            signature,
        }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_lorentzian(&self) -> bool {
        self.signature == Signature::lorentzian(self.dimension())
    }

    /// `g_v(a, b)`.
    pub fn apply(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.dimension();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += a[i] * self.matrix[(i, j)] * b[j];
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CausalLabel {
    Timelike,
    Lightlike,
    Spacelike,
}

impl CausalLabel {
    /// Label of a vector with `g_v(v, v) = two_l` and squared norm `norm2`.
    pub fn from_value(two_l: f64, norm2: f64) -> Self {
        let band = EPS_CLS * norm2;
        if two_l < -band {
            CausalLabel::Timelike
        } else if two_l.abs() <= band {
            CausalLabel::Lightlike
        } else {
            CausalLabel::Spacelike
        }
    }

    pub fn is_causal(self) -> bool {
        self != CausalLabel::Spacelike
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CausalLabel::Timelike => "TIMELIKE",
            CausalLabel::Lightlike => "LIGHTLIKE",
            CausalLabel::Spacelike => "SPACELIKE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalClass {
    pub label: CausalLabel,
    /// `g_v(v, v) = 2 L(v)`
    pub quadratic_value: f64,
}

/// `L(v)`.
pub fn eval_l(spec: &LagrangianSpec, v: &[f64]) -> Result<f64> {
    spec.eval_f64(v)
}

/// `dL/dv`, which equals `g_v v`.
pub fn gradient_l(spec: &LagrangianSpec, v: &[f64]) -> Result<DVector<f64>> {
    Ok(spec.eval_taylor(v)?.gradient_vector())
}

/// The Hessian of `L` at `v` with its signature. A degenerate metric is
/// flagged on the result rather than reported as an error.
pub fn metric_at(spec: &LagrangianSpec, v: &[f64]) -> Result<MetricTensor> {
    let t = spec.eval_taylor(v)?;
    Ok(MetricTensor::from_matrix(t.hessian(), v))
}

pub fn classify(spec: &LagrangianSpec, v: &[f64]) -> Result<CausalClass> {
    let two_l = 2.0 * spec.eval_f64(v)?;
    Ok(CausalClass {
        label: CausalLabel::from_value(two_l, norm(v).powi(2)),
        quadratic_value: two_l,
    })
}

/// Anything that yields a direction-dependent metric on `V \ 0`.
pub trait MetricSource: Send + Sync {
    fn source_name(&self) -> String;
    fn source_dimension(&self) -> usize;
    fn metric_matrix(&self, v: &[f64]) -> Result<DMatrix<f64>>;
    /// `dL/dv` with `L = 1/2 g_v(v, v)`.
    fn lagrangian_gradient(&self, v: &[f64]) -> Result<DVector<f64>>;
}

impl MetricSource for LagrangianSpec {
    fn source_name(&self) -> String {
        self.name()
    }
    fn source_dimension(&self) -> usize {
        self.dimension()
    }
    fn metric_matrix(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.eval_taylor(v)?.hessian())
    }
    fn lagrangian_gradient(&self, v: &[f64]) -> Result<DVector<f64>> {
        gradient_l(self, v)
    }
}

/// The Lorentzian metric on `R^4 \ 0` built from the Hopf fibration,
/// `dr^2 + r^2 [-(dpsi - cos(theta) dphi)^2 + dtheta^2 + sin^2(theta) dphi^2]`.
///
/// It is 0-homogeneous and Lorentzian, yet `g_v(v, v) = |v|^2 > 0`
/// everywhere, and it violates the Euler identity `(dg/dv^a) v = 0`: it
/// does not come from any Finsler Lagrangian.
///
/// Chart: with `c = cos(theta/2)`, `s = sin(theta/2)`,
/// `v = r (c cos((psi+phi)/2), c sin((psi+phi)/2), s cos((psi-phi)/2), s sin((psi-phi)/2))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HopfField;

impl HopfField {
    /// `(r, psi, theta, phi)` of a Cartesian point.
    pub fn chart(v: &[f64]) -> [f64; 4] {
        let r = norm(v);
        let a = v[1].atan2(v[0]);
        let b = v[3].atan2(v[2]);
        let theta = 2.0 * (v[2].hypot(v[3])).atan2(v[0].hypot(v[1]));
        [r, a + b, theta, a - b]
    }

    /// Cartesian point of chart coordinates.
    pub fn embed(q: [f64; 4]) -> [f64; 4] {
        let [r, psi, theta, phi] = q;
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let (a, b) = ((psi + phi) / 2.0, (psi - phi) / 2.0);
        [r * c * a.cos(), r * c * a.sin(), r * s * b.cos(), r * s * b.sin()]
    }

    fn jacobian(q: [f64; 4]) -> DMatrix<f64> {
        let [r, psi, theta, phi] = q;
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let (a, b) = ((psi + phi) / 2.0, (psi - phi) / 2.0);
        let (ca, sa, cb, sb) = (a.cos(), a.sin(), b.cos(), b.sin());
        // columns: d/dr, d/dpsi, d/dtheta, d/dphi
        DMatrix::from_row_slice(
            4,
            4,
            &[
                c * ca, -0.5 * r * c * sa, -0.5 * r * s * ca, -0.5 * r * c * sa,
                c * sa, 0.5 * r * c * ca, -0.5 * r * s * sa, 0.5 * r * c * ca,
                s * cb, -0.5 * r * s * sb, 0.5 * r * c * cb, 0.5 * r * s * sb,
                s * sb, 0.5 * r * s * cb, 0.5 * r * c * sb, -0.5 * r * s * cb,
            ],
        )
    }

    fn chart_metric(q: [f64; 4]) -> DMatrix<f64> {
        let [r, _, theta, _] = q;
        let (ct, st) = (theta.cos(), theta.sin());
        let r2 = r * r;
        let mut g = DMatrix::zeros(4, 4);
        g[(0, 0)] = 1.0;
        g[(1, 1)] = -r2;
        g[(1, 3)] = r2 * ct;
        g[(3, 1)] = r2 * ct;
        g[(2, 2)] = r2;
        g[(3, 3)] = r2 * (st * st - ct * ct);
        g
    }
}

impl MetricSource for HopfField {
    fn source_name(&self) -> String {
        "hopf4".into()
    }
    fn source_dimension(&self) -> usize {
        4
    }
    fn metric_matrix(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        if v.len() != 4 {
            return Err(LabError::precondition("the Hopf metric lives in dimension 4"));
        }
        let q = Self::chart(v);
        let (s12, s34) = (v[0].hypot(v[1]), v[2].hypot(v[3]));
        if q[0] == 0.0 || s12 < 1e-12 * q[0] || s34 < 1e-12 * q[0] {
            return Err(LabError::domain(v, "Hopf chart is singular on the fibre axes"));
        }
        let jinv = Self::jacobian(q)
            .try_inverse()
            .ok_or_else(|| LabError::domain(v, "singular Hopf chart Jacobian"))?;
        let g = jinv.transpose() * Self::chart_metric(q) * jinv;
        Ok((&g + g.transpose()) * 0.5)
    }
    fn lagrangian_gradient(&self, v: &[f64]) -> Result<DVector<f64>> {
        fd_gradient(
            |p| {
                let g = self.metric_matrix(p)?;
                let pv = DVector::from_column_slice(p);
                Ok(0.5 * pv.dot(&(&g * &pv)))
            },
            v,
            METRIC_FD_STEP,
        )
    }
}

/// Residuals of the homogeneity identities at the unit vector `u = v/|v|`:
/// (i) `|dL/dv - g_u u|`, (ii) `|(dg_{mu nu}/dv^a) u^nu|`,
/// (iii) `|(dg_{mu nu}/dv^a) u^a|`, as max-abs norms divided by
/// `max(1, |g_u|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerResiduals {
    pub gradient: f64,
    pub contracted_index: f64,
    pub contracted_derivative: f64,
}

/// Smallest step tried when the metric varies too fast for the default one.
const MIN_FD_STEP: f64 = 1e-7;

fn central_difference(source: &dyn MetricSource, u: &[f64], a: usize, h: f64) -> Result<DMatrix<f64>> {
    let mut p = u.to_vec();
    p[a] = u[a] + h;
    let gp = source.metric_matrix(&p)?;
    p[a] = u[a] - h;
    let gm = source.metric_matrix(&p)?;
    Ok((gp - gm) / (2.0 * h))
}

/// `dg/dv^a` by Richardson-extrapolated central differences, shrinking the
/// step until two step sizes agree.
fn metric_derivative(source: &dyn MetricSource, u: &[f64], a: usize) -> Result<DMatrix<f64>> {
    let mut h = METRIC_FD_STEP;
    let mut coarse = central_difference(source, u, a, h);
    loop {
        let fine = central_difference(source, u, a, h / 2.0);
        if let (Ok(c), Ok(f)) = (&coarse, &fine) {
            let gap = (f - c).amax();
            if gap <= 1e-6 * f.amax().max(1.0) || h <= MIN_FD_STEP {
                return Ok((f * 4.0 - c) / 3.0);
            }
        }
        if h <= MIN_FD_STEP {
            return fine;
        }
        h /= 4.0;
        coarse = central_difference(source, u, a, h);
    }
}

pub fn euler_residuals(source: &dyn MetricSource, v: &[f64]) -> Result<EulerResiduals> {
    let n = source.source_dimension();
    let r = norm(v);
    if r == 0.0 {
        return Err(LabError::precondition("v must be nonzero"));
    }
    let u: Vec<f64> = v.iter().map(|x| x / r).collect();
    let uv = DVector::from_column_slice(&u);
    let g = source.metric_matrix(&u)?;
    let scale = g.amax().max(1.0);
    let grad = source.lagrangian_gradient(&u)?;
    let gradient = (grad - &g * &uv).amax() / scale;

    let derivs = (0..n)
        .map(|a| metric_derivative(source, &u, a))
        .collect::<Result<Vec<_>>>()?;
    let contracted_index = derivs
        .iter()
        .map(|d| (d * &uv).amax())
        .fold(0.0f64, f64::max)
        / scale;
    let mut contracted_derivative = 0.0f64;
    for mu in 0..n {
        for nu in 0..n {
            let s: f64 = (0..n).map(|a| derivs[a][(mu, nu)] * u[a]).sum();
            contracted_derivative = contracted_derivative.max(s.abs());
        }
    }
    Ok(EulerResiduals {
        gradient,
        contracted_index,
        contracted_derivative: contracted_derivative / scale,
    })
}

/// Outcome of scanning the unit sphere for Lorentzian signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValidityVerdict {
    ValidLorentzFinsler { samples: usize, seed: u64 },
    DomainWitness { witness: Vec<f64>, detail: String },
    DegenerateWitness { witness: Vec<f64>, eigenvalues: Vec<f64> },
    SignatureWitness { witness: Vec<f64>, signature: Signature },
}

impl ValidityVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidityVerdict::ValidLorentzFinsler { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            ValidityVerdict::ValidLorentzFinsler { .. } => "VALID_LORENTZ_FINSLER",
            ValidityVerdict::DomainWitness { .. } => "DOMAIN_WITNESS",
            ValidityVerdict::DegenerateWitness { .. } => "DEGENERATE_WITNESS",
            ValidityVerdict::SignatureWitness { .. } => "SIGNATURE_WITNESS",
        }
    }
}

/// Seeded uniform directions used by the pointwise scans; direction `i`
/// depends only on `(seed, i)`.
pub fn scan_directions(dimension: usize, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..samples)
        .map(|i| random_unit_vector(&mut stream(seed, i as u64), dimension))
        .collect()
}

/// Checks evaluability, non-degeneracy and signature `(1, 0, n)` at
/// `samples` random unit directions. The first failing direction is the
/// witness.
pub fn beem_validity_scan(spec: &LagrangianSpec, samples: usize, seed: u64) -> ValidityVerdict {
    let dirs = scan_directions(spec.dimension(), samples.max(1), seed);
    validity_on(spec, &dirs, seed)
}

pub fn validity_on(spec: &LagrangianSpec, directions: &[Vec<f64>], seed: u64) -> ValidityVerdict {
    let lorentz = Signature::lorentzian(spec.dimension());
    for v in directions {
        let m = match metric_at(spec, v) {
            Ok(m) => m,
            Err(e) => {
                return ValidityVerdict::DomainWitness {
                    witness: v.clone(),
                    detail: e.to_string(),
                }
            }
        };
        if m.degenerate {
            return ValidityVerdict::DegenerateWitness {
                witness: v.clone(),
                eigenvalues: m.eigenvalues,
            };
        }
        if m.signature != lorentz {
            return ValidityVerdict::SignatureWitness {
                witness: v.clone(),
                signature: m.signature,
            };
        }
    }
    ValidityVerdict::ValidLorentzFinsler {
        samples: directions.len(),
        seed,
    }
}

/// Counts of each causal class among `directions`; points outside the
/// domain are counted as holes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalCensus {
    pub timelike: usize,
    pub lightlike: usize,
    pub spacelike: usize,
    pub holes: usize,
}

pub fn causal_census(spec: &LagrangianSpec, directions: &[Vec<f64>]) -> CausalCensus {
    let mut c = CausalCensus::default();
    for v in directions {
        match classify(spec, v) {
            Ok(cls) => match cls.label {
                CausalLabel::Timelike => c.timelike += 1,
                CausalLabel::Lightlike => c.lightlike += 1,
                CausalLabel::Spacelike => c.spacelike += 1,
            },
            Err(_) => c.holes += 1,
        }
    }
    c
}

/// Largest parameter value of a family found valid by bisection on the
/// signature scan, bracketed by the smallest value found invalid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterCertificate {
    pub threshold: f64,
    pub first_invalid: f64,
    pub samples: usize,
    pub seed: u64,
    pub witness: ValidityVerdict,
}

/// Bisects the validity boundary of `family` on a fixed set of directions.
///
/// `start` must be valid. The upper bracket is found by doubling from
/// `probe`, up to `max_param`.
pub fn certify_parameter<F>(
    family: F,
    start: f64,
    probe: f64,
    max_param: f64,
    samples: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<ParameterCertificate>
where
    F: Fn(f64) -> Result<LagrangianSpec>,
{
    let first = family(start)?;
    let dirs = scan_directions(first.dimension(), samples, seed);
    if !validity_on(&first, &dirs, seed).is_valid() {
        return Err(LabError::precondition(format!(
            "family is not valid at the starting parameter {start}"
        )));
    }
    let mut lo = start;
    let mut hi = probe.max(start);
    let mut witness;
    loop {
        let verdict = validity_on(&family(hi)?, &dirs, seed);
        if !verdict.is_valid() {
            witness = verdict;
            break;
        }
        lo = hi;
        hi = if hi == 0.0 { 1e-3 } else { hi * 2.0 };
        if hi > max_param {
            return Err(LabError::precondition(format!(
                "no invalid parameter found up to {max_param}"
            )));
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        let verdict = validity_on(&family(mid)?, &dirs, seed);
        if verdict.is_valid() {
            lo = mid;
        } else {
            hi = mid;
            witness = verdict;
        }
    }
    Ok(ParameterCertificate {
        threshold: lo,
        first_invalid: hi,
        samples,
        seed,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::fd_hessian;

    fn mink(n: usize) -> LagrangianSpec {
        LagrangianSpec::minkowski(n).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_l(&mink(2), &[1.0, 0.0, 0.0]).unwrap(), -0.5);
        let beem = LagrangianSpec::beem3(0.05).unwrap();
        assert_eq!(eval_l(&beem, &[1.0, 0.0, 0.0]).unwrap(), -0.5);
        let randers = LagrangianSpec::randers4(1.0, 1.0).unwrap();
        assert!(matches!(
            eval_l(&randers, &[1.0, 1.0, 0.0, 0.0]),
            Err(LabError::Domain { .. })
        ));
        assert!(eval_l(&mink(2), &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = gradient_l(&mink(2), &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.as_slice(), &[-1.0, 0.0, 0.0]);
        let g = gradient_l(&mink(2), &[2.0, 1.0, 0.0]).unwrap();
        assert_eq!(g.as_slice(), &[-2.0, 1.0, 0.0]);

        let beem = LagrangianSpec::beem3(0.05).unwrap();
        let v = [1.0, 0.3, 0.2];
        let exact = gradient_l(&beem, &v).unwrap();
        let fd = fd_gradient(|p| beem.eval_f64(p), &v, 1e-5).unwrap();
        assert!((exact - fd).amax() < 1e-7);
    }

    #[test]
    fn minkowski_metric_is_constant() {
        let m = metric_at(&mink(2), &[0.3, -2.0, 1.0]).unwrap();
        let eta = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0]));
        assert_eq!(m.matrix, eta);
        assert_eq!(m.signature, Signature { negative: 1, zero: 0, positive: 2 });
        assert_eq!(m.eigenvalues, vec![-1.0, 1.0, 1.0]);
    }

    #[test]
    fn beem_metric_on_axis_is_minkowski() {
        let beem = LagrangianSpec::beem3(0.05).unwrap();
        let m = metric_at(&beem, &[1.0, 0.0, 0.0]).unwrap();
        let eta = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0]));
        assert!((&m.matrix - &eta).amax() < 1e-9);
        // the finite-difference oracle agrees near the axis
        let fd = fd_hessian(|p| beem.eval_f64(p), &[1.0, 1e-3, 0.0], 1e-4).unwrap();
        assert!(fd.iter().all(|x| x.is_finite()));
        assert!((fd - eta).amax() < 1e-6);
    }

    #[test]
    fn beem_signature_scan() {
        let beem = LagrangianSpec::beem3(0.05).unwrap();
        for v in scan_directions(3, 1000, 11) {
            let m = metric_at(&beem, &v).unwrap();
            assert_eq!(m.signature, Signature::lorentzian(3), "{v:?}");
        }
    }

    #[test]
    fn classification_examples() {
        let m = mink(2);
        let c = classify(&m, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!((c.label, c.quadratic_value), (CausalLabel::Timelike, -1.0));
        let c = classify(&m, &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!((c.label, c.quadratic_value), (CausalLabel::Lightlike, 0.0));
        let c = classify(&m, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!((c.label, c.quadratic_value), (CausalLabel::Spacelike, 1.0));
    }

    #[test]
    fn euler_residuals_vanish_for_minkowski() {
        let r = euler_residuals(&mink(2), &[0.4, 1.0, -0.3]).unwrap();
        assert_eq!(r.gradient, 0.0);
        assert_eq!(r.contracted_index, 0.0);
        assert_eq!(r.contracted_derivative, 0.0);
    }

    #[test]
    fn euler_residuals_small_for_beem() {
        let beem = LagrangianSpec::beem3(0.05).unwrap();
        for v in scan_directions(3, 100, 4) {
            let r = euler_residuals(&beem, &v).unwrap();
            assert!(r.gradient < 1e-10, "{r:?}");
            assert!(r.contracted_index < 1e-5, "{v:?} {r:?}");
            assert!(r.contracted_derivative < 1e-5, "{v:?} {r:?}");
        }
    }

    #[test]
    fn hopf_field_violates_euler_identity() {
        let hopf = HopfField;
        for v in scan_directions(4, 100, 8) {
            let g = hopf.metric_matrix(&v).unwrap();
            let m = MetricTensor::from_matrix(g.clone(), &v);
            assert!(m.is_lorentzian(), "{:?}", m.eigenvalues);
            // g_v(v, v) = |v|^2
            assert!((m.apply(&v, &v) - 1.0).abs() < 1e-10);
            let r = euler_residuals(&hopf, &v).unwrap();
            assert!(r.contracted_index > 0.1, "{r:?}");
            // 0-homogeneous
            let g2 = hopf.metric_matrix(&v.iter().map(|x| 3.0 * x).collect::<Vec<_>>()).unwrap();
            assert!((g2 - g).amax() < 1e-10);
        }
    }

    #[test]
    fn hopf_chart_round_trips() {
        let q = [1.3, 0.4, 1.1, -0.7];
        let v = HopfField::embed(q);
        let back = HopfField::chart(&v);
        for i in 0..4 {
            assert!((q[i] - back[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn validity_scan_examples() {
        assert!(beem_validity_scan(&mink(3), 500, 1).is_valid());
        let randers = LagrangianSpec::randers4(1.0, 0.5).unwrap();
        match beem_validity_scan(&randers, 500, 1) {
            ValidityVerdict::DomainWitness { witness, .. } => {
                let s: f64 = witness[1..].iter().map(|x| x * x).sum();
                assert!(witness[0] * witness[0] <= s);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certifies_a_finite_alpha_for_beem3() {
        let cert = certify_parameter(LagrangianSpec::beem3, 0.0, 0.05, 1e3, 4000, 1, 1e-3).unwrap();
        assert!(cert.threshold > 0.05, "{cert:?}");
        assert!(matches!(cert.witness, ValidityVerdict::SignatureWitness { .. } | ValidityVerdict::DegenerateWitness { .. }));
        assert!(!beem_validity_scan(&LagrangianSpec::beem3(cert.first_invalid).unwrap(), 4000, 1).is_valid());
    }
}
