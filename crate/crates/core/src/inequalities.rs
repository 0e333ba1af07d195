//! Reverse Cauchy-Schwarz and triangle inequalities inside one causal cone,
//! orthogonal growth, hyperplanes through the origin and the support
//! description of a cone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atlas::{ConeAtlas, RegionClass, SampleLabel, PROPORTIONAL_ANGLE};
use crate::error::{LabError, Result};
use crate::lagrangian::{LagrangianSpec, Reversibility};
use crate::legendre::LegendreSolver;
use crate::metric::{CausalLabel, EPS_CLS};
use crate::newton::{damped_newton, MAX_ITERATIONS};
use crate::sampling::{dot, log_uniform, norm, random_unit_vector, ray_angle, scaled, stream};

/// Margins below this count as equality.
pub const EQUALITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityMargin {
    pub margin: f64,
    pub left: f64,
    pub right: f64,
    /// The inputs are proportional within `PROPORTIONAL_ANGLE`.
    pub equality_case: bool,
}

/// `sqrt(-2L(v))`; zero for lightlike `v`, and `-sqrt(2L)` for spacelike
/// `v` so that leaving the cone shows up as a negative margin.
fn lorentz_norm(two_l: f64, norm2: f64) -> f64 {
    match CausalLabel::from_value(two_l, norm2) {
        CausalLabel::Timelike => (-two_l).sqrt(),
        CausalLabel::Lightlike => 0.0,
        CausalLabel::Spacelike => -two_l.sqrt(),
    }
}

fn cs_unchecked(spec: &LagrangianSpec, v1: &[f64], v2: &[f64]) -> Result<InequalityMargin> {
    let t1 = spec.eval_taylor(v1)?;
    let two_l2 = 2.0 * spec.eval_f64(v2)?;
    let left = -dot(&t1.gradient(), v2);
    let right = lorentz_norm(2.0 * t1.value(), dot(v1, v1)) * lorentz_norm(two_l2, dot(v2, v2));
    Ok(InequalityMargin {
        margin: left - right,
        left,
        right,
        equality_case: ray_angle(v1, v2) < PROPORTIONAL_ANGLE,
    })
}

fn triangle_unchecked(spec: &LagrangianSpec, v1: &[f64], v2: &[f64]) -> Result<InequalityMargin> {
    let v: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| a + b).collect();
    let n = |x: &[f64]| -> Result<f64> { Ok(lorentz_norm(2.0 * spec.eval_f64(x)?, dot(x, x))) };
    let left = n(&v)?;
    let right = n(v1)? + n(v2)?;
    Ok(InequalityMargin {
        margin: left - right,
        left,
        right,
        equality_case: ray_angle(v1, v2) < PROPORTIONAL_ANGLE,
    })
}

/// Timelike component holding causal `v`, through its null shell if needed.
pub fn causal_component(atlas: &ConeAtlas, v: &[f64]) -> Option<usize> {
    let c = atlas.locate(v)?;
    match atlas.components[c].class {
        RegionClass::TimelikeRegion => Some(c),
        RegionClass::NullShell => atlas.null_owner(c),
        RegionClass::SpacelikeRegion => None,
    }
}

fn same_cone(spec: &LagrangianSpec, atlas: &ConeAtlas, v1: &[f64], v2: &[f64]) -> Result<usize> {
    let mut seen = Vec::new();
    for v in [v1, v2] {
        if norm(v) == 0.0 {
            return Err(LabError::precondition("inputs must be nonzero"));
        }
        let cls = crate::metric::classify(spec, v)?;
        if !cls.label.is_causal() {
            return Err(LabError::precondition(format!(
                "{v:?} is {} (2L = {:e})",
                cls.label.as_str(),
                cls.quadratic_value
            )));
        }
        seen.push(causal_component(atlas, v));
    }
    match (seen[0], seen[1]) {
        (Some(a), Some(b)) if a == b => Ok(a),
        (a, b) => Err(LabError::precondition(format!(
            "inputs lie in different causal components ({a:?} and {b:?})"
        ))),
    }
}

/// `-g_{v1}(v1, v2) - sqrt(-g_{v1}(v1, v1)) sqrt(-g_{v2}(v2, v2))`.
pub fn reverse_cs_margin(spec: &LagrangianSpec, atlas: &ConeAtlas, v1: &[f64], v2: &[f64]) -> Result<InequalityMargin> {
    same_cone(spec, atlas, v1, v2)?;
    cs_unchecked(spec, v1, v2)
}

/// `F(v1 + v2) - F(v1) - F(v2)` with `F = sqrt(-2L)`.
pub fn reverse_triangle_margin(
    spec: &LagrangianSpec,
    atlas: &ConeAtlas,
    v1: &[f64],
    v2: &[f64],
) -> Result<InequalityMargin> {
    same_cone(spec, atlas, v1, v2)?;
    triangle_unchecked(spec, v1, v2)
}

/// Difference between `v2 . grad sqrt(-2L)` at `v1`, differentiated
/// through the chain rule, and `-g_{v1}(v1, v2) / sqrt(-2L(v1))`.
pub fn gradient_form_residual(spec: &LagrangianSpec, v1: &[f64], v2: &[f64]) -> Result<f64> {
    let t = spec.eval_taylor(v1)?;
    if t.value() >= 0.0 {
        return Err(LabError::precondition("the gradient form needs a timelike v1"));
    }
    let through_chain = dot(&t.scale(-2.0).sqrt()?.gradient(), v2);
    let l = spec.eval_f64(v1)?;
    let direct = -dot(&t.gradient(), v2) / (-2.0 * l).sqrt();
    Ok((through_chain - direct).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScan {
    pub component: usize,
    pub pairs: usize,
    pub seed: u64,
    pub proportional_pairs: usize,
    pub min_cs_margin: f64,
    pub min_triangle_margin: f64,
    /// Pairs with margin below `EQUALITY_MARGIN`.
    pub cs_equality_cases: usize,
    pub triangle_equality_cases: usize,
    /// Equality-level margins on pairs that are not proportional.
    pub nonproportional_equalities: usize,
    pub gradient_form_max_residual: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

impl PairScan {
    pub fn pass(&self) -> bool {
        self.min_cs_margin >= -EQUALITY_MARGIN
            && self.min_triangle_margin >= -EQUALITY_MARGIN
            && self.nonproportional_equalities == 0
    }
}

/// Causal directions of a component: interior samples and shell points.
pub fn causal_pool(atlas: &ConeAtlas, component: usize) -> Vec<Vec<f64>> {
    let mut pool: Vec<Vec<f64>> = atlas.components[component]
        .members
        .iter()
        .filter(|&&m| atlas.labels[m] == SampleLabel::Timelike)
        .map(|&m| atlas.sample.points[m].clone())
        .collect();
    pool.extend(atlas.null_points_of(component).into_iter().map(|p| p.point.clone()));
    pool
}

/// Random same-cone pairs with log-uniform radii in `[0.1, 10]`; every
/// hundredth pair is deliberately proportional.
pub fn scan_pairs(
    spec: &LagrangianSpec,
    atlas: &ConeAtlas,
    component: usize,
    pairs: usize,
    seed: u64,
) -> Result<PairScan> {
    check_timelike(atlas, component)?;
    let pool = causal_pool(atlas, component);
    if pool.len() < 2 {
        return Err(LabError::precondition("component has fewer than two causal samples"));
    }
    let mut scan = PairScan {
        component,
        pairs,
        seed,
        proportional_pairs: 0,
        min_cs_margin: f64::INFINITY,
        min_triangle_margin: f64::INFINITY,
        cs_equality_cases: 0,
        triangle_equality_cases: 0,
        nonproportional_equalities: 0,
        gradient_form_max_residual: 0.0,
        witness: None,
    };
    for k in 0..pairs {
        let mut rng = stream(seed, k as u64);
        let i = rand::Rng::gen_range(&mut rng, 0..pool.len());
        let j = if k % 100 == 99 { i } else { rand::Rng::gen_range(&mut rng, 0..pool.len()) };
        let v1 = scaled(&pool[i], log_uniform(&mut rng, 0.1, 10.0));
        let v2 = scaled(&pool[j], log_uniform(&mut rng, 0.1, 10.0));
        let cs = cs_unchecked(spec, &v1, &v2)?;
        let tri = triangle_unchecked(spec, &v1, &v2)?;
        if cs.equality_case {
            scan.proportional_pairs += 1;
        }
        let worse = cs.margin < scan.min_cs_margin || tri.margin < scan.min_triangle_margin;
        scan.min_cs_margin = scan.min_cs_margin.min(cs.margin);
        scan.min_triangle_margin = scan.min_triangle_margin.min(tri.margin);
        let mut flagged = false;
        if cs.margin < EQUALITY_MARGIN {
            scan.cs_equality_cases += 1;
            flagged |= !cs.equality_case;
        }
        if tri.margin < EQUALITY_MARGIN {
            scan.triangle_equality_cases += 1;
            flagged |= !tri.equality_case;
        }
        if flagged {
            scan.nonproportional_equalities += 1;
        }
        if flagged || (worse && scan.witness.is_none() && (cs.margin < -EQUALITY_MARGIN || tri.margin < -EQUALITY_MARGIN)) {
            scan.witness.get_or_insert_with(|| (v1.clone(), v2.clone()));
        }
        if spec.eval_f64(&v1)? < -EPS_CLS * dot(&v1, &v1) {
            let r = gradient_form_residual(spec, &v1, &v2)? / (norm(&v2) * 1f64.max(norm(&v1)));
            scan.gradient_form_max_residual = scan.gradient_form_max_residual.max(r);
        }
    }
    Ok(scan)
}

fn check_timelike(atlas: &ConeAtlas, component: usize) -> Result<()> {
    match atlas.components.get(component) {
        Some(c) if c.class == RegionClass::TimelikeRegion => Ok(()),
        Some(_) => Err(LabError::precondition(format!("component {component} is not timelike"))),
        None => Err(LabError::IndexOutOfRange {
            index: component,
            dimension: atlas.components.len(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalGrowth {
    pub l_perturbed: f64,
    pub l_base: f64,
    /// `|g_v(v, w_perp)|` after projection.
    pub orthogonality: f64,
    pub pass: bool,
    pub strict: bool,
}

/// `L(v + w_perp) >= L(v)` for the `g_v`-orthogonal part `w_perp` of `w`.
pub fn orthogonal_growth(spec: &LagrangianSpec, v: &[f64], w: &[f64]) -> Result<OrthogonalGrowth> {
    if spec.reversibility() == Reversibility::No {
        return Err(LabError::precondition("orthogonal growth is stated for reversible Lagrangians"));
    }
    if spec.dimension() < 3 {
        return Err(LabError::precondition("orthogonal growth needs dimension at least 3"));
    }
    let t = spec.eval_taylor(v)?;
    let two_l = 2.0 * t.value();
    if CausalLabel::from_value(two_l, dot(v, v)) != CausalLabel::Timelike {
        return Err(LabError::precondition("v must be timelike"));
    }
    let lv = t.gradient();
    let coef = dot(&lv, w) / two_l;
    let w_perp: Vec<f64> = w.iter().zip(v).map(|(a, b)| a - coef * b).collect();
    let orthogonality = dot(&lv, &w_perp).abs();
    let moved: Vec<f64> = v.iter().zip(&w_perp).map(|(a, b)| a + b).collect();
    let l_perturbed = spec.eval_f64(&moved)?;
    let l_base = t.value();
    let tol = 1e-10 * dot(v, v).max(1.0);
    let pass = l_perturbed >= l_base - tol;
    let strict = norm(&w_perp) <= 1e-9 * norm(v) || l_perturbed > l_base;
    Ok(OrthogonalGrowth {
        l_perturbed,
        l_base,
        orthogonality,
        pass,
        strict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthScan {
    pub trials: usize,
    pub seed: u64,
    pub failures: usize,
    pub min_gain: f64,
    pub max_orthogonality: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

/// Random timelike `v` of a component against random `w`.
pub fn growth_scan(spec: &LagrangianSpec, atlas: &ConeAtlas, component: usize, trials: usize, seed: u64) -> Result<GrowthScan> {
    check_timelike(atlas, component)?;
    let interior: Vec<&Vec<f64>> = atlas.components[component]
        .members
        .iter()
        .filter(|&&m| atlas.labels[m] == SampleLabel::Timelike)
        .map(|&m| &atlas.sample.points[m])
        .collect();
    if interior.is_empty() {
        return Err(LabError::precondition("component has no timelike samples"));
    }
    let mut scan = GrowthScan {
        trials,
        seed,
        failures: 0,
        min_gain: f64::INFINITY,
        max_orthogonality: 0.0,
        witness: None,
    };
    for k in 0..trials {
        let mut rng = stream(seed, k as u64);
        let v = scaled(interior[rand::Rng::gen_range(&mut rng, 0..interior.len())], log_uniform(&mut rng, 0.1, 10.0));
        let w = scaled(&random_unit_vector(&mut rng, v.len()), log_uniform(&mut rng, 0.01, 10.0));
        let Ok(g) = orthogonal_growth(spec, &v, &w) else {
            scan.failures += 1;
            scan.witness.get_or_insert((v, w));
            continue;
        };
        scan.min_gain = scan.min_gain.min((g.l_perturbed - g.l_base) / dot(&v, &v));
        scan.max_orthogonality = scan.max_orthogonality.max(g.orthogonality / (norm(&v) * norm(&w)));
        if !(g.pass && g.strict) {
            scan.failures += 1;
            scan.witness.get_or_insert((v, w));
        }
    }
    Ok(scan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HyperplaneClass {
    Spacelike,
    Null,
    Timelike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneClassification {
    pub class: HyperplaneClass,
    /// Euclidean unit normal oriented to be non-positive on the cone.
    pub normal: Vec<f64>,
    /// Timelike samples of the cone strictly on each side of `W`.
    pub samples_above: usize,
    pub samples_below: usize,
    pub preimage: Option<Vec<f64>>,
}

/// Euclidean unit normal of the span of `basis`.
pub fn hyperplane_normal_vector(basis: &[Vec<f64>], dimension: usize) -> Result<Vec<f64>> {
    if basis.len() + 1 != dimension || basis.iter().any(|b| b.len() != dimension) {
        return Err(LabError::precondition(format!(
            "a hyperplane in dimension {dimension} needs {} basis vectors",
            dimension - 1
        )));
    }
    let mut m = DMatrix::zeros(dimension, dimension);
    for (j, b) in basis.iter().enumerate() {
        let s = norm(b);
        for i in 0..dimension {
            m[(i, j)] = if s > 0.0 { b[i] / s } else { 0.0 };
        }
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| LabError::precondition("SVD failed"))?;
    let mut order: Vec<usize> = (0..dimension).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smallest_kept = svd.singular_values[order[dimension - 2]];
    if smallest_kept < 1e-10 {
        return Err(LabError::precondition("hyperplane basis is rank deficient"));
    }
    Ok(u.column(order[dimension - 1]).iter().copied().collect())
}

/// Spacelike if the cone meets `W` only at the origin, null if `W` is
/// tangent to it, timelike if `W` cuts it.
pub fn classify_hyperplane(
    solver: &LegendreSolver,
    atlas: &ConeAtlas,
    basis: &[Vec<f64>],
    component: usize,
) -> Result<HyperplaneClassification> {
    check_timelike(atlas, component)?;
    let spec = solver.spec();
    let mut n = hyperplane_normal_vector(basis, spec.dimension())?;
    let (mut above, mut below) = (0, 0);
    for m in &atlas.components[component].members {
        if atlas.labels[*m] != SampleLabel::Timelike {
            continue;
        }
        let s = dot(&n, &atlas.sample.points[*m]);
        if s > 1e-12 {
            above += 1;
        } else if s < -1e-12 {
            below += 1;
        }
    }
    if above > below {
        n = n.iter().map(|x| -x).collect();
        std::mem::swap(&mut above, &mut below);
    }
    let mut out = HyperplaneClassification {
        class: HyperplaneClass::Timelike,
        normal: n.clone(),
        samples_above: above,
        samples_below: below,
        preimage: None,
    };
    if above > 0 {
        return Ok(out);
    }
    let Ok(inv) = solver.inverse(&n, None) else {
        return Ok(out);
    };
    let two_l = 2.0 * spec.eval_f64(&inv.v)?;
    out.class = match CausalLabel::from_value(two_l, dot(&inv.v, &inv.v)) {
        CausalLabel::Timelike if causal_component(atlas, &inv.v) == Some(component) => HyperplaneClass::Spacelike,
        CausalLabel::Lightlike if nearest_shell_owner(atlas, &inv.v) == Some(component) => HyperplaneClass::Null,
        _ => HyperplaneClass::Timelike,
    };
    out.preimage = Some(inv.v);
    Ok(out)
}

fn nearest_shell_owner(atlas: &ConeAtlas, v: &[f64]) -> Option<usize> {
    atlas
        .null_points
        .iter()
        .min_by(|a, b| ray_angle(&a.point, v).total_cmp(&ray_angle(&b.point, v)))
        .and_then(|p| p.component)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneNormal {
    pub u: Vec<f64>,
    pub class: HyperplaneClass,
    /// `max_i |g_u(u, w_i)|` over the unit basis.
    pub orthogonality_residual: f64,
    /// `|g_u(u, u) + 1|` when spacelike, `||u| - 1|` when null.
    pub normalization_residual: f64,
    pub restarts: usize,
    /// Largest distance between the restart solutions.
    pub restart_spread: f64,
    /// Distance to the normal obtained by inverting the Legendre map.
    pub legendre_route_distance: f64,
}

/// `u` in the cone with `g_u(u, w) = 0` on `W`, normalized by `g_u(u, u) = -1`
/// (or `|u| = 1` for a null hyperplane), from 10 starting points.
pub fn hyperplane_normal(
    solver: &LegendreSolver,
    atlas: &ConeAtlas,
    basis: &[Vec<f64>],
    component: usize,
) -> Result<HyperplaneNormal> {
    let cls = classify_hyperplane(solver, atlas, basis, component)?;
    if cls.class == HyperplaneClass::Timelike {
        return Err(LabError::precondition("a timelike hyperplane has no causal normal in the cone"));
    }
    let spec = solver.spec();
    let dim = spec.dimension();
    let unit_basis: Vec<Vec<f64>> = basis.iter().map(|b| scaled(b, 1.0 / norm(b))).collect();
    let null = cls.class == HyperplaneClass::Null;
    let system = |u: &[f64]| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let t = spec.eval_taylor(u)?;
        let (lu, g) = (t.gradient_vector(), t.hessian());
        let mut f = DVector::zeros(dim);
        let mut j = DMatrix::zeros(dim, dim);
        for (i, w) in unit_basis.iter().enumerate() {
            let wv = DVector::from_column_slice(w);
            f[i] = lu.dot(&wv);
            let row = &g * &wv;
            for k in 0..dim {
                j[(i, k)] = row[k];
            }
        }
        let last = dim - 1;
        if null {
            f[last] = 0.5 * (dot(u, u) - 1.0);
            for k in 0..dim {
                j[(last, k)] = u[k];
            }
        } else {
            f[last] = 2.0 * t.value() + 1.0;
            for k in 0..dim {
                j[(last, k)] = 2.0 * lu[k];
            }
        }
        Ok((f, j))
    };

    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    let score = |u: &[f64]| -> Option<f64> {
        let p = spec.eval_taylor(u).ok()?.gradient();
        let pn = norm(&p);
        Some(unit_basis.iter().map(|w| dot(&p, w).abs() / pn).fold(0.0, f64::max))
    };
    if null {
        for np in atlas.null_points_of(component) {
            if let Some(s) = score(&np.point) {
                candidates.push((s, np.point.clone()));
            }
        }
    } else {
        for &m in &atlas.components[component].members {
            if atlas.labels[m] != SampleLabel::Timelike {
                continue;
            }
            let p = &atlas.sample.points[m];
            if let (Some(s), Some(v)) = (score(p), atlas.values[m]) {
                candidates.push((s, scaled(p, 1.0 / (-v).sqrt())));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let starts: Vec<Vec<f64>> = candidates.into_iter().take(10).map(|c| c.1).collect();
    if starts.is_empty() {
        return Err(LabError::precondition("no starting points in the component"));
    }
    let mut solutions: Vec<(Vec<f64>, f64)> = Vec::new();
    for x0 in &starts {
        let out = damped_newton(x0, system, 1e-15, MAX_ITERATIONS)?;
        solutions.push((out.x, out.residual));
    }
    let (u, residual) = solutions
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .expect("at least one start");
    let restart_spread = solutions
        .iter()
        .map(|(x, _)| x.iter().zip(&u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if residual > 1e-9 {
        return Err(LabError::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual,
        });
    }
    let lu = spec.eval_taylor(&u)?.gradient();
    let orthogonality_residual = unit_basis.iter().map(|w| dot(&lu, w).abs()).fold(0.0, f64::max);
    let normalization_residual = if null {
        (norm(&u) - 1.0).abs()
    } else {
        (2.0 * spec.eval_f64(&u)? + 1.0).abs()
    };
    let legendre_route_distance = match &cls.preimage {
        Some(v) => {
            let alt = if null {
                scaled(v, 1.0 / norm(v))
            } else {
                scaled(v, 1.0 / (-2.0 * spec.eval_f64(v)?).sqrt())
            };
            alt.iter().zip(&u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        }
        None => f64::NAN,
    };
    Ok(HyperplaneNormal {
        u,
        class: cls.class,
        orthogonality_residual,
        normalization_residual,
        restarts: solutions.len(),
        restart_spread,
        legendre_route_distance,
    })
}

/// The hyperplane `ker l(u)` for `u` in a cone.
pub fn hyperplane_through_kernel(solver: &LegendreSolver, u: &[f64]) -> Result<Vec<Vec<f64>>> {
    let p = DVector::from_vec(solver.legendre(u)?);
    let n = p.len();
    let mut m = DMatrix::zeros(n, n);
    m.set_column(0, &(&p / p.norm()));
    let svd = m.svd(true, false);
    let full = svd.u.ok_or_else(|| LabError::precondition("SVD failed"))?;
    let mut basis = Vec::with_capacity(n - 1);
    for j in 0..n {
        let col: Vec<f64> = full.column(j).iter().copied().collect();
        if dot(&col, p.as_slice()).abs() < 1e-8 * p.norm() {
            basis.push(col);
        }
    }
    if basis.len() != n - 1 {
        return Err(LabError::precondition("could not complete the kernel basis"));
    }
    Ok(basis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVerdict {
    pub inside: bool,
    /// `max g_u(u, v)` over the shell points `u` of the component.
    pub max_support: f64,
    /// Direct classification: `v` causal and in the component.
    pub direct_inside: bool,
    pub agree: bool,
}

/// `v` is in the closed cone iff `g_u(u, v) <= 0` for every shell point `u`.
pub fn support_membership(spec: &LagrangianSpec, atlas: &ConeAtlas, v: &[f64], component: usize) -> Result<SupportVerdict> {
    check_timelike(atlas, component)?;
    let shell = atlas.null_points_of(component);
    if shell.is_empty() {
        return Err(LabError::precondition("component has no shell points"));
    }
    let vn = norm(v);
    let mut max_support = f64::NEG_INFINITY;
    for u in shell {
        let lu = spec.eval_taylor(&u.point)?.gradient();
        max_support = max_support.max(dot(&lu, v));
    }
    let inside = max_support <= 1e-9 * vn;
    let direct_inside = match crate::metric::classify(spec, v) {
        Ok(c) if c.label.is_causal() => causal_component(atlas, v) == Some(component),
        _ => false,
    };
    Ok(SupportVerdict {
        inside,
        max_support,
        direct_inside,
        agree: inside == direct_inside,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportScan {
    pub trials: usize,
    pub seed: u64,
    pub agreements: usize,
    pub mismatches: usize,
    /// Mismatches at directions with `|2L| > band` on the unit sphere.
    pub mismatches_off_band: usize,
    /// `max(1e-2, resolution^2)`: the finite set of shell points
    /// underestimates the support function by about the squared spacing.
    pub band: f64,
}

impl SupportScan {
    pub fn agreement_rate(&self) -> f64 {
        self.agreements as f64 / self.trials.max(1) as f64
    }
}

/// Compares the support test with direct classification at random `v`.
pub fn support_scan(spec: &LagrangianSpec, atlas: &ConeAtlas, component: usize, trials: usize, seed: u64) -> Result<SupportScan> {
    let band = atlas.sample.resolution().powi(2).max(1e-2);
    let mut scan = SupportScan {
        trials,
        seed,
        agreements: 0,
        mismatches: 0,
        mismatches_off_band: 0,
        band,
    };
    for k in 0..trials {
        let v = random_unit_vector(&mut stream(seed, k as u64), spec.dimension());
        let verdict = support_membership(spec, atlas, &v, component)?;
        if verdict.agree {
            scan.agreements += 1;
        } else {
            scan.mismatches += 1;
            if spec.eval_f64(&v).map_or(true, |l| (2.0 * l).abs() > band) {
                scan.mismatches_off_band += 1;
            }
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{default_strategy, sample_sphere};

    fn setup(spec: &LagrangianSpec) -> (ConeAtlas, LegendreSolver, usize) {
        let atlas = ConeAtlas::build(spec, sample_sphere(spec.dimension(), 2562, default_strategy(spec.dimension()), 1).unwrap()).unwrap();
        let future = atlas.locate(&[1.0, 0.0, 0.0]).unwrap();
        (atlas, LegendreSolver::new(spec).unwrap(), future)
    }

    #[test]
    fn cs_and_triangle_examples() {
        let spec = LagrangianSpec::minkowski(2).unwrap();
        let (atlas, _, _) = setup(&spec);
        let m = reverse_cs_margin(&spec, &atlas, &[2.0, 0.0, 0.0], &[1.0, 0.5, 0.0]).unwrap();
        assert_eq!(m.left, 2.0);
        assert!((m.right - 3f64.sqrt()).abs() < 1e-15);
        assert!(m.margin > 0.0 && !m.equality_case);
        let p = reverse_cs_margin(&spec, &atlas, &[1.0, 0.2, 0.1], &[3.0, 0.6, 0.3]).unwrap();
        assert!(p.margin.abs() < 1e-10 && p.equality_case);

        let t = reverse_triangle_margin(&spec, &atlas, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!((t.left, t.right, t.margin, t.equality_case), (2.0, 2.0, 0.0, true));
        let t = reverse_triangle_margin(&spec, &atlas, &[1.0, 0.0, 0.0], &[2.0, 1.0, 0.0]).unwrap();
        assert!((t.left - 8f64.sqrt()).abs() < 1e-15);
        assert!((t.right - (1.0 + 3f64.sqrt())).abs() < 1e-15);
        assert!((t.margin - 0.0963).abs() < 1e-4);

        assert!(reverse_cs_margin(&spec, &atlas, &[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]).is_err());
        assert!(reverse_cs_margin(&spec, &atlas, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn pair_scan_on_beem3() {
        let spec = LagrangianSpec::beem3(0.05).unwrap();
        let (atlas, _, future) = setup(&spec);
        let scan = scan_pairs(&spec, &atlas, future, 5000, 9).unwrap();
        assert!(scan.pass(), "{scan:?}");
        assert!(scan.proportional_pairs >= 50);
        assert!(scan.gradient_form_max_residual < 1e-9, "{scan:?}");
    }

    #[test]
    fn orthogonal_growth_examples() {
        let spec = LagrangianSpec::minkowski(2).unwrap();
        let g = orthogonal_growth(&spec, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!((g.l_perturbed, g.l_base), (0.0, -0.5));
        assert!(g.pass && g.strict);
        let beem = LagrangianSpec::beem3(0.05).unwrap();
        let g = orthogonal_growth(&beem, &[1.0, 0.2, 0.1], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.l_perturbed, g.l_base);
        let (atlas, _, future) = setup(&beem);
        let scan = growth_scan(&beem, &atlas, future, 2000, 5).unwrap();
        assert_eq!(scan.failures, 0, "{scan:?}");
    }

    #[test]
    fn hyperplane_classes_on_minkowski() {
        let spec = LagrangianSpec::minkowski(2).unwrap();
        let (atlas, solver, future) = setup(&spec);
        let e = |i: usize| {
            let mut v = vec![0.0; 3];
            v[i] = 1.0;
            v
        };
        let c = |b: Vec<Vec<f64>>| classify_hyperplane(&solver, &atlas, &b, future).unwrap().class;
        assert_eq!(c(vec![e(1), e(2)]), HyperplaneClass::Spacelike);
        assert_eq!(c(vec![vec![1.0, 1.0, 0.0], e(2)]), HyperplaneClass::Null);
        assert_eq!(c(vec![e(0), e(2)]), HyperplaneClass::Timelike);
        assert!(classify_hyperplane(&solver, &atlas, &[e(1), e(1)], future).is_err());

        let n = hyperplane_normal(&solver, &atlas, &[e(1), e(2)], future).unwrap();
        assert!((n.u[0] - 1.0).abs() < 1e-10 && n.u[1].abs() < 1e-10 && n.u[2].abs() < 1e-10, "{n:?}");
        let n = hyperplane_normal(&solver, &atlas, &[vec![1.0, 1.0, 0.0], e(2)], future).unwrap();
        assert_eq!(n.class, HyperplaneClass::Null);
        let s = 0.5f64.sqrt();
        assert!((n.u[0] - s).abs() < 1e-9 && (n.u[1] - s).abs() < 1e-9, "{n:?}");
        assert!(hyperplane_normal(&solver, &atlas, &[e(0), e(2)], future).is_err());
    }

    #[test]
    fn hyperplane_normal_on_beem3() {
        let spec = LagrangianSpec::beem3(0.05).unwrap();
        let (atlas, solver, future) = setup(&spec);
        let basis = hyperplane_through_kernel(&solver, &[1.0, 0.4, -0.3]).unwrap();
        let n = hyperplane_normal(&solver, &atlas, &basis, future).unwrap();
        assert_eq!(n.class, HyperplaneClass::Spacelike);
        assert!(n.restart_spread < 1e-8 && n.normalization_residual < 1e-9, "{n:?}");
        assert!(n.legendre_route_distance < 1e-8, "{n:?}");
    }

    #[test]
    fn support_examples() {
        let spec = LagrangianSpec::minkowski(2).unwrap();
        let (atlas, _, future) = setup(&spec);
        let v = support_membership(&spec, &atlas, &[1.0, 0.0, 0.0], future).unwrap();
        assert!(v.inside && v.direct_inside);
        let v = support_membership(&spec, &atlas, &[0.0, 1.0, 0.0], future).unwrap();
        assert!(!v.inside && v.agree);
        let scan = support_scan(&spec, &atlas, future, 2000, 3).unwrap();
        assert!(scan.agreement_rate() >= 0.999, "{scan:?}");
    }
}
