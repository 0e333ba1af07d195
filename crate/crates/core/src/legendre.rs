//! The Legendre map `v -> g_v(v, .)`, its inverse, the dual Hamiltonian and
//! the antipodal solvers built on them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atlas::{ConeAtlas, RegionClass, PROPORTIONAL_ANGLE};
use crate::autodiff::fd_hessian;
use crate::error::{LabError, Result};
use crate::lagrangian::LagrangianSpec;
use crate::metric::CausalLabel;
use crate::newton::{damped_newton, MAX_ITERATIONS};
use crate::sampling::{log_uniform, norm, random_unit_vector, ray_angle, scaled, stream};
use crate::sphere::{default_strategy, sample_sphere};

/// Largest accepted `|l(v) - p| / |p|` for an inverse.
pub const INVERSE_TOLERANCE: f64 = 1e-10;
/// Largest accepted residual of the antipodal solvers.
pub const SOLVER_TOLERANCE: f64 = 1e-8;
const NEWTON_STOP: f64 = 1e-15;
const RESTARTS: usize = 6;

/// `l(v)` together with its Jacobian `g_v`.
fn legendre_system(spec: &LagrangianSpec, v: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let t = spec.eval_taylor(v)?;
    Ok((t.gradient_vector(), t.hessian()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub v: Vec<f64>,
    /// `|l(v) - p| / |p|`
    pub residual: f64,
    pub iterations: usize,
    /// Set in dimension 2, where the map need not be injective.
    pub may_be_nonunique: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualMetric {
    pub matrix: DMatrix<f64>,
    pub basepoint: Vec<f64>,
}

/// Inverts the Legendre map of one Lagrangian, starting Newton from a
/// precomputed table of directions and their images.
#[derive(Debug, Clone)]
pub struct LegendreSolver {
    spec: LagrangianSpec,
    table: Vec<(Vec<f64>, Vec<f64>, f64)>,
}

impl LegendreSolver {
    pub fn new(spec: &LagrangianSpec) -> Result<Self> {
        let dim = spec.dimension();
        let count = match dim {
            2 => 720,
            3 => 642,
            _ => 4000,
        };
        let sample = sample_sphere(dim, count, default_strategy(dim), 0)?;
        let mut table = Vec::with_capacity(sample.len());
        for d in sample.points {
            if let Ok(p) = spec.eval_taylor(&d).map(|t| t.gradient()) {
                let n = norm(&p);
                if n > 0.0 && n.is_finite() {
                    table.push((d, scaled(&p, 1.0 / n), n));
                }
            }
        }
        Ok(LegendreSolver {
            spec: spec.clone(),
            table,
        })
    }

    pub fn spec(&self) -> &LagrangianSpec {
        &self.spec
    }

    /// `l(v) = dL/dv`.
    pub fn legendre(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.spec.eval_taylor(v)?.gradient())
    }

    /// `v` with `l(v) = p`, by damped Newton on the unit covector `p/|p|`.
    pub fn inverse(&self, p: &[f64], guess: Option<&[f64]>) -> Result<Inversion> {
        let pn = norm(p);
        if p.len() != self.spec.dimension() {
            return Err(LabError::precondition("covector dimension mismatch"));
        }
        if pn == 0.0 || !pn.is_finite() {
            return Err(LabError::precondition("p must be a nonzero finite covector"));
        }
        let q = scaled(p, 1.0 / pn);
        let qv = DVector::from_column_slice(&q);
        let system = |v: &[f64]| {
            let (f, j) = legendre_system(&self.spec, v)?;
            Ok((f - &qv, j))
        };
        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(g) = guess {
            if norm(g) > 0.0 {
                starts.push(scaled(g, 1.0 / pn));
            }
        }
        let mut ranked: Vec<(f64, usize)> = self
            .table
            .iter()
            .enumerate()
            .map(|(i, (_, img, _))| (-img.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>(), i))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in ranked.iter().take(RESTARTS) {
            let (d, _, n) = &self.table[i];
            starts.push(scaled(d, 1.0 / n));
        }
        let mut best: Option<(Vec<f64>, f64, usize)> = None;
        let mut total = 0;
        for x0 in starts {
            let Ok(out) = damped_newton(&x0, system, NEWTON_STOP, MAX_ITERATIONS) else { continue };
            total += out.iterations;
            if best.as_ref().is_none_or(|b| out.residual < b.1) {
                best = Some((out.x, out.residual, out.iterations));
            }
            if best.as_ref().is_some_and(|b| b.1 <= INVERSE_TOLERANCE) {
                break;
            }
        }
        match best {
            Some((v, res, iterations)) if res <= INVERSE_TOLERANCE => Ok(Inversion {
                v: scaled(&v, pn),
                residual: res,
                iterations,
                may_be_nonunique: self.spec.dimension() == 2,
            }),
            Some((_, res, _)) => Err(LabError::NoConvergence { iterations: total, residual: res }),
            None => Err(LabError::NoConvergence { iterations: total, residual: f64::INFINITY }),
        }
    }

    /// `g_v^{-1}` at `v = l^{-1}(p)`.
    pub fn dual_metric(&self, p: &[f64]) -> Result<DualMetric> {
        let inv = self.inverse(p, None)?;
        let g = self.spec.eval_taylor(&inv.v)?.hessian();
        let matrix = g
            .try_inverse()
            .ok_or_else(|| LabError::domain(&inv.v, "degenerate fundamental tensor"))?;
        Ok(DualMetric {
            matrix: (&matrix + matrix.transpose()) * 0.5,
            basepoint: p.to_vec(),
        })
    }

    /// `H(p) = 1/2 g_p(p, p)`.
    pub fn hamiltonian(&self, p: &[f64]) -> Result<f64> {
        let dm = self.dual_metric(p)?;
        let pv = DVector::from_column_slice(p);
        Ok(0.5 * pv.dot(&(&dm.matrix * &pv)))
    }

    /// `|fd Hessian of H - g_p|_max` at `p`.
    pub fn dual_hessian_check(&self, p: &[f64], step: f64) -> Result<f64> {
        let dm = self.dual_metric(p)?;
        let fd = fd_hessian(|q| self.hamiltonian(q), p, step)?;
        Ok((fd - dm.matrix).amax())
    }

    /// `F*(p) = sqrt(2 |H(p)|)`.
    pub fn dual_norm_closed_form(&self, p: &[f64]) -> Result<f64> {
        Ok((2.0 * self.hamiltonian(p)?.abs()).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolarClass {
    TimelikeDual,
    LightlikeDual,
    Outside,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarVerdict {
    pub class: PolarClass,
    /// Largest `p(u)` over the unit null points bounding the component.
    pub max_pairing: f64,
    pub preimage: Option<Vec<f64>>,
    pub preimage_component: Option<usize>,
}

/// Whether `p` lies in the polar cone of timelike component `component`.
pub fn polar_membership(
    solver: &LegendreSolver,
    atlas: &ConeAtlas,
    p: &[f64],
    component: usize,
) -> Result<PolarVerdict> {
    check_timelike(atlas, component)?;
    let shell = atlas.null_points_of(component);
    if shell.is_empty() {
        return Err(LabError::precondition("component has no boundary points"));
    }
    let pn = norm(p);
    let max_pairing = shell
        .iter()
        .map(|u| u.point.iter().zip(p).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    if max_pairing > 1e-9 * pn {
        return Ok(PolarVerdict {
            class: PolarClass::Outside,
            max_pairing,
            preimage: None,
            preimage_component: None,
        });
    }
    let Ok(inv) = solver.inverse(p, None) else {
        return Ok(PolarVerdict {
            class: PolarClass::Inconclusive,
            max_pairing,
            preimage: None,
            preimage_component: None,
        });
    };
    let two_l = 2.0 * solver.spec().eval_f64(&inv.v)?;
    let label = CausalLabel::from_value(two_l, norm(&inv.v).powi(2));
    let located = atlas.locate(&inv.v);
    let owner = match located {
        Some(c) if atlas.components[c].class == RegionClass::NullShell => atlas.null_owner(c),
        other => other,
    };
    let class = match label {
        CausalLabel::Timelike if owner == Some(component) => PolarClass::TimelikeDual,
        CausalLabel::Lightlike => {
            let nearest_owner = nearest_null_owner(atlas, &inv.v);
            if nearest_owner == Some(component) {
                PolarClass::LightlikeDual
            } else {
                PolarClass::Inconclusive
            }
        }
        _ => PolarClass::Inconclusive,
    };
    Ok(PolarVerdict {
        class,
        max_pairing,
        preimage: Some(inv.v),
        preimage_component: owner,
    })
}

fn nearest_null_owner(atlas: &ConeAtlas, v: &[f64]) -> Option<usize> {
    atlas
        .null_points
        .iter()
        .min_by(|a, b| ray_angle(&a.point, v).total_cmp(&ray_angle(&b.point, v)))
        .and_then(|p| p.component)
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

/// Unit timelike directions of one component with their Finsler norms,
/// reused across many dual-norm evaluations.
#[derive(Debug, Clone)]
pub struct DualNormProbe {
    pub component: usize,
    pub samples: usize,
    pub seed: u64,
    directions: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualNormRecord {
    pub sampled_inf: f64,
    pub closed_form: f64,
    pub relative_gap: f64,
    pub directions_used: usize,
}

impl DualNormProbe {
    pub fn new(atlas: &ConeAtlas, component: usize, samples: usize, seed: u64) -> Result<Self> {
        check_timelike(atlas, component)?;
        let spec = atlas
            .spec()
            .ok_or_else(|| LabError::precondition("atlas was not built from a Lagrangian"))?;
        let mut directions = Vec::new();
        for i in 0..samples {
            let u = random_unit_vector(&mut stream(seed, i as u64), spec.dimension());
            let Ok(l) = spec.eval_f64(&u) else { continue };
            if CausalLabel::from_value(2.0 * l, 1.0) == CausalLabel::Timelike && atlas.locate(&u) == Some(component) {
                directions.push((u, (-2.0 * l).sqrt()));
            }
        }
        if directions.is_empty() {
            return Err(LabError::precondition("no sampled direction fell in the component"));
        }
        Ok(DualNormProbe {
            component,
            samples,
            seed,
            directions,
        })
    }

    pub fn directions_used(&self) -> usize {
        self.directions.len()
    }

    /// `inf |p(v)|` over sampled `v` of the component with `F(v) = 1`.
    pub fn sampled_inf(&self, p: &[f64]) -> f64 {
        self.directions
            .iter()
            .map(|(u, f)| u.iter().zip(p).map(|(a, b)| a * b).sum::<f64>().abs() / f)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sampled infimum against `sqrt(2|H(p)|)` for `p` in the dual timelike cone.
pub fn dual_norm(
    solver: &LegendreSolver,
    atlas: &ConeAtlas,
    probe: &DualNormProbe,
    p: &[f64],
) -> Result<DualNormRecord> {
    let verdict = polar_membership(solver, atlas, p, probe.component)?;
    if verdict.class != PolarClass::TimelikeDual {
        return Err(LabError::precondition(format!(
            "p is not dual timelike for component {} ({:?})",
            probe.component, verdict.class
        )));
    }
    let closed_form = solver.dual_norm_closed_form(p)?;
    let sampled_inf = probe.sampled_inf(p);
    Ok(DualNormRecord {
        sampled_inf,
        closed_form,
        relative_gap: (sampled_inf - closed_form) / closed_form,
        directions_used: probe.directions_used(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectivityProbe {
    pub pairs: usize,
    pub seed: u64,
    /// Least `|l(v1) - l(v2)| / |v1 - v2|` over non-proportional pairs.
    pub min_ratio: f64,
    pub collisions: usize,
}

/// Random non-proportional pairs of a causal cone have distinct momenta.
pub fn on_shell_injectivity_probe(
    solver: &LegendreSolver,
    atlas: &ConeAtlas,
    component: usize,
    pairs: usize,
    seed: u64,
) -> Result<InjectivityProbe> {
    check_timelike(atlas, component)?;
    let mut pool: Vec<Vec<f64>> = atlas.components[component]
        .members
        .iter()
        .filter(|&&m| atlas.labels[m] == crate::atlas::SampleLabel::Timelike)
        .map(|&m| atlas.sample.points[m].clone())
        .collect();
    pool.extend(atlas.null_points_of(component).into_iter().map(|p| p.point.clone()));
    if pool.len() < 2 {
        return Err(LabError::precondition("component has fewer than two causal samples"));
    }
    let mut probe = InjectivityProbe {
        pairs: 0,
        seed,
        min_ratio: f64::INFINITY,
        collisions: 0,
    };
    for k in 0..pairs {
        let mut rng = stream(seed, k as u64);
        let i = rand::Rng::gen_range(&mut rng, 0..pool.len());
        let j = rand::Rng::gen_range(&mut rng, 0..pool.len());
        let a = scaled(&pool[i], log_uniform(&mut rng, 0.1, 10.0));
        let b = scaled(&pool[j], log_uniform(&mut rng, 0.1, 10.0));
        if ray_angle(&a, &b) < PROPORTIONAL_ANGLE {
            continue;
        }
        let (la, lb) = (solver.legendre(&a)?, solver.legendre(&b)?);
        let dp: f64 = la.iter().zip(&lb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let dv: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        probe.pairs += 1;
        if dp < 1e-9 {
            probe.collisions += 1;
        }
        probe.min_ratio = probe.min_ratio.min(dp / dv);
    }
    Ok(probe)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntipodalPair {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// `|l(v2) + l(v1)|`
    pub momentum_residual: f64,
    /// `|v2 - v1 - 2w|`
    pub difference_residual: f64,
    pub iterations: usize,
}

fn check_solver_input(spec: &LagrangianSpec, x: &[f64], what: &str) -> Result<()> {
    if spec.dimension() < 3 {
        return Err(LabError::precondition("the antipodal solvers need dimension at least 3"));
    }
    if x.len() != spec.dimension() {
        return Err(LabError::precondition(format!("{what} has the wrong dimension")));
    }
    if norm(x) == 0.0 {
        return Err(LabError::precondition(format!("{what} must be nonzero")));
    }
    Ok(())
}

/// `v1, v2` with `v2 - v1 = 2w` and `l(v2) = -l(v1)`.
pub fn antipodal_momentum_pair(spec: &LagrangianSpec, w: &[f64]) -> Result<AntipodalPair> {
    check_solver_input(spec, w, "w")?;
    let system = |v1: &[f64]| {
        let v2: Vec<f64> = v1.iter().zip(w).map(|(a, b)| a + 2.0 * b).collect();
        let (f1, g1) = legendre_system(spec, v1)?;
        let (f2, g2) = legendre_system(spec, &v2)?;
        Ok((f1 + f2, g1 + g2))
    };
    let scale = norm(w);
    let mut starts = vec![w.iter().map(|x| -x).collect::<Vec<f64>>()];
    for k in 0..RESTARTS as u64 {
        let d = random_unit_vector(&mut stream(0xB0B5, k), w.len());
        starts.push(w.iter().zip(&d).map(|(a, b)| -a + 0.5 * scale * b).collect());
    }
    let mut best: Option<crate::newton::NewtonOutcome> = None;
    for x0 in starts {
        let Ok(out) = damped_newton(&x0, system, NEWTON_STOP * scale, MAX_ITERATIONS) else { continue };
        let done = out.residual <= SOLVER_TOLERANCE * 1e-2;
        if best.as_ref().is_none_or(|b| out.residual < b.residual) {
            best = Some(out);
        }
        if done {
            break;
        }
    }
    let out = best.ok_or(LabError::NoConvergence { iterations: 0, residual: f64::INFINITY })?;
    let v1 = out.x;
    let v2: Vec<f64> = v1.iter().zip(w).map(|(a, b)| a + 2.0 * b).collect();
    let (l1, l2) = (solver_free_legendre(spec, &v1)?, solver_free_legendre(spec, &v2)?);
    let momentum_residual = l1.iter().zip(&l2).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
    let difference_residual = v1
        .iter()
        .zip(&v2)
        .zip(w)
        .map(|((a, b), c)| (b - a - 2.0 * c).powi(2))
        .sum::<f64>()
        .sqrt();
    if momentum_residual > SOLVER_TOLERANCE * scale.max(1.0) {
        return Err(LabError::NoConvergence {
            iterations: out.iterations,
            residual: momentum_residual,
        });
    }
    Ok(AntipodalPair {
        v1,
        v2,
        momentum_residual,
        difference_residual,
        iterations: out.iterations,
    })
}

fn solver_free_legendre(spec: &LagrangianSpec, v: &[f64]) -> Result<Vec<f64>> {
    Ok(spec.eval_taylor(v)?.gradient())
}

/// `phi(v) = (l(v) - l(-v)) / 2`.
pub fn symmetrized_legendre(spec: &LagrangianSpec, v: &[f64]) -> Result<Vec<f64>> {
    let a = solver_free_legendre(spec, v)?;
    let b = solver_free_legendre(spec, &v.iter().map(|x| -x).collect::<Vec<_>>())?;
    Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x - y)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizedSolution {
    pub v: Vec<f64>,
    /// `|phi(v) - q| / |q|`
    pub residual: f64,
    pub iterations: usize,
}

/// `v` with `phi(v) = q`.
pub fn symmetrized_legendre_solve(solver: &LegendreSolver, q: &[f64]) -> Result<SymmetrizedSolution> {
    let spec = solver.spec();
    check_solver_input(spec, q, "q")?;
    let qn = norm(q);
    let qhat = DVector::from_column_slice(&scaled(q, 1.0 / qn));
    let system = |v: &[f64]| {
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let (fa, ga) = legendre_system(spec, v)?;
        let (fb, gb) = legendre_system(spec, &neg)?;
        Ok(((fa - fb) * 0.5 - &qhat, (ga + gb) * 0.5))
    };
    let mut starts = Vec::new();
    if let Ok(inv) = solver.inverse(q, None) {
        starts.push(scaled(&inv.v, 1.0 / qn));
    }
    for (d, _, n) in solver.table.iter().take(RESTARTS) {
        starts.push(scaled(d, 1.0 / n));
    }
    let mut best: Option<crate::newton::NewtonOutcome> = None;
    for x0 in starts {
        let Ok(out) = damped_newton(&x0, system, NEWTON_STOP, MAX_ITERATIONS) else { continue };
        let done = out.residual <= SOLVER_TOLERANCE * 1e-2;
        if best.as_ref().is_none_or(|b| out.residual < b.residual) {
            best = Some(out);
        }
        if done {
            break;
        }
    }
    let out = best.ok_or(LabError::NoConvergence { iterations: 0, residual: f64::INFINITY })?;
    let v = scaled(&out.x, qn);
    let phi = symmetrized_legendre(spec, &v)?;
    let residual = phi.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / qn;
    if residual > SOLVER_TOLERANCE {
        return Err(LabError::NoConvergence {
            iterations: out.iterations,
            residual,
        });
    }
    Ok(SymmetrizedSolution {
        v,
        residual,
        iterations: out.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntisymmetryRay {
    /// Unit vector.
    pub v: Vec<f64>,
    pub s: f64,
    /// `|l(-v) + s l(v)|`
    pub residual: f64,
    pub iterations: usize,
    pub method: String,
}

fn antisymmetry_residual(spec: &LagrangianSpec, v: &[f64]) -> Result<(f64, f64)> {
    let a = solver_free_legendre(spec, v)?;
    let b = solver_free_legendre(spec, &v.iter().map(|x| -x).collect::<Vec<_>>())?;
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let s = -a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / aa;
    let r = a.iter().zip(&b).map(|(x, y)| (y + s * x).powi(2)).sum::<f64>().sqrt();
    Ok((s, r))
}

/// A unit `v` and `s > 0` with `l(-v) = -s l(v)`, starting from `start`.
///
/// Iterates `w -> -l^{-1}(-l(w))` on directions, then polishes `(v, s)` by
/// Newton on `[l(-v) + s l(v); (|v|^2 - 1)/2]`. If both stall, the best
/// direction of a dense scan seeds a second polish.
pub fn antisymmetry_ray(solver: &LegendreSolver, start: &[f64]) -> Result<AntisymmetryRay> {
    let spec = solver.spec();
    check_solver_input(spec, start, "start")?;
    let mut w = scaled(start, 1.0 / norm(start));
    let mut iterations = 0;
    for _ in 0..200 {
        let (_, r) = antisymmetry_residual(spec, &w)?;
        if r <= 1e-13 {
            break;
        }
        iterations += 1;
        let l = solver.legendre(&w)?;
        let Ok(inv) = solver.inverse(&l.iter().map(|x| -x).collect::<Vec<_>>(), Some(&w.iter().map(|x| -x).collect::<Vec<_>>())) else {
            break;
        };
        let next = scaled(&inv.v, -1.0 / norm(&inv.v));
        let moved = ray_angle(&next, &w);
        w = next;
        if moved < 1e-15 {
            break;
        }
    }
    let candidate = finish_ray(spec, &w, iterations, "fixed-point")?;
    if candidate.residual <= SOLVER_TOLERANCE && candidate.s > 0.0 {
        return Ok(candidate);
    }
    let mut best = (f64::INFINITY, Vec::new());
    for (d, _, _) in &solver.table {
        if let Ok((s, r)) = antisymmetry_residual(spec, d) {
            if s > 0.0 && r < best.0 {
                best = (r, d.clone());
            }
        }
    }
    if best.1.is_empty() {
        return Err(LabError::NoConvergence { iterations, residual: candidate.residual });
    }
    let fallback = finish_ray(spec, &best.1, iterations, "direction-scan")?;
    if fallback.residual <= SOLVER_TOLERANCE && fallback.s > 0.0 {
        Ok(fallback)
    } else {
        Err(LabError::NoConvergence {
            iterations,
            residual: fallback.residual.min(candidate.residual),
        })
    }
}

fn finish_ray(spec: &LagrangianSpec, w: &[f64], iterations: usize, method: &str) -> Result<AntisymmetryRay> {
    let (s0, r0) = antisymmetry_residual(spec, w)?;
    let n = w.len();
    let mut v = w.to_vec();
    let mut s = s0;
    let mut polished = 0;
    if r0 > 1e-14 {
        let mut x0 = w.to_vec();
        x0.push(s0);
        let system = |x: &[f64]| {
            let (v, s) = (&x[..n], x[n]);
            let neg: Vec<f64> = v.iter().map(|a| -a).collect();
            let (fa, ga) = legendre_system(spec, v)?;
            let (fb, gb) = legendre_system(spec, &neg)?;
            let mut f = DVector::zeros(n + 1);
            let mut j = DMatrix::zeros(n + 1, n + 1);
            let head = &fb + &fa * s;
            let jv = -gb + ga * s;
            for i in 0..n {
                f[i] = head[i];
                for k in 0..n {
                    j[(i, k)] = jv[(i, k)];
                }
                j[(i, n)] = fa[i];
                j[(n, i)] = v[i];
            }
            f[n] = 0.5 * (v.iter().map(|a| a * a).sum::<f64>() - 1.0);
            Ok((f, j))
        };
        let out = damped_newton(&x0, system, NEWTON_STOP, MAX_ITERATIONS)?;
        polished = out.iterations;
        v = scaled(&out.x[..n], 1.0 / norm(&out.x[..n]));
        s = out.x[n];
    }
    let a = solver_free_legendre(spec, &v)?;
    let b = solver_free_legendre(spec, &v.iter().map(|x| -x).collect::<Vec<_>>())?;
    let residual = a.iter().zip(&b).map(|(x, y)| (y + s * x).powi(2)).sum::<f64>().sqrt();
    Ok(AntisymmetryRay {
        v,
        s,
        residual,
        iterations: iterations + polished,
        method: method.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::ConeAtlas;

    fn mink() -> LagrangianSpec {
        LagrangianSpec::minkowski(2).unwrap()
    }

    #[test]
    fn legendre_examples() {
        let s = LegendreSolver::new(&mink()).unwrap();
        assert_eq!(s.legendre(&[1.0, 0.0, 0.0]).unwrap(), vec![-1.0, 0.0, 0.0]);
        assert_eq!(s.legendre(&[2.0, 1.0, 1.0]).unwrap(), vec![-2.0, 1.0, 1.0]);
        let b = LegendreSolver::new(&LagrangianSpec::beem3(0.05).unwrap()).unwrap();
        let p = b.legendre(&[1.0, 0.0, 0.0]).unwrap();
        assert!((p[0] + 1.0).abs() < 1e-12 && p[1].abs() < 1e-12 && p[2].abs() < 1e-12);
    }

    #[test]
    fn inverse_examples() {
        let s = LegendreSolver::new(&mink()).unwrap();
        let inv = s.inverse(&[-1.0, 0.0, 0.0], None).unwrap();
        assert!((inv.v[0] - 1.0).abs() < 1e-14 && inv.v[1].abs() < 1e-14);
        assert!(!inv.may_be_nonunique);
        assert!(matches!(s.inverse(&[0.0, 0.0, 0.0], None), Err(LabError::Precondition(_))));
    }

    #[test]
    fn beem3_round_trip() {
        let spec = LagrangianSpec::beem3(0.05).unwrap();
        let s = LegendreSolver::new(&spec).unwrap();
        for i in 0..200u64 {
            let mut rng = stream(21, i);
            let v = scaled(&random_unit_vector(&mut rng, 3), log_uniform(&mut rng, 0.1, 10.0));
            let p = s.legendre(&v).unwrap();
            let back = s.inverse(&p, None).unwrap().v;
            let err = back.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err < 1e-8 * norm(&v), "{v:?} {err}");
            let h = s.hamiltonian(&p).unwrap();
            assert!((h - spec.eval_f64(&v).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let s = LegendreSolver::new(&mink()).unwrap();
        assert!((s.hamiltonian(&[-1.0, 0.0, 0.0]).unwrap() + 0.5).abs() < 1e-15);
        assert!((s.hamiltonian(&[0.0, 1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(s.dual_hessian_check(&[-1.0, 0.2, 0.1], 1e-4).unwrap() < 1e-7);
    }

    #[test]
    fn dual_hessian_outside_randers_domain_fails() {
        let spec = LagrangianSpec::randers4(1.0, 0.5).unwrap();
        let s = LegendreSolver::new(&spec).unwrap();
        assert!(s.dual_hessian_check(&[0.0, 1.0, 0.0, 0.0], 1e-4).is_err());
    }

    #[test]
    fn polar_membership_on_minkowski() {
        let spec = mink();
        let s = LegendreSolver::new(&spec).unwrap();
        let atlas = ConeAtlas::build(&spec, sample_sphere(3, 2562, default_strategy(3), 1).unwrap()).unwrap();
        let future = atlas.locate(&[1.0, 0.0, 0.0]).unwrap();
        let v = polar_membership(&s, &atlas, &[-1.0, 0.0, 0.0], future).unwrap();
        assert_eq!(v.class, PolarClass::TimelikeDual);
        let pre = v.preimage.unwrap();
        assert!((pre[0] - 1.0).abs() < 1e-12);
        let out = polar_membership(&s, &atlas, &[0.0, 1.0, 0.0], future).unwrap();
        assert_eq!(out.class, PolarClass::Outside);

        let probe = DualNormProbe::new(&atlas, future, 20_000, 2).unwrap();
        let r = dual_norm(&s, &atlas, &probe, &[-1.0, 0.0, 0.0]).unwrap();
        assert!((r.closed_form - 1.0).abs() < 1e-12);
        assert!(r.sampled_inf >= r.closed_form - 1e-12 && r.relative_gap < 0.01);
        let r = dual_norm(&s, &atlas, &probe, &[-2.0, 1.0, 0.0]).unwrap();
        assert!((r.closed_form - 3f64.sqrt()).abs() < 1e-12);
        assert!(r.sampled_inf >= r.closed_form - 1e-12 && r.relative_gap < 0.01);
        assert!(dual_norm(&s, &atlas, &probe, &[0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn injectivity_on_minkowski() {
        let spec = mink();
        let s = LegendreSolver::new(&spec).unwrap();
        let atlas = ConeAtlas::build(&spec, sample_sphere(3, 642, default_strategy(3), 1).unwrap()).unwrap();
        let c = atlas.locate(&[1.0, 0.0, 0.0]).unwrap();
        let p = on_shell_injectivity_probe(&s, &atlas, c, 1000, 4).unwrap();
        assert_eq!(p.collisions, 0);
        assert!(p.min_ratio > 0.1);
        let (a, b) = (s.legendre(&[1.0, 0.2, 0.0]).unwrap(), s.legendre(&[2.0, 0.4, 0.0]).unwrap());
        assert!((norm(&b) - 2.0 * norm(&a)).abs() < 1e-14);
    }

    #[test]
    fn reversible_solvers_are_trivial() {
        let spec = mink();
        let pair = antipodal_momentum_pair(&spec, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(pair.v1, vec![-1.0, 0.0, 0.0]);
        assert_eq!(pair.v2, vec![1.0, 0.0, 0.0]);
        let s = LegendreSolver::new(&spec).unwrap();
        let sol = symmetrized_legendre_solve(&s, &[-1.0, 0.0, 0.0]).unwrap();
        assert!((sol.v[0] - 1.0).abs() < 1e-12);
        let ray = antisymmetry_ray(&s, &[1.0, 0.3, 0.2]).unwrap();
        assert!((ray.s - 1.0).abs() < 1e-12 && ray.residual < 1e-12);
    }

    #[test]
    fn odd_perturbation_solvers() {
        let spec = LagrangianSpec::from_dsl(
            "odd",
            "0.5*(-v0^2+v1^2+v2^2) + beta*v1^3/sqrt(v0^2+v1^2+v2^2)",
            3,
            &[("beta".to_string(), 0.1)].into_iter().collect(),
            crate::lagrangian::Domain::AllNonzero,
        )
        .unwrap();
        let s = LegendreSolver::new(&spec).unwrap();
        for w in [[1.0, 0.0, 0.0], [1.0, 0.3, 0.2], [0.2, 1.0, -0.4]] {
            let pair = antipodal_momentum_pair(&spec, &w).unwrap();
            assert!(pair.momentum_residual < 1e-8 && pair.difference_residual < 1e-8, "{pair:?}");
        }
        for q in [[-1.0, 0.5, 0.2], [0.3, -1.0, 0.4]] {
            let sol = symmetrized_legendre_solve(&s, &q).unwrap();
            assert!(sol.residual < 1e-8);
        }
        let ray = antisymmetry_ray(&s, &[1.0, 0.3, 0.2]).unwrap();
        assert!(ray.residual < 1e-8 && ray.s > 0.0, "{ray:?}");
    }
}
