//! Light-cone structure read off a labelled sphere sample.
//!
//! Every sample gets the causal class of its direction. Wherever a graph
//! edge joins a timelike to a spacelike sample, the endpoint closer to
//! `2L = 0` is relabelled lightlike, so the null shell shows up as a band
//! of samples separating the two regions. Crossing edges are then bisected
//! along the arc to produce points lying on the shell to rounding accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lagrangian::LagrangianSpec;
use crate::metric::{beem_validity_scan, CausalLabel};
use crate::sampling::{log_uniform, norm, ray_angle, scaled, stream};
use crate::sphere::{sample_sphere, SphereSample, SphereStrategy};

/// Rays closer than this are treated as proportional.
pub const PROPORTIONAL_ANGLE: f64 = 1e-6;
/// Fraction of antipodes that must land in one component to pair it.
pub const ANTIPODE_MATCH: f64 = 0.99;
/// Refined shell points closer than this to an earlier one are dropped.
const NULL_POINT_SEPARATION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SampleLabel {
    Timelike,
    Lightlike,
    Spacelike,
    Hole,
}

impl SampleLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleLabel::Timelike => "TIMELIKE",
            SampleLabel::Lightlike => "LIGHTLIKE",
            SampleLabel::Spacelike => "SPACELIKE",
            SampleLabel::Hole => "HOLE",
        }
    }
}

impl From<CausalLabel> for SampleLabel {
    fn from(c: CausalLabel) -> Self {
        match c {
            CausalLabel::Timelike => SampleLabel::Timelike,
            CausalLabel::Lightlike => SampleLabel::Lightlike,
            CausalLabel::Spacelike => SampleLabel::Spacelike,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionClass {
    TimelikeRegion,
    NullShell,
    SpacelikeRegion,
}

impl RegionClass {
    pub fn of(label: SampleLabel) -> Option<Self> {
        match label {
            SampleLabel::Timelike => Some(RegionClass::TimelikeRegion),
            SampleLabel::Lightlike => Some(RegionClass::NullShell),
            SampleLabel::Spacelike => Some(RegionClass::SpacelikeRegion),
            SampleLabel::Hole => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: usize,
    pub class: RegionClass,
    pub members: Vec<usize>,
    pub representative: Vec<f64>,
    /// Timelike component holding the antipodes of this one.
    pub opposite: Option<usize>,
    /// Components of the other causal class sharing a graph edge with this
    /// one (null shells for a timelike region, and the reverse).
    pub bordering: Vec<usize>,
}

/// A point with `2L = 0` up to rounding, attached to the timelike
/// component it bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullPoint {
    pub point: Vec<f64>,
    pub two_l: f64,
    pub component: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentCounts {
    pub timelike: usize,
    pub null: usize,
    pub spacelike: usize,
    pub holes: usize,
}

/// Local checks that the null band separates the two open regions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub null_samples: usize,
    pub null_without_timelike_neighbour: usize,
    pub null_without_spacelike_neighbour: usize,
    pub crossing_edges: usize,
    pub refined_crossings: usize,
    pub timelike_spacelike_contacts: usize,
}

#[derive(Debug, Clone)]
pub struct ConeAtlas {
    pub sample: SphereSample,
    /// `2L` of each sample, `None` outside the domain.
    pub values: Vec<Option<f64>>,
    pub raw_labels: Vec<SampleLabel>,
    pub labels: Vec<SampleLabel>,
    pub component_of: Vec<Option<usize>>,
    pub components: Vec<Component>,
    pub null_points: Vec<NullPoint>,
    pub crossing_edges: usize,
    spec: Option<LagrangianSpec>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn unit_label(two_l: Option<f64>) -> SampleLabel {
    match two_l {
        Some(x) => CausalLabel::from_value(x, 1.0).into(),
        None => SampleLabel::Hole,
    }
}

impl ConeAtlas {
    /// Labels every sample of `sample` under `spec` and extracts components.
    pub fn build(spec: &LagrangianSpec, sample: SphereSample) -> Result<Self> {
        if sample.dimension() != spec.dimension() {
            return Err(LabError::precondition(format!(
                "sample dimension {} does not match Lagrangian dimension {}",
                sample.dimension(),
                spec.dimension()
            )));
        }
        let values: Vec<Option<f64>> = sample
            .points
            .iter()
            .map(|p| spec.eval_f64(p).ok().map(|l| 2.0 * l))
            .collect();
        let raw: Vec<SampleLabel> = values.iter().map(|&x| unit_label(x)).collect();
        let mut labels = raw.clone();
        let mut crossings = Vec::new();
        for (i, nbrs) in sample.adjacency.iter().enumerate() {
            for &j in nbrs {
                if raw[i] == SampleLabel::Timelike && raw[j] == SampleLabel::Spacelike {
                    crossings.push((i, j));
                    let (vi, vj) = (values[i].unwrap_or(0.0).abs(), values[j].unwrap_or(0.0).abs());
                    labels[if vi <= vj { i } else { j }] = SampleLabel::Lightlike;
                }
            }
        }
        let mut atlas = Self::assemble(sample, values, raw, labels, Some(spec.clone()));
        atlas.crossing_edges = crossings.len();
        atlas.refine_null_points(spec, &crossings);
        atlas.pair_opposites();
        Ok(atlas)
    }

    /// Atlas over hand-assigned labels, for synthetic inputs.
    pub fn from_labels(sample: SphereSample, labels: Vec<SampleLabel>) -> Result<Self> {
        if labels.len() != sample.len() {
            return Err(LabError::precondition("one label per sample is required"));
        }
        let values = vec![None; labels.len()];
        let mut atlas = Self::assemble(sample, values, labels.clone(), labels, None);
        atlas.pair_opposites();
        Ok(atlas)
    }

    fn assemble(
        sample: SphereSample,
        values: Vec<Option<f64>>,
        raw_labels: Vec<SampleLabel>,
        labels: Vec<SampleLabel>,
        spec: Option<LagrangianSpec>,
    ) -> Self {
        let n = sample.len();
        let mut uf = UnionFind::new(n);
        for (i, nbrs) in sample.adjacency.iter().enumerate() {
            for &j in nbrs {
                if labels[i] == labels[j] && labels[i] != SampleLabel::Hole {
                    uf.union(i, j);
                }
            }
        }
        // The null band is one sample thick, so it is joined across one
        // intermediate sample as well.
        for i in (0..n).filter(|&i| labels[i] == SampleLabel::Lightlike) {
            for &j in &sample.adjacency[i] {
                for &k in &sample.adjacency[j] {
                    if labels[k] == SampleLabel::Lightlike {
                        uf.union(i, k);
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            if labels[i] != SampleLabel::Hole {
                groups.entry(uf.find(i)).or_default().push(i);
            }
        }
        let mut raw_groups: Vec<(RegionClass, Vec<usize>)> = groups
            .into_values()
            .map(|m| (RegionClass::of(labels[m[0]]).expect("holes are excluded"), m))
            .collect();
        raw_groups.sort_by_key(|(c, m)| (*c, m[0]));

        let mut component_of = vec![None; n];
        let mut components = Vec::with_capacity(raw_groups.len());
        for (id, (class, members)) in raw_groups.into_iter().enumerate() {
            for &m in &members {
                component_of[m] = Some(id);
            }
            let representative = representative(&sample.points, &values, class, &members);
            components.push(Component {
                id,
                class,
                members,
                representative,
                opposite: None,
                bordering: Vec::new(),
            });
        }
        for comp in &mut components {
            let mut bordering: Vec<usize> = Vec::new();
            for &m in &comp.members {
                for &j in &sample.adjacency[m] {
                    if let Some(c) = component_of[j] {
                        if c != comp.id && border_pair(comp.class, labels[j]) && !bordering.contains(&c) {
                            bordering.push(c);
                        }
                    }
                }
            }
            bordering.sort_unstable();
            comp.bordering = bordering;
        }
        ConeAtlas {
            sample,
            values,
            raw_labels,
            labels,
            component_of,
            components,
            null_points: Vec::new(),
            crossing_edges: 0,
            spec,
        }
    }

    fn refine_null_points(&mut self, spec: &LagrangianSpec, crossings: &[(usize, usize)]) {
        let mut found: Vec<(Vec<f64>, f64, usize)> = Vec::new();
        for (i, &label) in self.raw_labels.iter().enumerate() {
            if label == SampleLabel::Lightlike {
                found.push((self.sample.points[i].clone(), self.values[i].unwrap_or(0.0), i));
            }
        }
        for &(t, s) in crossings {
            if let Some((p, v)) = bisect_arc(spec, &self.sample.points[t], &self.sample.points[s]) {
                found.push((p, v, t));
            }
        }
        let mut kept: Vec<NullPoint> = Vec::new();
        let mut grid: std::collections::HashMap<Vec<i64>, Vec<usize>> = Default::default();
        let cell = NULL_POINT_SEPARATION;
        for (p, v, anchor) in found {
            let key: Vec<i64> = p.iter().map(|x| (x / cell).floor() as i64).collect();
            let near = neighbour_keys(&key).into_iter().any(|k| {
                grid.get(&k).is_some_and(|ids| {
                    ids.iter().any(|&q| ray_angle(&kept[q].point, &p) < NULL_POINT_SEPARATION)
                })
            });
            if near {
                continue;
            }
            let component = self.owner_of_sample(anchor);
            grid.entry(key).or_default().push(kept.len());
            kept.push(NullPoint {
                point: p,
                two_l: v,
                component,
            });
        }
        self.null_points = kept;
    }

    /// Timelike component a sample belongs to, or that its null shell bounds.
    fn owner_of_sample(&self, i: usize) -> Option<usize> {
        let c = self.component_of[i]?;
        match self.components[c].class {
            RegionClass::TimelikeRegion => Some(c),
            RegionClass::NullShell => self.null_owner(c),
            RegionClass::SpacelikeRegion => None,
        }
    }

    /// The timelike component sharing the most edges with null shell `c`.
    pub fn null_owner(&self, c: usize) -> Option<usize> {
        let comp = &self.components[c];
        let mut tally: BTreeMap<usize, usize> = BTreeMap::new();
        for &m in &comp.members {
            for &j in &self.sample.adjacency[m] {
                if self.labels[j] == SampleLabel::Timelike {
                    if let Some(t) = self.component_of[j] {
                        *tally.entry(t).or_default() += 1;
                    }
                }
            }
        }
        tally.into_iter().max_by_key(|&(t, n)| (n, std::cmp::Reverse(t))).map(|(t, _)| t)
    }

    fn pair_opposites(&mut self) {
        let timelike: Vec<usize> = self.ids_of(RegionClass::TimelikeRegion);
        let antipodes = if self.spec.is_none() { Some(self.sample.antipodes()) } else { None };
        for &a in &timelike {
            let mut tally: BTreeMap<usize, usize> = BTreeMap::new();
            for &m in &self.components[a].members {
                let target = match &antipodes {
                    Some(map) => self.component_of[map[m]],
                    None => self.locate(&self.sample.points[m].iter().map(|x| -x).collect::<Vec<_>>()),
                };
                if let Some(b) = target {
                    if self.components[b].class == RegionClass::TimelikeRegion {
                        *tally.entry(b).or_default() += 1;
                    }
                }
            }
            let size = self.components[a].members.len() as f64;
            if let Some((&b, &hits)) = tally.iter().max_by_key(|&(b, n)| (*n, std::cmp::Reverse(*b))) {
                if b != a && hits as f64 >= ANTIPODE_MATCH * size {
                    self.components[a].opposite = Some(b);
                }
            }
        }
    }

    pub fn spec(&self) -> Option<&LagrangianSpec> {
        self.spec.as_ref()
    }

    pub fn dimension(&self) -> usize {
        self.sample.dimension()
    }

    pub fn ids_of(&self, class: RegionClass) -> Vec<usize> {
        self.components.iter().filter(|c| c.class == class).map(|c| c.id).collect()
    }

    pub fn component_count(&self, class: RegionClass) -> usize {
        self.components.iter().filter(|c| c.class == class).count()
    }

    pub fn counts(&self) -> ComponentCounts {
        ComponentCounts {
            timelike: self.component_count(RegionClass::TimelikeRegion),
            null: self.component_count(RegionClass::NullShell),
            spacelike: self.component_count(RegionClass::SpacelikeRegion),
            holes: self.labels.iter().filter(|&&l| l == SampleLabel::Hole).count(),
        }
    }

    /// Number of samples carrying each label.
    pub fn label_census(&self) -> BTreeMap<SampleLabel, usize> {
        let mut out = BTreeMap::new();
        for &l in &self.labels {
            *out.entry(l).or_default() += 1;
        }
        out
    }

    /// Shell points attached to timelike component `c`.
    pub fn null_points_of(&self, c: usize) -> Vec<&NullPoint> {
        self.null_points.iter().filter(|p| p.component == Some(c)).collect()
    }

    /// Component of the sample nearest to `v` among samples of the same
    /// class as `v`. `None` if `v` is outside the domain or the class has
    /// no samples.
    pub fn locate(&self, v: &[f64]) -> Option<usize> {
        let target = match &self.spec {
            Some(spec) => {
                let r = norm(v);
                if r == 0.0 {
                    return None;
                }
                let u = scaled(v, 1.0 / r);
                unit_label(spec.eval_f64(&u).ok().map(|l| 2.0 * l))
            }
            None => return self.component_of[self.sample.nearest(v)],
        };
        if target == SampleLabel::Hole || !self.labels.contains(&target) {
            return None;
        }
        let mut k = 16;
        loop {
            let k_eff = k.min(self.sample.len());
            for i in self.sample.k_nearest(v, k_eff) {
                if self.labels[i] == target {
                    return self.component_of[i];
                }
            }
            if k_eff == self.sample.len() {
                return None;
            }
            k *= 4;
        }
    }

    pub fn boundary_report(&self) -> BoundaryReport {
        let mut r = BoundaryReport {
            crossing_edges: self.crossing_edges,
            refined_crossings: self.null_points.len(),
            ..Default::default()
        };
        for (i, &l) in self.labels.iter().enumerate() {
            let nbrs = &self.sample.adjacency[i];
            match l {
                SampleLabel::Lightlike => {
                    r.null_samples += 1;
                    if !nbrs.iter().any(|&j| self.labels[j] == SampleLabel::Timelike) {
                        r.null_without_timelike_neighbour += 1;
                    }
                    if !nbrs.iter().any(|&j| self.labels[j] == SampleLabel::Spacelike) {
                        r.null_without_spacelike_neighbour += 1;
                    }
                }
                SampleLabel::Timelike => {
                    r.timelike_spacelike_contacts +=
                        nbrs.iter().filter(|&&j| self.labels[j] == SampleLabel::Spacelike).count();
                }
                _ => {}
            }
        }
        r
    }

    /// One row per sample: coordinates, `2L`, label and component id.
    pub fn sample_rows(&self) -> Vec<AtlasRow> {
        (0..self.sample.len())
            .map(|i| AtlasRow {
                v: self.sample.points[i].clone(),
                two_l: self.values[i],
                class: self.labels[i].as_str().to_string(),
                component: self.component_of[i].map_or(-1, |c| c as i64),
            })
            .collect()
    }

    /// Timelike samples rescaled onto the level set `2L = -c^2`.
    pub fn level_rows(&self, c: f64) -> Vec<AtlasRow> {
        let mut out = Vec::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if l != SampleLabel::Timelike {
                continue;
            }
            let Some(v) = self.values[i] else { continue };
            let s = c / (-v).sqrt();
            out.push(AtlasRow {
                v: scaled(&self.sample.points[i], s),
                two_l: Some(s * s * v),
                class: "LEVEL".to_string(),
                component: self.component_of[i].map_or(-1, |c| c as i64),
            });
        }
        out
    }
}

fn border_pair(class: RegionClass, other: SampleLabel) -> bool {
    match class {
        RegionClass::TimelikeRegion => other == SampleLabel::Lightlike,
        RegionClass::NullShell => other == SampleLabel::Timelike,
        RegionClass::SpacelikeRegion => other == SampleLabel::Lightlike,
    }
}

fn representative(points: &[Vec<f64>], values: &[Option<f64>], class: RegionClass, members: &[usize]) -> Vec<f64> {
    if class == RegionClass::TimelikeRegion {
        if let Some(&best) = members.iter().min_by(|&&a, &&b| {
            values[a].unwrap_or(0.0).total_cmp(&values[b].unwrap_or(0.0)).then(a.cmp(&b))
        }) {
            if values[best].is_some() {
                return points[best].clone();
            }
        }
    }
    let dim = points[members[0]].len();
    let mut mean = vec![0.0; dim];
    for &m in members {
        for (acc, x) in mean.iter_mut().zip(&points[m]) {
            *acc += x;
        }
    }
    if norm(&mean) < 1e-9 * members.len() as f64 {
        return points[members[0]].clone();
    }
    let best = members
        .iter()
        .copied()
        .min_by(|&a, &b| ray_angle(&points[a], &mean).total_cmp(&ray_angle(&points[b], &mean)).then(a.cmp(&b)))
        .unwrap_or(members[0]);
    points[best].clone()
}

fn neighbour_keys(key: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(key.len())];
    for &k in key {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-1..=1).map(move |d| {
                    let mut p = prefix.clone();
                    p.push(k + d);
                    p
                })
            })
            .collect();
    }
    out
}

/// Point of the arc from `a` (timelike) to `b` (spacelike) where `2L`
/// vanishes, as a unit vector with its residual `2L`.
fn bisect_arc(spec: &LagrangianSpec, a: &[f64], b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let at = |t: f64| -> Vec<f64> {
        let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        scaled(&p, 1.0 / norm(&p))
    };
    let f = |p: &[f64]| spec.eval_f64(p).ok().map(|l| 2.0 * l);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut flo, mut fhi) = (f(a)?, f(b)?);
    if !(flo < 0.0 && fhi > 0.0) {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(&at(mid))?;
        if fm == 0.0 {
            return Some((at(mid), 0.0));
        }
        if fm < 0.0 {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    if -flo <= fhi {
        Some((at(lo), flo))
    } else {
        Some((at(hi), fhi))
    }
}

/// CSV-ready view of one labelled point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtlasRow {
    pub v: Vec<f64>,
    pub two_l: Option<f64>,
    pub class: String,
    pub component: i64,
}

pub fn csv_header(dimension: usize) -> Vec<String> {
    let mut h: Vec<String> = (0..dimension).map(|i| format!("v{i}")).collect();
    h.extend(["2L".to_string(), "class".to_string(), "component_id".to_string()]);
    h
}

/// Atlases of one Lagrangian at a base and a fourfold resolution.
#[derive(Debug, Clone)]
pub struct ConfirmedAtlas {
    pub coarse: ConeAtlas,
    pub fine: ConeAtlas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionAgreement {
    pub coarse_samples: usize,
    pub fine_samples: usize,
    pub coarse: ComponentCounts,
    pub fine: ComponentCounts,
    pub agree: bool,
}

impl ConfirmedAtlas {
    pub fn build(spec: &LagrangianSpec, strategy: SphereStrategy, samples: usize, seed: u64) -> Result<Self> {
        let coarse = ConeAtlas::build(spec, sample_sphere(spec.dimension(), samples, strategy, seed)?)?;
        let fine = ConeAtlas::build(spec, sample_sphere(spec.dimension(), 4 * samples, strategy, seed)?)?;
        Ok(ConfirmedAtlas { coarse, fine })
    }

    pub fn agreement(&self) -> ResolutionAgreement {
        let (c, f) = (self.coarse.counts(), self.fine.counts());
        ResolutionAgreement {
            coarse_samples: self.coarse.sample.len(),
            fine_samples: self.fine.sample.len(),
            coarse: c,
            fine: f,
            agree: (c.timelike, c.null, c.spacelike) == (f.timelike, f.null, f.spacelike),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub component: usize,
    pub level: f64,
    pub chords: usize,
    pub seed: u64,
    pub pass: bool,
    /// For `c > 0` the least `-c^2 - 2L(midpoint)`; for `c = 0` the least
    /// `-2L(m)/|m|^2` over non-equality chords.
    pub worst_margin: f64,
    pub timelike_midpoints: usize,
    pub equality_cases: usize,
    pub violations: usize,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

/// Random-chord test of convexity of component `component`: strict on the
/// level set `2L = -c^2` for `c > 0`, and of the closed cone for `c = 0`.
pub fn convexity_certificate(
    spec: &LagrangianSpec,
    atlas: &ConeAtlas,
    component: usize,
    c: f64,
    chords: usize,
    seed: u64,
) -> Result<ConvexityCertificate> {
    let comp = atlas
        .components
        .get(component)
        .ok_or(LabError::IndexOutOfRange { index: component, dimension: atlas.components.len() })?;
    if comp.class != RegionClass::TimelikeRegion {
        return Err(LabError::precondition("convexity is tested on timelike components"));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(LabError::precondition("the level c must be finite and non-negative"));
    }
    let interior: Vec<usize> = comp
        .members
        .iter()
        .copied()
        .filter(|&m| atlas.values[m].is_some_and(|v| v < -crate::metric::EPS_CLS))
        .collect();
    let mut cert = ConvexityCertificate {
        component,
        level: c,
        chords,
        seed,
        pass: true,
        worst_margin: f64::INFINITY,
        timelike_midpoints: 0,
        equality_cases: 0,
        violations: 0,
        witness: None,
    };
    let mid = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect() };
    let fail = |cert: &mut ConvexityCertificate, a: &[f64], b: &[f64]| {
        cert.violations += 1;
        cert.pass = false;
        if cert.witness.is_none() {
            cert.witness = Some((a.to_vec(), b.to_vec()));
        }
    };

    if c > 0.0 {
        if interior.len() < 2 {
            return Err(LabError::precondition("component has fewer than two interior samples"));
        }
        let onto_level = |i: usize| -> Vec<f64> {
            let v = atlas.values[i].expect("interior samples evaluate");
            scaled(&atlas.sample.points[i], c / (-v).sqrt())
        };
        for k in 0..chords {
            let mut rng = stream(seed, k as u64);
            let (i, j) = distinct_pair(&mut rng, interior.len());
            let (a, b) = (onto_level(interior[i]), onto_level(interior[j]));
            let m = mid(&a, &b);
            match spec.eval_f64(&m) {
                Ok(l) => {
                    let margin = -c * c - 2.0 * l;
                    cert.worst_margin = cert.worst_margin.min(margin);
                    if margin > 0.0 {
                        cert.timelike_midpoints += 1;
                    } else {
                        fail(&mut cert, &a, &b);
                    }
                }
                Err(_) => fail(&mut cert, &a, &b),
            }
        }
        return Ok(cert);
    }

    let shell: Vec<&NullPoint> = atlas.null_points_of(component);
    let pool = interior.len() + shell.len();
    if pool < 2 {
        return Err(LabError::precondition("component has fewer than two causal samples"));
    }
    let pick = |idx: usize| -> (Vec<f64>, bool) {
        if idx < interior.len() {
            (atlas.sample.points[interior[idx]].clone(), false)
        } else {
            (shell[idx - interior.len()].point.clone(), true)
        }
    };
    let probes = shell.len().min(10);
    for k in 0..chords + probes {
        let mut rng = stream(seed, k as u64);
        let (a, b, null_a, null_b) = if k < chords {
            let (i, j) = distinct_pair(&mut rng, pool);
            let ((a, na), (b, nb)) = (pick(i), pick(j));
            let (ra, rb) = (log_uniform(&mut rng, 0.1, 10.0), log_uniform(&mut rng, 0.1, 10.0));
            (scaled(&a, ra), scaled(&b, rb), na, nb)
        } else {
            let u = &shell[k - chords].point;
            let s = log_uniform(&mut rng, 0.1, 10.0);
            (u.clone(), scaled(u, s), true, true)
        };
        let m = mid(&a, &b);
        let Ok(l) = spec.eval_f64(&m) else {
            fail(&mut cert, &a, &b);
            continue;
        };
        let m2 = norm(&m).powi(2);
        match CausalLabel::from_value(2.0 * l, m2) {
            CausalLabel::Timelike => {
                cert.timelike_midpoints += 1;
                cert.worst_margin = cert.worst_margin.min(-2.0 * l / m2);
            }
            CausalLabel::Lightlike if null_a && null_b && ray_angle(&a, &b) < PROPORTIONAL_ANGLE => {
                cert.equality_cases += 1;
            }
            _ => fail(&mut cert, &a, &b),
        }
    }
    Ok(cert)
}

fn distinct_pair<R: rand::Rng>(rng: &mut R, n: usize) -> (usize, usize) {
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessVerdict {
    pub pass: bool,
    pub component: Option<usize>,
    pub witness: Option<Vec<f64>>,
}

/// Fails if a timelike or null component holds a sample together with the
/// sample nearest to its antipode.
pub fn sharpness_check(atlas: &ConeAtlas) -> SharpnessVerdict {
    let antipodes = atlas.sample.antipodes();
    for comp in &atlas.components {
        if comp.class == RegionClass::SpacelikeRegion {
            continue;
        }
        for &m in &comp.members {
            if atlas.component_of[antipodes[m]] == Some(comp.id) {
                return SharpnessVerdict {
                    pass: false,
                    component: Some(comp.id),
                    witness: Some(atlas.sample.points[m].clone()),
                };
            }
        }
    }
    SharpnessVerdict {
        pass: true,
        component: None,
        witness: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub witness: Option<Vec<f64>>,
    pub resolution: f64,
}

/// Searches component `a` for a sample `v` with `-v` in component `b`.
pub fn overlap_check(atlas: &ConeAtlas, a: usize, b: usize) -> Result<OverlapResult> {
    let timelike = atlas.ids_of(RegionClass::TimelikeRegion);
    if timelike.len() < 2 {
        return Err(LabError::precondition("overlap needs at least two timelike components"));
    }
    if a == b || !timelike.contains(&a) || !timelike.contains(&b) {
        return Err(LabError::precondition("overlap needs two distinct timelike components"));
    }
    let mut members = atlas.components[a].members.clone();
    members.sort_by(|&x, &y| {
        atlas.values[x].unwrap_or(0.0).total_cmp(&atlas.values[y].unwrap_or(0.0)).then(x.cmp(&y))
    });
    let witness = members.into_iter().find_map(|m| {
        let p = &atlas.sample.points[m];
        let neg: Vec<f64> = p.iter().map(|x| -x).collect();
        (atlas.locate(&neg) == Some(b)).then(|| p.clone())
    });
    Ok(OverlapResult {
        witness,
        resolution: atlas.sample.resolution(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub parameter: f64,
    pub validity: String,
    pub counts: Option<ComponentCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyScan {
    pub entries: Vec<FamilyEntry>,
    /// Timelike count shared by every valid member, if constant.
    pub constant_count: Option<usize>,
    pub validity_failures: Vec<f64>,
}

/// Builds an atlas for every valid member of a one-parameter family.
pub fn family_scan<F>(
    family: F,
    grid: &[f64],
    strategy: SphereStrategy,
    samples: usize,
    validity_samples: usize,
    seed: u64,
) -> Result<FamilyScan>
where
    F: Fn(f64) -> Result<LagrangianSpec>,
{
    let mut entries = Vec::with_capacity(grid.len());
    let mut sample: Option<SphereSample> = None;
    for &x in grid {
        let spec = family(x)?;
        let verdict = beem_validity_scan(&spec, validity_samples, seed);
        let counts = if verdict.is_valid() {
            let s = match &sample {
                Some(s) => s.clone(),
                None => {
                    let s = sample_sphere(spec.dimension(), samples, strategy, seed)?;
                    sample = Some(s.clone());
                    s
                }
            };
            Some(ConeAtlas::build(&spec, s)?.counts())
        } else {
            None
        };
        entries.push(FamilyEntry {
            parameter: x,
            validity: verdict.label().to_string(),
            counts,
        });
    }
    let valid: Vec<usize> = entries.iter().filter_map(|e| e.counts.map(|c| c.timelike)).collect();
    let constant_count = match valid.first() {
        Some(&first) if valid.iter().all(|&c| c == first) => Some(first),
        _ => None,
    };
    let validity_failures = entries.iter().filter(|e| e.counts.is_none()).map(|e| e.parameter).collect();
    Ok(FamilyScan {
        entries,
        constant_count,
        validity_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atlas(spec: &LagrangianSpec, n: usize) -> ConeAtlas {
        let s = sample_sphere(spec.dimension(), n, crate::sphere::default_strategy(spec.dimension()), 1).unwrap();
        ConeAtlas::build(spec, s).unwrap()
    }

    #[test]
    fn minkowski_double_cone() {
        let spec = LagrangianSpec::minkowski(2).unwrap();
        let a = atlas(&spec, 2562);
        let c = a.counts();
        assert_eq!((c.timelike, c.null, c.spacelike, c.holes), (2, 2, 1, 0));
        let t = a.ids_of(RegionClass::TimelikeRegion);
        assert_eq!(a.components[t[0]].opposite, Some(t[1]));
        assert_eq!(a.components[t[1]].opposite, Some(t[0]));
        for np in &a.null_points {
            assert!(np.two_l.abs() < 1e-14, "{np:?}");
            assert!(np.component.is_some());
        }
        for &id in &a.ids_of(RegionClass::NullShell) {
            assert_eq!(a.components[id].bordering.len(), 1);
        }
        let b = a.boundary_report();
        assert_eq!(b.timelike_spacelike_contacts, 0);
        assert!(b.crossing_edges > 0);
    }

    #[test]
    fn minkowski_in_four_dimensions() {
        let spec = LagrangianSpec::minkowski(3).unwrap();
        let a = atlas(&spec, 10_000);
        assert_eq!(a.component_count(RegionClass::TimelikeRegion), 2);
        assert_eq!(a.component_count(RegionClass::SpacelikeRegion), 1);
    }

    #[test]
    fn beem3_has_two_cones() {
        let spec = LagrangianSpec::beem3(0.05).unwrap();
        let a = atlas(&spec, 2562);
        let c = a.counts();
        assert_eq!((c.timelike, c.null, c.spacelike), (2, 2, 1));
        assert!(sharpness_check(&a).pass);
        let t = a.ids_of(RegionClass::TimelikeRegion);
        assert!(overlap_check(&a, t[0], t[1]).unwrap().witness.is_some());
    }

    #[test]
    fn beem2_on_the_circle() {
        let spec = LagrangianSpec::beem2(0.05).unwrap();
        let a = atlas(&spec, 4096);
        assert_eq!(a.component_count(RegionClass::TimelikeRegion), 2);
    }

    #[test]
    fn locate_finds_the_future_cone() {
        let spec = LagrangianSpec::minkowski(2).unwrap();
        let a = atlas(&spec, 2562);
        let fut = a.locate(&[1.0, 0.1, 0.0]).unwrap();
        let past = a.locate(&[-1.0, 0.1, 0.0]).unwrap();
        assert_ne!(fut, past);
        assert_eq!(a.components[fut].class, RegionClass::TimelikeRegion);
        assert_eq!(a.locate(&[0.0, 1.0, 0.0]).map(|c| a.components[c].class), Some(RegionClass::SpacelikeRegion));
    }

    #[test]
    fn convexity_on_minkowski() {
        let spec = LagrangianSpec::minkowski(2).unwrap();
        let a = atlas(&spec, 2562);
        let t = a.ids_of(RegionClass::TimelikeRegion)[0];
        let strict = convexity_certificate(&spec, &a, t, 1.0, 2000, 3).unwrap();
        assert!(strict.pass && strict.worst_margin > 0.0, "{strict:?}");
        let closed = convexity_certificate(&spec, &a, t, 0.0, 2000, 3).unwrap();
        assert!(closed.pass, "{closed:?}");
        assert!(closed.equality_cases > 0);
    }

    #[test]
    fn synthetic_unsharp_cone_fails() {
        let s = sample_sphere(3, 642, SphereStrategy::SubdividedPolytope, 0).unwrap();
        // a band around the equator contains antipodal pairs
        let labels: Vec<SampleLabel> = s
            .points
            .iter()
            .map(|p| if p[2].abs() < 0.3 { SampleLabel::Timelike } else { SampleLabel::Spacelike })
            .collect();
        let a = ConeAtlas::from_labels(s, labels).unwrap();
        let v = sharpness_check(&a);
        assert!(!v.pass);
        assert!(v.witness.is_some());
        let t = a.ids_of(RegionClass::TimelikeRegion);
        assert_eq!(t.len(), 1);
        assert!(overlap_check(&a, t[0], t[0]).is_err());
    }

    #[test]
    fn randers_atlas_has_holes() {
        let spec = LagrangianSpec::randers4(1.0, 0.5).unwrap();
        let a = atlas(&spec, 2000);
        assert!(a.counts().holes > 0);
        assert!(a.sample_rows().iter().any(|r| r.class == "HOLE" && r.component == -1));
    }

    #[test]
    fn level_rows_sit_on_the_level_set() {
        let spec = LagrangianSpec::minkowski(2).unwrap();
        let a = atlas(&spec, 642);
        let rows = a.level_rows(1.0);
        assert!(!rows.is_empty());
        for r in rows {
            assert!((2.0 * spec.eval_f64(&r.v).unwrap() + 1.0).abs() < 1e-12);
        }
    }
}
