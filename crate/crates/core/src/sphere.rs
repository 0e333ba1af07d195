//! Point sets on the coordinate unit sphere with a neighbour graph.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sampling::{random_unit_vector, ray_angle, stream};

/// Neighbour count for the random strategy.
pub const DEFAULT_K: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SphereStrategy {
    SubdividedPolytope,
    RandomKnn,
}

impl SphereStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SphereStrategy::SubdividedPolytope => "SUBDIVIDED_POLYTOPE",
            SphereStrategy::RandomKnn => "RANDOM_KNN",
        }
    }
}

impl fmt::Display for SphereStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SphereStrategy {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "SUBDIVIDED_POLYTOPE" | "POLYTOPE" => Ok(SphereStrategy::SubdividedPolytope),
            "RANDOM_KNN" | "KNN" => Ok(SphereStrategy::RandomKnn),
            _ => Err(LabError::UnknownName(s.to_string())),
        }
    }
}

/// Unit vectors plus a symmetric neighbour graph.
#[derive(Debug, Clone)]
pub struct SphereSample {
    pub points: Vec<Vec<f64>>,
    pub adjacency: Vec<Vec<usize>>,
    pub strategy: SphereStrategy,
    pub seed: u64,
    index: GridIndex,
}

impl SphereSample {
    pub fn new(
        points: Vec<Vec<f64>>,
        adjacency: Vec<Vec<usize>>,
        strategy: SphereStrategy,
        seed: u64,
    ) -> Self {
        let index = GridIndex::new(&points, DEFAULT_K);
        SphereSample {
            points,
            adjacency,
            strategy,
            seed,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Mean angular length of the graph edges.
    pub fn resolution(&self) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs {
                if j > i {
                    sum += ray_angle(&self.points[i], &self.points[j]);
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Sample nearest to `v` (any length; compared after normalizing).
    pub fn nearest(&self, v: &[f64]) -> usize {
        self.index.nearest(&self.points, v)
    }

    /// The `k` samples nearest to `v`, closest first.
    pub fn k_nearest(&self, v: &[f64], k: usize) -> Vec<usize> {
        self.index.knn(&self.points, v, k, None).into_iter().map(|(i, _)| i).collect()
    }

    /// For each sample, the sample nearest to its antipode.
    pub fn antipodes(&self) -> Vec<usize> {
        self.points
            .iter()
            .map(|p| {
                let neg: Vec<f64> = p.iter().map(|x| -x).collect();
                self.nearest(&neg)
            })
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.adjacency
            .iter()
            .enumerate()
            .all(|(i, nbrs)| nbrs.iter().all(|&j| self.adjacency[j].contains(&i)))
    }
}

/// A way of covering the sphere, selected by name at run time.
pub trait SphereSampler: Send + Sync {
    fn name(&self) -> &'static str;
    fn strategy(&self) -> SphereStrategy;
    fn supports(&self, dimension: usize) -> bool;
    fn sample(&self, dimension: usize, target_count: usize, seed: u64) -> Result<SphereSample>;
}

/// Geodesic icosphere in dimension 3, evenly spaced circle in dimension 2.
#[derive(Debug, Clone, Copy, Default)]
pub struct SubdividedPolytope;

/// Uniform random points joined to their `k` nearest neighbours.
#[derive(Debug, Clone, Copy)]
pub struct RandomKnn {
    pub k: usize,
}

impl Default for RandomKnn {
    fn default() -> Self {
        RandomKnn { k: DEFAULT_K }
    }
}

impl SphereSampler for SubdividedPolytope {
    fn name(&self) -> &'static str {
        "SUBDIVIDED_POLYTOPE"
    }
    fn strategy(&self) -> SphereStrategy {
        SphereStrategy::SubdividedPolytope
    }
    fn supports(&self, dimension: usize) -> bool {
        dimension == 2 || dimension == 3
    }
    fn sample(&self, dimension: usize, target_count: usize, seed: u64) -> Result<SphereSample> {
        check_target(dimension, target_count)?;
        match dimension {
            2 => Ok(circle(target_count, seed)),
            3 => Ok(icosphere(icosphere_level(target_count), seed)),
            d => Err(LabError::UnsupportedDimension(d)),
        }
    }
}

impl SphereSampler for RandomKnn {
    fn name(&self) -> &'static str {
        "RANDOM_KNN"
    }
    fn strategy(&self) -> SphereStrategy {
        SphereStrategy::RandomKnn
    }
    fn supports(&self, dimension: usize) -> bool {
        (2..=crate::autodiff::MAX_DIM).contains(&dimension)
    }
    fn sample(&self, dimension: usize, target_count: usize, seed: u64) -> Result<SphereSample> {
        check_target(dimension, target_count)?;
        if !self.supports(dimension) {
            return Err(LabError::UnsupportedDimension(dimension));
        }
        let points: Vec<Vec<f64>> = (0..target_count)
            .map(|i| random_unit_vector(&mut stream(seed, i as u64), dimension))
            .collect();
        let index = GridIndex::new(&points, self.k);
        let mut adjacency = vec![Vec::new(); points.len()];
        for (i, p) in points.iter().enumerate() {
            for (j, _) in index.knn(&points, p, self.k, Some(i)) {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Ok(SphereSample {
            points,
            adjacency,
            strategy: SphereStrategy::RandomKnn,
            seed,
            index,
        })
    }
}

fn check_target(dimension: usize, target_count: usize) -> Result<()> {
    if dimension < 2 {
        return Err(LabError::UnsupportedDimension(dimension));
    }
    if target_count < dimension + 2 {
        return Err(LabError::precondition(format!(
            "need at least {} sphere samples in dimension {dimension}",
            dimension + 2
        )));
    }
    Ok(())
}

/// Registered samplers.
pub fn samplers() -> Vec<Box<dyn SphereSampler>> {
    vec![Box::new(SubdividedPolytope), Box::new(RandomKnn::default())]
}

pub fn sampler_by_name(name: &str) -> Result<Box<dyn SphereSampler>> {
    let strategy: SphereStrategy = name.parse()?;
    samplers()
        .into_iter()
        .find(|s| s.strategy() == strategy)
        .ok_or_else(|| LabError::UnknownName(name.to_string()))
}

pub fn sample_sphere(
    dimension: usize,
    target_count: usize,
    strategy: SphereStrategy,
    seed: u64,
) -> Result<SphereSample> {
    let sampler = sampler_by_name(strategy.as_str())?;
    if !sampler.supports(dimension) {
        return Err(LabError::precondition(format!(
            "{strategy} does not support dimension {dimension}"
        )));
    }
    sampler.sample(dimension, target_count, seed)
}

/// The mesh strategy where it exists, random neighbours otherwise.
pub fn default_strategy(dimension: usize) -> SphereStrategy {
    if dimension <= 3 {
        SphereStrategy::SubdividedPolytope
    } else {
        SphereStrategy::RandomKnn
    }
}

/// Default first-resolution sample count.
pub fn default_count(dimension: usize) -> usize {
    match dimension {
        2 => 1024,
        3 => 2562,
        _ => 10_000,
    }
}

fn circle(n: usize, seed: u64) -> SphereSample {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let adjacency = (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect();
    SphereSample::new(points, adjacency, SphereStrategy::SubdividedPolytope, seed)
}

/// Vertex count of the icosphere at `level`.
pub fn icosphere_count(level: u32) -> usize {
    10 * 4usize.pow(level) + 2
}

fn icosphere_level(target: usize) -> u32 {
    (0..=9)
        .min_by(|&a, &b| {
            let da = (icosphere_count(a) as f64 / target as f64).ln().abs();
            let db = (icosphere_count(b) as f64 / target as f64).ln().abs();
            da.total_cmp(&db)
        })
        .unwrap_or(0)
}

fn icosphere(level: u32, seed: u64) -> SphereSample {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut points: Vec<Vec<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| unit(p))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(&mut points, &mut cache, a, b);
            let bc = midpoint(&mut points, &mut cache, b, c);
            let ca = midpoint(&mut points, &mut cache, c, a);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let mut adjacency = vec![Vec::new(); points.len()];
    for [a, b, c] in faces {
        for (x, y) in [(a, b), (b, c), (c, a)] {
            adjacency[x].push(y);
            adjacency[y].push(x);
        }
    }
    for nbrs in &mut adjacency {
        nbrs.sort_unstable();
        nbrs.dedup();
    }
    SphereSample::new(points, adjacency, SphereStrategy::SubdividedPolytope, seed)
}

fn unit(p: &[f64]) -> Vec<f64> {
    let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    p.iter().map(|x| x / n).collect()
}

fn midpoint(
    points: &mut Vec<Vec<f64>>,
    cache: &mut HashMap<(usize, usize), usize>,
    a: usize,
    b: usize,
) -> usize {
    let key = (a.min(b), a.max(b));
    if let Some(&i) = cache.get(&key) {
        return i;
    }
    let m: Vec<f64> = points[a].iter().zip(&points[b]).map(|(x, y)| x + y).collect();
    points.push(unit(&m));
    cache.insert(key, points.len() - 1);
    points.len() - 1
}

/// Uniform grid over the cube `[-1, 1]^d` bucketing unit vectors.
#[derive(Debug, Clone)]
struct GridIndex {
    cell: f64,
    dimension: usize,
    cells: HashMap<Vec<i32>, Vec<usize>>,
    max_ring: i32,
}

impl GridIndex {
    fn new(points: &[Vec<f64>], k: usize) -> Self {
        let dimension = points.first().map_or(1, Vec::len).max(1);
        let n = points.len().max(1) as f64;
        let span = (dimension.max(2) - 1) as f64;
        let cell = ((k.max(1) as f64 * sphere_area(dimension) / n).powf(1.0 / span) / 2.0).clamp(1e-3, 2.0);
        let mut cells: HashMap<Vec<i32>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, cell)).or_default().push(i);
        }
        GridIndex {
            cell,
            dimension,
            cells,
            max_ring: (2.0 / cell).ceil() as i32 + 1,
        }
    }

    fn knn(&self, points: &[Vec<f64>], query: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let q = unit(query);
        let centre = cell_of(&q, self.cell);
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        let available = points.len() - usize::from(exclude.is_some());
        let k = k.min(available);
        if k == 0 {
            return best;
        }
        for ring in 0..=self.max_ring {
            for offset in ring_offsets(self.dimension, ring) {
                let key: Vec<i32> = centre.iter().zip(&offset).map(|(c, o)| c + o).collect();
                let Some(bucket) = self.cells.get(&key) else { continue };
                for &i in bucket {
                    if Some(i) == exclude {
                        continue;
                    }
                    let d2: f64 = points[i].iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                    if best.len() < k || d2 < best[k - 1].1 {
                        let pos = best.partition_point(|&(j, e)| (e, j) < (d2, i));
                        best.insert(pos, (i, d2));
                        best.truncate(k);
                    }
                }
            }
            let reach = ring as f64 * self.cell;
            if best.len() == k && best[k - 1].1 <= reach * reach {
                break;
            }
        }
        best
    }

    fn nearest(&self, points: &[Vec<f64>], query: &[f64]) -> usize {
        self.knn(points, query, 1, None)[0].0
    }
}

fn cell_of(p: &[f64], cell: f64) -> Vec<i32> {
    p.iter().map(|x| (x / cell).floor() as i32).collect()
}

/// Offsets with Chebyshev norm exactly `ring`.
fn ring_offsets(dimension: usize, ring: i32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let mut cur = vec![-ring; dimension];
    loop {
        if cur.iter().any(|c| c.abs() == ring) {
            out.push(cur.clone());
        }
        let mut axis = 0;
        loop {
            if axis == dimension {
                return out;
            }
            if cur[axis] < ring {
                cur[axis] += 1;
                break;
            }
            cur[axis] = -ring;
            axis += 1;
        }
    }
}

/// Area of the unit sphere in `R^d`.
fn sphere_area(dimension: usize) -> f64 {
    match dimension {
        0 | 1 => 2.0,
        2 => 2.0 * PI,
        d => 2.0 * PI / (d - 2) as f64 * sphere_area(d - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::norm;

    #[test]
    fn icosphere_combinatorics() {
        let s = sample_sphere(3, 2562, SphereStrategy::SubdividedPolytope, 0).unwrap();
        assert_eq!(s.len(), 2562);
        let mut degrees = HashMap::new();
        for nbrs in &s.adjacency {
            *degrees.entry(nbrs.len()).or_insert(0) += 1;
        }
        assert_eq!(degrees.get(&5), Some(&12));
        assert_eq!(degrees.get(&6), Some(&2550));
        assert!(s.is_symmetric());
        assert!(s.points.iter().all(|p| (norm(p) - 1.0).abs() < 1e-12));
        assert_eq!(sample_sphere(3, 4 * 2562, SphereStrategy::SubdividedPolytope, 0).unwrap().len(), 10242);
    }

    #[test]
    fn icosphere_is_centrally_symmetric() {
        let s = sample_sphere(3, 642, SphereStrategy::SubdividedPolytope, 0).unwrap();
        for (i, &j) in s.antipodes().iter().enumerate() {
            for (a, b) in s.points[i].iter().zip(&s.points[j]) {
                assert!((a + b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn circle_is_cyclic() {
        let s = sample_sphere(2, 4096, SphereStrategy::SubdividedPolytope, 0).unwrap();
        assert_eq!(s.len(), 4096);
        assert!(s.adjacency.iter().all(|n| n.len() == 2));
        assert!(s.is_symmetric());
        assert!((s.resolution() - 2.0 * PI / 4096.0).abs() < 1e-12);
    }

    #[test]
    fn random_knn_in_four_dimensions() {
        let s = sample_sphere(4, 10_000, SphereStrategy::RandomKnn, 7).unwrap();
        assert_eq!(s.len(), 10_000);
        assert!(s.is_symmetric());
        assert!(s.adjacency.iter().all(|n| n.len() >= DEFAULT_K && !n.is_empty()));
        assert!(s.points.iter().all(|p| (norm(p) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn grid_knn_matches_brute_force() {
        let s = sample_sphere(4, 3000, SphereStrategy::RandomKnn, 3).unwrap();
        for q in 0..50u64 {
            let v = random_unit_vector(&mut stream(99, q), 4);
            let mut brute: Vec<(usize, f64)> = s
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, p.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum()))
                .collect();
            brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let got = s.k_nearest(&v, 12);
            let want: Vec<usize> = brute[..12].iter().map(|x| x.0).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(sample_sphere(4, 100, SphereStrategy::SubdividedPolytope, 0).is_err());
        assert!(sample_sphere(3, 4, SphereStrategy::RandomKnn, 0).is_err());
        assert!(sampler_by_name("voronoi").is_err());
        assert_eq!(sampler_by_name("random_knn").unwrap().name(), "RANDOM_KNN");
    }

    #[test]
    fn random_sampling_is_seed_deterministic() {
        let a = sample_sphere(3, 500, SphereStrategy::RandomKnn, 5).unwrap();
        let b = sample_sphere(3, 500, SphereStrategy::RandomKnn, 5).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.adjacency, b.adjacency);
    }
}
