//! Seeded random draws shared by the scans.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Uniform point on the unit sphere of `dimension` coordinates.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dimension: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dimension).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Log-uniform radius in `[lo, hi]`.
pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let t: f64 = rng.gen_range(0.0..=1.0);
    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
}

/// Independent stream for item `index` of a run seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn normalized(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

pub fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| s * x).collect()
}

pub fn negated(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

/// Angle in radians between the rays through `a` and `b`.
pub fn ray_angle(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, w) = (x / na, y / nb);
        diff += (u - w) * (u - w);
        sum += (u + w) * (u + w);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vectors_have_unit_norm() {
        let mut r = rng(3);
        for d in 2..6 {
            let v = random_unit_vector(&mut r, d);
            assert!((norm(&v) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn log_uniform_stays_in_range() {
        let mut r = rng(5);
        for _ in 0..1000 {
            let x = log_uniform(&mut r, 0.1, 10.0);
            assert!((0.1..=10.0 + 1e-12).contains(&x));
        }
    }

    #[test]
    fn ray_angle_of_parallel_vectors_is_tiny() {
        assert!(ray_angle(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) < 1e-15);
        assert!((ray_angle(&[1.0, 0.0], &[1.0, 1e-7]) - 1e-7).abs() < 1e-20);
        assert!((ray_angle(&[1.0, 0.0], &[0.0, 1.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
