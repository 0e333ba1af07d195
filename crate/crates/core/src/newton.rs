//! Damped Newton iteration for square systems with an exact Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

pub const MAX_ITERATIONS: usize = 60;
pub const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    /// Euclidean norm of the residual at `x`.
    pub residual: f64,
    pub iterations: usize,
}

/// Minimizes `|F(x)|` by Newton steps, halving each step until the residual
/// decreases. Stops at `tol`, at `max_iterations`, or when no halving
/// helps; the best iterate is returned in every case.
///
/// `system` returns `(F(x), dF/dx)`; an `Err` marks `x` as inadmissible.
/// Singular Jacobians fall back to a least-squares step.
pub fn damped_newton<S>(x0: &[f64], system: S, tol: f64, max_iterations: usize) -> Result<NewtonOutcome>
where
    S: Fn(&[f64]) -> Result<(DVector<f64>, DMatrix<f64>)>,
{
    let mut x = x0.to_vec();
    let (mut f, mut jac) = system(&x)?;
    let mut res = f.norm();
    let mut iterations = 0;
    while res > tol && iterations < max_iterations {
        iterations += 1;
        let Some(step) = solve(&jac, &(-&f)) else { break };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Ok((ft, jt)) = system(&trial) {
                let rt = ft.norm();
                if rt < res {
                    accepted = Some((trial, ft, jt, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xt, ft, jt, rt)) => {
                x = xt;
                f = ft;
                jac = jt;
                res = rt;
            }
            None => break,
        }
    }
    Ok(NewtonOutcome {
        x,
        residual: res,
        iterations,
    })
}

/// `A x = b` by LU, or by SVD least squares when `A` is singular.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(x) = a.clone().lu().solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let svd = a.clone().svd(true, true);
    let cutoff = 1e-14 * svd.singular_values.max();
    svd.solve(b, cutoff).ok().filter(|x| x.iter().all(|v| v.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_scalar_quadratic() {
        let out = damped_newton(
            &[3.0],
            |x| Ok((DVector::from_vec(vec![x[0] * x[0] - 2.0]), DMatrix::from_element(1, 1, 2.0 * x[0]))),
            1e-15,
            MAX_ITERATIONS,
        )
        .unwrap();
        assert!((out.x[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn singular_jacobian_takes_least_squares_step() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let x = solve(&a, &DVector::from_vec(vec![2.0, 2.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reports_best_iterate_without_root() {
        let out = damped_newton(
            &[1.0],
            |x| Ok((DVector::from_vec(vec![x[0] * x[0] + 1.0]), DMatrix::from_element(1, 1, 2.0 * x[0]))),
            1e-15,
            MAX_ITERATIONS,
        )
        .unwrap();
        assert!(out.residual >= 1.0);
    }
}
