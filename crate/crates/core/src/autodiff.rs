//! Second-order forward-mode differentiation.
//!
//! [`Taylor2`] carries the value, gradient and Hessian of a scalar function of
//! up to [`MAX_DIM`] variables. Every arithmetic operation propagates all three
//! slots through the chain rule, so a Lagrangian written against `Taylor2`
//! yields `L`, `dL/dv` and the fundamental tensor in one evaluation.
//!
//! The Hessian is stored as a packed upper triangle, which makes it symmetric
//! by construction.
//!
//! [`fd_hessian`] and [`fd_gradient`] are plain central-difference estimates
//! used as independent oracles for the exact path.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};

/// Largest number of variables a [`Taylor2`] can track.
pub const MAX_DIM: usize = 8;
const PACKED: usize = MAX_DIM * (MAX_DIM + 1) / 2;

/// Arguments of `exp` below this value produce an exact zero with zero
/// derivatives.
pub const EXP_UNDERFLOW_GUARD: f64 = -700.0;

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

/// Truncated second-order Taylor expansion of a scalar function.
#[derive(Clone, Copy, PartialEq)]
pub struct Taylor2 {
    dim: usize,
    value: f64,
    grad: [f64; MAX_DIM],
    hess: [f64; PACKED],
}

impl fmt::Debug for Taylor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Taylor2")
            .field("value", &self.value)
            .field("gradient", &self.gradient())
            .field("hessian", &self.hessian_rows())
            .finish()
    }
}

impl Taylor2 {
    /// A constant in `dim` variables.
    pub fn constant(dim: usize, value: f64) -> Self {
        debug_assert!(dim <= MAX_DIM);
        Taylor2 {
            dim,
            value,
            grad: [0.0; MAX_DIM],
            hess: [0.0; PACKED],
        }
    }

    /// Seeds coordinate `index` of the point `v`.
    pub fn lift(v: &[f64], index: usize) -> Result<Self> {
        let dim = v.len();
        if dim > MAX_DIM {
            return Err(LabError::UnsupportedDimension(dim));
        }
        if index >= dim {
            return Err(LabError::IndexOutOfRange {
                index,
                dimension: dim,
            });
        }
        let mut t = Taylor2::constant(dim, v[index]);
        t.grad[index] = 1.0;
        Ok(t)
    }

    /// Seeds every coordinate of `v`.
    pub fn variables(v: &[f64]) -> Result<Vec<Self>> {
        (0..v.len()).map(|i| Taylor2::lift(v, i)).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> Vec<f64> {
        self.grad[..self.dim].to_vec()
    }

    pub fn gradient_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.grad[..self.dim])
    }

    pub fn hessian_entry(&self, i: usize, j: usize) -> f64 {
        self.hess[packed(i, j)]
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.hess[packed(i, j)])
    }

    fn hessian_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.hessian_entry(i, j)).collect())
            .collect()
    }

    /// Composes a scalar function with derivatives `d1`, `d2` at `self.value`.
    fn chain(&self, f0: f64, d1: f64, d2: f64) -> Self {
        let mut out = Taylor2::constant(self.dim, f0);
        for i in 0..self.dim {
            out.grad[i] = d1 * self.grad[i];
        }
        for j in 0..self.dim {
            for i in 0..=j {
                let k = packed(i, j);
                out.hess[k] = d1 * self.hess[k] + d2 * self.grad[i] * self.grad[j];
            }
        }
        out
    }

    fn check_dims(&self, other: &Self) {
        debug_assert_eq!(self.dim, other.dim, "Taylor2 dimension mismatch");
    }

    pub fn scale(&self, s: f64) -> Self {
        self.chain(s * self.value, s, 0.0)
    }

    pub fn recip(&self) -> Result<Self> {
        let a = self.value;
        if a == 0.0 || !a.is_finite() {
            return Err(LabError::domain(&[a], "division by zero"));
        }
        let inv = 1.0 / a;
        Ok(self.chain(inv, -inv * inv, 2.0 * inv * inv * inv))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(*self * other.recip()?)
    }

    /// Integer power by repeated multiplication; negative exponents go
    /// through [`Taylor2::recip`].
    pub fn powi(&self, n: i32) -> Result<Self> {
        if n == 0 {
            return Ok(Taylor2::constant(self.dim, 1.0));
        }
        let base = if n < 0 { self.recip()? } else { *self };
        let mut acc = base;
        for _ in 1..n.unsigned_abs() {
            acc = acc * base;
        }
        Ok(acc)
    }

    /// Real power. Integral exponents use [`Taylor2::powi`]; anything else is
    /// `exp(q * ln(base))` and needs a positive base.
    pub fn powf(&self, q: f64) -> Result<Self> {
        if q.fract() == 0.0 && q.abs() <= 64.0 {
            return self.powi(q as i32);
        }
        if self.value <= 0.0 {
            return Err(LabError::domain(
                &[self.value],
                format!("non-integer power {q} of a non-positive base"),
            ));
        }
        self.ln()?.scale(q).exp()
    }

    /// `self ^ exponent` with a variable exponent.
    pub fn pow(&self, exponent: &Self) -> Result<Self> {
        if self.value <= 0.0 {
            return Err(LabError::domain(
                &[self.value],
                "variable power of a non-positive base",
            ));
        }
        (*exponent * self.ln()?).exp()
    }

    pub fn sqrt(&self) -> Result<Self> {
        let a = self.value;
        if a <= 0.0 || !a.is_finite() {
            return Err(LabError::domain(&[a], "sqrt of a non-positive value"));
        }
        let s = a.sqrt();
        Ok(self.chain(s, 0.5 / s, -0.25 / (s * a)))
    }

    /// Exponential. Arguments below [`EXP_UNDERFLOW_GUARD`] return an exact
    /// zero so that huge inner derivatives never meet an underflowed factor.
    pub fn exp(&self) -> Result<Self> {
        let a = self.value;
        if a.is_nan() {
            return Err(LabError::domain(&[a], "exp of NaN"));
        }
        if a < EXP_UNDERFLOW_GUARD {
            return Ok(Taylor2::constant(self.dim, 0.0));
        }
        let e = a.exp();
        if !e.is_finite() {
            return Err(LabError::domain(&[a], "exp overflow"));
        }
        Ok(self.chain(e, e, e))
    }

    pub fn ln(&self) -> Result<Self> {
        let a = self.value;
        if a <= 0.0 || !a.is_finite() {
            return Err(LabError::domain(&[a], "log of a non-positive value"));
        }
        Ok(self.chain(a.ln(), 1.0 / a, -1.0 / (a * a)))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    /// True when every slot is finite.
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad[..self.dim].iter().all(|g| g.is_finite())
            && (0..self.dim).all(|j| (0..=j).all(|i| self.hess[packed(i, j)].is_finite()))
    }
}

impl Add for Taylor2 {
    type Output = Taylor2;
    fn add(self, rhs: Taylor2) -> Taylor2 {
        self.check_dims(&rhs);
        let mut out = self;
        out.value += rhs.value;
        for i in 0..self.dim {
            out.grad[i] += rhs.grad[i];
        }
        for k in 0..self.dim * (self.dim + 1) / 2 {
            out.hess[k] += rhs.hess[k];
        }
        out
    }
}

impl Sub for Taylor2 {
    type Output = Taylor2;
    fn sub(self, rhs: Taylor2) -> Taylor2 {
        self + (-rhs)
    }
}

impl Neg for Taylor2 {
    type Output = Taylor2;
    fn neg(self) -> Taylor2 {
        let mut out = self;
        out.value = -out.value;
        for g in out.grad[..self.dim].iter_mut() {
            *g = -*g;
        }
        for h in out.hess[..self.dim * (self.dim + 1) / 2].iter_mut() {
            *h = -*h;
        }
        out
    }
}

impl Mul for Taylor2 {
    type Output = Taylor2;
    fn mul(self, rhs: Taylor2) -> Taylor2 {
        self.check_dims(&rhs);
        let (a, b) = (self.value, rhs.value);
        let mut out = Taylor2::constant(self.dim, a * b);
        for i in 0..self.dim {
            out.grad[i] = a * rhs.grad[i] + b * self.grad[i];
        }
        for j in 0..self.dim {
            for i in 0..=j {
                let k = packed(i, j);
                out.hess[k] = a * rhs.hess[k]
                    + b * self.hess[k]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        out
    }
}

impl Add<f64> for Taylor2 {
    type Output = Taylor2;
    fn add(self, rhs: f64) -> Taylor2 {
        let mut out = self;
        out.value += rhs;
        out
    }
}

impl Sub<f64> for Taylor2 {
    type Output = Taylor2;
    fn sub(self, rhs: f64) -> Taylor2 {
        self + (-rhs)
    }
}

impl Mul<f64> for Taylor2 {
    type Output = Taylor2;
    fn mul(self, rhs: f64) -> Taylor2 {
        self.scale(rhs)
    }
}

/// Arithmetic shared by plain `f64` evaluation and [`Taylor2`] evaluation.
///
/// Domain rules are identical for both implementations.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn val(&self) -> f64;
    fn constant_like(&self, c: f64) -> Self;
    fn try_div(&self, rhs: &Self) -> Result<Self>;
    fn try_powf(&self, q: f64) -> Result<Self>;
    fn try_pow(&self, exponent: &Self) -> Result<Self>;
    fn try_sqrt(&self) -> Result<Self>;
    fn try_exp(&self) -> Result<Self>;
    fn try_ln(&self) -> Result<Self>;
    fn sin_s(&self) -> Self;
    fn cos_s(&self) -> Self;
}

impl Scalar for Taylor2 {
    fn val(&self) -> f64 {
        self.value
    }
    fn constant_like(&self, c: f64) -> Self {
        Taylor2::constant(self.dim, c)
    }
    fn try_div(&self, rhs: &Self) -> Result<Self> {
        self.div(rhs)
    }
    fn try_powf(&self, q: f64) -> Result<Self> {
        self.powf(q)
    }
    fn try_pow(&self, exponent: &Self) -> Result<Self> {
        self.pow(exponent)
    }
    fn try_sqrt(&self) -> Result<Self> {
        self.sqrt()
    }
    fn try_exp(&self) -> Result<Self> {
        self.exp()
    }
    fn try_ln(&self) -> Result<Self> {
        self.ln()
    }
    fn sin_s(&self) -> Self {
        self.sin()
    }
    fn cos_s(&self) -> Self {
        self.cos()
    }
}

impl Scalar for f64 {
    fn val(&self) -> f64 {
        *self
    }
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn try_div(&self, rhs: &Self) -> Result<Self> {
        if *rhs == 0.0 || !rhs.is_finite() {
            return Err(LabError::domain(&[*rhs], "division by zero"));
        }
        Ok(self / rhs)
    }
    fn try_powf(&self, q: f64) -> Result<Self> {
        if q.fract() == 0.0 && q.abs() <= 64.0 {
            if q < 0.0 && *self == 0.0 {
                return Err(LabError::domain(&[*self], "division by zero"));
            }
            return Ok(self.powi(q as i32));
        }
        if *self <= 0.0 {
            return Err(LabError::domain(
                &[*self],
                format!("non-integer power {q} of a non-positive base"),
            ));
        }
        Ok(self.powf(q))
    }
    fn try_pow(&self, exponent: &Self) -> Result<Self> {
        if *self <= 0.0 {
            return Err(LabError::domain(&[*self], "variable power of a non-positive base"));
        }
        Ok(self.powf(*exponent))
    }
    fn try_sqrt(&self) -> Result<Self> {
        if *self <= 0.0 || !self.is_finite() {
            return Err(LabError::domain(&[*self], "sqrt of a non-positive value"));
        }
        Ok(self.sqrt())
    }
    fn try_exp(&self) -> Result<Self> {
        if self.is_nan() {
            return Err(LabError::domain(&[*self], "exp of NaN"));
        }
        if *self < EXP_UNDERFLOW_GUARD {
            return Ok(0.0);
        }
        let e = self.exp();
        if !e.is_finite() {
            return Err(LabError::domain(&[*self], "exp overflow"));
        }
        Ok(e)
    }
    fn try_ln(&self) -> Result<Self> {
        if *self <= 0.0 || !self.is_finite() {
            return Err(LabError::domain(&[*self], "log of a non-positive value"));
        }
        Ok(self.ln())
    }
    fn sin_s(&self) -> Self {
        self.sin()
    }
    fn cos_s(&self) -> Self {
        self.cos()
    }
}

/// Central-difference gradient.
pub fn fd_gradient<F>(f: F, v: &[f64], step: f64) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if step <= 0.0 {
        return Err(LabError::precondition("finite-difference step must be positive"));
    }
    let n = v.len();
    let mut out = DVector::zeros(n);
    let mut p = v.to_vec();
    for i in 0..n {
        p[i] = v[i] + step;
        let fp = eval_at(&f, &p)?;
        p[i] = v[i] - step;
        let fm = eval_at(&f, &p)?;
        p[i] = v[i];
        out[i] = (fp - fm) / (2.0 * step);
    }
    Ok(out)
}

/// Second-order central-difference Hessian, symmetrized.
///
/// Diagonal entries use the three-point rule, off-diagonal entries the
/// four-point cross stencil.
pub fn fd_hessian<F>(f: F, v: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if step <= 0.0 {
        return Err(LabError::precondition("finite-difference step must be positive"));
    }
    let n = v.len();
    let h = step;
    let f0 = eval_at(&f, v)?;
    let mut out = DMatrix::zeros(n, n);
    let mut p = v.to_vec();
    for i in 0..n {
        p[i] = v[i] + h;
        let fp = eval_at(&f, &p)?;
        p[i] = v[i] - h;
        let fm = eval_at(&f, &p)?;
        p[i] = v[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut corner = |si: f64, sj: f64| {
                p[i] = v[i] + si * h;
                p[j] = v[j] + sj * h;
                let r = eval_at(&f, &p);
                p[i] = v[i];
                p[j] = v[j];
                r
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            let d = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    Ok(out)
}

fn eval_at<F>(f: &F, p: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    match f(p) {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(x) => Err(LabError::domain(p, format!("non-finite value {x} on stencil"))),
        Err(e) => Err(LabError::domain(p, format!("stencil point failed: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lift_seeds_unit_gradient() {
        let t = Taylor2::lift(&[3.0, 4.0], 0).unwrap();
        assert_eq!(t.value(), 3.0);
        assert_eq!(t.gradient(), vec![1.0, 0.0]);
        assert_eq!(t.hessian(), DMatrix::zeros(2, 2));

        let t = Taylor2::lift(&[3.0, 4.0], 1).unwrap();
        assert_eq!(t.value(), 4.0);
        assert_eq!(t.gradient(), vec![0.0, 1.0]);

        let t = Taylor2::lift(&[1.0, 2.0, 5.0], 2).unwrap();
        assert_eq!(t.value(), 5.0);
        assert_eq!(t.gradient(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn lift_rejects_bad_index() {
        assert!(matches!(
            Taylor2::lift(&[1.0, 2.0], 2),
            Err(LabError::IndexOutOfRange { index: 2, dimension: 2 })
        ));
    }

    #[test]
    fn square_of_single_variable() {
        let x = Taylor2::lift(&[3.0], 0).unwrap();
        let f = x * x;
        assert_eq!(f.value(), 9.0);
        assert_eq!(f.gradient(), vec![6.0]);
        assert_eq!(f.hessian_entry(0, 0), 2.0);
    }

    #[test]
    fn minkowski_quadratic() {
        let v = Taylor2::variables(&[1.0, 1.0]).unwrap();
        let f = ((-(v[0] * v[0])) + v[1] * v[1]) * 0.5;
        assert_eq!(f.value(), 0.0);
        assert_eq!(f.gradient(), vec![-1.0, 1.0]);
        assert_eq!(f.hessian(), DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = Taylor2::lift(&[0.7], 0).unwrap();
        let cases: Vec<(Taylor2, [f64; 3])> = vec![
            (x.sqrt().unwrap(), [0.7f64.sqrt(), 0.5 / 0.7f64.sqrt(), -0.25 * 0.7f64.powf(-1.5)]),
            (x.exp().unwrap(), [0.7f64.exp(); 3]),
            (x.ln().unwrap(), [0.7f64.ln(), 1.0 / 0.7, -1.0 / 0.49]),
            (x.sin(), [0.7f64.sin(), 0.7f64.cos(), -0.7f64.sin()]),
            (x.cos(), [0.7f64.cos(), -0.7f64.sin(), -0.7f64.cos()]),
            (x.powf(2.5).unwrap(), [0.7f64.powf(2.5), 2.5 * 0.7f64.powf(1.5), 3.75 * 0.7f64.powf(0.5)]),
            (x.powi(-2).unwrap(), [0.7f64.powi(-2), -2.0 * 0.7f64.powi(-3), 6.0 * 0.7f64.powi(-4)]),
        ];
        for (t, [f0, f1, f2]) in cases {
            assert_abs_diff_eq!(t.value(), f0, epsilon = 1e-14);
            assert_abs_diff_eq!(t.gradient()[0], f1, epsilon = 1e-13);
            assert_abs_diff_eq!(t.hessian_entry(0, 0), f2, epsilon = 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        let x = Taylor2::lift(&[-1.0], 0).unwrap();
        assert!(x.sqrt().is_err());
        assert!(x.ln().is_err());
        assert!(x.powf(0.5).is_err());
        assert!(Taylor2::constant(1, 0.0).recip().is_err());
        // odd integer power of a negative base is fine
        assert_eq!(x.powf(3.0).unwrap().value(), -1.0);
    }

    #[test]
    fn exp_guard_returns_exact_zero() {
        let x = Taylor2::lift(&[-1e6], 0).unwrap();
        let e = (x * x).scale(-1.0).exp().unwrap();
        assert_eq!(e.value(), 0.0);
        assert_eq!(e.gradient(), vec![0.0]);
        assert_eq!(e.hessian_entry(0, 0), 0.0);
    }

    #[test]
    fn fd_hessian_bilinear() {
        let h = fd_hessian(|v| Ok(v[0] * v[1]), &[2.0, 3.0], 1e-3).unwrap();
        assert_abs_diff_eq!(h[(0, 1)], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h[(1, 0)], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h[(0, 0)], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn fd_hessian_minkowski() {
        let f = |v: &[f64]| Ok(0.5 * (-v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
        let h = fd_hessian(f, &[0.3, -1.2, 0.4], 1e-4).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0]));
        assert!((h - expected).abs().max() < 1e-6);
    }

    #[test]
    fn fd_hessian_reports_failing_point() {
        let f = |v: &[f64]| {
            if v[0] > 1.0 {
                Err(LabError::domain(v, "outside"))
            } else {
                Ok(v[0])
            }
        };
        match fd_hessian(f, &[1.0], 0.1) {
            Err(LabError::Domain { point, .. }) => assert!(point[0] > 1.0),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn hessian_is_symmetric_after_mixed_ops() {
        let v = Taylor2::variables(&[0.4, -1.1, 2.0]).unwrap();
        let f = (v[0] * v[1]).sin() * v[2].exp().unwrap() + (v[1] * v[2] * v[0]).cos();
        let h = f.hessian();
        assert_eq!(h.clone(), h.transpose());
    }
}
