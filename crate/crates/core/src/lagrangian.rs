//! Finsler Lagrangians: the common trait, the built-in families and the
//! runtime-parsed expression variant.
//!
//! Every Lagrangian is a [`LagrangianFormula`], written once against
//! [`Scalar`] and evaluated either in plain `f64` or in [`Taylor2`]
//! arithmetic. [`LagrangianSpec`] is the shared, type-erased handle the rest
//! of the crate passes around.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Scalar, Taylor2, MAX_DIM};
use crate::error::{LabError, Result};
use crate::expr::LagrangianAst;

/// Where a Lagrangian is declared to be defined (always excluding `v = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Domain {
    AllNonzero,
    /// `v0^2 > v1^2 + ... + vn^2`
    TimeCone,
}

impl Domain {
    pub fn contains(self, v: &[f64]) -> bool {
        if v.iter().all(|x| *x == 0.0) {
            return false;
        }
        match self {
            Domain::AllNonzero => true,
            Domain::TimeCone => v[0] * v[0] > v[1..].iter().map(|x| x * x).sum::<f64>(),
        }
    }

    pub fn describe(self, dimension: usize) -> String {
        match self {
            Domain::AllNonzero => "ALL_NONZERO".into(),
            Domain::TimeCone => {
                let rest: Vec<String> = (1..dimension).map(|i| format!("v{i}^2")).collect();
                format!("v0^2 > {}", rest.join("+"))
            }
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" | "all_nonzero" => Ok(Domain::AllNonzero),
            "timecone" | "time_cone" => Ok(Domain::TimeCone),
            _ => Err(LabError::UnknownName(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reversibility {
    Yes,
    No,
    Unknown,
}

/// A 2-homogeneous function written once for every [`Scalar`].
pub trait LagrangianFormula: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn dimension(&self) -> usize;
    fn domain(&self) -> Domain {
        Domain::AllNonzero
    }
    fn reversibility(&self) -> Reversibility {
        Reversibility::Unknown
    }
    fn parameters(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }
    /// Expression-language text producing the same function, if any.
    fn dsl_text(&self) -> Option<String>;
    fn formula<S: Scalar>(&self, v: &[S]) -> Result<S>;
}

/// Object-safe face of a Lagrangian.
pub trait Lagrangian: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn dimension(&self) -> usize;
    fn domain(&self) -> Domain;
    fn reversibility(&self) -> Reversibility;
    fn parameters(&self) -> BTreeMap<String, f64>;
    fn dsl_text(&self) -> Option<String>;
    fn eval_f64(&self, v: &[f64]) -> Result<f64>;
    fn eval_taylor(&self, v: &[f64]) -> Result<Taylor2>;
}

fn check_point(domain: Domain, dimension: usize, v: &[f64]) -> Result<()> {
    if v.len() != dimension {
        return Err(LabError::precondition(format!(
            "vector has {} components, Lagrangian has dimension {dimension}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LabError::domain(v, "non-finite component"));
    }
    if !domain.contains(v) {
        return Err(LabError::domain(
            v,
            format!("outside the declared domain {}", domain.describe(dimension)),
        ));
    }
    Ok(())
}

fn at_point<T>(v: &[f64], r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        LabError::Domain { detail, point } if point.len() != v.len() => LabError::domain(v, detail),
        other => other,
    })
}

impl<T: LagrangianFormula> Lagrangian for T {
    fn name(&self) -> String {
        LagrangianFormula::name(self)
    }
    fn dimension(&self) -> usize {
        LagrangianFormula::dimension(self)
    }
    fn domain(&self) -> Domain {
        LagrangianFormula::domain(self)
    }
    fn reversibility(&self) -> Reversibility {
        LagrangianFormula::reversibility(self)
    }
    fn parameters(&self) -> BTreeMap<String, f64> {
        LagrangianFormula::parameters(self)
    }
    fn dsl_text(&self) -> Option<String> {
        LagrangianFormula::dsl_text(self)
    }
    fn eval_f64(&self, v: &[f64]) -> Result<f64> {
        check_point(self.domain(), self.dimension(), v)?;
        let out = at_point(v, self.formula(v))?;
        if !out.is_finite() {
            return Err(LabError::domain(v, "non-finite Lagrangian value"));
        }
        Ok(out)
    }
    fn eval_taylor(&self, v: &[f64]) -> Result<Taylor2> {
        check_point(self.domain(), self.dimension(), v)?;
        let vars = Taylor2::variables(v)?;
        let out = at_point(v, self.formula(&vars))?;
        if !out.is_finite() {
            return Err(LabError::domain(v, "non-finite Lagrangian derivatives"));
        }
        Ok(out)
    }
}

fn square<S: Scalar>(x: S) -> S {
    x * x
}

/// `1/2 (-v0^2 + v1^2 + ... + vn^2)` in dimension `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Minkowski {
    pub dimension: usize,
}

impl LagrangianFormula for Minkowski {
    fn name(&self) -> String {
        format!("minkowski({})", self.dimension - 1)
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn reversibility(&self) -> Reversibility {
        Reversibility::Yes
    }
    fn dsl_text(&self) -> Option<String> {
        let rest: String = (1..self.dimension).map(|i| format!("+v{i}^2")).collect();
        Some(format!("0.5*(-v0^2{rest})"))
    }
    fn formula<S: Scalar>(&self, v: &[S]) -> Result<S> {
        let mut acc = -square(v[0]);
        for x in &v[1..] {
            acc = acc + square(*x);
        }
        Ok(acc * 0.5)
    }
}

/// The non-quadratic Lorentz-Minkowski example in 2+1 dimensions:
/// `1/2 (1 - alpha exp(-v0^2/rho^2 - rho^2/v0^2)) (-v0^2 + rho^2)` with
/// `rho^2 = v1^2 + v2^2`. On the `v0`-axis and on `v0 = 0` the bump factor
/// is taken to be exactly zero, which is its smooth extension.
#[derive(Debug, Clone, PartialEq)]
pub struct Beem3 {
    pub alpha: f64,
}

pub const BEEM3_DSL: &str =
    "0.5*(1-alpha*exp(-v0^2/(v1^2+v2^2)-(v1^2+v2^2)/v0^2))*(-v0^2+v1^2+v2^2)";
pub const BEEM2_DSL: &str = "0.5*(1-alpha*exp(-(v0/v1)^2-(v1/v0)^2))*(-v0^2+v1^2)";
pub const RANDERS4_DSL: &str = "0.5*(a*sqrt(v0^2-v1^2-v2^2-v3^2)+b*v1)^2";

/// `exp(-x/y - y/x)` for `x, y >= 0`, extended by zero when either vanishes.
fn bump<S: Scalar>(x: S, y: S) -> Result<S> {
    if x.val() == 0.0 || y.val() == 0.0 {
        return Ok(x.constant_like(0.0));
    }
    let arg = -(x.try_div(&y)? + y.try_div(&x)?);
    arg.try_exp()
}

impl LagrangianFormula for Beem3 {
    fn name(&self) -> String {
        format!("beem3({})", self.alpha)
    }
    fn dimension(&self) -> usize {
        3
    }
    fn reversibility(&self) -> Reversibility {
        Reversibility::Yes
    }
    fn parameters(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("alpha".to_string(), self.alpha)])
    }
    fn dsl_text(&self) -> Option<String> {
        Some(BEEM3_DSL.to_string())
    }
    fn formula<S: Scalar>(&self, v: &[S]) -> Result<S> {
        let t2 = square(v[0]);
        let rho2 = square(v[1]) + square(v[2]);
        let factor = -(bump(t2, rho2)? * self.alpha) + 1.0;
        Ok(factor * (rho2 - t2) * 0.5)
    }
}

/// The 1+1 variant `1/2 (1 - alpha exp(-(v0/v1)^2 - (v1/v0)^2)) (-v0^2 + v1^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beem2 {
    pub alpha: f64,
}

impl LagrangianFormula for Beem2 {
    fn name(&self) -> String {
        format!("beem2({})", self.alpha)
    }
    fn dimension(&self) -> usize {
        2
    }
    fn reversibility(&self) -> Reversibility {
        Reversibility::Yes
    }
    fn parameters(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("alpha".to_string(), self.alpha)])
    }
    fn dsl_text(&self) -> Option<String> {
        Some(BEEM2_DSL.to_string())
    }
    fn formula<S: Scalar>(&self, v: &[S]) -> Result<S> {
        let t2 = square(v[0]);
        let x2 = square(v[1]);
        let factor = -(bump(t2, x2)? * self.alpha) + 1.0;
        Ok(factor * (x2 - t2) * 0.5)
    }
}

/// Randers-type Lagrangian `1/2 (a sqrt(v0^2 - |v_s|^2) + b v1)^2`, defined
/// only inside the cone `v0^2 > v1^2 + v2^2 + v3^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Randers4 {
    pub a: f64,
    pub b: f64,
}

impl LagrangianFormula for Randers4 {
    fn name(&self) -> String {
        format!("randers4({},{})", self.a, self.b)
    }
    fn dimension(&self) -> usize {
        4
    }
    fn domain(&self) -> Domain {
        Domain::TimeCone
    }
    fn reversibility(&self) -> Reversibility {
        Reversibility::No
    }
    fn parameters(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("a".to_string(), self.a), ("b".to_string(), self.b)])
    }
    fn dsl_text(&self) -> Option<String> {
        Some(RANDERS4_DSL.to_string())
    }
    fn formula<S: Scalar>(&self, v: &[S]) -> Result<S> {
        let q = square(v[0]) - square(v[1]) - square(v[2]) - square(v[3]);
        let inner = q.try_sqrt()? * self.a + v[1] * self.b;
        Ok(square(inner) * 0.5)
    }
}

/// A Lagrangian parsed from the expression language.
#[derive(Debug, Clone)]
pub struct DslLagrangian {
    pub label: String,
    pub ast: LagrangianAst,
    pub domain: Domain,
    pub reversible: Reversibility,
}

impl LagrangianFormula for DslLagrangian {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn dimension(&self) -> usize {
        self.ast.dimension
    }
    fn domain(&self) -> Domain {
        self.domain
    }
    fn reversibility(&self) -> Reversibility {
        self.reversible
    }
    fn parameters(&self) -> BTreeMap<String, f64> {
        self.ast.parameters.clone()
    }
    fn dsl_text(&self) -> Option<String> {
        Some(self.ast.to_text())
    }
    fn formula<S: Scalar>(&self, v: &[S]) -> Result<S> {
        self.ast.eval_scalar(v)
    }
}

/// Shared handle to any Lagrangian.
#[derive(Clone)]
pub struct LagrangianSpec(Arc<dyn Lagrangian>);

impl fmt::Debug for LagrangianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LagrangianSpec({})", self.0.name())
    }
}

impl Deref for LagrangianSpec {
    type Target = dyn Lagrangian;
    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

impl LagrangianSpec {
    pub fn new<L: Lagrangian + 'static>(l: L) -> Self {
        LagrangianSpec(Arc::new(l))
    }

    /// Minkowski space with `n` spatial dimensions (dimension `n + 1`).
    pub fn minkowski(n: usize) -> Result<Self> {
        if n < 1 || n + 1 > MAX_DIM {
            return Err(LabError::UnsupportedDimension(n + 1));
        }
        Ok(Self::new(Minkowski { dimension: n + 1 }))
    }

    pub fn beem3(alpha: f64) -> Result<Self> {
        check_finite("alpha", alpha)?;
        Ok(Self::new(Beem3 { alpha }))
    }

    pub fn beem2(alpha: f64) -> Result<Self> {
        check_finite("alpha", alpha)?;
        Ok(Self::new(Beem2 { alpha }))
    }

    pub fn randers4(a: f64, b: f64) -> Result<Self> {
        check_finite("a", a)?;
        check_finite("b", b)?;
        if a <= 0.0 || b <= 0.0 {
            return Err(LabError::precondition("randers4 needs a, b > 0"));
        }
        Ok(Self::new(Randers4 { a, b }))
    }

    /// Parses an expression Lagrangian and binds its parameters.
    pub fn from_dsl(
        label: &str,
        text: &str,
        dimension: usize,
        params: &BTreeMap<String, f64>,
        domain: Domain,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(LabError::UnsupportedDimension(dimension));
        }
        let mut ast = LagrangianAst::parse(text, dimension)?;
        for (k, v) in params {
            check_finite(k, *v)?;
            ast = ast.with_param(k, *v);
        }
        Self::from_ast(label, ast, domain, Reversibility::Unknown)
    }

    /// Wraps an already parsed expression.
    pub fn from_ast(
        label: &str,
        ast: LagrangianAst,
        domain: Domain,
        reversible: Reversibility,
    ) -> Result<Self> {
        if ast.dimension < 2 {
            return Err(LabError::UnsupportedDimension(ast.dimension));
        }
        ast.check_bound()?;
        Ok(Self::new(DslLagrangian {
            label: label.to_string(),
            ast,
            domain,
            reversible,
        }))
    }
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(LabError::precondition(format!("parameter {name} must be finite")))
    }
}
