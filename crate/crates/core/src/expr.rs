//! Lagrangian expression language.
//!
//! ```text
//! expr   := term { ("+" | "-") term }
//! term   := unary { ("*" | "/") unary }
//! unary  := "-" unary | power
//! power  := atom [ "^" unary ]          (right-associative)
//! atom   := NUMBER | VAR | IDENT | "(" expr ")" | FUNC "(" expr ")"
//! VAR    := "v" DIGITS
//! FUNC   := "sqrt" | "exp" | "log" | "sin" | "cos"
//! ```
//!
//! Any other identifier is a named parameter that must be bound before
//! evaluation. `abs` is deliberately not a function: it is not smooth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Scalar, Taylor2, MAX_DIM};
use crate::error::{LabError, Result};
use crate::sampling::random_unit_vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(usize),
    Param(String),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: Func,
        arg: Box<Expr>,
    },
}

const NEG_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 5;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Neg(_) => NEG_PRECEDENCE,
            _ => ATOM_PRECEDENCE,
        }
    }

    fn has_variables(&self) -> bool {
        match self {
            Expr::Var(_) => true,
            Expr::Number(_) | Expr::Param(_) => false,
            Expr::Neg(e) => e.has_variables(),
            Expr::Binary { lhs, rhs, .. } => lhs.has_variables() || rhs.has_variables(),
            Expr::Call { arg, .. } => arg.has_variables(),
        }
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Param(p) => {
                out.insert(p.clone());
            }
            Expr::Number(_) | Expr::Var(_) => {}
            Expr::Neg(e) => e.collect_params(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_params(out);
                rhs.collect_params(out);
            }
            Expr::Call { arg, .. } => arg.collect_params(out),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            Expr::Number(_) | Expr::Param(_) => None,
            Expr::Neg(e) | Expr::Call { arg: e, .. } => e.max_var(),
            Expr::Binary { lhs, rhs, .. } => lhs.max_var().max(rhs.max_var()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(x) => write!(f, "{x:?}"),
            Expr::Var(i) => write!(f, "v{i}"),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Neg(e) => {
                if e.precedence() < NEG_PRECEDENCE {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Call { func, arg } => write!(f, "{}({arg})", func.name()),
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                let (lp, rp) = if *op == BinOp::Pow {
                    // base is an atom; exponent is a unary
                    (lhs.precedence() < ATOM_PRECEDENCE, rhs.precedence() < NEG_PRECEDENCE)
                } else {
                    (lhs.precedence() < p, rhs.precedence() <= p)
                };
                if lp {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                if *op == BinOp::Pow {
                    write!(f, "^")?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                if rp {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, line: tl, column: tc });
            i += 1;
            col += 1;
            continue;
        }
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let x: f64 = s.parse().map_err(|_| LabError::Syntax {
                line: tl,
                column: tc,
                message: format!("malformed number `{s}`"),
            })?;
            col += i - start;
            out.push(Token { tok: Tok::Number(x), line: tl, column: tc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { tok: Tok::Ident(s), line: tl, column: tc });
            continue;
        }
        return Err(LabError::Syntax {
            line: tl,
            column: tc,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token { tok: Tok::End, line, column: col });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dimension: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, tok: &Token, message: impl Into<String>) -> Result<T> {
        Err(LabError::Syntax {
            line: tok.line,
            column: tok.column,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary {
                op: BinOp::Pow,
                lhs: Box::new(base),
                rhs: Box::new(exponent),
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.bump();
        match tok.tok.clone() {
            Tok::Number(x) => Ok(Expr::Number(x)),
            Tok::LParen => {
                let e = self.expr()?;
                let close = self.bump();
                if close.tok != Tok::RParen {
                    return self.error(&close, "expected `)`");
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| LabError::UnknownFunction(name.clone()))?;
                    self.bump();
                    let arg = self.expr()?;
                    let close = self.bump();
                    if close.tok != Tok::RParen {
                        return self.error(&close, "expected `)` after function argument");
                    }
                    return Ok(Expr::Call { func, arg: Box::new(arg) });
                }
                if let Some(index) = parse_var(&name) {
                    if index >= self.dimension {
                        return Err(LabError::VariableOutOfRange {
                            index,
                            dimension: self.dimension,
                        });
                    }
                    return Ok(Expr::Var(index));
                }
                if Func::from_name(&name).is_some() {
                    return self.error(&tok, format!("function `{name}` needs an argument"));
                }
                Ok(Expr::Param(name))
            }
            Tok::End => self.error(&tok, "unexpected end of input"),
            other => self.error(&tok, format!("unexpected token {other:?}")),
        }
    }
}

fn parse_var(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('v')?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// A parsed Lagrangian `L(v)` with its parameter table.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianAst {
    pub root: Expr,
    pub dimension: usize,
    pub parameters: BTreeMap<String, f64>,
}

/// Outcome of a numerical homogeneity or reversibility test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NumericVerdict {
    Pass { max_residual: f64, trials: usize },
    Fail { max_residual: f64, trials: usize, witness: Vec<f64> },
    NotApplicable { reason: String },
}

impl NumericVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, NumericVerdict::Pass { .. })
    }
}

pub const HOMOGENEITY_TOLERANCE: f64 = 1e-9;
pub const REVERSIBILITY_TOLERANCE: f64 = 1e-10;

impl LagrangianAst {
    /// Parses `text` as a Lagrangian in `dimension` variables.
    pub fn parse(text: &str, dimension: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dimension) {
            return Err(LabError::UnsupportedDimension(dimension));
        }
        let tokens = lex(text)?;
        let mut parser = Parser { tokens, pos: 0, dimension };
        let root = parser.expr()?;
        let end = parser.peek().clone();
        if end.tok != Tok::End {
            return parser.error(&end, format!("unexpected trailing token {:?}", end.tok));
        }
        Ok(LagrangianAst {
            root,
            dimension,
            parameters: BTreeMap::new(),
        })
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.parameters.insert(name.to_string(), value);
        self
    }

    /// Names of every parameter referenced by the expression.
    pub fn parameter_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.root.collect_params(&mut out);
        out
    }

    /// Fails with the first referenced parameter that has no value.
    pub fn check_bound(&self) -> Result<()> {
        match self
            .parameter_names()
            .into_iter()
            .find(|p| !self.parameters.contains_key(p))
        {
            Some(p) => Err(LabError::UnboundParameter(p)),
            None => Ok(()),
        }
    }

    pub fn highest_variable(&self) -> Option<usize> {
        self.root.max_var()
    }

    pub fn to_text(&self) -> String {
        self.root.to_string()
    }

    pub fn eval_f64(&self, v: &[f64]) -> Result<f64> {
        self.eval_scalar(v)
    }

    pub fn eval_taylor(&self, v: &[f64]) -> Result<Taylor2> {
        self.eval_scalar(&Taylor2::variables(v)?)
    }

    /// Evaluates with `vars` standing for `v0..vn`.
    pub fn eval_scalar<S: Scalar>(&self, vars: &[S]) -> Result<S> {
        let point: Vec<f64> = vars.iter().map(|s| s.val()).collect();
        self.check_point(&point)?;
        let like = vars[0].constant_like(0.0);
        self.eval_generic(&self.root, vars, &like, &point)
    }

    fn check_point(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dimension {
            return Err(LabError::precondition(format!(
                "point has {} components, expression expects {}",
                v.len(),
                self.dimension
            )));
        }
        Ok(())
    }

    fn eval_generic<S: Scalar>(&self, e: &Expr, vars: &[S], like: &S, point: &[f64]) -> Result<S> {
        let wrap = |r: Result<S>, node: &Expr| -> Result<S> {
            r.map_err(|err| match err {
                LabError::Domain { detail, .. } => {
                    LabError::domain(point, format!("{detail} in `{node}`"))
                }
                other => other,
            })
        };
        Ok(match e {
            Expr::Number(x) => like.constant_like(*x),
            Expr::Var(i) => vars[*i],
            Expr::Param(p) => like.constant_like(
                *self
                    .parameters
                    .get(p)
                    .ok_or_else(|| LabError::UnboundParameter(p.clone()))?,
            ),
            Expr::Neg(a) => -self.eval_generic(a, vars, like, point)?,
            Expr::Call { func, arg } => {
                let a = self.eval_generic(arg, vars, like, point)?;
                let r = match func {
                    Func::Sqrt => a.try_sqrt(),
                    Func::Exp => a.try_exp(),
                    Func::Log => a.try_ln(),
                    Func::Sin => Ok(a.sin_s()),
                    Func::Cos => Ok(a.cos_s()),
                };
                wrap(r, e)?
            }
            Expr::Binary { op, lhs, rhs } => {
                let a = self.eval_generic(lhs, vars, like, point)?;
                match op {
                    BinOp::Pow if !rhs.has_variables() => {
                        let q = self.eval_generic(rhs, &[] as &[f64], &0.0, point)?;
                        wrap(a.try_powf(q), e)?
                    }
                    _ => {
                        let b = self.eval_generic(rhs, vars, like, point)?;
                        match op {
                            BinOp::Add => a + b,
                            BinOp::Sub => a - b,
                            BinOp::Mul => a * b,
                            BinOp::Div => wrap(a.try_div(&b), e)?,
                            BinOp::Pow => wrap(a.try_pow(&b), e)?,
                        }
                    }
                }
            }
        })
    }

    /// Numerical check of positive 2-homogeneity on random unit directions.
    pub fn validate_homogeneity(&self, trials: usize, seed: u64) -> Result<NumericVerdict> {
        self.check_bound()?;
        homogeneity_verdict(|v| self.eval_f64(v), self.dimension, trials, seed)
    }

    /// Compares `L(v)` and `L(-v)` on random unit directions.
    pub fn check_reversibility(&self, trials: usize, seed: u64) -> Result<NumericVerdict> {
        self.check_bound()?;
        Ok(reversibility_verdict(|v| self.eval_f64(v), self.dimension, trials, seed))
    }
}

impl fmt::Display for LagrangianAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

/// `max |L(s v) - s^2 L(v)| / max(1, |L(v)|)` over random unit `v` and
/// `s` in `[0.1, 10]`. Points where `L` cannot be evaluated are skipped.
pub fn homogeneity_verdict<F>(f: F, dimension: usize, trials: usize, seed: u64) -> Result<NumericVerdict>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if trials == 0 {
        return Err(LabError::precondition("trials must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut witness = Vec::new();
    let mut used = 0;
    for _ in 0..trials {
        let v = random_unit_vector(&mut rng, dimension);
        let s: f64 = rng.gen_range(0.1..=10.0);
        let sv: Vec<f64> = v.iter().map(|x| s * x).collect();
        let (Ok(lv), Ok(lsv)) = (f(&v), f(&sv)) else {
            continue;
        };
        used += 1;
        let r = (lsv - s * s * lv).abs() / lv.abs().max(1.0);
        if !(r <= worst) {
            worst = r;
            witness = v;
        }
    }
    if used == 0 {
        return Err(LabError::domain(&[], "every trial point fell outside the domain"));
    }
    Ok(if worst < HOMOGENEITY_TOLERANCE {
        NumericVerdict::Pass { max_residual: worst, trials: used }
    } else {
        NumericVerdict::Fail { max_residual: worst, trials: used, witness }
    })
}

/// `max |L(v) - L(-v)|` over random unit `v`; not applicable when the
/// evaluable set is not closed under `v -> -v`.
pub fn reversibility_verdict<F>(f: F, dimension: usize, trials: usize, seed: u64) -> NumericVerdict
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut witness = Vec::new();
    let mut used = 0;
    for _ in 0..trials.max(1) {
        let v = random_unit_vector(&mut rng, dimension);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        match (f(&v), f(&neg)) {
            (Ok(a), Ok(b)) => {
                used += 1;
                let r = (a - b).abs();
                if !(r <= worst) {
                    worst = r;
                    witness = v;
                }
            }
            (Ok(_), Err(_)) | (Err(_), Ok(_)) => {
                return NumericVerdict::NotApplicable {
                    reason: format!("domain not closed under negation at {v:?}"),
                }
            }
            (Err(_), Err(_)) => {}
        }
    }
    if used == 0 {
        return NumericVerdict::NotApplicable {
            reason: "no evaluable trial points".into(),
        };
    }
    if worst < REVERSIBILITY_TOLERANCE {
        NumericVerdict::Pass { max_residual: worst, trials: used }
    } else {
        NumericVerdict::Fail { max_residual: worst, trials: used, witness }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::fd_hessian;

    pub(crate) const MINKOWSKI3: &str = "0.5*(-v0^2+v1^2+v2^2)";
    pub(crate) const RANDERS4: &str = "0.5*(a*sqrt(v0^2-v1^2-v2^2-v3^2)+b*v1)^2";
    pub(crate) const BEEM3: &str =
        "0.5*(1-alpha*exp(-v0^2/(v1^2+v2^2)-(v1^2+v2^2)/v0^2))*(-v0^2+v1^2+v2^2)";

    #[test]
    fn parses_minkowski() {
        let ast = LagrangianAst::parse(MINKOWSKI3, 3).unwrap();
        assert_eq!(ast.eval_f64(&[1.0, 0.0, 0.0]).unwrap(), -0.5);
        assert_eq!(ast.eval_f64(&[2.0, 1.0, 1.0]).unwrap(), -1.0);
        assert!(ast.parameter_names().is_empty());
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let ast = LagrangianAst::parse("-v0^2", 1).unwrap();
        assert_eq!(ast.eval_f64(&[3.0]).unwrap(), -9.0);
        let ast = LagrangianAst::parse("2^-1", 1).unwrap();
        assert_eq!(ast.eval_f64(&[3.0]).unwrap(), 0.5);
        let ast = LagrangianAst::parse("2^3^2", 1).unwrap();
        assert_eq!(ast.eval_f64(&[0.0]).unwrap(), 512.0);
    }

    #[test]
    fn parses_randers_with_parameters() {
        let ast = LagrangianAst::parse(RANDERS4, 4).unwrap();
        let names: Vec<_> = ast.parameter_names().into_iter().collect();
        assert_eq!(names, vec!["a".to_string(), "b".to_string()]);
        assert!(matches!(ast.eval_f64(&[1.0, 0.0, 0.0, 0.0]), Err(LabError::UnboundParameter(_))));
        let ast = ast.with_param("a", 1.0).with_param("b", 0.5);
        // 0.5 * (sqrt(1 - 0.25) + 0.25)^2
        let expected = 0.5 * (0.75f64.sqrt() + 0.25).powi(2);
        assert!((ast.eval_f64(&[1.0, 0.5, 0.0, 0.0]).unwrap() - expected).abs() < 1e-15);
        match ast.eval_f64(&[1.0, 1.0, 0.0, 0.0]) {
            Err(LabError::Domain { point, detail }) => {
                assert_eq!(point, vec![1.0, 1.0, 0.0, 0.0]);
                assert!(detail.contains("sqrt"), "{detail}");
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn parses_beem_example() {
        let ast = LagrangianAst::parse(BEEM3, 3).unwrap().with_param("alpha", 0.05);
        let v = [1.0, 0.3, 0.2];
        let rho2: f64 = 0.13;
        let factor = 1.0 - 0.05 * (-1.0 / rho2 - rho2).exp();
        let expected = 0.5 * factor * (-1.0 + rho2);
        assert!((ast.eval_f64(&v).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn beem_taylor_hessian_matches_finite_differences() {
        let ast = LagrangianAst::parse(BEEM3, 3).unwrap().with_param("alpha", 0.05);
        let v = [1.0, 0.3, 0.2];
        let exact = ast.eval_taylor(&v).unwrap().hessian();
        let fd = fd_hessian(|p| ast.eval_f64(p), &v, 1e-4).unwrap();
        assert!((exact - fd).abs().max() < 1e-6);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match LagrangianAst::parse("v0 +\n  * v1", 2) {
            Err(LabError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        match LagrangianAst::parse("(v0 + v1", 2) {
            Err(LabError::Syntax { .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(LagrangianAst::parse("v0 $ v1", 2), Err(LabError::Syntax { .. })));
    }

    #[test]
    fn rejects_unknown_functions_and_out_of_range_variables() {
        assert_eq!(
            LagrangianAst::parse("abs(v0)^2", 1),
            Err(LabError::UnknownFunction("abs".into()))
        );
        assert_eq!(
            LagrangianAst::parse("v3^2", 3),
            Err(LabError::VariableOutOfRange { index: 3, dimension: 3 })
        );
    }

    #[test]
    fn homogeneity_verdicts() {
        let mink = LagrangianAst::parse(MINKOWSKI3, 3).unwrap();
        match mink.validate_homogeneity(100, 1).unwrap() {
            NumericVerdict::Pass { max_residual, .. } => assert!(max_residual < 1e-13),
            other => panic!("{other:?}"),
        }
        let beem = LagrangianAst::parse(BEEM3, 3).unwrap().with_param("alpha", 0.05);
        match beem.validate_homogeneity(100, 2).unwrap() {
            NumericVerdict::Pass { max_residual, .. } => assert!(max_residual < 1e-12),
            other => panic!("{other:?}"),
        }
        let mixed = LagrangianAst::parse("v0^3/v1 + v0", 2).unwrap();
        match mixed.validate_homogeneity(100, 3).unwrap() {
            NumericVerdict::Fail { max_residual, .. } => assert!(max_residual > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn homogeneity_errors_when_nothing_evaluates() {
        let never = LagrangianAst::parse("sqrt(-(v0^2+v1^2))", 2).unwrap();
        assert!(never.validate_homogeneity(20, 0).is_err());
        assert!(never.validate_homogeneity(0, 0).is_err());
    }

    #[test]
    fn reversibility_verdicts() {
        let mink = LagrangianAst::parse(MINKOWSKI3, 3).unwrap();
        assert!(mink.check_reversibility(100, 1).unwrap().passed());
        let beem = LagrangianAst::parse(BEEM3, 3).unwrap().with_param("alpha", 0.05);
        assert!(beem.check_reversibility(100, 1).unwrap().passed());
        let odd = LagrangianAst::parse(
            "0.5*(-v0^2+v1^2+v2^2) + 0.1*v1*sqrt(v0^2+v1^2+v2^2)",
            3,
        )
        .unwrap();
        assert!(matches!(
            odd.check_reversibility(100, 1).unwrap(),
            NumericVerdict::Fail { .. }
        ));
        let one_sided = LagrangianAst::parse("v0^2*log(v0)/log(v0)", 2).unwrap();
        assert!(matches!(
            one_sided.check_reversibility(100, 1).unwrap(),
            NumericVerdict::NotApplicable { .. }
        ));
    }

    #[test]
    fn printer_output_reparses() {
        for (text, dim) in [(MINKOWSKI3, 3), (RANDERS4, 4), (BEEM3, 3), ("-(v0-v1)^-2*2^3^2", 2)] {
            let ast = LagrangianAst::parse(text, dim).unwrap();
            let printed = ast.to_text();
            let again = LagrangianAst::parse(&printed, dim).unwrap();
            assert_eq!(ast.root, again.root, "{printed}");
        }
    }
}
