//! A small expression language for defining maps componentwise.
//!
//! Components are written over `x1..xn` with real literals, named parameters,
//! `+ - * /`, integer powers `^`, and the functions `ln`, `abs`, `exp`.
//! Two-dimensional maps may instead be written as a single planar expression
//! in `z` using `zmul` and `zconj`, in complex or split-complex arithmetic;
//! those are lowered to two real components.
//!
//! Map files look like:
//!
//! ```text
//! # the gallery map x/(a + b|x|²) on the plane
//! dim = 2
//! param a = 1
//! param b = 1
//! f1 = x1 / (a + b * (x1^2 + x2^2))
//! f2 = x2 / (a + b * (x1^2 + x2^2))
//! ```
//!
//! or, for planar maps, `planar = complex` (or `split`) followed by
//! `F = z / (a + b * zmul(z, zconj(z)))`.

mod parse;
mod planar;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::jets::{Scalar, VectorMap};

pub use parse::{parse, parse_planar, ParseError, ParseErrorKind};
pub use planar::PlanarKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ln,
    Abs,
    Exp,
    /// Planar product of two planar values.
    Zmul,
    /// Planar conjugation.
    Zconj,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Zmul => "zmul",
            Func::Zconj => "zconj",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Zmul => 2,
            _ => 1,
        }
    }

    pub fn is_planar(self) -> bool {
        matches!(self, Func::Zmul | Func::Zconj)
    }
}

/// Expression AST. Variables are 0-based internally and print as `x1..xn`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Param(String),
    /// The planar variable `z`; only valid before lowering.
    Planar,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn param(name: &str) -> Self {
        Expr::Param(name.to_string())
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, arg: Expr) -> Self {
        Expr::Call(f, vec![arg])
    }

    pub fn powi(self, n: i32) -> Self {
        Expr::Pow(Box::new(self), n)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        let mut best = None;
        self.visit(&mut |e| {
            if let Expr::Var(i) = e {
                best = Some(best.map_or(*i, |b: usize| b.max(*i)));
            }
        });
        best
    }

    fn contains_planar(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            found |= matches!(e, Expr::Planar) || matches!(e, Expr::Call(f, _) if f.is_planar());
        });
        found
    }

    /// Names of all parameters referenced.
    pub fn params(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Param(p) = e {
                if !names.contains(p) {
                    names.push(p.clone());
                }
            }
        });
        names
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Neg(a) | Expr::Pow(a, _) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
            _ => {}
        }
    }

    /// Replaces every variable `x_i` by `inputs[i]`.
    pub fn substitute(&self, inputs: &[Expr]) -> Expr {
        match self {
            Expr::Var(i) => inputs[*i].clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(inputs))),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.substitute(inputs)), *n),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(inputs), b.substitute(inputs)),
            Expr::Call(func, args) => {
                Expr::Call(*func, args.iter().map(|a| a.substitute(inputs)).collect())
            }
            other => other.clone(),
        }
    }

    /// Evaluates on any [`Scalar`]. Domain violations report the offending
    /// subexpression.
    pub fn eval<T: Scalar>(
        &self,
        x: &[T],
        params: &BTreeMap<String, f64>,
        opts: &EvalOptions,
    ) -> Result<T, EvalError> {
        let like = &x[0];
        let domain = |op: &'static str, e: &Expr, value: f64| EvalError::Domain {
            op,
            subexpr: e.to_string(),
            value,
        };
        Ok(match self {
            Expr::Num(v) => like.lift(*v),
            Expr::Var(i) => x.get(*i).cloned().ok_or(EvalError::DimensionMismatch {
                expected: *i + 1,
                got: x.len(),
            })?,
            Expr::Param(p) => like.lift(
                *params
                    .get(p)
                    .ok_or_else(|| EvalError::UnboundParameter(p.clone()))?,
            ),
            Expr::Planar => return Err(EvalError::Unlowered),
            Expr::Neg(a) => -a.eval(x, params, opts)?,
            Expr::Binary(op, a, b) => {
                let l = a.eval(x, params, opts)?;
                let r = b.eval(x, params, opts)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        let d = r.value();
                        if d == 0.0 || d.abs() < opts.singular_margin || !d.is_finite() {
                            return Err(domain("division", b, d));
                        }
                        l * r.recip()
                    }
                }
            }
            Expr::Pow(a, n) => {
                let base = a.eval(x, params, opts)?;
                let v = base.value();
                if *n < 0 && (v == 0.0 || v.abs() < opts.singular_margin) {
                    return Err(domain("negative power", a, v));
                }
                base.powi(*n)
            }
            Expr::Call(func, args) => {
                let arg = args[0].eval(x, params, opts)?;
                let v = arg.value();
                match func {
                    Func::Ln => {
                        if !(v > 0.0) || v < opts.singular_margin {
                            return Err(domain("ln", &args[0], v));
                        }
                        arg.ln()
                    }
                    Func::Exp => arg.exp(),
                    Func::Abs => {
                        if v.abs() < opts.singular_margin {
                            return Err(domain("abs", &args[0], v));
                        }
                        arg.abs().ok_or_else(|| domain("abs", &args[0], v))?
                    }
                    Func::Zmul | Func::Zconj => return Err(EvalError::Unlowered),
                }
            }
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if v.is_sign_negative() {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Planar => write!(f, "z"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.write_child(f, 3)
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                a.write_child(f, p)?;
                write!(f, " {} ", op.symbol())?;
                b.write_child(f, p + 1)
            }
            Expr::Pow(a, n) => {
                a.write_child(f, 5)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Evaluation knobs shared by plain and jet evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Denominators, `ln` arguments and `abs` arguments closer to zero than
    /// this are treated as domain violations. Zero means "exactly singular".
    pub singular_margin: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            singular_margin: 0.0,
        }
    }
}

impl EvalOptions {
    pub fn with_margin(singular_margin: f64) -> Self {
        EvalOptions { singular_margin }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{op} domain violation in `{subexpr}` (value {value})")]
    Domain {
        op: &'static str,
        subexpr: String,
        value: f64,
    },
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("planar expression was not lowered")]
    Unlowered,
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("line {line}: {source}")]
    Syntax { line: usize, source: ParseError },
    #[error("line {line}: {message}")]
    File { line: usize, message: String },
    #[error("map needs {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("component {component} uses x{var} but dim is {dim}")]
    VariableOutOfRange {
        component: usize,
        var: usize,
        dim: usize,
    },
    #[error("planar builtins are only allowed in planar definitions")]
    PlanarInComponents,
    #[error("`{0}` has no planar meaning")]
    NotPlanar(String),
    #[error("parameter `{name}` bound to both {a} and {b}")]
    ParamConflict { name: String, a: f64, b: f64 },
    #[error("dimension mismatch: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A map `Rⁿ → Rⁿ` given by one expression per component.
#[derive(Debug, Clone, PartialEq)]
pub struct MapExpr {
    dim: usize,
    components: Vec<Expr>,
    params: BTreeMap<String, f64>,
    planar: Option<(PlanarKind, Expr)>,
}

impl MapExpr {
    pub fn new(dim: usize, components: Vec<Expr>) -> Result<Self, MapError> {
        if components.len() != dim || dim == 0 {
            return Err(MapError::ComponentCount {
                expected: dim,
                got: components.len(),
            });
        }
        for (c, e) in components.iter().enumerate() {
            if e.contains_planar() {
                return Err(MapError::PlanarInComponents);
            }
            if let Some(v) = e.max_var() {
                if v >= dim {
                    return Err(MapError::VariableOutOfRange {
                        component: c + 1,
                        var: v + 1,
                        dim,
                    });
                }
            }
        }
        Ok(MapExpr {
            dim,
            components,
            params: BTreeMap::new(),
            planar: None,
        })
    }

    /// Parses one expression per component; `dim` is the number of strings.
    pub fn parse_components(sources: &[&str]) -> Result<Self, MapError> {
        let dim = sources.len();
        let comps = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                parse(s, dim).map_err(|source| MapError::Syntax {
                    line: i + 1,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dim, comps)
    }

    /// A two-component map from a planar expression in `z`.
    pub fn planar(source: &str, kind: PlanarKind) -> Result<Self, MapError> {
        let e = parse_planar(source).map_err(|source| MapError::Syntax { line: 1, source })?;
        Self::from_planar_expr(e, kind)
    }

    pub fn from_planar_expr(e: Expr, kind: PlanarKind) -> Result<Self, MapError> {
        let (re, im) = planar::lower(&e, kind).map_err(MapError::NotPlanar)?;
        let mut map = Self::new(2, vec![re, im])?;
        map.planar = Some((kind, e));
        Ok(map)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, (0..n).map(Expr::Var).collect()).expect("identity is well formed")
    }

    /// `f^i = Σ_k m[i][k] x^k` (row-major `n × n`).
    pub fn linear(n: usize, m: &[f64]) -> Self {
        assert_eq!(m.len(), n * n);
        let comps = (0..n)
            .map(|i| {
                let mut acc: Option<Expr> = None;
                for k in 0..n {
                    let c = m[i * n + k];
                    if c == 0.0 {
                        continue;
                    }
                    let term = if c == 1.0 {
                        Expr::Var(k)
                    } else {
                        Expr::binary(BinOp::Mul, Expr::Num(c), Expr::Var(k))
                    };
                    acc = Some(match acc {
                        None => term,
                        Some(a) => Expr::binary(BinOp::Add, a, term),
                    });
                }
                acc.unwrap_or(Expr::Num(0.0))
            })
            .collect();
        Self::new(n, comps).expect("linear map is well formed")
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn bind(&mut self, name: &str, value: f64) {
        self.params.insert(name.to_string(), value);
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn planar_source(&self) -> Option<(PlanarKind, &Expr)> {
        self.planar.as_ref().map(|(k, e)| (*k, e))
    }

    /// Parameters referenced by some component but not bound.
    pub fn unbound_params(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.components {
            for p in c.params() {
                if !self.params.contains_key(&p) && !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.eval(point)
    }

    /// Evaluates with extra bindings that take precedence over stored ones.
    pub fn evaluate_with(
        &self,
        point: &[f64],
        params: &BTreeMap<String, f64>,
    ) -> Result<Vec<f64>, EvalError> {
        let mut merged = self.params.clone();
        merged.extend(params.iter().map(|(k, v)| (k.clone(), *v)));
        self.eval_params(point, &merged, &EvalOptions::default())
    }

    fn eval_params<T: Scalar>(
        &self,
        x: &[T],
        params: &BTreeMap<String, f64>,
        opts: &EvalOptions,
    ) -> Result<Vec<T>, EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.components
            .iter()
            .map(|c| c.eval(x, params, opts))
            .collect()
    }

    /// `self ∘ inner`: substitutes the components of `inner` for `x1..xn`.
    pub fn compose(&self, inner: &MapExpr) -> Result<MapExpr, MapError> {
        if inner.dim != self.dim {
            return Err(MapError::DimensionMismatch {
                expected: self.dim,
                got: inner.dim,
            });
        }
        let mut params = self.params.clone();
        for (k, v) in &inner.params {
            if let Some(a) = params.get(k) {
                if a != v {
                    return Err(MapError::ParamConflict {
                        name: k.clone(),
                        a: *a,
                        b: *v,
                    });
                }
            }
            params.insert(k.clone(), *v);
        }
        let comps = self
            .components
            .iter()
            .map(|c| c.substitute(&inner.components))
            .collect();
        let mut out = MapExpr::new(self.dim, comps)?;
        out.params = params;
        Ok(out)
    }

    /// Parses the map file format described in the module docs.
    pub fn parse_file(text: &str) -> Result<Self, MapError> {
        let ferr = |line: usize, message: String| MapError::File { line, message };
        let mut dim: Option<usize> = None;
        let mut kind = PlanarKind::Complex;
        let mut params = BTreeMap::new();
        let mut comps: BTreeMap<usize, (usize, usize, String)> = BTreeMap::new();
        let mut planar_src: Option<(usize, usize, String)> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("");
            if body.trim().is_empty() {
                continue;
            }
            let eq = body
                .find('=')
                .ok_or_else(|| ferr(line, "expected `name = value`".into()))?;
            let lhs = body[..eq].trim();
            let rhs_start = eq + 1;
            let rhs = &body[rhs_start..];
            let mut words = lhs.split_whitespace();
            let head = words.next().unwrap_or("");
            match (head, words.next()) {
                ("dim", None) => {
                    let n: usize = rhs
                        .trim()
                        .parse()
                        .map_err(|_| ferr(line, format!("bad dimension `{}`", rhs.trim())))?;
                    if n == 0 {
                        return Err(ferr(line, "dimension must be positive".into()));
                    }
                    dim = Some(n);
                }
                ("planar", None) => {
                    kind = PlanarKind::from_name(rhs.trim()).ok_or_else(|| {
                        ferr(line, format!("unknown planar kind `{}`", rhs.trim()))
                    })?;
                }
                ("param", Some(name)) => {
                    let v: f64 = rhs
                        .trim()
                        .parse()
                        .map_err(|_| ferr(line, format!("bad value for `{name}`")))?;
                    if !v.is_finite() {
                        return Err(ferr(line, format!("value for `{name}` must be finite")));
                    }
                    params.insert(name.to_string(), v);
                }
                ("F", None) => planar_src = Some((line, rhs_start, rhs.to_string())),
                (h, None) if h.starts_with('f') && h[1..].parse::<usize>().is_ok() => {
                    let i: usize = h[1..].parse().unwrap_or(0);
                    if i == 0 {
                        return Err(ferr(line, "components are numbered from f1".into()));
                    }
                    if comps
                        .insert(i, (line, rhs_start, rhs.to_string()))
                        .is_some()
                    {
                        return Err(ferr(line, format!("duplicate component f{i}")));
                    }
                }
                _ => return Err(ferr(line, format!("unrecognised line `{}`", body.trim()))),
            }
        }

        // Shift expression error positions to file coordinates.
        let locate = |line: usize, offset: usize, mut e: ParseError| {
            if e.line == 1 {
                e.column += offset;
            }
            e.line += line - 1;
            MapError::Syntax {
                line: e.line,
                source: e,
            }
        };

        let mut map = if let Some((line, off, src)) = planar_src {
            if !comps.is_empty() {
                return Err(ferr(
                    line,
                    "`F` cannot be combined with f<i> components".into(),
                ));
            }
            if dim.is_some_and(|d| d != 2) {
                return Err(ferr(line, "planar maps are two-dimensional".into()));
            }
            let e = parse_planar(&src).map_err(|e| locate(line, off, e))?;
            Self::from_planar_expr(e, kind)?
        } else {
            let n = dim.ok_or_else(|| ferr(0, "missing `dim = n` header".into()))?;
            let mut exprs = Vec::with_capacity(n);
            for i in 1..=n {
                let (line, off, src) = comps
                    .get(&i)
                    .ok_or_else(|| ferr(0, format!("missing component f{i}")))?;
                exprs.push(parse(src, n).map_err(|e| locate(*line, *off, e))?);
            }
            if let Some((&extra, (line, _, _))) = comps.iter().find(|(i, _)| **i > n) {
                return Err(ferr(*line, format!("component f{extra} exceeds dim {n}")));
            }
            Self::new(n, exprs)?
        };
        map.params = params;
        Ok(map)
    }

    /// Renders in the map file format; parses back to an equal map.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("dim = {}\n", self.dim);
        for (k, v) in &self.params {
            out.push_str(&format!("param {k} = {v:?}\n"));
        }
        match &self.planar {
            Some((kind, e)) => {
                out.push_str(&format!("planar = {}\nF = {e}\n", kind.name()));
            }
            None => {
                for (i, c) in self.components.iter().enumerate() {
                    out.push_str(&format!("f{} = {c}\n", i + 1));
                }
            }
        }
        out
    }
}

impl VectorMap for MapExpr {
    fn dim(&self) -> usize {
        self.dim
    }

    fn map<T: Scalar>(&self, x: &[T], opts: &EvalOptions) -> Result<Vec<T>, EvalError> {
        self.eval_params(x, &self.params, opts)
    }
}

/// A single-component expression used as a scalar field over `x1..xn`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    pub dim: usize,
    pub expr: Expr,
    pub params: BTreeMap<String, f64>,
}

impl ScalarExpr {
    pub fn parse(src: &str, dim: usize) -> Result<Self, ParseError> {
        Ok(ScalarExpr {
            dim,
            expr: parse(src, dim)?,
            params: BTreeMap::new(),
        })
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn eval<T: Scalar>(&self, x: &[T], opts: &EvalOptions) -> Result<T, EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.expr.eval(x, &self.params, opts)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.eval(x, &EvalOptions::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_evaluates_to_input() {
        let m = MapExpr::parse_components(&["x1", "x2"]).unwrap();
        assert_eq!(m.evaluate(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(MapExpr::identity(2), m);
    }

    #[test]
    fn planar_gallery_with_b_zero_is_identity_for_a_one() {
        let m = MapExpr::planar("z / (a + b * zmul(z, zconj(z)))", PlanarKind::Complex)
            .unwrap()
            .with_param("a", 1.0)
            .with_param("b", 0.0);
        assert_eq!(m.evaluate(&[2.0, 3.0]).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn log_gallery_text_form() {
        let src = "f0 * ln(abs(x1 / c)) / (a + b * ln(abs(x1 * x2 * x3 * x4 / (c * c * c * c))))";
        let comps: Vec<String> = (1..=4)
            .map(|i| src.replace("x1 /", &format!("x{i} /")))
            .collect();
        let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
        let m = MapExpr::parse_components(&refs)
            .unwrap()
            .with_param("f0", 1.0)
            .with_param("c", 1.0)
            .with_param("a", 1.0)
            .with_param("b", 0.0);
        let v = m.evaluate(&[std::f64::consts::E, 1.0, 1.0, 1.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert_eq!(&v[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn planar_products() {
        let c = MapExpr::planar("zmul(z, z)", PlanarKind::Complex).unwrap();
        assert_eq!(c.evaluate(&[1.0, 2.0]).unwrap(), vec![-3.0, 4.0]);
        let s = MapExpr::planar("z^2", PlanarKind::Split).unwrap();
        assert_eq!(s.evaluate(&[1.0, 2.0]).unwrap(), vec![5.0, 4.0]);
        let inv = MapExpr::planar("1 / zconj(z)", PlanarKind::Complex).unwrap();
        let v = inv.evaluate(&[1.0, 1.0]).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
        let neg = MapExpr::planar("z^-2", PlanarKind::Complex).unwrap();
        let v = neg.evaluate(&[0.0, 1.0]).unwrap();
        assert!((v[0] + 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        assert!(matches!(
            MapExpr::planar("ln(z)", PlanarKind::Complex),
            Err(MapError::NotPlanar(_))
        ));
    }

    #[test]
    fn evaluation_errors() {
        let m = MapExpr::parse_components(&["1 / x1", "ln(x2)"]).unwrap();
        match m.evaluate(&[0.0, 1.0]).unwrap_err() {
            EvalError::Domain { op, subexpr, .. } => {
                assert_eq!(op, "division");
                assert_eq!(subexpr, "x1");
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            m.evaluate(&[1.0, -1.0]),
            Err(EvalError::Domain { op: "ln", .. })
        ));
        let p = MapExpr::parse_components(&["a * x1"]).unwrap();
        assert_eq!(
            p.evaluate(&[1.0]).unwrap_err(),
            EvalError::UnboundParameter("a".into())
        );
        assert_eq!(p.unbound_params(), vec!["a".to_string()]);
        let mut extra = BTreeMap::new();
        extra.insert("a".to_string(), 3.0);
        assert_eq!(p.evaluate_with(&[2.0], &extra).unwrap(), vec![6.0]);
    }

    #[test]
    fn singular_margin_widens_domain_checks() {
        let m = MapExpr::parse_components(&["1 / x1"]).unwrap();
        let opts = EvalOptions::with_margin(1e-3);
        assert!(m.map(&[5e-4], &opts).is_err());
        assert!(m.map(&[2e-3], &opts).is_ok());
    }

    #[test]
    fn map_file_round_trip() {
        let text = "# mobius\ndim = 2\nparam a = 1\nparam b = 0.5\nf1 = x1 / (a + b * (x1^2 + x2^2))\nf2 = x2 / (a + b * (x1^2 + x2^2))\n";
        let m = MapExpr::parse_file(text).unwrap();
        assert_eq!(m.params().len(), 2);
        let back = MapExpr::parse_file(&m.to_file_string()).unwrap();
        assert_eq!(back, m);

        let planar = "planar = split\nparam a = 2\nF = z / a\n";
        let m = MapExpr::parse_file(planar).unwrap();
        assert_eq!(m.evaluate(&[2.0, 4.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(MapExpr::parse_file(&m.to_file_string()).unwrap(), m);
    }

    #[test]
    fn map_file_errors_carry_positions() {
        let err = MapExpr::parse_file("dim = 2\nf1 = x1\nf2 = x1 + * x2\n").unwrap_err();
        match err {
            MapError::Syntax { line, source } => {
                assert_eq!(line, 3);
                assert_eq!(source.column, 11);
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(MapExpr::parse_file("dim = 2\nf1 = x1\n").is_err());
        assert!(MapExpr::parse_file("f1 = x1\n").is_err());
        assert!(MapExpr::parse_file("dim = 1\nf1 = x1\nf1 = x1\n").is_err());
        assert!(MapExpr::parse_file("dim = 1\nf1 = x1\nf2 = x1\n").is_err());
        assert!(MapExpr::parse_file("dim = 1\nwhat\n").is_err());
    }

    #[test]
    fn composition_substitutes() {
        let outer = MapExpr::parse_components(&["x1 * x2", "x1 + x2"]).unwrap();
        let inner = MapExpr::linear(2, &[2.0, 0.0, 0.0, 3.0]);
        let c = outer.compose(&inner).unwrap();
        assert_eq!(c.evaluate(&[1.0, 1.0]).unwrap(), vec![6.0, 5.0]);
    }
}
