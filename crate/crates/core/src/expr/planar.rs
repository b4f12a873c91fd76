//! Lowering of planar expressions (`z`, `zmul`, `zconj`) to two real
//! component expressions, for complex or split-complex arithmetic.

use super::{BinOp, Expr, Func};

/// Which two-dimensional algebra a planar expression lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanarKind {
    /// `i² = −1`
    Complex,
    /// `j² = +1`
    Split,
}

impl PlanarKind {
    /// Square of the imaginary unit.
    fn unit_square(self) -> f64 {
        match self {
            PlanarKind::Complex => -1.0,
            PlanarKind::Split => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlanarKind::Complex => "complex",
            PlanarKind::Split => "split",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "complex" | "C" => Some(PlanarKind::Complex),
            "split" | "H2" => Some(PlanarKind::Split),
            _ => None,
        }
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        Expr::Binary(BinOp::Add, Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        neg(b)
    } else {
        Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b))
    }
}

fn neg(a: Expr) -> Expr {
    if is_num(&a, 0.0) {
        a
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        Expr::Num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 1.0) {
        a
    } else {
        Expr::Binary(BinOp::Div, Box::new(a), Box::new(b))
    }
}

fn square(a: &Expr) -> Expr {
    if is_num(a, 0.0) {
        Expr::Num(0.0)
    } else {
        Expr::Pow(Box::new(a.clone()), 2)
    }
}

type Pair = (Expr, Expr);

struct Lowering {
    sigma: f64,
}

impl Lowering {
    fn mul(&self, (a, b): Pair, (c, d): Pair) -> Pair {
        let bd = mul(b.clone(), d.clone());
        let re = if self.sigma < 0.0 {
            sub(mul(a.clone(), c.clone()), bd)
        } else {
            add(mul(a.clone(), c.clone()), bd)
        };
        let im = add(mul(a, d), mul(b, c));
        (re, im)
    }

    fn conj((a, b): Pair) -> Pair {
        (a, neg(b))
    }

    /// `z · conj(z)`, a real quantity.
    fn norm(&self, (c, d): &Pair) -> Expr {
        if self.sigma < 0.0 {
            add(square(c), square(d))
        } else {
            sub(square(c), square(d))
        }
    }

    fn div(&self, num: Pair, den: Pair) -> Pair {
        let n = self.norm(&den);
        let (re, im) = self.mul(num, Self::conj(den));
        (div(re, n.clone()), div(im, n))
    }

    fn pow(&self, base: Pair, exp: i32) -> Pair {
        let mut result: Pair = (Expr::Num(1.0), Expr::Num(0.0));
        let mut sq = base;
        let mut e = exp.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = self.mul(result, sq.clone());
            }
            e >>= 1;
            if e > 0 {
                sq = self.mul(sq.clone(), sq);
            }
        }
        if exp < 0 {
            self.div((Expr::Num(1.0), Expr::Num(0.0)), result)
        } else {
            result
        }
    }

    fn lower(&self, e: &Expr) -> Result<Pair, String> {
        Ok(match e {
            Expr::Num(_) | Expr::Param(_) | Expr::Var(_) => (e.clone(), Expr::Num(0.0)),
            Expr::Planar => (Expr::Var(0), Expr::Var(1)),
            Expr::Neg(a) => {
                let (re, im) = self.lower(a)?;
                (neg(re), neg(im))
            }
            Expr::Binary(op, a, b) => {
                let (l, r) = (self.lower(a)?, self.lower(b)?);
                match op {
                    BinOp::Add => (add(l.0, r.0), add(l.1, r.1)),
                    BinOp::Sub => (sub(l.0, r.0), sub(l.1, r.1)),
                    BinOp::Mul => self.mul(l, r),
                    BinOp::Div => self.div(l, r),
                }
            }
            Expr::Pow(a, n) => self.pow(self.lower(a)?, *n),
            Expr::Call(Func::Zmul, args) => self.mul(self.lower(&args[0])?, self.lower(&args[1])?),
            Expr::Call(Func::Zconj, args) => Self::conj(self.lower(&args[0])?),
            Expr::Call(f, _) => return Err(f.name().to_string()),
        })
    }
}

/// Returns the real and imaginary component expressions, or the name of a
/// function that has no planar meaning.
pub(crate) fn lower(e: &Expr, kind: PlanarKind) -> Result<(Expr, Expr), String> {
    Lowering {
        sigma: kind.unit_square(),
    }
    .lower(e)
}
