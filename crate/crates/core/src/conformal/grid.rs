use std::fmt;

use crate::expr::{EvalOptions, ScalarExpr};

use super::ConformalError;

/// A tensor-product grid over a box, with an optional exclusion predicate.
///
/// Points are ordered lexicographically with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
    resolution: Vec<usize>,
    exclusion: Option<ScalarExpr>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, resolution: Vec<usize>) -> Result<Self, ConformalError> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() != resolution.len() {
            return Err(ConformalError::BadGrid("axis counts differ".into()));
        }
        for (d, ((a, b), r)) in lo.iter().zip(&hi).zip(&resolution).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(ConformalError::BadGrid(format!(
                    "axis {} needs lo < hi",
                    d + 1
                )));
            }
            if *r < 2 {
                return Err(ConformalError::BadGrid(format!(
                    "axis {} needs at least 2 points",
                    d + 1
                )));
            }
        }
        Ok(GridSpec {
            lo,
            hi,
            resolution,
            exclusion: None,
        })
    }

    /// `[lo, hi]ⁿ` with `res` points per axis.
    pub fn cube(n: usize, lo: f64, hi: f64, res: usize) -> Result<Self, ConformalError> {
        Self::new(vec![lo; n], vec![hi; n], vec![res; n])
    }

    /// Points where `predicate > 0` are skipped.
    pub fn with_exclusion(mut self, predicate: ScalarExpr) -> Result<Self, ConformalError> {
        if predicate.dim != self.dim() {
            return Err(ConformalError::DimensionMismatch {
                expected: self.dim(),
                got: predicate.dim,
            });
        }
        self.exclusion = Some(predicate);
        Ok(self)
    }

    /// Parses `[lo,hi]^n@res` or `[a,b]x[c,d]@r1,r2` (a single resolution
    /// applies to every axis).
    pub fn parse(src: &str) -> Result<Self, ConformalError> {
        let bad = |m: &str| ConformalError::BadGrid(format!("{m} in `{src}`"));
        let compact: String = src.chars().filter(|c| !c.is_whitespace()).collect();
        let (boxes, res) = compact
            .split_once('@')
            .ok_or_else(|| bad("missing `@resolution`"))?;
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut rest = boxes;
        loop {
            let inner = rest.strip_prefix('[').ok_or_else(|| bad("expected `[`"))?;
            let close = inner.find(']').ok_or_else(|| bad("expected `]`"))?;
            let (a, b) = inner[..close]
                .split_once(',')
                .ok_or_else(|| bad("expected `lo,hi`"))?;
            let a: f64 = a.parse().map_err(|_| bad("bad number"))?;
            let b: f64 = b.parse().map_err(|_| bad("bad number"))?;
            rest = &inner[close + 1..];
            if let Some(pow) = rest.strip_prefix('^') {
                let n: usize = pow.parse().map_err(|_| bad("bad exponent"))?;
                if n == 0 {
                    return Err(bad("zero exponent"));
                }
                lo.extend(std::iter::repeat_n(a, n));
                hi.extend(std::iter::repeat_n(b, n));
                break;
            }
            lo.push(a);
            hi.push(b);
            if rest.is_empty() {
                break;
            }
            rest = rest
                .strip_prefix('x')
                .ok_or_else(|| bad("expected `x` between intervals"))?;
        }
        let res: Vec<usize> = res
            .split(',')
            .map(|r| r.parse().map_err(|_| bad("bad resolution")))
            .collect::<Result<_, _>>()?;
        let resolution = match res.len() {
            1 => vec![res[0]; lo.len()],
            k if k == lo.len() => res,
            _ => return Err(bad("resolution count does not match axes")),
        };
        Self::new(lo, hi, resolution)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn exclusion(&self) -> Option<&ScalarExpr> {
        self.exclusion.as_ref()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.resolution[axis] - 1) as f64
    }

    /// Per-axis indices of the `flat`-th point.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = flat % self.resolution[d];
            flat /= self.resolution[d];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .fold(0, |acc, (i, r)| acc * r + i)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.resolution[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + self.spacing(axis) * i as f64
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.coordinate(d, i))
            .collect()
    }

    /// Whether the exclusion predicate rejects `x`. A predicate that cannot be
    /// evaluated counts as excluding.
    pub fn excludes(&self, x: &[f64]) -> bool {
        match &self.exclusion {
            None => false,
            Some(p) => !matches!(p.eval(x, &EvalOptions::default()), Ok(v) if v <= 0.0),
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in 0..self.dim() {
            if d > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{},{}]", self.lo[d], self.hi[d])?;
        }
        let res: Vec<String> = self.resolution.iter().map(|r| r.to_string()).collect();
        write!(f, "@{}", res.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        let g = GridSpec::parse("[-0.4,0.4]^2@21").unwrap();
        assert_eq!(g.dim(), 2);
        assert_eq!(g.len(), 441);
        assert_eq!(g.point(0), vec![-0.4, -0.4]);
        assert_eq!(g.point(440), vec![0.4, 0.4]);
        assert!((g.point(220)[0]).abs() < 1e-15);

        let g = GridSpec::parse("[0, 1] x [2, 4] @ 3, 5").unwrap();
        assert_eq!(g.resolution(), &[3, 5]);
        assert_eq!(g.point(1), vec![0.0, 2.5]);
        assert_eq!(g.point(5), vec![0.5, 2.0]);
        assert_eq!(GridSpec::parse(&g.to_string()).unwrap(), g);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "[0,1]^2",
            "[1,0]^2@3",
            "[0,1]^2@1",
            "[0,1]x[0,1]@2,2,2",
            "(0,1)@3",
            "[0,1]^0@3",
            "[0;1]@2",
        ] {
            assert!(
                matches!(GridSpec::parse(bad), Err(ConformalError::BadGrid(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn ravel_round_trip() {
        let g = GridSpec::new(vec![0.0; 3], vec![1.0; 3], vec![2, 3, 4]).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(flat)), flat);
        }
        assert_eq!(g.unravel(1), vec![0, 0, 1]);
    }

    #[test]
    fn exclusion_predicate() {
        let g = GridSpec::cube(2, -1.0, 1.0, 3)
            .unwrap()
            .with_exclusion(ScalarExpr::parse("0.01 - x1^2 - x2^2", 2).unwrap())
            .unwrap();
        assert!(g.excludes(&[0.0, 0.0]));
        assert!(!g.excludes(&[1.0, 0.0]));
        assert!(GridSpec::cube(3, 0.0, 1.0, 2)
            .unwrap()
            .with_exclusion(ScalarExpr::parse("x1", 2).unwrap())
            .is_err());
    }
}
