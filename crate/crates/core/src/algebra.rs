//! Commutative associative unital algebras ("polynumbers") given by structure
//! constants, and the tensors derived from them.
//!
//! An algebra of dimension `n` is fixed by the products of its basis elements,
//! `e_k e_j = p^i_kj e_i`. Everything else in this module (the unit
//! decomposition `ε`, the metric-like tensors `q_ij`, `q^ij` and the operator
//! tensor `Q^i_r`) is obtained from those constants by contraction.
//!
//! Definition files are line oriented:
//!
//! ```text
//! # comments start with '#'
//! name   H4psi            (optional)
//! dim    4
//! labels psi1 psi2 psi3 psi4   (optional, n identifiers)
//! p 1 1 1 1               (p i k j value, indices 1-based)
//! ```
//!
//! Unlisted entries are zero. Both `p i k j` and `p i j k` must be listed for
//! off-diagonal products since commutativity is checked, not assumed.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Tolerance used when validating the algebra axioms.
const AXIOM_TOL: f64 = 1e-12;
/// `det(q_ij)` below this magnitude marks the algebra as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("structure constants have length {got}, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("not commutative: p^{i}_{k}{j} != p^{i}_{j}{k}")]
    NotCommutative { i: usize, k: usize, j: usize },
    #[error("not associative at (e{a} e{b}) e{c}, component {i}")]
    NotAssociative {
        a: usize,
        b: usize,
        c: usize,
        i: usize,
    },
    #[error("algebra has no unit element")]
    NoUnit,
    #[error("operands belong to different algebras ({left} vs {right})")]
    Mismatch { left: String, right: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis map is not invertible")]
    SingularBasis,
    #[error("definition line {line}: {message}")]
    Definition { line: usize, message: String },
    #[error("unknown algebra `{0}`")]
    Unknown(String),
}

/// A finite-dimensional commutative associative unital algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraSpec {
    name: String,
    dim: usize,
    /// Dense `p^i_kj`, index `(i * n + k) * n + j`.
    structure: Vec<f64>,
    basis_labels: Vec<String>,
    unit: Vec<f64>,
}

impl AlgebraSpec {
    /// Validates commutativity, associativity and the existence of a unit.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        structure: Vec<f64>,
        basis_labels: Vec<String>,
    ) -> Result<Self, AlgebraError> {
        if dim == 0 {
            return Err(AlgebraError::ZeroDimension);
        }
        if structure.len() != dim * dim * dim {
            return Err(AlgebraError::BadLength {
                expected: dim * dim * dim,
                got: structure.len(),
            });
        }
        let basis_labels = if basis_labels.is_empty() {
            (1..=dim).map(|i| format!("e{i}")).collect()
        } else if basis_labels.len() != dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: dim,
                got: basis_labels.len(),
            });
        } else {
            basis_labels
        };
        let mut alg = AlgebraSpec {
            name: name.into(),
            dim,
            structure,
            basis_labels,
            unit: Vec::new(),
        };
        alg.check_commutative()?;
        alg.check_associative()?;
        alg.unit = alg.solve_unit()?;
        Ok(alg)
    }

    /// Builds an algebra from a closure giving `p^i_kj`.
    pub fn from_fn(
        name: impl Into<String>,
        dim: usize,
        labels: &[&str],
        p: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self, AlgebraError> {
        let mut structure = vec![0.0; dim * dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                for j in 0..dim {
                    structure[(i * dim + k) * dim + j] = p(i, k, j);
                }
            }
        }
        let labels = labels.iter().map(|s| s.to_string()).collect();
        Self::new(name, dim, structure, labels)
    }

    /// Complex numbers on the basis `{1, i}`.
    pub fn complex() -> Self {
        Self::from_fn("C", 2, &["1", "i"], |i, k, j| match (i, k, j) {
            (0, 0, 0) => 1.0,
            (1, 0, 1) | (1, 1, 0) => 1.0,
            (0, 1, 1) => -1.0,
            _ => 0.0,
        })
        .expect("complex numbers form a valid algebra")
    }

    /// Double (split-complex) numbers `H₂` on the basis `{1, j}`, `j² = 1`.
    pub fn split_complex() -> Self {
        Self::from_fn("H2", 2, &["1", "j"], |i, k, j| match (i, k, j) {
            (0, 0, 0) | (0, 1, 1) => 1.0,
            (1, 0, 1) | (1, 1, 0) => 1.0,
            _ => 0.0,
        })
        .expect("split-complex numbers form a valid algebra")
    }

    /// `H₂` in its isotropic (idempotent) basis: componentwise product.
    pub fn h2_psi() -> Self {
        Self::diagonal("H2psi", &["psi1", "psi2"])
    }

    /// `H₄` in the ψ basis, `ψ_k ψ_j = δ_kj ψ_j`.
    pub fn h4_psi() -> Self {
        Self::diagonal("H4psi", &["psi1", "psi2", "psi3", "psi4"])
    }

    /// `H₄` on the basis `{1, j, k, jk}` with `j² = k² = (jk)² = 1`.
    ///
    /// Basis element `a` multiplies as `e_a e_b = e_(a xor b)`.
    pub fn h4_x() -> Self {
        Self::from_fn("H4x", 4, &["1", "j", "k", "jk"], |i, k, j| {
            if i == k ^ j {
                1.0
            } else {
                0.0
            }
        })
        .expect("H4 on {1,j,k,jk} is a valid algebra")
    }

    /// Dual numbers `{1, ε}` with `ε² = 0`.
    pub fn dual() -> Self {
        Self::from_fn("dual", 2, &["1", "eps"], |i, k, j| match (i, k, j) {
            (0, 0, 0) => 1.0,
            (1, 0, 1) | (1, 1, 0) => 1.0,
            _ => 0.0,
        })
        .expect("dual numbers form a valid algebra")
    }

    fn diagonal(name: &str, labels: &[&str]) -> Self {
        Self::from_fn(name, labels.len(), labels, |i, k, j| {
            if i == k && k == j {
                1.0
            } else {
                0.0
            }
        })
        .expect("diagonal algebra is valid")
    }

    /// Looks up a built-in algebra by name (case-insensitive).
    pub fn builtin(name: &str) -> Result<Self, AlgebraError> {
        match name.to_ascii_lowercase().as_str() {
            "c" | "complex" => Ok(Self::complex()),
            "h2" | "split" | "split-complex" => Ok(Self::split_complex()),
            "h2psi" => Ok(Self::h2_psi()),
            "h4psi" | "h4" => Ok(Self::h4_psi()),
            "h4x" => Ok(Self::h4_x()),
            "dual" => Ok(Self::dual()),
            _ => Err(AlgebraError::Unknown(name.to_string())),
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 6] = ["C", "H2", "H2psi", "H4psi", "H4x", "dual"];

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    /// Structure constant `p^i_kj` (0-based indices).
    #[inline]
    pub fn p(&self, i: usize, k: usize, j: usize) -> f64 {
        self.structure[(i * self.dim + k) * self.dim + j]
    }

    /// Matrix of multiplication by `e_k`: entry `(i, j)` is `p^i_kj`.
    pub fn left_mul_matrix(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.p(i, k, j))
    }

    /// True when `p^i_kj` is 1 for `i = k = j` and 0 otherwise.
    /// Equal structure constants, ignoring names and labels.
    pub fn same_structure(&self, other: &AlgebraSpec) -> bool {
        self.dim == other.dim && self.structure == other.structure
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| {
            (0..n).all(|k| {
                (0..n).all(|j| {
                    let expected = if i == k && k == j { 1.0 } else { 0.0 };
                    self.p(i, k, j) == expected
                })
            })
        })
    }

    fn check_commutative(&self) -> Result<(), AlgebraError> {
        let n = self.dim;
        for i in 0..n {
            for k in 0..n {
                for j in (k + 1)..n {
                    if (self.p(i, k, j) - self.p(i, j, k)).abs() > AXIOM_TOL {
                        return Err(AlgebraError::NotCommutative { i, k, j });
                    }
                }
            }
        }
        Ok(())
    }

    /// `(e_a e_b) e_c = e_a (e_b e_c)` for every triple, by full enumeration.
    fn check_associative(&self) -> Result<(), AlgebraError> {
        let n = self.dim;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for i in 0..n {
                        let mut left = 0.0;
                        let mut right = 0.0;
                        for m in 0..n {
                            left += self.p(m, a, b) * self.p(i, m, c);
                            right += self.p(m, b, c) * self.p(i, a, m);
                        }
                        if (left - right).abs() > AXIOM_TOL {
                            return Err(AlgebraError::NotAssociative { a, b, c, i });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves `ε^k p^i_kj = δ^i_j` as an `n² × n` linear system.
    fn solve_unit(&self) -> Result<Vec<f64>, AlgebraError> {
        let n = self.dim;
        let system = DMatrix::from_fn(n * n, n, |row, k| {
            let (i, j) = (row / n, row % n);
            self.p(i, k, j)
        });
        let rhs = DVector::from_fn(n * n, |row, _| if row / n == row % n { 1.0 } else { 0.0 });
        let svd = system.clone().svd(true, true);
        let eps = svd.solve(&rhs, 1e-12).map_err(|_| AlgebraError::NoUnit)?;
        let defect = (&system * &eps - &rhs).amax();
        if !defect.is_finite() || defect > 1e-10 {
            return Err(AlgebraError::NoUnit);
        }
        // Prefer a nearby dyadic value when it is at least as good; this makes
        // units of integer algebras exact.
        let snapped = eps.map(|v| (v * 1048576.0).round() / 1048576.0);
        if (&system * &snapped - &rhs).amax() <= defect {
            return Ok(snapped.iter().copied().collect());
        }
        Ok(eps.iter().copied().collect())
    }

    /// Coefficients `ε^i` of the unit element in this basis.
    pub fn unit_coefficients(&self) -> &[f64] {
        &self.unit
    }

    pub fn derived_tensors(&self) -> DerivedTensors {
        DerivedTensors::compute(self)
    }

    /// `det(q_ij)` vanishes within [`DEGENERACY_TOL`].
    pub fn is_degenerate(&self) -> bool {
        q_lower(self).determinant().abs() <= DEGENERACY_TOL
    }

    /// The same algebra expressed in the coordinates produced by `map`.
    ///
    /// If `y = F x`, the new basis is `e'_a = (F⁻¹)^b_a e_b` and
    /// `p'^i_kj = F^i_a p^a_bc (F⁻¹)^b_k (F⁻¹)^c_j`.
    pub fn in_basis(
        &self,
        map: &BasisMap,
        name: impl Into<String>,
        labels: &[&str],
    ) -> Result<Self, AlgebraError> {
        let n = self.dim;
        if map.dim() != n {
            return Err(AlgebraError::DimensionMismatch {
                expected: n,
                got: map.dim(),
            });
        }
        let (f, inv) = (&map.forward, &map.inverse);
        Self::from_fn(name, n, labels, |i, k, j| {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        acc += f[(i, a)] * self.p(a, b, c) * inv[(b, k)] * inv[(c, j)];
                    }
                }
            }
            // Clean rounding noise so that exact algebras stay exact.
            if (acc - acc.round()).abs() < 1e-13 {
                acc.round()
            } else {
                acc
            }
        })
    }

    /// Parses the line-oriented definition format described in the module docs.
    pub fn parse_definition(text: &str) -> Result<Self, AlgebraError> {
        let err = |line: usize, message: String| AlgebraError::Definition { line, message };
        let mut name = String::from("custom");
        let mut dim: Option<usize> = None;
        let mut labels: Vec<String> = Vec::new();
        let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let key = words.next().unwrap_or_default();
            let rest: Vec<&str> = words.collect();
            match key {
                "name" => {
                    name = rest
                        .first()
                        .ok_or_else(|| err(lineno, "missing name".into()))?
                        .to_string();
                }
                "dim" => {
                    if dim.is_some() {
                        return Err(err(lineno, "duplicate dim header".into()));
                    }
                    let n: usize = rest
                        .first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(lineno, "expected `dim <n>`".into()))?;
                    dim = Some(n);
                }
                "labels" => labels = rest.iter().map(|s| s.to_string()).collect(),
                "p" => {
                    let n = dim.ok_or_else(|| err(lineno, "`dim` must precede entries".into()))?;
                    if rest.len() != 4 {
                        return Err(err(lineno, "expected `p i k j value`".into()));
                    }
                    let mut idx3 = [0usize; 3];
                    for (slot, word) in idx3.iter_mut().zip(&rest[..3]) {
                        let v: usize = word
                            .parse()
                            .map_err(|_| err(lineno, format!("bad index `{word}`")))?;
                        if v == 0 || v > n {
                            return Err(err(lineno, format!("index {v} outside 1..={n}")));
                        }
                        *slot = v - 1;
                    }
                    let value: f64 = rest[3]
                        .parse()
                        .map_err(|_| err(lineno, format!("bad value `{}`", rest[3])))?;
                    if !value.is_finite() {
                        return Err(err(lineno, "value must be finite".into()));
                    }
                    entries.push((lineno, idx3[0], idx3[1], idx3[2], value));
                }
                other => return Err(err(lineno, format!("unknown directive `{other}`"))),
            }
        }

        let n = dim.ok_or_else(|| err(0, "missing `dim` header".into()))?;
        let mut structure = vec![0.0; n * n * n];
        for (_, i, k, j, v) in entries {
            structure[(i * n + k) * n + j] = v;
        }
        Self::new(name, n, structure, labels)
    }

    /// Renders the algebra in the definition format (round-trips through
    /// [`AlgebraSpec::parse_definition`]).
    pub fn to_definition(&self) -> String {
        let n = self.dim;
        let mut out = format!(
            "name {}\ndim {}\nlabels {}\n",
            self.name,
            n,
            self.basis_labels.join(" ")
        );
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    let v = self.p(i, k, j);
                    if v != 0.0 {
                        out.push_str(&format!("p {} {} {} {:?}\n", i + 1, k + 1, j + 1, v));
                    }
                }
            }
        }
        out
    }
}

fn q_lower(alg: &AlgebraSpec) -> DMatrix<f64> {
    let n = alg.dim();
    DMatrix::from_fn(n, n, |i, j| {
        let mut acc = 0.0;
        for m in 0..n {
            for k in 0..n {
                acc += alg.p(m, i, k) * alg.p(k, m, j);
            }
        }
        acc
    })
}

/// `ε`, `q_ij`, `q^ij` and `Q^i_r` for one algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedTensors {
    pub epsilon: Vec<f64>,
    pub q_lower: DMatrix<f64>,
    /// Matrix inverse of `q_lower`; absent for degenerate algebras.
    pub q_upper: Option<DMatrix<f64>>,
    /// `Q^i_r = q^{mk} p^i_kj p^j_mr`; absent for degenerate algebras.
    pub big_q: Option<DMatrix<f64>>,
}

impl DerivedTensors {
    pub fn compute(alg: &AlgebraSpec) -> Self {
        let n = alg.dim();
        let q = q_lower(alg);
        let q_upper = if q.determinant().abs() > DEGENERACY_TOL {
            q.clone().try_inverse()
        } else {
            None
        };
        let big_q = q_upper.as_ref().map(|qu| {
            DMatrix::from_fn(n, n, |i, r| {
                let mut acc = 0.0;
                for m in 0..n {
                    for k in 0..n {
                        let w = qu[(m, k)];
                        if w == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            acc += w * alg.p(i, k, j) * alg.p(j, m, r);
                        }
                    }
                }
                acc
            })
        });
        DerivedTensors {
            epsilon: alg.unit_coefficients().to_vec(),
            q_lower: q,
            q_upper,
            big_q,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.q_upper.is_none()
    }
}

/// An element `X = x^i e_i` of an algebra.
#[derive(Debug, Clone)]
pub struct PolyValue {
    algebra: Arc<AlgebraSpec>,
    coords: Vec<f64>,
}

impl PolyValue {
    pub fn new(algebra: Arc<AlgebraSpec>, coords: Vec<f64>) -> Result<Self, AlgebraError> {
        if coords.len() != algebra.dim() {
            return Err(AlgebraError::DimensionMismatch {
                expected: algebra.dim(),
                got: coords.len(),
            });
        }
        Ok(PolyValue { algebra, coords })
    }

    pub fn unit(algebra: Arc<AlgebraSpec>) -> Self {
        let coords = algebra.unit_coefficients().to_vec();
        PolyValue { algebra, coords }
    }

    pub fn zero(algebra: Arc<AlgebraSpec>) -> Self {
        let coords = vec![0.0; algebra.dim()];
        PolyValue { algebra, coords }
    }

    pub fn algebra(&self) -> &Arc<AlgebraSpec> {
        &self.algebra
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    fn check_same(&self, other: &PolyValue) -> Result<(), AlgebraError> {
        if Arc::ptr_eq(&self.algebra, &other.algebra) || *self.algebra == *other.algebra {
            Ok(())
        } else {
            Err(AlgebraError::Mismatch {
                left: self.algebra.name().to_string(),
                right: other.algebra.name().to_string(),
            })
        }
    }

    /// `(a·b)^i = p^i_kj a^k b^j`.
    pub fn multiply(&self, other: &PolyValue) -> Result<PolyValue, AlgebraError> {
        self.check_same(other)?;
        let coords = multiply_coords(&self.algebra, &self.coords, &other.coords);
        Ok(PolyValue {
            algebra: Arc::clone(&self.algebra),
            coords,
        })
    }

    pub fn add(&self, other: &PolyValue) -> Result<PolyValue, AlgebraError> {
        self.check_same(other)?;
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a + b)
            .collect();
        Ok(PolyValue {
            algebra: Arc::clone(&self.algebra),
            coords,
        })
    }

    pub fn scale(&self, factor: f64) -> PolyValue {
        PolyValue {
            algebra: Arc::clone(&self.algebra),
            coords: self.coords.iter().map(|c| c * factor).collect(),
        }
    }

    /// Coordinates after a change of basis. The result is tied to `target`,
    /// which must be the algebra expressed in the new coordinates.
    pub fn change_basis(
        &self,
        map: &BasisMap,
        target: Arc<AlgebraSpec>,
    ) -> Result<PolyValue, AlgebraError> {
        let coords = map.apply(&self.coords)?;
        PolyValue::new(target, coords)
    }
}

impl fmt::Display for PolyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Generic product of coordinate vectors under `alg`, usable with any ring
/// element type (plain reals or jets).
pub fn multiply_coords<T>(alg: &AlgebraSpec, a: &[T], b: &[T]) -> Vec<T>
where
    T: Clone
        + std::ops::Add<Output = T>
        + std::ops::Mul<Output = T>
        + std::ops::Mul<f64, Output = T>,
{
    let n = alg.dim();
    let mut out: Vec<Option<T>> = vec![None; n];
    for k in 0..n {
        for j in 0..n {
            let mut prod: Option<T> = None;
            for (i, slot) in out.iter_mut().enumerate() {
                let c = alg.p(i, k, j);
                if c == 0.0 {
                    continue;
                }
                let ab = prod
                    .get_or_insert_with(|| a[k].clone() * b[j].clone())
                    .clone();
                let term = if c == 1.0 { ab } else { ab * c };
                *slot = Some(match slot.take() {
                    Some(acc) => acc + term,
                    None => term,
                });
            }
        }
    }
    out.into_iter()
        .map(|v| v.unwrap_or_else(|| a[0].clone() * 0.0))
        .collect()
}

/// An invertible linear change of coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMap {
    forward: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl BasisMap {
    pub fn new(forward: DMatrix<f64>) -> Result<Self, AlgebraError> {
        if !forward.is_square() {
            return Err(AlgebraError::SingularBasis);
        }
        let inverse = forward
            .clone()
            .try_inverse()
            .ok_or(AlgebraError::SingularBasis)?;
        let n = forward.nrows();
        let defect = (&forward * &inverse - DMatrix::identity(n, n)).amax();
        if defect > 1e-12 {
            return Err(AlgebraError::SingularBasis);
        }
        Ok(BasisMap { forward, inverse })
    }

    pub fn identity(n: usize) -> Self {
        BasisMap {
            forward: DMatrix::identity(n, n),
            inverse: DMatrix::identity(n, n),
        }
    }

    /// `H₄` coordinates on `{1, j, k, jk}` to ψ-basis coordinates:
    ///
    /// ```text
    /// ξ¹ = x⁰ + x¹ + x² + x³    ξ² = x⁰ + x¹ − x² − x³
    /// ξ³ = x⁰ − x¹ + x² − x³    ξ⁴ = x⁰ − x¹ − x² + x³
    /// ```
    ///
    /// The matrix `A` satisfies `A·Aᵀ = 4·I`, so the inverse is `Aᵀ/4`.
    pub fn h4_x_to_psi() -> Self {
        let forward = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 1.0, 1.0, 1.0, //
                1.0, 1.0, -1.0, -1.0, //
                1.0, -1.0, 1.0, -1.0, //
                1.0, -1.0, -1.0, 1.0,
            ],
        );
        let inverse = forward.transpose() / 4.0;
        BasisMap { forward, inverse }
    }

    pub fn inverted(&self) -> Self {
        BasisMap {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.forward.nrows()
    }

    pub fn forward(&self) -> &DMatrix<f64> {
        &self.forward
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn apply(&self, coords: &[f64]) -> Result<Vec<f64>, AlgebraError> {
        transform(&self.forward, coords)
    }

    pub fn apply_inverse(&self, coords: &[f64]) -> Result<Vec<f64>, AlgebraError> {
        transform(&self.inverse, coords)
    }
}

fn transform(m: &DMatrix<f64>, coords: &[f64]) -> Result<Vec<f64>, AlgebraError> {
    if coords.len() != m.ncols() {
        return Err(AlgebraError::DimensionMismatch {
            expected: m.ncols(),
            got: coords.len(),
        });
    }
    Ok((0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * coords[c]).sum())
        .collect())
}
