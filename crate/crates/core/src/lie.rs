//! Matrix Lie algebra and group primitives.
//!
//! Every group here is an embedded matrix subgroup of `GL(n)`. The affine
//! group `Aff(3)` and its subgroups use 4×4 homogeneous matrices, the real
//! line `(ℝ, +)` uses the unipotent 2×2 representation `[[1, s], [0, 1]]`, and
//! product groups are block diagonal. The inner product on every algebra is
//! the Frobenius inner product of the ambient matrices.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::matfun;

/// Default relative tolerance for bracket closure.
pub const DEFAULT_CLOSURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    matrix: DMatrix<f64>,
}

impl AlgebraElement {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("algebra element must be a square matrix"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(invalid("algebra element has non-finite entries"));
        }
        Ok(Self { matrix })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n, n),
        }
    }

    /// Element of `aff(3)`: linear part `a` (row-major) and translation `b`.
    pub fn affine(a: [[f64; 3]; 3], b: [f64; 3]) -> Self {
        let mut m = DMatrix::zeros(4, 4);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = a[i][j];
            }
            m[(i, 3)] = b[i];
        }
        Self { matrix: m }
    }

    /// Element of `se(3)` from angular velocity `omega` and linear velocity `v`.
    pub fn twist(omega: [f64; 3], v: [f64; 3]) -> Self {
        let [wx, wy, wz] = omega;
        Self::affine([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]], v)
    }

    /// Element `s·∂` of the real line algebra in its 2×2 representation.
    pub fn line(s: f64) -> Self {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = s;
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        self.matrix.dot(&other.matrix)
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { matrix: &self.matrix * s }
    }

    /// True when the 4×4 embedding has an exactly zero bottom row.
    pub fn is_aff3(&self) -> bool {
        self.ambient_dim() == 4 && (0..4).all(|j| self.matrix[(3, j)] == 0.0)
    }

    /// True for `aff(3)` elements whose linear block is antisymmetric to `tol`.
    pub fn is_se3(&self, tol: f64) -> bool {
        if !self.is_aff3() {
            return false;
        }
        let a = self.matrix.view((0, 0), (3, 3));
        (a + a.transpose()).norm() <= tol
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> AlgebraElement {
        AlgebraElement {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> AlgebraElement {
        AlgebraElement {
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        AlgebraElement { matrix: -&self.matrix }
    }
}

impl Mul<f64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: f64) -> AlgebraElement {
        self.scaled(rhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    matrix: DMatrix<f64>,
}

impl GroupElement {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("group element must be a square matrix"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(invalid("group element has non-finite entries"));
        }
        // Hadamard's bound scales the determinant test.
        let scale: f64 = matrix.column_iter().map(|c| c.norm()).product();
        let det = matrix.clone().determinant();
        if !(det.abs() > 1e-12 * scale) {
            return Err(invalid(alloc::format!("group element is numerically singular (det = {det:e})")));
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    /// `Aff(3)` element `p ↦ a·p + b`.
    pub fn affine(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<Self> {
        let mut m = DMatrix::identity(4, 4);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = a[i][j];
            }
            m[(i, 3)] = b[i];
        }
        Self::new(m)
    }

    /// Real line element `s` in its unipotent 2×2 representation.
    pub fn line(s: f64) -> Self {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = s;
        Self { matrix: m }
    }

    /// Block-diagonal element of a product group.
    pub fn block_diag(factors: &[GroupElement]) -> Self {
        let n: usize = factors.iter().map(|f| f.ambient_dim()).sum();
        let mut m = DMatrix::zeros(n, n);
        let mut off = 0;
        for f in factors {
            let k = f.ambient_dim();
            m.view_mut((off, off), (k, k)).copy_from(&f.matrix);
            off += k;
        }
        Self { matrix: m }
    }

    /// Diagonal block `index` of size `size`.
    pub fn block(&self, index: usize, size: usize) -> Self {
        Self {
            matrix: self.matrix.view((index * size, index * size), (size, size)).into_owned(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        let mut matrix = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| invalid("group element is not invertible"))?;
        if self.is_aff3() {
            for j in 0..3 {
                matrix[(3, j)] = 0.0;
            }
            matrix[(3, 3)] = 1.0;
        }
        Ok(Self { matrix })
    }

    /// Bottom row equals `(0, 0, 0, 1)` exactly.
    pub fn is_aff3(&self) -> bool {
        self.ambient_dim() == 4
            && self.matrix[(3, 0)] == 0.0
            && self.matrix[(3, 1)] == 0.0
            && self.matrix[(3, 2)] == 0.0
            && self.matrix[(3, 3)] == 1.0
    }

    /// `Aff(3)` with rotation block `R`: `‖RᵀR − I‖_F < tol` and `det R > 0`.
    pub fn is_se3(&self, tol: f64) -> bool {
        if !self.is_aff3() {
            return false;
        }
        let r = self.matrix.view((0, 0), (3, 3)).into_owned();
        let ortho = (r.transpose() * &r - DMatrix::<f64>::identity(3, 3)).norm();
        ortho < tol && r.determinant() > 0.0
    }
}

/// Matrix exponential `𝔤 → G`.
pub fn exp_map(a: &AlgebraElement) -> Result<GroupElement> {
    if a.matrix.iter().any(|v| !v.is_finite()) {
        return Err(invalid("exp_map: non-finite algebra element"));
    }
    let mut m = matfun::expm(&a.matrix)?;
    // The affine embedding is closed under exp; pin the bottom row so the
    // result is exactly homogeneous.
    if a.is_aff3() {
        for j in 0..3 {
            m[(3, j)] = 0.0;
        }
        m[(3, 3)] = 1.0;
    }
    Ok(GroupElement { matrix: m })
}

/// Principal logarithm `G → 𝔤`.
pub fn log_map(g: &GroupElement) -> Result<AlgebraElement> {
    let mut m = matfun::logm(&g.matrix)?;
    if g.is_aff3() {
        for j in 0..4 {
            m[(3, j)] = 0.0;
        }
    }
    Ok(AlgebraElement { matrix: m })
}

/// Matrix commutator `ab − ba`.
pub fn bracket(a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(invalid(alloc::format!(
            "bracket: ambient dimensions differ ({} vs {})",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    Ok(AlgebraElement {
        matrix: &a.matrix * &b.matrix - &b.matrix * &a.matrix,
    })
}

/// An ordered basis of a matrix Lie algebra (or of a linear subspace of one).
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraBasis {
    ambient_dim: usize,
    elements: Vec<AlgebraElement>,
    labels: Vec<Option<String>>,
    // Inverse Gram matrix, used to read off coordinates.
    gram_inv: DMatrix<f64>,
}

impl AlgebraBasis {
    pub fn new(elements: Vec<AlgebraElement>, labels: Vec<Option<String>>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(invalid("basis needs at least one element; use AlgebraBasis::empty"));
        };
        let n = first.ambient_dim();
        if elements.iter().any(|e| e.ambient_dim() != n) {
            return Err(invalid("basis elements have different ambient dimensions"));
        }
        if labels.len() != elements.len() {
            return Err(invalid("one label slot per basis element is required"));
        }
        // Linear independence after normalization.
        let k = elements.len();
        let mut stacked = DMatrix::<f64>::zeros(n * n, k);
        for (j, e) in elements.iter().enumerate() {
            let norm = e.norm();
            if norm == 0.0 {
                return Err(invalid("basis contains a zero element"));
            }
            for (i, v) in e.matrix.iter().enumerate() {
                stacked[(i, j)] = v / norm;
            }
        }
        let smallest = stacked.svd(false, false).singular_values.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if !(smallest > 1e-10) {
            return Err(invalid("basis elements are linearly dependent"));
        }
        Ok(Self::assemble(n, elements, labels))
    }

    fn assemble(ambient_dim: usize, elements: Vec<AlgebraElement>, labels: Vec<Option<String>>) -> Self {
        let k = elements.len();
        let gram = DMatrix::from_fn(k, k, |i, j| elements[i].inner(&elements[j]));
        let gram_inv = if k == 0 {
            DMatrix::zeros(0, 0)
        } else {
            gram.clone().try_inverse().unwrap_or_else(|| gram.pseudo_inverse(1e-14).unwrap())
        };
        Self {
            ambient_dim,
            elements,
            labels,
            gram_inv,
        }
    }

    /// Basis of the zero algebra (trivial group) in an `n×n` ambient space.
    pub fn empty(ambient_dim: usize) -> Self {
        Self::assemble(ambient_dim, Vec::new(), Vec::new())
    }

    fn labelled(ambient_dim: usize, items: Vec<(&str, AlgebraElement)>) -> Self {
        let (labels, elements): (Vec<_>, Vec<_>) = items.into_iter().map(|(l, e)| (Some(l.to_string()), e)).unzip();
        Self::assemble(ambient_dim, elements, labels)
    }

    /// Standard basis `E_ij` (`i < 3`, `j < 4`) of `aff(3)`; orthonormal.
    pub fn aff3() -> Self {
        const NAMES: [&str; 12] = ["a00", "a01", "a02", "b0", "a10", "a11", "a12", "b1", "a20", "a21", "a22", "b2"];
        let mut items = Vec::with_capacity(12);
        for i in 0..3 {
            for j in 0..4 {
                let mut m = DMatrix::zeros(4, 4);
                m[(i, j)] = 1.0;
                items.push((NAMES[4 * i + j], AlgebraElement { matrix: m }));
            }
        }
        Self::labelled(4, items)
    }

    /// Orthonormal basis of `so(3)` embedded in `aff(3)`.
    pub fn so3() -> Self {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        Self::labelled(
            4,
            alloc::vec![
                ("wx", AlgebraElement::twist([s, 0.0, 0.0], [0.0; 3])),
                ("wy", AlgebraElement::twist([0.0, s, 0.0], [0.0; 3])),
                ("wz", AlgebraElement::twist([0.0, 0.0, s], [0.0; 3])),
            ],
        )
    }

    /// Orthonormal basis of the translations in `aff(3)`.
    pub fn translations3() -> Self {
        Self::labelled(
            4,
            alloc::vec![
                ("vx", AlgebraElement::twist([0.0; 3], [1.0, 0.0, 0.0])),
                ("vy", AlgebraElement::twist([0.0; 3], [0.0, 1.0, 0.0])),
                ("vz", AlgebraElement::twist([0.0; 3], [0.0, 0.0, 1.0])),
            ],
        )
    }

    /// Orthonormal basis of `se(3)`: rotations then translations.
    pub fn se3() -> Self {
        let mut elements = Self::so3();
        let t = Self::translations3();
        elements.elements.extend(t.elements);
        elements.labels.extend(t.labels);
        Self::assemble(4, elements.elements, elements.labels)
    }

    /// The real line algebra in its 2×2 representation.
    pub fn line() -> Self {
        Self::labelled(2, alloc::vec![("shift", AlgebraElement::line(1.0))])
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn elements(&self) -> &[AlgebraElement] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &AlgebraElement {
        &self.elements[i]
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.get(i).and_then(|l| l.as_deref())
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.dim())
            .map(|i| self.label(i).map(ToString::to_string).unwrap_or_else(|| alloc::format!("e{i}")))
            .collect()
    }

    pub fn with_labels(mut self, labels: Vec<Option<String>>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(invalid("label count does not match basis dimension"));
        }
        self.labels = labels;
        Ok(self)
    }

    /// `Σ cᵢ eᵢ`.
    pub fn combine(&self, coeffs: &[f64]) -> Result<AlgebraElement> {
        if coeffs.len() != self.dim() {
            return Err(invalid(alloc::format!("expected {} coefficients, got {}", self.dim(), coeffs.len())));
        }
        let mut m = DMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for (c, e) in coeffs.iter().zip(&self.elements) {
            m += &e.matrix * *c;
        }
        Ok(AlgebraElement { matrix: m })
    }

    /// Coordinates of the orthogonal projection of `a` onto the span.
    pub fn coordinates(&self, a: &AlgebraElement) -> Result<Vec<f64>> {
        if a.ambient_dim() != self.ambient_dim {
            return Err(invalid("coordinates: ambient dimension mismatch"));
        }
        let rhs = DVector::from_iterator(self.dim(), self.elements.iter().map(|e| e.inner(a)));
        Ok((&self.gram_inv * rhs).iter().copied().collect())
    }

    /// Residual `a − Πa` of projecting onto the span.
    pub fn residual(&self, a: &AlgebraElement) -> Result<AlgebraElement> {
        let c = self.coordinates(a)?;
        let p = self.combine(&c)?;
        Ok(a - &p)
    }

    /// Places every element in diagonal block `block` of an `n_blocks`-fold
    /// block-diagonal embedding.
    pub fn block_embed(&self, block: usize, n_blocks: usize) -> Self {
        let k = self.ambient_dim;
        let n = k * n_blocks;
        let elements = self
            .elements
            .iter()
            .map(|e| {
                let mut m = DMatrix::zeros(n, n);
                m.view_mut((block * k, block * k), (k, k)).copy_from(&e.matrix);
                AlgebraElement { matrix: m }
            })
            .collect();
        let labels = self.labels().into_iter().map(|l| Some(alloc::format!("c{block}.{l}"))).collect();
        Self::assemble(n, elements, labels)
    }

    /// Concatenation of bases sharing an ambient space. The caller guarantees
    /// independence (e.g. disjoint diagonal blocks).
    pub fn concat(parts: &[AlgebraBasis]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(invalid("concat: no bases given"));
        };
        let n = first.ambient_dim;
        if parts.iter().any(|p| p.ambient_dim != n) {
            return Err(invalid("concat: ambient dimensions differ"));
        }
        let mut elements = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            elements.extend(p.elements.iter().cloned());
            labels.extend(p.labels.iter().cloned());
        }
        Ok(Self::assemble(n, elements, labels))
    }

    /// Orthonormal basis of the same span.
    pub fn orthonormalized(&self) -> Result<Self> {
        if self.dim() == 0 {
            return Ok(self.clone());
        }
        basis_orthonormalize(&self.elements, 1e-12)
    }

    /// True when all elements are pairwise orthonormal to `tol`.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let k = self.dim();
        (0..k).all(|i| {
            (0..k).all(|j| {
                let target = if i == j { 1.0 } else { 0.0 };
                (self.elements[i].inner(&self.elements[j]) - target).abs() <= tol
            })
        })
    }
}

/// Orthonormal (Frobenius) basis of `span(raw)` by modified Gram–Schmidt with
/// one re-orthogonalization pass. Elements whose residual falls below
/// `rank_tol · max‖raw‖` are discarded.
pub fn basis_orthonormalize(raw: &[AlgebraElement], rank_tol: f64) -> Result<AlgebraBasis> {
    let Some(first) = raw.first() else {
        return Err(invalid("basis_orthonormalize: empty input"));
    };
    let n = first.ambient_dim();
    if raw.iter().any(|e| e.ambient_dim() != n) {
        return Err(invalid("basis_orthonormalize: ambient dimensions differ"));
    }
    let largest = raw.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let mut kept: Vec<DMatrix<f64>> = Vec::new();
    if largest == 0.0 {
        return Ok(AlgebraBasis::empty(n));
    }
    for e in raw {
        let mut v = e.matrix.clone();
        for _ in 0..2 {
            for q in &kept {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let norm = v.norm();
        if norm > rank_tol * largest {
            kept.push(v / norm);
        }
    }
    let elements: Vec<_> = kept.into_iter().map(|matrix| AlgebraElement { matrix }).collect();
    let labels = alloc::vec![None; elements.len()];
    Ok(AlgebraBasis::assemble(n, elements, labels))
}

/// A basis that is closed under the bracket up to `closure_residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subalgebra {
    pub basis: AlgebraBasis,
    pub parent_dim: usize,
    pub closure_residual: f64,
}

impl Subalgebra {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// Largest out-of-span residual of pairwise brackets, relative to the product
/// of the element norms.
pub fn closure_residual(basis: &AlgebraBasis) -> Result<f64> {
    let mut worst = 0.0f64;
    let els = basis.elements();
    for i in 0..els.len() {
        for j in (i + 1)..els.len() {
            let b = bracket(&els[i], &els[j])?;
            let r = basis.residual(&b)?.norm() / (els[i].norm() * els[j].norm());
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Largest principal angle (radians) between the spans of two bases.
pub fn subspace_angle(a: &AlgebraBasis, b: &AlgebraBasis) -> Result<f64> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(invalid("subspace_angle: ambient dimensions differ"));
    }
    if a.dim() != b.dim() {
        return Ok(core::f64::consts::FRAC_PI_2);
    }
    if a.dim() == 0 {
        return Ok(0.0);
    }
    let qa = a.orthonormalized()?;
    let qb = b.orthonormalized()?;
    if qa.dim() != qb.dim() {
        return Ok(core::f64::consts::FRAC_PI_2);
    }
    // sin of the largest angle = max residual of projecting qa onto span(qb).
    let mut worst = 0.0f64;
    for e in qa.elements() {
        let r = qb.residual(e)?.norm();
        worst = worst.max(r);
    }
    Ok(worst.min(1.0).asin())
}
