//! Lie group and Lie algebra models.
//!
//! A [`GroupModel`] carries everything the rest of the crate needs to know
//! about a group with a left-invariant metric: structure constants of the
//! Lie algebra in a fixed basis, the kinetic metric `M`, an auxiliary
//! bi-invariant inner product `B`, and the coefficients of the Riemannian
//! 𝔤-connection `∇^𝔤_{A_i} A_j = Γ_ij^k A_k`.
//!
//! The connection coefficients come from the Koszul formula
//!
//! ```text
//! 2⟨∇_ξ η, σ⟩ = ⟨[ξ,η], σ⟩ − ⟨[η,σ], ξ⟩ + ⟨[σ,ξ], η⟩
//! ```
//!
//! which is the unique bilinear map that is torsion free
//! (`∇_ξ η − ∇_η ξ = [ξ,η]`) and metric compatible
//! (`⟨∇_σ ξ, η⟩ + ⟨ξ, ∇_σ η⟩ = 0`).
//!
//! Two concrete groups are supported:
//!
//! * `SO(3)` with basis `A_i = hat(e_i)`, so that `[A_i, A_j] = ε_ijk A_k`,
//!   and an arbitrary symmetric positive definite inertia metric.
//! * the abelian group `ℝⁿ`, where every bracket and curvature vanishes and
//!   all formulas collapse to classical Euclidean splines.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Default distance from `π` below which the SO(3) logarithm is refused.
pub const DEFAULT_CUT_LOCUS_TOL: f64 = 1e-6;

/// Orthogonality drift that triggers re-projection onto SO(3).
pub const ORTHOGONALITY_TOL: f64 = 1e-9;

/// Coordinates of an element of the Lie algebra in the model basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebraElement(DVector<f64>);

impl LieAlgebraElement {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    /// The `i`-th basis element `A_i`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        Self(v)
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self(DVector::from_column_slice(coords))
    }

    pub fn from_vec(coords: Vec<f64>) -> Self {
        Self(DVector::from_vec(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub(crate) fn to_vector3(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }
}

impl From<DVector<f64>> for LieAlgebraElement {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

impl From<Vector3<f64>> for LieAlgebraElement {
    fn from(v: Vector3<f64>) -> Self {
        Self(DVector::from_column_slice(v.as_slice()))
    }
}

impl Index<usize> for LieAlgebraElement {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for LieAlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "]")
    }
}

macro_rules! impl_binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<LieAlgebraElement> for LieAlgebraElement {
            type Output = LieAlgebraElement;
            fn $method(self, rhs: LieAlgebraElement) -> LieAlgebraElement {
                LieAlgebraElement(self.0 $op rhs.0)
            }
        }
        impl $tr<&LieAlgebraElement> for LieAlgebraElement {
            type Output = LieAlgebraElement;
            fn $method(self, rhs: &LieAlgebraElement) -> LieAlgebraElement {
                LieAlgebraElement(self.0 $op &rhs.0)
            }
        }
        impl $tr<LieAlgebraElement> for &LieAlgebraElement {
            type Output = LieAlgebraElement;
            fn $method(self, rhs: LieAlgebraElement) -> LieAlgebraElement {
                LieAlgebraElement(&self.0 $op rhs.0)
            }
        }
        impl $tr<&LieAlgebraElement> for &LieAlgebraElement {
            type Output = LieAlgebraElement;
            fn $method(self, rhs: &LieAlgebraElement) -> LieAlgebraElement {
                LieAlgebraElement(&self.0 $op &rhs.0)
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);

impl Neg for LieAlgebraElement {
    type Output = LieAlgebraElement;
    fn neg(self) -> LieAlgebraElement {
        LieAlgebraElement(-self.0)
    }
}

impl Neg for &LieAlgebraElement {
    type Output = LieAlgebraElement;
    fn neg(self) -> LieAlgebraElement {
        LieAlgebraElement(-&self.0)
    }
}

impl Mul<f64> for LieAlgebraElement {
    type Output = LieAlgebraElement;
    fn mul(self, s: f64) -> LieAlgebraElement {
        LieAlgebraElement(self.0 * s)
    }
}

impl Mul<f64> for &LieAlgebraElement {
    type Output = LieAlgebraElement;
    fn mul(self, s: f64) -> LieAlgebraElement {
        LieAlgebraElement(&self.0 * s)
    }
}

impl Mul<LieAlgebraElement> for f64 {
    type Output = LieAlgebraElement;
    fn mul(self, v: LieAlgebraElement) -> LieAlgebraElement {
        LieAlgebraElement(v.0 * self)
    }
}

impl Mul<&LieAlgebraElement> for f64 {
    type Output = LieAlgebraElement;
    fn mul(self, v: &LieAlgebraElement) -> LieAlgebraElement {
        LieAlgebraElement(&v.0 * self)
    }
}

impl AddAssign<&LieAlgebraElement> for LieAlgebraElement {
    fn add_assign(&mut self, rhs: &LieAlgebraElement) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<LieAlgebraElement> for LieAlgebraElement {
    fn add_assign(&mut self, rhs: LieAlgebraElement) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&LieAlgebraElement> for LieAlgebraElement {
    fn sub_assign(&mut self, rhs: &LieAlgebraElement) {
        self.0 -= &rhs.0;
    }
}

impl SubAssign<LieAlgebraElement> for LieAlgebraElement {
    fn sub_assign(&mut self, rhs: LieAlgebraElement) {
        self.0 -= rhs.0;
    }
}

impl MulAssign<f64> for LieAlgebraElement {
    fn mul_assign(&mut self, s: f64) {
        self.0 *= s;
    }
}

/// Skew-symmetric matrix of a 3-vector.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] (skew part only).
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(0.5 * (m[(2, 1)] - m[(1, 2)]), 0.5 * (m[(0, 2)] - m[(2, 0)]), 0.5 * (m[(1, 0)] - m[(0, 1)]))
}

/// A point of the group.
///
/// Rotations are stored as 3×3 matrices, points of the abelian group `ℝⁿ`
/// as plain vectors (the group law is addition).
#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    Rotation(Matrix3<f64>),
    Translation(DVector<f64>),
}

impl GroupElement {
    /// Group product `self · other`.
    ///
    /// Panics when a rotation is combined with a translation; elements are
    /// validated against their model at API boundaries.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        match (self, other) {
            (GroupElement::Rotation(a), GroupElement::Rotation(b)) => GroupElement::Rotation(a * b),
            (GroupElement::Translation(a), GroupElement::Translation(b)) => GroupElement::Translation(a + b),
            _ => panic!("cannot compose a rotation with a translation"),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Rotation(r) => GroupElement::Rotation(r.transpose()),
            GroupElement::Translation(v) => GroupElement::Translation(-v),
        }
    }

    /// `‖gᵀg − I‖_F` for rotations, zero otherwise.
    pub fn orthogonality_defect(&self) -> f64 {
        match self {
            GroupElement::Rotation(r) => (r.transpose() * r - Matrix3::identity()).norm(),
            GroupElement::Translation(_) => 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            GroupElement::Rotation(r) => r.iter().all(|x| x.is_finite()),
            GroupElement::Translation(v) => v.iter().all(|x| x.is_finite()),
        }
    }

    /// Nearest rotation in the Frobenius sense (polar factor).
    pub fn project(&self) -> GroupElement {
        match self {
            GroupElement::Rotation(r) => GroupElement::Rotation(nearest_rotation(r)),
            GroupElement::Translation(v) => GroupElement::Translation(v.clone()),
        }
    }

    /// Re-projects a rotation when its drift exceeds [`ORTHOGONALITY_TOL`].
    pub fn renormalized(self) -> GroupElement {
        if self.orthogonality_defect() > ORTHOGONALITY_TOL {
            self.project()
        } else {
            self
        }
    }

    /// Flat coordinates: row-major matrix entries or the vector itself.
    pub fn flat_coords(&self) -> Vec<f64> {
        match self {
            GroupElement::Rotation(r) => {
                let mut out = Vec::with_capacity(9);
                for i in 0..3 {
                    for j in 0..3 {
                        out.push(r[(i, j)]);
                    }
                }
                out
            }
            GroupElement::Translation(v) => v.iter().copied().collect(),
        }
    }

    /// Largest absolute difference between coordinates.
    pub fn distance_max(&self, other: &GroupElement) -> f64 {
        self.flat_coords().iter().zip(other.flat_coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn nearest_rotation(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut q = u * v_t;
    if q.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        q = u * v_t;
    }
    q
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    So3,
    Abelian,
}

/// Concrete Lie group with a left-invariant metric.
///
/// Immutable after construction; all methods are pure.
#[derive(Clone, Debug)]
pub struct GroupModel {
    kind: GroupKind,
    n: usize,
    // c[i][j][k] flattened, [A_i, A_j] = c_ij^k A_k
    structure: Vec<f64>,
    metric: DMatrix<f64>,
    bi_metric: DMatrix<f64>,
    beta: DMatrix<f64>,
    // Γ[i][j][k] flattened, ∇_{A_i} A_j = Γ_ij^k A_k
    conn: Vec<f64>,
    cut_locus_tol: f64,
}

impl GroupModel {
    /// SO(3) with the given symmetric positive definite inertia metric.
    pub fn so3(inertia: DMatrix<f64>) -> Result<Self> {
        if inertia.nrows() != 3 || inertia.ncols() != 3 {
            return Err(Error::InvalidModel(format!(
                "SO(3) inertia must be 3x3, got {}x{}",
                inertia.nrows(),
                inertia.ncols()
            )));
        }
        let basis: Vec<Matrix3<f64>> = (0..3).map(|i| hat(&Vector3::ith(i, 1.0))).collect();
        let mut structure = vec![0.0; 27];
        for i in 0..3 {
            for j in 0..3 {
                let c = vee(&(basis[i] * basis[j] - basis[j] * basis[i]));
                for k in 0..3 {
                    structure[(i * 3 + j) * 3 + k] = c[k];
                }
            }
        }
        Self::build(GroupKind::So3, 3, structure, inertia, DMatrix::identity(3, 3))
    }

    /// SO(3) with a diagonal inertia metric `diag(I₁, I₂, I₃)`.
    pub fn so3_diagonal(inertia: [f64; 3]) -> Result<Self> {
        Self::so3(DMatrix::from_diagonal(&DVector::from_column_slice(&inertia)))
    }

    /// SO(3) with `M = B = I`, the bi-invariant case.
    pub fn so3_bi_invariant() -> Self {
        Self::so3(DMatrix::identity(3, 3)).expect("identity metric is valid")
    }

    /// The abelian group `ℝⁿ` with the Euclidean metric.
    pub fn abelian(n: usize) -> Result<Self> {
        Self::abelian_with_metric(DMatrix::identity(n, n))
    }

    pub fn abelian_with_metric(metric: DMatrix<f64>) -> Result<Self> {
        let n = metric.nrows();
        if n == 0 {
            return Err(Error::InvalidModel("abelian dimension must be positive".into()));
        }
        Self::build(GroupKind::Abelian, n, vec![0.0; n * n * n], metric, DMatrix::identity(n, n))
    }

    /// Replaces the auxiliary bi-invariant inner product used for distances.
    pub fn with_bi_metric(self, bi_metric: DMatrix<f64>) -> Result<Self> {
        Self::build(self.kind, self.n, self.structure, self.metric, bi_metric)
            .map(|m| m.with_cut_locus_tol(self.cut_locus_tol))
    }

    pub fn with_cut_locus_tol(mut self, tol: f64) -> Self {
        self.cut_locus_tol = tol;
        self
    }

    fn build(
        kind: GroupKind,
        n: usize,
        structure: Vec<f64>,
        metric: DMatrix<f64>,
        bi_metric: DMatrix<f64>,
    ) -> Result<Self> {
        check_spd(&metric, n, "metric")?;
        check_spd(&bi_metric, n, "bi-invariant metric")?;
        let metric_inv = metric
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidModel("metric is not positive definite".into()))?
            .inverse();
        let beta = &metric_inv * &bi_metric;

        let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let c = |i: usize, j: usize, k: usize| structure[idx(i, j, k)];
        // ⟨[A_i, A_j], A_l⟩ = c_ij^m M_ml
        let bracket_dot = |i: usize, j: usize, l: usize| -> f64 { (0..n).map(|m| c(i, j, m) * metric[(m, l)]).sum() };
        let mut conn = vec![0.0; n * n * n];
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    rhs[l] = 0.5 * (bracket_dot(i, j, l) - bracket_dot(j, l, i) + bracket_dot(l, i, j));
                }
                let gamma = &metric_inv * &rhs;
                for k in 0..n {
                    conn[idx(i, j, k)] = gamma[k];
                }
            }
        }

        Ok(Self { kind, n, structure, metric, bi_metric, beta, conn, cut_locus_tol: DEFAULT_CUT_LOCUS_TOL })
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// Dimension of the Lie algebra.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn bi_metric(&self) -> &DMatrix<f64> {
        &self.bi_metric
    }

    /// `β = M⁻¹B`, so that `⟨ξ, η⟩_B = ⟨β ξ, η⟩_M`.
    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn cut_locus_tol(&self) -> f64 {
        self.cut_locus_tol
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure[(i * self.n + j) * self.n + k]
    }

    pub fn connection_coefficient(&self, i: usize, j: usize, k: usize) -> f64 {
        self.conn[(i * self.n + j) * self.n + k]
    }

    /// Largest violation of the Jacobi identity over all basis triples.
    pub fn jacobi_identity_defect(&self) -> f64 {
        let n = self.n;
        let c = |i, j, k| self.structure_constant(i, j, k);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s: f64 = (0..n)
                            .map(|m| c(i, j, m) * c(m, k, l) + c(j, k, m) * c(m, i, l) + c(k, i, m) * c(m, j, l))
                            .sum();
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    pub fn check_dim(&self, x: &LieAlgebraElement) -> Result<()> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.dim() });
        }
        Ok(())
    }

    /// Checks that `g` belongs to this group and satisfies its invariant.
    pub fn check_element(&self, g: &GroupElement) -> Result<()> {
        match (self.kind, g) {
            (GroupKind::So3, GroupElement::Rotation(r)) => {
                if !g.is_finite() {
                    return Err(Error::InvalidArgument("rotation has non-finite entries".into()));
                }
                if g.orthogonality_defect() > ORTHOGONALITY_TOL || r.determinant() <= 0.0 {
                    return Err(Error::InvalidArgument("matrix is not a proper rotation".into()));
                }
                Ok(())
            }
            (GroupKind::Abelian, GroupElement::Translation(v)) => {
                if v.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
                }
                if !g.is_finite() {
                    return Err(Error::InvalidArgument("translation has non-finite entries".into()));
                }
                Ok(())
            }
            _ => Err(Error::InvalidArgument("group element does not belong to this model".into())),
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self.kind {
            GroupKind::So3 => GroupElement::Rotation(Matrix3::identity()),
            GroupKind::Abelian => GroupElement::Translation(DVector::zeros(self.n)),
        }
    }

    /// `⟨ξ, η⟩_M`.
    pub fn inner(&self, a: &LieAlgebraElement, b: &LieAlgebraElement) -> f64 {
        a.coords().dot(&(&self.metric * b.coords()))
    }

    pub fn norm(&self, a: &LieAlgebraElement) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// `⟨ξ, η⟩_B`.
    pub fn bi_inner(&self, a: &LieAlgebraElement, b: &LieAlgebraElement) -> f64 {
        a.coords().dot(&(&self.bi_metric * b.coords()))
    }

    pub fn bi_norm(&self, a: &LieAlgebraElement) -> f64 {
        self.bi_inner(a, a).max(0.0).sqrt()
    }

    /// `β(ξ)`.
    pub fn apply_beta(&self, a: &LieAlgebraElement) -> LieAlgebraElement {
        (&self.beta * a.coords()).into()
    }

    /// `[ξ, η]_𝔤`.
    pub fn bracket(&self, a: &LieAlgebraElement, b: &LieAlgebraElement) -> Result<LieAlgebraElement> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(self.br(a, b))
    }

    /// `∇^𝔤_ξ η`.
    pub fn nabla_g(&self, a: &LieAlgebraElement, b: &LieAlgebraElement) -> Result<LieAlgebraElement> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(self.nab(a, b))
    }

    /// `R(ξ, η)σ = ∇_ξ∇_η σ − ∇_η∇_ξ σ − ∇_{[ξ,η]} σ`.
    pub fn curvature_g(
        &self,
        a: &LieAlgebraElement,
        b: &LieAlgebraElement,
        c: &LieAlgebraElement,
    ) -> Result<LieAlgebraElement> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        self.check_dim(c)?;
        Ok(self.curv(a, b, c))
    }

    fn contract(&self, table: &[f64], a: &LieAlgebraElement, b: &LieAlgebraElement) -> LieAlgebraElement {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let ai = a[i];
            if ai == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = ai * b[j];
                if w == 0.0 {
                    continue;
                }
                let row = &table[(i * n + j) * n..(i * n + j + 1) * n];
                for (k, &t) in row.iter().enumerate() {
                    out[k] += w * t;
                }
            }
        }
        out.into()
    }

    pub(crate) fn br(&self, a: &LieAlgebraElement, b: &LieAlgebraElement) -> LieAlgebraElement {
        match self.kind {
            GroupKind::Abelian => LieAlgebraElement::zeros(self.n),
            GroupKind::So3 => self.contract(&self.structure, a, b),
        }
    }

    pub(crate) fn nab(&self, a: &LieAlgebraElement, b: &LieAlgebraElement) -> LieAlgebraElement {
        match self.kind {
            GroupKind::Abelian => LieAlgebraElement::zeros(self.n),
            GroupKind::So3 => self.contract(&self.conn, a, b),
        }
    }

    pub(crate) fn curv(
        &self,
        a: &LieAlgebraElement,
        b: &LieAlgebraElement,
        c: &LieAlgebraElement,
    ) -> LieAlgebraElement {
        if self.kind == GroupKind::Abelian {
            return LieAlgebraElement::zeros(self.n);
        }
        let t1 = self.nab(a, &self.nab(b, c));
        let t2 = self.nab(b, &self.nab(a, c));
        let t3 = self.nab(&self.br(a, b), c);
        t1 - t2 - t3
    }

    /// Lie group exponential.
    pub fn exp(&self, x: &LieAlgebraElement) -> Result<GroupElement> {
        self.check_dim(x)?;
        Ok(self.exp_unchecked(x))
    }

    pub(crate) fn exp_unchecked(&self, x: &LieAlgebraElement) -> GroupElement {
        match self.kind {
            GroupKind::So3 => GroupElement::Rotation(so3_exp(&x.to_vector3())),
            GroupKind::Abelian => GroupElement::Translation(x.coords().clone()),
        }
    }

    /// Lie group logarithm, restricted to rotation angles below `π − tol`.
    pub fn log(&self, g: &GroupElement) -> Result<LieAlgebraElement> {
        match (self.kind, g) {
            (GroupKind::So3, GroupElement::Rotation(r)) => so3_log(r, self.cut_locus_tol).map(LieAlgebraElement::from),
            (GroupKind::Abelian, GroupElement::Translation(v)) => {
                if v.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
                }
                Ok(LieAlgebraElement::from(v.clone()))
            }
            _ => Err(Error::InvalidArgument("group element does not belong to this model".into())),
        }
    }

    /// Rotation angle of `g` (or Euclidean length of a translation).
    pub fn angle(&self, g: &GroupElement) -> f64 {
        match g {
            GroupElement::Rotation(r) => {
                let w = vee(r);
                let c = 0.5 * (r.trace() - 1.0);
                w.norm().atan2(c)
            }
            GroupElement::Translation(v) => v.norm(),
        }
    }

    /// Inverse right-trivialised differential of `Exp`:
    /// if `g(t) = g₀ Exp(Ω(t))` then `g⁻¹ġ = v` requires `Ω̇ = dexp_inv_right(Ω, v)`.
    pub fn dexp_inv_right(&self, omega: &LieAlgebraElement, v: &LieAlgebraElement) -> LieAlgebraElement {
        match self.kind {
            GroupKind::Abelian => v.clone(),
            GroupKind::So3 => {
                let phi = omega.to_vector3();
                let w = v.to_vector3();
                let theta2 = phi.norm_squared();
                let coef = if theta2 < 1e-8 {
                    1.0 / 12.0 + theta2 / 720.0
                } else {
                    let theta = theta2.sqrt();
                    1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
                };
                let pw = phi.cross(&w);
                (w + 0.5 * pw + coef * phi.cross(&pw)).into()
            }
        }
    }

    /// `Ad_g ξ`.
    pub fn adjoint(&self, g: &GroupElement, x: &LieAlgebraElement) -> LieAlgebraElement {
        match g {
            GroupElement::Rotation(r) => (r * x.to_vector3()).into(),
            GroupElement::Translation(_) => x.clone(),
        }
    }
}

fn check_spd(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidModel(format!("{what} must be {n}x{n}")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel(format!("{what} has non-finite entries")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidModel(format!("{what} is not symmetric")));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::InvalidModel(format!("{what} is not positive definite")));
    }
    Ok(())
}

pub(crate) fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let (a, b) = if theta2 < 1e-8 {
        (1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(phi);
    Matrix3::identity() + k * a + k * k * b
}

pub(crate) fn so3_log(r: &Matrix3<f64>, tol: f64) -> Result<Vector3<f64>> {
    let w = vee(r);
    let s = w.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let theta = s.atan2(c);
    if theta >= PI - tol {
        return Err(Error::LogNearCutLocus { angle: theta });
    }
    let k = if theta < 1e-4 {
        let t2 = theta * theta;
        1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
    } else {
        theta / s
    };
    Ok(w * k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize) -> LieAlgebraElement {
        LieAlgebraElement::basis(3, i)
    }

    fn close(a: &LieAlgebraElement, b: &LieAlgebraElement, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn so3_bracket_is_cross_product() {
        let m = GroupModel::so3_bi_invariant();
        assert!(close(&m.bracket(&e(0), &e(1)).unwrap(), &e(2), 1e-15));
        assert!(close(&m.bracket(&e(1), &e(2)).unwrap(), &e(0), 1e-15));
        let x = LieAlgebraElement::from_slice(&[0.3, -1.2, 2.0]);
        assert!(m.bracket(&x, &x).unwrap().norm() < 1e-15);
    }

    #[test]
    fn abelian_operations_vanish() {
        let m = GroupModel::abelian(4).unwrap();
        let x = LieAlgebraElement::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let y = LieAlgebraElement::from_slice(&[-1.0, 0.5, 0.0, 2.0]);
        assert!(m.bracket(&x, &y).unwrap().is_zero());
        assert!(m.nabla_g(&x, &y).unwrap().is_zero());
        assert!(m.curvature_g(&x, &y, &x).unwrap().is_zero());
        let g = m.exp(&x).unwrap();
        assert_eq!(g, GroupElement::Translation(x.coords().clone()));
        assert_eq!(m.log(&g).unwrap(), x);
    }

    #[test]
    fn bi_invariant_connection_is_half_bracket() {
        let m = GroupModel::so3_bi_invariant();
        assert!(close(&m.nabla_g(&e(0), &e(1)).unwrap(), &(e(2) * 0.5), 1e-15));
    }

    #[test]
    fn diagonal_inertia_connection_matches_koszul_by_hand() {
        let (i1, i2, i3) = (1.0, 2.0, 3.0);
        let m = GroupModel::so3_diagonal([i1, i2, i3]).unwrap();
        let expected = e(2) * ((i2 - i1 + i3) / (2.0 * i3));
        assert!(close(&m.nabla_g(&e(0), &e(1)).unwrap(), &expected, 1e-14));
        let expected = e(0) * ((i3 - i2 + i1) / (2.0 * i1));
        assert!(close(&m.nabla_g(&e(1), &e(2)).unwrap(), &expected, 1e-14));
    }

    #[test]
    fn bi_invariant_curvature_example() {
        let m = GroupModel::so3_bi_invariant();
        let r = m.curvature_g(&e(0), &e(1), &e(1)).unwrap();
        assert!(close(&r, &(e(0) * 0.25), 1e-15));
        assert!(m.curvature_g(&e(2), &e(2), &e(0)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = GroupModel::so3_bi_invariant();
        let bad = LieAlgebraElement::zeros(2);
        assert_eq!(m.bracket(&bad, &e(0)), Err(Error::DimensionMismatch { expected: 3, found: 2 }));
        assert!(m.exp(&bad).is_err());
    }

    #[test]
    fn exp_log_round_trip_about_z() {
        let m = GroupModel::so3_bi_invariant();
        let x = e(2) * 0.7;
        let g = m.exp(&x).unwrap();
        let GroupElement::Rotation(r) = &g else { panic!() };
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let expected = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        assert!((r - expected).amax() < 1e-15);
        assert!(close(&m.log(&g).unwrap(), &x, 1e-15));
        assert!(m.log(&m.identity()).unwrap().is_zero());
    }

    #[test]
    fn log_refuses_cut_locus() {
        let m = GroupModel::so3_bi_invariant();
        let g = m.exp(&(e(0) * PI)).unwrap();
        assert!(matches!(m.log(&g), Err(Error::LogNearCutLocus { .. })));
    }

    #[test]
    fn small_angle_log_is_accurate() {
        let m = GroupModel::so3_bi_invariant();
        for &scale in &[1e-3, 1e-5, 1e-9] {
            let x = LieAlgebraElement::from_slice(&[0.3, -0.4, 0.5]) * scale;
            let y = m.log(&m.exp(&x).unwrap()).unwrap();
            assert!((&x - &y).norm() <= 1e-15 * scale.max(1e-3));
        }
    }

    #[test]
    fn projection_restores_orthogonality() {
        let m = GroupModel::so3_bi_invariant();
        let GroupElement::Rotation(r) = m.exp(&LieAlgebraElement::from_slice(&[0.1, 0.2, 0.3])).unwrap() else {
            panic!()
        };
        let perturbed = GroupElement::Rotation(r + Matrix3::from_element(1e-6));
        assert!(perturbed.orthogonality_defect() > 1e-7);
        let fixed = perturbed.renormalized();
        assert!(fixed.orthogonality_defect() < 1e-14);
        assert!(m.check_element(&fixed).is_ok());
    }

    #[test]
    fn invalid_metrics_are_rejected() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 0.5;
        assert!(GroupModel::so3(m).is_err());
        assert!(GroupModel::so3_diagonal([1.0, -2.0, 3.0]).is_err());
        assert!(GroupModel::so3(DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn dexp_inv_right_inverts_the_exponential_derivative() {
        let m = GroupModel::so3_diagonal([1.0, 2.0, 3.0]).unwrap();
        let omega = LieAlgebraElement::from_slice(&[0.4, -0.2, 0.9]);
        let omega_dot = LieAlgebraElement::from_slice(&[0.3, 0.1, -0.5]);
        // g(t) = Exp(Ω + tΩ̇): g⁻¹ġ by central differences
        let h = 1e-6;
        let gp = m.exp(&(&omega + &omega_dot * h)).unwrap();
        let gm = m.exp(&(&omega - &omega_dot * h)).unwrap();
        let g0 = m.exp(&omega).unwrap();
        let fwd = m.log(&g0.inverse().compose(&gp)).unwrap();
        let bwd = m.log(&g0.inverse().compose(&gm)).unwrap();
        let v = (fwd - bwd) * (0.5 / h);
        let back = m.dexp_inv_right(&omega, &v);
        assert!((back - omega_dot).norm() < 1e-8);
    }

    #[test]
    fn structure_constants_satisfy_jacobi_identity() {
        assert!(GroupModel::so3_diagonal([1.0, 2.0, 3.0]).unwrap().jacobi_identity_defect() < 1e-12);
        assert_eq!(GroupModel::abelian(3).unwrap().jacobi_identity_defect(), 0.0);
    }
}
