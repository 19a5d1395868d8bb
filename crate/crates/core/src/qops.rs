//! Dense complex operator algebra over finite Hilbert spaces.
//!
//! Everything else in the crate is built on the [`Operator`],
//! [`StateVector`] and [`DensityMatrix`] types defined here. Values are
//! immutable once constructed; all routines are pure functions.
//!
//! Units: ħ = 1, so a propagator over time `t` is `exp(-i H t)`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Numerical tolerances shared by validation routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity, trace, idempotence, orthogonality and completeness checks.
    pub structural: f64,
    /// Round-trip identities such as `U A = L` or `sqrt(A)^2 = A`.
    pub roundtrip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: 1e-10,
            roundtrip: 1e-8,
        }
    }
}

/// Dimension of a finite Hilbert space (always at least 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HilbertDim(usize);

impl HilbertDim {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("Hilbert dimension must be >= 1".into()));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn check(self, other: HilbertDim) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                expected: self.0,
                found: other.0,
            });
        }
        Ok(())
    }
}

impl fmt::Display for HilbertDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A square complex matrix acting on a `d`-dimensional Hilbert space.
#[derive(Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator(dim={}){}", self.dim(), self.m)
    }
}

impl Operator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("operator dimension must be >= 1".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { m })
    }

    /// Wraps a matrix produced by internal arithmetic on valid operators.
    pub(crate) fn from_matrix(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_matrix(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self::from_matrix(DMatrix::zeros(d, d))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// Builds a `d x d` operator from row-major entries.
    pub fn from_rows(d: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(d, d, entries))
    }

    /// `|ket><bra|`
    pub fn outer(ket: &DVector<C64>, bra: &DVector<C64>) -> Self {
        Self::from_matrix(ket * bra.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn hilbert_dim(&self) -> HilbertDim {
        HilbertDim(self.dim())
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_matrix(self.m.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_matrix(&self.m * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        self.m.clone().svd(false, false).singular_values.iter().sum()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.m - self.m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_matrix((&self.m + self.m.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self::from_matrix(&self.m * &other.m - &other.m * &self.m))
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.m * v
    }

    /// Conjugation `A X A†`.
    pub fn conjugate(&self, x: &Operator) -> Self {
        Self::from_matrix(&self.m * &x.m * self.m.adjoint())
    }

    pub fn check_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Max-entry distance between two operators of equal dimension.
    pub fn distance(&self, other: &Operator) -> f64 {
        (&self.m - &other.m).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.m.adjoint() * &self.m;
        (prod - DMatrix::<C64>::identity(self.dim(), self.dim()))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator::from_matrix(&self.m * &rhs.m)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator::from_matrix(&self.m + &rhs.m)
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator::from_matrix(&self.m - &rhs.m)
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

/// JSON wire form of an operator: `{"dim": d, "re": [[..]], "im": [[..]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&Operator> for OperatorJson {
    fn from(op: &Operator) -> Self {
        let d = op.dim();
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..d).map(|i| (0..d).map(|j| f(&op.m[(i, j)])).collect()).collect()
        };
        Self {
            dim: d,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl TryFrom<OperatorJson> for Operator {
    type Error = Error;

    fn try_from(j: OperatorJson) -> Result<Self> {
        let d = j.dim;
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if !shape_ok(&j.re) || !shape_ok(&j.im) {
            return Err(Error::InvalidParameter(format!(
                "operator JSON rows do not form a {d}x{d} matrix"
            )));
        }
        Operator::new(DMatrix::from_fn(d, d, |i, k| C64::new(j.re[i][k], j.im[i][k])))
    }
}

impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = OperatorJson::deserialize(d)?;
        Operator::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, in the same order as `values`.
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }

    /// `V f(Λ) V†`
    pub fn map(&self, f: impl Fn(f64) -> C64) -> Operator {
        let d = self.values.len();
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            self.values.iter().map(|&x| f(x)),
        ));
        Operator::from_matrix(&self.vectors * diag * self.vectors.adjoint())
    }
}

/// Diagonalizes the Hermitian part of `a`.
pub fn hermitian_eigen(a: &Operator) -> HermitianEigen {
    let eig = a.hermitian_part().m.symmetric_eigen();
    let d = a.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Whether [`matrix_exponential`] returns `exp(-i A t)` or `exp(A t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpMode {
    Propagator,
    Raw,
}

/// `exp(-i A t)` in propagator mode, `exp(A t)` in raw mode.
///
/// Hermitian inputs go through an eigendecomposition; everything else
/// through nalgebra's scaling-and-squaring Padé routine.
pub fn matrix_exponential(a: &Operator, t: f64, mode: ExpMode) -> Result<Operator> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time {t} is not finite")));
    }
    if a.m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    if a.is_hermitian(Tolerances::default().structural) {
        let eig = hermitian_eigen(a);
        return Ok(match mode {
            ExpMode::Propagator => eig.map(|x| (-I * x * t).exp()),
            ExpMode::Raw => eig.map(|x| C64::new((x * t).exp(), 0.0)),
        });
    }
    let factor = match mode {
        ExpMode::Propagator => -I * t,
        ExpMode::Raw => C64::new(t, 0.0),
    };
    Operator::new((&a.m * factor).exp())
}

/// Square root of a positive semidefinite Hermitian operator.
///
/// Eigenvalues in `[-1e-6, 0)` are clamped to zero; anything more
/// negative is rejected.
pub fn hermitian_sqrt(a: &Operator) -> Result<Operator> {
    let defect = a.hermiticity_defect();
    if defect > 1e-8 * a.max_abs().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let eig = hermitian_eigen(a);
    if let Some(&min) = eig.values.first() {
        if min < -1e-6 {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
    }
    Ok(eig.map(|x| C64::new(x.max(0.0).sqrt(), 0.0)))
}

/// `L = U A` with `U` unitary and `A = (L†L)^{1/2}`.
#[derive(Debug, Clone)]
pub struct PolarDecomposition {
    pub unitary: Operator,
    pub positive: Operator,
}

/// Right polar decomposition.
///
/// On `range(A)` the unitary is fixed by `U A = L`. On `ker(A)` it maps the
/// kernel basis obtained by Gram-Schmidt over the standard basis (index
/// order) onto the orthonormal basis of `range(L)⊥` built the same way, so
/// singular inputs get a deterministic completion.
pub fn polar_decompose(l: &Operator) -> Result<PolarDecomposition> {
    if l.m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let d = l.dim();
    let gram = Operator::from_matrix(l.m.adjoint() * &l.m);
    let eig = hermitian_eigen(&gram);
    let singular: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let smax = singular.iter().cloned().fold(0.0, f64::max);
    let cutoff = 1e-10 * smax.max(1e-300);

    let positive = eig.map(|x| C64::new(x.max(0.0).sqrt(), 0.0));

    let mut range_in = Vec::new();
    let mut range_out = Vec::new();
    for (k, &s) in singular.iter().enumerate() {
        if s > cutoff {
            let v = eig.vector(k);
            let u = (&l.m * &v) / C64::new(s, 0.0);
            range_in.push(v);
            range_out.push(u);
        }
    }
    let kernel = orthonormal_complement(&range_in, d);
    let cokernel = orthonormal_complement(&range_out, d);
    debug_assert_eq!(kernel.len(), cokernel.len());

    let mut u = DMatrix::<C64>::zeros(d, d);
    for (v, w) in range_in.iter().zip(&range_out) {
        u += w * v.adjoint();
    }
    for (v, w) in kernel.iter().zip(&cokernel) {
        u += w * v.adjoint();
    }
    Ok(PolarDecomposition {
        unitary: Operator::from_matrix(u),
        positive,
    })
}

/// Orthonormal basis of the complement of `span(basis)`, obtained by
/// Gram-Schmidt over the standard basis vectors in index order.
///
/// `basis` must be orthonormal.
pub fn orthonormal_complement(basis: &[DVector<C64>], n: usize) -> Vec<DVector<C64>> {
    let mut accepted: Vec<DVector<C64>> = basis.to_vec();
    let mut out = Vec::new();
    for k in 0..n {
        if accepted.len() == n {
            break;
        }
        let mut v = DVector::<C64>::zeros(n);
        v[k] = ONE;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &accepted {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            v /= C64::new(norm, 0.0);
            accepted.push(v.clone());
            out.push(v);
        }
    }
    out
}

/// Extends orthonormal columns to a unitary.
///
/// `columns[k] = (position, vector)` fixes column `position`; the remaining
/// columns are filled in increasing index order from
/// [`orthonormal_complement`].
pub fn complete_to_unitary(n: usize, columns: &[(usize, DVector<C64>)]) -> Result<Operator> {
    let fixed: Vec<DVector<C64>> = columns.iter().map(|(_, v)| v.clone()).collect();
    for (i, a) in fixed.iter().enumerate() {
        for (j, b) in fixed.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (a.dotc(b) - C64::new(expect, 0.0)).norm() > 1e-8 {
                return Err(Error::InvalidParameter(
                    "isometry columns are not orthonormal".into(),
                ));
            }
        }
    }
    let mut fill = orthonormal_complement(&fixed, n).into_iter();
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut taken = vec![false; n];
    for (pos, v) in columns {
        if *pos >= n || taken[*pos] {
            return Err(Error::InvalidParameter(format!("bad isometry column position {pos}")));
        }
        taken[*pos] = true;
        m.set_column(*pos, v);
    }
    for (pos, t) in taken.iter().enumerate() {
        if !t {
            let v = fill
                .next()
                .ok_or_else(|| Error::InvalidParameter("cannot complete isometry".into()))?;
            m.set_column(pos, &v);
        }
    }
    Ok(Operator::from_matrix(m))
}

/// Kronecker product `A ⊗ B`.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    Operator::from_matrix(a.m.kronecker(&b.m))
}

/// Which factor of a bipartite space a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traced {
    First,
    Second,
}

/// Partial trace of an operator on `C^{dims.0} ⊗ C^{dims.1}`.
pub fn partial_trace(x: &Operator, dims: (usize, usize), traced: Traced) -> Result<Operator> {
    let (da, db) = dims;
    if da * db != x.dim() || da == 0 || db == 0 {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            found: x.dim(),
        });
    }
    let m = &x.m;
    let out = match traced {
        Traced::Second => DMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()
        }),
        Traced::First => DMatrix::from_fn(db, db, |i, j| {
            (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()
        }),
    };
    Ok(Operator::from_matrix(out))
}

/// Unit vector in a finite Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidParameter("empty state vector".into()));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = amps.norm();
        if (n - 1.0).abs() > Tolerances::default().structural {
            return Err(Error::NotNormalized(n));
        }
        Ok(Self { amps })
    }

    /// Rescales to unit norm; rejects the zero vector.
    pub fn normalized(amps: DVector<C64>) -> Result<Self> {
        let n = amps.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        Self::new(amps / C64::new(n, 0.0))
    }

    pub(crate) fn from_unit(amps: DVector<C64>) -> Self {
        Self { amps }
    }

    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidParameter(format!("basis index {k} out of range for dim {d}")));
        }
        let mut v = DVector::zeros(d);
        v[k] = ONE;
        Ok(Self { amps: v })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn projector(&self) -> Operator {
        Operator::outer(&self.amps, &self.amps)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix { op: self.projector() }
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerance(op, Tolerances::default().structural)
    }

    pub fn with_tolerance(op: Operator, tol: f64) -> Result<Self> {
        let defect = op.hermiticity_defect();
        if defect > tol {
            return Err(Error::NotHermitian(defect));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::NotUnitTrace(tr.re));
        }
        let min = hermitian_eigen(&op).values[0];
        if min < -tol {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(Self { op })
    }

    pub(crate) fn from_operator_unchecked(op: Operator) -> Self {
        Self { op }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            op: Operator::identity(d).scale_real(1.0 / d as f64),
        }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.density()
    }

    /// Diagonal state with the given (normalized) populations.
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        Self::new(Operator::from_real_diagonal(p))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    /// `(1/2) ||self - other||_1`
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        0.5 * hermitian_eigen(&(&self.op - &other.op))
            .values
            .iter()
            .map(|x| x.abs())
            .sum::<f64>()
    }

    pub fn expectation(&self, a: &Operator) -> C64 {
        (&a.m * &self.op.m).trace()
    }
}

/// Exhaustive, mutually exclusive projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorFamily {
    members: Vec<Operator>,
}

impl ProjectorFamily {
    pub fn new(members: Vec<Operator>) -> Result<Self> {
        Self::with_tolerance(members, Tolerances::default().structural)
    }

    pub fn with_tolerance(members: Vec<Operator>, tol: f64) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidFamily("empty projector family".into()));
        };
        let d = first.dim();
        let mut sum = Operator::zeros(d);
        for (a, p) in members.iter().enumerate() {
            first.check_dim(p)?;
            let herm = p.hermiticity_defect();
            if herm > tol {
                return Err(Error::InvalidFamily(format!("member {a} not Hermitian ({herm:.3e})")));
            }
            let idem = (p * p).distance(p);
            if idem > tol {
                return Err(Error::InvalidFamily(format!("member {a} not idempotent ({idem:.3e})")));
            }
            for (b, q) in members.iter().enumerate().skip(a + 1) {
                let overlap = (p * q).max_abs();
                if overlap > tol {
                    return Err(Error::InvalidFamily(format!(
                        "members {a} and {b} not orthogonal ({overlap:.3e})"
                    )));
                }
            }
            sum = &sum + p;
        }
        let complete = sum.distance(&Operator::identity(d));
        if complete > tol {
            return Err(Error::InvalidFamily(format!(
                "projectors do not sum to identity ({complete:.3e})"
            )));
        }
        Ok(Self { members })
    }

    /// Rank-one projectors onto an orthonormal basis (columns of `basis`).
    pub fn from_basis(basis: &DMatrix<C64>) -> Result<Self> {
        let members = (0..basis.ncols())
            .map(|k| {
                let v = basis.column(k).into_owned();
                Operator::outer(&v, &v)
            })
            .collect();
        Self::new(members)
    }

    /// Projectors onto consecutive column blocks of the unitary `u`, with
    /// block sizes `ranks`. Checks unitarity once instead of every pair.
    pub fn from_unitary_blocks(u: &Operator, ranks: &[usize]) -> Result<Self> {
        let d = u.dim();
        if ranks.is_empty() || ranks.contains(&0) || ranks.iter().sum::<usize>() != d {
            return Err(Error::InvalidFamily(format!("ranks {ranks:?} do not partition {d}")));
        }
        let defect = u.unitarity_defect();
        if defect > Tolerances::default().structural {
            return Err(Error::InvalidFamily(format!("basis is not unitary ({defect:.3e})")));
        }
        let mut start = 0;
        let mut members = Vec::with_capacity(ranks.len());
        for &r in ranks {
            let block = u.m.columns(start, r);
            members.push(Operator::from_matrix(&block * block.adjoint()));
            start += r;
        }
        Ok(Self { members })
    }

    /// The computational-basis family `{|k><k|}`.
    pub fn computational(d: usize) -> Self {
        Self {
            members: (0..d)
                .map(|k| {
                    let mut diag = vec![0.0; d];
                    diag[k] = 1.0;
                    Operator::from_real_diagonal(&diag)
                })
                .collect(),
        }
    }

    /// The trivial family `{I}`.
    pub fn trivial(d: usize) -> Self {
        Self {
            members: vec![Operator::identity(d)],
        }
    }

    pub fn members(&self) -> &[Operator] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    /// Merges outcomes into coarser projectors; `groups[k]` lists the fine
    /// outcomes summed into coarse outcome `k`.
    pub fn coarsen(&self, groups: &[Vec<usize>]) -> Result<Self> {
        let d = self.dim();
        let members = groups
            .iter()
            .map(|g| {
                g.iter().try_fold(Operator::zeros(d), |acc, &k| {
                    self.members
                        .get(k)
                        .map(|p| &acc + p)
                        .ok_or_else(|| Error::InvalidFamily(format!("no outcome {k}")))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_x() -> Operator {
        Operator::from_rows(2, &[ZERO, ONE, ONE, ZERO]).unwrap()
    }

    fn sigma_minus() -> Operator {
        // |0><1|
        Operator::from_rows(2, &[ZERO, ONE, ZERO, ZERO]).unwrap()
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        let z = Operator::zeros(3);
        for mode in [ExpMode::Propagator, ExpMode::Raw] {
            let e = matrix_exponential(&z, 1.7, mode).unwrap();
            assert!(e.distance(&Operator::identity(3)) < 1e-14);
        }
    }

    #[test]
    fn exponential_of_ladder_hamiltonian_is_diagonal_phase() {
        let n = 5;
        let omega = 1.3;
        let h = Operator::from_real_diagonal(&(0..n).map(|l| l as f64 * omega).collect::<Vec<_>>());
        let t = 2.0 * std::f64::consts::PI / (n as f64 * omega);
        let u = matrix_exponential(&h, t, ExpMode::Propagator).unwrap();
        let expected: Vec<C64> = (0..n)
            .map(|l| (-I * 2.0 * std::f64::consts::PI * l as f64 / n as f64).exp())
            .collect();
        assert!(u.distance(&Operator::from_diagonal(&expected)) < 1e-12);
        assert!(u.is_unitary(1e-10));
    }

    #[test]
    fn exponential_of_sigma_x_at_pi() {
        // exp(-i pi sx) = cos(pi) I - i sin(pi) sx = -I
        let u = matrix_exponential(&sigma_x(), std::f64::consts::PI, ExpMode::Propagator).unwrap();
        assert!(u.distance(&Operator::identity(2).scale_real(-1.0)) < 1e-12);
        // exp(-i (pi/2) sx) = -i sx, mapping |0> to -i|1>
        let half = matrix_exponential(&sigma_x(), std::f64::consts::FRAC_PI_2, ExpMode::Propagator).unwrap();
        assert!(half.distance(&sigma_x().scale(-I)) < 1e-12);
    }

    #[test]
    fn non_hermitian_exponential_uses_pade() {
        let n = sigma_minus();
        // exp(t σ-) = I + t σ- since σ-² = 0
        let e = matrix_exponential(&n, 2.0, ExpMode::Raw).unwrap();
        let expected = &Operator::identity(2) + &n.scale_real(2.0);
        assert!(e.distance(&expected) < 1e-12);
    }

    #[test]
    fn exponential_rejects_non_finite() {
        let bad = Operator::from_matrix(DMatrix::from_element(2, 2, C64::new(f64::NAN, 0.0)));
        assert!(matches!(
            matrix_exponential(&bad, 1.0, ExpMode::Raw),
            Err(Error::NonFinite)
        ));
        assert!(Operator::new(DMatrix::from_element(2, 2, C64::new(f64::INFINITY, 0.0))).is_err());
    }

    #[test]
    fn polar_of_unitary_is_trivial() {
        let v = matrix_exponential(&sigma_x(), 0.3, ExpMode::Propagator).unwrap();
        let p = polar_decompose(&v).unwrap();
        assert!(p.unitary.distance(&v) < 1e-10);
        assert!(p.positive.distance(&Operator::identity(2)) < 1e-10);
    }

    #[test]
    fn polar_of_lowering_operator_completes_kernel() {
        let p = polar_decompose(&sigma_minus()).unwrap();
        let a = Operator::from_real_diagonal(&[0.0, 1.0]);
        assert!(p.positive.distance(&a) < 1e-12);
        assert!(p.unitary.distance(&sigma_x()) < 1e-12);
        assert!((&p.unitary * &p.positive).distance(&sigma_minus()) < 1e-12);
    }

    #[test]
    fn polar_of_positive_diagonal() {
        let l = Operator::from_real_diagonal(&[2.0, 3.0]);
        let p = polar_decompose(&l).unwrap();
        assert!(p.unitary.distance(&Operator::identity(2)) < 1e-12);
        assert!(p.positive.distance(&l) < 1e-12);
    }

    #[test]
    fn polar_of_zero_operator() {
        let p = polar_decompose(&Operator::zeros(3)).unwrap();
        assert!(p.unitary.distance(&Operator::identity(3)) < 1e-12);
        assert!(p.positive.max_abs() < 1e-12);
    }

    #[test]
    fn sqrt_cases() {
        assert!(hermitian_sqrt(&Operator::identity(3)).unwrap().distance(&Operator::identity(3)) < 1e-12);
        let s = hermitian_sqrt(&Operator::from_real_diagonal(&[4.0, 9.0])).unwrap();
        assert!(s.distance(&Operator::from_real_diagonal(&[2.0, 3.0])) < 1e-12);
        let proj = (&Operator::identity(2) + &sigma_x()).scale_real(0.5);
        let r = hermitian_sqrt(&proj).unwrap();
        assert!(r.distance(&proj) < 1e-10);
        assert!((&r * &r).distance(&proj) < 1e-10);
    }

    #[test]
    fn sqrt_rejects_negative_spectrum() {
        let neg = Operator::from_real_diagonal(&[1.0, -1e-3]);
        assert!(matches!(
            hermitian_sqrt(&neg),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        // tiny negative eigenvalues are clamped
        let ok = hermitian_sqrt(&Operator::from_real_diagonal(&[1.0, -1e-11])).unwrap();
        assert!(ok.get(1, 1).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_and_bell_state() {
        let rho = DensityMatrix::from_populations(&[0.25, 0.75]).unwrap();
        let sigma = DensityMatrix::maximally_mixed(3);
        let joint = tensor_product(rho.operator(), sigma.operator());
        let back = partial_trace(&joint, (2, 3), Traced::Second).unwrap();
        assert!(back.distance(rho.operator()) < 1e-12);
        let other = partial_trace(&joint, (2, 3), Traced::First).unwrap();
        assert!(other.distance(sigma.operator()) < 1e-12);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::new(DVector::from_vec(vec![
            C64::new(s, 0.0),
            ZERO,
            ZERO,
            C64::new(s, 0.0),
        ]))
        .unwrap();
        let reduced = partial_trace(&bell.projector(), (2, 2), Traced::First).unwrap();
        assert!(reduced.distance(&Operator::identity(2).scale_real(0.5)) < 1e-12);
    }

    #[test]
    fn tensor_of_identities() {
        let t = tensor_product(&Operator::identity(2), &Operator::identity(3));
        assert!(t.distance(&Operator::identity(6)) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        assert!(partial_trace(&Operator::identity(6), (2, 2), Traced::First).is_err());
    }

    #[test]
    fn projector_family_validation() {
        assert!(ProjectorFamily::new(vec![Operator::identity(2)]).is_ok());
        assert!(ProjectorFamily::computational(3).len() == 3);
        // not complete
        let p0 = Operator::from_real_diagonal(&[1.0, 0.0]);
        assert!(ProjectorFamily::new(vec![p0.clone()]).is_err());
        // not orthogonal
        let plus = (&Operator::identity(2) + &sigma_x()).scale_real(0.5);
        assert!(ProjectorFamily::new(vec![p0.clone(), plus]).is_err());
        // not idempotent
        let half = Operator::identity(2).scale_real(0.5);
        assert!(ProjectorFamily::new(vec![half.clone(), half]).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(Operator::from_real_diagonal(&[0.5, 0.5])).is_ok());
        assert!(matches!(
            DensityMatrix::new(Operator::from_real_diagonal(&[0.5, 0.6])),
            Err(Error::NotUnitTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::new(Operator::from_real_diagonal(&[1.5, -0.5])),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        assert!(matches!(
            DensityMatrix::new(sigma_minus()),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn operator_json_round_trip() {
        let op = Operator::from_rows(2, &[ONE, I, -I, C64::new(0.25, 0.0)]).unwrap();
        let text = serde_json::to_string(&op).unwrap();
        assert!(text.starts_with("{\"dim\":2"));
        let back: Operator = serde_json::from_str(&text).unwrap();
        assert_eq!(back, op);
        let bad = r#"{"dim":2,"re":[[1,0]],"im":[[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<Operator>(bad).is_err());
    }
}
