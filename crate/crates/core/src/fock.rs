//! Truncated Fock-space linear algebra.
//!
//! Every operator lives on the span of `|0⟩ … |D−1⟩` for an explicit
//! truncation `D`. Operators are dense complex matrices; states and POVM
//! elements are operators that passed the Hermiticity/positivity checks at
//! construction time and are immutable afterwards.
//!
//! Nothing in this module repairs an invalid operator. A negative
//! eigenvalue below `-tol` is an error, not something to clip.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default numeric tolerance for Hermiticity and positivity checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default single-mode truncation.
pub const DEFAULT_DIM: usize = 32;

/// Default per-mode truncation for two-mode work.
pub const DEFAULT_BIPARTITE_DIM: usize = 16;

/// Coherent-state tail weight above which a truncation warning is logged.
pub const COHERENT_LEAKAGE_WARN: f64 = 1e-6;

/// A truncated single-mode Fock space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockSpace {
    dim: usize,
    tol: f64,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_tol(dim, DEFAULT_TOL)
    }

    pub fn with_tol(dim: usize, tol: f64) -> Result<Self> {
        if dim < 2 {
            return Err(invalid(format!("Fock dimension must be at least 2, got {dim}")));
        }
        if !(tol > 0.0 && tol < 1e-6) {
            return Err(invalid(format!("tolerance must lie in (0, 1e-6), got {tol}")));
        }
        Ok(Self { dim, tol })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Basis ket `|n⟩`.
    pub fn basis(&self, n: usize) -> DVector<C64> {
        assert!(n < self.dim, "basis index {n} outside truncation {}", self.dim);
        let mut v = DVector::zeros(self.dim);
        v[n] = C64::new(1.0, 0.0);
        v
    }
}

/// A `D×D` complex matrix on a truncated Fock basis.
#[derive(Clone, PartialEq)]
pub struct FockOperator {
    space: FockSpace,
    matrix: DMatrix<C64>,
}

impl fmt::Debug for FockOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockOperator")
            .field("dim", &self.space.dim)
            .field("matrix", &self.matrix)
            .finish()
    }
}

impl FockOperator {
    pub fn new(space: FockSpace, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim || matrix.ncols() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: FockSpace) -> Self {
        Self { space, matrix: DMatrix::zeros(space.dim, space.dim) }
    }

    pub fn identity(space: FockSpace) -> Self {
        Self { space, matrix: DMatrix::identity(space.dim, space.dim) }
    }

    /// Real diagonal operator. Missing trailing entries are zero.
    pub fn from_diagonal(space: FockSpace, diag: &[f64]) -> Result<Self> {
        if diag.len() > space.dim {
            return Err(Error::DimensionMismatch { expected: space.dim, found: diag.len() });
        }
        let mut matrix = DMatrix::zeros(space.dim, space.dim);
        for (i, &d) in diag.iter().enumerate() {
            matrix[(i, i)] = C64::new(d, 0.0);
        }
        Ok(Self { space, matrix })
    }

    /// `|ψ⟩⟨ψ|` (not normalized).
    pub fn outer(space: FockSpace, ket: &DVector<C64>) -> Result<Self> {
        if ket.len() != space.dim {
            return Err(Error::DimensionMismatch { expected: space.dim, found: ket.len() });
        }
        Ok(Self { space, matrix: ket * ket.adjoint() })
    }

    #[inline]
    pub fn space(&self) -> FockSpace {
        self.space
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.space.dim
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub(crate) fn from_parts(space: FockSpace, matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), space.dim);
        Self { space, matrix }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Real part of the trace; the imaginary part vanishes for Hermitian input.
    pub fn trace_re(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space, matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { space: self.space, matrix: self.matrix.scale(s) }
    }

    /// `max |A − A†|` entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut err: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                err = err.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.matrix).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Hermitian and no eigenvalue below `-tol`.
    pub fn is_positive(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.min_eigenvalue() >= -tol
    }

    pub(crate) fn check_positive(&self) -> Result<()> {
        let tol = self.space.tol;
        let herr = self.hermiticity_error();
        if herr > tol {
            return Err(Error::NotHermitian(herr));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -tol {
            return Err(Error::NotPositive(lmin));
        }
        Ok(())
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, ket: &DVector<C64>) -> C64 {
        (ket.adjoint() * &self.matrix * ket)[(0, 0)]
    }

    /// Trace norm `Σ|λᵢ|` of a Hermitian operator.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.abs()).sum()
    }

    /// Apply a real function to the spectrum of a Hermitian operator.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { space: self.space, matrix: hermitian_fn(&self.matrix, f) }
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus among off-diagonal entries.
    pub fn max_off_diagonal(&self) -> f64 {
        let d = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    m = m.max(self.matrix[(i, j)].norm());
                }
            }
        }
        m
    }

    pub fn diagonal_re(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(OperatorRecord::from_matrix(&self.matrix, None, None))
            .expect("operator record serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let rec: OperatorRecord = serde_json::from_value(value.clone())?;
        let space = FockSpace::new(rec.dim)?;
        Self::new(space, rec.to_matrix()?)
    }
}

impl Add for &FockOperator {
    type Output = FockOperator;
    fn add(self, rhs: &FockOperator) -> FockOperator {
        assert_eq!(self.dim(), rhs.dim());
        FockOperator { space: self.space, matrix: &self.matrix + &rhs.matrix }
    }
}

impl Sub for &FockOperator {
    type Output = FockOperator;
    fn sub(self, rhs: &FockOperator) -> FockOperator {
        assert_eq!(self.dim(), rhs.dim());
        FockOperator { space: self.space, matrix: &self.matrix - &rhs.matrix }
    }
}

impl Mul for &FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: &FockOperator) -> FockOperator {
        assert_eq!(self.dim(), rhs.dim());
        FockOperator { space: self.space, matrix: &self.matrix * &rhs.matrix }
    }
}

/// A density operator: Hermitian, positive semidefinite, unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    op: FockOperator,
}

impl QuantumState {
    pub fn new(op: FockOperator) -> Result<Self> {
        op.check_positive()?;
        let tr = op.trace();
        if (tr.re - 1.0).abs() > op.space.tol || tr.im.abs() > op.space.tol {
            return Err(Error::NotNormalized(tr.re));
        }
        Ok(Self { op })
    }

    /// Divide by the trace, then validate.
    pub fn normalized(op: FockOperator) -> Result<Self> {
        let tr = op.trace_re();
        if !(tr > 0.0) {
            return Err(Error::ZeroTraceElement(tr));
        }
        Self::new(op.scale(1.0 / tr))
    }

    pub(crate) fn from_op_unchecked(op: FockOperator) -> Self {
        Self { op }
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn pure(space: FockSpace, ket: &DVector<C64>) -> Result<Self> {
        let norm2 = ket.norm_squared();
        if !(norm2 > 0.0) {
            return Err(invalid("zero ket"));
        }
        let op = FockOperator::outer(space, ket)?.scale(1.0 / norm2);
        Ok(Self { op })
    }

    pub fn fock(space: FockSpace, n: usize) -> Result<Self> {
        if n >= space.dim() {
            return Err(invalid(format!("Fock index {n} outside truncation {}", space.dim())));
        }
        Self::pure(space, &space.basis(n))
    }

    pub fn vacuum(space: FockSpace) -> Self {
        Self::fock(space, 0).expect("dim >= 2")
    }

    pub fn maximally_mixed(space: FockSpace) -> Self {
        Self { op: FockOperator::identity(space).scale(1.0 / space.dim() as f64) }
    }

    /// Thermal state with mean photon number `nbar`, renormalized after
    /// truncation.
    pub fn thermal(space: FockSpace, nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) {
            return Err(invalid(format!("mean photon number must be nonnegative, got {nbar}")));
        }
        let q = nbar / (1.0 + nbar);
        let diag: Vec<f64> = (0..space.dim()).map(|n| q.powi(n as i32)).collect();
        let sum: f64 = diag.iter().sum();
        let diag: Vec<f64> = diag.iter().map(|d| d / sum).collect();
        Ok(Self { op: FockOperator::from_diagonal(space, &diag)? })
    }

    #[inline]
    pub fn op(&self) -> &FockOperator {
        &self.op
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<C64> {
        self.op.matrix()
    }

    #[inline]
    pub fn space(&self) -> FockSpace {
        self.op.space
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn into_op(self) -> FockOperator {
        self.op
    }

    /// Mean photon number `Tr(ρ n̂)`.
    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.op.matrix[(n, n)].re).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(OperatorRecord::from_matrix(
            self.op.matrix(),
            Some(self.space().tol()),
            None,
        ))
        .expect("state record serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let rec: OperatorRecord = serde_json::from_value(value.clone())?;
        let space = match rec.trace_tol {
            Some(tol) => FockSpace::with_tol(rec.dim, tol)?,
            None => FockSpace::new(rec.dim)?,
        };
        Self::new(FockOperator::new(space, rec.to_matrix()?)?)
    }
}

/// A labeled set of positive operators resolving the identity.
#[derive(Clone, Debug)]
pub struct Povm {
    space: FockSpace,
    elements: Vec<(String, FockOperator)>,
    completeness_tol: f64,
}

impl Povm {
    /// Validates positivity of every element and `Σ Πₙ = 1` within
    /// `completeness_tol`.
    pub fn new(
        space: FockSpace,
        elements: Vec<(String, FockOperator)>,
        completeness_tol: f64,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(invalid("a POVM needs at least one element"));
        }
        for (_, op) in &elements {
            if op.dim() != space.dim() {
                return Err(Error::DimensionMismatch { expected: space.dim(), found: op.dim() });
            }
            op.check_positive()?;
        }
        let povm = Self { space, elements, completeness_tol };
        let res = povm.completeness_residual();
        if res > completeness_tol {
            return Err(Error::IncompletePovm(res));
        }
        Ok(povm)
    }

    pub(crate) fn from_parts_unchecked(
        space: FockSpace,
        elements: Vec<(String, FockOperator)>,
        completeness_tol: f64,
    ) -> Self {
        Self { space, elements, completeness_tol }
    }

    #[inline]
    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn completeness_tol(&self) -> f64 {
        self.completeness_tol
    }

    pub fn labels(&self) -> Vec<&str> {
        self.elements.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn elements(&self) -> &[(String, FockOperator)] {
        &self.elements
    }

    pub fn element(&self, label: &str) -> Option<&FockOperator> {
        self.elements.iter().find(|(l, _)| l == label).map(|(_, op)| op)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FockOperator)> {
        self.elements.iter().map(|(l, op)| (l.as_str(), op))
    }

    /// `max |Σₙ Πₙ − 1|` entrywise.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.space.dim();
        let mut sum = DMatrix::<C64>::zeros(d, d);
        for (_, op) in &self.elements {
            sum += op.matrix();
        }
        sum -= DMatrix::<C64>::identity(d, d);
        sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let elements: Vec<serde_json::Value> = self
            .elements
            .iter()
            .map(|(label, op)| {
                let mut v = op.to_json();
                v["label"] = serde_json::Value::String(label.clone());
                v
            })
            .collect();
        serde_json::json!({
            "dim": self.space.dim(),
            "completeness_tol": self.completeness_tol,
            "elements": elements,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let dim = value["dim"].as_u64().ok_or_else(|| Error::Parse("missing dim".into()))?;
        let space = FockSpace::new(dim as usize)?;
        let tol = value["completeness_tol"].as_f64().unwrap_or(1e-8);
        let elems = value["elements"]
            .as_array()
            .ok_or_else(|| Error::Parse("missing elements".into()))?;
        let mut elements = Vec::with_capacity(elems.len());
        for e in elems {
            let label = e["label"].as_str().unwrap_or_default().to_string();
            elements.push((label, FockOperator::from_json(e)?));
        }
        Self::new(space, elements, tol)
    }
}

/// Serialized operator: `{"dim": D, "matrix": [[[re, im], …], …]}` with
/// optional `trace_tol` (states) and `dims` (bipartite).
#[derive(Serialize, Deserialize)]
pub(crate) struct OperatorRecord {
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dims: Option<[usize; 2]>,
    pub matrix: Vec<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace_tol: Option<f64>,
}

impl OperatorRecord {
    pub fn from_matrix(m: &DMatrix<C64>, trace_tol: Option<f64>, dims: Option<[usize; 2]>) -> Self {
        let matrix = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        Self { dim: m.nrows(), dims, matrix, trace_tol }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        if self.matrix.len() != self.dim || self.matrix.iter().any(|r| r.len() != self.dim) {
            return Err(Error::Parse(format!("matrix is not {0}x{0}", self.dim)));
        }
        Ok(DMatrix::from_fn(self.dim, self.dim, |i, j| {
            let [re, im] = self.matrix[i][j];
            C64::new(re, im)
        }))
    }
}

/// Annihilation operator: `a[n−1, n] = √n`.
pub fn ladder(space: FockSpace) -> FockOperator {
    let d = space.dim();
    let mut m = DMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    FockOperator { space, matrix: m }
}

/// Untruncated coherent amplitudes `e^{−|α|²/2} αⁿ/√n!` for `n < D`.
fn coherent_amplitudes(alpha: C64, dim: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    v[0] = c;
    for n in 1..dim {
        c = c * alpha / (n as f64).sqrt();
        v[n] = c;
    }
    v
}

/// Norm weight of `|α⟩` lost above the truncation.
pub fn coherent_leakage(alpha: C64, space: FockSpace) -> f64 {
    (1.0 - coherent_amplitudes(alpha, space.dim()).norm_squared()).max(0.0)
}

/// Normalized ket of the truncated coherent state.
pub fn coherent_ket(alpha: C64, space: FockSpace) -> DVector<C64> {
    let v = coherent_amplitudes(alpha, space.dim());
    let leak = (1.0 - v.norm_squared()).max(0.0);
    if leak > COHERENT_LEAKAGE_WARN {
        log::warn!(
            "coherent state alpha={alpha} leaks {leak:.3e} of its norm above D={}",
            space.dim()
        );
    }
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// `|α⟩⟨α|`, renormalized after truncation.
pub fn coherent_state(alpha: C64, space: FockSpace) -> QuantumState {
    let ket = coherent_ket(alpha, space);
    QuantumState { op: FockOperator { space, matrix: &ket * ket.adjoint() } }
}

/// Squeezed vacuum `S(r)|0⟩` with real squeeze parameter, renormalized
/// after truncation. Positive `r` squeezes `x̂`.
pub fn squeezed_vacuum(r: f64, space: FockSpace) -> QuantumState {
    let d = space.dim();
    let t = -r.tanh();
    let mut v = DVector::<C64>::zeros(d);
    // c_{2k} = (−tanh r)^k √((2k)!)/(2^k k!) / √cosh r.
    let mut c = 1.0 / r.cosh().sqrt();
    let mut k = 0usize;
    while 2 * k < d {
        v[2 * k] = C64::new(c, 0.0);
        let kf = k as f64;
        c *= t * ((2.0 * kf + 1.0) * (2.0 * kf + 2.0)).sqrt() / (2.0 * (kf + 1.0));
        k += 1;
    }
    let n = v.norm();
    let ket = v / C64::new(n, 0.0);
    QuantumState { op: FockOperator { space, matrix: &ket * ket.adjoint() } }
}

/// `e^{−iθn̂} ρ e^{iθn̂}`.
pub fn phase_rotate(state: &QuantumState, theta: f64) -> QuantumState {
    let m = state.matrix();
    let rotated = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        m[(r, c)] * C64::from_polar(1.0, -theta * (r as f64 - c as f64))
    });
    QuantumState { op: FockOperator { space: state.space(), matrix: rotated } }
}

/// `Tr(ρ²)`.
pub fn purity(state: &QuantumState) -> f64 {
    let m = state.matrix();
    // Tr(ρ²) = Σ|ρᵢⱼ|² for Hermitian ρ.
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨ψ|ρ|ψ⟩` for a normalized target.
pub fn fidelity_pure(state: &QuantumState, target: &DVector<C64>) -> Result<f64> {
    if target.len() != state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), found: target.len() });
    }
    let n = target.norm_squared();
    if (n - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("target ket has squared norm {n}")));
    }
    Ok(state.op.expectation(target).re)
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` between two mixed states.
pub fn state_fidelity(a: &QuantumState, b: &QuantumState) -> f64 {
    let sa = hermitian_fn(a.matrix(), |l| l.max(0.0).sqrt());
    let inner = &sa * b.matrix() * &sa;
    let s: f64 = eigh(&inner).0.iter().map(|l| l.max(0.0).sqrt()).sum();
    s * s
}

/// Trace distance `½‖A − B‖₁` between two Hermitian operators.
pub fn trace_distance(a: &FockOperator, b: &FockOperator) -> f64 {
    0.5 * (a - b).trace_norm()
}

/// Upper-triangular `σ` with `ρ = σ†σ`.
pub fn cholesky_factor(state: &QuantumState) -> Result<FockOperator> {
    cholesky_upper(state.op())
}

pub(crate) fn cholesky_upper(op: &FockOperator) -> Result<FockOperator> {
    let lmin = op.min_eigenvalue();
    if lmin <= op.space.tol {
        return Err(Error::SingularMixture(lmin));
    }
    // Symmetrize to absorb rounding before the factorization.
    let herm = (op.matrix() + op.matrix().adjoint()).scale(0.5);
    let chol = nalgebra::Cholesky::new(herm).ok_or(Error::SingularMixture(lmin))?;
    // nalgebra returns lower L with ρ = L L†, so σ = L†.
    Ok(FockOperator { space: op.space, matrix: chol.l().adjoint() })
}

/// `−Σ λ ln λ` in nats, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(state: &QuantumState) -> f64 {
    state
        .op
        .eigenvalues()
        .into_iter()
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum()
}

/// Hermitian eigendecomposition, eigenvalues ascending.
pub(crate) fn eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// `f(A)` for Hermitian `A` through its spectrum.
pub(crate) fn hermitian_fn(m: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let (vals, vecs) = eigh(m);
    let mut scaled = vecs.clone();
    for (c, &l) in vals.iter().enumerate() {
        let fl = f(l);
        for r in 0..scaled.nrows() {
            scaled[(r, c)] *= fl;
        }
    }
    scaled * vecs.adjoint()
}

/// Inverse of an upper-triangular factor.
pub(crate) fn upper_inverse(sigma: &FockOperator) -> Result<FockOperator> {
    let inv = sigma
        .matrix()
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMixture(0.0))?;
    Ok(FockOperator { space: sigma.space, matrix: inv })
}
