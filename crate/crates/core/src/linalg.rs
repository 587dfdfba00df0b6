//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here works on row-major `ComplexMatrix` values of dimension up
//! to a few dozen. The Hermitian eigensolver is a cyclic complex Jacobi
//! iteration, which is slow asymptotically but accurate to a few ulps at the
//! sizes used by the measurement and correlation code.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EsrError, Result};

/// Tolerances shared by every validator in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericPolicy {
    /// Projector idempotence, orthogonality, completeness and the Hermitian
    /// precondition of the eigensolver.
    pub structural: f64,
    /// Trace and hermiticity checks on density operators, probability sums.
    pub arithmetic: f64,
    /// Most negative eigenvalue tolerated in a density operator or effect.
    pub positivity: f64,
}

impl NumericPolicy {
    pub const DEFAULT: NumericPolicy = NumericPolicy {
        structural: 1e-10,
        arithmetic: 1e-12,
        positivity: 1e-10,
    };
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(EsrError::Shape(format!("{rows}x{cols} has a zero dimension")));
        }
        if data.len() != rows * cols {
            return Err(EsrError::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EsrError::NonFinite {
                row: i / cols,
                col: i % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(EsrError::Shape("ragged rows".into()));
        }
        Self::new(n, m, rows.iter().flatten().copied().collect())
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// `|v><v|` for an (unnormalized) column vector `v`.
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        self.rows
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.cols).map(<[_]>::to_vec).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `Tr[self * other]` without forming the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> Complex64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `M - M^dagger`; infinite for non-square input.
    pub fn hermitian_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        (self + &adj).scale_real(0.5)
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }

    /// `U * self * U^dagger`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        u.matmul(self).matmul(&u.adjoint())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Kronecker product. Basis index of `|i> (x) |j>` is `i * dim(b) + j`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out[(ar * b.rows + br, ac * b.cols + bc)] = x * b[(br, bc)];
                }
            }
        }
    }
    out
}

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.rows()).map(|r| self.vectors[(r, k)]).collect()
    }

    /// `sum_k lambda_k v_k v_k^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.vectors.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let v = self.vector(k);
            out = &out + &ComplexMatrix::outer(&v).scale_real(lam);
        }
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-13;

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += a[(r, c)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
pub fn hermitian_eigendecomposition(m: &ComplexMatrix) -> Result<Eigen> {
    hermitian_eigendecomposition_with(m, &NumericPolicy::DEFAULT)
}

pub fn hermitian_eigendecomposition_with(m: &ComplexMatrix, policy: &NumericPolicy) -> Result<Eigen> {
    if !m.is_square() {
        return Err(EsrError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let asym = m.hermitian_asymmetry();
    if asym > policy.structural {
        return Err(EsrError::NotHermitian {
            max_asymmetry: asym,
        });
    }

    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let target = JACOBI_OFF_TOL * m.frobenius_norm().max(1.0);

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= target {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(EsrError::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, dst)] = v[(r, src)];
        }
    }
    Ok(Eigen { values, vectors })
}

/// One unitary rotation annihilating `a[(p, q)]`: `a <- V^dagger a V`, `v <- v V`.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r < f64::MIN_POSITIVE {
        return;
    }
    // Phase rotation makes the pivot real, then a real symmetric Jacobi step.
    let phase = Complex64::from_polar(1.0, -apq.arg());
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let vpp = Complex64::new(c, 0.0);
    let vpq = Complex64::new(s, 0.0);
    let vqp = phase * (-s);
    let vqq = phase * c;

    let n = a.dim();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * vpp + akq * vqp;
        a[(k, q)] = akp * vpq + akq * vqq;

        let wkp = v[(k, p)];
        let wkq = v[(k, q)];
        v[(k, p)] = wkp * vpp + wkq * vqp;
        v[(k, q)] = wkp * vpq + wkq * vqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = vpp.conj() * apk + vqp.conj() * aqk;
        a[(q, k)] = vpq.conj() * apk + vqq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
}

/// One failed invariant and how far off it was.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub deviation: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueKind {
    NotSquare,
    NotHermitian,
    Trace,
    NegativeEigenvalue,
    NotIdempotent,
    NotOrthogonal,
    Incomplete,
    DuplicateEigenvalue,
    LengthMismatch,
    DimensionMismatch,
}

/// Outcome of a validator. Validation never aborts; it collects every issue.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub issues: Vec<Issue>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    fn push(&mut self, kind: IssueKind, deviation: f64, detail: impl Into<String>) {
        self.issues.push(Issue {
            kind,
            deviation,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self
            .issues
            .iter()
            .map(|i| format!("{:?} ({}: {:e})", i.kind, i.detail, i.deviation))
            .collect();
        write!(f, "invalid: {}", parts.join("; "))
    }
}

pub fn validate_density_operator(m: &ComplexMatrix) -> ValidityReport {
    validate_density_operator_with(m, &NumericPolicy::DEFAULT)
}

pub fn validate_density_operator_with(m: &ComplexMatrix, policy: &NumericPolicy) -> ValidityReport {
    let mut report = ValidityReport::default();
    if !m.is_square() {
        report.push(IssueKind::NotSquare, f64::INFINITY, format!("{}x{}", m.rows(), m.cols()));
        return report;
    }
    let asym = m.hermitian_asymmetry();
    if asym > policy.arithmetic {
        report.push(IssueKind::NotHermitian, asym, "max |M - M^dagger|");
    }
    let tr = m.trace();
    let dev = (tr - Complex64::new(1.0, 0.0)).norm();
    if dev > policy.arithmetic {
        report.push(IssueKind::Trace, dev, format!("trace = {:.15}", tr.re));
    }
    // Positivity is judged on the Hermitian part so an asymmetric input still
    // gets a spectral diagnosis.
    match hermitian_eigendecomposition_with(&m.hermitian_part(), policy) {
        Ok(eig) => {
            let min = eig.values.last().copied().unwrap_or(0.0);
            if min < -policy.positivity {
                report.push(IssueKind::NegativeEigenvalue, -min, format!("min eigenvalue {min:e}"));
            }
        }
        Err(e) => report.push(IssueKind::NegativeEigenvalue, f64::INFINITY, e.to_string()),
    }
    report
}

/// Checks the projector-valued measure behind a discrete observable.
pub fn validate_spectral_observable(eigenvalues: &[f64], projectors: &[ComplexMatrix]) -> ValidityReport {
    validate_spectral_observable_with(eigenvalues, projectors, &NumericPolicy::DEFAULT)
}

pub fn validate_spectral_observable_with(
    eigenvalues: &[f64],
    projectors: &[ComplexMatrix],
    policy: &NumericPolicy,
) -> ValidityReport {
    let tol = policy.structural;
    let mut report = ValidityReport::default();
    if eigenvalues.len() != projectors.len() || projectors.is_empty() {
        report.push(
            IssueKind::LengthMismatch,
            (eigenvalues.len() as f64 - projectors.len() as f64).abs(),
            format!("{} eigenvalues, {} projectors", eigenvalues.len(), projectors.len()),
        );
        return report;
    }
    let n = projectors[0].rows();
    if projectors.iter().any(|p| !p.is_square() || p.rows() != n) {
        report.push(IssueKind::DimensionMismatch, f64::INFINITY, "projectors differ in shape");
        return report;
    }
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        report.push(IssueKind::DuplicateEigenvalue, f64::INFINITY, "non-finite eigenvalue");
    }
    for i in 0..eigenvalues.len() {
        for j in i + 1..eigenvalues.len() {
            let gap = (eigenvalues[i] - eigenvalues[j]).abs();
            if gap <= tol {
                report.push(
                    IssueKind::DuplicateEigenvalue,
                    gap,
                    format!("eigenvalues #{i} and #{j} coincide"),
                );
            }
        }
    }
    for (k, p) in projectors.iter().enumerate() {
        let asym = p.hermitian_asymmetry();
        let idem = p.matmul(p).max_abs_diff(p);
        let dev = asym.max(idem);
        if dev > tol {
            report.push(IssueKind::NotIdempotent, dev, format!("projector #{k}"));
        }
    }
    for i in 0..projectors.len() {
        for j in i + 1..projectors.len() {
            let prod = projectors[i].matmul(&projectors[j]);
            let dev = prod.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
            if dev > tol {
                report.push(IssueKind::NotOrthogonal, dev, format!("projectors #{i} and #{j}"));
            }
        }
    }
    let mut sum = ComplexMatrix::zeros(n, n);
    for p in projectors {
        sum = &sum + p;
    }
    let dev = sum.max_abs_diff(&ComplexMatrix::identity(n));
    if dev > tol {
        report.push(IssueKind::Incomplete, dev, "sum of projectors != identity");
    }
    report
}

/// Positive unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let report = validate_density_operator(&matrix);
        if !report.is_valid() {
            return Err(EsrError::InvalidDensity(report.to_string()));
        }
        Ok(Self { matrix })
    }

    /// Skips validation. Callers guarantee the invariants hold.
    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(Complex64::norm_sqr).sum();
        if psi.is_empty() || norm2 <= f64::MIN_POSITIVE || !norm2.is_finite() {
            return Err(EsrError::InvalidDensity("state vector has zero norm".into()));
        }
        Self::new(ComplexMatrix::outer(psi).scale_real(1.0 / norm2))
    }

    pub fn from_real_pure(psi: &[f64]) -> Result<Self> {
        let psi: Vec<Complex64> = psi.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_pure(&psi)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::new_unchecked(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Self::new_unchecked(m)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `Tr[rho^2]`.
    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    /// `Tr[rho A]`, real part.
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        self.matrix.trace_product(op).re
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        Self::new_unchecked(tensor_product(&self.matrix, &other.matrix))
    }
}

/// Discrete spectral decomposition `A = sum_k lambda_k P_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralObservable {
    eigenvalues: Vec<f64>,
    projectors: Vec<ComplexMatrix>,
}

/// Eigenvalues closer than this are merged by [`SpectralObservable::from_hermitian`].
const DEGENERACY_TOL: f64 = 1e-9;

impl SpectralObservable {
    pub fn new(eigenvalues: Vec<f64>, projectors: Vec<ComplexMatrix>) -> Result<Self> {
        let report = validate_spectral_observable(&eigenvalues, &projectors);
        if !report.is_valid() {
            return Err(EsrError::InvalidObservable(report.to_string()));
        }
        Ok(Self {
            eigenvalues,
            projectors,
        })
    }

    /// Spectral decomposition of a Hermitian matrix, grouping degenerate eigenvalues.
    pub fn from_hermitian(m: &ComplexMatrix) -> Result<Self> {
        let eig = hermitian_eigendecomposition(m)?;
        let n = m.dim();
        let mut eigenvalues: Vec<f64> = Vec::new();
        let mut projectors: Vec<ComplexMatrix> = Vec::new();
        for (k, &lam) in eig.values.iter().enumerate() {
            let piece = ComplexMatrix::outer(&eig.vector(k));
            match eigenvalues.last() {
                Some(&prev) if (prev - lam).abs() <= DEGENERACY_TOL => {
                    let last = projectors.last_mut().expect("paired with eigenvalue");
                    *last = &*last + &piece;
                }
                _ => {
                    eigenvalues.push(lam);
                    projectors.push(piece);
                }
            }
        }
        debug_assert_eq!(projectors.iter().map(|p| p.dim()).sum::<usize>(), n * projectors.len());
        Self::new(eigenvalues, projectors)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.eigenvalues
            .iter()
            .position(|&x| (x - value).abs() <= NumericPolicy::DEFAULT.structural)
    }

    /// `sum_k lambda_k P_k`.
    pub fn matrix(&self) -> ComplexMatrix {
        self.weighted_sum(|k| self.eigenvalues[k])
    }

    /// `sum_k w(k) P_k`.
    pub fn weighted_sum(&self, w: impl Fn(usize) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, p) in self.projectors.iter().enumerate() {
            let wk = w(k);
            if wk != 0.0 {
                out = &out + &p.scale_real(wk);
            }
        }
        out
    }
}

/// Pauli matrices and spin observables.
pub mod pauli {
    use super::*;

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).expect("2x2")
    }

    pub fn y() -> ComplexMatrix {
        let i = Complex64::new(0.0, 1.0);
        let o = Complex64::new(0.0, 0.0);
        ComplexMatrix::from_rows(&[vec![o, -i], vec![i, o]]).expect("2x2")
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[1.0, -1.0])
    }

    /// `cos(theta) Z + sin(theta) X` as a spectral observable with eigenvalues (+1, -1).
    pub fn spin_xz(theta: f64) -> SpectralObservable {
        let (s, c) = theta.sin_cos();
        let n = &z().scale_real(c) + &x().scale_real(s);
        spin_from_direction(&n)
    }

    /// `n . sigma` for a unit-norm Pauli combination, projectors `(I +- n.sigma)/2`.
    pub fn spin_from_direction(n_sigma: &ComplexMatrix) -> SpectralObservable {
        let id = ComplexMatrix::identity(2);
        let up = (&id + n_sigma).scale_real(0.5);
        let down = (&id - n_sigma).scale_real(0.5);
        SpectralObservable::new(vec![1.0, -1.0], vec![up, down]).expect("unit Pauli direction")
    }

    pub fn observable_x() -> SpectralObservable {
        spin_from_direction(&x())
    }

    pub fn observable_y() -> SpectralObservable {
        spin_from_direction(&y())
    }

    pub fn observable_z() -> SpectralObservable {
        spin_from_direction(&z())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor_product(&i2, &i2), ComplexMatrix::identity(4));
        let z = pauli::z();
        assert_eq!(tensor_product(&z, &z), ComplexMatrix::diagonal(&[1.0, -1.0, -1.0, 1.0]));
        let p0 = ComplexMatrix::diagonal(&[1.0, 0.0]);
        let p1 = ComplexMatrix::diagonal(&[0.0, 1.0]);
        assert_eq!(tensor_product(&p0, &p1), ComplexMatrix::diagonal(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn kron_rectangular_shape() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(1, 2);
        let k = tensor_product(&a, &b);
        assert_eq!((k.rows(), k.cols()), (2, 6));
    }

    #[test]
    fn pauli_x_spectrum() {
        let e = hermitian_eigendecomposition(&pauli::x()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
        assert!(e.reconstruct().max_abs_diff(&pauli::x()) < 1e-14);
    }

    #[test]
    fn diagonal_spectrum_keeps_basis() {
        let e = hermitian_eigendecomposition(&ComplexMatrix::diagonal(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_hermitian_reconstruction() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(0.5, -1.0), c(0.0, 0.3)],
            vec![c(0.5, 1.0), c(-1.0, 0.0), c(0.7, 0.7)],
            vec![c(0.0, -0.3), c(0.7, -0.7), c(0.25, 0.0)],
        ])
        .unwrap();
        let e = hermitian_eigendecomposition(&m).unwrap();
        assert!(e.reconstruct().max_abs_diff(&m) < 1e-12);
        let gram = e.vectors.adjoint().matmul(&e.vectors);
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn non_hermitian_rejected_with_asymmetry() {
        let m = ComplexMatrix::from_real_rows(&[vec![0.5, 0.5], vec![0.2, 0.5]]).unwrap();
        match hermitian_eigendecomposition(&m) {
            Err(EsrError::NotHermitian { max_asymmetry }) => assert!((max_asymmetry - 0.3).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn density_validation_examples() {
        assert!(validate_density_operator(&ComplexMatrix::diagonal(&[0.5, 0.5])).is_valid());
        let r = validate_density_operator(&ComplexMatrix::diagonal(&[1.5, -0.5]));
        assert!(r.has(IssueKind::NegativeEigenvalue));
        assert!(!r.has(IssueKind::Trace));
        let m = ComplexMatrix::from_real_rows(&[vec![0.5, 0.5], vec![0.2, 0.5]]).unwrap();
        let r = validate_density_operator(&m);
        assert!(r.has(IssueKind::NotHermitian));
        let r = validate_density_operator(&ComplexMatrix::diagonal(&[0.5, 0.6]));
        assert!(r.has(IssueKind::Trace));
        let r = validate_density_operator(&ComplexMatrix::zeros(2, 3));
        assert!(r.has(IssueKind::NotSquare));
    }

    #[test]
    fn spectral_validation_examples() {
        let p0 = ComplexMatrix::diagonal(&[1.0, 0.0]);
        let p1 = ComplexMatrix::diagonal(&[0.0, 1.0]);
        assert!(validate_spectral_observable(&[1.0, -1.0], &[p0.clone(), p1.clone()]).is_valid());

        let r = validate_spectral_observable(&[1.0], std::slice::from_ref(&p0));
        assert!(r.has(IssueKind::Incomplete));

        let plus = ComplexMatrix::from_real_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let r = validate_spectral_observable(&[1.0, -1.0], &[p0.clone(), plus]);
        assert!(r.has(IssueKind::NotOrthogonal));

        let r = validate_spectral_observable(&[1.0, 1.0], &[p0.clone(), p1]);
        assert!(r.has(IssueKind::DuplicateEigenvalue));

        let r = validate_spectral_observable(&[1.0, 2.0], &[p0.scale_real(2.0)]);
        assert!(r.has(IssueKind::LengthMismatch));
    }

    #[test]
    fn from_hermitian_groups_degenerate_eigenvalues() {
        let m = ComplexMatrix::diagonal(&[1.0, 1.0, -2.0]);
        let o = SpectralObservable::from_hermitian(&m).unwrap();
        assert_eq!(o.len(), 2);
        assert!(o.matrix().max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn spin_observables_are_valid() {
        for k in 0..8 {
            let o = pauli::spin_xz(k as f64 * 0.4);
            assert_eq!(o.eigenvalues(), &[1.0, -1.0]);
        }
        let y = pauli::observable_y();
        assert!(y.matrix().max_abs_diff(&pauli::y()) < 1e-15);
    }

    #[test]
    fn non_finite_entries_rejected() {
        let r = ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]);
        assert!(matches!(r, Err(EsrError::NonFinite { row: 0, col: 0 })));
        assert!(ComplexMatrix::new(2, 2, vec![c(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn pure_state_purity() {
        let rho = DensityOperator::from_real_pure(&[1.0, 1.0]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-15);
        assert!((DensityOperator::maximally_mixed(4).purity() - 0.25).abs() < 1e-15);
    }
}
