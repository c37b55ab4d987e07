//! SO(3) manifold primitives.
//!
//! Rotations are plain 3x3 matrices with orthonormal columns and determinant
//! +1. The tangent space at `X` is the set of matrices `X * Omega` with
//! `Omega` skew-symmetric, the retraction is the Q-factor of a QR
//! factorization (upper-triangular factor forced to a positive diagonal), and
//! vector transport from `X` to `Y` rewrites a tangent `X * Omega` as
//! `Y * Omega`. The orientation covariance block is moved between tangent
//! spaces by transporting its eigenvectors and recombining them with the
//! original eigenvalues; [`nearest_spd`] repairs the result when the
//! recombination loses positive definiteness.

use nalgebra::{Cholesky, Matrix3, SMatrix, SVector, SymmetricEigen, Vector3};

use crate::math;
use crate::{Error, Result};

/// Frobenius tolerance on `X^T X - I` for a matrix accepted as a rotation.
pub const ROTATION_TOL: f64 = 1e-9;
/// Skewness tolerance accepted when reading a skew matrix from a full 3x3.
pub const SKEW_TOL: f64 = 1e-10;
/// Relative symmetry tolerance for covariance blocks.
pub const SYMMETRY_TOL: f64 = 1e-10;

const SPD_JITTER_ROUNDS: usize = 100;

/// An element of SO(3): the orientation estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    /// Validates `m` against the manifold at the default [`ROTATION_TOL`].
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        Self::new_with_tolerance(m, ROTATION_TOL)
    }

    /// Validates `m` against the manifold at a caller-chosen tolerance.
    ///
    /// Filter-internal states are accepted at 1e-6 while freshly retracted
    /// matrices satisfy the strict 1e-9 default.
    pub fn new_with_tolerance(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        if !check_on_manifold(&m, tol) || (m.determinant() - 1.0).abs() > tol {
            return Err(Error::InvalidArgument("matrix is not a rotation"));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Rotation by `angle` radians about the x axis.
    pub fn rotation_x(angle: f64) -> Self {
        let (s, c) = (math::sin(angle), math::cos(angle));
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    /// Rotation by `angle` radians about the y axis.
    pub fn rotation_y(angle: f64) -> Self {
        let (s, c) = (math::sin(angle), math::cos(angle));
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    /// Rotation by `angle` radians about the z axis.
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = (math::sin(angle), math::cos(angle));
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// The inverse rotation.
    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }
}

/// A skew-symmetric 3x3 matrix, stored by its generating 3-vector so the
/// skew symmetry holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMatrix(Vector3<f64>);

impl SkewMatrix {
    /// Reads a skew matrix back from a full 3x3, rejecting inputs whose
    /// symmetric part exceeds [`SKEW_TOL`] in Frobenius norm.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        if (m + m.transpose()).norm() > SKEW_TOL {
            return Err(Error::InvalidArgument("matrix is not skew-symmetric"));
        }
        Ok(Self(Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])))
    }

    /// The generating vector `w` with `self = hat(w)`.
    pub fn axis(&self) -> &Vector3<f64> {
        &self.0
    }

    /// Materializes the 3x3 matrix `[0, -z, y; z, 0, -x; -y, x, 0]`.
    pub fn matrix(&self) -> Matrix3<f64> {
        skew(&self.0)
    }
}

/// A tangent vector at `base` in factored form `base * skew`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    base: RotationMatrix,
    skew: SkewMatrix,
}

impl TangentVector {
    pub fn new(base: RotationMatrix, skew: SkewMatrix) -> Self {
        Self { base, skew }
    }

    pub fn base(&self) -> &RotationMatrix {
        &self.base
    }

    pub fn skew(&self) -> &SkewMatrix {
        &self.skew
    }

    /// The materialized 3x3 tangent matrix `base * skew`.
    pub fn matrix(&self) -> Matrix3<f64> {
        self.base.0 * self.skew.matrix()
    }
}

/// The 9x9 orientation-covariance block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceBlock(SMatrix<f64, 9, 9>);

impl CovarianceBlock {
    /// Accepts a matrix symmetric to within [`SYMMETRY_TOL`] (relative) and
    /// stores its symmetrized form.
    pub fn new(p: SMatrix<f64, 9, 9>) -> Result<Self> {
        if (p - p.transpose()).norm() > SYMMETRY_TOL * (1.0 + p.norm()) {
            return Err(Error::InvalidArgument("covariance block is not symmetric"));
        }
        Ok(Self(symmetrize(&p)))
    }

    pub fn matrix(&self) -> &SMatrix<f64, 9, 9> {
        &self.0
    }

    pub(crate) fn from_matrix_unchecked(p: SMatrix<f64, 9, 9>) -> Self {
        Self(p)
    }
}

/// Raw skew map without the finiteness check; callers guarantee finite input.
pub(crate) fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub(crate) fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

/// Maps a 3-vector to its skew-symmetric matrix.
pub fn hat(w: &Vector3<f64>) -> Result<SkewMatrix> {
    if !w.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidArgument("hat input is not finite"));
    }
    Ok(SkewMatrix(*w))
}

/// Inverse of [`hat`]; exact because skew matrices store their generator.
pub fn vee(s: &SkewMatrix) -> Vector3<f64> {
    s.0
}

/// True when `x` is orthonormal to within `tol` (Frobenius norm of
/// `x^T x - I`) and orientation-preserving.
pub fn check_on_manifold(x: &Matrix3<f64>, tol: f64) -> bool {
    let residual = (x.transpose() * x - Matrix3::identity()).norm();
    residual <= tol && x.determinant() > 0.0
}

/// Retracts the tangent matrix `v` at `x` back onto the manifold: the
/// Q-factor of `QR(x + v)` with the R diagonal forced positive.
///
/// `v` need not lie in the tangent space at `x`; the factorization absorbs
/// any normal component. A rank-deficient or orientation-reversing `x + v`
/// yields [`Error::SingularRetraction`].
pub fn retract(x: &RotationMatrix, v: &Matrix3<f64>) -> Result<RotationMatrix> {
    if !v.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidArgument("tangent matrix is not finite"));
    }
    if *v == Matrix3::zeros() {
        // QR of an orthogonal matrix with the positive-diagonal convention
        // returns it unchanged; skip the factorization so this is exact.
        return Ok(*x);
    }
    let a = x.0 + v;
    let scale = a.norm();
    let qr = a.qr();
    let r = qr.r();
    if (0..3).any(|i| r[(i, i)].abs() <= 1e-13 * scale) {
        return Err(Error::SingularRetraction);
    }
    let mut q = qr.q();
    for i in 0..3 {
        if r[(i, i)] < 0.0 {
            let col = -q.column(i);
            q.set_column(i, &col);
        }
    }
    if q.determinant() <= 0.0 {
        return Err(Error::SingularRetraction);
    }
    Ok(RotationMatrix(q))
}

/// Frobenius-nearest skew-symmetric matrix, `(m - m^T) / 2`.
pub fn skew_project(m: &Matrix3<f64>) -> SkewMatrix {
    let s = (m - m.transpose()) * 0.5;
    SkewMatrix(Vector3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)]))
}

/// Transports the tangent matrix `v = x * Omega` to the tangent space at
/// `y`, returning `y * Omega`.
///
/// `x^T v` is skew-projected first, so inputs slightly off the tangent space
/// (eigenvectors of an empirical covariance) are handled gracefully.
pub fn vector_transport(
    x: &RotationMatrix,
    y: &RotationMatrix,
    v: &Matrix3<f64>,
) -> Matrix3<f64> {
    let omega = skew_project(&(x.0.transpose() * v));
    y.0 * omega.matrix()
}

/// Transports the orientation covariance from the tangent space at `x` to
/// the tangent space at `y`.
///
/// The block is eigendecomposed, each eigenvector is reshaped to 3x3
/// (column-major), skew-projected against `x`, transported to `y`, rescaled
/// to unit length (the projection shortens vectors that were not exactly
/// tangent, and the original eigenvalues must be kept), and recombined with
/// the original eigenvalues.
pub fn transport_covariance(
    p: &CovarianceBlock,
    x: &RotationMatrix,
    y: &RotationMatrix,
) -> Result<CovarianceBlock> {
    let eig = SymmetricEigen::try_new(p.0, f64::EPSILON, 0)
        .ok_or(Error::Numerical("eigendecomposition of covariance block failed"))?;
    let mut out = SMatrix::<f64, 9, 9>::zeros();
    for i in 0..9 {
        let column: SVector<f64, 9> = eig.eigenvectors.column(i).into_owned();
        let as_matrix = Matrix3::from_column_slice(column.as_slice());
        let transported = vector_transport(x, y, &as_matrix);
        let norm = transported.norm();
        let mut flat = SVector::<f64, 9>::from_column_slice(transported.as_slice());
        if norm > 1e-12 {
            flat /= norm;
        }
        out += eig.eigenvalues[i] * flat * flat.transpose();
    }
    Ok(CovarianceBlock(symmetrize(&out)))
}

/// Nearest symmetric positive-definite repair for any square size.
///
/// Symmetrizes, clips negative eigenvalues at zero (the polar-factor average
/// of the Higham construction), then adds `(1 + k) * eps * ||a||` to the
/// diagonal on the k-th failed Cholesky until one succeeds.
pub fn nearest_spd_matrix<const N: usize>(a: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    if !a.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidArgument("nearest-SPD input is not finite"));
    }
    let sym = symmetrize(a);
    if Cholesky::new(sym).is_some() {
        return Ok(sym);
    }
    let scale = if sym.norm() > 0.0 { sym.norm() } else { 1.0 };
    // Dynamic matrices here only because the static eigendecomposition is
    // not implemented for arbitrary const dimensions.
    let eig = SymmetricEigen::try_new(
        nalgebra::DMatrix::from_iterator(N, N, sym.iter().copied()),
        f64::EPSILON,
        0,
    )
    .ok_or(Error::Numerical("eigendecomposition in nearest-SPD failed"))?;
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let repaired =
        &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let mut candidate = symmetrize(&SMatrix::<f64, N, N>::from_iterator(repaired.iter().copied()));
    for k in 0..SPD_JITTER_ROUNDS {
        if Cholesky::new(candidate).is_some() {
            return Ok(candidate);
        }
        let jitter = (1.0 + k as f64) * f64::EPSILON * scale;
        for i in 0..N {
            candidate[(i, i)] += jitter;
        }
    }
    Err(Error::Numerical("nearest-SPD jitter loop did not converge"))
}

/// Nearest symmetric positive-definite 9x9 covariance block.
pub fn nearest_spd(a: &SMatrix<f64, 9, 9>) -> Result<CovarianceBlock> {
    nearest_spd_matrix(a).map(CovarianceBlock)
}
