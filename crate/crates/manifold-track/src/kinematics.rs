//! Continuous and discrete state-space model.
//!
//! The 15-dimensional state stacks the column-major flattened rotation
//! matrix (9), the centroid position (3), and the centroid velocity (3).
//! Inputs are the body-frame angular velocity and the gravity-compensated
//! body-frame acceleration at the centroid. Discretization is zero-order
//! hold; the orientation block advances linearly (the manifold step lives in
//! the filters), position and velocity advance with the exact ZOH solution.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::so3::{self, RotationMatrix};
use crate::{Error, Result};

/// Dimension of the full state vector.
pub const STATE_DIM: usize = 15;
/// Dimension of the stacked transmitter-position measurement.
pub const MEASUREMENT_DIM: usize = 9;
/// Dimension of the IMU input.
pub const INPUT_DIM: usize = 6;

/// Flattens a 3x3 matrix into a 9-vector in column-major order.
///
/// This ordering is fixed globally: the first three entries are the first
/// column of the matrix.
pub fn flatten_rotation(m: &Matrix3<f64>) -> SVector<f64, 9> {
    SVector::<f64, 9>::from_column_slice(m.as_slice())
}

/// Inverse of [`flatten_rotation`].
pub fn unflatten_rotation(v: &SVector<f64, 9>) -> Matrix3<f64> {
    Matrix3::from_column_slice(v.as_slice())
}

/// The filter state `[flattened rotation; position; velocity]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(SVector<f64, STATE_DIM>);

impl StateVector {
    pub fn from_vector(v: SVector<f64, STATE_DIM>) -> Self {
        Self(v)
    }

    /// Assembles a state from a validated rotation, position, and velocity.
    pub fn from_parts(r: &RotationMatrix, position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self::from_blocks(r.matrix(), position, velocity)
    }

    /// Assembles a state from a raw rotation block. Conventional filters
    /// evaluate the model at orientation blocks that have drifted off the
    /// manifold, so no validation happens here.
    pub fn from_blocks(
        rotation_block: &Matrix3<f64>,
        position: Vector3<f64>,
        velocity: Vector3<f64>,
    ) -> Self {
        let mut v = SVector::<f64, STATE_DIM>::zeros();
        v.fixed_rows_mut::<9>(0).copy_from(&flatten_rotation(rotation_block));
        v.fixed_rows_mut::<3>(9).copy_from(&position);
        v.fixed_rows_mut::<3>(12).copy_from(&velocity);
        Self(v)
    }

    pub fn vector(&self) -> &SVector<f64, STATE_DIM> {
        &self.0
    }

    /// The flattened orientation block (column-major).
    pub fn orientation(&self) -> SVector<f64, 9> {
        self.0.fixed_rows::<9>(0).into_owned()
    }

    /// The orientation block reshaped to 3x3. May be off the manifold for
    /// conventional filter estimates.
    pub fn rotation_block(&self) -> Matrix3<f64> {
        unflatten_rotation(&self.orientation())
    }

    pub fn position(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(9).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(12).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// IMU input: body-frame angular velocity (rad/s) and gravity-compensated
/// body-frame acceleration at the centroid (m/s^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputVector {
    pub omega: Vector3<f64>,
    pub accel_body: Vector3<f64>,
}

impl InputVector {
    pub fn new(omega: Vector3<f64>, accel_body: Vector3<f64>) -> Result<Self> {
        let u = Self { omega, accel_body };
        if !u.is_finite() {
            return Err(Error::InvalidArgument("IMU input is not finite"));
        }
        Ok(u)
    }

    pub fn zero() -> Self {
        Self { omega: Vector3::zeros(), accel_body: Vector3::zeros() }
    }

    pub fn as_vector(&self) -> SVector<f64, INPUT_DIM> {
        let mut v = SVector::<f64, INPUT_DIM>::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.omega);
        v.fixed_rows_mut::<3>(3).copy_from(&self.accel_body);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.accel_body.iter()).all(|c| c.is_finite())
    }
}

/// Isosceles transmitter triangle in the body frame: base length `d` along
/// x, altitude `a` along z, centroid at the body origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitterGeometry {
    base: f64,
    altitude: f64,
    body_positions: [Vector3<f64>; 3],
}

impl TransmitterGeometry {
    pub fn new(base: f64, altitude: f64) -> Result<Self> {
        if !(base.is_finite() && altitude.is_finite()) || base < 0.0 || altitude < 0.0 {
            return Err(Error::InvalidArgument("triangle dimensions must be finite and >= 0"));
        }
        let body_positions = [
            Vector3::new(0.0, 0.0, 2.0 * altitude / 3.0),
            Vector3::new(base / 2.0, 0.0, -altitude / 3.0),
            Vector3::new(-base / 2.0, 0.0, -altitude / 3.0),
        ];
        Ok(Self { base, altitude, body_positions })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn altitude(&self) -> f64 {
        self.altitude
    }

    /// Transmitter positions in the body frame; their centroid is the origin.
    pub fn body_positions(&self) -> &[Vector3<f64>; 3] {
        &self.body_positions
    }
}

/// Raw worker for [`build_pi`]; also used at orientation blocks that are off
/// the manifold.
pub(crate) fn pi_block(r: &Matrix3<f64>) -> SMatrix<f64, 9, 3> {
    // Column j of Pi is the flattened `R * hat(e_j)`, which reproduces the
    // three 3x3 blocks of the continuous model definition.
    let mut pi = SMatrix::<f64, 9, 3>::zeros();
    for j in 0..3 {
        let mut e = Vector3::zeros();
        e[j] = 1.0;
        let col = flatten_rotation(&(r * so3::skew(&e)));
        pi.set_column(j, &col);
    }
    pi
}

/// The 9x3 matrix mapping angular velocity to the rate of change of the
/// flattened rotation: `Pi * w = flatten(R * hat(w))`.
pub fn build_pi(r: &RotationMatrix) -> SMatrix<f64, 9, 3> {
    pi_block(r.matrix())
}

/// Discrete transition matrix: identity on the orientation block, exact ZOH
/// on position/velocity (position picks up `T * velocity`).
pub fn discrete_f(period: f64) -> Result<SMatrix<f64, STATE_DIM, STATE_DIM>> {
    if period <= 0.0 || !period.is_finite() {
        return Err(Error::InvalidArgument("sampling period must be positive"));
    }
    let mut f = SMatrix::<f64, STATE_DIM, STATE_DIM>::identity();
    for i in 0..3 {
        f[(9 + i, 12 + i)] = period;
    }
    Ok(f)
}

pub(crate) fn g_blocks(rotation_block: &Matrix3<f64>, period: f64) -> SMatrix<f64, STATE_DIM, INPUT_DIM> {
    let mut g = SMatrix::<f64, STATE_DIM, INPUT_DIM>::zeros();
    g.fixed_view_mut::<9, 3>(0, 0).copy_from(&(pi_block(rotation_block) * period));
    g.fixed_view_mut::<3, 3>(9, 3).copy_from(&(rotation_block * (period * period / 2.0)));
    g.fixed_view_mut::<3, 3>(12, 3).copy_from(&(rotation_block * period));
    g
}

/// Discrete input matrix `[T*Pi, 0; 0, (T^2/2)*R; 0, T*R]` evaluated at the
/// state's orientation block.
pub fn discrete_g(x: &StateVector, period: f64) -> Result<SMatrix<f64, STATE_DIM, INPUT_DIM>> {
    if period <= 0.0 || !period.is_finite() {
        return Err(Error::InvalidArgument("sampling period must be positive"));
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument("state orientation block is not finite"));
    }
    Ok(g_blocks(&x.rotation_block(), period))
}

/// One Euclidean zero-order-hold propagation step, `F x + g(x) u`. No
/// retraction happens here; the manifold step lives in the filters.
pub fn propagate(x: &StateVector, u: &InputVector, period: f64) -> Result<StateVector> {
    let f = discrete_f(period)?;
    let g = discrete_g(x, period)?;
    Ok(StateVector::from_vector(f * x.vector() + g * u.as_vector()))
}

/// Predicted transmitter positions `[p + R pb_1; p + R pb_2; p + R pb_3]`.
pub fn measure_h(x: &StateVector, geom: &TransmitterGeometry) -> SVector<f64, MEASUREMENT_DIM> {
    let r = x.rotation_block();
    let p = x.position();
    let mut y = SVector::<f64, MEASUREMENT_DIM>::zeros();
    for (i, pb) in geom.body_positions().iter().enumerate() {
        y.fixed_rows_mut::<3>(3 * i).copy_from(&(p + r * pb));
    }
    y
}

/// Exact Jacobian of [`measure_h`]; constant because the measurement is
/// linear in the flattened rotation and the position.
pub fn measure_jacobian(geom: &TransmitterGeometry) -> SMatrix<f64, MEASUREMENT_DIM, STATE_DIM> {
    let mut h = SMatrix::<f64, MEASUREMENT_DIM, STATE_DIM>::zeros();
    for (i, pb) in geom.body_positions().iter().enumerate() {
        // d(R pb)/d flatten(R): column block c contributes pb[c] * I3.
        for c in 0..3 {
            for a in 0..3 {
                h[(3 * i + a, 3 * c + a)] = pb[c];
            }
        }
        for a in 0..3 {
            h[(3 * i + a, 9 + a)] = 1.0;
        }
    }
    h
}
