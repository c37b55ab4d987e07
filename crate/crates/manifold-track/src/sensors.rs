//! Synthetic sensors and range processing.
//!
//! IMU samples are truth plus additive white Gaussian noise with a diagonal
//! covariance derived from datasheet noise densities. Ranges between the
//! three body-mounted transmitters and a set of fixed anchors are noised the
//! same way, and Gauss-Newton multilateration turns them into the stacked
//! transmitter-position measurement consumed by the filters. When the IMU is
//! mounted away from the body centroid, [`accel_to_centroid`] and
//! [`accel_variance_to_centroid`] move the accelerometer reading and its
//! variance to the centroid.

use alloc::vec::Vec;

use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::kinematics::InputVector;
use crate::so3::{self, RotationMatrix};
use crate::{Error, Result};

/// Acceleration of one micro-g in m/s^2, the datasheet scaling used for
/// accelerometer noise densities.
const MICRO_G: f64 = 9.8e-6;

const GN_MAX_ITERATIONS: usize = 50;
const GN_STEP_TOL: f64 = 1e-10;

/// Fixed anchor positions in the global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BeaconMap {
    positions: Vec<Vector3<f64>>,
}

impl BeaconMap {
    /// Requires at least four beacons that do not lie in a common plane.
    pub fn new(positions: Vec<Vector3<f64>>) -> Result<Self> {
        if positions.len() < 4 {
            return Err(Error::InvalidArgument("at least 4 beacons are required"));
        }
        if !positions.iter().all(|b| b.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument("beacon positions must be finite"));
        }
        let mean: Vector3<f64> = positions.iter().sum::<Vector3<f64>>() / positions.len() as f64;
        let mut gram = Matrix3::zeros();
        for b in &positions {
            let d = b - mean;
            gram += d * d.transpose();
        }
        let eig = SymmetricEigen::new(gram);
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if max <= 0.0 || max.is_nan() || min < 1e-9 * max {
            return Err(Error::InvalidArgument("beacons are coplanar"));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.positions.iter().sum::<Vector3<f64>>() / self.positions.len() as f64
    }
}

/// Noisy transmitter-to-beacon distances: row `j` holds the ranges from the
/// three transmitters to beacon `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSet {
    ranges: Vec<[f64; 3]>,
    sigma_s2: f64,
}

impl RangeSet {
    pub fn new(ranges: Vec<[f64; 3]>, sigma_s2: f64) -> Result<Self> {
        if sigma_s2.is_nan() || sigma_s2 < 0.0 {
            return Err(Error::InvalidArgument("range variance must be >= 0"));
        }
        if ranges.iter().flatten().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidArgument("ranges must be finite and >= 0"));
        }
        Ok(Self { ranges, sigma_s2 })
    }

    /// Range from transmitter `transmitter` (0..3) to beacon `beacon`.
    pub fn range(&self, transmitter: usize, beacon: usize) -> f64 {
        self.ranges[beacon][transmitter]
    }

    pub fn beacon_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn sigma_s2(&self) -> f64 {
        self.sigma_s2
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.ranges
    }
}

/// Body-frame displacement from the centroid to the IMU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverArm(Vector3<f64>);

impl LeverArm {
    pub fn new(z: Vector3<f64>) -> Result<Self> {
        if !z.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("lever arm must be finite"));
        }
        Ok(Self(z))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == Vector3::zeros()
    }
}

/// Converts datasheet noise densities to per-sample variances at sampling
/// rate `fs`:
///
/// - gyro: `density^2 * fs / 2`, density in deg/s/sqrt(Hz), result in
///   (deg/s)^2;
/// - accel: `(density * 9.8e-6)^2 * fs / 2`, density in micro-g/sqrt(Hz),
///   result in (m/s^2)^2.
pub fn imu_variance_from_datasheet(
    gyro_density_dps: f64,
    accel_density_micro_g: f64,
    fs: f64,
) -> Result<(f64, f64)> {
    if fs <= 0.0 || !fs.is_finite() {
        return Err(Error::InvalidArgument("sampling rate must be positive"));
    }
    if gyro_density_dps.is_nan() || gyro_density_dps < 0.0 || accel_density_micro_g.is_nan() || accel_density_micro_g < 0.0 {
        return Err(Error::InvalidArgument("noise densities must be >= 0"));
    }
    let sigma_w2 = gyro_density_dps * gyro_density_dps * fs / 2.0;
    let accel_density = accel_density_micro_g * MICRO_G;
    let sigma_a2 = accel_density * accel_density * fs / 2.0;
    Ok((sigma_w2, sigma_a2))
}

/// Converts a gyro variance in (deg/s)^2 to (rad/s)^2.
pub fn gyro_variance_to_rad(sigma_w2_deg: f64) -> f64 {
    let k = core::f64::consts::PI / 180.0;
    sigma_w2_deg * k * k
}

/// Draws one noisy IMU sample `u = u_true + n`, `n ~ N(0, q)` with `q`
/// diagonal.
pub fn simulate_imu<R: Rng + ?Sized>(
    true_omega: &Vector3<f64>,
    true_accel_body: &Vector3<f64>,
    q: &SMatrix<f64, 6, 6>,
    rng: &mut R,
) -> Result<InputVector> {
    for i in 0..6 {
        for j in 0..6 {
            if i == j {
                if q[(i, i)].is_nan() || q[(i, i)] < 0.0 {
                    return Err(Error::InvalidArgument("input covariance must be >= 0"));
                }
            } else if q[(i, j)] != 0.0 {
                return Err(Error::InvalidArgument("input covariance must be diagonal"));
            }
        }
    }
    let mut noise = SVector::<f64, 6>::zeros();
    for i in 0..6 {
        let z: f64 = rng.sample(StandardNormal);
        noise[i] = z * crate::math::sqrt(q[(i, i)]);
    }
    InputVector::new(
        true_omega + noise.fixed_rows::<3>(0).into_owned(),
        true_accel_body + noise.fixed_rows::<3>(3).into_owned(),
    )
}

pub(crate) fn accel_to_centroid_raw(
    a_imu: &Vector3<f64>,
    r: &Matrix3<f64>,
    omega: &Vector3<f64>,
    omega_prev: &Vector3<f64>,
    period: f64,
    z: &LeverArm,
) -> Vector3<f64> {
    let omega_mat = so3::skew(omega);
    let alpha = (so3::skew(omega) - so3::skew(omega_prev)) / period;
    a_imu - (r * omega_mat * omega_mat + r * alpha) * z.vector()
}

/// Moves an accelerometer reading from the IMU mount point to the centroid,
/// removing the centripetal and angular-acceleration contributions of the
/// lever arm. The angular acceleration is the backward difference of the two
/// angular-velocity readings over `period`.
pub fn accel_to_centroid(
    a_imu: &Vector3<f64>,
    r: &RotationMatrix,
    omega: &Vector3<f64>,
    omega_prev: &Vector3<f64>,
    period: f64,
    z: &LeverArm,
) -> Result<Vector3<f64>> {
    if period <= 0.0 || !period.is_finite() {
        return Err(Error::InvalidArgument("sampling period must be positive"));
    }
    if ![a_imu, omega, omega_prev].iter().all(|v| v.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidArgument("lever-arm transfer input is not finite"));
    }
    Ok(accel_to_centroid_raw(a_imu, r.matrix(), omega, omega_prev, period, z))
}

/// Per-entry mean and variance of the squared angular-velocity matrix,
/// evaluated at the mean angular velocity with a common per-axis variance.
fn omega_squared_stats(omega: &Vector3<f64>, var_w: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    let sq_mean = |i: usize| var_w + omega[i] * omega[i];
    let sq_var = |i: usize| 2.0 * var_w * var_w + 4.0 * omega[i] * omega[i] * var_w;
    let prod_mean = |i: usize, j: usize| omega[i] * omega[j];
    let prod_var = |i: usize, j: usize| {
        var_w * var_w + var_w * omega[j] * omega[j] + var_w * omega[i] * omega[i]
    };
    let mut mean = Matrix3::zeros();
    let mut var = Matrix3::zeros();
    // Diagonal entries are -(w_a^2 + w_b^2) over the two other axes.
    for d in 0..3 {
        let (a, b) = match d {
            0 => (2, 1),
            1 => (2, 0),
            _ => (1, 0),
        };
        mean[(d, d)] = -(sq_mean(a) + sq_mean(b));
        var[(d, d)] = sq_var(a) + sq_var(b);
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        mean[(i, j)] = prod_mean(i, j);
        mean[(j, i)] = mean[(i, j)];
        var[(i, j)] = prod_var(i, j);
        var[(j, i)] = var[(i, j)];
    }
    (mean, var)
}

pub(crate) fn accel_variance_to_centroid_raw(
    var_a_imu: &Vector3<f64>,
    r: &Matrix3<f64>,
    var_r: &SVector<f64, 9>,
    omega: &Vector3<f64>,
    var_w: f64,
    period: f64,
    z: &LeverArm,
) -> Vector3<f64> {
    let zv = z.vector();
    // Var(r_ij m_jk) under independence: VarVar + Var * mean^2 both ways.
    let product_variance =
        |vr: f64, mr: f64, vm: f64, mm: f64| vr * vm + vr * mm * mm + vm * mr * mr;
    let var_r_entry = |i: usize, j: usize| var_r[3 * j + i];

    // Angular-acceleration term (R * dOmega * z / T): the difference of two
    // gyro readings has zero assumed mean and per-entry variance 2 * var_w
    // off the diagonal.
    let mut var_alpha = Vector3::zeros();
    for i in 0..3 {
        let mut acc = 0.0;
        for k in 0..3 {
            let mut inner = 0.0;
            for j in 0..3 {
                if j == k {
                    continue;
                }
                inner += product_variance(var_r_entry(i, j), r[(i, j)], 2.0 * var_w, 0.0);
            }
            acc += zv[k] * zv[k] * inner;
        }
        var_alpha[i] = acc / (period * period);
    }

    // Centripetal term (R * Omega^2 * z): same structure, no period, entry
    // statistics of the squared skew matrix.
    let (q_mean, q_var) = omega_squared_stats(omega, var_w);
    let mut var_cent = Vector3::zeros();
    for i in 0..3 {
        let mut acc = 0.0;
        for k in 0..3 {
            let mut inner = 0.0;
            for j in 0..3 {
                inner +=
                    product_variance(var_r_entry(i, j), r[(i, j)], q_var[(j, k)], q_mean[(j, k)]);
            }
            acc += zv[k] * zv[k] * inner;
        }
        var_cent[i] = acc;
    }

    var_a_imu + var_cent + var_alpha
}

/// Propagates the accelerometer variance through the lever-arm transfer,
/// treating rotation entries and angular-velocity entries as independent.
///
/// `var_r` holds the per-entry variances of the rotation estimate in
/// column-major order (the diagonal of the orientation covariance block);
/// `var_w` is the per-axis gyro variance in (rad/s)^2. The mean of the
/// angular-velocity difference entering the angular-acceleration term is
/// taken as zero.
#[allow(clippy::too_many_arguments)]
pub fn accel_variance_to_centroid(
    var_a_imu: &Vector3<f64>,
    r: &RotationMatrix,
    var_r: &SVector<f64, 9>,
    omega: &Vector3<f64>,
    var_w: f64,
    period: f64,
    z: &LeverArm,
) -> Result<Vector3<f64>> {
    if period <= 0.0 || !period.is_finite() {
        return Err(Error::InvalidArgument("sampling period must be positive"));
    }
    if var_a_imu.iter().any(|v| *v < 0.0) || var_r.iter().any(|v| *v < 0.0) || var_w < 0.0 {
        return Err(Error::InvalidArgument("variances must be >= 0"));
    }
    Ok(accel_variance_to_centroid_raw(var_a_imu, r.matrix(), var_r, omega, var_w, period, z))
}

/// Draws noisy ranges from the three transmitters to every beacon; negative
/// draws are clamped to zero.
pub fn simulate_ranges<R: Rng + ?Sized>(
    tx_positions: &[Vector3<f64>; 3],
    beacons: &BeaconMap,
    sigma_s: f64,
    rng: &mut R,
) -> Result<RangeSet> {
    if sigma_s < 0.0 || !sigma_s.is_finite() {
        return Err(Error::InvalidArgument("range noise sigma must be >= 0"));
    }
    let mut rows = Vec::with_capacity(beacons.len());
    for b in beacons.positions() {
        let mut row = [0.0; 3];
        for (i, tx) in tx_positions.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            row[i] = ((tx - b).norm() + sigma_s * z).max(0.0);
        }
        rows.push(row);
    }
    RangeSet::new(rows, sigma_s * sigma_s)
}

/// Gauss-Newton position fit for one transmitter against all beacons.
/// Returns the iterate and whether the step tolerance was reached.
fn gauss_newton_single(
    ranges: &RangeSet,
    transmitter: usize,
    beacons: &BeaconMap,
    init: &Vector3<f64>,
) -> (Vector3<f64>, bool) {
    let cost = |p: &Vector3<f64>| -> f64 {
        beacons
            .positions()
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let f = (p - b).norm() - ranges.range(transmitter, j);
                f * f
            })
            .sum()
    };
    let mut p = *init;
    let mut best = p;
    let mut best_cost = cost(&p);
    for _ in 0..GN_MAX_ITERATIONS {
        let mut jtj = Matrix3::zeros();
        let mut jtf = Vector3::zeros();
        for (j, b) in beacons.positions().iter().enumerate() {
            let d = p - b;
            let dist = d.norm().max(1e-12);
            let row = d / dist;
            let f = dist - ranges.range(transmitter, j);
            jtj += row * row.transpose();
            jtf += row * f;
        }
        let solved = nalgebra::Cholesky::new(jtj).map(|c| c.solve(&(-jtf))).or_else(|| {
            // Levenberg damping on ill-conditioned normal equations.
            let damping = 1e-6 * jtj.trace() / 3.0;
            let damped = jtj + Matrix3::identity() * damping;
            nalgebra::Cholesky::new(damped).map(|c| c.solve(&(-jtf)))
        });
        let step = match solved {
            Some(s) => s,
            None => return (best, false),
        };
        p += step;
        let c = cost(&p);
        if c < best_cost {
            best = p;
            best_cost = c;
        }
        if step.norm() < GN_STEP_TOL {
            return (p, true);
        }
    }
    (best, false)
}

/// Per-transmitter Gauss-Newton least squares on the range residuals,
/// returning the stacked position estimates and an all-transmitters
/// convergence flag. Non-converged transmitters contribute their best
/// iterate.
pub fn multilaterate(
    ranges: &RangeSet,
    beacons: &BeaconMap,
    init: &[Vector3<f64>; 3],
) -> Result<(SVector<f64, 9>, bool)> {
    if ranges.beacon_count() != beacons.len() {
        return Err(Error::InvalidArgument("range rows must match beacon count"));
    }
    if !init.iter().all(|p| p.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidArgument("multilateration init must be finite"));
    }
    let mut y = SVector::<f64, 9>::zeros();
    let mut converged = true;
    for (t, start) in init.iter().enumerate() {
        let (p, ok) = gauss_newton_single(ranges, t, beacons, start);
        converged &= ok;
        y.fixed_rows_mut::<3>(3 * t).copy_from(&p);
    }
    Ok((y, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64Mcg;

    fn rng(seed: u64) -> Pcg64Mcg {
        Pcg64Mcg::seed_from_u64(seed)
    }

    fn random_rotation(r: &mut Pcg64Mcg) -> RotationMatrix {
        loop {
            let g = Matrix3::from_fn(|_, _| r.gen_range(-1.0..1.0));
            let v = g - Matrix3::identity();
            if let Ok(q) = so3::retract(&RotationMatrix::identity(), &v) {
                return q;
            }
        }
    }

    fn box_beacons() -> BeaconMap {
        BeaconMap::new(vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(5.0, 0.0, 0.0),
            Vector3::new(0.0, 5.0, 0.0),
            Vector3::new(5.0, 5.0, 0.0),
            Vector3::new(0.0, 0.0, 3.0),
            Vector3::new(5.0, 0.0, 3.0),
            Vector3::new(0.0, 5.0, 3.0),
            Vector3::new(5.0, 5.0, 3.0),
        ])
        .unwrap()
    }

    #[test]
    fn beacon_map_rejects_degenerate_layouts() {
        assert!(BeaconMap::new(vec![Vector3::zeros(); 3]).is_err());
        // Four coplanar beacons.
        assert!(BeaconMap::new(vec![
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 0.0, 1.0),
            Vector3::new(0.0, 1.0, 1.0),
            Vector3::new(1.0, 1.0, 1.0),
        ])
        .is_err());
        assert_eq!(box_beacons().len(), 8);
    }

    #[test]
    fn range_set_rejects_bad_entries() {
        assert!(RangeSet::new(vec![[1.0, -0.1, 2.0]], 0.01).is_err());
        assert!(RangeSet::new(vec![[1.0, 0.1, 2.0]], -1.0).is_err());
    }

    #[test]
    fn imu_noise_free_sampling_is_exact() {
        let mut r = rng(30);
        let w = Vector3::new(0.1, -0.2, 0.3);
        let a = Vector3::new(1.0, 2.0, -0.5);
        let u = simulate_imu(&w, &a, &SMatrix::<f64, 6, 6>::zeros(), &mut r).unwrap();
        assert_eq!(u.omega, w);
        assert_eq!(u.accel_body, a);
    }

    #[test]
    fn imu_noise_statistics_match_requested_covariance() {
        let mut r = rng(31);
        let n = 100_000usize;
        let sigma_w2 = 4e-4;
        let sigma_a2 = 9e-4;
        let mut q = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..3 {
            q[(i, i)] = sigma_w2;
            q[(3 + i, 3 + i)] = sigma_a2;
        }
        let truth_w = Vector3::new(0.5, 0.0, -0.5);
        let truth_a = Vector3::new(0.0, 9.0, 1.0);
        let mut sum = SVector::<f64, 6>::zeros();
        let mut sum_sq = SVector::<f64, 6>::zeros();
        for _ in 0..n {
            let u = simulate_imu(&truth_w, &truth_a, &q, &mut r).unwrap();
            let v = u.as_vector();
            sum += v;
            sum_sq += v.component_mul(&v);
        }
        let mean = sum / n as f64;
        let truth = InputVector::new(truth_w, truth_a).unwrap().as_vector();
        for i in 0..6 {
            let sigma = q[(i, i)].sqrt();
            assert!((mean[i] - truth[i]).abs() < 4.0 * sigma / (n as f64).sqrt());
            let var = sum_sq[i] / n as f64 - mean[i] * mean[i];
            assert!((var - q[(i, i)]).abs() < 0.05 * q[(i, i)]);
        }
    }

    #[test]
    fn imu_rejects_non_diagonal_covariance() {
        let mut q = SMatrix::<f64, 6, 6>::zeros();
        q[(0, 1)] = 1e-3;
        let mut r = rng(32);
        assert!(simulate_imu(&Vector3::zeros(), &Vector3::zeros(), &q, &mut r).is_err());
    }

    #[test]
    fn datasheet_variances_match_rate_formulas() {
        // MPU-9250 densities at 10 Hz.
        let (w2, a2) = imu_variance_from_datasheet(0.01, 300.0, 10.0).unwrap();
        assert!((w2 - 5e-4).abs() < 1e-18);
        let expected_a2 = (300.0 * 9.8e-6_f64).powi(2) * 5.0;
        assert!((a2 - expected_a2).abs() < 1e-18);
        assert!((expected_a2 - 4.3218e-5).abs() < 1e-12);
        // At 100 Hz the accel figure reaches 0.43e-3 (m/s^2)^2.
        let (_, a2_100) = imu_variance_from_datasheet(0.01, 300.0, 100.0).unwrap();
        assert!((a2_100 - 0.43218e-3).abs() < 1e-12);
        // Linear in the sampling rate.
        let (w2_double, a2_double) = imu_variance_from_datasheet(0.01, 300.0, 20.0).unwrap();
        assert!((w2_double - 2.0 * w2).abs() < 1e-18);
        assert!((a2_double - 2.0 * a2).abs() < 1e-18);
        assert!(imu_variance_from_datasheet(0.01, 300.0, 0.0).is_err());
    }

    #[test]
    fn accel_transfer_identities() {
        let r = RotationMatrix::identity();
        let a = Vector3::new(0.3, -0.1, 0.7);
        let w = Vector3::new(0.2, 0.1, -0.4);
        // Zero lever arm.
        let out = accel_to_centroid(&a, &r, &w, &w, 0.1, &LeverArm::zero()).unwrap();
        assert_eq!(out, a);
        // Zero rotation rate.
        let z = LeverArm::new(Vector3::new(0.1, 0.2, -0.1)).unwrap();
        let out = accel_to_centroid(&a, &r, &Vector3::zeros(), &Vector3::zeros(), 0.1, &z).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn accel_transfer_recovers_circular_motion_center() {
        // IMU on a lever arm along x, body spinning about z at constant
        // rate: the accelerometer sees the centripetal pull, the centroid is
        // static.
        let w = 2.0;
        let arm = 0.25;
        let omega = Vector3::new(0.0, 0.0, w);
        let z = LeverArm::new(Vector3::new(arm, 0.0, 0.0)).unwrap();
        let a_imu = Vector3::new(-w * w * arm, 0.0, 0.0);
        let out =
            accel_to_centroid(&a_imu, &RotationMatrix::identity(), &omega, &omega, 0.1, &z).unwrap();
        assert!(out.norm() < 1e-12);
    }

    #[test]
    fn accel_transfer_round_trips_forward_model() {
        let mut r = rng(33);
        for _ in 0..100 {
            let rot = random_rotation(&mut r);
            let a_c = Vector3::new(
                r.gen_range(-2.0..2.0),
                r.gen_range(-2.0..2.0),
                r.gen_range(-2.0..2.0),
            );
            let omega = Vector3::new(
                r.gen_range(-1.5..1.5),
                r.gen_range(-1.5..1.5),
                r.gen_range(-1.5..1.5),
            );
            let omega_prev = omega + Vector3::new(
                r.gen_range(-0.2..0.2),
                r.gen_range(-0.2..0.2),
                r.gen_range(-0.2..0.2),
            );
            let period = 0.1;
            let z = LeverArm::new(Vector3::new(
                r.gen_range(-0.3..0.3),
                r.gen_range(-0.3..0.3),
                r.gen_range(-0.3..0.3),
            ))
            .unwrap();
            // Forward lever-arm model, then the inverse transfer.
            let omega_mat = so3::skew(&omega);
            let alpha = (so3::skew(&omega) - so3::skew(&omega_prev)) / period;
            let a_imu =
                a_c + (rot.matrix() * omega_mat * omega_mat + rot.matrix() * alpha) * z.vector();
            let recovered =
                accel_to_centroid(&a_imu, &rot, &omega, &omega_prev, period, &z).unwrap();
            assert!((recovered - a_c).norm() < 1e-12);
        }
    }

    #[test]
    fn accel_variance_identities() {
        let var_a = Vector3::new(1e-4, 2e-4, 3e-4);
        let r = RotationMatrix::identity();
        let var_r = SVector::<f64, 9>::zeros();
        let out = accel_variance_to_centroid(
            &var_a,
            &r,
            &var_r,
            &Vector3::zeros(),
            1e-3,
            0.1,
            &LeverArm::zero(),
        )
        .unwrap();
        assert_eq!(out, var_a);
    }

    #[test]
    fn accel_variance_collapses_with_known_rotation() {
        // Var(r) = 0 and zero means: only the angular-velocity variance
        // terms weighted by the rotation entries survive.
        let var_a = Vector3::new(1e-4, 1e-4, 1e-4);
        let var_w = 2e-3;
        let period = 0.1;
        let z = LeverArm::new(Vector3::new(0.1, -0.2, 0.3)).unwrap();
        let out = accel_variance_to_centroid(
            &var_a,
            &RotationMatrix::identity(),
            &SVector::<f64, 9>::zeros(),
            &Vector3::zeros(),
            var_w,
            period,
            &z,
        )
        .unwrap();
        let zv = z.vector();
        for i in 0..3 {
            // Angular-acceleration term with E[r] = I picks the row i entry.
            let alpha = (2.0 * var_w / (period * period)) * (zv.norm_squared() - zv[i] * zv[i]);
            // Centripetal term at zero mean omega: diagonal entries have
            // variance 2 * (2 var_w^2), off-diagonal var_w^2; the mean
            // terms drop because Var(r) = 0.
            let cent_var = 4.0 * var_w * var_w * zv[i] * zv[i]
                + var_w * var_w * (zv.norm_squared() - zv[i] * zv[i]);
            let expected = var_a[i] + alpha + cent_var;
            assert!(
                (out[i] - expected).abs() < 1e-15,
                "axis {i}: {} vs {}",
                out[i],
                expected
            );
        }
    }

    #[test]
    fn accel_variance_is_monotone_in_inputs() {
        let mut r = rng(34);
        for _ in 0..50 {
            let rot = random_rotation(&mut r);
            let var_a = Vector3::new(
                r.gen_range(0.0..1e-3),
                r.gen_range(0.0..1e-3),
                r.gen_range(0.0..1e-3),
            );
            let var_r = SVector::<f64, 9>::from_fn(|_, _| r.gen_range(0.0..1e-3));
            let omega = Vector3::new(
                r.gen_range(-1.0..1.0),
                r.gen_range(-1.0..1.0),
                r.gen_range(-1.0..1.0),
            );
            let var_w = r.gen_range(0.0..1e-3);
            let z = LeverArm::new(Vector3::new(
                r.gen_range(-0.3..0.3),
                r.gen_range(-0.3..0.3),
                r.gen_range(-0.3..0.3),
            ))
            .unwrap();
            let base =
                accel_variance_to_centroid(&var_a, &rot, &var_r, &omega, var_w, 0.1, &z).unwrap();
            let bumped_a = accel_variance_to_centroid(
                &(var_a + Vector3::new(1e-4, 1e-4, 1e-4)),
                &rot,
                &var_r,
                &omega,
                var_w,
                0.1,
                &z,
            )
            .unwrap();
            let bumped_r =
                accel_variance_to_centroid(&var_a, &rot, &var_r.add_scalar(1e-4), &omega, var_w, 0.1, &z)
                    .unwrap();
            let bumped_w =
                accel_variance_to_centroid(&var_a, &rot, &var_r, &omega, var_w + 1e-4, 0.1, &z)
                    .unwrap();
            for i in 0..3 {
                assert!(bumped_a[i] >= base[i]);
                assert!(bumped_r[i] >= base[i]);
                assert!(bumped_w[i] >= base[i]);
            }
        }
    }

    #[test]
    fn noiseless_ranges_are_euclidean_distances() {
        let beacons = box_beacons();
        let mut r = rng(35);
        let tx = [
            Vector3::new(1.0, 2.0, 0.5),
            Vector3::new(1.1, 2.0, 0.5),
            Vector3::new(0.9, 2.0, 0.5),
        ];
        let ranges = simulate_ranges(&tx, &beacons, 0.0, &mut r).unwrap();
        for (j, b) in beacons.positions().iter().enumerate() {
            for (i, t) in tx.iter().enumerate() {
                assert!((ranges.range(i, j) - (t - b).norm()).abs() < 1e-15);
            }
        }
        // A transmitter sitting on a beacon measures zero.
        let tx_at_beacon = [beacons.positions()[0]; 3];
        let ranges = simulate_ranges(&tx_at_beacon, &beacons, 0.0, &mut r).unwrap();
        assert_eq!(ranges.range(0, 0), 0.0);
    }

    #[test]
    fn range_noise_passes_kolmogorov_smirnov() {
        let beacons = box_beacons();
        let sigma = 0.05;
        let tx = [
            Vector3::new(2.5, 2.5, 1.5),
            Vector3::new(2.6, 2.5, 1.5),
            Vector3::new(2.4, 2.5, 1.5),
        ];
        let mut r = rng(36);
        let mut residuals = Vec::new();
        while residuals.len() < 100_000 {
            let ranges = simulate_ranges(&tx, &beacons, sigma, &mut r).unwrap();
            for (j, b) in beacons.positions().iter().enumerate() {
                for (i, t) in tx.iter().enumerate() {
                    residuals.push(ranges.range(i, j) - (t - b).norm());
                }
            }
        }
        residuals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = residuals.len() as f64;
        // Unbiased: the empirical mean shrinks with the sample count.
        let mean: f64 = residuals.iter().sum::<f64>() / n;
        assert!(mean.abs() < 4.0 * sigma / n.sqrt(), "residual mean {mean}");
        let phi = |x: f64| 0.5 * (1.0 + libm::erf(x / (sigma * 2.0_f64.sqrt())));
        let mut d: f64 = 0.0;
        for (idx, x) in residuals.iter().enumerate() {
            let f_lo = idx as f64 / n;
            let f_hi = (idx + 1) as f64 / n;
            let p = phi(*x);
            d = d.max((p - f_lo).abs()).max((f_hi - p).abs());
        }
        // Critical value of the KS statistic at p = 0.01.
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn multilateration_recovers_noiseless_placements() {
        let beacons = box_beacons();
        let mut r = rng(37);
        let tx = [
            Vector3::new(1.0, 2.0, 0.5),
            Vector3::new(1.05, 2.0, 0.55),
            Vector3::new(0.95, 2.0, 0.45),
        ];
        let ranges = simulate_ranges(&tx, &beacons, 0.0, &mut r).unwrap();
        let init = [beacons.centroid(); 3];
        let (y, converged) = multilaterate(&ranges, &beacons, &init).unwrap();
        assert!(converged);
        for (i, t) in tx.iter().enumerate() {
            assert!((y.fixed_rows::<3>(3 * i).into_owned() - t).norm() < 1e-8);
        }
    }

    #[test]
    fn multilateration_from_truth_converges_immediately() {
        let beacons = box_beacons();
        let mut r = rng(38);
        let tx = [
            Vector3::new(3.0, 1.0, 1.0),
            Vector3::new(3.1, 1.0, 1.0),
            Vector3::new(2.9, 1.0, 1.0),
        ];
        let ranges = simulate_ranges(&tx, &beacons, 0.0, &mut r).unwrap();
        let (y, converged) = multilaterate(&ranges, &beacons, &tx).unwrap();
        assert!(converged);
        for (i, t) in tx.iter().enumerate() {
            assert!((y.fixed_rows::<3>(3 * i).into_owned() - t).norm() < 1e-12);
        }
    }

    #[test]
    fn multilateration_beats_raw_range_noise() {
        // With 8 well-spread beacons the per-axis position error stays below
        // the range sigma (geometric dilution gain).
        let beacons = box_beacons();
        let sigma = 0.01;
        let truth = [
            Vector3::new(2.5, 2.5, 1.5),
            Vector3::new(2.6, 2.5, 1.5),
            Vector3::new(2.4, 2.5, 1.5),
        ];
        let mut r = rng(39);
        let trials = 1000;
        let mut sq_err = Vector3::<f64>::zeros();
        for _ in 0..trials {
            let ranges = simulate_ranges(&truth, &beacons, sigma, &mut r).unwrap();
            let (y, _) = multilaterate(&ranges, &beacons, &[beacons.centroid(); 3]).unwrap();
            let e = y.fixed_rows::<3>(0).into_owned() - truth[0];
            sq_err += e.component_mul(&e);
        }
        for axis in 0..3 {
            let rmse = (sq_err[axis] / trials as f64).sqrt();
            assert!(rmse < sigma, "axis {axis} rmse {rmse} vs sigma {sigma}");
        }
    }

    #[test]
    fn multilateration_validates_inputs() {
        let beacons = box_beacons();
        let ranges = RangeSet::new(vec![[1.0, 1.0, 1.0]; 4], 0.0).unwrap();
        assert!(multilaterate(&ranges, &beacons, &[Vector3::zeros(); 3]).is_err());
    }
}
