//! The four estimators: EKF, UKF, and their Riemannian-augmented variants.
//!
//! All four share the same zero-order-hold model and the same rate-gated
//! measurement update. The conventional filters treat the flattened rotation
//! as nine free parameters, so their orientation estimate drifts off the
//! manifold as angular velocity integrates. The Riemannian variants
//! (`EkfRie`, `UkfRie`) retract the orientation back onto SO(3) after the
//! time update and again after the measurement update, and move the 9x9
//! orientation covariance block between tangent spaces by transporting its
//! eigenvectors. Following the published update order, each transport takes
//! the orientation block from the previous stage (the prior transports the
//! previous posterior block, the posterior transports the prior block); the
//! Euclidean updates of that block are replaced, not transported. The
//! unscented variant additionally repairs the transported block to its
//! nearest SPD matrix before the next Cholesky factorization.

use alloc::vec::Vec;

use nalgebra::{Cholesky, SMatrix, SVector, Vector3};

use crate::kinematics::{
    self, InputVector, StateVector, TransmitterGeometry, INPUT_DIM, MEASUREMENT_DIM, STATE_DIM,
};
use crate::sensors::{self, LeverArm};
use crate::so3::{self, CovarianceBlock, RotationMatrix};
use crate::{Error, Result};

pub type StateCovariance = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputCovariance = SMatrix<f64, INPUT_DIM, INPUT_DIM>;
pub type MeasurementCovariance = SMatrix<f64, MEASUREMENT_DIM, MEASUREMENT_DIM>;
pub type Measurement = SVector<f64, MEASUREMENT_DIM>;

/// Number of sigma points for the 15-dimensional state.
pub const SIGMA_COUNT: usize = 2 * STATE_DIM + 1;

/// Manifold tolerance accepted for filter-internal orientation states.
pub const MANIFOLD_STATE_TOL: f64 = 1e-6;

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Ekf,
    Ukf,
    EkfRie,
    UkfRie,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] =
        [FilterKind::Ekf, FilterKind::Ukf, FilterKind::EkfRie, FilterKind::UkfRie];

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Ekf => "EKF",
            FilterKind::Ukf => "UKF",
            FilterKind::EkfRie => "EKFRie",
            FilterKind::UkfRie => "UKFRie",
        }
    }

    /// Case-insensitive lookup by the names printed in outputs.
    pub fn from_name(name: &str) -> Option<FilterKind> {
        FilterKind::ALL.iter().copied().find(|k| k.name().eq_ignore_ascii_case(name))
    }

    pub fn is_riemannian(&self) -> bool {
        matches!(self, FilterKind::EkfRie | FilterKind::UkfRie)
    }
}

/// Shared filter configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// IMU sampling period in seconds.
    pub period: f64,
    /// IMU steps per measurement-system update.
    pub ms_data_rate: u32,
    /// 6x6 input covariance (gyro block then accel block).
    pub input_cov: InputCovariance,
    /// 9x9 measurement covariance.
    pub measurement_cov: MeasurementCovariance,
    pub ukf_alpha: f64,
    pub ukf_iota: f64,
    pub ukf_beta: f64,
    /// Initial 15x15 state covariance.
    pub initial_cov: StateCovariance,
    /// Body-frame IMU offset from the centroid; zero disables the transfer.
    pub lever_arm: LeverArm,
    /// Inject process noise per sigma point with squared weights, as the
    /// unscented update is written. Disable for the textbook additive
    /// `g Q g^T` form.
    pub ukf_pointwise_process_noise: bool,
}

impl FilterConfig {
    pub fn new(
        period: f64,
        ms_data_rate: u32,
        input_cov: InputCovariance,
        measurement_cov: MeasurementCovariance,
    ) -> Result<Self> {
        let cfg = Self {
            period,
            ms_data_rate,
            input_cov,
            measurement_cov,
            ukf_alpha: 1e-3,
            ukf_iota: 1.0,
            ukf_beta: 2.0,
            initial_cov: Self::default_initial_cov(),
            lever_arm: LeverArm::zero(),
            ukf_pointwise_process_noise: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Small diagonal prior: 1e-4 on the orientation entries, 1e-2 on
    /// position (m^2) and velocity ((m/s)^2).
    pub fn default_initial_cov() -> StateCovariance {
        let mut p = StateCovariance::zeros();
        for i in 0..9 {
            p[(i, i)] = 1e-4;
        }
        for i in 9..15 {
            p[(i, i)] = 1e-2;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.period <= 0.0 || !self.period.is_finite() {
            return Err(Error::InvalidArgument("filter period must be positive"));
        }
        if self.ms_data_rate < 1 {
            return Err(Error::InvalidArgument("ms_data_rate must be >= 1"));
        }
        if !psd_within_tolerance(&self.input_cov)
            || !psd_within_tolerance(&self.measurement_cov)
            || !psd_within_tolerance(&self.initial_cov)
        {
            return Err(Error::InvalidArgument("covariances must be symmetric PSD"));
        }
        Ok(())
    }
}

fn psd_within_tolerance<const N: usize>(m: &SMatrix<f64, N, N>) -> bool {
    if !m.iter().all(|c| c.is_finite()) {
        return false;
    }
    let scale = 1.0 + m.norm();
    if (m - m.transpose()).norm() > 1e-9 * scale {
        return false;
    }
    let shifted = so3::symmetrize(m) + SMatrix::<f64, N, N>::identity() * (1e-12 * scale);
    Cholesky::new(shifted).is_some()
}

/// Estimate plus covariance and step bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x: StateVector,
    pub p: StateCovariance,
    /// IMU steps processed so far.
    pub steps: u64,
    /// Measurement updates applied so far.
    pub measurement_updates: u64,
    /// Previous angular-velocity reading, for the lever-arm transfer.
    pub prev_omega: Option<Vector3<f64>>,
}

impl FilterState {
    pub fn new(x: StateVector, p: StateCovariance) -> Self {
        Self { x, p, steps: 0, measurement_updates: 0, prev_omega: None }
    }
}

fn theta_block(p: &StateCovariance) -> SMatrix<f64, 9, 9> {
    p.fixed_view::<9, 9>(0, 0).into_owned()
}

fn set_theta_block(p: &mut StateCovariance, block: &SMatrix<f64, 9, 9>) {
    p.fixed_view_mut::<9, 9>(0, 0).copy_from(block);
}

/// Lever-arm transfer of the accelerometer reading and its variance; a zero
/// lever arm passes the input through.
fn transferred_input(
    st: &FilterState,
    u: &InputVector,
    cfg: &FilterConfig,
) -> Result<(InputVector, InputCovariance)> {
    if !u.is_finite() {
        return Err(Error::InvalidArgument("IMU input is not finite"));
    }
    if cfg.lever_arm.is_zero() {
        return Ok((*u, cfg.input_cov));
    }
    let r = st.x.rotation_block();
    let prev = st.prev_omega.unwrap_or(u.omega);
    let accel = sensors::accel_to_centroid_raw(
        &u.accel_body,
        &r,
        &u.omega,
        &prev,
        cfg.period,
        &cfg.lever_arm,
    );
    let var_r = theta_block(&st.p).diagonal();
    let var_a = Vector3::new(cfg.input_cov[(3, 3)], cfg.input_cov[(4, 4)], cfg.input_cov[(5, 5)]);
    let var_w = cfg.input_cov[(0, 0)];
    let transferred = sensors::accel_variance_to_centroid_raw(
        &var_a,
        &r,
        &var_r,
        &u.omega,
        var_w,
        cfg.period,
        &cfg.lever_arm,
    );
    let mut q = cfg.input_cov;
    for i in 0..3 {
        q[(3 + i, 3 + i)] = transferred[i];
    }
    Ok((InputVector::new(u.omega, accel)?, q))
}

/// Euclidean time update `x <- F x + g(x) u`, `P <- F P F^T + g Q g^T`,
/// with `g` held at the previous posterior state.
fn euclidean_time_update(
    x: &StateVector,
    p: &StateCovariance,
    u: &InputVector,
    q: &InputCovariance,
    period: f64,
) -> Result<(StateVector, StateCovariance)> {
    let f = kinematics::discrete_f(period)?;
    let g = kinematics::discrete_g(x, period)?;
    let x_pred = StateVector::from_vector(f * x.vector() + g * u.as_vector());
    let p_pred = f * p * f.transpose() + g * q * g.transpose();
    Ok((x_pred, so3::symmetrize(&p_pred)))
}

/// Standard Kalman measurement update; returns the posterior and the raw
/// state increment `K (y - h(x))` that the Riemannian variants retract.
fn kalman_measurement_update(
    x: &StateVector,
    p: &StateCovariance,
    y: &Measurement,
    z: &MeasurementCovariance,
    geom: &TransmitterGeometry,
) -> Result<(StateVector, StateCovariance, SVector<f64, STATE_DIM>)> {
    let h = kinematics::measure_jacobian(geom);
    let innovation = y - kinematics::measure_h(x, geom);
    let s = so3::symmetrize(&(h * p * h.transpose() + z));
    let chol = Cholesky::new(s)
        .ok_or(Error::Numerical("innovation covariance is not positive definite"))?;
    // K = P H^T S^-1, solved as K^T = S^-1 H P.
    let k = chol.solve(&(h * p)).transpose();
    let increment = k * innovation;
    let x_new = StateVector::from_vector(x.vector() + increment);
    let p_new = (StateCovariance::identity() - k * h) * p;
    Ok((x_new, so3::symmetrize(&p_new), increment))
}

/// One conventional EKF step: Euclidean time update, then a standard Kalman
/// update when a measurement is present. No retraction anywhere.
pub fn ekf_step(
    st: &FilterState,
    u: &InputVector,
    maybe_y: Option<&Measurement>,
    cfg: &FilterConfig,
    geom: &TransmitterGeometry,
) -> Result<FilterState> {
    let (u_c, q) = transferred_input(st, u, cfg)?;
    let (mut x, mut p) = euclidean_time_update(&st.x, &st.p, &u_c, &q, cfg.period)?;
    let mut updates = st.measurement_updates;
    if let Some(y) = maybe_y {
        let (x_up, p_up, _) = kalman_measurement_update(&x, &p, y, &cfg.measurement_cov, geom)?;
        x = x_up;
        p = p_up;
        updates += 1;
    }
    Ok(FilterState {
        x,
        p,
        steps: st.steps + 1,
        measurement_updates: updates,
        prev_omega: Some(u.omega),
    })
}

/// One Riemannian EKF step.
///
/// After the Euclidean time update the orientation is retracted along the
/// tangent `T * R * hat(omega)` and the orientation covariance block of the
/// previous posterior is transported to the new tangent space. When a
/// measurement arrives, the orientation part of the Kalman increment is
/// retracted at the prior orientation and the prior orientation block is
/// transported again.
pub fn ekfrie_step(
    st: &FilterState,
    u: &InputVector,
    maybe_y: Option<&Measurement>,
    cfg: &FilterConfig,
    geom: &TransmitterGeometry,
) -> Result<FilterState> {
    let r_prev = RotationMatrix::new_with_tolerance(st.x.rotation_block(), MANIFOLD_STATE_TOL)?;
    let (u_c, q) = transferred_input(st, u, cfg)?;
    let (x_pred, mut p_cur) = euclidean_time_update(&st.x, &st.p, &u_c, &q, cfg.period)?;

    let tangent = r_prev.matrix() * so3::skew(&u_c.omega) * cfg.period;
    let r_pred = so3::retract(&r_prev, &tangent)?;
    let p_theta_prev = CovarianceBlock::from_matrix_unchecked(theta_block(&st.p));
    let p_theta_pred = so3::transport_covariance(&p_theta_prev, &r_prev, &r_pred)?;
    set_theta_block(&mut p_cur, p_theta_pred.matrix());
    let mut x_cur = StateVector::from_blocks(r_pred.matrix(), x_pred.position(), x_pred.velocity());

    let mut updates = st.measurement_updates;
    if let Some(y) = maybe_y {
        let (x_up, p_up, increment) =
            kalman_measurement_update(&x_cur, &p_cur, y, &cfg.measurement_cov, geom)?;
        let theta_inc = kinematics::unflatten_rotation(&increment.fixed_rows::<9>(0).into_owned());
        let r_post = so3::retract(&r_pred, &theta_inc)?;
        let p_theta_post = so3::transport_covariance(&p_theta_pred, &r_pred, &r_post)?;
        p_cur = p_up;
        set_theta_block(&mut p_cur, p_theta_post.matrix());
        x_cur = StateVector::from_blocks(r_post.matrix(), x_up.position(), x_up.velocity());
        updates += 1;
    }
    debug_assert!(so3::check_on_manifold(&x_cur.rotation_block(), MANIFOLD_STATE_TOL));
    Ok(FilterState {
        x: x_cur,
        p: so3::symmetrize(&p_cur),
        steps: st.steps + 1,
        measurement_updates: updates,
        prev_omega: Some(u.omega),
    })
}

/// Sigma points of the scaled unscented transform.
#[derive(Debug, Clone)]
pub struct SigmaPoints {
    pub points: [SVector<f64, STATE_DIM>; SIGMA_COUNT],
    pub mean_weights: [f64; SIGMA_COUNT],
    pub cov_weights: [f64; SIGMA_COUNT],
}

/// Builds the 2L+1 sigma points `x`, `x +- columns of sqrt((L+lambda) P)`
/// with `lambda = alpha^2 (L + iota) - L` and the standard mean/covariance
/// weights. A failed Cholesky factorization is retried once after a
/// nearest-SPD repair of `P`.
pub fn sigma_points(
    x: &StateVector,
    p: &StateCovariance,
    alpha: f64,
    iota: f64,
    beta: f64,
) -> Result<SigmaPoints> {
    let l = STATE_DIM as f64;
    let scale = alpha * alpha * (l + iota);
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::InvalidArgument("unscented scaling must be positive"));
    }
    let lambda = scale - l;
    let scaled = so3::symmetrize(&(p * scale));
    let chol = match Cholesky::new(scaled) {
        Some(c) => c,
        None => {
            let repaired = so3::nearest_spd_matrix(&scaled)?;
            Cholesky::new(repaired)
                .ok_or(Error::Numerical("sigma-point Cholesky failed after SPD repair"))?
        }
    };
    let root = chol.l();
    let mut points = [*x.vector(); SIGMA_COUNT];
    for i in 0..STATE_DIM {
        let col = root.column(i);
        points[1 + i] = x.vector() + col;
        points[1 + STATE_DIM + i] = x.vector() - col;
    }
    let w_rest = 1.0 / (2.0 * scale);
    let mut mean_weights = [w_rest; SIGMA_COUNT];
    let mut cov_weights = [w_rest; SIGMA_COUNT];
    mean_weights[0] = lambda / scale;
    cov_weights[0] = lambda / scale + (1.0 - alpha * alpha + beta);
    Ok(SigmaPoints { points, mean_weights, cov_weights })
}

/// Unscented time update. Every sigma point is propagated through the full
/// model (`g` evaluated per point) and the process noise is injected per
/// point with squared weights, or once at the previous mean when the
/// textbook form is selected.
fn ukf_time_update(
    x: &StateVector,
    p: &StateCovariance,
    u: &InputVector,
    q: &InputCovariance,
    cfg: &FilterConfig,
) -> Result<(StateVector, StateCovariance, SigmaPoints)> {
    let sp = sigma_points(x, p, cfg.ukf_alpha, cfg.ukf_iota, cfg.ukf_beta)?;
    let f = kinematics::discrete_f(cfg.period)?;
    let u_vec = u.as_vector();
    let mut propagated = [SVector::<f64, STATE_DIM>::zeros(); SIGMA_COUNT];
    let mut noise = StateCovariance::zeros();
    for (i, pt) in sp.points.iter().enumerate() {
        let rotation = StateVector::from_vector(*pt).rotation_block();
        let g = kinematics::g_blocks(&rotation, cfg.period);
        propagated[i] = f * pt + g * u_vec;
        if cfg.ukf_pointwise_process_noise {
            let w2 = sp.cov_weights[i] * sp.cov_weights[i];
            noise += g * q * g.transpose() * w2;
        }
    }
    if !cfg.ukf_pointwise_process_noise {
        let g = kinematics::g_blocks(&x.rotation_block(), cfg.period);
        noise = g * q * g.transpose();
    }
    let mut mean = SVector::<f64, STATE_DIM>::zeros();
    for (i, pt) in propagated.iter().enumerate() {
        mean += sp.mean_weights[i] * pt;
    }
    let mut cov = noise;
    for (i, pt) in propagated.iter().enumerate() {
        let d = pt - mean;
        cov += sp.cov_weights[i] * d * d.transpose();
    }
    Ok((StateVector::from_vector(mean), so3::symmetrize(&cov), sp))
}

/// Unscented measurement update with fresh sigma points of the prior.
fn ukf_measurement_update(
    x: &StateVector,
    p: &StateCovariance,
    y: &Measurement,
    cfg: &FilterConfig,
    geom: &TransmitterGeometry,
) -> Result<(StateVector, StateCovariance, SVector<f64, STATE_DIM>)> {
    let sp = sigma_points(x, p, cfg.ukf_alpha, cfg.ukf_iota, cfg.ukf_beta)?;
    let mut y_points = [Measurement::zeros(); SIGMA_COUNT];
    for (i, pt) in sp.points.iter().enumerate() {
        y_points[i] = kinematics::measure_h(&StateVector::from_vector(*pt), geom);
    }
    let mut y_mean = Measurement::zeros();
    for (i, yp) in y_points.iter().enumerate() {
        y_mean += sp.mean_weights[i] * yp;
    }
    let mut innovation_cov = cfg.measurement_cov;
    let mut cross_cov = SMatrix::<f64, STATE_DIM, MEASUREMENT_DIM>::zeros();
    for ((yp, pt), w) in y_points.iter().zip(sp.points.iter()).zip(sp.cov_weights.iter()) {
        let dy = yp - y_mean;
        let dx = pt - x.vector();
        innovation_cov += *w * dy * dy.transpose();
        cross_cov += *w * dx * dy.transpose();
    }
    let innovation_cov = so3::symmetrize(&innovation_cov);
    let chol = Cholesky::new(innovation_cov)
        .ok_or(Error::Numerical("innovation covariance is not positive definite"))?;
    let k = chol.solve(&cross_cov.transpose()).transpose();
    let increment = k * (y - y_mean);
    let x_new = StateVector::from_vector(x.vector() + increment);
    let p_new = p - k * innovation_cov * k.transpose();
    Ok((x_new, so3::symmetrize(&p_new), increment))
}

/// One conventional UKF step.
pub fn ukf_step(
    st: &FilterState,
    u: &InputVector,
    maybe_y: Option<&Measurement>,
    cfg: &FilterConfig,
    geom: &TransmitterGeometry,
) -> Result<FilterState> {
    let (u_c, q) = transferred_input(st, u, cfg)?;
    let (mut x, mut p, _) = ukf_time_update(&st.x, &st.p, &u_c, &q, cfg)?;
    let mut updates = st.measurement_updates;
    if let Some(y) = maybe_y {
        let (x_up, p_up, _) = ukf_measurement_update(&x, &p, y, cfg, geom)?;
        x = x_up;
        p = p_up;
        updates += 1;
    }
    Ok(FilterState {
        x,
        p,
        steps: st.steps + 1,
        measurement_updates: updates,
        prev_omega: Some(u.omega),
    })
}

/// One Riemannian UKF step.
///
/// The orientation retraction uses the weight-averaged tangent over the
/// sigma points, and each transported orientation block is repaired to its
/// nearest SPD matrix before reuse.
pub fn ukfrie_step(
    st: &FilterState,
    u: &InputVector,
    maybe_y: Option<&Measurement>,
    cfg: &FilterConfig,
    geom: &TransmitterGeometry,
) -> Result<FilterState> {
    let r_prev = RotationMatrix::new_with_tolerance(st.x.rotation_block(), MANIFOLD_STATE_TOL)?;
    let (u_c, q) = transferred_input(st, u, cfg)?;
    let (x_pred, mut p_cur, sp) = ukf_time_update(&st.x, &st.p, &u_c, &q, cfg)?;

    // Weighted tangent mean over the sigma points, T * sum of w_l Pi_l omega.
    let mut tangent_flat = SVector::<f64, 9>::zeros();
    for (i, pt) in sp.points.iter().enumerate() {
        let rotation = StateVector::from_vector(*pt).rotation_block();
        tangent_flat += sp.mean_weights[i] * (kinematics::pi_block(&rotation) * u_c.omega);
    }
    let tangent = kinematics::unflatten_rotation(&(tangent_flat * cfg.period));
    let r_pred = so3::retract(&r_prev, &tangent)?;
    let p_theta_prev = CovarianceBlock::from_matrix_unchecked(theta_block(&st.p));
    let transported = so3::transport_covariance(&p_theta_prev, &r_prev, &r_pred)?;
    let p_theta_pred = so3::nearest_spd(transported.matrix())?;
    set_theta_block(&mut p_cur, p_theta_pred.matrix());
    let mut x_cur = StateVector::from_blocks(r_pred.matrix(), x_pred.position(), x_pred.velocity());

    let mut updates = st.measurement_updates;
    if let Some(y) = maybe_y {
        let (x_up, p_up, increment) = ukf_measurement_update(&x_cur, &p_cur, y, cfg, geom)?;
        let theta_inc = kinematics::unflatten_rotation(&increment.fixed_rows::<9>(0).into_owned());
        let r_post = so3::retract(&r_pred, &theta_inc)?;
        let transported = so3::transport_covariance(&p_theta_pred, &r_pred, &r_post)?;
        let p_theta_post = so3::nearest_spd(transported.matrix())?;
        p_cur = p_up;
        set_theta_block(&mut p_cur, p_theta_post.matrix());
        x_cur = StateVector::from_blocks(r_post.matrix(), x_up.position(), x_up.velocity());
        updates += 1;
    }
    debug_assert!(so3::check_on_manifold(&x_cur.rotation_block(), MANIFOLD_STATE_TOL));
    Ok(FilterState {
        x: x_cur,
        p: so3::symmetrize(&p_cur),
        steps: st.steps + 1,
        measurement_updates: updates,
        prev_omega: Some(u.omega),
    })
}

/// Time-aligned sensor streams for one run: one IMU sample per step and a
/// measurement on the gated steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStream {
    /// IMU sampling period in seconds.
    pub period: f64,
    /// Known initial state.
    pub initial: StateVector,
    pub geometry: TransmitterGeometry,
    /// One input per step; entry `k` drives the transition to step `k + 1`.
    pub imu: Vec<InputVector>,
    /// Aligned with `imu`: `Some` on steps where the measurement system
    /// delivered a position fix.
    pub measurements: Vec<Option<Measurement>>,
}

/// Runs one estimator over a stream. The returned sequence starts with the
/// initial state, so it is index-aligned with the truth samples. Identical
/// streams and configuration produce bit-identical outputs.
pub fn run_filter(
    kind: FilterKind,
    stream: &ScenarioStream,
    cfg: &FilterConfig,
) -> Result<Vec<FilterState>> {
    if stream.imu.len() != stream.measurements.len() {
        return Err(Error::StreamMisaligned("imu and measurement streams differ in length"));
    }
    if (stream.period - cfg.period).abs() > 1e-12 {
        return Err(Error::StreamMisaligned("stream period differs from filter period"));
    }
    // Measurements may drop out, but any that are present must sit on the
    // configured gate.
    for (k, m) in stream.measurements.iter().enumerate() {
        let gated = (k as u64 + 1) % cfg.ms_data_rate as u64 == 0;
        if m.is_some() && !gated {
            return Err(Error::StreamMisaligned(
                "measurement arrived off the ms_data_rate gate",
            ));
        }
    }
    let step = match kind {
        FilterKind::Ekf => ekf_step,
        FilterKind::Ukf => ukf_step,
        FilterKind::EkfRie => ekfrie_step,
        FilterKind::UkfRie => ukfrie_step,
    };
    let mut state = FilterState::new(stream.initial, cfg.initial_cov);
    let mut out = Vec::with_capacity(stream.imu.len() + 1);
    out.push(state.clone());
    for (u, y) in stream.imu.iter().zip(stream.measurements.iter()) {
        state = step(&state, u, y.as_ref(), cfg, &stream.geometry)?;
        out.push(state.clone());
    }
    Ok(out)
}
