//! Ground-truth trajectory generation and sensor-stream synthesis.
//!
//! Dynamic paths are piecewise quintic Hermite splines through a waypoint
//! table: waypoint velocities and accelerations come from centered
//! differences (zero at both ends), which makes position, velocity, and
//! world-frame acceleration analytically consistent and twice continuously
//! differentiable. Orientation follows the path: yaw tracks the horizontal
//! tangent and, on the stair path, pitch tracks the climb angle; both are
//! splined through the same machinery so the body-frame angular velocity is
//! available in closed form.
//!
//! Path shapes approximate the published figures; exact coordinates were
//! never released, so the waypoint tables below are labeled approximate and
//! can be overridden through the scenario file.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::Rng;

use crate::filters::{FilterConfig, InputCovariance, Measurement, MeasurementCovariance, ScenarioStream};
use crate::kinematics::{InputVector, StateVector, TransmitterGeometry};
use crate::sensors::{self, BeaconMap, LeverArm, RangeSet};
use crate::so3::RotationMatrix;
use crate::{math, Error, Result};

/// Maximum target speed in m/s; the generator rejects waypoint tables that
/// would exceed it at the requested duration.
pub const SPEED_CAP: f64 = 2.0;

/// Which ground-truth path to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathKind {
    Static,
    UPath,
    Zigzag,
    Bridge,
    Stair,
}

impl PathKind {
    pub const ALL: [PathKind; 5] =
        [PathKind::Static, PathKind::UPath, PathKind::Zigzag, PathKind::Bridge, PathKind::Stair];

    pub fn name(&self) -> &'static str {
        match self {
            PathKind::Static => "static",
            PathKind::UPath => "u",
            PathKind::Zigzag => "zigzag",
            PathKind::Bridge => "bridge",
            PathKind::Stair => "stair",
        }
    }

    pub fn from_name(name: &str) -> Option<PathKind> {
        PathKind::ALL.iter().copied().find(|k| k.name().eq_ignore_ascii_case(name))
    }

    /// Run length in seconds used by the built-in scenarios.
    pub fn default_duration(&self) -> f64 {
        match self {
            PathKind::Static => 10.0,
            PathKind::UPath => 10.0,
            PathKind::Zigzag => 5.0,
            PathKind::Bridge => 5.0,
            PathKind::Stair => 85.0,
        }
    }

    /// Approximate waypoint tables for the built-in scenarios.
    pub fn default_waypoints(&self) -> Vec<Vector3<f64>> {
        match self {
            PathKind::Static => alloc::vec![Vector3::new(1.0, 1.5, 1.2)],
            PathKind::UPath => alloc::vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(4.0, 0.0, 0.0),
                Vector3::new(5.15, 0.55, 0.0),
                Vector3::new(5.45, 1.4, 0.0),
                Vector3::new(5.15, 2.25, 0.0),
                Vector3::new(4.0, 2.8, 0.0),
                Vector3::new(0.0, 2.8, 0.0),
            ],
            PathKind::Zigzag => alloc::vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(0.95, 1.55, 0.0),
                Vector3::new(1.9, 0.0, 0.0),
                Vector3::new(2.85, 1.55, 0.0),
            ],
            // A rising spiral crossing: the heading turns continuously
            // while the deck climbs, which is what separates the
            // conventional and manifold filters on a five-second run.
            PathKind::Bridge => alloc::vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(0.367696, 0.152304, 0.0571429),
                Vector3::new(0.52, 0.52, 0.114286),
                Vector3::new(0.367696, 0.887696, 0.171429),
                Vector3::new(6.36816e-17, 1.04, 0.228571),
                Vector3::new(-0.367696, 0.887696, 0.285714),
                Vector3::new(-0.52, 0.52, 0.342857),
                Vector3::new(-0.367696, 0.152304, 0.4),
                Vector3::new(-1.27363e-16, 0.0, 0.457143),
                Vector3::new(0.367696, 0.152304, 0.514286),
                Vector3::new(0.52, 0.52, 0.571429),
                Vector3::new(0.367696, 0.887696, 0.628571),
                Vector3::new(1.91045e-16, 1.04, 0.685714),
                Vector3::new(-0.367696, 0.887696, 0.742857),
                Vector3::new(-0.52, 0.52, 0.8),
            ],
            PathKind::Stair => stair_waypoints(),
        }
    }
}

/// Ten stair flights winding up a square well: each flight runs 4 m
/// horizontally and climbs 0.8 m, with a quarter turn on every landing.
fn stair_waypoints() -> Vec<Vector3<f64>> {
    let flights = 10;
    let run = 3.5;
    let rise = 0.8;
    let corner = 1.2;
    let directions = [
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(-1.0, 0.0, 0.0),
        Vector3::new(0.0, -1.0, 0.0),
    ];
    let mut points = Vec::new();
    let mut p = Vector3::new(0.0, 0.0, 0.0);
    points.push(p);
    for flight in 0..flights {
        let d = directions[flight % 4];
        p += d * run + Vector3::new(0.0, 0.0, rise);
        points.push(p);
        if flight + 1 < flights {
            // Rounded quarter-turn landing onto the next flight.
            let d_next = directions[(flight + 1) % 4];
            p += (d + d_next) * corner;
            points.push(p);
        }
    }
    points
}

/// One ground-truth sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub accel_world: Vector3<f64>,
    pub rotation: RotationMatrix,
    pub omega: Vector3<f64>,
}

impl TruthSample {
    /// The true state vector at this sample.
    pub fn state(&self) -> StateVector {
        StateVector::from_parts(&self.rotation, self.position, self.velocity)
    }

    /// True transmitter positions in the global frame.
    pub fn transmitter_positions(&self, geom: &TransmitterGeometry) -> [Vector3<f64>; 3] {
        let mut out = [Vector3::zeros(); 3];
        for (i, pb) in geom.body_positions().iter().enumerate() {
            out[i] = self.position + self.rotation.matrix() * pb;
        }
        out
    }
}

/// Gravity-free body-frame acceleration, `R^T a_world`.
pub fn body_accel(sample: &TruthSample) -> Vector3<f64> {
    sample.rotation.matrix().transpose() * sample.accel_world
}

/// Full description of one synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: PathKind,
    pub duration: f64,
    pub imu_rate: u32,
    pub ms_rate: u32,
    /// Range noise standard deviation in meters.
    pub sigma_r: f64,
    pub seed: u64,
    pub geometry: TransmitterGeometry,
    pub beacons: BeaconMap,
    /// Gyro noise density in deg/s/sqrt(Hz).
    pub gyro_density_dps: f64,
    /// Accelerometer noise density in micro-g/sqrt(Hz).
    pub accel_density_micro_g: f64,
    pub lever_arm: LeverArm,
    pub waypoints: Vec<Vector3<f64>>,
}

impl ScenarioSpec {
    /// Built-in scenario for a path kind: default waypoints and duration,
    /// 10 Hz IMU, 1 Hz measurement system, 0.1 m range noise, MPU-9250
    /// noise densities, and eight beacons on the inflated waypoint box.
    pub fn builtin(kind: PathKind) -> Result<Self> {
        let waypoints = kind.default_waypoints();
        let beacons = auto_beacons(&waypoints, 1.0)?;
        let spec = Self {
            kind,
            duration: kind.default_duration(),
            imu_rate: 10,
            ms_rate: 1,
            sigma_r: 0.1,
            seed: 42,
            geometry: TransmitterGeometry::new(0.1, 0.3)?,
            beacons,
            gyro_density_dps: 0.01,
            accel_density_micro_g: 300.0,
            lever_arm: LeverArm::zero(),
            waypoints,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration <= 0.0 || !self.duration.is_finite() {
            return Err(Error::InvalidArgument("scenario duration must be positive"));
        }
        if self.imu_rate < 1 || self.ms_rate < 1 || self.imu_rate < self.ms_rate {
            return Err(Error::InvalidArgument("imu_rate must be >= ms_rate >= 1"));
        }
        if self.sigma_r < 0.0 || !self.sigma_r.is_finite() {
            return Err(Error::InvalidArgument("sigma_r must be >= 0"));
        }
        if self.kind == PathKind::Static {
            if self.waypoints.is_empty() {
                return Err(Error::InvalidArgument("static scenario needs one waypoint"));
            }
        } else if self.waypoints.len() < 2 {
            return Err(Error::InvalidArgument("dynamic scenario needs at least 2 waypoints"));
        }
        let steps = self.duration * self.imu_rate as f64;
        if (steps - math::round(steps)).abs() > 1e-9 || math::round(steps) < 1.0 {
            return Err(Error::InvalidArgument(
                "duration times imu_rate must be a positive whole number of steps",
            ));
        }
        Ok(())
    }

    /// IMU sampling period in seconds.
    pub fn period(&self) -> f64 {
        1.0 / self.imu_rate as f64
    }

    /// Number of truth samples, including the initial one.
    pub fn sample_count(&self) -> usize {
        math::round(self.duration * self.imu_rate as f64) as usize + 1
    }

    /// Scenario identifier used in output files.
    pub fn id(&self) -> String {
        String::from(self.kind.name())
    }

    /// Per-sample input covariance at the scenario's IMU rate, in SI units.
    pub fn input_covariance(&self) -> Result<InputCovariance> {
        let (w2_deg, a2) = sensors::imu_variance_from_datasheet(
            self.gyro_density_dps,
            self.accel_density_micro_g,
            self.imu_rate as f64,
        )?;
        let w2 = sensors::gyro_variance_to_rad(w2_deg);
        let mut q = InputCovariance::zeros();
        for i in 0..3 {
            q[(i, i)] = w2;
            q[(3 + i, 3 + i)] = a2;
        }
        Ok(q)
    }

    /// Filter configuration matching this scenario.
    pub fn filter_config(&self) -> Result<FilterConfig> {
        if !self.imu_rate.is_multiple_of(self.ms_rate) {
            return Err(Error::InvalidArgument("imu_rate must be divisible by ms_rate"));
        }
        let mut cfg = FilterConfig::new(
            self.period(),
            self.imu_rate / self.ms_rate,
            self.input_covariance()?,
            MeasurementCovariance::identity() * (self.sigma_r * self.sigma_r),
        )?;
        cfg.lever_arm = self.lever_arm;
        Ok(cfg)
    }
}

/// Eight beacons on the corners of the waypoint bounding box inflated by
/// `inflate` meters on every side.
pub fn auto_beacons(waypoints: &[Vector3<f64>], inflate: f64) -> Result<BeaconMap> {
    if waypoints.is_empty() {
        return Err(Error::InvalidArgument("waypoint list is empty"));
    }
    let mut lo = waypoints[0];
    let mut hi = waypoints[0];
    for w in waypoints {
        for i in 0..3 {
            lo[i] = lo[i].min(w[i]);
            hi[i] = hi[i].max(w[i]);
        }
    }
    lo.add_scalar_mut(-inflate);
    hi.add_scalar_mut(inflate);
    let mut corners = Vec::with_capacity(8);
    for ix in 0..2 {
        for iy in 0..2 {
            for iz in 0..2 {
                corners.push(Vector3::new(
                    if ix == 0 { lo.x } else { hi.x },
                    if iy == 0 { lo.y } else { hi.y },
                    if iz == 0 { lo.z } else { hi.z },
                ));
            }
        }
    }
    BeaconMap::new(corners)
}

/// Scalar quintic Hermite spline through waypoint values, with centered
/// difference velocities and accelerations, zero at both ends.
struct QuinticSpline {
    times: Vec<f64>,
    values: Vec<f64>,
    velocities: Vec<f64>,
    accelerations: Vec<f64>,
}

impl QuinticSpline {
    fn new(times: &[f64], values: Vec<f64>) -> Self {
        let n = values.len();
        let mut velocities = alloc::vec![0.0; n];
        for i in 1..n.saturating_sub(1) {
            velocities[i] = (values[i + 1] - values[i - 1]) / (times[i + 1] - times[i - 1]);
        }
        let mut accelerations = alloc::vec![0.0; n];
        for i in 1..n.saturating_sub(1) {
            accelerations[i] =
                (velocities[i + 1] - velocities[i - 1]) / (times[i + 1] - times[i - 1]);
        }
        Self { times: times.to_vec(), values, velocities, accelerations }
    }

    /// Value and first two derivatives at `t` (clamped to the spline span).
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.times.len();
        if n == 1 {
            return (self.values[0], 0.0, 0.0);
        }
        let t = t.clamp(self.times[0], self.times[n - 1]);
        let mut seg = n - 2;
        for i in 0..n - 1 {
            if t <= self.times[i + 1] {
                seg = i;
                break;
            }
        }
        let h = self.times[seg + 1] - self.times[seg];
        let s = (t - self.times[seg]) / h;
        let (p0, p1) = (self.values[seg], self.values[seg + 1]);
        let (v0, v1) = (self.velocities[seg] * h, self.velocities[seg + 1] * h);
        let (a0, a1) = (
            self.accelerations[seg] * h * h,
            self.accelerations[seg + 1] * h * h,
        );

        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let s5 = s4 * s;
        let basis = [
            1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
            s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5,
            0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5),
            10.0 * s3 - 15.0 * s4 + 6.0 * s5,
            -4.0 * s3 + 7.0 * s4 - 3.0 * s5,
            0.5 * (s3 - 2.0 * s4 + s5),
        ];
        let d1 = [
            -30.0 * s2 + 60.0 * s3 - 30.0 * s4,
            1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
            0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4),
            30.0 * s2 - 60.0 * s3 + 30.0 * s4,
            -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
            0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4),
        ];
        let d2 = [
            -60.0 * s + 180.0 * s2 - 120.0 * s3,
            -36.0 * s + 96.0 * s2 - 60.0 * s3,
            1.0 - 9.0 * s + 18.0 * s2 - 10.0 * s3,
            60.0 * s - 180.0 * s2 + 120.0 * s3,
            -24.0 * s + 84.0 * s2 - 60.0 * s3,
            3.0 * s - 12.0 * s2 + 10.0 * s3,
        ];
        let coeffs = [p0, v0, a0, p1, v1, a1];
        let mut value = 0.0;
        let mut deriv1 = 0.0;
        let mut deriv2 = 0.0;
        for i in 0..6 {
            value += basis[i] * coeffs[i];
            deriv1 += d1[i] * coeffs[i];
            deriv2 += d2[i] * coeffs[i];
        }
        (value, deriv1 / h, deriv2 / (h * h))
    }
}

/// Waypoint times proportional to chord length, scaled to the duration.
fn waypoint_times(waypoints: &[Vector3<f64>], duration: f64) -> Result<Vec<f64>> {
    let mut cumulative = alloc::vec![0.0];
    let mut total = 0.0;
    for pair in waypoints.windows(2) {
        let chord = (pair[1] - pair[0]).norm();
        if chord <= 1e-9 {
            return Err(Error::InvalidArgument("consecutive waypoints coincide"));
        }
        total += chord;
        cumulative.push(total);
    }
    Ok(cumulative.into_iter().map(|c| duration * c / total).collect())
}

/// Unwrapped waypoint headings from the horizontal chord directions, plus
/// climb angles for the pitch profile.
fn heading_profile(waypoints: &[Vector3<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = waypoints.len();
    let mut yaw = alloc::vec![0.0; n];
    let mut climb = alloc::vec![0.0; n];
    let mut last_yaw = 0.0;
    for i in 0..n {
        let d = if i == 0 {
            waypoints[1] - waypoints[0]
        } else if i == n - 1 {
            waypoints[n - 1] - waypoints[n - 2]
        } else {
            waypoints[i + 1] - waypoints[i - 1]
        };
        let horizontal = math::sqrt(d.x * d.x + d.y * d.y);
        let mut psi = if horizontal > 1e-9 { math::atan2(d.y, d.x) } else { last_yaw };
        // Unwrap against the previous heading.
        while psi - last_yaw > core::f64::consts::PI {
            psi -= 2.0 * core::f64::consts::PI;
        }
        while psi - last_yaw < -core::f64::consts::PI {
            psi += 2.0 * core::f64::consts::PI;
        }
        yaw[i] = psi;
        last_yaw = psi;
        climb[i] = math::atan2(d.z, horizontal.max(1e-9));
    }
    (yaw, climb)
}

/// Generates the ground-truth sample sequence for a scenario.
///
/// Static scenarios hold the first waypoint with identity orientation and
/// zero rates. Dynamic scenarios follow the quintic spline through the
/// waypoints; yaw tracks the path tangent and pitch tracks the climb angle
/// on the stair path (zero elsewhere).
pub fn generate_truth(spec: &ScenarioSpec) -> Result<Vec<TruthSample>> {
    spec.validate()?;
    let n = spec.sample_count();
    let period = spec.period();
    if spec.kind == PathKind::Static {
        let p = spec.waypoints[0];
        return Ok((0..n)
            .map(|k| TruthSample {
                t: k as f64 * period,
                position: p,
                velocity: Vector3::zeros(),
                accel_world: Vector3::zeros(),
                rotation: RotationMatrix::identity(),
                omega: Vector3::zeros(),
            })
            .collect());
    }

    let times = waypoint_times(&spec.waypoints, spec.duration)?;
    let axis = |pick: fn(&Vector3<f64>) -> f64| -> Vec<f64> {
        spec.waypoints.iter().map(pick).collect()
    };
    let spline_x = QuinticSpline::new(&times, axis(|w| w.x));
    let spline_y = QuinticSpline::new(&times, axis(|w| w.y));
    let spline_z = QuinticSpline::new(&times, axis(|w| w.z));

    let (yaw_values, climb_values) = heading_profile(&spec.waypoints);
    let yaw_spline = QuinticSpline::new(&times, yaw_values);
    let with_pitch = spec.kind == PathKind::Stair;
    let pitch_spline = if with_pitch {
        // Body pitch is minus the climb angle for the z-up yaw/pitch
        // composition used here.
        Some(QuinticSpline::new(&times, climb_values.iter().map(|c| -c).collect()))
    } else {
        None
    };

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * period;
        let (px, vx, ax) = spline_x.eval(t);
        let (py, vy, ay) = spline_y.eval(t);
        let (pz, vz, az) = spline_z.eval(t);
        let (psi, psi_dot, _) = yaw_spline.eval(t);
        let (theta, theta_dot) = match &pitch_spline {
            Some(s) => {
                let (th, th_dot, _) = s.eval(t);
                (th, th_dot)
            }
            None => (0.0, 0.0),
        };
        let rotation = RotationMatrix::from_matrix_unchecked(
            RotationMatrix::rotation_z(psi).matrix() * RotationMatrix::rotation_y(theta).matrix(),
        );
        // Body rates of R = Rz(psi) Ry(theta).
        let omega = Vector3::new(
            -psi_dot * math::sin(theta),
            theta_dot,
            psi_dot * math::cos(theta),
        );
        out.push(TruthSample {
            t,
            position: Vector3::new(px, py, pz),
            velocity: Vector3::new(vx, vy, vz),
            accel_world: Vector3::new(ax, ay, az),
            rotation,
            omega,
        });
    }

    for sample in &out {
        if sample.velocity.norm() >= SPEED_CAP {
            return Err(Error::InvalidArgument("waypoints violate the speed cap"));
        }
    }
    Ok(out)
}

/// Splits truth into the noiseless streams: one IMU sample per step and the
/// true transmitter positions on every gated step.
#[allow(clippy::type_complexity)]
pub fn emit_streams(
    spec: &ScenarioSpec,
    truth: &[TruthSample],
) -> Result<(Vec<InputVector>, Vec<Option<[Vector3<f64>; 3]>>)> {
    if !spec.imu_rate.is_multiple_of(spec.ms_rate) {
        return Err(Error::InvalidArgument("imu_rate must be divisible by ms_rate"));
    }
    if truth.len() < 2 {
        return Err(Error::InvalidArgument("truth sequence is too short"));
    }
    let ratio = (spec.imu_rate / spec.ms_rate) as usize;
    let steps = truth.len() - 1;
    let mut imu = Vec::with_capacity(steps);
    let mut ms = Vec::with_capacity(steps);
    for k in 0..steps {
        imu.push(InputVector::new(truth[k].omega, body_accel(&truth[k]))?);
        let arrival = k + 1;
        if arrival.is_multiple_of(ratio) {
            ms.push(Some(truth[arrival].transmitter_positions(&spec.geometry)));
        } else {
            ms.push(None);
        }
    }
    Ok((imu, ms))
}

/// Everything one simulated trial produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedScenario {
    pub truth: Vec<TruthSample>,
    pub stream: ScenarioStream,
    /// Raw range sets per gated step: (step index, ranges, multilateration
    /// converged).
    pub ranges: Vec<(usize, RangeSet, bool)>,
}

/// Runs the full forward model: truth, noisy IMU, noisy ranges,
/// multilateration warm-started from the previous fix. Deterministic given
/// the random stream.
pub fn simulate_scenario<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<SimulatedScenario> {
    let truth = generate_truth(spec)?;
    let (imu_true, ms_true) = emit_streams(spec, &truth)?;
    let q = spec.input_covariance()?;

    let mut imu = Vec::with_capacity(imu_true.len());
    let mut measurements: Vec<Option<Measurement>> = Vec::with_capacity(ms_true.len());
    let mut ranges = Vec::new();
    let mut warm_start: Option<[Vector3<f64>; 3]> = None;
    for (k, u_true) in imu_true.iter().enumerate() {
        imu.push(sensors::simulate_imu(&u_true.omega, &u_true.accel_body, &q, rng)?);
        match &ms_true[k] {
            Some(tx_true) => {
                let set = sensors::simulate_ranges(tx_true, &spec.beacons, spec.sigma_r, rng)?;
                let init = warm_start.unwrap_or([spec.beacons.centroid(); 3]);
                let (y, converged) = sensors::multilaterate(&set, &spec.beacons, &init)?;
                warm_start = Some([
                    y.fixed_rows::<3>(0).into_owned(),
                    y.fixed_rows::<3>(3).into_owned(),
                    y.fixed_rows::<3>(6).into_owned(),
                ]);
                ranges.push((k + 1, set, converged));
                measurements.push(Some(y));
            }
            None => measurements.push(None),
        }
    }

    let stream = ScenarioStream {
        period: spec.period(),
        initial: truth[0].state(),
        geometry: spec.geometry,
        imu,
        measurements,
    };
    Ok(SimulatedScenario { truth, stream, ranges })
}
