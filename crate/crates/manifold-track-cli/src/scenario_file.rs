//! Scenario files: sectioned key-value text describing one experiment.
//!
//! ```text
//! [path]
//! kind = u              # static | u | zigzag | bridge | stair
//! duration = 10.0       # seconds
//! waypoints = 0,0,0; 4,0,0; ...   # optional, meters
//!
//! [rates]
//! imu_rate = 10         # Hz
//! ms_rate = 1           # Hz, must divide imu_rate
//!
//! [noise]
//! sigma_r = 0.1         # range noise std, meters
//! gyro_density_dps = 0.01    # deg/s/sqrt(Hz)
//! accel_density_ug = 300     # micro-g/sqrt(Hz)
//! seed = 42
//!
//! [geometry]
//! base = 0.1            # transmitter triangle base, meters
//! altitude = 0.3        # transmitter triangle altitude, meters
//! lever_arm = 0,0,0     # body-frame IMU offset, meters
//!
//! [beacons]
//! auto = true           # corners of the inflated waypoint box
//! inflate = 1.0         # meters
//! beacon = 0,0,0        # repeated explicit beacons when auto = false
//! ```
//!
//! Every key is optional except `kind`; omitted keys take the built-in
//! defaults of the selected path. Unknown sections or keys are rejected
//! with their line number.

use std::path::Path;

use manifold_track::scenarios::{auto_beacons, PathKind, ScenarioSpec};
use manifold_track::sensors::{BeaconMap, LeverArm};
use manifold_track::kinematics::TransmitterGeometry;
use nalgebra::Vector3;

use crate::CliError;

fn parse_err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::runtime(format!("scenario file line {line}: {}", msg.into()))
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, CliError> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("{key}: expected a number, got `{value}`")))
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, CliError> {
    value
        .trim()
        .parse::<u64>()
        .map_err(|_| parse_err(line, format!("{key}: expected an integer, got `{value}`")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(parse_err(line, format!("{key}: expected true/false, got `{other}`"))),
    }
}

fn parse_vector(line: usize, key: &str, value: &str) -> Result<Vector3<f64>, CliError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(parse_err(line, format!("{key}: expected three comma-separated numbers")));
    }
    let mut v = Vector3::zeros();
    for (i, p) in parts.iter().enumerate() {
        v[i] = parse_f64(line, key, p)?;
    }
    Ok(v)
}

fn parse_waypoints(line: usize, value: &str) -> Result<Vec<Vector3<f64>>, CliError> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|triple| parse_vector(line, "waypoints", triple))
        .collect()
}

/// Parses scenario text into a validated [`ScenarioSpec`].
pub fn parse(text: &str) -> Result<ScenarioSpec, CliError> {
    let mut section = String::new();
    let mut kind: Option<PathKind> = None;
    let mut duration: Option<f64> = None;
    let mut waypoints: Option<Vec<Vector3<f64>>> = None;
    let mut imu_rate: Option<u32> = None;
    let mut ms_rate: Option<u32> = None;
    let mut sigma_r: Option<f64> = None;
    let mut gyro_density: Option<f64> = None;
    let mut accel_density: Option<f64> = None;
    let mut seed: Option<u64> = None;
    let mut base: Option<f64> = None;
    let mut altitude: Option<f64> = None;
    let mut lever_arm: Option<Vector3<f64>> = None;
    let mut beacons_auto: Option<bool> = None;
    let mut inflate: Option<f64> = None;
    let mut explicit_beacons: Vec<Vector3<f64>> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, "unterminated section header"))?;
            match name {
                "path" | "rates" | "noise" | "geometry" | "beacons" => {
                    section = name.to_string();
                }
                other => return Err(parse_err(line, format!("unknown section `[{other}]`"))),
            }
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        match (section.as_str(), key) {
            ("path", "kind") => {
                kind = Some(PathKind::from_name(value).ok_or_else(|| {
                    parse_err(line, format!("unknown path kind `{value}`"))
                })?);
            }
            ("path", "duration") => duration = Some(parse_f64(line, key, value)?),
            ("path", "waypoints") => waypoints = Some(parse_waypoints(line, value)?),
            ("rates", "imu_rate") => imu_rate = Some(parse_u64(line, key, value)? as u32),
            ("rates", "ms_rate") => ms_rate = Some(parse_u64(line, key, value)? as u32),
            ("noise", "sigma_r") => sigma_r = Some(parse_f64(line, key, value)?),
            ("noise", "gyro_density_dps") => gyro_density = Some(parse_f64(line, key, value)?),
            ("noise", "accel_density_ug") => accel_density = Some(parse_f64(line, key, value)?),
            ("noise", "seed") => seed = Some(parse_u64(line, key, value)?),
            ("geometry", "base") => base = Some(parse_f64(line, key, value)?),
            ("geometry", "altitude") => altitude = Some(parse_f64(line, key, value)?),
            ("geometry", "lever_arm") => lever_arm = Some(parse_vector(line, key, value)?),
            ("beacons", "auto") => beacons_auto = Some(parse_bool(line, key, value)?),
            ("beacons", "inflate") => inflate = Some(parse_f64(line, key, value)?),
            ("beacons", "beacon") => explicit_beacons.push(parse_vector(line, key, value)?),
            ("", _) => return Err(parse_err(line, "key outside of any section")),
            (section, key) => {
                return Err(parse_err(line, format!("unknown key `{key}` in section `[{section}]`")))
            }
        }
    }

    let kind = kind.ok_or_else(|| CliError::runtime("scenario file: missing `kind` in [path]"))?;
    let mut spec = ScenarioSpec::builtin(kind)?;
    if let Some(d) = duration {
        spec.duration = d;
    }
    if let Some(w) = waypoints {
        spec.waypoints = w;
    }
    if let Some(r) = imu_rate {
        spec.imu_rate = r;
    }
    if let Some(r) = ms_rate {
        spec.ms_rate = r;
    }
    if let Some(s) = sigma_r {
        spec.sigma_r = s;
    }
    if let Some(g) = gyro_density {
        spec.gyro_density_dps = g;
    }
    if let Some(a) = accel_density {
        spec.accel_density_micro_g = a;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if base.is_some() || altitude.is_some() {
        spec.geometry = TransmitterGeometry::new(
            base.unwrap_or(spec.geometry.base()),
            altitude.unwrap_or(spec.geometry.altitude()),
        )?;
    }
    if let Some(z) = lever_arm {
        spec.lever_arm = LeverArm::new(z)?;
    }

    let auto = beacons_auto.unwrap_or(explicit_beacons.is_empty());
    if auto {
        if !explicit_beacons.is_empty() {
            return Err(CliError::runtime(
                "scenario file: explicit beacons listed but auto = true",
            ));
        }
        spec.beacons = auto_beacons(&spec.waypoints, inflate.unwrap_or(1.0))?;
    } else {
        spec.beacons = BeaconMap::new(explicit_beacons)?;
    }
    spec.validate()?;
    Ok(spec)
}

/// Loads and parses a scenario file.
pub fn load(path: &Path) -> Result<ScenarioSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Runtime(msg) => CliError::runtime(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Serializes a spec back to scenario-file text (used for the shipped,
/// versioned scenario files; floats round-trip exactly).
pub fn serialize(spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    out.push_str("[path]\n");
    out.push_str(&format!("kind = {}\n", spec.kind.name()));
    out.push_str(&format!("duration = {}\n", spec.duration));
    let waypoints: Vec<String> = spec
        .waypoints
        .iter()
        .map(|w| format!("{},{},{}", w.x, w.y, w.z))
        .collect();
    out.push_str(&format!("waypoints = {}\n", waypoints.join("; ")));
    out.push_str("\n[rates]\n");
    out.push_str(&format!("imu_rate = {}\n", spec.imu_rate));
    out.push_str(&format!("ms_rate = {}\n", spec.ms_rate));
    out.push_str("\n[noise]\n");
    out.push_str(&format!("sigma_r = {}\n", spec.sigma_r));
    out.push_str(&format!("gyro_density_dps = {}\n", spec.gyro_density_dps));
    out.push_str(&format!("accel_density_ug = {}\n", spec.accel_density_micro_g));
    out.push_str(&format!("seed = {}\n", spec.seed));
    out.push_str("\n[geometry]\n");
    out.push_str(&format!("base = {}\n", spec.geometry.base()));
    out.push_str(&format!("altitude = {}\n", spec.geometry.altitude()));
    let z = spec.lever_arm.vector();
    out.push_str(&format!("lever_arm = {},{},{}\n", z.x, z.y, z.z));
    out.push_str("\n[beacons]\n");
    out.push_str("auto = false\n");
    for b in spec.beacons.positions() {
        out.push_str(&format!("beacon = {},{},{}\n", b.x, b.y, b.z));
    }
    out
}
