//! CSV writers and the summary reader.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! identical runs produce byte-identical files and parsing our own output
//! recovers the exact values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use manifold_track::filters::FilterState;
use manifold_track::metrics::TrialAggregate;
use manifold_track::scenarios::TruthSample;

use crate::runner::TrialOutput;
use crate::CliError;

pub const TRUTH_HEADER: &str = "t,px,py,pz,vx,vy,vz,ax,ay,az,\
r11,r21,r31,r12,r22,r32,r13,r23,r33,wx,wy,wz";
pub const IMU_HEADER: &str = "trial,seed,t,wx,wy,wz,abx,aby,abz";
pub const RANGES_HEADER: &str = "trial,seed,t,transmitter,beacon,range_m";
pub const ESTIMATES_HEADER: &str = "sweep,sweep_value,filter,trial,seed,t,\
px,py,pz,vx,vy,vz,r11,r21,r31,r12,r22,r32,r13,r23,r33";
pub const ERRORS_HEADER: &str = "sweep,sweep_value,filter,trial,seed,step,t,pos_err_m,ori_err_deg";
pub const SUMMARY_HEADER: &str = "sweep,sweep_value,filter,trials,\
rmse_pos_mean_m,rmse_pos_std_m,rmse_pos_p90_m,rmse_ori_mean_deg,rmse_ori_std_deg";
pub const CDF_HEADER: &str = "sweep,sweep_value,filter,err_m,fraction";
pub const PLOTDATA_HEADER: &str = "series,x,y";

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, content)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn truth_csv(truth: &[TruthSample]) -> String {
    let mut out = String::from(TRUTH_HEADER);
    out.push('\n');
    for s in truth {
        let r = s.rotation.matrix();
        let _ = write!(out, "{},{},{},{}", s.t, s.position.x, s.position.y, s.position.z);
        let _ = write!(out, ",{},{},{}", s.velocity.x, s.velocity.y, s.velocity.z);
        let _ = write!(out, ",{},{},{}", s.accel_world.x, s.accel_world.y, s.accel_world.z);
        for c in 0..3 {
            for rr in 0..3 {
                let _ = write!(out, ",{}", r[(rr, c)]);
            }
        }
        let _ = writeln!(out, ",{},{},{}", s.omega.x, s.omega.y, s.omega.z);
    }
    out
}

pub fn imu_csv(trials: &[TrialOutput], period: f64) -> String {
    let mut out = String::from(IMU_HEADER);
    out.push('\n');
    for (trial, t) in trials.iter().enumerate() {
        for (k, u) in t.sim.stream.imu.iter().enumerate() {
            let _ = writeln!(
                out,
                "{trial},{},{},{},{},{},{},{},{}",
                t.seed,
                k as f64 * period,
                u.omega.x,
                u.omega.y,
                u.omega.z,
                u.accel_body.x,
                u.accel_body.y,
                u.accel_body.z
            );
        }
    }
    out
}

pub fn ranges_csv(trials: &[TrialOutput], period: f64) -> String {
    let mut out = String::from(RANGES_HEADER);
    out.push('\n');
    for (trial, t) in trials.iter().enumerate() {
        for (step, set, _converged) in &t.sim.ranges {
            for (j, row) in set.rows().iter().enumerate() {
                for (i, range) in row.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{trial},{},{},{},{},{}",
                        t.seed,
                        *step as f64 * period,
                        i + 1,
                        j + 1,
                        range
                    );
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn push_state_row(
    out: &mut String,
    sweep: &str,
    value: f64,
    filter: &str,
    trial: usize,
    seed: u64,
    t: f64,
    state: &FilterState,
) {
    let p = state.x.position();
    let v = state.x.velocity();
    let theta = state.x.orientation();
    let _ = write!(out, "{sweep},{value},{filter},{trial},{seed},{t}");
    let _ = write!(out, ",{},{},{},{},{},{}", p.x, p.y, p.z, v.x, v.y, v.z);
    for i in 0..9 {
        let _ = write!(out, ",{}", theta[i]);
    }
    out.push('\n');
}

/// Estimates of the first trial of each sweep point, one row per step and
/// filter (all trials would dwarf the error traces without adding
/// information; errors.csv covers every trial).
pub fn estimates_csv(sweep: &str, points: &[(f64, &[TrialOutput], f64)]) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for (value, trials, period) in points {
        if let Some(first) = trials.first() {
            for (kind, states, _) in &first.runs {
                for (k, st) in states.iter().enumerate() {
                    push_state_row(
                        &mut out,
                        sweep,
                        *value,
                        kind.name(),
                        0,
                        first.seed,
                        k as f64 * period,
                        st,
                    );
                }
            }
        }
    }
    out
}

pub fn errors_csv(sweep: &str, points: &[(f64, &[TrialOutput], f64)]) -> String {
    let mut out = String::from(ERRORS_HEADER);
    out.push('\n');
    for (value, trials, period) in points {
        for (trial, t) in trials.iter().enumerate() {
            for (kind, _, result) in &t.runs {
                for (k, (pe, oe)) in
                    result.pos_errors.iter().zip(result.ori_errors_deg.iter()).enumerate()
                {
                    let _ = writeln!(
                        out,
                        "{sweep},{value},{},{trial},{},{},{},{pe},{oe}",
                        kind.name(),
                        t.seed,
                        k + 1,
                        (k + 1) as f64 * period,
                    );
                }
            }
        }
    }
    out
}

pub fn summary_csv(sweep: &str, points: &[(f64, TrialAggregate)]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for (value, agg) in points {
        for f in &agg.filters {
            let _ = writeln!(
                out,
                "{sweep},{value},{},{},{},{},{},{},{}",
                f.filter.name(),
                f.trials,
                f.rmse_pos_mean,
                f.rmse_pos_std,
                f.rmse_pos_p90,
                f.rmse_ori_mean_deg,
                f.rmse_ori_std_deg
            );
        }
    }
    out
}

pub fn cdf_csv(sweep: &str, points: &[(f64, TrialAggregate)]) -> String {
    let mut out = String::from(CDF_HEADER);
    out.push('\n');
    for (value, agg) in points {
        for f in &agg.filters {
            for (g, fraction) in agg.cdf_grid.iter().zip(f.cdf_fractions.iter()) {
                let _ = writeln!(out, "{sweep},{value},{},{g},{fraction}", f.filter.name());
            }
        }
    }
    out
}

/// One parsed summary.csv row.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep: String,
    pub sweep_value: f64,
    pub filter: String,
    pub trials: u64,
    pub rmse_pos_mean: f64,
    pub rmse_pos_std: f64,
    pub rmse_pos_p90: f64,
    pub rmse_ori_mean_deg: f64,
    pub rmse_ori_std_deg: f64,
}

/// Parses a summary.csv, reporting malformed lines by number.
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SUMMARY_HEADER => {}
        Some((_, other)) => {
            return Err(CliError::runtime(format!(
                "{} line 1: unexpected header `{other}`",
                path.display()
            )))
        }
        None => return Err(CliError::runtime(format!("{}: empty file", path.display()))),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(CliError::runtime(format!(
                "{} line {}: expected 9 fields, got {}",
                path.display(),
                idx + 1,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64, CliError> {
            fields[i].parse::<f64>().map_err(|_| {
                CliError::runtime(format!(
                    "{} line {}: field {} is not a number: `{}`",
                    path.display(),
                    idx + 1,
                    i + 1,
                    fields[i]
                ))
            })
        };
        rows.push(SummaryRow {
            sweep: fields[0].to_string(),
            sweep_value: num(1)?,
            filter: fields[2].to_string(),
            trials: num(3)? as u64,
            rmse_pos_mean: num(4)?,
            rmse_pos_std: num(5)?,
            rmse_pos_p90: num(6)?,
            rmse_ori_mean_deg: num(7)?,
            rmse_ori_std_deg: num(8)?,
        });
    }
    Ok(rows)
}
