//! Error metrics and Monte-Carlo aggregation.
//!
//! Position error is the Euclidean norm per step; orientation error is the
//! geodesic angle on SO(3) in degrees. Conventional filter estimates drift
//! off the manifold, so the per-step pipeline uses [`rotation_angle_deg`],
//! which clamps the trace argument and is defined for any 3x3 block.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::filters::FilterKind;
use crate::math;
use crate::so3::RotationMatrix;
use crate::{Error, Result};

/// Geodesic angle between two orientation blocks in degrees, from the
/// clamped trace formula. Accepts raw blocks so conventional estimates that
/// left the manifold still produce a finite pseudo-angle.
pub fn rotation_angle_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    math::acos(c.clamp(-1.0, 1.0)) * 180.0 / core::f64::consts::PI
}

/// Root-mean-square position error over aligned sequences.
pub fn rmse_position(est: &[Vector3<f64>], truth: &[Vector3<f64>]) -> Result<f64> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::InvalidArgument("sequences must be non-empty and equal length"));
    }
    let sum: f64 = est.iter().zip(truth).map(|(e, t)| (e - t).norm_squared()).sum();
    Ok(math::sqrt(sum / est.len() as f64))
}

/// Root-mean-square geodesic orientation error in degrees over aligned
/// sequences of valid rotations.
pub fn rmse_orientation(est: &[RotationMatrix], truth: &[RotationMatrix]) -> Result<f64> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::InvalidArgument("sequences must be non-empty and equal length"));
    }
    let sum: f64 = est
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let a = rotation_angle_deg(e.matrix(), t.matrix());
            a * a
        })
        .sum();
    Ok(math::sqrt(sum / est.len() as f64))
}

/// Fraction of errors at or below each grid point. The grid must be sorted
/// ascending; the output is monotone non-decreasing.
pub fn error_cdf(errors: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("error sequence is empty"));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument("grid must be finite and sorted ascending"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|g| sorted.partition_point(|e| e <= g) as f64 / n)
        .collect())
}

/// Smallest value with at least `q` of the sample at or below it
/// (order-statistic percentile, `0 < q <= 1`).
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty sample"));
    }
    if q.is_nan() || q <= 0.0 || q > 1.0 {
        return Err(Error::InvalidArgument("percentile fraction must be in (0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = math::ceil(q * sorted.len() as f64) as usize;
    Ok(sorted[rank.max(1) - 1])
}

/// Per-step error traces of one filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario_id: String,
    pub filter: FilterKind,
    pub seed: u64,
    /// Per-step position error norms in meters.
    pub pos_errors: Vec<f64>,
    /// Per-step orientation errors in degrees.
    pub ori_errors_deg: Vec<f64>,
}

impl RunResult {
    pub fn new(
        scenario_id: String,
        filter: FilterKind,
        seed: u64,
        pos_errors: Vec<f64>,
        ori_errors_deg: Vec<f64>,
    ) -> Result<Self> {
        if pos_errors.len() != ori_errors_deg.len() || pos_errors.is_empty() {
            return Err(Error::InvalidArgument("error traces must be non-empty and equal length"));
        }
        if pos_errors.iter().chain(ori_errors_deg.iter()).any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::InvalidArgument("errors must be finite and >= 0"));
        }
        Ok(Self { scenario_id, filter, seed, pos_errors, ori_errors_deg })
    }

    /// Builds the error traces from aligned estimate and truth sequences
    /// (the known initial state is excluded).
    pub fn from_run(
        scenario_id: String,
        filter: FilterKind,
        seed: u64,
        est_positions: &[Vector3<f64>],
        est_rotations: &[Matrix3<f64>],
        truth_positions: &[Vector3<f64>],
        truth_rotations: &[Matrix3<f64>],
    ) -> Result<Self> {
        if est_positions.len() != truth_positions.len()
            || est_rotations.len() != truth_rotations.len()
            || est_positions.len() != est_rotations.len()
            || est_positions.len() < 2
        {
            return Err(Error::InvalidArgument("estimate and truth sequences must align"));
        }
        let pos = est_positions
            .iter()
            .zip(truth_positions)
            .skip(1)
            .map(|(e, t)| (e - t).norm())
            .collect();
        let ori = est_rotations
            .iter()
            .zip(truth_rotations)
            .skip(1)
            .map(|(e, t)| rotation_angle_deg(e, t))
            .collect();
        Self::new(scenario_id, filter, seed, pos, ori)
    }

    /// Scalar position RMSE of this run.
    pub fn rmse_pos(&self) -> f64 {
        let sum: f64 = self.pos_errors.iter().map(|e| e * e).sum();
        math::sqrt(sum / self.pos_errors.len() as f64)
    }

    /// Scalar orientation RMSE of this run in degrees.
    pub fn rmse_ori_deg(&self) -> f64 {
        let sum: f64 = self.ori_errors_deg.iter().map(|e| e * e).sum();
        math::sqrt(sum / self.ori_errors_deg.len() as f64)
    }
}

/// Monte-Carlo summary for one filter kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterAggregate {
    pub filter: FilterKind,
    pub trials: usize,
    /// Per-trial position RMSE values.
    pub trial_rmse_pos: Vec<f64>,
    /// Per-trial orientation RMSE values in degrees.
    pub trial_rmse_ori_deg: Vec<f64>,
    pub rmse_pos_mean: f64,
    pub rmse_pos_std: f64,
    /// 90th percentile of the per-trial position RMSE values.
    pub rmse_pos_p90: f64,
    pub rmse_ori_mean_deg: f64,
    pub rmse_ori_std_deg: f64,
    /// Per-step position errors pooled over all trials.
    pub pooled_pos_errors: Vec<f64>,
    /// CDF fractions of the pooled errors on the shared grid.
    pub cdf_fractions: Vec<f64>,
}

/// Aggregate over all filters in a result set, with a shared CDF grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialAggregate {
    pub filters: Vec<FilterAggregate>,
    /// Shared grid for the pooled-error CDFs, from zero to the largest
    /// pooled error.
    pub cdf_grid: Vec<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, math::sqrt(var))
}

/// Groups results by filter kind (stable in order of first appearance) and
/// summarizes: per-trial RMSE mean/std/p90 and the pooled per-step error
/// CDF on a grid shared across filters.
pub fn aggregate_trials(results: &[RunResult]) -> Result<TrialAggregate> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no trials to aggregate"));
    }
    let mut order: Vec<FilterKind> = Vec::new();
    for r in results {
        if !order.contains(&r.filter) {
            order.push(r.filter);
        }
    }
    let mut max_err = 0.0f64;
    for r in results {
        for e in &r.pos_errors {
            max_err = max_err.max(*e);
        }
    }
    let grid: Vec<f64> = (0..=100).map(|i| max_err * i as f64 / 100.0).collect();

    let mut filters = Vec::with_capacity(order.len());
    for kind in order {
        let group: Vec<&RunResult> = results.iter().filter(|r| r.filter == kind).collect();
        let trial_rmse_pos: Vec<f64> = group.iter().map(|r| r.rmse_pos()).collect();
        let trial_rmse_ori: Vec<f64> = group.iter().map(|r| r.rmse_ori_deg()).collect();
        let pooled: Vec<f64> =
            group.iter().flat_map(|r| r.pos_errors.iter().copied()).collect();
        let (pos_mean, pos_std) = mean_std(&trial_rmse_pos);
        let (ori_mean, ori_std) = mean_std(&trial_rmse_ori);
        let fractions = error_cdf(&pooled, &grid)?;
        filters.push(FilterAggregate {
            filter: kind,
            trials: group.len(),
            rmse_pos_p90: percentile(&trial_rmse_pos, 0.9)?,
            trial_rmse_pos,
            trial_rmse_ori_deg: trial_rmse_ori,
            rmse_pos_mean: pos_mean,
            rmse_pos_std: pos_std,
            rmse_ori_mean_deg: ori_mean,
            rmse_ori_std_deg: ori_std,
            pooled_pos_errors: pooled,
            cdf_fractions: fractions,
        });
    }
    Ok(TrialAggregate { filters, cdf_grid: grid })
}
