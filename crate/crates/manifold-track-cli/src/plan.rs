//! Experiment plans: which scenario, which filters, which sweep.

use std::path::PathBuf;

use manifold_track::filters::FilterKind;

use crate::CliError;

/// Parameter axis swept by `run`.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    None,
    /// Range-noise standard deviations in meters.
    SigmaR(Vec<f64>),
    /// IMU rates in Hz (per-sample noise variances are re-derived from the
    /// datasheet densities at each rate).
    ImuRate(Vec<u32>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::SigmaR(_) => "sigma_r",
            SweepAxis::ImuRate(_) => "imu_rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub scenario_path: PathBuf,
    pub filters: Vec<FilterKind>,
    pub sweep: SweepAxis,
    pub trials: u32,
    /// Base seed; trial `i` uses `seed_base + i`. Defaults to the scenario
    /// file's seed when absent.
    pub seed_base: Option<u64>,
    pub out_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials < 1 {
            return Err(CliError::usage("--trials must be >= 1"));
        }
        if self.filters.is_empty() {
            return Err(CliError::usage("--filters must name at least one filter"));
        }
        let mut seen: Vec<FilterKind> = Vec::new();
        for f in &self.filters {
            if seen.iter().any(|s| s == f) {
                return Err(CliError::usage(format!("filter {} listed twice", f.name())));
            }
            seen.push(*f);
        }
        match &self.sweep {
            SweepAxis::SigmaR(values) => {
                if values.is_empty() || values.iter().any(|v| v.is_nan() || *v <= 0.0) {
                    return Err(CliError::usage("--sweep-sigma values must be positive"));
                }
            }
            SweepAxis::ImuRate(values) => {
                if values.is_empty() || values.contains(&0) {
                    return Err(CliError::usage("--sweep-imu-rate values must be positive"));
                }
            }
            SweepAxis::None => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_plan() -> ExperimentPlan {
        ExperimentPlan {
            scenario_path: PathBuf::from("s.scn"),
            filters: vec![FilterKind::Ekf],
            sweep: SweepAxis::None,
            trials: 1,
            seed_base: None,
            out_dir: PathBuf::from("out"),
        }
    }

    #[test]
    fn validation_rules() {
        assert!(base_plan().validate().is_ok());
        let mut p = base_plan();
        p.trials = 0;
        assert!(p.validate().is_err());
        let mut p = base_plan();
        p.filters = vec![];
        assert!(p.validate().is_err());
        let mut p = base_plan();
        p.filters = vec![FilterKind::Ekf, FilterKind::Ekf];
        assert!(p.validate().is_err());
        let mut p = base_plan();
        p.sweep = SweepAxis::SigmaR(vec![0.1, -1.0]);
        assert!(p.validate().is_err());
        let mut p = base_plan();
        p.sweep = SweepAxis::ImuRate(vec![]);
        assert!(p.validate().is_err());
    }
}
