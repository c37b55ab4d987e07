//! The three subcommands: simulate, run, plotdata.

use std::path::{Path, PathBuf};

use manifold_track::metrics::aggregate_trials;
use manifold_track::scenarios::{generate_truth, ScenarioSpec};

use crate::csv_io::{self, SummaryRow};
use crate::plan::{ExperimentPlan, SweepAxis};
use crate::runner;
use crate::{scenario_file, CliError};

/// The sweep points of a plan as `(label value, configured spec)`.
fn sweep_points(spec: &ScenarioSpec, plan: &ExperimentPlan) -> Result<Vec<(f64, ScenarioSpec)>, CliError> {
    let mut points = Vec::new();
    match &plan.sweep {
        SweepAxis::None => points.push((spec.sigma_r, spec.clone())),
        SweepAxis::SigmaR(values) => {
            for v in values {
                let mut s = spec.clone();
                s.sigma_r = *v;
                points.push((*v, s));
            }
        }
        SweepAxis::ImuRate(values) => {
            for v in values {
                let mut s = spec.clone();
                s.imu_rate = *v;
                s.validate()?;
                points.push((*v as f64, s));
            }
        }
    }
    Ok(points)
}

/// Writes ground truth and the raw sensor records of every trial.
pub fn cmd_simulate(plan: &ExperimentPlan) -> Result<(), CliError> {
    plan.validate()?;
    if plan.sweep != SweepAxis::None {
        return Err(CliError::usage("simulate does not take a sweep; use `run`"));
    }
    let spec = scenario_file::load(&plan.scenario_path)?;
    let seed_base = plan.seed_base.unwrap_or(spec.seed);
    let truth = generate_truth(&spec)?;
    // Filters are irrelevant here; simulate the sensor streams only.
    let trials = runner::run_trials(&spec, &[], plan.trials, seed_base)?;

    csv_io::write_file(&plan.out_dir.join("truth.csv"), &csv_io::truth_csv(&truth))?;
    csv_io::write_file(&plan.out_dir.join("imu.csv"), &csv_io::imu_csv(&trials, spec.period()))?;
    csv_io::write_file(
        &plan.out_dir.join("ranges.csv"),
        &csv_io::ranges_csv(&trials, spec.period()),
    )?;
    Ok(())
}

/// Runs the filters over every sweep point and writes estimates, error
/// traces, the per-point summary, and the pooled CDFs.
pub fn cmd_run(plan: &ExperimentPlan) -> Result<(), CliError> {
    plan.validate()?;
    let spec = scenario_file::load(&plan.scenario_path)?;
    let seed_base = plan.seed_base.unwrap_or(spec.seed);
    let sweep_name = plan.sweep.name();

    let mut point_trials = Vec::new();
    for (value, point_spec) in sweep_points(&spec, plan)? {
        let trials = runner::run_trials(&point_spec, &plan.filters, plan.trials, seed_base)?;
        point_trials.push((value, point_spec.period(), trials));
    }

    let estimate_points: Vec<(f64, &[runner::TrialOutput], f64)> = point_trials
        .iter()
        .map(|(v, period, t)| (*v, t.as_slice(), *period))
        .collect();
    csv_io::write_file(
        &plan.out_dir.join("estimates.csv"),
        &csv_io::estimates_csv(sweep_name, &estimate_points),
    )?;
    csv_io::write_file(
        &plan.out_dir.join("errors.csv"),
        &csv_io::errors_csv(sweep_name, &estimate_points),
    )?;

    let mut aggregates = Vec::new();
    for (value, _, trials) in &point_trials {
        let results: Vec<_> = trials
            .iter()
            .flat_map(|t| t.runs.iter().map(|(_, _, r)| r.clone()))
            .collect();
        aggregates.push((*value, aggregate_trials(&results)?));
    }
    csv_io::write_file(
        &plan.out_dir.join("summary.csv"),
        &csv_io::summary_csv(sweep_name, &aggregates),
    )?;
    csv_io::write_file(&plan.out_dir.join("cdf.csv"), &csv_io::cdf_csv(sweep_name, &aggregates))?;
    Ok(())
}

/// X coordinate of a summary row in plot space: `20*log10(1/sigma)` dB for
/// range-noise sweeps, the rate itself for IMU-rate sweeps.
fn plot_x(row: &SummaryRow) -> f64 {
    match row.sweep.as_str() {
        "imu_rate" => row.sweep_value,
        _ => 20.0 * (1.0 / row.sweep_value).log10(),
    }
}

/// Converts summary files into one long-format table (series, x, y) sorted
/// by series then x.
pub fn cmd_plotdata(out_dir: &Path, summaries: &[PathBuf]) -> Result<(), CliError> {
    if summaries.is_empty() {
        return Err(CliError::usage("plotdata needs at least one summary.csv path"));
    }
    let mut rows = Vec::new();
    for path in summaries {
        rows.extend(csv_io::read_summary(path)?);
    }
    let mut plot: Vec<(String, f64, f64)> =
        rows.iter().map(|r| (r.filter.clone(), plot_x(r), r.rmse_pos_mean)).collect();
    plot.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));
    let mut out = String::from(csv_io::PLOTDATA_HEADER);
    out.push('\n');
    for (series, x, y) in plot {
        out.push_str(&format!("{series},{x},{y}\n"));
    }
    csv_io::write_file(&out_dir.join("plotdata.csv"), &out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use manifold_track::filters::FilterKind;
    use manifold_track::scenarios::PathKind;

    fn write_scenario(dir: &Path, kind: PathKind) -> PathBuf {
        let spec = ScenarioSpec::builtin(kind).unwrap();
        let path = dir.join("scenario.scn");
        std::fs::write(&path, scenario_file::serialize(&spec)).unwrap();
        path
    }

    #[test]
    fn simulate_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = write_scenario(dir.path(), PathKind::Static);
        let plan = ExperimentPlan {
            scenario_path: scenario,
            filters: vec![FilterKind::Ekf],
            sweep: SweepAxis::None,
            trials: 2,
            seed_base: Some(5),
            out_dir: dir.path().join("out"),
        };
        cmd_simulate(&plan).unwrap();
        let truth = std::fs::read_to_string(dir.path().join("out/truth.csv")).unwrap();
        assert!(truth.starts_with(csv_io::TRUTH_HEADER));
        // Static scenario: 101 samples + header.
        assert_eq!(truth.lines().count(), 102);
        let imu = std::fs::read_to_string(dir.path().join("out/imu.csv")).unwrap();
        assert!(imu.starts_with(csv_io::IMU_HEADER));
        assert_eq!(imu.lines().count(), 1 + 2 * 100);
        let ranges = std::fs::read_to_string(dir.path().join("out/ranges.csv")).unwrap();
        assert!(ranges.starts_with(csv_io::RANGES_HEADER));
        // 10 gated steps, 8 beacons, 3 transmitters, 2 trials.
        assert_eq!(ranges.lines().count(), 1 + 2 * 10 * 8 * 3);
    }

    #[test]
    fn run_writes_summary_and_cdf() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = write_scenario(dir.path(), PathKind::Static);
        let plan = ExperimentPlan {
            scenario_path: scenario,
            filters: vec![FilterKind::Ekf, FilterKind::EkfRie],
            sweep: SweepAxis::SigmaR(vec![1.0, 0.1]),
            trials: 2,
            seed_base: Some(3),
            out_dir: dir.path().join("out"),
        };
        cmd_run(&plan).unwrap();
        let rows = csv_io::read_summary(&dir.path().join("out/summary.csv")).unwrap();
        // 2 sweep points x 2 filters.
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.sweep == "sigma_r" && r.trials == 2));
        let cdf = std::fs::read_to_string(dir.path().join("out/cdf.csv")).unwrap();
        assert!(cdf.starts_with(csv_io::CDF_HEADER));
        assert_eq!(cdf.lines().count(), 1 + 2 * 2 * 101);
        let errors = std::fs::read_to_string(dir.path().join("out/errors.csv")).unwrap();
        assert!(errors.starts_with(csv_io::ERRORS_HEADER));
        assert_eq!(errors.lines().count(), 1 + 2 * 2 * 2 * 100);
        let estimates = std::fs::read_to_string(dir.path().join("out/estimates.csv")).unwrap();
        assert!(estimates.starts_with(csv_io::ESTIMATES_HEADER));
        // Trial 0 only: per sweep point and filter, 101 state rows.
        assert_eq!(estimates.lines().count(), 1 + 2 * 2 * 101);
    }

    #[test]
    fn plotdata_converts_sigma_to_db_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = write_scenario(dir.path(), PathKind::Static);
        let out = dir.path().join("out");
        let plan = ExperimentPlan {
            scenario_path: scenario,
            filters: vec![FilterKind::Ekf, FilterKind::Ukf],
            sweep: SweepAxis::SigmaR(vec![1.0, 0.1]),
            trials: 1,
            seed_base: Some(3),
            out_dir: out.clone(),
        };
        cmd_run(&plan).unwrap();
        cmd_plotdata(&out, &[out.join("summary.csv")]).unwrap();
        let text = std::fs::read_to_string(out.join("plotdata.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "series,x,y");
        // Sorted by series then x: EKF rows first, 0 dB before 20 dB.
        assert!(lines[1].starts_with("EKF,0,"));
        assert!(lines[2].starts_with("EKF,20,"));
        assert!(lines[3].starts_with("UKF,0,"));
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn run_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = write_scenario(dir.path(), PathKind::Static);
        let mk_plan = |out: PathBuf| ExperimentPlan {
            scenario_path: scenario.clone(),
            filters: vec![FilterKind::Ekf],
            sweep: SweepAxis::None,
            trials: 3,
            seed_base: Some(11),
            out_dir: out,
        };
        cmd_run(&mk_plan(dir.path().join("a"))).unwrap();
        cmd_run(&mk_plan(dir.path().join("b"))).unwrap();
        for file in ["summary.csv", "cdf.csv", "errors.csv", "estimates.csv"] {
            let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
    }
}
