//! Hand-rolled argument parsing for the three subcommands.

use std::path::PathBuf;

use manifold_track::filters::FilterKind;

use crate::plan::{ExperimentPlan, SweepAxis};
use crate::CliError;

pub const USAGE: &str = "\
manifold-track: 6-DoF tracking experiments on the SO(3) manifold

USAGE:
    manifold-track simulate --scenario FILE [--trials N] [--seed N] [--out DIR]
    manifold-track run      --scenario FILE [--filters LIST] [--trials N] [--seed N]
                            [--sweep-sigma V1,V2,... | --sweep-imu-rate R1,R2,...]
                            [--out DIR]
    manifold-track plotdata [--out DIR] SUMMARY.CSV...

OPTIONS:
    --scenario FILE        scenario file (see scenarios/*.scn)
    --filters LIST         comma list of EKF,UKF,EKFRie,UKFRie (default: all)
    --trials N             Monte-Carlo trials per sweep point (default: 100)
    --seed N               base seed; trial i uses N+i (default: scenario seed)
    --sweep-sigma LIST     sweep the range-noise sigma (meters)
    --sweep-imu-rate LIST  sweep the IMU rate (Hz)
    --out DIR              output directory (default: out)

The environment variable MANIFOLD_TRACK_THREADS caps worker threads.
Exit codes: 0 success, 1 runtime error, 2 usage error.";

#[derive(Debug, PartialEq)]
pub enum Command {
    Simulate(ExperimentPlan),
    Run(ExperimentPlan),
    PlotData { out: PathBuf, summaries: Vec<PathBuf> },
}

fn parse_filters(list: &str) -> Result<Vec<FilterKind>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            FilterKind::from_name(name)
                .ok_or_else(|| CliError::usage(format!("unknown filter `{name}`")))
        })
        .collect()
}

fn parse_f64_list(flag: &str, list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| CliError::usage(format!("{flag}: `{v}` is not a number")))
        })
        .collect()
}

fn parse_u32_list(flag: &str, list: &str) -> Result<Vec<u32>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| {
            v.parse::<u32>()
                .map_err(|_| CliError::usage(format!("{flag}: `{v}` is not an integer")))
        })
        .collect()
}

pub fn parse_args(args: &[String]) -> Result<Command, CliError> {
    let mut iter = args.iter();
    let sub = iter.next().ok_or_else(|| CliError::usage(USAGE))?;

    let mut scenario: Option<PathBuf> = None;
    let mut filters: Option<Vec<FilterKind>> = None;
    let mut trials: u32 = 100;
    let mut seed: Option<u64> = None;
    let mut sweep_sigma: Option<Vec<f64>> = None;
    let mut sweep_rate: Option<Vec<u32>> = None;
    let mut out = PathBuf::from("out");
    let mut positional: Vec<PathBuf> = Vec::new();

    while let Some(arg) = iter.next() {
        let mut value_for = |flag: &str| -> Result<&String, CliError> {
            iter.next().ok_or_else(|| CliError::usage(format!("{flag} needs a value")))
        };
        match arg.as_str() {
            "--scenario" => scenario = Some(PathBuf::from(value_for("--scenario")?)),
            "--filters" => filters = Some(parse_filters(value_for("--filters")?)?),
            "--trials" => {
                let raw = value_for("--trials")?;
                trials = raw
                    .parse()
                    .map_err(|_| CliError::usage(format!("--trials: `{raw}` is not an integer")))?;
            }
            "--seed" => {
                let raw = value_for("--seed")?;
                seed = Some(
                    raw.parse()
                        .map_err(|_| CliError::usage(format!("--seed: `{raw}` is not an integer")))?,
                );
            }
            "--sweep-sigma" => sweep_sigma = Some(parse_f64_list("--sweep-sigma", value_for("--sweep-sigma")?)?),
            "--sweep-imu-rate" => {
                sweep_rate = Some(parse_u32_list("--sweep-imu-rate", value_for("--sweep-imu-rate")?)?)
            }
            "--out" => out = PathBuf::from(value_for("--out")?),
            "--help" | "-h" => return Err(CliError::usage(USAGE)),
            other if other.starts_with('-') => {
                return Err(CliError::usage(format!("unknown flag `{other}`")))
            }
            other => positional.push(PathBuf::from(other)),
        }
    }

    let sweep = match (sweep_sigma, sweep_rate) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage("--sweep-sigma and --sweep-imu-rate are mutually exclusive"))
        }
        (Some(s), None) => SweepAxis::SigmaR(s),
        (None, Some(r)) => SweepAxis::ImuRate(r),
        (None, None) => SweepAxis::None,
    };

    match sub.as_str() {
        "simulate" | "run" => {
            if !positional.is_empty() {
                return Err(CliError::usage(format!(
                    "unexpected positional argument `{}`",
                    positional[0].display()
                )));
            }
            let plan = ExperimentPlan {
                scenario_path: scenario
                    .ok_or_else(|| CliError::usage("--scenario is required"))?,
                filters: filters.unwrap_or_else(|| FilterKind::ALL.to_vec()),
                sweep,
                trials,
                seed_base: seed,
                out_dir: out,
            };
            plan.validate()?;
            if sub == "simulate" {
                Ok(Command::Simulate(plan))
            } else {
                Ok(Command::Run(plan))
            }
        }
        "plotdata" => {
            if scenario.is_some() || sweep != SweepAxis::None {
                return Err(CliError::usage("plotdata only takes --out and summary paths"));
            }
            Ok(Command::PlotData { out, summaries: positional })
        }
        other => Err(CliError::usage(format!("unknown subcommand `{other}`\n\n{USAGE}"))),
    }
}
