//! End-to-end smoke test of the public API: simulate a scenario, run all
//! four filters on the shared realization, and sanity-check the metrics.

use manifold_track::filters::{run_filter, FilterKind};
use manifold_track::metrics::{aggregate_trials, RunResult};
use manifold_track::scenarios::{simulate_scenario, PathKind, ScenarioSpec};
use manifold_track::so3;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

#[test]
fn full_pipeline_on_the_u_path() {
    let spec = ScenarioSpec::builtin(PathKind::UPath).unwrap();
    let cfg = spec.filter_config().unwrap();
    let mut results = Vec::new();
    for seed in 0..3u64 {
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let sim = simulate_scenario(&spec, &mut rng).unwrap();
        assert_eq!(sim.truth.len(), 101);
        assert_eq!(sim.stream.imu.len(), 100);
        assert_eq!(sim.stream.measurements.iter().filter(|m| m.is_some()).count(), 10);

        let truth_pos: Vec<_> = sim.truth.iter().map(|s| s.position).collect();
        let truth_rot: Vec<_> = sim.truth.iter().map(|s| *s.rotation.matrix()).collect();
        for kind in FilterKind::ALL {
            let states = run_filter(kind, &sim.stream, &cfg).unwrap();
            assert_eq!(states.len(), 101);
            assert_eq!(states.last().unwrap().measurement_updates, 10);
            if kind.is_riemannian() {
                for st in &states {
                    assert!(so3::check_on_manifold(&st.x.rotation_block(), 1e-6));
                }
            }
            let est_pos: Vec<_> = states.iter().map(|s| s.x.position()).collect();
            let est_rot: Vec<_> = states.iter().map(|s| s.x.rotation_block()).collect();
            results.push(
                RunResult::from_run(spec.id(), kind, seed, &est_pos, &est_rot, &truth_pos, &truth_rot)
                    .unwrap(),
            );
        }
    }
    let agg = aggregate_trials(&results).unwrap();
    assert_eq!(agg.filters.len(), 4);
    for f in &agg.filters {
        assert_eq!(f.trials, 3);
        assert!(f.rmse_pos_mean > 0.0 && f.rmse_pos_mean < 25.0, "{:?}", f.filter);
        assert_eq!(f.cdf_fractions.len(), agg.cdf_grid.len());
        assert_eq!(*f.cdf_fractions.last().unwrap(), 1.0);
    }
}
