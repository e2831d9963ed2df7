use std::f64::consts::PI;

use qtomo_core::metrics::{bures, lowest_eigenvalues};
use qtomo_core::mle::MleConfig;
use qtomo_core::reconstruct::{analytic_1q, pinv_reconstruct};
use qtomo_core::{DensityMatrix, Ensemble, Error, SamplingMethod};
use qtomo_eval::errormap::{error_maps_from_csv, error_maps_to_csv};
use qtomo_eval::report::{sweeps_from_csv, sweeps_to_csv};
use qtomo_eval::svg::sweep_chart;
use qtomo_eval::{bures_sweep, error_map, psd_stats, reconstruct_sweep, Method, SweepSpec};
use qtomo_learn::models::StateTable;

fn table(n: usize, count: usize, seed: u64) -> StateTable {
    StateTable::new(&Ensemble::default_for(n).generate(n, count, seed).unwrap()).unwrap()
}

fn ginibre_1q(count: usize, seed: u64) -> Vec<DensityMatrix> {
    Ensemble::single(SamplingMethod::GinibreMixed)
        .generate(1, count, seed)
        .unwrap()
}

#[test]
fn pinv_complete_data_is_exact() {
    for n in 1..=2 {
        let size = 1 << (2 * n);
        let mut spec = SweepSpec::new(vec![size], 3);
        spec.collections = 1;
        let r = bures_sweep(&table(n, 200, 5), &Method::Pseudoinverse, &spec).unwrap();
        assert!(
            r.rows[0].mean_bures < 1e-6,
            "n={n}: {}",
            r.rows[0].mean_bures
        );
    }
}

#[test]
fn pinv_trend_is_non_increasing() {
    let mut spec = SweepSpec::new((1..=4).collect(), 11);
    spec.collections = 20;
    let r = bures_sweep(&table(1, 2000, 2), &Method::Pseudoinverse, &spec).unwrap();
    for w in r.rows.windows(2) {
        let sigma = (w[0].std_bures.powi(2) / w[0].n_samples as f64
            + w[1].std_bures.powi(2) / w[1].n_samples as f64)
            .sqrt();
        assert!(
            w[1].mean_bures <= w[0].mean_bures + 2.0 * sigma,
            "{:?}",
            r.rows
        );
    }
}

#[test]
fn zero_measurements_give_maximally_mixed_baseline() {
    let test = table(2, 300, 9);
    let r = bures_sweep(&test, &Method::Pseudoinverse, &SweepSpec::new(vec![0], 1)).unwrap();
    let mixed = DensityMatrix::maximally_mixed(2);
    let direct: f64 = test
        .states
        .iter()
        .map(|s| bures(&qtomo_core::states::validate(s.clone()).unwrap(), &mixed).unwrap())
        .sum::<f64>()
        / test.len() as f64;
    assert!((r.rows[0].mean_bures - direct).abs() < 1e-12);
}

// Hilbert-Schmidt qubit states fill the Bloch ball uniformly, so
// |ρ₀₁| = r sinθ / 2 has mean (3/4)(π/4)/2 = 3π/32.
#[test]
fn pinv_error_map_for_pair_12() {
    let test = ginibre_1q(20_000, 4);
    let map = error_map(&test, &[1, 2], |rec| pinv_reconstruct(rec, 1)).unwrap();
    assert!(map.get(0, 0) < 1e-12 && map.get(1, 1) < 1e-12);
    let oracle = 3.0 * PI / 32.0;
    for (a, b) in [(0, 1), (1, 0)] {
        assert!(
            (map.get(a, b) - oracle).abs() < 0.005,
            "{} vs {oracle}",
            map.get(a, b)
        );
    }
}

#[test]
fn analytic_pair_34_recovers_coherence_only() {
    let test = ginibre_1q(2000, 8);
    let map = error_map(&test, &[3, 4], |rec| {
        analytic_1q((3, 4), [rec.outcomes[0], rec.outcomes[1]])
    })
    .unwrap();
    assert!(map.get(0, 1) < 1e-12 && map.get(1, 0) < 1e-12);
    assert!(map.get(0, 0) > 0.05 && map.get(1, 1) > 0.05);
}

#[test]
fn exact_reconstruction_has_zero_error_map() {
    let test = ginibre_1q(50, 1);
    let map = error_map(&test, &[1, 2, 3, 4], |rec| pinv_reconstruct(rec, 1)).unwrap();
    assert!(map.values.iter().all(|&v| v < 1e-12));
}

#[test]
fn error_map_csv_round_trip() {
    let test = ginibre_1q(100, 3);
    let maps: Vec<_> = [[1, 2], [2, 4]]
        .iter()
        .map(|p| error_map(&test, p, |rec| pinv_reconstruct(rec, 1)).unwrap())
        .collect();
    assert_eq!(
        error_maps_from_csv(&error_maps_to_csv(&maps)).unwrap(),
        maps
    );
}

#[test]
fn mle_outputs_are_psd_and_pinv_is_not() {
    let test = table(2, 40, 6);
    let mut spec = SweepSpec::new(vec![2, 4, 8], 2);
    spec.collections = 10;
    let cfg = MleConfig {
        max_iters: 300,
        ..Default::default()
    };
    for (_, recs) in reconstruct_sweep(&test, &Method::Mle(cfg), &spec).unwrap() {
        for r in &recs {
            assert!(lowest_eigenvalues(r).unwrap().0 >= -1e-9);
        }
    }
    let pinv = reconstruct_sweep(&test, &Method::Pseudoinverse, &spec).unwrap();
    let stats = psd_stats(&pinv[1].1).unwrap();
    assert!(stats.lowest_mean < 0.0, "{stats:?}");
}

#[test]
fn psd_stats_of_exact_reconstructions_match_truth() {
    let test = table(2, 30, 12);
    let spec = SweepSpec::new(vec![16], 0);
    let recs = reconstruct_sweep(&test, &Method::Pseudoinverse, &spec).unwrap();
    for (r, s) in recs[0].1.iter().zip(&test.states) {
        let (a, b) = (
            lowest_eigenvalues(r).unwrap(),
            lowest_eigenvalues(s).unwrap(),
        );
        assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10);
    }
}

#[test]
fn sweeps_are_independent_of_worker_count() {
    let test = table(2, 90, 21);
    let mut spec = SweepSpec::new(vec![0, 3, 7], 5);
    spec.collections = 7;
    let one = bures_sweep(&test, &Method::Pseudoinverse, &spec).unwrap();
    spec.jobs = 4;
    let four = bures_sweep(&test, &Method::Pseudoinverse, &spec).unwrap();
    assert_eq!(one, four);
    assert_eq!(sweeps_to_csv(&[one], &[]), sweeps_to_csv(&[four], &[]));
}

#[test]
fn unsupported_combinations() {
    let test = table(2, 4, 0);
    let err = bures_sweep(&test, &Method::Analytic1q, &SweepSpec::new(vec![2], 0)).unwrap_err();
    assert!(matches!(err, Error::UnsupportedCombination(_)));
    let err = bures_sweep(
        &test,
        &Method::Corrector(vec![]),
        &SweepSpec::new(vec![2], 0),
    )
    .unwrap_err();
    assert!(matches!(err, Error::UnsupportedCombination(_)));
    let err = bures_sweep(&test, &Method::Pseudoinverse, &SweepSpec::new(vec![17], 0)).unwrap_err();
    assert!(matches!(err, Error::UnsupportedCombination(_)));
    let one = table(1, 10, 0);
    assert!(bures_sweep(&one, &Method::Analytic1q, &SweepSpec::new(vec![2], 0)).is_ok());
}

#[test]
fn report_round_trip_and_chart() {
    let test = table(1, 100, 1);
    let mut spec = SweepSpec::new(vec![1, 2, 3, 4], 9);
    spec.collections = 5;
    let a = bures_sweep(&test, &Method::Pseudoinverse, &spec).unwrap();
    let b = bures_sweep(&test, &Method::Mle(MleConfig::default()), &spec).unwrap();
    let meta = vec![("seed".to_string(), "9".to_string())];
    let csv = sweeps_to_csv(&[a.clone(), b.clone()], &meta);
    assert!(csv.starts_with("# seed=9\n"));
    assert_eq!(sweeps_from_csv(&csv).unwrap(), vec![a.clone(), b.clone()]);
    let svg = sweep_chart(&[a, b], "1 qubit");
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">pinv<") && svg.contains(">mle<"));
}
