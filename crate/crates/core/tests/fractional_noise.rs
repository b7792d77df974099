mod common;

use common::{cholesky, cholesky_samples, percentile, SampleMoments};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectralflow::dump::{read_binary, write_paths_binary, write_paths_csv, PATH_MAGIC};
use spectralflow::fractional_noise::*;
use spectralflow::pathwise_sde::holder_norm_estimate;

fn h(x: f64) -> HurstParameter {
    HurstParameter::new(x).unwrap()
}

// Covariance of unit-free increments B(t_{i+1}) − B(t_i) on a uniform grid.
fn increment_cov(hp: HurstParameter, dt: f64, i: usize, j: usize) -> f64 {
    let c = |s: f64, t: f64| fbm_covariance(s, t, hp).unwrap();
    let (a0, a1) = (i as f64 * dt, (i + 1) as f64 * dt);
    let (b0, b1) = (j as f64 * dt, (j + 1) as f64 * dt);
    c(a1, b1) - c(a1, b0) - c(a0, b1) + c(a0, b0)
}

#[test]
fn covariance_examples() {
    assert_eq!(fbm_covariance(1.0, 1.0, h(0.7)).unwrap(), 1.0);
    let bm = HurstParameter::new_test_mode(0.5).unwrap();
    assert!((fbm_covariance(1.0, 2.0, bm).unwrap() - 1.0).abs() < 1e-15);
    assert!((fbm_covariance(1.0, 2.0, h(0.75)).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    assert!(fbm_covariance(-0.1, 1.0, h(0.75)).is_err());
}

#[test]
fn hurst_range_is_enforced() {
    for bad in [0.5, 0.3, 1.0, f64::NAN] {
        assert!(HurstParameter::new(bad).is_err(), "{bad}");
    }
    assert!(HurstParameter::new_test_mode(0.5).is_ok());
    assert!(TimeGrid::new(1.0, 0).is_err());
    assert!(TimeGrid::from_nodes(&[0.0, 0.1, 0.3]).is_err());
}

#[test]
fn brownian_increments_are_white() {
    let grid = TimeGrid::new(1.0, 8).unwrap();
    let bm = HurstParameter::new_test_mode(0.5).unwrap();
    let batch = generate_fgn(grid, bm, 100_000, 3).unwrap();
    let m = SampleMoments::of(batch.iter());
    let dt = grid.dt();
    let z = m.max_cov_z(|i, j| if i == j { dt } else { 0.0 });
    assert!(z < 4.0, "max z-score {z}");
}

#[test]
fn fgn_matches_analytic_increment_covariance() {
    let grid = TimeGrid::new(1.0, 8).unwrap();
    let batch = generate_fgn(grid, h(0.75), 100_000, 4).unwrap();
    let m = SampleMoments::of(batch.iter());
    let z = m.max_cov_z(|i, j| increment_cov(h(0.75), grid.dt(), i, j));
    assert!(z < 4.0, "max z-score {z}");
}

#[test]
fn fbm_variance_and_cross_covariance() {
    let grid = TimeGrid::new(2.0, 256).unwrap();
    let batch = generate_fbm(grid, h(0.75), 100_000, 5).unwrap();
    let (k1, k2) = (grid.index_of(1.0).unwrap(), grid.index_of(2.0).unwrap());
    let pairs: Vec<[f64; 2]> = batch.iter().map(|p| [p[k1], p[k2]]).collect();
    let m = SampleMoments::of(pairs.iter().map(|p| &p[..]));
    let truth = |i: usize, j: usize| {
        let t = [1.0, 2.0];
        fbm_covariance(t[i], t[j], h(0.75)).unwrap()
    };
    for (i, j) in [(0, 0), (0, 1)] {
        let err = (m.cov(i, j) - truth(i, j)).abs();
        assert!(err < 4.0 * m.cov_se(truth, i, j), "({i},{j}) err {err}");
    }
}

#[test]
fn paths_start_at_zero_and_are_prefix_sums() {
    let grid = TimeGrid::new(1.5, 32).unwrap();
    let inc = generate_fgn(grid, h(0.6), 20, 9).unwrap();
    let paths = generate_fbm(grid, h(0.6), 20, 9).unwrap();
    assert_eq!(paths.width(), 33);
    assert_eq!(inc.width(), 32);
    for (p, d) in paths.iter().zip(inc.iter()) {
        assert_eq!(p[0], 0.0);
        let mut acc = 0.0;
        for k in 0..32 {
            acc += d[k];
            assert!((p[k + 1] - acc).abs() <= 1e-12 * (1.0 + acc.abs()));
        }
    }
}

// Dense Cholesky sampling from the analytic covariance is the oracle: both
// samplers are exact, so their sample moments differ only by Monte Carlo error.
#[test]
fn circulant_and_recursion_agree_with_cholesky_oracle() {
    for (m_steps, hv) in [(16usize, 0.6), (64, 0.85)] {
        let hp = h(hv);
        let grid = TimeGrid::new(1.0, m_steps).unwrap();
        let truth = |i: usize, j: usize| increment_cov(hp, grid.dt(), i, j);
        let cov: Vec<f64> = (0..m_steps * m_steps)
            .map(|k| truth(k / m_steps, k % m_steps))
            .collect();
        let l = cholesky(&cov, m_steps);
        let count = 20_000;
        let oracle = cholesky_samples(&l, m_steps, count, &mut ChaCha8Rng::seed_from_u64(77));
        let om = SampleMoments::of(oracle.iter().map(|r| &r[..]));
        for method in [SamplerMethod::CirculantOnly, SamplerMethod::Recursion] {
            let opts = SamplerOptions {
                method,
                ..SamplerOptions::default()
            };
            let batch = generate_fgn_with(grid, hp, count, 21, opts).unwrap();
            let bm = SampleMoments::of(batch.iter());
            let mut worst = 0.0f64;
            for i in 0..m_steps {
                let se_mean = (truth(i, i) / count as f64).sqrt();
                worst = worst.max((bm.mean[i] - om.mean[i]).abs() / (2f64.sqrt() * se_mean));
                for j in i..m_steps {
                    let se = 2f64.sqrt() * bm.cov_se(truth, i, j);
                    worst = worst.max((bm.cov(i, j) - om.cov(i, j)).abs() / se);
                }
            }
            // Bonferroni-style allowance over up to 2144 compared statistics.
            assert!(worst < 5.0, "M={m_steps} {method:?}: worst z {worst}");
        }
    }
}

#[test]
fn output_is_independent_of_worker_count() {
    let grid = TimeGrid::new(1.0, 16).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_fbm(grid, h(0.6), 64, 1234).unwrap())
    };
    let (a, b) = (run(1), run(4));
    let bits = |x: &GaussianPathBatch| x.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn recursion_fallback_is_exact_for_small_grids() {
    let grid = TimeGrid::new(1.0, 1).unwrap();
    let batch = generate_fgn(grid, h(0.9), 50_000, 2).unwrap();
    let m = SampleMoments::of(batch.iter());
    let se = m.cov_se(|_, _| 1.0, 0, 0);
    assert!((m.cov(0, 0) - 1.0).abs() < 4.0 * se);
}

#[test]
fn csv_and_binary_dumps() {
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let batch = generate_fbm(grid, h(0.7), 3, 8).unwrap();
    let mut csv = Vec::new();
    write_paths_csv(&mut csv, &batch).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path_id,t,value"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 5);
    assert_eq!(rows[6], format!("1,0.25,{}", batch.path(1)[1]));

    let mut bin = Vec::new();
    write_paths_binary(&mut bin, &batch).unwrap();
    assert_eq!(&bin[0..4], b"FBMP");
    assert_eq!(bin.len(), 32 + 8 * 15);
    let (header, values) = read_binary(&bin[..], PATH_MAGIC).unwrap();
    assert_eq!((header.count, header.nodes, header.version), (3, 5, 1));
    assert_eq!(values, batch.values());
    assert!(read_binary(&bin[..], *b"MATF").is_err());
}

// Finite-moment proxy for Gaussian tails of the Hölder norm: the upper
// percentile of the empirical quotient settles as the grid refines.
#[test]
fn holder_quotient_percentile_is_grid_stable() {
    let hp = h(0.75);
    let beta = 0.75 - 0.05;
    let p99 = |m: usize| {
        let grid = TimeGrid::new(1.0, m).unwrap();
        let batch = generate_fbm(grid, hp, 1000, 31).unwrap();
        let q: Vec<f64> = batch
            .iter()
            .map(|p| holder_norm_estimate(p, grid, beta).unwrap().quotient)
            .collect();
        percentile(&q, 0.99)
    };
    let (a, b) = (p99(512), p99(1024));
    let drift = (b - a).abs() / a;
    assert!(drift < 0.25, "p99 {a} -> {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_symmetric_with_diagonal_power(s in 0.0..5.0f64, t in 0.0..5.0f64, hv in 0.51..0.99f64) {
        let hp = h(hv);
        let a = fbm_covariance(s, t, hp).unwrap();
        prop_assert!((a - fbm_covariance(t, s, hp).unwrap()).abs() <= 1e-14 * (1.0 + a.abs()));
        prop_assert!((fbm_covariance(t, t, hp).unwrap() - t.powf(2.0 * hv)).abs() <= 1e-14 * (1.0 + t));
    }

    #[test]
    fn batches_depend_only_on_inputs(seed in any::<u64>(), m in 1usize..40, hv in 0.51..0.99f64) {
        let grid = TimeGrid::new(1.0, m).unwrap();
        let a = generate_fbm(grid, h(hv), 3, seed).unwrap();
        let b = generate_fbm(grid, h(hv), 3, seed).unwrap();
        prop_assert_eq!(a.values(), b.values());
        prop_assert!(a.values().iter().all(|v| v.is_finite()));
        prop_assert!(a.iter().all(|p| p[0] == 0.0));
    }
}
