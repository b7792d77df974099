mod common;

use common::{charpoly_roots, random_sym};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectralflow::ensembles::*;
use spectralflow::fractional_noise::{HurstParameter, TimeGrid};
use spectralflow::laws::{law_sampler, SpectralLaw};
use spectralflow::matrix::{FrameMatrix, HermMatrix, SymMatrix};
use spectralflow::quadrature::integrate;
use spectralflow::spectra::*;

fn h75() -> HurstParameter {
    HurstParameter::new(0.75).unwrap()
}

fn frame(t: f64, m: SymMatrix) -> MatrixProcessFrame {
    MatrixProcessFrame { t, data: FrameMatrix::Real(m) }
}

fn spectrum(v: Vec<f64>) -> SpectrumFrame {
    SpectrumFrame::new(0.0, v).unwrap()
}

fn sc(d: f64) -> SpectralLaw {
    SpectralLaw::semicircle(d).unwrap()
}

#[test]
fn eigenvalue_examples() {
    let swap = SymMatrix::from_upper(2, |i, j| if i == j { 0.0 } else { 1.0 });
    let ev = eigenvalues_real(&swap, EigenOptions::verified()).unwrap();
    assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
    let diag = SymMatrix::from_upper(3, |i, j| if i == j { [3.0, 1.0, 2.0][i] } else { 0.0 });
    assert_eq!(eigenvalues_real(&diag, EigenOptions::verified()).unwrap(), vec![1.0, 2.0, 3.0]);
}

#[test]
fn asymmetric_input_is_a_shape_error() {
    let err = SymMatrix::from_row_major(2, vec![1.0, 2.0, 2.5, 1.0], 1e-12).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("shape"));
}

#[test]
fn verified_solves_on_random_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [1usize, 2, 7, 40, 130] {
        let m = random_sym(n, &mut rng);
        let ev = eigenvalues_real(&m, EigenOptions::verified()).unwrap();
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        let hm = HermMatrix::from_upper(n, |i, j| {
            Complex64::new(rng.random_range(-1.0..1.0), if i == j { 0.0 } else { rng.random_range(-1.0..1.0) })
        });
        let evc = eigenvalues_complex(&hm, EigenOptions::verified()).unwrap();
        assert_eq!(evc.len(), n);
    }
}

#[test]
fn identities_hold_on_every_variant() {
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let index = vec![
        IndexTerm { offset: (0, 0), weight: 1.0 },
        IndexTerm { offset: (1, -1), weight: 0.5 },
    ];
    for v in [Variant::WignerReal, Variant::WignerComplex, Variant::Dependent, Variant::WishartReal, Variant::WishartComplex] {
        let spec = EnsembleSpec::new(v, 48, grid, h75(), 2).with_p(24).with_index_set(index.clone());
        for f in build_frames(&spec, &[1, 2, 3, 4]).unwrap() {
            let sp = eigenvalues_sym(&f, EigenOptions::verified()).unwrap();
            assert_eq!(sp.len(), f.dim());
            let (tr, fro) = spectral_identity_errors(&f, &sp);
            assert!(tr <= 1e-10 && fro <= 1e-10, "{v:?}: {tr} {fro}");
        }
    }
}

#[test]
fn ks_examples() {
    let law = sc(1.0);
    assert_eq!(ks_distance(&spectrum(vec![0.0]), &law), 0.5);
    let n = 10_000;
    let quantiles: Vec<f64> = (0..n).map(|i| law.quantile((i as f64 + 0.5) / n as f64)).collect();
    let own = spectrum(quantiles);
    assert!(ks_distance(&own, &law) <= 0.5 / n as f64 + 1e-9);
    assert!(wasserstein1(&own, &law) <= 0.01);

    // Dvoretzky–Kiefer–Wolfowitz at level 0.01.
    let dkw = ((2.0f64 / 0.01).ln() / (2.0 * n as f64)).sqrt();
    assert!(dkw < 0.02);
    for (seed, law) in [(1u64, sc(1.0)), (2, SpectralLaw::marchenko_pastur(2.0, 1.0).unwrap())] {
        let draws = spectrum(law_sampler(&law, n, seed));
        let ks = ks_distance(&draws, &law);
        assert!(ks <= dkw, "{}: {ks}", law.id());
    }
}

#[test]
fn ks_sees_the_atom() {
    let mp = SpectralLaw::marchenko_pastur(2.0, 1.0).unwrap();
    // All mass strictly above the atom misses it entirely.
    let (a, b) = mp.support();
    let bulk: Vec<f64> = (0..1000).map(|i| a + (b - a) * (i as f64 + 0.5) / 1000.0).collect();
    assert!(ks_distance(&spectrum(bulk), &mp) >= 0.5 - 1e-12);
    // Exactly half of the points at the atom and half on bulk quantiles.
    let mut mixed = vec![0.0; 1000];
    mixed.extend((0..1000).map(|i| mp.quantile(0.5 + 0.5 * (i as f64 + 0.5) / 1000.0)));
    assert!(ks_distance(&spectrum(mixed), &mp) < 1e-3);
}

#[test]
fn wasserstein_examples() {
    // W1 between a point mass at a and a semicircle of scale d is a + O(d).
    let a = 1.7;
    let tiny = sc(1e-12);
    assert!((wasserstein1(&spectrum(vec![a]), &tiny) - a).abs() < 1e-9);
    let c_sc = integrate(|x| x.abs() * sc(1.0).density(x), -2.0, 2.0, 1e-12).unwrap();
    assert!((c_sc - 8.0 / (3.0 * std::f64::consts::PI)).abs() < 1e-9);
    for (d, e) in [(1.0, 1.5), (0.3, 2.0), (2.0, 1.0)] {
        let w = wasserstein1_laws(&sc(d), &sc(e));
        assert!((w - (d - e).abs() * c_sc).abs() < 1e-3 * (d - e).abs(), "{d} {e}: {w}");
    }
}

#[test]
fn metrics_are_bounded_and_vanish_only_on_agreement() {
    let law = sc(1.0);
    let far = spectrum(vec![10.0, 11.0]);
    assert_eq!(ks_distance(&far, &law), 1.0);
    assert!(wasserstein1(&far, &law) > 9.0);
    let a = spectrum(vec![0.0, 1.0, 2.0]);
    assert_eq!(ks_two_sample(&a, &a), 0.0);
    assert!((ks_two_sample(&a, &spectrum(vec![0.0, 1.0, 5.0])) - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn metric_csv_schema() {
    let mut report = MetricReport::default();
    report.push_frame(&spectrum(vec![-0.5, 0.5]), &sc(1.0), "sc:1", "abc");
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,metric,value,law,ensemble_hash"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("0,ks,") && rows[0].ends_with(",sc:1,abc"));
    assert!(rows[1].starts_with("0,w1,"));
}

#[test]
fn hoffman_wielandt_examples() {
    let a = FrameMatrix::Real(SymMatrix::from_upper(2, |i, j| if i == j { i as f64 } else { 0.0 }));
    let b = FrameMatrix::Real(SymMatrix::from_upper(2, |i, j| if i == j { 1.0 - i as f64 } else { 0.0 }));
    let same = hoffman_wielandt_check(&a, &a).unwrap();
    assert_eq!((same.lhs, same.rhs, same.ok), (0.0, 0.0, true));
    let hw = hoffman_wielandt_check(&a, &b).unwrap();
    assert_eq!((hw.lhs, hw.rhs, hw.ok), (0.0, 2.0, true));
}

#[test]
fn flow_modulus_trivial_cases() {
    let mut series = ESDSeries::new("x");
    for k in 0..5 {
        series.push(SpectrumFrame::new(k as f64 * 0.25, vec![-1.0, 0.3, 2.0]).unwrap()).unwrap();
    }
    assert_eq!(measure_flow_modulus(&series, &TestFunction::phi(), 0.5), 0.0);
    let mut moving = ESDSeries::new("y");
    for k in 0..5 {
        moving.push(SpectrumFrame::new(k as f64, vec![k as f64, 2.0 * k as f64]).unwrap()).unwrap();
    }
    let zero = TestFunction::arctan().scaled(0.0);
    assert_eq!(measure_flow_modulus(&moving, &zero, 4.0), 0.0);
    assert!(measure_flow_modulus(&moving, &TestFunction::arctan(), 1.0) > 0.0);
}

#[test]
fn flow_modulus_scales_like_a_holder_bound() {
    let m = 64;
    let grid = TimeGrid::new(1.0, m).unwrap();
    let spec = EnsembleSpec::new(Variant::WignerReal, 128, grid, h75(), 5);
    let nodes: Vec<usize> = (0..=m).collect();
    let mut series = ESDSeries::new(spec.spec_hash());
    for f in build_wigner_frames(&spec, &nodes).unwrap() {
        series.push(eigenvalues_sym(&f, EigenOptions::default()).unwrap()).unwrap();
    }
    let beta = 0.75 - 0.05;
    let ratios: Vec<f64> = [8usize, 16, 32, 64]
        .iter()
        .map(|&k| {
            let delta = 1.0 / k as f64;
            measure_flow_modulus(&series, &TestFunction::phi(), delta) / delta.powf(beta)
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    assert!(hi / lo < 2.0, "{ratios:?}");
}

#[test]
fn lipschitz_flow_bound_holds_per_realization() {
    let m = 16;
    let grid = TimeGrid::new(1.0, m).unwrap();
    let nodes: Vec<usize> = (0..=m).collect();
    for v in [Variant::WignerReal, Variant::WignerComplex] {
        let spec = EnsembleSpec::new(v, 32, grid, h75(), 4);
        let frames = build_frames(&spec, &nodes).unwrap();
        let spectra: Vec<SpectrumFrame> = frames
            .iter()
            .map(|f| eigenvalues_sym(f, EigenOptions::default()).unwrap())
            .collect();
        for f in [TestFunction::arctan(), TestFunction::ratio(), TestFunction::phi(), TestFunction::sin().scaled(3.0)] {
            for a in 0..frames.len() {
                for b in a + 1..frames.len() {
                    let r = lipschitz_flow_check(&frames[a], &spectra[a], &frames[b], &spectra[b], &f).unwrap();
                    assert!(r.ok, "{v:?} {f:?} ({a},{b}): {} > {}", r.lhs, r.rhs);
                }
            }
        }
    }
}

#[test]
fn moment_probe_examples() {
    let grid = TimeGrid::new(1.0, 16).unwrap();
    let spec = EnsembleSpec::new(Variant::WishartReal, 32, grid, h75(), 12).with_p(16);
    let f = TestFunction::arctan();
    let est = modulus_moment_probe(&spec, &f, &[(0.5, 0.5), (0.5, 1.0)], 50).unwrap();
    assert_eq!(est[0].value, 0.0);
    assert!(est[1].value > 0.0);
    let doubled = modulus_moment_probe(&spec, &f.scaled(2.0), &[(0.5, 1.0)], 50).unwrap();
    assert!((doubled[0].value - 4.0 * est[1].value).abs() <= 1e-12 * est[1].value);
    assert!(modulus_moment_probe(&spec, &f, &[(0.3, 1.0)], 50).is_err());
}

// Fit the constant at the widest separation, then require the bound at every
// finer one.
#[test]
fn moment_probe_fit_then_verify() {
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let spec = EnsembleSpec::new(Variant::WishartReal, 64, grid, h75(), 21).with_p(32);
    let seps = [0.25, 0.125, 0.0625, 0.03125];
    let pairs: Vec<(f64, f64)> = seps.iter().map(|d| (1.0 - d, 1.0)).collect();
    let est = modulus_moment_probe(&spec, &TestFunction::arctan(), &pairs, 200).unwrap();
    let alpha = 2.0 * 0.75 - 2.0 * 0.05;
    let c_hat = est[0].value / seps[0].powf(alpha);
    for (e, d) in est.iter().zip(seps).skip(1) {
        assert!(e.value <= c_hat * d.powf(alpha), "{d}: {} > {}", e.value, c_hat * d.powf(alpha));
    }
}

#[test]
fn spectra_are_independent_of_worker_count() {
    let spec = EnsembleSpec::new(Variant::WignerReal, 96, TimeGrid::new(1.0, 4).unwrap(), h75(), 8);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                build_frames(&spec, &[2, 4])
                    .unwrap()
                    .iter()
                    .map(|f| eigenvalues_sym(f, EigenOptions::default()).unwrap())
                    .collect::<Vec<_>>()
            })
    };
    assert_eq!(run(1), run(5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigensolver_matches_characteristic_polynomial(seed in any::<u64>(), n in 1usize..=6) {
        let m = random_sym(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let ev = eigenvalues_real(&m, EigenOptions::verified()).unwrap();
        let oracle = charpoly_roots(&m);
        for (a, b) in ev.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-10, "{ev:?} vs {oracle:?}");
        }
    }

    #[test]
    fn hermitian_solver_matches_embedding_oracle(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hm = HermMatrix::from_upper(n, |i, j| {
            Complex64::new(rng.random_range(-1.0..1.0), if i == j { 0.0 } else { rng.random_range(-1.0..1.0) })
        });
        let ev = eigenvalues_complex(&hm, EigenOptions::verified()).unwrap();
        // The real embedding has every eigenvalue twice.
        let oracle = charpoly_roots(&hm.real_embedding());
        for (k, a) in ev.iter().enumerate() {
            prop_assert!((a - oracle[2 * k]).abs() <= 1e-10 && (a - oracle[2 * k + 1]).abs() <= 1e-10);
        }
    }

    #[test]
    fn permutation_leaves_spectrum_unchanged(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_sym(n, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let a = eigenvalues_sym(&frame(0.0, m.clone()), EigenOptions::default()).unwrap();
        let b = eigenvalues_sym(&frame(0.0, m.permuted(&perm)), EigenOptions::default()).unwrap();
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn ks_and_w1_are_nonnegative_and_bounded(values in prop::collection::vec(-5.0..5.0f64, 1..50), d in 0.1..3.0f64) {
        let s = spectrum(values);
        let ks = ks_distance(&s, &sc(d));
        prop_assert!((0.0..=1.0).contains(&ks));
        prop_assert!(wasserstein1(&s, &sc(d)) >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hoffman_wielandt_on_random_pairs(seed in any::<u64>(), n in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = FrameMatrix::Real(random_sym(n, &mut rng));
        let b = FrameMatrix::Real(random_sym(n, &mut rng));
        let hw = hoffman_wielandt_check(&a, &b).unwrap();
        prop_assert!(hw.ok, "{} > {}", hw.lhs, hw.rhs);
    }
}
