mod common;

use std::f64::consts::SQRT_2;

use common::SampleMoments;
use num_complex::Complex64;
use proptest::prelude::*;
use spectralflow::dump::{read_binary, FRAME_MAGIC};
use spectralflow::ensembles::*;
use spectralflow::fractional_noise::{FgnSampler, HurstParameter, SamplerOptions, TimeGrid};
use spectralflow::matrix::FrameMatrix;
use spectralflow::pathwise_sde::{CoefficientSet, InitialLaw, InitialLaw2D, Preset};
use spectralflow::rng::{domain, pair_index, substream};
use spectralflow::spectra::{eigenvalues_frame, eigenvalues_sym, ks_two_sample, EigenOptions};
use spectralflow::stieltjes::DependentKernel;

fn h75() -> HurstParameter {
    HurstParameter::new(0.75).unwrap()
}

fn grid(t_end: f64, m: usize) -> TimeGrid {
    TimeGrid::new(t_end, m).unwrap()
}

fn real(f: &MatrixProcessFrame) -> &spectralflow::matrix::SymMatrix {
    match &f.data {
        FrameMatrix::Real(m) => m,
        FrameMatrix::Complex(_) => panic!("expected a real frame"),
    }
}

fn two_site() -> Vec<IndexTerm> {
    vec![
        IndexTerm { offset: (0, 0), weight: 1.0 },
        IndexTerm { offset: (0, 1), weight: 1.0 },
    ]
}

// The entry process for key (0, 0), regenerated from its documented substream.
fn entry_path(g: TimeGrid, dom: u64, seed: u64) -> Vec<f64> {
    let sampler = FgnSampler::new(g, h75(), SamplerOptions::default()).unwrap();
    sampler.sample_path(&mut substream(seed, dom, pair_index(0, 0)))
}

#[test]
fn single_entry_wigner_and_wishart() {
    let g = grid(1.0, 8);
    let nodes: Vec<usize> = (0..=8).collect();
    let x = entry_path(g, domain::ENTRY_REAL, 5);
    let spec = EnsembleSpec::new(Variant::WignerReal, 1, g, h75(), 5);
    for (f, xv) in build_wigner_frames(&spec, &nodes).unwrap().iter().zip(&x) {
        assert_eq!(real(f).get(0, 0), SQRT_2 * xv);
    }
    let x = entry_path(g, domain::WISHART, 5);
    let spec = EnsembleSpec::new(Variant::WishartReal, 1, g, h75(), 5).with_p(1);
    for (f, xv) in build_wishart_frames(&spec, &nodes).unwrap().iter().zip(&x) {
        assert!((real(f).get(0, 0) - xv * xv).abs() <= 1e-15 * (1.0 + xv * xv));
    }
}

#[test]
fn single_entry_complex_variants() {
    let g = grid(1.0, 4);
    let spec = EnsembleSpec::new(Variant::WignerComplex, 1, g, h75(), 2);
    let x = entry_path(g, domain::ENTRY_DIAG, 2);
    for (f, xv) in build_wigner_complex_frames(&spec, &[1, 4]).unwrap().iter().zip([x[1], x[4]]) {
        let FrameMatrix::Complex(m) = &f.data else { panic!() };
        assert_eq!(m.get(0, 0), Complex64::new(xv, 0.0));
    }
    let spec = EnsembleSpec::new(Variant::WishartComplex, 1, g, h75(), 2).with_p(1);
    let sampler = FgnSampler::new(g, h75(), SamplerOptions::default()).unwrap();
    let mut rng = substream(2, domain::WISHART_COMPLEX, pair_index(0, 0));
    let d1 = sampler.sample_path(&mut rng);
    let d2 = sampler.sample_path(&mut rng);
    let frames = build_wishart_complex_frames(&spec, &[4]).unwrap();
    let FrameMatrix::Complex(m) = &frames[0].data else { panic!() };
    let expect = d1[4] * d1[4] + d2[4] * d2[4];
    assert!((m.get(0, 0).re - expect).abs() < 1e-14 * (1.0 + expect));
}

#[test]
fn constant_two_by_two_wigner() {
    let spec = EnsembleSpec::new(Variant::WignerReal, 2, grid(1.0, 4), h75(), 1)
        .with_coefficients(CoefficientSet::constant(0.0, 0.0))
        .with_x0(InitialLaw::Fixed(1.0));
    let f = &build_wigner_frames(&spec, &[0, 4]).unwrap()[1];
    let m = real(f);
    assert!((m.get(0, 0) - 1.0).abs() < 1e-15 && (m.get(1, 1) - 1.0).abs() < 1e-15);
    assert!((m.get(0, 1) - 1.0 / SQRT_2).abs() < 1e-15);
}

#[test]
fn dependent_constant_entries() {
    let spec = EnsembleSpec::new(Variant::Dependent, 2, grid(1.0, 2), h75(), 1)
        .with_coefficients(CoefficientSet::constant(0.0, 0.0))
        .with_x0(InitialLaw::Fixed(1.0))
        .with_index_set(two_site());
    let m = build_dependent_frames(&spec, &[2]).unwrap().remove(0);
    for i in 0..2 {
        for j in 0..2 {
            assert!((real(&m).get(i, j) - SQRT_2).abs() < 1e-15);
        }
    }
    // A single site carries no √2 boost on the diagonal.
    let single = EnsembleSpec::new(Variant::Dependent, 3, grid(1.0, 2), h75(), 1)
        .with_coefficients(CoefficientSet::constant(0.0, 0.0))
        .with_x0(InitialLaw::Fixed(1.0));
    let m = build_dependent_frames(&single, &[2]).unwrap().remove(0);
    assert!((real(&m).get(1, 1) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
}

#[test]
fn wigner_frobenius_expectation() {
    let n = 128;
    let g = grid(1.0, 4);
    let base = EnsembleSpec::new(Variant::WignerReal, n, g, h75(), 99);
    let draws: Vec<f64> = (0..100)
        .map(|r| build_wigner_frames(&base.replica(r), &[4]).unwrap()[0].data.frobenius_sq())
        .collect();
    let mean = draws.iter().sum::<f64>() / 100.0;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
    let expect = (n + 1) as f64;
    assert!((mean - expect).abs() < 4.0 * sd / 10.0, "{mean} vs {expect}");
}

#[test]
fn hermitian_frames_are_exact_and_scaled() {
    let n = 64;
    let spec = EnsembleSpec::new(Variant::WignerComplex, n, grid(1.0, 8), h75(), 4);
    let frames = build_wigner_complex_frames(&spec, &[2, 8]).unwrap();
    for f in &frames {
        let FrameMatrix::Complex(m) = &f.data else { panic!() };
        assert!(m.is_hermitian_exact());
    }
    // Off-diagonal entries of √N·Y(1) have E|Z|² = 2.
    let FrameMatrix::Complex(m) = &frames[1].data else { panic!() };
    let mut acc = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            acc.push(m.get(i, j).norm_sqr() * n as f64);
        }
    }
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    // |Z|² is a sum of two independent squared N(0, 1): variance 4.
    let se = (4.0 / acc.len() as f64).sqrt();
    assert!((mean - 2.0).abs() < 4.0 * se, "{mean}");
}

#[test]
fn dependent_gamma_by_enumeration_and_sample_covariance() {
    let k = DependentKernel::new(&two_site(), 1.0).unwrap();
    assert_eq!(k.gamma_raw.get(&(0, 0)), Some(&2.0));
    assert_eq!(k.gamma_raw.get(&(0, 1)), Some(&1.0));
    assert_eq!(k.gamma_raw.get(&(0, -1)), Some(&1.0));
    assert_eq!(k.gamma_raw.values().filter(|v| **v != 0.0).count(), 3);
    // The raw map is not invariant under (k, l) -> (l, k); the kernel averages
    // it with its transpose and reports the gap.
    assert!(k.is_asymmetric());
    assert_eq!(k.gamma[&(0, 1)], 0.5);
    assert_eq!(k.gamma[&(1, 0)], 0.5);
    assert_eq!(k.gamma[&(0, 0)], 2.0);
    let t = 0.5f64;
    let kt = DependentKernel::new(&two_site(), t.powf(0.75)).unwrap();
    assert!((kt.gamma_raw[&(0, 0)] - 2.0 * t.powf(1.5)).abs() < 1e-15);
    assert!((kt.gamma_raw[&(0, 1)] - t.powf(1.5)).abs() < 1e-15);

    let n = 8;
    let base = EnsembleSpec::new(Variant::Dependent, n, grid(1.0, 2), h75(), 13).with_index_set(two_site());
    let rows: Vec<Vec<f64>> = (0..4000)
        .map(|r| {
            let f = build_dependent_frames(&base.replica(r), &[2]).unwrap().remove(0);
            let s = (n as f64).sqrt();
            let m = real(&f);
            // (2,3), its lag-(0,1) neighbour, a lag-(1,0) and a lag-(0,3) entry.
            vec![m.get(2, 3) * s, m.get(2, 4) * s, m.get(3, 3) * s, m.get(2, 6) * s]
        })
        .collect();
    let mom = SampleMoments::of(rows.iter().map(|r| &r[..]));
    let truth = |i: usize, j: usize| -> f64 {
        match (i.min(j), i.max(j)) {
            (a, b) if a == b => 2.0,
            (0, 1) => 1.0,
            _ => 0.0,
        }
    };
    for (i, j) in [(0, 0), (0, 1), (0, 2), (0, 3)] {
        let z = (mom.cov(i, j) - truth(i, j)).abs() / mom.cov_se(truth, i, j);
        assert!(z < 4.0, "cov({i},{j}) = {}", mom.cov(i, j));
    }
}

#[test]
fn wishart_frames_are_psd_with_unit_trace_ratio() {
    let (p, n) = (50, 100);
    let spec = EnsembleSpec::new(Variant::WishartReal, n, grid(1.0, 4), h75(), 8).with_p(p);
    let frames = build_wishart_frames(&spec, &[2, 4]).unwrap();
    for f in &frames {
        let ev = eigenvalues_frame(&f.data, EigenOptions::verified()).unwrap();
        let norm = f.data.frobenius_sq().sqrt();
        assert!(ev[0] >= -1e-10 * norm);
    }
    let ratio = frames[1].data.trace() / p as f64;
    let se = (2.0 / (p * n) as f64).sqrt();
    assert!((ratio - 1.0).abs() < 4.0 * se, "{ratio}");

    let spec = EnsembleSpec::new(Variant::WishartComplex, n, grid(1.0, 4), h75(), 8).with_p(p);
    let f = &build_wishart_complex_frames(&spec, &[4]).unwrap()[0];
    let ev = eigenvalues_frame(&f.data, EigenOptions::verified()).unwrap();
    assert!(ev[0] >= -1e-10 * f.data.frobenius_sq().sqrt());
    let ratio = f.data.trace() / p as f64;
    assert!((ratio - 2.0).abs() < 4.0 * 2.0 * se, "{ratio}");
}

#[test]
fn uncentered_wishart_is_a_rank_three_perturbation() {
    let (p, n) = (40, 80);
    let zero_mean = EnsembleSpec::new(Variant::WishartReal, n, grid(1.0, 4), h75(), 3).with_p(p);
    assert_eq!(
        build_wishart_frames(&zero_mean, &[4]).unwrap(),
        uncentered_wishart_frames(&zero_mean, &[4]).unwrap()
    );

    let shifted = zero_mean.clone().with_x0(InitialLaw::Fixed(1.5));
    let c = build_wishart_frames(&shifted, &[4]).unwrap().remove(0);
    let u = uncentered_wishart_frames(&shifted, &[4]).unwrap().remove(0);
    let diff = FrameMatrix::Real(real(&u).sub(real(&c)));
    let mut sv: Vec<f64> = eigenvalues_frame(&diff, EigenOptions::default())
        .unwrap()
        .iter()
        .map(|v| v.abs())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    assert!(sv[1] > 1e-8 * sv[0]);
    assert!(sv[3] <= 1e-10 * sv[0], "fourth singular value {}", sv[3]);

    let ks = ks_two_sample(
        &eigenvalues_sym(&c, EigenOptions::default()).unwrap(),
        &eigenvalues_sym(&u, EigenOptions::default()).unwrap(),
    );
    assert!(ks <= 3.0 / p as f64 + 1e-12, "{ks}");
}

#[test]
fn estimated_centering_needs_enough_replicas() {
    let spec = EnsembleSpec::new(Variant::WishartReal, 4, grid(1.0, 4), h75(), 3)
        .with_p(2)
        .with_centering(Centering::Estimate { n_mc: 100 });
    assert_eq!(build_wishart_frames(&spec, &[4]).unwrap_err().exit_code(), 2);
    let spec = spec.with_preset(&Preset::SinDrift);
    assert!(matches!(spec.centering, Centering::Estimate { n_mc } if n_mc >= MIN_CENTERING_MC));
}

#[test]
fn frames_are_independent_of_worker_count() {
    let spec = EnsembleSpec::new(Variant::Dependent, 24, grid(1.0, 8), h75(), 77).with_index_set(two_site());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| build_frames(&spec, &[3, 8]).unwrap())
    };
    assert_eq!(run(1), run(6));
}

#[test]
fn frame_exports() {
    let spec = EnsembleSpec::new(Variant::WignerReal, 3, grid(1.0, 2), h75(), 1);
    let frames = build_wigner_frames(&spec, &[1, 2]).unwrap();
    let mut csv = Vec::new();
    write_frames_csv(&mut csv, &frames).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,row,v_0,v_1,v_2");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[4].starts_with("1,0,"));

    let mut bin = Vec::new();
    write_frames_binary(&mut bin, &frames).unwrap();
    let (header, values) = read_binary(&bin[..], FRAME_MAGIC).unwrap();
    assert_eq!((header.count, header.nodes), (2, 9));
    assert_eq!(&values[9..], &frames[1].data.dense_values()[..]);

    let c = EnsembleSpec::new(Variant::WignerComplex, 2, grid(1.0, 2), h75(), 1);
    let frames = build_wigner_complex_frames(&c, &[2]).unwrap();
    let mut csv = Vec::new();
    write_frames_csv(&mut csv, &frames).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("t,row,re_0,im_0,re_1,im_1\n"));
}

#[test]
fn variant_mismatch_and_bad_specs_are_config_errors() {
    let g = grid(1.0, 2);
    let spec = EnsembleSpec::new(Variant::WignerReal, 4, g, h75(), 1);
    assert_eq!(build_wishart_frames(&spec, &[1]).unwrap_err().exit_code(), 2);
    let empty = EnsembleSpec::new(Variant::Dependent, 4, g, h75(), 1).with_index_set(vec![]);
    assert!(build_frames(&empty, &[1]).is_err());
    let zero = EnsembleSpec::new(Variant::WignerReal, 0, g, h75(), 1);
    assert!(build_frames(&zero, &[1]).is_err());
    assert!(build_frames(&spec, &[3]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Tr(ΔY)² counts each off-diagonal entry twice.
    #[test]
    fn frobenius_increment_identity(seed in any::<u64>(), n in 1usize..12) {
        let spec = EnsembleSpec::new(Variant::WignerReal, n, grid(1.0, 4), h75(), seed)
            .with_x0(InitialLaw::Normal { mean: 0.0, sd: 1.0 });
        let f = build_wigner_frames(&spec, &[1, 3]).unwrap();
        let (a, b) = (real(&f[0]), real(&f[1]));
        let tr = f[1].data.distance_sq(&f[0].data).unwrap();
        let mut upper = 0.0;
        let mut direct = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = b.get(i, j) - a.get(i, j);
                direct += d * d;
                if j >= i {
                    upper += d * d;
                }
            }
        }
        prop_assert!((tr - direct).abs() <= 1e-12 * (1.0 + tr));
        prop_assert!(tr <= 2.0 * upper * (1.0 + 1e-12));
    }

    #[test]
    fn rebuilding_is_bit_identical(seed in any::<u64>(), variant in 0usize..5) {
        let v = [Variant::WignerReal, Variant::WignerComplex, Variant::Dependent, Variant::WishartReal, Variant::WishartComplex][variant];
        let spec = EnsembleSpec::new(v, 5, grid(1.0, 4), h75(), seed)
            .with_p(3)
            .with_z0(InitialLaw2D::default())
            .with_index_set(two_site());
        prop_assert_eq!(build_frames(&spec, &[2, 4]).unwrap(), build_frames(&spec, &[2, 4]).unwrap());
    }
}
