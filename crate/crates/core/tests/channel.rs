mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pktbound::channel::{
    llr_i, llr_j, llr_r, orientation, sample_llr, ChannelSpec, LlrStream, Measure, Statistic,
};
use pktbound::np_testing::Side;

// Gauss-Hermite values, frozen
const MEAN_R_NOISE_HALF: f64 = -0.125_432_792_508_561_04;
const MEAN_R_NOISE_07: f64 = -0.158_736_521_664_153_03;
const MUTUAL_INFO_07: f64 = 0.291_857_517_912_798_1;
const CAPACITY_0DB_NATS: f64 = 0.336_830_820_346_831_76;

fn spec(rho: f64, p: f64, n: usize) -> ChannelSpec {
    ChannelSpec::new(rho, p, n).unwrap()
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn quadrature_oracle_is_self_consistent() {
    assert!((common::mean_r_noise(1.0, 0.5) - MEAN_R_NOISE_HALF).abs() < 1e-12);
    assert!((common::mean_r_noise(1.0, 0.7) - MEAN_R_NOISE_07).abs() < 1e-12);
    assert!((common::mutual_information(1.0, 0.7) - MUTUAL_INFO_07).abs() < 1e-12);
    assert!((common::mutual_information(1.0, 0.5) - CAPACITY_0DB_NATS).abs() < 1e-12);
    // p = 1 carries no information
    assert!(common::mutual_information(1.0, 1.0).abs() < 1e-12);
}

#[test]
fn sample_means_match_quadrature() {
    let s = spec(1.0, 0.5, 1);
    let r = sample_llr(&s, Statistic::R, Measure::NoiseOnly, 400_000, 3, false).unwrap();
    let (m, se) = mean_and_se(r.values());
    assert!((m - MEAN_R_NOISE_HALF).abs() < 4.0 * se, "{m} ± {se}");

    let s = spec(1.0, 0.7, 1);
    let r = sample_llr(&s, Statistic::R, Measure::NoiseOnly, 400_000, 4, false).unwrap();
    let (m, se) = mean_and_se(r.values());
    assert!((m - MEAN_R_NOISE_07).abs() < 4.0 * se, "{m} ± {se}");

    let s = spec(1.0, 0.7, 3);
    let i = sample_llr(&s, Statistic::I, Measure::JointPxy, 400_000, 5, false).unwrap();
    let (m, se) = mean_and_se(i.values());
    assert!((m - 3.0 * MUTUAL_INFO_07).abs() < 4.0 * se, "{m} ± {se}");
}

#[test]
fn importance_weights_have_unit_mean() {
    let pairs = [
        (Statistic::I, Measure::JointPxy),
        (Statistic::I, Measure::ProductPxQy),
        (Statistic::I, Measure::Conditional),
        (Statistic::R, Measure::OutputPy),
        (Statistic::R, Measure::NoiseOnly),
        (Statistic::J, Measure::Conditional),
        (Statistic::J, Measure::NoiseOnly),
    ];
    for (k, &(stat, measure)) in pairs.iter().enumerate() {
        for &p in &[0.5, 0.8] {
            let s = spec(0.5, p, 6);
            let v = sample_llr(&s, stat, measure, 200_000, 100 + k as u64, false).unwrap();
            let check = v.unit_mean_check(0.99);
            assert!(check.contains_one(), "{stat:?} {measure:?} p={p}: {check:?}");
        }
    }
}

#[test]
fn orientation_table() {
    assert_eq!(orientation(Statistic::I, Measure::ProductPxQy), Some(Side::Q));
    assert_eq!(orientation(Statistic::R, Measure::NoiseOnly), Some(Side::Q));
    assert_eq!(orientation(Statistic::J, Measure::Conditional), Some(Side::P));
    assert_eq!(orientation(Statistic::R, Measure::ProductPxQy), None);
}

#[test]
fn information_density_splits_into_preamble_and_detection_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for k in 0..100_000 {
        let n = 1 + k % 7;
        let rho = 0.1 + 3.0 * rng.random::<f64>();
        let p = 0.5 + 0.5 * rng.random::<f64>();
        let s = spec(rho, p, n);
        let a = s.amplitude();
        let x: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { a } else { -a }).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let z: f64 = StandardNormal.sample(&mut rng);
                xi + 2.0 * z
            })
            .collect();
        let i = llr_i(&s, &x, &y).unwrap();
        let j = llr_j(&s, &x, &y).unwrap();
        let r = llr_r(&s, &y).unwrap();
        let scale = i.abs().max(j.abs()).max(r.abs()).max(1.0);
        worst = worst.max((i - (j - r)).abs() / scale);
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn uniform_input_is_sign_symmetric() {
    // at p = 1/2 the law of ı under P_{XY} is that under the all-+√ρ codeword
    let s = spec(1.0, 0.5, 8);
    let joint = sample_llr(&s, Statistic::I, Measure::JointPxy, 200_000, 1, false).unwrap();
    let cond = sample_llr(&s, Statistic::I, Measure::Conditional, 200_000, 2, false).unwrap();
    let (m1, se1) = mean_and_se(joint.values());
    let (m2, se2) = mean_and_se(cond.values());
    assert!((m1 - m2).abs() < 4.0 * (se1 * se1 + se2 * se2).sqrt());
    assert!((m1 - 8.0 * CAPACITY_0DB_NATS).abs() < 4.0 * se1);
}

#[test]
fn streams_share_draws_across_skews() {
    // the same seed draws the same noise at every skew
    let a = sample_llr(&spec(1.0, 0.6, 5), Statistic::R, Measure::NoiseOnly, 1000, 8, false).unwrap();
    let b = sample_llr(&spec(1.0, 0.9, 5), Statistic::R, Measure::NoiseOnly, 1000, 8, false).unwrap();
    let corr = {
        let (ma, _) = mean_and_se(a.values());
        let (mb, _) = mean_and_se(b.values());
        let cov: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.values().iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.values().iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    assert!(corr > 0.5, "{corr}");
}

#[test]
fn parallel_and_sequential_streams_agree() {
    let s = spec(2.0, 0.75, 1);
    let mut a = LlrStream::new(&s, Measure::ProductPxQy, 9000, 13, false).unwrap();
    let mut b = LlrStream::new(&s, Measure::ProductPxQy, 9000, 13, true).unwrap();
    a.advance_to(9).unwrap();
    b.advance_to(4).unwrap();
    b.advance_to(9).unwrap();
    assert_eq!(a.samples(Statistic::I).unwrap(), b.samples(Statistic::I).unwrap());
    assert_eq!(a.blocklength(), 9);
    assert_eq!(a.count(), 9000);
}

proptest! {
    #[test]
    fn detection_llr_is_even_at_half(rho in 0.01f64..10.0, ys in prop::collection::vec(-8.0f64..8.0, 1..12)) {
        let s = spec(rho, 0.5, ys.len());
        let neg: Vec<f64> = ys.iter().map(|v| -v).collect();
        let a = llr_r(&s, &ys).unwrap();
        let b = llr_r(&s, &neg).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn information_density_is_bounded_by_input_probability(
        rho in 0.01f64..10.0,
        p in 0.5f64..0.999,
        signs in prop::collection::vec(any::<bool>(), 1..12),
        seed in any::<u64>(),
    ) {
        // ı(x, y) <= -log P_X(x) since P_Y(y) >= P_X(x) P_{Y|X}(y|x)
        let s = spec(rho, p, signs.len());
        let a = s.amplitude();
        let x: Vec<f64> = signs.iter().map(|&b| if b { a } else { -a }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let z: f64 = StandardNormal.sample(&mut rng);
                xi + 3.0 * z
            })
            .collect();
        let ln_px: f64 = signs.iter().map(|&b| if b { (1.0 - p).ln() } else { p.ln() }).sum();
        prop_assert!(llr_i(&s, &x, &y).unwrap() <= -ln_px + 1e-9);
    }
}
