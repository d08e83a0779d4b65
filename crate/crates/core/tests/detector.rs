mod common;

use common::{binomial_loss, enumerate_histories, enumerated_prob, to_f64, urn_prob};
use herald_core::detector::{
    det_prob, det_prob_alternating, det_prob_ideal_limit, det_response_band, det_row, DetectorConfig,
};
use herald_core::exact::det_prob_exact;
use herald_core::{Efficiency, Error};
use proptest::prelude::*;

fn det(stages: u32, eta: &str) -> DetectorConfig {
    DetectorConfig::new(stages, eta.parse::<Efficiency>().unwrap()).unwrap()
}

#[test]
fn matches_enumeration_on_small_detectors() {
    for stages in 1..=3u32 {
        let bins = 1u32 << stages;
        for photons in 0..=6u32 {
            let counts = enumerate_histories(bins, photons);
            for (p, q) in [(1, 1), (1, 2), (33, 50)] {
                let cfg = det(stages, &format!("{p}/{q}"));
                for n in 0..=bins.min(photons) as usize {
                    let exact = enumerated_prob(&counts, bins, photons, p, q, n);
                    let got = det_prob(&cfg, n as u64, photons as u64).unwrap();
                    assert!(
                        (got - to_f64(&exact)).abs() <= 1e-12,
                        "M={bins} N={photons} eta={p}/{q} n={n}: {got} vs {exact}"
                    );
                    assert_eq!(det_prob_exact(&cfg, n as u64, photons as u64).unwrap(), exact);
                }
            }
        }
    }
}

#[test]
fn thirty_two_bins_three_clicks_five_photons() {
    let counts = enumerate_histories(32, 5);
    let exact = enumerated_prob(&counts, 32, 5, 33, 50, 3);
    let cfg = det(5, "33/50");
    assert_eq!(det_prob_exact(&cfg, 3, 5).unwrap(), exact);
    assert!((det_prob(&cfg, 3, 5).unwrap() - to_f64(&exact)).abs() <= 1e-12);
}

#[test]
fn two_photons_two_bins() {
    assert_eq!(det_prob(&det(1, "1"), 2, 2).unwrap(), 0.5);
}

#[test]
fn no_clicks_means_all_lost() {
    for (stages, eta, photons) in [(0, 0.3, 4u64), (5, 0.66, 10), (12, 0.9, 7)] {
        let cfg = DetectorConfig::with_eta(stages, eta).unwrap();
        let want = (1.0 - eta).powi(photons as i32);
        assert!((det_prob(&cfg, 0, photons).unwrap() - want).abs() <= 1e-15 * want.max(1e-300) + 1e-300);
    }
}

#[test]
fn more_clicks_than_bins_is_a_domain_error() {
    assert!(matches!(det_prob(&det(2, "1"), 5, 9), Err(Error::Domain(_))));
}

#[test]
fn ideal_limit_examples() {
    assert_eq!(det_prob_ideal_limit(1.0, 4, 4).unwrap(), 1.0);
    assert!((det_prob_ideal_limit(0.5, 1, 2).unwrap() - 0.5).abs() < 1e-15);
    let want = 10.0 * 0.34f64.powi(2) * 0.66f64.powi(3);
    assert!((det_prob_ideal_limit(0.66, 3, 5).unwrap() - want).abs() < 1e-15);
}

#[test]
fn million_bins_match_the_exact_urn_law() {
    for eta in [0.33, 0.66, 1.0] {
        let cfg = DetectorConfig::with_eta(20, eta).unwrap();
        for photons in 0..=10usize {
            for n in 0..=photons {
                let got = det_prob(&cfg, n as u64, photons as u64).unwrap();
                assert!((got - urn_prob(1 << 20, eta, n, photons)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn million_bins_approach_binomial_loss() {
    // Two photons share a bin with probability about C(N,2)/M, so the
    // binomial law is within 1e-6 only for N <= 2 at this size.
    let cfg = DetectorConfig::with_eta(20, 1.0).unwrap();
    for photons in 0..=2 {
        for n in 0..=photons {
            let got = det_prob(&cfg, n, photons).unwrap();
            assert!((got - binomial_loss(1.0, n, photons)).abs() <= 1e-6);
        }
    }
    let gap = 1.0 - det_prob(&cfg, 10, 10).unwrap();
    let collision = 1.0 - (0..10).map(|j| 1.0 - j as f64 / (1u64 << 20) as f64).product::<f64>();
    assert!((gap - collision).abs() < 1e-15);
    assert!(gap > 4e-5);
}

#[test]
fn band_saturates_below_bin_count() {
    let band = det_response_band(&det(5, "1"), 400).unwrap();
    assert_eq!((band[1].mean, band[1].std_dev), (1.0, 0.0));
    assert!(band.windows(2).all(|w| w[1].mean >= w[0].mean));
    let last = band.last().unwrap();
    assert!(last.mean < 32.0 && last.mean > 31.9);
}

#[test]
fn cancellation_prone_cases_stay_accurate() {
    // Large M with many clicks: the alternating terms dwarf the result.
    let cfg = DetectorConfig::with_eta(20, 0.66).unwrap();
    let row = det_row(&DetectorConfig::with_eta(10, 0.66).unwrap(), 60).unwrap();
    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let p = det_prob(&cfg, 40, 60).unwrap();
    let want = binomial_loss(0.66, 40, 60);
    assert!((p - want).abs() < 1e-3 * want);
    let alt = det_prob_alternating(&cfg, 40, 60).unwrap();
    assert!(alt.error_bound > alt.value.abs() || (alt.value - p).abs() <= alt.error_bound + 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_are_distributions(stages in 0u32..8, eta in 0.01f64..=1.0, photons in 0u64..80) {
        let cfg = DetectorConfig::with_eta(stages, eta).unwrap();
        let bins = cfg.bins();
        let mut total = 0.0;
        for n in 0..=bins.min(photons) {
            let p = det_prob(&cfg, n, photons).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            total += p;
        }
        prop_assert!((total - 1.0).abs() <= 1e-12);
        if photons < bins {
            prop_assert_eq!(det_prob(&cfg, photons + 1, photons).unwrap(), 0.0);
        }
    }

    #[test]
    fn both_evaluations_agree(stages in 0u32..7, eta in 0.01f64..=1.0, photons in 0u64..40, frac in 0.0f64..=1.0) {
        let cfg = DetectorConfig::with_eta(stages, eta).unwrap();
        let n = ((photons.min(cfg.bins())) as f64 * frac).round() as u64;
        let row = det_row(&cfg, photons).unwrap();
        let p = det_prob(&cfg, n, photons).unwrap();
        prop_assert!((p - row[n as usize]).abs() <= 1e-12);
    }

    #[test]
    fn mean_clicks_never_decrease(stages in 0u32..7, eta in 0.01f64..=1.0) {
        let cfg = DetectorConfig::with_eta(stages, eta).unwrap();
        let band = det_response_band(&cfg, 60).unwrap();
        for w in band.windows(2) {
            prop_assert!(w[1].mean >= w[0].mean - 1e-12);
            prop_assert!(w[1].mean <= cfg.bins() as f64 * (1.0 + 1e-12));
        }
    }
}
