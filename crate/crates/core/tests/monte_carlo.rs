use herald_core::closed_form::cond_moments;
use herald_core::detector::{det_response_band, DetectorConfig};
use herald_core::mc::{compare_herald, simulate_detection, simulate_herald, z_score, McConfig};
use herald_core::{Error, SourceConfig};

fn cfg(trials: u64, seed: u64, stages: u32, eta: f64, g: f64, mu: u32) -> McConfig {
    McConfig::new(
        trials,
        seed,
        DetectorConfig::with_eta(stages, eta).unwrap(),
        SourceConfig::new(g, mu).unwrap(),
    )
    .unwrap()
}

#[test]
fn two_photons_two_bins() {
    let h = simulate_detection(&cfg(1_000_000, 3, 1, 1.0, 1.0, 1), 2);
    assert!(z_score(h.probability(2), 0.5, h.std_error(2)).abs() <= 3.0);
}

#[test]
fn no_photons() {
    let h = simulate_detection(&cfg(10_000, 3, 5, 1.0, 1.0, 1), 0);
    assert_eq!(h.count(0), 10_000);
}

#[test]
fn mean_clicks_against_band() {
    let c = cfg(1_000_000, 4, 5, 0.33, 1.0, 1);
    let h = simulate_detection(&c, 10);
    let band = det_response_band(&c.det, 10).unwrap();
    assert!(z_score(h.mean(), band[10].mean, h.mean_std_error()).abs() <= 3.0);
}

#[test]
fn low_gain_herald() {
    // g = 0.01 would keep about one trial in 10^8; g = 0.1 is still deep in
    // the low-gain regime.
    let s = simulate_herald(&cfg(2_000_000, 5, 5, 0.9, 0.1, 1), 2).unwrap();
    assert!(s.kept > 50);
    let p = s.posterior.probability(2);
    assert!(p + 3.0 * s.posterior.std_error(2) > 0.99);
}

#[test]
fn near_ideal_detector_is_a_point_mass() {
    let s = simulate_herald(&cfg(200_000, 6, 12, 1.0, 0.75, 1), 3).unwrap();
    assert!(s.posterior.probability(3) > 0.99);
}

#[test]
fn working_point_moments() {
    let c = cfg(1_000_000, 7, 5, 0.66, 1.0, 1);
    let s = simulate_herald(&c, 4).unwrap();
    let (mean, var) = cond_moments(&c.det, &c.src, 4).unwrap();
    let p = &s.posterior;
    assert!(z_score(p.mean(), mean, p.mean_std_error()).abs() <= 3.0);
    assert!(z_score(p.variance(), var, p.variance_std_error()).abs() <= 3.0);
}

#[test]
fn multimode_herald_checks() {
    let (_, checks) = compare_herald(&cfg(1_000_000, 8, 5, 0.66, 1.0, 5), 1e-12, 4, 100).unwrap();
    let within = checks.iter().filter(|c| c.z.abs() <= 3.0).count();
    assert!(within as f64 >= 0.95 * checks.len() as f64);
    assert!(checks.iter().all(|c| c.z.abs() <= 4.0), "{checks:?}");
}

#[test]
fn seeds_reproduce_and_differ() {
    let a = simulate_herald(&cfg(100_000, 9, 3, 0.5, 0.8, 1), 2).unwrap();
    let b = simulate_herald(&cfg(100_000, 9, 3, 0.5, 0.8, 1), 2).unwrap();
    let c = simulate_herald(&cfg(100_000, 10, 3, 0.5, 0.8, 1), 2).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn empty_selection_reports_statistics() {
    let err = simulate_herald(&cfg(100, 1, 5, 0.1, 0.05, 1), 20).unwrap_err();
    assert!(matches!(err, Error::InsufficientStatistics { kept: 0, trials: 100, .. }));
}
