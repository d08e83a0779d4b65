//! Event-level Monte-Carlo simulation of the heralding chain.
//!
//! Each trial draws a pair number from the OPA law (a sum of `μ` geometric
//! draws), sends the idler photons through the detector (per-photon loss,
//! then a uniformly random time bin), and counts occupied bins as clicks.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). Trials are cut
//! into fixed batches of [`BATCH_TRIALS`]; batch `i` uses the generator
//! seeded with the run seed and switched to stream `i`. Results are
//! therefore identical for any number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::detector::{det_prob, DetectorConfig};
use crate::error::{Error, Result};
use crate::heralding::Herald;
use crate::pmf::Pmf;
use crate::source::SourceConfig;

/// Trials per independently seeded batch.
pub const BATCH_TRIALS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub det: DetectorConfig,
    pub src: SourceConfig,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64, det: DetectorConfig, src: SourceConfig) -> Result<Self> {
        if trials == 0 {
            return Err(Error::invalid("trials", "at least one trial is required"));
        }
        Ok(Self {
            trials,
            seed,
            det,
            src,
        })
    }

    fn batches(&self) -> impl ParallelIterator<Item = (u64, u64)> + '_ {
        let count = self.trials.div_ceil(BATCH_TRIALS);
        (0..count).into_par_iter().map(move |i| {
            let start = i * BATCH_TRIALS;
            (i, (self.trials - start).min(BATCH_TRIALS))
        })
    }

    fn batch_rng(&self, batch: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(batch);
        rng
    }
}

/// Histogram of an integer-valued outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmpiricalPmf {
    counts: Vec<u64>,
    trials: u64,
}

impl EmpiricalPmf {
    fn empty() -> Self {
        Self {
            counts: Vec::new(),
            trials: 0,
        }
    }

    fn record(&mut self, value: u64) {
        let i = value as usize;
        if i >= self.counts.len() {
            self.counts.resize(i + 1, 0);
        }
        self.counts[i] += 1;
        self.trials += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.trials += other.trials;
        self
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn count(&self, value: u64) -> u64 {
        self.counts.get(value as usize).copied().unwrap_or(0)
    }

    pub fn probability(&self, value: u64) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.count(value) as f64 / self.trials as f64
    }

    /// Binomial standard error of [`probability`](Self::probability) at the
    /// observed frequency.
    pub fn std_error(&self, value: u64) -> f64 {
        binomial_std_error(self.probability(value), self.trials)
    }

    pub fn mean(&self) -> f64 {
        self.moment(|v| v)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(|v| (v - m) * (v - m))
    }

    pub fn mean_std_error(&self) -> f64 {
        (self.variance() / self.trials as f64).sqrt()
    }

    /// Large-sample standard error of the sample variance,
    /// `sqrt((m4 - var^2) / n)`.
    pub fn variance_std_error(&self) -> f64 {
        let m = self.mean();
        let var = self.variance();
        let m4 = self.moment(|v| (v - m).powi(4));
        ((m4 - var * var).max(0.0) / self.trials as f64).sqrt()
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let total: f64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| f(v as f64) * c as f64)
            .sum();
        total / self.trials as f64
    }

    /// Relative frequencies as a [`Pmf`] starting at zero.
    pub fn to_pmf(&self) -> Result<Pmf> {
        let masses = if self.counts.is_empty() {
            vec![0.0]
        } else {
            self.counts
                .iter()
                .map(|&c| c as f64 / self.trials.max(1) as f64)
                .collect()
        };
        Pmf::new(0, masses, 0.0)
    }
}

/// `sqrt(p (1-p) / n)`.
pub fn binomial_std_error(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

/// `(observed - expected) / std_error`, zero when both agree exactly.
pub fn z_score(observed: f64, expected: f64, std_error: f64) -> f64 {
    let diff = observed - expected;
    if diff == 0.0 {
        0.0
    } else if std_error == 0.0 {
        f64::INFINITY.copysign(diff)
    } else {
        diff / std_error
    }
}

/// Reusable bin-occupancy scratch space.
struct Bins {
    words: Vec<u64>,
    touched: Vec<usize>,
    bins: u64,
}

impl Bins {
    fn new(bins: u64) -> Self {
        Self {
            words: vec![0; bins.div_ceil(64) as usize],
            touched: Vec::new(),
            bins,
        }
    }

    /// Clicks registered when `photons` photons enter the detector.
    fn clicks<R: Rng>(&mut self, rng: &mut R, det: &DetectorConfig, photons: u64) -> u64 {
        let eta = det.eta();
        let mut clicks = 0;
        for _ in 0..photons {
            if eta < 1.0 && rng.random::<f64>() >= eta {
                continue;
            }
            let bin = rng.random_range(0..self.bins);
            let (w, bit) = ((bin / 64) as usize, 1u64 << (bin % 64));
            if self.words[w] & bit == 0 {
                if self.words[w] == 0 {
                    self.touched.push(w);
                }
                self.words[w] |= bit;
                clicks += 1;
            }
        }
        for &w in &self.touched {
            self.words[w] = 0;
        }
        self.touched.clear();
        clicks
    }
}

/// Draws a total pair number from the `μ`-mode thermal law.
fn sample_pairs<R: Rng>(rng: &mut R, src: &SourceConfig) -> u64 {
    let ln_t = src.tanh2().ln();
    (0..src.modes())
        .map(|_| {
            // P(K >= k) = t^k
            let u = 1.0 - rng.random::<f64>();
            (u.ln() / ln_t).floor() as u64
        })
        .sum()
}

/// Click histogram for a fixed incident photon number.
pub fn simulate_detection(cfg: &McConfig, photons: u64) -> EmpiricalPmf {
    cfg.batches()
        .map(|(batch, n)| {
            let mut rng = cfg.batch_rng(batch);
            let mut bins = Bins::new(cfg.det.bins());
            let mut hist = EmpiricalPmf::empty();
            for _ in 0..n {
                hist.record(bins.clicks(&mut rng, &cfg.det, photons));
            }
            hist
        })
        .reduce(EmpiricalPmf::empty, EmpiricalPmf::merge)
}

/// Result of post-selecting simulated trials on a click count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldSample {
    pub n_i: u64,
    /// Signal pair numbers of the kept trials.
    pub posterior: EmpiricalPmf,
    pub kept: u64,
    pub trials: u64,
}

impl HeraldSample {
    pub fn herald_probability(&self) -> f64 {
        self.kept as f64 / self.trials as f64
    }

    pub fn herald_std_error(&self) -> f64 {
        binomial_std_error(self.herald_probability(), self.trials)
    }
}

/// Simulates the full chain and keeps trials with exactly `n_i` clicks.
pub fn simulate_herald(cfg: &McConfig, n_i: u64) -> Result<HeraldSample> {
    if n_i > cfg.det.bins() {
        return Err(Error::Domain(format!(
            "{n_i} clicks requested but the detector has only {} bins",
            cfg.det.bins()
        )));
    }
    let posterior = cfg
        .batches()
        .map(|(batch, n)| {
            let mut rng = cfg.batch_rng(batch);
            let mut bins = Bins::new(cfg.det.bins());
            let mut hist = EmpiricalPmf::empty();
            for _ in 0..n {
                let pairs = sample_pairs(&mut rng, &cfg.src);
                if bins.clicks(&mut rng, &cfg.det, pairs) == n_i {
                    hist.record(pairs);
                }
            }
            hist
        })
        .reduce(EmpiricalPmf::empty, EmpiricalPmf::merge);
    let kept = posterior.trials();
    if kept == 0 {
        return Err(Error::InsufficientStatistics {
            kept,
            trials: cfg.trials,
            rate: 0.0,
        });
    }
    Ok(HeraldSample {
        n_i,
        posterior,
        kept,
        trials: cfg.trials,
    })
}

/// One analytic value set against its Monte-Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCheck {
    pub quantity: &'static str,
    /// Photon or click number for PMF entries.
    pub index: Option<u64>,
    pub analytic: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub z: f64,
}

impl McCheck {
    fn new(quantity: &'static str, index: Option<u64>, analytic: f64, empirical: f64, std_error: f64) -> Self {
        Self {
            quantity,
            index,
            analytic,
            empirical,
            std_error,
            z: z_score(empirical, analytic, std_error),
        }
    }
}

/// Fraction of checks with `|z| <= k`.
pub fn fraction_within(checks: &[McCheck], k: f64) -> f64 {
    if checks.is_empty() {
        return 1.0;
    }
    checks.iter().filter(|c| c.z.abs() <= k).count() as f64 / checks.len() as f64
}

pub fn max_abs_z(checks: &[McCheck]) -> f64 {
    checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
}

/// Entries expected fewer times than this are pooled into one check.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

/// PMF checks: one per entry with an expected count of at least
/// [`MIN_EXPECTED_COUNT`], plus one pooled check for all the others.
/// Standard errors use the analytic probability.
fn pmf_checks(
    quantity: &'static str,
    pooled: &'static str,
    entries: impl Iterator<Item = (u64, f64, f64)>,
    samples: u64,
) -> Vec<McCheck> {
    let mut checks = Vec::new();
    let (mut rest_p, mut rest_emp, mut any_rest) = (0.0, 0.0, false);
    for (n, p, emp) in entries {
        if p * samples as f64 >= MIN_EXPECTED_COUNT {
            checks.push(McCheck::new(quantity, Some(n), p, emp, binomial_std_error(p, samples)));
        } else {
            rest_p += p;
            rest_emp += emp;
            any_rest = true;
        }
    }
    if any_rest {
        let rest_p = rest_p.min(1.0);
        checks.push(McCheck::new(pooled, None, rest_p, rest_emp, binomial_std_error(rest_p, samples)));
    }
    checks
}

/// Simulated click histogram for `photons` photons against the analytic
/// response.
pub fn compare_detection(cfg: &McConfig, photons: u64) -> Result<Vec<McCheck>> {
    let hist = simulate_detection(cfg, photons);
    let entries = (0..=photons.min(cfg.det.bins()))
        .map(|n| Ok((n, det_prob(&cfg.det, n, photons)?, hist.probability(n))))
        .collect::<Result<Vec<_>>>()?;
    Ok(pmf_checks("detection", "detection_rare", entries.into_iter(), hist.trials()))
}

/// Simulated herald against the analytic posterior, herald probability and
/// conditional moments. Fewer than `min_kept` kept trials is an error.
pub fn compare_herald(cfg: &McConfig, eps: f64, n_i: u64, min_kept: u64) -> Result<(HeraldSample, Vec<McCheck>)> {
    let sample = simulate_herald(cfg, n_i)?;
    if sample.kept < min_kept.max(1) {
        return Err(Error::InsufficientStatistics {
            kept: sample.kept,
            trials: sample.trials,
            rate: sample.herald_probability(),
        });
    }
    let mut herald = Herald::with_epsilon(cfg.det, cfg.src, eps)?;
    let post = herald.posterior(n_i)?;
    let rate = herald.herald_probability(n_i)?.value;
    let kept = sample.kept;
    let emp = &sample.posterior;

    let mut checks = vec![McCheck::new(
        "herald_prob",
        None,
        rate,
        sample.herald_probability(),
        binomial_std_error(rate, sample.trials),
    )];
    let top = post.last().max(emp.counts().len().saturating_sub(1) as u64);
    let entries = (n_i..=top).map(|n| (n, post.get(n), emp.probability(n)));
    checks.extend(pmf_checks("posterior", "posterior_rare", entries, kept));
    let mean = post.mean();
    let var = post.variance();
    let m4: f64 = post.iter().map(|(n, p)| p * (n as f64 - mean).powi(4)).sum();
    checks.push(McCheck::new("mean", None, mean, emp.mean(), (var / kept as f64).sqrt()));
    checks.push(McCheck::new(
        "variance",
        None,
        var,
        emp.variance(),
        ((m4 - var * var).max(0.0) / kept as f64).sqrt(),
    ));
    Ok((sample, checks))
}
