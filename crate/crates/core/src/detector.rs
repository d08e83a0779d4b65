//! Time-multiplexed detector (TMD) response.
//!
//! A TMD with `m` balanced splitter stages spreads an incoming pulse over
//! `M = 2^m` time bins, each read out by an on/off detector. Each photon
//! survives with probability `η` and lands in a uniformly random bin; the
//! number of clicks is the number of occupied bins. The conditional click
//! distribution is the inclusion-exclusion sum
//!
//! ```text
//! P(n|N) = C(M,n) Σ_{j=0}^{n} (-1)^j C(n,j) [(1-η) + η(n-j)/M]^N
//! ```
//!
//! which alternates and cancels badly once the bin count or photon number
//! grows. [`det_prob`] evaluates it in double-double arithmetic and, when the
//! a-priori error bound of that evaluation is too loose, falls back to the
//! equivalent photon-by-photon occupancy recursion, whose terms are all
//! non-negative. [`ResponseTable`] caches the recursion for bulk use.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{binomial_dd, compensated_sum, ln_binomial, DoubleDouble, DD_EPSILON};

/// Largest photon number accepted by the single-entry operations.
pub const MAX_PHOTONS: u64 = 10_000;

/// Largest supported number of splitter stages.
pub const MAX_STAGES: u32 = 30;

/// Negative results in `[-CLAMP_FLOOR, 0)` are treated as rounding noise.
pub const CLAMP_FLOOR: f64 = 1e-13;

/// Results below `-REJECT_FLOOR` mean the evaluation cannot be trusted.
pub const REJECT_FLOOR: f64 = 1e-10;

/// Maximum a-priori absolute error accepted from the alternating sum before
/// switching to the occupancy recursion.
pub const ALTERNATING_TOLERANCE: f64 = 1e-14;

/// Single-photon detection efficiency, kept as an exact ratio when supplied
/// as one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Efficiency {
    value: f64,
    ratio: Option<(u64, u64)>,
}

impl Efficiency {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::invalid(
                "eta",
                format!("efficiency must lie in (0, 1], got {value}"),
            ));
        }
        Ok(Self { value, ratio: None })
    }

    pub fn from_ratio(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 || numerator == 0 || numerator > denominator {
            return Err(Error::invalid(
                "eta",
                format!("ratio {numerator}/{denominator} is not in (0, 1]"),
            ));
        }
        Ok(Self {
            value: numerator as f64 / denominator as f64,
            ratio: Some((numerator, denominator)),
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn ratio(&self) -> Option<(u64, u64)> {
        self.ratio
    }
}

impl fmt::Display for Efficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ratio {
            Some((p, q)) => write!(f, "{p}/{q}"),
            None => write!(f, "{}", self.value),
        }
    }
}

impl FromStr for Efficiency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let parse = |t: &str| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::invalid("eta", format!("cannot parse ratio `{s}`")))
            };
            Efficiency::from_ratio(parse(p)?, parse(q)?)
        } else {
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::invalid("eta", format!("cannot parse `{s}`")))?;
            Efficiency::new(v)
        }
    }
}

/// TMD description: `stages` splitters giving `bins = 2^stages` time bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorConfig {
    stages: u32,
    bins: u64,
    efficiency: Efficiency,
}

impl DetectorConfig {
    pub fn new(stages: u32, efficiency: Efficiency) -> Result<Self> {
        if stages > MAX_STAGES {
            return Err(Error::invalid(
                "m",
                format!("at most {MAX_STAGES} splitter stages are supported, got {stages}"),
            ));
        }
        Ok(Self {
            stages,
            bins: 1u64 << stages,
            efficiency,
        })
    }

    /// Convenience constructor from a decimal efficiency.
    pub fn with_eta(stages: u32, eta: f64) -> Result<Self> {
        Self::new(stages, Efficiency::new(eta)?)
    }

    /// Builds a config from a bin count, which must be a power of two.
    pub fn from_bins(bins: u64, efficiency: Efficiency) -> Result<Self> {
        if bins == 0 || !bins.is_power_of_two() {
            return Err(Error::invalid(
                "M",
                format!("bin count must be a power of two, got {bins}"),
            ));
        }
        Self::new(bins.trailing_zeros(), efficiency)
    }

    pub fn stages(&self) -> u32 {
        self.stages
    }

    pub fn bins(&self) -> u64 {
        self.bins
    }

    pub fn eta(&self) -> f64 {
        self.efficiency.value()
    }

    pub fn efficiency(&self) -> Efficiency {
        self.efficiency
    }

    /// Per-photon probability that a photon is lost or joins an already
    /// occupied bin when `occupied` bins are lit.
    #[inline]
    fn stay_probability(&self, occupied: u64) -> f64 {
        let eta = self.eta();
        (1.0 - eta) + eta * occupied as f64 / self.bins as f64
    }

    #[inline]
    fn advance_probability(&self, occupied: u64) -> f64 {
        self.eta() * (self.bins - occupied) as f64 / self.bins as f64
    }

    /// One step of the occupancy recursion: the click distribution for
    /// `N + 1` photons from the one for `N`.
    pub(crate) fn next_row(&self, row: &[f64]) -> Vec<f64> {
        let width = (row.len() as u64 + 1).min(self.bins + 1) as usize;
        let mut next = vec![0.0; width];
        for (n, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            next[n] += p * self.stay_probability(n as u64);
            if (n as u64) < self.bins {
                next[n + 1] += p * self.advance_probability(n as u64);
            }
        }
        next
    }
}

/// Outcome of the double-double inclusion-exclusion evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternatingSum {
    /// Value after clamping of tiny negatives.
    pub value: f64,
    /// Σ|term_j|, computed from log-magnitudes.
    pub magnitude: f64,
    /// A-priori bound on the absolute error of `value`.
    pub error_bound: f64,
}

fn check_clicks(cfg: &DetectorConfig, n: u64) -> Result<()> {
    if n > cfg.bins() {
        return Err(Error::Domain(format!(
            "{n} clicks requested but the detector has only {} bins",
            cfg.bins()
        )));
    }
    Ok(())
}

fn check_photons(photons: u64) -> Result<()> {
    if photons > MAX_PHOTONS {
        return Err(Error::invalid(
            "N",
            format!("photon number {photons} exceeds {MAX_PHOTONS}; use the ideal limit or the Monte-Carlo oracle"),
        ));
    }
    Ok(())
}

fn clamp_probability(raw: f64) -> Result<f64> {
    if raw < -REJECT_FLOOR || raw.is_nan() {
        return Err(Error::NumericalAccuracy(format!(
            "detection probability evaluated to {raw:e}"
        )));
    }
    // [-REJECT_FLOOR, -CLAMP_FLOOR) is unreachable while the error bound gate
    // holds; it is clamped like rounding noise rather than rejected.
    Ok(raw.clamp(0.0, 1.0))
}

/// Evaluates the inclusion-exclusion form of P(n|N) in double-double
/// arithmetic, returning the value with its a-priori error bound.
pub fn det_prob_alternating(cfg: &DetectorConfig, n: u64, photons: u64) -> Result<AlternatingSum> {
    check_clicks(cfg, n)?;
    check_photons(photons)?;
    let raw = alternating_raw(cfg, n, photons);
    Ok(AlternatingSum {
        value: clamp_probability(raw.value)?,
        ..raw
    })
}

/// Unclamped inclusion-exclusion value; callers gate on `error_bound`.
fn alternating_raw(cfg: &DetectorConfig, n: u64, photons: u64) -> AlternatingSum {
    if n > photons {
        return AlternatingSum {
            value: 0.0,
            magnitude: 0.0,
            error_bound: 0.0,
        };
    }
    let eta = cfg.eta();
    let inv_bins = 1.0 / cfg.bins() as f64;
    let loss = DoubleDouble::sum(1.0, -eta);
    let outer = binomial_dd(cfg.bins(), n);
    let ln_outer = ln_binomial(cfg.bins(), n);

    let mut total = DoubleDouble::ZERO;
    let mut magnitude = 0.0;
    for j in 0..=n {
        // q_j = (1-η) + η(n-j)/M, exact in double-double since M is a power of two.
        let q = loss + DoubleDouble::product(eta, (n - j) as f64).scale_pow2(inv_bins);
        let qf = q.to_f64();
        let term_magnitude = if qf == 0.0 {
            if photons == 0 {
                (ln_outer + ln_binomial(n, j)).exp()
            } else {
                0.0
            }
        } else {
            (ln_outer + ln_binomial(n, j) + photons as f64 * qf.ln()).exp()
        };
        if term_magnitude == 0.0 {
            continue;
        }
        magnitude += term_magnitude;
        let term = outer * binomial_dd(n, j) * q.powi(photons);
        total = if j % 2 == 0 { total + term } else { total - term };
    }
    // Each term carries O(n + log N) double-double roundings.
    let ops = (n as f64) + 2.0 * ((photons.max(1)) as f64).log2() + 8.0;
    let error_bound = 4.0 * ops * DD_EPSILON * magnitude + f64::EPSILON * total.to_f64().abs();
    AlternatingSum {
        value: total.to_f64(),
        magnitude,
        error_bound,
    }
}

/// Click distribution for `photons` incident photons by the occupancy
/// recursion, one photon at a time.
pub fn det_row(cfg: &DetectorConfig, photons: u64) -> Result<Vec<f64>> {
    check_photons(photons)?;
    let mut row = vec![1.0];
    for _ in 0..photons {
        row = cfg.next_row(&row);
    }
    Ok(row)
}

/// Probability of `n` clicks given `photons` incident photons.
pub fn det_prob(cfg: &DetectorConfig, n: u64, photons: u64) -> Result<f64> {
    check_clicks(cfg, n)?;
    check_photons(photons)?;
    if n > photons {
        return Ok(0.0);
    }
    let alt = alternating_raw(cfg, n, photons);
    if alt.error_bound <= ALTERNATING_TOLERANCE {
        return clamp_probability(alt.value);
    }
    let row = det_row(cfg, photons)?;
    Ok(row.get(n as usize).copied().unwrap_or(0.0))
}

/// Limit of [`det_prob`] for infinitely many bins: binomial loss.
pub fn det_prob_ideal_limit(eta: f64, n: u64, photons: u64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("eta", format!("efficiency must lie in (0, 1], got {eta}")));
    }
    if n > photons {
        return Err(Error::Domain(format!(
            "ideal detector cannot report {n} clicks from {photons} photons"
        )));
    }
    if eta == 1.0 {
        return Ok(if n == photons { 1.0 } else { 0.0 });
    }
    let ln = ln_binomial(photons, n) + (photons - n) as f64 * (1.0 - eta).ln() + n as f64 * eta.ln();
    Ok(ln.exp())
}

/// One point of the detector response curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandPoint {
    pub photons: u64,
    pub mean: f64,
    pub std_dev: f64,
}

/// Mean and standard deviation of the click count for each incident photon
/// number `0..=max_photons`.
pub fn det_response_band(cfg: &DetectorConfig, max_photons: u64) -> Result<Vec<BandPoint>> {
    if max_photons < 1 {
        return Err(Error::invalid("N_max", "must be at least 1"));
    }
    check_photons(max_photons)?;
    let mut out = Vec::with_capacity(max_photons as usize + 1);
    let mut row = vec![1.0];
    for photons in 0..=max_photons {
        let mean = compensated_sum(row.iter().enumerate().map(|(n, p)| n as f64 * p));
        let var = compensated_sum(
            row.iter()
                .enumerate()
                .map(|(n, p)| (n as f64 - mean).powi(2) * p),
        );
        out.push(BandPoint {
            photons,
            mean,
            std_dev: var.max(0.0).sqrt(),
        });
        if photons < max_photons {
            row = cfg.next_row(&row);
        }
    }
    Ok(out)
}

/// Rows of P(n|N) for `N = 0..len`, grown on demand.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    cfg: DetectorConfig,
    rows: Vec<Vec<f64>>,
}

impl ResponseTable {
    pub fn new(cfg: DetectorConfig) -> Self {
        Self {
            cfg,
            rows: vec![vec![1.0]],
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Highest photon number currently tabulated.
    pub fn max_photons(&self) -> u64 {
        self.rows.len() as u64 - 1
    }

    pub fn extend_to(&mut self, photons: u64) {
        while self.max_photons() < photons {
            let next = self.cfg.next_row(self.rows.last().expect("row 0 always present"));
            self.rows.push(next);
        }
    }

    /// P(n|N); zero outside the support. Panics if `N` is not tabulated.
    #[inline]
    pub fn prob(&self, n: u64, photons: u64) -> f64 {
        self.rows[photons as usize]
            .get(n as usize)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn row(&self, photons: u64) -> &[f64] {
        &self.rows[photons as usize]
    }
}
