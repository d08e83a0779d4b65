//! Pair-number statistics of an unseeded OPA.
//!
//! A single mode with gain `g` emits `k` pairs with Bose-Einstein
//! probability `(1 - t) t^k`, `t = tanh^2 g`. With `μ` equally occupied
//! modes the total pair number is negative binomial,
//! `C(k+μ-1, μ-1) (1-t)^μ t^k`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{binomial, ln_binomial};
use crate::pmf::Pmf;

/// Default truncation epsilon for every infinite sum over pair number.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Loosest truncation epsilon accepted.
pub const MAX_EPSILON: f64 = 1e-6;

const MAX_SUPPORT: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceConfig {
    gain: f64,
    modes: u32,
    tanh2: f64,
    sech2: f64,
    sinh2: f64,
}

impl SourceConfig {
    pub fn new(gain: f64, modes: u32) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::invalid("g", format!("gain must be positive and finite, got {gain}")));
        }
        if modes == 0 {
            return Err(Error::invalid("mu", "mode count must be at least 1"));
        }
        let tanh2 = gain.tanh().powi(2);
        if tanh2 >= 1.0 {
            return Err(Error::invalid("g", format!("gain {gain} saturates tanh^2 g to 1")));
        }
        let sech2 = 1.0 / gain.cosh().powi(2);
        Ok(Self {
            gain,
            modes,
            tanh2,
            sech2,
            sinh2: gain.sinh().powi(2),
        })
    }

    pub fn single_mode(gain: f64) -> Result<Self> {
        Self::new(gain, 1)
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn modes(&self) -> u32 {
        self.modes
    }

    /// Bose-Einstein ratio `t = tanh^2 g`.
    pub fn tanh2(&self) -> f64 {
        self.tanh2
    }

    /// `1 - tanh^2 g`, computed without cancellation.
    pub fn sech2(&self) -> f64 {
        self.sech2
    }

    /// Mean pairs per mode.
    pub fn sinh2(&self) -> f64 {
        self.sinh2
    }

    /// Mean total pair number `μ sinh^2 g`.
    pub fn mean_pairs(&self) -> f64 {
        self.modes as f64 * self.sinh2
    }

    /// Variance of the total pair number, `m (1 + m/μ)`.
    pub fn pair_variance(&self) -> f64 {
        let m = self.mean_pairs();
        m * (1.0 + m / self.modes as f64)
    }

    /// Ratio `P(k+1)/P(k)`.
    fn ratio(&self, k: u64) -> f64 {
        self.tanh2 * (k as f64 + self.modes as f64) / (k as f64 + 1.0)
    }
}

/// Probability that the source emits `k` pairs over all of its modes.
pub fn opa_pmf(src: &SourceConfig, k: u64) -> f64 {
    let mu = src.modes as u64;
    let t = src.tanh2;
    if mu == 1 && k <= i32::MAX as u64 {
        return src.sech2 * t.powi(k as i32);
    }
    let direct = if k <= i32::MAX as u64 {
        binomial(k + mu - 1, mu - 1) * src.sech2.powi(mu as i32) * t.powi(k as i32)
    } else {
        0.0
    };
    if direct.is_normal() {
        direct
    } else {
        (ln_binomial(k + mu - 1, mu - 1) + mu as f64 * src.sech2.ln() + k as f64 * t.ln()).exp()
    }
}

/// Truncated pair-number PMF whose dropped tail mass is at most `eps`.
///
/// The tail beyond `K` is bounded by the geometric majorant
/// `P(K) r_K / (1 - r_K)` with `r_K = t (K+μ)/(K+1)`, valid once `r_K < 1`
/// since the ratios decrease in `K`.
pub fn opa_truncated(src: &SourceConfig, eps: f64) -> Result<Pmf> {
    if !(eps > 0.0 && eps <= MAX_EPSILON) {
        return Err(Error::invalid(
            "eps",
            format!("truncation epsilon must lie in (0, {MAX_EPSILON}], got {eps}"),
        ));
    }
    let mut masses = Vec::new();
    let mut k = 0u64;
    loop {
        let p = opa_pmf(src, k);
        masses.push(p);
        let r = src.ratio(k);
        if r < 1.0 {
            let bound = p * r / (1.0 - r);
            if bound <= eps {
                return Pmf::new(0, masses, bound);
            }
        }
        k += 1;
        if k > MAX_SUPPORT {
            return Err(Error::NumericalAccuracy(format!(
                "pair-number support exceeds {MAX_SUPPORT} before reaching eps = {eps:e}"
            )));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_probability() {
        let s = SourceConfig::single_mode(1.0).unwrap();
        assert!((opa_pmf(&s, 0) - 0.419_974_341_614_026_1).abs() < 1e-15);
        for g in [0.1, 0.5, 1.3] {
            let s = SourceConfig::single_mode(g).unwrap();
            assert!((opa_pmf(&s, 0) - (1.0 - g.tanh().powi(2))).abs() < 1e-15);
        }
    }

    #[test]
    fn low_gain_support_is_tiny() {
        let s = SourceConfig::single_mode(0.01).unwrap();
        let pmf = opa_truncated(&s, 1e-12).unwrap();
        assert!(pmf.len() <= 4, "len {}", pmf.len());
        assert!(pmf.get(0) > 0.9998);
    }

    #[test]
    fn normalisation_and_mean() {
        for (g, mu) in [(1.0, 1), (0.75, 5), (0.25, 2)] {
            let s = SourceConfig::new(g, mu).unwrap();
            let pmf = opa_truncated(&s, 1e-12).unwrap();
            assert!(pmf.tail_bound() <= 1e-12);
            let total = pmf.total();
            assert!(total >= 1.0 - 1e-12 && total <= 1.0 + 2.0 * pmf.tail_bound() + 1e-15);
            assert!((pmf.mean() - s.mean_pairs()).abs() < 1e-9 * s.mean_pairs());
        }
    }

    #[test]
    fn multimode_variance() {
        let s = SourceConfig::new(1.0, 5).unwrap();
        let pmf = opa_truncated(&s, 1e-12).unwrap();
        let m = 5.0 * 1f64.sinh().powi(2);
        assert!((pmf.variance() - m * (1.0 + m / 5.0)).abs() < 1e-9 * m);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SourceConfig::new(0.0, 1).is_err());
        assert!(SourceConfig::new(1.0, 0).is_err());
        let s = SourceConfig::single_mode(1.0).unwrap();
        assert!(opa_truncated(&s, 1e-3).is_err());
        assert!(opa_truncated(&s, 0.0).is_err());
    }
}
