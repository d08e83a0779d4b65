//! Exact click probabilities in rational arithmetic, for efficiencies given
//! as ratios. Used to validate the floating-point evaluation on small cases.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};

/// Largest photon number accepted by the exact path.
pub const MAX_EXACT_PHOTONS: u64 = 200;
/// Largest bin count accepted by the exact path.
pub const MAX_EXACT_BINS: u64 = 1 << 10;

fn binomial(n: u64, k: u64) -> BigInt {
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// Inclusion-exclusion sum for `P(n|N)` evaluated without rounding.
/// Requires the detector's efficiency to carry an exact ratio.
pub fn det_prob_exact(cfg: &DetectorConfig, n: u64, photons: u64) -> Result<BigRational> {
    let Some((p, q)) = cfg.efficiency().ratio() else {
        return Err(Error::invalid("eta", "the exact path needs the efficiency as a ratio p/q"));
    };
    let bins = cfg.bins();
    if bins > MAX_EXACT_BINS || photons > MAX_EXACT_PHOTONS {
        return Err(Error::Domain(format!(
            "exact evaluation is limited to M <= {MAX_EXACT_BINS} and N <= {MAX_EXACT_PHOTONS}"
        )));
    }
    if n > bins {
        return Err(Error::Domain(format!("{n} clicks requested but the detector has only {bins} bins")));
    }
    if n > photons {
        return Ok(BigRational::zero());
    }
    let eta = BigRational::new(BigInt::from(p), BigInt::from(q));
    let m = BigRational::from_integer(BigInt::from(bins));
    let loss = BigRational::one() - &eta;
    let mut total = BigRational::zero();
    for j in 0..=n {
        let base = &loss + &eta * BigRational::from_integer(BigInt::from(n - j)) / &m;
        let term = num::pow(base, photons as usize) * BigRational::from_integer(binomial(n, j));
        if j % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total * BigRational::from_integer(binomial(bins, n)))
}

/// [`det_prob_exact`] rounded to the nearest double.
pub fn det_prob_exact_f64(cfg: &DetectorConfig, n: u64, photons: u64) -> Result<f64> {
    let r = det_prob_exact(cfg, n, photons)?;
    r.to_f64()
        .ok_or_else(|| Error::NumericalAccuracy("exact value does not fit a double".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::Efficiency;

    fn det(stages: u32, eta: &str) -> DetectorConfig {
        DetectorConfig::new(stages, eta.parse::<Efficiency>().unwrap()).unwrap()
    }

    #[test]
    fn two_photons_two_bins() {
        let d = det(1, "1/1");
        assert_eq!(det_prob_exact(&d, 2, 2).unwrap(), BigRational::new(1.into(), 2.into()));
        assert_eq!(det_prob_exact(&d, 1, 2).unwrap(), BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn rows_sum_to_one() {
        let d = det(3, "33/50");
        let total: BigRational = (0..=6).map(|n| det_prob_exact(&d, n, 6).unwrap()).sum();
        assert_eq!(total, BigRational::one());
    }

    #[test]
    fn decimal_efficiency_rejected() {
        assert!(det_prob_exact(&det(2, "0.5"), 1, 2).is_err());
    }
}
