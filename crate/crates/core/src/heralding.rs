//! Bayesian inference of the signal photon number from the idler click count.
//!
//! Signal and idler carry the same pair number `k`, so the idler's `n_i`
//! clicks give the posterior
//!
//! ```text
//! P(n_s | n_i) = P_det(n_i | n_s) P_opa(n_s) / Σ_k P_det(n_i | k) P_opa(k)
//! ```
//!
//! whose normaliser is the probability of the heralding event itself. The
//! heralded signal state is diagonal in the Fock basis, so this PMF is the
//! whole state.

use serde::Serialize;

use crate::detector::{DetectorConfig, ResponseTable};
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::pmf::Pmf;
use crate::source::{opa_truncated, SourceConfig, DEFAULT_EPSILON, MAX_EPSILON};

/// Heralding probabilities below this are treated as impossible events.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Probability of the heralding event with its truncation slack:
/// the exact value lies in `[value, value + tail_bound]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeraldProbability {
    pub value: f64,
    pub tail_bound: f64,
}

/// Everything known about the signal field heralded by `n_i` clicks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldedState {
    pub n_i: u64,
    pub posterior: Pmf,
    pub ml_estimate: u64,
    pub ml_mse: f64,
    pub cond_mean: f64,
    pub cond_var: f64,
    /// `None` only for a zero-mean herald, where Q is undefined.
    pub q: Option<f64>,
    pub herald_prob: f64,
    pub herald_tail_bound: f64,
}

/// Detector and source pair with a lazily grown prior and response table,
/// shared by all click counts.
#[derive(Debug, Clone)]
pub struct Herald {
    det: DetectorConfig,
    src: SourceConfig,
    eps: f64,
    prior: Pmf,
    prior_eps: f64,
    table: ResponseTable,
}

impl Herald {
    pub fn new(det: DetectorConfig, src: SourceConfig) -> Result<Self> {
        Self::with_epsilon(det, src, DEFAULT_EPSILON)
    }

    pub fn with_epsilon(det: DetectorConfig, src: SourceConfig, eps: f64) -> Result<Self> {
        let prior = opa_truncated(&src, eps)?;
        let mut table = ResponseTable::new(det);
        table.extend_to(prior.last());
        Ok(Self {
            det,
            src,
            eps,
            prior,
            prior_eps: eps,
            table,
        })
    }

    pub fn detector(&self) -> &DetectorConfig {
        &self.det
    }

    pub fn source(&self) -> &SourceConfig {
        &self.src
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    fn check_clicks(&self, n_i: u64) -> Result<()> {
        if n_i > self.det.bins() {
            return Err(Error::Domain(format!(
                "{n_i} clicks requested but the detector has only {} bins",
                self.det.bins()
            )));
        }
        Ok(())
    }

    fn refine_prior(&mut self, eps: f64) -> Result<()> {
        if eps >= self.prior_eps {
            return Ok(());
        }
        self.prior = opa_truncated(&self.src, eps)?;
        self.prior_eps = eps;
        self.table.extend_to(self.prior.last());
        Ok(())
    }

    /// Truncated joint weights `P_det(n_i|k) P_opa(k)` for `k >= n_i` and
    /// their sum.
    fn joint(&self, n_i: u64) -> (Vec<f64>, f64) {
        let joint: Vec<f64> = (n_i..=self.prior.last())
            .map(|k| self.table.prob(n_i, k) * self.prior.get(k))
            .collect();
        let z = compensated_sum(joint.iter().copied());
        (joint, z)
    }

    /// Probability that the detector reports exactly `n_i` clicks.
    pub fn herald_probability(&mut self, n_i: u64) -> Result<HeraldProbability> {
        self.check_clicks(n_i)?;
        let (_, z) = self.joint(n_i);
        Ok(HeraldProbability {
            value: z,
            tail_bound: self.prior.tail_bound(),
        })
    }

    /// Posterior over the signal photon number, renormalised over its
    /// truncated support. The prior is refined until the posterior's own
    /// dropped mass, at most `prior tail / Z`, is within epsilon.
    pub fn posterior(&mut self, n_i: u64) -> Result<Pmf> {
        self.check_clicks(n_i)?;
        loop {
            let (joint, z) = self.joint(n_i);
            let prior_tail = self.prior.tail_bound();
            if z > PROBABILITY_FLOOR && prior_tail / z <= self.eps {
                let masses = joint.into_iter().map(|w| w / z).collect();
                return Pmf::new(n_i, masses, prior_tail / z);
            }
            if !(z > PROBABILITY_FLOOR) && prior_tail <= PROBABILITY_FLOOR {
                return Err(Error::InfeasibleEvent(format!(
                    "P({n_i} clicks) = {z:e} is below the floating-point floor"
                )));
            }
            // Either the tail is too heavy relative to Z, or the truncated
            // support does not reach the event at all.
            let next = if z > PROBABILITY_FLOOR {
                self.eps * z * 0.5
            } else {
                prior_tail * 1e-8
            };
            let next = next.clamp(PROBABILITY_FLOOR, MAX_EPSILON);
            if next >= self.prior_eps {
                return Err(Error::NumericalAccuracy(format!(
                    "cannot bound the posterior tail for {n_i} clicks (Z = {z:e})"
                )));
            }
            self.refine_prior(next)?;
        }
    }

    /// Full heralded-state summary for `n_i` clicks.
    pub fn state(&mut self, n_i: u64) -> Result<HeraldedState> {
        let posterior = self.posterior(n_i)?;
        let herald = self.herald_probability(n_i)?;
        let ml = ml_estimate(&posterior);
        let ml_mse = ml_mse(&posterior, ml)?;
        let cond_mean = posterior.mean();
        let cond_var = posterior.variance();
        let q = match mandel_q(cond_mean, cond_var) {
            Ok(q) => Some(q),
            Err(Error::UndefinedQ) => None,
            Err(e) => return Err(e),
        };
        Ok(HeraldedState {
            n_i,
            posterior,
            ml_estimate: ml,
            ml_mse,
            cond_mean,
            cond_var,
            q,
            herald_prob: herald.value,
            herald_tail_bound: herald.tail_bound,
        })
    }
}

/// Posterior `P(n_s | n_i)` with the default truncation epsilon.
pub fn posterior(det: &DetectorConfig, src: &SourceConfig, n_i: u64) -> Result<Pmf> {
    Herald::new(*det, *src)?.posterior(n_i)
}

/// Maximum-likelihood signal photon number; ties go to the smallest.
pub fn ml_estimate(posterior: &Pmf) -> u64 {
    posterior.mode()
}

/// Mean squared error of the estimate `ml` under the posterior.
pub fn ml_mse(posterior: &Pmf, ml: u64) -> Result<f64> {
    if ml < posterior.offset() {
        return Err(Error::invalid(
            "ml",
            format!("estimate {ml} lies below the posterior support starting at {}", posterior.offset()),
        ));
    }
    Ok(posterior.second_moment_about(ml as f64))
}

/// Conditional mean and variance of the signal photon number by direct
/// summation over the truncated posterior.
pub fn cond_moments_direct(det: &DetectorConfig, src: &SourceConfig, n_i: u64) -> Result<(f64, f64)> {
    let post = posterior(det, src, n_i)?;
    Ok((post.mean(), post.variance()))
}

/// Mandel's Q parameter, `(var - mean) / mean`.
pub fn mandel_q(mean: f64, variance: f64) -> Result<f64> {
    if mean == 0.0 {
        return Err(Error::UndefinedQ);
    }
    if !(mean > 0.0) || !variance.is_finite() {
        return Err(Error::invalid("mean", format!("Q needs a positive mean, got {mean}")));
    }
    Ok((variance - mean) / mean)
}

/// Probability of observing `n_i` clicks per pulse.
pub fn herald_probability(det: &DetectorConfig, src: &SourceConfig, n_i: u64) -> Result<HeraldProbability> {
    Herald::new(*det, *src)?.herald_probability(n_i)
}
