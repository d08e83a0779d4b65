//! Closed-form conditional moments of the heralded signal field.
//!
//! Single mode: with `a_j = 1 / (1 - t [(1-η) + η(n_i-j)/M])`,
//!
//! ```text
//! <n_s>   = Σ_{j=0}^{n_i} a_j - 1
//! Var n_s = Σ_{j=0}^{n_i} (a_j^2 - a_j)
//! ```
//!
//! Multimode: summing the negative-binomial series against the
//! inclusion-exclusion detector response turns every moment into
//! derivatives of `B(x, 1+n_i) = Σ_j C(n_i,j) (-1)^j / (x+j)`. With
//! `g_μ(x) = ∂^μ B / ∂^{μ-1} B`,
//!
//! ```text
//! <n_s>   = -μ - c g_μ(x)
//! Var n_s = (c + c^2 ∂_x) g_μ(x)
//! ```
//!
//! The partial-fraction sum alternates and cancels catastrophically when
//! `x` is large (low gain), so the derivatives used for the moments come
//! from the product form `B = n_i! / Π_j (x+j)`: its logarithmic
//! derivatives are signed power sums over the same poles, and the
//! resulting recursion for `∂^p B / B` has terms of a single sign.

use serde::Serialize;

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::heralding::Herald;
use crate::numeric::{binomial, compensated_sum, ln_binomial, ln_factorial, CompensatedSum};
use crate::source::SourceConfig;

/// Default relative tolerance when comparing closed and direct moments.
pub const AGREEMENT_TOLERANCE: f64 = 1e-8;

fn check_clicks(det: &DetectorConfig, n_i: u64) -> Result<()> {
    if n_i > det.bins() {
        return Err(Error::Domain(format!(
            "{n_i} clicks requested but the detector has only {} bins",
            det.bins()
        )));
    }
    Ok(())
}

fn require_single_mode(src: &SourceConfig) -> Result<()> {
    if src.modes() != 1 {
        return Err(Error::invalid(
            "mu",
            format!("single-mode formula called with {} modes", src.modes()),
        ));
    }
    Ok(())
}

/// `t [(1-η) + η(n_i-j)/M]` and `1 - ` that quantity, the latter written as
/// `sech^2 g + t η (M - n_i + j)/M` to avoid cancellation.
fn a_parts(det: &DetectorConfig, src: &SourceConfig, n_i: u64, j: u64) -> (f64, f64) {
    let eta = det.eta();
    let m = det.bins() as f64;
    let t = src.tanh2();
    let inner = (1.0 - eta) + eta * (n_i - j) as f64 / m;
    let complement = src.sech2() + t * eta * (det.bins() - n_i + j) as f64 / m;
    (t * inner, complement)
}

/// The single-mode coefficient `a_j`, always `>= 1`.
pub fn a_coeff(det: &DetectorConfig, src: &SourceConfig, n_i: u64, j: u64) -> Result<f64> {
    check_clicks(det, n_i)?;
    if j > n_i {
        return Err(Error::invalid("j", format!("index {j} exceeds n_i = {n_i}")));
    }
    let (_, complement) = a_parts(det, src, n_i, j);
    Ok(1.0 / complement)
}

/// Single-mode conditional mean, `Σ a_j - 1`.
pub fn cond_mean_single(det: &DetectorConfig, src: &SourceConfig, n_i: u64) -> Result<f64> {
    check_clicks(det, n_i)?;
    require_single_mode(src)?;
    // Σ a_j - 1 = n_i + Σ (a_j - 1), with a_j - 1 = t·inner·a_j.
    let excess = compensated_sum((0..=n_i).map(|j| {
        let (ti, complement) = a_parts(det, src, n_i, j);
        ti / complement
    }));
    Ok(n_i as f64 + excess)
}

/// Single-mode conditional variance, `Σ (a_j^2 - a_j)`.
pub fn cond_var_single(det: &DetectorConfig, src: &SourceConfig, n_i: u64) -> Result<f64> {
    check_clicks(det, n_i)?;
    require_single_mode(src)?;
    Ok(compensated_sum((0..=n_i).map(|j| {
        let (ti, complement) = a_parts(det, src, n_i, j);
        let a = 1.0 / complement;
        a * a * ti
    })))
}

/// Constants of the multimode closed form for one `(detector, source, n_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixContext {
    /// `M/(η sinh^2 g) + M - n_i`
    pub x: f64,
    /// `M(1-η)/η + n_i`
    pub b: f64,
    /// `M/(η tanh^2 g)`; equals `x + b`.
    pub c: f64,
    /// `C(M, n_i) (M/(η sinh^2 g))^μ`
    pub a: f64,
    /// `ln a`, finite even when `a` overflows.
    pub ln_a: f64,
    pub mu: u32,
    pub n_i: u64,
}

impl AppendixContext {
    pub fn new(det: &DetectorConfig, src: &SourceConfig, n_i: u64) -> Result<Self> {
        check_clicks(det, n_i)?;
        let m = det.bins() as f64;
        let eta = det.eta();
        let scale = m / (eta * src.sinh2());
        let x = scale + (det.bins() - n_i) as f64;
        let b = m * (1.0 - eta) / eta + n_i as f64;
        let c = m / (eta * src.tanh2());
        let ln_a = ln_binomial(det.bins(), n_i) + src.modes() as f64 * scale.ln();
        let ctx = Self {
            x,
            b,
            c,
            a: ln_a.exp(),
            ln_a,
            mu: src.modes(),
            n_i,
        };
        if !(ctx.x > 0.0 && ctx.x.is_finite() && ctx.c.is_finite() && ctx.b.is_finite()) {
            return Err(Error::NumericalAccuracy(format!(
                "closed-form constants are not finite: x = {}, b = {}, c = {}",
                ctx.x, ctx.b, ctx.c
            )));
        }
        Ok(ctx)
    }
}

/// One term `coefficient / (x + pole)^power` of a [`PartialFractionForm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialFractionTerm {
    pub coefficient: f64,
    pub pole: u64,
}

/// `Σ_j coefficient_j / (x + pole_j)^power` with distinct integer poles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialFractionForm {
    pub power: u32,
    pub terms: Vec<PartialFractionTerm>,
}

impl PartialFractionForm {
    /// Exact derivative: raises the power and scales by `-power`.
    pub fn derivative(&self) -> Self {
        let p = self.power as f64;
        Self {
            power: self.power + 1,
            terms: self
                .terms
                .iter()
                .map(|t| PartialFractionTerm {
                    coefficient: -p * t.coefficient,
                    pole: t.pole,
                })
                .collect(),
        }
    }

    pub fn nth_derivative(&self, order: u32) -> Self {
        (0..order).fold(self.clone(), |f, _| f.derivative())
    }

    /// Direct evaluation; accurate only while `x` is comparable to the
    /// number of poles.
    pub fn eval(&self, x: f64) -> f64 {
        compensated_sum(
            self.terms
                .iter()
                .map(|t| t.coefficient / (x + t.pole as f64).powi(self.power as i32)),
        )
    }
}

/// `B(x, 1+n_i) = Σ_{j=0}^{n_i} C(n_i, j) (-1)^j / (x + j)`.
pub fn beta_pf(n_i: u64) -> PartialFractionForm {
    PartialFractionForm {
        power: 1,
        terms: (0..=n_i)
            .map(|j| {
                let c = binomial(n_i, j);
                PartialFractionTerm {
                    coefficient: if j % 2 == 0 { c } else { -c },
                    pole: j,
                }
            })
            .collect(),
    }
}

/// Derivatives of `B(x, 1+n_i)` up to a given order at one point.
///
/// Stores `ln B(x)` and the scaled ratios `u_p = x^p ∂^p B / B`, computed from
/// `∂_x ln B = -Σ_j 1/(x+j)` and its derivatives. Each `u_p` is a sum of
/// like-signed terms, so no cancellation occurs at large `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaDerivatives {
    x: f64,
    ln_beta: f64,
    scaled: Vec<f64>,
}

impl BetaDerivatives {
    pub fn new(n_i: u64, x: f64, max_order: u32) -> Result<Self> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::invalid("x", format!("beta derivatives need x > 0, got {x}")));
        }
        let ln_beta = ln_factorial(n_i) - compensated_sum((0..=n_i).map(|j| (x + j as f64).ln()));
        // x^k ∂^k ln B = (-1)^k (k-1)! Σ_j (x/(x+j))^k
        let max = max_order as usize;
        let mut log_derivs = vec![0.0; max + 1];
        let ratios: Vec<f64> = (0..=n_i).map(|j| x / (x + j as f64)).collect();
        let mut factorial = 1.0;
        for k in 1..=max {
            if k > 1 {
                factorial *= (k - 1) as f64;
            }
            let power_sum = compensated_sum(ratios.iter().map(|r| r.powi(k as i32)));
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            log_derivs[k] = sign * factorial * power_sum;
        }
        // u_{p+1} = Σ_{i=0}^{p} C(p, i) u_{p-i} (x^{i+1} ∂^{i+1} ln B)
        let mut scaled = vec![1.0; max + 1];
        for p in 0..max {
            let mut acc = CompensatedSum::new();
            for i in 0..=p {
                acc.add(binomial(p as u64, i as u64) * scaled[p - i] * log_derivs[i + 1]);
            }
            scaled[p + 1] = acc.value();
        }
        Ok(Self { x, ln_beta, scaled })
    }

    pub fn max_order(&self) -> u32 {
        self.scaled.len() as u32 - 1
    }

    /// `ln B(x, 1+n_i)`.
    pub fn ln_beta(&self) -> f64 {
        self.ln_beta
    }

    /// `x^p ∂^p B / B`.
    pub fn scaled_ratio(&self, order: u32) -> f64 {
        self.scaled[order as usize]
    }

    /// `∂^p B / B`.
    pub fn ratio(&self, order: u32) -> f64 {
        self.scaled[order as usize] / self.x.powi(order as i32)
    }

    /// `∂^p B(x, 1+n_i)`.
    pub fn derivative(&self, order: u32) -> f64 {
        self.ln_beta.exp() * self.ratio(order)
    }
}

fn derivative_ratios(ctx: &AppendixContext) -> Result<BetaDerivatives> {
    if ctx.mu == 0 {
        return Err(Error::invalid("mu", "mode count must be at least 1"));
    }
    let d = BetaDerivatives::new(ctx.n_i, ctx.x, ctx.mu + 1)?;
    let denom = d.scaled_ratio(ctx.mu - 1);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::NumericalAccuracy(format!(
            "∂^{} B vanished or overflowed at x = {}",
            ctx.mu - 1,
            ctx.x
        )));
    }
    Ok(d)
}

/// `g_μ(x) = ∂^μ B / ∂^{μ-1} B`.
pub fn g_mu(ctx: &AppendixContext) -> Result<f64> {
    let d = derivative_ratios(ctx)?;
    let mu = ctx.mu;
    Ok(d.scaled_ratio(mu) / (d.scaled_ratio(mu - 1) * ctx.x))
}

/// `∂_x g_μ(x)` by the quotient rule on exact derivatives.
pub fn g_mu_derivative(ctx: &AppendixContext) -> Result<f64> {
    let d = derivative_ratios(ctx)?;
    let mu = ctx.mu;
    let (lo, mid, hi) = (d.scaled_ratio(mu - 1), d.scaled_ratio(mu), d.scaled_ratio(mu + 1));
    Ok((hi * lo - mid * mid) / (lo * lo * ctx.x * ctx.x))
}

/// Conditional mean and variance from the multimode closed form.
pub fn cond_moments_multimode(det: &DetectorConfig, src: &SourceConfig, n_i: u64) -> Result<(f64, f64)> {
    let ctx = AppendixContext::new(det, src, n_i)?;
    let d = derivative_ratios(&ctx)?;
    let mu = ctx.mu;
    let (lo, mid, hi) = (d.scaled_ratio(mu - 1), d.scaled_ratio(mu), d.scaled_ratio(mu + 1));
    // c g = (c/x) u_μ/u_{μ-1};  c^2 ∂g = (c/x)^2 (u_{μ+1}u_{μ-1} - u_μ^2)/u_{μ-1}^2
    let cx = ctx.c / ctx.x;
    let cg = cx * mid / lo;
    let c2dg = cx * cx * (hi * lo - mid * mid) / (lo * lo);
    let mean = -(mu as f64) - cg;
    let var = cg + c2dg;
    if !(mean.is_finite() && var.is_finite()) {
        return Err(Error::NumericalAccuracy(format!(
            "closed-form moments are not finite for n_i = {n_i}"
        )));
    }
    Ok((mean, var))
}

/// Closed-form moments, choosing the single-mode formulas when `μ = 1`.
pub fn cond_moments(det: &DetectorConfig, src: &SourceConfig, n_i: u64) -> Result<(f64, f64)> {
    if src.modes() == 1 {
        Ok((cond_mean_single(det, src, n_i)?, cond_var_single(det, src, n_i)?))
    } else {
        cond_moments_multimode(det, src, n_i)
    }
}

/// The unnormalised moment sums `S_l = Σ_n n^l P_det(n_i|n) P_opa(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixSums {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
}

impl AppendixSums {
    pub fn mean(&self) -> f64 {
        self.s1 / self.s0
    }

    pub fn variance(&self) -> f64 {
        self.s2 / self.s0 - (self.s1 / self.s0).powi(2)
    }
}

fn signed_factorial_ratio(sign_exp: i64, num: f64, factorial_of: u32) -> f64 {
    let sign = if sign_exp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * num / (1..=factorial_of).map(|k| k as f64).product::<f64>()
}

/// `S_0, S_1, S_2` from the beta-function derivative expressions:
///
/// ```text
/// S_0 = A (-1)^{μ-1}/(μ-1)! ∂^{μ-1} B
/// S_1 = A μ(-1)^μ/μ! ∂^μ [(x+b) B]
/// S_2 = A μ^2(-1)^{μ+1}/(μ+1)! ∂^{μ+1} [(x+b)^2 B + (x+b)(c/μ) B]
/// ```
///
/// The products are expanded by Leibniz' rule. Intended for verification;
/// the moments themselves come from [`cond_moments_multimode`].
pub fn appendix_sums_closed(det: &DetectorConfig, src: &SourceConfig, n_i: u64) -> Result<AppendixSums> {
    let ctx = AppendixContext::new(det, src, n_i)?;
    let d = derivative_ratios(&ctx)?;
    let mu = ctx.mu;
    let mu_f = mu as f64;
    // Scale everything by A·B(x) to stay in range.
    let scale = (ctx.ln_a + d.ln_beta()).exp();
    let r = |p: i64| if p < 0 { 0.0 } else { d.ratio(p as u32) };
    let xb = ctx.x + ctx.b;
    let (m, p1, p2) = (mu as i64, mu as i64 + 1, mu as i64);

    let s0 = signed_factorial_ratio(m - 1, 1.0, mu - 1) * r(m - 1);
    let d1 = xb * r(p2) + p2 as f64 * r(p2 - 1);
    let s1 = signed_factorial_ratio(m, mu_f, mu) * d1;
    let p = p1 as f64;
    let sq = xb * xb * r(p1) + 2.0 * p * xb * r(p1 - 1) + p * (p - 1.0) * r(p1 - 2);
    let lin = xb * r(p1) + p * r(p1 - 1);
    let s2 = signed_factorial_ratio(m + 1, mu_f * mu_f, mu + 1) * (sq + ctx.c / mu_f * lin);
    Ok(AppendixSums {
        s0: scale * s0,
        s1: scale * s1,
        s2: scale * s2,
    })
}

/// `S_0, S_1, S_2` by direct truncated summation.
pub fn appendix_sums_direct(herald: &mut Herald, n_i: u64) -> Result<AppendixSums> {
    let z = herald.herald_probability(n_i)?.value;
    let post = herald.posterior(n_i)?;
    let s1 = compensated_sum(post.iter().map(|(n, p)| n as f64 * p));
    let s2 = compensated_sum(post.iter().map(|(n, p)| (n * n) as f64 * p));
    Ok(AppendixSums {
        s0: z,
        s1: z * s1,
        s2: z * s2,
    })
}

/// Comparison of closed-form and direct-sum moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentsDiagnostic {
    pub closed_mean: f64,
    pub closed_var: f64,
    pub direct_mean: f64,
    pub direct_var: f64,
    pub mean_rel_diff: f64,
    pub var_rel_diff: f64,
    pub tolerance: f64,
    pub agree: bool,
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Evaluates both routes and reports whether they agree within `tolerance`.
/// Disagreement is reported, never resolved in favour of either side.
pub fn moments_diagnostic(herald: &mut Herald, n_i: u64, tolerance: f64) -> Result<MomentsDiagnostic> {
    let det = *herald.detector();
    let src = *herald.source();
    let (closed_mean, closed_var) = cond_moments(&det, &src, n_i)?;
    let post = herald.posterior(n_i)?;
    let (direct_mean, direct_var) = (post.mean(), post.variance());
    let mean_rel_diff = relative_difference(closed_mean, direct_mean);
    let var_rel_diff = relative_difference(closed_var, direct_var);
    Ok(MomentsDiagnostic {
        closed_mean,
        closed_var,
        direct_mean,
        direct_var,
        mean_rel_diff,
        var_rel_diff,
        tolerance,
        agree: mean_rel_diff <= tolerance && var_rel_diff <= tolerance,
    })
}
