//! Reference computations shared by the integration tests. None of them
//! call into the library's numerical kernels.
#![allow(dead_code)]

use num::{BigInt, BigRational, One, ToPrimitive, Zero};

/// `counts[n][lost]`: number of photon histories (each photon either lost
/// or placed in one of `bins` bins) with `lost` losses and `n` occupied
/// bins, found by walking all `(bins + 1)^photons` histories.
pub fn enumerate_histories(bins: u32, photons: u32) -> Vec<Vec<u64>> {
    fn walk(bins: u32, left: u32, occupied: u64, lost: usize, counts: &mut [Vec<u64>]) {
        if left == 0 {
            counts[occupied.count_ones() as usize][lost] += 1;
            return;
        }
        walk(bins, left - 1, occupied, lost + 1, counts);
        for b in 0..bins {
            walk(bins, left - 1, occupied | (1 << b), lost, counts);
        }
    }
    assert!(bins <= 64);
    let mut counts = vec![vec![0u64; photons as usize + 1]; bins as usize + 1];
    walk(bins, photons, 0, 0, &mut counts);
    counts
}

/// Exact `P(n|N)` from the enumerated histories for `η = p/q`.
pub fn enumerated_prob(counts: &[Vec<u64>], bins: u32, photons: u32, p: u64, q: u64, n: usize) -> BigRational {
    let eta = BigRational::new(BigInt::from(p), BigInt::from(q));
    let loss = BigRational::one() - &eta;
    let placed = eta / BigRational::from_integer(BigInt::from(bins));
    let mut total = BigRational::zero();
    for (lost, &c) in counts[n].iter().enumerate() {
        if c == 0 {
            continue;
        }
        let w = num::pow(loss.clone(), lost) * num::pow(placed.clone(), photons as usize - lost);
        total += w * BigRational::from_integer(BigInt::from(c));
    }
    total
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// `binom(N, n) (1-η)^(N-n) η^n` by a running product.
pub fn binomial_loss(eta: f64, n: u64, photons: u64) -> f64 {
    if n > photons {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..n {
        c *= (photons - i) as f64 / (i + 1) as f64;
    }
    c * eta.powi(n as i32) * (1.0 - eta).powi((photons - n) as i32)
}

/// Negative-binomial pair law by the ratio recursion
/// `p_{k+1} = p_k t (k + μ)/(k + 1)`, up to `kmax`.
pub fn pair_law(g: f64, mu: u32, kmax: usize) -> Vec<f64> {
    let t = g.tanh().powi(2);
    let mut p = vec![(1.0 - t).powi(mu as i32)];
    for k in 0..kmax {
        let next = p[k] * t * (k as f64 + mu as f64) / (k as f64 + 1.0);
        p.push(next);
    }
    p
}

/// Click distribution by adding photons one at a time to a Markov chain
/// over occupied bins.
pub fn click_rows(bins: u64, eta: f64, photons: usize) -> Vec<Vec<f64>> {
    let m = bins as f64;
    let mut rows = vec![vec![1.0]];
    for _ in 0..photons {
        let prev = rows.last().unwrap();
        let mut next = vec![0.0; (prev.len() + 1).min(bins as usize + 1)];
        for (n, &p) in prev.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let stay = (1.0 - eta) + eta * n as f64 / m;
            next[n] += p * stay;
            if (n as u64) < bins {
                next[n + 1] += p * eta * (m - n as f64) / m;
            }
        }
        rows.push(next);
    }
    rows
}

/// Smallest `K` with `P(K) < 1e-40` past the mode of the pair law.
pub fn cutoff(g: f64, mu: u32) -> usize {
    let t = g.tanh().powi(2);
    let mut p = (1.0 - t).powi(mu as i32);
    let mut k = 0usize;
    while p >= 1e-40 || (k as f64) < t * mu as f64 / (1.0 - t) {
        p *= t * (k as f64 + mu as f64) / (k as f64 + 1.0);
        k += 1;
    }
    k
}

/// Posterior mean and variance by direct summation over `k ≤ cutoff`.
pub fn direct_moments(bins: u64, eta: f64, g: f64, mu: u32, n_i: usize) -> (f64, f64) {
    let kmax = cutoff(g, mu).max(n_i + 40);
    let prior = pair_law(g, mu, kmax);
    let rows = click_rows(bins, eta, kmax);
    let w: Vec<f64> = (0..=kmax)
        .map(|k| if k < n_i { 0.0 } else { rows[k].get(n_i).copied().unwrap_or(0.0) * prior[k] })
        .collect();
    let z: f64 = w.iter().sum();
    let mean = w.iter().enumerate().map(|(k, w)| k as f64 * w).sum::<f64>() / z;
    let var = w.iter().enumerate().map(|(k, w)| (k as f64 - mean).powi(2) * w).sum::<f64>() / z;
    (mean, var)
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Stirling numbers of the second kind `S(k, n)` for `k ≤ kmax`.
pub fn stirling2(kmax: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; kmax + 1]; kmax + 1];
    s[0][0] = 1.0;
    for k in 1..=kmax {
        for n in 1..=k {
            s[k][n] = n as f64 * s[k - 1][n] + s[k - 1][n - 1];
        }
    }
    s
}

/// Exact `P(n|N)` for any bin count from surjection counting: `L` of the
/// photons are lost, the other `k = N - L` occupy exactly `n` bins with
/// probability `S(k, n) M (M-1)...(M-n+1) / M^k`.
pub fn urn_prob(bins: u64, eta: f64, n: usize, photons: usize) -> f64 {
    let s = stirling2(photons);
    let m = bins as f64;
    let mut total = 0.0;
    for k in n..=photons {
        let mut falling = 1.0;
        for i in 0..n {
            falling *= (m - i as f64) / m;
        }
        let occupancy = s[k][n] * falling / m.powi((k - n) as i32);
        total += binomial_loss(eta, k as u64, photons as u64) * occupancy;
    }
    total
}
