//! Truncated probability mass functions over photon number.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// PMF over `offset, offset + 1, ...` with an upper bound on the mass that
/// truncation dropped beyond the last stored index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pmf {
    offset: u64,
    masses: Vec<f64>,
    tail_bound: f64,
}

impl Pmf {
    pub fn new(offset: u64, masses: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::invalid("masses", "a PMF needs at least one entry"));
        }
        if let Some(bad) = masses.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid("masses", format!("mass {bad} is not a probability")));
        }
        if !(tail_bound.is_finite() && tail_bound >= 0.0) {
            return Err(Error::invalid("tail_bound", format!("{tail_bound} is not a valid bound")));
        }
        Ok(Self {
            offset,
            masses,
            tail_bound,
        })
    }

    /// A point mass.
    pub fn delta(at: u64) -> Self {
        Self {
            offset: at,
            masses: vec![1.0],
            tail_bound: 0.0,
        }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Largest stored index.
    pub fn last(&self) -> u64 {
        self.offset + self.masses.len() as u64 - 1
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn get(&self, n: u64) -> f64 {
        n.checked_sub(self.offset)
            .and_then(|i| self.masses.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    /// `(n, P(n))` pairs over the stored support.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.offset + i as u64, p))
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.masses.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.iter().map(|(n, p)| n as f64 * p))
    }

    /// Σ (n - center)^2 P(n).
    pub fn second_moment_about(&self, center: f64) -> f64 {
        compensated_sum(self.iter().map(|(n, p)| {
            let d = n as f64 - center;
            d * d * p
        }))
    }

    pub fn variance(&self) -> f64 {
        self.second_moment_about(self.mean())
    }

    /// Index of the largest mass; ties go to the smallest index.
    pub fn mode(&self) -> u64 {
        let mut best = 0;
        for (i, &p) in self.masses.iter().enumerate() {
            if p > self.masses[best] {
                best = i;
            }
        }
        self.offset + best as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_small_pmf() {
        let p = Pmf::new(2, vec![0.25, 0.5, 0.25], 0.0).unwrap();
        assert_eq!(p.mean(), 3.0);
        assert_eq!(p.variance(), 0.5);
        assert_eq!(p.get(1), 0.0);
        assert_eq!(p.get(3), 0.5);
        assert_eq!(p.last(), 4);
    }

    #[test]
    fn mode_ties_break_low() {
        let p = Pmf::new(4, vec![0.4, 0.4, 0.2], 0.0).unwrap();
        assert_eq!(p.mode(), 4);
    }

    #[test]
    fn rejects_negative_mass() {
        assert!(Pmf::new(0, vec![0.5, -0.1], 0.0).is_err());
        assert!(Pmf::new(0, vec![], 0.0).is_err());
    }

    #[test]
    fn delta_has_no_spread() {
        let d = Pmf::delta(7);
        assert_eq!(d.mean(), 7.0);
        assert_eq!(d.variance(), 0.0);
    }
}
