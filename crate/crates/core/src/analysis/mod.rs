//! Parameter sweeps behind the figure-level results: inversion of the ML
//! estimator, Q maps over `(g, η)`, and loss thresholds.

mod contour;
mod figures;

pub use contour::{contour_lines, ContourLine};
pub use figures::{contour_dataset, figure_data, qmap_dataset, uncertainty_ratio, FigureId, FigureParams};

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::cond_moments;
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::heralding::{mandel_q, Herald};
use crate::source::{SourceConfig, DEFAULT_EPSILON};

/// Click count that heralds a target ML estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlInversion {
    pub n_i: u64,
    pub herald_prob: f64,
    /// Every click count whose estimate equals the target.
    pub candidates: Vec<u64>,
}

/// Finds the click count whose ML estimate equals `target`, preferring the
/// most probable herald when several qualify. `None` when no click count
/// maps to the target.
pub fn invert_ml(det: &DetectorConfig, src: &SourceConfig, target: u64) -> Result<Option<MlInversion>> {
    let mut herald = Herald::new(*det, *src)?;
    invert_with(&mut herald, target)
}

fn invert_with(herald: &mut Herald, target: u64) -> Result<Option<MlInversion>> {
    // The estimate never falls below the click count, so larger counts
    // cannot reach the target.
    let last = target.min(herald.detector().bins());
    let mut best: Option<MlInversion> = None;
    let mut candidates = Vec::new();
    for n_i in 0..=last {
        let post = match herald.posterior(n_i) {
            Ok(p) => p,
            Err(Error::InfeasibleEvent(_)) => continue,
            Err(e) => return Err(e),
        };
        if post.mode() != target {
            continue;
        }
        candidates.push(n_i);
        let p = herald.herald_probability(n_i)?.value;
        if best.as_ref().is_none_or(|b| p > b.herald_prob) {
            best = Some(MlInversion {
                n_i,
                herald_prob: p,
                candidates: Vec::new(),
            });
        }
    }
    Ok(best.map(|b| MlInversion { candidates, ..b }))
}

/// Evenly spaced axis over `(lo, hi]`: `lo + (hi - lo)(i + 1)/steps`.
pub fn open_axis(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| lo + (hi - lo) * (i + 1) as f64 / steps as f64)
        .collect()
}

/// Default Q-map extent: `g ∈ (0, 1.5]`, `η ∈ (0, 1]`.
pub const DEFAULT_G_MAX: f64 = 1.5;
pub const DEFAULT_RESOLUTION: usize = 200;

/// Inputs of a Q-map sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMapSpec {
    pub stages: u32,
    pub mu: u32,
    pub target: u64,
    pub g_axis: Vec<f64>,
    pub eta_axis: Vec<f64>,
    pub eps: f64,
}

impl QMapSpec {
    /// `resolution × resolution` grid over the default extent.
    pub fn preset(stages: u32, mu: u32, target: u64, resolution: usize) -> Self {
        Self {
            stages,
            mu,
            target,
            g_axis: open_axis(0.0, DEFAULT_G_MAX, resolution),
            eta_axis: open_axis(0.0, 1.0, resolution),
            eps: DEFAULT_EPSILON,
        }
    }

    fn validate(&self) -> Result<()> {
        let increasing = |a: &[f64]| a.windows(2).all(|w| w[0] < w[1]);
        if self.g_axis.is_empty() || self.eta_axis.is_empty() {
            return Err(Error::invalid("axes", "axes must be non-empty"));
        }
        if !increasing(&self.g_axis) || !increasing(&self.eta_axis) {
            return Err(Error::invalid("axes", "axes must be strictly increasing"));
        }
        if !(self.g_axis[0] > 0.0 && *self.g_axis.last().unwrap() <= 2.0) {
            return Err(Error::invalid("g", "gain axis must lie in (0, 2]"));
        }
        if !(self.eta_axis[0] > 0.0 && *self.eta_axis.last().unwrap() <= 1.0) {
            return Err(Error::invalid("eta", "efficiency axis must lie in (0, 1]"));
        }
        if self.mu == 0 {
            return Err(Error::invalid("mu", "mode count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "message", rename_all = "snake_case")]
pub enum CellStatus {
    Feasible,
    /// No click count heralds the target (the gray regions).
    Infeasible,
    /// The cell could not be evaluated reliably.
    Error(String),
}

/// One `(g, η)` point of a Q map.
///
/// Feasible cells carry all of `n_i`, `q` and `herald_prob`; infeasible
/// cells carry none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMapCell {
    pub g: f64,
    pub eta: f64,
    pub status: CellStatus,
    pub n_i: Option<u64>,
    pub q: Option<f64>,
    pub herald_prob: Option<f64>,
    /// Number of click counts whose estimate equals the target.
    pub candidates: usize,
}

impl QMapCell {
    pub fn is_feasible(&self) -> bool {
        self.status == CellStatus::Feasible
    }

    fn blank(g: f64, eta: f64, status: CellStatus) -> Self {
        Self {
            g,
            eta,
            status,
            n_i: None,
            q: None,
            herald_prob: None,
            candidates: 0,
        }
    }
}

/// Q over a `(g, η)` grid at a fixed target estimate. `cells[i][j]` is at
/// `eta_axis[i]`, `g_axis[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMapGrid {
    pub target: u64,
    pub mu: u32,
    pub det_stages: u32,
    pub g_axis: Vec<f64>,
    pub eta_axis: Vec<f64>,
    pub cells: Vec<Vec<QMapCell>>,
}

impl QMapGrid {
    pub fn cell(&self, eta_index: usize, g_index: usize) -> &QMapCell {
        &self.cells[eta_index][g_index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &QMapCell> {
        self.cells.iter().flatten()
    }

    /// Herald probabilities, `None` outside the feasible region.
    pub fn herald_field(&self) -> Vec<Vec<Option<f64>>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(|c| c.herald_prob).collect())
            .collect()
    }
}

fn evaluate_cell(spec: &QMapSpec, g: f64, eta: f64) -> QMapCell {
    let run = || -> Result<QMapCell> {
        let det = DetectorConfig::with_eta(spec.stages, eta)?;
        let src = SourceConfig::new(g, spec.mu)?;
        let mut herald = Herald::with_epsilon(det, src, spec.eps)?;
        let Some(inv) = invert_with(&mut herald, spec.target)? else {
            return Ok(QMapCell::blank(g, eta, CellStatus::Infeasible));
        };
        let (mean, mut var) = cond_moments(&det, &src, inv.n_i)?;
        if var < 0.0 && var > -1e-12 * mean {
            var = 0.0;
        }
        let q = mandel_q(mean, var)?;
        if !(q >= -1.0) {
            return Err(Error::NumericalAccuracy(format!("Q = {q} below -1")));
        }
        Ok(QMapCell {
            g,
            eta,
            status: CellStatus::Feasible,
            n_i: Some(inv.n_i),
            q: Some(q),
            herald_prob: Some(inv.herald_prob),
            candidates: inv.candidates.len(),
        })
    };
    run().unwrap_or_else(|e| QMapCell::blank(g, eta, CellStatus::Error(e.to_string())))
}

/// Evaluates every cell of the grid in parallel. Cells that fail are marked
/// with [`CellStatus::Error`] and the sweep continues.
pub fn q_map(spec: &QMapSpec) -> Result<QMapGrid> {
    spec.validate()?;
    DetectorConfig::with_eta(spec.stages, 1.0)?;
    let width = spec.g_axis.len();
    let flat: Vec<QMapCell> = (0..spec.eta_axis.len() * width)
        .into_par_iter()
        .map(|idx| evaluate_cell(spec, spec.g_axis[idx % width], spec.eta_axis[idx / width]))
        .collect();
    let cells = flat.chunks(width).map(|c| c.to_vec()).collect();
    Ok(QMapGrid {
        target: spec.target,
        mu: spec.mu,
        det_stages: spec.stages,
        g_axis: spec.g_axis.clone(),
        eta_axis: spec.eta_axis.clone(),
        cells,
    })
}

/// Smallest efficiency giving a sub-Poissonian herald at a given rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaThreshold {
    pub eta: f64,
    /// Gain of the column where the minimum occurs.
    pub g: f64,
    /// Grid line at which the condition first holds in that column.
    pub eta_index: usize,
    pub g_index: usize,
}

fn qualifies(cell: &QMapCell, rate: f64) -> bool {
    matches!((cell.q, cell.herald_prob), (Some(q), Some(p)) if q < 0.0 && p >= rate)
}

/// Fraction of the way from `lo` to `hi` at which a linear interpolant
/// crosses `level`, when `lo` is on the wrong side.
fn crossing(lo: f64, hi: f64, level: f64) -> Option<f64> {
    if hi == lo {
        return None;
    }
    let f = (level - lo) / (hi - lo);
    (0.0..=1.0).contains(&f).then_some(f)
}

/// For each gain column, the first grid line (in increasing `η`) where the
/// cell has `herald_prob >= rate` and `Q < 0`, refined by linear
/// interpolation against the preceding line; the minimum over columns.
pub fn threshold_eta(map: &QMapGrid, rate: f64) -> Result<EtaThreshold> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::invalid("rate", format!("rate must lie in (0, 1), got {rate}")));
    }
    let mut best: Option<EtaThreshold> = None;
    for (gj, &g) in map.g_axis.iter().enumerate() {
        let Some(ei) = (0..map.eta_axis.len()).find(|&i| qualifies(map.cell(i, gj), rate)) else {
            continue;
        };
        let here = map.cell(ei, gj);
        let mut eta = map.eta_axis[ei];
        if ei > 0 {
            let prev = map.cell(ei - 1, gj);
            // Both constraints must hold; the later crossing binds.
            let mut frac: Option<f64> = None;
            if prev.n_i.is_some() && prev.n_i == here.n_i {
                if let (Some(q0), Some(q1)) = (prev.q, here.q) {
                    if q0 >= 0.0 {
                        frac = crossing(q0, q1, 0.0);
                    }
                }
                if let (Some(p0), Some(p1)) = (prev.herald_prob, here.herald_prob) {
                    if p0 < rate {
                        let f = crossing(p0, p1, rate);
                        frac = match (frac, f) {
                            (Some(a), Some(b)) => Some(a.max(b)),
                            (a, b) => a.or(b),
                        };
                    }
                }
            }
            if let Some(f) = frac {
                let lo = map.eta_axis[ei - 1];
                eta = lo + f * (map.eta_axis[ei] - lo);
            }
        }
        if best.is_none_or(|b| eta < b.eta) {
            best = Some(EtaThreshold {
                eta,
                g,
                eta_index: ei,
                g_index: gj,
            });
        }
    }
    best.ok_or_else(|| {
        Error::NotFound(format!("no cell heralds a sub-Poissonian state at rate >= {rate}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig3_inversion() {
        let det = DetectorConfig::with_eta(5, 0.66).unwrap();
        let src = SourceConfig::single_mode(1.0).unwrap();
        let inv = invert_ml(&det, &src, 5).unwrap().unwrap();
        assert_eq!(inv.n_i, 4);
    }

    #[test]
    fn near_ideal_inversion() {
        let det = DetectorConfig::with_eta(12, 1.0).unwrap();
        let src = SourceConfig::single_mode(0.5).unwrap();
        assert_eq!(invert_ml(&det, &src, 3).unwrap().unwrap().n_i, 3);
    }

    #[test]
    fn low_gain_inverts_to_the_target_itself() {
        // At negligible gain the posterior sits on n_s = n_i whatever the loss.
        let det = DetectorConfig::with_eta(5, 0.05).unwrap();
        let src = SourceConfig::single_mode(0.1).unwrap();
        let inv = invert_ml(&det, &src, 5).unwrap().unwrap();
        assert_eq!(inv.n_i, 5);
        assert!(inv.herald_prob > 0.0 && inv.herald_prob < 1e-15);
    }

    #[test]
    fn heavy_loss_high_gain_is_infeasible() {
        let det = DetectorConfig::with_eta(5, 0.05).unwrap();
        let src = SourceConfig::single_mode(1.5).unwrap();
        assert_eq!(invert_ml(&det, &src, 5).unwrap(), None);
    }

    #[test]
    fn open_axis_excludes_lower_end() {
        assert_eq!(open_axis(0.0, 1.0, 4), vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn small_map_contract() {
        let spec = QMapSpec::preset(5, 1, 5, 12);
        let map = q_map(&spec).unwrap();
        for c in map.iter() {
            match c.status {
                CellStatus::Feasible => {
                    assert!(c.q.unwrap() >= -1.0);
                    let p = c.herald_prob.unwrap();
                    assert!(p > 0.0 && p <= 1.0);
                }
                CellStatus::Infeasible => {
                    assert!(c.q.is_none() && c.n_i.is_none() && c.herald_prob.is_none())
                }
                CellStatus::Error(ref m) => panic!("cell error: {m}"),
            }
        }
    }

    #[test]
    fn threshold_rate_one_not_found() {
        let map = q_map(&QMapSpec::preset(5, 1, 5, 10)).unwrap();
        assert!(matches!(threshold_eta(&map, 0.999), Err(Error::NotFound(_))));
        assert!(threshold_eta(&map, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_axes() {
        let mut spec = QMapSpec::preset(5, 1, 5, 4);
        spec.g_axis = vec![0.5, 0.4];
        assert!(q_map(&spec).is_err());
        spec.g_axis = vec![0.5];
        spec.eta_axis = vec![0.0, 0.5];
        assert!(q_map(&spec).is_err());
    }
}
