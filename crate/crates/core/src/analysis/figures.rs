//! Numeric tables behind each figure, with the original parameters as
//! defaults.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{q_map, ContourLine, QMapGrid, QMapSpec, CellStatus, DEFAULT_RESOLUTION};
use crate::detector::{det_response_band, DetectorConfig};
use crate::error::{Error, Result};
use crate::heralding::Herald;
use crate::source::SourceConfig;
use crate::table::{Dataset, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    /// Detector response bands.
    Fig2,
    /// Heralded PMF against a Poisson reference.
    Fig3,
    /// Normalised ML uncertainty against click count.
    Fig4,
    /// Single-mode Q map.
    Fig5,
    /// Five-mode Q map.
    Fig6,
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fig2" => Ok(FigureId::Fig2),
            "fig3" => Ok(FigureId::Fig3),
            "fig4" => Ok(FigureId::Fig4),
            "fig5" => Ok(FigureId::Fig5),
            "fig6" => Ok(FigureId::Fig6),
            _ => Err(Error::UnknownFigure(s.to_string())),
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
        };
        f.write_str(s)
    }
}

/// Overridable figure parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureParams {
    pub stages: u32,
    /// Efficiencies for fig2 and fig4.
    pub etas: Vec<f64>,
    /// Gains for fig4.
    pub gains: Vec<f64>,
    /// Highest incident photon number in fig2.
    pub max_photons: u64,
    /// Highest click count in fig4.
    pub max_clicks: u64,
    /// fig3 working point.
    pub fig3_eta: f64,
    pub fig3_g: f64,
    pub fig3_n_i: u64,
    pub fig3_max_n: u64,
    /// Target estimate and grid size for the Q maps.
    pub target: u64,
    pub resolution: usize,
}

impl Default for FigureParams {
    fn default() -> Self {
        Self {
            stages: 5,
            etas: vec![1.0, 0.66, 0.33],
            gains: vec![0.75, 1.0],
            max_photons: 100,
            max_clicks: 10,
            fig3_eta: 0.66,
            fig3_g: 1.0,
            fig3_n_i: 4,
            fig3_max_n: 20,
            target: 5,
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

fn poisson(mean: f64, n: u64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * mean.ln() - mean - crate::numeric::ln_factorial(n)).exp()
}

fn fig2(p: &FigureParams) -> Result<Dataset> {
    let mut d = Dataset::new(&["eta", "N", "mean", "std_dev", "lower", "upper"]);
    for &eta in &p.etas {
        let det = DetectorConfig::with_eta(p.stages, eta)?;
        for b in det_response_band(&det, p.max_photons)? {
            d.push(vec![
                eta.into(),
                b.photons.into(),
                b.mean.into(),
                b.std_dev.into(),
                (b.mean - b.std_dev).into(),
                (b.mean + b.std_dev).into(),
            ]);
        }
    }
    Ok(d)
}

fn fig3(p: &FigureParams) -> Result<Dataset> {
    let det = DetectorConfig::with_eta(p.stages, p.fig3_eta)?;
    let src = SourceConfig::single_mode(p.fig3_g)?;
    let state = Herald::new(det, src)?.state(p.fig3_n_i)?;
    let lambda = state.ml_estimate as f64;
    let mut d = Dataset::new(&["n_s", "heralded", "poisson"]);
    for n in 0..=p.fig3_max_n.max(state.posterior.offset()) {
        d.push(vec![n.into(), state.posterior.get(n).into(), poisson(lambda, n).into()]);
    }
    Ok(d)
}

/// `sqrt(mse) / sqrt(n_ml)`; zero for an exact Fock herald, undefined when
/// the estimate is zero but the spread is not.
pub fn uncertainty_ratio(ml_mse: f64, ml_estimate: u64) -> Option<f64> {
    if ml_mse == 0.0 {
        Some(0.0)
    } else if ml_estimate == 0 {
        None
    } else {
        Some((ml_mse / ml_estimate as f64).sqrt())
    }
}

fn fig4(p: &FigureParams) -> Result<Dataset> {
    let mut d = Dataset::new(&["eta", "g", "n_i", "ml_estimate", "ml_mse", "ratio"]);
    for &eta in &p.etas {
        for &g in &p.gains {
            let det = DetectorConfig::with_eta(p.stages, eta)?;
            let mut herald = Herald::new(det, SourceConfig::single_mode(g)?)?;
            for n_i in 0..=p.max_clicks.min(det.bins()) {
                let s = herald.state(n_i)?;
                d.push(vec![
                    eta.into(),
                    g.into(),
                    n_i.into(),
                    s.ml_estimate.into(),
                    s.ml_mse.into(),
                    uncertainty_ratio(s.ml_mse, s.ml_estimate).into(),
                ]);
            }
        }
    }
    Ok(d)
}

/// One row per Q-map cell.
pub fn qmap_dataset(map: &QMapGrid) -> Dataset {
    let mut d = Dataset::new(&["g", "eta", "status", "n_i", "q", "herald_prob", "candidates", "message"]);
    for c in map.iter() {
        let (status, message) = match &c.status {
            CellStatus::Feasible => ("feasible", Value::Null),
            CellStatus::Infeasible => ("infeasible", Value::Null),
            CellStatus::Error(m) => ("error", Value::from(m.as_str())),
        };
        d.push(vec![
            c.g.into(),
            c.eta.into(),
            status.into(),
            c.n_i.into(),
            c.q.into(),
            c.herald_prob.into(),
            (c.candidates as u64).into(),
            message,
        ]);
    }
    d
}

/// One row per contour vertex.
pub fn contour_dataset(lines: &[ContourLine]) -> Dataset {
    let mut d = Dataset::new(&["level", "line", "vertex", "g", "eta", "closed"]);
    for (k, line) in lines.iter().enumerate() {
        for (v, &(g, eta)) in line.points.iter().enumerate() {
            d.push(vec![
                line.level.into(),
                (k as u64).into(),
                (v as u64).into(),
                g.into(),
                eta.into(),
                line.closed.into(),
            ]);
        }
    }
    d
}

/// The numeric table behind one figure.
pub fn figure_data(which: FigureId, params: &FigureParams) -> Result<Dataset> {
    match which {
        FigureId::Fig2 => fig2(params),
        FigureId::Fig3 => fig3(params),
        FigureId::Fig4 => fig4(params),
        FigureId::Fig5 | FigureId::Fig6 => {
            let mu = if which == FigureId::Fig5 { 1 } else { 5 };
            let spec = QMapSpec::preset(params.stages, mu, params.target, params.resolution);
            Ok(qmap_dataset(&q_map(&spec)?))
        }
    }
}
