use herald_core::analysis::{
    contour_dataset, contour_lines, figure_data, open_axis, q_map, qmap_dataset, threshold_eta, uncertainty_ratio,
    CellStatus, FigureParams, QMapSpec,
};
use herald_core::closed_form::{cond_moments, relative_difference};
use herald_core::detector::{det_prob, det_response_band};
use herald_core::exact::{det_prob_exact_f64, MAX_EXACT_BINS, MAX_EXACT_PHOTONS};
use herald_core::mc::{compare_detection, compare_herald, fraction_within, max_abs_z, McConfig};
use herald_core::table::{pmf_dataset, Dataset};
use herald_core::{DetectorConfig, Herald, Result, SourceConfig};
use serde_json::{json, Map, Value as Json};

use crate::args::{
    Command, DetectorResponseArgs, FigureArgs, GridArgs, HeraldArgs, McArgs, QmapArgs, SourceArgs, StagesArgs,
    ThresholdArgs,
};

/// Command result: metadata specific to the command plus the table.
pub struct Outcome {
    pub params: Json,
    pub eps: Option<f64>,
    pub tail_bounds: Json,
    pub seed: Option<u64>,
    pub extra: Map<String, Json>,
    pub data: Dataset,
}

impl Outcome {
    fn new(params: Json, data: Dataset) -> Self {
        Self {
            params,
            eps: None,
            tail_bounds: json!({}),
            seed: None,
            extra: Map::new(),
            data,
        }
    }
}

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::DetectorResponse(a) => detector_response(a),
        Command::Posterior(a) => posterior(a),
        Command::HeraldStats(a) => herald_stats(a),
        Command::Qmap(a) => qmap(a),
        Command::Figure(a) => figure(a),
        Command::McValidate(a) => mc_validate(a),
        Command::Thresholds(a) => thresholds(a),
    }
}

fn detector_params(det: &DetectorConfig) -> Map<String, Json> {
    let eff = det.efficiency();
    let mut m = Map::new();
    m.insert("m".into(), json!(det.stages()));
    m.insert("M".into(), json!(det.bins()));
    m.insert("eta".into(), json!(eff.value()));
    m.insert("eta_ratio".into(), eff.ratio().map_or(Json::Null, |_| json!(eff.to_string())));
    m
}

fn stages_params(s: &StagesArgs) -> Result<Map<String, Json>> {
    let stages = s.stages()?;
    let mut m = Map::new();
    m.insert("m".into(), json!(stages));
    m.insert("M".into(), json!(1u64 << stages));
    Ok(m)
}

fn source(s: &SourceArgs) -> Result<SourceConfig> {
    SourceConfig::new(s.g, s.mu)
}

fn add_source(m: &mut Map<String, Json>, s: &SourceArgs) {
    m.insert("g".into(), json!(s.g));
    m.insert("mu".into(), json!(s.mu));
    m.insert("eps".into(), json!(s.eps));
}

fn detector_response(a: &DetectorResponseArgs) -> Result<Outcome> {
    let det = a.stages.detector(a.eta)?;
    let mut params = detector_params(&det);
    let data = match a.photons {
        Some(photons) => {
            params.insert("N".into(), json!(photons));
            let exact = det.efficiency().ratio().is_some() && det.bins() <= MAX_EXACT_BINS && photons <= MAX_EXACT_PHOTONS;
            let mut d = if exact {
                Dataset::new(&["n", "p", "p_exact", "abs_diff"])
            } else {
                Dataset::new(&["n", "p"])
            };
            for n in 0..=photons.min(det.bins()) {
                let p = det_prob(&det, n, photons)?;
                if exact {
                    let e = det_prob_exact_f64(&det, n, photons)?;
                    d.push(vec![n.into(), p.into(), e.into(), (p - e).abs().into()]);
                } else {
                    d.push(vec![n.into(), p.into()]);
                }
            }
            d
        }
        None => {
            params.insert("n_max".into(), json!(a.n_max));
            let mut d = Dataset::new(&["N", "mean", "std_dev", "lower", "upper"]);
            for b in det_response_band(&det, a.n_max)? {
                d.push(vec![
                    b.photons.into(),
                    b.mean.into(),
                    b.std_dev.into(),
                    (b.mean - b.std_dev).into(),
                    (b.mean + b.std_dev).into(),
                ]);
            }
            d
        }
    };
    Ok(Outcome::new(Json::Object(params), data))
}

fn herald_setup(a: &HeraldArgs) -> Result<(Herald, Map<String, Json>)> {
    let det = a.stages.detector(a.eta)?;
    let src = source(&a.source)?;
    let mut params = detector_params(&det);
    add_source(&mut params, &a.source);
    params.insert("n_i".into(), json!(a.n_i));
    Ok((Herald::with_epsilon(det, src, a.source.eps)?, params))
}

fn posterior(a: &HeraldArgs) -> Result<Outcome> {
    let (mut herald, params) = herald_setup(a)?;
    let state = herald.state(a.n_i)?;
    let mut data = pmf_dataset(&state.posterior);
    data.columns[0] = "n_s".into();
    let mut out = Outcome::new(Json::Object(params), data);
    out.eps = Some(a.source.eps);
    out.tail_bounds = json!({
        "prior": state.herald_tail_bound,
        "posterior": state.posterior.tail_bound(),
    });
    out.extra.insert("herald_prob".into(), json!(state.herald_prob));
    out.extra.insert("ml_estimate".into(), json!(state.ml_estimate));
    Ok(out)
}

fn herald_stats(a: &HeraldArgs) -> Result<Outcome> {
    let (mut herald, params) = herald_setup(a)?;
    let s = herald.state(a.n_i)?;
    let (closed_mean, closed_var) = cond_moments(herald.detector(), herald.source(), a.n_i)?;
    let mut data = Dataset::new(&[
        "n_i",
        "ml_estimate",
        "ml_mse",
        "uncertainty_ratio",
        "cond_mean",
        "cond_var",
        "q",
        "herald_prob",
        "closed_mean",
        "closed_var",
        "mean_rel_diff",
        "var_rel_diff",
    ]);
    data.push(vec![
        s.n_i.into(),
        s.ml_estimate.into(),
        s.ml_mse.into(),
        uncertainty_ratio(s.ml_mse, s.ml_estimate).into(),
        s.cond_mean.into(),
        s.cond_var.into(),
        s.q.into(),
        s.herald_prob.into(),
        closed_mean.into(),
        closed_var.into(),
        relative_difference(closed_mean, s.cond_mean).into(),
        relative_difference(closed_var, s.cond_var).into(),
    ]);
    let mut out = Outcome::new(Json::Object(params), data);
    out.eps = Some(a.source.eps);
    out.tail_bounds = json!({
        "prior": s.herald_tail_bound,
        "posterior": s.posterior.tail_bound(),
    });
    Ok(out)
}

fn grid_spec(stages: u32, mu: u32, target: u64, g: &GridArgs) -> QMapSpec {
    QMapSpec {
        stages,
        mu,
        target,
        g_axis: open_axis(0.0, g.g_max, g.resolution),
        eta_axis: open_axis(0.0, 1.0, g.resolution),
        eps: g.eps,
    }
}

fn grid_params(m: &mut Map<String, Json>, mu: u32, target: u64, g: &GridArgs) {
    m.insert("mu".into(), json!(mu));
    m.insert("target".into(), json!(target));
    m.insert("resolution".into(), json!(g.resolution));
    m.insert("g_max".into(), json!(g.g_max));
    m.insert("eps".into(), json!(g.eps));
}

fn qmap(a: &QmapArgs) -> Result<Outcome> {
    let spec = grid_spec(a.stages.stages()?, a.mu, a.target, &a.grid);
    let mut params = stages_params(&a.stages)?;
    grid_params(&mut params, a.mu, a.target, &a.grid);
    let map = q_map(&spec)?;
    let count = |f: fn(&CellStatus) -> bool| map.iter().filter(|c| f(&c.status)).count();
    let feasible = count(|s| *s == CellStatus::Feasible);
    let infeasible = count(|s| *s == CellStatus::Infeasible);
    let errors = count(|s| matches!(s, CellStatus::Error(_)));
    let data = if a.contours.is_empty() {
        qmap_dataset(&map)
    } else {
        params.insert("contours".into(), json!(a.contours));
        let field = map.herald_field();
        let lines: Vec<_> = a
            .contours
            .iter()
            .flat_map(|&level| contour_lines(&map.g_axis, &map.eta_axis, &field, level))
            .collect();
        contour_dataset(&lines)
    };
    let mut out = Outcome::new(Json::Object(params), data);
    out.eps = Some(a.grid.eps);
    out.extra.insert(
        "cells".into(),
        json!({"feasible": feasible, "infeasible": infeasible, "error": errors}),
    );
    Ok(out)
}

fn figure(a: &FigureArgs) -> Result<Outcome> {
    let mut p = FigureParams::default();
    if let Some(m) = a.stages {
        p.stages = m;
    }
    if !a.etas.is_empty() {
        p.etas = a.etas.clone();
    }
    if !a.gains.is_empty() {
        p.gains = a.gains.clone();
    }
    p.max_photons = a.max_photons.unwrap_or(p.max_photons);
    p.max_clicks = a.max_clicks.unwrap_or(p.max_clicks);
    p.fig3_eta = a.eta.unwrap_or(p.fig3_eta);
    p.fig3_g = a.g.unwrap_or(p.fig3_g);
    p.fig3_n_i = a.n_i.unwrap_or(p.fig3_n_i);
    p.target = a.target.unwrap_or(p.target);
    p.resolution = a.resolution.unwrap_or(p.resolution);
    let data = figure_data(a.id, &p)?;
    let mut params = Map::new();
    params.insert("id".into(), json!(a.id.to_string()));
    if let Json::Object(fields) = serde_json::to_value(&p).expect("figure parameters serialize") {
        params.extend(fields);
    }
    Ok(Outcome::new(Json::Object(params), data))
}

fn mc_validate(a: &McArgs) -> Result<Outcome> {
    let det = a.stages.detector(a.eta)?;
    let src = source(&a.source)?;
    let cfg = McConfig::new(a.trials, a.seed, det, src)?;
    let mut params = detector_params(&det);
    add_source(&mut params, &a.source);
    params.insert("trials".into(), json!(a.trials));
    params.insert("seed".into(), json!(a.seed));
    let mut extra = Map::new();
    let checks = match a.photons {
        Some(photons) => {
            params.insert("photons".into(), json!(photons));
            compare_detection(&cfg, photons)?
        }
        None => {
            params.insert("n_i".into(), json!(a.n_i));
            params.insert("min_kept".into(), json!(a.min_kept));
            let (sample, checks) = compare_herald(&cfg, a.source.eps, a.n_i, a.min_kept)?;
            extra.insert("kept".into(), json!(sample.kept));
            checks
        }
    };
    extra.insert("within_3_sigma".into(), json!(fraction_within(&checks, 3.0)));
    extra.insert("within_4_sigma".into(), json!(fraction_within(&checks, 4.0)));
    extra.insert("max_abs_z".into(), json!(max_abs_z(&checks)));
    let mut data = Dataset::new(&["quantity", "index", "analytic", "empirical", "std_error", "z"]);
    for c in &checks {
        data.push(vec![
            c.quantity.into(),
            c.index.into(),
            c.analytic.into(),
            c.empirical.into(),
            c.std_error.into(),
            c.z.into(),
        ]);
    }
    let mut out = Outcome::new(Json::Object(params), data);
    out.eps = a.photons.is_none().then_some(a.source.eps);
    out.seed = Some(a.seed);
    out.extra = extra;
    Ok(out)
}

fn thresholds(a: &ThresholdArgs) -> Result<Outcome> {
    let spec = grid_spec(a.stages.stages()?, a.mu, a.target, &a.grid);
    let mut params = stages_params(&a.stages)?;
    grid_params(&mut params, a.mu, a.target, &a.grid);
    params.insert("rate".into(), json!(a.rate));
    let map = q_map(&spec)?;
    let t = threshold_eta(&map, a.rate)?;
    let mut data = Dataset::new(&["eta_threshold", "g", "eta_grid", "g_index", "eta_index"]);
    data.push(vec![
        t.eta.into(),
        t.g.into(),
        map.eta_axis[t.eta_index].into(),
        (t.g_index as u64).into(),
        (t.eta_index as u64).into(),
    ]);
    let mut out = Outcome::new(Json::Object(params), data);
    out.eps = Some(a.grid.eps);
    Ok(out)
}

