//! Browser bindings: each operation takes plain numbers and returns a JSON
//! string for the page to plot.

use laborflow::complexity::{eci_eigen, reflections, synth_incidence, ReflectionOptions, SynthIncidenceSpec};
use laborflow::learn::{gp_fit_ml, gp_predict, GpConfig};
use laborflow::netdyn::{classify_ties, percolation_contrast, BdsiParams, PercolationResult};
use laborflow::netdyn::synth_nominations;
use laborflow::stats::spearman;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Reflections and eigenvector indices of a synthetic nested matrix.
pub fn complexity(
    n_places: usize,
    n_activities: usize,
    nestedness: f64,
    noise: f64,
    iterations: Option<usize>,
    seed: u64,
) -> Result<Value, String> {
    let spec = SynthIncidenceSpec { n_places, n_activities, nestedness, noise };
    let s = synth_incidence(&spec, seed).map_err(err)?;
    let (m, _) = s.binary.prune();
    let opts = ReflectionOptions { iterations, ..Default::default() };
    let r = reflections(&m, &opts).map_err(err)?;
    let refl = r.place_index.ok_or("reflections collapsed to a constant")?;
    let e = eci_eigen(&m).map_err(err)?;
    let cells: Vec<Vec<u8>> =
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| u8::from(m.get(i, j))).collect()).collect();
    Ok(json!({
        "places": e.places,
        "diversity": m.diversity(),
        "reflections": refl,
        "eigen": e.index,
        "iterations": r.iterations,
        "spearman": spearman(&refl, &e.index),
        "matrix": cells,
    }))
}

fn curves(r: &PercolationResult, horizon: usize) -> Value {
    let levels: Vec<Value> = r
        .traces
        .iter()
        .enumerate()
        .map(|(l, (f, _))| {
            let rows = &r.rows[l * (horizon + 1)..(l + 1) * (horizon + 1)];
            json!({
                "f": f,
                "removed": rows[0].removed,
                "mean": rows.iter().map(|x| x.mean_z).collect::<Vec<_>>(),
                "lo": rows.iter().map(|x| x.lo).collect::<Vec<_>>(),
                "hi": rows.iter().map(|x| x.hi).collect::<Vec<_>>(),
            })
        })
        .collect();
    Value::Array(levels)
}

/// Coverage curves when removing reciprocal ties versus the same number of
/// unilateral ties, on a synthetic nomination graph.
#[allow(clippy::too_many_arguments)]
pub fn percolation(
    nodes: usize,
    ties: usize,
    reciprocal: usize,
    p: [f64; 3],
    horizon: usize,
    f_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Value, String> {
    let g = synth_nominations(nodes, ties, reciprocal, (0.0, 7.0), seed).map_err(err)?;
    let tc = classify_ties(&g, 2.0);
    let params = BdsiParams { p_rec: p[0], p_plus: p[1], p_minus: p[2], horizon, seeds: vec![0] };
    let (rec, uni) = percolation_contrast(&tc, &params, f_grid, trials, seed).map_err(err)?;
    Ok(json!({
        "nodes": nodes,
        "reciprocal": curves(&rec, horizon),
        "unilateral": curves(&uni, horizon),
    }))
}

/// One-dimensional kriging fit on `(xs, ys)` evaluated at `grid`.
pub fn kriging(xs: &[f64], ys: &[f64], theta: Option<f64>, grid: &[f64]) -> Result<Value, String> {
    let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
    let cfg = GpConfig { theta: theta.map(|t| vec![t]), ..Default::default() };
    let model = gp_fit_ml(&x, ys, &cfg).map_err(err)?;
    let mut mean = Vec::with_capacity(grid.len());
    let mut sd = Vec::with_capacity(grid.len());
    for &g in grid {
        let (m, v) = gp_predict(&model, &[g]).map_err(err)?;
        mean.push(m);
        sd.push(v.max(0.0).sqrt());
    }
    Ok(json!({ "theta": model.theta[0], "mean": mean, "sd": sd }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = complexity)]
pub fn complexity_js(
    n_places: usize,
    n_activities: usize,
    nestedness: f64,
    noise: f64,
    iterations: i32,
    seed: u32,
) -> Result<String, JsValue> {
    let iterations = usize::try_from(iterations).ok().filter(|&n| n > 0);
    to_js(complexity(n_places, n_activities, nestedness, noise, iterations, seed.into()))
}

#[wasm_bindgen(js_name = percolation)]
#[allow(clippy::too_many_arguments)]
pub fn percolation_js(
    nodes: usize,
    ties: usize,
    reciprocal: usize,
    p_rec: f64,
    p_plus: f64,
    p_minus: f64,
    horizon: usize,
    f_grid: Vec<f64>,
    trials: usize,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(percolation(nodes, ties, reciprocal, [p_rec, p_plus, p_minus], horizon, &f_grid, trials, seed.into()))
}

#[wasm_bindgen(js_name = kriging)]
pub fn kriging_js(xs: Vec<f64>, ys: Vec<f64>, theta: f64, grid: Vec<f64>) -> Result<String, JsValue> {
    let theta = (theta > 0.0).then_some(theta);
    to_js(kriging(&xs, &ys, theta, &grid))
}
