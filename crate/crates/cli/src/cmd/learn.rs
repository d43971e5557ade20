use std::path::PathBuf;

use laborflow::learn::{
    first_differences, gp_fit_ml, gp_predict, kfold_cv, logit_fit, logit_simulate, ols_fit, som_map, som_train,
    CvModel, Dataset, FitSummary, GpBasis, GpConfig, Metric, RegressOptions, Scenario, SomConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::required;
use crate::error::{input, Result};
use crate::output::{num, Ctx, Outputs};
use crate::table::{self, Selection};

fn load(ctx: &mut Ctx, path: &Option<PathBuf>, target: Option<&str>, features: &Option<Vec<String>>) -> Result<Selection> {
    let t = table::parse(&ctx.read(required(path, "input")?)?)?;
    t.select(target, features.as_deref(), None)
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SomArgs {
    /// Table CSV: id column then numeric columns.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Columns to use [default: all].
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub alpha_start: Option<f64>,
    #[arg(long)]
    pub alpha_end: Option<f64>,
    #[arg(long)]
    pub radius_start: Option<f64>,
    #[arg(long)]
    pub radius_end: Option<f64>,
}

pub fn som(a: &SomArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let sel = load(ctx, &a.input, None, &a.features)?;
    let d = SomConfig::default();
    let cfg = SomConfig {
        width: a.width.unwrap_or(d.width),
        height: a.height.unwrap_or(d.height),
        epochs: a.epochs.unwrap_or(d.epochs),
        alpha_start: a.alpha_start.unwrap_or(d.alpha_start),
        alpha_end: a.alpha_end.unwrap_or(d.alpha_end),
        radius_start: a.radius_start.or(d.radius_start),
        radius_end: a.radius_end.unwrap_or(d.radius_end),
    };
    let data = sel.rows();
    let grid = som_train(&data, &cfg, ctx.seed)?;
    let mut out = Outputs::default();
    let mut header = vec!["unit", "col", "row"];
    header.extend(sel.features.iter().map(String::as_str));
    out.csv("codebooks.csv", &header, |w| {
        for (u, cb) in grid.codebooks.iter().enumerate() {
            let (c, r) = grid.position(u);
            let mut rec = vec![u.to_string(), num(c), num(r)];
            rec.extend(cb.iter().map(|v| num(*v)));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    let units = data.iter().map(|x| som_map(&grid, x)).collect::<laborflow::Result<Vec<_>>>()?;
    out.csv("assignments.csv", &["unit_id", "unit"], |w| {
        for (id, u) in sel.ids.iter().zip(&units) {
            w.write_record([id.clone(), u.to_string()])?;
        }
        Ok(())
    })?;
    out.csv("quantization_error.csv", &["epoch", "qe"], |w| {
        for (e, q) in grid.qe_history.iter().enumerate() {
            w.write_record([(e + 1).to_string(), num(*q)])?;
        }
        Ok(())
    })?;
    out.note("samples", data.len());
    out.note("dropped_rows", sel.dropped);
    out.note("quantization_error", grid.quantization_error(&data)?);
    Ok(out)
}

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Constant,
    Linear,
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpArgs {
    /// Training table CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Fixed correlation parameters, one per feature [default: likelihood search].
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    /// Starting nugget [default: 1e-10].
    #[arg(long)]
    pub nugget: Option<f64>,
    /// Regression basis [default: constant].
    #[arg(long, value_enum)]
    pub basis: Option<Basis>,
    /// Table of points to predict [default: the training points].
    #[arg(long)]
    pub predict: Option<PathBuf>,
}

fn gp_config(theta: &Option<Vec<f64>>, nugget: Option<f64>, basis: Option<Basis>) -> GpConfig {
    GpConfig {
        theta: theta.clone(),
        nugget: nugget.unwrap_or(GpConfig::default().nugget),
        basis: match basis.unwrap_or(Basis::Constant) {
            Basis::Constant => GpBasis::Constant,
            Basis::Linear => GpBasis::Linear,
        },
        ..GpConfig::default()
    }
}

pub fn gp(a: &GpArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let target = required(&a.target, "target")?;
    let sel = load(ctx, &a.input, Some(target), &a.features)?;
    let model = gp_fit_ml(&sel.rows(), &sel.y, &gp_config(&a.theta, a.nugget, a.basis))?;
    let (ids, points) = match &a.predict {
        Some(p) => {
            let t = table::parse(&ctx.read(p)?)?;
            let s = t.select(None, Some(&sel.features), None)?;
            (s.ids.clone(), s.rows())
        }
        None => (sel.ids.clone(), sel.rows()),
    };
    let preds = points.iter().map(|x| gp_predict(&model, x)).collect::<laborflow::Result<Vec<_>>>()?;
    let mut out = Outputs::default();
    out.csv("predictions.csv", &["unit_id", "mean", "variance"], |w| {
        for (id, (m, v)) in ids.iter().zip(&preds) {
            w.write_record([id.clone(), num(*m), num(*v)])?;
        }
        Ok(())
    })?;
    out.json(
        "model.json",
        &json!({
            "features": sel.features,
            "theta": model.theta,
            "nugget": model.nugget,
            "beta": model.beta.as_slice(),
            "sigma2": model.sigma2,
            "log_likelihood": model.log_likelihood,
            "n": sel.y.len(),
        }),
    )?;
    out.note("theta", &model.theta);
    out.note("nugget", model.nugget);
    out.note("dropped_rows", sel.dropped);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Ols,
    Logit,
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Model [default: ols].
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Column of row weights.
    #[arg(long)]
    pub weights: Option<String>,
    /// Include an intercept [default: true].
    #[arg(long)]
    pub intercept: Option<bool>,
}

fn fit(model: Model, sel: &Selection, intercept: bool) -> Result<FitSummary> {
    let opts = RegressOptions { intercept, weights: sel.weights.clone() };
    Ok(match model {
        Model::Ols => ols_fit(&sel.features, &sel.x, &sel.y, &opts)?,
        Model::Logit => logit_fit(&sel.features, &sel.x, &sel.y, &opts)?,
    })
}

fn coefficients(out: &mut Outputs, f: &FitSummary) -> Result<()> {
    out.csv("coefficients.csv", &["term", "coef", "se", "stat", "p_value"], |w| {
        for k in 0..f.coef.len() {
            w.write_record([f.names[k].clone(), num(f.coef[k]), num(f.se[k]), num(f.stat[k]), num(f.p_value[k])])?;
        }
        Ok(())
    })
}

pub fn regress(a: &RegressArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let target = required(&a.target, "target")?;
    let t = table::parse(&ctx.read(required(&a.input, "input")?)?)?;
    let sel = t.select(Some(target), a.features.as_deref(), a.weights.as_deref())?;
    let f = fit(a.model.unwrap_or(Model::Ols), &sel, a.intercept.unwrap_or(true))?;
    let mut out = Outputs::default();
    coefficients(&mut out, &f)?;
    out.json("fit.json", &f)?;
    out.note("n", f.n);
    out.note("r2", f.r2);
    out.note("bic", f.bic);
    out.note("dropped_rows", sel.dropped);
    Ok(out)
}

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvModelArg {
    Ols,
    Logit,
    Gp,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricArg {
    R2,
    Rmse,
    CvRmse,
    Pearson,
    Auc,
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Model [default: ols].
    #[arg(long, value_enum)]
    pub model: Option<CvModelArg>,
    /// Folds [default: 5].
    #[arg(long)]
    pub k: Option<usize>,
    /// Fold metric [default: r2].
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// Fixed GP correlation parameters.
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    #[arg(long)]
    pub nugget: Option<f64>,
    #[arg(long, value_enum)]
    pub basis: Option<Basis>,
}

pub fn cv(a: &CvArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let target = required(&a.target, "target")?;
    let sel = load(ctx, &a.input, Some(target), &a.features)?;
    let data = Dataset::new(sel.features.clone(), sel.x.clone(), sel.y.clone())?;
    let model = match a.model.unwrap_or(CvModelArg::Ols) {
        CvModelArg::Ols => CvModel::Ols,
        CvModelArg::Logit => CvModel::Logit,
        CvModelArg::Gp => CvModel::Gp(gp_config(&a.theta, a.nugget, a.basis)),
    };
    let metric = match a.metric.unwrap_or(MetricArg::R2) {
        MetricArg::R2 => Metric::R2,
        MetricArg::Rmse => Metric::Rmse,
        MetricArg::CvRmse => Metric::CvRmse,
        MetricArg::Pearson => Metric::Pearson,
        MetricArg::Auc => Metric::Auc,
    };
    let res = kfold_cv(&data, &model, a.k.unwrap_or(5), ctx.seed, metric)?;
    let mut out = Outputs::default();
    out.csv("folds.csv", &["fold", "n_test", "value"], |w| {
        for (f, (idx, v)) in res.folds.iter().zip(&res.fold_metrics).enumerate() {
            w.write_record([f.to_string(), idx.len().to_string(), num(*v)])?;
        }
        Ok(())
    })?;
    out.json("cv.json", &res)?;
    out.note("mean", res.mean);
    out.note("ci", [res.ci_lo, res.ci_hi]);
    out.note("dropped_rows", sel.dropped);
    Ok(out)
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Model [default: logit].
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Scenario `name=value,...`; unset covariates take their sample mean.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub scenario: Option<Vec<String>>,
    /// Baseline scenario for a first difference.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lo: Option<Vec<String>>,
    /// Comparison scenario for a first difference.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub hi: Option<Vec<String>>,
    /// Draws [default: 1000].
    #[arg(long)]
    pub n_sims: Option<usize>,
    /// Interval is the alpha/2 and 1-alpha/2 percentiles [default: 0.05].
    #[arg(long)]
    pub alpha: Option<f64>,
}

fn scenario(sel: &Selection, spec: &[String]) -> Result<Scenario> {
    let mut s: Scenario = sel
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| (f.clone(), sel.x.column(j).mean()))
        .collect();
    for kv in spec {
        let (k, v) = kv.split_once('=').ok_or_else(|| input(format!("scenario entry {kv:?} is not name=value")))?;
        if !s.contains_key(k) {
            return Err(input(format!("scenario names unknown covariate {k:?}")));
        }
        let v: f64 = v.parse().map_err(|_| input(format!("scenario value {v:?} is not a number")))?;
        s.insert(k.to_string(), v);
    }
    Ok(s)
}

pub fn simulate(a: &SimulateArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let target = required(&a.target, "target")?;
    let sel = load(ctx, &a.input, Some(target), &a.features)?;
    let model = a.model.unwrap_or(Model::Logit);
    let f = fit(model, &sel, true)?;
    let n_sims = a.n_sims.unwrap_or(1000);
    let alpha = a.alpha.unwrap_or(0.05);
    let mut result = serde_json::Map::new();
    let mut out = Outputs::default();
    if let Some(spec) = &a.scenario {
        if model != Model::Logit {
            return Err(input("--scenario simulation needs --model logit"));
        }
        let s = scenario(&sel, spec)?;
        let sim = logit_simulate(&f, &s, n_sims, ctx.seed)?;
        out.note("expected_value", sim.expected_value);
        result.insert("scenario".into(), json!(s));
        result.insert("simulated".into(), json!(sim));
    }
    match (&a.lo, &a.hi) {
        (Some(lo), Some(hi)) => {
            let (lo, hi) = (scenario(&sel, lo)?, scenario(&sel, hi)?);
            let fd = first_differences(&f, &lo, &hi, n_sims, ctx.seed, alpha)?;
            out.note("first_difference", fd.estimate);
            result.insert("lo".into(), json!(lo));
            result.insert("hi".into(), json!(hi));
            result.insert("first_difference".into(), json!(fd));
        }
        (None, None) => {}
        _ => return Err(input("first differences need both --lo and --hi")),
    }
    if result.is_empty() {
        return Err(input("nothing to simulate; pass --scenario or --lo/--hi"));
    }
    result.insert("fit".into(), json!(f));
    coefficients(&mut out, &f)?;
    out.json("simulation.json", &result)?;
    out.note("dropped_rows", sel.dropped);
    Ok(out)
}
