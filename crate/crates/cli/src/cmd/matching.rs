use std::path::PathBuf;

use laborflow::io::read_panel;
use laborflow::matching::{
    cem_match, eci_levels, fsatt, stratum_key, Closed, CoarseningSpec, FsattOptions, Treatment, VariableBins,
    ECI_LEVEL_NAMES,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::required;
use crate::error::{input, Result};
use crate::output::{num, Ctx, Outputs};

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    /// Panel CSV `unit_id,period_start,period_end,outcome,<covariates...>`.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Covariate defining the treatment level [default: eci].
    #[arg(long)]
    pub treatment: Option<String>,
    /// Level cutpoints, lowest edge first [default: -2.8,-0.6,0.4,2.4].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub cutpoints: Option<Vec<f64>>,
    /// Level names, one per bin [default: low,medium,high].
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<String>>,
    /// Level whose units keep weight 1 [default: the last level].
    #[arg(long)]
    pub baseline: Option<String>,
    /// Coarsening, config only: a list of `{variable, cutpoints, closed}`
    /// [default: growth controls].
    #[arg(skip)]
    pub coarsening: Option<Vec<VariableBins>>,
    /// Estimate level contrasts on the matched sample [default: true].
    #[arg(long)]
    pub fsatt: Option<bool>,
    /// Regression covariates [default: the coarsened variables].
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Weight the regression by matching weights [default: true].
    #[arg(long)]
    pub weighted: Option<bool>,
    /// Omitted level in the regression [default: the first level].
    #[arg(long)]
    pub reference: Option<String>,
    /// Interval level [default: 0.95].
    #[arg(long)]
    pub level: Option<f64>,
}

fn level_of(t: &Treatment, name: &Option<String>, default: usize) -> Result<usize> {
    match name {
        None => Ok(default),
        Some(n) => t.level_index(n).ok_or_else(|| input(format!("no treatment level {n:?}"))),
    }
}

pub fn run(a: &Args, ctx: &mut Ctx) -> Result<Outputs> {
    let rows = read_panel(ctx.read(required(&a.panel, "panel")?)?.as_slice())?;
    let variable = a.treatment.clone().unwrap_or_else(|| "eci".into());
    let bins = match &a.cutpoints {
        Some(c) => VariableBins::new(variable, c.clone(), Closed::Left)?,
        None => VariableBins { variable, ..eci_levels() },
    };
    let names: Vec<String> = match &a.levels {
        Some(l) => l.clone(),
        None if bins.bins() == ECI_LEVEL_NAMES.len() => ECI_LEVEL_NAMES.iter().map(|s| s.to_string()).collect(),
        None => (0..bins.bins()).map(|k| format!("level{k}")).collect(),
    };
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let treatment = Treatment::from_bins(&rows, &bins, &name_refs)?;
    let spec = match &a.coarsening {
        Some(v) => CoarseningSpec::new(v.clone())?,
        None => CoarseningSpec::growth_controls(),
    };
    let baseline = level_of(&treatment, &a.baseline, treatment.levels.len() - 1)?;
    let m = cem_match(&rows, &treatment, &spec, baseline)?;

    let mut out = Outputs::default();
    out.csv("match.csv", &["unit_id", "period_start", "level", "stratum", "matched", "weight"], |w| {
        for (i, r) in rows.iter().enumerate() {
            w.write_record([
                r.unit_id.clone(),
                r.period_start.to_string(),
                treatment.assignment[i].map_or(String::new(), |l| treatment.levels[l].clone()),
                m.stratum[i].as_ref().map_or(String::new(), stratum_key),
                m.matched[i].to_string(),
                num(m.weights[i]),
            ])?;
        }
        Ok(())
    })?;
    let excluded: Vec<_> = m
        .excluded
        .iter()
        .map(|(i, why)| json!({"unit_id": rows[*i].unit_id, "period_start": rows[*i].period_start, "reason": why}))
        .collect();
    out.json(
        "imbalance.json",
        &json!({
            "levels": m.levels,
            "baseline": m.levels[baseline],
            "l1_before": m.l1_before,
            "l1_after": m.l1_after,
            "stratum_counts": m.stratum_counts,
            "matched_counts": m.matched_counts,
            "excluded": excluded,
        }),
    )?;
    out.note("rows", rows.len());
    out.note("matched", m.n_matched);
    out.note("matched_counts", &m.matched_counts);
    out.note("l1_before", m.l1_before.as_ref().map(|r| r.max));
    out.note("l1_after", m.l1_after.as_ref().map(|r| r.max));

    if a.fsatt.unwrap_or(true) {
        let covariates: Vec<String> = match &a.covariates {
            Some(c) => c.clone(),
            None => spec.variables.iter().map(|v| v.variable.clone()).collect(),
        };
        let d = FsattOptions::default();
        let opts = FsattOptions {
            weighted: a.weighted.unwrap_or(d.weighted),
            reference: level_of(&treatment, &a.reference, d.reference)?,
            level: a.level.unwrap_or(d.level),
        };
        let est = fsatt(&rows, &m, &treatment, &covariates, &opts)?;
        out.csv("contrasts.csv", &["from", "to", "estimate", "se", "ci_lo", "ci_hi"], |w| {
            for c in &est.contrasts {
                w.write_record([c.from.clone(), c.to.clone(), num(c.estimate), num(c.se), num(c.ci_lo), num(c.ci_hi)])?;
            }
            Ok(())
        })?;
        out.json("fsatt.json", &est)?;
        out.note(
            "contrasts",
            est.contrasts.iter().map(|c| (format!("{}->{}", c.from, c.to), c.estimate)).collect::<Vec<_>>(),
        );
    }
    Ok(out)
}
