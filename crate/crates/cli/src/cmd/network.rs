use std::path::PathBuf;

use laborflow::io::read_graph;
use laborflow::model::DirectedNominationGraph;
use laborflow::netdyn::{
    bdsi_run, classify_ties, percolation_contrast, percolation_experiment, reciprocity_stats, sc_feature, se_feature,
    trial_seed, BdsiParams, PercolationResult, TieClass, TieClassification, TransmissionNetwork,
};
use laborflow::stats::par_map;
use serde::{Deserialize, Serialize};

use super::required;
use crate::error::{input, Result};
use crate::output::{num, Ctx, Outputs};

#[derive(clap::Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphArgs {
    /// Nominations CSV `src,dst,score`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Score scale `min,max` [default: 0,7].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub scale: Option<Vec<f64>>,
    /// Scores strictly above this are nominations [default: 2].
    #[arg(long)]
    pub threshold: Option<f64>,
}

fn load_graph(g: &GraphArgs, ctx: &mut Ctx) -> Result<(DirectedNominationGraph, TieClassification)> {
    let scale = match g.scale.as_deref() {
        None => (0.0, 7.0),
        Some([lo, hi]) => (*lo, *hi),
        Some(_) => return Err(input("--scale takes min,max")),
    };
    let graph = read_graph(ctx.read(required(&g.graph, "graph")?)?.as_slice(), scale)?;
    let tc = classify_ties(&graph, g.threshold.unwrap_or(2.0));
    Ok((graph, tc))
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
}

fn class_name(c: TieClass) -> &'static str {
    match c {
        TieClass::Reciprocal => "reciprocal",
        TieClass::Unilateral => "unilateral",
    }
}

pub fn ties(a: &TiesArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let (g, tc) = load_graph(&a.graph, ctx)?;
    let labels = g.nodes();
    let mut rows = Vec::with_capacity(tc.ties().len());
    for t in tc.ties() {
        rows.push([
            labels[t.a].clone(),
            labels[t.b].clone(),
            class_name(t.class).to_string(),
            se_feature(&tc, t.a, t.b)?.to_string(),
            num(sc_feature(&tc, t.a, t.b)?),
        ]);
    }
    let stats = reciprocity_stats(&tc)?;
    let mut out = Outputs::default();
    out.csv("ties.csv", &["a", "b", "class", "se", "sc"], |w| {
        for r in &rows {
            w.write_record(r)?;
        }
        Ok(())
    })?;
    let per_node: Vec<(String, f64)> = stats.per_node.iter().map(|&(i, v)| (labels[i].clone(), v)).collect();
    out.json(
        "reciprocity.json",
        &serde_json::json!({
            "ties": stats.ties,
            "reciprocal_ties": stats.reciprocal_ties,
            "global": stats.global,
            "nominations": stats.nominations,
            "reciprocated_nominations": stats.reciprocated_nominations,
            "nomination_fraction": stats.nomination_fraction,
            "per_node": per_node,
        }),
    )?;
    out.note("ties", stats.ties);
    out.note("reciprocal_ties", stats.reciprocal_ties);
    out.note("global_reciprocity", stats.global);
    Ok(out)
}

#[derive(clap::Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadArgs {
    /// Transmission probability on reciprocal ties [default: 0.5].
    #[arg(long)]
    pub p_rec: Option<f64>,
    /// Nominator to nominee on unilateral ties [default: 0.3].
    #[arg(long)]
    pub p_plus: Option<f64>,
    /// Nominee to nominator on unilateral ties [default: 0.1].
    #[arg(long)]
    pub p_minus: Option<f64>,
    /// Steps [default: 20].
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Initially infected node labels [default: the first node].
    #[arg(long, value_delimiter = ',')]
    pub sources: Option<Vec<String>>,
    /// Trials [default: 100].
    #[arg(long)]
    pub trials: Option<usize>,
}

fn spread_params(s: &SpreadArgs, g: &DirectedNominationGraph) -> Result<BdsiParams> {
    let seeds = match &s.sources {
        Some(labels) if !labels.is_empty() => labels
            .iter()
            .map(|l| g.node_index(l).ok_or_else(|| input(format!("no node {l:?}"))))
            .collect::<Result<Vec<_>>>()?,
        _ => vec![0],
    };
    let params = BdsiParams {
        p_rec: s.p_rec.unwrap_or(0.5),
        p_plus: s.p_plus.unwrap_or(0.3),
        p_minus: s.p_minus.unwrap_or(0.1),
        horizon: s.horizon.unwrap_or(20),
        seeds,
    };
    params.validate(g.node_count())?;
    Ok(params)
}

fn trials(s: &SpreadArgs) -> Result<usize> {
    match s.trials.unwrap_or(100) {
        0 => Err(input("--trials must be at least 1")),
        t => Ok(t),
    }
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub spread: SpreadArgs,
}

pub fn diffuse(a: &DiffuseArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let (g, tc) = load_graph(&a.graph, ctx)?;
    let params = spread_params(&a.spread, &g)?;
    let n_trials = trials(&a.spread)?;
    let net = TransmissionNetwork::new(&tc, &params, &[]);
    let seed = ctx.seed;
    let traces = par_map(n_trials, |k| bdsi_run(&net, &params, trial_seed(seed, k)));
    let n = g.node_count() as f64;
    let mut out = Outputs::default();
    out.csv("trace.csv", &["trial", "t", "Z", "F"], |w| {
        for (k, tr) in traces.iter().enumerate() {
            for (t, z) in tr.coverage.iter().enumerate() {
                w.write_record([k.to_string(), t.to_string(), z.to_string(), num(*z as f64 / n)])?;
            }
        }
        Ok(())
    })?;
    out.csv("infection_times.csv", &["trial", "node", "t"], |w| {
        for (k, tr) in traces.iter().enumerate() {
            for (i, t) in tr.infection_time.iter().enumerate() {
                if let Some(t) = t {
                    w.write_record([k.to_string(), g.nodes()[i].clone(), t.to_string()])?;
                }
            }
        }
        Ok(())
    })?;
    let finals: Vec<f64> = traces.iter().map(|t| *t.coverage.last().unwrap() as f64).collect();
    out.note("nodes", g.node_count());
    out.note("trials", n_trials);
    out.note("mean_final_coverage", finals.iter().sum::<f64>() / finals.len() as f64);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassArg {
    Reciprocal,
    Unilateral,
    Contrast,
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercolateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub spread: SpreadArgs,
    /// Tie class to remove; `contrast` removes reciprocal ties and the same
    /// count of unilateral ties [default: contrast].
    #[arg(long, value_enum)]
    pub class: Option<ClassArg>,
    /// Removal fractions [default: 0,0.25,0.5,0.75].
    #[arg(long, value_delimiter = ',')]
    pub f_grid: Option<Vec<f64>>,
}

fn write_percolation(out: &mut Outputs, r: &PercolationResult) -> Result<()> {
    let name = class_name(r.class);
    out.csv(&format!("percolation_{name}.csv"), &["F", "removed", "t", "mean_Z", "lo", "hi"], |w| {
        for row in &r.rows {
            w.write_record([num(row.f), row.removed.to_string(), row.t.to_string(), num(row.mean_z), num(row.lo), num(row.hi)])?;
        }
        Ok(())
    })?;
    out.csv(&format!("traces_{name}.csv"), &["F", "trial", "t", "Z"], |w| {
        for (f, curves) in &r.traces {
            for (k, c) in curves.iter().enumerate() {
                for (t, z) in c.iter().enumerate() {
                    w.write_record([num(*f), k.to_string(), t.to_string(), z.to_string()])?;
                }
            }
        }
        Ok(())
    })?;
    let finals: Vec<f64> = (0..r.traces.len()).map(|l| r.mean_final(l)).collect();
    out.note(&format!("mean_final_{name}"), finals);
    Ok(())
}

pub fn percolate(a: &PercolateArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let (g, tc) = load_graph(&a.graph, ctx)?;
    let params = spread_params(&a.spread, &g)?;
    let n_trials = trials(&a.spread)?;
    let grid = a.f_grid.clone().unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75]);
    let mut out = Outputs::default();
    match a.class.unwrap_or(ClassArg::Contrast) {
        ClassArg::Contrast => {
            let (rec, uni) = percolation_contrast(&tc, &params, &grid, n_trials, ctx.seed)?;
            write_percolation(&mut out, &rec)?;
            write_percolation(&mut out, &uni)?;
        }
        c => {
            let class = if c == ClassArg::Reciprocal { TieClass::Reciprocal } else { TieClass::Unilateral };
            let r = percolation_experiment(&tc, &params, &grid, class, n_trials, ctx.seed)?;
            write_percolation(&mut out, &r)?;
        }
    }
    out.note("reciprocal_ties", tc.count(TieClass::Reciprocal));
    out.note("unilateral_ties", tc.count(TieClass::Unilateral));
    Ok(out)
}
