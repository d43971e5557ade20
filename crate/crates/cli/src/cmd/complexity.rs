use std::path::PathBuf;

use laborflow::complexity::{binarize_with, eci_eigen, prominence, proximity as phi, rca, reflections, ReflectionOptions, ThresholdRule};
use laborflow::io::read_incidence;
use laborflow::model::{BinaryMatrix, IncidenceMatrix, Pruned};
use laborflow::stats::spearman;
use serde::{Deserialize, Serialize};

use super::required;
use crate::error::{input, Result};
use crate::output::{num, Ctx, Outputs};

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeArg {
    /// RCA against `--threshold`.
    Rca,
    /// Local share above global share.
    Prominence,
    /// Input is already 0/1.
    None,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleArg {
    AtLeast,
    Above,
}

#[derive(clap::Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixArgs {
    /// Incidence CSV: place labels then one column per activity.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Binarization [default: rca].
    #[arg(long, value_enum)]
    pub binarize: Option<BinarizeArg>,
    /// RCA threshold [default: 1].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Threshold comparison [default: at_least].
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
}

fn load(a: &MatrixArgs, ctx: &mut Ctx) -> Result<(BinaryMatrix, Pruned, bool)> {
    let m: IncidenceMatrix = read_incidence(ctx.read(required(&a.input, "input")?)?.as_slice())?;
    let b = match a.binarize.unwrap_or(BinarizeArg::Rca) {
        BinarizeArg::Rca => {
            let rule = match a.rule.unwrap_or(RuleArg::AtLeast) {
                RuleArg::AtLeast => ThresholdRule::AtLeast,
                RuleArg::Above => ThresholdRule::Above,
            };
            binarize_with(&rca(&m)?, a.threshold.unwrap_or(1.0), rule)?
        }
        BinarizeArg::Prominence => prominence(&m)?,
        BinarizeArg::None => {
            let b = BinaryMatrix::new(m.rows.clone(), m.cols.clone(), m.values.clone())
                .map_err(|_| input("--binarize none needs a 0/1 matrix"))?;
            let degenerate = b.is_all_zero();
            return Ok((b, Pruned::default(), degenerate));
        }
    };
    Ok((b.matrix, b.pruned, b.degenerate))
}

fn merge(a: Pruned, b: Pruned) -> Pruned {
    Pruned { rows: [a.rows, b.rows].concat(), cols: [a.cols, b.cols].concat() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Reflections,
    Eigen,
    Both,
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub matrix: MatrixArgs,
    /// Index method [default: both].
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Fixed reflection count [default: chosen by rank stability].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Reflection cap [default: 200].
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

fn write_index(out: &mut Outputs, name: &str, labels: &[String], v: &[f64]) -> Result<()> {
    out.csv(name, &["label", "index"], |w| {
        for (l, x) in labels.iter().zip(v) {
            w.write_record([l.clone(), num(*x)])?;
        }
        Ok(())
    })
}

pub fn complexity(a: &ComplexityArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let (b, pruned0, degenerate) = load(&a.matrix, ctx)?;
    if degenerate {
        return Err(laborflow::Error::Degenerate("no cell passes the binarization threshold".into()).into());
    }
    let (m, pruned1) = b.prune();
    let pruned = merge(pruned0, pruned1);
    let method = a.method.unwrap_or(MethodArg::Both);
    let mut out = Outputs::default();
    let mut refl = None;
    if method != MethodArg::Eigen {
        let d = ReflectionOptions::default();
        let opts = ReflectionOptions {
            iterations: a.iterations,
            max_iterations: a.max_iterations.unwrap_or(d.max_iterations),
            tolerance: d.tolerance,
        };
        let r = reflections(&m, &opts)?;
        let place = r
            .place_index
            .clone()
            .ok_or_else(|| laborflow::Error::Degenerate("reflections collapsed to a constant".into()))?;
        write_index(&mut out, "place_reflections.csv", &r.places, &place)?;
        if let Some(act) = &r.activity_index {
            write_index(&mut out, "activity_reflections.csv", &r.activities, act)?;
        }
        out.note("iterations", r.iterations);
        out.note("converged", r.converged);
        refl = Some(place);
    }
    if method != MethodArg::Reflections {
        let e = eci_eigen(&m)?;
        write_index(&mut out, "place_eigen.csv", &e.places, &e.index)?;
        out.note("eigenvalue", e.eigenvalue);
        out.note("spectral_gap", e.gap);
        if let Some(r) = &refl {
            out.note("spearman", spearman(r, &e.index));
        }
    }
    out.note("places", m.nrows());
    out.note("activities", m.ncols());
    out.note("pruned", &pruned);
    Ok(out)
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProximityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub matrix: MatrixArgs,
    /// Edges keep pairs with proximity above this [default: 0].
    #[arg(long)]
    pub edge_threshold: Option<f64>,
}

pub fn proximity(a: &ProximityArgs, ctx: &mut Ctx) -> Result<Outputs> {
    let (b, pruned, _) = load(&a.matrix, ctx)?;
    let p = phi(&b)?;
    let mut out = Outputs::default();
    let mut header = vec!["label"];
    header.extend(p.labels.iter().map(String::as_str));
    out.csv("proximity.csv", &header, |w| {
        for (i, l) in p.labels.iter().enumerate() {
            let mut rec = vec![l.clone()];
            rec.extend((0..p.labels.len()).map(|j| num(p.phi[(i, j)])));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    let edges = p.edges(a.edge_threshold.unwrap_or(0.0));
    out.csv("edges.csv", &["i", "j", "phi"], |w| {
        for (i, j, v) in &edges {
            w.write_record([i.clone(), j.clone(), num(*v)])?;
        }
        Ok(())
    })?;
    out.note("activities", p.labels.len());
    out.note("edges", edges.len());
    out.note("pruned_activities", [pruned.cols, p.pruned].concat());
    Ok(out)
}
