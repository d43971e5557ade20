use laborflow::complexity::{synth_incidence, SynthIncidenceSpec};
use laborflow::indicators::{synth_cdr, SynthCdrConfig};
use laborflow::io::{write_events, write_graph, write_incidence, write_panel};
use laborflow::matching::{synth_panel, SynthPanelSpec};
use laborflow::netdyn::synth_nominations;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::required;
use crate::error::Result;
use crate::output::{num, Ctx, Outputs};

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Nested places x activities counts.
    Incidence,
    /// Call records, towers and latent classes.
    Cdr,
    /// Growth panel with known effects.
    Panel,
    /// Directed nomination graph.
    Graph,
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Places, users, units or nodes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Activities (incidence) or towers (cdr).
    #[arg(long)]
    pub m: Option<usize>,
    /// Days of records (cdr).
    #[arg(long)]
    pub days: Option<u32>,
    /// Nestedness in [0, 1] (incidence).
    #[arg(long)]
    pub nestedness: Option<f64>,
    /// Cell flip probability (incidence) or outcome noise sd (panel).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Ties (graph) [default: 775].
    #[arg(long)]
    pub ties: Option<usize>,
    /// Reciprocal ties (graph) [default: 413].
    #[arg(long)]
    pub reciprocal: Option<usize>,
    /// Full generator settings for cdr, config only.
    #[arg(skip)]
    pub cdr: Option<SynthCdrConfig>,
    /// Full generator settings for panel, config only.
    #[arg(skip)]
    pub panel: Option<SynthPanelSpec>,
}

pub fn run(a: &Args, ctx: &mut Ctx) -> Result<Outputs> {
    let mut out = Outputs::default();
    match required(&a.kind, "kind")? {
        Kind::Incidence => {
            let d = SynthIncidenceSpec::default();
            let spec = SynthIncidenceSpec {
                n_places: a.n.unwrap_or(d.n_places),
                n_activities: a.m.unwrap_or(d.n_activities),
                nestedness: a.nestedness.unwrap_or(d.nestedness),
                noise: a.noise.unwrap_or(d.noise),
            };
            let s = synth_incidence(&spec, ctx.seed)?;
            out.with("incidence.csv", |w| write_incidence(w, &s.matrix, "place"))?;
            out.note("places", spec.n_places);
            out.note("activities", spec.n_activities);
        }
        Kind::Cdr => {
            let mut cfg = a.cdr.clone().unwrap_or_default();
            cfg.n_users = a.n.unwrap_or(cfg.n_users);
            cfg.n_towers = a.m.unwrap_or(cfg.n_towers);
            cfg.days = a.days.unwrap_or(cfg.days);
            let s = synth_cdr(&cfg, ctx.seed)?;
            out.with("events.csv", |w| write_events(w, &s.events))?;
            out.csv("towers.csv", &["tower_id", "lat", "lon", "x", "y"], |w| {
                for (t, p) in s.towers.iter().zip(&s.tower_xy) {
                    w.write_record([t.tower_id.clone(), num(t.lat), num(t.lon), num(p.x), num(p.y)])?;
                }
                Ok(())
            })?;
            let homes: std::collections::HashMap<&str, &str> =
                s.homes.iter().map(|(u, t)| (u.as_str(), t.as_str())).collect();
            out.csv("classes.csv", &["user_id", "class", "home_tower"], |w| {
                for (u, c) in &s.classes {
                    let class = serde_json::to_value(c).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                    w.write_record([u.as_str(), &class, homes.get(u.as_str()).copied().unwrap_or("")])?;
                }
                Ok(())
            })?;
            out.note("events", s.events.len());
            out.note("users", cfg.n_users);
            out.note("towers", cfg.n_towers);
        }
        Kind::Panel => {
            let mut spec = a.panel.clone().unwrap_or_default();
            spec.n_units = a.n.unwrap_or(spec.n_units);
            spec.noise_sd = a.noise.unwrap_or(spec.noise_sd);
            let p = synth_panel(&spec, ctx.seed)?;
            out.with("panel.csv", |w| write_panel(w, &p.rows))?;
            out.json("truth.json", &json!({ "spec": p.spec }))?;
            out.note("rows", p.rows.len());
        }
        Kind::Graph => {
            let g = synth_nominations(
                a.n.unwrap_or(84),
                a.ties.unwrap_or(775),
                a.reciprocal.unwrap_or(413),
                (0.0, 7.0),
                ctx.seed,
            )?;
            out.with("graph.csv", |w| write_graph(w, &g))?;
            out.note("nodes", g.node_count());
            out.note("nominations", g.edges().len());
        }
    }
    Ok(out)
}
