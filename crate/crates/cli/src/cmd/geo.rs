use std::collections::HashMap;
use std::path::PathBuf;

use laborflow::geo::{areal_interpolate, penetration_rate, voronoi_partition, LocalProjection, Point};
use laborflow::io::{parse_zones, read_towers};
use laborflow::model::{Zone, ZoneKind};
use serde::{Deserialize, Serialize};

use super::required;
use crate::error::{input, Result};
use crate::output::{num, Ctx, Outputs};

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoOp {
    Voronoi,
    Interpolate,
    Penetration,
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    /// Operation.
    #[arg(long, value_enum)]
    pub op: Option<GeoOp>,
    /// Zones as a FeatureCollection in projected meters.
    #[arg(long)]
    pub zones: Option<PathBuf>,
    /// Source zones carrying populations, for interpolation.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    /// Towers CSV; `x,y` columns are used when present.
    #[arg(long)]
    pub towers: Option<PathBuf>,
    /// Zone id clipping the tessellation [default: the first region zone].
    #[arg(long)]
    pub clip: Option<String>,
    /// CSV `tower_id,users` for penetration rates.
    #[arg(long)]
    pub user_counts: Option<PathBuf>,
    /// Projection origin `lat,lon` for towers without `x,y` [default: tower centroid].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub origin: Option<Vec<f64>>,
}

fn load_zones(ctx: &mut Ctx, path: &Option<PathBuf>, flag: &str) -> Result<Vec<Zone>> {
    let text = ctx.read_string(required(path, flag)?)?;
    Ok(parse_zones(&text)?)
}

fn tower_points(a: &Args, ctx: &mut Ctx) -> Result<Vec<(String, Point)>> {
    let (reg, xy) = read_towers(ctx.read(required(&a.towers, "towers")?)?.as_slice())?;
    let sites = reg.sites();
    if sites.is_empty() {
        return Err(input("towers file has no rows"));
    }
    let points = match xy {
        Some(xy) => xy,
        None => {
            let proj = match a.origin.as_deref() {
                Some([lat0, lon0]) => LocalProjection { lat0: *lat0, lon0: *lon0 },
                Some(_) => return Err(input("--origin takes lat,lon")),
                None => LocalProjection {
                    lat0: sites.iter().map(|s| s.lat).sum::<f64>() / sites.len() as f64,
                    lon0: sites.iter().map(|s| s.lon).sum::<f64>() / sites.len() as f64,
                },
            };
            sites.iter().map(|s| proj.project(s.lat, s.lon)).collect()
        }
    };
    Ok(sites.iter().map(|s| s.tower_id.clone()).zip(points).collect())
}

fn clip_zone<'a>(zones: &'a [Zone], id: &Option<String>) -> Result<&'a Zone> {
    match id {
        Some(id) => zones.iter().find(|z| &z.zone_id == id).ok_or_else(|| input(format!("no zone {id:?}"))),
        None => zones
            .iter()
            .find(|z| z.kind == ZoneKind::Region)
            .ok_or_else(|| input("no region zone to clip with; pass --clip")),
    }
}

fn write_values(out: &mut Outputs, name: &str, rows: &[(String, f64)]) -> Result<()> {
    out.csv(name, &["zone_id", "value"], |w| {
        for (k, v) in rows {
            w.write_record([k.clone(), num(*v)])?;
        }
        Ok(())
    })
}

pub fn run(a: &Args, ctx: &mut Ctx) -> Result<Outputs> {
    let mut out = Outputs::default();
    match required(&a.op, "op")? {
        GeoOp::Interpolate => {
            let targets = load_zones(ctx, &a.zones, "zones")?;
            let sources = load_zones(ctx, &a.sources, "sources")?;
            let values = areal_interpolate(&targets, &sources)?;
            write_values(&mut out, "interpolated.csv", &values)?;
            out.note("zones", values.len());
        }
        GeoOp::Voronoi => {
            let zones = load_zones(ctx, &a.zones, "zones")?;
            let sites = tower_points(a, ctx)?;
            let part = voronoi_partition(&sites, clip_zone(&zones, &a.clip)?)?;
            let areas: Vec<(String, f64)> = part.cells.iter().map(|c| (c.tower_id.clone(), c.area())).collect();
            write_values(&mut out, "voronoi.csv", &areas)?;
            out.note("cells", areas.len());
            out.note("duplicate_towers", &part.duplicates);
        }
        GeoOp::Penetration => {
            let zones = load_zones(ctx, &a.zones, "zones")?;
            let sites = tower_points(a, ctx)?;
            let clip = clip_zone(&zones, &a.clip)?;
            let bytes = ctx.read(required(&a.user_counts, "user-counts")?)?;
            let mut rdr = csv::Reader::from_reader(bytes.as_slice());
            if rdr.headers()?.iter().ne(["tower_id", "users"]) {
                return Err(input("user counts need header tower_id,users"));
            }
            let mut counts = HashMap::new();
            for rec in rdr.records() {
                let rec = rec?;
                let n: u64 = rec[1].parse().map_err(|_| input(format!("bad user count {:?}", &rec[1])))?;
                counts.insert(rec[0].to_string(), n);
            }
            let part = voronoi_partition(&sites, clip)?.with_user_counts(&counts);
            let districts: Vec<Zone> = zones.iter().filter(|z| z.kind == ZoneKind::District).cloned().collect();
            if districts.is_empty() {
                return Err(input("no district zones"));
            }
            let populations: HashMap<String, f64> = match &a.sources {
                Some(_) => {
                    let sources = load_zones(ctx, &a.sources, "sources")?;
                    areal_interpolate(&districts, &sources)?.into_iter().collect()
                }
                None => districts.iter().filter_map(|d| d.population.map(|p| (d.zone_id.clone(), p))).collect(),
            };
            let pen = penetration_rate(&districts, &part.cells, &populations);
            write_values(&mut out, "penetration.csv", &pen.rates)?;
            out.note("districts", pen.rates.len());
            out.note("skipped_districts", &pen.skipped);
        }
    }
    Ok(out)
}
