//! CSV / GeoJSON readers and writers for the on-disk formats.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use nalgebra::DMatrix;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::{Point, Polygon};
use crate::model::{
    DirectedNominationGraph, Direction, EventKind, EventRecord, IncidenceMatrix, PanelRow,
    TimeWindow, TowerRegistry, TowerSite, Zone, ZoneKind,
};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::malformed(line, format!("{what}: not a number: {s:?}")))
}

/// Epoch seconds or an ISO-8601 instant (offset-less values are read as UTC).
pub fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(t) = s.parse::<i64>() {
        return Some(t);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    None
}

#[derive(Clone, Debug)]
pub struct LoadedEvents {
    pub records: Vec<EventRecord>,
    /// Rows outside the observation window.
    pub dropped: usize,
}

/// Reads an events CSV (`user_id,kind,direction,tower_id,duration_s,timestamp`
/// plus an optional `counterpart_id` column).
pub fn read_events<R: Read>(
    reader: R,
    window: TimeWindow,
    towers: Option<&TowerRegistry>,
) -> Result<LoadedEvents> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["user_id", "kind", "direction", "tower_id", "duration_s", "timestamp"];
    if headers.len() < 6 || headers.iter().take(6).ne(expected.iter().copied()) {
        return Err(Error::malformed(
            1,
            format!("expected header {}", expected.join(",")),
        ));
    }
    let has_counterpart = headers.get(6) == Some("counterpart_id");
    let mut records = Vec::new();
    let mut dropped = 0;
    for row in rdr.records() {
        let row = row?;
        let line = record_line(&row);
        let kind: EventKind = row[1].parse().map_err(|e| Error::malformed(line, e))?;
        let direction: Direction = row[2].parse().map_err(|e| Error::malformed(line, e))?;
        let tower_id = row[3].to_string();
        let duration_s = parse_f64(&row[4], line, "duration_s")?;
        if !(duration_s >= 0.0) || !duration_s.is_finite() {
            return Err(Error::malformed(line, format!("negative duration {duration_s}")));
        }
        let timestamp = parse_timestamp(&row[5])
            .ok_or_else(|| Error::malformed(line, format!("bad timestamp {:?}", &row[5])))?;
        if let Some(reg) = towers {
            if !reg.contains(&tower_id) {
                return Err(Error::UnknownTower { line, tower_id });
            }
        }
        if !window.contains(timestamp) {
            dropped += 1;
            continue;
        }
        let counterpart_id = if has_counterpart {
            row.get(6).filter(|s| !s.is_empty()).map(str::to_string)
        } else {
            None
        };
        records.push(EventRecord {
            user_id: row[0].to_string(),
            kind,
            direction,
            tower_id,
            duration_s: if kind == EventKind::Call { duration_s } else { 0.0 },
            timestamp,
            counterpart_id,
        });
    }
    Ok(LoadedEvents { records, dropped })
}

/// File wrapper over [`read_events`]. An empty result is an error.
pub fn load_events(
    path: &Path,
    window: TimeWindow,
    towers: Option<&TowerRegistry>,
) -> Result<LoadedEvents> {
    let loaded = read_events(open(path)?, window, towers)?;
    if loaded.records.is_empty() {
        return Err(Error::Empty(format!(
            "no events in window ({} dropped)",
            loaded.dropped
        )));
    }
    Ok(loaded)
}

pub fn write_events<W: Write>(w: W, events: &[EventRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let with_cp = events.iter().any(|e| e.counterpart_id.is_some());
    let mut header = vec!["user_id", "kind", "direction", "tower_id", "duration_s", "timestamp"];
    if with_cp {
        header.push("counterpart_id");
    }
    wtr.write_record(&header)?;
    for e in events {
        let mut row = vec![
            e.user_id.clone(),
            e.kind.to_string(),
            e.direction.to_string(),
            e.tower_id.clone(),
            e.duration_s.to_string(),
            e.timestamp.to_string(),
        ];
        if with_cp {
            row.push(e.counterpart_id.clone().unwrap_or_default());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(())
}

/// Towers CSV: `tower_id,lat,lon` with optional projected `x,y` columns.
pub fn read_towers<R: Read>(reader: R) -> Result<(TowerRegistry, Option<Vec<Point>>)> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "tower_id" || &headers[1] != "lat" || &headers[2] != "lon"
    {
        return Err(Error::malformed(1, "expected header tower_id,lat,lon"));
    }
    let projected = headers.get(3) == Some("x") && headers.get(4) == Some("y");
    let mut sites = Vec::new();
    let mut xy = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = record_line(&row);
        let lat = parse_f64(&row[1], line, "lat")?;
        let lon = parse_f64(&row[2], line, "lon")?;
        let site = TowerSite::new(&row[0], lat, lon).map_err(|e| Error::malformed(line, e.to_string()))?;
        if projected {
            xy.push(Point::new(
                parse_f64(&row[3], line, "x")?,
                parse_f64(&row[4], line, "y")?,
            ));
        }
        sites.push(site);
    }
    Ok((TowerRegistry::new(sites)?, projected.then_some(xy)))
}

pub fn load_towers(path: &Path) -> Result<(TowerRegistry, Option<Vec<Point>>)> {
    read_towers(open(path)?)
}

fn ring_from_json(v: &Value, id: &str) -> Result<Polygon> {
    let rings = v
        .as_array()
        .ok_or_else(|| Error::invalid(format!("zone {id}: coordinates must be an array")))?;
    if rings.len() != 1 {
        return Err(Error::invalid(format!(
            "zone {id}: polygons with holes are not supported"
        )));
    }
    let pts = rings[0]
        .as_array()
        .ok_or_else(|| Error::invalid(format!("zone {id}: ring must be an array")))?
        .iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2);
            match xy.and_then(|a| Some(Point::new(a[0].as_f64()?, a[1].as_f64()?))) {
                Some(p) => Ok(p),
                None => Err(Error::invalid(format!("zone {id}: bad coordinate {p}"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if pts.len() < 4 || pts.first() != pts.last() {
        return Err(Error::invalid(format!("zone {id}: ring is not closed")));
    }
    Polygon::new(pts)
}

/// GeoJSON-style FeatureCollection of projected polygons.
pub fn parse_zones(text: &str) -> Result<Vec<Zone>> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::malformed(e.line(), e.to_string()))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::invalid("zones: expected a FeatureCollection"))?;
    let mut seen = HashSet::new();
    let mut zones = Vec::with_capacity(features.len());
    for f in features {
        let props = f.get("properties").cloned().unwrap_or(Value::Null);
        let id = match props.get("zone_id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(Error::invalid("zones: feature without zone_id")),
        };
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateLabel(id));
        }
        let kind: ZoneKind = props
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::invalid(format!("zone {id}: missing kind")))?
            .parse()
            .map_err(Error::Invalid)?;
        let population = props.get("population").and_then(Value::as_f64);
        let geom = f
            .get("geometry")
            .ok_or_else(|| Error::invalid(format!("zone {id}: missing geometry")))?;
        if geom.get("type").and_then(Value::as_str) != Some("Polygon") {
            return Err(Error::invalid(format!("zone {id}: geometry must be a Polygon")));
        }
        let polygon = ring_from_json(geom.get("coordinates").unwrap_or(&Value::Null), &id)?;
        zones.push(Zone::new(id, polygon, population, kind)?);
    }
    Ok(zones)
}

pub fn load_zones(path: &Path) -> Result<Vec<Zone>> {
    let mut s = String::new();
    open(path)?
        .read_to_string(&mut s)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    parse_zones(&s)
}

/// Incidence CSV: first column place labels, header row activity labels.
pub fn read_incidence<R: Read>(reader: R) -> Result<IncidenceMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::malformed(1, "incidence header needs at least one activity"));
    }
    let cols: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        if rec.len() != headers.len() {
            return Err(Error::malformed(
                line,
                format!("ragged row: {} cells, expected {}", rec.len(), headers.len()),
            ));
        }
        rows.push(rec[0].to_string());
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let v = parse_f64(cell, line, &cols[j])?;
            if v < 0.0 {
                return Err(Error::NegativeValue {
                    row: rec[0].to_string(),
                    column: cols[j].clone(),
                    value: v,
                });
            }
            data.push(v);
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty("incidence table has no rows".into()));
    }
    let values = DMatrix::from_row_slice(rows.len(), cols.len(), &data);
    IncidenceMatrix::new(rows, cols, values)
}

pub fn load_incidence(path: &Path) -> Result<IncidenceMatrix> {
    read_incidence(open(path)?)
}

/// Writes values with shortest round-trip formatting, so reading back is
/// bit-exact.
pub fn write_incidence<W: Write>(w: W, m: &IncidenceMatrix, corner: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec![corner.to_string()];
    header.extend(m.cols.iter().cloned());
    wtr.write_record(&header)?;
    for (i, label) in m.rows.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend((0..m.cols.len()).map(|j| m.values[(i, j)].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(())
}

/// Panel CSV: `unit_id,period_start,period_end,outcome,<covariates...>`.
pub fn read_panel<R: Read>(reader: R) -> Result<Vec<PanelRow>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let fixed = ["unit_id", "period_start", "period_end", "outcome"];
    if headers.len() < 4 || headers.iter().take(4).ne(fixed.iter().copied()) {
        return Err(Error::malformed(1, format!("expected header {}", fixed.join(","))));
    }
    let names: Vec<String> = headers.iter().skip(4).map(str::to_string).collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let start: i32 = rec[1]
            .parse()
            .map_err(|_| Error::malformed(line, "period_start is not an integer year"))?;
        let end: i32 = rec[2]
            .parse()
            .map_err(|_| Error::malformed(line, "period_end is not an integer year"))?;
        if end <= start {
            return Err(Error::malformed(line, "period_end must exceed period_start"));
        }
        let outcome = parse_f64(&rec[3], line, "outcome")?;
        let mut covariates = BTreeMap::new();
        for (j, name) in names.iter().enumerate() {
            let cell = &rec[4 + j];
            let v = if cell.is_empty() {
                f64::NAN
            } else {
                parse_f64(cell, line, name)?
            };
            covariates.insert(name.clone(), v);
        }
        out.push(PanelRow {
            unit_id: rec[0].to_string(),
            period_start: start,
            period_end: end,
            outcome,
            covariates,
        });
    }
    Ok(out)
}

pub fn load_panel(path: &Path) -> Result<Vec<PanelRow>> {
    read_panel(open(path)?)
}

pub fn write_panel<W: Write>(w: W, rows: &[PanelRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let names: Vec<String> = rows
        .first()
        .map(|r| r.covariates.keys().cloned().collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["unit_id", "period_start", "period_end", "outcome"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(names.iter().cloned());
    wtr.write_record(&header)?;
    for r in rows {
        let mut row = vec![
            r.unit_id.clone(),
            r.period_start.to_string(),
            r.period_end.to_string(),
            r.outcome.to_string(),
        ];
        row.extend(
            names
                .iter()
                .map(|n| r.covariates.get(n).map_or(String::new(), |v| v.to_string())),
        );
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(())
}

/// Graph CSV: `src,dst,score`.
pub fn read_graph<R: Read>(reader: R, scale: (f64, f64)) -> Result<DirectedNominationGraph> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(["src", "dst", "score"]) {
        return Err(Error::malformed(1, "expected header src,dst,score"));
    }
    let mut triples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let score = parse_f64(&rec[2], line, "score")?;
        triples.push((rec[0].to_string(), rec[1].to_string(), score));
    }
    DirectedNominationGraph::from_labelled(triples, scale)
}

pub fn load_graph(path: &Path, scale: (f64, f64)) -> Result<DirectedNominationGraph> {
    read_graph(open(path)?, scale)
}

pub fn write_graph<W: Write>(w: W, g: &DirectedNominationGraph) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["src", "dst", "score"])?;
    for e in g.edges() {
        wtr.write_record([
            g.nodes()[e.src].as_str(),
            g.nodes()[e.dst].as_str(),
            &e.score.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(())
}

/// Two-column `<key>,value` table.
pub fn write_values<W: Write>(w: W, key: &str, rows: &[(String, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([key, "value"])?;
    for (k, v) in rows {
        wtr.write_record([k.as_str(), &v.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(())
}
