//! Core domain types shared by every analysis stage.
//!
//! All types are plain data, immutable once built, and `Send + Sync`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Polygon;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Call,
    Data,
    Sms,
}

impl FromStr for EventKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "call" => Ok(Self::Call),
            "data" => Ok(Self::Data),
            "sms" => Ok(Self::Sms),
            other => Err(format!("unknown kind {other:?}")),
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Call => "call",
            Self::Data => "data",
            Self::Sms => "sms",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Initiated,
    Received,
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "initiated" => Ok(Self::Initiated),
            "received" => Ok(Self::Received),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Initiated => "initiated",
            Self::Received => "received",
        })
    }
}

/// One telecom activity record.
///
/// `counterpart_id` is only known for synthetic or two-sided datasets; real
/// single-operator logs carry the caller side only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub user_id: String,
    pub kind: EventKind,
    pub direction: Direction,
    pub tower_id: String,
    pub duration_s: f64,
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterpart_id: Option<String>,
}

/// Half-open observation window `[start, end)` in UTC epoch seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(Error::invalid(format!("empty window [{start}, {end})")));
        }
        Ok(Self { start, end })
    }

    pub fn unbounded() -> Self {
        Self {
            start: i64::MIN,
            end: i64::MAX,
        }
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerSite {
    pub tower_id: String,
    pub lat: f64,
    pub lon: f64,
}

impl TowerSite {
    pub fn new(tower_id: impl Into<String>, lat: f64, lon: f64) -> Result<Self> {
        if !(lat.abs() <= 90.0) || !(lon.abs() <= 180.0) {
            return Err(Error::invalid(format!("coordinates out of range: ({lat}, {lon})")));
        }
        Ok(Self {
            tower_id: tower_id.into(),
            lat,
            lon,
        })
    }
}

/// Tower lookup keyed by id. Ids are unique.
#[derive(Clone, Debug, Default)]
pub struct TowerRegistry {
    sites: Vec<TowerSite>,
    index: HashMap<String, usize>,
}

impl TowerRegistry {
    pub fn new(sites: Vec<TowerSite>) -> Result<Self> {
        let mut index = HashMap::with_capacity(sites.len());
        for (i, s) in sites.iter().enumerate() {
            if index.insert(s.tower_id.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(s.tower_id.clone()));
            }
        }
        Ok(Self { sites, index })
    }

    pub fn get(&self, id: &str) -> Option<&TowerSite> {
        self.index.get(id).map(|&i| &self.sites[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn sites(&self) -> &[TowerSite] {
        &self.sites
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZoneKind {
    #[serde(rename = "TAZ", alias = "taz")]
    Taz,
    #[serde(rename = "district")]
    District,
    #[serde(rename = "region")]
    Region,
}

impl FromStr for ZoneKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "taz" => Ok(Self::Taz),
            "district" => Ok(Self::District),
            "region" => Ok(Self::Region),
            other => Err(format!("unknown zone kind {other:?}")),
        }
    }
}

/// A planar zone in projected coordinates (meters).
#[derive(Clone, Debug, PartialEq)]
pub struct Zone {
    pub zone_id: String,
    pub polygon: Polygon,
    pub population: Option<f64>,
    pub kind: ZoneKind,
}

impl Zone {
    pub fn new(
        zone_id: impl Into<String>,
        polygon: Polygon,
        population: Option<f64>,
        kind: ZoneKind,
    ) -> Result<Self> {
        let zone_id = zone_id.into();
        if let Some(p) = population {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::invalid(format!("zone {zone_id}: population {p}")));
            }
        }
        if !polygon.is_simple() {
            return Err(Error::invalid(format!("zone {zone_id}: ring self-intersects")));
        }
        if !(polygon.area() > 0.0) {
            return Err(Error::invalid(format!("zone {zone_id}: zero area")));
        }
        Ok(Self {
            zone_id,
            polygon,
            population,
            kind,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nomination {
    pub src: usize,
    pub dst: usize,
    pub score: f64,
}

/// Weighted directed friendship-nomination network.
#[derive(Clone, Debug)]
pub struct DirectedNominationGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Nomination>,
    scale: (f64, f64),
}

impl DirectedNominationGraph {
    /// Builds a graph over `nodes` from `(src, dst, score)` index triples.
    pub fn new(
        nodes: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        scale: (f64, f64),
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(n.clone()));
            }
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (src, dst, score) in edges {
            if src >= nodes.len() || dst >= nodes.len() {
                return Err(Error::invalid(format!("edge ({src}, {dst}) out of range")));
            }
            if src == dst {
                return Err(Error::invalid(format!("self-loop on {}", nodes[src])));
            }
            if !(score >= scale.0 && score <= scale.1) {
                return Err(Error::invalid(format!(
                    "score {score} outside [{}, {}]",
                    scale.0, scale.1
                )));
            }
            if !seen.insert((src, dst)) {
                return Err(Error::invalid(format!(
                    "duplicate edge {} -> {}",
                    nodes[src], nodes[dst]
                )));
            }
            out.push(Nomination { src, dst, score });
        }
        Ok(Self {
            nodes,
            index,
            edges: out,
            scale,
        })
    }

    /// Builds from labelled triples, collecting node labels in first-seen order.
    pub fn from_labelled<S: AsRef<str>>(
        triples: impl IntoIterator<Item = (S, S, f64)>,
        scale: (f64, f64),
    ) -> Result<Self> {
        let mut nodes: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut id = |s: &str, nodes: &mut Vec<String>| -> usize {
            *index.entry(s.to_string()).or_insert_with(|| {
                nodes.push(s.to_string());
                nodes.len() - 1
            })
        };
        let mut edges = Vec::new();
        for (a, b, w) in triples {
            let i = id(a.as_ref(), &mut nodes);
            let j = id(b.as_ref(), &mut nodes);
            edges.push((i, j, w));
        }
        Self::new(nodes, edges, scale)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn edges(&self) -> &[Nomination] {
        &self.edges
    }

    pub fn scale(&self) -> (f64, f64) {
        self.scale
    }
}

/// Places × activities non-negative matrix with labels in input order.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: DMatrix<f64>,
}

impl IncidenceMatrix {
    pub fn new(rows: Vec<String>, cols: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != rows.len() || values.ncols() != cols.len() {
            return Err(Error::invalid(format!(
                "matrix is {}x{} but {} row and {} column labels given",
                values.nrows(),
                values.ncols(),
                rows.len(),
                cols.len()
            )));
        }
        check_unique(&rows)?;
        check_unique(&cols)?;
        for r in 0..values.nrows() {
            for c in 0..values.ncols() {
                let v = values[(r, c)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NegativeValue {
                        row: rows[r].clone(),
                        column: cols[c].clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(Self { rows, cols, values })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values.row_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.values.column_iter().map(|c| c.sum()).collect()
    }
}

/// 0/1 companion of an [`IncidenceMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    cells: DMatrix<f64>,
}

/// Labels removed by [`BinaryMatrix::prune`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Pruned {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
}

impl Pruned {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() && self.cols.is_empty()
    }
}

impl BinaryMatrix {
    pub fn new(rows: Vec<String>, cols: Vec<String>, cells: DMatrix<f64>) -> Result<Self> {
        if cells.nrows() != rows.len() || cells.ncols() != cols.len() {
            return Err(Error::invalid("label count does not match matrix shape"));
        }
        if cells.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("binary matrix contains values other than 0/1"));
        }
        Ok(Self { rows, cols, cells })
    }

    /// Unlabelled matrix from a predicate; labels become `r0..`, `c0..`.
    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let cells = DMatrix::from_fn(nrows, ncols, |r, c| if f(r, c) { 1.0 } else { 0.0 });
        Self {
            rows: (0..nrows).map(|i| format!("r{i}")).collect(),
            cols: (0..ncols).map(|j| format!("c{j}")).collect(),
            cells,
        }
    }

    pub fn cells(&self) -> &DMatrix<f64> {
        &self.cells
    }

    pub fn nrows(&self) -> usize {
        self.cells.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.cells.ncols()
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.cells[(r, c)] != 0.0
    }

    /// Row sums (diversity).
    pub fn diversity(&self) -> Vec<f64> {
        self.cells.row_iter().map(|r| r.sum()).collect()
    }

    /// Column sums (ubiquity).
    pub fn ubiquity(&self) -> Vec<f64> {
        self.cells.column_iter().map(|c| c.sum()).collect()
    }

    pub fn is_all_zero(&self) -> bool {
        self.cells.iter().all(|&v| v == 0.0)
    }

    /// Drops all-zero rows and columns. One pass suffices: removing a zero row
    /// cannot empty a column and vice versa.
    pub fn prune(&self) -> (BinaryMatrix, Pruned) {
        let div = self.diversity();
        let ubi = self.ubiquity();
        let keep_r: Vec<usize> = (0..self.nrows()).filter(|&r| div[r] > 0.0).collect();
        let keep_c: Vec<usize> = (0..self.ncols()).filter(|&c| ubi[c] > 0.0).collect();
        let pruned = Pruned {
            rows: (0..self.nrows())
                .filter(|&r| div[r] == 0.0)
                .map(|r| self.rows[r].clone())
                .collect(),
            cols: (0..self.ncols())
                .filter(|&c| ubi[c] == 0.0)
                .map(|c| self.cols[c].clone())
                .collect(),
        };
        let cells = DMatrix::from_fn(keep_r.len(), keep_c.len(), |i, j| {
            self.cells[(keep_r[i], keep_c[j])]
        });
        let m = BinaryMatrix {
            rows: keep_r.iter().map(|&r| self.rows[r].clone()).collect(),
            cols: keep_c.iter().map(|&c| self.cols[c].clone()).collect(),
            cells,
        };
        (m, pruned)
    }
}

/// One unit-period observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub unit_id: String,
    pub period_start: i32,
    pub period_end: i32,
    pub outcome: f64,
    pub covariates: BTreeMap<String, f64>,
}

impl PanelRow {
    pub fn covariate(&self, name: &str) -> Result<f64> {
        match self.covariates.get(name) {
            Some(v) if v.is_finite() => Ok(*v),
            Some(v) => Err(Error::invalid(format!(
                "unit {}: covariate {name} is {v}",
                self.unit_id
            ))),
            None => Err(Error::invalid(format!(
                "unit {}: covariate {name} missing",
                self.unit_id
            ))),
        }
    }
}

fn check_unique(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}
