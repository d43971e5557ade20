use nalgebra::DMatrix;

use crate::error::{input, Result};

/// CSV with an id column followed by numeric columns; empty cells are missing.
pub struct Table {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub cols: Vec<Vec<Option<f64>>>,
}

pub struct Selection {
    pub ids: Vec<String>,
    pub features: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    /// Rows skipped for missing values.
    pub dropped: usize,
}

impl Selection {
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.x.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

pub fn parse(bytes: &[u8]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(input("table needs an id column and at least one value column"));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut cols = vec![Vec::new(); names.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        for (j, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("");
            col.push(if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    input(format!("line {}: column {}: not a number: {cell:?}", line + 2, names[j]))
                })?)
            });
        }
    }
    if ids.is_empty() {
        return Err(input("table has no rows"));
    }
    Ok(Table { ids, names, cols })
}

impl Table {
    fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| input(format!("no column {name:?}; have {}", self.names.join(", "))))
    }

    /// Features default to every column except the target and weights.
    pub fn select(&self, target: Option<&str>, features: Option<&[String]>, weights: Option<&str>) -> Result<Selection> {
        let features: Vec<String> = match features {
            Some(f) if !f.is_empty() => f.to_vec(),
            _ => self
                .names
                .iter()
                .filter(|n| Some(n.as_str()) != target && Some(n.as_str()) != weights)
                .cloned()
                .collect(),
        };
        if features.is_empty() {
            return Err(input("no feature columns"));
        }
        let fi = features.iter().map(|f| self.index(f)).collect::<Result<Vec<_>>>()?;
        let ti = target.map(|t| self.index(t)).transpose()?;
        let wi = weights.map(|w| self.index(w)).transpose()?;
        let used: Vec<usize> = fi.iter().chain(&ti).chain(&wi).copied().collect();
        let keep: Vec<usize> = (0..self.ids.len()).filter(|&r| used.iter().all(|&c| self.cols[c][r].is_some())).collect();
        if keep.is_empty() {
            return Err(input("every row has a missing value in the selected columns"));
        }
        let value = |c: usize, r: usize| self.cols[c][r].unwrap();
        Ok(Selection {
            ids: keep.iter().map(|&r| self.ids[r].clone()).collect(),
            x: DMatrix::from_fn(keep.len(), fi.len(), |i, j| value(fi[j], keep[i])),
            y: ti.map_or_else(Vec::new, |t| keep.iter().map(|&r| value(t, r)).collect()),
            weights: wi.map(|w| keep.iter().map(|&r| value(w, r)).collect()),
            dropped: self.ids.len() - keep.len(),
            features,
        })
    }
}
