//! Economic and job complexity: revealed comparative advantage, binarization,
//! the Method of Reflections, the eigenvector index, and activity proximity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryMatrix, IncidenceMatrix, Pruned};
use crate::stats::{pearson, spearman, zscore};

/// Balassa RCA over the rows and columns that carry any mass.
#[derive(Clone, Debug)]
pub struct RcaMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: DMatrix<f64>,
    pub pruned: Pruned,
}

/// Incidence values with empty rows/columns removed and rescaled so the
/// largest cell is 1.
fn normalized(x: &IncidenceMatrix) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>, Pruned)> {
    let max = x.values.max();
    if !(max > 0.0) {
        return Err(Error::Degenerate("incidence matrix is all zero".into()));
    }
    let rs = x.row_sums();
    let cs = x.col_sums();
    let keep_r: Vec<usize> = (0..rs.len()).filter(|&r| rs[r] > 0.0).collect();
    let keep_c: Vec<usize> = (0..cs.len()).filter(|&c| cs[c] > 0.0).collect();
    let pruned = Pruned {
        rows: (0..rs.len()).filter(|&r| rs[r] <= 0.0).map(|r| x.rows[r].clone()).collect(),
        cols: (0..cs.len()).filter(|&c| cs[c] <= 0.0).map(|c| x.cols[c].clone()).collect(),
    };
    let values = DMatrix::from_fn(keep_r.len(), keep_c.len(), |i, j| {
        x.values[(keep_r[i], keep_c[j])] / max
    });
    Ok((
        keep_r.iter().map(|&r| x.rows[r].clone()).collect(),
        keep_c.iter().map(|&c| x.cols[c].clone()).collect(),
        values,
        pruned,
    ))
}

/// Row share of each cell and column share of the grand total.
fn shares(v: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let rs: Vec<f64> = v.row_iter().map(|r| r.sum()).collect();
    let cs: Vec<f64> = v.column_iter().map(|c| c.sum()).collect();
    let total: f64 = rs.iter().sum();
    let within = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] / rs[i]);
    (within, cs.iter().map(|c| c / total).collect())
}

/// `RCA_cp = (x_cp / Σ_p x_cp) / (Σ_c x_cp / Σ x)`.
pub fn rca(x: &IncidenceMatrix) -> Result<RcaMatrix> {
    let (rows, cols, v, pruned) = normalized(x)?;
    let (within, global) = shares(&v);
    let values = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| within[(i, j)] / global[j]);
    Ok(RcaMatrix { rows, cols, values, pruned })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `RCA >= r*` (trade convention).
    #[default]
    AtLeast,
    /// `RCA > r*` (prominence convention).
    Above,
}

#[derive(Clone, Debug)]
pub struct Binarized {
    pub matrix: BinaryMatrix,
    pub pruned: Pruned,
    /// No cell passed the threshold.
    pub degenerate: bool,
}

pub fn binarize(r: &RcaMatrix, r_star: f64) -> Result<Binarized> {
    binarize_with(r, r_star, ThresholdRule::AtLeast)
}

pub fn binarize_with(r: &RcaMatrix, r_star: f64, rule: ThresholdRule) -> Result<Binarized> {
    if !(r_star > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {r_star}")));
    }
    let cells = r.values.map(|v| {
        let hit = match rule {
            ThresholdRule::AtLeast => v >= r_star,
            ThresholdRule::Above => v > r_star,
        };
        if hit { 1.0 } else { 0.0 }
    });
    let matrix = BinaryMatrix::new(r.rows.clone(), r.cols.clone(), cells)?;
    let degenerate = matrix.is_all_zero();
    Ok(Binarized { matrix, pruned: r.pruned.clone(), degenerate })
}

/// `M_cj = 1` iff the city's share of its employment in job `j` exceeds the
/// job's share of total employment.
pub fn prominence(x: &IncidenceMatrix) -> Result<Binarized> {
    let (rows, cols, v, pruned) = normalized(x)?;
    let (within, global) = shares(&v);
    let cells = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| {
        if within[(i, j)] > global[j] { 1.0 } else { 0.0 }
    });
    let matrix = BinaryMatrix::new(rows, cols, cells)?;
    let degenerate = matrix.is_all_zero();
    Ok(Binarized { matrix, pruned, degenerate })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionOptions {
    /// Fixed iteration count; `None` selects it by rank stability.
    pub iterations: Option<usize>,
    pub max_iterations: usize,
    /// Stop once Spearman of same-parity place iterates exceeds `1 - tolerance`.
    pub tolerance: f64,
}

impl Default for ReflectionOptions {
    fn default() -> Self {
        Self { iterations: None, max_iterations: 200, tolerance: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReflectionsResult {
    pub places: Vec<String>,
    pub activities: Vec<String>,
    /// `k_{c,n}` for `n = 0..=N`.
    pub place_iterates: Vec<Vec<f64>>,
    /// `k_{p,n}` for `n = 0..=N`.
    pub activity_iterates: Vec<Vec<f64>>,
    pub iterations: usize,
    /// z-scored `k_{c,N}`; `None` when degenerate.
    pub place_index: Option<Vec<f64>>,
    pub activity_index: Option<Vec<f64>>,
    pub degenerate: bool,
    /// Whether the automatic stopping rule fired before `max_iterations`.
    pub converged: bool,
}

fn check_pruned(m: &BinaryMatrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Empty("binary matrix has no rows or columns".into()));
    }
    if m.diversity().iter().any(|&d| d == 0.0) || m.ubiquity().iter().any(|&u| u == 0.0) {
        return Err(Error::invalid("matrix has all-zero rows or columns; prune it first"));
    }
    Ok(())
}

fn collapsed(v: &[f64]) -> bool {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo <= 1e-13 * hi.abs().max(1.0)
}

/// Values mapped onto a 1e-9 grid of their range, so that rounding noise on
/// exact ties does not reorder ranks.
fn snapped(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|x| ((x - lo) / (hi - lo) * 1e9).round()).collect()
}

/// Method of Reflections:
/// `k_{c,n} = (1/k_{c,0}) Σ_p M_cp k_{p,n-1}`, `k_{p,n} = (1/k_{p,0}) Σ_c M_cp k_{c,n-1}`.
pub fn reflections(m: &BinaryMatrix, opts: &ReflectionOptions) -> Result<ReflectionsResult> {
    check_pruned(m)?;
    let cells = m.cells();
    let kc0 = m.diversity();
    let kp0 = m.ubiquity();
    let mut kc = vec![kc0.clone()];
    let mut kp = vec![kp0.clone()];
    let step = |kc_prev: &[f64], kp_prev: &[f64]| {
        let c: Vec<f64> = (0..cells.nrows())
            .map(|i| (0..cells.ncols()).map(|j| cells[(i, j)] * kp_prev[j]).sum::<f64>() / kc0[i])
            .collect();
        let p: Vec<f64> = (0..cells.ncols())
            .map(|j| (0..cells.nrows()).map(|i| cells[(i, j)] * kc_prev[i]).sum::<f64>() / kp0[j])
            .collect();
        (c, p)
    };
    let mut converged = false;
    let mut degenerate = false;
    match opts.iterations {
        Some(n) => {
            for _ in 0..n {
                let (c, p) = step(kc.last().unwrap(), kp.last().unwrap());
                kc.push(c);
                kp.push(p);
            }
        }
        None => {
            let cap = opts.max_iterations.max(2);
            while kc.len() - 1 < cap {
                let (c, p) = step(kc.last().unwrap(), kp.last().unwrap());
                kc.push(c);
                kp.push(p);
                let n = kc.len() - 1;
                if n % 2 != 0 {
                    continue;
                }
                if collapsed(&kc[n]) || collapsed(&kp[n]) {
                    degenerate = true;
                    break;
                }
                if spearman(&snapped(&kc[n]), &snapped(&kc[n - 2])) > 1.0 - opts.tolerance {
                    converged = true;
                    break;
                }
            }
        }
    }
    let n = kc.len() - 1;
    let place_index = if collapsed(&kc[n]) { None } else { zscore(&kc[n]) };
    let activity_index = if collapsed(&kp[n]) { None } else { zscore(&kp[n]) };
    degenerate |= place_index.is_none() || activity_index.is_none();
    Ok(ReflectionsResult {
        places: m.rows.clone(),
        activities: m.cols.clone(),
        place_iterates: kc,
        activity_iterates: kp,
        iterations: n,
        place_index: if degenerate { None } else { place_index },
        activity_index: if degenerate { None } else { activity_index },
        degenerate,
        converged,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenIndex {
    pub places: Vec<String>,
    pub index: Vec<f64>,
    pub eigenvalue: f64,
    /// Gap to the third eigenvalue; zero when the eigenspace is shared.
    pub gap: f64,
}

/// Index from the eigenvector of the second-largest eigenvalue of the
/// place–place matrix `D_c^{-1} M D_p^{-1} Mᵀ`, computed through its
/// symmetric similarity transform. The sign is chosen so the index
/// correlates positively with diversity.
pub fn eci_eigen(m: &BinaryMatrix) -> Result<EigenIndex> {
    check_pruned(m)?;
    if m.nrows() < 2 {
        return Err(Error::invalid("eigenvector index needs at least two places"));
    }
    let cells = m.cells();
    let kc0 = m.diversity();
    let kp0 = m.ubiquity();
    let dc = DVector::from_iterator(kc0.len(), kc0.iter().map(|d| 1.0 / d.sqrt()));
    let dp = DVector::from_iterator(kp0.len(), kp0.iter().map(|u| 1.0 / u));
    let a = DMatrix::from_fn(cells.nrows(), cells.ncols(), |i, j| cells[(i, j)] * dc[i]);
    let s = &a * DMatrix::from_diagonal(&dp) * a.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let lam = |k: usize| order.get(k).map(|&i| eig.eigenvalues[i]);
    let l2 = lam(1).unwrap();
    if !l2.is_finite() || eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen(format!("non-finite spectrum: {:?}", eig.eigenvalues.as_slice())));
    }
    let w = eig.eigenvectors.column(order[1]);
    let v: Vec<f64> = (0..w.len()).map(|i| w[i] * dc[i]).collect();
    let mut index = zscore(&v).ok_or_else(|| {
        Error::Degenerate(format!(
            "second eigenvector is constant (eigenvalues {:.6}, {:.6})",
            lam(0).unwrap(),
            l2
        ))
    })?;
    let r = pearson(&index, &kc0);
    let flip = if r.is_nan() || r == 0.0 {
        index.iter().find(|x| x.abs() > 1e-12).is_some_and(|&x| x < 0.0)
    } else {
        r < 0.0
    };
    if flip {
        index.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(EigenIndex {
        places: m.rows.clone(),
        index,
        eigenvalue: l2,
        gap: lam(2).map_or(f64::INFINITY, |l3| l2 - l3),
    })
}

#[derive(Clone, Debug)]
pub struct ProximityMatrix {
    pub labels: Vec<String>,
    pub phi: DMatrix<f64>,
    /// Activities dropped for zero ubiquity.
    pub pruned: Vec<String>,
}

impl ProximityMatrix {
    /// Pairs `i < j` with `φ_ij > threshold`.
    pub fn edges(&self, threshold: f64) -> Vec<(String, String, f64)> {
        let n = self.labels.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let v = self.phi[(i, j)];
                if v > threshold {
                    out.push((self.labels[i].clone(), self.labels[j].clone(), v));
                }
            }
        }
        out
    }
}

/// `φ_ij = min(P(i|j), P(j|i))` of co-occurrence across places.
pub fn proximity(m: &BinaryMatrix) -> Result<ProximityMatrix> {
    let ubi = m.ubiquity();
    let keep: Vec<usize> = (0..ubi.len()).filter(|&j| ubi[j] > 0.0).collect();
    if keep.is_empty() {
        return Err(Error::Degenerate("no activity is present in any place".into()));
    }
    let pruned = (0..ubi.len()).filter(|&j| ubi[j] == 0.0).map(|j| m.cols[j].clone()).collect();
    let sub = m.cells().select_columns(&keep);
    let co = sub.transpose() * &sub;
    let phi = DMatrix::from_fn(keep.len(), keep.len(), |i, j| {
        co[(i, j)] / co[(i, i)].max(co[(j, j)])
    });
    Ok(ProximityMatrix {
        labels: keep.iter().map(|&j| m.cols[j].clone()).collect(),
        phi,
        pruned,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthIncidenceSpec {
    pub n_places: usize,
    pub n_activities: usize,
    /// Share of cells that follow the nested rule; the rest are redrawn at
    /// the place's nested density.
    pub nestedness: f64,
    /// Probability of flipping each cell afterwards.
    pub noise: f64,
}

impl Default for SynthIncidenceSpec {
    fn default() -> Self {
        Self { n_places: 20, n_activities: 50, nestedness: 0.9, noise: 0.02 }
    }
}

#[derive(Clone, Debug)]
pub struct SynthIncidence {
    pub matrix: IncidenceMatrix,
    pub binary: BinaryMatrix,
}

/// Nested place × activity matrix: place `i` holds activities
/// `0..ceil((i+1)·P/C)`, so low-index activities are ubiquitous and
/// high-index places diverse.
pub fn synth_incidence(spec: &SynthIncidenceSpec, seed: u64) -> Result<SynthIncidence> {
    if spec.n_places == 0 || spec.n_activities == 0 {
        return Err(Error::invalid("synthetic matrix needs at least one place and activity"));
    }
    if !(0.0..=1.0).contains(&spec.nestedness) || !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::invalid("nestedness and noise must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let volume = LogNormal::new(0.0, 1.0).expect("valid lognormal");
    let (c, p) = (spec.n_places, spec.n_activities);
    let mut cells = DMatrix::zeros(c, p);
    let mut values = DMatrix::zeros(c, p);
    for i in 0..c {
        let d = ((i + 1) * p).div_ceil(c);
        let density = d as f64 / p as f64;
        for j in 0..p {
            let mut on = if rng.random::<f64>() < spec.nestedness {
                j < d
            } else {
                rng.random::<f64>() < density
            };
            if spec.noise > 0.0 && rng.random::<f64>() < spec.noise {
                on = !on;
            }
            if on {
                cells[(i, j)] = 1.0;
                values[(i, j)] = 1.0 + volume.sample(&mut rng);
            }
        }
    }
    let rows: Vec<String> = (0..c).map(|i| format!("place{i}")).collect();
    let cols: Vec<String> = (0..p).map(|j| format!("act{j}")).collect();
    Ok(SynthIncidence {
        matrix: IncidenceMatrix::new(rows.clone(), cols.clone(), values)?,
        binary: BinaryMatrix::new(rows, cols, cells)?,
    })
}
