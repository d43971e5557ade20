use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomConfig {
    pub width: usize,
    pub height: usize,
    pub epochs: usize,
    pub alpha_start: f64,
    pub alpha_end: f64,
    /// Defaults to `max(width, height) / 2`.
    pub radius_start: Option<f64>,
    pub radius_end: f64,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            width: 4,
            height: 4,
            epochs: 100,
            alpha_start: 0.05,
            alpha_end: 0.01,
            radius_start: None,
            radius_end: 1.0,
        }
    }
}

impl SomConfig {
    fn radius0(&self) -> f64 {
        self.radius_start.unwrap_or(self.width.max(self.height) as f64 / 2.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SomGrid {
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    /// Row-major: unit `i` sits at column `i % width`, row `i / width`.
    pub codebooks: Vec<Vec<f64>>,
    pub trained: bool,
    pub config: SomConfig,
    /// Quantization error after each epoch.
    pub qe_history: Vec<f64>,
}

impl SomGrid {
    pub fn units(&self) -> usize {
        self.codebooks.len()
    }

    pub fn position(&self, unit: usize) -> (f64, f64) {
        ((unit % self.width) as f64, (unit / self.width) as f64)
    }

    /// Mean Euclidean distance from each sample to its best-matching unit.
    pub fn quantization_error(&self, data: &[Vec<f64>]) -> Result<f64> {
        let mut total = 0.0;
        for x in data {
            let u = som_map(self, x)?;
            total += dist2(&self.codebooks[u], x).sqrt();
        }
        Ok(total / data.len() as f64)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn bmu(codebooks: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, m) in codebooks.iter().enumerate() {
        let d = dist2(m, x);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Kohonen training: `m_i ← m_i + α(t)·exp(-d²(c,i)/2σ(t)²)·(x - m_i)`, with
/// `α` and `σ` decreasing linearly over all presentations.
pub fn som_train(data: &[Vec<f64>], cfg: &SomConfig, seed: u64) -> Result<SomGrid> {
    if data.is_empty() {
        return Err(Error::Empty("SOM needs at least one sample".into()));
    }
    if cfg.width == 0 || cfg.height == 0 {
        return Err(Error::invalid("SOM grid dimensions must be positive"));
    }
    let dim = data[0].len();
    if data.iter().any(|x| x.len() != dim) {
        return Err(Error::invalid("SOM samples differ in dimension"));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("SOM data must be finite"));
    }
    let units = cfg.width * cfg.height;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codebooks: Vec<Vec<f64>> = if data.len() >= units {
        rand::seq::index::sample(&mut rng, data.len(), units)
            .into_iter()
            .map(|i| data[i].clone())
            .collect()
    } else {
        (0..units).map(|_| data[rng.random_range(0..data.len())].clone()).collect()
    };
    let mut grid = SomGrid {
        width: cfg.width,
        height: cfg.height,
        dim,
        codebooks,
        trained: false,
        config: cfg.clone(),
        qe_history: Vec::new(),
    };
    if cfg.epochs == 0 {
        return Ok(grid);
    }
    let total = cfg.epochs * data.len();
    let r0 = cfg.radius0();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut t = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let frac = if total > 1 { t as f64 / (total - 1) as f64 } else { 0.0 };
            let alpha = cfg.alpha_start + (cfg.alpha_end - cfg.alpha_start) * frac;
            let sigma = r0 + (cfg.radius_end - r0) * frac;
            let x = &data[k];
            let c = bmu(&grid.codebooks, x);
            let pc = grid.position(c);
            for i in 0..units {
                let pi = grid.position(i);
                let d2 = (pc.0 - pi.0).powi(2) + (pc.1 - pi.1).powi(2);
                let h = if sigma > 0.0 {
                    alpha * (-d2 / (2.0 * sigma * sigma)).exp()
                } else if i == c {
                    alpha
                } else {
                    0.0
                };
                for (m, xv) in grid.codebooks[i].iter_mut().zip(x) {
                    *m += h * (xv - *m);
                }
            }
            t += 1;
        }
        let qe = grid.quantization_error(data)?;
        grid.qe_history.push(qe);
    }
    grid.trained = true;
    Ok(grid)
}

/// Index of the nearest codebook; ties go to the lowest index.
pub fn som_map(grid: &SomGrid, x: &[f64]) -> Result<usize> {
    if x.len() != grid.dim {
        return Err(Error::invalid(format!(
            "input has dimension {}, grid expects {}",
            x.len(),
            grid.dim
        )));
    }
    Ok(bmu(&grid.codebooks, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_ties_and_exact_hits() {
        let grid = SomGrid {
            width: 3,
            height: 1,
            dim: 1,
            codebooks: vec![vec![0.0], vec![2.0], vec![4.0]],
            trained: true,
            config: SomConfig::default(),
            qe_history: vec![],
        };
        assert_eq!(som_map(&grid, &[2.0]).unwrap(), 1);
        assert_eq!(som_map(&grid, &[1.0]).unwrap(), 0);
        assert_eq!(som_map(&grid, &[3.0]).unwrap(), 1);
        assert!(som_map(&grid, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_epochs_returns_initialized() {
        let data = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let cfg = SomConfig { width: 2, height: 1, epochs: 0, ..Default::default() };
        let g = som_train(&data, &cfg, 1).unwrap();
        assert!(!g.trained);
        assert!(g.codebooks.iter().all(|c| data.contains(c)));
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = SomConfig::default();
        assert!(som_train(&[], &cfg, 0).is_err());
        assert!(som_train(&[vec![f64::NAN]], &cfg, 0).is_err());
        assert!(som_train(&[vec![1.0], vec![1.0, 2.0]], &cfg, 0).is_err());
    }
}
