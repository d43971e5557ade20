use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gp::{gp_fit_ml, gp_predict, GpConfig};
use super::metrics::{auc, cv_rmse, r2_out_of_sample, rmse};
use super::regress::{logit_fit, ols_fit, RegressOptions};
use crate::error::{Error, Result};
use crate::stats::{derive_seed, mean, par_map, pearson, percentile};

#[derive(Clone, Debug)]
pub struct Dataset {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() || x.ncols() != names.len() {
            return Err(Error::invalid("dataset shape mismatch"));
        }
        Ok(Self { names, x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvModel {
    Ols,
    Logit,
    Gp(GpConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    R2,
    Rmse,
    CvRmse,
    Pearson,
    Auc,
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "r2" => Metric::R2,
            "rmse" => Metric::Rmse,
            "cv_rmse" => Metric::CvRmse,
            "pearson" => Metric::Pearson,
            "auc" => Metric::Auc,
            _ => return Err(Error::invalid(format!("unknown metric '{s}'"))),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CvResult {
    pub metric: Metric,
    pub folds: Vec<Vec<usize>>,
    pub fold_metrics: Vec<f64>,
    pub mean: f64,
    /// 95% percentile-bootstrap interval of the mean over folds.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

const TAG_FOLDS: u64 = 0x20;
const TAG_BOOT: u64 = 0x21;
const BOOTSTRAP: usize = 2000;

/// Seeded shuffle dealt round-robin into `k` folds (sizes differ by at most
/// one); each fold's indices are sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::invalid(format!("need 2 <= K <= n, got K = {k}, n = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_FOLDS, 0)));
    let mut folds = vec![Vec::new(); k];
    for (pos, &i) in perm.iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn predict_fold(data: &Dataset, model: &CvModel, train: &[usize], test: &[usize]) -> Result<Vec<f64>> {
    let tr = data.subset(train);
    match model {
        CvModel::Ols | CvModel::Logit => {
            let opts = RegressOptions::default();
            let fit = if matches!(model, CvModel::Ols) {
                ols_fit(&tr.names, &tr.x, &tr.y, &opts)?
            } else {
                logit_fit(&tr.names, &tr.x, &tr.y, &opts)?
            };
            Ok(test.iter().map(|&i| fit.predict(&data.row(i))).collect())
        }
        CvModel::Gp(cfg) => {
            let xs: Vec<Vec<f64>> = (0..tr.len()).map(|i| tr.row(i)).collect();
            let gp = gp_fit_ml(&xs, &tr.y, cfg)?;
            test.iter().map(|&i| gp_predict(&gp, &data.row(i)).map(|p| p.0)).collect()
        }
    }
}

fn score(metric: Metric, pred: &[f64], obs: &[f64]) -> Result<f64> {
    match metric {
        Metric::R2 => r2_out_of_sample(pred, obs),
        Metric::Rmse => rmse(pred, obs),
        Metric::CvRmse => cv_rmse(pred, obs),
        Metric::Pearson => Ok(pearson(pred, obs)),
        Metric::Auc => auc(pred, &obs.iter().map(|&v| v == 1.0).collect::<Vec<_>>()),
    }
}

/// K-fold cross-validation: out-of-sample metric per fold, their mean, and a
/// bootstrap interval for that mean.
pub fn kfold_cv(data: &Dataset, model: &CvModel, k: usize, seed: u64, metric: Metric) -> Result<CvResult> {
    let folds = kfold_indices(data.len(), k, seed)?;
    let per_fold = par_map(k, |f| {
        let test = &folds[f];
        let train: Vec<usize> = (0..data.len()).filter(|i| test.binary_search(i).is_err()).collect();
        let pred = predict_fold(data, model, &train, test)
            .map_err(|e| Error::Degenerate(format!("fold {f}: {e}")))?;
        let obs: Vec<f64> = test.iter().map(|&i| data.y[i]).collect();
        score(metric, &pred, &obs).map_err(|e| Error::Degenerate(format!("fold {f}: {e}")))
    });
    let fold_metrics = per_fold.into_iter().collect::<Result<Vec<f64>>>()?;
    let m = mean(&fold_metrics);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_BOOT, 0));
    let boots: Vec<f64> = (0..BOOTSTRAP)
        .map(|_| (0..k).map(|_| fold_metrics[rng.random_range(0..k)]).sum::<f64>() / k as f64)
        .collect();
    Ok(CvResult {
        metric,
        folds,
        mean: m,
        ci_lo: percentile(&boots, 0.025),
        ci_hi: percentile(&boots, 0.975),
        fold_metrics,
    })
}
