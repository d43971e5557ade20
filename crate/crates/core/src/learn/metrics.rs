use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{mean, midranks, pearson};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub rmse: f64,
    /// `None` when the observed mean is zero.
    pub cv_rmse: Option<f64>,
    /// Out-of-sample form, `1 - SSE/SST` about the observed mean.
    pub r2: f64,
    pub pearson: f64,
}

fn check(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(Error::invalid(format!("{} predictions for {} observations", pred.len(), obs.len())));
    }
    if pred.len() < 2 {
        return Err(Error::invalid("need at least two observations"));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    let sse: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum();
    Ok((sse / obs.len() as f64).sqrt())
}

/// `RMSE / ȳ`.
pub fn cv_rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    let r = rmse(pred, obs)?;
    let ybar = mean(obs);
    if ybar == 0.0 {
        return Err(Error::invalid("CV(RMSE) undefined for zero observed mean"));
    }
    Ok(r / ybar)
}

pub fn r2_out_of_sample(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    let ybar = mean(obs);
    let sse: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum();
    let sst: f64 = obs.iter().map(|o| (o - ybar).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

/// Centered R² of fitted values on their own training data.
pub fn r2_in_sample(fitted: &[f64], obs: &[f64]) -> Result<f64> {
    r2_out_of_sample(fitted, obs)
}

pub fn metrics(pred: &[f64], obs: &[f64]) -> Result<Metrics> {
    Ok(Metrics {
        rmse: rmse(pred, obs)?,
        cv_rmse: cv_rmse(pred, obs).ok(),
        r2: r2_out_of_sample(pred, obs)?,
        pearson: pearson(pred, obs),
    })
}

/// Mann–Whitney AUC with midranks for tied scores.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let n1 = labels.iter().filter(|&&l| l).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::invalid("AUC needs both classes"));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_predictions() {
        let obs = [1.0, 2.0, 4.0, 5.0];
        let m = metrics(&obs, &obs).unwrap();
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.r2, 1.0);
        let flat = [3.0; 4];
        assert_eq!(r2_out_of_sample(&flat, &obs).unwrap(), 0.0);
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
    }

    #[test]
    fn cv_rmse_by_hand() {
        // errors 1, -1, 2, 0 -> mse 6/4, ȳ = 3
        let obs = [2.0, 3.0, 1.0, 6.0];
        let pred = [3.0, 2.0, 3.0, 6.0];
        assert_eq!(rmse(&pred, &obs).unwrap(), 1.5f64.sqrt());
        assert_eq!(cv_rmse(&pred, &obs).unwrap(), 1.5f64.sqrt() / 3.0);
        assert!(cv_rmse(&[1.0, 1.0], &[1.0, -1.0]).is_err());
        assert!(metrics(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn auc_ties_count_half() {
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    }
}
