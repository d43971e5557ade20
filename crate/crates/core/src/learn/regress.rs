//! Linear and logistic regression, and simulation of quantities of interest
//! from the coefficients' sampling distribution.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::stats::{derive_seed, mean, par_map, percentile_sorted};

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressOptions {
    pub intercept: bool,
    /// Per-row weights (weighted least squares / weighted likelihood).
    pub weights: Option<Vec<f64>>,
}

impl Default for RegressOptions {
    fn default() -> Self {
        Self { intercept: true, weights: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Ols,
    Logit,
}

fn ser_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct FitSummary {
    pub kind: FitKind,
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    /// t statistics (OLS) or z statistics (logit).
    pub stat: Vec<f64>,
    pub p_value: Vec<f64>,
    /// Centered R² (OLS) or McFadden's pseudo-R² (logit).
    pub r2: f64,
    pub adj_r2: f64,
    pub bic: f64,
    pub n: usize,
    pub df_resid: usize,
    pub rss: Option<f64>,
    pub log_likelihood: f64,
    pub deviance: Option<f64>,
    pub iterations: Option<usize>,
    pub intercept: bool,
    #[serde(serialize_with = "ser_matrix")]
    pub covariance: DMatrix<f64>,
}

impl FitSummary {
    /// Linear predictor for covariates in fit order (without the intercept).
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        let beta = &self.coef;
        let off = usize::from(self.intercept);
        let mut eta = if self.intercept { beta[0] } else { 0.0 };
        for (b, x) in beta[off..].iter().zip(row) {
            eta += b * x;
        }
        eta
    }

    /// Fitted mean response: `x·β` for OLS, `σ(x·β)` for logit.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let eta = self.linear_predictor(row);
        match self.kind {
            FitKind::Ols => eta,
            FitKind::Logit => sigmoid(eta),
        }
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coef[i])
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names[usize::from(self.intercept)..]
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Design {
    names: Vec<String>,
    x: DMatrix<f64>,
    w: Vec<f64>,
}

fn design(names: &[String], x: &DMatrix<f64>, y: &[f64], opts: &RegressOptions) -> Result<Design> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::invalid(format!("{} design rows but {} responses", x.nrows(), n)));
    }
    if x.ncols() != names.len() {
        return Err(Error::invalid("covariate names do not match design columns"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression data must be finite"));
    }
    let w = match &opts.weights {
        Some(w) if w.len() != n => return Err(Error::invalid("weight vector length differs from data")),
        Some(w) if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) => {
            return Err(Error::invalid("weights must be finite and non-negative"))
        }
        Some(w) => w.clone(),
        None => vec![1.0; n],
    };
    let off = usize::from(opts.intercept);
    let p = x.ncols() + off;
    let full = DMatrix::from_fn(n, p, |i, j| if j < off { 1.0 } else { x[(i, j - off)] });
    let mut all = Vec::with_capacity(p);
    if opts.intercept {
        all.push(INTERCEPT.to_string());
    }
    all.extend(names.iter().cloned());
    let effective = w.iter().filter(|&&v| v > 0.0).count();
    if effective <= p {
        return Err(Error::invalid(format!("need more than {p} observations with positive weight, got {effective}")));
    }
    check_rank(&all, &full, &w)?;
    Ok(Design { names: all, x: full, w })
}

/// Sequential Gram–Schmidt on unit-norm (weighted) columns; columns that add
/// less than 1e-10 of new direction are reported by name.
fn check_rank(names: &[String], x: &DMatrix<f64>, w: &[f64]) -> Result<()> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let mut v = DVector::from_fn(x.nrows(), |i, _| x[(i, j)] * w[i].sqrt());
        let norm = v.norm();
        if norm == 0.0 {
            bad.push(names[j].clone());
            continue;
        }
        v /= norm;
        for _ in 0..2 {
            for b in &basis {
                let d = b.dot(&v);
                v -= b * d;
            }
        }
        let rest = v.norm();
        if rest < 1e-10 {
            bad.push(names[j].clone());
        } else {
            basis.push(v / rest);
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient(bad))
    }
}

/// Least squares via QR with classical standard errors and t-based p-values.
/// `BIC = n ln(RSS/n) + p ln n`.
pub fn ols_fit(names: &[String], x: &DMatrix<f64>, y: &[f64], opts: &RegressOptions) -> Result<FitSummary> {
    let d = design(names, x, y, opts)?;
    let n = y.len();
    let p = d.x.ncols();
    let sw: Vec<f64> = d.w.iter().map(|v| v.sqrt()).collect();
    let xw = DMatrix::from_fn(n, p, |i, j| d.x[(i, j)] * sw[i]);
    let yw = DVector::from_fn(n, |i, _| y[i] * sw[i]);
    let qr = xw.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &yw;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(d.names.clone()))?;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient(d.names.clone()))?;
    let resid = &yw - &xw * &beta;
    let rss = resid.norm_squared();
    let n_eff = d.w.iter().filter(|&&v| v > 0.0).count();
    let df = n_eff - p;
    let s2 = rss / df as f64;
    let cov = &rinv * rinv.transpose() * s2;
    let wsum: f64 = d.w.iter().sum();
    let ybar = d.w.iter().zip(y).map(|(w, v)| w * v).sum::<f64>() / wsum;
    let tss: f64 = d.w.iter().zip(y).map(|(w, v)| w * (v - ybar).powi(2)).sum();
    let r2 = 1.0 - rss / tss;
    let denom = if opts.intercept { n_eff as f64 - 1.0 } else { n_eff as f64 };
    let adj_r2 = 1.0 - (1.0 - r2) * denom / df as f64;
    let nf = n_eff as f64;
    let bic = nf * (rss / nf).ln() + p as f64 * nf.ln();
    let log_likelihood = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + (rss / nf).ln() + 1.0);
    let t = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let coef: Vec<f64> = beta.iter().copied().collect();
    let se: Vec<f64> = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let stat: Vec<f64> = coef.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p_value = stat
        .iter()
        .map(|z| if z.is_nan() { f64::NAN } else { 2.0 * t.cdf(-z.abs()) })
        .collect();
    Ok(FitSummary {
        kind: FitKind::Ols,
        names: d.names,
        coef,
        se,
        stat,
        p_value,
        r2,
        adj_r2,
        bic,
        n: n_eff,
        df_resid: df,
        rss: Some(rss),
        log_likelihood,
        deviance: None,
        iterations: None,
        intercept: opts.intercept,
        covariance: cov,
    })
}

const LOGIT_TOL: f64 = 1e-8;
const LOGIT_MAX_ITER: usize = 100;
/// Linear predictors beyond this magnitude mean fitted probabilities of 0/1.
const SEPARATION_ETA: f64 = 30.0;

fn bernoulli_loglik(y: &[f64], w: &[f64], eta: &DVector<f64>) -> f64 {
    y.iter()
        .zip(w)
        .zip(eta.iter())
        .map(|((&yi, &wi), &e)| {
            // log σ(e) = -log(1 + e^{-e})
            let log1pexp = |z: f64| if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            wi * (yi * -log1pexp(-e) + (1.0 - yi) * -log1pexp(e))
        })
        .sum()
}

/// Maximum likelihood by iteratively reweighted least squares (tolerance 1e-8
/// on relative deviance change, at most 100 iterations). Normal-approximation
/// p-values; McFadden pseudo-R².
pub fn logit_fit(names: &[String], x: &DMatrix<f64>, y: &[f64], opts: &RegressOptions) -> Result<FitSummary> {
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("logit response must be 0/1"));
    }
    let d = design(names, x, y, opts)?;
    let pos = y.iter().zip(&d.w).filter(|(v, w)| **v == 1.0 && **w > 0.0).count();
    let neg = y.iter().zip(&d.w).filter(|(v, w)| **v == 0.0 && **w > 0.0).count();
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("logit needs both outcome classes"));
    }
    let n = y.len();
    let p = d.x.ncols();
    let mut beta = DVector::zeros(p);
    let mut eta = DVector::zeros(n);
    let mut dev = -2.0 * bernoulli_loglik(y, &d.w, &eta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < LOGIT_MAX_ITER {
        iterations += 1;
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let wt: Vec<f64> = (0..n).map(|i| d.w[i] * (mu[i] * (1.0 - mu[i])).max(1e-300)).collect();
        let xtw = DMatrix::from_fn(p, n, |j, i| d.x[(i, j)] * wt[i]);
        let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - mu[i]) / (mu[i] * (1.0 - mu[i])).max(1e-300));
        let xtwx = &xtw * &d.x;
        let chol = xtwx.cholesky().ok_or_else(|| {
            Error::Separation("information matrix lost positive definiteness".into())
        })?;
        beta = chol.solve(&(&xtw * z));
        eta = &d.x * &beta;
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Separation("coefficients diverged".into()));
        }
        let new_dev = -2.0 * bernoulli_loglik(y, &d.w, &eta);
        if (new_dev - dev).abs() / (new_dev.abs() + 0.1) < LOGIT_TOL {
            dev = new_dev;
            converged = true;
            break;
        }
        dev = new_dev;
    }
    if !converged {
        return Err(Error::Separation(format!("no convergence in {LOGIT_MAX_ITER} iterations")));
    }
    let max_eta = eta
        .iter()
        .zip(&d.w)
        .filter(|(_, w)| **w > 0.0)
        .fold(0f64, |m, (e, _)| m.max(e.abs()));
    if max_eta > SEPARATION_ETA {
        return Err(Error::Separation(format!(
            "fitted probabilities at 0 or 1 (|linear predictor| up to {max_eta:.1})"
        )));
    }
    let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
    let xtw = DMatrix::from_fn(p, n, |j, i| d.x[(i, j)] * d.w[i] * mu[i] * (1.0 - mu[i]));
    let cov = (&xtw * &d.x)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Separation("singular information matrix".into()))?;
    let ll = -0.5 * dev;
    let wsum: f64 = d.w.iter().sum();
    let ybar = d.w.iter().zip(y).map(|(w, v)| w * v).sum::<f64>() / wsum;
    let ll0 = d.w.iter().zip(y).map(|(w, v)| w * (v * ybar.ln() + (1.0 - v) * (1.0 - ybar).ln())).sum::<f64>();
    let n_eff = d.w.iter().filter(|&&v| v > 0.0).count();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let coef: Vec<f64> = beta.iter().copied().collect();
    let se: Vec<f64> = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let stat: Vec<f64> = coef.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p_value = stat.iter().map(|z| 2.0 * normal.cdf(-z.abs())).collect();
    let k_cov = (p - usize::from(opts.intercept)) as f64;
    Ok(FitSummary {
        kind: FitKind::Logit,
        names: d.names,
        coef,
        se,
        stat,
        p_value,
        r2: 1.0 - ll / ll0,
        adj_r2: 1.0 - (ll - k_cov) / ll0,
        bic: dev + p as f64 * (n_eff as f64).ln(),
        n: n_eff,
        df_resid: n_eff - p,
        rss: None,
        log_likelihood: ll,
        deviance: Some(dev),
        iterations: Some(iterations),
        intercept: opts.intercept,
        covariance: cov,
    })
}

/// Covariate values by name; the intercept is implicit.
pub type Scenario = BTreeMap<String, f64>;

fn scenario_row(fit: &FitSummary, s: &Scenario) -> Result<Vec<f64>> {
    let names = fit.covariate_names();
    if let Some(extra) = s.keys().find(|k| !names.contains(k)) {
        return Err(Error::invalid(format!("scenario names unknown covariate '{extra}'")));
    }
    names
        .iter()
        .map(|n| {
            s.get(n)
                .copied()
                .ok_or_else(|| Error::invalid(format!("scenario is missing covariate '{n}'")))
        })
        .collect()
}

/// Draws from `N(mean, cov)` through an eigendecomposition, so singular and
/// zero covariances are allowed.
pub struct MvnSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl MvnSampler {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        if cov.shape() != (p, p) {
            return Err(Error::invalid("covariance shape does not match mean"));
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let scale = eig.eigenvalues.iter().fold(1f64, |m, v| m.max(v.abs()));
        if let Some(v) = eig.eigenvalues.iter().find(|&&v| v < -1e-10 * scale || !v.is_finite()) {
            return Err(Error::NotPositiveDefinite(format!(
                "covariance has eigenvalue {v:e}"
            )));
        }
        let root = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        Ok(Self { mean, factor: &eig.eigenvectors * root })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.factor * z
    }
}

const SIM_CHUNK: usize = 1000;
const TAG_LOGIT_SIM: u64 = 0x10;
const TAG_FIRST_DIFF: u64 = 0x11;

/// Runs `n` draws in fixed-size chunks, each chunk with its own substream.
fn chunked_draws<T, F>(n: usize, seed: u64, tag: u64, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
{
    let chunks = n.div_ceil(SIM_CHUNK);
    par_map(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, c as u64));
        let len = SIM_CHUNK.min(n - c * SIM_CHUNK);
        (0..len).map(|_| draw(&mut rng)).collect::<Vec<T>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulatedOutcome {
    /// Mean of the simulated binary outcomes.
    pub expected_value: f64,
    /// Mean of the simulated probabilities.
    pub mean_probability: f64,
    /// 2.5th and 97.5th percentiles of the simulated probabilities.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_sims: usize,
}

/// Draws `β̃ ~ N(β̂, V̂)`, evaluates `π̃ = σ(x·β̃)` at the scenario, then a
/// binary outcome `Y ~ Bernoulli(π̃)`.
pub fn logit_simulate(fit: &FitSummary, scenario: &Scenario, n_sims: usize, seed: u64) -> Result<SimulatedOutcome> {
    if fit.kind != FitKind::Logit {
        return Err(Error::invalid("logit_simulate needs a logit fit"));
    }
    if n_sims == 0 {
        return Err(Error::invalid("n_sims must be positive"));
    }
    let row = scenario_row(fit, scenario)?;
    let mut x = Vec::with_capacity(fit.coef.len());
    if fit.intercept {
        x.push(1.0);
    }
    x.extend(row);
    let x = DVector::from_vec(x);
    let mvn = MvnSampler::new(DVector::from_column_slice(&fit.coef), &fit.covariance)?;
    let draws = chunked_draws(n_sims, seed, TAG_LOGIT_SIM, |rng| {
        let b = mvn.sample(rng);
        let pi = sigmoid(x.dot(&b));
        let y = if rng.random::<f64>() < pi { 1.0 } else { 0.0 };
        (pi, y)
    });
    let mut pis: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let ys: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let mean_probability = mean(&pis);
    pis.sort_by(|a, b| a.total_cmp(b));
    Ok(SimulatedOutcome {
        expected_value: mean(&ys),
        mean_probability,
        ci_lo: percentile_sorted(&pis, 0.025),
        ci_hi: percentile_sorted(&pis, 0.975),
        n_sims,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FirstDifference {
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Two-sided level of the interval, e.g. 0.95.
    pub level: f64,
    pub n_sims: usize,
}

/// Distribution of `E[Y | hi] - E[Y | lo]` over coefficient draws. The
/// interval spans the `alpha/2` and `1 - alpha/2` percentiles.
pub fn first_differences(
    fit: &FitSummary,
    lo: &Scenario,
    hi: &Scenario,
    n_sims: usize,
    seed: u64,
    alpha: f64,
) -> Result<FirstDifference> {
    if n_sims == 0 {
        return Err(Error::invalid("n_sims must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let a = scenario_row(fit, lo)?;
    let b = scenario_row(fit, hi)?;
    let mvn = MvnSampler::new(DVector::from_column_slice(&fit.coef), &fit.covariance)?;
    let off = usize::from(fit.intercept);
    let eta = |beta: &DVector<f64>, row: &[f64]| {
        let mut e = if fit.intercept { beta[0] } else { 0.0 };
        for (k, v) in row.iter().enumerate() {
            e += beta[off + k] * v;
        }
        e
    };
    let mut diffs = chunked_draws(n_sims, seed, TAG_FIRST_DIFF, |rng| {
        let beta = mvn.sample(rng);
        match fit.kind {
            FitKind::Ols => {
                let mut d = 0.0;
                for k in 0..a.len() {
                    d += beta[off + k] * (b[k] - a[k]);
                }
                d
            }
            FitKind::Logit => sigmoid(eta(&beta, &b)) - sigmoid(eta(&beta, &a)),
        }
    });
    let estimate = mean(&diffs);
    diffs.sort_by(|x, y| x.total_cmp(y));
    Ok(FirstDifference {
        estimate,
        ci_lo: percentile_sorted(&diffs, alpha / 2.0),
        ci_hi: percentile_sorted(&diffs, 1.0 - alpha / 2.0),
        level: 1.0 - alpha,
        n_sims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn exact_line() {
        let x = DMatrix::from_fn(6, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..6).map(|i| 2.0 * i as f64).collect();
        let f = ols_fit(&names(1), &x, &y, &RegressOptions::default()).unwrap();
        assert!((f.coef[1] - 2.0).abs() < 1e-12);
        assert!(f.coef[0].abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_target() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let y = [1.0, 1.0, -1.0, -1.0];
        let f = ols_fit(&names(1), &x, &y, &RegressOptions::default()).unwrap();
        assert!(f.coef.iter().all(|c| c.abs() < 1e-12));
        assert!(f.r2.abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_named() {
        let x = DMatrix::from_fn(8, 3, |i, j| match j {
            0 => i as f64,
            1 => (i * i) as f64,
            _ => 3.0 * i as f64 - 1.0,
        });
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        match ols_fit(&names(3), &x, &y, &RegressOptions::default()) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["x2"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn intercept_only_logit() {
        let y: Vec<f64> = (0..10).map(|i| if i < 3 { 1.0 } else { 0.0 }).collect();
        let f = logit_fit(&[], &DMatrix::zeros(10, 0), &y, &RegressOptions::default()).unwrap();
        assert!((f.coef[0] - (0.3f64 / 0.7).ln()).abs() < 1e-8);
    }

    #[test]
    fn separation_detected() {
        let x = DMatrix::from_column_slice(6, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            logit_fit(&names(1), &x, &y, &RegressOptions::default()),
            Err(Error::Separation(_))
        ));
        assert!(logit_fit(&names(1), &x, &[0.0; 6], &RegressOptions::default()).is_err());
    }

    #[test]
    fn scenario_must_cover_covariates() {
        let x = DMatrix::from_fn(10, 2, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 + (i % 3) as f64).collect();
        let f = ols_fit(&names(2), &x, &y, &RegressOptions::default()).unwrap();
        let lo: Scenario = [("x0".to_string(), 1.0)].into();
        assert!(first_differences(&f, &lo, &lo, 10, 0, 0.05).is_err());
        let full: Scenario = [("x0".to_string(), 1.0), ("x1".to_string(), 2.0)].into();
        let fd = first_differences(&f, &full, &full, 100, 0, 0.05).unwrap();
        assert_eq!((fd.estimate, fd.ci_lo, fd.ci_hi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn mvn_rejects_indefinite() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(MvnSampler::new(DVector::zeros(2), &cov).is_err());
        assert!(MvnSampler::new(DVector::zeros(2), &DMatrix::zeros(2, 2)).is_ok());
    }
}
