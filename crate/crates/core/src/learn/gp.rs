//! Ordinary (or universal, with a linear basis) kriging with a
//! squared-exponential correlation `R(x, x') = exp(-Σ_k θ_k (x_k - x'_k)²)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpBasis {
    #[default]
    Constant,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    /// Fixed correlation parameters; `None` selects them by likelihood.
    pub theta: Option<Vec<f64>>,
    pub nugget: f64,
    pub basis: GpBasis,
    /// Candidate values of each θ_k for the likelihood search.
    pub theta_grid: Vec<f64>,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            theta: None,
            nugget: 1e-10,
            basis: GpBasis::Constant,
            theta_grid: (0..=24).map(|i| 10f64.powf(-3.0 + 0.25 * i as f64)).collect(),
        }
    }
}

const MAX_NUGGET: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GpModel {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
    /// Nugget actually used after escalation.
    pub nugget: f64,
    pub basis: GpBasis,
    pub beta: DVector<f64>,
    /// `R⁻¹(y - Fβ)`.
    pub gamma: DVector<f64>,
    pub sigma2: f64,
    pub log_likelihood: f64,
    chol: Cholesky<f64, Dyn>,
    /// `(Fᵀ R⁻¹ F)⁻¹`.
    ftrf_inv: DMatrix<f64>,
    f: DMatrix<f64>,
}

fn corr(theta: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = theta.iter().zip(a.iter().zip(b)).map(|(t, (u, v))| t * (u - v) * (u - v)).sum();
    (-s).exp()
}

fn basis_row(basis: GpBasis, x: &[f64]) -> Vec<f64> {
    match basis {
        GpBasis::Constant => vec![1.0],
        GpBasis::Linear => std::iter::once(1.0).chain(x.iter().copied()).collect(),
    }
}

fn validate(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} inputs but {} targets", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("kriging needs at least two training points"));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("training inputs must share a positive dimension"));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("training data must be finite"));
    }
    for i in 0..x.len() {
        for j in 0..i {
            if x[i] == x[j] {
                return Err(Error::invalid(format!("training rows {j} and {i} coincide")));
            }
        }
    }
    Ok(d)
}

/// Generalized-least-squares fit for fixed `θ`. The nugget is raised ×10 from
/// its starting value (or 1e-10 when zero) until `R` factorizes, up to 1e-4.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64], theta: &[f64], nugget: f64, basis: GpBasis) -> Result<GpModel> {
    let d = validate(x, y)?;
    if theta.len() != d || theta.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::invalid(format!("need {d} positive correlation parameters")));
    }
    if !(nugget >= 0.0) {
        return Err(Error::invalid("nugget must be non-negative"));
    }
    let n = x.len();
    let base = DMatrix::from_fn(n, n, |i, j| corr(theta, &x[i], &x[j]));
    let mut nug = nugget;
    let chol = loop {
        let r = &base + DMatrix::identity(n, n) * nug;
        if let Some(c) = Cholesky::new(r) {
            break c;
        }
        nug = if nug == 0.0 { 1e-10 } else { nug * 10.0 };
        if nug > MAX_NUGGET * (1.0 + 1e-9) {
            let eig = base.clone().symmetric_eigenvalues();
            let (lo, hi) = eig.iter().fold((f64::INFINITY, 0f64), |(l, h), &v| (l.min(v), h.max(v.abs())));
            return Err(Error::NotPositiveDefinite(format!(
                "correlation matrix not positive definite at nugget {MAX_NUGGET:e}; condition estimate {:.3e}",
                hi / lo.abs().max(f64::MIN_POSITIVE)
            )));
        }
    };
    let rows: Vec<Vec<f64>> = x.iter().map(|r| basis_row(basis, r)).collect();
    let q = rows[0].len();
    if n < q {
        return Err(Error::invalid("too few training points for the regression basis"));
    }
    let f = DMatrix::from_fn(n, q, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let rinv_f = chol.solve(&f);
    let ftrf = f.transpose() * &rinv_f;
    let ftrf_inv = ftrf
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::RankDeficient(vec!["regression basis".into()]))?;
    let beta = &ftrf_inv * (rinv_f.transpose() * &yv);
    let resid = &yv - &f * &beta;
    let gamma = chol.solve(&resid);
    let sigma2 = (resid.dot(&gamma) / n as f64).max(0.0);
    let log_det: f64 = chol.l_dirty().diagonal().iter().take(n).map(|v| 2.0 * v.ln()).sum();
    let log_likelihood = -0.5 * (n as f64 * sigma2.max(f64::MIN_POSITIVE).ln() + log_det);
    Ok(GpModel {
        x: x.to_vec(),
        y: y.to_vec(),
        theta: theta.to_vec(),
        nugget: nug,
        basis,
        beta,
        gamma,
        sigma2,
        log_likelihood,
        chol,
        ftrf_inv,
        f,
    })
}

/// Fits with `cfg.theta` if given, otherwise maximizes the concentrated
/// likelihood: an isotropic pass over `theta_grid`, then one coordinate pass
/// per dimension.
pub fn gp_fit_ml(x: &[Vec<f64>], y: &[f64], cfg: &GpConfig) -> Result<GpModel> {
    let d = validate(x, y)?;
    if let Some(theta) = &cfg.theta {
        return gp_fit(x, y, theta, cfg.nugget, cfg.basis);
    }
    if cfg.theta_grid.is_empty() {
        return Err(Error::invalid("empty theta grid"));
    }
    let try_fit = |theta: &[f64]| gp_fit(x, y, theta, cfg.nugget, cfg.basis).ok();
    let better = |a: &Option<GpModel>, b: &GpModel| match a {
        None => true,
        Some(m) => b.log_likelihood > m.log_likelihood + 1e-12,
    };
    let mut best: Option<GpModel> = None;
    for &t in &cfg.theta_grid {
        if let Some(m) = try_fit(&vec![t; d]) {
            if better(&best, &m) {
                best = Some(m);
            }
        }
    }
    if d > 1 {
        for k in 0..d {
            let Some(current) = best.clone() else { break };
            for &t in &cfg.theta_grid {
                let mut theta = current.theta.clone();
                theta[k] = t;
                if let Some(m) = try_fit(&theta) {
                    if better(&best, &m) {
                        best = Some(m);
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::NotPositiveDefinite("no candidate θ gave a factorizable correlation matrix".into()))
}

/// Predictive mean `f(x)ᵀβ + r(x)ᵀγ` and variance
/// `σ²(1 - rᵀR⁻¹r + uᵀ(FᵀR⁻¹F)⁻¹u)` with `u = FᵀR⁻¹r - f(x)`, clamped at 0.
pub fn gp_predict(model: &GpModel, x: &[f64]) -> Result<(f64, f64)> {
    if x.len() != model.theta.len() {
        return Err(Error::invalid(format!(
            "input has dimension {}, model expects {}",
            x.len(),
            model.theta.len()
        )));
    }
    let r = DVector::from_iterator(model.x.len(), model.x.iter().map(|xi| corr(&model.theta, xi, x)));
    let fx = DVector::from_vec(basis_row(model.basis, x));
    let mean = fx.dot(&model.beta) + r.dot(&model.gamma);
    let rinv_r = model.chol.solve(&r);
    let u = model.f.transpose() * &rinv_r - &fx;
    let var = model.sigma2 * (1.0 - r.dot(&rinv_r) + u.dot(&(&model.ftrf_inv * &u)));
    Ok((mean, var.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target() {
        let x = vec![vec![0.0], vec![1.0], vec![2.5]];
        let m = gp_fit(&x, &[4.0; 3], &[1.0], 0.0, GpBasis::Constant).unwrap();
        for p in [0.0, 0.7, 10.0] {
            let (mu, _) = gp_predict(&m, &[p]).unwrap();
            assert!((mu - 4.0).abs() < 1e-12);
        }
        assert_eq!(gp_predict(&m, &[1.0]).unwrap().1, 0.0);
    }

    #[test]
    fn interpolates_three_points() {
        let x = vec![vec![0.0], vec![0.5], vec![1.0]];
        let y = [1.0, -2.0, 0.5];
        let m = gp_fit(&x, &y, &[2.0], 0.0, GpBasis::Constant).unwrap();
        for (xi, yi) in x.iter().zip(y) {
            let (mu, var) = gp_predict(&m, xi).unwrap();
            assert!((mu - yi).abs() < 1e-8);
            assert!(var < 1e-10);
        }
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let x = vec![vec![0.0], vec![0.3], vec![0.9], vec![1.4]];
        let y = [0.0, 1.0, 0.2, -0.5];
        let m = gp_fit(&x, &y, &[3.0], 0.0, GpBasis::Constant).unwrap();
        let (mu, var) = gp_predict(&m, &[1e3]).unwrap();
        assert!((mu - m.beta[0]).abs() < 1e-12);
        let u_term = m.ftrf_inv[(0, 0)];
        assert!((var - m.sigma2 * (1.0 + u_term)).abs() < 1e-12);
    }

    #[test]
    fn nugget_escalates_for_near_duplicates() {
        let x = vec![vec![0.0], vec![1e-9], vec![1.0]];
        let m = gp_fit(&x, &[0.0, 0.0, 1.0], &[1.0], 0.0, GpBasis::Constant).unwrap();
        assert!(m.nugget > 0.0 && m.nugget <= MAX_NUGGET);
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(gp_fit(&x, &[1.0, 2.0], &[0.0], 0.0, GpBasis::Constant).is_err());
        assert!(gp_fit(&x, &[1.0], &[1.0], 0.0, GpBasis::Constant).is_err());
        assert!(gp_fit(&[vec![0.0], vec![0.0]], &[1.0, 2.0], &[1.0], 0.0, GpBasis::Constant).is_err());
        let m = gp_fit(&x, &[1.0, 2.0], &[1.0], 0.0, GpBasis::Constant).unwrap();
        assert!(gp_predict(&m, &[1.0, 2.0]).is_err());
    }
}
