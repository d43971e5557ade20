//! Coarsened exact matching across a multi-level treatment, multidimensional
//! L1 imbalance, FSATT estimation and a synthetic growth panel.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::learn::{ols_fit, FitSummary, RegressOptions};
use crate::model::PanelRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closed {
    /// `[a, b)`
    #[default]
    Left,
    /// `(a, b]`
    Right,
}

/// Bins over one variable. The outermost edges are inclusive, so the range
/// `[c_0, c_k]` is covered exactly once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableBins {
    pub variable: String,
    pub cutpoints: Vec<f64>,
    #[serde(default)]
    pub closed: Closed,
}

impl VariableBins {
    pub fn new(variable: impl Into<String>, cutpoints: Vec<f64>, closed: Closed) -> Result<Self> {
        let variable = variable.into();
        if cutpoints.len() < 2 {
            return Err(Error::invalid(format!("{variable}: need at least two cutpoints")));
        }
        if cutpoints.iter().any(|c| !c.is_finite()) || cutpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("{variable}: cutpoints must be finite and strictly increasing")));
        }
        Ok(Self { variable, cutpoints, closed })
    }

    pub fn bins(&self) -> usize {
        self.cutpoints.len() - 1
    }

    pub fn bin(&self, v: f64) -> Option<usize> {
        let c = &self.cutpoints;
        let k = self.bins();
        if !(v >= c[0] && v <= c[k]) {
            return None;
        }
        Some(match self.closed {
            // number of interior cutpoints <= v
            Closed::Left => c[1..k].iter().filter(|&&e| e <= v).count(),
            // number of interior cutpoints < v
            Closed::Right => c[1..k].iter().filter(|&&e| e < v).count(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseningSpec {
    pub variables: Vec<VariableBins>,
}

/// Stratum: bin index per variable.
pub type Stratum = Vec<usize>;

pub fn stratum_key(s: &Stratum) -> String {
    s.iter().map(usize::to_string).collect::<Vec<_>>().join(".")
}

impl CoarseningSpec {
    pub fn new(variables: Vec<VariableBins>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::invalid("coarsening needs at least one variable"));
        }
        for (i, v) in variables.iter().enumerate() {
            VariableBins::new(v.variable.clone(), v.cutpoints.clone(), v.closed)?;
            if variables[..i].iter().any(|w| w.variable == v.variable) {
                return Err(Error::invalid(format!("variable {} coarsened twice", v.variable)));
            }
        }
        Ok(Self { variables })
    }

    /// Control-variable bins of the growth study. Education uses `(9, 11]`,
    /// `(11, 13]`.
    pub fn growth_controls() -> Self {
        let v = |name: &str, c: &[f64], closed| VariableBins::new(name, c.to_vec(), closed).expect("static bins");
        Self {
            variables: vec![
                v("gdp_log", &[5.18, 7.58, 8.73, 10.92], Closed::Left),
                v("population_log", &[12.8, 15.6, 16.8, 21.0], Closed::Left),
                v("life_expectancy", &[40.8, 64.3, 73.4, 81.1], Closed::Left),
                v("years_education", &[9.0, 11.0, 13.0], Closed::Right),
            ],
        }
    }

    pub fn stratum(&self, row: &PanelRow) -> Result<Stratum> {
        self.variables
            .iter()
            .map(|v| {
                let x = row.covariate(&v.variable)?;
                v.bin(x).ok_or_else(|| {
                    Error::invalid(format!(
                        "unit {} ({}-{}): {} = {x} outside [{}, {}]",
                        row.unit_id,
                        row.period_start,
                        row.period_end,
                        v.variable,
                        v.cutpoints[0],
                        v.cutpoints[v.cutpoints.len() - 1]
                    ))
                })
            })
            .collect()
    }
}

/// ECI treatment levels low / medium / high.
pub fn eci_levels() -> VariableBins {
    VariableBins::new("eci", vec![-2.8, -0.6, 0.4, 2.4], Closed::Left).expect("static bins")
}

pub const ECI_LEVEL_NAMES: [&str; 3] = ["low", "medium", "high"];

pub fn coarsen(rows: &[PanelRow], spec: &CoarseningSpec) -> Result<Vec<Stratum>> {
    rows.iter().map(|r| spec.stratum(r)).collect()
}

/// Categorical treatment: `assignment[i]` indexes `levels`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Treatment {
    pub levels: Vec<String>,
    pub assignment: Vec<Option<usize>>,
}

impl Treatment {
    pub fn new(levels: Vec<String>, assignment: Vec<Option<usize>>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::invalid("treatment needs at least two levels"));
        }
        if assignment.iter().flatten().any(|&a| a >= levels.len()) {
            return Err(Error::invalid("treatment assignment outside level range"));
        }
        Ok(Self { levels, assignment })
    }

    /// Levels from binning a covariate; rows outside the bins get `None`.
    pub fn from_bins(rows: &[PanelRow], bins: &VariableBins, names: &[&str]) -> Result<Self> {
        if names.len() != bins.bins() {
            return Err(Error::invalid("one level name per bin required"));
        }
        let assignment = rows
            .iter()
            .map(|r| Ok(bins.bin(r.covariate(&bins.variable)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(names.iter().map(|s| s.to_string()).collect(), assignment)
    }

    pub fn level_index(&self, name: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L1Report {
    /// `(level a, level b, L1)` for every pair `a < b` with both groups present.
    pub pairs: Vec<(usize, usize, f64)>,
    pub max: f64,
}

/// `½ Σ_cells |f_a - f_b|` over the joint histogram of `strata`, per pair of
/// groups, with optional row weights.
pub fn l1_imbalance_strata(
    strata: &[Option<Stratum>],
    groups: &[Option<usize>],
    n_levels: usize,
    weights: Option<&[f64]>,
) -> Result<L1Report> {
    let mut hist: Vec<BTreeMap<&Stratum, f64>> = vec![BTreeMap::new(); n_levels];
    let mut totals = vec![0.0; n_levels];
    for (i, (s, g)) in strata.iter().zip(groups).enumerate() {
        if let (Some(s), Some(g)) = (s, g) {
            let w = weights.map_or(1.0, |w| w[i]);
            if w > 0.0 {
                *hist[*g].entry(s).or_insert(0.0) += w;
                totals[*g] += w;
            }
        }
    }
    let mut pairs = Vec::new();
    for a in 0..n_levels {
        for b in a + 1..n_levels {
            if totals[a] == 0.0 || totals[b] == 0.0 {
                continue;
            }
            let mut cells: Vec<&Stratum> = hist[a].keys().chain(hist[b].keys()).copied().collect();
            cells.sort();
            cells.dedup();
            let l1 = 0.5
                * cells
                    .iter()
                    .map(|c| {
                        let fa = hist[a].get(c).copied().unwrap_or(0.0) / totals[a];
                        let fb = hist[b].get(c).copied().unwrap_or(0.0) / totals[b];
                        (fa - fb).abs()
                    })
                    .sum::<f64>();
            pairs.push((a, b, l1.clamp(0.0, 1.0)));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Empty("L1 imbalance needs two non-empty groups".into()));
    }
    let max = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
    Ok(L1Report { pairs, max })
}

pub fn l1_imbalance(
    rows: &[PanelRow],
    groups: &Treatment,
    spec: &CoarseningSpec,
    weights: Option<&[f64]>,
) -> Result<L1Report> {
    if groups.assignment.len() != rows.len() {
        return Err(Error::invalid("treatment assignment length differs from rows"));
    }
    let strata = coarsen(rows, spec)?.into_iter().map(Some).collect::<Vec<_>>();
    l1_imbalance_strata(&strata, &groups.assignment, groups.levels.len(), weights)
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchResult {
    pub levels: Vec<String>,
    pub baseline: usize,
    /// `None` for rows outside the coarsening or without a treatment level.
    pub stratum: Vec<Option<Stratum>>,
    pub matched: Vec<bool>,
    pub weights: Vec<f64>,
    /// Units per level in every stratum seen.
    pub stratum_counts: BTreeMap<String, Vec<usize>>,
    /// Matched units per level.
    pub matched_counts: Vec<usize>,
    pub n_matched: usize,
    /// Rows excluded before matching (out of range or untreated), with reason.
    pub excluded: Vec<(usize, String)>,
    pub l1_before: Option<L1Report>,
    /// Unweighted, over the matched rows.
    pub l1_after: Option<L1Report>,
}

impl MatchResult {
    pub fn require_nonempty(&self) -> Result<()> {
        if self.n_matched == 0 {
            Err(Error::Empty("no stratum contains every treatment level".into()))
        } else {
            Ok(())
        }
    }
}

/// Keeps strata holding every treatment level. Baseline units get weight 1;
/// a unit of level `ℓ` in stratum `s` gets `(m_b^s / m_ℓ^s) · (m_ℓ / m_b)`
/// with `m` the matched counts.
pub fn cem_match(rows: &[PanelRow], treatment: &Treatment, spec: &CoarseningSpec, baseline: usize) -> Result<MatchResult> {
    let levels = treatment.levels.len();
    if treatment.assignment.len() != rows.len() {
        return Err(Error::invalid("treatment assignment length differs from rows"));
    }
    if baseline >= levels {
        return Err(Error::invalid("baseline level out of range"));
    }
    let mut excluded = Vec::new();
    let mut stratum = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        match (treatment.assignment[i], spec.stratum(r)) {
            (None, _) => {
                excluded.push((i, "treatment value outside level bins".to_string()));
                stratum.push(None);
            }
            (_, Err(e)) => {
                excluded.push((i, e.to_string()));
                stratum.push(None);
            }
            (Some(_), Ok(s)) => stratum.push(Some(s)),
        }
    }
    let mut counts: BTreeMap<&Stratum, Vec<usize>> = BTreeMap::new();
    for (s, g) in stratum.iter().zip(&treatment.assignment) {
        if let (Some(s), Some(g)) = (s, g) {
            counts.entry(s).or_insert_with(|| vec![0; levels])[*g] += 1;
        }
    }
    let matched: Vec<bool> = stratum
        .iter()
        .map(|s| s.as_ref().is_some_and(|s| counts[s].iter().all(|&c| c > 0)))
        .collect();
    let mut matched_counts = vec![0usize; levels];
    for (m, g) in matched.iter().zip(&treatment.assignment) {
        if *m {
            matched_counts[g.unwrap()] += 1;
        }
    }
    let n_matched = matched_counts.iter().sum();
    let mb = matched_counts[baseline] as f64;
    let weights = (0..rows.len())
        .map(|i| {
            if !matched[i] {
                return 0.0;
            }
            let g = treatment.assignment[i].unwrap();
            if g == baseline {
                return 1.0;
            }
            let c = &counts[stratum[i].as_ref().unwrap()];
            (c[baseline] as f64 * matched_counts[g] as f64) / (c[g] as f64 * mb)
        })
        .collect();
    let l1_before = l1_imbalance_strata(&stratum, &treatment.assignment, levels, None).ok();
    let after_groups: Vec<Option<usize>> = treatment
        .assignment
        .iter()
        .zip(&matched)
        .map(|(g, m)| if *m { *g } else { None })
        .collect();
    let l1_after = l1_imbalance_strata(&stratum, &after_groups, levels, None).ok();
    let stratum_counts = counts.iter().map(|(s, c)| (stratum_key(s), c.clone())).collect();
    Ok(MatchResult {
        levels: treatment.levels.clone(),
        baseline,
        stratum,
        matched,
        weights,
        stratum_counts,
        matched_counts,
        n_matched,
        excluded,
        l1_before,
        l1_after,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FsattOptions {
    /// Weight matched rows by their CEM weights; weighted fits report robust
    /// (HC3) standard errors.
    pub weighted: bool,
    /// Level whose indicator is omitted.
    pub reference: usize,
    /// Two-sided interval level.
    pub level: f64,
}

impl Default for FsattOptions {
    fn default() -> Self {
        Self { weighted: true, reference: 0, level: 0.95 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Contrast {
    pub from: String,
    pub to: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fsatt {
    pub fit: FitSummary,
    pub contrasts: Vec<Contrast>,
}

/// Regresses the outcome on level indicators and covariates over matched
/// rows; reports `τ_{a→b} = b_b - b_a` for every level pair `a < b`.
pub fn fsatt(
    rows: &[PanelRow],
    m: &MatchResult,
    treatment: &Treatment,
    covariates: &[String],
    opts: &FsattOptions,
) -> Result<Fsatt> {
    m.require_nonempty()?;
    let levels = treatment.levels.len();
    if opts.reference >= levels {
        return Err(Error::invalid("reference level out of range"));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::invalid("interval level must lie in (0, 1)"));
    }
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| m.matched[i]).collect();
    let dummies: Vec<usize> = (0..levels).filter(|&l| l != opts.reference).collect();
    let mut names: Vec<String> = dummies.iter().map(|&l| format!("level_{}", treatment.levels[l])).collect();
    names.extend(covariates.iter().cloned());
    let p = names.len();
    let mut x = DMatrix::zeros(idx.len(), p);
    let mut y = Vec::with_capacity(idx.len());
    for (r, &i) in idx.iter().enumerate() {
        let g = treatment.assignment[i].unwrap();
        for (k, &l) in dummies.iter().enumerate() {
            x[(r, k)] = if g == l { 1.0 } else { 0.0 };
        }
        for (k, c) in covariates.iter().enumerate() {
            x[(r, dummies.len() + k)] = rows[i].covariate(c)?;
        }
        if !rows[i].outcome.is_finite() {
            return Err(Error::invalid(format!("unit {}: outcome is not finite", rows[i].unit_id)));
        }
        y.push(rows[i].outcome);
    }
    let weights: Option<Vec<f64>> = opts.weighted.then(|| idx.iter().map(|&i| m.weights[i]).collect());
    let mut fit = ols_fit(&names, &x, &y, &RegressOptions { intercept: true, weights: weights.clone() })?;
    if let Some(w) = &weights {
        fit.covariance = sandwich(&fit, &x, &y, w)?;
        for k in 0..fit.coef.len() {
            fit.se[k] = fit.covariance[(k, k)].max(0.0).sqrt();
            fit.stat[k] = fit.coef[k] / fit.se[k];
        }
        let t = StudentsT::new(0.0, 1.0, fit.df_resid as f64).map_err(|e| Error::invalid(e.to_string()))?;
        fit.p_value = fit.stat.iter().map(|s| 2.0 * (1.0 - t.cdf(s.abs()))).collect();
    }
    let t = StudentsT::new(0.0, 1.0, fit.df_resid as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let q = t.inverse_cdf(1.0 - (1.0 - opts.level) / 2.0);
    // coefficient position of each level; None for the reference
    let pos = |l: usize| dummies.iter().position(|&d| d == l).map(|k| k + 1);
    let mut contrasts = Vec::new();
    for a in 0..levels {
        for b in a + 1..levels {
            let coef = |l: usize| pos(l).map_or(0.0, |k| fit.coef[k]);
            let cov = |u: usize, v: usize| match (pos(u), pos(v)) {
                (Some(i), Some(j)) => fit.covariance[(i, j)],
                _ => 0.0,
            };
            let estimate = coef(b) - coef(a);
            let se = (cov(a, a) + cov(b, b) - 2.0 * cov(a, b)).max(0.0).sqrt();
            contrasts.push(Contrast {
                from: treatment.levels[a].clone(),
                to: treatment.levels[b].clone(),
                estimate,
                se,
                ci_lo: estimate - q * se,
                ci_hi: estimate + q * se,
            });
        }
    }
    Ok(Fsatt { fit, contrasts })
}

/// HC3 covariance `B⁻¹ (Σ w_i² e_i² / (1 - h_i)² x_i x_iᵀ) B⁻¹` with
/// `B = XᵀWX` and leverage `h_i = w_i x_iᵀ B⁻¹ x_i`; CEM weights are sampling
/// weights, not inverse variances.
fn sandwich(fit: &FitSummary, x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<DMatrix<f64>> {
    let n = y.len();
    let xd = DMatrix::from_fn(n, x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let p = xd.ncols();
    let mut bread = DMatrix::zeros(p, p);
    for i in 0..n {
        let xi = xd.row(i).transpose();
        bread += &xi * xi.transpose() * w[i];
    }
    let inv = bread
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::RankDeficient(fit.names.clone()))?;
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..n {
        let xi = xd.row(i).transpose();
        let e = y[i] - fit.linear_predictor(&xi.as_slice()[1..]);
        let h = (w[i] * xi.dot(&(&inv * &xi))).min(1.0 - 1e-12);
        meat += &xi * xi.transpose() * (w[i] * w[i] * e * e / ((1.0 - h) * (1.0 - h)));
    }
    Ok(&inv * meat * &inv)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthPanelSpec {
    pub n_units: usize,
    pub periods: Vec<(i32, i32)>,
    pub intercept: f64,
    /// Linear effects by covariate name (`eci`, `gdp_log`, `population_log`,
    /// `life_expectancy`, `years_education`).
    pub coefficients: BTreeMap<String, f64>,
    /// Additive effect per ECI level (low, medium, high).
    pub level_effects: Option<[f64; 3]>,
    pub noise_sd: f64,
}

impl Default for SynthPanelSpec {
    fn default() -> Self {
        let coefficients = [
            ("eci", 0.0),
            ("gdp_log", -0.02),
            ("population_log", 0.004),
            ("life_expectancy", 0.002),
            ("years_education", 0.01),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            n_units: 112,
            periods: vec![(1985, 1990), (1990, 1995), (1995, 2000), (2000, 2005)],
            intercept: 0.05,
            coefficients,
            level_effects: Some([0.0, 0.104, 0.144]),
            noise_sd: 0.05,
        }
    }
}

/// Value ranges `(min, median, max)` of the generated covariates.
pub const PANEL_RANGES: [(&str, f64, f64, f64); 5] = [
    ("eci", -2.78, 0.04, 2.39),
    ("gdp_log", 5.18, 8.41, 10.92),
    ("population_log", 12.8, 16.1, 21.0),
    ("life_expectancy", 40.8, 69.4, 81.1),
    ("years_education", 9.0, 12.0, 13.0),
];

#[derive(Clone, Debug)]
pub struct SynthPanel {
    pub rows: Vec<PanelRow>,
    pub spec: SynthPanelSpec,
}

impl SynthPanel {
    /// Noise-free outcome for a row under the generating model.
    pub fn expected_outcome(&self, row: &PanelRow) -> Result<f64> {
        let mut y = self.spec.intercept;
        for (k, b) in &self.spec.coefficients {
            y += b * row.covariate(k)?;
        }
        if let Some(effects) = self.spec.level_effects {
            let lvl = eci_levels()
                .bin(row.covariate("eci")?)
                .ok_or_else(|| Error::invalid("eci outside level bins"))?;
            y += effects[lvl];
        }
        Ok(y)
    }
}

/// Unit-level covariates drawn around the median with a unit-specific
/// offset per period, clamped to the ranges above; GDP is correlated with
/// ECI. Outcome = intercept + Σ β·x (+ ECI level effect) + N(0, σ²).
pub fn synth_panel(spec: &SynthPanelSpec, seed: u64) -> Result<SynthPanel> {
    if spec.n_units == 0 || spec.periods.is_empty() {
        return Err(Error::invalid("synthetic panel needs units and periods"));
    }
    if spec.periods.iter().any(|(a, b)| b <= a) {
        return Err(Error::invalid("period_end must exceed period_start"));
    }
    if !(spec.noise_sd >= 0.0) || !spec.noise_sd.is_finite() {
        return Err(Error::invalid("noise_sd must be finite and non-negative"));
    }
    let known: Vec<&str> = PANEL_RANGES.iter().map(|r| r.0).collect();
    if let Some(k) = spec.coefficients.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(Error::invalid(format!("unknown covariate '{k}'")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let spread = [1.0, 1.1, 1.6, 8.0, 1.0];
    let mut rows = Vec::with_capacity(spec.n_units * spec.periods.len());
    for u in 0..spec.n_units {
        let base: Vec<f64> = (0..5).map(|_| std.sample(&mut rng)).collect();
        for &(start, end) in &spec.periods {
            let mut covariates = BTreeMap::new();
            for (k, &(name, lo, med, hi)) in PANEL_RANGES.iter().enumerate() {
                let mut z = base[k] + 0.15 * std.sample(&mut rng);
                if name == "gdp_log" {
                    z = 0.6 * base[0] + 0.8 * z;
                }
                covariates.insert(name.to_string(), (med + spread[k] * z).clamp(lo, hi));
            }
            rows.push(PanelRow {
                unit_id: format!("u{u:03}"),
                period_start: start,
                period_end: end,
                outcome: 0.0,
                covariates,
            });
        }
    }
    let mut panel = SynthPanel { rows, spec: spec.clone() };
    let noise = Normal::new(0.0, 1.0).expect("standard normal");
    for i in 0..panel.rows.len() {
        let e = if spec.noise_sd > 0.0 { spec.noise_sd * noise.sample(&mut rng) } else { 0.0 };
        panel.rows[i].outcome = panel.expected_outcome(&panel.rows[i])? + e;
    }
    Ok(panel)
}
