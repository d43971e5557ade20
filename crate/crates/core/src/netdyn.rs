//! Directed nomination networks: reciprocity, structural tie features, the
//! bi-directional SI spreading model with edge percolation, and the
//! incentive-study utilities (reward schedule, activity-change outcome).

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DirectedNominationGraph, PanelRow};
use crate::stats::{derive_seed, mean, par_map, percentile, pop_sd};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieClass {
    Reciprocal,
    Unilateral,
}

/// Relation of an ordered pair `(i, j)` seen from `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    Reciprocal,
    /// `i` nominated `j`, not returned.
    UnilateralOut,
    /// `j` nominated `i`, not returned.
    UnilateralIn,
    None,
}

/// An undirected tie. For unilateral ties `a` is the nominator and `b` the
/// nominee; reciprocal ties have `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Tie {
    pub a: usize,
    pub b: usize,
    pub class: TieClass,
}

#[derive(Clone, Debug)]
pub struct TieClassification {
    pub threshold: f64,
    n: usize,
    ties: Vec<Tie>,
    /// Outgoing nominations above threshold, per node.
    out: Vec<BTreeSet<usize>>,
}

/// Nominations with score strictly above `threshold` count; a tie is
/// reciprocal when both directions count.
pub fn classify_ties(g: &DirectedNominationGraph, threshold: f64) -> TieClassification {
    let n = g.node_count();
    let mut out = vec![BTreeSet::new(); n];
    for e in g.edges().iter().filter(|e| e.score > threshold) {
        out[e.src].insert(e.dst);
    }
    let mut ties = Vec::new();
    for i in 0..n {
        for &j in &out[i] {
            if out[j].contains(&i) {
                if i < j {
                    ties.push(Tie { a: i, b: j, class: TieClass::Reciprocal });
                }
            } else {
                ties.push(Tie { a: i, b: j, class: TieClass::Unilateral });
            }
        }
    }
    TieClassification { threshold, n, ties, out }
}

impl TieClassification {
    /// Builds directly from counted nominations over `n` nodes.
    pub fn from_nominations(n: usize, nominations: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut triples = Vec::new();
        for (s, d) in nominations {
            triples.push((s, d, 1.0));
        }
        let g = DirectedNominationGraph::new((0..n).map(|i| i.to_string()).collect(), triples, (0.0, 1.0))?;
        Ok(classify_ties(&g, 0.0))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn ties(&self) -> &[Tie] {
        &self.ties
    }

    pub fn count(&self, class: TieClass) -> usize {
        self.ties.iter().filter(|t| t.class == class).count()
    }

    pub fn nomination_count(&self) -> usize {
        self.out.iter().map(BTreeSet::len).sum()
    }

    pub fn pair(&self, i: usize, j: usize) -> PairClass {
        match (self.out[i].contains(&j), self.out[j].contains(&i)) {
            (true, true) => PairClass::Reciprocal,
            (true, false) => PairClass::UnilateralOut,
            (false, true) => PairClass::UnilateralIn,
            (false, false) => PairClass::None,
        }
    }

    /// Undirected neighborhood Γ(i).
    pub fn neighbors(&self, i: usize) -> BTreeSet<usize> {
        let mut s = self.out[i].clone();
        for (j, o) in self.out.iter().enumerate() {
            if o.contains(&i) {
                s.insert(j);
            }
        }
        s
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).len()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReciprocityStats {
    pub ties: usize,
    pub reciprocal_ties: usize,
    /// Reciprocal ties over all ties (friendships).
    pub global: f64,
    pub nominations: usize,
    pub reciprocated_nominations: usize,
    /// Reciprocated nominations over all nominations.
    pub nomination_fraction: f64,
    /// Per node: share of its outgoing nominations that are returned. Nodes
    /// that nominate nobody are left out.
    pub per_node: Vec<(usize, f64)>,
}

pub fn reciprocity_stats(tc: &TieClassification) -> Result<ReciprocityStats> {
    let nominations = tc.nomination_count();
    if nominations == 0 {
        return Err(Error::Empty("no nominations above threshold".into()));
    }
    let reciprocal = tc.count(TieClass::Reciprocal);
    let per_node = (0..tc.n)
        .filter(|&i| !tc.out[i].is_empty())
        .map(|i| {
            let back = tc.out[i].iter().filter(|&&j| tc.out[j].contains(&i)).count();
            (i, back as f64 / tc.out[i].len() as f64)
        })
        .collect();
    Ok(ReciprocityStats {
        ties: tc.ties.len(),
        reciprocal_ties: reciprocal,
        global: reciprocal as f64 / tc.ties.len() as f64,
        nominations,
        reciprocated_nominations: 2 * reciprocal,
        nomination_fraction: (2 * reciprocal) as f64 / nominations as f64,
        per_node,
    })
}

fn check_pair(tc: &TieClassification, i: usize, j: usize) -> Result<()> {
    if i >= tc.n || j >= tc.n {
        return Err(Error::invalid(format!("node index out of range ({i}, {j})")));
    }
    if i == j {
        return Err(Error::invalid("tie features need two distinct nodes"));
    }
    Ok(())
}

/// Social embeddedness: common neighbors on the undirected nomination graph.
pub fn se_feature(tc: &TieClassification, i: usize, j: usize) -> Result<usize> {
    check_pair(tc, i, j)?;
    Ok(tc.neighbors(i).intersection(&tc.neighbors(j)).count())
}

/// Social centrality gap: difference of degree centralities `deg/(n-1)`.
pub fn sc_feature(tc: &TieClassification, i: usize, j: usize) -> Result<f64> {
    if tc.n < 2 {
        return Err(Error::invalid("degree centrality needs n >= 2"));
    }
    check_pair(tc, i, j)?;
    let denom = (tc.n - 1) as f64;
    Ok(tc.degree(i) as f64 / denom - tc.degree(j) as f64 / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BdsiParams {
    pub p_rec: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub horizon: usize,
    pub seeds: Vec<usize>,
}

impl BdsiParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, p) in [("p_rec", self.p_rec), ("p_plus", self.p_plus), ("p_minus", self.p_minus)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(self.p_rec >= self.p_plus && self.p_plus >= self.p_minus) {
            return Err(Error::invalid("expected p_rec >= p_plus >= p_minus"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed node required"));
        }
        if let Some(&s) = self.seeds.iter().find(|&&s| s >= n) {
            return Err(Error::invalid(format!("seed {s} is not a node")));
        }
        Ok(())
    }
}

/// Directed transmission arcs with per-arc probability, as adjacency lists.
#[derive(Clone, Debug)]
pub struct TransmissionNetwork {
    arcs: Vec<Vec<(usize, f64)>>,
}

impl TransmissionNetwork {
    /// Reciprocal ties transmit both ways with `p_rec`; a unilateral tie
    /// transmits nominator → nominee with `p_plus` and back with `p_minus`.
    /// Ties whose index is in `removed` are skipped.
    pub fn new(tc: &TieClassification, params: &BdsiParams, removed: &[bool]) -> Self {
        let mut arcs = vec![Vec::new(); tc.n];
        for (k, t) in tc.ties.iter().enumerate() {
            if removed.get(k).copied().unwrap_or(false) {
                continue;
            }
            match t.class {
                TieClass::Reciprocal => {
                    arcs[t.a].push((t.b, params.p_rec));
                    arcs[t.b].push((t.a, params.p_rec));
                }
                TieClass::Unilateral => {
                    arcs[t.a].push((t.b, params.p_plus));
                    arcs[t.b].push((t.a, params.p_minus));
                }
            }
        }
        Self { arcs }
    }

    pub fn node_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs_from(&self, i: usize) -> &[(usize, f64)] {
        &self.arcs[i]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpreadTrace {
    /// Step at which each node became infected; `None` if never.
    pub infection_time: Vec<Option<usize>>,
    /// Coverage `Z(t)` for `t = 0..=horizon`.
    pub coverage: Vec<usize>,
    pub seed: u64,
}

impl SpreadTrace {
    /// First step at which coverage reaches `fraction` of all nodes.
    pub fn time_to_fraction(&self, fraction: f64) -> Option<usize> {
        let n = self.infection_time.len();
        let need = (fraction * n as f64).ceil() as usize;
        self.coverage.iter().position(|&z| z >= need)
    }
}

/// Synchronous discrete-time spread: every node infected at the start of a
/// step makes one attempt per outgoing arc towards each still-susceptible
/// neighbor. Infection is permanent.
pub fn bdsi_run(net: &TransmissionNetwork, params: &BdsiParams, seed: u64) -> SpreadTrace {
    let n = net.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut time = vec![None; n];
    let mut infected: Vec<usize> = Vec::new();
    for &s in &params.seeds {
        if time[s].is_none() {
            time[s] = Some(0);
            infected.push(s);
        }
    }
    let mut coverage = Vec::with_capacity(params.horizon + 1);
    coverage.push(infected.len());
    let mut fresh = Vec::new();
    for t in 1..=params.horizon {
        fresh.clear();
        for &u in &infected {
            for &(v, p) in net.arcs_from(u) {
                if time[v].is_none() && p > 0.0 && rng.random::<f64>() < p {
                    time[v] = Some(t);
                    fresh.push(v);
                }
            }
        }
        infected.extend_from_slice(&fresh);
        coverage.push(infected.len());
    }
    SpreadTrace {
        infection_time: time,
        coverage,
        seed,
    }
}

pub fn bdsi_simulate(tc: &TieClassification, params: &BdsiParams, seed: u64) -> Result<SpreadTrace> {
    params.validate(tc.n)?;
    let net = TransmissionNetwork::new(tc, params, &[]);
    Ok(bdsi_run(&net, params, seed))
}

const TAG_SIM: u64 = 1;
const TAG_REMOVE: u64 = 2;

/// Seed used for the spread of trial `k`; shared across perturbation levels.
pub fn trial_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, TAG_SIM, k as u64)
}

#[derive(Clone, Debug, Serialize)]
pub struct PercolationRow {
    pub f: f64,
    pub removed: usize,
    pub t: usize,
    pub mean_z: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PercolationResult {
    pub class: TieClass,
    pub rows: Vec<PercolationRow>,
    /// Every trial's coverage curve, grouped by perturbation level.
    pub traces: Vec<(f64, Vec<Vec<usize>>)>,
}

impl PercolationResult {
    pub fn mean_final(&self, level: usize) -> f64 {
        let curves = &self.traces[level].1;
        mean(&curves.iter().map(|c| *c.last().unwrap() as f64).collect::<Vec<_>>())
    }
}

fn run_trials(
    tc: &TieClassification,
    params: &BdsiParams,
    class: TieClass,
    removal: usize,
    level: usize,
    trials: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let members: Vec<usize> = (0..tc.ties.len()).filter(|&k| tc.ties[k].class == class).collect();
    let one = |k: usize| {
        let mut mask = vec![false; tc.ties.len()];
        if removal > 0 {
            let mut rrng = ChaCha8Rng::seed_from_u64(derive_seed(
                seed,
                TAG_REMOVE,
                (level as u64) << 32 | k as u64,
            ));
            for idx in sample(&mut rrng, members.len(), removal) {
                mask[members[idx]] = true;
            }
        }
        let net = TransmissionNetwork::new(tc, params, &mask);
        bdsi_run(&net, params, trial_seed(seed, k)).coverage
    };
    par_map(trials, one)
}

/// Removes an absolute number of ties of `class` per level and reruns the
/// spread `trials` times. `labels` are reported as the level's `F`.
pub fn percolation_by_count(
    tc: &TieClassification,
    params: &BdsiParams,
    class: TieClass,
    levels: &[(f64, usize)],
    trials: usize,
    seed: u64,
) -> Result<PercolationResult> {
    params.validate(tc.n)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let available = tc.count(class);
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (level, &(f, removal)) in levels.iter().enumerate() {
        if removal > available {
            return Err(Error::invalid(format!(
                "cannot remove {removal} {class:?} ties; only {available} exist"
            )));
        }
        let curves = run_trials(tc, params, class, removal, level, trials, seed);
        for t in 0..=params.horizon {
            let zs: Vec<f64> = curves.iter().map(|c| c[t] as f64).collect();
            rows.push(PercolationRow {
                f,
                removed: removal,
                t,
                mean_z: mean(&zs),
                lo: percentile(&zs, 0.025),
                hi: percentile(&zs, 0.975),
            });
        }
        traces.push((f, curves));
    }
    Ok(PercolationResult { class, rows, traces })
}

/// For each `F`, removes `⌊F · count(class)⌋` uniformly chosen ties of the
/// class (fresh per trial, without replacement).
pub fn percolation_experiment(
    tc: &TieClassification,
    params: &BdsiParams,
    f_grid: &[f64],
    class: TieClass,
    trials: usize,
    seed: u64,
) -> Result<PercolationResult> {
    let count = tc.count(class);
    let levels = f_grid
        .iter()
        .map(|&f| {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(format!("F = {f} outside [0, 1]")));
            }
            Ok((f, (f * count as f64).floor() as usize))
        })
        .collect::<Result<Vec<_>>>()?;
    percolation_by_count(tc, params, class, &levels, trials, seed)
}

/// Reciprocal-class percolation next to removal of the same absolute number
/// of unilateral ties.
pub fn percolation_contrast(
    tc: &TieClassification,
    params: &BdsiParams,
    f_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<(PercolationResult, PercolationResult)> {
    let rec = percolation_experiment(tc, params, f_grid, TieClass::Reciprocal, trials, seed)?;
    let levels: Vec<(f64, usize)> = rec
        .traces
        .iter()
        .enumerate()
        .map(|(level, (f, _))| (*f, rec.rows[level * (params.horizon + 1)].removed))
        .collect();
    let uni = percolation_by_count(tc, params, TieClass::Unilateral, &levels, trials, seed)?;
    Ok((rec, uni))
}

/// Reward tiers run from $0.50 to $5.00 in $0.50 steps.
pub const REWARD_MIN: f64 = 0.5;
pub const REWARD_MAX: f64 = 5.0;
pub const REWARD_STEP: f64 = 0.5;

/// Maps the current 3-day mean linearly from `[μ-σ, μ+σ]` of the 7 reference
/// days onto `[$0.50, $5.00]`, clamps, and rounds half-up to a $0.50 tier.
/// With `σ = 0` the midpoint tier ($3.00) is paid.
pub fn compute_reward(reference: &[f64], current: f64) -> Result<f64> {
    if reference.len() != 7 {
        return Err(Error::invalid(format!(
            "reference window must hold 7 daily values, got {}",
            reference.len()
        )));
    }
    if !current.is_finite() || reference.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("activity values must be finite"));
    }
    let mu = mean(reference);
    let sigma = pop_sd(reference);
    let amount = if sigma == 0.0 {
        0.5 * (REWARD_MIN + REWARD_MAX)
    } else {
        let frac = (current - (mu - sigma)) / (2.0 * sigma);
        REWARD_MIN + frac.clamp(0.0, 1.0) * (REWARD_MAX - REWARD_MIN)
    };
    let tier = ((amount - REWARD_MIN) / REWARD_STEP + 0.5 + 1e-9).floor();
    Ok((REWARD_MIN + tier * REWARD_STEP).clamp(REWARD_MIN, REWARD_MAX))
}

/// `ln(post / pre)`.
pub fn log_activity_ratio(pre_mean: f64, post_mean: f64) -> Result<f64> {
    if !(pre_mean > 0.0) || !(post_mean > 0.0) {
        return Err(Error::invalid("activity means must be positive"));
    }
    Ok((post_mean / pre_mean).ln())
}

/// Ego-centred tie covariates for the activity-change regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BuddyCovariates {
    pub reciprocal_friend: f64,
    /// Ego nominated the buddy; not returned.
    pub alter_perceived_friend: f64,
    /// Buddy nominated ego; not returned.
    pub ego_perceived_friend: f64,
    /// Sum of nomination scores between ego and buddies, both directions.
    pub tie_strength: f64,
}

pub fn buddy_covariates(
    g: &DirectedNominationGraph,
    tc: &TieClassification,
    ego: usize,
    buddies: &[usize],
) -> Result<BuddyCovariates> {
    let mut c = BuddyCovariates {
        reciprocal_friend: 0.0,
        alter_perceived_friend: 0.0,
        ego_perceived_friend: 0.0,
        tie_strength: 0.0,
    };
    for &b in buddies {
        check_pair(tc, ego, b)?;
        match tc.pair(ego, b) {
            PairClass::Reciprocal => c.reciprocal_friend += 1.0,
            PairClass::UnilateralOut => c.alter_perceived_friend += 1.0,
            PairClass::UnilateralIn => c.ego_perceived_friend += 1.0,
            PairClass::None => {}
        }
    }
    for e in g.edges() {
        if (e.src == ego && buddies.contains(&e.dst)) || (e.dst == ego && buddies.contains(&e.src)) {
            c.tie_strength += e.score;
        }
    }
    Ok(c)
}

/// One regression row: outcome `ln(post/pre)` plus the buddy covariates and
/// the log pre-intervention activity.
pub fn activity_change_row(
    unit_id: &str,
    periods: (i32, i32),
    pre_mean: f64,
    post_mean: f64,
    cov: &BuddyCovariates,
) -> Result<PanelRow> {
    let outcome = log_activity_ratio(pre_mean, post_mean)?;
    let covariates = [
        ("reciprocal_friend", cov.reciprocal_friend),
        ("alter_perceived_friend", cov.alter_perceived_friend),
        ("ego_perceived_friend", cov.ego_perceived_friend),
        ("tie_strength", cov.tie_strength),
        ("pre_activity_log", pre_mean.ln()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Ok(PanelRow {
        unit_id: unit_id.to_string(),
        period_start: periods.0,
        period_end: periods.1,
        outcome,
        covariates,
    })
}

/// Random directed nomination graph with a target share of mutual pairs,
/// scores drawn from `scale`.
pub fn synth_nominations(
    n: usize,
    ties: usize,
    reciprocal: usize,
    scale: (f64, f64),
    seed: u64,
) -> Result<DirectedNominationGraph> {
    let pairs = n * n.saturating_sub(1) / 2;
    if reciprocal > ties || ties > pairs {
        return Err(Error::invalid(format!(
            "cannot place {ties} ties ({reciprocal} reciprocal) on {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = sample(&mut rng, pairs, ties);
    let lo_nom = scale.0 + 0.5 * (scale.1 - scale.0);
    let mut edges = Vec::with_capacity(ties + reciprocal);
    for (k, idx) in chosen.into_iter().enumerate() {
        // unrank idx -> (i, j) with i < j
        let mut i = 0;
        let mut rem = idx;
        while rem >= n - 1 - i {
            rem -= n - 1 - i;
            i += 1;
        }
        let j = i + 1 + rem;
        let (a, b) = if rng.random::<bool>() { (i, j) } else { (j, i) };
        edges.push((a, b, rng.random_range(lo_nom..=scale.1)));
        if k < reciprocal {
            edges.push((b, a, rng.random_range(lo_nom..=scale.1)));
        }
    }
    DirectedNominationGraph::new((0..n).map(|i| format!("n{i}")).collect(), edges, scale)
}
