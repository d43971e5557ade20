//! Per-user behavioral indicators from event logs, district aggregation with
//! z-score standardization, and a synthetic event generator.
//!
//! Indicators fall in three groups:
//! - activity: record volume, mean call duration, share of night calls;
//! - social (ego network): share of initiated contacts, balance of
//!   interactions, normalized social entropy, interactions per contact;
//! - spatial: number of distinct towers visited and share of records at home.

use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Direction, EventKind, EventRecord, TowerSite};

const DAY: i64 = 86_400;

/// Local night window `[start_hour, end_hour)` wrapping midnight, with a fixed
/// UTC offset for converting instants to local time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NightWindow {
    pub utc_offset_s: i64,
    pub start_hour: u32,
    pub end_hour: u32,
}

impl Default for NightWindow {
    fn default() -> Self {
        Self {
            utc_offset_s: 0,
            start_hour: 19,
            end_hour: 7,
        }
    }
}

impl NightWindow {
    pub fn with_offset(utc_offset_s: i64) -> Self {
        Self {
            utc_offset_s,
            ..Self::default()
        }
    }

    pub fn local_second_of_day(&self, timestamp: i64) -> i64 {
        (timestamp + self.utc_offset_s).rem_euclid(DAY)
    }

    pub fn contains(&self, timestamp: i64) -> bool {
        let s = self.local_second_of_day(timestamp);
        let a = i64::from(self.start_hour) * 3600;
        let b = i64::from(self.end_hour) * 3600;
        if a <= b {
            s >= a && s < b
        } else {
            s >= a || s < b
        }
    }
}

/// Tower with most night-window events; ties go to the smallest tower id.
pub fn home_location(events: &[EventRecord], night: &NightWindow) -> Result<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in events.iter().filter(|e| night.contains(e.timestamp)) {
        *counts.entry(e.tower_id.as_str()).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    // BTreeMap iterates in id order, so strict `>` keeps the smallest id on ties.
    for (t, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((t, c));
        }
    }
    best.map(|(t, _)| t.to_string())
        .ok_or_else(|| Error::Empty("no home inferable: user has no night events".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ActivityIndicators {
    pub n_records: usize,
    /// `None` when the user made no calls.
    pub mean_call_duration_s: Option<f64>,
    pub pct_night_calls: Option<f64>,
}

pub fn activity_indicators(events: &[EventRecord], night: &NightWindow) -> ActivityIndicators {
    let calls: Vec<&EventRecord> = events.iter().filter(|e| e.kind == EventKind::Call).collect();
    let (mean, pct) = if calls.is_empty() {
        (None, None)
    } else {
        let n = calls.len() as f64;
        let total: f64 = calls.iter().map(|e| e.duration_s).sum();
        let night_calls = calls.iter().filter(|e| night.contains(e.timestamp)).count();
        (Some(total / n), Some(night_calls as f64 / n))
    };
    ActivityIndicators {
        n_records: events.len(),
        mean_call_duration_s: mean,
        pct_night_calls: pct,
    }
}

/// Per-contact interaction volumes `(w_out, w_in)` around one ego. Every
/// stored contact has `w_out + w_in >= 1`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EgoNetwork {
    pub ego: String,
    contacts: BTreeMap<String, (u64, u64)>,
}

impl EgoNetwork {
    pub fn new(ego: impl Into<String>) -> Self {
        Self {
            ego: ego.into(),
            contacts: BTreeMap::new(),
        }
    }

    /// Builds from `(contact, w_out, w_in)`; contacts with zero volume are skipped.
    pub fn from_volumes<S: Into<String>>(
        ego: impl Into<String>,
        volumes: impl IntoIterator<Item = (S, u64, u64)>,
    ) -> Self {
        let mut net = Self::new(ego);
        for (c, o, i) in volumes {
            if o + i > 0 {
                let e = net.contacts.entry(c.into()).or_default();
                e.0 += o;
                e.1 += i;
            }
        }
        net
    }

    pub fn degree(&self) -> usize {
        self.contacts.len()
    }

    pub fn volumes(&self) -> impl Iterator<Item = (&str, u64, u64)> {
        self.contacts.iter().map(|(k, &(o, i))| (k.as_str(), o, i))
    }

    pub fn volume(&self, contact: &str) -> Option<(u64, u64)> {
        self.contacts.get(contact).copied()
    }

    /// Swaps the roles of incoming and outgoing volumes.
    pub fn reversed(&self) -> Self {
        Self {
            ego: self.ego.clone(),
            contacts: self
                .contacts
                .iter()
                .map(|(k, &(o, i))| (k.clone(), (i, o)))
                .collect(),
        }
    }
}

/// Tallies initiated/received calls and texts per counterpart. Data sessions
/// have no counterpart and are ignored.
pub fn build_ego_network(ego: &str, events: &[EventRecord]) -> Result<EgoNetwork> {
    let mut net = EgoNetwork::new(ego);
    for e in events.iter().filter(|e| e.kind != EventKind::Data) {
        let Some(cp) = e.counterpart_id.as_deref() else {
            return Err(Error::invalid(format!(
                "ego network unavailable for {ego}: events carry no counterpart ids"
            )));
        };
        let slot = net.contacts.entry(cp.to_string()).or_default();
        match e.direction {
            Direction::Initiated => slot.0 += 1,
            Direction::Received => slot.1 += 1,
        }
    }
    Ok(net)
}

/// Which contact set goes in the numerator of the initiated-share indicator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitiatedConvention {
    /// `|O| / (|I| + |O|)`: contacts the ego reached out to.
    #[default]
    Outgoing,
    /// `|I| / (|I| + |O|)`: the incoming-set form of the formula as printed.
    Incoming,
}

pub fn pct_initiated(ego: &EgoNetwork, convention: InitiatedConvention) -> Option<f64> {
    let out = ego.contacts.values().filter(|(o, _)| *o > 0).count();
    let inc = ego.contacts.values().filter(|(_, i)| *i > 0).count();
    let denom = out + inc;
    if denom == 0 {
        return None;
    }
    let num = match convention {
        InitiatedConvention::Outgoing => out,
        InitiatedConvention::Incoming => inc,
    };
    Some(num as f64 / denom as f64)
}

/// `β = (1/k) Σ_j w_out / (w_out + w_in)`.
pub fn balance_of_contacts(ego: &EgoNetwork) -> Option<f64> {
    let k = ego.degree();
    if k == 0 {
        return None;
    }
    let s: f64 = ego
        .contacts
        .values()
        .map(|&(o, i)| o as f64 / (o + i) as f64)
        .sum();
    Some(s / k as f64)
}

/// Shannon entropy of the per-contact volume shares, normalized by `ln k`.
/// A single contact has entropy 0.
pub fn social_entropy(ego: &EgoNetwork) -> Option<f64> {
    let k = ego.degree();
    match k {
        0 => None,
        1 => Some(0.0),
        _ => {
            let total: u64 = ego.contacts.values().map(|(o, i)| o + i).sum();
            let h: f64 = ego
                .contacts
                .values()
                .map(|(o, i)| (o + i) as f64 / total as f64)
                .filter(|&p| p > 0.0)
                .map(|p| -p * p.ln())
                .sum();
            Some((h / (k as f64).ln()).clamp(0.0, 1.0))
        }
    }
}

pub fn interactions_per_contact(ego: &EgoNetwork) -> Option<f64> {
    let k = ego.degree();
    if k == 0 {
        return None;
    }
    let total: u64 = ego.contacts.values().map(|(o, i)| o + i).sum();
    Some(total as f64 / k as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpatialMarkers {
    pub visited_locations: usize,
    pub pct_time_home: f64,
}

pub fn spatial_markers(events: &[EventRecord], home: &str) -> Result<SpatialMarkers> {
    if events.is_empty() {
        return Err(Error::Empty("spatial markers need at least one record".into()));
    }
    let mut towers: Vec<&str> = events.iter().map(|e| e.tower_id.as_str()).collect();
    towers.sort_unstable();
    towers.dedup();
    let at_home = events.iter().filter(|e| e.tower_id == home).count();
    Ok(SpatialMarkers {
        visited_locations: towers.len(),
        pct_time_home: at_home as f64 / events.len() as f64,
    })
}

pub const INDICATOR_COLUMNS: [&str; 9] = [
    "n_records",
    "mean_call_duration_s",
    "pct_night_calls",
    "pct_initiated",
    "balance_of_contacts",
    "social_entropy",
    "interactions_per_contact",
    "visited_locations",
    "pct_time_home",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnStats {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
    /// Zero spread: the standardized column is all zeros.
    pub degenerate: bool,
}

/// Units × named columns; `None` marks a missing value.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorTable {
    pub units: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub standardization: Option<Vec<ColumnStats>>,
}

impl IndicatorTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.values.iter().map(|row| row[j]).collect())
    }

    pub fn row(&self, unit: &str) -> Option<&[Option<f64>]> {
        let i = self.units.iter().position(|u| u == unit)?;
        Some(&self.values[i])
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct IndicatorOptions {
    pub night: NightWindow,
    pub initiated: InitiatedConvention,
}

#[derive(Clone, Debug)]
pub struct UserIndicators {
    pub table: IndicatorTable,
    /// Home tower per user, for users with night activity.
    pub homes: BTreeMap<String, String>,
    /// Users whose home could not be inferred (spatial indicators missing).
    pub homeless: Vec<String>,
}

fn user_row(user: &str, events: &[EventRecord], opts: &IndicatorOptions) -> (Vec<Option<f64>>, Option<String>) {
    let act = activity_indicators(events, &opts.night);
    let ego = build_ego_network(user, events).ok();
    let home = home_location(events, &opts.night).ok();
    let spatial = home.as_deref().and_then(|h| spatial_markers(events, h).ok());
    let row = vec![
        Some(act.n_records as f64),
        act.mean_call_duration_s,
        act.pct_night_calls,
        ego.as_ref().and_then(|e| pct_initiated(e, opts.initiated)),
        ego.as_ref().and_then(balance_of_contacts),
        ego.as_ref().and_then(social_entropy),
        ego.as_ref().and_then(interactions_per_contact),
        spatial.map(|s| s.visited_locations as f64),
        spatial.map(|s| s.pct_time_home),
    ];
    (row, home)
}

/// Computes all nine indicators for every user present in `events`.
/// Users appear in id order; the result does not depend on record order.
pub fn user_indicators(events: &[EventRecord], opts: &IndicatorOptions) -> UserIndicators {
    let mut by_user: BTreeMap<&str, Vec<EventRecord>> = BTreeMap::new();
    for e in events {
        by_user.entry(e.user_id.as_str()).or_default().push(e.clone());
    }
    let groups: Vec<(&str, Vec<EventRecord>)> = by_user.into_iter().collect();

    #[cfg(feature = "parallel")]
    let rows: Vec<(Vec<Option<f64>>, Option<String>)> = {
        use rayon::prelude::*;
        groups.par_iter().map(|(u, ev)| user_row(u, ev, opts)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<(Vec<Option<f64>>, Option<String>)> =
        groups.iter().map(|(u, ev)| user_row(u, ev, opts)).collect();

    let mut homes = BTreeMap::new();
    let mut homeless = Vec::new();
    let mut values = Vec::with_capacity(rows.len());
    for ((u, _), (row, home)) in groups.iter().zip(rows) {
        match home {
            Some(h) => {
                homes.insert(u.to_string(), h);
            }
            None => homeless.push(u.to_string()),
        }
        values.push(row);
    }
    UserIndicators {
        table: IndicatorTable {
            units: groups.iter().map(|(u, _)| u.to_string()).collect(),
            columns: INDICATOR_COLUMNS.iter().map(|c| c.to_string()).collect(),
            values,
            standardization: None,
        },
        homes,
        homeless,
    }
}

#[derive(Clone, Debug)]
pub struct DistrictAggregate {
    /// District means, z-scored per column (population sd).
    pub table: IndicatorTable,
    /// District means before standardization.
    pub raw: IndicatorTable,
    /// Districts with no member users.
    pub empty_districts: Vec<String>,
}

/// Averages user rows into their districts (missing values skipped), then
/// z-scores each column across districts with the population sd.
pub fn aggregate_to_districts(
    users: &IndicatorTable,
    user_district: &HashMap<String, String>,
    districts: &[String],
) -> Result<DistrictAggregate> {
    let unmapped: Vec<&str> = users
        .units
        .iter()
        .filter(|u| !user_district.contains_key(*u))
        .map(String::as_str)
        .collect();
    if !unmapped.is_empty() {
        return Err(Error::invalid(format!(
            "users without a district: {}",
            unmapped.join(", ")
        )));
    }
    let ncol = users.columns.len();
    let mut sums: BTreeMap<&str, (Vec<f64>, Vec<usize>, usize)> = BTreeMap::new();
    for d in districts {
        sums.entry(d.as_str()).or_insert_with(|| (vec![0.0; ncol], vec![0; ncol], 0));
    }
    for (u, row) in users.units.iter().zip(&users.values) {
        let d = user_district[u].as_str();
        let entry = sums
            .entry(d)
            .or_insert_with(|| (vec![0.0; ncol], vec![0; ncol], 0));
        entry.2 += 1;
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                entry.0[j] += v;
                entry.1[j] += 1;
            }
        }
    }
    // keep caller's district order, then any extra districts seen in the map
    let mut order: Vec<&str> = districts.iter().map(String::as_str).collect();
    for d in sums.keys() {
        if !order.contains(d) {
            order.push(d);
        }
    }
    let mut empty = Vec::new();
    let mut units = Vec::new();
    let mut raw = Vec::new();
    for d in order {
        let (s, c, members) = &sums[d];
        if *members == 0 {
            empty.push(d.to_string());
            continue;
        }
        units.push(d.to_string());
        raw.push(
            (0..ncol)
                .map(|j| (c[j] > 0).then(|| s[j] / c[j] as f64))
                .collect::<Vec<_>>(),
        );
    }
    if units.len() < 2 {
        return Err(Error::invalid(format!(
            "standardization needs at least 2 populated districts, found {}",
            units.len()
        )));
    }
    let (z, stats) = standardize(&raw, &users.columns);
    let raw_table = IndicatorTable {
        units: units.clone(),
        columns: users.columns.clone(),
        values: raw,
        standardization: None,
    };
    Ok(DistrictAggregate {
        table: IndicatorTable {
            units,
            columns: users.columns.clone(),
            values: z,
            standardization: Some(stats),
        },
        raw: raw_table,
        empty_districts: empty,
    })
}

/// Column-wise z-scores over present values (population sd).
pub fn standardize(
    rows: &[Vec<Option<f64>>],
    columns: &[String],
) -> (Vec<Vec<Option<f64>>>, Vec<ColumnStats>) {
    let mut out = rows.to_vec();
    let mut stats = Vec::with_capacity(columns.len());
    for (j, name) in columns.iter().enumerate() {
        let present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
        let n = present.len() as f64;
        let mean = if present.is_empty() { f64::NAN } else { present.iter().sum::<f64>() / n };
        let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let degenerate = !(sd > 1e-12 * mean.abs().max(1.0));
        for r in out.iter_mut() {
            if let Some(v) = r[j] {
                r[j] = Some(if degenerate { 0.0 } else { (v - mean) / sd });
            }
        }
        stats.push(ColumnStats {
            column: name.clone(),
            mean,
            sd,
            degenerate,
        });
    }
    (out, stats)
}

/// Behavioral parameters of one latent class in the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassProfile {
    /// Poisson mean of events per user per day.
    pub events_per_day: f64,
    /// Share of events that are calls; `sms_share` are texts, the rest data.
    pub call_share: f64,
    pub sms_share: f64,
    /// Probability a call is placed inside the night window.
    pub night_bias: f64,
    pub mean_call_duration_s: f64,
    /// Probability an interaction is initiated by the user.
    pub initiated_prob: f64,
    pub n_contacts: usize,
    /// Distinct towers a user frequents besides home.
    pub roaming_towers: usize,
    /// Probability a record is made at the home tower.
    pub home_prob: f64,
}

/// Generator configuration (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthCdrConfig {
    pub n_users: usize,
    pub n_towers: usize,
    pub days: u32,
    /// Epoch seconds of local midnight starting day 0, in UTC.
    #[serde(default)]
    pub start_epoch: i64,
    #[serde(default)]
    pub utc_offset_s: i64,
    /// Share of users drawn into the `unemployed` class.
    pub unemployed_share: f64,
    pub employed: ClassProfile,
    pub unemployed: ClassProfile,
    /// Tower grid spacing in meters.
    #[serde(default = "default_spacing")]
    pub tower_spacing_m: f64,
}

fn default_spacing() -> f64 {
    1000.0
}

impl Default for SynthCdrConfig {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_towers: 25,
            days: 14,
            start_epoch: 1_412_467_200, // 2014-10-05
            utc_offset_s: 3 * 3600,
            unemployed_share: 0.2,
            employed: ClassProfile {
                events_per_day: 12.0,
                call_share: 0.5,
                sms_share: 0.2,
                night_bias: 0.25,
                mean_call_duration_s: 120.0,
                initiated_prob: 0.55,
                n_contacts: 12,
                roaming_towers: 5,
                home_prob: 0.45,
            },
            unemployed: ClassProfile {
                events_per_day: 8.0,
                call_share: 0.5,
                sms_share: 0.2,
                night_bias: 0.45,
                mean_call_duration_s: 150.0,
                initiated_prob: 0.45,
                n_contacts: 6,
                roaming_towers: 2,
                home_prob: 0.7,
            },
            tower_spacing_m: 1000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentClass {
    Employed,
    Unemployed,
}

#[derive(Clone, Debug)]
pub struct SynthCdr {
    pub events: Vec<EventRecord>,
    pub towers: Vec<TowerSite>,
    /// Projected tower positions (meters), parallel to `towers`.
    pub tower_xy: Vec<crate::geo::Point>,
    pub classes: Vec<(String, LatentClass)>,
    /// The tower each user was assigned as home.
    pub homes: Vec<(String, String)>,
}

fn check_profile(name: &str, p: &ClassProfile) -> Result<()> {
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    if !(p.events_per_day > 0.0)
        || !unit(p.call_share)
        || !unit(p.sms_share)
        || p.call_share + p.sms_share > 1.0
        || !unit(p.night_bias)
        || !(p.mean_call_duration_s >= 0.0)
        || !unit(p.initiated_prob)
        || p.n_contacts == 0
        || !unit(p.home_prob)
    {
        return Err(Error::invalid(format!("synthetic class profile {name} out of range")));
    }
    Ok(())
}

/// Synthetic event log with two latent classes. Deterministic in `seed`.
pub fn synth_cdr(cfg: &SynthCdrConfig, seed: u64) -> Result<SynthCdr> {
    if cfg.n_users == 0 || cfg.n_towers == 0 || cfg.days == 0 {
        return Err(Error::invalid("n_users, n_towers and days must be positive"));
    }
    if !(0.0..=1.0).contains(&cfg.unemployed_share) || !(cfg.tower_spacing_m > 0.0) {
        return Err(Error::invalid("unemployed_share must lie in [0,1]"));
    }
    check_profile("employed", &cfg.employed)?;
    check_profile("unemployed", &cfg.unemployed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (cfg.n_towers as f64).sqrt().ceil() as usize;
    let proj = crate::geo::LocalProjection {
        lat0: 24.45,
        lon0: 54.38,
    };
    let mut towers = Vec::with_capacity(cfg.n_towers);
    let mut tower_xy = Vec::with_capacity(cfg.n_towers);
    for t in 0..cfg.n_towers {
        let x = (t % side) as f64 * cfg.tower_spacing_m + cfg.tower_spacing_m / 2.0;
        let y = (t / side) as f64 * cfg.tower_spacing_m + cfg.tower_spacing_m / 2.0;
        let lat = proj.lat0 + (y / 6_371_008.8).to_degrees();
        let lon = proj.lon0 + (x / (6_371_008.8 * proj.lat0.to_radians().cos())).to_degrees();
        towers.push(TowerSite::new(format!("T{t:04}"), lat, lon)?);
        tower_xy.push(crate::geo::Point::new(x, y));
    }
    let user_ids: Vec<String> = (0..cfg.n_users).map(|u| format!("U{u:05}")).collect();

    let mut events = Vec::new();
    let mut classes = Vec::with_capacity(cfg.n_users);
    let mut homes = Vec::with_capacity(cfg.n_users);
    for uid in &user_ids {
        let class = if rng.random::<f64>() < cfg.unemployed_share {
            LatentClass::Unemployed
        } else {
            LatentClass::Employed
        };
        let p = match class {
            LatentClass::Employed => &cfg.employed,
            LatentClass::Unemployed => &cfg.unemployed,
        };
        let home = rng.random_range(0..cfg.n_towers);
        let roam: Vec<usize> = (0..p.roaming_towers)
            .map(|_| rng.random_range(0..cfg.n_towers))
            .collect();
        let contacts: Vec<String> = (0..p.n_contacts)
            .map(|_| format!("X{:06}", rng.random_range(0..1_000_000u32)))
            .collect();
        // Zipf-like contact weights: contact r gets weight 1/(r+1)
        let cum: Vec<f64> = contacts
            .iter()
            .enumerate()
            .scan(0.0, |acc, (r, _)| {
                *acc += 1.0 / (r as f64 + 1.0);
                Some(*acc)
            })
            .collect();
        let total_w = *cum.last().unwrap_or(&1.0);
        let per_day = Poisson::new(p.events_per_day).map_err(|e| Error::invalid(e.to_string()))?;
        let duration = Exp::new(1.0 / p.mean_call_duration_s.max(1e-9))
            .map_err(|e| Error::invalid(e.to_string()))?;

        for day in 0..cfg.days {
            let n = per_day.sample(&mut rng) as usize;
            for _ in 0..n {
                let r: f64 = rng.random();
                let kind = if r < p.call_share {
                    EventKind::Call
                } else if r < p.call_share + p.sms_share {
                    EventKind::Sms
                } else {
                    EventKind::Data
                };
                let local = if kind == EventKind::Call {
                    if rng.random::<f64>() < p.night_bias {
                        // night spans 19:00-07:00 = 12 h
                        (19 * 3600 + rng.random_range(0..12 * 3600)) % DAY
                    } else {
                        7 * 3600 + rng.random_range(0..12 * 3600)
                    }
                } else {
                    rng.random_range(0..DAY)
                };
                let timestamp = cfg.start_epoch + i64::from(day) * DAY + local - cfg.utc_offset_s;
                let tower = if roam.is_empty() || rng.random::<f64>() < p.home_prob {
                    home
                } else {
                    *roam.choose(&mut rng).expect("nonempty")
                };
                let (direction, counterpart_id, duration_s) = if kind == EventKind::Data {
                    (Direction::Initiated, None, 0.0)
                } else {
                    let pick = rng.random::<f64>() * total_w;
                    let ci = cum.partition_point(|&c| c < pick).min(contacts.len() - 1);
                    let dir = if rng.random::<f64>() < p.initiated_prob {
                        Direction::Initiated
                    } else {
                        Direction::Received
                    };
                    let d = if kind == EventKind::Call {
                        duration.sample(&mut rng).round()
                    } else {
                        0.0
                    };
                    (dir, Some(contacts[ci].clone()), d)
                };
                events.push(EventRecord {
                    user_id: uid.clone(),
                    kind,
                    direction,
                    tower_id: towers[tower].tower_id.clone(),
                    duration_s,
                    timestamp,
                    counterpart_id,
                });
            }
        }
        classes.push((uid.clone(), class));
        homes.push((uid.clone(), towers[home].tower_id.clone()));
    }
    events.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    Ok(SynthCdr {
        events,
        towers,
        tower_xy,
        classes,
        homes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(kind: EventKind, dir: Direction, tower: &str, dur: f64, ts: i64, cp: Option<&str>) -> EventRecord {
        EventRecord {
            user_id: "u".into(),
            kind,
            direction: dir,
            tower_id: tower.into(),
            duration_s: dur,
            timestamp: ts,
            counterpart_id: cp.map(str::to_string),
        }
    }

    fn at(hour: i64) -> i64 {
        hour * 3600
    }

    #[test]
    fn night_window_is_half_open() {
        let n = NightWindow::default();
        assert!(n.contains(at(19)));
        assert!(n.contains(at(23)));
        assert!(n.contains(at(6) + 3599));
        assert!(!n.contains(at(7)));
        assert!(!n.contains(at(19) - 1));
        // 16:00 UTC is 19:00 at UTC+3
        assert!(NightWindow::with_offset(3 * 3600).contains(at(16)));
    }

    #[test]
    fn home_majority_and_tie() {
        let night = NightWindow::default();
        let mk = |t: &str| ev(EventKind::Sms, Direction::Initiated, t, 0.0, at(22), None);
        let all_a: Vec<_> = (0..5).map(|_| mk("A")).collect();
        assert_eq!(home_location(&all_a, &night).unwrap(), "A");
        let mut three_two = vec![mk("B"), mk("A"), mk("B"), mk("A"), mk("A")];
        assert_eq!(home_location(&three_two, &night).unwrap(), "A");
        three_two.pop();
        assert_eq!(home_location(&three_two, &night).unwrap(), "A");
        // exhaustive 2/2 tie over id pairs
        for (x, y) in [("A", "B"), ("B", "A"), ("t10", "t9"), ("z", "y")] {
            let evs = vec![mk(x), mk(y), mk(y), mk(x)];
            assert_eq!(home_location(&evs, &night).unwrap(), x.min(y));
        }
        let day = vec![ev(EventKind::Call, Direction::Initiated, "A", 1.0, at(12), None)];
        assert!(home_location(&day, &night).is_err());
    }

    #[test]
    fn activity_examples() {
        let night = NightWindow::default();
        let mut evs: Vec<_> = (0..4)
            .map(|_| ev(EventKind::Call, Direction::Initiated, "A", 60.0, at(20), None))
            .collect();
        evs.extend((0..6).map(|_| ev(EventKind::Data, Direction::Initiated, "A", 0.0, at(3), None)));
        let a = activity_indicators(&evs, &night);
        assert_eq!((a.n_records, a.mean_call_duration_s, a.pct_night_calls), (10, Some(60.0), Some(1.0)));

        let noon: Vec<_> = (0..2)
            .map(|_| ev(EventKind::Call, Direction::Received, "A", 10.0, at(12), None))
            .collect();
        assert_eq!(activity_indicators(&noon, &night).pct_night_calls, Some(0.0));

        let hours = [8, 19, 12, 6, 18, 7];
        let mixed: Vec<_> = hours
            .iter()
            .map(|&h| ev(EventKind::Call, Direction::Initiated, "A", 1.0, at(h), None))
            .collect();
        // in-window: 19 and 6 only
        assert_eq!(activity_indicators(&mixed, &night).pct_night_calls, Some(2.0 / 6.0));

        let none = vec![ev(EventKind::Sms, Direction::Initiated, "A", 0.0, 0, None)];
        let a = activity_indicators(&none, &night);
        assert_eq!(a.mean_call_duration_s, None);
        assert_eq!(a.pct_night_calls, None);
    }

    #[test]
    fn ego_network_tally() {
        let mut evs: Vec<_> = (0..3)
            .map(|_| ev(EventKind::Call, Direction::Initiated, "A", 1.0, 0, Some("j")))
            .collect();
        evs.push(ev(EventKind::Sms, Direction::Received, "A", 0.0, 0, Some("j")));
        let net = build_ego_network("u", &evs).unwrap();
        assert_eq!(net.degree(), 1);
        assert_eq!(net.volume("j"), Some((3, 1)));

        assert_eq!(build_ego_network("u", &[]).unwrap().degree(), 0);

        let fixture = vec![
            ev(EventKind::Call, Direction::Initiated, "A", 1.0, 0, Some("a")),
            ev(EventKind::Call, Direction::Received, "A", 1.0, 0, Some("b")),
            ev(EventKind::Sms, Direction::Received, "A", 0.0, 0, Some("b")),
            ev(EventKind::Sms, Direction::Initiated, "A", 0.0, 0, Some("c")),
            ev(EventKind::Data, Direction::Initiated, "A", 0.0, 0, None),
            ev(EventKind::Call, Direction::Received, "A", 1.0, 0, Some("c")),
            ev(EventKind::Call, Direction::Initiated, "A", 1.0, 0, Some("a")),
        ];
        let net = build_ego_network("u", &fixture).unwrap();
        assert_eq!(net.degree(), 3);
        assert_eq!(net.volume("a"), Some((2, 0)));
        assert_eq!(net.volume("b"), Some((0, 2)));
        assert_eq!(net.volume("c"), Some((1, 1)));

        let no_cp = vec![ev(EventKind::Call, Direction::Initiated, "A", 1.0, 0, None)];
        assert!(build_ego_network("u", &no_cp).is_err());
    }

    #[test]
    fn pct_initiated_examples() {
        let only_in = EgoNetwork::from_volumes("e", [("a", 0, 2), ("b", 0, 1)]);
        assert_eq!(pct_initiated(&only_in, InitiatedConvention::Outgoing), Some(0.0));
        let only_out = EgoNetwork::from_volumes("e", [("a", 3, 0)]);
        assert_eq!(pct_initiated(&only_out, InitiatedConvention::Outgoing), Some(1.0));
        // 2 in-only, 2 out-only, 1 both: |O| = 3, |I| = 3
        let mixed = EgoNetwork::from_volumes(
            "e",
            [("a", 0, 1), ("b", 0, 4), ("c", 2, 0), ("d", 1, 0), ("x", 1, 1)],
        );
        assert_eq!(pct_initiated(&mixed, InitiatedConvention::Outgoing), Some(0.5));
        assert_eq!(pct_initiated(&mixed, InitiatedConvention::Incoming), Some(0.5));
        let lopsided = EgoNetwork::from_volumes("e", [("a", 0, 1), ("c", 2, 0), ("d", 1, 0)]);
        assert_eq!(pct_initiated(&lopsided, InitiatedConvention::Outgoing), Some(2.0 / 3.0));
        assert_eq!(pct_initiated(&lopsided, InitiatedConvention::Incoming), Some(1.0 / 3.0));
        assert_eq!(pct_initiated(&EgoNetwork::new("e"), InitiatedConvention::Outgoing), None);
    }

    #[test]
    fn balance_examples() {
        assert_eq!(balance_of_contacts(&EgoNetwork::from_volumes("e", [("a", 5, 5)])), Some(0.5));
        assert_eq!(balance_of_contacts(&EgoNetwork::from_volumes("e", [("a", 4, 0)])), Some(1.0));
        let two = EgoNetwork::from_volumes("e", [("a", 3, 1), ("b", 0, 2)]);
        assert_eq!(balance_of_contacts(&two), Some(0.375));
        assert_eq!(balance_of_contacts(&EgoNetwork::new("e")), None);
    }

    #[test]
    fn entropy_examples() {
        let uniform = EgoNetwork::from_volumes("e", [("a", 2, 0), ("b", 1, 1), ("c", 0, 2), ("d", 2, 0)]);
        assert!((social_entropy(&uniform).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(social_entropy(&EgoNetwork::from_volumes("e", [("a", 7, 2)])), Some(0.0));
        let skew = EgoNetwork::from_volumes("e", [("a", 8, 0), ("b", 1, 0), ("c", 0, 1)]);
        let p = [0.8_f64, 0.1, 0.1];
        let want = -p.iter().map(|q| q * q.ln()).sum::<f64>() / 3f64.ln();
        assert!((social_entropy(&skew).unwrap() - want).abs() < 1e-12);
        assert_eq!(social_entropy(&EgoNetwork::new("e")), None);
    }

    #[test]
    fn interactions_per_contact_examples() {
        assert_eq!(interactions_per_contact(&EgoNetwork::from_volumes("e", [("a", 4, 2)])), Some(6.0));
        let two = EgoNetwork::from_volumes("e", [("a", 3, 1), ("b", 0, 2)]);
        assert_eq!(interactions_per_contact(&two), Some(3.0));
        let five = EgoNetwork::from_volumes("e", (0..5).map(|i| (format!("c{i}"), 1, 1)));
        assert_eq!(interactions_per_contact(&five), Some(2.0));
    }

    #[test]
    fn spatial_examples() {
        let mk = |t: &str| ev(EventKind::Data, Direction::Initiated, t, 0.0, 0, None);
        let home: Vec<_> = (0..4).map(|_| mk("A")).collect();
        assert_eq!(
            spatial_markers(&home, "A").unwrap(),
            SpatialMarkers { visited_locations: 1, pct_time_home: 1.0 }
        );
        let mixed: Vec<_> = ["A", "B", "C", "B", "A", "C"].iter().map(|t| mk(t)).collect();
        let s = spatial_markers(&mixed, "A").unwrap();
        assert_eq!(s.visited_locations, 3);
        assert!((s.pct_time_home - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(spatial_markers(&[mk("B")], "A").unwrap().pct_time_home, 0.0);
        assert!(spatial_markers(&[], "A").is_err());
    }

    fn table(units: &[&str], vals: &[f64]) -> IndicatorTable {
        IndicatorTable {
            units: units.iter().map(|s| s.to_string()).collect(),
            columns: vec!["x".into()],
            values: vals.iter().map(|&v| vec![Some(v)]).collect(),
            standardization: None,
        }
    }

    #[test]
    fn two_district_zscore() {
        let t = table(&["a", "b", "c", "d"], &[3.0, 5.0, 6.0, 6.0]);
        let map: HashMap<String, String> = [("a", "D1"), ("b", "D1"), ("c", "D2"), ("d", "D2")]
            .iter()
            .map(|(u, d)| (u.to_string(), d.to_string()))
            .collect();
        let agg = aggregate_to_districts(&t, &map, &["D1".into(), "D2".into(), "D3".into()]).unwrap();
        assert_eq!(agg.table.values, vec![vec![Some(-1.0)], vec![Some(1.0)]]);
        assert_eq!(agg.empty_districts, vec!["D3"]);
        let s = &agg.table.standardization.as_ref().unwrap()[0];
        assert_eq!((s.mean, s.sd, s.degenerate), (5.0, 1.0, false));
    }

    #[test]
    fn identical_districts_are_degenerate() {
        let t = table(&["a", "b"], &[2.0, 2.0]);
        let map: HashMap<String, String> =
            [("a", "D1"), ("b", "D2")].iter().map(|(u, d)| (u.to_string(), d.to_string())).collect();
        let agg = aggregate_to_districts(&t, &map, &[]).unwrap();
        assert_eq!(agg.table.values, vec![vec![Some(0.0)], vec![Some(0.0)]]);
        assert!(agg.table.standardization.unwrap()[0].degenerate);
    }

    #[test]
    fn five_district_spreadsheet() {
        // users per district and their values; district means 2, 4, 6, 8, 10
        let units = ["a", "b", "c", "d", "e", "f", "g"];
        let vals = [1.0, 3.0, 4.0, 6.0, 8.0, 9.0, 11.0];
        let dist = ["D1", "D1", "D2", "D3", "D4", "D5", "D5"];
        let t = table(&units, &vals);
        let map: HashMap<String, String> =
            units.iter().zip(dist).map(|(u, d)| (u.to_string(), d.to_string())).collect();
        let agg = aggregate_to_districts(&t, &map, &[]).unwrap();
        // mean 6, population sd sqrt((16+4+0+4+16)/5) = sqrt(8)
        let sd = 8f64.sqrt();
        let want = [-4.0 / sd, -2.0 / sd, 0.0, 2.0 / sd, 4.0 / sd];
        for (row, w) in agg.table.values.iter().zip(want) {
            assert!((row[0].unwrap() - w).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_user_values_are_skipped() {
        let t = IndicatorTable {
            units: vec!["a".into(), "b".into(), "c".into()],
            columns: vec!["x".into()],
            values: vec![vec![Some(1.0)], vec![None], vec![Some(5.0)]],
            standardization: None,
        };
        let map: HashMap<String, String> = [("a", "D1"), ("b", "D1"), ("c", "D2")]
            .iter()
            .map(|(u, d)| (u.to_string(), d.to_string()))
            .collect();
        let agg = aggregate_to_districts(&t, &map, &[]).unwrap();
        assert_eq!(agg.raw.values, vec![vec![Some(1.0)], vec![Some(5.0)]]);
    }

    #[test]
    fn synth_is_deterministic() {
        let cfg = SynthCdrConfig {
            n_users: 10,
            days: 3,
            ..SynthCdrConfig::default()
        };
        let a = synth_cdr(&cfg, 42).unwrap();
        let b = synth_cdr(&cfg, 42).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.classes, b.classes);
        let c = synth_cdr(&cfg, 43).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn synth_forced_night_bias() {
        let mut cfg = SynthCdrConfig {
            n_users: 20,
            days: 3,
            unemployed_share: 1.0,
            ..SynthCdrConfig::default()
        };
        cfg.unemployed.night_bias = 1.0;
        let s = synth_cdr(&cfg, 1).unwrap();
        let night = NightWindow::with_offset(cfg.utc_offset_s);
        let ui = user_indicators(&s.events, &IndicatorOptions { night, ..Default::default() });
        for v in ui.table.column("pct_night_calls").unwrap().into_iter().flatten() {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn synth_rejects_bad_config() {
        let cfg = SynthCdrConfig {
            n_users: 0,
            ..SynthCdrConfig::default()
        };
        assert!(synth_cdr(&cfg, 0).is_err());
        let mut cfg = SynthCdrConfig::default();
        cfg.employed.call_share = 0.9;
        cfg.employed.sms_share = 0.3;
        assert!(synth_cdr(&cfg, 0).is_err());
    }
}
