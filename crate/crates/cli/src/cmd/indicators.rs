use std::collections::HashMap;
use std::path::PathBuf;

use laborflow::indicators::{
    aggregate_to_districts, user_indicators, IndicatorOptions, IndicatorTable, InitiatedConvention, NightWindow,
};
use laborflow::io::{parse_timestamp, read_events, read_towers};
use laborflow::model::TimeWindow;
use serde::{Deserialize, Serialize};

use super::required;
use crate::error::{input, Result};
use crate::output::{num, opt, Ctx, Outputs};

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initiated {
    Outgoing,
    Incoming,
}

#[derive(clap::Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Args {
    /// Events CSV.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Towers CSV; events at unknown towers are rejected.
    #[arg(long)]
    pub towers: Option<PathBuf>,
    /// CSV `user_id,district` for district aggregation and standardization.
    #[arg(long)]
    pub districts: Option<PathBuf>,
    /// Local time offset from UTC in seconds [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub utc_offset_s: Option<i64>,
    /// First local night hour [default: 19].
    #[arg(long)]
    pub night_start: Option<u32>,
    /// Local hour the night ends [default: 7].
    #[arg(long)]
    pub night_end: Option<u32>,
    /// Contact set counted as initiated [default: outgoing].
    #[arg(long, value_enum)]
    pub initiated: Option<Initiated>,
    /// Observation window start (ISO-8601 or epoch seconds).
    #[arg(long)]
    pub window_start: Option<String>,
    /// Observation window end, exclusive.
    #[arg(long)]
    pub window_end: Option<String>,
}

fn instant(s: &Option<String>, flag: &str) -> Result<Option<i64>> {
    s.as_deref()
        .map(|v| parse_timestamp(v).ok_or_else(|| input(format!("--{flag}: bad timestamp {v:?}"))))
        .transpose()
}

fn write_table(out: &mut Outputs, name: &str, t: &IndicatorTable) -> Result<()> {
    let mut header = vec!["unit_id"];
    header.extend(t.columns.iter().map(String::as_str));
    out.csv(name, &header, |w| {
        for (u, row) in t.units.iter().zip(&t.values) {
            let mut rec = vec![u.clone()];
            rec.extend(row.iter().map(|v| opt(*v)));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn run(a: &Args, ctx: &mut Ctx) -> Result<Outputs> {
    let window = match (instant(&a.window_start, "window-start")?, instant(&a.window_end, "window-end")?) {
        (None, None) => TimeWindow::unbounded(),
        (s, e) => TimeWindow::new(s.unwrap_or(i64::MIN), e.unwrap_or(i64::MAX))?,
    };
    let towers = match &a.towers {
        Some(p) => Some(read_towers(ctx.read(p)?.as_slice())?.0),
        None => None,
    };
    let events_path = required(&a.events, "events")?;
    let loaded = read_events(ctx.read(events_path)?.as_slice(), window, towers.as_ref())?;
    if loaded.records.is_empty() {
        return Err(input(format!("no events in window ({} dropped)", loaded.dropped)));
    }
    let districts = match &a.districts {
        Some(p) => {
            let bytes = ctx.read(p)?;
            let mut rdr = csv::Reader::from_reader(bytes.as_slice());
            if rdr.headers()?.iter().ne(["user_id", "district"]) {
                return Err(input("districts file needs header user_id,district"));
            }
            let mut map = HashMap::new();
            let mut order = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                if !order.contains(&rec[1].to_string()) {
                    order.push(rec[1].to_string());
                }
                map.insert(rec[0].to_string(), rec[1].to_string());
            }
            Some((map, order))
        }
        None => None,
    };

    let night = NightWindow {
        utc_offset_s: a.utc_offset_s.unwrap_or(0),
        start_hour: a.night_start.unwrap_or(19),
        end_hour: a.night_end.unwrap_or(7),
    };
    if night.start_hour > 23 || night.end_hour > 23 {
        return Err(input("night hours must lie in 0..=23"));
    }
    let initiated = match a.initiated.unwrap_or(Initiated::Outgoing) {
        Initiated::Outgoing => InitiatedConvention::Outgoing,
        Initiated::Incoming => InitiatedConvention::Incoming,
    };
    let users = user_indicators(&loaded.records, &IndicatorOptions { night, initiated });

    let mut out = Outputs::default();
    write_table(&mut out, "indicators.csv", &users.table)?;
    out.csv("homes.csv", &["unit_id", "tower_id"], |w| {
        for (u, t) in &users.homes {
            w.write_record([u, t])?;
        }
        Ok(())
    })?;
    if let Some((map, order)) = districts {
        let agg = aggregate_to_districts(&users.table, &map, &order)?;
        write_table(&mut out, "districts.csv", &agg.table)?;
        write_table(&mut out, "districts_raw.csv", &agg.raw)?;
        let stats = agg.table.standardization.clone().unwrap_or_default();
        out.csv("standardization.csv", &["column", "mean", "sd"], |w| {
            for s in &stats {
                w.write_record([s.column.clone(), num(s.mean), num(s.sd)])?;
            }
            Ok(())
        })?;
        out.note("districts", agg.table.units.len());
        out.note("empty_districts", &agg.empty_districts);
        out.note(
            "degenerate_columns",
            stats.iter().filter(|s| s.degenerate).map(|s| s.column.clone()).collect::<Vec<_>>(),
        );
    }
    out.note("events", loaded.records.len());
    out.note("dropped_outside_window", loaded.dropped);
    out.note("users", users.table.units.len());
    out.note("users_without_home", &users.homeless);
    Ok(out)
}
