//! CSV readers and writers for rainfall records and debris-flow events.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rainfall::RainSeries;

pub const RAINFALL_HEADER: [&str; 3] = ["station_id", "timestamp", "rainfall_mm"];
pub const EVENTS_HEADER: [&str; 2] = ["station_id", "timestamp"];

/// A recorded debris flow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DebrisEvent {
    pub station_id: String,
    pub timestamp: DateTime<Utc>,
}

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::invalid(format!("bad ISO-8601 timestamp {s:?}: {e}")))
}

#[derive(Debug, Deserialize)]
struct RainRow {
    station_id: String,
    timestamp: String,
    rainfall_mm: f64,
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().map(str::trim).collect();
    if got != want {
        return Err(Error::format(
            path,
            format!(
                "expected header `{}`, found `{}`",
                want.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

/// Reads a (possibly pooled) rainfall CSV into one series per station,
/// ordered by station id.
///
/// Missing hours are rejected unless `impute_missing` is set, in which case
/// they are filled with 0 mm and a warning is logged.
pub fn read_rainfall_csv(path: &Path, impute_missing: bool) -> Result<Vec<RainSeries>> {
    let file = File::open(path)
        .map_err(|e| Error::format(path, format!("cannot open rainfall CSV: {e}")))?;
    read_rainfall(file, path, impute_missing)
}

pub fn read_rainfall<R: Read>(
    reader: R,
    path: &Path,
    impute_missing: bool,
) -> Result<Vec<RainSeries>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(path, rdr.headers()?, &RAINFALL_HEADER)?;
    let mut per_station: BTreeMap<String, (DateTime<Utc>, Vec<f64>)> = BTreeMap::new();
    for (line, row) in rdr.deserialize::<RainRow>().enumerate() {
        let row = row?;
        let line = line + 2;
        let ts = parse_timestamp(&row.timestamp)
            .map_err(|e| Error::format(path, format!("line {line}: {e}")))?;
        match per_station.get_mut(&row.station_id) {
            None => {
                per_station.insert(row.station_id, (ts, vec![row.rainfall_mm]));
            }
            Some((start, values)) => {
                let next = *start + chrono::Duration::hours(values.len() as i64);
                if ts < next {
                    return Err(Error::format(
                        path,
                        format!(
                            "line {line}: station {} timestamp {} is duplicated or out of order",
                            row.station_id, row.timestamp
                        ),
                    ));
                }
                if ts > next {
                    let gap = ts.signed_duration_since(next);
                    if gap.num_seconds() % 3600 != 0 {
                        return Err(Error::format(
                            path,
                            format!("line {line}: timestamp not hour-aligned"),
                        ));
                    }
                    if !impute_missing {
                        return Err(Error::format(
                            path,
                            format!(
                                "line {line}: station {} is missing {} hour(s) before {}",
                                row.station_id,
                                gap.num_hours(),
                                row.timestamp
                            ),
                        ));
                    }
                    log::warn!(
                        "station {}: imputing {} missing hour(s) before {} as 0 mm",
                        row.station_id,
                        gap.num_hours(),
                        row.timestamp
                    );
                    values.extend(std::iter::repeat_n(0.0, gap.num_hours() as usize));
                }
                values.push(row.rainfall_mm);
            }
        }
    }
    if per_station.is_empty() {
        return Err(Error::format(path, "rainfall CSV has no rows"));
    }
    per_station
        .into_iter()
        .map(|(id, (start, values))| {
            RainSeries::new(id, start, values).map_err(|e| Error::format(path, e.to_string()))
        })
        .collect()
}

pub fn write_rainfall<W: Write>(writer: W, series: &[RainSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RAINFALL_HEADER)?;
    for s in series {
        for (i, v) in s.values().iter().enumerate() {
            w.write_record([
                s.station_id(),
                &format_timestamp(s.timestamp(i)),
                &v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_csv(path: &Path) -> Result<Vec<DebrisEvent>> {
    let file = File::open(path)
        .map_err(|e| Error::format(path, format!("cannot open events CSV: {e}")))?;
    let mut rdr = csv::Reader::from_reader(file);
    check_header(path, rdr.headers()?, &EVENTS_HEADER)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ts = parse_timestamp(&rec[1])
            .map_err(|e| Error::format(path, format!("line {}: {e}", line + 2)))?;
        out.push(DebrisEvent {
            station_id: rec[0].trim().to_string(),
            timestamp: ts,
        });
    }
    out.sort();
    Ok(out)
}

pub fn write_events<W: Write>(writer: W, events: &[DebrisEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENTS_HEADER)?;
    for e in events {
        w.write_record([e.station_id.as_str(), &format_timestamp(e.timestamp)])?;
    }
    w.flush()?;
    Ok(())
}
