use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Event, Trace};
use crate::error::{Error, Result};

/// A column addressed by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    fn resolve(&self, headers: &csv::StringRecord) -> Option<usize> {
        match self {
            ColumnRef::Index(i) => (*i < headers.len()).then_some(*i),
            ColumnRef::Name(n) => headers.iter().position(|h| h.trim() == n),
        }
    }
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_owned())
    }
}

/// Column mapping for CSV event logs.
///
/// The timestamp column is optional: when it is absent from the file the
/// traces simply carry no time span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub case: ColumnRef,
    pub activity: ColumnRef,
    pub timestamp: Option<ColumnRef>,
    /// chrono format strings tried after RFC 3339, interpreted as UTC.
    pub timestamp_formats: Vec<String>,
    pub delimiter: char,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            case: "case".into(),
            activity: "activity".into(),
            timestamp: Some("timestamp".into()),
            timestamp_formats: vec![
                "%Y-%m-%d %H:%M:%S%.f".into(),
                "%Y-%m-%dT%H:%M:%S%.f".into(),
                "%Y/%m/%d %H:%M:%S%.f".into(),
                "%d.%m.%Y %H:%M:%S".into(),
                "%Y-%m-%d".into(),
            ],
            delimiter: ',',
        }
    }
}

impl CsvSchema {
    pub(crate) fn parse_timestamp(&self, raw: &str) -> Option<DateTime<Utc>> {
        parse_timestamp(raw, &self.timestamp_formats)
    }
}

pub(crate) fn parse_timestamp(raw: &str, formats: &[String]) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in formats {
        if let Ok(t) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(t.and_utc());
        }
        if let Ok(d) = NaiveDate::parse_from_str(raw, fmt) {
            return d.and_hms_opt(0, 0, 0).map(|t| t.and_utc());
        }
    }
    None
}

pub fn parse_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<Trace>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_csv_reader(f, schema)
}

pub fn parse_csv_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Vec<Trace>> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::Schema(format!(
            "delimiter {:?} is not a single byte",
            schema.delimiter
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let missing = |what: &str, c: &ColumnRef| Error::Schema(format!("missing {what} column {c:?}"));
    let case_col = schema
        .case
        .resolve(&headers)
        .ok_or_else(|| missing("case-id", &schema.case))?;
    let act_col = schema
        .activity
        .resolve(&headers)
        .ok_or_else(|| missing("activity", &schema.activity))?;
    let ts_col = schema.timestamp.as_ref().and_then(|c| c.resolve(&headers));

    let mut events = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let activity = field(act_col);
        if activity.is_empty() {
            return Err(Error::Row {
                line,
                message: "empty activity".into(),
            });
        }
        let timestamp = match ts_col.map(field) {
            None | Some("") => None,
            Some(raw) => Some(schema.parse_timestamp(raw).ok_or_else(|| Error::Row {
                line,
                message: format!("unparseable timestamp '{raw}'"),
            })?),
        };
        events.push(Event {
            case_id: field(case_col).to_owned(),
            activity: activity.to_owned(),
            timestamp,
        });
    }
    Ok(Trace::group(events))
}
