//! CSV ingestion and export of labeled streams.
//!
//! A header row is required; columns are located by name through a
//! [`SchemaMap`]. Timestamps are integer milliseconds or ISO-8601 strings
//! (detected per value; ISO times become milliseconds since the Unix epoch).
//! Behavior vectors are not stored: they are re-derived on load.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{LabeledStream, StreamManifest, GENERATOR_VERSION};
use crate::error::{Error, Result};
use crate::tx::{AccountId, BehaviorTracker, Geo, LatLon, ProfileConfig, Transaction};

/// Column names for each transaction field. `None` marks an optional
/// column as absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaMap {
    pub amount: String,
    pub timestamp: String,
    pub sender: String,
    pub receiver: String,
    pub tx_id: Option<String>,
    pub label: Option<String>,
    pub region: Option<String>,
    pub lat: Option<String>,
    pub lon: Option<String>,
    pub device: Option<String>,
}

impl Default for SchemaMap {
    fn default() -> Self {
        SchemaMap {
            amount: "amount".into(),
            timestamp: "timestamp".into(),
            sender: "sender".into(),
            receiver: "receiver".into(),
            tx_id: Some("tx_id".into()),
            label: Some("label".into()),
            region: Some("region".into()),
            lat: Some("lat".into()),
            lon: Some("lon".into()),
            device: Some("device".into()),
        }
    }
}

struct Columns {
    amount: usize,
    timestamp: usize,
    sender: usize,
    receiver: usize,
    tx_id: Option<usize>,
    label: Option<usize>,
    region: Option<usize>,
    lat: Option<usize>,
    lon: Option<usize>,
    device: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, schema: &SchemaMap) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let required = |name: &str| find(name).ok_or_else(|| Error::Schema(format!("missing mandatory column `{name}`")));
        let optional = |name: &Option<String>| name.as_deref().and_then(find);
        Ok(Columns {
            amount: required(&schema.amount)?,
            timestamp: required(&schema.timestamp)?,
            sender: required(&schema.sender)?,
            receiver: required(&schema.receiver)?,
            tx_id: optional(&schema.tx_id),
            label: optional(&schema.label),
            region: optional(&schema.region),
            lat: optional(&schema.lat),
            lon: optional(&schema.lon),
            device: optional(&schema.device),
        })
    }
}

fn parse_timestamp(raw: &str) -> std::result::Result<u64, String> {
    let raw = raw.trim();
    if let Ok(ms) = raw.parse::<u64>() {
        return Ok(ms);
    }
    let millis = if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        dt.timestamp_millis()
    } else if let Ok(naive) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f") {
        naive.and_utc().timestamp_millis()
    } else {
        return Err(format!("unparseable timestamp `{raw}`"));
    };
    u64::try_from(millis).map_err(|_| format!("timestamp `{raw}` precedes the epoch"))
}

fn parse_label(raw: &str) -> std::result::Result<Option<bool>, String> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "0" | "false" => Ok(Some(false)),
        "1" | "true" => Ok(Some(true)),
        other => Err(format!("unparseable label `{other}`")),
    }
}

pub fn load_csv(path: &Path, schema: &SchemaMap, profile: &ProfileConfig) -> Result<LabeledStream> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| csv_err(path, 1, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, 1, e))?.clone();
    let cols = Columns::resolve(&headers, schema)?;

    let mut rows: Vec<(u64, Transaction)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(path, line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fail = |message: String| Error::Csv { path: path.to_owned(), line, message };
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let opt = |i: Option<usize>| i.map(field).filter(|s| !s.is_empty());

        let amount: f64 = field(cols.amount).parse().map_err(|_| fail(format!("unparseable amount `{}`", field(cols.amount))))?;
        let timestamp = parse_timestamp(field(cols.timestamp)).map_err(&fail)?;
        let tx_id = match opt(cols.tx_id) {
            Some(s) => Some(s.parse::<u64>().map_err(|_| fail(format!("unparseable tx_id `{s}`")))?),
            None => None,
        };
        let label = match opt(cols.label) {
            Some(s) => parse_label(s).map_err(&fail)?,
            None => None,
        };
        let region = match opt(cols.region) {
            Some(s) => s.parse::<u16>().map_err(|_| fail(format!("unparseable region `{s}`")))?,
            None => 0,
        };
        let coords = match (opt(cols.lat), opt(cols.lon)) {
            (Some(lat), Some(lon)) => Some(LatLon {
                lat: lat.parse().map_err(|_| fail(format!("unparseable lat `{lat}`")))?,
                lon: lon.parse().map_err(|_| fail(format!("unparseable lon `{lon}`")))?,
            }),
            _ => None,
        };
        let device = match opt(cols.device) {
            Some(s) => s.parse::<u32>().map_err(|_| fail(format!("unparseable device `{s}`")))?,
            None => 0,
        };

        let tx = Transaction {
            tx_id: tx_id.unwrap_or(0),
            sender: AccountId(field(cols.sender).to_owned()),
            receiver: AccountId(field(cols.receiver).to_owned()),
            amount,
            timestamp,
            geo: Geo { region, coords },
            device,
            behavior: Default::default(),
            label,
        };
        tx.validate().map_err(|e| fail(e.to_string()))?;
        rows.push((line, tx));
    }

    let explicit_ids = cols.tx_id.is_some();
    // Stable: equal timestamps keep file order.
    rows.sort_by_key(|(_, tx)| tx.timestamp);
    let mut transactions: Vec<Transaction> = rows.into_iter().map(|(_, tx)| tx).collect();
    if !explicit_ids {
        for (i, tx) in transactions.iter_mut().enumerate() {
            tx.tx_id = i as u64 + 1;
        }
    }
    BehaviorTracker::new(*profile).annotate(&mut transactions)?;

    Ok(LabeledStream {
        transactions,
        manifest: StreamManifest {
            source: format!("csv:{}", path.display()),
            spec: None,
            params: None,
            generator_version: GENERATOR_VERSION.into(),
        },
    })
}

fn csv_err(path: &Path, line: u64, e: impl std::fmt::Display) -> Error {
    Error::Csv { path: path.to_owned(), line, message: e.to_string() }
}

/// Writes `stream` using the default [`SchemaMap`] column names.
pub fn write_csv(stream: &LabeledStream, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["tx_id", "timestamp", "sender", "receiver", "amount", "region", "lat", "lon", "device", "label"])
        .map_err(csv_io)?;
    for tx in &stream.transactions {
        let (lat, lon) = tx.geo.coords.map_or((String::new(), String::new()), |c| (c.lat.to_string(), c.lon.to_string()));
        let label = match tx.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        w.write_record([
            tx.tx_id.to_string(),
            tx.timestamp.to_string(),
            tx.sender.to_string(),
            tx.receiver.to_string(),
            tx.amount.to_string(),
            tx.geo.region.to_string(),
            lat,
            lon,
            tx.device.to_string(),
            label.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(stream: &LabeledStream, path: &Path) -> Result<()> {
    write_csv(stream, std::io::BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_well_formed_rows() {
        let f = write_tmp(
            "timestamp,sender,receiver,amount,label\n\
             1000,a,b,10.5,0\n\
             3000,b,c,99,1\n\
             2000,a,c,5,0\n",
        );
        let s = load_csv(f.path(), &SchemaMap::default(), &ProfileConfig::default()).unwrap();
        assert_eq!(s.len(), 3);
        let ts: Vec<u64> = s.transactions.iter().map(|t| t.timestamp).collect();
        assert_eq!(ts, vec![1000, 2000, 3000]);
        assert_eq!(s.transactions[2].label, Some(true));
        assert_eq!(s.transactions.iter().map(|t| t.tx_id).collect::<Vec<_>>(), vec![1, 2, 3]);
        // Second tx by `a` sees the first.
        assert_eq!(s.transactions[1].behavior.tx_rate, 2.0);
    }

    #[test]
    fn bad_amount_cites_line_two() {
        let f = write_tmp("timestamp,sender,receiver,amount\n1000,a,b,ten\n2000,a,b,1\n");
        let err = load_csv(f.path(), &SchemaMap::default(), &ProfileConfig::default()).unwrap_err();
        match err {
            Error::Csv { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("amount"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_mandatory_column() {
        let f = write_tmp("timestamp,sender,amount\n1000,a,1\n");
        let err = load_csv(f.path(), &SchemaMap::default(), &ProfileConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("receiver")));
    }

    #[test]
    fn iso_timestamps_and_custom_names() {
        let f = write_tmp("when,from,to,value\n1970-01-01T00:00:02Z,a,b,1\n1970-01-01T00:00:01.500,a,b,2\n");
        let schema = SchemaMap {
            amount: "value".into(),
            timestamp: "when".into(),
            sender: "from".into(),
            receiver: "to".into(),
            ..SchemaMap::default()
        };
        let s = load_csv(f.path(), &schema, &ProfileConfig::default()).unwrap();
        assert_eq!(s.transactions[0].timestamp, 1500);
        assert_eq!(s.transactions[1].timestamp, 2000);
        assert_eq!(s.transactions[0].label, None);
    }

    #[test]
    fn self_transfer_is_rejected_with_line() {
        let f = write_tmp("timestamp,sender,receiver,amount\n1,a,b,1\n2,a,b,1\n3,c,c,1\n");
        let err = load_csv(f.path(), &SchemaMap::default(), &ProfileConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 4, .. }), "{err}");
    }
}
