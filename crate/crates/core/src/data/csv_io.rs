use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{CodeMap, Frequency, PanelDataset, TimeSeries};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    Ignore,
}

/// Column mapping for panel CSV files. Columns other than the id, timestamp
/// and value columns are read according to `columns`; undeclared columns are
/// ignored with a warning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub series_id: String,
    pub timestamp: String,
    pub value: String,
    pub columns: BTreeMap<String, ColumnKind>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            series_id: "series_id".into(),
            timestamp: "timestamp".into(),
            value: "value".into(),
            columns: BTreeMap::new(),
        }
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").ok().map(|d| d.date()))
        .or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").ok().map(|d| d.date()))
}

fn parse_number(s: &str, line: usize, column: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Type {
            line,
            column: column.to_string(),
            value: s.to_string(),
        }),
    }
}

struct RawRow {
    line: usize,
    date: NaiveDate,
    value: f64,
    labels: Vec<String>,
    numerics: Vec<f64>,
}

/// Reads a panel CSV file. See [`parse_csv`].
pub fn ingest_csv(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
    frequency: Frequency,
    horizon: usize,
    codes: Option<&CodeMap>,
) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, schema, frequency, horizon, codes)
}

/// Parses panel CSV data into one series per id, sorted by id and
/// timestamp. With `codes`, categorical labels are encoded with that frozen
/// map (unseen labels get the reserved code); otherwise a map is built from
/// the data.
pub fn parse_csv<R: Read>(
    reader: R,
    schema: &CsvSchema,
    frequency: Frequency,
    horizon: usize,
    codes: Option<&CodeMap>,
) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse {
            line: 1,
            message: "empty file: a header row is required".into(),
        });
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("required column '{name}' not found in header")))
    };
    let id_col = find(&schema.series_id)?;
    let ts_col = find(&schema.timestamp)?;
    let value_col = find(&schema.value)?;

    let mut cat_cols = Vec::new();
    let mut num_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim();
        if i == id_col || i == ts_col || i == value_col {
            continue;
        }
        match schema.columns.get(h) {
            Some(ColumnKind::Categorical) => cat_cols.push((i, h.to_string())),
            Some(ColumnKind::Numeric) => num_cols.push((i, h.to_string())),
            Some(ColumnKind::Ignore) => {}
            None => log::warn!("column '{h}' is not declared in the schema and is ignored"),
        }
    }
    for name in schema.columns.keys() {
        if !headers.iter().any(|h| h.trim() == name) && schema.columns[name] != ColumnKind::Ignore {
            return Err(Error::Schema(format!("declared column '{name}' not found in header")));
        }
    }

    let mut rows: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let date = parse_date(&rec[ts_col]).ok_or_else(|| Error::Parse {
            line,
            message: format!("malformed timestamp '{}'", &rec[ts_col]),
        })?;
        let value = parse_number(&rec[value_col], line, &schema.value)?;
        let labels = cat_cols.iter().map(|(i, _)| rec[*i].trim().to_string()).collect();
        let numerics = num_cols
            .iter()
            .map(|(i, name)| parse_number(&rec[*i], line, name))
            .collect::<Result<_>>()?;
        rows.entry(rec[id_col].trim().to_string()).or_default().push(RawRow {
            line,
            date,
            value,
            labels,
            numerics,
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }

    let codes = match codes {
        Some(c) => {
            for id in rows.keys() {
                if !c.series.is_empty() && c.series.binary_search(id).is_err() {
                    log::warn!("series '{id}' was not seen in training and gets the reserved series code");
                }
            }
            c.clone()
        }
        None => {
            let mut map = CodeMap {
                series: rows.keys().cloned().collect(),
                ..CodeMap::default()
            };
            for (k, (_, name)) in cat_cols.iter().enumerate() {
                let labels: BTreeSet<&str> = rows.values().flatten().map(|r| r.labels[k].as_str()).collect();
                map.columns.insert(name.clone(), labels.into_iter().map(String::from).collect());
            }
            map
        }
    };

    let mut series = Vec::with_capacity(rows.len());
    for (id, mut raw) in rows {
        raw.sort_by_key(|r| (r.date, r.line));
        if let Some(w) = raw.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::DuplicateKey {
                series_id: id,
                timestamp: w[1].date.to_string(),
            });
        }
        let categoricals = cat_cols
            .iter()
            .enumerate()
            .map(|(k, (_, name))| {
                raw.iter()
                    .map(|r| {
                        codes.code(name, &r.labels[k]).unwrap_or_else(|| {
                            log::warn!(
                                "series '{id}' line {}: unseen category '{}' in column '{name}' mapped to the reserved code",
                                r.line,
                                r.labels[k]
                            );
                            codes.reserved_code(name)
                        })
                    })
                    .collect()
            })
            .collect();
        let numerics = (0..num_cols.len()).map(|k| raw.iter().map(|r| r.numerics[k]).collect()).collect();
        series.push(TimeSeries {
            id,
            timestamps: raw.iter().map(|r| r.date).collect(),
            values: raw.iter().map(|r| r.value).collect(),
            categoricals,
            numerics,
            pad: vec![false; raw.len()],
        });
    }

    Ok(PanelDataset {
        frequency,
        horizon,
        series,
        categorical_names: cat_cols.into_iter().map(|(_, n)| n).collect(),
        numeric_names: num_cols.into_iter().map(|(_, n)| n).collect(),
        codes,
        lag_order: 0,
        padded: false,
    })
}

/// Writes `series_id,timestamp,value` rows.
pub fn write_series_csv<W: std::io::Write>(writer: W, rows: &[(String, NaiveDate, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series_id", "timestamp", "value"])?;
    for (id, date, v) in rows {
        w.write_record([id.as_str(), &date.to_string(), &v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PanelDataset> {
        parse_csv(text.as_bytes(), &CsvSchema::default(), Frequency::Monthly, 1, None)
    }

    #[test]
    fn two_series_lengths() {
        let mut text = String::from("series_id,timestamp,value\n");
        for k in 0..5 {
            text.push_str(&format!("b,2020-0{}-01,{k}\n", k + 1));
        }
        for k in 0..3 {
            text.push_str(&format!("a,2020-0{}-01,{k}\n", 3 - k));
        }
        let ds = parse(&text).unwrap();
        assert_eq!(ds.series_ids(), vec!["a", "b"]);
        assert_eq!(ds.series[0].len(), 3);
        assert_eq!(ds.series[1].len(), 5);
        // sorted by timestamp within the series
        assert_eq!(ds.series[0].values, vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(parse(""), Err(Error::Parse { .. })));
        assert!(matches!(parse("series_id,timestamp,value\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn malformed_timestamp_names_line() {
        let err = parse("series_id,timestamp,value\na,2020-01-01,1\na,01/02/2020,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = parse("series_id,timestamp,value\na,2020-01-01,1\na,2020-01-01,2\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { .. }));
    }

    #[test]
    fn non_numeric_and_missing_targets_are_type_errors() {
        assert!(matches!(
            parse("series_id,timestamp,value\na,2020-01-01,abc\n"),
            Err(Error::Type { line: 2, .. })
        ));
        assert!(matches!(parse("series_id,timestamp,value\na,2020-01-01,\n"), Err(Error::Type { .. })));
    }

    #[test]
    fn frozen_codes_map_unseen_labels_to_reserved_code() {
        let mut schema = CsvSchema::default();
        schema.columns.insert("region".into(), ColumnKind::Categorical);
        let text = "series_id,timestamp,value,region\na,2020-01-01,1,north\nb,2020-01-01,1,south\n";
        let ds = parse_csv(text.as_bytes(), &schema, Frequency::Monthly, 1, None).unwrap();
        assert_eq!(ds.series[1].categoricals[0], vec![1]);
        let text = "series_id,timestamp,value,region\nc,2020-01-01,1,west\n";
        let ds2 = parse_csv(text.as_bytes(), &schema, Frequency::Monthly, 1, Some(&ds.codes)).unwrap();
        assert_eq!(ds2.series[0].categoricals[0], vec![2]);
        assert_eq!(ds2.codes.series_code(&ds2, 0), 2);
        assert_eq!(ds2.codes.series_cardinality(&ds2), 3);
        let text = "series_id,timestamp,value,region\nb,2020-01-01,1,north\n";
        let ds3 = parse_csv(text.as_bytes(), &schema, Frequency::Monthly, 1, Some(&ds.codes)).unwrap();
        assert_eq!(ds3.codes.series_code(&ds3, 0), 1);
    }
}
