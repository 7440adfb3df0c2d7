use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Column, DataError, Dataset};
use crate::graph::NodeKind;

/// Per-column mapping from raw CSV strings to numbers.
///
/// Stored as `{"column": {"raw value": number}}`. A column listed here never
/// falls back to numeric parsing: every value must appear in its map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncodingTable(pub BTreeMap<String, BTreeMap<String, f64>>);

impl EncodingTable {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn insert(&mut self, column: &str, raw: &str, value: f64) {
        self.0
            .entry(column.to_string())
            .or_default()
            .insert(raw.to_string(), value);
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
    /// Column names when the file has no header row.
    pub column_names: Option<Vec<String>>,
    /// Columns to keep (in this order); all columns when `None`.
    pub select: Option<Vec<String>>,
    /// Declared kinds; undeclared columns are binary iff every value is 0 or 1.
    pub kinds: BTreeMap<String, NodeKind>,
    pub encodings: EncodingTable,
    /// `column -> cut`: the column becomes binary, 1 when value >= cut.
    pub binarize: BTreeMap<String, f64>,
    pub trim: bool,
    pub comment: Option<u8>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            delimiter: b',',
            column_names: None,
            select: None,
            kinds: BTreeMap::new(),
            encodings: EncodingTable::default(),
            binarize: BTreeMap::new(),
            trim: true,
            comment: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset, DataError> {
    read_csv(File::open(path)?, options)
}

pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .delimiter(options.delimiter)
        .flexible(true)
        .comment(options.comment)
        .trim(if options.trim {
            csv::Trim::All
        } else {
            csv::Trim::None
        })
        .from_reader(reader);

    let names: Vec<String> = match (&options.column_names, options.has_header) {
        (Some(names), _) => names.clone(),
        (None, true) => rdr.headers()?.iter().map(str::to_string).collect(),
        (None, false) => Vec::new(),
    };
    let selected: Vec<String> = options.select.clone().unwrap_or_else(|| names.clone());
    let positions: Vec<usize> = selected
        .iter()
        .map(|s| {
            names
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| DataError::MissingColumn(s.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(DataError::Ragged {
                line,
                expected: names.len(),
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(selected.len());
        for (name, &pos) in selected.iter().zip(&positions) {
            let raw = &record[pos];
            let mut value = if let Some(map) = options.encodings.0.get(name) {
                *map.get(raw).ok_or_else(|| DataError::UnmappedCategory {
                    line,
                    column: name.clone(),
                    value: raw.to_string(),
                })?
            } else {
                raw.parse::<f64>().map_err(|_| DataError::Parse {
                    line,
                    column: name.clone(),
                    value: raw.to_string(),
                })?
            };
            if let Some(&cut) = options.binarize.get(name) {
                value = if value >= cut { 1.0 } else { 0.0 };
            }
            row.push(value);
        }
        rows.push(row);
    }

    let columns: Vec<Column> = selected
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let kind = if options.binarize.contains_key(name) {
                NodeKind::Binary
            } else if let Some(&k) = options.kinds.get(name) {
                k
            } else if !rows.is_empty() && rows.iter().all(|r: &Vec<f64>| r[c] == 0.0 || r[c] == 1.0) {
                NodeKind::Binary
            } else {
                NodeKind::Continuous
            };
            Column::new(name.clone(), kind)
        })
        .collect();
    Dataset::new(columns, rows)
}

/// Writes a header row and shortest round-trip decimal values.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.names())?;
    let mut buf = Vec::with_capacity(data.n_cols());
    for row in data.rows() {
        buf.clear();
        buf.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_csv(data, File::create(path)?)
}
