//! CSV ingestion and export of table samples, and atomic file writes.
//!
//! Two encodings are supported. Long form has one record per cell with the
//! header `sample_id,row_level,col_level,value`. Wide form has one record per
//! sample: a `sample_id` column followed by one column per cell named
//! `row_level:col_level`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::{Part, TableSample};
use crate::table::CompositionalTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvFormat {
    #[default]
    Long,
    Wide,
}

impl FromStr for CsvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(CsvFormat::Long),
            "wide" => Ok(CsvFormat::Wide),
            other => Err(Error::Config(format!("unknown CSV format '{other}'"))),
        }
    }
}

/// How to read a CSV file. Level orders default to first appearance.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    pub format: CsvFormat,
    pub row_order: Option<Vec<String>>,
    pub col_order: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn new(format: CsvFormat) -> Self {
        CsvSchema {
            format,
            ..Default::default()
        }
    }
}

/// One cell of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRecord {
    pub sample_id: String,
    pub row_level: String,
    pub col_level: String,
    pub value: f64,
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TableSample> {
    let file = fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<TableSample> {
    let cells = match schema.format {
        CsvFormat::Long => read_long(reader)?,
        CsvFormat::Wide => read_wide(reader)?,
    };
    assemble(cells, schema)
}

/// Raw per-sample cell maps in order of first appearance.
struct RawSample {
    id: String,
    rows: Vec<String>,
    cols: Vec<String>,
    values: HashMap<(String, String), f64>,
}

impl RawSample {
    fn new(id: String) -> Self {
        RawSample {
            id,
            rows: Vec::new(),
            cols: Vec::new(),
            values: HashMap::new(),
        }
    }

    fn insert(&mut self, row: &str, col: &str, raw: &str) -> Result<()> {
        let value: f64 = raw.trim().parse().map_err(|_| {
            Error::InvalidData(format!(
                "sample '{}', cell '{row}:{col}': '{raw}' is not a number",
                self.id
            ))
        })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidComposition(format!(
                "sample '{}', cell '{row}:{col}': value {value} is not positive",
                self.id
            )));
        }
        if !self.rows.iter().any(|r| r == row) {
            self.rows.push(row.to_owned());
        }
        if !self.cols.iter().any(|c| c == col) {
            self.cols.push(col.to_owned());
        }
        if self.values.insert((row.to_owned(), col.to_owned()), value).is_some() {
            return Err(Error::InvalidData(format!(
                "duplicate cell '{row}:{col}' in sample '{}'",
                self.id
            )));
        }
        Ok(())
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::InvalidData(format!("missing column '{name}'")))
}

fn read_long<R: Read>(reader: R) -> Result<Vec<RawSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut samples: Vec<RawSample> = Vec::new();
    if headers.is_empty() {
        return Ok(samples);
    }
    let id_col = column_index(&headers, "sample_id")?;
    let row_col = column_index(&headers, "row_level")?;
    let col_col = column_index(&headers, "col_level")?;
    let val_col = column_index(&headers, "value")?;
    let mut index: HashMap<String, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let id = field(id_col);
        let slot = *index.entry(id.to_owned()).or_insert_with(|| {
            samples.push(RawSample::new(id.to_owned()));
            samples.len() - 1
        });
        samples[slot].insert(field(row_col), field(col_col), field(val_col))?;
    }
    Ok(samples)
}

fn read_wide<R: Read>(reader: R) -> Result<Vec<RawSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut samples: Vec<RawSample> = Vec::new();
    if headers.is_empty() {
        return Ok(samples);
    }
    let id_col = column_index(&headers, "sample_id")?;
    let mut cells = Vec::new();
    let mut seen = HashSet::new();
    for (k, h) in headers.iter().enumerate() {
        if k == id_col {
            continue;
        }
        let (row, col) = h.split_once(':').ok_or_else(|| {
            Error::InvalidData(format!("wide column '{h}' is not of the form row:col"))
        })?;
        if !seen.insert(h.to_owned()) {
            return Err(Error::InvalidData(format!("duplicate column '{h}'")));
        }
        cells.push((k, row.to_owned(), col.to_owned()));
    }
    let mut ids = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").to_owned();
        if !ids.insert(id.clone()) {
            return Err(Error::InvalidData(format!("duplicate sample '{id}'")));
        }
        let mut s = RawSample::new(id);
        for (k, row, col) in &cells {
            match rec.get(*k) {
                Some(v) if !v.is_empty() => s.insert(row, col, v)?,
                _ => {
                    // register the levels so the missing cell is reported
                    if !s.rows.contains(row) {
                        s.rows.push(row.clone());
                    }
                    if !s.cols.contains(col) {
                        s.cols.push(col.clone());
                    }
                }
            }
        }
        samples.push(s);
    }
    Ok(samples)
}

fn same_set(a: &[String], b: &[String]) -> bool {
    a.len() == b.len() && a.iter().all(|x| b.contains(x))
}

fn assemble(raw: Vec<RawSample>, schema: &CsvSchema) -> Result<TableSample> {
    let Some(first) = raw.first() else {
        return Err(Error::IncompleteTable {
            sample_id: "(first sample)".into(),
            cell: "(no data)".into(),
        });
    };
    let rows = schema.row_order.clone().unwrap_or_else(|| first.rows.clone());
    let cols = schema.col_order.clone().unwrap_or_else(|| first.cols.clone());
    let mut tables = Vec::with_capacity(raw.len());
    for s in &raw {
        if !same_set(&s.rows, &rows) {
            return Err(Error::HeterogeneousLevels(format!(
                "sample '{}' has row levels {:?}, expected {:?}",
                s.id, s.rows, rows
            )));
        }
        if !same_set(&s.cols, &cols) {
            return Err(Error::HeterogeneousLevels(format!(
                "sample '{}' has column levels {:?}, expected {:?}",
                s.id, s.cols, cols
            )));
        }
        let mut cells = DMatrix::zeros(rows.len(), cols.len());
        for (c, col) in cols.iter().enumerate() {
            for (r, row) in rows.iter().enumerate() {
                let key = (row.clone(), col.clone());
                cells[(r, c)] = *s.values.get(&key).ok_or_else(|| Error::IncompleteTable {
                    sample_id: s.id.clone(),
                    cell: format!("{row}:{col}"),
                })?;
            }
        }
        let table = CompositionalTable::with_labels(cells, rows.clone(), cols.clone())?
            .with_sample_id(s.id.clone());
        tables.push(table);
    }
    TableSample::new(tables, Part::Whole)
}

/// Long-form CSV, cells in vectorization order within each sample.
pub fn write_long<W: Write>(sample: &TableSample, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sample_id", "row_level", "col_level", "value"])?;
    let ids = sample.sample_ids();
    for (t, id) in sample.tables.iter().zip(&ids) {
        for (c, col) in t.col_labels().iter().enumerate() {
            for (r, row) in t.row_labels().iter().enumerate() {
                let v = t.get(r, c).to_string();
                w.write_record([id.as_str(), row, col, &v])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Wide-form CSV with `row:col` columns in vectorization order.
pub fn write_wide<W: Write>(sample: &TableSample, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sample_id".to_owned()];
    header.extend(sample.cell_labels());
    w.write_record(&header)?;
    for (t, id) in sample.tables.iter().zip(sample.sample_ids()) {
        let mut rec = vec![id];
        rec.extend(t.cells().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("'{}' is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
