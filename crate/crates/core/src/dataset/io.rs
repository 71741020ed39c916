use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TabularDataset;
use crate::{Error, Result};

/// Ordinal encoding of categorical columns: column name -> (category -> number).
pub type Encoding = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvOptions {
    pub label_col: String,
    pub group_col: String,
    #[serde(default = "default_na")]
    pub na_token: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub encoding: Encoding,
}

fn default_na() -> String {
    "NA".into()
}

fn default_delimiter() -> char {
    ','
}

impl CsvOptions {
    pub fn new(label_col: impl Into<String>, group_col: impl Into<String>) -> Self {
        Self {
            label_col: label_col.into(),
            group_col: group_col.into(),
            na_token: default_na(),
            delimiter: default_delimiter(),
            encoding: Encoding::new(),
        }
    }

    pub(crate) fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::invalid(format!("delimiter {:?} is not ASCII", self.delimiter)))
    }

    fn is_na(&self, cell: &str) -> bool {
        let cell = cell.trim();
        cell.is_empty() || cell == self.na_token
    }

    fn decode(&self, column: &str, cell: &str) -> Result<f64> {
        let cell = cell.trim();
        match self.encoding.get(column) {
            Some(map) => map.get(cell).copied().ok_or_else(|| {
                Error::Parse(format!("column `{column}`: no encoding for category {cell:?}"))
            }),
            None => cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("column `{column}`: cannot parse {cell:?}"))),
        }
    }
}

/// A CSV file kept as strings, so that rewriting it preserves untouched cells verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: impl AsRef<Path>, delimiter: u8) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .from_reader(file);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            records.push(rec.iter().map(str::to_owned).collect());
        }
        Ok(Self { headers, records })
    }

    pub fn write(&self, path: impl AsRef<Path>, delimiter: u8) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut wtr = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(file);
        wtr.write_record(&self.headers)?;
        for rec in &self.records {
            wtr.write_record(rec)?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    }
}

/// Result of [`load_csv`]: the dataset plus what was dropped on the way.
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: TabularDataset,
    /// Rows dropped because the label or group cell was missing.
    pub dropped_rows: usize,
    /// For every dataset row, the index of the source record it came from.
    pub kept_rows: Vec<usize>,
    /// For every dataset feature, its column in the source table.
    pub feature_columns: Vec<usize>,
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<CsvLoad> {
    let table = RawTable::read(path, opts.delimiter_byte()?)?;
    dataset_from_table(&table, opts)
}

pub(crate) fn dataset_from_table(table: &RawTable, opts: &CsvOptions) -> Result<CsvLoad> {
    let label_idx = table.column(&opts.label_col)?;
    let group_idx = table.column(&opts.group_col)?;
    let feature_columns: Vec<usize> = (0..table.headers.len())
        .filter(|&c| c != label_idx && c != group_idx)
        .collect();
    let feature_names: Vec<String> = feature_columns
        .iter()
        .map(|&c| table.headers[c].clone())
        .collect();

    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut kept_rows = Vec::new();
    let mut seen_labels = BTreeSet::new();
    let mut seen_groups = BTreeSet::new();
    let mut dropped = 0;

    for (r, rec) in table.records.iter().enumerate() {
        if rec.len() != table.headers.len() {
            return Err(Error::Parse(format!(
                "record {r} has {} fields, header has {}",
                rec.len(),
                table.headers.len()
            )));
        }
        if opts.is_na(&rec[label_idx]) || opts.is_na(&rec[group_idx]) {
            dropped += 1;
            continue;
        }
        let y = opts.decode(&opts.label_col, &rec[label_idx])?;
        let s = opts.decode(&opts.group_col, &rec[group_idx])?;
        seen_labels.insert(y.to_bits());
        seen_groups.insert(s.to_bits());
        labels.push(binary_code(y, &opts.label_col, "label", seen_labels.len())?);
        groups.push(binary_code(s, &opts.group_col, "group", seen_groups.len())?);
        for &c in &feature_columns {
            let cell = &rec[c];
            if opts.is_na(cell) {
                values.push(f64::NAN);
                mask.push(true);
            } else {
                values.push(opts.decode(&table.headers[c], cell)?);
                mask.push(false);
            }
        }
        kept_rows.push(r);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with a missing label or group");
    }
    let dataset = TabularDataset::new(values, mask, labels, groups, feature_names)?;
    Ok(CsvLoad {
        dataset,
        dropped_rows: dropped,
        kept_rows,
        feature_columns,
    })
}

fn binary_code(v: f64, column: &str, role: &str, distinct: usize) -> Result<u8> {
    if distinct > 2 {
        return Err(Error::NonBinary {
            column: column.into(),
            detail: format!("non-binary {role}: more than two distinct values"),
        });
    }
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::NonBinary {
            column: column.into(),
            detail: format!("non-binary {role}: value {v} is not 0 or 1"),
        })
    }
}

/// Writes `ds` as CSV: feature columns, then label and group, masked cells as `na_token`.
pub fn write_csv(
    ds: &TabularDataset,
    path: impl AsRef<Path>,
    label_col: &str,
    group_col: &str,
    na_token: &str,
) -> Result<()> {
    let mut headers = ds.feature_names().to_vec();
    headers.push(label_col.into());
    headers.push(group_col.into());
    let records = (0..ds.n_rows())
        .map(|i| {
            let mut rec: Vec<String> = (0..ds.n_features())
                .map(|j| match ds.get(i, j) {
                    Some(v) => v.to_string(),
                    None => na_token.to_string(),
                })
                .collect();
            rec.push(ds.labels()[i].to_string());
            rec.push(ds.groups()[i].to_string());
            rec
        })
        .collect();
    RawTable { headers, records }.write(path, b',')
}

/// Reads only the named feature columns (for prediction); labels and groups are zero.
pub fn load_feature_matrix(
    path: impl AsRef<Path>,
    opts: &CsvOptions,
    feature_names: &[String],
) -> Result<TabularDataset> {
    let table = RawTable::read(path, opts.delimiter_byte()?)?;
    let cols = feature_names
        .iter()
        .map(|f| table.column(f))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(table.records.len() * cols.len());
    let mut mask = Vec::with_capacity(values.capacity());
    for rec in &table.records {
        for (&c, name) in cols.iter().zip(feature_names) {
            let cell = rec
                .get(c)
                .ok_or_else(|| Error::Parse("short record".into()))?;
            if opts.is_na(cell) {
                values.push(f64::NAN);
                mask.push(true);
            } else {
                values.push(opts.decode(name, cell)?);
                mask.push(false);
            }
        }
    }
    let n = table.records.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    TabularDataset::new(values, mask, vec![0; n], vec![0; n], feature_names.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn na_feature_cell_is_masked() {
        let f = write_tmp("a,b,y,s\n1,2,0,0\n3,NA,1,1\n5,6,1,0\n7,8,0,1\n9,10,1,1\n");
        let load = load_csv(f.path(), &CsvOptions::new("y", "s")).unwrap();
        let ds = &load.dataset;
        assert_eq!(ds.n_rows(), 5);
        assert_eq!(ds.feature_names(), ["a", "b"]);
        assert!(ds.is_missing(1, 1));
        assert_eq!(ds.count_missing(), 1);
        assert_eq!(load.dropped_rows, 0);
    }

    #[test]
    fn missing_group_row_is_dropped() {
        let f = write_tmp("a,y,s\n1,0,0\n2,1,NA\n3,1,1\n4,0,1\n5,1,0\n");
        let load = load_csv(f.path(), &CsvOptions::new("y", "s")).unwrap();
        assert_eq!(load.dataset.n_rows(), 4);
        assert_eq!(load.dropped_rows, 1);
        assert_eq!(load.kept_rows, vec![0, 2, 3, 4]);
    }

    #[test]
    fn three_valued_label_is_rejected() {
        let f = write_tmp("a,y,s\n1,0,0\n2,1,1\n3,2,1\n");
        let err = load_csv(f.path(), &CsvOptions::new("y", "s")).unwrap_err();
        assert!(err.to_string().contains("non-binary label"), "{err}");
    }

    #[test]
    fn categorical_encoding_and_delimiter() {
        let f = write_tmp("color;y;s\nred;yes;m\nblue;no;f\n");
        let mut opts = CsvOptions::new("y", "s");
        opts.delimiter = ';';
        opts.encoding.insert(
            "color".into(),
            [("red".to_string(), 0.0), ("blue".to_string(), 1.0)].into(),
        );
        opts.encoding.insert(
            "y".into(),
            [("no".to_string(), 0.0), ("yes".to_string(), 1.0)].into(),
        );
        opts.encoding.insert(
            "s".into(),
            [("f".to_string(), 0.0), ("m".to_string(), 1.0)].into(),
        );
        let ds = load_csv(f.path(), &opts).unwrap().dataset;
        assert_eq!(ds.labels(), [1, 0]);
        assert_eq!(ds.groups(), [1, 0]);
        assert_eq!(ds.get(1, 0), Some(1.0));
    }

    #[test]
    fn unparseable_cell_and_empty_file() {
        let f = write_tmp("a,y,s\nabc,0,0\n");
        assert!(matches!(
            load_csv(f.path(), &CsvOptions::new("y", "s")),
            Err(Error::Parse(_))
        ));
        let f = write_tmp("a,y,s\n1,NA,0\n");
        assert!(matches!(
            load_csv(f.path(), &CsvOptions::new("y", "s")),
            Err(Error::EmptyDataset)
        ));
        let f = write_tmp("a,y\n1,0\n");
        assert!(matches!(
            load_csv(f.path(), &CsvOptions::new("y", "s")),
            Err(Error::MissingColumn(_))
        ));
    }
}
