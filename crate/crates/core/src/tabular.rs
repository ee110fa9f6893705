//! Immutable columnar datasets.
//!
//! A [`Dataset`] is a list of typed columns of equal length. Every cell is
//! either a value or missing; a missing cell carries no value regardless of the
//! column type. Datasets are never mutated in place: every transformation
//! produces a new dataset with a freshly computed content fingerprint.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Minimum distinct-value budget for a categorical column.
pub const CATEGORICAL_MIN_CUTOFF: usize = 20;
/// Fraction of rows that a categorical column may have as distinct values.
pub const CATEGORICAL_ROW_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Categorical,
    Numerical,
    Text,
}

impl ColumnType {
    fn tag(self) -> u8 {
        match self {
            ColumnType::Categorical => b'c',
            ColumnType::Numerical => b'n',
            ColumnType::Text => b't',
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnType::Categorical => "categorical",
            ColumnType::Numerical => "numerical",
            ColumnType::Text => "text",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numerical(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
    Text(Vec<Option<String>>),
}

impl ColumnData {
    pub fn column_type(&self) -> ColumnType {
        match self {
            ColumnData::Numerical(_) => ColumnType::Numerical,
            ColumnData::Categorical(_) => ColumnType::Categorical,
            ColumnData::Text(_) => ColumnType::Text,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numerical(v) => v.len(),
            ColumnData::Categorical(v) | ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Numerical(v) => v[row].is_none(),
            ColumnData::Categorical(v) | ColumnData::Text(v) => v[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    pub fn as_numbers(&self) -> Option<&[Option<f64>]> {
        match self {
            ColumnData::Numerical(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_strings(&self) -> Option<&[Option<String>]> {
        match self {
            ColumnData::Categorical(v) | ColumnData::Text(v) => Some(v),
            ColumnData::Numerical(_) => None,
        }
    }

    /// Cell rendered as text, `None` when missing.
    pub fn cell_string(&self, row: usize) -> Option<String> {
        match self {
            ColumnData::Numerical(v) => v[row].map(format_number),
            ColumnData::Categorical(v) | ColumnData::Text(v) => v[row].clone(),
        }
    }

    /// Rebuild a column of the same type from the given rows (repeats allowed).
    pub fn take_rows(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numerical(v) => ColumnData::Numerical(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect()),
            ColumnData::Text(v) => ColumnData::Text(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }

    fn cells_equal(&self, other: &ColumnData, row: usize) -> bool {
        match (self, other) {
            (ColumnData::Numerical(a), ColumnData::Numerical(b)) => {
                a[row].map(f64::to_bits) == b[row].map(f64::to_bits)
            }
            (ColumnData::Categorical(a), ColumnData::Categorical(b)) | (ColumnData::Text(a), ColumnData::Text(b)) => {
                a[row] == b[row]
            }
            _ => false,
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn new(name: impl Into<String>, data: ColumnData) -> Self {
        Column {
            name: name.into(),
            data,
        }
    }

    pub fn numerical(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column::new(name, ColumnData::Numerical(values))
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, values: Vec<Option<S>>) -> Self {
        Column::new(
            name,
            ColumnData::Categorical(values.into_iter().map(|v| v.map(Into::into)).collect()),
        )
    }

    pub fn text<S: Into<String>>(name: impl Into<String>, values: Vec<Option<S>>) -> Self {
        Column::new(
            name,
            ColumnData::Text(values.into_iter().map(|v| v.map(Into::into)).collect()),
        )
    }

    pub fn column_type(&self) -> ColumnType {
        self.data.column_type()
    }
}

/// Immutable table with typed columns and explicit missingness.
#[derive(Clone, Debug)]
pub struct Dataset {
    columns: Vec<Column>,
    index: HashMap<String, usize>,
    row_count: usize,
    fingerprint: String,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint && self.columns == other.columns
    }
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let row_count = columns.first().map_or(0, |c| c.data.len());
        Dataset::with_row_count(columns, row_count)
    }

    /// Like [`Dataset::new`] but states the row count explicitly, which is
    /// only observable for a dataset with no columns.
    pub fn with_row_count(columns: Vec<Column>, row_count: usize) -> Result<Self> {
        let mut index = HashMap::with_capacity(columns.len());
        for (i, col) in columns.iter().enumerate() {
            if col.name.is_empty() {
                return Err(Error::Schema(format!("column {i} has an empty name")));
            }
            if index.insert(col.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate attribute `{}`", col.name)));
            }
            if col.data.len() != row_count {
                return Err(Error::Schema(format!(
                    "column `{}` has {} entries, expected {row_count}",
                    col.name,
                    col.data.len()
                )));
            }
            if let ColumnData::Numerical(v) = &col.data {
                if let Some(row) = v.iter().position(|x| x.is_some_and(|x| !x.is_finite())) {
                    return Err(Error::Type(format!(
                        "column `{}` row {row} holds a non-finite number",
                        col.name
                    )));
                }
            }
        }
        let fingerprint = compute_fingerprint(&columns, row_count);
        Ok(Dataset {
            columns,
            index,
            row_count,
            fingerprint,
        })
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn schema(&self) -> Vec<(String, ColumnType)> {
        self.columns.iter().map(|c| (c.name.clone(), c.column_type())).collect()
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.column_index(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::Schema(format!("unknown attribute `{name}`")))
    }

    pub fn column_type(&self, name: &str) -> Result<ColumnType> {
        Ok(self.column(name)?.column_type())
    }

    pub fn numbers(&self, name: &str) -> Result<&[Option<f64>]> {
        let col = self.column(name)?;
        col.data.as_numbers().ok_or_else(|| {
            Error::Type(format!(
                "attribute `{name}` is {}, expected numerical",
                col.column_type()
            ))
        })
    }

    pub fn strings(&self, name: &str) -> Result<&[Option<String>]> {
        let col = self.column(name)?;
        col.data
            .as_strings()
            .ok_or_else(|| Error::Type(format!("attribute `{name}` is numerical, expected a string type")))
    }

    /// New dataset with one column's data replaced. The column type may not change.
    pub fn with_column(&self, name: &str, data: ColumnData) -> Result<Dataset> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::Schema(format!("unknown attribute `{name}`")))?;
        if self.columns[idx].column_type() != data.column_type() {
            return Err(Error::Type(format!(
                "cannot replace {} column `{name}` with {} data",
                self.columns[idx].column_type(),
                data.column_type()
            )));
        }
        let mut columns = self.columns.clone();
        columns[idx].data = data;
        Dataset::with_row_count(columns, self.row_count)
    }

    /// New dataset made of the given rows, in order; repeated indices duplicate rows.
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column::new(c.name.clone(), c.data.take_rows(rows)))
            .collect();
        Dataset::with_row_count(columns, rows.len()).expect("row selection preserves schema")
    }

    /// Number of rows whose cells differ between two datasets of equal shape.
    pub fn changed_rows(&self, other: &Dataset) -> Result<usize> {
        if self.schema() != other.schema() || self.row_count != other.row_count {
            return Err(Error::Schema("datasets differ in shape".into()));
        }
        Ok((0..self.row_count)
            .filter(|&r| {
                self.columns
                    .iter()
                    .zip(&other.columns)
                    .any(|(a, b)| !a.data.cells_equal(&b.data, r))
            })
            .count())
    }
}

fn compute_fingerprint(columns: &[Column], row_count: usize) -> String {
    let mut h = Sha256::new();
    h.update((row_count as u64).to_le_bytes());
    h.update((columns.len() as u64).to_le_bytes());
    for col in columns {
        h.update((col.name.len() as u64).to_le_bytes());
        h.update(col.name.as_bytes());
        h.update([col.column_type().tag()]);
        match &col.data {
            ColumnData::Numerical(v) => {
                for cell in v {
                    match cell {
                        None => h.update([0u8]),
                        Some(x) => {
                            h.update([1u8]);
                            // -0.0 and 0.0 are the same value
                            let x = if *x == 0.0 { 0.0f64 } else { *x };
                            h.update(x.to_bits().to_le_bytes());
                        }
                    }
                }
            }
            ColumnData::Categorical(v) | ColumnData::Text(v) => {
                for cell in v {
                    match cell {
                        None => h.update([0u8]),
                        Some(s) => {
                            h.update([1u8]);
                            h.update((s.len() as u64).to_le_bytes());
                            h.update(s.as_bytes());
                        }
                    }
                }
            }
        }
    }
    hex::encode(h.finalize())
}

// ---------------------------------------------------------------------------
// Predicates

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constant {
    Number(f64),
    Text(String),
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Number(x) => write!(f, "{x}"),
            Constant::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub attribute: String,
    pub comparator: Comparator,
    pub value: Constant,
}

impl Term {
    pub fn eq(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Term {
            attribute: attribute.into(),
            comparator: Comparator::Eq,
            value: Constant::Text(value.into()),
        }
    }

    pub fn num(attribute: impl Into<String>, comparator: Comparator, value: f64) -> Self {
        Term {
            attribute: attribute.into(),
            comparator,
            value: Constant::Number(value),
        }
    }
}

/// Conjunction of at most two comparison terms. An empty conjunction holds on every row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub terms: Vec<Term>,
}

pub const MAX_PREDICATE_TERMS: usize = 2;

impl Predicate {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        if terms.len() > MAX_PREDICATE_TERMS {
            return Err(Error::Validation(format!(
                "predicate has {} terms, at most {MAX_PREDICATE_TERMS} allowed",
                terms.len()
            )));
        }
        Ok(Predicate { terms })
    }

    pub fn attributes(&self) -> Vec<&str> {
        let mut attrs: Vec<&str> = self.terms.iter().map(|t| t.attribute.as_str()).collect();
        attrs.sort_unstable();
        attrs.dedup();
        attrs
    }

    pub fn validate(&self, d: &Dataset) -> Result<()> {
        if self.terms.len() > MAX_PREDICATE_TERMS {
            return Err(Error::Validation("predicate has too many terms".into()));
        }
        for t in &self.terms {
            let ty = d.column_type(&t.attribute)?;
            let ok = match (ty, t.comparator, &t.value) {
                (ColumnType::Numerical, _, Constant::Number(x)) => x.is_finite(),
                (ColumnType::Categorical | ColumnType::Text, Comparator::Eq, Constant::Text(_)) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::Type(format!(
                    "term on `{}` is not compatible with its {ty} column",
                    t.attribute
                )));
            }
        }
        Ok(())
    }

    /// Per-row truth values; a missing value in a tested attribute never satisfies.
    pub fn mask(&self, d: &Dataset) -> Result<Vec<bool>> {
        self.validate(d)?;
        let mut mask = vec![true; d.row_count()];
        for t in &self.terms {
            let col = &d.column(&t.attribute)?.data;
            match (col, &t.value) {
                (ColumnData::Numerical(v), Constant::Number(c)) => {
                    for (m, x) in mask.iter_mut().zip(v) {
                        *m &= match x {
                            None => false,
                            Some(x) => match t.comparator {
                                Comparator::Eq => x == c,
                                Comparator::Le => x <= c,
                                Comparator::Ge => x >= c,
                            },
                        };
                    }
                }
                (ColumnData::Categorical(v) | ColumnData::Text(v), Constant::Text(c)) => {
                    for (m, x) in mask.iter_mut().zip(v) {
                        *m &= x.as_deref() == Some(c.as_str());
                    }
                }
                _ => unreachable!("validated above"),
            }
        }
        Ok(mask)
    }

    pub fn fraction(&self, d: &Dataset) -> Result<f64> {
        if d.row_count() == 0 {
            return Err(Error::Degenerate("selectivity of an empty dataset".into()));
        }
        let hits = self.mask(d)?.iter().filter(|&&m| m).count();
        Ok(hits as f64 / d.row_count() as f64)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("true");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∧ ")?;
            }
            let op = match t.comparator {
                Comparator::Eq => "=",
                Comparator::Le => "≤",
                Comparator::Ge => "≥",
            };
            write!(f, "{} {op} {}", t.attribute, t.value)?;
        }
        Ok(())
    }
}

/// Indices of rows satisfying every term of `p`.
pub fn select_where(d: &Dataset, p: &Predicate) -> Result<Vec<usize>> {
    Ok(p.mask(d)?
        .into_iter()
        .enumerate()
        .filter_map(|(i, m)| m.then_some(i))
        .collect())
}

// ---------------------------------------------------------------------------
// Column statistics

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnStats {
    pub attribute: String,
    pub column_type: ColumnType,
    pub missing_fraction: f64,
    /// Distinct non-missing values with counts, most frequent first.
    pub distinct: Vec<(String, usize)>,
    numeric: Option<NumericSummary>,
}

impl ColumnStats {
    pub fn numeric(&self) -> Result<&NumericSummary> {
        match (&self.numeric, self.column_type) {
            (Some(s), _) => Ok(s),
            (None, ColumnType::Numerical) => Err(Error::Degenerate(format!(
                "`{}` has no non-missing values",
                self.attribute
            ))),
            (None, ty) => Err(Error::Type(format!(
                "numerical statistics requested on {ty} attribute `{}`",
                self.attribute
            ))),
        }
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.numeric()?.mean)
    }

    pub fn stddev(&self) -> Result<f64> {
        Ok(self.numeric()?.stddev)
    }
}

/// Mean and population standard deviation of the present values.
pub fn mean_and_stddev(values: &[Option<f64>]) -> Option<(f64, f64)> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return None;
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn column_stats(d: &Dataset, attribute: &str) -> Result<ColumnStats> {
    let col = d.column(attribute)?;
    let n = d.row_count();
    let missing = col.data.missing_count();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for r in 0..n {
        if let Some(s) = col.data.cell_string(r) {
            *counts.entry(s).or_default() += 1;
        }
    }
    let mut distinct: Vec<(String, usize)> = counts.into_iter().collect();
    distinct.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let numeric = match &col.data {
        ColumnData::Numerical(v) => mean_and_stddev(v).map(|(mean, stddev)| {
            let (min, max) = v
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x), hi.max(x))
                });
            NumericSummary { mean, stddev, min, max }
        }),
        _ => None,
    };
    Ok(ColumnStats {
        attribute: attribute.to_string(),
        column_type: col.column_type(),
        missing_fraction: if n == 0 { 0.0 } else { missing as f64 / n as f64 },
        distinct,
        numeric,
    })
}

// ---------------------------------------------------------------------------
// CSV

#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// Literal cell contents treated as missing, in addition to the empty cell.
    pub missing_tokens: Vec<String>,
    /// Column types that bypass inference.
    pub column_types: BTreeMap<String, ColumnType>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            missing_tokens: vec!["NULL".into(), "null".into(), "NA".into()],
            column_types: BTreeMap::new(),
        }
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Numerical iff every present cell parses as a finite real; otherwise
/// Categorical iff the distinct count fits the categorical cutoff; otherwise Text.
pub fn infer_types(raw: &[Vec<Option<String>>]) -> Vec<ColumnType> {
    raw.iter().map(|col| infer_type(col)).collect()
}

pub fn infer_type(col: &[Option<String>]) -> ColumnType {
    if col.iter().flatten().all(|s| parse_finite(s).is_some()) {
        return ColumnType::Numerical;
    }
    let distinct: HashSet<&str> = col.iter().flatten().map(String::as_str).collect();
    let cutoff = CATEGORICAL_MIN_CUTOFF.max((CATEGORICAL_ROW_FRACTION * col.len() as f64) as usize);
    if distinct.len() <= cutoff {
        ColumnType::Categorical
    } else {
        ColumnType::Text
    }
}

fn build_column(name: String, ty: ColumnType, raw: Vec<Option<String>>) -> Result<Column> {
    let data = match ty {
        ColumnType::Numerical => {
            let mut values = Vec::with_capacity(raw.len());
            for (row, cell) in raw.into_iter().enumerate() {
                values.push(match cell {
                    None => None,
                    Some(s) => Some(parse_finite(&s).ok_or_else(|| Error::Parse {
                        row,
                        message: format!("`{s}` in numerical column `{name}` is not a finite number"),
                    })?),
                });
            }
            ColumnData::Numerical(values)
        }
        ColumnType::Categorical => ColumnData::Categorical(raw),
        ColumnType::Text => ColumnData::Text(raw),
    };
    Ok(Column::new(name, data))
}

struct RawTable {
    names: Vec<String>,
    cells: Vec<Vec<Option<String>>>,
}

fn read_raw<R: Read>(reader: R, opts: &CsvOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => {
            return Err(Error::Parse {
                row: 0,
                message: "missing header row".into(),
            })
        }
        Some(h) => h.map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?,
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    let mut seen = HashSet::new();
    for n in &names {
        if n.is_empty() {
            return Err(Error::Schema("empty attribute name in header".into()));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::Schema(format!("duplicate header `{n}`")));
        }
    }

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); names.len()];
    for (row, rec) in records.enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != names.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        for (col, cell) in cells.iter_mut().zip(rec.iter()) {
            let missing = cell.is_empty() || opts.missing_tokens.iter().any(|t| t == cell);
            col.push((!missing).then(|| cell.to_string()));
        }
    }
    Ok(RawTable { names, cells })
}

fn build_dataset(raw: RawTable, types: &[ColumnType]) -> Result<Dataset> {
    let row_count = raw.cells.first().map_or(0, Vec::len);
    let mut columns = Vec::with_capacity(raw.names.len());
    for ((name, col), &ty) in raw.names.into_iter().zip(raw.cells).zip(types) {
        columns.push(build_column(name, ty, col)?);
    }
    Dataset::with_row_count(columns, row_count)
}

pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let raw = read_raw(reader, opts)?;
    let types: Vec<ColumnType> = raw
        .names
        .iter()
        .zip(&raw.cells)
        .map(|(name, col)| opts.column_types.get(name).copied().unwrap_or_else(|| infer_type(col)))
        .collect();
    build_dataset(raw, &types)
}

/// Read two CSVs with the same header, inferring each column's type over
/// the cells of both so that the schemas agree.
pub fn read_csv_pair<R: Read, S: Read>(a: R, b: S, opts: &CsvOptions) -> Result<(Dataset, Dataset)> {
    let ra = read_raw(a, opts)?;
    let rb = read_raw(b, opts)?;
    if ra.names != rb.names {
        return Err(Error::Schema(format!(
            "headers differ: [{}] vs [{}]",
            ra.names.join(", "),
            rb.names.join(", ")
        )));
    }
    let types: Vec<ColumnType> = ra
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            opts.column_types.get(name).copied().unwrap_or_else(|| {
                let joint: Vec<Option<String>> = ra.cells[i].iter().chain(&rb.cells[i]).cloned().collect();
                infer_type(&joint)
            })
        })
        .collect();
    Ok((build_dataset(ra, &types)?, build_dataset(rb, &types)?))
}

pub fn load_csv_pair(a: impl AsRef<Path>, b: impl AsRef<Path>, opts: &CsvOptions) -> Result<(Dataset, Dataset)> {
    let fa = std::fs::File::open(a.as_ref())?;
    let fb = std::fs::File::open(b.as_ref())?;
    read_csv_pair(std::io::BufReader::new(fa), std::io::BufReader::new(fb), opts)
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(std::io::BufReader::new(file), opts)
}

/// Writes RFC-4180 CSV; missing cells become empty fields.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(d.attribute_names()).map_err(to_io)?;
    for r in 0..d.row_count() {
        let row: Vec<String> = d
            .columns()
            .iter()
            .map(|c| c.data.cell_string(r).unwrap_or_default())
            .collect();
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(d, std::io::BufWriter::new(file))
}

pub fn to_csv_string(d: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(d, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(std::io::Error::other(e)))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const PEOPLE_FAIL: &str = "\
name,gender,age,race,zip_code,phone,high_expenditure
Shanice Johnson,F,45,A,01004,2088556597,no
DeShawn Bad,M,40,A,01004,2085374523,no
Malik Ayer,M,60,A,01005,2766465009,no
Dustin Jenner,M,22,W,01009,7874891021,yes
Julietta Brown,F,41,W,01009,,yes
Molly Beasley,F,32,W,,7872899033,no
Jake Bloom,M,25,W,01101,4047747803,yes
Luke Stonewald,M,35,W,01101,4042127741,yes
Scott Nossenson,M,25,W,01101,,yes
Gabe Erwin,M,20,W,,4048421581,yes
";

    pub const PEOPLE_PASS: &str = "\
name,gender,age,race,zip_code,phone,high_expenditure
Darin Brust,M,25,W,01004,2088556597,no
Rosalie Bad,F,22,W,01005,,no
Kristine Hilyard,F,50,W,01004,2766465009,yes
Chloe Ayer,F,22,A,,7874891021,yes
Julietta Mchugh,F,51,W,01009,9042899033,yes
Doria Ely,F,32,A,01101,,yes
Kristan Whidden,F,25,W,01101,4047747803,no
Rene Strelow,M,35,W,01101,6162127741,yes
Arial Brent,M,45,W,01102,4089065769,yes
";

    /// Zip codes and phone numbers are identifiers, not quantities.
    pub fn people_options() -> CsvOptions {
        let mut opts = CsvOptions::default();
        opts.column_types.insert("zip_code".into(), ColumnType::Categorical);
        opts.column_types.insert("phone".into(), ColumnType::Text);
        opts.column_types.insert("name".into(), ColumnType::Text);
        opts
    }

    pub fn people_fail() -> Dataset {
        read_csv(PEOPLE_FAIL.as_bytes(), &people_options()).unwrap()
    }

    pub fn people_pass() -> Dataset {
        read_csv(PEOPLE_PASS.as_bytes(), &people_options()).unwrap()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn loads_people_fail() {
        let d = people_fail();
        assert_eq!(d.row_count(), 10);
        assert_eq!(d.column("phone").unwrap().data.missing_count(), 2);
        assert_eq!(d.column_type("gender").unwrap(), ColumnType::Categorical);
        assert_eq!(d.column_type("age").unwrap(), ColumnType::Numerical);
    }

    #[test]
    fn header_only_file_has_no_rows() {
        let d = read_csv("a,b\n".as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(d.row_count(), 0);
        assert_eq!(d.columns().len(), 2);
    }

    #[test]
    fn mixed_column_is_text_or_categorical_not_numerical() {
        let d = read_csv("x\n1.5\n2\nx\n".as_bytes(), &CsvOptions::default()).unwrap();
        assert_ne!(d.column_type("x").unwrap(), ColumnType::Numerical);
        // three distinct values are well under the categorical cutoff
        assert_eq!(d.column_type("x").unwrap(), ColumnType::Categorical);
    }

    #[test]
    fn type_inference_rule() {
        let col = |v: &[&str]| v.iter().map(|s| Some(s.to_string())).collect::<Vec<_>>();
        assert_eq!(infer_type(&col(&["20", "60", "45"])), ColumnType::Numerical);
        let genders: Vec<&str> = ["F", "M"].iter().cycle().take(10).copied().collect();
        assert_eq!(infer_type(&col(&genders)), ColumnType::Categorical);
        let free: Vec<Option<String>> = (0..1000).map(|i| Some(format!("review {i}"))).collect();
        assert_eq!(infer_type(&free), ColumnType::Text);
        // 50 distinct over 1000 rows sits exactly on the 5% cutoff
        let fifty: Vec<Option<String>> = (0..1000).map(|i| Some(format!("v{}", i % 50))).collect();
        assert_eq!(infer_type(&fifty), ColumnType::Categorical);
        let nan = col(&["1", "NaN"]);
        assert_ne!(infer_type(&nan), ColumnType::Numerical);
    }

    #[test]
    fn wrong_arity_reports_row() {
        let err = read_csv("a,b\n1,2\n3\n".as_bytes(), &CsvOptions::default()).unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_header_is_schema_error() {
        let err = read_csv("a,a\n1,2\n".as_bytes(), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn missing_tokens() {
        let d = read_csv(
            "a,b\n1,x\nNA,x\n,x\nnull,x\nNULL,x\n".as_bytes(),
            &CsvOptions::default(),
        )
        .unwrap();
        assert_eq!(d.column("a").unwrap().data.missing_count(), 4);
        let opts = CsvOptions {
            missing_tokens: vec![],
            ..Default::default()
        };
        let d = read_csv("a,b\nx,1\nNA,1\n,1\n".as_bytes(), &opts).unwrap();
        assert_eq!(d.column("a").unwrap().data.missing_count(), 1);
    }

    #[test]
    fn selectivity_examples() {
        let pred = Predicate::new(vec![Term::eq("gender", "F"), Term::eq("high_expenditure", "yes")]).unwrap();
        let fail = people_fail();
        assert_eq!(select_where(&fail, &pred).unwrap(), vec![4]);
        assert!((pred.fraction(&fail).unwrap() - 0.1).abs() < 1e-12);
        let pass = people_pass();
        assert_eq!(select_where(&pass, &pred).unwrap().len(), 4);
        assert!((pred.fraction(&pass).unwrap() - 4.0 / 9.0).abs() < 1e-12);

        let always = Predicate::new(vec![Term::num("age", Comparator::Ge, f64::MIN)]).unwrap();
        assert_eq!(select_where(&fail, &always).unwrap().len(), 10);
    }

    #[test]
    fn predicate_errors() {
        let d = people_fail();
        let unknown = Predicate::new(vec![Term::eq("nope", "x")]).unwrap();
        assert!(matches!(select_where(&d, &unknown), Err(Error::Schema(_))));
        let bad = Predicate::new(vec![Term::num("gender", Comparator::Le, 1.0)]).unwrap();
        assert!(matches!(select_where(&d, &bad), Err(Error::Type(_))));
        assert!(Predicate::new(vec![Term::eq("a", "1"); 3]).is_err());
    }

    #[test]
    fn missing_values_never_satisfy() {
        let d = people_fail();
        let p = Predicate::new(vec![Term::eq("zip_code", "01101")]).unwrap();
        assert_eq!(select_where(&d, &p).unwrap().len(), 3);
        let blank = d.with_column("age", ColumnData::Numerical(vec![None; 10])).unwrap();
        let any_age = Predicate::new(vec![Term::num("age", Comparator::Ge, f64::MIN)]).unwrap();
        assert!(select_where(&blank, &any_age).unwrap().is_empty());
    }

    #[test]
    fn people_statistics() {
        let d = people_fail();
        let age = column_stats(&d, "age").unwrap();
        assert!((age.mean().unwrap() - 34.5).abs() < 1e-12);
        assert!((age.stddev().unwrap() - 11.78).abs() < 0.01);
        let zip = column_stats(&d, "zip_code").unwrap();
        assert!((zip.missing_fraction - 0.2).abs() < 1e-12);
        let gender = column_stats(&d, "gender").unwrap();
        assert_eq!(gender.distinct, vec![("M".to_string(), 7), ("F".to_string(), 3)]);
        assert!(matches!(gender.mean(), Err(Error::Type(_))));
    }

    #[test]
    fn constant_column_has_zero_stddev() {
        let d = Dataset::new(vec![Column::numerical("x", vec![Some(5.0)])]).unwrap();
        let s = column_stats(&d, "x").unwrap();
        assert_eq!(s.mean().unwrap(), 5.0);
        assert_eq!(s.stddev().unwrap(), 0.0);
    }

    #[test]
    fn invariants_enforced() {
        assert!(matches!(
            Dataset::new(vec![
                Column::numerical("a", vec![Some(1.0)]),
                Column::numerical("b", vec![]),
            ]),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            Dataset::new(vec![Column::numerical("", vec![])]),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            Dataset::new(vec![Column::numerical("a", vec![Some(f64::NAN)])]),
            Err(Error::Type(_))
        ));
    }

    #[test]
    fn fingerprint_depends_on_content() {
        let a = people_fail();
        let b = people_fail();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = a.take_rows(&[1, 0, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn csv_round_trip_keeps_fingerprint() {
        let d = people_fail();
        let text = to_csv_string(&d).unwrap();
        let again = read_csv(text.as_bytes(), &people_options()).unwrap();
        assert_eq!(d.fingerprint(), again.fingerprint());
    }
}
