//! Typed mixed-type tables and their CSV + JSON-schema on-disk form.
//!
//! A dataset is a CSV file (UTF-8, comma separated, header row) next to a
//! JSON schema sidecar:
//!
//! ```json
//! {"columns": [
//!   {"name": "price", "type": "numeric"},
//!   {"name": "photo", "type": "numeric-vector", "dim": 4096},
//!   {"name": "zip",   "type": "categorical"},
//!   {"name": "city",  "type": "string", "kernel": "edit-rbf", "lengthscale": 3.0}
//! ]}
//! ```
//!
//! Vector cells hold `;`-separated numbers. An empty field is a missing cell.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BkrError, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::scalar::Scalar;

/// Payload of one column; every row is present (missingness lives in the
/// owning [`Dataset`]).
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData<T> {
    /// Row-major `n × dim` block of finite numbers.
    Numeric { dim: usize, values: Vec<T> },
    /// Interned labels; `levels[codes[i]]` is the label of row `i`.
    Categorical { codes: Vec<u32>, levels: Vec<String> },
    Text(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column<T> {
    name: String,
    data: ColumnData<T>,
}

impl<T: Scalar> Column<T> {
    pub fn numeric(name: impl Into<String>, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(BkrError::InvalidArgument("numeric dimension must be positive".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(BkrError::DimensionMismatch {
                expected: dim,
                found: values.len() % dim,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BkrError::NonFinite("numeric column"));
        }
        Ok(Column {
            name: name.into(),
            data: ColumnData::Numeric { dim, values },
        })
    }

    /// A one-dimensional numeric column.
    pub fn scalar(name: impl Into<String>, values: Vec<T>) -> Result<Self> {
        Self::numeric(name, 1, values)
    }

    /// A numeric-vector column from equal-length rows.
    pub fn vectors(name: impl Into<String>, rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(BkrError::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::numeric(name, dim, values)
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, labels: impl IntoIterator<Item = S>) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let mut codes = Vec::new();
        for l in labels {
            let l = l.into();
            let code = match levels.iter().position(|x| *x == l) {
                Some(c) => c,
                None => {
                    levels.push(l);
                    levels.len() - 1
                }
            };
            codes.push(code as u32);
        }
        Column {
            name: name.into(),
            data: ColumnData::Categorical { codes, levels },
        }
    }

    pub fn text(name: impl Into<String>, values: Vec<String>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Text(values),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn data(&self) -> &ColumnData<T> {
        &self.data
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric { dim, values } => values.len() / dim,
            ColumnData::Categorical { codes, .. } => codes.len(),
            ColumnData::Text(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_type(&self) -> ColumnType {
        match &self.data {
            ColumnData::Numeric { dim: 1, .. } => ColumnType::Numeric,
            ColumnData::Numeric { dim, .. } => ColumnType::NumericVector { dim: *dim },
            ColumnData::Categorical { .. } => ColumnType::Categorical,
            ColumnData::Text(_) => ColumnType::String,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self.column_type() {
            ColumnType::Numeric => "numeric",
            ColumnType::NumericVector { .. } => "numeric-vector",
            ColumnType::Categorical => "categorical",
            ColumnType::String => "string",
        }
    }

    /// Row `i` of a numeric column.
    pub fn numeric_row(&self, i: usize) -> Option<&[T]> {
        match &self.data {
            ColumnData::Numeric { dim, values } => Some(&values[i * dim..(i + 1) * dim]),
            _ => None,
        }
    }

    /// Copy of the column restricted to `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let data = match &self.data {
            ColumnData::Numeric { dim, values } => ColumnData::Numeric {
                dim: *dim,
                values: rows
                    .iter()
                    .flat_map(|&r| values[r * dim..(r + 1) * dim].iter().copied())
                    .collect(),
            },
            ColumnData::Categorical { codes, levels } => ColumnData::Categorical {
                codes: rows.iter().map(|&r| codes[r]).collect(),
                levels: levels.clone(),
            },
            ColumnData::Text(s) => ColumnData::Text(rows.iter().map(|&r| s[r].clone()).collect()),
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }

    fn cell_string(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Numeric { dim, values } => values[row * dim..(row + 1) * dim]
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            ColumnData::Categorical { codes, levels } => levels[codes[row] as usize].clone(),
            ColumnData::Text(s) => s[row].clone(),
        }
    }
}

/// Declared type of a column in the schema sidecar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ColumnType {
    Numeric,
    NumericVector { dim: usize },
    Categorical,
    String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(flatten)]
    pub column_type: ColumnType,
    #[serde(default)]
    pub kernel: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscale: Option<f64>,
}

impl ColumnSchema {
    pub fn kernel_spec(&self) -> KernelSpec {
        KernelSpec {
            kind: self.kernel,
            lengthscale: self.lengthscale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn from_json(s: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(s)?;
        for c in &schema.columns {
            if let ColumnType::NumericVector { dim: 0 } = c.column_type {
                return Err(BkrError::Schema(format!("column `{}` has dimension 0", c.name)));
            }
        }
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

/// Ordered columns of equal length, a per-cell missingness mask and the
/// kernel choice for each column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    columns: Vec<Column<T>>,
    missing: Vec<Vec<bool>>,
    kernels: Vec<KernelSpec>,
}

impl<T: Scalar> Dataset<T> {
    /// A complete dataset with automatic kernels.
    pub fn new(columns: Vec<Column<T>>) -> Result<Self> {
        let n = columns.first().map_or(0, Column::len);
        let missing = columns.iter().map(|_| vec![false; n]).collect();
        Self::with_missing(columns, missing)
    }

    pub fn with_missing(columns: Vec<Column<T>>, missing: Vec<Vec<bool>>) -> Result<Self> {
        let n = columns.first().map_or(0, Column::len);
        for c in &columns {
            if c.len() != n {
                return Err(BkrError::SizeMismatch {
                    what: "column",
                    expected: n,
                    found: c.len(),
                });
            }
        }
        if missing.len() != columns.len() || missing.iter().any(|m| m.len() != n) {
            return Err(BkrError::InvalidArgument("missingness mask shape mismatch".into()));
        }
        let kernels = vec![KernelSpec::auto(); columns.len()];
        Ok(Dataset {
            columns,
            missing,
            kernels,
        })
    }

    pub fn with_kernels(mut self, kernels: Vec<KernelSpec>) -> Result<Self> {
        if kernels.len() != self.columns.len() {
            return Err(BkrError::SizeMismatch {
                what: "kernel list",
                expected: self.columns.len(),
                found: kernels.len(),
            });
        }
        self.kernels = kernels;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column<T>] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &Column<T> {
        &self.columns[i]
    }

    pub fn kernel_spec(&self, i: usize) -> KernelSpec {
        self.kernels[i]
    }

    pub fn kernel_specs(&self) -> &[KernelSpec] {
        &self.kernels
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| BkrError::UnknownColumn(name.to_string()))
    }

    pub fn is_missing(&self, col: usize, row: usize) -> bool {
        self.missing[col][row]
    }

    /// First column containing a missing cell, if any.
    pub fn first_incomplete_column(&self) -> Option<usize> {
        self.missing.iter().position(|m| m.iter().any(|&x| x))
    }

    /// Rows where every listed column is observed.
    pub fn complete_rows(&self, cols: &[usize]) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&r| cols.iter().all(|&c| !self.missing[c][r]))
            .collect()
    }

    /// Sub-dataset of the given columns restricted to their complete rows.
    pub fn complete_cases(&self, cols: &[usize]) -> Dataset<T> {
        let rows = self.complete_rows(cols);
        Dataset {
            columns: cols.iter().map(|&c| self.columns[c].select_rows(&rows)).collect(),
            missing: cols.iter().map(|_| vec![false; rows.len()]).collect(),
            kernels: cols.iter().map(|&c| self.kernels[c]).collect(),
        }
    }

    /// Sub-dataset of the given columns, all rows kept.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset<T> {
        Dataset {
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            missing: cols.iter().map(|&c| self.missing[c].clone()).collect(),
            kernels: cols.iter().map(|&c| self.kernels[c]).collect(),
        }
    }

    pub fn schema(&self) -> Schema {
        Schema {
            columns: self
                .columns
                .iter()
                .zip(&self.kernels)
                .map(|(c, k)| ColumnSchema {
                    name: c.name.clone(),
                    column_type: c.column_type(),
                    kernel: k.kind,
                    lengthscale: k.lengthscale,
                })
                .collect(),
        }
    }
}

enum Builder<T> {
    Numeric { dim: usize, values: Vec<T> },
    Categorical(Vec<String>),
    Text(Vec<String>),
}

/// Parses CSV text against a schema. Columns come out in schema order; the
/// CSV header may list them in any order but must name exactly the schema's
/// columns.
pub fn read_dataset<T: Scalar, R: Read>(reader: R, schema: &Schema) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() != schema.columns.len() {
        return Err(BkrError::Schema(format!(
            "CSV has {} columns, schema declares {}",
            header.len(),
            schema.columns.len()
        )));
    }
    let mut source = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let pos = header
            .iter()
            .position(|h| *h == c.name)
            .ok_or_else(|| BkrError::Schema(format!("column `{}` missing from CSV header", c.name)))?;
        source.push(pos);
    }

    let mut builders: Vec<Builder<T>> = schema
        .columns
        .iter()
        .map(|c| match c.column_type {
            ColumnType::Numeric => Builder::Numeric { dim: 1, values: Vec::new() },
            ColumnType::NumericVector { dim } => Builder::Numeric { dim, values: Vec::new() },
            ColumnType::Categorical => Builder::Categorical(Vec::new()),
            ColumnType::String => Builder::Text(Vec::new()),
        })
        .collect();
    let mut missing: Vec<Vec<bool>> = vec![Vec::new(); schema.columns.len()];

    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        for (c, col) in schema.columns.iter().enumerate() {
            let cell = record.get(source[c]).unwrap_or("");
            let is_missing = cell.trim().is_empty();
            missing[c].push(is_missing);
            match &mut builders[c] {
                Builder::Numeric { dim, values } => {
                    if is_missing {
                        values.extend(std::iter::repeat_n(T::zero(), *dim));
                        continue;
                    }
                    let parts: Vec<&str> = cell.split(';').collect();
                    if parts.len() != *dim {
                        return Err(BkrError::RaggedVector {
                            row,
                            column: col.name.clone(),
                            expected: *dim,
                            found: parts.len(),
                        });
                    }
                    for p in parts {
                        let v: T = p.trim().parse().map_err(|_| BkrError::Parse {
                            row,
                            column: col.name.clone(),
                            reason: format!("`{p}` is not a number"),
                        })?;
                        if !v.is_finite() {
                            return Err(BkrError::Parse {
                                row,
                                column: col.name.clone(),
                                reason: format!("`{p}` is not finite"),
                            });
                        }
                        values.push(v);
                    }
                }
                Builder::Categorical(v) | Builder::Text(v) => v.push(cell.to_string()),
            }
        }
    }

    let columns = schema
        .columns
        .iter()
        .zip(builders)
        .map(|(c, b)| match b {
            Builder::Numeric { dim, values } => Column::numeric(c.name.clone(), dim, values),
            Builder::Categorical(v) => Ok(Column::categorical(c.name.clone(), v)),
            Builder::Text(v) => Ok(Column::text(c.name.clone(), v)),
        })
        .collect::<Result<Vec<_>>>()?;
    let kernels = schema.columns.iter().map(ColumnSchema::kernel_spec).collect();
    Dataset::with_missing(columns, missing)?.with_kernels(kernels)
}

/// Reads `csv_path` against the JSON schema at `schema_path`.
pub fn load_dataset<T: Scalar>(csv_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let schema = Schema::from_json(&std::fs::read_to_string(schema_path)?)?;
    read_dataset(BufReader::new(File::open(csv_path)?), &schema)
}

/// Writes the CSV body (header plus rows). Numbers use the shortest
/// representation that parses back to the same value.
pub fn write_dataset<T: Scalar, W: Write>(dataset: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset.columns.iter().map(|c| c.name.as_str()))?;
    for r in 0..dataset.n_rows() {
        let cells: Vec<String> = dataset
            .columns
            .iter()
            .enumerate()
            .map(|(c, col)| {
                if dataset.missing[c][r] {
                    String::new()
                } else {
                    col.cell_string(r)
                }
            })
            .collect();
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the CSV to `csv_path` and its schema sidecar to `schema_path`.
pub fn save_dataset<T: Scalar>(
    dataset: &Dataset<T>,
    csv_path: impl AsRef<Path>,
    schema_path: impl AsRef<Path>,
) -> Result<()> {
    write_dataset(dataset, BufWriter::new(File::create(csv_path)?))?;
    std::fs::write(schema_path, dataset.schema().to_json())?;
    Ok(())
}
