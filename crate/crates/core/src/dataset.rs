//! Ingestion of raw CSV data into a fully observed [`DiscreteTable`].
//!
//! The pipeline is `load_csv` → `drop_missing` → `discretize` → `split`.
//! Schemas are TOML documents:
//!
//! ```toml
//! delimiter = ","          # optional, default ","
//! missing_token = "?"      # optional, default "?"
//!
//! [[variables]]
//! name = "education"
//! kind = "categorical"
//! states = ["Bachelors", "HS-grad"]
//! column = "education"     # optional source column, defaults to `name`
//! map = { "Masters" = "Bachelors" }  # optional raw label -> state label
//!
//! [[variables]]
//! name = "hours"
//! kind = "continuous"
//! bin_edges = [39.0, 40.0] # b edges give b + 1 states
//! # median_split = true    # alternative: one edge at the column median
//! ```
//!
//! Continuous values use right-closed bins: `v` lands in state
//! `|{e : e < v}|`, so with edges `[10.0]` both 5.0 and 10.0 map to 0.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_missing() -> String {
    "?".to_string()
}

fn default_delimiter() -> char {
    ','
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Categorical,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub map: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bin_edges: Vec<f64>,
    #[serde(default)]
    pub median_split: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_token: Option<String>,
}

impl VariableSpec {
    pub fn categorical(name: &str, states: &[&str]) -> Self {
        VariableSpec {
            name: name.to_string(),
            kind: VariableKind::Categorical,
            column: None,
            states: states.iter().map(|s| s.to_string()).collect(),
            map: BTreeMap::new(),
            bin_edges: Vec::new(),
            median_split: false,
            missing_token: None,
        }
    }

    pub fn continuous(name: &str, bin_edges: &[f64]) -> Self {
        VariableSpec {
            name: name.to_string(),
            kind: VariableKind::Continuous,
            column: None,
            states: Vec::new(),
            map: BTreeMap::new(),
            bin_edges: bin_edges.to_vec(),
            median_split: false,
            missing_token: None,
        }
    }

    /// Source column in the CSV header.
    pub fn source_column(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.name)
    }

    pub fn cardinality(&self) -> usize {
        match self.kind {
            VariableKind::Categorical => self.states.len(),
            VariableKind::Continuous if self.median_split => 2,
            VariableKind::Continuous => self.bin_edges.len() + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_missing")]
    pub missing_token: String,
    pub variables: Vec<VariableSpec>,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let schema = Schema {
            delimiter: default_delimiter(),
            missing_token: default_missing(),
            variables,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::Schema("no variables declared".into()));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Schema("delimiter must be a single ASCII character".into()));
        }
        let mut names = HashSet::new();
        for var in &self.variables {
            if !names.insert(var.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable `{}`", var.name)));
            }
            match var.kind {
                VariableKind::Categorical => {
                    if var.states.len() < 2 {
                        return Err(Error::Schema(format!(
                            "`{}` needs at least two states",
                            var.name
                        )));
                    }
                    let unique: HashSet<_> = var.states.iter().collect();
                    if unique.len() != var.states.len() {
                        return Err(Error::Schema(format!("`{}` repeats a state label", var.name)));
                    }
                    if let Some((raw, target)) = var.map.iter().find(|(_, t)| !unique.contains(t)) {
                        return Err(Error::Schema(format!(
                            "`{}` maps `{raw}` to unknown state `{target}`",
                            var.name
                        )));
                    }
                    if !var.bin_edges.is_empty() || var.median_split {
                        return Err(Error::Schema(format!(
                            "categorical `{}` cannot declare bins",
                            var.name
                        )));
                    }
                }
                VariableKind::Continuous => {
                    if var.median_split && !var.bin_edges.is_empty() {
                        return Err(Error::Schema(format!(
                            "`{}` declares both bin_edges and median_split",
                            var.name
                        )));
                    }
                    if !var.median_split && var.bin_edges.is_empty() {
                        return Err(Error::Schema(format!(
                            "continuous `{}` needs bin_edges or median_split",
                            var.name
                        )));
                    }
                    if var.bin_edges.iter().any(|e| !e.is_finite())
                        || var.bin_edges.windows(2).any(|w| w[0] >= w[1])
                    {
                        return Err(Error::Schema(format!(
                            "bin_edges of `{}` must be finite and strictly ascending",
                            var.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(VariableSpec::cardinality).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    fn missing_for<'a>(&'a self, var: &'a VariableSpec) -> &'a str {
        var.missing_token.as_deref().unwrap_or(&self.missing_token)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawValue {
    Label(String),
    Number(f64),
}

/// Parsed CSV cells in schema variable order; `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RawTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<Option<RawValue>>>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let header: HashMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let positions = schema
        .variables
        .iter()
        .map(|v| {
            header.get(v.source_column()).copied().ok_or_else(|| {
                Error::HeaderMismatch(format!("column `{}` not found in header", v.source_column()))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(positions.len());
        for (var, &pos) in schema.variables.iter().zip(&positions) {
            let text = record.get(pos).unwrap_or("");
            if text == schema.missing_for(var) {
                row.push(None);
                continue;
            }
            let value = match var.kind {
                VariableKind::Categorical => RawValue::Label(text.to_string()),
                VariableKind::Continuous => {
                    let v: f64 = text.parse().map_err(|_| Error::BadCell {
                        row: row_idx + 1,
                        column: var.source_column().to_string(),
                        value: text.to_string(),
                        expected: "a real number",
                    })?;
                    if !v.is_finite() {
                        return Err(Error::BadCell {
                            row: row_idx + 1,
                            column: var.source_column().to_string(),
                            value: text.to_string(),
                            expected: "a finite real number",
                        });
                    }
                    RawValue::Number(v)
                }
            };
            row.push(Some(value));
        }
        rows.push(row);
    }
    Ok(RawTable {
        names: schema.names(),
        rows,
    })
}

pub fn drop_missing(raw: RawTable) -> RawTable {
    RawTable {
        names: raw.names,
        rows: raw
            .rows
            .into_iter()
            .filter(|row| row.iter().all(Option::is_some))
            .collect(),
    }
}

/// Maps `v` to the number of edges strictly below it.
pub fn bin_index(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e < v)
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    })
}

/// Bin edges actually used for every continuous variable, resolving
/// `median_split` against the given table.
pub fn resolved_edges(raw: &RawTable, schema: &Schema) -> Vec<Vec<f64>> {
    schema
        .variables
        .iter()
        .enumerate()
        .map(|(c, var)| {
            if var.kind != VariableKind::Continuous {
                return Vec::new();
            }
            if !var.median_split {
                return var.bin_edges.clone();
            }
            let mut values: Vec<f64> = raw
                .rows
                .iter()
                .filter_map(|row| match &row[c] {
                    Some(RawValue::Number(v)) => Some(*v),
                    _ => None,
                })
                .collect();
            vec![median(&mut values).unwrap_or(0.0)]
        })
        .collect()
}

pub fn discretize(raw: &RawTable, schema: &Schema) -> Result<DiscreteTable> {
    let edges = resolved_edges(raw, schema);
    let lookups: Vec<HashMap<&str, u32>> = schema
        .variables
        .iter()
        .map(|var| {
            let mut lookup: HashMap<&str, u32> = var
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| (s.as_str(), i as u32))
                .collect();
            for (raw_label, state) in &var.map {
                let idx = lookup[state.as_str()];
                lookup.insert(raw_label.as_str(), idx);
            }
            lookup
        })
        .collect();

    let n = schema.variables.len();
    let mut columns = vec![Vec::with_capacity(raw.rows.len()); n];
    for (r, row) in raw.rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let var = &schema.variables[c];
            let state = match cell {
                None => return Err(Error::MissingCells(r)),
                Some(RawValue::Label(label)) => {
                    *lookups[c].get(label.as_str()).ok_or_else(|| Error::UnknownState {
                        variable: var.name.clone(),
                        value: label.clone(),
                    })?
                }
                Some(RawValue::Number(v)) => bin_index(&edges[c], *v) as u32,
            };
            columns[c].push(state);
        }
    }
    DiscreteTable::from_columns(schema.names(), schema.cardinalities(), columns)
}

/// Fully observed categorical data, stored column-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteTable {
    names: Vec<String>,
    cardinalities: Vec<usize>,
    columns: Vec<Vec<u32>>,
}

impl DiscreteTable {
    pub fn from_columns(
        names: Vec<String>,
        cardinalities: Vec<usize>,
        columns: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if names.len() != cardinalities.len() || columns.len() != cardinalities.len() {
            return Err(Error::Schema(format!(
                "{} names, {} cardinalities and {} columns",
                names.len(),
                cardinalities.len(),
                columns.len()
            )));
        }
        if let Some(i) = cardinalities.iter().position(|&r| r == 0) {
            return Err(Error::Schema(format!("variable {i} has zero states")));
        }
        let m = columns.first().map_or(0, Vec::len);
        for (c, col) in columns.iter().enumerate() {
            if col.len() != m {
                return Err(Error::Schema("ragged columns".into()));
            }
            if let Some(r) = col.iter().position(|&v| v as usize >= cardinalities[c]) {
                return Err(Error::Schema(format!(
                    "row {r}: state {} out of range for `{}` ({} states)",
                    col[r], names[c], cardinalities[c]
                )));
            }
        }
        Ok(DiscreteTable {
            names,
            cardinalities,
            columns,
        })
    }

    /// Builds a table from row-major state indices with generated names `X0..`.
    pub fn from_rows(cardinalities: Vec<usize>, rows: &[Vec<usize>]) -> Result<Self> {
        let names = (0..cardinalities.len()).map(|i| format!("X{i}")).collect();
        Self::from_rows_named(names, cardinalities, rows)
    }

    pub fn from_rows_named(
        names: Vec<String>,
        cardinalities: Vec<usize>,
        rows: &[Vec<usize>],
    ) -> Result<Self> {
        let n = cardinalities.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); n];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Schema(format!("row {r} has {} cells, expected {n}", row.len())));
            }
            for (c, &v) in row.iter().enumerate() {
                columns[c].push(v as u32);
            }
        }
        Self::from_columns(names, cardinalities, columns)
    }

    pub fn n_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn column(&self, var: usize) -> &[u32] {
        &self.columns[var]
    }

    pub fn value(&self, row: usize, var: usize) -> usize {
        self.columns[var][row] as usize
    }

    pub fn row(&self, row: usize) -> Vec<usize> {
        self.columns.iter().map(|c| c[row] as usize).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DiscreteTable {
        DiscreteTable {
            names: self.names.clone(),
            cardinalities: self.cardinalities.clone(),
            columns: self
                .columns
                .iter()
                .map(|col| rows.iter().map(|&r| col[r]).collect())
                .collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(&self.names)?;
        let mut record = Vec::with_capacity(self.n_vars());
        for r in 0..self.n_rows() {
            record.clear();
            record.extend(self.columns.iter().map(|c| c[r].to_string()));
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a CSV of integer state indices written by [`write_csv`](Self::write_csv).
    pub fn read_csv(path: &Path, names: &[String], cardinalities: &[usize]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != names {
            return Err(Error::HeaderMismatch(format!(
                "expected {names:?}, found {header:?}"
            )));
        }
        let mut columns = vec![Vec::new(); names.len()];
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            for (c, cell) in record.iter().enumerate() {
                let v: u32 = cell.parse().map_err(|_| Error::BadCell {
                    row: r + 1,
                    column: names[c].clone(),
                    value: cell.to_string(),
                    expected: "a state index",
                })?;
                columns[c].push(v);
            }
        }
        Self::from_columns(names.to_vec(), cardinalities.to_vec(), columns)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    #[default]
    Tail,
    Shuffled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub test_count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: SplitMethod,
}

/// Splits into `(train, test)`. `Tail` takes the last `test_count` rows as
/// the test part; `Shuffled` permutes row indices with `seed` first.
pub fn split(table: &DiscreteTable, spec: &SplitSpec) -> Result<(DiscreteTable, DiscreteTable)> {
    let m = table.n_rows();
    if spec.test_count == 0 || spec.test_count >= m {
        return Err(Error::SplitOutOfRange {
            test_count: spec.test_count,
            rows: m,
        });
    }
    let mut order: Vec<usize> = (0..m).collect();
    if spec.method == SplitMethod::Shuffled {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    }
    let (train, test) = order.split_at(m - spec.test_count);
    Ok((table.select_rows(train), table.select_rows(test)))
}
