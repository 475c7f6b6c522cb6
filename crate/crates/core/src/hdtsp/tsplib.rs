//! History-free ATSP approximation and TSPLIB interop for external solvers.
//!
//! Matrix cities are `0` for the depot and `v + 1` for variable `v`. TSPLIB
//! node ids are 1-based, so variable `v` is node `v + 2` in written files.

use std::fs;
use std::path::Path;

use super::{CostOracle, Ordering};
use crate::error::{Error, Result};

/// Largest rescaled edge weight written to a TSPLIB file.
pub const MAX_WEIGHT: i64 = 10_000_000;
/// Weight written on the diagonal, above every rescaled cost.
pub const DIAGONAL_WEIGHT: i64 = 100_000_000;

/// `(n+1) × (n+1)` costs with `c(i, j) = Cost(j, {i})`, `c(φ, j) = Cost(j, ∅)`,
/// `c(i, φ) = 0` and an infinite diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticCostMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl StaticCostMatrix {
    pub const DEPOT: usize = 0;

    pub fn city(var: usize) -> usize {
        var + 1
    }

    /// Builds a matrix from raw entries; the diagonal is overwritten with `+∞`.
    pub fn from_entries(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::Tsplib(format!(
                "{} entries do not form a {dim}×{dim} matrix",
                entries.len()
            )));
        }
        for i in 0..dim {
            entries[i * dim + i] = f64::INFINITY;
        }
        if (0..dim * dim).any(|k| k / dim != k % dim && !entries[k].is_finite()) {
            return Err(Error::Tsplib("off-diagonal entries must be finite".into()));
        }
        Ok(StaticCostMatrix { dim, entries })
    }

    /// Number of variables (the depot excluded).
    pub fn n(&self) -> usize {
        self.dim - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.dim + to]
    }

    /// Cost of the closed tour `φ → perm[0] → … → perm[n-1] → φ`.
    pub fn tour_cost(&self, ordering: &Ordering) -> f64 {
        let mut from = Self::DEPOT;
        let mut total = 0.0;
        for &v in ordering.as_slice() {
            total += self.get(from, Self::city(v));
            from = Self::city(v);
        }
        total + self.get(from, Self::DEPOT)
    }

    /// Affine map onto integers: `w = round((c - min) / step)` with
    /// `step = (max - min) / MAX_WEIGHT` (or 1 when all costs are equal).
    pub fn rescale(&self) -> RescaledMatrix {
        let off_diag = || {
            (0..self.dim * self.dim)
                .filter(|k| k / self.dim != k % self.dim)
                .map(|k| self.entries[k])
        };
        let min = off_diag().fold(f64::INFINITY, f64::min);
        let max = off_diag().fold(f64::NEG_INFINITY, f64::max);
        let (min, max) = if min.is_finite() { (min, max) } else { (0.0, 0.0) };
        let step = if max > min {
            (max - min) / MAX_WEIGHT as f64
        } else {
            1.0
        };
        let weights = (0..self.dim * self.dim)
            .map(|k| {
                if k / self.dim == k % self.dim {
                    DIAGONAL_WEIGHT
                } else {
                    (((self.entries[k] - min) / step).round() as i64).clamp(0, MAX_WEIGHT)
                }
            })
            .collect();
        RescaledMatrix {
            dim: self.dim,
            weights,
            offset: min,
            step,
        }
    }
}

/// Integer weights plus the affine map back: `c ≈ offset + step · w`.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaledMatrix {
    pub dim: usize,
    pub weights: Vec<i64>,
    pub offset: f64,
    pub step: f64,
}

impl RescaledMatrix {
    pub fn get(&self, from: usize, to: usize) -> i64 {
        self.weights[from * self.dim + to]
    }

    pub fn tour_weight(&self, ordering: &Ordering) -> i64 {
        let mut from = StaticCostMatrix::DEPOT;
        let mut total = 0;
        for &v in ordering.as_slice() {
            total += self.get(from, StaticCostMatrix::city(v));
            from = StaticCostMatrix::city(v);
        }
        total + self.get(from, StaticCostMatrix::DEPOT)
    }
}

pub fn static_cost_matrix(oracle: &CostOracle<'_>) -> Result<StaticCostMatrix> {
    let n = oracle.n();
    let dim = n + 1;
    let mut entries = vec![0.0; dim * dim];
    for j in 0..n {
        entries[StaticCostMatrix::city(j)] = oracle.step_cost_mask(j, 0)?;
        for i in (0..n).filter(|&i| i != j) {
            entries[StaticCostMatrix::city(i) * dim + StaticCostMatrix::city(j)] =
                oracle.cost_mask(j, 1 << i)?;
        }
    }
    StaticCostMatrix::from_entries(dim, entries)
}

/// Renders the rescaled matrix as a TSPLIB `ATSP` problem with an explicit
/// full matrix.
pub fn write_atsp(matrix: &StaticCostMatrix, name: &str) -> String {
    let rescaled = matrix.rescale();
    let mut out = String::new();
    out.push_str(&format!("NAME: {name}\n"));
    out.push_str("TYPE: ATSP\n");
    out.push_str(&format!(
        "COMMENT: depot is node 1, variable v is node v+2; cost = {:e} + {:e} * weight\n",
        rescaled.offset, rescaled.step
    ));
    out.push_str(&format!("DIMENSION: {}\n", matrix.dim()));
    out.push_str("EDGE_WEIGHT_TYPE: EXPLICIT\n");
    out.push_str("EDGE_WEIGHT_FORMAT: FULL_MATRIX\n");
    out.push_str("EDGE_WEIGHT_SECTION\n");
    for row in rescaled.weights.chunks(matrix.dim()) {
        let line: Vec<String> = row.iter().map(i64::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.push_str("EOF\n");
    out
}

pub fn export_tsplib(matrix: &StaticCostMatrix, path: &Path, name: &str) -> Result<()> {
    fs::write(path, write_atsp(matrix, name)).map_err(|e| Error::io(path, e))
}

fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let (k, v) = line.split_once(':')?;
    (k.trim() == key).then(|| v.trim())
}

/// Parses a TSPLIB `ATSP` file with `EXPLICIT` / `FULL_MATRIX` weights,
/// returning the dimension and the row-major weights.
pub fn parse_atsp(text: &str) -> Result<(usize, Vec<i64>)> {
    let mut dim = None;
    let mut lines = text.lines();
    for line in lines.by_ref() {
        let line = line.trim();
        if line == "EDGE_WEIGHT_SECTION" {
            break;
        }
        if let Some(v) = header_value(line, "TYPE") {
            if v != "ATSP" {
                return Err(Error::Tsplib(format!("unsupported TYPE {v}")));
            }
        } else if let Some(v) = header_value(line, "EDGE_WEIGHT_FORMAT") {
            if v != "FULL_MATRIX" {
                return Err(Error::Tsplib(format!("unsupported EDGE_WEIGHT_FORMAT {v}")));
            }
        } else if let Some(v) = header_value(line, "DIMENSION") {
            dim = Some(
                v.parse::<usize>()
                    .map_err(|_| Error::Tsplib(format!("bad DIMENSION {v}")))?,
            );
        }
    }
    let dim = dim.ok_or_else(|| Error::Tsplib("missing DIMENSION".into()))?;
    let mut weights = Vec::with_capacity(dim * dim);
    for token in lines
        .take_while(|l| l.trim() != "EOF")
        .flat_map(str::split_whitespace)
    {
        weights.push(
            token
                .parse::<i64>()
                .map_err(|_| Error::Tsplib(format!("bad weight `{token}`")))?,
        );
    }
    if weights.len() != dim * dim {
        return Err(Error::Tsplib(format!(
            "expected {} weights, found {}",
            dim * dim,
            weights.len()
        )));
    }
    Ok((dim, weights))
}

/// Renders an ordering as a TSPLIB `TOUR` starting at the depot.
pub fn write_tour(ordering: &Ordering, name: &str) -> String {
    let mut out = format!(
        "NAME: {name}\nTYPE: TOUR\nDIMENSION: {}\nTOUR_SECTION\n1\n",
        ordering.len() + 1
    );
    for &v in ordering.as_slice() {
        out.push_str(&format!("{}\n", v + 2));
    }
    out.push_str("-1\nEOF\n");
    out
}

/// Parses a TSPLIB `TOUR` over `n` variables plus the depot, rotates the
/// cycle so the depot comes first, and strips it.
pub fn parse_tour(text: &str, n: usize) -> Result<Ordering> {
    let dim = n + 1;
    let mut lines = text.lines();
    let mut found_section = false;
    for line in lines.by_ref() {
        let line = line.trim();
        if line == "TOUR_SECTION" {
            found_section = true;
            break;
        }
        if let Some(v) = header_value(line, "DIMENSION") {
            let d: usize = v
                .parse()
                .map_err(|_| Error::Tsplib(format!("bad DIMENSION {v}")))?;
            if d != dim {
                return Err(Error::Tsplib(format!("tour DIMENSION {d}, expected {dim}")));
            }
        }
    }
    if !found_section {
        return Err(Error::Tsplib("missing TOUR_SECTION".into()));
    }
    let mut ids = Vec::with_capacity(dim);
    'read: for line in lines {
        for token in line.split_whitespace() {
            if token == "-1" || token == "EOF" {
                break 'read;
            }
            let id: usize = token
                .parse()
                .map_err(|_| Error::Tsplib(format!("bad node id `{token}`")))?;
            if id == 0 || id > dim {
                return Err(Error::Tsplib(format!("node id {id} outside 1..={dim}")));
            }
            ids.push(id - 1);
        }
    }
    if ids.len() != dim {
        return Err(Error::Tsplib(format!(
            "tour lists {} nodes, expected {dim}",
            ids.len()
        )));
    }
    let depot = ids
        .iter()
        .position(|&c| c == StaticCostMatrix::DEPOT)
        .ok_or_else(|| Error::Tsplib("tour does not visit the depot".into()))?;
    ids.rotate_left(depot);
    let perm: Vec<usize> = ids[1..].iter().map(|&c| c.wrapping_sub(1)).collect();
    Ordering::new(perm).map_err(|_| Error::Tsplib("tour is not a permutation".into()))
}

pub fn import_tour(path: &Path, n: usize) -> Result<Ordering> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tour(&text, n)
}
