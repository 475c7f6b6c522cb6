//! Decomposable node scores (K2 and BIC) over contingency counts.
//!
//! Parent configurations use mixed-radix encoding with the first listed
//! (smallest) parent as the most significant digit.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dataset::DiscreteTable;
use crate::error::{Error, Result};
use crate::structure::Dag;

/// Largest number of joint parent configurations a count table may address.
pub const MAX_PARENT_CONFIGS: u64 = 1 << 31;

const DENSE_COUNT_LIMIT: u64 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    K2,
    Bic,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::K2 => "k2",
            Metric::Bic => "bic",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "k2" => Ok(Metric::K2),
            "bic" => Ok(Metric::Bic),
            other => Err(Error::Schema(format!("unknown metric `{other}`"))),
        }
    }
}

/// Sorted, duplicate-free set of parent indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParentSet(Vec<usize>);

impl ParentSet {
    pub fn empty() -> Self {
        ParentSet(Vec::new())
    }

    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        ParentSet(members)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn with(&self, v: usize) -> Self {
        let mut members = self.0.clone();
        if let Err(pos) = members.binary_search(&v) {
            members.insert(pos, v);
        }
        ParentSet(members)
    }
}

impl From<&[usize]> for ParentSet {
    fn from(members: &[usize]) -> Self {
        ParentSet::new(members.to_vec())
    }
}

/// Counts `N_ijk` for the observed parent configurations.
///
/// Unobserved configurations have all-zero rows and are not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct ContingencyCounts {
    child_cardinality: usize,
    parent_configs: u64,
    configs: Vec<u64>,
    counts: Vec<Vec<u64>>,
}

impl ContingencyCounts {
    pub fn child_cardinality(&self) -> usize {
        self.child_cardinality
    }

    /// `q_i`, the number of joint parent configurations.
    pub fn parent_configs(&self) -> u64 {
        self.parent_configs
    }

    /// Observed configurations with their per-state counts, ascending by config.
    pub fn observed(&self) -> impl Iterator<Item = (u64, &[u64])> {
        self.configs
            .iter()
            .copied()
            .zip(self.counts.iter().map(Vec::as_slice))
    }

    pub fn get(&self, config: u64, state: usize) -> u64 {
        match self.configs.binary_search(&config) {
            Ok(i) => self.counts[i][state],
            Err(_) => 0,
        }
    }

    pub fn row(&self, config: u64) -> Option<&[u64]> {
        self.configs
            .binary_search(&config)
            .ok()
            .map(|i| self.counts[i].as_slice())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Full `q × r` matrix; only sensible for small `q`.
    pub fn dense(&self) -> Vec<Vec<u64>> {
        (0..self.parent_configs)
            .map(|j| (0..self.child_cardinality).map(|k| self.get(j, k)).collect())
            .collect()
    }
}

fn check_index(table: &DiscreteTable, index: usize) -> Result<()> {
    if index >= table.n_vars() {
        return Err(Error::IndexOutOfRange {
            index,
            n: table.n_vars(),
        });
    }
    Ok(())
}

pub fn count_contingency(
    table: &DiscreteTable,
    child: usize,
    parents: &ParentSet,
) -> Result<ContingencyCounts> {
    check_index(table, child)?;
    for &p in parents.members() {
        check_index(table, p)?;
    }
    if parents.contains(child) {
        return Err(Error::SelfParent(child));
    }
    let cards = table.cardinalities();
    let r = cards[child];
    let q = parents
        .members()
        .iter()
        .try_fold(1u128, |acc, &p| {
            let next = acc * cards[p] as u128;
            (next <= MAX_PARENT_CONFIGS as u128).then_some(next).ok_or(next)
        })
        .map_err(Error::ConfigOverflow)? as u64;

    let m = table.n_rows();
    let mut config = vec![0u64; m];
    for &p in parents.members() {
        let radix = cards[p] as u64;
        for (c, &v) in config.iter_mut().zip(table.column(p)) {
            *c = *c * radix + v as u64;
        }
    }
    let child_col = table.column(child);

    let (configs, counts) = if q * r as u64 <= DENSE_COUNT_LIMIT {
        let mut dense = vec![0u64; q as usize * r];
        for (&j, &k) in config.iter().zip(child_col) {
            dense[j as usize * r + k as usize] += 1;
        }
        dense
            .chunks(r)
            .enumerate()
            .filter(|(_, row)| row.iter().any(|&c| c > 0))
            .map(|(j, row)| (j as u64, row.to_vec()))
            .unzip()
    } else {
        let mut sparse: HashMap<u64, Vec<u64>> = HashMap::new();
        for (&j, &k) in config.iter().zip(child_col) {
            sparse.entry(j).or_insert_with(|| vec![0; r])[k as usize] += 1;
        }
        let mut rows: Vec<_> = sparse.into_iter().collect();
        rows.sort_unstable_by_key(|(j, _)| *j);
        rows.into_iter().unzip()
    };

    Ok(ContingencyCounts {
        child_cardinality: r,
        parent_configs: q,
        configs,
        counts,
    })
}

/// Log K2 marginal likelihood:
/// `Σ_j [lnΓ(r) − lnΓ(N_ij + r) + Σ_k lnΓ(N_ijk + 1)]`.
///
/// Unobserved configurations contribute exactly zero and are skipped.
pub fn k2_node_score(counts: &ContingencyCounts) -> f64 {
    let r = counts.child_cardinality as f64;
    let ln_gamma_r = ln_gamma(r);
    let mut score = 0.0;
    for (_, row) in counts.observed() {
        let n_ij: u64 = row.iter().sum();
        score += ln_gamma_r - ln_gamma(n_ij as f64 + r);
        for &n_ijk in row {
            if n_ijk > 1 {
                score += ln_gamma(n_ijk as f64 + 1.0);
            }
        }
    }
    score
}

/// Maximised log-likelihood minus `q(r − 1)/2 · ln m`.
pub fn bic_node_score(counts: &ContingencyCounts, m: usize) -> f64 {
    let mut loglik = 0.0;
    for (_, row) in counts.observed() {
        let n_ij = row.iter().sum::<u64>() as f64;
        for &n_ijk in row.iter().filter(|&&c| c > 0) {
            let n_ijk = n_ijk as f64;
            loglik += n_ijk * (n_ijk / n_ij).ln();
        }
    }
    let free = counts.parent_configs as f64 * (counts.child_cardinality as f64 - 1.0);
    loglik - 0.5 * free * (m as f64).ln()
}

/// Memo of `(child, parents) → log node score` for one metric.
#[derive(Debug, Default)]
pub struct ScoreCache {
    metric: Metric,
    entries: RwLock<HashMap<(usize, ParentSet), f64>>,
}

const CACHE_HEADER: &str = "bntsp-score-cache v1";

impl ScoreCache {
    pub fn new(metric: Metric) -> Self {
        ScoreCache {
            metric,
            entries: RwLock::new(HashMap::new()),
        }
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn get(&self, child: usize, parents: &ParentSet) -> Option<f64> {
        self.entries.read().get(&(child, parents.clone())).copied()
    }

    pub fn insert(&self, child: usize, parents: ParentSet, score: f64) {
        self.entries.write().entry((child, parents)).or_insert(score);
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.entries.write().clear();
    }

    /// Writes one `child parents hexbits` line per entry, sorted by key.
    pub fn save(&self, path: &Path) -> Result<()> {
        let entries = self.entries.read();
        let mut keys: Vec<_> = entries.keys().collect();
        keys.sort();
        let mut out = format!("{CACHE_HEADER}\nmetric {}\n", self.metric);
        for key in keys {
            let parents = if key.1.is_empty() {
                "-".to_string()
            } else {
                key.1
                    .members()
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            };
            out.push_str(&format!("{} {} {:016x}\n", key.0, parents, entries[key].to_bits()));
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some(CACHE_HEADER) {
            return Err(Error::CacheFormat("missing header".into()));
        }
        let metric = lines
            .next()
            .and_then(|l| l.strip_prefix("metric "))
            .ok_or_else(|| Error::CacheFormat("missing metric line".into()))?
            .parse()?;
        let cache = ScoreCache::new(metric);
        {
            let mut entries = cache.entries.write();
            for line in lines.filter(|l| !l.trim().is_empty()) {
                let bad = || Error::CacheFormat(format!("bad line `{line}`"));
                let mut fields = line.split_whitespace();
                let child: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
                let parents = match fields.next().ok_or_else(bad)? {
                    "-" => ParentSet::empty(),
                    list => ParentSet::new(
                        list.split(',')
                            .map(|p| p.parse().map_err(|_| bad()))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                };
                let bits = fields
                    .next()
                    .and_then(|f| u64::from_str_radix(f, 16).ok())
                    .ok_or_else(bad)?;
                entries.insert((child, parents), f64::from_bits(bits));
            }
        }
        Ok(cache)
    }
}

/// Node scorer over a fixed training table with a shared memo.
#[derive(Debug)]
pub struct Scorer<'a> {
    table: &'a DiscreteTable,
    cache: ScoreCache,
}

impl<'a> Scorer<'a> {
    pub fn new(table: &'a DiscreteTable, metric: Metric) -> Self {
        Scorer {
            table,
            cache: ScoreCache::new(metric),
        }
    }

    pub fn with_cache(table: &'a DiscreteTable, cache: ScoreCache) -> Self {
        Scorer { table, cache }
    }

    pub fn table(&self) -> &'a DiscreteTable {
        self.table
    }

    pub fn metric(&self) -> Metric {
        self.cache.metric
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    pub fn into_cache(self) -> ScoreCache {
        self.cache
    }

    /// Scores without touching the cache.
    pub fn compute(&self, child: usize, parents: &ParentSet) -> Result<f64> {
        let counts = count_contingency(self.table, child, parents)?;
        match self.cache.metric {
            Metric::K2 => Ok(k2_node_score(&counts)),
            Metric::Bic => {
                if self.table.n_rows() == 0 {
                    return Err(Error::EmptyTable);
                }
                Ok(bic_node_score(&counts, self.table.n_rows()))
            }
        }
    }

    pub fn node_score(&self, child: usize, parents: &ParentSet) -> Result<f64> {
        if let Some(score) = self.cache.get(child, parents) {
            return Ok(score);
        }
        let score = self.compute(child, parents)?;
        self.cache.insert(child, parents.clone(), score);
        Ok(score)
    }
}

/// Sum of node scores given each node's DAG parents.
pub fn graph_score(scorer: &Scorer<'_>, dag: &Dag, max_in_degree: usize) -> Result<f64> {
    if dag.n() != scorer.table().n_vars() {
        return Err(Error::IndexOutOfRange {
            index: dag.n(),
            n: scorer.table().n_vars(),
        });
    }
    let mut total = 0.0;
    for (node, parents) in dag.parents().iter().enumerate() {
        if parents.len() > max_in_degree {
            return Err(Error::InDegree {
                node,
                found: parents.len(),
                max: max_in_degree,
            });
        }
        total += scorer.node_score(node, parents)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> DiscreteTable {
        // columns: P, X
        DiscreteTable::from_rows(vec![2, 2], &[vec![0, 0], vec![0, 1], vec![1, 1]]).unwrap()
    }

    #[test]
    fn counts_single_parent() {
        let c = count_contingency(&toy(), 1, &ParentSet::new(vec![0])).unwrap();
        assert_eq!(c.dense(), vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(c.total(), 3);
    }

    #[test]
    fn counts_without_parents_are_marginal() {
        let c = count_contingency(&toy(), 1, &ParentSet::empty()).unwrap();
        assert_eq!(c.dense(), vec![vec![1, 2]]);
    }

    #[test]
    fn counts_on_empty_table() {
        let t = DiscreteTable::from_rows(vec![2, 3], &[]).unwrap();
        let c = count_contingency(&t, 1, &ParentSet::new(vec![0])).unwrap();
        assert_eq!(c.dense(), vec![vec![0; 3]; 2]);
        assert_eq!(k2_node_score(&c), 0.0);
    }

    #[test]
    fn mixed_radix_first_parent_most_significant() {
        let t = DiscreteTable::from_rows(vec![2, 3, 2], &[vec![1, 2, 0]]).unwrap();
        let c = count_contingency(&t, 2, &ParentSet::new(vec![1, 0])).unwrap();
        assert_eq!(c.parent_configs(), 6);
        assert_eq!(c.get(5, 0), 1);
    }

    #[test]
    fn count_errors() {
        let t = toy();
        assert!(matches!(
            count_contingency(&t, 2, &ParentSet::empty()),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            count_contingency(&t, 1, &ParentSet::new(vec![1])),
            Err(Error::SelfParent(1))
        ));
        let wide = DiscreteTable::from_rows(vec![1 << 16, 1 << 16, 2], &[vec![0, 0, 0]]).unwrap();
        assert!(matches!(
            count_contingency(&wide, 2, &ParentSet::new(vec![0, 1])),
            Err(Error::ConfigOverflow(_))
        ));
    }

    #[test]
    fn bic_values() {
        let rows: Vec<_> = (0..10).map(|i| vec![i % 2, i % 2]).collect();
        let t = DiscreteTable::from_rows(vec![2, 2], &rows).unwrap();
        let det = count_contingency(&t, 1, &ParentSet::new(vec![0])).unwrap();
        assert!((bic_node_score(&det, 10) - (-(10f64).ln())).abs() < 1e-12);
        let uni = count_contingency(&t, 1, &ParentSet::empty()).unwrap();
        let expected = 10.0 * 0.5f64.ln() - 0.5 * 10f64.ln();
        assert!((bic_node_score(&uni, 10) - expected).abs() < 1e-12);
        assert!((expected - (-8.0828)).abs() < 1e-4);

        let single = DiscreteTable::from_rows(vec![1], &[vec![0], vec![0]]).unwrap();
        let c = count_contingency(&single, 0, &ParentSet::empty()).unwrap();
        assert_eq!(bic_node_score(&c, 2), 0.0);
    }

    #[test]
    fn bic_refuses_empty_table() {
        let t = DiscreteTable::from_rows(vec![2], &[]).unwrap();
        let scorer = Scorer::new(&t, Metric::Bic);
        assert!(matches!(scorer.node_score(0, &ParentSet::empty()), Err(Error::EmptyTable)));
    }

    #[test]
    fn parent_set_normalises() {
        let p = ParentSet::new(vec![3, 1, 3, 2]);
        assert_eq!(p.members(), &[1, 2, 3]);
        assert_eq!(p.with(0).members(), &[0, 1, 2, 3]);
        assert_eq!(p.with(2), p);
    }

    #[test]
    fn cache_file_round_trip() {
        let t = toy();
        let scorer = Scorer::new(&t, Metric::K2);
        scorer.node_score(1, &ParentSet::new(vec![0])).unwrap();
        scorer.node_score(0, &ParentSet::empty()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        scorer.cache().save(&path).unwrap();
        let loaded = ScoreCache::load(&path).unwrap();
        assert_eq!(loaded.metric(), Metric::K2);
        assert_eq!(loaded.len(), 2);
        for (child, parents) in [(1, ParentSet::new(vec![0])), (0, ParentSet::empty())] {
            assert_eq!(
                loaded.get(child, &parents).unwrap().to_bits(),
                scorer.compute(child, &parents).unwrap().to_bits()
            );
        }
    }
}
