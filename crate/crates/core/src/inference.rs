//! Parameter fitting, exact posterior queries and the evaluation protocol.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::DiscreteTable;
use crate::error::{Error, Result};
use crate::scoring::count_contingency;
use crate::structure::Dag;

/// Networks larger than this are refused by [`query_posterior`].
pub const MAX_QUERY_VARIABLES: usize = 25;
/// Cap on the number of joint completions a single query may sum.
pub const MAX_COMPLETIONS: u128 = 100_000_000;

#[derive(Clone, Debug, PartialEq)]
struct NodeCpt {
    parents: Vec<usize>,
    cardinality: usize,
    rows: HashMap<u64, Vec<f64>>,
    default_row: Vec<f64>,
}

impl NodeCpt {
    fn row(&self, config: u64) -> &[f64] {
        self.rows.get(&config).unwrap_or(&self.default_row)
    }
}

/// Conditional probability tables for every node of a [`Dag`].
#[derive(Clone, Debug, PartialEq)]
pub struct CptSet {
    alpha: f64,
    cardinalities: Vec<usize>,
    nodes: Vec<NodeCpt>,
}

impl CptSet {
    /// Builds CPTs from dense `q × r` tables, one per node, rows indexed by
    /// the mixed-radix parent configuration.
    pub fn from_tables(dag: &Dag, cardinalities: &[usize], tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if tables.len() != dag.n() || cardinalities.len() != dag.n() {
            return Err(Error::Query("one table per node is required".into()));
        }
        let nodes = tables
            .into_iter()
            .enumerate()
            .map(|(v, table)| {
                let parents = dag.parents_of(v).members().to_vec();
                let q: usize = parents.iter().map(|&p| cardinalities[p]).product();
                let r = cardinalities[v];
                if table.len() != q || table.iter().any(|row| row.len() != r) {
                    return Err(Error::Query(format!("table for node {v} must be {q}×{r}")));
                }
                for row in &table {
                    let sum: f64 = row.iter().sum();
                    if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::Query(format!("row of node {v} is not a distribution")));
                    }
                }
                Ok(NodeCpt {
                    parents,
                    cardinality: r,
                    rows: table
                        .into_iter()
                        .enumerate()
                        .map(|(j, row)| (j as u64, row))
                        .collect(),
                    default_row: vec![1.0 / r as f64; r],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CptSet {
            alpha: 0.0,
            cardinalities: cardinalities.to_vec(),
            nodes,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    fn config(&self, v: usize, assignment: &[usize]) -> u64 {
        self.nodes[v]
            .parents
            .iter()
            .fold(0u64, |j, &p| j * self.cardinalities[p] as u64 + assignment[p] as u64)
    }

    /// `P(X_v = assignment[v] | parents as in assignment)`.
    pub fn prob(&self, v: usize, assignment: &[usize]) -> f64 {
        self.nodes[v].row(self.config(v, assignment))[assignment[v]]
    }

    /// The CPT row for `v` under the parent states found in `assignment`.
    pub fn row(&self, v: usize, assignment: &[usize]) -> &[f64] {
        self.nodes[v].row(self.config(v, assignment))
    }

    /// Ancestral sampling of `m` rows.
    pub fn sample(&self, dag: &Dag, m: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let mut x = vec![0usize; dag.n()];
            for &v in dag.ordering().as_slice() {
                let u: f64 = rng.random();
                let row = self.row(v, &x);
                let mut acc = 0.0;
                x[v] = row.len() - 1;
                for (k, &p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        x[v] = k;
                        break;
                    }
                }
            }
            rows.push(x);
        }
        rows
    }

    /// Samples a table with the given variable names from a seeded stream.
    pub fn sample_table(&self, dag: &Dag, names: Vec<String>, m: usize, seed: u64) -> Result<DiscreteTable> {
        let rows = self.sample(dag, m, &mut ChaCha8Rng::seed_from_u64(seed));
        DiscreteTable::from_rows_named(names, self.cardinalities.clone(), &rows)
    }
}

/// `P(X = k | j) = (N_ijk + α) / (N_ij + α·r)`; configurations with no
/// mass (unseen, or `α = 0` with `N_ij = 0`) are uniform.
pub fn fit_cpts(table: &DiscreteTable, dag: &Dag, alpha: f64) -> Result<CptSet> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Query(format!("smoothing α must be finite and ≥ 0, got {alpha}")));
    }
    if dag.n() != table.n_vars() {
        return Err(Error::Query(format!(
            "network has {} nodes, table has {} variables",
            dag.n(),
            table.n_vars()
        )));
    }
    let nodes = (0..dag.n())
        .map(|v| {
            let counts = count_contingency(table, v, dag.parents_of(v))?;
            let r = counts.child_cardinality();
            let rows = counts
                .observed()
                .map(|(j, row)| {
                    let n_ij = row.iter().sum::<u64>() as f64;
                    let denom = n_ij + alpha * r as f64;
                    (j, row.iter().map(|&c| (c as f64 + alpha) / denom).collect())
                })
                .collect();
            Ok(NodeCpt {
                parents: dag.parents_of(v).members().to_vec(),
                cardinality: r,
                rows,
                default_row: vec![1.0 / r as f64; r],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CptSet {
        alpha,
        cardinalities: table.cardinalities().to_vec(),
        nodes,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub target: usize,
    pub evidence: BTreeMap<usize, usize>,
}

impl Query {
    pub fn new(target: usize, evidence: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Query {
            target,
            evidence: evidence.into_iter().collect(),
        }
    }
}

fn ancestral_closure(dag: &Dag, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut keep = vec![false; dag.n()];
    let mut stack: Vec<usize> = seeds.into_iter().collect();
    while let Some(v) = stack.pop() {
        if !std::mem::replace(&mut keep[v], true) {
            stack.extend_from_slice(dag.parents_of(v).members());
        }
    }
    keep
}

/// Exact posterior over the target's states by summing the factorised joint
/// over every completion of the unobserved variables.
///
/// Only ancestors of the target and evidence are enumerated; every other
/// node sums out to one.
pub fn query_posterior(cpts: &CptSet, dag: &Dag, query: &Query) -> Result<Vec<f64>> {
    let n = dag.n();
    if n > MAX_QUERY_VARIABLES {
        return Err(Error::TooManyVariables {
            n,
            limit: MAX_QUERY_VARIABLES,
            what: "exact enumeration",
        });
    }
    if cpts.nodes.len() != n {
        return Err(Error::Query("CPTs do not match the network".into()));
    }
    if query.target >= n {
        return Err(Error::IndexOutOfRange {
            index: query.target,
            n,
        });
    }
    if query.evidence.contains_key(&query.target) {
        return Err(Error::Query("target is also observed".into()));
    }
    for (&v, &s) in &query.evidence {
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, n });
        }
        if s >= cpts.cardinalities[v] {
            return Err(Error::Query(format!("state {s} out of range for variable {v}")));
        }
    }

    let keep = ancestral_closure(dag, std::iter::once(query.target).chain(query.evidence.keys().copied()));
    let relevant: Vec<usize> = dag
        .ordering()
        .as_slice()
        .iter()
        .copied()
        .filter(|&v| keep[v])
        .collect();
    let hidden: Vec<usize> = relevant
        .iter()
        .copied()
        .filter(|v| !query.evidence.contains_key(v))
        .collect();
    let completions: u128 = hidden.iter().map(|&v| cpts.cardinalities[v] as u128).product();
    if completions > MAX_COMPLETIONS {
        return Err(Error::Query(format!(
            "{completions} completions exceed the enumeration limit"
        )));
    }

    let mut x = vec![0usize; n];
    for (&v, &s) in &query.evidence {
        x[v] = s;
    }
    let mut dist = vec![0.0; cpts.cardinalities[query.target]];
    loop {
        let joint: f64 = relevant.iter().map(|&v| cpts.prob(v, &x)).product();
        dist[x[query.target]] += joint;
        // odometer over hidden variables, last one fastest
        let mut advanced = false;
        for &v in hidden.iter().rev() {
            x[v] += 1;
            if x[v] < cpts.cardinalities[v] {
                advanced = true;
                break;
            }
            x[v] = 0;
        }
        if !advanced {
            break;
        }
    }
    let total: f64 = dist.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    dist.iter_mut().for_each(|p| *p /= total);
    Ok(dist)
}

/// Binary-target prediction quality on a test table.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n_test: usize,
    pub mse: f64,
    pub accuracy: f64,
    /// `confusion[actual][predicted]`.
    pub confusion: [[u64; 2]; 2],
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.confusion;
        write!(
            f,
            "n_test = {}\nmse = {:.6}\naccuracy = {:.6}\nconfusion = [[{}, {}], [{}, {}]]",
            self.n_test, self.mse, self.accuracy, c[0][0], c[0][1], c[1][0], c[1][1]
        )
    }
}

/// Posterior `P(target = 1 | evidence)` for every test row, memoised on the
/// evidence values.
fn predictions(
    cpts: &CptSet,
    dag: &Dag,
    test: &DiscreteTable,
    target: usize,
    evidence_vars: &[usize],
) -> Result<Vec<f64>> {
    let n = dag.n();
    if test.n_vars() != n {
        return Err(Error::Query("test table does not match the network".into()));
    }
    if target >= n {
        return Err(Error::IndexOutOfRange { index: target, n });
    }
    if cpts.cardinalities[target] != 2 {
        return Err(Error::Query(format!(
            "target must be binary, it has {} states",
            cpts.cardinalities[target]
        )));
    }
    if evidence_vars.contains(&target) {
        return Err(Error::Query("target is listed as evidence".into()));
    }
    let mut memo: HashMap<Vec<usize>, f64> = HashMap::new();
    (0..test.n_rows())
        .map(|r| {
            let key: Vec<usize> = evidence_vars.iter().map(|&v| test.value(r, v)).collect();
            if let Some(&p) = memo.get(&key) {
                return Ok(p);
            }
            let query = Query::new(target, evidence_vars.iter().copied().zip(key.iter().copied()));
            let p = query_posterior(cpts, dag, &query)?[1];
            memo.insert(key, p);
            Ok(p)
        })
        .collect()
}

/// MSE, thresholded accuracy and confusion counts for a binary target.
/// State 1 is predicted iff `P(state 1) > threshold`.
pub fn evaluate_task(
    cpts: &CptSet,
    dag: &Dag,
    test: &DiscreteTable,
    target: usize,
    evidence_vars: &[usize],
    threshold: f64,
) -> Result<EvalReport> {
    let preds = predictions(cpts, dag, test, target, evidence_vars)?;
    if preds.is_empty() {
        return Err(Error::Query("test table is empty".into()));
    }
    let mut sq = 0.0;
    let mut confusion = [[0u64; 2]; 2];
    for (r, &p) in preds.iter().enumerate() {
        let y = test.value(r, target);
        sq += (p - y as f64).powi(2);
        confusion[y][usize::from(p > threshold)] += 1;
    }
    let nt = preds.len() as f64;
    Ok(EvalReport {
        n_test: preds.len(),
        mse: sq / nt,
        accuracy: (confusion[0][0] + confusion[1][1]) as f64 / nt,
        confusion,
    })
}

/// Mean over test rows of `(E[Y | evidence] − y)²`.
pub fn evaluate_mse(
    cpts: &CptSet,
    dag: &Dag,
    test: &DiscreteTable,
    target: usize,
    evidence_vars: &[usize],
) -> Result<f64> {
    Ok(evaluate_task(cpts, dag, test, target, evidence_vars, 0.5)?.mse)
}

pub fn evaluate_accuracy(
    cpts: &CptSet,
    dag: &Dag,
    test: &DiscreteTable,
    target: usize,
    evidence_vars: &[usize],
    threshold: f64,
) -> Result<f64> {
    Ok(evaluate_task(cpts, dag, test, target, evidence_vars, threshold)?.accuracy)
}

/// `Σ_rows Σ_v ln P(x_v | parents)`; `-∞` if any row has zero probability.
pub fn log_likelihood(cpts: &CptSet, dag: &Dag, table: &DiscreteTable) -> f64 {
    let mut total = 0.0;
    for r in 0..table.n_rows() {
        let x = table.row(r);
        for v in 0..dag.n() {
            total += cpts.prob(v, &x).ln();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ParentSet;

    fn single(p: [f64; 2]) -> (Dag, CptSet) {
        let dag = Dag::empty(1);
        let cpts = CptSet::from_tables(&dag, &[2], vec![vec![p.to_vec()]]).unwrap();
        (dag, cpts)
    }

    fn copy_chain() -> (Dag, CptSet) {
        let dag = Dag::from_parents(vec![ParentSet::empty(), ParentSet::new(vec![0])]).unwrap();
        let cpts = CptSet::from_tables(
            &dag,
            &[2, 2],
            vec![vec![vec![0.5, 0.5]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
        )
        .unwrap();
        (dag, cpts)
    }

    #[test]
    fn smoothing_formula() {
        let dag = Dag::empty(1);
        let t = DiscreteTable::from_rows(vec![2], &[vec![0], vec![0], vec![0], vec![1]]).unwrap();
        let cpts = fit_cpts(&t, &dag, 1.0).unwrap();
        assert!((cpts.row(0, &[0])[0] - 4.0 / 6.0).abs() < 1e-15);
        assert!((cpts.row(0, &[0])[1] - 2.0 / 6.0).abs() < 1e-15);

        let t = DiscreteTable::from_rows(vec![2], &[vec![0], vec![1], vec![0], vec![1]]).unwrap();
        assert_eq!(fit_cpts(&t, &dag, 1.0).unwrap().row(0, &[0]), &[0.5, 0.5]);

        let empty = DiscreteTable::from_rows(vec![2], &[]).unwrap();
        assert_eq!(fit_cpts(&empty, &dag, 0.0).unwrap().row(0, &[0]), &[0.5, 0.5]);
        assert!(fit_cpts(&t, &dag, -1.0).is_err());
    }

    #[test]
    fn marginal_query() {
        let (dag, cpts) = single([0.3, 0.7]);
        let post = query_posterior(&cpts, &dag, &Query::new(0, [])).unwrap();
        assert!((post[0] - 0.3).abs() < 1e-15 && (post[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn deterministic_copy_query() {
        let (dag, cpts) = copy_chain();
        let post = query_posterior(&cpts, &dag, &Query::new(1, [(0, 1)])).unwrap();
        assert_eq!(post, vec![0.0, 1.0]);
    }

    #[test]
    fn zero_evidence_is_reported() {
        let dag = Dag::from_parents(vec![ParentSet::empty(), ParentSet::new(vec![0])]).unwrap();
        let cpts = CptSet::from_tables(
            &dag,
            &[2, 2],
            vec![vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
        )
        .unwrap();
        let err = query_posterior(&cpts, &dag, &Query::new(1, [(0, 1)]));
        assert!(matches!(err, Err(Error::ZeroEvidence)));
    }

    #[test]
    fn invalid_queries() {
        let (dag, cpts) = copy_chain();
        assert!(query_posterior(&cpts, &dag, &Query::new(1, [(1, 0)])).is_err());
        assert!(query_posterior(&cpts, &dag, &Query::new(1, [(0, 2)])).is_err());
        assert!(query_posterior(&cpts, &dag, &Query::new(2, [])).is_err());
    }

    #[test]
    fn evaluation_extremes() {
        let (dag, cpts) = copy_chain();
        let test = DiscreteTable::from_rows(vec![2, 2], &[vec![0, 0], vec![1, 1], vec![1, 1]]).unwrap();
        let report = evaluate_task(&cpts, &dag, &test, 1, &[0], 0.5).unwrap();
        assert_eq!(report.mse, 0.0);
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.confusion, [[1, 0], [0, 2]]);

        // no evidence: constant 0.5 prediction
        assert_eq!(evaluate_mse(&cpts, &dag, &test, 1, &[]).unwrap(), 0.25);
    }

    #[test]
    fn evaluation_requires_binary_target() {
        let dag = Dag::empty(1);
        let cpts = CptSet::from_tables(&dag, &[3], vec![vec![vec![0.2, 0.3, 0.5]]]).unwrap();
        let test = DiscreteTable::from_rows(vec![3], &[vec![0]]).unwrap();
        assert!(evaluate_mse(&cpts, &dag, &test, 0, &[]).is_err());
    }

    #[test]
    fn log_likelihood_values() {
        let (dag, cpts) = single([0.5, 0.5]);
        let t = DiscreteTable::from_rows(vec![2], &[vec![0], vec![1], vec![1], vec![0]]).unwrap();
        assert!((log_likelihood(&cpts, &dag, &t) - 4.0 * 0.5f64.ln()).abs() < 1e-12);
        let empty = DiscreteTable::from_rows(vec![2], &[]).unwrap();
        assert_eq!(log_likelihood(&cpts, &dag, &empty), 0.0);
    }

    #[test]
    fn sampling_follows_cpts() {
        let (dag, cpts) = copy_chain();
        let t = cpts
            .sample_table(&dag, vec!["A".into(), "B".into()], 2000, 7)
            .unwrap();
        assert!((0..t.n_rows()).all(|r| t.value(r, 0) == t.value(r, 1)));
        let ones = t.column(0).iter().filter(|&&v| v == 1).count();
        assert!((800..1200).contains(&ones));
    }
}
