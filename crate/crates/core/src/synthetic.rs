//! Random networks and data for tests, benchmarks and demos.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::DiscreteTable;
use crate::error::Result;
use crate::hdtsp::Ordering;
use crate::inference::CptSet;
use crate::scoring::ParentSet;
use crate::structure::Dag;

fn random_row(r: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..r).map(|_| rng.random::<f64>() + 0.05).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / sum).collect()
}

/// Random DAG over a shuffled ordering; each node takes up to `max_parents`
/// earlier nodes as parents.
pub fn random_dag(n: usize, max_parents: usize, rng: &mut impl Rng) -> Dag {
    let mut perm: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), rng);
    let mut parents = vec![ParentSet::empty(); n];
    for i in 1..n {
        let k = rng.random_range(0..=max_parents.min(i));
        let picked = sample(rng, i, k).into_iter().map(|p| perm[p]).collect();
        parents[perm[i]] = ParentSet::new(picked);
    }
    Dag::new(parents, Ordering::new(perm).expect("shuffled identity")).expect("parents precede")
}

pub fn random_cpts(dag: &Dag, cardinalities: &[usize], rng: &mut impl Rng) -> CptSet {
    let tables = (0..dag.n())
        .map(|v| {
            let q: usize = dag.parents_of(v).members().iter().map(|&p| cardinalities[p]).product();
            (0..q).map(|_| random_row(cardinalities[v], rng)).collect()
        })
        .collect();
    CptSet::from_tables(dag, cardinalities, tables).expect("rows are normalised")
}

/// Samples `m` rows from a random network with `n` variables of 2–3 states.
pub fn random_table(n: usize, m: usize, seed: u64) -> Result<DiscreteTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3)).collect();
    let dag = random_dag(n, 2, &mut rng);
    let cpts = random_cpts(&dag, &cards, &mut rng);
    let rows = cpts.sample(&dag, m, &mut rng);
    DiscreteTable::from_rows(cards, &rows)
}

/// Binary network where every child copies its parent with probability
/// `fidelity`; roots are uniform.
pub fn noisy_copy_network(parents: Vec<ParentSet>, fidelity: f64) -> Result<(Dag, CptSet)> {
    let dag = Dag::from_parents(parents)?;
    let cards = vec![2; dag.n()];
    let tables = (0..dag.n())
        .map(|v| {
            let ps = dag.parents_of(v);
            if ps.is_empty() {
                return vec![vec![0.5, 0.5]];
            }
            // single-parent copy; with several parents copy the first one
            let q = 1usize << ps.len();
            (0..q)
                .map(|j| {
                    let first = j >> (ps.len() - 1) & 1;
                    if first == 0 {
                        vec![fidelity, 1.0 - fidelity]
                    } else {
                        vec![1.0 - fidelity, fidelity]
                    }
                })
                .collect()
        })
        .collect();
    let cpts = CptSet::from_tables(&dag, &cards, tables)?;
    Ok((dag, cpts))
}

/// `n` binary columns where column `i > 0` is an exact copy of column
/// `i - 1` and column 0 alternates over `m` rows.
pub fn copy_chain_table(n: usize, m: usize) -> DiscreteTable {
    let rows: Vec<Vec<usize>> = (0..m).map(|r| vec![r % 2; n]).collect();
    let names = (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
    DiscreteTable::from_rows_named(names, vec![2; n], &rows).expect("binary rows")
}

/// Samples `m` rows from the binary chain `X0 → X1 → … → X(n-1)` where each
/// link copies with probability `fidelity`. Columns are named `A`, `B`, ….
pub fn noisy_chain_table(n: usize, m: usize, fidelity: f64, seed: u64) -> Result<DiscreteTable> {
    let parents = (0..n)
        .map(|v| if v == 0 { ParentSet::empty() } else { ParentSet::new(vec![v - 1]) })
        .collect();
    let (dag, cpts) = noisy_copy_network(parents, fidelity)?;
    let names = (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
    cpts.sample_table(&dag, names, m, seed)
}
