use bntsp_core::dataset::DiscreteTable;
use bntsp_core::scoring::{count_contingency, graph_score, k2_node_score, Metric, ParentSet, Scorer};
use bntsp_core::structure::Dag;
use bntsp_core::synthetic::{copy_chain_table, random_dag};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn factorial(n: u64) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// K2 term straight from factorials: Π_j (r-1)!/(N_ij+r-1)! Π_k N_ijk!.
fn k2_factorial_oracle(rows: &[Vec<u64>]) -> f64 {
    rows.iter()
        .map(|row| {
            let r = row.len() as u64;
            let n_ij: u64 = row.iter().sum();
            let num = factorial(r - 1) * row.iter().map(|&c| factorial(c)).product::<f64>();
            (num / factorial(n_ij + r - 1)).ln()
        })
        .sum()
}

#[test]
fn k2_matches_factorial_oracle_on_small_counts() {
    // child counts [1, 2], no parents
    let t = DiscreteTable::from_rows(vec![2], &[vec![0], vec![1], vec![1]]).unwrap();
    let c = count_contingency(&t, 0, &ParentSet::empty()).unwrap();
    let oracle = k2_factorial_oracle(&[vec![1, 2]]);
    assert!((oracle - (1.0f64 / 12.0).ln()).abs() < 1e-12);
    assert!((k2_node_score(&c) - oracle).abs() < 1e-9);

    // N = [[1,1],[0,1]]
    let t = DiscreteTable::from_rows(vec![2, 2], &[vec![0, 0], vec![0, 1], vec![1, 1]]).unwrap();
    let c = count_contingency(&t, 1, &ParentSet::new(vec![0])).unwrap();
    let oracle = k2_factorial_oracle(&[vec![1, 1], vec![0, 1]]);
    assert!((oracle - ((1.0f64 / 6.0).ln() + 0.5f64.ln())).abs() < 1e-12);
    assert!((k2_node_score(&c) - oracle).abs() < 1e-9);
    assert!((k2_node_score(&c) - (-2.4849)).abs() < 1e-4);
}

#[test]
fn k2_on_empty_data_is_zero() {
    let t = DiscreteTable::from_rows(vec![3, 2], &[]).unwrap();
    let c = count_contingency(&t, 0, &ParentSet::new(vec![1])).unwrap();
    assert_eq!(k2_node_score(&c), 0.0);
}

#[test]
fn copy_parent_raises_k2() {
    let t = copy_chain_table(2, 1000);
    let scorer = Scorer::new(&t, Metric::K2);
    let alone = scorer.node_score(1, &ParentSet::empty()).unwrap();
    let with_copy = scorer.node_score(1, &ParentSet::new(vec![0])).unwrap();
    assert!(with_copy > alone);
    // ln(1! · 500! · 500! / 1001!) by summing logarithms
    let ln_fact = |n: u64| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    let o_alone = 2.0 * ln_fact(500) - ln_fact(1001);
    assert!((alone - o_alone).abs() < 1e-6);
}

#[test]
fn in_degree_bound_is_enforced() {
    let t = copy_chain_table(3, 10);
    let scorer = Scorer::new(&t, Metric::K2);
    let dag = Dag::from_parents(vec![
        ParentSet::empty(),
        ParentSet::empty(),
        ParentSet::new(vec![0, 1]),
    ])
    .unwrap();
    assert!(graph_score(&scorer, &dag, 1).is_err());
    assert!(graph_score(&scorer, &dag, 2).is_ok());
}

fn table_strategy() -> impl Strategy<Value = DiscreteTable> {
    (2usize..=6, 1usize..=60).prop_flat_map(|(n, m)| {
        proptest::collection::vec(2usize..=3, n).prop_flat_map(move |cards| {
            let row = cards.iter().map(|&r| 0..r).collect::<Vec<_>>();
            proptest::collection::vec(row, m)
                .prop_map(move |rows| DiscreteTable::from_rows(cards.clone(), &rows).unwrap())
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_score_is_sum_of_node_scores(table in table_strategy(), seed in any::<u64>()) {
        let dag = random_dag(table.n_vars(), 3, &mut ChaCha8Rng::seed_from_u64(seed));
        for metric in [Metric::K2, Metric::Bic] {
            let scorer = Scorer::new(&table, metric);
            let total = graph_score(&scorer, &dag, 3).unwrap();
            let fresh = Scorer::new(&table, metric);
            let sum: f64 = (0..dag.n())
                .map(|v| fresh.compute(v, dag.parents_of(v)).unwrap())
                .sum();
            prop_assert!((total - sum).abs() < 1e-9);
        }
    }

    #[test]
    fn k2_is_invariant_to_row_and_parent_order(table in table_strategy(), seed in any::<u64>()) {
        let n = table.n_vars();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<usize> = (0..table.n_rows()).collect();
        rand::seq::SliceRandom::shuffle(rows.as_mut_slice(), &mut rng);
        let shuffled = table.select_rows(&rows);
        let parents: Vec<usize> = (1..n).rev().collect();
        let a = Scorer::new(&table, Metric::K2).compute(0, &ParentSet::new(parents.clone())).unwrap();
        let b = Scorer::new(&shuffled, Metric::K2).compute(0, &ParentSet::from(&parents[..])).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a <= 0.0);
    }

    #[test]
    fn cache_is_transparent(table in table_strategy(), seed in any::<u64>()) {
        let dag = random_dag(table.n_vars(), 2, &mut ChaCha8Rng::seed_from_u64(seed));
        let scorer = Scorer::new(&table, Metric::K2);
        let cold = graph_score(&scorer, &dag, 3).unwrap();
        let warm = graph_score(&scorer, &dag, 3).unwrap();
        prop_assert_eq!(cold.to_bits(), warm.to_bits());
        for v in 0..dag.n() {
            let cached = scorer.cache().get(v, dag.parents_of(v)).unwrap();
            prop_assert_eq!(cached.to_bits(), scorer.compute(v, dag.parents_of(v)).unwrap().to_bits());
        }
        scorer.cache().clear();
        prop_assert_eq!(graph_score(&scorer, &dag, 3).unwrap().to_bits(), cold.to_bits());
    }

    #[test]
    fn changing_one_parent_set_changes_score_locally(table in table_strategy(), seed in any::<u64>()) {
        let n = table.n_vars();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = random_dag(n, 2, &mut rng);
        // drop all parents of the last node in the ordering
        let last = *dag.ordering().as_slice().last().unwrap();
        let mut parents = dag.parents().to_vec();
        parents[last] = ParentSet::empty();
        let other = Dag::new(parents, dag.ordering().clone()).unwrap();
        let scorer = Scorer::new(&table, Metric::K2);
        let diff = graph_score(&scorer, &dag, 3).unwrap() - graph_score(&scorer, &other, 3).unwrap();
        let local = scorer.node_score(last, dag.parents_of(last)).unwrap()
            - scorer.node_score(last, &ParentSet::empty()).unwrap();
        prop_assert!((diff - local).abs() < 1e-9);
    }
}
