use bntsp_core::dataset::DiscreteTable;
use bntsp_core::hdtsp::{
    exact_dp_ordering, kopt_local_search, nearest_neighbor, parse_atsp, parse_tour, static_cost_matrix,
    write_atsp, write_tour, CostOracle, KoptLevel, KoptParams, Ordering, OracleMode, StaticCostMatrix,
};
use bntsp_core::scoring::{Metric, ParentSet, Scorer};
use bntsp_core::synthetic::{copy_chain_table, random_table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Best graph score consistent with `perm`, by enumerating every parent
/// subset of each node's predecessors up to size `k`.
fn brute_force_ordered_score(scorer: &Scorer<'_>, perm: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for (i, &v) in perm.iter().enumerate() {
        let preds = &perm[..i];
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << preds.len()) {
            if mask.count_ones() as usize > k {
                continue;
            }
            let parents: Vec<usize> = (0..preds.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| preds[b])
                .collect();
            best = best.max(scorer.compute(v, &ParentSet::new(parents)).unwrap());
        }
        total += best;
    }
    total
}

fn independent_uniform(n: usize) -> DiscreteTable {
    // every joint configuration of n binary variables appears equally often
    let rows: Vec<Vec<usize>> = (0..(1usize << n) * 25)
        .map(|r| (0..n).map(|b| (r >> b) & 1).collect())
        .collect();
    DiscreteTable::from_rows(vec![2; n], &rows).unwrap()
}

#[test]
fn telescoping_identity_on_random_orderings() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for inst in 0..10 {
        let n = 3 + inst % 4;
        let table = random_table(n, 150, 1000 + inst as u64).unwrap();
        let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 2, OracleMode::ExactSubset).unwrap();
        for _ in 0..5 {
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let cost = oracle.tour_cost(&Ordering::new(perm.clone()).unwrap()).unwrap();
            let best = brute_force_ordered_score(oracle.scorer(), &perm, 2);
            assert!((cost + best).abs() < 1e-9, "cost {cost} best {best}");
        }
    }
}

#[test]
fn exact_oracle_is_monotone_in_history() {
    let table = random_table(5, 200, 3).unwrap();
    let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 2, OracleMode::ExactSubset).unwrap();
    for x in 0..5 {
        let others: u64 = (0..5u64).filter(|&v| v != x as u64).fold(0, |m, v| m | 1 << v);
        for small in 0..32u64 {
            if small & !others != 0 {
                continue;
            }
            for big in 0..32u64 {
                if big & !others != 0 || small & !big != 0 {
                    continue;
                }
                assert!(oracle.cost_mask(x, big).unwrap() <= oracle.cost_mask(x, small).unwrap());
            }
        }
    }
}

#[test]
fn independent_variables_cost_the_same_in_any_order() {
    let table = independent_uniform(3);
    let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 3, OracleMode::ExactSubset).unwrap();
    let costs: Vec<f64> = permutations(3)
        .into_iter()
        .map(|p| oracle.tour_cost(&Ordering::new(p).unwrap()).unwrap())
        .collect();
    for c in &costs {
        assert!((c - costs[0]).abs() < 1e-9);
    }
}

#[test]
fn dp_matches_exhaustive_enumeration() {
    for inst in 0..8u64 {
        let n = 2 + (inst as usize % 6);
        let table = random_table(n, 200, 77 + inst).unwrap();
        for mode in [OracleMode::ExactSubset, OracleMode::Greedy] {
            let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 2, mode).unwrap();
            let (ord, cost) = exact_dp_ordering(&oracle, n).unwrap();
            let brute = permutations(n)
                .into_iter()
                .map(|p| oracle.tour_cost(&Ordering::new(p).unwrap()).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(cost, brute);
            assert_eq!(oracle.tour_cost(&ord).unwrap(), cost);
        }
    }
}

#[test]
fn dp_on_copy_chain_matches_chain_order_cost() {
    let table = copy_chain_table(3, 1000);
    let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 3, OracleMode::ExactSubset).unwrap();
    let (_, cost) = exact_dp_ordering(&oracle, 3).unwrap();
    let chain = oracle.tour_cost(&Ordering::identity(3)).unwrap();
    let brute = permutations(3)
        .into_iter()
        .map(|p| oracle.tour_cost(&Ordering::new(p).unwrap()).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(cost, brute);
    assert!((cost - chain).abs() < 1e-9);
}

#[test]
fn paper_phi_convention_drops_first_marginal() {
    let table = random_table(4, 100, 5).unwrap();
    let plain = CostOracle::new(Scorer::new(&table, Metric::K2), 2, OracleMode::ExactSubset).unwrap();
    let phi = CostOracle::new(Scorer::new(&table, Metric::K2), 2, OracleMode::ExactSubset)
        .unwrap()
        .with_paper_phi_convention(true);
    let ord = Ordering::new(vec![2, 0, 3, 1]).unwrap();
    let diff = plain.tour_cost(&ord).unwrap() - phi.tour_cost(&ord).unwrap();
    assert!((diff - plain.cost(2, &[]).unwrap()).abs() < 1e-9);
    let m = static_cost_matrix(&phi).unwrap();
    assert!((0..4).all(|j| m.get(StaticCostMatrix::DEPOT, StaticCostMatrix::city(j)) == 0.0));
    let (_, c) = exact_dp_ordering(&phi, 4).unwrap();
    let brute = permutations(4)
        .into_iter()
        .map(|p| phi.tour_cost(&Ordering::new(p).unwrap()).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(c, brute);
}

#[test]
fn kopt_never_worsens_and_solves_two_cities() {
    for seed in 0..5u64 {
        let table = random_table(2, 100, seed).unwrap();
        let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 2, OracleMode::Greedy).unwrap();
        let start = Ordering::identity(2);
        let params = KoptParams {
            level: KoptLevel::Two,
            restarts: 1,
            seed,
            max_no_improve: 100,
        };
        let out = kopt_local_search(&start, &oracle, &params).unwrap();
        let a = oracle.tour_cost(&Ordering::new(vec![0, 1]).unwrap()).unwrap();
        let b = oracle.tour_cost(&Ordering::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(out.cost, a.min(b));
    }
}

#[test]
fn kopt_from_optimum_stays_put() {
    let table = random_table(6, 200, 9).unwrap();
    let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 2, OracleMode::ExactSubset).unwrap();
    let (opt, cost) = exact_dp_ordering(&oracle, 6).unwrap();
    let params = KoptParams {
        level: KoptLevel::Three,
        restarts: 1,
        seed: 1,
        max_no_improve: 10_000,
    };
    let out = kopt_local_search(&opt, &oracle, &params).unwrap();
    assert_eq!(out.cost, cost);
    assert_eq!(out.traces[0], vec![cost]);
}

#[test]
fn kopt_traces_are_monotone_and_deterministic() {
    let table = random_table(7, 200, 21).unwrap();
    let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 2, OracleMode::Greedy).unwrap();
    let matrix = static_cost_matrix(&oracle).unwrap();
    let start = nearest_neighbor(&matrix);
    for level in [KoptLevel::Two, KoptLevel::Three] {
        let params = KoptParams {
            level,
            restarts: 6,
            seed: 99,
            max_no_improve: 2000,
        };
        let a = kopt_local_search(&start, &oracle, &params).unwrap();
        let b = kopt_local_search(&start, &oracle, &params).unwrap();
        assert_eq!(a.ordering, b.ordering);
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        for trace in &a.traces {
            assert!(trace.windows(2).all(|w| w[1] < w[0]));
        }
        assert!(a.cost <= a.traces[0][0]);
        assert_eq!(oracle.tour_cost(&a.ordering).unwrap(), a.cost);
    }
}

#[test]
fn static_matrix_conventions() {
    let table = copy_chain_table(2, 1000);
    let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 3, OracleMode::ExactSubset).unwrap();
    let m = static_cost_matrix(&oracle).unwrap();
    assert_eq!(m.dim(), 3);
    for i in 0..2 {
        assert_eq!(m.get(StaticCostMatrix::city(i), StaticCostMatrix::DEPOT), 0.0);
        assert!(m.get(StaticCostMatrix::city(i), StaticCostMatrix::city(i)).is_infinite());
    }
    assert!(m.get(StaticCostMatrix::city(0), StaticCostMatrix::city(1)) < m.get(StaticCostMatrix::DEPOT, StaticCostMatrix::city(1)));

    let indep = independent_uniform(3);
    let oracle = CostOracle::new(Scorer::new(&indep, Metric::K2), 1, OracleMode::ExactSubset).unwrap();
    let m = static_cost_matrix(&oracle).unwrap();
    for j in 0..3 {
        for i in (0..3).filter(|&i| i != j) {
            let c_ij = m.get(StaticCostMatrix::city(i), StaticCostMatrix::city(j));
            let c_phi = m.get(StaticCostMatrix::DEPOT, StaticCostMatrix::city(j));
            assert!((c_ij - c_phi).abs() < 1e-9);
        }
    }
}

#[test]
fn tsplib_export_import_with_brute_force_solution() {
    let table = random_table(4, 200, 4).unwrap();
    let oracle = CostOracle::new(Scorer::new(&table, Metric::K2), 2, OracleMode::Greedy).unwrap();
    let matrix = static_cost_matrix(&oracle).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("p.atsp");
    bntsp_core::hdtsp::export_tsplib(&matrix, &problem, "p").unwrap();

    // an "external" solver: brute force on the parsed integer matrix
    let (dim, w) = parse_atsp(&std::fs::read_to_string(&problem).unwrap()).unwrap();
    assert_eq!(dim, 5);
    let best = permutations(4)
        .into_iter()
        .min_by_key(|p| {
            let mut from = 0;
            let mut total = 0;
            for &v in p {
                total += w[from * dim + v + 1];
                from = v + 1;
            }
            total + w[from * dim]
        })
        .unwrap();
    let tour_path = dir.path().join("p.tour");
    std::fs::write(&tour_path, write_tour(&Ordering::new(best.clone()).unwrap(), "p")).unwrap();
    let back = bntsp_core::hdtsp::import_tour(&tour_path, 4).unwrap();
    assert_eq!(back.as_slice(), best.as_slice());
}

#[test]
fn rescaling_keeps_the_argmin_when_gaps_allow() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let dim = 6;
        let entries: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-50.0..900.0)).collect();
        let m = StaticCostMatrix::from_entries(dim, entries).unwrap();
        let r = m.rescale();
        let tours: Vec<Ordering> = permutations(5)
            .into_iter()
            .map(|p| Ordering::new(p).unwrap())
            .collect();
        let best = tours.iter().map(|t| m.tour_cost(t)).fold(f64::INFINITY, f64::min);
        let picked = tours.iter().min_by_key(|t| r.tour_weight(t)).unwrap();
        let slack = dim as f64 * r.step;
        assert!(m.tour_cost(picked) - best <= slack);
        let _ = parse_tour(&write_tour(picked, "x"), 5).unwrap();
        let (_, w) = parse_atsp(&write_atsp(&m, "x")).unwrap();
        assert_eq!(w, r.weights);
    }
}
