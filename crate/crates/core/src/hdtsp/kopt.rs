//! 2-opt / 3-opt local search on the depot-rooted path.
//!
//! The depot is pinned before `perm[0]` and after `perm[n-1]`, so every move
//! is a rearrangement of the path. Because the cost of a city depends on the
//! whole prefix, a candidate is re-evaluated from its first changed position
//! to the end and accepted only on strict decrease.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CostOracle, Ordering, StaticCostMatrix};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KoptLevel {
    Two,
    Three,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KoptParams {
    pub level: KoptLevel,
    pub restarts: usize,
    pub seed: u64,
    pub max_no_improve: usize,
}

impl Default for KoptParams {
    fn default() -> Self {
        KoptParams {
            level: KoptLevel::Three,
            restarts: 10,
            seed: 0,
            max_no_improve: 5000,
        }
    }
}

/// Path rearrangements. With `A = perm[..i]`, `B = perm[i..j]`,
/// `C = perm[j..l]`, `D = perm[l..]`, the 3-opt variants are the seven
/// non-identity reconnections of `B` and `C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    /// Reverse `perm[i..=j]`.
    Reverse { i: usize, j: usize },
    ThreeOpt {
        i: usize,
        j: usize,
        l: usize,
        variant: u8,
    },
}

impl Move {
    pub fn first_changed(&self) -> usize {
        match *self {
            Move::Reverse { i, .. } | Move::ThreeOpt { i, .. } => i,
        }
    }

    pub fn apply(&self, perm: &[usize]) -> Vec<usize> {
        let mut out = perm.to_vec();
        match *self {
            Move::Reverse { i, j } => out[i..=j].reverse(),
            Move::ThreeOpt { i, j, l, variant } => {
                let b = &perm[i..j];
                let c = &perm[j..l];
                let rev = |s: &[usize]| s.iter().rev().copied().collect::<Vec<_>>();
                let middle: Vec<usize> = match variant {
                    0 => [rev(b), c.to_vec()].concat(),
                    1 => [b.to_vec(), rev(c)].concat(),
                    2 => [rev(b), rev(c)].concat(),
                    3 => [c.to_vec(), b.to_vec()].concat(),
                    4 => [c.to_vec(), rev(b)].concat(),
                    5 => [rev(c), b.to_vec()].concat(),
                    6 => [rev(c), rev(b)].concat(),
                    _ => unreachable!("3-opt variant out of range"),
                };
                out[i..l].copy_from_slice(&middle);
            }
        }
        out
    }

    pub fn neighbourhood(n: usize, level: KoptLevel) -> Vec<Move> {
        let mut moves = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                moves.push(Move::Reverse { i, j });
            }
        }
        if level == KoptLevel::Three {
            for i in 0..n {
                for j in i + 1..n {
                    for l in j + 1..=n {
                        moves.extend((0..7).map(|variant| Move::ThreeOpt { i, j, l, variant }));
                    }
                }
            }
        }
        moves
    }
}

#[derive(Clone, Debug)]
pub struct KoptOutcome {
    pub ordering: Ordering,
    pub cost: f64,
    /// Index of the restart that produced `ordering`.
    pub best_restart: usize,
    /// Incumbent cost after the start and after every accepted move, per restart.
    pub traces: Vec<Vec<f64>>,
}

struct RestartResult {
    perm: Vec<usize>,
    cost: f64,
    trace: Vec<f64>,
}

/// Greedy nearest-neighbour tour from the depot on the static matrix;
/// ties go to the lower variable index.
pub fn nearest_neighbor(matrix: &StaticCostMatrix) -> Ordering {
    let n = matrix.n();
    let mut visited = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut from = StaticCostMatrix::DEPOT;
    for _ in 0..n {
        let next = (0..n)
            .filter(|&v| !visited[v])
            .min_by(|&a, &b| {
                matrix
                    .get(from, StaticCostMatrix::city(a))
                    .total_cmp(&matrix.get(from, StaticCostMatrix::city(b)))
            })
            .expect("an unvisited variable remains");
        visited[next] = true;
        perm.push(next);
        from = StaticCostMatrix::city(next);
    }
    Ordering(perm)
}

fn cumulative(costs: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(costs.len() + 1);
    let mut acc = 0.0;
    cum.push(acc);
    for c in costs {
        acc += c;
        cum.push(acc);
    }
    cum
}

fn run_restart(
    start: Vec<usize>,
    oracle: &CostOracle<'_>,
    params: &KoptParams,
    rng: &mut ChaCha8Rng,
) -> Result<RestartResult> {
    let n = start.len();
    let mut perm = start;
    let mut costs = Vec::with_capacity(n);
    oracle.suffix_costs(&perm, 0, &mut costs)?;
    let mut cum = cumulative(&costs);
    let mut trace = vec![cum[n]];
    let mut rejected = 0usize;
    let mut scratch = Vec::with_capacity(n);

    'search: loop {
        let mut moves = Move::neighbourhood(n, params.level);
        moves.shuffle(rng);
        let mut improved = false;
        for mv in moves {
            let from = mv.first_changed();
            let candidate = mv.apply(&perm);
            scratch.clear();
            oracle.suffix_costs(&candidate, from, &mut scratch)?;
            let total = scratch.iter().fold(cum[from], |acc, c| acc + c);
            if total < cum[n] {
                perm = candidate;
                costs.truncate(from);
                costs.extend_from_slice(&scratch);
                cum = cumulative(&costs);
                trace.push(cum[n]);
                rejected = 0;
                improved = true;
                break;
            }
            rejected += 1;
            if rejected >= params.max_no_improve {
                break 'search;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(RestartResult {
        cost: cum[n],
        perm,
        trace,
    })
}

/// Multi-start k-opt search. Restart 0 starts from `initial`; restart `r > 0`
/// starts from a random permutation drawn with seed `seed + r`. Restarts run
/// in parallel and the cheapest result wins, earliest restart on ties.
pub fn kopt_local_search(
    initial: &Ordering,
    oracle: &CostOracle<'_>,
    params: &KoptParams,
) -> Result<KoptOutcome> {
    if initial.len() != oracle.n() {
        return Err(crate::error::Error::InvalidOrdering(format!(
            "initial ordering has {} variables, oracle has {}",
            initial.len(),
            oracle.n()
        )));
    }
    let restarts = params.restarts.max(1);
    let results = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(r as u64));
            let start = if r == 0 {
                initial.as_slice().to_vec()
            } else {
                let mut p: Vec<usize> = (0..initial.len()).collect();
                p.shuffle(&mut rng);
                p
            };
            run_restart(start, oracle, params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let (best_restart, best) = results
        .iter()
        .enumerate()
        .fold(None::<(usize, &RestartResult)>, |acc, (r, res)| match acc {
            Some((_, b)) if b.cost <= res.cost => acc,
            _ => Some((r, res)),
        })
        .expect("at least one restart");
    Ok(KoptOutcome {
        ordering: Ordering(best.perm.clone()),
        cost: best.cost,
        best_restart,
        traces: results.iter().map(|r| r.trace.clone()).collect(),
    })
}
