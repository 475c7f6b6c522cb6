use std::collections::HashMap;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::Ordering;
use crate::error::{Error, Result};
use crate::scoring::{ParentSet, Scorer};

/// Default cap on the number of parent subsets an exact search may visit.
pub const DEFAULT_SUBSET_BUDGET: u128 = 1_000_000;

/// Predecessor sets are memoised as `u64` bitmasks.
pub const MAX_ORACLE_VARIABLES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Enumerate every subset of the candidates up to the in-degree bound.
    ExactSubset,
    /// Add the single best improving parent until nothing improves.
    #[default]
    Greedy,
}

fn subsets_up_to(n: usize, k: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for i in 0..=k.min(n) {
        total += binom;
        binom = binom * (n - i) as u128 / (i + 1) as u128;
    }
    total
}

/// Best node score of `child` with parents drawn from `candidates`.
///
/// Exact mode breaks ties toward the lexicographically smallest parent set;
/// greedy mode prefers the lower candidate index on equal gain.
pub fn best_parent_score(
    scorer: &Scorer<'_>,
    child: usize,
    candidates: &[usize],
    max_in_degree: usize,
    mode: OracleMode,
    budget: u128,
) -> Result<(f64, ParentSet)> {
    let mut candidates = candidates.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.contains(&child) {
        return Err(Error::SelfParent(child));
    }
    match mode {
        OracleMode::ExactSubset => {
            let subsets = subsets_up_to(candidates.len(), max_in_degree);
            if subsets > budget {
                return Err(Error::SubsetBudget { subsets, budget });
            }
            let mut best = (scorer.node_score(child, &ParentSet::empty())?, ParentSet::empty());
            let mut stack = Vec::with_capacity(max_in_degree);
            exact_search(scorer, child, &candidates, max_in_degree, 0, &mut stack, &mut best)?;
            Ok(best)
        }
        OracleMode::Greedy => {
            let mut parents = ParentSet::empty();
            let mut score = scorer.node_score(child, &parents)?;
            while parents.len() < max_in_degree {
                let mut step: Option<(f64, usize)> = None;
                for &c in candidates.iter().filter(|&&c| !parents.contains(c)) {
                    let s = scorer.node_score(child, &parents.with(c))?;
                    if step.is_none_or(|(best, _)| s > best) {
                        step = Some((s, c));
                    }
                }
                match step {
                    Some((s, c)) if s > score => {
                        score = s;
                        parents = parents.with(c);
                    }
                    _ => break,
                }
            }
            Ok((score, parents))
        }
    }
}

// Depth-first over subsets in lexicographic order; only strict improvements
// replace the incumbent, so ties keep the lexicographically smallest set.
fn exact_search(
    scorer: &Scorer<'_>,
    child: usize,
    candidates: &[usize],
    k: usize,
    start: usize,
    stack: &mut Vec<usize>,
    best: &mut (f64, ParentSet),
) -> Result<()> {
    if stack.len() == k {
        return Ok(());
    }
    for i in start..candidates.len() {
        stack.push(candidates[i]);
        let parents = ParentSet::new(stack.clone());
        let s = scorer.node_score(child, &parents)?;
        if s > best.0 {
            *best = (s, parents);
        }
        exact_search(scorer, child, candidates, k, i + 1, stack, best)?;
        stack.pop();
    }
    Ok(())
}

/// `Cost(X, S) = -best_parent_score(X, S)`, memoised by `(X, S)`.
#[derive(Debug)]
pub struct CostOracle<'a> {
    scorer: Scorer<'a>,
    max_in_degree: usize,
    mode: OracleMode,
    budget: u128,
    paper_phi: bool,
    memo: RwLock<HashMap<(usize, u64), (f64, ParentSet)>>,
}

impl<'a> CostOracle<'a> {
    pub fn new(scorer: Scorer<'a>, max_in_degree: usize, mode: OracleMode) -> Result<Self> {
        let n = scorer.table().n_vars();
        if n > MAX_ORACLE_VARIABLES {
            return Err(Error::TooManyVariables {
                n,
                limit: MAX_ORACLE_VARIABLES,
                what: "the cost oracle",
            });
        }
        Ok(CostOracle {
            scorer,
            max_in_degree,
            mode,
            budget: DEFAULT_SUBSET_BUDGET,
            paper_phi: false,
            memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    /// When set, leaving the depot is free, so the first variable in a tour
    /// costs nothing instead of `-score(X | ∅)`.
    pub fn with_paper_phi_convention(mut self, enabled: bool) -> Self {
        self.paper_phi = enabled;
        self
    }

    pub fn n(&self) -> usize {
        self.scorer.table().n_vars()
    }

    pub fn scorer(&self) -> &Scorer<'a> {
        &self.scorer
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn max_in_degree(&self) -> usize {
        self.max_in_degree
    }

    pub fn paper_phi_convention(&self) -> bool {
        self.paper_phi
    }

    fn check(&self, x: usize, mask: u64) -> Result<()> {
        let n = self.n();
        if x >= n {
            return Err(Error::IndexOutOfRange { index: x, n });
        }
        if mask >> x & 1 == 1 {
            return Err(Error::SelfParent(x));
        }
        if n < 64 && mask >> n != 0 {
            return Err(Error::IndexOutOfRange {
                index: 63 - mask.leading_zeros() as usize,
                n,
            });
        }
        Ok(())
    }

    fn compute(&self, x: usize, mask: u64) -> Result<(f64, ParentSet)> {
        let candidates: Vec<usize> = (0..self.n()).filter(|&v| mask >> v & 1 == 1).collect();
        best_parent_score(
            &self.scorer,
            x,
            &candidates,
            self.max_in_degree,
            self.mode,
            self.budget,
        )
    }

    /// Best `(score, parents)` for `x` given the predecessor bitmask.
    pub fn best(&self, x: usize, mask: u64) -> Result<(f64, ParentSet)> {
        self.check(x, mask)?;
        if let Some(hit) = self.memo.read().get(&(x, mask)) {
            return Ok(hit.clone());
        }
        let value = self.compute(x, mask)?;
        self.memo.write().entry((x, mask)).or_insert_with(|| value.clone());
        Ok(value)
    }

    /// Same as [`best`](Self::best) but bypasses the `(X, S)` memo; node
    /// scores are still cached.
    pub fn best_uncached(&self, x: usize, mask: u64) -> Result<(f64, ParentSet)> {
        self.check(x, mask)?;
        if let Some(hit) = self.memo.read().get(&(x, mask)) {
            return Ok(hit.clone());
        }
        self.compute(x, mask)
    }

    pub fn cost_mask(&self, x: usize, mask: u64) -> Result<f64> {
        Ok(-self.best(x, mask)?.0)
    }

    pub fn cost(&self, x: usize, predecessors: &[usize]) -> Result<f64> {
        self.cost_mask(x, mask_of(predecessors))
    }

    /// Cost actually charged for a tour step, honouring the depot convention.
    pub fn step_cost_mask(&self, x: usize, mask: u64) -> Result<f64> {
        if self.paper_phi && mask == 0 {
            self.check(x, mask)?;
            return Ok(0.0);
        }
        self.cost_mask(x, mask)
    }

    pub(crate) fn step_cost_mask_uncached(&self, x: usize, mask: u64) -> Result<f64> {
        if self.paper_phi && mask == 0 {
            self.check(x, mask)?;
            return Ok(0.0);
        }
        Ok(-self.best_uncached(x, mask)?.0)
    }

    /// Per-position step costs of `perm` from index `from` onward, given the
    /// predecessor mask of `perm[..from]`.
    pub(crate) fn suffix_costs(&self, perm: &[usize], from: usize, out: &mut Vec<f64>) -> Result<()> {
        let mut mask = mask_of(&perm[..from]);
        for &x in &perm[from..] {
            out.push(self.step_cost_mask(x, mask)?);
            mask |= 1 << x;
        }
        Ok(())
    }

    /// History-dependent tour cost: `Σ_i Cost(perm[i], {perm[..i]})`.
    /// The edge back to the depot is free.
    pub fn tour_cost(&self, ordering: &Ordering) -> Result<f64> {
        if ordering.len() != self.n() {
            return Err(Error::InvalidOrdering(format!(
                "ordering has {} variables, table has {}",
                ordering.len(),
                self.n()
            )));
        }
        let mut costs = Vec::with_capacity(ordering.len());
        self.suffix_costs(ordering.as_slice(), 0, &mut costs)?;
        Ok(costs.iter().fold(0.0, |acc, c| acc + c))
    }
}

pub(crate) fn mask_of(vars: &[usize]) -> u64 {
    vars.iter().fold(0u64, |m, &v| m | 1 << v)
}
