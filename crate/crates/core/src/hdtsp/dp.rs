use super::{CostOracle, Ordering};
use crate::error::{Error, Result};

pub const MAX_DP_VARIABLES: usize = 20;

/// Exact minimum-cost ordering by dynamic programming over subsets:
/// `V(S) = min_{X ∈ S} V(S \ X) + Cost(X, S \ X)`, `V(∅) = 0`.
///
/// Ties go to the smallest variable index as the last element of `S`.
pub fn exact_dp_ordering(oracle: &CostOracle<'_>, n: usize) -> Result<(Ordering, f64)> {
    if n != oracle.n() {
        return Err(Error::InvalidOrdering(format!(
            "asked for {n} variables, oracle has {}",
            oracle.n()
        )));
    }
    if n > MAX_DP_VARIABLES {
        return Err(Error::TooManyVariables {
            n,
            limit: MAX_DP_VARIABLES,
            what: "the exact dynamic program",
        });
    }
    let full = (1usize << n) - 1;
    let mut value = vec![f64::INFINITY; full + 1];
    let mut last = vec![usize::MAX; full + 1];
    value[0] = 0.0;
    for set in 1..=full {
        for x in (0..n).filter(|&x| set >> x & 1 == 1) {
            let rest = set & !(1 << x);
            let v = value[rest] + oracle.step_cost_mask_uncached(x, rest as u64)?;
            if v < value[set] {
                value[set] = v;
                last[set] = x;
            }
        }
    }
    let mut perm = Vec::with_capacity(n);
    let mut set = full;
    while set != 0 {
        let x = last[set];
        perm.push(x);
        set &= !(1 << x);
    }
    perm.reverse();
    Ok((Ordering::new(perm)?, value[full]))
}
