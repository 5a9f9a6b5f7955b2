//! Dyadic mixed-smoothness index sets.
//!
//! A level-`mu` block collects all pairs `(nu, m)` with `|nu|_1 = mu` and
//! `0 <= m_l < 2^{nu_l}`. Each pair names the box
//! `prod_l [m_l 2^{-nu_l}, (m_l + 1) 2^{-nu_l})` of the unit cube.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of indices any single call may materialise.
pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// Hard cap on materialised indices, grid cells and allocation ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget(pub u64);

impl Default for Budget {
    fn default() -> Self {
        Budget(DEFAULT_BUDGET)
    }
}

impl Budget {
    /// Reads `SNLAB_BUDGET` from the environment, falling back to the default.
    pub fn from_env() -> Self {
        std::env::var("SNLAB_BUDGET")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .map(Budget)
            .unwrap_or_default()
    }

    pub fn check(&self, count: u128) -> Result<()> {
        if count > self.0 as u128 {
            Err(Error::BudgetExceeded { count, budget: self.0 })
        } else {
            Ok(())
        }
    }
}

/// A pair `(nu, m)` on the dyadic mixed grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HyperbolicIndex {
    pub nu: Vec<u32>,
    pub m: Vec<u64>,
}

impl HyperbolicIndex {
    pub fn new(nu: Vec<u32>, m: Vec<u64>) -> Result<Self> {
        if nu.is_empty() || nu.len() != m.len() {
            return Err(Error::DimensionMismatch {
                expected: nu.len(),
                got: m.len(),
            });
        }
        for (&n, &pos) in nu.iter().zip(&m) {
            if n >= 64 || pos >= 1u64 << n {
                return Err(Error::InvalidParameter(format!("position {pos} outside 0..2^{n}")));
            }
        }
        Ok(Self { nu, m })
    }

    pub fn d(&self) -> usize {
        self.nu.len()
    }

    pub fn level(&self) -> u32 {
        self.nu.iter().sum()
    }

    /// Whether the point `x` of the unit cube lies in this box.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.nu.iter().zip(&self.m).zip(x).all(|((&n, &pos), &xi)| {
            let scaled = xi * (1u64 << n) as f64;
            scaled >= pos as f64 && scaled < (pos + 1) as f64
        })
    }
}

/// A level block with its exact dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub mu: u32,
    pub d: usize,
    pub dim: u128,
}

impl BlockSpec {
    pub fn new(mu: u32, d: usize) -> Result<Self> {
        Ok(Self {
            mu,
            d,
            dim: block_dim(mu, d)?,
        })
    }
}

/// Exact binomial coefficient `C(n, k)`.
pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::Overflow("binomial coefficient"))?
            / (i as u128 + 1);
    }
    Ok(acc)
}

fn check_d(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidParameter("dimension d must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Number of compositions of `mu` into `d` nonnegative parts, `C(mu+d-1, d-1)`.
pub fn composition_count(mu: u32, d: usize) -> Result<u128> {
    check_d(d)?;
    binomial(mu as u64 + d as u64 - 1, d as u64 - 1)
}

/// `D_mu = C(mu+d-1, d-1) * 2^mu`.
pub fn block_dim(mu: u32, d: usize) -> Result<u128> {
    let c = composition_count(mu, d)?;
    let pow = 1u128
        .checked_shl(mu)
        .filter(|_| mu < 128)
        .ok_or(Error::Overflow("2^mu"))?;
    c.checked_mul(pow).ok_or(Error::Overflow("block dimension"))
}

/// `sum_{mu <= j} D_mu`.
pub fn cumulative_dim(j: u32, d: usize) -> Result<u128> {
    (0..=j).try_fold(0u128, |acc, mu| {
        acc.checked_add(block_dim(mu, d)?)
            .ok_or(Error::Overflow("cumulative dimension"))
    })
}

/// All compositions of `mu` into `d` nonnegative parts in lexicographic order.
pub fn compositions(mu: u32, d: usize) -> Result<Vec<Vec<u32>>> {
    check_d(d)?;
    let mut out = Vec::new();
    let mut current = vec![0u32; d];
    fn rec(pos: usize, remaining: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let d = current.len();
        if pos == d - 1 {
            current[pos] = remaining;
            out.push(current.clone());
            return;
        }
        for v in 0..=remaining {
            current[pos] = v;
            rec(pos + 1, remaining - v, current, out);
        }
    }
    rec(0, mu, &mut current, &mut out);
    Ok(out)
}

/// Enumerates level `mu` with the default budget.
pub fn enumerate_level(mu: u32, d: usize) -> Result<Vec<HyperbolicIndex>> {
    enumerate_level_with_budget(mu, d, Budget::default())
}

/// Enumerates level `mu`, composition major and position minor.
pub fn enumerate_level_with_budget(mu: u32, d: usize, budget: Budget) -> Result<Vec<HyperbolicIndex>> {
    let dim = block_dim(mu, d)?;
    budget.check(dim)?;
    let mut out = Vec::with_capacity(dim as usize);
    for nu in compositions(mu, d)? {
        let sizes: Vec<u64> = nu.iter().map(|&n| 1u64 << n).collect();
        let mut m = vec![0u64; d];
        'positions: loop {
            out.push(HyperbolicIndex {
                nu: nu.clone(),
                m: m.clone(),
            });
            // Odometer increment, last coordinate fastest.
            for l in (0..d).rev() {
                m[l] += 1;
                if m[l] < sizes[l] {
                    continue 'positions;
                }
                m[l] = 0;
            }
            break;
        }
    }
    Ok(out)
}

/// Position of `idx` inside `enumerate_level(idx.level(), d)`.
pub fn level_position(idx: &HyperbolicIndex) -> Result<usize> {
    let d = idx.d();
    let mu = idx.level();
    let per = 1u128 << mu;
    let comps = compositions(mu, d)?;
    let c = comps
        .binary_search(&idx.nu)
        .map_err(|_| Error::InvalidParameter("composition not found".into()))?;
    let mut offset: u128 = 0;
    for (&n, &pos) in idx.nu.iter().zip(&idx.m) {
        offset = (offset << n) | pos as u128;
    }
    Ok((c as u128 * per + offset) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn root_level() {
        let v = enumerate_level(0, 2).unwrap();
        assert_eq!(
            v,
            vec![HyperbolicIndex {
                nu: vec![0, 0],
                m: vec![0, 0]
            }]
        );
        for d in 1..6 {
            assert_eq!(block_dim(0, d).unwrap(), 1);
        }
    }

    #[test]
    fn level_sizes() {
        assert_eq!(enumerate_level(3, 2).unwrap().len(), 32);
        assert_eq!(enumerate_level(2, 3).unwrap().len(), 24);
        assert_eq!(block_dim(3, 2).unwrap(), 32);
        assert_eq!(block_dim(5, 2).unwrap(), 192);
    }

    #[test]
    fn cumulative() {
        assert_eq!(cumulative_dim(0, 2).unwrap(), 1);
        assert_eq!(cumulative_dim(2, 2).unwrap(), 17);
        assert_eq!(cumulative_dim(3, 2).unwrap(), 49);
    }

    // Brute force: count all (nu, m) with nu_l <= mu by nested loops.
    fn brute_count(mu: u32, d: usize) -> u128 {
        let mut count = 0u128;
        let mut nu = vec![0u32; d];
        loop {
            if nu.iter().sum::<u32>() == mu {
                count += nu.iter().map(|&n| 1u128 << n).product::<u128>();
            }
            let mut l = 0;
            while l < d {
                nu[l] += 1;
                if nu[l] <= mu {
                    break;
                }
                nu[l] = 0;
                l += 1;
            }
            if l == d {
                return count;
            }
        }
    }

    #[test]
    fn formula_matches_brute_force() {
        for d in 1..=4 {
            for mu in 0..=6 {
                assert_eq!(block_dim(mu, d).unwrap(), brute_count(mu, d), "mu={mu} d={d}");
            }
        }
    }

    #[test]
    fn polynomial_ratio() {
        // D_mu / 2^mu = C(mu+d-1, d-1): for d = 3 this is (mu+1)(mu+2)/2.
        for mu in 1..=10u32 {
            let r = block_dim(mu, 3).unwrap() >> mu;
            assert_eq!(r, ((mu + 1) * (mu + 2) / 2) as u128);
            assert_eq!(block_dim(mu, 2).unwrap() >> mu, (mu + 1) as u128);
            assert_eq!(block_dim(mu, 1).unwrap() >> mu, 1);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = enumerate_level_with_budget(10, 3, Budget(1000)).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        assert!(block_dim(200, 2).is_err());
        assert!(block_dim(0, 0).is_err());
    }

    #[test]
    fn order_is_lexicographic() {
        let v = enumerate_level(3, 2).unwrap();
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        for (i, idx) in v.iter().enumerate() {
            assert_eq!(level_position(idx).unwrap(), i);
        }
    }

    #[test]
    fn boxes_tile_the_cube() {
        let d = 2;
        for mu in 0..=4 {
            let v = enumerate_level(mu, d).unwrap();
            let comps = composition_count(mu, d).unwrap() as usize;
            for a in 0..37 {
                for b in 0..37 {
                    let x = [(a as f64 + 0.5) / 37.0, (b as f64 + 0.5) / 37.0];
                    let hits: Vec<_> = v.iter().filter(|i| i.contains(&x)).collect();
                    assert_eq!(hits.len(), comps);
                    let nus: HashSet<_> = hits.iter().map(|i| i.nu.clone()).collect();
                    assert_eq!(nus.len(), comps);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn enumeration_has_no_duplicates(mu in 0u32..7, d in 1usize..4) {
            let v = enumerate_level(mu, d).unwrap();
            prop_assert_eq!(v.len() as u128, block_dim(mu, d).unwrap());
            let set: HashSet<_> = v.iter().collect();
            prop_assert_eq!(set.len(), v.len());
            for idx in &v {
                prop_assert_eq!(idx.level(), mu);
                prop_assert!(HyperbolicIndex::new(idx.nu.clone(), idx.m.clone()).is_ok());
            }
        }

        #[test]
        fn dims_monotone(mu in 0u32..40, d in 1usize..6) {
            prop_assert!(block_dim(mu + 1, d).unwrap() >= block_dim(mu, d).unwrap());
            prop_assert!(cumulative_dim(mu + 1, d).unwrap() > cumulative_dim(mu, d).unwrap());
        }
    }
}
