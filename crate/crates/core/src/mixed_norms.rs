//! Finitely supported coefficient arrays on the hyperbolic grid and their
//! f-scale and b-scale quasi-norms.
//!
//! Under the tiling model every characteristic function `chi_{nu,m}` is
//! constant on the cells of the tensor grid with `2^{R_l}` cells along
//! coordinate `l`, where `R_l` is the largest `nu_l` in the support. The
//! f-norm integrand is therefore piecewise constant and is integrated exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic_index::{enumerate_level_with_budget, Budget, HyperbolicIndex};

/// Which sequence-space scale a norm lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    F,
    B,
}

/// Parameters `(t, p, q)` of a mixed-smoothness sequence norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub scale: Scale,
    pub t: f64,
    pub p: f64,
    pub q: f64,
}

impl NormSpec {
    /// Validated constructor. `p >= 1` finite, `q > 0` or `q = inf`.
    pub fn new(scale: Scale, t: f64, p: f64, q: f64) -> Result<Self> {
        let spec = Self { scale, t, p, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn f(t: f64, p: f64) -> Result<Self> {
        Self::new(Scale::F, t, p, 2.0)
    }

    pub fn b(t: f64, p: f64) -> Result<Self> {
        Self::new(Scale::B, t, p, 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p = {} must be finite and >= 1",
                self.p
            )));
        }
        if self.q.is_nan() || self.q <= 0.0 {
            return Err(Error::InvalidParameter(format!("q = {} must be positive", self.q)));
        }
        if !self.t.is_finite() {
            return Err(Error::InvalidParameter(format!("t = {} must be finite", self.t)));
        }
        Ok(())
    }
}

/// A finitely supported coefficient array. Absent keys are zero.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceElement {
    pub d: usize,
    pub max_level: u32,
    coeffs: BTreeMap<HyperbolicIndex, f64>,
}

impl SequenceElement {
    pub fn zero(d: usize, max_level: u32) -> Self {
        Self {
            d,
            max_level,
            coeffs: BTreeMap::new(),
        }
    }

    /// Builds an element from `(index, value)` pairs, summing repeated keys.
    pub fn from_pairs(
        d: usize,
        max_level: u32,
        pairs: impl IntoIterator<Item = (HyperbolicIndex, f64)>,
    ) -> Result<Self> {
        let mut out = Self::zero(d, max_level);
        for (idx, v) in pairs {
            out.add(idx, v)?;
        }
        Ok(out)
    }

    /// Places `values` on level `mu` in enumeration order.
    pub fn from_level(d: usize, mu: u32, values: &[f64], budget: Budget) -> Result<Self> {
        let indices = enumerate_level_with_budget(mu, d, budget)?;
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                got: values.len(),
            });
        }
        Self::from_pairs(d, mu, indices.into_iter().zip(values.iter().copied()))
    }

    pub fn add(&mut self, idx: HyperbolicIndex, value: f64) -> Result<()> {
        if idx.d() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: idx.d(),
            });
        }
        if idx.level() > self.max_level {
            return Err(Error::InvalidParameter(format!(
                "index level {} above max_level {}",
                idx.level(),
                self.max_level
            )));
        }
        *self.coeffs.entry(idx).or_insert(0.0) += value;
        Ok(())
    }

    pub fn get(&self, idx: &HyperbolicIndex) -> f64 {
        self.coeffs.get(idx).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HyperbolicIndex, f64)> {
        self.coeffs.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.values_mut().for_each(|v| *v *= c);
        out
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let mut out = self.clone();
        out.max_level = self.max_level.max(other.max_level);
        for (k, v) in other.iter() {
            out.add(k.clone(), v)?;
        }
        Ok(out)
    }

    /// Coefficientwise equality treating absent keys as zero.
    pub fn same_coefficients(&self, other: &Self, tol: f64) -> bool {
        self.iter().all(|(k, v)| (v - other.get(k)).abs() <= tol)
            && other.iter().all(|(k, v)| (v - self.get(k)).abs() <= tol)
    }

    /// Line format: header `d max_level`, then `nu_1 .. nu_d m_1 .. m_d value`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.d, self.max_level);
        for (k, v) in self.iter() {
            for n in &k.nu {
                let _ = write!(s, "{n} ");
            }
            for m in &k.m {
                let _ = write!(s, "{m} ");
            }
            let _ = writeln!(s, "{v:e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.into(),
        };
        if head.len() != 2 {
            return Err(parse_err(0, "header must be `d max_level`"));
        }
        let d: usize = head[0].parse().map_err(|_| parse_err(0, "bad d"))?;
        let max_level: u32 = head[1].parse().map_err(|_| parse_err(0, "bad max_level"))?;
        let mut out = Self::zero(d, max_level);
        for (i, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 * d + 1 {
                return Err(parse_err(i, "wrong field count"));
            }
            let nu = fields[..d]
                .iter()
                .map(|f| f.parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| parse_err(i, "bad nu"))?;
            let m = fields[d..2 * d]
                .iter()
                .map(|f| f.parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| parse_err(i, "bad m"))?;
            let v: f64 = fields[2 * d].parse().map_err(|_| parse_err(i, "bad value"))?;
            let idx = HyperbolicIndex::new(nu, m).map_err(|e| parse_err(i, &e.to_string()))?;
            out.add(idx, v).map_err(|e| parse_err(i, &e.to_string()))?;
        }
        Ok(out)
    }
}

/// Keeps exactly the coefficients on level `mu`.
pub fn block_restrict(lambda: &SequenceElement, mu: u32) -> SequenceElement {
    SequenceElement {
        d: lambda.d,
        max_level: lambda.max_level,
        coeffs: lambda
            .coeffs
            .iter()
            .filter(|(k, _)| k.level() == mu)
            .map(|(k, &v)| (k.clone(), v))
            .collect(),
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Evaluates the norm selected by `spec.scale`.
pub fn norm(lambda: &SequenceElement, spec: &NormSpec, budget: Budget) -> Result<f64> {
    match spec.scale {
        Scale::F => f_norm(lambda, spec, budget),
        Scale::B => b_norm(lambda, spec),
    }
}

/// Exact f-scale norm by cellwise integration on the finest tensor grid.
pub fn f_norm(lambda: &SequenceElement, spec: &NormSpec, budget: Budget) -> Result<f64> {
    spec.validate()?;
    let d = lambda.d;
    let nonzero: Vec<(&HyperbolicIndex, f64)> = lambda.iter().filter(|(_, v)| *v != 0.0).collect();
    if nonzero.is_empty() {
        return Ok(0.0);
    }
    let mut res = vec![0u32; d];
    for (k, _) in &nonzero {
        for (r, &n) in res.iter_mut().zip(&k.nu) {
            *r = (*r).max(n);
        }
    }
    let total_bits: u32 = res.iter().sum();
    if total_bits >= 64 {
        return Err(Error::BudgetExceeded {
            count: u128::MAX,
            budget: budget.0,
        });
    }
    budget.check(1u128 << total_bits)?;
    let cells = 1usize << total_bits;
    // Row-major strides, last coordinate fastest.
    let mut strides = vec![1usize; d];
    for l in (0..d.saturating_sub(1)).rev() {
        strides[l] = strides[l + 1] << res[l + 1];
    }
    let inf_q = spec.q.is_infinite();
    let mut acc = vec![0.0f64; cells];
    for (k, v) in &nonzero {
        let weight = (2f64.powf(k.level() as f64 * spec.t) * v.abs()).max(0.0);
        let contribution = if inf_q { weight } else { weight.powf(spec.q) };
        let ranges: Vec<(usize, usize)> = (0..d)
            .map(|l| {
                let shift = res[l] - k.nu[l];
                let lo = (k.m[l] as usize) << shift;
                (lo, lo + (1usize << shift))
            })
            .collect();
        paint(&mut acc, &ranges, &strides, contribution, inf_q);
    }
    let vol = 0.5f64.powi(total_bits as i32);
    let expo = if inf_q { spec.p } else { spec.p / spec.q };
    let integral = compensated_sum(acc.iter().map(|&a| if a == 0.0 { 0.0 } else { a.powf(expo) }));
    Ok((vol * integral).powf(1.0 / spec.p))
}

fn paint(acc: &mut [f64], ranges: &[(usize, usize)], strides: &[usize], value: f64, max: bool) {
    let d = ranges.len();
    let mut pos: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    'cells: loop {
        let cell: usize = pos.iter().zip(strides).map(|(p, s)| p * s).sum();
        if max {
            acc[cell] = acc[cell].max(value);
        } else {
            acc[cell] += value;
        }
        for l in (0..d).rev() {
            pos[l] += 1;
            if pos[l] < ranges[l].1 {
                continue 'cells;
            }
            pos[l] = ranges[l].0;
        }
        break;
    }
}

/// b-scale norm: `l_q` over `nu` of `2^{|nu|(t - 1/p)} * ||lambda_nu||_p`.
pub fn b_norm(lambda: &SequenceElement, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    let mut per_nu: BTreeMap<&[u32], Vec<f64>> = BTreeMap::new();
    for (k, v) in lambda.iter() {
        per_nu.entry(k.nu.as_slice()).or_default().push(v.abs().powf(spec.p));
    }
    let weighted = per_nu.iter().map(|(nu, pw)| {
        let level: u32 = nu.iter().sum();
        2f64.powf(level as f64 * (spec.t - 1.0 / spec.p)) * compensated_sum(pw.iter().copied()).powf(1.0 / spec.p)
    });
    if spec.q.is_infinite() {
        Ok(weighted.fold(0.0, f64::max))
    } else {
        let terms: Vec<f64> = weighted.map(|w| w.powf(spec.q)).collect();
        Ok(compensated_sum(terms).powf(1.0 / spec.q))
    }
}

/// Closed form of either norm for a single-level element when `q = p`.
pub fn single_level_norm(mu: u32, t: f64, p: f64, values: &[f64]) -> f64 {
    let lp = compensated_sum(values.iter().map(|v| v.abs().powf(p))).powf(1.0 / p);
    2f64.powf(mu as f64 * (t - 1.0 / p)) * lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic_index::{block_dim, composition_count};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn idx(nu: &[u32], m: &[u64]) -> HyperbolicIndex {
        HyperbolicIndex::new(nu.to_vec(), m.to_vec()).unwrap()
    }

    fn b() -> Budget {
        Budget::default()
    }

    #[test]
    fn root_coefficient_has_unit_norm() {
        let lam = SequenceElement::from_pairs(2, 0, [(idx(&[0, 0], &[0, 0]), 1.0)]).unwrap();
        for &(t, p, q) in &[(0.0, 2.0, 2.0), (1.5, 3.0, 1.0), (-1.0, 1.2, f64::INFINITY)] {
            let spec = NormSpec::new(Scale::F, t, p, q).unwrap();
            assert_relative_eq!(f_norm(&lam, &spec, b()).unwrap(), 1.0, max_relative = 1e-14);
            let spec = NormSpec::new(Scale::B, t, p, q).unwrap();
            assert_relative_eq!(b_norm(&lam, &spec).unwrap(), 1.0, max_relative = 1e-14);
        }
    }

    // Midpoint sampling on a 2^-6 grid; exact because every box edge is dyadic.
    fn dense_quadrature(lam: &SequenceElement, t: f64, p: f64, q: f64) -> f64 {
        let n = 64;
        let mut total = 0.0;
        for a in 0..n {
            for c in 0..n {
                let x = [(a as f64 + 0.5) / n as f64, (c as f64 + 0.5) / n as f64];
                let inner: f64 = lam
                    .iter()
                    .filter(|(k, _)| k.contains(&x))
                    .map(|(k, v)| (2f64.powf(k.level() as f64 * t) * v.abs()).powf(q))
                    .sum();
                total += inner.powf(p / q) / (n * n) as f64;
            }
        }
        total.powf(1.0 / p)
    }

    #[test]
    fn two_crossing_boxes_match_quadrature() {
        let lam =
            SequenceElement::from_pairs(2, 1, [(idx(&[1, 0], &[0, 0]), 1.0), (idx(&[0, 1], &[0, 0]), 1.0)]).unwrap();
        let spec = NormSpec::new(Scale::F, 0.0, 2.0, 2.0).unwrap();
        let v = f_norm(&lam, &spec, b()).unwrap();
        assert_relative_eq!(v, dense_quadrature(&lam, 0.0, 2.0, 2.0), max_relative = 1e-12);
        assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        let spec = NormSpec::new(Scale::F, 0.5, 3.0, 1.5).unwrap();
        assert_relative_eq!(
            f_norm(&lam, &spec, b()).unwrap(),
            dense_quadrature(&lam, 0.5, 3.0, 1.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn b_norm_hand_value() {
        let lam = SequenceElement::from_level(2, 1, &[1.0; 4], b()).unwrap();
        let spec = NormSpec::new(Scale::B, 0.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(b_norm(&lam, &spec).unwrap(), 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn restriction() {
        let lam = SequenceElement::from_level(2, 3, &[1.0; 32], b()).unwrap();
        assert!(block_restrict(&lam, 2).is_empty());
        let once = block_restrict(&lam, 3);
        assert_eq!(block_restrict(&once, 3), once);
    }

    #[test]
    fn text_round_trip() {
        let lam = SequenceElement::from_level(2, 2, &(0..12).map(|i| i as f64 - 5.5).collect::<Vec<_>>(), b()).unwrap();
        let back = SequenceElement::from_text(&lam.to_text()).unwrap();
        assert_eq!(back, lam);
        assert!(SequenceElement::from_text("2 1\n1 0 0 0\n").is_err());
        assert!(SequenceElement::from_text("2 1\n1 0 2 0 1.0\n").is_err());
    }

    #[test]
    fn grid_budget() {
        let lam = SequenceElement::from_level(2, 6, &vec![1.0; block_dim(6, 2).unwrap() as usize], b()).unwrap();
        let spec = NormSpec::f(0.0, 2.0).unwrap();
        assert!(matches!(
            f_norm(&lam, &spec, Budget(100)),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(NormSpec::f(0.0, 0.5).is_err());
        assert!(NormSpec::new(Scale::F, 0.0, 2.0, 0.0).is_err());
    }

    fn level_values(mu: u32, d: usize) -> impl Strategy<Value = Vec<f64>> {
        let n = block_dim(mu, d).unwrap() as usize;
        proptest::collection::vec(-3.0f64..3.0, n)
    }

    fn single_level() -> impl Strategy<Value = (usize, u32, Vec<f64>)> {
        (1usize..=3, 0u32..=4).prop_flat_map(|(d, mu)| (Just(d), Just(mu), level_values(mu, d)))
    }

    fn random_element(d: usize, max_level: u32) -> impl Strategy<Value = SequenceElement> {
        proptest::collection::vec((0u32..=max_level, any::<u64>(), -2.0f64..2.0), 1..12).prop_map(move |entries| {
            let mut lam = SequenceElement::zero(d, max_level);
            for (mu, pick, v) in entries {
                let level = enumerate_level_with_budget(mu, d, Budget::default()).unwrap();
                let k = level[(pick % level.len() as u64) as usize].clone();
                lam.add(k, v).unwrap();
            }
            lam
        })
    }

    proptest! {
        #[test]
        fn single_level_identity((d, mu, vals) in single_level(), p in 1.0f64..4.0, t in -1.0f64..1.5) {
            let lam = SequenceElement::from_level(d, mu, &vals, b()).unwrap();
            let closed = single_level_norm(mu, t, p, &vals);
            let fv = f_norm(&lam, &NormSpec::new(Scale::F, t, p, p).unwrap(), b()).unwrap();
            let bv = b_norm(&lam, &NormSpec::new(Scale::B, t, p, p).unwrap()).unwrap();
            prop_assert!((fv - closed).abs() <= 1e-12 * closed.max(1e-300));
            prop_assert!((bv - closed).abs() <= 1e-12 * closed.max(1e-300));
        }

        #[test]
        fn homogeneity(lam in random_element(2, 3), c in -5.0f64..5.0, p in 1.0f64..3.0, t in -1.0f64..1.0) {
            for scale in [Scale::F, Scale::B] {
                let spec = NormSpec::new(scale, t, p, 2.0).unwrap();
                let a = norm(&lam.scaled(c), &spec, b()).unwrap();
                let base = norm(&lam, &spec, b()).unwrap();
                prop_assert!((a - c.abs() * base).abs() <= 1e-10 * (1.0 + a));
            }
        }

        #[test]
        fn triangle(x in random_element(2, 3), y in random_element(2, 3), p in 1.0f64..4.0, q in 1.0f64..4.0) {
            for scale in [Scale::F, Scale::B] {
                let spec = NormSpec::new(scale, 0.3, p, q).unwrap();
                let s = norm(&x.sum(&y).unwrap(), &spec, b()).unwrap();
                let bound = norm(&x, &spec, b()).unwrap() + norm(&y, &spec, b()).unwrap();
                prop_assert!(s <= bound * (1.0 + 1e-12) + 1e-12);
            }
        }

        #[test]
        fn monotone_in_t(lam in random_element(3, 2), t1 in -1.0f64..1.0, dt in 0.0f64..1.0, p in 1.0f64..3.0) {
            let lo = f_norm(&lam, &NormSpec::f(t1, p).unwrap(), b()).unwrap();
            let hi = f_norm(&lam, &NormSpec::f(t1 + dt, p).unwrap(), b()).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn restrictions_reconstruct(lam in random_element(2, 3)) {
            let mut total = SequenceElement::zero(2, 3);
            for mu in 0..=3 {
                total = total.sum(&block_restrict(&lam, mu)).unwrap();
            }
            prop_assert!(total.same_coefficients(&lam, 1e-15));
        }

        // Block embedding factor 2^{mu(-t + (1/p1 - 1/p2)_+)} * N_mu^{(1/q2 - 1/q1)_+}
        // on the b-scale, with constant exactly one.
        #[test]
        fn b_block_embedding(
            (d, mu, vals) in single_level(),
            p1 in 1.0f64..5.0, p2 in 1.0f64..5.0, q1 in 1.0f64..5.0, q2 in 1.0f64..5.0, t in 0.0f64..2.0
        ) {
            prop_assume!(vals.iter().any(|v| *v != 0.0));
            let lam = SequenceElement::from_level(d, mu, &vals, b()).unwrap();
            let src = b_norm(&lam, &NormSpec::new(Scale::B, t, p1, q1).unwrap()).unwrap();
            let dst = b_norm(&lam, &NormSpec::new(Scale::B, 0.0, p2, q2).unwrap()).unwrap();
            let n_mu = composition_count(mu, d).unwrap() as f64;
            let factor = 2f64.powf(mu as f64 * (-t + (1.0 / p1 - 1.0 / p2).max(0.0)))
                * n_mu.powf((1.0 / q2 - 1.0 / q1).max(0.0));
            prop_assert!(dst <= src * factor * (1.0 + 1e-12));
        }

        // On the f-scale with q = 2 the block factor holds with constant one when
        // p2 <= p1 or p1 <= 2 <= p2.
        #[test]
        fn f_block_embedding((d, mu, vals) in single_level(), p1 in 1.0f64..5.0, p2 in 1.0f64..5.0, t in 0.0f64..2.0) {
            prop_assume!(p2 <= p1 || (p1 <= 2.0 && 2.0 <= p2));
            prop_assume!(vals.iter().any(|v| *v != 0.0));
            let lam = SequenceElement::from_level(d, mu, &vals, b()).unwrap();
            let src = f_norm(&lam, &NormSpec::f(t, p1).unwrap(), b()).unwrap();
            let dst = f_norm(&lam, &NormSpec::f(0.0, p2).unwrap(), b()).unwrap();
            let factor = 2f64.powf(mu as f64 * (-t + (1.0 / p1 - 1.0 / p2).max(0.0)));
            prop_assert!(dst <= src * factor * (1.0 + 1e-12));
        }
    }
}
