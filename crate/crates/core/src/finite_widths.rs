//! s-numbers of finite-dimensional diagonal embeddings `l_{p1}^m -> l_{p2}^m`.
//!
//! Every number is returned as a [`WidthBound`] that records its direction,
//! how far it can be trusted, and a witness that reproduces it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Relative gap at which the subspace branch and bound stops refining.
pub const CERTIFY_GAP: f64 = 0.01;
/// Largest subspace dimension the branch and bound is run on.
pub const CERTIFY_MAX_K: usize = 3;
/// Largest ambient dimension the branch and bound is run on.
pub const CERTIFY_MAX_M: usize = 16;

const CERTIFY_MAX_CELLS: usize = 400_000;

/// `l_p` norm of `x`; `p = inf` gives the maximum norm.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return x.iter().fold(0.0, |a, v| a.max(v.abs()));
    }
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * x.iter().map(|v| (v.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// A gradient of `y -> ||y||_p` (a subgradient where the norm is not smooth).
fn lp_gradient(y: &[f64], p: f64) -> Vec<f64> {
    let norm = lp_norm(y, p);
    if norm == 0.0 {
        return vec![0.0; y.len()];
    }
    if p.is_infinite() {
        let i = y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut g = vec![0.0; y.len()];
        g[i] = y[i].signum();
        return g;
    }
    y.iter().map(|v| v.signum() * (v.abs() / norm).powf(p - 1.0)).collect()
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        Err(Error::InvalidParameter(format!("exponent {p} must lie in [1, inf]")))
    } else {
        Ok(())
    }
}

/// A diagonal operator `x -> (w_i x_i)` from `l_{p1}^m` to `l_{p2}^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteEmbedding {
    pub m: usize,
    pub p1: f64,
    pub p2: f64,
    /// `None` is the identity.
    pub weights: Option<Vec<f64>>,
}

impl FiniteEmbedding {
    pub fn identity(m: usize, p1: f64, p2: f64) -> Result<Self> {
        let op = Self {
            m,
            p1,
            p2,
            weights: None,
        };
        op.validate()?;
        Ok(op)
    }

    pub fn diagonal(p1: f64, p2: f64, weights: Vec<f64>) -> Result<Self> {
        let op = Self {
            m: weights.len(),
            p1,
            p2,
            weights: Some(weights),
        };
        op.validate()?;
        Ok(op)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("dimension m must be at least 1".into()));
        }
        check_exponent(self.p1)?;
        check_exponent(self.p2)?;
        if let Some(w) = &self.weights {
            if w.len() != self.m {
                return Err(Error::DimensionMismatch {
                    expected: self.m,
                    got: w.len(),
                });
            }
            if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter("weights must be positive and finite".into()));
            }
        }
        Ok(())
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn weight_vec(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.weight(i)).collect()
    }

    pub fn is_hilbert(&self) -> bool {
        self.p1 == 2.0 && self.p2 == 2.0
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| self.weight(i) * v).collect()
    }

    /// Coordinates ordered by decreasing weight, ties by index.
    pub fn order_by_weight(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.m).collect();
        idx.sort_by(|&a, &b| self.weight(b).total_cmp(&self.weight(a)).then(a.cmp(&b)));
        idx
    }

    /// `||T x||_{p2} / ||x||_{p1}`.
    pub fn ratio(&self, x: &[f64]) -> f64 {
        lp_norm(&self.apply(x), self.p2) / lp_norm(x, self.p1)
    }

    /// Norm of `T` restricted to the coordinates `coords`.
    pub fn restricted_norm(&self, coords: &[usize]) -> f64 {
        if coords.is_empty() {
            return 0.0;
        }
        let w: Vec<f64> = coords.iter().map(|&i| self.weight(i)).collect();
        if self.p1 <= self.p2 {
            w.iter().fold(0.0, |a, &v| a.max(v))
        } else {
            lp_norm(&w, holder_exponent(self.p2, self.p1))
        }
    }

    /// Exact infimum of the ratio over the coordinate subspace on `coords`.
    pub fn coordinate_infimum(&self, coords: &[usize]) -> f64 {
        let w: Vec<f64> = coords.iter().map(|&i| self.weight(i)).collect();
        let min = w.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if self.p2 <= self.p1 {
            min
        } else {
            let inv: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
            1.0 / lp_norm(&inv, holder_exponent(self.p1, self.p2))
        }
    }

    pub fn operator_norm(&self) -> f64 {
        self.restricted_norm(&(0..self.m).collect::<Vec<_>>())
    }

    /// A unit-`p1` vector on which the operator norm is attained.
    pub fn extremal_vector(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.m];
        if self.p1 <= self.p2 {
            x[self.order_by_weight()[0]] = 1.0;
        } else {
            let s = holder_exponent(self.p2, self.p1);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = if self.p1.is_infinite() {
                    1.0
                } else {
                    self.weight(i).powf(s / self.p1)
                };
            }
        }
        let n = lp_norm(&x, self.p1);
        x.iter_mut().for_each(|v| *v /= n);
        x
    }
}

/// `s` with `1/s = 1/a - 1/b` for `a <= b`; infinite when `a = b`.
pub fn holder_exponent(a: f64, b: f64) -> f64 {
    let inv = 1.0 / a - 1.0 / b;
    if inv <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / inv
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthKind {
    Approximation,
    Weyl,
    Gelfand,
    Kolmogorov,
    Bernstein,
    Entropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Lower => "lower",
            Direction::Upper => "upper",
        })
    }
}

/// How much a number can be trusted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certification {
    /// A proven bound with every constant instantiated.
    Certified,
    /// Proven up to a constant that is not instantiated; only the rate is reliable.
    #[serde(rename = "rate")]
    RateOnly,
    /// Obtained by numerical search; not a proof.
    Heuristic,
    /// Taken from the rate oracle, no construction behind it.
    Predicted,
}

impl Certification {
    pub fn is_certified(self) -> bool {
        self == Certification::Certified
    }

    /// The weaker of two statuses.
    pub fn weakest(self, other: Self) -> Self {
        self.max(other)
    }
}

impl fmt::Display for Certification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Certification::Certified => "certified",
            Certification::RateOnly => "rate",
            Certification::Heuristic => "heuristic",
            Certification::Predicted => "predicted",
        })
    }
}

/// The object a bound can be recomputed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    /// Columns spanning a subspace of `R^m`.
    Subspace { m: usize, basis: Vec<Vec<f64>> },
    /// The rank-`k` map keeping the listed coordinates.
    Truncation { m: usize, kept: Vec<usize> },
    /// A closed-form expression with no recomputable object.
    Formula(String),
}

impl Witness {
    /// Text form: a header line, then `i j value` for each nonzero entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self {
            Witness::Subspace { m, basis } => {
                let _ = writeln!(s, "subspace {m} {}", basis.len());
                for (j, col) in basis.iter().enumerate() {
                    for (i, v) in col.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                        let _ = writeln!(s, "{i} {j} {v:e}");
                    }
                }
            }
            Witness::Truncation { m, kept } => {
                let _ = writeln!(s, "truncation {m} {}", kept.len());
                for (j, i) in kept.iter().enumerate() {
                    let _ = writeln!(s, "{i} {j} 1");
                }
            }
            Witness::Formula(text) => {
                let _ = writeln!(s, "formula {text}");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.into(),
        };
        let (_, header) = lines.next().ok_or(err(0, "empty witness"))?;
        if let Some(rest) = header.strip_prefix("formula ") {
            return Ok(Witness::Formula(rest.to_string()));
        }
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(err(0, "header must be `<kind> m k`"));
        }
        let m: usize = head[1].parse().map_err(|_| err(0, "bad m"))?;
        let k: usize = head[2].parse().map_err(|_| err(0, "bad k"))?;
        let mut entries = Vec::new();
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(err(line, "expected `i j value`"));
            }
            let i: usize = f[0].parse().map_err(|_| err(line, "bad row"))?;
            let j: usize = f[1].parse().map_err(|_| err(line, "bad column"))?;
            let v: f64 = f[2].parse().map_err(|_| err(line, "bad value"))?;
            if i >= m || j >= k {
                return Err(err(line, "entry out of range"));
            }
            entries.push((i, j, v));
        }
        match head[0] {
            "subspace" => {
                let mut basis = vec![vec![0.0; m]; k];
                for (i, j, v) in entries {
                    basis[j][i] = v;
                }
                Ok(Witness::Subspace { m, basis })
            }
            "truncation" => {
                let mut kept = vec![usize::MAX; k];
                for (i, j, _) in entries {
                    kept[j] = i;
                }
                if kept.contains(&usize::MAX) {
                    return Err(err(0, "truncation witness is missing a column"));
                }
                Ok(Witness::Truncation { m, kept })
            }
            other => Err(err(0, &format!("unknown witness kind {other:?}"))),
        }
    }

    /// Recomputes the bound this witness certifies for `op`.
    ///
    /// Subspaces give a lower bound on the Bernstein quotient, truncations
    /// the norm of the residual. Coordinate subspaces and subspaces of
    /// dimension at most three are evaluated rigorously.
    pub fn re_evaluate(&self, op: &FiniteEmbedding) -> Result<f64> {
        match self {
            Witness::Subspace { m, basis } => {
                if *m != op.m {
                    return Err(Error::DimensionMismatch {
                        expected: op.m,
                        got: *m,
                    });
                }
                if let Some(coords) = coordinate_support(basis) {
                    return Ok(op.coordinate_infimum(&coords));
                }
                if basis.len() <= CERTIFY_MAX_K {
                    return Ok(certify_subspace(op, basis).lower);
                }
                Ok(estimate_subspace_infimum(op, basis, &[]).0)
            }
            Witness::Truncation { m, kept } => {
                if *m != op.m {
                    return Err(Error::DimensionMismatch {
                        expected: op.m,
                        got: *m,
                    });
                }
                let rest: Vec<usize> = (0..op.m).filter(|i| !kept.contains(i)).collect();
                Ok(op.restricted_norm(&rest))
            }
            Witness::Formula(_) => Err(Error::InvalidParameter(
                "closed-form witnesses cannot be re-evaluated".into(),
            )),
        }
    }
}

/// Rows touched by the columns when every column is a multiple of a distinct unit vector.
fn coordinate_support(basis: &[Vec<f64>]) -> Option<Vec<usize>> {
    let mut rows = Vec::with_capacity(basis.len());
    for col in basis {
        let nz: Vec<usize> = col
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        if nz.len() != 1 || rows.contains(&nz[0]) {
            return None;
        }
        rows.push(nz[0]);
    }
    Some(rows)
}

/// A numeric bound on an s-number (or on a Bernstein or entropy number).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthBound {
    pub kind: WidthKind,
    pub n: usize,
    pub value: f64,
    pub direction: Direction,
    pub certification: Certification,
    pub witness: Option<Witness>,
}

impl WidthBound {
    pub fn certified(&self) -> bool {
        self.certification.is_certified()
    }
}

fn check_index(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        Err(Error::IndexOutOfRange { n, max })
    } else {
        Ok(())
    }
}

/// All listed s-numbers of a diagonal Hilbert operator: the weights sorted descending.
pub fn hilbert_exact_widths(op: &FiniteEmbedding) -> Result<Vec<f64>> {
    if !op.is_hilbert() {
        return Err(Error::InvalidParameter("exact widths need p1 = p2 = 2".into()));
    }
    Ok(op.order_by_weight().into_iter().map(|i| op.weight(i)).collect())
}

/// Certified lower bound from the span of the `n` largest-weight coordinates.
pub fn bernstein_coordinate_witness(op: &FiniteEmbedding, n: usize) -> Result<WidthBound> {
    check_index(n, op.m)?;
    let mut coords = op.order_by_weight();
    coords.truncate(n);
    coords.sort_unstable();
    let basis = coords
        .iter()
        .map(|&i| {
            let mut e = vec![0.0; op.m];
            e[i] = 1.0;
            e
        })
        .collect();
    Ok(WidthBound {
        kind: WidthKind::Bernstein,
        n,
        value: op.coordinate_infimum(&coords),
        direction: Direction::Lower,
        certification: Certification::Certified,
        witness: Some(Witness::Subspace { m: op.m, basis }),
    })
}

/// Certified upper bound on `a_n` from keeping the `n - 1` largest weights.
pub fn truncation_upper_bound(op: &FiniteEmbedding, n: usize) -> Result<WidthBound> {
    check_index(n, op.m + 1)?;
    let order = op.order_by_weight();
    let mut kept = order[..n - 1].to_vec();
    kept.sort_unstable();
    Ok(WidthBound {
        kind: WidthKind::Approximation,
        n,
        value: op.restricted_norm(&order[n - 1..]),
        direction: Direction::Upper,
        certification: Certification::Certified,
        witness: Some(Witness::Truncation { m: op.m, kept }),
    })
}

/// Bernstein number bracket from the inverse's Gelfand numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// `b_n(T) = 1 / c_{m-n+1}(T^{-1})`.
///
/// Exact for Hilbert diagonals, where the Gelfand numbers of the inverse are
/// its sorted weights. Otherwise the bracket between the coordinate witness
/// and the truncation bound is returned.
pub fn duality_bernstein(op: &FiniteEmbedding, n: usize) -> Result<Bracket> {
    check_index(n, op.m)?;
    if op.is_hilbert() {
        let inverse = FiniteEmbedding::diagonal(2.0, 2.0, op.weight_vec().iter().map(|w| 1.0 / w).collect())?;
        let c = hilbert_exact_widths(&inverse)?[op.m - n];
        let b = 1.0 / c;
        return Ok(Bracket { lower: b, upper: b });
    }
    Ok(Bracket {
        lower: bernstein_coordinate_witness(op, n)?.value,
        upper: truncation_upper_bound(op, n)?.value,
    })
}

/// Bracket on `b_n(T)` from a two-sided bound on `c_{m-n+1}(T^{-1})`.
pub fn duality_from_gelfand(inverse_gelfand: Bracket) -> Result<Bracket> {
    if !(inverse_gelfand.lower > 0.0) || inverse_gelfand.lower > inverse_gelfand.upper {
        return Err(Error::NotInvertible);
    }
    Ok(Bracket {
        lower: 1.0 / inverse_gelfand.upper,
        upper: 1.0 / inverse_gelfand.lower,
    })
}

/// 2-summing norm of the identity `l_{p1}^m -> l_2^m`, `p1 >= 2`: exactly `sqrt(m)`.
pub fn summing_norm_pi2(op: &FiniteEmbedding) -> Result<f64> {
    if op.weights.is_some() || op.p2 != 2.0 || op.p1 < 2.0 {
        return Err(Error::InvalidParameter(
            "2-summing norm is available for identities into l_2 from l_p, p >= 2".into(),
        ));
    }
    Ok((op.m as f64).sqrt())
}

/// `x_n <= n^{-1/r} pi_{r,2}`.
pub fn weyl_from_summing(pi_value: f64, r: f64, n: usize) -> Result<WidthBound> {
    if !(r >= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "summing exponent r = {r} must be >= 2"
        )));
    }
    if n == 0 || !(pi_value >= 0.0) {
        return Err(Error::InvalidParameter("need n >= 1 and a nonnegative norm".into()));
    }
    Ok(WidthBound {
        kind: WidthKind::Weyl,
        n,
        value: (n as f64).powf(-1.0 / r) * pi_value,
        direction: Direction::Upper,
        certification: Certification::Certified,
        witness: Some(Witness::Formula(format!("n^(-1/{r}) * {pi_value:e}"))),
    })
}

/// Certified lower bound on `x_n(id: l_p^m -> l_{p2}^m)` for any source `p >= 2`.
///
/// The trace of the projection onto an `(m-n+1)`-dimensional subspace forces
/// a vector with a large coordinate (target `p2 >= 2`) or a large `l_1`
/// norm (target `p2 <= 2`).
pub fn weyl_trace_lower_bound(op: &FiniteEmbedding, n: usize) -> Result<WidthBound> {
    check_index(n, op.m)?;
    if op.weights.is_some() || op.p1 < 2.0 {
        return Err(Error::InvalidParameter(
            "trace bound needs an identity with source p >= 2".into(),
        ));
    }
    let m = op.m as f64;
    let rest = (op.m - n + 1) as f64;
    let value = if op.p2 == 2.0 {
        // x_n(id: l_p -> l_2) >= x_n(id: l_2 -> l_2) = 1.
        1.0
    } else if op.p2 > 2.0 {
        (rest / m).sqrt()
    } else {
        (rest.sqrt() * m.powf(1.0 / op.p2 - 1.0)).max(1.0)
    };
    Ok(WidthBound {
        kind: WidthKind::Weyl,
        n,
        value,
        direction: Direction::Lower,
        certification: Certification::Certified,
        witness: Some(Witness::Formula(format!("trace bound m={} n={n} p2={}", op.m, op.p2))),
    })
}

/// Local search for `inf ||T Q c||_{p2} / ||Q c||_{p1}` over unit `c`.
///
/// Starts from every row of the basis and from `extra_starts`. Returns the
/// smallest value found and its minimiser in `R^m`.
pub fn estimate_subspace_infimum(
    op: &FiniteEmbedding,
    basis: &[Vec<f64>],
    extra_starts: &[Vec<f64>],
) -> (f64, Vec<f64>) {
    let k = basis.len();
    let sub = Subspace::new(op, basis);
    let mut starts: Vec<Vec<f64>> = (0..op.m).map(|i| basis.iter().map(|col| col[i]).collect()).collect();
    starts.extend(extra_starts.iter().cloned());
    let mut best = (f64::INFINITY, vec![0.0; k]);
    for mut c in starts {
        let len = lp_norm(&c, 2.0);
        if len < 1e-12 || c.len() != k {
            continue;
        }
        c.iter_mut().for_each(|v| *v /= len);
        let (v, c) = sub.descend(c);
        if v < best.0 {
            best = (v, c);
        }
    }
    let x = sub.embed(&best.1);
    (best.0, x)
}

/// Dense `T Q` and `Q` for a fixed basis `Q`.
struct Subspace<'a> {
    op: &'a FiniteEmbedding,
    q: Vec<Vec<f64>>,
    tq: Vec<Vec<f64>>,
}

impl<'a> Subspace<'a> {
    fn new(op: &'a FiniteEmbedding, basis: &[Vec<f64>]) -> Self {
        let q = basis.to_vec();
        let tq = basis.iter().map(|col| op.apply(col)).collect();
        Self { op, q, tq }
    }

    fn combine(cols: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; cols[0].len()];
        for (col, &cj) in cols.iter().zip(c) {
            for (yi, v) in y.iter_mut().zip(col) {
                *yi += cj * v;
            }
        }
        y
    }

    fn embed(&self, c: &[f64]) -> Vec<f64> {
        Self::combine(&self.q, c)
    }

    fn parts(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (Self::combine(&self.tq, c), Self::combine(&self.q, c))
    }

    fn log_ratio(&self, c: &[f64]) -> f64 {
        let (num, den) = self.parts(c);
        lp_norm(&num, self.op.p2).ln() - lp_norm(&den, self.op.p1).ln()
    }

    fn log_gradient(&self, c: &[f64]) -> Vec<f64> {
        let (num, den) = self.parts(c);
        let (nn, dn) = (lp_norm(&num, self.op.p2), lp_norm(&den, self.op.p1));
        let gn = lp_gradient(&num, self.op.p2);
        let gd = lp_gradient(&den, self.op.p1);
        (0..c.len())
            .map(|j| {
                let a: f64 = self.tq[j].iter().zip(&gn).map(|(x, y)| x * y).sum();
                let b: f64 = self.q[j].iter().zip(&gd).map(|(x, y)| x * y).sum();
                a / nn - b / dn
            })
            .collect()
    }

    /// Projected gradient descent on the sphere with Armijo backtracking.
    fn descend(&self, mut c: Vec<f64>) -> (f64, Vec<f64>) {
        let mut f = self.log_ratio(&c);
        for _ in 0..200 {
            let mut g = self.log_gradient(&c);
            let radial: f64 = g.iter().zip(&c).map(|(a, b)| a * b).sum();
            g.iter_mut().zip(&c).for_each(|(gi, ci)| *gi -= radial * ci);
            let gnorm2: f64 = g.iter().map(|v| v * v).sum();
            if gnorm2 < 1e-20 {
                break;
            }
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-10 {
                let mut trial: Vec<f64> = c.iter().zip(&g).map(|(ci, gi)| ci - step * gi).collect();
                let len = lp_norm(&trial, 2.0);
                trial.iter_mut().for_each(|v| *v /= len);
                let ft = self.log_ratio(&trial);
                if ft <= f - 1e-4 * step * gnorm2 {
                    c = trial;
                    moved = f - ft > 1e-13;
                    f = ft;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (f.exp(), c)
    }
}

/// Outcome of the subspace branch and bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    /// Proven lower bound on the infimum.
    pub lower: f64,
    /// Smallest value seen; an upper bound on the infimum.
    pub upper: f64,
    /// Whether the relative gap target was reached.
    pub converged: bool,
}

#[derive(Clone, Debug)]
struct Cell {
    lower: f64,
    center: Vec<f64>,
    half: f64,
    axis: usize,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.lower == other.lower
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    // Reversed so the binary heap pops the smallest lower bound.
    fn cmp(&self, other: &Self) -> Ordering {
        other.lower.total_cmp(&self.lower)
    }
}

/// Rigorous enclosure of `inf ||T Q c||_{p2} / ||Q c||_{p1}` over `c != 0`.
///
/// The quotient is scale invariant, so `c` ranges over the faces
/// `c_a = 1, |c_j| <= 1` of the cube. On a cell of half-width `h` around
/// `c0`, norms move by at most `h` times the summed column norms, which
/// bounds the quotient from below.
pub fn certify_subspace(op: &FiniteEmbedding, basis: &[Vec<f64>]) -> Certificate {
    let k = basis.len();
    let sub = Subspace::new(op, basis);
    let col_num: Vec<f64> = sub.tq.iter().map(|c| lp_norm(c, op.p2)).collect();
    let col_den: Vec<f64> = sub.q.iter().map(|c| lp_norm(c, op.p1)).collect();
    let bound = |center: &[f64], half: f64, axis: usize| -> (f64, f64) {
        let (num, den) = sub.parts(center);
        let (n0, d0) = (lp_norm(&num, op.p2), lp_norm(&den, op.p1));
        let (sn, sd): (f64, f64) = (0..k)
            .filter(|&j| j != axis)
            .fold((0.0, 0.0), |(a, b), j| (a + col_num[j], b + col_den[j]));
        (((n0 - half * sn).max(0.0)) / (d0 + half * sd), n0 / d0)
    };
    let mut upper = f64::INFINITY;
    let mut heap = BinaryHeap::new();
    for axis in 0..k {
        let mut center = vec![0.0; k];
        center[axis] = 1.0;
        let (lower, value) = bound(&center, 1.0, axis);
        upper = upper.min(value);
        heap.push(Cell {
            lower,
            center,
            half: 1.0,
            axis,
        });
    }
    let mut processed = 0;
    while let Some(cell) = heap.pop() {
        if upper - cell.lower <= CERTIFY_GAP * upper || processed >= CERTIFY_MAX_CELLS || k == 1 {
            return Certificate {
                lower: cell.lower,
                upper,
                converged: upper - cell.lower <= CERTIFY_GAP * upper || k == 1,
            };
        }
        processed += 1;
        let half = cell.half / 2.0;
        let free: Vec<usize> = (0..k).filter(|&j| j != cell.axis).collect();
        for mask in 0..(1usize << free.len()) {
            let mut center = cell.center.clone();
            for (b, &j) in free.iter().enumerate() {
                center[j] += if mask >> b & 1 == 1 { half } else { -half };
            }
            let (lower, value) = bound(&center, half, cell.axis);
            upper = upper.min(value);
            heap.push(Cell {
                lower,
                center,
                half,
                axis: cell.axis,
            });
        }
    }
    Certificate {
        lower: 0.0,
        upper,
        converged: false,
    }
}

/// Orthonormal `m x k` frame from a Gaussian matrix.
pub fn random_frame(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let g = DMatrix::<f64>::from_fn(m, k, |_, _| StandardNormal.sample(rng));
    let q = g.qr().q();
    (0..k).map(|j| q.column(j).iter().copied().collect()).collect()
}

/// Best Bernstein lower estimate over random `n`-frames and the coordinate frame.
///
/// `n = 1` and `n = m` are exact. Otherwise random frames are searched by
/// local minimisation; the result is certified when the coordinate frame
/// wins or when the winning frame is small enough for [`certify_subspace`].
pub fn bernstein_heuristic_witness(op: &FiniteEmbedding, n: usize, trials: usize, seed: u64) -> Result<WidthBound> {
    check_index(n, op.m)?;
    if n == 1 {
        let x = op.extremal_vector();
        return Ok(WidthBound {
            kind: WidthKind::Bernstein,
            n,
            value: op.operator_norm(),
            direction: Direction::Lower,
            certification: Certification::Certified,
            witness: Some(Witness::Subspace {
                m: op.m,
                basis: vec![x],
            }),
        });
    }
    let coordinate = bernstein_coordinate_witness(op, n)?;
    if n == op.m {
        return Ok(coordinate);
    }
    let candidates = par::map_range(trials, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(par::split_seed(seed, i as u64));
        let frame = random_frame(op.m, n, &mut rng);
        let extra: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let (value, _) = estimate_subspace_infimum(op, &frame, &extra);
        (value, frame)
    });
    let best = candidates
        .into_iter()
        .fold(None::<(f64, Vec<Vec<f64>>)>, |acc, c| match acc {
            Some(a) if a.0 >= c.0 => Some(a),
            _ => Some(c),
        });
    let Some((estimate, frame)) = best else {
        return Ok(coordinate);
    };
    if n <= CERTIFY_MAX_K && op.m <= CERTIFY_MAX_M {
        let cert = certify_subspace(op, &frame);
        if cert.lower > coordinate.value {
            return Ok(WidthBound {
                value: cert.lower,
                certification: Certification::Certified,
                witness: Some(Witness::Subspace { m: op.m, basis: frame }),
                ..coordinate
            });
        }
        return Ok(coordinate);
    }
    if estimate > coordinate.value {
        Ok(WidthBound {
            value: estimate,
            certification: Certification::Heuristic,
            witness: Some(Witness::Subspace { m: op.m, basis: frame }),
            ..coordinate
        })
    } else {
        Ok(coordinate)
    }
}

/// Which finite-dimensional statement a rate query refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteQuery {
    /// `x_n(id^m)` with `2n <= m`.
    Weyl,
    /// `x_n(id^{kn})`, `k >= 2`.
    WeylProportional,
    /// Lower bound on `x_n(id^m)` for `n <= m/2`, as a power of `m`.
    WeylHalf,
    /// `b_n(id^{2n})`.
    Bernstein,
    /// Lower bound on `b_n(id^m)` for `n <= [m^{2/p1}]`, as a power of `m`.
    BernsteinSmallIndex,
}

/// The variable a finite rate is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateVariable {
    N,
    M,
}

/// Whether a finite rate is two-sided or a lower estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Asymptotic,
    AtLeast,
}

/// A finite-dimensional rate `variable^power`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteRate {
    pub query: FiniteQuery,
    pub variable: RateVariable,
    pub power: f64,
    pub relation: Relation,
    pub case_id: &'static str,
}

/// Known power laws for `x_n` and `b_n` of `id: l_{p1}^m -> l_{p2}^m`.
pub fn finite_rate_table(p1: f64, p2: f64, query: FiniteQuery) -> Result<FiniteRate> {
    check_exponent(p1)?;
    check_exponent(p2)?;
    let (i1, i2) = (1.0 / p1, 1.0 / p2);
    let rate = |variable, power: f64, relation, case_id| FiniteRate {
        query,
        variable,
        power: power + 0.0,
        relation,
        case_id,
    };
    use RateVariable::{M, N};
    use Relation::{Asymptotic, AtLeast};
    let uncovered = || Err(Error::UncoveredCase(format!("{query:?} with p1 = {p1}, p2 = {p2}")));
    match query {
        FiniteQuery::Weyl => {
            if 2.0 <= p1 && p1 <= p2 {
                Ok(rate(N, 0.0, Asymptotic, "weyl-finite-const"))
            } else if p1 <= p2 && p2 <= 2.0 {
                Ok(rate(N, i2 - i1, Asymptotic, "weyl-finite-small"))
            } else if p1 <= 2.0 && 2.0 <= p2 {
                Ok(rate(N, 0.5 - i1, Asymptotic, "weyl-finite-cross"))
            } else if p2 < p1 && p1 <= 2.0 {
                Ok(rate(M, i2 - i1, Asymptotic, "weyl-finite-dim"))
            } else {
                uncovered()
            }
        }
        FiniteQuery::WeylProportional => {
            if 2.0 <= p2 && p2 < p1 {
                Ok(rate(N, 0.0, Asymptotic, "weyl-finite-proportional"))
            } else {
                uncovered()
            }
        }
        FiniteQuery::WeylHalf => {
            if p2 <= 2.0 && 2.0 < p1 {
                Ok(rate(M, i2 - 0.5, AtLeast, "weyl-finite-half"))
            } else {
                uncovered()
            }
        }
        FiniteQuery::Bernstein => {
            if 2.0 <= p2 && p2 <= p1 {
                Ok(rate(N, 0.0, AtLeast, "bernstein-finite-const"))
            } else if p2 <= 2.0 && 2.0 <= p1 {
                Ok(rate(N, i2 - 0.5, AtLeast, "bernstein-finite-cross"))
            } else {
                // Remaining pairs: p1 <= p2, or p2 <= p1 <= 2.
                Ok(rate(N, i2 - i1, AtLeast, "bernstein-finite-power"))
            }
        }
        FiniteQuery::BernsteinSmallIndex => {
            if p2 > 1.0 && p2.max(2.0) < p1 {
                Ok(rate(M, i2 - i1, AtLeast, "bernstein-finite-small-index"))
            } else {
                uncovered()
            }
        }
    }
}
