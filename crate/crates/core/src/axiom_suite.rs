//! Checks of the s-number axioms and of the inequalities linking widths,
//! entropy numbers and eigenvalues, on instances whose quantities are
//! computable exactly or bounded in a known direction.
//!
//! Every check yields an [`InequalityRecord`] whose instance field holds the
//! full input, so [`InequalityRecord::reproduce`] recomputes both sides.

use std::collections::BTreeMap;
use std::f64::consts::{E, SQRT_2};
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_widths::{bernstein_coordinate_witness, lp_norm, FiniteEmbedding};
use crate::hyperbolic_index::{block_dim, cumulative_dim, enumerate_level, level_position, Budget};
use crate::mixed_norms::{f_norm, single_level_norm, NormSpec, Scale, SequenceElement};
use crate::par;

/// Absolute slack allowed by every record.
pub const RECORD_TOL: f64 = 1e-9;

/// One checked inequality `left <= right`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub name: String,
    pub left: f64,
    pub right: f64,
    pub instance: Instance,
    pub pass: bool,
    /// `right - left`.
    pub slack: f64,
}

impl InequalityRecord {
    pub fn from_instance(instance: Instance) -> Result<Self> {
        let (left, right) = instance.evaluate()?;
        Ok(Self {
            name: instance.name().to_string(),
            left,
            right,
            pass: left <= right + RECORD_TOL,
            slack: right - left,
            instance,
        })
    }

    /// Recomputes `(left, right)` from the stored instance.
    pub fn reproduce(&self) -> Result<(f64, f64)> {
        self.instance.evaluate()
    }
}

/// The s-number properties checked on diagonal Hilbert operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    /// `||T|| <= s_1(T)`.
    NormBelow,
    /// `s_1(T) <= ||T||`.
    NormAbove,
    /// `s_{n+1}(T) <= s_n(T)`.
    Monotone,
    /// `s_{n+m-1}(S + T) <= s_n(S) + s_m(T)`.
    Additive,
    /// `s_n(A T B) <= ||A|| s_n(T) ||B||`.
    Ideal,
    /// `s_n(T) = 0` once `n > rank T`.
    Rank,
    /// `s_n(id: l_2^n -> l_2^n) = 1`.
    Normalization,
    /// `s_{n+m-1}(S T) <= s_n(S) s_m(T)`.
    Multiplicative,
}

impl Axiom {
    pub fn name(self) -> &'static str {
        match self {
            Axiom::NormBelow => "axiom-a-norm-below",
            Axiom::NormAbove => "axiom-a-norm-above",
            Axiom::Monotone => "axiom-a-monotone",
            Axiom::Additive => "axiom-b",
            Axiom::Ideal => "axiom-c",
            Axiom::Rank => "axiom-d",
            Axiom::Normalization => "axiom-e",
            Axiom::Multiplicative => "axiom-f",
        }
    }
}

/// The full input of one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum Instance {
    /// Diagonal operators given by their weights; `n`, `k` are the indices.
    Diagonal {
        axiom: Axiom,
        operands: Vec<Vec<f64>>,
        n: usize,
        k: usize,
        fault: bool,
    },
    BernsteinEntropy {
        p1: f64,
        p2: f64,
        weights: Vec<f64>,
        n: usize,
    },
    /// Row-major `dim x dim` matrix on `l_2^dim`.
    EigenEntropy {
        dim: usize,
        entries: Vec<f64>,
        n: usize,
    },
    WeylEigenvalue {
        dim: usize,
        entries: Vec<f64>,
        n: usize,
    },
    /// `|b_n(T) c_{m-n+1}(T^{-1}) - 1| <= 0`.
    Duality {
        weights: Vec<f64>,
        n: usize,
    },
    /// Relative gap between the f-norm and the single-level closed form.
    NormIdentity {
        d: usize,
        mu: u32,
        t: f64,
        p: f64,
        values: Vec<f64>,
    },
    /// Enumeration count and position round trip on level `mu`.
    Tiling {
        mu: u32,
        d: usize,
    },
}

impl Instance {
    pub fn name(&self) -> &'static str {
        match self {
            Instance::Diagonal { axiom, .. } => axiom.name(),
            Instance::BernsteinEntropy { .. } => "bernstein-entropy",
            Instance::EigenEntropy { .. } => "eigen-entropy",
            Instance::WeylEigenvalue { .. } => "weyl-eigenvalue",
            Instance::Duality { .. } => "duality",
            Instance::NormIdentity { .. } => "norm-identity",
            Instance::Tiling { .. } => "tiling",
        }
    }

    pub fn evaluate(&self) -> Result<(f64, f64)> {
        match self {
            Instance::Diagonal {
                axiom,
                operands,
                n,
                k,
                fault,
            } => diagonal_axiom(*axiom, operands, *n, *k, *fault),
            Instance::BernsteinEntropy { p1, p2, weights, n } => {
                let op = FiniteEmbedding::diagonal(*p1, *p2, weights.clone())?;
                let b = bernstein_coordinate_witness(&op, *n)?.value;
                Ok((b, 2.0 * SQRT_2 * diagonal_entropy_upper(&op, *n)))
            }
            Instance::EigenEntropy { dim, entries, n } => {
                let a = square(*dim, entries)?;
                let lambda = eigenvalue_moduli(&a);
                let sigma = a.singular_values().as_slice().to_vec();
                Ok((lambda[*n - 1], SQRT_2 * ellipsoid_entropy_upper(&sigma, *n)))
            }
            Instance::WeylEigenvalue { dim, entries, n } => {
                let a = square(*dim, entries)?;
                let lambda = eigenvalue_moduli(&a);
                let sigma = a.singular_values().as_slice().to_vec();
                let mut sorted = sigma.clone();
                sorted.sort_by(|x, y| y.total_cmp(x));
                Ok((lambda[2 * n - 2], (2.0 * E).sqrt() * geometric_mean(&sorted[..*n])))
            }
            Instance::Duality { weights, n } => {
                let op = FiniteEmbedding::diagonal(2.0, 2.0, weights.clone())?;
                let b = bernstein_coordinate_witness(&op, *n)?.value;
                let inverse = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(weights.clone()))
                    .try_inverse()
                    .ok_or(Error::NotInvertible)?;
                let mut c: Vec<f64> = inverse.singular_values().as_slice().to_vec();
                c.sort_by(|x, y| y.total_cmp(x));
                Ok(((b * c[weights.len() - n] - 1.0).abs(), 0.0))
            }
            Instance::NormIdentity { d, mu, t, p, values } => {
                let lambda = SequenceElement::from_level(*d, *mu, values, Budget::default())?;
                let got = f_norm(&lambda, &NormSpec::new(Scale::F, *t, *p, *p)?, Budget::default())?;
                let expected = single_level_norm(*mu, *t, *p, values);
                let gap = if expected == 0.0 {
                    got.abs()
                } else {
                    ((got - expected) / expected).abs()
                };
                Ok((gap, NORM_IDENTITY_TOL))
            }
            Instance::Tiling { mu, d } => {
                let level = enumerate_level(*mu, *d)?;
                let mut gap = (level.len() as f64 - block_dim(*mu, *d)? as f64).abs();
                let cum: u128 = (0..=*mu).map(|l| block_dim(l, *d)).sum::<Result<u128>>()?;
                gap += (cum as f64 - cumulative_dim(*mu, *d)? as f64).abs();
                for (i, idx) in level.iter().enumerate() {
                    if level_position(idx)? != i {
                        gap += 1.0;
                    }
                }
                Ok((gap, 0.0))
            }
        }
    }
}

/// Relative tolerance of the norm identity records.
pub const NORM_IDENTITY_TOL: f64 = 1e-12;

/// s-numbers of a diagonal Hilbert operator, padded with zeros.
///
/// With `fault` set the weights are sorted by signed value, which is wrong as
/// soon as a weight is negative.
pub fn diagonal_s_numbers(weights: &[f64], fault: bool) -> Vec<f64> {
    let mut s: Vec<f64> = if fault {
        weights.to_vec()
    } else {
        weights.iter().map(|w| w.abs()).collect()
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn s_at(s: &[f64], n: usize) -> f64 {
    s.get(n - 1).copied().unwrap_or(0.0)
}

fn sup_norm(w: &[f64]) -> f64 {
    w.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn diagonal_axiom(axiom: Axiom, ops: &[Vec<f64>], n: usize, k: usize, fault: bool) -> Result<(f64, f64)> {
    let need = match axiom {
        Axiom::Additive | Axiom::Multiplicative => 2,
        Axiom::Ideal => 3,
        _ => 1,
    };
    if ops.len() != need || ops.iter().any(|o| o.len() != ops[0].len()) {
        return Err(Error::InvalidParameter(format!(
            "{} needs {need} operands of equal size",
            axiom.name()
        )));
    }
    if n == 0 || k == 0 {
        return Err(Error::IndexOutOfRange {
            n: 0,
            max: ops[0].len(),
        });
    }
    let s = |w: &[f64]| diagonal_s_numbers(w, fault);
    let t = &ops[0];
    Ok(match axiom {
        Axiom::NormBelow => (sup_norm(t), s_at(&s(t), 1)),
        Axiom::NormAbove => (s_at(&s(t), 1), sup_norm(t)),
        Axiom::Monotone => (s_at(&s(t), n + 1), s_at(&s(t), n)),
        Axiom::Additive => {
            let sum: Vec<f64> = t.iter().zip(&ops[1]).map(|(a, b)| a + b).collect();
            (s_at(&s(&sum), n + k - 1), s_at(&s(t), n) + s_at(&s(&ops[1]), k))
        }
        Axiom::Multiplicative => {
            let prod: Vec<f64> = t.iter().zip(&ops[1]).map(|(a, b)| a * b).collect();
            (s_at(&s(&prod), n + k - 1), s_at(&s(t), n) * s_at(&s(&ops[1]), k))
        }
        Axiom::Ideal => {
            let (a, b) = (&ops[1], &ops[2]);
            let atb: Vec<f64> = (0..t.len()).map(|i| a[i] * t[i] * b[i]).collect();
            (s_at(&s(&atb), n), sup_norm(a) * s_at(&s(t), n) * sup_norm(b))
        }
        Axiom::Rank => {
            let rank = t.iter().filter(|w| **w != 0.0).count();
            (s_at(&s(t), rank + n).abs(), 0.0)
        }
        Axiom::Normalization => ((s_at(&s(&vec![1.0; n]), n) - 1.0).abs(), 0.0),
    })
}

/// Radius for covering the box `prod [-h_i, h_i]` by at most `cells` `l_p`-balls.
///
/// Each axis `i` is split into `k_i` equal pieces with `prod k_i <= cells`;
/// the cell centers are the ball centers. Splits are searched with `k_i`
/// nonincreasing along decreasing `h_i`.
pub fn box_cover_radius(half_widths: &[f64], p: f64, cells: u64) -> f64 {
    let mut h: Vec<f64> = half_widths.iter().map(|v| v.abs()).collect();
    h.sort_by(|a, b| b.total_cmp(a));
    let mut k = vec![1u64; h.len()];
    let mut best = lp_norm(&h, p);
    search_splits(&h, p, cells, 0, cells, &mut k, &mut best);
    best
}

fn search_splits(h: &[f64], p: f64, left: u64, i: usize, cap: u64, k: &mut [u64], best: &mut f64) {
    if i == h.len() {
        let r: Vec<f64> = h.iter().zip(k.iter()).map(|(v, &c)| v / c as f64).collect();
        *best = best.min(lp_norm(&r, p));
        return;
    }
    for c in 1..=left.min(cap) {
        k[i] = c;
        search_splits(h, p, left / c, i + 1, c, k, best);
    }
    k[i] = 1;
}

/// Upper bound on `e_n` of a diagonal `l_{p1}^m -> l_{p2}^m` by covering its
/// image box with `2^{n-1}` balls, or by the single ball of radius `||T||`.
pub fn diagonal_entropy_upper(op: &FiniteEmbedding, n: usize) -> f64 {
    let cells = 1u64 << (n - 1).min(62);
    op.operator_norm().min(box_cover_radius(&op.weight_vec(), op.p2, cells))
}

/// Upper bound on `e_n` of an operator on `l_2^m` with singular values `sigma`.
/// The image ellipsoid lies in a rotated box with half-widths `sigma`.
pub fn ellipsoid_entropy_upper(sigma: &[f64], n: usize) -> f64 {
    let cells = 1u64 << (n - 1).min(62);
    sup_norm(sigma).min(box_cover_radius(sigma, 2.0, cells))
}

fn square(dim: usize, entries: &[f64]) -> Result<DMatrix<f64>> {
    if entries.len() != dim * dim || dim == 0 {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: entries.len(),
        });
    }
    Ok(DMatrix::from_row_slice(dim, dim, entries))
}

/// Eigenvalue moduli in decreasing order.
pub fn eigenvalue_moduli(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

fn geometric_mean(values: &[f64]) -> f64 {
    if values.iter().any(|v| *v <= 0.0) {
        return 0.0;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

/// Which checks to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Axioms,
    /// Bernstein-entropy, eigenvalue-entropy, Weyl eigenvalue and duality checks.
    Web,
    Norms,
    Tiling,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::All => "all",
            Suite::Axioms => "axioms",
            Suite::Web => "web",
            Suite::Norms => "norms",
            Suite::Tiling => "tiling",
        })
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "axioms" => Suite::Axioms,
            "web" => Suite::Web,
            "norms" => Suite::Norms,
            "tiling" => Suite::Tiling,
            other => return Err(Error::InvalidParameter(format!("unknown suite {other}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Diagonal-operator trials for the axioms.
    pub trials: usize,
    /// Random matrices for the eigenvalue checks.
    pub matrix_trials: usize,
    /// Flip the sign of one weight and use the signed sort.
    pub fault: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1000,
            matrix_trials: 200,
            fault: false,
        }
    }
}

fn rng(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(par::split_seed(par::split_seed(seed, stream), index as u64))
}

fn positive_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(0.01..1.0)).collect()
}

fn collect(instances: Vec<Instance>) -> Result<Vec<InequalityRecord>> {
    par::map(&instances, |i| InequalityRecord::from_instance(i.clone()))
        .into_iter()
        .collect()
}

/// Axioms (a) to (f) on random diagonal Hilbert operators of size at most 8.
pub fn check_axioms(trials: usize, seed: u64, fault: bool) -> Result<Vec<InequalityRecord>> {
    let per_trial = par::map_range(trials, |trial| {
        let mut r = rng(seed, 1, trial);
        let m = r.random_range(1..=8usize);
        let mut t = positive_weights(&mut r, m);
        let s = positive_weights(&mut r, m);
        let a = positive_weights(&mut r, m);
        let b = positive_weights(&mut r, m);
        let mut low_rank = positive_weights(&mut r, m);
        let zeros = r.random_range(1..=m);
        for w in low_rank.iter_mut().take(zeros) {
            *w = 0.0;
        }
        if fault && trial == 0 {
            let i = (0..m).max_by(|&x, &y| t[x].total_cmp(&t[y])).unwrap_or(0);
            t[i] = -t[i];
        }
        let diag = |axiom, operands: Vec<Vec<f64>>, n, k| Instance::Diagonal {
            axiom,
            operands,
            n,
            k,
            fault,
        };
        let mut out = vec![
            diag(Axiom::NormBelow, vec![t.clone()], 1, 1),
            diag(Axiom::NormAbove, vec![t.clone()], 1, 1),
            diag(Axiom::Normalization, vec![t.clone()], m, 1),
        ];
        for n in 1..=m {
            out.push(diag(Axiom::Monotone, vec![t.clone()], n, 1));
            out.push(diag(Axiom::Ideal, vec![t.clone(), a.clone(), b.clone()], n, 1));
            out.push(diag(Axiom::Rank, vec![low_rank.clone()], n, 1));
            for k in 1..=m + 1 - n {
                out.push(diag(Axiom::Additive, vec![s.clone(), t.clone()], n, k));
                out.push(diag(Axiom::Multiplicative, vec![s.clone(), t.clone()], n, k));
            }
        }
        out
    });
    collect(per_trial.into_iter().flatten().collect())
}

/// `b_n <= 2 sqrt 2 e_n` on diagonal embeddings of size at most 4.
pub fn check_bernstein_entropy(trials: usize, seed: u64) -> Result<Vec<InequalityRecord>> {
    let mut instances = vec![
        Instance::BernsteinEntropy {
            p1: 2.0,
            p2: 2.0,
            weights: vec![1.0, 1.0],
            n: 1,
        },
        Instance::BernsteinEntropy {
            p1: 2.0,
            p2: 2.0,
            weights: vec![1.0, 1.0],
            n: 2,
        },
        Instance::BernsteinEntropy {
            p1: 2.0,
            p2: 2.0,
            weights: vec![1.0, 0.1],
            n: 2,
        },
    ];
    const EXPONENTS: [f64; 5] = [1.0, 1.5, 2.0, 4.0, f64::INFINITY];
    for trial in 0..trials {
        let mut r = rng(seed, 2, trial);
        let m = r.random_range(1..=4usize);
        let p1 = EXPONENTS[r.random_range(0..EXPONENTS.len())];
        let p2 = EXPONENTS[r.random_range(0..EXPONENTS.len())];
        let weights = positive_weights(&mut r, m);
        for n in 1..=m {
            instances.push(Instance::BernsteinEntropy {
                p1,
                p2,
                weights: weights.clone(),
                n,
            });
        }
    }
    collect(instances)
}

fn gaussian_matrix(r: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim * dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

fn jordan_block(dim: usize, eigenvalue: f64) -> Vec<f64> {
    let mut a = vec![0.0; dim * dim];
    for i in 0..dim {
        a[i * dim + i] = eigenvalue;
        if i + 1 < dim {
            a[i * dim + i + 1] = 1.0;
        }
    }
    a
}

fn fixed_matrices() -> Vec<(usize, Vec<f64>)> {
    let identity = |m: usize| (0..m * m).map(|i| if i % (m + 1) == 0 { 1.0 } else { 0.0 }).collect();
    // Rotation by 0.3 scaled by 2 stacked with diag(0.5, 0.25): a normal matrix.
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let normal = vec![
        2.0 * c,
        -2.0 * s,
        0.0,
        0.0, //
        2.0 * s,
        2.0 * c,
        0.0,
        0.0, //
        0.0,
        0.0,
        0.5,
        0.0, //
        0.0,
        0.0,
        0.0,
        0.25,
    ];
    vec![
        (1, vec![1.0]),
        (4, identity(4)),
        (4, normal),
        (6, jordan_block(6, 0.0)),
        (5, jordan_block(5, 0.1)),
    ]
}

fn matrix_pool(trials: usize, seed: u64) -> Vec<(usize, Vec<f64>)> {
    let mut pool = fixed_matrices();
    pool.extend((0..trials).map(|trial| {
        let mut r = rng(seed, 3, trial);
        let dim = r.random_range(2..=8usize);
        (dim, gaussian_matrix(&mut r, dim))
    }));
    pool
}

/// `|lambda_n| <= sqrt 2 e_n` on `l_2^m`, `m <= 8`.
pub fn check_eigen_entropy(trials: usize, seed: u64) -> Result<Vec<InequalityRecord>> {
    let instances = matrix_pool(trials, seed)
        .into_iter()
        .flat_map(|(dim, entries)| {
            (1..=dim).map(move |n| Instance::EigenEntropy {
                dim,
                entries: entries.clone(),
                n,
            })
        })
        .collect();
    collect(instances)
}

/// `|lambda_{2n-1}| <= sqrt(2e) (prod_{k<=n} x_k)^{1/n}` with `x_k = sigma_k` on `l_2^m`.
pub fn check_weyl_eigenvalue(trials: usize, seed: u64) -> Result<Vec<InequalityRecord>> {
    let instances = matrix_pool(trials, seed)
        .into_iter()
        .flat_map(|(dim, entries)| {
            (1..=dim.div_ceil(2)).map(move |n| Instance::WeylEigenvalue {
                dim,
                entries: entries.clone(),
                n,
            })
        })
        .collect();
    collect(instances)
}

/// `b_n(T) c_{m-n+1}(T^{-1}) = 1` on random diagonal Hilbert operators, all `n`.
pub fn check_duality(trials: usize, seed: u64) -> Result<Vec<InequalityRecord>> {
    let mut instances = Vec::new();
    for trial in 0..trials {
        let mut r = rng(seed, 4, trial);
        let m = r.random_range(1..=8usize);
        let weights: Vec<f64> = (0..m).map(|_| 10f64.powf(r.random_range(-1.0..1.0))).collect();
        instances.extend((1..=m).map(|n| Instance::Duality {
            weights: weights.clone(),
            n,
        }));
    }
    collect(instances)
}

/// Single-level f-norms against their closed form.
pub fn check_norm_identities(trials: usize, seed: u64) -> Result<Vec<InequalityRecord>> {
    const P: [f64; 4] = [1.0, 1.5, 2.0, 3.0];
    const T: [f64; 3] = [-1.0, 0.0, 1.0];
    let mut instances = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut r = rng(seed, 5, trial);
        let d = r.random_range(1..=3usize);
        let mu = r.random_range(0..=6u32);
        let dim = block_dim(mu, d)? as usize;
        let values = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let p = P[r.random_range(0..P.len())];
        let t = T[r.random_range(0..T.len())];
        instances.push(Instance::NormIdentity { d, mu, t, p, values });
    }
    collect(instances)
}

/// Level enumeration against the dimension formulas.
pub fn check_tiling(max_level: u32) -> Result<Vec<InequalityRecord>> {
    let instances = (1..=3usize)
        .flat_map(|d| (0..=max_level).map(move |mu| Instance::Tiling { mu, d }))
        .collect();
    collect(instances)
}

/// Runs the selected checks.
pub fn run_suite(suite: Suite, config: &SuiteConfig) -> Result<Vec<InequalityRecord>> {
    let mut out = Vec::new();
    let want = |s: Suite| suite == Suite::All || suite == s;
    if want(Suite::Axioms) {
        out.extend(check_axioms(config.trials, config.seed, config.fault)?);
    }
    if want(Suite::Web) {
        out.extend(check_bernstein_entropy(config.matrix_trials, config.seed)?);
        out.extend(check_eigen_entropy(config.matrix_trials, config.seed)?);
        out.extend(check_weyl_eigenvalue(config.matrix_trials, config.seed)?);
        out.extend(check_duality(config.matrix_trials.min(100), config.seed)?);
    }
    if want(Suite::Norms) {
        out.extend(check_norm_identities(config.matrix_trials, config.seed)?);
    }
    if want(Suite::Tiling) {
        out.extend(check_tiling(8)?);
    }
    Ok(out)
}

/// Pass and fail counts per check name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub total: usize,
    pub failures: usize,
    pub by_name: BTreeMap<String, (usize, usize)>,
}

impl SuiteSummary {
    pub fn from_records(records: &[InequalityRecord]) -> Self {
        let mut s = SuiteSummary::default();
        for r in records {
            s.total += 1;
            let entry = s.by_name.entry(r.name.clone()).or_default();
            if r.pass {
                entry.0 += 1;
            } else {
                entry.1 += 1;
                s.failures += 1;
            }
        }
        s
    }
}

/// One JSON object per line.
pub fn to_json_lines(records: &[InequalityRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::InvalidParameter(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}
