//! Predicted asymptotic exponents of Weyl, Bernstein and entropy numbers of
//! `id: S^t_{p1} H -> L_{p2}` on the unit cube, plus least-squares fitting of
//! empirical exponents.
//!
//! A rate `n^{n_power} (log n)^{log_power}` is reported with the identifier of
//! the case it came from. Parameters on a case boundary are reported as open.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::exact::{Comparison, Real};

/// Parameters `(p1, p2, t, d)` of the embedding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub p1: Real,
    pub p2: Real,
    pub t: Real,
    pub d: usize,
}

impl ParamSpace {
    pub fn new(p1: Real, p2: Real, t: Real, d: usize) -> Result<Self> {
        let params = Self { p1, p2, t, d };
        if d == 0 {
            return Err(Error::InvalidParameter("dimension d must be at least 1".into()));
        }
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !(p.value() > 1.0 && p.value().is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {p} must lie in (1, inf)")));
            }
        }
        if !t.value().is_finite() {
            return Err(Error::InvalidParameter(format!("t = {t} must be finite")));
        }
        Ok(params)
    }

    /// Parses decimal strings so that thresholds are compared exactly.
    pub fn parse(p1: &str, p2: &str, t: &str, d: usize) -> Result<Self> {
        Self::new(p1.parse()?, p2.parse()?, t.parse()?, d)
    }

    /// Float constructor; thresholds then use the guard band.
    pub fn from_f64(p1: f64, p2: f64, t: f64, d: usize) -> Result<Self> {
        Self::new(Real::float(p1), Real::float(p2), Real::float(t), d)
    }

    pub fn p1(&self) -> f64 {
        self.p1.value()
    }

    pub fn p2(&self) -> f64 {
        self.p2.value()
    }

    pub fn t(&self) -> f64 {
        self.t.value()
    }

    /// `(1/p1 - 1/p2)_+`.
    pub fn compactness_threshold(&self) -> Real {
        (self.p1.recip() - self.p2.recip()).positive_part()
    }

    pub fn check_compact(&self) -> Result<()> {
        let thr = self.compactness_threshold();
        if self.t.gt(&thr) {
            Ok(())
        } else {
            Err(Error::NotCompact {
                t: self.t(),
                threshold: thr.value(),
            })
        }
    }

    /// Low-smoothness threshold `(1/p2 - 1/p1) / (p1/2 - 1)` for `p2 >= 2`, and `1/p1` below.
    pub fn low_smoothness_threshold(&self) -> Real {
        let two = Real::integer(2);
        if self.p2.ge(&two) {
            (self.p2.recip() - self.p1.recip()) / (self.p1 / two - Real::integer(1))
        } else {
            self.p1.recip()
        }
    }
}

/// Which width a rate describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Weyl,
    Bernstein,
    Entropy,
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateKind::Weyl => "weyl",
            RateKind::Bernstein => "bernstein",
            RateKind::Entropy => "entropy",
        })
    }
}

/// Limiting target spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitTarget {
    Linf,
    L1,
}

/// Identifier of a case of the rate table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    #[serde(rename = "weyl-i")]
    WeylI,
    #[serde(rename = "weyl-ii")]
    WeylII,
    #[serde(rename = "weyl-iii")]
    WeylIII,
    #[serde(rename = "weyl-iv")]
    WeylIV,
    #[serde(rename = "weyl-v")]
    WeylV,
    #[serde(rename = "bernstein-i")]
    BernsteinI,
    #[serde(rename = "bernstein-ii")]
    BernsteinII,
    #[serde(rename = "bernstein-iii")]
    BernsteinIII,
    #[serde(rename = "bernstein-iv")]
    BernsteinIV,
    #[serde(rename = "entropy")]
    Entropy,
    #[serde(rename = "linf-small-p")]
    LinfSmallP,
    #[serde(rename = "linf-large-p")]
    LinfLargeP,
    #[serde(rename = "linf-open")]
    LinfOpen,
    #[serde(rename = "l1-small-p")]
    L1SmallP,
    #[serde(rename = "l1-large-p")]
    L1LargeP,
    #[serde(rename = "l1-low")]
    L1Low,
    #[serde(rename = "l1-open")]
    L1Open,
    /// Smoothness exactly on a threshold between two closed cases.
    #[serde(rename = "boundary")]
    Boundary,
}

impl CaseId {
    pub const ALL: [CaseId; 18] = [
        CaseId::WeylI,
        CaseId::WeylII,
        CaseId::WeylIII,
        CaseId::WeylIV,
        CaseId::WeylV,
        CaseId::BernsteinI,
        CaseId::BernsteinII,
        CaseId::BernsteinIII,
        CaseId::BernsteinIV,
        CaseId::Entropy,
        CaseId::LinfSmallP,
        CaseId::LinfLargeP,
        CaseId::LinfOpen,
        CaseId::L1SmallP,
        CaseId::L1LargeP,
        CaseId::L1Low,
        CaseId::L1Open,
        CaseId::Boundary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::WeylI => "weyl-i",
            CaseId::WeylII => "weyl-ii",
            CaseId::WeylIII => "weyl-iii",
            CaseId::WeylIV => "weyl-iv",
            CaseId::WeylV => "weyl-v",
            CaseId::BernsteinI => "bernstein-i",
            CaseId::BernsteinII => "bernstein-ii",
            CaseId::BernsteinIII => "bernstein-iii",
            CaseId::BernsteinIV => "bernstein-iv",
            CaseId::Entropy => "entropy",
            CaseId::LinfSmallP => "linf-small-p",
            CaseId::LinfLargeP => "linf-large-p",
            CaseId::LinfOpen => "linf-open",
            CaseId::L1SmallP => "l1-small-p",
            CaseId::L1LargeP => "l1-large-p",
            CaseId::L1Low => "l1-low",
            CaseId::L1Open => "l1-open",
            CaseId::Boundary => "boundary",
        }
    }

    pub fn is_open(self) -> bool {
        matches!(self, CaseId::LinfOpen | CaseId::L1Open | CaseId::Boundary)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `n^{n_power} (log n)^{log_power}`; both powers are absent for open cases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateExponent {
    pub kind: RateKind,
    pub case_id: CaseId,
    pub n_power: Option<f64>,
    pub log_power: Option<f64>,
    pub open: bool,
}

impl RateExponent {
    /// `n^{-alpha} (log n)^{(d-1) alpha}`.
    pub fn coinciding(kind: RateKind, case_id: CaseId, alpha: f64, d: usize) -> Self {
        Self::pair(kind, case_id, -alpha, (d as f64 - 1.0) * alpha)
    }

    pub fn pair(kind: RateKind, case_id: CaseId, n_power: f64, log_power: f64) -> Self {
        Self {
            kind,
            case_id,
            n_power: Some(n_power + 0.0),
            log_power: Some(log_power + 0.0),
            open: false,
        }
    }

    pub fn open(kind: RateKind, case_id: CaseId) -> Self {
        Self {
            kind,
            case_id,
            n_power: None,
            log_power: None,
            open: true,
        }
    }

    /// Decay exponent `-n_power`, if closed.
    pub fn decay(&self) -> Option<f64> {
        self.n_power.map(|p| -p)
    }

    /// Rate of `C a^{1-theta} b^theta` at index `n + m - 1` when `n` and `m` grow proportionally.
    pub fn interpolate(&self, other: &Self, theta: f64) -> Option<(f64, f64)> {
        Some((
            (1.0 - theta) * self.n_power? + theta * other.n_power?,
            (1.0 - theta) * self.log_power? + theta * other.log_power?,
        ))
    }

    /// Rate of the geometric-mean Bernstein bound `e (prod_{k<=n} x_k)^{1/n}` at index `2n - 1`.
    ///
    /// For polynomial-logarithmic `x_k` the geometric mean keeps both powers.
    pub fn geometric_mean(&self) -> Option<(f64, f64)> {
        Some((self.n_power?, self.log_power?))
    }
}

fn two() -> Real {
    Real::integer(2)
}

/// Checks `t` against `threshold`: `Some(true)` above, `Some(false)` below, `None` on it.
fn side(t: &Real, threshold: &Real) -> Option<bool> {
    match t.compare(threshold) {
        Comparison::Greater => Some(true),
        Comparison::Less => Some(false),
        Comparison::Equal => None,
    }
}

/// Weyl exponent: five cases.
pub fn predict_weyl(params: &ParamSpace) -> Result<RateExponent> {
    params.check_compact()?;
    let (p1, p2, t, d) = (params.p1, params.p2, params.t, params.d);
    let half = Real::rational(1, 2);
    let k = RateKind::Weyl;
    let closed = |case, alpha: Real| Ok(RateExponent::coinciding(k, case, alpha.value(), d));
    if p1.le(&two()) && p2.le(&two()) {
        return closed(CaseId::WeylI, t);
    }
    if p1.le(&two()) && two().le(&p2) {
        return closed(CaseId::WeylII, t - half + p2.recip());
    }
    if two().lt(&p1) && p1.le(&p2) {
        return closed(CaseId::WeylIV, t - p1.recip() + p2.recip());
    }
    // Remaining: p2 < p1 with p1 > 2.
    let thr = params.low_smoothness_threshold();
    match side(&t, &thr) {
        None => Ok(RateExponent::open(k, CaseId::Boundary)),
        Some(false) => closed(CaseId::WeylV, t * p1 / two()),
        Some(true) if p2.lt(&two()) => closed(CaseId::WeylIII, t - p1.recip() + half),
        Some(true) => closed(CaseId::WeylIV, t - p1.recip() + p2.recip()),
    }
}

/// Bernstein exponent: four cases.
pub fn predict_bernstein(params: &ParamSpace) -> Result<RateExponent> {
    params.check_compact()?;
    let (p1, p2, t, d) = (params.p1, params.p2, params.t, params.d);
    let half = Real::rational(1, 2);
    let k = RateKind::Bernstein;
    let closed = |case, alpha: Real| Ok(RateExponent::coinciding(k, case, alpha.value(), d));
    if p1.le(&p2) || p1.le(&two()) {
        return closed(CaseId::BernsteinI, t);
    }
    let thr = params.low_smoothness_threshold();
    match side(&t, &thr) {
        None => Ok(RateExponent::open(k, CaseId::Boundary)),
        Some(false) => closed(CaseId::BernsteinIV, t * p1 / two()),
        Some(true) if p2.lt(&two()) => closed(CaseId::BernsteinII, t - p1.recip() + half),
        Some(true) => closed(CaseId::BernsteinIII, t - p1.recip() + p2.recip()),
    }
}

/// Entropy exponent: always `t`.
pub fn predict_entropy(params: &ParamSpace) -> Result<RateExponent> {
    params.check_compact()?;
    Ok(RateExponent::coinciding(
        RateKind::Entropy,
        CaseId::Entropy,
        params.t(),
        params.d,
    ))
}

/// Weyl exponents for the limiting targets `L_inf` and `L_1` with source exponent `p`.
pub fn predict_limiting(p: Real, t: Real, d: usize, target: LimitTarget) -> Result<RateExponent> {
    if !(p.value() > 1.0 && p.value().is_finite()) || d == 0 || !t.value().is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need 1 < p < inf and d >= 1, got p = {p}, d = {d}"
        )));
    }
    let k = RateKind::Weyl;
    let dm1 = d as f64 - 1.0;
    let half = Real::rational(1, 2);
    let inv_p = p.recip();
    let pair = |case, n: Real, l: Real| Ok(RateExponent::pair(k, case, n.value(), dm1 * l.value()));
    match target {
        LimitTarget::Linf => {
            if !t.gt(&inv_p) {
                return Err(Error::NotCompact {
                    t: t.value(),
                    threshold: inv_p.value(),
                });
            }
            if p.le(&two()) {
                pair(CaseId::LinfSmallP, -t + half, t)
            } else if t.gt(&(inv_p + half)) {
                pair(CaseId::LinfLargeP, -t + inv_p, t - inv_p + half)
            } else {
                Ok(RateExponent::open(k, CaseId::LinfOpen))
            }
        }
        LimitTarget::L1 => {
            if !t.gt(&Real::integer(0)) {
                return Err(Error::NotCompact {
                    t: t.value(),
                    threshold: 0.0,
                });
            }
            if p.le(&two()) {
                return pair(CaseId::L1SmallP, -t, t);
            }
            match side(&t, &inv_p) {
                None => Ok(RateExponent::open(k, CaseId::L1Open)),
                Some(true) => pair(CaseId::L1LargeP, -t + inv_p - half, t - inv_p + half),
                Some(false) => {
                    let a = t * p / two();
                    pair(CaseId::L1Low, -a, a)
                }
            }
        }
    }
}

/// Rate of the pointwise minimum of two closed rates: the faster decay wins.
pub fn min_value_rate(a: &RateExponent, b: &RateExponent) -> Option<(f64, f64)> {
    let (da, db) = (a.decay()?, b.decay()?);
    if da >= db {
        Some((a.n_power?, a.log_power?))
    } else {
        Some((b.n_power?, b.log_power?))
    }
}

/// Options for [`fit_rate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Fraction of the smallest `n` discarded before fitting.
    pub discard_fraction: f64,
    /// Confidence level of the reported interval.
    pub confidence: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            discard_fraction: 0.25,
            confidence: 0.95,
        }
    }
}

/// Least-squares slope of `ln value` against `ln(n / (ln n)^{d-1})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Root mean square of the residuals.
    pub residual: f64,
    pub samples_used: usize,
    pub discard_fraction: f64,
}

/// Independent fit `ln value = a ln n + b ln ln n + c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPowerFit {
    pub n_power: f64,
    pub log_power: f64,
    pub intercept: f64,
    pub residual: f64,
    pub samples_used: usize,
}

fn prepare(samples: &[(f64, f64)], options: &FitOptions) -> Result<Vec<(f64, f64)>> {
    if samples.len() < 4 {
        return Err(Error::Degenerate(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples
        .iter()
        .find(|(n, v)| !(*n >= 2.0) || !(*v > 0.0) || !v.is_finite())
    {
        return Err(Error::Degenerate(format!(
            "sample {bad:?} needs n >= 2 and a positive value"
        )));
    }
    if !(0.0..1.0).contains(&options.discard_fraction) {
        return Err(Error::InvalidParameter("discard fraction must lie in [0, 1)".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let drop = ((sorted.len() as f64) * options.discard_fraction).floor() as usize;
    let kept = sorted.split_off(drop.min(sorted.len() - 3));
    if kept.iter().all(|s| s.0 == kept[0].0) {
        return Err(Error::Degenerate("all samples share the same n".into()));
    }
    Ok(kept)
}

/// Fits the common power of `n` and `log n` to `(n, value)` samples.
pub fn fit_rate(samples: &[(f64, f64)], d: usize, options: &FitOptions) -> Result<RateFit> {
    let kept = prepare(samples, options)?;
    let dm1 = d.saturating_sub(1) as f64;
    let xs: Vec<f64> = kept.iter().map(|(n, _)| n.ln() - dm1 * n.ln().ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::Degenerate("abscissae do not vary".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = k - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let quantile = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Degenerate(e.to_string()))?
        .inverse_cdf(0.5 + options.confidence / 2.0);
    Ok(RateFit {
        slope,
        intercept,
        ci_low: slope - quantile * se,
        ci_high: slope + quantile * se,
        residual: (sse / k).sqrt(),
        samples_used: xs.len(),
        discard_fraction: options.discard_fraction,
    })
}

/// Fits the powers of `n` and `log n` separately.
pub fn fit_two_powers(samples: &[(f64, f64)], options: &FitOptions) -> Result<TwoPowerFit> {
    let kept = prepare(samples, options)?;
    let design = DMatrix::from_fn(kept.len(), 3, |i, j| {
        let n = kept[i].0;
        match j {
            0 => n.ln(),
            1 => n.ln().ln(),
            _ => 1.0,
        }
    });
    let y = DVector::from_iterator(kept.len(), kept.iter().map(|(_, v)| v.ln()));
    let svd = design.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-12).map_err(|e| Error::Degenerate(e.to_string()))?;
    let resid = &design * &coef - &y;
    Ok(TwoPowerFit {
        n_power: coef[0],
        log_power: coef[1],
        intercept: coef[2],
        residual: (resid.norm_squared() / kept.len() as f64).sqrt(),
        samples_used: kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ps(p1: &str, p2: &str, t: &str, d: usize) -> ParamSpace {
        ParamSpace::parse(p1, p2, t, d).unwrap()
    }

    fn alpha(r: RateExponent) -> f64 {
        r.decay().unwrap()
    }

    #[test]
    fn weyl_examples() {
        let r = predict_weyl(&ps("2", "2", "1", 2)).unwrap();
        assert_eq!(
            (r.case_id, r.n_power, r.log_power),
            (CaseId::WeylI, Some(-1.0), Some(1.0))
        );
        let r = predict_weyl(&ps("2", "4", "1", 2)).unwrap();
        assert_eq!(r.case_id, CaseId::WeylII);
        assert_relative_eq!(alpha(r), 0.75);
        let r = predict_weyl(&ps("4", "2", "0.2", 2)).unwrap();
        assert_eq!(r.case_id, CaseId::WeylV);
        assert_relative_eq!(alpha(r), 0.4);
        assert!(predict_weyl(&ps("2", "4", "0.2", 2)).is_err());
    }

    #[test]
    fn bernstein_examples() {
        let r = predict_bernstein(&ps("1.5", "3", "1", 2)).unwrap();
        assert_eq!(r.case_id, CaseId::BernsteinI);
        assert_relative_eq!(alpha(r), 1.0);
        let r = predict_bernstein(&ps("4", "1.5", "1", 2)).unwrap();
        assert_eq!(r.case_id, CaseId::BernsteinII);
        assert_relative_eq!(alpha(r), 1.25);
        let r = predict_bernstein(&ps("4", "2", "0.2", 2)).unwrap();
        assert_eq!(r.case_id, CaseId::BernsteinIV);
        assert_relative_eq!(alpha(r), 0.4);
    }

    #[test]
    fn thresholds_are_exact() {
        // p1 = 4, p2 = 2: threshold 1/4 exactly.
        assert_eq!(
            predict_weyl(&ps("4", "2", "0.25", 2)).unwrap().case_id,
            CaseId::Boundary
        );
        assert!(predict_bernstein(&ps("4", "2", "0.25", 2)).unwrap().open);
        // p1 = 3, p2 = 2.5: (0.4 - 1/3) / 0.5 = 2/15, not a terminating decimal.
        let p = ParamSpace::new("3".parse().unwrap(), "2.5".parse().unwrap(), Real::rational(2, 15), 2).unwrap();
        assert!(predict_weyl(&p).unwrap().open);
        let above = ParamSpace::new(
            p.p1,
            p.p2,
            Real::rational(2, 15) + Real::rational(1, 10_i128.pow(20)),
            2,
        )
        .unwrap();
        assert_eq!(predict_weyl(&above).unwrap().case_id, CaseId::WeylIV);
    }

    #[test]
    fn entropy_examples() {
        let r = predict_entropy(&ps("1.5", "3", "1", 3)).unwrap();
        assert_eq!((r.n_power, r.log_power), (Some(-1.0), Some(2.0)));
        assert_eq!(predict_entropy(&ps("4", "2", "0.7", 2)).unwrap().n_power, Some(-0.7));
    }

    #[test]
    fn limiting_examples() {
        let r = predict_limiting("2".parse().unwrap(), "1".parse().unwrap(), 2, LimitTarget::Linf).unwrap();
        assert_eq!(
            (r.case_id, r.n_power, r.log_power),
            (CaseId::LinfSmallP, Some(-0.5), Some(1.0))
        );
        let r = predict_limiting("4".parse().unwrap(), "0.2".parse().unwrap(), 2, LimitTarget::L1).unwrap();
        assert_eq!(r.case_id, CaseId::L1Low);
        assert_relative_eq!(r.n_power.unwrap(), -0.4);
        assert_relative_eq!(r.log_power.unwrap(), 0.4);
        let r = predict_limiting("4".parse().unwrap(), "0.6".parse().unwrap(), 2, LimitTarget::Linf).unwrap();
        assert!(r.open && r.n_power.is_none());
        let r = predict_limiting("4".parse().unwrap(), "0.75".parse().unwrap(), 2, LimitTarget::Linf).unwrap();
        assert_eq!(r.case_id, CaseId::LinfOpen);
        let r = predict_limiting("4".parse().unwrap(), "1".parse().unwrap(), 3, LimitTarget::Linf).unwrap();
        assert_eq!(r.case_id, CaseId::LinfLargeP);
        assert_relative_eq!(r.n_power.unwrap(), -0.75);
        assert_relative_eq!(r.log_power.unwrap(), 2.0 * 1.25);
        let r = predict_limiting("4".parse().unwrap(), "0.25".parse().unwrap(), 2, LimitTarget::L1).unwrap();
        assert_eq!(r.case_id, CaseId::L1Open);
        let r = predict_limiting("4".parse().unwrap(), "1".parse().unwrap(), 2, LimitTarget::L1).unwrap();
        assert_eq!(r.case_id, CaseId::L1LargeP);
        assert_relative_eq!(r.n_power.unwrap(), -1.25);
        assert_relative_eq!(r.log_power.unwrap(), 1.25);
        assert!(predict_limiting("4".parse().unwrap(), "0.2".parse().unwrap(), 2, LimitTarget::Linf).is_err());
        assert!(predict_limiting("1".parse().unwrap(), "1".parse().unwrap(), 2, LimitTarget::L1).is_err());
    }

    #[test]
    fn interpolated_rate_recovers_t() {
        // p1 < p2 < 2: combine the rate at t - t1 (target p1) with the rate at t - t2 (target 2).
        let (p1, p2, t, d) = (1.25f64, 1.6f64, 1.1f64, 2);
        let theta = (1.0 / p1 - 1.0 / p2) / (1.0 / p1 - 0.5);
        let t1 = 1.0 / p1 - 1.0 / p2;
        let t2 = 0.5 - 1.0 / p2;
        let r0 = predict_weyl(&ParamSpace::from_f64(p1, p1, t - t1, d).unwrap()).unwrap();
        let r1 = predict_weyl(&ParamSpace::from_f64(p1, 2.0, t - t2, d).unwrap()).unwrap();
        let (n_pow, l_pow) = r0.interpolate(&r1, theta).unwrap();
        let direct = predict_weyl(&ParamSpace::from_f64(p1, p2, t, d).unwrap()).unwrap();
        assert_relative_eq!(n_pow, direct.n_power.unwrap(), epsilon = 1e-12);
        assert_relative_eq!(l_pow, direct.log_power.unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn fit_exact_and_constant() {
        let samples: Vec<(f64, f64)> = (2..12).map(|j| 2f64.powi(j)).map(|n| (n, n.ln() / n)).collect();
        let fit = fit_rate(&samples, 2, &FitOptions::default()).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (2..12).map(|j| (2f64.powi(j), 3.0)).collect();
        assert!(fit_rate(&flat, 2, &FitOptions::default()).unwrap().slope.abs() < 1e-12);
        assert!(fit_rate(&flat[..3], 2, &FitOptions::default()).is_err());
        let same: Vec<(f64, f64)> = (0..6).map(|i| (8.0, 1.0 + i as f64)).collect();
        assert!(matches!(
            fit_rate(&same, 2, &FitOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn fit_noisy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let samples: Vec<(f64, f64)> = (4..=20)
            .map(|j| {
                let n = 2f64.powi(j);
                (n, (n / n.ln()).powf(-0.7) * (1.0 + noise.sample(&mut rng)))
            })
            .collect();
        let fit = fit_rate(&samples, 2, &FitOptions::default()).unwrap();
        assert!((fit.slope + 0.7).abs() < 0.05, "{fit:?}");
        assert!(fit.ci_low <= fit.slope && fit.slope <= fit.ci_high);
    }

    #[test]
    fn two_power_fit() {
        let samples: Vec<(f64, f64)> = (3..16)
            .map(|j| 2f64.powi(j))
            .map(|n| (n, 2.0 * n.powf(-0.5) * n.ln().powf(1.5)))
            .collect();
        let fit = fit_two_powers(
            &samples,
            &FitOptions {
                discard_fraction: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_relative_eq!(fit.n_power, -0.5, epsilon = 1e-9);
        assert_relative_eq!(fit.log_power, 1.5, epsilon = 1e-9);
        assert_relative_eq!(fit.intercept, 2f64.ln(), epsilon = 1e-9);
    }

    fn exponent() -> impl Strategy<Value = f64> {
        prop_oneof![1.05f64..6.0, Just(2.0), Just(4.0), Just(1.5)]
    }

    proptest! {
        #[test]
        fn total_and_coherent(p1 in exponent(), p2 in exponent(), t in 0.0f64..3.0, d in 1usize..4) {
            let params = ParamSpace::from_f64(p1, p2, t, d).unwrap();
            let w = predict_weyl(&params);
            let b = predict_bernstein(&params);
            let e = predict_entropy(&params);
            prop_assert_eq!(w.is_ok(), params.check_compact().is_ok());
            prop_assert_eq!(b.is_ok(), w.is_ok());
            if let (Ok(w), Ok(b), Ok(e)) = (w, b, e) {
                for r in [w, b, e] {
                    if let (Some(n), Some(l)) = (r.n_power, r.log_power) {
                        prop_assert!((l + (d as f64 - 1.0) * n).abs() < 1e-12);
                        prop_assert!(n < 0.0);
                    } else {
                        prop_assert!(r.open);
                    }
                }
                if !w.open && !b.open {
                    let (n, l) = min_value_rate(&w, &e).unwrap();
                    prop_assert!((b.n_power.unwrap() - n).abs() < 1e-12);
                    prop_assert!((b.log_power.unwrap() - l).abs() < 1e-12);
                    prop_assert!(b.decay().unwrap() >= w.decay().unwrap() - 1e-12);
                    prop_assert!(b.decay().unwrap() >= e.decay().unwrap() - 1e-12);
                }
            }
        }
    }
}
