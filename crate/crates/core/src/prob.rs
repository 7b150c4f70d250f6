//! Discrete distributions and the distances and speeds built on them.
//!
//! The squared statistical speed of a parametric family `P(μ|θ)` is the
//! classical Fisher information `Σ_μ (∂θ P)² / P`. The Hellinger distance
//! `ℓ = 2‖√p − √q‖` grows as `υ·δθ` around the reference phase, and the
//! Kullback-Leibler entropy as `υ²δθ²/2`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const NORM_TOL: f64 = 1e-12;
const DERIV_SUM_TOL: f64 = 1e-10;
/// Maximum number of draw sequences `|outcomes|^m` enumerated by
/// [`mean_moment_distribution`].
pub const MOMENT_ENUMERATION_CAP: u64 = 10_000_000;
/// Default central-difference step in radians.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Outcome labels with normalized probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    outcomes: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if outcomes.len() != probs.len() {
            return domain(format!(
                "{} outcomes but {} probabilities",
                outcomes.len(),
                probs.len()
            ));
        }
        if outcomes.is_empty() {
            return domain("empty distribution");
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return domain(format!("probability {p} at index {i} outside [0, 1]"));
            }
        }
        for i in 0..outcomes.len() {
            if !outcomes[i].is_finite() {
                return domain(format!("non-finite outcome label at index {i}"));
            }
            if outcomes[..i].contains(&outcomes[i]) {
                return domain(format!("duplicate outcome label {}", outcomes[i]));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return domain(format!("probabilities sum to {total}, not 1"));
        }
        Ok(Self { outcomes, probs })
    }

    /// Two-outcome distribution over `{-1, +1}` with `P(+1) = p_plus`.
    pub fn dichotomic(p_plus: f64) -> Result<Self> {
        Self::new(vec![-1.0, 1.0], vec![1.0 - p_plus, p_plus])
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob_of(&self, outcome: f64) -> Option<f64> {
        self.outcomes
            .iter()
            .position(|&o| o == outcome)
            .map(|i| self.probs[i])
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.outcomes
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| (x - mu) * (x - mu) * p)
            .sum()
    }

    fn check_same_support(&self, other: &Self) -> Result<()> {
        if self.outcomes != other.outcomes {
            return domain("distributions are defined on different outcome sets");
        }
        Ok(())
    }
}

type ProbFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A map `θ ↦ P(·|θ)` over a fixed outcome set, optionally with an analytic
/// derivative `θ ↦ ∂θ P(·|θ)`.
#[derive(Clone)]
pub struct ParametricFamily {
    outcomes: Vec<f64>,
    probs: ProbFn,
    derivs: Option<ProbFn>,
}

impl fmt::Debug for ParametricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricFamily")
            .field("outcomes", &self.outcomes)
            .field("analytic_derivative", &self.derivs.is_some())
            .finish()
    }
}

impl ParametricFamily {
    pub fn new<F>(outcomes: Vec<f64>, probs: F) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            outcomes,
            probs: Arc::new(probs),
            derivs: None,
        }
    }

    pub fn with_derivative<D>(mut self, derivs: D) -> Self
    where
        D: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        self.derivs = Some(Arc::new(derivs));
        self
    }

    /// Parity fringe `P(±1|θ) = (1 ± V cos Nθ)/2` with its analytic derivative.
    pub fn parity_fringe(visibility: f64, n: usize) -> Self {
        let nf = n as f64;
        Self::new(vec![-1.0, 1.0], move |theta| {
            let c = visibility * (nf * theta).cos();
            vec![(1.0 - c) / 2.0, (1.0 + c) / 2.0]
        })
        .with_derivative(move |theta| {
            let d = -visibility * nf * (nf * theta).sin() / 2.0;
            vec![-d, d]
        })
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn has_derivative(&self) -> bool {
        self.derivs.is_some()
    }

    pub fn evaluate(&self, theta: f64) -> Result<DiscreteDistribution> {
        let probs = (self.probs)(theta);
        if probs.len() != self.outcomes.len() {
            return domain(format!(
                "family returned {} probabilities for {} outcomes at θ = {theta}",
                probs.len(),
                self.outcomes.len()
            ));
        }
        DiscreteDistribution::new(self.outcomes.clone(), probs)
    }

    /// Analytic derivative at `theta`; `Ok(None)` when the family has none.
    pub fn derivative(&self, theta: f64) -> Result<Option<Vec<f64>>> {
        let Some(d) = &self.derivs else {
            return Ok(None);
        };
        let dp = d(theta);
        if dp.len() != self.outcomes.len() {
            return domain("derivative length does not match the outcome set");
        }
        let total: f64 = dp.iter().sum();
        if total.abs() > DERIV_SUM_TOL {
            return domain(format!("derivatives sum to {total}, not 0"));
        }
        Ok(Some(dp))
    }
}

/// Where an estimate of `υ²` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedMethod {
    AnalyticDerivative,
    FiniteDifference,
    HellingerFit,
    KlFit,
    Visibility,
    Moments,
    Oracle,
}

impl fmt::Display for SpeedMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpeedMethod::AnalyticDerivative => "analytic-derivative",
            SpeedMethod::FiniteDifference => "finite-difference",
            SpeedMethod::HellingerFit => "hellinger-fit",
            SpeedMethod::KlFit => "kl-fit",
            SpeedMethod::Visibility => "visibility",
            SpeedMethod::Moments => "moments",
            SpeedMethod::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

/// Squared statistical speed with a one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: SpeedMethod,
    pub theta0: f64,
}

impl SpeedEstimate {
    pub fn new(value: f64, stderr: f64, method: SpeedMethod, theta0: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return domain(format!("speed value {value} must be finite and ≥ 0"));
        }
        if !(stderr >= 0.0) || !stderr.is_finite() {
            return domain(format!("speed stderr {stderr} must be finite and ≥ 0"));
        }
        Ok(Self {
            value,
            stderr,
            method,
            theta0,
        })
    }
}

/// How [`fisher_information`] obtains `∂θ P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivative {
    Analytic,
    /// Central differences at `step` and `step/2`.
    FiniteDifference { step: f64 },
}

impl Default for Derivative {
    fn default() -> Self {
        Derivative::FiniteDifference {
            step: DEFAULT_FD_STEP,
        }
    }
}

/// `Σ_μ √(p_μ q_μ)`.
pub fn bhattacharyya(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    p.check_same_support(q)?;
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a * b).sqrt())
        .sum())
}

/// `ℓ = 2·√(Σ_μ (√p_μ − √q_μ)²)`, in `[0, 2√2]`.
pub fn hellinger_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    p.check_same_support(q)?;
    let s: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    Ok(2.0 * s.sqrt())
}

/// Squared Hellinger distance of `m` independent repetitions,
/// `ℓ_m² = 8[1 − BC(p,q)^m]`.
pub fn hellinger_m(p: &DiscreteDistribution, q: &DiscreteDistribution, m: u32) -> Result<f64> {
    if m == 0 {
        return domain("number of repetitions m must be ≥ 1");
    }
    let bc = bhattacharyya(p, q)?.min(1.0);
    if m == 1 {
        // Direct sum avoids cancellation in 1 − BC for nearby distributions.
        let l = hellinger_distance(p, q)?;
        return Ok(l * l);
    }
    // 1 − bc^m = −expm1(m ln bc)
    Ok(-8.0 * (m as f64 * bc.ln()).exp_m1())
}

/// `D_KL(p‖q) = Σ_μ p_μ ln(p_μ/q_μ)` with `0·ln(0/q) = 0`.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    p.check_same_support(q)?;
    let mut total = 0.0;
    for (i, (&a, &b)) in p.probs.iter().zip(&q.probs).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::InfiniteDivergence(i));
        }
        total += a * (a / b).ln();
    }
    Ok(total.max(0.0))
}

/// `Σ_μ (∂θ P)² / P`, skipping outcomes with zero probability and zero slope.
fn fisher_sum(probs: &[f64], derivs: &[f64], zero_slope: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, (&p, &d)) in probs.iter().zip(derivs).enumerate() {
        if p <= 0.0 {
            if d.abs() > zero_slope {
                return Err(Error::Singular {
                    outcome: i,
                    derivative: d,
                });
            }
            continue;
        }
        total += d * d / p;
    }
    Ok(total)
}

fn central_difference(f: &ParametricFamily, theta0: f64, step: f64) -> Result<Vec<f64>> {
    let hi = f.evaluate(theta0 + step)?;
    let lo = f.evaluate(theta0 - step)?;
    Ok(hi
        .probs
        .iter()
        .zip(&lo.probs)
        .map(|(a, b)| (a - b) / (2.0 * step))
        .collect())
}

/// Squared statistical speed (classical Fisher information) at `theta0`.
///
/// In finite-difference mode the value comes from the half step and the
/// reported stderr is the absolute change against the full step.
pub fn fisher_information(
    f: &ParametricFamily,
    theta0: f64,
    mode: Derivative,
) -> Result<SpeedEstimate> {
    let p0 = f.evaluate(theta0)?;
    match mode {
        Derivative::Analytic => {
            let dp = f.derivative(theta0)?.ok_or_else(|| {
                Error::Domain("analytic mode requires a derivative evaluator".into())
            })?;
            let v = fisher_sum(&p0.probs, &dp, 0.0)?;
            SpeedEstimate::new(v, 0.0, SpeedMethod::AnalyticDerivative, theta0)
        }
        Derivative::FiniteDifference { step } => {
            if !(step > 0.0) || !step.is_finite() {
                return domain(format!("finite-difference step {step} must be > 0"));
            }
            let coarse = central_difference(f, theta0, step)?;
            let fine = central_difference(f, theta0, step / 2.0)?;
            let v_coarse = fisher_sum(&p0.probs, &coarse, 1e-12)?;
            let v_fine = fisher_sum(&p0.probs, &fine, 1e-12)?;
            SpeedEstimate::new(
                v_fine,
                (v_fine - v_coarse).abs(),
                SpeedMethod::FiniteDifference,
                theta0,
            )
        }
    }
}

/// Fisher information of a two-outcome distribution: `(∂θ P)² / (P(1−P))`.
pub fn dichotomic_speed(p0: f64, dp_dtheta: f64) -> Result<f64> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::Singular {
            outcome: usize::from(p0 >= 1.0),
            derivative: dp_dtheta,
        });
    }
    Ok(dp_dtheta * dp_dtheta / (p0 * (1.0 - p0)))
}

/// Leading-order speed from the mean and variance of an observable averaged
/// over `m` shots: `m·(∂θ⟨μ⟩)²/(Δμ)²`.
pub fn moments_speed_clt(dmean_dtheta: f64, variance: f64, m: u32) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return domain(format!("variance {variance} must be > 0"));
    }
    if m == 0 {
        return domain("number of shots m must be ≥ 1");
    }
    Ok(m as f64 * dmean_dtheta * dmean_dtheta / variance)
}

/// Aggregation key for a sum of `m` outcome labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SumKey {
    Exact(i64),
    Float(u64),
}

/// All multisets of `m` draws as per-outcome counts, with the mean label and
/// the multinomial coefficient, grouped by their sample mean.
struct MeanLayout {
    /// Mean label of each group, ascending.
    means: Vec<f64>,
    /// `(group index, counts, multinomial coefficient)` per multiset.
    multisets: Vec<(usize, Vec<u32>, f64)>,
}

fn compositions(k: usize, m: u32) -> Vec<Vec<u32>> {
    fn rec(k: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in (0..=left).rev() {
            cur.push(c);
            rec(k, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, m, &mut Vec::with_capacity(k), &mut out);
    out
}

fn multinomial(m: u32, counts: &[u32]) -> f64 {
    let mut ln = ln_factorial(m);
    for &c in counts {
        ln -= ln_factorial(c);
    }
    ln.exp().round()
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn mean_layout(outcomes: &[f64], m: u32) -> Result<MeanLayout> {
    if m == 0 {
        return domain("number of draws m must be ≥ 1");
    }
    let k = outcomes.len() as u64;
    let seqs = k.checked_pow(m).filter(|&s| s <= MOMENT_ENUMERATION_CAP);
    if seqs.is_none() {
        return Err(Error::Capacity(format!(
            "{k}^{m} draw sequences exceed the enumeration cap {MOMENT_ENUMERATION_CAP}"
        )));
    }
    let integral = outcomes
        .iter()
        .all(|x| x.fract() == 0.0 && x.abs() < (1u64 << 40) as f64);

    let mut groups: BTreeMap<SumKey, usize> = BTreeMap::new();
    let mut raw = Vec::new();
    for counts in compositions(outcomes.len(), m) {
        let key = if integral {
            SumKey::Exact(
                counts
                    .iter()
                    .zip(outcomes)
                    .map(|(&c, &x)| c as i64 * x as i64)
                    .sum(),
            )
        } else {
            let s: f64 = counts.iter().zip(outcomes).map(|(&c, x)| c as f64 * x).sum();
            SumKey::Float(ordered_bits(s))
        };
        let coef = multinomial(m, &counts);
        let next = groups.len();
        groups.entry(key).or_insert(next);
        raw.push((key, counts, coef));
    }

    // Float keys: merge neighbours that differ only by rounding.
    let mut keys: Vec<SumKey> = groups.keys().copied().collect();
    keys.sort();
    let mut means = Vec::new();
    let mut index_of: BTreeMap<SumKey, usize> = BTreeMap::new();
    let mut last: Option<f64> = None;
    for key in keys {
        let sum = match key {
            SumKey::Exact(s) => s as f64,
            SumKey::Float(b) => from_ordered_bits(b),
        };
        let merge = matches!(key, SumKey::Float(_))
            && last.is_some_and(|l| (sum - l).abs() <= 1e-12 * sum.abs().max(1.0));
        if !merge {
            means.push(sum / m as f64);
            last = Some(sum);
        }
        index_of.insert(key, means.len() - 1);
    }
    let multisets = raw
        .into_iter()
        .map(|(key, counts, coef)| (index_of[&key], counts, coef))
        .collect();
    Ok(MeanLayout { means, multisets })
}

fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_ordered_bits(b: u64) -> f64 {
    if b >> 63 == 1 {
        f64::from_bits(b & !(1 << 63))
    } else {
        f64::from_bits(!b)
    }
}

fn layout_probs(layout: &MeanLayout, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layout.means.len()];
    for (g, counts, coef) in &layout.multisets {
        let w: f64 = counts
            .iter()
            .zip(p)
            .map(|(&c, &pk)| pk.powi(c as i32))
            .product();
        out[*g] += coef * w;
    }
    out
}

fn layout_derivs(layout: &MeanLayout, p: &[f64], dp: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layout.means.len()];
    for (g, counts, coef) in &layout.multisets {
        let mut acc = 0.0;
        for k in 0..counts.len() {
            if counts[k] == 0 {
                continue;
            }
            let mut term = counts[k] as f64 * p[k].powi(counts[k] as i32 - 1) * dp[k];
            for j in 0..counts.len() {
                if j != k {
                    term *= p[j].powi(counts[j] as i32);
                }
            }
            acc += term;
        }
        out[*g] += coef * acc;
    }
    out
}

fn renormalize(mut probs: Vec<f64>) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        for p in &mut probs {
            *p = (*p / total).clamp(0.0, 1.0);
        }
    }
    probs
}

/// Exact distribution of the sample mean of `m` independent draws from
/// `f(theta)`. Coinciding means are aggregated; the outcome set contains every
/// attainable mean, including those with zero probability at `theta`.
pub fn mean_moment_distribution(
    f: &ParametricFamily,
    theta: f64,
    m: u32,
) -> Result<DiscreteDistribution> {
    let layout = mean_layout(f.outcomes(), m)?;
    let p = f.evaluate(theta)?;
    let probs = renormalize(layout_probs(&layout, p.probs()));
    DiscreteDistribution::new(layout.means, probs)
}

/// The family `θ ↦ P(μ̄|θ)` of sample means of `m` draws. Carries an analytic
/// derivative whenever `f` does.
pub fn mean_moment_family(f: &ParametricFamily, m: u32) -> Result<ParametricFamily> {
    let layout = Arc::new(mean_layout(f.outcomes(), m)?);
    let base = f.clone();
    let l1 = Arc::clone(&layout);
    let fam = ParametricFamily::new(layout.means.clone(), move |theta| {
        let p = (base.probs)(theta);
        renormalize(layout_probs(&l1, &p))
    });
    match &f.derivs {
        Some(_) => {
            let base = f.clone();
            let l2 = Arc::clone(&layout);
            Ok(fam.with_derivative(move |theta| {
                let p = (base.probs)(theta);
                let dp = (base.derivs.as_ref().expect("checked above"))(theta);
                layout_derivs(&l2, &p, &dp)
            }))
        }
        None => Ok(fam),
    }
}
