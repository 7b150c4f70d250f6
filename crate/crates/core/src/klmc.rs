//! Kullback-Leibler estimation of the statistical speed from finite samples.
//!
//! Two sets of `m` parity measurements, at `θ₀` and `θ₀ + δθ`, give
//! frequencies `f₀`, `f_δθ`; the plug-in divergence between them grows as
//! `υ²δθ²/2` plus a positive `O(1/m)` bias.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::prob::{SpeedEstimate, SpeedMethod};
use crate::witness::visibility_speed;

/// Generator used by [`simulate_parity_experiment`]. Each `δθ` index gets
/// its own ChaCha stream under the plan seed.
pub const RNG_ALGORITHM: &str = "chacha20/rand_chacha-0.9/seed_from_u64+stream=dtheta-index";

/// Plug-in dichotomic divergence
/// `f₀ ln(f₀/f_δθ) + (1−f₀) ln((1−f₀)/(1−f_δθ))`.
pub fn kl_from_frequencies(f0: f64, fdt: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f0) || !(0.0..=1.0).contains(&fdt) {
        return domain(format!("frequencies ({f0}, {fdt}) outside [0, 1]"));
    }
    let term = |p: f64, q: f64| -> Option<f64> {
        if p == 0.0 {
            Some(0.0)
        } else if q == 0.0 {
            None
        } else {
            Some(p * (p / q).ln())
        }
    };
    match (term(f0, fdt), term(1.0 - f0, 1.0 - fdt)) {
        (Some(a), Some(b)) => Ok((a + b).max(0.0)),
        _ => Err(Error::DegenerateFrequency { f0, fdt }),
    }
}

fn check_interior(p0: f64, pdt: f64, m: u64) -> Result<()> {
    if !(p0 > 0.0 && p0 < 1.0 && pdt > 0.0 && pdt < 1.0) {
        return domain(format!("probabilities ({p0}, {pdt}) must lie strictly inside (0, 1)"));
    }
    if m < 1 {
        return domain("m must be ≥ 1");
    }
    Ok(())
}

/// Leading-order bias `P₀/(2mP_δθ) + (1−P₀)/(2m(1−P_δθ))`.
pub fn bias_prediction(p0: f64, pdt: f64, m: u64) -> Result<f64> {
    check_interior(p0, pdt, m)?;
    let m = m as f64;
    Ok(p0 / (2.0 * m * pdt) + (1.0 - p0) / (2.0 * m * (1.0 - pdt)))
}

/// Leading-order variance
/// `(P₀−P_δθ)²/(m P_δθ(1−P_δθ)) + (P₀(1−P₀)/m) ln²[(1−P₀)P_δθ/((1−P_δθ)P₀)]`.
pub fn variance_prediction(p0: f64, pdt: f64, m: u64) -> Result<f64> {
    check_interior(p0, pdt, m)?;
    let m = m as f64;
    let log = ((1.0 - p0) * pdt / ((1.0 - pdt) * p0)).ln();
    Ok((p0 - pdt).powi(2) / (m * pdt * (1.0 - pdt)) + p0 * (1.0 - p0) / m * log * log)
}

/// `P(+1|θ) = (1 + V cos Nθ)/2`.
pub fn parity_probability(v: f64, n: usize, theta: f64) -> f64 {
    (1.0 + v * (n as f64 * theta).cos()) / 2.0
}

/// Exact divergence between the parity fringes at `θ₀` and `θ₀ + δθ`.
pub fn parity_kl(v: f64, n: usize, theta0: f64, dtheta: f64) -> Result<f64> {
    let p = parity_probability(v, n, theta0);
    let q = parity_probability(v, n, theta0 + dtheta);
    let term = |a: f64, b: f64| -> Result<f64> {
        if a == 0.0 {
            Ok(0.0)
        } else if b == 0.0 {
            Err(Error::InfiniteDivergence(0))
        } else {
            Ok(a * (a / b).ln())
        }
    };
    Ok((term(p, q)? + term(1.0 - p, 1.0 - q)?).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub m: u64,
    pub trials: usize,
    pub seed: u64,
    pub theta0: f64,
    pub dthetas: Vec<f64>,
}

impl SamplingPlan {
    pub fn new(m: u64, trials: usize, seed: u64, theta0: f64, dthetas: Vec<f64>) -> Result<Self> {
        let plan = Self { m, trials, seed, theta0, dthetas };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.trials < 1 {
            return domain(format!("plan needs m ≥ 1 and trials ≥ 1, got m = {}, trials = {}", self.m, self.trials));
        }
        if !self.theta0.is_finite() {
            return domain("θ₀ must be finite");
        }
        if self.dthetas.is_empty() {
            return domain("plan has no δθ values");
        }
        for (i, d) in self.dthetas.iter().enumerate() {
            if !d.is_finite() || *d == 0.0 {
                return domain(format!("δθ[{i}] = {d} must be finite and nonzero"));
            }
            if self.dthetas[..i].contains(d) {
                return domain(format!("δθ = {d} repeated"));
            }
        }
        Ok(())
    }
}

/// Monte Carlo results at one `δθ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlPoint {
    pub dtheta: f64,
    pub p0: f64,
    pub pdt: f64,
    pub true_dkl: f64,
    /// Kept estimator values, in trial order.
    pub estimates: Vec<f64>,
    /// Draws with a frequency in `{0, 1}`.
    pub discards: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub stderr: Option<f64>,
    /// `mean − true_dkl`.
    pub bias_emp: Option<f64>,
    /// Bias from the control-variate estimator
    /// `D̃ − g₀(f₀ − P₀) − g_δθ(f_δθ − P_δθ)`, which has the same mean as
    /// `D̃` but far less noise.
    pub bias_cv: Option<f64>,
    pub bias_cv_stderr: Option<f64>,
    pub bias_pred: Option<f64>,
    pub var_pred: Option<f64>,
    /// Frequencies averaged over kept draws.
    pub mean_f0: Option<f64>,
    pub mean_fdt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSampleSet {
    pub plan: SamplingPlan,
    pub visibility: f64,
    pub n_qubits: usize,
    pub rng: String,
    pub points: Vec<KlPoint>,
}

/// Neumaier compensated sum.
#[derive(Default, Clone, Copy)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

fn mean_var(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let mut s = Sum::default();
    xs.iter().for_each(|&x| s.add(x));
    let mean = s.value() / xs.len() as f64;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let mut q = Sum::default();
    xs.iter().for_each(|&x| q.add((x - mean) * (x - mean)));
    (Some(mean), Some(q.value() / (xs.len() - 1) as f64))
}

fn simulate_point(plan: &SamplingPlan, index: usize, v: f64, n: usize) -> Result<KlPoint> {
    let dtheta = plan.dthetas[index];
    let p0 = parity_probability(v, n, plan.theta0);
    let pdt = parity_probability(v, n, plan.theta0 + dtheta);
    let true_dkl = parity_kl(v, n, plan.theta0, dtheta)?;
    let b0 = Binomial::new(plan.m, p0).map_err(|e| Error::Domain(e.to_string()))?;
    let bdt = Binomial::new(plan.m, pdt).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(plan.seed);
    rng.set_stream(index as u64);

    let interior = p0 > 0.0 && p0 < 1.0 && pdt > 0.0 && pdt < 1.0;
    let (g0, gdt) = if interior {
        (
            (p0 * (1.0 - pdt) / (pdt * (1.0 - p0))).ln(),
            (pdt - p0) / (pdt * (1.0 - pdt)),
        )
    } else {
        (0.0, 0.0)
    };

    let m = plan.m as f64;
    let mut estimates = Vec::with_capacity(plan.trials);
    let mut controlled = Vec::with_capacity(plan.trials);
    let (mut sf0, mut sfdt) = (Sum::default(), Sum::default());
    let mut discards = 0;
    for _ in 0..plan.trials {
        let f0 = b0.sample(&mut rng) as f64 / m;
        let fdt = bdt.sample(&mut rng) as f64 / m;
        if f0 == 0.0 || f0 == 1.0 || fdt == 0.0 || fdt == 1.0 {
            discards += 1;
            continue;
        }
        let d = kl_from_frequencies(f0, fdt)?;
        estimates.push(d);
        controlled.push(d - g0 * (f0 - p0) - gdt * (fdt - pdt));
        sf0.add(f0);
        sfdt.add(fdt);
    }

    let kept = estimates.len();
    let (mean, variance) = mean_var(&estimates);
    let (cv_mean, cv_var) = mean_var(&controlled);
    let stderr = variance.map(|v| (v / kept as f64).sqrt());
    let bias_pred = bias_prediction(p0, pdt, plan.m).ok();
    let var_pred = variance_prediction(p0, pdt, plan.m).ok();
    Ok(KlPoint {
        dtheta,
        p0,
        pdt,
        true_dkl,
        discards,
        mean,
        variance,
        stderr,
        bias_emp: mean.map(|x| x - true_dkl),
        bias_cv: cv_mean.filter(|_| interior).map(|x| x - true_dkl),
        bias_cv_stderr: cv_var.filter(|_| interior).map(|v| (v / kept as f64).sqrt()),
        bias_pred,
        var_pred,
        mean_f0: (kept > 0).then(|| sf0.value() / kept as f64),
        mean_fdt: (kept > 0).then(|| sfdt.value() / kept as f64),
        estimates,
    })
}

/// Seeded simulation of the two-setting parity experiment for every `δθ`
/// of the plan. Identical plans give bit-identical results regardless of
/// thread count.
pub fn simulate_parity_experiment(plan: &SamplingPlan, v: f64, n: usize) -> Result<KlSampleSet> {
    plan.validate()?;
    if !(0.0..=1.0).contains(&v) {
        return domain(format!("visibility {v} outside [0, 1]"));
    }
    if n < 1 {
        return domain("n must be ≥ 1");
    }
    let points = (0..plan.dthetas.len())
        .into_par_iter()
        .map(|i| simulate_point(plan, i, v, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(KlSampleSet {
        plan: plan.clone(),
        visibility: v,
        n_qubits: n,
        rng: RNG_ALGORITHM.to_string(),
        points,
    })
}

/// A `(δθ, D, σ_D)` triple for [`fit_speed_from_kl`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlFitPoint {
    pub dtheta: f64,
    pub dkl: f64,
    pub stderr: f64,
}

/// Least squares of `D = (υ²/2)δθ²` through the origin.
///
/// Weighted by `1/σ²` when every point has a positive stderr; otherwise
/// unweighted with the stderr taken from the residuals.
pub fn fit_speed_from_kl(points: &[KlFitPoint], theta0: f64) -> Result<SpeedEstimate> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("{} points, need 3", points.len())));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !p.dtheta.is_finite() || p.dtheta == 0.0 || !p.dkl.is_finite() || !(p.stderr >= 0.0))
    {
        return Err(Error::Fit(format!("invalid point {p:?}")));
    }
    let weighted = points.iter().all(|p| p.stderr > 0.0);
    let (mut sxx, mut sxy) = (Sum::default(), Sum::default());
    for p in points {
        let x = p.dtheta * p.dtheta;
        let w = if weighted { 1.0 / (p.stderr * p.stderr) } else { 1.0 };
        sxx.add(w * x * x);
        sxy.add(w * x * p.dkl);
    }
    let (sxx, sxy) = (sxx.value(), sxy.value());
    if !(sxx > 0.0) || !sxx.is_finite() {
        return Err(Error::Fit("all weights vanish".into()));
    }
    let c = sxy / sxx;
    let se = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let mut rss = Sum::default();
        for p in points {
            let r = p.dkl - c * p.dtheta * p.dtheta;
            rss.add(r * r);
        }
        (rss.value() / (points.len() - 1) as f64 / sxx).sqrt()
    };
    if c < 0.0 {
        return Err(Error::Fit(format!("negative curvature {c}")));
    }
    SpeedEstimate::new(2.0 * c, 2.0 * se, SpeedMethod::KlFit, theta0)
}

/// `count` offsets, geometrically spaced, whose leading-order divergence
/// `υ²δθ²/2` spans `[1e-4, 1e-1]`.
pub fn default_fit_window(v: f64, n: usize, theta0: f64, count: usize) -> Result<Vec<f64>> {
    let speed = visibility_speed(v, n, theta0)?;
    if !(speed > 0.0) {
        return domain("fit window undefined for zero speed");
    }
    if count < 2 {
        return domain("window needs at least two points");
    }
    let lo = (2e-4 / speed).sqrt();
    let hi = (2e-1 / speed).sqrt();
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    Ok((0..count).map(|k| lo * ratio.powi(k as i32)).collect())
}

/// Fit points from a sample set. With `correct_bias`, the predicted bias at
/// the observed mean frequencies is subtracted from each mean.
pub fn fit_points(set: &KlSampleSet, correct_bias: bool) -> Vec<KlFitPoint> {
    set.points
        .iter()
        .filter_map(|p| {
            let mean = p.mean?;
            let stderr = p.stderr.unwrap_or(0.0);
            let shift = if correct_bias {
                bias_prediction(p.mean_f0?, p.mean_fdt?, set.plan.m).unwrap_or(0.0)
            } else {
                0.0
            };
            Some(KlFitPoint {
                dtheta: p.dtheta,
                dkl: mean - shift,
                stderr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn plug_in_examples() {
        assert_eq!(kl_from_frequencies(0.3, 0.3).unwrap(), 0.0);
        assert_abs_diff_eq!(kl_from_frequencies(0.7, 0.5).unwrap(), 0.082_282, epsilon = 1e-6);
        assert_abs_diff_eq!(kl_from_frequencies(0.0, 0.5).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert!(matches!(
            kl_from_frequencies(0.4, 0.0),
            Err(Error::DegenerateFrequency { .. })
        ));
        assert!(kl_from_frequencies(1.2, 0.5).is_err());
    }

    #[test]
    fn bias_examples() {
        assert_abs_diff_eq!(bias_prediction(0.5, 0.5, 100).unwrap(), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(bias_prediction(0.6, 0.4, 1000).unwrap(), 0.001_083_333, epsilon = 1e-9);
        let a = bias_prediction(0.3, 0.45, 77).unwrap();
        assert_eq!(a / 2.0, bias_prediction(0.3, 0.45, 154).unwrap());
        assert!(bias_prediction(0.0, 0.5, 10).is_err());
        assert!(bias_prediction(0.5, 0.5, 0).is_err());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance_prediction(0.4, 0.4, 10).unwrap(), 0.0);
        let v = variance_prediction(0.7, 0.5, 100).unwrap();
        let expect = 0.0016 + 0.0021 * (0.5f64 * 0.3 / (0.5 * 0.7)).ln().powi(2);
        assert_abs_diff_eq!(v, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.003_107_7, epsilon = 1e-7);
        let a = variance_prediction(0.2, 0.6, 40).unwrap();
        assert_abs_diff_eq!(a / 2.0, variance_prediction(0.2, 0.6, 80).unwrap(), epsilon = 1e-18);
    }

    #[test]
    fn plan_validation() {
        assert!(SamplingPlan::new(0, 1, 0, 0.0, vec![0.1]).is_err());
        assert!(SamplingPlan::new(1, 0, 0, 0.0, vec![0.1]).is_err());
        assert!(SamplingPlan::new(1, 1, 0, 0.0, vec![0.1, 0.0]).is_err());
        assert!(SamplingPlan::new(1, 1, 0, 0.0, vec![0.1, 0.1]).is_err());
        assert!(SamplingPlan::new(1, 1, 0, 0.0, vec![]).is_err());
        assert!(SamplingPlan::new(1, 1, 0, 0.0, vec![0.1, -0.1]).is_ok());
    }

    #[test]
    fn deterministic_and_stream_split() {
        let plan = SamplingPlan::new(200, 300, 42, PI / 16.0, vec![0.02, 0.05, 0.08]).unwrap();
        let a = simulate_parity_experiment(&plan, 0.787, 8).unwrap();
        let b = simulate_parity_experiment(&plan, 0.787, 8).unwrap();
        assert_eq!(a, b);
        // Reordering the grid changes streams, never the per-index draws.
        let single = SamplingPlan::new(200, 300, 42, PI / 16.0, vec![0.02]).unwrap();
        let c = simulate_parity_experiment(&single, 0.787, 8).unwrap();
        assert_eq!(c.points[0].estimates, a.points[0].estimates);
        let other = SamplingPlan { seed: 43, ..plan.clone() };
        let d = simulate_parity_experiment(&other, 0.787, 8).unwrap();
        assert_ne!(d.points[0].estimates, a.points[0].estimates);
    }

    #[test]
    fn single_shot_plan_discards() {
        let plan = SamplingPlan::new(1, 500, 7, PI / 16.0, vec![0.1]).unwrap();
        let s = simulate_parity_experiment(&plan, 0.787, 8).unwrap();
        assert_eq!(s.points[0].discards, 500);
        assert!(s.points[0].mean.is_none());
        assert!(fit_points(&s, true).is_empty());
    }

    #[test]
    fn zero_visibility_concentrates_at_zero() {
        let plan = SamplingPlan::new(2000, 2000, 3, 0.3, vec![0.1]).unwrap();
        let s = simulate_parity_experiment(&plan, 0.0, 6).unwrap();
        let p = &s.points[0];
        assert_eq!(p.true_dkl, 0.0);
        let b = p.bias_pred.unwrap();
        assert_abs_diff_eq!(b, 1.0 / 2000.0, epsilon = 1e-15);
        assert!((p.mean.unwrap() - b).abs() < 3.0 * p.stderr.unwrap());
    }

    #[test]
    fn fit_exact_points() {
        let theta0 = PI / 16.0;
        let pts: Vec<KlFitPoint> = (1..=10)
            .map(|k| {
                let d = 0.002 * k as f64;
                KlFitPoint { dtheta: d, dkl: parity_kl(0.787, 8, theta0, d).unwrap(), stderr: 0.0 }
            })
            .collect();
        let s = fit_speed_from_kl(&pts, theta0).unwrap();
        assert!((s.value - 39.64).abs() < 0.5, "{s:?}");
        assert!(s.stderr < 0.5);
        assert_eq!(s.method, SpeedMethod::KlFit);

        let zeros: Vec<KlFitPoint> =
            (1..=3).map(|k| KlFitPoint { dtheta: 0.01 * k as f64, dkl: 0.0, stderr: 0.0 }).collect();
        assert_eq!(fit_speed_from_kl(&zeros, 0.0).unwrap().value, 0.0);
        assert!(matches!(fit_speed_from_kl(&zeros[..2], 0.0), Err(Error::Fit(_))));
    }

    #[test]
    fn window_bounds() {
        let w = default_fit_window(0.787, 8, PI / 16.0, 5).unwrap();
        let speed = 0.787f64.powi(2) * 64.0;
        assert_abs_diff_eq!(speed * w[0] * w[0] / 2.0, 1e-4, epsilon = 1e-12);
        assert_abs_diff_eq!(speed * w[4] * w[4] / 2.0, 1e-1, epsilon = 1e-12);
        assert!(default_fit_window(0.0, 8, 0.1, 5).is_err());
    }
}
