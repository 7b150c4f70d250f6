//! Entanglement verdicts from statistical speeds.
//!
//! For a linear probe `H₀ = Σ σ^(i)/2`, a state whose speed exceeds
//! `s·k² + r²` (with `N = s·k + r`, `0 ≤ r < k`) contains at least
//! `(k+1)`-partite entanglement. All comparisons are strict: equality
//! certifies nothing.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::optim;
use crate::prob::{moments_speed_clt, SpeedEstimate, SpeedMethod};

/// `s·k² + r²` with `s = ⌊n/k⌋`, `r = n − s·k`.
pub fn kpartite_bound(n: usize, k: usize) -> Result<u64> {
    if k < 1 || k > n {
        return domain(format!("k = {k} outside 1..={n}"));
    }
    let (s, r) = ((n / k) as u64, (n % k) as u64);
    let k = k as u64;
    Ok(s * k * k + r * r)
}

/// Probe class the speed was measured with. Depth bounds hold for linear
/// probes only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Probe {
    #[default]
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub k: usize,
    pub bound: u64,
    /// `υ² − bound`; positive certifies `(k+1)`-partite entanglement.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthVerdict {
    pub n_qubits: usize,
    pub speed: SpeedEstimate,
    pub depth_point: usize,
    /// Depth certified at `value − stderr`.
    pub depth_conservative: usize,
    /// Depth certified at `value + stderr`.
    pub depth_optimistic: usize,
    /// `υ² > (N−1)² + 1`.
    pub genuine: bool,
    pub margins: Vec<Margin>,
    /// The one-sigma interval straddles a depth boundary.
    pub straddles_bound: bool,
    /// The speed is a lower bound on the true speed (moment-based records).
    pub lower_bound: bool,
}

impl DepthVerdict {
    pub fn entangled(&self) -> bool {
        self.depth_point >= 2
    }
}

fn depth_at(n: usize, value: f64) -> usize {
    (1..n)
        .filter(|&k| value > kpartite_bound(n, k).expect("k in range") as f64)
        .max()
        .map_or(1, |k| k + 1)
}

/// Depth classification of a linear-probe speed.
pub fn classify_depth(n: usize, speed: SpeedEstimate) -> Result<DepthVerdict> {
    if n < 1 {
        return domain("classification needs at least one qubit");
    }
    let v = speed.value;
    let margins = (1..=n)
        .map(|k| {
            let bound = kpartite_bound(n, k).expect("k in range");
            Margin {
                k,
                bound,
                margin: v - bound as f64,
            }
        })
        .collect();
    let depth_point = depth_at(n, v);
    let depth_conservative = depth_at(n, v - speed.stderr);
    let depth_optimistic = depth_at(n, v + speed.stderr);
    Ok(DepthVerdict {
        n_qubits: n,
        speed,
        depth_point,
        depth_conservative,
        depth_optimistic,
        genuine: n >= 2 && v > kpartite_bound(n, n - 1)? as f64,
        margins,
        straddles_bound: depth_conservative != depth_optimistic,
        lower_bound: false,
    })
}

/// [`classify_depth`] that refuses nonlinear-probe speeds.
pub fn classify_depth_for(probe: Probe, n: usize, speed: SpeedEstimate) -> Result<DepthVerdict> {
    match probe {
        Probe::Linear => classify_depth(n, speed),
        Probe::Nonlinear => Err(Error::Unsupported(
            "depth bounds apply to linear probes only".into(),
        )),
    }
}

fn check_visibility(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return domain(format!("visibility {v} outside [0, 1]"));
    }
    Ok(())
}

/// Speed of the parity fringe `(1 ± V cos Nθ)/2`:
/// `V²N² sin²(Nθ) / (1 − V² cos²(Nθ))`.
pub fn visibility_speed(v: f64, n: usize, theta: f64) -> Result<f64> {
    check_visibility(v)?;
    let nf = n as f64;
    let (s, c) = (nf * theta).sin_cos();
    // 1 − V²cos² written to stay accurate as V → 1
    let den = s * s + (1.0 - v * v) * c * c;
    if den == 0.0 {
        return Ok(nf * nf);
    }
    Ok(v * v * nf * nf * s * s / den)
}

/// Maximum of [`visibility_speed`] over one fringe period and its location.
pub fn max_visibility_speed(v: f64, n: usize) -> Result<(f64, f64)> {
    check_visibility(v)?;
    if n == 0 {
        return domain("n must be ≥ 1");
    }
    let period = std::f64::consts::PI / n as f64;
    let (theta, value) = optim::maximize(
        |t| visibility_speed(v, n, t).unwrap_or(0.0),
        None::<fn(f64) -> f64>,
        0.0,
        period,
        1e-12,
    );
    Ok((theta, value))
}

/// `(1/√N, √((1−1/N)² + 1/N²))`: the visibilities above which
/// entanglement, and genuine N-partite entanglement, are detected.
pub fn visibility_thresholds(n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return domain("thresholds need n ≥ 2");
    }
    let inv = 1.0 / n as f64;
    Ok((inv.sqrt(), ((1.0 - inv).powi(2) + inv * inv).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub theta: f64,
    pub p_plus: f64,
    pub shots: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub visibility: f64,
    pub stderr: f64,
    /// Phase `φ₀` of `(1 + V cos(Nθ + φ₀))/2`.
    pub phase: f64,
    /// The unconstrained estimate exceeded 1 and was clipped.
    pub clipped: bool,
}

/// Weighted least squares of `p(θ) = (1 + V cos(Nθ + φ₀))/2` with the
/// frequency fixed to `N`.
///
/// Solved in the linear form `2p − 1 = A cos Nθ + B sin Nθ`; weights use
/// the binomial variance at the shrunk frequency `(k + ½)/(shots + 1)` so
/// that points at `p ∈ {0, 1}` keep a finite weight.
pub fn fit_visibility(fringe: &[FringePoint], n: usize) -> Result<VisibilityFit> {
    if n == 0 {
        return domain("n must be ≥ 1");
    }
    for p in fringe {
        if !(0.0..=1.0).contains(&p.p_plus) || !p.theta.is_finite() {
            return domain(format!("fringe point θ = {}, p = {} invalid", p.theta, p.p_plus));
        }
        if p.shots < 1 {
            return domain("fringe point with zero shots");
        }
    }
    let mut thetas: Vec<f64> = fringe.iter().map(|p| p.theta).collect();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    if thetas.len() < 3 {
        return Err(Error::Fit(format!("{} distinct θ values, need 3", thetas.len())));
    }
    let nf = n as f64;
    let half_period = std::f64::consts::PI / nf;
    let span = thetas[thetas.len() - 1] - thetas[0];
    if span < half_period * (1.0 - 1e-12) {
        return Err(Error::Fit(format!(
            "θ span {span} below half a fringe period {half_period}"
        )));
    }

    let (mut scc, mut scs, mut sss, mut scy, mut ssy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in fringe {
        let shots = p.shots as f64;
        let shrunk = (p.p_plus * shots + 0.5) / (shots + 1.0);
        let w = shots / (4.0 * shrunk * (1.0 - shrunk));
        let (s, c) = (nf * p.theta).sin_cos();
        let y = 2.0 * p.p_plus - 1.0;
        scc += w * c * c;
        scs += w * c * s;
        sss += w * s * s;
        scy += w * c * y;
        ssy += w * s * y;
    }
    let det = scc * sss - scs * scs;
    if !(det > 1e-12 * (scc * sss).max(f64::MIN_POSITIVE)) {
        return Err(Error::Fit("fringe design is singular".into()));
    }
    // Covariance of (A, B) is the inverse normal matrix.
    let (caa, cab, cbb) = (sss / det, -scs / det, scc / det);
    let a = caa * scy + cab * ssy;
    let b = cab * scy + cbb * ssy;
    let v = a.hypot(b);
    let stderr = if v > 0.0 {
        ((a * a * caa + 2.0 * a * b * cab + b * b * cbb) / (v * v)).sqrt()
    } else {
        ((caa + cbb) / 2.0).sqrt()
    };
    let clipped = v > 1.0;
    Ok(VisibilityFit {
        visibility: v.min(1.0),
        stderr,
        phase: (-b).atan2(a),
        clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Visibility,
    FringePoints,
    Moments,
}

impl std::fmt::Display for RecordKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecordKind::Visibility => "visibility",
            RecordKind::FringePoints => "fringe_points",
            RecordKind::Moments => "moments",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RecordData {
    Visibility { v: f64, stderr: f64 },
    FringePoints { points: Vec<FringePoint> },
    Moments { dmean_dtheta: f64, variance: f64, m: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n_qubits: usize,
    pub data: RecordData,
}

impl ExperimentRecord {
    pub fn new(n_qubits: usize, data: RecordData) -> Result<Self> {
        if n_qubits < 1 {
            return domain("record needs n ≥ 1");
        }
        match &data {
            RecordData::Visibility { v, stderr } => {
                check_visibility(*v)?;
                if !(*stderr >= 0.0) || !stderr.is_finite() {
                    return domain(format!("visibility stderr {stderr} must be finite and ≥ 0"));
                }
            }
            RecordData::FringePoints { points } => {
                if let Some(p) = points.iter().find(|p| p.shots < 1) {
                    return domain(format!("fringe point at θ = {} has zero shots", p.theta));
                }
                if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(&p.p_plus)) {
                    return domain(format!("p_plus {} outside [0, 1]", p.p_plus));
                }
            }
            RecordData::Moments { dmean_dtheta, variance, m } => {
                if !dmean_dtheta.is_finite() || !(*variance >= 0.0) || *m < 1 {
                    return domain(format!(
                        "moments record needs finite slope, variance ≥ 0 and m ≥ 1, got ({dmean_dtheta}, {variance}, {m})"
                    ));
                }
            }
        }
        Ok(Self { n_qubits, data })
    }

    pub fn kind(&self) -> RecordKind {
        match self.data {
            RecordData::Visibility { .. } => RecordKind::Visibility,
            RecordData::FringePoints { .. } => RecordKind::FringePoints,
            RecordData::Moments { .. } => RecordKind::Moments,
        }
    }
}

fn speed_from_visibility(v: f64, sigma_v: f64, n: usize) -> Result<SpeedEstimate> {
    let n2 = (n * n) as f64;
    SpeedEstimate::new(
        v * v * n2,
        2.0 * v * n2 * sigma_v,
        SpeedMethod::Visibility,
        std::f64::consts::PI / (2.0 * n as f64),
    )
}

/// `υ²_mom/m = (∂θ⟨X⟩)²/Var(X)` from a moments record, marked as a lower
/// bound on the true speed.
pub fn moments_witness(record: &ExperimentRecord) -> Result<DepthVerdict> {
    let RecordData::Moments { dmean_dtheta, variance, m } = record.data else {
        return domain(format!("moments witness needs a moments record, got {}", record.kind()));
    };
    let per_shot = moments_speed_clt(dmean_dtheta, variance, m)? / m as f64;
    let speed = SpeedEstimate::new(per_shot, 0.0, SpeedMethod::Moments, 0.0)?;
    let mut verdict = classify_depth(record.n_qubits, speed)?;
    verdict.lower_bound = true;
    Ok(verdict)
}

/// Speed estimate implied by a visibility or fringe record.
pub fn record_speed(record: &ExperimentRecord) -> Result<SpeedEstimate> {
    match &record.data {
        RecordData::Visibility { v, stderr } => speed_from_visibility(*v, *stderr, record.n_qubits),
        RecordData::FringePoints { points } => {
            let fit = fit_visibility(points, record.n_qubits)?;
            speed_from_visibility(fit.visibility, fit.stderr, record.n_qubits)
        }
        RecordData::Moments { dmean_dtheta, variance, m } => {
            let per_shot = moments_speed_clt(*dmean_dtheta, *variance, *m)? / *m as f64;
            SpeedEstimate::new(per_shot, 0.0, SpeedMethod::Moments, 0.0)
        }
    }
}

/// Depth verdict for any record kind.
pub fn witness_record(record: &ExperimentRecord) -> Result<DepthVerdict> {
    match record.data {
        RecordData::Moments { .. } => moments_witness(record),
        _ => classify_depth(record.n_qubits, record_speed(record)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn est(v: f64, s: f64) -> SpeedEstimate {
        SpeedEstimate::new(v, s, SpeedMethod::Visibility, 0.0).unwrap()
    }

    #[test]
    fn bound_table_n8() {
        let b: Vec<u64> = (1..=8).map(|k| kpartite_bound(8, k).unwrap()).collect();
        assert_eq!(b, vec![8, 16, 22, 32, 34, 40, 50, 64]);
        assert!(kpartite_bound(8, 0).is_err());
        assert!(kpartite_bound(8, 9).is_err());
    }

    #[test]
    fn bound_monotone_in_k() {
        for n in 1..=20 {
            assert_eq!(kpartite_bound(n, 1).unwrap(), n as u64);
            assert_eq!(kpartite_bound(n, n).unwrap(), (n * n) as u64);
            for k in 1..n {
                assert!(kpartite_bound(n, k).unwrap() <= kpartite_bound(n, k + 1).unwrap());
            }
        }
    }

    #[test]
    fn depth_examples() {
        let d = classify_depth(8, est(39.6, 0.8)).unwrap();
        assert_eq!((d.depth_point, d.depth_conservative, d.depth_optimistic), (6, 6, 7));
        assert!(d.straddles_bound && !d.genuine);
        assert_eq!(d.margins.len(), 8);
        assert_abs_diff_eq!(d.margins[5].margin, -0.4, epsilon = 1e-12);

        let d = classify_depth(8, est(8.0, 0.0)).unwrap();
        assert_eq!(d.depth_point, 1);
        assert!(!d.entangled());

        let d = classify_depth(6, est(26.1, 0.0)).unwrap();
        assert!(d.genuine);
        assert_eq!(d.depth_point, 6);

        // Noise can push a point estimate past N²; depth stays capped.
        let d = classify_depth(4, est(17.0, 0.0)).unwrap();
        assert_eq!(d.depth_point, 4);
    }

    #[test]
    fn nonlinear_probe_refused() {
        assert!(matches!(
            classify_depth_for(Probe::Nonlinear, 8, est(20.0, 0.0)),
            Err(Error::Unsupported(_))
        ));
        assert!(classify_depth_for(Probe::Linear, 8, est(20.0, 0.0)).is_ok());
    }

    #[test]
    fn visibility_speed_examples() {
        for theta in [0.1, 0.37, 1.2] {
            assert_abs_diff_eq!(visibility_speed(1.0, 5, theta).unwrap(), 25.0, epsilon = 1e-9);
        }
        assert_eq!(visibility_speed(1.0, 5, 0.0).unwrap(), 25.0);
        assert_eq!(visibility_speed(0.0, 5, 0.3).unwrap(), 0.0);
        let (_, m) = max_visibility_speed(0.787, 8).unwrap();
        assert_abs_diff_eq!(m, 39.639_616, epsilon = 1e-6);
        assert!(visibility_speed(1.1, 5, 0.3).is_err());
    }

    #[test]
    fn thresholds() {
        let (a, b) = visibility_thresholds(4).unwrap();
        assert_abs_diff_eq!(a, 0.5);
        assert_abs_diff_eq!(b, 0.790_569, epsilon = 1e-6);
        let (a, b) = visibility_thresholds(2).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        assert!(visibility_thresholds(1).is_err());
    }

    fn fringe(v: f64, phase: f64, n: usize, count: usize, shots: u64) -> Vec<FringePoint> {
        (0..count)
            .map(|k| {
                let theta = k as f64 * 2.0 * std::f64::consts::PI / (n as f64 * count as f64);
                FringePoint {
                    theta,
                    p_plus: (1.0 + v * (n as f64 * theta + phase).cos()) / 2.0,
                    shots,
                }
            })
            .collect()
    }

    #[test]
    fn fit_recovers_exact_fringe() {
        let f = fit_visibility(&fringe(0.9, 0.4, 6, 20, 10_000), 6).unwrap();
        assert_abs_diff_eq!(f.visibility, 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(f.phase, 0.4, epsilon = 1e-12);
        assert!(f.stderr > 0.0 && f.stderr < 0.01);
        assert!(!f.clipped);

        let flat = fit_visibility(&fringe(0.0, 0.0, 4, 10, 100), 4).unwrap();
        assert_eq!(flat.visibility, 0.0);
    }

    #[test]
    fn fit_rejects_thin_data() {
        let f = fringe(0.5, 0.0, 4, 20, 100);
        assert!(matches!(fit_visibility(&f[..2], 4), Err(Error::Fit(_))));
        // 20 points cover one full period; the first 4 span less than half.
        assert!(matches!(fit_visibility(&f[..4], 4), Err(Error::Fit(_))));
    }

    #[test]
    fn fit_clips_above_one() {
        let mut f = fringe(1.0, 0.0, 3, 12, 50);
        for p in &mut f {
            p.p_plus = if p.p_plus > 0.5 { 1.0 } else { 0.0 };
        }
        let fit = fit_visibility(&f, 3).unwrap();
        assert!(fit.clipped);
        assert_eq!(fit.visibility, 1.0);
    }

    #[test]
    fn records() {
        let r = ExperimentRecord::new(8, RecordData::Visibility { v: 0.787, stderr: 0.008 }).unwrap();
        let s = record_speed(&r).unwrap();
        assert_abs_diff_eq!(s.value, 39.639_616, epsilon = 1e-9);
        assert_abs_diff_eq!(s.stderr, 2.0 * 0.787 * 64.0 * 0.008, epsilon = 1e-12);
        assert_eq!(witness_record(&r).unwrap().depth_point, 6);
        assert!(ExperimentRecord::new(8, RecordData::Visibility { v: 1.2, stderr: 0.0 }).is_err());
        assert!(ExperimentRecord::new(
            3,
            RecordData::FringePoints {
                points: vec![FringePoint { theta: 0.0, p_plus: 0.5, shots: 0 }]
            }
        )
        .is_err());
    }

    #[test]
    fn moments_examples() {
        // ⟨σ_x^⊗8⟩ = V cos 8θ at θ = π/16: slope 8V, variance 1.
        let v: f64 = 0.65;
        let r = ExperimentRecord::new(
            8,
            RecordData::Moments { dmean_dtheta: 8.0 * v, variance: 1.0, m: 50 },
        )
        .unwrap();
        let d = moments_witness(&r).unwrap();
        assert_eq!(d.depth_point, 4);
        assert!(d.lower_bound);

        let flat = ExperimentRecord::new(8, RecordData::Moments { dmean_dtheta: 0.0, variance: 1.0, m: 5 }).unwrap();
        assert_eq!(moments_witness(&flat).unwrap().depth_point, 1);

        let edge = ExperimentRecord::new(
            8,
            RecordData::Moments { dmean_dtheta: 2.0, variance: 0.5, m: 3 },
        )
        .unwrap();
        let d = moments_witness(&edge).unwrap();
        assert_eq!(d.speed.value, 8.0);
        assert_eq!(d.depth_point, 1);

        let zero = ExperimentRecord::new(8, RecordData::Moments { dmean_dtheta: 1.0, variance: 0.0, m: 5 }).unwrap();
        assert!(moments_witness(&zero).is_err());
        let vis = ExperimentRecord::new(8, RecordData::Visibility { v: 0.5, stderr: 0.0 }).unwrap();
        assert!(moments_witness(&vis).is_err());
    }
}
