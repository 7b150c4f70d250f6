//! Maximum quantum statistical speed of separable states.
//!
//! For a pure product state probed by `H = H₀ + εH₁` the squared speed is
//! `υ₀² + ε υ₁² + ε² υ₂²`, a polynomial in the local spin expectations
//! `⟨σ_m^(i)⟩` and `⟨σ_n^(i)⟩`. By convexity its maximum over product
//! states bounds every separable state, so exceeding it witnesses
//! entanglement.
//!
//! With `n = m` and every other coupling fixed, the speed is a concave
//! quadratic in each `a_i = ⟨σ_n^(i)⟩` with curvature `−(α_i + ε S_i)²`,
//! `S_i = Σ_j V_ij a_j`. The numeric optimizer uses exact coordinate ascent
//! on that structure.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::optim;
use crate::qsim::{dot3, Boundary, CollectiveHamiltonian};

/// Coefficients of `υ_Q²(ε) = v0sq + ε·v1sq + ε²·v2sq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedTerms {
    pub v0sq: f64,
    pub v1sq: f64,
    pub v2sq: f64,
}

impl SpeedTerms {
    pub fn total(&self, epsilon: f64) -> f64 {
        self.v0sq + epsilon * self.v1sq + epsilon * epsilon * self.v2sq
    }
}

/// Speed decomposition of a product state from its local expectations
/// `sm[i] = ⟨σ_m^(i)⟩` and `sn[i] = ⟨σ_n^(i)⟩`.
///
/// The pair `(sm[i], sn[i])` must come from one valid single-qubit state;
/// only `|·| ≤ 1` is checked.
pub fn product_speed_terms(
    h: &CollectiveHamiltonian,
    sm: &[f64],
    sn: &[f64],
) -> Result<SpeedTerms> {
    let n = h.n_qubits();
    if sm.len() != n || sn.len() != n {
        return domain(format!(
            "expectation vectors have lengths {} and {}, Hamiltonian has {n} qubits",
            sm.len(),
            sn.len()
        ));
    }
    if let Some(x) = sm.iter().chain(sn).find(|x| x.abs() > 1.0 + 1e-12) {
        return domain(format!("local expectation {x} outside [-1, 1]"));
    }
    let alpha = h.alpha();
    let nm = dot3(h.dir_n(), h.dir_m());

    // S_i = Σ_j V_ij sn_j and Q_i = Σ_j V_ij² sn_j² (V_ii = 0).
    let mut s = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut v2_pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = h.coupling(i, j);
            if v == 0.0 {
                continue;
            }
            s[i] += v * sn[j];
            q[i] += v * v * sn[j] * sn[j];
            v2_pairs += v * v / 2.0 * (1.0 - sn[i] * sn[i] * sn[j] * sn[j]);
        }
    }

    let v0sq = (0..n).map(|i| alpha[i] * alpha[i] * (1.0 - sm[i] * sm[i])).sum();
    let v1sq = 2.0
        * (0..n)
            .map(|i| alpha[i] * (nm - sn[i] * sm[i]) * s[i])
            .sum::<f64>();
    // Σ_{j≠l, both ≠ i} V_ij V_il sn_j sn_l = S_i² − Q_i
    let v2_triples: f64 = (0..n)
        .map(|i| (1.0 - sn[i] * sn[i]) * (s[i] * s[i] - q[i]))
        .sum();
    Ok(SpeedTerms {
        v0sq,
        v1sq,
        v2sq: v2_pairs + v2_triples,
    })
}

/// Local expectations `a_i = ⟨σ_n^(i)⟩` of a product state, with optional
/// azimuthal phases about `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableConfig {
    pub a: Vec<f64>,
    pub phases: Option<Vec<f64>>,
}

impl SeparableConfig {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if let Some(x) = a.iter().find(|x| !(x.abs() <= 1.0)) {
            return domain(format!("local expectation {x} outside [-1, 1]"));
        }
        Ok(Self { a, phases: None })
    }

    /// Bloch vectors with projection `a_i` on `dir`.
    pub fn blochs(&self, dir: [f64; 3]) -> Vec<[f64; 3]> {
        let (e1, e2) = orthonormal_pair(dir);
        self.a
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let phi = self.phases.as_ref().map_or(0.0, |p| p[i]);
                let r = (1.0 - a * a).max(0.0).sqrt();
                let (c, s) = (r * phi.cos(), r * phi.sin());
                [
                    a * dir[0] + c * e1[0] + s * e2[0],
                    a * dir[1] + c * e1[1] + s * e2[1],
                    a * dir[2] + c * e1[2] + s * e2[2],
                ]
            })
            .collect()
    }

    pub fn spread(&self) -> f64 {
        let max = self.a.iter().copied().fold(f64::MIN, f64::max);
        let min = self.a.iter().copied().fold(f64::MAX, f64::min);
        max - min
    }
}

fn orthonormal_pair(d: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if d[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let p = dot3(helper, d);
    let mut e1 = [helper[0] - p * d[0], helper[1] - p * d[1], helper[2] - p * d[2]];
    let norm = dot3(e1, e1).sqrt();
    e1.iter_mut().for_each(|x| *x /= norm);
    let e2 = [
        d[1] * e1[2] - d[2] * e1[1],
        d[2] * e1[0] - d[0] * e1[2],
        d[0] * e1[1] - d[1] * e1[0],
    ];
    (e1, e2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    pub random_starts: usize,
    pub seed: u64,
    /// Sweeps stop once a full sweep improves the objective by less than this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            random_starts: 32,
            seed: 0x5eed,
            tol: 1e-8,
            max_sweeps: 20_000,
        }
    }
}

/// Speed of the configuration `sm = sn = a` (requires `n·m = 1`).
fn aligned_speed(h: &CollectiveHamiltonian, a: &[f64]) -> f64 {
    product_speed_terms(h, a, a)
        .expect("length checked by caller")
        .total(h.epsilon())
}

/// Exact coordinate ascent from `start`; returns the final objective.
fn coordinate_ascent(h: &CollectiveHamiltonian, a: &mut [f64], opts: &OptimizerSettings) -> f64 {
    let n = a.len();
    let eps = h.epsilon();
    let alpha = h.alpha();
    let mut s: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|j| h.coupling(k, j) * a[j]).sum())
        .collect();
    let mut value = aligned_speed(h, a);
    // Fixed-point stopping: stall detection on the objective alone can stop
    // short on flat ridges, so also require the step to become tiny.
    let step_tol = 1e-12;
    for _ in 0..opts.max_sweeps {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let curv = alpha[i] + eps * s[i];
            let mut lin = 0.0;
            for k in 0..n {
                let v = h.coupling(k, i);
                if v == 0.0 {
                    continue;
                }
                let r = s[k] - v * a[i];
                lin += v * (1.0 - a[k] * a[k]) * (eps * alpha[k] + eps * eps * r);
            }
            lin *= 2.0;
            let c = -curv * curv;
            let t = if c < 0.0 {
                (-lin / (2.0 * c)).clamp(-1.0, 1.0)
            } else if lin > 0.0 {
                1.0
            } else if lin < 0.0 {
                -1.0
            } else {
                a[i]
            };
            let delta = t - a[i];
            if delta != 0.0 {
                for (k, sk) in s.iter_mut().enumerate() {
                    *sk += h.coupling(k, i) * delta;
                }
                a[i] = t;
                max_step = max_step.max(delta.abs());
            }
        }
        let next = aligned_speed(h, a);
        let gain = next - value;
        value = next;
        if max_step < step_tol || (gain.abs() < opts.tol * 1e-6 && max_step < 1e-9) {
            break;
        }
    }
    value
}

fn check_aligned(h: &CollectiveHamiltonian) -> Result<()> {
    let nm = dot3(h.dir_n(), h.dir_m());
    if (nm - 1.0).abs() > 1e-12 {
        return Err(Error::Unsupported(format!(
            "separable maximization needs n·m = 1, got {nm}"
        )));
    }
    Ok(())
}

/// Best uniform configuration `a_i = c`.
pub fn uniform_candidate(h: &CollectiveHamiltonian) -> Result<(f64, f64)> {
    check_aligned(h)?;
    let n = h.n_qubits();
    let f = |c: f64| aligned_speed(h, &vec![c; n]);
    let (c, v) = optim::maximize(f, None::<fn(f64) -> f64>, -1.0, 1.0, 1e-12);
    Ok((c, v))
}

fn start_points(n: usize, opts: &OptimizerSettings, uniform_best: f64) -> Vec<Vec<f64>> {
    let mut starts = Vec::new();
    for c in [uniform_best, 0.0, 0.5, -0.5, 1.0] {
        starts.push(vec![c; n]);
    }
    for (x, y) in [(1.0, 0.0), (0.0, 1.0), (0.1, 0.8), (0.8, 0.1), (-1.0, 0.0), (0.3, 0.5)] {
        starts.push((0..n).map(|i| if i % 2 == 0 { x } else { y }).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        starts.push((0..n).map(|_| rng.random_range(-1.0..=1.0)).collect());
    }
    starts
}

/// Numeric maximum of the product-state speed over `a ∈ [−1, 1]^N`.
///
/// Starts from uniform, alternating and seeded random configurations; the
/// winner is the largest value with the lowest start index on ties.
pub fn max_separable_speed(
    h: &CollectiveHamiltonian,
    opts: &OptimizerSettings,
) -> Result<(f64, SeparableConfig)> {
    check_aligned(h)?;
    let n = h.n_qubits();
    if n < 2 {
        return domain("separable maximization needs at least 2 qubits");
    }
    let (c, _) = uniform_candidate(h)?;
    let starts = start_points(n, opts, c);
    let results: Vec<(f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|mut a| {
            let v = coordinate_ascent(h, &mut a, opts);
            (v, a)
        })
        .collect();
    let mut best = 0;
    for (k, r) in results.iter().enumerate() {
        if r.0 > results[best].0 {
            best = k;
        }
    }
    let (value, a) = results.into_iter().nth(best).expect("at least one start");
    Ok((value, SeparableConfig::new(a)?))
}

/// Which configuration realizes a bound value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// All `a_i` equal.
    Uniform,
    /// `a_i` alternating between 1 and 0.
    Alternating,
    /// Near the critical coupling a two-sublattice configuration beats both
    /// analytic branches.
    Crossover,
    /// Odd Ising chain above the critical coupling: frustrated, numeric only.
    OddNumeric,
    /// No closed form for this model; numeric optimum.
    Numeric,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Uniform => "uniform",
            Regime::Alternating => "alternating",
            Regime::Crossover => "crossover",
            Regime::OddNumeric => "odd-n-numeric",
            Regime::Numeric => "numeric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBound {
    /// `υ²_max` (not per spin).
    pub value: f64,
    pub regime: Regime,
    /// Optimal uniform `a` when the uniform branch applies.
    pub argmax: Option<f64>,
}

/// Per-spin speed of the uniform Ising configuration `a_i = a`.
pub fn ising_uniform_per_spin(a: f64, eps: f64) -> f64 {
    let a2 = a * a;
    (1.0 - a2) + 2.0 * eps * (a - a * a2) + eps * eps / 4.0 * (1.0 + 2.0 * a2 - 3.0 * a2 * a2)
}

fn ising_uniform_slope(a: f64, eps: f64) -> f64 {
    -2.0 * a + 2.0 * eps * (1.0 - 3.0 * a * a) + eps * eps * (a - 3.0 * a * a * a)
}

/// `max_a` of [`ising_uniform_per_spin`] and its argmax.
pub fn ising_uniform_max(eps: f64) -> (f64, f64) {
    optim::maximize(
        |a| ising_uniform_per_spin(a, eps),
        Some(|a| ising_uniform_slope(a, eps)),
        -1.0,
        1.0,
        1e-14,
    )
}

/// Per-spin speed of the alternating configuration `(1, 0, 1, 0, …)`.
pub fn ising_alternating_per_spin(eps: f64) -> f64 {
    0.5 + eps + eps * eps / 2.0
}

/// Coupling where the alternating branch overtakes the best uniform one.
pub fn critical_epsilon() -> f64 {
    static EPS_C: OnceLock<f64> = OnceLock::new();
    *EPS_C.get_or_init(|| {
        optim::bisect_sign_change(
            |e| ising_uniform_max(e).1 - ising_alternating_per_spin(e),
            0.1,
            2.0,
            1e-13,
        )
        .expect("branches cross on (0.1, 2)")
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return domain(format!("coupling {eps} must be finite and ≥ 0"));
    }
    Ok(())
}

/// Homogeneous periodic Ising bound from the uniform and alternating
/// branches. Odd chains above the critical coupling fall back to the numeric
/// optimizer.
pub fn ising_bound_analytic(eps: f64, n: usize) -> Result<AnalyticBound> {
    check_eps(eps)?;
    if n < 3 {
        return domain("Ising chain needs at least 3 sites");
    }
    let nf = n as f64;
    if eps <= critical_epsilon() {
        let (a, v) = ising_uniform_max(eps);
        return Ok(AnalyticBound {
            value: nf * v,
            regime: Regime::Uniform,
            argmax: Some(a),
        });
    }
    if n.is_multiple_of(2) {
        return Ok(AnalyticBound {
            value: nf * ising_alternating_per_spin(eps),
            regime: Regime::Alternating,
            argmax: None,
        });
    }
    let h = CollectiveHamiltonian::ising(vec![1.0; n], eps, crate::qsim::DIR_Z, Boundary::Periodic)?;
    let (v, _) = max_separable_speed(&h, &OptimizerSettings::default())?;
    Ok(AnalyticBound {
        value: v,
        regime: Regime::OddNumeric,
        argmax: None,
    })
}

/// Termwise bound for the Ising probe with arbitrary `α`:
/// `Σα² + ε·Σ_i max(α_i, α_{i+1}) + ε²N/2`, bonds taken around the ring.
///
/// Each bond contributes at most `max(α_i, α_j)` to the linear term, since
/// `(1−a²)b + (1−b²)a ≤ 1` on the square. The alternating configuration
/// saturates it, so the linear coefficient is `N` for `α = 1`, not `N/2`.
pub fn ising_upper_bound(eps: f64, alpha: &[f64]) -> Result<f64> {
    check_eps(eps)?;
    let sq: f64 = alpha.iter().map(|a| a * a).sum();
    let n = alpha.len();
    let bonds: f64 = (0..n).map(|i| alpha[i].max(alpha[(i + 1) % n])).sum();
    Ok(sq + eps * bonds + eps * eps * n as f64 / 2.0)
}

/// Per-spin speed of the uniform LMG configuration at `ε̃ = ε(N−1)`.
pub fn lmg_uniform_per_spin(a: f64, eps_t: f64, n: usize) -> f64 {
    let nf = n as f64;
    let a2 = a * a;
    (1.0 - a2)
        + 2.0 * eps_t * a * (1.0 - a2)
        + eps_t * eps_t * (1.0 + 2.0 * (nf - 2.0) * a2 - (2.0 * nf - 3.0) * a2 * a2)
            / (2.0 * (nf - 1.0))
}

fn lmg_uniform_slope(a: f64, eps_t: f64, n: usize) -> f64 {
    let nf = n as f64;
    -2.0 * a
        + 2.0 * eps_t * (1.0 - 3.0 * a * a)
        + eps_t * eps_t * (4.0 * (nf - 2.0) * a - 4.0 * (2.0 * nf - 3.0) * a * a * a)
            / (2.0 * (nf - 1.0))
}

/// LMG (`V_ij = 1`) bound from the best uniform configuration.
pub fn lmg_bound_analytic(eps_t: f64, n: usize) -> Result<AnalyticBound> {
    check_eps(eps_t)?;
    if n < 3 {
        return domain("LMG bound needs at least 3 spins");
    }
    let (a, v) = optim::maximize(
        |a| lmg_uniform_per_spin(a, eps_t, n),
        Some(|a| lmg_uniform_slope(a, eps_t, n)),
        -1.0,
        1.0,
        1e-14,
    );
    Ok(AnalyticBound {
        value: n as f64 * v,
        regime: Regime::Uniform,
        argmax: Some(a),
    })
}

/// Termwise LMG bound `N[1 + (4/(3√3))ε̃ + ε̃²(N−1)/(2(2N−3))]`.
pub fn lmg_upper_bound(eps_t: f64, n: usize) -> Result<f64> {
    check_eps(eps_t)?;
    if n < 2 {
        return domain("LMG bound needs at least 2 spins");
    }
    let nf = n as f64;
    Ok(nf
        * (1.0
            + 4.0 / (3.0 * 3f64.sqrt()) * eps_t
            + eps_t * eps_t * (nf - 1.0) / (2.0 * (2.0 * nf - 3.0))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BoundModel {
    Ising { boundary: Boundary },
    /// Grid values are `ε̃ = ε(N−1)`.
    Lmg,
    /// Row-major symmetric coupling matrix.
    Custom { coupling: Vec<f64> },
}

impl BoundModel {
    pub fn name(&self) -> &'static str {
        match self {
            BoundModel::Ising { .. } => "ising",
            BoundModel::Lmg => "lmg",
            BoundModel::Custom { .. } => "custom",
        }
    }
}

/// `υ²_max/N` on a grid of couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub model: BoundModel,
    pub n_qubits: usize,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub regimes: Vec<Regime>,
    /// Closed-form termwise bound per spin, where one exists.
    pub upper_bounds: Vec<Option<f64>>,
    /// Numeric optimizer per spin, when cross-checked.
    pub numeric: Option<Vec<f64>>,
}

impl BoundCurve {
    /// Largest known separable value per spin at grid point `i`.
    pub fn witness_bound(&self, i: usize) -> f64 {
        let v = self.values[i];
        self.numeric.as_ref().map_or(v, |n| v.max(n[i]))
    }
}

fn model_hamiltonian(
    model: &BoundModel,
    n: usize,
    alpha: &[f64],
    eps: f64,
) -> Result<CollectiveHamiltonian> {
    let dir = crate::qsim::DIR_Z;
    match model {
        BoundModel::Ising { boundary } => {
            CollectiveHamiltonian::ising(alpha.to_vec(), eps, dir, *boundary)
        }
        BoundModel::Lmg => {
            if n < 2 {
                return domain("LMG model needs at least 2 spins");
            }
            CollectiveHamiltonian::lmg(alpha.to_vec(), eps / (n as f64 - 1.0), dir)
        }
        BoundModel::Custom { coupling } => {
            CollectiveHamiltonian::new(alpha.to_vec(), coupling.clone(), eps, dir, dir)
        }
    }
}

/// Separable bound curve. Homogeneous periodic Ising and LMG use the
/// analytic branches; other cases use the numeric optimizer. With
/// `cross_check`, the optimizer also runs on every point and grid points
/// where it beats the analytic value by more than `1e-9` are tagged
/// [`Regime::Crossover`].
pub fn bound_curve(
    model: &BoundModel,
    epsilons: &[f64],
    n: usize,
    alpha: Option<&[f64]>,
    cross_check: Option<&OptimizerSettings>,
) -> Result<BoundCurve> {
    let alpha: Vec<f64> = alpha.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    if alpha.len() != n {
        return domain(format!("{} couplings alpha for {n} spins", alpha.len()));
    }
    let homogeneous = alpha.iter().all(|&a| a == 1.0);
    let nf = n as f64;
    let analytic = match model {
        BoundModel::Ising { boundary } => homogeneous && *boundary == Boundary::Periodic,
        BoundModel::Lmg => homogeneous,
        BoundModel::Custom { .. } => false,
    };

    type Point = (f64, Regime, Option<f64>, Option<f64>);
    let points: Vec<Result<Point>> = epsilons
        .par_iter()
        .map(|&eps| {
            check_eps(eps)?;
            let upper = match model {
                BoundModel::Ising { .. } => Some(ising_upper_bound(eps, &alpha)? / nf),
                BoundModel::Lmg if homogeneous => Some(lmg_upper_bound(eps, n)? / nf),
                _ => None,
            };
            let numeric = if !analytic || cross_check.is_some() {
                let h = model_hamiltonian(model, n, &alpha, eps)?;
                let opts = cross_check.cloned().unwrap_or_default();
                Some(max_separable_speed(&h, &opts)?.0 / nf)
            } else {
                None
            };
            let (value, mut regime) = if analytic {
                let b = match model {
                    BoundModel::Lmg => lmg_bound_analytic(eps, n)?,
                    _ => ising_bound_analytic(eps, n)?,
                };
                (b.value / nf, b.regime)
            } else {
                (numeric.expect("numeric computed"), Regime::Numeric)
            };
            if analytic && numeric.is_some_and(|x| x > value + 1e-9) {
                regime = Regime::Crossover;
            }
            Ok((value, regime, upper, numeric))
        })
        .collect();

    let mut curve = BoundCurve {
        model: model.clone(),
        n_qubits: n,
        epsilons: epsilons.to_vec(),
        values: Vec::with_capacity(epsilons.len()),
        regimes: Vec::with_capacity(epsilons.len()),
        upper_bounds: Vec::with_capacity(epsilons.len()),
        numeric: (!analytic || cross_check.is_some()).then(Vec::new),
    };
    for p in points {
        let (v, r, u, num) = p?;
        curve.values.push(v);
        curve.regimes.push(r);
        curve.upper_bounds.push(u);
        if let (Some(list), Some(x)) = (curve.numeric.as_mut(), num) {
            list.push(x);
        }
    }
    Ok(curve)
}
