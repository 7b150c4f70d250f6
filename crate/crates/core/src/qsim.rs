//! Dense state-vector simulator for up to 14 qubits.
//!
//! Qubit `i` is bit `i` of the basis index; `|0⟩ = |↑⟩` is the `+1`
//! eigenstate of `σ_z`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::prob::DiscreteDistribution;

pub const MAX_QUBITS: usize = 14;
const NORM_TOL: f64 = 1e-10;
const UNIT_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "{n} qubits outside the supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if amps.len() != 1 << n_qubits {
            return domain(format!(
                "{} amplitudes for {n_qubits} qubits",
                amps.len()
            ));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return domain(format!("state norm {norm} is not 1"));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state; bit `i` of `index` is qubit `i`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        if index >= 1 << n_qubits {
            return domain(format!("basis index {index} out of range"));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return domain("inner product of states with different qubit counts");
        }
        Ok(dot(&self.amps, &other.amps))
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn build_ghz(n: usize) -> Result<StateVector> {
    check_qubits(n)?;
    let mut amps = vec![ZERO; 1 << n];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    amps[0] = Complex64::new(h, 0.0);
    amps[(1 << n) - 1] = Complex64::new(h, 0.0);
    Ok(StateVector { n_qubits: n, amps })
}

/// `(|↑↓⟩^{⊗n/2} + |↑⟩^{⊗n/2}|↓⟩^{⊗n/2})/√2`: Néel string plus domain wall.
pub fn build_chi(n: usize) -> Result<StateVector> {
    if n % 2 == 1 {
        return domain(format!("|χ⟩ needs an even number of qubits, got {n}"));
    }
    check_qubits(n)?;
    if n < 4 {
        return domain("|χ⟩ needs at least 4 qubits");
    }
    let neel: usize = (0..n).filter(|i| i % 2 == 1).map(|i| 1 << i).sum();
    let wall: usize = (n / 2..n).map(|i| 1 << i).sum();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![ZERO; 1 << n];
    amps[neel] = Complex64::new(h, 0.0);
    amps[wall] = Complex64::new(h, 0.0);
    Ok(StateVector { n_qubits: n, amps })
}

/// Single-qubit amplitudes `(a0, a1)` with the given Bloch vector.
pub fn qubit_from_bloch(b: [f64; 3]) -> Result<[Complex64; 2]> {
    let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if (norm - 1.0).abs() > NORM_TOL {
        return domain(format!("Bloch vector norm {norm} is not 1"));
    }
    let z = (b[2] / norm).clamp(-1.0, 1.0);
    let phi = b[1].atan2(b[0]);
    let a0 = ((1.0 + z) / 2.0).sqrt();
    let a1 = ((1.0 - z) / 2.0).sqrt();
    Ok([
        Complex64::new(a0, 0.0),
        Complex64::from_polar(a1, phi),
    ])
}

/// Tensor product of single-qubit pure states, one Bloch vector per qubit.
pub fn build_product_state(blochs: &[[f64; 3]]) -> Result<StateVector> {
    check_qubits(blochs.len())?;
    let qubits = blochs
        .iter()
        .map(|&b| qubit_from_bloch(b))
        .collect::<Result<Vec<_>>>()?;
    let n = qubits.len();
    let amps = (0..1usize << n)
        .map(|idx| {
            qubits
                .iter()
                .enumerate()
                .map(|(i, q)| q[(idx >> i) & 1])
                .product()
        })
        .collect();
    Ok(StateVector { n_qubits: n, amps })
}

pub fn unit_vector(v: [f64; 3]) -> Result<[f64; 3]> {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !(norm > 0.0) {
        return domain("zero direction vector");
    }
    Ok([v[0] / norm, v[1] / norm, v[2] / norm])
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub const DIR_X: [f64; 3] = [1.0, 0.0, 0.0];
pub const DIR_Y: [f64; 3] = [0.0, 1.0, 0.0];
pub const DIR_Z: [f64; 3] = [0.0, 0.0, 1.0];

/// Ising chain boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

/// `H = Σ_i (α_i/2) σ_m^(i) + ε Σ_{i,j} (V_ij/4) σ_n^(i) σ_n^(j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveHamiltonian {
    n_qubits: usize,
    alpha: Vec<f64>,
    /// Row-major `N×N`, symmetric, zero diagonal.
    coupling: Vec<f64>,
    epsilon: f64,
    dir_m: [f64; 3],
    dir_n: [f64; 3],
}

impl CollectiveHamiltonian {
    pub fn new(
        alpha: Vec<f64>,
        coupling: Vec<f64>,
        epsilon: f64,
        dir_m: [f64; 3],
        dir_n: [f64; 3],
    ) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return domain("Hamiltonian needs at least one qubit");
        }
        if coupling.len() != n * n {
            return domain(format!(
                "coupling matrix has {} entries, expected {}",
                coupling.len(),
                n * n
            ));
        }
        for (i, &a) in alpha.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) {
                return domain(format!("alpha[{i}] = {a} outside [0, 1]"));
            }
        }
        for i in 0..n {
            if coupling[i * n + i] != 0.0 {
                return domain(format!("coupling diagonal V[{i}][{i}] must be 0"));
            }
            for j in 0..i {
                let (a, b) = (coupling[i * n + j], coupling[j * n + i]);
                if !a.is_finite() || a != b {
                    return domain(format!("coupling not symmetric at ({i}, {j})"));
                }
            }
        }
        if !epsilon.is_finite() {
            return domain("epsilon must be finite");
        }
        for (name, d) in [("dir_m", dir_m), ("dir_n", dir_n)] {
            let norm = dot3(d, d).sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return domain(format!("{name} has norm {norm}, expected 1"));
            }
        }
        Ok(Self {
            n_qubits: n,
            alpha,
            coupling,
            epsilon,
            dir_m,
            dir_n,
        })
    }

    /// `H₀ = ½ Σ_i σ_dir^(i)`.
    pub fn linear(n: usize, dir: [f64; 3]) -> Result<Self> {
        Self::new(vec![1.0; n], vec![0.0; n * n], 0.0, dir, dir)
    }

    /// Nearest-neighbour couplings `V_ij = (δ_{j,i+1} + δ_{j,i−1})/2`.
    pub fn ising_coupling(n: usize, boundary: Boundary) -> Result<Vec<f64>> {
        if n < 3 {
            return domain("Ising chain needs at least 3 sites");
        }
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            let bonds: &[usize] = match boundary {
                Boundary::Periodic => &[(i + 1) % n, (i + n - 1) % n],
                Boundary::Open if i == 0 => &[1],
                Boundary::Open if i == n - 1 => &[n - 2],
                Boundary::Open => &[i + 1, i - 1],
            };
            for &j in bonds {
                v[i * n + j] += 0.5;
            }
        }
        Ok(v)
    }

    pub fn lmg_coupling(n: usize) -> Vec<f64> {
        let mut v = vec![1.0; n * n];
        for i in 0..n {
            v[i * n + i] = 0.0;
        }
        v
    }

    pub fn ising(
        alpha: Vec<f64>,
        epsilon: f64,
        dir: [f64; 3],
        boundary: Boundary,
    ) -> Result<Self> {
        let v = Self::ising_coupling(alpha.len(), boundary)?;
        Self::new(alpha, v, epsilon, dir, dir)
    }

    /// `H₁ = ¼ Σ_i σ_dir^(i) σ_dir^(i+1)` alone (α = 0, ε = 1).
    pub fn ising_h1(n: usize, dir: [f64; 3], boundary: Boundary) -> Result<Self> {
        Self::ising(vec![0.0; n], 1.0, dir, boundary)
    }

    pub fn lmg(alpha: Vec<f64>, epsilon: f64, dir: [f64; 3]) -> Result<Self> {
        let v = Self::lmg_coupling(alpha.len());
        Self::new(alpha, v, epsilon, dir, dir)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.n_qubits + j]
    }

    pub fn coupling_matrix(&self) -> &[f64] {
        &self.coupling
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dir_m(&self) -> [f64; 3] {
        self.dir_m
    }

    pub fn dir_n(&self) -> [f64; 3] {
        self.dir_n
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut h = self.clone();
        if !epsilon.is_finite() {
            return domain("epsilon must be finite");
        }
        h.epsilon = epsilon;
        Ok(h)
    }

    /// Upper bound on the operator norm, from `‖σ‖ = 1`.
    pub fn norm_bound(&self) -> f64 {
        let lin: f64 = self.alpha.iter().map(|a| a.abs() / 2.0).sum();
        let quad: f64 = self.coupling.iter().map(|v| v.abs() / 4.0).sum();
        lin + self.epsilon.abs() * quad
    }

    fn check_dims(&self, psi: &StateVector) -> Result<()> {
        if psi.n_qubits != self.n_qubits {
            return domain(format!(
                "state has {} qubits, Hamiltonian acts on {}",
                psi.n_qubits, self.n_qubits
            ));
        }
        Ok(())
    }

    /// `H|ψ⟩` without materializing `H`.
    pub fn apply(&self, psi: &StateVector) -> Result<Vec<Complex64>> {
        self.check_dims(psi)?;
        Ok(self.apply_raw(&psi.amps))
    }

    fn apply_raw(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_qubits;
        let mut out = vec![ZERO; amps.len()];
        let mut scratch = vec![ZERO; amps.len()];
        for (i, &a) in self.alpha.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            apply_pauli_dir(amps, &mut scratch, i, self.dir_m);
            axpy(&mut out, a / 2.0, &scratch);
        }
        if self.epsilon != 0.0 {
            let mut pair = vec![ZERO; amps.len()];
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = self.coupling[i * n + j];
                    if v == 0.0 {
                        continue;
                    }
                    apply_pauli_dir(amps, &mut scratch, j, self.dir_n);
                    apply_pauli_dir(&scratch, &mut pair, i, self.dir_n);
                    // (i, j) and (j, i) both appear in the double sum.
                    axpy(&mut out, self.epsilon * v / 2.0, &pair);
                }
            }
        }
        out
    }

    /// `⟨ψ|H|ψ⟩`; the imaginary part is rounding noise for Hermitian `H`.
    pub fn expectation(&self, psi: &StateVector) -> Result<Complex64> {
        let h = self.apply(psi)?;
        Ok(dot(&psi.amps, &h))
    }
}

/// `σ_d^(qubit)` applied to `src`, written into `dst`.
fn apply_pauli_dir(src: &[Complex64], dst: &mut [Complex64], qubit: usize, d: [f64; 3]) {
    let bit = 1usize << qubit;
    let up = Complex64::new(d[0], -d[1]);
    let down = Complex64::new(d[0], d[1]);
    let z = d[2];
    for idx in 0..src.len() {
        if idx & bit != 0 {
            continue;
        }
        let (a0, a1) = (src[idx], src[idx | bit]);
        dst[idx] = a0 * z + up * a1;
        dst[idx | bit] = down * a0 - a1 * z;
    }
}

fn axpy(y: &mut [Complex64], a: f64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

/// Pure-state quantum statistical speed `4(⟨H²⟩ − ⟨H⟩²)`.
pub fn quantum_speed_pure(h: &CollectiveHamiltonian, psi: &StateVector) -> Result<f64> {
    let hpsi = h.apply(psi)?;
    let mean = dot(&psi.amps, &hpsi).re;
    let second: f64 = hpsi.iter().map(|a| a.norm_sqr()).sum();
    Ok((4.0 * (second - mean * mean)).max(0.0))
}

/// `e^{−iHθ}|ψ⟩` by a scaled Taylor series.
pub fn evolve(psi: &StateVector, h: &CollectiveHamiltonian, theta: f64) -> Result<StateVector> {
    h.check_dims(psi)?;
    if theta == 0.0 {
        return Ok(psi.clone());
    }
    let steps = ((h.norm_bound() * theta.abs()) / 0.5).ceil().max(1.0) as usize;
    let dt = theta / steps as f64;
    let mut amps = psi.amps.clone();
    for _ in 0..steps {
        let mut term = amps.clone();
        let mut acc = amps.clone();
        for k in 1..=60 {
            let hv = h.apply_raw(&term);
            let scale = -I * (dt / k as f64);
            for (t, x) in term.iter_mut().zip(&hv) {
                *t = x * scale;
            }
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            let tn: f64 = term.iter().map(|t| t.norm_sqr()).sum();
            if tn < 1e-36 {
                break;
            }
        }
        amps = acc;
    }
    Ok(StateVector {
        n_qubits: psi.n_qubits,
        amps,
    })
}

/// Collective analysis pulse `⊗_j e^{i(π/4)σ_θ^(j)}` with
/// `σ_θ = σ_x cos θ + σ_y sin θ`: a π/2 rotation about an equatorial axis.
pub fn collective_pi_half_rotation(psi: &StateVector, theta: f64) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u00 = Complex64::new(s, 0.0);
    let u01 = I * Complex64::from_polar(s, -theta);
    let u10 = I * Complex64::from_polar(s, theta);
    let mut amps = psi.amps.clone();
    for q in 0..psi.n_qubits {
        let bit = 1usize << q;
        for idx in 0..amps.len() {
            if idx & bit != 0 {
                continue;
            }
            let (a0, a1) = (amps[idx], amps[idx | bit]);
            amps[idx] = u00 * a0 + u01 * a1;
            amps[idx | bit] = u10 * a0 + u00 * a1;
        }
    }
    StateVector {
        n_qubits: psi.n_qubits,
        amps,
    }
}

/// Observable measured on the output state.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementOperator {
    /// `Π = (−1)^{N₀}`, `N₀` the number of qubits found in `|1⟩`.
    Parity,
    /// `σ_x^{⊗N}`.
    PauliXString,
    /// Diagonal in the computational basis: one eigenvalue per basis index.
    Diagonal(Vec<f64>),
}

/// `⟨σ_x^{⊗N}⟩ = Σ_x a_x* a_{x̄}`.
pub fn pauli_x_string_expectation(psi: &StateVector) -> f64 {
    let mask = psi.amps.len() - 1;
    psi.amps
        .iter()
        .enumerate()
        .map(|(x, a)| a.conj() * psi.amps[x ^ mask])
        .sum::<Complex64>()
        .re
}

fn two_point(p_plus: f64) -> Result<DiscreteDistribution> {
    DiscreteDistribution::dichotomic(p_plus.clamp(0.0, 1.0))
}

pub fn measurement_distribution(
    psi: &StateVector,
    op: &MeasurementOperator,
) -> Result<DiscreteDistribution> {
    match op {
        MeasurementOperator::Parity => {
            let p_plus: f64 = psi
                .amps
                .iter()
                .enumerate()
                .filter(|(x, _)| x.count_ones() % 2 == 0)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            two_point(p_plus)
        }
        MeasurementOperator::PauliXString => {
            two_point((1.0 + pauli_x_string_expectation(psi)) / 2.0)
        }
        MeasurementOperator::Diagonal(eigs) => {
            if eigs.len() != psi.amps.len() {
                return domain(format!(
                    "{} eigenvalues for a {}-dimensional state",
                    eigs.len(),
                    psi.amps.len()
                ));
            }
            let mut levels: Vec<f64> = eigs.clone();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let mut probs = vec![0.0; levels.len()];
            for (e, a) in eigs.iter().zip(&psi.amps) {
                let k = levels
                    .binary_search_by(|l| l.total_cmp(e))
                    .expect("level present");
                probs[k] += a.norm_sqr();
            }
            let total: f64 = probs.iter().sum();
            for p in &mut probs {
                *p = (*p / total).clamp(0.0, 1.0);
            }
            DiscreteDistribution::new(levels, probs)
        }
    }
}
