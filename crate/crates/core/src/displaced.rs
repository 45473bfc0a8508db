//! Displaced Fock states for the two-spin model with the boson on spin 1.
//!
//! Spin-1 up states carry the boson basis |n⟩_A (oscillator displaced to
//! −q), spin-1 down states carry |n⟩_B (displaced to +q), q = λ/ω. The
//! coupling between the two families is the overlap kernel
//!
//! D_{m,n} = e^{−2q²} Σ_k (−1)^k √(m!n!) (2q)^{m+n−2k} / ((m−k)!(n−k)!k!)
//!
//! which satisfies (−1)ⁿ D_{m,n} = ⟨m| exp(2q(a† − a)) |n⟩. At q = 0 it
//! reduces to (−1)^m δ_{mn}.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hilbert::{BasisTag, BosonBasis, SymmetricOperator};
use crate::models::{IsingAxis, ModelSpec};
use crate::spectra::{eigendecompose, seed_cutoff, CUTOFF_SHIFT_TOL};

/// Generalized Laguerre polynomials L_k^{(order)}(x) for k = 0..len by the
/// forward three-term recurrence, returned as (values, ln scale) with the
/// true value `values[k] * exp(ln_scale[k])`.
fn laguerre_run(order: usize, x: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    const BIG: f64 = 1e200;
    let a = order as f64;
    let mut values = Vec::with_capacity(len);
    let mut scales = Vec::with_capacity(len);
    let (mut prev, mut cur, mut scale) = (0.0, 1.0, 0.0);
    for k in 0..len {
        values.push(cur);
        scales.push(scale);
        let kf = k as f64;
        let next = if k == 0 {
            1.0 + a - x
        } else {
            ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0)
        };
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            prev /= BIG;
            cur /= BIG;
            scale += BIG.ln();
        }
    }
    (values, scales)
}

/// D_{m,n} for m ≤ n from the Laguerre form
/// (−1)^m √(m!/n!) (2q)^{n−m} e^{−2q²} L_m^{(n−m)}(4q²),
/// given L_m^{(n−m)} as (value, ln scale) and ln(n!/m!).
fn kernel_from_laguerre(m: usize, n: usize, q: f64, lag: f64, lag_scale: f64, ln_ratio: f64) -> f64 {
    let order = n - m;
    if q == 0.0 {
        return if order == 0 { sign(m) * lag } else { 0.0 };
    }
    let x = 2.0 * q;
    let ln_pref = -0.5 * ln_ratio + order as f64 * x.abs().ln() - 2.0 * q * q + lag_scale;
    let power_sign = if x < 0.0 { sign(order) } else { 1.0 };
    sign(m) * power_sign * ln_pref.exp() * lag
}

#[inline]
fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// D_{m,n} for displacement q. Evaluated through generalized Laguerre
/// polynomials, which stays accurate to a few ulps for indices in the
/// hundreds.
pub fn overlap_d(m: usize, n: usize, q: f64) -> f64 {
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    let (values, scales) = laguerre_run(hi - lo, 4.0 * q * q, lo + 1);
    let ln_ratio: f64 = (lo + 1..=hi).map(|i| (i as f64).ln()).sum();
    kernel_from_laguerre(lo, hi, q, values[lo], scales[lo], ln_ratio)
}

/// D_{m,n} by direct summation of the alternating series, term ratios built
/// iteratively from a log-space first term. Finite for large indices but
/// loses digits to cancellation once (2q)² and min(m, n) are both large;
/// [`overlap_d`] is the accurate evaluator.
pub fn overlap_d_series(m: usize, n: usize, q: f64) -> f64 {
    if q == 0.0 {
        return if m == n { sign(m) } else { 0.0 };
    }
    let x = 2.0 * q;
    let (m_f, n_f) = (m as f64, n as f64);
    // k = 0 term: (2q)^{m+n} / √(m! n!)
    let log_t0 = (m_f + n_f) * x.abs().ln() - 0.5 * (ln_factorial(m) + ln_factorial(n)) - 2.0 * q * q;
    let mut term = log_t0.exp() * if x < 0.0 { sign(m + n) } else { 1.0 };
    let mut sum = term;
    for k in 0..m.min(n) {
        let ratio = -((m - k) as f64) * ((n - k) as f64) / (((k + 1) as f64) * x * x);
        term *= ratio;
        sum += term;
    }
    sum
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// The D kernel on a truncated basis.
#[derive(Clone, Debug)]
pub struct OverlapMatrix {
    q: f64,
    entries: DMatrix<f64>,
}

impl OverlapMatrix {
    /// Builds from an arbitrary kernel; mirrored entries are taken from m ≤ n.
    pub fn from_kernel(basis: BosonBasis, q: f64, kernel: impl Fn(usize, usize, f64) -> f64) -> Self {
        let size = basis.dim();
        let mut entries = DMatrix::zeros(size, size);
        for n in 0..size {
            for m in 0..=n {
                let v = kernel(m, n, q);
                entries[(m, n)] = v;
                entries[(n, m)] = v;
            }
        }
        OverlapMatrix { q, entries }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn cutoff(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[(m, n)]
    }
}

pub fn overlap_matrix(basis: BosonBasis, q: f64) -> OverlapMatrix {
    let size = basis.dim();
    let x = 4.0 * q * q;
    let mut ln_fact = vec![0.0; size];
    for i in 1..size {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let mut entries = DMatrix::zeros(size, size);
    for order in 0..size {
        let (values, scales) = laguerre_run(order, x, size - order);
        for m in 0..size - order {
            let n = m + order;
            let v = kernel_from_laguerre(m, n, q, values[m], scales[m], ln_fact[n] - ln_fact[m]);
            entries[(m, n)] = v;
            entries[(n, m)] = v;
        }
    }
    OverlapMatrix { q, entries }
}

/// Uniform two-spin parameters (Δ, ω, λ, ε, η), bias on spin 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoSpinParams {
    pub delta: f64,
    pub omega: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl TwoSpinParams {
    pub fn q(&self) -> f64 {
        self.lambda / self.omega
    }

    /// XX-variant Fock-basis spec with the same parameters.
    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec::two_spin(self.delta, self.omega, self.lambda, self.epsilon, self.eta, IsingAxis::XX)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        if spec.n_spins != 2 {
            return Err(Error::InvalidModel(format!(
                "displaced assembly needs two spins, got {}",
                spec.n_spins
            )));
        }
        if spec.tunneling[0] != spec.tunneling[1] {
            return Err(Error::InvalidModel("displaced assembly needs uniform tunneling".into()));
        }
        if spec.bias[1] != 0.0 {
            return Err(Error::InvalidModel("displaced assembly takes bias on spin 1 only".into()));
        }
        let epsilon = match spec.ising_edges.as_slice() {
            [] => 0.0,
            [e] => e.strength,
            _ => return Err(Error::InvalidModel("two spins have at most one Ising edge".into())),
        };
        Ok(TwoSpinParams {
            delta: spec.tunneling[0],
            omega: spec.boson_freq,
            lambda: spec.coupling,
            epsilon,
            eta: spec.bias[0],
        })
    }
}

/// Builds the coefficient-space matrix of the coupled equations for
/// (a_m, b_m, c_m, d_m), ordered as four blocks of `cutoff + 1`.
pub fn assemble_displaced(params: &TwoSpinParams, basis: BosonBasis) -> Result<SymmetricOperator> {
    let overlap = overlap_matrix(basis, params.q());
    assemble_with_overlap(params, &overlap)
}

pub fn assemble_with_overlap(params: &TwoSpinParams, overlap: &OverlapMatrix) -> Result<SymmetricOperator> {
    let TwoSpinParams { delta, omega, epsilon, eta, .. } = *params;
    let q = overlap.q();
    let size = overlap.cutoff() + 1;
    let (a, b, c, d) = (0, size, 2 * size, 3 * size);
    let mut h = DMatrix::zeros(4 * size, 4 * size);
    for m in 0..size {
        let level = omega * (m as f64 - q * q);
        h[(a + m, a + m)] = level - eta;
        h[(b + m, b + m)] = level - eta;
        h[(c + m, c + m)] = level + eta;
        h[(d + m, d + m)] = level + eta;
        h[(a + m, b + m)] = -delta;
        h[(b + m, a + m)] = -delta;
        h[(c + m, d + m)] = -delta;
        h[(d + m, c + m)] = -delta;
        for n in 0..size {
            // rows a, b: (−1)^m D_mn; rows c, d: (−1)^n D_mn
            let ab = sign(m) * overlap.get(m, n);
            h[(a + m, d + n)] = epsilon * ab;
            h[(a + m, c + n)] = -delta * ab;
            h[(b + m, c + n)] = epsilon * ab;
            h[(b + m, d + n)] = -delta * ab;
            let cd = sign(n) * overlap.get(m, n);
            h[(c + m, b + n)] = epsilon * cd;
            h[(c + m, a + n)] = -delta * cd;
            h[(d + m, a + n)] = epsilon * cd;
            h[(d + m, b + n)] = -delta * cd;
        }
    }
    SymmetricOperator::from_dense(&h, BasisTag::Displaced { cutoff: size - 1 })
}

/// Largest cutoff the displaced convergence loop will try.
pub const DISPLACED_MAX_CUTOFF: usize = 200;

/// Lowest levels of the displaced solver at a cutoff shown converged.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacedLevels {
    pub cutoff: usize,
    pub levels: Vec<f64>,
}

/// Raises the displaced cutoff from the Fock seed in steps of `step` until
/// the lowest `k` levels move by less than `1e-10 ω`.
pub fn solve_displaced_converged(params: &TwoSpinParams, k: usize, step: usize) -> Result<DisplacedLevels> {
    solve_displaced_converged_with(params, k, step, overlap_matrix)
}

/// As [`solve_displaced_converged`] with the overlap built by `overlap`.
pub fn solve_displaced_converged_with(
    params: &TwoSpinParams,
    k: usize,
    step: usize,
    overlap: impl Fn(BosonBasis, f64) -> OverlapMatrix,
) -> Result<DisplacedLevels> {
    let step = step.max(1);
    let tol = CUTOFF_SHIFT_TOL * params.omega;
    let q = params.q();
    let lowest = |cutoff: usize| -> Result<Vec<f64>> {
        if cutoff > DISPLACED_MAX_CUTOFF {
            return Err(Error::CutoffNotConverged(format!(
                "displaced cutoff limit {DISPLACED_MAX_CUTOFF} reached"
            )));
        }
        let h = assemble_with_overlap(params, &overlap(BosonBasis::new(cutoff), q))?;
        let s = eigendecompose(&h, Some(k))?;
        Ok(s.eigenvalues()[..k.min(s.len())].to_vec())
    };
    let mut cutoff = seed_cutoff(q);
    let mut current = lowest(cutoff)?;
    loop {
        let next = lowest(cutoff + step)?;
        let shift = current.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if shift < tol {
            return Ok(DisplacedLevels { cutoff, levels: current });
        }
        cutoff += step;
        current = next;
    }
}

/// Coefficients of a displaced-basis vector split by spin sector.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacedState {
    /// |↓↓⟩, boson basis B
    pub a: Vec<f64>,
    /// |↓↑⟩, boson basis B
    pub b: Vec<f64>,
    /// |↑↓⟩, boson basis A
    pub c: Vec<f64>,
    /// |↑↑⟩, boson basis A
    pub d: Vec<f64>,
}

impl DisplacedState {
    pub fn from_vector(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(4) || v.is_empty() {
            return Err(Error::InvalidParameter(format!("length {} is not 4(n_max+1)", v.len())));
        }
        let s = v.len() / 4;
        Ok(DisplacedState {
            a: v[..s].to_vec(),
            b: v[s..2 * s].to_vec(),
            c: v[2 * s..3 * s].to_vec(),
            d: v[3 * s..].to_vec(),
        })
    }

    pub fn norm_squared(&self) -> f64 {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum()
    }

    /// ⟨σ₁ᶻ⟩: the c, d sectors have spin 1 up.
    pub fn sigma1_z(&self) -> f64 {
        let sq = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
        (sq(&self.c) + sq(&self.d) - sq(&self.a) - sq(&self.b)) / self.norm_squared()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// E_{m1}^±, couples through ε − Δ
    One,
    /// E_{m2}^±, couples through ε + Δ
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticLevel {
    pub m: usize,
    pub family: Family,
    pub branch: Branch,
    pub energy: f64,
}

/// Closed-form levels keeping only the diagonal D_{mm}; valid for Δ/ω ≪ 1.
/// Returned in the order E_{m1}^−, E_{m1}^+, E_{m2}^−, E_{m2}^+.
pub fn adiabatic_energies(m: usize, p: &TwoSpinParams) -> [AdiabaticLevel; 4] {
    let q = p.q();
    let dmm = overlap_d(m, m, q);
    let base = p.omega * (m as f64 - q * q);
    let r1 = (dmm * dmm * (p.epsilon - p.delta).powi(2) + p.eta * p.eta).sqrt();
    let r2 = (dmm * dmm * (p.epsilon + p.delta).powi(2) + p.eta * p.eta).sqrt();
    let level = |family, branch, energy| AdiabaticLevel { m, family, branch, energy };
    [
        level(Family::One, Branch::Minus, -p.delta - r1 + base),
        level(Family::One, Branch::Plus, -p.delta + r1 + base),
        level(Family::Two, Branch::Minus, p.delta - r2 + base),
        level(Family::Two, Branch::Plus, p.delta + r2 + base),
    ]
}

/// E_{01}^−, the approximate ground energy for Δ/ω ≪ 1.
pub fn adiabatic_ground_energy(p: &TwoSpinParams) -> f64 {
    adiabatic_energies(0, p)[0].energy
}

/// The 4×4 block of the coupled equations at a single m with only D_{mm}
/// kept, in (a_m, b_m, c_m, d_m) order.
pub fn single_level_block(m: usize, p: &TwoSpinParams) -> Matrix4<f64> {
    let q = p.q();
    let s = sign(m) * overlap_d(m, m, q);
    let e0 = p.omega * (m as f64 - q * q);
    let (dl, ep, eta) = (p.delta, p.epsilon, p.eta);
    #[rustfmt::skip]
    let block = Matrix4::new(
        e0 - eta, -dl,      -dl * s,  ep * s,
        -dl,      e0 - eta, ep * s,   -dl * s,
        -dl * s,  ep * s,   e0 + eta, -dl,
        ep * s,   -dl * s,  -dl,      e0 + eta,
    );
    block
}

/// Eigenvalues of [`single_level_block`], ascending.
pub fn single_level_energies(m: usize, p: &TwoSpinParams) -> [f64; 4] {
    let eig = SymmetricEigen::new(single_level_block(m, p));
    let mut e = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2], eig.eigenvalues[3]];
    e.sort_by(f64::total_cmp);
    e
}
