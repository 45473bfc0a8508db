//! Model descriptions, Hamiltonian and parity assembly, and symmetry diagnostics.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{self, Axis, BasisTag, BosonBasis, SymmetricOperator};
use crate::spectra::{self, Spectrum};

/// Largest composite dimension `build_hamiltonian` accepts by default.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Axis of the Ising interaction between spins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsingAxis {
    /// ε σᵢᶻσⱼᶻ
    #[serde(alias = "ZZ")]
    ZZ,
    /// ε σᵢˣσⱼˣ
    #[serde(alias = "XX")]
    XX,
}

impl IsingAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            IsingAxis::ZZ => "zz",
            IsingAxis::XX => "xx",
        }
    }

    fn pauli(self) -> Axis {
        match self {
            IsingAxis::ZZ => Axis::Z,
            IsingAxis::XX => Axis::X,
        }
    }
}

impl std::str::FromStr for IsingAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zz" => Ok(IsingAxis::ZZ),
            "xx" => Ok(IsingAxis::XX),
            other => Err(Error::InvalidParameter(format!("unknown ising axis {other:?}"))),
        }
    }
}

/// Ising bond between spins `i < j` (1-based) with strength ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct IsingEdge {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

impl IsingEdge {
    pub fn new(i: usize, j: usize, strength: f64) -> Self {
        IsingEdge { i, j, strength }
    }
}

impl From<(usize, usize, f64)> for IsingEdge {
    fn from((i, j, strength): (usize, usize, f64)) -> Self {
        IsingEdge { i, j, strength }
    }
}

impl From<IsingEdge> for (usize, usize, f64) {
    fn from(e: IsingEdge) -> Self {
        (e.i, e.j, e.strength)
    }
}

/// A spin-boson model: N spins, one boson mode coupled to spin 1.
///
/// H = Σᵢ(−Δᵢ σᵢˣ) + ω a†a + λ(a†+a)σ₁ᶻ + Σ εᵢⱼ σᵢᴬσⱼᴬ + Σᵢ ηᵢ σᵢᶻ
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_spins: usize,
    pub tunneling: Vec<f64>,
    pub boson_freq: f64,
    pub coupling: f64,
    pub ising_edges: Vec<IsingEdge>,
    pub bias: Vec<f64>,
    pub ising_axis: IsingAxis,
}

impl ModelSpec {
    /// Single biased Rabi spin: −Δσˣ + εσᶻ + ωa†a + λ(a†+a)σᶻ.
    pub fn biased_rabi(delta: f64, omega: f64, lambda: f64, bias: f64) -> Self {
        ModelSpec {
            n_spins: 1,
            tunneling: vec![delta],
            boson_freq: omega,
            coupling: lambda,
            ising_edges: Vec::new(),
            bias: vec![bias],
            ising_axis: IsingAxis::ZZ,
        }
    }

    /// Rabi spin plus one Ising-coupled auxiliary spin, bias η on spin 1.
    pub fn two_spin(
        delta: f64,
        omega: f64,
        lambda: f64,
        epsilon: f64,
        eta: f64,
        axis: IsingAxis,
    ) -> Self {
        ModelSpec {
            n_spins: 2,
            tunneling: vec![delta; 2],
            boson_freq: omega,
            coupling: lambda,
            ising_edges: vec![IsingEdge::new(1, 2, epsilon)],
            bias: vec![eta, 0.0],
            ising_axis: axis,
        }
    }

    /// Star: spins 2..=N each coupled to spin 1 with `epsilons[k-2]`; bias on spin 1.
    pub fn star(
        delta: f64,
        omega: f64,
        lambda: f64,
        epsilons: &[f64],
        eta: f64,
        axis: IsingAxis,
    ) -> Self {
        let n_spins = epsilons.len() + 1;
        let mut bias = vec![0.0; n_spins];
        bias[0] = eta;
        ModelSpec {
            n_spins,
            tunneling: vec![delta; n_spins],
            boson_freq: omega,
            coupling: lambda,
            ising_edges: epsilons
                .iter()
                .enumerate()
                .map(|(k, &e)| IsingEdge::new(1, k + 2, e))
                .collect(),
            bias,
            ising_axis: axis,
        }
    }

    /// Linear chain 1–2–…–N with bias on the last spin.
    pub fn chain(
        delta: f64,
        omega: f64,
        lambda: f64,
        epsilons: &[f64],
        eta: f64,
        axis: IsingAxis,
    ) -> Self {
        let n_spins = epsilons.len() + 1;
        let mut bias = vec![0.0; n_spins];
        bias[n_spins - 1] = eta;
        ModelSpec {
            n_spins,
            tunneling: vec![delta; n_spins],
            boson_freq: omega,
            coupling: lambda,
            ising_edges: epsilons
                .iter()
                .enumerate()
                .map(|(k, &e)| IsingEdge::new(k + 1, k + 2, e))
                .collect(),
            bias,
            ising_axis: axis,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.n_spins == 0 {
            return bad("n_spins must be at least 1".into());
        }
        if self.tunneling.len() != self.n_spins {
            return bad(format!("tunneling has {} entries for {} spins", self.tunneling.len(), self.n_spins));
        }
        if self.bias.len() != self.n_spins {
            return bad(format!("bias has {} entries for {} spins", self.bias.len(), self.n_spins));
        }
        if !(self.boson_freq > 0.0) || !self.boson_freq.is_finite() {
            return bad(format!("boson_freq must be positive, got {}", self.boson_freq));
        }
        let all_finite = self.tunneling.iter().chain(&self.bias).all(|v| v.is_finite())
            && self.coupling.is_finite()
            && self.ising_edges.iter().all(|e| e.strength.is_finite());
        if !all_finite {
            return bad("non-finite parameter".into());
        }
        for e in &self.ising_edges {
            if e.i == 0 || e.j > self.n_spins || e.i >= e.j {
                return bad(format!("ising edge ({}, {}) must satisfy 1 <= i < j <= {}", e.i, e.j, self.n_spins));
            }
        }
        Ok(())
    }

    pub fn dim(&self, basis: BosonBasis) -> usize {
        (1usize << self.n_spins.min(usize::BITS as usize - 1)).saturating_mul(basis.dim())
    }

    /// Displacement q = λ/ω.
    pub fn displacement(&self) -> f64 {
        self.coupling / self.boson_freq
    }

    pub fn is_parity_symmetric(&self) -> bool {
        self.bias.iter().all(|&b| b == 0.0)
    }

    /// Copy with every bias negated.
    pub fn with_flipped_bias(&self) -> ModelSpec {
        ModelSpec { bias: self.bias.iter().map(|b| -b).collect(), ..self.clone() }
    }

    /// Compact single-line description used for provenance comments.
    pub fn digest(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.digest())
    }
}

/// Boson cutoff: a fixed n_max or "auto" for a converged sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CutoffChoice {
    #[default]
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for CutoffChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(CutoffChoice::Auto),
            n => n
                .parse()
                .map(CutoffChoice::Fixed)
                .map_err(|_| Error::InvalidParameter(format!("cutoff must be \"auto\" or an integer, got {n:?}"))),
        }
    }
}

impl fmt::Display for CutoffChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutoffChoice::Auto => f.write_str("auto"),
            CutoffChoice::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for CutoffChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CutoffChoice::Auto => s.serialize_str("auto"),
            CutoffChoice::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for CutoffChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(u64),
        }
        match Raw::deserialize(d)? {
            Raw::Number(n) => Ok(CutoffChoice::Fixed(n as usize)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A model together with its cutoff choice, the unit of configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(flatten)]
    pub spec: ModelSpec,
    #[serde(default)]
    pub cutoff: CutoffChoice,
}

impl ModelDocument {
    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ModelDocument = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        doc.spec.validate()?;
        Ok(doc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("document serializes")
    }

    /// Single-line JSON used for provenance comments.
    pub fn digest(&self) -> String {
        serde_json::to_string(self).expect("document serializes")
    }
}

pub fn build_hamiltonian(spec: &ModelSpec, basis: BosonBasis) -> Result<SymmetricOperator> {
    build_hamiltonian_with_limit(spec, basis, DEFAULT_MAX_DIM)
}

pub fn build_hamiltonian_with_limit(
    spec: &ModelSpec,
    basis: BosonBasis,
    max_dim: usize,
) -> Result<SymmetricOperator> {
    spec.validate()?;
    let dim = spec.dim(basis);
    if spec.n_spins >= 30 || dim > max_dim {
        return Err(Error::DimensionLimit { dim, limit: max_dim });
    }
    let n = spec.n_spins;
    let boson = hilbert::boson_ops(basis);
    let id_b = CsrMatrix::identity(basis.dim());

    let mut h = hilbert::spin_string(n, &[], &boson.number)? * spec.boson_freq;
    let mut add = |term: CsrMatrix<f64>, weight: f64| {
        if weight != 0.0 {
            h = &h + &(term * weight);
        }
    };
    for (k, &delta) in spec.tunneling.iter().enumerate() {
        add(hilbert::spin_string(n, &[(k + 1, Axis::X)], &id_b)?, -delta);
    }
    add(hilbert::spin_string(n, &[(1, Axis::Z)], &boson.quadrature())?, spec.coupling);
    let axis = spec.ising_axis.pauli();
    for e in &spec.ising_edges {
        add(hilbert::spin_string(n, &[(e.i, axis), (e.j, axis)], &id_b)?, e.strength);
    }
    for (k, &eta) in spec.bias.iter().enumerate() {
        add(hilbert::spin_string(n, &[(k + 1, Axis::Z)], &id_b)?, eta);
    }
    SymmetricOperator::new(h, BasisTag::Fock { n_spins: n, cutoff: basis.cutoff() })
}

/// P_N = (Πᵢ σᵢˣ) ⊗ e^{iπa†a}.
pub fn build_parity(n_spins: usize, basis: BosonBasis) -> Result<SymmetricOperator> {
    if n_spins == 0 {
        return Err(Error::InvalidModel("n_spins must be at least 1".into()));
    }
    Ok(hilbert::spin_flip_parity(n_spins, basis))
}

/// Frobenius and spectral norms of the commutator AB − BA.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommutatorNorms {
    pub frobenius: f64,
    pub spectral: f64,
}

fn commutator(a: &SymmetricOperator, b: &SymmetricOperator) -> Result<CsrMatrix<f64>> {
    Ok(&a.product(b)? - &b.product(a)?)
}

pub fn commutator_norm(a: &SymmetricOperator, b: &SymmetricOperator) -> Result<f64> {
    let c = commutator(a, b)?;
    Ok(c.values().iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Operator 2-norm of [A, B]. For symmetric A, B the commutator C is
/// antisymmetric, so ‖C‖₂² is the top eigenvalue of CᵀC.
pub fn commutator_spectral_norm(a: &SymmetricOperator, b: &SymmetricOperator) -> Result<f64> {
    let c = commutator(a, b)?;
    if c.values().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let gram = &c.transpose() * &c;
    let top = spectra::largest_eigenvalue(&gram)?;
    Ok(top.max(0.0).sqrt())
}

pub fn commutator_norms(a: &SymmetricOperator, b: &SymmetricOperator) -> Result<CommutatorNorms> {
    Ok(CommutatorNorms {
        frobenius: commutator_norm(a, b)?,
        spectral: commutator_spectral_norm(a, b)?,
    })
}

/// Tolerances for parity labelling.
#[derive(Clone, Copy, Debug)]
pub struct SectorOptions {
    /// Required |⟨P⟩| ≥ 1 − tol.
    pub tol: f64,
    /// Levels closer than this (relative to ‖H‖_F) are labelled jointly.
    pub degeneracy_rel: f64,
}

impl Default for SectorOptions {
    fn default() -> Self {
        SectorOptions { tol: 1e-8, degeneracy_rel: 1e-9 }
    }
}

/// Parity eigenvalue per eigenvector, aligned with the spectrum ordering.
/// Inside a degenerate cluster the labels belong to the basis that
/// diagonalizes P within the cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct ParityLabels {
    pub labels: Vec<i8>,
    pub expectations: Vec<f64>,
}

impl ParityLabels {
    pub fn count(&self, label: i8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

pub fn parity_sectors(
    spec: &ModelSpec,
    basis: BosonBasis,
    spectrum: &Spectrum,
) -> Result<ParityLabels> {
    parity_sectors_with(spec, basis, spectrum, SectorOptions::default())
}

pub fn parity_sectors_with(
    spec: &ModelSpec,
    basis: BosonBasis,
    spectrum: &Spectrum,
    opts: SectorOptions,
) -> Result<ParityLabels> {
    if !spec.is_parity_symmetric() {
        return Err(Error::ParityBroken(format!("nonzero bias {:?}", spec.bias)));
    }
    let parity = build_parity(spec.n_spins, basis)?;
    if parity.dim() != spectrum.eigenvectors().nrows() {
        return Err(Error::DimensionMismatch(parity.dim(), spectrum.eigenvectors().nrows()));
    }
    let values = spectrum.eigenvalues();
    let vectors = spectrum.eigenvectors();
    let gap_tol = opts.degeneracy_rel * spectrum.norm();
    let mut labels = Vec::with_capacity(values.len());
    let mut expectations = Vec::with_capacity(values.len());
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[end - 1] < gap_tol {
            end += 1;
        }
        let cluster = vectors.columns(start, end - start).into_owned();
        let pv = DMatrix::from_columns(
            &cluster.column_iter().map(|c| parity.mul_vec(&c.into_owned())).collect::<Vec<_>>(),
        );
        let block = cluster.transpose() * pv;
        let mut eig: Vec<f64> = if end - start == 1 {
            vec![block[(0, 0)]]
        } else {
            let sym = (&block + block.transpose()) * 0.5;
            SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
        };
        eig.sort_by(|a, b| b.total_cmp(a));
        for (offset, p) in eig.into_iter().enumerate() {
            if p.abs() < 1.0 - opts.tol {
                return Err(Error::ParityBroken(format!(
                    "level {} has <P> = {p:.3e}",
                    start + offset
                )));
            }
            labels.push(if p > 0.0 { 1 } else { -1 });
            expectations.push(p);
        }
        start = end;
    }
    Ok(ParityLabels { labels, expectations })
}

/// Trapped-ion parameters of the two-ion realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonParams {
    /// Ω̃
    pub rabi: f64,
    /// Δ̃
    pub detuning: f64,
    /// ν̃
    pub trap_freq: f64,
    /// η̃
    pub lamb_dicke: f64,
    /// ω_s
    pub splitting: f64,
    /// ε̃
    pub ion_coupling: f64,
}

impl IonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.trap_freq > 0.0) {
            return Err(Error::InvalidParameter("trap_freq must be positive".into()));
        }
        if !(self.lamb_dicke >= 0.0) {
            return Err(Error::InvalidParameter("lamb_dicke must be non-negative".into()));
        }
        Ok(())
    }
}

/// Reads the two-spin model off the transformed ion Hamiltonian
/// −(Ω̃/2)σˣ + ω_s Sˣ + ν̃a†a + (ν̃η̃/2)(a†+a)σᶻ − (Δ̃/2)σᶻ + ε̃σᶻSᶻ.
pub fn ion_param_map(p: &IonParams) -> Result<ModelSpec> {
    p.validate()?;
    let spec = ModelSpec {
        n_spins: 2,
        tunneling: vec![p.rabi / 2.0, -p.splitting],
        boson_freq: p.trap_freq,
        coupling: p.trap_freq * p.lamb_dicke / 2.0,
        ising_edges: vec![IsingEdge::new(1, 2, p.ion_coupling)],
        bias: vec![-p.detuning / 2.0, 0.0],
        ising_axis: IsingAxis::ZZ,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::eigendecompose;

    fn spin_block(spec: &ModelSpec) -> Vec<f64> {
        let h = build_hamiltonian(spec, BosonBasis::new(0)).unwrap();
        eigendecompose(&h, None).unwrap().eigenvalues().to_vec()
    }

    #[test]
    fn brm_decoupled_limit() {
        let eps = 0.3;
        let spec = ModelSpec::biased_rabi(0.0, 1.0, 0.0, eps);
        let h = build_hamiltonian(&spec, BosonBasis::new(3)).unwrap();
        let mut expected: Vec<f64> =
            (0..4).flat_map(|n| [n as f64 + eps, n as f64 - eps]).collect();
        expected.sort_by(f64::total_cmp);
        let got = eigendecompose(&h, None).unwrap().eigenvalues().to_vec();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn two_spin_zz_block() {
        let (d, e) = (0.01, 0.005);
        let got = spin_block(&ModelSpec::two_spin(d, 1.0, 0.0, e, 0.0, IsingAxis::ZZ));
        let r = (4.0 * d * d + e * e).sqrt();
        let mut expected = [-r, -e, e, r];
        expected.sort_by(f64::total_cmp);
        for (g, x) in got.iter().zip(expected) {
            assert!((g - x).abs() < 1e-14, "{got:?}");
        }
        assert!((r - 0.0206155).abs() < 1e-7);
    }

    #[test]
    fn two_spin_xx_block() {
        let got = spin_block(&ModelSpec::two_spin(0.01, 1.0, 0.0, 0.005, 0.0, IsingAxis::XX));
        for (g, x) in got.iter().zip([-0.015, -0.005, -0.005, 0.025]) {
            assert!((g - x).abs() < 1e-14, "{got:?}");
        }
    }

    #[test]
    fn dimension_guard() {
        let spec = ModelSpec::star(0.1, 1.0, 0.1, &[0.1; 5], 0.0, IsingAxis::ZZ);
        let err = build_hamiltonian(&spec, BosonBasis::new(200)).unwrap_err();
        assert!(matches!(err, Error::DimensionLimit { dim: 12864, limit: 4096 }));
    }

    #[test]
    fn invalid_specs() {
        let mut spec = ModelSpec::two_spin(0.1, 1.0, 0.1, 0.1, 0.0, IsingAxis::ZZ);
        spec.ising_edges.push(IsingEdge::new(2, 2, 0.1));
        assert!(spec.validate().is_err());
        let mut spec = ModelSpec::two_spin(0.1, 0.0, 0.1, 0.1, 0.0, IsingAxis::ZZ);
        assert!(spec.validate().is_err());
        spec.boson_freq = 1.0;
        spec.bias.pop();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn parity_one_spin() {
        let p = build_parity(1, BosonBasis::new(1)).unwrap().to_dense();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, -1.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, -1.0, 0.0, 0.0,
        ]);
        assert_eq!(p, expected);
    }

    #[test]
    fn parity_involution_and_trace() {
        for n in 1..=3 {
            for cutoff in [0, 1, 4, 7] {
                let p = build_parity(n, BosonBasis::new(cutoff)).unwrap();
                let d = p.to_dense();
                assert_eq!(&d * &d, DMatrix::identity(d.nrows(), d.nrows()));
                assert_eq!(p.trace(), 0.0);
            }
        }
    }

    #[test]
    fn parity_commutes_and_breaks() {
        let basis = BosonBasis::new(12);
        let p = build_parity(2, basis).unwrap();
        for axis in [IsingAxis::ZZ, IsingAxis::XX] {
            let h = build_hamiltonian(&ModelSpec::two_spin(0.1, 1.0, 0.4, 0.05, 0.0, axis), basis).unwrap();
            assert!(commutator_norm(&h, &p).unwrap() <= 1e-12 * h.frobenius_norm());
            let hb = build_hamiltonian(&ModelSpec::two_spin(0.1, 1.0, 0.4, 0.05, 0.1, axis), basis).unwrap();
            let n = commutator_norms(&hb, &p).unwrap();
            assert!(n.frobenius > 0.0);
            assert!((n.spectral - 0.2).abs() < 1e-12, "{n:?}");
            assert_eq!(commutator_norm(&hb, &hb).unwrap(), 0.0);
        }
    }

    #[test]
    fn sectors_balanced_and_rejected_when_biased() {
        let basis = BosonBasis::new(10);
        let spec = ModelSpec::two_spin(0.1, 1.0, 0.3, 0.05, 0.0, IsingAxis::XX);
        let s = eigendecompose(&build_hamiltonian(&spec, basis).unwrap(), None).unwrap();
        let labels = parity_sectors(&spec, basis, &s).unwrap();
        assert_eq!(labels.count(1), 22);
        assert_eq!(labels.count(-1), 22);
        assert!(labels.expectations.iter().all(|p| p.abs() > 1.0 - 1e-8));

        let biased = ModelSpec::two_spin(0.1, 1.0, 0.3, 0.05, 0.1, IsingAxis::XX);
        let s = eigendecompose(&build_hamiltonian(&biased, basis).unwrap(), None).unwrap();
        assert!(matches!(parity_sectors(&biased, basis, &s), Err(Error::ParityBroken(_))));
    }

    #[test]
    fn sectors_detect_broken_vectors() {
        // Label with a zero-bias spec but a spectrum from a biased Hamiltonian.
        let basis = BosonBasis::new(6);
        let spec = ModelSpec::two_spin(0.1, 1.0, 0.3, 0.05, 0.0, IsingAxis::XX);
        let biased = ModelSpec { bias: vec![0.2, 0.0], ..spec.clone() };
        let s = eigendecompose(&build_hamiltonian(&biased, basis).unwrap(), None).unwrap();
        assert!(matches!(parity_sectors(&spec, basis, &s), Err(Error::ParityBroken(_))));
    }

    #[test]
    fn ion_map_inverse_substitution() {
        let (delta, omega, lambda, eps, eta) = (0.01, 1.0, 0.3, 0.005, 0.1);
        let p = IonParams {
            rabi: 2.0 * delta,
            detuning: -2.0 * eta,
            trap_freq: omega,
            lamb_dicke: 2.0 * lambda / omega,
            splitting: -delta,
            ion_coupling: eps,
        };
        let spec = ion_param_map(&p).unwrap();
        assert_eq!(spec, ModelSpec::two_spin(delta, omega, lambda, eps, eta, IsingAxis::ZZ));
    }

    #[test]
    fn ion_map_zero_detuning_is_symmetric() {
        let p = IonParams {
            rabi: 0.2,
            detuning: 0.0,
            trap_freq: 1.0,
            lamb_dicke: 0.3,
            splitting: 0.05,
            ion_coupling: 0.02,
        };
        let spec = ion_param_map(&p).unwrap();
        assert_eq!(spec.bias, vec![0.0, 0.0]);
        let basis = BosonBasis::new(15);
        let h = build_hamiltonian(&spec, basis).unwrap();
        let parity = build_parity(2, basis).unwrap();
        assert!(commutator_norm(&h, &parity).unwrap() <= 1e-12 * h.frobenius_norm());
        assert!(ion_param_map(&IonParams { trap_freq: 0.0, ..p }).is_err());
        assert!(ion_param_map(&IonParams { lamb_dicke: -1.0, ..p }).is_err());
    }

    #[test]
    fn spec_serializes_with_expected_keys() {
        let spec = ModelSpec::two_spin(0.01, 1.0, 0.2, 0.005, 0.1, IsingAxis::XX);
        let text = toml::to_string(&spec).unwrap();
        for key in ["n_spins", "tunneling", "boson_freq", "coupling", "ising_edges", "bias", "ising_axis"] {
            assert!(text.contains(key), "{text}");
        }
        let back: ModelSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn document_cutoff_forms() {
        let spec = ModelSpec::two_spin(0.01, 1.0, 0.2, 0.005, 0.1, IsingAxis::XX);
        let doc = ModelDocument { spec: spec.clone(), cutoff: CutoffChoice::Fixed(40) };
        let text = doc.to_toml();
        assert!(text.contains("cutoff = 40"), "{text}");
        assert_eq!(ModelDocument::from_toml(&text).unwrap(), doc);
        let auto = text.replace("cutoff = 40", "cutoff = \"auto\"");
        assert_eq!(ModelDocument::from_toml(&auto).unwrap().cutoff, CutoffChoice::Auto);
        let missing = text.replace("cutoff = 40", "");
        assert_eq!(ModelDocument::from_toml(&missing).unwrap().cutoff, CutoffChoice::Auto);
        assert!(ModelDocument::from_toml(&text.replace("cutoff = 40", "cutoff = \"many\"")).is_err());
        assert!(ModelDocument::from_toml(&text.replace("n_spins = 2", "n_spins = 3")).is_err());
        assert!(doc.digest().contains("\"cutoff\":40"));
    }
}
