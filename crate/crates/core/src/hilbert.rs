//! Truncated spin ⊗ boson Hilbert space and the elementary operators.
//!
//! Basis ordering: spin 1 is the most significant tensor factor and the boson
//! the least significant. Within a spin, index 0 is |↑⟩ (σᶻ = +1) and index 1
//! is |↓⟩. A composite index is therefore
//! `((s_1 * 2 + s_2) * 2 + ... + s_N) * (cutoff + 1) + n`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// Fock space truncated to |0⟩…|cutoff⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BosonBasis {
    cutoff: usize,
}

impl BosonBasis {
    pub fn new(cutoff: usize) -> Self {
        BosonBasis { cutoff }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn symbol(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// Which coordinates an operator is written in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BasisTag {
    /// `n_spins` spins ⊗ Fock states up to `cutoff`, canonical ordering.
    Fock { n_spins: usize, cutoff: usize },
    /// Two spins in displaced Fock states: sectors ↓↓, ↓↑, ↑↓, ↑↑ with
    /// boson bases B, B, A, A, each truncated at `cutoff`.
    Displaced { cutoff: usize },
    /// No particular structure.
    Plain,
}

impl fmt::Display for BasisTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisTag::Fock { n_spins, cutoff } => write!(
                f,
                "spins 1..{n_spins} (up, down; spin 1 most significant) x fock 0..{cutoff}"
            ),
            BasisTag::Displaced { cutoff } => {
                write!(f, "displaced sectors dd,du,ud,uu x displaced fock 0..{cutoff}")
            }
            BasisTag::Plain => write!(f, "plain"),
        }
    }
}

/// Real operator whose matrix is exactly symmetric.
///
/// Symmetry is checked entry by entry at construction and never repaired.
#[derive(Clone, Debug)]
pub struct SymmetricOperator {
    matrix: CsrMatrix<f64>,
    basis: BasisTag,
}

impl SymmetricOperator {
    pub fn new(matrix: CsrMatrix<f64>, basis: BasisTag) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(matrix.nrows(), matrix.ncols()));
        }
        for (row, col, value) in matrix.triplet_iter() {
            let mirror = matrix
                .get_entry(col, row)
                .map(|entry| entry.into_value())
                .unwrap_or(0.0);
            if mirror != *value {
                return Err(Error::NotSymmetric { row, col });
            }
        }
        Ok(SymmetricOperator { matrix, basis })
    }

    pub fn from_dense(dense: &DMatrix<f64>, basis: BasisTag) -> Result<Self> {
        let mut coo = CooMatrix::new(dense.nrows(), dense.ncols());
        for j in 0..dense.ncols() {
            for i in 0..dense.nrows() {
                let v = dense[(i, j)];
                if v != 0.0 {
                    coo.push(i, j, v);
                }
            }
        }
        Self::new(CsrMatrix::from(&coo), basis)
    }

    pub fn identity(dim: usize, basis: BasisTag) -> Self {
        SymmetricOperator { matrix: CsrMatrix::identity(dim), basis }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn basis(&self) -> &BasisTag {
        &self.basis
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.matrix.triplet_iter() {
            dense[(i, j)] += *v;
        }
        dense
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get_entry(row, col).map(|e| e.into_value()).unwrap_or(0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.values().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        for (i, row) in self.matrix.row_iter().enumerate() {
            y[i] = row
                .col_indices()
                .iter()
                .zip(row.values())
                .map(|(&j, v)| v * x[j])
                .sum();
        }
        y
    }

    /// Sum of two operators in the same basis. Exact symmetry is preserved
    /// because mirrored entries see identical floating-point additions.
    pub fn add(&self, other: &SymmetricOperator) -> Result<SymmetricOperator> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(SymmetricOperator {
            matrix: &self.matrix + &other.matrix,
            basis: self.basis.clone(),
        })
    }

    pub fn scaled(&self, factor: f64) -> SymmetricOperator {
        SymmetricOperator { matrix: &self.matrix * factor, basis: self.basis.clone() }
    }

    /// Product `self · other`, generally not symmetric.
    pub fn product(&self, other: &SymmetricOperator) -> Result<CsrMatrix<f64>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(&self.matrix * &other.matrix)
    }
}

/// Ladder and number operators of a truncated oscillator.
#[derive(Clone, Debug)]
pub struct BosonOps {
    pub annihilate: CsrMatrix<f64>,
    pub create: CsrMatrix<f64>,
    pub number: CsrMatrix<f64>,
}

impl BosonOps {
    /// The quadrature a + a†, which is symmetric.
    pub fn quadrature(&self) -> CsrMatrix<f64> {
        &self.annihilate + &self.create
    }
}

pub fn boson_ops(basis: BosonBasis) -> BosonOps {
    let dim = basis.dim();
    let mut annihilate = CooMatrix::new(dim, dim);
    for n in 1..dim {
        annihilate.push(n - 1, n, (n as f64).sqrt());
    }
    let annihilate = CsrMatrix::from(&annihilate);
    let create = annihilate.transpose();
    let mut number = CooMatrix::new(dim, dim);
    for n in 1..dim {
        number.push(n, n, n as f64);
    }
    BosonOps { annihilate, create, number: CsrMatrix::from(&number) }
}

/// P₀ = e^{iπa†a} as the real diagonal (−1)ⁿ.
pub fn boson_parity(basis: BosonBasis) -> SymmetricOperator {
    SymmetricOperator {
        matrix: parity_diagonal(basis.dim()),
        basis: BasisTag::Fock { n_spins: 0, cutoff: basis.cutoff() },
    }
}

fn parity_diagonal(dim: usize) -> CsrMatrix<f64> {
    let values = (0..dim).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect();
    CsrMatrix::try_from_csr_data(dim, dim, (0..=dim).collect(), (0..dim).collect(), values)
        .expect("diagonal pattern is valid")
}

pub(crate) fn pauli(axis: Axis) -> Result<CsrMatrix<f64>> {
    match axis {
        Axis::X => Ok(CsrMatrix::try_from_csr_data(2, 2, vec![0, 1, 2], vec![1, 0], vec![1.0, 1.0])
            .expect("valid pattern")),
        Axis::Z => Ok(CsrMatrix::try_from_csr_data(2, 2, vec![0, 1, 2], vec![0, 1], vec![1.0, -1.0])
            .expect("valid pattern")),
        Axis::Y => Err(Error::UnsupportedAxis(axis.symbol())),
    }
}

/// Kronecker product of two CSR matrices.
pub fn kron(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let rows = a.nrows() * b.nrows();
    let cols = a.ncols() * b.ncols();
    let mut offsets = Vec::with_capacity(rows + 1);
    let mut indices = Vec::with_capacity(a.nnz() * b.nnz());
    let mut values = Vec::with_capacity(a.nnz() * b.nnz());
    offsets.push(0);
    for row_a in a.row_iter() {
        for row_b in b.row_iter() {
            for (&ja, va) in row_a.col_indices().iter().zip(row_a.values()) {
                for (&jb, vb) in row_b.col_indices().iter().zip(row_b.values()) {
                    indices.push(ja * b.ncols() + jb);
                    values.push(va * vb);
                }
            }
            offsets.push(indices.len());
        }
    }
    CsrMatrix::try_from_csr_data(rows, cols, offsets, indices, values)
        .expect("kron of sorted CSR patterns is sorted")
}

/// Kronecker product over all spin sites followed by a boson factor.
/// `factors` maps sites (1-based) to Pauli axes; unlisted sites get the identity.
pub fn spin_string(
    n_spins: usize,
    factors: &[(usize, Axis)],
    boson: &CsrMatrix<f64>,
) -> Result<CsrMatrix<f64>> {
    for &(site, _) in factors {
        if site == 0 || site > n_spins {
            return Err(Error::SiteOutOfRange { site, n_spins });
        }
    }
    let mut out = CsrMatrix::identity(1);
    for site in 1..=n_spins {
        let local = match factors.iter().find(|(s, _)| *s == site) {
            Some(&(_, axis)) => pauli(axis)?,
            None => CsrMatrix::identity(2),
        };
        out = kron(&out, &local);
    }
    Ok(kron(&out, boson))
}

/// σ^axis on `site`, identity elsewhere, tensored with the boson identity.
pub fn embed_spin(
    n_spins: usize,
    site: usize,
    axis: Axis,
    basis: BosonBasis,
) -> Result<SymmetricOperator> {
    let matrix = spin_string(n_spins, &[(site, axis)], &CsrMatrix::identity(basis.dim()))?;
    Ok(SymmetricOperator {
        matrix,
        basis: BasisTag::Fock { n_spins, cutoff: basis.cutoff() },
    })
}

/// (Πᵢ σᵢˣ) ⊗ P₀, the parity of an N-spin model.
pub(crate) fn spin_flip_parity(n_spins: usize, basis: BosonBasis) -> SymmetricOperator {
    let flips: Vec<(usize, Axis)> = (1..=n_spins).map(|s| (s, Axis::X)).collect();
    let matrix = spin_string(n_spins, &flips, &parity_diagonal(basis.dim()))
        .expect("sites are in range");
    SymmetricOperator {
        matrix,
        basis: BasisTag::Fock { n_spins, cutoff: basis.cutoff() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(m: &CsrMatrix<f64>) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(m.nrows(), m.ncols());
        for (i, j, v) in m.triplet_iter() {
            d[(i, j)] += *v;
        }
        d
    }

    #[test]
    fn ladder_at_zero_cutoff_is_empty() {
        let ops = boson_ops(BosonBasis::new(0));
        assert_eq!(dense(&ops.annihilate), DMatrix::zeros(1, 1));
        assert_eq!(dense(&ops.number), DMatrix::zeros(1, 1));
    }

    #[test]
    fn ladder_entries() {
        let ops = boson_ops(BosonBasis::new(2));
        let a = dense(&ops.annihilate);
        let mut expected = DMatrix::zeros(3, 3);
        expected[(0, 1)] = 1.0;
        expected[(1, 2)] = 2f64.sqrt();
        assert_eq!(a, expected);
        assert_eq!(dense(&ops.create), expected.transpose());
        let n = dense(&ops.create) * &a;
        assert!((n - DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0]))).abs().max() < 1e-15);
        assert_eq!(dense(&ops.number), DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0])));
    }

    #[test]
    fn boson_parity_flips_quadrature() {
        let basis = BosonBasis::new(3);
        let p = boson_parity(basis).to_dense();
        assert_eq!(p, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0])));
        assert_eq!(&p * &p, DMatrix::identity(4, 4));
        let x = dense(&boson_ops(basis).quadrature());
        assert_eq!(&p * &x * &p, -x);
    }

    #[test]
    fn single_spin_z() {
        let z = embed_spin(1, 1, Axis::Z, BosonBasis::new(0)).unwrap().to_dense();
        assert_eq!(z, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])));
    }

    #[test]
    fn second_spin_x_swaps_within_blocks() {
        let x2 = embed_spin(2, 2, Axis::X, BosonBasis::new(0)).unwrap().to_dense();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
        ]);
        assert_eq!(x2, expected);
        assert_eq!(&x2 * &x2, DMatrix::identity(4, 4));
    }

    #[test]
    fn rejects_bad_site_and_axis() {
        let b = BosonBasis::new(1);
        assert!(matches!(embed_spin(2, 3, Axis::X, b), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(embed_spin(2, 0, Axis::X, b), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(embed_spin(2, 1, Axis::Y, b), Err(Error::UnsupportedAxis('y'))));
    }

    #[test]
    fn pauli_algebra_across_sites() {
        let b = BosonBasis::new(2);
        let n = 3;
        let id = DMatrix::<f64>::identity(8 * 3, 8 * 3);
        for i in 1..=n {
            let xi = embed_spin(n, i, Axis::X, b).unwrap().to_dense();
            let zi = embed_spin(n, i, Axis::Z, b).unwrap().to_dense();
            assert_eq!(&xi * &xi, id);
            assert_eq!(&zi * &zi, id);
            assert_eq!(&xi * &zi + &zi * &xi, DMatrix::zeros(24, 24));
            assert_eq!(xi.trace(), 0.0);
            for j in 1..=n {
                if i == j {
                    continue;
                }
                let xj = embed_spin(n, j, Axis::X, b).unwrap().to_dense();
                let zj = embed_spin(n, j, Axis::Z, b).unwrap().to_dense();
                assert_eq!(&xi * &zj, &zj * &xi);
                assert_eq!(&zi * &xj, &xj * &zi);
                assert_eq!((&xi * &zj).trace(), 0.0);
            }
        }
    }

    #[test]
    fn symmetric_operator_rejects_asymmetry() {
        let mut d = DMatrix::zeros(2, 2);
        d[(0, 1)] = 1.0;
        assert!(matches!(
            SymmetricOperator::from_dense(&d, BasisTag::Plain),
            Err(Error::NotSymmetric { .. })
        ));
        d[(1, 0)] = 1.0 + f64::EPSILON;
        assert!(SymmetricOperator::from_dense(&d, BasisTag::Plain).is_err());
    }

    #[test]
    fn kron_matches_dense() {
        let x = pauli(Axis::X).unwrap();
        let q = boson_ops(BosonBasis::new(2)).quadrature();
        assert_eq!(dense(&kron(&x, &q)), dense(&x).kronecker(&dense(&q)));
    }
}
