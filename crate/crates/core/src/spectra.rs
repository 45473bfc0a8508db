//! Exact diagonalization, ground states, observables and cutoff convergence.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::CsrMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hilbert::{BosonBasis, SymmetricOperator};
use crate::models::{build_hamiltonian, ModelSpec};

/// Above this dimension the lowest levels come from Lanczos.
pub const DENSE_THRESHOLD: usize = 2000;

/// Residual bound per eigenpair, relative to ‖H‖_F.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Level shift (units of ω) below which a cutoff counts as converged.
pub const CUTOFF_SHIFT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub dense_threshold: usize,
    /// Lanczos stops when the residual estimate drops below `tol * ‖H‖_F`.
    pub lanczos_tol: f64,
    pub max_krylov: usize,
    pub max_restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dense_threshold: DENSE_THRESHOLD,
            lanczos_tol: 1e-12,
            max_krylov: 200,
            max_restarts: 200,
        }
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    norm: f64,
    complete: bool,
    pub model_digest: String,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn vector(&self, level: usize) -> DVector<f64> {
        self.eigenvectors.column(level).into_owned()
    }

    /// ‖H‖_F of the operator this spectrum came from.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Whether every eigenpair was computed.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.model_digest = digest.into();
        self
    }
}

pub fn eigendecompose(h: &SymmetricOperator, k: Option<usize>) -> Result<Spectrum> {
    eigendecompose_with(h, k, &SolverOptions::default())
}

pub fn eigendecompose_with(
    h: &SymmetricOperator,
    k: Option<usize>,
    opts: &SolverOptions,
) -> Result<Spectrum> {
    let dim = h.dim();
    if h.matrix().values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence("operator has non-finite entries".into()));
    }
    let norm = h.frobenius_norm();
    let wanted = k.unwrap_or(dim).min(dim);
    let (values, vectors) = if dim <= opts.dense_threshold {
        dense_lowest(h.to_dense(), wanted)
    } else {
        if k.is_none() {
            return Err(Error::InvalidParameter(format!(
                "full spectrum requested for dimension {dim} above the dense threshold {}",
                opts.dense_threshold
            )));
        }
        let pairs = lanczos_lowest(|x| h.mul_vec(x), dim, wanted, norm, opts)?;
        let values = pairs.iter().map(|p| p.0).collect();
        let vectors = DMatrix::from_columns(&pairs.into_iter().map(|p| p.1).collect::<Vec<_>>());
        (values, vectors)
    };
    let mut vectors = vectors;
    for mut col in vectors.column_iter_mut() {
        fix_sign(&mut col);
    }
    let spectrum = Spectrum {
        eigenvalues: values,
        eigenvectors: vectors,
        norm,
        complete: wanted == dim,
        model_digest: format!("{}", h.basis()),
    };
    check_residuals(h, &spectrum)?;
    Ok(spectrum)
}

fn dense_lowest(dense: DMatrix<f64>, wanted: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(dense);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(wanted);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Largest-magnitude component positive; makes output reproducible.
fn fix_sign<S>(col: &mut nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S>)
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn, nalgebra::U1>,
{
    let mut pivot = 0.0f64;
    for v in col.iter() {
        if v.abs() > pivot.abs() + 1e-12 {
            pivot = *v;
        }
    }
    if pivot < 0.0 {
        col.neg_mut();
    }
}

fn check_residuals(h: &SymmetricOperator, s: &Spectrum) -> Result<()> {
    let bound = RESIDUAL_TOL * s.norm.max(f64::MIN_POSITIVE);
    for (level, &e) in s.eigenvalues.iter().enumerate() {
        let v = s.vector(level);
        let r = (h.mul_vec(&v) - &v * e).norm();
        if r > bound {
            return Err(Error::NoConvergence(format!(
                "level {level}: residual {r:.3e} exceeds {bound:.3e}"
            )));
        }
    }
    Ok(())
}

/// Top eigenvalue of a symmetric sparse matrix.
pub(crate) fn largest_eigenvalue(m: &CsrMatrix<f64>) -> Result<f64> {
    let dim = m.nrows();
    let opts = SolverOptions::default();
    if dim <= opts.dense_threshold {
        let mut dense = DMatrix::<f64>::zeros(dim, dim);
        for (i, j, v) in m.triplet_iter() {
            dense[(i, j)] += *v;
        }
        return Ok(dense.symmetric_eigenvalues().max());
    }
    let norm = m.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let neg = |x: &DVector<f64>| -(m * x);
    let pairs = lanczos_lowest(neg, dim, 1, norm, &opts)?;
    Ok(-pairs[0].0)
}

/// Lowest `k` eigenpairs by Lanczos with full reorthogonalization, one pair
/// at a time. Converged pairs are locked and deflated, so repeated
/// eigenvalues are found with their full multiplicity. The projected matrix
/// is accumulated in full from the reorthogonalization coefficients, which
/// keeps the Ritz values honest near breakdown.
pub(crate) fn lanczos_lowest<F>(
    apply: F,
    dim: usize,
    k: usize,
    norm: f64,
    opts: &SolverOptions,
) -> Result<Vec<(f64, DVector<f64>)>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let tol = opts.lanczos_tol * norm.max(f64::MIN_POSITIVE);
    let mut locked: Vec<(f64, DVector<f64>)> = Vec::with_capacity(k);
    let project_out = |v: &mut DVector<f64>, basis: &[DVector<f64>]| {
        for _ in 0..2 {
            for b in basis {
                let c = b.dot(v);
                v.axpy(-c, b, 1.0);
            }
        }
    };

    while locked.len() < k {
        let locked_vecs: Vec<DVector<f64>> = locked.iter().map(|p| p.1.clone()).collect();
        let mut start = DVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5);
        let mut found = None;
        for _ in 0..opts.max_restarts {
            project_out(&mut start, &locked_vecs);
            let n0 = start.norm();
            if n0 == 0.0 {
                return Err(Error::NoConvergence("Krylov start vector vanished".into()));
            }
            start /= n0;
            let m_max = opts.max_krylov.min(dim - locked.len());
            let mut basis: Vec<DVector<f64>> = vec![start.clone()];
            let mut projected = DMatrix::<f64>::zeros(m_max, m_max);
            let mut ritz = None;
            for j in 0..m_max {
                let mut w = apply(&basis[j]);
                project_out(&mut w, &locked_vecs);
                for _ in 0..2 {
                    for (i, q) in basis.iter().enumerate() {
                        let c = q.dot(&w);
                        projected[(i, j)] += c;
                        w.axpy(-c, q, 1.0);
                    }
                }
                let b = w.norm();
                let block = projected.view((0, 0), (j + 1, j + 1));
                let sym = (&block + block.transpose()) * 0.5;
                let (theta, s) = lowest_pair(sym);
                let estimate = b * s[j].abs();
                let last = j + 1 == m_max;
                if estimate <= tol || b <= 1e-8 * norm || last {
                    ritz = Some((theta, s, estimate));
                    break;
                }
                projected[(j + 1, j)] = b;
                basis.push(w / b);
            }
            let (theta, s, estimate) = ritz.expect("loop sets ritz");
            let mut v = DVector::zeros(dim);
            for (coef, q) in s.iter().zip(&basis) {
                v.axpy(*coef, q, 1.0);
            }
            project_out(&mut v, &locked_vecs);
            v /= v.norm();
            if estimate <= tol * 10.0 {
                let mut hv = apply(&v);
                project_out(&mut hv, &locked_vecs);
                let resid = (hv - &v * theta).norm();
                if resid <= tol * 10.0 {
                    found = Some((theta, v));
                    break;
                }
            }
            start = v;
        }
        match found {
            Some(pair) => locked.push(pair),
            None => {
                return Err(Error::NoConvergence(format!(
                    "Lanczos failed on level {} after {} restarts",
                    locked.len(),
                    opts.max_restarts
                )))
            }
        }
    }
    // Rayleigh-Ritz over the locked span removes the small errors that
    // deflation against earlier approximate vectors leaves behind.
    let basis = DMatrix::from_columns(&locked.iter().map(|p| p.1.clone()).collect::<Vec<_>>());
    let (q, _) = basis.qr().unpack();
    let hq = DMatrix::from_columns(
        &q.column_iter().map(|c| apply(&c.into_owned())).collect::<Vec<_>>(),
    );
    let small = q.transpose() * hq;
    let small = (&small + small.transpose()) * 0.5;
    let (values, vectors) = dense_lowest(small, k);
    let rotated = q * vectors;
    Ok(values
        .into_iter()
        .zip(rotated.column_iter().map(|c| c.into_owned()))
        .collect())
}

fn lowest_pair(m: DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(m);
    let idx = eig.eigenvalues.imin();
    (eig.eigenvalues[idx], eig.eigenvectors.column(idx).into_owned())
}

/// Lowest eigenpair plus gap information.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: DVector<f64>,
    /// E₁ − E₀ when at least two levels are known.
    pub gap: Option<f64>,
    /// Gap below `1e-9 · ‖H‖_F`; expectation values are then basis dependent.
    pub degenerate: bool,
}

pub fn ground_state(s: &Spectrum) -> GroundState {
    assert!(!s.is_empty(), "spectrum has at least one level");
    let gap = (s.len() > 1).then(|| s.eigenvalues[1] - s.eigenvalues[0]);
    GroundState {
        energy: s.eigenvalues[0],
        vector: s.vector(0),
        gap,
        degenerate: gap.is_some_and(|g| g < 1e-9 * s.norm),
    }
}

/// vᵀ O v.
pub fn expectation(state: &DVector<f64>, op: &SymmetricOperator) -> Result<f64> {
    if state.len() != op.dim() {
        return Err(Error::DimensionMismatch(state.len(), op.dim()));
    }
    Ok(state.dot(&op.mul_vec(state)))
}

/// Default first cutoff for displacement q: ⌈q² + 6|q| + 20⌉.
pub fn seed_cutoff(q: f64) -> usize {
    (q * q + 6.0 * q.abs() + 20.0).ceil() as usize
}

#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub cutoff: usize,
    pub levels: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub recommended: usize,
}

fn solve_at(spec: &ModelSpec, cutoff: usize, k: usize) -> Result<Spectrum> {
    let basis = BosonBasis::new(cutoff);
    let h = build_hamiltonian(spec, basis)?;
    Ok(eigendecompose(&h, Some(k))?.with_digest(format!("{} cutoff={cutoff}", spec.digest())))
}

/// Shift beyond which an increase with cutoff is treated as a real
/// violation of the variational bound rather than rounding.
fn monotone_slack(spec: &ModelSpec, levels: &[f64]) -> f64 {
    let scale = levels.iter().fold(spec.boson_freq, |m, v| m.max(v.abs()));
    1e-12 * scale.max(1.0)
}

fn max_shift(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_monotone(spec: &ModelSpec, prev: &[f64], next: &[f64]) -> Result<()> {
    let slack = monotone_slack(spec, next);
    for (level, (&from, &to)) in prev.iter().zip(next).enumerate() {
        if to > from + slack {
            return Err(Error::NonMonotone { level, from, to });
        }
    }
    Ok(())
}

/// Tabulates the lowest `k` levels per cutoff and recommends the smallest
/// cutoff whose levels move by less than `1e-10 ω` at the next cutoff.
pub fn converge_cutoff(spec: &ModelSpec, cutoffs: &[usize], k: usize) -> Result<ConvergenceTable> {
    if cutoffs.len() < 2 {
        return Err(Error::InvalidParameter("need at least two cutoffs".into()));
    }
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("cutoffs must be strictly ascending".into()));
    }
    let mut rows = Vec::with_capacity(cutoffs.len());
    for &cutoff in cutoffs {
        let s = solve_at(spec, cutoff, k)?;
        rows.push(ConvergenceRow { cutoff, levels: s.eigenvalues().to_vec() });
    }
    let tol = CUTOFF_SHIFT_TOL * spec.boson_freq;
    let mut recommended = None;
    for pair in rows.windows(2) {
        check_monotone(spec, &pair[0].levels, &pair[1].levels)?;
        if recommended.is_none()
            && pair[0].levels.len() == pair[1].levels.len()
            && max_shift(&pair[0].levels, &pair[1].levels) < tol
        {
            recommended = Some(pair[0].cutoff);
        }
    }
    match recommended {
        Some(recommended) => Ok(ConvergenceTable { rows, recommended }),
        None => {
            let n = rows.len();
            Err(Error::CutoffNotConverged(format!(
                "levels still move by {:.3e} between cutoffs {} and {}",
                max_shift(&rows[n - 2].levels, &rows[n - 1].levels),
                rows[n - 2].cutoff,
                rows[n - 1].cutoff
            )))
        }
    }
}

/// A spectrum at a cutoff shown converged against the next step.
#[derive(Clone, Debug)]
pub struct ConvergedSpectrum {
    pub cutoff: usize,
    pub spectrum: Spectrum,
}

/// Raises the cutoff from [`seed_cutoff`] in steps of `step` until the lowest
/// `k` levels stop moving, staying within the dimension guard.
pub fn solve_converged(spec: &ModelSpec, k: usize, step: usize) -> Result<ConvergedSpectrum> {
    solve_converged_from(spec, k, seed_cutoff(spec.displacement()), step)
}

pub fn solve_converged_from(
    spec: &ModelSpec,
    k: usize,
    seed: usize,
    step: usize,
) -> Result<ConvergedSpectrum> {
    let step = step.max(1);
    let tol = CUTOFF_SHIFT_TOL * spec.boson_freq;
    let mut cutoff = seed;
    let mut current = solve_at(spec, cutoff, k)?;
    loop {
        let next_cutoff = cutoff + step;
        let next = match solve_at(spec, next_cutoff, k) {
            Ok(s) => s,
            Err(Error::DimensionLimit { .. }) => {
                return Err(Error::CutoffNotConverged(format!(
                    "dimension guard reached at cutoff {next_cutoff}"
                )))
            }
            Err(e) => return Err(e),
        };
        check_monotone(spec, current.eigenvalues(), next.eigenvalues())?;
        if max_shift(current.eigenvalues(), next.eigenvalues()) < tol {
            return Ok(ConvergedSpectrum { cutoff, spectrum: current });
        }
        cutoff = next_cutoff;
        current = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::BasisTag;
    use crate::models::IsingAxis;

    fn op(d: DMatrix<f64>) -> SymmetricOperator {
        SymmetricOperator::from_dense(&d, BasisTag::Plain).unwrap()
    }

    #[test]
    fn diagonal_input_sorted() {
        let h = op(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0])));
        let s = eigendecompose(&h, None).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn pauli_x_spectrum() {
        let h = op(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let s = eigendecompose(&h, None).unwrap();
        assert!((s.eigenvalues()[0] + 1.0).abs() < 1e-15);
        assert!((s.eigenvalues()[1] - 1.0).abs() < 1e-15);
        let r = 0.5f64.sqrt();
        let v0 = s.vector(0);
        let v1 = s.vector(1);
        assert!((v0[0].abs() - r).abs() < 1e-15 && (v0[0] + v0[1]).abs() < 1e-15);
        assert!((v1[0] - r).abs() < 1e-15 && (v1[1] - r).abs() < 1e-15);
    }

    #[test]
    fn degenerate_ground_flagged() {
        let h = op(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0])));
        let g = ground_state(&eigendecompose(&h, None).unwrap());
        assert!(g.degenerate);
        assert_eq!(g.gap, Some(0.0));
    }

    #[test]
    fn expectation_checks() {
        let h = op(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])));
        let v = DVector::from_vec(vec![0.6, 0.8]);
        let id = SymmetricOperator::identity(2, BasisTag::Plain);
        assert!((expectation(&v, &id).unwrap() - 1.0).abs() < 1e-15);
        assert!((expectation(&v, &h).unwrap() - 0.64).abs() < 1e-15);
        assert!(expectation(&DVector::zeros(3), &h).is_err());
    }

    #[test]
    fn lanczos_matches_dense_with_degeneracy() {
        // XX spectrum at λ = 0 has an exactly doubled level.
        let spec = ModelSpec::two_spin(0.01, 1.0, 0.0, 0.005, 0.0, IsingAxis::XX);
        let h = build_hamiltonian(&spec, BosonBasis::new(60)).unwrap();
        let dense = eigendecompose(&h, Some(10)).unwrap();
        let opts = SolverOptions { dense_threshold: 10, ..Default::default() };
        let sparse = eigendecompose_with(&h, Some(10), &opts).unwrap();
        for (a, b) in dense.eigenvalues().iter().zip(sparse.eigenvalues()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let v = sparse.eigenvectors();
        let gram = v.transpose() * v;
        assert!((gram - DMatrix::identity(10, 10)).abs().max() < 1e-10);
    }

    #[test]
    fn lanczos_coupled_model() {
        let spec = ModelSpec::two_spin(0.1, 1.0, 0.7, 0.05, 0.02, IsingAxis::ZZ);
        let h = build_hamiltonian(&spec, BosonBasis::new(50)).unwrap();
        let dense = eigendecompose(&h, Some(6)).unwrap();
        let opts = SolverOptions { dense_threshold: 10, ..Default::default() };
        let sparse = eigendecompose_with(&h, Some(6), &opts).unwrap();
        for (a, b) in dense.eigenvalues().iter().zip(sparse.eigenvalues()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(eigendecompose_with(&h, None, &opts).is_err());
    }

    #[test]
    fn decoupled_cutoffs_all_agree() {
        let spec = ModelSpec::two_spin(0.01, 1.0, 0.0, 0.005, 0.1, IsingAxis::XX);
        let table = converge_cutoff(&spec, &[4, 8, 12], 4).unwrap();
        assert_eq!(table.recommended, 4);
        for row in &table.rows[1..] {
            for (a, b) in row.levels.iter().zip(&table.rows[0].levels) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn large_displacement_seed() {
        assert!(seed_cutoff(2.6) >= 42);
        let spec = ModelSpec::two_spin(0.01, 1.0, 2.6, 0.0, 1e-8, IsingAxis::XX);
        let seed = seed_cutoff(2.6);
        let table = converge_cutoff(&spec, &[20, 30, seed, seed + 10], 4).unwrap();
        assert!(table.recommended >= 30, "{}", table.recommended);
        for pair in table.rows.windows(2) {
            for (a, b) in pair[0].levels.iter().zip(&pair[1].levels) {
                assert!(b <= &(a + 1e-12));
            }
        }
    }

    #[test]
    fn under_truncation_reported() {
        let spec = ModelSpec::two_spin(0.1, 1.0, 2.0, 0.05, 0.0, IsingAxis::XX);
        let err = converge_cutoff(&spec, &[3, 5], 4).unwrap_err();
        assert!(matches!(err, Error::CutoffNotConverged(_)));
        assert!(converge_cutoff(&spec, &[5], 4).is_err());
        assert!(converge_cutoff(&spec, &[5, 5], 4).is_err());
    }

    #[test]
    fn non_finite_operator_rejected() {
        let mut d = DMatrix::identity(3, 3);
        d[(1, 1)] = f64::INFINITY;
        let err = eigendecompose(&op(d), None).unwrap_err();
        assert!(err.is_numerical());
    }
}
