//! Ground-state magnetization scaling: κ, β = q², β_c, α and the closed-form
//! ⟨σ₁ᶻ⟩ laws, plus numerically measured curves and their collapse.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{embed_spin, Axis, BosonBasis};
use crate::models::ModelSpec;
use crate::report::Table;
use crate::spectra::{expectation, ground_state, solve_converged};

/// √27 = 3√3, the α rescaling.
const SQRT_27: f64 = 5.196152422706632;

/// Levels checked when converging the cutoff for a measurement.
const CONVERGE_LEVELS: usize = 4;
const CUTOFF_STEP: usize = 10;

/// κ = η / (Δ − Σₖ εₖ) for a star with uniform Δ and bias on spin 1.
pub fn kappa_of(spec: &ModelSpec) -> Result<f64> {
    spec.validate()?;
    let delta = spec.tunneling[0];
    if spec.tunneling.iter().any(|&d| d != delta) {
        return Err(Error::InvalidModel("kappa needs uniform tunneling".into()));
    }
    if spec.bias[1..].iter().any(|&b| b != 0.0) {
        return Err(Error::InvalidModel("kappa needs the bias on spin 1 only".into()));
    }
    if spec.ising_edges.iter().any(|e| e.i != 1) {
        return Err(Error::InvalidModel("kappa needs a star topology centred on spin 1".into()));
    }
    let eps_sum: f64 = spec.ising_edges.iter().map(|e| e.strength).sum();
    let denom = delta - eps_sum;
    if denom == 0.0 {
        return Err(Error::DegenerateKappa);
    }
    Ok(spec.bias[0] / denom)
}

/// β_c = −ln(2κ²)/4.
pub fn beta_c_of(kappa: f64) -> Result<f64> {
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!("beta_c needs finite nonzero kappa, got {kappa}")));
    }
    Ok(-(2.0 * kappa * kappa).ln() / 4.0)
}

/// α = (β − β_c)/√27.
pub fn alpha_of(beta: f64, beta_c: f64) -> f64 {
    (beta - beta_c) / SQRT_27
}

/// ⟨σ₁ᶻ⟩ = −κ/√(κ² + e^{−4β}).
pub fn sigma_z_beta(kappa: f64, beta: f64) -> f64 {
    -kappa / (kappa * kappa + (-4.0 * beta).exp()).sqrt()
}

/// The same law written through the scale: −κ/√(κ² + (2κ²)^{β/β_c}).
/// Undefined at |κ| = 1/√2 where β_c = 0.
pub fn sigma_z_beta_scaled(kappa: f64, beta: f64) -> Result<f64> {
    let beta_c = beta_c_of(kappa)?;
    if beta_c.abs() < f64::EPSILON {
        return Err(Error::InvalidParameter("beta_c vanishes at |kappa| = 1/sqrt(2)".into()));
    }
    let two_k2 = 2.0 * kappa * kappa;
    Ok(-kappa / (kappa * kappa + two_k2.powf(beta / beta_c)).sqrt())
}

/// κ-free form −s/√(1 + 2e^{−12√3 α}), s = sign κ.
pub fn sigma_z_alpha(alpha: f64, branch_sign: f64) -> f64 {
    -branch_sign.signum() / (1.0 + 2.0 * (-12.0 * 3f64.sqrt() * alpha).exp()).sqrt()
}

/// Scale variables for one (κ, β).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingParams {
    pub kappa: f64,
    pub beta: f64,
    pub beta_c: f64,
    pub alpha: f64,
}

impl ScalingParams {
    pub fn new(kappa: f64, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be non-negative, got {beta}")));
        }
        let beta_c = beta_c_of(kappa)?;
        Ok(ScalingParams { kappa, beta, beta_c, alpha: alpha_of(beta, beta_c) })
    }
}

/// `count` values of β with β/β_c evenly spaced over [lo, hi].
pub fn beta_grid_relative(beta_c: f64, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    linspace(lo, hi, count).into_iter().map(|r| r * beta_c).collect()
}

/// `count` values of β with α evenly spaced over [lo, hi].
pub fn beta_grid_alpha(beta_c: f64, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    linspace(lo, hi, count).into_iter().map(|a| beta_c + SQRT_27 * a).collect()
}

pub(crate) fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Ground-state ⟨σ_siteᶻ⟩ of `spec` with λ replaced by ω√β, at a converged
/// cutoff. Scaling is only expected on spin 1, the spin the boson couples to.
pub fn measure_sigma_z(spec: &ModelSpec, beta: f64, site: usize) -> Result<(f64, usize)> {
    if spec.is_parity_symmetric() {
        return Err(Error::InvalidParameter(
            "zero bias leaves a parity-degenerate ground state".into(),
        ));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be non-negative, got {beta}")));
    }
    let spec = ModelSpec { coupling: spec.boson_freq * beta.sqrt(), ..spec.clone() };
    let solved = solve_converged(&spec, CONVERGE_LEVELS, CUTOFF_STEP)?;
    let ground = ground_state(&solved.spectrum);
    if ground.degenerate {
        return Err(Error::NoConvergence(format!(
            "ground state degenerate at beta = {beta} (gap {:?})",
            ground.gap
        )));
    }
    let sz = embed_spin(spec.n_spins, site, Axis::Z, BosonBasis::new(solved.cutoff))?;
    Ok((expectation(&ground.vector, &sz)?, solved.cutoff))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub beta: f64,
    pub beta_over_beta_c: f64,
    pub alpha: f64,
    pub sigma_z_analytic: f64,
    /// `None` when the solve for this row failed; see `error`.
    pub sigma_z_numeric: Option<f64>,
    pub cutoff: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingCurve {
    pub kappa: f64,
    pub beta_c: f64,
    pub rows: Vec<ScalingRow>,
}

impl ScalingCurve {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.sigma_z_numeric.is_none()).count()
    }

    /// Row nearest to β = β_c.
    pub fn row_nearest_beta_c(&self) -> Option<&ScalingRow> {
        self.rows.iter().min_by(|a, b| {
            (a.beta - self.beta_c).abs().total_cmp(&(b.beta - self.beta_c).abs())
        })
    }
}

pub const SCALING_COLUMNS: [&str; 7] =
    ["kappa", "beta", "beta_over_beta_c", "alpha", "sigma_z_analytic", "sigma_z_numeric", "cutoff"];

impl ScalingCurve {
    /// Failed rows keep their analytic value and leave the numeric and
    /// cutoff fields empty.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(SCALING_COLUMNS);
        for r in &self.rows {
            t.push(vec![
                self.kappa.into(),
                r.beta.into(),
                r.beta_over_beta_c.into(),
                r.alpha.into(),
                r.sigma_z_analytic.into(),
                r.sigma_z_numeric.into(),
                r.cutoff.into(),
            ])
            .expect("row matches header");
        }
        t
    }
}

/// One measured point of [`magnetization_curve`].
#[derive(Clone, Debug, PartialEq)]
pub struct MagnetizationPoint {
    pub beta: f64,
    pub sigma_z: Option<f64>,
    pub cutoff: Option<usize>,
    pub error: Option<String>,
}

/// Ground-state ⟨σ_siteᶻ⟩ against β for any topology, no closed form
/// attached. Points come back sorted by β.
pub fn magnetization_curve(spec: &ModelSpec, betas: &[f64], site: usize) -> Vec<MagnetizationPoint> {
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .par_iter()
        .map(|&beta| match measure_sigma_z(spec, beta, site) {
            Ok((v, c)) => MagnetizationPoint { beta, sigma_z: Some(v), cutoff: Some(c), error: None },
            Err(e) => MagnetizationPoint { beta, sigma_z: None, cutoff: None, error: Some(e.to_string()) },
        })
        .collect()
}

/// Ground-state ⟨σ₁ᶻ⟩ against β for a star family, next to the closed form.
/// Rows are solved in parallel and returned sorted by β; a failed row is
/// recorded and the rest of the curve still runs.
pub fn scaling_curve(spec: &ModelSpec, betas: &[f64]) -> Result<ScalingCurve> {
    let kappa = kappa_of(spec)?;
    if kappa == 0.0 {
        return Err(Error::InvalidParameter(
            "zero bias leaves a parity-degenerate ground state".into(),
        ));
    }
    let beta_c = beta_c_of(kappa)?;
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = sorted
        .par_iter()
        .map(|&beta| {
            let (numeric, cutoff, error) = match measure_sigma_z(spec, beta, 1) {
                Ok((v, c)) => (Some(v), Some(c), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            ScalingRow {
                beta,
                beta_over_beta_c: beta / beta_c,
                alpha: alpha_of(beta, beta_c),
                sigma_z_analytic: sigma_z_beta(kappa, beta),
                sigma_z_numeric: numeric,
                cutoff,
                error,
            }
        })
        .collect();
    Ok(ScalingCurve { kappa, beta_c, rows })
}

/// Largest pairwise disagreement between curves on a shared α grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseDeviation {
    pub analytic: f64,
    pub numeric: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

/// Piecewise-linear interpolation on ascending `xs`; returns the sample
/// itself when `x` coincides with a node.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let pos = xs.partition_point(|&v| v < x);
    let near = |i: usize| (xs[i] - x).abs() <= 1e-12 * (1.0 + x.abs());
    if pos < xs.len() && near(pos) {
        return ys[pos];
    }
    if pos > 0 && near(pos - 1) {
        return ys[pos - 1];
    }
    let hi = pos.clamp(1, xs.len() - 1);
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + t * (ys[hi] - ys[lo])
}

/// Resamples every curve onto `points` α values spanning the common range
/// (optionally clipped to `window`) and reports the sup over the grid of the
/// largest pairwise |Δ⟨σ₁ᶻ⟩|, separately for both columns.
pub fn collapse_deviation(
    curves: &[ScalingCurve],
    window: Option<(f64, f64)>,
    points: usize,
) -> Result<CollapseDeviation> {
    if curves.len() < 2 {
        return Err(Error::InvalidParameter("collapse needs at least two curves".into()));
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for c in curves {
        if c.rows.len() < 2 {
            return Err(Error::InvalidParameter("each curve needs at least two rows".into()));
        }
        if c.failed_rows() > 0 {
            return Err(Error::InvalidParameter(format!(
                "curve kappa = {} has {} failed rows",
                c.kappa,
                c.failed_rows()
            )));
        }
        lo = lo.max(c.rows.first().unwrap().alpha);
        hi = hi.min(c.rows.last().unwrap().alpha);
    }
    if let Some((wlo, whi)) = window {
        lo = lo.max(wlo);
        hi = hi.min(whi);
    }
    if !(lo < hi) {
        return Err(Error::InvalidParameter("alpha ranges do not overlap".into()));
    }
    let grid = linspace(lo, hi, points.max(2));
    let columns: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = curves
        .iter()
        .map(|c| {
            (
                c.rows.iter().map(|r| r.alpha).collect(),
                c.rows.iter().map(|r| r.sigma_z_analytic).collect(),
                c.rows.iter().map(|r| r.sigma_z_numeric.unwrap()).collect(),
            )
        })
        .collect();
    let mut analytic = 0.0f64;
    let mut numeric = 0.0f64;
    for &a in &grid {
        let an: Vec<f64> = columns.iter().map(|(x, y, _)| interpolate(x, y, a)).collect();
        let nu: Vec<f64> = columns.iter().map(|(x, _, y)| interpolate(x, y, a)).collect();
        let spread = |v: &[f64]| {
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        analytic = analytic.max(spread(&an));
        numeric = numeric.max(spread(&nu));
    }
    Ok(CollapseDeviation { analytic, numeric, alpha_min: lo, alpha_max: hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{IsingAxis, ModelSpec};

    #[test]
    fn kappa_examples() {
        let d = 0.01;
        let spec = ModelSpec::two_spin(d, 1.0, 0.0, 0.0, 1e-6 * d, IsingAxis::XX);
        assert!((kappa_of(&spec).unwrap() - 1e-6).abs() < 1e-20);
        let spec = ModelSpec::two_spin(d, 1.0, 0.0, 0.5 * d, 1e-6 * d, IsingAxis::XX);
        assert!((kappa_of(&spec).unwrap() - 2e-6).abs() < 1e-18);
        let star = ModelSpec::star(d, 1.0, 0.0, &[0.2 * d, 0.3 * d], 0.1 * d, IsingAxis::XX);
        assert!((kappa_of(&star).unwrap() - 0.2).abs() < 1e-14);
    }

    #[test]
    fn kappa_errors() {
        let spec = ModelSpec::two_spin(0.01, 1.0, 0.0, 0.01, 1e-4, IsingAxis::XX);
        assert!(matches!(kappa_of(&spec), Err(Error::DegenerateKappa)));
        let chain = ModelSpec::chain(0.01, 1.0, 0.0, &[0.001, 0.001], 1e-4, IsingAxis::XX);
        assert!(kappa_of(&chain).is_err());
    }

    #[test]
    fn beta_c_values() {
        assert!(beta_c_of(0.5f64.sqrt()).unwrap().abs() < 1e-15);
        let expected = -(2f64.ln() - 6.0 * 10f64.ln()) / 4.0;
        assert!((beta_c_of(1e-3).unwrap() - expected).abs() < 1e-14);
        assert!((beta_c_of(1e-3).unwrap() - 3.2806).abs() < 1e-4);
        assert!((beta_c_of(1e-6).unwrap() - 6.7345).abs() < 1e-4);
        assert!(beta_c_of(0.0).is_err());
    }

    #[test]
    fn sigma_z_limits() {
        let k = 0.01;
        let bc = beta_c_of(k).unwrap();
        assert!((sigma_z_beta(k, bc) + 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((sigma_z_beta(-k, bc) - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert_eq!(sigma_z_beta(k, 0.0), -k / (k * k + 1.0).sqrt());
        assert!((sigma_z_beta(k, 10.0) + 1.0).abs() < 1e-6);
        assert!((sigma_z_alpha(0.0, 1.0) + 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((sigma_z_alpha(5.0, 1.0) + 1.0).abs() < 1e-15);
        assert!(sigma_z_alpha(-5.0, 1.0).abs() < 1e-20);
    }

    #[test]
    fn scaled_and_alpha_forms_agree() {
        for &k in &[1e-2, 1e-3, -1e-2] {
            let bc = beta_c_of(k).unwrap();
            for beta in linspace(0.0, 2.0 * bc, 33) {
                let a = sigma_z_beta(k, beta);
                assert!((a - sigma_z_beta_scaled(k, beta).unwrap()).abs() < 1e-14);
                assert!((a - sigma_z_alpha(alpha_of(beta, bc), k)).abs() < 1e-14);
            }
        }
        assert!(sigma_z_beta_scaled(0.5f64.sqrt(), 1.0).is_err());
    }

    #[test]
    fn beta_grids() {
        let g = beta_grid_relative(2.0, 0.5, 1.5, 41);
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[40], 3.0);
        let g = beta_grid_alpha(2.0, -0.3, 0.3, 7);
        assert!((alpha_of(g[0], 2.0) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_bias_rejected() {
        let spec = ModelSpec::two_spin(0.01, 1.0, 0.0, 0.0, 0.0, IsingAxis::XX);
        assert!(scaling_curve(&spec, &[1.0]).is_err());
        assert!(measure_sigma_z(&spec, 1.0, 1).is_err());
    }

    #[test]
    fn collapse_needs_pairs() {
        let spec = ModelSpec::two_spin(0.01, 1.0, 0.0, 0.0, 1e-4, IsingAxis::XX);
        let c = scaling_curve(&spec, &[1.0, 1.5]).unwrap();
        assert!(collapse_deviation(std::slice::from_ref(&c), None, 10).is_err());
        let far = ScalingCurve {
            rows: c.rows.iter().map(|r| ScalingRow { alpha: r.alpha + 10.0, ..r.clone() }).collect(),
            ..c.clone()
        };
        assert!(collapse_deviation(&[c, far], None, 10).is_err());
    }

    #[test]
    fn interpolation_hits_nodes() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 10.0, 40.0];
        assert_eq!(interpolate(&xs, &ys, 1.0), 10.0);
        assert_eq!(interpolate(&xs, &ys, 1.5), 25.0);
        assert_eq!(interpolate(&xs, &ys, 2.0), 40.0);
    }
}
