//! Sensitivity of weak values to a mis-specified observable and to a noisy post-selection.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::linalg::{self, CMatrix};
use crate::hilbert::{DensityOperator, Observable, PureState, Tolerances};
use crate::moments::weak_value_mixed;

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.singular_values().iter().sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    /// Trace norm of `A − A_e`.
    pub delta: f64,
    /// Smallest eigenvalue of the pre-selection.
    pub m: f64,
    /// `δ/m`, `None` when the pre-selection is rank deficient.
    pub bound: Option<f64>,
    /// `|A_w − (A_e)_w|`.
    pub actual: f64,
    /// `actual ≤ bound + tol_oracle`, `None` without a bound.
    pub satisfied: Option<bool>,
}

impl PerturbationReport {
    /// The bound check, or an error when the bound is vacuous.
    pub fn check(&self) -> Result<bool> {
        self.satisfied.ok_or(Error::RankDeficientPreSelection { min_eigenvalue: self.m })
    }
}

pub fn observable_perturbation_report(
    rho: &DensityOperator,
    a: &Observable,
    a_e: &Observable,
    phi: &PureState,
    tol: &Tolerances,
) -> Result<PerturbationReport> {
    if a.dim() != a_e.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: a_e.dim() });
    }
    let delta = trace_norm(&(a.matrix() - a_e.matrix()))?;
    let m = rho.min_eigenvalue();
    let actual = (weak_value_mixed(a, rho, phi, tol)? - weak_value_mixed(a_e, rho, phi, tol)?).norm();
    let bound = (m > tol.psd).then(|| delta / m);
    let satisfied = bound.map(|b| actual <= b + tol.oracle);
    Ok(PerturbationReport { delta, m, bound, actual, satisfied })
}

/// Weak value with the post-selection projector replaced by
/// `Φ = (1−ε)|φ⟩⟨φ| + εσ`: `Tr(Φ A ρ) / Tr(Φ ρ)`.
pub fn noisy_postselection_weak_value(
    a: &Observable,
    rho: &DensityOperator,
    phi: &PureState,
    sigma: &DensityOperator,
    eps: f64,
    tol: &Tolerances,
) -> Result<Complex64> {
    check_eps(eps)?;
    let big_phi = phi.projector().scale(1.0 - eps) + sigma.matrix().scale(eps);
    let probability = (&big_phi * rho.matrix()).trace().re;
    if probability <= tol.overlap {
        return Err(Error::ZeroPostSelectionProbability { probability });
    }
    Ok((&big_phi * a.matrix() * rho.matrix()).trace() / probability)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::BadParams(format!("noise level {eps} not in [0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyShift {
    /// `ε [Tr(σAρ) − A_w Tr(σρ)] / ⟨φ|ρ|φ⟩`.
    pub first_order: Complex64,
    /// Weak value under `Φ` minus weak value under `|φ⟩`.
    pub exact: Complex64,
}

pub fn noisy_postselection_shift(
    rho: &DensityOperator,
    a: &Observable,
    phi: &PureState,
    sigma: &DensityOperator,
    eps: f64,
    tol: &Tolerances,
) -> Result<NoisyShift> {
    check_eps(eps)?;
    let wv = weak_value_mixed(a, rho, phi, tol)?;
    let p = rho.probability(phi);
    let sar = (sigma.matrix() * a.matrix() * rho.matrix()).trace();
    let sr = (sigma.matrix() * rho.matrix()).trace();
    let first_order = (sar - wv * sr) * (eps / p);
    let exact = if eps == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        noisy_postselection_weak_value(a, rho, phi, sigma, eps, tol)? - wv
    };
    Ok(NoisyShift { first_order, exact })
}

/// Trace norm via `Σ √eig(M†M)`, an independent route used for cross-checks.
pub fn trace_norm_eig(m: &CMatrix) -> f64 {
    linalg::eigvalsh(&(m.adjoint() * m)).iter().map(|v| v.max(0.0).sqrt()).sum()
}
