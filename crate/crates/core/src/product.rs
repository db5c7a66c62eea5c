//! Product weak values `(A⊗B)_w` with product post-selections, directly and through
//! local weak values on one subsystem at a time.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::linalg::{sandwich, CMatrix, CVector};
use crate::hilbert::{
    conditional_vector, DensityOperator, Observable, PureState, Tensor, Tolerances,
};
use crate::moments::{weak_value_pre, PreSelection};
use crate::vaidman::{decompose, spectral_pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

/// Product post-selection `|φ_A⟩ ⊗ |φ_B⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPostSelection {
    pub phi_a: PureState,
    pub phi_b: PureState,
}

impl LocalPostSelection {
    pub fn new(phi_a: PureState, phi_b: PureState) -> Self {
        Self { phi_a, phi_b }
    }

    /// Product basis state `|i⟩|j⟩`.
    pub fn basis(m: usize, n: usize, i: usize, j: usize) -> Result<Self> {
        Ok(Self { phi_a: PureState::basis(m, i)?, phi_b: PureState::basis(n, j)? })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.phi_a.dim(), self.phi_b.dim())
    }

    pub fn joint(&self) -> PureState {
        self.phi_a.tensor(&self.phi_b)
    }

    pub fn with_a(&self, phi_a: PureState) -> Self {
        Self { phi_a, phi_b: self.phi_b.clone() }
    }

    pub fn swapped(&self) -> Self {
        Self { phi_a: self.phi_b.clone(), phi_b: self.phi_a.clone() }
    }
}

fn check_split(pre_dim: usize, pre_split: Option<(usize, usize)>, post: &LocalPostSelection) -> Result<()> {
    let (m, n) = post.dims();
    if pre_dim != m * n {
        return Err(Error::DimensionMismatch { expected: m * n, got: pre_dim });
    }
    if let Some((pm, _)) = pre_split {
        if pm != m {
            return Err(Error::DimensionMismatch { expected: pm, got: m });
        }
    }
    Ok(())
}

/// `X ⊗ I` or `I ⊗ X` on an `m x n` system.
pub fn embed(side: Side, x: &Observable, m: usize, n: usize) -> Result<Observable> {
    let (own, other) = match side {
        Side::A => (m, n),
        Side::B => (n, m),
    };
    if x.dim() != own {
        return Err(Error::DimensionMismatch { expected: own, got: x.dim() });
    }
    let id = Observable::identity(other)?;
    Ok(match side {
        Side::A => x.tensor(&id),
        Side::B => id.tensor(x),
    })
}

/// `|⟨φ_Aφ_B|ψ⟩|²` or `⟨φ_Aφ_B|ρ|φ_Aφ_B⟩`.
pub fn postselection_probability(pre: &PreSelection, post: &LocalPostSelection) -> Result<f64> {
    check_split(pre.dim(), pre.bipartite_dims(), post)?;
    Ok(pre.probability(&post.joint()).clamp(0.0, 1.0))
}

/// Weak value of `X ⊗ I` (side A) or `I ⊗ X` (side B) with a product post-selection.
pub fn local_weak_value(
    side: Side,
    x: &Observable,
    pre: &PreSelection,
    post: &LocalPostSelection,
    tol: &Tolerances,
) -> Result<Complex64> {
    check_split(pre.dim(), pre.bipartite_dims(), post)?;
    let (m, n) = post.dims();
    weak_value_pre(&embed(side, x, m, n)?, pre, &post.joint(), tol)
}

/// Pure pre-selection only: contracts the other side first, e.g. for side B
/// `⟨φ_B|B|ψ_B⟩/⟨φ_B|ψ_B⟩` with `ψ_B = ⟨φ_A|ψ_AB⟩`.
pub fn local_weak_value_conditional(
    side: Side,
    x: &Observable,
    psi: &PureState,
    post: &LocalPostSelection,
    tol: &Tolerances,
) -> Result<Complex64> {
    check_split(psi.dim(), psi.bipartite_dims(), post)?;
    let (m, n) = post.dims();
    let (cond, own): (CVector, &PureState) = match side {
        Side::A => (conditional_vector(psi.vector(), m, n, post.phi_b.vector(), true), &post.phi_a),
        Side::B => (conditional_vector(psi.vector(), m, n, post.phi_a.vector(), false), &post.phi_b),
    };
    if x.dim() != own.dim() {
        return Err(Error::DimensionMismatch { expected: own.dim(), got: x.dim() });
    }
    let overlap = own.vector().dotc(&cond);
    let probability = overlap.norm_sqr();
    if probability <= tol.overlap {
        return Err(Error::OrthogonalPostSelection { probability });
    }
    Ok(sandwich(own.vector(), x.matrix(), &cond) / overlap)
}

/// Dense evaluation of `⟨φφ|(A⊗B)|ψ⟩/⟨φφ|ψ⟩` or `⟨φφ|(A⊗B)ρ|φφ⟩/⟨φφ|ρ|φφ⟩`.
pub fn product_weak_value_direct(
    a: &Observable,
    b: &Observable,
    pre: &PreSelection,
    post: &LocalPostSelection,
    tol: &Tolerances,
) -> Result<Complex64> {
    check_split(pre.dim(), pre.bipartite_dims(), post)?;
    check_factor_dims(a, b, post)?;
    weak_value_pre(&a.tensor(b), pre, &post.joint(), tol)
}

/// Same as [`product_weak_value_direct`] for a general (possibly non-Hermitian) matrix.
pub(crate) fn product_matrix_element(mat: &CMatrix, rho: &DensityOperator, post: &PureState) -> Complex64 {
    let rho_phi = rho.matrix() * post.vector();
    sandwich(post.vector(), mat, &rho_phi)
}

fn check_factor_dims(a: &Observable, b: &Observable, post: &LocalPostSelection) -> Result<()> {
    let (m, n) = post.dims();
    if a.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: a.dim() });
    }
    if b.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.dim() });
    }
    Ok(())
}

/// Pure-state product weak value from local data supplied by `local(side, X, post)`, which
/// returns the local weak value and the joint post-selection probability:
/// `⟨A⟩(B_w^{φφ} − B_w^{φ⊥φ}) + A_w^{φφ} B_w^{φ⊥φ}`, where `φ⊥` is the partner of `φ_A`
/// under A.
///
/// If `φ_A` is an eigenstate of A the value is `⟨A⟩ B_w^{φφ}`; if B is the identity it is
/// `A_w^{φφ}`. When `|φ⊥φ_B⟩` is orthogonal to the pre-selection the spectral-pair form of
/// [`product_weak_value_local_mixed_with`] is used instead.
pub fn product_weak_value_local_pure_with<F>(
    a: &Observable,
    b: &Observable,
    post: &LocalPostSelection,
    tol: &Tolerances,
    mut local: F,
) -> Result<Complex64>
where
    F: FnMut(Side, &Observable, &LocalPostSelection) -> Result<(Complex64, f64)>,
{
    check_factor_dims(a, b, post)?;
    if b.is_identity() {
        return Ok(local(Side::A, a, post)?.0);
    }
    let dec = match decompose(a, &post.phi_a, tol) {
        Ok(dec) => dec,
        Err(Error::EigenstatePostSelection { .. }) => {
            let mean = a.expectation(&post.phi_a);
            return Ok(local(Side::B, b, post)?.0 * mean);
        }
        Err(e) => return Err(e),
    };
    let b_par = local(Side::B, b, post)?.0;
    let b_perp = match local(Side::B, b, &post.with_a(dec.phi_perp.clone())) {
        Ok((v, _)) => v,
        Err(Error::OrthogonalPostSelection { .. }) => {
            return spectral_form(b, post, tol, &dec, b_par, local);
        }
        Err(e) => return Err(e),
    };
    let a_w = local(Side::A, a, post)?.0;
    Ok((b_par - b_perp) * dec.mean + a_w * b_perp)
}

fn spectral_form<F>(
    b: &Observable,
    post: &LocalPostSelection,
    tol: &Tolerances,
    dec: &crate::vaidman::VaidmanDecomposition,
    b_par: Complex64,
    mut local: F,
) -> Result<Complex64>
where
    F: FnMut(Side, &Observable, &LocalPostSelection) -> Result<(Complex64, f64)>,
{
    let p = local(Side::B, b, post)?.1;
    let pair = spectral_pair(&post.phi_a, &dec.phi_perp, tol)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for (lambda, v) in pair.entries() {
        let (bw, pc) = local(Side::B, b, &post.with_a(v.clone()))?;
        sum += lambda * bw * pc;
    }
    Ok(b_par * dec.mean + sum * (dec.spread / (2.0 * p)))
}

pub fn product_weak_value_local_pure(
    a: &Observable,
    b: &Observable,
    psi: &PureState,
    post: &LocalPostSelection,
    tol: &Tolerances,
) -> Result<Complex64> {
    check_split(psi.dim(), psi.bipartite_dims(), post)?;
    let pre = PreSelection::Pure(psi.clone());
    let probability = pre.probability(&post.joint());
    if probability <= tol.overlap {
        return Err(Error::OrthogonalPostSelection { probability });
    }
    product_weak_value_local_pure_with(a, b, post, tol, |side, x, p| {
        Ok((local_weak_value(side, x, &pre, p, tol)?, pre.probability(&p.joint())))
    })
}

/// Mixed-state product weak value from local data; `local(side, X, post)` returns the local
/// weak value and the joint post-selection probability:
/// `⟨A⟩ B_w^{φφ} + (ΔA / 2p) Σ λ_c B_w^{cφ_B} p(cφ_B)` over the four spectral-pair vectors
/// `c` of `(φ_A, φ⊥_A)`.
pub fn product_weak_value_local_mixed_with<F>(
    a: &Observable,
    b: &Observable,
    post: &LocalPostSelection,
    tol: &Tolerances,
    mut local: F,
) -> Result<Complex64>
where
    F: FnMut(Side, &Observable, &LocalPostSelection) -> Result<(Complex64, f64)>,
{
    check_factor_dims(a, b, post)?;
    if b.is_identity() {
        return Ok(local(Side::A, a, post)?.0);
    }
    let dec = match decompose(a, &post.phi_a, tol) {
        Ok(dec) => dec,
        Err(Error::EigenstatePostSelection { .. }) => {
            let mean = a.expectation(&post.phi_a);
            return Ok(local(Side::B, b, post)?.0 * mean);
        }
        Err(e) => return Err(e),
    };
    let b_par = local(Side::B, b, post)?.0;
    spectral_form(b, post, tol, &dec, b_par, local)
}

pub fn product_weak_value_local_mixed(
    a: &Observable,
    b: &Observable,
    rho: &DensityOperator,
    post: &LocalPostSelection,
    tol: &Tolerances,
) -> Result<Complex64> {
    check_split(rho.dim(), rho.bipartite_dims(), post)?;
    let pre = PreSelection::Mixed(rho.clone());
    product_weak_value_local_mixed_with(a, b, post, tol, |side, x, p| {
        let wv = local_weak_value(side, x, &pre, p, tol)?;
        Ok((wv, rho.probability(&p.joint())))
    })
}

/// Relabels subsystems so that B becomes the decomposed side:
/// returns `(B, A, swapped pre-selection, swapped post-selection)`.
pub fn swap_sides(
    a: &Observable,
    b: &Observable,
    pre: &PreSelection,
    post: &LocalPostSelection,
) -> Result<(Observable, Observable, PreSelection, LocalPostSelection)> {
    check_split(pre.dim(), pre.bipartite_dims(), post)?;
    let (m, n) = post.dims();
    let perm = |k: usize| {
        let (i, j) = (k / n, k % n);
        j * m + i
    };
    let d = m * n;
    let pre = match pre {
        PreSelection::Pure(s) => {
            let mut v = CVector::zeros(d);
            for k in 0..d {
                v[perm(k)] = s.vector()[k];
            }
            PreSelection::Pure(PureState::from_unnormalized(v)?.with_bipartite(n, m)?)
        }
        PreSelection::Mixed(r) => {
            let mut mat = CMatrix::zeros(d, d);
            for k in 0..d {
                for l in 0..d {
                    mat[(perm(k), perm(l))] = r.matrix()[(k, l)];
                }
            }
            PreSelection::Mixed(DensityOperator::new(mat)?.with_bipartite(n, m)?)
        }
    };
    Ok((b.clone(), a.clone(), pre, post.swapped()))
}

/// Local realization for either kind of pre-selection.
pub fn product_weak_value_local(
    a: &Observable,
    b: &Observable,
    pre: &PreSelection,
    post: &LocalPostSelection,
    tol: &Tolerances,
) -> Result<Complex64> {
    match pre {
        PreSelection::Pure(s) => product_weak_value_local_pure(a, b, s, post, tol),
        PreSelection::Mixed(r) => product_weak_value_local_mixed(a, b, r, post, tol),
    }
}
