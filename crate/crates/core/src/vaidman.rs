//! Decomposition `A|φ⟩ = ⟨A⟩|φ⟩ + ΔA|φ⊥⟩` and the spectra of the two rank-two normal
//! operators `|φ⟩⟨φ⊥| ± |φ⊥⟩⟨φ|`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::linalg::{CMatrix, CVector, I};
use crate::hilbert::{Observable, PureState, Tolerances};

#[derive(Debug, Clone, PartialEq)]
pub struct VaidmanDecomposition {
    /// ⟨φ|A|φ⟩.
    pub mean: f64,
    /// Standard deviation of A in φ; always nonnegative, the phase lives in `phi_perp`.
    pub spread: f64,
    pub phi_perp: PureState,
}

pub fn decompose(a: &Observable, phi: &PureState, tol: &Tolerances) -> Result<VaidmanDecomposition> {
    if a.dim() != phi.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: phi.dim() });
    }
    let ap = a.matrix() * phi.vector();
    let mean_c = phi.vector().dotc(&ap);
    let v: CVector = ap - phi.vector() * mean_c;
    let spread = v.norm();
    if spread < tol.overlap {
        return Err(Error::EigenstatePostSelection { spread });
    }
    let phi_perp = PureState::from_unnormalized(v)?;
    Ok(VaidmanDecomposition { mean: mean_c.re, spread, phi_perp })
}

/// Nonzero spectra of `S = |φ⟩⟨φ⊥| + |φ⊥⟩⟨φ|` (eigenvalues ±1) and
/// `T = |φ⟩⟨φ⊥| − |φ⊥⟩⟨φ|` (eigenvalues ±i).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub sym: [(f64, PureState); 2],
    pub antisym: [(Complex64, PureState); 2],
}

impl SpectralPair {
    /// All four (eigenvalue, eigenvector) entries with complex eigenvalues, `sym` first.
    pub fn entries(&self) -> [(Complex64, &PureState); 4] {
        [
            (Complex64::new(self.sym[0].0, 0.0), &self.sym[0].1),
            (Complex64::new(self.sym[1].0, 0.0), &self.sym[1].1),
            (self.antisym[0].0, &self.antisym[0].1),
            (self.antisym[1].0, &self.antisym[1].1),
        ]
    }

    pub fn sym_matrix(&self) -> CMatrix {
        self.sym.iter().fold(zeros_like(&self.sym[0].1), |acc, (l, v)| {
            acc + v.projector().scale(*l)
        })
    }

    pub fn antisym_matrix(&self) -> CMatrix {
        self.antisym.iter().fold(zeros_like(&self.sym[0].1), |acc, (l, v)| {
            acc + v.projector() * *l
        })
    }
}

fn zeros_like(s: &PureState) -> CMatrix {
    CMatrix::zeros(s.dim(), s.dim())
}

pub fn spectral_pair(phi: &PureState, phi_perp: &PureState, tol: &Tolerances) -> Result<SpectralPair> {
    if phi.dim() != phi_perp.dim() {
        return Err(Error::DimensionMismatch { expected: phi.dim(), got: phi_perp.dim() });
    }
    let overlap = phi.inner(phi_perp).norm();
    if overlap >= tol.overlap {
        return Err(Error::NotOrthogonal { overlap });
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (p, q) = (phi.vector(), phi_perp.vector());
    let mk = |v: CVector| PureState::from_unnormalized(v.scale(h));
    Ok(SpectralPair {
        sym: [(1.0, mk(p + q)?), (-1.0, mk(p - q)?)],
        antisym: [(I, mk(p + q * I)?), (-I, mk(p - q * I)?)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::linalg::{max_abs, outer};
    use crate::hilbert::{eig_hermitian, fidelity_pure, random_observable, random_pure, rng_from_seed, random_pure_with};
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn sigma_x_on_zero() {
        let d = decompose(&Observable::pauli_x(), &PureState::basis(2, 0).unwrap(), &tol()).unwrap();
        assert_eq!(d.mean, 0.0);
        assert_eq!(d.spread, 1.0);
        assert_eq!(d.phi_perp, PureState::basis(2, 1).unwrap());
    }

    #[test]
    fn eigenstate_is_rejected() {
        let r = decompose(&Observable::pauli_z(), &PureState::basis(2, 0).unwrap(), &tol());
        assert!(matches!(r, Err(Error::EigenstatePostSelection { .. })));
        let r = decompose(&Observable::pauli_z(), &PureState::basis(3, 0).unwrap(), &tol());
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn residual_and_standard_deviation() {
        for seed in 0..20 {
            let a = random_observable(5, seed).unwrap();
            let phi = random_pure(5, seed + 100).unwrap();
            let d = decompose(&a, &phi, &tol()).unwrap();
            let r = a.matrix() * phi.vector()
                - phi.vector().scale(d.mean)
                - d.phi_perp.vector().scale(d.spread);
            assert!(r.norm() < 1e-10);
            assert!(phi.inner(&d.phi_perp).norm() < 1e-10);
            let var = a.power(2).expectation(&phi) - d.mean * d.mean;
            assert_abs_diff_eq!(d.spread * d.spread, var, epsilon = 1e-9);
        }
    }

    #[test]
    fn global_phase_invariance() {
        let a = random_observable(4, 1).unwrap();
        let phi = random_pure(4, 2).unwrap();
        let phase = Complex64::from_polar(1.0, 0.7);
        let rotated = PureState::new(phi.amplitudes().iter().map(|z| z * phase).collect()).unwrap();
        let d1 = decompose(&a, &phi, &tol()).unwrap();
        let d2 = decompose(&a, &rotated, &tol()).unwrap();
        assert_abs_diff_eq!(d1.mean, d2.mean, epsilon = 1e-12);
        assert_abs_diff_eq!(d1.spread, d2.spread, epsilon = 1e-12);
        let expect = d1.phi_perp.vector() * phase;
        assert!((expect - d2.phi_perp.vector()).norm() < 1e-12);
    }

    #[test]
    fn qubit_pair_closed_form() {
        let z = PureState::basis(2, 0).unwrap();
        let o = PureState::basis(2, 1).unwrap();
        let sp = spectral_pair(&z, &o, &tol()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        assert_eq!(sp.sym[0].1.amplitudes(), &[c(h, 0.0), c(h, 0.0)]);
        assert_eq!(sp.sym[1].1.amplitudes(), &[c(h, 0.0), c(-h, 0.0)]);
        assert_eq!(sp.antisym[0].0, I);
        assert_eq!(sp.antisym[0].1.amplitudes(), &[c(h, 0.0), c(0.0, h)]);
        assert_eq!(sp.antisym[1].1.amplitudes(), &[c(h, 0.0), c(0.0, -h)]);
    }

    #[test]
    fn reconstruction_at_d6() {
        let mut rng = rng_from_seed(5);
        let phi = random_pure_with(&mut rng, 6).unwrap();
        let other = random_pure_with(&mut rng, 6).unwrap();
        let v = other.vector() - phi.vector() * phi.inner(&other);
        let perp = PureState::from_unnormalized(v).unwrap();
        let sp = spectral_pair(&phi, &perp, &tol()).unwrap();
        let s = outer(phi.vector(), perp.vector()) + outer(perp.vector(), phi.vector());
        let t = outer(phi.vector(), perp.vector()) - outer(perp.vector(), phi.vector());
        assert!(max_abs(&(sp.sym_matrix() - s)) < 1e-12);
        assert!(max_abs(&(sp.antisym_matrix() - t)) < 1e-12);
        for fam in [[&sp.sym[0].1, &sp.sym[1].1], [&sp.antisym[0].1, &sp.antisym[1].1]] {
            assert!(fam[0].inner(fam[1]).norm() < 1e-12);
        }
    }

    #[test]
    fn plus_minus_pair_matches_eigensolver() {
        let plus = PureState::normalized(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        let minus = PureState::normalized(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]).unwrap();
        let sp = spectral_pair(&plus, &minus, &tol()).unwrap();
        assert_abs_diff_eq!(fidelity_pure(&sp.sym[0].1, &PureState::basis(2, 0).unwrap()), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fidelity_pure(&sp.sym[1].1, &PureState::basis(2, 1).unwrap()), 1.0, epsilon = 1e-14);
        let generic = eig_hermitian(&Observable::new(sp.sym_matrix()).unwrap());
        assert_abs_diff_eq!(fidelity_pure(&generic.vectors[1], &sp.sym[0].1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_orthogonal() {
        let z = PureState::basis(2, 0).unwrap();
        assert!(matches!(spectral_pair(&z, &z, &tol()), Err(Error::NotOrthogonal { .. })));
    }
}
