//! Simulated weak-measurement experiments. Tomography sees the hidden state only through
//! [`WeakValueOracle`].

use std::collections::HashSet;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::linalg::{CMatrix, CVector};
use crate::hilbert::{random_hermitian_with, rng_from_seed, DensityOperator, Observable, PureState, Tolerances};
use crate::moments::{weak_value_pre, PreSelection};
use crate::product::{embed, LocalPostSelection, Side};
use crate::robustness::{noisy_postselection_weak_value, trace_norm};

/// Query accounting. Identity observables are answered without being counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryCount {
    /// Every non-identity query, repeats included.
    pub calls: usize,
    /// Distinct (observable, post-selection) pairs.
    pub weak_values: usize,
    /// Distinct observables.
    pub observables: usize,
}

pub trait WeakValueOracle {
    fn dim(&self) -> usize;
    fn bipartite_dims(&self) -> Option<(usize, usize)>;
    /// Weak value of `a` with post-selection `post`.
    fn query(&self, a: &Observable, post: &PureState) -> Result<Complex64>;
    /// Probability of the post-selection.
    fn probability(&self, post: &PureState) -> Result<f64>;
    fn query_count(&self) -> QueryCount;

    /// Weak value of `X ⊗ I` or `I ⊗ X` with a product post-selection.
    fn local_query(&self, side: Side, x: &Observable, post: &LocalPostSelection) -> Result<Complex64> {
        let (m, n) = self.bipartite_dims().ok_or(Error::NoBipartiteStructure)?;
        if post.dims() != (m, n) {
            return Err(Error::DimensionMismatch { expected: m * n, got: post.phi_a.dim() * post.phi_b.dim() });
        }
        self.query(&embed(side, x, m, n)?, &post.joint())
    }
}

fn bits_of_matrix(m: &CMatrix) -> Vec<u64> {
    m.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
}

fn bits_of_vector(v: &CVector) -> Vec<u64> {
    v.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
}

#[derive(Default)]
struct Ledger {
    calls: usize,
    pairs: HashSet<(Vec<u64>, Vec<u64>)>,
    observables: HashSet<Vec<u64>>,
}

impl Ledger {
    fn record(&mut self, a: &Observable, post: &PureState) {
        if a.is_identity() {
            return;
        }
        let ka = bits_of_matrix(a.matrix());
        self.calls += 1;
        self.pairs.insert((ka.clone(), bits_of_vector(post.vector())));
        self.observables.insert(ka);
    }

    fn count(&self) -> QueryCount {
        QueryCount { calls: self.calls, weak_values: self.pairs.len(), observables: self.observables.len() }
    }
}

/// Answers ideal weak values of the hidden state.
pub struct ExactOracle {
    hidden: PreSelection,
    tol: Tolerances,
    ledger: Mutex<Ledger>,
}

impl ExactOracle {
    pub fn new(hidden: impl Into<PreSelection>, tol: Tolerances) -> Self {
        Self { hidden: hidden.into(), tol, ledger: Mutex::new(Ledger::default()) }
    }
}

impl WeakValueOracle for ExactOracle {
    fn dim(&self) -> usize {
        self.hidden.dim()
    }

    fn bipartite_dims(&self) -> Option<(usize, usize)> {
        self.hidden.bipartite_dims()
    }

    fn query(&self, a: &Observable, post: &PureState) -> Result<Complex64> {
        self.ledger.lock().expect("ledger lock").record(a, post);
        weak_value_pre(a, &self.hidden, post, &self.tol)
    }

    fn probability(&self, post: &PureState) -> Result<f64> {
        if post.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: post.dim() });
        }
        Ok(self.hidden.probability(post))
    }

    fn query_count(&self) -> QueryCount {
        self.ledger.lock().expect("ledger lock").count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOracleConfig {
    /// Trace norm of the observable perturbation.
    pub delta: f64,
    /// Weight of the noise state in the post-selection.
    pub eps: f64,
    /// Noise state; maximally mixed when `None`.
    pub sigma: Option<DensityOperator>,
    pub seed: u64,
}

impl Default for NoisyOracleConfig {
    fn default() -> Self {
        Self { delta: 0.0, eps: 0.0, sigma: None, seed: 42 }
    }
}

/// Oracle with a mis-specified observable `A + G` (G Hermitian, `‖G‖₁ = δ`) and the
/// post-selection replaced by `(1−ε)|φ⟩⟨φ| + εσ`.
pub struct NoisyOracle {
    hidden: PreSelection,
    rho: DensityOperator,
    sigma: DensityOperator,
    delta: f64,
    eps: f64,
    perturbation: CMatrix,
    tol: Tolerances,
    ledger: Mutex<Ledger>,
}

impl NoisyOracle {
    pub fn new(hidden: impl Into<PreSelection>, cfg: NoisyOracleConfig, tol: Tolerances) -> Result<Self> {
        let hidden = hidden.into();
        let d = hidden.dim();
        if !(cfg.delta >= 0.0 && cfg.delta.is_finite()) {
            return Err(Error::BadParams(format!("perturbation budget {} must be finite and ≥ 0", cfg.delta)));
        }
        if !(0.0..1.0).contains(&cfg.eps) {
            return Err(Error::BadParams(format!("post-selection noise {} not in [0, 1)", cfg.eps)));
        }
        let sigma = match cfg.sigma {
            Some(s) if s.dim() != d => return Err(Error::DimensionMismatch { expected: d, got: s.dim() }),
            Some(s) => s,
            None => DensityOperator::maximally_mixed(d)?,
        };
        let g = random_hermitian_with(&mut rng_from_seed(cfg.seed), d);
        let norm = trace_norm(&g)?;
        let perturbation = g.scale(cfg.delta / norm);
        Ok(Self {
            rho: hidden.to_density(),
            hidden,
            sigma,
            delta: cfg.delta,
            eps: cfg.eps,
            perturbation,
            tol,
            ledger: Mutex::new(Ledger::default()),
        })
    }

    pub fn perturbation(&self) -> &CMatrix {
        &self.perturbation
    }

    fn is_exact(&self) -> bool {
        self.delta == 0.0 && self.eps == 0.0
    }
}

impl WeakValueOracle for NoisyOracle {
    fn dim(&self) -> usize {
        self.hidden.dim()
    }

    fn bipartite_dims(&self) -> Option<(usize, usize)> {
        self.hidden.bipartite_dims()
    }

    fn query(&self, a: &Observable, post: &PureState) -> Result<Complex64> {
        self.ledger.lock().expect("ledger lock").record(a, post);
        if self.is_exact() {
            return weak_value_pre(a, &self.hidden, post, &self.tol);
        }
        if a.dim() != self.dim() || post.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: a.dim().max(post.dim()) });
        }
        let a_e = Observable::new(a.matrix() + &self.perturbation)?;
        noisy_postselection_weak_value(&a_e, &self.rho, post, &self.sigma, self.eps, &self.tol)
    }

    fn probability(&self, post: &PureState) -> Result<f64> {
        if post.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: post.dim() });
        }
        if self.is_exact() {
            return Ok(self.hidden.probability(post));
        }
        let p = self.rho.probability(post);
        let s = (self.sigma.matrix() * self.rho.matrix()).trace().re;
        Ok((1.0 - self.eps) * p + self.eps * s)
    }

    fn query_count(&self) -> QueryCount {
        self.ledger.lock().expect("ledger lock").count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{random_density, random_observable, random_pure, random_pure_with};
    use crate::moments::weak_value;
    use crate::robustness::noisy_postselection_shift;
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn exact_oracle_examples() {
        let plus = PureState::normalized(vec![Complex64::new(1.0, 0.0); 2]).unwrap();
        let o = ExactOracle::new(plus.clone(), tol());
        let v = o.query(&Observable::pauli_x(), &PureState::basis(2, 0).unwrap()).unwrap();
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-14);
        let post = random_pure(2, 3).unwrap();
        assert!((o.query(&Observable::identity(2).unwrap(), &post).unwrap() - 1.0).norm() < 1e-14);

        let o = ExactOracle::new(random_density(3, 2, 1).unwrap(), tol());
        let total: f64 = (0..3).map(|k| o.probability(&PureState::basis(3, k).unwrap()).unwrap()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        let e = ExactOracle::new(PureState::basis(2, 0).unwrap(), tol());
        assert!(matches!(e.query(&Observable::pauli_x(), &PureState::basis(2, 1).unwrap()), Err(Error::OrthogonalPostSelection { .. })));
    }

    #[test]
    fn bit_identical_to_direct_weak_values() {
        let psi = random_pure(4, 5).unwrap();
        let o = ExactOracle::new(psi.clone(), tol());
        for seed in 0..10 {
            let a = random_observable(4, seed).unwrap();
            let phi = random_pure(4, seed + 20).unwrap();
            assert_eq!(o.query(&a, &phi).unwrap(), weak_value(&a, &psi, &phi, &tol()).unwrap());
        }
    }

    #[test]
    fn counting() {
        let o = ExactOracle::new(random_pure(2, 1).unwrap(), tol());
        let z = PureState::basis(2, 0).unwrap();
        let one = PureState::basis(2, 1).unwrap();
        o.query(&Observable::pauli_x(), &z).unwrap();
        o.query(&Observable::pauli_x(), &z).unwrap();
        o.query(&Observable::pauli_x(), &one).unwrap();
        o.query(&Observable::pauli_y(), &one).unwrap();
        o.query(&Observable::identity(2).unwrap(), &one).unwrap();
        assert_eq!(o.query_count(), QueryCount { calls: 4, weak_values: 3, observables: 2 });
    }

    #[test]
    fn noiseless_noisy_oracle_is_exact() {
        let mut rng = rng_from_seed(4);
        let rho = random_density(3, 2, 6).unwrap();
        let exact = ExactOracle::new(rho.clone(), tol());
        let noisy = NoisyOracle::new(rho, NoisyOracleConfig::default(), tol()).unwrap();
        for _ in 0..100 {
            let a = Observable::new(random_hermitian_with(&mut rng, 3)).unwrap();
            let phi = random_pure_with(&mut rng, 3).unwrap();
            assert_eq!(noisy.query(&a, &phi).unwrap(), exact.query(&a, &phi).unwrap());
        }
    }

    #[test]
    fn noisy_postselection_matches_first_order_estimate() {
        let rho = random_density(3, 3, 7).unwrap();
        let a = random_observable(3, 8).unwrap();
        let phi = random_pure(3, 9).unwrap();
        let exact = ExactOracle::new(rho.clone(), tol()).query(&a, &phi).unwrap();
        let mut remainders = Vec::new();
        for eps in [0.01, 0.005] {
            let cfg = NoisyOracleConfig { eps, ..Default::default() };
            let o = NoisyOracle::new(rho.clone(), cfg, tol()).unwrap();
            let shift = o.query(&a, &phi).unwrap() - exact;
            let sigma = DensityOperator::maximally_mixed(3).unwrap();
            let est = noisy_postselection_shift(&rho, &a, &phi, &sigma, eps, &tol()).unwrap();
            assert!((shift - est.exact).norm() < 1e-12);
            remainders.push((shift - est.first_order).norm());
        }
        let ratio = remainders[0] / remainders[1];
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn observable_perturbation_respects_bound() {
        let rho = random_density(3, 3, 10).unwrap();
        let m = rho.min_eigenvalue();
        let cfg = NoisyOracleConfig { delta: 0.1, ..Default::default() };
        let noisy = NoisyOracle::new(rho.clone(), cfg, tol()).unwrap();
        assert_abs_diff_eq!(trace_norm(noisy.perturbation()).unwrap(), 0.1, epsilon = 1e-12);
        let exact = ExactOracle::new(rho, tol());
        for seed in 0..20 {
            let a = random_observable(3, seed).unwrap();
            let phi = random_pure(3, seed + 40).unwrap();
            let shift = (noisy.query(&a, &phi).unwrap() - exact.query(&a, &phi).unwrap()).norm();
            assert!(shift <= 0.1 / m + 1e-9);
        }
    }

    #[test]
    fn local_queries_need_split() {
        let o = ExactOracle::new(random_pure(4, 1).unwrap(), tol());
        let post = LocalPostSelection::basis(2, 2, 0, 0).unwrap();
        assert_eq!(o.local_query(Side::A, &Observable::pauli_x(), &post), Err(Error::NoBipartiteStructure));
    }
}
