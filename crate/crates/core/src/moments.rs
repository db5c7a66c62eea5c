//! Weak values and weak values of powers `Aⁿ`, by direct evaluation and by recursion over
//! first-moment weak values at orthogonal post-selections.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::linalg::{sandwich, CVector, ONE};
use crate::hilbert::{DensityOperator, Observable, PureState, Tolerances};
use crate::vaidman::{decompose, spectral_pair};

/// A pre-selected state, pure or mixed.
#[derive(Debug, Clone, PartialEq)]
pub enum PreSelection {
    Pure(PureState),
    Mixed(DensityOperator),
}

impl PreSelection {
    pub fn dim(&self) -> usize {
        match self {
            PreSelection::Pure(s) => s.dim(),
            PreSelection::Mixed(r) => r.dim(),
        }
    }

    pub fn bipartite_dims(&self) -> Option<(usize, usize)> {
        match self {
            PreSelection::Pure(s) => s.bipartite_dims(),
            PreSelection::Mixed(r) => r.bipartite_dims(),
        }
    }

    /// `|⟨φ|ψ⟩|²` or `⟨φ|ρ|φ⟩`.
    pub fn probability(&self, phi: &PureState) -> f64 {
        match self {
            PreSelection::Pure(s) => phi.inner(s).norm_sqr(),
            PreSelection::Mixed(r) => r.probability(phi),
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        match self {
            PreSelection::Pure(s) => s.to_density(),
            PreSelection::Mixed(r) => r.clone(),
        }
    }
}

impl From<PureState> for PreSelection {
    fn from(s: PureState) -> Self {
        PreSelection::Pure(s)
    }
}

impl From<DensityOperator> for PreSelection {
    fn from(r: DensityOperator) -> Self {
        PreSelection::Mixed(r)
    }
}

fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `⟨φ|A|ψ⟩ / ⟨φ|ψ⟩`.
pub fn weak_value(a: &Observable, psi: &PureState, phi: &PureState, tol: &Tolerances) -> Result<Complex64> {
    same_dim(a.dim(), psi.dim())?;
    same_dim(a.dim(), phi.dim())?;
    let overlap = phi.inner(psi);
    let probability = overlap.norm_sqr();
    if probability <= tol.overlap {
        return Err(Error::OrthogonalPostSelection { probability });
    }
    Ok(sandwich(phi.vector(), a.matrix(), psi.vector()) / overlap)
}

/// `⟨φ|Aρ|φ⟩ / ⟨φ|ρ|φ⟩`.
pub fn weak_value_mixed(
    a: &Observable,
    rho: &DensityOperator,
    phi: &PureState,
    tol: &Tolerances,
) -> Result<Complex64> {
    same_dim(a.dim(), rho.dim())?;
    same_dim(a.dim(), phi.dim())?;
    let probability = rho.probability(phi);
    if probability <= tol.overlap {
        return Err(Error::ZeroPostSelectionProbability { probability });
    }
    let rho_phi: CVector = rho.matrix() * phi.vector();
    Ok(sandwich(phi.vector(), a.matrix(), &rho_phi) / probability)
}

pub fn weak_value_pre(a: &Observable, pre: &PreSelection, phi: &PureState, tol: &Tolerances) -> Result<Complex64> {
    match pre {
        PreSelection::Pure(s) => weak_value(a, s, phi, tol),
        PreSelection::Mixed(r) => weak_value_mixed(a, r, phi, tol),
    }
}

/// Weak value of the matrix power `Aⁿ`.
pub fn nth_moment_direct(
    a: &Observable,
    pre: &PreSelection,
    phi: &PureState,
    n: u32,
    tol: &Tolerances,
) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::BadMomentOrder);
    }
    weak_value_pre(&a.power(n), pre, phi, tol)
}

/// Number of AAV set-ups needed for the n-th moment of a pure pre-selection.
pub fn measurement_count(n: u32) -> u32 {
    n.div_ceil(2)
}

/// Recursion for pure pre-selections, with `query(post)` returning `(A)_w` at `post`.
///
/// The post-selection chain `c₀ = φ`, `c_{k+1} = (c_k)⊥` is built by repeated
/// decomposition. `query` is called at most once per chain element, in order.
pub fn nth_moment_recursive_with<F>(
    a: &Observable,
    phi: &PureState,
    n: u32,
    tol: &Tolerances,
    query: F,
) -> Result<Complex64>
where
    F: FnMut(&PureState) -> Result<Complex64>,
{
    Ok(*moment_sequence_with(a, phi, n, tol, query)?.last().expect("n >= 1"))
}

/// All moments `(A)_w, (A²)_w, …, (Aⁿ)_w` from a single chain of `n` first-moment queries.
pub fn moment_sequence_with<F>(
    a: &Observable,
    phi: &PureState,
    n: u32,
    tol: &Tolerances,
    mut query: F,
) -> Result<Vec<Complex64>>
where
    F: FnMut(&PureState) -> Result<Complex64>,
{
    if n == 0 {
        return Err(Error::BadMomentOrder);
    }
    same_dim(a.dim(), phi.dim())?;
    let n = n as usize;
    // (mean, weak value, eigenstate?) per chain element
    let mut chain: Vec<(f64, Complex64, bool)> = Vec::with_capacity(n);
    let mut current = phi.clone();
    for k in 0..n {
        let wv = match query(&current) {
            Ok(v) => v,
            Err(Error::OrthogonalPostSelection { .. }) if k > 0 => {
                return Err(Error::OrthogonalIntermediatePostSelection { level: k })
            }
            Err(e) => return Err(e),
        };
        match decompose(a, &current, tol) {
            Ok(dec) => {
                chain.push((dec.mean, wv, false));
                if k + 1 == n {
                    break;
                }
                current = dec.phi_perp;
            }
            Err(Error::EigenstatePostSelection { .. }) => {
                chain.push((a.expectation(&current), wv, true));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    // w[k] holds W(k, m) for the current m; W(k, 0) = 1
    let len = chain.len();
    let mut w: Vec<Complex64> = vec![ONE; len];
    let mut out = Vec::with_capacity(n);
    for m in 1..=n {
        // W(k, m) needed for k + m <= n
        let upto = (n - m + 1).min(len);
        for k in 0..upto {
            let (mean, wv, eigen) = chain[k];
            w[k] = if eigen {
                Complex64::new(mean.powi(m as i32), 0.0)
            } else if m == 1 {
                wv
            } else {
                w[k] * mean + (wv - mean) * w[k + 1]
            };
        }
        out.push(w[0]);
    }
    Ok(out)
}

/// Pure-state recursion with weak values computed from `psi`.
pub fn nth_moment_recursive(
    a: &Observable,
    psi: &PureState,
    phi: &PureState,
    n: u32,
    tol: &Tolerances,
) -> Result<Complex64> {
    same_dim(a.dim(), psi.dim())?;
    let probability = phi.inner(psi).norm_sqr();
    if probability <= tol.overlap {
        return Err(Error::OrthogonalPostSelection { probability });
    }
    nth_moment_recursive_with(a, phi, n, tol, |post| weak_value(a, psi, post, tol))
}

struct Node {
    state: PureState,
    mean: f64,
    /// `(spread, four spectral-pair children)`, `None` for eigenstates; filled lazily.
    split: Option<Option<(f64, [(Complex64, usize); 4])>>,
    /// `(A)_w · p` and `p` from the data source.
    first: Option<(Complex64, f64)>,
}

struct MixedRecursion<'a, F> {
    a: &'a Observable,
    tol: &'a Tolerances,
    query: F,
    nodes: Vec<Node>,
    memo: HashMap<(usize, usize), Complex64>,
}

impl<F> MixedRecursion<'_, F>
where
    F: FnMut(&PureState) -> Result<(Complex64, f64)>,
{
    fn add(&mut self, state: PureState) -> usize {
        let mean = self.a.expectation(&state);
        self.nodes.push(Node { state, mean, split: None, first: None });
        self.nodes.len() - 1
    }

    fn first(&mut self, id: usize) -> Result<(Complex64, f64)> {
        if let Some(v) = self.nodes[id].first {
            return Ok(v);
        }
        let (wv, p) = (self.query)(&self.nodes[id].state)?;
        let v = (wv * p, p);
        self.nodes[id].first = Some(v);
        Ok(v)
    }

    fn split(&mut self, id: usize) -> Result<Option<(f64, [(Complex64, usize); 4])>> {
        if let Some(s) = self.nodes[id].split {
            return Ok(s);
        }
        let s = match decompose(self.a, &self.nodes[id].state, self.tol) {
            Ok(dec) => {
                let pair = spectral_pair(&self.nodes[id].state, &dec.phi_perp, self.tol)?;
                let mut kids = [(ONE, 0usize); 4];
                for (slot, (lambda, v)) in kids.iter_mut().zip(pair.entries()) {
                    *slot = (lambda, self.add(v.clone()));
                }
                Some((dec.spread, kids))
            }
            Err(Error::EigenstatePostSelection { .. }) => None,
            Err(e) => return Err(e),
        };
        self.nodes[id].split = Some(s);
        Ok(s)
    }

    /// `⟨s|Aᵐ ρ|s⟩` for node `s`.
    fn unnormalized(&mut self, id: usize, m: usize) -> Result<Complex64> {
        if let Some(v) = self.memo.get(&(id, m)) {
            return Ok(*v);
        }
        let v = match m {
            0 => Complex64::new(self.first(id)?.1, 0.0),
            1 => self.first(id)?.0,
            _ => match self.split(id)? {
                None => self.first(id)?.0 * self.nodes[id].mean.powi(m as i32 - 1),
                Some((spread, kids)) => {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for (lambda, kid) in kids {
                        sum += lambda * self.unnormalized(kid, m - 1)?;
                    }
                    self.unnormalized(id, m - 1)? * self.nodes[id].mean + sum * (spread / 2.0)
                }
            },
        };
        self.memo.insert((id, m), v);
        Ok(v)
    }
}

/// Recursion for mixed pre-selections, with `query(post)` returning `((A)_w, p(post))`.
///
/// Spectral-pair post-selections of every non-eigenstate node are queried once each, with
/// results memoized on (post-selection, level).
pub fn nth_moment_recursive_mixed_with<F>(
    a: &Observable,
    phi: &PureState,
    n: u32,
    tol: &Tolerances,
    query: F,
) -> Result<Complex64>
where
    F: FnMut(&PureState) -> Result<(Complex64, f64)>,
{
    if n == 0 {
        return Err(Error::BadMomentOrder);
    }
    same_dim(a.dim(), phi.dim())?;
    let mut rec = MixedRecursion { a, tol, query, nodes: Vec::new(), memo: HashMap::new() };
    let root = rec.add(phi.clone());
    let (_, p) = rec.first(root)?;
    Ok(rec.unnormalized(root, n as usize)? / p)
}

pub fn nth_moment_recursive_mixed(
    a: &Observable,
    rho: &DensityOperator,
    phi: &PureState,
    n: u32,
    tol: &Tolerances,
) -> Result<Complex64> {
    same_dim(a.dim(), rho.dim())?;
    nth_moment_recursive_mixed_with(a, phi, n, tol, |post| {
        Ok((weak_value_mixed(a, rho, post, tol)?, rho.probability(post)))
    })
}

/// Dispatches to the pure or mixed recursion.
pub fn nth_moment_recursive_pre(
    a: &Observable,
    pre: &PreSelection,
    phi: &PureState,
    n: u32,
    tol: &Tolerances,
) -> Result<Complex64> {
    match pre {
        PreSelection::Pure(s) => nth_moment_recursive(a, s, phi, n, tol),
        PreSelection::Mixed(r) => nth_moment_recursive_mixed(a, r, phi, n, tol),
    }
}

/// A computed weak value together with its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakValueRecord {
    pub value: Complex64,
    pub pre: PreSelection,
    pub post: PureState,
    pub observable: Observable,
    pub moment: u32,
}

impl WeakValueRecord {
    pub fn compute(
        observable: Observable,
        pre: PreSelection,
        post: PureState,
        moment: u32,
        tol: &Tolerances,
    ) -> Result<Self> {
        let value = nth_moment_direct(&observable, &pre, &post, moment, tol)?;
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { value, pre, post, observable, moment })
    }
}

/// Relative deviation `|x − reference| / max(1, |reference|)`.
pub fn relative_error(x: Complex64, reference: Complex64) -> f64 {
    (x - reference).norm() / reference.norm().max(1.0)
}
