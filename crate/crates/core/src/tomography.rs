//! Direct state reconstruction from weak values supplied by a [`WeakValueOracle`].
//!
//! Five schemes: pure states from the moments of one observable, pure states from a set of
//! observables at one basis post-selection, mixed states column by column, and the two
//! bipartite analogues built on product weak values realized through local weak values.

use log::debug;
use num_complex::Complex64;
use serde_json::json;

use crate::error::{Error, Result};
use crate::hilbert::linalg::{self, CMatrix, CVector, I, ONE};
use crate::hilbert::{
    eig_hermitian, fidelity_mixed, fidelity_pure, trace_distance, DensityOperator, Observable,
    PureState, Tolerances,
};
use crate::moments::{measurement_count, moment_sequence_with, PreSelection};
use crate::oracle::{QueryCount, WeakValueOracle};
use crate::product::{
    product_weak_value_local_mixed_with, product_weak_value_local_pure_with, LocalPostSelection,
    Side,
};

/// Ordered single-system observables.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    pub label: String,
    pub ops: Vec<Observable>,
}

/// `|i⟩⟨j| + |j⟩⟨i|`, or the identity when `i == j == 0`.
fn transfer(d: usize, k: usize) -> Result<Observable> {
    if k == 0 {
        Observable::identity(d)
    } else {
        Observable::basis_transfer(d, 0, k)
    }
}

/// Cyclic shift `X|i⟩ = |i+1 mod d⟩`.
pub fn shift_matrix(d: usize) -> CMatrix {
    let mut x = CMatrix::zeros(d, d);
    for i in 0..d {
        x[((i + 1) % d, i)] = ONE;
    }
    x
}

fn cyclic_ops(d: usize) -> Result<Vec<Observable>> {
    let x = shift_matrix(d);
    let mut ops = vec![Observable::identity(d)?];
    for n in 1..=(d - 1) / 2 {
        let fwd = linalg::matrix_power(&x, n as u32);
        let back = fwd.adjoint();
        ops.push(Observable::new(&fwd + &back)?);
        ops.push(Observable::new((&fwd - &back) * I)?);
    }
    if d % 2 == 0 {
        ops.push(Observable::new(linalg::matrix_power(&x, (d / 2) as u32))?);
    }
    Ok(ops)
}

impl OperatorSet {
    pub fn new(label: impl Into<String>, ops: Vec<Observable>) -> Result<Self> {
        let d = ops.first().map(Observable::dim).ok_or_else(|| Error::BadOperatorSet("empty".into()))?;
        if ops.iter().any(|o| o.dim() != d) {
            return Err(Error::BadOperatorSet("observables of different dimensions".into()));
        }
        Ok(Self { label: label.into(), ops })
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    /// `{|0⟩⟨k| + |k⟩⟨0|}` for `k = 1..d`; with post-selection `|0⟩` the design is the identity.
    pub fn basis_transfer(d: usize) -> Result<Self> {
        let ops = (1..d).map(|k| transfer(d, k)).collect::<Result<Vec<_>>>()?;
        Self::new("basis-transfer", ops)
    }

    /// `d` observables starting with the identity: `Xⁿ + X⁻ⁿ` and `i(Xⁿ − X⁻ⁿ)` for
    /// `n ≤ (d−1)/2`, plus `X^{d/2}` for even `d`, with `X` the cyclic shift. The design is a
    /// permutation-like nonsingular matrix for every basis post-selection.
    pub fn cyclic(d: usize) -> Result<Self> {
        Self::new("cyclic", cyclic_ops(d)?)
    }

    /// [`OperatorSet::cyclic`] without the identity, `d − 1` observables.
    pub fn cyclic_traceless(d: usize) -> Result<Self> {
        let mut ops = cyclic_ops(d)?;
        ops.remove(0);
        Self::new("cyclic-traceless", ops)
    }
}

/// Ordered pairs `(C_A, C_B)` standing for `C_A ⊗ C_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductOperatorSet {
    pub label: String,
    pub pairs: Vec<(Observable, Observable)>,
}

impl ProductOperatorSet {
    pub fn new(label: impl Into<String>, pairs: Vec<(Observable, Observable)>) -> Result<Self> {
        let (m, n) = pairs
            .first()
            .map(|(a, b)| (a.dim(), b.dim()))
            .ok_or_else(|| Error::BadOperatorSet("empty".into()))?;
        if pairs.iter().any(|(a, b)| a.dim() != m || b.dim() != n) {
            return Err(Error::BadOperatorSet("pairs of different dimensions".into()));
        }
        Ok(Self { label: label.into(), pairs })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.pairs[0].0.dim(), self.pairs[0].1.dim())
    }

    /// `(X₀ᵢ, X₀ⱼ)` for every `(i, j) ≠ (0, 0)` with `X₀₀ = I` and `X₀ₖ = |0⟩⟨k| + |k⟩⟨0|`.
    /// For two qubits this is `{I⊗σx, σx⊗I, σx⊗σx}`.
    pub fn default_pure(m: usize, n: usize) -> Result<Self> {
        let mut pairs = Vec::with_capacity(m * n - 1);
        for i in 0..m {
            for j in 0..n {
                if (i, j) != (0, 0) {
                    pairs.push((transfer(m, i)?, transfer(n, j)?));
                }
            }
        }
        Self::new("basis-transfer", pairs)
    }

    /// All products of the two cyclic sets, `(I, I)` first.
    pub fn cyclic(m: usize, n: usize) -> Result<Self> {
        let (ca, cb) = (cyclic_ops(m)?, cyclic_ops(n)?);
        let mut pairs = Vec::with_capacity(m * n);
        for a in &ca {
            for b in &cb {
                pairs.push((a.clone(), b.clone()));
            }
        }
        Self::new("cyclic", pairs)
    }

    /// [`ProductOperatorSet::cyclic`] without `(I, I)`.
    pub fn cyclic_traceless(m: usize, n: usize) -> Result<Self> {
        let mut s = Self::cyclic(m, n)?;
        s.pairs.remove(0);
        s.label = "cyclic-traceless".into();
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReconstructedState {
    Pure(PureState),
    Mixed(DensityOperator),
}

impl ReconstructedState {
    pub fn to_density(&self) -> DensityOperator {
        match self {
            ReconstructedState::Pure(s) => s.to_density(),
            ReconstructedState::Mixed(r) => r.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub scheme: &'static str,
    pub state: ReconstructedState,
    pub fidelity_vs_hidden: Option<f64>,
    pub trace_distance_vs_hidden: Option<f64>,
    /// Distinct weak values requested from the oracle.
    pub oracle_queries: usize,
    pub query_detail: QueryCount,
    /// Smallest-modulus determinant among the systems solved.
    pub design_determinant: Complex64,
    pub postselection_used: String,
    pub fallbacks_taken: usize,
    /// AAV set-ups for the moment scheme (one per pair of orthogonal post-selections).
    pub setups: Option<usize>,
}

impl ReconstructionReport {
    /// Fills in fidelity and trace distance against a known state.
    pub fn compare_with(mut self, hidden: &PreSelection) -> Self {
        let (f, t) = match (&self.state, hidden) {
            (ReconstructedState::Pure(a), PreSelection::Pure(b)) => {
                let f = fidelity_pure(a, b);
                (f, (1.0 - f).max(0.0).sqrt())
            }
            (state, hidden) => {
                let (r, h) = (state.to_density(), hidden.to_density());
                (fidelity_mixed(&r, &h), trace_distance(&r, &h))
            }
        };
        self.fidelity_vs_hidden = Some(f.clamp(0.0, 1.0));
        self.trace_distance_vs_hidden = Some(t);
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pair = |z: &Complex64| [z.re, z.im];
        let state = match &self.state {
            ReconstructedState::Pure(s) => json!({
                "kind": "pure",
                "dims": dims_json(s.dim(), s.bipartite_dims()),
                "data": s.amplitudes().iter().map(pair).collect::<Vec<_>>(),
            }),
            ReconstructedState::Mixed(r) => {
                let m = r.matrix();
                let mut data = Vec::with_capacity(m.len());
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        data.push(pair(&m[(i, j)]));
                    }
                }
                json!({"kind": "mixed", "dims": dims_json(r.dim(), r.bipartite_dims()), "data": data})
            }
        };
        json!({
            "scheme": self.scheme,
            "state": state,
            "fidelity": self.fidelity_vs_hidden,
            "trace_distance": self.trace_distance_vs_hidden,
            "oracle_queries": self.oracle_queries,
            "query_calls": self.query_detail.calls,
            "distinct_observables": self.query_detail.observables,
            "design_determinant": pair(&self.design_determinant),
            "postselection_used": self.postselection_used,
            "fallbacks_taken": self.fallbacks_taken,
            "setups": self.setups,
        })
    }
}

fn dims_json(d: usize, split: Option<(usize, usize)>) -> Vec<usize> {
    split.map_or(vec![d], |(m, n)| vec![m, n])
}

fn check_oracle_dim(oracle: &dyn WeakValueOracle, d: usize) -> Result<()> {
    if oracle.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: oracle.dim() });
    }
    Ok(())
}

/// Solves `design · x = rhs`, refusing designs with `|det| < tol_det`.
fn guarded_solve(design: &CMatrix, rhs: &CVector, tol: &Tolerances, what: &str) -> Result<(Complex64, CVector)> {
    let (det, sol) = linalg::solve(design, rhs);
    debug!("{what}: |det| = {:e}", det.norm());
    if det.norm() < tol.det {
        return Err(Error::SingularDesign { det_abs: det.norm() });
    }
    let x = sol.ok_or(Error::SingularDesign { det_abs: det.norm() })?;
    Ok((det, x))
}

/// Errors that make one post-selection unusable without invalidating the others.
fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::SingularDesign { .. }
            | Error::OrthogonalPostSelection { .. }
            | Error::ZeroPostSelectionProbability { .. }
            | Error::OrthogonalIntermediatePostSelection { .. }
            | Error::NotOrthogonal { .. }
    )
}

fn basis_label(k: usize) -> String {
    format!("|{k}>")
}

fn pair_label(k: usize, l: usize) -> String {
    format!("|{k}{l}>")
}

/// Amplitudes below this are treated as zero when fixing the global phase.
const GAUGE_THRESHOLD: f64 = 1e-12;

fn finish_pure(v: CVector, dims: Option<(usize, usize)>) -> Result<PureState> {
    let mut s = PureState::from_unnormalized(v)?.gauge_fixed(GAUGE_THRESHOLD);
    if let Some((m, n)) = dims {
        s = s.with_bipartite(m, n)?;
    }
    Ok(s)
}

/// Pure state from the moments `(A)_w … (A^{d−1})_w` at post-selection `b`.
///
/// The moments come from one chain of `d − 1` first-moment queries; together with
/// `Σ (Πᵢ)_w = 1` they fix the projector weak values through a Vandermonde system, and
/// `ψ ∝ Σ (Πᵢ)_w / ⟨b|aᵢ⟩ |aᵢ⟩`.
pub fn reconstruct_pure_moments(
    oracle: &dyn WeakValueOracle,
    d: usize,
    a: &Observable,
    b: &PureState,
    tol: &Tolerances,
) -> Result<ReconstructionReport> {
    check_oracle_dim(oracle, d)?;
    if a.dim() != d || b.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.dim().max(b.dim()) });
    }
    let eig = eig_hermitian(a);
    let gap = eig.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if gap < tol.det {
        return Err(Error::DegenerateObservable { gap });
    }
    let overlaps: Vec<Complex64> = eig.vectors.iter().map(|v| b.inner(v)).collect();
    if let Some(o) = overlaps.iter().find(|o| o.norm_sqr() <= tol.overlap) {
        return Err(Error::OrthogonalPostSelection { probability: o.norm_sqr() });
    }
    let moments = moment_sequence_with(a, b, (d - 1) as u32, tol, |post| oracle.query(a, post))?;
    let design = CMatrix::from_fn(d, d, |n, i| Complex64::new(eig.values[i].powi(n as i32), 0.0));
    let mut rhs = CVector::zeros(d);
    rhs[0] = ONE;
    for (n, w) in moments.iter().enumerate() {
        rhs[n + 1] = *w;
    }
    let (det, proj) = guarded_solve(&design, &rhs, tol, "moment Vandermonde")?;
    let mut psi = CVector::zeros(d);
    for (i, v) in eig.vectors.iter().enumerate() {
        psi += v.vector() * (proj[i] / overlaps[i]);
    }
    let count = oracle.query_count();
    Ok(ReconstructionReport {
        scheme: "pure-moments",
        state: ReconstructedState::Pure(finish_pure(psi, None)?),
        fidelity_vs_hidden: None,
        trace_distance_vs_hidden: None,
        oracle_queries: count.weak_values,
        query_detail: count,
        design_determinant: det,
        postselection_used: "b".into(),
        fallbacks_taken: 0,
        setups: Some(measurement_count((d - 1) as u32) as usize),
    })
}

/// Lexicographic order starting at `start`, wrapping around.
fn rotation(len: usize, start: usize) -> impl Iterator<Item = usize> {
    (start..len).chain(0..start.min(len))
}

/// Pure state from `d − 1` observables at a basis post-selection `|k⟩`:
/// `(C)_w − C_kk = Σ_{i≠k} C_ki αᵢ/α_k`. Post-selections are tried from `|start⟩` onwards
/// until one has a nonsingular design and a nonvanishing overlap.
pub fn reconstruct_pure_alt(
    oracle: &dyn WeakValueOracle,
    d: usize,
    ops: &OperatorSet,
    start: usize,
    tol: &Tolerances,
) -> Result<ReconstructionReport> {
    check_oracle_dim(oracle, d)?;
    if ops.dim() != d || ops.ops.len() != d - 1 {
        return Err(Error::BadOperatorSet(format!("need {} observables of dimension {d}", d - 1)));
    }
    let mut last = None;
    for (tried, k) in rotation(d, start).enumerate() {
        match pure_alt_at(oracle, d, ops, k, tol) {
            Ok((det, v)) => {
                let count = oracle.query_count();
                return Ok(ReconstructionReport {
                    scheme: "pure-alt",
                    state: ReconstructedState::Pure(finish_pure(v, None)?),
                    fidelity_vs_hidden: None,
                    trace_distance_vs_hidden: None,
                    oracle_queries: count.weak_values,
                    query_detail: count,
                    design_determinant: det,
                    postselection_used: basis_label(k),
                    fallbacks_taken: tried,
                    setups: None,
                });
            }
            Err(e) if recoverable(&e) => {
                debug!("post-selection {} rejected: {e}", basis_label(k));
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::AllPostSelectionsFailed { tried: d, last: last.map(|e| e.to_string()).unwrap_or_default() })
}

fn pure_alt_at(
    oracle: &dyn WeakValueOracle,
    d: usize,
    ops: &OperatorSet,
    k: usize,
    tol: &Tolerances,
) -> Result<(Complex64, CVector)> {
    let cols: Vec<usize> = (0..d).filter(|&i| i != k).collect();
    let design = CMatrix::from_fn(d - 1, d - 1, |r, c| ops.ops[r].matrix()[(k, cols[c])]);
    let (det, _) = linalg::solve(&design, &CVector::zeros(d - 1));
    if det.norm() < tol.det {
        return Err(Error::SingularDesign { det_abs: det.norm() });
    }
    let post = PureState::basis(d, k)?;
    let mut rhs = CVector::zeros(d - 1);
    for (r, c) in ops.ops.iter().enumerate() {
        rhs[r] = oracle.query(c, &post)? - c.matrix()[(k, k)];
    }
    let (det, ratios) = guarded_solve(&design, &rhs, tol, "pure-alt design")?;
    let mut v = CVector::zeros(d);
    v[k] = ONE;
    for (c, &i) in cols.iter().enumerate() {
        v[i] = ratios[c];
    }
    Ok((det, v))
}

/// Hermitian, unit-trace completion and PSD repair of a column-by-column estimate whose
/// last column is missing.
fn complete_density(mut rho: CMatrix, tol: &Tolerances, dims: Option<(usize, usize)>) -> Result<DensityOperator> {
    let d = rho.nrows();
    let last = d - 1;
    for i in 0..last {
        rho[(i, last)] = rho[(last, i)].conj();
    }
    let partial: f64 = (0..last).map(|i| rho[(i, i)].re).sum();
    rho[(last, last)] = Complex64::new(1.0 - partial, 0.0);
    let mut rho = linalg::hermitian_part(&rho);
    let (values, vectors) = linalg::eigh(&rho);
    let min = values[0];
    if min < -tol.psd {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    if min < 0.0 {
        let mut fixed = CMatrix::zeros(d, d);
        for (k, lambda) in values.iter().enumerate() {
            let v = vectors.column(k).into_owned();
            fixed += linalg::outer(&v, &v).scale(lambda.max(0.0));
        }
        let tr = fixed.trace().re;
        rho = linalg::hermitian_part(&fixed.unscale(tr));
    }
    for i in 0..d {
        rho[(i, i)].im = 0.0;
    }
    let mut out = DensityOperator::with_tolerances(rho, tol)?;
    if let Some((m, n)) = dims {
        out = out.with_bipartite(m, n)?;
    }
    Ok(out)
}

fn smaller(a: Complex64, b: Complex64) -> Complex64 {
    if b.norm() < a.norm() {
        b
    } else {
        a
    }
}

/// Mixed state, column `j` from `p(j)(C)_w^j = Σᵢ C_ji ρ_ij` over `d` observables with
/// `C⁽¹⁾ = I`. The last column follows from Hermiticity and unit trace. A column whose
/// post-selection has vanishing probability is zero.
pub fn reconstruct_mixed_single(
    oracle: &dyn WeakValueOracle,
    d: usize,
    ops: &OperatorSet,
    tol: &Tolerances,
) -> Result<ReconstructionReport> {
    check_oracle_dim(oracle, d)?;
    if ops.dim() != d || ops.ops.len() != d {
        return Err(Error::BadOperatorSet(format!("need {d} observables of dimension {d}")));
    }
    if !ops.ops[0].is_identity() {
        return Err(Error::BadOperatorSet("first observable must be the identity".into()));
    }
    let mut rho = CMatrix::zeros(d, d);
    let mut det_min = Complex64::new(f64::INFINITY, 0.0);
    for j in 0..d - 1 {
        let design = CMatrix::from_fn(d, d, |r, i| ops.ops[r].matrix()[(j, i)]);
        let post = PureState::basis(d, j)?;
        let p = oracle.probability(&post)?;
        if p <= tol.overlap {
            debug!("column {j}: post-selection probability {p:e}, column set to zero");
            let (det, _) = linalg::solve(&design, &CVector::zeros(d));
            det_min = smaller(det_min, det);
            continue;
        }
        let mut rhs = CVector::zeros(d);
        rhs[0] = Complex64::new(p, 0.0);
        for (r, c) in ops.ops.iter().enumerate().skip(1) {
            rhs[r] = oracle.query(c, &post)? * p;
        }
        let (det, col) = guarded_solve(&design, &rhs, tol, "mixed column design")?;
        det_min = smaller(det_min, det);
        rho.set_column(j, &col);
    }
    let state = complete_density(rho, tol, None)?;
    let count = oracle.query_count();
    Ok(ReconstructionReport {
        scheme: "mixed-single",
        state: ReconstructedState::Mixed(state),
        fidelity_vs_hidden: None,
        trace_distance_vs_hidden: None,
        oracle_queries: count.weak_values,
        query_detail: count,
        design_determinant: det_min,
        postselection_used: "all but last".into(),
        fallbacks_taken: 0,
        setups: None,
    })
}

fn oracle_dims(oracle: &dyn WeakValueOracle, m: usize, n: usize) -> Result<()> {
    match oracle.bipartite_dims() {
        Some(dims) if dims == (m, n) => Ok(()),
        Some((a, b)) => Err(Error::DimensionMismatch { expected: m * n, got: a * b }),
        None => Err(Error::NoBipartiteStructure),
    }
}

fn local_data<'a>(
    oracle: &'a dyn WeakValueOracle,
) -> impl FnMut(Side, &Observable, &LocalPostSelection) -> Result<(Complex64, f64)> + 'a {
    move |side, x, post| Ok((oracle.local_query(side, x, post)?, oracle.probability(&post.joint())?))
}

/// Bipartite pure state from `mn − 1` product observables at a product-basis
/// post-selection `|kl⟩`; each product weak value is assembled from local weak values.
pub fn reconstruct_bipartite_pure(
    oracle: &dyn WeakValueOracle,
    m: usize,
    n: usize,
    ops: &ProductOperatorSet,
    tol: &Tolerances,
) -> Result<ReconstructionReport> {
    oracle_dims(oracle, m, n)?;
    let d = m * n;
    if ops.dims() != (m, n) || ops.pairs.len() != d - 1 {
        return Err(Error::BadOperatorSet(format!("need {} pairs on {m}x{n}", d - 1)));
    }
    let mut last = None;
    for (tried, kl) in (0..d).enumerate() {
        let (k, l) = (kl / n, kl % n);
        match bipartite_pure_at(oracle, m, n, ops, k, l, tol) {
            Ok((det, v)) => {
                let count = oracle.query_count();
                return Ok(ReconstructionReport {
                    scheme: "bipartite-pure",
                    state: ReconstructedState::Pure(finish_pure(v, Some((m, n)))?),
                    fidelity_vs_hidden: None,
                    trace_distance_vs_hidden: None,
                    oracle_queries: count.weak_values,
                    query_detail: count,
                    design_determinant: det,
                    postselection_used: pair_label(k, l),
                    fallbacks_taken: tried,
                    setups: None,
                });
            }
            Err(e) if recoverable(&e) => {
                debug!("post-selection {} rejected: {e}", pair_label(k, l));
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::AllPostSelectionsFailed { tried: d, last: last.map(|e| e.to_string()).unwrap_or_default() })
}

fn product_entry(a: &Observable, b: &Observable, k: usize, l: usize, i: usize, j: usize) -> Complex64 {
    a.matrix()[(k, i)] * b.matrix()[(l, j)]
}

fn bipartite_pure_at(
    oracle: &dyn WeakValueOracle,
    m: usize,
    n: usize,
    ops: &ProductOperatorSet,
    k: usize,
    l: usize,
    tol: &Tolerances,
) -> Result<(Complex64, CVector)> {
    let d = m * n;
    let target = k * n + l;
    let cols: Vec<usize> = (0..d).filter(|&c| c != target).collect();
    let design = CMatrix::from_fn(d - 1, d - 1, |r, c| {
        let (a, b) = &ops.pairs[r];
        product_entry(a, b, k, l, cols[c] / n, cols[c] % n)
    });
    let (det, _) = linalg::solve(&design, &CVector::zeros(d - 1));
    if det.norm() < tol.det {
        return Err(Error::SingularDesign { det_abs: det.norm() });
    }
    let post = LocalPostSelection::basis(m, n, k, l)?;
    let probability = oracle.probability(&post.joint())?;
    if probability <= tol.overlap {
        return Err(Error::OrthogonalPostSelection { probability });
    }
    let mut rhs = CVector::zeros(d - 1);
    for (r, (a, b)) in ops.pairs.iter().enumerate() {
        let w = product_weak_value_local_pure_with(a, b, &post, tol, local_data(oracle))?;
        rhs[r] = w - product_entry(a, b, k, l, k, l);
    }
    let (det, ratios) = guarded_solve(&design, &rhs, tol, "bipartite pure design")?;
    let mut v = CVector::zeros(d);
    v[target] = ONE;
    for (c, &idx) in cols.iter().enumerate() {
        v[idx] = ratios[c];
    }
    Ok((det, v))
}

/// Bipartite mixed state, column `kl` from
/// `p(kl) ((C_A⊗C_B)_w)^{kl} = Σ [C_A]_ki [C_B]_lj ρ_{ij,kl}` over `mn` pairs with the first
/// pair `(I, I)`; product weak values come from local weak values.
pub fn reconstruct_bipartite_mixed(
    oracle: &dyn WeakValueOracle,
    m: usize,
    n: usize,
    ops: &ProductOperatorSet,
    tol: &Tolerances,
) -> Result<ReconstructionReport> {
    oracle_dims(oracle, m, n)?;
    let d = m * n;
    if ops.dims() != (m, n) || ops.pairs.len() != d {
        return Err(Error::BadOperatorSet(format!("need {d} pairs on {m}x{n}")));
    }
    if !(ops.pairs[0].0.is_identity() && ops.pairs[0].1.is_identity()) {
        return Err(Error::BadOperatorSet("first pair must be identity ⊗ identity".into()));
    }
    let mut rho = CMatrix::zeros(d, d);
    let mut det_min = Complex64::new(f64::INFINITY, 0.0);
    for kl in 0..d - 1 {
        let (k, l) = (kl / n, kl % n);
        let design = CMatrix::from_fn(d, d, |r, c| {
            let (a, b) = &ops.pairs[r];
            product_entry(a, b, k, l, c / n, c % n)
        });
        let post = LocalPostSelection::basis(m, n, k, l)?;
        let p = oracle.probability(&post.joint())?;
        if p <= tol.overlap {
            debug!("column {}: post-selection probability {p:e}, column set to zero", pair_label(k, l));
            let (det, _) = linalg::solve(&design, &CVector::zeros(d));
            det_min = smaller(det_min, det);
            continue;
        }
        let mut rhs = CVector::zeros(d);
        rhs[0] = Complex64::new(p, 0.0);
        for (r, (a, b)) in ops.pairs.iter().enumerate().skip(1) {
            rhs[r] = product_weak_value_local_mixed_with(a, b, &post, tol, local_data(oracle))? * p;
        }
        let (det, col) = guarded_solve(&design, &rhs, tol, "bipartite mixed design")?;
        det_min = smaller(det_min, det);
        rho.set_column(kl, &col);
    }
    let state = complete_density(rho, tol, Some((m, n)))?;
    let count = oracle.query_count();
    Ok(ReconstructionReport {
        scheme: "bipartite-mixed",
        state: ReconstructedState::Mixed(state),
        fidelity_vs_hidden: None,
        trace_distance_vs_hidden: None,
        oracle_queries: count.weak_values,
        query_detail: count,
        design_determinant: det_min,
        postselection_used: "all but last".into(),
        fallbacks_taken: 0,
        setups: None,
    })
}

/// Observable with eigenvalues at Chebyshev nodes of `[−1, 1]` in a random eigenbasis.
pub fn chebyshev_observable(d: usize, basis: &[PureState]) -> Result<Observable> {
    if basis.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: basis.len() });
    }
    let mut m = CMatrix::zeros(d, d);
    for (k, v) in basis.iter().enumerate() {
        let node = ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * d) as f64).cos();
        m += v.projector().scale(node);
    }
    Observable::new(linalg::hermitian_part(&m))
}
