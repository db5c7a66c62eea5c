//! Validated value types for finite-dimensional quantum objects.
//!
//! Every constructor checks its invariants eagerly: a [`PureState`] is a unit vector, a
//! [`DensityOperator`] is Hermitian, unit trace and positive semidefinite, an
//! [`Observable`] is Hermitian. Downstream formulas assume these hold.

mod json;
pub mod linalg;
mod random;

use num_complex::Complex64;

use crate::error::{Error, Result};
pub use json::{LoadedObject, ObjectKind, StateFile};
pub use linalg::{CMatrix, CVector};
pub use random::{
    random_density, random_density_with, random_hermitian_with, random_observable,
    random_product_state_with, random_pure, random_pure_with, rng_from_seed,
};

use linalg::{eigh, hermitian_deviation, is_finite, ONE, ZERO};

/// Environment variable that overrides [`DEFAULT_MAX_DIM`].
pub const MAX_DIM_ENV: &str = "WEAKVAL_MAX_DIM";
pub const DEFAULT_MAX_DIM: usize = 64;

/// Soft dimension limit, `WEAKVAL_MAX_DIM` if set.
pub fn max_dim() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&d| d >= 2)
        .unwrap_or(DEFAULT_MAX_DIM)
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::BadDimension(format!("dimension {d} < 2")));
    }
    let limit = max_dim();
    if d > limit {
        return Err(Error::BadDimension(format!(
            "dimension {d} exceeds the limit {limit} (set {MAX_DIM_ENV} to raise it)"
        )));
    }
    Ok(())
}

fn check_bipartite(d: usize, dims: Option<(usize, usize)>) -> Result<()> {
    match dims {
        Some((m, n)) if m * n != d || m < 2 || n < 2 => Err(Error::BadDimension(format!(
            "bipartite dims {m}x{n} do not factor dimension {d}"
        ))),
        _ => Ok(()),
    }
}

/// Numerical tolerances used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub norm: f64,
    pub herm: f64,
    pub psd: f64,
    pub overlap: f64,
    pub det: f64,
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { norm: 1e-10, herm: 1e-10, psd: 1e-9, overlap: 1e-10, det: 1e-10, oracle: 1e-9 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("norm", self.norm),
            ("herm", self.herm),
            ("psd", self.psd),
            ("overlap", self.overlap),
            ("det", self.det),
            ("oracle", self.oracle),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::BadTolerance(name));
            }
        }
        Ok(())
    }
}

/// A unit vector, optionally tagged with a bipartite split `m x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVector,
    dims: Option<(usize, usize)>,
}

impl PureState {
    /// Validates normalization with the default tolerance.
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        Self::with_tolerances(amps, &Tolerances::default())
    }

    pub fn with_tolerances(amps: Vec<Complex64>, tol: &Tolerances) -> Result<Self> {
        let amps = CVector::from_vec(amps);
        check_dim(amps.len())?;
        if !amps.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm_sq = amps.norm_squared();
        if (norm_sq - 1.0).abs() >= tol.norm {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { amps, dims: None })
    }

    /// Rescales `amps` to unit norm; fails on a zero or non-finite vector.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self> {
        let v = CVector::from_vec(amps);
        Self::from_unnormalized(v)
    }

    pub(crate) fn from_unnormalized(v: CVector) -> Result<Self> {
        check_dim(v.len())?;
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm_sq: norm * norm });
        }
        Ok(Self { amps: v.unscale(norm), dims: None })
    }

    /// Computational basis vector `|k>` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        check_dim(d)?;
        if k >= d {
            return Err(Error::BadDimension(format!("basis index {k} out of range for d={d}")));
        }
        let mut v = CVector::zeros(d);
        v[k] = ONE;
        Ok(Self { amps: v, dims: None })
    }

    /// Product basis vector `|ij>` of an `m x n` system.
    pub fn product_basis(m: usize, n: usize, i: usize, j: usize) -> Result<Self> {
        let a = Self::basis(m, i)?;
        let b = Self::basis(n, j)?;
        Ok(a.tensor(&b))
    }

    pub fn with_bipartite(mut self, m: usize, n: usize) -> Result<Self> {
        check_bipartite(self.dim(), Some((m, n)))?;
        self.dims = Some((m, n));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn bipartite_dims(&self) -> Option<(usize, usize)> {
        self.dims
    }

    pub fn vector(&self) -> &CVector {
        &self.amps
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amps.as_slice()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    pub fn projector(&self) -> CMatrix {
        linalg::outer(&self.amps, &self.amps)
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator { matrix: self.projector(), dims: self.dims }
    }

    /// Multiplies by the global phase that makes the first amplitude above `threshold`
    /// real and positive. Amplitudes before it are set to zero, so the first amplitude is
    /// always exactly real and nonnegative.
    pub fn gauge_fixed(&self, threshold: f64) -> PureState {
        let lead = self.amps.iter().position(|z| z.norm() > threshold).unwrap_or(0);
        let a = self.amps[lead];
        if a.norm() == 0.0 {
            return self.clone();
        }
        let phase = a.conj() / a.norm();
        let mut v = self.amps.map(|z| z * phase);
        v[lead] = Complex64::new(a.norm(), 0.0);
        for z in v.iter_mut().take(lead) {
            *z = ZERO;
        }
        let norm = v.norm();
        PureState { amps: v.unscale(norm), dims: self.dims }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    dims: Option<(usize, usize)>,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        check_dim(matrix.nrows())?;
        if !is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation >= tol.herm {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = linalg::trace(&matrix).re;
        if (trace - 1.0).abs() >= tol.norm {
            return Err(Error::BadTrace { trace });
        }
        let min_eigenvalue = linalg::min_eigenvalue(&matrix);
        if min_eigenvalue <= -tol.psd {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self { matrix, dims: None })
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self { matrix: CMatrix::identity(d, d).unscale(d as f64), dims: None })
    }

    /// Convex mixture Σ wᵢ ρᵢ; weights must be nonnegative and sum to one.
    pub fn mixture(terms: &[(f64, DensityOperator)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::BadParams("empty mixture".into()))?;
        let d = first.1.dim();
        let mut total = 0.0;
        let mut m = CMatrix::zeros(d, d);
        for (w, rho) in terms {
            if rho.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: rho.dim() });
            }
            if !(*w >= 0.0) {
                return Err(Error::BadParams(format!("negative mixture weight {w}")));
            }
            total += w;
            m += rho.matrix.scale(*w);
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadParams(format!("mixture weights sum to {total}")));
        }
        let mut out = Self::new(m)?;
        out.dims = first.1.dims;
        Ok(out)
    }

    pub fn with_bipartite(mut self, m: usize, n: usize) -> Result<Self> {
        check_bipartite(self.dim(), Some((m, n)))?;
        self.dims = Some((m, n));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn bipartite_dims(&self) -> Option<(usize, usize)> {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// ⟨φ|ρ|φ⟩.
    pub fn probability(&self, phi: &PureState) -> f64 {
        linalg::sandwich(phi.vector(), &self.matrix, phi.vector()).re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }
}

/// Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
}

impl Observable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        check_dim(matrix.nrows())?;
        if !is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation >= tol.herm {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { matrix })
    }

    /// Hermitian matrices built from real entries (row major), convenient in tests.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.len();
        let m = CMatrix::from_fn(d, d, |i, j| Complex64::new(rows[i][j], 0.0));
        Self::new(m)
    }

    pub fn identity(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self { matrix: CMatrix::identity(d, d) })
    }

    pub fn pauli_x() -> Self {
        Self { matrix: CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]) }
    }

    pub fn pauli_y() -> Self {
        Self { matrix: CMatrix::from_row_slice(2, 2, &[ZERO, -linalg::I, linalg::I, ZERO]) }
    }

    pub fn pauli_z() -> Self {
        Self { matrix: CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]) }
    }

    /// `|i><j| + |j><i|` in dimension `d`.
    pub fn basis_transfer(d: usize, i: usize, j: usize) -> Result<Self> {
        check_dim(d)?;
        if i >= d || j >= d {
            return Err(Error::BadDimension(format!("indices ({i},{j}) out of range for d={d}")));
        }
        let mut m = CMatrix::zeros(d, d);
        m[(i, j)] += ONE;
        m[(j, i)] += ONE;
        Ok(Self { matrix: m })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        linalg::is_identity(&self.matrix)
    }

    /// ⟨φ|A|φ⟩, real for Hermitian A.
    pub fn expectation(&self, phi: &PureState) -> f64 {
        linalg::sandwich(phi.vector(), &self.matrix, phi.vector()).re
    }

    pub fn power(&self, n: u32) -> Observable {
        Observable { matrix: linalg::matrix_power(&self.matrix, n) }
    }
}

/// Kronecker product with the left factor as the slow index.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for PureState {
    fn tensor(&self, other: &Self) -> Self {
        PureState {
            amps: linalg::kron_vec(&self.amps, &other.amps),
            dims: Some((self.dim(), other.dim())),
        }
    }
}

impl Tensor for DensityOperator {
    fn tensor(&self, other: &Self) -> Self {
        DensityOperator {
            matrix: linalg::kron(&self.matrix, &other.matrix),
            dims: Some((self.dim(), other.dim())),
        }
    }
}

impl Tensor for Observable {
    fn tensor(&self, other: &Self) -> Self {
        Observable { matrix: linalg::kron(&self.matrix, &other.matrix) }
    }
}

/// Spectral decomposition of an observable.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: Vec<PureState>,
}

pub fn eig_hermitian(m: &Observable) -> Eigensystem {
    let (values, vecs) = eigh(&m.matrix);
    let vectors = (0..vecs.ncols())
        .map(|k| PureState { amps: vecs.column(k).into_owned(), dims: None })
        .collect();
    Eigensystem { values, vectors }
}

/// Transposes the second-subsystem indices: `PT[(i,j),(k,l)] = ρ[(i,l),(k,j)]`.
pub fn partial_transpose(rho: &DensityOperator) -> Result<CMatrix> {
    let (m, n) = rho.bipartite_dims().ok_or(Error::NoBipartiteStructure)?;
    Ok(partial_transpose_matrix(&rho.matrix, m, n))
}

pub(crate) fn partial_transpose_matrix(mat: &CMatrix, m: usize, n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..n {
            for k in 0..m {
                for l in 0..n {
                    out[(i * n + j, k * n + l)] = mat[(i * n + l, k * n + j)];
                }
            }
        }
    }
    out
}

/// Smallest eigenvalue of the partial transpose; negative means entangled (PPT test).
pub fn ppt_min_eigenvalue(rho: &DensityOperator) -> Result<f64> {
    Ok(linalg::min_eigenvalue(&partial_transpose(rho)?))
}

/// |⟨a|b⟩|².
pub fn fidelity_pure(a: &PureState, b: &PureState) -> f64 {
    a.inner(b).norm_sqr()
}

/// Uhlmann fidelity (Tr √(√ρ σ √ρ))².
pub fn fidelity_mixed(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    let s = linalg::psd_sqrt(&rho.matrix);
    let inner = &s * &sigma.matrix * &s;
    let t: f64 = linalg::eigvalsh(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    (t * t).min(1.0)
}

/// ½‖ρ − σ‖₁.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    let diff = &rho.matrix - &sigma.matrix;
    0.5 * linalg::eigvalsh(&diff).iter().map(|v| v.abs()).sum::<f64>()
}

/// Unnormalized conditional operator ⟨φ_Y|ρ|φ_Y⟩ on subsystem X, obtained by contracting
/// the other factor with `phi`. `keep_a` keeps subsystem A (contracting B with `phi`).
pub(crate) fn conditional_operator(
    mat: &CMatrix,
    m: usize,
    n: usize,
    phi: &CVector,
    keep_a: bool,
) -> CMatrix {
    if keep_a {
        CMatrix::from_fn(m, m, |i, k| {
            let mut s = ZERO;
            for j in 0..n {
                for l in 0..n {
                    s += phi[j].conj() * mat[(i * n + j, k * n + l)] * phi[l];
                }
            }
            s
        })
    } else {
        CMatrix::from_fn(n, n, |j, l| {
            let mut s = ZERO;
            for i in 0..m {
                for k in 0..m {
                    s += phi[i].conj() * mat[(i * n + j, k * n + l)] * phi[k];
                }
            }
            s
        })
    }
}

/// Unnormalized conditional vector ⟨φ|ψ⟩ on the kept subsystem.
pub(crate) fn conditional_vector(
    psi: &CVector,
    m: usize,
    n: usize,
    phi: &CVector,
    keep_a: bool,
) -> CVector {
    if keep_a {
        CVector::from_fn(m, |i, _| (0..n).map(|j| phi[j].conj() * psi[i * n + j]).sum())
    } else {
        CVector::from_fn(n, |j, _| (0..m).map(|i| phi[i].conj() * psi[i * n + j]).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn tensor_of_basis_vectors() {
        let s = PureState::basis(2, 0).unwrap().tensor(&PureState::basis(2, 1).unwrap());
        assert_eq!(s.amplitudes(), &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert_eq!(s.bipartite_dims(), Some((2, 2)));
    }

    #[test]
    fn identity_tensor_identity() {
        let i2 = Observable::identity(2).unwrap();
        assert_eq!(i2.tensor(&i2), Observable::identity(4).unwrap());
    }

    #[test]
    fn double_bit_flip() {
        let xx = Observable::pauli_x().tensor(&Observable::pauli_x());
        let s00 = PureState::product_basis(2, 2, 0, 0).unwrap();
        let out = xx.matrix() * s00.vector();
        assert_eq!(out, PureState::product_basis(2, 2, 1, 1).unwrap().vector().clone());
    }

    #[test]
    fn tensor_associative_on_integer_matrices() {
        let a = Observable::from_real_rows(&[&[1.0, 2.0], &[2.0, -3.0]]).unwrap();
        let b = Observable::from_real_rows(&[&[0.0, 5.0], &[5.0, 1.0]]).unwrap();
        let c = Observable::from_real_rows(&[&[4.0, -1.0], &[-1.0, 7.0]]).unwrap();
        assert_eq!(a.tensor(&b).tensor(&c), a.tensor(&b.tensor(&c)));
    }

    #[test]
    fn pauli_spectra() {
        let z = eig_hermitian(&Observable::pauli_z());
        assert_eq!(z.values, vec![-1.0, 1.0]);
        assert_abs_diff_eq!(fidelity_pure(&z.vectors[0], &PureState::basis(2, 1).unwrap()), 1.0, epsilon = 1e-14);
        let x = eig_hermitian(&Observable::pauli_x());
        assert_abs_diff_eq!(x.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x.values[1], 1.0, epsilon = 1e-14);
        let minus = PureState::normalized(vec![c(1.0), c(-1.0)]).unwrap();
        assert_abs_diff_eq!(fidelity_pure(&x.vectors[0], &minus), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn random_hermitian_reconstruction() {
        let mut rng = rng_from_seed(3);
        for d in [2, 3, 6, 9] {
            let a = Observable::new(random_hermitian_with(&mut rng, d)).unwrap();
            let e = eig_hermitian(&a);
            let mut rebuilt = CMatrix::zeros(d, d);
            let mut resolution = CMatrix::zeros(d, d);
            for (lambda, v) in e.values.iter().zip(&e.vectors) {
                rebuilt += v.projector().scale(*lambda);
                resolution += v.projector();
            }
            assert!(linalg::max_abs(&(rebuilt - a.matrix())) < 1e-10);
            assert!(linalg::max_abs(&(resolution - CMatrix::identity(d, d))) < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rejects_invalid_objects() {
        assert!(matches!(PureState::new(vec![c(1.0), c(1.0)]), Err(Error::NotNormalized { .. })));
        assert!(matches!(PureState::new(vec![c(1.0)]), Err(Error::BadDimension(_))));
        let nonherm = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(Observable::new(nonherm.clone()), Err(Error::NotHermitian { .. })));
        let neg = CMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        assert!(matches!(DensityOperator::new(neg), Err(Error::NotPositive { .. })));
        let tr2 = CMatrix::identity(2, 2);
        assert!(matches!(DensityOperator::new(tr2), Err(Error::BadTrace { .. })));
        let mut bad = Tolerances::default();
        bad.det = 0.0;
        assert_eq!(bad.validate(), Err(Error::BadTolerance("det")));
    }

    #[test]
    fn partial_transpose_examples() {
        let rho_a = random_density(2, 2, 1).unwrap();
        let rho_b = random_density(3, 3, 2).unwrap();
        assert!(ppt_min_eigenvalue(&rho_a.tensor(&rho_b)).unwrap() > -1e-9);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = PureState::new(vec![c(0.0), c(h), c(-h), c(0.0)])
            .unwrap()
            .with_bipartite(2, 2)
            .unwrap()
            .to_density();
        assert_abs_diff_eq!(ppt_min_eigenvalue(&singlet).unwrap(), -0.5, epsilon = 1e-12);

        let p = 1.0 / 3.0;
        let mixed = DensityOperator::maximally_mixed(4).unwrap();
        let m = singlet.matrix().scale(p) + mixed.matrix().scale(1.0 - p);
        let werner = DensityOperator::new(m).unwrap().with_bipartite(2, 2).unwrap();
        assert_abs_diff_eq!(ppt_min_eigenvalue(&werner).unwrap(), 0.0, epsilon = 1e-12);

        let no_split = DensityOperator::maximally_mixed(4).unwrap();
        assert_eq!(partial_transpose(&no_split), Err(Error::NoBipartiteStructure));
    }

    #[test]
    fn gauge_fix_sets_leading_amplitude_real() {
        let s = random_pure(4, 11).unwrap();
        let g = s.gauge_fixed(1e-12);
        assert_eq!(g.amplitudes()[0].im, 0.0);
        assert!(g.amplitudes()[0].re > 0.0);
        assert_abs_diff_eq!(fidelity_pure(&s, &g), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn distance_measures() {
        let a = random_density(3, 2, 5).unwrap();
        assert_abs_diff_eq!(trace_distance(&a, &a), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity_mixed(&a, &a), 1.0, epsilon = 1e-8);
        let p0 = PureState::basis(2, 0).unwrap().to_density();
        let p1 = PureState::basis(2, 1).unwrap().to_density();
        assert_abs_diff_eq!(trace_distance(&p0, &p1), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn max_dim_limit() {
        assert!(PureState::basis(DEFAULT_MAX_DIM + 1, 0).is_err() || max_dim() > DEFAULT_MAX_DIM);
    }
}
