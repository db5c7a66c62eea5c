//! Separability inequality built from product weak values, the state families it is tested
//! on, spin operators for qudit settings, and threshold scans cross-checked by partial
//! transposition.
//!
//! For a separable `ρ` and any local operators `A`, `B` with post-selection `|φ_Aφ_B⟩`,
//!
//! ```text
//! |⟨φ_Aφ_B|(A⊗B)ρ|φ_Aφ_B⟩|² ≤ ⟨φ_A|AA†|φ_A⟩⟨φ_B|BB†|φ_B⟩ ⟨φ′_A|ρ_A^{φ_B}|φ′_A⟩⟨φ′_B|ρ_B^{φ_A}|φ′_B⟩
//! ```
//!
//! with `|φ′_X⟩ ∝ X†|φ_X⟩` and `ρ_X^{φ_Y} = ⟨φ_Y|ρ|φ_Y⟩`. Violation certifies entanglement.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::linalg::{self, CMatrix, CVector, I, ONE, ZERO};
use crate::hilbert::{conditional_operator, ppt_min_eigenvalue, DensityOperator, Observable, PureState, Tolerances};
use crate::product::{product_matrix_element, product_weak_value_local_mixed, LocalPostSelection};

/// Local operators and product post-selection. Either operator may be non-Hermitian
/// (ladder operators); it is then measured through its Hermitian and anti-Hermitian parts.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSetting {
    pub a: CMatrix,
    pub b: CMatrix,
    pub post: LocalPostSelection,
}

impl WitnessSetting {
    pub fn new(a: &Observable, b: &Observable, post: LocalPostSelection) -> Result<Self> {
        Self::with_matrices(a.matrix().clone(), b.matrix().clone(), post)
    }

    pub fn with_matrices(a: CMatrix, b: CMatrix, post: LocalPostSelection) -> Result<Self> {
        let (m, n) = post.dims();
        for (mat, d) in [(&a, m), (&b, n)] {
            if !mat.is_square() {
                return Err(Error::NotSquare { rows: mat.nrows(), cols: mat.ncols() });
            }
            if mat.nrows() != d {
                return Err(Error::DimensionMismatch { expected: d, got: mat.nrows() });
            }
            if !linalg::is_finite(mat) {
                return Err(Error::NonFinite);
            }
        }
        let s = Self { a, b, post };
        s.primed()?;
        Ok(s)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.post.dims()
    }

    /// `X†|φ_X⟩` for both sides, unnormalized, with their squared norms.
    fn primed(&self) -> Result<[(CVector, f64); 2]> {
        let va = self.a.adjoint() * self.post.phi_a.vector();
        let vb = self.b.adjoint() * self.post.phi_b.vector();
        let (na, nb) = (va.norm_squared(), vb.norm_squared());
        if na == 0.0 {
            return Err(Error::ZeroNormPhiPrime { side: 'A' });
        }
        if nb == 0.0 {
            return Err(Error::ZeroNormPhiPrime { side: 'B' });
        }
        Ok([(va, na), (vb, nb)])
    }

    /// Normalized `|φ′_A⟩`, `|φ′_B⟩`.
    pub fn primed_states(&self) -> Result<(PureState, PureState)> {
        let [(va, _), (vb, _)] = self.primed()?;
        Ok((PureState::from_unnormalized(va)?, PureState::from_unnormalized(vb)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessResult {
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
    pub margin: f64,
}

fn check_state(rho: &DensityOperator, s: &WitnessSetting) -> Result<()> {
    let dims = rho.bipartite_dims().ok_or(Error::NoBipartiteStructure)?;
    if dims != s.dims() {
        return Err(Error::DimensionMismatch { expected: s.dims().0 * s.dims().1, got: dims.0 * dims.1 });
    }
    Ok(())
}

/// `|⟨φ_Aφ_B|(A⊗B)ρ|φ_Aφ_B⟩|²` by dense evaluation.
pub fn witness_lhs(rho: &DensityOperator, s: &WitnessSetting) -> Result<f64> {
    check_state(rho, s)?;
    let ab = linalg::kron(&s.a, &s.b);
    Ok(product_matrix_element(&ab, rho, &s.post.joint()).norm_sqr())
}

/// Splits a square matrix into `H₀ + iH₁` with both parts Hermitian; zero parts are dropped.
fn hermitian_split(m: &CMatrix) -> Result<Vec<(Complex64, Observable)>> {
    let re = linalg::hermitian_part(m);
    let im = (m - m.adjoint()) * Complex64::new(0.0, -0.5);
    let mut out = Vec::with_capacity(2);
    for (coef, part) in [(ONE, re), (I, im)] {
        if linalg::max_abs(&part) > 0.0 {
            out.push((coef, Observable::new(linalg::hermitian_part(&part))?));
        }
    }
    Ok(out)
}

/// Same quantity as [`witness_lhs`], assembled from product weak values realized with local
/// weak values and the post-selection probability. Requires a nonvanishing probability.
pub fn witness_lhs_local(rho: &DensityOperator, s: &WitnessSetting, tol: &Tolerances) -> Result<f64> {
    check_state(rho, s)?;
    let p = rho.probability(&s.post.joint());
    if p <= tol.overlap {
        return Err(Error::ZeroPostSelectionProbability { probability: p });
    }
    let mut total = ZERO;
    for (ca, a) in hermitian_split(&s.a)? {
        for (cb, b) in hermitian_split(&s.b)? {
            total += ca * cb * product_weak_value_local_mixed(&a, &b, rho, &s.post, tol)?;
        }
    }
    Ok((total * p).norm_sqr())
}

/// `⟨φ_A|AA†|φ_A⟩⟨φ_B|BB†|φ_B⟩ ⟨φ′_A|ρ_A^{φ_B}|φ′_A⟩⟨φ′_B|ρ_B^{φ_A}|φ′_B⟩`.
pub fn witness_rhs(rho: &DensityOperator, s: &WitnessSetting) -> Result<f64> {
    check_state(rho, s)?;
    let (m, n) = s.dims();
    let [(va, na), (vb, nb)] = s.primed()?;
    let rho_a = conditional_operator(rho.matrix(), m, n, s.post.phi_b.vector(), true);
    let rho_b = conditional_operator(rho.matrix(), m, n, s.post.phi_a.vector(), false);
    let fa = linalg::sandwich(&va, &rho_a, &va).re / na;
    let fb = linalg::sandwich(&vb, &rho_b, &vb).re / nb;
    Ok(na * nb * fa.max(0.0) * fb.max(0.0))
}

/// Both sides of the inequality; `violated` requires `lhs > rhs + tol.oracle`.
pub fn evaluate_witness(rho: &DensityOperator, s: &WitnessSetting, tol: &Tolerances) -> Result<WitnessResult> {
    let lhs = witness_lhs(rho, s)?;
    let rhs = witness_rhs(rho, s)?;
    Ok(WitnessResult { lhs, rhs, violated: lhs > rhs + tol.oracle, margin: lhs - rhs })
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::BadParams(format!("{name} = {p} is outside [0, 1]")));
    }
    Ok(())
}

fn bipartite_density(mat: CMatrix, m: usize, n: usize) -> Result<DensityOperator> {
    DensityOperator::new(linalg::hermitian_part(&mat))?.with_bipartite(m, n)
}

fn ket(amps: &[Complex64]) -> CVector {
    CVector::from_column_slice(amps)
}

fn projector(v: &CVector) -> CMatrix {
    linalg::outer(v, v)
}

/// `(|01⟩ − |10⟩)/√2`.
pub fn singlet() -> CVector {
    ket(&[ZERO, c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2), ZERO])
}

/// `(|00⟩ + s|11⟩)/√2` with `s = ±1`.
fn even_bell(s: f64) -> CVector {
    ket(&[c(FRAC_1_SQRT_2), ZERO, ZERO, c(s * FRAC_1_SQRT_2)])
}

/// `(|01⟩ + s|10⟩)/√2` with `s = ±1`.
fn odd_bell(s: f64) -> CVector {
    ket(&[ZERO, c(FRAC_1_SQRT_2), c(s * FRAC_1_SQRT_2), ZERO])
}

/// Singlet with weight `p`, white noise with weight `1 − p`.
pub fn werner2(p: f64) -> Result<DensityOperator> {
    check_probability("p", p)?;
    let mat = projector(&singlet()).scale(p) + CMatrix::identity(4, 4).scale((1.0 - p) / 4.0);
    bipartite_density(mat, 2, 2)
}

/// `p|Φ⁺⟩⟨Φ⁺| + (1 − p)|Φ⁻⟩⟨Φ⁻|` with `|Φ^±⟩ = (|00⟩ ± |11⟩)/√2`.
pub fn two_bell(p: f64) -> Result<DensityOperator> {
    check_probability("p", p)?;
    let mat = projector(&even_bell(1.0)).scale(p) + projector(&even_bell(-1.0)).scale(1.0 - p);
    bipartite_density(mat, 2, 2)
}

fn normalized_pair(x: Complex64, y: Complex64, what: &str, tol: &Tolerances) -> Result<()> {
    let norm = x.norm_sqr() + y.norm_sqr();
    if (norm - 1.0).abs() > tol.norm {
        return Err(Error::BadParams(format!("{what} has |·|² sum {norm}, expected 1")));
    }
    Ok(())
}

/// `p|ψ⟩⟨ψ| + (1 − p)I/4` with `|ψ⟩ = a|00⟩ + b|11⟩`.
pub fn noisy_pure(p: f64, a: Complex64, b: Complex64) -> Result<DensityOperator> {
    check_probability("p", p)?;
    normalized_pair(a, b, "(a, b)", &Tolerances::default())?;
    let psi = ket(&[a, ZERO, ZERO, b]);
    let mat = projector(&psi).scale(p) + CMatrix::identity(4, 4).scale((1.0 - p) / 4.0);
    bipartite_density(mat, 2, 2)
}

/// `p|ψ₁⟩⟨ψ₁| + (1 − p)|ψ₂⟩⟨ψ₂|` with `|ψₖ⟩ = bₖ|01⟩ + cₖ|10⟩`.
pub fn pure_mixture(p: f64, first: (Complex64, Complex64), second: (Complex64, Complex64)) -> Result<DensityOperator> {
    check_probability("p", p)?;
    let tol = Tolerances::default();
    normalized_pair(first.0, first.1, "(b1, c1)", &tol)?;
    normalized_pair(second.0, second.1, "(b2, c2)", &tol)?;
    let one = ket(&[ZERO, first.0, first.1, ZERO]);
    let two = ket(&[ZERO, second.0, second.1, ZERO]);
    bipartite_density(projector(&one).scale(p) + projector(&two).scale(1.0 - p), 2, 2)
}

/// Bell-diagonal state. Weights in order: `(|00⟩+|11⟩)`, `(|00⟩−|11⟩)`, `(|01⟩+|10⟩)`,
/// `(|01⟩−|10⟩)`, each normalized.
pub fn four_bell(weights: [f64; 4]) -> Result<DensityOperator> {
    for (k, w) in weights.iter().enumerate() {
        check_probability(&format!("p{}", k + 1), *w)?;
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > Tolerances::default().norm {
        return Err(Error::BadParams(format!("weights sum to {sum}")));
    }
    let states = [even_bell(1.0), even_bell(-1.0), odd_bell(1.0), odd_bell(-1.0)];
    let mut mat = CMatrix::zeros(4, 4);
    for (w, s) in weights.iter().zip(&states) {
        mat += projector(s).scale(*w);
    }
    bipartite_density(mat, 2, 2)
}

/// Flip operator `V = Σ |i⟩⟨j| ⊗ |j⟩⟨i|` on `d ⊗ d`.
pub fn flip_operator(d: usize) -> CMatrix {
    let mut v = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            v[(i * d + j, j * d + i)] = ONE;
        }
    }
    v
}

/// `(1 − p)·2/(d²+d)·P⁺ + p·2/(d²−d)·P⁻` with `P^± = (I ± V)/2`.
pub fn qudit_werner(d: usize, p: f64) -> Result<DensityOperator> {
    check_probability("p", p)?;
    crate::hilbert::check_dim(d * d)?;
    let (df, id, v) = (d as f64, CMatrix::identity(d * d, d * d), flip_operator(d));
    let plus = (&id + &v).scale(0.5);
    let minus = (&id - &v).scale(0.5);
    let mat = plus.scale((1.0 - p) * 2.0 / (df * df + df)) + minus.scale(p * 2.0 / (df * df - df));
    bipartite_density(mat, d, d)
}

/// `p|Ψ⁺⟩⟨Ψ⁺| + (1 − p)I/d²` with `|Ψ⁺⟩ = Σ|ii⟩/√d`.
pub fn isotropic(d: usize, p: f64) -> Result<DensityOperator> {
    check_probability("p", p)?;
    crate::hilbert::check_dim(d * d)?;
    let mut psi = CVector::zeros(d * d);
    for i in 0..d {
        psi[i * d + i] = c(1.0 / (d as f64).sqrt());
    }
    let dd = (d * d) as f64;
    let mat = projector(&psi).scale(p) + CMatrix::identity(d * d, d * d).scale((1.0 - p) / dd);
    bipartite_density(mat, d, d)
}

/// One-parameter families used in threshold scans.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Werner2,
    TwoBell,
    NoisyPure { a: Complex64, b: Complex64 },
    PureMixture { first: (Complex64, Complex64), second: (Complex64, Complex64) },
    /// Bell-diagonal with weight `p` on Bell state `dominant` and `(1−p)/3` on the others.
    FourBell { dominant: usize },
    QuditWerner { d: usize },
    Isotropic { d: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Werner2 => "werner2",
            Family::TwoBell => "two-bell",
            Family::NoisyPure { .. } => "noisy-pure",
            Family::PureMixture { .. } => "pure-mixture",
            Family::FourBell { .. } => "four-bell",
            Family::QuditWerner { .. } => "qudit-werner",
            Family::Isotropic { .. } => "isotropic",
        }
    }

    /// Parses a family name and its fixed parameters (everything except `p`).
    ///
    /// `noisy-pure`: `a,b` (real); `pure-mixture`: `b1,c1,b2,c2` (real);
    /// `four-bell`: dominant index 1–4; `qudit-werner`, `isotropic`: `d`.
    pub fn parse(name: &str, params: &[f64]) -> Result<Family> {
        let need = |k: usize| {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::BadParams(format!("{name} takes {k} parameters, got {}", params.len())))
            }
        };
        let dim = |x: f64| {
            if x.fract() == 0.0 && x >= 2.0 {
                Ok(x as usize)
            } else {
                Err(Error::BadParams(format!("dimension {x} is not an integer ≥ 2")))
            }
        };
        let family = match name {
            "werner2" => need(0).map(|_| Family::Werner2)?,
            "two-bell" => need(0).map(|_| Family::TwoBell)?,
            "noisy-pure" => {
                need(2)?;
                Family::NoisyPure { a: c(params[0]), b: c(params[1]) }
            }
            "pure-mixture" => {
                need(4)?;
                Family::PureMixture { first: (c(params[0]), c(params[1])), second: (c(params[2]), c(params[3])) }
            }
            "four-bell" => {
                need(1)?;
                let k = params[0];
                if !(k.fract() == 0.0 && (1.0..=4.0).contains(&k)) {
                    return Err(Error::BadParams(format!("four-bell index {k} not in 1..4")));
                }
                Family::FourBell { dominant: k as usize - 1 }
            }
            "qudit-werner" => {
                need(1)?;
                Family::QuditWerner { d: dim(params[0])? }
            }
            "isotropic" => {
                need(1)?;
                Family::Isotropic { d: dim(params[0])? }
            }
            other => return Err(Error::BadParams(format!("unknown family `{other}`"))),
        };
        family.state(0.5)?;
        Ok(family)
    }

    pub fn state(&self, p: f64) -> Result<DensityOperator> {
        match self {
            Family::Werner2 => werner2(p),
            Family::TwoBell => two_bell(p),
            Family::NoisyPure { a, b } => noisy_pure(p, *a, *b),
            Family::PureMixture { first, second } => pure_mixture(p, *first, *second),
            Family::FourBell { dominant } => {
                check_probability("p", p)?;
                let mut w = [(1.0 - p) / 3.0; 4];
                *w.get_mut(*dominant).ok_or_else(|| Error::BadParams("four-bell index".into()))? = p;
                four_bell(w)
            }
            Family::QuditWerner { d } => qudit_werner(*d, p),
            Family::Isotropic { d } => isotropic(*d, p),
        }
    }

    /// Local dimension of each side.
    pub fn local_dim(&self) -> usize {
        match self {
            Family::QuditWerner { d } | Family::Isotropic { d } => *d,
            _ => 2,
        }
    }

    /// Setting under which this family is tested.
    pub fn default_setting(&self) -> Result<WitnessSetting> {
        let sx = Observable::pauli_x();
        let qubit = |i, j| WitnessSetting::new(&sx, &sx, LocalPostSelection::basis(2, 2, i, j)?);
        match self {
            Family::Werner2 => qubit(1, 0),
            Family::TwoBell | Family::NoisyPure { .. } => qubit(1, 1),
            Family::PureMixture { .. } => qubit(0, 1),
            Family::FourBell { dominant } => qubit(0, usize::from(*dominant >= 2)),
            Family::QuditWerner { d: 2 } => qubit(1, 0),
            Family::QuditWerner { d: 3 } => Ok(werner_witness_setting_spin(SpinVariant::Spin1Ladder)?.setting),
            Family::QuditWerner { d: 4 } => Ok(werner_witness_setting_spin(SpinVariant::Spin32Ladder)?.setting),
            Family::QuditWerner { d } => Err(Error::BadParams(format!("no qudit Werner setting for d = {d}"))),
            Family::Isotropic { d } => {
                let s = cyclic_flip(*d)?;
                WitnessSetting::new(&s, &s, LocalPostSelection::basis(*d, *d, 0, 0)?)
            }
        }
    }

    /// The parameter above which the family is entangled and detected, where known in closed form.
    pub fn expected_threshold(&self) -> Option<f64> {
        match self {
            Family::Werner2 => Some(1.0 / 3.0),
            Family::TwoBell | Family::FourBell { .. } => Some(0.5),
            Family::NoisyPure { a, b } => Some(1.0 / (1.0 + 4.0 * (a * b).norm())),
            Family::PureMixture { .. } => None,
            Family::QuditWerner { d } => Some(werner_detection_threshold(*d)),
            Family::Isotropic { d } => Some(1.0 / (*d as f64 + 1.0)),
        }
    }
}

/// `X + X†` for the cyclic shift `X|i⟩ = |i+1 mod d⟩`; moves `|0⟩` entirely off itself.
pub fn cyclic_flip(d: usize) -> Result<Observable> {
    let x = crate::tomography::shift_matrix(d);
    Observable::new(&x + x.adjoint())
}

/// `3(d−1)/(2(2d−1))`.
pub fn werner_detection_threshold(d: usize) -> f64 {
    let d = d as f64;
    3.0 * (d - 1.0) / (2.0 * (2.0 * d - 1.0))
}

/// Left minus right side of the inequality for the qudit Werner state when the setting maps
/// `⟨i′_A i′_B|` to `⟨j′_A j′_B|`; `overlaps = (|⟨j′_A|i′_B⟩|, |⟨j′_B|i′_A⟩|)`.
pub fn werner_gap(d: usize, p: f64, overlaps: (f64, f64)) -> Result<f64> {
    if d < 2 {
        return Err(Error::BadParams(format!("d = {d} < 2")));
    }
    check_probability("p", p)?;
    check_probability("overlap", overlaps.0)?;
    check_probability("overlap", overlaps.1)?;
    let df = d as f64;
    let lp = (1.0 - p) / (df * df + df) + p / (df * df - df);
    let lm = (1.0 - p) / (df * df + df) - p / (df * df - df);
    let (x, y) = overlaps;
    Ok((lm * x * y).powi(2) - (lp + lm * x * x) * (lp + lm * y * y))
}

/// Spin-j matrices in the basis `|0⟩ = |m=j⟩, …, |2j⟩ = |m=−j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub sx: Observable,
    pub sy: Observable,
    pub sz: Observable,
    pub plus: CMatrix,
    pub minus: CMatrix,
}

pub fn spin_operators(j: f64) -> Result<SpinOperators> {
    let twice = 2.0 * j;
    if !(j.is_finite() && twice >= 1.0 && twice.fract() == 0.0) {
        return Err(Error::BadSpin(j));
    }
    let d = twice as usize + 1;
    crate::hilbert::check_dim(d)?;
    let m = |k: usize| j - k as f64;
    let mut plus = CMatrix::zeros(d, d);
    for k in 1..d {
        plus[(k - 1, k)] = c((j * (j + 1.0) - m(k) * (m(k) + 1.0)).sqrt());
    }
    let minus = plus.transpose();
    let sx = CMatrix::from_fn(d, d, |r, s| c((plus[(r, s)].re + minus[(r, s)].re) / 2.0));
    let sy = CMatrix::from_fn(d, d, |r, s| Complex64::new(0.0, (minus[(r, s)].re - plus[(r, s)].re) / 2.0));
    let sz = CMatrix::from_fn(d, d, |r, s| if r == s { c(m(r)) } else { ZERO });
    Ok(SpinOperators { sx: Observable::new(sx)?, sy: Observable::new(sy)?, sz: Observable::new(sz)?, plus, minus })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinVariant {
    /// Spin 1: `⟨2|S_x ∝ ⟨1|` on A, `⟨1|S₊ ∝ ⟨2|` on B.
    Spin1Ladder,
    /// Spin 1: `(⟨0|+⟨2|)S_x ∝ ⟨1|` on A, `⟨1|S_x ∝ ⟨0|+⟨2|` on B.
    Spin1Sx,
    /// Spin 3/2: `⟨3|J_x ∝ ⟨2|` on A, `⟨2|J₊ ∝ ⟨3|` on B.
    Spin32Ladder,
}

impl std::str::FromStr for SpinVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spin1_ladder" => Ok(SpinVariant::Spin1Ladder),
            "spin1_sx" => Ok(SpinVariant::Spin1Sx),
            "spin32_ladder" => Ok(SpinVariant::Spin32Ladder),
            other => Err(Error::BadVariant(other.into())),
        }
    }
}

/// A qudit Werner setting with its bra states and the two overlaps that enter the gap.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinWitness {
    pub setting: WitnessSetting,
    pub i_a: PureState,
    pub j_a: PureState,
    pub i_b: PureState,
    pub j_b: PureState,
    /// `(|⟨j′_A|i′_B⟩|, |⟨j′_B|i′_A⟩|)`.
    pub overlaps: (f64, f64),
}

pub fn werner_witness_setting_spin(variant: SpinVariant) -> Result<SpinWitness> {
    let (j, ca, cb, ia, ib) = match variant {
        SpinVariant::Spin1Ladder => {
            let s = spin_operators(1.0)?;
            (1.0, s.sx.matrix().clone(), s.plus, PureState::basis(3, 2)?, PureState::basis(3, 1)?)
        }
        SpinVariant::Spin1Sx => {
            let s = spin_operators(1.0)?;
            let ends = PureState::normalized(vec![ONE, ZERO, ONE])?;
            (1.0, s.sx.matrix().clone(), s.sx.matrix().clone(), ends, PureState::basis(3, 1)?)
        }
        SpinVariant::Spin32Ladder => {
            let s = spin_operators(1.5)?;
            (1.5, s.sx.matrix().clone(), s.plus, PureState::basis(4, 3)?, PureState::basis(4, 2)?)
        }
    };
    let d = (2.0 * j) as usize + 1;
    debug_assert_eq!(ia.dim(), d);
    let setting = WitnessSetting::with_matrices(ca, cb, LocalPostSelection::new(ia.clone(), ib.clone()))?;
    let (j_a, j_b) = setting.primed_states()?;
    let overlaps = (j_a.inner(&ib).norm(), j_b.inner(&ia).norm());
    Ok(SpinWitness { setting, i_a: ia, j_a, i_b: ib, j_b, overlaps })
}

/// Bisection tolerance on the parameter.
pub const THRESHOLD_TOL: f64 = 1e-6;

/// Finds the first grid point where `flag` holds and bisects the preceding interval down to
/// `tol_p`. Grid points are evaluated in parallel.
fn scan_first<F>(grid: &[f64], tol_p: f64, flag: F) -> Result<f64>
where
    F: Fn(f64) -> Result<bool> + Sync,
{
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::BadParams("grid must be strictly ascending".into()));
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(grid.len().max(1));
    let chunk = grid.len().div_ceil(threads.max(1)).max(1);
    let flags: Vec<Result<bool>> = std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(|&p| flag(p)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("scan worker panicked")).collect()
    });
    let mut first = None;
    for (k, f) in flags.into_iter().enumerate() {
        if f? {
            first = Some(k);
            break;
        }
    }
    let k = first.ok_or(Error::NoViolationOnGrid)?;
    if k == 0 {
        return Ok(grid[0]);
    }
    let (mut lo, mut hi) = (grid[k - 1], grid[k]);
    while hi - lo > tol_p {
        let mid = 0.5 * (lo + hi);
        if flag(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest parameter on `grid` at which the witness is violated, refined by bisection to
/// [`THRESHOLD_TOL`]. Returns the first grid point if it is already violated.
pub fn threshold_scan<F>(family: F, s: &WitnessSetting, grid: &[f64], tol: &Tolerances) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityOperator> + Sync,
{
    scan_first(grid, THRESHOLD_TOL, |p| Ok(evaluate_witness(&family(p)?, s, tol)?.violated))
}

/// Same scan with the partial-transpose test `λ_min(ρ^{T_B}) < −tol.psd` as the flag.
pub fn ppt_threshold_scan<F>(family: F, grid: &[f64], tol: &Tolerances) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityOperator> + Sync,
{
    scan_first(grid, THRESHOLD_TOL / 4.0, |p| Ok(ppt_min_eigenvalue(&family(p)?)? < -tol.psd))
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::BadParams(format!("grid {lo}:{hi}:{steps} is invalid")));
    }
    Ok((0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect())
}

/// Witness and PPT data for one state, as reported by the command line.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub family: String,
    pub params: Vec<f64>,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
    pub margin: f64,
    pub ppt_min_eigenvalue: f64,
}

pub fn witness_report(family: &Family, params: &[f64], p: f64, s: &WitnessSetting, tol: &Tolerances) -> Result<WitnessReport> {
    let rho = family.state(p)?;
    let r = evaluate_witness(&rho, s, tol)?;
    Ok(WitnessReport {
        family: family.name().into(),
        params: params.to_vec(),
        p,
        lhs: r.lhs,
        rhs: r.rhs,
        violated: r.violated,
        margin: r.margin,
        ppt_min_eigenvalue: ppt_min_eigenvalue(&rho)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{random_observable, random_product_state_with, rng_from_seed, Tensor};
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn sxsx(i: usize, j: usize) -> WitnessSetting {
        let sx = Observable::pauli_x();
        WitnessSetting::new(&sx, &sx, LocalPostSelection::basis(2, 2, i, j).unwrap()).unwrap()
    }

    #[test]
    fn lhs_rhs_examples() {
        let flat = DensityOperator::maximally_mixed(4).unwrap().with_bipartite(2, 2).unwrap();
        assert_abs_diff_eq!(witness_lhs(&flat, &sxsx(1, 0)).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(witness_rhs(&flat, &sxsx(1, 0)).unwrap(), 1.0 / 16.0, epsilon = 1e-15);

        let singlet = werner2(1.0).unwrap();
        assert_abs_diff_eq!(witness_lhs(&singlet, &sxsx(1, 0)).unwrap(), 0.25, epsilon = 1e-15);

        let id = Observable::identity(2).unwrap();
        let post = LocalPostSelection::basis(2, 2, 0, 1).unwrap();
        let s = WitnessSetting::new(&id, &id, post.clone()).unwrap();
        let rho = werner2(0.3).unwrap();
        let p = rho.probability(&post.joint());
        assert_abs_diff_eq!(witness_lhs(&rho, &s).unwrap(), p * p, epsilon = 1e-15);

        let prod = crate::hilbert::random_pure(2, 1).unwrap().tensor(&crate::hilbert::random_pure(2, 2).unwrap());
        let prod = prod.to_density().with_bipartite(2, 2).unwrap();
        let s = WitnessSetting::new(&id, &id, LocalPostSelection::new(prod_factor(1), prod_factor(3))).unwrap();
        assert_abs_diff_eq!(witness_lhs(&prod, &s).unwrap(), witness_rhs(&prod, &s).unwrap(), epsilon = 1e-14);
    }

    fn prod_factor(seed: u64) -> PureState {
        crate::hilbert::random_pure(2, seed).unwrap()
    }

    #[test]
    fn local_path_agrees() {
        for p in [0.1, 0.5, 0.9] {
            let rho = werner2(p).unwrap();
            let s = sxsx(1, 0);
            let local = witness_lhs_local(&rho, &s, &tol()).unwrap();
            assert_abs_diff_eq!(local, witness_lhs(&rho, &s).unwrap(), epsilon = 1e-12);
        }
        let rho = qudit_werner(3, 0.8).unwrap();
        let mut s = werner_witness_setting_spin(SpinVariant::Spin1Ladder).unwrap().setting;
        let local = witness_lhs_local(&rho, &s, &tol()).unwrap();
        assert_abs_diff_eq!(local, witness_lhs(&rho, &s).unwrap(), epsilon = 1e-12);
        s.a = s.a.clone() * Complex64::new(0.3, 0.7);
        let local = witness_lhs_local(&rho, &s, &tol()).unwrap();
        assert_abs_diff_eq!(local, witness_lhs(&rho, &s).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn werner_examples() {
        assert!(evaluate_witness(&werner2(0.5).unwrap(), &sxsx(1, 0), &tol()).unwrap().violated);
        assert!(!evaluate_witness(&werner2(0.2).unwrap(), &sxsx(1, 0), &tol()).unwrap().violated);
        let grid = linear_grid(0.0, 1.0, 21).unwrap();
        let t = threshold_scan(werner2, &sxsx(1, 0), &grid, &tol()).unwrap();
        assert_abs_diff_eq!(t, 1.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn zero_norm_primed_state() {
        let sz = Observable::pauli_z();
        let zero = Observable::new(CMatrix::zeros(2, 2)).unwrap();
        let post = LocalPostSelection::basis(2, 2, 0, 0).unwrap();
        assert!(matches!(WitnessSetting::new(&sz, &zero, post), Err(Error::ZeroNormPhiPrime { side: 'B' })));
    }

    #[test]
    fn family_constructors() {
        let s = singlet();
        assert!(linalg::max_abs(&(werner2(1.0).unwrap().matrix() - projector(&s))) < 1e-15);
        assert!(linalg::max_abs(&(four_bell([1.0, 0.0, 0.0, 0.0]).unwrap().matrix() - projector(&even_bell(1.0)))) < 1e-15);
        for p in [0.0, 0.3, 1.0] {
            let q = qudit_werner(2, p).unwrap();
            // on two qubits P⁻ is the singlet projector and P⁺ its complement
            let expect = projector(&s).scale(p) + (CMatrix::identity(4, 4) - projector(&s)).scale((1.0 - p) / 3.0);
            assert!(linalg::max_abs(&(q.matrix() - expect)) < 1e-15);
        }
        assert!(matches!(werner2(1.2), Err(Error::BadParams(_))));
        assert!(matches!(four_bell([0.5, 0.5, 0.5, 0.0]), Err(Error::BadParams(_))));
        assert!(matches!(noisy_pure(0.5, c(1.0), c(1.0)), Err(Error::BadParams(_))));
    }

    #[test]
    fn gap_examples() {
        assert_abs_diff_eq!(werner_gap(3, 0.6, (1.0, 1.0)).unwrap(), 0.0, epsilon = 1e-12);
        assert!(werner_gap(2, 1.0, (1.0, 1.0)).unwrap() > 0.0);
        for p in [0.0, 0.4, 1.0] {
            let lp = (1.0 - p) / 12.0 + p / 6.0;
            assert_abs_diff_eq!(werner_gap(3, p, (0.0, 0.0)).unwrap(), -lp * lp, epsilon = 1e-15);
        }
    }

    #[test]
    fn spin_matrices() {
        let s = spin_operators(1.0).unwrap();
        let h = FRAC_1_SQRT_2;
        let sx = Observable::from_real_rows(&[&[0.0, h, 0.0], &[h, 0.0, h], &[0.0, h, 0.0]]).unwrap();
        assert_eq!(s.sx, sx);
        let j = spin_operators(1.5).unwrap();
        let jz: Vec<f64> = (0..4).map(|k| j.sz.matrix()[(k, k)].re).collect();
        assert_eq!(jz, vec![1.5, 0.5, -0.5, -1.5]);
        for spin in [1.0, 1.5, 2.0] {
            let s = spin_operators(spin).unwrap();
            let (x, y, z) = (s.sx.matrix(), s.sy.matrix(), s.sz.matrix());
            let comm = x * y - y * x - z * I;
            assert!(linalg::max_abs(&comm) < 1e-12);
        }
        assert!(matches!(spin_operators(0.7), Err(Error::BadSpin(_))));
    }

    #[test]
    fn spin_settings_have_unit_overlaps() {
        for v in ["spin1_ladder", "spin1_sx", "spin32_ladder"] {
            let w = werner_witness_setting_spin(v.parse().unwrap()).unwrap();
            assert_abs_diff_eq!(w.overlaps.0, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(w.overlaps.1, 1.0, epsilon = 1e-12);
        }
        assert!(matches!("spin2".parse::<SpinVariant>(), Err(Error::BadVariant(_))));
    }

    #[test]
    fn isotropic_and_noisy_thresholds() {
        let grid = linear_grid(0.0, 1.0, 41).unwrap();
        let fam = Family::Isotropic { d: 3 };
        let t = threshold_scan(|p| fam.state(p), &fam.default_setting().unwrap(), &grid, &tol()).unwrap();
        assert_abs_diff_eq!(t, 0.25, epsilon = 1e-6);
        let fam = Family::NoisyPure { a: c(FRAC_1_SQRT_2), b: c(FRAC_1_SQRT_2) };
        let t = threshold_scan(|p| fam.state(p), &fam.default_setting().unwrap(), &grid, &tol()).unwrap();
        assert_abs_diff_eq!(t, 1.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn product_states_never_violate() {
        let mut rng = rng_from_seed(21);
        for seed in 0..50 {
            let rho = random_product_state_with(&mut rng, 2, 3).unwrap().to_density().with_bipartite(2, 3).unwrap();
            let a = random_observable(2, seed).unwrap();
            let b = random_observable(3, seed + 100).unwrap();
            let post = LocalPostSelection::new(crate::hilbert::random_pure(2, seed).unwrap(), crate::hilbert::random_pure(3, seed + 7).unwrap());
            let s = WitnessSetting::new(&a, &b, post).unwrap();
            assert!(!evaluate_witness(&rho, &s, &tol()).unwrap().violated);
        }
    }

    #[test]
    fn no_violation_on_grid() {
        let grid = linear_grid(0.0, 0.3, 5).unwrap();
        assert!(matches!(threshold_scan(werner2, &sxsx(1, 0), &grid, &tol()), Err(Error::NoViolationOnGrid)));
    }
}
