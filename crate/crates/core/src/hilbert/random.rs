//! Seeded random instances. Every generator is deterministic for a fixed seed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::linalg::{CMatrix, CVector};
use super::{check_dim, DensityOperator, Observable, PureState, Tensor};
use crate::error::{Error, Result};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Normalized vector of i.i.d. standard complex Gaussians.
pub fn random_pure(d: usize, seed: u64) -> Result<PureState> {
    random_pure_with(&mut rng_from_seed(seed), d)
}

pub fn random_pure_with<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<PureState> {
    check_dim(d)?;
    loop {
        let v = CVector::from_fn(d, |_, _| gaussian(rng));
        if v.norm() > 1e-8 {
            return PureState::from_unnormalized(v);
        }
    }
}

/// `G G† / Tr(G G†)` with `G` a `d x rank` complex Gaussian matrix.
pub fn random_density(d: usize, rank: usize, seed: u64) -> Result<DensityOperator> {
    random_density_with(&mut rng_from_seed(seed), d, rank)
}

pub fn random_density_with<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    rank: usize,
) -> Result<DensityOperator> {
    check_dim(d)?;
    if rank == 0 || rank > d {
        return Err(Error::BadDimension(format!("rank {rank} not in 1..={d}")));
    }
    let g = CMatrix::from_fn(d, rank, |_, _| gaussian(rng));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let mut m = m.unscale(tr);
    // exact Hermiticity after rounding
    for i in 0..d {
        m[(i, i)].im = 0.0;
        for j in 0..i {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    DensityOperator::new(m)
}

/// Hermitian matrix `(G + G†)/2` with Gaussian `G`.
pub fn random_hermitian_with<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let mut h = (&g + g.adjoint()).scale(0.5);
    for i in 0..d {
        h[(i, i)].im = 0.0;
        for j in 0..i {
            h[(j, i)] = h[(i, j)].conj();
        }
    }
    h
}

pub fn random_observable(d: usize, seed: u64) -> Result<Observable> {
    check_dim(d)?;
    Observable::new(random_hermitian_with(&mut rng_from_seed(seed), d))
}

/// Product of two independent random pure states, tagged `m x n`.
pub fn random_product_state_with<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    n: usize,
) -> Result<PureState> {
    Ok(random_pure_with(rng, m)?.tensor(&random_pure_with(rng, n)?))
}
