//! Seeded random instances for self-tests and property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::linalg::{hermitian_eigendecomposition, ComplexMatrix, DensityOperator, SpectralObservable};
use crate::measurement::DetectionModel;
use crate::{Complex64, Result};

fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// `(A + A^dagger) / 2` with entries uniform in the unit square.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let data = (0..dim * dim).map(|_| random_complex(rng)).collect();
    ComplexMatrix::new(dim, dim, data).expect("dim > 0").hermitian_part()
}

/// `G G^dagger / Tr` for a random `dim x rank` matrix `G`, with random rank.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<DensityOperator> {
    let rank = rng.gen_range(1..=dim);
    let g = ComplexMatrix::new(dim, rank, (0..dim * rank).map(|_| random_complex(rng)).collect())?;
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityOperator::new(m.hermitian_part().scale_real(1.0 / tr))
}

/// Random pure state.
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<DensityOperator> {
    let psi: Vec<Complex64> = (0..dim).map(|_| random_complex(rng)).collect();
    DensityOperator::from_pure(&psi)
}

/// Random eigenbasis, with eigenvectors grouped into a random number of
/// (possibly degenerate) eigenspaces carrying distinct integer-spaced eigenvalues.
pub fn random_observable<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<SpectralObservable> {
    let basis = hermitian_eigendecomposition(&random_hermitian(rng, dim))?;
    let groups = rng.gen_range(1..=dim);
    let mut assignment: Vec<usize> = (0..dim).map(|k| if k < groups { k } else { rng.gen_range(0..groups) }).collect();
    assignment.shuffle(rng);
    let offset = rng.gen_range(-3i32..=0);
    let mut eigenvalues = Vec::with_capacity(groups);
    let mut projectors = Vec::with_capacity(groups);
    for g in 0..groups {
        let mut p = ComplexMatrix::zeros(dim, dim);
        for (k, _) in assignment.iter().enumerate().filter(|(_, &a)| a == g) {
            p = &p + &ComplexMatrix::outer(&basis.vector(k));
        }
        eigenvalues.push(f64::from(offset + g as i32));
        projectors.push(p);
    }
    SpectralObservable::new(eigenvalues, projectors)
}

/// Nonempty random subset of the spectrum.
pub fn random_sigma<R: Rng + ?Sized>(rng: &mut R, obs: &SpectralObservable) -> Vec<f64> {
    let values = obs.eigenvalues();
    let mut sigma: Vec<f64> = values.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    if sigma.is_empty() {
        sigma.push(*values.choose(rng).expect("nonempty spectrum"));
    }
    sigma
}

/// Detection map with a random default and random per-eigenvalue entries for `state_label`.
pub fn random_detection<R: Rng + ?Sized>(rng: &mut R, obs: &SpectralObservable, state_label: &str) -> Result<DetectionModel> {
    let mut dm = DetectionModel::uniform(rng.gen_range(0.0..=1.0))?;
    for &lam in obs.eigenvalues() {
        if rng.gen_bool(0.8) {
            dm.set(state_label, lam, rng.gen_range(0.0..=1.0))?;
        }
    }
    Ok(dm)
}
