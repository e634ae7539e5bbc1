//! Seeded random draws: states, Hermitian operators and coefficient matrices.
//!
//! A [`SeedStream`] derives one independent ChaCha stream per purpose from a
//! single root seed, so every randomized quantity in a run is reproducible
//! from `(root, stream id)` alone.

use faer::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::operator::{DensityMatrix, Operator};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    root: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Generator for stream `id`; distinct ids never share output.
    pub fn rng(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(id);
        rng
    }
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix with i.i.d. unit-variance complex normal entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<c64> {
    Mat::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Haar-random unit vector.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Col<c64> {
    let v = Col::from_fn(dim, |_| complex_normal(rng));
    let norm = v.norm_l2();
    Col::from_fn(dim, |i| v[i] / norm)
}

/// GUE-like Hermitian operator `(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let g = ginibre(dim, dim, rng);
    Operator::from_fn(dim, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5)
}

/// Positive semidefinite `G G† / m` (full rank almost surely).
pub fn random_psd<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Mat<c64> {
    let g = ginibre(dim, dim, rng);
    linalg::scaled(linalg::mm(g.as_ref(), g.adjoint()).as_ref(), c64::new(1.0 / dim as f64, 0.0))
}

/// Density matrix `W W† / Tr(W W†)` with `W` of shape `dim × rank`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let w = ginibre(dim, rank.max(1), rng);
    let rho = linalg::mm(w.as_ref(), w.adjoint());
    let tr = linalg::trace(rho.as_ref()).re;
    DensityMatrix::from_op_unchecked(Operator::from_mat_unchecked(linalg::scaled(
        rho.as_ref(),
        c64::new(1.0 / tr, 0.0),
    )))
}

/// Random density matrix supported on the column span of an orthonormal
/// `basis`, including coherences between basis states.
pub fn random_density_in<R: Rng + ?Sized>(basis: MatRef<'_, c64>, rng: &mut R) -> DensityMatrix {
    let k = basis.ncols();
    let rank = rng.random_range(1..=k.max(1));
    let inner = random_density(k, rank, rng);
    let rho = linalg::mm(basis, linalg::mm(inner.as_ref(), basis.adjoint()).as_ref());
    DensityMatrix::from_op_unchecked(Operator::from_mat_unchecked(rho))
}
