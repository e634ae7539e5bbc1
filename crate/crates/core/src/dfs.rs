//! Decoherence-free subspaces: common kernels for semisimple algebras and
//! simultaneous degenerate eigenspaces in general.

use faer::prelude::*;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{structure_constants, LieOptions};
use crate::lindblad::LindbladGenerator;
use crate::linalg;
use crate::models::{build_collective, ErrorGeneratorSet, ModelKind};
use crate::operator::{kernel_basis, DensityMatrix, Operator};
use crate::sampling;

/// Eigenvalues closer than this fraction of the largest magnitude are merged.
pub const CLUSTER_GAP: f64 = 1e-7;
/// Largest register for the numerical dimension count.
pub const MAX_NUMERIC_QUBITS: usize = 12;
/// Dimension above which [`find_dfs_semisimple`] trusts the model class
/// instead of recomputing the Killing form.
const LIE_CHECK_MAX_DIM: usize = 256;

#[derive(Clone, Debug)]
pub struct DfSubspace {
    /// Orthonormal columns, `N × N₀`.
    pub basis: Mat<c64>,
    /// Shared eigenvalues `c_α`, one per generator.
    pub shared_eigenvalues: Vec<c64>,
}

impl DfSubspace {
    pub fn empty(dim: usize, num_generators: usize) -> Self {
        Self {
            basis: Mat::zeros(dim, 0),
            shared_eigenvalues: vec![c64::new(0.0, 0.0); num_generators],
        }
    }

    /// `N₀`
    pub fn dimension(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.dimension() == 0
    }

    /// `log₂ N₀`, absent for an empty subspace.
    pub fn encoded_qubits(&self) -> Option<f64> {
        (!self.is_empty()).then(|| (self.dimension() as f64).log2())
    }

    pub fn projector(&self) -> Mat<c64> {
        linalg::projector(self.basis.as_ref())
    }

    pub fn orthonormality_defect(&self) -> f64 {
        linalg::orthonormality_defect(self.basis.as_ref())
    }

    /// Largest `‖F_α|i⟩ − c_α|i⟩‖` over generators and basis vectors.
    pub fn eigen_residual(&self, generators: &[Operator]) -> f64 {
        let mut worst = 0.0f64;
        for (op, &c) in generators.iter().zip(&self.shared_eigenvalues) {
            let mut r = linalg::mm(op.as_ref(), self.basis.as_ref());
            r -= &self.basis * faer::Scale(c);
            for j in 0..r.ncols() {
                worst = worst.max(r.col(j).norm_l2());
            }
        }
        worst
    }

    pub fn to_dto(&self) -> DfSubspaceDto {
        DfSubspaceDto {
            dimension: self.dimension(),
            encoded_qubits: self.encoded_qubits(),
            shared_eigenvalues: self.shared_eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            basis: (0..self.dimension())
                .map(|j| {
                    (0..self.basis.nrows())
                        .flat_map(|i| {
                            let z = self.basis[(i, j)];
                            [z.re, z.im]
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DfSubspaceDto {
    pub dimension: usize,
    pub encoded_qubits: Option<f64>,
    pub shared_eigenvalues: Vec<[f64; 2]>,
    /// One entry per basis vector, interleaved `re, im` per component.
    pub basis: Vec<Vec<f64>>,
}

/// `‖P_a − P_b‖_F` for two orthonormal bases.
pub fn projector_distance(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let d = linalg::projector(a) - linalg::projector(b);
    linalg::frobenius(d.as_ref())
}

/// Common kernel of all generators, valid when the algebra is semisimple.
///
/// For a set that is not semisimple this warns and falls back to
/// [`find_dfs_general`], returning the largest subspace found there.
pub fn find_dfs_semisimple(gens: &ErrorGeneratorSet, tol: f64) -> Result<DfSubspace> {
    let semisimple = match gens.spec().kind {
        // Direct sums of su(2) or su(2^K): semisimple by construction.
        ModelKind::Total | ModelKind::Independent | ModelKind::Collective | ModelKind::Cluster => true,
        ModelKind::Custom if gens.dim() <= LIE_CHECK_MAX_DIM => {
            structure_constants(gens, LieOptions::default())?.is_semisimple()
        }
        ModelKind::Custom => {
            log::warn!("custom set too large for the Killing test; using the general eigenspace finder");
            false
        }
    };
    if !semisimple {
        log::warn!("generator algebra is not semisimple; using the general eigenspace finder");
        let all = find_dfs_general(gens, tol)?;
        return Ok(all
            .into_iter()
            .max_by_key(|s| s.dimension())
            .unwrap_or_else(|| DfSubspace::empty(gens.dim(), gens.len())));
    }
    Ok(DfSubspace {
        basis: kernel_basis(gens.generators(), tol)?,
        shared_eigenvalues: vec![c64::new(0.0, 0.0); gens.len()],
    })
}

/// Every simultaneous eigenspace of the generators, one per label `c`.
///
/// Generators are processed in order: each current candidate space `V`
/// is split by the eigenvalues of `V†FV`, and each cluster `c` is refined
/// to the kernel of `(F − c)V`.
pub fn find_dfs_general(gens: &ErrorGeneratorSet, tol: f64) -> Result<Vec<DfSubspace>> {
    find_dfs_general_of(gens.generators(), tol)
}

pub fn find_dfs_general_of(generators: &[Operator], tol: f64) -> Result<Vec<DfSubspace>> {
    let first = generators.first().ok_or(Error::EmptyStack)?;
    let n = first.dim();
    let mut spaces: Vec<(Mat<c64>, Vec<c64>)> = vec![(Mat::identity(n, n), Vec::new())];
    for op in generators {
        if op.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: op.dim(),
            });
        }
        let threshold = tol * op.frobenius_norm().max(1.0);
        let hermitian = op.hermiticity_defect() <= 1e-12 * op.frobenius_norm().max(1.0);
        let mut next = Vec::new();
        for (v, label) in spaces {
            let fv = linalg::mm(op.as_ref(), v.as_ref());
            let compressed = linalg::mm(v.adjoint(), fv.as_ref());
            let eigenvalues: Vec<c64> = if hermitian {
                let sym = Mat::from_fn(compressed.nrows(), compressed.ncols(), |i, j| {
                    (compressed[(i, j)] + compressed[(j, i)].conj()) * 0.5
                });
                linalg::hermitian_eigenvalues(sym.as_ref())?
                    .into_iter()
                    .map(|x| c64::new(x, 0.0))
                    .collect()
            } else {
                compressed
                    .eigenvalues()
                    .map_err(|e| Error::Decomposition(format!("{e:?}")))?
            };
            // Floor the clustering scale at the RMS eigenvalue of F, so that a
            // compressed block that is numerically zero forms one cluster.
            let floor = op.frobenius_norm() / (n as f64).sqrt();
            for c in cluster(&eigenvalues, floor) {
                let mut shifted = fv.clone();
                shifted -= &v * faer::Scale(c);
                let null = linalg::null_space(shifted.as_ref(), threshold)?;
                if null.ncols() == 0 {
                    continue;
                }
                let refined = linalg::orthonormalize(linalg::mm(v.as_ref(), null.as_ref()).as_ref());
                let mut l = label.clone();
                l.push(c);
                next.push((refined, l));
            }
        }
        spaces = next;
    }
    Ok(spaces
        .into_iter()
        .map(|(basis, shared_eigenvalues)| DfSubspace {
            basis,
            shared_eigenvalues,
        })
        .collect())
}

/// Groups eigenvalues whose distance is below `CLUSTER_GAP · max(max|λ|, floor)`
/// and returns the cluster means in first-appearance order of a sorted scan.
fn cluster(values: &[c64], floor: f64) -> Vec<c64> {
    let scale = values.iter().fold(floor, |m, z| m.max(z.norm()));
    let gap = CLUSTER_GAP * scale;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut groups: Vec<Vec<c64>> = Vec::new();
    for z in sorted {
        match groups.iter_mut().find(|g| g.iter().any(|w| (*w - z).norm() <= gap)) {
            Some(g) => g.push(z),
            None => groups.push(vec![z]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let mean = g.iter().sum::<c64>() / g.len() as f64;
            snap(mean, scale)
        })
        .collect()
}

/// Removes rounding dust so exact labels such as `0` or `±1` come out exact.
fn snap(z: c64, scale: f64) -> c64 {
    let eps = 1e-12 * scale.max(1.0);
    let near = |x: f64| {
        let r = x.round();
        if (x - r).abs() <= eps {
            r
        } else {
            x
        }
    };
    c64::new(near(z.re), near(z.im))
}

/// `C(K, K/2) − C(K, K/2 − 1)`: singlet count for even `K`, zero for odd.
pub fn singlet_count(k: usize) -> u128 {
    if k % 2 == 1 {
        return 0;
    }
    if k == 0 {
        return 1;
    }
    binomial(k, k / 2) - binomial(k, k / 2 - 1)
}

fn binomial(n: usize, r: usize) -> u128 {
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// `K − (3/2) log₂ K`
pub fn asymptotic_encoded_qubits(k: usize) -> f64 {
    let k = k as f64;
    k - 1.5 * k.log2()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionRow {
    pub k: usize,
    /// Absent when `K` exceeds the numerical limit.
    pub numeric: Option<usize>,
    pub combinatorial: u128,
    /// `log₂ N₀`; absent for an empty subspace.
    pub log2_dimension: Option<f64>,
    pub asymptote: f64,
    pub agree: bool,
}

/// Collective-decoherence DF dimensions, numerically up to `numeric_max`
/// qubits and combinatorially for every `K`.
pub fn dfs_dimension_series(ks: &[usize], numeric_max: usize, tol: f64) -> Result<Vec<DimensionRow>> {
    ks.iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::OutOfRange {
                    what: "K",
                    value: 0,
                    allowed: ">= 1".into(),
                });
            }
            let combinatorial = singlet_count(k);
            let numeric = if k <= numeric_max.min(MAX_NUMERIC_QUBITS) {
                let gens = build_collective(k)?;
                Some(kernel_basis(gens.generators(), tol)?.ncols())
            } else {
                None
            };
            let agree = numeric.is_none_or(|n| n as u128 == combinatorial);
            let log2_dimension = (combinatorial > 0).then(|| (combinatorial as f64).log2());
            Ok(DimensionRow {
                k,
                numeric,
                combinatorial,
                log2_dimension,
                asymptote: asymptotic_encoded_qubits(k),
                agree,
            })
        })
        .collect()
}

/// States used to probe a subspace: each basis vector, the uniform mixture
/// and `random` random mixtures with coherences.
pub fn sample_states<R: Rng + ?Sized>(basis: MatRef<'_, c64>, random: usize, rng: &mut R) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(basis.ncols() + 1 + random);
    for j in 0..basis.ncols() {
        out.push(DensityMatrix::pure(basis.col(j))?);
    }
    out.push(DensityMatrix::uniform_mixture(basis)?);
    for _ in 0..random {
        out.push(sampling::random_density_in(basis, rng));
    }
    Ok(out)
}

/// Largest `‖L_D[ρ̃]‖_F` over sampled states supported on the subspace.
pub fn verify_dfs_dynamical<R: Rng + ?Sized>(
    subspace: &DfSubspace,
    gens: &ErrorGeneratorSet,
    random_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if subspace.is_empty() {
        return Err(Error::Precondition("subspace is empty".into()));
    }
    let gen = LindbladGenerator::new(Operator::zeros(gens.dim()), gens)?;
    let mut worst = 0.0f64;
    for rho in sample_states(subspace.basis.as_ref(), random_samples, rng)? {
        let d = gen.dissipator(rho.as_ref())?;
        worst = worst.max(linalg::frobenius(d.as_ref()));
    }
    Ok(worst)
}

/// Kernel of the loss operator `Σ_αβ a_αβ F_β† F_α`, computed by a Hermitian
/// eigendecomposition. For `A` of full rank this is the set of pure states
/// annihilated by every generator, reached without stacking or SVD.
pub fn zero_loss_subspace(gens: &ErrorGeneratorSet, tol: f64) -> Result<Mat<c64>> {
    let gen = LindbladGenerator::new(Operator::zeros(gens.dim()), gens)?;
    let n = gens.dim();
    let mut loss = Mat::<c64>::zeros(n, n);
    for j in gen.jumps() {
        linalg::mm_acc(loss.as_mut(), c64::new(1.0, 0.0), j.adjoint(), j.as_ref());
    }
    let (vals, vecs) = linalg::hermitian_eigen(loss.as_ref())?;
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] <= tol * top.max(1.0)).collect();
    Ok(Mat::from_fn(n, keep.len(), |i, j| vecs[(i, keep[j])]))
}
