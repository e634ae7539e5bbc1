//! Error-generator sets `{F_α}` and coefficient matrices `A` for the four
//! register decoherence classes: total, independent, collective and cluster.
//!
//! Generators are raw Pauli sums (no spin-½ normalisation), so structure
//! constants stay integer multiples of `i`.

use faer::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{pauli_sum, Operator, Pauli, PauliString};

/// Largest register handled by the dense builders.
pub const MAX_QUBITS: usize = 12;
/// Largest register for the total-decoherence model (`4^K − 1` generators).
pub const MAX_TOTAL_QUBITS: usize = 6;
/// Tolerance for Hermiticity and positivity of coefficient matrices.
pub const COEFFICIENT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Total,
    Independent,
    Collective,
    Cluster,
    /// User-supplied generator list.
    Custom,
}

/// Description of a decoherence model, sufficient to rebuild its generators.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub num_qubits: usize,
    /// Qubits per cluster for contiguous cluster partitions.
    pub cluster_size: Option<usize>,
    /// Explicit partition (0-based qubit indices); overrides `cluster_size`.
    pub clusters: Option<Vec<Vec<usize>>>,
    pub coefficients: Coefficients,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coefficients {
    /// `A = γ·I`
    Uniform(f64),
    Explicit(Mat<c64>),
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients::Uniform(1.0)
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind, num_qubits: usize) -> Self {
        Self {
            kind,
            num_qubits,
            cluster_size: None,
            clusters: None,
            coefficients: Coefficients::default(),
        }
    }

    pub fn build(&self) -> Result<ErrorGeneratorSet> {
        let base = match self.kind {
            ModelKind::Total => build_total(self.num_qubits)?,
            ModelKind::Independent => build_independent(self.num_qubits)?,
            ModelKind::Collective => build_collective(self.num_qubits)?,
            ModelKind::Cluster => match (&self.clusters, self.cluster_size) {
                (Some(parts), _) => build_cluster_partition(self.num_qubits, parts)?,
                (None, Some(size)) => build_cluster(self.num_qubits, size)?,
                (None, None) => {
                    return Err(Error::Precondition(
                        "cluster model needs cluster_size or clusters".into(),
                    ))
                }
            },
            ModelKind::Custom => {
                return Err(Error::Precondition(
                    "custom models are built with ErrorGeneratorSet::custom".into(),
                ))
            }
        };
        let coefficients = match &self.coefficients {
            Coefficients::Uniform(gamma) => default_coefficients(base.len(), *gamma)?,
            Coefficients::Explicit(a) => a.clone(),
        };
        let mut set = base.with_coefficients(coefficients)?;
        set.spec.coefficients = self.coefficients.clone();
        Ok(set)
    }
}

/// Generators `F_α` of a decoherence model together with the Hermitian
/// positive semidefinite coefficient matrix `A = {a_αβ}`.
#[derive(Clone, Debug)]
pub struct ErrorGeneratorSet {
    generators: Vec<Operator>,
    labels: Vec<String>,
    coefficients: Mat<c64>,
    spec: ModelSpec,
}

impl ErrorGeneratorSet {
    fn from_parts(generators: Vec<Operator>, labels: Vec<String>, spec: ModelSpec) -> Self {
        let m = generators.len();
        Self {
            generators,
            labels,
            coefficients: Mat::identity(m, m),
            spec,
        }
    }

    /// Arbitrary generator list with `A = I`. Generators must share one
    /// dimension and be linearly independent.
    pub fn custom(generators: Vec<Operator>, labels: Option<Vec<String>>) -> Result<Self> {
        let first = generators.first().ok_or(Error::EmptyStack)?;
        let dim = first.dim();
        for g in &generators {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: g.dim(),
                });
            }
        }
        let labels = match labels {
            Some(l) if l.len() == generators.len() => l,
            Some(l) => {
                return Err(Error::DimensionMismatch {
                    expected: generators.len(),
                    found: l.len(),
                })
            }
            None => (1..=generators.len()).map(|i| format!("F{i}")).collect(),
        };
        let num_qubits = if dim.is_power_of_two() { dim.trailing_zeros() as usize } else { 0 };
        let set = Self::from_parts(generators, labels, ModelSpec::new(ModelKind::Custom, num_qubits));
        let sigma = set.gram_min_singular_value()?;
        if sigma <= 1e-8 {
            return Err(Error::LinearlyDependent(sigma));
        }
        Ok(set)
    }

    /// Replaces `A` after checking it is `M × M`, Hermitian and PSD.
    pub fn with_coefficients(mut self, coefficients: Mat<c64>) -> Result<Self> {
        if coefficients.nrows() != self.len() || coefficients.ncols() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coefficients.nrows(),
            });
        }
        validate_coefficients(coefficients.as_ref())?;
        self.spec.coefficients = Coefficients::Explicit(coefficients.clone());
        self.coefficients = coefficients;
        Ok(self)
    }

    pub fn generators(&self) -> &[Operator] {
        &self.generators
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coefficients(&self) -> MatRef<'_, c64> {
        self.coefficients.as_ref()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Number of generators `M`.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Hilbert-space dimension `N`.
    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    /// Smallest singular value of the Gram matrix of the normalised,
    /// vectorised generators. Zero iff the generators are dependent.
    pub fn gram_min_singular_value(&self) -> Result<f64> {
        let n2 = self.dim() * self.dim();
        let mut cols = Mat::<c64>::zeros(n2, self.len());
        for (a, g) in self.generators.iter().enumerate() {
            let norm = g.frobenius_norm();
            if norm == 0.0 {
                return Ok(0.0);
            }
            let v = linalg::vec_of(g.as_ref());
            for k in 0..n2 {
                cols[(k, a)] = v[k] / norm;
            }
        }
        let gram = linalg::mm(cols.adjoint(), cols.as_ref());
        Ok(linalg::singular_values(gram.as_ref())?
            .last()
            .copied()
            .unwrap_or(0.0))
    }
}

fn check_qubits(num_qubits: usize, max: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > max {
        return Err(Error::OutOfRange {
            what: "num_qubits",
            value: num_qubits,
            allowed: format!("1..={max}"),
        });
    }
    Ok(())
}

/// All `4^K − 1` non-identity Pauli strings.
pub fn build_total(num_qubits: usize) -> Result<ErrorGeneratorSet> {
    check_qubits(num_qubits, MAX_TOTAL_QUBITS)?;
    let (generators, labels) = PauliString::enumerate(num_qubits)
        .filter(|p| !p.is_identity())
        .map(|p| (p.materialize(), p.to_string()))
        .unzip();
    Ok(ErrorGeneratorSet::from_parts(
        generators,
        labels,
        ModelSpec::new(ModelKind::Total, num_qubits),
    ))
}

/// `σ^{x,y,z}` on each qubit separately, `3K` generators ordered qubit-major.
pub fn build_independent(num_qubits: usize) -> Result<ErrorGeneratorSet> {
    check_qubits(num_qubits, MAX_QUBITS)?;
    let parts: Vec<Vec<usize>> = (0..num_qubits).map(|q| vec![q]).collect();
    let (generators, _) = cluster_generators(num_qubits, &parts)?;
    let labels = (1..=num_qubits)
        .flat_map(|q| ["X", "Y", "Z"].map(|u| format!("{u}{q}")))
        .collect();
    Ok(ErrorGeneratorSet::from_parts(
        generators,
        labels,
        ModelSpec::new(ModelKind::Independent, num_qubits),
    ))
}

/// Collective operators `S_u = Σ_κ σ^u_κ`, `u ∈ {x, y, z}`.
pub fn build_collective(num_qubits: usize) -> Result<ErrorGeneratorSet> {
    check_qubits(num_qubits, MAX_QUBITS)?;
    let all: Vec<usize> = (0..num_qubits).collect();
    let (generators, _) = cluster_generators(num_qubits, &[all])?;
    let labels = ["Sx", "Sy", "Sz"].map(String::from).to_vec();
    Ok(ErrorGeneratorSet::from_parts(
        generators,
        labels,
        ModelSpec::new(ModelKind::Collective, num_qubits),
    ))
}

/// Collective operators restricted to contiguous clusters of `cluster_size`
/// qubits, `3K/K′` generators ordered cluster-major.
pub fn build_cluster(num_qubits: usize, cluster_size: usize) -> Result<ErrorGeneratorSet> {
    check_qubits(num_qubits, MAX_QUBITS)?;
    if cluster_size == 0 || !num_qubits.is_multiple_of(cluster_size) {
        return Err(Error::ClusterSize {
            num_qubits,
            cluster_size,
        });
    }
    let parts: Vec<Vec<usize>> = (0..num_qubits / cluster_size)
        .map(|c| (c * cluster_size..(c + 1) * cluster_size).collect())
        .collect();
    let mut set = build_cluster_partition(num_qubits, &parts)?;
    set.spec.cluster_size = Some(cluster_size);
    set.spec.clusters = None;
    Ok(set)
}

/// Cluster model over an explicit partition of the qubits (0-based).
pub fn build_cluster_partition(num_qubits: usize, clusters: &[Vec<usize>]) -> Result<ErrorGeneratorSet> {
    check_qubits(num_qubits, MAX_QUBITS)?;
    let mut seen = vec![false; num_qubits];
    for part in clusters {
        if part.is_empty() {
            return Err(Error::Partition("empty cluster".into()));
        }
        for &q in part {
            if q >= num_qubits {
                return Err(Error::Partition(format!("qubit {q} outside register of {num_qubits}")));
            }
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::Partition(format!("qubit {q} appears twice")));
            }
        }
    }
    if let Some(q) = seen.iter().position(|s| !s) {
        return Err(Error::Partition(format!("qubit {q} is not in any cluster")));
    }
    let (generators, labels) = cluster_generators(num_qubits, clusters)?;
    let mut spec = ModelSpec::new(ModelKind::Cluster, num_qubits);
    spec.clusters = Some(clusters.to_vec());
    Ok(ErrorGeneratorSet::from_parts(generators, labels, spec))
}

fn cluster_generators(num_qubits: usize, clusters: &[Vec<usize>]) -> Result<(Vec<Operator>, Vec<String>)> {
    let mut generators = Vec::with_capacity(3 * clusters.len());
    let mut labels = Vec::with_capacity(3 * clusters.len());
    for (c, part) in clusters.iter().enumerate() {
        for (letter, name) in [(Pauli::X, "Sx"), (Pauli::Y, "Sy"), (Pauli::Z, "Sz")] {
            let strings = part
                .iter()
                .map(|&q| PauliString::single(num_qubits, q, letter))
                .collect::<Result<Vec<_>>>()?;
            let ones = vec![c64::new(1.0, 0.0); strings.len()];
            generators.push(pauli_sum(&strings, &ones));
            labels.push(format!("{name}[{}]", c + 1));
        }
    }
    Ok((generators, labels))
}

/// `A = γ·I` of size `M × M`.
pub fn default_coefficients(m: usize, gamma: f64) -> Result<Mat<c64>> {
    if m == 0 {
        return Err(Error::OutOfRange {
            what: "number of generators",
            value: 0,
            allowed: ">= 1".into(),
        });
    }
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::Precondition(format!("rate gamma must be positive, got {gamma}")));
    }
    Ok(Mat::from_fn(m, m, |i, j| {
        if i == j {
            c64::new(gamma, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

/// Checks that `A` is square, Hermitian and positive semidefinite.
pub fn validate_coefficients(a: MatRef<'_, c64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if !linalg::is_finite(a) {
        return Err(Error::NonFinite);
    }
    let defect = linalg::hermiticity_defect(a);
    if defect > COEFFICIENT_TOL * linalg::frobenius(a).max(1.0) {
        return Err(Error::NotHermitian("coefficient matrix", defect));
    }
    let min = min_eigenvalue(a)?;
    if min < -COEFFICIENT_TOL {
        return Err(Error::NotPositive("coefficient matrix", min));
    }
    Ok(())
}

fn min_eigenvalue(a: MatRef<'_, c64>) -> Result<f64> {
    // Symmetrise first so a defect at the tolerance edge cannot bias the spectrum.
    let sym = Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    Ok(linalg::hermitian_eigenvalues(sym.as_ref())?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}
