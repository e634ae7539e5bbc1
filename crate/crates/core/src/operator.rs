//! Dense complex operators on a register Hilbert space.
//!
//! Everything here works with `ħ = 1` and the Pauli convention
//! `σz = diag(1, -1)`, `[σx, σy] = 2iσz`. Qubit 1 is the leftmost tensor
//! factor, i.e. the most significant bit of a basis index.

use std::fmt;
use std::str::FromStr;

use faer::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Default relative rank tolerance for kernel computations.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Square complex matrix acting on an `N`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: Mat<c64>,
}

impl Operator {
    pub fn new(mat: Mat<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        if mat.nrows() == 0 {
            return Err(Error::OutOfRange {
                what: "operator dimension",
                value: 0,
                allowed: ">= 1".into(),
            });
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_mat_unchecked(mat: Mat<c64>) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_mat_unchecked(Mat::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_mat_unchecked(Mat::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> c64) -> Self {
        Self::from_mat_unchecked(Mat::from_fn(dim, dim, f))
    }

    /// Builds an operator from row-major rows.
    pub fn from_rows(rows: &[Vec<c64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        Self::new(Mat::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Diagonal operator.
    pub fn diagonal(entries: &[c64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, |i, j| if i == j { entries[i] } else { c64::new(0.0, 0.0) })
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: ColRef<'_, c64>, b: ColRef<'_, c64>) -> Result<Self> {
        if a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.nrows(),
            });
        }
        Ok(Self::from_fn(a.nrows(), |i, j| a[i] * b[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &Mat<c64> {
        &self.mat
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> c64 {
        self.mat[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_mat_unchecked(linalg::adjoint(self.as_ref()))
    }

    pub fn trace(&self) -> c64 {
        linalg::trace(self.as_ref())
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frobenius(self.as_ref())
    }

    pub fn is_finite(&self) -> bool {
        linalg::is_finite(self.as_ref())
    }

    /// Frobenius norm of `A − A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.as_ref())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = linalg::mm(self.mat.adjoint(), self.as_ref());
        let id = Mat::<c64>::identity(self.dim(), self.dim());
        linalg::frobenius((&prod - &id).as_ref()) <= tol
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.mat[(i, j)] == c64::new(0.0, 0.0)))
    }

    pub fn scale(&self, s: c64) -> Self {
        Self::from_mat_unchecked(linalg::scaled(self.as_ref(), s))
    }

    pub fn matmul(&self, rhs: &Operator) -> Result<Operator> {
        self.check_dim(rhs)?;
        Ok(Self::from_mat_unchecked(linalg::mm(self.as_ref(), rhs.as_ref())))
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        self.check_dim(rhs)?;
        Ok(Self::from_mat_unchecked(&self.mat + &rhs.mat))
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Operator> {
        self.check_dim(rhs)?;
        Ok(Self::from_mat_unchecked(&self.mat - &rhs.mat))
    }

    pub fn kron(&self, rhs: &Operator) -> Operator {
        let (n, m) = (self.dim(), rhs.dim());
        Self::from_fn(n * m, |i, j| self.mat[(i / m, j / m)] * rhs.mat[(i % m, j % m)])
    }

    /// Hilbert–Schmidt inner product `Tr(self† rhs)`.
    pub fn hs_inner(&self, rhs: &Operator) -> Result<c64> {
        self.check_dim(rhs)?;
        Ok(linalg::hs_inner(self.as_ref(), rhs.as_ref()))
    }

    /// `V† A V` for a block of column vectors `V`.
    pub fn compress(&self, v: MatRef<'_, c64>) -> Result<Mat<c64>> {
        if v.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.nrows(),
            });
        }
        Ok(linalg::mm(v.adjoint(), linalg::mm(self.as_ref(), v).as_ref()))
    }

    pub fn apply(&self, v: ColRef<'_, c64>) -> Result<Col<c64>> {
        if v.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.nrows(),
            });
        }
        Ok(self.as_ref() * v)
    }

    fn check_dim(&self, rhs: &Operator) -> Result<()> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rhs.dim(),
            });
        }
        Ok(())
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub const DEFAULT_TOL: f64 = 1e-8;

    /// Validates `op` as a state within `tol`.
    pub fn new(op: Operator, tol: f64) -> Result<Self> {
        let herm = op.hermiticity_defect();
        if herm > tol {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:.3e})")));
        }
        let tr = op.trace();
        if (tr - c64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = linalg::hermitian_eigenvalues(op.as_ref())?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { op })
    }

    pub(crate) fn from_op_unchecked(op: Operator) -> Self {
        Self { op }
    }

    /// `|ψ⟩⟨ψ|` for a normalised copy of `psi`.
    pub fn pure(psi: ColRef<'_, c64>) -> Result<Self> {
        let norm = psi.norm_l2();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("state vector has zero or non-finite norm".into()));
        }
        let unit = Col::from_fn(psi.nrows(), |i| psi[i] / norm);
        Ok(Self {
            op: Operator::outer(unit.as_ref(), unit.as_ref())?,
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: Operator::identity(dim).scale(c64::new(1.0 / dim as f64, 0.0)),
        }
    }

    /// Uniform mixture of the columns of an orthonormal `basis`.
    pub fn uniform_mixture(basis: MatRef<'_, c64>) -> Result<Self> {
        if basis.ncols() == 0 {
            return Err(Error::InvalidState("empty basis".into()));
        }
        let p = linalg::projector(basis);
        let k = basis.ncols() as f64;
        Ok(Self {
            op: Operator::from_mat_unchecked(linalg::scaled(p.as_ref(), c64::new(1.0 / k, 0.0))),
        })
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.op.as_ref()
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(self.as_ref(), self.as_ref()).re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(self.as_ref())?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Operator {
        let (o, l, i) = (c64::new(0.0, 0.0), c64::new(1.0, 0.0), c64::new(0.0, 1.0));
        let rows = match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        };
        Operator::from_fn(2, |r, c| rows[r][c])
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// Product `self · rhs = i^k · letter`.
    pub fn product(self, rhs: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, rhs) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, X) => (3, Z),
            (Y, Z) => (1, X),
            (Z, Y) => (3, X),
            (Z, X) => (1, Y),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis, qubit 1 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::OutOfRange {
                what: "number of qubits",
                value: 0,
                allowed: ">= 1".into(),
            });
        }
        Ok(Self { letters })
    }

    pub fn identity(num_qubits: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; num_qubits])
    }

    /// `letter` on qubit `qubit` (0-based), identity elsewhere.
    pub fn single(num_qubits: usize, qubit: usize, letter: Pauli) -> Result<Self> {
        if qubit >= num_qubits {
            return Err(Error::OutOfRange {
                what: "qubit index",
                value: qubit,
                allowed: format!("< {num_qubits}"),
            });
        }
        let mut letters = vec![Pauli::I; num_qubits];
        letters[qubit] = letter;
        Self::new(letters)
    }

    /// All `4^K` strings in base-4 order, identity first.
    pub fn enumerate(num_qubits: usize) -> impl Iterator<Item = PauliString> {
        let total = 4usize.pow(num_qubits as u32);
        (0..total).map(move |mut code| {
            let mut letters = vec![Pauli::I; num_qubits];
            for slot in letters.iter_mut().rev() {
                *slot = Pauli::ALL[code % 4];
                code /= 4;
            }
            PauliString { letters }
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// Symbolic product: `self · rhs = i^k · r`, returned as `(k mod 4, r)`.
    pub fn mul(&self, rhs: &PauliString) -> Result<(u8, PauliString)> {
        if self.num_qubits() != rhs.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits(),
                found: rhs.num_qubits(),
            });
        }
        let mut phase = 0u8;
        let letters = self
            .letters
            .iter()
            .zip(&rhs.letters)
            .map(|(&a, &b)| {
                let (k, p) = a.product(b);
                phase = (phase + k) % 4;
                p
            })
            .collect();
        Ok((phase, PauliString { letters }))
    }

    /// Column and value of the single nonzero entry in row `row`.
    pub fn row_entry(&self, row: usize) -> (usize, c64) {
        let k = self.num_qubits();
        let mut col = row;
        let mut value = c64::new(1.0, 0.0);
        for (q, &p) in self.letters.iter().enumerate() {
            let shift = k - 1 - q;
            if p.flips() {
                col ^= 1 << shift;
            }
            let sign = if (col >> shift) & 1 == 1 { -1.0 } else { 1.0 };
            value *= match p {
                Pauli::I | Pauli::X => c64::new(1.0, 0.0),
                Pauli::Z => c64::new(sign, 0.0),
                Pauli::Y => c64::new(0.0, sign),
            };
        }
        (col, value)
    }

    /// Dense `2^K × 2^K` matrix.
    pub fn materialize(&self) -> Operator {
        pauli_sum(std::slice::from_ref(self), &[c64::new(1.0, 0.0)])
    }
}

/// `Σ c_s P_s` assembled row by row, without intermediate Kronecker products.
pub fn pauli_sum(strings: &[PauliString], coeffs: &[c64]) -> Operator {
    assert_eq!(strings.len(), coeffs.len(), "one coefficient per Pauli string");
    let k = strings.first().map_or(0, PauliString::num_qubits);
    assert!(strings.iter().all(|s| s.num_qubits() == k), "mixed register sizes");
    let dim = 1usize << k;
    let mut mat = Mat::<c64>::zeros(dim, dim);
    for (s, &c) in strings.iter().zip(coeffs) {
        for row in 0..dim {
            let (col, v) = s.row_entry(row);
            mat[(row, col)] += c * v;
        }
    }
    Operator::from_mat_unchecked(mat)
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Precondition(format!("invalid Pauli letter '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(letters)
    }
}

/// Shorthand for [`PauliString::materialize`].
pub fn materialize(p: &PauliString) -> Operator {
    p.materialize()
}

/// `ab − ba`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.check_dim(b)?;
    let mut out = linalg::mm(a.as_ref(), b.as_ref());
    linalg::mm_acc(out.as_mut(), c64::new(-1.0, 0.0), b.as_ref(), a.as_ref());
    Ok(Operator::from_mat_unchecked(out))
}

/// `exp(a·t)`.
///
/// Hermitian and anti-Hermitian arguments go through an eigendecomposition,
/// which keeps `exp(-iHt)` unitary to rounding. Everything else uses
/// scaling-and-squaring with a degree-13 Padé approximant.
pub fn matrix_exp(a: &Operator, t: f64) -> Result<Operator> {
    if !a.is_finite() || !t.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.dim();
    let scale = a.frobenius_norm().max(1.0);
    if a.hermiticity_defect() <= 1e-14 * scale {
        let (vals, vecs) = linalg::hermitian_eigen(a.as_ref())?;
        let exps: Vec<c64> = vals.iter().map(|&l| c64::new((l * t).exp(), 0.0)).collect();
        return Ok(Operator::from_mat_unchecked(spectral(vecs.as_ref(), &exps)));
    }
    // i·a Hermitian ⇒ a = −iH with H = i·a.
    let h = a.scale(c64::new(0.0, 1.0));
    if h.hermiticity_defect() <= 1e-14 * scale {
        let (vals, vecs) = linalg::hermitian_eigen(h.as_ref())?;
        let exps: Vec<c64> = vals.iter().map(|&l| c64::from_polar(1.0, -l * t)).collect();
        return Ok(Operator::from_mat_unchecked(spectral(vecs.as_ref(), &exps)));
    }
    let at = linalg::scaled(a.as_ref(), c64::new(t, 0.0));
    let out = expm_pade13(at.as_ref())?;
    debug_assert_eq!(out.nrows(), n);
    Ok(Operator::from_mat_unchecked(out))
}

fn spectral(vecs: MatRef<'_, c64>, values: &[c64]) -> Mat<c64> {
    let scaled = Mat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * values[j]);
    linalg::mm(scaled.as_ref(), vecs.adjoint())
}

/// Scaling-and-squaring Padé(13) exponential (Higham 2005).
pub(crate) fn expm_pade13(a: MatRef<'_, c64>) -> Result<Mat<c64>> {
    const THETA_13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA_13 {
        (norm1 / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = linalg::scaled(a, c64::new(0.5f64.powi(squarings), 0.0));
    let id = Mat::<c64>::identity(n, n);
    let a2 = linalg::mm(a.as_ref(), a.as_ref());
    let a4 = linalg::mm(a2.as_ref(), a2.as_ref());
    let a6 = linalg::mm(a4.as_ref(), a2.as_ref());
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| {
        Mat::from_fn(n, n, |i, j| {
            a6[(i, j)] * c6 + a4[(i, j)] * c4 + a2[(i, j)] * c2 + id[(i, j)] * c0
        })
    };
    let u_inner = linalg::mm(a6.as_ref(), lin(B[13], B[11], B[9], 0.0).as_ref()) + lin(B[7], B[5], B[3], B[1]);
    let u = linalg::mm(a.as_ref(), u_inner.as_ref());
    let v = linalg::mm(a6.as_ref(), lin(B[12], B[10], B[8], 0.0).as_ref()) + lin(B[6], B[4], B[2], B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    if !linalg::is_finite(r.as_ref()) {
        return Err(Error::NonFinite);
    }
    for _ in 0..squarings {
        r = linalg::mm(r.as_ref(), r.as_ref());
    }
    Ok(r)
}

/// Orthonormal basis of `∩ ker(F)` over the stack, as the columns of the
/// returned `N × N₀` matrix.
///
/// Exactly diagonal operators are handled first: their common kernel is a
/// coordinate subspace and needs no factorisation. The remaining operators
/// are restricted to that subspace, stacked vertically and factored by SVD;
/// singular values below `tol · σ_max` count as zero.
pub fn kernel_basis(stack: &[Operator], tol: f64) -> Result<Mat<c64>> {
    let first = stack.first().ok_or(Error::EmptyStack)?;
    let n = first.dim();
    for op in stack {
        if op.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: op.dim(),
            });
        }
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Precondition(format!("rank tolerance must be positive, got {tol}")));
    }

    let (diagonal, dense): (Vec<&Operator>, Vec<&Operator>) = stack.iter().partition(|op| op.is_diagonal());
    let diag_scale = diagonal
        .iter()
        .flat_map(|op| (0..n).map(move |i| op.get(i, i).norm()))
        .fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n)
        .filter(|&i| diagonal.iter().all(|op| op.get(i, i).norm() <= tol * diag_scale))
        .collect();
    let coords = Mat::from_fn(n, keep.len(), |i, j| {
        if keep[j] == i {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    if dense.is_empty() || keep.is_empty() {
        return Ok(coords);
    }

    let k = keep.len();
    let mut stacked = Mat::<c64>::zeros(n * dense.len(), k);
    for (b, op) in dense.iter().enumerate() {
        // Columns of `coords` are unit vectors, so F·coords just selects columns.
        for (j, &col) in keep.iter().enumerate() {
            for i in 0..n {
                stacked[(b * n + i, j)] = op.get(i, col);
            }
        }
    }
    let sigma = linalg::singular_values(stacked.as_ref())?;
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let null = linalg::null_space(stacked.as_ref(), tol * sigma_max)?;
    Ok(linalg::mm(coords.as_ref(), null.as_ref()))
}
