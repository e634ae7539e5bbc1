//! Structure constants, adjoint representation and Killing-form
//! semisimplicity test for a set of error generators.
//!
//! With Hermitian generators the structure constants of a compact algebra are
//! purely imaginary (`[S_x, S_y] = 2i S_z` gives `f_xy^z = 2i`). Setting
//! [`LieOptions::anti_hermitian`] rebases to `F' = −iF`, which makes them real.

use faer::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::ErrorGeneratorSet;
use crate::operator::{commutator, Operator};

/// Relative residual below which a commutator counts as lying in the span.
pub const CLOSURE_TOL: f64 = 1e-8;
/// Threshold on the Hadamard ratio `|det B| / Π_α ‖B_α‖`.
pub const SEMISIMPLE_TOL: f64 = 1e-8;
/// Threshold for `Σ_γ f_αβ^γ c_γ = 0`.
pub const STRUCTURE_CONDITION_TOL: f64 = 1e-8;
/// Dense commutator expansion is quadratic in `M`; larger sets are refused.
pub const MAX_GENERATORS: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LieOptions {
    /// Fail with [`Error::NotClosed`] instead of reporting `is_closed = false`.
    pub strict: bool,
    /// Expand in the basis `F' = −iF`.
    pub anti_hermitian: bool,
}

#[derive(Clone, Debug)]
pub struct LieAlgebraReport {
    m: usize,
    f: Vec<c64>,
    adjoint: Vec<Mat<c64>>,
    killing: Mat<c64>,
    is_closed: bool,
    is_semisimple: bool,
    max_residual: f64,
    worst_pair: (usize, usize),
    anti_hermitian: bool,
}

impl LieAlgebraReport {
    /// Algebra dimension `M`.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// `f_αβ^γ`
    pub fn f(&self, alpha: usize, beta: usize, gamma: usize) -> c64 {
        self.f[(alpha * self.m + beta) * self.m + gamma]
    }

    /// `[ad(F_α)]_{γβ} = f_αβ^γ`
    pub fn adjoint(&self, alpha: usize) -> MatRef<'_, c64> {
        self.adjoint[alpha].as_ref()
    }

    pub fn adjoint_reps(&self) -> &[Mat<c64>] {
        &self.adjoint
    }

    /// `B_αβ = Tr[ad(F_α) ad(F_β)]`
    pub fn killing_form(&self) -> MatRef<'_, c64> {
        self.killing.as_ref()
    }

    pub fn is_closed(&self) -> bool {
        self.is_closed
    }

    pub fn is_semisimple(&self) -> bool {
        self.is_semisimple
    }

    /// Largest relative expansion residual and the pair it came from.
    pub fn max_residual(&self) -> (f64, (usize, usize)) {
        (self.max_residual, self.worst_pair)
    }

    pub fn is_anti_hermitian_basis(&self) -> bool {
        self.anti_hermitian
    }

    /// Largest `|f_αβ^γ + f_βα^γ|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                for g in 0..m {
                    worst = worst.max((self.f(a, b, g) + self.f(b, a, g)).norm());
                }
            }
        }
        worst
    }

    /// Largest entry of the Jacobi sum
    /// `Σ_μ (f_αβ^μ f_μγ^ν + f_βγ^μ f_μα^ν + f_γα^μ f_μβ^ν)`.
    ///
    /// Evaluated as `[ad_α, ad_β] − Σ_μ f_αβ^μ ad_μ`, which has the same
    /// entries up to sign.
    pub fn jacobi_residual(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in (a + 1)..m {
                let mut r = linalg::mm(self.adjoint[a].as_ref(), self.adjoint[b].as_ref());
                linalg::mm_acc(
                    r.as_mut(),
                    c64::new(-1.0, 0.0),
                    self.adjoint[b].as_ref(),
                    self.adjoint[a].as_ref(),
                );
                for mu in 0..m {
                    let c = self.f(a, b, mu);
                    if c != c64::new(0.0, 0.0) {
                        r -= &self.adjoint[mu] * faer::Scale(c);
                    }
                }
                worst = worst.max(linalg::max_abs(r.as_ref()));
            }
        }
        worst
    }

    /// Coefficient matrix of the linear system `Σ_γ f_αβ^γ c_γ = 0`, one row
    /// per ordered pair `(α, β)`.
    pub fn structure_condition_matrix(&self) -> Mat<c64> {
        let m = self.m;
        Mat::from_fn(m * m, m, |row, g| self.f(row / m, row % m, g))
    }

    /// Dimension of the solution space of `Σ_γ f_αβ^γ c_γ = 0`.
    pub fn structure_condition_nullity(&self) -> Result<usize> {
        let a = self.structure_condition_matrix();
        let smax = linalg::singular_values(a.as_ref())?.first().copied().unwrap_or(0.0);
        let null = linalg::null_space(a.as_ref(), STRUCTURE_CONDITION_TOL * smax.max(1.0))?;
        Ok(null.ncols())
    }

    /// Rank of the vectorised adjoint matrices.
    pub fn adjoint_rank(&self) -> Result<usize> {
        let m = self.m;
        let stacked = Mat::from_fn(m * m, m, |k, a| self.adjoint[a][(k % m, k / m)]);
        let sv = linalg::singular_values(stacked.as_ref())?;
        let smax = sv.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return Ok(0);
        }
        Ok(sv.iter().filter(|&&s| s > STRUCTURE_CONDITION_TOL * smax).count())
    }

    /// Serializable view with complex numbers as `[re, im]`.
    pub fn to_dto(&self) -> LieReportDto {
        let m = self.m;
        let pair = |z: c64| [z.re, z.im];
        let mat = |a: &Mat<c64>| -> Vec<Vec<[f64; 2]>> {
            (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| pair(a[(i, j)])).collect()).collect()
        };
        LieReportDto {
            dimension: m,
            basis: if self.anti_hermitian { "anti-hermitian" } else { "hermitian" },
            is_closed: self.is_closed,
            is_semisimple: self.is_semisimple,
            max_residual: self.max_residual,
            structure_constants: (0..m)
                .map(|a| (0..m).map(|b| (0..m).map(|g| pair(self.f(a, b, g))).collect()).collect())
                .collect(),
            adjoint_reps: self.adjoint.iter().map(mat).collect(),
            killing_form: mat(&self.killing),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LieReportDto {
    pub dimension: usize,
    pub basis: &'static str,
    pub is_closed: bool,
    pub is_semisimple: bool,
    pub max_residual: f64,
    /// Indexed `[α][β][γ]`.
    pub structure_constants: Vec<Vec<Vec<[f64; 2]>>>,
    pub adjoint_reps: Vec<Vec<Vec<[f64; 2]>>>,
    pub killing_form: Vec<Vec<[f64; 2]>>,
}

/// Expands every commutator `[F_α, F_β]` in the generator basis by least
/// squares and assembles the adjoint representation and Killing form.
pub fn structure_constants(gens: &ErrorGeneratorSet, options: LieOptions) -> Result<LieAlgebraReport> {
    structure_constants_of(gens.generators(), options)
}

/// As [`structure_constants`] for a bare operator list.
pub fn structure_constants_of(ops: &[Operator], options: LieOptions) -> Result<LieAlgebraReport> {
    let m = ops.len();
    if m == 0 {
        return Err(Error::EmptyStack);
    }
    if m > MAX_GENERATORS {
        return Err(Error::OutOfRange {
            what: "number of generators",
            value: m,
            allowed: format!("<= {MAX_GENERATORS} for structure-constant analysis"),
        });
    }
    let dim = ops[0].dim();
    let basis: Vec<Operator> = ops
        .iter()
        .map(|op| {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: op.dim(),
                });
            }
            Ok(if options.anti_hermitian {
                op.scale(c64::new(0.0, -1.0))
            } else {
                op.clone()
            })
        })
        .collect::<Result<_>>()?;

    let gram = Mat::from_fn(m, m, |i, j| basis[i].hs_inner(&basis[j]).unwrap());
    let lu = gram.partial_piv_lu();
    let gram_scale = linalg::frobenius(gram.as_ref());
    let gram_min = linalg::singular_values(gram.as_ref())?.last().copied().unwrap_or(0.0);
    if gram_min <= 1e-8 * gram_scale {
        return Err(Error::LinearlyDependent(gram_min / gram_scale.max(f64::MIN_POSITIVE)));
    }

    let mut f = vec![c64::new(0.0, 0.0); m * m * m];
    let mut max_residual = 0.0f64;
    let mut worst_pair = (0, 0);
    for a in 0..m {
        for b in (a + 1)..m {
            let c = commutator(&basis[a], &basis[b])?;
            let cnorm = c.frobenius_norm();
            if cnorm == 0.0 {
                continue;
            }
            let rhs = Mat::from_fn(m, 1, |g, _| basis[g].hs_inner(&c).unwrap());
            let x = lu.solve(&rhs);
            let mut resid = c.mat().clone();
            for g in 0..m {
                let coef = x[(g, 0)];
                if coef != c64::new(0.0, 0.0) {
                    resid -= basis[g].mat() * faer::Scale(coef);
                }
            }
            let scale = cnorm.max(1.0);
            let rel = linalg::frobenius(resid.as_ref()) / scale;
            if rel > max_residual {
                max_residual = rel;
                worst_pair = (a, b);
            }
            for g in 0..m {
                // Round-off dust on exact-zero constants would pollute the
                // Killing determinant for integer algebras.
                let coef = clean(x[(g, 0)], scale);
                f[(a * m + b) * m + g] = coef;
                f[(b * m + a) * m + g] = -coef;
            }
        }
    }
    let is_closed = max_residual <= CLOSURE_TOL;
    if !is_closed && options.strict {
        return Err(Error::NotClosed {
            alpha: worst_pair.0,
            beta: worst_pair.1,
            residual: max_residual,
        });
    }

    let adjoint: Vec<Mat<c64>> = (0..m)
        .map(|a| Mat::from_fn(m, m, |g, b| f[(a * m + b) * m + g]))
        .collect();
    let killing = Mat::from_fn(m, m, |a, b| linalg::trace_product(adjoint[a].as_ref(), adjoint[b].as_ref()));
    let mut report = LieAlgebraReport {
        m,
        f,
        adjoint,
        killing,
        is_closed,
        is_semisimple: false,
        max_residual,
        worst_pair,
        anti_hermitian: options.anti_hermitian,
    };
    report.is_semisimple = is_closed && killing_ratio(report.killing.as_ref()) > SEMISIMPLE_TOL;
    Ok(report)
}

fn clean(z: c64, scale: f64) -> c64 {
    let eps = 1e-13 * scale;
    c64::new(
        if z.re.abs() < eps { 0.0 } else { z.re },
        if z.im.abs() < eps { 0.0 } else { z.im },
    )
}

/// `|det B| / Π_α ‖B_α‖`, in `[0, 1]` by Hadamard's inequality.
fn killing_ratio(b: MatRef<'_, c64>) -> f64 {
    // Work in logs: products of row norms of large algebras overflow.
    let mut log_norms = 0.0f64;
    for i in 0..b.nrows() {
        let row = (0..b.ncols()).map(|j| b[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if row == 0.0 {
            return 0.0;
        }
        log_norms += row.ln();
    }
    let lu = b.partial_piv_lu();
    let u = lu.U();
    let mut log_det = 0.0f64;
    for i in 0..b.nrows() {
        let d = u[(i, i)].norm();
        if d == 0.0 {
            return 0.0;
        }
        log_det += d.ln();
    }
    (log_det - log_norms).exp()
}

/// Cartan criterion on a closed report: the Killing form is nondegenerate.
pub fn killing_semisimple(report: &LieAlgebraReport) -> Result<bool> {
    if !report.is_closed {
        let (residual, (alpha, beta)) = report.max_residual();
        return Err(Error::NotClosed { alpha, beta, residual });
    }
    Ok(killing_ratio(report.killing_form()) > SEMISIMPLE_TOL)
}

/// Whether `Σ_γ f_αβ^γ c_γ = 0` for all `α, β`.
pub fn verify_structure_condition(report: &LieAlgebraReport, c: &[c64]) -> Result<bool> {
    let m = report.dim();
    if c.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: c.len(),
        });
    }
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            let s: c64 = (0..m).map(|g| report.f(a, b, g) * c[g]).sum();
            worst = worst.max(s.norm());
        }
    }
    Ok(worst < STRUCTURE_CONDITION_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_collective, build_independent};
    use crate::operator::Pauli;

    fn zero() -> c64 {
        c64::new(0.0, 0.0)
    }

    #[test]
    fn su2_constants_hermitian_basis() {
        let r = structure_constants(&build_collective(2).unwrap(), LieOptions::default()).unwrap();
        assert!(r.is_closed());
        assert_eq!(r.f(0, 1, 2), c64::new(0.0, 2.0));
        assert_eq!(r.f(1, 0, 2), c64::new(0.0, -2.0));
        assert_eq!(r.f(1, 2, 0), c64::new(0.0, 2.0));
        assert_eq!(r.f(0, 1, 0), zero());
        // B = 8·I for f = 2iε
        for a in 0..3 {
            for b in 0..3 {
                let expected = if a == b { 8.0 } else { 0.0 };
                assert!((r.killing_form()[(a, b)] - c64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
        assert!(r.is_semisimple());
        assert!(r.antisymmetry_defect() < 1e-10);
    }

    #[test]
    fn su2_constants_anti_hermitian_basis_are_real() {
        let opts = LieOptions {
            anti_hermitian: true,
            ..Default::default()
        };
        let r = structure_constants(&build_collective(1).unwrap(), opts).unwrap();
        assert_eq!(r.f(0, 1, 2), c64::new(2.0, 0.0));
        assert!((r.killing_form()[(0, 0)] - c64::new(-8.0, 0.0)).norm() < 1e-12);
        assert!(r.is_semisimple());
    }

    #[test]
    fn adjoint_matches_structure_constants() {
        let r = structure_constants(&build_independent(2).unwrap(), LieOptions::default()).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                for g in 0..6 {
                    assert_eq!(r.adjoint(a)[(g, b)], r.f(a, b, g));
                    if a / 3 != b / 3 {
                        assert_eq!(r.f(a, b, g), zero());
                    }
                }
            }
        }
        assert!(r.is_semisimple());
        assert!(r.jacobi_residual() < 1e-12);
        assert_eq!(r.adjoint_rank().unwrap(), 6);
    }

    #[test]
    fn identity_only_is_abelian() {
        let r = structure_constants_of(&[Operator::identity(2)], LieOptions::default()).unwrap();
        assert!(r.is_closed());
        assert_eq!(r.killing_form()[(0, 0)], zero());
        assert!(!r.is_semisimple());
        assert_eq!(r.structure_condition_nullity().unwrap(), 1);
    }

    #[test]
    fn abelian_pair_is_not_semisimple() {
        let ops = [Operator::identity(2), Pauli::Z.matrix()];
        let r = structure_constants_of(&ops, LieOptions::default()).unwrap();
        assert!(!killing_semisimple(&r).unwrap());
        assert!(verify_structure_condition(&r, &[c64::new(3.0, 0.0), c64::new(-1.0, 0.5)]).unwrap());
    }

    #[test]
    fn structure_condition_on_su2() {
        let r = structure_constants(&build_collective(1).unwrap(), LieOptions::default()).unwrap();
        assert!(verify_structure_condition(&r, &[zero(); 3]).unwrap());
        let c = [zero(), zero(), c64::new(1.0, 0.0)];
        assert!(!verify_structure_condition(&r, &c).unwrap());
        assert_eq!(r.structure_condition_nullity().unwrap(), 0);
        assert!(verify_structure_condition(&r, &[zero(); 2]).is_err());
    }

    #[test]
    fn open_set_is_reported_or_rejected() {
        let ops = [Pauli::X.matrix(), Pauli::Y.matrix()];
        let r = structure_constants_of(&ops, LieOptions::default()).unwrap();
        assert!(!r.is_closed());
        assert!(!r.is_semisimple());
        assert!(killing_semisimple(&r).is_err());
        let strict = LieOptions {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(
            structure_constants_of(&ops, strict),
            Err(Error::NotClosed { alpha: 0, beta: 1, .. })
        ));
    }

    #[test]
    fn identity_breaks_semisimplicity() {
        let mut ops = build_collective(2).unwrap().generators().to_vec();
        ops.push(Operator::identity(4));
        let r = structure_constants_of(&ops, LieOptions::default()).unwrap();
        assert!(r.is_closed());
        assert!(!r.is_semisimple());
        assert_eq!(r.structure_condition_nullity().unwrap(), 1);
    }
}
