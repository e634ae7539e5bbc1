//! Symmetry-breaking perturbations `ε·G_p` added to a decoherence model.
//!
//! The perturbed dissipator uses the enlarged generator list `F ∪ G` with
//! coefficient matrix `[[A, εX], [εX†, ε²Q]]`, which is congruent to
//! `[[A, X], [X†, Q]]` and so stays positive semidefinite for every `ε`.

use faer::prelude::*;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lindblad::{
    decoherence_time, evolve, DecoherenceTime, EvolveOptions, Integrator, LindbladGenerator, MAX_EXACT_DIM,
};
use crate::linalg;
use crate::models::{validate_coefficients, ErrorGeneratorSet};
use crate::operator::{pauli_sum, DensityMatrix, Operator, Pauli, PauliString};
use crate::sampling;

/// Relative least-squares residual below which `G` counts as inside `span{F}`.
pub const SPAN_TOL: f64 = 1e-6;
/// Support leakage `max_α ‖F_α ρ̃‖_F` allowed for a decoherence-free state.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct PerturbedModel {
    hamiltonian: Operator,
    base: Vec<Operator>,
    base_coefficients: Mat<c64>,
    perturbers: Vec<Operator>,
    /// `a_αp`, `M × P`
    cross: Mat<c64>,
    /// `a_pq`, `P × P`
    pert: Mat<c64>,
    epsilon: f64,
}

impl PerturbedModel {
    pub fn new(
        base: &ErrorGeneratorSet,
        hamiltonian: Operator,
        perturbers: Vec<Operator>,
        cross: Mat<c64>,
        pert: Mat<c64>,
        epsilon: f64,
    ) -> Result<Self> {
        let (m, p) = (base.len(), perturbers.len());
        if p == 0 {
            return Err(Error::EmptyStack);
        }
        if cross.nrows() != m || cross.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: m * p,
                found: cross.nrows() * cross.ncols(),
            });
        }
        if pert.nrows() != p || pert.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: pert.nrows(),
            });
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::Precondition(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        for g in &perturbers {
            if g.dim() != base.dim() {
                return Err(Error::DimensionMismatch {
                    expected: base.dim(),
                    found: g.dim(),
                });
            }
            let r = span_residual(base.generators(), g)?;
            if r <= SPAN_TOL {
                return Err(Error::Precondition(format!(
                    "perturber lies in the span of the base generators (residual {r:.3e})"
                )));
            }
        }
        let model = Self {
            hamiltonian,
            base: base.generators().to_vec(),
            base_coefficients: base.coefficients().to_owned(),
            perturbers,
            cross,
            pert,
            epsilon,
        };
        validate_coefficients(model.enlarged(1.0).as_ref())?;
        Ok(model)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn perturbers(&self) -> &[Operator] {
        &self.perturbers
    }

    pub fn base_generators(&self) -> &[Operator] {
        &self.base
    }

    pub fn cross_coefficients(&self) -> MatRef<'_, c64> {
        self.cross.as_ref()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::Precondition(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        Ok(Self {
            epsilon,
            ..self.clone()
        })
    }

    pub fn with_hamiltonian(&self, hamiltonian: Operator) -> Self {
        Self {
            hamiltonian,
            ..self.clone()
        }
    }

    /// `[[A, εX], [εX†, ε²Q]]`
    pub fn enlarged(&self, epsilon: f64) -> Mat<c64> {
        let (m, p) = (self.base.len(), self.perturbers.len());
        Mat::from_fn(m + p, m + p, |i, j| match (i < m, j < m) {
            (true, true) => self.base_coefficients[(i, j)],
            (true, false) => self.cross[(i, j - m)] * epsilon,
            (false, true) => self.cross[(j, i - m)].conj() * epsilon,
            (false, false) => self.pert[(i - m, j - m)] * (epsilon * epsilon),
        })
    }

    /// Full generator with Hamiltonian, base and perturbing channels.
    pub fn generator(&self) -> Result<LindbladGenerator> {
        let ops = self.base.iter().chain(&self.perturbers).cloned().collect();
        LindbladGenerator::from_parts(self.hamiltonian.clone(), ops, self.enlarged(self.epsilon))
    }

    /// Unperturbed generator (same Hamiltonian).
    pub fn base_generator(&self) -> Result<LindbladGenerator> {
        LindbladGenerator::from_parts(self.hamiltonian.clone(), self.base.clone(), self.base_coefficients.clone())
    }

    /// `max_α ‖F_α ρ‖_F`: zero exactly when `ρ` lives in the common kernel.
    pub fn support_leakage(&self, rho: MatRef<'_, c64>) -> f64 {
        self.base
            .iter()
            .map(|f| linalg::frobenius(linalg::mm(f.as_ref(), rho).as_ref()))
            .fold(0.0, f64::max)
    }
}

/// Relative residual of the least-squares fit of `g` by `span{ops}`.
pub fn span_residual(ops: &[Operator], g: &Operator) -> Result<f64> {
    let m = ops.len();
    let gnorm = g.frobenius_norm();
    if gnorm == 0.0 {
        return Ok(0.0);
    }
    if m == 0 {
        return Ok(1.0);
    }
    let gram = Mat::from_fn(m, m, |i, j| ops[i].hs_inner(&ops[j]).unwrap());
    let rhs = Mat::from_fn(m, 1, |i, _| ops[i].hs_inner(g).unwrap());
    let x = gram.partial_piv_lu().solve(&rhs);
    let mut r = g.mat().clone();
    for (i, op) in ops.iter().enumerate() {
        r -= op.mat() * faer::Scale(x[(i, 0)]);
    }
    Ok(linalg::frobenius(r.as_ref()) / gnorm)
}

/// Full perturbed dissipator `L_D + L'_D` applied to `ρ`.
pub fn perturbed_dissipator(pm: &PerturbedModel, rho: MatRef<'_, c64>) -> Result<Mat<c64>> {
    pm.generator()?.dissipator(rho)
}

/// Leading-order action of the new terms on a state in the common kernel:
/// `−(ε/2) Σ_αp a_αp ρ̃ G_p† F_α + h.c.`
pub fn first_order_formula(pm: &PerturbedModel, rho: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let n = pm.hamiltonian.dim();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.nrows(),
        });
    }
    // Σ_αp a_αp G_p† F_α
    let mut k = Mat::<c64>::zeros(n, n);
    for (a, f) in pm.base.iter().enumerate() {
        for (p, g) in pm.perturbers.iter().enumerate() {
            let c = pm.cross[(a, p)];
            if c != c64::new(0.0, 0.0) {
                linalg::mm_acc(k.as_mut(), c, g.as_ref().adjoint(), f.as_ref());
            }
        }
    }
    let half = linalg::mm(rho, k.as_ref());
    let s = c64::new(-0.5 * pm.epsilon, 0.0);
    Ok(Mat::from_fn(n, n, |i, j| (half[(i, j)] + half[(j, i)].conj()) * s))
}

/// `Tr[ρ L_{A,B}[ρ]]` with `L_{A,B}[ρ] = ½([A, ρB†] + [Aρ, B†])`.
fn pair_trace(a: &Operator, b: &Operator, rho: MatRef<'_, c64>) -> c64 {
    let ar = linalg::mm(a.as_ref(), rho);
    let bd = linalg::adjoint(b.as_ref());
    let rar = linalg::mm(rho, ar.as_ref());
    let bda = linalg::mm(bd.as_ref(), a.as_ref());
    let rr = linalg::mm(rho, rho);
    // Tr(ρAρB†) − ½Tr(ρρB†A) − ½Tr(ρB†Aρ)
    let t1 = linalg::trace_product(rar.as_ref(), bd.as_ref());
    let t2 = linalg::trace_product(rr.as_ref(), bda.as_ref());
    t1 - t2
}

#[derive(Clone, Copy, Debug)]
pub struct Tau1Report {
    /// `Tr[ρ L ρ]` under the full perturbed generator.
    pub full: DecoherenceTime,
    /// Part linear in ε: `ε Σ_αp (a_αp Tr[ρ L_{F_α,G_p} ρ] + a*_αp Tr[ρ L_{G_p,F_α} ρ])`.
    pub first_order: f64,
    /// Part quadratic in ε: `ε² Σ_pq a_pq Tr[ρ L_{G_p,G_q} ρ]`.
    pub second_order: f64,
}

/// First-order decoherence rate of a state in the common kernel of the base
/// generators, split by order in ε.
pub fn tau1_perturbed(pm: &PerturbedModel, rho: &DensityMatrix) -> Result<Tau1Report> {
    let leak = pm.support_leakage(rho.as_ref());
    if leak > SUPPORT_TOL {
        return Err(Error::Precondition(format!(
            "state is not supported on the decoherence-free subspace (leakage {leak:.3e})"
        )));
    }
    tau1_any(pm, rho)
}

/// As [`tau1_perturbed`] without the support check, for reference states.
pub fn tau1_any(pm: &PerturbedModel, rho: &DensityMatrix) -> Result<Tau1Report> {
    let r = rho.as_ref();
    let eps = pm.epsilon;
    let mut first = c64::new(0.0, 0.0);
    for (a, f) in pm.base.iter().enumerate() {
        for (p, g) in pm.perturbers.iter().enumerate() {
            let c = pm.cross[(a, p)];
            if c != c64::new(0.0, 0.0) {
                first += c * pair_trace(f, g, r) + c.conj() * pair_trace(g, f, r);
            }
        }
    }
    let mut second = c64::new(0.0, 0.0);
    for (p, gp) in pm.perturbers.iter().enumerate() {
        for (q, gq) in pm.perturbers.iter().enumerate() {
            second += pm.pert[(p, q)] * pair_trace(gp, gq, r);
        }
    }
    Ok(Tau1Report {
        full: decoherence_time(&pm.generator()?, rho, 1)?,
        first_order: (first * eps).re,
        second_order: (second * (eps * eps)).re,
    })
}

/// Single-qubit Pauli perturbers `σ^u_q`, one per requested `(qubit, letter)`.
pub fn single_qubit_perturbers(num_qubits: usize, terms: &[(usize, Pauli)]) -> Result<Vec<Operator>> {
    terms
        .iter()
        .map(|&(q, letter)| {
            let s = PauliString::single(num_qubits, q, letter)?;
            Ok(pauli_sum(&[s], &[c64::new(1.0, 0.0)]))
        })
        .collect()
}

/// Random cross block `X` (entries of size `scale`) and perturber block `Q`,
/// with `X` shrunk until `[[A, X], [X†, Q]]` is positive semidefinite.
pub fn random_coefficient_blocks<R: Rng + ?Sized>(
    a: MatRef<'_, c64>,
    num_perturbers: usize,
    scale: f64,
    rng: &mut R,
) -> Result<(Mat<c64>, Mat<c64>)> {
    let m = a.nrows();
    let q = sampling::random_psd(num_perturbers, rng);
    let mut x = Mat::from_fn(m, num_perturbers, |_, _| sampling::complex_normal(rng) * scale);
    for _ in 0..64 {
        let full = Mat::from_fn(m + num_perturbers, m + num_perturbers, |i, j| match (i < m, j < m) {
            (true, true) => a[(i, j)],
            (true, false) => x[(i, j - m)],
            (false, true) => x[(j, i - m)].conj(),
            (false, false) => q[(i - m, j - m)],
        });
        let min = linalg::hermitian_eigenvalues(full.as_ref())?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min >= 0.0 {
            return Ok((x, q));
        }
        x *= faer::Scale(c64::new(0.5, 0.0));
    }
    Ok((Mat::zeros(m, num_perturbers), q))
}

/// A randomized symmetry-breaking scenario: `num_perturbers` single-qubit
/// Pauli perturbers on random qubits with random coefficient blocks.
pub fn random_scenario<R: Rng + ?Sized>(
    base: &ErrorGeneratorSet,
    hamiltonian: Operator,
    num_perturbers: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<PerturbedModel> {
    let k = base.dim().trailing_zeros() as usize;
    let mut terms: Vec<(usize, Pauli)> = Vec::new();
    let mut guard = 0;
    while terms.len() < num_perturbers {
        let t = (rng.random_range(0..k), Pauli::ALL[rng.random_range(1..4)]);
        guard += 1;
        if !terms.contains(&t) || guard > 1000 {
            terms.push(t);
        }
    }
    let perturbers = single_qubit_perturbers(k, &terms)?;
    let (cross, pert) = random_coefficient_blocks(base.coefficients(), num_perturbers, 0.3, rng)?;
    PerturbedModel::new(base, hamiltonian, perturbers, cross, pert, epsilon)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingPoint {
    pub epsilon: f64,
    pub one_minus_f: f64,
    /// Same quantity for the reference state, when one was supplied.
    pub reference_one_minus_f: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; absent with fewer than three points.
    pub slope_stderr: Option<f64>,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub t: f64,
    pub points: Vec<ScalingPoint>,
    /// `None` when every `1 − F(T)` is below the noise floor.
    pub fit: Option<LogLogFit>,
    pub reference_fit: Option<LogLogFit>,
    /// `(1 − F)(2ε) / (1 − F)(ε)` for grid pairs that differ by a factor two.
    pub doubling_ratios: Vec<f64>,
    /// `1 − F(T)` increases along the ε grid.
    pub monotone: bool,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct ScalingOptions {
    /// Final time; chosen automatically when `None`.
    pub t: Option<f64>,
    pub steps: usize,
    /// Threads for sweep points. Output is independent of this value when
    /// faer's global parallelism is `Par::Seq`.
    pub workers: usize,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            t: None,
            steps: 200,
            workers: 1,
        }
    }
}

/// Points with `1 − F` below this are treated as zero.
const NOISE_FLOOR: f64 = 1e-12;

fn one_minus_f(pm: &PerturbedModel, rho: &DensityMatrix, t: f64, steps: usize) -> Result<f64> {
    let gen = pm.generator()?;
    let (integrator, steps) = if gen.dim() <= MAX_EXACT_DIM.min(16) {
        (Integrator::Exact, 1)
    } else {
        (Integrator::Rk4, steps)
    };
    let opts = EvolveOptions {
        integrator,
        sample_every: steps,
        keep_states: false,
        track_min_eig: false,
    };
    let traj = evolve(&gen, rho, t, steps, opts)?;
    // Against F(0) so mixed inputs measure decay rather than impurity.
    Ok(traj.points[0].fidelity - traj.final_fidelity())
}

/// Picks `T` with `1e−3 ≤ 1 − F(T) ≤ 1e−1` at the largest ε, within
/// `1e−6 < 1 − F < 1e−1` when the bracket cannot be hit exactly.
fn select_time(pm: &PerturbedModel, rho: &DensityMatrix, eps_max: f64, steps: usize) -> Result<f64> {
    let model = pm.with_epsilon(eps_max)?;
    let mut t = 1.0;
    for _ in 0..60 {
        let d = one_minus_f(&model, rho, t, steps)?;
        if d > 1e-1 {
            t *= 0.5;
        } else if d < 1e-3 && t < 1e6 {
            t *= 2.0;
        } else {
            break;
        }
    }
    Ok(t)
}

/// Least-squares fit of `log y = slope · log x + intercept`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<LogLogFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > NOISE_FLOOR)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Some(LogLogFit {
        slope,
        intercept,
        slope_stderr: (n > 2).then(|| (ssr / (nf - 2.0) / sxx).sqrt()),
        r_squared: if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 },
        points: n,
    })
}

/// Sweeps ε, recording `1 − F(T)` for `rho` (and optionally a reference
/// state), and fits the exponent of `1 − F(T)` in ε.
pub fn epsilon_scaling(
    template: &PerturbedModel,
    rho: &DensityMatrix,
    reference: Option<&DensityMatrix>,
    eps_grid: &[f64],
    options: ScalingOptions,
) -> Result<ScalingReport> {
    if eps_grid.is_empty() {
        return Err(Error::EmptyStack);
    }
    if let Some(bad) = eps_grid.iter().find(|e| !e.is_finite() || **e < 0.0) {
        return Err(Error::Precondition(format!("epsilon grid entry {bad} must be finite and >= 0")));
    }
    let eps_max = eps_grid.iter().copied().fold(0.0, f64::max);
    let steps = options.steps.max(1);
    let t = match options.t {
        Some(t) => t,
        None if eps_max > 0.0 => select_time(template, rho, eps_max, steps)?,
        None => 1.0,
    };

    let run = |&eps: &f64| -> Result<ScalingPoint> {
        let model = template.with_epsilon(eps)?;
        Ok(ScalingPoint {
            epsilon: eps,
            one_minus_f: one_minus_f(&model, rho, t, steps)?,
            reference_one_minus_f: reference.map(|r| one_minus_f(&model, r, t, steps)).transpose()?,
        })
    };
    let points: Vec<ScalingPoint> = if options.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
        pool.install(|| eps_grid.par_iter().map(run).collect::<Result<_>>())?
    } else {
        eps_grid.iter().map(run).collect::<Result<_>>()?
    };

    let xs: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.one_minus_f).collect();
    let fit = loglog_fit(&xs, &ys);
    let reference_fit = reference.and_then(|_| {
        let rs: Vec<f64> = points.iter().map(|p| p.reference_one_minus_f.unwrap_or(0.0)).collect();
        loglog_fit(&xs, &rs)
    });

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let monotone = order.windows(2).all(|w| ys[w[1]] >= ys[w[0]] || xs[w[1]] == xs[w[0]]);

    let mut doubling_ratios = Vec::new();
    for (i, pi) in points.iter().enumerate() {
        for pj in &points[i + 1..] {
            let (lo, hi) = if pi.epsilon < pj.epsilon { (pi, pj) } else { (pj, pi) };
            if lo.epsilon > 0.0 && (hi.epsilon / lo.epsilon - 2.0).abs() < 1e-9 && lo.one_minus_f > NOISE_FLOOR {
                doubling_ratios.push(hi.one_minus_f / lo.one_minus_f);
            }
        }
    }

    let diagnostic = if fit.is_none() {
        Some("every 1 - F(T) is below the noise floor; fit skipped".to_string())
    } else if !monotone {
        Some("1 - F(T) is not monotone in epsilon; oscillation dominates, try a longer T".to_string())
    } else if eps_max > 0.0 && ys.iter().any(|&y| y >= 0.1) {
        Some("1 - F(T) >= 0.1 at some grid point; outside the perturbative regime".to_string())
    } else {
        None
    };

    Ok(ScalingReport {
        t,
        points,
        fit,
        reference_fit,
        doubling_ratios,
        monotone,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfs::find_dfs_semisimple;
    use crate::models::build_collective;
    use crate::operator::DEFAULT_RANK_TOL;
    use crate::sampling::SeedStream;

    fn singlet_setup(epsilon: f64) -> (PerturbedModel, DensityMatrix) {
        let base = build_collective(2).unwrap();
        let dfs = find_dfs_semisimple(&base, DEFAULT_RANK_TOL).unwrap();
        let rho = DensityMatrix::pure(dfs.basis.col(0)).unwrap();
        let g = single_qubit_perturbers(2, &[(0, Pauli::Z)]).unwrap();
        let cross = Mat::from_fn(3, 1, |a, _| c64::new(0.2 * (a as f64 + 1.0), 0.1));
        let pert = Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0));
        let pm = PerturbedModel::new(&base, Operator::zeros(4), g, cross, pert, epsilon).unwrap();
        (pm, rho)
    }

    #[test]
    fn zero_epsilon_matches_base() {
        let (pm, rho) = singlet_setup(0.0);
        let mut rng = SeedStream::new(2).rng(0);
        let sigma = sampling::random_density(4, 4, &mut rng);
        let a = perturbed_dissipator(&pm, sigma.as_ref()).unwrap();
        let b = pm.base_generator().unwrap().dissipator(sigma.as_ref()).unwrap();
        assert!(linalg::max_abs((a - b).as_ref()) < 1e-14);
        assert!(perturbed_dissipator(&pm, rho.as_ref()).unwrap().norm_l2() < 1e-14);
    }

    #[test]
    fn first_order_formula_is_leading_term() {
        let (pm, rho) = singlet_setup(0.0);
        let mut ratios = Vec::new();
        for eps in [1e-4, 1e-3, 1e-2] {
            let model = pm.with_epsilon(eps).unwrap();
            let full = perturbed_dissipator(&model, rho.as_ref()).unwrap();
            let first = first_order_formula(&model, rho.as_ref()).unwrap();
            assert!(first.norm_l2() > 1e-2 * eps);
            ratios.push((full - first).norm_l2() / (eps * eps));
        }
        let max = ratios.iter().copied().fold(0.0, f64::max);
        assert!(max < 10.0, "{ratios:?}");
    }

    #[test]
    fn block_diagonal_coefficients_give_second_order() {
        let (pm, rho) = singlet_setup(1e-3);
        let zero_cross = PerturbedModel {
            cross: Mat::zeros(3, 1),
            ..pm
        };
        let d = perturbed_dissipator(&zero_cross, rho.as_ref()).unwrap();
        assert!(d.norm_l2() < 10.0 * 1e-6);
    }

    #[test]
    fn tau1_vanishes_on_singlet() {
        let (pm, rho) = singlet_setup(0.05);
        let t = tau1_perturbed(&pm, &rho).unwrap();
        assert!(t.first_order.abs() < 1e-12);
        // What remains is the G–G block: −ε²(⟨Z₁²⟩ − ⟨Z₁⟩²) = −ε².
        assert!((t.second_order + 0.05 * 0.05).abs() < 1e-12);
        assert!((t.full.trace.re - t.first_order - t.second_order).abs() < 1e-12);
        let zero = DensityMatrix::pure(Col::from_fn(4, |i| c64::new((i == 0) as u8 as f64, 0.0)).as_ref()).unwrap();
        assert!(tau1_perturbed(&pm, &zero).is_err());
        assert!(tau1_any(&pm, &zero).unwrap().full.inverse().abs() > 1e-3);
    }

    #[test]
    fn tau1_split_matches_odd_even_parts() {
        // Tr[ρLρ] is a quadratic polynomial in ε; its odd part is the first order.
        let base = build_collective(2).unwrap();
        let mut rng = SeedStream::new(8).rng(0);
        let pm = random_scenario(&base, Operator::zeros(4), 2, 0.1, &mut rng).unwrap();
        let rho = sampling::random_density(4, 2, &mut rng);
        let t = tau1_any(&pm, &rho).unwrap();
        let eval = |e: f64| {
            let ops: Vec<Operator> = pm.base.iter().chain(&pm.perturbers).cloned().collect();
            let coeffs = pm.enlarged(e);
            let mut acc = c64::new(0.0, 0.0);
            for (i, a) in ops.iter().enumerate() {
                for (j, b) in ops.iter().enumerate() {
                    acc += coeffs[(i, j)] * pair_trace(a, b, rho.as_ref());
                }
            }
            acc.re
        };
        let odd = 0.5 * (eval(0.1) - eval(-0.1));
        assert!((odd - t.first_order).abs() < 1e-12);
        assert!((eval(0.1) - t.full.trace.re).abs() < 1e-12);
    }

    #[test]
    fn perturbers_inside_the_span_are_rejected() {
        let base = build_collective(1).unwrap();
        let g = single_qubit_perturbers(1, &[(0, Pauli::Z)]).unwrap();
        let err = PerturbedModel::new(&base, Operator::zeros(2), g, Mat::zeros(3, 1), Mat::identity(1, 1), 0.1);
        assert!(err.is_err());
    }

    #[test]
    fn non_psd_enlarged_matrix_is_rejected() {
        let base = build_collective(2).unwrap();
        let g = single_qubit_perturbers(2, &[(0, Pauli::Z)]).unwrap();
        let cross = Mat::from_fn(3, 1, |_, _| c64::new(5.0, 0.0));
        let err = PerturbedModel::new(&base, Operator::zeros(4), g, cross, Mat::identity(1, 1), 0.1);
        assert!(matches!(err, Err(Error::NotPositive(..))));
    }

    #[test]
    fn loglog_fit_recovers_power() {
        let xs = [1e-3, 2e-3, 1e-2];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let fit = loglog_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.slope_stderr.unwrap() < 1e-10);
    }

    #[test]
    fn zero_grid_skips_fit() {
        let (pm, rho) = singlet_setup(0.0);
        let report = epsilon_scaling(&pm, &rho, None, &[0.0, 0.0], ScalingOptions::default()).unwrap();
        assert!(report.fit.is_none());
        assert!(report.points.iter().all(|p| p.one_minus_f.abs() < 1e-8));
    }
}
