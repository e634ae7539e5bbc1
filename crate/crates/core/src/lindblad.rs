//! Semigroup master equation `dρ/dt = −i[H, ρ] + L_D[ρ]` with
//! `L_D[ρ] = ½ Σ_αβ a_αβ ([F_α, ρF_β†] + [F_αρ, F_β†])`.
//!
//! The coefficient matrix is diagonalised once into jump operators
//! `J_k = √λ_k Σ_α U_αk F_α`, so each evaluation costs `2K + 2` products
//! instead of `M²`.

use faer::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{validate_coefficients, ErrorGeneratorSet, COEFFICIENT_TOL};
use crate::operator::{expm_pade13, DensityMatrix, Operator};

/// Largest Hilbert-space dimension accepted by [`build_superoperator`].
pub const MAX_SUPEROPERATOR_DIM: usize = 128;
/// Largest dimension for the exact-propagator integrator.
pub const MAX_EXACT_DIM: usize = 64;
/// Trace drift that aborts an integration.
pub const TRACE_WATCHDOG: f64 = 1e-4;
/// Imaginary part above which `Tr[ρ L^n ρ]` is treated as non-real.
pub const REALITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    hamiltonian: Operator,
    operators: Vec<Operator>,
    coefficients: Mat<c64>,
    jumps: Vec<Mat<c64>>,
    /// `H − (i/2) Σ_k J_k† J_k`
    h_eff: Mat<c64>,
}

impl LindbladGenerator {
    pub fn new(hamiltonian: Operator, gens: &ErrorGeneratorSet) -> Result<Self> {
        Self::from_parts(hamiltonian, gens.generators().to_vec(), gens.coefficients().to_owned())
    }

    /// Closed-system generator `−i[H, ·]`.
    pub fn unitary(hamiltonian: Operator) -> Result<Self> {
        Self::from_parts(hamiltonian, Vec::new(), Mat::zeros(0, 0))
    }

    /// Generator from an arbitrary operator list and Hermitian PSD
    /// coefficient matrix.
    pub fn from_parts(hamiltonian: Operator, operators: Vec<Operator>, coefficients: Mat<c64>) -> Result<Self> {
        let n = hamiltonian.dim();
        if !hamiltonian.is_finite() {
            return Err(Error::NonFinite);
        }
        let defect = hamiltonian.hermiticity_defect();
        if defect > 1e-10 * hamiltonian.frobenius_norm().max(1.0) {
            return Err(Error::NotHermitian("Hamiltonian", defect));
        }
        for op in &operators {
            if op.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: op.dim(),
                });
            }
        }
        if coefficients.nrows() != operators.len() || coefficients.ncols() != operators.len() {
            return Err(Error::DimensionMismatch {
                expected: operators.len(),
                found: coefficients.nrows(),
            });
        }
        let mut jumps = Vec::new();
        if !operators.is_empty() {
            validate_coefficients(coefficients.as_ref())?;
            let sym = Mat::from_fn(operators.len(), operators.len(), |i, j| {
                (coefficients[(i, j)] + coefficients[(j, i)].conj()) * 0.5
            });
            let (vals, vecs) = linalg::hermitian_eigen(sym.as_ref())?;
            let cutoff = COEFFICIENT_TOL * vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            for (k, &lambda) in vals.iter().enumerate() {
                if lambda <= cutoff {
                    continue;
                }
                let mut j = Mat::<c64>::zeros(n, n);
                let s = lambda.sqrt();
                for (a, op) in operators.iter().enumerate() {
                    let w = vecs[(a, k)] * s;
                    if w != c64::new(0.0, 0.0) {
                        j += op.mat() * faer::Scale(w);
                    }
                }
                jumps.push(j);
            }
        }
        let mut h_eff = hamiltonian.mat().clone();
        for j in &jumps {
            linalg::mm_acc(h_eff.as_mut(), c64::new(0.0, -0.5), j.adjoint(), j.as_ref());
        }
        Ok(Self {
            hamiltonian,
            operators,
            coefficients,
            jumps,
            h_eff,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn coefficients(&self) -> MatRef<'_, c64> {
        self.coefficients.as_ref()
    }

    /// Diagonal-form jump operators `J_k`.
    pub fn jumps(&self) -> &[Mat<c64>] {
        &self.jumps
    }

    /// Step below which classical RK4 is stable for this generator:
    /// `2.5 / (2‖H‖₂ + 2 Σ_k ‖J_k‖₂²)`, from a bound on the spectral radius of `L`.
    pub fn rk4_stable_step(&self) -> Result<f64> {
        let spectral = |m: MatRef<'_, c64>| -> Result<f64> {
            Ok(linalg::singular_values(m)?.first().copied().unwrap_or(0.0))
        };
        let mut bound = 2.0 * spectral(self.hamiltonian.as_ref())?;
        for j in &self.jumps {
            bound += 2.0 * spectral(j.as_ref())?.powi(2);
        }
        Ok(if bound > 0.0 { 2.5 / bound } else { f64::INFINITY })
    }

    /// Same dissipator, different Hamiltonian.
    pub fn with_hamiltonian(&self, hamiltonian: Operator) -> Result<Self> {
        Self::from_parts(hamiltonian, self.operators.clone(), self.coefficients.clone())
    }

    fn check(&self, rho: MatRef<'_, c64>) -> Result<()> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho.nrows(),
            });
        }
        Ok(())
    }

    /// `L[ρ]` for an arbitrary square `ρ`.
    pub fn apply(&self, rho: MatRef<'_, c64>) -> Result<Mat<c64>> {
        self.check(rho)?;
        Ok(self.apply_unchecked(rho))
    }

    fn apply_unchecked(&self, rho: MatRef<'_, c64>) -> Mat<c64> {
        let mut out = linalg::mm(self.h_eff.as_ref(), rho);
        out *= faer::Scale(c64::new(0.0, -1.0));
        linalg::mm_acc(out.as_mut(), c64::new(0.0, 1.0), rho, self.h_eff.adjoint());
        self.add_sandwiches(out.as_mut(), rho);
        out
    }

    fn add_sandwiches(&self, mut out: MatMut<'_, c64>, rho: MatRef<'_, c64>) {
        for j in &self.jumps {
            let jr = linalg::mm(j.as_ref(), rho);
            linalg::mm_acc(out.rb_mut(), c64::new(1.0, 0.0), jr.as_ref(), j.adjoint());
        }
    }

    /// Dissipative part `L_D[ρ]` only.
    pub fn dissipator(&self, rho: MatRef<'_, c64>) -> Result<Mat<c64>> {
        self.check(rho)?;
        let n = self.dim();
        let mut out = Mat::<c64>::zeros(n, n);
        for j in &self.jumps {
            let jdj = linalg::mm(j.adjoint(), j.as_ref());
            linalg::mm_acc(out.as_mut(), c64::new(-0.5, 0.0), jdj.as_ref(), rho);
            linalg::mm_acc(out.as_mut(), c64::new(-0.5, 0.0), rho, jdj.as_ref());
        }
        self.add_sandwiches(out.as_mut(), rho);
        Ok(out)
    }
}

/// `dρ/dt` for the full generator.
pub fn apply_liouvillian(gen: &LindbladGenerator, rho: MatRef<'_, c64>) -> Result<Mat<c64>> {
    gen.apply(rho)
}

/// Column-stacked matrix `S` with `vec(L[ρ]) = S vec(ρ)`.
pub fn build_superoperator(gen: &LindbladGenerator) -> Result<Mat<c64>> {
    let n = gen.dim();
    if n > MAX_SUPEROPERATOR_DIM {
        return Err(Error::OutOfRange {
            what: "superoperator dimension",
            value: n,
            allowed: format!("<= {MAX_SUPEROPERATOR_DIM}"),
        });
    }
    let n2 = n * n;
    let mut s = Mat::<c64>::zeros(n2, n2);
    let minus_i = c64::new(0.0, -1.0);
    let plus_i = c64::new(0.0, 1.0);
    // vec(AXB) = (Bᵀ ⊗ A) vec(X)
    for c in 0..n {
        for i in 0..n {
            for k in 0..n {
                // −i H_eff ρ  →  I ⊗ (−i H_eff)
                s[(c * n + i, c * n + k)] += minus_i * gen.h_eff[(i, k)];
                // +i ρ H_eff†  →  conj(H_eff) ⊗ (i I)
                s[(k * n + c, i * n + c)] += plus_i * gen.h_eff[(k, i)].conj();
            }
        }
    }
    for j in &gen.jumps {
        for b in 0..n {
            for a in 0..n {
                let left = j[(b, a)].conj();
                if left == c64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..n {
                    for q in 0..n {
                        s[(b * n + r, a * n + q)] += left * j[(r, q)];
                    }
                }
            }
        }
    }
    Ok(s)
}

/// `Re Tr[ρ0 ρt]`.
pub fn fidelity(rho0: MatRef<'_, c64>, rhot: MatRef<'_, c64>) -> f64 {
    linalg::trace_product(rho0, rhot).re
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    Rk4,
    /// Repeated application of `exp(S·dt)`.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub integrator: Integrator,
    /// Record every n-th step (the final step is always recorded).
    pub sample_every: usize,
    pub keep_states: bool,
    /// Compute the smallest eigenvalue of each recorded state.
    pub track_min_eig: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::Rk4,
            sample_every: 1,
            keep_states: false,
            track_min_eig: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub fidelity: f64,
    pub trace: f64,
    pub purity: f64,
    /// `NaN` when not tracked.
    pub min_eig: f64,
    pub hermiticity: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Recorded states when requested, aligned with `points`.
    pub states: Vec<Mat<c64>>,
    pub final_state: Mat<c64>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.fidelity).collect()
    }

    pub fn final_fidelity(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.fidelity)
    }
}

/// Integrates from `ρ0` over `[0, t_final]` with `steps` uniform steps.
pub fn evolve(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    t_final: f64,
    steps: usize,
    options: EvolveOptions,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::OutOfRange {
            what: "steps",
            value: 0,
            allowed: ">= 1".into(),
        });
    }
    if !t_final.is_finite() || t_final < 0.0 {
        return Err(Error::Precondition(format!("final time must be finite and >= 0, got {t_final}")));
    }
    let n = gen.dim();
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.dim(),
        });
    }
    let dt = t_final / steps as f64;
    let every = options.sample_every.max(1);
    let r0 = rho0.as_ref();

    let propagator = match options.integrator {
        Integrator::Exact => {
            if n > MAX_EXACT_DIM {
                return Err(Error::OutOfRange {
                    what: "dimension for the exact integrator",
                    value: n,
                    allowed: format!("<= {MAX_EXACT_DIM}"),
                });
            }
            let s = build_superoperator(gen)?;
            Some(expm_pade13(linalg::scaled(s.as_ref(), c64::new(dt, 0.0)).as_ref())?)
        }
        Integrator::Rk4 => None,
    };

    let mut traj = Trajectory {
        points: Vec::new(),
        states: Vec::new(),
        final_state: r0.to_owned(),
    };
    let mut rho = r0.to_owned();
    record(&mut traj, r0, &rho, 0.0, options)?;
    for step in 1..=steps {
        rho = match &propagator {
            Some(p) => {
                let v = linalg::vec_of(rho.as_ref());
                linalg::unvec((p * &v).as_ref(), n)
            }
            None => rk4_step(gen, rho.as_ref(), dt),
        };
        let t = dt * step as f64;
        let tr = linalg::trace(rho.as_ref());
        let drift = (tr - c64::new(1.0, 0.0)).norm();
        // A valid state has ‖ρ‖_F ≤ 1; RK4 blow-up keeps the trace but not this.
        let growth = linalg::frobenius(rho.as_ref()) - 1.0;
        if !linalg::is_finite(rho.as_ref()) || drift > TRACE_WATCHDOG || growth > TRACE_WATCHDOG {
            return Err(Error::StepInstability {
                time: t,
                drift: if drift.is_finite() { drift.max(growth) } else { f64::INFINITY },
            });
        }
        if step % every == 0 || step == steps {
            record(&mut traj, r0, &rho, t, options)?;
        }
    }
    traj.final_state = rho;
    Ok(traj)
}

fn record(traj: &mut Trajectory, r0: MatRef<'_, c64>, rho: &Mat<c64>, t: f64, options: EvolveOptions) -> Result<()> {
    let min_eig = if options.track_min_eig {
        let sym = Mat::from_fn(rho.nrows(), rho.ncols(), |i, j| (rho[(i, j)] + rho[(j, i)].conj()) * 0.5);
        linalg::hermitian_eigenvalues(sym.as_ref())?
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::NAN
    };
    traj.points.push(TrajectoryPoint {
        t,
        fidelity: fidelity(r0, rho.as_ref()),
        trace: linalg::trace(rho.as_ref()).re,
        purity: linalg::trace_product(rho.as_ref(), rho.as_ref()).re,
        min_eig,
        hermiticity: linalg::hermiticity_defect(rho.as_ref()),
    });
    if options.keep_states {
        traj.states.push(rho.clone());
    }
    Ok(())
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step(gen: &LindbladGenerator, rho: MatRef<'_, c64>, dt: f64) -> Mat<c64> {
    let half = c64::new(0.5 * dt, 0.0);
    let k1 = gen.apply_unchecked(rho);
    let k2 = gen.apply_unchecked((rho + &k1 * faer::Scale(half)).as_ref());
    let k3 = gen.apply_unchecked((rho + &k2 * faer::Scale(half)).as_ref());
    let k4 = gen.apply_unchecked((rho + &k3 * faer::Scale(c64::new(dt, 0.0))).as_ref());
    let w = c64::new(dt / 6.0, 0.0);
    let mut next = rho.to_owned();
    next += (&k1 + &k2 * faer::Scale(c64::new(2.0, 0.0)) + &k3 * faer::Scale(c64::new(2.0, 0.0)) + &k4)
        * faer::Scale(w);
    next
}

/// Value of `τ_n = {Tr[ρ0 L^n ρ0]}^{−1/n}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauValue {
    Finite(f64),
    /// The trace vanishes: `1/τ_n = 0`.
    Infinite,
    /// No real `n`-th root: the trace is complex, or negative with `n` even.
    Undefined,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoherenceTime {
    pub order: u32,
    /// Raw `Tr[ρ0 L^n ρ0]`, equal to `(1/τ_n)^n`.
    pub trace: c64,
    pub tau: TauValue,
}

impl DecoherenceTime {
    /// `1/τ_n`, zero for an infinite time and `NaN` when undefined.
    pub fn inverse(&self) -> f64 {
        match self.tau {
            TauValue::Finite(t) => 1.0 / t,
            TauValue::Infinite => 0.0,
            TauValue::Undefined => f64::NAN,
        }
    }
}

/// Scale used to decide when `Tr[ρ0 L^n ρ0]` is zero: an upper bound on
/// the norm of `L` acting on states.
fn generator_scale(gen: &LindbladGenerator) -> f64 {
    let jump_norm: f64 = gen.jumps.iter().map(|j| linalg::frobenius(j.as_ref()).powi(2)).sum();
    (2.0 * gen.hamiltonian.frobenius_norm() + 2.0 * jump_norm).max(1.0)
}

pub fn decoherence_time(gen: &LindbladGenerator, rho0: &DensityMatrix, order: u32) -> Result<DecoherenceTime> {
    Ok(decoherence_times(gen, rho0, order)?.pop().expect("order >= 1"))
}

/// `τ_1 … τ_max_order`, sharing the repeated applications of `L`.
pub fn decoherence_times(gen: &LindbladGenerator, rho0: &DensityMatrix, max_order: u32) -> Result<Vec<DecoherenceTime>> {
    if max_order == 0 {
        return Err(Error::OutOfRange {
            what: "decoherence-time order",
            value: 0,
            allowed: ">= 1".into(),
        });
    }
    let r0 = rho0.as_ref();
    gen.check(r0)?;
    let scale = generator_scale(gen);
    let mut current = r0.to_owned();
    let mut out = Vec::with_capacity(max_order as usize);
    for n in 1..=max_order {
        current = gen.apply_unchecked(current.as_ref());
        let trace = linalg::trace_product(r0, current.as_ref());
        out.push(DecoherenceTime {
            order: n,
            trace,
            tau: tau_from_trace(trace, n, scale),
        });
    }
    Ok(out)
}

fn tau_from_trace(trace: c64, n: u32, scale: f64) -> TauValue {
    let zero_tol = 1e-13 * scale.powi(n as i32);
    if trace.norm() <= zero_tol {
        return TauValue::Infinite;
    }
    if trace.im.abs() > REALITY_TOL * trace.re.abs().max(1.0) {
        return TauValue::Undefined;
    }
    let r = trace.re;
    let inv_n = 1.0 / n as f64;
    if r > 0.0 {
        TauValue::Finite(r.powf(-inv_n))
    } else if n % 2 == 1 {
        TauValue::Finite(-(-r).powf(-inv_n))
    } else {
        TauValue::Undefined
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesReport {
    /// Time actually used after adaptive shrinking.
    pub t: f64,
    /// `Tr[ρ0 L^n ρ0]` for `n = 0..=5` as `[re, im]`.
    pub traces: Vec<[f64; 2]>,
    /// `Σ_{n=0}^{4} tⁿ/n! Tr[ρ0 Lⁿ ρ0]`.
    pub series: f64,
    pub integrated: f64,
    pub relative_error: f64,
    pub passed: bool,
}

/// Compares the integrated `F(t)` against its Taylor series through `t⁴`.
///
/// `t` is halved until the fourth-order term is below `1e−3` of the first
/// and the fifth-order remainder is below `1e−6`.
pub fn fidelity_series_check(gen: &LindbladGenerator, rho0: &DensityMatrix, t: f64) -> Result<SeriesReport> {
    let r0 = rho0.as_ref();
    gen.check(r0)?;
    let mut traces = Vec::with_capacity(6);
    let mut current = r0.to_owned();
    traces.push(linalg::trace_product(r0, r0));
    for _ in 1..=5 {
        current = gen.apply_unchecked(current.as_ref());
        traces.push(linalg::trace_product(r0, current.as_ref()));
    }
    let term = |n: usize, t: f64| traces[n].re * t.powi(n as i32) / factorial(n);
    let base = traces[0].re.abs();
    let mut t = t;
    for _ in 0..200 {
        if term(4, t).abs() <= 1e-3 * base && term(5, t).abs() <= 1e-6 * base {
            break;
        }
        t *= 0.5;
    }
    let series: f64 = (0..=4).map(|n| term(n, t)).sum();
    let traj = evolve(
        gen,
        rho0,
        t,
        400,
        EvolveOptions {
            sample_every: 400,
            track_min_eig: false,
            ..Default::default()
        },
    )?;
    let integrated = traj.final_fidelity();
    let relative_error = (series - integrated).abs() / integrated.abs().max(f64::MIN_POSITIVE);
    Ok(SeriesReport {
        t,
        traces: traces.iter().map(|z| [z.re, z.im]).collect(),
        series,
        integrated,
        relative_error,
        passed: relative_error < 1e-4,
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_collective;
    use crate::operator::Pauli;

    fn plus() -> DensityMatrix {
        let v = Col::from_fn(2, |_| c64::new(1.0, 0.0));
        DensityMatrix::pure(v.as_ref()).unwrap()
    }

    fn dephasing(gamma: f64) -> LindbladGenerator {
        let a = Mat::from_fn(1, 1, |_, _| c64::new(gamma, 0.0));
        LindbladGenerator::from_parts(Operator::zeros(2), vec![Pauli::Z.matrix()], a).unwrap()
    }

    #[test]
    fn dephasing_rate_on_plus_state() {
        let gen = dephasing(0.7);
        let d = gen.apply(plus().as_ref()).unwrap();
        assert!((d[(0, 1)] - c64::new(-2.0 * 0.7 * 0.5, 0.0)).norm() < 1e-14);
        assert!(d[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn dephasing_trajectory_closed_form() {
        let gen = dephasing(1.0);
        let opts = EvolveOptions {
            keep_states: true,
            ..Default::default()
        };
        let traj = evolve(&gen, &plus(), 3.0, 600, opts).unwrap();
        for (p, s) in traj.points.iter().zip(&traj.states) {
            assert!((s[(0, 1)].re - 0.5 * (-2.0 * p.t).exp()).abs() < 1e-6);
            assert!((p.fidelity - 0.5 * (1.0 + (-2.0 * p.t).exp())).abs() < 1e-6);
        }
    }

    #[test]
    fn unitary_generator_is_commutator() {
        let h = Pauli::X.matrix().add(&Pauli::Z.matrix().scale(c64::new(0.3, 0.0))).unwrap();
        let gen = LindbladGenerator::unitary(h.clone()).unwrap();
        let rho = plus();
        let out = gen.apply(rho.as_ref()).unwrap();
        let comm = crate::operator::commutator(&h, rho.op()).unwrap();
        let expected = comm.scale(c64::new(0.0, -1.0));
        assert!(linalg::max_abs((out - expected.mat()).as_ref()) < 1e-15);
    }

    #[test]
    fn superoperator_matches_direct_application() {
        let gens = build_collective(2).unwrap();
        let h = Pauli::X.matrix().kron(&Operator::identity(2));
        let gen = LindbladGenerator::new(h, &gens).unwrap();
        let s = build_superoperator(&gen).unwrap();
        let rho = Mat::from_fn(4, 4, |i, j| c64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let direct = gen.apply(rho.as_ref()).unwrap();
        let via = linalg::unvec((&s * linalg::vec_of(rho.as_ref())).as_ref(), 4);
        assert!(linalg::max_abs((direct - via).as_ref()) < 1e-12);
        // vec(I)† S = 0
        let id = linalg::vec_of(Mat::<c64>::identity(4, 4).as_ref());
        let left = id.adjoint() * &s;
        assert!((0..16).all(|k| left[k].norm() < 1e-12));
    }

    #[test]
    fn zero_generator_gives_zero_superoperator() {
        let gen = LindbladGenerator::unitary(Operator::zeros(3)).unwrap();
        let s = build_superoperator(&gen).unwrap();
        assert_eq!(linalg::max_abs(s.as_ref()), 0.0);
        let big = LindbladGenerator::unitary(Operator::zeros(129)).unwrap();
        assert!(build_superoperator(&big).is_err());
    }

    #[test]
    fn exact_and_rk4_agree() {
        let gens = build_collective(2).unwrap();
        let h = Pauli::Y.matrix().kron(&Pauli::Z.matrix());
        let gen = LindbladGenerator::new(h, &gens).unwrap();
        let psi = Col::from_fn(4, |i| c64::new(1.0 + i as f64, 0.5));
        let rho0 = DensityMatrix::pure(psi.as_ref()).unwrap();
        let a = evolve(&gen, &rho0, 1.0, 200, EvolveOptions::default()).unwrap();
        let exact = EvolveOptions {
            integrator: Integrator::Exact,
            ..Default::default()
        };
        let b = evolve(&gen, &rho0, 1.0, 200, exact).unwrap();
        assert!(linalg::max_abs((&a.final_state - &b.final_state).as_ref()) < 1e-6);
    }

    #[test]
    fn watchdog_catches_divergence() {
        let a = Mat::from_fn(1, 1, |_, _| c64::new(50.0, 0.0));
        let gen = LindbladGenerator::from_parts(Operator::zeros(2), vec![Pauli::X.matrix()], a).unwrap();
        let zero = DensityMatrix::pure(Col::from_fn(2, |i| c64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)).as_ref()).unwrap();
        assert!(matches!(
            evolve(&gen, &zero, 10.0, 10, EvolveOptions::default()),
            Err(Error::StepInstability { .. })
        ));
    }

    #[test]
    fn tau_conventions() {
        assert_eq!(tau_from_trace(c64::new(0.0, 0.0), 1, 1.0), TauValue::Infinite);
        assert_eq!(tau_from_trace(c64::new(-2.0, 0.0), 1, 1.0), TauValue::Finite(-0.5));
        assert_eq!(tau_from_trace(c64::new(4.0, 0.0), 2, 1.0), TauValue::Finite(0.5));
        assert_eq!(tau_from_trace(c64::new(-4.0, 0.0), 2, 1.0), TauValue::Undefined);
        assert_eq!(tau_from_trace(c64::new(1.0, 0.1), 3, 1.0), TauValue::Undefined);
    }

    #[test]
    fn dephasing_tau1() {
        // Tr[ρ L ρ] = −γ for |+⟩ under σz dephasing (off-diagonals −2γ·½).
        let d = decoherence_time(&dephasing(1.0), &plus(), 1).unwrap();
        assert!((d.trace - c64::new(-1.0, 0.0)).norm() < 1e-14);
        assert!((d.inverse() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn series_check_on_dephasing() {
        let report = fidelity_series_check(&dephasing(1.0), &plus(), 1.0).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.t < 1.0);
    }
}
