//! Encoded two-qubit gates built from projector combinations of four
//! decoherence-free states `|0⟩ … |3⟩` (labels `q1 q2` in binary).
//!
//! A schedule is a fixed Hamiltonian shape `H` driven by a piecewise-constant
//! amplitude `c(t)`. Because every segment uses the same `H`, the ideal gate
//! is `exp(−i·H·A)` with pulse area `A = ∫c dt`.

use faer::prelude::*;
use serde::Serialize;

use crate::dfs::{find_dfs_semisimple, DfSubspace};
use crate::error::{Error, Result};
use crate::lindblad::{evolve, EvolveOptions, LindbladGenerator};
use crate::linalg;
use crate::models::{build_cluster, build_collective, ErrorGeneratorSet};
use crate::operator::{matrix_exp, DensityMatrix, Operator, DEFAULT_RANK_TOL};

/// Support residual `‖H − PHP‖_F` tolerated for a gate Hamiltonian.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Four orthonormal DF states labelled `00, 01, 10, 11` by column index.
#[derive(Clone, Debug)]
pub struct EncodedBasis {
    states: Mat<c64>,
}

impl EncodedBasis {
    /// Uses the first four basis vectors of `dfs`.
    pub fn from_dfs(dfs: &DfSubspace) -> Result<Self> {
        if dfs.dimension() < 4 {
            return Err(Error::Precondition(format!(
                "two encoded qubits need a DF subspace of dimension >= 4, got {}",
                dfs.dimension()
            )));
        }
        Ok(Self {
            states: dfs.basis.subcols(0, 4).to_owned(),
        })
    }

    /// Arbitrary orthonormal `N × 4` columns.
    pub fn from_states(states: Mat<c64>) -> Result<Self> {
        if states.ncols() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: states.ncols(),
            });
        }
        let defect = linalg::orthonormality_defect(states.as_ref());
        if defect > 1e-10 {
            return Err(Error::Precondition(format!("encoded states are not orthonormal (defect {defect:.3e})")));
        }
        Ok(Self { states })
    }

    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn states(&self) -> MatRef<'_, c64> {
        self.states.as_ref()
    }

    pub fn state(&self, label: usize) -> ColRef<'_, c64> {
        self.states.col(label)
    }

    pub fn projector(&self) -> Mat<c64> {
        linalg::projector(self.states.as_ref())
    }

    /// `Σ_ij m_ij |i⟩⟨j|` for a 4×4 encoded matrix.
    pub fn embed(&self, m: MatRef<'_, c64>) -> Operator {
        let left = linalg::mm(self.states.as_ref(), m);
        Operator::from_mat_unchecked(linalg::mm(left.as_ref(), self.states.adjoint()))
    }

    /// `B† X B`
    pub fn restrict(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let xb = linalg::mm(x, self.states.as_ref());
        linalg::mm(self.states.adjoint(), xb.as_ref())
    }
}

/// Encoded basis from the first four singlets of a collective register.
pub fn build_encoded_basis(dfs: &DfSubspace) -> Result<EncodedBasis> {
    EncodedBasis::from_dfs(dfs)
}

/// Two clusters of `cluster_size` qubits, each carrying a two-dimensional
/// singlet space; `|2a + b⟩ = |s_a⟩ ⊗ |s_b⟩`. Returns the basis together with
/// the cluster noise model of the `2·cluster_size` register.
pub fn cluster_encoded_basis(cluster_size: usize) -> Result<(EncodedBasis, ErrorGeneratorSet)> {
    let block = find_dfs_semisimple(&build_collective(cluster_size)?, DEFAULT_RANK_TOL)?;
    if block.dimension() < 2 {
        return Err(Error::Precondition(format!(
            "a cluster of {cluster_size} qubits has {} singlets; need at least 2",
            block.dimension()
        )));
    }
    let s = block.basis.subcols(0, 2);
    let d = s.nrows();
    let states = Mat::from_fn(d * d, 4, |row, label| {
        let (a, b) = (label / 2, label % 2);
        s[(row / d, a)] * s[(row % d, b)]
    });
    let noise = build_cluster(2 * cluster_size, cluster_size)?;
    Ok((EncodedBasis::from_states(states)?, noise))
}

/// Piecewise-constant drive of a fixed Hamiltonian shape.
#[derive(Clone, Debug)]
pub struct GateSchedule {
    pub name: String,
    /// Unit-amplitude Hamiltonian in the full register.
    pub hamiltonian: Operator,
    /// Encoded 4×4 form of `hamiltonian`.
    pub encoded: Mat<c64>,
    /// `(duration, amplitude)` segments.
    pub segments: Vec<(f64, f64)>,
}

impl GateSchedule {
    fn new(name: &str, basis: &EncodedBasis, encoded: Mat<c64>, area: f64) -> Self {
        Self {
            name: name.to_string(),
            hamiltonian: basis.embed(encoded.as_ref()),
            encoded,
            segments: vec![(area.abs(), area.signum())],
        }
    }

    /// Replaces the pulse by a single unit-amplitude segment of the given area.
    pub fn with_area(mut self, area: f64) -> Self {
        self.segments = vec![(area.abs(), if area == 0.0 { 0.0 } else { area.signum() })];
        self
    }

    pub fn with_segments(mut self, segments: Vec<(f64, f64)>) -> Self {
        self.segments = segments;
        self
    }

    /// `∫ c dt`
    pub fn area(&self) -> f64 {
        self.segments.iter().map(|(d, a)| d * a).sum()
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|(d, _)| d).sum()
    }

    /// `exp(−i H A)` in the full register.
    pub fn unitary(&self) -> Result<Operator> {
        matrix_exp(&self.hamiltonian.scale(c64::new(0.0, -1.0)), self.area())
    }

    /// `exp(−i H_enc A)` on the encoded space.
    pub fn encoded_unitary(&self) -> Result<Mat<c64>> {
        let h = Operator::new(self.encoded.clone())?;
        Ok(matrix_exp(&h.scale(c64::new(0.0, -1.0)), self.area())?.into_mat())
    }

    /// `‖H − PHP‖_F` for the projector onto the encoded states.
    pub fn support_residual(&self, basis: &EncodedBasis) -> f64 {
        let p = basis.projector();
        let php = linalg::mm(linalg::mm(p.as_ref(), self.hamiltonian.as_ref()).as_ref(), p.as_ref());
        linalg::frobenius((self.hamiltonian.mat() - php).as_ref())
    }
}

fn encoded_from(entries: &[(usize, usize, f64)]) -> Mat<c64> {
    let mut m = Mat::<c64>::zeros(4, 4);
    for &(i, j, v) in entries {
        m[(i, j)] = c64::new(v, 0.0);
    }
    m
}

/// `|11⟩⟨10| + |10⟩⟨11|` with area `π/2`: swaps `|10⟩, |11⟩` with phase `−i`.
pub fn cnot_hamiltonian(basis: &EncodedBasis) -> GateSchedule {
    let m = encoded_from(&[(3, 2, 1.0), (2, 3, 1.0)]);
    GateSchedule::new("cnot", basis, m, std::f64::consts::FRAC_PI_2)
}

/// Encoded `σx` on qubit `target` (1 = high bit, 2 = low bit), rotation
/// angle equal to the pulse area.
pub fn rotation_hamiltonian(basis: &EncodedBasis, target: usize, angle: f64) -> Result<GateSchedule> {
    let m = match target {
        2 => encoded_from(&[(1, 0, 1.0), (0, 1, 1.0), (3, 2, 1.0), (2, 3, 1.0)]),
        1 => encoded_from(&[(2, 0, 1.0), (0, 2, 1.0), (3, 1, 1.0), (1, 3, 1.0)]),
        _ => {
            return Err(Error::OutOfRange {
                what: "encoded target qubit",
                value: target,
                allowed: "1 or 2".into(),
            })
        }
    };
    Ok(GateSchedule::new(&format!("rot-x{target}"), basis, m, angle))
}

/// Encoded `σz` on qubit `target`; diagonal projector combination.
pub fn z_rotation_hamiltonian(basis: &EncodedBasis, target: usize, angle: f64) -> Result<GateSchedule> {
    let bit = match target {
        1 => 1,
        2 => 0,
        _ => {
            return Err(Error::OutOfRange {
                what: "encoded target qubit",
                value: target,
                allowed: "1 or 2".into(),
            })
        }
    };
    let entries: Vec<(usize, usize, f64)> = (0..4)
        .map(|i| (i, i, if (i >> bit) & 1 == 0 { 1.0 } else { -1.0 }))
        .collect();
    Ok(GateSchedule::new(&format!("rot-z{target}"), basis, encoded_from(&entries), angle))
}

/// Encoded CNOT (control q1, target q2) as a permutation of labels.
pub const CNOT_PERMUTATION: [usize; 4] = [0, 1, 3, 2];

#[derive(Clone, Debug, Serialize)]
pub struct TruthTable {
    /// `U_enc[i][j] = ⟨i|U|j⟩` as `[re, im]`.
    pub amplitudes: Vec<Vec<[f64; 2]>>,
    /// Phase of the permuted output for each input label.
    pub phases: Vec<[f64; 2]>,
    /// `max |U_enc − diag-phase · Π|` with phases of unit modulus.
    pub max_amplitude_error: f64,
    /// `‖U B − B U_enc‖_F`: amplitude leaving the encoded span.
    pub leakage: f64,
}

/// Exponentiates the schedule in the full register and compares it with the
/// permutation `perm` (input `j` → output `perm[j]`) up to per-input phases.
pub fn truth_table(schedule: &GateSchedule, basis: &EncodedBasis, perm: &[usize; 4]) -> Result<TruthTable> {
    let u = schedule.unitary()?;
    let ub = linalg::mm(u.as_ref(), basis.states());
    let enc = linalg::mm(basis.states().adjoint(), ub.as_ref());
    let back = linalg::mm(basis.states(), enc.as_ref());
    let leakage = linalg::frobenius((ub - back).as_ref());
    let mut phases = Vec::with_capacity(4);
    let mut err = 0.0f64;
    for j in 0..4 {
        let raw = enc[(perm[j], j)];
        let phase = if raw.norm() > 0.0 { raw / raw.norm() } else { c64::new(1.0, 0.0) };
        phases.push(phase);
        for i in 0..4 {
            let expected = if i == perm[j] { phase } else { c64::new(0.0, 0.0) };
            err = err.max((enc[(i, j)] - expected).norm());
        }
    }
    Ok(TruthTable {
        amplitudes: (0..4).map(|i| (0..4).map(|j| [enc[(i, j)].re, enc[(i, j)].im]).collect()).collect(),
        phases: phases.iter().map(|z| [z.re, z.im]).collect(),
        max_amplitude_error: err,
        leakage,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GateReport {
    pub input: usize,
    /// `⟨ψ_ideal|ρ(T)|ψ_ideal⟩`
    pub fidelity: f64,
    /// `1 − Tr[P ρ(T) P]` for the encoded projector `P`.
    pub leakage: f64,
    pub support_residual: f64,
    pub duration: f64,
}

/// Evolves the encoded basis state `input` under the schedule with the
/// dissipator of `noise` active, and compares with the ideal gate output.
///
/// `dt` is an upper bound on the RK4 step; it is reduced to the generator's
/// stability limit when necessary.
pub fn verify_gate_df(
    schedule: &GateSchedule,
    basis: &EncodedBasis,
    noise: &ErrorGeneratorSet,
    input: usize,
    dt: f64,
) -> Result<GateReport> {
    if input >= 4 {
        return Err(Error::OutOfRange {
            what: "encoded input label",
            value: input,
            allowed: "0..=3".into(),
        });
    }
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
    }
    let support = schedule.support_residual(basis);
    if support > SUPPORT_TOL {
        return Err(Error::Precondition(format!(
            "gate Hamiltonian is not supported on the encoded subspace (residual {support:.3e})"
        )));
    }
    let worst_df = noise
        .generators()
        .iter()
        .map(|f| linalg::frobenius(linalg::mm(f.as_ref(), basis.states()).as_ref()))
        .fold(0.0, f64::max);
    if worst_df > 1e-8 {
        return Err(Error::Precondition(format!(
            "encoded states are not decoherence-free for this noise model (residual {worst_df:.3e})"
        )));
    }

    let base = LindbladGenerator::new(Operator::zeros(basis.dim()), noise)?;
    let mut rho = DensityMatrix::pure(basis.state(input))?;
    for &(duration, amplitude) in &schedule.segments {
        if duration == 0.0 {
            continue;
        }
        let gen = base.with_hamiltonian(schedule.hamiltonian.scale(c64::new(amplitude, 0.0)))?;
        let step = dt.min(gen.rk4_stable_step()?);
        let steps = (duration / step).ceil().max(1.0) as usize;
        let opts = EvolveOptions {
            sample_every: steps,
            keep_states: false,
            track_min_eig: false,
            ..Default::default()
        };
        let traj = evolve(&gen, &rho, duration, steps, opts)?;
        rho = DensityMatrix::from_op_unchecked(Operator::from_mat_unchecked(traj.final_state));
    }
    let ideal = schedule.unitary()?.apply(basis.state(input))?;
    let r = rho.as_ref();
    let rpsi = r * &ideal;
    let fidelity = (ideal.adjoint() * &rpsi).re;
    let p = basis.projector();
    let inside = linalg::trace_product(p.as_ref(), r).re;
    Ok(GateReport {
        input,
        fidelity,
        leakage: 1.0 - inside,
        support_residual: support,
        duration: schedule.duration(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfs::projector_distance;
    use std::f64::consts::FRAC_PI_2;

    fn k6_basis() -> (EncodedBasis, ErrorGeneratorSet) {
        let gens = build_collective(6).unwrap();
        let dfs = find_dfs_semisimple(&gens, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(dfs.dimension(), 5);
        (build_encoded_basis(&dfs).unwrap(), gens)
    }

    #[test]
    fn small_dfs_is_rejected() {
        let dfs = find_dfs_semisimple(&build_collective(4).unwrap(), DEFAULT_RANK_TOL).unwrap();
        assert!(build_encoded_basis(&dfs).is_err());
    }

    #[test]
    fn cluster_basis_matches_register_kernel() {
        // Two-qubit clusters carry a single singlet each.
        assert!(cluster_encoded_basis(2).is_err());
        let (basis, noise) = cluster_encoded_basis(4).unwrap();
        assert_eq!(basis.dim(), 256);
        let full = find_dfs_semisimple(&noise, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(full.dimension(), 4);
        assert!(projector_distance(basis.states(), full.basis.as_ref()) < 1e-8);
    }

    #[test]
    fn cnot_truth_table_on_collective_register() {
        let (basis, _) = k6_basis();
        let s = cnot_hamiltonian(&basis);
        let table = truth_table(&s, &basis, &CNOT_PERMUTATION).unwrap();
        assert!(table.max_amplitude_error < 1e-10);
        assert!(table.leakage < 1e-10);
        assert!((table.phases[0][0] - 1.0).abs() < 1e-12);
        assert!((table.phases[2][1] + 1.0).abs() < 1e-12);
        assert!((table.phases[3][1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_closed_form() {
        let (basis, _) = k6_basis();
        let theta = 0.37;
        let s = rotation_hamiltonian(&basis, 2, theta).unwrap();
        let u = s.encoded_unitary().unwrap();
        let x2 = encoded_from(&[(1, 0, 1.0), (0, 1, 1.0), (3, 2, 1.0), (2, 3, 1.0)]);
        let expected = Mat::<c64>::identity(4, 4) * faer::Scale(c64::new(theta.cos(), 0.0))
            + x2 * faer::Scale(c64::new(0.0, -theta.sin()));
        assert!(linalg::max_abs((&u - &expected).as_ref()) < 1e-10);
        let full = basis.restrict(s.unitary().unwrap().as_ref());
        assert!(linalg::max_abs((full - expected).as_ref()) < 1e-10);
        assert!(rotation_hamiltonian(&basis, 3, 1.0).is_err());
    }

    #[test]
    fn rotation_pi_flips_low_bit() {
        let (basis, _) = k6_basis();
        let s = rotation_hamiltonian(&basis, 2, FRAC_PI_2).unwrap();
        let table = truth_table(&s, &basis, &[1, 0, 3, 2]).unwrap();
        assert!(table.max_amplitude_error < 1e-10);
        let zero = rotation_hamiltonian(&basis, 1, 0.0).unwrap();
        let u = zero.encoded_unitary().unwrap();
        assert!(linalg::max_abs((u - Mat::<c64>::identity(4, 4)).as_ref()) < 1e-14);
    }

    #[test]
    fn rotations_compose() {
        let (basis, _) = k6_basis();
        let a = rotation_hamiltonian(&basis, 1, 0.3).unwrap().encoded_unitary().unwrap();
        let b = rotation_hamiltonian(&basis, 1, 0.5).unwrap().encoded_unitary().unwrap();
        let ab = rotation_hamiltonian(&basis, 1, 0.8).unwrap().encoded_unitary().unwrap();
        assert!(linalg::max_abs((&b * &a - ab).as_ref()) < 1e-9);
        let z = z_rotation_hamiltonian(&basis, 2, 0.4).unwrap();
        assert!(Operator::new(z.encoded).unwrap().is_diagonal());
    }

    #[test]
    fn gate_hamiltonians_commute_with_projector() {
        let (basis, _) = k6_basis();
        let p = Operator::new(basis.projector()).unwrap();
        for s in [
            cnot_hamiltonian(&basis),
            rotation_hamiltonian(&basis, 1, 1.0).unwrap(),
            z_rotation_hamiltonian(&basis, 1, 1.0).unwrap(),
        ] {
            let c = crate::operator::commutator(&s.hamiltonian, &p).unwrap();
            assert!(c.frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn zero_schedule_leaves_state() {
        let (basis, noise) = k6_basis();
        let s = cnot_hamiltonian(&basis).with_area(0.0);
        let r = verify_gate_df(&s, &basis, &noise, 2, 0.1).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-14);
        assert!(r.leakage.abs() < 1e-14);
    }

    #[test]
    fn cnot_under_collective_noise() {
        let (basis, noise) = k6_basis();
        let s = cnot_hamiltonian(&basis);
        let r = verify_gate_df(&s, &basis, &noise, 2, 0.05).unwrap();
        assert!(r.leakage.abs() < 1e-8);
        assert!(r.fidelity > 1.0 - 1e-6);
    }
}
