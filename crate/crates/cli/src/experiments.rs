use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt::Write as _;

use dfslab_core::c64;
use dfslab_core::dfs::{
    dfs_dimension_series, find_dfs_general, find_dfs_semisimple, projector_distance, zero_loss_subspace, DfSubspace,
};
use dfslab_core::gates::{
    build_encoded_basis, cluster_encoded_basis, cnot_hamiltonian, rotation_hamiltonian, truth_table, verify_gate_df,
    z_rotation_hamiltonian, EncodedBasis, CNOT_PERMUTATION,
};
use dfslab_core::lie::{structure_constants, LieOptions};
use dfslab_core::lindblad::{
    decoherence_times, evolve, fidelity_series_check, EvolveOptions, Integrator, LindbladGenerator, TauValue,
};
use dfslab_core::models::{build_collective, default_coefficients, Coefficients, ErrorGeneratorSet, ModelSpec};
use dfslab_core::operator::{pauli_sum, DensityMatrix, Operator, PauliString};
use dfslab_core::perturbation::{
    epsilon_scaling, random_coefficient_blocks, single_qubit_perturbers, tau1_any, PerturbedModel, ScalingOptions,
};
use dfslab_core::sampling::{random_hermitian, random_psd, random_state, SeedStream};
use faer::{Col, Mat, MatRef};
use serde_json::{json, Value};

use crate::config::{
    parse_perturber, CoefficientChoice, ExperimentConfig, IntegratorChoice, ModelConfig, Register, StateChoice,
};
use crate::RunError;

// Seed stream ids; one per kind of random draw.
const STREAM_COEFFICIENTS: u64 = 1;
const STREAM_HAMILTONIAN: u64 = 2;
const STREAM_STATE: u64 = 3;
const STREAM_PERTURBATION: u64 = 4;
const STREAM_REFERENCE: u64 = 5;

/// Above this Hilbert-space dimension the general-branch search is skipped.
const GENERAL_SEARCH_MAX_DIM: usize = 256;
/// `|f| ` entries at or below this are left out of the sparse listing.
const STRUCTURE_ZERO: f64 = 1e-12;

pub struct Context {
    pub seeds: SeedStream,
    pub tol: f64,
    pub workers: usize,
}

pub struct Artifacts {
    pub csv: String,
    pub json: Value,
}

pub const EXPERIMENTS: [(&str, &str, &str); 7] = [
    ("dfs", "find the decoherence-free subspace of a model", "model"),
    ("evolve", "integrate the master equation and record fidelity", "model, initial_state, time"),
    ("taun", "decoherence-time hierarchy tau_n and short-time series check", "model, initial_state [, taun]"),
    ("perturb-sweep", "1 - F(T) versus symmetry-breaking strength eps", "model, initial_state, sweep"),
    ("dims", "collective DFS dimensions against the combinatorial count", "dims"),
    ("gates", "encoded gate truth table and leakage under noise", "[gates]"),
    ("lie-report", "structure constants, Killing form and semisimplicity", "model [, lie]"),
];

pub fn run(name: &str, cfg: &ExperimentConfig, ctx: &Context) -> Result<Artifacts, RunError> {
    match name {
        "dfs" => run_dfs(cfg, ctx),
        "evolve" => run_evolve(cfg, ctx),
        "taun" => run_taun(cfg, ctx),
        "perturb-sweep" => run_sweep(cfg, ctx),
        "dims" => run_dims(cfg, ctx),
        "gates" => run_gates(cfg, ctx),
        "lie-report" => run_lie(cfg, ctx),
        other => unreachable!("experiment '{other}' is checked by the caller"),
    }
}

fn config_error(field: &str, e: impl std::fmt::Display) -> RunError {
    RunError::Config {
        field: field.into(),
        message: e.to_string(),
    }
}

fn model_config(cfg: &ExperimentConfig) -> &ModelConfig {
    cfg.model.as_ref().expect("validated")
}

fn build_model(m: &ModelConfig, ctx: &Context) -> Result<ErrorGeneratorSet, RunError> {
    let mut spec = ModelSpec::new(m.kind, m.num_qubits);
    spec.cluster_size = m.cluster_size;
    spec.clusters = m.clusters.clone();
    spec.coefficients = Coefficients::Uniform(m.gamma);
    let base = spec.build().map_err(|e| config_error("model", e))?;
    let a = match &m.coefficients {
        CoefficientChoice::Named(n) if n == "random" => {
            let a = random_psd(base.len(), &mut ctx.seeds.rng(STREAM_COEFFICIENTS));
            Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * m.gamma)
        }
        CoefficientChoice::Named(_) => return Ok(base),
        CoefficientChoice::Matrix(rows) => {
            if rows.len() != base.len() {
                return Err(config_error(
                    "model.coefficients",
                    format!("expected a {0} x {0} matrix for this model, got {1} rows", base.len(), rows.len()),
                ));
            }
            Mat::from_fn(rows.len(), rows.len(), |i, j| c64::new(rows[i][j][0], rows[i][j][1]))
        }
    };
    base.with_coefficients(a).map_err(|e| config_error("model.coefficients", e))
}

fn build_hamiltonian(cfg: &ExperimentConfig, k: usize, ctx: &Context) -> Result<Operator, RunError> {
    let strings: Vec<PauliString> = cfg
        .hamiltonian
        .terms
        .iter()
        .map(|t| t.pauli.parse().map_err(|e| config_error("hamiltonian.terms", e)))
        .collect::<Result<_, _>>()?;
    let coeffs: Vec<c64> = cfg.hamiltonian.terms.iter().map(|t| c64::new(t.coefficient, 0.0)).collect();
    let mut h = if strings.is_empty() {
        Operator::zeros(1 << k)
    } else {
        pauli_sum(&strings, &coeffs)
    };
    if cfg.hamiltonian.random_scale > 0.0 {
        let r = random_hermitian(1 << k, &mut ctx.seeds.rng(STREAM_HAMILTONIAN));
        h = h.add(&r.scale(c64::new(cfg.hamiltonian.random_scale, 0.0)))?;
    }
    Ok(h)
}

fn product_state(k: usize, single: [c64; 2]) -> Col<c64> {
    Col::from_fn(1 << k, |i| {
        (0..k).fold(c64::new(1.0, 0.0), |acc, q| acc * single[(i >> (k - 1 - q)) & 1])
    })
}

/// `(|01⟩ − |10⟩)/√2` on each consecutive pair of qubits.
fn paired_singlets(k: usize) -> Col<c64> {
    Col::from_fn(1 << k, |i| {
        let mut amp = c64::new(1.0, 0.0);
        for pair in 0..k / 2 {
            let shift = k - 2 - 2 * pair;
            amp *= match (i >> shift) & 3 {
                0b01 => c64::new(FRAC_1_SQRT_2, 0.0),
                0b10 => c64::new(-FRAC_1_SQRT_2, 0.0),
                _ => c64::new(0.0, 0.0),
            };
        }
        amp
    })
}

fn build_state(
    field: &str,
    choice: &StateChoice,
    gens: &ErrorGeneratorSet,
    ctx: &Context,
    stream: u64,
) -> Result<DensityMatrix, RunError> {
    let k = gens.dim().trailing_zeros() as usize;
    let n = gens.dim();
    let psi = match choice {
        StateChoice::Named(name) => match name.as_str() {
            "all-zero" => product_state(k, [c64::new(1.0, 0.0), c64::new(0.0, 0.0)]),
            "plus-all" => product_state(k, [c64::new(FRAC_1_SQRT_2, 0.0); 2]),
            "singlet" => paired_singlets(k),
            "maximally-mixed" => return Ok(DensityMatrix::maximally_mixed(n)),
            "dfs-random" => {
                let dfs = find_dfs_semisimple(gens, ctx.tol)?;
                if dfs.is_empty() {
                    return Err(config_error(field, "'dfs-random' needs a model with a nonempty DFS"));
                }
                let c = random_state(dfs.dimension(), &mut ctx.seeds.rng(stream));
                &dfs.basis * &c
            }
            other => return Err(config_error(field, format!("unknown state '{other}'"))),
        },
        StateChoice::Vector(v) => {
            let norm = v.iter().map(|a| a[0] * a[0] + a[1] * a[1]).sum::<f64>().sqrt();
            Col::from_fn(n, |i| c64::new(v[i][0] / norm, v[i][1] / norm))
        }
    };
    Ok(DensityMatrix::pure(psi.as_ref())?)
}

fn cjson(z: c64) -> Value {
    json!([z.re, z.im])
}

fn mat_json(m: MatRef<'_, c64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| cjson(m[(i, j)])).collect()))
            .collect(),
    )
}

/// `"inf"` for an infinite time, `"undefined"` when no real root exists.
fn tau_text(t: TauValue) -> String {
    match t {
        TauValue::Finite(x) => num(x),
        TauValue::Infinite => "inf".into(),
        TauValue::Undefined => "undefined".into(),
    }
}

fn tau_json(t: TauValue) -> Value {
    match t {
        TauValue::Finite(x) => json!(x),
        other => json!(tau_text(other)),
    }
}

fn inverse_json(x: f64) -> Value {
    if x.is_nan() {
        json!("undefined")
    } else {
        json!(x)
    }
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e6)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn model_json(gens: &ErrorGeneratorSet, m: &ModelConfig) -> Value {
    json!({
        "kind": m.kind,
        "num_qubits": m.num_qubits,
        "cluster_size": m.cluster_size,
        "dimension": gens.dim(),
        "num_generators": gens.len(),
        "labels": gens.labels(),
        "coefficients": match &m.coefficients {
            CoefficientChoice::Named(n) => n.clone(),
            CoefficientChoice::Matrix(_) => "explicit".into(),
        },
        "gamma": m.gamma,
    })
}

fn subspace_json(s: &DfSubspace, gens: &ErrorGeneratorSet) -> Value {
    let dto = s.to_dto();
    json!({
        "dimension": dto.dimension,
        "encoded_qubits": dto.encoded_qubits,
        "shared_eigenvalues": dto.shared_eigenvalues,
        "eigen_residual": s.eigen_residual(gens.generators()),
        "orthonormality_defect": s.orthonormality_defect(),
        "basis": mat_json(s.basis.as_ref()),
    })
}

fn run_dfs(cfg: &ExperimentConfig, ctx: &Context) -> Result<Artifacts, RunError> {
    let m = model_config(cfg);
    let gens = build_model(m, ctx)?;
    let dfs = find_dfs_semisimple(&gens, ctx.tol)?;
    let zero_loss = zero_loss_subspace(&gens, ctx.tol)?;
    let distance = projector_distance(dfs.basis.as_ref(), zero_loss.as_ref());
    let general = if gens.dim() <= GENERAL_SEARCH_MAX_DIM {
        Some(find_dfs_general(&gens, ctx.tol)?)
    } else {
        log::info!("general-branch search skipped above dimension {GENERAL_SEARCH_MAX_DIM}");
        None
    };

    let mut csv = String::from("route,index,dimension,encoded_qubits,eigen_residual\n");
    let mut row = |route: &str, i: usize, s: &DfSubspace| {
        let _ = writeln!(
            csv,
            "{route},{i},{},{},{}",
            s.dimension(),
            opt(s.encoded_qubits()),
            num(s.eigen_residual(gens.generators()))
        );
    };
    row("semisimple", 0, &dfs);
    for (i, s) in general.iter().flatten().enumerate() {
        row("general", i, s);
    }

    let json = json!({
        "model": model_json(&gens, m),
        "dfs": subspace_json(&dfs, &gens),
        "zero_loss_dimension": zero_loss.ncols(),
        "zero_loss_projector_distance": distance,
        "general": general.map(|g| g.iter().map(|s| subspace_json(s, &gens)).collect::<Vec<_>>()),
    });
    Ok(Artifacts { csv, json })
}

fn run_evolve(cfg: &ExperimentConfig, ctx: &Context) -> Result<Artifacts, RunError> {
    let m = model_config(cfg);
    let gens = build_model(m, ctx)?;
    let h = build_hamiltonian(cfg, m.num_qubits, ctx)?;
    let gen = LindbladGenerator::new(h, &gens)?;
    let rho0 = build_state("initial_state", cfg.initial_state.as_ref().expect("validated"), &gens, ctx, STREAM_STATE)?;
    let time = cfg.time.as_ref().expect("validated");
    let stable = gen.rk4_stable_step()?;
    let dt = time.t / time.steps as f64;
    if time.integrator == IntegratorChoice::Rk4 && dt > stable {
        log::warn!("step {dt:.3e} exceeds the RK4 stability estimate {stable:.3e}; expect the watchdog to stop the run");
    }
    let options = EvolveOptions {
        integrator: match time.integrator {
            IntegratorChoice::Rk4 => Integrator::Rk4,
            IntegratorChoice::Exact => Integrator::Exact,
        },
        sample_every: time.sample_every,
        keep_states: false,
        track_min_eig: true,
    };
    let traj = evolve(&gen, &rho0, time.t, time.steps, options)?;

    let mut csv = String::from("t,fidelity,trace,purity,min_eig,hermiticity\n");
    for p in &traj.points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            num(p.t),
            num(p.fidelity),
            num(p.trace),
            num(p.purity),
            num(p.min_eig),
            num(p.hermiticity)
        );
    }
    let max_drift = traj.points.iter().map(|p| (p.trace - 1.0).abs()).fold(0.0, f64::max);
    let min_eig = traj.points.iter().map(|p| p.min_eig).fold(f64::INFINITY, f64::min);
    let max_herm = traj.points.iter().map(|p| p.hermiticity).fold(0.0, f64::max);
    let json = json!({
        "model": model_json(&gens, m),
        "t_final": time.t,
        "steps": time.steps,
        "integrator": time.integrator,
        "rk4_stable_step": stable,
        "final_fidelity": traj.final_fidelity(),
        "max_trace_drift": max_drift,
        "min_eigenvalue": min_eig,
        "max_hermiticity_defect": max_herm,
        "points": traj.points,
        "final_state": mat_json(traj.final_state.as_ref()),
    });
    Ok(Artifacts { csv, json })
}

fn run_taun(cfg: &ExperimentConfig, ctx: &Context) -> Result<Artifacts, RunError> {
    let m = model_config(cfg);
    let gens = build_model(m, ctx)?;
    let h = build_hamiltonian(cfg, m.num_qubits, ctx)?;
    let gen = LindbladGenerator::new(h, &gens)?;
    let rho0 = build_state("initial_state", cfg.initial_state.as_ref().expect("validated"), &gens, ctx, STREAM_STATE)?;
    let taun = cfg.taun.clone().unwrap_or_default();
    let times = decoherence_times(&gen, &rho0, taun.max_order)?;
    let series = fidelity_series_check(&gen, &rho0, taun.series_t)?;

    let mut csv = String::from("order,trace_re,trace_im,tau,inverse_tau\n");
    for d in &times {
        let inv = d.inverse();
        let inv = if inv.is_nan() { "undefined".to_string() } else { num(inv) };
        let _ = writeln!(csv, "{},{},{},{},{inv}", d.order, num(d.trace.re), num(d.trace.im), tau_text(d.tau));
    }
    let rows: Vec<Value> = times
        .iter()
        .map(|d| {
            json!({
                "order": d.order,
                "trace": cjson(d.trace),
                "tau": tau_json(d.tau),
                "inverse_tau": inverse_json(d.inverse()),
            })
        })
        .collect();
    let json = json!({
        "model": model_json(&gens, m),
        "times": rows,
        "series_check": series,
    });
    Ok(Artifacts { csv, json })
}

fn run_sweep(cfg: &ExperimentConfig, ctx: &Context) -> Result<Artifacts, RunError> {
    let m = model_config(cfg);
    let sweep = cfg.sweep.as_ref().expect("validated");
    let gens = build_model(m, ctx)?;
    let h = build_hamiltonian(cfg, m.num_qubits, ctx)?;
    let terms = sweep
        .perturbers
        .iter()
        .map(|p| parse_perturber(p, m.num_qubits))
        .collect::<Result<Vec<_>, _>>()?;
    let perturbers = single_qubit_perturbers(m.num_qubits, &terms)?;
    let mut rng = ctx.seeds.rng(STREAM_PERTURBATION);
    let (cross, pert) = random_coefficient_blocks(gens.coefficients(), perturbers.len(), sweep.cross_scale, &mut rng)?;
    let template = PerturbedModel::new(&gens, h, perturbers, cross, pert, 0.0)?;
    let rho = build_state("initial_state", cfg.initial_state.as_ref().expect("validated"), &gens, ctx, STREAM_STATE)?;
    let reference = sweep
        .reference_state
        .as_ref()
        .map(|r| build_state("sweep.reference_state", r, &gens, ctx, STREAM_REFERENCE))
        .transpose()?;
    let options = ScalingOptions {
        t: sweep.t,
        steps: sweep.steps,
        workers: ctx.workers,
    };
    let report = epsilon_scaling(&template, &rho, reference.as_ref(), &sweep.eps_grid, options)?;

    let mut csv = String::from("epsilon,one_minus_f,reference_one_minus_f,inverse_tau1_first_order,inverse_tau1\n");
    let mut tau_rows = Vec::new();
    for p in &report.points {
        let t1 = tau1_any(&template.with_epsilon(p.epsilon)?, &rho)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            num(p.epsilon),
            num(p.one_minus_f),
            opt(p.reference_one_minus_f),
            num(t1.first_order),
            num(t1.full.trace.re)
        );
        tau_rows.push(json!({
            "epsilon": p.epsilon,
            "first_order": t1.first_order,
            "second_order": t1.second_order,
            "trace": cjson(t1.full.trace),
            "tau": tau_json(t1.full.tau),
        }));
    }
    let json = json!({
        "model": model_json(&gens, m),
        "perturbers": sweep.perturbers,
        "support_leakage": template.support_leakage(rho.as_ref()),
        "scaling": report,
        "tau1": tau_rows,
    });
    Ok(Artifacts { csv, json })
}

fn run_dims(cfg: &ExperimentConfig, ctx: &Context) -> Result<Artifacts, RunError> {
    let dims = cfg.dims.as_ref().expect("validated");
    let rows = dfs_dimension_series(&dims.k_list, dims.numeric_max, ctx.tol)?;
    let mut csv = String::from("k,numeric,combinatorial,log2_dimension,asymptote,agree\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.k,
            r.numeric.map(|n| n.to_string()).unwrap_or_default(),
            r.combinatorial,
            opt(r.log2_dimension),
            num(r.asymptote),
            r.agree
        );
    }
    // Counts can exceed 2^64 for large K, so they are written as strings.
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "k": r.k,
                "numeric": r.numeric,
                "combinatorial": r.combinatorial.to_string(),
                "log2_dimension": r.log2_dimension,
                "asymptote": r.asymptote,
                "agree": r.agree,
            })
        })
        .collect();
    Ok(Artifacts {
        csv,
        json: json!({ "rows": json_rows, "all_agree": rows.iter().all(|r| r.agree) }),
    })
}

fn gate_permutation(gate: &str, angle: f64) -> Option<[usize; 4]> {
    let quarter_turn = ((angle - FRAC_PI_2) / PI - ((angle - FRAC_PI_2) / PI).round()).abs() < 1e-12;
    match gate {
        "cnot" => Some(CNOT_PERMUTATION),
        "x1" if quarter_turn => Some([2, 3, 0, 1]),
        "x2" if quarter_turn => Some([1, 0, 3, 2]),
        "z1" | "z2" => Some([0, 1, 2, 3]),
        _ => None,
    }
}

fn run_gates(cfg: &ExperimentConfig, _ctx: &Context) -> Result<Artifacts, RunError> {
    let g = cfg.gates.clone().unwrap_or_default();
    let (basis, noise): (EncodedBasis, ErrorGeneratorSet) = match g.register {
        Register::Cluster => cluster_encoded_basis(g.cluster_size)?,
        Register::Collective => {
            let gens = build_collective(g.num_qubits)?;
            let dfs = find_dfs_semisimple(&gens, dfslab_core::operator::DEFAULT_RANK_TOL)?;
            (build_encoded_basis(&dfs)?, gens)
        }
    };
    let noise = {
        let m = noise.len();
        noise.with_coefficients(default_coefficients(m, g.gamma)?)?
    };
    let schedule = match g.gate.as_str() {
        "cnot" => cnot_hamiltonian(&basis).with_area(g.angle),
        "x1" => rotation_hamiltonian(&basis, 1, g.angle)?,
        "x2" => rotation_hamiltonian(&basis, 2, g.angle)?,
        "z1" => z_rotation_hamiltonian(&basis, 1, g.angle)?,
        "z2" => z_rotation_hamiltonian(&basis, 2, g.angle)?,
        other => unreachable!("gate '{other}' is checked during validation"),
    };
    let table = gate_permutation(&g.gate, g.angle)
        .filter(|_| g.gate != "cnot" || (g.angle - FRAC_PI_2).abs() < 1e-12)
        .map(|perm| truth_table(&schedule, &basis, &perm).map(|t| (perm, t)))
        .transpose()?;

    let mut csv = String::from("input,fidelity,leakage,support_residual,duration\n");
    let mut reports = Vec::new();
    for &input in &g.inputs {
        let r = verify_gate_df(&schedule, &basis, &noise, input, g.dt)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.input,
            num(r.fidelity),
            num(r.leakage),
            num(r.support_residual),
            num(r.duration)
        );
        reports.push(r);
    }
    let json = json!({
        "register": g.register,
        "num_qubits": noise.dim().trailing_zeros(),
        "gate": g.gate,
        "area": schedule.area(),
        "duration": schedule.duration(),
        "support_residual": schedule.support_residual(&basis),
        "encoded_unitary": mat_json(schedule.encoded_unitary()?.as_ref()),
        "permutation": table.as_ref().map(|(p, _)| p.to_vec()),
        "truth_table": table.map(|(_, t)| t),
        "runs": reports,
    });
    Ok(Artifacts { csv, json })
}

fn run_lie(cfg: &ExperimentConfig, ctx: &Context) -> Result<Artifacts, RunError> {
    let m = model_config(cfg);
    let gens = build_model(m, ctx)?;
    let options = LieOptions {
        strict: false,
        anti_hermitian: cfg.lie.as_ref().is_some_and(|l| l.anti_hermitian),
    };
    let report = structure_constants(&gens, options)?;
    let d = report.dim();
    let mut csv = String::from("alpha,beta,gamma,re,im\n");
    let mut sparse = Vec::new();
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let f = report.f(a, b, c);
                if f.norm() > STRUCTURE_ZERO {
                    let _ = writeln!(csv, "{a},{b},{c},{},{}", num(f.re), num(f.im));
                    sparse.push(json!([a, b, c, f.re, f.im]));
                }
            }
        }
    }
    let (max_residual, worst_pair) = report.max_residual();
    let json = json!({
        "model": model_json(&gens, m),
        "dimension": d,
        "basis": if options.anti_hermitian { "anti-hermitian" } else { "hermitian" },
        "is_closed": report.is_closed(),
        "is_semisimple": report.is_semisimple(),
        "max_residual": max_residual,
        "worst_pair": [worst_pair.0, worst_pair.1],
        "jacobi_residual": report.jacobi_residual(),
        "antisymmetry_defect": report.antisymmetry_defect(),
        "adjoint_rank": report.adjoint_rank()?,
        "structure_condition_nullity": report.structure_condition_nullity()?,
        "structure_constants": sparse,
        "killing_form": mat_json(report.killing_form()),
    });
    Ok(Artifacts { csv, json })
}
