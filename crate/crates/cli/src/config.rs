//! TOML experiment configuration. Every section rejects unknown keys.

use std::f64::consts::FRAC_PI_2;

use dfslab_core::models::ModelKind;
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must agree with the experiment named on the command line.
    pub experiment: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<String>,
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub hamiltonian: HamiltonianConfig,
    pub initial_state: Option<StateChoice>,
    pub time: Option<TimeConfig>,
    pub sweep: Option<SweepConfig>,
    pub taun: Option<TaunConfig>,
    pub dims: Option<DimsConfig>,
    pub gates: Option<GatesConfig>,
    pub lie: Option<LieConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub num_qubits: usize,
    pub cluster_size: Option<usize>,
    /// Explicit partition, 0-based qubit indices.
    pub clusters: Option<Vec<Vec<usize>>>,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub coefficients: CoefficientChoice,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum CoefficientChoice {
    /// `"uniform"` (`A = γI`) or `"random"` (seeded PSD, scaled by `γ`).
    Named(String),
    /// Row-major `M × M` matrix of `[re, im]` pairs.
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl Default for CoefficientChoice {
    fn default() -> Self {
        CoefficientChoice::Named("uniform".into())
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    #[serde(default)]
    pub terms: Vec<PauliTerm>,
    /// Scale of an added seeded random Hermitian term; 0 disables it.
    #[serde(default)]
    pub random_scale: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PauliTerm {
    pub pauli: String,
    pub coefficient: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum StateChoice {
    /// `singlet`, `all-zero`, `plus-all`, `maximally-mixed` or `dfs-random`.
    Named(String),
    /// Amplitudes as `[re, im]` pairs; normalised on load.
    Vector(Vec<[f64; 2]>),
}

pub const STATE_NAMES: [&str; 5] = ["singlet", "all-zero", "plus-all", "maximally-mixed", "dfs-random"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorChoice {
    #[default]
    Rk4,
    Exact,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t: f64,
    pub steps: usize,
    #[serde(default)]
    pub integrator: IntegratorChoice,
    #[serde(default = "one_usize")]
    pub sample_every: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub eps_grid: Vec<f64>,
    /// Single-qubit perturbers such as `"Z1"` (Pauli letter, 1-based qubit).
    pub perturbers: Vec<String>,
    #[serde(default = "default_cross_scale")]
    pub cross_scale: f64,
    pub reference_state: Option<StateChoice>,
    /// Final time; chosen automatically when absent.
    pub t: Option<f64>,
    #[serde(default = "default_sweep_steps")]
    pub steps: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TaunConfig {
    #[serde(default = "default_max_order")]
    pub max_order: u32,
    #[serde(default = "default_series_t")]
    pub series_t: f64,
}

impl Default for TaunConfig {
    fn default() -> Self {
        Self {
            max_order: default_max_order(),
            series_t: default_series_t(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DimsConfig {
    pub k_list: Vec<usize>,
    #[serde(default = "default_numeric_max")]
    pub numeric_max: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Register {
    /// Two clusters of `cluster_size` qubits, one singlet pair per cluster.
    #[default]
    Cluster,
    /// One collectively decohering register of `num_qubits` qubits.
    Collective,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GatesConfig {
    #[serde(default)]
    pub register: Register,
    #[serde(default = "default_cluster_size")]
    pub cluster_size: usize,
    #[serde(default = "default_gate_qubits")]
    pub num_qubits: usize,
    #[serde(default = "default_gate")]
    pub gate: String,
    /// Pulse area; defaults to `π/2`.
    #[serde(default = "default_angle")]
    pub angle: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "all_inputs")]
    pub inputs: Vec<usize>,
    #[serde(default = "one")]
    pub gamma: f64,
}

impl Default for GatesConfig {
    fn default() -> Self {
        Self {
            register: Register::default(),
            cluster_size: default_cluster_size(),
            num_qubits: default_gate_qubits(),
            gate: default_gate(),
            angle: default_angle(),
            dt: default_dt(),
            inputs: all_inputs(),
            gamma: one(),
        }
    }
}

pub const GATE_NAMES: [&str; 5] = ["cnot", "x1", "x2", "z1", "z2"];

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LieConfig {
    #[serde(default)]
    pub anti_hermitian: bool,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_cross_scale() -> f64 {
    0.3
}
fn default_sweep_steps() -> usize {
    200
}
fn default_max_order() -> u32 {
    4
}
fn default_series_t() -> f64 {
    0.1
}
fn default_numeric_max() -> usize {
    12
}
fn default_cluster_size() -> usize {
    4
}
fn default_gate_qubits() -> usize {
    6
}
fn default_gate() -> String {
    "cnot".into()
}
fn default_angle() -> f64 {
    FRAC_PI_2
}
fn default_dt() -> f64 {
    0.05
}
fn all_inputs() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

fn bad(field: &str, message: impl Into<String>) -> RunError {
    RunError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), RunError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be a positive finite number, got {v}")))
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig, RunError> {
    toml::from_str(text).map_err(|e| {
        let field = e.span().map(|s| field_at(text, s.start)).unwrap_or_else(|| "config".into());
        bad(&field, e.message().to_string())
    })
}

/// Dotted key path (`section.key`) of the line containing byte `offset`.
fn field_at(text: &str, offset: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.lines() {
        let trimmed = line.trim();
        let header = trimmed.trim_matches(|c| c == '[' || c == ']').trim();
        let is_header = trimmed.starts_with('[')
            && !header.is_empty()
            && header.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c));
        if is_header {
            section = header.to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len() + 1;
        if pos > offset {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, true) => "config".into(),
        (true, false) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

impl ExperimentConfig {
    /// Checks everything `experiment` needs before any computation runs.
    pub fn validate(&self, experiment: &str) -> Result<(), RunError> {
        if let Some(name) = &self.experiment {
            if name != experiment {
                return Err(bad(
                    "experiment",
                    format!("config is for '{name}' but '{experiment}' was requested"),
                ));
            }
        }
        let needs_model = matches!(experiment, "dfs" | "evolve" | "taun" | "perturb-sweep" | "lie-report");
        if needs_model {
            let model = self.model.as_ref().ok_or_else(|| bad("model", "section is required"))?;
            model.validate()?;
            for (i, term) in self.hamiltonian.terms.iter().enumerate() {
                let field = format!("hamiltonian.terms[{i}].pauli");
                if term.pauli.len() != model.num_qubits {
                    return Err(bad(&field, format!("expected {} letters, got '{}'", model.num_qubits, term.pauli)));
                }
                if !term.pauli.chars().all(|c| "IXYZixyz".contains(c)) {
                    return Err(bad(&field, format!("'{}' is not a Pauli string", term.pauli)));
                }
                if !term.coefficient.is_finite() {
                    return Err(bad(&format!("hamiltonian.terms[{i}].coefficient"), "must be finite"));
                }
            }
            if !(self.hamiltonian.random_scale >= 0.0 && self.hamiltonian.random_scale.is_finite()) {
                return Err(bad("hamiltonian.random_scale", "must be finite and >= 0"));
            }
        }
        if matches!(experiment, "evolve" | "taun" | "perturb-sweep") {
            let model = self.model.as_ref().expect("checked above");
            let state = self
                .initial_state
                .as_ref()
                .ok_or_else(|| bad("initial_state", "is required"))?;
            validate_state("initial_state", state, model.num_qubits)?;
        }
        match experiment {
            "evolve" => {
                let time = self.time.as_ref().ok_or_else(|| bad("time", "section is required"))?;
                positive("time.t", time.t)?;
                if time.steps == 0 {
                    return Err(bad("time.steps", "must be >= 1"));
                }
                if time.sample_every == 0 {
                    return Err(bad("time.sample_every", "must be >= 1"));
                }
            }
            "taun" => {
                let taun = self.taun.clone().unwrap_or_default();
                if !(1..=12).contains(&taun.max_order) {
                    return Err(bad("taun.max_order", "must be in 1..=12"));
                }
                positive("taun.series_t", taun.series_t)?;
            }
            "perturb-sweep" => {
                let sweep = self.sweep.as_ref().ok_or_else(|| bad("sweep", "section is required"))?;
                let k = self.model.as_ref().expect("checked above").num_qubits;
                if sweep.eps_grid.is_empty() {
                    return Err(bad("sweep.eps_grid", "must not be empty"));
                }
                for &e in &sweep.eps_grid {
                    positive("sweep.eps_grid", e)?;
                }
                if sweep.perturbers.is_empty() {
                    return Err(bad("sweep.perturbers", "must not be empty"));
                }
                for p in &sweep.perturbers {
                    parse_perturber(p, k)?;
                }
                if !(sweep.cross_scale >= 0.0 && sweep.cross_scale.is_finite()) {
                    return Err(bad("sweep.cross_scale", "must be finite and >= 0"));
                }
                if let Some(t) = sweep.t {
                    positive("sweep.t", t)?;
                }
                if sweep.steps == 0 {
                    return Err(bad("sweep.steps", "must be >= 1"));
                }
                if let Some(r) = &sweep.reference_state {
                    validate_state("sweep.reference_state", r, k)?;
                }
            }
            "dims" => {
                let dims = self.dims.as_ref().ok_or_else(|| bad("dims", "section is required"))?;
                if dims.k_list.is_empty() {
                    return Err(bad("dims.k_list", "must not be empty"));
                }
                if let Some(k) = dims.k_list.iter().find(|&&k| k == 0 || k > 120) {
                    return Err(bad("dims.k_list", format!("entries must be in 1..=120, got {k}")));
                }
                if dims.numeric_max > dfslab_core::dfs::MAX_NUMERIC_QUBITS {
                    return Err(bad(
                        "dims.numeric_max",
                        format!("at most {}", dfslab_core::dfs::MAX_NUMERIC_QUBITS),
                    ));
                }
            }
            "gates" => {
                let g = self.gates.clone().unwrap_or_default();
                if !GATE_NAMES.contains(&g.gate.as_str()) {
                    return Err(bad("gates.gate", format!("unknown gate '{}', expected one of {GATE_NAMES:?}", g.gate)));
                }
                match g.register {
                    Register::Cluster if g.cluster_size != 4 => {
                        return Err(bad("gates.cluster_size", "must be 4 (two singlets per cluster)"));
                    }
                    Register::Collective if !(6..=8).contains(&g.num_qubits) || !g.num_qubits.is_multiple_of(2) => {
                        return Err(bad("gates.num_qubits", "must be 6 or 8"));
                    }
                    _ => {}
                }
                positive("gates.dt", g.dt)?;
                if !(g.gamma >= 0.0 && g.gamma.is_finite()) {
                    return Err(bad("gates.gamma", "must be finite and >= 0"));
                }
                if !g.angle.is_finite() {
                    return Err(bad("gates.angle", "must be finite"));
                }
                if g.inputs.is_empty() || g.inputs.iter().any(|&i| i > 3) {
                    return Err(bad("gates.inputs", "entries must be in 0..=3"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<(), RunError> {
        let k = self.num_qubits;
        let limit = match self.kind {
            ModelKind::Total => dfslab_core::models::MAX_TOTAL_QUBITS,
            ModelKind::Custom => return Err(bad("model.kind", "custom models are not available from the CLI")),
            _ => dfslab_core::models::MAX_QUBITS,
        };
        if k == 0 || k > limit {
            return Err(bad("model.num_qubits", format!("must be in 1..={limit} for this model, got {k}")));
        }
        if self.kind == ModelKind::Cluster {
            match (&self.clusters, self.cluster_size) {
                (Some(parts), _) => {
                    let mut seen = vec![false; k];
                    for q in parts.iter().flatten() {
                        if *q >= k || seen[*q] {
                            return Err(bad("model.clusters", format!("qubit {q} is out of range or repeated")));
                        }
                        seen[*q] = true;
                    }
                    if seen.iter().any(|s| !s) || parts.iter().any(|p| p.is_empty()) {
                        return Err(bad("model.clusters", "clusters must be nonempty and cover every qubit"));
                    }
                }
                (None, Some(size)) => {
                    if size == 0 || !k.is_multiple_of(size) {
                        return Err(bad(
                            "model.cluster_size",
                            format!("cluster size {size} does not divide num_qubits {k}"),
                        ));
                    }
                }
                (None, None) => return Err(bad("model.cluster_size", "cluster models need cluster_size or clusters")),
            }
        } else if self.cluster_size.is_some() || self.clusters.is_some() {
            return Err(bad("model.cluster_size", "only cluster models take cluster_size or clusters"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(bad("model.gamma", "must be finite and >= 0"));
        }
        match &self.coefficients {
            CoefficientChoice::Named(n) if n != "uniform" && n != "random" => Err(bad(
                "model.coefficients",
                format!("expected \"uniform\", \"random\" or a matrix, got \"{n}\""),
            )),
            CoefficientChoice::Matrix(rows) if rows.iter().any(|r| r.len() != rows.len()) => {
                Err(bad("model.coefficients", "matrix must be square"))
            }
            _ => Ok(()),
        }
    }
}

fn validate_state(field: &str, state: &StateChoice, k: usize) -> Result<(), RunError> {
    match state {
        StateChoice::Named(n) if !STATE_NAMES.contains(&n.as_str()) => {
            Err(bad(field, format!("unknown state '{n}', expected one of {STATE_NAMES:?}")))
        }
        StateChoice::Named(n) if n == "singlet" && !k.is_multiple_of(2) => {
            Err(bad(field, "the singlet state needs an even number of qubits"))
        }
        StateChoice::Vector(v) if v.len() != 1 << k => {
            Err(bad(field, format!("expected {} amplitudes, got {}", 1usize << k, v.len())))
        }
        StateChoice::Vector(v) if v.iter().all(|a| a[0] == 0.0 && a[1] == 0.0) || v.iter().flatten().any(|x| !x.is_finite()) => {
            Err(bad(field, "amplitudes must be finite and not all zero"))
        }
        _ => Ok(()),
    }
}

/// `"Z3"` → `(2, Z)`.
pub fn parse_perturber(label: &str, k: usize) -> Result<(usize, dfslab_core::operator::Pauli), RunError> {
    use dfslab_core::operator::Pauli;
    let field = "sweep.perturbers";
    let mut chars = label.chars();
    let letter = match chars.next().map(|c| c.to_ascii_uppercase()) {
        Some('X') => Pauli::X,
        Some('Y') => Pauli::Y,
        Some('Z') => Pauli::Z,
        _ => return Err(bad(field, format!("'{label}' must start with X, Y or Z"))),
    };
    let qubit: usize = chars
        .as_str()
        .parse()
        .map_err(|_| bad(field, format!("'{label}' must end with a 1-based qubit index")))?;
    if qubit == 0 || qubit > k {
        return Err(bad(field, format!("qubit index in '{label}' must be in 1..={k}")));
    }
    Ok((qubit - 1, letter))
}
