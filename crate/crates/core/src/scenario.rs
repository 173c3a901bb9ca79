//! Declarative scenarios: single logical qubits and two-node Bell states
//! under repeated cycles, with fidelity, negativity and Bell-signal series.
//!
//! Two-node states are propagated with the tensor product of the per-node
//! logical maps, which is exact here because the nodes do not interact.

use crate::aqec::{AqecGate, CycleConfig, CycleMode, Encoding, NoiseToggles, SideModel};
use crate::channels::{depolarize, depolarize_subsystem, Superop};
use crate::device::{DeviceParams, Node};
use crate::error::{config, Error, Result};
use crate::hilbert::{DensityMatrix, Ket, SpaceSpec};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::tomo::{self, ExpFit, ProcessMatrix};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curve {
    pub label: String,
    #[serde(default = "default_encoding")]
    pub encoding: Encoding,
    pub mode: CycleMode,
}

fn default_encoding() -> Encoding {
    Encoding::Binomial
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", deny_unknown_fields)]
pub enum Target {
    /// process fidelity of one logical qubit on `node`
    Process {
        #[serde(default = "default_node")]
        node: Node,
    },
    /// `(|0_L 1_L⟩ + e^{iθ}|1_L 0_L⟩)/√2` across both nodes
    Bell {
        #[serde(default)]
        theta: f64,
    },
}

fn default_node() -> Node {
    Node::A
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellSweep {
    /// number of θ samples over `[0, 2π)`
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub fidelity: bool,
    #[serde(default)]
    pub negativity: bool,
    #[serde(default)]
    pub bell_sweep: Option<BellSweep>,
    /// Wigner snapshots of the cavity at these cycle indices (single node)
    #[serde(default)]
    pub wigner_cycles: Vec<usize>,
}

fn yes() -> bool {
    true
}

impl Default for Outputs {
    fn default() -> Self {
        Self { fidelity: true, negativity: false, bell_sweep: None, wigner_cycles: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// `"builtin"` or a path to a device TOML file, resolved by the caller
    #[serde(default = "builtin")]
    pub device: String,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default)]
    pub seed: u64,
    pub target: Target,
    pub curves: Vec<Curve>,
    pub tau_us: f64,
    pub n_cycles: usize,
    /// preparation fidelity of the initial state; 1 if absent
    #[serde(default)]
    pub prep_fidelity: Option<f64>,
    #[serde(default)]
    pub gate_fidelity: Option<f64>,
    #[serde(default)]
    pub parity_fidelity: Option<f64>,
    #[serde(default)]
    pub noise: NoiseToggles,
    #[serde(default)]
    pub outputs: Outputs,
}

fn builtin() -> String {
    "builtin".into()
}

fn default_cutoff() -> usize {
    10
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(s).map_err(|e| config("scenario", e.message().to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.curves.is_empty() {
            return Err(config("curves", "at least one curve is required"));
        }
        if self.n_cycles == 0 && self.outputs.bell_sweep.is_none() {
            return Err(config("n_cycles", "schedule is empty"));
        }
        if self.cutoff < 5 {
            return Err(config("cutoff", format!("{} is below the code's support", self.cutoff)));
        }
        if let Some(f) = self.prep_fidelity {
            if !(0.25..=1.0).contains(&f) {
                return Err(config("prep_fidelity", format!("{f} outside [0.25, 1]")));
            }
        }
        if let Some(b) = self.outputs.bell_sweep {
            if b.points < 4 {
                return Err(config("outputs.bell_sweep.points", "need at least 4 points"));
            }
            if !matches!(self.target, Target::Bell { .. }) {
                return Err(config("outputs.bell_sweep", "requires a bell target"));
            }
        }
        if self.outputs.negativity && !matches!(self.target, Target::Bell { .. }) {
            return Err(config("outputs.negativity", "requires a bell target"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (k, cv) in self.curves.iter().enumerate() {
            if !seen.insert(cv.label.as_str()) {
                return Err(config(format!("curves[{k}].label"), format!("duplicate label {:?}", cv.label)));
            }
            self.cycle_config(cv).map_err(|e| match e {
                Error::Config { field, reason } => config(format!("curves[{k}].{field}"), reason),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn cycle_config(&self, curve: &Curve) -> Result<CycleConfig> {
        let mut cfg = CycleConfig::new(self.tau_us, self.n_cycles, curve.mode)?;
        cfg.encoding = curve.encoding;
        cfg.noise = self.noise;
        cfg.gate_fidelity = self.gate_fidelity;
        cfg.parity_fidelity = self.parity_fidelity;
        if let Target::Process { node } = self.target {
            cfg.node = node;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub label: String,
    pub model: String,
    /// (name, value, standard error)
    pub params: Vec<(String, f64, f64)>,
    /// `T = −τ/ln(1−p)` from the first-cycle depolarizing strength, µs
    pub cross_check_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSeries {
    pub name: String,
    /// axis name with unit, e.g. `time_us`
    pub axis_name: String,
    pub axis: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub fits: Vec<FitRecord>,
    pub metadata: BTreeMap<String, String>,
}

impl ResultSeries {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.0 == name).map(|c| c.1.as_slice())
    }

    pub fn fit(&self, label: &str) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.label == label)
    }

    /// Header row with units, then one row per axis sample. Metadata lines
    /// are prefixed with `#`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}={v}");
        }
        s.push_str(&self.axis_name);
        for (name, _) in &self.columns {
            let _ = write!(s, ",{name}");
        }
        s.push('\n');
        for (i, x) in self.axis.iter().enumerate() {
            let _ = write!(s, "{x}");
            for (_, col) in &self.columns {
                let _ = write!(s, ",{:.12e}", col[i]);
            }
            s.push('\n');
        }
        s
    }
}

/// `|ψ⟩ = α|0⟩ + β|1⟩` or the Bell target on the logical level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogicalTarget {
    Single { alpha: C64, beta: C64 },
    Bell { theta: f64 },
}

/// Logical initial state, degraded by depolarization so that its fidelity
/// to the ideal target equals `prep_fidelity`.
///
/// Bell targets are depolarized on one side with `p = 4(1−F)/3`; single
/// qubits with `p = 2(1−F)`.
pub fn prepare_initial_state(target: LogicalTarget, prep_fidelity: Option<f64>) -> Result<DensityMatrix> {
    let f = prep_fidelity.unwrap_or(1.0);
    match target {
        LogicalTarget::Single { alpha, beta } => {
            let k = Ket::new(SpaceSpec::qubit(), CVector::from_vec(vec![alpha, beta]))?;
            let p = 2.0 * (1.0 - f);
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("preparation fidelity {f} is not reachable by depolarization")));
            }
            depolarize(&k.projector(), p)
        }
        LogicalTarget::Bell { theta } => {
            let p = 4.0 * (1.0 - f) / 3.0;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("preparation fidelity {f} is not reachable by depolarization")));
            }
            depolarize_subsystem(&bell_state(theta).projector(), 0, p)
        }
    }
}

/// `(|01⟩ + e^{iθ}|10⟩)/√2`
pub fn bell_state(theta: f64) -> Ket {
    let v = CVector::from_vec(vec![c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0), C64::from_polar(FRAC_1_SQRT_2, theta), c(0.0, 0.0)]);
    Ket::new(SpaceSpec::new(vec![2, 2]).expect("dims"), v).expect("normalized")
}

/// Prebuilt AQEC unitaries that replace the ideal ones, per node.
#[derive(Debug, Clone, Default)]
pub struct GateOverrides {
    pub a: Option<AqecGate>,
    pub b: Option<AqecGate>,
}

impl GateOverrides {
    fn get(&self, node: Node) -> Option<&AqecGate> {
        match node {
            Node::A => self.a.as_ref(),
            Node::B => self.b.as_ref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub series: Vec<ResultSeries>,
    /// `(label, cycle, Wigner grid)`
    pub wigner: Vec<(String, usize, tomo::WignerGrid)>,
}

fn normalized_output(s: &Superop, rho: &CMatrix) -> (CMatrix, f64) {
    let out = s.apply_matrix(rho);
    let tr = linalg::trace(&out).re;
    (out.unscale(tr.max(f64::MIN_POSITIVE)), tr)
}

/// Process fidelity to the identity of a possibly trace-decreasing logical
/// map; each tomography input is renormalized (post-selection).
pub fn conditional_process_fidelity(s: &Superop) -> Result<f64> {
    let pm = tomo::process_tomography(|r| {
        let (m, _) = normalized_output(s, r.matrix());
        DensityMatrix::new(SpaceSpec::qubit(), linalg::hermitian_part(&m))
    })?;
    Ok(pm.identity_fidelity())
}

/// Minimal eigenvalue of the partial transpose; negative iff the two-qubit
/// state is entangled.
pub fn min_pt_eigenvalue(rho: &DensityMatrix) -> Result<f64> {
    let pt = crate::hilbert::partial_transpose_matrix(rho.matrix(), rho.space(), 0)?;
    Ok(linalg::eigvalsh(&pt)[0])
}

/// First time the sampled `λ_min(ρ^{T_A})` reaches zero, by linear
/// interpolation; `None` if it stays negative.
pub fn negativity_lifetime(t: &[f64], lambda_min: &[f64]) -> Option<f64> {
    for k in 1..t.len() {
        if lambda_min[k] >= 0.0 && lambda_min[k - 1] < 0.0 {
            let (y0, y1) = (lambda_min[k - 1], lambda_min[k]);
            return Some(t[k - 1] + (t[k] - t[k - 1]) * (-y0) / (y1 - y0));
        }
    }
    None
}

/// `B(θ) = c + a cos θ + b sin θ`; returns `(c, a, b)` from three exact
/// evaluations.
pub fn bell_signal_harmonics(rho: &DensityMatrix) -> Result<(f64, f64, f64)> {
    let b0 = tomo::chsh_bell(rho, 0.0)?;
    let bpi = tomo::chsh_bell(rho, PI)?;
    let bhalf = tomo::chsh_bell(rho, PI / 2.0)?;
    let c0 = 0.5 * (b0 + bpi);
    Ok((c0, 0.5 * (b0 - bpi), bhalf - c0))
}

pub fn bell_signal_max(rho: &DensityMatrix) -> Result<f64> {
    let (c0, a, b) = bell_signal_harmonics(rho)?;
    Ok(c0 + a.hypot(b))
}

fn exp_fit_record(label: &str, t: &[f64], f: &[f64], floor: f64, tau: f64) -> Result<FitRecord> {
    let fit: ExpFit = tomo::fit_exponential_fidelity(t, f, floor)?;
    let cross = if f.len() > 1 && f[0] > floor {
        // F(τ) = floor + (F(0) − floor)(1 − p)
        let one_minus_p = (f[1] - floor) / (f[0] - floor);
        crate::aqec::depolarizing_decay_time(1.0 - one_minus_p, tau).ok()
    } else {
        None
    };
    Ok(FitRecord {
        label: label.to_string(),
        model: format!("exp-with-floor({floor})"),
        params: vec![("A".into(), fit.a, fit.a_err), ("T_us".into(), fit.t, fit.t_err)],
        cross_check_t: cross,
    })
}

fn build_models(sc: &Scenario, params: &DeviceParams, curve: &Curve, gates: &GateOverrides, nodes: &[Node]) -> Result<Vec<SideModel>> {
    let cfg = sc.cycle_config(curve)?;
    nodes.iter().map(|&n| SideModel::build_with_gate(params, &cfg, n, sc.cutoff, gates.get(n))).collect()
}

/// Run every curve of `sc` and assemble the requested series.
pub fn run_scenario(sc: &Scenario, params: &DeviceParams, gates: &GateOverrides) -> Result<ScenarioResult> {
    sc.validate()?;
    params.validate()?;
    let times: Vec<f64> = (0..=sc.n_cycles).map(|k| k as f64 * sc.tau_us).collect();
    let mut meta = BTreeMap::new();
    meta.insert("scenario".to_string(), sc.name.clone());
    meta.insert("seed".to_string(), sc.seed.to_string());
    meta.insert("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let mut result = ScenarioResult { series: vec![], wigner: vec![] };
    match sc.target {
        Target::Process { node } => {
            let mut fid = ResultSeries { name: format!("{}_process_fidelity", sc.name), axis_name: "time_us".into(), axis: times.clone(), columns: vec![], fits: vec![], metadata: meta.clone() };
            let mut acc_cols = Vec::new();
            for curve in &sc.curves {
                let model = build_models(sc, params, curve, gates, &[node])?.remove(0);
                let maps = model.logical_maps();
                let f = maps.iter().map(conditional_process_fidelity).collect::<Result<Vec<f64>>>()?;
                let acc: Vec<f64> = maps.iter().map(|m| linalg::trace(&m.apply_matrix(&linalg::identity(2).unscale(2.0))).re).collect();
                if times.len() >= 4 {
                    fid.fits.push(exp_fit_record(&curve.label, &times, &f, 0.25, sc.tau_us)?);
                }
                fid.columns.push((curve.label.clone(), f));
                if curve.mode == CycleMode::DetectOnly {
                    acc_cols.push((format!("{}_acceptance", curve.label), acc));
                }
                for &k in &sc.outputs.wigner_cycles {
                    result.wigner.push((curve.label.clone(), k, single_node_wigner(&model, k)?));
                }
            }
            fid.columns.extend(acc_cols);
            if sc.outputs.fidelity {
                result.series.push(fid);
            }
        }
        Target::Bell { theta } => {
            let rho0 = prepare_initial_state(LogicalTarget::Bell { theta }, sc.prep_fidelity)?;
            let ideal = bell_state(theta).projector();
            let mut fid = ResultSeries { name: format!("{}_bell_fidelity", sc.name), axis_name: "time_us".into(), axis: times.clone(), columns: vec![], fits: vec![], metadata: meta.clone() };
            let mut neg = ResultSeries { name: format!("{}_negativity", sc.name), axis_name: "time_us".into(), axis: times.clone(), columns: vec![], fits: vec![], metadata: meta.clone() };
            let mut sweep_cols = Vec::new();
            for curve in &sc.curves {
                let models = build_models(sc, params, curve, gates, &[Node::A, Node::B])?;
                let states = bell_series(&models, &rho0)?;
                let f = states.iter().map(|(r, _)| tomo::state_fidelity(r, &ideal)).collect::<Result<Vec<f64>>>()?;
                let n = states.iter().map(|(r, _)| tomo::negativity(r, 0)).collect::<Result<Vec<f64>>>()?;
                let lam = states.iter().map(|(r, _)| min_pt_eigenvalue(r)).collect::<Result<Vec<f64>>>()?;
                let acc: Vec<f64> = states.iter().map(|s| s.1).collect();
                if times.len() >= 4 {
                    fid.fits.push(exp_fit_record(&curve.label, &times, &f, 0.25, sc.tau_us)?);
                }
                fid.columns.push((curve.label.clone(), f));
                if curve.mode == CycleMode::DetectOnly {
                    fid.columns.push((format!("{}_acceptance", curve.label), acc));
                }
                let life = negativity_lifetime(&times, &lam);
                neg.fits.push(FitRecord {
                    label: curve.label.clone(),
                    model: "negativity-crossing".into(),
                    params: vec![("lifetime_us".into(), life.unwrap_or(f64::INFINITY), f64::NAN)],
                    cross_check_t: None,
                });
                neg.columns.push((curve.label.clone(), n));
                neg.columns.push((format!("{}_min_pt_eig", curve.label), lam));
                if let Some(bs) = sc.outputs.bell_sweep {
                    let last = &states.last().expect("nonempty").0;
                    let thetas: Vec<f64> = (0..bs.points).map(|k| 2.0 * PI * k as f64 / bs.points as f64).collect();
                    let b = thetas.iter().map(|&t| tomo::chsh_bell(last, t)).collect::<Result<Vec<f64>>>()?;
                    sweep_cols.push((curve.label.clone(), thetas, b, bell_signal_max(last)?));
                }
            }
            if sc.outputs.fidelity {
                result.series.push(fid);
            }
            if sc.outputs.negativity {
                result.series.push(neg);
            }
            if let Some((_, thetas, _, _)) = sweep_cols.first() {
                let mut s = ResultSeries { name: format!("{}_bell_sweep", sc.name), axis_name: "theta_rad".into(), axis: thetas.clone(), columns: vec![], fits: vec![], metadata: meta };
                for (label, _, b, bmax) in sweep_cols {
                    s.fits.push(FitRecord { label: label.clone(), model: "sinusoid-max".into(), params: vec![("B_max".into(), bmax, f64::NAN)], cross_check_t: None });
                    s.columns.push((label, b));
                }
                result.series.push(s);
            }
        }
    }
    Ok(result)
}

/// Two-node logical states after `k = 0..=n` cycles, normalized, with the
/// acceptance probability of each.
pub fn bell_series(models: &[SideModel], rho0: &DensityMatrix) -> Result<Vec<(DensityMatrix, f64)>> {
    if models.len() != 2 || rho0.space().dims() != [2, 2] {
        return Err(Error::InvalidDimension("two node models and a two-qubit state are required".into()));
    }
    let a = models[0].logical_maps();
    let b = models[1].logical_maps();
    a.iter()
        .zip(&b)
        .map(|(ma, mb)| {
            let (x, dims) = ma.apply_local(rho0.matrix(), &[2, 2], 0, 1);
            let (y, _) = mb.apply_local(&x, &dims, 1, 1);
            let tr = linalg::trace(&y).re;
            if !(tr > 0.0) {
                return Err(Error::DegeneratePostselection { cycle: 0 });
            }
            Ok((DensityMatrix::new(rho0.space().clone(), linalg::hermitian_part(&y.unscale(tr)))?, tr))
        })
        .collect()
}

fn single_node_wigner(model: &SideModel, cycles: usize) -> Result<tomo::WignerGrid> {
    // |+_L⟩ through `cycles` cycles, cavity reduced state
    let plus = linalg::identity(2).add_scalar(c(0.0, 0.0));
    let plus = CMatrix::from_element(2, 2, c(0.5, 0.0)) + plus.scale(0.0);
    let mut m = model.encoder().apply_matrix(&plus);
    let step = model.carried_map();
    for _ in 0..cycles {
        m = step.apply_matrix(&m);
        let tr = linalg::trace(&m).re;
        m.unscale_mut(tr);
    }
    let space = SpaceSpec::node(model.cutoff)?;
    let (cav, cs) = crate::hilbert::partial_trace_matrix(&m, &space, &[0])?;
    let rho = DensityMatrix::new(cs, linalg::hermitian_part(&cav))?;
    let axis = tomo::linspace(-2.5, 2.5, 41);
    tomo::wigner(&rho, &axis, &axis)
}

/// Error-budget table for the calibrated factors of both nodes: the
/// composed product next to the tabulated total, with `T = −τ/ln(1−p)` for
/// each.
pub fn budget_report(params: &DeviceParams, tau: f64) -> Result<String> {
    let mut s = String::from("cavity  aqec    uncorrectable  measure  composed  T_us    tabulated  T_us\n");
    for node in [Node::A, Node::B] {
        let cav = node.cavity();
        let b = &params.aqec_for(cav)?.budget;
        let composed = crate::aqec::error_budget_compose(&[b.aqec, b.uncorrectable, b.measure])?;
        let t = crate::aqec::depolarizing_decay_time(1.0 - composed, tau)?;
        let t_tab = crate::aqec::depolarizing_decay_time(1.0 - b.total, tau)?;
        let _ = writeln!(
            s,
            "{:<7} {:>5.1}%  {:>12.1}%  {:>6.1}%  {:>7.2}%  {:<6.1}  {:>8.1}%  {:.1}",
            cav.name(),
            100.0 * b.aqec,
            100.0 * b.uncorrectable,
            100.0 * b.measure,
            100.0 * composed,
            t,
            100.0 * b.total,
            t_tab
        );
    }
    Ok(s)
}

/// Fit a series column with `model` (`exp` or `damped-sinusoid`) and format
/// one table row per fit with value ± standard error.
pub fn fit_and_report(axis: &[f64], values: &[f64], label: &str, model: &str, floor: f64, tau: Option<f64>) -> Result<(FitRecord, String)> {
    let rec = match model {
        "exp" => exp_fit_record(label, axis, values, floor, tau.unwrap_or(axis.get(1).copied().unwrap_or(1.0) - axis[0]))?,
        "damped-sinusoid" => {
            let f = crate::device::fit_damped_sinusoid(axis, values)?;
            FitRecord {
                label: label.into(),
                model: model.into(),
                params: vec![
                    ("y0".into(), f.y0, f64::NAN),
                    ("A".into(), f.a, f64::NAN),
                    ("tau".into(), f.tau, f64::NAN),
                    ("omega".into(), f.omega, f64::NAN),
                    ("phi0".into(), f.phi0, f64::NAN),
                ],
                cross_check_t: None,
            }
        }
        other => return Err(config("model", format!("unknown fit model {other:?}"))),
    };
    Ok((rec.clone(), format_fit(&rec)))
}

pub fn format_fit(rec: &FitRecord) -> String {
    let mut s = format!("{:<16} {:<22}", rec.label, rec.model);
    for (name, v, e) in &rec.params {
        if e.is_finite() {
            let _ = write!(s, " {name}={v:.4}±{e:.4}");
        } else {
            let _ = write!(s, " {name}={v:.4}");
        }
    }
    if let Some(t) = rec.cross_check_t {
        let _ = write!(s, " T(-tau/ln(1-p))={t:.1}");
    }
    s
}

/// The logical Pauli transfer of a per-node map at one time, for reports.
pub fn process_matrix_at(model: &SideModel, cycles: usize) -> Result<ProcessMatrix> {
    let maps = model.logical_maps();
    let s = maps.get(cycles).ok_or_else(|| Error::InvalidArgument(format!("cycle {cycles} beyond the schedule")))?;
    ProcessMatrix::from_superop(s)
}
