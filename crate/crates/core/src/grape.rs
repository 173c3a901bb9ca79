//! Piecewise-constant optimal control (GRAPE) for state-transfer problems on
//! a cavity⊗qubit node.
//!
//! Amplitudes are stored in MHz; a control term contributes
//! `2π·u·H_k` rad/µs to the Hamiltonian.

use crate::aqec::{node_conditions, NoiseToggles};
use crate::code::{BinomialCode, TransferPair};
use crate::device::{dispersive_hamiltonian, mhz_to_rad_per_us, DeviceParams, Node};
use crate::error::{Error, Result};
use crate::hilbert::{ladder_ops, Ket, LinearOp, SpaceSpec};
use crate::linalg::{self, c, CMatrix, CVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

pub const DEFAULT_DT_US: f64 = 1e-3;
pub const DEFAULT_CAP_MHZ: f64 = 20.0;
pub const DEFAULT_AQEC_DURATION_US: f64 = 1.0;
pub const NODE_LABELS: [&str; 4] = ["qubit_i", "qubit_q", "cavity_i", "cavity_q"];

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPulse {
    /// step length, µs
    pub dt: f64,
    pub labels: Vec<String>,
    /// `amplitudes[channel][step]`, MHz
    pub amplitudes: Vec<Vec<f64>>,
}

impl ControlPulse {
    pub fn new(dt: f64, labels: Vec<String>, amplitudes: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("step length {dt} must be > 0")));
        }
        if labels.len() != amplitudes.len() {
            return Err(Error::InvalidArgument(format!("{} labels for {} channels", labels.len(), amplitudes.len())));
        }
        let n = amplitudes.first().map_or(0, |a| a.len());
        if n == 0 || amplitudes.iter().any(|a| a.len() != n) {
            return Err(Error::InvalidArgument("channels must be nonempty and equally long".into()));
        }
        if amplitudes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite amplitude".into()));
        }
        Ok(Self { dt, labels, amplitudes })
    }

    pub fn zeros(dt: f64, labels: &[&str], n_steps: usize) -> Result<Self> {
        Self::new(dt, labels.iter().map(|s| s.to_string()).collect(), vec![vec![0.0; n_steps]; labels.len()])
    }

    pub fn n_steps(&self) -> usize {
        self.amplitudes[0].len()
    }

    pub fn n_channels(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.n_steps() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.amplitudes.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `# dt_us=<dt>` header, a label row, then one row per step.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# dt_us={}\nstep,{}\n", self.dt, self.labels.join(","));
        for k in 0..self.n_steps() {
            let _ = write!(s, "{k}");
            for ch in &self.amplitudes {
                let _ = write!(s, ",{}", ch[k]);
            }
            s.push('\n');
        }
        s
    }

    /// Inverse of [`to_csv`](Self::to_csv). Other `#` lines are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Config { field: "pulse".into(), reason: m };
        let mut dt = None;
        for l in text.lines() {
            if let Some(v) = l.trim().strip_prefix("# dt_us=") {
                dt = Some(v.parse::<f64>().map_err(|e| bad(format!("dt: {e}")))?);
            }
        }
        let dt = dt.ok_or_else(|| bad("missing `# dt_us=` header".into()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let cols: Vec<String> = lines.next().ok_or_else(|| bad("missing label row".into()))?.split(',').map(|s| s.trim().to_string()).collect();
        if cols.first().map(String::as_str) != Some("step") {
            return Err(bad("first column must be `step`".into()));
        }
        let labels = cols[1..].to_vec();
        let mut amps = vec![Vec::new(); labels.len()];
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != labels.len() + 1 {
                return Err(bad(format!("row {row} has {} fields", fields.len())));
            }
            for (k, f) in fields[1..].iter().enumerate() {
                amps[k].push(f.trim().parse::<f64>().map_err(|e| bad(format!("row {row}: {e}")))?);
            }
        }
        Self::new(dt, labels, amps)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Config { field: path.display().to_string(), reason: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config { field: path.display().to_string(), reason: e.to_string() })?;
        Self::from_csv(&text)
    }
}

#[derive(Debug, Clone)]
pub struct GrapeProblem {
    pub drift: LinearOp,
    pub controls: Vec<LinearOp>,
    /// (input, target, weight)
    pub pairs: Vec<(Ket, Ket, f64)>,
}

impl GrapeProblem {
    pub fn new(drift: LinearOp, controls: Vec<LinearOp>, pairs: Vec<(Ket, Ket, f64)>) -> Result<Self> {
        let space = drift.space();
        if !drift.is_hermitian(1e-10) {
            return Err(Error::InvalidArgument("drift is not Hermitian".into()));
        }
        for h in &controls {
            if h.space() != space {
                return Err(Error::InvalidDimension("control on a different space than the drift".into()));
            }
            if !h.is_hermitian(1e-10) {
                return Err(Error::InvalidArgument("control is not Hermitian".into()));
            }
        }
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("no transfer pairs".into()));
        }
        for (i, t, w) in &pairs {
            if i.space() != space || t.space() != space {
                return Err(Error::InvalidDimension("transfer pair on a different space".into()));
            }
            if !(*w > 0.0) {
                return Err(Error::InvalidArgument(format!("weight {w} must be > 0")));
            }
        }
        Ok(Self { drift, controls, pairs })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    fn weight_sum(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }

    /// `M = Σ w_j |in_j⟩⟨target_j|`, so that `S = Tr[U M]`.
    fn overlap_operator(&self) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for (i, t, w) in &self.pairs {
            m += i.amplitudes() * t.amplitudes().adjoint() * c(*w, 0.0);
        }
        m
    }

    fn check_pulse(&self, pulse: &ControlPulse) -> Result<()> {
        if pulse.n_channels() != self.controls.len() {
            return Err(Error::InvalidDimension(format!("pulse has {} channels, problem has {} controls", pulse.n_channels(), self.controls.len())));
        }
        Ok(())
    }
}

/// Qubit I/Q (`σx/2`, `σy/2`) and cavity I/Q (`(a+a†)/2`, `i(a†−a)/2`) on
/// the node space `(cavity, qubit)`.
pub fn node_controls(cutoff: usize) -> Result<Vec<LinearOp>> {
    let space = SpaceSpec::node(cutoff)?;
    let half = c(0.5, 0.0);
    let sx = LinearOp::from_matrix(CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), half, half, c(0.0, 0.0)]))?;
    let sy = LinearOp::from_matrix(CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.0, 0.0)]))?;
    let (a, ad) = ladder_ops(cutoff)?;
    let ci = a.add(&ad)?.scale(half);
    let cq = ad.add(&a.scale(c(-1.0, 0.0)))?.scale(c(0.0, 0.5));
    Ok(vec![sx.embed(&space, 1)?, sy.embed(&space, 1)?, ci.embed(&space, 0)?, cq.embed(&space, 0)?])
}

/// The AQEC synthesis problem for `node`: dispersive drift, four drive
/// channels and the twelve conditions after a wait `tau`, equal weights.
pub fn aqec_problem(params: &DeviceParams, node: Node, cutoff: usize, tau: f64, noise: &NoiseToggles) -> Result<GrapeProblem> {
    let code = BinomialCode::new(cutoff)?;
    let drift = dispersive_hamiltonian(params, &[(node.cavity(), cutoff), (node.qubit(), 2)])?;
    let pairs = node_conditions(&code, params, node, tau, noise)?.into_iter().map(|TransferPair { input, target }| (input, target, 1.0)).collect();
    GrapeProblem::new(drift, node_controls(cutoff)?, pairs)
}

struct Step {
    vecs: CMatrix,
    /// `e^{−iλ dt}`
    phases: Vec<C64>,
    /// `−iλ dt`
    mu: Vec<C64>,
}

impl Step {
    fn unitary(&self) -> CMatrix {
        let mut vd = self.vecs.clone();
        for (j, mut col) in vd.column_iter_mut().enumerate() {
            col *= self.phases[j];
        }
        &vd * self.vecs.adjoint()
    }
}

fn step_hamiltonian(problem: &GrapeProblem, pulse: &ControlPulse, k: usize) -> CMatrix {
    let mut h = problem.drift.matrix().clone();
    for (ch, op) in problem.controls.iter().enumerate() {
        let u = pulse.amplitudes[ch][k];
        if u != 0.0 {
            h += op.matrix() * c(mhz_to_rad_per_us(u), 0.0);
        }
    }
    h
}

fn make_step(problem: &GrapeProblem, pulse: &ControlPulse, k: usize) -> Step {
    let (lam, vecs) = linalg::eigh(&step_hamiltonian(problem, pulse, k));
    let mu: Vec<C64> = lam.iter().map(|l| c(0.0, -l * pulse.dt)).collect();
    let phases = mu.iter().map(|m| m.exp()).collect();
    Step { vecs, phases, mu }
}

/// Total propagator `U_N ⋯ U_1`.
pub fn total_unitary(problem: &GrapeProblem, pulse: &ControlPulse) -> Result<CMatrix> {
    problem.check_pulse(pulse)?;
    let mut u = linalg::identity(problem.dim());
    for k in 0..pulse.n_steps() {
        u = make_step(problem, pulse, k).unitary() * u;
    }
    Ok(u)
}

pub fn propagate(problem: &GrapeProblem, pulse: &ControlPulse, input: &Ket) -> Result<Ket> {
    if input.space() != problem.drift.space() {
        return Err(Error::InvalidDimension("input on a different space".into()));
    }
    let u = total_unitary(problem, pulse)?;
    Ket::normalized(input.space().clone(), u * input.amplitudes())
}

/// `|Σ w_j ⟨target_j|U|in_j⟩|² / (Σ w_j)²`
pub fn transfer_fidelity(problem: &GrapeProblem, pulse: &ControlPulse) -> Result<f64> {
    let u = total_unitary(problem, pulse)?;
    Ok(fidelity_of_unitary(problem, &u))
}

pub fn fidelity_of_unitary(problem: &GrapeProblem, u: &CMatrix) -> f64 {
    let s = crate::hilbert::trace_product(u, &problem.overlap_operator());
    s.norm_sqr() / problem.weight_sum().powi(2)
}

/// Low-rank factors `M = P Q†` of the overlap operator.
fn overlap_factors(problem: &GrapeProblem) -> (CMatrix, CMatrix) {
    let svd = problem.overlap_operator().svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > 1e-12 * smax).collect();
    let p = CMatrix::from_columns(&keep.iter().map(|&k| u.column(k) * c(svd.singular_values[k], 0.0)).collect::<Vec<_>>());
    let q = CMatrix::from_columns(&keep.iter().map(|&k| v_t.row(k).adjoint()).collect::<Vec<_>>());
    (p, q)
}

fn sparse_entries(m: &CMatrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != C64::new(0.0, 0.0) {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}

/// `V diag(ph) V† x`
fn apply_step(st: &Step, x: &CMatrix, conj: bool) -> CMatrix {
    let mut y = st.vecs.adjoint() * x;
    for (i, mut row) in y.row_iter_mut().enumerate() {
        row *= if conj { st.phases[i].conj() } else { st.phases[i] };
    }
    &st.vecs * y
}

/// Fidelity and its gradient `∂F/∂u[channel][step]` (per MHz), by a
/// forward/backward sweep with exact derivatives of each step exponential.
pub fn fidelity_and_gradient(problem: &GrapeProblem, pulse: &ControlPulse) -> Result<(f64, Vec<Vec<f64>>)> {
    problem.check_pulse(pulse)?;
    let n = pulse.n_steps();
    let d = problem.dim();
    let steps: Vec<Step> = (0..n).map(|k| make_step(problem, pulse, k)).collect();
    let (p, q) = overlap_factors(problem);
    // fwd[k] = U_k ⋯ U_1 P
    let mut fwd = Vec::with_capacity(n + 1);
    fwd.push(p);
    for st in &steps {
        let next = apply_step(st, fwd.last().expect("nonempty"), false);
        fwd.push(next);
    }
    // S = Tr[U P Q†]
    let s = linalg::trace(&(q.adjoint() * &fwd[n]));
    let w2 = problem.weight_sum().powi(2);
    let fid = s.norm_sqr() / w2;
    let controls: Vec<_> = problem.controls.iter().map(|h| sparse_entries(h.matrix())).collect();
    let scale = c(0.0, -mhz_to_rad_per_us(1.0) * pulse.dt);
    let mut grad = vec![vec![0.0; n]; problem.controls.len()];
    let mut phi = CMatrix::zeros(d, d);
    // back = (U_N ⋯ U_{k+1})† Q
    let mut back = q;
    for k in (0..n).rev() {
        let st = &steps[k];
        let vf = st.vecs.adjoint() * &fwd[k];
        let vb = st.vecs.adjoint() * &back;
        // gv = V† fwd back† V
        let gv = &vf * vb.adjoint();
        for a in 0..d {
            for b in 0..d {
                let diff = st.mu[a] - st.mu[b];
                let f = if diff.norm() < 1e-10 { st.phases[a] } else { (st.phases[a] - st.phases[b]) / diff };
                // Z_ab = gv_ba Φ_ab, stored transposed for W = V Zᵀ V†
                phi[(b, a)] = gv[(b, a)] * f;
            }
        }
        let w = &st.vecs * &phi * st.vecs.adjoint();
        for (ch, entries) in controls.iter().enumerate() {
            let mut ds = C64::new(0.0, 0.0);
            for &(i, j, h) in entries {
                ds += w[(j, i)] * h;
            }
            grad[ch][k] = 2.0 * (s.conj() * ds * scale).re / w2;
        }
        back = apply_step(st, &back, true);
    }
    Ok((fid, grad))
}

pub fn gradient(problem: &GrapeProblem, pulse: &ControlPulse) -> Result<Vec<Vec<f64>>> {
    Ok(fidelity_and_gradient(problem, pulse)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrapeOptions {
    pub max_iter: usize,
    /// amplitude bound, MHz
    pub cap_mhz: f64,
    /// stop once `1 − F` falls below this
    pub target_infidelity: f64,
    /// stop when the gradient norm falls below this
    pub grad_tol: f64,
    /// L-BFGS memory
    pub memory: usize,
}

impl Default for GrapeOptions {
    fn default() -> Self {
        Self { max_iter: 3000, cap_mhz: DEFAULT_CAP_MHZ, target_infidelity: 1e-3, grad_tol: 1e-10, memory: 20 }
    }
}

#[derive(Debug, Clone)]
pub enum PulseInit {
    Pulse(ControlPulse),
    /// random start: `n_steps` steps of `dt` µs, amplitudes drawn with this
    /// spread (MHz)
    Seed { seed: u64, n_steps: usize, dt: f64, spread_mhz: f64 },
}

#[derive(Debug, Clone)]
pub struct GrapeResult {
    pub pulse: ControlPulse,
    pub fidelity: f64,
    pub converged: bool,
    pub iterations: usize,
    /// fidelity after each accepted iteration
    pub history: Vec<f64>,
}

fn random_pulse(problem: &GrapeProblem, seed: u64, n_steps: usize, dt: f64, spread: f64) -> Result<ControlPulse> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a handful of random Fourier components per channel keeps the start smooth
    let nch = problem.controls.len();
    let mut amps = vec![vec![0.0; n_steps]; nch];
    for ch in amps.iter_mut() {
        for h in 1..=6 {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            for (k, v) in ch.iter_mut().enumerate() {
                let x = std::f64::consts::PI * h as f64 * (k as f64 + 0.5) / n_steps as f64;
                *v += spread * (a * x.sin() + b * x.cos()) / 6.0_f64.sqrt();
            }
        }
    }
    let labels = if nch == NODE_LABELS.len() { NODE_LABELS.iter().map(|s| s.to_string()).collect() } else { (0..nch).map(|k| format!("u{k}")).collect() };
    ControlPulse::new(dt, labels, amps)
}

/// Maximize the transfer fidelity by L-BFGS with a backtracking line search
/// on `u = cap·tanh(x)`. Deterministic for a fixed init.
pub fn optimize(problem: &GrapeProblem, init: PulseInit, options: &GrapeOptions) -> Result<GrapeResult> {
    let cap = options.cap_mhz;
    if !(cap > 0.0) {
        return Err(Error::InvalidArgument(format!("amplitude cap {cap} must be > 0")));
    }
    let mut pulse = match init {
        PulseInit::Pulse(p) => p,
        PulseInit::Seed { seed, n_steps, dt, spread_mhz } => random_pulse(problem, seed, n_steps, dt, spread_mhz)?,
    };
    problem.check_pulse(&pulse)?;
    let (nch, n) = (pulse.n_channels(), pulse.n_steps());
    let clip = 1.0 - 1e-9;
    let mut x: Vec<f64> = pulse.amplitudes.iter().flatten().map(|u| (u / cap).clamp(-clip, clip).atanh()).collect();
    let to_pulse = |x: &[f64], p: &mut ControlPulse| {
        for ch in 0..nch {
            for k in 0..n {
                p.amplitudes[ch][k] = cap * x[ch * n + k].tanh();
            }
        }
    };
    // objective 1 − F and its gradient in x
    let eval = |x: &[f64], p: &mut ControlPulse| -> Result<(f64, Vec<f64>)> {
        to_pulse(x, p);
        let (f, g) = fidelity_and_gradient(problem, p)?;
        let gx = (0..nch * n)
            .map(|i| {
                let t = x[i].tanh();
                -g[i / n][i % n] * cap * (1.0 - t * t)
            })
            .collect();
        Ok((1.0 - f, gx))
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let (mut fx, mut gx) = eval(&x, &mut pulse)?;
    let mut history = vec![1.0 - fx];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = fx <= options.target_infidelity;
    let mut iterations = 0;
    while !converged && iterations < options.max_iter {
        iterations += 1;
        // two-loop recursion
        let mut q = gx.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let gn = dot(&gx, &gx).sqrt();
            q.iter_mut().for_each(|v| *v *= 0.1 / gn.max(1e-300));
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &gx);
        if slope >= 0.0 {
            mem.clear();
            let gn = dot(&gx, &gx).sqrt();
            dir = gx.iter().map(|v| -v * 0.1 / gn.max(1e-300)).collect();
            slope = dot(&dir, &gx);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let mut trial = pulse.clone();
            let (fn_, gn) = eval(&xn, &mut trial)?;
            if fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 {
            if mem.len() == options.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        gx = gn;
        history.push(1.0 - fx);
        if fx <= options.target_infidelity || dot(&gx, &gx).sqrt() < options.grad_tol {
            converged = true;
        }
    }
    to_pulse(&x, &mut pulse);
    log::info!("GRAPE: F = {:.6} after {iterations} iterations", 1.0 - fx);
    Ok(GrapeResult { pulse, fidelity: 1.0 - fx, converged, iterations, history })
}

/// Ket on the node space from cavity amplitudes and an ancilla level.
pub fn node_ket(cavity: &[C64], ancilla: usize) -> Result<Ket> {
    let cutoff = cavity.len();
    let v = CVector::from_fn(2 * cutoff, |i, _| if i % 2 == ancilla { cavity[i / 2] } else { c(0.0, 0.0) });
    Ket::normalized(SpaceSpec::node(cutoff)?, v)
}
