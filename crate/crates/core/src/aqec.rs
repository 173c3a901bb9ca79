//! Repetitive error-correction cycles on one or two cavity⊗ancilla nodes.
//!
//! One cycle, in order:
//! 1. free evolution for `τ` (loss, Kerr and PASS shifts, ancilla
//!    decoherence) as a Lindblad propagator;
//! 2. corrected mode: the AQEC unitary, logical depolarization for the gate
//!    error, the measurement-induced phase conditioned on the ancilla, then
//!    ancilla readout with confusion and a conditional reset pulse;
//!    detect-only mode: a Ramsey parity mapping, readout with the parity
//!    fidelity, and an ideal ancilla reset.
//!
//! Each node's cycle is a list of outcome branches (superoperators on the
//! node space); their sum is the unconditional cycle channel. Two-node runs
//! apply the per-node branches locally and track joint outcomes.

use crate::channels::{self, KrausChannel, LindbladSpec, Superop};
use crate::code::{no_jump_corrected_targets_split, no_jump_zero, BinomialCode, TargetPhases, TransferPair};
use crate::device::{mhz_to_rad_per_us, DeviceParams, Node};
use crate::error::{config, Error, Result};
use crate::hilbert::{ladder_ops, DensityMatrix, Ket, LinearOp, SpaceSpec};
use crate::linalg::{self, c, CMatrix, CVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleMode {
    Uncorrected,
    Corrected,
    #[serde(alias = "purified")]
    DetectOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Binomial,
    /// `|0⟩, |1⟩` Fock encoding; free evolution only.
    Fock01,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseToggles {
    pub cavity_loss: bool,
    /// Cavity thermal excitation at the tabulated `n_th`.
    pub cavity_thermal: bool,
    pub ancilla_decoherence: bool,
    pub readout_error: bool,
    pub reset_error: bool,
    pub kerr: bool,
    /// Use the calibrated PASS frequencies instead of bare self-Kerr.
    pub pass: bool,
    pub measurement_phase: bool,
    pub gate_error: bool,
}

impl Default for NoiseToggles {
    fn default() -> Self {
        Self {
            cavity_loss: true,
            cavity_thermal: true,
            ancilla_decoherence: true,
            readout_error: true,
            reset_error: true,
            kerr: true,
            pass: true,
            measurement_phase: true,
            gate_error: true,
        }
    }
}

impl NoiseToggles {
    pub fn none() -> Self {
        Self {
            cavity_loss: false,
            cavity_thermal: false,
            ancilla_decoherence: false,
            readout_error: false,
            reset_error: false,
            kerr: false,
            pass: false,
            measurement_phase: false,
            gate_error: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleConfig {
    /// waiting time per cycle, µs
    pub tau: f64,
    pub n_cycles: usize,
    pub mode: CycleMode,
    pub encoding: Encoding,
    pub noise: NoiseToggles,
    /// node used for single-node states
    pub node: Node,
    /// AQEC gate fidelity; defaults to the calibrated budget factor
    pub gate_fidelity: Option<f64>,
    /// parity-measurement fidelity; defaults to the table value at n̄ = 2
    pub parity_fidelity: Option<f64>,
}

impl CycleConfig {
    pub fn new(tau: f64, n_cycles: usize, mode: CycleMode) -> Result<Self> {
        let cfg = Self {
            tau,
            n_cycles,
            mode,
            encoding: Encoding::Binomial,
            noise: NoiseToggles::default(),
            node: Node::A,
            gate_fidelity: None,
            parity_fidelity: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(config("tau", format!("{} must be > 0", self.tau)));
        }
        if self.encoding == Encoding::Fock01 && self.mode != CycleMode::Uncorrected {
            return Err(config("mode", "Fock encoding supports only uncorrected evolution"));
        }
        for (name, v) in [("gate_fidelity", self.gate_fidelity), ("parity_fidelity", self.parity_fidelity)] {
            if let Some(f) = v {
                if !(0.0..=1.0).contains(&f) {
                    return Err(config(name, format!("{f} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CycleRecord {
    /// 1-based cycle index
    pub cycle: usize,
    /// µs since the start of the run
    pub time: f64,
    /// outcome label and probability for this cycle
    pub outcomes: Vec<(String, f64)>,
    /// state after the cycle; conditioned on the accepted history in
    /// detect-only mode
    pub state: DensityMatrix,
    /// cumulative probability of the accepted history (1 unless detect-only)
    pub accepted_fraction: f64,
}

/// Cavity rotating-frame frequencies `f_n` in MHz used during the wait.
pub fn wait_frequencies(params: &DeviceParams, node: Node, cutoff: usize, noise: &NoiseToggles) -> Result<Vec<f64>> {
    let cav = node.cavity();
    let k = params.self_kerr(cav)?;
    let pass = params.pass_for(cav)?;
    Ok((0..cutoff)
        .map(|n| {
            if !noise.kerr {
                return 0.0;
            }
            if noise.pass && (1..=4).contains(&n) {
                return pass.shifts_khz[n - 1] * 1e-3;
            }
            let nf = n as f64;
            -0.5 * nf * (nf - 1.0) * k
        })
        .collect())
}

/// Lindblad generator of the free evolution of one node `(cavity, ancilla)`.
pub fn wait_generator(params: &DeviceParams, node: Node, cutoff: usize, noise: &NoiseToggles) -> Result<LindbladSpec> {
    let space = SpaceSpec::node(cutoff)?;
    let f = wait_frequencies(params, node, cutoff, noise)?;
    let chi = mhz_to_rad_per_us(params.chi(node.cavity(), node.qubit()));
    let diag = CVector::from_fn(2 * cutoff, |i, _| {
        let (n, a) = (i / 2, i % 2);
        let mut e = mhz_to_rad_per_us(f[n]);
        if a == 1 && noise.kerr {
            e -= chi * n as f64;
        }
        c(e, 0.0)
    });
    let h = LinearOp::new(space.clone(), CMatrix::from_diagonal(&diag))?;
    let (a, ad) = ladder_ops(cutoff)?;
    let mut collapse = Vec::new();
    let cav = params.mode(node.cavity())?;
    if noise.cavity_loss {
        let kappa = 1.0 / cav.t1_us;
        let nth = if noise.cavity_thermal { cav.n_th } else { 0.0 };
        collapse.push((a.embed(&space, 0)?, kappa * (1.0 + nth)));
        if nth > 0.0 {
            collapse.push((ad.embed(&space, 0)?, kappa * nth));
        }
    }
    if noise.ancilla_decoherence {
        let q = params.mode(node.qubit())?;
        let tphi = params.tphi(node.qubit())?;
        let sm = LinearOp::from_matrix(CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]))?;
        let sz = LinearOp::from_matrix(CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]))?;
        collapse.push((sm.embed(&space, 1)?, (1.0 - q.n_th) / q.t1_us));
        collapse.push((sm.adjoint().embed(&space, 1)?, q.n_th / q.t1_us));
        if tphi.is_finite() {
            collapse.push((sz.embed(&space, 1)?, 0.5 / tphi));
        }
    }
    LindbladSpec::new(h, collapse)
}

/// Diagonal of `exp(−i H_wait t)` on the cavity with the ancilla in `|g⟩`.
pub fn wait_phases(freqs_mhz: &[f64], t: f64) -> Vec<C64> {
    freqs_mhz.iter().map(|&f| C64::from_polar(1.0, -mhz_to_rad_per_us(f) * t)).collect()
}

/// The AQEC unitary on one node.
#[derive(Debug, Clone)]
pub struct AqecGate {
    unitary: LinearOp,
}

/// The twelve AQEC transfer pairs with the deterministic wait phases folded
/// into the inputs: `U_wait·input → target`.
pub fn aqec_conditions(
    code: &BinomialCode,
    kappa_t: f64,
    wait: &[C64],
    phases_g: TargetPhases,
    phases_e: TargetPhases,
) -> Result<Vec<TransferPair>> {
    let cutoff = code.cutoff();
    if wait.len() != cutoff {
        return Err(Error::InvalidDimension("wait phases do not match the cutoff".into()));
    }
    let u_wait = CVector::from_fn(2 * cutoff, |i, _| wait[i / 2]);
    no_jump_corrected_targets_split(code, kappa_t, 1.0, phases_g, phases_e)
        .into_iter()
        .map(|p| {
            let input = Ket::new(p.input.space().clone(), p.input.amplitudes().component_mul(&u_wait))?;
            Ok(TransferPair { input, target: p.target })
        })
        .collect()
}

/// AQEC conditions for `node` after a wait `tau`, with targets
/// pre-compensating the measurement-induced phases.
pub fn node_conditions(code: &BinomialCode, params: &DeviceParams, node: Node, tau: f64, noise: &NoiseToggles) -> Result<Vec<TransferPair>> {
    let freqs = wait_frequencies(params, node, code.cutoff(), noise)?;
    let kappa = if noise.cavity_loss { 1.0 / params.mode(node.cavity())?.t1_us } else { 0.0 };
    let (pg, pe) = if noise.measurement_phase {
        let ph = params.phases_for(node.cavity())?;
        (TargetPhases { phi2: -ph.g[0], phi4: -ph.g[1] }, TargetPhases { phi2: -ph.e[0], phi4: -ph.e[1] })
    } else {
        (TargetPhases::default(), TargetPhases::default())
    };
    aqec_conditions(code, kappa * tau, &wait_phases(&freqs, tau), pg, pe)
}

impl AqecGate {
    /// Unitary satisfying every transfer pair, completed on the orthogonal
    /// complement by the unitary closest to the identity.
    pub fn from_pairs(code: &BinomialCode, pairs: &[TransferPair]) -> Result<Self> {
        if pairs.len() != 12 {
            return Err(Error::InvalidArgument(format!("expected 12 transfer pairs, got {}", pairs.len())));
        }
        // rows (1,0) and (0,1) of each family span everything
        let picks = [&pairs[0], &pairs[5], &pairs[6], &pairs[11]];
        let s = CMatrix::from_columns(&picks.iter().map(|p| p.input.amplitudes().clone()).collect::<Vec<_>>());
        let t = CMatrix::from_columns(&picks.iter().map(|p| p.target.amplitudes().clone()).collect::<Vec<_>>());
        let sc = linalg::orthogonal_complement(&s);
        let tc = linalg::orthogonal_complement(&t);
        let m = linalg::polar_unitary(&linalg::matmul(&tc.adjoint(), &sc));
        let u = linalg::matmul(&t, &s.adjoint()) + linalg::matmul(&linalg::matmul(&tc, &m), &sc.adjoint());
        Ok(Self { unitary: LinearOp::new(SpaceSpec::node(code.cutoff())?, u)? })
    }

    pub fn from_conditions(
        code: &BinomialCode,
        kappa_t: f64,
        wait: &[C64],
        phases_g: TargetPhases,
        phases_e: TargetPhases,
    ) -> Result<Self> {
        Self::from_pairs(code, &aqec_conditions(code, kappa_t, wait, phases_g, phases_e)?)
    }

    /// Gate for `node` with targets pre-compensating the measurement phases.
    pub fn for_node(code: &BinomialCode, params: &DeviceParams, node: Node, tau: f64, noise: &NoiseToggles) -> Result<Self> {
        Self::from_pairs(code, &node_conditions(code, params, node, tau, noise)?)
    }

    /// Wrap an externally synthesized unitary on the node space.
    pub fn from_unitary(u: LinearOp) -> Result<Self> {
        if u.unitarity_error() > 1e-8 {
            return Err(Error::InvalidArgument(format!("gate is not unitary (error {:e})", u.unitarity_error())));
        }
        Ok(Self { unitary: u })
    }

    pub fn unitary(&self) -> &LinearOp {
        &self.unitary
    }
}

fn logical_paulis(basis: &CMatrix) -> Vec<CMatrix> {
    let n = basis.nrows();
    let rest = linalg::identity(n) - linalg::matmul(basis, &basis.adjoint());
    channels::pauli_matrices()[1..]
        .iter()
        .map(|p| linalg::matmul(&linalg::matmul(basis, p), &basis.adjoint()) + &rest)
        .collect()
}

/// Logical depolarization with probability `p` on the code space of the
/// cavity, identity on the ancilla and outside the code space.
pub fn gate_error_channel(code: &BinomialCode, p: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("gate error {p} outside [0, 1]")));
    }
    let id2 = linalg::identity(2);
    let n = code.cutoff();
    let mut ops = vec![linalg::kron(&linalg::identity(n), &id2).scale((1.0 - 0.75 * p).sqrt())];
    for u in logical_paulis(&code.logical_basis()) {
        ops.push(linalg::kron(&u, &id2).scale((0.25 * p).sqrt()));
    }
    KrausChannel::new(SpaceSpec::node(n)?, ops)
}

/// Apply the AQEC unitary then logical depolarization `1 − gate_fidelity`.
pub fn aqec_map(rho: &DensityMatrix, gate: &AqecGate, code: &BinomialCode, gate_fidelity: f64) -> Result<DensityMatrix> {
    let out = rho.evolve(gate.unitary())?;
    gate_error_channel(code, 1.0 - gate_fidelity)?.apply(&out)
}

fn ancilla_projector(cutoff: usize, a: usize) -> CMatrix {
    let mut p = CMatrix::zeros(2, 2);
    p[(a, a)] = c(1.0, 0.0);
    linalg::kron(&linalg::identity(cutoff), &p)
}

fn ancilla_flip(cutoff: usize, from: usize, to: usize) -> CMatrix {
    let mut p = CMatrix::zeros(2, 2);
    p[(to, from)] = c(1.0, 0.0);
    linalg::kron(&linalg::identity(cutoff), &p)
}

/// Readout of the ancilla with confusion `(F_g, F_e)` followed by a π pulse
/// on an `e` outcome that succeeds with `reset_fidelity`. Returns the Kraus
/// operators of the `g` and `e` outcomes.
pub fn reset_instrument(cutoff: usize, f_g: f64, f_e: f64, reset_fidelity: f64) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let pg = ancilla_projector(cutoff, 0);
    let pe = ancilla_projector(cutoff, 1);
    let up = ancilla_flip(cutoff, 0, 1);
    let down = ancilla_flip(cutoff, 1, 0);
    let fr = reset_fidelity;
    let g_out = vec![pg.scale(f_g.sqrt()), pe.scale((1.0 - f_e).sqrt())];
    let e_out = vec![
        up.scale(((1.0 - f_g) * fr).sqrt()),
        pg.scale(((1.0 - f_g) * (1.0 - fr)).sqrt()),
        down.scale((f_e * fr).sqrt()),
        pe.scale((f_e * (1.0 - fr)).sqrt()),
    ];
    (g_out, e_out)
}

/// Unconditional readout-and-reset of the ancilla of a node state.
pub fn ancilla_reset(rho: &DensityMatrix, f_g: f64, f_e: f64, reset_fidelity: f64) -> Result<DensityMatrix> {
    let dims = rho.space().dims();
    if dims.len() != 2 || dims[1] != 2 {
        return Err(Error::InvalidDimension("expected a (cavity, ancilla) state".into()));
    }
    let (g, e) = reset_instrument(dims[0], f_g, f_e, reset_fidelity);
    let ops: Vec<CMatrix> = g.into_iter().chain(e).collect();
    KrausChannel::new(rho.space().clone(), ops)?.apply(rho)
}

fn ry(theta: f64) -> CMatrix {
    let (s, co) = (0.5 * theta).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

/// `R_y(−π/2) · C_P · R_y(π/2)` mapping even parity to `|g⟩`.
pub fn parity_mapping_unitary(cutoff: usize) -> CMatrix {
    let id = linalg::identity(cutoff);
    let parity = CMatrix::from_diagonal(&CVector::from_fn(cutoff, |n, _| c(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0)));
    let cp = linalg::kron(&id, &ancilla_projector(1, 0)) + linalg::kron(&parity, &ancilla_projector(1, 1));
    let r1 = linalg::kron(&id, &ry(std::f64::consts::FRAC_PI_2));
    let r2 = linalg::kron(&id, &ry(-std::f64::consts::FRAC_PI_2));
    linalg::matmul(&r2, &linalg::matmul(&cp, &r1))
}

/// Kraus operators of the reported-even and reported-odd outcomes of a
/// parity measurement with symmetric error `1 − fidelity`; the ancilla is
/// returned to `|g⟩`.
pub fn parity_instrument(cutoff: usize, fidelity: f64) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let u = parity_mapping_unitary(cutoff);
    let keep = ancilla_projector(cutoff, 0);
    let reset = ancilla_flip(cutoff, 1, 0);
    let (f, q) = (fidelity.sqrt(), (1.0 - fidelity).sqrt());
    let even = vec![linalg::matmul(&keep, &u).scale(f), linalg::matmul(&reset, &u).scale(q)];
    let odd = vec![linalg::matmul(&keep, &u).scale(q), linalg::matmul(&reset, &u).scale(f)];
    (even, odd)
}

#[derive(Debug, Clone)]
pub struct SyndromeOutcome {
    pub p_even: f64,
    pub p_odd: f64,
    pub post_even: Option<DensityMatrix>,
    pub post_odd: Option<DensityMatrix>,
}

/// Parity syndrome of a `(cavity, ancilla)` state whose ancilla is in `|g⟩`.
pub fn parity_syndrome(rho: &DensityMatrix, fidelity: f64) -> Result<SyndromeOutcome> {
    let dims = rho.space().dims();
    if dims.len() != 2 || dims[1] != 2 {
        return Err(Error::InvalidDimension("expected a (cavity, ancilla) state".into()));
    }
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::InvalidArgument(format!("parity fidelity {fidelity} outside [0, 1]")));
    }
    let pe = linalg::trace(&linalg::matmul(&ancilla_projector(dims[0], 1), rho.matrix())).re;
    if pe > 1e-9 {
        return Err(Error::Precondition(format!("ancilla excited population {pe:e} before parity mapping")));
    }
    let (even, odd) = parity_instrument(dims[0], fidelity);
    let branch = |ops: &[CMatrix]| {
        let mut m = CMatrix::zeros(rho.dim(), rho.dim());
        for k in ops {
            m += linalg::conjugate(k, rho.matrix());
        }
        m
    };
    let me = branch(&even);
    let mo = branch(&odd);
    let (p_even, p_odd) = (linalg::trace(&me).re, linalg::trace(&mo).re);
    Ok(SyndromeOutcome {
        p_even,
        p_odd,
        post_even: DensityMatrix::normalize(rho.space().clone(), me).ok().filter(|_| p_even > 1e-15),
        post_odd: DensityMatrix::normalize(rho.space().clone(), mo).ok().filter(|_| p_odd > 1e-15),
    })
}

/// Logical basis (columns) of an encoding at a given cutoff.
pub fn encoding_basis(encoding: Encoding, cutoff: usize) -> Result<CMatrix> {
    match encoding {
        Encoding::Binomial => Ok(BinomialCode::new(cutoff)?.logical_basis()),
        Encoding::Fock01 => {
            if cutoff < 2 {
                return Err(Error::InvalidDimension("Fock encoding needs cutoff >= 2".into()));
            }
            let mut b = CMatrix::zeros(cutoff, 2);
            b[(0, 0)] = c(1.0, 0.0);
            b[(1, 1)] = c(1.0, 0.0);
            Ok(b)
        }
    }
}

/// Per-node cycle model: precomputed branch superoperators.
#[derive(Debug, Clone)]
pub struct SideModel {
    pub node: Node,
    pub cutoff: usize,
    pub config: CycleConfig,
    basis: CMatrix,
    kappa: f64,
    freqs: Vec<f64>,
    branches: Vec<(String, Superop)>,
}

impl SideModel {
    pub fn build(params: &DeviceParams, config: &CycleConfig, node: Node, cutoff: usize) -> Result<Self> {
        Self::build_with_gate(params, config, node, cutoff, None)
    }

    /// As [`SideModel::build`], replacing the ideal AQEC unitary by `gate`.
    pub fn build_with_gate(params: &DeviceParams, config: &CycleConfig, node: Node, cutoff: usize, gate: Option<&AqecGate>) -> Result<Self> {
        config.validate()?;
        let noise = &config.noise;
        let basis = encoding_basis(config.encoding, cutoff)?;
        let wait = wait_generator(params, node, cutoff, noise)?.propagator(config.tau);
        let freqs = wait_frequencies(params, node, cutoff, noise)?;
        let kappa = if noise.cavity_loss { 1.0 / params.mode(node.cavity())?.t1_us } else { 0.0 };
        let branches = match config.mode {
            CycleMode::Uncorrected => vec![("none".to_string(), wait)],
            CycleMode::DetectOnly => {
                let f = match config.parity_fidelity {
                    Some(f) => f,
                    None if noise.readout_error => params.parity_fidelity_for(node.cavity(), 2.0)?,
                    None => 1.0,
                };
                let (even, odd) = parity_instrument(cutoff, f);
                vec![
                    ("even".to_string(), wait.then(&Superop::from_kraus(&even))),
                    ("odd".to_string(), wait.then(&Superop::from_kraus(&odd))),
                ]
            }
            CycleMode::Corrected => {
                let code = BinomialCode::new(cutoff)?;
                let gate = match gate {
                    Some(g) if g.unitary().dim() != 2 * cutoff => {
                        return Err(Error::InvalidDimension("AQEC gate does not match the node cutoff".into()))
                    }
                    Some(g) => g.clone(),
                    None => AqecGate::for_node(&code, params, node, config.tau, noise)?,
                };
                let mut core = wait.then(&Superop::unitary(gate.unitary().matrix()));
                if noise.gate_error {
                    let f = match config.gate_fidelity {
                        Some(f) => f,
                        None => params.aqec_for(node.cavity())?.budget.aqec,
                    };
                    core = core.then(&gate_error_channel(&code, 1.0 - f)?.superop());
                }
                if noise.measurement_phase {
                    let ph = params.phases_for(node.cavity())?;
                    let ug = crate::device::phase_unitary(cutoff, ph.g[0], ph.g[1])?.into_matrix();
                    let ue = crate::device::phase_unitary(cutoff, ph.e[0], ph.e[1])?.into_matrix();
                    let u = linalg::kron(&ug, &ancilla_projector(1, 0)) + linalg::kron(&ue, &ancilla_projector(1, 1));
                    core = core.then(&Superop::unitary(&u));
                }
                let q = node.qubit();
                let ro = params.readout_for(q)?;
                let (fg, fe) = if noise.readout_error { (ro.f_g, ro.f_e) } else { (1.0, 1.0) };
                let fr = if noise.reset_error { params.reset_fidelity(q)? } else { 1.0 };
                let (g_ops, e_ops) = reset_instrument(cutoff, fg, fe, fr);
                vec![
                    ("g".to_string(), core.then(&Superop::from_kraus(&g_ops))),
                    ("e".to_string(), core.then(&Superop::from_kraus(&e_ops))),
                ]
            }
        };
        Ok(Self { node, cutoff, config: config.clone(), basis, kappa, freqs, branches })
    }

    pub fn branches(&self) -> &[(String, Superop)] {
        &self.branches
    }

    /// The map applied to the state carried to the next cycle: the sum of
    /// all branches, or only the accepted branch in detect-only mode.
    pub fn carried_map(&self) -> Superop {
        match self.config.mode {
            CycleMode::DetectOnly => self.branches[0].1.clone(),
            _ => {
                let mut it = self.branches.iter();
                let first = it.next().expect("at least one branch").1.clone();
                it.fold(first, |acc, b| acc.add(&b.1))
            }
        }
    }

    /// Logical qubit `|i⟩⟨j|` ↦ code word ⊗ `|g⟩⟨g|`.
    pub fn encoder(&self) -> Superop {
        let g = CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        Superop::from_kraus(&[linalg::kron(&self.basis, &g)])
    }

    /// Decoder after `cycles` cycles: traces out the ancilla, undoes the
    /// deterministic wait phases where no gate does so, projects onto the
    /// logical basis (the no-jump-deformed one in detect-only mode) and
    /// sends leaked weight to `I/2`.
    pub fn decoder(&self, cycles: usize) -> Superop {
        let t = cycles as f64 * self.config.tau;
        let mut basis = self.basis.clone();
        if self.config.mode == CycleMode::DetectOnly && self.config.encoding == Encoding::Binomial {
            let code = BinomialCode::new(self.cutoff).expect("cutoff checked at build");
            basis.set_column(0, no_jump_zero(&code, self.kappa, t).amplitudes());
        }
        if self.config.mode != CycleMode::Corrected {
            let ph = wait_phases(&self.freqs, t);
            for (n, mut row) in basis.row_iter_mut().enumerate() {
                for z in row.iter_mut() {
                    *z *= ph[n];
                }
            }
        }
        decode_superop(&basis)
    }

    /// Logical maps `decode ∘ cycle^k ∘ encode` for `k = 0..=n_cycles`.
    /// Trace-decreasing in detect-only mode (the trace is the acceptance).
    pub fn logical_maps(&self) -> Vec<Superop> {
        let step = self.carried_map();
        let mut m = self.encoder();
        let mut out = Vec::with_capacity(self.config.n_cycles + 1);
        out.push(m.then(&self.decoder(0)));
        for k in 1..=self.config.n_cycles {
            m = m.then(&step);
            out.push(m.then(&self.decoder(k)));
        }
        out
    }
}

/// Node `(cavity, ancilla)` → logical qubit: `B†ρB` plus the weight outside
/// `span(B)` as `I/2`.
pub fn decode_superop(basis: &CMatrix) -> Superop {
    let n = basis.nrows();
    let comp = linalg::orthogonal_complement(basis);
    let mut cav_ops = vec![basis.adjoint()];
    for j in 0..comp.ncols() {
        let q = comp.column(j).adjoint();
        for k in 0..2 {
            let mut e = CMatrix::zeros(2, n);
            e.row_mut(k).copy_from(&q.scale(FRAC_1_SQRT_2));
            cav_ops.push(e);
        }
    }
    let bras = [
        CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]),
        CMatrix::from_row_slice(1, 2, &[c(0.0, 0.0), c(1.0, 0.0)]),
    ];
    let ops: Vec<CMatrix> = cav_ops.iter().flat_map(|k| bras.iter().map(move |b| linalg::kron(k, b))).collect();
    Superop::from_kraus(&ops)
}

fn node_models(params: &DeviceParams, config: &CycleConfig, dims: &[usize]) -> Result<Vec<SideModel>> {
    match dims {
        [cav, 2] => Ok(vec![SideModel::build(params, config, config.node, *cav)?]),
        [c1, 2, c2, 2] => Ok(vec![SideModel::build(params, config, Node::A, *c1)?, SideModel::build(params, config, Node::B, *c2)?]),
        _ => Err(Error::InvalidDimension(format!("expected (cavity, qubit) or (cavity, qubit, cavity, qubit), got {dims:?}"))),
    }
}

/// Run `config.n_cycles` cycles from `rho0`.
///
/// `rho0` lives on one node `(cavity, qubit)` or on both nodes
/// `(S1, I1, S3, I2)`; in the latter case node A and node B cycles are
/// applied locally and outcomes are joint.
pub fn run_cycles(rho0: &DensityMatrix, config: &CycleConfig, params: &DeviceParams) -> Result<Vec<CycleRecord>> {
    let dims = rho0.space().dims().to_vec();
    let models = node_models(params, config, &dims)?;
    run_with_models(rho0, config, &models)
}

/// [`run_cycles`] with prebuilt node models (one per node, in order).
pub fn run_with_models(rho0: &DensityMatrix, config: &CycleConfig, models: &[SideModel]) -> Result<Vec<CycleRecord>> {
    let dims = rho0.space().dims().to_vec();
    let space = rho0.space().clone();
    let mut rho = rho0.matrix().clone();
    let mut accepted = 1.0;
    let mut records = Vec::with_capacity(config.n_cycles);
    for cycle in 1..=config.n_cycles {
        // branch states over joint outcomes
        let mut states: Vec<(String, CMatrix)> = vec![(String::new(), rho.clone())];
        for (side, model) in models.iter().enumerate() {
            let first = 2 * side;
            let mut next = Vec::new();
            for (label, m) in &states {
                for (bl, op) in model.branches() {
                    let (out, _) = op.apply_local(m, &dims, first, 2);
                    let l = if label.is_empty() { bl.clone() } else { format!("{label}{bl}") };
                    next.push((l, out));
                }
            }
            states = next;
        }
        let outcomes: Vec<(String, f64)> = states.iter().map(|(l, m)| (l.clone(), linalg::trace(m).re)).collect();
        let total: f64 = outcomes.iter().map(|o| o.1).sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::Integration { t: cycle as f64 * config.tau, reason: format!("cycle {cycle}: branch probabilities sum to {total}") });
        }
        let state = match config.mode {
            CycleMode::DetectOnly => {
                let keep = "even".repeat(models.len());
                let (_, m) = states.iter().find(|(l, _)| *l == keep).expect("accepted branch present");
                let p = linalg::trace(m).re;
                accepted *= p;
                if p > 1e-300 {
                    rho = m.unscale(p);
                    DensityMatrix::from_raw(space.clone(), rho.clone())
                } else {
                    accepted = 0.0;
                    DensityMatrix::maximally_mixed(&space)
                }
            }
            _ => {
                let mut sum = CMatrix::zeros(rho.nrows(), rho.ncols());
                for (_, m) in &states {
                    sum += m;
                }
                rho = sum;
                DensityMatrix::from_raw(space.clone(), rho.clone())
            }
        };
        records.push(CycleRecord { cycle, time: cycle as f64 * config.tau, outcomes, state, accepted_fraction: accepted });
        if accepted == 0.0 {
            break;
        }
    }
    Ok(records)
}

/// States and cumulative acceptance conditioned on all-even histories.
pub fn postselect_purify(records: &[CycleRecord]) -> Result<(Vec<DensityMatrix>, Vec<f64>)> {
    let mut states = Vec::with_capacity(records.len());
    let mut acc = Vec::with_capacity(records.len());
    for r in records {
        if !r.outcomes.iter().any(|(l, _)| l.starts_with("even")) {
            return Err(Error::Precondition(format!("cycle {} was not run in detect-only mode", r.cycle)));
        }
        if r.accepted_fraction <= 0.0 {
            return Err(Error::DegeneratePostselection { cycle: r.cycle });
        }
        states.push(r.state.clone());
        acc.push(r.accepted_fraction);
    }
    Ok((states, acc))
}

/// `T = −τ / ln(1 − p)`
pub fn depolarizing_decay_time(p: f64, tau: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must lie in (0, 1)")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau = {tau} must be > 0")));
    }
    Ok(-tau / (1.0 - p).ln())
}

/// `1 − p = Π (1 − p_i)`
pub fn error_budget_compose(factors: &[f64]) -> Result<f64> {
    if let Some(f) = factors.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidArgument(format!("budget factor {f} outside (0, 1]")));
    }
    Ok(factors.iter().product())
}

/// `F = f0 · (1 − c₁/T₁)(1 − c₂/T_φ)(1 − c₃/T_c)`
pub fn gate_fidelity_model(t1: f64, tphi: f64, tc: f64, f0: f64, coefficients: [f64; 3]) -> Result<f64> {
    if !(t1 > 0.0 && tphi > 0.0 && tc > 0.0) {
        return Err(Error::InvalidArgument("coherence times must be > 0".into()));
    }
    Ok([t1, tphi, tc].iter().zip(coefficients).fold(f0, |f, (t, c)| f * (1.0 - c / t)))
}

/// CSV of a cycle trace; `fidelity` holds one value per record.
pub fn records_to_csv(records: &[CycleRecord], fidelity: &[f64]) -> String {
    let labels: Vec<String> = records.first().map(|r| r.outcomes.iter().map(|o| o.0.clone()).collect()).unwrap_or_default();
    let mut s = String::from("cycle,time_us");
    for l in &labels {
        let _ = write!(s, ",p_{l}");
    }
    s.push_str(",fidelity,acceptance\n");
    for (k, r) in records.iter().enumerate() {
        let _ = write!(s, "{},{}", r.cycle, r.time);
        for o in &r.outcomes {
            let _ = write!(s, ",{:.12e}", o.1);
        }
        let f = fidelity.get(k).copied().unwrap_or(f64::NAN);
        let _ = writeln!(s, ",{:.12e},{:.12e}", f, r.accepted_fraction);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{error_state, logical_state};
    use crate::hilbert::{tensor, Ket};

    fn node_state(k: &Ket) -> DensityMatrix {
        tensor(&[k.clone(), Ket::ground()]).unwrap().projector()
    }

    #[test]
    fn ideal_gate_recovers_error_words() {
        let code = BinomialCode::new(8).unwrap();
        let wait = vec![c(1.0, 0.0); 8];
        let gate = AqecGate::from_conditions(&code, 0.0, &wait, TargetPhases::default(), TargetPhases::default()).unwrap();
        assert!(gate.unitary().unitarity_error() < 1e-12);
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let out = aqec_map(&node_state(&error_state(&code, a, b).unwrap()), &gate, &code, 1.0).unwrap();
        let want = tensor(&[logical_state(&code, a, b).unwrap(), Ket::excited()]).unwrap().projector();
        assert!(linalg::max_abs(&(out.matrix() - want.matrix())) < 1e-12);
        let inp = node_state(&logical_state(&code, a, b).unwrap());
        let out = aqec_map(&inp, &gate, &code, 1.0).unwrap();
        assert!(linalg::max_abs(&(out.matrix() - inp.matrix())) < 1e-12);
    }

    #[test]
    fn reset_examples() {
        let e = node_state(&Ket::fock(5, 0).unwrap()).evolve(&LinearOp::new(SpaceSpec::node(5).unwrap(), ancilla_flip(5, 0, 1) + ancilla_flip(5, 1, 0)).unwrap()).unwrap();
        let out = ancilla_reset(&e, 1.0, 1.0, 1.0).unwrap();
        assert!((out.matrix()[(0, 0)].re - 1.0).abs() < 1e-14);
        let out = ancilla_reset(&e, 1.0, 1.0, 0.9844).unwrap();
        assert!((out.matrix()[(0, 0)].re - 0.9844).abs() < 1e-14);
        let g = node_state(&Ket::fock(5, 0).unwrap());
        let out = ancilla_reset(&g, 0.9918, 1.0, 1.0).unwrap();
        assert!((out.matrix()[(1, 1)].re - 0.0082).abs() < 1e-14);
    }

    #[test]
    fn syndrome_examples() {
        let code = BinomialCode::new(8).unwrap();
        let l = node_state(&logical_state(&code, c(0.6, 0.0), c(0.8, 0.0)).unwrap());
        let s = parity_syndrome(&l, 1.0).unwrap();
        assert!((s.p_even - 1.0).abs() < 1e-14);
        let s = parity_syndrome(&l, 0.9629).unwrap();
        assert!((s.p_even - 0.9629).abs() < 1e-14);
        let e = node_state(&code.error0);
        assert!((parity_syndrome(&e, 1.0).unwrap().p_odd - 1.0).abs() < 1e-14);
        let excited = tensor(&[code.logical1.clone(), Ket::excited()]).unwrap().projector();
        assert!(matches!(parity_syndrome(&excited, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn budget_arithmetic() {
        assert!((depolarizing_decay_time(1.0 - (-1.0f64).exp(), 100.0).unwrap() - 100.0).abs() < 1e-12);
        assert!(depolarizing_decay_time(0.0, 50.0).is_err());
        assert_eq!(error_budget_compose(&[0.9]).unwrap(), 0.9);
        let f = gate_fidelity_model(100.0, 60.0, 265.0, 0.9977, [0.848, 0.745, 3.73]).unwrap();
        assert!((f - 0.9977 * (1.0 - 0.00848) * (1.0 - 0.745 / 60.0) * (1.0 - 3.73 / 265.0)).abs() < 1e-15);
    }
}
