//! Device parameters and calibration math.
//!
//! Table values are kept in the units they are calibrated in (MHz for
//! `χ/2π` and Kerr terms, kHz for PASS shifts, µs for times). Conversion to
//! angular frequency in rad/µs happens only in [`mhz_to_rad_per_us`].

use crate::error::{config, Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::hilbert::{LinearOp, SpaceSpec};
use crate::linalg::{CMatrix, CVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

/// The shipped parameter file.
pub const DEFAULT_DEVICE_TOML: &str = include_str!("../data/device.toml");

/// `2π f`: MHz to rad/µs.
pub fn mhz_to_rad_per_us(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz
}

/// Device modes, declared in the physical chain order used for composite
/// spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    S1,
    I1,
    Y1,
    S2,
    Y2,
    S3,
    I2,
}

impl Mode {
    pub fn is_cavity(self) -> bool {
        matches!(self, Mode::S1 | Mode::S2 | Mode::S3)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::S1 => "S1",
            Mode::I1 => "I1",
            Mode::Y1 => "Y1",
            Mode::S2 => "S2",
            Mode::Y2 => "Y2",
            Mode::S3 => "S3",
            Mode::I2 => "I2",
        }
    }
}

/// A logical-qubit node: storage cavity plus its control qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Node {
    /// S1 with I1
    A,
    /// S3 with I2
    B,
}

impl Node {
    pub fn cavity(self) -> Mode {
        match self {
            Node::A => Mode::S1,
            Node::B => Mode::S3,
        }
    }

    pub fn qubit(self) -> Mode {
        match self {
            Node::A => Mode::I1,
            Node::B => Mode::I2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QubitState {
    G,
    E,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeParams {
    pub frequency_ghz: f64,
    pub t1_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_range_us: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_star_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_star_range_us: Option<[f64; 2]>,
    pub n_th: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub modes: [Mode; 2],
    pub chi_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutParams {
    pub f_g: f64,
    pub f_e: f64,
    pub resonator_chi_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset_fidelity: Option<f64>,
}

/// Phases `[φ₂, φ₄]` in rad for each control-qubit state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementPhases {
    pub g: [f64; 2],
    pub e: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassCalibration {
    pub omega_mhz: f64,
    pub delta_chi: f64,
    /// Measured `f₁…f₄` in kHz.
    pub shifts_khz: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetFactors {
    pub aqec: f64,
    pub uncorrectable: f64,
    pub measure: f64,
    /// tabulated total; the product of the rounded factors can differ from
    /// it by a few tenths of a percent
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AqecCalibration {
    pub f0: f64,
    pub coefficients: [f64; 3],
    pub budget: BudgetFactors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub modes: BTreeMap<Mode, ModeParams>,
    pub self_kerr_mhz: BTreeMap<Mode, f64>,
    pub couplings: Vec<Coupling>,
    pub readout: BTreeMap<Mode, ReadoutParams>,
    pub parity_fidelity: BTreeMap<Mode, Vec<f64>>,
    pub measurement_phases: BTreeMap<Mode, MeasurementPhases>,
    pub pass: BTreeMap<Mode, PassCalibration>,
    pub aqec: BTreeMap<Mode, AqecCalibration>,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_DEVICE_TOML).expect("shipped device parameters are valid")
    }
}

fn unit_interval(field: String, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(config(field, format!("{v} is outside [0, 1]")));
    }
    Ok(())
}

fn positive(field: String, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(config(field, format!("{v} must be a positive time")));
    }
    Ok(())
}

impl DeviceParams {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: DeviceParams = toml::from_str(s).map_err(|e| config(field_of(&e), e.message().to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("parameters serialize")
    }

    /// Range and completeness checks for everything the simulation uses.
    pub fn validate(&self) -> Result<()> {
        for (m, p) in &self.modes {
            positive(format!("modes.{}.t1_us", m.name()), p.t1_us)?;
            if let Some(t2) = p.t2_star_us {
                positive(format!("modes.{}.t2_star_us", m.name()), t2)?;
            }
            if !(0.0..0.5).contains(&p.n_th) {
                return Err(config(format!("modes.{}.n_th", m.name()), format!("{} outside [0, 0.5)", p.n_th)));
            }
            if !m.is_cavity() && p.t2_star_us.is_none() {
                return Err(config(format!("modes.{}.t2_star_us", m.name()), "qubits need a Ramsey time"));
            }
        }
        for (m, r) in &self.readout {
            unit_interval(format!("readout.{}.f_g", m.name()), r.f_g)?;
            unit_interval(format!("readout.{}.f_e", m.name()), r.f_e)?;
            if let Some(f) = r.reset_fidelity {
                unit_interval(format!("readout.{}.reset_fidelity", m.name()), f)?;
            }
        }
        for (m, v) in &self.parity_fidelity {
            if v.is_empty() {
                return Err(config(format!("parity_fidelity.{}", m.name()), "empty table"));
            }
            for (k, f) in v.iter().enumerate() {
                unit_interval(format!("parity_fidelity.{}[{k}]", m.name()), *f)?;
            }
        }
        for (m, a) in &self.aqec {
            unit_interval(format!("aqec.{}.f0", m.name()), a.f0)?;
            let b = a.budget;
            for (name, v) in [("aqec", b.aqec), ("uncorrectable", b.uncorrectable), ("measure", b.measure), ("total", b.total)] {
                unit_interval(format!("aqec.{}.budget.{name}", m.name()), v)?;
            }
        }
        for node in [Node::A, Node::B] {
            let (cav, q) = (node.cavity(), node.qubit());
            self.mode(cav)?;
            self.mode(q)?;
            self.self_kerr(cav)?;
            if self.chi(cav, q) == 0.0 {
                return Err(config(format!("couplings.{}-{}", cav.name(), q.name()), "missing dispersive shift"));
            }
            self.readout_for(q)?;
            self.reset_fidelity(q)?;
            self.parity_fidelity_for(cav, 2.0)?;
            self.phases_for(cav)?;
            self.pass_for(cav)?;
            self.aqec_for(cav)?;
            self.tphi(q)?;
        }
        Ok(())
    }

    pub fn mode(&self, m: Mode) -> Result<&ModeParams> {
        self.modes.get(&m).ok_or_else(|| config(format!("modes.{}", m.name()), "missing"))
    }

    pub fn self_kerr(&self, m: Mode) -> Result<f64> {
        self.self_kerr_mhz.get(&m).copied().ok_or_else(|| config(format!("self_kerr_mhz.{}", m.name()), "missing"))
    }

    /// `χ/2π` in MHz between two distinct modes; zero when not tabulated.
    pub fn chi(&self, a: Mode, b: Mode) -> f64 {
        self.couplings
            .iter()
            .find(|c| (c.modes[0] == a && c.modes[1] == b) || (c.modes[0] == b && c.modes[1] == a))
            .map_or(0.0, |c| c.chi_mhz)
    }

    pub fn readout_for(&self, q: Mode) -> Result<&ReadoutParams> {
        self.readout.get(&q).ok_or_else(|| config(format!("readout.{}", q.name()), "missing"))
    }

    pub fn reset_fidelity(&self, q: Mode) -> Result<f64> {
        self.readout_for(q)?
            .reset_fidelity
            .ok_or_else(|| config(format!("readout.{}.reset_fidelity", q.name()), "missing"))
    }

    /// Parity fidelity at mean photon number `nbar`, linearly interpolated in
    /// the table and clamped at its ends.
    pub fn parity_fidelity_for(&self, cav: Mode, nbar: f64) -> Result<f64> {
        let t = self.parity_fidelity.get(&cav).ok_or_else(|| config(format!("parity_fidelity.{}", cav.name()), "missing"))?;
        let x = nbar.clamp(0.0, (t.len() - 1) as f64);
        let k = (x.floor() as usize).min(t.len().saturating_sub(2));
        if t.len() == 1 {
            return Ok(t[0]);
        }
        let w = x - k as f64;
        Ok(t[k] * (1.0 - w) + t[k + 1] * w)
    }

    pub fn phases_for(&self, cav: Mode) -> Result<&MeasurementPhases> {
        self.measurement_phases.get(&cav).ok_or_else(|| config(format!("measurement_phases.{}", cav.name()), "missing"))
    }

    pub fn pass_for(&self, cav: Mode) -> Result<&PassCalibration> {
        self.pass.get(&cav).ok_or_else(|| config(format!("pass.{}", cav.name()), "missing"))
    }

    pub fn aqec_for(&self, cav: Mode) -> Result<&AqecCalibration> {
        self.aqec.get(&cav).ok_or_else(|| config(format!("aqec.{}", cav.name()), "missing"))
    }

    /// Pure dephasing time from `1/T_φ = 1/T₂* − 1/(2T₁)`.
    pub fn tphi(&self, q: Mode) -> Result<f64> {
        let p = self.mode(q)?;
        let t2 = p.t2_star_us.ok_or_else(|| config(format!("modes.{}.t2_star_us", q.name()), "missing"))?;
        let rate = 1.0 / t2 - 0.5 / p.t1_us;
        if rate < 0.0 {
            return Err(config(format!("modes.{}.t2_star_us", q.name()), "T2* exceeds 2 T1"));
        }
        Ok(if rate == 0.0 { f64::INFINITY } else { 1.0 / rate })
    }
}

fn field_of(e: &toml::de::Error) -> String {
    let msg = e.message();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "device".to_string()
}

/// Diagonal dispersive Hamiltonian in rad/µs over `subsystems`, each a
/// `(mode, dimension)` pair, in the rotating frame of every mode:
/// `−Σ χ_cq n_c|e⟩⟨e|_q − Σ (K/2) n(n−1) − Σ χ_qq' |ee⟩⟨ee| − Σ χ_cc' n n'`.
pub fn dispersive_hamiltonian(params: &DeviceParams, subsystems: &[(Mode, usize)]) -> Result<LinearOp> {
    if subsystems.is_empty() {
        return Err(Error::InvalidArgument("no subsystems".into()));
    }
    for w in subsystems.windows(2) {
        if w[0].0 >= w[1].0 {
            return Err(Error::InvalidArgument(format!(
                "subsystems must be distinct and in device order, got {} before {}",
                w[0].0.name(),
                w[1].0.name()
            )));
        }
    }
    for &(m, d) in subsystems {
        if !m.is_cavity() && d != 2 {
            return Err(Error::InvalidDimension(format!("qubit {} must have dimension 2", m.name())));
        }
    }
    let space = SpaceSpec::new(subsystems.iter().map(|s| s.1).collect())?;
    let mut kerr = vec![0.0; subsystems.len()];
    for (k, &(m, _)) in subsystems.iter().enumerate() {
        if m.is_cavity() {
            kerr[k] = mhz_to_rad_per_us(params.self_kerr(m)?);
        }
    }
    let mut pairs = Vec::new();
    for i in 0..subsystems.len() {
        for j in i + 1..subsystems.len() {
            let chi = params.chi(subsystems[i].0, subsystems[j].0);
            if chi != 0.0 {
                pairs.push((i, j, mhz_to_rad_per_us(chi)));
            }
        }
    }
    let n = space.total();
    let diag = CVector::from_fn(n, |idx, _| {
        let d = space.digits(idx);
        let mut e = 0.0;
        for (k, &x) in d.iter().enumerate() {
            let x = x as f64;
            e -= 0.5 * kerr[k] * x * (x - 1.0);
        }
        for &(i, j, chi) in &pairs {
            e -= chi * d[i] as f64 * d[j] as f64;
        }
        C64::new(e, 0.0)
    });
    LinearOp::new(space, CMatrix::from_diagonal(&diag))
}

/// Off-resonant qubit drive used to engineer photon-number-dependent shifts.
///
/// `convention` multiplies `Ω²` in the shift formula; 1 reproduces the
/// textbook expression. The tabulated shifts are better matched by 1/4,
/// i.e. by reading the quoted amplitude as twice the `Ω` of the formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassDrive {
    /// MHz
    pub omega: f64,
    /// detuning from the qubit in units of `chi`
    pub delta_d: f64,
    /// MHz
    pub chi: f64,
    pub convention: f64,
}

impl PassDrive {
    pub fn new(omega: f64, delta_d: f64, chi: f64) -> Self {
        let d = Self { omega, delta_d, chi, convention: 1.0 };
        if !d.is_valid(4) {
            log::warn!("PASS drive omega={omega} MHz is not small against the detuning from Fock levels <= 4");
        }
        d
    }

    /// `Ω ≤ |Δ_d − nχ|/10` for all `n ≤ n_max`.
    pub fn is_valid(&self, n_max: usize) -> bool {
        (0..=n_max).all(|n| 10.0 * self.omega.abs() <= ((self.delta_d - n as f64) * self.chi).abs())
    }
}

/// `δ_n = −cΩ²/(Δ_d − nχ)` in MHz.
pub fn pass_shift(drive: &PassDrive, n: usize) -> Result<f64> {
    let den = (drive.delta_d - n as f64) * drive.chi;
    if den == 0.0 {
        return Err(Error::Singularity(format!("drive is resonant with Fock level {n}")));
    }
    Ok(-drive.convention * drive.omega * drive.omega / den)
}

/// `f_n = −n(n−1)K/2 + δ_n` in MHz.
pub fn fock_frequency(k: f64, drive: &PassDrive, n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok(-0.5 * nf * (nf - 1.0) * k + pass_shift(drive, n)?)
}

/// Drive amplitude Ω (MHz, `convention = 1`) that makes `f₄−f₂ = f₃−f₁`.
///
/// The condition is linear in `Ω²`: `−2K − Ω² S/χ = 0` with
/// `S = 1/(d−4) − 1/(d−2) − 1/(d−3) + 1/(d−1)`.
pub fn solve_error_transparent_amplitude(k: f64, chi: f64, delta_d: f64) -> Result<f64> {
    if k < 0.0 || !(chi > 0.0) {
        return Err(Error::InvalidArgument(format!("need K >= 0 and chi > 0, got K={k}, chi={chi}")));
    }
    if k == 0.0 {
        return Ok(0.0);
    }
    let d = delta_d;
    if [1.0, 2.0, 3.0, 4.0].contains(&d) {
        return Err(Error::Singularity(format!("drive detuning {d} chi is resonant with a Fock level")));
    }
    let s = 1.0 / (d - 4.0) - 1.0 / (d - 2.0) - 1.0 / (d - 3.0) + 1.0 / (d - 1.0);
    let omega_sq = -2.0 * k * chi / s;
    if !(omega_sq > 0.0) || !omega_sq.is_finite() {
        return Err(Error::NoSolution(format!("no positive drive power at detuning {d} chi (S = {s})")));
    }
    Ok(omega_sq.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesCorrected {
    pub probs: [f64; 2],
    pub clipped: bool,
}

/// Invert the confusion matrix `[[F_g, 1−F_e], [1−F_g, F_e]]`.
pub fn bayes_correct(p_measured: [f64; 2], f_g: f64, f_e: f64) -> Result<BayesCorrected> {
    let det = f_g + f_e - 1.0;
    if det.abs() < 1e-12 {
        return Err(Error::InvalidArgument(format!("confusion matrix singular for F_g={f_g}, F_e={f_e}")));
    }
    let [pg, pe] = p_measured;
    let raw = [(f_e * pg - (1.0 - f_e) * pe) / det, (f_g * pe - (1.0 - f_g) * pg) / det];
    let clipped = raw.iter().any(|&v| !(0.0..=1.0).contains(&v));
    if !clipped {
        return Ok(BayesCorrected { probs: raw, clipped });
    }
    let c = [raw[0].clamp(0.0, 1.0), raw[1].clamp(0.0, 1.0)];
    let s = c[0] + c[1];
    Ok(BayesCorrected { probs: [c[0] / s, c[1] / s], clipped })
}

/// `P_measured = C P_true` for the same confusion matrix.
pub fn confuse(p_true: [f64; 2], f_g: f64, f_e: f64) -> [f64; 2] {
    [f_g * p_true[0] + (1.0 - f_e) * p_true[1], (1.0 - f_g) * p_true[0] + f_e * p_true[1]]
}

/// `e^{iφ}` on `|2⟩` and `|4⟩` for the tabulated measurement phases.
pub fn measurement_phase_unitary(params: &DeviceParams, cavity: Mode, qubit_state: QubitState, dim: usize) -> Result<LinearOp> {
    let ph = params.phases_for(cavity)?;
    let [p2, p4] = match qubit_state {
        QubitState::G => ph.g,
        QubitState::E => ph.e,
    };
    phase_unitary(dim, p2, p4)
}

pub(crate) fn phase_unitary(dim: usize, phi2: f64, phi4: f64) -> Result<LinearOp> {
    let diag = CVector::from_fn(dim, |n, _| match n {
        2 => C64::from_polar(1.0, phi2),
        4 => C64::from_polar(1.0, phi4),
        _ => C64::new(1.0, 0.0),
    });
    LinearOp::new(SpaceSpec::single(dim)?, CMatrix::from_diagonal(&diag))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DampedSinusoidFit {
    pub y0: f64,
    pub a: f64,
    /// µs; infinite when no decay is resolved
    pub tau: f64,
    /// rad/µs
    pub omega: f64,
    pub phi0: f64,
    pub residual: f64,
    /// Set when the data carry no resolvable oscillation.
    pub degenerate: bool,
}

fn sinusoid_model(p: &[f64], t: f64) -> f64 {
    p[0] + p[1] * (-p[2] * t).exp() * (p[3] * t + p[4]).cos()
}

/// Least-squares fit of `y₀ + A e^{−t/τ} cos(ωt + φ₀)`.
pub fn fit_damped_sinusoid(t: &[f64], y: &[f64]) -> Result<DampedSinusoidFit> {
    if t.len() != y.len() {
        return Err(Error::InvalidArgument("t and y lengths differ".into()));
    }
    if t.len() < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 samples, got {}", t.len())));
    }
    let m = y.len() as f64;
    let mean = y.iter().sum::<f64>() / m;
    let spread = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt() / m.sqrt();
    if spread <= 1e-12 * mean.abs().max(1.0) {
        return Ok(DampedSinusoidFit { y0: mean, a: 0.0, tau: f64::INFINITY, omega: 0.0, phi0: 0.0, residual: 0.0, degenerate: true });
    }
    let t0 = t[0];
    let span = t[t.len() - 1] - t0;
    let dt_min = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(span > 0.0) || !(dt_min > 0.0) {
        return Err(Error::InvalidArgument("time axis must be strictly increasing".into()));
    }
    // Periodogram over [0.5/span, Nyquist] for the starting frequency.
    let w_lo = PI / span;
    let w_hi = PI / dt_min;
    let n_grid = 4000;
    let mut best = (0.0, w_lo, 0.0, 0.0);
    for k in 0..=n_grid {
        let w = w_lo + (w_hi - w_lo) * k as f64 / n_grid as f64;
        let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let (s, c) = (w * (ti - t0)).sin_cos();
            cc += c * c;
            ss += s * s;
            cs += c * s;
            yc += (yi - mean) * c;
            ys += (yi - mean) * s;
        }
        let det = cc * ss - cs * cs;
        if det.abs() < 1e-12 {
            continue;
        }
        let a = (yc * ss - ys * cs) / det;
        let b = (ys * cc - yc * cs) / det;
        let power = a * yc + b * ys;
        if power > best.0 {
            best = (power, w, a, b);
        }
    }
    let (_, w0, ca, sb) = best;
    // y − mean ≈ ca cos(w(t−t0)) + sb sin(w(t−t0)) = A cos(w(t−t0) + φ)
    let amp = (ca * ca + sb * sb).sqrt();
    let phi = (-sb).atan2(ca);
    let shifted: Vec<f64> = t.iter().map(|v| v - t0).collect();
    let resid = |p: &[f64]| -> Vec<f64> { shifted.iter().zip(y).map(|(&ti, &yi)| sinusoid_model(p, ti) - yi).collect() };
    let mut best_fit = None;
    for rate0 in [0.0, 1.0 / span, 3.0 / span] {
        let res = levenberg_marquardt(resid, &[mean, amp, rate0, w0, phi], LmOptions { max_iter: 2000, ..LmOptions::default() });
        if best_fit.as_ref().is_none_or(|b: &crate::fit::LmResult| res.residual_norm < b.residual_norm) {
            best_fit = Some(res);
        }
    }
    let res = best_fit.expect("at least one start");
    let scale = spread * m.sqrt();
    if !res.converged && res.residual_norm > 1e-3 * scale {
        return Err(Error::Fit { reason: "damped sinusoid did not converge".into(), residual: res.residual_norm });
    }
    let mut p = res.params.clone();
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[4] += PI;
    }
    if p[3] < 0.0 {
        p[3] = -p[3];
        p[4] = -p[4];
    }
    // refer the phase back to t = 0
    let phi0 = (p[4] - p[3] * t0).rem_euclid(2.0 * PI);
    let a = p[1] * (p[2] * t0).exp();
    let tau = if p[2] > 0.0 { 1.0 / p[2] } else { f64::INFINITY };
    let degenerate = p[3] * span < PI;
    Ok(DampedSinusoidFit { y0: p[0], a, tau, omega: p[3], phi0, residual: res.residual_norm, degenerate })
}
