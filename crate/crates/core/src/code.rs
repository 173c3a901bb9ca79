//! The lowest-order binomial code `|0_L⟩ = (|0⟩+|4⟩)/√2`, `|1_L⟩ = |2⟩`,
//! with error words `|0_E⟩ = |3⟩`, `|1_E⟩ = |1⟩` reached by one photon loss.

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::hilbert::{tensor, Ket, LinearOp, SpaceSpec};
use crate::linalg::{self, c, CMatrix, CVector};
use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_1_SQRT_2;

/// Logical coefficient rows `(α, β)`, unnormalized, used to pin down the
/// AQEC unitary including relative phases.
pub const AQEC_COEFFICIENTS: [(C64, C64); 6] = [
    (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
    (C64::new(1.0, 0.0), C64::new(1.0, 0.0)),
    (C64::new(1.0, 0.0), C64::new(-1.0, 0.0)),
    (C64::new(1.0, 0.0), C64::new(0.0, -1.0)),
    (C64::new(1.0, 0.0), C64::new(0.0, 1.0)),
    (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
];

#[derive(Debug, Clone, PartialEq)]
pub struct BinomialCode {
    cutoff: usize,
    space: SpaceSpec,
    pub logical0: Ket,
    pub logical1: Ket,
    pub error0: Ket,
    pub error1: Ket,
}

impl BinomialCode {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 5 {
            return Err(Error::InvalidDimension(format!("binomial code needs cutoff >= 5, got {cutoff}")));
        }
        let space = SpaceSpec::single(cutoff)?;
        let mut l0 = CVector::zeros(cutoff);
        l0[0] = c(FRAC_1_SQRT_2, 0.0);
        l0[4] = c(FRAC_1_SQRT_2, 0.0);
        Ok(Self {
            cutoff,
            logical0: Ket::new(space.clone(), l0)?,
            logical1: Ket::basis(&space, 2)?,
            error0: Ket::basis(&space, 3)?,
            error1: Ket::basis(&space, 1)?,
            space,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    /// Isometry with columns `|0_L⟩, |1_L⟩`.
    pub fn logical_basis(&self) -> CMatrix {
        CMatrix::from_columns(&[self.logical0.amplitudes().clone(), self.logical1.amplitudes().clone()])
    }

    /// Isometry with columns `|0_E⟩, |1_E⟩`.
    pub fn error_basis(&self) -> CMatrix {
        CMatrix::from_columns(&[self.error0.amplitudes().clone(), self.error1.amplitudes().clone()])
    }

    pub fn code_projector(&self) -> LinearOp {
        let b = self.logical_basis();
        LinearOp::new(self.space.clone(), &b * b.adjoint()).expect("projector dims")
    }

    pub fn error_projector(&self) -> LinearOp {
        let b = self.error_basis();
        LinearOp::new(self.space.clone(), &b * b.adjoint()).expect("projector dims")
    }
}

fn check_norm(alpha: C64, beta: C64) -> Result<()> {
    let n = alpha.norm_sqr() + beta.norm_sqr();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("|alpha|^2 + |beta|^2 = {n}, expected 1")));
    }
    Ok(())
}

/// `α|0_L⟩ + β|1_L⟩`
pub fn logical_state(code: &BinomialCode, alpha: C64, beta: C64) -> Result<Ket> {
    check_norm(alpha, beta)?;
    let v = code.logical0.amplitudes() * alpha + code.logical1.amplitudes() * beta;
    Ket::normalized(code.space.clone(), v)
}

/// `α|3⟩ + β|1⟩`
pub fn error_state(code: &BinomialCode, alpha: C64, beta: C64) -> Result<Ket> {
    check_norm(alpha, beta)?;
    let v = code.error0.amplitudes() * alpha + code.error1.amplitudes() * beta;
    Ket::normalized(code.space.clone(), v)
}

/// Ideal recovery: error words go back to the code words, everything else
/// (code space, Fock states 0 and ≥ 5) is left alone.
pub fn ideal_recovery(code: &BinomialCode) -> KrausChannel {
    let n = code.cutoff;
    let keep = linalg::identity(n) - code.error_projector().into_matrix();
    let restore = code.logical0.amplitudes() * code.error0.amplitudes().adjoint()
        + code.logical1.amplitudes() * code.error1.amplitudes().adjoint();
    KrausChannel::new(code.space.clone(), vec![keep, restore]).expect("recovery is trace preserving")
}

/// One AQEC condition: `input ↦ target` on cavity ⊗ ancilla.
#[derive(Debug, Clone)]
pub struct TransferPair {
    pub input: Ket,
    pub target: Ket,
}

/// Phases `(φ₂, φ₄)` written onto the `|2⟩` and `|4⟩` components of a target.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TargetPhases {
    pub phi2: f64,
    pub phi4: f64,
}

/// `(|0⟩ + e^{−2κt}|4⟩)/√(1+e^{−4κt})`, the no-jump image of `|0_L⟩`.
pub fn no_jump_zero(code: &BinomialCode, kappa: f64, t: f64) -> Ket {
    let r = (-2.0 * kappa * t).exp();
    let mut v = CVector::zeros(code.cutoff);
    v[0] = c(1.0, 0.0);
    v[4] = c(r, 0.0);
    Ket::normalized(code.space.clone(), v).expect("nonzero")
}

fn phased_codeword(code: &BinomialCode, alpha: C64, beta: C64, ph: TargetPhases) -> CVector {
    let mut v = CVector::zeros(code.cutoff);
    v[0] = alpha * FRAC_1_SQRT_2;
    v[4] = alpha * C64::from_polar(FRAC_1_SQRT_2, ph.phi4);
    v[2] = beta * C64::from_polar(1.0, ph.phi2);
    v
}

/// The two families of AQEC conditions over the six coefficient rows.
///
/// Error family: `(α|3⟩+β|1⟩)|g⟩ → (α(|0⟩+e^{iφ₄}|4⟩)/√2 + βe^{iφ₂}|2⟩)|e⟩`.
/// No-jump family: `(α·no_jump_zero + β|2⟩)|g⟩ → (same code word)|g⟩`.
/// Error pairs come first.
pub fn no_jump_corrected_targets(code: &BinomialCode, kappa: f64, t: f64, phi2: f64, phi4: f64) -> Vec<TransferPair> {
    let ph = TargetPhases { phi2, phi4 };
    no_jump_corrected_targets_split(code, kappa, t, ph, ph)
}

/// As [`no_jump_corrected_targets`] with separate phases for targets that
/// leave the ancilla in `|g⟩` and in `|e⟩`.
pub fn no_jump_corrected_targets_split(
    code: &BinomialCode,
    kappa: f64,
    t: f64,
    phases_g: TargetPhases,
    phases_e: TargetPhases,
) -> Vec<TransferPair> {
    let space = code.space.concat(&SpaceSpec::qubit());
    let g = Ket::ground();
    let e = Ket::excited();
    let nj0 = no_jump_zero(code, kappa, t);
    let mut pairs = Vec::with_capacity(12);
    let rows: Vec<(C64, C64)> = AQEC_COEFFICIENTS
        .iter()
        .map(|&(a, b)| {
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            (a / n, b / n)
        })
        .collect();
    let make = |cav: CVector, anc: &Ket| -> Ket {
        let k = Ket::normalized(code.space.clone(), cav).expect("nonzero");
        let out = tensor(&[k, anc.clone()]).expect("nonempty");
        debug_assert_eq!(out.space(), &space);
        out
    };
    for &(a, b) in &rows {
        let input = code.error0.amplitudes() * a + code.error1.amplitudes() * b;
        pairs.push(TransferPair { input: make(input, &g), target: make(phased_codeword(code, a, b, phases_e), &e) });
    }
    for &(a, b) in &rows {
        let input = nj0.amplitudes() * a + code.logical1.amplitudes() * b;
        pairs.push(TransferPair { input: make(input, &g), target: make(phased_codeword(code, a, b, phases_g), &g) });
    }
    pairs
}
