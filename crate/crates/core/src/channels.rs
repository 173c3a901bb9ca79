//! Noise channels and open-system time evolution.
//!
//! Superoperators act on column-stacked density matrices: `vec(ρ)[i + j n] =
//! ρ[i, j]`, so `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, LinearOp, SpaceSpec};
use crate::linalg::{self, c, CMatrix, CVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const COMPLETENESS_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct KrausChannel {
    space: SpaceSpec,
    ops: Vec<CMatrix>,
}

impl KrausChannel {
    /// Operators with all entries below 1e-15 are dropped.
    pub fn new(space: SpaceSpec, ops: Vec<CMatrix>) -> Result<Self> {
        let n = space.total();
        if ops.iter().any(|k| k.nrows() != n || k.ncols() != n) {
            return Err(Error::InvalidDimension(format!("Kraus operators must be {n}x{n}")));
        }
        let ops: Vec<CMatrix> = ops.into_iter().filter(|k| linalg::max_abs(k) > 1e-15).collect();
        if ops.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one nonzero Kraus operator".into()));
        }
        let ch = Self { space, ops };
        let err = ch.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(Error::InvalidArgument(format!("Kraus operators not trace preserving (error {err:e})")));
        }
        Ok(ch)
    }

    pub fn from_ops(ops: Vec<LinearOp>) -> Result<Self> {
        let space = ops
            .first()
            .ok_or_else(|| Error::InvalidArgument("channel needs at least one Kraus operator".into()))?
            .space()
            .clone();
        if ops.iter().any(|k| k.space() != &space) {
            return Err(Error::InvalidDimension("Kraus operators on different spaces".into()));
        }
        Self::new(space, ops.into_iter().map(LinearOp::into_matrix).collect())
    }

    pub fn identity(space: &SpaceSpec) -> Self {
        Self { space: space.clone(), ops: vec![linalg::identity(space.total())] }
    }

    pub fn unitary(u: &LinearOp) -> Result<Self> {
        Self::new(u.space().clone(), vec![u.matrix().clone()])
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    /// `max |Σ K†K − I|`
    pub fn completeness_error(&self) -> f64 {
        let n = self.space.total();
        let mut sum = CMatrix::zeros(n, n);
        for k in &self.ops {
            sum += linalg::matmul(&k.adjoint(), k);
        }
        linalg::max_abs(&(sum - linalg::identity(n)))
    }

    pub fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let n = rho.nrows();
        let mut out = CMatrix::zeros(n, n);
        for k in &self.ops {
            out += linalg::conjugate(k, rho);
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.space() != &self.space {
            return Err(Error::InvalidDimension("channel and state spaces differ".into()));
        }
        Ok(DensityMatrix::from_raw(self.space.clone(), self.apply_matrix(rho.matrix())))
    }

    /// `other ∘ self` (self acts first).
    pub fn then(&self, other: &KrausChannel) -> Result<KrausChannel> {
        if other.space != self.space {
            return Err(Error::InvalidDimension("channel spaces differ".into()));
        }
        let mut ops = Vec::with_capacity(self.ops.len() * other.ops.len());
        for b in &other.ops {
            for a in &self.ops {
                ops.push(linalg::matmul(b, a));
            }
        }
        Self::new(self.space.clone(), ops)
    }

    pub fn superop(&self) -> Superop {
        Superop::from_kraus(&self.ops)
    }
}

/// Linear map on column-stacked operators, possibly between spaces of
/// different dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Superop {
    dim_in: usize,
    dim_out: usize,
    matrix: CMatrix,
}

impl Superop {
    pub fn new(dim_in: usize, dim_out: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != dim_out * dim_out || matrix.ncols() != dim_in * dim_in {
            return Err(Error::InvalidDimension(format!(
                "superoperator {}x{} does not map dim {dim_in} to dim {dim_out}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { dim_in, dim_out, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim_in: dim, dim_out: dim, matrix: linalg::identity(dim * dim) }
    }

    /// `ρ ↦ Σ K ρ K†` for possibly rectangular `K`.
    pub fn from_kraus(ops: &[CMatrix]) -> Self {
        let dim_out = ops[0].nrows();
        let dim_in = ops[0].ncols();
        let mut m = CMatrix::zeros(dim_out * dim_out, dim_in * dim_in);
        for k in ops {
            m += linalg::kron(&k.map(|z| z.conj()), k);
        }
        Self { dim_in, dim_out, matrix: m }
    }

    pub fn unitary(u: &CMatrix) -> Self {
        Self::from_kraus(std::slice::from_ref(u))
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `other ∘ self`
    pub fn then(&self, other: &Superop) -> Superop {
        assert_eq!(self.dim_out, other.dim_in, "superoperator chain dimension mismatch");
        Superop { dim_in: self.dim_in, dim_out: other.dim_out, matrix: linalg::matmul(&other.matrix, &self.matrix) }
    }

    pub fn add(&self, other: &Superop) -> Superop {
        assert_eq!((self.dim_in, self.dim_out), (other.dim_in, other.dim_out));
        Superop { dim_in: self.dim_in, dim_out: self.dim_out, matrix: &self.matrix + &other.matrix }
    }

    pub fn scale(&self, s: f64) -> Superop {
        Superop { dim_in: self.dim_in, dim_out: self.dim_out, matrix: self.matrix.scale(s) }
    }

    pub fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        assert_eq!(rho.nrows(), self.dim_in);
        let v = CVector::from_column_slice(rho.as_slice());
        let out = &self.matrix * v;
        CMatrix::from_column_slice(self.dim_out, self.dim_out, out.as_slice())
    }

    /// Apply to the contiguous block of subsystems `first..first+count` of a
    /// composite operator. Returns the new operator and its dims.
    pub fn apply_local(&self, rho: &CMatrix, dims: &[usize], first: usize, count: usize) -> (CMatrix, Vec<usize>) {
        let p: usize = dims[..first].iter().product();
        let a: usize = dims[first..first + count].iter().product();
        let q: usize = dims[first + count..].iter().product();
        assert_eq!(a, self.dim_in, "local superoperator does not match block dimension");
        assert_eq!(rho.nrows(), p * a * q);
        let b = self.dim_out;
        let pq = p * q;
        let mut x = CMatrix::zeros(a * a, pq * pq);
        for p1 in 0..p {
            for q1 in 0..q {
                for p2 in 0..p {
                    for q2 in 0..q {
                        let col = (p1 * q + q1) * pq + p2 * q + q2;
                        for a2 in 0..a {
                            for a1 in 0..a {
                                x[(a1 + a2 * a, col)] = rho[((p1 * a + a1) * q + q1, (p2 * a + a2) * q + q2)];
                            }
                        }
                    }
                }
            }
        }
        let y = linalg::matmul(&self.matrix, &x);
        let n_out = p * b * q;
        let mut out = CMatrix::zeros(n_out, n_out);
        for p1 in 0..p {
            for q1 in 0..q {
                for p2 in 0..p {
                    for q2 in 0..q {
                        let col = (p1 * q + q1) * pq + p2 * q + q2;
                        for b2 in 0..b {
                            for b1 in 0..b {
                                out[((p1 * b + b1) * q + q1, (p2 * b + b2) * q + q2)] = y[(b1 + b2 * b, col)];
                            }
                        }
                    }
                }
            }
        }
        let mut new_dims = dims[..first].to_vec();
        new_dims.push(b);
        new_dims.extend_from_slice(&dims[first + count..]);
        (out, new_dims)
    }
}

#[derive(Debug, Clone)]
pub struct LindbladSpec {
    hamiltonian: LinearOp,
    collapse: Vec<(LinearOp, f64)>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: LinearOp, collapse: Vec<(LinearOp, f64)>) -> Result<Self> {
        if !hamiltonian.is_hermitian(1e-10) {
            return Err(Error::InvalidArgument("Hamiltonian is not Hermitian".into()));
        }
        for (l, rate) in &collapse {
            if !(*rate >= 0.0 && rate.is_finite()) {
                return Err(Error::InvalidArgument(format!("collapse rate {rate} must be finite and >= 0")));
            }
            if l.space() != hamiltonian.space() {
                return Err(Error::InvalidDimension("collapse operator space differs from Hamiltonian".into()));
            }
        }
        Ok(Self { hamiltonian, collapse })
    }

    pub fn hamiltonian(&self) -> &LinearOp {
        &self.hamiltonian
    }

    pub fn collapse_ops(&self) -> &[(LinearOp, f64)] {
        &self.collapse
    }

    pub fn space(&self) -> &SpaceSpec {
        self.hamiltonian.space()
    }

    /// `dρ/dt`
    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let h = self.hamiltonian.matrix();
        let mut out = (linalg::matmul(h, rho) - linalg::matmul(rho, h)) * c(0.0, -1.0);
        for (l, rate) in &self.collapse {
            if *rate == 0.0 {
                continue;
            }
            let l = l.matrix();
            let ld = l.adjoint();
            let ldl = linalg::matmul(&ld, l);
            let jump = linalg::matmul(&linalg::matmul(l, rho), &ld);
            let anti = linalg::matmul(&ldl, rho) + linalg::matmul(rho, &ldl);
            out += (jump - anti.scale(0.5)).scale(*rate);
        }
        out
    }

    /// Generator acting on column-stacked `ρ`.
    pub fn liouvillian(&self) -> CMatrix {
        let n = self.space().total();
        let id = linalg::identity(n);
        let h = self.hamiltonian.matrix();
        let mut gen = (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)) * c(0.0, -1.0);
        for (l, rate) in &self.collapse {
            if *rate == 0.0 {
                continue;
            }
            let l = l.matrix();
            let ldl = linalg::matmul(&l.adjoint(), l);
            let term = linalg::kron(&l.map(|z| z.conj()), l)
                - linalg::kron(&id, &ldl).scale(0.5)
                - linalg::kron(&ldl.transpose(), &id).scale(0.5);
            gen += term.scale(*rate);
        }
        gen
    }

    pub fn propagator(&self, t: f64) -> Superop {
        let n = self.space().total();
        Superop { dim_in: n, dim_out: n, matrix: linalg::expm(&self.liouvillian().scale(t)) }
    }

    /// Shortest characteristic time of the generator, in µs.
    pub fn fastest_timescale(&self) -> f64 {
        let mut rate = spectral_radius_bound(self.hamiltonian.matrix());
        for (l, r) in &self.collapse {
            let ldl = linalg::matmul(&l.matrix().adjoint(), l.matrix());
            rate += r * spectral_radius_bound(&ldl);
        }
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }
}

fn spectral_radius_bound(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepolarizingModel {
    pub p: f64,
    pub tau: f64,
}

impl DepolarizingModel {
    pub fn new(p: f64, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("depolarizing probability {p} outside [0, 1]")));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("cycle length {tau} must be > 0")));
        }
        Ok(Self { p, tau })
    }

    /// Surviving coherence `(1 − p)^(t/τ)` after time `t`.
    pub fn survival(&self, t: f64) -> f64 {
        (1.0 - self.p).powf(t / self.tau)
    }
}

/// Kraus operators of cavity photon loss with loss probability `gamma`.
pub fn amplitude_damping_kraus(dim: usize, gamma: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("loss probability {gamma} outside [0, 1]")));
    }
    let space = SpaceSpec::single(dim)?;
    let ops = (0..dim)
        .map(|k| {
            let mut e = CMatrix::zeros(dim, dim);
            for n in k..dim {
                let amp = binomial(n, k).sqrt() * ((1.0 - gamma).powi((n - k) as i32) * gamma.powi(k as i32)).sqrt();
                e[(n - k, n)] = c(amp, 0.0);
            }
            e
        })
        .collect();
    KrausChannel::new(space, ops)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Generalized amplitude damping toward excited population `n_th` with
/// relaxation time `t1`, followed by pure dephasing with coherence decay
/// `exp(−t/tphi)`. Basis order `(|g⟩, |e⟩)`.
pub fn qubit_decoherence_channel(t1: f64, tphi: f64, n_th: f64, t: f64) -> Result<KrausChannel> {
    if !(t1 > 0.0) || !(tphi > 0.0) || !(t >= 0.0) || !(0.0..0.5).contains(&n_th) {
        return Err(Error::InvalidArgument(format!(
            "need T1 > 0, Tphi > 0, t >= 0, 0 <= n_th < 0.5; got T1={t1}, Tphi={tphi}, n_th={n_th}, t={t}"
        )));
    }
    let g = 1.0 - (-t / t1).exp();
    let (s0, s1) = ((1.0 - n_th).sqrt(), n_th.sqrt());
    let m = |a: f64, b: f64, cc: f64, d: f64| CMatrix::from_row_slice(2, 2, &[c(a, 0.0), c(b, 0.0), c(cc, 0.0), c(d, 0.0)]);
    let gad = [
        m(s0, 0.0, 0.0, s0 * (1.0 - g).sqrt()),
        m(0.0, s0 * g.sqrt(), 0.0, 0.0),
        m(s1 * (1.0 - g).sqrt(), 0.0, 0.0, s1),
        m(0.0, 0.0, s1 * g.sqrt(), 0.0),
    ];
    let lambda = if tphi.is_infinite() { 1.0 } else { (-t / tphi).exp() };
    let deph = [m(1.0, 0.0, 0.0, 1.0).scale(((1.0 + lambda) / 2.0).sqrt()), m(1.0, 0.0, 0.0, -1.0).scale(((1.0 - lambda) / 2.0).sqrt())];
    let mut ops = Vec::new();
    for d in &deph {
        for k in &gad {
            ops.push(d * k);
        }
    }
    KrausChannel::new(SpaceSpec::qubit(), ops)
}

/// `exp(+i (K/2) n(n−1) t)` on each Fock state, the propagator of
/// `H = −(K/2) a†² a²`. `k` in rad/µs.
pub fn kerr_unitary(dim: usize, k: f64, t: f64) -> Result<LinearOp> {
    let space = SpaceSpec::single(dim)?;
    let diag = CVector::from_fn(dim, |n, _| {
        let nf = n as f64;
        C64::from_polar(1.0, 0.5 * k * nf * (nf - 1.0) * t)
    });
    LinearOp::new(space, CMatrix::from_diagonal(&diag))
}

fn paulis() -> [CMatrix; 4] {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// Pauli matrices `[I, X, Y, Z]`.
pub fn pauli_matrices() -> [CMatrix; 4] {
    paulis()
}

/// Depolarizing channel `(1−p)ρ + p I/2` as Kraus operators.
pub fn depolarizing_channel(p: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("depolarizing probability {p} outside [0, 1]")));
    }
    let [i, x, y, z] = paulis();
    let w0 = (1.0 - 0.75 * p).sqrt();
    let w = (0.25 * p).sqrt();
    KrausChannel::new(SpaceSpec::qubit(), vec![i.scale(w0), x.scale(w), y.scale(w), z.scale(w)])
}

/// `(1−p)ρ + p I/2` on a single logical qubit.
pub fn depolarize(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    if rho.dim() != 2 {
        return Err(Error::InvalidDimension(format!("depolarize expects a qubit, got dim {}", rho.dim())));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("depolarizing probability {p} outside [0, 1]")));
    }
    let mixed = linalg::identity(2).scale(0.5 * linalg::trace(rho.matrix()).re);
    Ok(DensityMatrix::from_raw(rho.space().clone(), rho.matrix().scale(1.0 - p) + mixed.scale(p)))
}

/// Depolarize the qubit subsystem `slot` of a composite state.
pub fn depolarize_subsystem(rho: &DensityMatrix, slot: usize, p: f64) -> Result<DensityMatrix> {
    let dims = rho.space().dims();
    if slot >= dims.len() || dims[slot] != 2 {
        return Err(Error::InvalidArgument(format!("subsystem {slot} is not a qubit")));
    }
    let ch = depolarizing_channel(p)?;
    let (m, _) = ch.superop().apply_local(rho.matrix(), dims, slot, 1);
    Ok(DensityMatrix::from_raw(rho.space().clone(), m))
}

/// Fixed-step RK4 integration of the master equation with
/// `dt = min(dt_max, T_min/100)`.
pub fn lindblad_evolve(spec: &LindbladSpec, rho0: &DensityMatrix, t: f64, dt_max: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) || !(dt_max > 0.0) {
        return Err(Error::InvalidArgument(format!("need t >= 0 and dt_max > 0, got t={t}, dt_max={dt_max}")));
    }
    if rho0.space() != spec.space() {
        return Err(Error::InvalidDimension("state and generator spaces differ".into()));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let dt_target = dt_max.min(spec.fastest_timescale() / 100.0);
    let steps = (t / dt_target).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut rho = rho0.matrix().clone();
    for step in 0..steps {
        let k1 = spec.rhs(&rho);
        let k2 = spec.rhs(&(&rho + k1.scale(dt / 2.0)));
        let k3 = spec.rhs(&(&rho + k2.scale(dt / 2.0)));
        let k4 = spec.rhs(&(&rho + k3.scale(dt)));
        rho += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Integration { t: (step + 1) as f64 * dt, reason: format!("non-finite state with dt={dt:e}") });
        }
    }
    let tr = linalg::trace(&rho).re;
    if (tr - 1.0).abs() > 1e-7 {
        return Err(Error::Integration { t, reason: format!("trace drifted to {tr} with dt={dt:e} over {steps} steps") });
    }
    Ok(DensityMatrix::from_raw(rho0.space().clone(), rho))
}

/// Monte-Carlo wavefunction average over `n_traj` trajectories.
///
/// Trajectory `k` draws from its own ChaCha stream `(seed, k)` and the
/// results are summed in index order, so the output does not depend on
/// thread scheduling.
pub fn trajectory_evolve(spec: &LindbladSpec, rho0: &DensityMatrix, t: f64, n_traj: usize, seed: u64) -> Result<DensityMatrix> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    if rho0.space() != spec.space() {
        return Err(Error::InvalidDimension("state and generator spaces differ".into()));
    }
    let n = rho0.dim();
    let (weights, vecs) = linalg::eigh(rho0.matrix());
    let weights: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let total: f64 = weights.iter().sum();

    let steps = if t == 0.0 { 0 } else { (t / (spec.fastest_timescale() / 200.0)).ceil().max(1.0) as usize };
    let dt = if steps > 0 { t / steps as f64 } else { 0.0 };
    let mut heff = spec.hamiltonian().matrix().clone();
    let jumps: Vec<CMatrix> = spec
        .collapse_ops()
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(l, r)| l.matrix().scale(r.sqrt()))
        .collect();
    for l in &jumps {
        heff -= linalg::matmul(&l.adjoint(), l) * c(0.0, 0.5);
    }
    let step_prop = linalg::expm(&(heff * c(0.0, -dt)));

    let run = |k: usize| -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut pick: f64 = rng.random::<f64>() * total;
        let mut idx = 0;
        while idx + 1 < n && pick >= weights[idx] {
            pick -= weights[idx];
            idx += 1;
        }
        let mut psi: CVector = vecs.column(idx).into_owned();
        let mut threshold: f64 = rng.random();
        for _ in 0..steps {
            psi = &step_prop * &psi;
            if psi.norm_squared() < threshold {
                let rates: Vec<f64> = jumps.iter().map(|l| (l * &psi).norm_squared()).collect();
                let sum: f64 = rates.iter().sum();
                if sum > 0.0 {
                    let mut r = rng.random::<f64>() * sum;
                    let mut j = 0;
                    while j + 1 < rates.len() && r >= rates[j] {
                        r -= rates[j];
                        j += 1;
                    }
                    psi = &jumps[j] * &psi;
                }
                let nrm = psi.norm();
                psi.unscale_mut(nrm);
                threshold = rng.random();
            }
        }
        let nrm = psi.norm();
        psi.unscale_mut(nrm);
        &psi * psi.adjoint()
    };
    let parts: Vec<CMatrix> = (0..n_traj).into_par_iter().map(run).collect();
    let mut acc = CMatrix::zeros(n, n);
    for p in &parts {
        acc += p;
    }
    Ok(DensityMatrix::from_raw(rho0.space().clone(), acc.unscale(n_traj as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{ladder_ops, Ket};

    #[test]
    fn zero_loss_is_identity() {
        let ch = amplitude_damping_kraus(6, 0.0).unwrap();
        assert_eq!(ch.ops().len(), 1);
        assert!(linalg::max_abs(&(&ch.ops()[0] - linalg::identity(6))) < 1e-15);
    }

    #[test]
    fn kerr_phases() {
        let k = 2.0 * std::f64::consts::PI * 0.003;
        let u = kerr_unitary(8, k, 40.0).unwrap();
        assert!((u.matrix()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((u.matrix()[(1, 1)] - c(1.0, 0.0)).norm() < 1e-15);
        let rel = u.matrix()[(4, 4)] / u.matrix()[(2, 2)];
        assert!((rel - C64::from_polar(1.0, 5.0 * k * 40.0)).norm() < 1e-12);
    }

    #[test]
    fn qubit_channel_limits() {
        let rho = Ket::excited().projector();
        let ch = qubit_decoherence_channel(30.0, f64::INFINITY, 0.0, 12.0).unwrap();
        let out = ch.apply(&rho).unwrap();
        assert!((out.matrix()[(1, 1)].re - (-12.0f64 / 30.0).exp()).abs() < 1e-14);
        let id = qubit_decoherence_channel(30.0, 20.0, 0.05, 0.0).unwrap();
        let plus = Ket::normalized(SpaceSpec::qubit(), CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)])).unwrap().projector();
        assert!(linalg::max_abs(&(id.apply(&plus).unwrap().matrix() - plus.matrix())) < 1e-14);
        assert!(qubit_decoherence_channel(-1.0, 1.0, 0.0, 1.0).is_err());
        assert!(qubit_decoherence_channel(1.0, 1.0, 0.6, 1.0).is_err());
    }

    #[test]
    fn rk4_decay_of_single_photon() {
        let (a, ad) = ladder_ops(4).unwrap();
        let kappa = 0.05;
        let spec = LindbladSpec::new(LinearOp::zeros(a.space()), vec![(a.clone(), kappa)]).unwrap();
        let rho = lindblad_evolve(&spec, &Ket::fock(4, 1).unwrap().projector(), 10.0, 0.1).unwrap();
        let n = ad.compose(&a).unwrap();
        assert!((rho.expect(&n).unwrap() - (-kappa * 10.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn propagator_matches_rk4() {
        let (a, ad) = ladder_ops(5).unwrap();
        let h = ad.compose(&a).unwrap().scale(c(0.3, 0.0));
        let spec = LindbladSpec::new(h, vec![(a, 0.2), (ad, 0.01)]).unwrap();
        let plus = Ket::normalized(SpaceSpec::single(5).unwrap(), CVector::from_fn(5, |k, _| c(1.0, k as f64))).unwrap().projector();
        let rk = lindblad_evolve(&spec, &plus, 3.0, 0.01).unwrap();
        let ex = spec.propagator(3.0).apply_matrix(plus.matrix());
        assert!(linalg::max_abs(&(rk.matrix() - ex)) < 1e-9);
    }

    #[test]
    fn local_superop_matches_embedded_kraus() {
        let ch = amplitude_damping_kraus(3, 0.3).unwrap();
        let space = SpaceSpec::new(vec![2, 3, 2]).unwrap();
        let psi = Ket::normalized(space.clone(), CVector::from_fn(12, |k, _| c((k as f64).sin(), (k as f64 * 0.7).cos()))).unwrap();
        let rho = psi.projector();
        let (local, dims) = ch.superop().apply_local(rho.matrix(), space.dims(), 1, 1);
        assert_eq!(dims, vec![2, 3, 2]);
        let embedded: Vec<CMatrix> = ch
            .ops()
            .iter()
            .map(|k| LinearOp::from_matrix(k.clone()).unwrap().embed(&space, 1).unwrap().into_matrix())
            .collect();
        let direct = KrausChannel::new(space, embedded).unwrap().apply(&rho).unwrap();
        assert!(linalg::max_abs(&(local - direct.matrix())) < 1e-14);
    }

    #[test]
    fn trajectories_without_jumps_are_unitary() {
        let (a, ad) = ladder_ops(3).unwrap();
        let h = a.add(&ad).unwrap();
        let spec = LindbladSpec::new(h.clone(), vec![]).unwrap();
        let rho0 = Ket::fock(3, 0).unwrap().projector();
        let traj = trajectory_evolve(&spec, &rho0, 0.7, 1, 3).unwrap();
        let u = linalg::expm(&(h.matrix() * c(0.0, -0.7)));
        let exact = linalg::conjugate(&u, rho0.matrix());
        assert!(linalg::max_abs(&(traj.matrix() - exact)) < 1e-10);
    }
}
