//! State and process characterization: Wigner functions, maximum-likelihood
//! reconstruction, fidelities, decay fits and entanglement measures.

use crate::channels::pauli_matrices;
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::hilbert::{displacement_elements, partial_transpose_matrix, DensityMatrix, Ket, SpaceSpec};
use crate::linalg::{self, c, CMatrix};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

/// Sampled Wigner function. `values[i][j]` is at `re[j] + i·im[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl WignerGrid {
    /// Riemann sum of `W` over the grid (uniform axes assumed).
    pub fn integral(&self) -> f64 {
        let step = |v: &[f64]| if v.len() > 1 { (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64 } else { 1.0 };
        let cell = step(&self.re) * step(&self.im);
        self.values.iter().flatten().sum::<f64>() * cell
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("re_beta,im_beta,w\n");
        for (i, y) in self.im.iter().enumerate() {
            for (j, x) in self.re.iter().enumerate() {
                let _ = writeln!(s, "{x},{y},{:.12e}", self.values[i][j]);
            }
        }
        s
    }
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn displaced_parity_trace(rho: &CMatrix, beta: C64) -> f64 {
    // Tr[ρ D(β) P D(β)†] = Tr[ρ D(2β) P]
    let d = displacement_elements(rho.nrows(), 2.0 * beta);
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..rho.nrows() {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for n in 0..rho.nrows() {
            acc += rho[(m, n)] * d[(n, m)] * sign;
        }
    }
    acc.re
}

fn warn_truncation(dim: usize, beta: C64) {
    if beta.norm_sqr() > dim as f64 {
        log::warn!("|β| = {:.3} is large for a cutoff of {dim}; values are truncation-limited", beta.norm());
    }
}

/// `W(β) = (2/π) Tr[ρ D(β) P D(β)†]` at a single point.
pub fn wigner_point(rho: &DensityMatrix, beta: C64) -> Result<f64> {
    if rho.space().n_subsystems() != 1 {
        return Err(Error::InvalidDimension("Wigner function needs a single-mode state".into()));
    }
    warn_truncation(rho.dim(), beta);
    Ok(2.0 / PI * displaced_parity_trace(rho.matrix(), beta))
}

pub fn wigner(rho: &DensityMatrix, re: &[f64], im: &[f64]) -> Result<WignerGrid> {
    if rho.space().n_subsystems() != 1 {
        return Err(Error::InvalidDimension("Wigner function needs a single-mode state".into()));
    }
    let corner = C64::new(
        re.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        im.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    );
    warn_truncation(rho.dim(), corner);
    let m = rho.matrix();
    let values = im
        .par_iter()
        .map(|&y| re.iter().map(|&x| 2.0 / PI * displaced_parity_trace(m, C64::new(x, y))).collect())
        .collect();
    Ok(WignerGrid { re: re.to_vec(), im: im.to_vec(), values })
}

/// Displaced parity `D(β) P D(β)†` as a Hermitian matrix on `dim` levels.
pub fn displaced_parity(dim: usize, beta: C64) -> CMatrix {
    let mut d = displacement_elements(dim, 2.0 * beta);
    for m in (1..dim).step_by(2) {
        d.column_mut(m).neg_mut();
    }
    linalg::hermitian_part(&d)
}

/// `W_J(β₁, β₂) = (4/π²) Tr[ρ (D₁P₁D₁†) ⊗ (D₂P₂D₂†)]` for a two-mode state.
pub fn joint_wigner(rho: &DensityMatrix, beta1: C64, beta2: C64) -> Result<f64> {
    let dims = rho.space().dims();
    if dims.len() != 2 {
        return Err(Error::InvalidDimension(format!("joint Wigner needs two modes, got {dims:?}")));
    }
    warn_truncation(dims[0], beta1);
    warn_truncation(dims[1], beta2);
    let op = linalg::kron(&displaced_parity(dims[0], beta1), &displaced_parity(dims[1], beta2));
    Ok(4.0 / (PI * PI) * crate::hilbert::trace_product(rho.matrix(), &op).re)
}

/// Planar cuts through the four-dimensional joint Wigner function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointCut {
    /// `(x, y) → β₁ = x, β₂ = y`
    RealReal,
    /// `(x, y) → β₁ = x + iy, β₂ = −(x + iy)`
    AntiDiagonal,
}

pub fn joint_wigner_cut(rho: &DensityMatrix, cut: JointCut, xs: &[f64], ys: &[f64]) -> Result<WignerGrid> {
    let dims = rho.space().dims();
    if dims.len() != 2 {
        return Err(Error::InvalidDimension(format!("joint Wigner needs two modes, got {dims:?}")));
    }
    let values = ys
        .par_iter()
        .map(|&y| {
            xs.iter()
                .map(|&x| {
                    let (b1, b2) = match cut {
                        JointCut::RealReal => (C64::new(x, 0.0), C64::new(y, 0.0)),
                        JointCut::AntiDiagonal => (C64::new(x, y), C64::new(-x, -y)),
                    };
                    joint_wigner(rho, b1, b2)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WignerGrid { re: xs.to_vec(), im: ys.to_vec(), values })
}

/// Two-outcome measurement of a Hermitian observable with spectrum in
/// `[−1, 1]`: the observed mean and the number of shots behind it.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub operator: CMatrix,
    pub expectation: f64,
    pub shots: f64,
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MleMethod {
    /// diluted fixed-point `RρR` iteration with an adaptive dilution; slow
    /// to converge on nearly pure states
    DilutedRrr,
    /// accelerated projected gradient with restarts, projecting onto the
    /// unit-trace PSD cone through the eigenvalue simplex
    ProjectedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub method: MleMethod,
    /// stop once the log-likelihood changes by less than this
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { method: MleMethod::ProjectedGradient, tolerance: 1e-10, max_iter: 5000 }
    }
}

fn log_likelihood(rho: &CMatrix, data: &[Measurement]) -> f64 {
    data.iter()
        .map(|m| {
            let e = crate::hilbert::trace_product(rho, &m.operator).re.clamp(-1.0, 1.0);
            let (fp, fm) = ((1.0 + m.expectation) / 2.0, (1.0 - m.expectation) / 2.0);
            let (pp, pm) = (((1.0 + e) / 2.0).max(1e-15), ((1.0 - e) / 2.0).max(1e-15));
            m.shots * (fp * pp.ln() + fm * pm.ln())
        })
        .sum()
}

/// `(a, b) = (f₊/p₊, f₋/p₋)` per measurement at `rho`.
fn ratios(rho: &CMatrix, data: &[Measurement]) -> Vec<(f64, f64)> {
    data.iter()
        .map(|m| {
            let e = crate::hilbert::trace_product(rho, &m.operator).re.clamp(-1.0, 1.0);
            let (fp, fm) = ((1.0 + m.expectation) / 2.0, (1.0 - m.expectation) / 2.0);
            let (pp, pm) = (((1.0 + e) / 2.0).max(1e-15), ((1.0 - e) / 2.0).max(1e-15));
            (fp / pp, fm / pm)
        })
        .collect()
}

/// Maximum-likelihood state from two-outcome measurements with the default
/// options (projected gradient).
pub fn mle_reconstruct(data: &[Measurement], space: &SpaceSpec) -> Result<MleResult> {
    mle_reconstruct_with(data, space, &MleOptions::default())
}

pub fn mle_reconstruct_with(data: &[Measurement], space: &SpaceSpec, options: &MleOptions) -> Result<MleResult> {
    let d = space.total();
    if data.is_empty() {
        return Err(Error::InvalidArgument("no measurements".into()));
    }
    if let Some(m) = data.iter().find(|m| m.operator.nrows() != d || m.operator.ncols() != d) {
        return Err(Error::InvalidDimension(format!("operator is {}x{}, space has dimension {d}", m.operator.nrows(), m.operator.ncols())));
    }
    if let Some(m) = data.iter().find(|m| !(m.shots > 0.0) || !(m.expectation.abs() <= 1.0)) {
        return Err(Error::InvalidArgument(format!("measurement with {} shots and mean {} is invalid", m.shots, m.expectation)));
    }
    check_completeness(data, d);
    let (rho, ll, it, converged) = match options.method {
        MleMethod::DilutedRrr => diluted_rrr(data, d, options),
        MleMethod::ProjectedGradient => projected_gradient(data, d, options),
    };
    if !ll.is_finite() {
        return Err(Error::Fit { reason: "log-likelihood is not finite".into(), residual: f64::NAN });
    }
    if !converged {
        log::warn!("MLE stopped at {} iterations", options.max_iter);
    }
    finish(rho, space, ll, it, converged)
}

fn diluted_rrr(data: &[Measurement], d: usize, options: &MleOptions) -> (CMatrix, f64, usize, bool) {
    let total: f64 = data.iter().map(|m| m.shots).sum();
    let id = linalg::identity(d);
    let mut rho = id.unscale(d as f64);
    let mut ll = log_likelihood(&rho, data);
    let mut eps = 10.0;
    for it in 1..=options.max_iter {
        let mut r = CMatrix::zeros(d, d);
        for (m, (a, b)) in data.iter().zip(ratios(&rho, data)) {
            // f₊/p₊ E₊ + f₋/p₋ E₋ with E± = (I ± O)/2
            r += (&id * c(0.5 * (a + b), 0.0) + &m.operator * c(0.5 * (a - b), 0.0)) * c(m.shots / total, 0.0);
        }
        loop {
            let step = (&id + r.scale(eps)).unscale(1.0 + eps);
            let mut next = linalg::conjugate(&step, &rho);
            next = linalg::hermitian_part(&next);
            let tr = linalg::trace(&next).re;
            next.unscale_mut(tr);
            let ll_next = log_likelihood(&next, data);
            if ll_next >= ll - 1e-12 || eps < 1e-6 {
                let delta = ll_next - ll;
                rho = next;
                ll = ll_next;
                if delta.abs() < options.tolerance {
                    return (rho, ll, it, true);
                }
                eps = (eps * 1.5).min(1e3);
                break;
            }
            eps *= 0.5;
        }
    }
    (rho, ll, options.max_iter, false)
}

/// Euclidean projection of a Hermitian matrix onto density matrices.
fn project_density(m: &CMatrix) -> CMatrix {
    let (w, v) = linalg::eigh(&linalg::hermitian_part(m));
    // simplex projection of the spectrum
    let mut sorted = w.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            shift = t;
        }
    }
    let p: Vec<f64> = w.iter().map(|x| (x - shift).max(0.0)).collect();
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for (k, pk) in p.iter().enumerate() {
        if *pk > 0.0 {
            let col = v.column(k);
            out += col * col.adjoint() * c(*pk, 0.0);
        }
    }
    out
}

fn projected_gradient(data: &[Measurement], d: usize, options: &MleOptions) -> (CMatrix, f64, usize, bool) {
    let total: f64 = data.iter().map(|m| m.shots).sum();
    // minimize f = −LL / total
    let cost = |r: &CMatrix| -log_likelihood(r, data) / total;
    let grad = |r: &CMatrix| {
        let mut g = CMatrix::zeros(d, d);
        for (m, (a, b)) in data.iter().zip(ratios(r, data)) {
            g -= &m.operator * c(0.5 * (a - b) * m.shots / total, 0.0);
        }
        g
    };
    let mut x = linalg::identity(d).unscale(d as f64);
    let mut fx = cost(&x);
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut step = 1.0;
    for it in 1..=options.max_iter {
        let fy = cost(&y);
        let g = grad(&y);
        let (next, fnext) = loop {
            let cand = project_density(&(&y - g.scale(step)));
            let diff = &cand - &y;
            let fc = cost(&cand);
            let model = fy + crate::hilbert::trace_product(&g, &diff).re + diff.norm_squared() / (2.0 * step);
            if fc <= model + 1e-15 || step < 1e-12 {
                break (cand, fc);
            }
            step *= 0.5;
        };
        if fnext > fx {
            // momentum overshoot: restart from x
            y = x.clone();
            theta = 1.0;
            continue;
        }
        let delta = (fx - fnext) * total;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        y = &next + (&next - &x).scale((theta - 1.0) / theta_next);
        theta = theta_next;
        x = next;
        fx = fnext;
        step *= 1.2;
        if delta < options.tolerance {
            return (x, -fx * total, it, true);
        }
    }
    (x, -fx * total, options.max_iter, false)
}

fn finish(rho: CMatrix, space: &SpaceSpec, ll: f64, iterations: usize, converged: bool) -> Result<MleResult> {
    Ok(MleResult { rho: DensityMatrix::normalize(space.clone(), project_psd(&rho))?, log_likelihood: ll, iterations, converged })
}

fn check_completeness(data: &[Measurement], d: usize) {
    let mut cols: Vec<_> = data.iter().map(|m| nalgebra::DVector::from_column_slice(m.operator.as_slice())).collect();
    cols.push(nalgebra::DVector::from_column_slice(linalg::identity(d).as_slice()));
    let a = CMatrix::from_columns(&cols);
    let sv = a.singular_values();
    let smax = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    let rank = sv.iter().filter(|v| **v > 1e-9 * smax).count();
    if rank < d * d {
        log::warn!("measurement set spans {rank} of {} operator dimensions; reconstruction is not unique", d * d);
    }
}

fn project_psd(m: &CMatrix) -> CMatrix {
    linalg::hermitian_fn(&linalg::hermitian_part(m), |x| x.max(0.0))
}

/// Uhlmann fidelity `(Tr√(√ρ σ √ρ))²`.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.space() != sigma.space() {
        return Err(Error::InvalidDimension("fidelity between states on different spaces".into()));
    }
    Ok(matrix_fidelity(rho.matrix(), sigma.matrix()))
}

fn matrix_fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let s = linalg::sqrtm_psd(rho);
    let inner = linalg::conjugate(&s, sigma);
    let f: f64 = linalg::eigvalsh(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    (f * f).clamp(0.0, 1.0)
}

/// Single-qubit process matrix in the Pauli basis `{I, X, Y, Z}`:
/// `E(ρ) = Σ χ_mn P_m ρ P_n`.
#[derive(Debug, Clone)]
pub struct ProcessMatrix {
    pub chi: CMatrix,
    /// the linear inversion was not positive and was projected
    pub projected: bool,
}

impl ProcessMatrix {
    pub fn from_choi(j: &CMatrix) -> Self {
        let paulis = pauli_matrices();
        let vecs: Vec<CMatrix> = paulis.iter().map(pauli_vec).collect();
        let chi = CMatrix::from_fn(4, 4, |m, n| (vecs[m].adjoint() * j * &vecs[n])[(0, 0)] / 4.0);
        Self { chi, projected: false }
    }

    /// From a single-qubit superoperator (column-stacked convention).
    pub fn from_superop(s: &crate::channels::Superop) -> Result<Self> {
        if s.dim_in() != 2 || s.dim_out() != 2 {
            return Err(Error::InvalidDimension("process matrix needs a qubit-to-qubit map".into()));
        }
        let outs: Vec<CMatrix> = (0..4).map(|k| {
            let mut e = CMatrix::zeros(2, 2);
            e[(k % 2, k / 2)] = c(1.0, 0.0);
            s.apply_matrix(&e)
        }).collect();
        Ok(Self::from_choi(&choi_from_units(&outs)))
    }

    /// `Tr[χ_target χ]`
    pub fn fidelity_to(&self, target: &ProcessMatrix) -> f64 {
        crate::hilbert::trace_product(&target.chi, &self.chi).re
    }

    /// `χ_II`, the process fidelity to the identity.
    pub fn identity_fidelity(&self) -> f64 {
        self.chi[(0, 0)].re
    }

    pub fn identity() -> Self {
        let mut chi = CMatrix::zeros(4, 4);
        chi[(0, 0)] = c(1.0, 0.0);
        Self { chi, projected: false }
    }

    /// `J = Σ χ_mn vec(P_m) vec(P_n)†` with `J[(a,i),(b,j)] = E(|i⟩⟨j|)_ab`.
    pub fn choi(&self) -> CMatrix {
        let vecs: Vec<CMatrix> = pauli_matrices().iter().map(pauli_vec).collect();
        let mut j = CMatrix::zeros(4, 4);
        for m in 0..4 {
            for n in 0..4 {
                j += &vecs[m] * vecs[n].adjoint() * self.chi[(m, n)];
            }
        }
        j
    }
}

// index (a, i) → 2a + i
fn pauli_vec(p: &CMatrix) -> CMatrix {
    CMatrix::from_fn(4, 1, |k, _| p[(k / 2, k % 2)])
}

fn choi_from_units(outs: &[CMatrix]) -> CMatrix {
    // outs[k] = E(|i⟩⟨j|) with k = i + 2j
    let mut j = CMatrix::zeros(4, 4);
    for (k, o) in outs.iter().enumerate() {
        let (i, jj) = (k % 2, k / 2);
        for a in 0..2 {
            for b in 0..2 {
                j[(2 * a + i, 2 * b + jj)] = o[(a, b)];
            }
        }
    }
    j
}

/// The six cardinal states `|0⟩, |1⟩, |+⟩, |−⟩, |+i⟩, |−i⟩`.
pub fn cardinal_states() -> [DensityMatrix; 6] {
    let s = FRAC_1_SQRT_2;
    let k = |a: C64, b: C64| Ket::new(SpaceSpec::qubit(), crate::linalg::CVector::from_vec(vec![a, b])).expect("normalized").projector();
    [
        k(c(1.0, 0.0), c(0.0, 0.0)),
        k(c(0.0, 0.0), c(1.0, 0.0)),
        k(c(s, 0.0), c(s, 0.0)),
        k(c(s, 0.0), c(-s, 0.0)),
        k(c(s, 0.0), c(0.0, s)),
        k(c(s, 0.0), c(0.0, -s)),
    ]
}

/// Linear-inversion process tomography of a black-box qubit channel from the
/// six cardinal inputs; a non-positive estimate is projected and flagged.
pub fn process_tomography(channel: impl Fn(&DensityMatrix) -> Result<DensityMatrix>) -> Result<ProcessMatrix> {
    let ins = cardinal_states();
    let outs: Vec<CMatrix> = ins.iter().map(|r| channel(r).map(|o| o.into_matrix())).collect::<Result<_>>()?;
    if outs.iter().any(|o| o.nrows() != 2) {
        return Err(Error::InvalidDimension("channel output is not a qubit".into()));
    }
    let (r0, r1, rp, rpi) = (&outs[0], &outs[1], &outs[2], &outs[4]);
    let i = c(0.0, 1.0);
    let half = c(0.5, 0.0);
    // E(|0⟩⟨1|) = E(+) + i E(+i) − (1+i)/2 (E(0) + E(1))
    let e01 = rp + rpi * i - (r0 + r1) * (c(1.0, 0.0) + i) * half;
    let e10 = rp - rpi * i - (r0 + r1) * (c(1.0, 0.0) - i) * half;
    let mut pm = ProcessMatrix::from_choi(&choi_from_units(&[r0.clone(), e10, e01, r1.clone()]));
    let ev = linalg::eigvalsh(&linalg::hermitian_part(&pm.chi));
    if ev[0] < -1e-9 {
        let p = project_psd(&pm.chi);
        let tr = linalg::trace(&p).re;
        pm.chi = p.unscale(tr);
        pm.projected = true;
    }
    Ok(pm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpFit {
    pub a: f64,
    pub t: f64,
    pub a_err: f64,
    pub t_err: f64,
    pub floor: f64,
    /// the data show no decay; `t` is infinite
    pub unbounded: bool,
    pub residual: f64,
}

/// Least-squares fit of `F(t) = floor + A e^{−t/T}`.
pub fn fit_exponential_fidelity(t: &[f64], f: &[f64], floor: f64) -> Result<ExpFit> {
    if t.len() != f.len() {
        return Err(Error::InvalidArgument("time and value series differ in length".into()));
    }
    if t.len() < 4 {
        return Err(Error::Fit { reason: format!("{} points, need at least 4", t.len()), residual: f64::NAN });
    }
    let spread = f.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - f.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let a0 = f[0] - floor;
    if spread <= 1e-12 * a0.abs().max(1e-300) {
        return Ok(ExpFit { a: a0, t: f64::INFINITY, a_err: 0.0, t_err: f64::INFINITY, floor, unbounded: true, residual: 0.0 });
    }
    // log-linear start on points above the floor
    let pts: Vec<(f64, f64)> = t.iter().zip(f).filter(|(_, v)| **v - floor > 1e-12).map(|(x, v)| (*x, (v - floor).ln())).collect();
    let t0 = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 * p.0, b + p.0 * p.1));
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        if slope < 0.0 { -1.0 / slope } else { t[t.len() - 1] - t[0] }
    } else {
        (t[t.len() - 1] - t[0]).max(1.0)
    };
    // fit the rate so that growth and the no-decay limit stay reachable
    let resid = |p: &[f64]| -> Vec<f64> { t.iter().zip(f).map(|(x, v)| floor + p[0] * (-x * p[1]).exp() - v).collect() };
    let res = levenberg_marquardt(resid, &[a0, 1.0 / t0], LmOptions::default());
    if !res.params.iter().all(|v| v.is_finite()) {
        return Err(Error::Fit { reason: "exponential fit diverged".into(), residual: res.residual_norm });
    }
    let (a, rate) = (res.params[0], res.params[1]);
    let rate_err = res.stderr(1);
    let unbounded = rate <= 0.0;
    Ok(ExpFit {
        a,
        t: if unbounded { f64::INFINITY } else { 1.0 / rate },
        a_err: res.stderr(0),
        t_err: if unbounded { f64::INFINITY } else { rate_err / (rate * rate) },
        floor,
        unbounded,
        residual: res.residual_norm,
    })
}

fn check_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.space().dims() != [2, 2] {
        return Err(Error::InvalidDimension(format!("expected a two-qubit state, got {:?}", rho.space().dims())));
    }
    Ok(())
}

/// Wootters concurrence.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubit(rho)?;
    let y = &pauli_matrices()[2];
    let yy = linalg::kron(y, y);
    let tilde = linalg::conjugate(&yy, &rho.matrix().conjugate());
    let s = linalg::sqrtm_psd(rho.matrix());
    let mut lam: Vec<f64> = linalg::eigvalsh(&linalg::conjugate(&s, &tilde)).iter().map(|v| v.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

/// `(‖ρ^{T_A}‖₁ − 1)/2` with the transpose on `subsystem`.
pub fn negativity(rho: &DensityMatrix, subsystem: usize) -> Result<f64> {
    if rho.space().n_subsystems() < 2 {
        return Err(Error::InvalidDimension("negativity needs a bipartite state".into()));
    }
    let pt = partial_transpose_matrix(rho.matrix(), rho.space(), subsystem)?;
    Ok(linalg::eigvalsh(&pt).iter().filter(|v| **v < 0.0).map(|v| -v).sum())
}

/// `(|01⟩ + |10⟩)/√2`
pub fn bell_psi_plus() -> DensityMatrix {
    let s = FRAC_1_SQRT_2;
    let v = crate::linalg::CVector::from_vec(vec![c(0.0, 0.0), c(s, 0.0), c(s, 0.0), c(0.0, 0.0)]);
    Ket::new(SpaceSpec::new(vec![2, 2]).expect("dims"), v).expect("normalized").projector()
}

/// Bell operator `QS + RS + RT − QT` with `Q = −Y, R = X` on side 1 after
/// the phase rotation `diag(1, e^{iθ})`, and `S = (Y−X)/√2, T = (−Y−X)/√2`
/// on side 2.
pub fn chsh_bell(rho: &DensityMatrix, theta: f64) -> Result<f64> {
    check_two_qubit(rho)?;
    let [id, x, y, _] = pauli_matrices();
    let rot = CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![c(1.0, 0.0), C64::from_polar(1.0, theta)]));
    let r1 = linalg::kron(&rot, &id);
    let rho = linalg::conjugate(&r1, rho.matrix());
    let q = -&y;
    let r = x.clone();
    let s = (&y - &x).unscale(std::f64::consts::SQRT_2);
    let t = (-&y - &x).unscale(std::f64::consts::SQRT_2);
    let b = linalg::kron(&q, &s) + linalg::kron(&r, &s) + linalg::kron(&r, &t) - linalg::kron(&q, &t);
    Ok(crate::hilbert::trace_product(&rho, &b).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::depolarize;

    #[test]
    fn wigner_of_fock_at_origin() {
        let vac = Ket::fock(8, 0).unwrap().projector();
        assert!((wigner_point(&vac, c(0.0, 0.0)).unwrap() - 2.0 / PI).abs() < 1e-14);
        let one = Ket::fock(8, 1).unwrap().projector();
        assert!((wigner_point(&one, c(0.0, 0.0)).unwrap() + 2.0 / PI).abs() < 1e-14);
        // coherent-state-free check: vacuum is Gaussian, W = (2/π) e^{−2|β|²}
        let w = wigner_point(&vac, c(0.3, -0.4)).unwrap();
        assert!((w - 2.0 / PI * (-2.0 * 0.25f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn process_of_identity_and_depolarizer() {
        let id = process_tomography(|r| Ok(r.clone())).unwrap();
        assert!((id.identity_fidelity() - 1.0).abs() < 1e-14);
        assert!(linalg::max_abs(&(id.chi.clone() - ProcessMatrix::identity().chi)) < 1e-14);
        let p = 0.3;
        let dep = process_tomography(|r| depolarize(r, p)).unwrap();
        assert!((dep.identity_fidelity() - (1.0 - 0.75 * p)).abs() < 1e-14);
        assert!(!dep.projected);
    }

    #[test]
    fn exponential_fit_roundtrip() {
        let t: Vec<f64> = (0..10).map(|k| 50.0 * k as f64).collect();
        let f: Vec<f64> = t.iter().map(|x| 0.25 + 0.7 * (-x / 280.0).exp()).collect();
        let fit = fit_exponential_fidelity(&t, &f, 0.25).unwrap();
        assert!((fit.t - 280.0).abs() < 1e-6 && (fit.a - 0.7).abs() < 1e-8);
        let flat = fit_exponential_fidelity(&t, &[0.8; 10], 0.25).unwrap();
        assert!(flat.unbounded);
    }

    #[test]
    fn bell_metrics() {
        let b = bell_psi_plus();
        assert!((concurrence(&b).unwrap() - 1.0).abs() < 1e-7);
        assert!((negativity(&b, 0).unwrap() - 0.5).abs() < 1e-12);
        assert!((chsh_bell(&b, PI).unwrap() - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(b.space());
        assert!(chsh_bell(&mixed, 0.7).unwrap().abs() < 1e-14);
    }
}
