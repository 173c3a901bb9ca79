//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use elq_core::grape::{fidelity_and_gradient, transfer_fidelity, ControlPulse, GrapeProblem};
use elq_core::hilbert::{DensityMatrix, SpaceSpec};
use elq_core::{CMatrix, Complex64 as C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Generalized Laguerre polynomial by its explicit finite sum.
pub fn laguerre(n: usize, alpha: usize, x: f64) -> f64 {
    (0..=n).map(|j| (-1f64).powi(j as i32) * binom(n + alpha, n - j) * x.powi(j as i32) / factorial(j)).sum()
}

/// `⟨n|D(γ)|m⟩` on the infinite oscillator.
pub fn displacement_element(n: usize, m: usize, g: C64) -> C64 {
    let x = g.norm_sqr();
    let env = (-x / 2.0).exp();
    if n >= m {
        let k = n - m;
        c((factorial(m) / factorial(n)).sqrt() * env * laguerre(m, k, x), 0.0) * g.powu(k as u32)
    } else {
        let k = m - n;
        c((factorial(n) / factorial(m)).sqrt() * env * laguerre(n, k, x), 0.0) * (-g.conj()).powu(k as u32)
    }
}

/// `W(β) = (2/π) Σ ρ_mn (−1)^m ⟨n|D(2β)|m⟩`
pub fn wigner_oracle(rho: &CMatrix, beta: C64) -> f64 {
    let d = rho.nrows();
    let mut acc = c(0.0, 0.0);
    for m in 0..d {
        for n in 0..d {
            let s = if m % 2 == 0 { 1.0 } else { -1.0 };
            acc += rho[(m, n)] * displacement_element(n, m, 2.0 * beta) * s;
        }
    }
    2.0 / PI * acc.re
}

pub fn random_density(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, rank, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale(tr)
}

pub fn random_two_qubit(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let rank = rng.random_range(1..=4);
    DensityMatrix::new(SpaceSpec::new(vec![2, 2]).unwrap(), random_density(rng, 4, rank)).unwrap()
}

/// Partial transpose on the first qubit by explicit index swapping.
pub fn partial_transpose_first(m: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            for ap in 0..2 {
                for bp in 0..2 {
                    out[(2 * ap + b, 2 * a + bp)] = m[(2 * a + b, 2 * ap + bp)];
                }
            }
        }
    }
    out
}

pub fn negativity_oracle(m: &CMatrix) -> f64 {
    let pt = partial_transpose_first(m);
    let ev = pt.symmetric_eigenvalues();
    ev.iter().filter(|v| **v < 0.0).map(|v| -v).sum()
}

/// Wootters concurrence from the (non-Hermitian) eigenvalues of `ρ ρ̃`.
pub fn concurrence_oracle(m: &CMatrix) -> f64 {
    let yy = CMatrix::from_fn(4, 4, |i, j| if i + j == 3 { if i == 0 || i == 3 { c(-1.0, 0.0) } else { c(1.0, 0.0) } } else { c(0.0, 0.0) });
    let tilde = &yy * m.conjugate() * &yy;
    let prod = m * tilde;
    let schur = prod.schur();
    let mut lam: Vec<f64> = schur.eigenvalues().expect("complex schur is triangular").iter().map(|z| z.re.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    (lam[0] - lam[1] - lam[2] - lam[3]).max(0.0)
}

/// Largest relative mismatch between the analytic directional derivative
/// and a central difference over `draws` random (pulse, direction) pairs.
pub fn grape_fd_check(problem: &GrapeProblem, n_steps: usize, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nch = problem.controls.len();
    let labels: Vec<String> = (0..nch).map(|k| format!("u{k}")).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let amps: Vec<Vec<f64>> = (0..nch).map(|_| (0..n_steps).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let dir: Vec<Vec<f64>> = (0..nch).map(|_| (0..n_steps).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let pulse = ControlPulse::new(1e-3, labels.clone(), amps.clone()).unwrap();
        let (_, grad) = fidelity_and_gradient(problem, &pulse).unwrap();
        let analytic: f64 = grad.iter().flatten().zip(dir.iter().flatten()).map(|(g, d)| g * d).sum();
        let h = 1e-4;
        let shifted = |s: f64| {
            let a = amps.iter().zip(&dir).map(|(r, d)| r.iter().zip(d).map(|(x, y)| x + s * y).collect()).collect();
            transfer_fidelity(problem, &ControlPulse::new(1e-3, labels.clone(), a).unwrap()).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        worst = worst.max((analytic - fd).abs() / fd.abs().max(1e-3));
    }
    worst
}
