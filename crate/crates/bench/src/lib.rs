//! Benchmark fixtures shared by the criterion targets.

use elq_core::code::{logical_state, BinomialCode};
use elq_core::grape::ControlPulse;
use elq_core::hilbert::DensityMatrix;
use elq_core::scenario::Scenario;
use elq_core::tomo::{displaced_parity, linspace, Measurement};
use elq_core::{linalg, Complex64};

pub fn bell_scenario(n_cycles: usize) -> Scenario {
    Scenario::from_toml_str(&format!(
        r#"
name = "bench"
target = {{ kind = "bell" }}
tau_us = 50.0
n_cycles = {n_cycles}
curves = [{{ label = "corrected", mode = "corrected" }}]
"#
    ))
    .expect("valid scenario")
}

pub fn logical_plus(cutoff: usize) -> DensityMatrix {
    let code = BinomialCode::new(cutoff).expect("cutoff fits the code");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    logical_state(&code, Complex64::new(h, 0.0), Complex64::new(h, 0.0)).expect("normalized").projector()
}

/// Exact displaced-parity data on an `n × n` grid over `[-2, 2]²`.
pub fn parity_data(rho: &DensityMatrix, n: usize) -> Vec<Measurement> {
    let xs = linspace(-2.0, 2.0, n);
    let dim = rho.space().total();
    xs.iter()
        .flat_map(|&x| xs.iter().map(move |&y| Complex64::new(x, y)))
        .map(|b| {
            let op = displaced_parity(dim, b);
            let e = linalg::trace(&(rho.matrix() * &op)).re;
            Measurement { operator: op, expectation: e, shots: 1e4 }
        })
        .collect()
}

pub fn smooth_pulse(labels: &[&str], n_steps: usize) -> ControlPulse {
    let amps = (0..labels.len())
        .map(|ch| (0..n_steps).map(|k| 3.0 * ((k + ch) as f64 * 0.07).sin()).collect())
        .collect();
    ControlPulse::new(1e-3, labels.iter().map(|s| s.to_string()).collect(), amps).expect("pulse shape")
}
