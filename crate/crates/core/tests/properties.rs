mod common;

use common::*;
use elq_core::aqec::*;
use elq_core::channels::*;
use elq_core::code::*;
use elq_core::device::*;
use elq_core::grape::*;
use elq_core::hilbert::*;
use elq_core::linalg;
use elq_core::scenario::*;
use elq_core::tomo::*;
use elq_core::CMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, SQRT_2};

fn state(seed: u64, dim: usize) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = 1 + (seed as usize % dim);
    DensityMatrix::new(SpaceSpec::single(dim).unwrap(), random_density(&mut rng, dim, rank)).unwrap()
}

fn is_valid(rho: &CMatrix) -> bool {
    linalg::hermiticity_error(rho) < 1e-10 && (linalg::trace(rho).re - 1.0).abs() < 1e-9 && linalg::eigvalsh(rho)[0] > -1e-7
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_of_product(sa in 0u64..1000, sb in 0u64..1000, da in 2usize..5, db in 2usize..5) {
        let (a, b) = (state(sa, da), state(sb, db));
        let ab = tensor(&[a.clone(), b.clone()]).unwrap();
        let ra = partial_trace(&ab, &[0]).unwrap();
        let rb = partial_trace(&ab, &[1]).unwrap();
        prop_assert!(linalg::max_abs(&(ra.matrix() - a.matrix())) < 1e-12);
        prop_assert!(linalg::max_abs(&(rb.matrix() - b.matrix())) < 1e-12);
    }

    #[test]
    fn displacement_is_unitary_on_the_safe_subspace(re in -1.5f64..1.5, im in -1.5f64..1.5) {
        let dim = 30;
        let d = displacement(dim, c(re, im)).unwrap();
        let m = d.matrix();
        let safe = dim - 3;
        let g = m.adjoint() * m;
        for i in 0..safe.min(12) {
            for j in 0..safe.min(12) {
                let e = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g[(i, j)] - c(e, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn kraus_channels_are_complete_and_valid(gamma in 0.0f64..1.0, seed in 0u64..1000, dim in 2usize..8) {
        let ch = amplitude_damping_kraus(dim, gamma).unwrap();
        prop_assert!(ch.completeness_error() < 1e-8);
        prop_assert!(is_valid(ch.apply(&state(seed, dim)).unwrap().matrix()));
    }

    #[test]
    fn qubit_channels_are_complete(t1 in 1.0f64..200.0, tphi in 1.0f64..300.0, nth in 0.0f64..0.1, t in 0.0f64..100.0, seed in 0u64..100) {
        let ch = qubit_decoherence_channel(t1, tphi, nth, t).unwrap();
        prop_assert!(ch.completeness_error() < 1e-8);
        prop_assert!(is_valid(ch.apply(&state(seed, 2)).unwrap().matrix()));
    }

    #[test]
    fn amplitude_damping_composes(g1 in 0.0f64..1.0, g2 in 0.0f64..1.0) {
        let dim = 6;
        let a = amplitude_damping_kraus(dim, g1).unwrap().superop();
        let b = amplitude_damping_kraus(dim, g2).unwrap().superop();
        let ab = amplitude_damping_kraus(dim, 1.0 - (1.0 - g1) * (1.0 - g2)).unwrap().superop();
        prop_assert!(linalg::max_abs(&(a.then(&b).matrix() - ab.matrix())) < 1e-8);
    }

    #[test]
    fn depolarization_composes(p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, seed in 0u64..1000) {
        let rho = DensityMatrix::new(SpaceSpec::qubit(), state(seed, 2).into_matrix()).unwrap();
        let twice = depolarize(&depolarize(&rho, p1).unwrap(), p2).unwrap();
        let once = depolarize(&rho, 1.0 - (1.0 - p1) * (1.0 - p2)).unwrap();
        prop_assert!(linalg::max_abs(&(twice.matrix() - once.matrix())) < 1e-12);
    }

    #[test]
    fn bayes_inverts_confusion(p in 0.0f64..1.0, fg in 0.9f64..1.0, fe in 0.9f64..1.0) {
        let r = bayes_correct(confuse([p, 1.0 - p], fg, fe), fg, fe).unwrap();
        prop_assert!(!r.clipped);
        prop_assert!((r.probs[0] - p).abs() < 1e-12 && (r.probs[1] - (1.0 - p)).abs() < 1e-12);
    }

    #[test]
    fn pass_shift_scales_with_drive_power(omega in 0.01f64..0.2, scale in 0.1f64..3.0, d in 4.2f64..9.0, n in 0usize..5) {
        let a = PassDrive { omega, delta_d: d, chi: 1.3, convention: 1.0 };
        let b = PassDrive { omega: scale * omega, ..a };
        prop_assert!((pass_shift(&b, n).unwrap() - scale * scale * pass_shift(&a, n).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn error_transparent_drive_equalizes_phases(k in 1e-4f64..5e-3, chi in 0.5f64..2.0, d in 4.2f64..8.0, t in 0.1f64..100.0) {
        if let Ok(omega) = solve_error_transparent_amplitude(k, chi, d) {
            let drive = PassDrive { omega, delta_d: d, chi, convention: 1.0 };
            let f = |n| fock_frequency(k, &drive, n).unwrap();
            // phase between |1⟩,|3⟩ vs between |2⟩,|4⟩ after time t
            let p13 = 2.0 * PI * (f(3) - f(1)) * t;
            let p24 = 2.0 * PI * (f(4) - f(2)) * t;
            prop_assert!((p13 - p24).abs() < 1e-9 * (1.0 + p13.abs()));
        }
    }

    #[test]
    fn wigner_integrates_to_one(seed in 0u64..1000) {
        let rho = state(seed, 10);
        // keep the support where a |β| ≤ 3 window captures it
        let code = BinomialCode::new(10).unwrap();
        let low = linalg::matmul(&code.space_projector_upto(5), rho.matrix());
        let low = linalg::matmul(&low, &code.space_projector_upto(5));
        let rho = DensityMatrix::normalize(SpaceSpec::single(10).unwrap(), low).unwrap();
        let axis = linspace(-3.0, 3.0, 61);
        let grid = wigner(&rho, &axis, &axis).unwrap();
        prop_assert!((grid.integral() - 1.0).abs() < 0.02);
    }

    #[test]
    fn joint_wigner_is_bounded(seed in 0u64..1000, x1 in -1.5f64..1.5, y1 in -1.5f64..1.5, x2 in -1.5f64..1.5, y2 in -1.5f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = DensityMatrix::new(SpaceSpec::new(vec![5, 5]).unwrap(), random_density(&mut rng, 25, 2)).unwrap();
        let w = joint_wigner(&rho, c(x1, y1), c(x2, y2)).unwrap();
        prop_assert!(w.abs() <= 4.0 / (PI * PI) + 1e-12);
    }

    #[test]
    fn chsh_is_periodic_and_bounded(seed in 0u64..10_000, theta in 0.0f64..6.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_two_qubit(&mut rng);
        let b = chsh_bell(&rho, theta).unwrap();
        prop_assert!(b.abs() <= 2.0 * SQRT_2 + 1e-9);
        prop_assert!((b - chsh_bell(&rho, theta + 2.0 * PI).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn werner_entanglement_measures_agree(f in 0.25f64..1.0) {
        let p = 4.0 * (1.0 - f) / 3.0;
        let rho = depolarize_subsystem(&bell_psi_plus(), 0, p).unwrap();
        let (cc, n) = (concurrence(&rho).unwrap(), negativity(&rho, 0).unwrap());
        if f <= 0.5 {
            prop_assert!(cc < 1e-9 && n < 1e-9);
        } else if f > 0.5 + 1e-6 {
            prop_assert!(cc > 0.0 && n > 0.0);
        }
    }

    #[test]
    fn mle_output_is_a_state(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_density(&mut rng, 4, 2);
        let space = SpaceSpec::single(4).unwrap();
        let data: Vec<Measurement> = linspace(-1.5, 1.5, 5)
            .iter()
            .flat_map(|&x| linspace(-1.5, 1.5, 5).into_iter().map(move |y| c(x, y)))
            .map(|b| {
                let op = displaced_parity(4, b);
                // noisy means, possibly outside the physical range of any state
                let e = (linalg::trace(&(&truth * &op)).re + 0.05 * (b.re * 7.0).sin()).clamp(-0.999, 0.999);
                Measurement { operator: op, expectation: e, shots: 1000.0 }
            })
            .collect();
        let r = mle_reconstruct(&data, &space).unwrap();
        prop_assert!(is_valid(r.rho.matrix()));
    }

    #[test]
    fn product_state_stays_separable(a in 0.0f64..1.0, ph in 0.0f64..6.3) {
        let p = DeviceParams::default();
        let cfg = CycleConfig::new(50.0, 2, CycleMode::Corrected).unwrap();
        let models = models_for(&p, &cfg, 6);
        let (al, be) = (c(a.sqrt(), 0.0), elq_core::Complex64::from_polar((1.0 - a).sqrt(), ph));
        let single = prepare_initial_state(LogicalTarget::Single { alpha: al, beta: be }, None).unwrap();
        let prod = tensor(&[single.clone(), single]).unwrap();
        for (rho, _) in bell_series(&models, &prod).unwrap() {
            prop_assert!(negativity(&rho, 0).unwrap() < 1e-9);
        }
    }
}

fn models_for(p: &DeviceParams, cfg: &CycleConfig, cutoff: usize) -> Vec<SideModel> {
    vec![SideModel::build(p, cfg, Node::A, cutoff).unwrap(), SideModel::build(p, cfg, Node::B, cutoff).unwrap()]
}

trait Upto {
    fn space_projector_upto(&self, n: usize) -> CMatrix;
}

impl Upto for BinomialCode {
    fn space_projector_upto(&self, n: usize) -> CMatrix {
        CMatrix::from_fn(self.cutoff(), self.cutoff(), |i, j| if i == j && i <= n { c(1.0, 0.0) } else { c(0.0, 0.0) })
    }
}

#[test]
fn hamiltonians_are_hermitian_and_diagonal() {
    let p = DeviceParams::default();
    for subs in [vec![(Mode::S1, 8), (Mode::I1, 2)], vec![(Mode::S3, 6), (Mode::I2, 2)], vec![(Mode::S1, 4), (Mode::I1, 2), (Mode::Y1, 2)]] {
        let h = dispersive_hamiltonian(&p, &subs).unwrap();
        assert!(h.is_hermitian(1e-10));
        let m = h.matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if i != j {
                    assert_eq!(m[(i, j)].norm(), 0.0);
                }
            }
        }
    }
    for op in node_controls(8).unwrap() {
        assert!(op.is_hermitian(1e-10));
    }
}

#[test]
fn parity_commutes_with_number() {
    for dim in [2, 5, 10] {
        let p = parity_op(dim).unwrap().into_matrix();
        let n = number_op(dim).unwrap().into_matrix();
        assert_eq!(linalg::max_abs(&(&p * &n - &n * &p)), 0.0);
    }
}

#[test]
fn code_structure() {
    let code = BinomialCode::new(10).unwrap();
    let (l, e) = (code.logical_basis(), code.error_basis());
    assert!((l.adjoint() * &l - linalg::identity(2)).norm() < 1e-15);
    assert_eq!((l.column(0).dotc(&l.column(1))).norm(), 0.0);
    assert_eq!((e.adjoint() * &e - linalg::identity(2)).norm(), 0.0);
    let (pc, pe) = (code.code_projector().into_matrix(), code.error_projector().into_matrix());
    assert!(linalg::max_abs(&(&pc * &pe)) < 1e-15);
    assert!(linalg::max_abs(&(&pc * &pc - &pc)) < 1e-15);
    assert!(linalg::max_abs(&(&pe * &pe - &pe)) < 1e-15);
    let n = number_op(10).unwrap();
    for (a, b) in [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8)] {
        let k = logical_state(&code, c(a, 0.0), c(b, 0.0)).unwrap();
        assert!((k.projector().expect(&n).unwrap() - 2.0).abs() < 1e-14);
    }
    // recovery after one loss, on the code space, is an isometry onto it
    let (a, _) = ladder_ops(10).unwrap();
    let rec = ideal_recovery(&code);
    let mut m = CMatrix::zeros(2, 2);
    for k in rec.ops() {
        let r = l.adjoint() * k * a.matrix() * &l;
        m += r.adjoint() * &r;
    }
    // ⟨a†a⟩ = 2 on every code word, so the branch norm is √2
    assert!(linalg::max_abs(&(m.unscale(2.0) - linalg::identity(2))) < 1e-10);
}

#[test]
fn step_propagators_are_unitary() {
    let p = DeviceParams::default();
    let prob = aqec_problem(&p, Node::A, 8, 50.0, &NoiseToggles::default()).unwrap();
    let labels: Vec<&str> = NODE_LABELS.to_vec();
    let mut pulse = ControlPulse::zeros(1e-3, &labels, 50).unwrap();
    for (ch, row) in pulse.amplitudes.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = 15.0 * ((k + ch) as f64 * 0.3).sin();
        }
    }
    let u = total_unitary(&prob, &pulse).unwrap();
    assert!(linalg::max_abs(&(u.adjoint() * &u - linalg::identity(u.nrows()))) < 1e-9);
    let one = ControlPulse::new(1e-3, pulse.labels.clone(), pulse.amplitudes.iter().map(|r| r[..1].to_vec()).collect()).unwrap();
    let u1 = total_unitary(&prob, &one).unwrap();
    assert!(linalg::max_abs(&(u1.adjoint() * &u1 - linalg::identity(u1.nrows()))) < 1e-9);
}

#[test]
fn grape_history_is_monotone() {
    let p = DeviceParams::default();
    let prob = aqec_problem(&p, Node::A, 8, 50.0, &NoiseToggles::default()).unwrap();
    let init = PulseInit::Seed { seed: 3, n_steps: 200, dt: 1e-3, spread_mhz: 2.0 };
    let res = optimize(&prob, init, &GrapeOptions { max_iter: 40, ..Default::default() }).unwrap();
    assert!(res.history.windows(2).all(|w| w[1] >= w[0]));
    assert!((transfer_fidelity(&prob, &res.pulse).unwrap() - res.fidelity).abs() < 1e-10);
}

#[test]
fn noiseless_cycle_is_identity_on_code_states() {
    let p = DeviceParams::default();
    let mut cfg = CycleConfig::new(50.0, 1, CycleMode::Corrected).unwrap();
    cfg.noise = NoiseToggles::none();
    let code = BinomialCode::new(10).unwrap();
    for (a, b) in [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8)] {
        let rho = tensor(&[logical_state(&code, c(a, 0.0), c(0.0, b)).unwrap(), Ket::ground()]).unwrap().projector();
        let r = run_cycles(&rho, &cfg, &p).unwrap();
        assert!(r[0].state.trace_distance(&rho).unwrap() < 1e-9);
    }
}

#[test]
fn cycle_outputs_are_states_with_complete_branches() {
    let p = DeviceParams::default();
    let code = BinomialCode::new(8).unwrap();
    let rho = tensor(&[logical_state(&code, c(0.6, 0.0), c(0.0, 0.8)).unwrap(), Ket::ground()]).unwrap().projector();
    for mode in [CycleMode::Uncorrected, CycleMode::Corrected, CycleMode::DetectOnly] {
        let cfg = CycleConfig::new(50.0, 4, mode).unwrap();
        for r in run_cycles(&rho, &cfg, &p).unwrap() {
            assert!(is_valid(r.state.matrix()), "{mode:?} cycle {}", r.cycle);
            let total: f64 = r.outcomes.iter().map(|o| o.1).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn corrected_cycle_is_close_to_depolarizing() {
    let p = DeviceParams::default();
    let cfg = CycleConfig::new(50.0, 1, CycleMode::Corrected).unwrap();
    let model = SideModel::build(&p, &cfg, Node::A, 10).unwrap();
    let s = &model.logical_maps()[1];
    let pm = ProcessMatrix::from_superop(s).unwrap();
    // trace norm of the normalized Choi difference to the closest
    // depolarizing channel
    let dist = |q: f64| {
        let dep = ProcessMatrix::from_superop(&depolarizing_channel(q).unwrap().superop()).unwrap();
        linalg::trace_norm_hermitian(&linalg::hermitian_part(&(pm.choi() - dep.choi()).unscale(2.0)))
    };
    let best = (0..=200).map(|k| dist(k as f64 * 1e-3)).fold(f64::INFINITY, f64::min);
    // The residual is logical relaxation (χ_XY coherence, χ_ZZ < χ_XX)
    // from double losses the gate cannot undo; it sits just under 0.06.
    assert!(best < 0.06, "Choi trace distance {best}");
    let chi = &pm.chi;
    assert!(chi[(0, 0)].re > 0.85);
    assert!((chi[(1, 1)].re - chi[(2, 2)].re).abs() < 1e-3);
}

#[test]
fn fidelity_ordering_by_mode() {
    // purified ≥ corrected ≥ uncorrected up to 400 µs; past that the
    // undetectable double-loss histories pull the purified curve under
    let p = DeviceParams::default();
    let f = |mode| {
        let cfg = CycleConfig::new(50.0, 8, mode).unwrap();
        SideModel::build(&p, &cfg, Node::A, 10)
            .unwrap()
            .logical_maps()
            .iter()
            .map(|m| conditional_process_fidelity(m).unwrap())
            .collect::<Vec<f64>>()
    };
    let (u, c_, d) = (f(CycleMode::Uncorrected), f(CycleMode::Corrected), f(CycleMode::DetectOnly));
    for k in 1..u.len() {
        assert!(d[k] >= c_[k] && c_[k] >= u[k], "cycle {k}: {} {} {}", d[k], c_[k], u[k]);
    }
}

#[test]
fn bell_signal_threshold_under_two_sided_depolarization() {
    let b = |q: f64| {
        let r = depolarize_subsystem(&bell_psi_plus(), 0, q).unwrap();
        let r = depolarize_subsystem(&r, 1, q).unwrap();
        bell_signal_max(&r).unwrap()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if b(mid) > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let expect = 1.0 - (2.0 / (2.0 * SQRT_2)).sqrt();
    assert!((lo - expect).abs() < 1e-6, "{lo} vs {expect}");
}
