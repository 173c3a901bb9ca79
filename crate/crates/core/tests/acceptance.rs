//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness; exits nonzero if a criterion outside the known-unattainable set fails.

mod common;

use common::*;
use elq_core::aqec::*;
use elq_core::channels::*;
use elq_core::code::{logical_state, BinomialCode};
use elq_core::device::{DeviceParams, Mode, Node};
use elq_core::grape::*;
use elq_core::hilbert::*;
use elq_core::linalg;
use elq_core::scenario::*;
use elq_core::tomo::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::time::Instant;

const SINGLE_DECAY: &str = include_str!("../../../scenarios/single_qubit_decay.toml");
const BELL_DECAY: &str = include_str!("../../../scenarios/bell_decay.toml");
const BELL_SWEEP: &str = include_str!("../../../scenarios/bell_sweep.toml");

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fit_t(series: &ResultSeries, label: &str) -> f64 {
    series.fit(label).unwrap_or_else(|| panic!("no fit for {label}")).params.iter().find(|p| p.0 == "T_us").unwrap().1
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn ac1(p: &DeviceParams) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (cav, t_ref, t_quoted) in [(Mode::S1, 290.7, 291.0), (Mode::S3, 312.2, 313.0)] {
        let b = &p.aqec_for(cav).unwrap().budget;
        let composed = error_budget_compose(&[b.aqec, b.uncorrectable, b.measure]).unwrap();
        let t = depolarizing_decay_time(1.0 - b.total, 50.0).unwrap();
        let gap = 100.0 * (composed - b.total);
        let part_ok = gap.abs() <= 0.3 && (t - t_ref).abs() <= 1.0 && (t - t_quoted).abs() <= 1.0;
        ok &= part_ok;
        parts.push(format!(
            "{}: composed {:.2}% vs table {:.1}% ({gap:+.2} pts, need ±0.3), T(table)={t:.1}us{}",
            cav.name(),
            100.0 * composed,
            100.0 * b.total,
            if part_ok { "" } else { " [miss]" }
        ));
    }
    check(ok, parts.join("; "))
}

fn ac2(p: &DeviceParams) -> Outcome {
    let t0 = Instant::now();
    let sc = Scenario::from_toml_str(SINGLE_DECAY).unwrap();
    let r = run_scenario(&sc, p, &GateOverrides::default()).unwrap();
    let s = &r.series[0];
    let (tf, tu, tc) = (fit_t(s, "fock01"), fit_t(s, "uncorrected"), fit_t(s, "corrected"));
    let per_curve = t0.elapsed().as_secs_f64() / sc.curves.len() as f64;
    let ok = tf > tc && tc > tu && within(tc, 291.0, 0.15) && within(tu, 132.0, 0.15) && per_curve < 300.0;
    check(ok, format!("T_fock01={tf:.1} T_corrected={tc:.1} (291±15%) T_uncorrected={tu:.1} (132±15%) us, {per_curve:.1}s/curve"))
}

fn ac3(p: &DeviceParams) -> Outcome {
    let sc = Scenario::from_toml_str(BELL_DECAY).unwrap();
    let r = run_scenario(&sc, p, &GateOverrides::default()).unwrap();
    let fid = r.series.iter().find(|s| s.name.ends_with("bell_fidelity")).unwrap();
    let neg = r.series.iter().find(|s| s.name.ends_with("negativity")).unwrap();
    let (tu, tc) = (fit_t(fid, "uncorrected"), fit_t(fid, "corrected"));
    let (fc, fp) = (fid.column("corrected").unwrap(), fid.column("purified").unwrap());
    let ordered = fc.iter().zip(fp).skip(1).all(|(c, p)| p > c);
    let life = |l: &str| neg.fit(l).unwrap().params[0].1;
    let (lu, lc) = (life("uncorrected"), life("corrected"));
    let ok = tc >= 1.30 * tu && ordered && lc >= 1.25 * lu;
    check(
        ok,
        format!(
            "Bell T {tu:.1}->{tc:.1}us (+{:.0}%, need 30%), purified>corrected at all t>0: {ordered}, negativity lifetime {lu:.1}->{lc:.1}us (+{:.0}%, need 25%)",
            100.0 * (tc / tu - 1.0),
            100.0 * (lc / lu - 1.0)
        ),
    )
}

fn ac4(p: &DeviceParams) -> Outcome {
    let t0 = Instant::now();
    let ideal = bell_state(0.0).projector();
    let b_ideal = bell_signal_max(&ideal).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let probe = random_two_qubit(&mut rng);
    let (c0, a, b) = bell_signal_harmonics(&probe).unwrap();
    let sinusoidal = (0..32).all(|k| {
        let th = 2.0 * PI * k as f64 / 32.0 + 0.1;
        let v = chsh_bell(&probe, th).unwrap();
        (v - (c0 + a * th.cos() + b * th.sin())).abs() < 1e-12 && (v - chsh_bell(&probe, th + 2.0 * PI).unwrap()).abs() < 1e-12
    });
    let sc = Scenario::from_toml_str(BELL_SWEEP).unwrap();
    let r = run_scenario(&sc, p, &GateOverrides::default()).unwrap();
    let sweep = r.series.iter().find(|s| s.name.ends_with("bell_sweep")).unwrap();
    let bp = sweep.fit("purified").unwrap().params[0].1;
    let secs = t0.elapsed().as_secs_f64();
    let ok = (b_ideal - 2.0 * SQRT_2).abs() < 1e-9 && sinusoidal && bp > 2.0 && (bp - 2.25).abs() <= 0.15 && secs < 120.0;
    check(ok, format!("ideal B_max={b_ideal:.12}, sinusoidal/2pi-periodic: {sinusoidal}, purified 25us B_max={bp:.3} (2.25±0.15), {secs:.1}s"))
}

fn ac5(p: &DeviceParams) -> Outcome {
    let prob = aqec_problem(p, Node::A, 10, 50.0, &NoiseToggles::default()).unwrap();
    let fd = grape_fd_check(&prob, 30, 20, 5);
    let t0 = Instant::now();
    let init = PulseInit::Seed { seed: 1, n_steps: 1000, dt: DEFAULT_DT_US, spread_mhz: 2.0 };
    let res = optimize(&prob, init, &GrapeOptions { max_iter: 3000, ..Default::default() }).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let u = total_unitary(&prob, &res.pulse).unwrap();
    let gate = AqecGate::from_unitary(LinearOp::new(SpaceSpec::node(10).unwrap(), u).unwrap()).unwrap();
    // ideal-recovery comparison: no extra gate error on either run
    let mut sc = Scenario::from_toml_str(SINGLE_DECAY).unwrap();
    sc.curves.retain(|c| c.label == "corrected");
    sc.outputs.wigner_cycles.clear();
    sc.gate_fidelity = Some(1.0);
    let t_ideal = fit_t(&run_scenario(&sc, p, &GateOverrides::default()).unwrap().series[0], "corrected");
    let t_grape = fit_t(&run_scenario(&sc, p, &GateOverrides { a: Some(gate), b: None }).unwrap().series[0], "corrected");
    let ok = fd < 1e-5 && res.fidelity >= 0.995 && secs < 900.0 && within(t_grape, t_ideal, 0.10);
    check(
        ok,
        format!(
            "gradient vs central FD max rel err {fd:.1e}, GRAPE F={:.4} in {} iterations / {secs:.0}s, T(grape)={t_grape:.1} vs T(ideal)={t_ideal:.1}us ({:+.1}%)",
            res.fidelity,
            res.iterations,
            100.0 * (t_grape / t_ideal - 1.0)
        ),
    )
}

fn ac6() -> Outcome {
    let dim = 8;
    let space = SpaceSpec::single(dim).unwrap();
    let code = BinomialCode::new(dim).unwrap();
    let target = logical_state(&code, c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)).unwrap().projector();
    let xs = linspace(-2.0, 2.0, 9);
    let exact: Vec<Measurement> = xs
        .iter()
        .flat_map(|&x| xs.iter().map(move |&y| c(x, y)))
        .map(|b| {
            let op = displaced_parity(dim, b);
            let e = linalg::trace(&(target.matrix() * &op)).re;
            Measurement { operator: op, expectation: e, shots: 1e4 }
        })
        .collect();
    let f_exact = state_fidelity(&mle_reconstruct(&exact, &space).unwrap().rho, &target).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sampled: Vec<Measurement> = exact
        .iter()
        .map(|m| {
            let p = (1.0 + m.expectation) / 2.0;
            let ups = (0..10_000).filter(|_| rng.random::<f64>() < p).count() as f64;
            Measurement { operator: m.operator.clone(), expectation: 2.0 * ups / 1e4 - 1.0, shots: 1e4 }
        })
        .collect();
    let f_sampled = state_fidelity(&mle_reconstruct(&sampled, &space).unwrap().rho, &target).unwrap();
    let mut werr: f64 = 0.0;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, 10, 3);
        let dm = DensityMatrix::new(SpaceSpec::single(10).unwrap(), rho.clone()).unwrap();
        for k in 0..20 {
            let b = c(-1.5 + 0.15 * k as f64, 1.2 - 0.11 * k as f64);
            werr = werr.max((wigner_point(&dm, b).unwrap() - wigner_oracle(&rho, b)).abs());
        }
    }
    let (b0, b1) = (code.logical_basis().columns(0, 1).into_owned(), code.logical_basis().columns(1, 1).into_owned());
    let v = (linalg::kron(&b0, &b1) + linalg::kron(&b1, &b0)).scale(FRAC_1_SQRT_2);
    let bell = Ket::new(SpaceSpec::new(vec![dim, dim]).unwrap(), v.column(0).into_owned()).unwrap().projector();
    let wj = joint_wigner(&bell, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
    let ok = f_exact > 0.999 && f_sampled > 0.97 && werr < 1e-8 && (wj - 4.0 / (PI * PI)).abs() < 1e-9;
    check(ok, format!("MLE noiseless F={f_exact:.6}, 1e4-shot F={f_sampled:.4}, Wigner oracle max err {werr:.1e}, W_J(0,0)-4/pi^2={:.1e}", wj - 4.0 / (PI * PI)))
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut complete: f64 = 0.0;
    for dim in 2..9 {
        for k in 0..=10 {
            complete = complete.max(amplitude_damping_kraus(dim, k as f64 / 10.0).unwrap().completeness_error());
        }
    }
    let dim = 8;
    let (a, _) = ladder_ops(dim).unwrap();
    let space = SpaceSpec::single(dim).unwrap();
    let spec = LindbladSpec::new(LinearOp::zeros(&space), vec![(a, 1.0)]).unwrap();
    let mut kl: f64 = 0.0;
    for kt in [0.1, 0.25, 0.5] {
        let ch = amplitude_damping_kraus(dim, 1.0 - f64::exp(-kt)).unwrap();
        for n in 0..=4 {
            let rho = Ket::fock(dim, n).unwrap().projector();
            kl = kl.max(ch.apply(&rho).unwrap().trace_distance(&lindblad_evolve(&spec, &rho, kt, 1e-3).unwrap()).unwrap());
        }
    }
    let mut dep: f64 = 0.0;
    for _ in 0..50 {
        let (p1, p2) = (rng.random::<f64>(), rng.random::<f64>());
        let rho = DensityMatrix::new(SpaceSpec::qubit(), random_density(&mut rng, 2, 2)).unwrap();
        let twice = depolarize(&depolarize(&rho, p1).unwrap(), p2).unwrap();
        let once = depolarize(&rho, 1.0 - (1.0 - p1) * (1.0 - p2)).unwrap();
        dep = dep.max(linalg::max_abs(&(twice.matrix() - once.matrix())));
    }
    let mut ent: f64 = 0.0;
    let two = SpaceSpec::new(vec![2, 2]).unwrap();
    for _ in 0..200 {
        let rho = DensityMatrix::new(two.clone(), random_density(&mut rng, 4, 4)).unwrap();
        ent = ent.max((concurrence(&rho).unwrap() - concurrence_oracle(rho.matrix())).abs());
        ent = ent.max((negativity(&rho, 0).unwrap() - negativity_oracle(rho.matrix())).abs());
    }
    let mut chsh: f64 = 0.0;
    for _ in 0..1000 {
        let rho = random_two_qubit(&mut rng);
        chsh = chsh.max(bell_signal_max(&rho).unwrap()).max(chsh_bell(&rho, rng.random_range(0.0..2.0 * PI)).unwrap().abs());
    }
    let ok = complete < 1e-8 && kl < 1e-5 && dep < 1e-12 && ent < 1e-9 && chsh <= 2.0 * SQRT_2 + 1e-12;
    check(
        ok,
        format!("Kraus completeness {complete:.1e}, Kraus-Lindblad {kl:.1e}, depolarizing law {dep:.1e}, concurrence/negativity oracle {ent:.1e}, max CHSH {chsh:.6} <= {:.6}", 2.0 * SQRT_2),
    )
}

fn main() {
    let p = DeviceParams::default();
    let criteria: [(&str, &str, Box<dyn Fn() -> Outcome>); 7] = [
        ("1", "error-budget arithmetic", Box::new(|| ac1(&p))),
        ("2", "single logical qubit decay", Box::new(|| ac2(&p))),
        ("3", "entanglement protection", Box::new(|| ac3(&p))),
        ("4", "Bell sweep", Box::new(|| ac4(&p))),
        ("5", "GRAPE", Box::new(|| ac5(&p))),
        ("6", "tomography round trips", Box::new(ac6)),
        ("7", "channel/property suite", Box::new(ac7)),
    ];
    // The S3 factors multiply to 85.62%, 0.42 points off the tabulated
    // 85.2%; no rounding of three 0.1%-resolution factors closes that gap.
    let expected_failures = ["1"];
    let mut unexpected = 0;
    for (id, name, f) in criteria.iter() {
        let t0 = Instant::now();
        let o = f();
        let note = match (o.pass, expected_failures.contains(id)) {
            (false, true) => " (known: not reachable with the tabulated factors)",
            (false, false) => {
                unexpected += 1;
                ""
            }
            (true, true) => " (was expected to fail)",
            _ => "",
        };
        println!("{} AC{id} {name}: {}{note} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t0.elapsed().as_secs_f64());
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed unexpectedly");
        std::process::exit(1);
    }
}
