use elq_core::aqec::{AqecGate, NoiseToggles};
use elq_core::device::{DeviceParams, Node};
use elq_core::grape::{aqec_problem, optimize, total_unitary, ControlPulse, GrapeOptions, PulseInit, DEFAULT_CAP_MHZ, DEFAULT_DT_US};
use elq_core::hilbert::{LinearOp, SpaceSpec};
use elq_core::scenario::{budget_report, fit_and_report, format_fit, run_scenario, BellSweep, GateOverrides, Outputs, ResultSeries, Scenario, ScenarioResult};
use elq_core::tomo::{linspace, wigner as wigner_grid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::output::{config_hash, Artifacts};
use crate::{plot, state_spec, CliError, GlobalOpts};

const STDERR_NOTE: &str = "# uncertainties are fit-covariance standard errors, not spreads over repeated runs";

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_device(spec: &str, base: Option<&Path>) -> Result<DeviceParams, CliError> {
    if spec == "builtin" {
        return Ok(DeviceParams::default());
    }
    let p = match base {
        Some(dir) if Path::new(spec).is_relative() => dir.join(spec),
        _ => PathBuf::from(spec),
    };
    if !p.exists() {
        return Err(CliError::new("config", format!("device file {} does not exist", p.display())).with("field", "device"));
    }
    Ok(DeviceParams::load(&p)?)
}

struct Prepared {
    scenario: Scenario,
    params: DeviceParams,
    gates: GateOverrides,
    hash: String,
}

fn pulse_gate(params: &DeviceParams, sc: &Scenario, node: Node, path: &Path) -> Result<(AqecGate, String), CliError> {
    let text = read(path)?;
    let pulse = ControlPulse::from_csv(&text)?;
    let problem = aqec_problem(params, node, sc.cutoff, sc.tau_us, &sc.noise)?;
    let u = total_unitary(&problem, &pulse)?;
    let gate = AqecGate::from_unitary(LinearOp::new(SpaceSpec::node(sc.cutoff)?, u)?)?;
    Ok((gate, text))
}

fn prepare(g: &GlobalOpts, path: &Path, pulses: [Option<&Path>; 2], edit: impl Fn(&mut Scenario)) -> Result<Prepared, CliError> {
    let mut sc = Scenario::from_toml_str(&read(path)?)?;
    if let Some(s) = g.seed {
        sc.seed = s;
    }
    if let Some(c) = g.cutoff {
        sc.cutoff = c;
    }
    edit(&mut sc);
    sc.validate()?;
    let params = load_device(&sc.device, path.parent())?;
    let mut gates = GateOverrides::default();
    let mut pulse_texts = Vec::new();
    for (node, p) in [Node::A, Node::B].into_iter().zip(pulses) {
        if let Some(p) = p {
            let (gate, text) = pulse_gate(&params, &sc, node, p)?;
            match node {
                Node::A => gates.a = Some(gate),
                Node::B => gates.b = Some(gate),
            }
            pulse_texts.push(text);
        }
    }
    let sc_toml = toml::to_string(&sc).map_err(|e| CliError::new("config", e.to_string()))?;
    let dev_toml = params.to_toml_string();
    let mut parts: Vec<&[u8]> = vec![sc_toml.as_bytes(), dev_toml.as_bytes()];
    parts.extend(pulse_texts.iter().map(|t| t.as_bytes()));
    let hash = config_hash(&parts);
    Ok(Prepared { scenario: sc, params, gates, hash })
}

fn plotted_columns(series: &ResultSeries) -> (Vec<&str>, &'static str) {
    let cols = series.columns.iter().map(|c| c.0.as_str()).filter(|n| !n.ends_with("_acceptance") && !n.ends_with("_min_pt_eig")).collect();
    let y = if series.name.ends_with("_negativity") {
        "negativity"
    } else if series.name.ends_with("_bell_sweep") {
        "Bell signal B"
    } else {
        "fidelity"
    };
    (cols, y)
}

fn fit_report(result: &ScenarioResult) -> String {
    let mut s = String::new();
    for series in &result.series {
        if series.fits.is_empty() {
            continue;
        }
        let _ = writeln!(s, "[{}]", series.name);
        for f in &series.fits {
            let _ = writeln!(s, "{}", format_fit(f));
        }
    }
    s
}

fn emit(g: &GlobalOpts, prep: &Prepared, result: &ScenarioResult) -> Result<(), CliError> {
    let mut art = Artifacts::new(&g.out_dir, prep.hash.clone());
    for series in &result.series {
        art.add_text(&format!("{}.csv", series.name), &series.to_csv());
        let (cols, y) = plotted_columns(series);
        art.add_svg(&format!("{}.svg", series.name), &plot::series_svg(series, &cols, y)?);
    }
    for (label, k, grid) in &result.wigner {
        let stem = format!("{}_wigner_{label}_c{k}", prep.scenario.name);
        art.add_text(&format!("{stem}.csv"), &grid.to_csv());
        art.add_svg(&format!("{stem}.svg"), &plot::wigner_svg(grid, &format!("{label}, cycle {k}"))?);
    }
    let report = fit_report(result);
    if !report.is_empty() {
        art.add_text(&format!("{}_fits.txt", prep.scenario.name), &format!("{report}{STDERR_NOTE}\n"));
    }
    let written = art.write(g.force)?;
    print!("{report}");
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn with_path(path: &Path) -> impl Fn(CliError) -> CliError + '_ {
    move |e| e.with("scenario", path.display().to_string())
}

pub fn run(g: &GlobalOpts, scenarios: &[PathBuf], pulse_a: Option<&Path>, pulse_b: Option<&Path>) -> Result<(), CliError> {
    let prepared = scenarios.iter().map(|p| prepare(g, p, [pulse_a, pulse_b], |_| {}).map_err(with_path(p))).collect::<Result<Vec<_>, _>>()?;
    let results: Vec<Result<ScenarioResult, CliError>> =
        prepared.par_iter().map(|p| run_scenario(&p.scenario, &p.params, &p.gates).map_err(CliError::from)).collect();
    for ((path, prep), res) in scenarios.iter().zip(&prepared).zip(results) {
        let res = res.map_err(with_path(path))?;
        emit(g, prep, &res).map_err(with_path(path))?;
    }
    Ok(())
}

pub fn bell_sweep(g: &GlobalOpts, scenario: &Path, points: usize) -> Result<(), CliError> {
    let prep = prepare(g, scenario, [None, None], |sc| {
        sc.outputs = Outputs { fidelity: false, negativity: false, bell_sweep: Some(BellSweep { points }), wigner_cycles: vec![] };
    })
    .map_err(with_path(scenario))?;
    let res = run_scenario(&prep.scenario, &prep.params, &prep.gates).map_err(|e| with_path(scenario)(e.into()))?;
    emit(g, &prep, &res)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrapeConfig {
    #[serde(default = "builtin")]
    device: String,
    #[serde(default = "node_a")]
    node: Node,
    #[serde(default = "ten")]
    cutoff: usize,
    tau_us: f64,
    n_steps: usize,
    #[serde(default = "default_dt")]
    dt_us: f64,
    #[serde(default = "default_spread")]
    spread_mhz: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_iter")]
    max_iter: usize,
    #[serde(default = "default_cap")]
    cap_mhz: f64,
    #[serde(default = "default_target")]
    target_infidelity: f64,
    /// warm start from a pulse CSV instead of a random pulse
    #[serde(default)]
    init_pulse: Option<String>,
    #[serde(default)]
    noise: NoiseToggles,
}

fn builtin() -> String {
    "builtin".into()
}
fn node_a() -> Node {
    Node::A
}
fn ten() -> usize {
    10
}
fn default_dt() -> f64 {
    DEFAULT_DT_US
}
fn default_spread() -> f64 {
    2.0
}
fn default_iter() -> usize {
    3000
}
fn default_cap() -> f64 {
    DEFAULT_CAP_MHZ
}
fn default_target() -> f64 {
    1e-3
}

pub fn grape(g: &GlobalOpts, path: &Path) -> Result<(), CliError> {
    let mut cfg: GrapeConfig = toml::from_str(&read(path)?).map_err(|e| CliError::new("config", e.message().to_string()).with("field", "problem"))?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(c) = g.cutoff {
        cfg.cutoff = c;
    }
    let base = path.parent();
    let params = load_device(&cfg.device, base)?;
    let problem = aqec_problem(&params, cfg.node, cfg.cutoff, cfg.tau_us, &cfg.noise)?;
    let (init, init_text) = match &cfg.init_pulse {
        Some(p) => {
            let p = base.map(|b| b.join(p)).unwrap_or_else(|| PathBuf::from(p));
            let text = read(&p)?;
            (PulseInit::Pulse(ControlPulse::from_csv(&text)?), text)
        }
        None => (PulseInit::Seed { seed: cfg.seed, n_steps: cfg.n_steps, dt: cfg.dt_us, spread_mhz: cfg.spread_mhz }, String::new()),
    };
    let opts = GrapeOptions { max_iter: cfg.max_iter, cap_mhz: cfg.cap_mhz, target_infidelity: cfg.target_infidelity, ..Default::default() };
    let cfg_toml = toml::to_string(&cfg).map_err(|e| CliError::new("config", e.to_string()))?;
    let hash = config_hash(&[cfg_toml.as_bytes(), params.to_toml_string().as_bytes(), init_text.as_bytes()]);
    let res = optimize(&problem, init, &opts)?;

    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "grape".into());
    let mut art = Artifacts::new(&g.out_dir, hash);
    art.add_text(&format!("{stem}_pulse.csv"), &res.pulse.to_csv());
    let mut hist = String::from("iteration,fidelity\n");
    for (k, f) in res.history.iter().enumerate() {
        let _ = writeln!(hist, "{k},{f:.12e}");
    }
    art.add_text(&format!("{stem}_history.csv"), &hist);
    let times: Vec<f64> = (0..res.pulse.n_steps()).map(|k| (k as f64 + 0.5) * res.pulse.dt * 1e3).collect();
    let series = ResultSeries {
        name: format!("{stem}_pulse"),
        axis_name: "time_ns".into(),
        axis: times,
        columns: res.pulse.labels.iter().cloned().zip(res.pulse.amplitudes.iter().cloned()).collect(),
        fits: vec![],
        metadata: Default::default(),
    };
    let cols: Vec<&str> = res.pulse.labels.iter().map(|s| s.as_str()).collect();
    art.add_svg(&format!("{stem}_pulse.svg"), &plot::series_svg(&series, &cols, "amplitude (MHz)")?);
    println!("fidelity {:.6} after {} iterations (converged: {})", res.fidelity, res.iterations, res.converged);
    for p in art.write(g.force)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn wigner(g: &GlobalOpts, spec: &str, extent: f64, points: usize) -> Result<(), CliError> {
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(CliError::new("config", format!("extent {extent} must be positive")).with("field", "extent"));
    }
    if points < 2 {
        return Err(CliError::new("config", "need at least 2 points per axis").with("field", "points"));
    }
    let cutoff = g.cutoff.unwrap_or(10);
    let rho = state_spec::parse(spec, cutoff)?;
    let axis = linspace(-extent, extent, points);
    let grid = wigner_grid(&rho, &axis, &axis)?;
    let key = format!("state={spec}\ncutoff={cutoff}\nextent={extent}\npoints={points}\n");
    let stem: String = format!("wigner_{spec}").chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    let mut art = Artifacts::new(&g.out_dir, config_hash(&[key.as_bytes()]));
    art.add_text(&format!("{stem}.csv"), &grid.to_csv());
    art.add_svg(&format!("{stem}.svg"), &plot::wigner_svg(&grid, spec)?);
    println!("integral {:.6}, max |W| {:.6}", grid.integral(), grid.max_abs());
    for p in art.write(g.force)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn budget(params: &str, tau: f64) -> Result<(), CliError> {
    let p = load_device(params, None)?;
    print!("{}", budget_report(&p, tau)?);
    Ok(())
}

pub fn fit(path: &Path, model: &str, floor: f64, tau: Option<f64>, columns: &[String]) -> Result<(), CliError> {
    let bad = |m: String| CliError::new("config", m).with("path", path.display().to_string());
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rd.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if header.len() < 2 {
        return Err(bad("need an axis column and at least one value column".into()));
    }
    let mut data = vec![Vec::new(); header.len()];
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (k, v) in rec.iter().enumerate().take(header.len()) {
            data[k].push(v.parse::<f64>().map_err(|_| bad(format!("{v:?} in column {} is not a number", header[k])))?);
        }
    }
    let wanted: Vec<usize> = if columns.is_empty() {
        (1..header.len()).collect()
    } else {
        columns
            .iter()
            .map(|c| header.iter().position(|h| h == c).filter(|&i| i > 0).ok_or_else(|| bad(format!("no value column named {c:?}"))))
            .collect::<Result<_, _>>()?
    };
    let mut fitted = 0;
    for k in wanted {
        match fit_and_report(&data[0], &data[k], &header[k], model, floor, tau) {
            Ok((_, line)) => {
                println!("{line}");
                fitted += 1;
            }
            Err(e) if columns.is_empty() => println!("{:<16} skipped: {e}", header[k]),
            Err(e) => return Err(CliError::from(e).with("column", header[k].clone())),
        }
    }
    println!("{STDERR_NOTE}");
    if fitted == 0 {
        return Err(CliError::new("fit", "no column could be fitted"));
    }
    Ok(())
}
