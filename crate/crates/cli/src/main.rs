use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use aqec::adjoint::gradcheck;
use aqec::ansatz::{hamiltonian_distance, single_mode_block, BasisFamily};
use aqec::circuit::{build_circuit_model, simulate_circuit, synthesize_flux_waveforms, CircuitConfig, FluxParams};
use aqec::codes::{kl_check, sqrt3_construction, sqrt3_joint_model, wigner, Sqrt3Variant};
use aqec::config::{apply_search_keys, parse_grid, parse_key_values};
use aqec::dressed::{bandwidth_scan, fluxonium_spectrum, CouplerParams};
use aqec::hilbert::{dagger, fock_annihilation, outer, partial_trace_inner};
use aqec::lindblad::{propagate_code, uniform_grid, LindbladModel};
use aqec::objective::{average_fidelity, bloch_map, fidelity_curve, Branches, LogicalPair};
use aqec::optimizer::{train_with, SearchConfig};
use aqec::record::{CodeRecord, RunRecord};
use aqec::Error;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

const MHZ: f64 = 2.0 * PI;

#[derive(Parser)]
#[command(name = "aqec", version, about = "Search and verification tools for autonomous bosonic codes")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write a JSON provenance record of this run.
    #[arg(long, global = true)]
    run_record: Option<PathBuf>,
    /// RNG seed for commands that draw random numbers; echoed in the run record.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a code with the adjoint optimizer.
    Discover(DiscoverArgs),
    /// Fidelity curve of a stored code.
    Evaluate(EvaluateArgs),
    /// Wigner function of a code state.
    Wigner(WignerArgs),
    /// Single-state fidelity over the Bloch sphere.
    BlochMap(BlochArgs),
    /// Emission bandwidth scan of the three-level coupler.
    Bandwidth(BandwidthArgs),
    /// Fluxonium levels and matrix-element ratio.
    Fluxonium(FluxoniumArgs),
    /// Rotating-frame circuit simulation of the sqrt3 code.
    CircuitSim(CircuitArgs),
    /// Algebraic checks of the analytic sqrt3 code.
    VerifySqrt3(VariantArgs),
    /// Adjoint vs finite-difference gradients on a random ansatz.
    Gradcheck(GradcheckArgs),
    /// Lab-frame flux pump waveforms for the sqrt3 drives.
    ExportWaveforms(WaveformArgs),
}

#[derive(Args)]
struct DiscoverArgs {
    /// Key-value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cutoff: Option<usize>,
    /// Hamiltonian distance, or "all" for the all-to-all family.
    #[arg(long)]
    distance: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_final: Option<f64>,
    #[arg(long)]
    t_us: Option<f64>,
    #[arg(long)]
    steps_per_us: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long, default_value = "code.json")]
    out: PathBuf,
    /// Directory for checkpoint records.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    record: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value = "fidelity.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CodeSource {
    /// Stored code record.
    #[arg(long, conflicts_with = "variant")]
    record: Option<PathBuf>,
    /// Analytic sqrt3 code variant (1 or 2).
    #[arg(long)]
    variant: Option<u8>,
    #[arg(long, default_value_t = 20)]
    cutoff: usize,
}

#[derive(Args)]
struct WignerArgs {
    #[command(flatten)]
    source: CodeSource,
    /// 0, 1, or "code" for the maximally mixed code state.
    #[arg(long, default_value = "0")]
    state: String,
    #[arg(long, default_value = "-3.5:3.5:71")]
    x: String,
    #[arg(long, default_value = "-3.5:3.5:71")]
    p: String,
    #[arg(long, default_value = "wigner.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BlochArgs {
    #[command(flatten)]
    source: CodeSource,
    #[arg(long, default_value_t = 10.0)]
    t_us: f64,
    #[arg(long, default_value_t = 19)]
    ntheta: usize,
    #[arg(long, default_value_t = 36)]
    nphi: usize,
    #[arg(long, default_value_t = 2000)]
    steps_per_us: usize,
    #[arg(long, default_value = "bloch.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BandwidthArgs {
    #[arg(long, default_value = "0.5:2:16")]
    g2sq_over_g1sq: String,
    #[arg(long, default_value = "0.5:2:16")]
    d2_over_d1: String,
    #[arg(long, default_value_t = 1000.0)]
    delta1_mhz: f64,
    #[arg(long, default_value_t = 100.0)]
    g1_mhz: f64,
    #[arg(long, default_value_t = 6)]
    n_max: usize,
    #[arg(long, default_value = "bandwidth.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct FluxoniumArgs {
    #[arg(long, default_value_t = 0.95)]
    ec: f64,
    #[arg(long, default_value_t = 4.75)]
    ej: f64,
    #[arg(long, default_value_t = 0.65)]
    el: f64,
    #[arg(long, default_value_t = 0.0)]
    phi_ext: f64,
    #[arg(long, default_value_t = 100)]
    basis: usize,
}

#[derive(Args)]
struct CircuitArgs {
    #[arg(long, default_value_t = 1)]
    variant: u8,
    /// End time in μs (default: 0.3/κ).
    #[arg(long)]
    t_us: Option<f64>,
    #[arg(long, default_value_t = 6)]
    points: usize,
    #[arg(long)]
    drives_off: bool,
    /// Disable the b–c swap.
    #[arg(long)]
    omega_off: bool,
    #[arg(long, default_value = "circuit.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct VariantArgs {
    #[arg(long, default_value_t = 1)]
    variant: u8,
    #[arg(long, default_value_t = 20)]
    cutoff: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 3)]
    cutoff: usize,
    #[arg(long, default_value_t = 2)]
    distance: usize,
    #[arg(long, default_value_t = 0.4)]
    t_us: f64,
    #[arg(long, default_value_t = 80)]
    steps: usize,
    /// Check the plain rather than the modified fidelity.
    #[arg(long)]
    plain: bool,
}

#[derive(Args)]
struct WaveformArgs {
    #[arg(long, default_value_t = 1)]
    variant: u8,
    #[arg(long, default_value_t = 0.01)]
    t_us: f64,
    /// Samples per ns.
    #[arg(long, default_value_t = 50.0)]
    rate_per_ns: f64,
    #[arg(long, default_value = "waveforms.csv")]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

struct Run {
    record: RunRecord,
}

impl Run {
    fn write(&mut self, path: &Path, text: &str) -> Outcome {
        fs::write(path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
        self.record.outputs.push(path.display().to_string());
        Ok(())
    }

    fn config(&mut self, key: &str, v: impl serde::Serialize) {
        self.record.config.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_record(path: &Path) -> Result<CodeRecord, Failure> {
    Ok(CodeRecord::from_json(&read(path)?)?)
}

fn variant(v: u8) -> Result<Sqrt3Variant, Failure> {
    Ok(Sqrt3Variant::from_index(v)?)
}

/// Logical pair and, for joint-space records, the ancilla dimension to trace out.
fn load_code(src: &CodeSource) -> Result<(LogicalPair, Option<CodeRecord>), Failure> {
    match (&src.record, src.variant) {
        (Some(p), _) => {
            let r = load_record(p)?;
            Ok((r.pair()?, Some(r)))
        }
        (None, Some(v)) => Ok((sqrt3_construction(variant(v)?, src.cutoff)?.pair, None)),
        (None, None) => Err(Failure::Invalid("give --record or --variant".into())),
    }
}

fn discover(a: &DiscoverArgs, seed: Option<u64>, run: &mut Run) -> Outcome {
    let mut kv = match &a.config {
        Some(p) => parse_key_values(&read(p)?)?,
        None => Default::default(),
    };
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.insert(k.into(), (0, v));
        }
    };
    set("cutoff", a.cutoff.map(|v| v.to_string()));
    set("distance", a.distance.clone());
    set("iters", a.iters.map(|v| v.to_string()));
    set("seed", seed.map(|v| v.to_string()));
    set("lr", a.lr.map(|v| format!("{v:?}")));
    set("lr_final", a.lr_final.map(|v| format!("{v:?}")));
    set("t_us", a.t_us.map(|v| format!("{v:?}")));
    set("steps_per_us", a.steps_per_us.map(|v| v.to_string()));
    set("checkpoint_every", a.checkpoint_every.map(|v| v.to_string()));
    let config = apply_search_keys(&SearchConfig::default(), &kv)?;
    config.validate()?;
    run.config("search", &config);
    run.record.seed = Some(config.seed);
    if let Some(dir) = &a.checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    let mut written = Vec::new();
    let mut io_error = None;
    let result = train_with(&config, |c| {
        log::info!("iteration {} objective {:.6}", c.iteration, c.objective);
        if let Some(dir) = &a.checkpoint_dir {
            let path = dir.join(format!("checkpoint_{:06}.json", c.iteration));
            match serde_json::to_string(c).map(|s| fs::write(&path, s)) {
                Ok(Ok(())) => written.push(path.display().to_string()),
                Ok(Err(e)) => io_error = Some(e.to_string()),
                Err(e) => io_error = Some(e.to_string()),
            }
        }
    })?;
    run.record.outputs.extend(written);
    if let Some(e) = io_error {
        return Err(Failure::Invalid(format!("checkpoint write failed: {e}")));
    }
    let record = CodeRecord::from_search(&result);
    run.write(&a.out, &record.to_json()?)?;
    let mut hist = String::from("iteration,objective\n");
    for (k, f) in result.fidelity_history.iter().enumerate() {
        let _ = writeln!(hist, "{k},{f:.12}");
    }
    run.write(&a.out.with_extension("history.csv"), &hist)?;
    println!(
        "best iteration {} objective {:.6} fidelity {:.6} break-even {:.6} ({:.1} s)",
        result.best_iteration, result.objective, result.fidelity, result.break_even, result.wall_time
    );
    if let Some(msg) = result.aborted {
        return Err(Failure::Numerical(format!("training stopped early: {msg}")));
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs, run: &mut Run) -> Outcome {
    let rec = load_record(&a.record)?;
    if a.points == 0 || !(a.tmax > 0.0) {
        return Err(Failure::Invalid("need --points >= 1 and --tmax > 0".into()));
    }
    let model = rec.model()?;
    let pair = rec.pair()?;
    let again = rec.reevaluate()?;
    println!("recorded F(T={}) = {:.12}, re-evaluated {:.12}", rec.t_final, rec.fidelity, again);
    let spi = ((a.tmax / a.points as f64) * rec.nsteps as f64 / rec.t_final).ceil().max(1.0) as usize;
    let traj = propagate_code(&model, &pair, &uniform_grid(a.tmax, a.points), spi)?;
    let curve = fidelity_curve(&pair, &traj, rec.kappa);
    let mut csv = String::from("t_us,fidelity,break_even\n");
    for i in 0..curve.tgrid.len() {
        let _ = writeln!(csv, "{},{:.12},{:.12}", curve.tgrid[i], curve.values[i], curve.baseline[i]);
    }
    run.config("record", a.record.display().to_string());
    run.write(&a.out, &csv)
}

fn wigner_cmd(a: &WignerArgs, run: &mut Run) -> Outcome {
    let (pair, rec) = load_code(&a.source)?;
    let rho = match a.state.as_str() {
        "0" => outer(&pair.psi0, &pair.psi0),
        "1" => outer(&pair.psi1, &pair.psi1),
        "code" => pair.code_state(),
        s => return Err(Failure::Invalid(format!("--state must be 0, 1 or code, not {s}"))),
    };
    let rho = if rec.is_some() { partial_trace_inner(&rho, 2)? } else { rho };
    let grid = wigner(&rho, &parse_grid(&a.x)?, &parse_grid(&a.p)?)?;
    if let Some(w) = &grid.warning {
        log::warn!("{w}");
    }
    let mut csv = String::from("x,p,w\n");
    for (i, x) in grid.xs.iter().enumerate() {
        for (j, p) in grid.ps.iter().enumerate() {
            let _ = writeln!(csv, "{x},{p},{:.12e}", grid.values[[i, j]]);
        }
    }
    run.write(&a.out, &csv)
}

fn code_model(src: &CodeSource) -> Result<(LindbladModel, LogicalPair, f64), Failure> {
    match (&src.record, src.variant) {
        (Some(p), _) => {
            let r = load_record(p)?;
            Ok((r.model()?, r.pair()?, r.kappa))
        }
        (None, Some(v)) => {
            let (m, p) = sqrt3_joint_model(variant(v)?, src.cutoff, 10.0 * MHZ, true, 0.1 * MHZ, 20.0 * MHZ)?;
            Ok((m, p, 0.1 * MHZ))
        }
        (None, None) => Err(Failure::Invalid("give --record or --variant".into())),
    }
}

fn bloch_cmd(a: &BlochArgs, run: &mut Run) -> Outcome {
    let (model, pair, _) = code_model(&a.source)?;
    let steps = ((a.t_us * a.steps_per_us as f64).ceil() as usize).max(1);
    let traj = propagate_code(&model, &pair, &[0.0, a.t_us], steps)?;
    let map = bloch_map(&pair, Branches::last(&traj), a.ntheta, a.nphi)?;
    let mut csv = String::from("theta,phi,fidelity\n");
    for (i, th) in map.thetas.iter().enumerate() {
        for (j, ph) in map.phis.iter().enumerate() {
            let _ = writeln!(csv, "{th:.8e},{ph:.8e},{:.8e}", map.values[[i, j]]);
        }
    }
    println!(
        "sphere mean {:.6}, closed-form average {:.6}",
        map.sphere_mean(),
        average_fidelity(&pair, Branches::last(&traj))
    );
    run.write(&a.out, &csv)
}

fn bandwidth_cmd(a: &BandwidthArgs, run: &mut Run) -> Outcome {
    let base = CouplerParams { delta1: a.delta1_mhz * MHZ, delta2: a.delta1_mhz * MHZ, g1: a.g1_mhz * MHZ, g2: a.g1_mhz * MHZ, n_max: a.n_max };
    let scan = bandwidth_scan(&base, &parse_grid(&a.g2sq_over_g1sq)?, &parse_grid(&a.d2_over_d1)?)?;
    let mut csv = String::from("g2sq_over_g1sq,d2_over_d1,log10_bandwidth\n");
    for (i, g) in scan.g2sq_over_g1sq.iter().enumerate() {
        for (j, d) in scan.d2_over_d1.iter().enumerate() {
            let _ = writeln!(csv, "{g},{d},{:.9}", scan.log10_bandwidth[[i, j]]);
        }
    }
    run.write(&a.out, &csv)
}

fn fluxonium_cmd(a: &FluxoniumArgs) -> Outcome {
    let s = fluxonium_spectrum(a.ec, a.ej, a.el, a.phi_ext, a.basis)?;
    println!("{}", serde_json::to_string_pretty(&s)?);
    Ok(())
}

fn circuit_cmd(a: &CircuitArgs, run: &mut Run) -> Outcome {
    let mut cfg = CircuitConfig::desk_scale();
    cfg.drives_on = !a.drives_off;
    if a.omega_off {
        cfg.omega = 0.0;
    }
    let c = sqrt3_construction(variant(a.variant)?, cfg.levels)?;
    let model = build_circuit_model(&cfg, &c.h_tilde_with_stabilization())?;
    let t = a.t_us.unwrap_or(cfg.reference_time());
    if a.points == 0 || !(t > 0.0) {
        return Err(Failure::Invalid("need --points >= 1 and a positive end time".into()));
    }
    let r = simulate_circuit(&model, &c.pair, &uniform_grid(t, a.points), cfg.kappa)?;
    let mut csv = String::from("t_us,fidelity,break_even\n");
    for i in 0..r.curve.tgrid.len() {
        let _ = writeln!(csv, "{},{:.12},{:.12}", r.curve.tgrid[i], r.curve.values[i], r.curve.baseline[i]);
    }
    run.config("circuit", &cfg);
    run.write(&a.out, &csv)?;
    let report = json!({ "config": cfg, "steps": r.steps, "dim": r.dim, "chi": r.chi,
        "trace_error": r.trace_error, "hermiticity_error": r.hermiticity_error, "curve": r.curve });
    run.write(&a.out.with_extension("json"), &serde_json::to_string_pretty(&report)?)
}

fn verify_cmd(a: &VariantArgs) -> Outcome {
    let c = sqrt3_construction(variant(a.variant)?, a.cutoff)?;
    let mut ok = true;
    println!("constraint residuals:");
    for (name, r) in c.coefficients.constraint_residuals() {
        ok &= r.abs() < 1e-12;
        println!("  {name:<22} {r:+.3e}");
    }
    let an = fock_annihilation(a.cutoff)?;
    let kl = kl_check(&c.pair, std::slice::from_ref(&an), 1e-10)?;
    println!("Knill-Laflamme max residual {:.3e} ({})", kl.max_residual, if kl.pass { "pass" } else { "fail" });
    let n = dagger(&an).dot(&an);
    let mean = [&c.pair.psi0, &c.pair.psi1].map(|p| aqec::hilbert::expectation(p, &n, p).re);
    println!("mean photon numbers {:.15} {:.15}", mean[0], mean[1]);
    let h = c.h_tilde_with_stabilization();
    let d = hamiltonian_distance(&h);
    println!("hamiltonian distance {d}");
    for ((m, k), v) in c.locality_entries() {
        println!("  |H~({m},{k})| = {v:.3e}");
    }
    ok &= d == 2 && single_mode_block(&aqec::ansatz::lift_to_joint(&h)).is_ok();
    if ok {
        Ok(())
    } else {
        Err(Failure::Numerical("sqrt3 checks failed".into()))
    }
}

fn gradcheck_cmd(a: &GradcheckArgs, seed: u64, run: &mut Run) -> Outcome {
    let cfg = SearchConfig {
        cutoff: a.cutoff,
        family: BasisFamily::Distance { d: a.distance },
        seed,
        iters: 0,
        ..SearchConfig::default()
    };
    cfg.validate()?;
    let basis = cfg.basis()?;
    let (alpha, pair) = aqec::optimizer::initial_point(&cfg, &basis)?;
    let model = aqec::optimizer::search_model(&basis, alpha, cfg.kappa(), cfg.kappa_q())?;
    let report = gradcheck(&model, &pair, a.t_us, a.steps, !a.plain)?;
    for e in &report.entries {
        if !e.pass {
            println!("FAIL {} adjoint {:.9e} fd {:.9e}", e.name, e.adjoint, e.finite_difference);
        }
    }
    println!("{} components, max relative error {:.3e}", report.entries.len(), report.max_rel_error);
    run.record.seed = Some(seed);
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Numerical(report.note.unwrap_or_else(|| "gradient mismatch".into())))
    }
}

fn waveform_cmd(a: &WaveformArgs, run: &mut Run) -> Outcome {
    if !(a.t_us > 0.0 && a.rate_per_ns > 0.0) || a.t_us * a.rate_per_ns > 1e8 {
        return Err(Failure::Invalid("need a positive duration and rate, at most 1e8 samples".into()));
    }
    let cfg = CircuitConfig::desk_scale();
    let c = sqrt3_construction(variant(a.variant)?, cfg.levels)?;
    let model = build_circuit_model(&cfg, &c.h_tilde_with_stabilization())?;
    let n = (a.t_us * 1000.0 * a.rate_per_ns).ceil() as usize;
    let t: Vec<f64> = (0..=n).map(|k| k as f64 / (1000.0 * a.rate_per_ns)).collect();
    let w = synthesize_flux_waveforms(&model.drives, &FluxParams::default(), &t)?;
    let mut csv = String::from("t_us,eps1,eps2\n");
    for i in 0..w.t.len() {
        let _ = writeln!(csv, "{},{:.12e},{:.12e}", w.t[i], w.eps1[i], w.eps2[i]);
    }
    run.write(&a.out, &csv)
}

fn dispatch(cli: &Cli, run: &mut Run) -> Outcome {
    run.record.seed = cli.seed;
    match &cli.command {
        Command::Discover(a) => discover(a, cli.seed, run),
        Command::Evaluate(a) => evaluate(a, run),
        Command::Wigner(a) => wigner_cmd(a, run),
        Command::BlochMap(a) => bloch_cmd(a, run),
        Command::Bandwidth(a) => bandwidth_cmd(a, run),
        Command::Fluxonium(a) => fluxonium_cmd(a),
        Command::CircuitSim(a) => circuit_cmd(a, run),
        Command::VerifySqrt3(a) => verify_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a, cli.seed.unwrap_or(0), run),
        Command::ExportWaveforms(a) => waveform_cmd(a, run),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Discover(_) => "discover",
        Command::Evaluate(_) => "evaluate",
        Command::Wigner(_) => "wigner",
        Command::BlochMap(_) => "bloch-map",
        Command::Bandwidth(_) => "bandwidth",
        Command::Fluxonium(_) => "fluxonium",
        Command::CircuitSim(_) => "circuit-sim",
        Command::VerifySqrt3(_) => "verify-sqrt3",
        Command::Gradcheck(_) => "gradcheck",
        Command::ExportWaveforms(_) => "export-waveforms",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let mut run = Run { record: RunRecord::new(command_name(&cli.command)) };
    let start = Instant::now();
    let outcome = dispatch(&cli, &mut run);
    let mut timings = BTreeMap::new();
    timings.insert("wall_s".to_string(), start.elapsed().as_secs_f64());
    run.record.timings = timings;
    if let Some(path) = &cli.run_record {
        let text = serde_json::to_string_pretty(&run.record).unwrap_or_default();
        if let Err(e) = fs::write(path, text) {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}
