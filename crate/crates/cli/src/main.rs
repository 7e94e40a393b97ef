//! `ghzion` command-line front end.
//!
//! Exit codes: 0 pass, 1 physics check failed, 2 usage or input error.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ghzion::protocol::{
    prepare_with, ramsey_scan, verify_trajectory, PrepareOptions, RamseyConfig, StepResidual,
};
use ghzion::pulses::dense_discrepancy;
use ghzion::seqlang::{self, Severity, TraceEntry};
use ghzion::{Complex64, Error, Frame, Mode, PulseSpec, StateVector, TrapParams};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

const FIDELITY_TOL: f64 = 1e-9;
const RAMSEY_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-10;
const SPOT_CHECK_TOL: f64 = 1e-12;

#[derive(Parser)]
#[command(name = "ghzion", version, about = "Deterministic N-ion GHZ preparation and entangled Ramsey simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the five-pulse GHZ preparation and report its fidelity.
    Prepare(PrepareArgs),
    /// Scan the Ramsey fringe of ion N over a detuning grid.
    RamseyScan(ScanArgs),
    /// Execute a .pseq pulse program.
    Run(RunArgs),
    /// Check every preparation step against its closed form for a range of N.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct TrapArgs {
    /// Trap (axial) frequency nu.
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Lamb-Dicke parameter eta.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Base Rabi frequency Omega_0.
    #[arg(long, default_value_t = 1.0)]
    rabi: f64,
    /// Highest Fock level kept.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    nmax: u32,
    /// Pulse model: ideal or physical.
    #[arg(long, default_value = "ideal")]
    mode: Mode,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write data (trace or scan) to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the final state as JSON to this file.
    #[arg(long, value_name = "PATH")]
    dump_state: Option<PathBuf>,
    /// Seed for random spot checks.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PrepareArgs {
    /// Number of ions N.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=20))]
    ions: u32,
    #[command(flatten)]
    trap: TrapArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Atomic resonance omega_0; enables reporting phi = N omega_0 t5.
    #[arg(long)]
    omega0: Option<f64>,
}

#[derive(Args)]
struct ScanArgs {
    /// Number of ions N.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=20))]
    ions: u32,
    #[command(flatten)]
    trap: TrapArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Lower end of the detuning grid [default: -2 pi / (N T)].
    #[arg(long, allow_negative_numbers = true)]
    delta_min: Option<f64>,
    /// Upper end of the detuning grid [default: 2 pi / (N T)].
    #[arg(long, allow_negative_numbers = true)]
    delta_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Free-precession time T.
    #[arg(long, default_value_t = 1.0)]
    wait: f64,
    /// Also apply the detuning phase during pulses (diagnostic).
    #[arg(long)]
    detune_during_pulses: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Program file (.pseq).
    file: PathBuf,
    /// Ion count when the program has no `ions` header.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=20))]
    ions: u32,
    #[command(flatten)]
    trap: TrapArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Smallest N checked.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=20))]
    min_ions: u32,
    /// Largest N checked.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=20))]
    max_ions: u32,
    #[command(flatten)]
    trap: TrapArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Sensitivity hook: laser phase on the third pulse.
    #[arg(long, hide = true, allow_negative_numbers = true)]
    tamper_phase: Option<f64>,
    /// Number of random dense-oracle spot checks when --seed is given.
    #[arg(long, default_value_t = 20)]
    spot_checks: usize,
}

/// A run that ends with a nonzero exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Leakage { .. } => 1,
            Error::AtStep { source, .. } if matches!(**source, Error::Leakage { .. }) => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult = Result<bool, Failure>;

fn params(n_ions: u32, trap: &TrapArgs) -> Result<TrapParams, Failure> {
    let p = TrapParams {
        n_ions: n_ions as usize,
        trap_freq: trap.nu,
        lamb_dicke: trap.eta,
        base_rabi: trap.rabi,
        fock_cutoff: trap.nmax as usize,
    };
    p.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(p)
}

fn write_data(out: &OutputArgs, text: &str) -> Result<(), Failure> {
    match &out.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dump_state(out: &OutputArgs, state: &StateVector) -> Result<(), Failure> {
    if let Some(path) = &out.dump_state {
        std::fs::write(path, state.to_json() + "\n")
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn step_table(trace: &[TraceEntry]) -> String {
    let mut s = String::from("step  clock                  norm               P(n=0..nmax)\n");
    for e in trace {
        let fock: Vec<String> = e.fock_populations.iter().map(|p| format!("{p:.12}")).collect();
        writeln!(s, "{:>4}  {:<21.15e}  {:<17.15}  {}", e.step, e.clock, e.norm, fock.join(" ")).unwrap();
    }
    s
}

fn trace_csv(trace: &[TraceEntry]) -> String {
    let width = trace.first().map_or(0, |e| e.fock_populations.len());
    let mut s = String::from("step,line,statement,clock,norm");
    for n in 0..width {
        write!(s, ",p_n{n}").unwrap();
    }
    s.push('\n');
    for e in trace {
        write!(s, "{},{},{},{:.14e},{:.14e}", e.step, e.line, e.statement, e.clock, e.norm).unwrap();
        for p in &e.fock_populations {
            write!(s, ",{p:.14e}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn trace_text(trace: &[TraceEntry], format: Format) -> String {
    match format {
        Format::Csv => trace_csv(trace),
        Format::Json => serde_json::to_string_pretty(trace).expect("trace serializes") + "\n",
    }
}

fn cmd_prepare(args: &PrepareArgs) -> CliResult {
    let p = params(args.ions, &args.trap)?;
    if args.omega0.is_some_and(|w| !w.is_finite()) {
        return Err(Failure::usage("--omega0 must be finite"));
    }
    let opts = PrepareOptions { mode: args.trap.mode, omega0: args.omega0, ..PrepareOptions::default() };
    let report = prepare_with(p, &opts)?;
    // The canonical program supplies the statement labels for the trace.
    let canonical = seqlang::SequenceProgram::canonical();
    let trace: Vec<TraceEntry> = report
        .step_states
        .iter()
        .zip(&canonical.steps)
        .enumerate()
        .map(|(k, (s, step))| TraceEntry {
            step: k + 1,
            line: k + 1,
            statement: step.to_string(),
            clock: s.clock(),
            norm: s.norm(),
            fock_populations: s.fock_populations(),
        })
        .collect();
    println!("fidelity: {:.12}", report.fidelity_vs_target);
    if let Some(phi) = report.phi_schroedinger {
        println!("phi: {phi:.12} (mod 2pi: {:.12})", phi.rem_euclid(2.0 * PI));
    }
    print!("{}", step_table(&trace));
    if args.out.output.is_some() {
        write_data(&args.out, &trace_text(&trace, args.out.format))?;
    }
    dump_state(&args.out, &report.final_state)?;
    Ok(report.fidelity_vs_target >= 1.0 - FIDELITY_TOL)
}

fn cmd_ramsey_scan(args: &ScanArgs) -> CliResult {
    let p = params(args.ions, &args.trap)?;
    if !(args.wait.is_finite() && args.wait >= 0.0) {
        return Err(Failure::usage("--wait must be a finite, non-negative time"));
    }
    if args.points == 0 {
        return Err(Failure::usage("--points must be at least 1"));
    }
    let span = if args.wait > 0.0 { 2.0 * PI / (p.n_ions as f64 * args.wait) } else { 1.0 };
    let lo = args.delta_min.unwrap_or(-span);
    let hi = args.delta_max.unwrap_or(span);
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Failure::usage(format!("invalid detuning range [{lo}, {hi}]")));
    }
    let mut config = RamseyConfig::new(p, args.wait, RamseyConfig::linear_grid(lo, hi, args.points));
    config.mode = args.trap.mode;
    config.detuning_during_pulses = args.detune_during_pulses;
    let result = ramsey_scan(&config)?;
    let text = match args.out.format {
        Format::Csv => result.to_csv(),
        Format::Json => serde_json::to_string_pretty(&result).expect("scan serializes") + "\n",
    };
    write_data(&args.out, &text)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("max_abs_error: {:e}", result.max_abs_error);
    if args.out.dump_state.is_some() {
        let last = *config.detuning_grid.last().expect("grid is non-empty");
        let run = ghzion::protocol::ramsey_run(&config, last)?;
        dump_state(&args.out, &run.state)?;
    }
    Ok(result.max_abs_error <= RAMSEY_TOL)
}

fn cmd_run(args: &RunArgs) -> CliResult {
    let source = std::fs::read_to_string(&args.file)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", args.file.display())))?;
    let name = args.file.display();
    let parsed = match seqlang::parse(&source) {
        Ok(p) => p,
        Err(diags) => {
            for d in &diags {
                eprintln!("{name}:{d}");
            }
            let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
            return Err(Failure::usage(format!("{errors} error(s) in {name}")));
        }
    };
    for w in &parsed.warnings {
        eprintln!("{name}:{w}");
    }
    let base = params(args.ions, &args.trap)?;
    let run = seqlang::execute(&parsed.program, base, None).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{name}:{}", f.message);
        f
    })?;
    print!("{}", step_table(&run.trace));
    if args.out.output.is_some() {
        write_data(&args.out, &trace_text(&run.trace, args.out.format))?;
    }
    dump_state(&args.out, &run.final_state)?;
    Ok(true)
}

#[derive(Serialize)]
struct VerifyRow {
    n_ions: usize,
    #[serde(flatten)]
    residual: StepResidual,
}

fn spot_check(rng: &mut StdRng, max_ions: usize, trap: &TrapArgs) -> Result<f64, Failure> {
    let n = rng.random_range(1..=max_ions.min(6));
    let n_max = (trap.nmax as usize).min(4);
    let p = params(n as u32, &TrapArgs { nmax: n_max as u32, ..trap.clone() })?;
    let ion = rng.random_range(1..=n);
    let mode = if rng.random_bool(0.5) { Mode::Ideal } else { Mode::Physical };
    let spec = match rng.random_range(0..5) {
        0 => PulseSpec::carrier_pi_half(ion),
        1 => PulseSpec::jc_pi(ion, rng.random_range(0..n_max), mode),
        2 => PulseSpec::dispersive_single(ion, rng.random_range(1..=n_max), mode),
        3 => PulseSpec::dispersive_collective(rng.random_range(1..=n_max), mode),
        _ => PulseSpec::wait(rng.random_range(0.0..5.0)),
    }
    .with_phase(rng.random_range(-PI..PI));
    let mut amps: Vec<Complex64> = (0..p.dim())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    let clock = rng.random_range(0.0..20.0);
    let state = StateVector::from_amplitudes(p, Frame::RESONANT, clock, amps)?;
    Ok(dense_discrepancy(&state, &spec)?)
}

fn cmd_verify(args: &VerifyArgs) -> CliResult {
    if args.min_ions > args.max_ions {
        return Err(Failure::usage("--min-ions exceeds --max-ions"));
    }
    let mut rows = Vec::new();
    let mut last_state = None;
    for n in args.min_ions..=args.max_ions {
        let p = params(n, &args.trap)?;
        let mut opts = PrepareOptions { mode: args.trap.mode, ..PrepareOptions::default() };
        if let Some(phase) = args.tamper_phase {
            opts.laser_phases[2] = phase;
        }
        let report = prepare_with(p, &opts)?;
        for r in verify_trajectory(&report)? {
            rows.push(VerifyRow { n_ions: n as usize, residual: r });
        }
        last_state = Some(report.final_state);
    }
    let mut ok = true;
    println!("   N  step  time                   infidelity  max_amp_error");
    for row in &rows {
        let r = &row.residual;
        let pass = r.infidelity <= RESIDUAL_TOL && r.max_amp_error <= RESIDUAL_TOL;
        ok &= pass;
        println!(
            "{:>4}  {:>4}  {:<21.15e}  {:<10.3e}  {:<10.3e}  {}",
            row.n_ions,
            r.step,
            r.time,
            r.infidelity,
            r.max_amp_error,
            if pass { "ok" } else { "FAIL" }
        );
    }
    if let Some(seed) = args.out.seed {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..args.spot_checks {
            worst = worst.max(spot_check(&mut rng, args.max_ions as usize, &args.trap)?);
        }
        let pass = worst <= SPOT_CHECK_TOL;
        ok &= pass;
        println!(
            "dense oracle spot checks (seed {seed}, {}): max error {worst:.3e} {}",
            args.spot_checks,
            if pass { "ok" } else { "FAIL" }
        );
    }
    if args.out.output.is_some() {
        let text = match args.out.format {
            Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
            Format::Csv => {
                let mut s = String::from("n_ions,step,time,infidelity,max_amp_error\n");
                for row in &rows {
                    let r = &row.residual;
                    writeln!(s, "{},{},{:.14e},{:.14e},{:.14e}", row.n_ions, r.step, r.time, r.infidelity, r.max_amp_error)
                        .unwrap();
                }
                s
            }
        };
        write_data(&args.out, &text)?;
    }
    if let Some(state) = &last_state {
        dump_state(&args.out, state)?;
    }
    println!("{}", if ok { "all residuals within tolerance" } else { "residual check failed" });
    Ok(ok)
}

fn exists_parent(path: &Path) -> bool {
    path.parent().is_none_or(|d| d.as_os_str().is_empty() || d.is_dir())
}

fn check_paths(out: &OutputArgs) -> Result<(), Failure> {
    for p in out.output.iter().chain(&out.dump_state) {
        if !exists_parent(p) {
            return Err(Failure::usage(format!("directory for {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Prepare(a) => check_paths(&a.out).and_then(|_| cmd_prepare(a)),
        Command::RamseyScan(a) => check_paths(&a.out).and_then(|_| cmd_ramsey_scan(a)),
        Command::Run(a) => check_paths(&a.out).and_then(|_| cmd_run(a)),
        Command::Verify(a) => check_paths(&a.out).and_then(|_| cmd_verify(a)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
