//! `sparse-precoder` command-line driver.
//!
//! Every subcommand starts from a preset, overlays the optional TOML config
//! file and then applies the command-line flags, so flags always win.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sparse_precoder::constellation::Modulation;
use sparse_precoder::constraints::{assemble_qp, constraint_region, unstack, RowLayout};
use sparse_precoder::io::{
    write_channel, write_complex_vector, write_constraint_system, write_signatures, write_trace,
};
use sparse_precoder::sim::{
    draw_slot, precode, prepare_point, run_ber_experiment, run_power_experiment,
    run_uncertainty_experiment, run_validation, write_results_csv, write_slot_log,
    ExperimentConfig, ExperimentOutput, RunMetadata, Scheme,
};
use sparse_precoder::solver::{per_iteration_counters, solve};

#[derive(Parser)]
#[command(name = "sparse-precoder", version, about = "SEP-constrained precoding for sparse multicarrier CDMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean transmit power against the number of users.
    PowerSweep(RunArgs),
    /// Mean transmit power against the SEP target.
    SepSweep(RunArgs),
    /// Power, SEP and BER for each SEP target.
    BerCurve(RunArgs),
    /// BER against channel-estimation error at a fixed SEP target.
    UncertaintySweep(RunArgs),
    /// Solves a single slot and dumps its inputs, constraint system, trace
    /// and solution.
    SolveOne(SolveOneArgs),
    /// Runs the invariant suite on a few slots.
    Validate(ValidateArgs),
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// TOML file with `ExperimentConfig` fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of subcarriers N.
    #[arg(long)]
    n: Option<usize>,
    /// User counts K, comma separated.
    #[arg(long, value_delimiter = ',')]
    users: Option<Vec<usize>>,
    /// Nonzeros per signature L, comma separated.
    #[arg(long, value_delimiter = ',')]
    nonzeros: Option<Vec<usize>>,
    /// Constellation order, 4 or 16.
    #[arg(long)]
    modulation: Option<u32>,
    /// Use the replica-constellation schemes by default.
    #[arg(long)]
    replica: Option<bool>,
    /// SEP targets, comma separated.
    #[arg(long, value_delimiter = ',')]
    pe: Option<Vec<f64>>,
    #[arg(long)]
    n0: Option<f64>,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long)]
    signature_realizations: Option<usize>,
    /// Schemes: proposed, zf, rzf, zf-thp, opt-thp.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Channel-estimation error standard deviations, comma separated.
    #[arg(long, value_delimiter = ',')]
    sigma_e: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_draws: Option<usize>,
    #[arg(long)]
    calibration_slots: Option<usize>,
    #[arg(long)]
    opt_thp_beta: Option<f64>,
    /// Spread slots across threads.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    rel_tolerance: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Result CSV; metadata goes to `<out>.meta.toml`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional per-slot power log.
    #[arg(long)]
    slot_log: Option<PathBuf>,
}

#[derive(Args)]
struct SolveOneArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Slot index within the first operating point.
    #[arg(long, default_value_t = 0)]
    slot: usize,
    /// Directory receiving the dumped files.
    #[arg(long, default_value = "solve-one")]
    dump: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Slots examined by the per-slot checks.
    #[arg(long, default_value_t = 20)]
    check_slots: usize,
}

fn preset(command: &Command) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    match command {
        Command::PowerSweep(_) => cfg.users = vec![8, 16, 24, 32],
        Command::SepSweep(_) => cfg.pe_targets = vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
        Command::BerCurve(_) => {
            cfg.pe_targets = vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
        }
        Command::UncertaintySweep(_) => {
            cfg.pe_targets = vec![1e-2];
            cfg.sigma_e = vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.3];
        }
        Command::SolveOne(_) => cfg.slots = 10,
        Command::Validate(_) => {
            cfg.n_subcarriers = 8;
            cfg.users = vec![6];
            cfg.nonzeros = vec![3];
            cfg.slots = 20;
            cfg.signature_realizations = 2;
        }
    }
    cfg
}

fn overlay(base: &mut toml::Table, file: toml::Table) {
    for (key, value) in file {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(f)) => overlay(b, f),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn load_config(command: &Command, args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = preset(command);
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        let mut base: toml::Table = toml::from_str(&cfg.to_toml())?;
        overlay(&mut base, file);
        cfg = ExperimentConfig::from_toml(&toml::to_string(&base)?)?;
    }
    if let Some(v) = args.n {
        cfg.n_subcarriers = v;
    }
    if let Some(v) = &args.users {
        cfg.users = v.clone();
    }
    if let Some(v) = &args.nonzeros {
        cfg.nonzeros = v.clone();
    }
    if let Some(v) = args.modulation {
        cfg.modulation = Modulation::try_from(v)?;
    }
    if let Some(v) = args.replica {
        cfg.replica = v;
    }
    if let Some(v) = &args.pe {
        cfg.pe_targets = v.clone();
    }
    if let Some(v) = args.n0 {
        cfg.n0 = v;
    }
    if let Some(v) = args.slots {
        cfg.slots = v;
    }
    if let Some(v) = args.signature_realizations {
        cfg.signature_realizations = v;
    }
    if let Some(v) = &args.schemes {
        cfg.schemes = v.clone();
    }
    if let Some(v) = &args.sigma_e {
        cfg.sigma_e = v.clone();
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.noise_draws {
        cfg.noise_draws = v;
    }
    if let Some(v) = args.calibration_slots {
        cfg.calibration_slots = v;
    }
    if args.opt_thp_beta.is_some() {
        cfg.opt_thp_beta = args.opt_thp_beta;
    }
    if args.parallel {
        cfg.parallel = true;
    }
    if let Some(v) = args.max_iterations {
        cfg.solver.max_iterations = v;
    }
    if let Some(v) = args.rel_tolerance {
        cfg.solver.rel_tolerance = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.toml");
    PathBuf::from(name)
}

fn write_run(name: &str, cfg: &ExperimentConfig, args: &RunArgs, output: &ExperimentOutput) -> Result<()> {
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    write_results_csv(&output.rows, create(&out)?)?;
    let meta = RunMetadata::new(name, cfg, &output.rows);
    let mut w = create(&sidecar(&out))?;
    w.write_all(meta.to_toml().as_bytes())?;
    w.flush()?;
    if let Some(path) = &args.slot_log {
        write_slot_log(&output.slot_log, create(path)?)?;
    }
    for r in &output.rows {
        let mut line = format!(
            "{:>9} K={:<3} L={:<3} Pe={:<8.1e} power={:8.3} dB",
            r.scheme.name(),
            r.k,
            r.l,
            r.pe_target,
            r.power_db
        );
        if let Some(s) = r.sigma_e {
            line.push_str(&format!(" sigma_e={s}"));
        }
        if let Some(ber) = r.ber {
            line.push_str(&format!(" ber={ber:.3e}"));
        }
        eprintln!("{line}");
    }
    eprintln!("wrote {} and {}", out.display(), sidecar(&out).display());
    Ok(())
}

fn solve_one(cfg: &ExperimentConfig, args: &SolveOneArgs) -> Result<()> {
    if args.slot >= cfg.slots {
        bail!("slot {} is outside the {} configured slots", args.slot, cfg.slots);
    }
    let (k, l, pe) = (cfg.users[0], cfg.nonzeros[0], cfg.pe_targets[0]);
    let setup = prepare_point(cfg, k, l, pe, &[Scheme::Proposed])?;
    let slot = draw_slot(cfg, &setup, args.slot)?;
    let regions = slot
        .symbols
        .iter()
        .enumerate()
        .map(|(u, &s)| constraint_region(u, s, &setup.standard))
        .collect::<sparse_precoder::Result<Vec<_>>>()?;
    let system = assemble_qp(&slot.h, &regions, RowLayout::for_spec(&setup.standard))?;
    let mut opts = cfg.solver.clone();
    opts.record_violation = true;
    let res = solve(&system, &opts)?;

    fs::create_dir_all(&args.dump)?;
    let signature = &setup.signatures[args.slot / cfg.slots_per_signature()];
    write_signatures(signature, create(&args.dump.join("signatures.txt"))?)?;
    write_channel(&slot.h, create(&args.dump.join("channel.txt"))?)?;
    write_constraint_system(&system, create(&args.dump.join("system.txt"))?)?;
    write_trace(&res, per_iteration_counters(&system), create(&args.dump.join("trace.csv"))?)?;
    write_complex_vector(&unstack(&res.x), create(&args.dump.join("x.txt"))?)?;
    let mut sym = create(&args.dump.join("symbols.txt"))?;
    for (u, s) in slot.symbols.iter().enumerate() {
        writeln!(sym, "{u} {s}")?;
    }
    sym.flush()?;

    println!("K={k} N={} L={l} Pe={pe} slot={}", cfg.n_subcarriers, args.slot);
    println!(
        "proposed: power={:.6} ({:.3} dB) iterations={} converged={} violation={:.3e}",
        res.power(),
        10.0 * res.power().log10(),
        res.iterations,
        res.converged,
        res.primal_violation
    );
    for scheme in [Scheme::Zf, Scheme::Rzf] {
        let p = precode(cfg, &setup, scheme, &slot.h, &slot.symbols)?;
        let power: f64 = p.x.iter().map(|v| v.norm_sqr()).sum();
        println!("{scheme}: power={power:.6} ({:.3} dB)", 10.0 * power.log10());
    }
    println!("dumped to {}", args.dump.display());
    Ok(())
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match &cli.command {
        Command::PowerSweep(a) | Command::SepSweep(a) | Command::BerCurve(a) | Command::UncertaintySweep(a) => {
            let cfg = load_config(&cli.command, &a.config)?;
            let (name, output) = match &cli.command {
                Command::PowerSweep(_) => ("power-sweep", run_power_experiment(&cfg)?),
                Command::SepSweep(_) => ("sep-sweep", run_power_experiment(&cfg)?),
                Command::BerCurve(_) => ("ber-curve", run_ber_experiment(&cfg)?),
                _ => ("uncertainty-sweep", run_uncertainty_experiment(&cfg)?),
            };
            write_run(name, &cfg, a, &output)?;
            Ok(true)
        }
        Command::SolveOne(a) => {
            let cfg = load_config(&cli.command, &a.config)?;
            solve_one(&cfg, a)?;
            Ok(true)
        }
        Command::Validate(a) => {
            let cfg = load_config(&cli.command, &a.config)?;
            let checks = run_validation(&cfg, a.check_slots)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
