//! `fdrelay`: design, certify, simulate and sweep a full-duplex relay
//! canceler from a JSON project config.
//!
//! Exit codes: 0 success, 1 synthesis or runtime failure, 2 malformed or
//! invalid JSON/config, 3 controller step does not match the config,
//! 4 closed loop unstable.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdrelay::ber::{auto_beta_grid, modulate, random_bits, sweep_beta};
use fdrelay::config::{BetaGrid, ParseError, ProjectConfig};
use fdrelay::export::{
    write_ber_csv, write_waveform_csv, CertifyReport, ControllerFile, DesignReport,
};
use fdrelay::sim::{check_controller, simulate_chain, Canceler, CancelerKind};
use fdrelay::synth::{certify_for, design, design_coupling_free, DigitalController};
use fdrelay::Error;
use fdrelay_control::ControlError;

#[derive(Parser)]
#[command(name = "fdrelay", version, about = "Coupling-wave canceler design for full-duplex relays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the canceler; writes controller.json, report.json, config.json.
    Design {
        #[command(flatten)]
        common: Common,
        /// Relative bisection tolerance on gamma.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Recompute the closed-loop norm and spectral radius; writes certify.json.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: Option<PathBuf>,
    },
    /// Run one BPSK burst through the relay chain; writes waveform.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// none, designed or perfect.
        #[arg(long, default_value = "designed")]
        canceler: String,
        /// Symbols in the burst.
        #[arg(long, default_value_t = 64)]
        symbols: usize,
    },
    /// BER versus beta for each canceler; writes ber_curves.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// `auto` or comma-separated increasing values.
        #[arg(long)]
        betas: Option<String>,
        /// Comma-separated subset of none,designed,perfect.
        #[arg(long, default_value = "none,designed,perfect")]
        cancelers: String,
        /// Relative tolerance for the coupling-free reference design.
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Project config (JSON). Reference defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Parse(String),
    Core(Error),
    Io(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) | Failure::Usage(_) => 2,
            Failure::Io(_) => 1,
            Failure::Core(e) => match e {
                Error::StepMismatch { .. } => 3,
                Error::Control(ControlError::Unstable { .. }) => 4,
                Error::Config(_) | Error::Model(_) | Error::Representability { .. } => 2,
                _ => 1,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Parse(m) | Failure::Io(m) | Failure::Usage(m) => m.clone(),
            Failure::Core(Error::Control(ControlError::Unstable { radius })) => {
                format!("closed loop is unstable: spectral radius {radius}")
            }
            Failure::Core(e) => e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn parse_failure(path: &Path, e: ParseError) -> Failure {
    Failure::Parse(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Parse(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn load_config(common: &Common) -> Outcome<(ProjectConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => ProjectConfig::from_json(&read(p)?).map_err(|e| parse_failure(p, e))?,
        None => ProjectConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", out.display())))?;
    Ok((cfg, out))
}

fn load_controller(path: Option<&PathBuf>, out: &Path) -> Outcome<(DigitalController, PathBuf)> {
    let path = path.cloned().unwrap_or_else(|| out.join("controller.json"));
    let file = ControllerFile::from_json(&read(&path)?).map_err(|e| parse_failure(&path, e))?;
    let k = file
        .to_controller()
        .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    Ok((k, path))
}

fn parse_betas(s: &str) -> Outcome<BetaGrid> {
    if s.trim() == "auto" {
        return Ok(BetaGrid::Auto);
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(BetaGrid::List)
        .map_err(|e| Failure::Usage(format!("--betas: {e}")))
}

fn parse_cancelers(s: &str) -> Outcome<Vec<CancelerKind>> {
    let mut kinds = s
        .split(',')
        .map(str::parse::<CancelerKind>)
        .collect::<fdrelay::Result<Vec<_>>>()
        .map_err(|e| Failure::Usage(format!("--cancelers: {e}")))?;
    kinds.sort();
    kinds.dedup();
    Ok(kinds)
}

fn cmd_design(common: &Common, tol: Option<f64>) -> Outcome<()> {
    let (mut cfg, out) = load_config(common)?;
    if let Some(t) = tol {
        cfg.design.tol = t;
    }
    cfg.validate()?;
    let result = design(&cfg.params()?, cfg.design.tol)?;
    write(
        &out.join("controller.json"),
        &ControllerFile::from_controller(&result.controller)?.to_json(),
    )?;
    write(
        &out.join("report.json"),
        &DesignReport::new(&result, cfg.design.tol).to_json(),
    )?;
    write(&out.join("config.json"), &cfg.to_json())?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "gamma_min {:.6}  certified {:.6}  spectral radius {:.6}  states {}",
        result.gamma_min,
        result.controller.gamma_certified,
        result.spectral_radius,
        result.controller.k.n_states()
    );
    Ok(())
}

fn cmd_certify(common: &Common, controller: Option<&PathBuf>) -> Outcome<()> {
    let (cfg, out) = load_config(common)?;
    let params = cfg.params()?;
    let (k, _) = load_controller(controller, &out)?;
    check_controller(&k, &params)?;
    let (norm, radius) = certify_for(&params, &k.k)?;
    let report = CertifyReport::new(norm, radius, k.gamma_achieved);
    write(&out.join("certify.json"), &report.to_json())?;
    println!("{}", report.to_json());
    Ok(())
}

fn canceler_for(
    kind: CancelerKind,
    k: Option<&DigitalController>,
    cfg: &ProjectConfig,
    tol: f64,
) -> Outcome<Canceler> {
    let need = || {
        k.cloned()
            .ok_or_else(|| Failure::Usage(format!("canceler '{kind}' needs --controller")))
    };
    Ok(match kind {
        CancelerKind::None => Canceler::None,
        CancelerKind::Designed => Canceler::Designed(need()?),
        CancelerKind::Perfect => {
            let params = cfg.params()?;
            // with no coupling the designed filter already is the reference
            let reference = if params.coupling_gain == 0.0 {
                need()?
            } else {
                design_coupling_free(&params, tol)?.controller
            };
            Canceler::Perfect {
                reference: Some(reference),
            }
        }
    })
}

fn cmd_simulate(
    common: &Common,
    controller: Option<&PathBuf>,
    seed: Option<u64>,
    canceler: &str,
    symbols: usize,
) -> Outcome<()> {
    let (mut cfg, out) = load_config(common)?;
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    let kind: CancelerKind = canceler
        .parse()
        .map_err(|e: Error| Failure::Usage(format!("--canceler: {e}")))?;
    if symbols == 0 {
        return Err(Failure::Usage("--symbols must be at least 1".into()));
    }
    let params = cfg.params()?;
    let k = match kind {
        CancelerKind::None => None,
        _ => {
            let (k, _) = load_controller(controller, &out)?;
            check_controller(&k, &params)?;
            Some(k)
        }
    };
    let canc = canceler_for(kind, k.as_ref(), &cfg, cfg.design.tol)?;
    let sim_cfg = cfg.sim_config(canc)?;
    let cc = cfg.comms_config()?;
    let tx = modulate(&random_bits(sim_cfg.seed, symbols), &cc, &params, sim_cfg.signal_dbm);
    let sim = simulate_chain(&sim_cfg, &tx)?;
    let path = out.join("waveform.csv");
    let file = fs::File::create(&path)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    write_waveform_csv(&sim, std::io::BufWriter::new(file))?;
    println!(
        "{} samples, |z|^2/|v|^2 = {:.6e}",
        sim.v.len(),
        sim.z.energy() / sim.v.energy().max(f64::MIN_POSITIVE)
    );
    Ok(())
}

fn cmd_sweep(
    common: &Common,
    controller: Option<&PathBuf>,
    seed: Option<u64>,
    betas: Option<&str>,
    cancelers: &str,
    tol: Option<f64>,
) -> Outcome<()> {
    let (mut cfg, out) = load_config(common)?;
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    if let Some(b) = betas {
        cfg.sweep.betas = parse_betas(b)?;
    }
    if let Some(t) = tol {
        cfg.design.tol = t;
    }
    cfg.validate()?;
    let kinds = parse_cancelers(cancelers)?;
    let params = cfg.params()?;
    let k = if kinds.iter().any(|c| *c != CancelerKind::None) {
        let (k, _) = load_controller(controller, &out)?;
        check_controller(&k, &params)?;
        Some(k)
    } else {
        None
    };
    let list = kinds
        .iter()
        .map(|kind| canceler_for(*kind, k.as_ref(), &cfg, cfg.design.tol))
        .collect::<Outcome<Vec<_>>>()?;
    let base = cfg.sim_config(Canceler::None)?;
    let cc = cfg.comms_config()?;
    let grid = match &cfg.sweep.betas {
        BetaGrid::Auto => auto_beta_grid(&base, &cc)?,
        BetaGrid::List(v) => v.clone(),
    };
    let curves = sweep_beta(&base, &cc, &grid, &list)?;
    let path = out.join("ber_curves.csv");
    let file = fs::File::create(&path)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    write_ber_csv(&curves, std::io::BufWriter::new(file))?;
    print!("{:>12}", "beta");
    for c in &curves {
        print!("{:>12}", c.canceler.as_str());
    }
    println!();
    for (i, beta) in grid.iter().enumerate() {
        print!("{beta:>12.4e}");
        for c in &curves {
            print!("{:>12.4e}", c.points[i].ber);
        }
        println!();
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    match &cli.command {
        Command::Design { common, tol } => cmd_design(common, *tol),
        Command::Certify { common, controller } => cmd_certify(common, controller.as_ref()),
        Command::Simulate {
            common,
            controller,
            seed,
            canceler,
            symbols,
        } => cmd_simulate(common, controller.as_ref(), *seed, canceler, *symbols),
        Command::Sweep {
            common,
            controller,
            seed,
            betas,
            cancelers,
            tol,
        } => cmd_sweep(
            common,
            controller.as_ref(),
            *seed,
            betas.as_deref(),
            cancelers,
            *tol,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
