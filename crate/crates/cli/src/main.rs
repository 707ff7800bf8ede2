//! `beamrss` command-line front end.
//!
//! Subcommands follow the pipeline stages so each stage's files can be
//! replaced by externally measured data:
//!
//! * `codebook`: synthesize a beampattern codebook CSV
//! * `simulate`: trace one link and write its RSS grid JSON
//! * `estimate`: run OR / LS1D / LS2D on a saved grid
//! * `eval`: full evaluation with records, summary and CDF files
//!
//! Exit codes: 0 success, 1 invalid input, 2 I/O failure. Failures print one
//! JSON line `{"error": <kind>, "message": <text>}` on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beamrss::channel::{NoiseSpec, RssGrid};
use beamrss::codebook::{synth_codebook, BeamCodebook};
use beamrss::estimators::{
    estimate, estimate_ls1d, estimate_ls2d, objective_slice, AngleEstimate, Method, SliceAt,
};
use beamrss::evaluation::{run_eval_with_jobs, thread_pool, write_outputs, Evaluator};
use beamrss::raytrace::mpcs_to_json;
use beamrss::scenario::{load_scenario, CodebookSource, Scenario};
use beamrss::{Error, SynthConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "beamrss",
    version,
    about = "RSS-based AoA/AoD estimation for mmWave beam sweeps"
)]
struct Cli {
    /// Print the default scenario config as JSON and exit.
    #[arg(long, global = true)]
    print_default_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a beampattern codebook CSV.
    Codebook(CodebookArgs),
    /// Trace one TX position / receiver pair and write its RSS grid.
    Simulate(SimulateArgs),
    /// Estimate AoA/AoD from a saved RSS grid.
    Estimate(EstimateArgs),
    /// Evaluate all estimators over every position, receiver and seed.
    Eval(EvalArgs),
}

#[derive(Args)]
struct CodebookArgs {
    /// Start from the codebook section of this scenario config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beams: Option<usize>,
    #[arg(long)]
    elements: Option<usize>,
    /// Phase-shifter resolution; 0 disables quantization.
    #[arg(long)]
    phase_bits: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

/// Overrides shared by the scenario-driven commands.
#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-pair SNR in dB of the strongest path.
    #[arg(long)]
    snr: Option<f64>,
    /// Probability that a beam pair is missing from the sweep.
    #[arg(long)]
    dropout: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// 1-based transmitter position (p1..).
    #[arg(long, default_value_t = 1)]
    position: usize,
    /// 1-based receiver (RX1..).
    #[arg(long, default_value_t = 1)]
    receiver: usize,
    /// Seed of the simulated snapshot; defaults to the first config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the traced multipath components as JSON.
    #[arg(long)]
    dump_mpcs: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Or,
    Ls1d,
    Ls2d,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Or => vec![Method::Or],
            MethodArg::Ls1d => vec![Method::Ls1d],
            MethodArg::Ls2d => vec![Method::Ls2d],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    grid: PathBuf,
    /// TX codebook CSV; defaults to the synthesized codebook.
    #[arg(long)]
    tx_codebook: Option<PathBuf>,
    /// RX codebook CSV; defaults to the synthesized codebook.
    #[arg(long)]
    rx_codebook: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ls2d")]
    method: MethodArg,
    /// Write objective CSVs (LS1D zeta/kappa, LS2D surface and slices).
    #[arg(long)]
    dump_objectives: bool,
    /// Directory for dumped objectives.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Replace the config seeds with `seed, seed + 1, ...` (same count).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            report("usage", &e.kind().to_string());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = if e.is_io() {
                ("io", 2)
            } else {
                ("validation", 1)
            };
            report(kind, &e.to_string());
            ExitCode::from(code)
        }
    }
}

fn report(kind: &str, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({ "error": kind, "message": message })
    );
}

/// Print one line on stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(line: &str) -> beamrss::Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(io_error(Path::new("<stdout>"), e))
        }
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> beamrss::Result<()> {
    if cli.print_default_config {
        emit(&Scenario::default().to_json())?;
        return Ok(());
    }
    match cli.command {
        None => Err(Error::InvalidArgument {
            name: "command",
            reason: "expected one of codebook, simulate, estimate, eval".into(),
        }),
        Some(Command::Codebook(a)) => cmd_codebook(a),
        Some(Command::Simulate(a)) => cmd_simulate(a),
        Some(Command::Estimate(a)) => cmd_estimate(a),
        Some(Command::Eval(a)) => cmd_eval(a),
    }
}

fn cmd_codebook(a: CodebookArgs) -> beamrss::Result<()> {
    let mut cfg = match &a.config {
        Some(path) => match load_scenario(path)?.codebook {
            CodebookSource::Synth(cfg) => cfg,
            CodebookSource::Files { .. } => {
                return Err(Error::InvalidArgument {
                    name: "config",
                    reason: "codebook section refers to files, nothing to synthesize".into(),
                })
            }
        },
        None => SynthConfig::default(),
    };
    if let Some(n) = a.beams {
        cfg.n_beams = n;
    }
    if let Some(n) = a.elements {
        cfg.n_elements = n;
    }
    if let Some(bits) = a.phase_bits {
        cfg.phase_bits = (bits > 0).then_some(bits);
    }
    synth_codebook(&cfg)?.save(&a.out)
}

fn load_with_overrides(a: &ScenarioArgs) -> beamrss::Result<Scenario> {
    let mut s = match &a.config {
        Some(path) => load_scenario(path)?,
        None => Scenario::default(),
    };
    if let Some(snr) = a.snr {
        s.noise = NoiseSpec::SnrDb(snr);
    }
    if let Some(p) = a.dropout {
        s.dropout = p;
    }
    if a.jobs == 0 {
        return Err(Error::InvalidArgument {
            name: "jobs",
            reason: "must be at least 1".into(),
        });
    }
    s.validate()?;
    Ok(s)
}

fn cmd_simulate(a: SimulateArgs) -> beamrss::Result<()> {
    let s = load_with_overrides(&a.scenario)?;
    let out_of_range = |name: &'static str, n: usize| Error::InvalidArgument {
        name,
        reason: format!("must be between 1 and {n}"),
    };
    if a.position == 0 || a.position > s.tx_positions.len() {
        return Err(out_of_range("position", s.tx_positions.len()));
    }
    if a.receiver == 0 || a.receiver > s.rx_poses.len() {
        return Err(out_of_range("receiver", s.rx_poses.len()));
    }
    let seed = a.seed.or(s.seeds.first().copied()).unwrap_or(0);
    let jobs = a.scenario.jobs;
    let evaluator = Evaluator::new(s)?;
    let (grid, mpcs) =
        thread_pool(jobs)?.install(|| evaluator.simulate(a.position - 1, a.receiver - 1, seed))?;
    grid.save(&a.out)?;
    if let Some(path) = &a.dump_mpcs {
        std::fs::write(path, mpcs_to_json(&mpcs)).map_err(|e| io_error(path, e))?;
    }
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn cmd_estimate(a: EstimateArgs) -> beamrss::Result<()> {
    let grid = RssGrid::load(&a.grid)?;
    let load = |p: &Option<PathBuf>| match p {
        Some(path) => BeamCodebook::load(path),
        None => synth_codebook(&SynthConfig::default()),
    };
    let cb_tx = load(&a.tx_codebook)?;
    let cb_rx = load(&a.rx_codebook)?;
    if a.dump_objectives {
        std::fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    }
    for method in a.method.methods() {
        let est: AngleEstimate = match (method, a.dump_objectives) {
            (Method::Ls1d, true) => {
                let (est, obj) = estimate_ls1d(&grid, &cb_tx, &cb_rx)?;
                obj.zeta.save(&a.out.join("ls1d_zeta.csv"))?;
                obj.kappa.save(&a.out.join("ls1d_kappa.csv"))?;
                est
            }
            (Method::Ls2d, true) => {
                let (est, surface) = estimate_ls2d(&grid, &cb_tx, &cb_rx)?;
                surface.save(&a.out.join("ls2d_surface.csv"))?;
                objective_slice(&surface, SliceAt::Aoa(est.aoa_deg))?
                    .save(&a.out.join("ls2d_aod_slice.csv"))?;
                objective_slice(&surface, SliceAt::Aod(est.aod_deg))?
                    .save(&a.out.join("ls2d_aoa_slice.csv"))?;
                est
            }
            _ => estimate(method, &grid, &cb_tx, &cb_rx)?,
        };
        emit(&serde_json::to_string(&est)?)?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> beamrss::Result<()> {
    let mut s = load_with_overrides(&a.scenario)?;
    if let Some(base) = a.seed {
        let n = s.seeds.len() as u64;
        s.seeds = (0..n).map(|i| base.wrapping_add(i)).collect();
    }
    std::fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    let progress = |done: usize, total: usize| {
        if done == total || done.is_multiple_of(10) {
            eprintln!("eval: {done}/{total} cells");
        }
    };
    let records = run_eval_with_jobs(&s, a.scenario.jobs, Some(&progress))?;
    write_outputs(&records, &a.out)?;
    eprintln!(
        "eval: wrote {} records to {}",
        records.len(),
        a.out.display()
    );
    Ok(())
}
