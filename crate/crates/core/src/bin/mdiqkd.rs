use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mdiqkd::channel::Basis;
use mdiqkd::error::{Error, Result};
use mdiqkd::estimation::{FluctuationConfig, ObservedStats};
use mdiqkd::keyrate::DEFAULT_EC_INEFFICIENCY;
use mdiqkd::runner::{self, output, Mode, Scenario};

/// Finite-data decoy-state analysis for measurement-device-independent QKD.
#[derive(Parser, Debug)]
#[command(author, version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate observed counts from the channel model
    Simulate(Common),
    /// Bound the single-photon yield and error rate
    Estimate(Common),
    /// Bounds plus the secret key rate at one operating point
    Keyrate(Common),
    /// Key rate over the scenario's loss grid
    Sweep(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario JSON file
    #[arg(long)]
    config: Option<PathBuf>,

    /// Observed counts CSV, used instead of simulating
    #[arg(long)]
    counts: Option<PathBuf>,

    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Standard deviations of statistical fluctuation
    #[arg(long)]
    n_alpha: Option<f64>,

    /// Photon-number cutoff of the decomposition
    #[arg(long)]
    cutoff: Option<usize>,

    /// Seed for sampled mode
    #[arg(long)]
    seed: Option<u64>,

    /// Draw counts binomially instead of using expectations
    #[arg(long)]
    sampled: bool,
}

impl Common {
    fn scenario(&self) -> Result<Option<Scenario>> {
        let Some(path) = &self.config else { return Ok(None) };
        let mut s = Scenario::load(path)?;
        if let Some(n) = self.n_alpha {
            s.estimation.n_alpha = n;
        }
        if let Some(k) = self.cutoff {
            s.estimation.cutoff = k;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if self.sampled {
            s.mode = Mode::Sampled;
        }
        s.validate()?;
        Ok(Some(s))
    }

    fn require_scenario(&self) -> Result<Scenario> {
        self.scenario()?.ok_or_else(|| Error::Validation("--config is required for this command".into()))
    }

    fn estimation(&self, scenario: Option<&Scenario>) -> FluctuationConfig {
        let mut cfg = scenario.map(|s| s.estimation).unwrap_or_default();
        if let Some(n) = self.n_alpha {
            cfg.n_alpha = n;
        }
        if let Some(k) = self.cutoff {
            cfg.cutoff = k;
        }
        cfg
    }
}

/// Largest Alice and Bob intensity indices seen in the z basis.
fn default_signal(obs: &ObservedStats) -> (usize, usize) {
    obs.in_basis(Basis::Z).fold((0, 0), |(a, b), o| (a.max(o.k), b.max(o.l)))
}

fn point_report(args: &Common) -> Result<runner::KeyRateReport> {
    let scenario = args.scenario()?;
    let cfg = args.estimation(scenario.as_ref());
    match (&args.counts, &scenario) {
        (Some(path), _) => {
            let obs = runner::ingest_counts(path)?;
            let signal = scenario.as_ref().map_or_else(|| default_signal(&obs), |s| s.protocol.signal_indices());
            let f_ec = scenario.as_ref().map_or(DEFAULT_EC_INEFFICIENCY, |s| s.protocol.f_ec);
            runner::analyze(obs, signal, &cfg, f_ec, None)
        }
        (None, Some(s)) => runner::run_point(s),
        (None, None) => Err(Error::Validation("give --config or --counts".into())),
    }
}

fn simulate(args: &Common) -> Result<()> {
    let s = args.require_scenario()?;
    let params = s.channel_params()?;
    let obs = runner::simulate_observed(&params, &s.protocol, s.mode, s.seed, 0)?;
    fs::create_dir_all(&args.out)?;
    runner::write_counts(&obs, fs::File::create(args.out.join("counts.csv"))?)?;
    fs::write(args.out.join("gains.csv"), output::gains_csv(&obs)?)?;
    fs::write(args.out.join("qbers.csv"), output::qbers_csv(&obs)?)?;
    println!("wrote {} observations to {}", obs.len(), args.out.display());
    Ok(())
}

fn estimate_only(args: &Common) -> Result<()> {
    let report = point_report(args)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("bounds.csv"), output::bounds_csv(&report)?)?;
    let b = &report.bounds;
    println!("Y11 z in [{:.6e}, {:.6e}]", b.y11_z_lower, b.y11_z_upper);
    println!("Y11 x in [{:.6e}, {:.6e}]", b.y11_x_lower, b.y11_x_upper);
    println!("e11 z in [{:.6e}, {:.6e}]", b.e11_z_lower, b.e11_z_upper);
    println!("e11 x in [{:.6e}, {:.6e}]", b.e11_x_lower, b.e11_x_upper);
    Ok(())
}

fn keyrate(args: &Common) -> Result<()> {
    let report = point_report(args)?;
    output::write_point(&report, &args.out)?;
    print!("{}", output::point_report(&report));
    Ok(())
}

fn sweep(args: &Common) -> Result<()> {
    let s = args.require_scenario()?;
    let points = runner::run_configured_sweep(&s)?;
    output::write_sweep(&points, s.estimation.n_alpha, &args.out)?;
    print!("{}", output::sweep_report(&points, s.estimation.n_alpha));
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate_only(a),
        Command::Keyrate(a) => keyrate(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

