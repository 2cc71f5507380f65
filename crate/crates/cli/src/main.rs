use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use spinboson::config::{parse_config, preset, ExperimentConfig, PRESETS};
use spinboson::harness;
use spinboson::{Error, Result};

/// HEOM simulation of a two-level system in a Lorentzian bath, with
/// Bloch-volume non-Markovianity diagnostics.
#[derive(Parser)]
#[command(name = "spinboson", version)]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Accepted for CI scripts; the tool never uses random numbers.
    #[arg(long, global = true)]
    seedless: bool,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the probe states and write the volume/rate analysis.
    Simulate(Input),
    /// Repeat the run for every level in sweep.levels.
    ScanL(Input),
    /// Repeat the run for every transition frequency in sweep.omega0_grid.
    ScanStark(Input),
    /// Compare the correlation-function expansion with direct quadrature.
    Correlation(Input),
    /// Run the oracle suite; exits with status 4 if any check fails.
    Validate {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct Input {
    /// TOML configuration file (or a manifest.toml from an earlier run).
    config: Option<PathBuf>,

    /// Use a bundled preset instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,

    /// Output directory (default: run.out_dir from the config, else ./out).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Input {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let cfg = match (&self.config, &self.preset) {
            (Some(path), None) => parse_config(path)?,
            (None, Some(name)) => preset(name)?,
            _ => return Err(Error::InvalidInput("give a config file or --preset <name>".into())),
        };
        let out = self
            .out_dir
            .clone()
            .or_else(|| cfg.run.out_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, out))
    }
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "not reached".to_string(), |t| format!("{t:.2} fs"))
}

fn simulate(input: &Input) -> Result<()> {
    let (cfg, out) = input.load()?;
    let r = harness::run_simulation(&cfg)?;
    harness::write_simulation(&r, &out)?;
    let threshold = r.config.analysis.decoherence_threshold;
    println!(
        "omega0 = {:.4e} a.u., L = {}, N = {}, {} ADOs, {:.1} s",
        r.system.omega0,
        r.config.heom.level,
        r.config.bath.n_matsubara.unwrap_or(0),
        r.ado_count,
        r.wall_time_s
    );
    println!("V(t_final) = {:.4e}", r.volume().last().copied().unwrap_or(f64::NAN));
    println!("first V < {threshold}: {}", fmt_time(r.report.first_time_below(threshold)));
    println!("purity(t_final) = {:.4}", r.purity.last().copied().unwrap_or(f64::NAN));
    println!("witness intervals: {:?}", r.report.witness_intervals);
    for w in &r.warnings {
        println!("warning: {w}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn scan_l(input: &Input) -> Result<()> {
    let (cfg, out) = input.load()?;
    let scan = harness::scan_hierarchy(&cfg)?;
    harness::write_hierarchy_scan(&scan, &out)?;
    for (a, b, d) in &scan.distances {
        println!("L = {a} vs {b}: sup |dV| = {d:.4e}{}", if *d < 0.02 { "  (converged)" } else { "" });
    }
    println!("total {:.1} s, wrote {}", scan.wall_time_s, out.display());
    Ok(())
}

fn scan_stark(input: &Input) -> Result<()> {
    let (cfg, out) = input.load()?;
    let scan = harness::scan_stark(&cfg)?;
    harness::write_stark_scan(&scan, &out)?;
    for p in &scan.points {
        println!(
            "omega0 = {:.4e}: decoherence {}, positive volume gain {:.3e}, {} witness interval(s)",
            p.omega0,
            fmt_time(p.decoherence_time_fs),
            p.positive_volume_gain,
            p.witness_count
        );
    }
    println!("total {:.1} s, wrote {}", scan.wall_time_s, out.display());
    Ok(())
}

fn correlation(input: &Input) -> Result<()> {
    let (cfg, out) = input.load()?;
    let r = harness::correlation_report(&cfg)?;
    harness::write_correlation(&r, &out)?;
    println!("beta = {:.6} a.u., N = {} ({} modes)", r.beta, r.n_matsubara, r.modes);
    println!("relative sup error vs quadrature: {:.3e}", r.rel_error);
    println!("oscillation period: {}", fmt_time(r.period_fs));
    println!("max |C(t)|/|C(0)| beyond 100 fs: {:.3e}", r.tail_ratio);
    println!("renormalization energy: {:.6e} a.u.", r.renormalization_energy);
    println!("wrote {}", out.display());
    Ok(())
}

fn validate(out_dir: Option<&Path>) -> Result<bool> {
    let checks = harness::validation_suite()?;
    let table = harness::validation_table(&checks);
    print!("{table}");
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("validation.txt"), &table)?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    if cli.seedless {
        info!("seedless mode: no random number generation is used anywhere");
    }

    let outcome = match &cli.command {
        Command::Simulate(i) => simulate(i).map(|_| true),
        Command::ScanL(i) => scan_l(i).map(|_| true),
        Command::ScanStark(i) => scan_stark(i).map(|_| true),
        Command::Correlation(i) => correlation(i).map(|_| true),
        Command::Validate { out_dir } => validate(out_dir.as_deref()),
        Command::Presets => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
