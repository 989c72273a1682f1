use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use spiked_clt::simulate::{mc_run, verify, write_replicates_csv, MCReport, McRun};

mod config;
mod reproduce;
mod theory;

use config::{ExperimentConfig, Format};
use theory::{DistArg, TheoryArgs};

#[derive(Parser)]
#[command(name = "spiked-clt", version, about = "Spiked-population CLT formulas and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a named closed-form quantity.
    Theory {
        /// One of: phi, m0..m7, theta, w, theta-cross, w-cross, eig-var,
        /// eig-cov, eigvec-joint, abjoint, quadform.
        name: String,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a2: Option<f64>,
        #[arg(long)]
        y: f64,
        /// Kurtosis coefficient of the spike coordinate.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        nu4: f64,
        /// `gaussian` or `ellipse:ALPHA,BETA`.
        #[arg(long, default_value = "gaussian")]
        dist: DistArg,
        /// Sample size; also prints the unscaled variance or covariance.
        #[arg(long)]
        n: Option<usize>,
        /// Highest power for `quadform`.
        #[arg(long, default_value_t = 1)]
        i: usize,
    },
    /// Run the experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        z: Option<f64>,
        /// Directory for report.json, targets.csv and replicates.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Validate the config and print the theoretical targets only.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run both two-spike cases and compare with the published values.
    Reproduce {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        z: Option<f64>,
    },
    /// Re-check a saved JSON report.
    Verify {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        z: Option<f64>,
    },
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn write_outputs(dir: &Path, run: &McRun) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("report.json"), run.report.to_json()?)?;
    run.report.write_targets_csv(std::fs::File::create(dir.join("targets.csv"))?)?;
    write_replicates_csv(run, std::fs::File::create(dir.join("replicates.csv"))?)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    path: &Path,
    seed: Option<u64>,
    reps: Option<usize>,
    z: Option<f64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    dry_run: bool,
) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.reps = reps.unwrap_or(cfg.reps);
    cfg.z = z.unwrap_or(cfg.z);
    let exp = cfg.experiment()?;

    if dry_run {
        let (y, p, n) = exp.dims();
        if let Some(name) = &cfg.name {
            println!("{name}");
        }
        println!("experiment: {} (y = {y:?}, p = {p:?}, n = {n})", exp.kind());
        println!("replicates: {}, seed: {}, z: {}", cfg.reps, cfg.seed, cfg.z);
        for t in exp.targets()? {
            println!("{} -> {}", t.name, theory::sig12(t.theory));
        }
        return Ok(ExitCode::SUCCESS);
    }

    let run = mc_run(&exp, &cfg.mc_config())?;
    if let Some(dir) = out.or(cfg.output.dir.clone()) {
        write_outputs(&dir, &run)?;
    }
    let stdout = std::io::stdout();
    match format.or(cfg.output.format).unwrap_or_default() {
        Format::Table => print!("{}", verify(&run.report, cfg.z).table),
        Format::Json => println!("{}", run.report.to_json()?),
        Format::Csv => run.report.write_targets_csv(stdout.lock())?,
    }
    stdout.lock().flush()?;
    Ok(verdict(run.report.pass))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Theory {
            name,
            a,
            a2,
            y,
            nu4,
            dist,
            n,
            i,
        } => {
            print!(
                "{}",
                theory::evaluate(&TheoryArgs {
                    name,
                    a,
                    a2,
                    y,
                    nu4,
                    dist,
                    n,
                    i,
                })?
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            seed,
            reps,
            z,
            out,
            format,
            dry_run,
        } => simulate(&config, seed, reps, z, out, format, dry_run),
        Command::Reproduce { seed, reps, z } => {
            let rows = reproduce::run(seed, reps, z)?;
            print!("{}", reproduce::render(&rows));
            Ok(verdict(rows.iter().all(|r| r.pass)))
        }
        Command::Verify { report, z } => {
            let text = std::fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let report = MCReport::from_json(&text)?;
            let v = verify(&report, z.unwrap_or(report.z));
            print!("{}", v.table);
            Ok(verdict(v.pass))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
