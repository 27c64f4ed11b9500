use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use cgolab_cli::commands::{exit_code, run, write_outcome, Command};
use cgolab_cli::config::Config;

/// Numerical lab for conjugated Schrödinger multipliers and CGO reconstruction.
#[derive(Parser)]
#[command(name = "cgolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// TOML configuration file; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Print the resolved configuration and its hash, then exit.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Strichartz and gain ratios of S_ν over ν.
    VerifyStrichartz,
    /// Closed-form vs quadrature values of the kernels K_σ.
    KernelTable,
    /// Birman–Schwinger operator norms against |ν|.
    BsNormSweep,
    /// CGO solutions and the decay of their remainders.
    CgoBuild,
    /// Split-step evolution with mass monitoring.
    ForwardEvolve,
    /// The integral identity between two potentials.
    IdentityCheck,
    /// Born reconstruction of a weak potential.
    Reconstruct,
    /// Embedding counterexample and local smoothing.
    CounterexampleSweep,
}

impl Sub {
    fn command(self) -> Command {
        match self {
            Sub::VerifyStrichartz => Command::VerifyStrichartz,
            Sub::KernelTable => Command::KernelTable,
            Sub::BsNormSweep => Command::BsNormSweep,
            Sub::CgoBuild => Command::CgoBuild,
            Sub::ForwardEvolve => Command::ForwardEvolve,
            Sub::IdentityCheck => Command::IdentityCheck,
            Sub::Reconstruct => Command::Reconstruct,
            Sub::CounterexampleSweep => Command::CounterexampleSweep,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cfg = match Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let cmd = cli.command.command();
    if cli.dry_run {
        println!("# cgolab {} {}", env!("CARGO_PKG_VERSION"), cmd.id());
        println!("# config hash {}", cfg.hash());
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let result = run(cmd, &cfg);
    let code = exit_code(&result);
    match &result {
        Ok(out) => {
            let dir = PathBuf::from(&cfg.output_dir);
            match write_outcome(out, &dir) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            }
            for r in &out.reports {
                let tag = if r.diagnostic { " (diagnostic)" } else { "" };
                println!("{}: {:?}{}", r.name, r.report.verdict, tag);
                for c in &r.report.checks {
                    let op = if c.at_least { ">=" } else { "<=" };
                    println!("  [{}] {}: {:.6e} {} {:.6e}", if c.pass { "ok" } else { "FAIL" }, c.name, c.value, op, c.bound);
                }
            }
        }
        Err(e) => eprintln!("{e}"),
    }
    eprintln!("elapsed {:.2}s", start.elapsed().as_secs_f64());
    ExitCode::from(code as u8)
}
