use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mll_cli::{
    calculate, describe, export, list_table, load_family, read_text, verify_suite, write_atomic,
    CliError, ExportFormat, Suite,
};
use mll_core::optimizer::{Budget, OptimizerConfig, SignPolicy};
use mll_core::verify::SearchPlan;

#[derive(Parser, Debug)]
#[command(name = "mll", version, about = "Moebius ladder capacity searches")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Table of registered families.
    List,
    /// Notation, dimensions and full spec of one family.
    Describe {
        family: Option<String>,
        #[arg(long)]
        family_file: Option<PathBuf>,
    },
    /// Search one family; exit 2 when the best value falls below the threshold.
    Run(RunArgs),
    /// Run an acceptance suite; exit 1 on any failure.
    Verify {
        #[arg(long, default_value = "kernel")]
        suite: Suite,
        /// Wall-clock cap per search run.
        #[arg(long)]
        seconds: Option<f64>,
    },
    /// Export the best ladder of a run record.
    Export {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        format: ExportFormat,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the steering API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        runs_dir: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    family_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    budget_evals: Option<u64>,
    #[arg(long)]
    budget_seconds: Option<f64>,
    #[arg(long)]
    refresh_evals: Option<u64>,
    #[arg(long)]
    step_max: Option<f64>,
    #[arg(long)]
    coercion: Option<f64>,
    #[arg(long)]
    mask_a: Option<f64>,
    #[arg(long)]
    freeze_heights: Option<bool>,
    /// Pinned signs, e.g. `--signs=1,-1,1`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    signs: Option<Vec<i8>>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long, env = "MLL_THREADS")]
    threads: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::with_seed(self.seed);
        // an explicit limit of one kind drops the default of the other
        match (self.budget_evals, self.budget_seconds) {
            (None, None) => {}
            (evaluations, seconds) => {
                cfg.total = Budget {
                    evaluations,
                    seconds,
                }
            }
        }
        if let Some(n) = self.refresh_evals {
            cfg.refresh = Budget::evaluations(n);
        }
        if let Some(s) = self.step_max {
            cfg.step_max = s;
        }
        if let Some(u) = self.coercion {
            cfg.coercion = u;
        }
        cfg.mask_a = self.mask_a;
        cfg.heights_frozen = self.freeze_heights;
        if let Some(s) = &self.signs {
            cfg.sign_policy = SignPolicy::Pinned(s.clone());
        }
        cfg.threads = self.threads;
        cfg
    }
}

fn main() -> ExitCode {
    // clap exits 2 on usage errors, which here means a counterexample
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<u8, CliError> {
    match cmd {
        Cmd::List => {
            print!("{}", list_table());
            Ok(0)
        }
        Cmd::Describe {
            family,
            family_file,
        } => {
            print!(
                "{}",
                describe(&load_family(family.as_deref(), family_file.as_deref())?)?
            );
            Ok(0)
        }
        Cmd::Run(args) => {
            let f = load_family(args.family.as_deref(), args.family_file.as_deref())?;
            let report = calculate(&f, &args.config(), &args.out)?;
            println!("{}", report.summary());
            println!("run record: {}", report.run_file.display());
            Ok(report.verdict.exit_code())
        }
        Cmd::Verify { suite, seconds } => {
            let plan = SearchPlan {
                seconds,
                ..SearchPlan::default()
            };
            let checks = verify_suite(suite, &plan);
            for c in &checks {
                println!("{}", c.line());
            }
            let failed = checks.iter().filter(|c| !c.ok).count();
            println!("{} passed, {failed} failed", checks.len() - failed);
            Ok(u8::from(failed > 0))
        }
        Cmd::Export { run, format, out } => {
            let text = export(&read_text(&run)?, format)?;
            match out {
                Some(path) => write_atomic(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Cmd::Serve { addr, runs_dir } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .init();
            let rt = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
                path: PathBuf::from(addr.to_string()),
                source,
            })?;
            rt.block_on(mll_steer::serve(addr, runs_dir))
                .map_err(|source| CliError::Io {
                    path: PathBuf::from(addr.to_string()),
                    source,
                })?;
            Ok(0)
        }
    }
}
