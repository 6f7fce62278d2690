use clap::{Parser, Subcommand};

use lindblad_resign_cli::commands::{
    run_demo_jc, run_models, run_simulate, run_synthesize, run_verify, DemoJcCmd, SimulateCmd,
    SynthesizeCmd, VerifyCmd,
};

/// Rewrite open-quantum-system trajectories as state-dependent Lindblad
/// master equations with rates of prescribed signs.
#[derive(Parser)]
#[command(name = "lindblad-resign", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize rates and operators for a trajectory.
    Synthesize(SynthesizeCmd),
    /// Re-integrate synthesized artifacts against the input trajectory.
    Verify(VerifyCmd),
    /// Write a trajectory file for a built-in model.
    Simulate(SimulateCmd),
    /// Emit the closed-form Jaynes-Cummings rate curves as CSV.
    DemoJc(DemoJcCmd),
    /// List built-in models and their parameters.
    Models,
}

/// `LINDBLAD_RESIGN_THREADS` caps the worker pool used for per-point
/// synthesis.
fn configure_threads() {
    if let Ok(value) = std::env::var("LINDBLAD_RESIGN_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn main() {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap exits with 2 by default; 2 is reserved for synthesis
            // infeasibility here, so usage problems map to 1.
            let _ = err.print();
            std::process::exit(if err.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Synthesize(cmd) => run_synthesize(cmd),
        Command::Verify(cmd) => run_verify(cmd),
        Command::Simulate(cmd) => run_simulate(cmd),
        Command::DemoJc(cmd) => run_demo_jc(cmd),
        Command::Models => {
            print!("{}", run_models());
            Ok(())
        }
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        let mut source = std::error::Error::source(&err);
        while let Some(inner) = source {
            eprintln!("  caused by: {inner}");
            source = inner.source();
        }
        std::process::exit(err.exit_code());
    }
}
