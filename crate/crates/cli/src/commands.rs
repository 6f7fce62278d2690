//! Subcommand implementations. Each returns `Ok(())` or a [`CliError`]
//! whose `exit_code` follows the contract: 0 success, 1 usage/parse,
//! 2 synthesis infeasibility, 3 verification failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use thiserror::Error;

use lindblad_resign::eigenflow::Trajectory;
use lindblad_resign::evolution::{integrate, verify_reconstruction};
use lindblad_resign::models::{
    library_model, library_model_names, sample_model, JCParams, JCRateReference, ModelError,
};
use lindblad_resign::pipeline::{synthesize, PipelineConfig, PipelineError};
use lindblad_resign::synthesis::{Sign, SignPolicy};

use crate::config::{
    describe_singularity, parse_params, parse_singularity, ConfigError, PolicyArg,
};
use crate::formats::{
    fmt_f64, read_operators, read_rates, read_summary, read_trajectory, rebuild_generator,
    write_demo_csv, write_operators, write_rates, write_report, write_summary, write_trajectory,
    FormatError, Summary, TrajectoryLayout,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synthesis(#[from] PipelineError),
    #[error(
        "verification failed: max state error {max_state_error:.3e} exceeds bound {bound:.3e}"
    )]
    VerificationFailed { max_state_error: f64, bound: f64 },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::Config(_)
            | CliError::Format(_)
            | CliError::Model(_)
            | CliError::Io { .. } => 1,
            CliError::Synthesis(_) => 2,
            CliError::VerificationFailed { .. } => 3,
        }
    }
}

/// Where a trajectory comes from: a file on disk or a built-in model
/// sampled on an explicit grid.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Trajectory file to process.
    #[arg(long, conflicts_with = "model")]
    pub input: Option<PathBuf>,
    /// Built-in model name (see the `models` subcommand).
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameter, repeatable: --param key=value.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Grid start (model inputs).
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// Grid end (model inputs).
    #[arg(long, default_value_t = 3.0)]
    pub t1: f64,
    /// Grid spacing (model inputs).
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Refine the model grid by this factor (dt / k).
    #[arg(long = "grid-refine", default_value_t = 1, value_name = "K")]
    pub grid_refine: u32,
}

impl InputArgs {
    fn grid(&self) -> Result<Vec<f64>, CliError> {
        if self.dt <= 0.0 || self.dt.is_nan() || self.t1 <= self.t0 {
            return Err(CliError::Usage("need t1 > t0 and dt > 0".to_string()));
        }
        if self.grid_refine == 0 {
            return Err(CliError::Usage(
                "--grid-refine must be at least 1".to_string(),
            ));
        }
        let dt = self.dt / self.grid_refine as f64;
        let n = ((self.t1 - self.t0) / dt).round() as usize + 1;
        Ok((0..n).map(|k| self.t0 + dt * k as f64).collect())
    }

    /// Load or sample the trajectory. Model inputs carry analytic
    /// derivatives; file inputs fall back to finite differences.
    fn trajectory(&self) -> Result<(Trajectory, String), CliError> {
        match (&self.input, &self.model) {
            (Some(path), None) => {
                if self.grid_refine != 1 {
                    return Err(CliError::Usage(
                        "--grid-refine applies to model inputs only".to_string(),
                    ));
                }
                Ok((read_trajectory(path)?, format!("file:{}", path.display())))
            }
            (None, Some(name)) => {
                let params = parse_params(&self.params)?;
                let model = library_model(name, &params)?;
                let times = self.grid()?;
                let trajectory = sample_model(model.as_ref(), &times)
                    .map_err(|e| CliError::Usage(format!("model grid rejected: {e}")))?;
                Ok((trajectory, format!("model:{name}")))
            }
            _ => Err(CliError::Usage(
                "exactly one of --input or --model is required".to_string(),
            )),
        }
    }

    /// Trajectory resampled on an externally fixed grid (artifact grids).
    fn trajectory_on(&self, times: &[f64]) -> Result<Trajectory, CliError> {
        match (&self.input, &self.model) {
            (Some(path), None) => {
                let trajectory = read_trajectory(path)?;
                if trajectory.times() != times {
                    return Err(CliError::Usage(format!(
                        "input grid ({} points) does not match artifact grid ({} points)",
                        trajectory.len(),
                        times.len()
                    )));
                }
                Ok(trajectory)
            }
            (None, Some(name)) => {
                let params = parse_params(&self.params)?;
                let model = library_model(name, &params)?;
                sample_model(model.as_ref(), times)
                    .map_err(|e| CliError::Usage(format!("artifact grid rejected: {e}")))
            }
            _ => Err(CliError::Usage(
                "exactly one of --input or --model is required".to_string(),
            )),
        }
    }
}

/// Numerical knobs shared by synthesize-like commands.
#[derive(Debug, Args)]
pub struct SynthesisArgs {
    /// Required rate signs: nonneg, nonpos, alternating or `file:<path>`.
    #[arg(long, default_value = "nonneg")]
    pub policy: String,
    /// Zero threshold for eigenvalue rates (default: auto-scaled).
    #[arg(long = "eps-f")]
    pub eps_f: Option<f64>,
    /// Singularity threshold for rate denominators.
    #[arg(long = "eps-p", default_value_t = lindblad_resign::synthesis::EPS_P_DEFAULT)]
    pub eps_p: f64,
    /// Off-diagonal residual tolerance (default: auto-scaled).
    #[arg(long = "tol-offdiag")]
    pub tol_offdiag: Option<f64>,
    /// Singularity handling: error, or `cap:<gamma_max>`.
    #[arg(long, default_value = "error")]
    pub singularity: String,
}

impl SynthesisArgs {
    fn pipeline_config(&self, dim: usize) -> Result<(PipelineConfig, PolicyArg), CliError> {
        let policy_arg = PolicyArg::parse(&self.policy)?;
        let mut config = PipelineConfig::with_policy(policy_arg.resolve(dim));
        config.eps_f = self.eps_f;
        config.eps_p = self.eps_p;
        config.tol_offdiag = self.tol_offdiag;
        config.singularity = parse_singularity(&self.singularity)?;
        Ok((config, policy_arg))
    }
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.display().to_string(),
        source,
    })
}

fn write_sidecar(out: &Path, lines: &[(String, String)]) -> Result<(), CliError> {
    let mut text = String::from("lindblad-resign run v1\n");
    for (key, value) in lines {
        let _ = writeln!(text, "{key} = {value}");
    }
    fs::write(out.join("run.txt"), text).map_err(|source| CliError::Io {
        path: out.join("run.txt").display().to_string(),
        source,
    })
}

#[derive(Debug, Args)]
pub struct SynthesizeCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub synthesis: SynthesisArgs,
    /// Output directory for rates.csv, operators.txt, summary.txt.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Synthesize a state-dependent generator and write the rates table, the
/// per-point frame/Hamiltonian operators, and a run summary.
pub fn run_synthesize(cmd: &SynthesizeCmd) -> Result<(), CliError> {
    let (trajectory, source) = cmd.input.trajectory()?;
    let (config, policy_arg) = cmd.synthesis.pipeline_config(trajectory.dim())?;
    ensure_out_dir(&cmd.out)?;

    let mut entries: Vec<(String, String)> = vec![
        ("command".into(), "synthesize".into()),
        ("input".into(), source.clone()),
        ("dim".into(), trajectory.dim().to_string()),
        ("points".into(), trajectory.len().to_string()),
        ("policy".into(), policy_arg.describe()),
        (
            "eps_f".into(),
            cmd.synthesis
                .eps_f
                .map(fmt_f64)
                .unwrap_or_else(|| "auto".into()),
        ),
        ("eps_p".into(), fmt_f64(cmd.synthesis.eps_p)),
        (
            "tol_offdiag".into(),
            cmd.synthesis
                .tol_offdiag
                .map(fmt_f64)
                .unwrap_or_else(|| "auto".into()),
        ),
        (
            "singularity".into(),
            describe_singularity(config.singularity),
        ),
    ];
    write_sidecar(&cmd.out, &entries)?;

    let synthesis = match synthesize(&trajectory, &config) {
        Ok(synthesis) => synthesis,
        Err(PipelineError::SingularRates { intervals, first }) => {
            // Leave a summary naming the singular stretches before
            // failing with the synthesis exit code.
            entries.push(("status".into(), "singular".into()));
            let summary = Summary {
                entries,
                capped_intervals: Vec::new(),
                singular_intervals: intervals.clone(),
            };
            write_summary(&cmd.out.join("summary.txt"), &summary)?;
            return Err(PipelineError::SingularRates { intervals, first }.into());
        }
        Err(other) => return Err(other.into()),
    };

    let times = trajectory.times();
    write_rates(&cmd.out.join("rates.csv"), times, &synthesis.terms)?;
    let bases: Vec<_> = synthesis.frames.iter().map(|f| f.basis.clone()).collect();
    write_operators(
        &cmd.out.join("operators.txt"),
        times,
        &bases,
        &synthesis.hamiltonians,
    )?;

    let (nonneg, nonpos) = synthesis.sign_counts();
    let violations: usize = synthesis
        .terms
        .iter()
        .map(|terms| {
            terms
                .iter()
                .enumerate()
                .filter(|(round, term)| match config.policy {
                    SignPolicy::AllNonnegative => term.rate < -1e-12,
                    SignPolicy::AllNonpositive => term.rate > 1e-12,
                    SignPolicy::PerRound(ref signs) => match signs[*round] {
                        Sign::NonNegative => term.rate < -1e-12,
                        Sign::NonPositive => term.rate > 1e-12,
                    },
                })
                .count()
        })
        .sum();
    entries.push(("status".into(), "ok".into()));
    entries.push(("terms_total".into(), synthesis.total_terms().to_string()));
    entries.push(("rates_nonnegative".into(), nonneg.to_string()));
    entries.push(("rates_nonpositive".into(), nonpos.to_string()));
    entries.push(("sign_violations".into(), violations.to_string()));
    entries.push(("flux_deficit".into(), fmt_f64(synthesis.flux_deficit)));
    let summary = Summary {
        entries,
        capped_intervals: synthesis.capped_intervals.clone(),
        singular_intervals: Vec::new(),
    };
    write_summary(&cmd.out.join("summary.txt"), &summary)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct VerifyCmd {
    #[command(flatten)]
    pub input: InputArgs,
    /// Directory holding rates.csv, operators.txt, summary.txt.
    #[arg(long)]
    pub artifacts: PathBuf,
    /// Largest accepted re-integration state error.
    #[arg(long, default_value_t = 1e-4)]
    pub bound: f64,
    /// RK4 substeps per grid interval.
    #[arg(long, default_value_t = 1)]
    pub substeps: usize,
    /// Output directory for report.txt (defaults to the artifact dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reload a generator from artifacts, re-integrate it against the input
/// trajectory, and write the verification report.
pub fn run_verify(cmd: &VerifyCmd) -> Result<(), CliError> {
    let operators = read_operators(&cmd.artifacts.join("operators.txt"))?;
    let dim = operators.bases.first().map(|b| b.nrows()).unwrap_or(0);
    let terms = read_rates(&cmd.artifacts.join("rates.csv"), &operators.times, dim)?;
    let summary = read_summary(&cmd.artifacts.join("summary.txt"))?;
    let generator = rebuild_generator(&operators, &terms)
        .map_err(|e| CliError::Usage(format!("artifacts do not form a valid generator: {e}")))?;

    let trajectory = cmd.input.trajectory_on(&operators.times)?;
    let mut excluded = summary.capped_intervals.clone();
    excluded.extend_from_slice(&summary.singular_intervals);

    let report = verify_reconstruction(&trajectory, &generator, cmd.substeps, &excluded)
        .map_err(|e| CliError::Usage(format!("grid mismatch: {e}")))?;
    let passed = report.max_state_error <= cmd.bound;

    let out = cmd.out.clone().unwrap_or_else(|| cmd.artifacts.clone());
    ensure_out_dir(&out)?;
    write_report(&out.join("report.txt"), &report, cmd.bound, passed)?;

    if passed {
        Ok(())
    } else {
        Err(CliError::VerificationFailed {
            max_state_error: report.max_state_error,
            bound: cmd.bound,
        })
    }
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub input: InputArgs,
    /// RK4 substeps per grid interval (models with a fixed generator).
    #[arg(long, default_value_t = 1)]
    pub substeps: usize,
    /// Entry layout of the written file.
    #[arg(long, default_value = "dense")]
    pub layout: String,
    /// Output directory for trajectory.txt.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Produce a trajectory file from a built-in model: models with a fixed
/// Lindblad generator are integrated with RK4, the Jaynes-Cummings atom
/// is sampled from its closed form.
pub fn run_simulate(cmd: &SimulateCmd) -> Result<(), CliError> {
    let Some(name) = &cmd.input.model else {
        return Err(CliError::Usage("simulate requires --model".to_string()));
    };
    let params = parse_params(&cmd.input.params)?;
    let model = library_model(name, &params)?;
    let times = cmd.input.grid()?;
    let layout = match cmd.layout.as_str() {
        "dense" => TrajectoryLayout::Dense,
        "sparse" => TrajectoryLayout::Sparse,
        other => return Err(CliError::Usage(format!("unknown layout '{other}'"))),
    };

    let trajectory = match model.generator() {
        Some((hamiltonian, terms)) => {
            let rho0 = lindblad_resign::matrix::validate_density(&model.state(times[0]), 1e-9)
                .map_err(|e| CliError::Usage(format!("model initial state invalid: {e}")))?;
            let point = lindblad_resign::evolution::GeneratorPoint { hamiltonian, terms };
            let generator = lindblad_resign::evolution::LindbladGenerator::new(
                times.clone(),
                vec![point; times.len()],
            )
            .map_err(|e| CliError::Usage(format!("model generator invalid: {e}")))?;
            let states = integrate(&rho0, &generator, cmd.substeps.max(1))
                .map_err(|e| CliError::Usage(format!("integration failed: {e}")))?;
            Trajectory::new(times, states).map_err(|e| CliError::Usage(format!("bad grid: {e}")))?
        }
        None => sample_model(model.as_ref(), &times)
            .map_err(|e| CliError::Usage(format!("model grid rejected: {e}")))?,
    };

    ensure_out_dir(&cmd.out)?;
    // Integrated states can carry O(1e-7) positivity slack, so the file
    // declares a matching validation tolerance.
    write_trajectory(&cmd.out.join("trajectory.txt"), &trajectory, 1e-6, layout)?;
    write_sidecar(
        &cmd.out,
        &[
            ("command".into(), "simulate".into()),
            ("model".into(), name.clone()),
            ("points".into(), trajectory.len().to_string()),
            ("layout".into(), cmd.layout.clone()),
        ],
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct DemoJcCmd {
    /// Model parameter, repeatable: --param key=value (omega, rho11_0).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long, default_value_t = 12.5)]
    pub t1: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
    /// Output directory for demo_jc.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Emit the closed-form Jaynes-Cummings rate curves for both sign
/// prescriptions side by side. Singular points become empty cells.
pub fn run_demo_jc(cmd: &DemoJcCmd) -> Result<(), CliError> {
    let mut params = parse_params(&cmd.params)?;
    let jc = JCParams {
        omega: params.remove("omega").unwrap_or(1.0),
        rho11_0: params.remove("rho11_0").unwrap_or(1.0),
        rho12_0: num_complex::Complex64::new(0.0, 0.0),
    };
    if let Some((key, _)) = params.pop_first() {
        return Err(CliError::Usage(format!(
            "unknown demo-jc parameter '{key}'"
        )));
    }
    if cmd.dt <= 0.0 || cmd.dt.is_nan() || cmd.t1 <= cmd.t0 {
        return Err(CliError::Usage("need t1 > t0 and dt > 0".to_string()));
    }
    let reference = JCRateReference::new(jc)?;

    let n = ((cmd.t1 - cmd.t0) / cmd.dt).round() as usize + 1;
    let rows: Vec<_> = (0..n)
        .map(|k| {
            let t = cmd.t0 + cmd.dt * k as f64;
            let nonneg = reference.rates(t, Sign::NonNegative).ok();
            let nonpos = reference.rates(t, Sign::NonPositive).ok();
            (t, nonneg, nonpos, reference.lambda1(t))
        })
        .collect();

    ensure_out_dir(&cmd.out)?;
    write_demo_csv(&cmd.out.join("demo_jc.csv"), &rows)?;
    Ok(())
}

/// List the built-in models and their parameter keys.
pub fn run_models() -> String {
    let mut out = String::from("available models:\n");
    for (name, params) in library_model_names() {
        let _ = writeln!(out, "  {name:<18} params: {params}");
    }
    out
}
