//! Command-line front end for the toy example, the asymptotic-variance
//! comparison, Wright-Fisher data simulation and inference, and reports.
//!
//! Every command writes deterministic files: identical settings and seed give
//! byte-identical output, with or without parallel path sweeps.

pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use barker_core::chain::write_trace_csv;
use barker_core::diffusion::{
    gibbs_run, read_observations, simulate_wf_data, write_observations, write_skeletons_json,
    GibbsConfig, ParamCoin, ThetaState, UpdateConfig, WrightFisher,
};
use barker_core::toy::{run_sandwich, run_toy, ToyConfig};
use clap::{Args, Parser, Subcommand};

use config::Resolver;
pub use error::CliError;
use report::Summary;

#[derive(Debug, Parser)]
#[command(name = "barker", version, about = "Exact Barker MCMC experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command.
#[derive(Debug, Args)]
pub struct Common {
    /// Settings file: a flat JSON object or `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`, or $BARKER_OUT_DIR).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factory Barker chain on the Poisson-Gamma mixture.
    Toy(ToyArgs),
    /// Barker against Metropolis-Hastings asymptotic variances on the toy target.
    Sandwich(SandwichArgs),
    /// Simulate Wright-Fisher observations.
    WfSim(WfSimArgs),
    /// Exact Gibbs inference for Wright-Fisher parameters.
    WfInfer(WfInferArgs),
    /// Re-render the report for an existing summary file.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rw_halfwidth: Option<i64>,
    #[arg(long)]
    pub gamma_shape: Option<f64>,
    #[arg(long)]
    pub gamma_rate: Option<f64>,
    #[arg(long)]
    pub init: Option<i64>,
    #[arg(long)]
    pub loop_cap: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SandwichArgs {
    #[command(flatten)]
    pub toy: ToyArgs,
    #[arg(long)]
    pub batches: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WfSimArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub n_obs: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (default `<out-dir>/observations.csv`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WfInferArgs {
    #[command(flatten)]
    pub common: Common,
    /// Observation CSV with header `time,value`.
    #[arg(long)]
    pub obs: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Path sweeps per iteration.
    #[arg(long)]
    pub path_sweeps: Option<usize>,
    #[arg(long)]
    pub step_gamma1: Option<f64>,
    #[arg(long)]
    pub step_gamma2: Option<f64>,
    #[arg(long)]
    pub init_gamma1: Option<f64>,
    #[arg(long)]
    pub init_gamma2: Option<f64>,
    /// Layer width unit, in multiples of the square root of the gap.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub rate_target: Option<f64>,
    #[arg(long)]
    pub param_rate_target: Option<f64>,
    #[arg(long)]
    pub max_refine: Option<u32>,
    /// `symmetric` or `direct`.
    #[arg(long)]
    pub param_coin: Option<String>,
    #[arg(long)]
    pub loop_cap: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub parallel: Option<bool>,
    /// Check every potential bound on a dense grid (slow).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub audit: Option<bool>,
    /// Also write the final skeletons to `skeletons.json`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dump_skeletons: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Summary file (default `<out-dir>/summary.json`).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.txt";

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 on a configuration error, 1 otherwise.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    let start = Instant::now();
    let label = match &command {
        Command::Toy(_) => "toy",
        Command::Sandwich(_) => "sandwich",
        Command::WfSim(_) => "wf-sim",
        Command::WfInfer(_) => "wf-infer",
        Command::Report(_) => "report",
    };
    match command {
        Command::Toy(a) => toy(a)?,
        Command::Sandwich(a) => sandwich(a)?,
        Command::WfSim(a) => wf_sim(a)?,
        Command::WfInfer(a) => wf_infer(a)?,
        Command::Report(a) => report_cmd(a)?,
    }
    eprintln!("{label} finished in {:.1?}", start.elapsed());
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_summary(dir: &Path, summary: &Summary) -> Result<(), CliError> {
    let mut w = create(&dir.join(SUMMARY_FILE))?;
    serde_json::to_writer_pretty(&mut w, summary).map_err(|e| CliError::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    let text = report::render(summary);
    std::fs::write(dir.join(REPORT_FILE), &text)?;
    print!("{text}");
    Ok(())
}

fn toy_config(a: ToyArgs, r: &mut Resolver) -> Result<ToyConfig, CliError> {
    let d = ToyConfig::default();
    let iterations = r.or("iterations", a.iterations, d.iterations)?;
    Ok(ToyConfig {
        iterations,
        burn_in: r.or("burn_in", a.burn_in, d.burn_in)?.min(iterations),
        seed: r.required("seed", a.seed)?,
        rw_halfwidth: r.or("rw_halfwidth", a.rw_halfwidth, d.rw_halfwidth)?,
        gamma_shape: r.or("gamma_shape", a.gamma_shape, d.gamma_shape)?,
        gamma_rate: r.or("gamma_rate", a.gamma_rate, d.gamma_rate)?,
        init: r.or("init", a.init, d.init)?,
        loop_cap: r.optional("loop_cap", a.loop_cap)?,
    })
}

fn toy(a: ToyArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let dir = r.out_dir(a.common.out_dir.clone())?;
    let cfg = toy_config(a, &mut r)?;
    r.finish()?;
    cfg.validate()?;
    let run = run_toy(&cfg)?;
    let mut w = create(&dir.join(TRACE_FILE))?;
    write_trace_csv(&run.trace, &mut w)?;
    w.flush()?;
    write_summary(
        &dir,
        &Summary::Toy {
            config: cfg,
            summary: run.summary,
        },
    )
}

fn sandwich(a: SandwichArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(a.toy.common.config.as_deref())?;
    let dir = r.out_dir(a.toy.common.out_dir.clone())?;
    let batches = r.or("batches", a.batches, 100)?;
    let mut cfg = toy_config(a.toy, &mut r)?;
    r.finish()?;
    if batches < 2 {
        return Err(CliError::config("batches", "need at least 2"));
    }
    if cfg.iterations < 2 * batches + cfg.burn_in {
        return Err(CliError::config(
            "iterations",
            format!("too few for {batches} batches after burn-in"),
        ));
    }
    cfg.validate()?;
    let (summary, barker, mh) = run_sandwich(&cfg, batches)?;
    for (name, trace) in [("trace_barker.csv", &barker), ("trace_mh.csv", &mh)] {
        let mut w = create(&dir.join(name))?;
        write_trace_csv(trace, &mut w)?;
        w.flush()?;
    }
    cfg.burn_in = summary.burn_in;
    write_summary(
        &dir,
        &Summary::Sandwich {
            config: cfg,
            summary,
        },
    )
}

fn wf_sim(a: WfSimArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let dir = r.out_dir(a.common.out_dir.clone())?;
    let theta = ThetaState::new(
        r.or("gamma1", a.gamma1, 8.0)?,
        r.or("gamma2", a.gamma2, 0.5)?,
    );
    let t_start = r.or("t_start", a.t_start, 0.0)?;
    let t_end = r.or("t_end", a.t_end, 200.0)?;
    let n_obs = r.or("n_obs", a.n_obs, 201)?;
    let step = r.or("step", a.step, 1e-3)?;
    let seed: u64 = r.required("seed", a.seed)?;
    let output = r.or("output", a.output, dir.join("observations.csv"))?;
    r.finish()?;
    if n_obs < 2 {
        return Err(CliError::config("n_obs", "need at least 2"));
    }
    if !(t_end > t_start && t_start.is_finite() && t_end.is_finite()) {
        return Err(CliError::config("t_end", "must exceed t_start"));
    }
    let times: Vec<f64> = (0..n_obs)
        .map(|k| t_start + (t_end - t_start) * k as f64 / (n_obs - 1) as f64)
        .collect();
    let obs = simulate_wf_data(
        &theta,
        &times,
        step,
        &mut barker_core::rng::substream(seed, 0),
    )?;
    let mut w = create(&output)?;
    write_observations(&obs, &mut w)?;
    w.flush()?;
    println!("wrote {} observations to {}", obs.len(), output.display());
    Ok(())
}

fn wf_infer(a: WfInferArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let dir = r.out_dir(a.common.out_dir.clone())?;
    let d = GibbsConfig::default();
    let u = UpdateConfig::default();
    let obs_path: PathBuf = r.required("obs", a.obs)?;
    let iterations = r.or("iterations", a.iterations, d.iterations)?;
    let param_coin = match r
        .or("param_coin", a.param_coin, "symmetric".to_string())?
        .as_str()
    {
        "symmetric" => ParamCoin::Symmetric,
        "direct" => ParamCoin::Direct,
        other => {
            return Err(CliError::config(
                "param_coin",
                format!("expected `symmetric` or `direct`, got {other:?}"),
            ))
        }
    };
    let cfg = GibbsConfig {
        iterations,
        burn_in: r.or("burn_in", a.burn_in, d.burn_in)?.min(iterations),
        seed: r.required("seed", a.seed)?,
        path_sweeps: r.or("path_sweeps", a.path_sweeps, d.path_sweeps)?,
        step_gamma1: r.or("step_gamma1", a.step_gamma1, d.step_gamma1)?,
        step_gamma2: r.or("step_gamma2", a.step_gamma2, d.step_gamma2)?,
        init: ThetaState::new(
            r.or("init_gamma1", a.init_gamma1, d.init.gamma1)?,
            r.or("init_gamma2", a.init_gamma2, d.init.gamma2)?,
        ),
        parallel: r.or("parallel", a.parallel, d.parallel)?,
        update: UpdateConfig {
            delta: r.or("delta", a.delta, u.delta)?,
            rate_target: r.or("rate_target", a.rate_target, u.rate_target)?,
            param_rate_target: r.or(
                "param_rate_target",
                a.param_rate_target,
                u.param_rate_target,
            )?,
            max_refine: r.or("max_refine", a.max_refine, u.max_refine)?,
            param_coin,
            loop_cap: r.optional("loop_cap", a.loop_cap)?,
            audit: r.or("audit", a.audit, u.audit)?,
            force_duplicate: false,
        },
    };
    let dump = r.or("dump_skeletons", a.dump_skeletons, false)?;
    r.finish()?;
    cfg.validate()?;
    let file = File::open(&obs_path)
        .map_err(|e| CliError::config("obs", format!("{}: {e}", obs_path.display())))?;
    let obs = read_observations(file)?;

    let run = gibbs_run(&WrightFisher, &obs, &cfg)?;
    let mut w = create(&dir.join(TRACE_FILE))?;
    write_trace_csv(&run.trace, &mut w)?;
    w.flush()?;
    if dump {
        let mut w = create(&dir.join("skeletons.json"))?;
        write_skeletons_json(&run.final_state.skeletons, &mut w)?;
        w.flush()?;
    }
    let summary = run.summary(cfg.burn_in);
    write_summary(
        &dir,
        &Summary::WfInfer {
            config: cfg,
            n_obs: obs.len(),
            summary,
        },
    )
}

fn report_cmd(a: ReportArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let dir = r.out_dir(a.common.out_dir.clone())?;
    let path = r.or("summary", a.summary, dir.join(SUMMARY_FILE))?;
    r.finish()?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::config("summary", format!("{}: {e}", path.display())))?;
    let summary: Summary = serde_json::from_str(&text)
        .map_err(|e| CliError::config("summary", format!("{}: {e}", path.display())))?;
    let rendered = report::render(&summary);
    std::fs::write(dir.join(REPORT_FILE), &rendered)?;
    print!("{rendered}");
    Ok(())
}
