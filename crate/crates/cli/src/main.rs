//! Command-line front end: simulation, coupling, verification suites, the
//! rate experiment, and the appendix oracles.
//!
//! Exit codes: 0 when every verdict passes, 1 when at least one check
//! fails, 2 on usage or configuration errors.

mod output;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use cbm_core::coupling::{
    build_grid_coupling, build_skeleton_coupling, decomposition_diagnostics, CouplingRealization,
};
use cbm_core::rng::{derive_stream, stream_id, SeedSpec, StreamTag};
use cbm_core::stats::default_grid_step;
use cbm_core::suites::{run_suite, Suite, VerifyOutput};
use cbm_core::transport::{simulate_family, ThetaSet};

/// Environment variable overriding the default output directory.
const OUT_DIR_ENV: &str = "CBM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "cbm",
    version,
    about = "Poisson-driven approximations of complex Brownian motion: simulation, strong coupling, and verification"
)]
struct Cli {
    /// Master seed; every report echoes it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Optional JSON config file; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (flag > CBM_OUT_DIR > config > current directory).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Stdout rendering of reports.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads (0 = hardware parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Table,
    Json,
    Csv,
}

impl Format {
    fn as_str(self) -> &'static str {
        match self {
            Format::Table => "table",
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate transport paths and dump them as `t,re,im` CSV files.
    Simulate(SimulateArgs),
    /// Build coupling realizations and dump their diagnostics.
    Couple(CoupleArgs),
    /// Run a verification suite and write its JSON report.
    Verify(VerifyArgs),
    /// Run the strong-approximation rate experiment.
    Rate(RateArgs),
    /// Run the appendix oracles (combinatorial count, series, thinning pmf).
    Appendix(AppendixArgs),
    /// Re-render a previously written JSON report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Angle(s) in radians; reduced mod 2 pi and validated.
    #[arg(long = "theta", required = true, num_args = 1.., value_delimiter = ',')]
    thetas: Vec<f64>,
    /// Scale parameter.
    #[arg(long)]
    eps: f64,
    /// Number of independent paths.
    #[arg(long, default_value_t = 1)]
    paths: usize,
    /// Time horizon.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Sample on a uniform grid with this many intervals instead of at the
    /// path breakpoints.
    #[arg(long)]
    grid: Option<usize>,
    /// Also dump each path's jump skeleton as `time,jump_N,jump_Nprime`.
    #[arg(long, default_value_t = false)]
    dump_skeleton: bool,
    /// Emit one summary CSV (`path,theta,t,re,im`) instead of per-path files.
    #[arg(long, default_value_t = false)]
    summary: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Backend {
    Skeleton,
    Grid,
}

#[derive(Args, Debug)]
struct CoupleArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long, value_enum, default_value_t = Backend::Skeleton)]
    backend: Backend,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Grid backend step override (default `eps^3/80`).
    #[arg(long)]
    grid_step: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// lemma31 | lemma32 | covariance | normality | independence | coupling | rate | all
    #[arg(long)]
    suite: String,
}

#[derive(Args, Debug)]
struct RateArgs {
    /// Decreasing epsilon ladder.
    #[arg(long = "eps-list", value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05, 0.02])]
    eps_list: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 2.0)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Grid step override applied to every epsilon (default `eps^3/80`).
    #[arg(long)]
    grid_step: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AppendixCheck {
    #[value(name = "lemmaF", alias = "lemmaf")]
    LemmaF,
    Serie,
    Thinning,
    All,
}

#[derive(Args, Debug)]
struct AppendixArgs {
    #[arg(long, value_enum, default_value_t = AppendixCheck::All)]
    check: AppendixCheck,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Path of a JSON report produced by `verify` or `rate`.
    #[arg(long)]
    input: PathBuf,
}

/// Keys accepted in the optional JSON config file.
#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    format: Option<Format>,
    jobs: Option<usize>,
}

/// Resolved run configuration (flag > environment > config file > default).
#[derive(Debug)]
struct RunConfig {
    seed: u64,
    out_dir: PathBuf,
    format: Format,
    jobs: usize,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading --config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing --config {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let env_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    Ok(RunConfig {
        seed: cli.seed.or(file.seed).unwrap_or(1),
        out_dir: cli
            .out_dir
            .clone()
            .or(env_dir)
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from(".")),
        format: cli.format.or(file.format).unwrap_or(Format::Table),
        jobs: cli.jobs.or(file.jobs).unwrap_or(0),
    })
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    });
}

fn run(cli: Cli) -> Result<i32> {
    let cfg = resolve_config(&cli)?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .context("initializing worker pool")?;
    }
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(&cfg, args),
        Command::Couple(args) => cmd_couple(&cfg, args),
        Command::Verify(args) => cmd_verify(&cfg, args),
        Command::Rate(args) => cmd_rate(&cfg, args),
        Command::Appendix(args) => cmd_appendix(&cfg, args),
        Command::Report(args) => cmd_report(&cfg, args),
    }
}

#[derive(Serialize)]
struct SimulateManifest {
    seed: u64,
    thetas: Vec<f64>,
    eps: f64,
    paths: usize,
    horizon: f64,
    files: Vec<String>,
}

fn cmd_simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<i32> {
    let thetas = ThetaSet::new(&args.thetas, args.eps)
        .map_err(|e| anyhow!("invalid --theta/--eps: {e}"))?;
    if args.paths == 0 {
        return Err(anyhow!("invalid --paths: must be at least 1"));
    }
    if !args.horizon.is_finite() || args.horizon < 0.0 {
        return Err(anyhow!("invalid --horizon: must be finite and >= 0"));
    }
    let grid_times: Option<Vec<f64>> = args.grid.map(|n| {
        (0..=n)
            .map(|i| args.horizon * i as f64 / n.max(1) as f64)
            .collect()
    });

    let mut files = Vec::new();
    let mut summary = String::from("path,theta,t,re,im\n");
    for path_idx in 0..args.paths {
        let mut stream = derive_stream(SeedSpec::new(
            cfg.seed,
            stream_id(StreamTag::SimulateCmd, 0, path_idx as u32),
        ));
        if args.dump_skeleton {
            // Probe a clone of the stream so the dumped skeleton is exactly
            // the one that drives this path family.
            let mut probe = stream.clone();
            let eps = thetas.epsilon();
            let skel =
                cbm_core::poisson::simulate_master(2.0 * args.horizon / (eps * eps), &mut probe)?;
            let mut buf = Vec::new();
            skel.write_csv(&mut buf)?;
            let name = format!("skeleton_{path_idx:03}.csv");
            output::write_atomic(&cfg.out_dir, &name, &buf)?;
            files.push(name);
        }
        let family = simulate_family(&thetas, args.horizon, &mut stream)?;
        for path in &family {
            if args.summary {
                let times: Vec<f64> = match &grid_times {
                    Some(g) => g.clone(),
                    None => path.breakpoints().to_vec(),
                };
                for (&t, z) in times.iter().zip(path.sample_grid(&times)?) {
                    summary.push_str(&format!(
                        "{},{},{},{},{}\n",
                        path_idx, path.theta, t, z.re, z.im
                    ));
                }
            } else {
                let mut buf = Vec::new();
                path.write_csv(&mut buf, grid_times.as_deref())?;
                let name = if thetas.angles().len() == 1 {
                    format!("path_{path_idx:03}.csv")
                } else {
                    format!("path_{path_idx:03}_theta_{}.csv", path.theta)
                };
                output::write_atomic(&cfg.out_dir, &name, &buf)?;
                files.push(name);
            }
        }
    }
    if args.summary {
        output::write_atomic(&cfg.out_dir, "paths.csv", summary.as_bytes())?;
        files.push("paths.csv".to_string());
    }
    let manifest = SimulateManifest {
        seed: cfg.seed,
        thetas: args.thetas.clone(),
        eps: args.eps,
        paths: args.paths,
        horizon: args.horizon,
        files,
    };
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    output::write_atomic(&cfg.out_dir, "simulate_manifest.json", json.as_bytes())?;
    println!(
        "wrote {} file(s) to {}",
        manifest.files.len() + 1,
        cfg.out_dir.display()
    );
    Ok(0)
}

#[derive(Serialize)]
struct CoupleRecord {
    rep: usize,
    steps: usize,
    sup_error: Option<f64>,
    max_lambda_dev: f64,
    max_gamma_dev: f64,
    l1: f64,
    l21: f64,
    l22: f64,
    l3: f64,
}

#[derive(Serialize)]
struct CoupleReport {
    seed: u64,
    eps: f64,
    theta: f64,
    backend: Backend,
    reps: usize,
    horizon: f64,
    grid_step: Option<f64>,
    realizations: Vec<CoupleRecord>,
}

fn cmd_couple(cfg: &RunConfig, args: &CoupleArgs) -> Result<i32> {
    if args.reps == 0 {
        return Err(anyhow!("invalid --reps: must be at least 1"));
    }
    let grid_step = match args.backend {
        Backend::Grid => Some(args.grid_step.unwrap_or_else(|| default_grid_step(args.eps))),
        Backend::Skeleton => None,
    };
    let build = |rep: usize| -> cbm_core::Result<CouplingRealization> {
        let mut stream = derive_stream(SeedSpec::new(
            cfg.seed,
            stream_id(StreamTag::CoupleCmd, 0, rep as u32),
        ));
        match args.backend {
            Backend::Skeleton => {
                build_skeleton_coupling(args.eps, args.theta, args.horizon, &mut stream)
            }
            Backend::Grid => build_grid_coupling(
                args.eps,
                args.theta,
                args.horizon,
                grid_step.expect("grid step set for grid backend"),
                &mut stream,
            ),
        }
    };
    let records: Vec<CoupleRecord> = (0..args.reps)
        .into_par_iter()
        .map(|rep| -> cbm_core::Result<CoupleRecord> {
            let r = build(rep)?;
            let d = decomposition_diagnostics(&r)?;
            Ok(CoupleRecord {
                rep,
                steps: r.len(),
                sup_error: r.sup_error,
                max_lambda_dev: d.max_lambda_dev,
                max_gamma_dev: d.max_gamma_dev,
                l1: d.l1,
                l21: d.l21,
                l22: d.l22,
                l3: d.l3,
            })
        })
        .collect::<cbm_core::Result<_>>()
        .map_err(|e| anyhow!("invalid --eps/--theta/--grid-step: {e}"))?;

    let mut csv = String::from("eps,rep,sup_error,L1,L21,L22,L3,maxLambdaDev,maxGammaDev\n");
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            args.eps,
            r.rep,
            r.sup_error.map(|s| s.to_string()).unwrap_or_default(),
            r.l1,
            r.l21,
            r.l22,
            r.l3,
            r.max_lambda_dev,
            r.max_gamma_dev
        ));
    }
    output::write_atomic(&cfg.out_dir, "couple_ensemble.csv", csv.as_bytes())?;

    let report = CoupleReport {
        seed: cfg.seed,
        eps: args.eps,
        theta: args.theta,
        backend: args.backend,
        reps: args.reps,
        horizon: args.horizon,
        grid_step,
        realizations: records,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    output::write_atomic(&cfg.out_dir, "couple_diagnostics.json", json.as_bytes())?;
    println!(
        "wrote couple_ensemble.csv and couple_diagnostics.json to {}",
        cfg.out_dir.display()
    );
    Ok(0)
}

fn cmd_verify(cfg: &RunConfig, args: &VerifyArgs) -> Result<i32> {
    let suite = Suite::parse(&args.suite).ok_or_else(|| {
        anyhow!(
            "invalid --suite {:?}: expected one of lemma31, lemma32, covariance, normality, independence, coupling, rate, all",
            args.suite
        )
    })?;
    let output = run_suite(cfg.seed, suite).map_err(|e| anyhow!("verify failed: {e}"))?;
    let json = serde_json::to_string_pretty(&output)? + "\n";
    let name = format!("verify_{}.json", output.suite);
    output::write_atomic(&cfg.out_dir, &name, json.as_bytes())?;
    print!("{}", output::render_verify(&output, cfg.format.as_str())?);
    Ok(if output.any_fail() { 1 } else { 0 })
}

fn cmd_rate(cfg: &RunConfig, args: &RateArgs) -> Result<i32> {
    let report = cbm_core::stats::rate_experiment(
        cfg.seed,
        args.theta,
        &args.eps_list,
        args.reps,
        args.horizon,
        args.grid_step,
    )
    .map_err(|e| anyhow!("invalid rate configuration (--eps-list/--reps/--theta): {e}"))?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    output::write_atomic(&cfg.out_dir, "rate_report.json", json.as_bytes())?;
    match cfg.format {
        Format::Json => print!("{json}"),
        Format::Csv => print!("{}", output::rate_csv(&report)),
        Format::Table => print!("{}", output::rate_table(&report)),
    }
    Ok(if report.any_fail() { 1 } else { 0 })
}

#[derive(Serialize)]
struct AppendixReport {
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lemma_f: Option<cbm_core::appendix::BoundCheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    serie: Option<Vec<cbm_core::appendix::SeriesProbe>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thinning: Option<Vec<cbm_core::appendix::ThinningPmfReport>>,
    all_pass: bool,
}

fn cmd_appendix(cfg: &RunConfig, args: &AppendixArgs) -> Result<i32> {
    use cbm_core::appendix;

    let mut all_pass = true;
    let mut report = AppendixReport {
        seed: cfg.seed,
        lemma_f: None,
        serie: None,
        thinning: None,
        all_pass: true,
    };
    let want = |c: AppendixCheck| args.check == c || args.check == AppendixCheck::All;

    if want(AppendixCheck::LemmaF) {
        let r = appendix::lemma_f_bound_check(12, 12)?;
        all_pass &= r.all_hold;
        report.lemma_f = Some(r);
    }
    if want(AppendixCheck::Serie) {
        let mut probes = Vec::new();
        for delta in [0.3, 0.5, 1.0] {
            let p = appendix::serie_probe(delta, &[100, 200, 400])?;
            all_pass &= p.converged;
            probes.push(p);
        }
        report.serie = Some(probes);
    }
    if want(AppendixCheck::Thinning) {
        let mut reports = Vec::new();
        for delta in [0.5, 1.0, 2.0] {
            let r = appendix::thinning_pmf_check(delta, 10)?;
            all_pass &= r.max_rel_error < 1e-12;
            reports.push(r);
        }
        report.thinning = Some(reports);
    }
    report.all_pass = all_pass;

    let json = serde_json::to_string_pretty(&report)? + "\n";
    output::write_atomic(&cfg.out_dir, "appendix_report.json", json.as_bytes())?;
    if cfg.format == Format::Json {
        print!("{json}");
    } else {
        if let Some(l) = &report.lemma_f {
            println!(
                "lemmaF: {} grid points checked, bound holds: {}",
                l.rows.len(),
                l.all_hold
            );
        }
        if let Some(probes) = &report.serie {
            for p in probes {
                let last = p.partial_sums.last().expect("nonempty schedule");
                println!(
                    "serie delta={}: S_{} = {:.9}, converged: {}",
                    p.delta, last.0, last.1, p.converged
                );
            }
        }
        if let Some(ts) = &report.thinning {
            for t in ts {
                println!(
                    "thinning delta={}: max relative error {:.3e}",
                    t.interval_length, t.max_rel_error
                );
            }
        }
        println!("all_pass: {all_pass}");
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_report(cfg: &RunConfig, args: &ReportArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading --input {}", args.input.display()))?;
    // Try the verify schema first, then the rate schema.
    if let Ok(output) = serde_json::from_str::<VerifyOutput>(&text) {
        print!("{}", output::render_verify(&output, cfg.format.as_str())?);
        return Ok(if output.any_fail() { 1 } else { 0 });
    }
    if let Ok(rate) = serde_json::from_str::<cbm_core::report::RateReport>(&text) {
        match cfg.format {
            Format::Json => print!("{text}"),
            Format::Csv => print!("{}", output::rate_csv(&rate)),
            Format::Table => print!("{}", output::rate_table(&rate)),
        }
        return Ok(if rate.any_fail() { 1 } else { 0 });
    }
    Err(anyhow!(
        "--input {} is neither a verify report nor a rate report",
        args.input.display()
    ))
}
