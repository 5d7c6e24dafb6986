//! `adm`: fit, compare and apply accumulated-damage models from the shell.
//!
//! Results go to files or to stdout as JSON; failures print one JSON line
//! `{"error": <kind>, "message": <text>}` on stderr and exit nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adm_core::damage::crosscheck::cross_validate;
use adm_core::damage::oracle::OracleOptions;
use adm_core::damage::{ModelKind, RampContext, SolverOptions};
use adm_core::dimensions::{derive_pi_system, fluid_drag, load_quantities, table1, write_pi_groups};
use adm_core::io::{
    fit, load_dataset, load_params_file, read_run, simulate_dataset, write_dataset_file, write_run,
    ConfigFile, RunManifest,
};
use adm_core::predictive::{default_grid, ecdf_band, predict_failure, replicate_datasets};
use adm_core::rng::{tag, StreamKey};
use adm_core::sampler::{bayes_factor, estimate_log_marginal};
use adm_core::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "adm", version, about = "Accumulated-damage models for lumber duration-of-load")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Table1,
    Fluid,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derive the dimensionless groups of a quantity system.
    PiGroups {
        /// CSV with header `symbol,name,F,L,T`.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        quantities: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Comma-separated repeating quantities (required with --quantities).
        #[arg(long, value_delimiter = ',')]
        repeating: Vec<String>,
        #[arg(long)]
        predictand: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a synthetic dataset from known parameters.
    Simulate {
        #[arg(long)]
        model: Option<ModelKind>,
        /// TOML with `mu_s`, `[params]` and `[rate]`.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the posterior by parallel tempering and write a run directory.
    Fit {
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides the sampler seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Suppress progress lines on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Log marginal likelihood of a fitted run.
    Evidence {
        #[arg(long)]
        run: PathBuf,
    },
    /// Bayes factor of run A over run B.
    Compare {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
    },
    /// Posterior-predictive failure times at a loading rate.
    Predict {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        draws: usize,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the run's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replicate datasets from the posterior, optionally with an ECDF band.
    Replicate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write `t,observed,lower,upper` here.
        #[arg(long)]
        band_out: Option<PathBuf>,
        /// Central band level instead of the min/max envelope, e.g. 0.9.
        #[arg(long)]
        central: Option<f64>,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validate the analytic failure times against the ODE oracle.
    Check {
        #[arg(long)]
        model: ModelKind,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        k: f64,
        #[arg(long, default_value_t = 31.0)]
        mu_s: f64,
        /// Include every draw in the report.
        #[arg(long)]
        verbose: bool,
    },
    /// Repeat the command recorded in a manifest and compare outputs.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn pi_groups(
    quantities: Option<PathBuf>,
    preset: Option<Preset>,
    repeating: Vec<String>,
    predictand: Option<String>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut sys = match (&quantities, preset) {
        (Some(path), _) => load_quantities(path)?,
        (None, Some(Preset::Table1)) => table1(),
        (None, Some(Preset::Fluid)) => fluid_drag(),
        (None, None) => return Err(Error::InvalidInput("give --quantities or --preset".into())),
    };
    if !repeating.is_empty() {
        sys.set_repeating(repeating.iter().map(String::as_str))?;
    } else if quantities.is_some() {
        return Err(Error::InvalidInput("--repeating is required with --quantities".into()));
    }
    if let Some(p) = &predictand {
        sys.set_predictand(p)?;
    }
    let groups = derive_pi_system(&sys)?;
    match out {
        Some(path) => {
            let f = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            write_pi_groups(f, &groups)
        }
        None => write_pi_groups(std::io::stdout().lock(), &groups),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn simulate(args: &[String], model: Option<ModelKind>, params: &Path, n: usize, seed: u64, out: &Path) -> Result<()> {
    let file = load_params_file(params)?;
    let model = model
        .or(file.model)
        .ok_or_else(|| Error::InvalidInput("model not given on the command line or in the params file".into()))?;
    let p = file.model_params(model)?;
    let sim = simulate_dataset(&p, n, &file.rate, file.mu_s, seed, &SolverOptions::default())?;
    write_dataset_file(out, &sim.data)?;
    let mut m = RunManifest::new("simulate", args);
    m.model = Some(model.to_string());
    m.seed = Some(seed);
    m.add_input(params)?;
    m.dataset_digest = Some(m.add_output(out)?);
    m.write(&manifest_path(out))?;
    print_json(&json!({
        "records": sim.data.len(),
        "redrawn_non_failing": sim.redrawn,
        "mean_failure_time_s": sim.data.mean_time(),
        "out": out,
    }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit_cmd(
    args: &[String],
    model: Option<ModelKind>,
    data: Option<PathBuf>,
    config: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
    quiet: bool,
) -> Result<()> {
    let mut cfg = match &config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let model = model
        .or(cfg.model)
        .ok_or_else(|| Error::InvalidInput("model not given on the command line or in the config".into()))?;
    let data_path = data
        .or_else(|| cfg.data.clone())
        .ok_or_else(|| Error::InvalidInput("data not given on the command line or in the config".into()))?;
    let out_dir = out_dir
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::InvalidInput("output directory not given".into()))?;
    if let Some(s) = seed {
        cfg.sampler.seed = s;
    }
    if threads.is_some() {
        cfg.sampler.threads = threads;
    }
    let dataset = load_dataset(&data_path, cfg.mu_s)?;
    let total = cfg.sampler.iterations;
    let step = (total / 20).max(1);
    let out = fit(model, dataset, &cfg, |p| {
        if !quiet && (p.iteration % step == 0 || p.iteration == total) {
            eprintln!("{}", json!({"event": "progress", "iteration": p.iteration, "iterations": p.iterations}));
        }
    })?;
    let mut manifest = write_run(&out_dir, &out, args)?;
    manifest.add_input(&data_path)?;
    if let Some(c) = &config {
        manifest.add_input(c)?;
    }
    manifest.write(&out_dir.join("manifest.json"))?;
    print_json(&json!({
        "model": model,
        "run": out_dir,
        "log_marginal": out.evidence.log_marginal,
        "log_marginal_std_error": out.evidence.std_error,
        "posterior": out.summary,
        "acceptance": out.samples.rungs.iter().map(|r| r.acceptance).collect::<Vec<_>>(),
        "swap_rates": out.samples.swap_rates,
        "wall_clock_s": out.wall_clock_s,
    }));
    Ok(())
}

fn evidence(run: &Path) -> Result<()> {
    let r = read_run(run)?;
    let ev = estimate_log_marginal(&r.samples)?;
    print_json(&json!({
        "model": r.model(),
        "log_marginal": ev.log_marginal,
        "std_error": ev.std_error,
        "ladder": r.samples.ladder,
        "rung_means": ev.rung_means,
    }));
    Ok(())
}

fn compare(a: &Path, b: &Path) -> Result<()> {
    let ra = read_run(a)?;
    let rb = read_run(b)?;
    if ra.data != rb.data {
        return Err(Error::InvalidInput("the two runs were fitted to different data".into()));
    }
    let ea = estimate_log_marginal(&ra.samples)?;
    let eb = estimate_log_marginal(&rb.samples)?;
    let bf = bayes_factor(ea.log_marginal, eb.log_marginal);
    print_json(&json!({
        "model_a": ra.model(),
        "model_b": rb.model(),
        "log_marginal_a": ea.log_marginal,
        "log_marginal_b": eb.log_marginal,
        "log_b12": bf.log_b12,
        "b12": if bf.b12.is_finite() { json!(bf.b12) } else { json!(format!("{}", bf.b12)) },
    }));
    Ok(())
}

fn predict(args: &[String], run: &Path, k: f64, draws: usize, out: &Path, seed: Option<u64>) -> Result<()> {
    let r = read_run(run)?;
    let seed = seed.unwrap_or(r.config.sampler.seed);
    let solver = r.config.solver();
    let key = StreamKey::root(seed).child(tag::PREDICT);
    let p = predict_failure(r.model(), &r.samples.posterior().theta, k, r.data.mu_s, draws, &solver, key)?;
    let f = std::fs::File::create(out).map_err(|e| io_err(out, e))?;
    let mut w = std::io::BufWriter::new(f);
    use std::io::Write;
    let mut text = String::from("theta_index,T_f,load\n");
    for s in &p.samples {
        text.push_str(&format!("{},{},{}\n", s.theta_index, s.time, s.load));
    }
    w.write_all(text.as_bytes()).map_err(|e| io_err(out, e))?;
    w.flush().map_err(|e| io_err(out, e))?;
    drop(w);
    let mut m = RunManifest::new("predict", args);
    m.model = Some(r.model().to_string());
    m.seed = Some(seed);
    m.add_input(&run.join("manifest.json"))?;
    m.add_output(out)?;
    m.write(&manifest_path(out))?;
    print_json(&json!({
        "k": k,
        "draws": draws,
        "failing": p.samples.len(),
        "censored_non_failing": p.censored,
        "skipped": p.skipped,
        "mean_time_s": p.mean_time,
        "mean_load": p.mean_load,
        "mean_load_std_error": p.load_std_error,
    }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn replicate(
    args: &[String],
    run: &Path,
    reps: usize,
    out: &Path,
    band_out: Option<PathBuf>,
    central: Option<f64>,
    grid_points: usize,
    seed: Option<u64>,
) -> Result<()> {
    let r = read_run(run)?;
    let seed = seed.unwrap_or(r.config.sampler.seed);
    let key = StreamKey::root(seed).child(tag::REPLICATE);
    let reps_out = replicate_datasets(r.model(), &r.samples.posterior().theta, &r.data, reps, &r.config.solver(), key)?;
    let mut text = String::from("replicate,theta_index,specimen_id,failure_time_s,loading_rate_psi_per_s\n");
    for (i, rep) in reps_out.iter().enumerate() {
        for s in &rep.data.records {
            text.push_str(&format!("{},{},{},{},{}\n", i + 1, rep.theta_index, s.id, s.time, s.rate));
        }
    }
    std::fs::write(out, text).map_err(|e| io_err(out, e))?;
    let mut m = RunManifest::new("replicate", args);
    m.model = Some(r.model().to_string());
    m.seed = Some(seed);
    m.add_input(&run.join("manifest.json"))?;
    m.add_output(out)?;
    let mut coverage = None;
    if let Some(band_path) = &band_out {
        let times: Vec<Vec<f64>> = reps_out.iter().map(|r| r.data.times()).collect();
        let observed = r.data.times();
        let mut all: Vec<&[f64]> = times.iter().map(Vec::as_slice).collect();
        all.push(&observed);
        let grid = default_grid(&all, grid_points)?;
        let band = ecdf_band(&times, &observed, &grid, central)?;
        let mut text = String::from("t,observed,lower,upper\n");
        let mut inside = 0;
        for i in 0..grid.len() {
            text.push_str(&format!("{},{},{},{}\n", band.grid[i], band.observed[i], band.lower[i], band.upper[i]));
            if band.lower[i] <= band.observed[i] && band.observed[i] <= band.upper[i] {
                inside += 1;
            }
        }
        std::fs::write(band_path, text).map_err(|e| io_err(band_path, e))?;
        m.add_output(band_path)?;
        coverage = Some(inside as f64 / grid.len() as f64);
    }
    m.write(&manifest_path(out))?;
    print_json(&json!({
        "replicates": reps_out.len(),
        "records_per_replicate": r.data.len(),
        "redrawn_non_failing": reps_out.iter().map(|r| r.redrawn).sum::<usize>(),
        "band_coverage": coverage,
    }));
    Ok(())
}

fn check(model: ModelKind, draws: usize, seed: u64, k: f64, mu_s: f64, verbose: bool) -> Result<()> {
    let ctx = RampContext::new(k, mu_s)?;
    let key = StreamKey::root(seed).child(tag::CHECK);
    let mut report = cross_validate(model, draws, key, &ctx, &SolverOptions::default(), &OracleOptions::default())?;
    if !verbose {
        report.checks.clear();
    }
    print_json(&serde_json::to_value(&report)?);
    Ok(())
}

fn rerun(manifest: &Path) -> Result<()> {
    let m = RunManifest::read(manifest)?;
    let changed = m.changed_inputs();
    if !changed.is_empty() {
        return Err(Error::InvalidInput(format!("inputs changed since the run: {}", changed.join(", "))));
    }
    let mut argv = vec!["adm".to_string()];
    argv.extend(m.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::InvalidInput(e.to_string()))?;
    if matches!(cli.command, Command::Rerun { .. }) {
        return Err(Error::InvalidInput("a manifest cannot rerun another rerun".into()));
    }
    let original = m.clone();
    execute(cli.command, &m.args)?;
    let mismatched: Vec<String> = original
        .outputs
        .iter()
        .filter(|(path, digest)| adm_core::io::sha256_file(Path::new(path)).map_or(true, |d| &d != *digest))
        .map(|(path, _)| path.clone())
        .collect();
    eprintln!(
        "{}",
        json!({"event": "rerun", "outputs": original.outputs.len(), "mismatched": mismatched})
    );
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("outputs differ: {}", mismatched.join(", "))))
    }
}

fn execute(command: Command, args: &[String]) -> Result<()> {
    match command {
        Command::PiGroups {
            quantities,
            preset,
            repeating,
            predictand,
            out,
        } => pi_groups(quantities, preset, repeating, predictand, out),
        Command::Simulate {
            model,
            params,
            n,
            seed,
            out,
        } => simulate(args, model, &params, n, seed, &out),
        Command::Fit {
            model,
            data,
            config,
            out_dir,
            seed,
            threads,
            quiet,
        } => fit_cmd(args, model, data, config, out_dir, seed, threads, quiet),
        Command::Evidence { run } => evidence(&run),
        Command::Compare { run_a, run_b } => compare(&run_a, &run_b),
        Command::Predict {
            run,
            k,
            draws,
            out,
            seed,
        } => predict(args, &run, k, draws, &out, seed),
        Command::Replicate {
            run,
            reps,
            out,
            band_out,
            central,
            grid_points,
            seed,
        } => replicate(args, &run, reps, &out, band_out, central, grid_points, seed),
        Command::Check {
            model,
            draws,
            seed,
            k,
            mu_s,
            verbose,
        } => check(model, draws, seed, k, mu_s, verbose),
        Command::Rerun { manifest } => rerun(&manifest),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": "usage", "message": e.to_string().trim()}));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
