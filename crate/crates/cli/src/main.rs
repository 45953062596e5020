use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use seedbank_core::battery::{run_acceptance, Battery};
use seedbank_core::config::Config;
use seedbank_core::dual::{dual_moment_estimate, DualRates, EventCounts, FrontIndicator};
use seedbank_core::experiments::{EdgeTracker, MomentSpec};
use seedbank_core::feynman_kac::{fk_estimate, FkEstimate, FkOptions};
use seedbank_core::grid::write_snapshot_csv;
use seedbank_core::pfde::{
    solve_two_component, supersolution_residual, verify_bound1, verify_envelope, Bound1Report,
    EnvelopeReport,
};
use seedbank_core::report::{write_edges, write_pfde_profile, ReportWriter};
use seedbank_core::spde::simulate;
use seedbank_core::stats::{replicate_seed, McEstimate};

#[derive(Parser)]
#[command(name = "seedbank", version, about = "Seed bank SPDE experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, or output file for commands that emit one JSON document.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replicate count, overriding the command's configured count.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the SPDE from the Heaviside front and write field snapshots.
    SpdeRun {
        /// Keep every k-th step.
        #[arg(long, default_value_t = 25)]
        snapshots_every: usize,
    },
    /// Estimate a dual moment with the lattice walkers.
    DualRun {
        /// Start configuration, e.g. "0:a,0.5:d".
        #[arg(long)]
        start: String,
        #[arg(long)]
        t: f64,
    },
    /// Compare SPDE and dual moments for the configured specs.
    DualityCheck,
    /// Solve the delay PDE for the configured lambdas and run its verifiers.
    PfdeSolve,
    /// Compare path-space estimates against the delay PDE solution.
    FkCheck {
        /// Evaluation points "s:x,...".
        #[arg(long)]
        points: Option<String>,
    },
    /// Edge series, tail curve and first passage statistics.
    InterfaceStats,
    /// Front symmetry z-scores.
    SymmetryCheck,
    /// Run the full acceptance battery including the determinism rerun.
    Accept,
}

fn config(common: &Common) -> Result<Config> {
    // Parsed without validation so overrides apply first.
    let mut cfg = match &common.config {
        Some(path) => Config::parse(
            &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        )?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn single_check(cfg: &Config, out: &Path, id: u8, command: &str) -> Result<bool> {
    let mut w = ReportWriter::create(out)?;
    let outcome = Battery::new(cfg).run_criterion(id, &mut w)?;
    w.finish(command, cfg)?;
    println!("{outcome}");
    Ok(outcome.pass)
}

fn spde_run(cfg: &Config, common: &Common, every: usize) -> Result<bool> {
    let sim = cfg.sim_config()?;
    let reps = common.reps.unwrap_or(1);
    let every = every.max(1);
    let last = sim.n_steps();
    let mut w = ReportWriter::create(out_dir(common))?;
    w.record_seeds("spde_run", sim.seed, reps);
    for r in 0..reps {
        let run = sim.with_seed(replicate_seed(sim.seed, r as u64));
        let mut tracker = EdgeTracker::new(cfg.edge_options());
        let mut snapshots = Vec::new();
        simulate(&run, seedbank_core::spde::initial_heaviside(run.grid), |k, s| {
            tracker.observe(s);
            if k % every == 0 || k == last {
                let mut buf = Vec::new();
                write_snapshot_csv(&mut buf, s.t, &s.u, &s.v).expect("in-memory write");
                snapshots.push((k, buf));
            }
        })?;
        for (k, buf) in snapshots {
            w.write_bytes(&format!("rep{r}/snapshot_{k:06}.csv"), &buf)?;
        }
        let edges = tracker.finish();
        write_edges(&mut w, r, &edges)?;
        println!(
            "rep {r}: seed {} final L(u) {} R(u) {}, {} margin flags",
            run.seed,
            edges.l_u.last().copied().unwrap_or(f64::NAN),
            edges.r_u.last().copied().unwrap_or(f64::NAN),
            edges.margin_flags.len()
        );
    }
    w.finish("spde-run", cfg)?;
    Ok(true)
}

#[derive(Serialize)]
struct DualRunOutput {
    start: String,
    t: f64,
    estimate: f64,
    stderr: f64,
    replicates: usize,
    events: EventCounts,
    base_seed: u64,
}

fn dual_run(cfg: &Config, common: &Common, start: &str, t: f64) -> Result<bool> {
    let points = MomentSpec::parse_points(start)?;
    let spec = MomentSpec::new(points, t)?;
    let reps = common.reps.unwrap_or(cfg.duality.dual_reps);
    let rates = DualRates::for_lattice(cfg.sim.dx, cfg.sim.c, cfg.sim.c_prime);
    let est = dual_moment_estimate(
        &spec.points,
        FrontIndicator::HEAVISIDE,
        FrontIndicator::HEAVISIDE,
        t,
        reps,
        rates,
        cfg.sim.seed,
    )?;
    emit_json(
        common.out.as_deref(),
        &DualRunOutput {
            start: spec.to_string(),
            t,
            estimate: est.estimate.mean,
            stderr: est.estimate.stderr,
            replicates: est.estimate.n,
            events: est.events,
            base_seed: cfg.sim.seed,
        },
    )?;
    Ok(true)
}

#[derive(Serialize)]
struct PfdeReport {
    lambda: f64,
    b: f64,
    bound: Bound1Report,
    envelope: EnvelopeReport,
    residual_min_alpha: f64,
    residual_min_alpha_low: f64,
}

fn pfde_solve(cfg: &Config, common: &Common) -> Result<bool> {
    let p = &cfg.pfde;
    let mut w = ReportWriter::create(out_dir(common))?;
    let mut reports = Vec::new();
    let mut ok = true;
    for &lambda in &p.lambdas {
        let sol = solve_two_component(&cfg.pfde_config(lambda, p.b)?)?;
        let g = sol.grid();
        for frac in [0.25, 0.5, 0.75, 1.0] {
            let s = frac * p.t_max;
            let k = ((s / p.dt).round() as usize).min(sol.phi.len() - 1);
            let mut buf = Vec::new();
            write_snapshot_csv(&mut buf, sol.times[k], &sol.phi[k], &sol.varphi[k])?;
            let text = String::from_utf8(buf)?.replacen("t,x,u,v", "t,x,phi,varphi", 1);
            w.write_bytes(&format!("pfde_lambda{lambda}_step{k:06}.csv"), text.as_bytes())?;
        }
        write_pfde_profile(&mut w, &format!("plots/pfde_profile_lambda{lambda}.csv"), &sol)?;
        let envelope_t = p.envelope_t.min(p.t_max);
        let bound = verify_bound1(&sol, p.alpha, p.b);
        let envelope = verify_envelope(&sol, p.b, envelope_t, p.envelope_k)?;
        let min_res = |alpha: f64| -> Result<f64> {
            let mut m = f64::INFINITY;
            for k in 0..=100 {
                let s = k as f64 * p.t_max / 100.0;
                for x in g.points().take_while(|&x| x <= p.b - g.dx() * (1.0 - 1e-9)) {
                    m = m.min(supersolution_residual(alpha, p.b, p.c, s, x)?);
                }
            }
            Ok(m)
        };
        ok &= bound.holds && envelope.holds;
        println!(
            "lambda {lambda}: max phi (x-b)^2 = {:.4} (alpha {}), K* = {:.3e}",
            bound.max_scaled, p.alpha, envelope.k_star
        );
        reports.push(PfdeReport {
            lambda,
            b: p.b,
            bound,
            envelope,
            residual_min_alpha: min_res(p.alpha)?,
            residual_min_alpha_low: min_res(p.alpha_low)?,
        });
    }
    w.write_json("pfde_report.json", &reports)?;
    w.finish("pfde-solve", cfg)?;
    Ok(ok)
}

#[derive(Serialize)]
struct FkRow {
    estimate: FkEstimate,
    pde: f64,
    pass: bool,
}

fn fk_check(cfg: &Config, common: &Common, points: Option<&str>) -> Result<bool> {
    let f = &cfg.fk;
    let points: Vec<(f64, f64)> = match points {
        Some(text) => text
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                let (s, x) = p.split_once(':').context("points must be s:x pairs")?;
                Ok((s.trim().parse()?, x.trim().parse()?))
            })
            .collect::<Result<_>>()?,
        None => f.points.clone(),
    };
    let reps = common.reps.unwrap_or(f.reps);
    let sol = solve_two_component(&cfg.pfde_config(f.lambda, f.b)?)?;
    let mut rows = Vec::new();
    for (s, x) in points {
        let estimate = fk_estimate(s, x, &sol, FkOptions::default(), reps, cfg.sim.seed)?;
        let pde = sol
            .phi_interp(s, x)
            .with_context(|| format!("point ({s}, {x}) is off the solution grid"))?;
        let McEstimate { mean, stderr, .. } = estimate.value;
        let pass = (mean - pde).abs() <= 3.0 * stderr + f.allowance;
        rows.push(FkRow { estimate, pde, pass });
    }
    let ok = rows.iter().all(|r| r.pass);
    emit_json(common.out.as_deref(), &rows)?;
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let common = &cli.common;
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let mut cfg = config(common)?;
    if let Some(reps) = common.reps {
        match cli.command {
            Command::DualityCheck | Command::SymmetryCheck => cfg.sim.reps = reps,
            Command::InterfaceStats => cfg.interface.reps = reps,
            _ => {}
        }
    }
    cfg.validate()?;
    match &cli.command {
        Command::SpdeRun { snapshots_every } => spde_run(&cfg, common, *snapshots_every),
        Command::DualRun { start, t } => dual_run(&cfg, common, start, *t),
        Command::DualityCheck => single_check(&cfg, &out_dir(common), 3, "duality-check"),
        Command::PfdeSolve => pfde_solve(&cfg, common),
        Command::FkCheck { points } => fk_check(&cfg, common, points.as_deref()),
        Command::InterfaceStats => single_check(&cfg, &out_dir(common), 9, "interface-stats"),
        Command::SymmetryCheck => single_check(&cfg, &out_dir(common), 10, "symmetry-check"),
        Command::Accept => {
            let outcomes = run_acceptance(&cfg, &out_dir(common))?;
            for o in &outcomes {
                println!("{o}");
            }
            Ok(outcomes.iter().all(|o| o.pass))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
