//! The acceptance battery. Each check writes its results through a
//! [`ReportWriter`] and returns a [`CriterionOutcome`]; the determinism
//! check reruns the whole battery from the manifest of the first run and
//! compares every result file byte for byte.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dual::Marker;
use crate::error::{Error, Result};
use crate::experiments::{
    duality_from_states, interface_replicates, spde_final_states, symmetry_from_states,
    tail_curve_from_replicates, DualityReport, SymmetryReport, TailCurve,
};
use crate::feynman_kac::{fk_estimate, fk_stopped_tail, FkEstimate, FkOptions, StoppedTailReport, TailOptions};
use crate::grid::{fmt_f64, heat_semigroup_heaviside};
use crate::pfde::{
    solve_memory_quadrature, solve_two_component, supersolution_residual, verify_bound1,
    verify_envelope, Bound1Report, EnvelopeReport, PfdeSolution,
};
use crate::report::{
    compare_dirs, compare_outputs, write_duality_gaps, write_edges, write_pfde_profile,
    write_symmetry, write_tail_curve, ExperimentManifest, ReportWriter, MANIFEST_FILE,
};
use crate::spde::{delay_quadrature_v, initial_heaviside, run_spde, simulate, SpdeState, PINNED_SITES};
use crate::stats::replicate_seed;

/// Largest allowed deviation from the heat semigroup in the noiseless run.
pub const DETERMINISTIC_TOL: f64 = 5e-3;
/// Time of the noiseless comparison.
pub const DETERMINISTIC_T: f64 = 0.25;
/// Spacing of the time lattice on which the supersolution residual is sampled.
pub const RESIDUAL_DS: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

/// Runs criteria one to ten against one configuration.
pub struct Battery<'a> {
    cfg: &'a Config,
    shared: Option<Vec<SpdeState>>,
}

impl<'a> Battery<'a> {
    pub fn new(cfg: &'a Config) -> Self {
        Self { cfg, shared: None }
    }

    /// SPDE states at the duality time, shared by the duality and symmetry
    /// checks.
    fn shared_states(&mut self, w: &mut ReportWriter) -> Result<&[SpdeState]> {
        if self.shared.is_none() {
            let sim = self.cfg.sim_config()?.with_horizon(self.cfg.duality.t)?;
            w.record_seeds("spde_shared", sim.seed, self.cfg.sim.reps);
            self.shared = Some(spde_final_states(&sim, self.cfg.sim.reps)?);
        }
        Ok(self.shared.as_deref().unwrap_or_default())
    }

    /// Identifiers and names of the checks run by [`Battery::run`].
    pub const CHECKS: [(u8, &'static str); 10] = [
        (1, "deterministic limit"),
        (2, "pathwise delay identity"),
        (3, "duality battery"),
        (4, "PFDE formulation equivalence"),
        (5, "supersolution residual"),
        (6, "comparison bound"),
        (7, "Feynman-Kac consistency"),
        (8, "envelope"),
        (9, "interface compactness"),
        (10, "symmetry"),
    ];

    /// Runs one check, writing its result files through `w`.
    pub fn run_criterion(&mut self, id: u8, w: &mut ReportWriter) -> Result<CriterionOutcome> {
        let name = Self::CHECKS
            .iter()
            .find(|c| c.0 == id)
            .map(|c| c.1)
            .ok_or_else(|| Error::Precondition(format!("no check with id {id}")))?;
        let start = Instant::now();
        let (pass, detail) = match id {
            1 => self.deterministic_limit(w)?,
            2 => self.delay_identity(w)?,
            3 => self.duality(w)?,
            4 => self.formulations(w)?,
            5 => self.residual(w)?,
            6 => self.comparison_bound(w)?,
            7 => self.feynman_kac(w)?,
            8 => self.envelope(w)?,
            9 => self.interface(w)?,
            _ => self.symmetry(w)?,
        };
        let seconds = start.elapsed().as_secs_f64();
        w.record_timing(name, seconds);
        Ok(CriterionOutcome {
            id,
            name: name.to_string(),
            pass,
            detail,
            seconds,
        })
    }

    pub fn run(&mut self, w: &mut ReportWriter) -> Result<Vec<CriterionOutcome>> {
        Self::CHECKS
            .iter()
            .map(|&(id, _)| self.run_criterion(id, w))
            .collect()
    }

    fn deterministic_limit(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        #[derive(Serialize)]
        struct Row {
            t: f64,
            max_error: f64,
            max_error_unshifted: f64,
        }
        let sim = self.cfg.sim_config()?.with_noise(false);
        let (sim, dt) = (crate::spde::SimConfig { c: 0.0, c_prime: 0.0, ..sim }, sim.dt);
        let g = sim.grid;
        let centre = g.dx() / 2.0;
        // Bracket the target by the neighbouring steps when it is off the time lattice.
        let ratio = DETERMINISTIC_T / dt;
        let steps: Vec<usize> = if (ratio - ratio.round()).abs() < 1e-9 {
            vec![ratio.round() as usize]
        } else {
            vec![ratio.floor() as usize, ratio.ceil() as usize]
        };
        let last = *steps.last().unwrap_or(&0);
        let mut kept = Vec::new();
        let horizon = sim.with_horizon(last as f64 * dt)?;
        simulate(&horizon, initial_heaviside(g), |k, s| {
            if steps.contains(&k) {
                kept.push(s.clone());
            }
        })?;
        let mut rows = Vec::new();
        for s in &kept {
            let mut max_error: f64 = 0.0;
            let mut max_error_unshifted: f64 = 0.0;
            for i in PINNED_SITES..g.len() - PINNED_SITES {
                let x = g.point(i);
                let u = s.u.values[i];
                max_error = max_error.max((u - heat_semigroup_heaviside(s.t, x - centre)?).abs());
                max_error_unshifted = max_error_unshifted.max((u - heat_semigroup_heaviside(s.t, x)?).abs());
            }
            rows.push(Row { t: s.t, max_error, max_error_unshifted });
        }
        w.write_json("deterministic.json", &rows)?;
        let pass = rows.iter().all(|r| r.max_error <= DETERMINISTIC_TOL);
        let detail = rows
            .iter()
            .map(|r| format!("t={}: max err {} (unshifted {})", r.t, sci(r.max_error), sci(r.max_error_unshifted)))
            .collect::<Vec<_>>()
            .join("; ");
        Ok((pass, format!("{detail}; tol {}", sci(DETERMINISTIC_TOL))))
    }

    fn delay_identity(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        let sim = self.cfg.sim_config()?;
        let reps = self.cfg.delay.reps;
        let tol = self.cfg.delay.error_factor * sim.dt;
        let base = sim.seed;
        w.record_seeds("delay_identity", base, reps);
        let errors: Vec<f64> = {
            use rayon::prelude::*;
            (0..reps as u64)
                .into_par_iter()
                .map(|r| -> Result<f64> {
                    let traj = run_spde(&sim.with_seed(replicate_seed(base, r)))?;
                    let v0 = &traj.snapshots[0].v;
                    let mut worst: f64 = 0.0;
                    for s in &traj.snapshots[1..] {
                        let q = delay_quadrature_v(&traj.snapshots, v0, sim.c_prime, s.t)?;
                        worst = worst.max(q.max_abs_diff(&s.v));
                    }
                    Ok(worst)
                })
                .collect::<Result<_>>()?
        };
        let worst = errors.iter().copied().fold(0.0, f64::max);
        let rows: Vec<Vec<String>> = errors
            .iter()
            .enumerate()
            .map(|(k, e)| vec![k.to_string(), fmt_f64(*e)])
            .collect();
        w.write_csv("delay_identity.csv", "replicate,max_error", &rows)?;
        Ok((
            worst <= tol,
            format!("{reps} runs, max error {} vs {}", sci(worst), sci(tol)),
        ))
    }

    fn duality(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        let cfg = self.cfg;
        let sim = cfg.sim_config()?.with_horizon(cfg.duality.t)?;
        let specs = cfg.moment_specs()?;
        let states = self.shared_states(w)?;
        w.record_seeds("dual", sim.seed, cfg.duality.dual_reps);
        let reports: Vec<DualityReport> = specs
            .iter()
            .map(|s| duality_from_states(s, states, &sim, cfg.duality.dual_reps, cfg.duality.allowance))
            .collect::<Result<_>>()?;
        write_duality_gaps(w, &reports)?;
        let detail = reports
            .iter()
            .map(|r| format!("({}) gap {:+.4} z {:+.2}", r.spec, r.gap, r.z))
            .collect::<Vec<_>>()
            .join("; ");
        Ok((reports.iter().all(|r| r.pass), detail))
    }

    fn symmetry(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        let points = self.cfg.symmetry.points.clone();
        let report: SymmetryReport = symmetry_from_states(self.shared_states(w)?, &points)?;
        write_symmetry(w, &report)?;
        let detail = report
            .rows
            .iter()
            .map(|r| format!("x={} z {:+.2}", r.x, r.z))
            .collect::<Vec<_>>()
            .join("; ");
        Ok((report.pass, detail))
    }

    fn solutions(&self) -> Result<Vec<(f64, PfdeSolution, PfdeSolution)>> {
        let p = &self.cfg.pfde;
        p.lambdas
            .iter()
            .map(|&lambda| {
                let cfg = self.cfg.pfde_config(lambda, p.b)?;
                Ok((lambda, solve_two_component(&cfg)?, solve_memory_quadrature(&cfg)?))
            })
            .collect()
    }

    fn formulations(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        let tol = self.cfg.pfde.rel_tol;
        let mut pass = true;
        let mut parts = Vec::new();
        let mut rows = Vec::new();
        for (lambda, local, memory) in self.solutions()? {
            let rel = local.relative_sup_difference(&memory);
            let min = local.min_value().min(memory.min_value());
            pass &= rel <= tol && min >= -1e-12;
            parts.push(format!("lambda={lambda}: rel {}", sci(rel)));
            rows.push(vec![fmt_f64(lambda), fmt_f64(rel), fmt_f64(min)]);
            write_pfde_profile(w, &format!("plots/pfde_profile_lambda{lambda}.csv"), &local)?;
        }
        w.write_csv("pfde_formulations.csv", "lambda,relative_sup_difference,min_value", &rows)?;
        Ok((pass, format!("{}; tol {}", parts.join("; "), sci(tol))))
    }

    fn residual(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        let p = &self.cfg.pfde;
        let g = self.cfg.pfde_grid()?;
        let n_s = (p.t_max / RESIDUAL_DS).round() as usize;
        let min_residual = |alpha: f64| -> Result<(f64, f64, f64)> {
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for k in 0..=n_s {
                let s = k as f64 * RESIDUAL_DS;
                for x in g.points().take_while(|&x| x <= p.b - g.dx() * (1.0 - 1e-9)) {
                    let r = supersolution_residual(alpha, p.b, p.c, s, x)?;
                    if r < best.0 {
                        best = (r, s, x);
                    }
                }
            }
            Ok(best)
        };
        let hi = min_residual(p.alpha)?;
        let lo = min_residual(p.alpha_low)?;
        let rows = vec![
            vec![fmt_f64(p.alpha), fmt_f64(hi.0), fmt_f64(hi.1), fmt_f64(hi.2)],
            vec![fmt_f64(p.alpha_low), fmt_f64(lo.0), fmt_f64(lo.1), fmt_f64(lo.2)],
        ];
        w.write_csv("supersolution_residual.csv", "alpha,min_residual,s,x", &rows)?;
        Ok((
            hi.0 >= 0.0 && lo.0 < 0.0,
            format!(
                "alpha={}: min {}; alpha={}: min {} at (s={}, x={:.1})",
                p.alpha,
                sci(hi.0),
                p.alpha_low,
                sci(lo.0),
                lo.1,
                lo.2
            ),
        ))
    }

    fn comparison_bound(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        let p = &self.cfg.pfde;
        let mut reports: Vec<(f64, Bound1Report)> = Vec::new();
        for &lambda in &p.lambdas {
            let sol = solve_two_component(&self.cfg.pfde_config(lambda, p.b)?)?;
            reports.push((lambda, verify_bound1(&sol, p.alpha, p.b)));
        }
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|(l, r)| {
                vec![
                    fmt_f64(*l),
                    fmt_f64(r.max_scaled),
                    fmt_f64(r.max_scaled_half),
                    fmt_f64(r.argmax_s),
                    fmt_f64(r.argmax_x),
                ]
            })
            .collect();
        w.write_csv("comparison_bound.csv", "lambda,max_scaled,max_scaled_half,s,x", &rows)?;
        let detail = reports
            .iter()
            .map(|(l, r)| format!("lambda={l}: max {:.4}", r.max_scaled))
            .collect::<Vec<_>>()
            .join("; ");
        Ok((reports.iter().all(|(_, r)| r.holds), format!("{detail} vs {}", p.alpha)))
    }

    fn feynman_kac(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        #[derive(Serialize)]
        struct Row {
            estimate: FkEstimate,
            pde: f64,
            pass: bool,
        }
        let f = &self.cfg.fk;
        let sol = solve_two_component(&self.cfg.pfde_config(f.lambda, f.b)?)?;
        let seed = self.cfg.sim.seed;
        w.record_seeds("feynman_kac", seed, f.reps);
        let mut rows = Vec::new();
        for &(s, x) in &f.points {
            let estimate = fk_estimate(s, x, &sol, FkOptions::default(), f.reps, seed)?;
            let pde = sol.phi_interp(s, x).unwrap_or(f64::NAN);
            let pass = (estimate.value.mean - pde).abs() <= 3.0 * estimate.value.stderr + f.allowance;
            rows.push(Row { estimate, pde, pass });
        }
        w.write_json("feynman_kac.json", &rows)?;
        let detail = rows
            .iter()
            .map(|r| {
                format!(
                    "(s={}, x={}) mc {} pde {}",
                    r.estimate.s,
                    r.estimate.x,
                    sci(r.estimate.value.mean),
                    sci(r.pde)
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        Ok((rows.iter().all(|r| r.pass), detail))
    }

    fn envelope(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        #[derive(Serialize)]
        struct Out {
            envelope: EnvelopeReport,
            tail: StoppedTailReport,
        }
        let p = &self.cfg.pfde;
        let (b, t) = (p.envelope_b, p.envelope_t);
        let sol = solve_two_component(&self.cfg.pfde_config(p.envelope_lambda, b)?)?;
        let envelope = verify_envelope(&sol, b, t, p.envelope_k)?;
        let x = b - 3.0 * t.sqrt();
        let opts = TailOptions {
            c: p.c,
            c_prime: p.c,
            start: Marker::Active,
            dt_path: p.dt,
        };
        let seed = self.cfg.sim.seed;
        w.record_seeds("stopped_tail", seed, self.cfg.fk.tail_reps);
        let tail = fk_stopped_tail(t, x, b, t, opts, self.cfg.fk.tail_reps, seed)?;
        let rows: Vec<Vec<String>> = envelope
            .profile_x
            .iter()
            .zip(&envelope.profile_ratio)
            .map(|(x, r)| vec![fmt_f64(*x), fmt_f64(*r)])
            .collect();
        w.write_csv("plots/envelope_profile.csv", "x,ratio", &rows)?;
        let k_ok = envelope.k_star.is_finite() && envelope.k_star < p.envelope_k;
        let tail_ok = tail.onoff.mean <= tail.gaussian_bound + 3.0 * tail.onoff.stderr;
        let detail = format!(
            "K* {} (< {}); hit prob {} vs bound {} (brownian {})",
            sci(envelope.k_star),
            p.envelope_k,
            sci(tail.onoff.mean),
            sci(tail.gaussian_bound),
            sci(tail.brownian.mean)
        );
        w.write_json("envelope.json", &Out { envelope, tail })?;
        Ok((k_ok && tail_ok, detail))
    }

    fn interface(&mut self, w: &mut ReportWriter) -> Result<(bool, String)> {
        #[derive(Serialize)]
        struct Summary {
            replicates: usize,
            flagged: usize,
            ordering_failures: usize,
            r_v_monotone_failures: usize,
            l_v_monotone_failures: usize,
            tail: TailCurve,
            tau_level: f64,
            tau_reached: usize,
            tau_median: Option<f64>,
        }
        let cfg = self.cfg;
        let sim = cfg.sim_config()?;
        let reps = cfg.interface.reps;
        let tau_level = cfg.interface.levels.first().copied().unwrap_or(1.0);
        w.record_seeds("interface", sim.seed, reps);
        let runs = interface_replicates(&sim, reps, cfg.edge_options(), &[tau_level])?;
        for (k, r) in runs.iter().enumerate() {
            write_edges(w, k, &r.edges)?;
        }
        let tail = tail_curve_from_replicates(&runs, &cfg.interface.levels);
        write_tail_curve(w, &tail)?;
        let count = |f: &dyn Fn(&crate::experiments::InterfaceReplicate) -> bool| runs.iter().filter(|r| f(r)).count();
        let mut taus: Vec<f64> = runs.iter().filter_map(|r| r.tau[0]).collect();
        taus.sort_by(f64::total_cmp);
        let summary = Summary {
            replicates: reps,
            flagged: count(&|r| r.edges.flagged()),
            ordering_failures: count(&|r| !r.edges.ordering_ok),
            r_v_monotone_failures: count(&|r| !r.edges.r_v_monotone),
            l_v_monotone_failures: count(&|r| !r.edges.l_v_monotone),
            tau_level,
            tau_reached: taus.len(),
            tau_median: (taus.len() * 2 > reps).then(|| taus[reps / 2]),
            tail,
        };
        let pass = summary.flagged == 0
            && summary.ordering_failures == 0
            && summary.r_v_monotone_failures == 0
            && summary.tail.monotone;
        let detail = format!(
            "{} reps: {} margin-flagged, {} ordering failures, {} R(v) monotonicity failures, tail {} ({})",
            reps,
            summary.flagged,
            summary.ordering_failures,
            summary.r_v_monotone_failures,
            if summary.tail.monotone { "monotone" } else { "not monotone" },
            summary
                .tail
                .rows
                .iter()
                .map(|r| format!("{:.3}", r.p_hat))
                .collect::<Vec<_>>()
                .join(",")
        );
        w.write_json("interface.json", &summary)?;
        Ok((pass, detail))
    }
}

pub struct BatteryRun {
    pub outcomes: Vec<CriterionOutcome>,
    pub manifest: ExperimentManifest,
    pub dir: PathBuf,
}

/// Runs criteria one to ten into `dir` and writes the manifest.
pub fn run_battery(cfg: &Config, dir: &Path) -> Result<BatteryRun> {
    cfg.validate()?;
    let mut w = ReportWriter::create(dir)?;
    let outcomes = Battery::new(cfg).run(&mut w)?;
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| vec![o.id.to_string(), o.name.clone(), o.pass.to_string()])
        .collect();
    w.write_csv("criteria.csv", "id,name,pass", &rows)?;
    w.write_json("criteria.json", &outcomes)?;
    let manifest = w.finish("accept", cfg)?;
    Ok(BatteryRun {
        outcomes,
        manifest,
        dir: dir.to_path_buf(),
    })
}

/// Full acceptance run: the battery into `out/run`, a rerun from that
/// manifest into `out/rerun`, and the byte comparison of the two.
pub fn run_acceptance(cfg: &Config, out: &Path) -> Result<Vec<CriterionOutcome>> {
    let first = run_battery(cfg, &out.join("run"))?;
    let start = Instant::now();
    let replay = ExperimentManifest::load(first.dir.join(MANIFEST_FILE))?.config()?;
    let second = run_battery(&replay, &out.join("rerun"))?;
    let mut diffs = compare_outputs(&first.manifest, &second.manifest);
    diffs.extend(compare_dirs(&first.dir, &second.dir, &first.manifest.files)?);
    let mut outcomes = first.outcomes;
    let key = |o: &CriterionOutcome| (o.id, o.pass, o.detail.clone());
    if !outcomes.iter().map(key).eq(second.outcomes.iter().map(key)) {
        diffs.push("criterion outcomes differ".into());
    }
    let files = first.manifest.files.len();
    outcomes.push(CriterionOutcome {
        id: 11,
        name: "determinism".into(),
        pass: diffs.is_empty(),
        detail: if diffs.is_empty() {
            format!("{files} result files identical on rerun")
        } else {
            format!("{} of {files} files differ: {}", diffs.len(), diffs.join(", "))
        },
        seconds: start.elapsed().as_secs_f64(),
    });
    Ok(outcomes)
}
