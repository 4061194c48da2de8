//! Command execution: run the requested study and write its artifacts.

use std::path::{Path, PathBuf};

use log::info;
use nlpme::harness::{
    heat_kernel_check, property_suite, random_pairs, recipe_lte_study, self_convergence_study, stefan_experiment,
    ConvergenceReport, Gaussian, LteReport, PairOptions, PropertyReport, StefanParams, StepRule,
};
use nlpme::{run, LevyMeasureSpec, Trajectory};
use thiserror::Error;

use crate::build;
use crate::config::{Command, RunConfig, SchemeSpec};
use crate::output::write_csv;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("{0}")]
    Library(#[from] nlpme::Error),
    #[error("run aborted at step {step}: {error}")]
    Run { step: usize, error: nlpme::Error },
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

impl From<nlpme::stepper::RunFailure> for CliError {
    fn from(f: nlpme::stepper::RunFailure) -> Self {
        CliError::Run {
            step: f.step,
            error: f.error,
        }
    }
}

/// Where and how to write artifacts.
#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    pub provenance: String,
    pub seed: u64,
}

impl Context {
    fn csv(&self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf, CliError> {
        Ok(write_csv(&self.out, name, &self.provenance, header, rows)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Names of checks that failed; empty on success.
    pub failed: Vec<String>,
}

pub fn execute(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Run => run_command(cfg, ctx),
        Command::Converge => converge_command(cfg, ctx),
        Command::Properties => properties_command(cfg, ctx),
        Command::Lte => lte_command(cfg, ctx),
        Command::Stefan => stefan_command(cfg, ctx),
        Command::Heat => heat_command(cfg, ctx),
    }
}

fn scheme_spec(cfg: &RunConfig) -> &SchemeSpec {
    cfg.scheme
        .as_ref()
        .expect("validated config carries a scheme for this command")
}

fn run_at(spec: &SchemeSpec, h: f64) -> Result<Trajectory, CliError> {
    let grid = build::grid(spec, h)?;
    let scheme = build::scheme(spec, h)?;
    let u0 = build::initial_field(spec, grid)?;
    Ok(run(&scheme, &u0)?)
}

const RUN_HEADER: &str = "step,time,mass,expected_mass,l1,linf,iterations,final_residual";

fn run_rows(traj: &Trajectory) -> Vec<String> {
    let knots = traj.time.knots();
    traj.fields
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let (expected, iters, res) = if j == 0 {
                (f.integral(), 0, 0.0)
            } else {
                let rep = &traj.reports[j - 1];
                (traj.ledger[j - 1].expected, rep.iterations, rep.final_residual())
            };
            format!(
                "{j},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{iters},{:.6e}",
                knots[j],
                f.integral(),
                expected,
                f.l1_norm(),
                f.linf_norm(),
                res
            )
        })
        .collect()
}

fn snapshots(traj: &Trajectory, dir: &Path, every: usize) -> Result<Vec<PathBuf>, CliError> {
    if every == 0 {
        return Ok(Vec::new());
    }
    Ok(traj.write_snapshots(dir, every)?)
}

fn run_command(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let spec = scheme_spec(cfg);
    let traj = run_at(spec, spec.h)?;
    info!(
        "completed {} steps, relative mass drift {:.3e}",
        traj.time.steps(),
        traj.relative_mass_drift()
    );
    let mut files = vec![ctx.csv("run.csv", RUN_HEADER, &run_rows(&traj))?];
    files.extend(snapshots(&traj, &ctx.out.join("snapshots"), cfg.snapshot_every)?);
    Ok(Outcome {
        files,
        failed: Vec::new(),
    })
}

fn converge_command(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let spec = scheme_spec(cfg);
    let study = |h: f64| {
        run_at(spec, h).map_err(|e| match e {
            CliError::Library(e) | CliError::Run { error: e, .. } => e,
            other => nlpme::Error::Parameter(other.to_string()),
        })
    };
    let rep = self_convergence_study("self_convergence", &cfg.converge_hs, &study)?;
    info!("{rep}");
    let file = ctx.csv("convergence.csv", ConvergenceReport::CSV_HEADER, &rep.csv_rows())?;
    Ok(Outcome {
        files: vec![file],
        failed: Vec::new(),
    })
}

fn properties_command(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let spec = scheme_spec(cfg);
    let p = cfg.properties.as_ref().expect("validated properties section");
    let scheme = build::scheme(spec, spec.h)?;
    let grid = build::grid(spec, spec.h)?;
    let steps = scheme.time.steps();
    let opts = PairOptions {
        support: p.support,
        amplitude: p.amplitude,
        source_steps: (p.source_steps > 0).then_some(steps),
        source_amplitude: p.source_amplitude,
    };
    let pairs = random_pairs(grid, p.pairs, ctx.seed, opts);
    let rep = property_suite(&scheme, &pairs)?;
    info!("{rep}");
    let file = ctx.csv("properties.csv", PropertyReport::CSV_HEADER, &rep.csv_rows())?;
    let failed = rep
        .checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name.clone())
        .collect();
    Ok(Outcome {
        files: vec![file],
        failed,
    })
}

fn lte_command(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let l = cfg.lte.as_ref().expect("validated lte section");
    let psi = Gaussian { dim: l.dimension };
    let mut rows = Vec::new();
    for recipe in &l.recipes {
        for &alpha in &l.alphas {
            let spec = LevyMeasureSpec::fractional(alpha, l.dimension)?;
            let rep = recipe_lte_study(*recipe, &spec, &psi, &l.hs, l.gamma)?;
            info!("{rep}");
            rows.extend(rep.csv_rows());
        }
    }
    let file = ctx.csv("lte.csv", LteReport::CSV_HEADER, &rows)?;
    Ok(Outcome {
        files: vec![file],
        failed: Vec::new(),
    })
}

const STEFAN_RUNS_HEADER: &str = "h,dt,steps,initial_max,max_linf,mass_drift";

fn stefan_command(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let s = cfg.stefan.as_ref().expect("validated stefan section");
    let params = |h: f64| StefanParams {
        alpha: s.alpha,
        h,
        dt: s.dt.dt(h),
        t_end: s.t_end,
        extent: s.extent,
        r_tail: s.r_tail,
        tol: s.tol,
    };
    let runs =
        s.hs.iter()
            .map(|&h| stefan_experiment(params(h)))
            .collect::<nlpme::Result<Vec<_>>>()?;
    let by_h = |h: f64| {
        let i = s.hs.iter().position(|&x| x == h).expect("spacing was run");
        Ok(runs[i].trajectory.clone())
    };
    let rep = self_convergence_study("stefan", &s.hs, &by_h)?;
    info!("{rep}");

    let mut failed = Vec::new();
    if runs.iter().any(|r| r.max_linf > r.initial_max + s.tol) {
        failed.push("linf_bound".to_string());
    }
    if runs.iter().any(|r| r.mass_drift > nlpme::harness::MASS_TOLERANCE) {
        failed.push("mass_conservation".to_string());
    }
    if !rep.l1_strictly_decreasing() {
        failed.push("l1_self_convergence".to_string());
    }
    match (rep.l1_rate, rep.linf_rate) {
        (Some(a), Some(b)) if a >= b => {}
        _ if rep.levels.len() < 2 => {}
        _ => failed.push("l1_rate_vs_linf_rate".to_string()),
    }

    let summary: Vec<String> = runs
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{:.17e},{:.17e},{:.6e}",
                r.params.h,
                r.params.dt,
                r.trajectory.time.steps(),
                r.initial_max,
                r.max_linf,
                r.mass_drift
            )
        })
        .collect();
    let mut files = vec![
        ctx.csv("stefan_convergence.csv", ConvergenceReport::CSV_HEADER, &rep.csv_rows())?,
        ctx.csv("stefan_runs.csv", STEFAN_RUNS_HEADER, &summary)?,
    ];
    if let Some(finest) = runs.last() {
        files.push(ctx.csv("stefan_mass.csv", RUN_HEADER, &run_rows(&finest.trajectory))?);
        files.extend(snapshots(
            &finest.trajectory,
            &ctx.out.join("snapshots"),
            cfg.snapshot_every,
        )?);
    }
    Ok(Outcome { files, failed })
}

fn heat_command(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    let h = cfg.heat.as_ref().expect("validated heat section");
    let rule = StepRule {
        factor: h.dt_factor,
        power: h.dt_power,
    };
    let rep = heat_kernel_check(&h.hs, rule, h.t_end, h.extent, h.tol)?;
    info!("{rep}");
    let file = ctx.csv("heat.csv", ConvergenceReport::CSV_HEADER, &rep.csv_rows())?;
    Ok(Outcome {
        files: vec![file],
        failed: Vec::new(),
    })
}
