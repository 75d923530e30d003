//! The four subcommands. Each validates its whole setup before touching the
//! output directory, so a rejected scenario leaves no artifacts behind.

use std::path::Path;

use lieflow::approximation::{
    fourier_project, fourier_report, hermite_coeffs, laplace_project, laplace_report, samples, truncation_report,
    Decay, ScalarFn, TruncationReport,
};
use lieflow::dynamics::{Ensemble, FlowConfig, OutputMap};
use lieflow::geometry::{CompactBox, ManifoldSpec};
use lieflow::io;
use lieflow::solver::{optimize, pmp_residual, random_ensemble, two_moons, OptimizeOutcome, StopReason, TrainingProblem};
use lieflow::verify::{run_suite, Suite};
use lieflow::ExecMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::error::{CliError, CliResult};
use crate::scenario::{
    config_hash, scenario_hash, ApproxScenario, Basis, DatasetSpec, EnsembleSpec, FlowSection, SteerScenario,
    TargetFunction, TrainScenario,
};

/// What a finished command reports back to `main`.
pub struct Report {
    pub success: bool,
    pub message: String,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn flow_config(flow: &FlowSection, exec: ExecMode) -> CliResult<FlowConfig> {
    if flow.substeps == 0 {
        return Err(config_err("flow.substeps must be at least 1"));
    }
    Ok(FlowConfig {
        substeps: flow.substeps,
        exec,
    })
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

fn build_points(spec: &EnsembleSpec, manifold: ManifoldSpec, rng: &mut ChaCha8Rng) -> CliResult<Vec<Vec<f64>>> {
    match spec {
        EnsembleSpec::Points(p) => Ok(p.clone()),
        EnsembleSpec::Random { count, scale } => {
            positive("ensemble scale", *scale)?;
            Ok(random_ensemble(manifold, *count, *scale, rng)
                .map_err(CliError::setup)?
                .points()
                .to_vec())
        }
    }
}

#[derive(Serialize)]
struct RunSummary {
    success: bool,
    iterations: usize,
    stop_reason: StopReason,
    loss: f64,
    grad_norm: f64,
    max_terminal_error: f64,
    threshold: f64,
}

/// Artifacts shared by `steer` and `train`.
fn write_run(art: &mut Artifacts, problem: &TrainingProblem, out: &OptimizeOutcome) -> CliResult<()> {
    let traj = problem.trajectory(&out.schedule).map_err(CliError::numeric)?;
    art.csv("history.csv", |w, pre| io::write_history_csv(w, &out.history, pre))?;
    art.csv("schedule.csv", |w, pre| io::write_schedule_csv(w, &out.schedule, pre))?;
    art.json("schedule.json", "schedule", &out.schedule)?;
    art.csv("trajectory.csv", |w, pre| io::write_trajectory_csv(w, &traj, pre))?;
    art.csv("terminal.csv", |w, pre| {
        io::write_terminal_csv(w, &traj, &problem.targets, &problem.pmap, pre)
    })?;
    if problem.beta > 0.0 {
        let pmp = pmp_residual(problem, &out.schedule).map_err(CliError::numeric)?;
        art.json("pmp.json", "pmp", &pmp)?;
    }
    Ok(())
}

pub fn steer(s: &SteerScenario, exec: ExecMode, out_dir: &Path) -> CliResult<Report> {
    positive("threshold", s.threshold)?;
    let flow = flow_config(&s.flow, exec)?;
    let cfg = s.optimizer.config(s.seed);
    cfg.validate().map_err(CliError::setup)?;

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let manifold = s.family.manifold();
    let sources = build_points(&s.sources, manifold, &mut rng)?;
    let target_space = match &s.output {
        OutputMap::Identity => manifold,
        OutputMap::Coordinates(c) => ManifoldSpec::Euclidean(c.len()),
    };
    let targets = build_points(&s.targets, target_space, &mut rng)?;
    let ensemble = Ensemble::new(manifold, sources).map_err(CliError::setup)?;
    let mut problem = TrainingProblem::new(
        s.family.clone(),
        ensemble,
        targets,
        s.output.clone(),
        s.beta,
        s.horizon,
        s.steps,
    )
    .map_err(CliError::setup)?;
    problem.flow = flow;

    let mut art = Artifacts::create(out_dir, "steer", scenario_hash(s))?;
    let out = optimize(&problem, &cfg).map_err(CliError::numeric)?;
    let max_err = problem.max_terminal_error(&out.schedule).map_err(CliError::numeric)?;
    let success = max_err < s.threshold;
    write_run(&mut art, &problem, &out)?;
    art.json(
        "summary.json",
        "summary",
        &RunSummary {
            success,
            iterations: out.iterations(),
            stop_reason: out.reason,
            loss: out.loss,
            grad_norm: out.grad_norm,
            max_terminal_error: max_err,
            threshold: s.threshold,
        },
    )?;
    Ok(Report {
        success,
        message: format!(
            "steer: {} iterations ({:?}), loss {:.3e}, max terminal error {max_err:.3e} (threshold {:.1e})",
            out.iterations(),
            out.reason,
            out.loss,
            s.threshold
        ),
    })
}

#[derive(Serialize)]
struct TrainSummary {
    success: bool,
    iterations: usize,
    stop_reason: StopReason,
    loss: f64,
    grad_norm: f64,
    fitted: usize,
    points: usize,
    fraction: f64,
    tolerance: f64,
    min_fraction: f64,
}

pub fn train(s: &TrainScenario, exec: ExecMode, out_dir: &Path) -> CliResult<Report> {
    positive("tolerance", s.tolerance)?;
    if !(0.0..=1.0).contains(&s.min_fraction) {
        return Err(config_err(format!("min_fraction must lie in [0, 1], got {}", s.min_fraction)));
    }
    if s.nu.is_empty() {
        return Err(config_err("nu must have at least one entry"));
    }
    let flow = flow_config(&s.flow, exec)?;
    let cfg = s.optimizer.config(s.seed);
    cfg.validate().map_err(CliError::setup)?;

    let (data, labels) = match &s.dataset {
        DatasetSpec::TwoMoons { n, noise, scale } => {
            if s.nu.len() != 1 {
                return Err(config_err("the two-moons dataset has scalar labels; nu must have one entry"));
            }
            if !(*noise >= 0.0 && noise.is_finite()) {
                return Err(config_err(format!("noise must be non-negative, got {noise}")));
            }
            positive("scale", *scale)?;
            let (x, l) = two_moons(*n, *noise, *scale, s.seed);
            (x, l.into_iter().map(|v| vec![v]).collect::<Vec<_>>())
        }
        DatasetSpec::Points { x, labels } => (x.clone(), labels.clone()),
    };
    if data.is_empty() {
        return Err(CliError::setup(lieflow::Error::EmptyEnsemble));
    }
    if labels.len() != data.len() {
        return Err(config_err(format!("{} points but {} labels", data.len(), labels.len())));
    }
    let d = data[0].len();
    let mut problem =
        TrainingProblem::classification(d, s.nu.clone(), &data, labels.clone(), s.beta, s.horizon, s.steps)
            .map_err(CliError::setup)?;
    problem.flow = flow;

    let mut art = Artifacts::create(out_dir, "train", scenario_hash(s))?;
    let out = optimize(&problem, &cfg).map_err(CliError::numeric)?;
    let traj = problem.trajectory(&out.schedule).map_err(CliError::numeric)?;
    let predictions: Vec<Vec<f64>> = (0..data.len()).map(|k| problem.pmap.apply(traj.terminal(k))).collect();
    let fitted = predictions
        .iter()
        .zip(&labels)
        .filter(|(p, l)| {
            let e: f64 = p.iter().zip(l.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            e.sqrt() < s.tolerance
        })
        .count();
    let fraction = fitted as f64 / data.len() as f64;
    let success = fraction >= s.min_fraction;
    write_run(&mut art, &problem, &out)?;
    art.csv("predictions.csv", |w, pre| io::write_predictions_csv(w, &data, &labels, &predictions, pre))?;
    art.json(
        "summary.json",
        "summary",
        &TrainSummary {
            success,
            iterations: out.iterations(),
            stop_reason: out.reason,
            loss: out.loss,
            grad_norm: out.grad_norm,
            fitted,
            points: data.len(),
            fraction,
            tolerance: s.tolerance,
            min_fraction: s.min_fraction,
        },
    )?;
    Ok(Report {
        success,
        message: format!(
            "train: {} iterations ({:?}), loss {:.3e}, {fitted}/{} points within {} of their labels",
            out.iterations(),
            out.reason,
            out.loss,
            data.len(),
            s.tolerance
        ),
    })
}

fn sphere_exp(x: &[f64]) -> f64 {
    (x[0] + 0.5 * x[1] * x[2]).exp()
}

fn sphere_abs_cubed(x: &[f64]) -> f64 {
    x[2].abs().powi(3)
}

#[derive(Serialize)]
struct LadderSummary {
    decreasing: bool,
    ell: f64,
}

pub fn approx(s: &ApproxScenario, exec: ExecMode, out_dir: &Path) -> CliResult<Report> {
    if s.function.basis() != s.basis {
        return Err(config_err(format!("function {:?} does not belong to the {:?} basis", s.function, s.basis)));
    }
    if s.orders.is_empty() {
        return Err(config_err("orders must not be empty"));
    }
    if s.grid < 2 {
        return Err(config_err("grid must have at least 2 points"));
    }
    let [lo, hi] = s.domain;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(config_err(format!("domain [{lo}, {hi}] is empty")));
    }
    let f: ScalarFn = match s.function {
        TargetFunction::GaussianBump => &samples::gaussian_bump,
        TargetFunction::C2Bump => &samples::c2_bump,
        TargetFunction::PeriodicC2 => &samples::periodic_c2,
        TargetFunction::SphereExp => &sphere_exp,
        TargetFunction::SphereAbsCubed => &sphere_abs_cubed,
    };
    let k = match s.basis {
        Basis::Hermite => CompactBox::cube(1, lo, hi, s.grid),
        Basis::Fourier => CompactBox::full_torus(1, s.grid),
        Basis::Laplace => CompactBox::full_sphere(s.grid),
    }
    .map_err(CliError::setup)?;

    let mut art = Artifacts::create(out_dir, "approx", scenario_hash(s))?;
    let reports = s
        .orders
        .iter()
        .map(|&n| match s.function {
            TargetFunction::GaussianBump => truncation_report(&hermite_coeffs(f, 1, n, Decay::gaussian(), exec)?, f, &k),
            TargetFunction::C2Bump => {
                truncation_report(&hermite_coeffs(f, 1, n, Decay::compact(-1.0, 1.0), exec)?, f, &k)
            }
            TargetFunction::PeriodicC2 => fourier_report(&fourier_project(f, 1, n, exec)?, f, &k),
            TargetFunction::SphereExp | TargetFunction::SphereAbsCubed => {
                laplace_report(&laplace_project(f, n, exec)?, f, &k)
            }
        })
        .collect::<lieflow::Result<Vec<TruncationReport>>>()
        .map_err(CliError::numeric)?;
    let decreasing = reports.windows(2).all(|w| w[1].sup_error < w[0].sup_error);
    let ell = reports.iter().map(|r| r.deriv_sup).fold(0.0, f64::max);
    art.csv("ladder.csv", |w, pre| io::write_ladder_csv(w, &reports, pre))?;
    art.json("truncation.json", "reports", &reports)?;
    art.json("summary.json", "summary", &LadderSummary { decreasing, ell })?;
    let errors: Vec<String> = reports.iter().map(|r| format!("{}:{:.2e}", r.order, r.sup_error)).collect();
    Ok(Report {
        success: decreasing,
        message: format!("approx: sup errors {} (decreasing: {decreasing}), ell {ell:.3e}", errors.join(" ")),
    })
}

pub fn verify(suite: &str, exec: ExecMode, out_dir: &Path) -> CliResult<Report> {
    let suite: Suite = suite.parse().map_err(CliError::setup)?;
    let hash = config_hash("verify", &suite);
    let report = run_suite(suite, exec).map_err(CliError::numeric)?;
    let mut art = Artifacts::create(out_dir, "verify", hash)?;
    art.json("verify.json", "report", &report)?;
    let mut lines: Vec<String> = report
        .properties
        .iter()
        .map(|p| format!("{:<28} {:?} ({:.2e} vs {:.1e})", p.name, p.status, p.measured, p.tolerance))
        .collect();
    let failed = report.failures().count();
    lines.push(format!("verify {suite}: {} properties, {failed} failed", report.properties.len()));
    Ok(Report {
        success: report.passed,
        message: lines.join("\n"),
    })
}
