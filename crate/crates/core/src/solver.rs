//! Bolza loss, gradient-descent training of schedules and PMP diagnostics.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    adjoint_pass, discrepancy, flow_ensemble, gradient_from_trajectory, ControlSchedule, Ensemble, FlowConfig,
    GradientReport, OutputMap, TrajectoryBundle,
};
use crate::fields::ControlFamily;
use crate::geometry::ManifoldSpec;
use crate::{Error, Result};

/// Everything that defines `𝒥` except the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingProblem {
    pub family: ControlFamily,
    pub ensemble: Ensemble,
    pub targets: Vec<Vec<f64>>,
    pub pmap: OutputMap,
    pub beta: f64,
    pub horizon: f64,
    pub steps: usize,
    pub flow: FlowConfig,
}

impl TrainingProblem {
    pub fn new(
        family: ControlFamily,
        ensemble: Ensemble,
        targets: Vec<Vec<f64>>,
        pmap: OutputMap,
        beta: f64,
        horizon: f64,
        steps: usize,
    ) -> Result<Self> {
        let p = Self {
            family,
            ensemble,
            targets,
            pmap,
            beta,
            horizon,
            steps,
            flow: FlowConfig::default(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Classification on `ℳ × 𝒞 = ℝ^d × ℝ^s`: data points are embedded as
    /// `(x, ν)` and read out through the last `s` coordinates.
    pub fn classification(
        d: usize,
        nu: Vec<f64>,
        data: &[Vec<f64>],
        labels: Vec<Vec<f64>>,
        beta: f64,
        horizon: f64,
        steps: usize,
    ) -> Result<Self> {
        let s = nu.len();
        let family = ControlFamily::product_gh(d, s, nu.clone())?;
        if let Some(x) = data.iter().find(|x| x.len() != d) {
            return Err(Error::Dimension(format!("data point of length {} in ℝ^{d}", x.len())));
        }
        let points = data.iter().map(|x| [x.as_slice(), &nu].concat()).collect();
        let ensemble = Ensemble::new(ManifoldSpec::Product(d, s), points)?;
        Self::new(
            family,
            ensemble,
            labels,
            OutputMap::Coordinates((d..d + s).collect()),
            beta,
            horizon,
            steps,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Invalid(format!("β must be finite and non-negative, got {}", self.beta)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(Error::Invalid("steps must be positive".into()));
        }
        if self.ensemble.manifold() != self.family.manifold() {
            return Err(Error::Dimension(format!(
                "ensemble lives on {:?}, family {} on {:?}",
                self.ensemble.manifold(),
                self.family,
                self.family.manifold()
            )));
        }
        let n = self.family.state_dim();
        self.pmap.validate(n)?;
        if self.targets.len() != self.ensemble.len() {
            return Err(Error::Dimension(format!(
                "{} targets for {} members",
                self.targets.len(),
                self.ensemble.len()
            )));
        }
        let s = self.pmap.output_dim(n);
        if self.targets.iter().any(|t| t.len() != s || t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Dimension(format!("every target must be a finite vector of length {s}")));
        }
        Ok(())
    }

    pub fn zero_schedule(&self) -> Result<ControlSchedule> {
        ControlSchedule::zeros(self.horizon, self.steps, self.family.controls())
    }

    fn check_schedule(&self, sched: &ControlSchedule) -> Result<()> {
        if sched.steps() != self.steps || (sched.horizon() - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::Dimension("schedule grid does not match the problem".into()));
        }
        Ok(())
    }

    pub fn trajectory(&self, sched: &ControlSchedule) -> Result<TrajectoryBundle> {
        flow_ensemble(&self.family, sched, &self.ensemble, &self.flow)
    }

    pub fn gradient(&self, sched: &ControlSchedule) -> Result<GradientReport> {
        self.check_schedule(sched)?;
        let traj = self.trajectory(sched)?;
        gradient_from_trajectory(&self.family, sched, &traj, &self.targets, &self.pmap, self.beta, self.flow.exec)
    }

    /// Residuals `p(z_k(T)) − c_k`.
    pub fn residuals(&self, traj: &TrajectoryBundle) -> Vec<Vec<f64>> {
        (0..traj.len())
            .map(|k| self.pmap.residual(traj.manifold, traj.terminal(k), &self.targets[k]))
            .collect()
    }

    /// Largest `|p(z_k(T)) − c_k|` over members.
    pub fn max_terminal_error(&self, sched: &ControlSchedule) -> Result<f64> {
        let traj = self.trajectory(sched)?;
        Ok(self
            .residuals(&traj)
            .iter()
            .map(|r| crate::geometry::norm(r))
            .fold(0.0, f64::max))
    }
}

fn penalty(beta: f64, sched: &ControlSchedule) -> f64 {
    0.5 * beta * sched.dt() * sched.values().iter().map(|u| u * u).sum::<f64>()
}

/// `½Σ|p(z_k(T)) − c_k|² + (β/2)Σ_j Σ_i u_{j,i}² Δt`.
pub fn loss(problem: &TrainingProblem, sched: &ControlSchedule) -> Result<f64> {
    problem.check_schedule(sched)?;
    let traj = problem.trajectory(sched)?;
    Ok(discrepancy(&traj, &problem.targets, &problem.pmap)? + penalty(problem.beta, sched))
}

/// Starting schedule of [`optimize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Zero when the zero schedule already has zero loss, noise otherwise.
    #[default]
    Auto,
    Zero,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// First trial step; later trials alternate the two Barzilai–Borwein steps.
    pub initial_step: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub init: Init,
    /// Half-width of the uniform initial noise.
    pub init_scale: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            initial_step: 1.0,
            c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
            grad_tol: 1e-6,
            seed: 0,
            init: Init::Auto,
            init_scale: 1e-2,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step > 0.0
            && self.c1 > 0.0
            && self.c1 < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.max_backtracks > 0
            && self.grad_tol > 0.0
            && self.init_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("optimizer parameters out of range".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// Accepted step length; 0 on the initial row.
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub schedule: ControlSchedule,
    pub history: Vec<HistoryRow>,
    pub reason: StopReason,
    pub loss: f64,
    pub grad_norm: f64,
}

impl OptimizeOutcome {
    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.iter)
    }

    pub fn line_search_failed(&self) -> bool {
        self.reason == StopReason::LineSearchFailed
    }
}

/// Seeded uniform noise on `[-scale, scale]`.
pub fn noise_schedule(problem: &TrainingProblem, scale: f64, seed: u64) -> Result<ControlSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.steps * problem.family.controls();
    let values = (0..n).map(|_| rng.random_range(-scale..=scale)).collect();
    ControlSchedule::new(problem.horizon, problem.steps, problem.family.controls(), values)
}

pub fn initial_schedule(problem: &TrainingProblem, cfg: &OptimizerConfig) -> Result<ControlSchedule> {
    match cfg.init {
        Init::Zero => problem.zero_schedule(),
        Init::Noise => noise_schedule(problem, cfg.init_scale, cfg.seed),
        Init::Auto => {
            let zero = problem.zero_schedule()?;
            if loss(problem, &zero)? == 0.0 {
                Ok(zero)
            } else {
                noise_schedule(problem, cfg.init_scale, cfg.seed)
            }
        }
    }
}

pub fn optimize(problem: &TrainingProblem, cfg: &OptimizerConfig) -> Result<OptimizeOutcome> {
    cfg.validate()?;
    problem.validate()?;
    let start = initial_schedule(problem, cfg)?;
    optimize_from(problem, cfg, start)
}

/// Gradient descent with Armijo backtracking from a given schedule.
pub fn optimize_from(
    problem: &TrainingProblem,
    cfg: &OptimizerConfig,
    start: ControlSchedule,
) -> Result<OptimizeOutcome> {
    cfg.validate()?;
    problem.check_schedule(&start)?;
    let mut x = start;
    let mut g = problem.gradient(&x)?;
    let mut gn = g.norm();
    let mut history = vec![HistoryRow {
        iter: 0,
        loss: g.loss,
        grad_norm: gn,
        step: 0.0,
    }];
    let mut alpha = cfg.initial_step;
    let mut reason = StopReason::MaxIterations;
    for iter in 1..=cfg.max_iter {
        if gn <= cfg.grad_tol {
            reason = StopReason::GradientTolerance;
            break;
        }
        let mut accepted = None;
        let mut trial = alpha;
        for _ in 0..=cfg.max_backtracks {
            let values: Vec<f64> = x.values().iter().zip(&g.gradient).map(|(u, d)| u - trial * d).collect();
            let cand = x.with_values(values)?;
            let traj = match problem.trajectory(&cand) {
                Ok(t) => t,
                Err(Error::NonFinite { .. }) => {
                    trial *= cfg.backtrack;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let f = discrepancy(&traj, &problem.targets, &problem.pmap)? + penalty(problem.beta, &cand);
            if f <= g.loss - cfg.c1 * trial * gn * gn {
                accepted = Some((cand, traj));
                break;
            }
            trial *= cfg.backtrack;
        }
        let Some((cand, traj)) = accepted else {
            reason = StopReason::LineSearchFailed;
            break;
        };
        let g_new = gradient_from_trajectory(
            &problem.family,
            &cand,
            &traj,
            &problem.targets,
            &problem.pmap,
            problem.beta,
            problem.flow.exec,
        )?;
        // Barzilai–Borwein trial step, alternating the long and short forms
        let (mut ss, mut sy, mut yy) = (0.0, 0.0, 0.0);
        for i in 0..g.gradient.len() {
            let s = cand.values()[i] - x.values()[i];
            let y = g_new.gradient[i] - g.gradient[i];
            ss += s * s;
            sy += s * y;
            yy += y * y;
        }
        alpha = match (sy > 0.0, iter % 2 == 0) {
            (true, true) => ss / sy,
            (true, false) => sy / yy,
            (false, _) => 2.0 * trial,
        };
        x = cand;
        g = g_new;
        gn = g.norm();
        history.push(HistoryRow {
            iter,
            loss: g.loss,
            grad_norm: gn,
            step: trial,
        });
    }
    if reason == StopReason::MaxIterations && gn <= cfg.grad_tol {
        reason = StopReason::GradientTolerance;
    }
    Ok(OptimizeOutcome {
        loss: g.loss,
        grad_norm: gn,
        schedule: x,
        history,
        reason,
    })
}

/// Stationarity and Hamiltonian diagnostics along a schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmpReport {
    /// `sup_{j,i} |β u_{j,i} − F̄_i(j)|`.
    pub residual: f64,
    /// `M(t_j) = (1/2β) Σ_i F_i(t_j)²` on the grid.
    pub hamiltonian: Vec<f64>,
    /// `max_j |M(t_j) − M̄| / M̄`, zero when `M̄ = 0`.
    pub spread: f64,
    pub beta: f64,
    pub steps: usize,
    pub substeps: usize,
}

/// `F_i = Σ_k ψ_k f_i(z_k)` at every substep node, `(S·M + 1) × r`.
fn switching_functions(problem: &TrainingProblem, sched: &ControlSchedule) -> Result<Vec<f64>> {
    problem.check_schedule(sched)?;
    let traj = problem.trajectory(sched)?;
    let adj = adjoint_pass(&problem.family, sched, &traj, &problem.targets, &problem.pmap, problem.flow.exec)?;
    let r = problem.family.controls();
    let n = traj.dim;
    let nodes = sched.steps() * traj.substeps + 1;
    let rows = crate::exec::map_indexed(problem.flow.exec, nodes, |q| {
        let mut f = vec![0.0; n];
        let mut row = vec![0.0; r];
        for k in 0..traj.len() {
            let z = traj.node(k, q);
            let psi = adj.node(k, q);
            for (i, ri) in row.iter_mut().enumerate() {
                problem.family.generator_value(i, z, &mut f);
                *ri += psi.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        row
    });
    Ok(rows.concat())
}

/// Interval means `F̄_i(j)` of the continuous switching functions
/// (trapezoid rule over substep nodes), row-major `S × r`.
pub fn continuous_stationarity(problem: &TrainingProblem, sched: &ControlSchedule) -> Result<Vec<f64>> {
    let f = switching_functions(problem, sched)?;
    let r = problem.family.controls();
    let m = problem.flow.substeps;
    let mut out = vec![0.0; sched.steps() * r];
    for j in 0..sched.steps() {
        for q in 0..=m {
            let w = if q == 0 || q == m { 0.5 } else { 1.0 } / m as f64;
            for i in 0..r {
                out[j * r + i] += w * f[(j * m + q) * r + i];
            }
        }
    }
    Ok(out)
}

/// Discrete counterpart `β u − ∂𝒥/∂u / Δt` of the interval means.
pub fn discrete_stationarity(problem: &TrainingProblem, sched: &ControlSchedule) -> Result<Vec<f64>> {
    let g = problem.gradient(sched)?;
    let dt = sched.dt();
    Ok(sched
        .values()
        .iter()
        .zip(&g.gradient)
        .map(|(u, d)| problem.beta * u - d / dt)
        .collect())
}

/// Stationarity residual and Hamiltonian constancy in the normal case.
pub fn pmp_residual(problem: &TrainingProblem, sched: &ControlSchedule) -> Result<PmpReport> {
    if !(problem.beta > 0.0) {
        return Err(Error::Invalid("PMP diagnostics need β > 0 (normal case)".into()));
    }
    let f = switching_functions(problem, sched)?;
    let fbar = continuous_stationarity(problem, sched)?;
    let residual = sched
        .values()
        .iter()
        .zip(&fbar)
        .map(|(u, fb)| (problem.beta * u - fb).abs())
        .fold(0.0, f64::max);
    let r = problem.family.controls();
    let m = problem.flow.substeps;
    let hamiltonian: Vec<f64> = (0..=sched.steps())
        .map(|j| {
            let row = &f[j * m * r..(j * m + 1) * r];
            row.iter().map(|v| v * v).sum::<f64>() / (2.0 * problem.beta)
        })
        .collect();
    let mean = hamiltonian.iter().sum::<f64>() / hamiltonian.len() as f64;
    let spread = if mean > 0.0 {
        hamiltonian.iter().map(|h| (h - mean).abs()).fold(0.0, f64::max) / mean
    } else {
        0.0
    };
    Ok(PmpReport {
        residual,
        hamiltonian,
        spread,
        beta: problem.beta,
        steps: sched.steps(),
        substeps: m,
    })
}

/// Uniform random ensemble, rejecting near-coincident draws.
///
/// Euclidean and product coordinates are drawn from `[-scale, scale]`,
/// torus angles from `[0, 2π)` and sphere points uniformly on 𝕊².
pub fn random_ensemble(manifold: ManifoldSpec, n: usize, scale: f64, rng: &mut impl Rng) -> Result<Ensemble> {
    let dim = manifold.ambient_dim();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
    while pts.len() < n {
        let p: Vec<f64> = match manifold {
            ManifoldSpec::Torus(_) => (0..dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
            ManifoldSpec::Sphere2 => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                let s = (1.0 - z * z).sqrt();
                let mut v = vec![s * phi.cos(), s * phi.sin(), z];
                manifold.retract(&mut v);
                v
            }
            _ => (0..dim).map(|_| rng.random_range(-scale..=scale)).collect(),
        };
        if pts.iter().all(|q| manifold.distance(q, &p) > 1e-3) {
            pts.push(p);
        }
    }
    Ensemble::new(manifold, pts)
}

/// Two interleaved half circles in ℝ², centred and scaled by `scale`;
/// labels are 0 for the upper moon and 1 for the lower one.
pub fn two_moons(n: usize, noise: f64, scale: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let upper = n.div_ceil(2);
    let mut pts = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (first, idx, count) = if i < upper { (true, i, upper) } else { (false, i - upper, n - upper) };
        let t = if count > 1 { PI * idx as f64 / (count - 1) as f64 } else { 0.5 * PI };
        let (x, y) = if first { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        let ex: f64 = if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 };
        let ey: f64 = if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 };
        pts.push(vec![scale * (x - 0.5 + ex), scale * (y - 0.25 + ey)]);
        labels.push(if first { 0.0 } else { 1.0 });
    }
    (pts, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steering(beta: f64) -> TrainingProblem {
        let ens = Ensemble::new(ManifoldSpec::Euclidean(2), vec![vec![0.0, 0.0], vec![1.0, 0.5]]).unwrap();
        TrainingProblem::new(
            ControlFamily::Gh { d: 2 },
            ens,
            vec![vec![0.5, 0.0], vec![1.5, 0.5]],
            OutputMap::Identity,
            beta,
            1.0,
            8,
        )
        .unwrap()
    }

    #[test]
    fn matched_problem_is_already_optimal() {
        let ens = Ensemble::new(ManifoldSpec::Euclidean(2), vec![vec![0.0, 0.0], vec![1.0, 0.5]]).unwrap();
        let targets = ens.points().to_vec();
        let p = TrainingProblem::new(ControlFamily::Gh { d: 2 }, ens, targets, OutputMap::Identity, 1e-3, 1.0, 4)
            .unwrap();
        let out = optimize(&p, &OptimizerConfig::default()).unwrap();
        assert_eq!(out.iterations(), 0);
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.reason, StopReason::GradientTolerance);
        let rep = pmp_residual(&p, &out.schedule).unwrap();
        assert_eq!(rep.residual, 0.0);
        assert!(rep.hamiltonian.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn translation_loss_is_pure_penalty() {
        let p = steering(0.2);
        let s = ControlSchedule::constant(1.0, 8, &[0.0, 0.0, 0.5, 0.0]).unwrap();
        let l = loss(&p, &s).unwrap();
        assert!((l - 0.5 * 0.2 * 0.25 * 1.0).abs() < 1e-13);
    }

    #[test]
    fn loss_decreases_along_accepted_steps() {
        let p = steering(1e-3);
        let cfg = OptimizerConfig {
            max_iter: 30,
            ..Default::default()
        };
        let out = optimize(&p, &cfg).unwrap();
        for w in out.history.windows(2) {
            assert!(w[1].loss < w[0].loss);
        }
    }

    #[test]
    fn abnormal_case_rejected() {
        let p = steering(0.0);
        assert!(pmp_residual(&p, &p.zero_schedule().unwrap()).is_err());
    }

    #[test]
    fn invalid_problems() {
        let ens = Ensemble::new(ManifoldSpec::Euclidean(2), vec![vec![0.0, 0.0]]).unwrap();
        let f = ControlFamily::Gh { d: 2 };
        assert!(TrainingProblem::new(f.clone(), ens.clone(), vec![], OutputMap::Identity, 0.0, 1.0, 2).is_err());
        assert!(
            TrainingProblem::new(f.clone(), ens.clone(), vec![vec![0.0]], OutputMap::Identity, 0.0, 1.0, 2).is_err()
        );
        assert!(TrainingProblem::new(f, ens, vec![vec![0.0; 2]], OutputMap::Identity, -1.0, 1.0, 2).is_err());
        assert!(OptimizerConfig {
            c1: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn two_moons_is_deterministic() {
        let (a, la) = two_moons(20, 0.05, 1.0, 3);
        let (b, lb) = two_moons(20, 0.05, 1.0, 3);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert_eq!(la.iter().filter(|&&l| l == 1.0).count(), 10);
    }
}
