//! Ensemble flows under piecewise-constant controls, with the continuous
//! (PMP) adjoint and the exact reverse-mode adjoint of the RK4 scheme.

use serde::{Deserialize, Serialize};

use crate::exec::{self, ExecMode};
use crate::fields::ControlFamily;
use crate::geometry::{wrap_difference, ManifoldSpec, Point};
use crate::tol;
use crate::{Error, Result};

/// N pairwise-distinct points of one manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    manifold: ManifoldSpec,
    points: Vec<Vec<f64>>,
}

impl Ensemble {
    /// Validates every point and rejects pairs closer than `1e-9`.
    pub fn new(manifold: ManifoldSpec, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let points = points
            .into_iter()
            .map(|p| Point::new(manifold, p).map(|p| p.coords().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        for a in 0..points.len() {
            for b in a + 1..points.len() {
                if manifold.distance(&points[a], &points[b]) < tol::DISTINCT {
                    return Err(Error::CoincidentMembers(a, b));
                }
            }
        }
        Ok(Self { manifold, points })
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        let m = points.first().ok_or(Error::EmptyEnsemble)?.manifold();
        if points.iter().any(|p| p.manifold() != m) {
            return Err(Error::Dimension("ensemble points live on different manifolds".into()));
        }
        Self::new(m, points.iter().map(|p| p.coords().to_vec()).collect())
    }

    pub fn manifold(&self) -> ManifoldSpec {
        self.manifold
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.manifold.ambient_dim()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Members reordered so that member `i` of the result is `perm[i]` here.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Invalid("not a permutation of the ensemble".into()));
        }
        Ok(Self {
            manifold: self.manifold,
            points: perm.iter().map(|&p| self.points[p].clone()).collect(),
        })
    }
}

/// Piecewise-constant controls on `S` uniform intervals of `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct ControlSchedule {
    horizon: f64,
    steps: usize,
    controls: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleRepr {
    horizon: f64,
    values: Vec<Vec<f64>>,
}

impl TryFrom<ScheduleRepr> for ControlSchedule {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        let controls = r.values.first().map_or(0, |v| v.len());
        if r.values.iter().any(|v| v.len() != controls) {
            return Err(Error::Dimension("schedule rows have different lengths".into()));
        }
        let steps = r.values.len();
        Self::new(r.horizon, steps, controls, r.values.into_iter().flatten().collect())
    }
}

impl From<ControlSchedule> for ScheduleRepr {
    fn from(s: ControlSchedule) -> Self {
        ScheduleRepr {
            horizon: s.horizon,
            values: (0..s.steps).map(|j| s.row(j).to_vec()).collect(),
        }
    }
}

impl ControlSchedule {
    /// `values` is row-major `steps × controls`.
    pub fn new(horizon: f64, steps: usize, controls: usize, values: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 || controls == 0 {
            return Err(Error::Invalid("schedule needs at least one step and one control".into()));
        }
        if values.len() != steps * controls {
            return Err(Error::Dimension(format!(
                "{} schedule values for {steps} steps × {controls} controls",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("schedule values must be finite".into()));
        }
        Ok(Self {
            horizon,
            steps,
            controls,
            values,
        })
    }

    pub fn zeros(horizon: f64, steps: usize, controls: usize) -> Result<Self> {
        Self::new(horizon, steps, controls, vec![0.0; steps * controls])
    }

    /// Every interval carries the same control vector.
    pub fn constant(horizon: f64, steps: usize, u: &[f64]) -> Result<Self> {
        Self::new(horizon, steps, u.len(), u.repeat(steps))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn controls(&self) -> usize {
        self.controls
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.controls..(j + 1) * self.controls]
    }

    pub fn value(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.controls + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.horizon, self.steps, self.controls, values)
    }

    /// The two halves `[0, t_at]` and `[t_at, T]`.
    pub fn split(&self, at: usize) -> Result<(Self, Self)> {
        if at == 0 || at >= self.steps {
            return Err(Error::Invalid(format!("split index {at} outside 1..{}", self.steps)));
        }
        let dt = self.dt();
        let cut = at * self.controls;
        Ok((
            Self::new(dt * at as f64, at, self.controls, self.values[..cut].to_vec())?,
            Self::new(dt * (self.steps - at) as f64, self.steps - at, self.controls, self.values[cut..].to_vec())?,
        ))
    }

    /// Reparametrize to horizon `T'`: controls are scaled by `T / T'`.
    pub fn rescaled(&self, horizon: f64) -> Result<Self> {
        let s = self.horizon / horizon;
        Self::new(horizon, self.steps, self.controls, self.values.iter().map(|v| v * s).collect())
    }

    pub fn norm(&self) -> f64 {
        crate::geometry::norm(&self.values)
    }
}

/// Integration settings shared by forward and backward passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// RK4 substeps per control interval.
    pub substeps: usize,
    pub exec: ExecMode,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            substeps: 4,
            exec: ExecMode::default(),
        }
    }
}

impl FlowConfig {
    pub fn with_substeps(substeps: usize) -> Self {
        Self {
            substeps,
            ..Self::default()
        }
    }
}

/// Forward trajectory of one member.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberTrajectory {
    /// States at every substep node, `(S·M + 1) × n`.
    pub nodes: Vec<f64>,
    /// RK4 stage points `y₁..y₄` of every substep, `S·M × 4 × n`.
    stages: Vec<f64>,
    /// Largest `||z| − 1|` seen before re-projection (sphere only).
    pub drift: f64,
}

/// States on the control grid, plus the stage cache used by the adjoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle {
    pub manifold: ManifoldSpec,
    pub times: Vec<f64>,
    pub substeps: usize,
    pub dim: usize,
    pub members: Vec<MemberTrajectory>,
}

impl TrajectoryBundle {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// State of member `k` at grid time `t_j`.
    pub fn state(&self, k: usize, j: usize) -> &[f64] {
        self.node(k, j * self.substeps)
    }

    /// State of member `k` at substep node `q`.
    pub fn node(&self, k: usize, q: usize) -> &[f64] {
        &self.members[k].nodes[q * self.dim..(q + 1) * self.dim]
    }

    pub fn terminal(&self, k: usize) -> &[f64] {
        self.state(k, self.steps())
    }

    pub fn max_drift(&self) -> f64 {
        self.members.iter().map(|m| m.drift).fold(0.0, f64::max)
    }

    fn stage(&self, k: usize, q: usize, s: usize) -> &[f64] {
        let off = (q * 4 + s) * self.dim;
        &self.members[k].stages[off..off + self.dim]
    }
}

fn check_setup(family: &ControlFamily, sched: &ControlSchedule, manifold: ManifoldSpec) -> Result<()> {
    if manifold != family.manifold() {
        return Err(Error::Dimension(format!(
            "ensemble lives on {manifold:?}, family {family} on {:?}",
            family.manifold()
        )));
    }
    if sched.controls() != family.controls() {
        return Err(Error::Dimension(format!(
            "schedule has {} controls, family {family} needs {}",
            sched.controls(),
            family.controls()
        )));
    }
    Ok(())
}

fn axpy(out: &mut [f64], z: &[f64], a: f64, k: &[f64]) {
    for ((o, zi), ki) in out.iter_mut().zip(z).zip(k) {
        *o = zi + a * ki;
    }
}

fn integrate_member(
    family: &ControlFamily,
    sched: &ControlSchedule,
    x0: &[f64],
    substeps: usize,
) -> Result<MemberTrajectory> {
    let n = x0.len();
    let manifold = family.manifold();
    let sphere = manifold == ManifoldSpec::Sphere2;
    let total = sched.steps() * substeps;
    let h = sched.dt() / substeps as f64;
    let mut nodes = Vec::with_capacity((total + 1) * n);
    let mut stages = Vec::with_capacity(total * 4 * n);
    nodes.extend_from_slice(x0);
    let mut z = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut y2, mut y3, mut y4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut drift = 0.0f64;
    for j in 0..sched.steps() {
        let u = sched.row(j);
        for m in 0..substeps {
            family.drift(u, &z, &mut k1);
            axpy(&mut y2, &z, 0.5 * h, &k1);
            family.drift(u, &y2, &mut k2);
            axpy(&mut y3, &z, 0.5 * h, &k2);
            family.drift(u, &y3, &mut k3);
            axpy(&mut y4, &z, h, &k3);
            family.drift(u, &y4, &mut k4);
            stages.extend_from_slice(&z);
            stages.extend_from_slice(&y2);
            stages.extend_from_slice(&y3);
            stages.extend_from_slice(&y4);
            for i in 0..n {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: j, substep: m });
            }
            if sphere {
                drift = drift.max((crate::geometry::norm(&z) - 1.0).abs());
            }
            manifold.retract(&mut z);
            nodes.extend_from_slice(&z);
        }
    }
    Ok(MemberTrajectory { nodes, stages, drift })
}

/// Integrates every member with the same schedule (RK4, `cfg.substeps` per
/// interval, retraction after each substep).
pub fn flow_ensemble(
    family: &ControlFamily,
    sched: &ControlSchedule,
    ensemble: &Ensemble,
    cfg: &FlowConfig,
) -> Result<TrajectoryBundle> {
    check_setup(family, sched, ensemble.manifold())?;
    if cfg.substeps == 0 {
        return Err(Error::Invalid("substeps must be positive".into()));
    }
    let members = exec::try_map_indexed(cfg.exec, ensemble.len(), |k| {
        integrate_member(family, sched, ensemble.point(k), cfg.substeps)
    })?;
    let dt = sched.dt();
    Ok(TrajectoryBundle {
        manifold: ensemble.manifold(),
        times: (0..=sched.steps()).map(|j| j as f64 * dt).collect(),
        substeps: cfg.substeps,
        dim: ensemble.dim(),
        members,
    })
}

/// Coordinate projection `p`; `Identity` keeps every coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMap {
    #[default]
    Identity,
    Coordinates(Vec<usize>),
}

impl OutputMap {
    /// Selected state coordinates for a state of dimension `n`.
    pub fn indices(&self, n: usize) -> Vec<usize> {
        match self {
            OutputMap::Identity => (0..n).collect(),
            OutputMap::Coordinates(c) => c.clone(),
        }
    }

    pub fn output_dim(&self, n: usize) -> usize {
        self.indices(n).len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let idx = self.indices(n);
        if idx.is_empty() {
            return Err(Error::Invalid("output map selects no coordinates".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Dimension(format!("output coordinate {bad} outside state dimension {n}")));
        }
        Ok(())
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        self.indices(z.len()).into_iter().map(|i| z[i]).collect()
    }

    /// `p(z) − c`, with angle differences wrapped to `(-π, π]` on tori.
    pub fn residual(&self, manifold: ManifoldSpec, z: &[f64], target: &[f64]) -> Vec<f64> {
        let torus = matches!(manifold, ManifoldSpec::Torus(_));
        self.apply(z)
            .iter()
            .zip(target)
            .map(|(p, c)| if torus { wrap_difference(p - c) } else { p - c })
            .collect()
    }

    /// Covector `rᵀ Dp` in state coordinates.
    pub fn pullback(&self, n: usize, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, &ri) in self.indices(n).iter().zip(r) {
            out[i] += ri;
        }
        out
    }
}

fn check_targets(targets: &[Vec<f64>], members: usize, pmap: &OutputMap, n: usize) -> Result<()> {
    pmap.validate(n)?;
    if targets.len() != members {
        return Err(Error::Dimension(format!("{} targets for {members} members", targets.len())));
    }
    let s = pmap.output_dim(n);
    if let Some(t) = targets.iter().find(|t| t.len() != s) {
        return Err(Error::Dimension(format!("target of length {} for output dimension {s}", t.len())));
    }
    Ok(())
}

/// `½ Σ_k |p(z_k(T)) − c_k|²`.
pub fn discrepancy(traj: &TrajectoryBundle, targets: &[Vec<f64>], pmap: &OutputMap) -> Result<f64> {
    check_targets(targets, traj.len(), pmap, traj.dim)?;
    Ok((0..traj.len())
        .map(|k| {
            let r = pmap.residual(traj.manifold, traj.terminal(k), &targets[k]);
            0.5 * r.iter().map(|v| v * v).sum::<f64>()
        })
        .sum())
}

/// Continuous adjoint covectors at every substep node.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointBundle {
    pub substeps: usize,
    pub dim: usize,
    /// Per member, `(S·M + 1) × n`.
    pub psi: Vec<Vec<f64>>,
}

impl AdjointBundle {
    /// `ψ_k(t_j)` at a grid time.
    pub fn at(&self, k: usize, j: usize) -> &[f64] {
        self.node(k, j * self.substeps)
    }

    pub fn node(&self, k: usize, q: usize) -> &[f64] {
        &self.psi[k][q * self.dim..(q + 1) * self.dim]
    }
}

/// `λ A(z)` with `A = Σ u_i Df_i(z)`.
fn covector_jac(family: &ControlFamily, u: &[f64], z: &[f64], psi: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut gu = vec![0.0; u.len()];
    family.drift_vjp(u, z, psi, out, &mut gu);
}

/// Backward RK4 for `ψ̇ = −ψ Σ u_i Df_i(z)` from `ψ(T) = −(p(z(T)) − c)ᵀ Dp`.
///
/// Midpoint states come from the cubic Hermite interpolant of the stored
/// nodes, so the scheme keeps fourth order.
pub fn adjoint_pass(
    family: &ControlFamily,
    sched: &ControlSchedule,
    traj: &TrajectoryBundle,
    targets: &[Vec<f64>],
    pmap: &OutputMap,
    exec: ExecMode,
) -> Result<AdjointBundle> {
    check_setup(family, sched, traj.manifold)?;
    check_targets(targets, traj.len(), pmap, traj.dim)?;
    if traj.steps() != sched.steps() {
        return Err(Error::Dimension("trajectory and schedule grids differ".into()));
    }
    let n = traj.dim;
    let msub = traj.substeps;
    let total = sched.steps() * msub;
    let h = sched.dt() / msub as f64;
    let torus = matches!(traj.manifold, ManifoldSpec::Torus(_));
    let psi = exec::map_indexed(exec, traj.len(), |k| {
        let r = pmap.residual(traj.manifold, traj.terminal(k), &targets[k]);
        let mut p: Vec<f64> = pmap.pullback(n, &r).iter().map(|v| -v).collect();
        let mut out = vec![0.0; (total + 1) * n];
        out[total * n..].copy_from_slice(&p);
        let (mut f0, mut f1) = (vec![0.0; n], vec![0.0; n]);
        let (mut a1, mut a2, mut a3, mut a4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut zmid = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for q in (0..total).rev() {
            let u = sched.row(q / msub);
            let z0 = traj.node(k, q);
            let mut z1 = traj.node(k, q + 1).to_vec();
            if torus {
                for i in 0..n {
                    z1[i] = z0[i] + wrap_difference(z1[i] - z0[i]);
                }
            }
            family.drift(u, z0, &mut f0);
            family.drift(u, &z1, &mut f1);
            for i in 0..n {
                zmid[i] = 0.5 * (z0[i] + z1[i]) + h / 8.0 * (f0[i] - f1[i]);
            }
            // s = T − t; dψ/ds = ψ A(z)
            covector_jac(family, u, &z1, &p, &mut a1);
            axpy(&mut tmp, &p, 0.5 * h, &a1);
            covector_jac(family, u, &zmid, &tmp, &mut a2);
            axpy(&mut tmp, &p, 0.5 * h, &a2);
            covector_jac(family, u, &zmid, &tmp, &mut a3);
            axpy(&mut tmp, &p, h, &a3);
            covector_jac(family, u, z0, &tmp, &mut a4);
            for i in 0..n {
                p[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
            }
            out[q * n..(q + 1) * n].copy_from_slice(&p);
        }
        out
    });
    Ok(AdjointBundle {
        substeps: msub,
        dim: n,
        psi,
    })
}

/// Loss value, gradient and initial-state sensitivities of the discretized
/// Bolza functional.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub loss: f64,
    pub discrepancy: f64,
    /// Row-major `S × r`.
    pub gradient: Vec<f64>,
    /// `∂𝒥/∂x_k` per member, in ambient coordinates.
    pub initial_adjoint: Vec<Vec<f64>>,
}

impl GradientReport {
    pub fn norm(&self) -> f64 {
        crate::geometry::norm(&self.gradient)
    }
}

/// Reverse sweep through the stored RK4 stages of one member.
fn member_vjp(
    family: &ControlFamily,
    sched: &ControlSchedule,
    traj: &TrajectoryBundle,
    k: usize,
    terminal: Vec<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let n = traj.dim;
    let r = sched.controls();
    let msub = traj.substeps;
    let h = sched.dt() / msub as f64;
    let sphere = traj.manifold == ManifoldSpec::Sphere2;
    let mut grad = vec![0.0; sched.steps() * r];
    let mut lam = terminal;
    let mut kb = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut yb = vec![0.0; n];
    let mut fk = vec![0.0; n];
    for q in (0..sched.steps() * msub).rev() {
        let j = q / msub;
        let u = sched.row(j);
        let gu = &mut grad[j * r..(j + 1) * r];
        if sphere {
            // undo z ↦ w/|w|: multiply by (I − ẑẑᵀ)/|w|
            let mut w = traj.stage(k, q, 0).to_vec();
            for (s, c) in [(0, 1.0), (1, 2.0), (2, 2.0), (3, 1.0)] {
                family.drift(u, traj.stage(k, q, s), &mut fk);
                for i in 0..n {
                    w[i] += h / 6.0 * c * fk[i];
                }
            }
            let nw = crate::geometry::norm(&w);
            let proj: f64 = (0..n).map(|i| lam[i] * w[i]).sum::<f64>() / (nw * nw);
            for i in 0..n {
                lam[i] = (lam[i] - proj * w[i]) / nw;
            }
        }
        for (s, c) in [(0, 1.0), (1, 2.0), (2, 2.0), (3, 1.0)] {
            for i in 0..n {
                kb[s][i] = h / 6.0 * c * lam[i];
            }
        }
        let mut zb = lam.clone();
        for s in (0..4).rev() {
            yb.iter_mut().for_each(|v| *v = 0.0);
            let ks = kb[s].clone();
            family.drift_vjp(u, traj.stage(k, q, s), &ks, &mut yb, gu);
            for i in 0..n {
                zb[i] += yb[i];
            }
            match s {
                3 => (0..n).for_each(|i| kb[2][i] += h * yb[i]),
                2 => (0..n).for_each(|i| kb[1][i] += 0.5 * h * yb[i]),
                1 => (0..n).for_each(|i| kb[0][i] += 0.5 * h * yb[i]),
                _ => {}
            }
        }
        lam = zb;
    }
    (grad, lam)
}

/// Exact gradient of `𝒥 = ½Σ|p(z_k(T)) − c_k|² + (β/2)Σ_j Σ_i u_{j,i}² Δt`
/// for the RK4-discretized flow.
pub fn discrete_gradient(
    family: &ControlFamily,
    sched: &ControlSchedule,
    ensemble: &Ensemble,
    targets: &[Vec<f64>],
    pmap: &OutputMap,
    beta: f64,
    cfg: &FlowConfig,
) -> Result<GradientReport> {
    let traj = flow_ensemble(family, sched, ensemble, cfg)?;
    gradient_from_trajectory(family, sched, &traj, targets, pmap, beta, cfg.exec)
}

pub fn gradient_from_trajectory(
    family: &ControlFamily,
    sched: &ControlSchedule,
    traj: &TrajectoryBundle,
    targets: &[Vec<f64>],
    pmap: &OutputMap,
    beta: f64,
    exec: ExecMode,
) -> Result<GradientReport> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Invalid(format!("β must be a finite non-negative number, got {beta}")));
    }
    check_setup(family, sched, traj.manifold)?;
    check_targets(targets, traj.len(), pmap, traj.dim)?;
    let n = traj.dim;
    let parts = exec::map_indexed(exec, traj.len(), |k| {
        let r = pmap.residual(traj.manifold, traj.terminal(k), &targets[k]);
        let disc = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        let (g, x) = member_vjp(family, sched, traj, k, pmap.pullback(n, &r));
        (disc, g, x)
    });
    let dt = sched.dt();
    let mut gradient: Vec<f64> = sched.values().iter().map(|u| beta * u * dt).collect();
    let mut disc = 0.0;
    let mut initial_adjoint = Vec::with_capacity(parts.len());
    for (d, g, x) in parts {
        disc += d;
        gradient.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        initial_adjoint.push(x);
    }
    let penalty = 0.5 * beta * dt * sched.values().iter().map(|u| u * u).sum::<f64>();
    Ok(GradientReport {
        loss: disc + penalty,
        discrepancy: disc,
        gradient,
        initial_adjoint,
    })
}
