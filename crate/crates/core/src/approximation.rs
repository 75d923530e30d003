//! Series that certify the approximating properties numerically: Hermite
//! expansions on ℝ^d, Fourier series on 𝕋^d and Laplace series on 𝕊².
//!
//! Hermite polynomials follow the probabilists' convention
//! (`He₁ = z`, `He₂ = z² − 1`, weight `e^{-z²/2}`), for which
//! `∫ He_m² e^{-z²/2} dz = √(2π) m!` and `He'_{m+1} = (m+1) He_m`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::exec::{self, ExecMode};
use crate::geometry::{harmonic_basis, CompactBox, HarmonicPolynomial};
use crate::jet::factorial;
use crate::quadrature::{composite_legendre, gauss_hermite, gauss_legendre, Rule};
use crate::{Error, Result};

/// Scalar function on the state space, evaluated at ambient coordinates.
pub type ScalarFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Largest dimension supported by the tensor-product Hermite quadrature.
pub const MAX_HERMITE_DIM: usize = 3;

// ---------------------------------------------------------------------------
// Hermite polynomials
// ---------------------------------------------------------------------------

/// Exact coefficients of `He_m`, lowest degree first.
pub fn hermite_coefficients(m: usize) -> Vec<i128> {
    let mut prev: Vec<i128> = vec![1];
    if m == 0 {
        return prev;
    }
    let mut cur: Vec<i128> = vec![0, 1];
    for k in 1..m {
        // He_{k+1} = z He_k − k He_{k−1}
        let mut next = vec![0i128; k + 2];
        for (i, &c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= k as i128 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_0(z), …, He_n(z)` by the three-term recurrence.
pub fn hermite_values(n: usize, z: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(1.0);
    if n >= 1 {
        h.push(z);
    }
    for k in 1..n {
        let next = z * h[k] - k as f64 * h[k - 1];
        h.push(next);
    }
    h
}

/// Multi-indices `m ∈ ℕ^d` with `|m| ≤ n`, graded by total degree.
pub fn multi_indices(d: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == d {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in (0..=left).rev() {
            cur.push(a);
            rec(d, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 0..=n {
        rec(d, deg, &mut Vec::new(), &mut out);
    }
    out
}

fn gaussian_weight(z: &[f64]) -> f64 {
    (-0.5 * z.iter().map(|a| a * a).sum::<f64>()).exp()
}

/// Truncated Hermite expansion `S_n = Σ_{|m|≤n} c_m H_m` of `Y e^{γ}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteSeries {
    pub dim: usize,
    pub order: usize,
    pub indices: Vec<Vec<usize>>,
    pub coeffs: Vec<f64>,
}

impl HermiteSeries {
    pub fn coefficient(&self, m: &[usize]) -> f64 {
        self.indices.iter().position(|i| i == m).map_or(0.0, |k| self.coeffs[k])
    }

    fn axis_values(&self, z: &[f64], extra: usize) -> Vec<Vec<f64>> {
        z.iter().map(|&zi| hermite_values(self.order + extra, zi)).collect()
    }

    /// `S_n(z)`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        let h = self.axis_values(z, 0);
        self.indices
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| c * m.iter().enumerate().map(|(i, &mi)| h[i][mi]).product::<f64>())
            .sum()
    }

    /// `S_n(z) e^{-γ(z)}`, the approximant of `Y`.
    pub fn eval_weighted(&self, z: &[f64]) -> f64 {
        self.eval(z) * gaussian_weight(z)
    }

    /// `∂_i (S_n e^{-γ}) = −Σ c_m H_{m+e_i} e^{-γ}`.
    pub fn weighted_gradient(&self, z: &[f64]) -> Vec<f64> {
        let h = self.axis_values(z, 1);
        let w = gaussian_weight(z);
        (0..self.dim)
            .map(|i| {
                -w * self
                    .indices
                    .iter()
                    .zip(&self.coeffs)
                    .map(|(m, c)| {
                        c * m
                            .iter()
                            .enumerate()
                            .map(|(a, &ma)| h[a][if a == i { ma + 1 } else { ma }])
                            .product::<f64>()
                    })
                    .sum::<f64>()
            })
            .collect()
    }
}

/// How the integrals defining the Hermite coefficients are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// `Y e^{γ}` is smooth with polynomial growth: Gauss–Hermite product rule
    /// with `nodes` per axis (default `2n + 8`, at least `2n + 2`).
    Gaussian { nodes: Option<usize> },
    /// `Y` vanishes outside `[lo, hi]^d`: composite Gauss–Legendre.
    CompactSupport {
        lo: f64,
        hi: f64,
        panels: usize,
        per_panel: usize,
    },
}

impl Decay {
    pub fn gaussian() -> Self {
        Decay::Gaussian { nodes: None }
    }

    pub fn compact(lo: f64, hi: f64) -> Self {
        Decay::CompactSupport {
            lo,
            hi,
            panels: 32,
            per_panel: 16,
        }
    }
}

/// `c_m = ∫ Y H_m dz / ((2π)^{d/2} m!)` for all `|m| ≤ n`.
pub fn hermite_coeffs(y: ScalarFn, d: usize, n: usize, decay: Decay, exec: ExecMode) -> Result<HermiteSeries> {
    if d == 0 || d > MAX_HERMITE_DIM {
        return Err(Error::Invalid(format!("Hermite expansions support 1 ≤ d ≤ {MAX_HERMITE_DIM}, got {d}")));
    }
    // rule integrates g against dz; `gaussian` marks rules carrying e^{-γ}
    let (rule, gaussian) = match decay {
        Decay::Gaussian { nodes } => {
            let required = 2 * n + 2;
            let nodes = nodes.unwrap_or(2 * n + 8);
            if nodes < required {
                return Err(Error::QuadratureOrder {
                    order: n,
                    nodes,
                    required,
                });
            }
            (gauss_hermite(nodes), true)
        }
        Decay::CompactSupport {
            lo,
            hi,
            panels,
            per_panel,
        } => {
            if !(lo < hi) || panels == 0 || per_panel == 0 {
                return Err(Error::Invalid("bad compact-support quadrature".into()));
            }
            (composite_legendre(lo, hi, panels, per_panel), false)
        }
    };
    let indices = multi_indices(d, n);
    let q = rule.len();
    let total = q.pow(d as u32);
    let axis_h: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| hermite_values(n, x)).collect();

    // one partial sum per first-axis node, reduced in order afterwards
    let partials = exec::map_indexed(exec, q, |first| {
        let mut acc = vec![0.0; indices.len()];
        let inner = total / q;
        let mut z = vec![0.0; d];
        let mut idx = vec![0usize; d];
        for rest in 0..inner {
            idx[0] = first;
            let mut r = rest;
            for a in 1..d {
                idx[a] = r % q;
                r /= q;
            }
            let mut w = 1.0;
            for a in 0..d {
                z[a] = rule.nodes[idx[a]];
                w *= rule.weights[idx[a]];
            }
            let mut g = y(&z);
            if gaussian {
                g *= (0.5 * z.iter().map(|v| v * v).sum::<f64>()).exp();
            }
            if g == 0.0 {
                continue;
            }
            for (k, m) in indices.iter().enumerate() {
                let mut h = 1.0;
                for a in 0..d {
                    h *= axis_h[idx[a]][m[a]];
                }
                acc[k] += w * g * h;
            }
        }
        acc
    });
    let norm0 = (2.0 * PI).powf(d as f64 / 2.0);
    let coeffs = (0..indices.len())
        .map(|k| {
            let s: f64 = partials.iter().map(|p| p[k]).sum();
            let mfact: f64 = indices[k].iter().map(|&a| factorial(a)).product();
            s / (norm0 * mfact)
        })
        .collect();
    Ok(HermiteSeries {
        dim: d,
        order: n,
        indices,
        coeffs,
    })
}

/// Quantitative shadow of uniform convergence with bounded derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub order: usize,
    /// Grid sup of `|approximant − Y|`.
    pub sup_error: f64,
    /// Grid sup over all first partials of the approximant.
    pub deriv_sup: f64,
    /// Observed Lipschitz-type bound; `ell ≥ deriv_sup`.
    pub ell: f64,
    pub grid: Vec<usize>,
}

/// Errors of `S_n e^{-γ}` against `Y` on the grid of `k`.
pub fn truncation_report(series: &HermiteSeries, y: ScalarFn, k: &CompactBox) -> Result<TruncationReport> {
    if k.manifold.ambient_dim() != series.dim {
        return Err(Error::Dimension("box and series dimensions differ".into()));
    }
    let mut sup_error = 0.0f64;
    let mut deriv_sup = 0.0f64;
    for z in k.points() {
        sup_error = sup_error.max((series.eval_weighted(&z) - y(&z)).abs());
        for g in series.weighted_gradient(&z) {
            deriv_sup = deriv_sup.max(g.abs());
        }
    }
    Ok(TruncationReport {
        order: series.order,
        sup_error,
        deriv_sup,
        ell: deriv_sup,
        grid: k.resolution.clone(),
    })
}

// ---------------------------------------------------------------------------
// Fourier series on tori
// ---------------------------------------------------------------------------

/// `Σ_{|k|₁ ≤ n} c_k e^{i k·φ}` for a real function on 𝕋^d.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub dim: usize,
    pub order: usize,
    pub modes: Vec<Vec<i64>>,
    pub coeffs: Vec<Complex64>,
}

impl FourierSeries {
    pub fn coefficient(&self, k: &[i64]) -> Complex64 {
        self.modes
            .iter()
            .position(|m| m == k)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Cosine coefficient in `a₀/2 + Σ a_k cos kφ + b_k sin kφ` (d = 1).
    pub fn a(&self, k: i64) -> f64 {
        2.0 * self.coefficient(&[k]).re
    }

    /// Sine coefficient (d = 1).
    pub fn b(&self, k: i64) -> f64 {
        -2.0 * self.coefficient(&[k]).im
    }

    pub fn eval(&self, phi: &[f64]) -> f64 {
        self.modes
            .iter()
            .zip(&self.coeffs)
            .map(|(k, c)| {
                let arg: f64 = k.iter().zip(phi).map(|(&ki, &p)| ki as f64 * p).sum();
                (c * Complex64::from_polar(1.0, arg)).re
            })
            .sum()
    }

    pub fn gradient(&self, phi: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|j| {
                self.modes
                    .iter()
                    .zip(&self.coeffs)
                    .map(|(k, c)| {
                        let arg: f64 = k.iter().zip(phi).map(|(&ki, &p)| ki as f64 * p).sum();
                        (c * Complex64::new(0.0, k[j] as f64) * Complex64::from_polar(1.0, arg)).re
                    })
                    .sum()
            })
            .collect()
    }
}

fn fourier_modes(d: usize, n: usize) -> Vec<Vec<i64>> {
    let side = 2 * n as i64 + 1;
    let count = (side as usize).pow(d as u32);
    let mut modes: Vec<Vec<i64>> = (0..count)
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let k = (c % side as usize) as i64 - n as i64;
                    c /= side as usize;
                    k
                })
                .collect()
        })
        .filter(|k: &Vec<i64>| k.iter().map(|a| a.unsigned_abs() as usize).sum::<usize>() <= n)
        .collect();
    modes.sort_by_key(|k| (k.iter().map(|a| a.abs()).sum::<i64>(), k.clone()));
    modes
}

/// Trapezoid-rule Fourier coefficients with `4n + 4` samples per axis.
pub fn fourier_project(y: ScalarFn, d: usize, n: usize, exec: ExecMode) -> Result<FourierSeries> {
    if d == 0 || d > 3 {
        return Err(Error::Invalid(format!("Fourier projection supports 1 ≤ d ≤ 3, got {d}")));
    }
    let m = 4 * n + 4;
    let total = m.pow(d as u32);
    let modes = fourier_modes(d, n);
    let h = 2.0 * PI / m as f64;
    let partials = exec::map_indexed(exec, m, |first| {
        let mut acc = vec![Complex64::new(0.0, 0.0); modes.len()];
        let mut phi = vec![0.0; d];
        for rest in 0..total / m {
            phi[0] = first as f64 * h;
            let mut r = rest;
            for p in phi.iter_mut().skip(1) {
                *p = (r % m) as f64 * h;
                r /= m;
            }
            let v = y(&phi);
            for (c, k) in acc.iter_mut().zip(&modes) {
                let arg: f64 = k.iter().zip(&phi).map(|(&ki, &p)| ki as f64 * p).sum();
                *c += v * Complex64::from_polar(1.0, -arg);
            }
        }
        acc
    });
    let scale = 1.0 / total as f64;
    let coeffs = (0..modes.len())
        .map(|i| partials.iter().map(|p| p[i]).sum::<Complex64>() * scale)
        .collect();
    Ok(FourierSeries {
        dim: d,
        order: n,
        modes,
        coeffs,
    })
}

/// Truncation report for a Fourier partial sum (weight ≡ 1).
pub fn fourier_report(series: &FourierSeries, y: ScalarFn, k: &CompactBox) -> Result<TruncationReport> {
    if k.manifold.ambient_dim() != series.dim {
        return Err(Error::Dimension("box and series dimensions differ".into()));
    }
    let mut sup_error = 0.0f64;
    let mut deriv_sup = 0.0f64;
    for phi in k.points() {
        sup_error = sup_error.max((series.eval(&phi) - y(&phi)).abs());
        for g in series.gradient(&phi) {
            deriv_sup = deriv_sup.max(g.abs());
        }
    }
    Ok(TruncationReport {
        order: series.order,
        sup_error,
        deriv_sup,
        ell: deriv_sup,
        grid: k.resolution.clone(),
    })
}

// ---------------------------------------------------------------------------
// Laplace series on the sphere
// ---------------------------------------------------------------------------

/// Product rule on 𝕊²: Gauss–Legendre in `cos θ` times uniform azimuth.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomials on ℝ³ up to this degree integrate exactly.
    pub exact_degree: usize,
}

impl SphereRule {
    pub fn new(polar: usize, azimuthal: usize) -> Self {
        let gl: Rule = gauss_legendre(polar);
        let mut points = Vec::with_capacity(polar * azimuthal);
        let mut weights = Vec::with_capacity(polar * azimuthal);
        let dphi = 2.0 * PI / azimuthal as f64;
        for (t, w) in gl.nodes.iter().zip(&gl.weights) {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for j in 0..azimuthal {
                let phi = j as f64 * dphi;
                points.push([s * phi.cos(), s * phi.sin(), *t]);
                weights.push(w * dphi);
            }
        }
        Self {
            points,
            weights,
            exact_degree: (2 * polar - 1).min(azimuthal - 1),
        }
    }

    /// Rule exact to degree `2n + 2`.
    pub fn for_order(n: usize) -> Self {
        Self::new(n + 2, 2 * n + 3)
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceBlock {
    pub degree: u32,
    pub basis: Vec<HarmonicPolynomial>,
    pub coeffs: Vec<f64>,
}

/// L² projection onto spherical harmonics of degree ≤ `order`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceSeries {
    pub order: usize,
    pub blocks: Vec<LaplaceBlock>,
}

impl LaplaceSeries {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.blocks.iter().map(|b| b.eval(x)).sum()
    }

    /// Spherical gradient of the restriction, at a unit `x`.
    pub fn spherical_gradient(&self, x: &[f64]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for b in &self.blocks {
            for (h, c) in b.basis.iter().zip(&b.coeffs) {
                let gh = h.poly().eval_gradient(x);
                for i in 0..3 {
                    g[i] += c * gh[i];
                }
            }
        }
        let r: f64 = (0..3).map(|i| g[i] * x[i]).sum();
        [g[0] - r * x[0], g[1] - r * x[1], g[2] - r * x[2]]
    }
}

impl LaplaceBlock {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.basis.iter().zip(&self.coeffs).map(|(h, c)| c * h.poly().eval(x)).sum()
    }
}

/// Projection with the default rule (exact to degree `2n + 2`).
pub fn laplace_project(f: ScalarFn, n: usize, exec: ExecMode) -> Result<LaplaceSeries> {
    laplace_project_with(f, n, &SphereRule::for_order(n), exec)
}

pub fn laplace_project_with(f: ScalarFn, n: usize, rule: &SphereRule, exec: ExecMode) -> Result<LaplaceSeries> {
    if rule.exact_degree < 2 * n {
        return Err(Error::QuadratureOrder {
            order: n,
            nodes: rule.exact_degree,
            required: 2 * n,
        });
    }
    let samples = exec::map_indexed(exec, rule.points.len(), |q| f(&rule.points[q]));
    let blocks = exec::try_map_indexed(exec, n + 1, |deg| {
        let basis = harmonic_basis(deg as u32);
        let m = basis.len();
        let values: Vec<Vec<f64>> = rule
            .points
            .iter()
            .map(|p| basis.iter().map(|h| h.poly().eval(p)).collect())
            .collect();
        let mut gram = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (q, v) in values.iter().enumerate() {
            let w = rule.weights[q];
            for i in 0..m {
                rhs[i] += w * samples[q] * v[i];
                for j in 0..m {
                    gram[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Invalid(format!("singular Gram matrix at degree {deg}")))?;
        let c = chol.solve(&rhs);
        Ok::<_, Error>(LaplaceBlock {
            degree: deg as u32,
            basis,
            coeffs: c.iter().copied().collect(),
        })
    })?;
    Ok(LaplaceSeries { order: n, blocks })
}

/// Sup error and sup of the spherical gradient of the projection on `k`.
pub fn laplace_report(series: &LaplaceSeries, f: ScalarFn, k: &CompactBox) -> Result<TruncationReport> {
    if k.manifold != crate::geometry::ManifoldSpec::Sphere2 {
        return Err(Error::Dimension("Laplace report needs a sphere grid".into()));
    }
    let mut sup_error = 0.0f64;
    let mut deriv_sup = 0.0f64;
    for x in k.points() {
        sup_error = sup_error.max((series.eval(&x) - f(&x)).abs());
        deriv_sup = deriv_sup.max(crate::geometry::norm(&series.spherical_gradient(&x)));
    }
    Ok(TruncationReport {
        order: series.order,
        sup_error,
        deriv_sup,
        ell: deriv_sup,
        grid: k.resolution.clone(),
    })
}

/// Sample functions used by the ladders and the `approx` command.
pub mod samples {
    /// Smooth Gaussian bump `e^{-(z₁ − 1/2)²}` (first coordinate).
    pub fn gaussian_bump(z: &[f64]) -> f64 {
        (-(z[0] - 0.5).powi(2)).exp()
    }

    pub fn gaussian_bump_derivative(z: &[f64]) -> f64 {
        -2.0 * (z[0] - 0.5) * gaussian_bump(z)
    }

    /// `(1 − z²)³` on `[-1, 1]`, zero outside: C² with compact support.
    pub fn c2_bump(z: &[f64]) -> f64 {
        let t = 1.0 - z[0] * z[0];
        if t > 0.0 {
            t * t * t
        } else {
            0.0
        }
    }

    pub fn c2_bump_derivative(z: &[f64]) -> f64 {
        let t = 1.0 - z[0] * z[0];
        if t > 0.0 {
            -6.0 * z[0] * t * t
        } else {
            0.0
        }
    }

    /// C²-smooth 2π-periodic function `|sin φ|³ + cos(φ)/2`.
    pub fn periodic_c2(phi: &[f64]) -> f64 {
        phi[0].sin().abs().powi(3) + 0.5 * phi[0].cos()
    }
}
