//! Manifold primitives and exact polynomial calculus on ℝ³.
//!
//! Sphere fields are handled as ambient polynomial fields restricted to
//! 𝕊² ⊂ ℝ³. Polynomials carry exact rational coefficients so harmonicity and
//! homogeneity are decided exactly; evaluation is in `f64`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::jet::{Jet, JetField, JetSpace};
use crate::tol;
use crate::{Error, Result};

/// Where states live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldSpec {
    Euclidean(usize),
    Torus(usize),
    Sphere2,
    /// ℳ × 𝒞 = ℝ^d × ℝ^s.
    Product(usize, usize),
}

impl ManifoldSpec {
    /// Number of stored coordinates.
    pub fn ambient_dim(&self) -> usize {
        match *self {
            ManifoldSpec::Euclidean(d) | ManifoldSpec::Torus(d) => d,
            ManifoldSpec::Sphere2 => 3,
            ManifoldSpec::Product(d, s) => d + s,
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match *self {
            ManifoldSpec::Sphere2 => 2,
            other => other.ambient_dim(),
        }
    }

    /// Bring raw coordinates onto the manifold (angle reduction, sphere
    /// normalization). Euclidean coordinates are left untouched.
    pub fn retract(&self, coords: &mut [f64]) {
        match self {
            ManifoldSpec::Torus(_) => {
                for c in coords.iter_mut() {
                    *c = reduce_angle(*c);
                }
            }
            ManifoldSpec::Sphere2 => {
                let n = norm(coords);
                for c in coords.iter_mut() {
                    *c /= n;
                }
            }
            _ => {}
        }
    }

    /// Distance used for the distinctness check of ensembles.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ManifoldSpec::Torus(_) => a
                .iter()
                .zip(b)
                .map(|(x, y)| wrap_difference(x - y).powi(2))
                .sum::<f64>()
                .sqrt(),
            _ => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

/// Reduce an angle to `[0, 2π)`.
pub fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Representative of an angle difference in `(-π, π]`.
pub fn wrap_difference(d: f64) -> f64 {
    let r = (d + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn check_unit(x: &[f64]) -> Result<()> {
    if x.len() != 3 {
        return Err(Error::Dimension(format!("sphere point needs 3 coordinates, got {}", x.len())));
    }
    let n = norm(x);
    if !n.is_finite() || (n - 1.0).abs() > tol::SPHERE_ACCEPT {
        return Err(Error::Constraint(format!("|x| = {n} is not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    manifold: ManifoldSpec,
    coords: Vec<f64>,
}

impl Point {
    /// Validates the manifold constraint. Torus angles are reduced to
    /// `[0, 2π)`; sphere points within the acceptance tolerance are
    /// renormalized so that `| |x| - 1 |` is at rounding level.
    pub fn new(manifold: ManifoldSpec, mut coords: Vec<f64>) -> Result<Self> {
        if coords.len() != manifold.ambient_dim() {
            return Err(Error::Dimension(format!(
                "{:?} needs {} coordinates, got {}",
                manifold,
                manifold.ambient_dim(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Constraint("non-finite coordinate".into()));
        }
        match manifold {
            ManifoldSpec::Sphere2 => {
                check_unit(&coords)?;
                manifold.retract(&mut coords);
            }
            ManifoldSpec::Torus(_) => manifold.retract(&mut coords),
            _ => {}
        }
        Ok(Self { manifold, coords })
    }

    pub fn manifold(&self) -> ManifoldSpec {
        self.manifold
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: Point,
    components: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: Point, components: Vec<f64>) -> Result<Self> {
        if components.len() != base.coords.len() {
            return Err(Error::Dimension("tangent vector length".into()));
        }
        if base.manifold == ManifoldSpec::Sphere2 {
            let v = norm(&components);
            let radial = dot(&components, &base.coords).abs();
            if radial > tol::TANGENCY * v.max(f64::MIN_POSITIVE) && radial > tol::EXACT {
                return Err(Error::Constraint(format!("⟨v, x⟩ = {radial} for |v| = {v}")));
            }
        }
        Ok(Self { base, components })
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }
}

/// Sample grid on a compact subset of a manifold.
///
/// For Euclidean and torus manifolds the bounds are coordinate intervals.
/// For the sphere they are `(polar angle, azimuth)` intervals, mapped to unit
/// vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactBox {
    pub manifold: ManifoldSpec,
    pub bounds: Vec<(f64, f64)>,
    pub resolution: Vec<usize>,
}

impl CompactBox {
    pub fn new(manifold: ManifoldSpec, bounds: Vec<(f64, f64)>, resolution: Vec<usize>) -> Result<Self> {
        let axes = match manifold {
            ManifoldSpec::Sphere2 => 2,
            m => m.ambient_dim(),
        };
        if bounds.len() != axes || resolution.len() != axes {
            return Err(Error::Dimension(format!("box for {manifold:?} needs {axes} axes")));
        }
        if resolution.iter().any(|&r| r < 2) {
            return Err(Error::Invalid("grid resolution must be at least 2 per axis".into()));
        }
        if bounds.iter().any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
            return Err(Error::Invalid("box bounds must be finite with lo <= hi".into()));
        }
        Ok(Self {
            manifold,
            bounds,
            resolution,
        })
    }

    /// Cube `[lo, hi]^d` in ℝ^d.
    pub fn cube(d: usize, lo: f64, hi: f64, resolution: usize) -> Result<Self> {
        Self::new(ManifoldSpec::Euclidean(d), vec![(lo, hi); d], vec![resolution; d])
    }

    /// Whole torus, sampled without the duplicate endpoint.
    pub fn full_torus(d: usize, resolution: usize) -> Result<Self> {
        let step = 2.0 * PI / resolution as f64;
        Self::new(ManifoldSpec::Torus(d), vec![(0.0, 2.0 * PI - step); d], vec![resolution; d])
    }

    pub fn full_sphere(resolution: usize) -> Result<Self> {
        let step = 2.0 * PI / resolution as f64;
        Self::new(
            ManifoldSpec::Sphere2,
            vec![(0.0, PI), (0.0, 2.0 * PI - step)],
            vec![resolution, resolution],
        )
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point `k` in ambient coordinates.
    pub fn point(&self, mut k: usize) -> Vec<f64> {
        let axis: Vec<f64> = self
            .bounds
            .iter()
            .zip(&self.resolution)
            .map(|(&(lo, hi), &r)| {
                let i = k % r;
                k /= r;
                lo + (hi - lo) * i as f64 / (r - 1) as f64
            })
            .collect();
        match self.manifold {
            ManifoldSpec::Sphere2 => {
                let (th, ph) = (axis[0], axis[1]);
                vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
            }
            _ => axis,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }
}

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

pub type Exponent = [u32; 3];

/// Polynomial on ℝ³ with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial3 {
    terms: BTreeMap<Exponent, Rational64>,
}

impl Polynomial3 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational64) -> Self {
        Self::monomial([0, 0, 0], c)
    }

    pub fn monomial(exp: Exponent, coef: Rational64) -> Self {
        let mut p = Self::zero();
        p.add_term(exp, coef);
        p
    }

    /// Coordinate function `x_{i+1}`.
    pub fn var(i: usize) -> Self {
        let mut e = [0; 3];
        e[i] = 1;
        Self::monomial(e, Rational64::from_integer(1))
    }

    /// Build from `(exponent, numerator, denominator)` triples.
    pub fn from_terms(terms: &[(Exponent, i64, i64)]) -> Self {
        let mut p = Self::zero();
        for &(e, n, d) in terms {
            p.add_term(e, Rational64::new(n, d));
        }
        p
    }

    fn add_term(&mut self, exp: Exponent, coef: Rational64) {
        if coef.is_zero() {
            return;
        }
        let entry = self.terms.entry(exp).or_insert_with(Rational64::zero);
        *entry += coef;
        if entry.is_zero() {
            self.terms.remove(&exp);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Rational64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Degree if every monomial has the same total degree.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degs = self.terms.keys().map(|e| e.iter().sum::<u32>());
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(*e, *c);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Rational64::from_integer(-1)))
    }

    pub fn scale(&self, s: Rational64) -> Self {
        let mut p = Self::zero();
        for (e, c) in &self.terms {
            p.add_term(*e, c * s);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                p.add_term([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]], ca * cb);
            }
        }
        p
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut p = Self::zero();
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut t = *e;
                t[i] -= 1;
                p.add_term(t, c * Rational64::from_integer(e[i] as i64));
            }
        }
        p
    }

    pub fn gradient(&self) -> [Polynomial3; 3] {
        [self.derivative(0), self.derivative(1), self.derivative(2)]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c.to_f64().unwrap_or(f64::NAN)
                    * x[0].powi(e[0] as i32)
                    * x[1].powi(e[1] as i32)
                    * x[2].powi(e[2] as i32)
            })
            .sum()
    }

    pub fn eval_gradient(&self, x: &[f64]) -> [f64; 3] {
        let g = self.gradient();
        [g[0].eval(x), g[1].eval(x), g[2].eval(x)]
    }

    /// Row-major Hessian at `x`.
    pub fn eval_hessian(&self, x: &[f64]) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for (i, row) in h.iter_mut().enumerate() {
            let di = self.derivative(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = di.derivative(j).eval(x);
            }
        }
        h
    }

    /// Expansion around the base point of `vars` (three jets).
    pub fn eval_jet(&self, vars: &[Jet]) -> Jet {
        let space = vars[0].space().clone();
        let max_pow = self.terms.keys().flat_map(|e| e.iter().copied()).max().unwrap_or(0) as usize;
        let powers: Vec<Vec<Jet>> = vars
            .iter()
            .map(|v| {
                let mut p = vec![Jet::constant(&space, 1.0)];
                for k in 1..=max_pow {
                    let next = p[k - 1].mul(v);
                    p.push(next);
                }
                p
            })
            .collect();
        let mut acc = Jet::zero(&space);
        for (e, c) in &self.terms {
            let m = powers[0][e[0] as usize]
                .mul(&powers[1][e[1] as usize])
                .mul(&powers[2][e[2] as usize]);
            acc = acc.add(&m.scale(c.to_f64().unwrap_or(f64::NAN)));
        }
        acc
    }
}

impl fmt::Display for Polynomial3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (i, &a) in e.iter().enumerate() {
                match a {
                    0 => {}
                    1 => write!(f, "x{}", i + 1)?,
                    _ => write!(f, "x{}^{}", i + 1, a)?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonomialJson {
    exp: Exponent,
    coef: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialJson {
    monomials: Vec<MonomialJson>,
}

impl Serialize for Polynomial3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolynomialJson {
            monomials: self
                .terms
                .iter()
                .map(|(e, c)| MonomialJson {
                    exp: *e,
                    coef: c.to_string(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PolynomialJson::deserialize(d)?;
        let mut p = Polynomial3::zero();
        for m in raw.monomials {
            let c: Rational64 = m
                .coef
                .trim()
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("bad rational coefficient {:?}", m.coef)))?;
            p.add_term(m.exp, c);
        }
        Ok(p)
    }
}

/// Exact Laplacian `∂²F/∂x₁² + ∂²F/∂x₂² + ∂²F/∂x₃²`.
pub fn laplacian3(f: &Polynomial3) -> Polynomial3 {
    (0..3).fold(Polynomial3::zero(), |acc, i| acc.add(&f.derivative(i).derivative(i)))
}

/// Homogeneous harmonic polynomial; its restriction to 𝕊² is a spherical harmonic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HarmonicPolynomial {
    poly: Polynomial3,
    degree: u32,
}

impl HarmonicPolynomial {
    pub fn new(poly: Polynomial3) -> Result<Self> {
        let degree = poly
            .homogeneous_degree()
            .ok_or_else(|| Error::Invalid(format!("{poly} is not homogeneous")))?;
        if !laplacian3(&poly).is_zero() {
            return Err(Error::Invalid(format!("{poly} is not harmonic")));
        }
        Ok(Self { poly, degree })
    }

    pub fn poly(&self) -> &Polynomial3 {
        &self.poly
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }
}

/// Basis of the `(2k+1)`-dimensional space of degree-`k` harmonics.
///
/// Each element is the unique harmonic polynomial whose terms of degree ≤ 1
/// in `x₃` reduce to one monomial `x₁^a x₂^b x₃^c` with `c ∈ {0, 1}`:
/// `h = Σ_j (-1)^j x₃^{2j+c} / (2j+c)! · Δ₁₂^j (x₁^a x₂^b)`.
pub fn harmonic_basis(k: u32) -> Vec<HarmonicPolynomial> {
    let mut out = Vec::with_capacity(2 * k as usize + 1);
    for c in 0..=1u32.min(k) {
        let m = k - c;
        for a in (0..=m).rev() {
            let b = m - a;
            let mut planar = Polynomial3::monomial([a, b, 0], Rational64::from_integer(1));
            let mut h = Polynomial3::zero();
            let mut j = 0u32;
            while !planar.is_zero() {
                let p = 2 * j + c;
                let fact: i64 = (1..=p as i64).product();
                let sign = if j.is_multiple_of(2) { 1 } else { -1 };
                let lift = Polynomial3::monomial([0, 0, p], Rational64::new(sign, fact));
                h = h.add(&lift.mul(&planar));
                planar = planar.derivative(0).derivative(0).add(&planar.derivative(1).derivative(1));
                j += 1;
            }
            out.push(HarmonicPolynomial::new(h).expect("constructed harmonic is homogeneous and harmonic"));
        }
    }
    out
}

/// The fixed harmonics used by the sphere control families:
/// `l¹ = x₁, l² = x₂, l³ = x₃, q = x₁x₂, c = x₃(x₁² − x₂²)`.
pub fn default_harmonics() -> [HarmonicPolynomial; 5] {
    let one = |e: Exponent| Polynomial3::monomial(e, Rational64::from_integer(1));
    let c = one([2, 0, 1]).sub(&one([0, 2, 1]));
    [
        HarmonicPolynomial::new(Polynomial3::var(0)).unwrap(),
        HarmonicPolynomial::new(Polynomial3::var(1)).unwrap(),
        HarmonicPolynomial::new(Polynomial3::var(2)).unwrap(),
        HarmonicPolynomial::new(one([1, 1, 0])).unwrap(),
        HarmonicPolynomial::new(c).unwrap(),
    ]
}

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

/// A smooth vector field in ambient coordinates with an exact Jacobian.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Vec<f64>;

    /// Row-major `J[i][j] = ∂_j X_i`.
    fn jacobian(&self, x: &[f64]) -> Vec<f64>;
}

/// Vector field on ℝ³ with polynomial components.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField {
    components: [Polynomial3; 3],
    jac: [[Polynomial3; 3]; 3],
}

impl PolyField {
    pub fn new(components: [Polynomial3; 3]) -> Self {
        let jac = [
            components[0].gradient(),
            components[1].gradient(),
            components[2].gradient(),
        ];
        Self { components, jac }
    }

    pub fn components(&self) -> &[Polynomial3; 3] {
        &self.components
    }

    /// Hamiltonian field `x × ∇φ`.
    pub fn hamiltonian(phi: &Polynomial3) -> Self {
        let g = phi.gradient();
        let x = [Polynomial3::var(0), Polynomial3::var(1), Polynomial3::var(2)];
        Self::new([
            x[1].mul(&g[2]).sub(&x[2].mul(&g[1])),
            x[2].mul(&g[0]).sub(&x[0].mul(&g[2])),
            x[0].mul(&g[1]).sub(&x[1].mul(&g[0])),
        ])
    }

    /// Polynomial extension `∇F − ⟨∇F, x⟩ x` of the spherical gradient.
    pub fn spherical_gradient(f: &Polynomial3) -> Self {
        let g = f.gradient();
        let x = [Polynomial3::var(0), Polynomial3::var(1), Polynomial3::var(2)];
        let radial = (0..3).fold(Polynomial3::zero(), |acc, i| acc.add(&x[i].mul(&g[i])));
        Self::new([
            g[0].sub(&radial.mul(&x[0])),
            g[1].sub(&radial.mul(&x[1])),
            g[2].sub(&radial.mul(&x[2])),
        ])
    }

    /// Exact bracket `[self, other] = D(other)·self − D(self)·other`.
    pub fn bracket(&self, other: &PolyField) -> PolyField {
        let comp = |i: usize| {
            (0..3).fold(Polynomial3::zero(), |acc, j| {
                acc.add(&other.jac[i][j].mul(&self.components[j]))
                    .sub(&self.jac[i][j].mul(&other.components[j]))
            })
        };
        Self::new([comp(0), comp(1), comp(2)])
    }

    /// Ambient divergence as an exact polynomial.
    pub fn divergence(&self) -> Polynomial3 {
        self.jac[0][0].add(&self.jac[1][1]).add(&self.jac[2][2])
    }

    pub fn jet(&self, vars: &[Jet]) -> JetField {
        self.components.iter().map(|p| p.eval_jet(vars)).collect()
    }
}

impl VectorField for PolyField {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        self.jac.iter().flat_map(|row| row.iter().map(|p| p.eval(x))).collect()
    }
}

/// Jet expansion of the coordinate functions of ℝ³ around `x`.
pub fn coordinate_jets(x: &[f64], order: usize) -> Vec<Jet> {
    let space = JetSpace::new(x.len(), order);
    x.iter().enumerate().map(|(i, &xi)| Jet::variable(&space, i, xi)).collect()
}

// ---------------------------------------------------------------------------
// Spherical calculus
// ---------------------------------------------------------------------------

/// `∇_S f(x) = ∇F(x) − ⟨∇F(x), x⟩ x`.
pub fn spherical_gradient(f: &Polynomial3, x: &Point) -> Result<TangentVector> {
    check_unit(x.coords())?;
    let g = f.eval_gradient(x.coords());
    let r = dot(&g, x.coords());
    let v: Vec<f64> = (0..3).map(|i| g[i] - r * x.coords()[i]).collect();
    TangentVector::new(x.clone(), v)
}

/// Hamiltonian field `x × ∇φ(x)`.
pub fn hamiltonian_field(phi: &Polynomial3, x: &Point) -> Result<TangentVector> {
    check_unit(x.coords())?;
    let g = phi.eval_gradient(x.coords());
    TangentVector::new(x.clone(), cross(x.coords(), &g).to_vec())
}

/// Intrinsic divergence on 𝕊² of the tangential part of an ambient field:
/// `div X − xᵀ DX x − 2⟨X, x⟩` at a unit `x`.
///
/// The value depends only on `pr_S X` along the sphere, not on how `X` is
/// extended off it. For `X = ∇_S f` this gives the spherical Laplacian.
pub fn spherical_divergence(field: &dyn VectorField, x: &[f64]) -> Result<f64> {
    check_unit(x)?;
    let v = field.value(x);
    let j = field.jacobian(x);
    let trace = j[0] + j[4] + j[8];
    let mut radial = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            radial += x[a] * j[a * 3 + b] * x[b];
        }
    }
    Ok(trace - radial - 2.0 * dot(&v, x))
}

/// `div X − 3⟨X, x⟩` at a unit `x`: the divergence of the given ambient
/// extension corrected by the Euler-field term.
///
/// This agrees with [`spherical_divergence`] when `⟨DX·x, x⟩ = ⟨X, x⟩`
/// on the sphere (for example when `X` is tangent and 0-homogeneous). For the
/// polynomial extensions produced by [`PolyField::spherical_gradient`] and
/// their brackets it is the quantity in the divergence-of-bracket identity
/// `(k−l)(k+l+3)(⟨∇F,∇G⟩ − klFG)`.
pub fn euler_divergence(field: &dyn VectorField, x: &[f64]) -> Result<f64> {
    check_unit(x)?;
    let v = field.value(x);
    let j = field.jacobian(x);
    Ok(j[0] + j[4] + j[8] - 3.0 * dot(&v, x))
}

/// Orthonormal basis of `T_x 𝕊²`.
pub fn tangent_frame(x: &[f64]) -> [[f64; 3]; 2] {
    let a = if x[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let r = dot(&a, x);
    let mut e1 = [a[0] - r * x[0], a[1] - r * x[1], a[2] - r * x[2]];
    let n = norm(&e1);
    e1.iter_mut().for_each(|c| *c /= n);
    let e2 = cross(x, &e1);
    [e1, e2]
}
