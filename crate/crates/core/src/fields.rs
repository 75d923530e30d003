//! Control families, Lie brackets, seminorms and bracket-generation rank tests.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Ensemble;
use crate::exec::{self, ExecMode};
use crate::geometry::{
    coordinate_jets, default_harmonics, CompactBox, ManifoldSpec, Point, PolyField, Polynomial3, TangentVector,
    VectorField,
};
use crate::jet::{self, Jet, JetField, JetSpace};
use crate::tol;
use crate::{Error, Result};

/// One of the named control-affine systems.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlFamily {
    /// `ż = e^{-γ(z)} u + v` on ℝ^d; controls ordered `u₁..u_d, v₁..v_d`.
    Gh { d: usize },
    /// `φ̇ = u₀ + u₁ sin φ + u₂ sin 2φ` on 𝕋¹.
    Torus1,
    /// `f⁰_i, f¹_i, f²_i, g_i` on 𝕋^d, in four blocks of `d`.
    TorusD { d: usize },
    /// Hamiltonian fields of `x₁, x₂, x₃, x₁x₂, x₃(x₁² − x₂²)`.
    SphereSymp,
    /// `SphereSymp` plus the spherical gradients of `x₃` and `x₁x₂`.
    SphereFull,
    /// GH system on ℝ^{d+s} = ℳ × 𝒞 with base point `ν ∈ ℝ^s`.
    ProductGh { d: usize, s: usize, nu: Vec<f64> },
}

fn sphere_symp_fields() -> &'static [PolyField] {
    static CELL: OnceLock<Vec<PolyField>> = OnceLock::new();
    CELL.get_or_init(|| default_harmonics().iter().map(|h| PolyField::hamiltonian(h.poly())).collect())
}

fn sphere_full_fields() -> &'static [PolyField] {
    static CELL: OnceLock<Vec<PolyField>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut v = sphere_symp_fields().to_vec();
        let q = Polynomial3::monomial([1, 1, 0], Rational64::from_integer(1));
        v.push(PolyField::spherical_gradient(&Polynomial3::var(2)));
        v.push(PolyField::spherical_gradient(&q));
        v
    })
}

impl ControlFamily {
    pub fn product_gh(d: usize, s: usize, nu: Vec<f64>) -> Result<Self> {
        if nu.len() != s {
            return Err(Error::Dimension(format!("base point ν has {} entries, expected {s}", nu.len())));
        }
        Ok(Self::ProductGh { d, s, nu })
    }

    pub fn manifold(&self) -> ManifoldSpec {
        match *self {
            Self::Gh { d } => ManifoldSpec::Euclidean(d),
            Self::Torus1 => ManifoldSpec::Torus(1),
            Self::TorusD { d } => ManifoldSpec::Torus(d),
            Self::SphereSymp | Self::SphereFull => ManifoldSpec::Sphere2,
            Self::ProductGh { d, s, .. } => ManifoldSpec::Product(d, s),
        }
    }

    /// Number of stored state coordinates.
    pub fn state_dim(&self) -> usize {
        self.manifold().ambient_dim()
    }

    /// Number of controls `r`.
    pub fn controls(&self) -> usize {
        match *self {
            Self::Gh { d } => 2 * d,
            Self::Torus1 => 3,
            Self::TorusD { d } => 4 * d,
            Self::SphereSymp => 5,
            Self::SphereFull => 7,
            Self::ProductGh { d, s, .. } => 2 * (d + s),
        }
    }

    fn gh_dim(&self) -> Option<usize> {
        match *self {
            Self::Gh { d } => Some(d),
            Self::ProductGh { d, s, .. } => Some(d + s),
            _ => None,
        }
    }

    fn torus_dim(&self) -> Option<usize> {
        match *self {
            Self::Torus1 => Some(1),
            Self::TorusD { d } => Some(d),
            _ => None,
        }
    }

    fn sphere_fields(&self) -> Option<&'static [PolyField]> {
        match self {
            Self::SphereSymp => Some(sphere_symp_fields()),
            Self::SphereFull => Some(sphere_full_fields()),
            _ => None,
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.controls() {
            return Err(Error::GeneratorIndex {
                index: i,
                count: self.controls(),
            });
        }
        Ok(())
    }

    /// Value of generator `i` at `x`, written to `out`. Unchecked hot path.
    pub fn generator_value(&self, i: usize, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        if let Some(d) = self.gh_dim() {
            if i < d {
                out[i] = gaussian(x);
            } else {
                out[i - d] = 1.0;
            }
        } else if let Some(d) = self.torus_dim() {
            let (block, k) = (i / d, i % d);
            out[k] = match block {
                0 => 1.0,
                1 => x[k].sin(),
                2 => (2.0 * x[k]).sin(),
                _ => x.iter().map(|a| a.sin()).sum(),
            };
        } else if let Some(fields) = self.sphere_fields() {
            out.copy_from_slice(&fields[i].value(x));
        }
    }

    /// Row-major Jacobian of generator `i` at `x`. Unchecked hot path.
    pub fn generator_jacobian(&self, i: usize, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        if let Some(d) = self.gh_dim() {
            if i < d {
                let e = gaussian(x);
                for j in 0..d {
                    out[i * d + j] = -e * x[j];
                }
            }
        } else if let Some(d) = self.torus_dim() {
            let (block, k) = (i / d, i % d);
            match block {
                0 => {}
                1 => out[k * d + k] = x[k].cos(),
                2 => out[k * d + k] = 2.0 * (2.0 * x[k]).cos(),
                _ => {
                    for j in 0..d {
                        out[k * d + j] = x[j].cos();
                    }
                }
            }
        } else if let Some(fields) = self.sphere_fields() {
            out.copy_from_slice(&fields[i].jacobian(x));
        }
    }

    /// Checked generator evaluation at a point of the family's manifold.
    pub fn eval_generator(&self, i: usize, x: &Point) -> Result<TangentVector> {
        self.check_index(i)?;
        if x.manifold() != self.manifold() {
            return Err(Error::Dimension(format!(
                "point lives on {:?}, family {} on {:?}",
                x.manifold(),
                self,
                self.manifold()
            )));
        }
        let mut v = vec![0.0; self.state_dim()];
        self.generator_value(i, x.coords(), &mut v);
        TangentVector::new(x.clone(), v)
    }

    /// `Σ_i u_i f_i(x)`.
    pub fn drift(&self, u: &[f64], x: &[f64], out: &mut [f64]) {
        let n = x.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        if let Some(d) = self.gh_dim() {
            let e = gaussian(x);
            for k in 0..d {
                out[k] = e * u[k] + u[d + k];
            }
        } else if let Some(d) = self.torus_dim() {
            let s: f64 = x.iter().map(|a| a.sin()).sum();
            for k in 0..d {
                out[k] = u[k] + u[d + k] * x[k].sin() + u[2 * d + k] * (2.0 * x[k]).sin();
                if self.controls() == 4 * d {
                    out[k] += u[3 * d + k] * s;
                }
            }
        } else {
            let mut tmp = vec![0.0; n];
            for (i, &ui) in u.iter().enumerate() {
                if ui != 0.0 {
                    self.generator_value(i, x, &mut tmp);
                    out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += ui * t);
                }
            }
        }
    }

    /// Transposed linearization of the drift.
    ///
    /// Adds `λ · Σ_i u_i Df_i(x)` to `grad_x` and `λ · f_i(x)` to `grad_u[i]`.
    pub fn drift_vjp(&self, u: &[f64], x: &[f64], lambda: &[f64], grad_x: &mut [f64], grad_u: &mut [f64]) {
        let n = x.len();
        if let Some(d) = self.gh_dim() {
            let e = gaussian(x);
            let lu: f64 = (0..d).map(|k| lambda[k] * u[k]).sum();
            for j in 0..d {
                grad_x[j] -= e * lu * x[j];
            }
            for k in 0..d {
                grad_u[k] += lambda[k] * e;
                grad_u[d + k] += lambda[k];
            }
        } else if let Some(d) = self.torus_dim() {
            let s: f64 = x.iter().map(|a| a.sin()).sum();
            let coupled = self.controls() == 4 * d;
            let lv: f64 = if coupled { (0..d).map(|k| lambda[k] * u[3 * d + k]).sum() } else { 0.0 };
            for k in 0..d {
                let (sk, ck) = x[k].sin_cos();
                let (s2, c2) = (2.0 * x[k]).sin_cos();
                grad_x[k] += lambda[k] * (u[d + k] * ck + 2.0 * u[2 * d + k] * c2);
                if coupled {
                    grad_x[k] += lv * ck;
                    grad_u[3 * d + k] += lambda[k] * s;
                }
                grad_u[k] += lambda[k];
                grad_u[d + k] += lambda[k] * sk;
                grad_u[2 * d + k] += lambda[k] * s2;
            }
        } else {
            let mut v = vec![0.0; n];
            let mut jac = vec![0.0; n * n];
            for (i, &ui) in u.iter().enumerate() {
                self.generator_value(i, x, &mut v);
                grad_u[i] += v.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>();
                if ui != 0.0 {
                    self.generator_jacobian(i, x, &mut jac);
                    for a in 0..n {
                        for b in 0..n {
                            grad_x[b] += ui * lambda[a] * jac[a * n + b];
                        }
                    }
                }
            }
        }
    }

    /// Jet expansion of generator `i` around the base point of `vars`.
    pub fn generator_jet(&self, i: usize, vars: &[Jet]) -> JetField {
        let space = vars[0].space().clone();
        let n = vars.len();
        let mut out: JetField = (0..n).map(|_| Jet::zero(&space)).collect();
        if let Some(d) = self.gh_dim() {
            if i < d {
                let sq = vars.iter().fold(Jet::zero(&space), |acc, v| acc.add(&v.mul(v)));
                out[i] = sq.scale(-0.5).exp();
            } else {
                out[i - d] = Jet::constant(&space, 1.0);
            }
        } else if let Some(d) = self.torus_dim() {
            let (block, k) = (i / d, i % d);
            out[k] = match block {
                0 => Jet::constant(&space, 1.0),
                1 => vars[k].sin(),
                2 => vars[k].scale(2.0).sin(),
                _ => vars.iter().fold(Jet::zero(&space), |acc, v| acc.add(&v.sin())),
            };
        } else if let Some(fields) = self.sphere_fields() {
            out = fields[i].jet(vars);
        }
        out
    }

    /// Handle on generator `i`.
    pub fn generator(&self, i: usize) -> Result<FieldHandle> {
        self.check_index(i)?;
        Ok(FieldHandle {
            family: self.clone(),
            word: Word::Leaf(i),
        })
    }
}

fn gaussian(x: &[f64]) -> f64 {
    (-0.5 * x.iter().map(|a| a * a).sum::<f64>()).exp()
}

impl fmt::Display for ControlFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gh { d } => write!(f, "gh:{d}"),
            Self::Torus1 => write!(f, "torus:1"),
            Self::TorusD { d } => write!(f, "torus:{d}"),
            Self::SphereSymp => write!(f, "sphere:symp"),
            Self::SphereFull => write!(f, "sphere:full"),
            Self::ProductGh { d, s, .. } => write!(f, "product-gh:{d},{s}"),
        }
    }
}

impl FromStr for ControlFamily {
    type Err = Error;

    /// Parses `gh:d`, `torus:1`, `torus:d`, `sphere:symp`, `sphere:full`,
    /// `product-gh:d,s` (the latter with `ν = 0`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown control family {s:?}"));
        let dim = |t: &str| -> Result<usize> {
            let d: usize = t.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(d)
        };
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "gh" => Ok(Self::Gh { d: dim(arg)? }),
            "torus" => match dim(arg)? {
                1 => Ok(Self::Torus1),
                d => Ok(Self::TorusD { d }),
            },
            "sphere" => match arg {
                "symp" => Ok(Self::SphereSymp),
                "full" => Ok(Self::SphereFull),
                _ => Err(bad()),
            },
            "product-gh" => {
                let (d, s) = arg.split_once(',').ok_or_else(bad)?;
                let s = dim(s)?;
                Ok(Self::ProductGh {
                    d: dim(d)?,
                    s,
                    nu: vec![0.0; s],
                })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for ControlFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ControlFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Bracket words and generic brackets
// ---------------------------------------------------------------------------

/// Fields that can be expanded into jets; brackets of such fields are again
/// expandable, to any nesting depth.
pub trait JetExpand: Sync {
    fn dim(&self) -> usize;

    fn expand(&self, x: &[f64], order: usize) -> JetField;
}

impl JetExpand for PolyField {
    fn dim(&self) -> usize {
        3
    }

    fn expand(&self, x: &[f64], order: usize) -> JetField {
        self.jet(&coordinate_jets(x, order))
    }
}

/// `[left, right]` for any two expandable fields.
pub struct Bracket<'a> {
    pub left: &'a dyn JetExpand,
    pub right: &'a dyn JetExpand,
}

impl<'a> Bracket<'a> {
    pub fn new(left: &'a dyn JetExpand, right: &'a dyn JetExpand) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(Error::Dimension(format!(
                "bracket of fields on spaces of dimension {} and {}",
                left.dim(),
                right.dim()
            )));
        }
        Ok(Self { left, right })
    }
}

impl JetExpand for Bracket<'_> {
    fn dim(&self) -> usize {
        self.left.dim()
    }

    fn expand(&self, x: &[f64], order: usize) -> JetField {
        jet::bracket(&self.left.expand(x, order + 1), &self.right.expand(x, order + 1))
    }
}

impl VectorField for Bracket<'_> {
    fn dim(&self) -> usize {
        self.left.dim()
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        jet::field_value(&self.expand(x, 0))
    }

    fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        jet::field_jacobian(&self.expand(x, 1))
    }
}

/// Formal bracket word over generator indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Word {
    Leaf(usize),
    Bracket(Box<Word>, Box<Word>),
}

impl Word {
    pub fn bracket(a: Word, b: Word) -> Word {
        Word::Bracket(Box::new(a), Box::new(b))
    }

    /// Number of leaves.
    pub fn len(&self) -> usize {
        match self {
            Word::Leaf(_) => 1,
            Word::Bracket(a, b) => a.len() + b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn max_leaf(&self) -> usize {
        match self {
            Word::Leaf(i) => *i,
            Word::Bracket(a, b) => a.max_leaf().max(b.max_leaf()),
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Word::Leaf(i) => write!(f, "{i}"),
            Word::Bracket(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// An element of the Lie algebra generated by a family, as a bracket word.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHandle {
    pub family: ControlFamily,
    pub word: Word,
}

impl FieldHandle {
    pub fn new(family: ControlFamily, word: Word) -> Result<Self> {
        family.check_index(word.max_leaf())?;
        Ok(Self { family, word })
    }

    pub fn bracket(&self, other: &FieldHandle) -> Result<FieldHandle> {
        if self.family != other.family {
            return Err(Error::Dimension("bracket of handles from different families".into()));
        }
        Ok(FieldHandle {
            family: self.family.clone(),
            word: Word::bracket(self.word.clone(), other.word.clone()),
        })
    }

    fn expand_word(&self, word: &Word, vars: &[Jet]) -> JetField {
        match word {
            Word::Leaf(i) => self.family.generator_jet(*i, vars),
            Word::Bracket(a, b) => jet::bracket(&self.expand_word(a, vars), &self.expand_word(b, vars)),
        }
    }
}

impl JetExpand for FieldHandle {
    fn dim(&self) -> usize {
        self.family.state_dim()
    }

    fn expand(&self, x: &[f64], order: usize) -> JetField {
        let vars = coordinate_jets(x, order + self.word.len() - 1);
        self.expand_word(&self.word, &vars)
    }
}

impl VectorField for FieldHandle {
    fn dim(&self) -> usize {
        self.family.state_dim()
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        match self.word {
            Word::Leaf(i) => {
                let mut v = vec![0.0; x.len()];
                self.family.generator_value(i, x, &mut v);
                v
            }
            _ => jet::field_value(&self.expand(x, 0)),
        }
    }

    fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        match self.word {
            Word::Leaf(i) => {
                let mut j = vec![0.0; x.len() * x.len()];
                self.family.generator_jacobian(i, x, &mut j);
                j
            }
            _ => jet::field_jacobian(&self.expand(x, 1)),
        }
    }
}

/// `[X, Y](x) = DY(x)·X(x) − DX(x)·Y(x)` from values and Jacobians.
pub fn lie_bracket(a: &dyn VectorField, b: &dyn VectorField, x: &Point) -> Result<TangentVector> {
    let n = x.coords().len();
    if a.dim() != n || b.dim() != n {
        return Err(Error::Dimension(format!(
            "fields of dimension {} and {} at a point with {n} coordinates",
            a.dim(),
            b.dim()
        )));
    }
    let (va, vb) = (a.value(x.coords()), b.value(x.coords()));
    let (ja, jb) = (a.jacobian(x.coords()), b.jacobian(x.coords()));
    let out = (0..n)
        .map(|i| (0..n).map(|j| jb[i * n + j] * va[j] - ja[i * n + j] * vb[j]).sum())
        .collect();
    TangentVector::new(x.clone(), out)
}

// ---------------------------------------------------------------------------
// Seminorms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeminormReport {
    pub value: f64,
    /// Number of grid points; the value is a lower bound of the true sup.
    pub grid_points: usize,
}

/// Grid estimate of `‖X‖_{r,K}` as `sup|X| + [r = 1] sup max_ij |∂_j X_i|`.
pub fn seminorm(field: &dyn VectorField, k: &CompactBox, r: u32) -> Result<SeminormReport> {
    if r > 1 {
        return Err(Error::Invalid(format!("derivative order {r} not supported (0 or 1)")));
    }
    if k.is_empty() {
        return Err(Error::Invalid("empty sample grid".into()));
    }
    if k.manifold.ambient_dim() != field.dim() {
        return Err(Error::Dimension("box and field live on different spaces".into()));
    }
    let mut sup0 = 0.0f64;
    let mut sup1 = 0.0f64;
    for x in k.points() {
        sup0 = sup0.max(crate::geometry::norm(&field.value(&x)));
        if r == 1 {
            sup1 = sup1.max(field.jacobian(&x).iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    Ok(SeminormReport {
        value: sup0 + sup1,
        grid_points: k.len(),
    })
}

// ---------------------------------------------------------------------------
// Evaluation-map rank
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf(usize),
    Pair(usize, usize),
}

/// All bracket trees with at most `depth` leaves, excluding `[w, w]`.
/// Returned as an arena in which children precede parents.
fn enumerate_words(r: usize, depth: usize) -> (Vec<Node>, Vec<usize>) {
    let mut nodes: Vec<Node> = (0..r).map(Node::Leaf).collect();
    let mut lens = vec![1usize; r];
    let mut by_len: Vec<Vec<usize>> = vec![Vec::new(), (0..r).collect()];
    for len in 2..=depth {
        let mut cur = Vec::new();
        for a in 1..len {
            for &i in &by_len[a] {
                for &j in &by_len[len - a] {
                    if i == j {
                        continue;
                    }
                    cur.push(nodes.len());
                    nodes.push(Node::Pair(i, j));
                    lens.push(len);
                }
            }
        }
        by_len.push(cur);
    }
    (nodes, lens)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    /// `N · dim ℳ`.
    pub full_rank: usize,
    pub depth: usize,
    pub words: usize,
    pub singular_values: Vec<f64>,
    pub full: bool,
}

/// Rank of the evaluation map `Y ↦ (Y(x¹), …, Y(x^N))` on all bracket
/// words with at most `depth` leaves. Rows are normalized before the SVD;
/// the cutoff is `1e-8 σ_max`.
pub fn evaluation_rank(family: &ControlFamily, ensemble: &Ensemble, depth: usize, exec: ExecMode) -> Result<RankReport> {
    if depth == 0 {
        return Err(Error::Invalid("bracket depth must be at least 1".into()));
    }
    if ensemble.manifold() != family.manifold() {
        return Err(Error::Dimension("ensemble and family live on different manifolds".into()));
    }
    let n = family.state_dim();
    let members = ensemble.len();
    let (nodes, _lens) = enumerate_words(family.controls(), depth);
    let order = depth - 1;

    let columns: Vec<Vec<Vec<f64>>> = exec::map_indexed(exec, members, |k| {
        let x = ensemble.point(k);
        let space = JetSpace::new(n, order);
        let vars: Vec<Jet> = x.iter().enumerate().map(|(i, &xi)| Jet::variable(&space, i, xi)).collect();
        let mut cache: Vec<JetField> = Vec::with_capacity(nodes.len());
        for node in &nodes {
            let f = match *node {
                Node::Leaf(i) => family.generator_jet(i, &vars),
                Node::Pair(a, b) => jet::bracket(&cache[a], &cache[b]),
            };
            cache.push(f);
        }
        cache.iter().map(jet::field_value).collect()
    });

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for w in 0..nodes.len() {
        let row: Vec<f64> = (0..members).flat_map(|k| columns[k][w].iter().copied()).collect();
        let nrm = crate::geometry::norm(&row);
        if nrm > 0.0 && nrm.is_finite() {
            rows.push(row.iter().map(|v| v / nrm).collect());
        }
    }
    let full_rank = members * family.manifold().dim();
    let cols = members * n;
    let singular_values = if rows.is_empty() {
        Vec::new()
    } else {
        let m = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    };
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values.iter().filter(|&&s| s > tol::RANK_RELATIVE * smax).count();
    Ok(RankReport {
        rank,
        full_rank,
        depth,
        words: nodes.len(),
        singular_values,
        full: rank >= full_rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn family_ids_round_trip() {
        for id in ["gh:2", "torus:1", "torus:3", "sphere:symp", "sphere:full", "product-gh:2,1"] {
            let f: ControlFamily = id.parse().unwrap();
            assert_eq!(f.to_string(), id);
        }
        for bad in ["gh", "gh:0", "torus:x", "sphere:half", "product-gh:2", "cube:3"] {
            assert!(bad.parse::<ControlFamily>().is_err(), "{bad}");
        }
    }

    #[test]
    fn generator_examples() {
        let gh: ControlFamily = "gh:2".parse().unwrap();
        let at = |c: Vec<f64>| Point::new(ManifoldSpec::Euclidean(2), c).unwrap();
        assert_eq!(gh.eval_generator(0, &at(vec![0.0, 0.0])).unwrap().components(), &[1.0, 0.0]);
        let v = gh.eval_generator(0, &at(vec![1.0, 1.0])).unwrap();
        assert!((v.components()[0] - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(v.components()[1], 0.0);

        let t1 = ControlFamily::Torus1;
        let p = Point::new(ManifoldSpec::Torus(1), vec![PI / 4.0]).unwrap();
        assert!((t1.eval_generator(2, &p).unwrap().components()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn generator_errors() {
        let gh: ControlFamily = "gh:2".parse().unwrap();
        let p = Point::new(ManifoldSpec::Euclidean(2), vec![0.0, 0.0]).unwrap();
        assert!(matches!(gh.eval_generator(4, &p), Err(Error::GeneratorIndex { .. })));
        let q = Point::new(ManifoldSpec::Torus(2), vec![0.0, 0.0]).unwrap();
        assert!(gh.eval_generator(0, &q).is_err());
    }

    #[test]
    fn bracket_antisymmetry_and_self() {
        let fam: ControlFamily = "gh:2".parse().unwrap();
        let x = Point::new(ManifoldSpec::Euclidean(2), vec![0.3, -0.8]).unwrap();
        let f = fam.generator(0).unwrap();
        let g = fam.generator(3).unwrap();
        let zero = lie_bracket(&f, &f, &x).unwrap();
        assert!(zero.components().iter().all(|v| *v == 0.0));
        let a = lie_bracket(&f, &g, &x).unwrap();
        let b = lie_bracket(&g, &f, &x).unwrap();
        for (p, q) in a.components().iter().zip(b.components()) {
            assert_eq!(*p, -*q);
        }
    }

    #[test]
    fn gh1_bracket_is_negated_hermite_weight() {
        let fam = ControlFamily::Gh { d: 1 };
        let x = Point::new(ManifoldSpec::Euclidean(1), vec![1.0]).unwrap();
        let v = lie_bracket(&fam.generator(1).unwrap(), &fam.generator(0).unwrap(), &x).unwrap();
        assert!((v.components()[0] + (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let a = ControlFamily::Gh { d: 2 }.generator(0).unwrap();
        let b = ControlFamily::Gh { d: 3 }.generator(0).unwrap();
        let x = Point::new(ManifoldSpec::Euclidean(2), vec![0.0, 0.0]).unwrap();
        assert!(lie_bracket(&a, &b, &x).is_err());
        assert!(Bracket::new(&a, &b).is_err());
    }

    #[test]
    fn word_enumeration_counts() {
        let (nodes, lens) = enumerate_words(3, 2);
        assert_eq!(nodes.len(), 3 + 6);
        assert_eq!(lens.iter().filter(|&&l| l == 2).count(), 6);
        let (nodes, _) = enumerate_words(2, 3);
        // len 2: 2 ; len 3: 2*2 + 2*2
        assert_eq!(nodes.len(), 2 + 2 + 8);
    }

    #[test]
    fn seminorm_examples() {
        let fam = ControlFamily::Gh { d: 1 };
        let k = CompactBox::cube(1, -3.0, 3.0, 601).unwrap();
        let s = seminorm(&fam.generator(0).unwrap(), &k, 0).unwrap();
        assert!((s.value - 1.0).abs() < 1e-15);
        assert!(seminorm(&fam.generator(0).unwrap(), &k, 2).is_err());
    }
}
