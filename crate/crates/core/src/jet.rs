//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients of a function around a base
//! point up to a total degree. Products and the elementary functions the
//! control families need (`exp`, `sin`, `cos`) are exact on jets, and a
//! partial derivative lowers the valid order by one. Nested Lie brackets are
//! evaluated this way: a bracket word with `m` leaves, built from generator
//! jets of order `K`, comes out as a jet of order `K - m + 1`.

use std::collections::HashMap;
use std::sync::Arc;

/// Monomial layout shared by all jets of a given `(nvars, order)`.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degree: Vec<usize>,
    unit: Vec<usize>,
    products: Vec<(u32, u32, u32)>,
    // per variable: (source monomial, target monomial, factor)
    derivs: Vec<Vec<(u32, u32, f64)>>,
}

impl JetSpace {
    pub fn new(nvars: usize, order: usize) -> Arc<Self> {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        for deg in 0..=order {
            let mut cur = vec![0u8; nvars];
            push_compositions(&mut exps, &mut cur, 0, deg);
        }
        let degree: Vec<usize> = exps.iter().map(|e| e.iter().map(|&a| a as usize).sum()).collect();
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();

        let mut unit = Vec::with_capacity(nvars);
        for v in 0..nvars {
            let mut e = vec![0u8; nvars];
            e[v] = 1;
            unit.push(index.get(&e).copied().unwrap_or(usize::MAX));
        }

        let mut products = Vec::new();
        for (i, ei) in exps.iter().enumerate() {
            for (j, ej) in exps.iter().enumerate() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let sum: Vec<u8> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
                products.push((i as u32, j as u32, index[&sum] as u32));
            }
        }

        let mut derivs = vec![Vec::new(); nvars];
        for (k, e) in exps.iter().enumerate() {
            for (v, dv) in derivs.iter_mut().enumerate() {
                if e[v] > 0 {
                    let mut t = e.clone();
                    t[v] -= 1;
                    dv.push((k as u32, index[&t] as u32, e[v] as f64));
                }
            }
        }

        Arc::new(Self {
            nvars,
            order,
            exps,
            degree,
            unit,
            products,
            derivs,
        })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self, k: usize) -> &[u8] {
        &self.exps[k]
    }
}

fn push_compositions(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, pos: usize, remaining: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        return;
    }
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for a in (0..=remaining).rev() {
        cur[pos] = a as u8;
        push_compositions(out, cur, pos + 1, remaining - a);
    }
    cur[pos] = 0;
}

#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coef: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Self {
        let mut coef = vec![0.0; space.len()];
        coef[0] = value;
        Self {
            space: space.clone(),
            order: space.order,
            coef,
        }
    }

    /// The coordinate function `x_v` expanded around `base`.
    pub fn variable(space: &Arc<JetSpace>, v: usize, base: f64) -> Self {
        let mut j = Self::constant(space, base);
        if space.order >= 1 {
            j.coef[space.unit[v]] = 1.0;
        }
        j
    }

    pub fn zero(space: &Arc<JetSpace>) -> Self {
        Self::constant(space, 0.0)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    /// Highest total degree whose coefficients are meaningful.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coef[0]
    }

    /// First partial derivative at the base point.
    pub fn partial(&self, v: usize) -> f64 {
        assert!(self.order >= 1, "jet of order 0 carries no derivatives");
        self.coef[self.space.unit[v]]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    fn truncated(mut self) -> Self {
        for (c, &d) in self.coef.iter_mut().zip(&self.space.degree) {
            if d > self.order {
                *c = 0.0;
            }
        }
        self
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let coef = self.coef.iter().zip(&other.coef).map(|(a, b)| a + b).collect();
        Jet {
            space: self.space.clone(),
            order: self.order.min(other.order),
            coef,
        }
        .truncated()
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let coef = self.coef.iter().zip(&other.coef).map(|(a, b)| a - b).collect();
        Jet {
            space: self.space.clone(),
            order: self.order.min(other.order),
            coef,
        }
        .truncated()
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coef: self.coef.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add_const(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.coef[0] += s;
        j
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let mut coef = vec![0.0; self.coef.len()];
        for &(i, j, k) in &self.space.products {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            if self.space.degree[k] <= order {
                coef[k] += self.coef[i] * other.coef[j];
            }
        }
        Jet {
            space: self.space.clone(),
            order,
            coef,
        }
    }

    /// Partial derivative in variable `v`; the valid order drops by one.
    pub fn derivative(&self, v: usize) -> Jet {
        let order = self.order.saturating_sub(1);
        let mut coef = vec![0.0; self.coef.len()];
        if self.order > 0 {
            for &(src, dst, f) in &self.space.derivs[v] {
                coef[dst as usize] += f * self.coef[src as usize];
            }
        }
        Jet {
            space: self.space.clone(),
            order,
            coef,
        }
        .truncated()
    }

    fn split(&self) -> (f64, Jet) {
        let mut h = self.clone();
        let a = h.coef[0];
        h.coef[0] = 0.0;
        (a, h)
    }

    // Σ_k weights[k] h^k for a nilpotent h, truncated at the jet order.
    fn series(h: &Jet, weights: impl Fn(usize) -> f64) -> Jet {
        let mut acc = Jet::constant(&h.space, weights(0));
        acc.order = h.order;
        let mut pow = Jet::constant(&h.space, 1.0);
        pow.order = h.order;
        for k in 1..=h.order {
            pow = pow.mul(h);
            let w = weights(k);
            if w != 0.0 {
                acc = acc.add(&pow.scale(w));
            }
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let (a, h) = self.split();
        Jet::series(&h, |k| 1.0 / factorial(k)).scale(a.exp())
    }

    pub fn sin(&self) -> Jet {
        let (a, h) = self.split();
        let c = Jet::series(&h, cos_weight);
        let s = Jet::series(&h, sin_weight);
        c.scale(a.sin()).add(&s.scale(a.cos()))
    }

    pub fn cos(&self) -> Jet {
        let (a, h) = self.split();
        let c = Jet::series(&h, cos_weight);
        let s = Jet::series(&h, sin_weight);
        c.scale(a.cos()).sub(&s.scale(a.sin()))
    }
}

fn cos_weight(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else if (k / 2).is_multiple_of(2) {
        1.0 / factorial(k)
    } else {
        -1.0 / factorial(k)
    }
}

fn sin_weight(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        0.0
    } else if (k / 2).is_multiple_of(2) {
        1.0 / factorial(k)
    } else {
        -1.0 / factorial(k)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// A vector field expanded to jets: one jet per ambient component.
pub type JetField = Vec<Jet>;

/// `[a, b] = Db·a − Da·b`, componentwise on jets.
pub fn bracket(a: &JetField, b: &JetField) -> JetField {
    let n = a.len();
    let space = a[0].space().clone();
    (0..n)
        .map(|i| {
            let mut acc = Jet::zero(&space);
            for j in 0..n {
                acc = acc
                    .add(&a[j].mul(&b[i].derivative(j)))
                    .sub(&b[j].mul(&a[i].derivative(j)));
            }
            acc
        })
        .collect()
}

/// Values of a jet field at the base point.
pub fn field_value(f: &JetField) -> Vec<f64> {
    f.iter().map(Jet::value).collect()
}

/// Row-major Jacobian `J[i][j] = ∂_j f_i` at the base point.
pub fn field_jacobian(f: &JetField) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = f[i].partial(j);
        }
    }
    out
}
