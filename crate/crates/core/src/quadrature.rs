//! Gauss rules used by the series projections.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss–Hermite rule for the weight `e^{-x²/2}` (probabilists' convention),
/// exact for polynomials of degree `2n − 1`.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n >= 1);
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let p0 = (2.0 * PI).powf(-0.25);
    // orthonormal p_k; returns (p_{n-1}, p_n) and Σ_{k<n} p_k²
    let eval = |x: f64| {
        let (mut prev, mut cur) = (0.0, p0);
        let mut sum = 0.0;
        for k in 0..n {
            sum += cur * cur;
            let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
            prev = cur;
            cur = next;
        }
        (prev, cur, sum)
    };
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (pm1, pn, _) = eval(*x);
            let dp = (n as f64).sqrt() * pm1;
            if dp != 0.0 {
                *x -= pn / dp;
            }
        }
        let (_, _, sum) = eval(*x);
        weights.push(1.0 / sum);
    }
    Rule { nodes, weights }
}

/// Gauss–Legendre rule on `[-1, 1]`, exact for degree `2n − 1`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    Rule { nodes, weights }
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub fn composite_legendre(a: f64, b: f64, panels: usize, per_panel: usize) -> Rule {
    let base = gauss_legendre(per_panel);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * per_panel);
    let mut weights = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(lo + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    Rule { nodes, weights }
}
