//! Orthonormal Legendre bases, Gauss quadrature rules and the element-local predictor matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;
/// Number of space-time basis functions at the largest order.
pub const MAX_SPACETIME: usize = MAX_ORDER * (MAX_ORDER + 1) / 2;

/// Legendre polynomial P_n and its derivative at `x` (standard normalization, P_n(1) = 1).
pub fn legendre_p(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut d_prev, mut d) = (0.0, 1.0);
    for m in 1..n {
        let mf = m as f64;
        let p_next = ((2.0 * mf + 1.0) * x * p - mf * p_prev) / (mf + 1.0);
        let d_next = d_prev + (2.0 * mf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// Orthonormal (w.r.t. the averaged inner product on [−1, 1]) Legendre function of degree `n`.
pub fn orthonormal_legendre(n: usize, x: f64) -> (f64, f64) {
    let s = ((2 * n + 1) as f64).sqrt();
    let (p, d) = legendre_p(n, x);
    (s * p, s * d)
}

/// Values and ξ-derivatives of the first `order` orthonormal Legendre functions.
pub fn legendre_eval(order: usize, xi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    Ok((0..order).map(|n| orthonormal_legendre(n, xi)).unzip())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    GaussLegendre,
    GaussRadauRight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Simple roots of `g` in (lo, hi), bracketed on a uniform scan and refined by bisection.
fn simple_roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, expected: usize) -> Vec<f64> {
    let scan = 200 * (expected + 1);
    let mut roots = Vec::with_capacity(expected);
    let mut a = lo;
    let mut ga = g(a);
    for i in 1..=scan {
        let b = lo + (hi - lo) * i as f64 / scan as f64;
        let gb = g(b);
        if ga == 0.0 {
            roots.push(a);
        } else if ga * gb < 0.0 {
            let (mut x0, mut x1, mut g0) = (a, b, ga);
            for _ in 0..200 {
                let mid = 0.5 * (x0 + x1);
                if mid <= x0 || mid >= x1 {
                    break;
                }
                let gm = g(mid);
                if gm == 0.0 {
                    x0 = mid;
                    x1 = mid;
                    break;
                }
                if gm * g0 < 0.0 {
                    x1 = mid;
                } else {
                    x0 = mid;
                    g0 = gm;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
        a = b;
        ga = gb;
    }
    assert_eq!(roots.len(), expected, "root bracketing failed");
    roots
}

/// `n`-point Gauss-Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut nodes = simple_roots(|x| legendre_p(n, x).0, -1.0, 1.0, n);
    for x in nodes.iter_mut() {
        // one Newton polish step
        let (p, d) = legendre_p(n, *x);
        *x -= p / d;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let d = legendre_p(n, x).1;
            2.0 / ((1.0 - x * x) * d * d)
        })
        .collect();
    QuadratureRule { kind: RuleKind::GaussLegendre, nodes, weights }
}

/// `n`-point Gauss-Radau rule whose last node is +1.
pub fn gauss_radau_right(n: usize) -> QuadratureRule {
    assert!(n >= 1, "quadrature needs at least one node");
    let nf = n as f64;
    let g = |x: f64| legendre_p(n - 1, x).0 - legendre_p(n, x).0;
    let mut nodes = if n == 1 { Vec::new() } else { simple_roots(g, -1.0, 1.0 - 1e-9, n - 1) };
    for x in nodes.iter_mut() {
        let d = legendre_p(n - 1, *x).1 - legendre_p(n, *x).1;
        *x -= g(*x) / d;
    }
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let p = legendre_p(n - 1, x).0;
            (1.0 + x) / (nf * nf * p * p)
        })
        .collect();
    nodes.push(1.0);
    weights.push(2.0 / (nf * nf));
    QuadratureRule { kind: RuleKind::GaussRadauRight, nodes, weights }
}

/// Index of the space-time basis function Φ_{l1}(τ)Φ_{l2}(ξ), all indices 1-based.
pub fn spacetime_index(order: usize, l1: usize, l2: usize) -> usize {
    order * (l1 - 1) - (l1 - 1) * (l1.saturating_sub(2)) / 2 + l2
}

/// Total-degree space-time Legendre basis of a given order.
#[derive(Debug, Clone)]
pub struct SpaceTimeBasis {
    pub order: usize,
    /// (time degree, space degree) of each basis function, 0-based, in index order.
    pub degrees: Vec<(usize, usize)>,
}

impl SpaceTimeBasis {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::UnsupportedOrder(order));
        }
        let mut degrees = Vec::new();
        for l1 in 1..=order {
            for l2 in 1..=(order + 1 - l1) {
                debug_assert_eq!(spacetime_index(order, l1, l2), degrees.len() + 1);
                degrees.push((l1 - 1, l2 - 1));
            }
        }
        Ok(SpaceTimeBasis { order, degrees })
    }

    pub fn n_coeff(&self) -> usize {
        self.degrees.len()
    }

    /// Values, τ-derivatives and ξ-derivatives of every basis function at (τ, ξ).
    pub fn eval(&self, tau: f64, xi: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut val = Vec::with_capacity(self.n_coeff());
        let mut dt = Vec::with_capacity(self.n_coeff());
        let mut dx = Vec::with_capacity(self.n_coeff());
        for &(a, b) in &self.degrees {
            let (pt, dpt) = orthonormal_legendre(a, tau);
            let (px, dpx) = orthonormal_legendre(b, xi);
            val.push(pt * px);
            dt.push(dpt * px);
            dx.push(pt * dpx);
        }
        (val, dt, dx)
    }
}

/// Element-local matrices shared by the predictor, corrector and collision step.
#[derive(Debug, Clone)]
pub struct PredictorMatrices {
    pub order: usize,
    /// Space-time "stiffness" of the predictor, M_P × M_P.
    pub l: DMatrix<f64>,
    /// Space-time modal → nodal at tensor Gauss nodes, M_O² × M_P (time-major node ordering).
    pub c1: DMatrix<f64>,
    /// Space-time nodal → modal, M_P × M_O².
    pub c2: DMatrix<f64>,
    /// Spatial modal → nodal, M_O × M_C.
    pub c3: DMatrix<f64>,
    /// Spatial nodal → modal, M_C × M_O.
    pub c4: DMatrix<f64>,
    /// Explicit Radau stages of the collision integral, M_C × M_P.
    pub r: DMatrix<f64>,
    /// Reciprocal of the Radau weight at τ = +1.
    pub r_weight: f64,
}

pub fn build_predictor_matrices(order: usize) -> Result<PredictorMatrices> {
    let st = SpaceTimeBasis::new(order)?;
    let mp = st.n_coeff();
    let gl = gauss_legendre(order);
    let exact = gauss_legendre(order + 1);

    let mut l = DMatrix::zeros(mp, mp);
    for (xa, wa) in exact.nodes.iter().zip(&exact.weights) {
        for (tb, wb) in exact.nodes.iter().zip(&exact.weights) {
            let (v, vt, _) = st.eval(*tb, *xa);
            for i in 0..mp {
                for j in 0..mp {
                    l[(i, j)] += 0.25 * wa * wb * v[i] * vt[j];
                }
            }
        }
        let (v, _, _) = st.eval(-1.0, *xa);
        for i in 0..mp {
            for j in 0..mp {
                l[(i, j)] += 0.25 * wa * v[i] * v[j];
            }
        }
    }

    let nodes = order * order;
    let mut c1 = DMatrix::zeros(nodes, mp);
    let mut c2 = DMatrix::zeros(mp, nodes);
    for b in 0..order {
        for a in 0..order {
            let n = b * order + a;
            let (v, _, _) = st.eval(gl.nodes[b], gl.nodes[a]);
            for j in 0..mp {
                c1[(n, j)] = v[j];
                c2[(j, n)] = 0.25 * gl.weights[a] * gl.weights[b] * v[j];
            }
        }
    }

    let mut c3 = DMatrix::zeros(order, order);
    let mut c4 = DMatrix::zeros(order, order);
    for a in 0..order {
        let (phi, _) = legendre_eval(order, gl.nodes[a])?;
        for k in 0..order {
            c3[(a, k)] = phi[k];
            c4[(k, a)] = 0.5 * gl.weights[a] * phi[k];
        }
    }

    let radau = gauss_radau_right(order);
    let mut r = DMatrix::zeros(order, mp);
    for a in 0..order {
        let (phi, _) = legendre_eval(order, gl.nodes[a])?;
        for s in 0..order - 1 {
            let (psi, _, _) = st.eval(radau.nodes[s], gl.nodes[a]);
            for k in 0..order {
                for j in 0..mp {
                    r[(k, j)] += 0.5 * gl.weights[a] * radau.weights[s] * phi[k] * psi[j];
                }
            }
        }
    }

    Ok(PredictorMatrices { order, l, c1, c2, c3, c4, r, r_weight: 1.0 / radau.weights[order - 1] })
}
