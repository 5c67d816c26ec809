//! Lax-Wendroff discontinuous Galerkin solver: a local space-time prediction in primitive
//! variables by Picard iteration, followed by a conservative correction with time-averaged
//! Rusanov interface fluxes.

use nalgebra::DMatrix;

use crate::basis_quadrature::{
    build_predictor_matrices, gauss_legendre, orthonormal_legendre, SpaceTimeBasis, MAX_ORDER, MAX_SPACETIME,
};
use crate::bgk::{self, BgkStepMatrices};
use crate::error::{Error, Functional, Result};
use crate::hyqmom_closure::{flux_from_primitive, max_wave_speed_raw, primitive_jacobian_apply};
use crate::kinetic_state::{moments_from_primitive, pressure_of, primitive_from_moments, PrimitiveState};
use crate::limiters::{
    limit_correction, limit_mean_fluxes, limit_oscillations, limit_prediction, ElementFaces, LimiterConfig,
    PositivityPoints,
};

pub type Vec5 = [f64; 5];
/// Spatial Legendre coefficients of the conserved moments of one element, one row per mode.
pub type Coeffs = [Vec5; MAX_ORDER];
/// Space-time Legendre coefficients of the primitive fields of one element.
pub type StCoeffs = [Vec5; MAX_SPACETIME];

pub const NQ_MAX: usize = MAX_ORDER * MAX_ORDER;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Extrapolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub n_elem: usize,
    pub x_low: f64,
    pub x_high: f64,
    pub dx: f64,
    pub boundary: Boundary,
}

impl Mesh {
    pub fn new(n_elem: usize, x_low: f64, x_high: f64, boundary: Boundary) -> Result<Self> {
        if n_elem == 0 {
            return Err(Error::Config("mesh needs at least one element".into()));
        }
        let dx = (x_high - x_low) / n_elem as f64;
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::Config(format!("invalid domain [{x_low}, {x_high}]")));
        }
        Ok(Mesh { n_elem, x_low, x_high, dx, boundary })
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_low + (i as f64 + 0.5) * self.dx
    }

    pub fn n_faces(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n_elem,
            Boundary::Extrapolation => self.n_elem + 1,
        }
    }

    pub fn faces(&self, i: usize) -> ElementFaces {
        match self.boundary {
            Boundary::Periodic => ElementFaces { left: i, right: (i + 1) % self.n_elem },
            Boundary::Extrapolation => ElementFaces { left: i, right: i + 1 },
        }
    }

    /// Elements on the left and right of face `f`. Boundary faces see a copy of the boundary element.
    pub fn face_elements(&self, f: usize) -> (usize, usize) {
        let n = self.n_elem;
        match self.boundary {
            Boundary::Periodic => ((f + n - 1) % n, f),
            Boundary::Extrapolation => (f.saturating_sub(1), f.min(n - 1)),
        }
    }

    /// Left neighbor, self, right neighbor.
    pub fn neighborhood(&self, i: usize) -> [usize; 3] {
        let n = self.n_elem;
        match self.boundary {
            Boundary::Periodic => [(i + n - 1) % n, i, (i + 1) % n],
            Boundary::Extrapolation => [i.saturating_sub(1), i, (i + 1).min(n - 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementSolution {
    pub order: usize,
    pub coeffs: Vec<Coeffs>,
    pub time: f64,
}

impl ElementSolution {
    /// Conserved state of element `i` at reference coordinate ξ.
    pub fn eval(&self, i: usize, xi: f64) -> Vec5 {
        let mut out = [0.0; 5];
        for k in 0..self.order {
            let phi = orthonormal_legendre(k, xi).0;
            for m in 0..5 {
                out[m] += phi * self.coeffs[i][k][m];
            }
        }
        out
    }

    pub fn means(&self) -> Vec<Vec5> {
        self.coeffs.iter().map(|c| c[0]).collect()
    }

    /// Sum of element means of each conserved variable.
    pub fn totals(&self) -> Vec5 {
        let mut t = [0.0; 5];
        for c in &self.coeffs {
            for m in 0..5 {
                t[m] += c[0][m];
            }
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct SpaceTimePrediction {
    pub order: usize,
    pub coeffs: Vec<StCoeffs>,
}

/// CFL numbers by order.
pub fn default_cfl(order: usize) -> f64 {
    match order {
        1 => 0.90,
        2 => 0.30,
        3 => 0.14,
        _ => 0.09,
    }
}

/// Which states bound the wave speed in the interface Rusanov flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceSpeed {
    /// The two trace states.
    Traces,
    /// The two trace states and their arithmetic mean.
    TracesAndMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub order: usize,
    pub cfl: f64,
    pub limiters: LimiterConfig,
    pub interface_speed: InterfaceSpeed,
    /// Knudsen number of the BGK collision term; `None` is collisionless.
    pub knudsen: Option<f64>,
}

impl SolverConfig {
    pub fn new(order: usize) -> Self {
        SolverConfig {
            order,
            cfl: default_cfl(order),
            limiters: LimiterConfig::all_on(),
            interface_speed: InterfaceSpeed::Traces,
            knudsen: None,
        }
    }

    pub fn with_limiters(mut self, limiters: LimiterConfig) -> Self {
        self.limiters = limiters;
        self
    }

    pub fn with_knudsen(mut self, eps: f64) -> Self {
        self.knudsen = Some(eps);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(Error::UnsupportedOrder(self.order));
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(Error::Config(format!("cfl must be positive, got {}", self.cfl)));
        }
        if let Some(eps) = self.knudsen {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::Config(format!("Knudsen number must be positive, got {eps}")));
            }
        }
        self.limiters.validate()
    }
}

/// A space-time source added to the conserved equations, q_t + f(q)_x = s(t, x).
pub trait SourceTerm: Send + Sync {
    fn conserved(&self, t: f64, x: f64) -> Vec5;
    /// The same source expressed for the primitive system.
    fn primitive(&self, t: f64, x: f64) -> Vec5;
}

/// Element-local operators for one order, precomputed once.
#[derive(Debug, Clone)]
pub struct DgOperators {
    pub order: usize,
    pub n_st: usize,
    pub gl_nodes: Vec<f64>,
    pub gl_weights: Vec<f64>,
    /// Φ_k at the spatial Gauss nodes, and its derivative.
    pub(crate) phi_gl: [[f64; MAX_ORDER]; MAX_ORDER],
    pub(crate) dphi_gl: [[f64; MAX_ORDER]; MAX_ORDER],
    pub(crate) phi_left: [f64; MAX_ORDER],
    pub(crate) phi_right: [f64; MAX_ORDER],
    /// Ψ and Ψ_ξ at tensor nodes, node n = b·order + a (time b, space a).
    pub(crate) psi_nodes: [[f64; MAX_SPACETIME]; NQ_MAX],
    pub(crate) dpsi_nodes: [[f64; MAX_SPACETIME]; NQ_MAX],
    /// Tensor quadrature weight of node n, ω_a ω_b.
    pub(crate) node_weight: [f64; NQ_MAX],
    /// Ψ(τ_b, −1) and Ψ(τ_b, +1).
    pub(crate) trace_left: [[f64; MAX_SPACETIME]; MAX_ORDER],
    pub(crate) trace_right: [[f64; MAX_SPACETIME]; MAX_ORDER],
    pub(crate) l_inv: [[f64; MAX_SPACETIME]; MAX_SPACETIME],
    pub(crate) c2: [[f64; NQ_MAX]; MAX_SPACETIME],
    /// (1/4)∫Ψ(−1, ξ)Φ(ξ)ᵀ dξ.
    pub(crate) g_init: [[f64; MAX_ORDER]; MAX_SPACETIME],
    pub(crate) radau: [[f64; MAX_SPACETIME]; MAX_ORDER],
    pub(crate) radau_scale: f64,
    pub(crate) l_matrix: DMatrix<f64>,
    pub(crate) check_phi: Vec<[f64; MAX_ORDER]>,
    pub(crate) check_psi: Vec<[f64; MAX_SPACETIME]>,
}

impl DgOperators {
    pub fn new(order: usize) -> Result<Self> {
        let mats = build_predictor_matrices(order)?;
        let st = SpaceTimeBasis::new(order)?;
        let n_st = st.n_coeff();
        let gl = gauss_legendre(order);
        let mut ops = DgOperators {
            order,
            n_st,
            gl_nodes: gl.nodes.clone(),
            gl_weights: gl.weights.clone(),
            phi_gl: [[0.0; MAX_ORDER]; MAX_ORDER],
            dphi_gl: [[0.0; MAX_ORDER]; MAX_ORDER],
            phi_left: [0.0; MAX_ORDER],
            phi_right: [0.0; MAX_ORDER],
            psi_nodes: [[0.0; MAX_SPACETIME]; NQ_MAX],
            dpsi_nodes: [[0.0; MAX_SPACETIME]; NQ_MAX],
            node_weight: [0.0; NQ_MAX],
            trace_left: [[0.0; MAX_SPACETIME]; MAX_ORDER],
            trace_right: [[0.0; MAX_SPACETIME]; MAX_ORDER],
            l_inv: [[0.0; MAX_SPACETIME]; MAX_SPACETIME],
            c2: [[0.0; NQ_MAX]; MAX_SPACETIME],
            g_init: [[0.0; MAX_ORDER]; MAX_SPACETIME],
            radau: [[0.0; MAX_SPACETIME]; MAX_ORDER],
            radau_scale: mats.r_weight,
            l_matrix: mats.l.clone(),
            check_phi: Vec::new(),
            check_psi: Vec::new(),
        };
        for a in 0..order {
            for k in 0..order {
                let (v, d) = orthonormal_legendre(k, gl.nodes[a]);
                ops.phi_gl[a][k] = v;
                ops.dphi_gl[a][k] = d;
            }
        }
        for k in 0..order {
            ops.phi_left[k] = orthonormal_legendre(k, -1.0).0;
            ops.phi_right[k] = orthonormal_legendre(k, 1.0).0;
        }
        for b in 0..order {
            for a in 0..order {
                let n = b * order + a;
                let (v, _, dx) = st.eval(gl.nodes[b], gl.nodes[a]);
                ops.psi_nodes[n][..n_st].copy_from_slice(&v);
                ops.dpsi_nodes[n][..n_st].copy_from_slice(&dx);
                ops.node_weight[n] = gl.weights[a] * gl.weights[b];
            }
            ops.trace_left[b][..n_st].copy_from_slice(&st.eval(gl.nodes[b], -1.0).0);
            ops.trace_right[b][..n_st].copy_from_slice(&st.eval(gl.nodes[b], 1.0).0);
        }
        let l_inv =
            mats.l.clone().try_inverse().ok_or_else(|| Error::IllConditioned("predictor matrix is singular".into()))?;
        for i in 0..n_st {
            for j in 0..n_st {
                ops.l_inv[i][j] = l_inv[(i, j)];
            }
            for n in 0..order * order {
                ops.c2[i][n] = mats.c2[(i, n)];
            }
        }
        for b in 0..order {
            let psi = st.eval(-1.0, gl.nodes[b]).0;
            for l in 0..n_st {
                for k in 0..order {
                    ops.g_init[l][k] += 0.25 * gl.weights[b] * psi[l] * ops.phi_gl[b][k];
                }
            }
        }
        for k in 0..order {
            for l in 0..n_st {
                ops.radau[k][l] = mats.r[(k, l)];
            }
        }
        let pts = PositivityPoints::new(order);
        ops.check_phi = pts
            .space_points
            .iter()
            .map(|&x| {
                let mut row = [0.0; MAX_ORDER];
                for (k, v) in row.iter_mut().enumerate().take(order) {
                    *v = orthonormal_legendre(k, x).0;
                }
                row
            })
            .collect();
        ops.check_psi = pts
            .spacetime_points
            .iter()
            .map(|&(tau, xi)| {
                let mut row = [0.0; MAX_SPACETIME];
                row[..n_st].copy_from_slice(&st.eval(tau, xi).0);
                row
            })
            .collect();
        Ok(ops)
    }

    #[inline]
    pub(crate) fn spatial_at(&self, q: &Coeffs, phi: &[f64; MAX_ORDER]) -> Vec5 {
        let mut out = [0.0; 5];
        for k in 0..self.order {
            for m in 0..5 {
                out[m] += phi[k] * q[k][m];
            }
        }
        out
    }

    #[inline]
    pub(crate) fn spacetime_at(&self, w: &StCoeffs, psi: &[f64; MAX_SPACETIME]) -> Vec5 {
        let mut out = [0.0; 5];
        for l in 0..self.n_st {
            for m in 0..5 {
                out[m] += psi[l] * w[l][m];
            }
        }
        out
    }
}

/// Limiter activity during one step: how many elements or faces each limiter changed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub prediction_limited: usize,
    pub mean_flux_limited: usize,
    pub points_limited: usize,
    pub oscillation_limited: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub prediction_limited: usize,
    pub mean_flux_limited: usize,
    pub points_limited: usize,
    pub oscillation_limited: usize,
    /// Smallest density, pressure and kurtosis seen at any check point after any step.
    pub min_functionals: [f64; 3],
}

impl RunSummary {
    fn absorb(&mut self, r: &StepReport, minima: [f64; 3]) {
        self.steps += 1;
        self.prediction_limited += r.prediction_limited;
        self.mean_flux_limited += r.mean_flux_limited;
        self.points_limited += r.points_limited;
        self.oscillation_limited += r.oscillation_limited;
        for j in 0..3 {
            self.min_functionals[j] = self.min_functionals[j].min(minima[j]);
        }
    }
}

/// Per-element trace data used by the interface fluxes.
#[derive(Clone, Copy)]
struct Traces {
    q: [Vec5; MAX_ORDER],
    f: [Vec5; MAX_ORDER],
    speed: [f64; MAX_ORDER],
}

impl Traces {
    fn new(ops: &DgOperators, w: &StCoeffs, basis: &[[f64; MAX_SPACETIME]; MAX_ORDER]) -> Self {
        let mut t = Traces { q: [[0.0; 5]; MAX_ORDER], f: [[0.0; 5]; MAX_ORDER], speed: [0.0; MAX_ORDER] };
        for b in 0..ops.order {
            let a = ops.spacetime_at(w, &basis[b]);
            t.q[b] = moments_from_primitive(&a);
            t.f[b] = flux_from_primitive(&a);
            t.speed[b] = max_wave_speed_raw(&a);
        }
        t
    }
}

pub struct DgSolver {
    pub mesh: Mesh,
    pub config: SolverConfig,
    pub ops: DgOperators,
    source: Option<Box<dyn SourceTerm>>,
}

impl std::fmt::Debug for DgSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DgSolver")
            .field("mesh", &self.mesh)
            .field("config", &self.config)
            .field("source", &self.source.is_some())
            .finish()
    }
}

/// Rusanov flux between two conserved states with a given speed bound.
#[inline]
pub fn rusanov_flux(ql: &Vec5, qr: &Vec5, fl: &Vec5, fr: &Vec5, lambda: f64) -> Vec5 {
    let mut out = [0.0; 5];
    for m in 0..5 {
        out[m] = 0.5 * (fl[m] + fr[m]) - 0.5 * lambda * (qr[m] - ql[m]);
    }
    out
}

/// Speed bound of the positivity-preserving first-order flux: left, right and mean states.
#[inline]
pub fn three_state_speed(ql: &Vec5, qr: &Vec5) -> f64 {
    let mut mid = [0.0; 5];
    for m in 0..5 {
        mid[m] = 0.5 * (ql[m] + qr[m]);
    }
    let s = |q: &Vec5| max_wave_speed_raw(&primitive_from_moments(q));
    s(ql).max(s(qr)).max(s(&mid))
}

impl DgSolver {
    pub fn new(mesh: Mesh, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let ops = DgOperators::new(config.order)?;
        Ok(DgSolver { mesh, config, ops, source: None })
    }

    pub fn with_source(mut self, source: Box<dyn SourceTerm>) -> Self {
        self.source = Some(source);
        self
    }

    /// L2 projection of pointwise primitive data, with elements split at `breaks`.
    pub fn project_initial_condition(
        &self,
        init: impl Fn(f64) -> PrimitiveState,
        breaks: &[f64],
    ) -> Result<ElementSolution> {
        let order = self.config.order;
        let rule = gauss_legendre(order + 2);
        let dx = self.mesh.dx;
        let mut coeffs = vec![[[0.0; 5]; MAX_ORDER]; self.mesh.n_elem];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let xc = self.mesh.center(i);
            let (lo, hi) = (xc - 0.5 * dx, xc + 0.5 * dx);
            let mut cuts = vec![-1.0];
            for &x in breaks {
                if x > lo && x < hi {
                    cuts.push((x - xc) / (0.5 * dx));
                }
            }
            cuts.push(1.0);
            for seg in cuts.windows(2) {
                let (s0, s1) = (seg[0], seg[1]);
                let half = 0.5 * (s1 - s0);
                for (mu, wt) in rule.nodes.iter().zip(&rule.weights) {
                    let xi = 0.5 * (s0 + s1) + half * mu;
                    let alpha = init(xc + 0.5 * dx * xi);
                    alpha.check_realizable(0.0).map_err(|e| e.at_element(i, 0.0))?;
                    let q = moments_from_primitive(&alpha.to_array());
                    for k in 0..order {
                        let phi = orthonormal_legendre(k, xi).0;
                        for m in 0..5 {
                            c[k][m] += 0.5 * wt * half * phi * q[m];
                        }
                    }
                }
            }
        }
        let mut sol = ElementSolution { order, coeffs, time: 0.0 };
        if self.config.limiters.points {
            for (i, c) in sol.coeffs.iter_mut().enumerate() {
                limit_correction(&mut c[..order], &self.ops.check_phi, self.config.limiters.pos_floor)
                    .map_err(|e| e.at_element(i, 0.0))?;
            }
        }
        Ok(sol)
    }

    /// Δt from the CFL number and the largest wave speed over element means.
    pub fn stable_dt(&self, sol: &ElementSolution) -> Result<f64> {
        let mut lam = 0.0_f64;
        for (i, c) in sol.coeffs.iter().enumerate() {
            let a = primitive_from_moments(&c[0]);
            let s = max_wave_speed_raw(&a);
            if !s.is_finite() || !(a[0] > 0.0) || !(a[2] > 0.0) {
                return Err(
                    Error::InvalidState(format!("element mean {:?} has no wave speed", c[0])).at_element(i, sol.time)
                );
            }
            lam = lam.max(s);
        }
        if !(lam > 0.0) {
            return Err(Error::Degenerate("zero maximum wave speed"));
        }
        Ok(self.config.cfl * self.mesh.dx / lam)
    }

    /// Primitive coefficients of the element data, projected from the spatial Gauss nodes.
    fn primitive_projection(&self, q: &Coeffs) -> Coeffs {
        let ops = &self.ops;
        let mut out = [[0.0; 5]; MAX_ORDER];
        for a in 0..ops.order {
            let alpha = primitive_from_moments(&ops.spatial_at(q, &ops.phi_gl[a]));
            for k in 0..ops.order {
                let s = 0.5 * ops.gl_weights[a] * ops.phi_gl[a][k];
                for m in 0..5 {
                    out[k][m] += s * alpha[m];
                }
            }
        }
        out
    }

    /// Space-time prediction of one element. Returns the coefficients and whether Limiter I acted.
    pub fn predict_element(
        &self,
        q: &Coeffs,
        t: f64,
        xc: f64,
        dt: f64,
        bgk_mats: Option<&BgkStepMatrices>,
    ) -> Result<(StCoeffs, bool)> {
        let ops = &self.ops;
        let (order, n_st) = (ops.order, ops.n_st);
        let dx = self.mesh.dx;
        let a_coef = self.primitive_projection(q);
        let mut w: StCoeffs = [[0.0; 5]; MAX_SPACETIME];
        w[..order].copy_from_slice(&a_coef[..order]);

        // contribution of the initial data, G·A
        let mut init = [[0.0; 5]; MAX_SPACETIME];
        for l in 0..n_st {
            for k in 0..order {
                for m in 0..5 {
                    init[l][m] += ops.g_init[l][k] * a_coef[k][m];
                }
            }
        }

        let mut limited = false;
        let n_nodes = order * order;
        for _ in 1..order {
            let mut theta = [[0.0; 5]; NQ_MAX];
            for n in 0..n_nodes {
                let alpha = ops.spacetime_at(&w, &ops.psi_nodes[n]);
                let alpha_xi = ops.spacetime_at(&w, &ops.dpsi_nodes[n]);
                let b = primitive_jacobian_apply(&alpha, &alpha_xi);
                for m in 0..5 {
                    theta[n][m] = -dt / dx * b[m];
                }
                if let Some(src) = &self.source {
                    let (tb, xa) = (ops.gl_nodes[n / order], ops.gl_nodes[n % order]);
                    let s = src.primitive(t + 0.5 * dt * (1.0 + tb), xc + 0.5 * dx * xa);
                    for m in 0..5 {
                        theta[n][m] += 0.5 * dt * s[m];
                    }
                }
            }
            // right side C²Θ + G·A
            let mut rhs = init;
            for l in 0..n_st {
                for n in 0..n_nodes {
                    for m in 0..5 {
                        rhs[l][m] += ops.c2[l][n] * theta[n][m];
                    }
                }
            }
            let mut next: StCoeffs = [[0.0; 5]; MAX_SPACETIME];
            let relaxed = if bgk_mats.is_some() { 3 } else { 5 };
            for l in 0..n_st {
                for j in 0..n_st {
                    for m in 0..relaxed {
                        next[l][m] += ops.l_inv[l][j] * rhs[j][m];
                    }
                }
            }
            if let Some(mats) = bgk_mats {
                mats.relax_prediction(ops, &rhs, &mut next);
            }
            w = next;
            if self.config.limiters.prediction {
                let theta = limit_prediction(&mut w[..n_st], &ops.check_psi, self.config.limiters.pos_floor)?;
                limited |= theta < 1.0;
            }
        }
        Ok((w, limited))
    }

    /// Time-averaged Rusanov flux at one interface from the two neighboring trace sets.
    fn face_flux(&self, left: &Traces, right: &Traces) -> Vec5 {
        let ops = &self.ops;
        let mut out = [0.0; 5];
        for b in 0..ops.order {
            let lam = match self.config.interface_speed {
                InterfaceSpeed::Traces => left.speed[b].max(right.speed[b]),
                InterfaceSpeed::TracesAndMean => three_state_speed(&left.q[b], &right.q[b]),
            };
            let f = rusanov_flux(&left.q[b], &right.q[b], &left.f[b], &right.f[b], lam);
            for m in 0..5 {
                out[m] += 0.5 * ops.gl_weights[b] * f[m];
            }
        }
        out
    }

    /// Interface flux from two predictions, `w_left` on the left of the face.
    pub fn interface_flux(&self, w_left: &StCoeffs, w_right: &StCoeffs) -> Vec5 {
        let l = Traces::new(&self.ops, w_left, &self.ops.trace_right);
        let r = Traces::new(&self.ops, w_right, &self.ops.trace_left);
        self.face_flux(&l, &r)
    }

    /// High-order update of one element from its prediction and its two interface fluxes.
    pub fn correct_element(
        &self,
        q: &Coeffs,
        w: &StCoeffs,
        flux_left: &Vec5,
        flux_right: &Vec5,
        t: f64,
        xc: f64,
        dt: f64,
    ) -> Coeffs {
        let ops = &self.ops;
        let order = ops.order;
        let dx = self.mesh.dx;
        let mut out = *q;
        for n in 0..order * order {
            let a = n % order;
            let alpha = ops.spacetime_at(w, &ops.psi_nodes[n]);
            let f = flux_from_primitive(&alpha);
            let s = 0.5 * dt / dx * ops.node_weight[n];
            for k in 1..order {
                let c = s * ops.dphi_gl[a][k];
                for m in 0..5 {
                    out[k][m] += c * f[m];
                }
            }
            if let Some(src) = &self.source {
                let b = n / order;
                let sq = src.conserved(t + 0.5 * dt * (1.0 + ops.gl_nodes[b]), xc + 0.5 * dx * ops.gl_nodes[a]);
                for k in 0..order {
                    let c = 0.25 * dt * ops.node_weight[n] * ops.phi_gl[a][k];
                    for m in 0..5 {
                        out[k][m] += c * sq[m];
                    }
                }
            }
        }
        for k in 0..order {
            for m in 0..5 {
                out[k][m] -= dt / dx * (ops.phi_right[k] * flux_right[m] - ops.phi_left[k] * flux_left[m]);
            }
        }
        out
    }

    /// Advances the solution by one step of size `dt`.
    pub fn step(&self, sol: &mut ElementSolution, dt: f64) -> Result<StepReport> {
        let ops = &self.ops;
        let order = ops.order;
        let n = self.mesh.n_elem;
        let dx = self.mesh.dx;
        let t = sol.time;
        let lim = self.config.limiters;
        let mut report = StepReport { dt, ..StepReport::default() };
        let bgk_mats = match self.config.knudsen {
            Some(eps) => Some(BgkStepMatrices::new(ops, eps, dt)?),
            None => None,
        };

        let mut preds: Vec<StCoeffs> = Vec::with_capacity(n);
        for i in 0..n {
            let (w, limited) = self
                .predict_element(&sol.coeffs[i], t, self.mesh.center(i), dt, bgk_mats.as_ref())
                .map_err(|e| e.at_element(i, t))?;
            report.prediction_limited += usize::from(limited);
            preds.push(w);
        }

        let left_traces: Vec<Traces> = preds.iter().map(|w| Traces::new(ops, w, &ops.trace_left)).collect();
        let right_traces: Vec<Traces> = preds.iter().map(|w| Traces::new(ops, w, &ops.trace_right)).collect();
        let n_faces = self.mesh.n_faces();
        let fluxes: Vec<Vec5> = (0..n_faces)
            .map(|f| {
                let (il, ir) = self.mesh.face_elements(f);
                self.face_flux(&right_traces[il], &left_traces[ir])
            })
            .collect();

        let old = sol.coeffs.clone();
        for i in 0..n {
            let faces = self.mesh.faces(i);
            sol.coeffs[i] = self.correct_element(
                &old[i],
                &preds[i],
                &fluxes[faces.left],
                &fluxes[faces.right],
                t,
                self.mesh.center(i),
                dt,
            );
        }

        if lim.mean_flux {
            let means: Vec<Vec5> = old.iter().map(|c| c[0]).collect();
            let rus: Vec<Vec5> = (0..n_faces)
                .map(|f| {
                    let (il, ir) = self.mesh.face_elements(f);
                    let (ql, qr) = (&means[il], &means[ir]);
                    let fl = flux_from_primitive(&primitive_from_moments(ql));
                    let fr = flux_from_primitive(&primitive_from_moments(qr));
                    rusanov_flux(ql, qr, &fl, &fr, three_state_speed(ql, qr))
                })
                .collect();
            let faces: Vec<ElementFaces> = (0..n).map(|i| self.mesh.faces(i)).collect();
            let theta = limit_mean_fluxes(&means, &fluxes, &rus, &faces, dt / dx, lim.pos_floor);
            report.mean_flux_limited = theta.iter().filter(|th| **th < 1.0).count();
            if report.mean_flux_limited > 0 {
                for (i, f) in faces.iter().enumerate() {
                    for m in 0..5 {
                        let blend = |face: usize| rus[face][m] + theta[face] * (fluxes[face][m] - rus[face][m]);
                        // swap the high-order interface difference for the blended one
                        let high = fluxes[f.right][m] - fluxes[f.left][m];
                        let mixed = blend(f.right) - blend(f.left);
                        sol.coeffs[i][0][m] += dt / dx * (high - mixed);
                    }
                }
            }
        }

        for (i, c) in sol.coeffs.iter().enumerate() {
            let mean = &c[0];
            if mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidState(format!("non-finite element mean {mean:?}")).at_element(i, t + dt));
            }
            if !(mean[0] > 0.0) {
                return Err(
                    Error::NotRealizable { functional: Functional::Density, value: mean[0] }.at_element(i, t + dt)
                );
            }
            let p = pressure_of(mean);
            if !(p > 0.0) {
                return Err(Error::NotRealizable { functional: Functional::Pressure, value: p }.at_element(i, t + dt));
            }
        }

        if let (Some(mats), Some(eps)) = (&bgk_mats, self.config.knudsen) {
            for i in 0..n {
                if lim.points {
                    bgk::limit_collision_invariants(ops, &mut sol.coeffs[i], lim.pos_floor);
                }
                let delta_m = bgk::post_prediction_source(ops, &preds[i]);
                bgk::collision_correct(ops, mats, &mut sol.coeffs[i], &delta_m, eps, dt)
                    .map_err(|e| e.at_element(i, t + dt))?;
            }
        }

        if lim.points {
            for (i, c) in sol.coeffs.iter_mut().enumerate() {
                let theta = limit_correction(&mut c[..order], &ops.check_phi, lim.pos_floor)
                    .map_err(|e| e.at_element(i, t + dt))?;
                report.points_limited += usize::from(theta < 1.0);
            }
        }

        if lim.oscillation && order > 1 {
            let hood: Vec<[usize; 3]> = (0..n).map(|i| self.mesh.neighborhood(i)).collect();
            let thetas = limit_oscillations(&mut sol.coeffs, order, &ops.check_phi, &hood, dx, &lim);
            report.oscillation_limited = thetas.iter().filter(|th| **th < 1.0).count();
        }

        sol.time = t + dt;
        Ok(report)
    }

    /// Smallest density, pressure and kurtosis over all check points of all elements.
    pub fn check_point_minima(&self, sol: &ElementSolution) -> [f64; 3] {
        let mut out = [f64::INFINITY; 3];
        for c in &sol.coeffs {
            for phi in &self.ops.check_phi {
                let q = self.ops.spatial_at(c, phi);
                let a = primitive_from_moments(&q);
                out[0] = out[0].min(a[0]);
                out[1] = out[1].min(a[2]);
                out[2] = out[2].min(a[4]);
            }
        }
        out
    }

    /// Marches to `t_final`, calling `observe` after every step.
    pub fn advance_with(
        &self,
        sol: &mut ElementSolution,
        t_final: f64,
        mut observe: impl FnMut(&ElementSolution, &StepReport),
    ) -> Result<RunSummary> {
        let mut summary = RunSummary { min_functionals: self.check_point_minima(sol), ..RunSummary::default() };
        let tol = 1e-13 * t_final.abs().max(1.0);
        while sol.time < t_final - tol {
            let mut dt = self.stable_dt(sol)?;
            if sol.time + dt > t_final {
                dt = t_final - sol.time;
            }
            let report = self.step(sol, dt)?;
            summary.absorb(&report, self.check_point_minima(sol));
            observe(sol, &report);
        }
        Ok(summary)
    }

    pub fn advance_to(&self, sol: &mut ElementSolution, t_final: f64) -> Result<RunSummary> {
        self.advance_with(sol, t_final, |_, _| {})
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maxwellian(_x: f64) -> PrimitiveState {
        PrimitiveState::new(1.0, 0.0, 1.0, 0.0, 2.0)
    }

    #[test]
    fn mesh_faces() {
        let m = Mesh::new(4, -1.0, 1.0, Boundary::Periodic).unwrap();
        assert_eq!(m.n_faces(), 4);
        assert_eq!(m.face_elements(0), (3, 0));
        assert_eq!(m.neighborhood(0), [3, 0, 1]);
        let m = Mesh::new(4, -1.0, 1.0, Boundary::Extrapolation).unwrap();
        assert_eq!(m.n_faces(), 5);
        assert_eq!(m.face_elements(0), (0, 0));
        assert_eq!(m.face_elements(4), (3, 3));
        assert!(Mesh::new(0, 0.0, 1.0, Boundary::Periodic).is_err());
        assert!(Mesh::new(3, 1.0, 0.0, Boundary::Periodic).is_err());
    }

    #[test]
    fn constant_state_prediction_and_flux() {
        for order in 1..=4 {
            let mesh = Mesh::new(5, -1.0, 1.0, Boundary::Periodic).unwrap();
            let solver = DgSolver::new(mesh, SolverConfig::new(order)).unwrap();
            let sol = solver.project_initial_condition(maxwellian, &[]).unwrap();
            let (w, limited) = solver.predict_element(&sol.coeffs[0], 0.0, 0.0, 0.01, None).unwrap();
            assert!(!limited);
            assert!((w[0][4] - 2.0).abs() < 1e-14);
            for row in w.iter().skip(1) {
                assert!(row.iter().all(|v| v.abs() < 1e-12));
            }
            let f = solver.interface_flux(&w, &w);
            let expect = [0.0, 1.0, 0.0, 3.0, 0.0];
            for m in 0..5 {
                assert!((f[m] - expect[m]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn constant_state_is_steady() {
        let mesh = Mesh::new(6, -1.0, 1.0, Boundary::Extrapolation).unwrap();
        let solver = DgSolver::new(mesh, SolverConfig::new(3)).unwrap();
        let mut sol = solver.project_initial_condition(|_| PrimitiveState::new(1.0, 0.5, 1.0, 0.2, 1.5), &[]).unwrap();
        let before = sol.clone();
        solver.advance_to(&mut sol, 0.1).unwrap();
        for (a, b) in sol.coeffs.iter().zip(&before.coeffs) {
            for k in 0..3 {
                for m in 0..5 {
                    assert!((a[k][m] - b[k][m]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn zero_final_time_is_identity() {
        let mesh = Mesh::new(4, -1.0, 1.0, Boundary::Periodic).unwrap();
        let solver = DgSolver::new(mesh, SolverConfig::new(2)).unwrap();
        let mut sol = solver.project_initial_condition(maxwellian, &[]).unwrap();
        let before = sol.clone();
        let summary = solver.advance_to(&mut sol, 0.0).unwrap();
        assert_eq!(summary.steps, 0);
        assert_eq!(sol, before);
    }

    #[test]
    fn step_projection_splits_elements() {
        let mesh = Mesh::new(3, -1.5, 1.5, Boundary::Extrapolation).unwrap();
        let solver = DgSolver::new(mesh, SolverConfig::new(2).with_limiters(LimiterConfig::all_off())).unwrap();
        let init = |x: f64| PrimitiveState::new(if x < 0.25 { 1.0 } else { 0.5 }, 0.0, 1.0, 0.0, 2.0);
        let sol = solver.project_initial_condition(init, &[0.25]).unwrap();
        // middle element is [−0.5, 0.5]: three quarters at density 1, one quarter at 0.5
        assert!((sol.coeffs[1][0][0] - 0.875).abs() < 1e-14);
    }

    #[test]
    fn mirrored_states_flip_odd_fluxes() {
        let mesh = Mesh::new(4, -1.0, 1.0, Boundary::Periodic).unwrap();
        let solver = DgSolver::new(mesh, SolverConfig::new(1)).unwrap();
        let pred = |a: [f64; 5]| {
            let mut w = [[0.0; 5]; MAX_SPACETIME];
            w[0] = a;
            w
        };
        let l = [1.0, 0.3, 1.0, 0.2, 1.5];
        let r = [0.5, -0.1, 0.8, -0.1, 1.0];
        let mirror = |a: [f64; 5]| [a[0], -a[1], a[2], -a[3], a[4]];
        let f = solver.interface_flux(&pred(l), &pred(r));
        let g = solver.interface_flux(&pred(mirror(r)), &pred(mirror(l)));
        for m in 0..5 {
            let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
            assert!((f[m] - sign * g[m]).abs() < 1e-13, "component {m}");
        }
    }
}
