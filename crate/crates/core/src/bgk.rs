//! BGK relaxation for the five-moment system: source terms, the relaxed prediction of heat flux
//! and kurtosis, the Radau-blended implicit collision step, and a manufactured solution with its
//! forcing.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::basis_quadrature::{MAX_ORDER, MAX_SPACETIME};
use crate::error::{Error, Result};
use crate::kinetic_state::PrimitiveState;
use crate::limiters::limit_density_pressure;
use crate::lxw_dg_solver::{Coeffs, DgOperators, SourceTerm, StCoeffs, Vec5};

/// The two nonzero components of the BGK source, in conserved and primitive form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgkSource {
    pub s_cons: [f64; 2],
    pub s_prim: [f64; 2],
}

pub fn bgk_source(alpha: &PrimitiveState) -> Result<BgkSource> {
    let PrimitiveState { rho, u, p, h, k } = *alpha;
    if !(p > 0.0) || !(rho > 0.0) {
        return Err(Error::Degenerate("BGK source needs positive density and pressure"));
    }
    let eq = 2.0 * p * p / rho;
    Ok(BgkSource { s_cons: [-h, -k + eq - (4.0 * p * u * h + h * h) / p], s_prim: [-h, -k + eq + h * h / p] })
}

/// Third and fourth raw moments of the Maxwellian with density, velocity and pressure given.
#[inline]
pub fn maxwellian_moments(rho: f64, u: f64, p: f64) -> [f64; 2] {
    let u2 = u * u;
    [rho * u2 * u + 3.0 * p * u, rho * u2 * u2 + 6.0 * p * u2 + 3.0 * p * p / rho]
}

/// Per-step matrices ε(Δt/2·I + εL)⁻¹ and (Δt/2)(Δt/2·I + εL)⁻¹.
#[derive(Debug, Clone)]
pub struct BgkStepMatrices {
    pub eps: f64,
    k_eps: [[f64; MAX_SPACETIME]; MAX_SPACETIME],
    k_dt: [[f64; MAX_SPACETIME]; MAX_SPACETIME],
}

impl BgkStepMatrices {
    pub fn new(ops: &DgOperators, eps: f64, dt: f64) -> Result<Self> {
        let n = ops.n_st;
        let mut m: DMatrix<f64> = &ops.l_matrix * eps;
        for i in 0..n {
            m[(i, i)] += 0.5 * dt;
        }
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::IllConditioned(format!("relaxation matrix singular for eps = {eps}, dt = {dt}")))?;
        let mut out = BgkStepMatrices {
            eps,
            k_eps: [[0.0; MAX_SPACETIME]; MAX_SPACETIME],
            k_dt: [[0.0; MAX_SPACETIME]; MAX_SPACETIME],
        };
        for i in 0..n {
            for j in 0..n {
                out.k_eps[i][j] = eps * inv[(i, j)];
                out.k_dt[i][j] = 0.5 * dt * inv[(i, j)];
            }
        }
        Ok(out)
    }

    /// Fills the heat-flux and kurtosis columns of a Picard iterate. `rhs` is C²Θ + G·A and
    /// `next` already holds the updated density, velocity and pressure.
    pub(crate) fn relax_prediction(&self, ops: &DgOperators, rhs: &StCoeffs, next: &mut StCoeffs) {
        let n_st = ops.n_st;
        for l in 0..n_st {
            next[l][3] = (0..n_st).map(|j| self.k_eps[l][j] * rhs[j][3]).sum();
        }
        let mut s_proj = [0.0; MAX_SPACETIME];
        for n in 0..ops.order * ops.order {
            let psi = &ops.psi_nodes[n];
            let (mut rho, mut p, mut h) = (0.0, 0.0, 0.0);
            for l in 0..n_st {
                rho += psi[l] * next[l][0];
                p += psi[l] * next[l][2];
                h += psi[l] * next[l][3];
            }
            let s = 2.0 * p * p / rho + h * h / p;
            for (l, v) in s_proj.iter_mut().enumerate().take(n_st) {
                *v += ops.c2[l][n] * s;
            }
        }
        for l in 0..n_st {
            next[l][4] = (0..n_st).map(|j| self.k_eps[l][j] * rhs[j][4] + self.k_dt[l][j] * s_proj[j]).sum();
        }
    }
}

/// Space-time coefficients of the deviation of heat flux and kurtosis from equilibrium.
pub fn post_prediction_source(ops: &DgOperators, w: &StCoeffs) -> [[f64; 2]; MAX_SPACETIME] {
    let mut out = [[0.0; 2]; MAX_SPACETIME];
    for n in 0..ops.order * ops.order {
        let [rho, u, p, h, k] = ops.spacetime_at(w, &ops.psi_nodes[n]);
        let dm = [-h, -k + 2.0 * p * p / rho - (4.0 * p * u * h + h * h) / p];
        for l in 0..ops.n_st {
            for j in 0..2 {
                out[l][j] += ops.c2[l][n] * dm[j];
            }
        }
    }
    out
}

/// Density and pressure damping of the collisionless update, so the Maxwellian is defined.
pub fn limit_collision_invariants(ops: &DgOperators, q: &mut Coeffs, floor: f64) {
    // a failing mean is reported by the full limiter right after the collision
    let _ = limit_density_pressure(&mut q[..ops.order], &ops.check_phi, floor);
}

/// Implicit collision step on the heat-flux and kurtosis moments of one element.
pub fn collision_correct(
    ops: &DgOperators,
    mats: &BgkStepMatrices,
    q: &mut Coeffs,
    delta_m: &[[f64; 2]; MAX_SPACETIME],
    eps: f64,
    dt: f64,
) -> Result<()> {
    let order = ops.order;
    let mut s_hat = [[0.0; 2]; MAX_ORDER];
    for a in 0..order {
        let m = ops.spatial_at(q, &ops.phi_gl[a]);
        let rho = m[0];
        if !(rho > 0.0) {
            return Err(Error::Degenerate("nonpositive density at a collision node"));
        }
        let u = m[1] / rho;
        let p = m[2] - m[1] * u;
        let s = maxwellian_moments(rho, u, p);
        for k in 0..order {
            for j in 0..2 {
                s_hat[k][j] += 0.5 * ops.gl_weights[a] * ops.phi_gl[a][k] * s[j];
            }
        }
    }
    debug_assert_eq!(mats.eps, eps);
    let r = ops.radau_scale;
    let half = 0.5 * dt;
    let keep = r * eps / (half + r * eps);
    let relax = half / (half + r * eps);
    for k in 0..order {
        for j in 0..2 {
            let explicit: f64 = (0..ops.n_st).map(|l| ops.radau[k][l] * delta_m[l][j]).sum();
            q[k][3 + j] = keep * q[k][3 + j] + relax * (r * explicit + s_hat[k][j]);
        }
    }
    Ok(())
}

/// The manufactured solution: every field except the constant velocity is a scaled copy of
/// √π(2 − cos 2π(t − x)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub eps: f64,
    rho: f64,
    u: f64,
    p: f64,
    h: f64,
    k: f64,
    coeff: [f64; 7],
}

/// Forcing coefficients A₁..A₇ of the manufactured source.
pub fn ms_coefficients(eps: f64) -> [f64; 7] {
    let e = eps;
    let e2 = e * e;
    let d = 1.0 + 2.0 * e;
    let g = 2.0 + 33.0 * e * (1.0 + e);
    [
        (3.0 + 11.0 * e) / (4.0 * (1.0 + e)),
        (1.0 - 33.0 * e) / (16.0 * (1.0 + e)),
        5.0 * (1.0 + 33.0 * e) / (64.0 * (1.0 + e)),
        (3.0 - 809.0 * e) / (256.0 * (1.0 + e)),
        -125.0 / (128.0 * d * d),
        125.0 * (1.0 + 2.0 * e - 10.0 * e2) / (512.0 * d * d * d),
        (76.0 + 3620.0 * e + 521895.0 * e2 + 5285445.0 * e2 * e + 9544425.0 * e2 * e2 + 4794867.0 * e2 * e2 * e)
            / (1024.0 * (1.0 + e) * g * g),
    ]
}

impl ManufacturedSolution {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("Knudsen number must be positive, got {eps}")));
        }
        let e = eps;
        let d = 1.0 + 2.0 * e;
        let rho = d / (2.0 + 2.0 * e);
        let p = (2.0 + 33.0 * (e + e * e)) / (32.0 * (1.0 + e) * d);
        let h = -125.0 * e / (128.0 * d * d);
        let ee = e + e * e;
        let r = (12.0 + ee * (1021.0 + 2017.0 * ee)) / (512.0 * (1.0 + e) * d * d * d);
        let k = r - p * p / rho - h * h / p;
        Ok(ManufacturedSolution {
            eps,
            rho,
            u: (1.0 - 3.0 * e) / (4.0 + 8.0 * e),
            p,
            h,
            k,
            coeff: ms_coefficients(eps),
        })
    }

    fn profile(t: f64, x: f64) -> f64 {
        PI.sqrt() * (2.0 - (2.0 * PI * (t - x)).cos())
    }

    pub fn state(&self, t: f64, x: f64) -> PrimitiveState {
        let g = Self::profile(t, x);
        PrimitiveState::new(self.rho * g, self.u, self.p * g, self.h * g, self.k * g)
    }

    pub fn source(&self, t: f64, x: f64) -> Vec5 {
        let a = &self.coeff;
        let s = PI.powf(1.5) * (2.0 * PI * (t - x)).sin();
        let c = Self::profile(t, x);
        [a[0] * s, a[1] * s, a[2] * s, a[3] * s + a[4] * c, a[6] * s + a[5] * c]
    }
}

/// Solves (∂q/∂α)·v = s. The Jacobian is lower triangular in the order (ρ, u, p, h, k).
pub fn pull_back_to_primitive(alpha: &PrimitiveState, s: &Vec5) -> Vec5 {
    let PrimitiveState { rho, u, p, h, .. } = *alpha;
    let u2 = u * u;
    let s_rho = s[0];
    let s_u = (s[1] - u * s_rho) / rho;
    let s_p = s[2] - u2 * s_rho - 2.0 * rho * u * s_u;
    let s_h = s[3] - u2 * u * s_rho - (3.0 * rho * u2 + 3.0 * p) * s_u - 3.0 * u * s_p;
    let s_k = s[4]
        - (u2 * u2 - p * p / (rho * rho)) * s_rho
        - (4.0 * rho * u2 * u + 12.0 * p * u + 4.0 * h) * s_u
        - (6.0 * u2 + 2.0 * p / rho - h * h / (p * p)) * s_p
        - (4.0 * u + 2.0 * h / p) * s_h;
    [s_rho, s_u, s_p, s_h, s_k]
}

impl SourceTerm for ManufacturedSolution {
    fn conserved(&self, t: f64, x: f64) -> Vec5 {
        self.source(t, x)
    }

    fn primitive(&self, t: f64, x: f64) -> Vec5 {
        pull_back_to_primitive(&self.state(t, x), &self.source(t, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyqmom_closure::flux_from_primitive;
    use crate::kinetic_state::moments_from_primitive;

    #[test]
    fn source_examples() {
        let s = bgk_source(&PrimitiveState::new(1.0, 0.0, 1.0, 0.0, 2.0)).unwrap();
        assert_eq!(s.s_cons, [0.0, 0.0]);
        assert_eq!(s.s_prim, [0.0, 0.0]);
        let s = bgk_source(&PrimitiveState::new(1.0, 0.0, 1.0, 1.0, 2.0)).unwrap();
        assert_eq!(s.s_cons, [-1.0, -1.0]);
        assert_eq!(s.s_prim, [-1.0, 1.0]);
        assert!(bgk_source(&PrimitiveState::new(1.0, 0.0, 0.0, 1.0, 2.0)).is_err());
    }

    #[test]
    fn manufactured_values() {
        let ms = ManufacturedSolution::new(1.0).unwrap();
        let a = ms.state(0.0, 0.0);
        assert!((a.rho - 0.75 * PI.sqrt()).abs() < 1e-14);
        assert!((a.u + 1.0 / 6.0).abs() < 1e-15);
        assert!((ms_coefficients(0.0)[4] + 125.0 / 128.0).abs() < 1e-15);
        for eps in [1e-6, 1e-2, 1.0, 1e4] {
            assert!(ManufacturedSolution::new(eps).unwrap().state(0.3, 0.7).is_realizable(0.0));
        }
    }

    /// The forcing must equal q_t + f_x − S/ε along the manufactured fields.
    #[test]
    fn manufactured_residual_matches_source() {
        for eps in [1e-2, 0.5, 1.0, 30.0] {
            let ms = ManufacturedSolution::new(eps).unwrap();
            let (t, x, d) = (0.37, -0.21, 1e-5);
            let q = |t: f64, x: f64| moments_from_primitive(&ms.state(t, x).to_array());
            let f = |t: f64, x: f64| flux_from_primitive(&ms.state(t, x).to_array());
            let bgk = bgk_source(&ms.state(t, x)).unwrap();
            let s = ms.source(t, x);
            for m in 0..5 {
                let qt = (q(t + d, x)[m] - q(t - d, x)[m]) / (2.0 * d);
                let fx = (f(t, x + d)[m] - f(t, x - d)[m]) / (2.0 * d);
                let coll = if m >= 3 { bgk.s_cons[m - 3] / eps } else { 0.0 };
                let res = qt + fx - coll - s[m];
                assert!(res.abs() < 1e-6 * (1.0 + s[m].abs()), "eps {eps} component {m}: {res}");
            }
        }
    }

    #[test]
    fn pull_back_inverts_the_moment_jacobian() {
        let alpha = PrimitiveState::new(1.3, -0.4, 0.9, 0.3, 0.7);
        let v = [0.2, -0.1, 0.5, 0.3, -0.7];
        let d = 1e-6;
        let plus = moments_from_primitive(&std::array::from_fn(|m| alpha.to_array()[m] + d * v[m]));
        let minus = moments_from_primitive(&std::array::from_fn(|m| alpha.to_array()[m] - d * v[m]));
        let s: Vec5 = std::array::from_fn(|m| (plus[m] - minus[m]) / (2.0 * d));
        let back = pull_back_to_primitive(&alpha, &s);
        for m in 0..5 {
            assert!((back[m] - v[m]).abs() < 1e-8);
        }
    }

    #[test]
    fn maxwellian_moment_values() {
        assert_eq!(maxwellian_moments(1.0, 0.0, 1.0), [0.0, 3.0]);
        let q = moments_from_primitive(&[2.0, 0.5, 1.5, 0.0, 2.0 * 1.5 * 1.5 / 2.0]);
        let s = maxwellian_moments(2.0, 0.5, 1.5);
        assert!((q[3] - s[0]).abs() < 1e-14 && (q[4] - s[1]).abs() < 1e-14);
    }
}
