//! First-order Rusanov finite volumes for the moment system, and the exact Riemann solution of the
//! Euler equations reached in the small Knudsen limit.

use rand::Rng;

use crate::basis_quadrature::gauss_legendre;
use crate::error::{Error, Result};
use crate::hyqmom_closure::{flux_from_primitive, max_wave_speed_raw};
use crate::kinetic_state::{kurtosis_of, moments_from_primitive, pressure_of, primitive_from_moments, PrimitiveState};
use crate::lxw_dg_solver::{rusanov_flux, three_state_speed, Mesh, Vec5};

/// Cell means of a first-order finite-volume solution.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAverages {
    pub mesh: Mesh,
    pub cells: Vec<Vec5>,
    pub time: f64,
}

#[inline]
fn flux_of(q: &Vec5) -> Vec5 {
    flux_from_primitive(&primitive_from_moments(q))
}

/// Rusanov flux with the speed bound taken over left, right and mean states.
pub fn rusanov_face_flux(ql: &Vec5, qr: &Vec5) -> (Vec5, f64) {
    let lam = three_state_speed(ql, qr);
    (rusanov_flux(ql, qr, &flux_of(ql), &flux_of(qr), lam), lam)
}

/// Update of a middle cell from its two neighbors.
pub fn rusanov_cell_update(left: &Vec5, mid: &Vec5, right: &Vec5, dt_dx: f64) -> Vec5 {
    let (fl, _) = rusanov_face_flux(left, mid);
    let (fr, _) = rusanov_face_flux(mid, right);
    std::array::from_fn(|m| mid[m] - dt_dx * (fr[m] - fl[m]))
}

impl CellAverages {
    /// Exact cell means of piecewise-smooth data, with cells split at `breaks`.
    pub fn from_initial(mesh: Mesh, init: impl Fn(f64) -> PrimitiveState, breaks: &[f64]) -> Result<Self> {
        let rule = gauss_legendre(4);
        let mut cells = Vec::with_capacity(mesh.n_elem);
        for i in 0..mesh.n_elem {
            let lo = mesh.x_low + i as f64 * mesh.dx;
            let hi = lo + mesh.dx;
            let mut cuts = vec![lo];
            cuts.extend(breaks.iter().copied().filter(|x| *x > lo && *x < hi));
            cuts.push(hi);
            let mut q = [0.0; 5];
            for seg in cuts.windows(2) {
                let half = 0.5 * (seg[1] - seg[0]);
                for (mu, w) in rule.nodes.iter().zip(&rule.weights) {
                    let alpha = init(0.5 * (seg[0] + seg[1]) + half * mu);
                    alpha.check_realizable(0.0)?;
                    let m = moments_from_primitive(&alpha.to_array());
                    for j in 0..5 {
                        q[j] += w * half * m[j] / mesh.dx;
                    }
                }
            }
            cells.push(q);
        }
        Ok(CellAverages { mesh, cells, time: 0.0 })
    }

    fn face_cells(&self, f: usize) -> (usize, usize) {
        self.mesh.face_elements(f)
    }

    /// Largest face speed bound.
    pub fn max_speed(&self) -> f64 {
        (0..self.mesh.n_faces())
            .map(|f| {
                let (l, r) = self.face_cells(f);
                three_state_speed(&self.cells[l], &self.cells[r])
            })
            .fold(0.0, f64::max)
    }

    pub fn stable_dt(&self, cfl: f64) -> Result<f64> {
        let lam = self.max_speed();
        if !(lam > 0.0) || !lam.is_finite() {
            return Err(Error::Degenerate("no finite positive wave speed"));
        }
        Ok(cfl * self.mesh.dx / lam)
    }

    /// Primitive fields of each cell.
    pub fn primitives(&self) -> Vec<PrimitiveState> {
        self.cells.iter().map(|q| PrimitiveState::from_array(primitive_from_moments(q))).collect()
    }
}

/// Face fluxes of the current state and the largest face speed bound.
fn face_fluxes(state: &CellAverages) -> (Vec<Vec5>, f64) {
    // flux and speed of each cell once; only the face mean needs a fresh conversion
    let cell: Vec<(Vec5, f64)> = state
        .cells
        .iter()
        .map(|q| {
            let a = primitive_from_moments(q);
            (flux_from_primitive(&a), max_wave_speed_raw(&a))
        })
        .collect();
    let mut lam_max = 0.0_f64;
    let fluxes = (0..state.mesh.n_faces())
        .map(|f| {
            let (l, r) = state.face_cells(f);
            let (ql, qr) = (&state.cells[l], &state.cells[r]);
            let mid: Vec5 = std::array::from_fn(|m| 0.5 * (ql[m] + qr[m]));
            let lam = cell[l].1.max(cell[r].1).max(wave_speed(&mid));
            lam_max = lam_max.max(lam);
            rusanov_flux(ql, qr, &cell[l].0, &cell[r].0, lam)
        })
        .collect();
    (fluxes, lam_max)
}

fn apply_fluxes(state: &mut CellAverages, fluxes: &[Vec5], dt: f64) {
    let dt_dx = dt / state.mesh.dx;
    for i in 0..state.mesh.n_elem {
        let faces = state.mesh.faces(i);
        for m in 0..5 {
            state.cells[i][m] -= dt_dx * (fluxes[faces.right][m] - fluxes[faces.left][m]);
        }
    }
    state.time += dt;
}

/// One Rusanov step. Refuses steps that break the CFL condition dt·λ/dx < 1.
pub fn rusanov_step(state: &mut CellAverages, dt: f64) -> Result<()> {
    let (fluxes, lam_max) = face_fluxes(state);
    let courant = dt * lam_max / state.mesh.dx;
    if !(courant < 1.0) {
        return Err(Error::CflViolation(courant));
    }
    apply_fluxes(state, &fluxes, dt);
    Ok(())
}

/// Marches a Rusanov solution to `t_final` with the given CFL number.
pub fn rusanov_reference_run(state: &mut CellAverages, t_final: f64, cfl: f64) -> Result<usize> {
    if !(cfl > 0.0 && cfl < 1.0) {
        return Err(Error::CflViolation(cfl));
    }
    let mut steps = 0;
    let tol = 1e-13 * t_final.abs().max(1.0);
    while state.time < t_final - tol {
        let (fluxes, lam) = face_fluxes(state);
        if !(lam > 0.0) || !lam.is_finite() {
            return Err(Error::Degenerate("no finite positive wave speed"));
        }
        let dt = (cfl * state.mesh.dx / lam).min(t_final - state.time);
        apply_fluxes(state, &fluxes, dt);
        steps += 1;
    }
    Ok(steps)
}

/// A random realizable state spanning several orders of magnitude in each functional.
pub fn random_realizable_state(rng: &mut impl Rng) -> Vec5 {
    let log_uniform = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| {
        let t: f64 = rng.gen();
        (lo.ln() + t * (hi.ln() - lo.ln())).exp()
    };
    let rho = log_uniform(rng, 1e-3, 10.0);
    let u = rng.gen_range(-3.0..3.0);
    let p = log_uniform(rng, 1e-3, 10.0);
    let skew: f64 = rng.gen_range(-3.0..3.0);
    let h = skew * p.powf(1.5) / rho.sqrt();
    let k = log_uniform(rng, 1e-4, 10.0) * p * p / rho;
    moments_from_primitive(&[rho, u, p, h, k])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzReport {
    pub trials: usize,
    pub violations: usize,
}

/// Random single-cell Rusanov updates at a fixed Courant number; counts nonrealizable outputs.
pub fn positivity_fuzz(rng: &mut impl Rng, trials: usize, cfl: f64) -> FuzzReport {
    let mut violations = 0;
    for _ in 0..trials {
        let (l, c, r) = (random_realizable_state(rng), random_realizable_state(rng), random_realizable_state(rng));
        let lam = three_state_speed(&l, &c).max(three_state_speed(&c, &r));
        let q = rusanov_cell_update(&l, &c, &r, cfl / lam);
        let ok = q[0] > 0.0 && pressure_of(&q) > 0.0 && kurtosis_of(&q) > 0.0;
        violations += usize::from(!ok);
    }
    FuzzReport { trials, violations }
}

/// Largest characteristic speed of a conserved state, for callers that only hold moments.
pub fn wave_speed(q: &Vec5) -> f64 {
    max_wave_speed_raw(&primitive_from_moments(q))
}

/// Density, velocity and pressure of an Euler state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

impl EulerState {
    pub fn new(rho: f64, u: f64, p: f64) -> Self {
        EulerState { rho, u, p }
    }

    pub fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.p / self.rho).sqrt()
    }

    /// Mass, momentum, energy.
    pub fn conserved(&self, gamma: f64) -> [f64; 3] {
        [self.rho, self.rho * self.u, 0.5 * self.rho * self.u * self.u + self.p / (gamma - 1.0)]
    }

    pub fn flux(&self, gamma: f64) -> [f64; 3] {
        let e = self.conserved(gamma)[2];
        [self.rho * self.u, self.rho * self.u * self.u + self.p, self.u * (e + self.p)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wave {
    Shock,
    Rarefaction,
}

/// Exact self-similar solution of an Euler Riemann problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerRiemannSolution {
    pub left: EulerState,
    pub right: EulerState,
    pub gamma: f64,
    /// Star pressure and velocity; `None` when the data open a vacuum.
    pub star: Option<(f64, f64)>,
    pub left_wave: Wave,
    pub right_wave: Wave,
}

fn pressure_function(p: f64, s: &EulerState, gamma: f64) -> (f64, f64) {
    let c = s.sound_speed(gamma);
    if p > s.p {
        let a = 2.0 / ((gamma + 1.0) * s.rho);
        let b = (gamma - 1.0) / (gamma + 1.0) * s.p;
        let root = (a / (p + b)).sqrt();
        ((p - s.p) * root, root * (1.0 - 0.5 * (p - s.p) / (p + b)))
    } else {
        let e = (gamma - 1.0) / (2.0 * gamma);
        let ratio = p / s.p;
        (2.0 * c / (gamma - 1.0) * (ratio.powf(e) - 1.0), ratio.powf(-(gamma + 1.0) / (2.0 * gamma)) / (s.rho * c))
    }
}

pub fn euler_exact_riemann(left: EulerState, right: EulerState, gamma: f64) -> Result<EulerRiemannSolution> {
    for s in [&left, &right] {
        if !(s.rho > 0.0 && s.p > 0.0) {
            return Err(Error::InvalidState(format!("Euler state {s:?} needs positive density and pressure")));
        }
    }
    if !(gamma > 1.0) {
        return Err(Error::Config(format!("gamma must exceed 1, got {gamma}")));
    }
    let (cl, cr) = (left.sound_speed(gamma), right.sound_speed(gamma));
    let du = right.u - left.u;
    if 2.0 * (cl + cr) / (gamma - 1.0) <= du {
        return Ok(EulerRiemannSolution {
            left,
            right,
            gamma,
            star: None,
            left_wave: Wave::Rarefaction,
            right_wave: Wave::Rarefaction,
        });
    }
    let g = |p: f64| pressure_function(p, &left, gamma).0 + pressure_function(p, &right, gamma).0 + du;
    // g is increasing in p; bracket the root, then bisect
    let mut lo = 0.0;
    let mut hi = left.p.max(right.p).max(1e-300);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let p_star = 0.5 * (lo + hi);
    let u_star = 0.5 * (left.u + right.u)
        + 0.5 * (pressure_function(p_star, &right, gamma).0 - pressure_function(p_star, &left, gamma).0);
    let kind = |s: &EulerState| if p_star > s.p { Wave::Shock } else { Wave::Rarefaction };
    Ok(EulerRiemannSolution {
        left,
        right,
        gamma,
        star: Some((p_star, u_star)),
        left_wave: kind(&left),
        right_wave: kind(&right),
    })
}

impl EulerRiemannSolution {
    /// Residual of the pressure equation at the computed star pressure.
    pub fn star_residual(&self) -> Option<f64> {
        let (p, _) = self.star?;
        Some(
            pressure_function(p, &self.left, self.gamma).0
                + pressure_function(p, &self.right, self.gamma).0
                + self.right.u
                - self.left.u,
        )
    }

    /// State at similarity coordinate x/t.
    pub fn sample(&self, xi: f64) -> EulerState {
        let g = self.gamma;
        let (l, r) = (self.left, self.right);
        let (cl, cr) = (l.sound_speed(g), r.sound_speed(g));
        let gm = (g - 1.0) / (g + 1.0);
        let fan = |s: &EulerState, c: f64, sign: f64| {
            // sign = +1 inside a left fan, −1 inside a right fan
            let u = 2.0 / (g + 1.0) * (sign * c + (g - 1.0) / 2.0 * s.u + xi);
            let cf = 2.0 / (g + 1.0) * (c + sign * (g - 1.0) / 2.0 * (s.u - xi));
            let rho = s.rho * (cf / c).powf(2.0 / (g - 1.0));
            EulerState::new(rho, u, s.p * (cf / c).powf(2.0 * g / (g - 1.0)))
        };
        let Some((ps, us)) = self.star else {
            let head_l = l.u - cl;
            let tail_l = l.u + 2.0 * cl / (g - 1.0);
            let head_r = r.u + cr;
            let tail_r = r.u - 2.0 * cr / (g - 1.0);
            return if xi <= head_l {
                l
            } else if xi < tail_l {
                fan(&l, cl, 1.0)
            } else if xi <= tail_r {
                EulerState::new(0.0, 0.5 * (tail_l + tail_r), 0.0)
            } else if xi < head_r {
                fan(&r, cr, -1.0)
            } else {
                r
            };
        };
        if xi <= us {
            match self.left_wave {
                Wave::Shock => {
                    let ratio = ps / l.p;
                    let speed = l.u - cl * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt();
                    if xi <= speed {
                        l
                    } else {
                        EulerState::new(l.rho * (ratio + gm) / (gm * ratio + 1.0), us, ps)
                    }
                }
                Wave::Rarefaction => {
                    let c_star = cl * (ps / l.p).powf((g - 1.0) / (2.0 * g));
                    if xi <= l.u - cl {
                        l
                    } else if xi >= us - c_star {
                        EulerState::new(l.rho * (ps / l.p).powf(1.0 / g), us, ps)
                    } else {
                        fan(&l, cl, 1.0)
                    }
                }
            }
        } else {
            match self.right_wave {
                Wave::Shock => {
                    let ratio = ps / r.p;
                    let speed = r.u + cr * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt();
                    if xi >= speed {
                        r
                    } else {
                        EulerState::new(r.rho * (ratio + gm) / (gm * ratio + 1.0), us, ps)
                    }
                }
                Wave::Rarefaction => {
                    let c_star = cr * (ps / r.p).powf((g - 1.0) / (2.0 * g));
                    if xi >= r.u + cr {
                        r
                    } else if xi <= us + c_star {
                        EulerState::new(r.rho * (ps / r.p).powf(1.0 / g), us, ps)
                    } else {
                        fan(&r, cr, -1.0)
                    }
                }
            }
        }
    }

    /// Speeds of the left and right shocks, where present.
    pub fn shock_speeds(&self) -> (Option<f64>, Option<f64>) {
        let Some((ps, _)) = self.star else { return (None, None) };
        let g = self.gamma;
        let speed = |s: &EulerState, sign: f64| {
            s.u + sign * s.sound_speed(g) * ((g + 1.0) / (2.0 * g) * ps / s.p + (g - 1.0) / (2.0 * g)).sqrt()
        };
        (
            (self.left_wave == Wave::Shock).then(|| speed(&self.left, -1.0)),
            (self.right_wave == Wave::Shock).then(|| speed(&self.right, 1.0)),
        )
    }
}
