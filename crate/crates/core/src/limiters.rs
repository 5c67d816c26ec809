//! Positivity and oscillation limiters applied inside each time step.
//!
//! Limiter I damps the space-time prediction toward its average so density, pressure and
//! kurtosis stay positive at every quadrature point. Limiter II blends high-order interface
//! fluxes with Rusanov fluxes so element means stay realizable. Limiter III damps the corrected
//! polynomial toward its mean at the spatial check points, and Limiter IV damps elements whose
//! extrema escape a neighborhood bound.

use crate::basis_quadrature::{gauss_legendre, MAX_ORDER, MAX_SPACETIME};
use crate::error::{Error, Functional, Result};
use crate::kinetic_state::{kurtosis_of, moments_from_primitive, pressure_of, primitive_from_moments, DEFAULT_FLOOR};

pub type Vec5 = [f64; 5];

/// When Limiter IV evaluates a bound ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillationRule {
    /// Every ratio with a nonzero denominator enters the minimum, scaled by μ.
    Scaled,
    /// Only ratios of extrema that leave their bound enter the minimum.
    ViolationOnly,
}

/// How Limiter IV forms its neighborhood bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillationBounds {
    /// Extrema of the neighboring polynomials at their check points.
    NeighborExtrema,
    /// Means of the neighboring elements.
    NeighborMeans,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimiterConfig {
    pub prediction: bool,
    pub mean_flux: bool,
    pub points: bool,
    pub oscillation: bool,
    pub pos_floor: f64,
    pub a0: f64,
    pub mu_aggr: f64,
    pub oscillation_bounds: OscillationBounds,
    pub oscillation_rule: OscillationRule,
}

impl Default for LimiterConfig {
    fn default() -> Self {
        LimiterConfig::all_on()
    }
}

impl LimiterConfig {
    pub fn all_on() -> Self {
        LimiterConfig {
            prediction: true,
            mean_flux: true,
            points: true,
            oscillation: true,
            pos_floor: DEFAULT_FLOOR,
            a0: 5.0,
            mu_aggr: 10.0 / 11.0,
            oscillation_bounds: OscillationBounds::NeighborExtrema,
            oscillation_rule: OscillationRule::Scaled,
        }
    }

    pub fn all_off() -> Self {
        LimiterConfig { prediction: false, mean_flux: false, points: false, oscillation: false, ..Self::all_on() }
    }

    pub fn positivity_only() -> Self {
        LimiterConfig { oscillation: false, ..Self::all_on() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pos_floor > 0.0) {
            return Err(Error::Config(format!("positivity floor must be positive, got {}", self.pos_floor)));
        }
        if !(self.mu_aggr > 0.0 && self.mu_aggr <= 1.0) {
            return Err(Error::Config(format!("oscillation factor must be in (0, 1], got {}", self.mu_aggr)));
        }
        if !(self.a0 >= 0.0) {
            return Err(Error::Config(format!("oscillation offset must be nonnegative, got {}", self.a0)));
        }
        Ok(())
    }
}

/// Check points: element ends plus the Gauss-Legendre nodes, and their tensor product.
#[derive(Debug, Clone)]
pub struct PositivityPoints {
    pub space_points: Vec<f64>,
    pub spacetime_points: Vec<(f64, f64)>,
}

impl PositivityPoints {
    pub fn new(order: usize) -> Self {
        let mut space_points = vec![-1.0];
        space_points.extend(gauss_legendre(order).nodes);
        space_points.push(1.0);
        let spacetime_points =
            space_points.iter().flat_map(|&tau| space_points.iter().map(move |&xi| (tau, xi))).collect();
        PositivityPoints { space_points, spacetime_points }
    }
}

fn not_realizable(functional: Functional, value: f64) -> Error {
    Error::NotRealizable { functional, value }
}

/// Largest θ ∈ [0, 1] keeping a damped value above `floor`, given the average and the minimum.
#[inline]
fn damping(avg: f64, min: f64, floor: f64) -> f64 {
    if min >= floor {
        1.0
    } else {
        ((avg - floor) / (avg - min)).clamp(0.0, 1.0)
    }
}

/// Limiter I on a space-time prediction of primitive coefficients.
///
/// `basis_at_points[j][l]` holds Ψ_l at the j-th space-time check point. Returns the θ used.
pub fn limit_prediction(w: &mut [Vec5], basis_at_points: &[[f64; MAX_SPACETIME]], floor: f64) -> Result<f64> {
    let mut theta = 1.0_f64;
    for (m, functional) in [(0, Functional::Density), (2, Functional::Pressure), (4, Functional::Kurtosis)] {
        let avg = w[0][m];
        if !(avg > floor) {
            return Err(not_realizable(functional, avg));
        }
        let min = basis_at_points
            .iter()
            .map(|psi| w.iter().zip(psi).map(|(c, b)| c[m] * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        theta = theta.min(damping(avg, min, floor));
    }
    if theta < 1.0 {
        for row in w.iter_mut().skip(1) {
            for v in row.iter_mut() {
                *v *= theta;
            }
        }
    }
    Ok(theta)
}

#[inline]
fn eval_spatial(q: &[Vec5], phi: &[f64; MAX_ORDER]) -> Vec5 {
    let mut out = [0.0; 5];
    for (row, b) in q.iter().zip(phi) {
        for m in 0..5 {
            out[m] += b * row[m];
        }
    }
    out
}

fn scale_higher(q: &mut [Vec5], theta: f64) {
    for row in q.iter_mut().skip(1) {
        for v in row.iter_mut() {
            *v *= theta;
        }
    }
}

/// Largest damping in [0, `start`] keeping `functional` ≥ floor at every point, by bisection.
fn bisect_damping(
    q: &[Vec5],
    basis_at_points: &[[f64; MAX_ORDER]],
    start: f64,
    floor: f64,
    functional: impl Fn(&Vec5) -> f64,
) -> f64 {
    let ok = |theta: f64| {
        basis_at_points.iter().all(|phi| {
            let mut v = eval_spatial(q, phi);
            for m in 0..5 {
                v[m] = q[0][m] + theta * (v[m] - q[0][m]);
            }
            functional(&v) >= floor
        })
    };
    if ok(start) {
        return start;
    }
    let (mut lo, mut hi) = (0.0, start);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn check_means(mean: &Vec5, floor: f64) -> Result<f64> {
    if !(mean[0] > floor) {
        return Err(not_realizable(Functional::Density, mean[0]));
    }
    let p_mean = pressure_of(mean);
    if !(p_mean > floor) {
        return Err(not_realizable(Functional::Pressure, p_mean));
    }
    Ok(p_mean)
}

/// Density and pressure steps of Limiter III. Returns the accumulated θ.
pub fn limit_density_pressure(q: &mut [Vec5], basis_at_points: &[[f64; MAX_ORDER]], floor: f64) -> Result<f64> {
    let mean = q[0];
    let p_mean = check_means(&mean, floor)?;
    let mut total = 1.0;

    let rho_min = basis_at_points.iter().map(|phi| eval_spatial(q, phi)[0]).fold(f64::INFINITY, f64::min);
    let theta = damping(mean[0], rho_min, floor);
    if theta < 1.0 {
        scale_higher(q, theta);
        total *= theta;
    }

    let p_min = basis_at_points.iter().map(|phi| pressure_of(&eval_spatial(q, phi))).fold(f64::INFINITY, f64::min);
    let theta = damping(p_mean, p_min, floor);
    if theta < 1.0 {
        // pressure is concave in the moments, so the linear estimate is already safe
        let theta = bisect_damping(q, basis_at_points, theta, floor, pressure_of);
        scale_higher(q, theta);
        total *= theta;
    }
    Ok(total)
}

/// Limiter III on one element's conserved coefficients. Returns the accumulated θ.
pub fn limit_correction(q: &mut [Vec5], basis_at_points: &[[f64; MAX_ORDER]], floor: f64) -> Result<f64> {
    let mean = q[0];
    check_means(&mean, floor)?;
    let k_mean = kurtosis_of(&mean);
    if !(k_mean > floor) {
        return Err(not_realizable(Functional::Kurtosis, k_mean));
    }
    let mut total = limit_density_pressure(q, basis_at_points, floor)?;

    let k_min = basis_at_points.iter().map(|phi| kurtosis_of(&eval_spatial(q, phi))).fold(f64::INFINITY, f64::min);
    let theta = damping(k_mean, k_min, floor);
    if theta < 1.0 {
        let theta = bisect_damping(q, basis_at_points, theta, floor, kurtosis_of);
        scale_higher(q, theta);
        total *= theta;
    }
    Ok(total)
}

/// The interfaces of one element: indices of its left and right faces.
#[derive(Debug, Clone, Copy)]
pub struct ElementFaces {
    pub left: usize,
    pub right: usize,
}

#[inline]
fn axpy(a: &Vec5, s: f64, b: &Vec5) -> Vec5 {
    let mut out = *a;
    for m in 0..5 {
        out[m] += s * b[m];
    }
    out
}

/// Limiter II: per-face blend factors θ so the blended mean update stays realizable.
///
/// The blended mean of element i is Q^Rus − (dt/dx)(θ_R ΔF_R − θ_L ΔF_L). For each element the
/// admissible set of (θ_L, θ_R) is shrunk until density, pressure and kurtosis stay above the
/// floor at the corners (θ_L, θ_R), (θ_L, 0) and (0, θ_R) of the blending rectangle.
pub fn limit_mean_fluxes(
    means: &[Vec5],
    high: &[Vec5],
    rusanov: &[Vec5],
    faces: &[ElementFaces],
    dt_dx: f64,
    floor: f64,
) -> Vec<f64> {
    let mut theta = vec![1.0_f64; high.len()];
    let delta: Vec<Vec5> = high
        .iter()
        .zip(rusanov)
        .map(|(h, r)| [h[0] - r[0], h[1] - r[1], h[2] - r[2], h[3] - r[3], h[4] - r[4]])
        .collect();
    let rus_mean = |i: usize| -> Vec5 {
        let f = faces[i];
        let mut q = means[i];
        for m in 0..5 {
            q[m] -= dt_dx * (rusanov[f.right][m] - rusanov[f.left][m]);
        }
        q
    };

    for (i, f) in faces.iter().enumerate() {
        let q_rus = rus_mean(i);
        let d_left = delta[f.left];
        let d_right = delta[f.right];
        // mean update for blend factors (a, b) on the left and right faces
        let blended = |a: f64, b: f64| axpy(&axpy(&q_rus, -dt_dx * b, &d_right), dt_dx * a, &d_left);

        let gamma = (q_rus[0] - floor) / dt_dx;
        let left_hurts = d_left[0] < 0.0;
        let right_hurts = d_right[0] > 0.0;
        let (mut lam_l, mut lam_r) = (1.0_f64, 1.0_f64);
        if left_hurts && right_hurts {
            let lam = (gamma / (d_left[0].abs() + d_right[0].abs())).min(1.0);
            lam_l = lam;
            lam_r = lam;
        } else if left_hurts {
            lam_l = (gamma / d_left[0].abs()).min(1.0);
        } else if right_hurts {
            lam_r = (gamma / d_right[0].abs()).min(1.0);
        }
        lam_l = lam_l.max(0.0);
        lam_r = lam_r.max(0.0);

        for functional in [pressure_of as fn(&Vec5) -> f64, kurtosis_of] {
            let base = functional(&q_rus);
            let mut mu = 1.0_f64;
            for (a, b) in [(lam_l, lam_r), (lam_l, 0.0), (0.0, lam_r)] {
                let star = functional(&blended(a, b));
                if !(star >= floor) {
                    let ratio = if star.is_finite() { (base - floor) / (base - star) } else { 0.0 };
                    mu = mu.min(ratio.clamp(0.0, 1.0));
                }
            }
            lam_l *= mu;
            lam_r *= mu;
        }

        theta[f.left] = theta[f.left].min(lam_l);
        theta[f.right] = theta[f.right].min(lam_r);
    }

    // The kurtosis functional is not concave, so confirm the final means and tighten if needed.
    for _ in 0..64 {
        let mut changed = false;
        for (i, f) in faces.iter().enumerate() {
            let q = axpy(
                &axpy(&rus_mean(i), -dt_dx * theta[f.right], &delta[f.right]),
                dt_dx * theta[f.left],
                &delta[f.left],
            );
            let ok = q[0] > 0.0 && pressure_of(&q) > 0.0 && kurtosis_of(&q) > 0.0;
            if !ok && (theta[f.left] > 0.0 || theta[f.right] > 0.0) {
                let shrink = |t: f64| if t < 1e-3 { 0.0 } else { 0.5 * t };
                theta[f.left] = shrink(theta[f.left]);
                theta[f.right] = shrink(theta[f.right]);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    theta
}

/// Primitive variables watched by Limiter IV: ρ, u, p, h and the central fourth moment r.
#[inline]
fn watched_variables(q: &Vec5) -> Vec5 {
    let a = primitive_from_moments(q);
    let r = a[2] * a[2] / a[0] + a[3] * a[3] / a[2] + a[4];
    [a[0], a[1], a[2], a[3], r]
}

/// Limiter IV over all elements. `neighbors[i]` lists the elements forming i's neighborhood
/// (including i). Returns the θ applied to each element.
pub fn limit_oscillations(
    coeffs: &mut [[Vec5; MAX_ORDER]],
    n_coeff: usize,
    basis_at_points: &[[f64; MAX_ORDER]],
    neighbors: &[[usize; 3]],
    dx: f64,
    cfg: &LimiterConfig,
) -> Vec<f64> {
    let n = coeffs.len();
    let offset = cfg.a0 * dx.powf(1.5);
    let mut w_max = vec![[f64::NEG_INFINITY; 5]; n];
    let mut w_min = vec![[f64::INFINITY; 5]; n];
    let mut w_bar = vec![[0.0; 5]; n];
    for i in 0..n {
        let q = &coeffs[i][..n_coeff];
        w_bar[i] = watched_variables(&q[0]);
        for phi in basis_at_points {
            let w = watched_variables(&eval_spatial(q, phi));
            for l in 0..5 {
                w_max[i][l] = w_max[i][l].max(w[l]);
                w_min[i][l] = w_min[i][l].min(w[l]);
            }
        }
    }

    let mut thetas = vec![1.0; n];
    for i in 0..n {
        let mut ratio = f64::INFINITY;
        for l in 0..5 {
            let (hood_max, hood_min) = neighbors[i].iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &j| {
                match cfg.oscillation_bounds {
                    OscillationBounds::NeighborExtrema => (hi.max(w_max[j][l]), lo.min(w_min[j][l])),
                    OscillationBounds::NeighborMeans => (hi.max(w_bar[j][l]), lo.min(w_bar[j][l])),
                }
            });
            let upper = (w_bar[i][l] + offset).max(hood_max);
            let lower = (w_bar[i][l] - offset).min(hood_min);
            let scaled = cfg.oscillation_rule == OscillationRule::Scaled;
            let up = w_max[i][l] - w_bar[i][l];
            if up > 0.0 && (scaled || w_max[i][l] > upper) {
                ratio = ratio.min((upper - w_bar[i][l]) / up);
            }
            let down = w_min[i][l] - w_bar[i][l];
            if down < 0.0 && (scaled || w_min[i][l] < lower) {
                ratio = ratio.min((lower - w_bar[i][l]) / down);
            }
        }
        let theta = (cfg.mu_aggr * ratio).clamp(0.0, 1.0);
        if theta < 1.0 {
            scale_higher(&mut coeffs[i][..n_coeff], theta);
        }
        thetas[i] = theta;
    }
    thetas
}

/// Converts a primitive space-time coefficient row set into conserved values at a point.
pub fn conserved_at(w: &[Vec5], psi: &[f64]) -> Vec5 {
    let mut a = [0.0; 5];
    for (row, b) in w.iter().zip(psi) {
        for m in 0..5 {
            a[m] += b * row[m];
        }
    }
    moments_from_primitive(&a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis_quadrature::orthonormal_legendre;

    fn phi_points(order: usize) -> Vec<[f64; MAX_ORDER]> {
        PositivityPoints::new(order)
            .space_points
            .iter()
            .map(|&x| {
                let mut row = [0.0; MAX_ORDER];
                for (k, v) in row.iter_mut().enumerate().take(order) {
                    *v = orthonormal_legendre(k, x).0;
                }
                row
            })
            .collect()
    }

    #[test]
    fn point_counts() {
        for order in 1..=4 {
            let pts = PositivityPoints::new(order);
            assert_eq!(pts.space_points.len(), order + 2);
            assert_eq!(pts.spacetime_points.len(), (order + 2) * (order + 2));
        }
    }

    #[test]
    fn prediction_density_damping() {
        // average 1 with a linear mode 0.8 in space: ρ(ξ = −1) = 1 − 0.8√3
        let order = 2;
        let pts = PositivityPoints::new(order);
        let basis: Vec<[f64; MAX_SPACETIME]> = pts
            .spacetime_points
            .iter()
            .map(|&(tau, xi)| {
                let mut row = [0.0; MAX_SPACETIME];
                // index order for order 2: (0,0), (0,1), (1,0)
                row[0] = 1.0;
                row[1] = orthonormal_legendre(1, xi).0;
                row[2] = orthonormal_legendre(1, tau).0;
                row
            })
            .collect();
        let mut w = vec![[1.0, 0.0, 1.0, 0.0, 2.0], [0.8, 0.0, 0.0, 0.0, 0.0], [0.0; 5]];
        let theta = limit_prediction(&mut w, &basis, 1e-14).unwrap();
        let expect = (1.0 - 1e-14) / (0.8 * 3f64.sqrt());
        assert!((theta - expect).abs() < 1e-14);
        assert!((theta - 0.72169).abs() < 1e-4);
        let again = limit_prediction(&mut w, &basis, 1e-14).unwrap();
        assert_eq!(again, 1.0);
    }

    #[test]
    fn correction_density_damping() {
        let basis = phi_points(2);
        let mut q = [[1.0, 0.0, 1.0, 0.0, 3.0], [0.8, 0.0, 0.8, 0.0, 2.4], [0.0; 5], [0.0; 5]];
        let theta = limit_correction(&mut q[..2], &basis, 1e-14).unwrap();
        assert!(theta <= (1.0 - 1e-14) / (0.8 * 3f64.sqrt()) + 1e-14);
        for phi in &basis {
            let v = eval_spatial(&q[..2], phi);
            assert!(v[0] >= 1e-14 && pressure_of(&v) >= 1e-14 && kurtosis_of(&v) >= 1e-14 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn positive_data_untouched() {
        let basis = phi_points(3);
        let mut q = vec![[1.0, 0.0, 1.0, 0.0, 3.0], [0.01, 0.0, 0.01, 0.0, 0.03], [0.0; 5]];
        let before = q.clone();
        assert_eq!(limit_correction(&mut q, &basis, 1e-14).unwrap(), 1.0);
        assert_eq!(q, before);
    }

    #[test]
    fn zero_flux_difference_keeps_full_order() {
        let means = vec![[1.0, 0.0, 1.0, 0.0, 3.0]; 3];
        let fluxes = vec![[0.0, 1.0, 0.0, 3.0, 0.0]; 4];
        let faces: Vec<ElementFaces> = (0..3).map(|i| ElementFaces { left: i, right: i + 1 }).collect();
        let theta = limit_mean_fluxes(&means, &fluxes, &fluxes, &faces, 0.1, 1e-14);
        assert!(theta.iter().all(|t| *t == 1.0));
    }

    #[test]
    fn constant_solution_not_damped_by_oscillation_limiter() {
        let basis = phi_points(3);
        let mut coeffs = vec![[[1.0, 0.5, 1.25, 0.125, 3.0], [0.0; 5], [0.0; 5], [0.0; 5]]; 4];
        let neighbors: Vec<[usize; 3]> = (0..4).map(|i| [(i + 3) % 4, i, (i + 1) % 4]).collect();
        let thetas = limit_oscillations(&mut coeffs, 3, &basis, &neighbors, 0.1, &LimiterConfig::all_on());
        assert!(thetas.iter().all(|t| *t == 1.0));
    }
}
