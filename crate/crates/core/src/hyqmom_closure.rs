//! Three-node quadrature closure: inversion, closing moment, flux, Jacobian and wave speeds.

use crate::error::{Error, Functional, Result};
use crate::kinetic_state::{conserved_to_primitive, primitive_from_moments, ConservedMoments, PrimitiveState};

/// Three weighted nodes, the middle one pinned at the mean velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureTriple {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub mu1: f64,
    pub mu3: f64,
    pub u_center: f64,
}

impl QuadratureTriple {
    /// Moment of order `n` of the three-node measure.
    pub fn moment(&self, n: i32) -> f64 {
        self.w1 * self.mu1.powi(n) + self.w2 * self.u_center.powi(n) + self.w3 * self.mu3.powi(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenStructure {
    pub lambda: [f64; 5],
    pub rvec: [[f64; 5]; 5],
    pub a_aux: f64,
    pub b_aux: f64,
}

fn require_realizable(alpha: &PrimitiveState) -> Result<()> {
    alpha.check_realizable(0.0)
}

fn require_positive_density_pressure(alpha: &PrimitiveState) -> Result<()> {
    if !(alpha.rho > 0.0) {
        return Err(Error::NotRealizable { functional: Functional::Density, value: alpha.rho });
    }
    if !(alpha.p > 0.0) {
        return Err(Error::NotRealizable { functional: Functional::Pressure, value: alpha.p });
    }
    Ok(())
}

pub fn hyqmom_invert(alpha: &PrimitiveState) -> Result<QuadratureTriple> {
    require_realizable(alpha)?;
    let PrimitiveState { rho, u, p, h, k } = *alpha;
    // p(k + p²/ρ + h²/p) − h² rewritten without the cancelling h² terms
    let rho_outer = p * p * p / (p * k + p * p * p / rho);
    let s = h / (2.0 * p);
    let root = (p / rho_outer + s * s).sqrt();
    Ok(QuadratureTriple {
        w1: 0.5 * rho_outer * (1.0 + s / root),
        w2: rho - rho_outer,
        w3: 0.5 * rho_outer * (1.0 - s / root),
        mu1: u + s - root,
        mu3: u + s + root,
        u_center: u,
    })
}

/// Closing fifth moment from primitive fields, unchecked.
#[inline]
pub fn closing_moment_raw(a: &[f64; 5]) -> f64 {
    let [rho, u, p, h, k] = *a;
    let r = p * p / rho + h * h / p + k;
    let u2 = u * u;
    rho * u2 * u2 * u + 10.0 * p * u2 * u + 10.0 * h * u2 + 5.0 * r * u + 2.0 * h * r / p - h * h * h / (p * p)
}

pub fn closing_moment(alpha: &PrimitiveState) -> Result<f64> {
    require_positive_density_pressure(alpha)?;
    Ok(closing_moment_raw(&alpha.to_array()))
}

/// Physical flux (M1, M2, M3, M4, M5★) from primitive fields, unchecked.
#[inline]
pub fn flux_from_primitive(a: &[f64; 5]) -> [f64; 5] {
    let [rho, u, p, h, k] = *a;
    let r = p * p / rho + h * h / p + k;
    let u2 = u * u;
    [
        rho * u,
        rho * u2 + p,
        rho * u2 * u + 3.0 * p * u + h,
        rho * u2 * u2 + 6.0 * p * u2 + 4.0 * h * u + r,
        rho * u2 * u2 * u + 10.0 * p * u2 * u + 10.0 * h * u2 + 5.0 * r * u + 2.0 * h * r / p - h * h * h / (p * p),
    ]
}

pub fn flux(q: &ConservedMoments) -> Result<[f64; 5]> {
    let alpha = conserved_to_primitive(q)?;
    Ok(flux_from_primitive(&alpha.to_array()))
}

/// Jacobian of the primitive-variable system, α_t + B(α) α_x = 0.
pub fn primitive_jacobian(alpha: &PrimitiveState) -> Result<[[f64; 5]; 5]> {
    require_positive_density_pressure(alpha)?;
    Ok(primitive_jacobian_raw(&alpha.to_array()))
}

#[inline]
pub fn primitive_jacobian_raw(a: &[f64; 5]) -> [[f64; 5]; 5] {
    let [rho, u, p, h, k] = *a;
    [
        [u, rho, 0.0, 0.0, 0.0],
        [0.0, u, 1.0 / rho, 0.0, 0.0],
        [0.0, 3.0 * p, u, 1.0, 0.0],
        [-p * p / (rho * rho), 4.0 * h, -h * h / (p * p) - p / rho, u + 2.0 * h / p, 1.0],
        [0.0, 5.0 * k, -2.0 * k * h / (p * p), 2.0 * k / p, u],
    ]
}

/// Product B(α)·v without forming the matrix.
#[inline]
pub fn primitive_jacobian_apply(a: &[f64; 5], v: &[f64; 5]) -> [f64; 5] {
    let [rho, u, p, h, k] = *a;
    let ip = 1.0 / p;
    [
        u * v[0] + rho * v[1],
        u * v[1] + v[2] / rho,
        3.0 * p * v[1] + u * v[2] + v[3],
        -p * p / (rho * rho) * v[0] + 4.0 * h * v[1] - (h * h * ip * ip + p / rho) * v[2]
            + (u + 2.0 * h * ip) * v[3]
            + v[4],
        5.0 * k * v[1] - 2.0 * k * h * ip * ip * v[2] + 2.0 * k * ip * v[3] + u * v[4],
    ]
}

/// Auxiliary scalars (h/2p, a, b) entering the closed-form eigenvalues.
#[inline]
fn eigen_aux(a: &[f64; 5]) -> (f64, f64, f64) {
    let [rho, _, p, h, k] = *a;
    let s = h / (2.0 * p);
    let big_a = p / rho + k / p + s * s;
    let big_b = (k * k / (p * p) + k / rho).sqrt();
    (s, big_a, big_b)
}

#[inline]
pub fn eigenvalues_raw(a: &[f64; 5]) -> [f64; 5] {
    let u = a[1];
    let (s, big_a, big_b) = eigen_aux(a);
    let outer = (big_a + big_b).sqrt();
    let inner = (big_a - big_b).sqrt();
    [u + s - outer, u + s - inner, u, u + s + inner, u + s + outer]
}

pub fn eigenvalues(alpha: &PrimitiveState) -> Result<EigenStructure> {
    require_realizable(alpha)?;
    let a = alpha.to_array();
    let (_, a_aux, b_aux) = eigen_aux(&a);
    let lambda = eigenvalues_raw(&a);
    let rvec = lambda.map(|l| [1.0, l, l * l, l * l * l, l * l * l * l]);
    Ok(EigenStructure { lambda, rvec, a_aux, b_aux })
}

/// Spectral radius of the flux Jacobian, unchecked.
#[inline]
pub fn max_wave_speed_raw(a: &[f64; 5]) -> f64 {
    let (s, big_a, big_b) = eigen_aux(a);
    let outer = (big_a + big_b).sqrt();
    let shift = a[1] + s;
    (shift - outer).abs().max((shift + outer).abs())
}

pub fn max_wave_speed(alpha: &PrimitiveState) -> Result<f64> {
    require_realizable(alpha)?;
    Ok(max_wave_speed_raw(&alpha.to_array()))
}

/// ∇_q λ_ℓ · R_ℓ for each characteristic field, by central differences in the conserved variables.
pub fn linear_degeneracy_check(alpha: &PrimitiveState) -> Result<[f64; 5]> {
    let eig = eigenvalues(alpha)?;
    let q = crate::kinetic_state::moments_from_primitive(&alpha.to_array());
    let mut out = [0.0; 5];
    for (field, slot) in out.iter_mut().enumerate() {
        let mut dot = 0.0;
        for j in 0..5 {
            let step = 1e-5 * q[j].abs().max(1.0);
            let mut plus = q;
            let mut minus = q;
            plus[j] += step;
            minus[j] -= step;
            let lp = eigenvalues_raw(&primitive_from_moments(&plus))[field];
            let lm = eigenvalues_raw(&primitive_from_moments(&minus))[field];
            dot += (lp - lm) / (2.0 * step) * eig.rvec[field][j];
        }
        *slot = dot;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maxwellian() -> PrimitiveState {
        PrimitiveState::new(1.0, 0.0, 1.0, 0.0, 2.0)
    }

    fn skewed() -> PrimitiveState {
        PrimitiveState::new(2.0, 1.0, 2.0, 4.0, 6.0)
    }

    #[test]
    fn maxwellian_is_gauss_hermite() {
        let t = hyqmom_invert(&maxwellian()).unwrap();
        let s3 = 3f64.sqrt();
        assert!((t.w1 - 1.0 / 6.0).abs() < 1e-15 && (t.w3 - 1.0 / 6.0).abs() < 1e-15);
        assert!((t.w2 - 2.0 / 3.0).abs() < 1e-15);
        assert!((t.mu1 + s3).abs() < 1e-15 && (t.mu3 - s3).abs() < 1e-15);
        let m: Vec<f64> = (0..5).map(|n| t.moment(n)).collect();
        for (x, y) in m.iter().zip([1.0, 0.0, 1.0, 0.0, 3.0]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn skewed_inversion() {
        let t = hyqmom_invert(&skewed()).unwrap();
        let s5 = 5f64.sqrt();
        assert!((t.w1 + t.w3 - 0.5).abs() < 1e-15);
        assert!((t.w1 - 0.25 * (1.0 + 1.0 / s5)).abs() < 1e-15);
        assert!((t.mu1 - (2.0 - s5)).abs() < 1e-14 && (t.mu3 - (2.0 + s5)).abs() < 1e-14);
        for (n, target) in [2.0, 2.0, 4.0, 12.0, 46.0, 190.0].iter().enumerate() {
            assert!((t.moment(n as i32) - target).abs() < 1e-12 * target.abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_when_heat_flux_vanishes() {
        let t = hyqmom_invert(&PrimitiveState::new(0.7, 0.3, 1.9, 0.0, 0.4)).unwrap();
        assert!((t.w1 - t.w3).abs() < 1e-15);
        assert!(((t.mu1 + t.mu3) / 2.0 - 0.3).abs() < 1e-15);
    }

    #[test]
    fn closing_moment_values() {
        assert_eq!(closing_moment(&maxwellian()).unwrap(), 0.0);
        assert!((closing_moment(&skewed()).unwrap() - 190.0).abs() < 1e-12);
        assert!(closing_moment(&PrimitiveState::new(1.0, 0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn flux_values() {
        assert_eq!(flux(&ConservedMoments([1.0, 0.0, 1.0, 0.0, 3.0])).unwrap(), [0.0, 1.0, 0.0, 3.0, 0.0]);
        let f = flux(&ConservedMoments([2.0, 2.0, 4.0, 12.0, 46.0])).unwrap();
        for (x, y) in f.iter().zip([2.0, 4.0, 12.0, 46.0, 190.0]) {
            assert!((x - y).abs() < 1e-12 * y);
        }
    }

    #[test]
    fn jacobian_rows_at_maxwellian() {
        let b = primitive_jacobian(&maxwellian()).unwrap();
        assert_eq!(b[3], [-1.0, 0.0, -1.0, 0.0, 1.0]);
        assert_eq!(b[4], [0.0, 10.0, 0.0, 4.0, 0.0]);
    }

    #[test]
    fn jacobian_apply_matches_matrix() {
        let a = skewed().to_array();
        let b = primitive_jacobian_raw(&a);
        let v = [0.3, -1.2, 0.7, 2.0, -0.4];
        let direct = primitive_jacobian_apply(&a, &v);
        for i in 0..5 {
            let m: f64 = (0..5).map(|j| b[i][j] * v[j]).sum();
            assert!((m - direct[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn maxwellian_eigenvalues() {
        let e = eigenvalues(&maxwellian()).unwrap();
        let s6 = 6f64.sqrt();
        assert!((e.a_aux - 3.0).abs() < 1e-15 && (e.b_aux - s6).abs() < 1e-15);
        let outer = (3.0 + s6).sqrt();
        let inner = (3.0 - s6).sqrt();
        let expect = [-outer, -inner, 0.0, inner, outer];
        for (x, y) in e.lambda.iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((e.lambda[4] - 2.3344).abs() < 1e-4 && (e.lambda[3] - 0.7420).abs() < 1e-4);
        assert!((max_wave_speed(&maxwellian()).unwrap() - outer).abs() < 1e-15);
        let fast = PrimitiveState::new(1.0, 10.0, 1.0, 0.0, 2.0);
        assert!((max_wave_speed(&fast).unwrap() - (10.0 + outer)).abs() < 1e-13);
    }

    #[test]
    fn middle_field_is_linearly_degenerate() {
        let d = linear_degeneracy_check(&maxwellian()).unwrap();
        assert!(d[2].abs() < 1e-7);
        for l in [0, 1, 3, 4] {
            assert!(d[l].abs() > 1e-3, "field {l}: {}", d[l]);
        }
    }
}
