//! Primitive and conserved representations of the five-moment state.

use crate::error::{Error, Functional, Result};

/// Default floor used by realizability checks and the positivity limiters.
pub const DEFAULT_FLOOR: f64 = 1e-14;

/// Primitive fields at a point: density, velocity, pressure, heat flux, modified kurtosis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub h: f64,
    pub k: f64,
}

/// Raw velocity moments M0..M4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedMoments(pub [f64; 5]);

/// Standardized third and fourth moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedMoments {
    pub m3t: f64,
    pub m4t: f64,
}

impl PrimitiveState {
    pub fn new(rho: f64, u: f64, p: f64, h: f64, k: f64) -> Self {
        PrimitiveState { rho, u, p, h, k }
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        PrimitiveState::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.rho, self.u, self.p, self.h, self.k]
    }

    /// Central fourth moment r = p²/ρ + h²/p + k.
    pub fn r(&self) -> f64 {
        self.p * self.p / self.rho + self.h * self.h / self.p + self.k
    }

    pub fn temperature(&self) -> f64 {
        self.p / self.rho
    }

    pub fn is_realizable(&self, floor: f64) -> bool {
        self.rho > floor && self.p > floor && self.k > floor
    }

    /// Returns the first of density, pressure, kurtosis that is not above `floor`.
    pub fn check_realizable(&self, floor: f64) -> Result<()> {
        if !(self.rho > floor) {
            return Err(Error::NotRealizable { functional: Functional::Density, value: self.rho });
        }
        if !(self.p > floor) {
            return Err(Error::NotRealizable { functional: Functional::Pressure, value: self.p });
        }
        if !(self.k > floor) {
            return Err(Error::NotRealizable { functional: Functional::Kurtosis, value: self.k });
        }
        Ok(())
    }
}

/// Raw moments from primitive fields without any checks.
#[inline]
pub fn moments_from_primitive(a: &[f64; 5]) -> [f64; 5] {
    let [rho, u, p, h, k] = *a;
    let r = p * p / rho + h * h / p + k;
    let u2 = u * u;
    [rho, rho * u, rho * u2 + p, rho * u2 * u + 3.0 * p * u + h, rho * u2 * u2 + 6.0 * p * u2 + 4.0 * h * u + r]
}

/// Primitive fields from raw moments without any checks.
#[inline]
pub fn primitive_from_moments(m: &[f64; 5]) -> [f64; 5] {
    let rho = m[0];
    let u = m[1] / rho;
    let p = m[2] - m[1] * u;
    // central moments by the binomial relation
    let h = m[3] - 3.0 * u * m[2] + 2.0 * u * u * m[1];
    let u2 = u * u;
    let c4 = m[4] - 4.0 * u * m[3] + 6.0 * u2 * m[2] - 3.0 * u2 * u * m[1];
    let k = c4 - p * p / rho - h * h / p;
    [rho, u, p, h, k]
}

pub fn primitive_to_conserved(alpha: &PrimitiveState) -> Result<ConservedMoments> {
    let a = alpha.to_array();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite primitive fields {a:?}")));
    }
    if alpha.p == 0.0 || alpha.rho == 0.0 {
        return Err(Error::Degenerate("zero density or pressure makes r singular"));
    }
    let m = moments_from_primitive(&a);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("moments overflow for {a:?}")));
    }
    Ok(ConservedMoments(m))
}

pub fn conserved_to_primitive(q: &ConservedMoments) -> Result<PrimitiveState> {
    let m = q.0;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite moments {m:?}")));
    }
    if !(m[0] > 0.0) {
        return Err(Error::NotRealizable { functional: Functional::Density, value: m[0] });
    }
    let a = primitive_from_moments(&m);
    if !(a[2] > 0.0) {
        return Err(Error::NotRealizable { functional: Functional::Pressure, value: a[2] });
    }
    Ok(PrimitiveState::from_array(a))
}

/// The density, pressure and modified-kurtosis functionals of the raw moments.
pub fn convex_functionals(q: &ConservedMoments) -> Result<(f64, f64, f64)> {
    let [q1, q2, q3, q4, q5] = q.0;
    if q1 == 0.0 {
        return Err(Error::Degenerate("zero density in pressure functional"));
    }
    let den = q2 * q2 - q1 * q3;
    if den == 0.0 {
        return Err(Error::Degenerate("zero pressure in kurtosis functional"));
    }
    let c_p = q3 - q2 * q2 / q1;
    let num = q3 * q3 * q3 - 2.0 * q2 * q3 * q4 + q1 * q4 * q4 + q2 * q2 * q5 - q1 * q3 * q5;
    Ok((q1, c_p, num / den))
}

/// Pressure functional without checks; used inside limiters.
#[inline]
pub fn pressure_of(m: &[f64; 5]) -> f64 {
    m[2] - m[1] * m[1] / m[0]
}

/// Kurtosis functional without checks; used inside limiters.
#[inline]
pub fn kurtosis_of(m: &[f64; 5]) -> f64 {
    primitive_from_moments(m)[4]
}

pub fn normalized_moments(q: &ConservedMoments) -> Result<NormalizedMoments> {
    let a = conserved_to_primitive(q)?;
    let t = a.temperature();
    Ok(NormalizedMoments { m3t: a.h / (a.rho * t.powf(1.5)), m4t: a.r() / (a.rho * t * t) })
}

/// Hankel determinants of the standardized moment sequence (1, 0, 1, M̃3, M̃4).
pub fn hankel_determinants(nm: &NormalizedMoments) -> (f64, f64, f64) {
    (1.0, 1.0, nm.m4t - nm.m3t * nm.m3t - 1.0)
}
