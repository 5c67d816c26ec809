//! Classical QMOM inversion and numerical checks of its weak hyperbolicity.
//!
//! The N-node QMOM system closes M_{2N} with the quadrature. Its flux Jacobian has every
//! abscissa as a double eigenvalue with a single eigenvector, and every field is linearly
//! degenerate. The routines here assemble the relevant matrices so these facts can be checked.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DiracQuadrature {
    pub weights: Vec<f64>,
    pub abscissas: Vec<f64>,
}

/// Coefficients a_0..a_{2N−1} of the Hermite interpolant of v^{2N} through the abscissas.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureCoefficients {
    pub a: Vec<f64>,
}

impl ClosureCoefficients {
    pub fn eval(&self, v: f64) -> f64 {
        self.a.iter().rev().fold(0.0, |acc, c| acc * v + c)
    }

    pub fn eval_derivative(&self, v: f64) -> f64 {
        self.a.iter().enumerate().skip(1).rev().fold(0.0, |acc, (j, c)| acc * v + j as f64 * c)
    }
}

impl DiracQuadrature {
    pub fn new(weights: Vec<f64>, abscissas: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != abscissas.len() {
            return Err(Error::InvalidState("weights and abscissas must be nonempty and equal length".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidState(format!("weights must be positive: {weights:?}")));
        }
        if abscissas.windows(2).any(|p| !(p[0] < p[1])) || abscissas.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidState(format!("abscissas must be finite and increasing: {abscissas:?}")));
        }
        Ok(DiracQuadrature { weights, abscissas })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn moment(&self, order: i32) -> f64 {
        self.weights.iter().zip(&self.abscissas).map(|(w, x)| w * x.powi(order)).sum()
    }

    fn check_spread(&self) -> Result<()> {
        let scale = self.abscissas.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        if let Some(gap) = self.abscissas.windows(2).map(|p| p[1] - p[0]).reduce(f64::min) {
            if gap < 1e-6 * scale {
                return Err(Error::IllConditioned(format!("abscissa gap {gap:e} relative to scale {scale:e}")));
            }
        }
        Ok(())
    }
}

/// Two-node inversion of M0..M3.
pub fn qmom_invert_n2(m: [f64; 4]) -> Result<DiracQuadrature> {
    let rho = m[0];
    if !(rho > 0.0) {
        return Err(Error::InvalidState(format!("nonpositive density {rho}")));
    }
    let u = m[1] / rho;
    let p = m[2] - m[1] * u;
    if !(p > 0.0) {
        return Err(Error::InvalidState(format!("nonpositive pressure {p}")));
    }
    let h = m[3] - 3.0 * u * m[2] + 2.0 * u * u * m[1];
    let s = h / (2.0 * p);
    let root = (p / rho + s * s).sqrt();
    DiracQuadrature::new(
        vec![0.5 * rho * (1.0 + s / root), 0.5 * rho * (1.0 - s / root)],
        vec![u + s - root, u + s + root],
    )
}

fn solve(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<Vec<f64>> {
    let x = matrix.lu().solve(&rhs).ok_or_else(|| Error::IllConditioned("singular system".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned("non-finite solution".into()));
    }
    Ok(x.iter().copied().collect())
}

pub fn hermite_closure_coeffs(qd: &DiracQuadrature) -> Result<ClosureCoefficients> {
    qd.check_spread()?;
    let n = qd.n();
    let dim = 2 * n;
    let mut m = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (l, &mu) in qd.abscissas.iter().enumerate() {
        for j in 0..dim {
            m[(l, j)] = mu.powi(j as i32);
            if j > 0 {
                m[(n + l, j)] = j as f64 * mu.powi(j as i32 - 1);
            }
        }
        rhs[l] = mu.powi(dim as i32);
        rhs[n + l] = dim as f64 * mu.powi(dim as i32 - 1);
    }
    Ok(ClosureCoefficients { a: solve(m, rhs)? })
}

/// Companion-form flux Jacobian of the N-node QMOM system.
pub fn qmom_flux_jacobian(qd: &DiracQuadrature) -> Result<DMatrix<f64>> {
    let coeffs = hermite_closure_coeffs(qd)?;
    let dim = 2 * qd.n();
    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..dim - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..dim {
        a[(dim - 1, j)] = coeffs.a[j];
    }
    Ok(a)
}

/// Gradient of abscissa `ell` (1-based) with respect to the moments M0..M_{2N−1}.
pub fn moment_gradient_abscissa(qd: &DiracQuadrature, ell: usize) -> Result<Vec<f64>> {
    let n = qd.n();
    if ell == 0 || ell > n {
        return Err(Error::InvalidState(format!("abscissa index {ell} outside 1..={n}")));
    }
    qd.check_spread()?;
    let dim = 2 * n;
    // rows: derivatives of M_s with respect to each weight, then each abscissa
    let mut b = DMatrix::zeros(dim, dim);
    for (j, (&w, &mu)) in qd.weights.iter().zip(&qd.abscissas).enumerate() {
        for s in 0..dim {
            b[(j, s)] = mu.powi(s as i32);
            if s > 0 {
                b[(n + j, s)] = s as f64 * w * mu.powi(s as i32 - 1);
            }
        }
    }
    let mut e = DVector::zeros(dim);
    e[n + ell - 1] = 1.0;
    solve(b, e)
}

/// Characteristic polynomial coefficients (ascending powers, monic) by Faddeev-LeVerrier.
pub fn characteristic_polynomial(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * c[n + 1 - k];
        c[n - k] = -(a * &m).trace() / k as f64;
    }
    c
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct WeakHyperbolicityReport {
    pub n: usize,
    /// Largest coefficient mismatch between det(vI − A) and Π(v − μ)², scaled by max(1, |coefficient|).
    pub charpoly_error: f64,
    /// Number of singular values of A − μℓ I below 1e-8‖A‖, per abscissa.
    pub geometric_multiplicity: Vec<usize>,
    /// |b·Rℓ| / (‖b‖‖Rℓ‖) per abscissa.
    pub degeneracy: Vec<f64>,
}

impl WeakHyperbolicityReport {
    pub fn passes(&self) -> bool {
        self.charpoly_error < 1e-8
            && self.geometric_multiplicity.iter().all(|&g| g == 1)
            && self.degeneracy.iter().all(|&d| d < 1e-10)
    }
}

pub fn weak_hyperbolicity_report(qd: &DiracQuadrature) -> Result<WeakHyperbolicityReport> {
    let a = qmom_flux_jacobian(qd)?;
    let dim = a.nrows();
    let computed = characteristic_polynomial(&a);
    let mut expected = vec![1.0];
    for &mu in &qd.abscissas {
        expected = poly_mul(&expected, &[-mu, 1.0]);
        expected = poly_mul(&expected, &[-mu, 1.0]);
    }
    let charpoly_error =
        computed.iter().zip(&expected).map(|(c, e)| (c - e).abs() / e.abs().max(1.0)).fold(0.0, f64::max);

    let scale = a.norm();
    let mut geometric_multiplicity = Vec::with_capacity(qd.n());
    let mut degeneracy = Vec::with_capacity(qd.n());
    for (l, &mu) in qd.abscissas.iter().enumerate() {
        let shifted = &a - DMatrix::identity(dim, dim) * mu;
        let sv = shifted.singular_values();
        geometric_multiplicity.push(sv.iter().filter(|s| **s < 1e-8 * scale).count());
        let b = moment_gradient_abscissa(qd, l + 1)?;
        let r: Vec<f64> = (0..dim).map(|s| mu.powi(s as i32)).collect();
        let dot: f64 = b.iter().zip(&r).map(|(x, y)| x * y).sum();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nr = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        degeneracy.push(dot.abs() / (nb * nr));
    }
    Ok(WeakHyperbolicityReport { n: qd.n(), charpoly_error, geometric_multiplicity, degeneracy })
}

/// Random well-separated quadrature: abscissas in [−2, 2] at least 0.25 apart, weights in [0.2, 1].
pub fn random_dirac_quadrature(rng: &mut impl Rng, n: usize) -> DiracQuadrature {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        x.sort_by(|a, b| a.total_cmp(b));
        if x.windows(2).all(|p| p[1] - p[0] > 0.25) {
            let w = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
            return DiracQuadrature::new(w, x).expect("sampled quadrature is valid");
        }
    }
}

/// Plain-text table of the weak-hyperbolicity checks for `count` random quadratures per node count.
pub fn report_table(rng: &mut impl Rng, counts: &[usize], samples: usize) -> Result<(String, bool)> {
    let mut out = String::from("    N  samples  max charpoly err  geom mult  max |b.R|/(|b||R|)  status\n");
    let mut all_pass = true;
    for &n in counts {
        let mut worst_poly = 0.0_f64;
        let mut worst_dot = 0.0_f64;
        let mut mult_ok = true;
        let mut pass = true;
        for _ in 0..samples {
            let rep = weak_hyperbolicity_report(&random_dirac_quadrature(rng, n))?;
            worst_poly = worst_poly.max(rep.charpoly_error);
            worst_dot = rep.degeneracy.iter().fold(worst_dot, |m, d| m.max(*d));
            mult_ok &= rep.geometric_multiplicity.iter().all(|&g| g == 1);
            pass &= rep.passes();
        }
        all_pass &= pass;
        out.push_str(&format!(
            "{:>5}  {:>7}  {:>16.3e}  {:>9}  {:>19.3e}  {}\n",
            n,
            samples,
            worst_poly,
            if mult_ok { "1" } else { "!=1" },
            worst_dot,
            if pass { "ok" } else { "FAIL" }
        ));
    }
    Ok((out, all_pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_two_node_inversion() {
        let qd = qmom_invert_n2([1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(qd.weights, vec![0.5, 0.5]);
        assert_eq!(qd.abscissas, vec![-1.0, 1.0]);
    }

    #[test]
    fn skewed_two_node_inversion() {
        // (2, 2, 6, 18): u = 1, p = 4, h = 4, nodes at 0 and 3 with weights 4/3 and 2/3
        let qd = qmom_invert_n2([2.0, 2.0, 6.0, 18.0]).unwrap();
        assert!(qd.abscissas[0].abs() < 1e-15 && (qd.abscissas[1] - 3.0).abs() < 1e-15);
        assert!((qd.weights[0] - 4.0 / 3.0).abs() < 1e-15 && (qd.weights[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn closure_coefficients_small_cases() {
        let qd = DiracQuadrature::new(vec![0.5, 0.5], vec![-1.0, 1.0]).unwrap();
        let c = hermite_closure_coeffs(&qd).unwrap();
        for (x, y) in c.a.iter().zip([-1.0, 0.0, 2.0, 0.0]) {
            assert!((x - y).abs() < 1e-14);
        }
        let one = DiracQuadrature::new(vec![1.0], vec![0.7]).unwrap();
        let c = hermite_closure_coeffs(&one).unwrap();
        assert!((c.a[0] + 0.49).abs() < 1e-15 && (c.a[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn near_coincident_nodes_are_rejected() {
        let qd = DiracQuadrature::new(vec![0.5, 0.5], vec![1.0, 1.0 + 1e-9]).unwrap();
        assert!(matches!(hermite_closure_coeffs(&qd), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn companion_matrix_and_gradient() {
        let qd = DiracQuadrature::new(vec![0.5, 0.5], vec![-1.0, 1.0]).unwrap();
        let a = qmom_flux_jacobian(&qd).unwrap();
        let row: Vec<f64> = (0..4).map(|j| a[(3, j)]).collect();
        assert!(row.iter().zip([-1.0, 0.0, 2.0, 0.0]).all(|(x, y)| (x - y).abs() < 1e-14));
        let cp = characteristic_polynomial(&a);
        for (x, y) in cp.iter().zip([1.0, 0.0, -2.0, 0.0, 1.0]) {
            assert!((x - y).abs() < 1e-13);
        }
        let b = moment_gradient_abscissa(&qd, 2).unwrap();
        for (x, y) in b.iter().zip([-0.5, -0.5, 0.5, 0.5]) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
