//! Exact cylinder formulas: the Chebyshev variant Ch_n with
//! Ch_n(a + 1/a) = a^n + a^{-n}, the wired-cylinder partition function, the
//! loop-count probability generating function and its infinite-cylinder
//! limit, and the curved-cylinder determinant ratio via tridiagonal blocks.

use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClosedFormError {
    #[error("tau must be positive, got {0}")]
    NonpositiveTau(f64),
    #[error("cylinder dimensions too small: n >= 3 and m >= 1 required, got n={0} m={1}")]
    BadDimensions(usize, usize),
}

/// Ch_n(x). Stable: trigonometric form on |x| <= 2, hyperbolic form
/// outside. Overflows to infinity for very large n |x|; use `log_cheb` for
/// products.
pub fn cheb(n: u32, x: f64) -> f64 {
    if x.abs() <= 2.0 {
        let phi = (x / 2.0).clamp(-1.0, 1.0).acos();
        2.0 * (n as f64 * phi).cos()
    } else {
        let beta = (x.abs() / 2.0).acosh();
        let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        sign * 2.0 * (n as f64 * beta).cosh()
    }
}

/// (log |Ch_n(x)|, sign) for x with |x| > 2, where Ch_n grows like e^{n beta}:
/// log Ch_n = n beta + log1p(e^{-2 n beta}).
pub fn log_cheb(n: u32, x: f64) -> (f64, f64) {
    assert!(x.abs() > 2.0, "log form only valid outside [-2, 2]");
    let beta = (x.abs() / 2.0).acosh();
    let nb = n as f64 * beta;
    let log_abs = nb + (-2.0 * nb).exp().ln_1p();
    let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    (log_abs, sign)
}

/// The spectral abscissas of the wired cylinder of height m:
/// x_j = 4 - 2 cos(pi j / (m+1)), j = 1..m; all strictly greater than 2.
fn spectral_points(m: usize) -> impl Iterator<Item = f64> {
    (1..=m).map(move |j| 4.0 - 2.0 * (PI * j as f64 / (m + 1) as f64).cos())
}

/// log Z(z) for the wired cylinder of circumference n and height m with a
/// flat connection of boundary monodromy z (|z| = 1):
/// Z(z) = prod_j (Ch_n(x_j) - 2 Re z), each factor positive.
pub fn wired_cylinder_log_z(n: usize, m: usize, re_z: f64) -> Result<f64, ClosedFormError> {
    if n < 3 || m < 1 {
        return Err(ClosedFormError::BadDimensions(n, m));
    }
    let n32 = n as u32;
    let mut log_z = 0.0;
    for x in spectral_points(m) {
        let beta = (x / 2.0).acosh();
        let nb = n32 as f64 * beta;
        // Ch_n(x) - 2 Re z = e^{n beta} (1 + e^{-2 n beta} - 2 Re z e^{-n beta})
        log_z += nb + ((-2.0 * nb).exp() - 2.0 * re_z * (-nb).exp()).ln_1p();
    }
    Ok(log_z)
}

/// Probability generating function of the number of noncontractible loops
/// of the uniform incompressible essential CRSF on the wired cylinder:
/// coefficients of prod_j (A_j - 2 + X)/(A_j - 1) with A_j = Ch_n(x_j).
/// Each factor is normalized, so the coefficients are exact probabilities
/// summing to 1 with no overflow for any n.
pub fn wired_cylinder_loop_pgf(n: usize, m: usize) -> Result<Vec<f64>, ClosedFormError> {
    if n < 3 || m < 1 {
        return Err(ClosedFormError::BadDimensions(n, m));
    }
    let mut coeffs = vec![1.0f64];
    for x in spectral_points(m) {
        let (log_a, _) = log_cheb(n as u32, x);
        // q = 1/(A-1), p = (A-2)/(A-1) = 1 - q, computed from log A
        let ea = (-log_a).exp();
        let q = ea / (1.0 - ea);
        let p = 1.0 - q;
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] += p * c;
            next[k + 1] += q * c;
        }
        coeffs = next;
    }
    Ok(coeffs)
}

/// Evaluates a coefficient vector at X = x.
pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Truncation depth certifying a product tail below 1e-14: the j-th factor
/// deviates from 1 by at most |X - 1| e^{-pi tau j} (up to a constant).
pub fn p_tau_terms(tau: f64, x: f64) -> usize {
    let dev = (x - 1.0).abs().max(1.0);
    let per = PI * tau;
    let mut j = 1usize;
    // geometric tail: dev * e^{-per j} / (1 - e^{-per}) < 1e-14
    let tail_const = dev / (1.0 - (-per).exp());
    while tail_const * (-per * j as f64).exp() >= 1e-14 {
        j += 1;
        if j > 10_000_000 {
            break;
        }
    }
    j
}

/// Infinite-cylinder limit of the loop-count generating function:
/// p_tau(X) = prod_{j>=1} (q^j + q^{-j} - 2 + X)/(q^j + q^{-j} - 1) with
/// q = e^{pi tau}, truncated at `terms` factors.
pub fn p_tau(tau: f64, x: f64, terms: usize) -> Result<f64, ClosedFormError> {
    if !(tau > 0.0) {
        return Err(ClosedFormError::NonpositiveTau(tau));
    }
    let mut log_p = 0.0;
    for j in 1..=terms {
        let c = 2.0 * (PI * tau * j as f64).cosh(); // q^j + q^{-j}
        // factor = 1 + (x - 1)/(c - 1)
        log_p += ((x - 1.0) / (c - 1.0)).ln_1p();
    }
    Ok(log_p.exp())
}

/// p_tau with an automatically certified truncation depth.
pub fn p_tau_auto(tau: f64, x: f64) -> Result<f64, ClosedFormError> {
    if !(tau > 0.0) {
        return Err(ClosedFormError::NonpositiveTau(tau));
    }
    p_tau(tau, x, p_tau_terms(tau, x))
}

/// log-determinant of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal entries -1, by the three-term recurrence with
/// running rescaling. The matrices used here are positive definite.
fn logdet_tridiag(diag: &[f64]) -> f64 {
    let mut log_scale = 0.0f64;
    let mut prev = 1.0f64; // d_{k-1}
    let mut cur = diag[0]; // d_k
    for &a in &diag[1..] {
        let next = a * cur - prev;
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e150 {
            log_scale += m.ln();
            cur /= m;
            prev /= m;
        }
    }
    log_scale + cur.ln()
}

/// Determinant ratio Z_Phi / Z_I on the wired n x n cylinder carrying face
/// monodromy e^{i phi} with phi = c/n^2 (total curvature c), computed from
/// the n translation-eigenspace blocks: tridiagonal with diagonal
/// 4 - 2 cos(theta_k + (j-1) phi), theta_k = 2 pi k / n, j = 1..n.
pub fn curved_cylinder_ratio(n: usize, c: f64) -> Result<f64, ClosedFormError> {
    if n < 4 {
        return Err(ClosedFormError::BadDimensions(n, 1));
    }
    let phi = c / (n as f64 * n as f64);
    let mut log_ratio = 0.0;
    let mut diag = vec![0.0f64; n];
    for k in 0..n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        for j in 0..n {
            diag[j] = 4.0 - 2.0 * (theta + j as f64 * phi).cos();
        }
        let with = logdet_tridiag(&diag);
        for j in 0..n {
            diag[j] = 4.0 - 2.0 * theta.cos();
        }
        log_ratio += with - logdet_tridiag(&diag);
    }
    Ok(log_ratio.exp())
}

/// Same block product as `curved_cylinder_ratio` but returning the raw log
/// determinant of Delta_Phi for cross-checking against the assembled 2D
/// matrix.
pub fn curved_cylinder_log_det(n: usize, c: f64) -> Result<f64, ClosedFormError> {
    if n < 4 {
        return Err(ClosedFormError::BadDimensions(n, 1));
    }
    let phi = c / (n as f64 * n as f64);
    let mut log_det = 0.0;
    let mut diag = vec![0.0f64; n];
    for k in 0..n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        for j in 0..n {
            diag[j] = 4.0 - 2.0 * (theta + j as f64 * phi).cos();
        }
        log_det += logdet_tridiag(&diag);
    }
    Ok(log_det)
}
