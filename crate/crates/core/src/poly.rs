//! Polynomial helpers for rational systems in the delay operator.
//!
//! Coefficient vectors are ascending in the delay power: index k holds the
//! coefficient of z^{-k}.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Convolution of two coefficient vectors (polynomial product).
pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Coefficient-wise sum, aligning lengths.
pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] += bi;
    }
    out
}

/// Removes trailing coefficients that are exactly zero, keeping at least
/// one entry.
pub(crate) fn trim(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }
    coeffs
}

/// Evaluates the polynomial at a complex argument (Horner).
pub(crate) fn eval(coeffs: &[f64], w: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * w + c;
    }
    acc
}

/// Exact deconvolution: the quotient q with conv(divisor, q) = dividend,
/// requiring divisor[0] != 0. Returns `None` when the division leaves a
/// significant remainder.
pub(crate) fn div_exact(dividend: &[f64], divisor: &[f64]) -> Option<Vec<f64>> {
    let divisor = trim(divisor.to_vec());
    if divisor[0] == 0.0 || dividend.len() < divisor.len() {
        return None;
    }
    let qlen = dividend.len() - divisor.len() + 1;
    let mut q = vec![0.0; qlen];
    for k in 0..qlen {
        let mut acc = dividend[k];
        for i in 1..divisor.len().min(k + 1) {
            acc -= divisor[i] * q[k - i];
        }
        q[k] = acc / divisor[0];
    }
    // Remainder check: reconstruct and compare the tail.
    let back = mul(&divisor, &q);
    let scale = dividend.iter().fold(1e-300f64, |m, c| m.max(c.abs()));
    for (a, b) in back.iter().zip(dividend.iter()) {
        if (a - b).abs() > 1e-8 * scale {
            return None;
        }
    }
    Some(q)
}

/// Roots of the polynomial via the companion-matrix eigenvalues.
///
/// Trailing zero coefficients are dropped first; leading zero coefficients
/// contribute roots at the origin, which are returned as such.
pub(crate) fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let c = trim(coeffs.to_vec());
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    // Factor out roots at the origin (leading zeros in ascending order).
    let lead_zeros = c.iter().take_while(|&&x| x == 0.0).count();
    let mut out = vec![Complex64::new(0.0, 0.0); lead_zeros];
    let reduced = &c[lead_zeros..];
    let m = reduced.len() - 1;
    if m == 0 {
        return out;
    }
    let top = reduced[m];
    let mut companion = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        companion[(i, m - 1)] = -reduced[i] / top;
        if i + 1 < m {
            companion[(i + 1, i)] = 1.0;
        }
    }
    out.extend(companion.complex_eigenvalues().iter().copied());
    out
}
