//! Finite-time (lifted) operators: convolution matrices, matrix-free
//! Toeplitz forms, and a largest-singular-value solver.
//!
//! The lifted form turns an LTI map over an N-sample record into an
//! N x N matrix, giving an exact finite-time oracle for frequency-domain
//! statements and a solver substrate for least-squares updates.

use crate::error::{CoreError, CoreResult};
use crate::filter::NoncausalFilter;
use crate::signal::check_sample_time;
use crate::transfer::TransferFunction;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dense N x N lifted operator with its sample time.
///
/// For a causal system the matrix is lower-triangular Toeplitz; for a
/// two-sided filter it is banded Toeplitz.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedOperator {
    matrix: DMatrix<f64>,
    sample_time: f64,
}

impl LiftedOperator {
    /// Lifts a causal rational system over an `n`-sample window: column k
    /// holds the impulse response shifted to sample k and truncated.
    pub fn from_transfer_function(sys: &TransferFunction, n: usize) -> CoreResult<Self> {
        if n == 0 {
            return Err(CoreError::InvalidParameter(
                "lifted window must contain at least one sample".into(),
            ));
        }
        let h = sys.impulse_response(n);
        let mut matrix = DMatrix::zeros(n, n);
        for col in 0..n {
            for row in col..n {
                matrix[(row, col)] = h[row - col];
            }
        }
        Ok(Self {
            matrix,
            sample_time: sys.sample_time(),
        })
    }

    /// Lifts a two-sided filter over an `n`-sample window: a banded
    /// Toeplitz matrix with the preview taps above the diagonal.
    pub fn from_filter(filter: &NoncausalFilter, n: usize) -> CoreResult<Self> {
        if n == 0 {
            return Err(CoreError::InvalidParameter(
                "lifted window must contain at least one sample".into(),
            ));
        }
        let mut matrix = DMatrix::zeros(n, n);
        for row in 0..n {
            for col in 0..n {
                matrix[(row, col)] = filter.tap_at_lag(row as i64 - col as i64);
            }
        }
        Ok(Self {
            matrix,
            sample_time: filter.sample_time(),
        })
    }

    /// Identity operator.
    pub fn identity(n: usize, sample_time: f64) -> CoreResult<Self> {
        check_sample_time(sample_time)?;
        Ok(Self {
            matrix: DMatrix::identity(n, n),
            sample_time,
        })
    }

    /// Wraps an explicit matrix.
    pub fn from_matrix(matrix: DMatrix<f64>, sample_time: f64) -> CoreResult<Self> {
        check_sample_time(sample_time)?;
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(CoreError::DimensionMismatch(
                "lifted operator must be square and nonempty".into(),
            ));
        }
        Ok(Self {
            matrix,
            sample_time,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (&self.matrix * v).data.into()
    }

    /// Largest singular value.
    pub fn sigma_max(&self) -> f64 {
        sigma_max_operator(&DenseOp::new(&self.matrix))
    }
}

/// Anything that can apply itself and its transpose to a vector.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);
}

/// Dense operator keeping the matrix and its transpose so both products
/// stream down contiguous columns.
pub struct DenseOp {
    a: DMatrix<f64>,
    at: DMatrix<f64>,
}

impl DenseOp {
    pub fn new(a: &DMatrix<f64>) -> Self {
        Self {
            a: a.clone(),
            at: a.transpose(),
        }
    }
}

fn column_products(m: &DMatrix<f64>, x: &[f64], y: &mut [f64]) {
    // y[i] = column_i(m) . x, parallel over output entries.
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = m.column(i).iter().zip(x).map(|(a, b)| a * b).sum();
        });
    }
    #[cfg(not(feature = "parallel"))]
    column_products_seq(m, x, y);
}

/// Sequential fallback for the dense column products.
pub fn column_products_seq(m: &DMatrix<f64>, x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = m.column(i).iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

impl LinearOp for DenseOp {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        column_products(&self.at, x, y);
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        column_products(&self.a, x, y);
    }
}

/// Matrix-free banded (or triangular) Toeplitz operator: entry (i, j) is
/// `taps[i - j - min_lag]`.
#[derive(Debug, Clone)]
pub struct ToeplitzOp {
    taps: Vec<f64>,
    min_lag: i64,
    n: usize,
}

impl ToeplitzOp {
    pub fn new(taps: Vec<f64>, min_lag: i64, n: usize) -> Self {
        Self { taps, min_lag, n }
    }

    /// Causal system truncated to the window: taps are the first `n`
    /// impulse response samples.
    pub fn from_transfer_function(sys: &TransferFunction, n: usize) -> Self {
        Self::new(sys.impulse_response(n), 0, n)
    }

    pub fn from_filter(filter: &NoncausalFilter, n: usize) -> Self {
        Self::new(filter.taps().to_vec(), -(filter.preview() as i64), n)
    }

    fn convolve(taps: &[f64], min_lag: i64, n: usize, x: &[f64], y: &mut [f64]) {
        let run = |i: usize| -> f64 {
            let mut acc = 0.0;
            for (k, &c) in taps.iter().enumerate() {
                let j = i as i64 - min_lag - k as i64;
                if j >= 0 && (j as usize) < n {
                    acc += c * x[j as usize];
                }
            }
            acc
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = run(i));
        }
        #[cfg(not(feature = "parallel"))]
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = run(i);
        }
    }
}

impl LinearOp for ToeplitzOp {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        Self::convolve(&self.taps, self.min_lag, self.n, x, y);
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let mut rev = self.taps.clone();
        rev.reverse();
        let min_lag = -(self.min_lag + self.taps.len() as i64 - 1);
        Self::convolve(&rev, min_lag, self.n, x, y);
    }
}

/// The product-of-truncations iteration operator Q_N (I - J_N L_N) in
/// matrix-free form. Unlike the composed-kernel Toeplitz matrix, this
/// form keeps the record-edge modes created by preview taps acting
/// before the window; useful for studying finite-record boundary
/// behavior.
pub struct ContractionOp {
    pub q: ToeplitzOp,
    pub j: ToeplitzOp,
    pub l: ToeplitzOp,
}

impl LinearOp for ContractionOp {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = x.len();
        let mut t1 = vec![0.0; n];
        let mut t2 = vec![0.0; n];
        self.l.apply(x, &mut t1);
        self.j.apply(&t1, &mut t2);
        for i in 0..n {
            t2[i] = x[i] - t2[i];
        }
        self.q.apply(&t2, y);
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let n = x.len();
        let mut t1 = vec![0.0; n];
        let mut t2 = vec![0.0; n];
        self.q.apply_transpose(x, &mut t1);
        self.j.apply_transpose(&t1, &mut t2);
        self.l.apply_transpose(&t2, y);
        for i in 0..n {
            y[i] = t1[i] - y[i];
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // Two rounds of classical Gram-Schmidt.
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
    }
}

fn bidiagonal_sigma_max(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let mut b = DMatrix::zeros(k, k);
    for i in 0..k {
        b[(i, i)] = alpha[i];
        if i + 1 < k {
            b[(i, i + 1)] = beta[i];
        }
    }
    b.singular_values()[0]
}

/// Largest singular value of a linear operator by Golub-Kahan-Lanczos
/// bidiagonalization with full reorthogonalization.
///
/// The estimate is monotonically nondecreasing in the iteration count and
/// converges from below; on invariant-subspace breakdown the solver
/// restarts with a fresh direction and keeps the running maximum. The
/// random start is seeded, so results are reproducible.
pub fn sigma_max_operator<O: LinearOp>(op: &O) -> f64 {
    let n = op.dim();
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x51_6d_61_78);
    let max_iter = n.min(700);
    let tol = 1e-8;
    let mut best = 0.0f64;

    for _restart in 0..3 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut us: Vec<Vec<f64>> = Vec::new();
        let mut vs: Vec<Vec<f64>> = Vec::new();
        orthogonalize(&mut v, &vs);
        let nv = norm(&v);
        if nv == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        vs.push(v.clone());

        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut u_prev: Vec<f64> = vec![0.0; n];
        let mut beta_prev = 0.0;
        let mut last_sigma = 0.0f64;
        let mut stale_checks = 0;
        let mut broke_down = false;

        for k in 0..max_iter {
            let mut u = vec![0.0; n];
            op.apply(vs.last().unwrap(), &mut u);
            for (ui, pi) in u.iter_mut().zip(&u_prev) {
                *ui -= beta_prev * pi;
            }
            orthogonalize(&mut u, &us);
            let a = norm(&u);
            if a <= 1e-14 * best.max(1.0) {
                broke_down = true;
                break;
            }
            u.iter_mut().for_each(|x| *x /= a);
            alpha.push(a);
            us.push(u.clone());

            let mut w = vec![0.0; n];
            op.apply_transpose(&u, &mut w);
            let v_last = vs.last().unwrap();
            for (wi, vi) in w.iter_mut().zip(v_last) {
                *wi -= a * vi;
            }
            orthogonalize(&mut w, &vs);
            let b = norm(&w);
            if b <= 1e-14 * best.max(1.0) {
                broke_down = true;
                break;
            }
            w.iter_mut().for_each(|x| *x /= b);
            beta.push(b);
            vs.push(w);
            u_prev = u;
            beta_prev = b;

            if k % 16 == 15 || k + 1 == max_iter {
                let sigma = bidiagonal_sigma_max(&alpha, &beta[..alpha.len() - 1]);
                if (sigma - last_sigma).abs() <= tol * sigma.max(1e-300) {
                    stale_checks += 1;
                    if stale_checks >= 2 {
                        last_sigma = sigma;
                        break;
                    }
                } else {
                    stale_checks = 0;
                }
                last_sigma = sigma;
            }
        }

        if !alpha.is_empty() {
            let sigma = bidiagonal_sigma_max(&alpha, &beta[..alpha.len().saturating_sub(1)]);
            best = best.max(sigma).max(last_sigma);
        }
        if !broke_down {
            // A full Krylov run explored enough of the space.
            break;
        }
    }
    best
}

/// Solves the lower-triangular (delayed) convolution `conv(h, f) = target`
/// for `f`, with the trailing `d` samples of `f` set to zero, where `d`
/// is the input-output delay of `h`.
///
/// The first `d` target samples must vanish; otherwise no causal solution
/// exists over the record.
pub fn solve_convolution(h: &[f64], target: &[f64]) -> CoreResult<Vec<f64>> {
    let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(CoreError::InvalidParameter(
            "impulse response is identically zero".into(),
        ));
    }
    let d = h
        .iter()
        .position(|v| v.abs() > 1e-12 * peak)
        .expect("nonzero response");
    let n = target.len();
    let t_peak = target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for &t in target.iter().take(d.min(n)) {
        if t.abs() > 1e-9 * t_peak.max(1e-300) {
            return Err(CoreError::InvalidParameter(format!(
                "target has energy inside the {d}-sample input-output delay"
            )));
        }
    }
    let mut f = vec![0.0; n];
    for k in 0..n.saturating_sub(d) {
        let mut acc = target[k + d];
        for (i, fi) in f.iter().enumerate().take(k) {
            let lag = k + d - i;
            if lag < h.len() {
                acc -= h[lag] * fi;
            }
        }
        f[k] = acc / h[d];
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Signal;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const TS: f64 = 1e-3;

    #[test]
    fn identity_system_lifts_to_identity() {
        let sys = TransferFunction::gain(1.0, TS).unwrap();
        let j = LiftedOperator::from_transfer_function(&sys, 4).unwrap();
        assert_eq!(j.matrix(), &DMatrix::identity(4, 4));
    }

    #[test]
    fn unit_delay_lifts_to_subdiagonal() {
        let sys = TransferFunction::delay(1, TS).unwrap();
        let j = LiftedOperator::from_transfer_function(&sys, 3).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected[(1, 0)] = 1.0;
        expected[(2, 1)] = 1.0;
        assert_eq!(j.matrix(), &expected);
    }

    #[test]
    fn preview_filter_lifts_to_superdiagonal() {
        let f = NoncausalFilter::preview_shift(1, TS);
        let j = LiftedOperator::from_filter(&f, 3).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected[(0, 1)] = 1.0;
        expected[(1, 2)] = 1.0;
        assert_eq!(j.matrix(), &expected);
    }

    #[test]
    fn simulation_matches_lifted_product() {
        let sys = TransferFunction::new(vec![0.0, 0.7, -0.2], vec![1.0, -0.9, 0.25], TS).unwrap();
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let j = LiftedOperator::from_transfer_function(&sys, n).unwrap();
        let by_matrix = j.apply(&u);
        let by_sim = sys.simulate(&Signal::new(u, TS).unwrap()).unwrap();
        for (a, b) in by_matrix.iter().zip(by_sim.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn filter_application_matches_lifted_product() {
        let f = NoncausalFilter::new(vec![0.2, -0.5, 1.0, 0.3, 0.1], 2, TS).unwrap();
        let n = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let j = LiftedOperator::from_filter(&f, n).unwrap();
        let by_matrix = j.apply(&x);
        let by_filter = f.apply_slice(&x);
        for (a, b) in by_matrix.iter().zip(by_filter.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn toeplitz_matches_dense_both_directions() {
        let f = NoncausalFilter::new(vec![0.4, 1.0, -0.3], 1, TS).unwrap();
        let n = 40;
        let dense = LiftedOperator::from_filter(&f, n).unwrap();
        let toe = ToeplitzOp::from_filter(&f, n);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut y1 = vec![0.0; n];
        toe.apply(&x, &mut y1);
        let y2 = dense.apply(&x);
        for (a, b) in y1.iter().zip(&y2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let mut y3 = vec![0.0; n];
        toe.apply_transpose(&x, &mut y3);
        let y4 = dense.matrix().transpose() * nalgebra::DVector::from_column_slice(&x);
        for (a, b) in y3.iter().zip(y4.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn sigma_max_agrees_with_full_svd_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [5, 23, 64] {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let reference = m.clone().singular_values()[0];
            let estimate = sigma_max_operator(&DenseOp::new(&m));
            assert_relative_eq!(estimate, reference, max_relative = 1e-7);
        }
    }

    #[test]
    fn sigma_max_handles_identity_breakdown() {
        let m = DMatrix::<f64>::identity(50, 50);
        let estimate = sigma_max_operator(&DenseOp::new(&m));
        assert_relative_eq!(estimate, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn solve_convolution_inverts_simulation() {
        let sys = TransferFunction::new(vec![0.0, 0.5, 0.2], vec![1.0, -0.8], TS).unwrap();
        let n = 200;
        // Target with the required one-sample delay of leading zeros.
        let mut target = vec![0.0; n];
        for (k, t) in target.iter_mut().enumerate().skip(1) {
            *t = ((k as f64) * 0.05).sin();
        }
        let h = sys.impulse_response(n);
        let f = solve_convolution(&h, &target).unwrap();
        let achieved = sys.simulate(&Signal::new(f, TS).unwrap()).unwrap();
        for (a, b) in achieved.samples().iter().zip(&target) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }
}
