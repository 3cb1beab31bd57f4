use crate::scalar::Scalar;

/// In-place Cholesky factorisation of a symmetric positive definite
/// row-major `n × n` matrix (lower triangle). Returns `false` when a pivot
/// is not positive.
pub(crate) fn cholesky<S: Scalar>(a: &mut [S], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > S::zero()) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` given the factor from [`cholesky`]; `b` is overwritten.
pub(crate) fn cholesky_solve<S: Scalar>(l: &[S], n: usize, b: &mut [S]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves a symmetric positive (semi)definite system, adding a growing
/// diagonal jitter if the plain factorisation fails.
pub(crate) fn solve_spd<S: Scalar>(a: &[S], n: usize, b: &[S]) -> Option<Vec<S>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(S::zero(), S::max).max(S::one());
    let mut jitter = S::zero();
    for _ in 0..8 {
        let mut f = a.to_vec();
        for i in 0..n {
            f[i * n + i] += jitter;
        }
        if cholesky(&mut f, n) {
            let mut x = b.to_vec();
            cholesky_solve(&f, n, &mut x);
            return Some(x);
        }
        jitter = if jitter == S::zero() { scale * S::epsilon() * S::of(16.0) } else { jitter * S::of(100.0) };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x_true[j]).sum()).collect();
        let x = solve_spd(&a, 3, &b).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_gets_jitter() {
        let a = [1.0f64, 1.0, 1.0, 1.0];
        let x = solve_spd(&a, 2, &[2.0, 2.0]).unwrap();
        assert!((x[0] + x[1] - 2.0).abs() < 1e-6);
    }
}
