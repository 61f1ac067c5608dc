//! Small dense symmetric solves for Newton steps. Model dimensions here are
//! a handful of coefficients, so an unblocked Cholesky is plenty.

/// Solves `A x = b` for symmetric positive definite `A` (row-major `n x n`),
/// overwriting `b` with the solution. Returns false when a pivot collapses,
/// which callers treat as a singular information/design matrix.
pub(crate) fn solve_spd_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    if n == 0 {
        return true;
    }
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0f64, f64::max);
    if max_diag == 0.0 {
        return false;
    }
    let tol = max_diag * 1e-13;
    // In-place Cholesky: A = L L^T, L stored in the lower triangle.
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= tol {
            return false;
        }
        let l_jj = d.sqrt();
        a[j * n + j] = l_jj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / l_jj;
        }
    }
    // Forward solve L y = b.
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    // Back solve L^T x = y.
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    true
}

/// Solves `A x = b` allowing a ridge fallback: when the plain solve fails,
/// retries with `A + eps I` for growing `eps`. Returns false only when even
/// a heavily ridged system fails (degenerate input).
pub(crate) fn solve_ridged(a: &[f64], b: &[f64], n: usize, out: &mut Vec<f64>) -> bool {
    let mut work_a = a.to_vec();
    out.clear();
    out.extend_from_slice(b);
    if solve_spd_in_place(&mut work_a, out, n) {
        return true;
    }
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(1e-12f64, f64::max);
    let mut eps = max_diag * 1e-8;
    for _ in 0..12 {
        work_a.copy_from_slice(a);
        for i in 0..n {
            work_a[i * n + i] += eps;
        }
        out.clear();
        out.extend_from_slice(b);
        if solve_spd_in_place(&mut work_a, out, n) {
            return true;
        }
        eps *= 100.0;
    }
    false
}
