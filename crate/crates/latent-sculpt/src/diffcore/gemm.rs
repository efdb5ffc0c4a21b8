//! Row-major GEMM shim over `matrixmultiply`.

/// Accumulates `c += alpha * op(a) . op(b)` where `op` transposes when the
/// corresponding flag is set. Logical dimensions after `op`: a is m x k,
/// b is k x n, c is m x n, all row-major.
pub(crate) fn matmul_acc(
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    m: usize,
    k: usize,
    n: usize,
    ta: bool,
    tb: bool,
    alpha: f64,
) {
    assert_eq!(a.len(), m * k, "lhs buffer size");
    assert_eq!(b.len(), k * n, "rhs buffer size");
    assert_eq!(c.len(), m * n, "out buffer size");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        return;
    }
    // Physical layout is row-major; a transposed operand is expressed purely
    // through strides, never materialized.
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
