use super::Real;

/// `c = op(a) * op(b)` for row-major operands, where `op` optionally
/// transposes. Logical shapes are `[m,k] x [k,n] -> [m,n]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[Real], at: bool, b: &[Real], bt: bool, c: &mut [Real]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.fill(0.0);
        return;
    }
    let (rsa, csa) = if at { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if bt { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above describe exactly the m*k, k*n and m*n
    // row-major buffers whose lengths are asserted on entry.
    unsafe {
        kernel(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(not(feature = "f32"))]
use matrixmultiply::dgemm as kernel;
#[cfg(feature = "f32")]
use matrixmultiply::sgemm as kernel;
