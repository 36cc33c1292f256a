use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Scalar type the engine computes in.
///
/// Besides the usual float arithmetic this carries a strided matrix product,
/// dispatched to the matching `matrixmultiply` kernel.
pub trait Real: Float + FromPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static {
    const NAME: &'static str;

    fn from_f64_lossy(v: f64) -> Self;

    /// `C <- alpha * A * B + beta * C` for row/column-strided views.
    ///
    /// `A` is `m x k`, `B` is `k x n`, `C` is `m x n`. When `beta` is zero,
    /// `C` is written without being read.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: usize,
        csa: usize,
        b: &[Self],
        rsb: usize,
        csb: usize,
        beta: Self,
        c: &mut [Self],
        rsc: usize,
        csc: usize,
    );
}

#[inline]
fn check_view(len: usize, rows: usize, cols: usize, rs: usize, cs: usize, what: &str) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows - 1) * rs + (cols - 1) * cs;
    assert!(last < len, "gemm: {what} view exceeds buffer ({last} >= {len})");
}

macro_rules! impl_real {
    ($t:ty, $name:literal, $kernel:path) => {
        impl Real for $t {
            const NAME: &'static str = $name;

            #[inline]
            fn from_f64_lossy(v: f64) -> Self {
                v as $t
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: usize,
                csa: usize,
                b: &[Self],
                rsb: usize,
                csb: usize,
                beta: Self,
                c: &mut [Self],
                rsc: usize,
                csc: usize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                check_view(c.len(), m, n, rsc, csc, "C");
                if k > 0 {
                    check_view(a.len(), m, k, rsa, csa, "A");
                    check_view(b.len(), k, n, rsb, csb, "B");
                }
                // SAFETY: every view was bounds-checked above, and `c` is a
                // unique borrow so it cannot alias `a` or `b`.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa as isize,
                        csa as isize,
                        b.as_ptr(),
                        rsb as isize,
                        csb as isize,
                        beta,
                        c.as_mut_ptr(),
                        rsc as isize,
                        csc as isize,
                    );
                }
            }
        }
    };
}

impl_real!(f32, "f32", matrixmultiply::sgemm);
impl_real!(f64, "f64", matrixmultiply::dgemm);
