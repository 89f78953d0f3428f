//! Scalar abstraction and strided matrix products.

use std::fmt::Debug;

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar: Float + Default + Debug + Send + Sync + Serialize + DeserializeOwned + 'static {
    const NAME: &'static str;

    fn of(x: f64) -> Self;
    fn f64(self) -> f64;

    /// C ← alpha·A·B + beta·C with arbitrary strides.
    ///
    /// # Safety
    /// Every index reachable through the given dimensions and strides must be
    /// in bounds of the corresponding allocation, and C must not alias A or B.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn of(x: f64) -> Self {
        x as f32
    }

    fn f64(self) -> f64 {
        self as f64
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn of(x: f64) -> Self {
        x
    }

    fn f64(self) -> f64 {
        self
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Shape and strides of a matrix view into a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl Layout {
    pub fn row_major(rows: usize, cols: usize) -> Self {
        Layout { rows, cols, rs: cols, cs: 1 }
    }

    /// Row-major block of `rows × cols` inside a matrix with `stride` columns.
    pub fn block(rows: usize, cols: usize, stride: usize) -> Self {
        Layout { rows, cols, rs: stride, cs: 1 }
    }

    pub fn t(self) -> Self {
        Layout { rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }

    /// One past the largest reachable offset (0 for empty views).
    fn extent(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.rs + (self.cols - 1) * self.cs + 1
        }
    }
}

/// C ← alpha·A·B + beta·C. With beta = 0 the prior contents of C are ignored.
#[allow(clippy::too_many_arguments)]
pub fn gemm<F: Scalar>(alpha: F, a: &[F], la: Layout, b: &[F], lb: Layout, beta: F, c: &mut [F], lc: Layout) {
    assert_eq!(la.cols, lb.rows, "inner dimensions");
    assert_eq!((lc.rows, lc.cols), (la.rows, lb.cols), "output shape");
    assert!(la.extent() <= a.len() && lb.extent() <= b.len() && lc.extent() <= c.len(), "view out of bounds");
    if lc.rows == 0 || lc.cols == 0 {
        return;
    }
    if la.cols == 0 {
        for i in 0..lc.rows {
            for j in 0..lc.cols {
                let x = &mut c[i * lc.rs + j * lc.cs];
                *x = if beta == F::zero() { F::zero() } else { *x * beta };
            }
        }
        return;
    }
    // SAFETY: extents were checked above and `c` is a unique borrow.
    unsafe {
        F::gemm_raw(
            la.rows,
            la.cols,
            lb.cols,
            alpha,
            a.as_ptr(),
            la.rs as isize,
            la.cs as isize,
            b.as_ptr(),
            lb.rs as isize,
            lb.cs as isize,
            beta,
            c.as_mut_ptr(),
            lc.rs as isize,
            lc.cs as isize,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], la: Layout, b: &[f64], lb: Layout) -> Vec<f64> {
        let mut out = vec![0.0; la.rows * lb.cols];
        for i in 0..la.rows {
            for j in 0..lb.cols {
                for p in 0..la.cols {
                    out[i * lb.cols + j] += a[i * la.rs + p * la.cs] * b[p * lb.rs + j * lb.cs];
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_with_transposes_and_blocks() {
        let a: Vec<f64> = (0..24).map(|x| x as f64 * 0.5 - 3.0).collect();
        let b: Vec<f64> = (0..24).map(|x| (x as f64).sin()).collect();
        let cases = [
            (Layout::row_major(4, 6), Layout::row_major(6, 4)),
            (Layout::row_major(6, 4).t(), Layout::row_major(4, 6).t()),
            (Layout::block(3, 2, 6), Layout::block(2, 5, 6)),
        ];
        for (la, lb) in cases {
            let mut c = vec![f64::NAN; la.rows * lb.cols];
            gemm(1.0, &a, la, &b, lb, 0.0, &mut c, Layout::row_major(la.rows, lb.cols));
            let want = naive(&a, la, &b, lb);
            for (x, y) in c.iter().zip(&want) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn accumulates_and_handles_empty_inner() {
        let mut c = vec![1.0f32; 4];
        gemm(1.0, &[1.0, 2.0], Layout::row_major(2, 1), &[3.0, 4.0], Layout::row_major(1, 2), 1.0, &mut c, Layout::row_major(2, 2));
        assert_eq!(c, vec![4.0, 5.0, 7.0, 9.0]);
        gemm(1.0, &[], Layout::row_major(2, 0), &[], Layout::row_major(0, 2), 0.0, &mut c, Layout::row_major(2, 2));
        assert_eq!(c, vec![0.0; 4]);
    }
}
