//! Safe wrapper over the blocked `dgemm` kernel.

/// Strided view of an `rows × cols` matrix stored in a slice.
#[derive(Debug, Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> View<'a> {
    /// Row-major matrix.
    pub fn rows(data: &'a [f64], rows: usize, cols: usize) -> Self {
        View { data, rows, cols, row_stride: cols, col_stride: 1 }
    }

    /// Transpose of the row-major `rows × cols` matrix in `data`.
    pub fn transposed(data: &'a [f64], rows: usize, cols: usize) -> Self {
        View { data, rows: cols, cols: rows, row_stride: 1, col_stride: cols }
    }

    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            let last = (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride;
            assert!(last < self.data.len(), "matrix view out of bounds");
        }
    }
}

/// `c ← a·b + beta·c` with `c` row-major `a.rows × b.cols`.
pub(crate) fn gemm(a: View<'_>, b: View<'_>, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(c.len(), m * n, "output has the wrong size");
    a.check();
    b.check();
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // SAFETY: every index reachable from the strides was bounds-checked above,
    // and `c` is an exclusive borrow disjoint from `a` and `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_products() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2×3
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3×2
        let mut c = vec![10.0; 4];
        gemm(View::rows(&a, 2, 3), View::rows(&b, 3, 2), 1.0, &mut c);
        assert_eq!(c, vec![14.0, 15.0, 20.0, 21.0]);
        // aᵀ·a is 3×3.
        let mut d = vec![0.0; 9];
        gemm(View::transposed(&a, 2, 3), View::rows(&a, 2, 3), 0.0, &mut d);
        assert_eq!(d, vec![17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
    }
}
