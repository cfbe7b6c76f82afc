//! Small dense matrix kernels used by the batched apply/grad paths.
//!
//! All matrices are flat row-major slices; shapes are passed alongside.
//! Loop orders keep the innermost stride at 1 for both operands.

/// `C = A * B^T` with `A: m x k`, `B: n x k`, `C: m x n`.
pub fn matmul_nt(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        let or = &mut out[i * n..(i + 1) * n];
        for (j, o) in or.iter_mut().enumerate() {
            let br = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for t in 0..k {
                acc += ar[t] * br[t];
            }
            *o = acc;
        }
    }
}

/// `C = A^T * B` with `A: k x m`, `B: k x n`, `C: m x n`.
pub fn matmul_tn(a: &[f64], k: usize, m: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for t in 0..k {
        let ar = &a[t * m..(t + 1) * m];
        let br = &b[t * n..(t + 1) * n];
        for (i, &av) in ar.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let or = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in or.iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
}

/// `C = A * B` with `A: m x k`, `B: k x n`, `C: m x n`.
pub fn matmul_nn(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        let or = &mut out[i * n..(i + 1) * n];
        for (t, &av) in ar.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let br = &b[t * n..(t + 1) * n];
            for (o, &bv) in or.iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_definition() {
        // A: 2x3, B: 2x3 -> A*B^T is 2x2
        let a = [1., 2., 3., 4., 5., 6.];
        let b = [1., 0., 1., 0., 1., 0.];
        let mut c = [0.0; 4];
        matmul_nt(&a, 2, 3, &b, 2, &mut c);
        assert_eq!(c, [4., 2., 10., 5.]);

        // A^T*B with A: 2x2, B: 2x3
        let a = [1., 2., 3., 4.];
        let b = [1., 0., 2., 0., 1., 1.];
        let mut c = [0.0; 6];
        matmul_tn(&a, 2, 2, &b, 3, &mut c);
        assert_eq!(c, [1., 3., 5., 2., 4., 8.]);

        let mut c = [0.0; 6];
        matmul_nn(&a, 2, 2, &b, 3, &mut c);
        assert_eq!(c, [1., 2., 4., 3., 4., 10.]);
    }
}
