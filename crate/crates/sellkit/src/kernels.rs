//! Numeric primitives shared by the structured transforms.
//!
//! - Orthonormal DCT-II / DCT-III pair (`dct2`/`idct2`). With the
//!   orthonormal scaling the transform matrix `C` is orthogonal, so the
//!   inverse equals the transpose and gradients reuse the same kernels.
//! - The riffle shuffle: the fixed permutation interleaving the two halves
//!   of a vector, and its inverse.
//! - The k-mode product contracting one tensor index against a matrix.
//! - `reshape3`: factor a matrix element count into three near-equal sizes.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use crate::{Error, Result};
use crate::tensor::DenseTensor;

/// Precomputed secant tables for the recursive power-of-two DCT.
///
/// `levels[j]` holds `0.5 / cos(pi (i + 0.5) / s)` for `s = n >> j`,
/// down to `s = 2`.
pub(crate) struct DctPlan {
    n: usize,
    levels: Vec<Vec<f64>>,
}

impl DctPlan {
    fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2);
        let mut levels = Vec::new();
        let mut s = n;
        while s >= 2 {
            let freq = PI / s as f64;
            let table: Vec<f64> = (0..s / 2)
                .map(|i| 0.5 / ((i as f64 + 0.5) * freq).cos())
                .collect();
            levels.push(table);
            s /= 2;
        }
        Self { n, levels }
    }

    #[inline]
    fn secants(&self, s: usize) -> &[f64] {
        &self.levels[(self.n / s).trailing_zeros() as usize]
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<DctPlan>>> = RefCell::new(HashMap::new());
}

pub(crate) fn dct_plan(n: usize) -> Rc<DctPlan> {
    PLANS.with(|cell| {
        Rc::clone(
            cell.borrow_mut()
                .entry(n)
                .or_insert_with(|| Rc::new(DctPlan::new(n))),
        )
    })
}

// Unnormalised DCT-II: X[k] = sum_n x[n] cos(pi (n + 0.5) k / N).
fn fdct_rec(x: &mut [f64], tmp: &mut [f64], plan: &DctPlan) {
    let n = x.len();
    if n == 1 {
        return;
    }
    let half = n / 2;
    let sec = plan.secants(n);
    let (lo, hi) = tmp.split_at_mut(half);
    for i in 0..half {
        let a = x[i];
        let b = x[n - 1 - i];
        lo[i] = a + b;
        hi[i] = (a - b) * sec[i];
    }
    {
        let (xl, xh) = x.split_at_mut(half);
        fdct_rec(lo, xl, plan);
        fdct_rec(hi, xh, plan);
    }
    for i in 0..half - 1 {
        x[2 * i] = lo[i];
        x[2 * i + 1] = hi[i] + hi[i + 1];
    }
    x[n - 2] = lo[half - 1];
    x[n - 1] = hi[half - 1];
}

// Unnormalised DCT-III with full weight on the DC term:
// x[n] = sum_k X[k] cos(pi (n + 0.5) k / N).
fn idct_rec(x: &mut [f64], tmp: &mut [f64], plan: &DctPlan) {
    let n = x.len();
    if n == 1 {
        return;
    }
    let half = n / 2;
    let sec = plan.secants(n);
    let (alpha, beta) = tmp.split_at_mut(half);
    alpha[0] = x[0];
    beta[0] = x[1];
    for i in 1..half {
        alpha[i] = x[2 * i];
        beta[i] = x[2 * i - 1] + x[2 * i + 1];
    }
    {
        let (xl, xh) = x.split_at_mut(half);
        idct_rec(alpha, xl, plan);
        idct_rec(beta, xh, plan);
    }
    for i in 0..half {
        let a = alpha[i];
        let b = beta[i] * sec[i];
        x[i] = a + b;
        x[n - 1 - i] = a - b;
    }
}

/// In-place orthonormal DCT-II on a power-of-two buffer.
pub(crate) fn dct2_pow2(buf: &mut [f64], tmp: &mut [f64], plan: &DctPlan) {
    let n = buf.len();
    fdct_rec(buf, tmp, plan);
    let scale = (2.0 / n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
    buf[0] /= std::f64::consts::SQRT_2;
}

/// In-place orthonormal DCT-III (inverse of [`dct2_pow2`]) on a power-of-two buffer.
pub(crate) fn idct2_pow2(buf: &mut [f64], tmp: &mut [f64], plan: &DctPlan) {
    let n = buf.len();
    let scale = (2.0 / n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
    buf[0] /= std::f64::consts::SQRT_2;
    idct_rec(buf, tmp, plan);
}

fn naive_dct2(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    let full = (2.0 / nf).sqrt();
    let dc = (1.0 / nf).sqrt();
    (0..n)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (PI * (i as f64 + 0.5) * k as f64 / nf).cos())
                .sum();
            s * if k == 0 { dc } else { full }
        })
        .collect()
}

fn naive_idct2(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let nf = n as f64;
    let full = (2.0 / nf).sqrt();
    let dc = (1.0 / nf).sqrt();
    (0..n)
        .map(|i| {
            y.iter()
                .enumerate()
                .map(|(k, &v)| {
                    let s = if k == 0 { dc } else { full };
                    v * s * (PI * (i as f64 + 0.5) * k as f64 / nf).cos()
                })
                .sum()
        })
        .collect()
}

/// Orthonormal DCT-II coefficients of `x`.
///
/// `O(N log N)` for power-of-two lengths, `O(N^2)` otherwise.
pub fn dct2(x: &[f64]) -> Result<Vec<f64>> {
    match x.len() {
        0 => Err(Error::InvalidInput("dct2 of an empty vector".into())),
        1 => Ok(vec![x[0]]),
        n if n.is_power_of_two() => {
            let plan = dct_plan(n);
            let mut buf = x.to_vec();
            let mut tmp = vec![0.0; n];
            dct2_pow2(&mut buf, &mut tmp, &plan);
            Ok(buf)
        }
        _ => Ok(naive_dct2(x)),
    }
}

/// Inverse of [`dct2`] under the same orthonormal scaling.
pub fn idct2(y: &[f64]) -> Result<Vec<f64>> {
    match y.len() {
        0 => Err(Error::InvalidInput("idct2 of an empty vector".into())),
        1 => Ok(vec![y[0]]),
        n if n.is_power_of_two() => {
            let plan = dct_plan(n);
            let mut buf = y.to_vec();
            let mut tmp = vec![0.0; n];
            idct2_pow2(&mut buf, &mut tmp, &plan);
            Ok(buf)
        }
        _ => Ok(naive_idct2(y)),
    }
}

/// Riffle shuffle: split in half, interleave the halves.
///
/// `out[2i] = x[i]`, `out[2i+1] = x[i + N/2]`. A fixed permutation.
pub fn riffle(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() % 2 != 0 || x.is_empty() {
        return Err(Error::InvalidInput(format!(
            "riffle requires a non-empty even-length vector, got {}",
            x.len()
        )));
    }
    let mut out = vec![0.0; x.len()];
    riffle_into(x, &mut out);
    Ok(out)
}

/// Inverse permutation of [`riffle`].
pub fn riffle_inverse(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() % 2 != 0 || x.is_empty() {
        return Err(Error::InvalidInput(format!(
            "riffle_inverse requires a non-empty even-length vector, got {}",
            x.len()
        )));
    }
    let mut out = vec![0.0; x.len()];
    riffle_inverse_into(x, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn riffle_into(x: &[f64], out: &mut [f64]) {
    let half = x.len() / 2;
    for i in 0..half {
        out[2 * i] = x[i];
        out[2 * i + 1] = x[i + half];
    }
}

#[inline]
pub(crate) fn riffle_inverse_into(x: &[f64], out: &mut [f64]) {
    let half = x.len() / 2;
    for i in 0..half {
        out[i] = x[2 * i];
        out[i + half] = x[2 * i + 1];
    }
}

/// k-mode product: contract `t`'s mode `k` against the rows of matrix `m`.
///
/// `m` must be rank-2 with `m.cols() == t.shape()[k]`; the result replaces
/// dimension `k` by `m.rows()` and broadcasts over every other mode.
pub fn kmode_product(t: &DenseTensor, m: &DenseTensor, k: usize) -> Result<DenseTensor> {
    if m.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "k-mode factor must be rank-2, got rank {}",
            m.rank()
        )));
    }
    if k >= t.rank() {
        return Err(Error::ShapeMismatch(format!(
            "mode {k} out of range for rank-{} tensor",
            t.rank()
        )));
    }
    let (a, b) = (m.rows(), m.cols());
    if b != t.shape()[k] {
        return Err(Error::ShapeMismatch(format!(
            "factor has {b} columns but mode {k} has size {}",
            t.shape()[k]
        )));
    }
    let outer: usize = t.shape()[..k].iter().product();
    let inner: usize = t.shape()[k + 1..].iter().product();
    let mut out_shape = t.shape().to_vec();
    out_shape[k] = a;
    let mut out = DenseTensor::zeros(out_shape);
    let src = t.as_slice();
    let md = m.as_slice();
    let dst = out.as_mut_slice();
    for o in 0..outer {
        for i in 0..a {
            let drow = &mut dst[(o * a + i) * inner..(o * a + i + 1) * inner];
            for j in 0..b {
                let c = md[i * b + j];
                if c == 0.0 {
                    continue;
                }
                let srow = &src[(o * b + j) * inner..(o * b + j + 1) * inner];
                for (d, &s) in drow.iter_mut().zip(srow) {
                    *d += c * s;
                }
            }
        }
    }
    Ok(out)
}

/// Result of [`reshape3`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Reshape3 {
    /// Three factor sizes, largest in the middle, outer pair ascending.
    pub dims: [usize; 3],
    /// True when no factorisation into three factors >= 2 exists and the
    /// degenerate `(p, 1, 1)` fallback was used.
    pub degenerate: bool,
}

/// Factor `n_out * n_in` into three near-equal sizes.
///
/// Among all factorisations into three factors >= 2, picks the multiset
/// minimising `max(d) / min(d)` (ties: lexicographically smallest sorted
/// multiset) and arranges it with the largest factor in the middle. Falls
/// back to `(p, 1, 1)` with the `degenerate` flag when no such factorisation
/// exists (e.g. primes).
pub fn reshape3(n_out: usize, n_in: usize) -> Result<Reshape3> {
    let p = n_out
        .checked_mul(n_in)
        .ok_or_else(|| Error::InvalidInput("matrix element count overflows".into()))?;
    if p < 8 {
        return Err(Error::InvalidInput(format!(
            "reshape3 requires n_out * n_in >= 8, got {p}"
        )));
    }
    let mut best: Option<(usize, usize, usize)> = None;
    let mut a = 2;
    while a * a * a <= p {
        if p % a == 0 {
            let q = p / a;
            let mut b = a;
            while b * b <= q {
                if q % b == 0 {
                    let c = q / b;
                    let cand = (a, b, c);
                    best = Some(match best {
                        None => cand,
                        Some(cur) => {
                            // compare ratios c/a exactly via cross-multiplication
                            let lhs = (cand.2 as u128) * (cur.0 as u128);
                            let rhs = (cur.2 as u128) * (cand.0 as u128);
                            if lhs < rhs || (lhs == rhs && cand < cur) {
                                cand
                            } else {
                                cur
                            }
                        }
                    });
                }
                b += 1;
            }
        }
        a += 1;
    }
    Ok(match best {
        Some((a, b, c)) => Reshape3 { dims: [a, c, b], degenerate: false },
        None => Reshape3 { dims: [p, 1, 1], degenerate: true },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y} (tol {tol})");
        }
    }

    #[test]
    fn dct_constant_vector() {
        let y = dct2(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_close(&y, &[2.0, 0.0, 0.0, 0.0], 1e-14);
    }

    #[test]
    fn dct_two_point() {
        let y = dct2(&[1.0, 0.0]).unwrap();
        let r = 0.5f64.sqrt();
        assert_close(&y, &[r, r], 1e-15);
    }

    #[test]
    fn dct_roundtrip_pow2() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 37 + 11) % 17) as f64 - 8.0).collect();
        let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let back = idct2(&dct2(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * max.max(1.0));
        }
        // and the other composition order, at a different size
        let y: Vec<f64> = (0..128).map(|i| (i as f64 * 0.713).sin()).collect();
        let back = dct2(&idct2(&y).unwrap()).unwrap();
        assert_close(&y, &back, 1e-12);
    }

    #[test]
    fn fast_path_matches_naive() {
        for n in [2usize, 4, 8, 32, 64, 256] {
            let x: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37 + 0.1).cos()).collect();
            let fast = dct2(&x).unwrap();
            let naive = naive_dct2(&x);
            for (a, b) in fast.iter().zip(&naive) {
                let scale = a.abs().max(b.abs()).max(1.0);
                assert!((a - b).abs() / scale < 1e-10, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn non_pow2_lengths_supported() {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let back = idct2(&dct2(&x).unwrap()).unwrap();
        assert_close(&x, &back, 1e-12);
    }

    #[test]
    fn idct_of_basis_is_transform_row() {
        // idct2(e_k) equals column k of C^T, i.e. row k of C evaluated per entry.
        let n = 8;
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let col = idct2(&e).unwrap();
            let nf = n as f64;
            let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for (i, &v) in col.iter().enumerate() {
                let want = s * (PI * (i as f64 + 0.5) * k as f64 / nf).cos();
                assert!((v - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dct_empty_is_error() {
        assert!(dct2(&[]).is_err());
        assert!(idct2(&[]).is_err());
    }

    #[test]
    fn riffle_definition() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert_eq!(riffle(&x).unwrap(), vec![0.0, 4.0, 1.0, 5.0, 2.0, 6.0, 3.0, 7.0]);
        assert_eq!(riffle(&[5.0, 9.0]).unwrap(), vec![5.0, 9.0]);
        assert!(riffle(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn riffle_inverse_definition() {
        let shuffled = [0.0, 4.0, 1.0, 5.0, 2.0, 6.0, 3.0, 7.0];
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert_eq!(riffle_inverse(&shuffled).unwrap(), x);
        assert_eq!(riffle_inverse(&[5.0, 9.0]).unwrap(), vec![5.0, 9.0]);
        assert!(riffle_inverse(&[1.0]).is_err());

        let big: Vec<f64> = (0..256).map(|i| (i as f64).sin()).collect();
        assert_eq!(riffle_inverse(&riffle(&big).unwrap()).unwrap(), big);
    }

    /// Brute-force k-mode oracle: explicit nested loops over all indices.
    fn kmode_oracle(t: &DenseTensor, m: &DenseTensor, k: usize) -> DenseTensor {
        let mut out_shape = t.shape().to_vec();
        out_shape[k] = m.rows();
        let mut out = DenseTensor::zeros(out_shape.clone());
        let mut idx = vec![0usize; t.rank()];
        loop {
            let mut acc = 0.0;
            let mut src_idx = idx.clone();
            for j in 0..t.shape()[k] {
                src_idx[k] = j;
                acc += m.at2(idx[k], j) * t.at(&src_idx);
            }
            let flat: usize = idx
                .iter()
                .zip(&out_shape)
                .fold(0, |f, (&i, &d)| f * d + i);
            out.as_mut_slice()[flat] = acc;
            // advance multi-index
            let mut pos = idx.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < out_shape[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    #[test]
    fn kmode_identity_leaves_tensor() {
        let t = DenseTensor::new(vec![2, 3, 2], (0..12).map(|i| i as f64).collect()).unwrap();
        for k in 0..3 {
            let m = DenseTensor::eye(t.shape()[k]);
            assert_eq!(kmode_product(&t, &m, k).unwrap(), t);
        }
    }

    #[test]
    fn kmode_column_sums() {
        let t = DenseTensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ones = DenseTensor::matrix(1, 2, vec![1.0, 1.0]).unwrap();
        let out = kmode_product(&t, &ones, 0).unwrap();
        assert_eq!(out.shape(), &[1, 2]);
        assert_eq!(out.as_slice(), &[4.0, 6.0]);
    }

    #[test]
    fn kmode_matches_bruteforce_and_commutes() {
        let data: Vec<f64> = (0..27).map(|i| ((i * 31 + 7) % 13) as f64 - 6.0).collect();
        let t = DenseTensor::new(vec![3, 3, 3], data).unwrap();
        let m0 = DenseTensor::matrix(2, 3, vec![1., -2., 0.5, 0., 3., 1.]).unwrap();
        let m1 = DenseTensor::matrix(4, 3, vec![2., 1., 0., -1., 0., 1., 0.5, 0.5, 0.5, 1., 1., -1.]).unwrap();

        for k in 0..3 {
            let got = kmode_product(&t, &m0, k).unwrap();
            let want = kmode_oracle(&t, &m0, k);
            assert!(got.max_abs_diff(&want) < 1e-12);
        }

        // products on distinct modes commute
        let ab = kmode_product(&kmode_product(&t, &m0, 0).unwrap(), &m1, 1).unwrap();
        let ba = kmode_product(&kmode_product(&t, &m1, 1).unwrap(), &m0, 0).unwrap();
        assert!(ab.max_abs_diff(&ba) < 1e-12);
    }

    #[test]
    fn kmode_shape_error() {
        let t = DenseTensor::zeros(vec![2, 3]);
        let m = DenseTensor::zeros(vec![2, 4]);
        assert!(kmode_product(&t, &m, 1).is_err());
    }

    #[test]
    fn reshape3_balanced_cases() {
        // exhaustively verified: 65536 = 32*64*32 is ratio-2 optimal
        let r = reshape3(256, 256).unwrap();
        assert_eq!(r.dims, [32, 64, 32]);
        assert!(!r.degenerate);

        let r = reshape3(2, 4).unwrap();
        assert_eq!(r.dims, [2, 2, 2]);

        let r = reshape3(64, 64).unwrap();
        assert_eq!(r.dims, [16, 16, 16]);
    }

    #[test]
    fn reshape3_degenerate_prime() {
        let r = reshape3(1, 13).unwrap();
        assert_eq!(r.dims, [13, 1, 1]);
        assert!(r.degenerate);
        // 2 * prime also has no 3-factorisation with all factors >= 2
        let r = reshape3(2, 13).unwrap();
        assert_eq!(r.dims, [26, 1, 1]);
        assert!(r.degenerate);
    }

    #[test]
    fn reshape3_product_invariant() {
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..100 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let n_out = 2 + (state >> 33) as usize % 96;
            let n_in = 2 + (state >> 12) as usize % 96;
            let r = reshape3(n_out, n_in).unwrap();
            assert_eq!(r.dims.iter().product::<usize>(), n_out * n_in);
        }
    }

    #[test]
    fn reshape3_too_small() {
        assert!(reshape3(1, 7).is_err());
    }
}
