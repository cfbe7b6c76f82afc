//! Diagonal-DCT stacks: `W = prod_l A_l C D_l C^-1 P`.
//!
//! `A_l`, `D_l` are trainable diagonals, `C`/`C^-1` the orthonormal DCT
//! pair and `P` the riffle shuffle. Applied right to left: the input is
//! riffled once, then each layer computes `A_l . C . D_l . C^-1`. Storage is
//! `O(N)` per layer and application is `O(N log N)` for power-of-two `N`.

use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::kernels::{dct2, dct_plan, dct2_pow2, idct2, idct2_pow2, riffle_into, riffle_inverse_into};
use crate::linop::{CostModel, OperatorSpec, ParamStore, Segment};
use crate::{Error, Result};

use super::store;

const INIT_EPS: f64 = 1e-2;

pub(super) fn validate(spec: &OperatorSpec, layers: usize) -> Result<()> {
    let n = spec.n_out;
    if spec.n_in != n {
        return Err(Error::Spec(format!(
            "diagonal-DCT operators are square, got {}x{}",
            n, spec.n_in
        )));
    }
    if n % 2 != 0 {
        return Err(Error::Spec(format!("riffle shuffle needs even width, got {n}")));
    }
    if layers == 0 {
        return Err(Error::Spec("layer count must be >= 1".into()));
    }
    Ok(())
}

pub(super) fn init(spec: &OperatorSpec, layers: usize, rng: &mut ChaCha8Rng) -> ParamStore {
    use rand::Rng;
    let n = spec.n_out;
    let mut flat = Vec::with_capacity(2 * layers * n);
    let mut segments = Vec::with_capacity(2 * layers);
    let mut offset = 0;
    for l in 0..layers {
        for name in [format!("A_{l}"), format!("D_{l}")] {
            for _ in 0..n {
                let g: f64 = rng.sample(StandardNormal);
                flat.push(1.0 + INIT_EPS * g);
            }
            segments.push(Segment { name, offset, len: n });
            offset += n;
        }
    }
    store(flat, segments)
}

pub(super) fn multadds(n: u64, layers: u64, model: &CostModel) -> u64 {
    layers * (2 * model.dct_cost(n) + 2 * n)
}

#[inline]
fn diag_mul(buf: &mut [f64], d: &[f64]) {
    for (b, &dv) in buf.iter_mut().zip(d) {
        *b *= dv;
    }
}

pub(super) fn apply_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    layers: usize,
    x: &[f64],
    batch: usize,
) -> Vec<f64> {
    let n = spec.n_out;
    let pow2 = n.is_power_of_two();
    let plan = pow2.then(|| dct_plan(n));
    let mut out = vec![0.0; batch * n];
    let mut tmp = vec![0.0; n];
    let mut buf = vec![0.0; n];
    for b in 0..batch {
        riffle_into(&x[b * n..(b + 1) * n], &mut buf);
        for l in 0..layers {
            let a = params.seg(2 * l);
            let d = params.seg(2 * l + 1);
            if let Some(plan) = &plan {
                idct2_pow2(&mut buf, &mut tmp, plan);
                diag_mul(&mut buf, d);
                dct2_pow2(&mut buf, &mut tmp, plan);
            } else {
                buf = idct2(&buf).expect("validated width");
                diag_mul(&mut buf, d);
                buf = dct2(&buf).expect("validated width");
            }
            diag_mul(&mut buf, a);
        }
        out[b * n..(b + 1) * n].copy_from_slice(&buf);
    }
    out
}

pub(super) fn grad_batch(
    spec: &OperatorSpec,
    params: &ParamStore,
    layers: usize,
    x: &[f64],
    batch: usize,
    upstream: &[f64],
    want_input: bool,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = spec.n_out;
    let pow2 = n.is_power_of_two();
    let plan = pow2.then(|| dct_plan(n));
    let mut grads = vec![0.0; params.len()];
    let mut dx = want_input.then(|| vec![0.0; batch * n]);

    // per-layer forward intermediates: v_l enters the D multiply, s_l the A multiply
    let mut v_cache = vec![0.0; layers * n];
    let mut s_cache = vec![0.0; layers * n];
    let mut tmp = vec![0.0; n];
    let mut buf = vec![0.0; n];
    let mut u = vec![0.0; n];

    let fwd_idct = |buf: &mut Vec<f64>, tmp: &mut [f64], plan: &Option<std::rc::Rc<crate::kernels::DctPlan>>| {
        if let Some(p) = plan {
            idct2_pow2(buf, tmp, p);
        } else {
            *buf = idct2(buf).expect("validated width");
        }
    };
    let fwd_dct = |buf: &mut Vec<f64>, tmp: &mut [f64], plan: &Option<std::rc::Rc<crate::kernels::DctPlan>>| {
        if let Some(p) = plan {
            dct2_pow2(buf, tmp, p);
        } else {
            *buf = dct2(buf).expect("validated width");
        }
    };

    for b in 0..batch {
        riffle_into(&x[b * n..(b + 1) * n], &mut buf);
        for l in 0..layers {
            let a = params.seg(2 * l);
            let d = params.seg(2 * l + 1);
            fwd_idct(&mut buf, &mut tmp, &plan);
            v_cache[l * n..(l + 1) * n].copy_from_slice(&buf);
            diag_mul(&mut buf, d);
            fwd_dct(&mut buf, &mut tmp, &plan);
            s_cache[l * n..(l + 1) * n].copy_from_slice(&buf);
            diag_mul(&mut buf, a);
        }

        u.copy_from_slice(&upstream[b * n..(b + 1) * n]);
        for l in (0..layers).rev() {
            let a_seg = &params.segments()[2 * l];
            let d_seg = &params.segments()[2 * l + 1];
            let s = &s_cache[l * n..(l + 1) * n];
            let v = &v_cache[l * n..(l + 1) * n];
            // y = a . s:   dA += u . s,  ds = a . u
            for i in 0..n {
                grads[a_seg.offset + i] += u[i] * s[i];
            }
            {
                let a = params.seg(2 * l);
                diag_mul(&mut u, a);
            }
            // s = C w  =>  dw = C^T ds
            fwd_idct(&mut u, &mut tmp, &plan);
            // w = d . v:  dD += dw . v,  dv = d . dw
            for i in 0..n {
                grads[d_seg.offset + i] += u[i] * v[i];
            }
            {
                let d = params.seg(2 * l + 1);
                diag_mul(&mut u, d);
            }
            // v = C^T z  =>  dz = C dv
            fwd_dct(&mut u, &mut tmp, &plan);
        }
        if let Some(dx) = dx.as_mut() {
            riffle_inverse_into(&u, &mut dx[b * n..(b + 1) * n]);
        }
    }
    (grads, dx)
}
