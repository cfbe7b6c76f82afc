//! Parameter-budget machinery: per-kind knob-to-parameter-count curves over
//! a normalised `t in [0, 1]`, support intersection across kinds,
//! log-interpolated budget selection and a bisection solver mapping a target
//! parameter count back to a knob.

use serde::{Deserialize, Serialize};

use crate::kernels::reshape3;
use crate::linop::{Family, KindId, OperatorSpec};
use crate::transforms::tucker_ranks_for;
use crate::{Error, Result};

/// A resolved tuning-knob value. Fractional knobs (`RankFraction`,
/// `RealFraction`) resolve per layer; integer knobs are shared across all
/// substituted layers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Knob {
    /// Dense baseline has nothing to tune.
    Dense,
    /// Diagonal-DCT layer count, ascending in `t`.
    Layers(usize),
    /// Shared internal tensor-train rank.
    TtRank(usize),
    /// Tucker core rank as a fraction of each mode size.
    RankFraction(f64),
    /// Rank-factorised bottleneck width as a fraction of each layer's
    /// smaller dimension.
    Bottleneck(f64),
    /// Hashed real-weight count as a fraction of each layer's virtual size.
    RealFraction(f64),
    /// Shuffle-linear group count as a normalised position in each layer's
    /// descending divisor list: more groups (smaller blocks) at `t = 0`,
    /// two groups at `t = 1`. The degenerate single group is excluded from
    /// the tuning range (it has no shuffle) but remains constructible
    /// directly.
    Groups(f64),
}

impl std::fmt::Display for Knob {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Knob::Dense => write!(f, "dense"),
            Knob::Layers(l) => write!(f, "L={l}"),
            Knob::TtRank(r) => write!(f, "tt_rank={r}"),
            Knob::RankFraction(x) => write!(f, "rank_fraction={x:.4}"),
            Knob::Bottleneck(x) => write!(f, "d_bn_fraction={x:.4}"),
            Knob::RealFraction(x) => write!(f, "real_fraction={x:.6}"),
            Knob::Groups(t) => write!(f, "groups_position={t:.4}"),
        }
    }
}

/// Divisors >= 2 of `n`, descending (the shuffle-linear group range).
fn divisors_desc(n: usize) -> Vec<usize> {
    let mut divs: Vec<usize> = (2..=n).filter(|d| n % d == 0).collect();
    divs.sort_unstable_by(|a, b| b.cmp(a));
    divs
}

fn groups_for(n: usize, t: f64) -> usize {
    let divs = divisors_desc(n);
    let idx = ((t * (divs.len() - 1) as f64).round() as usize).min(divs.len() - 1);
    divs[idx]
}

/// Parameter-count curve of one kind over the normalised knob range.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KnobCurve {
    pub kind: KindId,
    pub layer_dims: Vec<(usize, usize)>,
    /// `(t, total_params)` pairs, non-decreasing in `params`.
    pub samples: Vec<(f64, u64)>,
    pub knobs: Vec<Knob>,
}

impl KnobCurve {
    pub fn min_params(&self) -> u64 {
        self.samples.first().map(|&(_, p)| p).unwrap_or(0)
    }

    pub fn max_params(&self) -> u64 {
        self.samples.last().map(|&(_, p)| p).unwrap_or(0)
    }
}

fn tt_full_rank(n_out: usize, n_in: usize) -> Result<usize> {
    let [d0, d1, d2] = reshape3(n_out, n_in)?.dims;
    Ok((d0.min(d1 * d2)).max((d0 * d1).min(d2)))
}

fn validate_dims(kind: KindId, dims: &[(usize, usize)]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::Config("layer_dims must not be empty".into()));
    }
    match kind {
        KindId::Acdc | KindId::ShuffleLinear => {
            for &(n_out, n_in) in dims {
                if n_out != n_in || n_out % 2 != 0 {
                    return Err(Error::Spec(format!(
                        "{kind} requires square even layers, got {n_out}x{n_in}"
                    )));
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Map a normalised `t in [0, 1]` to the kind's knob value over the given
/// layers. `t = 0` is the minimum configuration, `t = 1` the maximum.
pub fn knob_at(kind: KindId, dims: &[(usize, usize)], t: f64) -> Result<Knob> {
    validate_dims(kind, dims)?;
    let t = t.clamp(0.0, 1.0);
    Ok(match kind {
        KindId::Dense => Knob::Dense,
        KindId::Acdc => {
            // dense parameter parity across all substituted layers:
            // 2 L sum(n_i) = sum(n_i^2)
            let widths: u64 = dims.iter().map(|&(n, _)| n as u64).sum();
            let dense: u64 = dims.iter().map(|&(n, m)| n as u64 * m as u64).sum();
            let l_max = ((dense as f64 / (2.0 * widths as f64)).round() as usize).max(1);
            Knob::Layers(((1.0 + t * (l_max as f64 - 1.0)).round() as usize).clamp(1, l_max))
        }
        KindId::TensorTrain => {
            let mut r_max = 1;
            for &(n_out, n_in) in dims {
                r_max = r_max.max(tt_full_rank(n_out, n_in)?);
            }
            Knob::TtRank(((1.0 + t * (r_max as f64 - 1.0)).round() as usize).clamp(1, r_max))
        }
        KindId::Tucker => {
            for &(n_out, n_in) in dims {
                reshape3(n_out, n_in)?;
            }
            Knob::RankFraction(t.max(1e-9))
        }
        KindId::RankFactorised => Knob::Bottleneck(t.clamp(0.0, 1.0)),
        KindId::HashedNet => Knob::RealFraction(t.clamp(0.0, 1.0)),
        KindId::ShuffleLinear => Knob::Groups(t),
    })
}

/// Resolve a knob into a concrete operator family for one layer.
pub fn family_for(knob: Knob, n_out: usize, n_in: usize) -> Result<Family> {
    Ok(match knob {
        Knob::Dense => Family::Dense {},
        Knob::Layers(l) => Family::Acdc { layers: l },
        Knob::TtRank(r) => Family::TensorTrain { tt_rank: r },
        Knob::RankFraction(f) => Family::Tucker { core_ranks: tucker_ranks_for(n_out, n_in, f)? },
        Knob::Bottleneck(f) => {
            let d_max = n_out.min(n_in);
            Family::RankFactorised { d_bn: ((f * d_max as f64).round() as usize).clamp(1, d_max) }
        }
        Knob::RealFraction(f) => {
            let n_virtual = (n_out * n_in) as f64;
            Family::HashedNet { n_real: ((f * n_virtual).round() as u64).clamp(1, n_virtual as u64) }
        }
        Knob::Groups(t) => Family::ShuffleLinear { groups: groups_for(n_out, t) },
    })
}

/// Build the spec for one layer at a resolved knob value.
pub fn spec_for(knob: Knob, n_out: usize, n_in: usize, seed: u64) -> Result<OperatorSpec> {
    OperatorSpec::new(family_for(knob, n_out, n_in)?, n_out, n_in, seed)
}

/// Total parameter count across all layers at a resolved knob value.
pub fn params_at(knob: Knob, dims: &[(usize, usize)]) -> Result<u64> {
    let mut total = 0;
    for &(n_out, n_in) in dims {
        let spec = spec_for(knob, n_out, n_in, 0)?;
        total += crate::linop::param_count(&spec)?;
    }
    Ok(total)
}

/// Sample the kind's knob-to-parameters curve on a `resolution`-point grid.
pub fn knob_curve(kind: KindId, dims: &[(usize, usize)], resolution: usize) -> Result<KnobCurve> {
    if resolution < 2 {
        return Err(Error::Config(format!("resolution must be >= 2, got {resolution}")));
    }
    let mut samples = Vec::with_capacity(resolution);
    let mut knobs = Vec::with_capacity(resolution);
    for i in 0..resolution {
        let t = i as f64 / (resolution - 1) as f64;
        let knob = knob_at(kind, dims, t)?;
        let params = params_at(knob, dims)?;
        samples.push((t, params));
        knobs.push(knob);
    }
    debug_assert!(samples.windows(2).all(|w| w[0].1 <= w[1].1), "curve must be monotone");
    Ok(KnobCurve { kind, layer_dims: dims.to_vec(), samples, knobs })
}

/// Intersect the parameter ranges of several curves: the interval where all
/// kinds have support.
pub fn support_interval(curves: &[KnobCurve]) -> Result<(u64, u64)> {
    if curves.len() < 2 {
        return Err(Error::Config("support_interval needs at least 2 curves".into()));
    }
    let lo = curves.iter().map(|c| c.min_params()).max().unwrap();
    let hi = curves.iter().map(|c| c.max_params()).min().unwrap();
    if lo > hi {
        return Err(Error::NoCommonSupport { lo, hi });
    }
    Ok((lo, hi))
}

/// Midpoint by linear interpolation in log parameter count: `sqrt(lo * hi)`.
pub fn log_midpoint(p_lo: f64, p_hi: f64) -> f64 {
    debug_assert!(0.0 < p_lo && p_lo < p_hi);
    (p_lo * p_hi).sqrt()
}

/// `k` budgets spaced geometrically across `[lo, hi]` (endpoints included
/// for `k >= 2`; `k = 1` yields the log midpoint).
pub fn auto_budgets(lo: u64, hi: u64, k: usize) -> Vec<u64> {
    if k == 0 {
        return Vec::new();
    }
    if k == 1 {
        return vec![log_midpoint(lo as f64, hi as f64).round() as u64];
    }
    (0..k)
        .map(|i| {
            let f = i as f64 / (k - 1) as f64;
            ((lo as f64).powf(1.0 - f) * (hi as f64).powf(f)).round() as u64
        })
        .collect()
}

/// A solved budget: the knob and the parameter count it actually achieves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSolution {
    pub knob: Knob,
    pub params: u64,
}

/// Invert the knob curve: find the knob whose parameter count is closest to
/// `target` (within `tol * target` when achievable, otherwise the closest
/// integer-quantised configuration). Ties break toward fewer parameters.
pub fn solve_budget(
    kind: KindId,
    dims: &[(usize, usize)],
    target: u64,
    tol: f64,
) -> Result<BudgetSolution> {
    let lo_knob = knob_at(kind, dims, 0.0)?;
    let hi_knob = knob_at(kind, dims, 1.0)?;
    let p_lo = params_at(lo_knob, dims)?;
    let p_hi = params_at(hi_knob, dims)?;
    if target < p_lo || target > p_hi {
        return Err(Error::OutOfSupport { target, lo: p_lo, hi: p_hi });
    }

    // bisection over the monotone step curve
    let (mut t_lo, mut t_hi) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let mid = 0.5 * (t_lo + t_hi);
        let p_mid = params_at(knob_at(kind, dims, mid)?, dims)?;
        if p_mid < target {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }

    let mut candidates = Vec::new();
    for t in [t_lo, t_hi] {
        let knob = knob_at(kind, dims, t)?;
        let params = params_at(knob, dims)?;
        candidates.push(BudgetSolution { knob, params });
    }
    candidates.sort_by(|a, b| {
        let da = a.params.abs_diff(target);
        let db = b.params.abs_diff(target);
        da.cmp(&db).then(a.params.cmp(&b.params))
    });
    let best = candidates[0];
    let _ = tol; // the closest achievable configuration is returned either way
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rf_curve_endpoints() {
        let dims = [(256, 256)];
        let lo = knob_at(KindId::RankFactorised, &dims, 0.0).unwrap();
        let hi = knob_at(KindId::RankFactorised, &dims, 1.0).unwrap();
        // t = 0 resolves to d_bn = 1, t = 1 to the full width
        assert_eq!(family_for(lo, 256, 256).unwrap(), Family::RankFactorised { d_bn: 1 });
        assert_eq!(family_for(hi, 256, 256).unwrap(), Family::RankFactorised { d_bn: 256 });
        assert_eq!(params_at(lo, &dims).unwrap(), 512);
        assert_eq!(params_at(hi, &dims).unwrap(), 131072);
    }

    #[test]
    fn hashed_curve_matches_dense_at_one() {
        let dims = [(64, 64)];
        let hi = knob_at(KindId::HashedNet, &dims, 1.0).unwrap();
        assert_eq!(params_at(hi, &dims).unwrap(), 4096);
        let lo = knob_at(KindId::HashedNet, &dims, 0.0).unwrap();
        assert_eq!(params_at(lo, &dims).unwrap(), 1);
    }

    #[test]
    fn curves_monotone_on_multi_layer_dims() {
        let dims = [(64, 64), (128, 128), (32, 32)];
        for kind in KindId::ALL {
            let curve = knob_curve(kind, &dims, 33).unwrap();
            for w in curve.samples.windows(2) {
                assert!(w[0].1 <= w[1].1, "{kind}: {:?} > {:?}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn support_interval_basics() {
        let c1 = KnobCurve {
            kind: KindId::RankFactorised,
            layer_dims: vec![(10, 10)],
            samples: vec![(0.0, 100), (1.0, 1000)],
            knobs: vec![Knob::Bottleneck(0.0), Knob::Bottleneck(1.0)],
        };
        let mut c2 = c1.clone();
        c2.samples = vec![(0.0, 200), (1.0, 800)];
        assert_eq!(support_interval(&[c1.clone(), c2.clone()]).unwrap(), (200, 800));
        assert_eq!(support_interval(&[c2.clone(), c1.clone()]).unwrap(), (200, 800));
        assert_eq!(support_interval(&[c1.clone(), c1.clone()]).unwrap(), (100, 1000));

        let mut c3 = c1.clone();
        c3.samples = vec![(0.0, 2000), (1.0, 3000)];
        assert!(matches!(
            support_interval(&[c1, c3]),
            Err(Error::NoCommonSupport { .. })
        ));
    }

    #[test]
    fn support_interval_ends_on_wide_resnet_shaped_dims() {
        // wide square pointwise stacks: the common-support interval's lower
        // end coincides with the rank-factorised minimum and its upper end
        // with the shuffle-linear maximum
        let dims = [(160, 160), (320, 320), (640, 640)];
        let curves: Vec<KnobCurve> = KindId::ALL
            .iter()
            .filter(|k| **k != KindId::Dense)
            .map(|&k| knob_curve(k, &dims, 33).unwrap())
            .collect();
        let (lo, hi) = support_interval(&curves).unwrap();
        let rf = curves.iter().find(|c| c.kind == KindId::RankFactorised).unwrap();
        let sh = curves.iter().find(|c| c.kind == KindId::ShuffleLinear).unwrap();
        assert_eq!(lo, rf.min_params(), "lower end not set by the RF minimum");
        assert_eq!(hi, sh.max_params(), "upper end not set by the shuffle maximum");
    }

    #[test]
    fn log_midpoint_values() {
        assert!((log_midpoint(0.6e6, 2.4e6) - 1.2e6).abs() < 1e-6);
        let x = 3.7;
        let k = 2.5;
        assert!((log_midpoint(x, x * k * k) - x * k).abs() < 1e-12);
        // squared identity
        let m = log_midpoint(123.0, 4567.0);
        assert!((m * m - 123.0 * 4567.0).abs() / (123.0 * 4567.0) < 1e-12);
    }

    #[test]
    fn solve_rf_exact() {
        let sol = solve_budget(KindId::RankFactorised, &[(256, 256)], 32768, 0.0).unwrap();
        assert_eq!(
            family_for(sol.knob, 256, 256).unwrap(),
            Family::RankFactorised { d_bn: 64 }
        );
        assert_eq!(sol.params, 32768);
    }

    #[test]
    fn solve_hashed_exact() {
        for target in [1u64, 17, 1000, 4096] {
            let sol = solve_budget(KindId::HashedNet, &[(64, 64)], target, 0.0).unwrap();
            assert_eq!(sol.params, target);
        }
    }

    #[test]
    fn solve_tt_reference_budget() {
        let sol = solve_budget(KindId::TensorTrain, &[(256, 256)], 4608, 0.0).unwrap();
        assert_eq!(sol.knob, Knob::TtRank(8));
        assert_eq!(sol.params, 4608);
    }

    #[test]
    fn solve_out_of_support() {
        let err = solve_budget(KindId::RankFactorised, &[(256, 256)], 200, 0.0).unwrap_err();
        match err {
            Error::OutOfSupport { target, lo, hi } => {
                assert_eq!(target, 200);
                assert_eq!(lo, 512);
                assert_eq!(hi, 131072);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ties_break_toward_fewer_params() {
        // ACDC on 64x64: params = 128 L; target exactly between L=1 and L=2
        let sol = solve_budget(KindId::Acdc, &[(64, 64)], 192, 0.0).unwrap();
        assert_eq!(sol.knob, Knob::Layers(1));
        assert_eq!(sol.params, 128);
    }
}
