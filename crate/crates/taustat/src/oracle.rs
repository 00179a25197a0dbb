//! Naive, obviously-correct reference implementations used as brute-force
//! ground truth by the test and validation suites (and the CLI's
//! `oracle-check` command). Deliberately unoptimised: direct double loops,
//! no caching, literal formulas. Nothing here shares numeric machinery with
//! the optimised paths it validates - including the normal cdf/quantile,
//! built from a series/continued-fraction erfc and bisection.

use crate::error::TauError;
use crate::model::{CaseSet, DistanceBandSet, RelatednessRule};

fn dist(cs: &CaseSet, i: usize, j: usize) -> f64 {
    let a = &cs.cases()[i];
    let b = &cs.cases()[j];
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

fn related(cs: &CaseSet, rule: &RelatednessRule, i: usize, j: usize) -> bool {
    rule.related(cs.cases()[i].onset, cs.cases()[j].onset)
}

/// Ordered-pair (related, unrelated) counts per band plus `[0, inf)` totals,
/// by direct double loops.
pub fn oracle_band_counts(
    cs: &CaseSet,
    rule: &RelatednessRule,
    bands: &DistanceBandSet,
) -> (Vec<(u64, u64)>, (u64, u64)) {
    let n = cs.n();
    let per_band = bands
        .bands()
        .iter()
        .map(|band| {
            let mut rel = 0;
            let mut unrel = 0;
            for i in 0..n {
                for j in 0..n {
                    if i == j || !band.contains(dist(cs, i, j)) {
                        continue;
                    }
                    if related(cs, rule, i, j) {
                        rel += 1;
                    } else {
                        unrel += 1;
                    }
                }
            }
            (rel, unrel)
        })
        .collect();
    let mut rel = 0;
    let mut unrel = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if related(cs, rule, i, j) {
                rel += 1;
            } else {
                unrel += 1;
            }
        }
    }
    (per_band, (rel, unrel))
}

/// Literal evaluation of the tau odds ratio per band.
pub fn oracle_tau(
    cs: &CaseSet,
    rule: &RelatednessRule,
    bands: &DistanceBandSet,
) -> Result<Vec<Option<f64>>, TauError> {
    let (per_band, (rel_all, unrel_all)) = oracle_band_counts(cs, rule, bands);
    if rel_all == 0 || unrel_all == 0 {
        return Err(TauError::DegenerateBackgroundOdds {
            related: rel_all,
            unrelated: unrel_all,
        });
    }
    let background = rel_all as f64 / unrel_all as f64;
    Ok(per_band
        .iter()
        .map(|&(rel, unrel)| {
            (unrel > 0).then(|| (rel as f64 / unrel as f64) / background)
        })
        .collect())
}

/// m_i(band, k) and the all-distance m_i(k) for one case, directly.
pub fn oracle_mark_counts(
    cs: &CaseSet,
    rule: &RelatednessRule,
    bands: &DistanceBandSet,
    case: usize,
) -> (Vec<(u64, u64)>, (u64, u64)) {
    let n = cs.n();
    let per_band = bands
        .bands()
        .iter()
        .map(|band| {
            let mut rel = 0;
            let mut unrel = 0;
            for j in 0..n {
                if j == case || !band.contains(dist(cs, case, j)) {
                    continue;
                }
                if related(cs, rule, case, j) {
                    rel += 1;
                } else {
                    unrel += 1;
                }
            }
            (rel, unrel)
        })
        .collect();
    let mut rel = 0;
    let mut unrel = 0;
    for j in 0..n {
        if j == case {
            continue;
        }
        if related(cs, rule, case, j) {
            rel += 1;
        } else {
            unrel += 1;
        }
    }
    (per_band, (rel, unrel))
}

/// Literal modified marked-point bootstrap replicate: sums the mark
/// functions over the resample slots, then forms bootstrapped odds and tau.
pub fn oracle_mmpsb(
    cs: &CaseSet,
    rule: &RelatednessRule,
    bands: &DistanceBandSet,
    indices: &[usize],
) -> Result<Vec<Option<f64>>, TauError> {
    let k = bands.len();
    let mut rel = vec![0u64; k];
    let mut unrel = vec![0u64; k];
    let mut rel_all = 0u64;
    let mut unrel_all = 0u64;
    for &i_star in indices {
        let (per_band, (r, u)) = oracle_mark_counts(cs, rule, bands, i_star);
        for (b, &(br, bu)) in per_band.iter().enumerate() {
            rel[b] += br;
            unrel[b] += bu;
        }
        rel_all += r;
        unrel_all += u;
    }
    if rel_all == 0 || unrel_all == 0 {
        return Err(TauError::DegenerateBackgroundOdds {
            related: rel_all,
            unrelated: unrel_all,
        });
    }
    let background = rel_all as f64 / unrel_all as f64;
    Ok((0..k)
        .map(|b| (unrel[b] > 0).then(|| (rel[b] as f64 / unrel[b] as f64) / background))
        .collect())
}

/// Literal marked-point bootstrap replicate: the average of locally
/// evaluated tau ratios, with IEEE division semantics; non-finite band
/// averages come back as `None`.
pub fn oracle_mpsb(
    cs: &CaseSet,
    rule: &RelatednessRule,
    bands: &DistanceBandSet,
    indices: &[usize],
) -> Vec<Option<f64>> {
    let k = bands.len();
    let n = indices.len() as f64;
    let mut sums = vec![0.0f64; k];
    for &i_star in indices {
        let (per_band, (bg_rel, bg_unrel)) = oracle_mark_counts(cs, rule, bands, i_star);
        let background = bg_rel as f64 / bg_unrel as f64;
        for (b, &(rel, unrel)) in per_band.iter().enumerate() {
            sums[b] += (rel as f64 / unrel as f64) / background;
        }
    }
    sums
        .into_iter()
        .map(|s| {
            let v = s / n;
            v.is_finite().then_some(v)
        })
        .collect()
}

/// Extreme ranks (minimum two-sided pointwise rank) for each curve of a
/// complete value matrix, by direct counting.
pub fn oracle_envelope_ranks(matrix: &[Vec<f64>]) -> Vec<u32> {
    let m = matrix.len();
    let bands = matrix[0].len();
    (0..m)
        .map(|i| {
            (0..bands)
                .map(|b| {
                    let v = matrix[i][b];
                    let below = (0..m).filter(|&j| matrix[j][b] < v).count() as u32;
                    let above = (0..m).filter(|&j| matrix[j][b] > v).count() as u32;
                    (below + 1).min(above + 1)
                })
                .min()
                .unwrap()
        })
        .collect()
}

/// Interpolated quantile of an unsorted sample, written out longhand.
pub fn oracle_quantile(sample: &[f64], p: f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (xs.len() as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// Textbook BCa interval with an explicit leave-one-out jackknife over the
/// bootstrap sample and this module's own normal functions.
pub fn oracle_bca(sample: &[f64], point_estimate: f64, coverage: f64) -> (f64, f64) {
    let b = sample.len();
    let below = sample.iter().filter(|&&x| x < point_estimate).count();
    let z0 = oracle_norm_ppf(below as f64 / b as f64);

    let total: f64 = sample.iter().sum();
    let loo: Vec<f64> = sample
        .iter()
        .map(|&x| (total - x) / (b as f64 - 1.0))
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / b as f64;
    let num: f64 = loo.iter().map(|&t| (loo_mean - t).powi(3)).sum();
    let den: f64 = loo.iter().map(|&t| (loo_mean - t).powi(2)).sum();
    let a = if den > 0.0 { num / (6.0 * den.powf(1.5)) } else { 0.0 };

    let alpha = (1.0 - coverage) / 2.0;
    let level = |z_alpha: f64| {
        let w = z0 + z_alpha;
        oracle_norm_cdf(z0 + w / (1.0 - a * w))
    };
    (
        oracle_quantile(sample, level(oracle_norm_ppf(alpha))),
        oracle_quantile(sample, level(oracle_norm_ppf(1.0 - alpha))),
    )
}

/// First downward crossing of `threshold` over (midpoint, value) points, by
/// brute segment scan; `None` unless the curve starts strictly above.
pub fn oracle_first_downward_crossing(points: &[(f64, f64)], threshold: f64) -> Option<f64> {
    if points.first()?.1 <= threshold {
        return None;
    }
    for w in points.windows(2) {
        let ((m0, v0), (m1, v1)) = (w[0], w[1]);
        if v0 > threshold && v1 <= threshold {
            return Some(if v1 == threshold {
                m1
            } else {
                m0 + (m1 - m0) * (v0 - threshold) / (v0 - v1)
            });
        }
    }
    None
}

/// First upward crossing, mirroring [`oracle_first_downward_crossing`].
pub fn oracle_first_upward_crossing(points: &[(f64, f64)], threshold: f64) -> Option<f64> {
    if points.first()?.1 >= threshold {
        return None;
    }
    for w in points.windows(2) {
        let ((m0, v0), (m1, v1)) = (w[0], w[1]);
        if v0 < threshold && v1 >= threshold {
            return Some(if v1 == threshold {
                m1
            } else {
                m0 + (m1 - m0) * (threshold - v0) / (v1 - v0)
            });
        }
    }
    None
}

/// erf by Maclaurin series (|x| < 2) or a continued-fraction erfc (else).
fn oracle_erfc(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 2.0 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^k x^(2k+1) / (k! (2k+1))
        let mut term = x;
        let mut sum = x;
        for k in 1..80 {
            term *= -x * x / k as f64;
            sum += term / (2 * k + 1) as f64;
            if term.abs() < 1e-18 {
                break;
            }
        }
        1.0 - sum * 2.0 / std::f64::consts::PI.sqrt()
    } else {
        // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + (2/2)/(x + ...)))
        let mut tail = 0.0;
        for k in (1..=100).rev() {
            tail = (k as f64 / 2.0) / (x + tail);
        }
        (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + tail)
    }
}

/// Standard normal cdf built on [`oracle_erfc`].
pub fn oracle_norm_cdf(z: f64) -> f64 {
    let x = z.abs() / std::f64::consts::SQRT_2;
    let half_erfc = 0.5 * oracle_erfc(x);
    if z >= 0.0 {
        1.0 - half_erfc
    } else {
        half_erfc
    }
}

/// Standard normal quantile by bisection on the oracle cdf, polished with
/// two Newton steps.
pub fn oracle_norm_ppf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if oracle_norm_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..2 {
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        z -= (oracle_norm_cdf(z) - p) / pdf;
    }
    z
}
