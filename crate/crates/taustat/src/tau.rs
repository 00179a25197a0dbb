//! The tau odds-ratio estimator, its bootstrap-replicate variants and
//! midpoint interpolation.
//!
//! tau(d_l, d_m) = theta(d_l, d_m) / theta(0, inf), where theta is the odds
//! of a pair being temporally related. Values are formed from exact integer
//! counts by one cross-multiplied floating-point division, so identical
//! counts always give bit-identical tau values.

use crate::error::TauError;
use crate::model::{CaseSet, CurveProvenance, DistanceBandSet, RelatednessRule, TauCurve};
use crate::pairs::{BandCounts, MarkCounts, PairTable};

/// tau for one band from integer counts: (rel_b/unrel_b) / (rel_all/unrel_all),
/// evaluated as a single division of exact integer cross-products.
/// `None` when the band's unrelated count is zero (odds undefined).
#[inline]
fn tau_value(rel_b: u64, unrel_b: u64, rel_all: u64, unrel_all: u64) -> Option<f64> {
    if unrel_b == 0 {
        return None;
    }
    let num = rel_b as u128 * unrel_all as u128;
    let den = unrel_b as u128 * rel_all as u128;
    Some(num as f64 / den as f64)
}

fn check_background(counts: &BandCounts) -> Result<(), TauError> {
    if counts.overall.related == 0 || counts.overall.unrelated == 0 {
        return Err(TauError::DegenerateBackgroundOdds {
            related: counts.overall.related,
            unrelated: counts.overall.unrelated,
        });
    }
    Ok(())
}

/// The tau odds curve from per-band counts.
///
/// Bands with no unrelated pairs are flagged-undefined; bands with no
/// related pairs legitimately give tau = 0.
pub fn tau_odds(
    counts: &BandCounts,
    bands: &DistanceBandSet,
    rule: RelatednessRule,
    provenance: CurveProvenance,
) -> Result<TauCurve, TauError> {
    check_background(counts)?;
    let values = counts
        .per_band
        .iter()
        .map(|c| {
            tau_value(
                c.related,
                c.unrelated,
                counts.overall.related,
                counts.overall.unrelated,
            )
        })
        .collect();
    Ok(TauCurve::new(bands.clone(), values, rule, provenance))
}

/// Convenience: pair table, counts and curve in one call.
pub fn tau_point_estimate(
    cs: &CaseSet,
    rule: &RelatednessRule,
    bands: &DistanceBandSet,
) -> Result<TauCurve, TauError> {
    let counts = PairTable::build(cs, rule).band_counts(bands);
    tau_odds(&counts, bands, *rule, CurveProvenance::PointEstimate)
}

impl TauCurve {
    /// tau(d) by piecewise-linear interpolation between defined band
    /// midpoints. Flagged-undefined bands are skipped, connecting the
    /// nearest defined midpoints (callers can surface
    /// [`TauCurve::undefined_bands`] as a warning).
    pub fn interpolate(&self, d: f64) -> Result<f64, TauError> {
        interpolate_points(&self.defined_points(), d)
    }

    /// As [`TauCurve::interpolate`], but refuses to bridge a
    /// flagged-undefined band.
    pub fn interpolate_strict(&self, d: f64) -> Result<f64, TauError> {
        let mids = self.bands.midpoints();
        // The bands whose midpoints bracket d must both be defined.
        let hi = mids.partition_point(|&m| m < d);
        if hi < mids.len() && mids[hi] == d {
            return self.values[hi].ok_or(TauError::UndefinedNeighbor(hi));
        }
        if hi == 0 || hi == mids.len() {
            return Err(TauError::OutOfRange {
                d,
                min: *mids.first().unwrap_or(&f64::NAN),
                max: *mids.last().unwrap_or(&f64::NAN),
            });
        }
        for k in [hi - 1, hi] {
            if self.values[k].is_none() {
                return Err(TauError::UndefinedNeighbor(k));
            }
        }
        interpolate_points(&self.defined_points(), d)
    }
}

/// Linear interpolation over (midpoint, value) pairs with strictly
/// increasing midpoints; exact at the midpoints themselves.
pub(crate) fn interpolate_points(points: &[(f64, f64)], d: f64) -> Result<f64, TauError> {
    let out_of_range = || TauError::OutOfRange {
        d,
        min: points.first().map_or(f64::NAN, |p| p.0),
        max: points.last().map_or(f64::NAN, |p| p.0),
    };
    let hi = points.partition_point(|&(m, _)| m < d);
    if hi < points.len() && points[hi].0 == d {
        return Ok(points[hi].1);
    }
    if hi == 0 || hi == points.len() {
        return Err(out_of_range());
    }
    let (m0, v0) = points[hi - 1];
    let (m1, v1) = points[hi];
    Ok(v0 + (v1 - v0) * (d - m0) / (m1 - m0))
}

/// Turns a resample multiset (n case indices, duplicates expected) into
/// per-case multiplicities.
pub(crate) fn multiplicities(n: usize, indices: &[usize]) -> Vec<u32> {
    assert_eq!(indices.len(), n, "resample must have exactly n entries");
    let mut counts = vec![0u32; n];
    for &i in indices {
        counts[i] += 1;
    }
    counts
}

/// One modified marked-point bootstrap replicate: per-case mark counts are
/// summed over the resample multiset (each local mark function still runs
/// against all other original cases), then odds and tau form as usual.
/// Zero-count cells simply add zeros.
pub fn tau_mmpsb_replicate(
    mc: &MarkCounts,
    bands: &DistanceBandSet,
    rule: RelatednessRule,
    indices: &[usize],
) -> Result<TauCurve, TauError> {
    tau_mmpsb_from_counts(mc, bands, rule, &multiplicities(mc.n_cases(), indices))
}

pub(crate) fn tau_mmpsb_from_counts(
    mc: &MarkCounts,
    bands: &DistanceBandSet,
    rule: RelatednessRule,
    counts: &[u32],
) -> Result<TauCurve, TauError> {
    let n_bands = mc.n_bands();
    assert_eq!(n_bands, bands.len());
    let mut rel = vec![0u64; n_bands];
    let mut unrel = vec![0u64; n_bands];
    let mut rel_all = 0u64;
    let mut unrel_all = 0u64;
    for (case, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let c = c as u64;
        for (b, (&r, &u)) in mc
            .related_row(case)
            .iter()
            .zip(mc.unrelated_row(case))
            .enumerate()
        {
            rel[b] += c * r as u64;
            unrel[b] += c * u as u64;
        }
        rel_all += c * mc.overall_related(case) as u64;
        unrel_all += c * mc.overall_unrelated(case) as u64;
    }
    if rel_all == 0 || unrel_all == 0 {
        return Err(TauError::DegenerateBackgroundOdds {
            related: rel_all,
            unrelated: unrel_all,
        });
    }
    let values = (0..n_bands)
        .map(|b| tau_value(rel[b], unrel[b], rel_all, unrel_all))
        .collect();
    Ok(TauCurve::new(
        bands.clone(),
        values,
        rule,
        CurveProvenance::BootstrapReplicate,
    ))
}

/// Per-band counts of local tau terms that could not be evaluated in a
/// marked-point (Loh & Stein style) replicate: `infinite` terms had a zero
/// local unrelated count with related pairs present; `undefined` terms had
/// zero counts on both sides. Counts are weighted by resample multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MpsbDiagnostics {
    pub infinite_terms: Vec<u32>,
    pub undefined_terms: Vec<u32>,
}

impl MpsbDiagnostics {
    /// True when every band of the replicate evaluated cleanly.
    pub fn fully_usable(&self) -> bool {
        self.infinite_terms.iter().all(|&c| c == 0)
            && self.undefined_terms.iter().all(|&c| c == 0)
    }
}

/// One marked-point bootstrap replicate: the average of locally evaluated
/// tau ratios over the resample multiset. Numerically fragile by
/// construction; failed local terms are recorded as data, and any band with
/// a failed term is flagged-undefined in the returned curve.
pub fn tau_mpsb_replicate(
    mc: &MarkCounts,
    bands: &DistanceBandSet,
    rule: RelatednessRule,
    indices: &[usize],
) -> (TauCurve, MpsbDiagnostics) {
    tau_mpsb_from_counts(mc, bands, rule, &multiplicities(mc.n_cases(), indices))
}

pub(crate) fn tau_mpsb_from_counts(
    mc: &MarkCounts,
    bands: &DistanceBandSet,
    rule: RelatednessRule,
    counts: &[u32],
) -> (TauCurve, MpsbDiagnostics) {
    let n_bands = mc.n_bands();
    assert_eq!(n_bands, bands.len());
    let n = counts.iter().map(|&c| c as u64).sum::<u64>() as f64;
    let mut sums = vec![0.0f64; n_bands];
    let mut infinite = vec![0u32; n_bands];
    let mut undefined = vec![0u32; n_bands];
    for (case, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let bg_rel = mc.overall_related(case) as u64;
        let bg_unrel = mc.overall_unrelated(case) as u64;
        for b in 0..n_bands {
            // Local tau_i = (m_i(b,1)/m_i(b,0)) / (bg_rel/bg_unrel) as one
            // integer cross-product ratio.
            let num = mc.related(case, b) as u64 * bg_unrel;
            let den = mc.unrelated(case, b) as u64 * bg_rel;
            if den > 0 {
                sums[b] += c as f64 * (num as f64 / den as f64);
            } else if num > 0 {
                infinite[b] += c;
            } else {
                undefined[b] += c;
            }
        }
    }
    let values = (0..n_bands)
        .map(|b| (infinite[b] == 0 && undefined[b] == 0).then(|| sums[b] / n))
        .collect();
    let curve = TauCurve::new(bands.clone(), values, rule, CurveProvenance::BootstrapReplicate);
    (
        curve,
        MpsbDiagnostics {
            infinite_terms: infinite,
            undefined_terms: undefined,
        },
    )
}
