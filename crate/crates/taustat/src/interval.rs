//! Clustering-range estimation: the endpoint where the tau curve first
//! falls back to 1, the bootstrap crossing sample, and percentile / BCa
//! confidence intervals around it.
//!
//! The crossing sample is not a random sample of all replicates - only
//! curves that start above tau = 1 and come back down contribute - so the
//! fraction of replicates used is always reported and anything below 100%
//! must be surfaced as a validity warning downstream.

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapRun;
use crate::envelope::EnvelopeTestResult;
use crate::error::TauError;
use crate::model::TauCurve;

/// Outcome of scanning one curve for a downward threshold crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossingOutcome {
    /// First distance at which the curve reaches or passes the threshold
    /// from strictly above.
    Crossed(f64),
    /// The curve's first defined point is already at or below the threshold.
    StartedAtOrBelow,
    /// The curve stays strictly above the threshold throughout.
    NeverCrossed,
}

/// Scans (midpoint, value - threshold) points, in midpoint order, for the
/// first downward crossing of zero. A point exactly on the threshold counts
/// as crossed at that midpoint; between points the crossing distance is
/// linearly interpolated.
pub(crate) fn first_downward_crossing(diffs: &[(f64, f64)]) -> CrossingOutcome {
    if diffs.first().map_or(true, |&(_, v)| v <= 0.0) {
        return CrossingOutcome::StartedAtOrBelow;
    }
    for w in diffs.windows(2) {
        let (m0, v0) = w[0];
        let (m1, v1) = w[1];
        if v1 <= 0.0 {
            return CrossingOutcome::Crossed(if v1 == 0.0 {
                m1
            } else {
                m0 + (m1 - m0) * v0 / (v0 - v1)
            });
        }
    }
    CrossingOutcome::NeverCrossed
}

fn crossing_of_one(curve: &TauCurve) -> Result<CrossingOutcome, TauError> {
    let points = curve.defined_points();
    if points.len() < 2 {
        return Err(TauError::TooFewDefinedValues(points.len()));
    }
    let diffs: Vec<(f64, f64)> = points.iter().map(|&(m, v)| (m, v - 1.0)).collect();
    Ok(first_downward_crossing(&diffs))
}

/// The clustering endpoint: the interpolated distance where the curve,
/// having started above tau = 1 at its first defined midpoint, first comes
/// down to 1. `None` when the curve starts at/below 1 or never crosses.
pub fn estimate_endpoint(curve: &TauCurve) -> Result<Option<f64>, TauError> {
    Ok(match crossing_of_one(curve)? {
        CrossingOutcome::Crossed(d) => Some(d),
        _ => None,
    })
}

/// Why replicates did or did not contribute a crossing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingCounts {
    pub crossed: usize,
    pub started_at_or_below: usize,
    pub never_crossed: usize,
    /// Failed replicates plus curves with any flagged-undefined band (a
    /// crossing could hide inside the gap, so they are excluded whole).
    pub unusable: usize,
}

impl CrossingCounts {
    pub fn total(&self) -> usize {
        self.crossed + self.started_at_or_below + self.never_crossed + self.unusable
    }
}

/// Per-replicate first-downward-crossing distances of tau = 1.
pub fn extract_crossings(run: &BootstrapRun) -> Result<(Vec<f64>, CrossingCounts), TauError> {
    let mut sample = Vec::new();
    let mut counts = CrossingCounts::default();
    for rep in &run.replicates {
        let Some(curve) = &rep.curve else {
            counts.unusable += 1;
            continue;
        };
        if curve.values.iter().any(|v| v.is_none()) {
            counts.unusable += 1;
            continue;
        }
        match crossing_of_one(curve)? {
            CrossingOutcome::Crossed(d) => {
                counts.crossed += 1;
                sample.push(d);
            }
            CrossingOutcome::StartedAtOrBelow => counts.started_at_or_below += 1,
            CrossingOutcome::NeverCrossed => counts.never_crossed += 1,
        }
    }
    if sample.is_empty() {
        return Err(TauError::NoCrossings);
    }
    Ok((sample, counts))
}

/// Type-7 interpolated quantile of an ascending-sorted slice.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
    }
}

/// Equal-tailed percentile interval with linear interpolation between order
/// statistics.
pub fn percentile_ci(sample: &[f64], coverage: f64) -> Result<(f64, f64), TauError> {
    if sample.len() < 2 {
        return Err(TauError::TooFewValues {
            needed: 2,
            got: sample.len(),
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = (1.0 - coverage) / 2.0;
    Ok((
        quantile_sorted(&sorted, lo),
        quantile_sorted(&sorted, 1.0 - lo),
    ))
}

/// BCa interval plus the corrections it applied. When the bias correction is
/// degenerate (every sample value on one side of the point estimate) the
/// interval falls back to the percentile CI and says so.
#[derive(Debug, Clone, PartialEq)]
pub struct BcaOutcome {
    pub interval: (f64, f64),
    pub fell_back_to_percentile: bool,
    pub bias_correction: Option<f64>,
    pub acceleration: Option<f64>,
}

use crate::normal::{norm_cdf, norm_ppf};

/// Bias-corrected and accelerated bootstrap interval.
///
/// Bias correction z0 comes from the fraction of the bootstrap sample below
/// the point estimate; acceleration comes from a jackknife over the
/// bootstrap sample itself (an approximation to re-jackknifing the original
/// data: the leave-one-out factors cancel so it reduces to the sample's
/// moment skewness). Adjusted levels are Phi(z0 + (z0+z)/(1-a(z0+z))).
pub fn bca_ci(
    sample: &[f64],
    point_estimate: f64,
    coverage: f64,
) -> Result<BcaOutcome, TauError> {
    let b = sample.len();
    if b < 20 {
        // Below this the jackknife acceleration is noise; use more
        // replicates rather than trusting an unstable interval.
        return Err(TauError::TooFewValues {
            needed: 20,
            got: b,
        });
    }
    assert!(point_estimate.is_finite());
    let below = sample.iter().filter(|&&x| x < point_estimate).count();
    if below == 0 || below == b {
        return Ok(BcaOutcome {
            interval: percentile_ci(sample, coverage)?,
            fell_back_to_percentile: true,
            bias_correction: None,
            acceleration: None,
        });
    }
    let z0 = norm_ppf(below as f64 / b as f64);

    let mean = sample.iter().sum::<f64>() / b as f64;
    let (mut d2, mut d3) = (0.0, 0.0);
    for &x in sample {
        let d = x - mean;
        d2 += d * d;
        d3 += d * d * d;
    }
    let a = if d2 > 0.0 { d3 / (6.0 * d2.powf(1.5)) } else { 0.0 };

    let lo = (1.0 - coverage) / 2.0;
    let adjusted = |z_alpha: f64| {
        let w = z0 + z_alpha;
        norm_cdf(z0 + w / (1.0 - a * w)).clamp(0.0, 1.0)
    };
    let a1 = adjusted(norm_ppf(lo));
    let a2 = adjusted(norm_ppf(1.0 - lo));

    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    let (q1, q2) = (
        quantile_sorted(&sorted, a1.min(a2)),
        quantile_sorted(&sorted, a1.max(a2)),
    );
    Ok(BcaOutcome {
        interval: (q1, q2),
        fell_back_to_percentile: false,
        bias_correction: Some(z0),
        acceleration: Some(a),
    })
}

/// SAS-convention bimodality coefficient: (G1^2 + 1) over adjusted kurtosis;
/// values above [`BIMODALITY_THRESHOLD`] (the uniform distribution's value)
/// suggest a bimodal sample.
pub fn bimodality_coefficient(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    if sample.len() < 4 {
        return f64::NAN;
    }
    let mean = sample.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in sample {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return f64::NAN;
    }
    let g1 = m3 / m2.powf(1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    let big_g1 = g1 * (n * (n - 1.0)).sqrt() / (n - 2.0);
    let big_g2 = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
    (big_g1 * big_g1 + 1.0) / (big_g2 + 3.0 * (n - 1.0).powi(2) / ((n - 2.0) * (n - 3.0)))
}

/// Bimodality coefficient of the uniform distribution; higher suggests two
/// modes.
pub const BIMODALITY_THRESHOLD: f64 = 5.0 / 9.0;

/// Area scaling of a disc when its radius scales by `ratio` (radial bias
/// translated to the areal scale that control effort tracks).
pub fn disc_area_ratio(ratio: f64) -> f64 {
    ratio * ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Percentile,
    Bca,
}

/// Full clustering-range estimate: point estimate, crossing sample, CI and
/// the diagnostics every output channel must carry.
#[derive(Debug, Clone)]
pub struct EndpointEstimate {
    pub d_hat: f64,
    pub crossing_sample: Vec<f64>,
    pub ci: (f64, f64),
    pub ci_method: CiMethod,
    pub coverage: f64,
    /// Fraction of replicates contributing a crossing; below 1 the CI's
    /// nominal level is optimistic and outputs must say so.
    pub proportion_used: f64,
    pub counts: CrossingCounts,
    pub sample_mean: f64,
    pub sample_median: f64,
    pub bimodality: f64,
    pub bimodal: bool,
    pub bca_fell_back: bool,
}

/// Estimates the clustering endpoint and its CI from a point-estimate curve
/// and a bootstrap run.
pub fn estimate_range(
    point: &TauCurve,
    run: &BootstrapRun,
    ci_method: CiMethod,
    coverage: f64,
) -> Result<EndpointEstimate, TauError> {
    let d_hat = estimate_endpoint(point)?.ok_or(TauError::NoCrossings)?;
    let (sample, counts) = extract_crossings(run)?;
    let (ci, bca_fell_back) = match ci_method {
        CiMethod::Percentile => (percentile_ci(&sample, coverage)?, false),
        CiMethod::Bca => {
            let out = bca_ci(&sample, d_hat, coverage)?;
            (out.interval, out.fell_back_to_percentile)
        }
    };
    let mut sorted = sample.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let median = quantile_sorted(&sorted, 0.5);
    let bimodality = bimodality_coefficient(&sorted);
    Ok(EndpointEstimate {
        d_hat,
        crossing_sample: sample,
        ci,
        ci_method,
        coverage,
        proportion_used: counts.crossed as f64 / counts.total() as f64,
        counts,
        sample_mean: mean,
        sample_median: median,
        bimodality,
        bimodal: bimodality > BIMODALITY_THRESHOLD,
        bca_fell_back,
    })
}

/// The inhibition startpoint: where the observed curve, having been at or
/// above the null envelope's lower bound, exits it downward into tau < 1
/// ahead of the test's first below-region.
pub fn estimate_inhibition_start(
    curve: &TauCurve,
    env: &EnvelopeTestResult,
) -> Result<f64, TauError> {
    let region = env
        .first_below_region()
        .ok_or(TauError::NoInhibition("the envelope test found no below-region"))?;
    match inhibition_crossing(curve, env, region.start_band) {
        Some(d) => Ok(d),
        None => Err(TauError::NoInhibition(
            "curve never sits above the envelope lower bound before the below-region",
        )),
    }
}

/// Bootstrap crossing sample for the inhibition startpoint: each replicate's
/// last downward exit through the envelope lower bound before the first
/// below-region.
pub fn inhibition_crossing_sample(
    run: &BootstrapRun,
    env: &EnvelopeTestResult,
) -> Result<(Vec<f64>, CrossingCounts), TauError> {
    let region = env
        .first_below_region()
        .ok_or(TauError::NoInhibition("the envelope test found no below-region"))?;
    let mut sample = Vec::new();
    let mut counts = CrossingCounts::default();
    for rep in &run.replicates {
        let Some(curve) = &rep.curve else {
            counts.unusable += 1;
            continue;
        };
        match inhibition_crossing(curve, env, region.start_band) {
            Some(d) => {
                counts.crossed += 1;
                sample.push(d);
            }
            None => counts.never_crossed += 1,
        }
    }
    if sample.is_empty() {
        return Err(TauError::NoCrossings);
    }
    Ok((sample, counts))
}

/// Last downward zero-crossing of (curve - envelope lower bound) at or
/// before the first below-region band, requiring the curve to enter
/// tau < 1 territory there.
fn inhibition_crossing(
    curve: &TauCurve,
    env: &EnvelopeTestResult,
    region_start: usize,
) -> Option<f64> {
    let mids = curve.bands.midpoints();
    let mut diffs: Vec<(f64, f64)> = Vec::new();
    for b in 0..=region_start {
        if let (Some(v), Some(lo)) = (curve.values.get(b).copied().flatten(), env.lower[b]) {
            diffs.push((mids[b], v - lo));
        }
    }
    // The curve must actually be in tau < 1 at the region for the exit to
    // count as inhibition.
    if curve.values.get(region_start).copied().flatten()? >= 1.0 {
        return None;
    }
    let mut last = None;
    for w in diffs.windows(2) {
        let ((m0, v0), (m1, v1)) = (w[0], w[1]);
        if v0 > 0.0 && v1 <= 0.0 {
            last = Some(if v1 == 0.0 {
                m1
            } else {
                m0 + (m1 - m0) * v0 / (v0 - v1)
            });
        }
    }
    last
}
