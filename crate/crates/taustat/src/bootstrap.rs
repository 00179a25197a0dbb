//! Spatial bootstrap distributions of tau curves.
//!
//! Three resampling schemes over a shared precomputed kernel:
//!
//! * RISB - resample case indices, rebuild the dataset, drop pairs formed
//!   from two copies of the same original case ("self comparisons").
//! * MMPSB - resample per-case mark-count functions and recombine them into
//!   bootstrapped odds; each resampled case is still compared against all
//!   other original cases, which retains more pair information and gives a
//!   narrower envelope.
//! * MPSB - average locally evaluated tau ratios. Numerically fragile (local
//!   odds go infinite whenever a case has no unrelated neighbour in a band);
//!   provided for completeness and diagnostics, not recommended.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::TauError;
use crate::interval::quantile_sorted;
use crate::model::{CaseSet, CurveProvenance, DistanceBandSet, RelatednessRule, TauCurve};
use crate::pairs::{BandLayout, PairTable};
use crate::rng::{self, domain, RngPolicy};
use crate::tau::{self, MpsbDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapMethod {
    Risb,
    Mmpsb,
    Mpsb,
}

impl std::fmt::Display for BootstrapMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BootstrapMethod::Risb => "risb",
            BootstrapMethod::Mmpsb => "mmpsb",
            BootstrapMethod::Mpsb => "mpsb",
        })
    }
}

/// One bootstrap replicate: its curve (None when the replicate failed with
/// degenerate background odds), resample composition stats, and MPSB term
/// diagnostics where applicable.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub curve: Option<TauCurve>,
    pub distinct_cases: usize,
    /// Unique ordered pairs whose information the replicate retains:
    /// u(u-1) for RISB, u(n-1) for the marked-point schemes.
    pub retained_unique_pairs: u64,
    pub mpsb: Option<MpsbDiagnostics>,
}

/// A full bootstrap run of N replicates.
#[derive(Debug, Clone)]
pub struct BootstrapRun {
    pub method: BootstrapMethod,
    pub replicates: Vec<ReplicateOutcome>,
    pub n_cases: usize,
    pub bands: DistanceBandSet,
}

impl BootstrapRun {
    pub fn n(&self) -> usize {
        self.replicates.len()
    }

    pub fn failed_count(&self) -> usize {
        self.replicates.iter().filter(|r| r.curve.is_none()).count()
    }

    pub fn curves(&self) -> impl Iterator<Item = &TauCurve> {
        self.replicates.iter().filter_map(|r| r.curve.as_ref())
    }

    pub fn mean_distinct_cases(&self) -> f64 {
        let total: usize = self.replicates.iter().map(|r| r.distinct_cases).sum();
        total as f64 / self.n() as f64
    }

    /// Mean fraction of the n(n-1) unique ordered pairs retained.
    pub fn mean_retained_pair_fraction(&self) -> f64 {
        let all = (self.n_cases * (self.n_cases - 1)) as f64;
        let total: u64 = self.replicates.iter().map(|r| r.retained_unique_pairs).sum();
        total as f64 / (self.n() as f64 * all)
    }

    /// For MPSB runs: fraction of replicates whose every band evaluated
    /// cleanly. Other methods report on curve-level failures only.
    pub fn fully_usable_fraction(&self) -> f64 {
        let usable = self
            .replicates
            .iter()
            .filter(|r| match (&r.curve, &r.mpsb) {
                (None, _) => false,
                (Some(_), Some(diag)) => diag.fully_usable(),
                (Some(c), None) => c.values.iter().all(|v| v.is_some()),
            })
            .count();
        usable as f64 / self.n() as f64
    }
}

/// n uniform draws with replacement from 0..n.
pub fn resample_indices(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng::uniform_index(rng, n)).collect()
}

/// Shared per-pair context for RISB replicates: elementary bin and the
/// number of related ordered directions (0, 1 or 2) per unordered pair.
struct RisbContext {
    layout: BandLayout,
    pairs: Vec<(u32, u32, u32, u8)>,
    bands: DistanceBandSet,
    rule: RelatednessRule,
}

impl RisbContext {
    fn new(pt: &PairTable, bands: &DistanceBandSet, rule: RelatednessRule) -> Self {
        let layout = BandLayout::new(bands);
        let pairs = pt
            .pairs()
            .map(|(i, j, d, zf, zr)| {
                (
                    i as u32,
                    j as u32,
                    layout.bin_of(d) as u32,
                    zf as u8 + zr as u8,
                )
            })
            .collect();
        RisbContext {
            layout,
            pairs,
            bands: bands.clone(),
            rule,
        }
    }

    /// Tau on the resampled dataset, over ordered resample-slot pairs with
    /// same-original-case pairs dropped from numerator and denominator
    /// alike. Pairs of distinct slots holding distinct cases keep their
    /// multiplicity c_i * c_j per direction.
    fn replicate(&self, counts: &[u32]) -> Result<TauCurve, TauError> {
        let mut rel = vec![0u64; self.layout.n_bins()];
        let mut tot = vec![0u64; self.layout.n_bins()];
        for &(i, j, bin, zsum) in &self.pairs {
            let w = counts[i as usize] as u64 * counts[j as usize] as u64;
            if w == 0 {
                continue;
            }
            rel[bin as usize] += w * zsum as u64;
            tot[bin as usize] += 2 * w;
        }
        let band_counts = self.layout.collect_counts(&rel, &tot);
        tau::tau_odds(
            &band_counts,
            &self.bands,
            self.rule,
            CurveProvenance::BootstrapReplicate,
        )
    }
}

/// One resampled-index replicate from an explicit multiset of case indices.
pub fn tau_risb_replicate(
    pt: &PairTable,
    bands: &DistanceBandSet,
    rule: RelatednessRule,
    indices: &[usize],
) -> Result<TauCurve, TauError> {
    let ctx = RisbContext::new(pt, bands, rule);
    ctx.replicate(&tau::multiplicities(pt.n(), indices))
}

/// Runs N bootstrap replicates of the chosen method. Replicate k draws from
/// RNG substream (BOOTSTRAP, k), so results are identical at any thread
/// count; a replicate-level degenerate-background failure is recorded, not
/// fatal.
pub fn run_bootstrap(
    cs: &CaseSet,
    rule: RelatednessRule,
    bands: &DistanceBandSet,
    method: BootstrapMethod,
    n_replicates: usize,
    policy: &RngPolicy,
) -> Result<BootstrapRun, TauError> {
    assert!(n_replicates >= 1);
    let n = cs.n();
    let pt = PairTable::build(cs, &rule);
    let risb_ctx = match method {
        BootstrapMethod::Risb => Some(RisbContext::new(&pt, bands, rule)),
        _ => None,
    };
    let marks = match method {
        BootstrapMethod::Risb => None,
        _ => Some(pt.mark_counts(bands)),
    };

    let replicates: Vec<ReplicateOutcome> = (0..n_replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = policy.substream(domain::BOOTSTRAP, k as u64);
            let indices = resample_indices(n, &mut rng);
            let counts = tau::multiplicities(n, &indices);
            let distinct = counts.iter().filter(|&&c| c > 0).count();
            let (curve, retained, mpsb) = match method {
                BootstrapMethod::Risb => {
                    let curve = risb_ctx.as_ref().unwrap().replicate(&counts);
                    (curve, (distinct * (distinct - 1)) as u64, None)
                }
                BootstrapMethod::Mmpsb => {
                    let curve =
                        tau::tau_mmpsb_from_counts(marks.as_ref().unwrap(), bands, rule, &counts);
                    (curve, (distinct * (n - 1)) as u64, None)
                }
                BootstrapMethod::Mpsb => {
                    let (curve, diag) =
                        tau::tau_mpsb_from_counts(marks.as_ref().unwrap(), bands, rule, &counts);
                    (Ok(curve), (distinct * (n - 1)) as u64, Some(diag))
                }
            };
            let curve = match curve {
                Ok(c) => Some(c),
                Err(TauError::DegenerateBackgroundOdds { .. }) => None,
                Err(e) => panic!("unexpected replicate error: {e}"),
            };
            ReplicateOutcome {
                curve,
                distinct_cases: distinct,
                retained_unique_pairs: retained,
                mpsb,
            }
        })
        .collect();

    Ok(BootstrapRun {
        method,
        replicates,
        n_cases: n,
        bands: bands.clone(),
    })
}

/// Pointwise percentile bounds of the replicate curves at the given
/// coverage. For plotting and envelope-width comparison only; reading a
/// hypothesis test off these bounds is exactly the multiple-testing mistake
/// the null-envelope test exists to avoid.
pub fn central_envelope(
    run: &BootstrapRun,
    coverage: f64,
) -> Result<Vec<(f64, f64)>, TauError> {
    assert!((0.0..=1.0).contains(&coverage));
    let n_bands = run.bands.len();
    let lo_p = (1.0 - coverage) / 2.0;
    let hi_p = 1.0 - lo_p;
    (0..n_bands)
        .map(|b| {
            let mut vals: Vec<f64> = run
                .curves()
                .filter_map(|c| c.values[b])
                .collect();
            if vals.len() < 2 {
                return Err(TauError::TooFewReplicates {
                    band: b,
                    got: vals.len(),
                });
            }
            vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            Ok((quantile_sorted(&vals, lo_p), quantile_sorted(&vals, hi_p)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{clustered_epidemic, SyntheticConfig};

    fn epidemic(n: usize) -> CaseSet {
        clustered_epidemic(&SyntheticConfig {
            n_cases: n,
            ..Default::default()
        })
        .unwrap()
    }

    fn rule() -> RelatednessRule {
        RelatednessRule::directional(1.0, 14.0).unwrap()
    }

    #[test]
    fn resample_indices_shape() {
        let policy = RngPolicy::new(4);
        let mut rng = policy.substream(domain::BOOTSTRAP, 0);
        let idx = resample_indices(2, &mut rng);
        assert_eq!(idx.len(), 2);
        assert!(idx.iter().all(|&i| i < 2));
    }

    #[test]
    fn mean_distinct_indices_matches_closed_form() {
        // E[distinct] = n(1 - (1 - 1/n)^n); 118.97 for n = 188.
        let n = 188usize;
        let expected = n as f64 * (1.0 - (1.0 - 1.0 / n as f64).powi(n as i32));
        assert!((expected - 118.97).abs() < 0.02);
        let policy = RngPolicy::new(5);
        let mut total = 0usize;
        for k in 0..1000 {
            let mut rng = policy.substream(domain::BOOTSTRAP, k);
            let idx = resample_indices(n, &mut rng);
            let mut seen = vec![false; n];
            for &i in &idx {
                seen[i] = true;
            }
            total += seen.iter().filter(|&&s| s).count();
        }
        let mean = total as f64 / 1000.0;
        assert!(
            (mean - expected).abs() < 1.0,
            "mean distinct {mean} vs expected {expected}"
        );
    }

    #[test]
    fn risb_identity_resample_is_point_estimate() {
        let cs = epidemic(30);
        let bands = DistanceBandSet::overlapping_standard();
        let pt = PairTable::build(&cs, &rule());
        let point = crate::tau::tau_point_estimate(&cs, &rule(), &bands).unwrap();
        let identity: Vec<usize> = (0..cs.n()).collect();
        let rep = tau_risb_replicate(&pt, &bands, rule(), &identity).unwrap();
        assert_eq!(rep.values, point.values);
    }

    #[test]
    fn risb_single_case_multiset_degenerates() {
        let cs = epidemic(10);
        let bands = DistanceBandSet::overlapping_standard();
        let pt = PairTable::build(&cs, &rule());
        let err = tau_risb_replicate(&pt, &bands, rule(), &[3; 10]).unwrap_err();
        assert!(matches!(err, TauError::DegenerateBackgroundOdds { .. }));
    }

    #[test]
    fn run_bootstrap_deterministic_across_thread_counts() {
        let cs = epidemic(25);
        let bands = DistanceBandSet::non_overlapping_standard();
        let policy = RngPolicy::new(12);
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                run_bootstrap(&cs, rule(), &bands, BootstrapMethod::Mmpsb, 40, &policy).unwrap()
            })
        };
        let a = run_with(1);
        let b = run_with(2);
        for (ra, rb) in a.replicates.iter().zip(&b.replicates) {
            assert_eq!(ra.curve, rb.curve);
            assert_eq!(ra.distinct_cases, rb.distinct_cases);
        }
    }

    #[test]
    fn single_replicate_reproducible() {
        let cs = epidemic(20);
        let bands = DistanceBandSet::non_overlapping_standard();
        let policy = RngPolicy::new(3);
        let a = run_bootstrap(&cs, rule(), &bands, BootstrapMethod::Risb, 1, &policy).unwrap();
        let b = run_bootstrap(&cs, rule(), &bands, BootstrapMethod::Risb, 1, &policy).unwrap();
        assert_eq!(a.n(), 1);
        assert_eq!(a.replicates[0].curve, b.replicates[0].curve);
    }

    #[test]
    fn retained_pair_accounting() {
        let cs = epidemic(50);
        let bands = DistanceBandSet::non_overlapping_standard();
        let policy = RngPolicy::new(8);
        let risb = run_bootstrap(&cs, rule(), &bands, BootstrapMethod::Risb, 50, &policy).unwrap();
        let mmpsb =
            run_bootstrap(&cs, rule(), &bands, BootstrapMethod::Mmpsb, 50, &policy).unwrap();
        for (r, m) in risb.replicates.iter().zip(&mmpsb.replicates) {
            // Same seed, same resample: identical distinct counts.
            assert_eq!(r.distinct_cases, m.distinct_cases);
            let u = r.distinct_cases as u64;
            assert_eq!(r.retained_unique_pairs, u * (u - 1));
            assert_eq!(m.retained_unique_pairs, u * 49);
        }
        assert!(mmpsb.mean_retained_pair_fraction() > risb.mean_retained_pair_fraction());
    }

    #[test]
    fn central_envelope_identical_replicates_zero_width() {
        let cs = epidemic(15);
        let bands = DistanceBandSet::non_overlapping_standard();
        let point = crate::tau::tau_point_estimate(&cs, &rule(), &bands).unwrap();
        let identical = BootstrapRun {
            method: BootstrapMethod::Mmpsb,
            replicates: (0..10)
                .map(|_| ReplicateOutcome {
                    curve: Some(point.clone()),
                    distinct_cases: 15,
                    retained_unique_pairs: 15 * 14,
                    mpsb: None,
                })
                .collect(),
            n_cases: 15,
            bands: bands.clone(),
        };
        let env = central_envelope(&identical, 0.95);
        match env {
            Ok(bounds) => {
                for (b, (lo, hi)) in bounds.iter().enumerate() {
                    let v = point.values[b].unwrap();
                    assert_eq!(*lo, v);
                    assert_eq!(*hi, v);
                }
            }
            // Bands undefined in the point estimate leave < 2 defined values.
            Err(TauError::TooFewReplicates { .. }) => {
                panic!("synthetic point estimate should be defined everywhere")
            }
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn central_envelope_full_coverage_is_min_max() {
        let cs = epidemic(30);
        let bands = DistanceBandSet::non_overlapping_standard();
        let policy = RngPolicy::new(21);
        let run =
            run_bootstrap(&cs, rule(), &bands, BootstrapMethod::Mmpsb, 30, &policy).unwrap();
        let bounds = central_envelope(&run, 1.0).unwrap();
        for b in 0..bands.len() {
            let vals: Vec<f64> = run.curves().filter_map(|c| c.values[b]).collect();
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(bounds[b], (min, max));
        }
    }

    #[test]
    fn mmpsb_never_fails_and_stays_usable_on_clustered_data() {
        let cs = epidemic(60);
        let bands = DistanceBandSet::overlapping_standard();
        let policy = RngPolicy::new(17);
        let run =
            run_bootstrap(&cs, rule(), &bands, BootstrapMethod::Mmpsb, 100, &policy).unwrap();
        assert_eq!(run.failed_count(), 0);
        // MPSB on the same data records term failures.
        let mpsb =
            run_bootstrap(&cs, rule(), &bands, BootstrapMethod::Mpsb, 100, &policy).unwrap();
        assert!(mpsb.fully_usable_fraction() <= run.fully_usable_fraction());
    }
}
