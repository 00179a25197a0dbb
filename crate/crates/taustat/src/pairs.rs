//! Pairwise kernel: distances, relatedness marks and per-band counts.
//!
//! Everything downstream (point estimate, permutation null, every bootstrap
//! flavour) reads from one `PairTable` built per dataset. Distances are
//! permutation- and resample-invariant, so replicates only recombine counts;
//! that precompute-once layout is what keeps thousands of replicates cheap.
//!
//! All counting paths are exact integer arithmetic; ratios are formed in
//! floating point only at the very end (in [`crate::tau`]).

use crate::model::{CaseSet, DistanceBandSet, RelatednessRule};

/// Related/unrelated ordered-pair counts for one band (the numerator and
/// denominator of an odds value).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OddsValue {
    pub related: u64,
    pub unrelated: u64,
}

impl OddsValue {
    /// The odds related/unrelated, or `None` when the denominator is zero.
    pub fn value(&self) -> Option<f64> {
        (self.unrelated > 0).then(|| self.related as f64 / self.unrelated as f64)
    }
}

/// Per-band counts plus the all-distance `[0, inf)` totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandCounts {
    pub per_band: Vec<OddsValue>,
    pub overall: OddsValue,
}

/// Distances and relatedness marks for every ordered pair i != j.
///
/// Stored triangularly: for i < j, `z_fwd` holds z_ij and `z_rev` holds z_ji
/// (they differ under a directional rule). Self-pairs are absent by
/// construction.
#[derive(Debug, Clone)]
pub struct PairTable {
    n: usize,
    dist: Vec<f64>,
    z_fwd: Vec<bool>,
    z_rev: Vec<bool>,
}

impl PairTable {
    /// Euclidean distances and relatedness marks for a validated case set.
    pub fn build(cs: &CaseSet, rule: &RelatednessRule) -> PairTable {
        let n = cs.n();
        let cases = cs.cases();
        let m = n * (n - 1) / 2;
        let mut dist = Vec::with_capacity(m);
        let mut z_fwd = Vec::with_capacity(m);
        let mut z_rev = Vec::with_capacity(m);
        for i in 0..n {
            let ci = &cases[i];
            for cj in &cases[i + 1..] {
                dist.push(((ci.x - cj.x).powi(2) + (ci.y - cj.y).powi(2)).sqrt());
                z_fwd.push(rule.related(ci.onset, cj.onset));
                z_rev.push(rule.related(cj.onset, ci.onset));
            }
        }
        PairTable {
            n,
            dist,
            z_fwd,
            z_rev,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of ordered pairs, n(n-1).
    pub fn ordered_pair_count(&self) -> u64 {
        (self.n as u64) * (self.n as u64 - 1)
    }

    #[inline]
    fn tri(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// d_ij for an ordered pair (symmetric).
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.dist[self.tri(a, b)]
    }

    /// z_ij for the ordered pair (i, j).
    pub fn related(&self, i: usize, j: usize) -> bool {
        if i < j {
            self.z_fwd[self.tri(i, j)]
        } else {
            self.z_rev[self.tri(j, i)]
        }
    }

    /// Iterates unordered pairs as (i, j, d_ij, z_ij, z_ji) with i < j.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64, bool, bool)> + '_ {
        (0..self.n).flat_map(move |i| {
            (i + 1..self.n).map(move |j| {
                let t = self.tri(i, j);
                (i, j, self.dist[t], self.z_fwd[t], self.z_rev[t])
            })
        })
    }

    /// Total ordered related/unrelated pairs in each band and over `[0, inf)`.
    pub fn band_counts(&self, bands: &DistanceBandSet) -> BandCounts {
        let layout = BandLayout::new(bands);
        let mut rel = vec![0u64; layout.n_bins()];
        let mut tot = vec![0u64; layout.n_bins()];
        for (_, _, d, zf, zr) in self.pairs() {
            let bin = layout.bin_of(d);
            rel[bin] += (zf as u64) + (zr as u64);
            tot[bin] += 2;
        }
        layout.collect_counts(&rel, &tot)
    }

    /// Per-case decomposition of `band_counts`: m_i(band, k) counts ordered
    /// pairs (i, j) with j ranging over all other cases.
    pub fn mark_counts(&self, bands: &DistanceBandSet) -> MarkCounts {
        let layout = BandLayout::new(bands);
        let n_bins = layout.n_bins();
        let mut rel_bins = vec![0u32; self.n * n_bins];
        let mut unrel_bins = vec![0u32; self.n * n_bins];
        for (i, j, d, zf, zr) in self.pairs() {
            let bin = layout.bin_of(d);
            if zf {
                rel_bins[i * n_bins + bin] += 1;
            } else {
                unrel_bins[i * n_bins + bin] += 1;
            }
            if zr {
                rel_bins[j * n_bins + bin] += 1;
            } else {
                unrel_bins[j * n_bins + bin] += 1;
            }
        }
        let n_bands = bands.len();
        let mut related = vec![0u32; self.n * n_bands];
        let mut unrelated = vec![0u32; self.n * n_bands];
        let mut overall_related = vec![0u32; self.n];
        let mut overall_unrelated = vec![0u32; self.n];
        for case in 0..self.n {
            let rb = &rel_bins[case * n_bins..(case + 1) * n_bins];
            let ub = &unrel_bins[case * n_bins..(case + 1) * n_bins];
            for (b, &(lo, hi)) in layout.band_bins.iter().enumerate() {
                related[case * n_bands + b] = rb[lo..hi].iter().sum();
                unrelated[case * n_bands + b] = ub[lo..hi].iter().sum();
            }
            overall_related[case] = rb.iter().sum();
            overall_unrelated[case] = ub.iter().sum();
        }
        MarkCounts {
            n_cases: self.n,
            n_bands,
            related,
            unrelated,
            overall_related,
            overall_unrelated,
        }
    }
}

/// Builds `PairTable` from a case set and rule (operation-style alias).
pub fn build_pair_table(cs: &CaseSet, rule: &RelatednessRule) -> PairTable {
    PairTable::build(cs, rule)
}

/// Per-case, per-band mark-function counts m_i(d_l, d_m, k) plus the
/// all-distance totals m_i(k). Summing over cases reproduces `band_counts`
/// exactly; for every case, overall related + unrelated == n - 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkCounts {
    n_cases: usize,
    n_bands: usize,
    related: Vec<u32>,
    unrelated: Vec<u32>,
    overall_related: Vec<u32>,
    overall_unrelated: Vec<u32>,
}

impl MarkCounts {
    pub fn n_cases(&self) -> usize {
        self.n_cases
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    /// m_i(band, k=1)
    pub fn related(&self, case: usize, band: usize) -> u32 {
        self.related[case * self.n_bands + band]
    }

    /// m_i(band, k=0)
    pub fn unrelated(&self, case: usize, band: usize) -> u32 {
        self.unrelated[case * self.n_bands + band]
    }

    /// m_i(k=1) over all distances.
    pub fn overall_related(&self, case: usize) -> u32 {
        self.overall_related[case]
    }

    /// m_i(k=0) over all distances.
    pub fn overall_unrelated(&self, case: usize) -> u32 {
        self.overall_unrelated[case]
    }

    pub(crate) fn related_row(&self, case: usize) -> &[u32] {
        &self.related[case * self.n_bands..(case + 1) * self.n_bands]
    }

    pub(crate) fn unrelated_row(&self, case: usize) -> &[u32] {
        &self.unrelated[case * self.n_bands..(case + 1) * self.n_bands]
    }
}

/// Maps distances into the elementary intervals induced by all band edges,
/// so one histogram pass serves every band (including overlapping ones) and
/// the all-distance totals.
#[derive(Debug, Clone)]
pub(crate) struct BandLayout {
    breakpoints: Vec<f64>,
    /// Half-open elementary-bin range per band.
    band_bins: Vec<(usize, usize)>,
}

impl BandLayout {
    pub(crate) fn new(bands: &DistanceBandSet) -> BandLayout {
        let mut breakpoints: Vec<f64> = bands
            .bands()
            .iter()
            .flat_map(|b| [b.d_low, b.d_high])
            .collect();
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();
        let pos = |edge: f64| breakpoints.partition_point(|&b| b < edge);
        let band_bins = bands
            .bands()
            .iter()
            .map(|b| (pos(b.d_low) + 1, pos(b.d_high) + 1))
            .collect();
        BandLayout {
            breakpoints,
            band_bins,
        }
    }

    /// Bins: 0 -> [0, b_0), k -> [b_{k-1}, b_k), last -> [b_max, inf).
    pub(crate) fn n_bins(&self) -> usize {
        self.breakpoints.len() + 1
    }

    #[inline]
    pub(crate) fn bin_of(&self, d: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= d)
    }

    /// Sums an elementary-bin histogram into per-band and overall counts.
    pub(crate) fn collect_counts(&self, rel: &[u64], tot: &[u64]) -> BandCounts {
        // Prefix sums let each band read two offsets.
        let prefix = |h: &[u64]| {
            let mut p = Vec::with_capacity(h.len() + 1);
            p.push(0u64);
            for &v in h {
                p.push(p.last().unwrap() + v);
            }
            p
        };
        let prel = prefix(rel);
        let ptot = prefix(tot);
        let per_band = self
            .band_bins
            .iter()
            .map(|&(lo, hi)| {
                let related = prel[hi] - prel[lo];
                let total = ptot[hi] - ptot[lo];
                OddsValue {
                    related,
                    unrelated: total - related,
                }
            })
            .collect();
        let related = *prel.last().unwrap();
        let total = *ptot.last().unwrap();
        BandCounts {
            per_band,
            overall: OddsValue {
                related,
                unrelated: total - related,
            },
        }
    }
}
