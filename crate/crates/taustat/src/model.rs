//! Domain types: cases, relatedness rules, distance bands and tau curves.

use serde::{Deserialize, Serialize};

use crate::error::TauError;

/// One geolocated case with a symptom onset time.
///
/// Coordinates are planar metres; onset is in days (real-valued, so integer
/// day-of-epidemic inputs widen losslessly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub onset: f64,
}

impl CaseRecord {
    pub fn new(id: impl Into<String>, x: f64, y: f64, onset: f64) -> Self {
        CaseRecord {
            id: id.into(),
            x,
            y,
            onset,
        }
    }
}

/// Immutable, validated collection of cases.
///
/// Duplicate coordinates (several cases in one household) and duplicate
/// onsets are both allowed; ids must be unique and every field finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSet {
    cases: Vec<CaseRecord>,
}

impl CaseSet {
    /// Validates raw records into a `CaseSet`, preserving order.
    pub fn validate(raw: Vec<CaseRecord>) -> Result<Self, TauError> {
        if raw.len() < 2 {
            return Err(TauError::EmptyOrSingleton(raw.len()));
        }
        let mut seen = std::collections::HashSet::with_capacity(raw.len());
        for rec in &raw {
            for (field, v) in [("x", rec.x), ("y", rec.y), ("onset", rec.onset)] {
                if !v.is_finite() {
                    return Err(TauError::NonFiniteField {
                        id: rec.id.clone(),
                        field,
                    });
                }
            }
            if !seen.insert(rec.id.as_str()) {
                return Err(TauError::DuplicateId(rec.id.clone()));
            }
        }
        drop(seen);
        Ok(CaseSet { cases: raw })
    }

    pub fn n(&self) -> usize {
        self.cases.len()
    }

    pub fn cases(&self) -> &[CaseRecord] {
        &self.cases
    }

    pub fn onsets(&self) -> Vec<f64> {
        self.cases.iter().map(|c| c.onset).collect()
    }

    /// Same cases and locations with onset times replaced (used by the
    /// time-mark permutation null). Panics if the length differs.
    pub fn with_onsets(&self, onsets: &[f64]) -> CaseSet {
        assert_eq!(onsets.len(), self.cases.len());
        let cases = self
            .cases
            .iter()
            .zip(onsets)
            .map(|(c, &t)| CaseRecord { onset: t, ..c.clone() })
            .collect();
        CaseSet { cases }
    }
}

/// Temporal relatedness of an ordered case pair (i, j).
///
/// Directional: related iff `t_j - t_i` lies in `[t_lower, t_upper]`.
/// Symmetric: related iff `|t_j - t_i|` lies in `[t_lower, t_upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelatednessRule {
    pub t_lower: f64,
    pub t_upper: f64,
    pub directional: bool,
}

impl RelatednessRule {
    pub fn directional(t_lower: f64, t_upper: f64) -> Result<Self, TauError> {
        Self::new(t_lower, t_upper, true)
    }

    pub fn symmetric(t_lower: f64, t_upper: f64) -> Result<Self, TauError> {
        Self::new(t_lower, t_upper, false)
    }

    fn new(t_lower: f64, t_upper: f64, directional: bool) -> Result<Self, TauError> {
        if !(t_lower <= t_upper) {
            return Err(TauError::InvalidRelatednessWindow { t_lower, t_upper });
        }
        Ok(RelatednessRule {
            t_lower,
            t_upper,
            directional,
        })
    }

    /// z_ij for the ordered pair with onsets (t_i, t_j). Self-pairs are never
    /// evaluated by callers.
    #[inline]
    pub fn related(&self, t_i: f64, t_j: f64) -> bool {
        let dt = if self.directional {
            t_j - t_i
        } else {
            (t_j - t_i).abs()
        };
        self.t_lower <= dt && dt <= self.t_upper
    }
}

/// Half-closed distance annulus `[d_low, d_high)` in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBand {
    pub d_low: f64,
    pub d_high: f64,
}

impl DistanceBand {
    pub fn new(d_low: f64, d_high: f64) -> Result<Self, TauError> {
        if !(d_low >= 0.0 && d_low < d_high && d_high.is_finite()) {
            return Err(TauError::InvalidBand { d_low, d_high });
        }
        Ok(DistanceBand { d_low, d_high })
    }

    /// Membership is half-closed: the inner radius is included, the outer
    /// excluded, so a distance tied exactly on a shared edge falls in the
    /// upper band.
    #[inline]
    pub fn contains(&self, d: f64) -> bool {
        self.d_low <= d && d < self.d_high
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.d_low + self.d_high)
    }
}

/// Ordered collection of distance bands; overlap is permitted but band
/// midpoints must strictly increase so the tau-distance graph can be
/// interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBandSet {
    bands: Vec<DistanceBand>,
}

impl DistanceBandSet {
    pub fn new(bands: Vec<DistanceBand>) -> Result<Self, TauError> {
        for w in bands.windows(2).enumerate() {
            let (k, pair) = w;
            if pair[1].midpoint() <= pair[0].midpoint() {
                return Err(TauError::NonMonotoneMidpoints(k + 1));
            }
        }
        Ok(DistanceBandSet { bands })
    }

    /// Contiguous non-overlapping bands from a strictly increasing edge list.
    pub fn from_edges(edges: &[f64]) -> Result<Self, TauError> {
        let bands = edges
            .windows(2)
            .map(|w| DistanceBand::new(w[0], w[1]))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(bands)
    }

    /// Expanding discs `[0, w0), [0, w0+step), ..., [0, w_max)` followed by
    /// width-`w_max` annuli sliding outward by `step` until the outer edge
    /// reaches `d_max`.
    pub fn expanding_then_sliding(
        w0: f64,
        w_max: f64,
        step: f64,
        d_max: f64,
    ) -> Result<Self, TauError> {
        let mut bands = Vec::new();
        let mut hi = w0;
        while hi <= w_max + 1e-9 {
            bands.push(DistanceBand::new(0.0, hi)?);
            hi += step;
        }
        let mut lo = step;
        while lo + w_max <= d_max + 1e-9 {
            bands.push(DistanceBand::new(lo, lo + w_max)?);
            lo += step;
        }
        Self::new(bands)
    }

    /// The overlapping band set used by the reference measles analysis:
    /// expanding discs up to [0, 50) m then 50 m-wide annuli sliding by 2 m
    /// out to [74, 124) m.
    pub fn overlapping_standard() -> Self {
        Self::expanding_then_sliding(10.0, 50.0, 2.0, 124.0).expect("static band set")
    }

    /// The non-overlapping comparison set: [0,7), [7,15), then 5 m-wide bands
    /// out to [195, 200) m.
    pub fn non_overlapping_standard() -> Self {
        let mut edges = vec![0.0, 7.0, 15.0];
        let mut e = 20.0;
        while e <= 200.0 + 1e-9 {
            edges.push(e);
            e += 5.0;
        }
        Self::from_edges(&edges).expect("static band set")
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn bands(&self) -> &[DistanceBand] {
        &self.bands
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.midpoint()).collect()
    }
}

/// Where a tau curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveProvenance {
    PointEstimate,
    BootstrapReplicate,
    NullPermutation,
}

/// Tau estimates over a band set. A band whose unrelated pair count is zero
/// carries `None` (flagged-undefined) rather than an infinity, so curves
/// stay plottable; `0.0` (no related pairs in the band) is a legitimate
/// value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauCurve {
    pub bands: DistanceBandSet,
    pub values: Vec<Option<f64>>,
    pub rule: RelatednessRule,
    pub provenance: CurveProvenance,
}

impl TauCurve {
    pub fn new(
        bands: DistanceBandSet,
        values: Vec<Option<f64>>,
        rule: RelatednessRule,
        provenance: CurveProvenance,
    ) -> Self {
        assert_eq!(bands.len(), values.len());
        debug_assert!(values.iter().flatten().all(|v| *v >= 0.0));
        TauCurve {
            bands,
            values,
            rule,
            provenance,
        }
    }

    /// (midpoint, value) for every defined band, in band order.
    pub fn defined_points(&self) -> Vec<(f64, f64)> {
        self.bands
            .bands()
            .iter()
            .zip(&self.values)
            .filter_map(|(b, v)| v.map(|v| (b.midpoint(), v)))
            .collect()
    }

    /// Indices of flagged-undefined bands.
    pub fn undefined_bands(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.is_none().then_some(k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_cases() -> Vec<CaseRecord> {
        vec![
            CaseRecord::new("A", 0.0, 0.0, 0.0),
            CaseRecord::new("B", 0.0, 10.0, 5.0),
            CaseRecord::new("C", 0.0, 30.0, 10.0),
            CaseRecord::new("D", 0.0, 40.0, 11.0),
        ]
    }

    #[test]
    fn four_case_set_valid() {
        let cs = CaseSet::validate(four_cases()).unwrap();
        assert_eq!(cs.n(), 4);
        assert_eq!(cs.cases()[2].id, "C");
    }

    #[test]
    fn singleton_rejected() {
        let err = CaseSet::validate(vec![CaseRecord::new("A", 0.0, 0.0, 0.0)]).unwrap_err();
        assert_eq!(err, TauError::EmptyOrSingleton(1));
    }

    #[test]
    fn non_finite_rejected() {
        let mut raw = four_cases();
        raw[1].onset = f64::NAN;
        assert!(matches!(
            CaseSet::validate(raw),
            Err(TauError::NonFiniteField { field: "onset", .. })
        ));
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut raw = four_cases();
        raw[3].id = "A".into();
        assert_eq!(
            CaseSet::validate(raw).unwrap_err(),
            TauError::DuplicateId("A".into())
        );
    }

    #[test]
    fn duplicate_coordinates_allowed() {
        let mut raw = four_cases();
        raw[1].x = 0.0;
        raw[1].y = 0.0; // same household as A
        assert!(CaseSet::validate(raw).is_ok());
    }

    #[test]
    fn band_membership_half_closed() {
        let b = DistanceBand::new(10.0, 20.0).unwrap();
        assert!(b.contains(10.0));
        assert!(b.contains(19.999));
        assert!(!b.contains(20.0));
        assert!(!b.contains(9.999));
    }

    #[test]
    fn invalid_bands_rejected() {
        assert!(DistanceBand::new(5.0, 5.0).is_err());
        assert!(DistanceBand::new(-1.0, 5.0).is_err());
        assert!(DistanceBand::new(10.0, 5.0).is_err());
    }

    #[test]
    fn directional_rule_is_ordered() {
        let rule = RelatednessRule::directional(0.0, 3.0).unwrap();
        assert!(rule.related(1.0, 3.0));
        assert!(!rule.related(3.0, 1.0));
        let sym = RelatednessRule::symmetric(0.0, 3.0).unwrap();
        assert!(sym.related(3.0, 1.0));
    }

    #[test]
    fn standard_band_sets_match_published_definitions() {
        let over = DistanceBandSet::overlapping_standard();
        assert_eq!(over.len(), 58);
        assert_eq!(over.bands()[0], DistanceBand::new(0.0, 10.0).unwrap());
        assert_eq!(over.bands()[20], DistanceBand::new(0.0, 50.0).unwrap());
        assert_eq!(over.bands()[21], DistanceBand::new(2.0, 52.0).unwrap());
        assert_eq!(over.bands()[57], DistanceBand::new(74.0, 124.0).unwrap());

        let non = DistanceBandSet::non_overlapping_standard();
        assert_eq!(non.len(), 39);
        assert_eq!(non.bands()[0], DistanceBand::new(0.0, 7.0).unwrap());
        assert_eq!(non.bands()[1], DistanceBand::new(7.0, 15.0).unwrap());
        assert_eq!(non.bands()[38], DistanceBand::new(195.0, 200.0).unwrap());

        // Midpoint monotonicity holds for both (it is validated on build).
        for set in [over, non] {
            let mids = set.midpoints();
            assert!(mids.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn non_monotone_midpoints_rejected() {
        let bands = vec![
            DistanceBand::new(0.0, 30.0).unwrap(),
            DistanceBand::new(10.0, 20.0).unwrap(),
        ];
        assert_eq!(
            DistanceBandSet::new(bands).unwrap_err(),
            TauError::NonMonotoneMidpoints(1)
        );
    }
}
