//! Slowdown and refill (RF) curves over THR%, and region classification of a
//! task's slowdown curve against the READ_MISS baseline.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::InitiatorReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MetricKind {
    Slowdown,
    Rf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub thr_pct: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceCurve {
    pub metric: MetricKind,
    pub points: Vec<CurvePoint>,
}

impl InterferenceCurve {
    pub fn new(metric: MetricKind, points: Vec<CurvePoint>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].thr_pct >= w[1].thr_pct) {
            return Err(Error::InvalidCurve(
                "THR% values must be strictly increasing".into(),
            ));
        }
        if let Some(p) = points.iter().find(|p| !(p.value >= 0.0) || !p.value.is_finite()) {
            return Err(Error::InvalidCurve(format!(
                "value {} at THR%={} is not a finite non-negative number",
                p.value, p.thr_pct
            )));
        }
        if metric == MetricKind::Slowdown {
            if let Some(p) = points.iter().find(|p| p.thr_pct == 0 && p.value != 1.0) {
                return Err(Error::InvalidCurve(format!(
                    "slowdown at THR%=0 must be 1.0, got {}",
                    p.value
                )));
            }
        }
        Ok(InterferenceCurve { metric, points })
    }

    /// Builds a curve from points in any order.
    pub fn from_unsorted(metric: MetricKind, mut points: Vec<CurvePoint>) -> Result<Self> {
        points.sort_by_key(|p| p.thr_pct);
        Self::new(metric, points)
    }

    pub fn from_pairs(metric: MetricKind, pairs: &[(u32, f64)]) -> Result<Self> {
        Self::new(
            metric,
            pairs
                .iter()
                .map(|&(thr_pct, value)| CurvePoint { thr_pct, value })
                .collect(),
        )
    }

    pub fn thr_grid(&self) -> Vec<u32> {
        self.points.iter().map(|p| p.thr_pct).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn value_at(&self, thr_pct: u32) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.thr_pct == thr_pct)
            .map(|p| p.value)
    }

    pub fn max_value(&self) -> Option<f64> {
        self.points.iter().map(|p| p.value).reduce(f64::max)
    }
}

/// Position of a task's slowdown curve relative to the READ_MISS baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionClass {
    /// Worse than the baseline at every THR% > 0.
    Above,
    /// Worse than the baseline at some THR% > 0 only.
    Crossing,
    /// Never worse than the baseline.
    Below,
}

impl RegionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionClass::Above => "ABOVE",
            RegionClass::Crossing => "CROSSING",
            RegionClass::Below => "BELOW",
        }
    }
}

impl fmt::Display for RegionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegionClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ABOVE" => Ok(RegionClass::Above),
            "CROSSING" => Ok(RegionClass::Crossing),
            "BELOW" => Ok(RegionClass::Below),
            _ => Err(format!("unknown region class `{s}`")),
        }
    }
}

pub fn slowdown(t_thr: f64, t_0: f64) -> Result<f64> {
    if !(t_0 > 0.0) {
        return Err(Error::UndefinedMetric(
            "slowdown needs a positive baseline time",
        ));
    }
    Ok(t_thr / t_0)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Refill metric: `(refill_thr / refill_0) * (refill_thr / mem_access)`.
///
/// The first factor is the growth in refills over the uncontended run, the
/// second the miss rate those refills amount to. The product is reduced as an
/// exact fraction before rounding, so scaling all three counts by a common
/// factor yields the identical float.
pub fn rf_metric(refill_thr: u64, refill_0: u64, mem_access: u64) -> Result<f64> {
    if refill_0 == 0 {
        return Err(Error::UndefinedMetric("RF needs a non-zero THR%=0 refill count"));
    }
    if mem_access == 0 {
        return Err(Error::UndefinedMetric("RF needs a non-zero access count"));
    }
    if refill_thr > mem_access {
        return Err(Error::UndefinedMetric("refills exceed memory accesses"));
    }
    let num = u128::from(refill_thr) * u128::from(refill_thr);
    let den = u128::from(refill_0) * u128::from(mem_access);
    let g = gcd(num, den).max(1);
    Ok((num / g) as f64 / (den / g) as f64)
}

/// ABOVE if `test` exceeds `baseline` at every THR% > 0, BELOW if it never
/// does, CROSSING otherwise. THR%=0 is skipped: every slowdown curve is 1.0
/// there.
pub fn classify_region(
    test: &InterferenceCurve,
    baseline: &InterferenceCurve,
) -> Result<RegionClass> {
    if test.metric != baseline.metric {
        return Err(Error::InvalidCurve(
            "cannot compare curves of different metrics".into(),
        ));
    }
    if test.thr_grid() != baseline.thr_grid() {
        return Err(Error::GridMismatch);
    }
    let (mut above, mut compared) = (0usize, 0usize);
    for (t, b) in test.points.iter().zip(&baseline.points) {
        if t.thr_pct == 0 {
            continue;
        }
        compared += 1;
        if t.value > b.value {
            above += 1;
        }
    }
    Ok(match above {
        0 => RegionClass::Below,
        n if n == compared => RegionClass::Above,
        _ => RegionClass::Crossing,
    })
}

/// The measured observables both backends report for the task under test.
pub trait Observables {
    /// Cycles on the simulator, seconds on hardware.
    fn elapsed(&self) -> f64;
    fn mem_accesses(&self) -> u64;
    fn llc_refills(&self) -> u64;
}

impl Observables for InitiatorReport {
    fn elapsed(&self) -> f64 {
        self.elapsed_cycles as f64
    }

    fn mem_accesses(&self) -> u64 {
        self.mem_accesses
    }

    fn llc_refills(&self) -> u64 {
        self.llc_refills
    }
}

impl<T: Observables + ?Sized> Observables for &T {
    fn elapsed(&self) -> f64 {
        (**self).elapsed()
    }

    fn mem_accesses(&self) -> u64 {
        (**self).mem_accesses()
    }

    fn llc_refills(&self) -> u64 {
        (**self).llc_refills()
    }
}

/// Slowdown and RF curves from one report per THR%, normalized by the THR%=0
/// report.
pub fn build_curves<R: Observables>(
    reports: &BTreeMap<u32, R>,
) -> Result<(InterferenceCurve, InterferenceCurve)> {
    let base = reports.get(&0).ok_or(Error::MissingBaseline)?;
    let (t_0, refill_0) = (base.elapsed(), base.llc_refills());
    let mut slow = Vec::with_capacity(reports.len());
    let mut rf = Vec::with_capacity(reports.len());
    for (&thr_pct, r) in reports {
        slow.push(CurvePoint {
            thr_pct,
            value: slowdown(r.elapsed(), t_0)?,
        });
        rf.push(CurvePoint {
            thr_pct,
            value: rf_metric(r.llc_refills(), refill_0, r.mem_accesses())?,
        });
    }
    Ok((
        InterferenceCurve::new(MetricKind::Slowdown, slow)?,
        InterferenceCurve::new(MetricKind::Rf, rf)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn slow(pairs: &[(u32, f64)]) -> InterferenceCurve {
        InterferenceCurve::from_pairs(MetricKind::Slowdown, pairs).unwrap()
    }

    #[derive(Clone, Copy)]
    struct Obs(f64, u64, u64);

    impl Observables for Obs {
        fn elapsed(&self) -> f64 {
            self.0
        }
        fn mem_accesses(&self) -> u64 {
            self.1
        }
        fn llc_refills(&self) -> u64 {
            self.2
        }
    }

    #[test]
    fn slowdown_examples() {
        assert_eq!(slowdown(7.0, 7.0).unwrap(), 1.0);
        assert_eq!(slowdown(2600.0, 2000.0).unwrap(), 1.3);
        assert!(matches!(slowdown(1.0, 0.0), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn rf_examples() {
        assert_eq!(rf_metric(1000, 1000, 1000).unwrap(), 1.0);
        assert_eq!(rf_metric(800, 400, 1000).unwrap(), 1.6);
        assert!(matches!(rf_metric(1, 0, 10), Err(Error::UndefinedMetric(_))));
        assert!(matches!(rf_metric(1, 1, 0), Err(Error::UndefinedMetric(_))));
        assert!(rf_metric(11, 1, 10).is_err());
    }

    #[test]
    fn classify_examples() {
        let base = slow(&[(0, 1.0), (20, 1.5), (50, 2.0), (80, 3.0)]);
        assert_eq!(classify_region(&base, &base).unwrap(), RegionClass::Below);
        let above = slow(&[(0, 1.0), (20, 2.0), (50, 2.5), (80, 3.5)]);
        assert_eq!(classify_region(&above, &base).unwrap(), RegionClass::Above);
        let cross = slow(&[(0, 1.0), (20, 1.2), (50, 2.0), (80, 3.4)]);
        assert_eq!(classify_region(&cross, &base).unwrap(), RegionClass::Crossing);
        let tie_then_above = slow(&[(0, 1.0), (20, 1.5), (50, 2.1), (80, 3.1)]);
        assert_eq!(
            classify_region(&tie_then_above, &base).unwrap(),
            RegionClass::Crossing
        );
        let other_grid = slow(&[(0, 1.0), (30, 1.5), (50, 2.0), (80, 3.0)]);
        assert!(matches!(
            classify_region(&other_grid, &base),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn curve_invariants_enforced() {
        assert!(InterferenceCurve::from_pairs(MetricKind::Slowdown, &[(0, 1.1)]).is_err());
        assert!(InterferenceCurve::from_pairs(MetricKind::Rf, &[(0, 1.1)]).is_ok());
        assert!(InterferenceCurve::from_pairs(MetricKind::Rf, &[(10, 1.0), (10, 1.0)]).is_err());
        assert!(InterferenceCurve::from_pairs(MetricKind::Rf, &[(10, -1.0)]).is_err());
        assert!(InterferenceCurve::from_pairs(MetricKind::Rf, &[(10, f64::NAN)]).is_err());
    }

    #[test]
    fn build_curves_shapes_and_identity() {
        let mut reports = BTreeMap::new();
        for thr in [0, 20, 40, 60, 80, 100] {
            reports.insert(thr, Obs(500.0, 1000, 250));
        }
        let (s, rf) = build_curves(&reports).unwrap();
        assert_eq!(s.points.len(), 6);
        assert!(s.values().iter().all(|&v| v == 1.0));
        assert!(rf.values().iter().all(|&v| v == 0.25));

        reports.remove(&0);
        assert!(matches!(build_curves(&reports), Err(Error::MissingBaseline)));
    }

    proptest! {
        #[test]
        fn rf_is_scale_invariant(r in 1u64..100_000, extra in 0u64..100_000, r0 in 1u64..100_000, k in 1u64..1000) {
            let m = r + extra;
            prop_assert_eq!(rf_metric(r, r0, m).unwrap(), rf_metric(k * r, k * r0, k * m).unwrap());
        }

        #[test]
        fn rf_increases_with_refills(r in 0u64..100_000, r0 in 1u64..100_000, extra in 1u64..100_000) {
            let m = r + extra;
            prop_assert!(rf_metric(r + 1, r0, m).unwrap() > rf_metric(r, r0, m).unwrap());
        }

        #[test]
        fn classify_self_is_below(vals in proptest::collection::vec(0.0f64..50.0, 1..12)) {
            let mut pairs = vec![(0u32, 1.0)];
            pairs.extend(vals.iter().enumerate().map(|(i, &v)| (10 * (i as u32 + 1), v)));
            let c = slow(&pairs);
            prop_assert_eq!(classify_region(&c, &c).unwrap(), RegionClass::Below);
        }

        #[test]
        fn classify_ignores_point_order(
            a in proptest::collection::vec(0.5f64..5.0, 6),
            b in proptest::collection::vec(0.5f64..5.0, 6),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mk = |v: &[f64]| -> Vec<CurvePoint> {
                std::iter::once(CurvePoint { thr_pct: 0, value: 1.0 })
                    .chain(v.iter().enumerate().map(|(i, &value)| CurvePoint { thr_pct: 20 * (i as u32 + 1), value }))
                    .collect()
            };
            let (ta, tb) = (mk(&a), mk(&b));
            let want = classify_region(
                &InterferenceCurve::new(MetricKind::Slowdown, ta.clone()).unwrap(),
                &InterferenceCurve::new(MetricKind::Slowdown, tb.clone()).unwrap(),
            ).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (mut sa, mut sb) = (ta, tb);
            sa.shuffle(&mut rng);
            sb.shuffle(&mut rng);
            let got = classify_region(
                &InterferenceCurve::from_unsorted(MetricKind::Slowdown, sa).unwrap(),
                &InterferenceCurve::from_unsorted(MetricKind::Slowdown, sb).unwrap(),
            ).unwrap();
            prop_assert_eq!(got, want);
        }
    }
}
