use serde::Serialize;

use crate::error::{Error, Result};
use crate::photonics::PS_PER_S;
use crate::tags::TagStream;

/// Relative trigger-spacing spread above which a warning is raised.
pub const PERIOD_JITTER_TOLERANCE: f64 = 1e-6;

/// Where detector tags that did not land in a bin went.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FoldDiagnostics {
    pub detections_total: u64,
    pub before_first_trigger: u64,
    /// Delay at or beyond one period after the most recent trigger.
    pub beyond_period: u64,
    pub outside_window: u64,
    /// Largest relative deviation of a trigger spacing from the median.
    pub period_spread: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FoldDiagnostics {
    pub fn dropped(&self) -> u64 {
        self.before_first_trigger + self.beyond_period + self.outside_window
    }
}

/// Detector delays relative to the most recent trigger, binned.
///
/// Bins cover the analyzed window `[offset_ps, offset_ps + len·bin_width_ps)`
/// inside one trigger period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width_ps: u64,
    pub period_ps: u64,
    pub offset_ps: u64,
    pub counts: Vec<u64>,
    pub total_triggers: u64,
    pub live_time_s: f64,
    pub diagnostics: FoldDiagnostics,
}

impl Histogram {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Start of bin `i`, in picoseconds after the trigger.
    pub fn bin_start_ps(&self, i: usize) -> u64 {
        self.offset_ps + i as u64 * self.bin_width_ps
    }

    /// Delay of a fractional bin position, measured at the bin center.
    pub fn delay_of(&self, bin: f64) -> f64 {
        self.offset_ps as f64 + (bin + 0.5) * self.bin_width_ps as f64
    }

    /// Whether the bins span a whole period starting at zero delay.
    pub fn covers_period(&self) -> bool {
        self.offset_ps == 0 && self.counts.len() as u64 * self.bin_width_ps == self.period_ps
    }

    /// Elementwise sum of two partial histograms over the same grid.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if (self.bin_width_ps, self.period_ps, self.offset_ps, self.counts.len())
            != (other.bin_width_ps, other.period_ps, other.offset_ps, other.counts.len())
        {
            return Err(Error::domain("cannot merge histograms with different grids"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_triggers += other.total_triggers;
        self.live_time_s += other.live_time_s;
        let d = &mut self.diagnostics;
        let o = &other.diagnostics;
        d.detections_total += o.detections_total;
        d.before_first_trigger += o.before_first_trigger;
        d.beyond_period += o.beyond_period;
        d.outside_window += o.outside_window;
        d.period_spread = d.period_spread.max(o.period_spread);
        d.warnings.extend(o.warnings.iter().cloned());
        Ok(())
    }

    /// `bin_start_ps,counts` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * self.counts.len() + 20);
        out.push_str("bin_start_ps,counts\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.bin_start_ps(i), c));
        }
        out
    }
}

/// Nearest divisor of `period` to `bin`, preferring the smaller on ties.
pub fn nearest_divisor(period: u64, bin: u64) -> u64 {
    let mut best: u64 = 1;
    let mut d: u64 = 1;
    while d * d <= period {
        if period.is_multiple_of(d) {
            for cand in [d, period / d] {
                if cand.abs_diff(bin) < best.abs_diff(bin) || (cand.abs_diff(bin) == best.abs_diff(bin) && cand < best)
                {
                    best = cand;
                }
            }
        }
        d += 1;
    }
    best
}

/// Infer the trigger period from the median spacing.
fn infer_period(triggers: &[u64], fallback: Option<u64>) -> Result<(u64, f64)> {
    if triggers.len() < 2 {
        return fallback
            .map(|p| (p, 0.0))
            .ok_or_else(|| Error::Input("a single trigger gives no period; metadata is required".into()));
    }
    let mut gaps: Vec<u64> = triggers.windows(2).map(|w| w[1] - w[0]).collect();
    let mid = gaps.len() / 2;
    let (_, &mut median, _) = gaps.select_nth_unstable(mid);
    let spread = gaps
        .iter()
        .map(|&g| g.abs_diff(median) as f64 / median as f64)
        .fold(0.0, f64::max);
    Ok((median, spread))
}

/// Fold detector tags against their most recent trigger.
///
/// `window` restricts the analyzed delays to `[lo, hi)` picoseconds; it is
/// widened outward to whole bins. Tags outside it, before the first trigger,
/// or a full period or more after the latest trigger are counted in the
/// diagnostics instead of a bin.
pub fn fold_histogram(stream: &TagStream, bin_width_ps: u64, window: Option<(u64, u64)>) -> Result<Histogram> {
    let triggers = stream.triggers();
    if triggers.is_empty() {
        return Err(Error::NoTriggers);
    }
    if bin_width_ps == 0 {
        return Err(Error::Parameter {
            message: "bin width must be > 0".into(),
            suggestion: None,
        });
    }
    let fallback = stream.metadata.as_ref().map(|m| m.period_ps);
    let (period, spread) = infer_period(triggers, fallback)?;
    if period % bin_width_ps != 0 {
        let suggestion = nearest_divisor(period, bin_width_ps);
        return Err(Error::Parameter {
            message: format!("bin width {bin_width_ps} ps does not divide the trigger period {period} ps"),
            suggestion: Some(format!("{suggestion}ps")),
        });
    }
    let (lo, hi) = match window {
        None => (0, period),
        Some((lo, hi)) => {
            if lo >= hi || hi > period {
                return Err(Error::Parameter {
                    message: format!("window [{lo}, {hi}) ps must be non-empty and within the period {period} ps"),
                    suggestion: None,
                });
            }
            (
                lo / bin_width_ps * bin_width_ps,
                hi.div_ceil(bin_width_ps) * bin_width_ps,
            )
        }
    };
    let nbins = ((hi - lo) / bin_width_ps) as usize;
    let mut counts = vec![0u64; nbins];
    let mut diag = FoldDiagnostics {
        detections_total: stream.detections().len() as u64,
        period_spread: spread,
        ..FoldDiagnostics::default()
    };
    if spread > PERIOD_JITTER_TOLERANCE {
        diag.warnings.push(format!(
            "trigger spacing deviates from the median period by up to {:.3e} (relative); median period used",
            spread
        ));
    }

    // Index of the first trigger after the current detection.
    let mut next = 0usize;
    for &t in stream.detections() {
        while next < triggers.len() && triggers[next] <= t {
            next += 1;
        }
        if next == 0 {
            diag.before_first_trigger += 1;
            continue;
        }
        let delay = t - triggers[next - 1];
        if delay >= period {
            diag.beyond_period += 1;
        } else if delay < lo || delay >= hi {
            diag.outside_window += 1;
        } else {
            counts[((delay - lo) / bin_width_ps) as usize] += 1;
        }
    }

    Ok(Histogram {
        bin_width_ps,
        period_ps: period,
        offset_ps: lo,
        counts,
        total_triggers: triggers.len() as u64,
        live_time_s: triggers.len() as f64 * period as f64 / PS_PER_S,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(triggers: Vec<u64>, det: Vec<u64>) -> TagStream {
        TagStream::new(triggers, det).unwrap()
    }

    #[test]
    fn empty_detector_gives_zero_histogram() {
        let h = fold_histogram(&stream(vec![0, 1000, 2000], vec![]), 100, None).unwrap();
        assert_eq!(h.counts, vec![0; 10]);
        assert_eq!(h.total_triggers, 3);
    }

    #[test]
    fn single_tag_lands_in_expected_bin() {
        let period = 1_000_000;
        let trig = vec![0, period, 2 * period];
        let h = fold_histogram(&stream(trig, vec![period + 12_345]), 100, None).unwrap();
        assert_eq!(h.counts[123], 1);
        assert_eq!(h.total_counts(), 1);
    }

    #[test]
    fn no_triggers_is_an_error() {
        assert!(matches!(
            fold_histogram(&stream(vec![], vec![5]), 100, None),
            Err(Error::NoTriggers)
        ));
    }

    #[test]
    fn non_divisor_bin_suggests_nearest() {
        let err = fold_histogram(&stream(vec![0, 1000, 2000], vec![]), 300, None).unwrap_err();
        match err {
            Error::Parameter { suggestion, .. } => assert_eq!(suggestion.as_deref(), Some("250ps")),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(nearest_divisor(1_000_000_000, 100), 100);
        assert_eq!(nearest_divisor(1000, 300), 250);
        assert_eq!(nearest_divisor(7, 3), 1);
    }

    #[test]
    fn drops_are_classified() {
        let trig = vec![100, 1100, 2100];
        let det = vec![50, 150, 1150, 1900, 3150];
        let h = fold_histogram(&stream(trig, det), 100, Some((0, 500))).unwrap();
        let d = &h.diagnostics;
        assert_eq!(d.before_first_trigger, 1);
        assert_eq!(d.beyond_period, 1);
        assert_eq!(d.outside_window, 1);
        assert_eq!(h.total_counts() + d.dropped(), d.detections_total);
        assert_eq!(h.counts, vec![2, 0, 0, 0, 0]);
    }

    #[test]
    fn window_is_widened_to_bins() {
        let h = fold_histogram(&stream(vec![0, 1000], vec![260, 349]), 100, Some((250, 333))).unwrap();
        assert_eq!(h.offset_ps, 200);
        assert_eq!(h.counts, vec![1, 1]);
        assert!(fold_histogram(&stream(vec![0, 1000], vec![]), 100, Some((500, 400))).is_err());
        assert!(fold_histogram(&stream(vec![0, 1000], vec![]), 100, Some((0, 2000))).is_err());
    }

    #[test]
    fn irregular_triggers_warn() {
        let h = fold_histogram(&stream(vec![0, 1000, 2000, 3001], vec![]), 100, None).unwrap();
        assert_eq!(h.period_ps, 1000);
        assert_eq!(h.diagnostics.warnings.len(), 1);
    }

    #[test]
    fn single_trigger_needs_metadata() {
        assert!(matches!(
            fold_histogram(&stream(vec![0], vec![10]), 10, None),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn merge_adds_partials() {
        let trig = vec![0, 1000, 2000, 3000];
        let det = vec![10, 520, 1010, 2990, 3450];
        let whole = fold_histogram(&stream(trig.clone(), det.clone()), 100, None).unwrap();
        let mut a = fold_histogram(&stream(trig[..2].to_vec(), det[..3].to_vec()), 100, None).unwrap();
        let b = fold_histogram(&stream(trig[2..].to_vec(), det[3..].to_vec()), 100, None).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.counts, whole.counts);
        assert_eq!(a.total_triggers, whole.total_triggers);
    }

    #[test]
    fn csv_export() {
        let h = fold_histogram(&stream(vec![0, 300], vec![150]), 100, None).unwrap();
        assert_eq!(h.to_csv(), "bin_start_ps,counts\n0,0\n100,1\n200,0\n");
    }

    proptest! {
        #[test]
        fn conservation_and_shift_invariance(
            dets in proptest::collection::btree_set(0u64..50_000, 0..200),
            shift in 0u64..1_000_000_000,
            width in prop::sample::select(vec![1u64, 10, 50, 100, 1000]),
            window in prop::option::of((0u64..500, 500u64..1000)),
        ) {
            let trig: Vec<u64> = (1..40).map(|k| k * 1000).collect();
            let s = stream(trig, dets.into_iter().collect());
            let h = fold_histogram(&s, width, window).unwrap();
            prop_assert_eq!(h.total_counts() + h.diagnostics.dropped(), s.detections().len() as u64);
            let shifted = fold_histogram(&s.shifted(shift).unwrap(), width, window).unwrap();
            prop_assert_eq!(&h, &shifted);
        }
    }
}
