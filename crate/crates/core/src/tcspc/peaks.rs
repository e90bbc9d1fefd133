use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::FWHM_PER_SIGMA;

use super::histogram::Histogram;

pub const DEFAULT_K_SIGMA: f64 = 5.0;
pub const DEFAULT_MIN_SEPARATION_BINS: usize = 3;
pub const MIN_BASELINE_BINS: usize = 16;

/// Background level per bin and its Poisson noise proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Baseline {
    pub level: f64,
    pub scale: f64,
}

/// Median of the bin counts, with `max(√median, 1)` as the noise scale.
pub fn estimate_baseline(counts: &[u64]) -> Result<Baseline> {
    if counts.len() < MIN_BASELINE_BINS {
        return Err(Error::domain(format!(
            "baseline needs at least {MIN_BASELINE_BINS} bins, got {}",
            counts.len()
        )));
    }
    let mut v = counts.to_vec();
    let mid = v.len() / 2;
    let (lower, &mut upper_mid, _) = v.select_nth_unstable(mid);
    let level = if counts.len() % 2 == 1 {
        upper_mid as f64
    } else {
        let lower_mid = *lower.iter().max().expect("non-empty lower half");
        0.5 * (lower_mid as f64 + upper_mid as f64)
    };
    Ok(Baseline {
        level,
        scale: level.sqrt().max(1.0),
    })
}

/// A peak found in a 1-D count series, in bin units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPeak {
    /// Highest bin of the run; leftmost on plateaus.
    pub bin_index: usize,
    /// Background-weighted centroid, as a fractional bin index.
    pub centroid: f64,
    /// First bin of the above-threshold extent.
    pub run_start: usize,
    /// One past the last bin of the above-threshold extent.
    pub run_end: usize,
    pub amplitude_counts: f64,
    pub background_counts: f64,
    pub significance_sigma: f64,
    pub fwhm_bins: f64,
}

/// Find runs of bins at or above `baseline + k_sigma·scale`.
///
/// Runs separated by fewer than `min_separation` sub-threshold bins are
/// merged into one peak. Amplitude and centroid use the above-threshold bins
/// of the merged extent.
pub fn detect_peaks(
    series: &[u64],
    baseline: Baseline,
    k_sigma: f64,
    min_separation: usize,
) -> Result<Vec<SeriesPeak>> {
    if !(k_sigma.is_finite() && k_sigma > 0.0) {
        return Err(Error::domain(format!("k_sigma {k_sigma} must be > 0")));
    }
    let threshold = baseline.level + k_sigma * baseline.scale;
    let above = |c: u64| c as f64 >= threshold;

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < series.len() {
        if !above(series[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < series.len() && above(series[i]) {
            i += 1;
        }
        match runs.last_mut() {
            Some(last) if start - last.1 < min_separation => last.1 = i,
            _ => runs.push((start, i)),
        }
    }

    Ok(runs
        .into_iter()
        .map(|(start, end)| summarize(series, baseline, threshold, start, end))
        .collect())
}

fn summarize(series: &[u64], baseline: Baseline, threshold: f64, start: usize, end: usize) -> SeriesPeak {
    let mut bin_index = start;
    let mut amplitude = 0.0;
    let mut first = 0.0;
    let mut n_bins = 0usize;
    for (i, &c) in series.iter().enumerate().take(end).skip(start) {
        if c > series[bin_index] {
            bin_index = i;
        }
        if (c as f64) < threshold {
            continue;
        }
        let w = c as f64 - baseline.level;
        amplitude += w;
        first += w * i as f64;
        n_bins += 1;
    }
    let centroid = first / amplitude;
    let mut second = 0.0;
    for (i, &c) in series.iter().enumerate().take(end).skip(start) {
        if (c as f64) >= threshold {
            second += (c as f64 - baseline.level) * (i as f64 - centroid).powi(2);
        }
    }
    // A single bin still has its own width.
    let variance = (second / amplitude).max(1.0 / 12.0);
    SeriesPeak {
        bin_index,
        centroid,
        run_start: start,
        run_end: end,
        amplitude_counts: amplitude,
        background_counts: baseline.level * n_bins as f64,
        significance_sigma: (series[bin_index] as f64 - baseline.level) / baseline.scale,
        fwhm_bins: FWHM_PER_SIGMA * variance.sqrt(),
    }
}

/// A crosstalk peak in a delay histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Peak {
    pub bin_index: usize,
    pub delay_ps: f64,
    pub amplitude_counts: f64,
    pub background_counts: f64,
    pub significance_sigma: f64,
    pub fwhm_ps: f64,
    pub run_start: usize,
    pub run_end: usize,
}

/// Baseline, detect, and convert to delays in one step.
pub fn find_histogram_peaks(h: &Histogram, k_sigma: f64, min_separation: usize) -> Result<(Baseline, Vec<Peak>)> {
    let baseline = estimate_baseline(&h.counts)?;
    let width = h.bin_width_ps as f64;
    let peaks = detect_peaks(&h.counts, baseline, k_sigma, min_separation)?
        .into_iter()
        .map(|p| Peak {
            bin_index: p.bin_index,
            delay_ps: h.delay_of(p.centroid),
            amplitude_counts: p.amplitude_counts,
            background_counts: p.background_counts,
            significance_sigma: p.significance_sigma,
            fwhm_ps: p.fwhm_bins * width,
            run_start: p.run_start,
            run_end: p.run_end,
        })
        .collect();
    Ok((baseline, peaks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn noise(n: usize, mean: f64, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Poisson::new(mean).unwrap();
        (0..n).map(|_| d.sample(&mut rng) as u64).collect()
    }

    /// Add a Gaussian bump of `area` counts centered at `center` with width `sigma` bins.
    fn inject(series: &mut [u64], center: f64, sigma: f64, area: f64) {
        for (i, c) in series.iter_mut().enumerate() {
            let z = (i as f64 - center) / sigma;
            let v = area / (sigma * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * z * z).exp();
            *c += v.round() as u64;
        }
    }

    #[test]
    fn baseline_examples() {
        let flat = vec![100u64; 64];
        assert_eq!(
            estimate_baseline(&flat).unwrap(),
            Baseline {
                level: 100.0,
                scale: 10.0
            }
        );
        let mut spiked = flat.clone();
        spiked[10] = 10_000;
        assert_eq!(estimate_baseline(&spiked).unwrap().level, 100.0);
        let zero = vec![0u64; 32];
        assert_eq!(estimate_baseline(&zero).unwrap(), Baseline { level: 0.0, scale: 1.0 });
        assert!(estimate_baseline(&[1; 15]).is_err());
        let mut even: Vec<u64> = (0..16).collect();
        even.reverse();
        assert_eq!(estimate_baseline(&even).unwrap().level, 7.5);
    }

    #[test]
    fn flat_noise_rarely_triggers() {
        let quiet = (0..100u64)
            .filter(|&s| {
                let series = noise(4096, 100.0, s);
                let b = estimate_baseline(&series).unwrap();
                detect_peaks(&series, b, 5.0, 3).unwrap().is_empty()
            })
            .count();
        assert!(quiet >= 95, "{quiet}");
    }

    #[test]
    fn three_gaussians_found_at_centroids() {
        let mut series = noise(2000, 100.0, 9);
        let centers = [300.0, 900.5, 1700.25];
        // 50 sigma above a baseline of 100 at the maximum bin.
        for &c in &centers {
            inject(&mut series, c, 2.0, 500.0 * 2.0 * 2.5066);
        }
        let b = estimate_baseline(&series).unwrap();
        let peaks = detect_peaks(&series, b, 5.0, 3).unwrap();
        assert_eq!(peaks.len(), 3);
        for (p, c) in peaks.iter().zip(centers) {
            assert!((p.centroid - c).abs() <= 1.0, "{} vs {c}", p.centroid);
            assert!(p.significance_sigma >= 5.0);
            assert!(p.amplitude_counts > 0.0);
        }
    }

    #[test]
    fn close_peaks_merge() {
        let mut series = vec![0u64; 64];
        series[20] = 50;
        series[22] = 40;
        let b = estimate_baseline(&series).unwrap();
        let peaks = detect_peaks(&series, b, 5.0, 3).unwrap();
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].bin_index, 20);
        assert_eq!(peaks[0].amplitude_counts, 90.0);
        assert!((peaks[0].centroid - (20.0 * 50.0 + 22.0 * 40.0) / 90.0).abs() < 1e-12);
        // Far enough apart, they stay separate.
        series[22] = 0;
        series[30] = 40;
        assert_eq!(detect_peaks(&series, b, 5.0, 3).unwrap().len(), 2);
    }

    #[test]
    fn plateau_takes_leftmost_bin() {
        let mut series = vec![0u64; 32];
        series[10] = 30;
        series[11] = 30;
        series[12] = 30;
        let b = estimate_baseline(&series).unwrap();
        let p = &detect_peaks(&series, b, 5.0, 3).unwrap()[0];
        assert_eq!(p.bin_index, 10);
        assert!((p.centroid - 11.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_k_sigma() {
        let b = Baseline { level: 0.0, scale: 1.0 };
        assert!(detect_peaks(&[0; 20], b, 0.0, 3).is_err());
        assert!(detect_peaks(&[0; 20], b, f64::NAN, 3).is_err());
    }

    proptest! {
        #[test]
        fn detection_is_translation_equivariant(seed in 0u64..1000, shift in 1usize..200) {
            let mut series = noise(512, 20.0, seed);
            inject(&mut series, 250.0, 1.5, 2000.0);
            let b = estimate_baseline(&series).unwrap();
            let base = detect_peaks(&series, b, 5.0, 3).unwrap();
            let mut rotated = series.clone();
            rotated.rotate_right(shift);
            let b2 = estimate_baseline(&rotated).unwrap();
            prop_assert_eq!(b, b2);
            let moved = detect_peaks(&rotated, b2, 5.0, 3).unwrap();
            // Ignore detections that the rotation split at the array edge.
            let inner = |peaks: &[SeriesPeak], lo: usize, hi: usize| -> Vec<f64> {
                peaks.iter().filter(|p| p.run_start > lo && p.run_end < hi).map(|p| p.centroid).collect()
            };
            let a = inner(&base, 0, 512 - shift);
            let c: Vec<f64> = inner(&moved, shift, 512).into_iter().map(|x| x - shift as f64).collect();
            prop_assert_eq!(a.len(), c.len());
            for (x, y) in a.iter().zip(&c) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
