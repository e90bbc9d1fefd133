//! Monte Carlo generation of single-photon tag streams and spectral scans.
//!
//! Every random draw comes from a ChaCha8 substream keyed by
//! `(seed, domain, index)`: one substream per probe pulse for OTDR runs and
//! one per grid point for spectral scans. Output therefore does not depend on
//! how the pulse range is split across workers.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::{photon_energy_j, Wavelength, PS_PER_S};
use crate::plant::{CrosstalkPoint, Topology};
use crate::tags::{StreamMetadata, TagStream};
use crate::tcspc::SpectralScan;

/// Conversion from a Gaussian FWHM to its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

const OTDR_DOMAIN: u32 = 0x4f54_4452;
const SCAN_DOMAIN: u32 = 0x5343_414e;
const PULSES_PER_CHUNK: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsedSource {
    #[serde(default = "default_rep_rate")]
    pub rep_rate_hz: f64,
    #[serde(default = "default_pulse_width")]
    pub pulse_width_ps: f64,
    pub wavelength_nm: Wavelength,
    pub avg_power_w: f64,
}

fn default_rep_rate() -> f64 {
    1000.0
}

fn default_pulse_width() -> f64 {
    100.0
}

impl PulsedSource {
    pub fn new(wavelength_nm: Wavelength, avg_power_w: f64) -> Self {
        Self {
            rep_rate_hz: default_rep_rate(),
            pulse_width_ps: default_pulse_width(),
            wavelength_nm,
            avg_power_w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_hz.is_finite() && self.rep_rate_hz > 0.0) {
            return Err(Error::validation("source", "rep_rate_hz must be > 0"));
        }
        if !(self.avg_power_w.is_finite() && self.avg_power_w > 0.0) {
            return Err(Error::validation("source", "avg_power_w must be > 0"));
        }
        let period = PS_PER_S / self.rep_rate_hz;
        if period < 1.0 {
            return Err(Error::validation("source", "pulse period below 1 ps"));
        }
        if !(self.pulse_width_ps.is_finite() && self.pulse_width_ps >= 0.0 && self.pulse_width_ps < period) {
            return Err(Error::validation("source", "pulse_width_ps must be in [0, period)"));
        }
        Ok(())
    }

    /// Pulse period rounded to whole picoseconds.
    pub fn period_ps(&self) -> u64 {
        (PS_PER_S / self.rep_rate_hz).round() as u64
    }

    /// Mean photons launched per pulse.
    pub fn photons_per_pulse(&self) -> f64 {
        (self.avg_power_w / self.rep_rate_hz) / photon_energy_j(self.wavelength_nm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
    #[serde(default = "default_dark_rate")]
    pub dark_rate_hz: f64,
    #[serde(default = "default_jitter")]
    pub jitter_sigma_ps: f64,
    #[serde(default = "default_dead_time")]
    pub dead_time_ps: u64,
}

fn default_efficiency() -> f64 {
    0.85
}

fn default_dark_rate() -> f64 {
    100.0
}

fn default_jitter() -> f64 {
    50.0
}

fn default_dead_time() -> u64 {
    50_000
}

impl Default for Detector {
    fn default() -> Self {
        Self {
            efficiency: default_efficiency(),
            dark_rate_hz: default_dark_rate(),
            jitter_sigma_ps: default_jitter(),
            dead_time_ps: default_dead_time(),
        }
    }
}

impl Detector {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::validation("detector", "efficiency must be in [0, 1]"));
        }
        if !(self.dark_rate_hz.is_finite() && self.dark_rate_hz >= 0.0) {
            return Err(Error::validation("detector", "dark_rate_hz must be >= 0"));
        }
        if !(self.jitter_sigma_ps.is_finite() && self.jitter_sigma_ps >= 0.0) {
            return Err(Error::validation("detector", "jitter_sigma_ps must be >= 0"));
        }
        Ok(())
    }

    /// Minimum spacing between kept detections. A zero dead time still keeps
    /// timestamps strictly increasing.
    fn min_gap_ps(&self) -> u64 {
        self.dead_time_ps.max(1)
    }
}

/// Gaussian tunable bandpass filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunableFilter {
    #[serde(default = "default_fwhm")]
    pub fwhm_nm: f64,
    #[serde(default = "default_filter_loss")]
    pub insertion_loss_db: f64,
}

fn default_fwhm() -> f64 {
    0.8
}

fn default_filter_loss() -> f64 {
    3.0
}

impl Default for TunableFilter {
    fn default() -> Self {
        Self {
            fwhm_nm: default_fwhm(),
            insertion_loss_db: default_filter_loss(),
        }
    }
}

impl TunableFilter {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_nm.is_finite() && self.fwhm_nm > 0.0) {
            return Err(Error::validation("filter", "fwhm_nm must be > 0"));
        }
        if !(self.insertion_loss_db.is_finite() && self.insertion_loss_db >= 0.0) {
            return Err(Error::validation("filter", "insertion_loss_db must be >= 0"));
        }
        Ok(())
    }

    /// Power transmission for light `detuning_nm` away from the filter center.
    pub fn transmission(&self, detuning_nm: f64) -> f64 {
        let shape = (-4.0 * std::f64::consts::LN_2 * (detuning_nm / self.fwhm_nm).powi(2)).exp();
        10f64.powf(-self.insertion_loss_db / 10.0) * shape
    }
}

/// A classical line leaking into the monitored fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakLine {
    pub wavelength_nm: Wavelength,
    pub rate_photons_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub duration_s: f64,
    pub seed: u64,
    /// Upper bound on the number of tags a run may produce.
    pub max_tags: u64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl SimOptions {
    pub const DEFAULT_MAX_TAGS: u64 = 200_000_000;

    pub fn new(duration_s: f64, seed: u64) -> Self {
        Self {
            duration_s,
            seed,
            max_tags: Self::DEFAULT_MAX_TAGS,
            jobs: None,
        }
    }
}

/// Mean photons per pulse reaching the detector from one coupling site.
pub fn mean_photons_per_pulse(source: &PulsedSource, coupling_db: f64, path_loss_db: f64) -> f64 {
    let transmission = 10f64.powf(-(path_loss_db + coupling_db.abs()) / 10.0);
    source.photons_per_pulse() * transmission
}

/// Mean detector clicks per pulse contributed by one coupling site, before
/// dead time.
pub fn mean_clicks_per_pulse(source: &PulsedSource, detector: &Detector, coupling_db: f64, path_loss_db: f64) -> f64 {
    mean_photons_per_pulse(source, coupling_db, path_loss_db) * detector.efficiency
}

/// Expected detector counts per second from one crosstalk point.
pub fn expected_peak_rate(
    topology: &Topology,
    source: &PulsedSource,
    detector: &Detector,
    point: &CrosstalkPoint,
) -> Result<f64> {
    let lambda = source.wavelength_nm;
    let loss = topology.point_path_loss_db(point.position_m, lambda)?;
    let coupling = point.coupling_db(lambda);
    Ok(source.rep_rate_hz * mean_clicks_per_pulse(source, detector, coupling.db(), loss.db()))
}

struct PointModel {
    delay_ps: f64,
    photons: Option<Poisson<f64>>,
}

fn substream(seed: u64, domain: u32, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean <= 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::domain(format!("Poisson mean {mean}: {e}")))
}

/// Simulate an OTDR crosstalk run: trigger tags plus detector clicks from
/// every crosstalk point, dark counts, efficiency thinning and
/// non-paralyzable dead time.
pub fn simulate_otdr_tags(
    topology: &Topology,
    source: &PulsedSource,
    detector: &Detector,
    options: &SimOptions,
) -> Result<TagStream> {
    source.validate()?;
    detector.validate()?;
    if !(options.duration_s.is_finite() && options.duration_s > 0.0) {
        return Err(Error::domain("duration must be > 0"));
    }
    let period = source.period_ps();
    let pulses = (options.duration_s * source.rep_rate_hz).round() as u64;
    if pulses == 0 {
        return Err(Error::domain("duration shorter than one pulse period"));
    }
    let lambda = source.wavelength_nm;

    let mut points = Vec::new();
    let mut clicks_per_pulse = 0.0;
    for p in topology.crosstalk_points() {
        let loss = topology.point_path_loss_db(p.position_m, lambda)?;
        // Efficiency is applied later by thinning.
        let arriving = mean_photons_per_pulse(source, p.coupling_db(lambda).db(), loss.db());
        clicks_per_pulse += arriving * detector.efficiency;
        points.push(PointModel {
            delay_ps: topology.point_delay_ps(p.position_m),
            photons: poisson(arriving)?,
        });
    }
    let dark_mean = detector.dark_rate_hz * period as f64 / PS_PER_S;
    clicks_per_pulse += dark_mean;
    let expected = pulses as f64 * (1.0 + clicks_per_pulse);
    if expected > options.max_tags as f64 {
        return Err(Error::Resource(format!(
            "run would produce about {expected:.3e} tags, above the cap of {}",
            options.max_tags
        )));
    }

    let pulse_sigma = source.pulse_width_ps / FWHM_PER_SIGMA;
    let sigma = pulse_sigma.hypot(detector.jitter_sigma_ps);
    let spread = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
    let dark = poisson(dark_mean)?;
    let seed = options.seed;
    let efficiency = detector.efficiency;

    let generate = |range: std::ops::Range<u64>| -> Vec<u64> {
        let mut out = Vec::new();
        for k in range {
            let mut rng = substream(seed, OTDR_DOMAIN, k);
            let t0 = (k * period) as f64;
            for point in &points {
                let Some(dist) = &point.photons else { continue };
                let n = dist.sample(&mut rng) as u64;
                for _ in 0..n {
                    let jitter = spread.sample(&mut rng);
                    if rng.random::<f64>() < efficiency {
                        let t = (t0 + point.delay_ps + jitter).round();
                        if t >= 0.0 {
                            out.push(t as u64);
                        }
                    }
                }
            }
            if let Some(dist) = &dark {
                let n = dist.sample(&mut rng) as u64;
                for _ in 0..n {
                    out.push(k * period + rng.random_range(0..period));
                }
            }
        }
        out.sort_unstable();
        out
    };

    let chunks: Vec<_> = (0..pulses)
        .step_by(PULSES_PER_CHUNK as usize)
        .map(|start| start..(start + PULSES_PER_CHUNK).min(pulses))
        .collect();
    let run = || chunks.par_iter().cloned().map(generate).collect::<Vec<_>>();
    let parts = match options.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Resource(e.to_string()))?
            .install(run),
        None => run(),
    };

    let min_gap = detector.min_gap_ps();
    let mut detections = Vec::with_capacity(parts.iter().map(Vec::len).sum());
    let mut last: Option<u64> = None;
    for t in parts.into_iter().kmerge() {
        if last.is_none_or(|prev| t >= prev + min_gap) {
            detections.push(t);
            last = Some(t);
        }
    }
    let total = pulses + detections.len() as u64;
    if total > options.max_tags {
        return Err(Error::Resource(format!(
            "run produced {total} tags, above the cap of {}",
            options.max_tags
        )));
    }

    let triggers = (0..pulses).map(|k| k * period).collect();
    let stream = TagStream::new(triggers, detections)?;
    Ok(stream.with_metadata(StreamMetadata {
        schema_version: 1,
        seed,
        duration_s: options.duration_s,
        period_ps: period,
        pulses,
        source: *source,
        detector: *detector,
    }))
}

/// Simulate a dark-fiber spectral scan through a tunable filter.
pub fn simulate_spectral_scan(
    lines: &[LeakLine],
    filter: &TunableFilter,
    detector: &Detector,
    grid: &[Wavelength],
    dwell_s: f64,
    seed: u64,
) -> Result<SpectralScan> {
    filter.validate()?;
    detector.validate()?;
    if grid.is_empty() {
        return Err(Error::domain("wavelength grid is empty"));
    }
    if grid.windows(2).any(|w| w[0].nm() >= w[1].nm()) {
        return Err(Error::domain("wavelength grid must be strictly increasing"));
    }
    if !(dwell_s.is_finite() && dwell_s > 0.0) {
        return Err(Error::domain("dwell must be > 0"));
    }
    if let Some(l) = lines
        .iter()
        .find(|l| !(l.rate_photons_per_s.is_finite() && l.rate_photons_per_s >= 0.0))
    {
        return Err(Error::domain(format!(
            "line at {} has a negative rate",
            l.wavelength_nm
        )));
    }
    let counts = grid
        .iter()
        .enumerate()
        .map(|(i, center)| {
            let signal: f64 = lines
                .iter()
                .map(|l| l.rate_photons_per_s * filter.transmission(l.wavelength_nm.nm() - center.nm()))
                .sum();
            let mean = dwell_s * (signal * detector.efficiency + detector.dark_rate_hz);
            let mut rng = substream(seed, SCAN_DOMAIN, i as u64);
            Ok(match poisson(mean)? {
                Some(d) => d.sample(&mut rng) as u64,
                None => 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralScan::new(grid.to_vec(), counts, dwell_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::bundle_doc;

    fn nm(v: f64) -> Wavelength {
        Wavelength::from_nm(v).unwrap()
    }

    fn source() -> PulsedSource {
        PulsedSource::new(nm(1550.0), 1e-6)
    }

    fn lossless(points: &[(f64, f64)]) -> Topology {
        Topology::from_doc(bundle_doc(3000.0, 0.0, points)).unwrap()
    }

    #[test]
    fn expected_rate_examples() {
        let t = lossless(&[(0.0, -100.0)]);
        let p = &t.crosstalk_points()[0];
        let mut d = Detector::default();
        let r = expected_peak_rate(&t, &source(), &d, p).unwrap();
        // 7.80e9 photons per pulse * 1e-10 * 0.85 * 1 kHz.
        assert!((r - 663.244_857_773_752).abs() < 1e-6, "{r}");
        d.efficiency = 0.425;
        let half = expected_peak_rate(&t, &source(), &d, p).unwrap();
        assert!((half - r / 2.0).abs() < 1e-9);
        assert_eq!(mean_clicks_per_pulse(&source(), &d, f64::NEG_INFINITY, 0.0), 0.0);
    }

    #[test]
    fn photons_per_pulse_at_one_microwatt() {
        let n = source().photons_per_pulse();
        assert!((n / 7.802_9e9 - 1.0).abs() < 1e-4, "{n}");
    }

    #[test]
    fn no_points_no_dark_means_empty_detector() {
        let t = lossless(&[]);
        let d = Detector {
            dark_rate_hz: 0.0,
            ..Detector::default()
        };
        let s = simulate_otdr_tags(&t, &source(), &d, &SimOptions::new(1.0, 3)).unwrap();
        assert_eq!(s.triggers().len(), 1000);
        assert!(s.detections().is_empty());
    }

    #[test]
    fn output_is_deterministic_and_partition_free() {
        let t = lossless(&[(150.0, -95.0), (800.0, -100.0)]);
        let d = Detector::default();
        let mut opts = SimOptions::new(5.0, 42);
        opts.jobs = Some(1);
        let a = simulate_otdr_tags(&t, &source(), &d, &opts).unwrap();
        opts.jobs = Some(4);
        let b = simulate_otdr_tags(&t, &source(), &d, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.encode_xtt1(), b.encode_xtt1());
        opts.seed = 43;
        let c = simulate_otdr_tags(&t, &source(), &d, &opts).unwrap();
        assert_ne!(a.detections(), c.detections());
    }

    #[test]
    fn dead_time_and_monotonicity_hold() {
        let t = lossless(&[(150.0, -85.0), (150.2, -85.0)]);
        let d = Detector::default();
        let s = simulate_otdr_tags(&t, &source(), &d, &SimOptions::new(2.0, 7)).unwrap();
        assert!(!s.detections().is_empty());
        assert!(s.detections().windows(2).all(|w| w[1] - w[0] >= d.dead_time_ps));
        assert!(s.triggers().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tag_cap_is_enforced() {
        let t = lossless(&[]);
        let mut opts = SimOptions::new(10.0, 1);
        opts.max_tags = 5000;
        assert!(matches!(
            simulate_otdr_tags(&t, &source(), &Detector::default(), &opts),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let t = lossless(&[]);
        let d = Detector::default();
        assert!(simulate_otdr_tags(&t, &source(), &d, &SimOptions::new(0.0, 1)).is_err());
        let mut s = source();
        s.avg_power_w = 0.0;
        assert!(simulate_otdr_tags(&t, &s, &d, &SimOptions::new(1.0, 1)).is_err());
        let bad = Detector { efficiency: 1.5, ..d };
        assert!(simulate_otdr_tags(&t, &source(), &bad, &SimOptions::new(1.0, 1)).is_err());
    }

    #[test]
    fn filter_transmission_shape() {
        let f = TunableFilter::default();
        assert!((f.transmission(0.0) - 10f64.powf(-0.3)).abs() < 1e-12);
        assert!((f.transmission(0.4) / f.transmission(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let f = TunableFilter::default();
        let d = Detector::default();
        assert!(simulate_spectral_scan(&[], &f, &d, &[], 1.0, 1).is_err());
        assert!(simulate_spectral_scan(&[], &f, &d, &[nm(1300.0), nm(1300.0)], 1.0, 1).is_err());
        assert!(simulate_spectral_scan(&[], &f, &d, &[nm(1300.0)], 0.0, 1).is_err());
    }

    #[test]
    fn dark_only_scan_is_flat() {
        let grid: Vec<_> = (0..200).map(|i| nm(1260.0 + 0.5 * f64::from(i))).collect();
        let s = simulate_spectral_scan(&[], &TunableFilter::default(), &Detector::default(), &grid, 1.0, 5).unwrap();
        let mean = s.counts().iter().sum::<u64>() as f64 / 200.0;
        assert!((mean - 100.0).abs() < 5.0 * (100.0f64 / 200.0).sqrt(), "{mean}");
    }
}
