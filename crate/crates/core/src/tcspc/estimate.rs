use serde::Serialize;

use crate::error::{Error, Result};
use crate::photonics::time_to_distance;
use crate::plant::Topology;
use crate::sim::{Detector, PulsedSource, FWHM_PER_SIGMA};

use super::histogram::Histogram;
use super::peaks::Peak;

/// Positional accuracy of the plant records a located peak is matched
/// against, meters.
pub const DEFAULT_MAP_TOLERANCE_M: f64 = 1.0;

/// dB per unit relative error: `10 / ln 10`.
const DB_PER_NEPER_POWER: f64 = 4.342_944_819_032_518;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocatedCrosstalk {
    pub distance_m: f64,
    pub distance_uncertainty_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_uncertainty_db: Option<f64>,
    pub matched_element: Option<String>,
}

/// Convert peak delays to positions along the bundle and match each to the
/// nearest modeled element.
///
/// An element matches when it lies within `max(3·uncertainty, map_tolerance_m)`.
pub fn localize(peaks: &[Peak], topology: &Topology, map_tolerance_m: f64) -> Result<Vec<LocatedCrosstalk>> {
    let propagation = topology.localization_propagation()?;
    let n_g = topology.effective_group_index();
    let elements: Vec<(f64, String)> = topology
        .crosstalk_points()
        .into_iter()
        .filter_map(|p| p.source.id().map(|id| (p.position_m, id.to_string())))
        .collect();
    peaks
        .iter()
        .map(|p| {
            let distance_m = time_to_distance(p.delay_ps.max(0.0), n_g, propagation)?;
            let distance_uncertainty_m = time_to_distance(p.fwhm_ps / FWHM_PER_SIGMA, n_g, propagation)?;
            let tolerance = (3.0 * distance_uncertainty_m).max(map_tolerance_m);
            let matched_element = elements
                .iter()
                .map(|(pos, id)| ((pos - distance_m).abs(), id))
                .filter(|(gap, _)| *gap <= tolerance)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, id)| id.clone());
            Ok(LocatedCrosstalk {
                distance_m,
                distance_uncertainty_m,
                coupling_db: None,
                coupling_uncertainty_db: None,
                matched_element,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingEstimate {
    pub coupling_db: f64,
    pub uncertainty_db: f64,
    /// Detected counts in the peak after dead-time correction.
    pub corrected_amplitude: f64,
}

/// Mean detections per trigger for a bin that collected `counts` out of
/// `live` opportunities, undoing single-hit saturation: `−ln(1 − counts/live)`.
fn unsaturate(counts: f64, live: f64) -> Result<f64> {
    let p = counts / live;
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Data(format!(
            "bin saturated: {counts} counts from {live} live triggers"
        )));
    }
    Ok(-(-p).ln_1p())
}

/// Peak amplitude with the detector dead time undone.
///
/// A click in one bin blinds the detector for the next
/// `ceil(dead_time / bin_width)` bins, so each bin only sees the triggers
/// that were live at its start. With that live count the per-bin Poisson
/// mean is recovered exactly; the background mean is recovered the same way
/// and subtracted. Bins before a windowed histogram are taken as empty.
pub fn pileup_corrected_amplitude(
    peak: &Peak,
    h: &Histogram,
    background_per_bin: f64,
    dead_time_ps: u64,
) -> Result<f64> {
    if dead_time_ps == 0 {
        return Ok(peak.amplitude_counts);
    }
    let triggers = h.total_triggers as f64;
    let dead_bins = dead_time_ps.div_ceil(h.bin_width_ps) as usize;
    let n = h.counts.len();
    let wrap = h.covers_period();
    let background_mu = unsaturate(background_per_bin.max(0.0), triggers)?;
    let threshold_start = peak.run_start;
    let mut total = 0.0;
    for i in threshold_start..peak.run_end {
        let prior: u64 = (1..=dead_bins.min(if wrap { n - 1 } else { i }))
            .map(|back| {
                let j = if back <= i { i - back } else { n + i - back };
                h.counts[j]
            })
            .sum();
        let live = triggers - prior as f64;
        let mu = unsaturate(h.counts[i] as f64, live)?;
        total += mu - background_mu;
    }
    Ok(total * triggers)
}

/// Invert the detected peak rate back to a coupling level in dB.
///
/// `coupling = 10·log10(A / (N·photons_per_pulse·η)) + L_out + L_back`,
/// where `A` is the dead-time-corrected amplitude and `N` the number of
/// triggers (live time × repetition rate).
pub fn estimate_coupling_db(
    peak: &Peak,
    h: &Histogram,
    topology: &Topology,
    source: &PulsedSource,
    detector: &Detector,
) -> Result<CouplingEstimate> {
    source
        .validate()
        .map_err(|e| Error::Input(format!("source metadata unusable: {e}")))?;
    if peak.amplitude_counts <= 0.0 {
        return Err(Error::domain("peak amplitude must be > 0 to estimate coupling"));
    }
    if detector.efficiency <= 0.0 {
        return Err(Error::domain("detector efficiency must be > 0 to estimate coupling"));
    }
    let propagation = topology.localization_propagation()?;
    let distance = time_to_distance(peak.delay_ps.max(0.0), topology.effective_group_index(), propagation)?;
    let reach = topology.aggressor().length_m.min(topology.victim().length_m);
    // A located distance a hair past a connector would pick up that
    // connector's own insertion loss; use the modeled site when one is close.
    let site = topology
        .crosstalk_points()
        .into_iter()
        .map(|p| p.position_m)
        .filter(|x| (x - distance).abs() <= DEFAULT_MAP_TOLERANCE_M)
        .min_by(|a, b| (a - distance).abs().total_cmp(&(b - distance).abs()))
        .unwrap_or(distance.min(reach));
    let path_loss = topology.point_path_loss_db(site, source.wavelength_nm)?;

    let bins = (peak.run_end - peak.run_start) as f64;
    let background_per_bin = if bins > 0.0 { peak.background_counts / bins } else { 0.0 };
    let corrected = pileup_corrected_amplitude(peak, h, background_per_bin, detector.dead_time_ps)?;
    if corrected <= 0.0 {
        return Err(Error::domain("corrected peak amplitude must be > 0"));
    }
    let launched = h.total_triggers as f64 * source.photons_per_pulse() * detector.efficiency;
    let coupling_db = 10.0 * (corrected / launched).log10() + path_loss.db();
    Ok(CouplingEstimate {
        coupling_db,
        uncertainty_db: DB_PER_NEPER_POWER / peak.amplitude_counts.sqrt(),
        corrected_amplitude: corrected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonics::Wavelength;
    use crate::plant::bundle_doc;
    use crate::tcspc::histogram::FoldDiagnostics;

    fn nm(v: f64) -> Wavelength {
        Wavelength::from_nm(v).unwrap()
    }

    fn peak(delay_ps: f64, amplitude: f64) -> Peak {
        Peak {
            bin_index: 0,
            delay_ps,
            amplitude_counts: amplitude,
            background_counts: 0.0,
            significance_sigma: 10.0,
            fwhm_ps: 100.0,
            run_start: 0,
            run_end: 1,
        }
    }

    fn hist(counts: Vec<u64>, triggers: u64) -> Histogram {
        Histogram {
            bin_width_ps: 100,
            period_ps: 1_000_000_000,
            offset_ps: 0,
            counts,
            total_triggers: triggers,
            live_time_s: triggers as f64 * 1e-3,
            diagnostics: FoldDiagnostics::default(),
        }
    }

    #[test]
    fn localization_examples() {
        let t = Topology::from_doc(bundle_doc(3000.0, 0.2, &[(1021.0, -100.0), (2000.0, -100.0)])).unwrap();
        let located = localize(&[peak(1e7, 100.0), peak(0.0, 100.0)], &t, DEFAULT_MAP_TOLERANCE_M).unwrap();
        assert!((located[0].distance_m - 1_021.091_478_2).abs() < 1e-6);
        assert_eq!(located[0].matched_element.as_deref(), Some("MPO-1"));
        assert!(located[0].distance_uncertainty_m > 0.0);
        assert_eq!(located[1].distance_m, 0.0);
        assert_eq!(located[1].matched_element, None);
    }

    #[test]
    fn far_end_localization_is_refused() {
        let mut doc = bundle_doc(3000.0, 0.2, &[(1021.0, -100.0)]);
        doc.victim.end = crate::plant::FiberEnd::Far;
        let t = Topology::from_doc(doc).unwrap();
        let err = localize(&[peak(1e7, 1.0)], &t, 1.0).unwrap_err();
        assert!(err.to_string().contains("localization impossible"));
    }

    #[test]
    fn coupling_scales_with_amplitude_and_efficiency() {
        let t = Topology::from_doc(bundle_doc(3000.0, 0.0, &[])).unwrap();
        let s = PulsedSource::new(nm(1550.0), 1e-6);
        let d = Detector {
            dead_time_ps: 0,
            ..Detector::default()
        };
        let h = hist(vec![0; 16], 60_000);
        let base = estimate_coupling_db(&peak(0.0, 39_794.7), &h, &t, &s, &d).unwrap();
        // 60 s of a -100 dB point at 1 uW: 663.2 counts/s.
        assert!((base.coupling_db + 100.0).abs() < 1e-3, "{}", base.coupling_db);
        let doubled = estimate_coupling_db(&peak(0.0, 2.0 * 39_794.7), &h, &t, &s, &d).unwrap();
        assert!((doubled.coupling_db - base.coupling_db - 3.0103).abs() < 1e-4);
        let halved_eta = Detector { efficiency: 0.425, ..d };
        let e = estimate_coupling_db(&peak(0.0, 39_794.7), &h, &t, &s, &halved_eta).unwrap();
        assert!((e.coupling_db - base.coupling_db - 3.0103).abs() < 1e-4);
        assert!(estimate_coupling_db(&peak(0.0, 0.0), &h, &t, &s, &d).is_err());
        let mut no_power = s;
        no_power.avg_power_w = 0.0;
        assert!(matches!(
            estimate_coupling_db(&peak(0.0, 10.0), &h, &t, &s, &Detector { efficiency: 0.0, ..d }),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            estimate_coupling_db(&peak(0.0, 10.0), &h, &t, &no_power, &d),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn coupling_does_not_jump_across_the_coupling_connector() {
        let t = Topology::from_doc(bundle_doc(3000.0, 0.2, &[(2100.0, -110.0)])).unwrap();
        let s = PulsedSource::new(nm(1550.0), 1e-6);
        let d = Detector {
            dead_time_ps: 0,
            ..Detector::default()
        };
        let h = hist(vec![0; 16], 30_000);
        let at = t.point_delay_ps(2100.0);
        let ps_per_mm = at / 2.1e6;
        let before = estimate_coupling_db(&peak(at - ps_per_mm, 1200.0), &h, &t, &s, &d).unwrap();
        let after = estimate_coupling_db(&peak(at + ps_per_mm, 1200.0), &h, &t, &s, &d).unwrap();
        assert!((before.coupling_db - after.coupling_db).abs() < 1e-9);
    }

    #[test]
    fn pileup_correction_inverts_saturation() {
        // One bin seeing a Poisson mean of 2 per trigger detects 1 - e^-2.
        let triggers = 1_000_000u64;
        let mu: f64 = 2.0;
        let hits = (triggers as f64 * (1.0 - (-mu).exp())).round() as u64;
        let mut counts = vec![0; 16];
        counts[3] = hits;
        let h = hist(counts, triggers);
        let mut p = peak(350.0, hits as f64);
        p.run_start = 3;
        p.run_end = 4;
        let corrected = pileup_corrected_amplitude(&p, &h, 0.0, 50_000).unwrap();
        assert!((corrected / triggers as f64 - mu).abs() < 1e-5, "{corrected}");
        assert_eq!(pileup_corrected_amplitude(&p, &h, 0.0, 0).unwrap(), hits as f64);
    }
}
