//! Delay histograms, peak detection, localization and coupling estimates.
//!
//! The pipeline is `fold_histogram` → `find_histogram_peaks` → `localize`
//! and `estimate_coupling_db`. Spectral scans reuse the same peak detector.

mod estimate;
mod histogram;
mod peaks;
mod spectral;

pub use estimate::{
    estimate_coupling_db, localize, pileup_corrected_amplitude, CouplingEstimate, LocatedCrosstalk,
    DEFAULT_MAP_TOLERANCE_M,
};
pub use histogram::{fold_histogram, nearest_divisor, FoldDiagnostics, Histogram, PERIOD_JITTER_TOLERANCE};
pub use peaks::{
    detect_peaks, estimate_baseline, find_histogram_peaks, Baseline, Peak, SeriesPeak, DEFAULT_K_SIGMA,
    DEFAULT_MIN_SEPARATION_BINS, MIN_BASELINE_BINS,
};
pub use spectral::{detect_spectral_lines, SpectralLine, SpectralScan};
