use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::Wavelength;

use super::peaks::{detect_peaks, estimate_baseline, DEFAULT_MIN_SEPARATION_BINS};

/// Counts measured while stepping a filter across a wavelength grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralScan {
    grid: Vec<Wavelength>,
    counts: Vec<u64>,
    dwell_s: f64,
}

impl SpectralScan {
    pub fn new(grid: Vec<Wavelength>, counts: Vec<u64>, dwell_s: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::domain("scan grid is empty"));
        }
        if grid.len() != counts.len() {
            return Err(Error::domain("scan grid and counts differ in length"));
        }
        if grid.windows(2).any(|w| w[0].nm() >= w[1].nm()) {
            return Err(Error::domain("scan grid must be strictly increasing"));
        }
        if !(dwell_s.is_finite() && dwell_s > 0.0) {
            return Err(Error::domain("dwell must be > 0"));
        }
        Ok(Self { grid, counts, dwell_s })
    }

    pub fn grid(&self) -> &[Wavelength] {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn dwell_s(&self) -> f64 {
        self.dwell_s
    }

    /// Wavelength at a fractional grid index, linear between grid points.
    pub fn wavelength_at(&self, index: f64) -> f64 {
        let last = self.grid.len() - 1;
        let i = (index.floor().max(0.0) as usize).min(last);
        if i == last {
            return self.grid[last].nm();
        }
        let frac = index - i as f64;
        self.grid[i].nm() + frac * (self.grid[i + 1].nm() - self.grid[i].nm())
    }

    /// `lambda_nm,counts` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda_nm,counts\n");
        for (l, c) in self.grid.iter().zip(&self.counts) {
            out.push_str(&format!("{},{}\n", l.nm(), c));
        }
        out
    }

    pub fn read_csv<R: BufRead>(r: R, dwell_s: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            lambda_nm: f64,
            counts: u64,
        }
        let mut grid = Vec::new();
        let mut counts = Vec::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                path: format!("line {}", i + 2),
                message: e.to_string(),
            })?;
            grid.push(Wavelength::from_nm(row.lambda_nm)?);
            counts.push(row.counts);
        }
        Self::new(grid, counts, dwell_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralLine {
    pub wavelength_nm: f64,
    /// Integrated line counts over the scan, per second of dwell.
    pub rate: f64,
    pub significance_sigma: f64,
}

/// Peaks in a counts-versus-wavelength scan.
pub fn detect_spectral_lines(scan: &SpectralScan, k_sigma: f64) -> Result<Vec<SpectralLine>> {
    let baseline = estimate_baseline(&scan.counts)?;
    Ok(
        detect_peaks(&scan.counts, baseline, k_sigma, DEFAULT_MIN_SEPARATION_BINS)?
            .into_iter()
            .map(|p| SpectralLine {
                wavelength_nm: scan.wavelength_at(p.centroid),
                rate: p.amplitude_counts / scan.dwell_s,
                significance_sigma: p.significance_sigma,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_spectral_scan, Detector, LeakLine, TunableFilter};

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<Wavelength> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n)
            .map(|i| Wavelength::from_nm(lo + step * i as f64).unwrap())
            .collect()
    }

    fn line(nm: f64, rate: f64) -> LeakLine {
        LeakLine {
            wavelength_nm: Wavelength::from_nm(nm).unwrap(),
            rate_photons_per_s: rate,
        }
    }

    #[test]
    fn dark_only_scan_has_no_lines() {
        let s = simulate_spectral_scan(
            &[],
            &TunableFilter::default(),
            &Detector::default(),
            &grid(1260.0, 1360.0, 0.1),
            1.0,
            3,
        )
        .unwrap();
        assert!(detect_spectral_lines(&s, 5.0).unwrap().is_empty());
    }

    #[test]
    fn single_line_has_filter_width() {
        let f = TunableFilter::default();
        let s = simulate_spectral_scan(
            &[line(1310.0, 20_000.0)],
            &f,
            &Detector::default(),
            &grid(1260.0, 1360.0, 0.05),
            1.0,
            4,
        )
        .unwrap();
        let lines = detect_spectral_lines(&s, 5.0).unwrap();
        assert_eq!(lines.len(), 1);
        assert!((lines[0].wavelength_nm - 1310.0).abs() <= 0.05);
        // Half-maximum crossings of the measured shape.
        let counts = s.counts();
        let peak = *counts.iter().max().unwrap() as f64;
        let half = 100.0 + 0.5 * (peak - 100.0);
        let above: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] as f64 >= half).collect();
        let width = s.grid()[*above.last().unwrap()].nm() - s.grid()[above[0]].nm();
        assert!((width - f.fwhm_nm).abs() <= 0.15, "{width}");
    }

    #[test]
    fn four_o_band_lines_resolved() {
        let lines: Vec<_> = [1270.0, 1290.0, 1310.0, 1330.0]
            .iter()
            .map(|&l| line(l, 2000.0))
            .collect();
        let g = grid(1260.0, 1360.0, 0.1);
        let s = simulate_spectral_scan(&lines, &TunableFilter::default(), &Detector::default(), &g, 1.0, 11).unwrap();
        let found = detect_spectral_lines(&s, 5.0).unwrap();
        assert_eq!(found.len(), 4);
        for (f, l) in found.iter().zip(&lines) {
            assert!((f.wavelength_nm - l.wavelength_nm.nm()).abs() <= 0.1, "{f:?}");
        }
    }

    #[test]
    fn weak_line_is_not_reported() {
        let s = simulate_spectral_scan(
            &[line(1310.0, 10.0)],
            &TunableFilter::default(),
            &Detector::default(),
            &grid(1260.0, 1360.0, 0.1),
            1.0,
            2,
        )
        .unwrap();
        assert!(detect_spectral_lines(&s, 5.0).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let s = SpectralScan::new(grid(1300.0, 1302.5, 0.5), vec![1, 2, 3, 4, 5, 6], 2.0).unwrap();
        let back = SpectralScan::read_csv(s.to_csv().as_bytes(), 2.0).unwrap();
        assert_eq!(back, s);
        assert!(SpectralScan::read_csv("lambda_nm,counts\n900,1\n".as_bytes(), 1.0).is_err());
    }

    #[test]
    fn fractional_index_interpolates() {
        let s = SpectralScan::new(grid(1300.0, 1302.0, 1.0), vec![0, 0, 0], 1.0).unwrap();
        assert_eq!(s.wavelength_at(0.5), 1300.5);
        assert_eq!(s.wavelength_at(2.0), 1302.0);
    }
}
