use serde::{Deserialize, Serialize};
use serde_json::json;
use xtalk_core::photonics::Wavelength;
use xtalk_core::schema::parse_json;
use xtalk_core::sim::{simulate_spectral_scan, Detector, LeakLine, TunableFilter};
use xtalk_core::tcspc::{detect_spectral_lines, SpectralLine, SpectralScan};

use super::{load_doc, mode};
use crate::failure::{CliResult, Failure};
use crate::manifest::{sidecar, Run, RunManifest, SCHEMA_VERSION};
use crate::{ScanAnalyzeArgs, ScanArgs};

#[derive(Debug, Deserialize)]
struct LinesDoc {
    lines: Vec<LeakLine>,
}

/// Written next to a scan so it can be analyzed without repeating flags.
#[derive(Debug, Serialize, Deserialize)]
struct ScanMeta {
    schema_version: u32,
    seed: u64,
    dwell_s: f64,
    filter: TunableFilter,
    detector: Detector,
    points: usize,
}

pub fn scan(a: ScanArgs) -> CliResult<RunManifest> {
    let mut run = Run::new("scan", serde_json::Value::Null, Some(a.seed));
    let lines: LinesDoc = load_doc(&mut run, &a.lines, a.common.lax)?;
    let filter: TunableFilter = match &a.filter {
        Some(p) => load_doc(&mut run, p, a.common.lax)?,
        None => TunableFilter::default(),
    };
    let detector: Detector = match &a.detector {
        Some(p) => load_doc(&mut run, p, a.common.lax)?,
        None => Detector::default(),
    };
    let grid: Vec<Wavelength> = a
        .grid
        .0
        .iter()
        .map(|&nm| Wavelength::from_nm(nm))
        .collect::<Result<_, _>>()?;
    run.set_parameters(json!({
        "lines": a.lines,
        "filter": filter,
        "detector": detector,
        "grid_nm": {"lo": a.grid.0.first(), "hi": a.grid.0.last(), "points": a.grid.0.len()},
        "dwell_s": a.dwell,
        "seed": a.seed,
        "out": a.out,
        "lax": a.common.lax,
    }));

    let scan = simulate_spectral_scan(&lines.lines, &filter, &detector, &grid, a.dwell, a.seed)?;
    run.write(&a.out, scan.to_csv().as_bytes())?;
    run.write_json(
        &sidecar(&a.out, "meta.json"),
        &ScanMeta {
            schema_version: SCHEMA_VERSION,
            seed: a.seed,
            dwell_s: a.dwell,
            filter,
            detector,
            points: grid.len(),
        },
    )?;
    run.finish(&a.out)
}

#[derive(Debug, Serialize)]
struct LinesReport {
    schema_version: u32,
    dwell_s: f64,
    k_sigma: f64,
    lines: Vec<SpectralLine>,
}

pub fn scan_analyze(a: ScanAnalyzeArgs) -> CliResult<RunManifest> {
    let mut run = Run::new(
        "scan-analyze",
        json!({
            "scan": a.scan,
            "dwell_s": a.dwell,
            "k_sigma": a.k_sigma,
            "out": a.out,
        }),
        None,
    );
    let text = run.read_string(&a.scan)?;
    let dwell = match a.dwell {
        Some(d) => d,
        None => {
            let meta_path = sidecar(&a.scan, "meta.json");
            if !meta_path.exists() {
                return Err(Failure::input(format!(
                    "no --dwell given and {} does not exist",
                    meta_path.display()
                )));
            }
            let meta: ScanMeta = parse_json(&run.read_string(&meta_path)?, mode(a.common.lax))
                .map_err(|e| Failure::input(format!("{}: {e}", meta_path.display())))?;
            meta.dwell_s
        }
    };
    let scan = SpectralScan::read_csv(text.as_bytes(), dwell)
        .map_err(|e| Failure::input(format!("{}: {e}", a.scan.display())))?;
    let lines = detect_spectral_lines(&scan, a.k_sigma)?;
    run.write_json(
        &a.out,
        &LinesReport {
            schema_version: SCHEMA_VERSION,
            dwell_s: dwell,
            k_sigma: a.k_sigma,
            lines,
        },
    )?;
    run.finish(&a.out)
}
