use std::path::Path;

use serde::Serialize;
use serde_json::json;
use xtalk_core::plant::Topology;
use xtalk_core::schema::parse_json;
use xtalk_core::sim::{simulate_otdr_tags, Detector, PulsedSource, SimOptions};
use xtalk_core::tags::{StreamMetadata, TagStream, XTT1_MAGIC};
use xtalk_core::tcspc::{
    estimate_coupling_db, find_histogram_peaks, fold_histogram, localize, Baseline, FoldDiagnostics, LocatedCrosstalk,
    Peak,
};

use super::{load_doc, mode};
use crate::failure::{CliResult, Failure};
use crate::manifest::{sidecar, Run, RunManifest, SCHEMA_VERSION};
use crate::{AnalyzeArgs, SimulateArgs};

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn simulate(a: SimulateArgs) -> CliResult<RunManifest> {
    let mut run = Run::new("simulate", serde_json::Value::Null, Some(a.seed));
    let topology = Topology::load(&run.read_string(&a.topology)?, mode(a.common.lax))?;
    let source: PulsedSource = load_doc(&mut run, &a.source, a.common.lax)?;
    let detector: Detector = match &a.detector {
        Some(p) => load_doc(&mut run, p, a.common.lax)?,
        None => Detector::default(),
    };
    let options = SimOptions {
        duration_s: a.duration,
        seed: a.seed,
        max_tags: a.max_tags,
        jobs: None,
    };
    let format = if is_csv(&a.out) { "csv" } else { "xtt1" };
    run.set_parameters(json!({
            "topology": a.topology,
            "source": source,
            "detector": detector,
            "duration_s": a.duration,
            "seed": a.seed,
            "out": a.out,
            "format": format,
            "max_tags": a.max_tags,
            "jobs": a.common.jobs,
        "lax": a.common.lax,
    }));

    let stream = simulate_otdr_tags(&topology, &source, &detector, &options)?;
    let bytes = if format == "csv" {
        let mut buf = Vec::new();
        stream.write_csv(&mut buf).expect("writing to memory");
        buf
    } else {
        stream.encode_xtt1()
    };
    run.write(&a.out, &bytes)?;
    if let Some(meta) = &stream.metadata {
        run.write_json(&sidecar(&a.out, "meta.json"), meta)?;
    }
    run.finish(&a.out)
}

fn load_stream(run: &mut Run, path: &Path) -> CliResult<TagStream> {
    let bytes = run.read(path)?;
    let stream = if bytes.starts_with(&XTT1_MAGIC) {
        TagStream::decode_xtt1(&bytes)
    } else {
        TagStream::read_csv(bytes.as_slice())
    };
    stream.map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct HistogramSummary {
    bin_width_ps: u64,
    period_ps: u64,
    offset_ps: u64,
    bins: usize,
    total_counts: u64,
    total_triggers: u64,
    live_time_s: f64,
}

#[derive(Debug, Serialize)]
struct AnalysisReport {
    schema_version: u32,
    parameters: serde_json::Value,
    histogram: HistogramSummary,
    baseline: Baseline,
    peaks: Vec<Peak>,
    /// One entry per peak, same order; empty when the geometry cannot be localized.
    located: Vec<LocatedCrosstalk>,
    diagnostics: FoldDiagnostics,
    warnings: Vec<String>,
}

pub fn analyze(a: AnalyzeArgs) -> CliResult<RunManifest> {
    let mut run = Run::new(
        "analyze",
        json!({
            "tags": a.tags,
            "topology": a.topology,
            "meta": a.meta,
            "bin_width_ps": a.bin,
            "k_sigma": a.k_sigma,
            "min_separation_bins": a.min_separation,
            "window_ps": a.window,
            "map_tolerance_m": a.map_tolerance,
            "out": a.out,
            "hist": a.hist,
            "lax": a.common.lax,
        }),
        None,
    );
    let mut stream = load_stream(&mut run, &a.tags)?;
    let topology = Topology::load(&run.read_string(&a.topology)?, mode(a.common.lax))?;
    let meta_path = a.meta.clone().or_else(|| {
        let p = sidecar(&a.tags, "meta.json");
        p.exists().then_some(p)
    });
    let mut warnings = Vec::new();
    if let Some(p) = &meta_path {
        let text = run.read_string(p)?;
        let meta: StreamMetadata =
            parse_json(&text, mode(a.common.lax)).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
        stream = stream.with_metadata(meta);
    } else {
        warnings.push("no stream metadata; coupling levels not estimated".to_string());
    }

    let h = fold_histogram(&stream, a.bin, a.window)?;
    let (baseline, peaks) = find_histogram_peaks(&h, a.k_sigma, a.min_separation)?;

    let located = match localize(&peaks, &topology, a.map_tolerance) {
        Ok(l) => Some(l),
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    let mut located = located.unwrap_or_default();
    if let Some(m) = &stream.metadata {
        for (peak, loc) in peaks.iter().zip(located.iter_mut()) {
            match estimate_coupling_db(peak, &h, &topology, &m.source, &m.detector) {
                Ok(c) => {
                    loc.coupling_db = Some(c.coupling_db);
                    loc.coupling_uncertainty_db = Some(c.uncertainty_db);
                }
                Err(e) => warnings.push(format!("peak at {:.1} ps: {e}", peak.delay_ps)),
            }
        }
    }

    warnings.extend(h.diagnostics.warnings.iter().cloned());
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        parameters: json!({
            "bin_width_ps": a.bin,
            "k_sigma": a.k_sigma,
            "min_separation_bins": a.min_separation,
            "window_ps": a.window,
            "map_tolerance_m": a.map_tolerance,
        }),
        histogram: HistogramSummary {
            bin_width_ps: h.bin_width_ps,
            period_ps: h.period_ps,
            offset_ps: h.offset_ps,
            bins: h.counts.len(),
            total_counts: h.total_counts(),
            total_triggers: h.total_triggers,
            live_time_s: h.live_time_s,
        },
        baseline,
        peaks,
        located,
        diagnostics: h.diagnostics.clone(),
        warnings,
    };
    if let Some(path) = &a.hist {
        run.write(path, h.to_csv().as_bytes())?;
    }
    run.write_json(&a.out, &report)?;
    run.finish(&a.out)
}
