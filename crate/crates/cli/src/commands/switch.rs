use serde::Serialize;
use serde_json::json;
use xtalk_core::switch::{
    configs_to_csv, curve_to_csv, optimize_assignment, sweep_configs, sweep_wavelength, Assignment, Band, BandPlan,
    MeasuredTable, ParametricCrosstalk, Path, PlanOptions, SwitchConfig, SwitchModel,
};

use crate::failure::{CliResult, Failure};
use crate::manifest::{Run, RunManifest, SCHEMA_VERSION};
use crate::units;
use crate::{ModelArgs, SwitchCommand};

fn build_model(run: &mut Run, m: &ModelArgs) -> CliResult<SwitchModel> {
    match &m.table {
        Some(path) => {
            let bytes = run.read(path)?;
            let table = MeasuredTable::read_csv(bytes.as_slice())
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            Ok(SwitchModel::measured(m.n_in, m.n_out, table)?)
        }
        None => {
            let p = ParametricCrosstalk {
                c0_db: m.c0,
                beta_in_db_per_port: m.beta_in,
                beta_out_db_per_port: m.beta_out,
                reference_nm: m.reference,
                slope_db_per_nm: m.slope.unwrap_or(ParametricCrosstalk::default().slope_db_per_nm),
                floor_db: m.floor,
            };
            SwitchModel::parametric(m.n_in, m.n_out, p).map_err(|e| Failure::param(e.to_string()))
        }
    }
}

fn model_params(m: &ModelArgs) -> serde_json::Value {
    json!({
        "n_in": m.n_in,
        "n_out": m.n_out,
        "table": m.table,
        "c0_db": m.c0,
        "beta_in_db_per_port": m.beta_in,
        "beta_out_db_per_port": m.beta_out,
        "reference_nm": m.reference,
        "slope_db_per_nm": m.slope.unwrap_or(ParametricCrosstalk::default().slope_db_per_nm),
        "floor_db": m.floor,
    })
}

/// `in:out,in:out,...`
fn parse_paths(raw: &str) -> CliResult<Vec<Path>> {
    raw.split(',')
        .map(|part| {
            let (i, o) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| Failure::param(format!("`{part}`: expected in:out")))?;
            let port = |s: &str| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| Failure::param(format!("`{s}` is not a port number")))
            };
            Ok(Path::new(port(i)?, port(o)?))
        })
        .collect()
}

fn parse_band(raw: &str) -> CliResult<Band> {
    match raw {
        "O" | "o" => Ok(Band::o_band()),
        "C" | "c" => Ok(Band::c_band()),
        _ => {
            let parts: Vec<&str> = raw.split(':').collect();
            let [lo, hi, nominal] = parts[..] else {
                return Err(Failure::param(format!("band `{raw}`: expected O, C or lo:hi:nominal")));
            };
            Ok(Band {
                name: raw.to_string(),
                lo_nm: units::nanometres(lo)?,
                hi_nm: units::nanometres(hi)?,
                nominal_nm: units::nanometres(nominal)?,
            })
        }
    }
}

#[derive(Debug, Serialize)]
struct PlanReport<'a> {
    schema_version: u32,
    bands: &'a BandPlan,
    assignment: &'a Assignment,
}

pub fn run(cmd: SwitchCommand) -> CliResult<RunManifest> {
    match cmd {
        SwitchCommand::SweepConfig {
            model,
            aggressor_in,
            victim_out,
            wavelength,
            out,
            common: _,
        } => {
            let victim_out = victim_out.unwrap_or(model.n_in + 1);
            let mut run = Run::new(
                "switch sweep-config",
                json!({
                    "model": model_params(&model),
                    "aggressor_in": aggressor_in,
                    "victim_out": victim_out,
                    "wavelength_nm": wavelength,
                    "out": out,
                }),
                None,
            );
            let m = build_model(&mut run, &model)?;
            let table = sweep_configs(&m, aggressor_in, victim_out, wavelength)?;
            run.write(&out, configs_to_csv(&table).as_bytes())?;
            run.finish(&out)
        }
        SwitchCommand::SweepWavelength {
            model,
            config,
            grid,
            out,
            common: _,
        } => {
            let mut run = Run::new(
                "switch sweep-wavelength",
                json!({
                    "model": model_params(&model),
                    "config": config,
                    "grid_nm": {"lo": grid.0.first(), "hi": grid.0.last(), "points": grid.0.len()},
                    "out": out,
                }),
                None,
            );
            let m = build_model(&mut run, &model)?;
            let paths = parse_paths(&config)?;
            let [aggressor, victim] = paths[..] else {
                return Err(Failure::param("--config takes exactly two paths: aggressor,victim"));
            };
            SwitchConfig::new(&m, paths.clone())?;
            let curve = sweep_wavelength(&m, aggressor, victim, &grid.0)?;
            run.write(&out, curve_to_csv(&curve).as_bytes())?;
            run.finish(&out)
        }
        SwitchCommand::Plan {
            model,
            classical,
            quantum,
            classical_band,
            quantum_band,
            exhaustive_limit,
            out,
            common: _,
        } => {
            let bands = BandPlan {
                classical: parse_band(&classical_band)?,
                quantum: parse_band(&quantum_band)?,
            };
            let mut run = Run::new(
                "switch plan",
                json!({
                    "model": model_params(&model),
                    "classical": classical,
                    "quantum": quantum,
                    "bands": bands,
                    "exhaustive_limit": exhaustive_limit.to_string(),
                    "out": out,
                }),
                None,
            );
            let m = build_model(&mut run, &model)?;
            let opts = PlanOptions { exhaustive_limit };
            let assignment = optimize_assignment(&m, classical, quantum, &bands, &opts)?;
            run.write_json(
                &out,
                &PlanReport {
                    schema_version: SCHEMA_VERSION,
                    bands: &bands,
                    assignment: &assignment,
                },
            )?;
            run.finish(&out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_lists() {
        assert_eq!(
            parse_paths("1:10, 2:9").unwrap(),
            vec![Path::new(1, 10), Path::new(2, 9)]
        );
        assert!(parse_paths("1-10").is_err());
        assert!(parse_paths("1:x").is_err());
    }

    #[test]
    fn bands() {
        assert_eq!(parse_band("O").unwrap(), Band::o_band());
        let b = parse_band("1500nm:1600nm:1550nm").unwrap();
        assert_eq!((b.lo_nm, b.hi_nm, b.nominal_nm), (1500.0, 1600.0, 1550.0));
        assert!(parse_band("X").is_err());
    }
}
