use serde::Serialize;

use crate::error::{Error, Result};

use super::model::{Path, SwitchModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfigPoint {
    pub aggressor: Path,
    pub victim: Path,
    pub xtalk_db: f64,
}

impl ConfigPoint {
    pub fn label(&self) -> String {
        format!("{}/{}", self.aggressor, self.victim)
    }
}

/// Crosstalk into a fixed victim output while the aggressor input is routed
/// to every other output and the victim output is fed from every other
/// input.
///
/// Outer loop over aggressor outputs, inner over victim inputs, both
/// ascending. The victim output itself is skipped as an aggressor output.
pub fn sweep_configs(
    m: &SwitchModel,
    aggressor_input: u32,
    victim_output: u32,
    wavelength_nm: f64,
) -> Result<Vec<ConfigPoint>> {
    m.check_path(Path::new(aggressor_input, victim_output))?;
    let mut table = Vec::new();
    for a_out in m.outputs().filter(|&o| o != victim_output) {
        for v_in in m.inputs().filter(|&i| i != aggressor_input) {
            let aggressor = Path::new(aggressor_input, a_out);
            let victim = Path::new(v_in, victim_output);
            table.push(ConfigPoint {
                aggressor,
                victim,
                xtalk_db: m.xtalk_db(aggressor, victim, wavelength_nm)?,
            });
        }
    }
    Ok(table)
}

/// `label,xtalk_db` CSV.
pub fn configs_to_csv(points: &[ConfigPoint]) -> String {
    let mut out = String::from("config,xtalk_db\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.label(), p.xtalk_db));
    }
    out
}

/// Crosstalk of one aggressor/victim pair across a strictly increasing grid.
pub fn sweep_wavelength(m: &SwitchModel, aggressor: Path, victim: Path, grid_nm: &[f64]) -> Result<Vec<(f64, f64)>> {
    if grid_nm.windows(2).any(|w| w[0] >= w[1]) || grid_nm.iter().any(|l| !l.is_finite()) {
        return Err(Error::domain("wavelength grid must be finite and strictly increasing"));
    }
    grid_nm
        .iter()
        .map(|&l| Ok((l, m.xtalk_db(aggressor, victim, l)?)))
        .collect()
}

/// `lambda_nm,xtalk_db` CSV.
pub fn curve_to_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("lambda_nm,xtalk_db\n");
    for (l, db) in curve {
        out.push_str(&format!("{l},{db}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switch::model::{MeasuredTable, ParametricCrosstalk};
    use proptest::prelude::*;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn adjacent_pair_tops_the_table() {
        let table = sweep_configs(&SwitchModel::default(), 1, 9, 1310.0).unwrap();
        assert_eq!(table.len(), 49);
        assert_eq!(table[0].aggressor, Path::new(1, 10));
        assert_eq!(table[0].victim, Path::new(2, 9));
        assert!(table[1..].iter().all(|p| p.xtalk_db < table[0].xtalk_db));
        assert_eq!(table[0].label(), "1->10/2->9");
    }

    #[test]
    fn flat_model_gives_flat_table() {
        let p = ParametricCrosstalk {
            beta_in_db_per_port: 0.0,
            beta_out_db_per_port: 0.0,
            ..Default::default()
        };
        let m = SwitchModel::parametric(8, 8, p).unwrap();
        assert!(sweep_configs(&m, 1, 9, 1310.0)
            .unwrap()
            .iter()
            .all(|p| p.xtalk_db == -50.0));
    }

    #[test]
    fn measured_values_echo() {
        let mut t = MeasuredTable::default();
        let mut expected = Vec::new();
        for a_out in 10..=16 {
            for v_in in 2..=8 {
                let v = -40.0 - a_out as f64 - 0.5 * v_in as f64;
                t.insert(Path::new(1, a_out), Path::new(v_in, 9), 1310.0, v).unwrap();
                expected.push(v);
            }
        }
        let m = SwitchModel::measured(8, 8, t.clone()).unwrap();
        let got: Vec<f64> = sweep_configs(&m, 1, 9, 1550.0)
            .unwrap()
            .iter()
            .map(|p| p.xtalk_db)
            .collect();
        assert_eq!(got, expected);
        let m = SwitchModel::measured(8, 8, MeasuredTable::default()).unwrap();
        assert!(matches!(sweep_configs(&m, 1, 9, 1310.0), Err(Error::Data(_))));
    }

    #[test]
    fn wavelength_curve_rises_ten_db() {
        let m = SwitchModel::default();
        let curve = sweep_wavelength(&m, Path::new(1, 9), Path::new(2, 10), &grid(1260.0, 1560.0, 301)).unwrap();
        assert_eq!(curve.len(), 301);
        assert!(curve.windows(2).all(|w| w[1].1 > w[0].1));
        assert!((curve[300].1 - curve[0].1 - 10.0).abs() < 1e-9);
        let single = sweep_wavelength(&m, Path::new(1, 9), Path::new(2, 10), &[1400.0]).unwrap();
        assert_eq!(single.len(), 1);
        assert!(sweep_wavelength(&m, Path::new(1, 9), Path::new(2, 10), &[1400.0, 1300.0]).is_err());
    }

    #[test]
    fn zero_slope_is_flat() {
        let p = ParametricCrosstalk {
            slope_db_per_nm: 0.0,
            ..Default::default()
        };
        let m = SwitchModel::parametric(8, 8, p).unwrap();
        let curve = sweep_wavelength(&m, Path::new(1, 9), Path::new(2, 10), &grid(1260.0, 1560.0, 31)).unwrap();
        assert!(curve.iter().all(|(_, db)| *db == -50.0));
    }

    proptest! {
        #[test]
        fn positive_slope_means_monotone_curve(slope in 1e-4..0.2f64, a in 1u32..=8, v in 1u32..=8) {
            prop_assume!(a != v);
            let p = ParametricCrosstalk { slope_db_per_nm: slope, floor_db: -300.0, ..Default::default() };
            let m = SwitchModel::parametric(8, 8, p).unwrap();
            let curve = sweep_wavelength(&m, Path::new(a, 9), Path::new(v, 16), &grid(1260.0, 1560.0, 61)).unwrap();
            prop_assert!(curve.windows(2).all(|w| w[1].1 >= w[0].1));
        }
    }
}
