use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::Wavelength;

/// One cross-connection through the switch. Inputs are numbered `1..=n_in`,
/// outputs continue at `n_in + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path {
    pub input: u32,
    pub output: u32,
}

impl Path {
    pub const fn new(input: u32, output: u32) -> Self {
        Self { input, output }
    }

    pub fn shares_port(&self, other: &Path) -> bool {
        self.input == other.input || self.output == other.output
    }
}

impl std::fmt::Display for Path {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}", self.input, self.output)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParametricCrosstalk {
    pub c0_db: f64,
    pub beta_in_db_per_port: f64,
    pub beta_out_db_per_port: f64,
    pub reference_nm: f64,
    pub slope_db_per_nm: f64,
    pub floor_db: f64,
}

impl Default for ParametricCrosstalk {
    fn default() -> Self {
        Self {
            c0_db: -50.0,
            beta_in_db_per_port: 5.0,
            beta_out_db_per_port: 5.0,
            reference_nm: 1310.0,
            slope_db_per_nm: 10.0 / 300.0,
            floor_db: -120.0,
        }
    }
}

impl ParametricCrosstalk {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.floor_db.is_finite() && p.c0_db.is_finite() && p.floor_db <= p.c0_db && p.c0_db <= 0.0) {
            return Err(Error::domain(format!(
                "need floor <= c0 <= 0 dB, got floor {} and c0 {}",
                p.floor_db, p.c0_db
            )));
        }
        for (name, beta) in [("beta_in", p.beta_in_db_per_port), ("beta_out", p.beta_out_db_per_port)] {
            if !(beta.is_finite() && beta >= 0.0) {
                return Err(Error::domain(format!("{name} must be >= 0, got {beta}")));
            }
        }
        if !p.slope_db_per_nm.is_finite() {
            return Err(Error::domain("slope must be finite"));
        }
        Wavelength::from_nm(p.reference_nm)?;
        Ok(())
    }

    fn at(&self, aggressor: Path, victim: Path, wavelength_nm: f64) -> f64 {
        let gap_in = aggressor.input.abs_diff(victim.input) as f64 - 1.0;
        let gap_out = aggressor.output.abs_diff(victim.output) as f64 - 1.0;
        let db = self.c0_db - self.beta_in_db_per_port * gap_in - self.beta_out_db_per_port * gap_out
            + self.slope_db_per_nm * (wavelength_nm - self.reference_nm);
        db.clamp(self.floor_db, 0.0)
    }
}

/// Measured crosstalk keyed by (aggressor, victim), each entry sorted by
/// wavelength.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasuredTable {
    entries: BTreeMap<(Path, Path), Vec<(f64, f64)>>,
}

impl MeasuredTable {
    pub fn insert(&mut self, aggressor: Path, victim: Path, wavelength_nm: f64, xtalk_db: f64) -> Result<()> {
        if !(wavelength_nm.is_finite() && xtalk_db.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite table entry for {aggressor} / {victim}"
            )));
        }
        let row = self.entries.entry((aggressor, victim)).or_default();
        match row.binary_search_by(|(l, _)| l.total_cmp(&wavelength_nm)) {
            Ok(_) => Err(Error::Data(format!(
                "duplicate table entry for {aggressor} / {victim} at {wavelength_nm} nm"
            ))),
            Err(at) => {
                row.insert(at, (wavelength_nm, xtalk_db));
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Value at the tabulated wavelength closest to `wavelength_nm`; the
    /// shorter one wins a tie.
    pub fn lookup(&self, aggressor: Path, victim: Path, wavelength_nm: f64) -> Result<f64> {
        let row = self.entries.get(&(aggressor, victim)).ok_or_else(|| {
            Error::Data(format!(
                "no measured crosstalk for aggressor {aggressor}, victim {victim}"
            ))
        })?;
        let best = row
            .iter()
            .min_by(|a, b| (a.0 - wavelength_nm).abs().total_cmp(&(b.0 - wavelength_nm).abs()))
            .expect("rows are never empty");
        Ok(best.1)
    }

    /// Read `a_in,a_out,v_in,v_out,lambda_nm,xtalk_db` rows.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            a_in: u32,
            a_out: u32,
            v_in: u32,
            v_out: u32,
            lambda_nm: f64,
            xtalk_db: f64,
        }
        let mut table = Self::default();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                path: format!("line {}", i + 2),
                message: e.to_string(),
            })?;
            table.insert(
                Path::new(row.a_in, row.a_out),
                Path::new(row.v_in, row.v_out),
                row.lambda_nm,
                row.xtalk_db,
            )?;
        }
        Ok(table)
    }

    fn paths(&self) -> impl Iterator<Item = Path> + '_ {
        self.entries.keys().flat_map(|(a, v)| [*a, *v])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CrosstalkMode {
    Parametric(ParametricCrosstalk),
    Measured(MeasuredTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchModel {
    pub n_in: u32,
    pub n_out: u32,
    pub mode: CrosstalkMode,
}

impl Default for SwitchModel {
    fn default() -> Self {
        Self::parametric(8, 8, ParametricCrosstalk::default()).expect("defaults are valid")
    }
}

impl SwitchModel {
    pub fn parametric(n_in: u32, n_out: u32, p: ParametricCrosstalk) -> Result<Self> {
        p.validate()?;
        Self::check_size(n_in, n_out)?;
        Ok(Self {
            n_in,
            n_out,
            mode: CrosstalkMode::Parametric(p),
        })
    }

    pub fn measured(n_in: u32, n_out: u32, table: MeasuredTable) -> Result<Self> {
        Self::check_size(n_in, n_out)?;
        let model = Self {
            n_in,
            n_out,
            mode: CrosstalkMode::Measured(table),
        };
        if let CrosstalkMode::Measured(t) = &model.mode {
            for p in t.paths() {
                model
                    .check_path(p)
                    .map_err(|e| Error::Data(format!("measured table: {e}")))?;
            }
        }
        Ok(model)
    }

    fn check_size(n_in: u32, n_out: u32) -> Result<()> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::domain("switch needs at least one input and one output"));
        }
        Ok(())
    }

    pub fn inputs(&self) -> std::ops::RangeInclusive<u32> {
        1..=self.n_in
    }

    pub fn outputs(&self) -> std::ops::RangeInclusive<u32> {
        self.n_in + 1..=self.n_in + self.n_out
    }

    pub fn check_path(&self, p: Path) -> Result<()> {
        if !self.inputs().contains(&p.input) {
            return Err(Error::Config(format!("input {} is not in 1..={}", p.input, self.n_in)));
        }
        if !self.outputs().contains(&p.output) {
            return Err(Error::Config(format!(
                "output {} is not in {}..={}",
                p.output,
                self.n_in + 1,
                self.n_in + self.n_out
            )));
        }
        Ok(())
    }

    /// Crosstalk from the aggressor path into the victim path at the
    /// aggressor's wavelength, dB.
    pub fn xtalk_db(&self, aggressor: Path, victim: Path, wavelength_nm: f64) -> Result<f64> {
        self.check_path(aggressor).map_err(|e| Error::domain(e.to_string()))?;
        self.check_path(victim).map_err(|e| Error::domain(e.to_string()))?;
        if aggressor.shares_port(&victim) {
            return Err(Error::domain(format!(
                "aggressor {aggressor} and victim {victim} share a port"
            )));
        }
        match &self.mode {
            CrosstalkMode::Parametric(p) => Ok(p.at(aggressor, victim, wavelength_nm)),
            CrosstalkMode::Measured(t) => t.lookup(aggressor, victim, wavelength_nm),
        }
    }
}

/// Free-function form of [`SwitchModel::xtalk_db`].
pub fn switch_xtalk_db(m: &SwitchModel, aggressor: Path, victim: Path, wavelength_nm: f64) -> Result<f64> {
    m.xtalk_db(aggressor, victim, wavelength_nm)
}

/// A set of simultaneous cross-connections; no port is used twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SwitchConfig {
    paths: Vec<Path>,
}

impl SwitchConfig {
    pub fn new(model: &SwitchModel, mut paths: Vec<Path>) -> Result<Self> {
        for p in &paths {
            model.check_path(*p)?;
        }
        paths.sort();
        for (i, a) in paths.iter().enumerate() {
            for b in &paths[i + 1..] {
                if a.input == b.input {
                    return Err(Error::Config(format!("input {} is connected twice", a.input)));
                }
                if a.output == b.output {
                    return Err(Error::Config(format!("output {} is connected twice", a.output)));
                }
            }
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }
}
