//! Optical power, photon-rate, loss and time-of-flight conversions.
//!
//! Everything here is a pure function over small value types. Power is kept
//! in dBm, loss in dB, time in picoseconds and distance in meters.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;
/// Planck constant, J·s.
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;
/// Group index of standard single-mode fiber near 1550 nm.
pub const DEFAULT_GROUP_INDEX: f64 = 1.468;
/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

/// Lower edge of the validated operating window, nm.
pub const MIN_WAVELENGTH_NM: f64 = 1000.0;
/// Upper edge of the validated operating window, nm.
pub const MAX_WAVELENGTH_NM: f64 = 2000.0;

/// Physical constants used by the propagation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsConstants {
    pub c_m_per_s: f64,
    pub h_joule_s: f64,
    pub group_index: f64,
}

impl PhysicsConstants {
    pub const STANDARD: PhysicsConstants = PhysicsConstants {
        c_m_per_s: SPEED_OF_LIGHT_M_PER_S,
        h_joule_s: PLANCK_J_S,
        group_index: DEFAULT_GROUP_INDEX,
    };
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Optical power stored in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct OpticalPower {
    value_dbm: f64,
}

impl OpticalPower {
    pub fn from_dbm(dbm: f64) -> Result<Self> {
        if !dbm.is_finite() {
            return Err(Error::domain(format!("power {dbm} dBm is not finite")));
        }
        Ok(Self { value_dbm: dbm })
    }

    pub fn from_watts(watts: f64) -> Result<Self> {
        if !(watts.is_finite() && watts > 0.0) {
            return Err(Error::domain(format!("power {watts} W must be finite and positive")));
        }
        Ok(Self {
            value_dbm: watts_to_dbm(watts),
        })
    }

    pub fn dbm(self) -> f64 {
        self.value_dbm
    }

    pub fn watts(self) -> f64 {
        dbm_to_watts(self.value_dbm)
    }

    /// Power after passing through `loss`.
    pub fn attenuate(self, loss: LossDb) -> Self {
        Self {
            value_dbm: self.value_dbm - loss.db(),
        }
    }
}

/// A vacuum wavelength inside the validated 1000–2000 nm window.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Wavelength(f64);

impl Wavelength {
    pub fn from_nm(nm: f64) -> Result<Self> {
        if !(nm.is_finite() && (MIN_WAVELENGTH_NM..=MAX_WAVELENGTH_NM).contains(&nm)) {
            return Err(Error::domain(format!(
                "wavelength {nm} nm outside validated range [{MIN_WAVELENGTH_NM}, {MAX_WAVELENGTH_NM}] nm"
            )));
        }
        Ok(Self(nm))
    }

    pub fn nm(self) -> f64 {
        self.0
    }

    pub fn meters(self) -> f64 {
        self.0 * 1e-9
    }
}

impl<'de> Deserialize<'de> for Wavelength {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let nm = f64::deserialize(de)?;
        Wavelength::from_nm(nm).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Wavelength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} nm", self.0)
    }
}

/// A level in dB.
///
/// Attenuations are non-negative. Coupling ("crosstalk level") values use the
/// same type and are stored as negative numbers. Composition is addition.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossDb(pub f64);

impl LossDb {
    pub const ZERO: LossDb = LossDb(0.0);

    pub fn db(self) -> f64 {
        self.0
    }

    /// Linear power transmission factor `10^(-db/10)`.
    pub fn transmission(self) -> f64 {
        10f64.powf(-self.0 / 10.0)
    }
}

impl Add for LossDb {
    type Output = LossDb;
    fn add(self, rhs: LossDb) -> LossDb {
        LossDb(self.0 + rhs.0)
    }
}

impl AddAssign for LossDb {
    fn add_assign(&mut self, rhs: LossDb) {
        self.0 += rhs.0;
    }
}

impl Sum for LossDb {
    fn sum<I: Iterator<Item = LossDb>>(iter: I) -> LossDb {
        iter.fold(LossDb::ZERO, Add::add)
    }
}

/// How a measured delay maps to distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// Out on one fiber and back on a co-located one: the delay covers the
    /// distance twice.
    RoundTrip,
    OneWay,
}

impl Propagation {
    fn legs(self) -> f64 {
        match self {
            Propagation::RoundTrip => 2.0,
            Propagation::OneWay => 1.0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Energy of one photon, joules.
pub fn photon_energy_j(lambda: Wavelength) -> f64 {
    PLANCK_J_S * SPEED_OF_LIGHT_M_PER_S / lambda.meters()
}

/// Photons per second carried by `watts` of optical power at `lambda`.
pub fn photon_rate(watts: f64, lambda: Wavelength) -> Result<f64> {
    if !(watts.is_finite() && watts >= 0.0) {
        return Err(Error::domain(format!("power {watts} W must be >= 0")));
    }
    Ok(watts * lambda.meters() / (PLANCK_J_S * SPEED_OF_LIGHT_M_PER_S))
}

/// Isolation needed between a source of `power_dbm` and a channel that must
/// see at most `max_rate` photons per second. Detector efficiency is not
/// included: this is the source-side ratio.
pub fn required_isolation_db(power_dbm: f64, max_rate: f64, lambda: Wavelength) -> Result<LossDb> {
    if !(max_rate.is_finite() && max_rate > 0.0) {
        return Err(Error::domain(format!(
            "maximum photon rate {max_rate} must be positive"
        )));
    }
    let source_rate = photon_rate(dbm_to_watts(power_dbm), lambda)?;
    Ok(LossDb(10.0 * (source_rate / max_rate).log10()))
}

/// Span attenuation for `length_m` meters of fiber at `db_per_km`.
pub fn fiber_loss_db(length_m: f64, db_per_km: f64) -> LossDb {
    LossDb(db_per_km * length_m / 1000.0)
}

/// Convert a delay in picoseconds to a distance along the fiber.
pub fn time_to_distance(delay_ps: f64, group_index: f64, propagation: Propagation) -> Result<f64> {
    if !(delay_ps.is_finite() && delay_ps >= 0.0) {
        return Err(Error::domain(format!("delay {delay_ps} ps must be >= 0")));
    }
    check_group_index(group_index)?;
    Ok(SPEED_OF_LIGHT_M_PER_S * (delay_ps / PS_PER_S) / (propagation.legs() * group_index))
}

/// Inverse of [`time_to_distance`]: delay in picoseconds for `distance_m`.
pub fn distance_to_time_ps(distance_m: f64, group_index: f64, propagation: Propagation) -> Result<f64> {
    if !(distance_m.is_finite() && distance_m >= 0.0) {
        return Err(Error::domain(format!("distance {distance_m} m must be >= 0")));
    }
    check_group_index(group_index)?;
    Ok(propagation.legs() * distance_m * group_index / SPEED_OF_LIGHT_M_PER_S * PS_PER_S)
}

pub(crate) fn check_group_index(group_index: f64) -> Result<()> {
    if !(group_index.is_finite() && group_index > 1.0) {
        return Err(Error::domain(format!("group index {group_index} must be > 1")));
    }
    Ok(())
}
