//! Fiber plant model: spans, MPO connectors, an optional switch, and the
//! crosstalk points they imply between the probed (aggressor) fiber and the
//! monitored (victim) fiber.
//!
//! Positions are meters from the probe-injection end of the bundle. The
//! aggressor and victim are co-located, so a connector position is the same
//! on every fiber it hosts.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::{self, LossDb, Propagation, Wavelength, DEFAULT_GROUP_INDEX, PS_PER_S, SPEED_OF_LIGHT_M_PER_S};
use crate::schema::parse_json;
pub use crate::schema::SchemaMode;

pub const SUPPORTED_LANE_COUNTS: [u32; 4] = [8, 12, 24, 48];
pub const DEFAULT_LANE_PITCH_MM: f64 = 0.25;
pub const DEFAULT_ADJACENT_COUPLING_DB: f64 = -100.0;
/// Synthetic extra isolation per additional lane of separation.
pub const DEFAULT_ROLLOFF_DB_PER_LANE: f64 = 15.0;
pub const DEFAULT_INSERTION_LOSS_DB: f64 = 0.3;
pub const DEFAULT_COUPLING_REFERENCE_NM: f64 = 1550.0;
pub const COUPLING_FLOOR_DB: f64 = -160.0;

/// Default attenuation table: O-band 0.35 dB/km, C-band 0.2 dB/km.
pub fn default_attenuation() -> Vec<AttenuationPoint> {
    vec![
        AttenuationPoint {
            nm: 1310.0,
            db_per_km: 0.35,
        },
        AttenuationPoint {
            nm: 1550.0,
            db_per_km: 0.2,
        },
    ]
}

// ---------------------------------------------------------------------------
// Document schema

/// JSON form of a topology, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    pub spans: Vec<SpanDoc>,
    #[serde(default)]
    pub connectors: Vec<ConnectorDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<SwitchElementDoc>,
    pub probe: FiberEndDoc,
    pub victim: FiberEndDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanDoc {
    pub id: String,
    pub length_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_index: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation: Option<Vec<AttenuationPoint>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationPoint {
    pub nm: f64,
    pub db_per_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorDoc {
    pub id: String,
    pub position_m: f64,
    pub lane_count: u32,
    /// Fiber id → 1-based lane number.
    pub lanes: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_pitch_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_coupling_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rolloff_db_per_lane: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_slope_db_per_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insertion_loss_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchElementDoc {
    pub id: String,
    pub position_m: f64,
    pub coupling_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_slope_db_per_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_nm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberEndDoc {
    pub fiber: String,
    #[serde(default)]
    pub end: FiberEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberEnd {
    #[default]
    Near,
    Far,
}

// ---------------------------------------------------------------------------
// Validated model

#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpan {
    pub id: String,
    pub length_m: f64,
    pub group_index: f64,
    attenuation: Vec<AttenuationPoint>,
}

impl FiberSpan {
    /// Attenuation at `lambda`, linearly interpolated in the table and held
    /// constant beyond its ends.
    pub fn attenuation_db_per_km(&self, lambda: Wavelength) -> f64 {
        let x = lambda.nm();
        let table = &self.attenuation;
        let first = table[0];
        let last = table[table.len() - 1];
        if x <= first.nm {
            return first.db_per_km;
        }
        if x >= last.nm {
            return last.db_per_km;
        }
        let i = table.partition_point(|p| p.nm <= x);
        let (a, b) = (table[i - 1], table[i]);
        let t = (x - a.nm) / (b.nm - a.nm);
        a.db_per_km + t * (b.db_per_km - a.db_per_km)
    }

    pub fn attenuation_table(&self) -> &[AttenuationPoint] {
        &self.attenuation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpoConnector {
    pub id: String,
    pub position_m: f64,
    pub lane_count: u32,
    pub lane_pitch_mm: f64,
    pub base_coupling_db: f64,
    pub rolloff_db_per_lane: f64,
    pub wavelength_slope_db_per_nm: f64,
    pub reference_nm: f64,
    pub insertion_loss_db: f64,
    pub lanes: BTreeMap<String, u32>,
}

impl MpoConnector {
    /// A connector with the default coupling parameters and no fibers.
    pub fn with_defaults(id: impl Into<String>, position_m: f64, lane_count: u32) -> Self {
        Self {
            id: id.into(),
            position_m,
            lane_count,
            lane_pitch_mm: DEFAULT_LANE_PITCH_MM,
            base_coupling_db: DEFAULT_ADJACENT_COUPLING_DB,
            rolloff_db_per_lane: DEFAULT_ROLLOFF_DB_PER_LANE,
            wavelength_slope_db_per_nm: 0.0,
            reference_nm: DEFAULT_COUPLING_REFERENCE_NM,
            insertion_loss_db: DEFAULT_INSERTION_LOSS_DB,
            lanes: BTreeMap::new(),
        }
    }

    pub fn lane_of(&self, fiber: &str) -> Option<u32> {
        self.lanes.get(fiber).copied()
    }
}

/// Coupling between two lanes of an MPO connector.
///
/// `base − rolloff·(|i−j|−1) + slope·(λ−λ_ref)`, clamped to
/// [[`COUPLING_FLOOR_DB`], 0].
pub fn mpo_coupling_db(c: &MpoConnector, lane_i: u32, lane_j: u32, lambda: Wavelength) -> Result<LossDb> {
    for lane in [lane_i, lane_j] {
        if lane == 0 || lane > c.lane_count {
            return Err(Error::domain(format!(
                "lane {lane} out of range 1..={} on connector `{}`",
                c.lane_count, c.id
            )));
        }
    }
    if lane_i == lane_j {
        return Err(Error::domain(format!(
            "lane {lane_i} coupled to itself on connector `{}` is not crosstalk",
            c.id
        )));
    }
    let separation = f64::from(lane_i.abs_diff(lane_j));
    let at_ref = c.base_coupling_db - c.rolloff_db_per_lane * (separation - 1.0);
    Ok(LinearCoupling {
        at_ref_db: at_ref,
        reference_nm: c.reference_nm,
        slope_db_per_nm: c.wavelength_slope_db_per_nm,
    }
    .at(lambda))
}

/// Coupling that is linear in dB versus wavelength, clamped to the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoupling {
    pub at_ref_db: f64,
    pub reference_nm: f64,
    pub slope_db_per_nm: f64,
}

impl LinearCoupling {
    pub fn at(&self, lambda: Wavelength) -> LossDb {
        let db = self.at_ref_db + self.slope_db_per_nm * (lambda.nm() - self.reference_nm);
        LossDb(db.clamp(COUPLING_FLOOR_DB, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchElement {
    pub id: String,
    pub position_m: f64,
    pub coupling: LinearCoupling,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceElement {
    Connector { id: String },
    Switch { id: String },
    Raw,
}

impl SourceElement {
    pub fn id(&self) -> Option<&str> {
        match self {
            SourceElement::Connector { id } | SourceElement::Switch { id } => Some(id),
            SourceElement::Raw => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkPoint {
    pub position_m: f64,
    pub coupling: LinearCoupling,
    pub source: SourceElement,
}

impl CrosstalkPoint {
    pub fn coupling_db(&self, lambda: Wavelength) -> LossDb {
        self.coupling.at(lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    spans: Vec<FiberSpan>,
    connectors: Vec<MpoConnector>,
    switch: Option<SwitchElement>,
    aggressor: usize,
    victim: usize,
    detector_end: FiberEnd,
}

impl Topology {
    /// Parse and validate a JSON topology document.
    pub fn load(document: &str, mode: SchemaMode) -> Result<Self> {
        let doc: TopologyDoc = parse_json(document, mode)?;
        Self::from_doc(doc)
    }

    pub fn from_doc(doc: TopologyDoc) -> Result<Self> {
        validate(doc)
    }

    pub fn spans(&self) -> &[FiberSpan] {
        &self.spans
    }

    /// Connectors sorted by position.
    pub fn connectors(&self) -> &[MpoConnector] {
        &self.connectors
    }

    pub fn switch(&self) -> Option<&SwitchElement> {
        self.switch.as_ref()
    }

    pub fn aggressor(&self) -> &FiberSpan {
        &self.spans[self.aggressor]
    }

    pub fn victim(&self) -> &FiberSpan {
        &self.spans[self.victim]
    }

    pub fn detector_end(&self) -> FiberEnd {
        self.detector_end
    }

    pub fn span(&self, fiber_id: &str) -> Result<&FiberSpan> {
        self.spans
            .iter()
            .find(|s| s.id == fiber_id)
            .ok_or_else(|| Error::domain(format!("unknown fiber `{fiber_id}`")))
    }

    /// Mean of the aggressor and victim group indices: the index a
    /// round-trip delay sees.
    pub fn effective_group_index(&self) -> f64 {
        0.5 * (self.aggressor().group_index + self.victim().group_index)
    }

    /// One crosstalk point per element shared by the aggressor and victim
    /// fibers, sorted by position.
    pub fn crosstalk_points(&self) -> Vec<CrosstalkPoint> {
        let agg = &self.aggressor().id;
        let vic = &self.victim().id;
        let mut points: Vec<CrosstalkPoint> = self
            .connectors
            .iter()
            .filter_map(|c| {
                let (i, j) = (c.lane_of(agg)?, c.lane_of(vic)?);
                let separation = f64::from(i.abs_diff(j));
                Some(CrosstalkPoint {
                    position_m: c.position_m,
                    coupling: LinearCoupling {
                        at_ref_db: c.base_coupling_db - c.rolloff_db_per_lane * (separation - 1.0),
                        reference_nm: c.reference_nm,
                        slope_db_per_nm: c.wavelength_slope_db_per_nm,
                    },
                    source: SourceElement::Connector { id: c.id.clone() },
                })
            })
            .collect();
        if let Some(sw) = &self.switch {
            points.push(CrosstalkPoint {
                position_m: sw.position_m,
                coupling: sw.coupling,
                source: SourceElement::Switch { id: sw.id.clone() },
            });
        }
        points.sort_by(|a, b| a.position_m.total_cmp(&b.position_m));
        points
    }

    /// Loss along `fiber_id` between `from_m` and `to_m`: span attenuation
    /// plus insertion loss of every hosted connector in `[from_m, to_m)`.
    ///
    /// A connector sitting exactly on a boundary belongs to the later
    /// interval, which keeps the loss additive over concatenation.
    pub fn path_loss_db(&self, fiber_id: &str, from_m: f64, to_m: f64, lambda: Wavelength) -> Result<LossDb> {
        let span = self.span(fiber_id)?;
        if !(from_m.is_finite() && to_m.is_finite() && 0.0 <= from_m && from_m <= to_m && to_m <= span.length_m) {
            return Err(Error::domain(format!(
                "interval [{from_m}, {to_m}] m outside fiber `{fiber_id}` of length {} m",
                span.length_m
            )));
        }
        let attenuation = photonics::fiber_loss_db(to_m - from_m, span.attenuation_db_per_km(lambda));
        let connectors: LossDb = self
            .connectors
            .iter()
            .filter(|c| c.lanes.contains_key(fiber_id))
            .filter(|c| from_m <= c.position_m && c.position_m < to_m)
            .map(|c| LossDb(c.insertion_loss_db))
            .sum();
        Ok(attenuation + connectors)
    }

    /// Total path loss for light coupled at `position_m`: out on the
    /// aggressor from the injection end, then back along the victim to the
    /// detector.
    pub fn point_path_loss_db(&self, position_m: f64, lambda: Wavelength) -> Result<LossDb> {
        let out = self.path_loss_db(&self.aggressor().id, 0.0, position_m, lambda)?;
        let victim = self.victim();
        let back = match self.detector_end {
            FiberEnd::Near => self.path_loss_db(&victim.id, 0.0, position_m, lambda)?,
            FiberEnd::Far => self.path_loss_db(&victim.id, position_m, victim.length_m, lambda)?,
        };
        Ok(out + back)
    }

    /// Arrival delay after the probe pulse for light coupled at `position_m`.
    pub fn point_delay_ps(&self, position_m: f64) -> f64 {
        let agg = self.aggressor();
        let vic = self.victim();
        let back_m = match self.detector_end {
            FiberEnd::Near => position_m,
            FiberEnd::Far => vic.length_m - position_m,
        };
        (position_m * agg.group_index + back_m * vic.group_index) / SPEED_OF_LIGHT_M_PER_S * PS_PER_S
    }

    /// Delay-to-distance conversion if the geometry permits it.
    pub fn localization_propagation(&self) -> Result<Propagation> {
        match self.detector_end {
            FiberEnd::Near => Ok(Propagation::RoundTrip),
            FiberEnd::Far => Err(Error::Input(
                "localization impossible: delay is position-independent with a far-end detector".into(),
            )),
        }
    }
}

fn check_finite(element: &str, field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(element, format!("{field} must be finite")))
    }
}

fn validate(doc: TopologyDoc) -> Result<Topology> {
    if doc.spans.is_empty() {
        return Err(Error::validation("spans", "at least one span is required"));
    }
    let mut spans = Vec::with_capacity(doc.spans.len());
    let mut ids = HashSet::new();
    for (i, s) in doc.spans.into_iter().enumerate() {
        let element = format!("spans[{i}] `{}`", s.id);
        if !ids.insert(s.id.clone()) {
            return Err(Error::validation(element, "duplicate span id"));
        }
        check_finite(&element, "length_m", s.length_m)?;
        if s.length_m <= 0.0 {
            return Err(Error::validation(element, "length_m must be > 0"));
        }
        let group_index = s.group_index.unwrap_or(DEFAULT_GROUP_INDEX);
        if photonics::check_group_index(group_index).is_err() {
            return Err(Error::validation(element, "group_index must be > 1"));
        }
        let attenuation = s.attenuation.unwrap_or_else(default_attenuation);
        if attenuation.is_empty() {
            return Err(Error::validation(element, "attenuation table is empty"));
        }
        for (k, p) in attenuation.iter().enumerate() {
            if Wavelength::from_nm(p.nm).is_err() {
                return Err(Error::validation(
                    &element,
                    format!("attenuation[{k}] wavelength {} nm outside validated range", p.nm),
                ));
            }
            if !(p.db_per_km.is_finite() && p.db_per_km >= 0.0) {
                return Err(Error::validation(
                    &element,
                    format!("attenuation[{k}] must be >= 0 dB/km"),
                ));
            }
            if k > 0 && p.nm <= attenuation[k - 1].nm {
                return Err(Error::validation(
                    &element,
                    "attenuation wavelengths must be strictly increasing",
                ));
            }
        }
        spans.push(FiberSpan {
            id: s.id,
            length_m: s.length_m,
            group_index,
            attenuation,
        });
    }

    let find = |fiber: &str, element: &str| -> Result<usize> {
        spans
            .iter()
            .position(|s| s.id == fiber)
            .ok_or_else(|| Error::validation(element, format!("unknown fiber `{fiber}`")))
    };
    let aggressor = find(&doc.probe.fiber, "probe")?;
    let victim = find(&doc.victim.fiber, "victim")?;
    if aggressor == victim {
        return Err(Error::validation(
            "victim",
            "victim fiber must differ from the probed fiber",
        ));
    }
    if doc.probe.end != FiberEnd::Near {
        return Err(Error::validation(
            "probe",
            "the probe must be injected at the near end (positions are referenced to it)",
        ));
    }

    let mut connectors = Vec::with_capacity(doc.connectors.len());
    let mut connector_ids = HashSet::new();
    for (i, c) in doc.connectors.into_iter().enumerate() {
        let element = format!("connectors[{i}] `{}`", c.id);
        if !connector_ids.insert(c.id.clone()) {
            return Err(Error::validation(element, "duplicate connector id"));
        }
        if !SUPPORTED_LANE_COUNTS.contains(&c.lane_count) {
            return Err(Error::validation(
                element,
                format!("lane_count {} not one of {:?}", c.lane_count, SUPPORTED_LANE_COUNTS),
            ));
        }
        let mut connector = MpoConnector::with_defaults(c.id, c.position_m, c.lane_count);
        if let Some(v) = c.lane_pitch_mm {
            connector.lane_pitch_mm = v;
        }
        if let Some(v) = c.base_coupling_db {
            connector.base_coupling_db = v;
        }
        if let Some(v) = c.rolloff_db_per_lane {
            connector.rolloff_db_per_lane = v;
        }
        if let Some(v) = c.wavelength_slope_db_per_nm {
            connector.wavelength_slope_db_per_nm = v;
        }
        if let Some(v) = c.reference_nm {
            connector.reference_nm = v;
        }
        if let Some(v) = c.insertion_loss_db {
            connector.insertion_loss_db = v;
        }
        for (field, v) in [
            ("position_m", connector.position_m),
            ("lane_pitch_mm", connector.lane_pitch_mm),
            ("base_coupling_db", connector.base_coupling_db),
            ("rolloff_db_per_lane", connector.rolloff_db_per_lane),
            ("wavelength_slope_db_per_nm", connector.wavelength_slope_db_per_nm),
            ("reference_nm", connector.reference_nm),
            ("insertion_loss_db", connector.insertion_loss_db),
        ] {
            check_finite(&element, field, v)?;
        }
        if connector.position_m < 0.0 {
            return Err(Error::validation(element, "position_m must be >= 0"));
        }
        if connector.lane_pitch_mm <= 0.0 {
            return Err(Error::validation(element, "lane_pitch_mm must be > 0"));
        }
        if connector.base_coupling_db > 0.0 {
            return Err(Error::validation(element, "base_coupling_db must be <= 0"));
        }
        if connector.rolloff_db_per_lane < 0.0 {
            return Err(Error::validation(
                element,
                "rolloff_db_per_lane must be >= 0 (coupling weakens with separation)",
            ));
        }
        if connector.insertion_loss_db < 0.0 {
            return Err(Error::validation(element, "insertion_loss_db must be >= 0"));
        }
        let mut used = HashSet::new();
        for (fiber, &lane) in &c.lanes {
            let span = &spans[find(fiber, &element)?];
            if lane == 0 || lane > c.lane_count {
                return Err(Error::validation(
                    &element,
                    format!("lane {lane} for fiber `{fiber}` outside 1..={}", c.lane_count),
                ));
            }
            if !used.insert(lane) {
                return Err(Error::validation(&element, format!("lane {lane} assigned twice")));
            }
            if connector.position_m > span.length_m {
                return Err(Error::validation(
                    &element,
                    format!(
                        "position {} m beyond the end of fiber `{fiber}` ({} m)",
                        connector.position_m, span.length_m
                    ),
                ));
            }
        }
        connector.lanes = c.lanes;
        connectors.push(connector);
    }
    connectors.sort_by(|a, b| a.position_m.total_cmp(&b.position_m));
    for pair in connectors.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let shares_fiber = a.lanes.keys().any(|f| b.lanes.contains_key(f));
        if shares_fiber && a.position_m == b.position_m {
            return Err(Error::validation(
                format!("connector `{}`", b.id),
                format!(
                    "position {} m equals that of connector `{}` on a shared fiber; positions must be strictly increasing",
                    b.position_m, a.id
                ),
            ));
        }
    }

    let switch = match doc.switch {
        None => None,
        Some(sw) => {
            let element = format!("switch `{}`", sw.id);
            check_finite(&element, "position_m", sw.position_m)?;
            check_finite(&element, "coupling_db", sw.coupling_db)?;
            let reach = spans[aggressor].length_m.min(spans[victim].length_m);
            if sw.position_m < 0.0 || sw.position_m > reach {
                return Err(Error::validation(
                    element,
                    format!("position {} m outside the fibers", sw.position_m),
                ));
            }
            if sw.coupling_db > 0.0 {
                return Err(Error::validation(element, "coupling_db must be <= 0"));
            }
            Some(SwitchElement {
                id: sw.id,
                position_m: sw.position_m,
                coupling: LinearCoupling {
                    at_ref_db: sw.coupling_db,
                    reference_nm: sw.reference_nm.unwrap_or(DEFAULT_COUPLING_REFERENCE_NM),
                    slope_db_per_nm: sw.wavelength_slope_db_per_nm.unwrap_or(0.0),
                },
            })
        }
    };

    Ok(Topology {
        spans,
        connectors,
        switch,
        aggressor,
        victim,
        detector_end: doc.victim.end,
    })
}

/// Two co-located fibers `A` (probed) and `B` (monitored) of `length_m`,
/// with one adjacent-lane connector per entry of `points` (position, coupling dB).
pub fn bundle_doc(length_m: f64, db_per_km: f64, points: &[(f64, f64)]) -> TopologyDoc {
    let attenuation = Some(vec![AttenuationPoint { nm: 1550.0, db_per_km }]);
    let span = |id: &str| SpanDoc {
        id: id.into(),
        length_m,
        group_index: None,
        attenuation: attenuation.clone(),
    };
    let connectors = points
        .iter()
        .enumerate()
        .map(|(i, &(position_m, coupling))| ConnectorDoc {
            id: format!("MPO-{}", i + 1),
            position_m,
            lane_count: 12,
            lanes: BTreeMap::from([("A".to_string(), 1), ("B".to_string(), 2)]),
            lane_pitch_mm: None,
            base_coupling_db: Some(coupling),
            rolloff_db_per_lane: None,
            wavelength_slope_db_per_nm: None,
            reference_nm: None,
            insertion_loss_db: None,
        })
        .collect();
    TopologyDoc {
        schema_version: Some(1),
        spans: vec![span("A"), span("B")],
        connectors,
        switch: None,
        probe: FiberEndDoc {
            fiber: "A".into(),
            end: FiberEnd::Near,
        },
        victim: FiberEndDoc {
            fiber: "B".into(),
            end: FiberEnd::Near,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nm(v: f64) -> Wavelength {
        Wavelength::from_nm(v).unwrap()
    }

    const MINIMAL: &str = r#"{
        "spans": [{"id": "A", "length_m": 1000}, {"id": "B", "length_m": 1000}],
        "probe": {"fiber": "A", "end": "near"},
        "victim": {"fiber": "B"}
    }"#;

    fn one_connector(position: f64) -> String {
        format!(
            r#"{{
            "spans": [{{"id": "A", "length_m": 3000}}, {{"id": "B", "length_m": 3000}}],
            "connectors": [{{"id": "P1", "position_m": {position}, "lane_count": 12,
                             "lanes": {{"A": 3, "B": 4}}, "base_coupling_db": -100}}],
            "probe": {{"fiber": "A", "end": "near"}},
            "victim": {{"fiber": "B", "end": "near"}}
        }}"#
        )
    }

    #[test]
    fn minimal_document_has_no_points() {
        let t = Topology::load(MINIMAL, SchemaMode::Strict).unwrap();
        assert!(t.crosstalk_points().is_empty());
        assert_eq!(t.detector_end(), FiberEnd::Near);
        assert_eq!(t.aggressor().group_index, DEFAULT_GROUP_INDEX);
    }

    #[test]
    fn connector_yields_point() {
        let t = Topology::load(&one_connector(1021.0), SchemaMode::Strict).unwrap();
        let pts = t.crosstalk_points();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].position_m, 1021.0);
        assert_eq!(pts[0].coupling_db(nm(1550.0)).db(), -100.0);
        assert_eq!(pts[0].source, SourceElement::Connector { id: "P1".into() });
    }

    #[test]
    fn connector_beyond_span_is_rejected() {
        let err = Topology::load(&one_connector(3000.5), SchemaMode::Strict).unwrap_err();
        match err {
            Error::Validation { element, .. } => assert!(element.contains("P1"), "{element}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn three_connectors_three_points_in_order() {
        let doc = bundle_doc(3000.0, 0.2, &[(2300.0, -100.0), (150.0, -100.0), (800.0, -100.0)]);
        let t = Topology::from_doc(doc).unwrap();
        let pos: Vec<f64> = t.crosstalk_points().iter().map(|p| p.position_m).collect();
        assert_eq!(pos, vec![150.0, 800.0, 2300.0]);
    }

    #[test]
    fn separate_trunks_share_no_point() {
        let doc = r#"{
            "spans": [{"id": "A", "length_m": 1000}, {"id": "B", "length_m": 1000},
                      {"id": "C", "length_m": 1000}, {"id": "D", "length_m": 1000}],
            "connectors": [
                {"id": "T1", "position_m": 100, "lane_count": 8, "lanes": {"A": 1, "C": 2}},
                {"id": "T2", "position_m": 100, "lane_count": 8, "lanes": {"B": 1, "D": 2}}
            ],
            "probe": {"fiber": "A"}, "victim": {"fiber": "B"}
        }"#;
        let t = Topology::load(doc, SchemaMode::Strict).unwrap();
        assert!(t.crosstalk_points().is_empty());
    }

    #[test]
    fn equal_positions_are_rejected() {
        let doc = bundle_doc(3000.0, 0.2, &[(500.0, -100.0), (500.0, -100.0)]);
        assert!(matches!(Topology::from_doc(doc), Err(Error::Validation { .. })));
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let doc = r#"{"spans": [{"id": "A", "length_m": "long"}], "probe": {"fiber": "A"}, "victim": {"fiber": "A"}}"#;
        match Topology::load(doc, SchemaMode::Strict).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "spans[0].length_m"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected_unless_lax() {
        let doc = MINIMAL.replace("\"probe\"", "\"colour\": \"blue\", \"probe\"");
        match Topology::load(&doc, SchemaMode::Strict).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "colour"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Topology::load(&doc, SchemaMode::Lax).is_ok());
    }

    #[test]
    fn bad_lane_count_and_rolloff() {
        let doc = one_connector(100.0).replace("\"lane_count\": 12", "\"lane_count\": 16");
        assert!(matches!(
            Topology::load(&doc, SchemaMode::Strict),
            Err(Error::Validation { .. })
        ));
        let doc = one_connector(100.0).replace("\"base_coupling_db\": -100", "\"rolloff_db_per_lane\": -1");
        assert!(matches!(
            Topology::load(&doc, SchemaMode::Strict),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn mpo_coupling_examples() {
        let mut c = MpoConnector::with_defaults("X", 0.0, 12);
        let l = nm(1550.0);
        assert_eq!(mpo_coupling_db(&c, 1, 2, l).unwrap().db(), -100.0);
        assert_eq!(mpo_coupling_db(&c, 2, 5, l).unwrap().db(), -130.0);
        assert_eq!(mpo_coupling_db(&c, 1, 6, l).unwrap().db(), -160.0);
        assert_eq!(mpo_coupling_db(&c, 1, 12, l).unwrap().db(), COUPLING_FLOOR_DB);
        assert!(mpo_coupling_db(&c, 3, 3, l).is_err());
        assert!(mpo_coupling_db(&c, 0, 3, l).is_err());
        assert!(mpo_coupling_db(&c, 1, 13, l).is_err());
        c.wavelength_slope_db_per_nm = 0.01;
        let shifted = mpo_coupling_db(&c, 1, 2, nm(1650.0)).unwrap().db();
        assert!((shifted - (-99.0)).abs() < 1e-9);
    }

    #[test]
    fn path_loss_examples() {
        let t = Topology::from_doc(bundle_doc(3000.0, 0.2, &[(1000.0, -100.0)])).unwrap();
        let l = nm(1550.0);
        assert_eq!(t.path_loss_db("A", 700.0, 700.0, l).unwrap().db(), 0.0);
        assert!((t.path_loss_db("A", 0.0, 1000.0, l).unwrap().db() - 0.2).abs() < 1e-12);
        assert!((t.path_loss_db("A", 0.0, 2000.0, l).unwrap().db() - 0.7).abs() < 1e-12);
        assert!(t.path_loss_db("A", 0.0, 3000.1, l).is_err());
        assert!(t.path_loss_db("A", 10.0, 5.0, l).is_err());
        assert!(t.path_loss_db("Z", 0.0, 1.0, l).is_err());
    }

    #[test]
    fn attenuation_table_interpolates() {
        let t = Topology::load(MINIMAL, SchemaMode::Strict).unwrap();
        let span = t.aggressor();
        assert_eq!(span.attenuation_db_per_km(nm(1550.0)), 0.2);
        assert_eq!(span.attenuation_db_per_km(nm(1310.0)), 0.35);
        assert_eq!(span.attenuation_db_per_km(nm(1100.0)), 0.35);
        assert!((span.attenuation_db_per_km(nm(1430.0)) - 0.275).abs() < 1e-12);
    }

    #[test]
    fn far_end_detector_has_constant_delay() {
        let mut doc = bundle_doc(3000.0, 0.2, &[(150.0, -100.0), (2300.0, -100.0)]);
        doc.victim.end = FiberEnd::Far;
        let t = Topology::from_doc(doc).unwrap();
        assert!((t.point_delay_ps(150.0) - t.point_delay_ps(2300.0)).abs() < 1e-6);
        assert!(t.localization_propagation().is_err());
    }

    #[test]
    fn switch_element_adds_a_point() {
        let doc = MINIMAL.replace(
            "\"probe\"",
            r#""switch": {"id": "SW1", "position_m": 400, "coupling_db": -50}, "probe""#,
        );
        let t = Topology::load(&doc, SchemaMode::Strict).unwrap();
        let pts = t.crosstalk_points();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].source, SourceElement::Switch { id: "SW1".into() });
        assert_eq!(pts[0].coupling_db(nm(1550.0)).db(), -50.0);
    }

    proptest! {
        #[test]
        fn path_loss_is_additive(a in 0.0f64..3000.0, b in 0.0f64..3000.0, c in 0.0f64..3000.0) {
            let mut v = [a, b, c];
            v.sort_by(f64::total_cmp);
            let t = Topology::from_doc(bundle_doc(3000.0, 0.2, &[(500.0, -100.0), (1500.0, -100.0)])).unwrap();
            let l = nm(1550.0);
            let ab = t.path_loss_db("A", v[0], v[1], l).unwrap().db();
            let bc = t.path_loss_db("A", v[1], v[2], l).unwrap().db();
            let ac = t.path_loss_db("A", v[0], v[2], l).unwrap().db();
            prop_assert!((ab + bc - ac).abs() < 1e-9);
        }

        #[test]
        fn coupling_non_increasing_in_separation(i in 1u32..=48, d in 1u32..47, rolloff in 0.0f64..40.0) {
            let mut c = MpoConnector::with_defaults("X", 0.0, 48);
            c.rolloff_db_per_lane = rolloff;
            let l = nm(1550.0);
            prop_assume!(i + d < 48);
            let near = mpo_coupling_db(&c, i, i + d, l).unwrap().db();
            let far = mpo_coupling_db(&c, i, i + d + 1, l).unwrap().db();
            prop_assert!(far <= near);
        }
    }
}
