//! Time-tag streams and their on-disk forms.
//!
//! XTT1 layout: the 8-byte magic `XTT1\0\0\0\x01`, then 9-byte records of
//! `u8 channel` (0 = trigger, 1 = detector) followed by a little-endian `u64`
//! time in picoseconds. Records are ordered by `(time, channel)`.
//!
//! The CSV alternative is a `channel,time_ps` header followed by one record
//! per line in the same order.

use std::io::{BufRead, Write};

use itertools::{merge_join_by, EitherOrBoth};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Detector, PulsedSource};

pub const XTT1_MAGIC: [u8; 8] = *b"XTT1\0\0\0\x01";
pub const XTT1_RECORD_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Trigger = 0,
    Detector = 1,
}

impl Channel {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Channel::Trigger),
            1 => Some(Channel::Detector),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Tag {
    pub time_ps: u64,
    pub channel: Channel,
}

/// Simulation snapshot stored next to a tag file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMetadata {
    pub schema_version: u32,
    pub seed: u64,
    pub duration_s: f64,
    pub period_ps: u64,
    pub pulses: u64,
    pub source: PulsedSource,
    pub detector: Detector,
}

/// Trigger and detector timestamps, each strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TagStream {
    triggers: Vec<u64>,
    detections: Vec<u64>,
    pub metadata: Option<StreamMetadata>,
}

impl TagStream {
    pub fn new(triggers: Vec<u64>, detections: Vec<u64>) -> Result<Self> {
        check_increasing("trigger", &triggers)?;
        check_increasing("detector", &detections)?;
        Ok(Self {
            triggers,
            detections,
            metadata: None,
        })
    }

    pub fn with_metadata(mut self, metadata: StreamMetadata) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn triggers(&self) -> &[u64] {
        &self.triggers
    }

    pub fn detections(&self) -> &[u64] {
        &self.detections
    }

    pub fn len(&self) -> usize {
        self.triggers.len() + self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All tags ordered by `(time, channel)`.
    pub fn tags(&self) -> impl Iterator<Item = Tag> + '_ {
        merge_join_by(self.triggers.iter(), self.detections.iter(), |a, b| a.cmp(b)).flat_map(|pair| {
            let (t, d) = match pair {
                EitherOrBoth::Left(&t) => (Some(t), None),
                EitherOrBoth::Right(&d) => (None, Some(d)),
                EitherOrBoth::Both(&t, &d) => (Some(t), Some(d)),
            };
            t.map(|time_ps| Tag {
                time_ps,
                channel: Channel::Trigger,
            })
            .into_iter()
            .chain(d.map(|time_ps| Tag {
                time_ps,
                channel: Channel::Detector,
            }))
        })
    }

    /// Shift every tag by `offset_ps`. Fails on overflow.
    pub fn shifted(&self, offset_ps: u64) -> Result<Self> {
        let shift = |v: &[u64]| -> Result<Vec<u64>> {
            v.iter()
                .map(|t| {
                    t.checked_add(offset_ps)
                        .ok_or_else(|| Error::domain("time shift overflows u64"))
                })
                .collect()
        };
        Ok(Self {
            triggers: shift(&self.triggers)?,
            detections: shift(&self.detections)?,
            metadata: self.metadata.clone(),
        })
    }

    pub fn encode_xtt1(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(XTT1_MAGIC.len() + self.len() * XTT1_RECORD_LEN);
        out.extend_from_slice(&XTT1_MAGIC);
        for tag in self.tags() {
            out.push(tag.channel as u8);
            out.extend_from_slice(&tag.time_ps.to_le_bytes());
        }
        out
    }

    pub fn decode_xtt1(bytes: &[u8]) -> Result<Self> {
        let body = bytes
            .strip_prefix(&XTT1_MAGIC[..])
            .ok_or_else(|| parse_err("header", "missing XTT1 magic"))?;
        if body.len() % XTT1_RECORD_LEN != 0 {
            return Err(parse_err(
                "records",
                format!("trailing {} bytes after last record", body.len() % XTT1_RECORD_LEN),
            ));
        }
        let mut b = Builder::default();
        for (i, rec) in body.chunks_exact(XTT1_RECORD_LEN).enumerate() {
            let channel = Channel::from_u8(rec[0])
                .ok_or_else(|| parse_err(format!("records[{i}]"), format!("unknown channel {}", rec[0])))?;
            let time = u64::from_le_bytes(rec[1..].try_into().expect("8-byte slice"));
            b.push(i, channel, time)?;
        }
        b.finish()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "channel,time_ps")?;
        for tag in self.tags() {
            writeln!(w, "{},{}", tag.channel as u8, tag.time_ps)?;
        }
        w.flush()
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            channel: u8,
            time_ps: u64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers().map_err(|e| parse_err("header", e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["channel", "time_ps"] {
            return Err(parse_err("header", "expected `channel,time_ps`"));
        }
        let mut b = Builder::default();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| parse_err(format!("line {}", i + 2), e.to_string()))?;
            let channel = Channel::from_u8(row.channel)
                .ok_or_else(|| parse_err(format!("line {}", i + 2), format!("unknown channel {}", row.channel)))?;
            b.push(i, channel, row.time_ps)?;
        }
        b.finish()
    }
}

#[derive(Default)]
struct Builder {
    triggers: Vec<u64>,
    detections: Vec<u64>,
}

impl Builder {
    fn push(&mut self, index: usize, channel: Channel, time: u64) -> Result<()> {
        let list = match channel {
            Channel::Trigger => &mut self.triggers,
            Channel::Detector => &mut self.detections,
        };
        if list.last().is_some_and(|&prev| prev >= time) {
            return Err(Error::Data(format!(
                "record {index}: {channel:?} timestamps must be strictly increasing"
            )));
        }
        list.push(time);
        Ok(())
    }

    fn finish(self) -> Result<TagStream> {
        Ok(TagStream {
            triggers: self.triggers,
            detections: self.detections,
            metadata: None,
        })
    }
}

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

fn check_increasing(name: &str, v: &[u64]) -> Result<()> {
    match v.windows(2).position(|w| w[0] >= w[1]) {
        Some(i) => Err(Error::Data(format!(
            "{name} timestamps not strictly increasing at index {}",
            i + 1
        ))),
        None => Ok(()),
    }
}
