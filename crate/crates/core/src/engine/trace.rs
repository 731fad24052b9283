//! Debug event log.
//!
//! Binary layout, one 13-byte little-endian record per event:
//! `f64 time | u32 directed-edge index | u8 kind (0 = jump, 1 = collision)`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RECORD_BYTES: usize = 13;

/// Events recorded by the debug trace before it stops growing.
pub const DEFAULT_TRACE_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Jump,
    Collision,
}

impl EventKind {
    pub fn code(self) -> u8 {
        match self {
            EventKind::Jump => 0,
            EventKind::Collision => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EventKind::Jump),
            1 => Some(EventKind::Collision),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub edge: usize,
    pub kind: EventKind,
}

/// The first `limit` events of a path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventTrace {
    limit: usize,
    records: Vec<EventRecord>,
}

impl EventTrace {
    pub fn with_limit(limit: usize) -> Self {
        Self {
            limit,
            records: Vec::new(),
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, rec: EventRecord) {
        if self.records.len() < self.limit {
            self.records.push(rec);
        }
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut buf = [0u8; RECORD_BYTES];
        for r in &self.records {
            buf[..8].copy_from_slice(&r.time.to_le_bytes());
            buf[8..12].copy_from_slice(&(r.edge as u32).to_le_bytes());
            buf[12] = r.kind.code();
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Vec<EventRecord>> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io("<trace>", e))?;
        if bytes.len() % RECORD_BYTES != 0 {
            return Err(Error::usage("trace length is not a whole number of records"));
        }
        bytes
            .chunks_exact(RECORD_BYTES)
            .map(|c| {
                let time = f64::from_le_bytes(c[..8].try_into().unwrap());
                let edge = u32::from_le_bytes(c[8..12].try_into().unwrap()) as usize;
                let kind = EventKind::from_code(c[12])
                    .ok_or_else(|| Error::usage(format!("bad event kind byte {}", c[12])))?;
                Ok(EventRecord { time, edge, kind })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_limit() {
        let mut t = EventTrace::with_limit(2);
        t.push(EventRecord {
            time: 0.5,
            edge: 3,
            kind: EventKind::Jump,
        });
        t.push(EventRecord {
            time: 0.75,
            edge: 70000,
            kind: EventKind::Collision,
        });
        t.push(EventRecord {
            time: 1.0,
            edge: 1,
            kind: EventKind::Jump,
        });
        let mut bytes = Vec::new();
        t.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 2 * RECORD_BYTES);
        assert_eq!(&bytes[..8], &0.5f64.to_le_bytes());
        assert_eq!(bytes[25], 1);
        let back = EventTrace::read_from(&bytes[..]).unwrap();
        assert_eq!(back, t.records());
    }
}
