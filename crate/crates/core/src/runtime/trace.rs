//! JSON Lines episode traces.
//!
//! Line one is a [`TraceHeader`]; every following line is a [`TraceRecord`].
//! Floats are written with shortest round-trip formatting, so parsing a line
//! and writing it again gives the same bytes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{RunMode, RuntimeError};
use crate::scenario::{Observation, Outcome, ScenarioConfig};
use crate::world::WorldEvent;

/// Value of the header's `schema` field.
pub const TRACE_SCHEMA: &str = "dogfight-trace";
/// Bumped whenever the line layout changes.
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub version: u32,
    pub engine: String,
    pub scenario: ScenarioConfig,
    pub run_mode: RunMode,
    /// Seed the episode was reset with.
    pub seed: u64,
    /// Initial observation per slot.
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub slot: usize,
    /// Action exactly as submitted.
    pub action: Vec<f64>,
    pub observation: Observation,
    /// Sum of the per-tick rewards over the ticks of this step.
    pub reward: f64,
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    /// Physics ticks this step advanced.
    pub ticks: u32,
    /// World clock after the step, s.
    pub clock: f64,
    pub results: Vec<AgentRecord>,
    pub events: Vec<WorldEvent>,
    /// Cumulative draws from the environment RNG.
    pub rng_draws: u64,
}

/// A whole trace in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

/// Serializes a header or record as one line, without the newline.
pub fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("trace types always serialize")
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write_header(&mut self, header: &TraceHeader) -> std::io::Result<()> {
        writeln!(self.out, "{}", to_line(header))
    }

    pub fn write_record(&mut self, record: &TraceRecord) -> std::io::Result<()> {
        writeln!(self.out, "{}", to_line(record))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl Trace {
    pub fn read(input: impl BufRead) -> Result<Self, RuntimeError> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or_else(|| RuntimeError::Trace("empty trace".into()))??;
        let header: TraceHeader = serde_json::from_str(&first)?;
        if header.schema != TRACE_SCHEMA || header.version != TRACE_VERSION {
            return Err(RuntimeError::Trace(format!(
                "unsupported trace schema {} v{}",
                header.schema, header.version
            )));
        }
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord = serde_json::from_str(&line)?;
            if record.step != records.len() as u64 {
                return Err(RuntimeError::Trace(format!(
                    "step {} out of sequence, expected {}",
                    record.step,
                    records.len()
                )));
            }
            records.push(record);
        }
        Ok(Self { header, records })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, RuntimeError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn write(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = TraceWriter::new(out);
        w.write_header(&self.header)?;
        for r in &self.records {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}
