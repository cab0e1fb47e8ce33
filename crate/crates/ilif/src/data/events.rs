//! Event streams and frame binning for neuromorphic-style inputs.
//!
//! An event is `(timestamp_us, x, y, polarity)`. Binning splits the stream's
//! time span into `T` equal-duration half-open bins and produces a single
//! sequence with `2 * height * width` features (one channel per polarity).
//! Bin edges are evaluated in exact integer arithmetic, so an event sitting
//! precisely on an edge always lands in the later bin.

use super::{DataError, SpikeBatch};
use std::path::Path;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub t_us: u64,
    pub x: u32,
    pub y: u32,
    pub polarity: u8,
}

#[derive(Debug, Error)]
pub enum EventError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("timestamps must be nondecreasing: event {index} goes backwards")]
    OutOfOrder { index: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A time-ordered event stream.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    /// Build from events, enforcing nondecreasing timestamps.
    pub fn new(events: Vec<Event>) -> Result<Self, EventError> {
        for (i, pair) in events.windows(2).enumerate() {
            if pair[1].t_us < pair[0].t_us {
                return Err(EventError::OutOfOrder { index: i + 1 });
            }
        }
        Ok(EventStream { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }
}

/// How bin values are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinMode {
    /// A feature is 1 if at least one matching event hit the bin.
    Or,
    /// Event counts scaled by `1/saturation` and clipped to [0, 1]. With
    /// saturation 1 this coincides with OR binning.
    Count { saturation: u32 },
}

impl Default for BinMode {
    fn default() -> Self {
        BinMode::Or
    }
}

/// Binning result: the encoded sequence plus data-quality flags.
#[derive(Clone, Debug)]
pub struct BinnedEvents {
    /// Single-sequence batch with `2 * height * width` features.
    pub batch: SpikeBatch,
    /// True when the stream had no events (the batch is all zeros).
    pub empty_stream: bool,
    /// Events dropped for out-of-bounds coordinates or polarity.
    pub rejected: usize,
}

/// Bin an event stream into `t_steps` frames of two polarity channels.
pub fn bin_events(
    stream: &EventStream,
    t_steps: usize,
    height: usize,
    width: usize,
    mode: BinMode,
) -> Result<BinnedEvents, EventError> {
    if t_steps < 1 {
        return Err(DataError::Invalid {
            what: "t_steps",
            message: "binning needs T >= 1".into(),
        }
        .into());
    }
    let features = 2 * height * width;
    let mut counts = vec![0u32; t_steps * features];
    let mut rejected = 0usize;
    let empty_stream = stream.is_empty();
    if !empty_stream {
        let t0 = stream.events.first().unwrap().t_us;
        let t_last = stream.events.last().unwrap().t_us;
        // Half-open equal bins over [t0, t_last + 1).
        let span = t_last - t0 + 1;
        for ev in &stream.events {
            if ev.x as usize >= width || ev.y as usize >= height || ev.polarity > 1 {
                rejected += 1;
                continue;
            }
            let bin = ((ev.t_us - t0) as u128 * t_steps as u128 / span as u128) as usize;
            let feature =
                ev.polarity as usize * height * width + ev.y as usize * width + ev.x as usize;
            counts[bin * features + feature] = counts[bin * features + feature].saturating_add(1);
        }
    }
    let data: Vec<f64> = match mode {
        BinMode::Or => counts
            .iter()
            .map(|c| if *c > 0 { 1.0 } else { 0.0 })
            .collect(),
        BinMode::Count { saturation } => {
            let sat = saturation.max(1) as f64;
            counts
                .iter()
                .map(|c| (*c as f64 / sat).clamp(0.0, 1.0))
                .collect()
        }
    };
    let batch = SpikeBatch::new(1, t_steps, features, data, vec![0], 1)?;
    Ok(BinnedEvents {
        batch,
        empty_stream,
        rejected,
    })
}

/// Load events from CSV with header `t_us,x,y,p`, one event per line.
pub fn load_event_csv(path: impl AsRef<Path>) -> Result<EventStream, EventError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| EventError::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e),
        })?;
    let mut events = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| EventError::Parse {
            line,
            message: e.to_string(),
        })?;
        let parse_field = |idx: usize, name: &str| -> Result<u64, EventError> {
            record
                .get(idx)
                .ok_or_else(|| EventError::Parse {
                    line,
                    message: format!("missing column {name}"),
                })?
                .trim()
                .parse::<u64>()
                .map_err(|e| EventError::Parse {
                    line,
                    message: format!("bad {name}: {e}"),
                })
        };
        events.push(Event {
            t_us: parse_field(0, "t_us")?,
            x: parse_field(1, "x")? as u32,
            y: parse_field(2, "y")? as u32,
            polarity: parse_field(3, "p")? as u8,
        });
    }
    EventStream::new(events)
}

/// Write events as CSV with the standard header.
pub fn write_event_csv(path: impl AsRef<Path>, stream: &EventStream) -> Result<(), EventError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| EventError::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e),
    })?;
    writer
        .write_record(["t_us", "x", "y", "p"])
        .and_then(|_| {
            for ev in stream.events() {
                writer.write_record([
                    ev.t_us.to_string(),
                    ev.x.to_string(),
                    ev.y.to_string(),
                    ev.polarity.to_string(),
                ])?;
            }
            writer.flush()?;
            Ok(())
        })
        .map_err(|e| EventError::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e),
        })
}
