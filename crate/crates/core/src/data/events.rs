//! Event streams and their two on-disk formats.
//!
//! Text: one `t,x,y,p` record per line, `p` in `{-1, 1}`. Blank lines are
//! skipped.
//!
//! Binary: 9-byte little-endian records `u32 t, u16 x, u16 y, i8 p`, no
//! header.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const BINARY_RECORD_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds.
    pub t: u32,
    pub x: u16,
    pub y: u16,
    pub p: i8,
}

impl Event {
    pub fn new(t: u32, x: u16, y: u16, p: i8) -> Self {
        Self { t, x, y, p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Text,
    Binary,
}

impl EventFormat {
    /// `.bin` and `.evb` files are binary, anything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("evb") => EventFormat::Binary,
            _ => EventFormat::Text,
        }
    }
}

/// Events sorted by non-decreasing timestamp with polarity in `{-1, 1}`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(events: Vec<Event>) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            check_polarity(e.p, || format!("event {i}"))?;
            if i > 0 && e.t < events[i - 1].t {
                return Err(Error::parse(format!("event {i}"), "timestamps are not sorted"));
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 16);
        for e in &self.events {
            let _ = writeln!(out, "{},{},{},{}", e.t, e.x, e.y, e.p);
        }
        out
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.events.len() * BINARY_RECORD_LEN);
        for e in &self.events {
            out.extend_from_slice(&e.t.to_le_bytes());
            out.extend_from_slice(&e.x.to_le_bytes());
            out.extend_from_slice(&e.y.to_le_bytes());
            out.extend_from_slice(&e.p.to_le_bytes());
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, format: EventFormat) -> Result<()> {
        match format {
            EventFormat::Text => fs::write(path, self.to_text())?,
            EventFormat::Binary => fs::write(path, self.to_binary())?,
        }
        Ok(())
    }
}

fn check_polarity(p: i8, location: impl FnOnce() -> String) -> Result<()> {
    if p != 1 && p != -1 {
        return Err(Error::parse(location(), format!("polarity must be -1 or 1, got {p}")));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(raw: Option<&str>, name: &str, line: usize) -> Result<T> {
    let raw = raw.ok_or_else(|| Error::parse(format!("line {line}"), format!("missing field `{name}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(format!("line {line}"), format!("bad `{name}` value `{}`", raw.trim())))
}

pub fn parse_text(text: &str) -> Result<EventStream> {
    let mut events = Vec::new();
    let mut last = 0u32;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let t: u32 = field(parts.next(), "t", lineno)?;
        let x: u16 = field(parts.next(), "x", lineno)?;
        let y: u16 = field(parts.next(), "y", lineno)?;
        let p: i8 = field(parts.next(), "p", lineno)?;
        if parts.next().is_some() {
            return Err(Error::parse(format!("line {lineno}"), "expected 4 fields"));
        }
        check_polarity(p, || format!("line {lineno}"))?;
        if t < last {
            return Err(Error::parse(format!("line {lineno}"), format!("timestamp {t} precedes {last}")));
        }
        last = t;
        events.push(Event { t, x, y, p });
    }
    Ok(EventStream { events })
}

pub fn parse_binary(bytes: &[u8]) -> Result<EventStream> {
    let tail = bytes.len() % BINARY_RECORD_LEN;
    if tail != 0 {
        return Err(Error::parse(
            format!("byte offset {}", bytes.len() - tail),
            format!("truncated record ({tail} of {BINARY_RECORD_LEN} bytes)"),
        ));
    }
    let mut events = Vec::with_capacity(bytes.len() / BINARY_RECORD_LEN);
    let mut last = 0u32;
    for (k, rec) in bytes.chunks_exact(BINARY_RECORD_LEN).enumerate() {
        let offset = k * BINARY_RECORD_LEN;
        let t = u32::from_le_bytes([rec[0], rec[1], rec[2], rec[3]]);
        let x = u16::from_le_bytes([rec[4], rec[5]]);
        let y = u16::from_le_bytes([rec[6], rec[7]]);
        let p = rec[8] as i8;
        check_polarity(p, || format!("byte offset {}", offset + 8))?;
        if t < last {
            return Err(Error::parse(format!("byte offset {offset}"), format!("timestamp {t} precedes {last}")));
        }
        last = t;
        events.push(Event { t, x, y, p });
    }
    Ok(EventStream { events })
}

/// Reads an event file, choosing the format from the extension.
pub fn load_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    match EventFormat::from_path(path) {
        EventFormat::Binary => parse_binary(&fs::read(path)?),
        EventFormat::Text => parse_text(&fs::read_to_string(path)?),
    }
}
