//! `PHTX` binary event files: a 12-byte header followed by packed
//! little-endian records.
//!
//! | field              | type | bytes |
//! |--------------------|------|-------|
//! | magic `PHTX`       |      | 4     |
//! | version            | u16  | 2     |
//! | record kind        | u8   | 1     |
//! | time resolution ps | u32  | 4     |
//! | channel count      | u8   | 1     |
//!
//! Click records are `(t: u64, channel: u8)`; photon records are
//! `(t: u64, ν: i32 in 0.1 MHz, pol: u8, origin: u8, pulse: u64)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use crate::bench::ClickRecord;
use crate::error::{Error, Result};
use crate::photon::{Origin, PhotonRecord, Polarization};
use crate::units::Frequency;

pub const MAGIC: [u8; 4] = *b"PHTX";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 12;
const CLICK_LEN: usize = 9;
const PHOTON_LEN: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordKind {
    Photon = 0,
    Click = 1,
}

impl RecordKind {
    fn record_len(self) -> usize {
        match self {
            RecordKind::Photon => PHOTON_LEN,
            RecordKind::Click => CLICK_LEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub kind: RecordKind,
    pub time_resolution_ps: u32,
    pub channel_count: u8,
}

/// A photon as stored on disk: time quantised to 1 ps, frequency to 0.1 MHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhotonEvent {
    pub t: u64,
    pub nu_tenth_mhz: i32,
    pub pol: Polarization,
    pub origin: Origin,
    pub pulse_index: u64,
}

impl From<&PhotonRecord> for PhotonEvent {
    fn from(p: &PhotonRecord) -> Self {
        PhotonEvent {
            t: p.t_abs.round().max(0.0) as u64,
            nu_tenth_mhz: (p.nu_offset.mhz() * 10.0).round() as i32,
            pol: p.pol,
            origin: p.origin,
            pulse_index: p.pulse_index,
        }
    }
}

impl PhotonEvent {
    pub fn to_record(self) -> PhotonRecord {
        PhotonRecord {
            t_abs: self.t as f64,
            nu_offset: Frequency::from_mhz(self.nu_tenth_mhz as f64 / 10.0),
            pol: self.pol,
            pulse_index: self.pulse_index,
            origin: self.origin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Click(ClickRecord),
    Photon(PhotonEvent),
}

impl Event {
    pub fn t(&self) -> u64 {
        match self {
            Event::Click(c) => c.t,
            Event::Photon(p) => p.t,
        }
    }
}

/// Streaming writer; rejects records that go back in time.
pub struct EventWriter<W: Write> {
    out: W,
    header: Header,
    last: u64,
    written: u64,
    path: PathBuf,
}

impl EventWriter<BufWriter<File>> {
    pub fn create(path: &Path, kind: RecordKind, channel_count: u8) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = EventWriter::new(BufWriter::with_capacity(1 << 20, file), kind, channel_count)?;
        w.path = path.to_path_buf();
        Ok(w)
    }
}

impl<W: Write> EventWriter<W> {
    pub fn new(mut out: W, kind: RecordKind, channel_count: u8) -> Result<Self> {
        let mut head = Vec::with_capacity(HEADER_LEN as usize);
        head.extend_from_slice(&MAGIC);
        head.extend_from_slice(&VERSION.to_le_bytes());
        head.push(kind as u8);
        head.extend_from_slice(&1u32.to_le_bytes());
        head.push(channel_count);
        out.write_all(&head).map_err(|e| Error::io("<writer>", e))?;
        Ok(EventWriter {
            out,
            header: Header { kind, time_resolution_ps: 1, channel_count },
            last: 0,
            written: 0,
            path: PathBuf::from("<writer>"),
        })
    }

    fn order(&mut self, t: u64) -> Result<()> {
        if t < self.last {
            return Err(Error::Unordered { index: self.written as usize });
        }
        self.last = t;
        self.written += 1;
        Ok(())
    }

    pub fn write_click(&mut self, c: &ClickRecord) -> Result<()> {
        if self.header.kind != RecordKind::Click {
            return Err(Error::domain("click record written to a photon file"));
        }
        if c.channel >= self.header.channel_count {
            return Err(Error::domain(format!("channel {} outside the declared {}", c.channel, self.header.channel_count)));
        }
        self.order(c.t)?;
        let mut buf = [0u8; CLICK_LEN];
        buf[..8].copy_from_slice(&c.t.to_le_bytes());
        buf[8] = c.channel;
        self.out.write_all(&buf).map_err(|e| Error::io(&self.path, e))
    }

    pub fn write_photon(&mut self, p: &PhotonEvent) -> Result<()> {
        if self.header.kind != RecordKind::Photon {
            return Err(Error::domain("photon record written to a click file"));
        }
        self.order(p.t)?;
        let mut buf = [0u8; PHOTON_LEN];
        buf[..8].copy_from_slice(&p.t.to_le_bytes());
        buf[8..12].copy_from_slice(&p.nu_tenth_mhz.to_le_bytes());
        buf[12] = p.pol as u8;
        buf[13] = p.origin as u8;
        buf[14..].copy_from_slice(&p.pulse_index.to_le_bytes());
        self.out.write_all(&buf).map_err(|e| Error::io(&self.path, e))
    }

    pub fn records_written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.out)
    }
}

/// Streaming reader. Yields records one at a time; memory use does not grow
/// with the file size.
pub struct EventReader<R: Read> {
    input: R,
    header: Header,
    offset: u64,
    last: u64,
    done: bool,
}

fn parse_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Parse { offset, message: message.into() }
}

/// Fills `buf` completely, or reports how many bytes were available.
fn read_full<R: Read>(input: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl EventReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        EventReader::new(BufReader::with_capacity(1 << 20, file))
    }
}

impl<R: Read> EventReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut head = [0u8; HEADER_LEN as usize];
        let n = read_full(&mut input, &mut head).map_err(|e| parse_err(0, e.to_string()))?;
        if n < 4 || head[..4] != MAGIC {
            return Err(parse_err(0, "bad magic, expected PHTX"));
        }
        if n < head.len() {
            return Err(parse_err(n as u64, "truncated header"));
        }
        let version = u16::from_le_bytes([head[4], head[5]]);
        if version != VERSION {
            return Err(parse_err(4, format!("unsupported version {version}")));
        }
        let kind = match head[6] {
            0 => RecordKind::Photon,
            1 => RecordKind::Click,
            other => return Err(parse_err(6, format!("unknown record kind {other}"))),
        };
        let time_resolution_ps = u32::from_le_bytes([head[7], head[8], head[9], head[10]]);
        if time_resolution_ps != 1 {
            return Err(parse_err(7, format!("time resolution {time_resolution_ps} ps, expected 1")));
        }
        Ok(EventReader {
            input,
            header: Header { kind, time_resolution_ps, channel_count: head[11] },
            offset: HEADER_LEN,
            last: 0,
            done: false,
        })
    }

    pub fn header(&self) -> Header {
        self.header
    }

    fn next_record(&mut self) -> Result<Option<Event>> {
        let len = self.header.kind.record_len();
        let mut buf = [0u8; PHOTON_LEN];
        let start = self.offset;
        let n = read_full(&mut self.input, &mut buf[..len]).map_err(|e| parse_err(start, e.to_string()))?;
        if n == 0 {
            return Ok(None);
        }
        if n < len {
            return Err(parse_err(start, format!("truncated record: {n} of {len} bytes")));
        }
        self.offset += len as u64;
        let t = u64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        if t < self.last {
            return Err(parse_err(start, format!("record at t = {t} ps precedes t = {} ps", self.last)));
        }
        self.last = t;
        let event = match self.header.kind {
            RecordKind::Click => {
                let channel = buf[8];
                if channel >= self.header.channel_count {
                    return Err(parse_err(start + 8, format!("channel {channel} outside the declared {}", self.header.channel_count)));
                }
                Event::Click(ClickRecord { t, channel })
            }
            RecordKind::Photon => {
                let nu = i32::from_le_bytes(buf[8..12].try_into().expect("4 bytes"));
                let pol = Polarization::try_from(buf[12]).map_err(|v| parse_err(start + 12, format!("bad polarisation {v}")))?;
                let origin = Origin::try_from(buf[13]).map_err(|v| parse_err(start + 13, format!("bad origin {v}")))?;
                let pulse_index = u64::from_le_bytes(buf[14..22].try_into().expect("8 bytes"));
                Event::Photon(PhotonEvent { t, nu_tenth_mhz: nu, pol, origin, pulse_index })
            }
        };
        Ok(Some(event))
    }
}

impl<R: Read> Iterator for EventReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(e)) => Some(Ok(e)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Opens an event file for streaming.
pub fn read_events(path: &Path) -> Result<EventReader<BufReader<File>>> {
    EventReader::open(path)
}

/// Writes click records to `path`.
pub fn write_clicks<'a>(path: &Path, channel_count: u8, clicks: impl IntoIterator<Item = &'a ClickRecord>) -> Result<u64> {
    let mut w = EventWriter::create(path, RecordKind::Click, channel_count)?;
    for c in clicks {
        w.write_click(c)?;
    }
    let n = w.records_written();
    w.finish()?;
    Ok(n)
}

/// Writes photon records to `path`.
pub fn write_photons<'a>(path: &Path, photons: impl IntoIterator<Item = &'a PhotonRecord>) -> Result<u64> {
    let mut w = EventWriter::create(path, RecordKind::Photon, 1)?;
    for p in photons {
        w.write_photon(&PhotonEvent::from(p))?;
    }
    let n = w.records_written();
    w.finish()?;
    Ok(n)
}

/// Splits a click file into per-channel time lists.
pub fn read_click_channels(path: &Path) -> Result<Vec<Vec<u64>>> {
    let reader = read_events(path)?;
    let header = reader.header();
    if header.kind != RecordKind::Click {
        return Err(parse_err(6, "expected a click file"));
    }
    let mut channels = vec![Vec::new(); header.channel_count as usize];
    for event in reader {
        if let Event::Click(c) = event? {
            channels[c.channel as usize].push(c.t);
        }
    }
    Ok(channels)
}
