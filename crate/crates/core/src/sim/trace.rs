//! Trace rows and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 11] = [
    "time_s",
    "temp_c",
    "rf_setting",
    "rf_freq_hz",
    "rf_ppm",
    "chip_setting",
    "chip_freq_hz",
    "chip_ppm",
    "beacons_rx_total",
    "beacons_lost_total",
    "event",
];

/// Calibration events. Several events at one instant share a row, joined by `;`.
pub mod events {
    pub const SWEEP_START: &str = "SWEEP_START";
    pub const SWEEP_FINISH: &str = "SWEEP_FINISH";
    pub const FAST_CAL: &str = "FAST_CAL";
    pub const FINE_STEP: &str = "FINE_STEP";
    pub const IF_STEP: &str = "IF_STEP";
    pub const LOCK_LOST: &str = "LOCK_LOST";
}

/// One row of simulation output.
///
/// Floating columns hold exactly the values written to CSV, so a trace read
/// back from disk is bit-identical to the one produced in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time_s: f64,
    pub temp_c: f64,
    pub rf_setting: u32,
    pub rf_freq_hz: f64,
    pub rf_ppm: f64,
    pub chip_setting: u32,
    pub chip_freq_hz: f64,
    pub chip_ppm: f64,
    pub beacons_rx_total: u64,
    pub beacons_lost_total: u64,
    pub event: String,
}

impl TraceRecord {
    /// Whether any event in this row has the given name (payload ignored).
    pub fn has_event(&self, name: &str) -> bool {
        self.events().any(|e| e == name)
    }

    /// Event names in this row, without payloads.
    pub fn events(&self) -> impl Iterator<Item = &str> {
        self.event
            .split(';')
            .filter(|e| !e.is_empty())
            .map(|e| e.split('(').next().unwrap_or(e))
    }

    /// Payload of the first event called `name`, e.g. `-20` for `FAST_CAL(-20)`.
    pub fn event_arg(&self, name: &str) -> Option<&str> {
        self.event.split(';').find_map(|e| {
            let rest = e.strip_prefix(name)?;
            rest.strip_prefix('(')?.strip_suffix(')')
        })
    }

    pub fn push_event(&mut self, event: &str) {
        if !self.event.is_empty() {
            self.event.push(';');
        }
        self.event.push_str(event);
    }
}

/// Rounds to `decimals` places so that `format!("{:.N}")` and parsing back
/// reproduce the value exactly.
pub fn quantize(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let q = (x * scale).round() / scale;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

pub const TIME_DECIMALS: i32 = 6;
pub const TEMP_DECIMALS: i32 = 4;
pub const FREQ_DECIMALS: i32 = 3;
pub const PPM_DECIMALS: i32 = 3;

fn fields(r: &TraceRecord) -> [String; 11] {
    [
        format!("{:.*}", TIME_DECIMALS as usize, r.time_s),
        format!("{:.*}", TEMP_DECIMALS as usize, r.temp_c),
        r.rf_setting.to_string(),
        format!("{:.*}", FREQ_DECIMALS as usize, r.rf_freq_hz),
        format!("{:.*}", PPM_DECIMALS as usize, r.rf_ppm),
        r.chip_setting.to_string(),
        format!("{:.*}", FREQ_DECIMALS as usize, r.chip_freq_hz),
        format!("{:.*}", PPM_DECIMALS as usize, r.chip_ppm),
        r.beacons_rx_total.to_string(),
        r.beacons_lost_total.to_string(),
        r.event.clone(),
    ]
}

pub fn write_trace<W: Write>(out: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record(fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(records: &[TraceRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(&mut buf, records)?;
    String::from_utf8(buf).map_err(|e| Error::Trace(e.to_string()))
}

fn parse<T: std::str::FromStr>(row: &csv::StringRecord, idx: usize, line: u64) -> Result<T> {
    let raw = row.get(idx).unwrap_or_default();
    raw.parse()
        .map_err(|_| Error::Trace(format!("line {line}: bad {} value {raw:?}", TRACE_HEADER[idx])))
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Trace(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        if row.len() != TRACE_HEADER.len() {
            return Err(Error::Trace(format!(
                "line {line}: expected 11 fields, got {}",
                row.len()
            )));
        }
        out.push(TraceRecord {
            time_s: parse(&row, 0, line)?,
            temp_c: parse(&row, 1, line)?,
            rf_setting: parse(&row, 2, line)?,
            rf_freq_hz: parse(&row, 3, line)?,
            rf_ppm: parse(&row, 4, line)?,
            chip_setting: parse(&row, 5, line)?,
            chip_freq_hz: parse(&row, 6, line)?,
            chip_ppm: parse(&row, 7, line)?,
            beacons_rx_total: parse(&row, 8, line)?,
            beacons_lost_total: parse(&row, 9, line)?,
            event: row.get(10).unwrap_or_default().to_string(),
        });
    }
    Ok(out)
}
