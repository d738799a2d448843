//! Click records and the two on-disk formats.
//!
//! Binary layout: `b"GQTT01"`, one channel-count byte, then 9-byte records
//! (`u8` channel, `u64` little-endian picoseconds).

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TimetagError};

pub const MAGIC: &[u8; 6] = b"GQTT01";
pub const RECORD_BYTES: usize = 9;
pub const CSV_HEADER: &str = "channel,t_ps";
/// Records may arrive this far out of order and are re-sorted.
pub const REORDER_TOLERANCE_PS: u64 = 1 << 20;
pub const MAX_CHANNELS: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClickRecord {
    // Field order gives the (t, channel) sort.
    pub t_ps: u64,
    pub channel: u8,
}

impl ClickRecord {
    pub fn new(channel: u8, t_ps: u64) -> Self {
        Self { t_ps, channel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Binary,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = TimetagError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "gqtt" | "bin" => Ok(Format::Binary),
            "csv" => Ok(Format::Csv),
            other => Err(TimetagError::Format(format!("unknown format {other:?}"))),
        }
    }
}

/// Time-ordered clicks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClickStream {
    records: Vec<ClickRecord>,
}

impl ClickStream {
    /// Sorts the records by `(t_ps, channel)` and validates channels.
    pub fn from_records(mut records: Vec<ClickRecord>) -> Result<Self> {
        if let Some((index, r)) = records.iter().enumerate().find(|(_, r)| r.channel >= MAX_CHANNELS) {
            return Err(TimetagError::Channel { index, channel: r.channel as u64 });
        }
        if !records.windows(2).all(|w| w[0] <= w[1]) {
            records.sort_unstable();
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[ClickRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ClickRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn singles(&self) -> [u64; 3] {
        let mut s = [0; 3];
        for r in &self.records {
            s[r.channel as usize] += 1;
        }
        s
    }

    /// Keeps every click independently with probability `eta`.
    pub fn thin(&self, eta: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(TimetagError::Config(format!("thinning probability {eta} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = self.records.iter().copied().filter(|_| rng.random::<f64>() < eta).collect();
        Ok(Self { records })
    }

    /// Replaces channel `c` by `perm[c]`.
    pub fn relabel(&self, perm: [u8; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for &p in &perm {
            if p >= MAX_CHANNELS || std::mem::replace(&mut seen[p as usize], true) {
                return Err(TimetagError::Config(format!("{perm:?} is not a channel permutation")));
            }
        }
        Self::from_records(self.records.iter().map(|r| ClickRecord::new(perm[r.channel as usize], r.t_ps)).collect())
    }
}

// Accepts records nondecreasing up to the reorder tolerance, then sorts.
struct OrderCheck {
    max_t: u64,
    sorted: bool,
}

impl OrderCheck {
    fn new() -> Self {
        Self { max_t: 0, sorted: true }
    }

    fn push(&mut self, index: usize, r: &ClickRecord, prev: Option<&ClickRecord>) -> Result<()> {
        if r.channel >= MAX_CHANNELS {
            return Err(TimetagError::Channel { index, channel: r.channel as u64 });
        }
        if r.t_ps.saturating_add(REORDER_TOLERANCE_PS) < self.max_t {
            return Err(TimetagError::Order { index, t_ps: r.t_ps, prev_ps: self.max_t });
        }
        if prev.is_some_and(|p| p > r) {
            self.sorted = false;
        }
        self.max_t = self.max_t.max(r.t_ps);
        Ok(())
    }

    fn finish(self, mut records: Vec<ClickRecord>) -> ClickStream {
        if !self.sorted {
            records.sort_unstable();
        }
        ClickStream { records }
    }
}

pub fn parse_stream<R: Read>(source: R, format: Format) -> Result<ClickStream> {
    match format {
        Format::Binary => parse_binary(source),
        Format::Csv => parse_csv(source),
    }
}

pub fn parse_binary<R: Read>(source: R) -> Result<ClickStream> {
    let mut rd = BufReader::with_capacity(1 << 16, source);
    let mut header = [0u8; 7];
    rd.read_exact(&mut header)
        .map_err(|_| TimetagError::Format("truncated header".into()))?;
    if &header[..6] != MAGIC {
        return Err(TimetagError::Format(format!("bad magic {:?}", &header[..6])));
    }
    let n_channels = header[6];
    if n_channels == 0 || n_channels > MAX_CHANNELS {
        return Err(TimetagError::Format(format!("channel count {n_channels} outside 1..=3")));
    }
    let mut records = Vec::new();
    let mut check = OrderCheck::new();
    let mut carry: Vec<u8> = Vec::with_capacity(RECORD_BYTES);
    loop {
        let buf = rd.fill_buf()?;
        if buf.is_empty() {
            break;
        }
        let mut chunk = buf;
        let mut consumed = 0;
        if !carry.is_empty() {
            let need = RECORD_BYTES - carry.len();
            let take = need.min(chunk.len());
            carry.extend_from_slice(&chunk[..take]);
            chunk = &chunk[take..];
            consumed += take;
            if carry.len() == RECORD_BYTES {
                let r = decode(&carry);
                push_checked(&mut records, &mut check, r, n_channels)?;
                carry.clear();
            }
        }
        let whole = chunk.len() / RECORD_BYTES * RECORD_BYTES;
        for rec in chunk[..whole].chunks_exact(RECORD_BYTES) {
            push_checked(&mut records, &mut check, decode(rec), n_channels)?;
        }
        carry.extend_from_slice(&chunk[whole..]);
        consumed += chunk.len();
        rd.consume(consumed);
    }
    if !carry.is_empty() {
        return Err(TimetagError::Format(format!("trailing partial record of {} bytes", carry.len())));
    }
    Ok(check.finish(records))
}

fn decode(rec: &[u8]) -> ClickRecord {
    let mut t = [0u8; 8];
    t.copy_from_slice(&rec[1..RECORD_BYTES]);
    ClickRecord { channel: rec[0], t_ps: u64::from_le_bytes(t) }
}

fn push_checked(records: &mut Vec<ClickRecord>, check: &mut OrderCheck, r: ClickRecord, n_channels: u8) -> Result<()> {
    let index = records.len();
    if r.channel >= n_channels {
        return Err(TimetagError::Channel { index, channel: r.channel as u64 });
    }
    check.push(index, &r, records.last())?;
    records.push(r);
    Ok(())
}

pub fn parse_csv<R: Read>(source: R) -> Result<ClickStream> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let header = rd.headers().map_err(|e| TimetagError::Format(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["channel", "t_ps"] {
        return Err(TimetagError::Format(format!("expected header {CSV_HEADER:?}, got {header:?}")));
    }
    let mut records = Vec::new();
    let mut check = OrderCheck::new();
    for (index, row) in rd.records().enumerate() {
        let row = row.map_err(|e| TimetagError::Format(e.to_string()))?;
        if row.len() != 2 {
            return Err(TimetagError::Format(format!("row {index}: expected 2 fields, got {}", row.len())));
        }
        let channel: u64 = row[0]
            .parse()
            .map_err(|_| TimetagError::Format(format!("row {index}: bad channel {:?}", &row[0])))?;
        let t_ps: u64 = row[1]
            .parse()
            .map_err(|_| TimetagError::Format(format!("row {index}: bad time {:?}", &row[1])))?;
        if channel >= MAX_CHANNELS as u64 {
            return Err(TimetagError::Channel { index, channel });
        }
        let r = ClickRecord::new(channel as u8, t_ps);
        check.push(index, &r, records.last())?;
        records.push(r);
    }
    Ok(check.finish(records))
}

pub fn write_stream<W: Write>(out: W, stream: &ClickStream, format: Format) -> Result<()> {
    match format {
        Format::Binary => write_binary(out, stream),
        Format::Csv => write_csv(out, stream),
    }
}

pub fn write_binary<W: Write>(out: W, stream: &ClickStream) -> Result<()> {
    let mut w = std::io::BufWriter::with_capacity(1 << 16, out);
    w.write_all(MAGIC)?;
    w.write_all(&[MAX_CHANNELS])?;
    for r in stream.records() {
        w.write_all(&[r.channel])?;
        w.write_all(&r.t_ps.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(out: W, stream: &ClickStream) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "{CSV_HEADER}")?;
    for r in stream.records() {
        writeln!(w, "{},{}", r.channel, r.t_ps)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(records: &[(u8, u64)]) -> Vec<u8> {
        let mut v = MAGIC.to_vec();
        v.push(3);
        for &(c, t) in records {
            v.push(c);
            v.extend_from_slice(&t.to_le_bytes());
        }
        v
    }

    #[test]
    fn empty_payload() {
        assert!(parse_binary(&binary(&[])[..]).unwrap().is_empty());
        assert!(parse_csv("channel,t_ps\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn csv_rows_in_order() {
        let s = parse_csv("channel,t_ps\n0,100\n1,150\n2,200\n".as_bytes()).unwrap();
        let want = [ClickRecord::new(0, 100), ClickRecord::new(1, 150), ClickRecord::new(2, 200)];
        assert_eq!(s.records(), &want);
    }

    #[test]
    fn bad_channel_byte() {
        let e = parse_binary(&binary(&[(0, 5), (7, 9)])[..]).unwrap_err();
        assert!(matches!(e, TimetagError::Channel { index: 1, channel: 7 }), "{e:?}");
        let e = parse_csv("channel,t_ps\n3,1\n".as_bytes()).unwrap_err();
        assert!(matches!(e, TimetagError::Channel { .. }));
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut v = binary(&[(0, 1)]);
        v[0] = b'X';
        assert!(matches!(parse_binary(&v[..]), Err(TimetagError::Format(_))));
        let v = binary(&[(0, 1), (1, 2)]);
        assert!(matches!(parse_binary(&v[..v.len() - 3]), Err(TimetagError::Format(_))));
        assert!(matches!(parse_csv("chan,t\n0,1\n".as_bytes()), Err(TimetagError::Format(_))));
        assert!(matches!(parse_csv("channel,t_ps\n0,-4\n".as_bytes()), Err(TimetagError::Format(_))));
    }

    #[test]
    fn reorder_tolerance() {
        let s = parse_binary(&binary(&[(0, 2_000_000), (1, 1_500_000), (2, 3_000_000)])[..]).unwrap();
        assert_eq!(s.records()[0].t_ps, 1_500_000);
        let e = parse_binary(&binary(&[(0, 5_000_000), (1, 1_000_000)])[..]).unwrap_err();
        assert!(matches!(e, TimetagError::Order { index: 1, .. }));
    }

    #[test]
    fn ties_break_by_channel() {
        let s = parse_csv("channel,t_ps\n2,10\n0,10\n".as_bytes()).unwrap();
        assert_eq!(s.records()[0].channel, 0);
    }

    #[test]
    fn round_trip_both_formats() {
        let s = ClickStream::from_records(vec![ClickRecord::new(1, 7), ClickRecord::new(0, 3), ClickRecord::new(2, u64::MAX)]).unwrap();
        for f in [Format::Binary, Format::Csv] {
            let mut buf = Vec::new();
            write_stream(&mut buf, &s, f).unwrap();
            assert_eq!(parse_stream(&buf[..], f).unwrap(), s);
        }
    }

    #[test]
    fn thinning_and_relabel() {
        let s = ClickStream::from_records((0..10_000).map(|i| ClickRecord::new((i % 3) as u8, i * 10)).collect()).unwrap();
        let t = s.thin(0.5, 1).unwrap();
        assert!((4_700..5_300).contains(&t.len()));
        assert_eq!(t, s.thin(0.5, 1).unwrap());
        let r = s.relabel([1, 2, 0]).unwrap();
        assert_eq!(r.singles(), [3333, 3334, 3333]);
        assert!(s.relabel([0, 0, 1]).is_err());
    }
}
