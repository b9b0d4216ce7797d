//! Fixed-length summary records.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `IQSR`                  |
//! | 4      | 1    | version (1)                   |
//! | 5      | 1    | flags (bit 0: reset mode)     |
//! | 6      | 2    | grid size `M` (u16)           |
//! | 8      | 8    | agent id (u64)                |
//! | 16     | 8    | epoch (u64)                   |
//! | 24     | 8    | count (u64)                   |
//! | 32     | 8    | min (f64)                     |
//! | 40     | 8    | max (f64)                     |
//! | 48     | 8M   | probability levels (f64)      |
//! | 48+8M  | 8M   | quantile values (f64)         |
//!
//! A record is exactly `48 + 16 M` bytes.

use crate::error::WireError;
use crate::summary::{ProbabilityGrid, QuantileSummary};

pub const MAGIC: [u8; 4] = *b"IQSR";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 48;

/// Record length for a grid of `m` levels.
pub const fn record_len(m: usize) -> usize {
    HEADER_LEN + 16 * m
}

/// Flag byte carried in each record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct RecordFlags(pub u8);

impl RecordFlags {
    pub const RESET: u8 = 0b0000_0001;

    pub fn cumulative() -> Self {
        Self(0)
    }

    pub fn reset() -> Self {
        Self(Self::RESET)
    }

    /// True when the agent clears its summary every interval.
    pub fn is_reset(self) -> bool {
        self.0 & Self::RESET != 0
    }
}

/// A decoded record.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub agent_id: u64,
    pub flags: RecordFlags,
    pub summary: QuantileSummary,
}

pub fn encode_record(
    s: &QuantileSummary,
    agent_id: u64,
    flags: RecordFlags,
) -> Result<Vec<u8>, WireError> {
    let (Some(min), Some(max)) = (s.min(), s.max()) else {
        return Err(WireError::Unencodable("empty summary".into()));
    };
    let m = s.grid().len();
    let m16 = u16::try_from(m)
        .map_err(|_| WireError::Unencodable(format!("grid size {m} exceeds 65535")))?;
    if let Some(v) = s.values().iter().chain([&min, &max]).find(|v| !v.is_finite()) {
        return Err(WireError::Unencodable(format!("non-finite field {v}")));
    }

    let mut out = Vec::with_capacity(record_len(m));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(flags.0);
    out.extend_from_slice(&m16.to_le_bytes());
    out.extend_from_slice(&agent_id.to_le_bytes());
    out.extend_from_slice(&s.epoch().to_le_bytes());
    out.extend_from_slice(&s.count().to_le_bytes());
    out.extend_from_slice(&min.to_le_bytes());
    out.extend_from_slice(&max.to_le_bytes());
    for p in s.grid().levels() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for v in s.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    debug_assert_eq!(out.len(), record_len(m));
    Ok(out)
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8-byte slice"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8-byte slice"))
}

/// Reads the grid size from a record prefix, checking magic and version.
/// Returns the full record length implied by the header.
pub fn peek_record_len(bytes: &[u8]) -> Result<usize, WireError> {
    if bytes.len() < MAGIC.len() {
        return Err(WireError::Length {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(WireError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(WireError::Length {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if bytes[4] != VERSION {
        return Err(WireError::UnsupportedVersion(bytes[4]));
    }
    let m = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    Ok(record_len(m))
}

/// Decodes exactly one record; any trailing or missing byte is an error.
pub fn decode_record(bytes: &[u8]) -> Result<SummaryRecord, WireError> {
    let expected = peek_record_len(bytes)?;
    if bytes.len() != expected {
        return Err(WireError::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let m = (expected - HEADER_LEN) / 16;
    let flags = RecordFlags(bytes[5]);
    let agent_id = u64_at(bytes, 8);
    let epoch = u64_at(bytes, 16);
    let count = u64_at(bytes, 24);
    let min = f64_at(bytes, 32);
    let max = f64_at(bytes, 40);
    let levels: Vec<f64> = (0..m).map(|j| f64_at(bytes, HEADER_LEN + 8 * j)).collect();
    let values: Vec<f64> = (0..m)
        .map(|j| f64_at(bytes, HEADER_LEN + 8 * (m + j)))
        .collect();

    let corrupt = |e: crate::error::Error| WireError::Corrupt(e.to_string());
    let grid = ProbabilityGrid::new(levels).map_err(corrupt)?;
    let summary =
        QuantileSummary::from_parts(grid, values, count, min, max, epoch).map_err(corrupt)?;
    Ok(SummaryRecord {
        agent_id,
        flags,
        summary,
    })
}

/// Iterates the records of a concatenated record log. Each item is the byte
/// slice of one record, delimited by the grid size in its own header.
pub struct RecordLog<'a> {
    rest: &'a [u8],
}

impl<'a> RecordLog<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { rest: bytes }
    }
}

impl<'a> Iterator for RecordLog<'a> {
    type Item = Result<&'a [u8], WireError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.rest.is_empty() {
            return None;
        }
        match peek_record_len(self.rest) {
            Ok(len) if len <= self.rest.len() => {
                let (head, tail) = self.rest.split_at(len);
                self.rest = tail;
                Some(Ok(head))
            }
            Ok(len) => {
                let actual = self.rest.len();
                self.rest = &[];
                Some(Err(WireError::Length {
                    expected: len,
                    actual,
                }))
            }
            Err(e) => {
                self.rest = &[];
                Some(Err(e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> QuantileSummary {
        let grid = ProbabilityGrid::new(vec![0.5]).unwrap();
        QuantileSummary::from_parts(grid, vec![2.5], 4, 1.0, 4.0, 1).unwrap()
    }

    #[test]
    fn layout_of_single_level_record() {
        let bytes = encode_record(&sample(), 7, RecordFlags::cumulative()).unwrap();
        assert_eq!(bytes.len(), 64);
        assert_eq!(&bytes[..4], &[0x49, 0x51, 0x53, 0x52]);
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[6..8], &[1, 0]);
        assert_eq!(&bytes[8..16], &7u64.to_le_bytes());
        assert_eq!(&bytes[56..64], &2.5f64.to_le_bytes());
    }

    #[test]
    fn default_grid_record_is_192_bytes() {
        assert_eq!(record_len(9), 192);
    }

    #[test]
    fn roundtrip_preserves_flags() {
        let bytes = encode_record(&sample(), 3, RecordFlags::reset()).unwrap();
        let rec = decode_record(&bytes).unwrap();
        assert_eq!(rec.agent_id, 3);
        assert!(rec.flags.is_reset());
        assert_eq!(rec.summary, sample());
    }

    #[test]
    fn empty_summary_is_not_encodable() {
        let s = QuantileSummary::empty(ProbabilityGrid::default());
        assert!(encode_record(&s, 1, RecordFlags::default()).is_err());
    }

    #[test]
    fn decode_errors() {
        let good = encode_record(&sample(), 7, RecordFlags::default()).unwrap();

        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert_eq!(decode_record(&bad), Err(WireError::BadMagic));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(decode_record(&bad), Err(WireError::UnsupportedVersion(2)));

        assert!(matches!(
            decode_record(&good[..63]),
            Err(WireError::Length { expected: 64, actual: 63 })
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(decode_record(&long), Err(WireError::Length { .. })));
        assert!(matches!(decode_record(&[]), Err(WireError::Length { .. })));

        let mut nan = good.clone();
        nan[56..64].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_record(&nan), Err(WireError::Corrupt(_))));

        let mut above_max = good.clone();
        above_max[56..64].copy_from_slice(&9.0f64.to_le_bytes());
        assert!(matches!(decode_record(&above_max), Err(WireError::Corrupt(_))));

        let mut zero_count = good;
        zero_count[24..32].copy_from_slice(&0u64.to_le_bytes());
        assert!(matches!(decode_record(&zero_count), Err(WireError::Corrupt(_))));
    }

    #[test]
    fn error_messages() {
        assert_eq!(WireError::BadMagic.to_string(), "not a summary record");
        assert!(WireError::UnsupportedVersion(9).to_string().starts_with("unsupported version"));
        assert!(WireError::Length { expected: 1, actual: 2 }
            .to_string()
            .starts_with("truncated/overlong"));
        assert!(WireError::Corrupt("x".into()).to_string().starts_with("corrupt record"));
    }

    #[test]
    fn record_log_splits_and_reports_tail() {
        let a = encode_record(&sample(), 1, RecordFlags::default()).unwrap();
        let mut log = a.clone();
        log.extend_from_slice(&a);
        log.extend_from_slice(&a[..10]);
        let parts: Vec<_> = RecordLog::new(&log).collect();
        assert_eq!(parts.len(), 3);
        assert!(parts[0].is_ok() && parts[1].is_ok());
        assert!(parts[2].is_err());
    }
}
