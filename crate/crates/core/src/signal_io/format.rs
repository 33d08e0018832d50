//! CSV and raw-binary recording files.
//!
//! CSV layout:
//!
//! ```text
//! rate_hz=250
//! Fp1,Fp2,F7
//! 1.25,-3.5,0.75
//! ...
//! ```
//!
//! Raw-binary layout (all little-endian):
//!
//! ```text
//! b"EEGR" | u32 channel_count | f64 rate_hz | u64 samples_per_channel
//! channel_count x (u32 name_len | name_len bytes of UTF-8)
//! channel_count x samples_per_channel x f32   (channel-major)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Channel, RawRecording, Result, SignalError};

pub const BINARY_MAGIC: &[u8; 4] = b"EEGR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingFormat {
    Csv,
    RawBinary,
}

impl RecordingFormat {
    /// `.csv` is CSV, everything else is treated as raw binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::RawBinary,
        }
    }
}

pub fn load_recording(path: &Path, format: RecordingFormat) -> Result<RawRecording> {
    let bytes = fs::read(path).map_err(|source| SignalError::Io { path: path.into(), source })?;
    match format {
        RecordingFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|e| SignalError::Csv {
                path: path.into(),
                line: 0,
                msg: format!("not valid UTF-8: {e}"),
            })?;
            read_csv(&text, path)
        }
        RecordingFormat::RawBinary => read_binary(&bytes, path),
    }
}

pub fn read_csv(text: &str, path: &Path) -> Result<RawRecording> {
    let err = |line: usize, msg: String| SignalError::Csv { path: path.into(), line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (n, header) = lines.next().ok_or_else(|| err(1, "missing rate_hz header".into()))?;
    let rate_text = header
        .trim()
        .strip_prefix("rate_hz=")
        .ok_or_else(|| err(n, format!("expected `rate_hz=<float>`, found {header:?}")))?;
    let rate: f64 = rate_text
        .trim()
        .parse()
        .map_err(|_| err(n, format!("invalid sample rate {rate_text:?}")))?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(err(n, format!("sample rate must be positive, got {rate}")));
    }

    let (n, names_line) = lines.next().ok_or_else(|| err(2, "missing channel-name header".into()))?;
    let names: Vec<String> = names_line.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(|s| s.is_empty()) {
        return Err(err(n, "empty channel name".into()));
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() > names.len() {
            return Err(err(n, format!("{} fields but {} channels", fields.len(), names.len())));
        }
        // A row missing a value means that channel is shorter than the others.
        if let Some(missing) = (0..names.len()).find(|&i| fields.get(i).is_none_or(|f| f.is_empty())) {
            return Err(err(
                n,
                format!("ragged channel lengths: channel {:?} has no sample on this row", names[missing]),
            ));
        }
        for (col, field) in columns.iter_mut().zip(&fields) {
            let v: f64 = field.parse().map_err(|_| err(n, format!("invalid sample {field:?}")))?;
            col.push(v);
        }
    }

    let channels = names.into_iter().zip(columns).map(|(name, s)| Channel::new(name, s)).collect();
    RawRecording::new(channels, rate)
}

pub fn write_csv(rec: &RawRecording, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("rate_hz={}\n", rec.sample_rate_hz()));
    let names: Vec<&str> = rec.channels().iter().map(|c| c.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for i in 0..rec.sample_count() {
        let row: Vec<String> = rec.channels().iter().map(|c| c.samples[i].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| SignalError::Io { path: path.into(), source })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(SignalError::Binary {
                path: PathBuf::from(self.path),
                offset: self.pos as u64,
                msg: format!("truncated file while reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn fail(&self, offset: usize, msg: String) -> SignalError {
        SignalError::Binary { path: PathBuf::from(self.path), offset: offset as u64, msg }
    }
}

pub fn read_binary(bytes: &[u8], path: &Path) -> Result<RawRecording> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if cur.take(4, "magic")? != BINARY_MAGIC {
        return Err(cur.fail(0, "missing EEGR magic".into()));
    }
    let n_channels = cur.u32("channel count")? as usize;
    let rate_at = cur.pos;
    let rate = cur.f64("sample rate")?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(cur.fail(rate_at, format!("sample rate must be positive, got {rate}")));
    }
    let per_channel = cur.u64("samples per channel")? as usize;

    let mut names = Vec::with_capacity(n_channels);
    for i in 0..n_channels {
        let at = cur.pos;
        let len = cur.u32("channel name length")? as usize;
        let raw = cur.take(len, "channel name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| cur.fail(at, format!("channel {i} name is not UTF-8")))?;
        names.push(name.to_string());
    }

    let needed = n_channels.checked_mul(per_channel).and_then(|n| n.checked_mul(4));
    let remaining = bytes.len() - cur.pos;
    match needed {
        Some(n) if n == remaining => {}
        _ => {
            return Err(cur.fail(
                cur.pos,
                format!(
                    "sample block holds {remaining} bytes, header declares {n_channels} x {per_channel} f32 samples"
                ),
            ))
        }
    }

    let mut channels = Vec::with_capacity(n_channels);
    for name in names {
        let raw = cur.take(per_channel * 4, "samples")?;
        let samples = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        channels.push(Channel::new(name, samples));
    }
    RawRecording::new(channels, rate)
}

/// Samples are narrowed to f32 on disk.
pub fn write_binary(rec: &RawRecording, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(rec.channels().len() as u32).to_le_bytes());
    out.extend_from_slice(&rec.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(rec.sample_count() as u64).to_le_bytes());
    for ch in rec.channels() {
        out.extend_from_slice(&(ch.name.len() as u32).to_le_bytes());
        out.extend_from_slice(ch.name.as_bytes());
    }
    for ch in rec.channels() {
        for &s in &ch.samples {
            out.extend_from_slice(&(s as f32).to_le_bytes());
        }
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|source| SignalError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn parses_two_channel_csv() {
        let rec = read_csv("rate_hz=250\nA,B\n1,2\n3,4\n5,6\n7,8\n", p()).unwrap();
        assert_eq!(rec.channels().len(), 2);
        assert_eq!(rec.sample_count(), 4);
        assert_eq!(rec.sample_rate_hz(), 250.0);
        assert_eq!(rec.channels()[1].samples, vec![2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn ragged_csv_reports_line() {
        let err = read_csv("rate_hz=250\nA,B\n1,2\n3,4\n5\n", p()).unwrap_err();
        match err {
            SignalError::Csv { line, msg, .. } => {
                assert_eq!(line, 5);
                assert!(msg.contains("ragged"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = read_csv("rate_hz=250\nA,B\n1,2\n3,\n", p()).unwrap_err();
        assert!(matches!(err, SignalError::Csv { line: 4, .. }));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(read_csv("", p()), Err(SignalError::Csv { line: 1, .. })));
        assert!(matches!(read_csv("A,B\n1,2\n", p()), Err(SignalError::Csv { line: 1, .. })));
        assert!(matches!(read_csv("rate_hz=0\nA\n1\n", p()), Err(SignalError::Csv { line: 1, .. })));
        assert!(matches!(read_csv("rate_hz=-5\nA\n1\n", p()), Err(SignalError::Csv { line: 1, .. })));
        assert!(matches!(read_csv("rate_hz=250\n", p()), Err(SignalError::Csv { line: 2, .. })));
        assert!(matches!(read_csv("rate_hz=250\nA\nx\n", p()), Err(SignalError::Csv { line: 3, .. })));
    }

    #[test]
    fn binary_round_trip_and_truncation() {
        let rec = RawRecording::new(
            vec![Channel::new("Fp1", vec![1.5, -2.0, 3.25]), Channel::new("Cz", vec![0.0, 1.0, 2.0])],
            200.0,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.eegr");
        write_binary(&rec, &path).unwrap();
        let back = load_recording(&path, RecordingFormat::from_path(&path)).unwrap();
        assert_eq!(back, rec);

        let bytes = std::fs::read(&path).unwrap();
        let err = read_binary(&bytes[..bytes.len() - 2], &path).unwrap_err();
        assert!(matches!(err, SignalError::Binary { .. }));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_binary(&bad, &path), Err(SignalError::Binary { offset: 0, .. })));
        let mut zero_rate = bytes;
        zero_rate[8..16].copy_from_slice(&0.0f64.to_le_bytes());
        assert!(matches!(read_binary(&zero_rate, &path), Err(SignalError::Binary { offset: 8, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_recording(Path::new("/nonexistent/x.csv"), RecordingFormat::Csv).unwrap_err();
        assert!(matches!(err, SignalError::Io { .. }));
    }
}
