//! File formats for recordings, pain reports and channel flag lists.
//!
//! Binary container layout (all little-endian):
//!
//! ```text
//! "PNB1"                      4 bytes
//! channel count               u32
//! sample rate (Hz)            f64
//! per channel: name length    u32, then UTF-8 bytes
//! samples                     f32, channel-major (all of channel 0 first)
//! ```
//!
//! The per-channel sample count is implied by the remaining byte length.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{PainReport, Recording};

pub const MAGIC: &[u8; 4] = b"PNB1";

pub fn write_container<T: Scalar, W: Write>(rec: &Recording<T>, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(rec.n_channels() as u32).to_le_bytes())?;
    w.write_all(&rec.sample_rate_hz().to_le_bytes())?;
    for name in rec.channel_names() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    let mut buf = Vec::with_capacity(rec.n_samples() * 4);
    for row in rec.samples().rows() {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

pub fn read_container<T: Scalar, R: Read>(mut r: R) -> Result<Recording<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("reading container: {e}")))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, expected PNB1".into()));
    }
    let n_channels = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
    let fs = f64::from_le_bytes(cur.take(8)?.try_into().unwrap());
    let mut names = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let len = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|e| Error::Format(format!("channel name is not UTF-8: {e}")))?;
        names.push(name.to_string());
    }
    let body = &bytes[cur.pos..];
    if n_channels == 0 {
        if !body.is_empty() {
            return Err(Error::Format("sample data present with zero channels".into()));
        }
        return Recording::new(Array2::zeros((0, 0)), fs, names);
    }
    if body.len() % (4 * n_channels) != 0 {
        return Err(Error::Format(format!(
            "body of {} bytes is not a whole number of f32 frames for {n_channels} channels",
            body.len()
        )));
    }
    let n = body.len() / (4 * n_channels);
    let samples = Array2::from_shape_fn((n_channels, n), |(c, t)| {
        let off = 4 * (c * n + t);
        T::lit(f32::from_le_bytes(body[off..off + 4].try_into().unwrap()) as f64)
    });
    Recording::new(samples, fs, names)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("truncated container header".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

pub fn save_container<T: Scalar>(rec: &Recording<T>, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_container(rec, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn load_container<T: Scalar>(path: &Path) -> Result<Recording<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_container(BufReader::new(f)).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Reads a CSV whose first column is time in seconds and whose remaining
/// columns are channels (header row gives channel names). The sample rate is
/// taken from the time step, which must be uniform to 0.1%.
pub fn read_recording_csv<T: Scalar, R: Read>(r: R) -> Result<Recording<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("recording CSV header: {e}")))?
        .clone();
    if headers.len() < 2 {
        return Err(Error::Format(
            "recording CSV needs a time column and at least one channel".into(),
        ));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let mut times = Vec::new();
    let mut columns: Vec<Vec<T>> = vec![Vec::new(); names.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("recording CSV row {}: {e}", line + 1)))?;
        if rec.len() != headers.len() {
            return Err(Error::Format(format!(
                "recording CSV row {} has {} fields",
                line + 1,
                rec.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("recording CSV row {}: `{s}`: {e}", line + 1)))
        };
        times.push(parse(&rec[0])?);
        for (c, field) in rec.iter().skip(1).enumerate() {
            columns[c].push(T::lit(parse(field)?));
        }
    }
    if times.len() < 2 {
        return Err(Error::Format("recording CSV needs at least two rows".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Format("time column must increase".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-3 * dt {
            return Err(Error::Format(format!("non-uniform time step near t = {}", w[0])));
        }
    }
    let n = times.len();
    let samples = Array2::from_shape_fn((names.len(), n), |(c, t)| columns[c][t]);
    Recording::new(samples, 1.0 / dt, names)
}

pub fn load_recording_csv<T: Scalar>(path: &Path) -> Result<Recording<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_recording_csv(BufReader::new(f))
}

/// Loads a recording, choosing the format by extension (`.csv` or container).
pub fn load_recording<T: Scalar>(path: &Path) -> Result<Recording<T>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => load_recording_csv(path),
        _ => load_container(path),
    }
}

#[derive(serde::Deserialize, serde::Serialize)]
struct ReportRow {
    timestamp_s: f64,
    vas: u8,
}

pub fn read_reports<R: Read>(r: R) -> Result<Vec<PainReport>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ReportRow>().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("reports CSV row {}: {e}", i + 1)))?;
        if row.vas > 10 {
            return Err(Error::Format(format!(
                "reports CSV row {}: VAS {} outside 0..=10",
                i + 1,
                row.vas
            )));
        }
        out.push(PainReport {
            timestamp_s: row.timestamp_s,
            vas: row.vas,
        });
    }
    Ok(out)
}

pub fn load_reports(path: &Path) -> Result<Vec<PainReport>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_reports(BufReader::new(f)).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_reports(reports: &[PainReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in reports {
        w.serialize(ReportRow {
            timestamp_s: r.timestamp_s,
            vas: r.vas,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Channel flag list: one channel name per line, `#` starts a comment.
pub fn parse_flag_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn load_flag_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_flag_list(&text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_roundtrip_is_exact_for_f32_values() {
        let samples = Array2::from_shape_fn((3, 7), |(c, t)| (c as f64 - 1.0) * 0.25 + t as f64);
        let rec = Recording::new(samples, 500.0, vec!["LA1".into(), "LA2".into(), "RÖ3".into()]).unwrap();
        let mut buf = Vec::new();
        write_container(&rec, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"PNB1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 500.0);
        let back: Recording<f64> = read_container(&buf[..]).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn container_rejects_garbage() {
        assert!(read_container::<f64, _>(&b"PNB2\0\0\0\0"[..]).is_err());
        let rec = Recording::new(Array2::<f64>::zeros((2, 3)), 250.0, vec!["a".into(), "b".into()]).unwrap();
        let mut buf = Vec::new();
        write_container(&rec, &mut buf).unwrap();
        buf.pop();
        assert!(read_container::<f64, _>(&buf[..]).is_err());
    }

    #[test]
    fn csv_import_infers_rate() {
        let text = "time,A,B\n0.000,1,2\n0.002,3,4\n0.004,5,6\n";
        let rec: Recording<f64> = read_recording_csv(text.as_bytes()).unwrap();
        assert!((rec.sample_rate_hz() - 500.0).abs() < 1e-9);
        assert_eq!(rec.channel_names(), &["A".to_string(), "B".to_string()]);
        assert_eq!(rec.samples().row(1).to_vec(), vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn reports_csv() {
        let text = "timestamp_s,vas\n600,3\n1200.5,8\n";
        let reports = read_reports(text.as_bytes()).unwrap();
        assert_eq!(
            reports,
            vec![
                PainReport {
                    timestamp_s: 600.0,
                    vas: 3
                },
                PainReport {
                    timestamp_s: 1200.5,
                    vas: 8
                },
            ]
        );
        assert!(read_reports("timestamp_s,vas\n1,11\n".as_bytes()).is_err());
    }

    #[test]
    fn flag_list_parsing() {
        assert_eq!(
            parse_flag_list("# noisy\nLA1\n\n  RB2 # artifact\n"),
            vec!["LA1", "RB2"]
        );
    }
}
