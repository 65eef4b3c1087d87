use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{byte_error, parse_error};
use crate::error::{Error, Result};
use crate::recording::EegRecording;

pub const MAGIC: &[u8; 8] = b"SWPHREC\0";
pub const RECORDING_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct RecordingHeader {
    pub fs: f64,
    pub label: String,
    pub count: u64,
    pub start_unix_ms: i64,
    pub provenance: String,
}

/// Binary layout, little-endian: magic, u16 version, f64 fs, u16 label
/// length and label bytes, u64 sample count, i64 start time in ms, u32
/// provenance length and bytes, then `count` f32 samples.
pub fn write_recording_binary<W: Write>(w: W, rec: &EegRecording, provenance: &str) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(MAGIC)?;
    w.write_all(&RECORDING_VERSION.to_le_bytes())?;
    w.write_all(&rec.fs.to_le_bytes())?;
    let label = rec.label.as_bytes();
    let label_len = u16::try_from(label.len()).map_err(|_| Error::Config("channel label too long".into()))?;
    w.write_all(&label_len.to_le_bytes())?;
    w.write_all(label)?;
    w.write_all(&(rec.samples.len() as u64).to_le_bytes())?;
    w.write_all(&rec.start_unix_ms.to_le_bytes())?;
    let prov = provenance.as_bytes();
    w.write_all(&(prov.len() as u32).to_le_bytes())?;
    w.write_all(prov)?;
    for &x in &rec.samples {
        w.write_all(&(x as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// One sample per line at f32 precision; `#` lines carry metadata.
pub fn write_recording_csv<W: Write>(w: W, rec: &EegRecording, provenance_header: &str) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(provenance_header.as_bytes())?;
    writeln!(w, "# fs={}", rec.fs)?;
    writeln!(w, "# label={}", rec.label)?;
    writeln!(w, "# start_unix_ms={}", rec.start_unix_ms)?;
    for &x in &rec.samples {
        writeln!(w, "{}", x as f32)?;
    }
    w.flush()?;
    Ok(())
}

struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    fn exact<const N: usize>(&mut self, source: &str, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => byte_error(source, self.offset, format!("file ends inside {what}")),
            _ => Error::Io(e),
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn bytes(&mut self, len: usize, source: &str, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => byte_error(source, self.offset, format!("file ends inside {what}")),
            _ => Error::Io(e),
        })?;
        self.offset += len as u64;
        Ok(buf)
    }
}

fn read_header<R: Read>(r: &mut CountingReader<R>, source: &str) -> Result<RecordingHeader> {
    let magic: [u8; 8] = r.exact(source, "magic")?;
    if &magic != MAGIC {
        return Err(byte_error(source, 0, "not a recording file (bad magic)"));
    }
    let version = u16::from_le_bytes(r.exact(source, "version")?);
    if version != RECORDING_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: RECORDING_VERSION,
        });
    }
    let at = r.offset;
    let fs = f64::from_le_bytes(r.exact(source, "sampling rate")?);
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(byte_error(source, at, format!("sampling rate {fs} must be positive")));
    }
    let label_len = u16::from_le_bytes(r.exact(source, "label length")?) as usize;
    let at = r.offset;
    let label = String::from_utf8(r.bytes(label_len, source, "label")?)
        .map_err(|_| byte_error(source, at, "label is not UTF-8"))?;
    let count = u64::from_le_bytes(r.exact(source, "sample count")?);
    let start_unix_ms = i64::from_le_bytes(r.exact(source, "start time")?);
    let prov_len = u32::from_le_bytes(r.exact(source, "provenance length")?) as usize;
    let at = r.offset;
    let provenance = String::from_utf8(r.bytes(prov_len, source, "provenance")?)
        .map_err(|_| byte_error(source, at, "provenance is not UTF-8"))?;
    Ok(RecordingHeader {
        fs,
        label,
        count,
        start_unix_ms,
        provenance,
    })
}

enum Body {
    Binary {
        reader: CountingReader<Box<dyn Read>>,
        remaining: u64,
        checked_end: bool,
    },
    Csv {
        lines: std::io::Lines<BufReader<Box<dyn Read>>>,
        pending: Option<(usize, String)>,
        line_no: usize,
    },
}

/// Sample-by-sample reader over either file variant. Nothing beyond the
/// current sample is read.
pub struct SampleSource {
    pub header: RecordingHeader,
    source: String,
    body: Body,
    index: u64,
}

impl SampleSource {
    pub fn from_binary(reader: Box<dyn Read>, source: &str) -> Result<Self> {
        let mut r = CountingReader {
            inner: reader,
            offset: 0,
        };
        let header = read_header(&mut r, source)?;
        Ok(Self {
            body: Body::Binary {
                remaining: header.count,
                reader: r,
                checked_end: false,
            },
            header,
            source: source.to_string(),
            index: 0,
        })
    }

    /// `fs_hint` applies when the file carries no `# fs=` line.
    pub fn from_csv(reader: Box<dyn Read>, source: &str, fs_hint: Option<f64>) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let mut header = RecordingHeader {
            fs: fs_hint.unwrap_or(f64::NAN),
            label: "Fpz-M2".into(),
            count: 0,
            start_unix_ms: 0,
            provenance: String::new(),
        };
        let mut line_no = 0;
        let mut pending = None;
        let mut meta = Vec::new();
        for line in lines.by_ref() {
            line_no += 1;
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(c) = t.strip_prefix('#') {
                let c = c.trim();
                if let Some((k, v)) = c.split_once('=').filter(|(k, _)| !k.contains(' ')) {
                    match k {
                        "fs" => {
                            header.fs = v
                                .trim()
                                .parse()
                                .map_err(|_| parse_error(source, line_no, format!("bad sampling rate `{v}`")))?
                        }
                        "label" => header.label = v.trim().to_string(),
                        "start_unix_ms" => {
                            header.start_unix_ms = v
                                .trim()
                                .parse()
                                .map_err(|_| parse_error(source, line_no, format!("bad start time `{v}`")))?
                        }
                        _ => meta.push(c.to_string()),
                    }
                } else {
                    meta.push(c.to_string());
                }
                continue;
            }
            pending = Some((line_no, line));
            break;
        }
        header.provenance = meta.join(" | ");
        if !(header.fs > 0.0 && header.fs.is_finite()) {
            return Err(parse_error(
                source,
                line_no.max(1),
                "sampling rate missing: add `# fs=<Hz>` or pass it",
            ));
        }
        Ok(Self {
            header,
            source: source.to_string(),
            body: Body::Csv {
                lines,
                pending,
                line_no,
            },
            index: 0,
        })
    }

    pub fn fs(&self) -> f64 {
        self.header.fs
    }

    fn next_sample(&mut self) -> Result<Option<f64>> {
        let source = &self.source;
        let x = match &mut self.body {
            Body::Binary {
                reader,
                remaining,
                checked_end,
            } => {
                if *remaining == 0 {
                    if !*checked_end {
                        *checked_end = true;
                        let mut probe = [0u8; 1];
                        if reader.inner.read(&mut probe)? != 0 {
                            return Err(byte_error(
                                source,
                                reader.offset,
                                "trailing bytes after declared samples",
                            ));
                        }
                    }
                    return Ok(None);
                }
                let at = reader.offset;
                let b: [u8; 4] = reader.exact(source, "sample body").map_err(|_| {
                    byte_error(
                        source,
                        at,
                        format!(
                            "declared {} samples but the body ends after {}",
                            self.header.count, self.index
                        ),
                    )
                })?;
                *remaining -= 1;
                f32::from_le_bytes(b) as f64
            }
            Body::Csv {
                lines,
                pending,
                line_no,
            } => {
                let (no, line) = match pending.take() {
                    Some(p) => p,
                    None => loop {
                        match lines.next() {
                            None => return Ok(None),
                            Some(l) => {
                                *line_no += 1;
                                let l = l?;
                                let t = l.trim();
                                if t.is_empty() || t.starts_with('#') {
                                    continue;
                                }
                                break (*line_no, l);
                            }
                        }
                    },
                };
                let t = line.trim();
                let v: f32 = t
                    .parse()
                    .map_err(|_| parse_error(source, no, format!("`{t}` is not a number")))?;
                v as f64
            }
        };
        if !x.is_finite() {
            return Err(Error::StreamIntegrity { index: self.index });
        }
        self.index += 1;
        Ok(Some(x))
    }
}

impl Iterator for SampleSource {
    type Item = Result<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_sample().transpose()
    }
}

pub fn is_binary_recording(path: &Path) -> Result<bool> {
    let mut f = super::open_file(path)?;
    let mut buf = [0u8; 8];
    let n = f.read(&mut buf)?;
    Ok(n == 8 && &buf == MAGIC)
}

/// Opens a recording of either variant for streaming.
pub fn open_samples(path: &Path, fs_hint: Option<f64>) -> Result<SampleSource> {
    let name = path.display().to_string();
    let binary = is_binary_recording(path)?;
    let f: Box<dyn Read> = Box::new(BufReader::new(super::open_file(path)?));
    if binary {
        SampleSource::from_binary(f, &name)
    } else {
        SampleSource::from_csv(f, &name, fs_hint)
    }
}

fn collect(src: SampleSource) -> Result<(EegRecording, String)> {
    let header = src.header.clone();
    let samples = src.collect::<Result<Vec<f64>>>()?;
    let mut rec = EegRecording::new(samples, header.fs)?;
    rec.label = header.label;
    rec.start_unix_ms = header.start_unix_ms;
    Ok((rec, header.provenance))
}

/// Whole binary recording plus its stored provenance string.
pub fn read_recording_binary<R: Read + 'static>(r: R, source: &str) -> Result<(EegRecording, String)> {
    collect(SampleSource::from_binary(Box::new(r), source)?)
}

pub fn read_recording_csv<R: Read + 'static>(
    r: R,
    source: &str,
    fs_hint: Option<f64>,
) -> Result<(EegRecording, String)> {
    collect(SampleSource::from_csv(Box::new(r), source, fs_hint)?)
}

pub fn load_recording(path: &Path, fs_hint: Option<f64>) -> Result<EegRecording> {
    Ok(collect(open_samples(path, fs_hint)?)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn rec() -> EegRecording {
        let xs: Vec<f64> = (0..500).map(|i| ((i as f32) * 0.37).sin() as f64 * 40.0).collect();
        let xs: Vec<f64> = xs.iter().map(|&x| x as f32 as f64).collect();
        let mut r = EegRecording::new(xs, 250.0).unwrap();
        r.label = "C3-M2".into();
        r.start_unix_ms = 1_700_000_000_123;
        r
    }

    #[test]
    fn binary_round_trip() {
        let r = rec();
        let mut buf = Vec::new();
        write_recording_binary(&mut buf, &r, "made by test").unwrap();
        let (back, prov) = read_recording_binary(Cursor::new(buf), "mem").unwrap();
        assert_eq!(back, r);
        assert_eq!(prov, "made by test");
    }

    #[test]
    fn csv_round_trip_matches_binary() {
        let r = rec();
        let mut buf = Vec::new();
        write_recording_csv(&mut buf, &r, "# swphase test\n").unwrap();
        let (back, _) = read_recording_csv(Cursor::new(buf), "mem", None).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_needs_fs_and_reports_line() {
        let err = read_recording_csv(Cursor::new(b"1\n2\n".to_vec()), "x.csv", None).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = read_recording_csv(Cursor::new(b"# fs=250\n1\n2\nabc\n".to_vec()), "x.csv", None).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "line 4"),
            e => panic!("{e}"),
        }
        let (r, _) = read_recording_csv(Cursor::new(b"1\n2\n".to_vec()), "x.csv", Some(100.0)).unwrap();
        assert_eq!(r.fs, 100.0);
    }

    #[test]
    fn binary_errors() {
        let r = rec();
        let mut buf = Vec::new();
        write_recording_binary(&mut buf, &r, "").unwrap();
        let mut bad = buf.clone();
        bad[8] = 2;
        assert!(matches!(
            read_recording_binary(Cursor::new(bad), "m").unwrap_err(),
            Error::VersionMismatch { found: 2, expected: 1 }
        ));
        let short = buf[..buf.len() - 2].to_vec();
        match read_recording_binary(Cursor::new(short), "m").unwrap_err() {
            Error::Parse { location, .. } => assert!(location.starts_with("byte ")),
            e => panic!("{e}"),
        }
        let mut long = buf.clone();
        long.push(0);
        assert!(read_recording_binary(Cursor::new(long), "m").is_err());
        assert!(read_recording_binary(Cursor::new(b"NOTAFILE".to_vec()), "m").is_err());
    }

    #[test]
    fn non_finite_sample_refused() {
        let err = read_recording_csv(Cursor::new(b"# fs=10\n1\nNaN\n".to_vec()), "m", None).unwrap_err();
        assert!(matches!(err, Error::StreamIntegrity { index: 1 }));
    }
}
