//! On-disk dataset formats.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! "SSVB" | version u16 | sample_rate u32 | channel_count u16 | n_freqs u16
//! | n_freqs x f64 frequencies
//! | trial records until EOF:
//!     subject_id u16 | session_id u16 | label_index u16 | n_samples u32
//!     | channel_count * n_samples f32 samples, channel-major
//! ```
//!
//! CSV layout: a directory of per-trial files, read in file-name order. Each
//! file starts with the header `subject,session,label_hz,rate`, followed by a
//! row with those values, followed by one row per sample with one column per
//! channel. An optional `stimuli.txt` lists the stimulus set as
//! comma-separated Hz values; it defaults to the reference set.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use super::{Dataset, Trial, DEFAULT_STIMULUS_FREQUENCIES};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SSVB";
const VERSION: u16 = 1;
const CSV_HEADER: [&str; 4] = ["subject", "session", "label_hz", "rate"];
const STIMULI_FILE: &str = "stimuli.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Binary,
    Csv,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bin" | "ssvb" => Ok(DatasetFormat::Binary),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(Error::param(
                "format",
                format!("unknown dataset format `{other}`"),
            )),
        }
    }
}

/// Ingestion options.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoadOptions {
    /// Expected trial duration. Every trial must hold exactly
    /// `duration_s * sample_rate` samples. When `None`, every trial must
    /// match the length of the first one.
    pub duration_s: Option<f64>,
}

/// Reads a dataset from `path`.
pub fn load_dataset(path: &Path, format: DatasetFormat, opts: LoadOptions) -> Result<Dataset> {
    let ds = match format {
        DatasetFormat::Binary => load_binary(path)?,
        DatasetFormat::Csv => load_csv(path)?,
    };
    check_lengths(&ds, opts)?;
    log::debug!(
        "loaded {} trials ({} channels, {} Hz) from {}",
        ds.len(),
        ds.channel_count(),
        ds.sample_rate(),
        path.display()
    );
    Ok(ds)
}

/// Writes `dataset` to `path`. For CSV, `path` is a directory that is
/// created if missing.
pub fn save_dataset(dataset: &Dataset, path: &Path, format: DatasetFormat) -> Result<()> {
    match format {
        DatasetFormat::Binary => save_binary(dataset, path),
        DatasetFormat::Csv => save_csv(dataset, path),
    }
}

fn check_lengths(ds: &Dataset, opts: LoadOptions) -> Result<()> {
    let expected = match opts.duration_s {
        Some(d) => {
            let n = d * ds.sample_rate();
            if !(n.is_finite() && n > 0.0) || (n - n.round()).abs() > 1e-9 {
                return Err(Error::param(
                    "duration",
                    format!("{d} s is not a whole number of samples at {} Hz", ds.sample_rate()),
                ));
            }
            Some(n.round() as usize)
        }
        None => ds.trials().first().map(Trial::n_samples),
    };
    if let Some(expected) = expected {
        for (index, t) in ds.trials().iter().enumerate() {
            if t.n_samples() != expected {
                return Err(Error::InvalidTrial {
                    index,
                    reason: format!("has {} samples, expected {expected}", t.n_samples()),
                });
            }
        }
    }
    Ok(())
}

fn read_u16(r: &mut impl Read) -> std::io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn header_err(e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::Format("truncated header".into())
    } else {
        Error::Io(e)
    }
}

/// Reads the first field of a record; `None` at a clean end of file.
fn read_record_start(r: &mut impl Read) -> Result<Option<u16>> {
    let mut b = [0u8; 2];
    let mut got = 0;
    while got < 2 {
        match r.read(&mut b[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Format("truncated trial record".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(u16::from_le_bytes(b)))
}

fn load_binary(path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(header_err)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic bytes {magic:?}")));
    }
    let version = read_u16(&mut r).map_err(header_err)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rate = read_u32(&mut r).map_err(header_err)?;
    let channels = read_u16(&mut r).map_err(header_err)? as usize;
    let n_freqs = read_u16(&mut r).map_err(header_err)? as usize;
    if rate == 0 || channels == 0 || n_freqs == 0 {
        return Err(Error::Format(format!(
            "header declares rate={rate}, channels={channels}, n_freqs={n_freqs}"
        )));
    }
    let freqs = (0..n_freqs)
        .map(|_| read_f64(&mut r))
        .collect::<std::io::Result<Vec<f64>>>()
        .map_err(header_err)?;
    let rate = rate as f64;

    let mut trials = Vec::new();
    while let Some(subject) = read_record_start(&mut r)? {
        let index = trials.len();
        let trunc = |e: std::io::Error| {
            if e.kind() == ErrorKind::UnexpectedEof {
                Error::InvalidTrial {
                    index,
                    reason: "truncated record".into(),
                }
            } else {
                Error::Io(e)
            }
        };
        let session = read_u16(&mut r).map_err(trunc)?;
        let label_index = read_u16(&mut r).map_err(trunc)? as usize;
        let n_samples = read_u32(&mut r).map_err(trunc)? as usize;
        let label = *freqs.get(label_index).ok_or_else(|| Error::InvalidTrial {
            index,
            reason: format!("label index {label_index} outside stimulus set of {n_freqs}"),
        })?;
        let mut raw = vec![0u8; 4 * channels * n_samples];
        r.read_exact(&mut raw).map_err(trunc)?;
        let samples = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let t = Trial::new(samples, channels, label, subject, session, rate).map_err(|e| {
            Error::InvalidTrial {
                index,
                reason: e.to_string(),
            }
        })?;
        trials.push(t);
    }
    Dataset::new(trials, freqs, channels, rate)
}

fn save_binary(ds: &Dataset, path: &Path) -> Result<()> {
    let rate = ds.sample_rate();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(Error::param(
            "sample_rate",
            format!("{rate} Hz cannot be stored as an integer rate"),
        ));
    }
    let channels = u16::try_from(ds.channel_count())
        .map_err(|_| Error::param("channel_count", "exceeds u16"))?;
    let n_freqs = u16::try_from(ds.stimulus_frequencies().len())
        .map_err(|_| Error::param("stimulus_frequencies", "more than u16::MAX entries"))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(rate as u32).to_le_bytes())?;
    w.write_all(&channels.to_le_bytes())?;
    w.write_all(&n_freqs.to_le_bytes())?;
    for f in ds.stimulus_frequencies() {
        w.write_all(&f.to_le_bytes())?;
    }
    for (index, t) in ds.trials().iter().enumerate() {
        let label = ds.label_index(t.label()).expect("labels validated on construction") as u16;
        let n = u32::try_from(t.n_samples()).map_err(|_| Error::InvalidTrial {
            index,
            reason: "too many samples for u32".into(),
        })?;
        w.write_all(&t.subject_id().to_le_bytes())?;
        w.write_all(&t.session_id().to_le_bytes())?;
        w.write_all(&label.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        for &v in t.samples() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    Ok(files)
}

fn read_stimuli(dir: &Path) -> Result<Vec<f64>> {
    let p = dir.join(STIMULI_FILE);
    if !p.exists() {
        return Ok(DEFAULT_STIMULUS_FREQUENCIES.to_vec());
    }
    fs::read_to_string(&p)?
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("{}: bad frequency `{s}`", p.display())))
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str, file: &Path) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Format(format!("{}: malformed {what}", file.display())))
}

fn read_csv_trial(file: &Path) -> Result<Trial> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(file)
        .map_err(|e| Error::Format(format!("{}: {e}", file.display())))?;
    let mut records = rdr.records();
    let mut next = |what: &str| -> Result<csv::StringRecord> {
        records
            .next()
            .ok_or_else(|| Error::Format(format!("{}: missing {what}", file.display())))?
            .map_err(|e| Error::Format(format!("{}: {e}", file.display())))
    };
    let header = next("header")?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Format(format!(
            "{}: header must be `{}`",
            file.display(),
            CSV_HEADER.join(",")
        )));
    }
    let meta = next("metadata row")?;
    let subject: u16 = parse_field(&meta, 0, "subject", file)?;
    let session: u16 = parse_field(&meta, 1, "session", file)?;
    let label: f64 = parse_field(&meta, 2, "label_hz", file)?;
    let rate: f64 = parse_field(&meta, 3, "rate", file)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", file.display())))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Format(format!("{}: bad sample: {e}", file.display())))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "{}: row {} has {} columns, expected {}",
                    file.display(),
                    rows.len() + 3,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let n_channels = rows.first().map_or(0, Vec::len);
    if n_channels == 0 {
        return Err(Error::Format(format!("{}: no samples", file.display())));
    }
    let n = rows.len();
    let mut flat = vec![0.0; n_channels * n];
    for (i, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            flat[c * n + i] = v;
        }
    }
    Trial::new(flat, n_channels, label, subject, session, rate)
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let (files, freqs) = if path.is_dir() {
        (csv_files(path)?, read_stimuli(path)?)
    } else {
        let dir = path.parent().unwrap_or(Path::new("."));
        (vec![path.to_path_buf()], read_stimuli(dir)?)
    };
    let mut trials = Vec::with_capacity(files.len());
    for (index, f) in files.iter().enumerate() {
        let t = read_csv_trial(f).map_err(|e| match e {
            Error::Format(_) | Error::Io(_) => e,
            other => Error::InvalidTrial {
                index,
                reason: other.to_string(),
            },
        })?;
        trials.push(t);
    }
    let (channels, rate) = trials
        .first()
        .map_or((1, super::DEFAULT_SAMPLE_RATE), |t| (t.n_channels(), t.sample_rate()));
    Dataset::new(trials, freqs, channels, rate)
}

fn save_csv(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let stimuli: Vec<String> = ds.stimulus_frequencies().iter().map(|f| f.to_string()).collect();
    fs::write(dir.join(STIMULI_FILE), stimuli.join(",") + "\n")?;
    for (i, t) in ds.trials().iter().enumerate() {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .from_path(dir.join(format!("trial_{i:05}.csv")))
            .map_err(|e| Error::Format(e.to_string()))?;
        let wr = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(CSV_HEADER).map_err(wr)?;
        w.write_record([
            t.subject_id().to_string(),
            t.session_id().to_string(),
            t.label().to_string(),
            t.sample_rate().to_string(),
        ])
        .map_err(wr)?;
        let chans: Vec<&[f64]> = t.channels().collect();
        for n in 0..t.n_samples() {
            w.write_record(chans.iter().map(|c| c[n].to_string())).map_err(wr)?;
        }
        w.flush()?;
    }
    Ok(())
}
