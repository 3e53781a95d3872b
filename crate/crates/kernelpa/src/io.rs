//! Signal record I/O.
//!
//! Binary records are little-endian IEEE-754 doubles interleaved I,Q,I,Q,…
//! with a UTF-8 sidecar (`<path>.meta`) holding `key=value` metadata lines:
//! `sample_rate_hz`, `bandwidth_hz`, `label`, `n_samples`. A CSV alternative
//! (header `i,q`, one sample per row) is provided for interoperability; it
//! uses the same sidecar so rate and bandwidth metadata survive a round trip.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

/// On-disk representation of a signal record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    Binary,
    Csv,
}

impl SignalFormat {
    /// Parses the CLI spelling (`bin` or `csv`).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "bin" => Ok(SignalFormat::Binary),
            "csv" => Ok(SignalFormat::Csv),
            other => Err(Error::InvalidParameter(format!(
                "unknown signal format '{other}' (expected bin or csv)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalFormat::Binary => "bin",
            SignalFormat::Csv => "csv",
        }
    }
}

/// Metadata carried by a record's sidecar file.
#[derive(Debug, Clone, PartialEq)]
pub struct SidecarMeta {
    pub sample_rate_hz: f64,
    pub bandwidth_hz: f64,
    pub label: String,
    pub n_samples: usize,
}

/// Sidecar path for a record: the record path with `.meta` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".meta");
    PathBuf::from(name)
}

/// Decodes interleaved little-endian f64 I/Q pairs.
///
/// The sample count comes from the byte length alone; declared counts in
/// sidecars are checked against it afterwards, never used to allocate.
pub fn parse_iq_bytes(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if bytes.len() % 16 != 0 {
        return Err(Error::Format(format!(
            "binary record length {} is not a multiple of 16 bytes (one I/Q pair)",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|pair| {
            let re = f64::from_le_bytes(pair[..8].try_into().unwrap());
            let im = f64::from_le_bytes(pair[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

/// Encodes samples as interleaved little-endian f64 I/Q pairs.
pub fn write_iq_bytes(samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 16);
    for v in samples {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

/// Parses the CSV record form: header line `i,q`, then one `re,im` row per
/// sample. Blank lines are ignored.
pub fn parse_iq_csv(text: &str) -> Result<Vec<Complex64>> {
    let mut samples = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if !line.eq_ignore_ascii_case("i,q") {
                return Err(Error::format_at(idx + 1, "expected header 'i,q'"));
            }
            saw_header = true;
            continue;
        }
        let (re_str, im_str) = line
            .split_once(',')
            .ok_or_else(|| Error::format_at(idx + 1, "expected 're,im'"))?;
        let re: f64 = re_str
            .trim()
            .parse()
            .map_err(|e| Error::format_at(idx + 1, format!("bad I value: {e}")))?;
        let im: f64 = im_str
            .trim()
            .parse()
            .map_err(|e| Error::format_at(idx + 1, format!("bad Q value: {e}")))?;
        samples.push(Complex64::new(re, im));
    }
    if !saw_header {
        return Err(Error::Format("empty CSV record (missing 'i,q' header)".into()));
    }
    Ok(samples)
}

/// Encodes samples in the CSV record form.
pub fn write_iq_csv(samples: &[Complex64]) -> String {
    let mut out = String::from("i,q\n");
    for v in samples {
        out.push_str(&format!("{:?},{:?}\n", v.re, v.im));
    }
    out
}

/// Parses a sidecar file. All four keys are required exactly once; `#`
/// starts a comment line.
pub fn parse_sidecar(text: &str) -> Result<SidecarMeta> {
    let mut sample_rate_hz = None;
    let mut bandwidth_hz = None;
    let mut label = None;
    let mut n_samples = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format_at(idx + 1, "expected key=value"))?;
        let key = key.trim();
        let value = value.trim();
        let dup = |k: &str| Error::format_at(idx + 1, format!("duplicate key '{k}'"));
        match key {
            "sample_rate_hz" => {
                if sample_rate_hz.is_some() {
                    return Err(dup(key));
                }
                sample_rate_hz = Some(value.parse::<f64>().map_err(|e| {
                    Error::format_at(idx + 1, format!("bad sample_rate_hz: {e}"))
                })?);
            }
            "bandwidth_hz" => {
                if bandwidth_hz.is_some() {
                    return Err(dup(key));
                }
                bandwidth_hz = Some(value.parse::<f64>().map_err(|e| {
                    Error::format_at(idx + 1, format!("bad bandwidth_hz: {e}"))
                })?);
            }
            "label" => {
                if label.is_some() {
                    return Err(dup(key));
                }
                label = Some(value.to_string());
            }
            "n_samples" => {
                if n_samples.is_some() {
                    return Err(dup(key));
                }
                n_samples = Some(value.parse::<usize>().map_err(|e| {
                    Error::format_at(idx + 1, format!("bad n_samples: {e}"))
                })?);
            }
            other => {
                return Err(Error::format_at(idx + 1, format!("unknown key '{other}'")));
            }
        }
    }
    let missing = |k: &str| Error::Format(format!("sidecar is missing key '{k}'"));
    Ok(SidecarMeta {
        sample_rate_hz: sample_rate_hz.ok_or_else(|| missing("sample_rate_hz"))?,
        bandwidth_hz: bandwidth_hz.ok_or_else(|| missing("bandwidth_hz"))?,
        label: label.ok_or_else(|| missing("label"))?,
        n_samples: n_samples.ok_or_else(|| missing("n_samples"))?,
    })
}

/// Renders the sidecar for a signal.
pub fn sidecar_text(signal: &ComplexSignal) -> String {
    format!(
        "sample_rate_hz = {:?}\nbandwidth_hz = {:?}\nlabel = {}\nn_samples = {}\n",
        signal.sample_rate_hz(),
        signal.bandwidth_hz(),
        signal.label(),
        signal.len()
    )
}

/// Writes a signal record (and its sidecar) in the chosen format.
pub fn save_signal(path: &Path, signal: &ComplexSignal, format: SignalFormat) -> Result<()> {
    if signal.label().contains('\n') || signal.label().contains('\r') {
        return Err(Error::InvalidParameter(
            "signal label contains a line break; cannot store in sidecar".into(),
        ));
    }
    match format {
        SignalFormat::Binary => fs::write(path, write_iq_bytes(signal.samples()))?,
        SignalFormat::Csv => fs::write(path, write_iq_csv(signal.samples()))?,
    }
    fs::write(sidecar_path(path), sidecar_text(signal))?;
    Ok(())
}

/// Reads a signal record and its sidecar, validating the declared sample
/// count against the data actually present.
pub fn load_signal(path: &Path, format: SignalFormat) -> Result<ComplexSignal> {
    let meta_path = sidecar_path(path);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| {
        Error::Format(format!("cannot read sidecar {}: {e}", meta_path.display()))
    })?;
    let meta = parse_sidecar(&meta_text)?;
    let samples = match format {
        SignalFormat::Binary => parse_iq_bytes(&fs::read(path)?)?,
        SignalFormat::Csv => parse_iq_csv(&fs::read_to_string(path)?)?,
    };
    if samples.len() != meta.n_samples {
        return Err(Error::Format(format!(
            "sidecar declares {} samples but record holds {}",
            meta.n_samples,
            samples.len()
        )));
    }
    ComplexSignal::new(samples, meta.sample_rate_hz, meta.bandwidth_hz, meta.label)
}
