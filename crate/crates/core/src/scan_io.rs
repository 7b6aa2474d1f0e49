//! Frequency-domain scan datasets: validation, slicing and the on-disk
//! CSV/JSON formats for scans and exported state-space models.
//!
//! Frequencies are held in rad/s; files carry Hz and the conversion
//! happens here. The Hz values read from a file are retained so that a
//! load/write cycle reproduces them bit for bit.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::realization::{ModelMeta, StateSpaceModel};
use crate::scalar::{jw, Complex, Real};

/// One point of a frequency response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySample<T: Real> {
    /// Angular frequency, rad/s.
    pub omega: T,
    pub value: Complex<T>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLabels {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

/// A J×L grid of complex responses over a shared frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyScan<T: Real> {
    n_outputs: usize,
    n_inputs: usize,
    omega: Vec<T>,
    freq_hz: Vec<T>,
    /// `entries[o][i][k]`
    entries: Vec<Vec<Vec<Complex<T>>>>,
    sample_rate_hz: Option<T>,
    labels: Option<ChannelLabels>,
    meta: Option<serde_json::Value>,
}

/// A single input/output column of a scan, detached from its parent.
#[derive(Debug, Clone, PartialEq)]
pub struct SisoResponse<T: Real> {
    omega: Vec<T>,
    values: Vec<Complex<T>>,
}

impl<T: Real> SisoResponse<T> {
    pub fn new(omega: Vec<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if omega.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} frequencies but {} samples",
                omega.len(),
                values.len()
            )));
        }
        check_axis(&omega, 0)?;
        for (k, v) in values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidScan {
                    location: format!("sample {}", k + 1),
                    message: "non-finite value".into(),
                });
            }
        }
        Ok(Self { omega, values })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// Laplace variable at sample `k`, `jω_k`.
    pub fn s(&self, k: usize) -> Complex<T> {
        jw(self.omega[k])
    }

    pub fn samples(&self) -> impl Iterator<Item = FrequencySample<T>> + '_ {
        self.omega
            .iter()
            .zip(&self.values)
            .map(|(&omega, &value)| FrequencySample { omega, value })
    }
}

fn check_axis<T: Real>(omega: &[T], row_offset: usize) -> Result<()> {
    for (k, &w) in omega.iter().enumerate() {
        if !w.is_finite() || w < T::zero() {
            return Err(Error::InvalidScan {
                location: format!("row {}", k + 1 + row_offset),
                message: "frequency must be finite and non-negative".into(),
            });
        }
        if k > 0 && w <= omega[k - 1] {
            return Err(Error::InvalidScan {
                location: format!("row {}", k + 1 + row_offset),
                message: "frequencies must be strictly increasing".into(),
            });
        }
    }
    Ok(())
}

impl<T: Real> FrequencyScan<T> {
    /// Builds a scan from a frequency axis in Hz.
    pub fn from_hz(
        freq_hz: Vec<T>,
        entries: Vec<Vec<Vec<Complex<T>>>>,
        sample_rate_hz: Option<T>,
        labels: Option<ChannelLabels>,
    ) -> Result<Self> {
        let omega = freq_hz.iter().map(|&f| f * T::two_pi()).collect();
        Self::build(omega, freq_hz, entries, sample_rate_hz, labels)
    }

    /// Builds a scan from a frequency axis in rad/s.
    pub fn from_rad(
        omega: Vec<T>,
        entries: Vec<Vec<Vec<Complex<T>>>>,
        sample_rate_hz: Option<T>,
        labels: Option<ChannelLabels>,
    ) -> Result<Self> {
        let freq_hz = omega.iter().map(|&w| w / T::two_pi()).collect();
        Self::build(omega, freq_hz, entries, sample_rate_hz, labels)
    }

    fn build(
        omega: Vec<T>,
        freq_hz: Vec<T>,
        entries: Vec<Vec<Vec<Complex<T>>>>,
        sample_rate_hz: Option<T>,
        labels: Option<ChannelLabels>,
    ) -> Result<Self> {
        check_axis(&freq_hz, 0)?;
        let n_outputs = entries.len();
        if n_outputs == 0 {
            return Err(Error::InvalidScan {
                location: "entries".into(),
                message: "scan has no outputs".into(),
            });
        }
        let n_inputs = entries[0].len();
        if n_inputs == 0 {
            return Err(Error::InvalidScan {
                location: "entries".into(),
                message: "scan has no inputs".into(),
            });
        }
        for (o, row) in entries.iter().enumerate() {
            if row.len() != n_inputs {
                return Err(Error::InvalidScan {
                    location: format!("entry row {o}"),
                    message: format!("expected {n_inputs} inputs, found {}", row.len()),
                });
            }
            for (i, seq) in row.iter().enumerate() {
                if seq.len() != freq_hz.len() {
                    return Err(Error::InvalidScan {
                        location: format!("entry ({o},{i})"),
                        message: format!("expected {} samples, found {}", freq_hz.len(), seq.len()),
                    });
                }
                if let Some(k) = seq.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(Error::InvalidScan {
                        location: format!("entry ({o},{i}) row {}", k + 1),
                        message: "non-finite sample".into(),
                    });
                }
            }
        }
        if let Some(fs) = sample_rate_hz {
            if !fs.is_finite() || fs <= T::zero() {
                return Err(Error::InvalidScan {
                    location: "sample_rate_hz".into(),
                    message: "sample rate must be positive".into(),
                });
            }
        }
        if let Some(l) = &labels {
            if l.inputs.len() != n_inputs || l.outputs.len() != n_outputs {
                return Err(Error::InvalidScan {
                    location: "labels".into(),
                    message: format!(
                        "{} input / {} output labels for a {n_outputs}x{n_inputs} scan",
                        l.inputs.len(),
                        l.outputs.len()
                    ),
                });
            }
        }
        Ok(Self {
            n_outputs,
            n_inputs,
            omega,
            freq_hz,
            entries,
            sample_rate_hz,
            labels,
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Frequency axis, rad/s.
    pub fn frequencies(&self) -> &[T] {
        &self.omega
    }

    pub fn freq_hz(&self) -> &[T] {
        &self.freq_hz
    }

    pub fn entry(&self, out_idx: usize, in_idx: usize) -> Option<&[Complex<T>]> {
        self.entries.get(out_idx)?.get(in_idx).map(|v| v.as_slice())
    }

    pub fn sample_rate_hz(&self) -> Option<T> {
        self.sample_rate_hz
    }

    pub fn labels(&self) -> Option<&ChannelLabels> {
        self.labels.as_ref()
    }

    pub fn meta(&self) -> Option<&serde_json::Value> {
        self.meta.as_ref()
    }

    /// Copies out one SISO column of the transfer matrix.
    pub fn extract_siso(&self, out_idx: usize, in_idx: usize) -> Result<SisoResponse<T>> {
        let seq = self.entry(out_idx, in_idx).ok_or(Error::IndexOutOfRange {
            row: out_idx,
            col: in_idx,
            rows: self.n_outputs,
            cols: self.n_inputs,
        })?;
        Ok(SisoResponse {
            omega: self.omega.clone(),
            values: seq.to_vec(),
        })
    }

    /// Checks the upper fitting frequency against `f_s / 10`.
    pub fn validate_nyquist(&self) -> NyquistReport {
        let max_hz = self.freq_hz.last().copied().unwrap_or(T::zero()).to_f64_lossy();
        match self.sample_rate_hz {
            None => NyquistReport {
                status: NyquistStatus::Unchecked,
                ratio: None,
                max_freq_hz: max_hz,
                sample_rate_hz: None,
            },
            Some(fs) => {
                let fs = fs.to_f64_lossy();
                let ratio = max_hz / fs;
                NyquistReport {
                    status: if ratio <= NYQUIST_RATIO {
                        NyquistStatus::Pass
                    } else {
                        NyquistStatus::Fail
                    },
                    ratio: Some(ratio),
                    max_freq_hz: max_hz,
                    sample_rate_hz: Some(fs),
                }
            }
        }
    }
}

/// Largest admissible ratio of fitted frequency to sampling frequency.
pub const NYQUIST_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NyquistStatus {
    Pass,
    Fail,
    /// No sampling rate on record.
    Unchecked,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NyquistReport {
    pub status: NyquistStatus,
    /// `max_freq / f_s`
    pub ratio: Option<f64>,
    pub max_freq_hz: f64,
    pub sample_rate_hz: Option<f64>,
}

impl NyquistReport {
    pub fn passed(&self) -> bool {
        self.status != NyquistStatus::Fail
    }
}

impl fmt::Display for NyquistReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.status, self.ratio) {
            (NyquistStatus::Unchecked, _) => write!(f, "unchecked: no sample rate recorded"),
            (s, Some(r)) => write!(
                f,
                "{}: max {} Hz / f_s {} Hz = {r} (limit {NYQUIST_RATIO})",
                if s == NyquistStatus::Pass { "pass" } else { "fail" },
                self.max_freq_hz,
                self.sample_rate_hz.unwrap_or(f64::NAN)
            ),
            _ => write!(f, "{:?}", self.status),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanFormat {
    Csv,
    Json,
}

impl ScanFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

impl FromStr for ScanFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidArgument(format!("unknown scan format `{other}`"))),
        }
    }
}

fn to_t<T: Real>(x: f64) -> T {
    T::lit(x)
}

pub fn load_scan<T: Real>(path: impl AsRef<Path>, format: ScanFormat) -> Result<FrequencyScan<T>> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    match format {
        ScanFormat::Csv => read_scan_csv(reader),
        ScanFormat::Json => read_scan_json(reader),
    }
}

pub fn write_scan<T: Real>(scan: &FrequencyScan<T>, path: impl AsRef<Path>, format: ScanFormat) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    match format {
        ScanFormat::Csv => write_scan_csv(scan, &mut w)?,
        ScanFormat::Json => write_scan_json(scan, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn parse_index_pair(name: &str, prefix: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix(prefix)?;
    let (o, i) = rest.split_once('_')?;
    Some((o.parse().ok()?, i.parse().ok()?))
}

/// Reads the CSV scan layout: `freq_hz, re_{o}_{i}, im_{o}_{i}, …` in
/// row-major `(o, i)` order, one row per frequency.
pub fn read_scan_csv<T: Real, R: Read>(reader: R) -> Result<FrequencyScan<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let parse_err = |location: String, message: String| Error::Parse { location, message };
    if headers.get(0) != Some("freq_hz") {
        return Err(parse_err("header".into(), "first column must be `freq_hz`".into()));
    }
    let cols: Vec<&str> = headers.iter().skip(1).collect();
    if cols.is_empty() || cols.len() % 2 != 0 {
        return Err(parse_err(
            "header".into(),
            "expected re/im column pairs after `freq_hz`".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(cols.len() / 2);
    for (c, chunk) in cols.chunks(2).enumerate() {
        let re = parse_index_pair(chunk[0], "re_");
        let im = parse_index_pair(chunk[1], "im_");
        match (re, im) {
            (Some(a), Some(b)) if a == b => pairs.push(a),
            _ => {
                return Err(parse_err(
                    format!("header column {}", 2 * c + 2),
                    format!("expected `re_o_i, im_o_i`, found `{}, {}`", chunk[0], chunk[1]),
                ))
            }
        }
    }
    let n_outputs = pairs.iter().map(|p| p.0).max().unwrap_or(0) + 1;
    let n_inputs = pairs.iter().map(|p| p.1).max().unwrap_or(0) + 1;
    let expected: Vec<(usize, usize)> = (0..n_outputs)
        .flat_map(|o| (0..n_inputs).map(move |i| (o, i)))
        .collect();
    if pairs != expected {
        return Err(parse_err(
            "header".into(),
            format!("columns must cover every (o, i) of a {n_outputs}x{n_inputs} grid in row-major order"),
        ));
    }

    let mut freq_hz = Vec::new();
    let mut entries = vec![vec![Vec::new(); n_inputs]; n_outputs];
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| parse_err(format!("row {row}"), e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(parse_err(
                format!("row {row}"),
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        let num = |c: usize| -> Result<f64> {
            rec[c]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("row {row}, column {}", c + 1), format!("`{}`: {e}", &rec[c])))
        };
        freq_hz.push(to_t::<T>(num(0)?));
        for (p, &(o, i)) in pairs.iter().enumerate() {
            let re = num(1 + 2 * p)?;
            let im = num(2 + 2 * p)?;
            entries[o][i].push(Complex::new(to_t::<T>(re), to_t::<T>(im)));
        }
    }
    if freq_hz.is_empty() {
        return Err(parse_err("body".into(), "no data rows".into()));
    }
    FrequencyScan::from_hz(freq_hz, entries, None, None)
}

pub fn write_scan_csv<T: Real, W: Write>(scan: &FrequencyScan<T>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header = vec!["freq_hz".to_string()];
    for o in 0..scan.n_outputs {
        for i in 0..scan.n_inputs {
            header.push(format!("re_{o}_{i}"));
            header.push(format!("im_{o}_{i}"));
        }
    }
    w.write_record(&header)?;
    for k in 0..scan.len() {
        let mut row = vec![scan.freq_hz[k].to_f64_lossy().to_string()];
        for o in 0..scan.n_outputs {
            for i in 0..scan.n_inputs {
                let v = scan.entries[o][i][k];
                row.push(v.re.to_f64_lossy().to_string());
                row.push(v.im.to_f64_lossy().to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ScanFile {
    n_outputs: usize,
    n_inputs: usize,
    sample_rate_hz: Option<f64>,
    labels: Option<ChannelLabels>,
    freq_hz: Vec<f64>,
    entries: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

pub fn read_scan_json<T: Real, R: Read>(reader: R) -> Result<FrequencyScan<T>> {
    let file: ScanFile = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if file.entries.len() != file.n_outputs || file.entries.iter().any(|r| r.len() != file.n_inputs) {
        return Err(Error::InvalidScan {
            location: "entries".into(),
            message: format!("entries do not form a {}x{} grid", file.n_outputs, file.n_inputs),
        });
    }
    let entries = file
        .entries
        .iter()
        .map(|row| {
            row.iter()
                .map(|seq| seq.iter().map(|&[re, im]| Complex::new(to_t(re), to_t(im))).collect())
                .collect()
        })
        .collect();
    let freq = file.freq_hz.iter().map(|&f| to_t(f)).collect();
    let scan = FrequencyScan::from_hz(freq, entries, file.sample_rate_hz.map(to_t), file.labels)?;
    Ok(match file.meta {
        Some(m) => scan.with_meta(m),
        None => scan,
    })
}

pub fn write_scan_json<T: Real, W: Write>(scan: &FrequencyScan<T>, writer: W) -> Result<()> {
    let file = ScanFile {
        n_outputs: scan.n_outputs,
        n_inputs: scan.n_inputs,
        sample_rate_hz: scan.sample_rate_hz.map(|x| x.to_f64_lossy()),
        labels: scan.labels.clone(),
        freq_hz: scan.freq_hz.iter().map(|x| x.to_f64_lossy()).collect(),
        entries: scan
            .entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|seq| seq.iter().map(|v| [v.re.to_f64_lossy(), v.im.to_f64_lossy()]).collect())
                    .collect()
            })
            .collect(),
        meta: scan.meta.clone(),
    };
    serde_json::to_writer_pretty(writer, &file)?;
    Ok(())
}

/// JSON representation of an exported state-space model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ModelFile {
    pub A: Vec<Vec<f64>>,
    pub B: Vec<Vec<f64>>,
    pub C: Vec<Vec<f64>>,
    pub D: Vec<Vec<f64>>,
    #[serde(default)]
    pub state_labels: Vec<String>,
    #[serde(default)]
    pub meta: ModelMeta,
}

fn rows_of<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)].to_f64_lossy()).collect())
        .collect()
}

fn matrix_from_rows<T: Real>(rows: &[Vec<f64>], ncols_hint: usize, name: &str) -> Result<DMatrix<T>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(ncols_hint, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse {
            location: name.to_string(),
            message: "ragged matrix rows".into(),
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| T::lit(rows[r][c])))
}

impl ModelFile {
    pub fn from_model<T: Real>(ss: &StateSpaceModel<T>) -> Self {
        Self {
            A: rows_of(&ss.a),
            B: rows_of(&ss.b),
            C: rows_of(&ss.c),
            D: rows_of(&ss.d),
            state_labels: ss.state_labels.clone(),
            meta: ss.meta.clone(),
        }
    }

    pub fn into_model<T: Real>(self) -> Result<StateSpaceModel<T>> {
        let n = self.A.len();
        let a = matrix_from_rows(&self.A, n, "A")?;
        let n_in = self.D.first().map(|r| r.len()).or_else(|| self.B.first().map(|r| r.len())).unwrap_or(0);
        let n_out = self.D.len().max(self.C.len());
        let b = if self.B.is_empty() {
            DMatrix::zeros(n, n_in)
        } else {
            matrix_from_rows(&self.B, n_in, "B")?
        };
        let c = if self.C.is_empty() {
            DMatrix::zeros(n_out, n)
        } else {
            matrix_from_rows(&self.C, n, "C")?
        };
        let d = matrix_from_rows(&self.D, n_in, "D")?;
        let mut ss = StateSpaceModel::new(a, b, c, d)?;
        if !self.state_labels.is_empty() {
            ss = ss.with_state_labels(self.state_labels)?;
        }
        ss.meta = self.meta;
        Ok(ss)
    }
}

pub fn read_model_json<T: Real, R: Read>(reader: R) -> Result<StateSpaceModel<T>> {
    let file: ModelFile = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    file.into_model()
}

pub fn write_model_json<T: Real, W: Write>(ss: &StateSpaceModel<T>, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, &ModelFile::from_model(ss))?;
    Ok(())
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<StateSpaceModel<T>> {
    read_model_json(BufReader::new(File::open(path.as_ref())?))
}

pub fn save_model<T: Real>(ss: &StateSpaceModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_model_json(ss, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_3x3(rows: usize) -> String {
        let mut s = String::from("freq_hz");
        for o in 0..3 {
            for i in 0..3 {
                s.push_str(&format!(", re_{o}_{i}, im_{o}_{i}"));
            }
        }
        s.push('\n');
        for r in 0..rows {
            let f = 0.1 + (1000.0 - 0.1) * r as f64 / (rows - 1) as f64;
            s.push_str(&format!("{f}"));
            for e in 0..9 {
                s.push_str(&format!(", {}, {}", e as f64 + 0.5, -(r as f64)));
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn loads_3x3_grid() {
        let scan: FrequencyScan<f64> = read_scan_csv(csv_3x3(110).as_bytes()).unwrap();
        assert_eq!((scan.n_outputs(), scan.n_inputs(), scan.len()), (3, 3, 110));
        assert_eq!(scan.frequencies()[0], 2.0 * std::f64::consts::PI * 0.1);
    }

    #[test]
    fn minimal_single_row() {
        let scan: FrequencyScan<f64> = read_scan_csv("freq_hz,re_0_0,im_0_0\n5,1,0\n".as_bytes()).unwrap();
        assert_eq!((scan.n_outputs(), scan.n_inputs(), scan.len()), (1, 1, 1));
    }

    #[test]
    fn non_monotone_reports_row() {
        let err = read_scan_csv::<f64, _>("freq_hz,re_0_0,im_0_0\n10,1,0\n5,1,0\n".as_bytes()).unwrap_err();
        match err {
            Error::InvalidScan { location, .. } => assert_eq!(location, "row 2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_number_reports_location() {
        let err = read_scan_csv::<f64, _>("freq_hz,re_0_0,im_0_0\n1,abc,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "row 1, column 2"), "{err}");
    }

    #[test]
    fn ragged_json_rejected() {
        let json = r#"{"n_outputs":1,"n_inputs":1,"sample_rate_hz":null,"labels":null,
            "freq_hz":[1,2],"entries":[[[[1,0]]]]}"#;
        let err = read_scan_json::<f64, _>(json.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::InvalidScan { .. }));
    }

    fn one_by_one(freqs_hz: &[f64], fs: Option<f64>) -> FrequencyScan<f64> {
        let seq = freqs_hz.iter().map(|_| Complex::new(1.0, 0.0)).collect();
        FrequencyScan::from_hz(freqs_hz.to_vec(), vec![vec![seq]], fs, None).unwrap()
    }

    #[test]
    fn nyquist_rule() {
        let pass = one_by_one(&[1.0, 1000.0], Some(100e3)).validate_nyquist();
        assert_eq!(pass.status, NyquistStatus::Pass);
        assert!((pass.ratio.unwrap() - 0.01).abs() < 1e-15);

        let unchecked = one_by_one(&[1.0, 1000.0], None).validate_nyquist();
        assert_eq!(unchecked.status, NyquistStatus::Unchecked);
        assert!(unchecked.passed());

        let fail = one_by_one(&[1.0, 1000.0], Some(5e3)).validate_nyquist();
        assert_eq!(fail.status, NyquistStatus::Fail);
        assert!((fail.ratio.unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn extract_siso_bounds() {
        let scan: FrequencyScan<f64> = read_scan_csv(csv_3x3(4).as_bytes()).unwrap();
        let y = scan.extract_siso(2, 2).unwrap();
        assert_eq!(y.values(), scan.entry(2, 2).unwrap());
        assert!(matches!(scan.extract_siso(3, 0), Err(Error::IndexOutOfRange { .. })));
    }
}
