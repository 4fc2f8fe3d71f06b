//! File formats: dataset CSV, manifests, curves, detection and eval reports.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{lagged, SeriesDataset};
use crate::datagen::{GeneratorSpec, Generated};
use crate::error::{Error, Result};
use crate::scan::ErrorCurve;

/// Lowercase hex SHA-256.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serialize `f64` with non-finite values as the strings `"inf"`, `"-inf"`
/// and `"nan"`, since JSON numbers cannot carry them.
pub mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write `bytes` to `path`, creating parent directories; returns the digest.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(digest_hex(bytes))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    write_bytes(path, &to_json_bytes(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

fn matrix_csv(columns: &[String], blocks: &[&Array2<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let mut record = Vec::with_capacity(columns.len());
    for i in 0..rows {
        record.clear();
        for b in blocks {
            record.extend(b.row(i).iter().map(|v| v.to_string()));
        }
        w.write_record(&record)?;
    }
    w.into_inner()
        .map_err(|e| Error::Generator(format!("csv buffer: {e}")))
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Dataset CSV with header `x0,…,x{p−1},y0,…,y{h−1}`.
pub fn dataset_csv(data: &SeriesDataset) -> Result<Vec<u8>> {
    let mut cols = names("x", data.input_dim());
    cols.extend(names("y", data.output_dim()));
    matrix_csv(&cols, &[&data.x().to_owned(), &data.y().to_owned()])
}

/// Raw series CSV with header `y0,…`.
pub fn series_csv(series: &Array2<f64>) -> Result<Vec<u8>> {
    matrix_csv(&names("y", series.ncols()), &[series])
}

/// Columns of a numeric CSV with a header row.
struct Table {
    header: Vec<String>,
    data: Array2<f64>,
}

fn parse_table(text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() {
        return Err(Error::Parse {
            row: 0,
            col: 0,
            msg: "missing header".into(),
        });
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: r + 1,
                col: record.len().min(header.len()) + 1,
                msg: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + 1,
                col: c + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    col: c + 1,
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let data = Array2::from_shape_vec((rows, header.len()), values)
        .map_err(|e| Error::shape(e.to_string()))?;
    Ok(Table { header, data })
}

/// Parse a dataset CSV. Columns named `x*` are inputs and `y*` outputs;
/// any other name counts as an output. With `lags = Some(q)` the inputs are
/// rebuilt from `q` lags of the outputs. Without lags and without `x`
/// columns the input is a constant column.
pub fn parse_dataset(text: &str, lags: Option<usize>) -> Result<SeriesDataset> {
    let table = parse_table(text)?;
    let (xs, ys): (Vec<usize>, Vec<usize>) =
        (0..table.header.len()).partition(|&c| table.header[c].starts_with('x'));
    if ys.is_empty() {
        return Err(Error::Parse {
            row: 0,
            col: 1,
            msg: "no output (y) columns".into(),
        });
    }
    let y = table.data.select(ndarray::Axis(1), &ys);
    if let Some(q) = lags {
        return lagged(y.view(), q);
    }
    let x = if xs.is_empty() {
        Array2::ones((y.nrows(), 1))
    } else {
        table.data.select(ndarray::Axis(1), &xs)
    };
    SeriesDataset::new(x, y)
}

pub fn read_dataset(path: &Path, lags: Option<usize>) -> Result<SeriesDataset> {
    parse_dataset(&read_to_string(path)?, lags)
}

/// Sidecar describing a generated dataset and its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub family: String,
    pub seed: u64,
    pub tau: Vec<usize>,
    pub t_sum: usize,
    pub sigma: f64,
    pub change_signals: Vec<f64>,
    /// Lag count for autoregressive families; the dataset CSV already holds
    /// the flattened inputs.
    pub lags: Option<usize>,
    pub dataset_sha256: String,
    pub spec: GeneratorSpec,
}

impl DatasetManifest {
    pub fn new(spec: &GeneratorSpec, generated: &Generated, dataset_sha256: String) -> Self {
        let data = &generated.dataset;
        Self {
            family: spec.family.to_string(),
            seed: spec.seed,
            tau: data.change_points().unwrap_or_default().to_vec(),
            t_sum: data.len(),
            sigma: spec.sigma,
            change_signals: data.change_signals().unwrap_or_default().to_vec(),
            lags: generated.lags,
            dataset_sha256,
            spec: spec.clone(),
        }
    }
}

/// Truth from either a dataset manifest or a bare `{"tau": [...]}` object.
pub fn read_truth(path: &Path) -> Result<Vec<usize>> {
    #[derive(Deserialize)]
    struct Truth {
        tau: Vec<usize>,
    }
    let truth: Truth = read_json(path)?;
    Ok(truth.tau)
}

/// Estimated change points: a detection JSON (`change_points` field) or
/// plain text with one integer per line.
pub fn parse_estimates(text: &str) -> Result<Vec<usize>> {
    if text.trim_start().starts_with('{') {
        #[derive(Deserialize)]
        struct Est {
            change_points: Vec<usize>,
        }
        let est: Est = serde_json::from_str(text)?;
        return Ok(est.change_points);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                row: i + 1,
                col: 1,
                msg: format!("not a non-negative integer: {:?}", l.trim()),
            })
        })
        .collect()
}

pub fn read_estimates(path: &Path) -> Result<Vec<usize>> {
    parse_estimates(&read_to_string(path)?)
}

/// Two-column `t,e` CSV.
pub fn curve_csv(curve: &ErrorCurve) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "e"])?;
    for (t, e) in curve.points() {
        w.write_record([t.to_string(), e.to_string()])?;
    }
    w.into_inner()
        .map_err(|e| Error::Generator(format!("csv buffer: {e}")))
}

/// Parse a `t,e` CSV back into a curve with the given window metadata.
pub fn parse_curve(text: &str, t1: usize, t2: usize, stride: usize) -> Result<ErrorCurve> {
    let table = parse_table(text)?;
    if table.header != ["t", "e"] {
        return Err(Error::Parse {
            row: 0,
            col: 1,
            msg: "curve header must be t,e".into(),
        });
    }
    let mut ts = Vec::with_capacity(table.data.nrows());
    for (r, &t) in table.data.column(0).iter().enumerate() {
        if t < 0.0 || t.fract() != 0.0 {
            return Err(Error::Parse {
                row: r + 1,
                col: 1,
                msg: format!("time {t} is not a non-negative integer"),
            });
        }
        ts.push(t as usize);
    }
    ErrorCurve::new(ts, table.data.column(1).to_vec(), t1, t2, stride)
}

/// Plot-ready JSON form of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveJson<C> {
    pub t: Vec<usize>,
    pub e: Vec<f64>,
    pub config: C,
}

/// Reference to an artifact by path and content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: PathBuf,
    pub sha256: String,
}
