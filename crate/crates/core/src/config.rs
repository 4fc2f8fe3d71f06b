use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{MlpSpec, TrainConfig};

/// Distributional regime used when suggesting window sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    #[default]
    Independent,
    Subgaussian,
    Dependent,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Regime::Independent),
            "subgaussian" => Ok(Regime::Subgaussian),
            "dependent" => Ok(Regime::Dependent),
            other => Err(Error::config(format!("unknown regime {other:?}"))),
        }
    }
}

/// How the detection threshold `π` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    /// Robust data-driven choice from the curve's local ranges.
    Auto,
    /// Explicit value on the summed criterion scale.
    Value(f64),
    /// `M1* · T2 / 3`; `None` takes `M1*` from the dataset's recorded change signals.
    Signal(Option<f64>),
    /// `(M1*/2 − 2hσ²) · T2`; `None` takes `M1*` from the dataset.
    ProofBound(Option<f64>),
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::Auto
    }
}

impl fmt::Display for ThresholdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdSpec::Auto => write!(f, "auto"),
            ThresholdSpec::Value(v) => write!(f, "{v}"),
            ThresholdSpec::Signal(None) => write!(f, "signal"),
            ThresholdSpec::Signal(Some(m)) => write!(f, "signal:{m}"),
            ThresholdSpec::ProofBound(None) => write!(f, "proof"),
            ThresholdSpec::ProofBound(Some(m)) => write!(f, "proof:{m}"),
        }
    }
}

impl FromStr for ThresholdSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_m1 = |v: &str| -> Result<f64> {
            let m: f64 = v
                .parse()
                .map_err(|_| Error::config(format!("invalid M1* value {v:?}")))?;
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::config("M1* must be positive and finite"));
            }
            Ok(m)
        };
        match s {
            "auto" => Ok(ThresholdSpec::Auto),
            "signal" => Ok(ThresholdSpec::Signal(None)),
            "proof" => Ok(ThresholdSpec::ProofBound(None)),
            _ => {
                if let Some(v) = s.strip_prefix("signal:") {
                    Ok(ThresholdSpec::Signal(Some(parse_m1(v)?)))
                } else if let Some(v) = s.strip_prefix("proof:") {
                    Ok(ThresholdSpec::ProofBound(Some(parse_m1(v)?)))
                } else {
                    let v: f64 = s
                        .parse()
                        .map_err(|_| Error::config(format!("invalid threshold {s:?}")))?;
                    if !(v >= 0.0) {
                        return Err(Error::config("threshold must be >= 0"));
                    }
                    Ok(ThresholdSpec::Value(v))
                }
            }
        }
    }
}

impl Serialize for ThresholdSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ThresholdSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) if v >= 0.0 => Ok(ThresholdSpec::Value(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("threshold {v} < 0"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Everything needed to turn a dataset into a criterion curve and a set of
/// detected change points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Training window size.
    pub t1: usize,
    /// Test window size.
    pub t2: usize,
    /// Detection window half-width.
    pub t3: usize,
    pub pi: ThresholdSpec,
    /// Spacing between evaluation points of the curve.
    pub stride: usize,
    /// Half-width of the stride-1 recomputation around each detection when
    /// `stride > 1`; `None` means `stride`.
    pub refine_radius: Option<usize>,
    /// Move each detection to the highest curve point within `t3` after it.
    pub localize: bool,
    pub regime: Regime,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub seed: u64,
    /// Reuse the previous window's model as the starting point (forces serial scan).
    pub warm_start: bool,
    /// Worker threads for per-window training; 0 picks the pool default.
    #[serde(skip)]
    pub workers: usize,
}

impl DetectionConfig {
    /// `T1 = T2 = t0`, `T3 = 2·t0` with library defaults elsewhere.
    pub fn with_t0(t0: usize) -> Self {
        Self::with_windows(t0, t0, 2 * t0)
    }

    pub fn with_windows(t1: usize, t2: usize, t3: usize) -> Self {
        Self {
            t1,
            t2,
            t3,
            pi: ThresholdSpec::Auto,
            stride: 1,
            refine_radius: None,
            localize: false,
            regime: Regime::Independent,
            hidden: vec![256, 256],
            train: TrainConfig::default(),
            seed: 0,
            warm_start: false,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t1 == 0 || self.t2 == 0 || self.t3 == 0 {
            return Err(Error::config("window sizes T1, T2, T3 must be >= 1"));
        }
        if self.stride == 0 {
            return Err(Error::config("stride must be >= 1"));
        }
        if let ThresholdSpec::Value(v) = self.pi {
            if !(v >= 0.0) {
                return Err(Error::config("threshold must be >= 0"));
            }
        }
        self.train.validate()
    }

    pub fn mlp_spec(&self, input_dim: usize, output_dim: usize) -> Result<MlpSpec> {
        MlpSpec::with_hidden(input_dim, &self.hidden, output_dim)
    }

    pub fn refine_radius(&self) -> usize {
        self.refine_radius.unwrap_or(if self.stride > 1 { self.stride } else { 0 })
    }

    /// Hex digest of everything that influences the fitted models.
    pub fn training_digest(&self) -> String {
        let payload = serde_json::json!({
            "hidden": self.hidden,
            "train": self.train,
            "seed": self.seed,
            "warm_start": self.warm_start,
        });
        crate::io::digest_hex(payload.to_string().as_bytes())[..16].to_string()
    }
}

/// Detection options as read from a config file or flags. Windows left
/// unset are filled from `t0` and then from the series length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionSettings {
    pub t0: Option<usize>,
    pub t1: Option<usize>,
    pub t2: Option<usize>,
    pub t3: Option<usize>,
    pub pi: ThresholdSpec,
    pub stride: usize,
    pub refine_radius: Option<usize>,
    pub localize: bool,
    pub regime: Regime,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub seed: u64,
    pub warm_start: bool,
    /// Constant of the spacing check in the diagnostics.
    pub c0: f64,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        let base = DetectionConfig::with_t0(1);
        Self {
            t0: None,
            t1: None,
            t2: None,
            t3: None,
            pi: base.pi,
            stride: base.stride,
            refine_radius: None,
            localize: base.localize,
            regime: base.regime,
            hidden: base.hidden,
            train: base.train,
            seed: 0,
            warm_start: false,
            c0: 1.0,
        }
    }
}

impl DetectionSettings {
    /// `(T1, T2, T3)` for a series of `t_sum` rows.
    pub fn windows(&self, t_sum: usize) -> Result<(usize, usize, usize)> {
        let (s1, s2, s3) = match self.t0 {
            Some(t0) => (t0, t0, 2 * t0),
            None => match (self.t1, self.t2, self.t3) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => crate::detect::suggest_windows(t_sum, self.regime)?,
            },
        };
        Ok((self.t1.unwrap_or(s1), self.t2.unwrap_or(s2), self.t3.unwrap_or(s3)))
    }

    pub fn resolve(&self, t_sum: usize, workers: usize) -> Result<DetectionConfig> {
        let (t1, t2, t3) = self.windows(t_sum)?;
        let cfg = DetectionConfig {
            t1,
            t2,
            t3,
            pi: self.pi,
            stride: self.stride,
            refine_radius: self.refine_radius,
            localize: self.localize,
            regime: self.regime,
            hidden: self.hidden.clone(),
            train: self.train.clone(),
            seed: self.seed,
            warm_start: self.warm_start,
            workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
