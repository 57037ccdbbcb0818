//! Experiment configuration as read from TOML. Angles are in degrees here and
//! converted to radians when the channel model is built.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arrays::{ArrayGeometry, ArrayKind, Sector};
use crate::channel::{ChannelParams, PowerProfile};
use crate::error::{Error, Result};
use crate::precoding::OmpOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Unconstrained SVD precoder with an optimal receiver; capped
    /// waterfilling capacity in rank-adaptive runs.
    Optimal,
    /// Sparse hybrid precoder and combiner.
    Hybrid,
    /// Exhaustive-search beam steering on the channel's own rays.
    Steering,
    /// Sparse hybrid precoder conveyed over limited feedback.
    QuantizedHybrid,
    /// Capacity with waterfilling over at most `ns` eigenmodes.
    Waterfilling,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Optimal => "optimal",
            Method::Hybrid => "hybrid",
            Method::Steering => "steering",
            Method::QuantizedHybrid => "quantized_hybrid",
            Method::Waterfilling => "waterfilling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSpec {
    pub az_min_deg: f64,
    pub az_max_deg: f64,
    pub el_min_deg: f64,
    pub el_max_deg: f64,
}

impl SectorSpec {
    /// The default transmit sector: 60° of azimuth by 20° of elevation
    /// around broadside.
    pub fn default_tx() -> Self {
        SectorSpec { az_min_deg: -30.0, az_max_deg: 30.0, el_min_deg: 80.0, el_max_deg: 100.0 }
    }

    pub fn to_sector(&self) -> Result<Sector> {
        Sector::from_degrees(self.az_min_deg, self.az_max_deg, self.el_min_deg, self.el_max_deg)
    }
}

fn half_wavelength() -> f64 {
    0.5
}

// No deny_unknown_fields here: serde does not support it next to `flatten`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    #[serde(flatten)]
    pub kind: ArrayKind,
    #[serde(default = "half_wavelength")]
    pub spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<SectorSpec>,
}

impl ArraySpec {
    pub fn square(side: usize) -> Self {
        ArraySpec { kind: ArrayKind::Upa { width: side, height: side }, spacing: 0.5, sector: None }
    }

    pub fn with_sector(mut self, s: SectorSpec) -> Self {
        self.sector = Some(s);
        self
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let mut g = ArrayGeometry { kind: self.kind, spacing: self.spacing, sector: None };
        if let Some(s) = &self.sector {
            g = g.with_sector(s.to_sector()?);
        }
        g.validate()?;
        Ok(g)
    }
}

fn default_clusters() -> usize {
    8
}

fn default_rays() -> usize {
    10
}

fn default_spread() -> f64 {
    7.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default = "default_clusters")]
    pub n_clusters: usize,
    #[serde(default = "default_rays")]
    pub n_rays: usize,
    #[serde(default = "default_spread")]
    pub angle_spread_deg: f64,
    /// Relative cluster powers; equal powers when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_powers: Option<Vec<f64>>,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            n_clusters: default_clusters(),
            n_rays: default_rays(),
            angle_spread_deg: default_spread(),
            cluster_powers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    Snr { start_db: f64, stop_db: f64, step_db: f64 },
    AngleSpread { values_deg: Vec<f64>, snr_db: f64 },
    AngleBits { values: Vec<u32>, snr_db: f64 },
}

/// One point of a sweep: the SNR plus whatever parameter is being varied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub angle_spread_deg: f64,
    pub angle_bits: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringSpec {
    #[serde(default = "default_max_subsets")]
    pub max_subsets: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_limit: Option<usize>,
}

fn default_max_subsets() -> u64 {
    100_000
}

impl Default for SteeringSpec {
    fn default() -> Self {
        SteeringSpec { max_subsets: default_max_subsets(), candidate_limit: None }
    }
}

/// Candidate RF beams for the sparse designs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionarySpec {
    /// Array responses at the channel's own ray angles.
    #[default]
    Rays,
    /// Uniform angle grids: over the sector for sectored arrays, over the
    /// whole sphere otherwise.
    Grid { az_points: usize, el_points: usize },
}

fn default_training_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizationSpec {
    /// Bits per azimuth and per elevation angle, unless the sweep varies it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits_per_angle: Option<u32>,
    /// Baseband codebook bits, one entry per element of `streams`.
    pub bb_bits: Vec<u32>,
    #[serde(default = "default_training_samples")]
    pub training_samples: usize,
    /// Pre-trained baseband codebook used instead of training one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebook: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub methods: Vec<Method>,
    /// Stream counts, one curve per entry. In rank-adaptive runs each entry
    /// is the cap on the number of streams.
    pub streams: Vec<usize>,
    #[serde(default)]
    pub rank_adaptive: bool,
    pub n_rf_tx: usize,
    pub n_rf_rx: usize,
    pub tx: ArraySpec,
    pub rx: ArraySpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub steering: SteeringSpec,
    #[serde(default)]
    pub omp: OmpOptions,
    #[serde(default)]
    pub dictionary: DictionarySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization: Option<QuantizationSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let path = match e.span() {
                Some(span) => {
                    let line = text[..span.start].lines().count().max(1);
                    format!("{origin}:{line}")
                }
                None => origin.to_string(),
            };
            Error::config(path, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    /// Checks cross-field constraints, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "at least one trial is required"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.streams.is_empty() {
            return Err(Error::config("streams", "at least one stream count is required"));
        }
        let tx = self.tx.geometry().map_err(|e| Error::config("tx", e.to_string()))?;
        let rx = self.rx.geometry().map_err(|e| Error::config("rx", e.to_string()))?;
        let (nt, nr) = (tx.n_elements(), rx.n_elements());
        if self.n_rf_tx == 0 || self.n_rf_tx > nt {
            return Err(Error::config(
                "n_rf_tx",
                format!("need 1 <= n_rf_tx <= Nt = {nt}, got {}", self.n_rf_tx),
            ));
        }
        if self.n_rf_rx == 0 || self.n_rf_rx > nr {
            return Err(Error::config(
                "n_rf_rx",
                format!("need 1 <= n_rf_rx <= Nr = {nr}, got {}", self.n_rf_rx),
            ));
        }
        let max_streams = self.n_rf_tx.min(self.n_rf_rx);
        for (i, &ns) in self.streams.iter().enumerate() {
            if ns == 0 || ns > max_streams {
                return Err(Error::config(
                    format!("streams[{i}]"),
                    format!(
                        "Ns = {ns} violates Ns <= min(n_rf_tx, n_rf_rx) = {max_streams}: \
                         streams cannot outnumber RF chains"
                    ),
                ));
            }
        }
        self.channel_params(self.channel.angle_spread_deg)
            .map_err(|e| Error::config("channel", e.to_string()))?;
        match &self.sweep {
            SweepSpec::Snr { start_db, stop_db, step_db } => {
                if !(step_db.is_finite() && *step_db > 0.0) || !(stop_db >= start_db) {
                    return Err(Error::config(
                        "sweep",
                        "need step_db > 0 and stop_db >= start_db",
                    ));
                }
            }
            SweepSpec::AngleSpread { values_deg, .. } => {
                if values_deg.is_empty() || values_deg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::config("sweep.values_deg", "need non-negative angle spreads"));
                }
            }
            SweepSpec::AngleBits { values, .. } => {
                if values.is_empty() || values.iter().any(|&b| b > 16) {
                    return Err(Error::config("sweep.values", "need 0 to 16 bits per angle"));
                }
                if self.quantization.is_none() {
                    return Err(Error::config("quantization", "an angle-bits sweep needs quantization settings"));
                }
            }
        }
        let quantized = self.methods.contains(&Method::QuantizedHybrid);
        if quantized {
            let q = self.quantization.as_ref().ok_or_else(|| {
                Error::config("quantization", "method quantized_hybrid needs a [quantization] table")
            })?;
            if self.rank_adaptive {
                return Err(Error::config("rank_adaptive", "quantized_hybrid needs a fixed stream count"));
            }
            if tx.sector.is_none() {
                return Err(Error::config("tx.sector", "angle codebooks need a transmit sector"));
            }
            if q.bb_bits.len() != self.streams.len() {
                return Err(Error::config(
                    "quantization.bb_bits",
                    format!("need one entry per stream count ({} entries)", self.streams.len()),
                ));
            }
            if q.bits_per_angle.is_none() && !matches!(self.sweep, SweepSpec::AngleBits { .. }) {
                return Err(Error::config("quantization.bits_per_angle", "missing"));
            }
            for (i, &b) in q.bb_bits.iter().enumerate() {
                if b > 16 || q.training_samples < (10usize << b) {
                    return Err(Error::config(
                        format!("quantization.bb_bits[{i}]"),
                        format!("{b} bits need at least {} training samples", 10usize << b.min(16)),
                    ));
                }
            }
        }
        if let DictionarySpec::Grid { az_points, el_points } = self.dictionary {
            if az_points == 0 || el_points == 0 {
                return Err(Error::config("dictionary", "grid needs at least one point per axis"));
            }
        }
        if self.steering.max_subsets == 0 {
            return Err(Error::config("steering.max_subsets", "must be positive"));
        }
        Ok(())
    }

    pub fn channel_params(&self, angle_spread_deg: f64) -> Result<ChannelParams> {
        let params = ChannelParams {
            n_clusters: self.channel.n_clusters,
            n_rays: self.channel.n_rays,
            angle_spread: angle_spread_deg.to_radians(),
            power_profile: match &self.channel.cluster_powers {
                None => PowerProfile::Equal,
                Some(p) => PowerProfile::Custom(p.clone()),
            },
            tx: self.tx.geometry()?,
            rx: self.rx.geometry()?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let bits = self.quantization.as_ref().and_then(|q| q.bits_per_angle);
        let spread = self.channel.angle_spread_deg;
        match &self.sweep {
            SweepSpec::Snr { start_db, stop_db, step_db } => {
                let n = ((stop_db - start_db) / step_db + 1e-9).floor() as usize + 1;
                (0..n)
                    .map(|k| SweepPoint {
                        snr_db: start_db + k as f64 * step_db,
                        angle_spread_deg: spread,
                        angle_bits: bits,
                    })
                    .collect()
            }
            SweepSpec::AngleSpread { values_deg, snr_db } => values_deg
                .iter()
                .map(|&s| SweepPoint { snr_db: *snr_db, angle_spread_deg: s, angle_bits: bits })
                .collect(),
            SweepSpec::AngleBits { values, snr_db } => values
                .iter()
                .map(|&b| SweepPoint { snr_db: *snr_db, angle_spread_deg: spread, angle_bits: Some(b) })
                .collect(),
        }
    }
}
