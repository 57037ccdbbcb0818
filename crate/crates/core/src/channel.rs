//! Clustered narrowband channel sampler (extended Saleh-Valenzuela).
//!
//! `H = sqrt(Nt Nr / (Ncl Nray)) Σ_i Σ_l α_il Λr Λt a_r(aoa_il) a_t(aod_il)^*`
//!
//! Draw order on the supplied RNG is fixed and part of the contract:
//! 1. per cluster `i`: tx az, tx el, rx az, rx el mean angles;
//! 2. per ray `(i, l)`: tx az, tx el, rx az, rx el Laplacian offsets;
//! 3. per ray `(i, l)`: real then imaginary part of the gain.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arrays::{ArrayGeometry, Direction, Sector};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerProfile {
    Equal,
    /// Relative per-cluster powers; rescaled internally by γ.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub n_clusters: usize,
    pub n_rays: usize,
    /// Angular standard deviation in radians, shared by all four angles.
    pub angle_spread: f64,
    pub power_profile: PowerProfile,
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        self.tx.validate()?;
        self.rx.validate()?;
        if self.n_clusters == 0 || self.n_rays == 0 {
            return Err(Error::InvalidArgument(
                "need at least one cluster and one ray per cluster".into(),
            ));
        }
        if !(self.angle_spread >= 0.0 && self.angle_spread.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "angle spread must be a finite non-negative number, got {}",
                self.angle_spread
            )));
        }
        if let PowerProfile::Custom(p) = &self.power_profile {
            if p.len() != self.n_clusters {
                return Err(Error::InvalidArgument(format!(
                    "custom power profile has {} entries for {} clusters",
                    p.len(),
                    self.n_clusters
                )));
            }
            if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || p.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidArgument(
                    "custom cluster powers must be non-negative with a positive sum".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n_paths(&self) -> usize {
        self.n_clusters * self.n_rays
    }

    /// Per-cluster gain variances `σ²_{α,i}`, with γ chosen so that
    /// `E[‖H‖²_F] = Nt Nr` once the expected loss of rays that leave a
    /// sectored array's sector is accounted for.
    pub fn cluster_variances(&self) -> Vec<f64> {
        let rel: Vec<f64> = match &self.power_profile {
            PowerProfile::Equal => vec![1.0; self.n_clusters],
            PowerProfile::Custom(p) => p.clone(),
        };
        let total: f64 = rel.iter().sum();
        let survival = sector_survival(self.tx.sector.as_ref(), self.angle_spread)
            * sector_survival(self.rx.sector.as_ref(), self.angle_spread);
        let gamma = self.n_clusters as f64 / survival;
        rel.iter().map(|&r| gamma * r / total).collect()
    }
}

/// Probability that a ray keeps unit element gain: its cluster mean is
/// uniform over the sector and it is offset by an independent Laplacian
/// (std `spread`, truncated to ±π) in each of azimuth and elevation.
/// Exact for sector widths up to π.
pub fn sector_survival(sector: Option<&Sector>, spread: f64) -> f64 {
    match sector {
        None => 1.0,
        Some(s) => axis_survival(s.az_width(), spread) * axis_survival(s.el_width(), spread),
    }
}

fn axis_survival(width: f64, spread: f64) -> f64 {
    if spread == 0.0 {
        return 1.0;
    }
    let b = spread * FRAC_1_SQRT_2;
    let c = (-PI / b).exp();
    let l = width.min(PI);
    let p_out = (b * (1.0 - (-l / b).exp()) - c * l) / (width * (1.0 - c));
    1.0 - p_out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayParams {
    pub gain: C64,
    pub aod: Direction,
    pub aoa: Direction,
    pub cluster: usize,
    pub ray: usize,
    /// Λt at the departure angle.
    pub tx_gain: f64,
    /// Λr at the arrival angle.
    pub rx_gain: f64,
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: CMat,
    pub rays: Vec<RayParams>,
    pub params: ChannelParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
}

/// Laplacian offset with standard deviation `spread`, resampled until it
/// lies in [-π, π].
fn laplacian_offset<R: Rng + ?Sized>(rng: &mut R, spread: f64) -> f64 {
    let b = spread * FRAC_1_SQRT_2;
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        if spread == 0.0 {
            return 0.0;
        }
        let x = -b * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        if x.is_finite() && x.abs() <= PI {
            return x;
        }
    }
}

fn mean_direction<R: Rng + ?Sized>(rng: &mut R, sector: Option<&Sector>) -> Direction {
    let u_az: f64 = rng.random();
    let u_el: f64 = rng.random();
    match sector {
        Some(s) => Direction::new(
            s.az_min + u_az * s.az_width(),
            s.el_min + u_el * s.el_width(),
        ),
        // uniform on the sphere: az uniform, cos(el) uniform
        None => Direction::new(-PI + TAU * u_az, (1.0 - 2.0 * u_el).acos()),
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

pub fn sample_channel<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> Result<ChannelRealization> {
    params.validate()?;
    let ncl = params.n_clusters;
    let nray = params.n_rays;
    let spread = params.angle_spread;
    let tx_sector = params.tx.sector.as_ref();
    let rx_sector = params.rx.sector.as_ref();

    let means: Vec<(Direction, Direction)> = (0..ncl)
        .map(|_| {
            let t = mean_direction(rng, tx_sector);
            let r = mean_direction(rng, rx_sector);
            (t, r)
        })
        .collect();

    let mut angles = Vec::with_capacity(ncl * nray);
    for (i, (t, r)) in means.iter().enumerate() {
        for l in 0..nray {
            let t_az = t.az + laplacian_offset(rng, spread);
            let t_el = t.el + laplacian_offset(rng, spread);
            let r_az = r.az + laplacian_offset(rng, spread);
            let r_el = r.el + laplacian_offset(rng, spread);
            angles.push((i, l, Direction::new(t_az, t_el), Direction::new(r_az, r_el)));
        }
    }

    let variances = params.cluster_variances();
    let rays: Vec<RayParams> = angles
        .into_iter()
        .map(|(i, l, aod, aoa)| RayParams {
            gain: complex_normal(rng, variances[i]),
            aod,
            aoa,
            cluster: i,
            ray: l,
            tx_gain: params.tx.gain(aod),
            rx_gain: params.rx.gain(aoa),
        })
        .collect();

    let h = assemble(params, &rays);
    Ok(ChannelRealization {
        h,
        rays,
        params: params.clone(),
    })
}

fn assemble(params: &ChannelParams, rays: &[RayParams]) -> CMat {
    let nt = params.tx.n_elements();
    let nr = params.rx.n_elements();
    let scale = ((nt * nr) as f64 / rays.len() as f64).sqrt();
    let a_t = dictionary(&params.tx, rays.iter().map(|r| r.aod));
    let mut a_r = dictionary(&params.rx, rays.iter().map(|r| r.aoa));
    for (j, ray) in rays.iter().enumerate() {
        let c = ray.gain * (scale * ray.tx_gain * ray.rx_gain);
        let mut col = a_r.column_mut(j);
        col *= c;
    }
    a_r * a_t.adjoint()
}

fn dictionary(geom: &ArrayGeometry, dirs: impl Iterator<Item = Direction>) -> CMat {
    let dirs: Vec<Direction> = dirs.collect();
    let mut m = CMat::zeros(geom.n_elements(), dirs.len());
    for (j, d) in dirs.iter().enumerate() {
        m.set_column(j, &geom.response(*d));
    }
    m
}

/// Matrix of array responses at every ray's departure (`Tx`) or arrival
/// (`Rx`) direction, in ray order.
pub fn response_dictionary(real: &ChannelRealization, side: Side) -> CMat {
    match side {
        Side::Tx => dictionary(&real.params.tx, real.rays.iter().map(|r| r.aod)),
        Side::Rx => dictionary(&real.params.rx, real.rays.iter().map(|r| r.aoa)),
    }
}

impl ChannelRealization {
    pub fn nt(&self) -> usize {
        self.h.ncols()
    }

    pub fn nr(&self) -> usize {
        self.h.nrows()
    }

    /// Hash over the exact bit patterns of `H`; equal realizations hash equal.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.h.nrows().hash(&mut hasher);
        self.h.ncols().hash(&mut hasher);
        for z in self.h.iter() {
            z.re.to_bits().hash(&mut hasher);
            z.im.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }

    pub fn to_dump(&self) -> ChannelDump {
        // row-major
        let mut h = Vec::with_capacity(self.h.len());
        for i in 0..self.h.nrows() {
            for j in 0..self.h.ncols() {
                let z = self.h[(i, j)];
                h.push([z.re, z.im]);
            }
        }
        ChannelDump {
            nr: self.nr(),
            nt: self.nt(),
            n_clusters: self.params.n_clusters,
            n_rays: self.params.n_rays,
            rays: self
                .rays
                .iter()
                .map(|r| RayRecord {
                    cluster: r.cluster,
                    ray: r.ray,
                    gain: [r.gain.re, r.gain.im],
                    aod_az: r.aod.az,
                    aod_el: r.aod.el,
                    aoa_az: r.aoa.az,
                    aoa_el: r.aoa.el,
                    tx_gain: r.tx_gain,
                    rx_gain: r.rx_gain,
                })
                .collect(),
            h,
        }
    }
}

/// One realization as written to a channel dump file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub nr: usize,
    pub nt: usize,
    pub n_clusters: usize,
    pub n_rays: usize,
    pub rays: Vec<RayRecord>,
    /// Row-major `[re, im]` pairs.
    pub h: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayRecord {
    pub cluster: usize,
    pub ray: usize,
    pub gain: [f64; 2],
    pub aod_az: f64,
    pub aod_el: f64,
    pub aoa_az: f64,
    pub aoa_el: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

impl ChannelDump {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn matrix(&self) -> Result<CMat> {
        if self.h.len() != self.nr * self.nt {
            return Err(Error::InvalidArgument(format!(
                "dump has {} entries for a {}x{} channel",
                self.h.len(),
                self.nr,
                self.nt
            )));
        }
        Ok(CMat::from_fn(self.nr, self.nt, |i, j| {
            let [re, im] = self.h[i * self.nt + j];
            C64::new(re, im)
        }))
    }
}
