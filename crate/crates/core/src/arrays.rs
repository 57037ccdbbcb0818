//! Antenna array geometries, array response vectors and ideal sectored
//! element gains.
//!
//! Conventions used throughout the crate:
//!
//! * angles are radians; azimuth `az` is measured in the xy-plane and is
//!   interpreted modulo 2π, elevation `el` is measured from the z-axis;
//! * a ULA lies on the y-axis, a UPA lies in the yz-plane with `width`
//!   elements along y and `height` along z;
//! * UPA elements are ordered y-major: element `(m, n)` sits at index
//!   `m * height + n`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};

/// A propagation direction in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub az: f64,
    pub el: f64,
}

impl Direction {
    pub fn new(az: f64, el: f64) -> Self {
        Direction { az, el }
    }

    pub fn from_degrees(az_deg: f64, el_deg: f64) -> Self {
        Direction {
            az: az_deg.to_radians(),
            el: el_deg.to_radians(),
        }
    }

    /// Broadside of a yz-plane array: az = 0, el = π/2.
    pub fn broadside() -> Self {
        Direction { az: 0.0, el: PI / 2.0 }
    }
}

/// Closed angular sector `[az_min, az_max] x [el_min, el_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub az_min: f64,
    pub az_max: f64,
    pub el_min: f64,
    pub el_max: f64,
}

impl Sector {
    pub fn new(az_min: f64, az_max: f64, el_min: f64, el_max: f64) -> Result<Self> {
        let s = Sector {
            az_min,
            az_max,
            el_min,
            el_max,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_degrees(az_min: f64, az_max: f64, el_min: f64, el_max: f64) -> Result<Self> {
        Sector::new(
            az_min.to_radians(),
            az_max.to_radians(),
            el_min.to_radians(),
            el_max.to_radians(),
        )
    }

    /// Sector of width `az_width` x `el_width` centered on broadside.
    pub fn centered(az_width: f64, el_width: f64) -> Result<Self> {
        Sector::new(
            -az_width / 2.0,
            az_width / 2.0,
            PI / 2.0 - el_width / 2.0,
            PI / 2.0 + el_width / 2.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.az_min, self.az_max, self.el_min, self.el_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidGeometry("sector bounds must be finite".into()));
        }
        if !(self.az_min < self.az_max) || !(self.el_min < self.el_max) {
            return Err(Error::InvalidGeometry(format!(
                "empty sector: az [{}, {}], el [{}, {}]",
                self.az_min, self.az_max, self.el_min, self.el_max
            )));
        }
        Ok(())
    }

    pub fn az_width(&self) -> f64 {
        self.az_max - self.az_min
    }

    pub fn el_width(&self) -> f64 {
        self.el_max - self.el_min
    }

    pub fn center(&self) -> Direction {
        Direction::new(
            0.5 * (self.az_min + self.az_max),
            0.5 * (self.el_min + self.el_max),
        )
    }

    pub fn contains(&self, dir: Direction) -> bool {
        element_gain(self, dir) > 0.0
    }
}

/// Ideal sectored element gain: 1 inside the closed sector, 0 elsewhere.
/// Azimuth is compared modulo 2π, starting at `az_min`.
pub fn element_gain(sector: &Sector, dir: Direction) -> f64 {
    let mut az = (dir.az - sector.az_min).rem_euclid(TAU) + sector.az_min;
    // rem_euclid can land a hair below 2π for values just under az_min.
    if az - sector.az_min > TAU - 1e-15 {
        az -= TAU;
    }
    let az_in = az >= sector.az_min && az <= sector.az_max;
    let el_in = dir.el >= sector.el_min && dir.el <= sector.el_max;
    if az_in && el_in {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArrayKind {
    Ula { n: usize },
    Upa { width: usize, height: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    /// Element spacing over wavelength, d/λ.
    pub spacing: f64,
    /// Element sector; `None` means omni-directional elements.
    pub sector: Option<Sector>,
}

impl ArrayGeometry {
    pub fn ula(n: usize, spacing: f64) -> Self {
        ArrayGeometry {
            kind: ArrayKind::Ula { n },
            spacing,
            sector: None,
        }
    }

    pub fn upa(width: usize, height: usize, spacing: f64) -> Self {
        ArrayGeometry {
            kind: ArrayKind::Upa { width, height },
            spacing,
            sector: None,
        }
    }

    /// Square half-wavelength UPA with `side * side` elements.
    pub fn square(side: usize) -> Self {
        Self::upa(side, side, 0.5)
    }

    pub fn with_sector(mut self, sector: Sector) -> Self {
        self.sector = Some(sector);
        self
    }

    pub fn n_elements(&self) -> usize {
        match self.kind {
            ArrayKind::Ula { n } => n,
            ArrayKind::Upa { width, height } => width * height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ArrayKind::Ula { n } => n >= 1,
            ArrayKind::Upa { width, height } => width >= 1 && height >= 1,
        };
        if !ok {
            return Err(Error::InvalidGeometry("array needs at least one element".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "element spacing must be positive, got {}",
                self.spacing
            )));
        }
        if let Some(s) = &self.sector {
            s.validate()?;
        }
        Ok(())
    }

    /// Element gain at `dir`; omni arrays have unit gain everywhere.
    pub fn gain(&self, dir: Direction) -> f64 {
        match &self.sector {
            Some(s) => element_gain(s, dir),
            None => 1.0,
        }
    }

    /// Normalized array response at `dir`. ULAs ignore elevation.
    pub fn response(&self, dir: Direction) -> CVec {
        match self.kind {
            ArrayKind::Ula { n } => ula_response(n, self.spacing, dir.az),
            ArrayKind::Upa { width, height } => upa_response(width, height, self.spacing, dir),
        }
    }
}

/// `a(φ)[m] = exp(j m kd sin φ) / √N` with `kd = 2π d/λ`.
pub fn ula_response(n: usize, spacing: f64, az: f64) -> CVec {
    let kd = TAU * spacing;
    let scale = 1.0 / (n as f64).sqrt();
    let step = kd * az.sin();
    CVec::from_fn(n, |m, _| C64::from_polar(scale, m as f64 * step))
}

/// `a(φ, θ)[m·H + n] = exp(j kd (m sin φ sin θ + n cos θ)) / √(W·H)`.
pub fn upa_response(width: usize, height: usize, spacing: f64, dir: Direction) -> CVec {
    let kd = TAU * spacing;
    let scale = 1.0 / ((width * height) as f64).sqrt();
    let py = kd * dir.az.sin() * dir.el.sin();
    let pz = kd * dir.el.cos();
    CVec::from_fn(width * height, |idx, _| {
        let m = (idx / height) as f64;
        let n = (idx % height) as f64;
        C64::from_polar(scale, m * py + n * pz)
    })
}
