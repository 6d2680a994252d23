//! The fixed 60-camera rig: 5 elevation rings x 12 azimuths.
//!
//! Index convention (used by every file format): `index = 12 * ring + azimuth`,
//! ring `k` at pitch `30 * (k + 1)` degrees from +z and azimuth `j` at yaw
//! `30 * j` degrees, counterclockwise from +x seen from +z.

use crate::error::{Error, Result};
use crate::geom::{sin_cos_30, Vec3};

pub const RINGS: usize = 5;
pub const AZIMUTHS: usize = 12;
pub const VIEW_COUNT: usize = RINGS * AZIMUTHS;
pub const STEP_DEGREES: i32 = 30;
pub const DEFAULT_RADIUS: f64 = 2.0;

/// Radius of the sphere circumscribing the unit cube.
pub const CUBE_CIRCUMRADIUS: f64 = 0.866_025_403_784_438_6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewpoint {
    pub ring: usize,
    pub azimuth: usize,
    pub radius: f64,
    pub position: Vec3,
}

impl Viewpoint {
    pub fn new(ring: usize, azimuth: usize, radius: f64) -> Result<Self> {
        if ring >= RINGS || azimuth >= AZIMUTHS {
            return Err(Error::invalid(format!(
                "viewpoint (ring {ring}, azimuth {azimuth}) outside the 5x12 rig"
            )));
        }
        let (sp, cp) = sin_cos_30(ring as i64 + 1);
        let (st, ct) = sin_cos_30(azimuth as i64);
        Ok(Viewpoint {
            ring,
            azimuth,
            radius,
            position: [radius * sp * ct, radius * sp * st, radius * cp],
        })
    }

    pub fn index(&self) -> usize {
        self.ring * AZIMUTHS + self.azimuth
    }

    /// Pitch from +z, degrees.
    pub fn phi(&self) -> i32 {
        STEP_DEGREES * (self.ring as i32 + 1)
    }

    /// Yaw from +x, degrees.
    pub fn theta(&self) -> i32 {
        STEP_DEGREES * self.azimuth as i32
    }
}

pub fn index_of(ring: usize, azimuth: usize) -> Result<usize> {
    if ring >= RINGS || azimuth >= AZIMUTHS {
        return Err(Error::invalid(format!(
            "(ring {ring}, azimuth {azimuth}) outside the 5x12 rig"
        )));
    }
    Ok(ring * AZIMUTHS + azimuth)
}

/// `(ring, azimuth)` of a viewpoint index.
pub fn cell_of(index: usize) -> Result<(usize, usize)> {
    if index >= VIEW_COUNT {
        return Err(Error::invalid(format!("viewpoint index {index} outside 0..60")));
    }
    Ok((index / AZIMUTHS, index % AZIMUTHS))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rig {
    radius: f64,
    views: Vec<Viewpoint>,
}

impl Rig {
    pub fn build(radius: f64) -> Result<Self> {
        if !(radius > CUBE_CIRCUMRADIUS) || !radius.is_finite() {
            return Err(Error::invalid(format!(
                "rig radius {radius} must exceed the unit-cube circumradius {CUBE_CIRCUMRADIUS}"
            )));
        }
        let views = (0..VIEW_COUNT)
            .map(|i| Viewpoint::new(i / AZIMUTHS, i % AZIMUTHS, radius))
            .collect::<Result<_>>()?;
        Ok(Rig { radius, views })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn views(&self) -> &[Viewpoint] {
        &self.views
    }

    pub fn viewpoint(&self, index: usize) -> Result<Viewpoint> {
        self.views
            .get(index)
            .copied()
            .ok_or_else(|| Error::invalid(format!("viewpoint index {index} outside 0..60")))
    }
}

impl Default for Rig {
    fn default() -> Self {
        Rig::build(DEFAULT_RADIUS).expect("default radius is valid")
    }
}
