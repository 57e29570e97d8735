//! Shoebox image-source expansion.

use serde::{Deserialize, Serialize};

use super::geometry::Vec3;
use crate::error::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Extent along x (depth), y (width) and z (height), meters.
    pub dimensions: Vec3,
    /// Energy absorption coefficient shared by all six walls, in (0, 1].
    pub absorption: f64,
    pub max_image_order: usize,
    #[serde(default = "default_c")]
    pub speed_of_sound: f64,
    /// Images whose accumulated reflection gain falls below this are dropped.
    /// Zero keeps every image up to `max_image_order`.
    #[serde(default)]
    pub min_reflection_gain: f64,
}

fn default_c() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

impl RoomSpec {
    pub fn new(dimensions: Vec3, absorption: f64, max_image_order: usize) -> Result<Self> {
        let r = RoomSpec {
            dimensions,
            absorption,
            max_image_order,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            min_reflection_gain: 0.0,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "room dimensions must be positive, got {:?}",
                self.dimensions
            )));
        }
        if !(self.absorption > 0.0 && self.absorption <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "absorption must be in (0, 1], got {}",
                self.absorption
            )));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::InvalidConfig("speed of sound must be positive".into()));
        }
        Ok(())
    }

    /// Pressure reflection coefficient `sqrt(1 − α)`.
    pub fn reflection_coefficient(&self) -> f64 {
        (1.0 - self.absorption).max(0.0).sqrt()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] > 0.0 && p[i] < self.dimensions[i])
    }

    /// Smallest distance from `p` to any wall.
    pub fn wall_distance(&self, p: Vec3) -> f64 {
        (0..3)
            .map(|i| p[i].min(self.dimensions[i] - p[i]))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Vec3,
    /// Accumulated wall reflection gain, before distance attenuation.
    pub amplitude: f64,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSourceSet {
    pub images: Vec<ImageSource>,
    pub speed_of_sound: f64,
}

impl ImageSourceSet {
    /// A free-field set holding only the given source.
    pub fn direct(position: Vec3, speed_of_sound: f64) -> Self {
        ImageSourceSet {
            images: vec![ImageSource {
                position,
                amplitude: 1.0,
                order: 0,
            }],
            speed_of_sound,
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Image coordinate along one axis of extent `l` for index `i`; `|i|` is the
/// number of reflections.
#[inline]
pub fn mirror_coordinate(x: f64, l: f64, i: i64) -> f64 {
    if i % 2 == 0 {
        i as f64 * l + x
    } else {
        (i + 1) as f64 * l - x
    }
}

/// All images of `source` up to `room.max_image_order` reflections. The
/// direct path comes first; the remaining images are ordered by reflection
/// count. `listener` is only checked for validity.
pub fn image_sources(room: &RoomSpec, source: Vec3, listener: Vec3) -> Result<ImageSourceSet> {
    room.validate()?;
    if !room.contains(source) || !room.contains(listener) {
        return Err(Error::InvalidGeometry(
            "source and listener must lie strictly inside the room".into(),
        ));
    }
    let k = room.max_image_order as i64;
    let beta = room.reflection_coefficient();
    let [lx, ly, lz] = room.dimensions;
    let mut images = Vec::new();
    for order in 0..=k {
        let gain = beta.powi(order as i32);
        if order > 0 && room.min_reflection_gain > 0.0 && gain < room.min_reflection_gain {
            break;
        }
        for i in -order..=order {
            let rem = order - i.abs();
            for j in -rem..=rem {
                let kz = rem - j.abs();
                let zs: &[i64] = if kz == 0 { &[0] } else { &[-kz, kz] };
                for &kk in zs {
                    images.push(ImageSource {
                        position: [
                            mirror_coordinate(source[0], lx, i),
                            mirror_coordinate(source[1], ly, j),
                            mirror_coordinate(source[2], lz, kk),
                        ],
                        amplitude: gain,
                        order: order as usize,
                    });
                }
            }
        }
    }
    Ok(ImageSourceSet {
        images,
        speed_of_sound: room.speed_of_sound,
    })
}

/// Number of images with at most `k` reflections in a shoebox.
pub fn image_count(k: usize) -> usize {
    let k = k as i64;
    ((2 * k + 1) * (2 * k * k + 2 * k + 3) / 3) as usize
}
