use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{distance, Vec3};
use super::room::{RoomSpec, DEFAULT_SPEED_OF_SOUND};
use super::source::synthetic_id;
use crate::error::{Error, Result};
use crate::sh::ShConfig;

const MAX_ATTEMPTS: usize = 10_000;

/// Sampling ranges and rendering defaults for randomized scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Room extent along x, meters.
    pub depth_range: [f64; 2],
    /// Room extent along y, meters.
    pub width_range: [f64; 2],
    /// Room extent along z, meters.
    pub height_range: [f64; 2],
    pub absorption_range: [f64; 2],
    pub max_image_order: usize,
    pub min_reflection_gain: f64,
    pub min_wall_distance: f64,
    pub min_source_distance: f64,
    /// Sources keep at least this far from the walls.
    pub source_wall_margin: f64,
    pub source_count: [usize; 2],
    pub sample_rate: u32,
    pub scene_seconds: f64,
    pub speed_of_sound: f64,
    pub sh: ShConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            depth_range: [3.0, 20.0],
            width_range: [3.0, 12.0],
            height_range: [3.0, 8.0],
            absorption_range: [0.2, 0.9],
            max_image_order: 17,
            min_reflection_gain: 1e-3,
            min_wall_distance: 1.0,
            min_source_distance: 2.0,
            source_wall_margin: 0.5,
            source_count: [1, 3],
            sample_rate: 24_000,
            scene_seconds: 2.0,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            sh: ShConfig::FIRST_ORDER,
        }
    }
}

impl SceneConfig {
    pub fn scene_samples(&self) -> usize {
        (self.scene_seconds * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("depth_range", self.depth_range),
            ("width_range", self.width_range),
            ("height_range", self.height_range),
            ("absorption_range", self.absorption_range),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must satisfy 0 < lo <= hi")));
            }
        }
        if self.absorption_range[1] > 1.0 {
            return Err(Error::InvalidConfig("absorption must not exceed 1".into()));
        }
        let [smin, smax] = self.source_count;
        if smin == 0 || smin > smax {
            return Err(Error::InvalidConfig(
                "source_count must satisfy 1 <= min <= max".into(),
            ));
        }
        if self.sample_rate == 0 || !(self.scene_seconds > 0.0) {
            return Err(Error::InvalidConfig(
                "sample_rate and scene_seconds must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: RoomSpec,
    pub array_position: Vec3,
    pub source_positions: Vec<Vec3>,
    pub source_signal_ids: Vec<String>,
    pub seed: u64,
}

impl SceneSpec {
    /// Checks every placement constraint of `config` against this scene.
    pub fn check(&self, config: &SceneConfig) -> Result<()> {
        let n = self.source_positions.len();
        if n < config.source_count[0] || n > config.source_count[1] {
            return Err(Error::InvalidConfig(format!("{n} sources outside allowed count")));
        }
        if self.source_signal_ids.len() != n {
            return Err(Error::LengthMismatch {
                what: "source signal ids vs sources",
                left: self.source_signal_ids.len(),
                right: n,
            });
        }
        let dims = self.room.dimensions;
        let ranges = [config.depth_range, config.width_range, config.height_range];
        for i in 0..3 {
            if dims[i] < ranges[i][0] || dims[i] > ranges[i][1] {
                return Err(Error::InvalidConfig(format!(
                    "room dimension {i} = {} outside {:?}",
                    dims[i], ranges[i]
                )));
            }
        }
        if self.room.wall_distance(self.array_position) < config.min_wall_distance {
            return Err(Error::InvalidConfig("array too close to a wall".into()));
        }
        for s in &self.source_positions {
            if !self.room.contains(*s) {
                return Err(Error::InvalidConfig("source outside room".into()));
            }
            if distance(*s, self.array_position) < config.min_source_distance {
                return Err(Error::InvalidConfig("source too close to array".into()));
            }
        }
        Ok(())
    }
}

/// Draws a random scene. Deterministic in `seed`.
pub fn sample_scene_spec(seed: u64, config: &SceneConfig) -> Result<SceneSpec> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    };

    let dimensions = [
        uniform(&mut rng, config.depth_range),
        uniform(&mut rng, config.width_range),
        uniform(&mut rng, config.height_range),
    ];
    if dimensions.iter().any(|d| *d <= 2.0 * config.min_wall_distance) {
        return Err(Error::Unsatisfiable {
            constraint: "array distance to walls",
            attempts: 1,
        });
    }
    let absorption = uniform(&mut rng, config.absorption_range);
    let room = RoomSpec {
        dimensions,
        absorption,
        max_image_order: config.max_image_order,
        speed_of_sound: config.speed_of_sound,
        min_reflection_gain: config.min_reflection_gain,
    };
    room.validate()?;

    let w = config.min_wall_distance;
    let array_position: Vec3 =
        std::array::from_fn(|i| uniform(&mut rng, [w, dimensions[i] - w]));

    let n_sources = rng.random_range(config.source_count[0]..=config.source_count[1]);
    let m = config.source_wall_margin.max(1e-3);
    let mut source_positions = Vec::with_capacity(n_sources);
    for _ in 0..n_sources {
        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS {
            let p: Vec3 = std::array::from_fn(|i| uniform(&mut rng, [m, dimensions[i] - m]));
            if distance(p, array_position) >= config.min_source_distance {
                placed = Some(p);
                break;
            }
        }
        match placed {
            Some(p) => source_positions.push(p),
            None => {
                return Err(Error::Unsatisfiable {
                    constraint: "source distance to array",
                    attempts: MAX_ATTEMPTS,
                })
            }
        }
    }
    let source_signal_ids = (0..n_sources)
        .map(|i| synthetic_id(derive_seed(seed, i as u64 + 1)))
        .collect();

    Ok(SceneSpec {
        room,
        array_position,
        source_positions,
        source_signal_ids,
        seed,
    })
}

/// SplitMix64 mixing of a base seed with a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
