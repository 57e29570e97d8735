//! On-disk scene datasets.
//!
//! ```text
//! <root>/<split>/<scene_id>/mics.wav      Q channels, 32-bit float
//! <root>/<split>/<scene_id>/ref_foa.wav   (N+1)² channels, ACN/N3D, 32-bit float
//! <root>/<split>/<scene_id>/scene.json    SceneMeta
//! ```
//!
//! Splits are `train`, `val` and `test`, by default in proportion 80/10/10,
//! assigned in scene order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::scene::{
    derive_seed, sample_scene_spec, source::resolve_synthetic, synth_scene, ArrayGeometry, MonoSignal, RoomSpec,
    SceneAudio, SceneConfig, Vec3,
};
use crate::formats;
use crate::tf::{stft, StftConfig, StftTensor};
use crate::wav;

pub const FORMAT_VERSION: u32 = 1;
pub const SPLITS: [&str; 3] = ["train", "val", "test"];
pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];
pub const MICS_FILE: &str = "mics.wav";
pub const REFERENCE_FILE: &str = "ref_foa.wav";
pub const META_FILE: &str = "scene.json";

/// Files an estimates directory may hold per scene, checked in this order.
pub const ESTIMATE_TENSOR_FILE: &str = "foa.ambten";
pub const ESTIMATE_MATRIX_FILE: &str = "matrix.ambtfe";
pub const ESTIMATE_WAV_FILE: &str = "foa.wav";

/// Scenes rendered in memory before a batch is written out.
const RENDER_BATCH: usize = 32;
const CORPUS_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMeta {
    pub position: Vec3,
    pub signal_id: String,
    pub signal_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShMeta {
    pub order: usize,
    pub channel_ordering: String,
    pub normalization: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub format_version: u32,
    pub scene_id: String,
    pub split: String,
    pub seed: u64,
    pub room: RoomSpec,
    pub array_position: Vec3,
    pub array: ArrayGeometry,
    pub sources: Vec<SourceMeta>,
    pub sample_rate: u32,
    pub scene_seconds: f64,
    pub sh: ShMeta,
}

/// Where source signals come from.
#[derive(Debug, Clone)]
pub enum SignalPool {
    Synthetic,
    Corpus(Vec<MonoSignal>),
}

pub fn scene_id(index: usize) -> String {
    format!("scene_{index:05}")
}

pub fn validate_split_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    Ok(())
}

/// Scene counts of `[train, val, test]`; test takes the rounding remainder.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let train = ((ratios[0] * n as f64).round() as usize).min(n);
    let val = ((ratios[1] * n as f64).round() as usize).min(n - train);
    [train, val, n - train - val]
}

pub fn split_of(index: usize, n: usize, ratios: [f64; 3]) -> &'static str {
    let [train, val, _] = split_counts(n, ratios);
    if index < train {
        SPLITS[0]
    } else if index < train + val {
        SPLITS[1]
    } else {
        SPLITS[2]
    }
}

pub fn scene_dir(root: &Path, split: &str, scene_id: &str) -> PathBuf {
    root.join(split).join(scene_id)
}

/// Repeats `samples` until it is `len` long, then truncates.
fn fit_length(samples: &[f64], len: usize) -> Vec<f64> {
    samples.iter().copied().cycle().take(len).collect()
}

fn pick_signals(pool: &SignalPool, seed: u64, ids: &[String], config: &SceneConfig) -> Result<Vec<MonoSignal>> {
    let len = config.scene_samples();
    match pool {
        SignalPool::Synthetic => ids
            .iter()
            .map(|id| resolve_synthetic(id, len, config.sample_rate))
            .collect(),
        SignalPool::Corpus(clips) => {
            if clips.is_empty() {
                return Err(Error::InvalidConfig("source corpus is empty".into()));
            }
            (0..ids.len())
                .map(|i| {
                    let pick = derive_seed(seed, CORPUS_STREAM + i as u64) % clips.len() as u64;
                    let clip = &clips[pick as usize];
                    if clip.sample_rate != config.sample_rate {
                        return Err(Error::SampleRateMismatch {
                            expected: config.sample_rate,
                            actual: clip.sample_rate,
                        });
                    }
                    if clip.samples.is_empty() {
                        return Err(Error::EmptySignal);
                    }
                    Ok(MonoSignal {
                        samples: fit_length(&clip.samples, len),
                        ..clip.clone()
                    })
                })
                .collect()
        }
    }
}

/// Size, seed and split of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetPlan {
    pub scenes: usize,
    pub seed: u64,
    pub split_ratios: [f64; 3],
}

impl DatasetPlan {
    pub fn new(scenes: usize, seed: u64) -> Self {
        DatasetPlan {
            scenes,
            seed,
            split_ratios: DEFAULT_SPLIT_RATIOS,
        }
    }
}

/// Renders scene `index` of `plan`.
pub fn render_scene(
    index: usize,
    plan: &DatasetPlan,
    config: &SceneConfig,
    array: &ArrayGeometry,
    pool: &SignalPool,
) -> Result<(SceneMeta, SceneAudio)> {
    let scene_seed = derive_seed(plan.seed, index as u64);
    let mut spec = sample_scene_spec(scene_seed, config)?;
    let signals = pick_signals(pool, scene_seed, &spec.source_signal_ids, config)?;
    spec.source_signal_ids = signals.iter().map(|s| s.id.clone()).collect();
    let audio = synth_scene(&spec, array, &signals, config)?;
    let meta = SceneMeta {
        format_version: FORMAT_VERSION,
        scene_id: scene_id(index),
        split: split_of(index, plan.scenes, plan.split_ratios).to_string(),
        seed: scene_seed,
        room: spec.room,
        array_position: spec.array_position,
        array: array.clone(),
        sources: spec
            .source_positions
            .iter()
            .zip(&signals)
            .map(|(p, s)| SourceMeta {
                position: *p,
                signal_id: s.id.clone(),
                signal_sha256: s.sha256.clone(),
            })
            .collect(),
        sample_rate: config.sample_rate,
        scene_seconds: config.scene_seconds,
        sh: ShMeta {
            order: config.sh.order,
            channel_ordering: "ACN".into(),
            normalization: "N3D".into(),
        },
    };
    Ok((meta, audio))
}

pub fn write_scene(root: &Path, meta: &SceneMeta, audio: &SceneAudio) -> Result<PathBuf> {
    let dir = scene_dir(root, &meta.split, &meta.scene_id);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    wav::write_f32(&dir.join(MICS_FILE), &audio.mics, audio.sample_rate)?;
    wav::write_f32(&dir.join(REFERENCE_FILE), &audio.reference, audio.sample_rate)?;
    let meta_path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(meta)?;
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(dir)
}

pub fn read_meta(dir: &Path) -> Result<SceneMeta> {
    let p = dir.join(META_FILE);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let meta: SceneMeta = serde_json::from_str(&text)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported format_version {}",
            p.display(),
            meta.format_version
        )));
    }
    Ok(meta)
}

pub fn read_scene(dir: &Path) -> Result<(SceneMeta, SceneAudio)> {
    let meta = read_meta(dir)?;
    let (mics, sr_m) = wav::read(&dir.join(MICS_FILE))?;
    let (reference, sr_r) = wav::read(&dir.join(REFERENCE_FILE))?;
    for sr in [sr_m, sr_r] {
        if sr != meta.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: meta.sample_rate,
                actual: sr,
            });
        }
    }
    Ok((
        meta,
        SceneAudio {
            mics,
            reference,
            sample_rate: sr_m,
        },
    ))
}

/// Scene directories of `split`, sorted by scene id.
pub fn list_scenes(root: &Path, split: &str) -> Result<Vec<PathBuf>> {
    let dir = root.join(split);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(META_FILE).is_file())
        .collect();
    out.sort();
    Ok(out)
}

/// STFT of an externally produced estimate for one scene.
///
/// `dir` is `<estimates>/<split>/<scene_id>`. A precomputed STFT tensor is
/// used as is, an encoding matrix (static or time-variant) is applied to
/// `mics`, and a wav file is analyzed with `config`.
pub fn load_estimate(dir: &Path, mics: &[Vec<f64>], config: &StftConfig) -> Result<StftTensor> {
    let tensor = dir.join(ESTIMATE_TENSOR_FILE);
    if tensor.is_file() {
        return formats::read_tensor(&tensor, *config);
    }
    let matrix = dir.join(ESTIMATE_MATRIX_FILE);
    if matrix.is_file() {
        return crate::pipeline::encode_mics(&formats::read_any_matrix(&matrix)?, mics, config);
    }
    let wav_path = dir.join(ESTIMATE_WAV_FILE);
    if wav_path.is_file() {
        let (signals, sr) = wav::read(&wav_path)?;
        if sr != config.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: config.sample_rate,
                actual: sr,
            });
        }
        return stft(&signals, config);
    }
    Err(Error::Format(format!(
        "{}: no {ESTIMATE_TENSOR_FILE}, {ESTIMATE_MATRIX_FILE} or {ESTIMATE_WAV_FILE}",
        dir.display()
    )))
}

/// Renders `scenes` scenes into `root`. Rendering runs in parallel batches;
/// files are written in scene order. Returns the metadata of every scene.
pub fn simulate(
    root: &Path,
    plan: &DatasetPlan,
    config: &SceneConfig,
    array: &ArrayGeometry,
    pool: &SignalPool,
) -> Result<Vec<SceneMeta>> {
    config.validate()?;
    array.validate()?;
    validate_split_ratios(plan.split_ratios)?;
    let scenes = plan.scenes;
    let mut metas = Vec::with_capacity(scenes);
    let mut start = 0;
    while start < scenes {
        let n = RENDER_BATCH.min(scenes - start);
        let batch = par::try_map_range(n, |i| render_scene(start + i, plan, config, array, pool))?;
        for (meta, audio) in batch {
            write_scene(root, &meta, &audio)?;
            log::debug!("wrote {}/{}", meta.split, meta.scene_id);
            metas.push(meta);
        }
        start += n;
    }
    Ok(metas)
}
