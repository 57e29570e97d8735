//! Randomized reverberant scenes: room sampling, image sources, RIR rendering
//! for the array and for the reference Ambisonics, and scene synthesis.

pub mod geometry;
pub mod render;
pub mod room;
pub mod source;
pub mod spec;
pub mod synth;

pub use geometry::{ArrayGeometry, Vec3};
pub use render::{fd_kernel, render_ambi_rirs, render_mic_rirs, Rirs, FD_TAPS};
pub use room::{image_sources, ImageSource, ImageSourceSet, RoomSpec};
pub use source::{load_corpus, synthetic_source, MonoSignal};
pub use spec::{derive_seed, sample_scene_spec, SceneConfig, SceneSpec};
pub use synth::{scene_rirs, synth_from_rirs, synth_scene, RirSet, SceneAudio};
