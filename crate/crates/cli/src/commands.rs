use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;

use foa_core::dataset::{self, DatasetPlan, SignalPool};
use foa_core::encoder::EncodingMatrix;
use foa_core::formats::{self, AnyMatrix};
use foa_core::metrics::{aggregate_reports, emit_comparison, emit_report, evaluate, LossWeights, MetricsReport};
use foa_core::par;
use foa_core::pipeline::{baseline_for_array, encode_mics, encode_to_signals};
use foa_core::scene::{load_corpus, ArrayGeometry};
use foa_core::tf::{istft, stft, StftConfig};
use foa_core::wav;

use crate::config::RunConfig;
use crate::{Cli, Command, DesignArgs, EncodeArgs, EvaluateArgs, SimulateArgs};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        configure_jobs(jobs)?;
    }
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Simulate(args) => simulate(config, args, cli.force),
        Command::DesignBaseline(args) => design(config, args, cli.force),
        Command::Encode(args) => encode(config, args, cli.force),
        Command::Evaluate(args) => evaluate_cmd(config, args, cli.force),
    }
}

#[cfg(feature = "parallel")]
fn configure_jobs(jobs: usize) -> Result<()> {
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .context("configuring worker pool")
}

#[cfg(not(feature = "parallel"))]
fn configure_jobs(_jobs: usize) -> Result<()> {
    warn!("built without the `parallel` feature; --jobs ignored");
    Ok(())
}

/// Fails on a non-empty directory unless `force`.
fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let nonempty = std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if nonempty && !force {
            bail!("{} is not empty; pass --force to overwrite", dir.display());
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn prepare_file(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} exists; pass --force to overwrite", path.display());
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DatasetManifest<'a> {
    format_version: u32,
    split_counts: HashMap<&'static str, usize>,
    config: &'a RunConfig,
}

fn simulate(mut config: RunConfig, args: SimulateArgs, force: bool) -> Result<()> {
    if let Some(n) = args.scenes {
        config.scenes = n;
    }
    if let Some(a) = args.array {
        config.array = a;
    }
    if args.corpus.is_some() {
        config.corpus = args.corpus;
    }
    config.validate()?;
    let array = config.array_geometry()?;
    let pool = match &config.corpus {
        Some(dir) => SignalPool::Corpus(load_corpus(dir)?),
        None => SignalPool::Synthetic,
    };
    prepare_dir(&args.out, force)?;
    if force {
        // stale scenes from an earlier, larger run would otherwise survive
        for split in dataset::SPLITS {
            let d = args.out.join(split);
            if d.exists() {
                std::fs::remove_dir_all(&d).with_context(|| format!("removing {}", d.display()))?;
            }
        }
    }
    let plan = DatasetPlan {
        scenes: config.scenes,
        seed: config.seed,
        split_ratios: config.split_ratios,
    };
    info!(
        "rendering {} scenes with the {} array into {}",
        plan.scenes,
        array.name,
        args.out.display()
    );
    dataset::simulate(&args.out, &plan, &config.scene, &array, &pool)?;
    let counts = dataset::split_counts(plan.scenes, plan.split_ratios);
    let manifest = DatasetManifest {
        format_version: dataset::FORMAT_VERSION,
        split_counts: dataset::SPLITS.into_iter().zip(counts).collect(),
        config: &config,
    };
    let path = args.out.join("dataset.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    info!("train/val/test = {}/{}/{}", counts[0], counts[1], counts[2]);
    Ok(())
}

fn design(mut config: RunConfig, args: DesignArgs, force: bool) -> Result<()> {
    if let Some(a) = args.array {
        config.array = a;
    }
    if let Some(cap) = args.gain_cap_db {
        config.gain_cap_db = cap;
    }
    if args.no_eq {
        config.diffuse_eq = false;
    }
    config.validate()?;
    let array = config.array_geometry()?;
    let channels = config.scene.sh.channels();
    if array.len() < channels {
        warn!(
            "{} microphones for {channels} Ambisonic channels: the design is underdetermined and regularization dominates",
            array.len()
        );
    }
    if config.diffuse_eq && array.max_radius() <= 1e-9 {
        warn!("all microphones coincide; diffuse-field EQ skipped");
    }
    prepare_file(&args.out, force)?;
    let design = baseline_for_array(&array, &config.baseline_params())?;
    formats::write_matrix(&args.out, &design.matrix)?;
    let m = &design.matrix;
    info!(
        "wrote {} ({} bins, {}x{})",
        args.out.display(),
        m.bins(),
        m.rows(),
        m.cols()
    );
    if args.audit {
        print_gain_audit(m, config.gain_cap_db);
    }
    Ok(())
}

fn print_gain_audit(m: &EncodingMatrix, cap_db: f64) {
    for r in 0..m.rows() {
        let (bin, g) = (0..m.bins())
            .map(|f| (f, m.row_gain_db(f, r)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, f64::NEG_INFINITY));
        let hz = bin as f64 * m.sample_rate / m.fft_size as f64;
        println!("channel {r}: max row gain {g:.3} dB at {hz:.1} Hz");
    }
    println!("max row gain {:.3} dB (cap {cap_db} dB)", m.max_row_gain_db());
}

/// STFT settings for applying `m`: its rate and FFT size, the configured hop.
fn matrix_stft(m: &AnyMatrix, config: &RunConfig) -> Result<StftConfig> {
    let (sr, n) = match m {
        AnyMatrix::Static(m) => (m.sample_rate, m.fft_size),
        AnyMatrix::TimeVariant(m) => (m.sample_rate, m.fft_size),
    };
    if sr.fract() != 0.0 || sr <= 0.0 {
        bail!("matrix sample rate {sr} is not a positive integer");
    }
    let cfg = StftConfig {
        fft_size: n,
        hop: if n == config.stft.fft_size { config.stft.hop } else { n / 2 },
        sample_rate: sr as u32,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn encode(config: RunConfig, args: EncodeArgs, force: bool) -> Result<()> {
    let matrix = formats::read_any_matrix(&args.matrix)?;
    let stft_cfg = matrix_stft(&matrix, &config)?;
    if let Some(input) = &args.input {
        if args.out_wav.is_none() && args.out_tensor.is_none() {
            bail!("nothing to write: pass --out-wav and/or --out-tensor");
        }
        for p in [&args.out_wav, &args.out_tensor].into_iter().flatten() {
            prepare_file(p, force)?;
        }
        let (mics, sr) = wav::read(input)?;
        check_rate(sr, &stft_cfg, input)?;
        let y = encode_mics(&matrix, &mics, &stft_cfg)?;
        if let Some(p) = &args.out_tensor {
            formats::write_tensor(p, &y)?;
            info!("wrote {}", p.display());
        }
        if let Some(p) = &args.out_wav {
            let len = mics.first().map_or(0, Vec::len);
            wav::write_f32(p, &istft(&y, Some(len))?, sr)?;
            info!("wrote {}", p.display());
        }
        return Ok(());
    }

    let root = args.dataset.as_deref().expect("clap enforces --input or --dataset");
    let out = args.out.as_deref().context("dataset mode needs --out")?;
    let scenes = dataset::list_scenes(root, &args.split)?;
    if scenes.is_empty() {
        bail!("no scenes in {}", root.join(&args.split).display());
    }
    prepare_dir(out, force)?;
    let rendered = par::try_map_range(scenes.len(), |i| -> Result<_> {
        let (meta, audio) = dataset::read_scene(&scenes[i])?;
        check_rate(audio.sample_rate, &stft_cfg, &scenes[i])?;
        let (_, foa) = encode_to_signals(&matrix, &audio.mics, &stft_cfg)?;
        Ok((meta, foa))
    })?;
    for (meta, foa) in rendered {
        let dir = dataset::scene_dir(out, &meta.split, &meta.scene_id);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        wav::write_f32(&dir.join(dataset::ESTIMATE_WAV_FILE), &foa, meta.sample_rate)?;
    }
    info!("encoded {} scenes into {}", scenes.len(), out.display());
    Ok(())
}

fn check_rate(sr: u32, cfg: &StftConfig, path: &Path) -> Result<()> {
    if sr != cfg.sample_rate {
        bail!(
            "{} is {sr} Hz but the matrix was designed for {} Hz",
            path.display(),
            cfg.sample_rate
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct SceneSummary {
    scene_id: String,
    baseline_composite: f64,
    learned_composite: Option<f64>,
}

#[derive(Serialize)]
struct EvaluationSummary {
    split: String,
    scenes: usize,
    baseline_composite: f64,
    learned_composite: Option<f64>,
    per_scene: Vec<SceneSummary>,
}

fn evaluate_cmd(mut config: RunConfig, args: EvaluateArgs, force: bool) -> Result<()> {
    if let Some(w) = &args.weights {
        let text = std::fs::read_to_string(w).with_context(|| format!("reading {}", w.display()))?;
        config.loss_weights = LossWeights::from_json(&text)?;
    }
    config.validate()?;
    let scenes = dataset::list_scenes(&args.dataset, &args.split)?;
    if scenes.is_empty() {
        bail!("no scenes in {}", args.dataset.join(&args.split).display());
    }
    let given = args.matrix.as_deref().map(formats::read_matrix).transpose()?;
    if let Some(m) = &given {
        if m.fft_size != config.stft.fft_size || m.sample_rate != config.stft.sample_rate as f64 {
            bail!("baseline matrix does not match the configured STFT");
        }
    }
    prepare_dir(&args.out, force)?;

    // one design per distinct array in the split
    let metas = scenes
        .iter()
        .map(|d| dataset::read_meta(d))
        .collect::<foa_core::Result<Vec<_>>>()?;
    let mut designs: HashMap<String, AnyMatrix> = HashMap::new();
    if given.is_none() {
        for meta in &metas {
            let key = array_key(&meta.array);
            if !designs.contains_key(&key) {
                info!("designing baseline for array `{}`", meta.array.name);
                let d = baseline_for_array(&meta.array, &config.baseline_params())?;
                designs.insert(key, AnyMatrix::Static(d.matrix));
            }
        }
    }
    let given = given.map(AnyMatrix::Static);
    let weights = &config.loss_weights;
    let stft_cfg = config.stft;

    let results = par::try_map_range(scenes.len(), |i| -> Result<(MetricsReport, Option<MetricsReport>)> {
        let dir = &scenes[i];
        let (meta, audio) = dataset::read_scene(dir)?;
        if audio.sample_rate != stft_cfg.sample_rate {
            bail!("{} is {} Hz, expected {}", dir.display(), audio.sample_rate, stft_cfg.sample_rate);
        }
        let matrix = given.as_ref().unwrap_or_else(|| &designs[&array_key(&meta.array)]);
        let reference = stft(&audio.reference, &stft_cfg)?;
        let base = evaluate(&reference, &encode_mics(matrix, &audio.mics, &stft_cfg)?, weights)?;
        let learned = match &args.learned {
            Some(root) => {
                let edir = dataset::scene_dir(root, &meta.split, &meta.scene_id);
                let est = dataset::load_estimate(&edir, &audio.mics, &stft_cfg)
                    .with_context(|| format!("loading estimate for {}", meta.scene_id))?;
                Some(evaluate(&reference, &est, weights)?)
            }
            None => None,
        };
        Ok((base, learned))
    })?;

    let base_dir = args.out.join("baseline");
    std::fs::create_dir_all(&base_dir)?;
    let learned_dir = args.out.join("learned");
    if args.learned.is_some() {
        std::fs::create_dir_all(&learned_dir)?;
    }
    let mut per_scene = Vec::with_capacity(results.len());
    for (meta, (base, learned)) in metas.iter().zip(&results) {
        emit_report(base, &base_dir.join(format!("{}.csv", meta.scene_id)))?;
        if let Some(l) = learned {
            emit_report(l, &learned_dir.join(format!("{}.csv", meta.scene_id)))?;
        }
        per_scene.push(SceneSummary {
            scene_id: meta.scene_id.clone(),
            baseline_composite: base.composite,
            learned_composite: learned.as_ref().map(|l| l.composite),
        });
    }
    let base_reports: Vec<MetricsReport> = results.iter().map(|r| r.0.clone()).collect();
    let base_agg = aggregate_reports(&base_reports)?;
    emit_report(&base_agg, &args.out.join("aggregate_baseline.csv"))?;
    let mut learned_composite = None;
    if args.learned.is_some() {
        let learned: Vec<MetricsReport> = results.iter().filter_map(|r| r.1.clone()).collect();
        let agg = aggregate_reports(&learned)?;
        emit_report(&agg, &args.out.join("aggregate_learned.csv"))?;
        emit_comparison(&base_agg, &agg, &args.out.join("comparison.csv"))?;
        learned_composite = Some(agg.composite);
    }
    let summary = EvaluationSummary {
        split: args.split.clone(),
        scenes: scenes.len(),
        baseline_composite: base_agg.composite,
        learned_composite,
        per_scene,
    };
    std::fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    info!(
        "evaluated {} scenes; mean composite loss {:.6}{}",
        scenes.len(),
        base_agg.composite,
        learned_composite.map_or(String::new(), |l| format!(" (learned {l:.6})"))
    );
    Ok(())
}

fn array_key(a: &ArrayGeometry) -> String {
    serde_json::to_string(&a.positions).expect("positions serialize")
}
