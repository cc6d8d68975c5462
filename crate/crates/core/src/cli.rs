//! Command-line front end. Every subcommand writes its fully resolved
//! arguments as a run-config snapshot next to its outputs; `replay` re-runs
//! a snapshot.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{group_scores, perturb, write_scores, MetricsReport, PerturbKind, PerturbationSpec, ScoreRow};
use crate::imaging::{Image, Plane};
use crate::labels::DEFAULT_IOU_THRESHOLD;
use crate::losses::LossWeights;
use crate::model::{
    forward, load_checkpoint, log_to_jsonl, prepare_samples, save_checkpoint, train_toy, EfpnConfig, Hyper,
    ModelConfig, INPUT_MULTIPLE,
};
use crate::synth::{
    build_manifest, materialize, read_bundle, read_manifest, write_bundle, write_face_corpus, write_manifest,
    FaceStore, RecipeMix, SampleRecord, SynthConfig,
};
use crate::{Error, Result};

/// File name of the snapshot inside output directories.
pub const SNAPSHOT_NAME: &str = "run_config.json";

#[derive(Debug, Parser)]
#[command(name = "blendscope", version, about = "Blending-artifact supervision toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Render a synthetic face corpus (images + 68-point landmarks).
    Faces(FacesArgs),
    /// Pair images with landmarks and assign synthesis recipes.
    Manifest(ManifestArgs),
    /// Materialize every manifest record as an image plus label maps.
    Synth(SynthArgs),
    /// Train the toy detector.
    Train(TrainArgs),
    /// Score a manifest with a checkpoint.
    Eval(EvalArgs),
    /// Corrupt every image of a directory.
    Perturb(PerturbArgs),
    /// Render a bundle's mask, boundary, heatmap and consistency overlays.
    Viz(VizArgs),
    /// Re-run a saved run-config snapshot.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct FacesArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ManifestArgs {
    #[arg(long)]
    pub real_dir: PathBuf,
    #[arg(long)]
    pub landmarks_dir: PathBuf,
    /// Recipe weights such as `real:0.5,sbi:0.5`.
    #[arg(long, default_value = "real:0.5,sbi:0.5")]
    pub mix: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON Lines file; the snapshot goes to `<out>.run.json`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Synthesis settings shared by `synth`, `train` and `eval`.
#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthOptions {
    /// Square side every image is resized to.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_threshold: f64,
    /// Blend ratios the deformed mask is scaled by.
    #[arg(long, value_delimiter = ',', default_values_t = SynthConfig::default().blend_ratios)]
    pub blend_ratios: Vec<f64>,
}

impl SynthOptions {
    pub fn config(&self) -> Result<SynthConfig> {
        let cfg = SynthConfig {
            size: self.size,
            iou_threshold: self.iou_threshold,
            blend_ratios: self.blend_ratios.clone(),
            ..SynthConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub synth: SynthOptions,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Held-out manifest for per-epoch validation.
    #[arg(long)]
    pub val_manifest: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub synth: SynthOptions,
    #[arg(long, default_value_t = Hyper::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = Hyper::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = Hyper::default().lr_start)]
    pub lr_start: f64,
    #[arg(long, default_value_t = Hyper::default().lr_peak)]
    pub lr_peak: f64,
    #[arg(long, default_value_t = Hyper::default().momentum)]
    pub momentum: f64,
    #[arg(long, default_value_t = Hyper::default().weight_decay)]
    pub weight_decay: f64,
    /// Global gradient-norm cap; 0 disables clipping.
    #[arg(long, default_value_t = Hyper::default().clip_norm.unwrap_or(0.0))]
    pub clip_norm: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train without mirrored copies.
    #[arg(long)]
    pub no_hflip: bool,
    #[arg(long, default_value_t = 0.0)]
    pub color_jitter: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
    #[arg(long, default_value_t = LossWeights::default().lambda1)]
    pub lambda1: f64,
    #[arg(long, default_value_t = LossWeights::default().lambda2)]
    pub lambda2: f64,
    /// Focal exponent of the heatmap loss.
    #[arg(long, default_value_t = LossWeights::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = LossWeights::default().smoothing_eps)]
    pub smoothing_eps: f64,
    #[arg(long, default_value_t = EfpnConfig::default().gamma_w)]
    pub gamma_w: f64,
    /// Backbone channels of the four levels.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = ModelConfig::default().channels)]
    pub channels: Vec<usize>,
}

impl TrainArgs {
    pub fn hyper(&self) -> Result<Hyper> {
        let channels: [usize; 4] = self
            .channels
            .clone()
            .try_into()
            .map_err(|_| Error::Config("--channels needs exactly four values".into()))?;
        let hyper = Hyper {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_start: self.lr_start,
            lr_peak: self.lr_peak,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            seed: self.seed,
            hflip: !self.no_hflip,
            color_jitter: self.color_jitter,
            noise_std: self.noise_std,
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
            loss: LossWeights {
                lambda1: self.lambda1,
                lambda2: self.lambda2,
                gamma: self.gamma,
                smoothing_eps: self.smoothing_eps,
            },
            model: ModelConfig {
                channels,
                efpn: EfpnConfig {
                    gamma_w: self.gamma_w,
                    ..EfpnConfig::default()
                },
                ..ModelConfig::default()
            },
        };
        hyper.validate()?;
        Ok(hyper)
    }
}

/// How frames are grouped into videos for aggregated scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupBy {
    /// Every record is its own group.
    Sample,
    /// Records sharing an image directory form one video.
    ParentDir,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Metrics JSON path; scores go to `<out>.scores.csv`, the snapshot to
    /// `<out>.run.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub synth: SynthOptions,
    #[arg(long, value_enum, default_value_t = GroupBy::Sample)]
    pub group_by: GroupBy,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct PerturbArgs {
    #[arg(long)]
    pub image_dir: PathBuf,
    #[arg(long)]
    pub kind: PerturbKind,
    #[arg(long)]
    pub severity: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct VizArgs {
    /// A bundle directory written by `synth`.
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub snapshot: PathBuf,
}

impl clap::ValueEnum for PerturbKind {
    fn value_variants<'a>() -> &'a [Self] {
        &PerturbKind::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

fn file_snapshot_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    out.with_file_name(name)
}

/// Where a command's snapshot is written.
pub fn snapshot_path(command: &Command) -> Option<PathBuf> {
    match command {
        Command::Faces(a) => Some(a.out_dir.join(SNAPSHOT_NAME)),
        Command::Manifest(a) => Some(file_snapshot_path(&a.out)),
        Command::Synth(a) => Some(a.out_dir.join(SNAPSHOT_NAME)),
        Command::Train(a) => Some(a.out_dir.join(SNAPSHOT_NAME)),
        Command::Eval(a) => Some(file_snapshot_path(&a.out)),
        Command::Perturb(a) => Some(a.out_dir.join(SNAPSHOT_NAME)),
        Command::Viz(a) => Some(file_snapshot_path(&a.out)),
        Command::Replay(_) => None,
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

fn write_snapshot(command: &Command) -> Result<()> {
    if let Some(path) = snapshot_path(command) {
        ensure_parent(&path)?;
        let text = serde_json::to_string_pretty(command)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Parses a snapshot back into a command.
pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Command> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Executes one command and writes its snapshot.
pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Replay(a) => {
            let inner = read_snapshot(&a.snapshot)?;
            if matches!(inner, Command::Replay(_)) {
                return Err(Error::Config("a snapshot cannot hold a replay".into()));
            }
            run(&inner)
        }
        other => {
            execute(other)?;
            write_snapshot(other)
        }
    }
}

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Faces(a) => cmd_faces(a),
        Command::Manifest(a) => cmd_manifest(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Viz(a) => cmd_viz(a),
        Command::Replay(_) => unreachable!("handled by run"),
    }
}

fn cmd_faces(a: &FacesArgs) -> Result<()> {
    if a.count == 0 || a.size < 16 {
        return Err(Error::Config("need at least one face of side 16 or more".into()));
    }
    write_face_corpus(&a.out_dir, a.count, a.size, a.seed)?;
    eprintln!("wrote {} faces to {}", a.count, a.out_dir.display());
    Ok(())
}

fn cmd_manifest(a: &ManifestArgs) -> Result<()> {
    let mix: RecipeMix = a.mix.parse()?;
    let report = build_manifest(&a.real_dir, &a.landmarks_dir, &mix, a.seed)?;
    for ex in &report.excluded {
        eprintln!("excluded {}: {}", ex.image_path, ex.reason);
    }
    ensure_parent(&a.out)?;
    write_manifest(&report.records, &a.out)?;
    eprintln!("wrote {} records to {}", report.records.len(), a.out.display());
    Ok(())
}

fn load_records(manifest: &Path) -> Result<(Vec<SampleRecord>, FaceStore)> {
    let records = read_manifest(manifest)?;
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no records", manifest.display())));
    }
    let store = FaceStore::load(&records)?;
    Ok((records, store))
}

fn with_record_context(e: Error, index: usize, record: &SampleRecord) -> Error {
    match e {
        Error::DegenerateGeometry(msg) => {
            Error::DegenerateGeometry(format!("record {index} ({}): {msg}", record.image_path))
        }
        Error::Dimension(msg) => Error::Dimension(format!("record {index} ({}): {msg}", record.image_path)),
        Error::Contract(msg) => Error::Contract(format!("record {index} ({}): {msg}", record.image_path)),
        other => other,
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = a.synth.config()?;
    let (records, store) = load_records(&a.manifest)?;
    records
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let bundle = materialize(r, &store, &cfg).map_err(|e| with_record_context(e, k, r))?;
            write_bundle(
                &bundle,
                Some(r.recipe),
                Some(r.seed),
                Some(r.image_path.clone()),
                a.out_dir.join(format!("sample_{k:05}")),
            )
        })
        .collect::<Result<Vec<()>>>()?;
    eprintln!("wrote {} bundles to {}", records.len(), a.out_dir.display());
    Ok(())
}

fn check_model_size(size: usize) -> Result<()> {
    if !size.is_multiple_of(INPUT_MULTIPLE) {
        return Err(Error::Config(format!("--size must be a multiple of {INPUT_MULTIPLE}")));
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let hyper = a.hyper()?;
    let cfg = a.synth.config()?;
    check_model_size(cfg.size)?;
    let (records, store) = load_records(&a.manifest)?;
    let train = prepare_samples(&records, &store, &cfg, hyper.hflip)?;
    let val = match &a.val_manifest {
        Some(path) => {
            let (vr, vs) = load_records(path)?;
            prepare_samples(&vr, &vs, &cfg, false)?
        }
        None => Vec::new(),
    };
    let outcome = train_toy(&train, &val, &hyper)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    save_checkpoint(a.out_dir.join("model.bin"), &hyper.model, &outcome.params)?;
    let log_path = a.out_dir.join("train_log.jsonl");
    fs::write(&log_path, log_to_jsonl(&outcome.log)?).map_err(|e| Error::io(&log_path, e))?;
    if let Some(last) = outcome.log.last() {
        eprintln!(
            "epoch {}: loss {:.4}, val AUC {}",
            last.epoch,
            last.loss,
            last.val_auc.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(())
}

fn group_of(record: &SampleRecord, index: usize, by: GroupBy) -> String {
    match by {
        GroupBy::Sample => format!("sample_{index:05}"),
        GroupBy::ParentDir => Path::new(&record.image_path)
            .parent()
            .map(|p| p.to_string_lossy().into_owned())
            .unwrap_or_default(),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cfg = a.synth.config()?;
    check_model_size(cfg.size)?;
    let (model, params) = load_checkpoint(&a.checkpoint)?;
    let (records, store) = load_records(&a.manifest)?;
    let scores: Vec<f64> = records
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let bundle = materialize(r, &store, &cfg).map_err(|e| with_record_context(e, k, r))?;
            Ok(forward(&model, &params, &bundle.image)?.0.score())
        })
        .collect::<Result<_>>()?;
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    let groups: Vec<String> = records
        .iter()
        .enumerate()
        .map(|(k, r)| group_of(r, k, a.group_by))
        .collect();
    let (_, video_scores, video_labels) = group_scores(&groups, &scores, &labels)?;
    let report = MetricsReport::compute(&video_scores, &video_labels)?;
    ensure_parent(&a.out)?;
    fs::write(&a.out, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&a.out, e))?;
    let rows: Vec<ScoreRow> = records
        .iter()
        .enumerate()
        .map(|(k, r)| ScoreRow {
            id: format!("sample_{k:05}"),
            group: groups[k].clone(),
            score: scores[k],
            label: r.label,
        })
        .collect();
    let mut scores_name = a.out.file_name().unwrap_or_default().to_os_string();
    scores_name.push(".scores.csv");
    write_scores(&rows, a.out.with_file_name(scores_name))?;
    eprintln!(
        "AUC {:.4} over {} positives and {} negatives",
        report.auc, report.n_pos, report.n_neg
    );
    Ok(())
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp"];

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if ok && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("no images in {}", dir.display())));
    }
    Ok(out)
}

fn cmd_perturb(a: &PerturbArgs) -> Result<()> {
    let spec = PerturbationSpec::new(a.kind, a.severity)?;
    let images = list_images(&a.image_dir)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    images
        .par_iter()
        .enumerate()
        .map(|(k, path)| {
            let image = Image::read(path)?;
            let out = perturb(&image, spec, crate::rng::mix(a.seed, k as u64))?;
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            out.write_png(a.out_dir.join(format!("{stem}.png")))
        })
        .collect::<Result<Vec<()>>>()?;
    eprintln!("wrote {} images to {}", images.len(), a.out_dir.display());
    Ok(())
}

/// Tints `image` towards `color` with per-pixel opacity `alpha`.
fn overlay(image: &Image, alpha: &Plane, color: [f64; 3]) -> Image {
    Image::from_fn(image.height(), image.width(), 3, |i, j, c| {
        let base = image.get(i, j, c.min(image.channels() - 1));
        let t = alpha.get(i, j);
        base + t * (color[c] - base)
    })
}

fn cmd_viz(a: &VizArgs) -> Result<()> {
    let b = read_bundle(&a.bundle)?;
    let panels = [
        overlay(&b.image, &Plane::zeros(b.meta.height, b.meta.width), [0.0; 3]),
        overlay(&b.image, &b.mask, [0.2, 0.4, 1.0]),
        overlay(&b.image, &b.boundary, [1.0, 1.0, 0.0]),
        overlay(&b.image, &b.heatmap, [1.0, 0.0, 0.0]),
        overlay(&b.image, &b.consistency, [0.0, 1.0, 0.4]),
    ];
    let (h, w) = (b.meta.height, b.meta.width);
    let strip = Image::from_fn(h, w * panels.len(), 3, |i, j, c| panels[j / w].get(i, j % w, c));
    ensure_parent(&a.out)?;
    strip.write_png(&a.out)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
