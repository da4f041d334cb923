//! The end-to-end commands behind the `doclayout` binary: training, inference,
//! evaluation, synthetic data and label-map dumps.
//!
//! Every command is a plain function taking a [`RunConfig`], so tests and
//! examples drive the same code paths as the binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_sample, AugmentConfig, AugmentError};
use crate::geometry::{consolidate_page, ConsolidateMode, ConsolidateParams};
use crate::metrics::{
    baseline_counts, confusion, evaluation_report, seg_scores, BaselineCounts, BaselineScores, ConfusionMatrix,
    MetricsError, PageEval, ScoreReport, SegScores, BOOTSTRAP_LEVEL, BOOTSTRAP_REPS,
};
use crate::net::checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
use crate::net::loss::{class_priors, compute_class_weights, predict_labels};
use crate::net::{NetError, Tensor, TrainConfig, Trainer};
use crate::pagexml::{parse_page, serialize_page, PageDocument, PageXmlError, ZoneSchema};
use crate::raster::{encode_ground_truth, normalize_image, resize_image, save_label_map, Image, LabelMapStack, RasterError};
use crate::synthdoc::{generate_page, SynthError, SynthSpec};

/// Reference page height for [`Stage2Section::baseline_width`].
pub const REFERENCE_HEIGHT: f64 = 1024.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no image/PAGE-XML pairs found in {0}")]
    DatasetEmpty(PathBuf),
    #[error("hypothesis and ground truth do not pair up: {0}")]
    PairMismatch(String),
    #[error("cannot read image {0}: {1}")]
    ImageUnreadable(PathBuf, RasterError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    PageXml(PathBuf, PageXmlError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    /// 2 for invalid invocations, 1 for everything that failed while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::DatasetEmpty(_) | CliError::PairMismatch(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(path.to_path_buf(), e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub train_dir: Option<PathBuf>,
    pub test_dir: Option<PathBuf>,
    /// Zone labels in class order (class 0 is background).
    pub schema: Vec<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { train_dir: None, test_dir: None, schema: ZoneSchema::ohg().labels().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub channel_scale: f64,
    pub depth: usize,
    pub height: usize,
    pub width: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self { channel_scale: t.channel_scale, depth: t.depth, height: t.height, width: t.width, lambda: t.lambda, seed: t.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_c: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            batch_size: t.batch_size,
            epochs: t.epochs,
            weight_c: t.weight_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage2Section {
    /// Vertices per detected baseline.
    pub vertices: usize,
    /// Baseline stroke width in pixels of a 1024-pixel-high page; scaled to
    /// the working resolution.
    pub baseline_width: f64,
    /// Minimum component area as a fraction of the page.
    pub min_area_frac: f64,
}

impl Default for Stage2Section {
    fn default() -> Self {
        let p = ConsolidateParams::default();
        Self { vertices: p.vertices, baseline_width: 8.0, min_area_frac: p.min_area_frac }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub reps: usize,
    pub level: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { reps: BOOTSTRAP_REPS, level: BOOTSTRAP_LEVEL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    /// Pages written by `synth`.
    pub count: u64,
    #[serde(flatten)]
    pub spec: SynthSpec,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { count: 10, spec: SynthSpec::default() }
    }
}

/// Contents of a run configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub augment: AugmentConfig,
    pub stage2: Stage2Section,
    pub eval: EvalSection,
    pub synth: SynthSection,
}

impl RunConfig {
    /// Parses a config; relative data paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for dir in [&mut cfg.data.train_dir, &mut cfg.data.test_dir].into_iter().flatten() {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |m: String| Err(CliError::Config(m));
        let invalid = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.schema()?;
        self.train_config().validate().map_err(|e| invalid(&e))?;
        self.augment.validate().map_err(|e| invalid(&e))?;
        self.synth.spec.validate().map_err(|e| invalid(&e))?;
        if self.stage2.vertices < 2 || !(self.stage2.baseline_width >= 1.0) || !(self.stage2.min_area_frac >= 0.0) {
            return cfg_err(format!("stage2 needs vertices ≥ 2, baseline_width ≥ 1, min_area_frac ≥ 0: {:?}", self.stage2));
        }
        if self.eval.reps == 0 || !(self.eval.level > 0.0 && self.eval.level < 1.0) {
            return cfg_err(format!("eval needs reps ≥ 1 and level in (0, 1): {:?}", self.eval));
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<ZoneSchema, CliError> {
        ZoneSchema::new(self.data.schema.iter().cloned()).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.model.lambda,
            learning_rate: self.train.learning_rate,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: self.model.seed,
            weight_c: self.train.weight_c,
            channel_scale: self.model.channel_scale,
            depth: self.model.depth,
            in_channels: 3,
            task_classes: vec![2, self.data.schema.len() + 1],
            height: self.model.height,
            width: self.model.width,
        }
    }

    /// Working resolution as (width, height).
    pub fn working_size(&self) -> (u32, u32) {
        (self.model.width as u32, self.model.height as u32)
    }

    pub fn working_baseline_width(&self) -> f64 {
        (self.stage2.baseline_width * self.model.height as f64 / REFERENCE_HEIGHT).max(1.0)
    }

    pub fn consolidate_params(&self) -> ConsolidateParams {
        ConsolidateParams { min_area_frac: self.stage2.min_area_frac, vertices: self.stage2.vertices }
    }

    /// Applies a `--seed` override to the model and the synthetic generator.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.model.seed = s;
            self.synth.spec.seed = s;
        }
        self
    }
}

/// One training page: the image path and its ground truth.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub image: PathBuf,
    pub doc: PageDocument,
}

fn sorted_entries(dir: &Path, ext: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(io_err(dir))? {
        let p = e.map_err(io_err(dir))?.path();
        let ok = p.extension().and_then(|e| e.to_str()).is_some_and(|e| ext.contains(&e.to_ascii_lowercase().as_str()));
        if p.is_file() && ok {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "ppm", "pnm"];

/// Pairs `page/*.xml` with the images they name under `images/`.
pub fn load_dataset(dir: &Path, schema: &ZoneSchema) -> Result<Vec<DatasetItem>, CliError> {
    let page_dir = dir.join("page");
    if !page_dir.is_dir() {
        return Err(CliError::DatasetEmpty(dir.to_path_buf()));
    }
    let mut items = Vec::new();
    for xml_path in sorted_entries(&page_dir, &["xml"])? {
        let doc = read_page(&xml_path, schema)?;
        let image = dir.join("images").join(&doc.image_filename);
        if !image.is_file() {
            log::warn!("{}: image {} missing, skipped", xml_path.display(), image.display());
            continue;
        }
        items.push(DatasetItem { image, doc });
    }
    if items.is_empty() {
        return Err(CliError::DatasetEmpty(dir.to_path_buf()));
    }
    Ok(items)
}

fn read_page(path: &Path, schema: &ZoneSchema) -> Result<PageDocument, CliError> {
    let xml = fs::read_to_string(path).map_err(io_err(path))?;
    parse_page(&xml, schema).map_err(|e| CliError::PageXml(path.to_path_buf(), e))
}

/// A training sample at working resolution.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: Image,
    pub labels: LabelMapStack,
}

/// Resizes the page image and rasterizes its ground truth at working resolution.
pub fn prepare_sample(cfg: &RunConfig, schema: &ZoneSchema, img: &Image, doc: &PageDocument) -> Result<Sample, CliError> {
    let (w, h) = cfg.working_size();
    let image = resize_image(img, w, h)?;
    let labels = encode_ground_truth(doc, schema, w, h, cfg.working_baseline_width())?;
    Ok(Sample { image, labels })
}

pub fn load_samples(cfg: &RunConfig, dir: &Path) -> Result<Vec<Sample>, CliError> {
    let schema = cfg.schema()?;
    load_dataset(dir, &schema)?
        .iter()
        .map(|it| {
            let img = Image::load(&it.image).map_err(|e| CliError::ImageUnreadable(it.image.clone(), e))?;
            prepare_sample(cfg, &schema, &img, &it.doc)
        })
        .collect()
}

/// Mean losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLosses {
    pub epoch: usize,
    pub l_m: f64,
    pub l_a: f64,
    pub ce: f64,
}

fn csv_header() -> String {
    "epoch,l_m,l_a,ce\n".to_string()
}

fn stack_images(samples: &[Sample]) -> Tensor<f32> {
    Tensor::stack(&samples.iter().map(|s| normalize_image(&s.image)).collect::<Vec<_>>())
}

/// Runs `epochs` epochs over `samples`, calling `on_epoch` after each one.
///
/// Batches are drawn from a per-epoch shuffle; augmentation draws from a
/// generator seeded by (seed, epoch, sample), so runs are reproducible.
pub fn train_epochs(
    tr: &mut Trainer<f32>,
    samples: &[Sample],
    augment: &AugmentConfig,
    epochs: usize,
    mut on_epoch: impl FnMut(&mut Trainer<f32>, &EpochLosses) -> Result<(), CliError>,
) -> Result<Vec<EpochLosses>, CliError> {
    let seed = tr.cfg.seed;
    let bs = tr.cfg.batch_size.min(samples.len()).max(1);
    let mut history = Vec::new();
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let (mut sum, mut steps) = ([0.0; 3], 0usize);
        for chunk in order.chunks(bs) {
            let mut batch = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((epoch as u64) << 32) | i as u64);
                let (image, labels) = augment_sample(&samples[i].image, &samples[i].labels, augment, &mut rng)?;
                batch.push(Sample { image, labels });
            }
            let x = stack_images(&batch);
            let targets: Vec<LabelMapStack> = batch.into_iter().map(|s| s.labels).collect();
            let l = tr.train_step(&x, &targets)?;
            log::debug!("step {} l_m={:.6} l_a={:.6} ce={:.6}", tr.step, l.l_m, l.l_a, l.ce);
            sum[0] += l.l_m;
            sum[1] += l.l_a;
            sum[2] += l.ce;
            steps += 1;
        }
        let n = steps as f64;
        let e = EpochLosses { epoch: epoch + 1, l_m: sum[0] / n, l_a: sum[1] / n, ce: sum[2] / n };
        log::info!("epoch {} l_m={:.6} l_a={:.6} ce={:.6}", e.epoch, e.l_m, e.l_a, e.ce);
        on_epoch(tr, &e)?;
        history.push(e);
    }
    Ok(history)
}

/// Sets the cross-entropy class weights from the label priors of `samples`.
pub fn set_prior_weights(tr: &mut Trainer<f32>, samples: &[Sample]) -> Result<(), CliError> {
    let stacks: Vec<LabelMapStack> = samples.iter().map(|s| s.labels.clone()).collect();
    let weights = class_priors(&stacks)
        .iter()
        .map(|p| compute_class_weights(p, tr.cfg.weight_c))
        .collect::<Result<Vec<_>, _>>()?;
    tr.set_class_weights(weights)?;
    Ok(())
}

/// What `train` wrote.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub history: Vec<EpochLosses>,
    pub metrics_csv: PathBuf,
    pub best_checkpoint: PathBuf,
}

/// Trains on `cfg.data.train_dir`, writing `metrics.csv`, one checkpoint per
/// epoch under `checkpoints/` and `best.ckpt` (lowest mean cross entropy) to `out`.
/// With `resume`, training continues from that checkpoint.
pub fn cmd_train(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> Result<TrainSummary, CliError> {
    let dir = cfg.data.train_dir.as_deref().ok_or_else(|| CliError::Config("data.train_dir is not set".into()))?;
    let samples = load_samples(cfg, dir)?;
    let mut tr = match resume {
        Some(p) => load_checkpoint::<f32>(p)?,
        None => {
            let mut tr = Trainer::new(cfg.train_config())?;
            set_prior_weights(&mut tr, &samples)?;
            tr
        }
    };
    if resume.is_some() {
        set_prior_weights(&mut tr, &samples)?;
    }
    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(io_err(&ckpt_dir))?;
    let metrics_csv = out.join("metrics.csv");
    let best_checkpoint = out.join("best.ckpt");
    let mut csv = csv_header();
    let mut best = f64::INFINITY;
    let history = train_epochs(&mut tr, &samples, &cfg.augment, cfg.train.epochs, |tr, e| {
        let _ = writeln!(csv, "{},{},{},{}", e.epoch, e.l_m, e.l_a, e.ce);
        fs::write(&metrics_csv, &csv).map_err(io_err(&metrics_csv))?;
        save_checkpoint(tr, &ckpt_dir.join(format!("epoch_{:03}.ckpt", e.epoch)))?;
        if e.ce < best {
            best = e.ce;
            save_checkpoint(tr, &best_checkpoint)?;
        }
        Ok(())
    })?;
    Ok(TrainSummary { history, metrics_csv, best_checkpoint })
}

/// Anything that turns a working-resolution page image into label maps.
pub trait PixelClassifier {
    /// Working resolution as (width, height).
    fn input_size(&self) -> (u32, u32);
    /// Label maps for `image` (already at working resolution); `name` is the
    /// file name of the original image.
    fn classify(&mut self, name: &str, image: &Image) -> Result<LabelMapStack, CliError>;
}

impl PixelClassifier for Trainer<f32> {
    fn input_size(&self) -> (u32, u32) {
        (self.cfg.width as u32, self.cfg.height as u32)
    }

    fn classify(&mut self, _name: &str, image: &Image) -> Result<LabelMapStack, CliError> {
        let x = Tensor::stack(&[normalize_image(image)]);
        let out = self.predict(&x)?;
        Ok(predict_labels(&out).remove(0))
    }
}

/// Classifier that answers with rasterized ground truth, keyed by image file
/// name. Stage 2 and evaluation can be checked with it independently of training.
pub struct GroundTruthClassifier {
    pub pages: BTreeMap<String, PageDocument>,
    pub schema: ZoneSchema,
    pub size: (u32, u32),
    pub baseline_width: f64,
}

impl GroundTruthClassifier {
    pub fn from_dataset(cfg: &RunConfig, dir: &Path) -> Result<Self, CliError> {
        let schema = cfg.schema()?;
        let pages = load_dataset(dir, &schema)?.into_iter().map(|it| (it.doc.image_filename.clone(), it.doc)).collect();
        Ok(Self { pages, schema, size: cfg.working_size(), baseline_width: cfg.working_baseline_width() })
    }
}

impl PixelClassifier for GroundTruthClassifier {
    fn input_size(&self) -> (u32, u32) {
        self.size
    }

    fn classify(&mut self, name: &str, _image: &Image) -> Result<LabelMapStack, CliError> {
        let doc = self.pages.get(name).ok_or_else(|| CliError::PairMismatch(format!("no ground truth for {name}")))?;
        Ok(encode_ground_truth(doc, &self.schema, self.size.0, self.size.1, self.baseline_width)?)
    }
}

/// Pooled scores of a classifier on pages with known layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageScores {
    /// Zone segmentation at working resolution.
    pub zones: SegScores,
    /// Baselines after consolidation, at page resolution.
    pub baselines: BaselineScores,
}

/// Runs the full inference path on `(image, ground truth)` pairs and pools
/// Task-2 pixel scores and baseline scores over all of them.
pub fn score_classifier(
    classifier: &mut dyn PixelClassifier,
    cfg: &RunConfig,
    pages: &[(Image, PageDocument)],
    mode: ConsolidateMode,
) -> Result<PageScores, CliError> {
    let schema = cfg.schema()?;
    let (w, h) = classifier.input_size();
    let mut cm = ConfusionMatrix::new(schema.num_classes());
    let mut counts = BaselineCounts::default();
    for (img, gt) in pages {
        let small = resize_image(img, w, h)?;
        let labels = classifier.classify(&gt.image_filename, &small)?;
        let truth = encode_ground_truth(gt, &schema, w, h, cfg.working_baseline_width())?;
        cm.add(&confusion(&labels.maps[1], &truth.maps[1], schema.num_classes())?);
        let doc =
            consolidate_page(&small, &labels, mode, &schema, &cfg.consolidate_params(), (img.width, img.height), &gt.image_filename);
        let hyp: Vec<_> = doc.baselines().cloned().collect();
        let reference: Vec<_> = gt.baselines().cloned().collect();
        counts.add(&baseline_counts(&hyp, &reference));
    }
    Ok(PageScores { zones: seg_scores(&cm)?, baselines: counts.scores() })
}

/// Result of `infer`: written XML files and the inputs that failed.
#[derive(Debug, Default)]
pub struct InferSummary {
    pub written: Vec<PathBuf>,
    pub failed: Vec<(PathBuf, String)>,
}

/// Expands directories into their image files; explicit files are kept as given.
pub fn expand_inputs(inputs: &[PathBuf], ext: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(sorted_entries(p, ext)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Layout of a single page image.
pub fn infer_page(
    classifier: &mut dyn PixelClassifier,
    cfg: &RunConfig,
    schema: &ZoneSchema,
    name: &str,
    img: &Image,
    mode: ConsolidateMode,
) -> Result<PageDocument, CliError> {
    let (w, h) = classifier.input_size();
    let small = resize_image(img, w, h)?;
    let labels = classifier.classify(name, &small)?;
    Ok(consolidate_page(&small, &labels, mode, schema, &cfg.consolidate_params(), (img.width, img.height), name))
}

/// Writes `<stem>.xml` into `out` for every readable input image. Unreadable
/// images are reported in the summary and skipped.
pub fn cmd_infer(
    cfg: &RunConfig,
    classifier: &mut dyn PixelClassifier,
    inputs: &[PathBuf],
    mode: ConsolidateMode,
    out: &Path,
) -> Result<InferSummary, CliError> {
    let schema = cfg.schema()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut summary = InferSummary::default();
    for path in expand_inputs(inputs, IMAGE_EXTENSIONS)? {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let img = match Image::load(&path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                summary.failed.push((path, e.to_string()));
                continue;
            }
        };
        let doc = infer_page(classifier, cfg, &schema, &name, &img, mode)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("page");
        let target = out.join(format!("{stem}.xml"));
        fs::write(&target, serialize_page(&doc, &schema)).map_err(io_err(&target))?;
        summary.written.push(target);
    }
    Ok(summary)
}

/// Per-page evaluation inputs for a hypothesis/ground-truth pair.
pub fn page_eval(hyp: &PageDocument, gt: &PageDocument, schema: &ZoneSchema, baseline_width: f64) -> Result<PageEval, CliError> {
    let hyp_lines: Vec<_> = hyp.baselines().cloned().collect();
    let gt_lines: Vec<_> = gt.baselines().cloned().collect();
    let (w, h) = (gt.width, gt.height);
    let hm = encode_ground_truth(hyp, schema, w, h, baseline_width)?;
    let gm = encode_ground_truth(gt, schema, w, h, baseline_width)?;
    let zones = confusion(&hm.maps[1], &gm.maps[1], schema.num_classes())?;
    Ok(PageEval { baselines: baseline_counts(&hyp_lines, &gt_lines), zones: Some(zones) })
}

/// Scores every `*.xml` in `hyp_dir` against the file of the same name in
/// `gt_dir`. Writes the report as CSV to `out` when given.
pub fn cmd_eval(cfg: &RunConfig, hyp_dir: &Path, gt_dir: &Path, out: Option<&Path>) -> Result<ScoreReport, CliError> {
    let schema = cfg.schema()?;
    let names = |d: &Path| -> Result<Vec<String>, CliError> {
        Ok(sorted_entries(d, &["xml"])?
            .iter()
            .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(String::from))
            .collect())
    };
    let (hyp_names, gt_names) = (names(hyp_dir)?, names(gt_dir)?);
    if gt_names.is_empty() {
        return Err(CliError::DatasetEmpty(gt_dir.to_path_buf()));
    }
    if hyp_names != gt_names {
        let missing: Vec<_> = gt_names.iter().filter(|n| !hyp_names.contains(n)).collect();
        let extra: Vec<_> = hyp_names.iter().filter(|n| !gt_names.contains(n)).collect();
        return Err(CliError::PairMismatch(format!("missing hypotheses {missing:?}, unmatched hypotheses {extra:?}")));
    }
    let mut pages = Vec::with_capacity(gt_names.len());
    for name in &gt_names {
        let hyp = read_page(&hyp_dir.join(name), &schema)?;
        let gt = read_page(&gt_dir.join(name), &schema)?;
        let bw = (cfg.stage2.baseline_width * gt.height as f64 / REFERENCE_HEIGHT).max(1.0);
        pages.push(page_eval(&hyp, &gt, &schema, bw)?);
    }
    let report = evaluation_report(&pages, cfg.eval.reps, cfg.eval.level, cfg.model.seed)?;
    if let Some(path) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(path, report.to_csv()).map_err(io_err(path))?;
    }
    Ok(report)
}

/// Writes `count` synthetic pages as `images/*.png` and `page/*.xml` under `out`.
pub fn cmd_synth(cfg: &RunConfig, count: u64, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    if count == 0 {
        return Err(CliError::Config("synth needs at least one page".into()));
    }
    let schema = cfg.schema()?;
    let (img_dir, page_dir) = (out.join("images"), out.join("page"));
    for d in [&img_dir, &page_dir] {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let mut written = Vec::new();
    for i in 0..count {
        let (img, doc) = generate_page(&cfg.synth.spec, i)?;
        img.save(&img_dir.join(&doc.image_filename))?;
        let stem = Path::new(&doc.image_filename).file_stem().and_then(|s| s.to_str()).unwrap_or("page").to_string();
        let xml = page_dir.join(format!("{stem}.xml"));
        fs::write(&xml, serialize_page(&doc, &schema)).map_err(io_err(&xml))?;
        written.push(xml);
    }
    Ok(written)
}

/// Rasterizes each PAGE-XML input at working resolution and writes
/// `<stem>_t1.png` and `<stem>_t2.png` with class indices as gray values.
pub fn cmd_encode(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let schema = cfg.schema()?;
    let (w, h) = cfg.working_size();
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut written = Vec::new();
    for path in expand_inputs(inputs, &["xml"])? {
        let doc = read_page(&path, &schema)?;
        let maps = encode_ground_truth(&doc, &schema, w, h, cfg.working_baseline_width())?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("page");
        for (t, m) in maps.maps.iter().enumerate() {
            let target = out.join(format!("{stem}_t{}.png", t + 1));
            save_label_map(m, &target)?;
            written.push(target);
        }
    }
    Ok(written)
}

#[derive(Debug, Parser)]
#[command(name = "doclayout", version, about = "Document layout analysis: zones and baselines from page images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the model and synthetic-data seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the networks on `data.train_dir`.
    Train {
        #[command(flatten)]
        common: Common,
        /// Output directory for metrics and checkpoints.
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Resume from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write PAGE-XML layouts for page images.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "both")]
        mode: ConsolidateMode,
        #[arg(long, default_value = "hyp")]
        out: PathBuf,
        /// Image files or directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Score hypothesis PAGE-XML files against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        /// CSV report destination.
        #[arg(long)]
        out: Option<PathBuf>,
        hyp_dir: PathBuf,
        gt_dir: PathBuf,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
        /// Number of pages (defaults to `synth.count`).
        #[arg(long, short = 'n')]
        count: Option<u64>,
    },
    /// Dump rasterized ground-truth label maps as indexed PNGs.
    Encode {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "labels")]
        out: PathBuf,
        /// PAGE-XML files or directories (defaults to `data.train_dir/page`).
        inputs: Vec<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(cfg.with_seed(common.seed))
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Train { common, out, checkpoint } => {
            let cfg = load_config(&common)?;
            let s = cmd_train(&cfg, &out, checkpoint.as_deref())?;
            println!("wrote {} and {}", s.metrics_csv.display(), s.best_checkpoint.display());
            Ok(0)
        }
        Command::Infer { common, checkpoint, mode, out, inputs } => {
            let cfg = load_config(&common)?;
            let mut tr = load_checkpoint::<f32>(&checkpoint)?;
            let s = cmd_infer(&cfg, &mut tr, &inputs, mode, &out)?;
            println!("wrote {} layouts to {}", s.written.len(), out.display());
            for (p, e) in &s.failed {
                eprintln!("skipped {}: {e}", p.display());
            }
            Ok(if s.failed.is_empty() { 0 } else { 1 })
        }
        Command::Eval { common, out, hyp_dir, gt_dir } => {
            let cfg = load_config(&common)?;
            let report = cmd_eval(&cfg, &hyp_dir, &gt_dir, out.as_deref())?;
            print!("{}", report.to_table());
            Ok(0)
        }
        Command::Synth { common, out, count } => {
            let cfg = load_config(&common)?;
            let written = cmd_synth(&cfg, count.unwrap_or(cfg.synth.count), &out)?;
            println!("wrote {} pages to {}", written.len(), out.display());
            Ok(0)
        }
        Command::Encode { common, out, inputs } => {
            let cfg = load_config(&common)?;
            let inputs = if inputs.is_empty() {
                let dir = cfg.data.train_dir.clone().ok_or_else(|| CliError::Config("no inputs and no data.train_dir".into()))?;
                vec![dir.join("page")]
            } else {
                inputs
            };
            let written = cmd_encode(&cfg, &inputs, &out)?;
            println!("wrote {} label maps to {}", written.len(), out.display());
            Ok(0)
        }
    }
}
