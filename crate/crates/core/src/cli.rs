//! Command-line interface. Every subcommand prints a JSON summary on stdout
//! and diagnostics on stderr. Exit codes: 0 success, 1 usage error, 2 data
//! error.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ClassWeighting, Geometry, Occlusion, RunConfig};
use crate::dataset::{self, Manifest, Split};
use crate::error::Error;
use crate::experiment::{self, ExperimentKind};
use crate::io;
use crate::metrics::iou;
use crate::model::{ModelFile, TrainConfig};
use crate::osm::HighwayMapping;
use crate::pipeline::{self, FileSource, RoadSource, RoadsFile, TileSource};
use crate::synth::{self, DomainParams, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "roadtile", version, about = "Road-class tile datasets, masks, metrics and baselines")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Road mask dilation radius in full-resolution pixels.
    #[arg(long, global = true)]
    pub radius: Option<u32>,
    #[arg(long = "decloud-threshold", global = true)]
    pub decloud_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub crop: Option<u32>,
    /// none | context | road | channel-replace
    #[arg(long, global = true)]
    pub occlusion: Option<Occlusion>,
    /// crop | crop-downsize
    #[arg(long, global = true)]
    pub geometry: Option<Geometry>,
    #[arg(long, global = true)]
    pub domain: Option<String>,
    #[arg(long = "points-per-road", global = true)]
    pub points_per_road: Option<usize>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse road vectors, sample anchor points and georeference tiles.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// JSON object of highway tag overrides; null removes a tag.
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// De-cloud, mask, crop and occlude tiles into a training-ready dataset.
    Prepare {
        #[command(flatten)]
        input: SourceArgs,
        #[arg(long)]
        output: PathBuf,
    },
    /// Assign a stratified train/val/test split.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Train, val and test fractions, e.g. 0.8,0.1,0.1.
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// Train the baseline classifier on a prepared manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long = "class-weighting")]
        class_weighting: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long = "learning-rate")]
        learning_rate: Option<f64>,
    },
    /// Evaluate a trained model on a prepared manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Split to score; defaults to test, or val when there is no test split.
        #[arg(long)]
        split: Option<Split>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an experiment harness: masking, binarize, cross_domain or baseline.
    Experiment {
        kind: ExperimentKind,
        #[command(flatten)]
        input: SourceArgs,
        /// Two domains for cross_domain, e.g. synthA,synthB.
        #[arg(long, value_delimiter = ',')]
        domains: Option<Vec<String>>,
        #[arg(long = "class-weighting")]
        class_weighting: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long = "learning-rate")]
        learning_rate: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare predicted masks or confidence maps against reference masks.
    Iou {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        thresholds: Vec<f64>,
        /// Manifest giving each sample's class for per-class statistics.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic tile dataset.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long = "n-per-class", default_value_t = 100)]
        n_per_class: usize,
        #[arg(long = "tile-px", default_value_t = 1000)]
        tile_px: u32,
        /// Shift background colour per class.
        #[arg(long)]
        correlated: bool,
    },
}

/// Either a manifest of full tiles with masks, or a roads file plus a tile
/// directory.
#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Manifest(s) of full-resolution tiles; may be repeated.
    #[arg(long)]
    pub manifest: Vec<PathBuf>,
    /// Roads file written by `ingest`.
    #[arg(long, requires = "tiles")]
    pub roads: Option<PathBuf>,
    /// Directory of tiles named `<sample_id>.png`.
    #[arg(long, requires = "roads")]
    pub tiles: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = std::result::Result<Value, Failure>;

/// Runs the CLI with explicit argument list and output streams; returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let result = run_config(&cli.global).and_then(|cfg| {
        pipeline::with_threads(cfg.threads, || execute(&cli.command, &cfg)).map_err(Failure::Data)?
    });
    match result {
        Ok(summary) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            EXIT_OK
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

fn run_config(g: &GlobalArgs) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_file(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.radius {
        cfg.radius = v;
    }
    if let Some(v) = g.decloud_threshold {
        cfg.decloud_threshold = v;
    }
    if let Some(v) = g.crop {
        cfg.crop = v;
    }
    if let Some(v) = g.occlusion {
        cfg.occlusion = v;
    }
    if let Some(v) = g.geometry {
        cfg.geometry = v;
    }
    if let Some(v) = &g.domain {
        cfg.domain = Some(v.clone());
    }
    if let Some(v) = g.points_per_road {
        cfg.points_per_road = v;
    }
    if let Some(v) = g.threads {
        cfg.threads = Some(v);
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn train_overrides(
    cfg: &RunConfig,
    class_weighting: &Option<String>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = cfg.clone();
    if let Some(w) = class_weighting {
        cfg.class_weighting = match w.as_str() {
            "uniform" => ClassWeighting::Uniform,
            "inverse-frequency" | "inverse_frequency" => ClassWeighting::InverseFrequency,
            other => return Err(Failure::Usage(format!("unknown class weighting {other}"))),
        };
    }
    cfg.train = TrainConfig {
        epochs: epochs.unwrap_or(cfg.train.epochs),
        learning_rate: learning_rate.unwrap_or(cfg.train.learning_rate),
        ..cfg.train
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> crate::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn execute(cmd: &Command, cfg: &RunConfig) -> CmdResult {
    match cmd {
        Command::Ingest { input, output, mapping } => cmd_ingest(input, output, mapping.as_deref(), cfg),
        Command::Prepare { input, output } => {
            let (manifest, source) = open_source(input, cfg)?;
            let (_, summary) = pipeline::prepare(&manifest, source.as_ref(), cfg, output)?;
            Ok(json!({ "manifest": output.join("manifest.jsonl"), "summary": summary }))
        }
        Command::Split {
            manifest,
            output,
            fractions,
        } => {
            let fr = match fractions.as_deref() {
                Some([a, b, c]) => (*a, *b, *c),
                Some(_) => return Err(Failure::Usage("--fractions takes three values".into())),
                None => cfg.split_fractions,
            };
            let m = dataset::split(&Manifest::load(manifest)?, fr, cfg.seed)?;
            m.save(output)?;
            let mut counts = BTreeMap::new();
            for s in [Split::Train, Split::Val, Split::Test] {
                counts.insert(s.to_string(), m.with_split(s).len());
            }
            Ok(json!({ "manifest": output, "splits": counts }))
        }
        Command::Train {
            manifest,
            output,
            class_weighting,
            epochs,
            learning_rate,
        } => {
            let cfg = train_overrides(cfg, class_weighting, *epochs, *learning_rate)?;
            cmd_train(manifest, output, &cfg)
        }
        Command::Eval {
            manifest,
            model,
            split,
            output,
        } => cmd_eval(manifest, model, *split, output.as_deref()),
        Command::Experiment {
            kind,
            input,
            domains,
            class_weighting,
            epochs,
            learning_rate,
            output,
        } => {
            let cfg = train_overrides(cfg, class_weighting, *epochs, *learning_rate)?;
            let (manifest, source) = open_source(input, &cfg)?;
            let report = match kind {
                ExperimentKind::Masking => experiment::masking(&manifest, source.as_ref(), &cfg)?,
                ExperimentKind::Binarize => experiment::binarize(&manifest, source.as_ref(), &cfg)?,
                ExperimentKind::Baseline => experiment::baseline(&manifest, source.as_ref(), &cfg)?,
                ExperimentKind::CrossDomain => {
                    let pair = match domains.as_deref() {
                        Some([a, b]) => (a.clone(), b.clone()),
                        Some(_) => return Err(Failure::Usage("--domains takes exactly two names".into())),
                        None => match manifest.domains().as_slice() {
                            [a, b] => (a.clone(), b.clone()),
                            found => {
                                return Err(Failure::Usage(format!(
                                    "pass --domains; manifest has {} domains",
                                    found.len()
                                )))
                            }
                        },
                    };
                    experiment::cross_domain(&manifest, source.as_ref(), &cfg, &pair.0, &pair.1)?
                }
            };
            if let Some(p) = output {
                write_json(p, &report)?;
            }
            Ok(serde_json::to_value(report).map_err(Error::from)?)
        }
        Command::Iou {
            predicted,
            reference,
            thresholds,
            manifest,
            output,
        } => {
            let report = cmd_iou(predicted, reference, thresholds, manifest.as_deref())?;
            if let Some(p) = output {
                write_json(p, &report)?;
            }
            Ok(report)
        }
        Command::Synth {
            output,
            n_per_class,
            tile_px,
            correlated,
        } => {
            let domain = cfg.domain.clone().unwrap_or_else(|| "synthA".to_string());
            let sc = SynthConfig {
                tile_px: *tile_px,
                context_correlation: *correlated,
                domain: DomainParams::preset(&domain),
                seed: cfg.seed,
            };
            sc.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let m = synth::generate_dataset(*n_per_class, &sc, &domain, output, cfg.radius)?;
            Ok(json!({
                "manifest": output.join("manifest.jsonl"),
                "samples": m.len(),
                "domain": domain,
                "class_counts": m.class_counts(),
            }))
        }
    }
}

fn cmd_ingest(input: &Path, output: &Path, mapping: Option<&Path>, cfg: &RunConfig) -> CmdResult {
    let mapping = match mapping {
        Some(p) => HighwayMapping::with_overrides(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => HighwayMapping::default(),
    };
    let doc = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let domain = cfg.domain.clone().unwrap_or_else(|| "default".to_string());
    let roads = pipeline::ingest(
        &doc,
        &domain,
        cfg.points_per_road,
        cfg.seed,
        &mapping,
        cfg.tile_size_m,
        cfg.tile_size_px,
    )
    .map_err(|e| match e {
        Error::Parse { line, column, message } => Error::Parse {
            line,
            column,
            message: format!("{}: {message}", input.display()),
        },
        other => other,
    })?;
    write_json(output, &roads)?;
    Ok(json!({ "roads_file": output, "summary": roads.summary }))
}

fn open_source(input: &SourceArgs, cfg: &RunConfig) -> std::result::Result<(Manifest, Box<dyn TileSource>), Failure> {
    match (&input.roads, &input.tiles, input.manifest.as_slice()) {
        (Some(roads), Some(tiles), []) => {
            let rf = RoadsFile::load(roads)?;
            let m = rf.manifest()?;
            Ok((m, Box::new(RoadSource::new(&rf, tiles, cfg.radius))))
        }
        (None, None, [first, rest @ ..]) => {
            let base = first.parent().unwrap_or(Path::new("."));
            let mut m = Manifest::load(first)?;
            for p in rest {
                let other = Manifest::load(p)?;
                if other.label_set != m.label_set {
                    return Err(Failure::Data(Error::invalid(format!(
                        "{} has a different label set",
                        p.display()
                    ))));
                }
                let dir = p.parent().unwrap_or(Path::new("."));
                m.records.extend(other.records.into_iter().map(|mut r| {
                    r.image_uri = relative_to(base, &dir.join(&r.image_uri));
                    r.mask_uri = r.mask_uri.map(|u| relative_to(base, &dir.join(u)));
                    r
                }));
            }
            m.validate()?;
            Ok((m, Box::new(FileSource::new(base))))
        }
        _ => Err(Failure::Usage(
            "pass --manifest, or --roads together with --tiles".into(),
        )),
    }
}

/// `path` as seen from `base`; absolute when the two share no prefix.
fn relative_to(base: &Path, path: &Path) -> String {
    match path.strip_prefix(base) {
        Ok(rel) => rel.to_string_lossy().into_owned(),
        Err(_) => std::path::absolute(path)
            .unwrap_or_else(|_| path.to_path_buf())
            .to_string_lossy()
            .into_owned(),
    }
}

fn cmd_train(manifest_path: &Path, output: &Path, cfg: &RunConfig) -> CmdResult {
    let m = pipeline::ensure_split(&Manifest::load(manifest_path)?, cfg)?;
    let train = dataset::filter_splits(&m, &[Split::Train]);
    let table = pipeline::featurize_prepared(&train, &FileSource::beside(manifest_path));
    if let Some(e) = table.errors.first() {
        return Err(Error::invalid(format!("{}: {}", e.sample_id, e.error)).into());
    }
    let rows = table.select(Occlusion::None, |_| true)?;
    let model = pipeline::train_rows(&rows, &m.label_set, cfg)?;
    let mut tc = cfg.train_config();
    if cfg.class_weighting == ClassWeighting::InverseFrequency {
        tc.class_weights = Some(dataset::class_weights(&train)?.into_iter().map(|(_, w)| w).collect());
    }
    write_json(output, &ModelFile::new(&model, &tc))?;
    Ok(json!({
        "model": output,
        "classes": m.label_set,
        "train_samples": rows.len(),
        "final_train_loss": model.final_train_loss,
    }))
}

fn cmd_eval(manifest_path: &Path, model_path: &Path, split: Option<Split>, output: Option<&Path>) -> CmdResult {
    let text = std::fs::read_to_string(model_path).map_err(|e| Error::io(model_path, e))?;
    let params = serde_json::from_str::<ModelFile>(&text).map_err(Error::from)?.into_params()?;
    let m = Manifest::load(manifest_path)?;
    let split = split.unwrap_or_else(|| pipeline::heldout_split(&m));
    let subset = dataset::filter_splits(&m, &[split]);
    if subset.is_empty() {
        return Err(Error::invalid(format!("no samples in split {split}")).into());
    }
    let table = pipeline::featurize_prepared(&subset, &FileSource::beside(manifest_path));
    if let Some(e) = table.errors.first() {
        return Err(Error::invalid(format!("{}: {}", e.sample_id, e.error)).into());
    }
    let rows = table.select(Occlusion::None, |_| true)?;
    let report = pipeline::evaluate_rows(&params, &rows)?;
    if let Some(p) = output {
        write_json(p, &report)?;
    }
    Ok(json!({ "split": split, "samples": rows.len(), "metrics": report }))
}

fn png_stems(dir: &Path) -> crate::Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct SampleIou {
    sample_id: String,
    iou: f64,
    degenerate: bool,
}

#[derive(Serialize)]
struct ThresholdReport {
    threshold: f64,
    mean_iou: Option<f64>,
    predicted_pixels: usize,
    per_sample: Vec<SampleIou>,
    /// Per class, the fraction of samples with IoU at least 0.5.
    fraction_iou_at_least_half: BTreeMap<String, f64>,
}

fn cmd_iou(predicted: &Path, reference: &Path, thresholds: &[f64], manifest: Option<&Path>) -> CmdResult {
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Failure::Usage("thresholds must lie in [0, 1]".into()));
    }
    let pred = png_stems(predicted)?;
    let refs = png_stems(reference)?;
    let labels: HashMap<String, String> = match manifest {
        Some(p) => Manifest::load(p)?
            .records
            .into_iter()
            .map(|r| (r.sample_id, r.label))
            .collect(),
        None => HashMap::new(),
    };
    let mut unpaired: Vec<String> = pred
        .keys()
        .filter(|k| !refs.contains_key(*k))
        .chain(refs.keys().filter(|k| !pred.contains_key(*k)))
        .cloned()
        .collect();
    unpaired.sort();
    let ids: Vec<&String> = pred.keys().filter(|k| refs.contains_key(*k)).collect();

    let loaded: Vec<crate::Result<_>> = ids
        .par_iter()
        .map(|id| Ok((io::read_confidence(&pred[*id])?, io::read_mask(&refs[*id])?)))
        .collect();
    let mut errors = Vec::new();
    let mut pairs = Vec::new();
    for (id, r) in ids.iter().zip(loaded) {
        match r {
            Ok(p) => pairs.push(((*id).clone(), p)),
            Err(e) => errors.push(json!({ "sample_id": id, "error": e.to_string() })),
        }
    }

    let mut reports = Vec::new();
    for &t in thresholds {
        let mut per_sample = Vec::new();
        let mut predicted_pixels = 0;
        let mut by_class: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for (id, (conf, truth)) in &pairs {
            let mask = pipeline::threshold_confidence(conf, t);
            let score = match iou(&mask, truth) {
                Ok(s) => s,
                Err(e) => {
                    errors.push(json!({ "sample_id": id, "threshold": t, "error": e.to_string() }));
                    continue;
                }
            };
            predicted_pixels += mask.count();
            if let Some(label) = labels.get(id) {
                let entry = by_class.entry(label.clone()).or_default();
                entry.0 += (score.value >= 0.5) as usize;
                entry.1 += 1;
            }
            per_sample.push(SampleIou {
                sample_id: id.clone(),
                iou: score.value,
                degenerate: score.degenerate,
            });
        }
        let mean_iou = (!per_sample.is_empty())
            .then(|| per_sample.iter().map(|s| s.iou).sum::<f64>() / per_sample.len() as f64);
        reports.push(ThresholdReport {
            threshold: t,
            mean_iou,
            predicted_pixels,
            per_sample,
            fraction_iou_at_least_half: by_class
                .into_iter()
                .map(|(k, (hit, n))| (k, hit as f64 / n as f64))
                .collect(),
        });
    }
    Ok(json!({
        "paired": pairs.len(),
        "unpaired_count": unpaired.len(),
        "unpaired": unpaired,
        "errors": errors,
        "thresholds": reports,
    }))
}
