//! Per-sample processing: load a full tile and its road mask, de-cloud,
//! crop (or crop and downsize), then apply an occlusion variant.
//!
//! The mask is always built at full tile resolution and dilated there; only
//! afterwards are image and mask cropped together.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ClassWeighting, Geometry, Occlusion, RunConfig};
use crate::dataset::{self, Manifest, Provenance, SampleRecord, Split};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, TileGeoref};
use crate::imageops::{
    self, cloud_filter, crop_center, downsize_box, downsize_mask, occlude, replace_channel, Channel,
    ImageTensor, OcclusionMode,
};
use crate::io;
use crate::metrics::MetricsReport;
use crate::model::{self, extract_features, FeatureVector, ModelParams, TrainedModel};
use crate::osm::{self, ClassDistribution, HighwayMapping, RoadClass, RoadRecord};
use crate::raster::{road_mask, BinaryMask};

/// A full-resolution tile and, when available, its dilated road mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub image: ImageTensor,
    pub mask: Option<BinaryMask>,
}

pub trait TileSource: Sync {
    fn load(&self, record: &SampleRecord) -> Result<RawSample>;
}

/// Reads `image_uri` and `mask_uri` relative to a base directory.
#[derive(Debug, Clone)]
pub struct FileSource {
    base: PathBuf,
}

impl FileSource {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        FileSource { base: base.into() }
    }

    /// Source rooted at the directory holding `manifest_path`.
    pub fn beside(manifest_path: &Path) -> Self {
        Self::new(manifest_path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, uri: &str) -> PathBuf {
        self.base.join(uri)
    }
}

impl TileSource for FileSource {
    fn load(&self, record: &SampleRecord) -> Result<RawSample> {
        let image = io::read_rgb(&self.resolve(&record.image_uri))?;
        let mask = match &record.mask_uri {
            Some(uri) => Some(io::read_mask(&self.resolve(uri))?),
            None => None,
        };
        Ok(RawSample { image, mask })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub sample_id: String,
    pub road_id: String,
    pub label: RoadClass,
    pub domain: String,
    pub tile: TileGeoref,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub roads: usize,
    pub anchors: usize,
    pub skipped_unmapped: usize,
    pub feature_errors: usize,
    pub skipped_too_short: usize,
    pub class_distribution: ClassDistribution,
}

/// Output of `ingest`: parsed roads plus one georeferenced tile per anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadsFile {
    pub domain: String,
    pub points_per_road: usize,
    pub seed: u64,
    pub summary: IngestSummary,
    pub roads: Vec<RoadRecord>,
    pub anchors: Vec<AnchorRecord>,
    pub feature_errors: Vec<osm::FeatureError>,
}

impl RoadsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: format!("{}: {e}", path.display()),
        })
    }

    /// Manifest over anchors; tiles are expected at `<sample_id>.png`.
    pub fn manifest(&self) -> Result<Manifest> {
        let records = self
            .anchors
            .iter()
            .map(|a| SampleRecord {
                sample_id: a.sample_id.clone(),
                image_uri: format!("{}.png", a.sample_id),
                mask_uri: None,
                label: a.label.name().to_string(),
                domain: a.domain.clone(),
                split: Split::Unassigned,
            })
            .collect();
        let mut m = Manifest::new(RoadClass::label_set(), records)?;
        m.provenance.seed = Some(self.seed);
        m.provenance.filters.push(format!("ingest(domain={})", self.domain));
        Ok(m)
    }
}

pub fn ingest(
    document: &str,
    domain: &str,
    points_per_road: usize,
    seed: u64,
    mapping: &HighwayMapping,
    tile_size_m: f64,
    tile_size_px: u32,
) -> Result<RoadsFile> {
    if points_per_road == 0 {
        return Err(Error::invalid("points per road must be at least 1"));
    }
    let parsed = osm::parse_roads_with(document, domain, mapping)?;
    let sampled: Vec<Result<Vec<GeoPoint>>> = parsed
        .records
        .par_iter()
        .map(|r| osm::sample_anchor_points(r, points_per_road, seed))
        .collect();
    let mut anchors = Vec::new();
    let mut too_short = 0;
    let mut used = Vec::new();
    for (road, points) in parsed.records.iter().zip(sampled) {
        match points {
            Ok(points) => {
                for (k, p) in points.into_iter().enumerate() {
                    anchors.push(AnchorRecord {
                        sample_id: format!("{}-{k}", road.road_id),
                        road_id: road.road_id.clone(),
                        label: road.label,
                        domain: domain.to_string(),
                        tile: TileGeoref::new(p, tile_size_m, tile_size_px)?,
                    });
                }
                used.push(road.clone());
            }
            Err(Error::RoadTooShort { .. }) => too_short += 1,
            Err(e) => return Err(e),
        }
    }
    let mut ids = std::collections::HashSet::new();
    if let Some(dup) = anchors.iter().find(|a| !ids.insert(a.sample_id.as_str())) {
        return Err(Error::invalid(format!("duplicate road id produces sample {}", dup.sample_id)));
    }
    Ok(RoadsFile {
        domain: domain.to_string(),
        points_per_road,
        seed,
        summary: IngestSummary {
            roads: used.len(),
            anchors: anchors.len(),
            skipped_unmapped: parsed.skipped_unmapped,
            feature_errors: parsed.feature_errors.len(),
            skipped_too_short: too_short,
            class_distribution: osm::class_distribution(&used),
        },
        roads: used,
        anchors,
        feature_errors: parsed.feature_errors,
    })
}

/// Tiles on disk named `<sample_id>.png`, masks rasterized from the road
/// polyline through the anchor's georeference.
pub struct RoadSource {
    tiles: FileSource,
    radius: u32,
    anchors: HashMap<String, (TileGeoref, Vec<GeoPoint>)>,
}

impl RoadSource {
    pub fn new(roads: &RoadsFile, tiles_dir: impl Into<PathBuf>, radius: u32) -> Self {
        let polylines: HashMap<&str, &Vec<GeoPoint>> =
            roads.roads.iter().map(|r| (r.road_id.as_str(), &r.polyline)).collect();
        let anchors = roads
            .anchors
            .iter()
            .filter_map(|a| {
                polylines
                    .get(a.road_id.as_str())
                    .map(|p| (a.sample_id.clone(), (a.tile, (*p).clone())))
            })
            .collect();
        RoadSource {
            tiles: FileSource::new(tiles_dir),
            radius,
            anchors,
        }
    }
}

impl TileSource for RoadSource {
    fn load(&self, record: &SampleRecord) -> Result<RawSample> {
        let (tile, polyline) = self
            .anchors
            .get(&record.sample_id)
            .ok_or_else(|| Error::invalid(format!("no georeference for {}", record.sample_id)))?;
        let image = io::read_rgb(&self.tiles.resolve(&record.image_uri))?;
        if image.width() != tile.size_px || image.height() != tile.size_px {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} tile", tile.size_px),
                actual: format!("{}x{}", image.width(), image.height()),
            });
        }
        let pixels = polyline
            .iter()
            .map(|p| tile.geo_to_pixel(*p))
            .collect::<Result<Vec<_>>>()?;
        let mask = road_mask(&pixels, tile.size_px, tile.size_px, self.radius)?;
        Ok(RawSample {
            image,
            mask: Some(mask),
        })
    }
}

/// Cropped tile and mask before any occlusion.
#[derive(Debug, Clone, PartialEq)]
pub enum Cropped {
    CloudRejected { band_means: [f64; 3] },
    Kept { image: ImageTensor, mask: Option<BinaryMask> },
}

/// De-cloud on the full tile, then apply the geometry to image and mask.
pub fn decloud_and_crop(raw: &RawSample, cfg: &RunConfig) -> Result<Cropped> {
    let decision = cloud_filter(&raw.image, cfg.decloud_threshold);
    if !decision.keep {
        return Ok(Cropped::CloudRejected {
            band_means: decision.band_means,
        });
    }
    if let Some(m) = &raw.mask {
        if (m.width(), m.height()) != (raw.image.width(), raw.image.height()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} mask", raw.image.width(), raw.image.height()),
                actual: format!("{}x{}", m.width(), m.height()),
            });
        }
    }
    let (image, mask) = match cfg.geometry {
        Geometry::Crop => (
            crop_center(&raw.image, cfg.crop)?,
            raw.mask.as_ref().map(|m| crop_center(m, cfg.crop)).transpose()?,
        ),
        Geometry::CropDownsize => {
            let factor = (raw.image.width() / cfg.crop).max(1);
            let window = cfg.crop * factor;
            (
                downsize_box(&crop_center(&raw.image, window)?, factor)?,
                raw.mask
                    .as_ref()
                    .map(|m| downsize_mask(&crop_center(m, window)?, factor))
                    .transpose()?,
            )
        }
    };
    Ok(Cropped::Kept { image, mask })
}

pub fn apply_occlusion(image: &ImageTensor, mask: Option<&BinaryMask>, mode: Occlusion) -> Result<ImageTensor> {
    let need = || Error::invalid(format!("occlusion mode {mode} needs a road mask"));
    match mode {
        Occlusion::None => Ok(image.clone()),
        Occlusion::Context => occlude(image, mask.ok_or_else(need)?, OcclusionMode::ContextOccluded),
        Occlusion::Road => occlude(image, mask.ok_or_else(need)?, OcclusionMode::RoadOccluded),
        Occlusion::ChannelReplace => replace_channel(image, mask.ok_or_else(need)?, Channel::B),
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub sample_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub input: usize,
    pub kept: usize,
    pub cloud_rejected: usize,
    pub cloud_rejected_ids: Vec<String>,
    pub errors: Vec<SampleError>,
}

enum Outcome {
    Kept(SampleRecord),
    Cloud(String),
    Failed(SampleError),
}

/// Processes every record and writes `images/`, `masks/` and
/// `manifest.jsonl` under `out_dir`. Per-sample failures are recorded and
/// skipped.
pub fn prepare(
    manifest: &Manifest,
    source: &dyn TileSource,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<(Manifest, PrepareSummary)> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let outcomes: Vec<Outcome> = manifest
        .records
        .par_iter()
        .map(|r| {
            let run = || -> Result<Option<SampleRecord>> {
                let raw = source.load(r)?;
                let Cropped::Kept { image, mask } = decloud_and_crop(&raw, cfg)? else {
                    return Ok(None);
                };
                let out = apply_occlusion(&image, mask.as_ref(), cfg.occlusion)?;
                let image_uri = format!("images/{}.png", r.sample_id);
                io::write_rgb(&out_dir.join(&image_uri), &out)?;
                let mask_uri = match &mask {
                    Some(m) => {
                        let uri = format!("masks/{}.png", r.sample_id);
                        io::write_mask(&out_dir.join(&uri), m)?;
                        Some(uri)
                    }
                    None => None,
                };
                Ok(Some(SampleRecord {
                    image_uri,
                    mask_uri,
                    ..r.clone()
                }))
            };
            match run() {
                Ok(Some(rec)) => Outcome::Kept(rec),
                Ok(None) => Outcome::Cloud(r.sample_id.clone()),
                Err(e) => Outcome::Failed(SampleError {
                    sample_id: r.sample_id.clone(),
                    error: e.to_string(),
                }),
            }
        })
        .collect();

    let mut records = Vec::new();
    let mut summary = PrepareSummary {
        input: manifest.len(),
        kept: 0,
        cloud_rejected: 0,
        cloud_rejected_ids: Vec::new(),
        errors: Vec::new(),
    };
    for o in outcomes {
        match o {
            Outcome::Kept(r) => records.push(r),
            Outcome::Cloud(id) => summary.cloud_rejected_ids.push(id),
            Outcome::Failed(e) => summary.errors.push(e),
        }
    }
    summary.kept = records.len();
    summary.cloud_rejected = summary.cloud_rejected_ids.len();

    let mut provenance: Provenance = manifest.provenance.clone();
    provenance.filters.push(format!(
        "prepare(decloud>{}, geometry={}, crop={}, radius={}, occlusion={})",
        cfg.decloud_threshold,
        match cfg.geometry {
            Geometry::Crop => "crop",
            Geometry::CropDownsize => "crop-downsize",
        },
        cfg.crop,
        cfg.radius,
        cfg.occlusion
    ));
    provenance.seed = Some(cfg.seed);
    let out = Manifest {
        records,
        label_set: manifest.label_set.clone(),
        provenance,
    };
    out.save(&out_dir.join("manifest.jsonl"))?;
    Ok((out, summary))
}

/// Features for every kept record under each requested occlusion mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub records: Vec<SampleRecord>,
    pub label_set: Vec<String>,
    pub modes: Vec<Occlusion>,
    /// `features[i][k]` is record `i` under `modes[k]`.
    pub features: Vec<Vec<FeatureVector>>,
    pub cloud_rejected: usize,
    pub errors: Vec<SampleError>,
}

impl FeatureTable {
    pub fn mode_index(&self, mode: Occlusion) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| *m == mode)
            .ok_or_else(|| Error::invalid(format!("features for {mode} were not extracted")))
    }

    /// Rows restricted to records accepted by `keep`, as (features, label).
    pub fn select(
        &self,
        mode: Occlusion,
        keep: impl Fn(&SampleRecord) -> bool,
    ) -> Result<Vec<(&FeatureVector, &SampleRecord)>> {
        let k = self.mode_index(mode)?;
        Ok(self
            .records
            .iter()
            .zip(&self.features)
            .filter(|(r, _)| keep(r))
            .map(|(r, f)| (&f[k], r))
            .collect())
    }
}

/// Full pipeline up to features, run in parallel with order restored.
pub fn featurize(manifest: &Manifest, source: &dyn TileSource, cfg: &RunConfig, modes: &[Occlusion]) -> FeatureTable {
    let results: Vec<Result<Option<Vec<FeatureVector>>>> = manifest
        .records
        .par_iter()
        .map(|r| {
            let raw = source.load(r)?;
            let Cropped::Kept { image, mask } = decloud_and_crop(&raw, cfg)? else {
                return Ok(None);
            };
            modes
                .iter()
                .map(|&m| apply_occlusion(&image, mask.as_ref(), m).map(|img| extract_features(&img)))
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect();
    collect_table(manifest, modes, results)
}

/// Features of already-prepared images, read as they are.
pub fn featurize_prepared(manifest: &Manifest, source: &dyn TileSource) -> FeatureTable {
    let results: Vec<Result<Option<Vec<FeatureVector>>>> = manifest
        .records
        .par_iter()
        .map(|r| Ok(Some(vec![extract_features(&source.load(r)?.image)])))
        .collect();
    collect_table(manifest, &[Occlusion::None], results)
}

fn collect_table(
    manifest: &Manifest,
    modes: &[Occlusion],
    results: Vec<Result<Option<Vec<FeatureVector>>>>,
) -> FeatureTable {
    let mut table = FeatureTable {
        records: Vec::new(),
        label_set: manifest.label_set.clone(),
        modes: modes.to_vec(),
        features: Vec::new(),
        cloud_rejected: 0,
        errors: Vec::new(),
    };
    for (r, res) in manifest.records.iter().zip(results) {
        match res {
            Ok(Some(f)) => {
                table.records.push(r.clone());
                table.features.push(f);
            }
            Ok(None) => table.cloud_rejected += 1,
            Err(e) => table.errors.push(SampleError {
                sample_id: r.sample_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    table
}

fn label_index(label_set: &[String], label: &str) -> Result<usize> {
    label_set
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Trains on the given rows over `label_set`, honouring the configured
/// class weighting.
pub fn train_rows(rows: &[(&FeatureVector, &SampleRecord)], label_set: &[String], cfg: &RunConfig) -> Result<TrainedModel> {
    let samples = rows
        .iter()
        .map(|(f, r)| Ok(((*f).clone(), label_index(label_set, &r.label)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut tc = cfg.train_config();
    if cfg.class_weighting == ClassWeighting::InverseFrequency && tc.class_weights.is_none() {
        let counts: Vec<(String, usize)> = label_set
            .iter()
            .enumerate()
            .map(|(k, l)| (l.clone(), samples.iter().filter(|(_, y)| *y == k).count()))
            .collect();
        tc.class_weights = Some(dataset::weights_from_counts(&counts)?.into_iter().map(|(_, w)| w).collect());
    }
    model::train(&samples, label_set, &tc)
}

pub fn evaluate_rows(params: &ModelParams, rows: &[(&FeatureVector, &SampleRecord)]) -> Result<MetricsReport> {
    let pairs: Vec<(&FeatureVector, &str)> = rows.iter().map(|(f, r)| (*f, r.label.as_str())).collect();
    let cm = model::evaluate(params, &pairs)?;
    Ok(MetricsReport::from_confusion(&cm))
}

/// The split used for evaluation: `test` when present, else `val`.
pub fn heldout_split(m: &Manifest) -> Split {
    if m.records.iter().any(|r| r.split == Split::Test) {
        Split::Test
    } else {
        Split::Val
    }
}

/// Assigns a stratified split when the manifest has no training samples.
pub fn ensure_split(m: &Manifest, cfg: &RunConfig) -> Result<Manifest> {
    if m.records.iter().any(|r| r.split == Split::Train) {
        Ok(m.clone())
    } else {
        dataset::split(m, cfg.split_fractions, cfg.seed)
    }
}

/// Confidence maps are compared with reference masks after thresholding.
pub fn threshold_confidence(c: &imageops::ConfidenceMap, t: f64) -> BinaryMask {
    imageops::binarize_confidence(c, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::PixelPoint;

    struct Fixed(RawSample);
    impl TileSource for Fixed {
        fn load(&self, _: &SampleRecord) -> Result<RawSample> {
            Ok(self.0.clone())
        }
    }

    fn record(id: &str) -> SampleRecord {
        SampleRecord {
            sample_id: id.into(),
            image_uri: format!("{id}.png"),
            mask_uri: None,
            label: "major".into(),
            domain: "d".into(),
            split: Split::Unassigned,
        }
    }

    fn diagonal_raw() -> RawSample {
        let data: Vec<u8> = (0..1000 * 1000 * 3).map(|i| (i % 97) as u8).collect();
        let image = ImageTensor::new(1000, 1000, data).unwrap();
        let mask = road_mask(&[PixelPoint::new(0.0, 0.0), PixelPoint::new(999.0, 999.0)], 1000, 1000, 20).unwrap();
        RawSample {
            image,
            mask: Some(mask),
        }
    }

    #[test]
    fn crop_geometry() {
        let raw = diagonal_raw();
        let cfg = RunConfig::default();
        let Cropped::Kept { image, mask } = decloud_and_crop(&raw, &cfg).unwrap() else {
            panic!("rejected");
        };
        assert_eq!((image.width(), image.height()), (224, 224));
        assert_eq!(image, crop_center(&raw.image, 224).unwrap());
        let mask = mask.unwrap();
        assert!(mask.get(0, 0) && mask.get(112, 112) && !mask.get(223, 0));
    }

    #[test]
    fn crop_downsize_geometry() {
        let raw = diagonal_raw();
        let cfg = RunConfig {
            geometry: Geometry::CropDownsize,
            ..RunConfig::default()
        };
        let Cropped::Kept { image, mask } = decloud_and_crop(&raw, &cfg).unwrap() else {
            panic!("rejected");
        };
        assert_eq!(image, downsize_box(&crop_center(&raw.image, 896).unwrap(), 4).unwrap());
        assert_eq!(mask.unwrap().width(), 224);
    }

    #[test]
    fn occlusion_variants() {
        let raw = diagonal_raw();
        let Cropped::Kept { image, mask } = decloud_and_crop(&raw, &RunConfig::default()).unwrap() else {
            panic!()
        };
        let mask = mask.unwrap();
        assert_eq!(apply_occlusion(&image, Some(&mask), Occlusion::None).unwrap(), image);
        let ch = apply_occlusion(&image, Some(&mask), Occlusion::ChannelReplace).unwrap();
        assert!(ch.pixels().zip(mask.values()).all(|(p, &m)| p[2] == m * 255));
        assert!(apply_occlusion(&image, None, Occlusion::Road).is_err());
    }

    #[test]
    fn bright_tiles_are_rejected() {
        let raw = RawSample {
            image: ImageTensor::filled(1000, 1000, [255, 255, 255]).unwrap(),
            mask: None,
        };
        let m = Manifest::new(vec!["major".into()], vec![record("a")]).unwrap();
        let t = featurize(&m, &Fixed(raw), &RunConfig::default(), &[Occlusion::None]);
        assert_eq!(t.cloud_rejected, 1);
        assert!(t.records.is_empty());
    }

    #[test]
    fn ingest_two_points_per_road() {
        let doc = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","id":"r1","properties":{"highway":"primary"},
             "geometry":{"type":"LineString","coordinates":[[-75.0,-12.0],[-75.0005,-12.0005],[-75.001,-12.001]]}},
            {"type":"Feature","id":"r2","properties":{"highway":"track"},
             "geometry":{"type":"LineString","coordinates":[[-75.1,-12.0],[-75.1005,-12.0]]}},
            {"type":"Feature","id":"r3","properties":{"highway":"track"},
             "geometry":{"type":"LineString","coordinates":[[-75.2,-12.0]]}}]}"#;
        let f = ingest(doc, "peru", 2, 7, &HighwayMapping::default(), 300.0, 1000).unwrap();
        assert_eq!(f.summary.anchors, 4);
        assert_eq!(f.summary.feature_errors, 1);
        assert_eq!(f.summary.class_distribution.counts, [1, 0, 1]);
        assert_eq!(f.anchors[0].sample_id, "r1-0");
        let m = f.manifest().unwrap();
        assert_eq!(m.len(), 4);
        let f3 = ingest(doc, "peru", 3, 7, &HighwayMapping::default(), 300.0, 1000).unwrap();
        assert_eq!(f3.summary.skipped_too_short, 1);
        assert_eq!(f3.summary.anchors, 3);
    }

    #[test]
    fn road_source_masks_follow_the_road() {
        let dir = tempfile::tempdir().unwrap();
        let doc = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","id":"w","properties":{"highway":"primary"},
             "geometry":{"type":"LineString","coordinates":[[36.0,-1.0],[36.002,-1.0]]}}]}"#;
        let f = ingest(doc, "kenya", 1, 0, &HighwayMapping::default(), 300.0, 1000).unwrap();
        let m = f.manifest().unwrap();
        io::write_rgb(
            &dir.path().join(&m.records[0].image_uri),
            &ImageTensor::filled(1000, 1000, [50, 60, 70]).unwrap(),
        )
        .unwrap();
        let src = RoadSource::new(&f, dir.path(), 20);
        let raw = src.load(&m.records[0]).unwrap();
        let mask = raw.mask.unwrap();
        // east-west road through the tile centre row
        assert!(mask.get(500, 500) && mask.get(500, 520) && !mask.get(500, 521));
        assert!(src.load(&record("missing-0")).is_err());
    }
}
