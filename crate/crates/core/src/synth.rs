//! Procedural stand-in for satellite tiles.
//!
//! Each tile is a noisy background with one road through the centre, drawn
//! along a random five-vertex polyline. Road appearance depends on the class:
//! major roads are 30 px bright grey strips, minor roads 12 px dull grey
//! strips, and two-tracks are a pair of 4 px dirt ruts 8 px apart. With
//! `context_correlation` the background hue is also shifted per class, so
//! context alone carries label signal.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Manifest, Provenance, SampleRecord, Split};
use crate::error::{Error, Result};
use crate::geo::PixelPoint;
use crate::imageops::ImageTensor;
use crate::io;
use crate::keyed;
use crate::osm::RoadClass;
use crate::pipeline::{RawSample, TileSource};
use crate::raster::road_mask;

pub const MIN_TILE_PX: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainParams {
    pub base_color: [u8; 3],
    pub noise_amplitude: u8,
}

impl DomainParams {
    /// Built-in domains: `synthA` is a green savanna, `synthB` an arid
    /// highland. Unknown names fall back to `synthA`.
    pub fn preset(name: &str) -> Self {
        match name {
            "synthB" => DomainParams {
                base_color: [150, 125, 95],
                noise_amplitude: 30,
            },
            _ => DomainParams {
                base_color: [90, 110, 60],
                noise_amplitude: 30,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub tile_px: u32,
    pub context_correlation: bool,
    pub domain: DomainParams,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            tile_px: 1000,
            context_correlation: false,
            domain: DomainParams::preset("synthA"),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tile_px < MIN_TILE_PX {
            return Err(Error::invalid(format!(
                "tile_px {} below the minimum of {MIN_TILE_PX}",
                self.tile_px
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTile {
    pub image: ImageTensor,
    /// Road centreline in pixel coordinates.
    pub polyline: Vec<PixelPoint>,
    pub label: RoadClass,
}

struct RoadStyle {
    color: [u8; 3],
    /// Pixels with centreline distance in `[inner, outer)` are road.
    inner: f64,
    outer: f64,
}

fn style(label: RoadClass) -> RoadStyle {
    match label {
        RoadClass::Major => RoadStyle {
            color: [200, 200, 195],
            inner: 0.0,
            outer: 15.0,
        },
        RoadClass::Minor => RoadStyle {
            color: [135, 130, 125],
            inner: 0.0,
            outer: 6.0,
        },
        RoadClass::TwoTrack => RoadStyle {
            color: [165, 125, 85],
            inner: 4.0,
            outer: 8.0,
        },
    }
}

fn context_shift(label: RoadClass) -> [i32; 3] {
    match label {
        RoadClass::Major => [20, -10, -10],
        RoadClass::Minor => [-10, 20, -10],
        RoadClass::TwoTrack => [-10, -10, 20],
    }
}

fn centerline(config: &SynthConfig, tile_seed: u64) -> Vec<PixelPoint> {
    let mut rng = keyed::rng(&[config.seed, tile_seed, 0x9017]);
    let n = config.tile_px as f64;
    let c = n / 2.0;
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (ux, uy) = (theta.cos(), theta.sin());
    let reach = 0.45 * n;
    [-1.0, -0.5, 0.0, 0.5, 1.0]
        .iter()
        .map(|&t: &f64| {
            let off = if t == 0.0 {
                0.0
            } else {
                rng.gen_range(-0.03..0.03) * n
            };
            PixelPoint::new(c + t * reach * ux - off * uy, c + t * reach * uy + off * ux)
        })
        .collect()
}

fn segment_distance(p: (f64, f64), a: PixelPoint, b: PixelPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.x) * dx + (p.1 - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.x + t * dx - p.0, a.y + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

fn noise(bits: u64, channel: usize, amplitude: u8) -> i32 {
    let span = 2 * amplitude as u64 + 1;
    let r = (bits >> (16 * channel)) & 0xffff;
    ((r * span) >> 16) as i32 - amplitude as i32
}

pub fn generate_tile(label: RoadClass, config: &SynthConfig, tile_seed: u64) -> Result<SynthTile> {
    config.validate()?;
    let n = config.tile_px;
    let polyline = centerline(config, tile_seed);
    let road = style(label);
    let shift = if config.context_correlation {
        context_shift(label)
    } else {
        [0; 3]
    };
    let amp = config.domain.noise_amplitude;
    let road_amp = amp / 3;
    let base = config.domain.base_color;
    let noise_key = keyed::key(&[config.seed, tile_seed, 0x4015e]);

    let (min_x, max_x, min_y, max_y) = polyline.iter().fold(
        (f64::MAX, f64::MIN, f64::MAX, f64::MIN),
        |(a, b, c, d), p| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
    );
    let mut data = vec![0u8; n as usize * n as usize * 3];
    for (y, row) in data.chunks_exact_mut(n as usize * 3).enumerate() {
        for (x, px) in row.chunks_exact_mut(3).enumerate() {
            let bits = keyed::mix64(noise_key ^ (y as u64 * n as u64 + x as u64));
            let (fx, fy) = (x as f64, y as f64);
            let near = fx >= min_x - road.outer
                && fx <= max_x + road.outer
                && fy >= min_y - road.outer
                && fy <= max_y + road.outer;
            let on_road = near && {
                let d = polyline
                    .windows(2)
                    .map(|w| segment_distance((fx, fy), w[0], w[1]))
                    .fold(f64::INFINITY, f64::min);
                d >= road.inner && d < road.outer
            };
            for c in 0..3 {
                let v = if on_road {
                    road.color[c] as i32 + noise(bits, c, road_amp)
                } else {
                    base[c] as i32 + shift[c] + noise(bits, c, amp)
                };
                px[c] = v.clamp(0, 255) as u8;
            }
        }
    }
    Ok(SynthTile {
        image: ImageTensor::new(n, n, data)?,
        polyline,
        label,
    })
}

/// Seed of the `index`-th tile of a class.
pub fn tile_seed(label: RoadClass, index: usize) -> u64 {
    keyed::key(&[label.index() as u64, index as u64])
}

pub fn sample_id(domain: &str, label: RoadClass, index: usize) -> String {
    format!("{domain}-{}-{index:05}", label.name())
}

/// In-memory catalogue of synthetic samples, usable as a [`TileSource`]
/// without touching disk.
#[derive(Debug, Clone, Default)]
pub struct SynthCatalog {
    configs: Vec<SynthConfig>,
    mask_radius: u32,
    entries: HashMap<String, (usize, RoadClass, u64)>,
}

impl SynthCatalog {
    pub fn new(mask_radius: u32) -> Self {
        SynthCatalog {
            mask_radius,
            ..Default::default()
        }
    }

    /// Registers `n_per_class` tiles per class for `domain` and returns
    /// their records in class-major order.
    pub fn add_domain(&mut self, n_per_class: usize, config: &SynthConfig, domain: &str) -> Result<Vec<SampleRecord>> {
        config.validate()?;
        let cfg_index = self.configs.len();
        self.configs.push(config.clone());
        let mut records = Vec::with_capacity(3 * n_per_class);
        for label in RoadClass::ALL {
            for i in 0..n_per_class {
                let id = sample_id(domain, label, i);
                records.push(SampleRecord {
                    sample_id: id.clone(),
                    image_uri: format!("images/{id}.png"),
                    mask_uri: Some(format!("masks/{id}.png")),
                    label: label.name().to_string(),
                    domain: domain.to_string(),
                    split: Split::Unassigned,
                });
                if self.entries.insert(id.clone(), (cfg_index, label, tile_seed(label, i))).is_some() {
                    return Err(Error::invalid(format!("duplicate synthetic sample {id}")));
                }
            }
        }
        Ok(records)
    }

    pub fn render(&self, sample_id: &str) -> Result<(SynthTile, crate::raster::BinaryMask)> {
        let &(ci, label, seed) = self
            .entries
            .get(sample_id)
            .ok_or_else(|| Error::invalid(format!("unknown synthetic sample {sample_id}")))?;
        let cfg = &self.configs[ci];
        let tile = generate_tile(label, cfg, seed)?;
        let mask = road_mask(&tile.polyline, cfg.tile_px, cfg.tile_px, self.mask_radius)?;
        Ok((tile, mask))
    }
}

impl TileSource for SynthCatalog {
    fn load(&self, record: &SampleRecord) -> Result<RawSample> {
        let (tile, mask) = self.render(&record.sample_id)?;
        Ok(RawSample {
            image: tile.image,
            mask: Some(mask),
        })
    }
}

fn provenance(n_per_class: usize, config: &SynthConfig, domain: &str, mask_radius: u32) -> Provenance {
    let mut p = Provenance {
        label_set: RoadClass::label_set(),
        seed: Some(config.seed),
        filters: vec![format!("synth(domain={domain})")],
        ..Provenance::default()
    };
    p.params.insert("n_per_class".into(), n_per_class.into());
    p.params.insert("tile_px".into(), config.tile_px.into());
    p.params.insert("context_correlation".into(), config.context_correlation.into());
    p.params.insert("base_color".into(), serde_json::json!(config.domain.base_color));
    p.params.insert("noise_amplitude".into(), config.domain.noise_amplitude.into());
    p.params.insert("mask_radius".into(), mask_radius.into());
    p
}

/// Balanced in-memory dataset for one domain.
pub fn catalog_dataset(n_per_class: usize, config: &SynthConfig, domain: &str, mask_radius: u32) -> Result<(Manifest, SynthCatalog)> {
    let mut catalog = SynthCatalog::new(mask_radius);
    let records = catalog.add_domain(n_per_class, config, domain)?;
    let mut m = Manifest::new(RoadClass::label_set(), records)?;
    m.provenance = provenance(n_per_class, config, domain, mask_radius);
    Ok((m, catalog))
}

/// Writes full-resolution tiles, road masks and `manifest.jsonl` under
/// `output_dir`.
pub fn generate_dataset(
    n_per_class: usize,
    config: &SynthConfig,
    domain: &str,
    output_dir: &Path,
    mask_radius: u32,
) -> Result<Manifest> {
    let (manifest, catalog) = catalog_dataset(n_per_class, config, domain, mask_radius)?;
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    manifest
        .records
        .par_iter()
        .map(|r| {
            let (tile, mask) = catalog.render(&r.sample_id)?;
            io::write_rgb(&output_dir.join(&r.image_uri), &tile.image)?;
            io::write_mask(&output_dir.join(r.mask_uri.as_deref().unwrap_or_default()), &mask)
        })
        .collect::<Result<Vec<()>>>()?;
    manifest.save(&output_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageops::band_means;
    use crate::raster::{dilate, rasterize_polyline, clip_points_to_crop, CropRect};

    fn small(correlated: bool) -> SynthConfig {
        SynthConfig {
            tile_px: 256,
            context_correlation: correlated,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let cfg = small(true);
        let a = generate_tile(RoadClass::Minor, &cfg, 11).unwrap();
        let b = generate_tile(RoadClass::Minor, &cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.image, generate_tile(RoadClass::Minor, &cfg, 12).unwrap().image);
    }

    #[test]
    fn rejects_small_tiles() {
        let cfg = SynthConfig {
            tile_px: 128,
            ..SynthConfig::default()
        };
        assert!(generate_tile(RoadClass::Major, &cfg, 0).is_err());
    }

    #[test]
    fn road_passes_through_center() {
        let cfg = small(false);
        let t = generate_tile(RoadClass::Major, &cfg, 5).unwrap();
        assert_eq!(t.polyline[2], PixelPoint::new(128.0, 128.0));
        assert!((t.image.pixel(128, 128)[0] as i32 - 200).abs() <= 10);
        assert!(t.polyline.iter().all(|p| p.x >= 0.0 && p.x < 256.0 && p.y >= 0.0 && p.y < 256.0));
    }

    #[test]
    fn major_road_within_dilated_centerline() {
        let cfg = SynthConfig::default();
        for seed in 0..3 {
            let t = generate_tile(RoadClass::Major, &cfg, seed).unwrap();
            let pts = clip_points_to_crop(&t.polyline, CropRect::full(1000, 1000));
            let mask = dilate(&rasterize_polyline(&pts, 1000, 1000).unwrap(), 16);
            let road = style(RoadClass::Major);
            for y in 0..1000 {
                for x in 0..1000 {
                    let d = t
                        .polyline
                        .windows(2)
                        .map(|w| segment_distance((x as f64, y as f64), w[0], w[1]))
                        .fold(f64::INFINITY, f64::min);
                    if d < road.outer {
                        assert!(mask.get(x, y), "road pixel ({x}, {y}) outside dilated mask");
                    }
                }
            }
        }
    }

    #[test]
    fn uncorrelated_background_matches_across_labels() {
        let cfg = small(false);
        let mut means = Vec::new();
        for label in RoadClass::ALL {
            let mut acc = [0.0; 3];
            for i in 0..300 {
                let t = generate_tile(label, &cfg, tile_seed(label, i)).unwrap();
                // corner block is far from the road
                let corner = crate::imageops::crop_center(&t.image, 256).unwrap();
                let mut block = Vec::new();
                for y in 0..16 {
                    for x in 0..16 {
                        block.extend_from_slice(&corner.pixel(x, y));
                    }
                }
                let m = band_means(&ImageTensor::new(16, 16, block).unwrap());
                for c in 0..3 {
                    acc[c] += m[c] / 300.0;
                }
            }
            means.push(acc);
        }
        for c in 0..3 {
            assert!((means[0][c] - means[1][c]).abs() < 1.0, "{means:?}");
            assert!((means[0][c] - means[2][c]).abs() < 1.0, "{means:?}");
        }
    }

    #[test]
    fn domains_separate_in_channel_means() {
        let a = SynthConfig {
            tile_px: 256,
            domain: DomainParams::preset("synthA"),
            ..SynthConfig::default()
        };
        let b = SynthConfig {
            domain: DomainParams::preset("synthB"),
            ..a.clone()
        };
        let amp = a.domain.noise_amplitude as f64;
        for i in 0..20 {
            let ma = band_means(&generate_tile(RoadClass::Minor, &a, i).unwrap().image);
            let mb = band_means(&generate_tile(RoadClass::Minor, &b, i).unwrap().image);
            assert!(mb[0] - ma[0] > amp, "{ma:?} {mb:?}");
        }
    }

    #[test]
    fn dataset_on_disk_is_reproducible() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let cfg = small(true);
        let m1 = generate_dataset(2, &cfg, "synthA", dir1.path(), 20).unwrap();
        let m2 = generate_dataset(2, &cfg, "synthA", dir2.path(), 20).unwrap();
        assert_eq!(m1.len(), 6);
        assert!(m1.class_counts().iter().all(|(_, n)| *n == 2));
        for r in &m1.records {
            let a = std::fs::read(dir1.path().join(&r.image_uri)).unwrap();
            let b = std::fs::read(dir2.path().join(&r.image_uri)).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(
            std::fs::read(dir1.path().join("manifest.jsonl")).unwrap(),
            std::fs::read(dir2.path().join("manifest.jsonl")).unwrap()
        );
        assert_eq!(m2, Manifest::load(&dir2.path().join("manifest.jsonl")).unwrap());
    }

    #[test]
    fn hundred_per_class_is_balanced() {
        let (m, _) = catalog_dataset(100, &small(false), "synthA", 20).unwrap();
        assert_eq!(m.len(), 300);
        assert!(m.class_counts().iter().all(|(_, n)| *n == 100));
    }
}
