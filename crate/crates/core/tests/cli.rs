use std::path::Path;
use std::process::{Command, Output};

use roadtile::dataset::Manifest;
use roadtile::geo::{GeoPoint, TileGeoref};
use roadtile::imageops::{crop_center, ConfidenceMap, ImageTensor};
use roadtile::io;
use roadtile::pipeline::RoadsFile;
use roadtile::raster::BinaryMask;
use serde_json::Value;

fn roadtile(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadtile")).args(args).output().unwrap()
}

fn json_ok(args: &[&str]) -> Value {
    let out = roadtile(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const ROADS: &str = r#"{"type": "FeatureCollection", "features": [
  {"type": "Feature", "id": "way/1", "properties": {"highway": "trunk"},
   "geometry": {"type": "LineString", "coordinates": [[36.8000, -1.2900], [36.8010, -1.2905], [36.8020, -1.2910]]}},
  {"type": "Feature", "id": "way/2", "properties": {"highway": "unclassified"},
   "geometry": {"type": "LineString", "coordinates": [[36.9000, -1.3000], [36.9000, -1.3010]]}},
  {"type": "Feature", "id": "way/3", "properties": {"highway": "track"},
   "geometry": {"type": "LineString", "coordinates": [[37.0, -1.0], [37.001, -1.0], [37.002, -1.001]]}},
  {"type": "Feature", "id": "way/4", "properties": {"highway": "footway"},
   "geometry": {"type": "LineString", "coordinates": [[37.1, -1.0], [37.2, -1.0]]}}
]}"#;

#[test]
fn ingest_one_and_two_points_per_road() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("roads.geojson");
    std::fs::write(&input, ROADS).unwrap();
    let kenya = dir.path().join("kenya.json");
    let s = json_ok(&["ingest", "--input", p(&input), "--output", p(&kenya), "--domain", "kenya", "--seed", "1"]);
    assert_eq!(s["summary"]["anchors"], 3);
    assert_eq!(s["summary"]["skipped_unmapped"], 1);
    assert_eq!(s["summary"]["class_distribution"]["counts"], serde_json::json!([1, 1, 1]));

    let peru = dir.path().join("peru.json");
    let s = json_ok(&[
        "ingest", "--input", p(&input), "--output", p(&peru), "--domain", "peru", "--points-per-road", "2", "--seed", "1",
    ]);
    assert_eq!(s["summary"]["anchors"], 6);

    let again = dir.path().join("kenya2.json");
    json_ok(&["ingest", "--input", p(&input), "--output", p(&again), "--domain", "kenya", "--seed", "1"]);
    assert_eq!(std::fs::read(&kenya).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn ingest_reports_parse_position() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.geojson");
    std::fs::write(&input, "{\"type\": \"FeatureCollection\",\n \"features\": [,]}").unwrap();
    let out = roadtile(&["ingest", "--input", p(&input), "--output", p(&dir.path().join("o.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("bad.geojson"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn exit_codes() {
    assert_eq!(roadtile(&[]).status.code(), Some(1));
    assert_eq!(roadtile(&["prepare", "--output", "x"]).status.code(), Some(1));
    assert_eq!(roadtile(&["split", "--manifest", "m", "--output", "o", "--geometry", "warp"]).status.code(), Some(1));
    assert_eq!(roadtile(&["split", "--manifest", "/does/not/exist", "--output", "o"]).status.code(), Some(2));
    assert_eq!(roadtile(&["--version"]).status.code(), Some(0));
}

/// Roads file plus tiles on disk: one ordinary tile, one cloudy tile, one
/// missing tile.
fn road_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let input = dir.join("roads.geojson");
    std::fs::write(&input, ROADS).unwrap();
    let roads = dir.join("roads.json");
    json_ok(&["ingest", "--input", p(&input), "--output", p(&roads), "--domain", "kenya", "--seed", "3"]);
    let rf = RoadsFile::load(&roads).unwrap();
    let tiles = dir.join("tiles");
    let mut ids = rf.anchors.iter().map(|a| a.sample_id.clone());
    let textured: Vec<u8> = (0..1000u32 * 1000 * 3).map(|i| (i % 251) as u8 / 2).collect();
    io::write_rgb(&tiles.join(format!("{}.png", ids.next().unwrap())), &ImageTensor::new(1000, 1000, textured).unwrap()).unwrap();
    io::write_rgb(
        &tiles.join(format!("{}.png", ids.next().unwrap())),
        &ImageTensor::filled(1000, 1000, [255, 255, 255]).unwrap(),
    )
    .unwrap();
    (roads, tiles)
}

#[test]
fn prepare_from_roads_and_tiles() {
    let dir = tempfile::tempdir().unwrap();
    let (roads, tiles) = road_fixture(dir.path());
    let out = dir.path().join("prep");
    let s = json_ok(&["prepare", "--roads", p(&roads), "--tiles", p(&tiles), "--output", p(&out), "--occlusion", "none"]);
    assert_eq!(s["summary"]["kept"], 1);
    assert_eq!(s["summary"]["cloud_rejected"], 1);
    assert_eq!(s["summary"]["errors"].as_array().unwrap().len(), 1);

    let m = Manifest::load(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(m.len(), 1);
    let rec = &m.records[0];
    let original = io::read_rgb(&tiles.join(format!("{}.png", rec.sample_id))).unwrap();
    let prepared = io::read_rgb(&out.join(&rec.image_uri)).unwrap();
    assert_eq!(prepared, crop_center(&original, 224).unwrap());
    let mask = io::read_mask(&out.join(rec.mask_uri.as_ref().unwrap())).unwrap();
    assert_eq!((mask.width(), mask.height()), (224, 224));
    assert!(mask.get(112, 112), "road passes through the anchor at the tile centre");

    let chan = dir.path().join("chan");
    json_ok(&[
        "prepare", "--roads", p(&roads), "--tiles", p(&tiles), "--output", p(&chan), "--occlusion", "channel-replace",
    ]);
    let replaced = io::read_rgb(&chan.join(&rec.image_uri)).unwrap();
    assert!(replaced.pixels().zip(mask.values()).all(|(px, &v)| px[2] == v * 255));
}

#[test]
fn georeference_matches_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let (roads, _) = road_fixture(dir.path());
    let rf = RoadsFile::load(&roads).unwrap();
    for a in &rf.anchors {
        let t = TileGeoref::new(a.tile.center, 300.0, 1000).unwrap();
        let c = t.geo_to_pixel(GeoPoint::new(a.tile.center.lon, a.tile.center.lat).unwrap()).unwrap();
        assert_eq!((c.x, c.y), (500.0, 500.0));
    }
}

fn write_masks(dir: &Path, masks: &[(&str, BinaryMask)]) {
    for (id, m) in masks {
        io::write_mask(&dir.join(format!("{id}.png")), m).unwrap();
    }
}

fn square(x0: u32, size: u32) -> BinaryMask {
    let mut m = BinaryMask::new(16, 16).unwrap();
    for y in x0..x0 + size {
        for x in x0..x0 + size {
            m.set(x, y, true);
        }
    }
    m
}

#[test]
fn iou_identical_disjoint_and_unpaired() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, truth) = (dir.path().join("pred"), dir.path().join("truth"));
    write_masks(&truth, &[("a", square(0, 4)), ("b", square(8, 4)), ("only-ref", square(0, 2))]);
    write_masks(&pred, &[("a", square(0, 4)), ("b", square(8, 4)), ("only-pred", square(0, 2))]);
    let s = json_ok(&["iou", "--predicted", p(&pred), "--reference", p(&truth)]);
    assert_eq!(s["paired"], 2);
    assert_eq!(s["unpaired_count"], 2);
    assert_eq!(s["unpaired"], serde_json::json!(["only-pred", "only-ref"]));
    assert_eq!(s["thresholds"][0]["mean_iou"], 1.0);

    let disjoint = dir.path().join("disjoint");
    write_masks(&disjoint, &[("a", square(8, 4)), ("b", square(0, 4))]);
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(
        &manifest,
        concat!(
            "{\"provenance\":{\"label_set\":[\"major\",\"minor\",\"two_track\"],\"seed\":null,\"filters\":[],\"params\":{}}}\n",
            "{\"sample_id\":\"a\",\"image_uri\":\"a.png\",\"mask_uri\":null,\"label\":\"major\",\"domain\":\"d\",\"split\":\"test\"}\n",
            "{\"sample_id\":\"b\",\"image_uri\":\"b.png\",\"mask_uri\":null,\"label\":\"minor\",\"domain\":\"d\",\"split\":\"test\"}\n"
        ),
    )
    .unwrap();
    let s = json_ok(&["iou", "--predicted", p(&disjoint), "--reference", p(&truth), "--manifest", p(&manifest)]);
    let t = &s["thresholds"][0];
    assert_eq!(t["mean_iou"], 0.0);
    assert_eq!(t["fraction_iou_at_least_half"]["major"], 0.0);
    assert_eq!(t["fraction_iou_at_least_half"]["minor"], 0.0);
}

#[test]
fn iou_threshold_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, truth) = (dir.path().join("pred"), dir.path().join("truth"));
    write_masks(&truth, &[("a", square(2, 6))]);
    let values: Vec<f64> = (0..256).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
    io::write_confidence(&pred.join("a.png"), &ConfidenceMap::new(16, 16, values).unwrap()).unwrap();
    let s = json_ok(&["iou", "--predicted", p(&pred), "--reference", p(&truth), "--thresholds", "0.1,0.3,0.5,0.7,0.9"]);
    let sizes: Vec<u64> = s["thresholds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["predicted_pixels"].as_u64().unwrap())
        .collect();
    assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{sizes:?}");
    assert!(sizes[0] > sizes[4]);
}

#[test]
fn synth_train_eval_golden() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s);
    json_ok(&["synth", "--output", p(&d("raw")), "--n-per-class", "4", "--tile-px", "256", "--seed", "5"]);
    json_ok(&["prepare", "--manifest", p(&d("raw/manifest.jsonl")), "--output", p(&d("prep"))]);
    let s = json_ok(&[
        "split", "--manifest", p(&d("prep/manifest.jsonl")), "--output", p(&d("prep/split.jsonl")), "--fractions", "0.5,0,0.5",
    ]);
    assert_eq!(s["splits"]["train"], 6);
    assert_eq!(s["splits"]["test"], 6);
    let t = json_ok(&[
        "train", "--manifest", p(&d("prep/split.jsonl")), "--output", p(&d("model.json")), "--epochs", "5", "--seed", "5",
    ]);
    assert_eq!(t["train_samples"], 6);
    let e = json_ok(&["eval", "--manifest", p(&d("prep/split.jsonl")), "--model", p(&d("model.json"))]);
    assert_eq!(e["split"], "test");
    let counts: u64 = e["metrics"]["counts"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|v| v.as_u64().unwrap()))
        .sum();
    assert_eq!(counts, 6);
    let model: Value = serde_json::from_slice(&std::fs::read(d("model.json")).unwrap()).unwrap();
    for key in ["class_names", "d", "weights", "normalizer_mean", "normalizer_scale", "train_config", "final_train_loss"] {
        assert!(model.get(key).is_some(), "{key}");
    }
    assert_eq!(model["weights"].as_array().unwrap().len(), 3 * 31);
}

#[test]
fn experiment_requires_known_domain() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    json_ok(&["synth", "--output", p(&raw), "--n-per-class", "2", "--tile-px", "256"]);
    let out = roadtile(&[
        "experiment", "cross_domain", "--manifest", p(&raw.join("manifest.jsonl")), "--domains", "synthA,kenya",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kenya"));
}
