//! Road vectors from GeoJSON extracts of OpenStreetMap.
//!
//! Only `FeatureCollection -> Feature -> LineString` with a `highway`
//! property is read. Highway values are folded into three road classes by a
//! [`HighwayMapping`] table; anything the table does not know is skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, TileGeoref, DEFAULT_TILE_SIZE_M, DEFAULT_TILE_SIZE_PX};
use crate::keyed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadClass {
    Major,
    Minor,
    TwoTrack,
}

impl RoadClass {
    pub const ALL: [RoadClass; 3] = [RoadClass::Major, RoadClass::Minor, RoadClass::TwoTrack];

    pub fn name(self) -> &'static str {
        match self {
            RoadClass::Major => "major",
            RoadClass::Minor => "minor",
            RoadClass::TwoTrack => "two_track",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label_set() -> Vec<String> {
        Self::ALL.iter().map(|c| c.name().to_string()).collect()
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoadClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "major" => Ok(RoadClass::Major),
            "minor" => Ok(RoadClass::Minor),
            "two_track" | "two-track" | "twotrack" => Ok(RoadClass::TwoTrack),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// OSM `highway` value to road class.
#[derive(Debug, Clone, PartialEq)]
pub struct HighwayMapping {
    table: BTreeMap<String, RoadClass>,
}

const DEFAULT_TABLE: &[(&str, RoadClass)] = &[
    ("motorway", RoadClass::Major),
    ("trunk", RoadClass::Major),
    ("primary", RoadClass::Major),
    ("motorway_link", RoadClass::Major),
    ("trunk_link", RoadClass::Major),
    ("primary_link", RoadClass::Major),
    ("secondary", RoadClass::Minor),
    ("tertiary", RoadClass::Minor),
    ("unclassified", RoadClass::Minor),
    ("residential", RoadClass::Minor),
    ("secondary_link", RoadClass::Minor),
    ("tertiary_link", RoadClass::Minor),
    ("track", RoadClass::TwoTrack),
];

impl Default for HighwayMapping {
    fn default() -> Self {
        HighwayMapping {
            table: DEFAULT_TABLE
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
        }
    }
}

impl HighwayMapping {
    /// Applies a JSON override `{tag: label}` on top of the default table.
    /// A `null` label removes the tag.
    pub fn with_overrides(json: &str) -> Result<Self> {
        let overrides: BTreeMap<String, Option<String>> =
            serde_json::from_str(json).map_err(|e| parse_error(&e))?;
        let mut mapping = Self::default();
        for (tag, label) in overrides {
            match label {
                Some(l) => {
                    mapping.table.insert(tag, l.parse()?);
                }
                None => {
                    mapping.table.remove(&tag);
                }
            }
        }
        Ok(mapping)
    }

    pub fn map(&self, raw_tag: &str) -> Option<RoadClass> {
        self.table.get(raw_tag).copied()
    }
}

/// Default-table lookup.
pub fn map_highway_class(raw_tag: &str) -> Option<RoadClass> {
    DEFAULT_TABLE
        .iter()
        .find(|(k, _)| *k == raw_tag)
        .map(|&(_, v)| v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadRecord {
    pub road_id: String,
    pub polyline: Vec<GeoPoint>,
    pub raw_tag: String,
    pub label: RoadClass,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureError {
    pub feature_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedRoads {
    pub records: Vec<RoadRecord>,
    /// Candidates whose highway value has no class.
    pub skipped_unmapped: usize,
    /// Candidates with bad geometry.
    pub feature_errors: Vec<FeatureError>,
}

fn parse_error(e: &serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn structure_error(msg: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        column: 0,
        message: msg.into(),
    }
}

pub fn parse_roads(document: &str, domain: &str) -> Result<ParsedRoads> {
    parse_roads_with(document, domain, &HighwayMapping::default())
}

pub fn parse_roads_with(document: &str, domain: &str, mapping: &HighwayMapping) -> Result<ParsedRoads> {
    let doc: Value = serde_json::from_str(document).map_err(|e| parse_error(&e))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(structure_error("document is not a GeoJSON FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| structure_error("FeatureCollection has no features array"))?;

    let mut out = ParsedRoads::default();
    for (i, feature) in features.iter().enumerate() {
        let geometry = feature.get("geometry");
        let is_line = geometry
            .and_then(|g| g.get("type"))
            .and_then(Value::as_str)
            == Some("LineString");
        let Some(tag) = feature
            .get("properties")
            .and_then(|p| p.get("highway"))
            .and_then(Value::as_str)
        else {
            continue;
        };
        if !is_line {
            continue;
        }
        let Some(label) = mapping.map(tag) else {
            out.skipped_unmapped += 1;
            continue;
        };
        match line_coordinates(geometry.unwrap()) {
            Ok(polyline) => out.records.push(RoadRecord {
                road_id: feature_id(feature, i),
                polyline,
                raw_tag: tag.to_string(),
                label,
                domain: domain.to_string(),
            }),
            Err(message) => out.feature_errors.push(FeatureError {
                feature_index: i,
                message,
            }),
        }
    }
    Ok(out)
}

fn feature_id(feature: &Value, index: usize) -> String {
    let props = feature.get("properties");
    let candidates = [
        feature.get("id"),
        props.and_then(|p| p.get("@id")),
        props.and_then(|p| p.get("osm_id")),
        props.and_then(|p| p.get("id")),
    ];
    for c in candidates.into_iter().flatten() {
        match c {
            Value::String(s) => return s.clone(),
            Value::Number(n) => return n.to_string(),
            _ => {}
        }
    }
    format!("feature-{index}")
}

fn line_coordinates(geometry: &Value) -> std::result::Result<Vec<GeoPoint>, String> {
    let coords = geometry
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or("LineString without coordinates")?;
    let mut points: Vec<GeoPoint> = Vec::with_capacity(coords.len());
    for c in coords {
        let pair = c.as_array().ok_or("coordinate is not an array")?;
        let (lon, lat) = match (pair.first().and_then(Value::as_f64), pair.get(1).and_then(Value::as_f64)) {
            (Some(lon), Some(lat)) => (lon, lat),
            _ => return Err("coordinate needs numeric lon and lat".into()),
        };
        let p = GeoPoint::new(lon, lat).map_err(|e| e.to_string())?;
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    if points.len() < 2 {
        return Err(format!("LineString has {} distinct points, need at least 2", points.len()));
    }
    Ok(points)
}

/// Serializes records back to a GeoJSON FeatureCollection.
pub fn to_geojson(records: &[RoadRecord]) -> Value {
    let features: Vec<Value> = records
        .iter()
        .map(|r| {
            serde_json::json!({
                "type": "Feature",
                "id": r.road_id,
                "properties": { "highway": r.raw_tag },
                "geometry": {
                    "type": "LineString",
                    "coordinates": r.polyline.iter().map(|p| [p.lon, p.lat]).collect::<Vec<_>>(),
                },
            })
        })
        .collect();
    serde_json::json!({ "type": "FeatureCollection", "features": features })
}

/// Draws `k` distinct polyline vertices uniformly without replacement.
/// The stream is keyed by `(road_id, seed)` only.
pub fn sample_anchor_points(road: &RoadRecord, k: usize, seed: u64) -> Result<Vec<GeoPoint>> {
    let n = road.polyline.len();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > n {
        return Err(Error::RoadTooShort {
            road_id: road.road_id.clone(),
            vertices: n,
            k,
        });
    }
    let mut rng = keyed::rng(&[keyed::hash_str(&road.road_id), seed]);
    Ok(index::sample(&mut rng, n, k)
        .into_iter()
        .map(|i| road.polyline[i])
        .collect())
}

pub fn make_tile(anchor: GeoPoint) -> TileGeoref {
    TileGeoref {
        center: anchor,
        size_m: DEFAULT_TILE_SIZE_M,
        size_px: DEFAULT_TILE_SIZE_PX,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    /// Counts in `RoadClass::ALL` order.
    pub counts: [usize; 3],
    /// Counts divided by the smallest nonzero count; `None` when all are zero.
    pub ratio: Option<[f64; 3]>,
}

pub fn class_distribution(records: &[RoadRecord]) -> ClassDistribution {
    let mut counts = [0usize; 3];
    for r in records {
        counts[r.label.index()] += 1;
    }
    distribution_from_counts(counts)
}

pub fn distribution_from_counts(counts: [usize; 3]) -> ClassDistribution {
    let ratio = counts
        .iter()
        .copied()
        .filter(|&c| c > 0)
        .min()
        .map(|m| counts.map(|c| c as f64 / m as f64));
    ClassDistribution { counts, ratio }
}
