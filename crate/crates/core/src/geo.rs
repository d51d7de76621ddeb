//! Local tangent-plane transforms between WGS84 lon/lat and tile pixels.
//!
//! Tiles are north-up squares centred on an anchor point. The projection is
//! a local equirectangular approximation about the tile centre on a sphere of
//! radius [`EARTH_RADIUS_M`]; over a few hundred metres the error is well
//! below a centimetre.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_378_137.0;
pub const DEFAULT_TILE_SIZE_M: f64 = 300.0;
pub const DEFAULT_TILE_SIZE_PX: u32 = 1000;

/// Longitude normalized to (-180, 180], latitude in [-90, 90].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Error::InvalidCoordinate(format!("({lon}, {lat}) is not finite")));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidCoordinate(format!("latitude {lat} outside [-90, 90]")));
        }
        Ok(GeoPoint {
            lon: normalize_lon(lon),
            lat,
        })
    }
}

/// Wraps a longitude into (-180, 180].
pub fn normalize_lon(lon: f64) -> f64 {
    let mut l = lon % 360.0;
    if l <= -180.0 {
        l += 360.0;
    } else if l > 180.0 {
        l -= 360.0;
    }
    l
}

/// Continuous pixel coordinates: x grows east (columns), y grows south (rows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub fn new(x: f64, y: f64) -> Self {
        PixelPoint { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileGeoref {
    pub center: GeoPoint,
    pub size_m: f64,
    pub size_px: u32,
}

impl TileGeoref {
    pub fn new(center: GeoPoint, size_m: f64, size_px: u32) -> Result<Self> {
        if !(size_m.is_finite() && size_m > 0.0) {
            return Err(Error::invalid(format!("tile size {size_m} m must be positive")));
        }
        if size_px == 0 {
            return Err(Error::invalid("tile size in pixels must be positive"));
        }
        Ok(TileGeoref {
            center,
            size_m,
            size_px,
        })
    }

    /// Ground sample distance in metres per pixel.
    pub fn gsd(&self) -> f64 {
        self.size_m / self.size_px as f64
    }

    fn half_px(&self) -> f64 {
        self.size_px as f64 / 2.0
    }

    fn meters_per_degree_lat() -> f64 {
        EARTH_RADIUS_M * std::f64::consts::PI / 180.0
    }

    fn meters_per_degree_lon(&self) -> f64 {
        Self::meters_per_degree_lat() * self.center.lat.to_radians().cos()
    }

    pub fn geo_to_pixel(&self, p: GeoPoint) -> Result<PixelPoint> {
        if !p.lon.is_finite() || !p.lat.is_finite() {
            return Err(Error::InvalidCoordinate(format!(
                "({}, {}) is not finite",
                p.lon, p.lat
            )));
        }
        let dlon = normalize_lon(p.lon - self.center.lon);
        let east_m = dlon * self.meters_per_degree_lon();
        let north_m = (p.lat - self.center.lat) * Self::meters_per_degree_lat();
        let gsd = self.gsd();
        Ok(PixelPoint {
            x: self.half_px() + east_m / gsd,
            y: self.half_px() - north_m / gsd,
        })
    }

    pub fn pixel_to_geo(&self, q: PixelPoint) -> Result<GeoPoint> {
        if !q.x.is_finite() || !q.y.is_finite() {
            return Err(Error::InvalidCoordinate(format!(
                "pixel ({}, {}) is not finite",
                q.x, q.y
            )));
        }
        let gsd = self.gsd();
        let east_m = (q.x - self.half_px()) * gsd;
        let north_m = (self.half_px() - q.y) * gsd;
        let lon = self.center.lon + east_m / self.meters_per_degree_lon();
        let lat = self.center.lat + north_m / Self::meters_per_degree_lat();
        Ok(GeoPoint {
            lon: normalize_lon(lon),
            lat,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tile(lon: f64, lat: f64) -> TileGeoref {
        TileGeoref::new(GeoPoint::new(lon, lat).unwrap(), 300.0, 1000).unwrap()
    }

    #[test]
    fn center_maps_to_image_center() {
        let g = tile(36.8, -1.3);
        let q = g.geo_to_pixel(g.center).unwrap();
        assert_eq!(q, PixelPoint::new(500.0, 500.0));
        assert_eq!(g.pixel_to_geo(q).unwrap(), g.center);
    }

    #[test]
    fn thirty_meters_is_one_hundred_pixels() {
        let g = tile(0.0, 0.0);
        let deg = 30.0 / (EARTH_RADIUS_M * std::f64::consts::PI / 180.0);
        let east = g.geo_to_pixel(GeoPoint::new(deg, 0.0).unwrap()).unwrap();
        assert!((east.x - 600.0).abs() < 1e-9 && (east.y - 500.0).abs() < 1e-9);
        let north = g.geo_to_pixel(GeoPoint::new(0.0, deg).unwrap()).unwrap();
        assert!((north.x - 500.0).abs() < 1e-9 && (north.y - 400.0).abs() < 1e-9);
    }

    #[test]
    fn pixel_600_at_equator_pinned() {
        // 30 / (6378137 * pi / 180), evaluated independently.
        let g = tile(0.0, 0.0);
        let p = g.pixel_to_geo(PixelPoint::new(600.0, 500.0)).unwrap();
        assert!((p.lon - 0.000_269_494_585_235_856_4).abs() < 1e-15);
        assert_eq!(p.lat, 0.0);
    }

    #[test]
    fn non_finite_rejected() {
        let g = tile(0.0, 0.0);
        let bad = GeoPoint {
            lon: f64::NAN,
            lat: 0.0,
        };
        assert!(matches!(g.geo_to_pixel(bad), Err(Error::InvalidCoordinate(_))));
        assert!(g.pixel_to_geo(PixelPoint::new(f64::INFINITY, 0.0)).is_err());
        assert!(GeoPoint::new(0.0, 91.0).is_err());
    }

    #[test]
    fn gsd_is_derived() {
        assert_eq!(tile(0.0, 0.0).gsd(), 0.3);
    }

    #[test]
    fn antimeridian_center() {
        let g = tile(180.0, 10.0);
        let q = g.geo_to_pixel(GeoPoint::new(-179.9999, 10.0).unwrap()).unwrap();
        assert!(q.x > 500.0);
        let back = g.pixel_to_geo(q).unwrap();
        assert!((back.lon - -179.9999).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn round_trip_within_150m(
            clon in -179.0f64..179.0, clat in -80.0f64..80.0,
            dx in -150.0f64..150.0, dy in -150.0f64..150.0,
        ) {
            let g = tile(clon, clat);
            let p = g.pixel_to_geo(PixelPoint::new(500.0 + dx / 0.3, 500.0 + dy / 0.3)).unwrap();
            let q = g.geo_to_pixel(p).unwrap();
            let back = g.pixel_to_geo(q).unwrap();
            prop_assert!((back.lon - p.lon).abs() < 1e-9);
            prop_assert!((back.lat - p.lat).abs() < 1e-9);
        }

        #[test]
        fn isometric_near_center(clon in -179.0f64..179.0, clat in -80.0f64..80.0, theta in 0.0f64..std::f64::consts::TAU) {
            let g = tile(clon, clat);
            let a = g.pixel_to_geo(PixelPoint::new(500.0, 500.0)).unwrap();
            let b = g.pixel_to_geo(PixelPoint::new(
                500.0 + theta.cos() / 0.3,
                500.0 + theta.sin() / 0.3,
            )).unwrap();
            // ground distance from an independent haversine
            let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
            let dl = (b.lon - a.lon).to_radians();
            let h = ((p2 - p1) / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
            let d = 2.0 * EARTH_RADIUS_M * h.sqrt().asin();
            prop_assert!((d - 1.0).abs() < 1e-3);
        }

        #[test]
        fn monotone(clat in -80.0f64..80.0, d in 1e-6f64..1e-3) {
            let g = tile(10.0, clat);
            let c = g.geo_to_pixel(g.center).unwrap();
            let e = g.geo_to_pixel(GeoPoint::new(10.0 + d, clat).unwrap()).unwrap();
            let n = g.geo_to_pixel(GeoPoint::new(10.0, clat + d).unwrap()).unwrap();
            prop_assert!(e.x > c.x);
            prop_assert!(n.y < c.y);
        }
    }
}
