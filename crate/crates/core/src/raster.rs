//! Road masks: Bresenham segments over a polyline, Euclidean-disk dilation,
//! and centre crops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::PixelPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: i32,
    pub y: i32,
}

impl GridPoint {
    pub const fn new(x: i32, y: i32) -> Self {
        GridPoint { x, y }
    }
}

/// One value per pixel, row-major, every value 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be at least 1x1"));
        }
        Ok(BinaryMask {
            width,
            height,
            values: vec![0; width as usize * height as usize],
        })
    }

    pub fn filled(width: u32, height: u32) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        m.values.fill(1);
        Ok(m)
    }

    /// Builds a mask from raw values; any nonzero byte counts as set.
    pub fn from_values(width: u32, height: u32, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be at least 1x1"));
        }
        if values.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", width as usize * height as usize),
                actual: format!("{} values", values.len()),
            });
        }
        let values = values.into_iter().map(|v| (v != 0) as u8).collect();
        Ok(BinaryMask {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.values[self.idx(x, y)] != 0
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let i = self.idx(x, y);
        self.values[i] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.values.iter().zip(&other.values).all(|(&a, &b)| a <= b)
    }

    pub fn invert(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| 1 - v).collect(),
        }
    }
}

/// Integer Bresenham line from `p0` to `p1`, both endpoints included.
///
/// The segment is always traced from its lexicographically smaller endpoint
/// so the pixel set does not depend on direction; the output is then ordered
/// from `p0` to `p1`. Ties in the error term round toward the start point.
pub fn bresenham(p0: GridPoint, p1: GridPoint) -> Vec<GridPoint> {
    let swapped = p1 < p0;
    let (a, b) = if swapped { (p1, p0) } else { (p0, p1) };

    let dx = (b.x as i64 - a.x as i64).abs();
    let dy = (b.y as i64 - a.y as i64).abs();
    let sx: i64 = if b.x >= a.x { 1 } else { -1 };
    let sy: i64 = if b.y >= a.y { 1 } else { -1 };
    let (major_len, minor_len, x_major) = if dx >= dy { (dx, dy, true) } else { (dy, dx, false) };

    let mut out = Vec::with_capacity(major_len as usize + 1);
    let (mut x, mut y) = (a.x as i64, a.y as i64);
    let mut d = 2 * minor_len - major_len;
    for _ in 0..=major_len {
        out.push(GridPoint::new(x as i32, y as i32));
        if d > 0 {
            if x_major {
                y += sy;
            } else {
                x += sx;
            }
            d -= 2 * major_len;
        }
        d += 2 * minor_len;
        if x_major {
            x += sx;
        } else {
            y += sy;
        }
    }
    if swapped {
        out.reverse();
    }
    out
}

/// Axis-aligned pixel rectangle `[x0, x0 + width) x [y0, y0 + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

impl CropRect {
    pub fn full(width: u32, height: u32) -> Self {
        CropRect {
            x0: 0,
            y0: 0,
            width,
            height,
        }
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 as i64
            && y >= self.y0 as i64
            && x < self.x0 as i64 + self.width as i64
            && y < self.y0 as i64 + self.height as i64
    }
}

pub fn center_crop_rect(full: u32, target: u32) -> Result<CropRect> {
    if target > full {
        return Err(Error::invalid(format!(
            "crop target {target} exceeds source size {full}"
        )));
    }
    if target == 0 {
        return Err(Error::invalid("crop target must be positive"));
    }
    let off = (full - target) / 2;
    Ok(CropRect {
        x0: off,
        y0: off,
        width: target,
        height: target,
    })
}

/// Rounds points to the nearest pixel, keeps those inside `crop`, and
/// translates them to crop-local coordinates. Order is preserved.
pub fn clip_points_to_crop(points: &[PixelPoint], crop: CropRect) -> Vec<GridPoint> {
    points
        .iter()
        .filter(|p| p.x.is_finite() && p.y.is_finite())
        .map(|p| (p.x.round() as i64, p.y.round() as i64))
        .filter(|&(x, y)| crop.contains(x, y))
        .map(|(x, y)| GridPoint::new((x - crop.x0 as i64) as i32, (y - crop.y0 as i64) as i32))
        .collect()
}

/// Union of the Bresenham segments between consecutive points.
pub fn rasterize_polyline(points: &[GridPoint], width: u32, height: u32) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(width, height)?;
    for (index, p) in points.iter().enumerate() {
        if !mask.contains(p.x, p.y) {
            return Err(Error::OutOfBounds {
                index,
                x: p.x,
                y: p.y,
                width,
                height,
            });
        }
    }
    match points {
        [] => {}
        [p] => mask.set(p.x as u32, p.y as u32, true),
        _ => {
            for w in points.windows(2) {
                for q in bresenham(w[0], w[1]) {
                    mask.set(q.x as u32, q.y as u32, true);
                }
            }
        }
    }
    Ok(mask)
}

/// Horizontal spans of the disk `dx^2 + dy^2 <= r^2`, one `(dy, half_width)`
/// per row.
fn disk_spans(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    (-r..=r)
        .map(|dy| {
            let rem = r * r - dy * dy;
            let mut half = (rem as f64).sqrt() as i64;
            while half * half > rem {
                half -= 1;
            }
            while (half + 1) * (half + 1) <= rem {
                half += 1;
            }
            (dy, half)
        })
        .collect()
}

/// Sets every pixel within Euclidean distance `radius` of a set pixel.
pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width as i64, mask.height as i64);
    let spans = disk_spans(radius);
    let mut out = BinaryMask {
        width: mask.width,
        height: mask.height,
        values: vec![0; mask.values.len()],
    };
    for y in 0..h {
        for x in 0..w {
            if mask.values[(y * w + x) as usize] == 0 {
                continue;
            }
            for &(dy, half) in &spans {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                let lo = (x - half).max(0);
                let hi = (x + half).min(w - 1);
                let row = (yy * w) as usize;
                out.values[row + lo as usize..=row + hi as usize].fill(1);
            }
        }
    }
    out
}

/// Full-resolution road mask from a pixel-space polyline: points outside
/// the raster are dropped, survivors are joined in order, and the line is
/// thickened by a disk of `radius`.
pub fn road_mask(points: &[PixelPoint], width: u32, height: u32, radius: u32) -> Result<BinaryMask> {
    let survivors = clip_points_to_crop(points, CropRect::full(width, height));
    Ok(dilate(&rasterize_polyline(&survivors, width, height)?, radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gp(x: i32, y: i32) -> GridPoint {
        GridPoint::new(x, y)
    }

    fn pts(v: &[(i32, i32)]) -> Vec<GridPoint> {
        v.iter().map(|&(x, y)| gp(x, y)).collect()
    }

    #[test]
    fn bresenham_examples() {
        assert_eq!(bresenham(gp(0, 0), gp(0, 0)), pts(&[(0, 0)]));
        assert_eq!(bresenham(gp(0, 0), gp(3, 3)), pts(&[(0, 0), (1, 1), (2, 2), (3, 3)]));
        assert_eq!(
            bresenham(gp(0, 0), gp(5, 2)),
            pts(&[(0, 0), (1, 0), (2, 1), (3, 1), (4, 2), (5, 2)])
        );
    }

    #[test]
    fn crop_rects() {
        assert_eq!(center_crop_rect(1000, 224).unwrap().x0, 388);
        assert_eq!(center_crop_rect(1000, 224).unwrap().width, 224);
        assert_eq!(center_crop_rect(224, 224).unwrap().x0, 0);
        assert!(center_crop_rect(1000, 1001).is_err());
    }

    #[test]
    fn clipping() {
        let crop = center_crop_rect(1000, 224).unwrap();
        let inside = [PixelPoint::new(400.2, 500.0), PixelPoint::new(600.6, 611.4)];
        assert_eq!(clip_points_to_crop(&inside, crop), pts(&[(12, 112), (213, 223)]));
        let outside = [PixelPoint::new(0.0, 0.0), PixelPoint::new(999.0, 500.0)];
        assert!(clip_points_to_crop(&outside, crop).is_empty());
        let mixed = [
            PixelPoint::new(400.0, 400.0),
            PixelPoint::new(10.0, 10.0),
            PixelPoint::new(500.0, 500.0),
        ];
        assert_eq!(clip_points_to_crop(&mixed, crop), pts(&[(12, 12), (112, 112)]));
    }

    #[test]
    fn rasterize_examples() {
        assert_eq!(rasterize_polyline(&[], 16, 16).unwrap().count(), 0);
        let one = rasterize_polyline(&pts(&[(3, 3)]), 16, 16).unwrap();
        assert_eq!(one.count(), 1);
        assert!(one.get(3, 3));
        let m = rasterize_polyline(&pts(&[(0, 0), (3, 3), (3, 0)]), 16, 16).unwrap();
        // brute-force union of the two segments
        let mut expect: Vec<GridPoint> = bresenham(gp(0, 0), gp(3, 3));
        expect.extend(bresenham(gp(3, 3), gp(3, 0)));
        expect.sort();
        expect.dedup();
        assert_eq!(expect.len(), 7);
        assert_eq!(m.count(), 7);
        assert!(expect.iter().all(|p| m.get(p.x as u32, p.y as u32)));
    }

    #[test]
    fn rasterize_out_of_bounds_names_index() {
        let err = rasterize_polyline(&pts(&[(0, 0), (2, 2), (16, 0)]), 16, 16).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { index: 2, .. }));
    }

    #[test]
    fn dilate_small_disks() {
        let mut m = BinaryMask::new(9, 9).unwrap();
        m.set(4, 4, true);
        assert_eq!(dilate(&m, 0), m);
        assert_eq!(dilate(&m, 1).count(), 5);
        // lattice points with dx^2 + dy^2 <= 4
        let brute = (-2i32..=2)
            .flat_map(|dx| (-2i32..=2).map(move |dy| dx * dx + dy * dy))
            .filter(|&d| d <= 4)
            .count();
        assert_eq!(brute, 13);
        assert_eq!(dilate(&m, 2).count(), 13);
    }

    #[test]
    fn dilate_clips_at_border() {
        let mut m = BinaryMask::new(5, 5).unwrap();
        m.set(0, 0, true);
        assert_eq!(dilate(&m, 1).count(), 3);
    }

    #[test]
    fn disk_span_widths() {
        for r in 0..40u32 {
            for (dy, half) in disk_spans(r) {
                assert!(half * half + dy * dy <= (r * r) as i64);
                assert!((half + 1) * (half + 1) + dy * dy > (r * r) as i64);
            }
        }
    }

    fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
        proptest::collection::vec(prop_oneof![9 => Just(0u8), 1 => Just(1u8)], 24 * 24)
            .prop_map(|v| BinaryMask::from_values(24, 24, v).unwrap())
    }

    proptest! {
        #[test]
        fn bresenham_reverse_symmetry(a in (0i32..64, 0i32..64), b in (0i32..64, 0i32..64)) {
            let fwd = bresenham(gp(a.0, a.1), gp(b.0, b.1));
            let mut rev = bresenham(gp(b.0, b.1), gp(a.0, a.1));
            rev.reverse();
            prop_assert_eq!(fwd, rev);
        }

        #[test]
        fn bresenham_count_and_distance(a in (0i32..64, 0i32..64), b in (0i32..64, 0i32..64)) {
            let line = bresenham(gp(a.0, a.1), gp(b.0, b.1));
            let (dx, dy) = ((b.0 - a.0) as f64, (b.1 - a.1) as f64);
            prop_assert_eq!(line.len() as i32, (b.0 - a.0).abs().max((b.1 - a.1).abs()) + 1);
            let len = (dx * dx + dy * dy).sqrt();
            for p in &line {
                if len > 0.0 {
                    let cross = ((p.x - a.0) as f64 * dy - (p.y - a.1) as f64 * dx).abs() / len;
                    prop_assert!(cross <= std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
                }
            }
        }

        #[test]
        fn dilate_monotone(m1 in mask_strategy(), extra in mask_strategy(), r in 0u32..6) {
            let values: Vec<u8> = m1.values().iter().zip(extra.values()).map(|(a, b)| a | b).collect();
            let m2 = BinaryMask::from_values(24, 24, values).unwrap();
            prop_assert!(dilate(&m1, r).is_subset_of(&dilate(&m2, r)));
        }

        #[test]
        fn dilate_composition_contains_sum(m in mask_strategy(), a in 0u32..4, b in 0u32..4) {
            // disk(a) + disk(b) is contained in disk(a + b)
            prop_assert!(dilate(&dilate(&m, a), b).is_subset_of(&dilate(&m, a + b)));
        }
    }
}
