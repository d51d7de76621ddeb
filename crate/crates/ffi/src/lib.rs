//! C ABI for roadtile.
//!
//! Every fallible function returns an `RtStatus`; on failure the message is
//! available from `rt_last_error_message` on the same thread. Objects are
//! opaque handles created by `*_new`/`*_load` functions and released with
//! the matching `*_free`. Images are packed row-major RGB bytes.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use roadtile::geo::{GeoPoint, PixelPoint, TileGeoref};
use roadtile::imageops::{self, ImageTensor, OcclusionMode};
use roadtile::metrics::{self, ConfusionMatrix};
use roadtile::model::{extract_features, FeatureVector, ModelFile, ModelParams};
use roadtile::osm::map_highway_class;
use roadtile::raster::{self, BinaryMask, GridPoint};
use roadtile::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfBounds = 3,
    DimensionMismatch = 4,
    Parse = 5,
    EmptyClass = 6,
    UnknownLabel = 7,
    Io = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtRoadClass {
    Unmapped = -1,
    Major = 0,
    Minor = 1,
    TwoTrack = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtOcclusion {
    /// Keep road pixels, zero the context.
    ContextOccluded = 0,
    /// Keep context, zero road pixels.
    RoadOccluded = 1,
    /// Replace the blue channel by mask * 255.
    ChannelReplace = 2,
}

/// Binary raster mask.
pub struct RtMask(BinaryMask);

/// Confusion matrix over classes named `c0`, `c1`, ...
pub struct RtConfusion(ConfusionMatrix);

/// Trained baseline classifier.
pub struct RtModel(ModelParams);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RtStatus {
    match e {
        Error::InvalidCoordinate(_) | Error::InvalidArgument(_) | Error::RoadTooShort { .. } | Error::Diverged => {
            RtStatus::InvalidArgument
        }
        Error::OutOfBounds { .. } => RtStatus::OutOfBounds,
        Error::DimensionMismatch { .. } => RtStatus::DimensionMismatch,
        Error::Parse { .. } | Error::Json(_) => RtStatus::Parse,
        Error::EmptyClass(_) | Error::InsufficientClass { .. } => RtStatus::EmptyClass,
        Error::UnknownLabel(_) => RtStatus::UnknownLabel,
        Error::Io { .. } | Error::Image { .. } => RtStatus::Io,
    }
}

struct Fail(RtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(RtStatus::NullPointer, format!("{name} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RtStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RtStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RtStatus::Internal
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn image(rgb: *const u8, width: u32, height: u32) -> Result<ImageTensor, Fail> {
    let n = width as usize * height as usize * 3;
    Ok(ImageTensor::new(width, height, slice(rgb, n, "rgb")?.to_vec())?)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Projects (`lon`, `lat`) into pixel coordinates of the tile centred on
/// (`center_lon`, `center_lat`) covering `size_m` metres in `size_px` pixels.
///
/// # Safety
/// `x` and `y` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_geo_to_pixel(
    center_lon: f64,
    center_lat: f64,
    size_m: f64,
    size_px: u32,
    lon: f64,
    lat: f64,
    x: *mut f64,
    y: *mut f64,
) -> RtStatus {
    guard(|| {
        let tile = TileGeoref::new(GeoPoint::new(center_lon, center_lat)?, size_m, size_px)?;
        let p = tile.geo_to_pixel(GeoPoint::new(lon, lat)?)?;
        *out(x, "x")? = p.x;
        *out(y, "y")? = p.y;
        Ok(())
    })
}

/// Inverse of `rt_geo_to_pixel`.
///
/// # Safety
/// `lon` and `lat` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_pixel_to_geo(
    center_lon: f64,
    center_lat: f64,
    size_m: f64,
    size_px: u32,
    x: f64,
    y: f64,
    lon: *mut f64,
    lat: *mut f64,
) -> RtStatus {
    guard(|| {
        let tile = TileGeoref::new(GeoPoint::new(center_lon, center_lat)?, size_m, size_px)?;
        let g = tile.pixel_to_geo(PixelPoint::new(x, y))?;
        *out(lon, "lon")? = g.lon;
        *out(lat, "lat")? = g.lat;
        Ok(())
    })
}

/// Road class of an OSM `highway` value under the default mapping.
///
/// # Safety
/// `tag` must be a NUL-terminated string; `class_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_map_highway_class(tag: *const c_char, class_out: *mut RtRoadClass) -> RtStatus {
    guard(|| {
        if tag.is_null() {
            return Err(null("tag"));
        }
        let tag = CStr::from_ptr(tag).to_str().map_err(|_| invalid("tag is not UTF-8"))?;
        *out(class_out, "class_out")? = match map_highway_class(tag).map(|c| c.index()) {
            Some(0) => RtRoadClass::Major,
            Some(1) => RtRoadClass::Minor,
            Some(_) => RtRoadClass::TwoTrack,
            None => RtRoadClass::Unmapped,
        };
        Ok(())
    })
}

fn boxed<T>(v: T, dst: *mut *mut T) -> Result<(), Fail> {
    if dst.is_null() {
        return Err(null("out"));
    }
    unsafe { *dst = Box::into_raw(Box::new(v)) };
    Ok(())
}

/// Empty `width` x `height` mask.
///
/// # Safety
/// `mask_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_mask_new(width: u32, height: u32, mask_out: *mut *mut RtMask) -> RtStatus {
    guard(|| boxed(RtMask(BinaryMask::new(width, height)?), mask_out))
}

/// Mask from `width * height` bytes; any nonzero byte is set.
///
/// # Safety
/// `values` must point to `width * height` bytes; `mask_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_mask_from_values(
    width: u32,
    height: u32,
    values: *const u8,
    mask_out: *mut *mut RtMask,
) -> RtStatus {
    guard(|| {
        let v = slice(values, width as usize * height as usize, "values")?;
        let m = BinaryMask::from_values(width, height, v.iter().map(|&b| (b != 0) as u8).collect())?;
        boxed(RtMask(m), mask_out)
    })
}

/// # Safety
/// `mask` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rt_mask_free(mask: *mut RtMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// # Safety
/// `mask` must be a live handle; `width` and `height` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_mask_dims(mask: *const RtMask, width: *mut u32, height: *mut u32) -> RtStatus {
    guard(|| {
        let m = &handle(mask, "mask")?.0;
        *out(width, "width")? = m.width();
        *out(height, "height")? = m.height();
        Ok(())
    })
}

fn check_xy(m: &BinaryMask, x: u32, y: u32) -> Result<(), Fail> {
    if x >= m.width() || y >= m.height() {
        return Err(Fail(
            RtStatus::OutOfBounds,
            format!("({x}, {y}) outside {}x{}", m.width(), m.height()),
        ));
    }
    Ok(())
}

/// # Safety
/// `mask` must be a live handle; `value` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_mask_get(mask: *const RtMask, x: u32, y: u32, value: *mut bool) -> RtStatus {
    guard(|| {
        let m = &handle(mask, "mask")?.0;
        check_xy(m, x, y)?;
        *out(value, "value")? = m.get(x, y);
        Ok(())
    })
}

/// # Safety
/// `mask` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rt_mask_set(mask: *mut RtMask, x: u32, y: u32, value: bool) -> RtStatus {
    guard(|| {
        let m = &mut out(mask, "mask")?.0;
        check_xy(m, x, y)?;
        m.set(x, y, value);
        Ok(())
    })
}

/// # Safety
/// `mask` must be a live handle; `count` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_mask_count(mask: *const RtMask, count: *mut usize) -> RtStatus {
    guard(|| {
        *out(count, "count")? = handle(mask, "mask")?.0.count();
        Ok(())
    })
}

/// Copies the mask as 0/1 bytes into `values`, which holds `len` bytes.
///
/// # Safety
/// `mask` must be a live handle; `values` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rt_mask_values(mask: *const RtMask, values: *mut u8, len: usize) -> RtStatus {
    guard(|| {
        let m = &handle(mask, "mask")?.0;
        if len != m.values().len() {
            return Err(Fail(
                RtStatus::DimensionMismatch,
                format!("buffer holds {len} bytes, mask has {}", m.values().len()),
            ));
        }
        slice_mut(values, len, "values")?.copy_from_slice(m.values());
        Ok(())
    })
}

/// One-pixel polyline through `n_points` integer points given as
/// interleaved `x, y` pairs.
///
/// # Safety
/// `xy` must hold `2 * n_points` values; `mask_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_rasterize_polyline(
    xy: *const i32,
    n_points: usize,
    width: u32,
    height: u32,
    mask_out: *mut *mut RtMask,
) -> RtStatus {
    guard(|| {
        let pts: Vec<GridPoint> = slice(xy, 2 * n_points, "xy")?
            .chunks_exact(2)
            .map(|p| GridPoint::new(p[0], p[1]))
            .collect();
        boxed(RtMask(raster::rasterize_polyline(&pts, width, height)?), mask_out)
    })
}

/// Full road mask from a pixel-space polyline: points outside the raster
/// are dropped, the rest joined and dilated by `radius`.
///
/// # Safety
/// `xy` must hold `2 * n_points` values; `mask_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_road_mask(
    xy: *const f64,
    n_points: usize,
    width: u32,
    height: u32,
    radius: u32,
    mask_out: *mut *mut RtMask,
) -> RtStatus {
    guard(|| {
        let pts: Vec<PixelPoint> = slice(xy, 2 * n_points, "xy")?
            .chunks_exact(2)
            .map(|p| PixelPoint::new(p[0], p[1]))
            .collect();
        boxed(RtMask(raster::road_mask(&pts, width, height, radius)?), mask_out)
    })
}

/// Euclidean-disk dilation into a new mask.
///
/// # Safety
/// `mask` must be a live handle; `mask_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_dilate(mask: *const RtMask, radius: u32, mask_out: *mut *mut RtMask) -> RtStatus {
    guard(|| boxed(RtMask(raster::dilate(&handle(mask, "mask")?.0, radius)), mask_out))
}

/// Intersection over union; both empty gives 1 with `degenerate` set.
///
/// # Safety
/// Handles must be live; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_iou(a: *const RtMask, b: *const RtMask, value: *mut f64, degenerate: *mut bool) -> RtStatus {
    guard(|| {
        let s = metrics::iou(&handle(a, "a")?.0, &handle(b, "b")?.0)?;
        *out(value, "value")? = s.value;
        *out(degenerate, "degenerate")? = s.degenerate;
        Ok(())
    })
}

/// Keeps the tile unless every band mean exceeds `threshold`. `band_means`
/// receives three values.
///
/// # Safety
/// `rgb` must hold `width * height * 3` bytes; `keep` valid for writes;
/// `band_means` null or valid for three writes.
#[no_mangle]
pub unsafe extern "C" fn rt_cloud_filter(
    rgb: *const u8,
    width: u32,
    height: u32,
    threshold: f64,
    keep: *mut bool,
    band_means: *mut f64,
) -> RtStatus {
    guard(|| {
        let d = imageops::cloud_filter(&image(rgb, width, height)?, threshold);
        *out(keep, "keep")? = d.keep;
        if !band_means.is_null() {
            slice_mut(band_means, 3, "band_means")?.copy_from_slice(&d.band_means);
        }
        Ok(())
    })
}

/// Applies an occlusion variant; `rgb_out` receives `width * height * 3`
/// bytes and may alias `rgb`.
///
/// # Safety
/// `rgb` and `rgb_out` must hold `width * height * 3` bytes; `mask` must be
/// a live handle of the same size.
#[no_mangle]
pub unsafe extern "C" fn rt_occlude(
    rgb: *const u8,
    width: u32,
    height: u32,
    mask: *const RtMask,
    mode: RtOcclusion,
    rgb_out: *mut u8,
) -> RtStatus {
    guard(|| {
        let img = image(rgb, width, height)?;
        let m = &handle(mask, "mask")?.0;
        let res = match mode {
            RtOcclusion::ContextOccluded => imageops::occlude(&img, m, OcclusionMode::ContextOccluded)?,
            RtOcclusion::RoadOccluded => imageops::occlude(&img, m, OcclusionMode::RoadOccluded)?,
            RtOcclusion::ChannelReplace => imageops::replace_channel(&img, m, imageops::Channel::B)?,
        };
        slice_mut(rgb_out, res.data().len(), "rgb_out")?.copy_from_slice(res.data());
        Ok(())
    })
}

/// # Safety
/// `cm_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_confusion_new(num_classes: usize, cm_out: *mut *mut RtConfusion) -> RtStatus {
    guard(|| {
        if num_classes == 0 {
            return Err(invalid("num_classes must be positive"));
        }
        let names = (0..num_classes).map(|i| format!("c{i}")).collect();
        boxed(RtConfusion(ConfusionMatrix::new(names)), cm_out)
    })
}

/// # Safety
/// `cm` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rt_confusion_free(cm: *mut RtConfusion) {
    if !cm.is_null() {
        drop(Box::from_raw(cm));
    }
}

/// # Safety
/// `cm` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rt_confusion_accumulate(cm: *mut RtConfusion, truth: usize, predicted: usize) -> RtStatus {
    guard(|| Ok(out(cm, "cm")?.0.accumulate_index(truth, predicted)?))
}

/// Macro-F1, unweighted accuracy and balanced accuracy. An undefined
/// accuracy (empty matrix, or a class with no true samples) is reported as
/// NaN.
///
/// # Safety
/// `cm` must be a live handle; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_confusion_scores(
    cm: *const RtConfusion,
    macro_f1: *mut f64,
    unweighted_accuracy: *mut f64,
    balanced_accuracy: *mut f64,
) -> RtStatus {
    guard(|| {
        let cm = &handle(cm, "cm")?.0;
        *out(macro_f1, "macro_f1")? = metrics::macro_f1(cm);
        *out(unweighted_accuracy, "unweighted_accuracy")? = metrics::unweighted_accuracy(cm).unwrap_or(f64::NAN);
        *out(balanced_accuracy, "balanced_accuracy")? = metrics::balanced_accuracy(cm).unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Parses a model file written by `roadtile train`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `model_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_model_load_json(json: *const c_char, model_out: *mut *mut RtModel) -> RtStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| invalid("json is not UTF-8"))?;
        let file: ModelFile = serde_json::from_str(text).map_err(Error::from)?;
        boxed(RtModel(file.into_params()?), model_out)
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rt_model_free(model: *mut RtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `n_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rt_model_num_classes(model: *const RtModel, n_out: *mut usize) -> RtStatus {
    guard(|| {
        *out(n_out, "n_out")? = handle(model, "model")?.0.num_classes();
        Ok(())
    })
}

unsafe fn write_proba(p: &ModelParams, f: &FeatureVector, proba: *mut f64, len: usize) -> Result<(), Fail> {
    if len != p.num_classes() {
        return Err(Fail(
            RtStatus::DimensionMismatch,
            format!("buffer holds {len} values, model has {} classes", p.num_classes()),
        ));
    }
    slice_mut(proba, len, "proba")?.copy_from_slice(&p.predict_proba(f)?);
    Ok(())
}

/// Class probabilities for a cropped RGB image.
///
/// # Safety
/// `rgb` must hold `width * height * 3` bytes; `proba` valid for `len`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn rt_model_predict_proba(
    model: *const RtModel,
    rgb: *const u8,
    width: u32,
    height: u32,
    proba: *mut f64,
    len: usize,
) -> RtStatus {
    guard(|| {
        let p = &handle(model, "model")?.0;
        write_proba(p, &extract_features(&image(rgb, width, height)?), proba, len)
    })
}

/// Class probabilities for a precomputed feature vector.
///
/// # Safety
/// `features` must hold `n_features` values; `proba` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rt_model_predict_proba_features(
    model: *const RtModel,
    features: *const f64,
    n_features: usize,
    proba: *mut f64,
    len: usize,
) -> RtStatus {
    guard(|| {
        let p = &handle(model, "model")?.0;
        let f = FeatureVector(slice(features, n_features, "features")?.to_vec());
        write_proba(p, &f, proba, len)
    })
}
