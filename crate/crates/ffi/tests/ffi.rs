use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use roadtile_ffi::*;

fn last_error() -> String {
    let p = rt_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn geo_round_trip() {
    let (mut x, mut y) = (0.0, 0.0);
    let s = unsafe { rt_geo_to_pixel(0.0, 0.0, 300.0, 1000, 0.0002694945852358564, 0.0, &mut x, &mut y) };
    assert_eq!(s, RtStatus::Ok);
    assert!((x - 600.0).abs() < 1e-9 && (y - 500.0).abs() < 1e-9);
    let (mut lon, mut lat) = (0.0, 0.0);
    assert_eq!(unsafe { rt_pixel_to_geo(0.0, 0.0, 300.0, 1000, x, y, &mut lon, &mut lat) }, RtStatus::Ok);
    assert!((lon - 0.0002694945852358564).abs() < 1e-15 && lat.abs() < 1e-15);

    let s = unsafe { rt_geo_to_pixel(0.0, 95.0, 300.0, 1000, 0.0, 0.0, &mut x, &mut y) };
    assert_eq!(s, RtStatus::InvalidArgument);
    assert!(last_error().contains("coordinate"));
    assert_eq!(
        unsafe { rt_geo_to_pixel(0.0, 0.0, 300.0, 1000, 0.0, 0.0, ptr::null_mut(), &mut y) },
        RtStatus::NullPointer
    );
}

#[test]
fn highway_classes() {
    let class = |tag: &str| {
        let c = CString::new(tag).unwrap();
        let mut out = RtRoadClass::Unmapped;
        assert_eq!(unsafe { rt_map_highway_class(c.as_ptr(), &mut out) }, RtStatus::Ok);
        out
    };
    assert_eq!(class("primary"), RtRoadClass::Major);
    assert_eq!(class("residential"), RtRoadClass::Minor);
    assert_eq!(class("track"), RtRoadClass::TwoTrack);
    assert_eq!(class("footway"), RtRoadClass::Unmapped);
}

#[test]
fn masks_and_iou() {
    unsafe {
        let xy = [0i32, 0, 9, 0];
        let mut line = ptr::null_mut();
        assert_eq!(rt_rasterize_polyline(xy.as_ptr(), 2, 10, 10, &mut line), RtStatus::Ok);
        let mut n = 0;
        assert_eq!(rt_mask_count(line, &mut n), RtStatus::Ok);
        assert_eq!(n, 10);

        let mut thick = ptr::null_mut();
        assert_eq!(rt_dilate(line, 1, &mut thick), RtStatus::Ok);
        rt_mask_count(thick, &mut n);
        assert_eq!(n, 20);

        let mut value = 0.0;
        let mut degenerate = true;
        assert_eq!(rt_iou(line, thick, &mut value, &mut degenerate), RtStatus::Ok);
        assert_eq!((value, degenerate), (0.5, false));

        let mut on = false;
        assert_eq!(rt_mask_get(thick, 3, 1, &mut on), RtStatus::Ok);
        assert!(on);
        assert_eq!(rt_mask_set(thick, 3, 1, false), RtStatus::Ok);
        rt_mask_get(thick, 3, 1, &mut on);
        assert!(!on);
        assert_eq!(rt_mask_get(thick, 10, 0, &mut on), RtStatus::OutOfBounds);

        let mut buf = vec![0u8; 100];
        assert_eq!(rt_mask_values(line, buf.as_mut_ptr(), buf.len()), RtStatus::Ok);
        assert_eq!(&buf[..10], &[1; 10]);
        assert_eq!(rt_mask_values(line, buf.as_mut_ptr(), 99), RtStatus::DimensionMismatch);

        let outside = [0i32, 0, 10, 0];
        let mut bad = ptr::null_mut();
        assert_eq!(rt_rasterize_polyline(outside.as_ptr(), 2, 10, 10, &mut bad), RtStatus::OutOfBounds);
        assert!(bad.is_null());

        rt_mask_free(line);
        rt_mask_free(thick);
        rt_mask_free(ptr::null_mut());
    }
}

#[test]
fn cloud_and_occlusion() {
    unsafe {
        let bright = [200u8; 4 * 4 * 3];
        let mut keep = true;
        let mut means = [0.0; 3];
        assert_eq!(rt_cloud_filter(bright.as_ptr(), 4, 4, 150.0, &mut keep, means.as_mut_ptr()), RtStatus::Ok);
        assert!(!keep);
        assert_eq!(means, [200.0; 3]);

        let img: Vec<u8> = (0..4 * 4 * 3).map(|i| i as u8 * 5).collect();
        let values: Vec<u8> = (0..16).map(|i| (i % 3 == 0) as u8).collect();
        let mut mask = ptr::null_mut();
        assert_eq!(rt_mask_from_values(4, 4, values.as_ptr(), &mut mask), RtStatus::Ok);
        let mut a = vec![0u8; img.len()];
        let mut b = vec![0u8; img.len()];
        assert_eq!(rt_occlude(img.as_ptr(), 4, 4, mask, RtOcclusion::ContextOccluded, a.as_mut_ptr()), RtStatus::Ok);
        assert_eq!(rt_occlude(img.as_ptr(), 4, 4, mask, RtOcclusion::RoadOccluded, b.as_mut_ptr()), RtStatus::Ok);
        let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        assert_eq!(sum, img);
        assert_eq!(rt_occlude(img.as_ptr(), 4, 4, mask, RtOcclusion::ChannelReplace, a.as_mut_ptr()), RtStatus::Ok);
        assert!(a.chunks(3).zip(&values).all(|(p, &m)| p[2] == m * 255));
        rt_mask_free(mask);
    }
}

#[test]
fn confusion_scores() {
    unsafe {
        let mut cm = ptr::null_mut();
        assert_eq!(rt_confusion_new(2, &mut cm), RtStatus::Ok);
        for (t, p, n) in [(0, 0, 8), (0, 1, 2), (1, 0, 4), (1, 1, 6)] {
            for _ in 0..n {
                assert_eq!(rt_confusion_accumulate(cm, t, p), RtStatus::Ok);
            }
        }
        assert_eq!(rt_confusion_accumulate(cm, 2, 0), RtStatus::InvalidArgument);
        let (mut f1, mut ua, mut ba) = (0.0, 0.0, 0.0);
        assert_eq!(rt_confusion_scores(cm, &mut f1, &mut ua, &mut ba), RtStatus::Ok);
        assert!((f1 - 0.696969696969697).abs() < 1e-12);
        assert!((ua - 0.7).abs() < 1e-12 && (ba - 0.7).abs() < 1e-12);
        rt_confusion_free(cm);

        rt_confusion_new(3, &mut cm);
        rt_confusion_scores(cm, &mut f1, &mut ua, &mut ba);
        assert!(ua.is_nan() && ba.is_nan());
        rt_confusion_free(cm);
    }
}

#[test]
fn model_prediction() {
    let json = serde_json::json!({
        "class_names": ["a", "b"],
        "d": 30,
        "weights": (0..62).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
        "normalizer_mean": vec![0.0; 30],
        "normalizer_scale": vec![1.0; 30],
        "train_config": {},
        "final_train_loss": 0.5
    })
    .to_string();
    let c = CString::new(json).unwrap();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(rt_model_load_json(c.as_ptr(), &mut model), RtStatus::Ok, "{}", last_error());
        let mut n = 0;
        rt_model_num_classes(model, &mut n);
        assert_eq!(n, 2);
        let img = [1u8; 2 * 2 * 3];
        let mut p = [0.0; 2];
        assert_eq!(rt_model_predict_proba(model, img.as_ptr(), 2, 2, p.as_mut_ptr(), 2), RtStatus::Ok);
        // mean red value 1 drives the first logit
        let e = 1f64.exp();
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-12);
        let f = [0.0; 29];
        assert_eq!(
            rt_model_predict_proba_features(model, f.as_ptr(), 29, p.as_mut_ptr(), 2),
            RtStatus::DimensionMismatch
        );
        rt_model_free(model);

        let bad = CString::new("{\"class_names\": 3}").unwrap();
        assert_eq!(rt_model_load_json(bad.as_ptr(), &mut model), RtStatus::Parse);
    }
}

fn artifact_dir() -> PathBuf {
    std::env::current_exe().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = crate_dir.join("include/roadtile.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["rt_last_error_message", "rt_mask_new", "rt_model_predict_proba", "RT_STATUS_NULL_POINTER"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let lib = artifact_dir().join("libroadtile_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping C link check: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "roadtile.h"
int main(void) {
    RtMask *m = NULL;
    if (rt_mask_new(8, 8, &m) != RT_STATUS_OK) return 1;
    rt_mask_set(m, 4, 4, true);
    RtMask *d = NULL;
    if (rt_dilate(m, 1, &d) != RT_STATUS_OK) return 2;
    size_t n = 0;
    rt_mask_count(d, &n);
    if (rt_mask_set(m, 9, 0, true) != RT_STATUS_OUT_OF_BOUNDS) return 3;
    printf("%zu %s\n", n, rt_last_error_message());
    rt_mask_free(m);
    rt_mask_free(d);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    assert_eq!(String::from_utf8_lossy(&out.stdout), "5 (9, 0) outside 8x8\n");
}
