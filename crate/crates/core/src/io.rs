//! PNG encoding for tiles (8-bit RGB), masks (8-bit grey, {0, 255}) and
//! confidence maps (16-bit grey, value x 65535).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::error::{Error, Result};
use crate::imageops::{ConfidenceMap, ImageTensor};
use crate::raster::BinaryMask;

fn image_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_png(path: &Path, width: u32, height: u32, color: ColorType, depth: BitDepth, data: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(color);
    enc.set_depth(depth);
    enc.set_compression(png::Compression::Fast);
    let mut writer = enc.write_header().map_err(|e| image_err(path, e))?;
    writer.write_image_data(data).map_err(|e| image_err(path, e))?;
    writer.finish().map_err(|e| image_err(path, e))
}

struct Decoded {
    width: u32,
    height: u32,
    color: ColorType,
    depth: BitDepth,
    data: Vec<u8>,
}

fn read_png(path: &Path, transformations: Transformations) -> Result<Decoded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(transformations);
    let mut reader = dec.read_info().map_err(|e| image_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| image_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| image_err(path, e))?;
    buf.truncate(info.buffer_size());
    Ok(Decoded {
        width: info.width,
        height: info.height,
        color: info.color_type,
        depth: info.bit_depth,
        data: buf,
    })
}

pub fn write_rgb(path: &Path, img: &ImageTensor) -> Result<()> {
    write_png(path, img.width(), img.height(), ColorType::Rgb, BitDepth::Eight, img.data())
}

/// Reads any 8-bit PNG as RGB; alpha is dropped and grey is replicated.
pub fn read_rgb(path: &Path) -> Result<ImageTensor> {
    let d = read_png(path, Transformations::normalize_to_color8())?;
    let data = match d.color {
        ColorType::Rgb => d.data,
        ColorType::Rgba => d.data.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        ColorType::Grayscale => d.data.iter().flat_map(|&v| [v, v, v]).collect(),
        ColorType::GrayscaleAlpha => d.data.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        other => return Err(image_err(path, format!("unsupported colour type {other:?}"))),
    };
    ImageTensor::new(d.width, d.height, data).map_err(|e| image_err(path, e))
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let data: Vec<u8> = mask.values().iter().map(|&v| v * 255).collect();
    write_png(path, mask.width(), mask.height(), ColorType::Grayscale, BitDepth::Eight, &data)
}

/// Reads an 8-bit greyscale mask; any nonzero sample is set.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let d = read_png(path, Transformations::normalize_to_color8())?;
    let data = match d.color {
        ColorType::Grayscale => d.data,
        ColorType::GrayscaleAlpha => d.data.chunks_exact(2).map(|p| p[0]).collect(),
        ColorType::Rgb => d.data.chunks_exact(3).map(|p| p[0] | p[1] | p[2]).collect(),
        ColorType::Rgba => d.data.chunks_exact(4).map(|p| p[0] | p[1] | p[2]).collect(),
        other => return Err(image_err(path, format!("unsupported colour type {other:?}"))),
    };
    BinaryMask::from_values(d.width, d.height, data).map_err(|e| image_err(path, e))
}

pub fn write_confidence(path: &Path, c: &ConfidenceMap) -> Result<()> {
    let data: Vec<u8> = c
        .values()
        .iter()
        .flat_map(|&v| ((v * 65535.0).round() as u16).to_be_bytes())
        .collect();
    write_png(path, c.width(), c.height(), ColorType::Grayscale, BitDepth::Sixteen, &data)
}

/// 16-bit greyscale is scaled by 1/65535, 8-bit by 1/255.
pub fn read_confidence(path: &Path) -> Result<ConfidenceMap> {
    let d = read_png(path, Transformations::EXPAND)?;
    let channels = match d.color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        other => return Err(image_err(path, format!("confidence maps must be greyscale, got {other:?}"))),
    };
    let values: Vec<f64> = match d.depth {
        BitDepth::Sixteen => d
            .data
            .chunks_exact(2 * channels)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64 / 65535.0)
            .collect(),
        BitDepth::Eight => d.data.chunks_exact(channels).map(|p| p[0] as f64 / 255.0).collect(),
        other => return Err(image_err(path, format!("unsupported bit depth {other:?}"))),
    };
    ConfidenceMap::new(d.width, d.height, values).map_err(|e| image_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_and_mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageTensor::new(3, 2, (0..18).map(|v| v * 13).collect()).unwrap();
        let p = dir.path().join("a/img.png");
        write_rgb(&p, &img).unwrap();
        assert_eq!(read_rgb(&p).unwrap(), img);

        let mask = BinaryMask::from_values(3, 2, vec![1, 0, 0, 1, 1, 0]).unwrap();
        let q = dir.path().join("mask.png");
        write_mask(&q, &mask).unwrap();
        assert_eq!(read_mask(&q).unwrap(), mask);
        // masks read as RGB carry 255 on set pixels
        assert_eq!(read_rgb(&q).unwrap().pixel(0, 0), [255, 255, 255]);
    }

    #[test]
    fn confidence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = ConfidenceMap::new(2, 2, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let p = dir.path().join("c.png");
        write_confidence(&p, &c).unwrap();
        let back = read_confidence(&p).unwrap();
        for (a, b) in back.values().iter().zip(c.values()) {
            assert!((a - b).abs() <= 0.5 / 65535.0);
        }
        let mask = BinaryMask::from_values(2, 1, vec![1, 0]).unwrap();
        let q = dir.path().join("m.png");
        write_mask(&q, &mask).unwrap();
        assert_eq!(read_confidence(&q).unwrap().values(), &[1.0, 0.0]);
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_rgb(Path::new("/nonexistent/tile.png")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/tile.png"));
    }
}
