use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::Image;
use crate::error::{Error, Result};

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads an 8-bit PNG as a gray or RGB image scaled by 1/255.
///
/// Palette and low-bit-depth files are expanded; alpha is discarded.
pub fn read_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::EXPAND | Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.bit_depth != BitDepth::Eight {
        return Err(png_err(path, format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let (h, w) = (info.height as usize, info.width as usize);
    let (src_ch, keep) = match info.color_type {
        ColorType::Grayscale => (1, 1),
        ColorType::GrayscaleAlpha => (2, 1),
        ColorType::Rgb => (3, 3),
        ColorType::Rgba => (4, 3),
        other => return Err(png_err(path, format!("unsupported color type {other:?}"))),
    };
    let mut data = Vec::with_capacity(h * w * keep);
    for y in 0..h {
        let row = &buf[y * info.line_size..y * info.line_size + w * src_ch];
        for px in row.chunks_exact(src_ch) {
            data.extend(px[..keep].iter().map(|&b| f64::from(b) / 255.0));
        }
    }
    Image::new(h, w, keep, data)
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes an 8-bit gray or RGB PNG, rounding half up after scaling by 255.
pub fn write_png(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width() as u32, img.height() as u32);
    encoder.set_color(if img.channels() == 1 {
        ColorType::Grayscale
    } else {
        ColorType::Rgb
    });
    encoder.set_depth(BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| png_err(path, e))?;
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    writer.write_image_data(&bytes).map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_lossless_on_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        for ch in [1, 3] {
            let img = Image::from_fn(5, 7, ch, |x, y, c| ((x * 31 + y * 17 + c * 5) % 256) as f64 / 255.0);
            let p = dir.path().join(format!("t{ch}.png"));
            write_png(&p, &img).unwrap();
            let back = read_png(&p).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn rounding_is_half_up() {
        // 0.5 * 255 = 127.5 exactly
        assert_eq!(to_u8(0.5), 128);
        assert_eq!(to_u8(0.25), 64);
        assert_eq!(to_u8(1.2), 255);
        assert_eq!(to_u8(-0.3), 0);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_png("/nonexistent/x.png"), Err(Error::Io { .. })));
    }
}
