//! Complex image serialization (CIMG flat binary) and log-scaled PNG export.
//!
//! CIMG layout: 16-byte header — magic "CIMG", u32 LE rows, u32 LE cols,
//! u32 LE reserved (zero) — followed by row-major float64 LE interleaved
//! (re, im) pixels.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{ComplexImage, ImagingError, MagnitudeImage};

const MAGIC: &[u8; 4] = b"CIMG";
const MAX_PIXELS: u64 = 1 << 26;

pub fn write_cimg_bytes(image: &ComplexImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + image.pixels.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(image.rows as u32).to_le_bytes());
    out.extend_from_slice(&(image.cols as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for p in &image.pixels {
        out.extend_from_slice(&p.re.to_le_bytes());
        out.extend_from_slice(&p.im.to_le_bytes());
    }
    out
}

pub fn read_cimg_bytes(bytes: &[u8]) -> Result<ComplexImage, ImagingError> {
    if bytes.len() < 16 {
        return Err(ImagingError::BadImageFile(format!(
            "header truncated: {} bytes",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(ImagingError::BadImageFile("bad magic".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as u64;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as u64;
    if rows == 0 || cols == 0 || rows * cols > MAX_PIXELS {
        return Err(ImagingError::BadImageFile(format!(
            "unreasonable dimensions {rows}x{cols}"
        )));
    }
    let need = 16 + rows * cols * 16;
    if (bytes.len() as u64) < need {
        return Err(ImagingError::BadImageFile(format!(
            "payload truncated: need {need} bytes, got {}",
            bytes.len()
        )));
    }
    let mut pixels = Vec::with_capacity((rows * cols) as usize);
    let mut off = 16usize;
    for _ in 0..rows * cols {
        let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
        pixels.push(Complex64::new(re, im));
        off += 16;
    }
    Ok(ComplexImage {
        rows: rows as usize,
        cols: cols as usize,
        pixels,
        ground_spacing: (0.3, 0.3),
    })
}

pub fn write_cimg(image: &ComplexImage, path: &Path) -> Result<(), ImagingError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&write_cimg_bytes(image))?;
    Ok(())
}

pub fn read_cimg(path: &Path) -> Result<ComplexImage, ImagingError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_cimg_bytes(&bytes)
}

/// 8-bit grayscale PNG of the magnitude on a log scale, floored at
/// `floor_db` (e.g. -40) relative to the chip maximum.
pub fn write_png_log(
    image: &MagnitudeImage,
    path: &Path,
    floor_db: f64,
) -> Result<(), ImagingError> {
    assert!(floor_db < 0.0, "floor must be below the maximum");
    let max = image.max();
    let mut buf = image::GrayImage::new(image.cols as u32, image.rows as u32);
    for r in 0..image.rows {
        for c in 0..image.cols {
            let v = image.at(r, c);
            let level = if max <= 0.0 || v <= 0.0 {
                0.0
            } else {
                let db = 20.0 * (v / max).log10();
                ((db - floor_db) / -floor_db).clamp(0.0, 1.0)
            };
            buf.put_pixel(c as u32, r as u32, image::Luma([(level * 255.0) as u8]));
        }
    }
    buf.save(path).map_err(|e| ImagingError::BadImageFile(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cimg_round_trip() {
        let img = ComplexImage {
            rows: 3,
            cols: 5,
            pixels: (0..15)
                .map(|i| Complex64::new(i as f64 * 0.25, -(i as f64)))
                .collect(),
            ground_spacing: (0.3, 0.3),
        };
        let bytes = write_cimg_bytes(&img);
        assert_eq!(&bytes[0..4], b"CIMG");
        assert_eq!(bytes.len(), 16 + 15 * 16);
        let back = read_cimg_bytes(&bytes).unwrap();
        assert_eq!(back.rows, 3);
        assert_eq!(back.cols, 5);
        assert_eq!(back.pixels, img.pixels);
    }

    #[test]
    fn cimg_rejects_truncation_and_bad_magic() {
        let img = ComplexImage::zeros(2, 2, (0.3, 0.3));
        let bytes = write_cimg_bytes(&img);
        assert!(read_cimg_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_cimg_bytes(&bytes[..10]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_cimg_bytes(&bad).is_err());
    }

    #[test]
    fn png_export_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut mag = MagnitudeImage::zeros(8, 8);
        mag.data[27] = 1.0;
        mag.data[9] = 0.01;
        let path = dir.path().join("chip.png");
        write_png_log(&mag, &path, -40.0).unwrap();
        let meta = std::fs::metadata(&path).unwrap();
        assert!(meta.len() > 0);
    }

    proptest! {
        #[test]
        fn cimg_never_panics_on_arbitrary_bytes(data in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = read_cimg_bytes(&data);
        }

        #[test]
        fn cimg_round_trips_any_small_image(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let n = rows * cols;
            let pixels: Vec<Complex64> = (0..n)
                .map(|i| {
                    let x = (seed.wrapping_add(i as u64 * 0x9e3779b9) % 1000) as f64;
                    Complex64::new(x * 0.001, -x)
                })
                .collect();
            let img = ComplexImage { rows, cols, pixels, ground_spacing: (0.3, 0.3) };
            let back = read_cimg_bytes(&write_cimg_bytes(&img)).unwrap();
            prop_assert_eq!(back.pixels, img.pixels);
        }
    }
}
