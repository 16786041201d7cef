//! MSTAR Phoenix-format chip reader: ASCII key-value header followed by
//! big-endian float32 magnitude and phase blocks. The phase block is read
//! and discarded (magnitude-only pipeline).

use std::collections::BTreeMap;

use super::{DataError, SarSample};
use crate::imaging::MagnitudeImage;

const HEADER_MAGIC: &str = "[PhoenixHeaderVer";
const HEADER_END: &str = "[EndofPhoenixHeader]";
const CHIP: usize = crate::imaging::CHIP_SIZE;

/// Parse one MSTAR chip. Header keys used: NumberOfColumns, NumberOfRows,
/// TargetAz, MeasuredDepression/DesiredDepression (incidence = 90 -
/// depression), TargetType, Filename. The chip is center-cropped or
/// zero-padded to 128 x 128.
pub fn read_mstar_chip(bytes: &[u8]) -> Result<SarSample, DataError> {
    // The header is ASCII; find the end marker searching raw bytes so binary
    // payload never confuses the scan.
    let end = find_subslice(bytes, HEADER_END.as_bytes())
        .ok_or_else(|| DataError::MalformedHeader("missing end marker".into()))?;
    let header_text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| DataError::MalformedHeader("header is not ASCII".into()))?;
    if !header_text.trim_start().starts_with(HEADER_MAGIC) {
        return Err(DataError::MalformedHeader(format!(
            "expected {HEADER_MAGIC}"
        )));
    }
    let mut fields = BTreeMap::new();
    for line in header_text.lines() {
        if let Some((key, value)) = line.split_once('=') {
            fields.insert(key.trim().to_ascii_lowercase(), value.trim().to_string());
        }
    }
    let get_num = |key: &str| -> Option<f64> { fields.get(key).and_then(|v| v.parse().ok()) };
    let cols = get_num("numberofcolumns")
        .ok_or_else(|| DataError::MalformedHeader("missing NumberOfColumns".into()))?
        as usize;
    let rows = get_num("numberofrows")
        .ok_or_else(|| DataError::MalformedHeader("missing NumberOfRows".into()))?
        as usize;
    if rows == 0 || cols == 0 || rows > 4096 || cols > 4096 {
        return Err(DataError::MalformedHeader(format!(
            "unreasonable dimensions {rows}x{cols}"
        )));
    }
    let azimuth_deg = get_num("targetaz")
        .or_else(|| get_num("targetazangle"))
        .unwrap_or(0.0)
        .rem_euclid(360.0);
    let depression = get_num("measureddepression").or_else(|| get_num("desireddepression"));
    let incidence_deg = depression.map(|d| 90.0 - d).unwrap_or(0.0);
    let class_label = fields
        .get("targettype")
        .map(|s| s.to_ascii_lowercase())
        .unwrap_or_else(|| "unknown".to_string());
    let source_id = fields
        .get("filename")
        .cloned()
        .unwrap_or_else(|| "unnamed".to_string());

    // Data offset: PhoenixHeaderLength when present and sane, otherwise just
    // past the end-marker line.
    let after_marker = end + HEADER_END.len();
    let after_marker = bytes[after_marker..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| after_marker + p + 1)
        .unwrap_or(after_marker);
    let offset = match get_num("phoenixheaderlength") {
        Some(len) if len >= after_marker as f64 && (len as usize) < bytes.len() => len as usize,
        _ => after_marker,
    };

    let pixel_count = rows * cols;
    let need = offset + 2 * 4 * pixel_count;
    if bytes.len() < need {
        return Err(DataError::TruncatedData {
            expected: need,
            got: bytes.len(),
        });
    }
    let mut magnitude = Vec::with_capacity(pixel_count);
    for i in 0..pixel_count {
        let at = offset + 4 * i;
        let v = f32::from_be_bytes(bytes[at..at + 4].try_into().unwrap());
        if !v.is_finite() || v < 0.0 {
            return Err(DataError::BadSample(format!(
                "magnitude sample {i} is {v}"
            )));
        }
        magnitude.push(v as f64);
    }
    // Phase block is present but discarded.

    let chip = center_fit(&magnitude, rows, cols);
    let sample = SarSample {
        chip,
        incidence_deg,
        azimuth_deg,
        class_label,
        source_id,
    };
    sample.validate()?;
    Ok(sample)
}

/// Serialize a sample back to a canonical Phoenix chip (magnitude block plus
/// an all-zero phase block). Reading it back reproduces the sample exactly.
pub fn write_mstar_chip(sample: &SarSample) -> Vec<u8> {
    let mut header = String::new();
    header.push_str("[PhoenixHeaderVer 0.05]\n");
    header.push_str(&format!("Filename= {}\n", sample.source_id));
    header.push_str(&format!("TargetType= {}\n", sample.class_label));
    header.push_str(&format!("TargetAz= {}\n", sample.azimuth_deg));
    header.push_str(&format!(
        "MeasuredDepression= {}\n",
        90.0 - sample.incidence_deg
    ));
    header.push_str(&format!("NumberOfColumns= {}\n", sample.chip.cols));
    header.push_str(&format!("NumberOfRows= {}\n", sample.chip.rows));
    header.push_str(HEADER_END);
    header.push('\n');
    let mut out = header.into_bytes();
    for &v in &sample.chip.data {
        out.extend_from_slice(&(v as f32).to_be_bytes());
    }
    out.extend(std::iter::repeat(0u8).take(4 * sample.chip.data.len()));
    out
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|w| w == needle)
}

/// Center-crop or zero-pad a rows x cols block to the 128 x 128 chip raster.
fn center_fit(data: &[f64], rows: usize, cols: usize) -> MagnitudeImage {
    if rows == CHIP && cols == CHIP {
        return MagnitudeImage {
            rows: CHIP,
            cols: CHIP,
            data: data.to_vec(),
        };
    }
    let mut chip = MagnitudeImage::zeros(CHIP, CHIP);
    for r in 0..CHIP {
        let src_r = r as isize + (rows as isize - CHIP as isize) / 2;
        if src_r < 0 || src_r >= rows as isize {
            continue;
        }
        for c in 0..CHIP {
            let src_c = c as isize + (cols as isize - CHIP as isize) / 2;
            if src_c < 0 || src_c >= cols as isize {
                continue;
            }
            chip.data[r * CHIP + c] = data[src_r as usize * cols + src_c as usize];
        }
    }
    chip
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_128() -> SarSample {
        let mut chip = MagnitudeImage::zeros(CHIP, CHIP);
        for (i, v) in chip.data.iter_mut().enumerate() {
            *v = ((i % 251) as f64) * 0.5;
        }
        SarSample {
            chip,
            incidence_deg: 75.0,
            azimuth_deg: 200.2,
            class_label: "t62".into(),
            source_id: "HB0001.003".into(),
        }
    }

    #[test]
    fn round_trip_is_identical() {
        let s = sample_128();
        let bytes = write_mstar_chip(&s);
        let parsed = read_mstar_chip(&bytes).unwrap();
        assert_eq!(parsed, s);
        // And a second round trip of the parsed sample.
        let again = read_mstar_chip(&write_mstar_chip(&parsed)).unwrap();
        assert_eq!(again, parsed);
    }

    #[test]
    fn metadata_propagates_verbatim() {
        let s = sample_128();
        let parsed = read_mstar_chip(&write_mstar_chip(&s)).unwrap();
        assert_eq!(parsed.azimuth_deg, 200.2);
        assert_eq!(parsed.incidence_deg, 75.0);
        assert_eq!(parsed.class_label, "t62");
    }

    #[test]
    fn truncated_payload_reports_byte_counts() {
        let bytes = write_mstar_chip(&sample_128());
        let cut = bytes.len() - 100;
        match read_mstar_chip(&bytes[..cut]) {
            Err(DataError::TruncatedData { expected, got }) => {
                assert_eq!(got, cut);
                assert!(expected > got);
            }
            other => panic!("expected TruncatedData, got {other:?}"),
        }
    }

    #[test]
    fn missing_header_is_malformed() {
        assert!(matches!(
            read_mstar_chip(b"not a phoenix file at all"),
            Err(DataError::MalformedHeader(_))
        ));
        let no_magic = b"Filename= x\n[EndofPhoenixHeader]\n";
        assert!(matches!(
            read_mstar_chip(no_magic),
            Err(DataError::MalformedHeader(_))
        ));
    }

    #[test]
    fn odd_sizes_center_fit() {
        let mut s = sample_128();
        s.chip = MagnitudeImage {
            rows: 100,
            cols: 160,
            data: vec![2.0; 100 * 160],
        };
        let bytes = write_mstar_chip(&s);
        let parsed = read_mstar_chip(&bytes).unwrap();
        assert_eq!(parsed.chip.rows, CHIP);
        assert_eq!(parsed.chip.cols, CHIP);
        // Padding rows are zero, interior is preserved.
        assert_eq!(parsed.chip.at(0, 64), 0.0);
        assert_eq!(parsed.chip.at(64, 64), 2.0);
    }

    proptest! {
        #[test]
        fn reader_never_panics(data in proptest::collection::vec(any::<u8>(), 0..4096)) {
            let _ = read_mstar_chip(&data);
        }
    }
}
