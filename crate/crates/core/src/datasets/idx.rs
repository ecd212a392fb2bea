//! IDX container (the MNIST distribution format).
//!
//! Images: big-endian `0x00000803`, then `n`, `rows`, `cols` as u32, then
//! `n·rows·cols` unsigned bytes. Labels: `0x00000801`, `n`, then `n` bytes.

use std::fs;
use std::path::Path;

use super::{DatasetError, LabeledDataset, Result};
use crate::linalg::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DatasetError::Truncated {
            what,
            offset,
            needed: 4,
            available: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, what: &'static str) -> Result<()> {
    let found = read_u32(bytes, 0, what)?;
    if found != expected {
        return Err(DatasetError::WrongMagic { what, expected, found });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], offset: usize, len: usize, what: &'static str) -> Result<&'a [u8]> {
    let end = offset + len;
    if bytes.len() < end {
        return Err(DatasetError::Truncated {
            what,
            offset,
            needed: len,
            available: bytes.len() - offset,
        });
    }
    if bytes.len() > end {
        return Err(DatasetError::TrailingBytes {
            what,
            offset: end,
            extra: bytes.len() - end,
        });
    }
    Ok(&bytes[offset..end])
}

/// Parsed image block: `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    const WHAT: &str = "idx images";
    check_magic(bytes, IMAGES_MAGIC, WHAT)?;
    let n = read_u32(bytes, 4, WHAT)? as usize;
    let rows = read_u32(bytes, 8, WHAT)? as usize;
    let cols = read_u32(bytes, 12, WHAT)? as usize;
    let pixels = payload(bytes, 16, n * rows * cols, WHAT)?;
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    const WHAT: &str = "idx labels";
    check_magic(bytes, LABELS_MAGIC, WHAT)?;
    let n = read_u32(bytes, 4, WHAT)? as usize;
    payload(bytes, 8, n, WHAT)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an image/label IDX pair. Pixels are scaled to `[0, 1]` and each
/// image is flattened row-major. The vocabulary is the sorted set of label
/// values, so label `k` of MNIST becomes class name `"k"`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let images = read_file(images_path.as_ref())?;
    let labels = read_file(labels_path.as_ref())?;
    from_idx_bytes(&images, &labels)
}

pub(crate) fn from_idx_bytes(images: &[u8], labels: &[u8]) -> Result<LabeledDataset> {
    let (n, rows, cols, pixels) = parse_idx_images(images)?;
    let raw_labels = parse_idx_labels(labels)?;
    if raw_labels.len() != n {
        return Err(DatasetError::CountMismatch {
            images: n,
            labels: raw_labels.len(),
        });
    }
    let mut present = [false; 256];
    for &l in raw_labels {
        present[l as usize] = true;
    }
    let values: Vec<u8> = (0..=255u8).filter(|&v| present[v as usize]).collect();
    let mut dense = [0usize; 256];
    for (i, &v) in values.iter().enumerate() {
        dense[v as usize] = i;
    }
    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let features = Matrix::from_row_major(n, rows * cols, data)?;
    LabeledDataset::new(
        features,
        raw_labels.iter().map(|&l| dense[l as usize]).collect(),
        values.iter().map(u8::to_string).collect(),
    )
}

/// Serializes images in IDX form.
pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = if rows * cols == 0 { 0 } else { pixels.len() / (rows * cols) };
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two 2x2 images written out byte by byte.
    fn fixture() -> (Vec<u8>, Vec<u8>) {
        let images = vec![
            0, 0, 8, 3, // magic
            0, 0, 0, 2, // n
            0, 0, 0, 2, // rows
            0, 0, 0, 2, // cols
            0, 255, 51, 102, // image 0
            255, 0, 0, 204, // image 1
        ];
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 2, 7, 3];
        (images, labels)
    }

    #[test]
    fn hand_built_pair() {
        let (images, labels) = fixture();
        let d = from_idx_bytes(&images, &labels).unwrap();
        assert_eq!(d.features().shape(), (2, 4));
        assert_eq!(d.row(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(d.row(1), &[1.0, 0.0, 0.0, 0.8]);
        assert_eq!(d.label_names(), &["3".to_string(), "7".to_string()]);
        assert_eq!(d.labels(), &[1, 0]);
        // the encoders reproduce the hand-written bytes
        assert_eq!(encode_idx_images(2, 2, &images[16..]), images);
        assert_eq!(encode_idx_labels(&[7, 3]), labels);
    }

    #[test]
    fn wrong_magic() {
        let (images, _) = fixture();
        let mut labels = images.clone();
        labels.truncate(8);
        match from_idx_bytes(&images, &labels) {
            Err(DatasetError::WrongMagic { expected, found, .. }) => {
                assert_eq!(expected, 0x801);
                assert_eq!(found, 0x803);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_and_mismatched() {
        let (images, labels) = fixture();
        let short = &images[..images.len() - 1];
        assert!(matches!(
            from_idx_bytes(short, &labels),
            Err(DatasetError::Truncated { offset: 16, needed: 8, available: 7, .. })
        ));
        assert!(matches!(
            from_idx_bytes(&images[..6], &labels),
            Err(DatasetError::Truncated { offset: 4, .. })
        ));
        let one_label = encode_idx_labels(&[1]);
        assert!(matches!(
            from_idx_bytes(&images, &one_label),
            Err(DatasetError::CountMismatch { images: 2, labels: 1 })
        ));
        let mut long = labels.clone();
        long.push(0);
        assert!(matches!(from_idx_bytes(&images, &long), Err(DatasetError::TrailingBytes { .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_idx("/nonexistent/images", "/nonexistent/labels").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/images"));
    }
}
