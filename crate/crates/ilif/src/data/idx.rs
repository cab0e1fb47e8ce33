//! Loader for the standard IDX binary image/label format: big-endian magic,
//! big-endian u32 dimensions, then raw unsigned bytes.

use byteorder::{BigEndian, ReadBytesExt};
use std::io::Cursor;
use std::path::Path;
use thiserror::Error;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad magic 0x{found:08x} at byte 0 (expected 0x{expected:08x})")]
    BadMagic { found: u32, expected: u32 },
    #[error("file truncated at byte offset {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("image file has {images} items but label file has {labels}")]
    CountMismatch { images: usize, labels: usize },
}

/// Images with pixels scaled to [0, 1].
#[derive(Clone, Debug)]
pub struct IdxImages {
    pub images: Vec<Vec<f64>>,
    pub rows: usize,
    pub cols: usize,
}

fn read_u32(cur: &mut Cursor<&[u8]>, total: usize) -> Result<u32, IdxError> {
    let offset = cur.position() as usize;
    cur.read_u32::<BigEndian>().map_err(|_| IdxError::Truncated {
        offset,
        needed: 4 - (total - offset).min(4),
    })
}

/// Load an IDX image file (`magic 0x00000803`), scaling pixels to [0, 1].
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages, IdxError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IdxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_idx_images(&bytes)
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    let mut cur = Cursor::new(bytes);
    let magic = read_u32(&mut cur, bytes.len())?;
    if magic != IMAGE_MAGIC {
        return Err(IdxError::BadMagic {
            found: magic,
            expected: IMAGE_MAGIC,
        });
    }
    let count = read_u32(&mut cur, bytes.len())? as usize;
    let rows = read_u32(&mut cur, bytes.len())? as usize;
    let cols = read_u32(&mut cur, bytes.len())? as usize;
    let offset = cur.position() as usize;
    let needed = count * rows * cols;
    let available = bytes.len() - offset;
    if available < needed {
        return Err(IdxError::Truncated {
            offset: bytes.len(),
            needed: needed - available,
        });
    }
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let start = offset + i * rows * cols;
        images.push(
            bytes[start..start + rows * cols]
                .iter()
                .map(|b| *b as f64 / 255.0)
                .collect(),
        );
    }
    Ok(IdxImages { images, rows, cols })
}

/// Load an IDX label file (`magic 0x00000801`).
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>, IdxError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IdxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_idx_labels(&bytes)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>, IdxError> {
    let mut cur = Cursor::new(bytes);
    let magic = read_u32(&mut cur, bytes.len())?;
    if magic != LABEL_MAGIC {
        return Err(IdxError::BadMagic {
            found: magic,
            expected: LABEL_MAGIC,
        });
    }
    let count = read_u32(&mut cur, bytes.len())? as usize;
    let offset = cur.position() as usize;
    let available = bytes.len() - offset;
    if available < count {
        return Err(IdxError::Truncated {
            offset: bytes.len(),
            needed: count - available,
        });
    }
    Ok(bytes[offset..offset + count].iter().map(|b| *b as usize).collect())
}

/// Load a matching image/label pair, validating the item counts agree.
pub fn load_idx_pair(
    image_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
) -> Result<(IdxImages, Vec<usize>), IdxError> {
    let images = load_idx_images(image_path)?;
    let labels = load_idx_labels(label_path)?;
    if images.images.len() != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.images.len(),
            labels: labels.len(),
        });
    }
    Ok((images, labels))
}

/// Serialize images back to IDX bytes (used by fixtures and the examples).
pub fn write_idx_images(images: &[Vec<u8>], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for image in images {
        assert_eq!(image.len(), rows * cols);
        out.extend_from_slice(image);
    }
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_small_fixture() {
        // Four 2x2 images with increasing pixel values.
        let images: Vec<Vec<u8>> = (0..4u8)
            .map(|i| vec![i * 4, i * 4 + 1, i * 4 + 2, i * 4 + 3])
            .collect();
        let bytes = write_idx_images(&images, 2, 2);
        let parsed = parse_idx_images(&bytes).unwrap();
        assert_eq!(parsed.images.len(), 4);
        assert_eq!(parsed.rows, 2);
        assert_eq!(parsed.cols, 2);
        assert_eq!(parsed.images[1][0], 4.0 / 255.0);
        assert_eq!(parsed.images[3][3], 15.0 / 255.0);
    }

    #[test]
    fn truncated_file_names_offset() {
        let images: Vec<Vec<u8>> = vec![vec![0, 1, 2, 3]];
        let mut bytes = write_idx_images(&images, 2, 2);
        bytes.truncate(bytes.len() - 2);
        match parse_idx_images(&bytes).unwrap_err() {
            IdxError::Truncated { offset, needed } => {
                assert_eq!(offset, bytes.len());
                assert_eq!(needed, 2);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = write_idx_labels(&[1, 2, 3]);
        // Present a label file as images.
        match parse_idx_images(&bytes).unwrap_err() {
            IdxError::BadMagic { found, expected } => {
                assert_eq!(found, 0x0000_0801);
                assert_eq!(expected, 0x0000_0803);
            }
            other => panic!("expected bad magic, got {other:?}"),
        }
        bytes[3] = 0xff;
        assert!(parse_idx_labels(&bytes).is_err());
    }

    #[test]
    fn pair_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("images.idx");
        let lbl_path = dir.path().join("labels.idx");
        std::fs::write(&img_path, write_idx_images(&[vec![0, 0, 0, 0]], 2, 2)).unwrap();
        std::fs::write(&lbl_path, write_idx_labels(&[0, 1])).unwrap();
        assert!(matches!(
            load_idx_pair(&img_path, &lbl_path).unwrap_err(),
            IdxError::CountMismatch { images: 1, labels: 2 }
        ));
    }
}
