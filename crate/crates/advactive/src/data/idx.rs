//! IDX binary format (big-endian) reader/writer for MNIST-style files.
//!
//! Image files: magic `0x00000803`, then three big-endian u32 dimensions
//! (count, rows, cols), then `count*rows*cols` raw unsigned bytes.
//! Label files: magic `0x00000801`, one u32 count, then `count` bytes.

use std::io::Cursor;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

use super::FeatureVector;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw pixel block from an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, row-major per image.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    /// Pixels of image `i` scaled to `[0,1]` (divided by 255).
    pub fn feature_vector(&self, i: usize) -> FeatureVector {
        let size = self.rows * self.cols;
        let start = i * size;
        FeatureVector(
            self.pixels[start..start + size]
                .iter()
                .map(|&p| f64::from(p) / 255.0)
                .collect(),
        )
    }

    /// Serializes back to IDX bytes; inverse of [`parse_idx_images`].
    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        out.write_u32::<BigEndian>(IMAGE_MAGIC).expect("vec write");
        out.write_u32::<BigEndian>(self.count as u32)
            .expect("vec write");
        out.write_u32::<BigEndian>(self.rows as u32)
            .expect("vec write");
        out.write_u32::<BigEndian>(self.cols as u32)
            .expect("vec write");
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Serializes labels to IDX bytes; inverse of [`parse_idx_labels`].
pub fn labels_to_idx_bytes(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.write_u32::<BigEndian>(LABEL_MAGIC).expect("vec write");
    out.write_u32::<BigEndian>(labels.len() as u32)
        .expect("vec write");
    out.extend_from_slice(labels);
    out
}

/// Either payload kind of an IDX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxFile {
    Images(IdxImages),
    Labels(Vec<u8>),
}

fn read_u32(cursor: &mut Cursor<&[u8]>, what: &str) -> Result<u32> {
    let offset = cursor.position() as usize;
    cursor.read_u32::<BigEndian>().map_err(|_| Error::Parse {
        offset,
        message: format!("file ends inside {what} (need 4 bytes)"),
    })
}

/// Parses an IDX byte stream, dispatching on the magic number.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxFile> {
    let mut cursor = Cursor::new(bytes);
    let magic = read_u32(&mut cursor, "magic number")?;
    match magic {
        IMAGE_MAGIC => {
            let count = read_u32(&mut cursor, "image count")? as usize;
            let rows = read_u32(&mut cursor, "row count")? as usize;
            let cols = read_u32(&mut cursor, "column count")? as usize;
            let expected = 16 + count * rows * cols;
            if bytes.len() < expected {
                return Err(Error::Parse {
                    offset: bytes.len(),
                    message: format!(
                        "image payload truncated: expected {expected} bytes total, got {}",
                        bytes.len()
                    ),
                });
            }
            if bytes.len() > expected {
                return Err(Error::Parse {
                    offset: expected,
                    message: format!(
                        "trailing bytes after image payload: expected {expected} bytes total, got {}",
                        bytes.len()
                    ),
                });
            }
            Ok(IdxFile::Images(IdxImages {
                count,
                rows,
                cols,
                pixels: bytes[16..].to_vec(),
            }))
        }
        LABEL_MAGIC => {
            let count = read_u32(&mut cursor, "label count")? as usize;
            let expected = 8 + count;
            if bytes.len() < expected {
                return Err(Error::Parse {
                    offset: bytes.len(),
                    message: format!(
                        "label payload truncated: expected {expected} bytes total, got {}",
                        bytes.len()
                    ),
                });
            }
            if bytes.len() > expected {
                return Err(Error::Parse {
                    offset: expected,
                    message: format!(
                        "trailing bytes after label payload: expected {expected} bytes total, got {}",
                        bytes.len()
                    ),
                });
            }
            Ok(IdxFile::Labels(bytes[8..].to_vec()))
        }
        other => Err(Error::Parse {
            offset: 0,
            message: format!("unrecognized magic number {other:#010x} (expected {IMAGE_MAGIC:#010x} for images or {LABEL_MAGIC:#010x} for labels)"),
        }),
    }
}

/// Parses bytes that must be an IDX image file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    match parse_idx(bytes)? {
        IdxFile::Images(images) => Ok(images),
        IdxFile::Labels(_) => Err(Error::Parse {
            offset: 0,
            message: "expected an image file, found a label file".into(),
        }),
    }
}

/// Parses bytes that must be an IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    match parse_idx(bytes)? {
        IdxFile::Labels(labels) => Ok(labels),
        IdxFile::Images(_) => Err(Error::Parse {
            offset: 0,
            message: "expected a label file, found an image file".into(),
        }),
    }
}
