//! MNIST ingestion: IDX parsing (optionally gzip-compressed), pooling,
//! binarization and seeded subset selection.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{path}: wrong magic 0x{found:08x} at offset 0, expected 0x{expected:08x}")]
    WrongMagic {
        path: String,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated at byte offset {offset}: need {needed} bytes, file has {len}")]
    Truncated {
        path: String,
        offset: usize,
        needed: usize,
        len: usize,
    },

    #[error("count mismatch: {images} images (offset 4 of image file) vs {labels} labels (offset 4 of label file)")]
    CountMismatch { images: usize, labels: usize },

    #[error("{path}: label {label} at byte offset {offset} is not a digit")]
    BadLabel {
        path: String,
        offset: usize,
        label: u8,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Images as loaded: row-major bytes, one `rows * cols` block per image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source_rows: usize,
    pub source_cols: usize,
    pub factor: usize,
    pub threshold: f64,
}

/// Binary images with digit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_pixels: usize,
    /// One `n_pixels` block of 0/1 bytes per image.
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.pixels[i * self.n_pixels..(i + 1) * self.n_pixels]
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.n_pixels);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Self {
            n_pixels: self.n_pixels,
            pixels,
            labels,
            meta: self.meta,
        }
    }

    /// `n` distinct images chosen by a seeded shuffle (all of them if `n`
    /// exceeds the size).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        idx.truncate(n);
        self.select(&idx)
    }

    /// Two disjoint subsets drawn from one pool.
    pub fn split_disjoint<R: Rng + ?Sized>(
        &self,
        n_train: usize,
        n_test: usize,
        rng: &mut R,
    ) -> (Self, Self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        let n_train = n_train.min(idx.len());
        let n_test = n_test.min(idx.len() - n_train);
        let (a, rest) = idx.split_at(n_train);
        let b = &rest[..n_test];
        let mut seen = vec![false; self.len()];
        a.iter().for_each(|&i| seen[i] = true);
        assert!(b.iter().all(|&i| !seen[i]), "train/test subsets overlap");
        (self.select(a), self.select(b))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io = |source| IdxError::Io {
        path: path.display().to_string(),
        source,
    };
    let bytes = fs::read(path).map_err(io)?;
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&bytes[..])
            .read_to_end(&mut out)
            .map_err(io)?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32, IdxError> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => Err(IdxError::Truncated {
            path: path.into(),
            offset,
            needed: offset + 4,
            len: bytes.len(),
        }),
    }
}

fn check_magic(bytes: &[u8], expected: u32, path: &str) -> Result<(), IdxError> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(IdxError::WrongMagic {
            path: path.into(),
            expected,
            found,
        });
    }
    Ok(())
}

fn check_len(
    bytes: &[u8],
    needed: usize,
    header: usize,
    item: usize,
    path: &str,
) -> Result<(), IdxError> {
    if bytes.len() < needed {
        // Offset of the first incomplete item.
        let offset = header + (bytes.len().saturating_sub(header) / item.max(1)) * item;
        return Err(IdxError::Truncated {
            path: path.into(),
            offset,
            needed,
            len: bytes.len(),
        });
    }
    Ok(())
}

/// Parses an IDX3 image file: `(rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8], path: &str) -> Result<(usize, usize, Vec<u8>), IdxError> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let n = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let size = rows * cols;
    check_len(bytes, 16 + n * size, 16, size, path)?;
    Ok((rows, cols, bytes[16..16 + n * size].to_vec()))
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8], path: &str) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let n = be_u32(bytes, 4, path)? as usize;
    check_len(bytes, 8 + n, 8, 1, path)?;
    let labels = bytes[8..8 + n].to_vec();
    if let Some(k) = labels.iter().position(|&l| l > 9) {
        return Err(IdxError::BadLabel {
            path: path.into(),
            offset: 8 + k,
            label: labels[k],
        });
    }
    Ok(labels)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset, IdxError> {
    let ip = images_path.display().to_string();
    let lp = labels_path.display().to_string();
    let (rows, cols, pixels) = parse_idx_images(&read_file(images_path)?, &ip)?;
    let labels = parse_idx_labels(&read_file(labels_path)?, &lp)?;
    let images = pixels.len() / (rows * cols).max(1);
    if images != labels.len() {
        return Err(IdxError::CountMismatch {
            images,
            labels: labels.len(),
        });
    }
    Ok(RawDataset {
        rows,
        cols,
        pixels,
        labels,
    })
}

/// Path of `name` in `dir`, preferring the uncompressed file.
pub fn find_idx(dir: &Path, name: &str) -> PathBuf {
    let plain = dir.join(name);
    if plain.exists() {
        return plain;
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.exists() {
        gz
    } else {
        plain
    }
}

/// Loads the official training and test files from `dir`.
pub fn load_mnist(dir: &Path) -> Result<(RawDataset, RawDataset), IdxError> {
    let train = load_idx(&find_idx(dir, TRAIN_IMAGES), &find_idx(dir, TRAIN_LABELS))?;
    let test = load_idx(&find_idx(dir, TEST_IMAGES), &find_idx(dir, TEST_LABELS))?;
    Ok((train, test))
}

/// `factor x factor` mean pooling followed by `mean / 255 >= threshold`.
pub fn downsample_binarize(
    raw: &RawDataset,
    factor: usize,
    threshold: f64,
) -> crate::Result<Dataset> {
    if factor == 0 || !raw.rows.is_multiple_of(factor) || !raw.cols.is_multiple_of(factor) {
        return Err(crate::Error::InvalidParameter(format!(
            "downsample factor {factor} does not divide {}x{}",
            raw.rows, raw.cols
        )));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(crate::Error::InvalidParameter(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let (orows, ocols) = (raw.rows / factor, raw.cols / factor);
    let n_pixels = orows * ocols;
    let area = (factor * factor) as f64;
    let mut pixels = Vec::with_capacity(raw.len() * n_pixels);
    for k in 0..raw.len() {
        let img = raw.image(k);
        for r in 0..orows {
            for c in 0..ocols {
                let mut sum = 0u32;
                for dr in 0..factor {
                    let row = (r * factor + dr) * raw.cols + c * factor;
                    sum += img[row..row + factor]
                        .iter()
                        .map(|&p| p as u32)
                        .sum::<u32>();
                }
                pixels.push(u8::from(sum as f64 / area / 255.0 >= threshold));
            }
        }
    }
    Ok(Dataset {
        n_pixels,
        pixels,
        labels: raw.labels.clone(),
        meta: DatasetMeta {
            source_rows: raw.rows,
            source_cols: raw.cols,
            factor,
            threshold,
        },
    })
}
