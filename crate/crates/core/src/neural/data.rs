//! MNIST IDX ingestion and the in-memory labeled image set.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use super::NeuralError;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Images as an `N × 784` matrix of reals in `[0, 1]` plus their digit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    images: Array2<f64>,
    labels: Vec<u8>,
}

impl LabeledImageSet {
    pub fn new(images: Array2<f64>, labels: Vec<u8>) -> Result<Self, NeuralError> {
        if images.nrows() == 0 {
            return Err(NeuralError::EmptyDataset);
        }
        if images.nrows() != labels.len() {
            return Err(NeuralError::CountMismatch { images: images.nrows(), labels: labels.len() });
        }
        if images.ncols() != IMAGE_PIXELS {
            return Err(NeuralError::DimMismatch { expected: IMAGE_PIXELS, got: images.ncols() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
            return Err(NeuralError::BadLabel(bad));
        }
        if images.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(NeuralError::PixelOutOfRange);
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Array2<f64> {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> ArrayView1<'_, f64> {
        self.images.row(i)
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    /// Rows `indices` stacked into a batch matrix.
    pub fn batch(&self, indices: &[usize]) -> Array2<f64> {
        self.images.select(Axis(0), indices)
    }

    /// The first `n` samples (or all, if fewer).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len()).max(1);
        let idx: Vec<usize> = (0..n).collect();
        Self { images: self.batch(&idx), labels: self.labels[..n].to_vec() }
    }
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32, NeuralError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(NeuralError::TruncatedFile)
}

/// Parse an IDX3 image file body. Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8]), NeuralError> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(NeuralError::BadMagic { expected: IMAGE_MAGIC, got: magic });
    }
    let n = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let len = n.checked_mul(rows * cols).ok_or(NeuralError::TruncatedFile)?;
    let data = bytes.get(16..16 + len).ok_or(NeuralError::TruncatedFile)?;
    Ok((n, rows, cols, data))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8], NeuralError> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(NeuralError::BadMagic { expected: LABEL_MAGIC, got: magic });
    }
    let n = read_be_u32(bytes, 4)? as usize;
    bytes.get(8..8 + n).ok_or(NeuralError::TruncatedFile)
}

/// Load an IDX image/label file pair, scaling pixels by `1/255`.
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<LabeledImageSet, NeuralError> {
    let image_bytes = fs::read(image_path)?;
    let label_bytes = fs::read(label_path)?;
    from_idx_bytes(&image_bytes, &label_bytes)
}

pub fn from_idx_bytes(image_bytes: &[u8], label_bytes: &[u8]) -> Result<LabeledImageSet, NeuralError> {
    let (n, rows, cols, pixels) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if labels.len() != n {
        return Err(NeuralError::CountMismatch { images: n, labels: labels.len() });
    }
    if rows * cols != IMAGE_PIXELS {
        return Err(NeuralError::DimMismatch { expected: IMAGE_PIXELS, got: rows * cols });
    }
    let images = Array2::from_shape_vec((n, IMAGE_PIXELS), pixels.iter().map(|&p| p as f64 / 255.0).collect())
        .expect("shape checked above");
    LabeledImageSet::new(images, labels.to_vec())
}

/// Serialize images and labels back into IDX byte buffers (pixels rounded to octets).
pub fn to_idx_bytes(set: &LabeledImageSet) -> (Vec<u8>, Vec<u8>) {
    let n = set.len() as u32;
    let mut images = Vec::with_capacity(16 + set.len() * IMAGE_PIXELS);
    images.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    images.extend_from_slice(&n.to_be_bytes());
    images.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    images.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    images.extend(set.images.iter().map(|&p| (p * 255.0).round() as u8));
    let mut labels = Vec::with_capacity(8 + set.len());
    labels.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend_from_slice(&set.labels);
    (images, labels)
}

/// Standard MNIST file names inside a data directory.
#[derive(Debug, Clone)]
pub struct MnistPaths {
    pub train_images: std::path::PathBuf,
    pub train_labels: std::path::PathBuf,
    pub test_images: std::path::PathBuf,
    pub test_labels: std::path::PathBuf,
}

impl MnistPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }

    pub fn load_train(&self) -> Result<LabeledImageSet, NeuralError> {
        load_idx(&self.train_images, &self.train_labels)
    }

    pub fn load_test(&self) -> Result<LabeledImageSet, NeuralError> {
        load_idx(&self.test_images, &self.test_labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_idx(n: u32, label_n: u32) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        img.extend_from_slice(&n.to_be_bytes());
        img.extend_from_slice(&28u32.to_be_bytes());
        img.extend_from_slice(&28u32.to_be_bytes());
        for i in 0..n as usize {
            img.extend((0..IMAGE_PIXELS).map(|p| if i == 0 { 0 } else { (p % 256) as u8 }));
        }
        let mut lab = Vec::new();
        lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        lab.extend_from_slice(&label_n.to_be_bytes());
        lab.extend((0..label_n).map(|i| (i % 10) as u8));
        (img, lab)
    }

    #[test]
    fn parses_and_scales() {
        let (img, lab) = tiny_idx(3, 3);
        let set = from_idx_bytes(&img, &lab).unwrap();
        assert_eq!(set.len(), 3);
        assert!(set.image(0).iter().all(|&p| p == 0.0));
        assert_eq!(set.image(1)[255], 1.0);
        assert_eq!(set.labels(), &[0, 1, 2]);
    }

    #[test]
    fn count_mismatch() {
        let (img, lab) = tiny_idx(3, 2);
        assert_eq!(from_idx_bytes(&img, &lab), Err(NeuralError::CountMismatch { images: 3, labels: 2 }));
    }

    #[test]
    fn bad_magic_and_truncation() {
        let (img, lab) = tiny_idx(2, 2);
        assert!(matches!(from_idx_bytes(&lab, &lab), Err(NeuralError::BadMagic { .. })));
        assert_eq!(from_idx_bytes(&img[..img.len() - 1], &lab), Err(NeuralError::TruncatedFile));
        assert_eq!(from_idx_bytes(&img[..10], &lab), Err(NeuralError::TruncatedFile));
    }

    #[test]
    fn idx_bytes_round_trip() {
        let (img, lab) = tiny_idx(4, 4);
        let set = from_idx_bytes(&img, &lab).unwrap();
        let (img2, lab2) = to_idx_bytes(&set);
        assert_eq!((img2, lab2), (img, lab));
    }
}
