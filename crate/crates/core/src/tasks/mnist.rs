//! MNIST in IDX format, presented one pixel per step.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{BatchInputs, LossKind, TaskBatch, Targets};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Images stored row-major as bytes, with their labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MnistSet {
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

fn read_u32(bytes: &[u8], offset: usize, name: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(name, offset as u64, "file truncated inside header"))
}

fn check_magic(bytes: &[u8], expected: u32, name: &str) -> Result<()> {
    let magic = read_u32(bytes, 0, name)?;
    if magic != expected {
        return Err(Error::format(
            name,
            0,
            format!("bad magic number 0x{magic:08x}, expected 0x{expected:08x}"),
        ));
    }
    Ok(())
}

/// Parses an IDX image file: magic, then big-endian `[N, rows, cols]`,
/// then `N·rows·cols` unsigned bytes.
pub fn parse_idx_images(bytes: &[u8], name: &str) -> Result<(usize, usize, usize, Vec<u8>)> {
    check_magic(bytes, IMAGES_MAGIC, name)?;
    let n = read_u32(bytes, 4, name)? as usize;
    let rows = read_u32(bytes, 8, name)? as usize;
    let cols = read_u32(bytes, 12, name)? as usize;
    let want = n * rows * cols;
    let body = &bytes[16..];
    if body.len() < want {
        return Err(Error::format(
            name,
            bytes.len() as u64,
            format!("truncated: {want} pixel bytes declared, {} present", body.len()),
        ));
    }
    Ok((n, rows, cols, body[..want].to_vec()))
}

/// Parses an IDX label file: magic, big-endian `N`, then `N` bytes.
pub fn parse_idx_labels(bytes: &[u8], name: &str) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC, name)?;
    let n = read_u32(bytes, 4, name)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::format(
            name,
            bytes.len() as u64,
            format!("truncated: {n} labels declared, {} present", body.len()),
        ));
    }
    if let Some(pos) = body[..n].iter().position(|&l| l > 9) {
        return Err(Error::format(name, 8 + pos as u64, format!("label {} outside 0..=9", body[pos])));
    }
    Ok(body[..n].to_vec())
}

pub fn encode_idx_images(images: &[u8], n: usize, rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(images);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<MnistSet> {
    let img = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let lab = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let (n, rows, cols, images) = parse_idx_images(&img, &images_path.display().to_string())?;
    let labels = parse_idx_labels(&lab, &labels_path.display().to_string())?;
    if labels.len() != n {
        return Err(Error::format(
            labels_path.display().to_string(),
            4,
            format!("{} labels for {n} images", labels.len()),
        ));
    }
    Ok(MnistSet {
        images,
        labels,
        rows,
        cols,
    })
}

/// A fixed reordering of pixel positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn random(n: usize, seed: u64) -> Self {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self(p)
    }

    /// Output position `i` takes input pixel `indices()[i]`.
    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

impl MnistSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i * self.pixels()..(i + 1) * self.pixels()]
    }

    /// Image `i` as a `[1, rows·cols]` sequence scaled to `[0, 1]`.
    pub fn sequentialize<S: Scalar>(&self, i: usize) -> Tensor<S> {
        let data = self.image(i).iter().map(|&p| S::from_f64(p as f64 / 255.0)).collect();
        Tensor::from_vec(data, [1, self.pixels()]).expect("pixel count")
    }

    /// Applies one permutation to every image.
    pub fn permute_with(&self, perm: &Permutation) -> Result<MnistSet> {
        let n = self.pixels();
        if perm.0.len() != n {
            return Err(Error::shape(format!("permutation of {} for {n} pixels", perm.0.len())));
        }
        let mut images = Vec::with_capacity(self.images.len());
        for i in 0..self.len() {
            let img = self.image(i);
            images.extend(perm.0.iter().map(|&j| img[j]));
        }
        Ok(MnistSet {
            images,
            labels: self.labels.clone(),
            rows: self.rows,
            cols: self.cols,
        })
    }

    /// Permuted MNIST: one permutation drawn from `perm_seed`.
    pub fn permute(&self, perm_seed: u64) -> MnistSet {
        self.permute_with(&Permutation::random(self.pixels(), perm_seed))
            .expect("permutation sized to the images")
    }

    /// Batch `[b, 1, rows·cols]` for the given images, classified from the
    /// final step.
    pub fn batch<S: Scalar>(&self, idx: &[usize]) -> TaskBatch<S> {
        let n = self.pixels();
        let mut data = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            data.extend(self.image(i).iter().map(|&p| S::from_f64(p as f64 / 255.0)));
        }
        TaskBatch {
            inputs: BatchInputs::Dense(Tensor::from_vec(data, [idx.len(), 1, n]).expect("pixel count")),
            targets: Targets::Labels(idx.iter().map(|&i| self.labels[i] as usize).collect()),
            loss_kind: LossKind::CeLastStep,
            mask: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MnistSet {
        let images: Vec<u8> = (0..3 * 16).map(|v| (v * 5 % 256) as u8).collect();
        MnistSet {
            images,
            labels: vec![1, 7, 3],
            rows: 4,
            cols: 4,
        }
    }

    #[test]
    fn idx_round_trip() {
        let set = tiny();
        let img = encode_idx_images(&set.images, 3, 4, 4);
        assert_eq!(&img[..4], &[0, 0, 8, 3]);
        let lab = encode_idx_labels(&set.labels);
        assert_eq!(&lab[..4], &[0, 0, 8, 1]);
        let (n, r, c, pixels) = parse_idx_images(&img, "img").unwrap();
        assert_eq!((n, r, c), (3, 4, 4));
        assert_eq!(pixels, set.images);
        assert_eq!(parse_idx_labels(&lab, "lab").unwrap(), set.labels);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let set = tiny();
        let mut img = encode_idx_images(&set.images, 3, 4, 4);
        img[3] = 1;
        match parse_idx_images(&img, "img") {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
        let img = encode_idx_images(&set.images[..40], 3, 4, 4);
        match parse_idx_images(&img, "img") {
            Err(Error::Format { offset, message, .. }) => {
                assert_eq!(offset, 56);
                assert!(message.contains("truncated"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_idx_labels(&[0, 0, 8], "lab"), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn identity_permutation_is_sequentialize() {
        let set = tiny();
        let same = set.permute_with(&Permutation::identity(16)).unwrap();
        assert_eq!(same, set);
        let seq: Tensor<f32> = set.sequentialize(1);
        assert_eq!(seq.shape(), &[1, 16]);
        assert_eq!(seq.data()[3], set.image(1)[3] as f32 / 255.0);
    }

    #[test]
    fn permutation_is_a_bijection() {
        let set = tiny();
        let p = set.permute(42);
        assert_ne!(p.images, set.images);
        for i in 0..set.len() {
            let mut a = set.image(i).to_vec();
            let mut b = p.image(i).to_vec();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
        let perm = Permutation::random(16, 42);
        let mut sorted = perm.indices().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());
    }
}
