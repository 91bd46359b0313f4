//! Image ingestion: IDX (MNIST) and CIFAR-100 binaries to unit vectors.
//!
//! Images are zero-padded symmetrically to the next power-of-two square
//! (28×28 becomes 32×32 with a 2-pixel border), flattened row-major and
//! normalized. Gzipped inputs are detected by their magic bytes; parse-error
//! offsets then refer to the decompressed stream.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{haar_isometry, norm};
use crate::rng::rng_from_seed;

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const CIFAR_RECORD: usize = 3074;
const CIFAR_SIDE: usize = 32;
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Clone, Debug, PartialEq)]
pub struct ImageDataset {
    name: String,
    vectors: Vec<Vec<f64>>,
    source_dims: (usize, usize),
}

impl ImageDataset {
    /// Checks that all vectors share a power-of-two length and unit norm.
    pub fn new(name: impl Into<String>, vectors: Vec<Vec<f64>>, source_dims: (usize, usize)) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("dataset name {name:?} must be one nonempty word")));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        if vectors.is_empty() || !dim.is_power_of_two() {
            return Err(Error::invalid("dataset needs vectors of a common power-of-two length"));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            let n = norm(v);
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("vector {i} has norm {n}")));
            }
        }
        Ok(ImageDataset {
            name,
            vectors,
            source_dims,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<Vec<f64>> {
        self.vectors
    }

    /// Vector length `N`.
    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `(height, width)` of the images before padding.
    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }
}

/// Which images a loader keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    First,
    /// `limit` distinct images chosen uniformly, kept in file order.
    Random { seed: u64 },
}

impl Selection {
    fn indices(&self, available: usize, limit: usize) -> Result<Vec<usize>> {
        if limit == 0 || limit > available {
            return Err(Error::invalid(format!(
                "limit {limit} must be in 1..={available} (images in file)"
            )));
        }
        Ok(match self {
            Selection::First => (0..limit).collect(),
            Selection::Random { seed } => {
                let mut picked = index::sample(&mut rng_from_seed(*seed), available, limit).into_vec();
                picked.sort_unstable();
                picked
            }
        })
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    maybe_gunzip(raw)
}

fn maybe_gunzip(raw: Vec<u8>) -> Result<Vec<u8>> {
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::parse(0, format!("corrupt gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Embeds an `h × w` image centred in the smallest power-of-two square and
/// flattens it row-major. Returns the padded side length too.
pub fn pad_to_power_of_two(pixels: &[f64], h: usize, w: usize) -> (Vec<f64>, usize) {
    assert_eq!(pixels.len(), h * w);
    let side = h.max(w).next_power_of_two();
    let (top, left) = ((side - h) / 2, (side - w) / 2);
    let mut out = vec![0.0; side * side];
    for r in 0..h {
        let dst = (top + r) * side + left;
        out[dst..dst + w].copy_from_slice(&pixels[r * w..(r + 1) * w]);
    }
    (out, side)
}

fn normalized(mut v: Vec<f64>, index: usize, offset: u64) -> Result<Vec<f64>> {
    let n = norm(&v);
    if n == 0.0 {
        return Err(Error::parse(offset, format!("image {index} is all zero and cannot be normalized")));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

pub fn load_mnist(path: impl AsRef<Path>, limit: usize) -> Result<ImageDataset> {
    load_mnist_with(path, limit, Selection::First)
}

pub fn load_mnist_with(path: impl AsRef<Path>, limit: usize, selection: Selection) -> Result<ImageDataset> {
    parse_idx_images(&read_maybe_gz(path.as_ref())?, limit, selection)
}

/// Parses an IDX3 unsigned-byte image file (optionally gzipped).
pub fn parse_idx_images(bytes: &[u8], limit: usize, selection: Selection) -> Result<ImageDataset> {
    let owned;
    let bytes = if bytes.starts_with(&[0x1f, 0x8b]) {
        owned = maybe_gunzip(bytes.to_vec())?;
        &owned[..]
    } else {
        bytes
    };
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| Error::parse(bytes.len() as u64, "truncated IDX header"))
    };
    let magic = word(0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::parse(0, format!("bad IDX magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}")));
    }
    let count = word(4)? as usize;
    let (h, w) = (word(8)? as usize, word(12)? as usize);
    if h == 0 || w == 0 {
        return Err(Error::parse(8, format!("image dimensions {h}×{w} are empty")));
    }
    let size = h * w;
    let needed = 16 + count * size;
    if bytes.len() < needed {
        return Err(Error::parse(
            bytes.len() as u64,
            format!("truncated IDX payload: header promises {count} images of {h}×{w} ({needed} bytes)"),
        ));
    }
    let vectors = selection
        .indices(count, limit)?
        .into_iter()
        .map(|i| {
            let start = 16 + i * size;
            let pixels: Vec<f64> = bytes[start..start + size].iter().map(|&b| b as f64 / 255.0).collect();
            normalized(pad_to_power_of_two(&pixels, h, w).0, i, start as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    ImageDataset::new("mnist", vectors, (h, w))
}

pub fn load_cifar100(path: impl AsRef<Path>, limit: usize) -> Result<ImageDataset> {
    load_cifar100_with(path, limit, Selection::First)
}

pub fn load_cifar100_with(path: impl AsRef<Path>, limit: usize, selection: Selection) -> Result<ImageDataset> {
    parse_cifar100(&read_maybe_gz(path.as_ref())?, limit, selection)
}

/// Parses CIFAR-100 binary records (coarse label, fine label, 32×32 R, G, B
/// planes) to luminance vectors of length 1024.
pub fn parse_cifar100(bytes: &[u8], limit: usize, selection: Selection) -> Result<ImageDataset> {
    if bytes.is_empty() {
        return Err(Error::parse(0, "empty CIFAR-100 file"));
    }
    let whole = bytes.len() / CIFAR_RECORD * CIFAR_RECORD;
    if whole != bytes.len() {
        return Err(Error::parse(
            whole as u64,
            format!(
                "truncated CIFAR-100 record: {} trailing bytes, records are {CIFAR_RECORD} bytes",
                bytes.len() - whole
            ),
        ));
    }
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    let vectors = selection
        .indices(bytes.len() / CIFAR_RECORD, limit)?
        .into_iter()
        .map(|i| {
            let start = i * CIFAR_RECORD;
            let px = &bytes[start + 2..start + CIFAR_RECORD];
            let gray: Vec<f64> = (0..plane)
                .map(|p| (0..3).map(|c| LUMA[c] * px[c * plane + p] as f64 / 255.0).sum())
                .collect();
            normalized(gray, i, start as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    ImageDataset::new("cifar100", vectors, (CIFAR_SIDE, CIFAR_SIDE))
}

/// `count` unit vectors with Gaussian coefficients on a random
/// `rank`-dimensional subspace of `R^N`.
pub fn synthesize_dataset(dim: usize, count: usize, rank: usize, seed: u64) -> Result<ImageDataset> {
    if !dim.is_power_of_two() {
        return Err(Error::invalid(format!("N = {dim} is not a power of two")));
    }
    if rank == 0 || rank > count.min(dim) {
        return Err(Error::invalid(format!(
            "rank {rank} must be in 1..={}",
            count.min(dim)
        )));
    }
    let mut rng = rng_from_seed(seed);
    let basis = haar_isometry(dim, rank, false, &mut rng);
    let mut vectors = Vec::with_capacity(count);
    while vectors.len() < count {
        let w: Vec<f64> = (0..rank).map(|_| rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..dim)
            .map(|i| basis.row(i).iter().zip(&w).map(|(b, c)| b.re * c).sum())
            .collect();
        let n = norm(&v);
        if n > 1e-12 {
            vectors.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let side = (dim as f64).sqrt() as usize;
    let dims = if side * side == dim { (side, side) } else { (dim, 1) };
    ImageDataset::new(format!("synthetic-r{rank}"), vectors, dims)
}

/// Portable dump: a text line `name N count`, then the vectors as
/// little-endian `f64`.
pub fn write_intermediate<W: Write>(ds: &ImageDataset, mut out: W) -> Result<()> {
    writeln!(out, "{} {} {}", ds.name, ds.dim(), ds.len())?;
    let mut buf = Vec::with_capacity(ds.dim() * ds.len() * 8);
    for x in ds.vectors.iter().flatten() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_intermediate<R: Read>(mut input: R) -> Result<ImageDataset> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(0, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::parse(0, "header is not UTF-8"))?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 3 {
        return Err(Error::parse(0, "header must be `name N count`"));
    }
    let num = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::parse(0, format!("bad number {s:?}"))) };
    let (dim, count) = (num(f[1])?, num(f[2])?);
    let body = &bytes[nl + 1..];
    let want = dim
        .checked_mul(count)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::parse(0, "payload size overflows"))?;
    if body.len() != want {
        return Err(Error::parse(
            (nl + 1 + body.len().min(want)) as u64,
            format!("expected {want} payload bytes, found {}", body.len()),
        ));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let vectors = values.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
    let side = (dim as f64).sqrt() as usize;
    let dims = if side * side == dim { (side, side) } else { (dim, 1) };
    ImageDataset::new(f[0], vectors, dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{svd, RealMatrix};

    fn idx(images: &[Vec<u8>], h: u32, w: u32) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        b.extend_from_slice(&(images.len() as u32).to_be_bytes());
        b.extend_from_slice(&h.to_be_bytes());
        b.extend_from_slice(&w.to_be_bytes());
        for im in images {
            b.extend_from_slice(im);
        }
        b
    }

    #[test]
    fn constant_image_pads_to_equal_entries() {
        let bytes = idx(&[vec![200; 784]], 28, 28);
        let ds = parse_idx_images(&bytes, 1, Selection::First).unwrap();
        let v = &ds.vectors()[0];
        assert_eq!(v.len(), 1024);
        assert_eq!(ds.source_dims(), (28, 28));
        let hot: Vec<f64> = v.iter().copied().filter(|&x| x != 0.0).collect();
        assert_eq!(hot.len(), 784);
        assert!(hot.iter().all(|&x| (x - 1.0 / 28.0).abs() < 1e-15));
        // Two-pixel border.
        assert_eq!(v[2 * 32 + 1], 0.0);
        assert!(v[2 * 32 + 2] > 0.0);
        assert!(v[29 * 32 + 29] > 0.0);
        assert_eq!(v[30 * 32 + 29], 0.0);
    }

    #[test]
    fn zero_image_rejected() {
        let bytes = idx(&[vec![1; 784], vec![0; 784]], 28, 28);
        match parse_idx_images(&bytes, 2, Selection::First) {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 16 + 784);
                assert!(message.contains("all zero"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_idx_images(&bytes, 1, Selection::First).is_ok());
    }

    #[test]
    fn idx_corruption() {
        let mut bytes = idx(&[vec![1; 4]], 2, 2);
        assert!(parse_idx_images(&bytes, 1, Selection::First).is_ok());
        bytes.pop();
        assert!(matches!(parse_idx_images(&bytes, 1, Selection::First), Err(Error::Parse { offset: 19, .. })));
        let mut bad = idx(&[vec![1; 4]], 2, 2);
        bad[3] = 0x01;
        assert!(matches!(parse_idx_images(&bad, 1, Selection::First), Err(Error::Parse { offset: 0, .. })));
        assert!(parse_idx_images(&bad[..6], 1, Selection::First).is_err());
        assert!(parse_idx_images(&idx(&[vec![1; 4]], 2, 2), 2, Selection::First).is_err());
    }

    #[test]
    fn gzip_is_transparent() {
        let raw = idx(&[vec![3; 4], vec![9; 4]], 2, 2);
        let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
        gz.write_all(&raw).unwrap();
        let gz = gz.finish().unwrap();
        assert_eq!(
            parse_idx_images(&gz, 2, Selection::First).unwrap(),
            parse_idx_images(&raw, 2, Selection::First).unwrap()
        );
    }

    #[test]
    fn random_selection_is_seeded_and_ordered() {
        let images: Vec<Vec<u8>> = (1..=10u8).map(|i| vec![i, 0, 0, 0]).collect();
        let bytes = idx(&images, 2, 2);
        let a = parse_idx_images(&bytes, 4, Selection::Random { seed: 7 }).unwrap();
        let b = parse_idx_images(&bytes, 4, Selection::Random { seed: 7 }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
    }

    fn cifar_record(r: u8, g: u8, b: u8) -> Vec<u8> {
        let mut rec = vec![3, 17];
        for v in [r, g, b] {
            rec.extend(std::iter::repeat_n(v, 1024));
        }
        rec
    }

    #[test]
    fn cifar_luminance() {
        let mut bytes = cifar_record(255, 0, 0);
        bytes.extend(cifar_record(10, 20, 30));
        let ds = parse_cifar100(&bytes, 2, Selection::First).unwrap();
        assert_eq!(ds.dim(), 1024);
        // Pure red is 0.299 everywhere before normalization: constant after it.
        assert!(ds.vectors()[0].iter().all(|&x| (x - 1.0 / 32.0).abs() < 1e-15));
        for v in ds.vectors() {
            assert!((norm(v) - 1.0).abs() < 1e-9);
        }
        bytes.truncate(CIFAR_RECORD + 5);
        assert!(matches!(
            parse_cifar100(&bytes, 1, Selection::First),
            Err(Error::Parse { offset: 3074, .. })
        ));
        assert!(parse_cifar100(&cifar_record(0, 0, 0), 1, Selection::First).is_err());
    }

    #[test]
    fn synthetic_rank() {
        let one = synthesize_dataset(16, 5, 1, 3).unwrap();
        let v0 = &one.vectors()[0];
        for v in one.vectors() {
            let c: f64 = v.iter().zip(v0).map(|(a, b)| a * b).sum();
            assert!((c.abs() - 1.0).abs() < 1e-12);
        }
        let ds = synthesize_dataset(64, 30, 7, 4).unwrap();
        let s = svd(&RealMatrix::from_rows(ds.vectors()).unwrap()).unwrap();
        assert_eq!(s.singular_values.iter().filter(|&&x| x > 1e-10).count(), 7);
        assert!(synthesize_dataset(64, 5, 6, 0).is_err());
        assert!(synthesize_dataset(48, 5, 2, 0).is_err());
    }

    #[test]
    fn intermediate_round_trip() {
        let ds = synthesize_dataset(16, 3, 2, 1).unwrap();
        let mut buf = Vec::new();
        write_intermediate(&ds, &mut buf).unwrap();
        assert!(buf.starts_with(b"synthetic-r2 16 3\n"));
        let back = read_intermediate(&buf[..]).unwrap();
        assert_eq!(back.vectors(), ds.vectors());
        assert!(read_intermediate(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn padding_non_square() {
        let (v, side) = pad_to_power_of_two(&[1.0, 2.0, 3.0], 1, 3);
        assert_eq!(side, 4);
        assert_eq!(&v[4..8], &[1.0, 2.0, 3.0, 0.0]);
    }
}
