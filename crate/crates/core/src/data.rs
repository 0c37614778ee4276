//! MNIST ingestion: IDX container parsing (plain or gzipped), pixel
//! normalization to `[0, 1]`, one-hot labels, and seeded shuffling into
//! minibatches.
//!
//! The library never downloads anything. Callers point it at the four
//! standard files (`train-images-idx3-ubyte`, `train-labels-idx1-ubyte`,
//! `t10k-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`, optionally with a
//! `.gz` suffix) and may verify their SHA-256 digests against a manifest of
//! `<hex>  <filename>` lines computed over the decompressed bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const IMAGE_SIDE: usize = 28;
const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
const CLASSES: usize = 10;
const TRAIN_COUNT: usize = 60_000;
const TEST_COUNT: usize = 10_000;

pub const CANONICAL_FILES: [(&str, &str); 2] = [
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// One MNIST split: rows are samples, pixels normalized to `[0, 1]`,
/// labels one-hot over the ten digit classes.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: Array2<f64>,
    pub labels: Array2<f64>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.images.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.labels.ncols()
    }

    /// Index of the labeled class for sample `i`.
    pub fn label_index(&self, i: usize) -> usize {
        let row = self.labels.row(i);
        row.iter()
            .enumerate()
            .find(|(_, &v)| v == 1.0)
            .map(|(j, _)| j)
            .expect("one-hot label")
    }

    /// Shuffle the sample order with the provided stream and cut it into
    /// batches of `batch_size` (final short batch kept). Every sample
    /// appears exactly once per pass. Batches come out in network layout:
    /// images `(input_dim, B)`, labels `(classes, B)`.
    pub fn batches<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batches<'_>> {
        if self.is_empty() {
            return Err(Error::Domain("cannot batch an empty dataset".into()));
        }
        if batch_size == 0 {
            return Err(Error::Domain("batch size must be at least 1".into()));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        Ok(Batches { data: self, order, batch_size, next: 0 })
    }

    /// Gather the listed samples into `(input_dim, B)` / `(classes, B)`
    /// column matrices.
    pub fn gather(&self, indices: &[usize]) -> (Array2<f64>, Array2<f64>) {
        let b = indices.len();
        let mut images = Array2::zeros((self.input_dim(), b));
        let mut labels = Array2::zeros((self.class_count(), b));
        for (col, &i) in indices.iter().enumerate() {
            images.column_mut(col).assign(&self.images.row(i));
            labels.column_mut(col).assign(&self.labels.row(i));
        }
        (images, labels)
    }
}

/// Iterator over one shuffled pass of a dataset.
pub struct Batches<'a> {
    data: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    next: usize,
}

impl Batches<'_> {
    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

impl Iterator for Batches<'_> {
    type Item = (Array2<f64>, Array2<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.order.len() {
            return None;
        }
        let end = (self.next + self.batch_size).min(self.order.len());
        let idx = &self.order[self.next..end];
        self.next = end;
        Some(self.data.gather(idx))
    }
}

fn read_u32_be<R: Read>(r: &mut R, path: &Path, offset: usize) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| truncated(path, offset))?;
    Ok(u32::from_be_bytes(buf))
}

fn truncated(path: &Path, offset: usize) -> Error {
    Error::Data(format!("{}: truncated at offset {offset}", path.display()))
}

/// Open a file, transparently decompressing if it starts with the gzip
/// magic bytes.
fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let mut reader = BufReader::new(File::open(path).map_err(|e| {
        Error::Data(format!("{}: {e}", path.display()))
    })?);
    let head = reader.fill_buf()?;
    if head.starts_with(&[0x1f, 0x8b]) {
        Ok(Box::new(GzDecoder::new(reader)))
    } else {
        Ok(Box::new(reader))
    }
}

fn parse_images<R: Read>(r: &mut R, path: &Path) -> Result<(usize, Vec<u8>)> {
    let magic = read_u32_be(r, path, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad magic {magic:#010x} at offset 0, expected {IMAGES_MAGIC:#010x}",
            path.display()
        )));
    }
    let count = read_u32_be(r, path, 4)? as usize;
    let rows = read_u32_be(r, path, 8)? as usize;
    let cols = read_u32_be(r, path, 12)? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(Error::Data(format!(
            "{}: image size {rows}x{cols} at offset 8, expected {IMAGE_SIDE}x{IMAGE_SIDE}",
            path.display()
        )));
    }
    let mut pixels = vec![0u8; count * PIXELS];
    r.read_exact(&mut pixels).map_err(|_| truncated(path, 16))?;
    Ok((count, pixels))
}

fn parse_labels<R: Read>(r: &mut R, path: &Path) -> Result<(usize, Vec<u8>)> {
    let magic = read_u32_be(r, path, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad magic {magic:#010x} at offset 0, expected {LABELS_MAGIC:#010x}",
            path.display()
        )));
    }
    let count = read_u32_be(r, path, 4)? as usize;
    let mut labels = vec![0u8; count];
    r.read_exact(&mut labels).map_err(|_| truncated(path, 8))?;
    Ok((count, labels))
}

fn assemble(count: usize, pixels: Vec<u8>, labels: Vec<u8>, split: Split) -> Result<Dataset> {
    let images = Array2::from_shape_vec(
        (count, PIXELS),
        pixels.into_iter().map(|b| f64::from(b) / 255.0).collect(),
    )
    .map_err(|e| Error::Data(format!("image buffer: {e}")))?;
    let mut onehot = Array2::zeros((count, CLASSES));
    for (i, &label) in labels.iter().enumerate() {
        let class = label as usize;
        if class >= CLASSES {
            return Err(Error::Data(format!("label {label} out of range at sample {i}")));
        }
        onehot[(i, class)] = 1.0;
    }
    Ok(Dataset { images, labels: onehot, split })
}

/// Load one split from an images/labels file pair. The pair must be a full
/// MNIST split: 60000 samples (train) or 10000 (test).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (image_count, pixels) = parse_images(&mut open_maybe_gz(images_path)?, images_path)?;
    let (label_count, labels) = parse_labels(&mut open_maybe_gz(labels_path)?, labels_path)?;
    if image_count != label_count {
        return Err(Error::Data(format!(
            "{} has {image_count} images but {} has {label_count} labels",
            images_path.display(),
            labels_path.display()
        )));
    }
    let split = match image_count {
        TRAIN_COUNT => Split::Train,
        TEST_COUNT => Split::Test,
        n => {
            return Err(Error::Data(format!(
                "{}: {n} samples is not a full MNIST split (expected {TRAIN_COUNT} or {TEST_COUNT})",
                images_path.display()
            )))
        }
    };
    assemble(image_count, pixels, labels, split)
}

/// Resolve a canonical file name inside `dir`, accepting a `.gz` variant.
pub fn resolve_file(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.exists() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(Error::Data(format!(
        "missing {name}[.gz] under {}",
        dir.display()
    )))
}

/// Load both splits from a directory holding the four canonical files.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_idx(
        &resolve_file(dir, CANONICAL_FILES[0].0)?,
        &resolve_file(dir, CANONICAL_FILES[0].1)?,
    )?;
    let test = load_idx(
        &resolve_file(dir, CANONICAL_FILES[1].0)?,
        &resolve_file(dir, CANONICAL_FILES[1].1)?,
    )?;
    Ok((train, test))
}

/// Check every `<sha256>  <filename>` line of `manifest` against the
/// decompressed content of the corresponding file in `dir`.
pub fn verify_digests(dir: &Path, manifest: &Path) -> Result<()> {
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| Error::Data(format!("{}: {e}", manifest.display())))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (expected, name) = match (parts.next(), parts.next()) {
            (Some(h), Some(n)) => (h, n),
            _ => {
                return Err(Error::Data(format!(
                    "{}: malformed line {}",
                    manifest.display(),
                    lineno + 1
                )))
            }
        };
        let path = resolve_file(dir, name)?;
        let mut reader = open_maybe_gz(&path)?;
        let mut hasher = Sha256::new();
        std::io::copy(&mut reader, &mut hasher)?;
        let actual = hex_string(&hasher.finalize());
        if actual != expected.to_lowercase() {
            return Err(Error::Data(format!(
                "{}: digest mismatch: expected {expected}, got {actual}",
                path.display()
            )));
        }
    }
    Ok(())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Data directory used when the caller does not specify one: the
/// `PSN_DATA_DIR` environment variable if set, else `./data`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os("PSN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, domain};
    use std::io::Cursor;

    fn image_bytes(count: usize, fill: &[u8]) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        buf.extend_from_slice(&(count as u32).to_be_bytes());
        buf.extend_from_slice(&28u32.to_be_bytes());
        buf.extend_from_slice(&28u32.to_be_bytes());
        for i in 0..count * PIXELS {
            buf.push(fill[i % fill.len()]);
        }
        buf
    }

    #[test]
    fn parses_well_formed_headers() {
        let buf = image_bytes(3, &[0, 128, 255]);
        let (count, pixels) = parse_images(&mut Cursor::new(&buf), Path::new("mem")).unwrap();
        assert_eq!(count, 3);
        assert_eq!(pixels.len(), 3 * PIXELS);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut buf = image_bytes(1, &[7]);
        buf[3] = 0x99;
        let err = parse_images(&mut Cursor::new(&buf), Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
        assert!(err.to_string().contains("offset 0"), "{err}");

        let buf = image_bytes(2, &[7]);
        let err =
            parse_images(&mut Cursor::new(&buf[..buf.len() - 5]), Path::new("y")).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn normalization_endpoints() {
        let pixels = vec![0u8, 255, 128];
        let mut padded = pixels.clone();
        padded.resize(PIXELS, 0);
        let data = assemble(1, padded, vec![3], Split::Test).unwrap();
        assert_eq!(data.images[(0, 0)], 0.0);
        assert_eq!(data.images[(0, 1)], 1.0);
        assert!((data.images[(0, 2)] - 128.0 / 255.0).abs() < 1e-15);
        assert_eq!(data.label_index(0), 3);
        assert!(assemble(1, vec![0; PIXELS], vec![10], Split::Test).is_err());
    }

    fn real_data_dir() -> Option<PathBuf> {
        let dir = std::env::var_os("PSN_DATA_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| {
                Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
            });
        dir.join("train-labels-idx1-ubyte.gz")
            .exists()
            .then_some(dir.clone())
            .or_else(|| dir.join("train-labels-idx1-ubyte").exists().then_some(dir))
    }

    #[test]
    fn loads_full_mnist_when_present() {
        let Some(dir) = real_data_dir() else {
            eprintln!("skipping: MNIST files not found");
            return;
        };
        let (train, test) = load_mnist_dir(&dir).unwrap();
        assert_eq!(train.len(), 60_000);
        assert_eq!(test.len(), 10_000);
        assert_eq!(train.input_dim(), 784);
        assert!(matches!(train.split, Split::Train));
        assert!(matches!(test.split, Split::Test));

        // Every pixel in [0, 1]; every label one-hot.
        assert!(train.images.iter().all(|&p| (0.0..=1.0).contains(&p)));
        for i in 0..test.len() {
            let row = test.labels.row(i);
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.sum(), 1.0);
        }

        // Digit counts of the test split, frozen from the official files.
        let mut hist = [0usize; 10];
        for i in 0..test.len() {
            hist[test.label_index(i)] += 1;
        }
        assert_eq!(hist, [980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009]);
        assert!(hist.iter().all(|&c| (892..=1135).contains(&c)));

        // Loading twice yields identical matrices.
        let (again, _) = load_mnist_dir(&dir).unwrap();
        assert_eq!(train.images, again.images);
        assert_eq!(train.labels, again.labels);
    }

    #[test]
    fn digest_manifest_verifies_when_present() {
        let Some(dir) = real_data_dir() else {
            eprintln!("skipping: MNIST files not found");
            return;
        };
        let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests/mnist.sha256");
        if !manifest.exists() {
            eprintln!("skipping: manifest not found");
            return;
        }
        verify_digests(&dir, &manifest).unwrap();
    }

    fn tiny_dataset(n: usize) -> Dataset {
        let images = Array2::from_shape_fn((n, 4), |(i, j)| ((i * 7 + j) % 11) as f64 / 10.0);
        let mut labels = Array2::zeros((n, 3));
        for i in 0..n {
            labels[(i, i % 3)] = 1.0;
        }
        Dataset { images, labels, split: Split::Train }
    }

    #[test]
    fn batches_partition_the_dataset() {
        let data = tiny_dataset(10);
        let mut rng = derive_stream(5, &[domain::SHUFFLE, 0]);
        let batches = data.batches(4, &mut rng).unwrap();
        let order: Vec<usize> = batches.order().to_vec();
        let sizes: Vec<usize> = batches.map(|(x, _)| x.ncols()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());

        // Same seed, same order; full-size batch is a permutation.
        let mut rng2 = derive_stream(5, &[domain::SHUFFLE, 0]);
        let again = data.batches(4, &mut rng2).unwrap();
        assert_eq!(again.order(), order.as_slice());

        let mut rng3 = derive_stream(5, &[domain::SHUFFLE, 1]);
        let whole = data.batches(10, &mut rng3).unwrap();
        assert_eq!(whole.order().len(), 10);

        assert!(data.batches(0, &mut rng3).is_err());
    }

    #[test]
    fn gather_matches_rows() {
        let data = tiny_dataset(6);
        let (x, y) = data.gather(&[2, 5]);
        assert_eq!(x.column(0).to_vec(), data.images.row(2).to_vec());
        assert_eq!(x.column(1).to_vec(), data.images.row(5).to_vec());
        assert_eq!(y.column(1).to_vec(), data.labels.row(5).to_vec());
    }
}
