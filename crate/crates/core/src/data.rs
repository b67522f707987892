//! MNIST IDX files, normalisation, stratified subsets and folds, plus a
//! synthetic blob dataset for quick runs.
//!
//! IDX layout (big-endian):
//!
//! ```text
//! images: 00 00 08 03 | count u32 | rows u32 | cols u32 | count·rows·cols pixel bytes
//! labels: 00 00 08 01 | count u32 | count label bytes
//! ```
//!
//! Files whose name ends in `.gz` are decompressed transparently. Nothing is
//! ever downloaded; place the files in a directory and point the loader at it.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::nn::{Dataset, Tensor};
use crate::rng::{derive_seed, SplitMix64};

pub const ROWS: usize = 28;
pub const COLS: usize = 28;
pub const PIXELS: usize = ROWS * COLS;
pub const CLASSES: usize = 10;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// 28×28 grayscale images, row-major, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pixels: Vec<u8>,
}

impl ImageSet {
    pub fn new(pixels: Vec<u8>) -> Result<Self> {
        if !pixels.len().is_multiple_of(PIXELS) {
            return Err(Error::Size(format!(
                "{} pixel bytes is not a whole number of 28x28 images",
                pixels.len()
            )));
        }
        Ok(Self { pixels })
    }

    pub fn count(&self) -> usize {
        self.pixels.len() / PIXELS
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.pixels[i * PIXELS..(i + 1) * PIXELS]
    }
}

/// Class ids in `0..10`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<u8>,
}

impl LabelSet {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= CLASSES) {
            return Err(Error::domain(format!("label {bad} is not a digit class")));
        }
        Ok(Self { labels })
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// Images paired with their labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    images: ImageSet,
    labels: LabelSet,
}

impl LabeledSet {
    pub fn new(images: ImageSet, labels: LabelSet) -> Result<Self> {
        if images.count() != labels.count() {
            return Err(Error::Size(format!(
                "{} images but {} labels",
                images.count(),
                labels.count()
            )));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn images(&self) -> &ImageSet {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        self.labels.labels()
    }

    /// Samples per class.
    pub fn class_counts(&self) -> [usize; CLASSES] {
        class_counts(self.labels())
    }

    /// The rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * PIXELS);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.images.image(i));
            labels.push(self.labels()[i]);
        }
        Self {
            images: ImageSet { pixels },
            labels: LabelSet { labels },
        }
    }

    /// Normalised inputs with class ids, ready for training.
    pub fn to_dataset(&self) -> Dataset {
        let labels = self.labels().iter().map(|&l| l as usize).collect();
        Dataset::new(normalize(&self.images), labels).expect("counts agree by construction")
    }
}

pub fn class_counts(labels: &[u8]) -> [usize; CLASSES] {
    let mut counts = [0; CLASSES];
    for &l in labels {
        counts[l as usize] += 1;
    }
    counts
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn check_magic(bytes: &[u8], expected: u32, what: &str) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::format(format!(
            "{what} file shorter than its magic number"
        )));
    }
    let magic = be_u32(bytes, 0);
    if magic != expected {
        let hint = match magic {
            IMAGE_MAGIC => " (this is an image file)",
            LABEL_MAGIC => " (this is a label file)",
            _ => "",
        };
        return Err(Error::format(format!(
            "bad {what} magic 0x{magic:08x}, expected 0x{expected:08x}{hint}"
        )));
    }
    Ok(())
}

fn check_length(bytes: &[u8], expected: usize, what: &str) -> Result<()> {
    match bytes.len().cmp(&expected) {
        std::cmp::Ordering::Less => Err(Error::format(format!(
            "{what} file truncated: {} bytes, expected {expected}",
            bytes.len()
        ))),
        std::cmp::Ordering::Greater => Err(Error::format(format!(
            "{what} file has {} trailing bytes",
            bytes.len() - expected
        ))),
        std::cmp::Ordering::Equal => Ok(()),
    }
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<ImageSet> {
    check_magic(bytes, IMAGE_MAGIC, "image")?;
    if bytes.len() < 16 {
        return Err(Error::format("image header truncated"));
    }
    let count = be_u32(bytes, 4) as usize;
    let (rows, cols) = (be_u32(bytes, 8), be_u32(bytes, 12));
    if rows as usize != ROWS || cols as usize != COLS {
        return Err(Error::Dimension { rows, cols });
    }
    let body = count
        .checked_mul(PIXELS)
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| Error::format(format!("image count {count} overflows")))?;
    check_length(bytes, body, "image")?;
    Ok(ImageSet {
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<LabelSet> {
    check_magic(bytes, LABEL_MAGIC, "label")?;
    if bytes.len() < 8 {
        return Err(Error::format("label header truncated"));
    }
    let count = be_u32(bytes, 4) as usize;
    check_length(bytes, count + 8, "label")?;
    LabelSet::new(bytes[8..].to_vec())
}

pub fn write_idx_images(images: &ImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count() as u32).to_be_bytes());
    out.extend_from_slice(&(ROWS as u32).to_be_bytes());
    out.extend_from_slice(&(COLS as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn write_idx_labels(labels: &LabelSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.count() as u32).to_be_bytes());
    out.extend_from_slice(&labels.labels);
    out
}

/// Read a file, gunzipping it when the name ends in `.gz`.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw =
        fs::read(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|ext| ext == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::format(format!("{}: bad gzip stream: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn load_images(path: &Path) -> Result<ImageSet> {
    parse_idx_images(&read_maybe_gz(path)?)
}

pub fn load_labels(path: &Path) -> Result<LabelSet> {
    parse_idx_labels(&read_maybe_gz(path)?)
}

/// `dir/stem` or `dir/stem.gz`, whichever exists.
fn find_file(dir: &Path, stem: &str) -> Option<PathBuf> {
    [dir.join(stem), dir.join(format!("{stem}.gz"))]
        .into_iter()
        .find(|p| p.is_file())
}

fn load_pair(dir: &Path, images: &str, labels: &str) -> Result<Option<LabeledSet>> {
    match (find_file(dir, images), find_file(dir, labels)) {
        (Some(i), Some(l)) => Ok(Some(LabeledSet::new(load_images(&i)?, load_labels(&l)?)?)),
        _ => Ok(None),
    }
}

/// The MNIST files found in a directory.
#[derive(Debug, Clone)]
pub struct MnistFiles {
    pub train: LabeledSet,
    /// Present only when the `t10k-*` files are in the directory.
    pub test: Option<LabeledSet>,
}

/// Load `train-images-idx3-ubyte` / `train-labels-idx1-ubyte` (optionally
/// `.gz`) and, when present, the matching `t10k-*` pair.
pub fn load_mnist_dir(dir: &Path) -> Result<MnistFiles> {
    let train =
        load_pair(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte")?.ok_or_else(|| {
            Error::Data(format!(
                "no MNIST training files in {}; expected train-images-idx3-ubyte[.gz] and \
                 train-labels-idx1-ubyte[.gz]",
                dir.display()
            ))
        })?;
    let test = load_pair(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?;
    Ok(MnistFiles { train, test })
}

/// Map pixels to `[-1, 1]` by `x/127.5 − 1`; shape `[N, 1, 28, 28]`.
pub fn normalize(images: &ImageSet) -> Tensor {
    let data = images.pixels.iter().map(|&p| normalize_pixel(p)).collect();
    Tensor::new(vec![images.count(), 1, ROWS, COLS], data).expect("volume matches")
}

pub fn normalize_pixel(p: u8) -> f64 {
    p as f64 / 127.5 - 1.0
}

/// Inverse of [`normalize_pixel`], rounding to the nearest byte.
pub fn denormalize_pixel(x: f64) -> u8 {
    ((x + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Split `labels.len()` indices into a stratified selection of exactly
/// `count` indices and the rest.
///
/// Each class receives `floor(count·n_c/N)` plus one extra for the classes
/// with the largest remainders (ties to the lower class id), so every class
/// is within one sample of its proportional share. Within a class the
/// selection is a prefix of a seeded shuffle. The selection comes back in
/// seeded shuffled order, the rest in ascending index order.
pub fn stratified_split_count(
    labels: &[u8],
    count: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let total = labels.len();
    if count > total {
        return Err(Error::domain(format!(
            "cannot select {count} of {total} samples"
        )));
    }
    let counts = class_counts(labels);
    let mut quota = [0usize; CLASSES];
    let mut remainders = Vec::with_capacity(CLASSES);
    for c in 0..CLASSES {
        let exact = count as u128 * counts[c] as u128;
        quota[c] = (exact / total.max(1) as u128) as usize;
        remainders.push((exact % total.max(1) as u128, c));
    }
    let short = count - quota.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().take(short) {
        quota[c] += 1;
    }

    let mut rng = SplitMix64::new(derive_seed(seed, 0));
    let mut chosen = Vec::with_capacity(count);
    let mut taken = vec![false; total];
    for c in 0..CLASSES {
        let mut members: Vec<usize> = (0..total).filter(|&i| labels[i] as usize == c).collect();
        rng.shuffle(&mut members);
        for &i in &members[..quota[c]] {
            taken[i] = true;
            chosen.push(i);
        }
    }
    rng.shuffle(&mut chosen);
    let rest = (0..total).filter(|&i| !taken[i]).collect();
    Ok((chosen, rest))
}

/// A stratified sample of `round(fraction·N)` rows in seeded shuffled order.
pub fn stratified_subset(data: &LabeledSet, fraction: f64, seed: u64) -> Result<LabeledSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let count = (fraction * data.len() as f64).round() as usize;
    let (chosen, _) = stratified_split_count(data.labels(), count, seed)?;
    Ok(data.select(&chosen))
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub train: LabeledSet,
    pub val: LabeledSet,
    pub test: LabeledSet,
}

pub const VALIDATION_FRACTION: f64 = 0.1;

/// Stratified 90/10 train/validation split of `train`; `test` passes through.
pub fn split_bundle(
    train: (ImageSet, LabelSet),
    test: (ImageSet, LabelSet),
    seed: u64,
) -> Result<DatasetBundle> {
    let train = LabeledSet::new(train.0, train.1)?;
    let test = LabeledSet::new(test.0, test.1)?;
    let (train, val) = split_train_val(&train, seed)?;
    Ok(DatasetBundle { train, val, test })
}

/// The stratified 90/10 split on its own: `(train, validation)`.
pub fn split_train_val(data: &LabeledSet, seed: u64) -> Result<(LabeledSet, LabeledSet)> {
    let val_count = (VALIDATION_FRACTION * data.len() as f64).round() as usize;
    let (val, train) = stratified_split_count(data.labels(), val_count, seed)?;
    Ok((data.select(&train), data.select(&val)))
}

/// Fold id per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// `(training indices, validation indices)` for fold `fold`, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (val, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignments.len()).partition(|&i| self.assignments[i] == fold);
        (train, val)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment.
///
/// Each class is shuffled and dealt round-robin; the starting fold rotates
/// from class to class so that the overall fold sizes also stay balanced.
pub fn make_folds(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::domain(format!("need at least 2 folds, got {k}")));
    }
    let counts = class_counts(labels);
    if let Some(c) = (0..CLASSES).find(|&c| counts[c] > 0 && counts[c] < k) {
        return Err(Error::domain(format!(
            "class {c} has {} samples, fewer than {k} folds",
            counts[c]
        )));
    }
    let mut rng = SplitMix64::new(derive_seed(seed, 1));
    let mut assignments = vec![0; labels.len()];
    let mut offset = 0;
    for c in 0..CLASSES {
        let mut members: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i] as usize == c)
            .collect();
        rng.shuffle(&mut members);
        for (j, &i) in members.iter().enumerate() {
            assignments[i] = (offset + j) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldPlan { k, assignments })
}

/// Blob centre of class `c` out of `n`: evenly spaced on a circle of radius
/// 8 around the image centre.
fn blob_center(c: usize, n: usize) -> (f64, f64) {
    let t = std::f64::consts::TAU * c as f64 / n as f64;
    (13.5 + 8.0 * t.sin(), 13.5 + 8.0 * t.cos())
}

/// `n_per_class · n_classes` images; class `c` is a bright Gaussian blob at
/// a fixed class centre, jittered by up to a pixel, plus pixel noise.
/// Labels cycle `0, 1, …, n_classes−1`.
pub fn synthetic_blobs(n_per_class: usize, n_classes: usize, seed: u64) -> Result<LabeledSet> {
    if n_per_class == 0 {
        return Err(Error::domain("need at least one image per class"));
    }
    if !(1..=CLASSES).contains(&n_classes) {
        return Err(Error::domain(format!(
            "class count must lie in 1..=10, got {n_classes}"
        )));
    }
    const SIGMA: f64 = 3.0;
    const NOISE: f64 = 24.0;
    let mut rng = SplitMix64::new(seed);
    let total = n_per_class * n_classes;
    let mut pixels = Vec::with_capacity(total * PIXELS);
    let mut labels = Vec::with_capacity(total);
    for i in 0..total {
        let c = i % n_classes;
        let (cy, cx) = blob_center(c, n_classes);
        let (cy, cx) = (cy + rng.uniform(-1.0, 1.0), cx + rng.uniform(-1.0, 1.0));
        for r in 0..ROWS {
            for col in 0..COLS {
                let d2 = (r as f64 - cy).powi(2) + (col as f64 - cx).powi(2);
                let v = 230.0 * (-d2 / (2.0 * SIGMA * SIGMA)).exp() + NOISE * rng.gaussian();
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        labels.push(c as u8);
    }
    LabeledSet::new(ImageSet { pixels }, LabelSet { labels })
}
