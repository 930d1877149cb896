//! Dataset handling: IDX ingestion, balanced subset construction, seeded
//! batch partitioning, and a synthetic digit corpus for machines without the
//! real MNIST files.
//!
//! Images are stored as f64 in [0,1] (pixel/255, no centering). Datasets are
//! immutable after construction and safe to share across threads.

pub mod idx;
mod problem;

use std::path::Path;

pub use problem::{BoxBounds, GatherScratch, Problem, WeightSampler};

use crate::error::{Error, Result};
use crate::models::BatchView;
use crate::numerics::RngStream;
use idx::RawImages;

pub const MINI_TRAIN: usize = 5500;
pub const MINI_TEST: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<f64>,
    labels: Vec<u8>,
    rows: usize,
    cols: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(
        images: Vec<f64>,
        labels: Vec<u8>,
        rows: usize,
        cols: usize,
        classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::data("empty dataset"));
        }
        if images.len() != labels.len() * rows * cols {
            return Err(Error::Dimension {
                expected: labels.len() * rows * cols,
                got: images.len(),
                context: "dataset images",
            });
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= classes) {
            return Err(Error::data(format!(
                "label {l} at index {i} out of range for {classes} classes"
            )));
        }
        if let Some((i, &p)) = images
            .iter()
            .enumerate()
            .find(|(_, &p)| !(0.0..=1.0).contains(&p))
        {
            return Err(Error::data(format!("pixel {p} at offset {i} outside [0,1]")));
        }
        Ok(Dataset {
            images,
            labels,
            rows,
            cols,
            classes,
        })
    }

    fn from_raw(raw: RawImages, labels: Vec<u8>, classes: usize) -> Result<Self> {
        let images = raw.pixels.iter().map(|&p| p as f64 / 255.0).collect();
        Dataset::new(images, labels, raw.rows, raw.cols, classes)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Features per example (rows * cols).
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn images(&self) -> &[f64] {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn full_view(&self) -> BatchView<'_> {
        BatchView::new(&self.images, &self.labels, self.dim()).expect("dataset is non-empty")
    }

    /// Copies the examples at `idx` into the scratch buffers, in `idx` order.
    pub fn gather(&self, idx: &[usize], inputs: &mut Vec<f64>, labels: &mut Vec<u8>) -> Result<()> {
        let d = self.dim();
        inputs.clear();
        labels.clear();
        inputs.reserve(idx.len() * d);
        labels.reserve(idx.len());
        for &i in idx {
            if i >= self.n() {
                return Err(Error::data(format!(
                    "example index {i} out of range for dataset of {}",
                    self.n()
                )));
            }
            inputs.extend_from_slice(&self.images[i * d..(i + 1) * d]);
            labels.push(self.labels[i]);
        }
        Ok(())
    }

    /// Quantizes back to bytes (round(pixel*255)); exact inverse of loading.
    pub fn to_raw(&self) -> (RawImages, Vec<u8>) {
        let pixels = self
            .images
            .iter()
            .map(|&p| (p * 255.0).round() as u8)
            .collect();
        (
            RawImages {
                pixels,
                n: self.n(),
                rows: self.rows,
                cols: self.cols,
            },
            self.labels.clone(),
        )
    }
}

/// Loads an images/labels IDX pair. Class count is inferred as
/// max(label) + 1.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let raw = idx::read_idx_images(images_path)?;
    let labels = idx::read_idx_labels(labels_path)?;
    if raw.n != labels.len() {
        return Err(Error::data(format!(
            "{} has {} images but {} has {} labels",
            images_path.display(),
            raw.n,
            labels_path.display(),
            labels.len()
        )));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    Dataset::from_raw(raw, labels, classes)
}

/// Writes a dataset as an images/labels IDX pair (gzip by `.gz` suffix).
pub fn write_idx_pair(ds: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (raw, labels) = ds.to_raw();
    idx::write_idx_images(images_path, &raw)?;
    idx::write_idx_labels(labels_path, &labels)
}

/// Draws a class-balanced subset of `total` examples (per-class counts equal
/// to within one; lower class indices absorb the remainder). Selection is a
/// seeded shuffle within each class; the chosen indices are emitted in
/// ascending order, so the subset is deterministic given the rng state.
fn balanced_subset(ds: &Dataset, total: usize, rng: &mut RngStream) -> Result<Dataset> {
    let classes = ds.classes();
    let base = total / classes;
    let rem = total % classes;
    let mut selected: Vec<usize> = Vec::with_capacity(total);
    for c in 0..classes {
        let need = base + usize::from(c < rem);
        let mut pool: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels[i] as usize == c).collect();
        if pool.len() < need {
            return Err(Error::data(format!(
                "class {c} has {} examples, need {need} for a balanced subset",
                pool.len()
            )));
        }
        rng.shuffle(&mut pool);
        selected.extend_from_slice(&pool[..need]);
    }
    selected.sort_unstable();
    debug_assert!(selected.windows(2).all(|w| w[0] < w[1]), "duplicate index");
    let mut images = Vec::new();
    let mut labels = Vec::new();
    ds.gather(&selected, &mut images, &mut labels)?;
    Dataset::new(images, labels, ds.rows, ds.cols, classes)
}

/// Selects the 5500/1000 miniature train/test pair from full-size sources,
/// class-balanced (550 and 100 per class for 10 classes).
pub fn make_mini_mnist(
    train: &Dataset,
    test: &Dataset,
    rng: &mut RngStream,
) -> Result<(Dataset, Dataset)> {
    let mini_train = balanced_subset(train, MINI_TRAIN, rng)?;
    let mini_test = balanced_subset(test, MINI_TEST, rng)?;
    Ok((mini_train, mini_test))
}

/// Splits `0..n` into seeded-shuffle contiguous batches; the last batch may
/// be short. When `batch_size >= n` the partition is the identity order and
/// the rng is NOT consumed, so such a run replays the full-batch stream
/// bit-for-bit.
pub fn partition_batches(
    ds: &Dataset,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let n = ds.n();
    if batch_size >= n {
        return Ok(vec![(0..n).collect()]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
}

/// Synthetic 10-class digit-like corpus on the 28x28 grid. Every class is a
/// constellation of Gaussian bumps, three of them picked from a pool of
/// anchor bumps shared across classes (so classes overlap heavily) plus one
/// class-specific bump. Each example distorts the constellation: rotation
/// about the image center, translation, bump-width scaling, per-bump
/// amplitude jitter, then pixel noise, then byte quantization; a small
/// fraction of examples is rendered from another class's constellation
/// entirely, mimicking the genuinely ambiguous digits of handwritten
/// corpora. The spread is deliberately large enough that a small network
/// cannot push the full-batch training gradient near zero within a few
/// hundred steps. Produces (train, test) with the given per-class counts.
/// Classes are emitted in class-major order; downstream selection and
/// partitioning reshuffle.
pub fn synthetic_digits(
    train_per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    const SIDE: usize = 28;
    const CLASSES: usize = 10;
    const ANCHORS: usize = 5;
    const PIXEL_NOISE: f64 = 0.22;
    const CONFUSABLE: f64 = 0.07;
    if train_per_class == 0 || test_per_class == 0 {
        return Err(Error::config("per-class counts must be at least 1"));
    }

    let base = RngStream::new(seed);
    let mut proto_rng = base.fork(0);
    // (cx, cy, sigma, amplitude)
    let draw_bump = |rng: &mut RngStream| -> [f64; 4] {
        [
            rng.uniform(7.0, 21.0),
            rng.uniform(7.0, 21.0),
            rng.uniform(2.0, 3.4),
            rng.uniform(0.55, 1.0),
        ]
    };
    let anchors: Vec<[f64; 4]> = (0..ANCHORS).map(|_| draw_bump(&mut proto_rng)).collect();
    let mut protos = Vec::with_capacity(CLASSES);
    for _ in 0..CLASSES {
        let mut bumps = vec![
            anchors[proto_rng.gen_index(ANCHORS)],
            anchors[proto_rng.gen_index(ANCHORS)],
            anchors[proto_rng.gen_index(ANCHORS)],
        ];
        bumps.push(draw_bump(&mut proto_rng));
        protos.push(bumps);
    }

    let render = |per_class: usize, stream_base: u64| -> (Vec<u8>, Vec<u8>) {
        let mut pixels = Vec::with_capacity(per_class * CLASSES * SIDE * SIDE);
        let mut labels = Vec::with_capacity(per_class * CLASSES);
        let mid = (SIDE as f64 - 1.0) / 2.0;
        for c in 0..CLASSES {
            let mut rng = base.fork(stream_base + c as u64);
            for _ in 0..per_class {
                let bumps = if rng.uniform(0.0, 1.0) < CONFUSABLE {
                    &protos[rng.gen_index(CLASSES)]
                } else {
                    &protos[c]
                };
                let dx = rng.uniform(-4.0, 4.0);
                let dy = rng.uniform(-4.0, 4.0);
                let theta = rng.uniform(-0.55, 0.55);
                let width_scale = rng.uniform(0.8, 1.3);
                let (sin, cos) = theta.sin_cos();
                let placed: Vec<[f64; 4]> = bumps
                    .iter()
                    .map(|b| {
                        let (rx, ry) = (b[0] - mid, b[1] - mid);
                        [
                            mid + cos * rx - sin * ry + dx,
                            mid + sin * rx + cos * ry + dy,
                            b[2] * width_scale,
                            b[3] * rng.uniform(0.55, 1.45),
                        ]
                    })
                    .collect();
                for y in 0..SIDE {
                    for x in 0..SIDE {
                        let mut v = 0.0;
                        for b in &placed {
                            let (ex, ey) = (x as f64 - b[0], y as f64 - b[1]);
                            v += b[3] * (-(ex * ex + ey * ey) / (2.0 * b[2] * b[2])).exp();
                        }
                        v += PIXEL_NOISE * rng.standard_normal();
                        pixels.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
                    }
                }
                labels.push(c as u8);
            }
        }
        (pixels, labels)
    };

    let (train_px, train_labels) = render(train_per_class, 1000);
    let (test_px, test_labels) = render(test_per_class, 2000);
    let train = Dataset::from_raw(
        RawImages {
            pixels: train_px,
            n: train_labels.len(),
            rows: SIDE,
            cols: SIDE,
        },
        train_labels,
        CLASSES,
    )?;
    let test = Dataset::from_raw(
        RawImages {
            pixels: test_px,
            n: test_labels.len(),
            rows: SIDE,
            cols: SIDE,
        },
        test_labels,
        CLASSES,
    )?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_dataset(n: usize, classes: usize) -> Dataset {
        let mut rng = RngStream::new(77);
        let images: Vec<f64> = (0..n * 4).map(|_| rng.uniform(0.0, 1.0)).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % classes) as u8).collect();
        Dataset::new(images, labels, 2, 2, classes).unwrap()
    }

    #[test]
    fn dataset_validates_shapes_labels_and_range() {
        assert!(Dataset::new(vec![0.5; 8], vec![0, 1], 2, 2, 2).is_ok());
        assert!(Dataset::new(vec![0.5; 7], vec![0, 1], 2, 2, 2).is_err());
        assert!(Dataset::new(vec![0.5; 8], vec![0, 2], 2, 2, 2).is_err());
        assert!(Dataset::new(vec![1.5; 8], vec![0, 1], 2, 2, 2).is_err());
        assert!(Dataset::new(vec![], vec![], 2, 2, 2).is_err());
    }

    #[test]
    fn idx_pair_round_trips_floats_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, _) = synthetic_digits(3, 1, 5).unwrap();
        let imgs = dir.path().join("im.idx.gz");
        let lbls = dir.path().join("lb.idx.gz");
        write_idx_pair(&ds, &imgs, &lbls).unwrap();
        let back = load_idx(&imgs, &lbls).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn load_idx_rejects_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, _) = synthetic_digits(2, 1, 5).unwrap();
        let imgs = dir.path().join("im.idx");
        let lbls = dir.path().join("lb.idx");
        write_idx_pair(&ds, &imgs, &lbls).unwrap();
        idx::write_idx_labels(&lbls, &ds.labels()[..ds.n() - 1]).unwrap();
        let err = load_idx(&imgs, &lbls).unwrap_err();
        assert!(err.to_string().contains("labels"), "{err}");
    }

    #[test]
    fn mini_selection_is_balanced_and_seed_deterministic() {
        let (train, test) = synthetic_digits(560, 110, 11).unwrap();
        let mut rng = RngStream::new(3);
        let (mini_train, mini_test) = make_mini_mnist(&train, &test, &mut rng).unwrap();
        assert_eq!(mini_train.n(), MINI_TRAIN);
        assert_eq!(mini_test.n(), MINI_TEST);
        for c in 0..10u8 {
            let count = mini_train.labels().iter().filter(|&&l| l == c).count();
            assert_eq!(count, 550, "class {c}");
            let count = mini_test.labels().iter().filter(|&&l| l == c).count();
            assert_eq!(count, 100, "class {c}");
        }

        let mut rng2 = RngStream::new(3);
        let (again, _) = make_mini_mnist(&train, &test, &mut rng2).unwrap();
        assert_eq!(again, mini_train);
    }

    #[test]
    fn mini_selection_needs_enough_per_class() {
        let (train, test) = synthetic_digits(40, 12, 11).unwrap();
        let mut rng = RngStream::new(3);
        let err = make_mini_mnist(&train, &test, &mut rng).unwrap_err();
        assert!(err.to_string().contains("need 550"), "{err}");
    }

    #[test]
    fn partition_shapes_match_batch_size() {
        let ds = tiny_dataset(10, 2);
        let mut rng = RngStream::new(1);
        let parts = partition_batches(&ds, 5, &mut rng).unwrap();
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), [5, 5]);
        let parts = partition_batches(&ds, 4, &mut RngStream::new(1)).unwrap();
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), [4, 4, 2]);
        assert!(partition_batches(&ds, 0, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn oversized_batch_is_identity_and_leaves_rng_alone() {
        let ds = tiny_dataset(6, 2);
        let mut rng = RngStream::new(9);
        let parts = partition_batches(&ds, 6, &mut rng).unwrap();
        assert_eq!(parts, vec![(0..6).collect::<Vec<_>>()]);
        let mut fresh = RngStream::new(9);
        assert_eq!(rng.uniform(0.0, 1.0), fresh.uniform(0.0, 1.0));
    }

    #[test]
    fn synthetic_corpus_is_seed_deterministic() {
        let (a_train, a_test) = synthetic_digits(5, 2, 21).unwrap();
        let (b_train, b_test) = synthetic_digits(5, 2, 21).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        let (c_train, _) = synthetic_digits(5, 2, 22).unwrap();
        assert_ne!(a_train, c_train);
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_complete(
            n in 1usize..60,
            batch in 1usize..70,
            seed in 0u64..500,
        ) {
            let mut rng = RngStream::new(seed);
            let ds = tiny_dataset(n, 3.min(n));
            let parts = partition_batches(&ds, batch, &mut rng).unwrap();
            let mut seen = vec![false; n];
            for part in &parts {
                prop_assert!(part.len() <= batch);
                for &i in part {
                    prop_assert!(!seen[i], "index {i} repeated");
                    seen[i] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
            // all but the last batch are full
            for part in &parts[..parts.len() - 1] {
                prop_assert_eq!(part.len(), batch);
            }
        }
    }
}
