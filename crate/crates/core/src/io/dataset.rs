use serde::{Deserialize, Serialize};

use super::bytes::Reader;
use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::rng::RandomStream;
use crate::tensor::Tensor;

pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// One label byte plus a 3×32×32 image.
pub const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Images `[count, channels, height, width]` scaled to `[0, 1]`, with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.rows(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Label { label, classes });
        }
        Ok(Self {
            images,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-example geometry `[channels, height, width]`.
    pub fn example_shape(&self) -> [usize; 3] {
        match self.images.shape() {
            [_, c, h, w] => [*c, *h, *w],
            [_, f] => [1, 1, *f],
            _ => [1, 1, self.images.row_len()],
        }
    }

    /// The first `n` examples (or all of them if fewer).
    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        Dataset {
            images: self.images.select_rows(&idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            split: self.split,
        }
    }

    /// Pairs an IDX image file with its label file.
    pub fn from_idx(images: &[u8], labels: &[u8], classes: usize, split: Split) -> Result<Dataset> {
        let images = match parse_idx(images)? {
            IdxData::Images(t) => t,
            IdxData::Labels(_) => {
                return Err(ParseError {
                    format: "idx",
                    offset: 0,
                    kind: ParseErrorKind::BadMagic {
                        expected: IDX_IMAGES_MAGIC,
                        actual: IDX_LABELS_MAGIC,
                    },
                }
                .into())
            }
        };
        let labels = match parse_idx(labels)? {
            IdxData::Labels(l) => l,
            IdxData::Images(_) => {
                return Err(ParseError {
                    format: "idx",
                    offset: 0,
                    kind: ParseErrorKind::BadMagic {
                        expected: IDX_LABELS_MAGIC,
                        actual: IDX_IMAGES_MAGIC,
                    },
                }
                .into())
            }
        };
        Dataset::new(images, labels.into_iter().map(usize::from).collect(), classes, split)
    }
}

/// Train and held-out splits of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
}

impl TaskData {
    /// The probe set: first `n` held-out examples in file order.
    pub fn probe(&self, n: usize) -> Tensor {
        let idx: Vec<usize> = (0..n.min(self.test.len())).collect();
        self.test.images.select_rows(&idx)
    }
}

/// Decoded IDX payload.
#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    Labels(Vec<u8>),
    /// `[count, 1, rows, cols]`, pixels divided by 255.
    Images(Tensor),
}

/// Parses a big-endian IDX container (`0x00000801` labels, `0x00000803` images).
pub fn parse_idx(bytes: &[u8]) -> Result<IdxData, ParseError> {
    let mut r = Reader::new("idx", bytes);
    let magic = r.u32_be()?;
    match magic {
        IDX_LABELS_MAGIC => {
            let count = r.u32_be()? as usize;
            let data = r.take(count)?.to_vec();
            r.finish()?;
            Ok(IdxData::Labels(data))
        }
        IDX_IMAGES_MAGIC => {
            let count = r.u32_be()? as usize;
            let rows = r.u32_be()? as usize;
            let cols = r.u32_be()? as usize;
            let len = count
                .checked_mul(rows)
                .and_then(|v| v.checked_mul(cols))
                .ok_or_else(|| r.error(4, ParseErrorKind::Invalid("dimensions overflow".into())))?;
            let pixels = r.take(len)?;
            r.finish()?;
            let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
            Ok(IdxData::Images(
                Tensor::new(vec![count, 1, rows, cols], data).expect("length checked above"),
            ))
        }
        actual => Err(r.error(
            0,
            ParseErrorKind::BadMagic {
                expected: IDX_IMAGES_MAGIC,
                actual,
            },
        )),
    }
}

/// Parses concatenated CIFAR-10 binary records.
pub fn parse_cifar_bin(bytes: &[u8], split: Split) -> Result<Dataset, ParseError> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD) {
        let whole = bytes.len() / CIFAR_RECORD * CIFAR_RECORD;
        return Err(ParseError {
            format: "cifar",
            offset: whole,
            kind: ParseErrorKind::Truncated {
                needed: whole + CIFAR_RECORD,
                available: bytes.len(),
            },
        });
    }
    let count = bytes.len() / CIFAR_RECORD;
    let mut labels = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * (CIFAR_RECORD - 1));
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
        if rec[0] >= 10 {
            return Err(ParseError {
                format: "cifar",
                offset: i * CIFAR_RECORD,
                kind: ParseErrorKind::Invalid(format!("label {} out of range", rec[0])),
            });
        }
        labels.push(usize::from(rec[0]));
        data.extend(rec[1..].iter().map(|&p| f64::from(p) / 255.0));
    }
    let images = Tensor::new(vec![count, 3, 32, 32], data).expect("record size fixed");
    Ok(Dataset {
        images,
        labels,
        classes: 10,
        split,
    })
}

fn blob_centers(classes: usize, dims: usize, stream: &RandomStream) -> Vec<f64> {
    let mut s = stream.split("centers");
    (0..classes * dims).map(|_| s.normal()).collect()
}

fn blob_samples(centers: &[f64], classes: usize, per_class: usize, dims: usize, spread: f64, mut s: RandomStream, split: Split) -> Dataset {
    let mut data = Vec::with_capacity(classes * per_class * dims);
    let mut labels = Vec::with_capacity(classes * per_class);
    // Class-interleaved so any prefix is balanced.
    for _ in 0..per_class {
        for c in 0..classes {
            let center = &centers[c * dims..(c + 1) * dims];
            data.extend(center.iter().map(|&m| m + spread * s.normal()));
            labels.push(c);
        }
    }
    Dataset {
        images: Tensor::new(vec![classes * per_class, 1, 1, dims], data).expect("sized above"),
        labels,
        classes,
        split,
    }
}

/// Gaussian class blobs: standard-normal centres, isotropic noise of
/// standard deviation `spread`.
pub fn synth_blobs(classes: usize, per_class: usize, dims: usize, spread: f64, stream: &RandomStream) -> Result<Dataset> {
    if classes < 2 || dims == 0 {
        return Err(Error::Domain(format!("blobs need ≥2 classes and ≥1 dim, got {classes}/{dims}")));
    }
    let centers = blob_centers(classes, dims, stream);
    Ok(blob_samples(&centers, classes, per_class, dims, spread, stream.split("samples"), Split::Train))
}

/// Train/test blobs sharing one set of class centres.
pub fn synth_blobs_task(
    name: &str,
    classes: usize,
    train_per_class: usize,
    test_per_class: usize,
    dims: usize,
    spread: f64,
    stream: &RandomStream,
) -> Result<TaskData> {
    if classes < 2 || dims == 0 {
        return Err(Error::Domain(format!("blobs need ≥2 classes and ≥1 dim, got {classes}/{dims}")));
    }
    let centers = blob_centers(classes, dims, stream);
    Ok(TaskData {
        name: name.to_string(),
        train: blob_samples(&centers, classes, train_per_class, dims, spread, stream.split("train"), Split::Train),
        test: blob_samples(&centers, classes, test_per_class, dims, spread, stream.split("test"), Split::Test),
    })
}
