//! Dataset ingestion: IRIS CSV, MNIST IDX, a seeded synthetic generator and
//! stratified splitting.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::encoding::{resize_image, FeatureVector};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

const IRIS_SPECIES: [&str; 3] = ["setosa", "versicolor", "virginica"];

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<FeatureVector>,
    pub num_classes: usize,
    pub feature_dim: usize,
    /// `(height, width)` when samples are row-major images.
    pub image_shape: Option<(usize, usize)>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        samples: Vec<FeatureVector>,
        num_classes: usize,
    ) -> Result<Self> {
        let name = name.into();
        let Some(first) = samples.first() else {
            return Err(Error::DegenerateInput(format!("dataset `{name}` is empty")));
        };
        let feature_dim = first.values.len();
        for (i, s) in samples.iter().enumerate() {
            if s.values.len() != feature_dim {
                return Err(Error::DegenerateInput(format!(
                    "sample {i} of `{name}` has {} features, expected {feature_dim}",
                    s.values.len()
                )));
            }
            if s.label >= num_classes {
                return Err(Error::Label {
                    label: s.label,
                    num_classes,
                });
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::DegenerateInput(format!(
                    "sample {i} of `{name}` is not finite"
                )));
            }
        }
        Ok(Self {
            name,
            samples,
            num_classes,
            feature_dim,
            image_shape: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Per-feature min-max scaling onto [0, 1]. Constant features map to 0.
    pub fn min_max_scale(&mut self) {
        for j in 0..self.feature_dim {
            let (lo, hi) = self
                .samples
                .iter()
                .map(|s| s.values[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            let range = hi - lo;
            for s in &mut self.samples {
                s.values[j] = if range > 0.0 {
                    (s.values[j] - lo) / range
                } else {
                    0.0
                };
            }
        }
    }

    /// Keeps only labels `< num_classes`.
    pub fn filter_classes(self, num_classes: usize) -> Result<Self> {
        if num_classes > self.num_classes {
            return Err(Error::config(
                "classes",
                format!(
                    "dataset `{}` has only {} classes",
                    self.name, self.num_classes
                ),
            ));
        }
        if num_classes == self.num_classes {
            return Ok(self);
        }
        let image_shape = self.image_shape;
        let samples = self
            .samples
            .into_iter()
            .filter(|s| s.label < num_classes)
            .collect();
        let mut out = Dataset::new(self.name, samples, num_classes)?;
        out.image_shape = image_shape;
        Ok(out)
    }

    pub fn truncate(&mut self, limit: usize) {
        self.samples.truncate(limit);
    }

    /// Block-average pools every image to `side × side`.
    pub fn resize_images(self, side: usize) -> Result<Self> {
        let (height, width) = self.image_shape.ok_or_else(|| {
            Error::DegenerateInput(format!("dataset `{}` does not hold images", self.name))
        })?;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                Ok(FeatureVector::new(
                    resize_image(&s.values, height, width, side)?,
                    s.label,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Dataset::new(self.name, samples, self.num_classes)?;
        out.image_shape = Some((side, side));
        Ok(out)
    }

    fn subset(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        let mut out = Dataset::new(self.name.clone(), samples, self.num_classes)?;
        out.image_shape = self.image_shape;
        Ok(out)
    }
}

/// Loads a comma-separated IRIS file: four numeric features then a label,
/// either a species name (optionally `Iris-` prefixed) or a class index. A
/// first row whose features do not parse is treated as a header. Features are
/// min-max scaled over the whole file.
pub fn load_iris(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_iris(&text, path)
}

pub fn parse_iris(bytes: &[u8], path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if record.len() != 5 {
            return Err(parse_err(
                line,
                format!("expected 5 columns, got {}", record.len()),
            ));
        }
        let features: std::result::Result<Vec<f64>, _> =
            record.iter().take(4).map(str::parse::<f64>).collect();
        let values = match features {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => return Err(parse_err(line, format!("bad feature value: {e}"))),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(line, "non-finite feature value".into()));
        }
        let label = parse_iris_label(&record[4])
            .ok_or_else(|| parse_err(line, format!("unknown label `{}`", &record[4])))?;
        samples.push(FeatureVector::new(values, label));
    }
    if samples.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    let mut dataset = Dataset::new("iris", samples, IRIS_SPECIES.len())?;
    dataset.min_max_scale();
    Ok(dataset)
}

fn parse_iris_label(raw: &str) -> Option<usize> {
    let lower = raw.to_ascii_lowercase();
    let name = lower.strip_prefix("iris-").unwrap_or(&lower);
    IRIS_SPECIES.iter().position(|s| *s == name).or_else(|| {
        name.parse::<usize>()
            .ok()
            .filter(|&l| l < IRIS_SPECIES.len())
    })
}

/// Loads an IDX image/label pair, scaling pixels by 1/255 and keeping at most
/// `limit` samples.
pub fn load_mnist(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: Option<usize>,
) -> Result<Dataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let images = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    parse_mnist(&images, images_path, &labels, labels_path, limit)
}

pub fn parse_mnist(
    images: &[u8],
    images_path: &Path,
    labels: &[u8],
    labels_path: &Path,
    limit: Option<usize>,
) -> Result<Dataset> {
    let image_header = idx_header(images, images_path, IDX_IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (image_header[0], image_header[1], image_header[2]);
    let label_header = idx_header(labels, labels_path, IDX_LABELS_MAGIC, 1)?;
    if label_header[0] != count {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            message: format!("{} labels for {count} images", label_header[0]),
        });
    }
    let pixels_per_image = rows * cols;
    let image_bytes = &images[16..];
    if image_bytes.len() != count * pixels_per_image {
        return Err(Error::Format {
            path: images_path.to_path_buf(),
            message: format!(
                "expected {} pixel bytes, found {}",
                count * pixels_per_image,
                image_bytes.len()
            ),
        });
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != count {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            message: format!("expected {count} label bytes, found {}", label_bytes.len()),
        });
    }
    let keep = limit.map_or(count, |l| l.min(count));
    let mut samples = Vec::with_capacity(keep);
    for (pixels, &label) in image_bytes
        .chunks_exact(pixels_per_image)
        .zip(label_bytes)
        .take(keep)
    {
        if label > 9 {
            return Err(Error::Format {
                path: labels_path.to_path_buf(),
                message: format!("label {label} is not a digit"),
            });
        }
        let values = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        samples.push(FeatureVector::new(values, usize::from(label)));
    }
    let mut dataset = Dataset::new("mnist", samples, 10)?;
    dataset.image_shape = Some((rows, cols));
    Ok(dataset)
}

/// Validates magic and returns the `dims` big-endian dimension words.
fn idx_header(bytes: &[u8], path: &Path, magic: u32, dims: usize) -> Result<Vec<usize>> {
    let header_len = 4 * (dims + 1);
    if bytes.len() < header_len {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("file too short for IDX header ({} bytes)", bytes.len()),
        });
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    if word(0) != magic {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("bad magic number {:#010x}, expected {magic:#010x}", word(0)),
        });
    }
    Ok((1..=dims).map(|i| word(i) as usize).collect())
}

/// Stratified split: each class contributes `round(count · test_fraction)`
/// samples to the test side, clamped so both sides keep at least one.
/// Both sides preserve the original sample order.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(
            "test_fraction",
            format!("must lie in (0, 1), got {test_fraction}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    for (i, s) in dataset.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut indices) in by_class.into_iter().enumerate() {
        match indices.len() {
            0 => continue,
            1 => return Err(Error::Stratification { label, count: 1 }),
            n => {
                let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
                indices.shuffle(&mut rng);
                test.extend_from_slice(&indices[..n_test]);
                train.extend_from_slice(&indices[n_test..]);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}

/// Gaussian-blob generator for offline runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    /// Standard deviation around each class centre.
    pub spread: f64,
}

/// Class centres are drawn uniformly from `[0.25, 0.75]^features`; samples are
/// centre plus isotropic noise, clipped to [0, 1]. Classes get equal counts
/// (the first `samples % classes` classes one extra).
pub fn synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    if spec.classes == 0 || spec.features == 0 || spec.samples < spec.classes {
        return Err(Error::config(
            "synthetic",
            format!("need classes >= 1, features >= 1 and samples >= classes, got {spec:?}"),
        ));
    }
    let noise = Normal::new(0.0, spec.spread.max(0.0))
        .map_err(|e| Error::config("synthetic.spread", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..spec.features)
                .map(|_| rng.random_range(0.25..0.75))
                .collect()
        })
        .collect();
    let mut samples = Vec::with_capacity(spec.samples);
    for (label, centre) in centres.iter().enumerate() {
        let count = spec.samples / spec.classes + usize::from(label < spec.samples % spec.classes);
        for _ in 0..count {
            let values = centre
                .iter()
                .map(|c| (c + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            samples.push(FeatureVector::new(values, label));
        }
    }
    Dataset::new("synthetic", samples, spec.classes)
}
