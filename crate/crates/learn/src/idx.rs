//! IDX (MNIST) file ingestion.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Environment variable naming the directory holding the four IDX files.
pub const DATA_DIR_ENV: &str = "DSFL_DATA_DIR";

/// Grayscale images in [0, 1], row-major, paired positionally with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_size(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.image_size();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }
}

/// MNIST train and test splits.
#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: Dataset,
    pub test: Dataset,
}

impl Mnist {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Mnist {
            train: load_dataset(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?,
            test: load_dataset(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))?,
        })
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self, field: &'static str) -> Result<u32> {
        let chunk = self.bytes.get(self.pos..self.pos + 4).ok_or_else(|| Error::Format {
            path: self.path.to_path_buf(),
            field,
            reason: "file truncated".into(),
        })?;
        self.pos += 4;
        Ok(u32::from_be_bytes(chunk.try_into().unwrap()))
    }

    fn body(&self, field: &'static str, expected: usize) -> Result<&[u8]> {
        let rest = &self.bytes[self.pos..];
        if rest.len() != expected {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                field,
                reason: format!("expected {expected} bytes, found {}", rest.len()),
            });
        }
        Ok(rest)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_magic(path: &Path, found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            field: "magic",
            reason: format!("expected {expected:#010x}, found {found:#010x}"),
        });
    }
    Ok(())
}

/// Parses an image file (magic 0x803) and a label file (magic 0x801).
pub fn load_dataset(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let raw = read(images_path)?;
    let mut r = Reader {
        path: images_path,
        bytes: &raw,
        pos: 0,
    };
    check_magic(images_path, r.u32("magic")?, IMAGE_MAGIC)?;
    let count = r.u32("image count")? as usize;
    let rows = r.u32("rows")? as usize;
    let cols = r.u32("cols")? as usize;
    let pixels: Vec<f32> = r
        .body("pixel data", count * rows * cols)?
        .iter()
        .map(|&b| b as f32 / 255.0)
        .collect();

    let raw = read(labels_path)?;
    let mut r = Reader {
        path: labels_path,
        bytes: &raw,
        pos: 0,
    };
    check_magic(labels_path, r.u32("magic")?, LABEL_MAGIC)?;
    let label_count = r.u32("label count")? as usize;
    if label_count != count {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            field: "label count",
            reason: format!("{label_count} labels for {count} images"),
        });
    }
    let labels = r.body("label data", label_count)?.to_vec();
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            field: "label data",
            reason: format!("label {bad} outside 0..=9"),
        });
    }
    Ok(Dataset {
        rows,
        cols,
        pixels,
        labels,
    })
}

/// `$DSFL_DATA_DIR` if set.
pub fn data_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}
