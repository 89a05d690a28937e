use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader {
    bytes: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn open(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Ok(Reader { bytes, pos: 0 })
    }

    fn u32_be(&mut self, what: &str) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!("truncated while reading {what}"),
            });
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn payload(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.bytes.len() as u64,
                msg: format!(
                    "truncated {what}: expected {} bytes after header, found {}",
                    n,
                    self.bytes.len() - self.pos
                ),
            });
        }
        Ok(&self.bytes[self.pos..self.pos + n])
    }
}

/// Parse an IDX image/label file pair. Pixels are scaled to `[0, 1]` by
/// division by 255.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let mut ir = Reader::open(images_path)?;
    let magic = ir.u32_be("image magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let n = ir.u32_be("image count")? as usize;
    let h = ir.u32_be("image rows")? as usize;
    let w = ir.u32_be("image cols")? as usize;
    let pixels = ir.payload(n * h * w, "image data")?;
    let images: Vec<f32> = pixels.iter().map(|&b| b as f32 / 255.0).collect();

    let mut lr = Reader::open(labels_path)?;
    let magic = lr.u32_be("label magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let ln = lr.u32_be("label count")? as usize;
    if ln != n {
        return Err(Error::Data(format!(
            "{n} images but {ln} labels in the IDX pair"
        )));
    }
    let labels: Vec<u32> = lr.payload(ln, "label data")?.iter().map(|&b| b as u32).collect();

    Dataset::new(
        Tensor::from_vec(&[n, h, w, 1], images)?,
        labels,
        split,
        10,
    )
}

/// Write an IDX pair; the inverse of [`load_mnist_idx`] for test fixtures.
/// Pixel floats are mapped back with `round(v * 255)`.
pub fn write_mnist_idx(dataset: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let shape = dataset.images.shape();
    let (n, h, w) = (shape[0], shape[1], shape[2]);
    let mut img = std::fs::File::create(images_path)?;
    img.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    img.write_all(&(n as u32).to_be_bytes())?;
    img.write_all(&(h as u32).to_be_bytes())?;
    img.write_all(&(w as u32).to_be_bytes())?;
    let bytes: Vec<u8> = dataset
        .images
        .as_slice()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    img.write_all(&bytes)?;

    let mut lab = std::fs::File::create(labels_path)?;
    lab.write_all(&LABELS_MAGIC.to_be_bytes())?;
    lab.write_all(&(n as u32).to_be_bytes())?;
    let label_bytes: Vec<u8> = dataset.labels.iter().map(|&l| l as u8).collect();
    lab.write_all(&label_bytes)?;
    Ok(())
}
