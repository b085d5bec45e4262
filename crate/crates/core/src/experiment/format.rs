//! Binary dataset (`FGL1`) and checkpoint (`FGC1`) files.
//!
//! Both start with a four-byte magic, a `u16` version and a `u8` processing
//! mode; every integer and float is little-endian.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::{Dataset, LabeledImage};
use crate::dsp::ProcessingMode;
use crate::error::{Error, Result};
use crate::nn::{Network, NetworkSpec, Tensor};
use crate::scene::{GestureClass, VariantKind};

pub const DATASET_MAGIC: &[u8; 4] = b"FGL1";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FGC1";
pub const VERSION: u16 = 1;

fn u16_field(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in 16 bits")))
}

/// Serialises a dataset.
pub fn encode_dataset(data: &Dataset) -> Result<Vec<u8>> {
    let n = u32::try_from(data.len()).map_err(|_| Error::Format("too many samples".into()))?;
    let mut out = Vec::with_capacity(17 + data.len() * (2 + 4 * data.pixels_per_sample()));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(data.mode.code());
    out.extend_from_slice(&n.to_le_bytes());
    for dim in [
        (data.height, "height"),
        (data.width, "width"),
        (data.channels, "channels"),
    ] {
        out.extend_from_slice(&u16_field(dim.0, dim.1)?.to_le_bytes());
    }
    for s in &data.samples {
        if s.pixels.len() != data.pixels_per_sample() {
            return Err(Error::Shape("sample size disagrees with dataset header".into()));
        }
        out.push(s.label.index() as u8);
        out.push(s.variant.code());
        for v in &s.pixels {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("{} truncated at byte {}", self.what, self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<ProcessingMode> {
        if self.take(4)? != magic {
            return Err(Error::Format(format!(
                "{} does not start with {}",
                self.what,
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u16()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "{} has unsupported version {version}",
                self.what
            )));
        }
        ProcessingMode::from_code(self.u8()?).map_err(|e| Error::Format(e.to_string()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} has {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader {
        bytes,
        pos: 0,
        what: "dataset file",
    };
    let mode = r.header(DATASET_MAGIC)?;
    let n = r.u32()? as usize;
    let (h, w, c) = (r.u16()? as usize, r.u16()? as usize, r.u16()? as usize);
    let mut data = Dataset::new(mode, h, w, c);
    let per = data.pixels_per_sample();
    let needed = n.checked_mul(2 + 4 * per).unwrap_or(usize::MAX);
    if bytes.len() - r.pos != needed {
        return Err(Error::Format(format!(
            "dataset file body is {} bytes, header implies {needed}",
            bytes.len() - r.pos
        )));
    }
    data.samples.reserve(n);
    for _ in 0..n {
        let label = GestureClass::from_index(r.u8()? as usize).map_err(|e| Error::Format(e.to_string()))?;
        let variant = VariantKind::from_code(r.u8()?).map_err(|e| Error::Format(e.to_string()))?;
        let pixels = r
            .take(4 * per)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        data.samples.push(LabeledImage { label, variant, pixels });
    }
    r.finish()?;
    Ok(data)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    fs::write(path, encode_dataset(data)?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_dataset(&bytes)
}

/// Serialises a trained network together with the mode it was trained for.
pub fn encode_checkpoint(model: &Network, mode: ProcessingMode) -> Result<Vec<u8>> {
    let s = model.spec();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(mode.code());
    for (v, what) in [
        (s.input_h, "input height"),
        (s.input_w, "input width"),
        (s.input_c, "input channels"),
        (s.conv_blocks, "conv blocks"),
        (s.filters, "filters"),
        (s.kernel_h, "kernel height"),
        (s.kernel_w, "kernel width"),
        (s.classes, "classes"),
    ] {
        out.extend_from_slice(&u16_field(v, what)?.to_le_bytes());
    }
    let named = model.named_params();
    out.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, t) in named {
        out.extend_from_slice(&u16_field(name.len(), "tensor name length")?.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Network, ProcessingMode)> {
    let mut r = Reader {
        bytes,
        pos: 0,
        what: "checkpoint file",
    };
    let mode = r.header(CHECKPOINT_MAGIC)?;
    let mut f = [0usize; 8];
    for v in f.iter_mut() {
        *v = r.u16()? as usize;
    }
    let spec = NetworkSpec {
        input_h: f[0],
        input_w: f[1],
        input_c: f[2],
        conv_blocks: f[3],
        filters: f[4],
        kernel_h: f[5],
        kernel_w: f[6],
        classes: f[7],
    };
    spec.validate().map_err(|e| Error::Format(e.to_string()))?;
    let expected = spec.param_shapes();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Format(format!(
            "checkpoint holds {count} tensors, network needs {}",
            expected.len()
        )));
    }
    let mut params = Vec::with_capacity(count);
    for (want_name, want_shape) in expected {
        let len = r.u16()? as usize;
        let name =
            String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = r.u8()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if name != want_name || shape != want_shape {
            return Err(Error::Format(format!(
                "checkpoint tensor {name} {shape:?} where {want_name} {want_shape:?} was expected"
            )));
        }
        let n: usize = shape.iter().product();
        let values = r
            .take(8 * n)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        params.push(Tensor::new(shape, values)?);
    }
    r.finish()?;
    let net = Network::from_params(spec, params).map_err(|e| match e {
        Error::NonFinite(m) => Error::NonFinite(m),
        other => Error::Format(other.to_string()),
    })?;
    Ok((net, mode))
}

pub fn write_checkpoint(path: &Path, model: &Network, mode: ProcessingMode) -> Result<()> {
    fs::write(path, encode_checkpoint(model, mode)?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_checkpoint(path: &Path) -> Result<(Network, ProcessingMode)> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_checkpoint(&bytes)
}

/// Lower-case hex SHA-256 of a file.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
