//! Binary model checkpoints: a shape header followed by the flat,
//! layer-ordered parameter list as little-endian 64-bit floats.
//!
//! Layout: the 8-byte magic `FDNCKPT1`, a u32 layer count, then u32
//! rows/cols per layer, then every parameter value in
//! [`ModelParameters::flatten`] order (per layer: row-major weights, then
//! biases). Encoding and decoding round-trip bit-for-bit.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fednids_core::model::ModelParameters;

const MAGIC: &[u8; 8] = b"FDNCKPT1";

pub fn encode(params: &ModelParameters) -> Vec<u8> {
    let (shapes, values) = params.flatten();
    let mut bytes = Vec::with_capacity(8 + 4 + shapes.len() * 8 + values.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    for (rows, cols) in &shapes {
        bytes.extend_from_slice(&(*rows as u32).to_le_bytes());
        bytes.extend_from_slice(&(*cols as u32).to_le_bytes());
    }
    for value in &values {
        bytes.extend_from_slice(&value.to_le_bytes());
    }
    bytes
}

pub fn decode(bytes: &[u8]) -> Result<ModelParameters> {
    let mut cursor = Cursor { bytes, offset: 0 };
    let magic = cursor.take(8)?;
    if magic != MAGIC {
        bail!("not a model checkpoint (bad magic)");
    }
    let layer_count = cursor.take_u32()? as usize;
    let mut shapes = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let rows = cursor.take_u32()? as usize;
        let cols = cursor.take_u32()? as usize;
        shapes.push((rows, cols));
    }
    let value_count: usize = shapes.iter().map(|(r, c)| r * c + c).sum();
    let mut values = Vec::with_capacity(value_count);
    for _ in 0..value_count {
        values.push(f64::from_le_bytes(cursor.take(8)?.try_into().unwrap()));
    }
    if cursor.offset != bytes.len() {
        bail!(
            "checkpoint has {} trailing bytes",
            bytes.len() - cursor.offset
        );
    }
    ModelParameters::from_flat(&shapes, &values).context("checkpoint shape header is invalid")
}

pub fn save(params: &ModelParameters, path: &Path) -> Result<()> {
    std::fs::write(path, encode(params))
        .with_context(|| format!("cannot write checkpoint {}", path.display()))
}

pub fn load(path: &Path) -> Result<ModelParameters> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read checkpoint {}", path.display()))?;
    decode(&bytes).with_context(|| format!("invalid checkpoint {}", path.display()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.offset + len;
        if end > self.bytes.len() {
            bail!("checkpoint is truncated at byte {}", self.bytes.len());
        }
        let slice = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(slice)
    }

    fn take_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fednids_core::model::init_model;

    #[test]
    fn roundtrip_preserves_every_bit() {
        let model = init_model(7);
        let decoded = decode(&encode(&model)).unwrap();
        let (shapes, values) = model.flatten();
        let (decoded_shapes, decoded_values) = decoded.flatten();
        assert_eq!(shapes, decoded_shapes);
        assert_eq!(values.len(), decoded_values.len());
        for (a, b) in values.iter().zip(&decoded_values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_damaged_input() {
        let model = init_model(7);
        let good = encode(&model);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(decode(&bad_magic).unwrap_err().to_string().contains("magic"));

        let truncated = &good[..good.len() - 3];
        assert!(decode(truncated)
            .unwrap_err()
            .to_string()
            .contains("truncated"));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(decode(&trailing)
            .unwrap_err()
            .to_string()
            .contains("trailing"));
    }

    #[test]
    fn save_and_load_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = init_model(11);
        save(&model, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(model.flatten(), loaded.flatten());
    }
}
