//! `EUSM` model files.
//!
//! ```text
//! "EUSM" | version: u8 = 1 | layer_count: u32
//! per layer: name_len: u32 | name: utf-8 | rank: u32 | dims: u32 x rank | values: f64 x prod(dims)
//! ```
//! Little-endian throughout. Besides the ten weight tensors the table holds
//! `anchors` (`[A, 2]`, width/height pairs) and `window_weight` (`[1]`).

use std::path::Path;

use crate::binio::{put_f64, put_u32, read_file, write_file, Reader};
use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::model::{TrackerModel, PARAM_NAMES};

pub const MODEL_MAGIC: &[u8; 4] = b"EUSM";
pub const MODEL_VERSION: u8 = 1;

fn put_layer(out: &mut Vec<u8>, name: &str, shape: &[usize], values: impl Iterator<Item = f64>) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    put_u32(out, shape.len() as u32);
    for &d in shape {
        put_u32(out, d as u32);
    }
    for v in values {
        put_f64(out, v);
    }
}

pub fn write_model<T: Real>(model: &TrackerModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.push(MODEL_VERSION);
    put_u32(&mut out, (PARAM_NAMES.len() + 2) as u32);
    for (name, p) in PARAM_NAMES.iter().zip(model.params()) {
        put_layer(&mut out, name, p.shape(), p.data().iter().map(|v| v.as_f64()));
    }
    let anchors = &model.anchor_shapes;
    put_layer(&mut out, "anchors", &[anchors.len(), 2], anchors.iter().flat_map(|&(w, h)| [w, h]));
    put_layer(&mut out, "window_weight", &[1], std::iter::once(model.window_weight));
    out
}

pub fn read_model<T: Real>(bytes: &[u8], path: &Path) -> Result<TrackerModel<T>> {
    let mut r = Reader::new(bytes, path);
    r.magic(MODEL_MAGIC)?;
    let version = r.u8("version")?;
    if version != MODEL_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let count = r.u32("layer count")? as usize;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32("layer name length")? as usize;
        let name = String::from_utf8(r.take(name_len, "layer name")?.to_vec())
            .map_err(|_| Error::format(path, "layer name is not utf-8"))?;
        let rank = r.u32("layer rank")? as usize;
        let shape = (0..rank).map(|_| r.u32("layer dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let values = r.f64s(shape.iter().product(), &name)?;
        layers.push((name, shape, values));
    }
    r.finish()?;

    let mut take = |wanted: &str| -> Result<(Vec<usize>, Vec<f64>)> {
        let idx = layers
            .iter()
            .position(|(n, _, _)| n == wanted)
            .ok_or_else(|| Error::format(path, format!("missing layer {wanted}")))?;
        let (_, shape, values) = layers.swap_remove(idx);
        Ok((shape, values))
    };
    let mut params = Vec::with_capacity(PARAM_NAMES.len());
    for name in PARAM_NAMES {
        let (shape, values) = take(name)?;
        params.push(
            Tensor::new(&shape, values.into_iter().map(T::of).collect())
                .map_err(|e| Error::format(path, format!("{name}: {e}")))?,
        );
    }
    let (ashape, avals) = take("anchors")?;
    if ashape.len() != 2 || ashape[1] != 2 {
        return Err(Error::format(path, format!("anchors shape {ashape:?}, expected [A, 2]")));
    }
    let anchors = avals.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let (_, window) = take("window_weight")?;
    if let Some((name, _, _)) = layers.first() {
        return Err(Error::format(path, format!("unexpected layer {name}")));
    }
    TrackerModel::from_params(params, anchors, window[0]).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_model<T: Real>(model: &TrackerModel<T>, path: &Path) -> Result<()> {
    write_file(path, &write_model(model))
}

pub fn load_model<T: Real>(path: &Path) -> Result<TrackerModel<T>> {
    read_model(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut model = TrackerModel::<f64>::default_init(3);
        model.window_weight = 0.25;
        let bytes = write_model(&model);
        assert_eq!(&bytes[..4], b"EUSM");
        let back: TrackerModel<f64> = read_model(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, model);
        assert_eq!(write_model(&back), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = write_model(&TrackerModel::<f64>::default_init(3));
        assert!(read_model::<f64>(&bytes[..100], Path::new("m")).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_model::<f64>(&bad, Path::new("m")).unwrap_err().to_string().contains("magic"));
    }
}
