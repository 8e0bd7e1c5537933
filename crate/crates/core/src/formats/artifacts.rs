use std::path::Path;

use ndarray::{Array1, Array2};

use super::{load_artifact, meta_get, save_artifact, ArtifactKind, ByteReader, ByteWriter, Metadata};
use crate::colorimetry::RgbAlbedo;
use crate::error::{Error, Result};
use crate::neural::{EncoderDecoder, Mlp};
use crate::optics::SkinParams;
use crate::space::{AlbedoLut, AxisWarp, Dataset, ParamWarp, Record, Split, AXES};

fn write_warp(w: &mut ByteWriter, warp: &ParamWarp) {
    for a in &warp.axes {
        w.f64(a.min);
        w.f64(a.max);
        w.f64(a.exponent as f64);
    }
}

fn read_warp(r: &mut ByteReader, path: &Path) -> Result<ParamWarp> {
    let mut axes = [AxisWarp::new(0.0, 1.0, 1); AXES];
    for a in &mut axes {
        let (min, max, k) = (r.f64()?, r.f64()?, r.f64()?);
        if !(k == 1.0 || k == 3.0 || k == 4.0) {
            return Err(Error::format(path, format!("warp exponent {k} not in {{1, 3, 4}}")));
        }
        *a = AxisWarp::new(min, max, k as u32);
    }
    Ok(ParamWarp { axes })
}

/// Warp as `min,max,k` per axis, `;`-separated, for artifact metadata.
pub fn warp_meta(warp: &ParamWarp) -> String {
    warp.axes
        .iter()
        .map(|a| format!("{},{},{}", a.min, a.max, a.exponent))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_warp_meta(s: &str, path: &Path) -> Result<ParamWarp> {
    let bad = || Error::format(path, format!("malformed warp metadata `{s}`"));
    let axes: Vec<AxisWarp> = s
        .split(';')
        .map(|axis| {
            let f: Vec<&str> = axis.split(',').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            Ok(AxisWarp::new(
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(ParamWarp { axes: axes.try_into().map_err(|_| bad())? })
}

/// Writes `lut`: 5 × u32 resolutions, 5 × (min, max, k) as f64, then the
/// f32 RGB triples in row-major node order.
pub fn save_lut(lut: &AlbedoLut, path: &Path) -> Result<()> {
    let mut w = ByteWriter::default();
    for r in lut.resolutions() {
        w.u32(r as u32);
    }
    write_warp(&mut w, lut.warp());
    for v in lut.values() {
        for c in v.to_array() {
            w.f32(c as f32);
        }
    }
    save_artifact(ArtifactKind::Lut, &lut.provenance, &w.buf, path)
}

pub fn load_lut(path: &Path) -> Result<AlbedoLut> {
    let (meta, body) = load_artifact(ArtifactKind::Lut, path)?;
    let mut r = ByteReader::new(&body, path);
    let mut res = [0usize; AXES];
    for x in &mut res {
        *x = r.u32()? as usize;
    }
    let warp = read_warp(&mut r, path)?;
    let total = res
        .iter()
        .try_fold(1usize, |acc, &x| acc.checked_mul(x))
        .filter(|&t| t.checked_mul(12).is_some_and(|b| b <= body.len()))
        .ok_or_else(|| Error::format(path, format!("resolutions {res:?} exceed the file size")))?;
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        values.push(RgbAlbedo::new(r.f32()? as f64, r.f32()? as f64, r.f32()? as f64));
    }
    r.finish()?;
    AlbedoLut::from_parts(res, warp, values, meta)
}

/// Writes `ds`: u64 record count, then per record 5 × f64 u, 5 × f64 p,
/// 3 × f64 RGB and a u8 split tag. The warp travels in the metadata.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = ByteWriter::default();
    w.u64(ds.records.len() as u64);
    for rec in &ds.records {
        rec.u.iter().for_each(|&v| w.f64(v));
        rec.p.to_array().iter().for_each(|&v| w.f64(v));
        rec.albedo.to_array().iter().for_each(|&v| w.f64(v));
        w.u8(rec.split.tag());
    }
    let mut meta = ds.provenance.clone();
    meta.retain(|(k, _)| k != "warp");
    meta.push(("warp".into(), warp_meta(&ds.warp)));
    save_artifact(ArtifactKind::Dataset, &meta, &w.buf, path)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (mut meta, body) = load_artifact(ArtifactKind::Dataset, path)?;
    let warp = match meta_get(&meta, "warp") {
        Some(s) => parse_warp_meta(s, path)?,
        None => ParamWarp::default(),
    };
    meta.retain(|(k, _)| k != "warp");
    let mut r = ByteReader::new(&body, path);
    let n = r.count(13 * 8 + 1)?;
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut f = [0.0; 13];
        for v in &mut f {
            *v = r.f64()?;
        }
        let tag = r.u8()?;
        let split = Split::from_tag(tag).ok_or_else(|| Error::format(path, format!("record {i}: split tag {tag}")))?;
        records.push(Record {
            u: f[..5].try_into().unwrap(),
            p: SkinParams::from_array(f[5..10].try_into().unwrap()),
            albedo: RgbAlbedo::new(f[10], f[11], f[12]),
            split,
        });
    }
    r.finish()?;
    Dataset::new(records, warp, meta)
}

/// A trained encoder/decoder pair with its run metadata.
#[derive(Clone, Debug)]
pub struct WeightsFile {
    pub net: EncoderDecoder,
    pub meta: Metadata,
}

/// Writes the pair as: u32 network count, then per network u32 layer
/// count, u32 dims, every weight matrix (f64, row-major), every bias.
pub fn save_weights(net: &EncoderDecoder, meta: &Metadata, path: &Path) -> Result<()> {
    let mut w = ByteWriter::default();
    w.u32(2);
    for m in [&net.encoder, &net.decoder] {
        w.u32(m.dims().len() as u32);
        m.dims().iter().for_each(|&d| w.u32(d as u32));
        for wm in m.weights() {
            wm.iter().for_each(|&v| w.f64(v));
        }
        for b in m.biases() {
            b.iter().for_each(|&v| w.f64(v));
        }
    }
    save_artifact(ArtifactKind::Weights, meta, &w.buf, path)
}

pub fn load_weights(path: &Path) -> Result<WeightsFile> {
    let (meta, body) = load_artifact(ArtifactKind::Weights, path)?;
    let mut r = ByteReader::new(&body, path);
    let count = r.u32()?;
    if count != 2 {
        return Err(Error::format(path, format!("expected an encoder and a decoder, found {count} networks")));
    }
    let mut nets = Vec::with_capacity(2);
    for _ in 0..count {
        let layers = r.u32()? as usize;
        if !(2..=64).contains(&layers) {
            return Err(Error::format(path, format!("implausible layer count {layers}")));
        }
        let dims: Vec<usize> = (0..layers).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let params: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if params * 8 > body.len() {
            return Err(Error::format(path, format!("dims {dims:?} exceed the file size")));
        }
        let mut weights = Vec::new();
        for w in dims.windows(2) {
            let v: Vec<f64> = (0..w[0] * w[1]).map(|_| r.f64()).collect::<Result<_>>()?;
            weights.push(Array2::from_shape_vec((w[0], w[1]), v).unwrap());
        }
        let mut biases = Vec::new();
        for &d in &dims[1..] {
            let v: Vec<f64> = (0..d).map(|_| r.f64()).collect::<Result<_>>()?;
            biases.push(Array1::from_vec(v));
        }
        nets.push(Mlp::from_parts(dims, weights, biases)?);
    }
    r.finish()?;
    let decoder = nets.pop().unwrap();
    let encoder = nets.pop().unwrap();
    if encoder.input_dim() != 3 || encoder.output_dim() != AXES || decoder.input_dim() != AXES || decoder.output_dim() != 3 {
        return Err(Error::Invariant(format!(
            "{}: network shapes {:?} / {:?} are not an RGB encoder/decoder pair",
            path.display(),
            encoder.dims(),
            decoder.dims()
        )));
    }
    Ok(WeightsFile { net: EncoderDecoder { encoder, decoder }, meta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warp_metadata_round_trip() {
        let w = ParamWarp::default();
        assert_eq!(parse_warp_meta(&warp_meta(&w), Path::new("x")).unwrap(), w);
        assert!(parse_warp_meta("1,2", Path::new("x")).is_err());
    }
}
