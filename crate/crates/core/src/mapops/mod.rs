//! Per-texel inversion, editing and reconstruction of albedo maps.

mod edit;
mod metrics;

pub use edit::{edit, preset, EditOp, EditReport, EditSpec, Transform, PRESETS};
pub use metrics::{error_metrics, ErrorMetrics};

use ndarray::Array2;
use rayon::prelude::*;

use crate::colorimetry::RgbAlbedo;
use crate::error::{Error, Result};
use crate::neural::Mlp;
use crate::optics::SkinParams;
use crate::space::{AlbedoLut, ParamWarp, AXES};

/// Texels per parallel work item.
const TILE: usize = 4096;

/// Linear RGB image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Invariant(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        Ok(RgbImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        RgbImage { width, height, pixels: vec![rgb; width * height] }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }
}

/// Skin/non-skin mask; `true` marks skin.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Invariant(format!("{width}x{height} mask needs {} entries", width * height)));
        }
        Ok(Mask { width, height, data })
    }

    pub fn all(width: usize, height: usize) -> Self {
        Mask { width, height, data: vec![true; width * height] }
    }

    /// Thresholds a grayscale plane at 0.5.
    pub fn from_gray(width: usize, height: usize, gray: &[f64]) -> Result<Self> {
        Mask::new(width, height, gray.iter().map(|&g| g >= 0.5).collect())
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if (self.width, self.height) != (width, height) {
            return Err(Error::Invariant(format!(
                "mask is {}x{}, image is {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Five co-registered parameter planes, axis order `(V_m, V_b, t, φ_m, φ_h)`
/// with thickness in µm.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamMaps {
    pub width: usize,
    pub height: usize,
    pub planes: [Vec<f64>; AXES],
    /// Texels marked `false` carry no parameters (zero-filled).
    pub mask: Option<Mask>,
}

impl ParamMaps {
    pub fn constant(width: usize, height: usize, p: &SkinParams) -> Self {
        let v = p.to_array();
        ParamMaps { width, height, planes: v.map(|x| vec![x; width * height]), mask: None }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m.data[i])
    }

    pub fn texel(&self, i: usize) -> SkinParams {
        SkinParams::from_array(std::array::from_fn(|a| self.planes[a][i]))
    }

    pub fn set_texel(&mut self, i: usize, p: &SkinParams) {
        for (a, v) in p.to_array().into_iter().enumerate() {
            self.planes[a][i] = v;
        }
    }

    /// Checks plane sizes and that every valid texel lies within `warp`.
    pub fn validate(&self, warp: &ParamWarp) -> Result<()> {
        let n = self.len();
        if self.planes.iter().any(|p| p.len() != n) {
            return Err(Error::Invariant("parameter planes differ in size".into()));
        }
        if let Some(m) = &self.mask {
            m.check_dims(self.width, self.height)?;
        }
        for i in (0..n).filter(|&i| self.is_valid(i)) {
            warp.check(&self.texel(i))
                .map_err(|e| Error::Invariant(format!("texel ({}, {}): {e}", i % self.width, i / self.width)))?;
        }
        Ok(())
    }
}

/// Albedo → parameter strategy.
pub enum Inverter<'a> {
    Lut(&'a AlbedoLut),
    Neural { encoder: &'a Mlp, warp: ParamWarp },
}

/// Parameter → albedo strategy.
pub enum Renderer<'a> {
    Lut(&'a AlbedoLut),
    Neural { decoder: &'a Mlp, warp: ParamWarp },
}

fn check_net(net: &Mlp, input: usize, output: usize, role: &str) -> Result<()> {
    if net.input_dim() != input || net.output_dim() != output {
        return Err(Error::Config(format!(
            "{role} maps {} -> {}, expected {input} -> {output}",
            net.input_dim(),
            net.output_dim()
        )));
    }
    Ok(())
}

/// Inverts every skin texel of `image`; texels outside `mask` are skipped.
pub fn invert_map(image: &RgbImage, mask: Option<&Mask>, inverter: &Inverter) -> Result<ParamMaps> {
    if let Some(m) = mask {
        m.check_dims(image.width, image.height)?;
    }
    if let Inverter::Neural { encoder, .. } = inverter {
        check_net(encoder, 3, AXES, "encoder")?;
    }
    let valid = |i: usize| mask.is_none_or(|m| m.data[i]);
    let tiles: Vec<Vec<[f64; AXES]>> = image
        .pixels
        .par_chunks(TILE)
        .enumerate()
        .map(|(t, px)| {
            let base = t * TILE;
            match inverter {
                Inverter::Lut(lut) => px
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        if valid(base + k) {
                            lut.invert(&RgbAlbedo::from_array(*c)).to_array()
                        } else {
                            [0.0; AXES]
                        }
                    })
                    .collect(),
                Inverter::Neural { encoder, warp } => {
                    let x = Array2::from_shape_fn((px.len(), 3), |(i, c)| px[i][c]);
                    let u = encoder.forward(x.view());
                    (0..px.len())
                        .map(|k| {
                            if valid(base + k) {
                                let ui = std::array::from_fn(|a| u[[k, a]]);
                                warp.warp_unchecked(&ui).to_array()
                            } else {
                                [0.0; AXES]
                            }
                        })
                        .collect()
                }
            }
        })
        .collect();
    let n = image.len();
    let mut planes: [Vec<f64>; AXES] = std::array::from_fn(|_| Vec::with_capacity(n));
    for v in tiles.iter().flatten() {
        for a in 0..AXES {
            planes[a].push(v[a]);
        }
    }
    Ok(ParamMaps { width: image.width, height: image.height, planes, mask: mask.cloned() })
}

/// Renders albedo for every valid texel. Invalid texels are copied from
/// `passthrough` when given, black otherwise.
pub fn reconstruct_map(pm: &ParamMaps, renderer: &Renderer, passthrough: Option<&RgbImage>) -> Result<RgbImage> {
    let warp = match renderer {
        Renderer::Lut(lut) => *lut.warp(),
        Renderer::Neural { decoder, warp } => {
            check_net(decoder, AXES, 3, "decoder")?;
            *warp
        }
    };
    pm.validate(&warp)?;
    if let Some(p) = passthrough {
        if (p.width, p.height) != (pm.width, pm.height) {
            return Err(Error::Invariant("passthrough image size differs from the parameter maps".into()));
        }
    }
    let n = pm.len();
    let starts: Vec<usize> = (0..n).step_by(TILE).collect();
    let tiles: Vec<Vec<[f64; 3]>> = starts
        .par_iter()
        .map(|&s| {
            let e = (s + TILE).min(n);
            let units: Vec<[f64; AXES]> = (s..e)
                .map(|i| match (pm.is_valid(i), renderer) {
                    (false, _) => [0.0; AXES],
                    (true, Renderer::Lut(lut)) => lut.unit_of(&pm.texel(i)).unwrap(),
                    (true, _) => warp.unwarp_params(&pm.texel(i)).unwrap(),
                })
                .collect();
            let rgb: Vec<[f64; 3]> = match renderer {
                Renderer::Lut(lut) => units.iter().map(|u| lut.lookup_unit(u).to_array()).collect(),
                Renderer::Neural { decoder, .. } => {
                    let x = Array2::from_shape_fn((units.len(), AXES), |(i, a)| units[i][a]);
                    let y = decoder.forward(x.view());
                    (0..units.len()).map(|k| [y[[k, 0]], y[[k, 1]], y[[k, 2]]]).collect()
                }
            };
            (s..e)
                .zip(rgb)
                .map(|(i, c)| {
                    if pm.is_valid(i) {
                        c
                    } else {
                        passthrough.map_or([0.0; 3], |p| p.pixels[i])
                    }
                })
                .collect()
        })
        .collect();
    RgbImage::new(pm.width, pm.height, tiles.into_iter().flatten().collect())
}
