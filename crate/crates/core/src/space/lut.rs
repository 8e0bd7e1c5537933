use rayon::prelude::*;

use super::{ParamWarp, UnitPoint, AXES};
use crate::colorimetry::{spectrum_to_rgb, ColorSpace, Illuminant, RgbAlbedo};
use crate::error::{Error, Result};
use crate::optics::SkinParams;
use crate::transport::{simulate_spectrum, SimConfig};

/// Precomputed albedos on a regular grid in warped space.
///
/// Stored values are rounded to `f32` at build time so a saved and reloaded
/// table is identical to the one in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct AlbedoLut {
    resolutions: [usize; AXES],
    warp: ParamWarp,
    values: Vec<RgbAlbedo>,
    /// Free-form build provenance (simulation settings, illuminant).
    pub provenance: Vec<(String, String)>,
}

pub fn build_lut(resolutions: [usize; AXES], cfg: &SimConfig) -> Result<AlbedoLut> {
    build_lut_with(resolutions, cfg, &ParamWarp::default(), &Illuminant::d65())
}

pub fn build_lut_with(
    resolutions: [usize; AXES],
    cfg: &SimConfig,
    warp: &ParamWarp,
    illuminant: &Illuminant,
) -> Result<AlbedoLut> {
    check_resolutions(&resolutions)?;
    warp.validate()?;
    cfg.validate()?;
    let space = ColorSpace::new(illuminant);
    let total: usize = resolutions.iter().product();
    let values = (0..total)
        .into_par_iter()
        .map(|flat| {
            let u = node_unit(&resolutions, flat);
            let p = warp.warp_unchecked(&u);
            let s = simulate_spectrum(&p, cfg).map_err(|e| {
                Error::Simulation(format!("LUT node {:?} (u = {u:?}): {e}", node_index(&resolutions, flat)))
            })?;
            Ok(quantize(spectrum_to_rgb(&s.reflectance, &space).rgb))
        })
        .collect::<Result<Vec<_>>>()?;
    let provenance = vec![
        ("photons_per_band".into(), cfg.photons_per_band.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("roulette_threshold".into(), cfg.roulette_threshold.to_string()),
        ("roulette_survival".into(), cfg.roulette_survival.to_string()),
        ("fresnel_exit".into(), cfg.fresnel_exit.to_string()),
        ("max_events".into(), cfg.max_events.to_string()),
        ("illuminant".into(), illuminant.name.clone()),
    ];
    let lut = AlbedoLut::from_parts(resolutions, *warp, values, provenance)?;
    let dups = lut.duplicate_nodes();
    if !dups.is_empty() {
        log::warn!("{} LUT nodes share an albedo with a lower-index node; inversion returns the lowest", dups.len());
    }
    Ok(lut)
}

fn check_resolutions(res: &[usize; AXES]) -> Result<()> {
    if let Some(r) = res.iter().find(|&&r| r < 2) {
        return Err(Error::Config(format!("LUT resolution {r} < 2 (resolutions {res:?})")));
    }
    Ok(())
}

fn quantize(a: RgbAlbedo) -> RgbAlbedo {
    RgbAlbedo::from_array(a.to_array().map(|v| v as f32 as f64))
}

fn node_index(res: &[usize; AXES], mut flat: usize) -> [usize; AXES] {
    let mut idx = [0; AXES];
    for a in (0..AXES).rev() {
        idx[a] = flat % res[a];
        flat /= res[a];
    }
    idx
}

fn node_unit(res: &[usize; AXES], flat: usize) -> UnitPoint {
    let idx = node_index(res, flat);
    std::array::from_fn(|a| idx[a] as f64 / (res[a] - 1) as f64)
}

impl AlbedoLut {
    /// Assembles a table, checking counts and value ranges.
    pub fn from_parts(
        resolutions: [usize; AXES],
        warp: ParamWarp,
        values: Vec<RgbAlbedo>,
        provenance: Vec<(String, String)>,
    ) -> Result<Self> {
        check_resolutions(&resolutions)?;
        warp.validate()?;
        let total: usize = resolutions.iter().product();
        if values.len() != total {
            return Err(Error::Invariant(format!(
                "LUT holds {} values but resolutions {resolutions:?} need {total}",
                values.len()
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|v| v.to_array().iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(Error::Invariant(format!("LUT value {i} = {:?} outside [0, 1]^3", values[i])));
        }
        Ok(AlbedoLut { resolutions, warp, values, provenance })
    }

    pub fn resolutions(&self) -> [usize; AXES] {
        self.resolutions
    }

    pub fn warp(&self) -> &ParamWarp {
        &self.warp
    }

    pub fn values(&self) -> &[RgbAlbedo] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node_unit(&self, flat: usize) -> UnitPoint {
        node_unit(&self.resolutions, flat)
    }

    pub fn node_params(&self, flat: usize) -> SkinParams {
        self.warp.warp_unchecked(&self.node_unit(flat))
    }

    /// Multilinear interpolation in warped coordinates. Coordinates outside
    /// the unit cube are clamped.
    pub fn lookup_unit(&self, u: &UnitPoint) -> RgbAlbedo {
        let mut lo = [0usize; AXES];
        let mut frac = [0.0; AXES];
        for a in 0..AXES {
            let cells = (self.resolutions[a] - 1) as f64;
            let x = u[a].clamp(0.0, 1.0) * cells;
            let i = (x.floor() as usize).min(self.resolutions[a] - 2);
            lo[a] = i;
            frac[a] = x - i as f64;
        }
        let mut acc = [0.0; 3];
        for corner in 0..(1usize << AXES) {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..AXES {
                let bit = (corner >> (AXES - 1 - a)) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * self.resolutions[a] + lo[a] + bit;
            }
            if w == 0.0 {
                continue;
            }
            let v = self.values[flat];
            acc[0] += w * v.r;
            acc[1] += w * v.g;
            acc[2] += w * v.b;
        }
        RgbAlbedo::from_array(acc)
    }

    /// Interpolated albedo at physical parameters `p`, which must lie
    /// within the table's ranges.
    pub fn lookup(&self, p: &SkinParams) -> Result<RgbAlbedo> {
        Ok(self.lookup_unit(&self.unit_of(p)?))
    }

    /// Unit coordinates of `p`. Values within single-precision rounding of
    /// a node value snap to that node, so parameters read back from f32
    /// maps address the node they were written from.
    pub fn unit_of(&self, p: &SkinParams) -> Result<UnitPoint> {
        let mut u = self.warp.unwarp_params(p)?;
        let v = p.to_array();
        for a in 0..AXES {
            let res = self.resolutions[a];
            let w = self.warp.axes[a];
            for j in 0..res {
                let uj = j as f64 / (res - 1) as f64;
                let node = w.warp(uj);
                if (v[a] - node).abs() <= f32::EPSILON as f64 * node.abs() {
                    u[a] = uj;
                    break;
                }
            }
        }
        Ok(u)
    }

    /// Flat index of the node nearest to `albedo` in L2, lowest index on ties.
    pub fn nearest_node(&self, albedo: &RgbAlbedo) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, v) in self.values.iter().enumerate() {
            let d = (v.r - albedo.r).powi(2) + (v.g - albedo.g).powi(2) + (v.b - albedo.b).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Exhaustive L2 inversion: the parameters of the nearest node.
    pub fn invert(&self, albedo: &RgbAlbedo) -> SkinParams {
        self.node_params(self.nearest_node(albedo))
    }

    /// Nodes whose albedo exactly equals that of a lower-index node.
    pub fn duplicate_nodes(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        let key = |i: usize| self.values[i].to_array().map(f64::to_bits);
        order.sort_by_key(|&i| (key(i), i));
        order
            .windows(2)
            .filter(|w| key(w[0]) == key(w[1]))
            .map(|w| w[1])
            .collect()
    }

    /// Largest change of any channel between neighbouring nodes.
    pub fn max_node_delta(&self) -> f64 {
        let mut max: f64 = 0.0;
        let mut stride = 1;
        for a in (0..AXES).rev() {
            for flat in 0..self.values.len() {
                let idx = node_index(&self.resolutions, flat);
                if idx[a] + 1 < self.resolutions[a] {
                    let (p, q) = (self.values[flat], self.values[flat + stride]);
                    max = max.max((p.r - q.r).abs()).max((p.g - q.g).abs()).max((p.b - q.b).abs());
                }
            }
            stride *= self.resolutions[a];
        }
        max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(res: [usize; AXES]) -> AlbedoLut {
        let total = res.iter().product();
        let values = (0..total)
            .map(|f| {
                let u = node_unit(&res, f);
                quantize(RgbAlbedo::new(
                    0.8 - 0.5 * u[0] - 0.1 * u[1],
                    0.6 - 0.4 * u[0] + 0.05 * u[2] + 0.02 * u[3],
                    0.5 - 0.3 * u[1] + 0.1 * u[4],
                ))
            })
            .collect();
        AlbedoLut::from_parts(res, ParamWarp::default(), values, vec![]).unwrap()
    }

    #[test]
    fn node_layout_is_row_major() {
        let res = [2, 3, 2, 2, 4];
        assert_eq!(node_index(&res, 1), [0, 0, 0, 0, 1]);
        assert_eq!(node_index(&res, 4), [0, 0, 0, 1, 0]);
        assert_eq!(node_index(&res, 47), [0, 2, 1, 1, 3]);
        assert_eq!(node_unit(&res, 47)[1], 1.0);
    }

    #[test]
    fn lookup_hits_nodes_and_midpoints() {
        let lut = synthetic([3, 3, 2, 2, 2]);
        for flat in 0..lut.len() {
            assert_eq!(lut.lookup_unit(&lut.node_unit(flat)), lut.values()[flat]);
            let p = lut.node_params(flat);
            let v = lut.lookup(&p).unwrap();
            for (a, b) in v.to_array().iter().zip(lut.values()[flat].to_array()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let a = lut.values()[0].to_array();
        let b = lut.values()[24].to_array();
        let mid = lut.lookup_unit(&[0.25, 0.0, 0.0, 0.0, 0.0]).to_array();
        for c in 0..3 {
            assert!((mid[c] - 0.5 * (a[c] + b[c])).abs() < 1e-12);
        }
    }

    #[test]
    fn invert_recovers_nodes() {
        let lut = synthetic([3, 3, 2, 2, 2]);
        assert!(lut.duplicate_nodes().is_empty());
        for flat in 0..lut.len() {
            assert_eq!(lut.nearest_node(&lut.values()[flat]), flat);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let res = [2; AXES];
        let values = vec![RgbAlbedo::new(0.5, 0.5, 0.5); 32];
        let lut = AlbedoLut::from_parts(res, ParamWarp::default(), values, vec![]).unwrap();
        assert_eq!(lut.nearest_node(&RgbAlbedo::new(0.5, 0.5, 0.5)), 0);
        assert_eq!(lut.duplicate_nodes().len(), 31);
    }

    #[test]
    fn rejects_bad_parts() {
        let w = ParamWarp::default();
        assert!(AlbedoLut::from_parts([1, 2, 2, 2, 2], w, vec![], vec![]).is_err());
        assert!(AlbedoLut::from_parts([2; 5], w, vec![RgbAlbedo::default(); 31], vec![]).is_err());
        let mut v = vec![RgbAlbedo::default(); 32];
        v[3].g = 1.5;
        assert!(AlbedoLut::from_parts([2; 5], w, v, vec![]).is_err());
    }
}
