use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{halton_point, AlbedoLut, ParamWarp, UnitPoint};
use crate::colorimetry::{spectrum_to_rgb, ColorSpace, Illuminant, RgbAlbedo};
use crate::error::{Error, Result};
use crate::optics::SkinParams;
use crate::transport::{simulate_spectrum, SimConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Split> {
        match tag {
            0 => Some(Split::Train),
            1 => Some(Split::Val),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record {
    pub u: UnitPoint,
    pub p: SkinParams,
    pub albedo: RgbAlbedo,
    pub split: Split,
}

/// How training points are drawn. Validation points always come from a
/// seeded uniform sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampler {
    /// Halton points starting at index 1.
    Halton,
    Uniform { seed: u64 },
}

pub enum AlbedoSource<'a> {
    /// Full spectral simulation per record.
    MonteCarlo {
        cfg: SimConfig,
        illuminant: Illuminant,
        warp: ParamWarp,
    },
    /// Multilinear lookup in a prebuilt table.
    LutInterp(&'a AlbedoLut),
}

impl AlbedoSource<'_> {
    fn warp(&self) -> ParamWarp {
        match self {
            AlbedoSource::MonteCarlo { warp, .. } => *warp,
            AlbedoSource::LutInterp(lut) => *lut.warp(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            AlbedoSource::MonteCarlo { .. } => "monte_carlo",
            AlbedoSource::LutInterp(_) => "lut_interp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    /// Warp relating each record's `u` to its `p`.
    pub warp: ParamWarp,
    pub provenance: Vec<(String, String)>,
}

impl Dataset {
    /// Checks that albedos lie in [0, 1]^3, `u` in the unit cube and
    /// `p == warp(u)` exactly.
    pub fn new(records: Vec<Record>, warp: ParamWarp, provenance: Vec<(String, String)>) -> Result<Self> {
        warp.validate()?;
        for (i, r) in records.iter().enumerate() {
            if r.albedo.to_array().iter().any(|c| !(c.is_finite() && (0.0..=1.0).contains(c))) {
                return Err(Error::Invariant(format!("record {i} albedo {:?} outside [0, 1]^3", r.albedo)));
            }
            if r.u.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::Invariant(format!("record {i} u {:?} outside the unit cube", r.u)));
            }
            if warp.warp_unchecked(&r.u) != r.p {
                return Err(Error::Invariant(format!("record {i}: p is not warp(u)")));
            }
        }
        Ok(Dataset { records, warp, provenance })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, which: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == which)
    }

    pub fn count(&self, which: Split) -> usize {
        self.split(which).count()
    }
}

/// Number of validation records for a dataset of `n`.
pub fn val_count(n: usize) -> usize {
    n / 5
}

/// Seed of the validation sampler derived from the run seed.
fn val_seed(sampler: &Sampler, seed: u64) -> u64 {
    match sampler {
        Sampler::Halton => seed ^ 0x0005_eed0_f7a1,
        Sampler::Uniform { seed: s } => s.wrapping_add(1) ^ 0x0005_eed0_f7a1,
    }
}

/// Generates `n` records: 80% training points from `sampler`, 20%
/// validation points from a uniform sampler seeded by `seed`.
pub fn gen_dataset(n: usize, source: &AlbedoSource, sampler: &Sampler, seed: u64) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let n_val = val_count(n);
    let n_train = n - n_val;
    let mut points: Vec<(UnitPoint, Split)> = Vec::with_capacity(n);
    match sampler {
        Sampler::Halton => {
            for i in 0..n_train {
                points.push((halton_point(i as u64 + 1)?, Split::Train));
            }
        }
        Sampler::Uniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for _ in 0..n_train {
                points.push((std::array::from_fn(|_| rng.random::<f64>()), Split::Train));
            }
        }
    }
    let vseed = val_seed(sampler, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(vseed);
    for _ in 0..n_val {
        points.push((std::array::from_fn(|_| rng.random::<f64>()), Split::Val));
    }

    let warp = source.warp();
    let records = match source {
        AlbedoSource::LutInterp(lut) => points
            .par_iter()
            .map(|(u, split)| Record { u: *u, p: warp.warp_unchecked(u), albedo: lut.lookup_unit(u), split: *split })
            .collect(),
        AlbedoSource::MonteCarlo { cfg, illuminant, .. } => {
            let space = ColorSpace::new(illuminant);
            points
                .par_iter()
                .map(|(u, split)| {
                    let p = warp.warp_unchecked(u);
                    let s = simulate_spectrum(&p, cfg)?;
                    Ok(Record { u: *u, p, albedo: spectrum_to_rgb(&s.reflectance, &space).rgb, split: *split })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let sampler_name = match sampler {
        Sampler::Halton => "halton".to_string(),
        Sampler::Uniform { seed } => format!("uniform:{seed}"),
    };
    let provenance = vec![
        ("source".into(), source.name().into()),
        ("sampler".into(), sampler_name),
        ("val_seed".into(), vseed.to_string()),
        ("train".into(), n_train.to_string()),
        ("val".into(), n_val.to_string()),
    ];
    Dataset::new(records, warp, provenance)
}
