//! The warped 5D skin parameter space.
//!
//! Each axis maps a unit coordinate `u` to a physical value
//! `min + (max - min) · u^k`. Melanin uses `k = 3` and blood `k = 4` so that
//! equal steps in `u` give roughly equal steps in albedo; thickness and the
//! two type ratios are linear. Axis order is always
//! `(V_m, V_b, t, φ_m, φ_h)`.

mod dataset;
mod lut;

pub use dataset::{gen_dataset, AlbedoSource, Dataset, Record, Sampler, Split};
pub use lut::{build_lut, build_lut_with, AlbedoLut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optics::SkinParams;

pub const AXES: usize = 5;
pub const AXIS_NAMES: [&str; AXES] = ["melanin", "blood", "thickness", "melanin_ratio", "hemoglobin_ratio"];

/// A unit-cube coordinate in warped space.
pub type UnitPoint = [f64; AXES];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisWarp {
    pub min: f64,
    pub max: f64,
    pub exponent: u32,
}

impl AxisWarp {
    pub const fn new(min: f64, max: f64, exponent: u32) -> Self {
        AxisWarp { min, max, exponent }
    }

    pub fn warp(&self, u: f64) -> f64 {
        self.min + (self.max - self.min) * u.powi(self.exponent as i32)
    }

    pub fn unwarp(&self, v: f64) -> f64 {
        let s = ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0);
        match self.exponent {
            1 => s,
            k => s.powf(1.0 / k as f64),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

/// Per-axis warps of the parameter space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamWarp {
    pub axes: [AxisWarp; AXES],
}

impl Default for ParamWarp {
    /// Production ranges: fractions in [0.001, 1], thickness in [10, 250] µm.
    fn default() -> Self {
        ParamWarp {
            axes: [
                AxisWarp::new(0.001, 1.0, 3),
                AxisWarp::new(0.001, 1.0, 4),
                AxisWarp::new(10.0, 250.0, 1),
                AxisWarp::new(0.001, 1.0, 1),
                AxisWarp::new(0.001, 1.0, 1),
            ],
        }
    }
}

impl ParamWarp {
    pub fn validate(&self) -> Result<()> {
        for (name, a) in AXIS_NAMES.iter().zip(&self.axes) {
            if !(a.min < a.max && a.min.is_finite() && a.max.is_finite()) {
                return Err(Error::Invariant(format!("{name} axis has min {} >= max {}", a.min, a.max)));
            }
            if !matches!(a.exponent, 1 | 3 | 4) {
                return Err(Error::Invariant(format!("{name} axis exponent {} not in {{1, 3, 4}}", a.exponent)));
            }
        }
        Ok(())
    }

    pub fn warp_params(&self, u: &UnitPoint) -> Result<SkinParams> {
        if let Some(i) = u.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("{} coordinate {} outside [0, 1]", AXIS_NAMES[i], u[i])));
        }
        Ok(self.warp_unchecked(u))
    }

    pub(crate) fn warp_unchecked(&self, u: &UnitPoint) -> SkinParams {
        let mut v = [0.0; AXES];
        for i in 0..AXES {
            v[i] = self.axes[i].warp(u[i]);
        }
        SkinParams::from_array(v)
    }

    pub fn unwarp_params(&self, p: &SkinParams) -> Result<UnitPoint> {
        self.check(p)?;
        let v = p.to_array();
        Ok(std::array::from_fn(|i| self.axes[i].unwarp(v[i])))
    }

    /// Errors unless every axis lies within its range.
    pub fn check(&self, p: &SkinParams) -> Result<()> {
        let v = p.to_array();
        for i in 0..AXES {
            if !self.axes[i].contains(v[i]) {
                let a = self.axes[i];
                return Err(Error::Domain(format!(
                    "{} = {} outside [{}, {}]",
                    AXIS_NAMES[i], v[i], a.min, a.max
                )));
            }
        }
        Ok(())
    }

    /// Clamps every axis into range, returning how many axes moved.
    pub fn clamp(&self, p: &SkinParams) -> (SkinParams, usize) {
        let v = p.to_array();
        let mut moved = 0;
        let c = std::array::from_fn(|i| {
            let c = self.axes[i].clamp(v[i]);
            if c != v[i] {
                moved += 1;
            }
            c
        });
        (SkinParams::from_array(c), moved)
    }

    pub fn min_params(&self) -> SkinParams {
        SkinParams::from_array(self.axes.map(|a| a.min))
    }

    pub fn max_params(&self) -> SkinParams {
        SkinParams::from_array(self.axes.map(|a| a.max))
    }
}

pub fn warp_params(u: &UnitPoint) -> Result<SkinParams> {
    ParamWarp::default().warp_params(u)
}

pub fn unwarp_params(p: &SkinParams) -> Result<UnitPoint> {
    ParamWarp::default().unwarp_params(p)
}

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

const HALTON_BASES: [u64; AXES] = [2, 3, 5, 7, 11];

/// The `index`-th point (from 1) of the 5D Halton sequence.
pub fn halton_point(index: u64) -> Result<UnitPoint> {
    if index == 0 {
        return Err(Error::Domain("Halton indices start at 1".into()));
    }
    Ok(HALTON_BASES.map(|b| radical_inverse(b, index)))
}

/// Seeded uniform points in [0, 1)^5.
pub fn uniform_points(n: usize, seed: u64) -> Vec<UnitPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| std::array::from_fn(|_| rng.random::<f64>())).collect()
}

/// L2-star discrepancy of `points` (Warnock's closed form).
pub fn l2_star_discrepancy(points: &[UnitPoint]) -> f64 {
    let n = points.len() as f64;
    let d = AXES as i32;
    let first = 3f64.powi(-d);
    let mut single = 0.0;
    for p in points {
        single += p.iter().map(|x| (1.0 - x * x) / 2.0).product::<f64>();
    }
    let mut pair = 0.0;
    for a in points {
        for b in points {
            pair += a.iter().zip(b).map(|(x, y)| 1.0 - x.max(*y)).product::<f64>();
        }
    }
    (first - 2.0 / n * single + pair / (n * n)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warp_corners() {
        let w = ParamWarp::default();
        let top = w.warp_params(&[1.0; 5]).unwrap();
        assert_eq!(top, SkinParams::new(1.0, 1.0, 250.0, 1.0, 1.0));
        assert_eq!(w.warp_params(&[0.0; 5]).unwrap(), w.min_params());
        assert_eq!(w.unwarp_params(&w.min_params()).unwrap(), [0.0; 5]);
        let mid = w.unwarp_params(&w.warp_params(&[0.5; 5]).unwrap()).unwrap();
        for v in mid {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!(matches!(w.warp_params(&[0.5, 0.5, 1.2, 0.5, 0.5]), Err(Error::Domain(_))));
        assert!(w.unwarp_params(&SkinParams::new(0.5, 0.5, 5.0, 0.5, 0.5)).is_err());
    }

    #[test]
    fn blood_axis_sequence() {
        // Quartic warp restricted to [0.001, 0.30] at u = i/8, in percent.
        // Oracle values (exact rational arithmetic, rounded to 1e-4):
        let frozen = [0.1073, 0.2168, 0.6913, 1.9688, 4.6624, 9.5605, 17.6268, 30.0];
        let axis = AxisWarp::new(0.001, 0.30, 4);
        for (i, f) in frozen.iter().enumerate() {
            let pct = 100.0 * axis.warp((i + 1) as f64 / 8.0);
            assert!((pct - f).abs() < 6e-5, "i={} {pct}", i + 1);
        }
    }

    #[test]
    fn melanin_axis_sequence() {
        // Cubic warp on [0.002, 0.431] at u = i/8, in percent (exact arithmetic).
        let frozen = [0.2838, 0.8703, 2.4623, 5.5625, 10.6736, 18.2984, 28.9396, 43.1];
        let axis = AxisWarp::new(0.002, 0.431, 3);
        for (i, f) in frozen.iter().enumerate() {
            let pct = 100.0 * axis.warp((i + 1) as f64 / 8.0);
            assert!((pct - f).abs() < 6e-5, "i={} {pct}", i + 1);
        }
        // Reported melanin sweep: only these indices agree within 0.1 points.
        let reported = [0.2, 0.7, 2.3, 5.4, 10.6, 18.2, 29.9, 43.1];
        for i in [1usize, 5, 6, 8] {
            let pct = 100.0 * axis.warp(i as f64 / 8.0);
            assert!((pct - reported[i - 1]).abs() <= 0.1, "i={i} {pct}");
        }
    }

    #[test]
    fn halton_first_points() {
        let p = halton_point(1).unwrap();
        let expected = [0.5, 1.0 / 3.0, 0.2, 1.0 / 7.0, 1.0 / 11.0];
        for i in 0..AXES {
            assert!((p[i] - expected[i]).abs() < 1e-15);
        }
        assert_eq!(halton_point(2).unwrap()[0], 0.25);
        assert_eq!(halton_point(3).unwrap()[1], 1.0 / 9.0);
        assert!(halton_point(0).is_err());
    }

    #[test]
    fn clamp_counts_moves() {
        let w = ParamWarp::default();
        let (c, n) = w.clamp(&SkinParams::new(1.5, 0.5, 300.0, 0.0, 0.5));
        assert_eq!(n, 3);
        assert_eq!(c, SkinParams::new(1.0, 0.5, 250.0, 0.001, 0.5));
    }
}
