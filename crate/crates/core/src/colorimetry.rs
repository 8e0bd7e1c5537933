//! Spectral reflectance to CIE XYZ and linear sRGB.
//!
//! Tristimulus values use the CIE 1931 2° observer and a midpoint rule on
//! the 10 nm grid, normalized so a perfect reflector has Y = 1. The linear
//! RGB transform is built from the sRGB primaries and the white point of
//! the active illuminant, so a unit reflector maps to (1, 1, 1) for D65 or
//! any illuminant loaded from file.

use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::optics::data::{embedded, parse_table, resample_to_grid};
use crate::optics::{SkinParams, SpectralCurve, WavelengthGrid, BANDS};
use crate::transport::{simulate_spectrum, SimConfig};

/// Clamping larger than this is reported on [`RgbConversion`].
pub const CLAMP_REPORT_THRESHOLD: f64 = 1e-3;

/// Channel overshoot tolerated silently before clamping.
pub const CHANNEL_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct ColorMatching {
    pub x_bar: SpectralCurve,
    pub y_bar: SpectralCurve,
    pub z_bar: SpectralCurve,
}

impl ColorMatching {
    pub fn cie1931() -> &'static ColorMatching {
        static CMF: OnceLock<ColorMatching> = OnceLock::new();
        CMF.get_or_init(|| {
            let name = "cie1931_2deg.csv";
            let (wl, cols) = parse_table(embedded(name), 3, name).expect("embedded CMF table");
            let curve = |i: usize| resample_to_grid(&wl, &cols[i], name).expect("embedded CMF table");
            ColorMatching {
                x_bar: curve(0),
                y_bar: curve(1),
                z_bar: curve(2),
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Illuminant {
    pub name: String,
    pub power: SpectralCurve,
}

impl Illuminant {
    pub fn d65() -> Illuminant {
        static D65: OnceLock<SpectralCurve> = OnceLock::new();
        let power = *D65.get_or_init(|| {
            let name = "d65.csv";
            let (wl, cols) = parse_table(embedded(name), 1, name).expect("embedded D65 table");
            resample_to_grid(&wl, &cols[0], name).expect("embedded D65 table")
        });
        Illuminant {
            name: "D65".into(),
            power,
        }
    }

    /// Reads a `wavelength_nm,power` CSV covering 380-780 nm.
    pub fn from_csv(path: &Path) -> Result<Illuminant> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let origin = path.display().to_string();
        let (wl, cols) = parse_table(&text, 1, &origin)?;
        let power = resample_to_grid(&wl, &cols[0], &origin)?;
        Illuminant::new(origin, power)
    }

    pub fn new(name: impl Into<String>, power: SpectralCurve) -> Result<Illuminant> {
        if power.iter().any(|v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Data("illuminant power must be finite and non-negative".into()));
        }
        if power.iter().all(|v| v == 0.0) {
            return Err(Error::Data("illuminant power is identically zero".into()));
        }
        Ok(Illuminant {
            name: name.into(),
            power,
        })
    }

    /// `d65` or `file:<path>`.
    pub fn from_spec(spec: &str) -> Result<Illuminant> {
        match spec {
            "d65" | "D65" => Ok(Illuminant::d65()),
            s => match s.strip_prefix("file:") {
                Some(path) => Illuminant::from_csv(Path::new(path)),
                None => Err(Error::Config(format!("unknown illuminant {s:?} (use d65 or file:<path>)"))),
            },
        }
    }
}

impl Default for Illuminant {
    fn default() -> Self {
        Illuminant::d65()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Xyz {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Xyz {
    pub fn scale(self, k: f64) -> Xyz {
        Xyz {
            x: self.x * k,
            y: self.y * k,
            z: self.z * k,
        }
    }
}

/// Linear-light sRGB reflectance, each channel in [0, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RgbAlbedo {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl RgbAlbedo {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        RgbAlbedo { r, g, b }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        RgbAlbedo::new(a[0], a[1], a[2])
    }

    /// Relative luminance of linear sRGB.
    pub fn luminance(self) -> f64 {
        0.2126 * self.r + 0.7152 * self.g + 0.0722 * self.b
    }
}

/// Result of mapping XYZ to RGB, with the clamping that was applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgbConversion {
    pub rgb: RgbAlbedo,
    /// Largest distance any channel was moved by clamping.
    pub max_clamp: f64,
    /// Set when `max_clamp` exceeds [`CLAMP_REPORT_THRESHOLD`].
    pub clamped: bool,
}

/// Integration weights and the XYZ → linear sRGB matrix for one illuminant.
#[derive(Clone, Debug)]
pub struct ColorSpace {
    illuminant: Illuminant,
    /// Normalization making Y = 1 for a unit reflector.
    k: f64,
    white: Xyz,
    xyz_to_rgb: [[f64; 3]; 3],
}

/// sRGB primary chromaticities (x, y).
const SRGB_PRIMARIES: [(f64, f64); 3] = [(0.64, 0.33), (0.30, 0.60), (0.15, 0.06)];

impl ColorSpace {
    pub fn new(illuminant: &Illuminant) -> ColorSpace {
        let cmf = ColorMatching::cie1931();
        let dl = WavelengthGrid::STEP_NM;
        let y_sum: f64 = (0..BANDS).map(|b| illuminant.power[b] * cmf.y_bar[b] * dl).sum();
        let mut space = ColorSpace {
            illuminant: illuminant.clone(),
            k: 1.0 / y_sum,
            white: Xyz::default(),
            xyz_to_rgb: [[0.0; 3]; 3],
        };
        space.white = space.integrate(&SpectralCurve::constant(1.0));

        // Columns are the XYZ of each primary, scaled so they sum to white.
        let mut p = [[0.0; 3]; 3];
        for (c, (x, y)) in SRGB_PRIMARIES.iter().enumerate() {
            p[0][c] = x / y;
            p[1][c] = 1.0;
            p[2][c] = (1.0 - x - y) / y;
        }
        let p_inv = invert3(&p);
        let w = [space.white.x, space.white.y, space.white.z];
        let s = mul3v(&p_inv, &w);
        let mut rgb_to_xyz = p;
        for row in rgb_to_xyz.iter_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v *= s[c];
            }
        }
        space.xyz_to_rgb = invert3(&rgb_to_xyz);
        space
    }

    pub fn srgb_d65() -> &'static ColorSpace {
        static SPACE: OnceLock<ColorSpace> = OnceLock::new();
        SPACE.get_or_init(|| ColorSpace::new(&Illuminant::d65()))
    }

    pub fn illuminant(&self) -> &Illuminant {
        &self.illuminant
    }

    /// XYZ of a perfect reflector under this illuminant.
    pub fn white(&self) -> Xyz {
        self.white
    }

    pub fn xyz_to_rgb_matrix(&self) -> [[f64; 3]; 3] {
        self.xyz_to_rgb
    }

    fn integrate(&self, r: &SpectralCurve) -> Xyz {
        let cmf = ColorMatching::cie1931();
        let dl = WavelengthGrid::STEP_NM;
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for b in 0..BANDS {
            let e = r[b] * self.illuminant.power[b] * dl;
            x += e * cmf.x_bar[b];
            y += e * cmf.y_bar[b];
            z += e * cmf.z_bar[b];
        }
        Xyz { x, y, z }.scale(self.k)
    }

    pub fn spectrum_to_xyz(&self, r: &SpectralCurve) -> Xyz {
        self.integrate(r)
    }

    /// The linear map without clamping.
    pub fn xyz_to_rgb_unclamped(&self, xyz: Xyz) -> [f64; 3] {
        mul3v(&self.xyz_to_rgb, &[xyz.x, xyz.y, xyz.z])
    }

    pub fn xyz_to_linear_rgb(&self, xyz: Xyz) -> RgbConversion {
        let raw = self.xyz_to_rgb_unclamped(xyz);
        let mut max_clamp: f64 = 0.0;
        let clamped = raw.map(|v| {
            let c = if v < 0.0 {
                0.0
            } else if v > 1.0 {
                1.0
            } else {
                v
            };
            // Overshoot within CHANNEL_EPSILON above 1 is rounding, not a gamut miss.
            let moved = if v > 1.0 { (v - 1.0 - CHANNEL_EPSILON).max(0.0) } else { (c - v).abs() };
            max_clamp = max_clamp.max(moved);
            c
        });
        RgbConversion {
            rgb: RgbAlbedo::from_array(clamped),
            max_clamp,
            clamped: max_clamp > CLAMP_REPORT_THRESHOLD,
        }
    }
}

/// Midpoint-rule tristimulus values of `r` under `ill`, Y normalized to 1
/// for a unit reflector.
pub fn spectrum_to_xyz(r: &SpectralCurve, ill: &Illuminant) -> Xyz {
    if ill.power == Illuminant::d65().power {
        ColorSpace::srgb_d65().spectrum_to_xyz(r)
    } else {
        ColorSpace::new(ill).spectrum_to_xyz(r)
    }
}

/// Linear sRGB (D65 white) for an XYZ triple.
pub fn xyz_to_linear_rgb(xyz: Xyz) -> RgbConversion {
    ColorSpace::srgb_d65().xyz_to_linear_rgb(xyz)
}

/// Simulated spectrum → XYZ → linear RGB for one skin point.
pub fn albedo_rgb(p: &SkinParams, cfg: &SimConfig, ill: &Illuminant) -> Result<RgbAlbedo> {
    let spectrum = simulate_spectrum(p, cfg)?;
    Ok(spectrum_to_rgb(&spectrum.reflectance, &ColorSpace::new(ill)).rgb)
}

pub fn spectrum_to_rgb(r: &SpectralCurve, space: &ColorSpace) -> RgbConversion {
    space.xyz_to_linear_rgb(space.spectrum_to_xyz(r))
}

fn mul3v(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 1, 2, 2), -c(1, 0, 2, 2), c(1, 0, 2, 1)],
        [-c(0, 1, 2, 2), c(0, 0, 2, 2), -c(0, 0, 2, 1)],
        [c(0, 1, 1, 2), -c(0, 0, 1, 2), c(0, 0, 1, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cof[j][i] / det;
        }
    }
    inv
}
