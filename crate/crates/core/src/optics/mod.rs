//! Chromophore data and the spectral optical properties of a two-layer skin.
//!
//! Absorption is built additively from chromophores: melanins (eumelanin
//! and pheomelanin power laws) and carotene in the epidermis; oxy- and
//! deoxy-haemoglobin, bilirubin and carotene carried by blood in the
//! dermis; and a wavelength-dependent baseline for bloodless, melanin-free
//! tissue. Scattering follows a Rayleigh + Mie power-law fit for the reduced
//! coefficient, combined with a linear spectral anisotropy shared by both
//! layers.
//!
//! All wavelengths are in nanometres and all coefficients in cm⁻¹.

pub mod data;

use std::ops::Index;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of bands on the visible simulation grid.
pub const BANDS: usize = 41;

/// The fixed visible grid: 380 to 780 nm in 10 nm steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WavelengthGrid;

impl WavelengthGrid {
    pub const MIN_NM: f64 = 380.0;
    pub const MAX_NM: f64 = 780.0;
    pub const STEP_NM: f64 = 10.0;
    pub const COUNT: usize = BANDS;

    pub fn wavelength(band: usize) -> f64 {
        debug_assert!(band < BANDS);
        Self::MIN_NM + Self::STEP_NM * band as f64
    }

    /// Band index of a wavelength that lies exactly on the grid.
    pub fn band_of(nm: f64) -> Result<usize> {
        let pos = (nm - Self::MIN_NM) / Self::STEP_NM;
        if !pos.is_finite() || pos < 0.0 || pos.fract() != 0.0 || pos as usize >= BANDS {
            return Err(Error::OffGrid(nm));
        }
        Ok(pos as usize)
    }

    pub fn wavelengths() -> impl ExactSizeIterator<Item = f64> {
        (0..BANDS).map(Self::wavelength)
    }
}

/// A quantity sampled once per grid band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralCurve([f64; BANDS]);

impl SpectralCurve {
    pub const fn new(values: [f64; BANDS]) -> Self {
        SpectralCurve(values)
    }

    pub fn constant(value: f64) -> Self {
        SpectralCurve([value; BANDS])
    }

    /// Builds a curve from `f(band, wavelength_nm)`.
    pub fn from_fn(mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut v = [0.0; BANDS];
        for (band, slot) in v.iter_mut().enumerate() {
            *slot = f(band, WavelengthGrid::wavelength(band));
        }
        SpectralCurve(v)
    }

    pub fn try_from_fn(mut f: impl FnMut(usize, f64) -> Result<f64>) -> Result<Self> {
        let mut v = [0.0; BANDS];
        for (band, slot) in v.iter_mut().enumerate() {
            *slot = f(band, WavelengthGrid::wavelength(band))?;
        }
        Ok(SpectralCurve(v))
    }

    pub fn values(&self) -> &[f64; BANDS] {
        &self.0
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SpectralCurve(self.0.map(f))
    }

    /// Value at a wavelength that must lie on the grid.
    pub fn at(&self, nm: f64) -> Result<f64> {
        Ok(self.0[WavelengthGrid::band_of(nm)?])
    }
}

impl Index<usize> for SpectralCurve {
    type Output = f64;

    fn index(&self, band: usize) -> &f64 {
        &self.0[band]
    }
}

/// A point in the 5D biophysical skin space.
///
/// `hemoglobin_ratio` weights the *deoxygenated* haemoglobin term, so 0 is
/// fully oxygenated blood and 1 fully deoxygenated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkinParams {
    /// Melanosome volume fraction of the epidermis, V_m.
    pub melanin: f64,
    /// Blood volume fraction of the dermis, V_b.
    pub blood: f64,
    /// Epidermal thickness in micrometres.
    pub thickness_um: f64,
    /// Eumelanin fraction of total melanin, φ_m.
    pub melanin_ratio: f64,
    /// Deoxygenated fraction of haemoglobin, φ_h.
    pub hemoglobin_ratio: f64,
}

impl SkinParams {
    pub const fn new(
        melanin: f64,
        blood: f64,
        thickness_um: f64,
        melanin_ratio: f64,
        hemoglobin_ratio: f64,
    ) -> Self {
        SkinParams {
            melanin,
            blood,
            thickness_um,
            melanin_ratio,
            hemoglobin_ratio,
        }
    }

    /// Axis order `(V_m, V_b, t, φ_m, φ_h)`.
    pub fn to_array(self) -> [f64; 5] {
        [
            self.melanin,
            self.blood,
            self.thickness_um,
            self.melanin_ratio,
            self.hemoglobin_ratio,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        SkinParams::new(a[0], a[1], a[2], a[3], a[4])
    }

    /// Physical sanity only: fractions in [0, 1] and a positive thickness.
    /// The narrower production ranges are enforced by the parameter space.
    pub fn check_physical(&self) -> Result<()> {
        let fractions = [
            ("melanin", self.melanin),
            ("blood", self.blood),
            ("melanin_ratio", self.melanin_ratio),
            ("hemoglobin_ratio", self.hemoglobin_ratio),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} = {v} is not a fraction in [0, 1]")));
            }
        }
        if !(self.thickness_um.is_finite() && self.thickness_um > 0.0) {
            return Err(Error::Domain(format!(
                "epidermal thickness {} um must be positive",
                self.thickness_um
            )));
        }
        Ok(())
    }
}

/// A chromophore with a tabulated molar extinction spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct ChromophoreSpec {
    pub name: &'static str,
    /// Concentration p_c in g/L.
    pub concentration: f64,
    /// Molar weight w_c in g/mol.
    pub molar_weight: f64,
    /// Molar extinction ε_c in cm⁻¹/(mol/L), base-10.
    pub extinction: SpectralCurve,
}

/// `coefficient · λ^exponent` with λ in nm, giving cm⁻¹.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub const EUMELANIN: PowerLaw = PowerLaw {
        coefficient: 6.6e11,
        exponent: -3.33,
    };
    pub const PHEOMELANIN: PowerLaw = PowerLaw {
        coefficient: 2.9e15,
        exponent: -4.75,
    };
    pub const BASELINE: PowerLaw = PowerLaw {
        coefficient: 7.84e8,
        exponent: -3.255,
    };

    pub fn eval(&self, nm: f64) -> Result<f64> {
        if !(nm.is_finite() && nm > 0.0) {
            return Err(Error::Domain(format!("wavelength {nm} nm must be positive")));
        }
        Ok(self.coefficient * nm.powf(self.exponent))
    }
}

/// Converts base-10 molar extinction to a natural-log absorption coefficient.
pub const LN_10: f64 = 2.303;

pub const HEMOGLOBIN_CONCENTRATION: f64 = 150.0;
pub const HEMOGLOBIN_MOLAR_WEIGHT: f64 = 64500.0;
pub const BILIRUBIN_CONCENTRATION: f64 = 0.05;
pub const BILIRUBIN_MOLAR_WEIGHT: f64 = 584.66;
pub const CAROTENE_CONCENTRATION_EPIDERMIS: f64 = 2.1e-4;
pub const CAROTENE_CONCENTRATION_DERMIS: f64 = 7e-5;
pub const CAROTENE_MOLAR_WEIGHT: f64 = 536.8726;

/// Combined refractive index of both layers.
pub const SKIN_REFRACTIVE_INDEX: f64 = 1.4;

/// The tabulated chromophores of the model.
#[derive(Clone, Debug)]
pub struct Chromophores {
    pub oxyhemoglobin: ChromophoreSpec,
    pub deoxyhemoglobin: ChromophoreSpec,
    pub bilirubin: ChromophoreSpec,
    pub carotene_epidermis: ChromophoreSpec,
    pub carotene_dermis: ChromophoreSpec,
}

impl Chromophores {
    /// Loads the embedded tables.
    pub fn load() -> Result<Self> {
        let carotene = data::embedded_curve("beta_carotene.csv")?;
        let spec = |name, concentration, molar_weight, extinction| ChromophoreSpec {
            name,
            concentration,
            molar_weight,
            extinction,
        };
        Ok(Chromophores {
            oxyhemoglobin: spec(
                "oxyhemoglobin",
                HEMOGLOBIN_CONCENTRATION,
                HEMOGLOBIN_MOLAR_WEIGHT,
                data::embedded_curve("hbo2.csv")?,
            ),
            deoxyhemoglobin: spec(
                "deoxyhemoglobin",
                HEMOGLOBIN_CONCENTRATION,
                HEMOGLOBIN_MOLAR_WEIGHT,
                data::embedded_curve("hb.csv")?,
            ),
            bilirubin: spec(
                "bilirubin",
                BILIRUBIN_CONCENTRATION,
                BILIRUBIN_MOLAR_WEIGHT,
                data::embedded_curve("bilirubin.csv")?,
            ),
            carotene_epidermis: spec(
                "beta-carotene (epidermis)",
                CAROTENE_CONCENTRATION_EPIDERMIS,
                CAROTENE_MOLAR_WEIGHT,
                carotene,
            ),
            carotene_dermis: spec(
                "beta-carotene (dermis)",
                CAROTENE_CONCENTRATION_DERMIS,
                CAROTENE_MOLAR_WEIGHT,
                carotene,
            ),
        })
    }

    /// Shared instance built from the embedded tables.
    pub fn standard() -> &'static Chromophores {
        static TABLES: OnceLock<Chromophores> = OnceLock::new();
        TABLES.get_or_init(|| Chromophores::load().expect("embedded chromophore tables are valid"))
    }
}

/// `2.303 · p_c · ε_c(λ) / w_c`; the caller applies the volume fraction.
pub fn chromophore_absorption(spec: &ChromophoreSpec, nm: f64) -> Result<f64> {
    Ok(LN_10 * spec.concentration * spec.extinction.at(nm)? / spec.molar_weight)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MelaninKind {
    Eumelanin,
    Pheomelanin,
}

pub fn melanin_absorption(kind: MelaninKind, nm: f64) -> Result<f64> {
    match kind {
        MelaninKind::Eumelanin => PowerLaw::EUMELANIN.eval(nm),
        MelaninKind::Pheomelanin => PowerLaw::PHEOMELANIN.eval(nm),
    }
}

pub fn baseline_absorption(nm: f64) -> Result<f64> {
    PowerLaw::BASELINE.eval(nm)
}

pub fn epidermis_absorption(p: &SkinParams, nm: f64) -> Result<f64> {
    p.check_physical()?;
    let tables = Chromophores::standard();
    let eu = melanin_absorption(MelaninKind::Eumelanin, nm)?;
    let ph = melanin_absorption(MelaninKind::Pheomelanin, nm)?;
    let carotene = chromophore_absorption(&tables.carotene_epidermis, nm)?;
    let base = baseline_absorption(nm)?;
    let melanin = p.melanin_ratio * eu + (1.0 - p.melanin_ratio) * ph;
    Ok(p.melanin * melanin + (1.0 - p.melanin) * (carotene + base))
}

pub fn dermis_absorption(p: &SkinParams, nm: f64) -> Result<f64> {
    p.check_physical()?;
    let tables = Chromophores::standard();
    let hb = chromophore_absorption(&tables.deoxyhemoglobin, nm)?;
    let hbo2 = chromophore_absorption(&tables.oxyhemoglobin, nm)?;
    let bilirubin = chromophore_absorption(&tables.bilirubin, nm)?;
    let carotene = chromophore_absorption(&tables.carotene_dermis, nm)?;
    let base = baseline_absorption(nm)?;
    let blood = p.hemoglobin_ratio * hb + (1.0 - p.hemoglobin_ratio) * hbo2 + bilirubin + carotene;
    Ok(p.blood * blood + (1.0 - p.blood) * base)
}

/// Reduced scattering fit `a((λ/λr)^-4 f_Ray + (1 - f_Ray)(λ/λr)^-b_Mie)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatteringFit {
    /// μs′ at the reference wavelength, cm⁻¹.
    pub a: f64,
    pub f_ray: f64,
    pub b_mie: f64,
    pub lambda_ref_nm: f64,
}

impl Default for ScatteringFit {
    fn default() -> Self {
        ScatteringFit {
            a: 36.4,
            f_ray: 0.48,
            b_mie: 0.22,
            lambda_ref_nm: 500.0,
        }
    }
}

pub fn reduced_scattering(fit: &ScatteringFit, nm: f64) -> f64 {
    let x = nm / fit.lambda_ref_nm;
    fit.a * (fit.f_ray * x.powi(-4) + (1.0 - fit.f_ray) * x.powf(-fit.b_mie))
}

/// Mean scattering cosine, identical for epidermis and dermis.
pub fn anisotropy(nm: f64) -> f64 {
    0.62 + nm * 0.29e-3
}

/// Spectral optical properties of one homogeneous layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerOptics {
    pub mu_a: SpectralCurve,
    /// Un-reduced scattering coefficient μs = μs′ / (1 - g).
    pub mu_s: SpectralCurve,
    pub g: SpectralCurve,
    pub n: f64,
    /// `None` for a semi-infinite layer.
    pub thickness_um: Option<f64>,
}

impl LayerOptics {
    /// A layer with the shared scattering model and the given absorption.
    pub fn with_absorption(mu_a: SpectralCurve, thickness_um: Option<f64>) -> Self {
        let fit = ScatteringFit::default();
        let g = SpectralCurve::from_fn(|_, nm| anisotropy(nm));
        let mu_s = SpectralCurve::from_fn(|band, nm| reduced_scattering(&fit, nm) / (1.0 - g[band]));
        LayerOptics {
            mu_a,
            mu_s,
            g,
            n: SKIN_REFRACTIVE_INDEX,
            thickness_um,
        }
    }
}

/// Epidermis (finite, thickness `p.thickness_um`) and dermis (semi-infinite).
pub fn layer_optics(p: &SkinParams) -> Result<(LayerOptics, LayerOptics)> {
    p.check_physical()?;
    let epi = SpectralCurve::try_from_fn(|_, nm| epidermis_absorption(p, nm))?;
    let derm = SpectralCurve::try_from_fn(|_, nm| dermis_absorption(p, nm))?;
    Ok((
        LayerOptics::with_absorption(epi, Some(p.thickness_um)),
        LayerOptics::with_absorption(derm, None),
    ))
}
