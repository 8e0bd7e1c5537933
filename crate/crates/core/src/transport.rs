//! 2D Monte Carlo random walk through epidermis over a semi-infinite dermis.
//!
//! Photons start just below the surface with a cosine-weighted direction
//! around the inward normal and carry a weight that is reduced by the
//! single-scattering albedo at every interaction (implicit capture), with
//! Russian roulette once it falls below a threshold. Free paths are
//! exponential in the optical depth of the current layer; crossing the
//! epidermis/dermis junction only switches coefficients, carrying the
//! remaining optical depth across. At the top surface the weight is split
//! by unpolarized Fresnel reflectance for a 1.4 → 1.0 interface: the
//! transmitted part is tallied as reflectance, the rest is mirrored back.
//!
//! Randomness is counter-based: every photon owns a ChaCha stream keyed by
//! `(seed, band, photon index)` and consumes it from the start. Results are therefore independent of how photons
//! are scheduled across threads, and per-band sums are reduced over fixed
//! chunks in a fixed order.

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optics::{layer_optics, LayerOptics, SkinParams, SpectralCurve, BANDS};

/// Photons per reduction chunk. Fixed, so sums do not depend on threading.
const CHUNK: u64 = 4096;

const UM_TO_CM: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub photons_per_band: u64,
    /// Weight below which Russian roulette is played.
    pub roulette_threshold: f64,
    /// Survival probability of a roulette round.
    pub roulette_survival: f64,
    pub seed: u64,
    /// Split weight by Fresnel reflectance at the top surface. When off,
    /// every photon reaching the surface leaves with its full weight.
    pub fresnel_exit: bool,
    /// Hard cap on interactions per photon. Only reachable in (nearly)
    /// non-absorbing media, where return times are heavy tailed; weight
    /// still in flight at the cap is reported as truncated.
    pub max_events: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            photons_per_band: 1_000_000,
            roulette_threshold: 1e-4,
            roulette_survival: 0.1,
            seed: 0,
            fresnel_exit: true,
            max_events: 200_000,
        }
    }
}

impl SimConfig {
    pub fn with_photons(photons_per_band: u64, seed: u64) -> Self {
        SimConfig {
            photons_per_band,
            seed,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.photons_per_band < 1 {
            return Err(Error::Config("photons_per_band must be at least 1".into()));
        }
        if !(self.roulette_survival > 0.0 && self.roulette_survival < 1.0) {
            return Err(Error::Config(format!(
                "roulette_survival {} must lie in (0, 1)",
                self.roulette_survival
            )));
        }
        if !(self.roulette_threshold > 0.0 && self.roulette_threshold < 1.0) {
            return Err(Error::Config(format!(
                "roulette_threshold {} must lie in (0, 1)",
                self.roulette_threshold
            )));
        }
        if self.max_events < 1 {
            return Err(Error::Config("max_events must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Epidermis,
    Dermis,
}

/// Position (cm, `z` is depth and positive inside the tissue), unit
/// direction, weight and current layer of a photon packet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonState {
    pub x: f64,
    pub z: f64,
    pub dx: f64,
    pub dz: f64,
    pub weight: f64,
    pub layer: Layer,
}

/// Coefficients of one layer at one band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandCoefficients {
    pub mu_a: f64,
    pub mu_s: f64,
    pub g: f64,
}

impl BandCoefficients {
    fn mu_t(&self) -> f64 {
        self.mu_a + self.mu_s
    }
}

/// The two-layer medium at a single band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandMedium {
    pub epidermis: BandCoefficients,
    pub dermis: BandCoefficients,
    pub thickness_cm: f64,
    pub n: f64,
}

impl BandMedium {
    pub fn new(epidermis: BandCoefficients, dermis: BandCoefficients, thickness_um: f64, n: f64) -> Result<Self> {
        for (name, c) in [("epidermis", epidermis), ("dermis", dermis)] {
            let ok = c.mu_a.is_finite()
                && c.mu_a >= 0.0
                && c.mu_s.is_finite()
                && c.mu_s > 0.0
                && (0.0..1.0).contains(&c.g);
            if !ok {
                return Err(Error::Simulation(format!("invalid {name} optics {c:?}")));
            }
        }
        if !(thickness_um.is_finite() && thickness_um >= 0.0) || !(n.is_finite() && n >= 1.0) {
            return Err(Error::Simulation(format!(
                "invalid geometry: thickness {thickness_um} um, n {n}"
            )));
        }
        Ok(BandMedium {
            epidermis,
            dermis,
            thickness_cm: thickness_um * UM_TO_CM,
            n,
        })
    }

    pub fn from_layers(epidermis: &LayerOptics, dermis: &LayerOptics, band: usize) -> Result<Self> {
        let at = |l: &LayerOptics| BandCoefficients {
            mu_a: l.mu_a[band],
            mu_s: l.mu_s[band],
            g: l.g[band],
        };
        let thickness = epidermis
            .thickness_um
            .ok_or_else(|| Error::Simulation("epidermis must have a finite thickness".into()))?;
        if dermis.thickness_um.is_some() {
            return Err(Error::Simulation("dermis must be semi-infinite".into()));
        }
        BandMedium::new(at(epidermis), at(dermis), thickness, epidermis.n)
    }

}

/// Where the launched weight of one photon ended up. The four tallies sum
/// to 1 up to rounding: roulette kills count positive, roulette survivals
/// (which inflate the weight) count negative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhotonOutcome {
    pub exit_weight: f64,
    pub absorbed: f64,
    pub roulette_net: f64,
    pub truncated: f64,
    pub events: u64,
}

/// Uniform draw on the open interval (0, 1).
#[inline]
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Cosine and sine of a 2D Henyey-Greenstein deflection, `k = (1-g)/(1+g)`.
///
/// The density inverts to `tan(θ/2) = k · tan φ` with `φ` uniform on
/// (-π/2, π/2). A point `(a, b)` uniform in the right half of the unit disk
/// has `tan φ = b/a`, so cos θ and sin θ follow rationally. Each attempt
/// uses one 64-bit draw and succeeds with probability π/4.
#[inline]
fn hg2d_rotation(k: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 32) as f64;
    loop {
        let r = rng.next_u64();
        let a = ((r >> 32) as f64 + 0.5) * SCALE;
        let b = ((r & 0xffff_ffff) as f64 + 0.5) * (2.0 * SCALE) - 1.0;
        if a * a + b * b < 1.0 {
            let kb = k * b;
            let inv = 1.0 / (a * a + kb * kb);
            return ((a * a - kb * kb) * inv, 2.0 * a * kb * inv);
        }
    }
}

/// Deflection angle drawn by the rejection sampler the tracer uses.
pub fn sample_hg2d_rng(g: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if !(0.0..1.0).contains(&g) {
        return Err(Error::Domain(format!("anisotropy g = {g} must lie in [0, 1)")));
    }
    let (c, s) = hg2d_rotation((1.0 - g) / (1.0 + g), rng);
    Ok(s.atan2(c))
}

/// Deflection angle in (-π, π] drawn from the 2D Henyey-Greenstein density.
pub fn sample_hg2d(g: f64, u: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&g) {
        return Err(Error::Domain(format!("anisotropy g = {g} must lie in [0, 1)")));
    }
    let theta = 2.0 * ((1.0 - g) / (1.0 + g) * (PI * (u - 0.5)).tan()).atan();
    Ok(if theta <= -PI { PI } else { theta })
}

/// The 2D Henyey-Greenstein density, normalized over (-π, π].
pub fn hg2d_density(g: f64, theta: f64) -> f64 {
    (1.0 - g * g) / (2.0 * PI * (1.0 + g * g - 2.0 * g * theta.cos()))
}

/// Initial direction `(dx, dz)` into the tissue with density ∝ cos of the
/// angle to the inward normal. For `u` in (0, 1) the depth component is
/// strictly positive.
pub fn sample_lambertian_entry(u: f64) -> (f64, f64) {
    let s = 2.0 * u - 1.0;
    (s, (1.0 - s * s).max(0.0).sqrt())
}

/// Unpolarized Fresnel reflectance for light inside a medium of index `n`
/// hitting an interface to vacuum with incidence cosine `cos_i`.
pub fn fresnel_exit_reflectance(n: f64, cos_i: f64) -> f64 {
    let sin_t2 = n * n * (1.0 - cos_i * cos_i);
    if sin_t2 >= 1.0 {
        return 1.0;
    }
    let cos_t = (1.0 - sin_t2).sqrt();
    let rs = (n * cos_i - cos_t) / (n * cos_i + cos_t);
    let rp = (n * cos_t - cos_i) / (n * cos_t + cos_i);
    0.5 * (rs * rs + rp * rp)
}

fn photon_rng(base: &ChaCha8Rng, band: usize, photon_id: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(((band as u64) << 40) | photon_id);
    rng.set_word_pos(0);
    rng
}

fn base_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-layer constants hoisted out of the event loop.
#[derive(Clone, Copy)]
struct LayerConsts {
    mu_t: f64,
    inv_mu_t: f64,
    absorb: f64,
    albedo: f64,
    /// `(1 - g) / (1 + g)` of the half-angle HG inversion.
    hg_k: f64,
}

impl LayerConsts {
    fn new(c: &BandCoefficients) -> Self {
        let mu_t = c.mu_t();
        LayerConsts {
            mu_t,
            inv_mu_t: 1.0 / mu_t,
            absorb: c.mu_a / mu_t,
            albedo: c.mu_s / mu_t,
            hg_k: (1.0 - c.g) / (1.0 + c.g),
        }
    }
}

/// Medium constants shared by every photon of a band.
struct Tracer<'a> {
    layers: [LayerConsts; 2],
    thickness: f64,
    n: f64,
    cfg: &'a SimConfig,
}

/// One photon in flight.
struct Walker {
    ph: PhotonState,
    out: PhotonOutcome,
    rng: ChaCha8Rng,
}

#[inline]
fn slot(layer: Layer) -> usize {
    match layer {
        Layer::Epidermis => 0,
        Layer::Dermis => 1,
    }
}

impl<'a> Tracer<'a> {
    fn new(medium: &BandMedium, cfg: &'a SimConfig) -> Self {
        Tracer {
            layers: [LayerConsts::new(&medium.epidermis), LayerConsts::new(&medium.dermis)],
            thickness: medium.thickness_cm,
            n: medium.n,
            cfg,
        }
    }

    fn launch(&self, mut rng: ChaCha8Rng) -> Walker {
        let (dx, dz) = sample_lambertian_entry(open_unit(&mut rng));
        let layer = if self.thickness > 0.0 { Layer::Epidermis } else { Layer::Dermis };
        Walker {
            ph: PhotonState { x: 0.0, z: 0.0, dx, dz, weight: 1.0, layer },
            out: PhotonOutcome::default(),
            rng,
        }
    }

    /// Plays Russian roulette; false when the photon is terminated.
    #[inline]
    fn roulette(&self, w: &mut Walker) -> bool {
        let cfg = self.cfg;
        if w.ph.weight >= cfg.roulette_threshold {
            return true;
        }
        if w.ph.weight == 0.0 {
            return false;
        }
        if open_unit(&mut w.rng) < cfg.roulette_survival {
            let boosted = w.ph.weight / cfg.roulette_survival;
            w.out.roulette_net -= boosted - w.ph.weight;
            w.ph.weight = boosted;
            true
        } else {
            w.out.roulette_net += w.ph.weight;
            w.ph.weight = 0.0;
            false
        }
    }

    /// Moves the photon to its next interaction and scatters it. Returns
    /// true once the photon has left, been absorbed, lost a roulette round,
    /// or hit the event cap.
    #[inline(always)]
    fn advance(&self, w: &mut Walker) -> bool {
        let t = self.thickness;
        let mut c = &self.layers[slot(w.ph.layer)];
        let mut depth: f64 = Exp1.sample(&mut w.rng);

        // Move through boundaries until the optical depth is spent.
        loop {
            let ph = &mut w.ph;
            let step = depth * c.inv_mu_t;
            let z_end = ph.z + step * ph.dz;
            let crossing = match ph.layer {
                Layer::Epidermis => z_end < 0.0 || z_end > t,
                Layer::Dermis => z_end < t,
            };
            if !crossing {
                ph.x += step * ph.dx;
                ph.z = z_end;
                break;
            }
            let (boundary, top) = if ph.dz < 0.0 {
                match ph.layer {
                    Layer::Epidermis => (0.0, true),
                    Layer::Dermis => (t, t == 0.0),
                }
            } else {
                (t, false)
            };
            let to_boundary = (boundary - ph.z) / ph.dz;
            ph.x += to_boundary * ph.dx;
            depth -= to_boundary * c.mu_t;
            ph.z = boundary;
            if top {
                let r = if self.cfg.fresnel_exit {
                    fresnel_exit_reflectance(self.n, -ph.dz)
                } else {
                    0.0
                };
                w.out.exit_weight += ph.weight * (1.0 - r);
                ph.weight *= r;
                ph.dz = -ph.dz;
                if !self.roulette(w) {
                    return true;
                }
            } else {
                ph.layer = match ph.layer {
                    Layer::Epidermis => Layer::Dermis,
                    Layer::Dermis => Layer::Epidermis,
                };
                c = &self.layers[slot(ph.layer)];
            }
        }

        w.out.events += 1;
        if w.out.events > self.cfg.max_events {
            w.out.truncated += w.ph.weight;
            return true;
        }
        w.out.absorbed += w.ph.weight * c.absorb;
        w.ph.weight *= c.albedo;

        let (cos, sin) = hg2d_rotation(c.hg_k, &mut w.rng);
        let ph = &mut w.ph;
        let (dx, dz) = (ph.dx * cos - ph.dz * sin, ph.dx * sin + ph.dz * cos);
        let fix = 0.5 * (3.0 - (dx * dx + dz * dz));
        ph.dx = dx * fix;
        ph.dz = dz * fix;

        !self.roulette(w)
    }
}

/// Follows one photon until it has left, been absorbed, lost a roulette
/// round, or hit the event cap.
pub fn trace_in_medium(medium: &BandMedium, rng: &mut ChaCha8Rng, cfg: &SimConfig) -> PhotonOutcome {
    let tracer = Tracer::new(medium, cfg);
    let mut w = tracer.launch(rng.clone());
    while !tracer.advance(&mut w) {}
    *rng = w.rng;
    w.out
}

/// Exit weight of photon `photon_id` at `band`, keyed by `cfg.seed`.
pub fn trace_photon(
    layers: (&LayerOptics, &LayerOptics),
    band: usize,
    photon_id: u64,
    cfg: &SimConfig,
) -> Result<f64> {
    check_band(band)?;
    let medium = BandMedium::from_layers(layers.0, layers.1, band)?;
    let mut rng = photon_rng(&base_rng(cfg.seed), band, photon_id);
    Ok(trace_in_medium(&medium, &mut rng, cfg).exit_weight)
}

fn check_band(band: usize) -> Result<()> {
    if band >= BANDS {
        return Err(Error::Domain(format!("band index {band} out of range")));
    }
    Ok(())
}

/// Mean diffuse reflectance and its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reflectance {
    pub mean: f64,
    /// Standard error of the mean; 0 for a single photon.
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    sum: f64,
    sum_sq: f64,
}

/// Photons advanced in lockstep. Their dependency chains are independent,
/// so interleaving them keeps the pipeline busy.
const LANES: usize = 4;

fn chunk_tally(medium: &BandMedium, base: &ChaCha8Rng, band: usize, range: std::ops::Range<u64>, cfg: &SimConfig) -> Tally {
    let tracer = Tracer::new(medium, cfg);
    let start = range.start;
    let mut exits = vec![0.0; (range.end - range.start) as usize];
    let mut pending = range;
    let mut lanes: [Option<(u64, Walker)>; LANES] = Default::default();
    for lane in &mut lanes {
        *lane = pending.next().map(|id| (id, tracer.launch(photon_rng(base, band, id))));
    }
    while lanes.iter().any(Option::is_some) {
        for lane in &mut lanes {
            let Some((id, w)) = lane else { continue };
            if tracer.advance(w) {
                exits[(*id - start) as usize] = w.out.exit_weight;
                *lane = pending.next().map(|id| (id, tracer.launch(photon_rng(base, band, id))));
            }
        }
    }
    // Summed in photon order, so the result does not depend on LANES.
    let mut tally = Tally::default();
    for w in exits {
        tally.sum += w;
        tally.sum_sq += w * w;
    }
    tally
}

fn finish(tallies: &[Tally], n: u64) -> Reflectance {
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for t in tallies {
        sum += t.sum;
        sum_sq += t.sum_sq;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let stderr = if n > 1 {
        ((sum_sq - nf * mean * mean).max(0.0) / (nf * (nf - 1.0))).sqrt()
    } else {
        0.0
    };
    Reflectance { mean, stderr }
}

fn chunks(n: u64) -> impl Iterator<Item = std::ops::Range<u64>> + Clone {
    (0..n.div_ceil(CHUNK)).map(move |c| c * CHUNK..((c + 1) * CHUNK).min(n))
}

/// Reflectance of an explicit single-band medium.
pub fn simulate_medium(medium: &BandMedium, band: usize, cfg: &SimConfig) -> Result<Reflectance> {
    cfg.validate()?;
    check_band(band)?;
    let base = base_rng(cfg.seed);
    let ranges: Vec<_> = chunks(cfg.photons_per_band).collect();
    let tallies: Vec<Tally> = ranges
        .into_par_iter()
        .map(|r| chunk_tally(medium, &base, band, r, cfg))
        .collect();
    Ok(finish(&tallies, cfg.photons_per_band))
}

/// Reflectance of skin `p` at one band.
pub fn simulate_reflectance(p: &SkinParams, band: usize, cfg: &SimConfig) -> Result<Reflectance> {
    check_band(band)?;
    let (epi, derm) = layer_optics(p)?;
    simulate_medium(&BandMedium::from_layers(&epi, &derm, band)?, band, cfg)
}

/// Reflectance spectrum with per-band standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumEstimate {
    pub reflectance: SpectralCurve,
    pub stderr: SpectralCurve,
}

/// Spectrum for explicit layer optics; all bands and chunks run in parallel.
pub fn simulate_layers(epidermis: &LayerOptics, dermis: &LayerOptics, cfg: &SimConfig) -> Result<SpectrumEstimate> {
    cfg.validate()?;
    let media: Vec<BandMedium> = (0..BANDS)
        .map(|b| BandMedium::from_layers(epidermis, dermis, b))
        .collect::<Result<_>>()?;
    let base = base_rng(cfg.seed);
    let jobs: Vec<(usize, std::ops::Range<u64>)> = (0..BANDS)
        .flat_map(|b| chunks(cfg.photons_per_band).map(move |r| (b, r)))
        .collect();
    let tallies: Vec<Tally> = jobs
        .par_iter()
        .map(|(b, r)| chunk_tally(&media[*b], &base, *b, r.clone(), cfg))
        .collect();
    let per_band = tallies.len() / BANDS;
    let mut mean = [0.0; BANDS];
    let mut err = [0.0; BANDS];
    for b in 0..BANDS {
        let r = finish(&tallies[b * per_band..(b + 1) * per_band], cfg.photons_per_band);
        mean[b] = r.mean;
        err[b] = r.stderr;
    }
    Ok(SpectrumEstimate {
        reflectance: SpectralCurve::new(mean),
        stderr: SpectralCurve::new(err),
    })
}

pub fn simulate_spectrum(p: &SkinParams, cfg: &SimConfig) -> Result<SpectrumEstimate> {
    let (epi, derm) = layer_optics(p)?;
    simulate_layers(&epi, &derm, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn medium(mu_a: f64, mu_s: f64, g: f64, thickness_um: f64) -> BandMedium {
        let c = BandCoefficients { mu_a, mu_s, g };
        BandMedium::new(c, c, thickness_um, 1.4).unwrap()
    }

    #[test]
    fn hg2d_isotropic_limit_and_symmetry() {
        // g = 0 maps u linearly onto (-π, π).
        for u in [0.1, 0.25, 0.5, 0.9] {
            let th = sample_hg2d(0.0, u).unwrap();
            assert!((th - (2.0 * PI * u - PI)).abs() < 1e-12);
        }
        for g in [0.0, 0.3, 0.78, 0.95] {
            for th in [0.1, 1.0, 2.5, 3.0] {
                assert_eq!(hg2d_density(g, th), hg2d_density(g, -th));
            }
            // Sampler is odd around u = 1/2.
            for u in [0.05, 0.2, 0.4] {
                let a = sample_hg2d(g, u).unwrap();
                let b = sample_hg2d(g, 1.0 - u).unwrap();
                assert!((a + b).abs() < 1e-12);
            }
        }
        assert!(matches!(sample_hg2d(1.0, 0.3), Err(Error::Domain(_))));
        assert!(sample_hg2d(-0.1, 0.3).is_err());
        let th = sample_hg2d(0.5, 0.0).unwrap();
        assert!(th > -PI && th <= PI);
    }

    #[test]
    fn hg2d_rotation_is_unit_with_mean_cosine_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [0.0, 0.5, 0.8] {
            let k = (1.0 - g) / (1.0 + g);
            let n = 200_000;
            let mut sum = 0.0;
            for _ in 0..n {
                let (c, s) = hg2d_rotation(k, &mut rng);
                assert!((c * c + s * s - 1.0).abs() < 1e-12);
                sum += c;
            }
            // Var(cos θ) ≤ 1, so 5σ ≤ 5/√n.
            assert!((sum / n as f64 - g).abs() < 5.0 / (n as f64).sqrt(), "g={g}");
        }
    }

    #[test]
    fn lambertian_entry_points_inward() {
        for i in 1..1000 {
            let (dx, dz) = sample_lambertian_entry(i as f64 / 1000.0);
            assert!(dz > 0.0);
            assert!((dx * dx + dz * dz - 1.0).abs() < 1e-12);
        }
        let tiny = ((0u64 as f64) + 0.5) / (1u64 << 53) as f64;
        assert!(sample_lambertian_entry(tiny).1 > 0.0);
    }

    #[test]
    fn fresnel_limits() {
        // Normal incidence: ((n-1)/(n+1))².
        let r0 = fresnel_exit_reflectance(1.4, 1.0);
        assert!((r0 - (0.4f64 / 2.4).powi(2)).abs() < 1e-15);
        // Beyond the critical angle asin(1/1.4) the interface reflects totally.
        let crit = (1.0f64 / 1.4).asin();
        assert_eq!(fresnel_exit_reflectance(1.4, (crit + 0.01).cos()), 1.0);
        assert!(fresnel_exit_reflectance(1.4, (crit - 0.01).cos()) < 1.0);
        assert!(fresnel_exit_reflectance(1.0, 0.3) < 1e-30);
    }

    #[test]
    fn weight_is_conserved_per_photon() {
        let m = medium(2.0, 150.0, 0.8, 60.0);
        let cfg = SimConfig::with_photons(1, 7);
        let base = base_rng(7);
        for id in 0..2000 {
            let mut rng = photon_rng(&base, 10, id);
            let o = trace_in_medium(&m, &mut rng, &cfg);
            let total = o.exit_weight + o.absorbed + o.roulette_net + o.truncated;
            assert!((total - 1.0).abs() < 1e-9, "photon {id}: {o:?}");
            assert!((0.0..=1.0 + 1e-12).contains(&o.exit_weight));
        }
    }

    #[test]
    fn strong_absorption_kills_photons() {
        let m = medium(1e6, 150.0, 0.8, 60.0);
        let r = simulate_medium(&m, 17, &SimConfig::with_photons(20_000, 3)).unwrap();
        assert!(r.mean < 1e-3, "{r:?}");
    }

    #[test]
    fn fresnel_switch_off_raises_reflectance() {
        let m = medium(5.0, 150.0, 0.8, 60.0);
        let on = simulate_medium(&m, 17, &SimConfig::with_photons(20_000, 3)).unwrap();
        let off_cfg = SimConfig {
            fresnel_exit: false,
            ..SimConfig::with_photons(20_000, 3)
        };
        let off = simulate_medium(&m, 17, &off_cfg).unwrap();
        assert!(off.mean > on.mean + 3.0 * (on.stderr + off.stderr), "{on:?} {off:?}");
    }

    #[test]
    fn single_photon_is_reproducible() {
        let p = SkinParams::new(0.05, 0.05, 100.0, 0.5, 0.5);
        let cfg = SimConfig::with_photons(1, 99);
        let a = simulate_reflectance(&p, 12, &cfg).unwrap();
        let b = simulate_reflectance(&p, 12, &cfg).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr, 0.0);
        let (epi, derm) = layer_optics(&p).unwrap();
        assert_eq!(trace_photon((&epi, &derm), 12, 0, &cfg).unwrap(), a.mean);
    }

    #[test]
    fn invalid_inputs() {
        let bad = BandCoefficients {
            mu_a: f64::NAN,
            mu_s: 1.0,
            g: 0.5,
        };
        let ok = BandCoefficients {
            mu_a: 1.0,
            mu_s: 1.0,
            g: 0.5,
        };
        assert!(matches!(BandMedium::new(bad, ok, 10.0, 1.4), Err(Error::Simulation(_))));
        let cfg = SimConfig {
            roulette_survival: 1.0,
            ..SimConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let p = SkinParams::new(0.05, 0.05, 100.0, 0.5, 0.5);
        assert!(simulate_reflectance(&p, BANDS, &SimConfig::with_photons(10, 0)).is_err());
    }
}
