//! Monte Carlo spectral reflectance of a skin sample, integrated to RGB.

use dermalight::colorimetry::{spectrum_to_rgb, ColorSpace};
use dermalight::transport::{simulate_spectrum, SimConfig};
use dermalight::{SkinParams, WavelengthGrid};

fn main() -> dermalight::Result<()> {
    let photons = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let p = SkinParams::new(0.05, 0.05, 100.0, 0.5, 0.5);
    let est = simulate_spectrum(&p, &SimConfig::with_photons(photons, 42))?;
    for band in 0..dermalight::BANDS {
        println!(
            "{:.0} nm  R = {:.4} +- {:.4}",
            WavelengthGrid::wavelength(band),
            est.reflectance[band],
            est.stderr[band]
        );
    }
    let rgb = spectrum_to_rgb(&est.reflectance, ColorSpace::srgb_d65()).rgb;
    println!("linear sRGB albedo: {:.4} {:.4} {:.4}", rgb.r, rgb.g, rgb.b);

    let out = std::env::temp_dir().join("dermalight_spectrum.csv");
    dermalight::formats::write_spectrum_csv(&out, &est.reflectance, Some(&est.stderr))?;
    println!("wrote {}", out.display());
    Ok(())
}
