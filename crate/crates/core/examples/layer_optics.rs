//! Per-layer absorption, scattering and anisotropy for one skin sample.

use dermalight::optics::{anisotropy, layer_optics, melanin_absorption, MelaninKind};
use dermalight::{SkinParams, WavelengthGrid};

fn main() -> dermalight::Result<()> {
    let p = SkinParams::new(0.05, 0.05, 100.0, 0.5, 0.5);
    let (epi, derm) = layer_optics(&p)?;
    println!("{:>6} {:>12} {:>12} {:>12} {:>12} {:>6}", "nm", "epi mu_a", "epi mu_s", "derm mu_a", "derm mu_s", "g");
    for band in (0..dermalight::BANDS).step_by(5) {
        let nm = WavelengthGrid::wavelength(band);
        println!(
            "{nm:>6.0} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>6.3}",
            epi.mu_a[band], epi.mu_s[band], derm.mu_a[band], derm.mu_s[band], derm.g[band]
        );
    }
    println!("eumelanin at 380 nm: {:.1} cm^-1", melanin_absorption(MelaninKind::Eumelanin, 380.0)?);
    println!("pheomelanin at 380 nm: {:.1} cm^-1", melanin_absorption(MelaninKind::Pheomelanin, 380.0)?);
    println!("g at 380 nm: {:.4}", anisotropy(380.0));
    Ok(())
}
