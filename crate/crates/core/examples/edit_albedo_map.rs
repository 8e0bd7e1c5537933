//! Inverts a small albedo map to parameter maps, applies an edit preset and
//! renders the result, reporting the round-trip error.

use dermalight::formats::{save_param_maps, write_image, PngDepth};
use dermalight::mapops::*;
use dermalight::space::{build_lut, ParamWarp};
use dermalight::transport::SimConfig;

fn main() -> dermalight::Result<()> {
    let lut = build_lut([3, 3, 2, 2, 2], &SimConfig::with_photons(300, 1))?;
    let warp = ParamWarp::default();

    // A 12x8 texture of table node colors.
    let (w, h) = (12, 8);
    let px = (0..w * h).map(|i| lut.values()[(i * 7) % lut.len()].to_array()).collect();
    let image = RgbImage::new(w, h, px)?;

    let maps = invert_map(&image, None, &Inverter::Lut(&lut))?;
    let recon = reconstruct_map(&maps, &Renderer::Lut(&lut), None)?;
    println!("round trip mse {:.3e}", error_metrics(&image, &recon, None, 1.0)?.mse);

    let (edited, report) = edit(&maps, &preset("tan", None, &warp)?, &warp)?;
    let tanned = reconstruct_map(&edited, &Renderer::Lut(&lut), None)?;
    let m = error_metrics(&image, &tanned, None, 4.0)?;
    println!("tan preset: {} clamped values, mse vs original {:.3e}", report.clamped, m.mse);

    let dir = std::env::temp_dir().join("dermalight_edit_example");
    std::fs::create_dir_all(&dir).map_err(|e| dermalight::Error::Io { path: dir.clone(), source: e })?;
    save_param_maps(&dir.join("maps"), &edited, &warp)?;
    write_image(&dir.join("tanned.png"), &tanned, PngDepth::Sixteen)?;
    write_image(&dir.join("error.png"), &m.abs_error, PngDepth::Eight)?;
    println!("wrote {}", dir.display());
    Ok(())
}
