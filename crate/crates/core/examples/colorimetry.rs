//! Spectral integration under D65: flat reflectors and a red-leaning ramp.

use dermalight::colorimetry::{spectrum_to_rgb, ColorSpace};
use dermalight::SpectralCurve;

fn main() {
    let space = ColorSpace::srgb_d65();
    for level in [1.0, 0.5, 0.18] {
        let c = spectrum_to_rgb(&SpectralCurve::constant(level), space);
        println!("flat {level:.2}: rgb {:.4} {:.4} {:.4}  Y = {:.4}", c.rgb.r, c.rgb.g, c.rgb.b, c.rgb.luminance());
    }
    let ramp = SpectralCurve::from_fn(|_, nm| ((nm - 380.0) / 400.0).clamp(0.0, 1.0));
    let xyz = space.spectrum_to_xyz(&ramp);
    let c = space.xyz_to_linear_rgb(xyz);
    println!("ramp: xyz {:.4} {:.4} {:.4} -> rgb {:.4} {:.4} {:.4}", xyz.x, xyz.y, xyz.z, c.rgb.r, c.rgb.g, c.rgb.b);
}
