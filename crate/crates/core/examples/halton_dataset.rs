//! Halton versus uniform sampling of the warped parameter space, and a
//! table-interpolated training set.

use dermalight::colorimetry::RgbAlbedo;
use dermalight::space::*;

fn main() -> dermalight::Result<()> {
    let n = 1024;
    let halton: Vec<UnitPoint> = (1..=n as u64).map(halton_point).collect::<dermalight::Result<_>>()?;
    println!("L2-star discrepancy, {n} points: halton {:.3e}, uniform {:.3e}", l2_star_discrepancy(&halton), l2_star_discrepancy(&uniform_points(n, 1)));

    for u in halton.iter().take(4) {
        let p = warp_params(u)?;
        println!("u {:.3?} -> melanin {:.4} blood {:.4} t {:.1} um", u, p.melanin, p.blood, p.thickness_um);
    }

    // A toy table: albedo darkens with melanin and blood.
    let res = [3, 3, 2, 2, 2];
    let total: usize = res.iter().product();
    let values = (0..total)
        .map(|i| {
            let (m, b) = ((i / 24) as f32 / 2.0, ((i / 8) % 3) as f32 / 2.0);
            RgbAlbedo::new((0.7 - 0.5 * m) as f64, (0.6 - 0.3 * m - 0.3 * b) as f64, (0.5 - 0.4 * m) as f64)
        })
        .collect();
    let lut = AlbedoLut::from_parts(res, ParamWarp::default(), values, Vec::new())?;
    let ds = gen_dataset(2_000, &AlbedoSource::LutInterp(&lut), &Sampler::Halton, 3)?;
    println!("dataset: {} records, {} train, {} val", ds.len(), ds.count(Split::Train), ds.count(Split::Val));
    Ok(())
}
