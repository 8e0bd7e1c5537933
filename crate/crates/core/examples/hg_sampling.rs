//! Draws 2D Henyey-Greenstein angles and compares a histogram with the density.

use std::f64::consts::PI;

use dermalight::transport::{hg2d_density, sample_hg2d_rng};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dermalight::Result<()> {
    let bins = 16;
    let n = 200_000;
    for g in [0.0, 0.5, 0.78] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = vec![0usize; bins];
        for _ in 0..n {
            let t = sample_hg2d_rng(g, &mut rng)?;
            counts[(((t + PI) / (2.0 * PI) * bins as f64) as usize).min(bins - 1)] += 1;
        }
        println!("g = {g}");
        for (i, c) in counts.iter().enumerate() {
            let mid = -PI + (i as f64 + 0.5) * 2.0 * PI / bins as f64;
            let expected = hg2d_density(g, mid) * 2.0 * PI / bins as f64;
            println!("  {mid:+.3} rad  observed {:.4}  density {:.4}", *c as f64 / n as f64, expected);
        }
    }
    Ok(())
}
