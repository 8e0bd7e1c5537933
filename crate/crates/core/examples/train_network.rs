//! Trains the encoder/decoder pair on a table-interpolated dataset.

use dermalight::colorimetry::RgbAlbedo;
use dermalight::neural::{train, TrainConfig};
use dermalight::space::{gen_dataset, AlbedoLut, AlbedoSource, ParamWarp, Sampler};

fn main() -> dermalight::Result<()> {
    let res = [4, 4, 2, 2, 2];
    let total: usize = res.iter().product();
    let values = (0..total)
        .map(|i| {
            let (m, b) = ((i / 32) as f64 / 3.0, ((i / 8) % 4) as f64 / 3.0);
            let c = [0.7 - 0.45 * m, 0.6 - 0.25 * m - 0.3 * b, 0.5 - 0.4 * m - 0.05 * b];
            RgbAlbedo::from_array(c.map(|v| v as f32 as f64))
        })
        .collect();
    let lut = AlbedoLut::from_parts(res, ParamWarp::default(), values, Vec::new())?;
    let ds = gen_dataset(8_000, &AlbedoSource::LutInterp(&lut), &Sampler::Halton, 1)?;

    let cfg = TrainConfig { epochs: 30, batch_size: 256, hidden_width: 32, learning_rate: 1e-3, ..TrainConfig::default() };
    let out = train(&ds, &cfg)?;
    for e in out.history.iter().step_by(5) {
        println!(
            "epoch {:>3}: train {:.4}  val {:.4} (param {:.4}, albedo {:.4}, cycle {:.4})",
            e.epoch, e.train.total, e.val.total, e.val.param, e.val.albedo, e.val.cycle
        );
    }
    println!("best epoch {}", out.best_epoch);

    let probe = RgbAlbedo::new(0.45, 0.35, 0.3);
    let u = out.best.encode(&probe);
    let back = out.best.decode(&u);
    println!("rgb {probe:?} -> u {u:.3?} -> rgb {:.4} {:.4} {:.4}", back.r, back.g, back.b);
    Ok(())
}
