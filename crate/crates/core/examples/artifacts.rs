//! Versioned, hashed artifacts and image codecs: save, reload, detect damage.

use dermalight::formats::*;
use dermalight::mapops::RgbImage;
use dermalight::neural::EncoderDecoder;

fn main() -> dermalight::Result<()> {
    let dir = std::env::temp_dir().join("dermalight_artifacts_example");
    std::fs::create_dir_all(&dir).map_err(|e| dermalight::Error::Io { path: dir.clone(), source: e })?;

    let net = EncoderDecoder::new(16, 3)?;
    let w = dir.join("net.dmlp");
    save_weights(&net, &vec![("note".into(), "example".into())], &w)?;
    let back = load_weights(&w)?;
    println!("weights reload bit-exact: {}", back.net.encoder == net.encoder && back.net.decoder == net.decoder);
    println!("sha256 {}", file_sha256(&w)?);

    let mut bytes = std::fs::read(&w).map_err(|e| dermalight::Error::Io { path: w.clone(), source: e })?;
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&w, bytes).map_err(|e| dermalight::Error::Io { path: w.clone(), source: e })?;
    match load_weights(&w) {
        Err(e) => println!("damaged file rejected: {e}"),
        Ok(_) => println!("damaged file was accepted"),
    }

    let img = RgbImage::new(4, 2, (0..8).map(|i| [i as f64 / 8.0, 0.5, 0.25]).collect())?;
    for name in ["img.pfm", "img.png"] {
        let p = dir.join(name);
        write_image(&p, &img, PngDepth::Sixteen)?;
        let r = read_image(&p)?;
        let worst = img.pixels.iter().zip(&r.pixels).flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs())).fold(0.0, f64::max);
        println!("{name}: max abs error {worst:.2e}");
    }
    Ok(())
}
