//! Builds a coarse albedo table by simulation, stores it, and inverts colors
//! by nearest-node search.

use dermalight::formats::{load_lut, save_lut};
use dermalight::space::build_lut;
use dermalight::transport::SimConfig;

fn main() -> dermalight::Result<()> {
    let lut = build_lut([3, 3, 2, 2, 2], &SimConfig::with_photons(300, 1))?;
    println!("{} nodes, {} repeated colors", lut.len(), lut.duplicate_nodes().len());

    let path = std::env::temp_dir().join("dermalight_example.dlut");
    save_lut(&lut, &path)?;
    let lut = load_lut(&path)?;

    for flat in [0, lut.len() / 2, lut.len() - 1] {
        let albedo = lut.values()[flat];
        let p = lut.invert(&albedo);
        println!(
            "node {flat}: rgb {:.4} {:.4} {:.4} -> melanin {:.4} blood {:.4} t {:.0} um",
            albedo.r, albedo.g, albedo.b, p.melanin, p.blood, p.thickness_um
        );
    }
    let mid = lut.lookup_unit(&[0.5; 5]);
    println!("interpolated center: {:.4} {:.4} {:.4}", mid.r, mid.g, mid.b);
    Ok(())
}
