use std::path::{Path, PathBuf};

use crate::colorimetry::{ColorMatching, ColorSpace, Illuminant};
use crate::error::{Error, Result};
use crate::neural::EpochLoss;
use crate::optics::{
    melanin_absorption, baseline_absorption, Chromophores, MelaninKind, SpectralCurve, WavelengthGrid, BANDS,
};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

/// Writes a header row and numeric rows.
pub fn write_table_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `wavelength_nm,reflectance[,stderr]` on the simulation grid.
pub fn write_spectrum_csv(path: &Path, values: &SpectralCurve, stderr: Option<&SpectralCurve>) -> Result<()> {
    let header: &[&str] = match stderr {
        Some(_) => &["wavelength_nm", "reflectance", "stderr"],
        None => &["wavelength_nm", "reflectance"],
    };
    let rows = (0..BANDS).map(|b| {
        let mut r = vec![WavelengthGrid::wavelength(b), values[b]];
        if let Some(e) = stderr {
            r.push(e[b]);
        }
        r
    });
    write_table_csv(path, header, rows)
}

/// Reads a spectrum CSV written by [`write_spectrum_csv`]; the wavelengths
/// must be exactly the simulation grid.
pub fn read_spectrum_csv(path: &Path) -> Result<(SpectralCurve, Option<SpectralCurve>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut values = [0.0; BANDS];
    let mut errs = [0.0; BANDS];
    let mut has_err = false;
    let mut n = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::format(path, format!("row {}: missing column {k}", i + 1)))?
                .parse()
                .map_err(|_| Error::format(path, format!("row {}: column {k} is not a number", i + 1)))
        };
        if i >= BANDS || num(0)? != WavelengthGrid::wavelength(i) {
            return Err(Error::format(path, format!("row {} is off the 380-780 nm / 10 nm grid", i + 1)));
        }
        values[i] = num(1)?;
        if rec.len() > 2 {
            errs[i] = num(2)?;
            has_err = true;
        }
        n += 1;
    }
    if n != BANDS {
        return Err(Error::format(path, format!("expected {BANDS} rows, found {n}")));
    }
    Ok((SpectralCurve::new(values), has_err.then(|| SpectralCurve::new(errs))))
}

/// `epoch,split,param,albedo,cycle,total`, two rows per epoch.
pub fn write_history_csv(path: &Path, history: &[EpochLoss]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["epoch", "split", "param", "albedo", "cycle", "total"])
        .map_err(|e| csv_err(path, e))?;
    for h in history {
        for (name, l) in [("train", h.train), ("val", h.val)] {
            w.write_record([
                h.epoch.to_string(),
                name.to_string(),
                l.param.to_string(),
                l.albedo.to_string(),
                l.cycle.to_string(),
                l.total.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the grid-resampled colour matching functions, illuminant,
/// chromophore spectra and the derived XYZ → RGB matrix into `dir`.
pub fn export_data(dir: &Path, illuminant: &Illuminant) -> Result<Vec<PathBuf>> {
    let cmf = ColorMatching::cie1931();
    let ch = Chromophores::standard();
    let wl = |b| WavelengthGrid::wavelength(b);
    let mut written = Vec::new();

    let p = dir.join("cmf.csv");
    write_table_csv(
        &p,
        &["wavelength_nm", "x_bar", "y_bar", "z_bar"],
        (0..BANDS).map(|b| vec![wl(b), cmf.x_bar[b], cmf.y_bar[b], cmf.z_bar[b]]),
    )?;
    written.push(p);

    let p = dir.join("illuminant.csv");
    write_table_csv(&p, &["wavelength_nm", "power"], (0..BANDS).map(|b| vec![wl(b), illuminant.power[b]]))?;
    written.push(p);

    let p = dir.join("extinction.csv");
    write_table_csv(
        &p,
        &["wavelength_nm", "oxyhemoglobin", "deoxyhemoglobin", "bilirubin", "beta_carotene"],
        (0..BANDS).map(|b| {
            vec![
                wl(b),
                ch.oxyhemoglobin.extinction[b],
                ch.deoxyhemoglobin.extinction[b],
                ch.bilirubin.extinction[b],
                ch.carotene_epidermis.extinction[b],
            ]
        }),
    )?;
    written.push(p);

    let p = dir.join("melanin_absorption.csv");
    write_table_csv(
        &p,
        &["wavelength_nm", "eumelanin", "pheomelanin", "baseline"],
        (0..BANDS).map(|b| {
            let l = wl(b);
            vec![
                l,
                melanin_absorption(MelaninKind::Eumelanin, l).unwrap(),
                melanin_absorption(MelaninKind::Pheomelanin, l).unwrap(),
                baseline_absorption(l).unwrap(),
            ]
        }),
    )?;
    written.push(p);

    let p = dir.join("xyz_to_rgb.csv");
    let m = ColorSpace::new(illuminant).xyz_to_rgb_matrix();
    write_table_csv(&p, &["x", "y", "z"], m.iter().map(|r| r.to_vec()))?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let v = SpectralCurve::from_fn(|b, _| 0.01 * b as f64 + 1e-17);
        let e = SpectralCurve::constant(1e-3);
        write_spectrum_csv(&p, &v, Some(&e)).unwrap();
        assert_eq!(read_spectrum_csv(&p).unwrap(), (v, Some(e)));
        write_spectrum_csv(&p, &v, None).unwrap();
        assert_eq!(read_spectrum_csv(&p).unwrap(), (v, None));
    }
}
