//! Tabulated spectra compiled into the binary.
//!
//! Every table is a small CSV (`wavelength_nm,<columns...>`, `#` comments)
//! that is linearly resampled onto the simulation grid on first use. The
//! raw text is also what the data export writes out, so an audit sees
//! exactly the bytes the engine was built with.

use crate::error::{Error, Result};
use crate::optics::{SpectralCurve, WavelengthGrid, BANDS};

/// Raw embedded tables, by file name.
pub const EMBEDDED_TABLES: &[(&str, &str)] = &[
    ("hbo2.csv", include_str!("../../data/hbo2.csv")),
    ("hb.csv", include_str!("../../data/hb.csv")),
    ("bilirubin.csv", include_str!("../../data/bilirubin.csv")),
    ("beta_carotene.csv", include_str!("../../data/beta_carotene.csv")),
    ("cie1931_2deg.csv", include_str!("../../data/cie1931_2deg.csv")),
    ("d65.csv", include_str!("../../data/d65.csv")),
];

pub(crate) fn embedded(name: &str) -> &'static str {
    EMBEDDED_TABLES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .unwrap_or_else(|| panic!("no embedded table named {name}"))
}

/// Parses a `wavelength_nm,<col>...` table into its wavelength column and
/// `columns` value columns.
pub fn parse_table(text: &str, columns: usize, origin: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut wavelengths = Vec::new();
    let mut values = vec![Vec::new(); columns];
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Data(format!("{origin}: {e}")))?;
        if row.len() < columns + 1 {
            return Err(Error::Data(format!(
                "{origin}: row {} has {} fields, expected {}",
                line + 1,
                row.len(),
                columns + 1
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Data(format!("{origin}: row {}: bad number {s:?}", line + 1)))
        };
        wavelengths.push(parse(&row[0])?);
        for (c, col) in values.iter_mut().enumerate() {
            col.push(parse(&row[c + 1])?);
        }
    }
    if wavelengths.len() < 2 {
        return Err(Error::Data(format!("{origin}: fewer than two samples")));
    }
    if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Data(format!("{origin}: wavelengths not strictly increasing")));
    }
    Ok((wavelengths, values))
}

/// Linear interpolation of a tabulated curve onto the grid. The table must
/// cover the whole grid; no extrapolation.
pub fn resample_to_grid(wavelengths: &[f64], values: &[f64], origin: &str) -> Result<SpectralCurve> {
    let first = wavelengths[0];
    let last = wavelengths[wavelengths.len() - 1];
    if first > WavelengthGrid::MIN_NM || last < WavelengthGrid::MAX_NM {
        return Err(Error::Data(format!(
            "{origin}: table spans {first}-{last} nm and does not cover the grid"
        )));
    }
    let mut out = [0.0; BANDS];
    for (band, slot) in out.iter_mut().enumerate() {
        let nm = WavelengthGrid::wavelength(band);
        let hi = wavelengths.partition_point(|&w| w < nm);
        *slot = if wavelengths[hi] == nm {
            values[hi]
        } else {
            let lo = hi - 1;
            let t = (nm - wavelengths[lo]) / (wavelengths[hi] - wavelengths[lo]);
            values[lo] + t * (values[hi] - values[lo])
        };
    }
    Ok(SpectralCurve::new(out))
}

/// Loads a single-column embedded table and resamples it.
pub(crate) fn embedded_curve(name: &str) -> Result<SpectralCurve> {
    let (wl, cols) = parse_table(embedded(name), 1, name)?;
    resample_to_grid(&wl, &cols[0], name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resampling_on_grid_is_identity() {
        let wl: Vec<f64> = (0..BANDS).map(WavelengthGrid::wavelength).collect();
        let v: Vec<f64> = (0..BANDS).map(|i| i as f64 * 1.5).collect();
        let c = resample_to_grid(&wl, &v, "t").unwrap();
        for i in 0..BANDS {
            assert_eq!(c[i], v[i]);
        }
    }

    #[test]
    fn resampling_interpolates_linearly() {
        let wl = [370.0, 800.0];
        let v = [0.0, 430.0];
        let c = resample_to_grid(&wl, &v, "t").unwrap();
        assert!((c[0] - 10.0).abs() < 1e-12);
        assert!((c[BANDS - 1] - 410.0).abs() < 1e-12);
    }

    #[test]
    fn short_table_is_a_data_error() {
        let text = "wavelength_nm,epsilon\n400,1\n500,2\n";
        let (wl, cols) = parse_table(text, 1, "t").unwrap();
        assert!(matches!(resample_to_grid(&wl, &cols[0], "t"), Err(Error::Data(_))));
        assert!(matches!(parse_table("wavelength_nm,e\n400,x\n500,1\n", 1, "t"), Err(Error::Data(_))));
    }

    #[test]
    fn every_embedded_table_parses_and_is_non_negative() {
        for (name, text) in EMBEDDED_TABLES {
            let cols = if *name == "cie1931_2deg.csv" { 3 } else { 1 };
            let (wl, values) = parse_table(text, cols, name).unwrap();
            for col in &values {
                let c = resample_to_grid(&wl, col, name).unwrap();
                assert!(c.iter().all(|v| v >= 0.0), "{name}");
            }
        }
    }
}
