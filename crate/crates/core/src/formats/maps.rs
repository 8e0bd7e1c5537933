use std::path::Path;

use serde_json::{json, Value};

use super::{read_pfm, write_atomic, write_pfm};
use crate::error::{Error, Result};
use crate::mapops::{Mask, ParamMaps};
use crate::space::{ParamWarp, AXES, AXIS_NAMES};

const SIDECAR: &str = "params.json";
const UNITS: [&str; AXES] = ["fraction", "fraction", "um", "fraction", "fraction"];

/// Writes one single-channel PFM per plane, `mask.pfm` when present, and a
/// `params.json` sidecar naming planes, units and ranges.
pub fn save_param_maps(dir: &Path, pm: &ParamMaps, warp: &ParamWarp) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut planes = Vec::new();
    for a in 0..AXES {
        let file = format!("{}.pfm", AXIS_NAMES[a]);
        let data: Vec<f32> = pm.planes[a].iter().map(|&v| v as f32).collect();
        write_pfm(&dir.join(&file), pm.width, pm.height, 1, &data)?;
        planes.push(json!({
            "name": AXIS_NAMES[a],
            "file": file,
            "unit": UNITS[a],
            "min": warp.axes[a].min,
            "max": warp.axes[a].max,
            "warp_exponent": warp.axes[a].exponent,
        }));
    }
    let mask = match &pm.mask {
        Some(m) => {
            let data: Vec<f32> = m.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            write_pfm(&dir.join("mask.pfm"), m.width, m.height, 1, &data)?;
            Value::from("mask.pfm")
        }
        None => Value::Null,
    };
    let sidecar = json!({
        "format": "dermalight-param-maps",
        "version": 1,
        "width": pm.width,
        "height": pm.height,
        "planes": planes,
        "mask": mask,
    });
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_atomic(&dir.join(SIDECAR), text.as_bytes())
}

/// Loads a directory written by [`save_param_maps`]. Values are stored as
/// `f32`, so they come back rounded to single precision.
pub fn load_param_maps(dir: &Path) -> Result<ParamMaps> {
    let path = dir.join(SIDECAR);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    let bad = |why: &str| Error::format(&path, why.to_string());
    let width = v["width"].as_u64().ok_or_else(|| bad("missing width"))? as usize;
    let height = v["height"].as_u64().ok_or_else(|| bad("missing height"))? as usize;
    let entries = v["planes"].as_array().ok_or_else(|| bad("missing planes"))?;
    let mut planes: [Vec<f64>; AXES] = Default::default();
    let mut seen = [false; AXES];
    for e in entries {
        let name = e["name"].as_str().ok_or_else(|| bad("plane without a name"))?;
        let file = e["file"].as_str().ok_or_else(|| bad("plane without a file"))?;
        let a = AXIS_NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| bad(&format!("unknown plane `{name}`")))?;
        let (w, h, c, data) = read_pfm(&dir.join(file))?;
        if (w, h, c) != (width, height, 1) {
            return Err(bad(&format!("plane `{name}` is {w}x{h}x{c}, expected {width}x{height}x1")));
        }
        planes[a] = data.into_iter().map(f64::from).collect();
        seen[a] = true;
    }
    if let Some(a) = seen.iter().position(|s| !s) {
        return Err(bad(&format!("plane `{}` missing", AXIS_NAMES[a])));
    }
    let mask = match v["mask"].as_str() {
        Some(file) => {
            let (w, h, _, data) = read_pfm(&dir.join(file))?;
            if (w, h) != (width, height) {
                return Err(bad("mask size differs from the planes"));
            }
            Some(Mask::new(w, h, data.iter().map(|&x| x >= 0.5).collect())?)
        }
        None => None,
    };
    Ok(ParamMaps { width, height, planes, mask })
}
