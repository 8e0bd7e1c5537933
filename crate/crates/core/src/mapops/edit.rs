use super::{Mask, ParamMaps};
use crate::error::{Error, Result};
use crate::space::{ParamWarp, AXES, AXIS_NAMES};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transform {
    Scale(f64),
    Set(f64),
    Offset(f64),
}

impl Transform {
    fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Scale(k) => v * k,
            Transform::Set(x) => x,
            Transform::Offset(d) => v + d,
        }
    }
}

/// A transform of one axis, optionally restricted to a mask.
#[derive(Clone, Debug, PartialEq)]
pub struct EditOp {
    pub axis: usize,
    pub transform: Transform,
    pub mask: Option<Mask>,
}

impl EditOp {
    pub fn new(axis: usize, transform: Transform) -> Self {
        EditOp { axis, transform, mask: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EditSpec {
    pub ops: Vec<EditOp>,
}

impl EditSpec {
    pub fn validate(&self) -> Result<()> {
        for op in &self.ops {
            if op.axis >= AXES {
                return Err(Error::Config(format!("edit axis {} out of range", op.axis)));
            }
            let ok = match op.transform {
                Transform::Scale(k) => k > 0.0 && k.is_finite(),
                Transform::Set(v) | Transform::Offset(v) => v.is_finite(),
            };
            if !ok {
                return Err(Error::Config(format!("invalid {} transform {:?}", AXIS_NAMES[op.axis], op.transform)));
            }
        }
        Ok(())
    }

    /// Parses `axis:op:value`, e.g. `melanin:scale:1.4` or `thickness:set:80`.
    pub fn parse_op(text: &str) -> Result<EditOp> {
        let parts: Vec<&str> = text.split(':').collect();
        let [axis, op, value] = parts.as_slice() else {
            return Err(Error::Config(format!("edit `{text}` is not axis:op:value")));
        };
        let axis = AXIS_NAMES
            .iter()
            .position(|n| n == axis)
            .ok_or_else(|| Error::Config(format!("unknown axis `{axis}`; expected one of {AXIS_NAMES:?}")))?;
        let value: f64 = value.parse().map_err(|_| Error::Config(format!("edit value `{value}` is not a number")))?;
        let transform = match *op {
            "scale" => Transform::Scale(value),
            "set" => Transform::Set(value),
            "offset" => Transform::Offset(value),
            _ => return Err(Error::Config(format!("unknown edit op `{op}`; expected scale, set or offset"))),
        };
        Ok(EditOp::new(axis, transform))
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 7] = ["tan", "flush", "thin", "thicken", "vitiligo", "deoxygenate", "oxygenate"];

/// Named biophysical edits. `mask` restricts every op of the preset.
///
/// `tan` raises melanin by 40% and moves to pure pheomelanin, as the
/// reference edit describes it, even though tanning is usually eumelanin
/// driven. "Fully oxygenated" is the range minimum of the haemoglobin ratio,
/// which measures the deoxygenated fraction.
pub fn preset(name: &str, mask: Option<Mask>, warp: &ParamWarp) -> Result<EditSpec> {
    use Transform::*;
    let [mel, blood, thick, mel_ratio, hb_ratio] = [0, 1, 2, 3, 4];
    let ops = match name {
        "tan" => vec![(mel, Scale(1.4)), (mel_ratio, Set(warp.axes[mel_ratio].min))],
        "flush" => vec![(blood, Scale(1.7)), (hb_ratio, Set(warp.axes[hb_ratio].min))],
        "thin" => vec![(thick, Set(warp.axes[thick].min))],
        "thicken" => vec![(thick, Set(warp.axes[thick].max))],
        "vitiligo" => vec![(mel, Set(warp.axes[mel].min))],
        "deoxygenate" => vec![(hb_ratio, Set(warp.axes[hb_ratio].max))],
        "oxygenate" => vec![(hb_ratio, Set(warp.axes[hb_ratio].min))],
        _ => return Err(Error::Config(format!("unknown preset `{name}`; expected one of {PRESETS:?}"))),
    };
    Ok(EditSpec {
        ops: ops
            .into_iter()
            .map(|(axis, transform)| EditOp { axis, transform, mask: mask.clone() })
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EditReport {
    /// Texel-axis values that had to be clamped back into range.
    pub clamped: usize,
}

/// Applies `spec` in order to every valid texel, then clamps to `warp`.
pub fn edit(pm: &ParamMaps, spec: &EditSpec, warp: &ParamWarp) -> Result<(ParamMaps, EditReport)> {
    spec.validate()?;
    for op in &spec.ops {
        if let Some(m) = &op.mask {
            m.check_dims(pm.width, pm.height)?;
        }
    }
    let mut out = pm.clone();
    let mut report = EditReport::default();
    for i in 0..pm.len() {
        if !pm.is_valid(i) {
            continue;
        }
        let mut v = std::array::from_fn::<f64, AXES, _>(|a| pm.planes[a][i]);
        for op in &spec.ops {
            if op.mask.as_ref().is_none_or(|m| m.data[i]) {
                v[op.axis] = op.transform.apply(v[op.axis]);
            }
        }
        for a in 0..AXES {
            let c = warp.axes[a].clamp(v[a]);
            if c != v[a] {
                report.clamped += 1;
            }
            out.planes[a][i] = c;
        }
    }
    Ok((out, report))
}
