use dermalight::colorimetry::{spectrum_to_rgb, ColorSpace, RgbAlbedo};
use dermalight::formats::{decode_srgb, encode_srgb};
use dermalight::mapops::{edit, preset, EditOp, EditSpec, ParamMaps, Transform, PRESETS};
use dermalight::optics::{anisotropy, layer_optics};
use dermalight::space::*;
use dermalight::{SkinParams, SpectralCurve};
use proptest::prelude::*;

fn unit_point() -> impl Strategy<Value = UnitPoint> {
    prop::array::uniform5(0.0..=1.0f64)
}

fn in_range_params() -> impl Strategy<Value = SkinParams> {
    (0.001..=1.0f64, 0.001..=1.0f64, 10.0..=250.0f64, 0.001..=1.0f64, 0.001..=1.0f64)
        .prop_map(|(a, b, c, d, e)| SkinParams::new(a, b, c, d, e))
}

proptest! {
    // Checked in parameter space: near u = 0 the cubic and quartic warps
    // flatten, so u itself is not recoverable to 1e-12 from a rounded p.
    #[test]
    fn warp_round_trips(u in unit_point()) {
        let p = warp_params(&u).unwrap().to_array();
        let q = warp_params(&unwarp_params(&SkinParams::from_array(p)).unwrap()).unwrap().to_array();
        for a in 0..AXES {
            prop_assert!((q[a] - p[a]).abs() <= 1e-12 * p[a].abs().max(1.0), "axis {}: {} vs {}", a, q[a], p[a]);
        }
    }

    #[test]
    fn unwarp_inverts_warp_away_from_the_flat_end(u in prop::array::uniform5(0.01..=1.0f64)) {
        let back = unwarp_params(&warp_params(&u).unwrap()).unwrap();
        for a in 0..AXES {
            prop_assert!((back[a] - u[a]).abs() < 1e-12, "axis {}: {} vs {}", a, back[a], u[a]);
        }
    }

    #[test]
    fn unwarp_round_trips(p in in_range_params()) {
        let u = unwarp_params(&p).unwrap();
        let q = warp_params(&u).unwrap().to_array();
        for (a, v) in p.to_array().iter().enumerate() {
            prop_assert!((q[a] - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn warp_is_monotone_per_axis(a in 0.0..=1.0f64, b in 0.0..=1.0f64, axis in 0..AXES) {
        let w = ParamWarp::default().axes[axis];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(w.warp(lo) <= w.warp(hi));
    }

    #[test]
    fn out_of_cube_points_are_rejected(u in unit_point(), axis in 0..AXES, off in 1e-9..1.0f64) {
        let mut bad = u;
        bad[axis] = 1.0 + off;
        prop_assert!(warp_params(&bad).is_err());
        bad[axis] = -off;
        prop_assert!(warp_params(&bad).is_err());
    }

    #[test]
    fn radical_inverse_in_unit_interval(base in 2u64..40, index in 0u64..1_000_000) {
        let v = radical_inverse(base, index);
        prop_assert!((0.0..1.0).contains(&v));
    }

    #[test]
    fn srgb_round_trip(v in 0.0..=1.0f64) {
        prop_assert!((decode_srgb(encode_srgb(v)) - v).abs() < 1e-12);
    }

    #[test]
    fn rgb_of_any_reflectance_is_in_gamut_box(r in prop::collection::vec(0.0..=1.0f64, 41)) {
        let s = SpectralCurve::from_fn(|i, _| r[i]);
        let c = spectrum_to_rgb(&s, ColorSpace::srgb_d65()).rgb.to_array();
        prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn edits_stay_in_range(p in in_range_params(), k in 0.01..10.0f64, axis in 0..AXES, name in 0..PRESETS.len()) {
        let warp = ParamWarp::default();
        let pm = ParamMaps::constant(2, 2, &p);
        let mut spec = preset(PRESETS[name], None, &warp).unwrap();
        spec.ops.push(EditOp::new(axis, Transform::Scale(k)));
        let (out, _) = edit(&pm, &spec, &warp).unwrap();
        prop_assert!(out.validate(&warp).is_ok());
    }

    #[test]
    fn layer_optics_are_physical(p in in_range_params()) {
        let (e, d) = layer_optics(&p).unwrap();
        for l in [&e, &d] {
            prop_assert!(l.mu_a.iter().all(|v| v >= 0.0 && v.is_finite()));
            prop_assert!(l.mu_s.iter().all(|v| v > 0.0 && v.is_finite()));
            prop_assert!(l.g.iter().all(|v| (0.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn anisotropy_in_forward_range(nm in 380.0..=780.0f64) {
        let g = anisotropy(nm);
        prop_assert!(g > 0.6 && g < 0.9, "{}", g);
    }
}

#[test]
fn identity_edit_is_exact() {
    let warp = ParamWarp::default();
    let pm = ParamMaps::constant(3, 1, &SkinParams::new(0.2, 0.1, 60.0, 0.5, 0.5));
    let spec = EditSpec { ops: vec![EditOp::new(0, Transform::Scale(1.0)), EditOp::new(2, Transform::Offset(0.0))] };
    let (out, report) = edit(&pm, &spec, &warp).unwrap();
    assert_eq!(out, pm);
    assert_eq!(report.clamped, 0);
}

#[test]
fn halton_beats_uniform_discrepancy() {
    let n = 512;
    let halton: Vec<UnitPoint> = (1..=n as u64).map(|i| halton_point(i).unwrap()).collect();
    let dh = l2_star_discrepancy(&halton);
    let mut worse = 0;
    for seed in 0..5 {
        let du = l2_star_discrepancy(&uniform_points(n, seed));
        if du > dh {
            worse += 1;
        }
    }
    assert_eq!(worse, 5, "Halton discrepancy {dh}");
}

#[test]
fn rgb_albedo_luminance_of_white() {
    assert!((RgbAlbedo::new(1.0, 1.0, 1.0).luminance() - 1.0).abs() < 1e-12);
}
