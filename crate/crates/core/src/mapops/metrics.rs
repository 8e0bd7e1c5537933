use super::{Mask, RgbImage};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMetrics {
    /// Mean squared error over masked-in texels and all channels.
    pub mse: f64,
    pub mse_per_channel: [f64; 3],
    pub mae_per_channel: [f64; 3],
    /// Texels that contributed.
    pub texels: usize,
    /// `gain · |a - b|`, clamped to [0, 1]; black outside the mask.
    pub abs_error: RgbImage,
}

pub fn error_metrics(a: &RgbImage, b: &RgbImage, mask: Option<&Mask>, gain: f64) -> Result<ErrorMetrics> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::Invariant(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if let Some(m) = mask {
        m.check_dims(a.width, a.height)?;
    }
    let mut sq = [0.0; 3];
    let mut abs = [0.0; 3];
    let mut texels = 0;
    let mut err = vec![[0.0; 3]; a.len()];
    for i in 0..a.len() {
        if !mask.is_none_or(|m| m.data[i]) {
            continue;
        }
        texels += 1;
        for c in 0..3 {
            let d = a.pixels[i][c] - b.pixels[i][c];
            sq[c] += d * d;
            abs[c] += d.abs();
            err[i][c] = (gain * d.abs()).clamp(0.0, 1.0);
        }
    }
    let n = texels.max(1) as f64;
    let mse_per_channel = sq.map(|s| s / n);
    Ok(ErrorMetrics {
        mse: mse_per_channel.iter().sum::<f64>() / 3.0,
        mse_per_channel,
        mae_per_channel: abs.map(|s| s / n),
        texels,
        abs_error: RgbImage::new(a.width, a.height, err)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = RgbImage::filled(4, 2, [0.3, 0.4, 0.5]);
        let same = error_metrics(&a, &a, None, 4.0).unwrap();
        assert_eq!(same.mse, 0.0);
        assert!(same.abs_error.pixels.iter().all(|p| *p == [0.0; 3]));

        let b = RgbImage::filled(4, 2, [0.4, 0.5, 0.6]);
        let m = error_metrics(&a, &b, None, 4.0).unwrap();
        assert!((m.mse - 0.01).abs() < 1e-15);
        assert!((m.abs_error.pixels[0][0] - 0.4).abs() < 1e-12);

        let mut c = b.clone();
        for p in &mut c.pixels[4..] {
            *p = [0.3, 0.4, 0.5];
        }
        let half = Mask::new(4, 2, (0..8).map(|i| i < 4).collect()).unwrap();
        let masked = error_metrics(&a, &c, Some(&half), 1.0).unwrap();
        assert!((masked.mse - 0.01).abs() < 1e-15);
        assert_eq!(masked.texels, 4);
        let unmasked = error_metrics(&a, &c, None, 1.0).unwrap();
        assert!((unmasked.mse - 0.005).abs() < 1e-15);
        assert!(error_metrics(&a, &RgbImage::filled(2, 2, [0.0; 3]), None, 1.0).is_err());
    }
}
