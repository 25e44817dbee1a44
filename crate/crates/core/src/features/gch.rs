use super::{normalize, quantize, require_three_channels, DescriptorId, FeatureVector};
use crate::error::{Error, Result};
use crate::imageio::{Mask, RasterImage};

/// Global color histogram: joint `bins³` histogram of uniformly quantized
/// channels over the selected pixels, normalized to sum 1.
///
/// Cell index is `q0·bins² + q1·bins + q2`.
pub fn gch(img: &RasterImage, bins_per_channel: usize, mask: Option<&Mask>) -> Result<FeatureVector> {
    require_three_channels(img)?;
    let descriptor = DescriptorId::Gch { bins: bins_per_channel };
    descriptor.validate()?;
    if let Some(m) = mask {
        m.check_matches(img.width(), img.height())?;
    }
    let cs = img.colorspace();
    let ranges = [cs.channel_range(0), cs.channel_range(1), cs.channel_range(2)];
    let b = bins_per_channel;
    let mut counts = vec![0u64; b * b * b];
    let mut total = 0u64;
    for row in 0..img.height() {
        for col in 0..img.width() {
            if mask.is_some_and(|m| !m.get(row, col)) {
                continue;
            }
            let cell = (0..3).fold(0, |acc, ch| {
                let (lo, hi) = ranges[ch];
                acc * b + quantize(img.sample(row, col, ch), lo, hi, b)
            });
            counts[cell] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(FeatureVector { descriptor, values: normalize(&counts, total) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solid_color_single_cell() {
        let img = RasterImage::rgb8_from_fn(5, 5, |_, _| [200, 10, 100]).unwrap();
        let h = gch(&img, 4, None).unwrap();
        assert_eq!(h.len(), 64);
        // 200/64 = 3, 10/64 = 0, 100/64 = 1
        assert_eq!(h.values[3 * 16 + 1], 1.0);
        assert_eq!(h.values.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn two_halves() {
        let img = RasterImage::rgb8_from_fn(4, 6, |r, _| if r < 3 { [0, 0, 0] } else { [255, 255, 255] }).unwrap();
        let h = gch(&img, 4, None).unwrap();
        assert_eq!(h.values[0], 0.5);
        assert_eq!(h.values[63], 0.5);
    }

    #[test]
    fn counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bins in [2, 3, 4, 5] {
            let img = RasterImage::rgb8_from_fn(16, 16, |_, _| rng.random()).unwrap();
            let mask = Mask::from_fn(16, 16, |_, _| rng.random_bool(0.7));
            let h = gch(&img, bins, Some(&mask)).unwrap();
            let mut oracle = vec![0usize; bins * bins * bins];
            let data = img.as_rgb8().unwrap();
            let mut n = 0;
            for (i, px) in data.chunks(3).enumerate() {
                if mask.bits()[i] {
                    let q: Vec<usize> = px.iter().map(|&v| v as usize * bins / 256).collect();
                    oracle[(q[0] * bins + q[1]) * bins + q[2]] += 1;
                    n += 1;
                }
            }
            let expected: Vec<f64> = oracle.iter().map(|&c| c as f64 / n as f64).collect();
            assert_eq!(h.values, expected);
        }
    }

    #[test]
    fn empty_mask_and_bad_bins() {
        let img = RasterImage::rgb8_from_fn(3, 3, |_, _| [1, 2, 3]).unwrap();
        assert!(matches!(gch(&img, 4, Some(&Mask::filled(3, 3, false))), Err(Error::EmptyMask)));
        assert!(gch(&img, 1, None).is_err());
    }
}
