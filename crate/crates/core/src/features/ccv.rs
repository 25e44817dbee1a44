use super::{normalize, quantize, require_three_channels, CcvParams, DescriptorId, FeatureVector};
use crate::error::{Error, Result};
use crate::imageio::{Mask, RasterImage};

/// Splits `n` into three per-channel level counts whose product is `n`, as
/// balanced as possible, largest first (64 → 4·4·4, 12 → 3·2·2, 7 → 7·1·1).
pub fn channel_levels(n: usize) -> [usize; 3] {
    let mut best = [n, 1, 1];
    let mut c = 1;
    while c * c * c <= n {
        if n.is_multiple_of(c) {
            let rest = n / c;
            let mut b = c;
            while b * b <= rest {
                if rest.is_multiple_of(b) {
                    let a = rest / b;
                    if a < best[0] {
                        best = [a, b, c];
                    }
                }
                b += 1;
            }
        }
        c += 1;
    }
    best
}

/// 3×3 box filter; border pixels average over their in-image neighbors.
fn box_blur(img: &RasterImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h * 3);
    for row in 0..h {
        let rows = row.saturating_sub(1)..=(row + 1).min(h - 1);
        for col in 0..w {
            let cols = col.saturating_sub(1)..=(col + 1).min(w - 1);
            let n = (rows.clone().count() * cols.clone().count()) as f64;
            for ch in 0..3 {
                let mut sum = 0.0;
                for r in rows.clone() {
                    for c in cols.clone() {
                        sum += img.sample(r, c, ch);
                    }
                }
                out.push(sum / n);
            }
        }
    }
    out
}

/// Color coherence vector: `coherent ∥ incoherent` histograms over
/// `n_colors` buckets, normalized to total sum 1.
///
/// A pixel is coherent when its 8-connected same-bucket component (restricted
/// to the mask) has at least `tau` pixels.
pub fn ccv(img: &RasterImage, params: &CcvParams, mask: Option<&Mask>) -> Result<FeatureVector> {
    require_three_channels(img)?;
    let descriptor = DescriptorId::Ccv(*params);
    descriptor.validate()?;
    let (w, h) = (img.width(), img.height());
    if let Some(m) = mask {
        m.check_matches(w, h)?;
    }
    let selected = |i: usize| mask.is_none_or(|m| m.bits()[i]);

    let values: Vec<f64> = if params.blur {
        box_blur(img)
    } else {
        (0..w * h * 3).map(|i| img.samples().get(i)).collect()
    };
    let levels = channel_levels(params.n_colors);
    let cs = img.colorspace();
    const NONE: usize = usize::MAX;
    let buckets: Vec<usize> = (0..w * h)
        .map(|i| {
            if !selected(i) {
                return NONE;
            }
            (0..3).fold(0, |acc, ch| {
                let (lo, hi) = cs.channel_range(ch);
                acc * levels[ch] + quantize(values[i * 3 + ch], lo, hi, levels[ch])
            })
        })
        .collect();

    let counted = buckets.iter().filter(|&&b| b != NONE).count();
    if counted == 0 {
        return Err(Error::EmptyMask);
    }
    let tau = params.tau.resolve(counted);

    let n = params.n_colors;
    let mut counts = vec![0u64; 2 * n];
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if visited[start] || buckets[start] == NONE {
            continue;
        }
        let bucket = buckets[start];
        visited[start] = true;
        stack.push(start);
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let (row, col) = (i / w, i % w);
            for r in row.saturating_sub(1)..=(row + 1).min(h - 1) {
                for c in col.saturating_sub(1)..=(col + 1).min(w - 1) {
                    let j = r * w + c;
                    if !visited[j] && buckets[j] == bucket {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        let slot = if component.len() >= tau { bucket } else { n + bucket };
        counts[slot] += component.len() as u64;
    }
    Ok(FeatureVector { descriptor, values: normalize(&counts, counted as u64) })
}
