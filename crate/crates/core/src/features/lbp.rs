//! Local binary patterns and the completed (sign / magnitude / center) variant.
//!
//! Neighbor `n` of `N` sits at angle `2πn/N`, counter-clockwise from the
//! positive column axis: column offset `R·cos θ`, row offset `−R·sin θ`
//! (rows grow downward). Off-grid neighbors are bilinearly interpolated;
//! offsets within 1e-9 of an integer snap to the grid.

use std::f64::consts::PI;

use super::{DescriptorId, FeatureVector, LbpParams, MagnitudeThreshold};
use crate::error::{Error, Result};
use crate::imageio::{ChannelPlane, Mask};

#[derive(Debug, Clone, Copy)]
struct Tap {
    // Linear offsets of the four interpolation corners.
    top_left: isize,
    top_right: isize,
    bottom_left: isize,
    bottom_right: isize,
    frac_col: f64,
    frac_row: f64,
}

/// Precomputed circular neighborhood for one plane width.
#[derive(Debug, Clone)]
pub struct NeighborSampler {
    radius: usize,
    width: usize,
    taps: Vec<Tap>,
    /// Grid offsets read by any tap, plus the center.
    support: Vec<(isize, isize)>,
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

impl NeighborSampler {
    pub fn new(params: &LbpParams, width: usize) -> Self {
        let w = width as isize;
        let mut support = vec![(0, 0)];
        let taps = (0..params.n)
            .map(|n| {
                let theta = 2.0 * PI * n as f64 / params.n as f64;
                let dc = snap(params.r as f64 * theta.cos());
                let dr = snap(-(params.r as f64) * theta.sin());
                let (c0, r0) = (dc.floor(), dr.floor());
                let (frac_col, frac_row) = (dc - c0, dr - r0);
                let (c0, r0) = (c0 as isize, r0 as isize);
                let c1 = if frac_col > 0.0 { c0 + 1 } else { c0 };
                let r1 = if frac_row > 0.0 { r0 + 1 } else { r0 };
                for p in [(r0, c0), (r0, c1), (r1, c0), (r1, c1)] {
                    if !support.contains(&p) {
                        support.push(p);
                    }
                }
                Tap {
                    top_left: r0 * w + c0,
                    top_right: r0 * w + c1,
                    bottom_left: r1 * w + c0,
                    bottom_right: r1 * w + c1,
                    frac_col,
                    frac_row,
                }
            })
            .collect();
        Self { radius: params.r, width, taps, support }
    }

    /// Interpolated neighbor values around linear index `center`.
    #[inline]
    fn sample_into(&self, values: &[f64], center: usize, out: &mut [f64]) {
        let at = |off: isize| values[(center as isize + off) as usize];
        for (tap, slot) in self.taps.iter().zip(out.iter_mut()) {
            let a = at(tap.top_left);
            let b = at(tap.top_right);
            let c = at(tap.bottom_left);
            let d = at(tap.bottom_right);
            let top = a + tap.frac_col * (b - a);
            let bottom = c + tap.frac_col * (d - c);
            *slot = top + tap.frac_row * (bottom - top);
        }
    }

    fn neighborhood_inside(&self, mask: &Mask, row: usize, col: usize) -> bool {
        self.support
            .iter()
            .all(|&(dr, dc)| mask.get((row as isize + dr) as usize, (col as isize + dc) as usize))
    }

    /// Linear indices of interior pixels whose whole neighborhood is selected.
    fn valid_centers<'a>(&'a self, plane: &ChannelPlane, mask: Option<&'a Mask>) -> impl Iterator<Item = usize> + 'a {
        let r = self.radius;
        let (w, h) = (plane.width, plane.height);
        let rows = if h > 2 * r { r..h - r } else { 0..0 };
        let cols = if w > 2 * r { r..w - r } else { 0..0 };
        rows.flat_map(move |row| cols.clone().map(move |col| (row, col)))
            .filter(move |&(row, col)| mask.is_none_or(|m| self.neighborhood_inside(m, row, col)))
            .map(move |(row, col)| row * self.width + col)
    }
}

#[inline]
fn sign_code(neighbors: &[f64], center: f64) -> usize {
    neighbors
        .iter()
        .enumerate()
        .fold(0, |code, (n, &v)| if v - center >= 0.0 { code | (1 << n) } else { code })
}

/// LBP code of the pixel at (`row`, `col`).
pub fn lbp_code(plane: &ChannelPlane, row: usize, col: usize, params: &LbpParams) -> Result<u32> {
    params.validate()?;
    let r = params.r;
    if row < r || col < r || row + r >= plane.height || col + r >= plane.width {
        return Err(Error::OutOfBounds { row, col });
    }
    let sampler = NeighborSampler::new(params, plane.width);
    let mut neighbors = vec![0.0; params.n];
    let center = row * plane.width + col;
    sampler.sample_into(&plane.values, center, &mut neighbors);
    Ok(sign_code(&neighbors, plane.values[center]) as u32)
}

fn check_mask(plane: &ChannelPlane, mask: Option<&Mask>) -> Result<()> {
    match mask {
        Some(m) => m.check_matches(plane.width, plane.height),
        None => Ok(()),
    }
}

/// Normalized histogram of LBP codes (`2^N` bins) over valid interior pixels.
pub fn lbp_histogram(plane: &ChannelPlane, params: &LbpParams, mask: Option<&Mask>) -> Result<FeatureVector> {
    params.validate()?;
    check_mask(plane, mask)?;
    let sampler = NeighborSampler::new(params, plane.width);
    let mut counts = vec![0u64; params.bins()];
    let mut neighbors = vec![0.0; params.n];
    let mut total = 0u64;
    for center in sampler.valid_centers(plane, mask) {
        sampler.sample_into(&plane.values, center, &mut neighbors);
        counts[sign_code(&neighbors, plane.values[center])] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(FeatureVector { descriptor: DescriptorId::Lbp(*params), values: super::normalize(&counts, total) })
}

/// Concatenated CLBP_S ∥ CLBP_M ∥ CLBP_C histograms (`2^N + 2^N + 2` bins),
/// each block normalized to sum 1.
///
/// CLBP_M thresholds |v_n − v_c| at `threshold` (magnitude mean over all
/// counted neighbors, or the plane's gray mean). CLBP_C thresholds the center
/// at the mean gray level of the selected pixels (all pixels without a mask).
pub fn clbp_histogram(
    plane: &ChannelPlane,
    params: &LbpParams,
    threshold: MagnitudeThreshold,
    mask: Option<&Mask>,
) -> Result<FeatureVector> {
    params.validate()?;
    check_mask(plane, mask)?;
    let n = params.n;
    let sampler = NeighborSampler::new(params, plane.width);
    let centers: Vec<usize> = sampler.valid_centers(plane, mask).collect();
    if centers.is_empty() {
        return Err(Error::NoValidPixels);
    }

    let gray_mean = match mask {
        Some(m) => {
            let (sum, count) = plane
                .values
                .iter()
                .zip(m.bits())
                .filter(|(_, &b)| b)
                .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
            sum / count as f64
        }
        None => plane.values.iter().sum::<f64>() / plane.values.len() as f64,
    };

    let bins = params.bins();
    let mut sign_counts = vec![0u64; bins];
    let mut magnitudes = Vec::with_capacity(centers.len() * n);
    let mut neighbors = vec![0.0; n];
    for &center in &centers {
        sampler.sample_into(&plane.values, center, &mut neighbors);
        let vc = plane.values[center];
        sign_counts[sign_code(&neighbors, vc)] += 1;
        magnitudes.extend(neighbors.iter().map(|&v| (v - vc).abs()));
    }
    let c = match threshold {
        MagnitudeThreshold::MagnitudeMean => magnitudes.iter().sum::<f64>() / magnitudes.len() as f64,
        MagnitudeThreshold::GrayMean => gray_mean,
    };

    let mut mag_counts = vec![0u64; bins];
    let mut center_counts = [0u64; 2];
    for (&center, mags) in centers.iter().zip(magnitudes.chunks_exact(n)) {
        let code = mags.iter().enumerate().fold(0, |code, (i, &m)| if m >= c { code | (1 << i) } else { code });
        mag_counts[code] += 1;
        center_counts[usize::from(plane.values[center] >= gray_mean)] += 1;
    }

    let total = centers.len() as u64;
    let mut values = super::normalize(&sign_counts, total);
    values.extend(super::normalize(&mag_counts, total));
    values.extend(super::normalize(&center_counts, total));
    Ok(FeatureVector { descriptor: DescriptorId::Clbp(*params, threshold), values })
}
