//! K-means defect segmentation on the chromatic (a\*, b\*) plane.
//!
//! Seeding is k-means++ from a ChaCha8 stream; Lloyd iterations stop when the
//! largest centroid movement falls below the tolerance, when the iteration cap
//! is hit, or when the objective would increase (floating-point stall). A
//! cluster that empties during iteration is reseeded at the pixel farthest
//! from its assigned centroid.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imageio::{ColorSpace, Mask, RasterImage, Samples};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Centroid movement threshold in a\*b\* units.
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { k: 4, seed: 0, max_iterations: 100, tolerance: 1e-4 }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("k must be at least 2, got {}", self.k)));
        }
        self.validate_loop()
    }

    fn validate_loop(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::invalid("tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// How the disease-containing cluster is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterSelectionPolicy {
    /// Cluster with the lowest mean L\*.
    DarkestL,
    /// Cluster whose centroid lies farthest from the most populous cluster.
    #[default]
    FarthestFromDominant,
    Manual(usize),
}

impl fmt::Display for ClusterSelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterSelectionPolicy::DarkestL => f.write_str("darkest"),
            ClusterSelectionPolicy::FarthestFromDominant => f.write_str("outlier"),
            ClusterSelectionPolicy::Manual(i) => write!(f, "manual:{i}"),
        }
    }
}

impl FromStr for ClusterSelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "darkest" => Ok(Self::DarkestL),
            "outlier" => Ok(Self::FarthestFromDominant),
            _ => s
                .strip_prefix("manual:")
                .and_then(|i| i.parse().ok())
                .map(Self::Manual)
                .ok_or_else(|| Error::invalid(format!("unknown selection policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub width: usize,
    pub height: usize,
    /// Cluster index per pixel, row-major.
    pub labels: Vec<usize>,
    /// Cluster centers in (a\*, b\*).
    pub centroids: Vec<[f64; 2]>,
    /// Sum of squared (a\*, b\*) distances of pixels to their centroid.
    pub objective: f64,
    /// Objective after seeding and after every completed iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub selected: Option<usize>,
    pub defect_mask: Option<Mask>,
}

impl SegmentationResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn cluster_mask(&self, cluster: usize) -> Mask {
        Mask::from_fn(self.width, self.height, |r, c| self.labels[r * self.width + c] == cluster)
    }
}

#[inline]
fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
    let da = p[0] - q[0];
    let db = p[1] - q[1];
    da * da + db * db
}

fn ab_points(lab: &RasterImage) -> Result<Vec<[f64; 2]>> {
    lab.require(ColorSpace::Lab)?;
    let Samples::F64(data) = lab.samples() else {
        unreachable!("LAB images are real-valued")
    };
    Ok(data.chunks_exact(3).map(|p| [p[1], p[2]]).collect())
}

/// Clusters the (a\*, b\*) values of a L\*a\*b\* image. The returned result has
/// no defect mask yet.
pub fn kmeans_ab(lab: &RasterImage, cfg: &KMeansConfig) -> Result<SegmentationResult> {
    cfg.validate()?;
    let points = ab_points(lab)?;
    let mut seg = kmeans_points(&points, cfg)?;
    seg.width = lab.width();
    seg.height = lab.height();
    Ok(seg)
}

/// Lloyd iterations over arbitrary 2-D points; `k = 1` is accepted here.
pub(crate) fn kmeans_points(points: &[[f64; 2]], cfg: &KMeansConfig) -> Result<SegmentationResult> {
    cfg.validate_loop()?;
    let k = cfg.k;
    if k == 0 || points.len() < k {
        return Err(Error::TooFewPixels { pixels: points.len(), k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);

    let mut labels = vec![0usize; points.len()];
    let mut dists = vec![0f64; points.len()];
    let mut objective = assign(points, &centroids, &mut labels, &mut dists);
    let mut history = vec![objective];
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        let mut next_labels = labels.clone();
        let mut next_dists = dists.clone();
        let mut seeded = centroids.clone();
        reseed_empty(points, &mut seeded, &mut next_labels, &mut next_dists);
        let next_centroids = update(points, &next_labels, &seeded);
        let movement = centroids
            .iter()
            .zip(&next_centroids)
            .map(|(a, b)| dist2(*a, *b).sqrt())
            .fold(0.0, f64::max);
        let next_objective = assign(points, &next_centroids, &mut next_labels, &mut next_dists);
        if next_objective > objective {
            break;
        }
        centroids = next_centroids;
        labels = next_labels;
        dists = next_dists;
        objective = next_objective;
        history.push(objective);
        iterations += 1;
        if movement < cfg.tolerance {
            break;
        }
    }

    Ok(SegmentationResult {
        width: points.len(),
        height: 1,
        labels,
        centroids,
        objective,
        objective_history: history,
        iterations,
        selected: None,
        defect_mask: None,
    })
}

fn kmeans_plus_plus(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut nearest: Vec<f64> = points.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            nearest
                .iter()
                .position(|&d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[idx];
        centroids.push(c);
        for (n, &p) in nearest.iter_mut().zip(points) {
            *n = n.min(dist2(p, c));
        }
    }
    centroids
}

/// Nearest-centroid assignment (lowest index on ties); returns the objective.
fn assign(points: &[[f64; 2]], centroids: &[[f64; 2]], labels: &mut [usize], dists: &mut [f64]) -> f64 {
    for ((p, l), d) in points.iter().zip(labels.iter_mut()).zip(dists.iter_mut()) {
        let mut best = 0;
        let mut best_d = dist2(*p, centroids[0]);
        for (i, &c) in centroids.iter().enumerate().skip(1) {
            let dd = dist2(*p, c);
            if dd < best_d {
                best = i;
                best_d = dd;
            }
        }
        *l = best;
        *d = best_d;
    }
    dists.iter().sum()
}

fn reseed_empty(points: &[[f64; 2]], centroids: &mut [[f64; 2]], labels: &mut [usize], dists: &mut [f64]) {
    let mut sizes = vec![0usize; centroids.len()];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for cluster in 0..centroids.len() {
        if sizes[cluster] > 0 {
            continue;
        }
        // Farthest pixel whose cluster can spare it.
        let candidate = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
        if let Some(i) = candidate {
            sizes[labels[i]] -= 1;
            sizes[cluster] += 1;
            labels[i] = cluster;
            dists[i] = 0.0;
            centroids[cluster] = points[i];
        }
    }
}

fn update(points: &[[f64; 2]], labels: &[usize], previous: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let k = previous.len();
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        sums[l][0] += p[0];
        sums[l][1] += p[1];
        counts[l] += 1;
    }
    (0..k)
        .map(|i| {
            if counts[i] == 0 {
                previous[i]
            } else {
                let n = counts[i] as f64;
                [sums[i][0] / n, sums[i][1] / n]
            }
        })
        .collect()
}

/// Picks the defect cluster and sets `defect_mask` / `selected`.
pub fn select_defect_cluster(
    seg: &SegmentationResult,
    lab: &RasterImage,
    policy: ClusterSelectionPolicy,
) -> Result<SegmentationResult> {
    lab.require(ColorSpace::Lab)?;
    if lab.width() != seg.width || lab.height() != seg.height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} image", seg.width, seg.height),
            actual: format!("{}x{}", lab.width(), lab.height()),
        });
    }
    let k = seg.k();
    let sizes = seg.cluster_sizes();
    let occupied = || (0..k).filter(|&c| sizes[c] > 0);
    let chosen = match policy {
        ClusterSelectionPolicy::Manual(i) => {
            if i >= k {
                return Err(Error::invalid(format!("manual cluster {i} out of range for k={k}")));
            }
            i
        }
        ClusterSelectionPolicy::DarkestL => {
            let mut sum_l = vec![0.0; k];
            for (i, &l) in seg.labels.iter().enumerate() {
                sum_l[l] += lab.samples().get(i * 3);
            }
            occupied()
                .map(|c| (c, sum_l[c] / sizes[c] as f64))
                .fold(None, |best: Option<(usize, f64)>, (c, m)| match best {
                    Some((_, bm)) if bm <= m => best,
                    _ => Some((c, m)),
                })
                .map(|(c, _)| c)
                .ok_or(Error::EmptyCluster(0))?
        }
        ClusterSelectionPolicy::FarthestFromDominant => {
            let dominant = (0..k).fold(0, |best, c| if sizes[c] > sizes[best] { c } else { best });
            let anchor = seg.centroids[dominant];
            occupied()
                .map(|c| (c, dist2(seg.centroids[c], anchor)))
                .fold(None, |best: Option<(usize, f64)>, (c, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((c, d)),
                })
                .map(|(c, _)| c)
                .ok_or(Error::EmptyCluster(dominant))?
        }
    };
    if sizes[chosen] == 0 {
        return Err(Error::EmptyCluster(chosen));
    }
    let mut out = seg.clone();
    out.selected = Some(chosen);
    out.defect_mask = Some(seg.cluster_mask(chosen));
    Ok(out)
}

/// Zeroes every channel of pixels outside the mask.
pub fn apply_mask(img: &RasterImage, mask: &Mask) -> Result<RasterImage> {
    mask.check_matches(img.width(), img.height())?;
    let ch = img.channels();
    match img.samples() {
        Samples::U8(data) => {
            let mut out = data.clone();
            for (px, &keep) in out.chunks_exact_mut(ch).zip(mask.bits()) {
                if !keep {
                    px.fill(0);
                }
            }
            RasterImage::from_rgb8(img.width(), img.height(), out)
        }
        Samples::F64(data) => {
            let mut out = data.clone();
            for (px, &keep) in out.chunks_exact_mut(ch).zip(mask.bits()) {
                if !keep {
                    px.fill(0.0);
                }
            }
            RasterImage::from_real(img.width(), img.height(), img.colorspace(), out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::{rgb_pixel_to_lab, rgb_to_lab};
    use rand::Rng;

    fn two_color() -> RasterImage {
        RasterImage::rgb8_from_fn(10, 8, |r, c| if (r + c) % 3 == 0 { [200, 30, 30] } else { [30, 160, 40] })
            .unwrap()
    }

    #[test]
    fn two_colors_recovered_exactly() {
        let lab = rgb_to_lab(&two_color()).unwrap();
        let seg = kmeans_ab(&lab, &KMeansConfig { k: 2, seed: 3, ..Default::default() }).unwrap();
        assert_eq!(seg.objective, 0.0);
        let red = rgb_pixel_to_lab([200, 30, 30]);
        let green = rgb_pixel_to_lab([30, 160, 40]);
        let mut got = seg.centroids.clone();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(got, vec![[green[1], green[2]], [red[1], red[2]]]);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<[f64; 2]> = (0..50).map(|_| [rng.random_range(-20.0..20.0), rng.random_range(-5.0..30.0)]).collect();
        let seg = kmeans_points(&pts, &KMeansConfig { k: 1, ..Default::default() }).unwrap();
        let n = pts.len() as f64;
        let mean = [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n];
        assert!((seg.centroids[0][0] - mean[0]).abs() < 1e-12);
        assert!((seg.centroids[0][1] - mean[1]).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let lab = rgb_to_lab(&two_color()).unwrap();
        assert!(kmeans_ab(&lab, &KMeansConfig { k: 1, ..Default::default() }).is_err());
        assert!(kmeans_ab(&lab, &KMeansConfig { max_iterations: 0, ..Default::default() }).is_err());
        assert!(kmeans_ab(&lab, &KMeansConfig { tolerance: -1.0, ..Default::default() }).is_err());
        let tiny = rgb_to_lab(&RasterImage::rgb8_from_fn(1, 3, |_, _| [1, 2, 3]).unwrap()).unwrap();
        assert!(matches!(kmeans_ab(&tiny, &KMeansConfig::default()), Err(Error::TooFewPixels { .. })));
        assert!(matches!(kmeans_ab(&two_color(), &KMeansConfig::default()), Err(Error::WrongColorSpace { .. })));
    }

    #[test]
    fn empty_clusters_are_reseeded() {
        // Two distinct colors, four clusters: reseeding must keep every label valid.
        let lab = rgb_to_lab(&two_color()).unwrap();
        let seg = kmeans_ab(&lab, &KMeansConfig { k: 4, seed: 1, ..Default::default() }).unwrap();
        assert!(seg.labels.iter().all(|&l| l < 4));
        assert_eq!(seg.objective, 0.0);
    }

    #[test]
    fn policy_parsing() {
        for p in [ClusterSelectionPolicy::DarkestL, ClusterSelectionPolicy::FarthestFromDominant, ClusterSelectionPolicy::Manual(2)] {
            assert_eq!(p.to_string().parse::<ClusterSelectionPolicy>().unwrap(), p);
        }
        assert!("manual:x".parse::<ClusterSelectionPolicy>().is_err());
    }

    #[test]
    fn darkest_picks_brown() {
        let img = RasterImage::rgb8_from_fn(8, 8, |r, _| if r < 3 { [70, 40, 20] } else { [230, 40, 50] }).unwrap();
        let lab = rgb_to_lab(&img).unwrap();
        let seg = kmeans_ab(&lab, &KMeansConfig { k: 2, ..Default::default() }).unwrap();
        let sel = select_defect_cluster(&seg, &lab, ClusterSelectionPolicy::DarkestL).unwrap();
        let mask = sel.defect_mask.unwrap();
        assert_eq!(mask.count(), 24);
        assert!(mask.get(0, 0) && !mask.get(5, 5));
    }

    #[test]
    fn manual_selection_and_errors() {
        let lab = rgb_to_lab(&two_color()).unwrap();
        let seg = kmeans_ab(&lab, &KMeansConfig { k: 4, seed: 9, ..Default::default() }).unwrap();
        let sizes = seg.cluster_sizes();
        for (c, &size) in sizes.iter().enumerate() {
            let res = select_defect_cluster(&seg, &lab, ClusterSelectionPolicy::Manual(c));
            if size == 0 {
                assert!(matches!(res, Err(Error::EmptyCluster(i)) if i == c));
            } else {
                let mask = res.unwrap().defect_mask.unwrap();
                for (i, &b) in mask.bits().iter().enumerate() {
                    assert_eq!(b, seg.labels[i] == c);
                }
            }
        }
        assert!(select_defect_cluster(&seg, &lab, ClusterSelectionPolicy::Manual(4)).is_err());
    }

    #[test]
    fn apply_mask_identity_and_zero() {
        let img = two_color();
        let all = Mask::filled(10, 8, true);
        assert_eq!(apply_mask(&img, &all).unwrap(), img);
        let none = apply_mask(&img, &Mask::filled(10, 8, false)).unwrap();
        assert!(none.as_rgb8().unwrap().iter().all(|&v| v == 0));
        assert!(apply_mask(&img, &Mask::filled(3, 3, true)).is_err());
    }
}
