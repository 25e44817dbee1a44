//! Image → defect mask → descriptor, as used by the CLI and the evaluation
//! sweep.

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{extract, DescriptorId, FeatureColorSpace, FeatureVector};
use crate::imageio::{rgb_to_lab, Mask, RasterImage};
use crate::segmentation::{kmeans_ab, select_defect_cluster, ClusterSelectionPolicy, KMeansConfig, SegmentationResult};

/// RGB → L\*a\*b\* → K-means → cluster selection.
pub fn segment(img: &RasterImage, kmeans: &KMeansConfig, policy: ClusterSelectionPolicy) -> Result<SegmentationResult> {
    let lab = rgb_to_lab(img)?;
    let seg = kmeans_ab(&lab, kmeans)?;
    select_defect_cluster(&seg, &lab, policy)
}

/// Defect mask for `img` under `cfg`, or `None` when segmentation is off.
pub fn defect_mask(img: &RasterImage, cfg: &PipelineConfig) -> Result<Option<Mask>> {
    if !cfg.segment {
        return Ok(None);
    }
    Ok(segment(img, &cfg.kmeans(), cfg.policy)?.defect_mask)
}

/// Extracts `descriptor` over `mask`. A mask too small for the descriptor
/// (no counted pixels) falls back to the whole image.
pub fn masked_features(
    img: &RasterImage,
    descriptor: &DescriptorId,
    colorspace: FeatureColorSpace,
    mask: Option<&Mask>,
) -> Result<FeatureVector> {
    match extract(img, descriptor, colorspace, mask) {
        Err(Error::EmptyMask | Error::NoValidPixels) if mask.is_some() => extract(img, descriptor, colorspace, None),
        other => other,
    }
}

/// Full per-image pipeline: segment (if enabled) and extract.
pub fn describe(
    img: &RasterImage,
    cfg: &PipelineConfig,
    descriptor: &DescriptorId,
    colorspace: FeatureColorSpace,
) -> Result<FeatureVector> {
    let mask = defect_mask(img, cfg)?;
    masked_features(img, descriptor, colorspace, mask.as_ref())
}
