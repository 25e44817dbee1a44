//! Color and texture descriptors computed over a (possibly masked) image.
//!
//! Every histogram block is normalized to sum 1: GCH and CCV are a single
//! block; LBP has one block per plane; CLBP has S, M and C blocks per plane.

mod ccv;
mod gch;
mod lbp;
mod table;

use std::fmt;
use std::str::FromStr;

pub use ccv::ccv;
pub use gch::gch;
pub use lbp::{clbp_histogram, lbp_code, lbp_histogram, NeighborSampler};
pub use table::{feature_spec_id, read_feature_csv, to_labeled, write_feature_csv, FeatureRecord};

use crate::error::{Error, Result};
use crate::imageio::{rgb_to_hsv, split_channels, ColorSpace, Mask, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DescriptorKind {
    Gch,
    Ccv,
    Lbp,
    Clbp,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 4] =
        [DescriptorKind::Gch, DescriptorKind::Ccv, DescriptorKind::Lbp, DescriptorKind::Clbp];

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Gch => "gch",
            DescriptorKind::Ccv => "ccv",
            DescriptorKind::Lbp => "lbp",
            DescriptorKind::Clbp => "clbp",
        }
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature {s:?}")))
    }
}

/// Circular neighborhood: `n` samples at radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LbpParams {
    pub n: usize,
    pub r: usize,
}

impl Default for LbpParams {
    fn default() -> Self {
        Self { n: 8, r: 1 }
    }
}

impl LbpParams {
    pub fn validate(&self) -> Result<()> {
        if !(4..=16).contains(&self.n) {
            return Err(Error::invalid(format!("LBP neighbor count must be in 4..=16, got {}", self.n)));
        }
        if self.r < 1 {
            return Err(Error::invalid("LBP radius must be at least 1"));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        1 << self.n
    }
}

/// Coherence threshold for CCV components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Tau {
    /// `max(1, ceil(1% of counted pixels))`.
    #[default]
    Auto,
    Fixed(usize),
}

impl Tau {
    pub fn resolve(self, counted: usize) -> usize {
        match self {
            Tau::Auto => counted.div_ceil(100).max(1),
            Tau::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CcvParams {
    pub n_colors: usize,
    pub tau: Tau,
    /// Apply the 3×3 mean blur before quantizing.
    pub blur: bool,
}

impl Default for CcvParams {
    fn default() -> Self {
        Self { n_colors: 64, tau: Tau::Auto, blur: true }
    }
}

/// Threshold used by CLBP_M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MagnitudeThreshold {
    /// Mean of all |v_n - v_c| over counted pixels.
    #[default]
    MagnitudeMean,
    /// Mean gray level of the plane.
    GrayMean,
}

/// Descriptor kind plus the parameters that fix its output length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DescriptorId {
    Gch { bins: usize },
    Ccv(CcvParams),
    Lbp(LbpParams),
    Clbp(LbpParams, MagnitudeThreshold),
}

impl DescriptorId {
    pub fn default_for(kind: DescriptorKind) -> Self {
        match kind {
            DescriptorKind::Gch => DescriptorId::Gch { bins: 4 },
            DescriptorKind::Ccv => DescriptorId::Ccv(CcvParams::default()),
            DescriptorKind::Lbp => DescriptorId::Lbp(LbpParams::default()),
            DescriptorKind::Clbp => DescriptorId::Clbp(LbpParams::default(), MagnitudeThreshold::default()),
        }
    }

    pub fn kind(&self) -> DescriptorKind {
        match self {
            DescriptorId::Gch { .. } => DescriptorKind::Gch,
            DescriptorId::Ccv(_) => DescriptorKind::Ccv,
            DescriptorId::Lbp(_) => DescriptorKind::Lbp,
            DescriptorId::Clbp(..) => DescriptorKind::Clbp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DescriptorId::Gch { bins } if *bins < 2 => {
                Err(Error::invalid(format!("GCH needs at least 2 bins per channel, got {bins}")))
            }
            DescriptorId::Ccv(p) if p.n_colors < 2 => {
                Err(Error::invalid(format!("CCV needs at least 2 colors, got {}", p.n_colors)))
            }
            DescriptorId::Ccv(CcvParams { tau: Tau::Fixed(0), .. }) => Err(Error::invalid("CCV tau must be at least 1")),
            DescriptorId::Lbp(p) | DescriptorId::Clbp(p, _) => p.validate(),
            _ => Ok(()),
        }
    }

    /// Length of the descriptor of a single plane (LBP/CLBP) or image (GCH/CCV).
    pub fn plane_len(&self) -> usize {
        match self {
            DescriptorId::Gch { bins } => bins * bins * bins,
            DescriptorId::Ccv(p) => 2 * p.n_colors,
            DescriptorId::Lbp(p) => p.bins(),
            DescriptorId::Clbp(p, _) => 2 * p.bins() + 2,
        }
    }

    /// Length of the vector produced by [`extract`] on a 3-channel image.
    pub fn extract_len(&self) -> usize {
        match self {
            DescriptorId::Lbp(_) | DescriptorId::Clbp(..) => 3 * self.plane_len(),
            _ => self.plane_len(),
        }
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescriptorId::Gch { bins } => write!(f, "gch:bins={bins}"),
            DescriptorId::Ccv(p) => {
                write!(f, "ccv:colors={};tau=", p.n_colors)?;
                match p.tau {
                    Tau::Auto => f.write_str("auto")?,
                    Tau::Fixed(t) => write!(f, "{t}")?,
                }
                write!(f, ";blur={}", u8::from(p.blur))
            }
            DescriptorId::Lbp(p) => write!(f, "lbp:n={};r={}", p.n, p.r),
            DescriptorId::Clbp(p, m) => {
                let m = match m {
                    MagnitudeThreshold::MagnitudeMean => "magnitude",
                    MagnitudeThreshold::GrayMean => "gray",
                };
                write!(f, "clbp:n={};r={};m={m}", p.n, p.r)
            }
        }
    }
}

impl FromStr for DescriptorId {
    type Err = Error;

    /// Accepts the `Display` form; a bare kind name gives the defaults and
    /// omitted parameters keep their default values.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::invalid(format!("bad descriptor {s:?}: {what}"));
        let (kind, params) = s.split_once(':').unwrap_or((s, ""));
        let mut id = DescriptorId::default_for(kind.parse()?);
        for kv in params.split(';').filter(|p| !p.is_empty()) {
            let (key, value) = kv.split_once('=').ok_or_else(|| bad(kv))?;
            let num = || value.parse::<usize>().map_err(|_| bad(kv));
            match (&mut id, key) {
                (DescriptorId::Gch { bins }, "bins") => *bins = num()?,
                (DescriptorId::Ccv(p), "colors") => p.n_colors = num()?,
                (DescriptorId::Ccv(p), "tau") => {
                    p.tau = if value == "auto" { Tau::Auto } else { Tau::Fixed(num()?) }
                }
                (DescriptorId::Ccv(p), "blur") => p.blur = num()? != 0,
                (DescriptorId::Lbp(p) | DescriptorId::Clbp(p, _), "n") => p.n = num()?,
                (DescriptorId::Lbp(p) | DescriptorId::Clbp(p, _), "r") => p.r = num()?,
                (DescriptorId::Clbp(_, m), "m") => {
                    *m = match value {
                        "magnitude" => MagnitudeThreshold::MagnitudeMean,
                        "gray" => MagnitudeThreshold::GrayMean,
                        _ => return Err(bad(kv)),
                    }
                }
                _ => return Err(bad(kv)),
            }
        }
        id.validate()?;
        Ok(id)
    }
}

/// Color space a descriptor is computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureColorSpace {
    Rgb,
    Hsv,
}

impl FeatureColorSpace {
    pub fn name(self) -> &'static str {
        match self {
            FeatureColorSpace::Rgb => "rgb",
            FeatureColorSpace::Hsv => "hsv",
        }
    }
}

impl fmt::Display for FeatureColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(FeatureColorSpace::Rgb),
            "hsv" => Ok(FeatureColorSpace::Hsv),
            _ => Err(Error::invalid(format!("unknown colorspace {s:?}"))),
        }
    }
}

/// A non-negative descriptor vector tagged with the descriptor that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub descriptor: DescriptorId,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniform quantization of `v` over `[lo, hi)` into `levels` bins.
#[inline]
pub(crate) fn quantize(v: f64, lo: f64, hi: f64, levels: usize) -> usize {
    let q = ((v - lo) / (hi - lo) * levels as f64).floor();
    if q <= 0.0 {
        0
    } else {
        (q as usize).min(levels - 1)
    }
}

pub(crate) fn require_three_channels(img: &RasterImage) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::WrongColorSpace { expected: "3-channel", actual: img.colorspace().name() });
    }
    Ok(())
}

pub(crate) fn normalize(counts: &[u64], total: u64) -> Vec<f64> {
    let total = total as f64;
    counts.iter().map(|&c| c as f64 / total).collect()
}

/// Converts an RGB8 image to `colorspace` and computes `descriptor` over the
/// pixels selected by `mask`. LBP and CLBP run on each of the three planes and
/// concatenate the per-plane vectors in channel order.
pub fn extract(
    img: &RasterImage,
    descriptor: &DescriptorId,
    colorspace: FeatureColorSpace,
    mask: Option<&Mask>,
) -> Result<FeatureVector> {
    img.require(ColorSpace::Rgb8)?;
    descriptor.validate()?;
    let converted;
    let source = match colorspace {
        FeatureColorSpace::Rgb => img,
        FeatureColorSpace::Hsv => {
            converted = rgb_to_hsv(img)?;
            &converted
        }
    };
    match *descriptor {
        DescriptorId::Gch { bins } => gch(source, bins, mask),
        DescriptorId::Ccv(params) => ccv(source, &params, mask),
        DescriptorId::Lbp(params) => {
            let mut values = Vec::with_capacity(descriptor.extract_len());
            for plane in split_channels(source) {
                values.extend(lbp_histogram(&plane, &params, mask)?.values);
            }
            Ok(FeatureVector { descriptor: *descriptor, values })
        }
        DescriptorId::Clbp(params, threshold) => {
            let mut values = Vec::with_capacity(descriptor.extract_len());
            for plane in split_channels(source) {
                values.extend(clbp_histogram(&plane, &params, threshold, mask)?.values);
            }
            Ok(FeatureVector { descriptor: *descriptor, values })
        }
    }
}
