//! Pipeline configuration and its `key = value` file form.

use std::fmt::Write as _;
use std::path::Path;

use crate::classify::DecodeMetric;
use crate::error::{Error, Result};
use crate::features::{
    CcvParams, DescriptorId, DescriptorKind, FeatureColorSpace, LbpParams, MagnitudeThreshold, Tau,
};
use crate::seed;
use crate::segmentation::{ClusterSelectionPolicy, KMeansConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    pub k: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub policy: ClusterSelectionPolicy,
    /// Restrict descriptors to the selected defect cluster.
    pub segment: bool,
    pub gch_bins: usize,
    pub ccv: CcvParams,
    pub lbp: LbpParams,
    pub clbp_threshold: MagnitudeThreshold,
    pub colorspace: FeatureColorSpace,
    pub svm_c: f64,
    pub decode: DecodeMetric,
    pub features: Vec<DescriptorKind>,
    pub colorspaces: Vec<FeatureColorSpace>,
    pub train_per_class: Vec<usize>,
    pub trials: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            k: 4,
            max_iterations: 100,
            tolerance: 1e-4,
            policy: ClusterSelectionPolicy::default(),
            segment: true,
            gch_bins: 4,
            ccv: CcvParams::default(),
            lbp: LbpParams::default(),
            clbp_threshold: MagnitudeThreshold::default(),
            colorspace: FeatureColorSpace::Hsv,
            svm_c: 1.0,
            decode: DecodeMetric::Literal,
            features: DescriptorKind::ALL.to_vec(),
            colorspaces: vec![FeatureColorSpace::Rgb, FeatureColorSpace::Hsv],
            train_per_class: vec![10, 20, 30, 40, 50],
            trials: 5,
        }
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

impl PipelineConfig {
    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            seed: seed::derive(self.seed, "kmeans", 0),
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        }
    }

    pub fn descriptor(&self, kind: DescriptorKind) -> DescriptorId {
        match kind {
            DescriptorKind::Gch => DescriptorId::Gch { bins: self.gch_bins },
            DescriptorKind::Ccv => DescriptorId::Ccv(self.ccv),
            DescriptorKind::Lbp => DescriptorId::Lbp(self.lbp),
            DescriptorKind::Clbp => DescriptorId::Clbp(self.lbp, self.clbp_threshold),
        }
    }

    pub fn validate(&self) -> Result<()> {
        KMeansConfig { k: self.k, seed: 0, max_iterations: self.max_iterations, tolerance: self.tolerance }.validate()?;
        if let ClusterSelectionPolicy::Manual(i) = self.policy {
            if i >= self.k {
                return Err(Error::invalid(format!("manual cluster {i} out of range for k={}", self.k)));
            }
        }
        for kind in DescriptorKind::ALL {
            self.descriptor(kind).validate()?;
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return Err(Error::invalid("svm_c must be positive"));
        }
        if self.trials < 1 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.features.is_empty() || self.colorspaces.is_empty() || self.train_per_class.is_empty() {
            return Err(Error::invalid("features, colorspaces and train_per_class must be non-empty"));
        }
        if self.train_per_class.contains(&0) {
            return Err(Error::invalid("train_per_class entries must be at least 1"));
        }
        Ok(())
    }

    /// Sets one key from its file form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::invalid(format!("bad value {value:?} for {key}"));
        fn p<T: std::str::FromStr>(v: &str, bad: impl Fn() -> Error) -> Result<T> {
            v.parse().map_err(|_| bad())
        }
        let flag = |v: &str| match v {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            _ => Err(bad()),
        };
        match key {
            "seed" => self.seed = p(value, bad)?,
            "k" => self.k = p(value, bad)?,
            "max_iterations" => self.max_iterations = p(value, bad)?,
            "tolerance" => self.tolerance = p(value, bad)?,
            "policy" => self.policy = value.parse()?,
            "segment" => self.segment = flag(value)?,
            "gch_bins" => self.gch_bins = p(value, bad)?,
            "ccv_colors" => self.ccv.n_colors = p(value, bad)?,
            "ccv_tau" => self.ccv.tau = if value == "auto" { Tau::Auto } else { Tau::Fixed(p(value, bad)?) },
            "ccv_blur" => self.ccv.blur = flag(value)?,
            "lbp_n" => self.lbp.n = p(value, bad)?,
            "lbp_r" => self.lbp.r = p(value, bad)?,
            "clbp_threshold" => {
                self.clbp_threshold = match value {
                    "magnitude" => MagnitudeThreshold::MagnitudeMean,
                    "gray" => MagnitudeThreshold::GrayMean,
                    _ => return Err(bad()),
                }
            }
            "colorspace" => self.colorspace = value.parse()?,
            "svm_c" => self.svm_c = p(value, bad)?,
            "decode" => self.decode = value.parse()?,
            "features" => self.features = parse_list(value, str::parse)?,
            "colorspaces" => self.colorspaces = parse_list(value, str::parse)?,
            "train_per_class" => self.train_per_class = parse_list(value, |s| p(s, bad))?,
            "trials" => self.trials = p(value, bad)?,
            _ => return Err(Error::invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let tau = match self.ccv.tau {
            Tau::Auto => "auto".to_string(),
            Tau::Fixed(t) => t.to_string(),
        };
        let threshold = match self.clbp_threshold {
            MagnitudeThreshold::MagnitudeMean => "magnitude",
            MagnitudeThreshold::GrayMean => "gray",
        };
        let pairs: [(&str, String); 20] = [
            ("seed", self.seed.to_string()),
            ("k", self.k.to_string()),
            ("max_iterations", self.max_iterations.to_string()),
            ("tolerance", self.tolerance.to_string()),
            ("policy", self.policy.to_string()),
            ("segment", self.segment.to_string()),
            ("gch_bins", self.gch_bins.to_string()),
            ("ccv_colors", self.ccv.n_colors.to_string()),
            ("ccv_tau", tau),
            ("ccv_blur", self.ccv.blur.to_string()),
            ("lbp_n", self.lbp.n.to_string()),
            ("lbp_r", self.lbp.r.to_string()),
            ("clbp_threshold", threshold.to_string()),
            ("colorspace", self.colorspace.to_string()),
            ("svm_c", self.svm_c.to_string()),
            ("decode", self.decode.to_string()),
            ("features", join(&self.features)),
            ("colorspaces", join(&self.colorspaces)),
            ("train_per_class", join(&self.train_per_class)),
            ("trials", self.trials.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::parse(no + 1, "expected key = value"))?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::parse(no + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// FNV-1a of the file form, as 16 hex digits.
    pub fn hash(&self) -> String {
        format!("{:016x}", seed::fnv1a(self.to_text().as_bytes()))
    }
}
