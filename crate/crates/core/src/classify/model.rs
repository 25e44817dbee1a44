use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::idtable::{build_id_table, decode_with, DecodeMetric, IdTable};
use super::svm::{train_binary, BinarySvm};
use crate::error::{Error, Result};
use crate::features::{DescriptorId, FeatureColorSpace};
use crate::seed;

const MAGIC: &str = "fruitdx-msvm";
const FORMAT_VERSION: u32 = 1;

/// Feature vectors with class indices into `class_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub class_names: Vec<String>,
    pub descriptor: DescriptorId,
    pub colorspace: FeatureColorSpace,
    pub examples: Vec<(usize, Vec<f64>)>,
}

/// One-vs-one multi-class linear SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct MsvmModel {
    pub id_table: IdTable,
    /// Index-aligned with `id_table.columns()`.
    pub learners: Vec<BinarySvm>,
    pub descriptor: DescriptorId,
    pub colorspace: FeatureColorSpace,
    pub class_names: Vec<String>,
    pub c: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub outcomes: Vec<i8>,
    pub distances: Vec<f64>,
}

/// Trains one binary SVM per class pair on that pair's examples only.
/// Learner `c` gets seed `derive(seed, "svm", c)`.
pub fn train_multiclass(train: &LabeledFeatures, c: f64, seed: u64) -> Result<MsvmModel> {
    let n = train.class_names.len();
    let table = build_id_table(n)?;
    let mut by_class: Vec<Vec<&[f64]>> = vec![Vec::new(); n];
    for (label, x) in &train.examples {
        let slot = by_class
            .get_mut(*label)
            .ok_or_else(|| Error::invalid(format!("class index {label} out of range")))?;
        slot.push(x.as_slice());
    }
    if let Some(missing) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::MissingClass(train.class_names[missing].clone()));
    }
    let learners = table
        .columns()
        .par_iter()
        .enumerate()
        .map(|(col, &(i, j))| {
            let mut svm = train_binary(&by_class[i], &by_class[j], c, seed::derive(seed, "svm", col as u64))?;
            svm.class_pos = i;
            svm.class_neg = j;
            Ok(svm)
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = learners[0].weights.len();
    if learners.iter().any(|l| l.weights.len() != dim) {
        return Err(Error::DimensionMismatch { expected: format!("{dim} features"), actual: "mixed lengths".into() });
    }
    Ok(MsvmModel {
        id_table: table,
        learners,
        descriptor: train.descriptor,
        colorspace: train.colorspace,
        class_names: train.class_names.clone(),
        c,
        seed,
    })
}

pub fn predict(model: &MsvmModel, x: &[f64]) -> Result<Prediction> {
    predict_with(model, x, DecodeMetric::Literal)
}

pub fn predict_with(model: &MsvmModel, x: &[f64], metric: DecodeMetric) -> Result<Prediction> {
    let dim = model.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: format!("{dim} features"), actual: format!("{}", x.len()) });
    }
    let outcomes: Vec<i8> = model.learners.iter().map(|l| l.outcome(x)).collect();
    let (class, distances) = decode_with(&outcomes, &model.id_table, metric)?;
    Ok(Prediction { class, outcomes, distances })
}

impl MsvmModel {
    pub fn dim(&self) -> usize {
        self.learners.first().map_or(0, |l| l.weights.len())
    }

    /// Line-oriented text form. Floats use Rust's shortest round-trip
    /// formatting, so reading back gives bit-identical weights.
    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(s, "n_classes {}", self.class_names.len());
        for name in &self.class_names {
            if name.is_empty() || name.contains(['\n', '\r']) {
                return Err(Error::invalid(format!("class name {name:?} cannot be stored")));
            }
            let _ = writeln!(s, "class {name}");
        }
        let _ = writeln!(s, "feature {}", self.descriptor);
        let _ = writeln!(s, "colorspace {}", self.colorspace);
        let _ = writeln!(s, "C {}", self.c);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "dim {}", self.dim());
        for l in &self.learners {
            let _ = writeln!(s, "learner {} {} {}", l.class_pos, l.class_neg, l.seed);
            let _ = writeln!(s, "bias {}", l.bias);
            s.push_str("weights");
            for w in &l.weights {
                let _ = write!(s, " {w}");
            }
            s.push('\n');
        }
        s.push_str("end\n");
        Ok(s)
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        out.write_all(self.to_text()?.as_bytes())?;
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
        let mut cursor = lines.iter().enumerate().map(|(i, l)| (i + 1, l.as_str()));
        let mut next = |key: &str| -> Result<(usize, String)> {
            let (no, line) = cursor.next().ok_or_else(|| Error::parse(lines.len() + 1, format!("expected {key}")))?;
            let rest = line
                .strip_prefix(key)
                .and_then(|r| if r.is_empty() { Some("") } else { r.strip_prefix(' ') })
                .ok_or_else(|| Error::parse(no, format!("expected {key}, found {line:?}")))?;
            Ok((no, rest.to_string()))
        };
        fn num<T: std::str::FromStr>(no: usize, s: &str) -> Result<T> {
            s.parse().map_err(|_| Error::parse(no, format!("bad number {s:?}")))
        }

        let (no, version) = next(MAGIC)?;
        if num::<u32>(no, &version)? != FORMAT_VERSION {
            return Err(Error::parse(no, format!("unsupported format version {version}")));
        }
        let (no, n) = next("n_classes")?;
        let n: usize = num(no, &n)?;
        let class_names = (0..n).map(|_| next("class").map(|(_, name)| name)).collect::<Result<Vec<_>>>()?;
        let (no, feature) = next("feature")?;
        let descriptor: DescriptorId = feature.parse().map_err(|e: Error| Error::parse(no, e.to_string()))?;
        let (no, cs) = next("colorspace")?;
        let colorspace: FeatureColorSpace = cs.parse().map_err(|e: Error| Error::parse(no, e.to_string()))?;
        let (no, c) = next("C")?;
        let c: f64 = num(no, &c)?;
        let (no, s) = next("seed")?;
        let model_seed: u64 = num(no, &s)?;
        let (no, d) = next("dim")?;
        let dim: usize = num(no, &d)?;

        let id_table = build_id_table(n).map_err(|e| Error::parse(no, e.to_string()))?;
        let mut learners = Vec::with_capacity(id_table.n_columns());
        for &(i, j) in id_table.columns() {
            let (no, head) = next("learner")?;
            let parts: Vec<&str> = head.split(' ').collect();
            if parts.len() != 3 || num::<usize>(no, parts[0])? != i || num::<usize>(no, parts[1])? != j {
                return Err(Error::parse(no, format!("expected learner {i} {j}, found {head:?}")));
            }
            let learner_seed: u64 = num(no, parts[2])?;
            let (no, b) = next("bias")?;
            let bias: f64 = num(no, &b)?;
            let (no, w) = next("weights")?;
            let weights = w.split(' ').filter(|t| !t.is_empty()).map(|t| num(no, t)).collect::<Result<Vec<f64>>>()?;
            if weights.len() != dim {
                return Err(Error::parse(no, format!("expected {dim} weights, found {}", weights.len())));
            }
            learners.push(BinarySvm { class_pos: i, class_neg: j, weights, bias, c, seed: learner_seed });
        }
        next("end")?;
        Ok(MsvmModel { id_table, learners, descriptor, colorspace, class_names, c, seed: model_seed })
    }
}
