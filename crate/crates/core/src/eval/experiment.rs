//! Accuracy sweep over descriptors, color spaces, training sizes and trials.
//!
//! Features are computed once per image; every `(descriptor, color space, M,
//! trial)` cell then trains a one-vs-one model on a fresh split. The split of
//! trial `t` depends only on the master seed and `t`, so all descriptors are
//! compared on identical partitions.

use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;

use super::dataset::{split_indices, Dataset, SplitSpec};
use super::metrics::{accuracy, per_class_accuracy};
use crate::classify::{predict_with, train_multiclass, LabeledFeatures};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{DescriptorId, FeatureColorSpace};
use crate::imageio::load_image;
use crate::pipeline::{defect_mask, masked_features};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub overall_acc: f64,
    pub per_class_acc: Vec<Option<f64>>,
}

/// One `(descriptor, color space, M)` cell; accuracies are means over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub feature: DescriptorId,
    pub colorspace: FeatureColorSpace,
    pub m: usize,
    pub overall_acc: f64,
    pub per_class_acc: Vec<Option<f64>>,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub class_names: Vec<String>,
    pub seed: u64,
    pub trials: usize,
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    pub fn row(&self, feature: &DescriptorId, colorspace: FeatureColorSpace, m: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.feature == *feature && r.colorspace == colorspace && r.m == m)
    }
}

/// Extracted feature vectors for every image of `ds`, per `(descriptor,
/// color space)` pair.
pub fn compute_features(
    ds: &Dataset,
    cfg: &PipelineConfig,
    specs: &[(DescriptorId, FeatureColorSpace)],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let per_image: Vec<Vec<Vec<f64>>> = ds
        .items
        .par_iter()
        .map(|(path, _)| {
            let img = load_image(path)?;
            let mask = defect_mask(&img, cfg)?;
            specs
                .iter()
                .map(|(d, cs)| Ok(masked_features(&img, d, *cs, mask.as_ref())?.values))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..specs.len()).map(|s| per_image.iter().map(|f| f[s].clone()).collect()).collect())
}

fn mean_option(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Runs the sweep described by `cfg` (features × color spaces × M × trials).
pub fn run_experiment(ds: &Dataset, cfg: &PipelineConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let specs: Vec<(DescriptorId, FeatureColorSpace)> = cfg
        .features
        .iter()
        .flat_map(|&k| cfg.colorspaces.iter().map(move |&cs| (k, cs)))
        .map(|(k, cs)| (cfg.descriptor(k), cs))
        .collect();
    let features = compute_features(ds, cfg, &specs)?;

    // Splits are validated up front so a bad M fails before any training.
    let splits: Vec<Vec<(Vec<usize>, Vec<usize>)>> = cfg
        .train_per_class
        .iter()
        .map(|&m| {
            (0..cfg.trials)
                .map(|t| split_indices(ds, &SplitSpec { train_per_class: m, seed: seed::derive(cfg.seed, "split", t as u64) }))
                .collect()
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize, usize)> = (0..specs.len())
        .flat_map(|s| (0..cfg.train_per_class.len()).flat_map(move |m| (0..cfg.trials).map(move |t| (s, m, t))))
        .collect();
    let n_classes = ds.classes.len();
    let results: Vec<TrialResult> = cells
        .par_iter()
        .map(|&(s, m, t)| {
            let (train, test) = &splits[m][t];
            let (descriptor, colorspace) = specs[s];
            let labeled = LabeledFeatures {
                class_names: ds.classes.clone(),
                descriptor,
                colorspace,
                examples: train.iter().map(|&i| (ds.items[i].1, features[s][i].clone())).collect(),
            };
            let model = train_multiclass(&labeled, cfg.svm_c, seed::derive(cfg.seed, "svm", t as u64))?;
            let predicted = test
                .iter()
                .map(|&i| Ok(predict_with(&model, &features[s][i], cfg.decode)?.class))
                .collect::<Result<Vec<_>>>()?;
            let truth: Vec<usize> = test.iter().map(|&i| ds.items[i].1).collect();
            Ok(TrialResult {
                overall_acc: accuracy(&predicted, &truth)?,
                per_class_acc: per_class_accuracy(&predicted, &truth, n_classes)?,
            })
        })
        .collect::<Result<_>>()?;

    let rows = results
        .chunks(cfg.trials)
        .enumerate()
        .map(|(cell, trials)| {
            let s = cell / cfg.train_per_class.len();
            let m = cfg.train_per_class[cell % cfg.train_per_class.len()];
            ReportRow {
                feature: specs[s].0,
                colorspace: specs[s].1,
                m,
                overall_acc: trials.iter().map(|t| t.overall_acc).sum::<f64>() / trials.len() as f64,
                per_class_acc: (0..n_classes).map(|c| mean_option(trials.iter().map(|t| t.per_class_acc[c]))).collect(),
                trials: trials.to_vec(),
            }
        })
        .collect();

    Ok(EvaluationReport {
        class_names: ds.classes.clone(),
        seed: cfg.seed,
        trials: cfg.trials,
        config_hash: cfg.hash(),
        rows,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl EvaluationReport {
    /// CSV with `#` metadata lines, then
    /// `feature,colorspace,M,trial,overall_acc,acc_<class>...`: one row per
    /// trial followed by a `mean` row per cell.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut meta = String::new();
        let _ = writeln!(meta, "# seed={}", self.seed);
        let _ = writeln!(meta, "# trials={}", self.trials);
        let _ = writeln!(meta, "# config_hash={}", self.config_hash);
        out.write_all(meta.as_bytes())?;

        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["feature", "colorspace", "M", "trial", "overall_acc"].map(String::from).to_vec();
        header.extend(self.class_names.iter().map(|c| format!("acc_{c}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let lead = [row.feature.to_string(), row.colorspace.to_string(), row.m.to_string()];
            for (t, trial) in row.trials.iter().enumerate() {
                let mut rec = lead.to_vec();
                rec.push(t.to_string());
                rec.push(trial.overall_acc.to_string());
                rec.extend(trial.per_class_acc.iter().map(|&v| fmt_opt(v)));
                w.write_record(&rec)?;
            }
            let mut rec = lead.to_vec();
            rec.push("mean".into());
            rec.push(row.overall_acc.to_string());
            rec.extend(row.per_class_acc.iter().map(|&v| fmt_opt(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    /// Parses the output of [`EvaluationReport::write_csv`].
    pub fn read_csv(mut input: impl Read) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut seed = None;
        let mut trials = None;
        let mut config_hash = None;
        let mut meta_lines = 0;
        for (i, line) in text.lines().enumerate() {
            let Some(meta) = line.strip_prefix('#') else { break };
            meta_lines += 1;
            let (key, value) = meta.trim().split_once('=').ok_or_else(|| Error::parse(i + 1, "expected # key=value"))?;
            let bad = |_| Error::parse(i + 1, format!("bad {key}"));
            match key {
                "seed" => seed = Some(value.parse::<u64>().map_err(bad)?),
                "trials" => trials = Some(value.parse::<usize>().map_err(bad)?),
                "config_hash" => config_hash = Some(value.to_string()),
                _ => return Err(Error::parse(i + 1, format!("unknown metadata key {key:?}"))),
            }
        }
        let (Some(seed), Some(trials), Some(config_hash)) = (seed, trials, config_hash) else {
            return Err(Error::parse(1, "missing seed, trials or config_hash metadata"));
        };
        let body: String = text.lines().skip(meta_lines).flat_map(|l| [l, "\n"]).collect();
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let header = rdr.headers()?.clone();
        let fixed = ["feature", "colorspace", "M", "trial", "overall_acc"];
        if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
            return Err(Error::parse(meta_lines + 1, "unexpected report header"));
        }
        let class_names: Vec<String> = header
            .iter()
            .skip(fixed.len())
            .map(|h| h.strip_prefix("acc_").map(str::to_string).ok_or_else(|| Error::parse(meta_lines + 1, "class column must start with acc_")))
            .collect::<Result<_>>()?;

        let mut rows: Vec<ReportRow> = Vec::new();
        let mut pending: Vec<TrialResult> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = meta_lines + i + 2;
            let rec = rec?;
            let perr = |what: &str| Error::parse(line, format!("bad {what}"));
            let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| perr(what));
            let feature: DescriptorId = rec[0].parse().map_err(|_| perr("feature"))?;
            let colorspace: FeatureColorSpace = rec[1].parse().map_err(|_| perr("colorspace"))?;
            let m: usize = rec[2].parse().map_err(|_| perr("M"))?;
            let overall_acc = num(&rec[4], "overall_acc")?;
            let per_class_acc = rec
                .iter()
                .skip(fixed.len())
                .map(|v| if v.is_empty() { Ok(None) } else { num(v, "class accuracy").map(Some) })
                .collect::<Result<Vec<_>>>()?;
            if &rec[3] == "mean" {
                rows.push(ReportRow { feature, colorspace, m, overall_acc, per_class_acc, trials: std::mem::take(&mut pending) });
            } else {
                let t: usize = rec[3].parse().map_err(|_| perr("trial"))?;
                if t != pending.len() {
                    return Err(perr("trial index"));
                }
                pending.push(TrialResult { overall_acc, per_class_acc });
            }
        }
        if !pending.is_empty() {
            return Err(Error::parse(text.lines().count(), "trial rows without a mean row"));
        }
        Ok(Self { class_names, seed, trials, config_hash, rows })
    }
}
