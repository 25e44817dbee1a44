//! Feature CSV: `path,label,descriptor_id,v0,v1,...`, one row per image.
//!
//! `descriptor_id` is `<descriptor>@<colorspace>`, e.g.
//! `clbp:n=8;r=1;m=magnitude@hsv`. Values use shortest round-trip decimal
//! formatting.

use std::io::{Read, Write};

use super::{DescriptorId, FeatureColorSpace};
use crate::classify::LabeledFeatures;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub path: String,
    pub label: String,
    pub descriptor: DescriptorId,
    pub colorspace: FeatureColorSpace,
    pub values: Vec<f64>,
}

pub fn feature_spec_id(descriptor: &DescriptorId, colorspace: FeatureColorSpace) -> String {
    format!("{descriptor}@{colorspace}")
}

fn parse_spec_id(s: &str) -> Result<(DescriptorId, FeatureColorSpace)> {
    let (d, cs) = s.rsplit_once('@').ok_or_else(|| Error::invalid(format!("descriptor id {s:?} lacks @colorspace")))?;
    Ok((d.parse()?, cs.parse()?))
}

pub fn write_feature_csv(out: impl Write, records: &[FeatureRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = records.first().map_or(0, |r| r.values.len());
    let mut header = vec!["path".to_string(), "label".into(), "descriptor_id".into()];
    header.extend((0..dim).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for r in records {
        if r.values.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, actual: r.values.len() });
        }
        let mut row = vec![r.path.clone(), r.label.clone(), feature_spec_id(&r.descriptor, r.colorspace)];
        row.extend(r.values.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv(input: impl Read) -> Result<Vec<FeatureRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "path" || &header[1] != "label" || &header[2] != "descriptor_id" {
        return Err(Error::parse(1, "expected header path,label,descriptor_id,v0,..."));
    }
    let dim = header.len() - 3;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row?;
        let (descriptor, colorspace) = parse_spec_id(&row[2]).map_err(|e| Error::parse(line, e.to_string()))?;
        let values = row
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>().map_err(|_| Error::parse(line, format!("bad value {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(Error::parse(line, format!("expected {dim} values, found {}", values.len())));
        }
        out.push(FeatureRecord { path: row[0].to_string(), label: row[1].to_string(), descriptor, colorspace, values });
    }
    Ok(out)
}

/// Groups records into a training set; classes are the sorted unique labels.
/// All records must share one descriptor and color space.
pub fn to_labeled(records: &[FeatureRecord]) -> Result<LabeledFeatures> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    if let Some(r) = records.iter().find(|r| r.descriptor != first.descriptor || r.colorspace != first.colorspace) {
        return Err(Error::invalid(format!(
            "mixed feature specs: {} and {}",
            feature_spec_id(&first.descriptor, first.colorspace),
            feature_spec_id(&r.descriptor, r.colorspace)
        )));
    }
    let mut class_names: Vec<String> = records.iter().map(|r| r.label.clone()).collect();
    class_names.sort();
    class_names.dedup();
    let examples = records
        .iter()
        .map(|r| (class_names.binary_search(&r.label).expect("label present"), r.values.clone()))
        .collect();
    Ok(LabeledFeatures { class_names, descriptor: first.descriptor, colorspace: first.colorspace, examples })
}
