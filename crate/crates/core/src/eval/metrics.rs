use crate::error::{Error, Result};

fn check(predictions: &[usize], truth: &[usize]) -> Result<()> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), actual: predictions.len() });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Percentage of correct predictions.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    check(predictions, truth)?;
    let correct = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * correct as f64 / truth.len() as f64)
}

/// Accuracy restricted to each true class; `None` for classes with no items.
pub fn per_class_accuracy(predictions: &[usize], truth: &[usize], n_classes: usize) -> Result<Vec<Option<f64>>> {
    check(predictions, truth)?;
    let mut correct = vec![0usize; n_classes];
    let mut total = vec![0usize; n_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if t >= n_classes {
            return Err(Error::invalid(format!("class {t} out of range")));
        }
        total[t] += 1;
        if p == t {
            correct[t] += 1;
        }
    }
    Ok(correct
        .iter()
        .zip(&total)
        .map(|(&c, &n)| (n > 0).then(|| 100.0 * c as f64 / n as f64))
        .collect())
}
