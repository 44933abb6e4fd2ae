//! Silhouette scoring for two labeled point sets.
//!
//! The classical definition, computed in the full feature space: for each
//! point, a = mean distance to its own class (excluding itself), b = mean
//! distance to the other class, s = (b − a) / max(a, b), with s = 0 when
//! both means vanish. The returned score is the mean of s over all points
//! and always lies in [−1, 1].

use crate::error::AnalysisError;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean silhouette of row-major n×dim points under binary labels.
pub fn silhouette(features: &[f64], dim: usize, labels: &[bool]) -> Result<f64, AnalysisError> {
    if dim == 0 {
        return Err(AnalysisError::InvalidInput("dim must be positive".into()));
    }
    if features.len() != labels.len() * dim {
        return Err(AnalysisError::InvalidInput(format!(
            "{} feature values do not form {} rows of dim {dim}",
            features.len(),
            labels.len()
        )));
    }
    let n = labels.len();
    for class in [false, true] {
        let size = labels.iter().filter(|&&l| l == class).count();
        if size < 2 {
            return Err(AnalysisError::ClassTooSmall { label: class, size });
        }
    }

    let row = |i: usize| &features[i * dim..(i + 1) * dim];
    let mut total = 0.0;
    for i in 0..n {
        let mut same_sum = 0.0;
        let mut same_count = 0usize;
        let mut other_sum = 0.0;
        let mut other_count = 0usize;
        for j in 0..n {
            if j == i {
                continue;
            }
            let dist = euclidean(row(i), row(j));
            if labels[j] == labels[i] {
                same_sum += dist;
                same_count += 1;
            } else {
                other_sum += dist;
                other_count += 1;
            }
        }
        let a = same_sum / same_count as f64;
        let b = other_sum / other_count as f64;
        let denom = a.max(b);
        total += if denom == 0.0 { 0.0 } else { (b - a) / denom };
    }
    Ok(total / n as f64)
}
