use serde::{Deserialize, Serialize};

use crate::shape::CorrespondenceSet;
use crate::{Error, Result};

/// Five-number summary plus mean. Quartiles are Tukey hinges: the medians of
/// the lower and upper halves, with the middle element shared by both halves
/// when the count is odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("cannot summarize NaN values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let half = n.div_ceil(2);
    Ok(BoxStats {
        count: n,
        min: sorted[0],
        q1: median_sorted(&sorted[..half]),
        median: median_sorted(&sorted),
        q3: median_sorted(&sorted[n - half..]),
        max: sorted[n - 1],
        mean: sorted.iter().sum::<f64>() / n as f64,
    })
}

/// `group,min,q1,median,q3,max,mean` table.
pub fn boxplot_csv<'a>(groups: impl IntoIterator<Item = (&'a str, &'a BoxStats)>) -> String {
    let mut out = String::from("group,min,q1,median,q3,max,mean\n");
    for (name, s) in groups {
        out.push_str(&format!(
            "{name},{},{},{},{},{},{}\n",
            s.min, s.q1, s.median, s.q3, s.max, s.mean
        ));
    }
    out
}

/// Per-point per-shape Euclidean errors between two correspondence sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// `errors[i][j]`: distance between point `j` of shape `i` in the two sets (mm).
    pub errors: Vec<Vec<f64>>,
    pub per_shape_mean: Vec<f64>,
    /// Over every (shape, point) entry.
    pub points: BoxStats,
    /// Over the per-shape means.
    pub shapes: BoxStats,
    pub threshold_mm: f64,
    /// Fraction of shapes whose mean error is below `threshold_mm`.
    pub fraction_below_threshold: f64,
}

pub fn point_errors(
    pred: &CorrespondenceSet,
    truth: &CorrespondenceSet,
    threshold_mm: f64,
) -> Result<ErrorSummary> {
    if pred.shape_count() != truth.shape_count() || pred.points_per_shape() != truth.points_per_shape() {
        return Err(Error::invalid(format!(
            "correspondence sets differ in size: {}x{} vs {}x{}",
            pred.shape_count(),
            pred.points_per_shape(),
            truth.shape_count(),
            truth.points_per_shape()
        )));
    }
    let errors: Vec<Vec<f64>> = pred
        .shapes()
        .iter()
        .zip(truth.shapes())
        .map(|(p, t)| {
            p.iter()
                .zip(t)
                .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
                .collect()
        })
        .collect();
    let per_shape_mean: Vec<f64> = errors
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let flat: Vec<f64> = errors.iter().flatten().copied().collect();
    let below = per_shape_mean.iter().filter(|&&m| m < threshold_mm).count();
    Ok(ErrorSummary {
        points: summarize(&flat)?,
        shapes: summarize(&per_shape_mean)?,
        fraction_below_threshold: below as f64 / per_shape_mean.len() as f64,
        threshold_mm,
        per_shape_mean,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tukey_hinges_even() {
        let s = summarize(&[6.0, 1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.5, 5.0, 6.0));
        assert_eq!(s.mean, 3.5);
    }

    #[test]
    fn tukey_hinges_odd() {
        // Median is shared by both halves: {1,2,3} and {3,4,5}.
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        let one = summarize(&[7.0]).unwrap();
        assert_eq!((one.q1, one.median, one.q3), (7.0, 7.0, 7.0));
    }

    #[test]
    fn empty_sample() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn errors_of_identical_sets_are_zero() {
        let set = CorrespondenceSet::new(vec![vec![[1.0, 2.0, 3.0]; 4]; 3]).unwrap();
        let e = point_errors(&set, &set, 2.0).unwrap();
        assert!(e.errors.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(e.fraction_below_threshold, 1.0);
    }

    #[test]
    fn three_four_five() {
        let truth = CorrespondenceSet::new(vec![vec![[0.0; 3], [1.0; 3]]]).unwrap();
        let pred = CorrespondenceSet::new(vec![vec![[3.0, 4.0, 0.0], [1.0; 3]]]).unwrap();
        let e = point_errors(&pred, &truth, 2.0).unwrap();
        assert_eq!(e.errors, vec![vec![5.0, 0.0]]);
        assert_eq!(e.per_shape_mean, vec![2.5]);
        assert_eq!(e.fraction_below_threshold, 0.0);
        let back = point_errors(&truth, &pred, 2.0).unwrap();
        assert_eq!(back.errors, e.errors);
    }

    #[test]
    fn size_mismatch() {
        let a = CorrespondenceSet::new(vec![vec![[0.0; 3]; 2]]).unwrap();
        let b = CorrespondenceSet::new(vec![vec![[0.0; 3]; 3]]).unwrap();
        assert!(point_errors(&a, &b, 2.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = summarize(&[1.0, 2.0]).unwrap();
        let csv = boxplot_csv([("unseen", &s)]);
        assert_eq!(csv, "group,min,q1,median,q3,max,mean\nunseen,1,1,1.5,2,2,1.5\n");
    }
}
