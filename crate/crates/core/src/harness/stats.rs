use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// One-sided lower confidence bound on the mean of paired differences
/// under a Student-t model. Needs at least two pairs.
pub fn paired_lower_bound(diffs: &[f64], confidence: f64) -> Option<f64> {
    if diffs.len() < 2 {
        return None;
    }
    let (mean, sd) = mean_std(diffs);
    let dof = (diffs.len() - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, dof).ok()?.inverse_cdf(confidence);
    Some(mean - t * sd / (diffs.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_bound_matches_table() {
        // t_{0.95, 9} = 1.833113
        let diffs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let (mean, sd) = mean_std(&diffs);
        let lb = paired_lower_bound(&diffs, 0.95).unwrap();
        let expected = mean - 1.833113 * sd / 10f64.sqrt();
        assert!((lb - expected).abs() < 1e-5, "{lb} vs {expected}");
        assert!(paired_lower_bound(&[1.0], 0.95).is_none());
    }
}
