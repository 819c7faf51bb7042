//! Fairness and stability statistics over goodput series.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JainIndex {
    pub value: f64,
    /// Every input was zero; `value` is then 1.0 by convention.
    pub all_zero: bool,
}

/// (Σx)² / (n·Σx²). Empty or all-zero input yields 1.0 with the flag set.
pub fn jain_index(values: &[f64]) -> JainIndex {
    debug_assert!(values.iter().all(|v| *v >= 0.0), "negative rate");
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if values.is_empty() || sum_sq == 0.0 {
        return JainIndex {
            value: 1.0,
            all_zero: true,
        };
    }
    let n = values.len() as f64;
    JainIndex {
        value: (sum * sum / (n * sum_sq)).clamp(1.0 / n, 1.0),
        all_zero: false,
    }
}

/// Earliest time after which every flow's share of total goodput stays
/// within `band` (absolute) of 1/n until the end of the series.
///
/// `series[i][k]` is flow i's goodput at `times[k]`. Instants with zero
/// total goodput count as not converged.
pub fn convergence_time(times: &[f64], series: &[Vec<f64>], band: f64) -> Option<f64> {
    let n = series.len();
    if n < 2 || times.is_empty() {
        return None;
    }
    assert!(series.iter().all(|s| s.len() == times.len()), "series not aligned");
    let fair = 1.0 / n as f64;
    let within = |k: usize| {
        let total: f64 = series.iter().map(|s| s[k]).sum();
        total > 0.0 && series.iter().all(|s| (s[k] / total - fair).abs() <= band + 1e-12)
    };
    let mut first = None;
    for k in (0..times.len()).rev() {
        if !within(k) {
            break;
        }
        first = Some(times[k]);
    }
    first
}

/// Coefficient of variation (population standard deviation over mean).
/// Zero for an empty or all-zero series.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn jain_examples() {
        assert_eq!(jain_index(&[5.0, 5.0]).value, 1.0);
        assert_eq!(jain_index(&[10.0, 0.0]).value, 0.5);
        // (8+2)^2 / (2 * (64+4)) = 100/136
        assert_relative_eq!(jain_index(&[8.0, 2.0]).value, 100.0 / 136.0);
        let z = jain_index(&[0.0, 0.0]);
        assert!(z.all_zero);
        assert_eq!(z.value, 1.0);
    }

    #[test]
    fn convergence_examples() {
        let times: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let same = vec![vec![5.0; 100], vec![5.0; 100]];
        assert_eq!(convergence_time(&times, &same, 0.2), Some(0.0));
        let starved = vec![vec![10.0; 100], vec![0.0; 100]];
        assert_eq!(convergence_time(&times, &starved, 0.2), None);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn cov_of_constant_is_zero() {
        assert_eq!(coefficient_of_variation(&[3.0; 10]), 0.0);
        assert_relative_eq!(coefficient_of_variation(&[1.0, 3.0]), 0.5);
    }

    proptest! {
        #[test]
        fn jain_bounds_scale_and_permutation(
            mut xs in proptest::collection::vec(0.0f64..1e7, 1..12),
            c in 1e-3f64..1e3,
        ) {
            let j = jain_index(&xs);
            let n = xs.len() as f64;
            prop_assert!(j.value >= 1.0 / n - 1e-12 && j.value <= 1.0 + 1e-12);
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            prop_assert!((jain_index(&scaled).value - j.value).abs() < 1e-9);
            xs.reverse();
            prop_assert!((jain_index(&xs).value - j.value).abs() < 1e-9);
        }
    }
}
