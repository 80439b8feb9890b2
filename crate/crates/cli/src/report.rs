//! Cross-validation of the two solvers: per-sample z-scores of the mean
//! excitation and an overall verdict.

use serde::Serialize;

/// One sample-time comparison between the deterministic and stochastic runs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleComparison {
    pub time: f64,
    pub master_mean: f64,
    pub qsd_mean: f64,
    pub stderr: f64,
    /// |difference| in units of the standard error.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub samples: Vec<SampleComparison>,
    /// Fraction of samples with z <= 3.
    pub fraction_within: f64,
    pub passed: bool,
}

/// Verdict rule: the stochastic mean must sit within 3 standard errors of
/// the master-equation value at no less than 95% of sample points. An
/// undersized ensemble (stderr ~ 0 with a real difference) fails the verdict
/// but is not an error; the report is the answer.
pub fn compare_methods(
    times: &[f64],
    master_mean: &[f64],
    qsd_mean: &[f64],
    stderr: &[f64],
) -> MethodReport {
    assert_eq!(times.len(), master_mean.len());
    assert_eq!(times.len(), qsd_mean.len());
    assert_eq!(times.len(), stderr.len());

    let samples: Vec<SampleComparison> = times
        .iter()
        .zip(master_mean)
        .zip(qsd_mean)
        .zip(stderr)
        .map(|(((t, m), q), s)| {
            // The floor keeps exactly-agreeing series (z = 0/0) well defined
            // without masking genuine disagreement at realistic noise levels.
            let spread = s.max(1e-9);
            SampleComparison {
                time: *t,
                master_mean: *m,
                qsd_mean: *q,
                stderr: *s,
                z: (m - q).abs() / spread,
            }
        })
        .collect();

    let within = samples.iter().filter(|c| c.z <= 3.0).count();
    let fraction_within = if samples.is_empty() {
        1.0
    } else {
        within as f64 / samples.len() as f64
    };
    MethodReport {
        samples,
        fraction_within,
        passed: fraction_within >= 0.95,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_pass() {
        let t = [0.0, 1.0, 2.0];
        let m = [1.0, 0.5, 0.25];
        let report = compare_methods(&t, &m, &m, &[0.0, 0.0, 0.0]);
        assert!(report.passed);
        assert_eq!(report.fraction_within, 1.0);
        assert!(report.samples.iter().all(|c| c.z == 0.0));
    }

    #[test]
    fn single_trajectory_statistics_fail_without_erroring() {
        // One trajectory reports stderr 0 while sitting far from the mean;
        // every sample lands outside 3 sigma.
        let t = [0.0, 1.0];
        let master = [0.5, 0.3];
        let qsd = [1.0, 0.0];
        let report = compare_methods(&t, &master, &qsd, &[0.0, 0.0]);
        assert!(!report.passed);
        assert_eq!(report.fraction_within, 0.0);
    }

    #[test]
    fn tolerates_a_single_outlier_in_a_long_series() {
        let n = 40;
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let master = vec![1.0; n];
        let mut qsd = vec![1.01; n];
        qsd[7] = 2.0;
        let stderr = vec![0.01; n];
        let report = compare_methods(&times, &master, &qsd, &stderr);
        assert!(report.passed);
        assert!(report.fraction_within > 0.95);
        assert!(report.samples[7].z > 3.0);
    }
}
