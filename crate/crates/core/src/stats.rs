//! Replicate summaries: sample mean with a student-t confidence half-width.

use statrs::function::beta::beta_reg;

use crate::{Error, Result};

/// Two-sided student-t quantile `t_{1 - alpha/2, dof}`.
///
/// Uses `P(|T| > t) = I_{dof/(dof + t^2)}(dof/2, 1/2)` and bisects on `t`.
pub fn student_t_quantile(level: f64, dof: u64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence level {level} not in (0, 1)")));
    }
    if dof == 0 {
        return Err(Error::InvalidConfig("student-t needs at least one degree of freedom".into()));
    }
    let alpha = 1.0 - level;
    let nu = dof as f64;
    let two_sided = |t: f64| beta_reg(nu / 2.0, 0.5, nu / (nu + t * t));
    let mut hi = 1.0;
    while two_sided(hi) > alpha {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if two_sided(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean of a replicate sample and the half-width of its 95% student-t interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanInterval {
    pub mean: f64,
    pub half_width: f64,
}

impl MeanInterval {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Summarize `values` (summed in index order, so the result is reproducible).
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        Self::with_level(values, 0.95)
    }

    pub fn with_level(values: &[f64], level: f64) -> Result<Self> {
        let r = values.len();
        if r < 2 {
            return Err(Error::InvalidConfig(format!(
                "a confidence interval needs at least 2 replicates, got {r}"
            )));
        }
        let n = r as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n - 1.0)).sqrt();
        let t = student_t_quantile(level, (r - 1) as u64)?;
        Ok(Self {
            mean,
            half_width: t * sd / n.sqrt(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tabulated_quantiles() {
        // standard two-sided 95% table
        for (dof, t) in [
            (1, 12.706_204_736),
            (2, 4.302_652_730),
            (4, 2.776_445_105),
            (9, 2.262_157_163),
            (29, 2.045_229_642),
            (999, 1.962_341_461),
        ] {
            assert_abs_diff_eq!(student_t_quantile(0.95, dof).unwrap(), t, epsilon = 1e-7);
        }
    }

    #[test]
    fn identical_replicates_have_zero_width() {
        let mi = MeanInterval::from_samples(&[0.25, 0.25]).unwrap();
        assert_eq!(mi.mean, 0.25);
        assert_eq!(mi.half_width, 0.0);
    }

    #[test]
    fn hand_computed_half_widths() {
        // sd of [1, 3] is sqrt(2); t_{.975,1} * sqrt(2) / sqrt(2)
        let mi = MeanInterval::from_samples(&[1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(mi.mean, 2.0);
        assert_abs_diff_eq!(mi.half_width, 12.706_204_736, epsilon = 1e-7);
        // [1,2,3,4,5]: sd = sqrt(2.5)
        let mi = MeanInterval::from_samples(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_abs_diff_eq!(
            mi.half_width,
            2.776_445_105 * 2.5_f64.sqrt() / 5.0_f64.sqrt(),
            epsilon = 1e-7
        );
        // [0, 0, 1]: mean 1/3, sd = sqrt(1/3)
        let mi = MeanInterval::from_samples(&[0.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            mi.half_width,
            4.302_652_730 * (1.0_f64 / 3.0).sqrt() / 3.0_f64.sqrt(),
            epsilon = 1e-7
        );
        // [2, 4, 4, 4, 5, 5, 7, 9, 10, 10]: ss = 72, sd = sqrt(8)
        let v = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0, 10.0, 10.0];
        let mi = MeanInterval::from_samples(&v).unwrap();
        assert_abs_diff_eq!(mi.mean, 6.0);
        assert_abs_diff_eq!(
            mi.half_width,
            2.262_157_163 * 8.0_f64.sqrt() / 10.0_f64.sqrt(),
            epsilon = 1e-7
        );
        // [-1, 1, -1, 1]: sd = sqrt(4/3)
        let mi = MeanInterval::from_samples(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            mi.half_width,
            3.182_446_305 * (4.0_f64 / 3.0).sqrt() / 2.0,
            epsilon = 1e-7
        );
    }

    #[test]
    fn single_replicate_is_rejected() {
        assert!(MeanInterval::from_samples(&[1.0]).is_err());
    }
}
