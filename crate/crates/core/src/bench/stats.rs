//! Two-sided Welch t-test for comparing evaluation cells, plus small
//! aggregation helpers shared by the report writers.
//!
//! Welch's form (unequal variances) is used for every pairwise comparison;
//! the degrees of freedom follow the Welch–Satterthwaite approximation. Two
//! degenerate situations get explicit handling so reports never carry NaNs:
//! both samples constant and equal (no evidence of a difference, p = 1) and
//! both samples constant but different (a zero-noise separation, p = 0).

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided significance threshold used in report annotations.
pub const SIG_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    /// Welch t statistic (sign follows `mean(a) - mean(b)`).
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub significant: bool,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator); 0 for fewer than 2 points.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Two-sided Welch t-test of `a` vs `b` at the [`SIG_LEVEL`] threshold.
///
/// Samples with fewer than two points on either side carry no variance
/// information; they are reported as not significant with p = 1 unless the
/// means are degenerate-separated as described in the module docs.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> TTest {
    if a.is_empty() || b.is_empty() {
        return TTest {
            t: 0.0,
            df: 0.0,
            p: 1.0,
            significant: false,
        };
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;

    if se2 == 0.0 {
        // Constant samples: either indistinguishable or trivially separated.
        return if ma == mb {
            TTest {
                t: 0.0,
                df: 0.0,
                p: 1.0,
                significant: false,
            }
        } else {
            TTest {
                t: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                df: 0.0,
                p: 0.0,
                significant: true,
            }
        };
    }

    let t = (ma - mb) / se2.sqrt();
    let df = se2.powi(2)
        / ((va / na).powi(2) / (na - 1.0).max(1.0) + (vb / nb).powi(2) / (nb - 1.0).max(1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    TTest {
        t,
        df,
        p,
        significant: p < SIG_LEVEL,
    }
}

/// Number of strict decreases in a sequence expected to be non-decreasing.
pub fn count_inversions(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] < w[0]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_t_matches_the_hand_computed_closed_form() {
        // a = 1..10: mean 5.5, sum of squared deviations
        //   2*(4.5^2 + 3.5^2 + 2.5^2 + 1.5^2 + 0.5^2) = 2*41.25 = 82.5.
        // b = 2,4,..,20: mean 11, deviations +-9,+-7,+-5,+-3,+-1, so
        //   2*(81+49+25+9+1) = 330.
        let a: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let b: Vec<f64> = (1..=10).map(|i| 2.0 * i as f64).collect();
        let r = welch_t_test(&a, &b);

        let va: f64 = 82.5 / 9.0;
        let vb: f64 = 330.0 / 9.0;
        let se2 = va / 10.0 + vb / 10.0;
        let expected_t = (5.5 - 11.0) / se2.sqrt();
        let expected_df = se2 * se2 / ((va / 10.0).powi(2) / 9.0 + (vb / 10.0).powi(2) / 9.0);
        assert!((r.t - expected_t).abs() < 1e-9, "t {} vs {}", r.t, expected_t);
        assert!((r.df - expected_df).abs() < 1e-9);
        // Standard-table neighborhood for |t| = 2.569 at ~13.2 dof.
        assert!(r.p > 0.02 && r.p < 0.03, "p {}", r.p);
        assert!(r.significant);
    }

    #[test]
    fn identical_constant_samples_give_p_one_and_no_flag() {
        let a = vec![0.7; 10];
        let r = welch_t_test(&a, &a);
        assert_eq!(r.p, 1.0);
        assert_eq!(r.t, 0.0);
        assert!(!r.significant);
    }

    #[test]
    fn constant_but_separated_samples_are_flagged_significant() {
        let zeros = vec![0.0; 10];
        let ones = vec![1.0; 10];
        let r = welch_t_test(&zeros, &ones);
        assert_eq!(r.p, 0.0);
        assert!(r.significant);
        assert!(r.t.is_infinite() && r.t < 0.0);
        let flipped = welch_t_test(&ones, &zeros);
        assert!(flipped.t.is_infinite() && flipped.t > 0.0);
    }

    #[test]
    fn swapping_samples_negates_t_and_preserves_p() {
        let a = [0.1, 0.5, 0.4, 0.9, 0.3];
        let b = [0.6, 0.8, 0.7, 1.0, 0.95];
        let ab = welch_t_test(&a, &b);
        let ba = welch_t_test(&b, &a);
        assert!((ab.t + ba.t).abs() < 1e-12);
        assert!((ab.p - ba.p).abs() < 1e-12);
        assert!((ab.df - ba.df).abs() < 1e-12);
    }

    #[test]
    fn growing_separation_shrinks_the_p_value() {
        let a = [0.2, 0.3, 0.4, 0.25, 0.35];
        let near: Vec<f64> = a.iter().map(|x| x + 0.05).collect();
        let far: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        let p_near = welch_t_test(&a, &near).p;
        let p_far = welch_t_test(&a, &far).p;
        assert!(p_far < p_near, "{p_far} !< {p_near}");
    }

    #[test]
    fn empty_samples_report_no_evidence() {
        let r = welch_t_test(&[], &[1.0, 2.0]);
        assert_eq!(r.p, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn inversion_count_marks_each_strict_decrease() {
        assert_eq!(count_inversions(&[0.1, 0.2, 0.3]), 0);
        assert_eq!(count_inversions(&[0.1, 0.1, 0.3]), 0);
        assert_eq!(count_inversions(&[0.3, 0.2, 0.4, 0.1]), 2);
        assert_eq!(count_inversions(&[]), 0);
        assert_eq!(count_inversions(&[1.0]), 0);
    }
}
