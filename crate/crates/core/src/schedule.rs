//! Hyperbolic similarity-threshold schedule.
//!
//! At iteration `iter` (1-based) the neighbour threshold is
//! `(iter - alpha) / iter`, which rises towards 1 as the loop proceeds.

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSchedule {
    alpha: f64,
    max_iters: usize,
}

impl ThresholdSchedule {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_max_iters(alpha, DEFAULT_MAX_ITERS)
    }

    pub fn with_max_iters(alpha: f64, max_iters: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must satisfy 0 < alpha < 1, got {alpha}"
            )));
        }
        if max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(ThresholdSchedule { alpha, max_iters })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters
    }

    /// Threshold for iteration `iter`.
    pub fn cst(&self, iter: usize) -> Result<f64> {
        if iter < 1 {
            return Err(Error::Domain(format!("iteration must be >= 1, got {iter}")));
        }
        let it = iter as f64;
        Ok((it - self.alpha) / it)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_substitution() {
        let s = ThresholdSchedule::new(0.02).unwrap();
        assert_eq!(s.cst(1).unwrap(), 0.98);
        assert_eq!(s.cst(2).unwrap(), 0.99);
        let s = ThresholdSchedule::new(1e-6).unwrap();
        assert_eq!(s.cst(1).unwrap(), 0.999999);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ThresholdSchedule::new(0.0).is_err());
        assert!(ThresholdSchedule::new(1.0).is_err());
        assert!(ThresholdSchedule::new(-0.1).is_err());
        assert!(ThresholdSchedule::new(f64::NAN).is_err());
        assert!(ThresholdSchedule::with_max_iters(0.1, 0).is_err());
        let s = ThresholdSchedule::new(0.1).unwrap();
        assert!(matches!(s.cst(0), Err(Error::Domain(_))));
    }

    #[test]
    fn larger_alpha_gives_lower_curve() {
        let lo = ThresholdSchedule::new(0.001).unwrap();
        let hi = ThresholdSchedule::new(0.02).unwrap();
        for it in 1..50 {
            assert!(hi.cst(it).unwrap() < lo.cst(it).unwrap());
        }
    }

    proptest::proptest! {
        #[test]
        fn monotone_and_below_one(alpha in 1e-6f64..0.99, iter in 1usize..100_000) {
            let s = ThresholdSchedule::new(alpha).unwrap();
            let a = s.cst(iter).unwrap();
            let b = s.cst(iter + 1).unwrap();
            proptest::prop_assert!(b > a);
            proptest::prop_assert!(a < 1.0 && b < 1.0);
        }
    }
}
