//! Raw and Poissonized samples of the mark model, and the checks run on them.

mod checks;
mod sampler;
mod sandwich;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checks::{
    count_check, independence_check, rare_frequencies, CountReport, CountStats,
    IndependenceReport,
};
pub use sampler::{
    Group, Mark, MarkComponent, MarkSampler, PointProcessSample, RawSample, Sums, VectorLaw,
    MAX_DIM,
};
pub use sandwich::{
    verify_sandwich_exact, verify_sandwich_mc, GapReport, SandwichMethod, SandwichReport,
    DEFAULT_GRID_POINTS, MIN_SANDWICH_REPS,
};

/// Closed axis-aligned box `[lo_1, hi_1] × ⋯ × [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() > MAX_DIM {
            return Err(Error::InvalidParam(format!(
                "box corners of dimension {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidParam(format!("empty box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &Mark) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(x)
            .all(|((l, h), v)| l <= v && v <= h)
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .any(|((l1, h1), (l2, h2))| h1 < l2 || h2 < l1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxes() {
        let a = Region::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b = Region::new(vec![1.0, 2.0], vec![3.0, 3.0]).unwrap();
        let c = Region::new(vec![1.0, 0.5], vec![3.0, 3.0]).unwrap();
        assert!(a.is_disjoint(&b));
        assert!(!a.is_disjoint(&c));
        assert!(a.contains(&[1.0, 0.0, 0.0]));
        assert!(!a.contains(&[1.0, 1.5, 0.0]));
        assert!(Region::new(vec![1.0], vec![0.0]).is_err());
        assert!(Region::new(vec![1.0], vec![2.0, 3.0]).is_err());
    }
}
