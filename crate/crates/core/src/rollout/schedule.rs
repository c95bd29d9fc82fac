use crate::error::{Error, Result};

/// `N` noise levels split into `S` equal stages.
///
/// Step `k` takes a latent from `levels[k]` to `levels[k + 1]`, with an
/// implicit final level of zero after the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    levels: Vec<f64>,
    stages: usize,
}

impl NoiseSchedule {
    /// Linear levels `σ_k = 1 − k/N`.
    pub fn linear(steps: usize, stages: usize) -> Result<Self> {
        let levels = (0..steps).map(|k| 1.0 - k as f64 / steps as f64).collect();
        Self::from_levels(levels, stages)
    }

    pub fn from_levels(levels: Vec<f64>, stages: usize) -> Result<Self> {
        let steps = levels.len();
        if steps == 0 || stages == 0 || !steps.is_multiple_of(stages) {
            return Err(Error::InvalidArgument(format!(
                "{steps} steps cannot be split into {stages} equal stages"
            )));
        }
        if levels.windows(2).any(|w| !(w[0] > w[1])) || levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidArgument("noise levels must be finite, non-negative and strictly decreasing".into()));
        }
        Ok(Self { levels, stages })
    }

    /// `N`
    pub fn steps(&self) -> usize {
        self.levels.len()
    }

    /// `S`
    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn steps_per_stage(&self) -> usize {
        self.levels.len() / self.stages
    }

    /// Noise level after `steps_done` steps; zero once all steps are done.
    pub fn sigma(&self, steps_done: usize) -> f64 {
        self.levels.get(steps_done).copied().unwrap_or(0.0)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_partition() {
        let s = NoiseSchedule::linear(64, 8).unwrap();
        assert_eq!(s.steps_per_stage(), 8);
        assert_eq!(s.sigma(0), 1.0);
        assert_eq!(s.sigma(63), 1.0 / 64.0);
        assert_eq!(s.sigma(64), 0.0);
    }

    #[test]
    fn rejects_bad_partitions() {
        assert!(NoiseSchedule::linear(64, 7).is_err());
        assert!(NoiseSchedule::linear(0, 1).is_err());
        assert!(NoiseSchedule::from_levels(vec![1.0, 1.0], 1).is_err());
        assert!(NoiseSchedule::from_levels(vec![1.0, 0.5], 1).is_ok());
    }
}
