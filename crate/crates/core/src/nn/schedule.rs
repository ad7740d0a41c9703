use serde::{Deserialize, Serialize};

/// Step decay: the rate is multiplied by `decay_factor` at the start of each
/// milestone epoch (0-indexed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay_factor: f64,
    pub milestones: Vec<usize>,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 0.01,
            decay_factor: 0.2,
            milestones: vec![40, 60, 80],
        }
    }
}

impl LrSchedule {
    pub fn rate(&self, epoch: usize) -> f64 {
        // repeated multiplication keeps 0.01 * 0.2^k bit-equal to the decimal literals
        self.milestones
            .iter()
            .filter(|&&m| m <= epoch)
            .fold(self.initial, |rate, _| rate * self.decay_factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rates() {
        let s = LrSchedule::default();
        assert_eq!(s.rate(10), 0.01);
        assert_eq!(s.rate(45), 0.002);
        assert_eq!(s.rate(65), 0.0004);
        assert_eq!(s.rate(85), 0.00008);
    }

    #[test]
    fn milestone_boundary() {
        let s = LrSchedule::default();
        assert_eq!(s.rate(39), 0.01);
        assert_eq!(s.rate(40), 0.002);
    }

    #[test]
    fn non_increasing() {
        let s = LrSchedule::default();
        for e in 1..200 {
            assert!(s.rate(e) <= s.rate(e - 1));
        }
    }
}
