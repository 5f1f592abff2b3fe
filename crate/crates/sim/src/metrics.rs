//! Episode records and batch metrics.

use serde::{Deserialize, Serialize};

use crate::episode::Task;
use crate::reward::TerminalReason;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub task: Task,
    pub reason: TerminalReason,
    pub success: bool,
    pub steps: usize,
    pub collisions: usize,
    pub path_length: f64,
    pub shortest_path: f64,
    /// Control steps with a pedestrian within personal space.
    pub close_steps: usize,
    pub total_reward: f64,
}

impl EpisodeRecord {
    pub fn spl_term(&self) -> f64 {
        if !self.success {
            return 0.0;
        }
        let denom = self.path_length.max(self.shortest_path);
        if denom > 0.0 {
            self.shortest_path / denom
        } else {
            1.0
        }
    }

    /// Success weighted by the fraction of steps that kept personal space.
    pub fn sns_term(&self) -> f64 {
        if !self.success {
            return 0.0;
        }
        let violation = if self.steps > 0 {
            self.close_steps as f64 / self.steps as f64
        } else {
            0.0
        };
        1.0 - violation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub sr: f64,
    pub spl: f64,
    pub sns: f64,
    pub cost: f64,
}

/// Means over the batch; all zero for an empty batch.
pub fn compute_metrics(records: &[EpisodeRecord]) -> Metrics {
    if records.is_empty() {
        return Metrics::default();
    }
    let n = records.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    Metrics {
        episodes: records.len(),
        sr: mean(&|r| if r.success { 1.0 } else { 0.0 }),
        spl: mean(&|r| r.spl_term()),
        sns: mean(&|r| r.sns_term()),
        cost: mean(&|r| r.collisions as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(success: bool, p: f64, l: f64) -> EpisodeRecord {
        EpisodeRecord {
            seed: 0,
            task: Task::PointNav,
            reason: if success {
                TerminalReason::Success
            } else {
                TerminalReason::Timeout
            },
            success,
            steps: 10,
            collisions: 0,
            path_length: p,
            shortest_path: l,
            close_steps: 0,
            total_reward: 0.0,
        }
    }

    #[test]
    fn exact_shortest_paths_score_one() {
        let m = compute_metrics(&[record(true, 12.0, 12.0), record(true, 20.0, 20.0)]);
        assert_eq!((m.sr, m.spl), (1.0, 1.0));
    }

    #[test]
    fn all_failures_score_zero() {
        let m = compute_metrics(&[record(false, 12.0, 12.0), record(false, 3.0, 20.0)]);
        assert_eq!((m.sr, m.spl, m.sns), (0.0, 0.0, 0.0));
    }

    #[test]
    fn doubled_path_halves_spl() {
        assert_eq!(compute_metrics(&[record(true, 20.0, 10.0)]).spl, 0.5);
    }

    #[test]
    fn sns_discounts_close_steps() {
        let mut r = record(true, 10.0, 10.0);
        r.close_steps = 3;
        assert!((compute_metrics(&[r]).sns - 0.7).abs() < 1e-12);
    }
}
