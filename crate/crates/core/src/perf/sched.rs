use crate::error::{Result, SimError};

/// What a queued request needs from its bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueuedRow {
    /// Target row, `None` for operations that need a precharged bank.
    pub row: Option<u32>,
}

/// FR-FCFS with a cap on consecutive row hits.
///
/// `queue` is ordered oldest first. Returns the index to serve next: the
/// oldest row hit while fewer than `cap` hits were served in a row,
/// otherwise the oldest request.
pub fn schedule(queue: &[QueuedRow], open_row: Option<u32>, hit_streak: u32, cap: u32) -> Option<usize> {
    if queue.is_empty() {
        return None;
    }
    if hit_streak < cap {
        if let Some(open) = open_row {
            if let Some(i) = queue.iter().position(|q| q.row == Some(open)) {
                return Some(i);
            }
        }
    }
    Some(0)
}

/// Sum over cores of shared-run progress rate relative to the alone run.
pub fn weighted_speedup(shared: &[f64], alone: &[f64]) -> Result<f64> {
    if shared.len() != alone.len() {
        return Err(SimError::Metric("shared and alone rate lists differ in length".into()));
    }
    shared
        .iter()
        .zip(alone)
        .map(|(&s, &a)| {
            if a > 0.0 && a.is_finite() {
                Ok(s / a)
            } else {
                Err(SimError::Metric(format!("alone progress rate must be positive, got {a}")))
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_lets_the_miss_through_after_four_hits() {
        let mut q = vec![QueuedRow { row: Some(9) }];
        q.extend(std::iter::repeat_n(QueuedRow { row: Some(3) }, 5));
        let mut streak = 0;
        let mut order = Vec::new();
        while let Some(i) = schedule(&q, Some(3), streak, 4) {
            let r = q.remove(i);
            order.push(r.row.unwrap());
            if r.row == Some(3) {
                streak += 1;
            } else {
                break;
            }
        }
        assert_eq!(order, vec![3, 3, 3, 3, 9]);
        assert_eq!(schedule(&[], Some(3), 0, 4), None);
    }

    #[test]
    fn speedup_arithmetic() {
        assert_eq!(weighted_speedup(&[1.0; 5], &[1.0; 5]).unwrap(), 5.0);
        assert_eq!(weighted_speedup(&[0.5, 1.0, 1.0, 1.0, 1.0], &[1.0; 5]).unwrap(), 4.5);
        assert!((weighted_speedup(&[0.1; 5], &[1.0; 5]).unwrap() - 0.5).abs() < 1e-12);
        assert!(weighted_speedup(&[1.0], &[0.0]).is_err());
    }
}
