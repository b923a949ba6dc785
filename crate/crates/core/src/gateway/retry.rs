//! Exponential backoff schedule.

use std::time::Duration;

#[derive(Clone, Debug, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Wait before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = self.multiplier.powi(retry.saturating_sub(1) as i32);
        let d = self.base_delay.as_secs_f64() * factor;
        Duration::from_secs_f64(d.min(self.max_delay.as_secs_f64()))
    }

    pub fn schedule(&self) -> Vec<Duration> {
        (1..self.max_attempts).map(|r| self.delay(r)).collect()
    }

    /// Strict upper bound on time spent sleeping across all retries.
    pub fn ceiling(&self) -> Duration {
        self.max_delay * self.max_attempts.max(1)
    }
}
