use std::time::Duration;

use rand::Rng;

/// Exponential backoff with full jitter on the upper half of each delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            factor: 2.0,
        }
    }
}

/// Outcome of a single attempt, as seen by [`RetryPolicy::run`].
pub enum Attempt<T, E> {
    Done(T),
    Retry(E),
    Fatal(E),
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            ..Self::default()
        }
    }

    /// Delay before retry number `retry` (0-based), before jitter.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(retry as i32))
    }

    fn jittered(&self, retry: u32) -> Duration {
        let nominal = self.nominal_delay(retry);
        let scale = rand::rng().random_range(0.5..=1.0);
        nominal.mul_f64(scale)
    }

    /// Runs `op` until it succeeds, fails fatally, or the retry budget is
    /// spent. On exhaustion returns the last error with the number of
    /// attempts made.
    pub fn run<T, E>(&self, mut op: impl FnMut(u32) -> Attempt<T, E>) -> Result<T, (E, u32)> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match op(attempt) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(e) => return Err((e, attempt)),
                Attempt::Retry(e) => {
                    if attempt > self.max_retries {
                        return Err((e, attempt));
                    }
                    log::debug!("attempt {attempt} failed, backing off");
                    std::thread::sleep(self.jittered(attempt - 1));
                }
            }
        }
    }
}
