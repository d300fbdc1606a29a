//! Blocking JSON-over-HTTP with retries, shared by the remote embedder and
//! the remote LLM client.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::retry::{Attempt, RetryPolicy};

#[derive(Debug)]
pub(crate) enum HttpFailure {
    /// Connection-level failure, timeout, 429 or 5xx; retried.
    Transport { attempts: u32, message: String },
    /// Any other non-success status or an undecodable body.
    Protocol(String),
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

/// Reads a bearer token from the named environment variable.
pub(crate) fn bearer_from_env(var: Option<&str>) -> Result<Option<String>, String> {
    match var {
        None => Ok(None),
        Some(name) => std::env::var(name)
            .map(Some)
            .map_err(|_| format!("environment variable {name} is not set")),
    }
}

pub(crate) fn post_json<B: Serialize, R: DeserializeOwned>(
    agent: &ureq::Agent,
    url: &str,
    bearer: Option<&str>,
    body: &B,
    retry: &RetryPolicy,
) -> Result<R, HttpFailure> {
    let result = retry.run(|_| {
        let mut req = agent.post(url).header("Content-Type", "application/json");
        if let Some(token) = bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Retry(transport(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(HttpFailure::Protocol(format!("HTTP {status}: {text}")));
        }
        match resp.body_mut().read_json::<R>() {
            Ok(v) => Attempt::Done(v),
            Err(e) => Attempt::Fatal(HttpFailure::Protocol(format!("bad response body: {e}"))),
        }
    });
    result.map_err(|(err, attempts)| match err {
        HttpFailure::Transport { message, .. } => HttpFailure::Transport { attempts, message },
        other => other,
    })
}

fn transport(message: String) -> HttpFailure {
    HttpFailure::Transport {
        attempts: 0,
        message,
    }
}

/// Counting semaphore capping in-flight requests.
pub(crate) struct Gate {
    permits: Mutex<usize>,
    freed: Condvar,
}

pub(crate) struct Permit<'a>(&'a Gate);

impl Gate {
    pub(crate) fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}
