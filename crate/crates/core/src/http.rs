//! JSON-over-HTTP POST with bounded retries, shared by the remote embedding
//! backend and the remote anonymizer.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay_ms: 500, max_delay_ms: 30_000 }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << attempt.min(20));
        Duration::from_millis(ms.min(self.max_delay_ms))
    }
}

#[derive(Debug)]
pub struct HttpFailure {
    pub attempts: u32,
    pub message: String,
}

pub fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

fn retriable(status: u16) -> bool {
    status == 429 || status >= 500
}

pub fn post_json<Req, Resp>(
    agent: &ureq::Agent,
    url: &str,
    bearer: Option<&str>,
    body: &Req,
    policy: &RetryPolicy,
) -> Result<Resp, HttpFailure>
where
    Req: Serialize,
    Resp: DeserializeOwned,
{
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        let mut req = agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let (message, retry) = match req.send_json(body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                if (200..300).contains(&status) {
                    return resp.body_mut().read_json::<Resp>().map_err(|e| HttpFailure {
                        attempts: attempt,
                        message: format!("malformed response body: {e}"),
                    });
                }
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                (format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()), retriable(status))
            }
            Err(e) => (format!("transport error: {e}"), true),
        };
        if !retry || attempt > policy.max_retries {
            return Err(HttpFailure { attempts: attempt, message });
        }
        let wait = policy.delay(attempt - 1);
        tracing::warn!(url, attempt, ?wait, "{message}; retrying");
        std::thread::sleep(wait);
    }
}
