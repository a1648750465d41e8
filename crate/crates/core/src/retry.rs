//! Retry policy and a JSON POST helper shared by the embedding and chat clients.

use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Exponential backoff without jitter, so delays are reproducible and never shrink.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_delay_ms: 500, max_delay_ms: 8_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn delay_for(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }

    pub fn delays(&self) -> Vec<Duration> {
        (1..=self.max_retries).map(|r| self.delay_for(r)).collect()
    }
}

pub fn is_retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

#[derive(Debug)]
pub(crate) enum PostFailure {
    /// 401 / 403, never retried.
    Auth { status: u16, body: String },
    /// Any other non-retryable status.
    Rejected { status: u16, body: String },
    /// Retryable failures until the policy ran out.
    Exhausted { attempts: u32, last: String },
}

fn snippet(body: &[u8]) -> String {
    let s = String::from_utf8_lossy(body);
    s.chars().take(300).collect()
}

/// POSTs `body` as JSON, retrying 429 / 5xx / transport errors per `policy`.
/// Returns the body of the first 2xx response.
pub(crate) async fn post_json(
    client: &reqwest::Client,
    url: &str,
    bearer: Option<&str>,
    body: &[u8],
    policy: &RetryPolicy,
) -> Result<Vec<u8>, PostFailure> {
    let mut attempt: u32 = 0;
    loop {
        attempt += 1;
        let mut req = client
            .post(url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_vec());
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let failure = match req.send().await {
            Ok(resp) => {
                let status = resp.status().as_u16();
                let bytes = resp.bytes().await;
                match bytes {
                    Ok(b) if (200..300).contains(&status) => return Ok(b.to_vec()),
                    Ok(b) if status == 401 || status == 403 => {
                        return Err(PostFailure::Auth { status, body: snippet(&b) })
                    }
                    Ok(b) if is_retryable_status(status) => format!("HTTP {status}: {}", snippet(&b)),
                    Ok(b) => return Err(PostFailure::Rejected { status, body: snippet(&b) }),
                    Err(e) => format!("reading response body: {e}"),
                }
            }
            Err(e) => e.to_string(),
        };
        if attempt > policy.max_retries {
            return Err(PostFailure::Exhausted { attempts: attempt, last: failure });
        }
        let delay = policy.delay_for(attempt);
        tracing::warn!(attempt, ?delay, error = %failure, "request failed; backing off");
        tokio::time::sleep(delay).await;
    }
}
