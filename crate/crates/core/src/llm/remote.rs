//! OpenAI-compatible chat-completions backend.
//!
//! `POST {base_url}/chat/completions` with `Authorization: Bearer <key>` and
//! body `{"model", "messages": [{"role": "system"}, {"role": "user"}], "temperature": 0}`.
//! The reply text is `choices[0].message.content`. Timeouts, connection
//! failures and 5xx responses are retried up to `max_retries` times with
//! jittered exponential backoff.

use std::io;
use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::{LanguageModel, PromptRequest, ProviderError, RemoteConfig};

const BACKOFF_BASE: Duration = Duration::from_millis(200);

#[derive(Debug)]
pub struct RemoteModel {
    config: RemoteConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(ProviderError),
    Fail(ProviderError),
}

impl RemoteModel {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Self { config, agent }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn body(&self, request: &PromptRequest) -> Value {
        json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let response = self
            .agent
            .post(&self.endpoint())
            .set("Authorization", &format!("Bearer {}", self.config.api_key.expose()))
            .send_json(body.clone());
        let response = match response {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) if code >= 500 => {
                return Err(Attempt::Retry(ProviderError::Http(code)))
            }
            Err(ureq::Error::Status(code, _)) => return Err(Attempt::Fail(ProviderError::Http(code))),
            Err(ureq::Error::Transport(t)) => {
                let timed_out = std::error::Error::source(&t)
                    .and_then(|s| s.downcast_ref::<io::Error>())
                    .is_some_and(|e| matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock));
                let err = if timed_out {
                    ProviderError::Timeout
                } else {
                    ProviderError::Unavailable(t.to_string())
                };
                return Err(Attempt::Retry(err));
            }
        };
        let payload: Value = response
            .into_json()
            .map_err(|e| Attempt::Fail(ProviderError::BadResponse(e.to_string())))?;
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fail(ProviderError::BadResponse("no choices[0].message.content".into())))
    }
}

impl LanguageModel for RemoteModel {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        let body = self.body(request);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(e)) if attempt >= self.config.max_retries => return Err(e),
                Err(Attempt::Retry(_)) => {
                    let jitter = rand::thread_rng().gen_range(0.5..1.5);
                    std::thread::sleep(BACKOFF_BASE.mul_f64(2f64.powi(attempt as i32) * jitter));
                    attempt += 1;
                }
            }
        }
    }
}
