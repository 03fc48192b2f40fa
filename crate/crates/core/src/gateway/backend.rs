//! Completion backends: the OpenAI-compatible HTTP client and the
//! deterministic mock used for fixtures and tests.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::gateway::{GatewayError, ModelConfig};
use crate::prompt::PromptRecord;
use crate::util::mix_words;

/// A single completion attempt failure.
#[derive(Debug, Clone)]
pub enum BackendError {
    /// Rejected credentials. Never retried; aborts the run.
    Auth(String),
    /// Server asked us to slow down; retried honoring any supplied delay.
    RateLimited {
        retry_after_secs: Option<u64>,
        message: String,
    },
    /// Anything else transient: connection errors, 5xx, malformed bodies.
    Transport(String),
}

/// Something that can answer one prompt. `nonce` distinguishes stability
/// replicates; the main evaluation path always passes 0.
pub trait CompletionBackend: Send + Sync {
    fn complete(
        &self,
        prompt: &PromptRecord,
        nonce: u64,
        config: &ModelConfig,
    ) -> Result<String, BackendError>;

    /// True when responses carry no wall-clock meaning, so record
    /// latencies are pinned to zero for reproducibility.
    fn deterministic(&self) -> bool {
        false
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: Option<String>,
}

/// Blocking client for any `POST {base}/chat/completions` endpoint with
/// bearer-token auth. The token is read from the environment variable
/// named by the config and never serialized or logged.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: String,
}

impl HttpBackend {
    pub fn from_env(config: &ModelConfig) -> Result<HttpBackend, GatewayError> {
        let api_key = std::env::var(&config.credential_ref)
            .map_err(|_| GatewayError::MissingCredential(config.credential_ref.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Client(e.to_string()))?;
        Ok(HttpBackend {
            client,
            base_url: config.endpoint_url.trim_end_matches('/').to_string(),
            api_key,
        })
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(
        &self,
        prompt: &PromptRecord,
        _nonce: u64,
        config: &ModelConfig,
    ) -> Result<String, BackendError> {
        let body = ChatRequest {
            model: &config.model_id,
            messages: vec![ChatMessage {
                role: "user",
                content: &prompt.text,
            }],
            temperature: config.temperature,
        };
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;

        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::Auth(format!("endpoint returned {status}")));
        }
        if status.as_u16() == 429 {
            let retry_after_secs = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok());
            return Err(BackendError::RateLimited {
                retry_after_secs,
                message: format!("endpoint returned {status}"),
            });
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            let snippet: String = body.chars().take(200).collect();
            return Err(BackendError::Transport(format!("HTTP {status}: {snippet}")));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| BackendError::Transport(format!("unreadable response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Transport("response carried no completion".to_string()))
    }
}

/// Deterministic responder: the answer for a cell is a pure hash of the
/// seed and the (context, value, variant, nonce) key, emitted either as a
/// JSON numeric token or as an option label from the prompt's own option
/// map. Same seed, same prompt: byte-identical completions.
pub struct MockBackend {
    seed: u64,
    calls: AtomicU64,
}

impl MockBackend {
    pub fn new(seed: u64) -> MockBackend {
        MockBackend {
            seed,
            calls: AtomicU64::new(0),
        }
    }

    /// Requests served so far; used to verify resume behavior.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl CompletionBackend for MockBackend {
    fn complete(
        &self,
        prompt: &PromptRecord,
        nonce: u64,
        _config: &ModelConfig,
    ) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let hash = mix_words(&[
            self.seed,
            u64::from(prompt.context_index),
            u64::from(prompt.value_id),
            u64::from(prompt.variant_id),
            nonce,
        ]);
        let options: Vec<(i64, i8)> = prompt
            .option_map
            .numeric
            .iter()
            .map(|(token, score)| (*token, score.get()))
            .collect();
        let (token, score) = options[(hash % options.len() as u64) as usize];
        if (hash >> 32) & 1 == 0 {
            Ok(format!("{{\"score\": {token}}}"))
        } else {
            // any label mapping to the same score
            let label = prompt
                .option_map
                .labels
                .iter()
                .find(|(_, s)| s.get() == score)
                .map(|(l, _)| l.clone())
                .unwrap_or_else(|| token.to_string());
            Ok(format!("{{\"answer\": \"{label}\"}}"))
        }
    }

    fn deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::OptionScheme;

    fn prompt(context: u8, value: u8, variant: u8) -> PromptRecord {
        PromptRecord {
            context_index: context,
            value_id: value,
            variant_id: variant,
            text: "unused by the mock".to_string(),
            option_map: OptionScheme::five_point().option_map(),
        }
    }

    #[test]
    fn mock_is_deterministic_per_seed() {
        let config = ModelConfig::mock();
        let a = MockBackend::new(42);
        let b = MockBackend::new(42);
        for context in 1..=5 {
            let p = prompt(context, 7, 3);
            assert_eq!(
                a.complete(&p, 0, &config).unwrap(),
                b.complete(&p, 0, &config).unwrap()
            );
        }
        assert_eq!(a.calls(), 5);
    }

    #[test]
    fn different_seeds_differ_somewhere_in_a_100_cell_sample() {
        let config = ModelConfig::mock();
        let a = MockBackend::new(1);
        let b = MockBackend::new(2);
        let mut differs = false;
        'outer: for context in 1..=20 {
            for value in 1..=5 {
                let p = prompt(context, value, 1);
                if a.complete(&p, 0, &config).unwrap() != b.complete(&p, 0, &config).unwrap() {
                    differs = true;
                    break 'outer;
                }
            }
        }
        assert!(differs, "seeds 1 and 2 agreed on all 100 sampled cells");
    }

    #[test]
    fn mock_emits_tokens_or_labels_from_the_supplied_map() {
        let config = ModelConfig::mock();
        let backend = MockBackend::new(7);
        let scheme = OptionScheme::one_to_four();
        let map = scheme.option_map();
        for value in 1..=30 {
            let mut p = prompt(1, value, 1);
            p.option_map = map.clone();
            let completion = backend.complete(&p, 0, &config).unwrap();
            let parsed = crate::gateway::parse_score(&completion, &map);
            assert!(
                matches!(parsed, crate::gateway::ScoreOutcome::Numeric(_)),
                "mock completion `{completion}` did not parse"
            );
        }
    }
}
