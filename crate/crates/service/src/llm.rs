//! OpenAI-compatible chat completion client.

use std::sync::{Arc, OnceLock};
use std::time::Duration;

use serde_json::{json, Value as Json};
use vizagent_core::agents::{CompletionParams, MatchMode, ModelClient, ModelError, ScriptedClient};

use crate::config::ModelSettings;

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_KEY_VAR: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct LiveSettings {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retries: u32,
}

impl LiveSettings {
    /// Resolves file settings over `VIZAGENT_BASE_URL`, `VIZAGENT_MODEL`,
    /// `VIZAGENT_API_KEY_ENV`, `VIZAGENT_TIMEOUT_SECS`, `VIZAGENT_RETRIES`.
    pub fn resolve(
        s: &ModelSettings,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ModelError> {
        let base_url = s
            .base_url
            .clone()
            .or_else(|| env("VIZAGENT_BASE_URL"))
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        let model = s
            .model
            .clone()
            .or_else(|| env("VIZAGENT_MODEL"))
            .ok_or_else(|| {
                ModelError::Unavailable("no model configured (set VIZAGENT_MODEL)".into())
            })?;
        let key_var = s
            .api_key_env
            .clone()
            .or_else(|| env("VIZAGENT_API_KEY_ENV"))
            .unwrap_or_else(|| DEFAULT_KEY_VAR.to_string());
        let number = |v: Option<String>, what: &str| -> Result<Option<u64>, ModelError> {
            v.map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| ModelError::Unavailable(format!("bad {what}: {t}")))
            })
            .transpose()
        };
        let timeout = match s.timeout_secs {
            Some(t) => t,
            None => number(env("VIZAGENT_TIMEOUT_SECS"), "VIZAGENT_TIMEOUT_SECS")?.unwrap_or(120),
        };
        let retries = match s.retries {
            Some(r) => r,
            None => number(env("VIZAGENT_RETRIES"), "VIZAGENT_RETRIES")?.unwrap_or(2) as u32,
        };
        Ok(LiveSettings {
            base_url: base_url.trim_end_matches('/').to_string(),
            model,
            api_key: env(&key_var),
            timeout: Duration::from_secs(timeout),
            retries,
        })
    }
}

pub struct OpenAiClient {
    settings: LiveSettings,
    // built on first use: the blocking client must not be created inside
    // an async context
    http: OnceLock<Result<reqwest::blocking::Client, String>>,
}

impl OpenAiClient {
    pub fn new(settings: LiveSettings) -> Self {
        OpenAiClient {
            settings,
            http: OnceLock::new(),
        }
    }

    fn http(&self) -> Result<&reqwest::blocking::Client, ModelError> {
        self.http
            .get_or_init(|| {
                reqwest::blocking::Client::builder()
                    .timeout(self.settings.timeout)
                    .build()
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| ModelError::Unavailable(e.clone()))
    }

    fn once(&self, body: &Json) -> Result<String, Attempt> {
        let url = format!("{}/chat/completions", self.settings.base_url);
        let mut req = self.http().map_err(Attempt::Fatal)?.post(url).json(body);
        if let Some(key) = &self.settings.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}: {}", snippet(&text))));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(ModelError::Unavailable(format!(
                "HTTP {status}: {}",
                snippet(&text)
            ))));
        }
        extract_content(&text).map_err(Attempt::Fatal)
    }
}

enum Attempt {
    Retry(String),
    Fatal(ModelError),
}

fn snippet(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Pulls `choices[0].message.content` out of a chat completion body.
pub fn extract_content(body: &str) -> Result<String, ModelError> {
    let v: Json = serde_json::from_str(body)
        .map_err(|e| ModelError::Unavailable(format!("response is not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Json::as_str)
        .map(str::to_string)
        .ok_or_else(|| {
            ModelError::Unavailable(format!("no message content in response: {}", snippet(body)))
        })
}

impl ModelClient for OpenAiClient {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ModelError> {
        let body = json!({
            "model": self.settings.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut last = String::new();
        for attempt in 0..=self.settings.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(500 << attempt.min(5)));
            }
            match self.once(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    tracing::warn!(attempt, error = %msg, "model request failed");
                    last = msg;
                }
            }
        }
        Err(ModelError::Unavailable(last))
    }
}

/// A transcript replay when one is configured, else the live client.
pub fn client_from_settings(s: &ModelSettings) -> Result<Arc<dyn ModelClient>, ModelError> {
    if let Some(path) = &s.transcript {
        let c = ScriptedClient::from_path(MatchMode::Digest, path)
            .map_err(|e| ModelError::Unavailable(format!("transcript {}: {e}", path.display())))?;
        return Ok(Arc::new(c));
    }
    let live = LiveSettings::resolve(s, |k| std::env::var(k).ok())?;
    Ok(Arc::new(OpenAiClient::new(live)))
}
