use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Sampling parameters sent with every completion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f32,
    pub max_tokens: u32,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("ModelUnavailable: {0}")]
    Unavailable(String),
    #[error("MockMiss: {0}")]
    MockMiss(String),
}

/// A text-completion backend. Shared across sessions, hence `Send + Sync`.
pub trait ModelClient: Send + Sync {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ModelError>;
}

impl<F> ModelClient for F
where
    F: Fn(&str) -> Result<String, ModelError> + Send + Sync,
{
    fn complete(&self, prompt: &str, _params: &CompletionParams) -> Result<String, ModelError> {
        self(prompt)
    }
}

/// `sha256:<hex>` of the prompt bytes.
pub fn prompt_digest(prompt: &str) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(prompt.as_bytes())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Look fixtures up by prompt digest.
    Digest,
    /// Serve fixtures in file order, ignoring prompt content.
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchKey {
    Digest(String),
    Index(usize),
}

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub key: MatchKey,
    pub response: String,
    /// Prompt text, kept to explain misses.
    pub prompt: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct FixtureLine {
    #[serde(rename = "match")]
    key: Json,
    response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt: Option<String>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("transcript line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot read transcript: {0}")]
    Io(#[from] std::io::Error),
}

impl Fixture {
    pub fn to_jsonl_line(&self) -> String {
        let key = match &self.key {
            MatchKey::Digest(d) => Json::String(d.clone()),
            MatchKey::Index(i) => Json::from(*i),
        };
        serde_json::to_string(&FixtureLine {
            key,
            response: self.response.clone(),
            prompt: self.prompt.clone(),
        })
        .expect("fixture serializes")
    }
}

/// Parses a JSONL transcript. Blank lines are skipped.
pub fn parse_transcript(text: &str) -> Result<Vec<Fixture>, FixtureError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| FixtureError::Malformed {
            line: i + 1,
            reason,
        };
        let raw: FixtureLine = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let key = match raw.key {
            Json::String(s) if s.starts_with("sha256:") => MatchKey::Digest(s),
            Json::Number(n) => MatchKey::Index(
                n.as_u64()
                    .ok_or_else(|| malformed("index must be a non-negative integer".into()))?
                    as usize,
            ),
            other => return Err(malformed(format!("unsupported match key {other}"))),
        };
        out.push(Fixture {
            key,
            response: raw.response,
            prompt: raw.prompt,
        });
    }
    Ok(out)
}

pub fn write_transcript(fixtures: &[Fixture]) -> String {
    fixtures.iter().map(|f| f.to_jsonl_line() + "\n").collect()
}

/// Replays recorded responses. Deterministic for a fixed call sequence.
#[derive(Debug)]
pub struct ScriptedClient {
    mode: MatchMode,
    fixtures: Vec<Fixture>,
    state: Mutex<ScriptState>,
}

#[derive(Debug, Default)]
struct ScriptState {
    cursor: usize,
    /// Times each digest has been served, so repeated prompts walk through
    /// repeated fixtures.
    served: HashMap<String, usize>,
}

impl ScriptedClient {
    pub fn new(mode: MatchMode, fixtures: Vec<Fixture>) -> Self {
        ScriptedClient {
            mode,
            fixtures,
            state: Mutex::new(ScriptState::default()),
        }
    }

    pub fn from_jsonl(mode: MatchMode, text: &str) -> Result<Self, FixtureError> {
        Ok(Self::new(mode, parse_transcript(text)?))
    }

    pub fn from_path(mode: MatchMode, path: &Path) -> Result<Self, FixtureError> {
        let file = std::fs::File::open(path)?;
        let mut text = String::new();
        for line in std::io::BufReader::new(file).lines() {
            text.push_str(&line?);
            text.push('\n');
        }
        Self::from_jsonl(mode, &text)
    }

    /// Sequence mode: answers `responses` in order.
    pub fn sequence<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        let fixtures = responses
            .into_iter()
            .enumerate()
            .map(|(i, r)| Fixture {
                key: MatchKey::Index(i),
                response: r.into(),
                prompt: None,
            })
            .collect();
        Self::new(MatchMode::Sequence, fixtures)
    }

    pub fn fixtures(&self) -> &[Fixture] {
        &self.fixtures
    }

    /// Calls served so far.
    pub fn calls(&self) -> usize {
        self.state.lock().map(|s| s.cursor).unwrap_or(0)
    }

    fn nearest(&self, prompt: &str) -> String {
        let best = self
            .fixtures
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.prompt.as_deref().map(|p| (i, p)))
            .map(|(i, p)| {
                let shared = p
                    .bytes()
                    .zip(prompt.bytes())
                    .take_while(|(a, b)| a == b)
                    .count();
                (i, p, shared)
            })
            .max_by_key(|(i, _, shared)| (*shared, usize::MAX - i));
        match best {
            Some((i, p, shared)) => {
                let line = p[..shared].matches('\n').count() + 1;
                let expected = p[shared..].lines().next().unwrap_or("");
                let got = prompt[shared.min(prompt.len())..]
                    .lines()
                    .next()
                    .unwrap_or("");
                format!(
                    "nearest is fixture #{i} ({shared} shared leading bytes; line {line} expected {expected:?}, got {got:?})"
                )
            }
            None if self.fixtures.is_empty() => "transcript is empty".to_string(),
            None => format!(
                "{} fixtures carry no prompt text to compare",
                self.fixtures.len()
            ),
        }
    }
}

impl ModelClient for ScriptedClient {
    fn complete(&self, prompt: &str, _params: &CompletionParams) -> Result<String, ModelError> {
        let mut state = self
            .state
            .lock()
            .map_err(|_| ModelError::Unavailable("scripted client poisoned".into()))?;
        let call = state.cursor;
        state.cursor += 1;
        match self.mode {
            MatchMode::Sequence => {
                let hit = self
                    .fixtures
                    .iter()
                    .enumerate()
                    .find(|(pos, f)| match f.key {
                        MatchKey::Index(i) => i == call,
                        MatchKey::Digest(_) => *pos == call,
                    });
                match hit {
                    Some((_, f)) => Ok(f.response.clone()),
                    None => Err(ModelError::MockMiss(format!(
                        "call #{call} has no fixture; transcript holds {}",
                        self.fixtures.len()
                    ))),
                }
            }
            MatchMode::Digest => {
                let digest = prompt_digest(prompt);
                let matches: Vec<&Fixture> = self
                    .fixtures
                    .iter()
                    .filter(|f| f.key == MatchKey::Digest(digest.clone()))
                    .collect();
                if matches.is_empty() {
                    return Err(ModelError::MockMiss(format!(
                        "no fixture for prompt {digest}; {}",
                        self.nearest(prompt)
                    )));
                }
                let n = state.served.entry(digest).or_insert(0);
                let f = matches[(*n).min(matches.len() - 1)];
                *n += 1;
                Ok(f.response.clone())
            }
        }
    }
}

/// Passes calls through and keeps every exchange for a transcript.
pub struct RecordingClient<C> {
    inner: C,
    log: Mutex<Vec<(String, String)>>,
}

impl<C: ModelClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        RecordingClient {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Digest-keyed fixtures with prompt text, in call order.
    pub fn fixtures(&self) -> Vec<Fixture> {
        self.log
            .lock()
            .map(|log| {
                log.iter()
                    .map(|(p, r)| Fixture {
                        key: MatchKey::Digest(prompt_digest(p)),
                        response: r.clone(),
                        prompt: Some(p.clone()),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

impl<C: ModelClient> ModelClient for RecordingClient<C> {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ModelError> {
        let response = self.inner.complete(prompt, params)?;
        if let Ok(mut log) = self.log.lock() {
            log.push((prompt.to_string(), response.clone()));
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CompletionParams {
        CompletionParams::default()
    }

    #[test]
    fn empty_transcript_misses() {
        let c = ScriptedClient::new(MatchMode::Digest, vec![]);
        let err = c.complete("hi", &params()).unwrap_err();
        assert!(matches!(err, ModelError::MockMiss(m) if m.contains("empty")));
    }

    #[test]
    fn sequence_serves_in_order() {
        let c = ScriptedClient::sequence(["a", "b", "c"]);
        let got: Vec<String> = (0..3)
            .map(|_| c.complete("x", &params()).unwrap())
            .collect();
        assert_eq!(got, ["a", "b", "c"]);
        assert!(c.complete("x", &params()).is_err());
    }

    #[test]
    fn digest_match_and_nearest() {
        let f = Fixture {
            key: MatchKey::Digest(prompt_digest("line one\nline two")),
            response: "ok".into(),
            prompt: Some("line one\nline two".into()),
        };
        let c = ScriptedClient::new(MatchMode::Digest, vec![f]);
        assert_eq!(c.complete("line one\nline two", &params()).unwrap(), "ok");
        let miss = c
            .complete("line one\nline 2", &params())
            .unwrap_err()
            .to_string();
        assert!(miss.contains("fixture #0"), "{miss}");
        assert!(miss.contains("line 2"), "{miss}");
    }

    #[test]
    fn transcript_round_trip() {
        let fixtures = vec![
            Fixture {
                key: MatchKey::Digest(prompt_digest("p")),
                response: "r\nmulti".into(),
                prompt: Some("p".into()),
            },
            Fixture {
                key: MatchKey::Index(1),
                response: "s".into(),
                prompt: None,
            },
        ];
        let text = write_transcript(&fixtures);
        assert_eq!(parse_transcript(&text).unwrap(), fixtures);
        assert!(parse_transcript("{\"match\": true, \"response\": \"x\"}").is_err());
    }

    #[test]
    fn repeated_digest_walks_fixtures() {
        let d = prompt_digest("same");
        let mk = |r: &str| Fixture {
            key: MatchKey::Digest(d.clone()),
            response: r.into(),
            prompt: None,
        };
        let c = ScriptedClient::new(MatchMode::Digest, vec![mk("first"), mk("second")]);
        assert_eq!(c.complete("same", &params()).unwrap(), "first");
        assert_eq!(c.complete("same", &params()).unwrap(), "second");
        assert_eq!(c.complete("same", &params()).unwrap(), "second");
    }
}
