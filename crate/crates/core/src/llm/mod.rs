//! Language-model gateway.
//!
//! Every model interaction goes through a [`ProviderHandle`], which pairs a
//! backend ([`MockModel`] or [`RemoteModel`]) with the prompt catalogue. The
//! four task helpers in [`tasks`] build requests, parse structured replies and
//! apply the one-shot repair retry.

mod mock;
pub mod prompts;
mod remote;
pub mod tasks;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{jaccard, word_set, MockModel};
pub use prompts::PromptCatalogue;
pub use remote::RemoteModel;
pub use tasks::{
    classify_intent, compose_feedback, propose_branch, BranchProposal, DecisionSummary,
    FeedbackRequest, IntentMatch, OutcomeKind, SceneContext,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Generate,
    Classify,
    Branch,
    Feedback,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Generate => "generate",
            Task::Classify => "classify",
            Task::Branch => "branch",
            Task::Feedback => "feedback",
        }
    }

    pub fn expects(self) -> Expects {
        match self {
            Task::Generate | Task::Classify | Task::Branch => Expects::StructuredJson,
            Task::Feedback => Expects::FreeText,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expects {
    FreeText,
    StructuredJson,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub task: Task,
    pub system_text: String,
    pub user_text: String,
    pub expects: Expects,
}

impl PromptRequest {
    pub fn new(task: Task, system_text: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            task,
            system_text: system_text.into(),
            user_text: user_text.into(),
            expects: task.expects(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider timed out")]
    Timeout,
    #[error("provider returned HTTP {0}")]
    Http(u16),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider reply could not be read: {0}")]
    BadResponse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no candidate intents to classify against")]
    EmptyCandidates,
    #[error("utterance must not be empty")]
    EmptyUtterance,
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("malformed classification: {0}")]
    MalformedClassification(String),
    #[error("malformed generation: {0}")]
    MalformedGeneration(String),
}

/// A text-completion backend.
pub trait LanguageModel: Send + Sync + fmt::Debug {
    fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError>;
}

/// API key that never shows up in `Debug` output.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_MAX_RETRIES: u32 = 1;

/// Settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    /// Base URL up to and excluding `/chat/completions`, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub api_key: ApiKey,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>, api_key: ApiKey, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key,
            model: model.into(),
            timeout: DEFAULT_TIMEOUT,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderConfig {
    Mock,
    RemoteChatCompletion(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("GLOSS_PROVIDER must be `mock` or `remote`, found `{0}`")]
    UnknownProvider(String),
    #[error("remote provider requires {0}")]
    MissingVar(&'static str),
}

impl ProviderConfig {
    /// Reads `GLOSS_PROVIDER` (default `mock`), `GLOSS_BASE_URL`, `GLOSS_API_KEY`, `GLOSS_MODEL`.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let kind = get("GLOSS_PROVIDER").unwrap_or_else(|| "mock".into());
        match kind.as_str() {
            "mock" => Ok(ProviderConfig::Mock),
            "remote" => {
                let base_url = get("GLOSS_BASE_URL").ok_or(ConfigError::MissingVar("GLOSS_BASE_URL"))?;
                let api_key = get("GLOSS_API_KEY").ok_or(ConfigError::MissingVar("GLOSS_API_KEY"))?;
                let model = get("GLOSS_MODEL").ok_or(ConfigError::MissingVar("GLOSS_MODEL"))?;
                Ok(ProviderConfig::RemoteChatCompletion(RemoteConfig::new(
                    base_url,
                    ApiKey::new(api_key),
                    model,
                )))
            }
            other => Err(ConfigError::UnknownProvider(other.to_string())),
        }
    }
}

/// Shareable handle to a model plus the prompt templates it is driven with.
#[derive(Debug, Clone)]
pub struct ProviderHandle {
    model: Arc<dyn LanguageModel>,
    prompts: Arc<PromptCatalogue>,
}

impl ProviderHandle {
    pub fn new(model: impl LanguageModel + 'static) -> Self {
        Self {
            model: Arc::new(model),
            prompts: Arc::new(PromptCatalogue::bundled()),
        }
    }

    pub fn mock() -> Self {
        Self::new(MockModel)
    }

    pub fn from_config(config: &ProviderConfig) -> Self {
        match config {
            ProviderConfig::Mock => Self::mock(),
            ProviderConfig::RemoteChatCompletion(remote) => Self::new(RemoteModel::new(remote.clone())),
        }
    }

    pub fn with_prompts(mut self, prompts: PromptCatalogue) -> Self {
        self.prompts = Arc::new(prompts);
        self
    }

    pub fn prompts(&self) -> &PromptCatalogue {
        &self.prompts
    }

    pub fn complete(&self, request: &PromptRequest) -> Result<String, ProviderError> {
        self.model.complete(request)
    }
}

/// One-off completion against a configured backend.
pub fn complete(config: &ProviderConfig, request: &PromptRequest) -> Result<String, ProviderError> {
    ProviderHandle::from_config(config).complete(request)
}
