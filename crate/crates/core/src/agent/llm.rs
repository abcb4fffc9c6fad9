//! Chat-completion backend with schema validation, one corrective retry and
//! a rule-based fallback.

use std::time::Duration;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{plan_rule_based, AgentError, Recommendation, ScenarioBrief};

pub const LLM_TIMEOUT: Duration = Duration::from_secs(30);
const DEFAULT_MODEL: &str = "default";

const SYSTEM_PROMPT: &str = "You plan deployments of inspection robots on an indoor factory floor. \
Answer with a single JSON object matching the requested keys. Do not add prose.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Self { role: role.to_string(), content: content.into() }
    }
}

/// Anything that can answer a chat transcript with one assistant message.
pub trait ChatBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, AgentError>;
}

/// OpenAI-style `POST {base}/chat/completions` client.
#[derive(Debug, Clone)]
pub struct HttpChatBackend {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl HttpChatBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self { base_url: base_url.into(), api_key: None, model: DEFAULT_MODEL.to_string(), timeout: LLM_TIMEOUT }
    }

    /// Reads `AGENT_LLM_BASE_URL`, `AGENT_LLM_API_KEY` and `AGENT_LLM_MODEL`.
    /// `None` when no base URL is configured.
    pub fn from_env() -> Option<Self> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let base_url = var("AGENT_LLM_BASE_URL")?;
        Some(Self {
            api_key: var("AGENT_LLM_API_KEY"),
            model: var("AGENT_LLM_MODEL").unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            ..Self::new(base_url)
        })
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn redact(&self, s: &str) -> String {
        match &self.api_key {
            Some(k) if !k.is_empty() => s.replace(k.as_str(), "[redacted]"),
            _ => s.to_string(),
        }
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, AgentError> {
        let body = json!({ "model": self.model, "messages": messages }).to_string();
        let url = self.endpoint();
        debug!(
            "POST {url} (auth: {}) body: {}",
            if self.api_key.is_some() { "Bearer [redacted]" } else { "none" },
            self.redact(&body)
        );

        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let mut req = agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(body.as_str()).map_err(|e| match e {
            ureq::Error::Timeout(_) => AgentError::Timeout,
            other => AgentError::EndpointUnreachable(self.redact(&other.to_string())),
        })?;
        let text = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => AgentError::Timeout,
            other => AgentError::MalformedResponse(other.to_string()),
        })?;
        debug!("response body: {}", self.redact(&text));

        let v: Value = serde_json::from_str(&text).map_err(|e| AgentError::MalformedResponse(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| AgentError::MalformedResponse("no choices[0].message.content".into()))
    }
}

/// Which planner produced the final recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanSource {
    Llm,
    RuleBased,
    RuleFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub recommendation: Recommendation,
    pub source: PlanSource,
    /// Backend calls made (0 for pure rule-based plans).
    pub attempts: usize,
    pub fallback_reason: Option<String>,
}

impl Plan {
    pub fn rule_based(brief: &ScenarioBrief) -> Self {
        Self {
            recommendation: plan_rule_based(brief),
            source: PlanSource::RuleBased,
            attempts: 0,
            fallback_reason: None,
        }
    }
}

/// Pull the outermost `{...}` out of a reply and validate it.
pub(crate) fn parse_recommendation(text: &str, brief: &ScenarioBrief) -> Result<Recommendation, AgentError> {
    let (Some(start), Some(end)) = (text.find('{'), text.rfind('}')) else {
        return Err(AgentError::MalformedResponse("reply contains no JSON object".into()));
    };
    if end < start {
        return Err(AgentError::MalformedResponse("reply contains no JSON object".into()));
    }
    let rec: Recommendation =
        serde_json::from_str(&text[start..=end]).map_err(|e| AgentError::MalformedResponse(e.to_string()))?;
    rec.validate(brief)?;
    Ok(rec)
}

fn fallback(brief: &ScenarioBrief, attempts: usize, reason: &AgentError) -> Plan {
    warn!("planner backend failed ({reason}); using rule-based plan");
    Plan {
        recommendation: plan_rule_based(brief),
        source: PlanSource::RuleFallback,
        attempts,
        fallback_reason: Some(reason.to_string()),
    }
}

/// Ask a chat backend for a recommendation. A rejected reply gets one
/// follow-up naming the problem; transport failures and a second rejection
/// fall back to [`plan_rule_based`].
pub fn plan_llm(brief: &ScenarioBrief, backend: &dyn ChatBackend) -> Plan {
    let mut messages = vec![ChatMessage::new("system", SYSTEM_PROMPT), ChatMessage::new("user", brief.render_prompt())];
    for attempt in 1..=2 {
        let reply = match backend.complete(&messages) {
            Ok(r) => r,
            Err(e @ AgentError::MalformedResponse(_)) if attempt == 1 => {
                info!("malformed reply, retrying: {e}");
                messages.push(ChatMessage::new(
                    "user",
                    format!("The previous reply could not be read ({e}). Reply with only the JSON object."),
                ));
                continue;
            }
            Err(e) => return fallback(brief, attempt, &e),
        };
        match parse_recommendation(&reply, brief) {
            Ok(recommendation) => {
                return Plan { recommendation, source: PlanSource::Llm, attempts: attempt, fallback_reason: None }
            }
            Err(e) if attempt == 1 => {
                info!("rejected reply, retrying: {e}");
                messages.push(ChatMessage::new("assistant", reply));
                messages.push(ChatMessage::new(
                    "user",
                    format!(
                        "That reply was rejected: {e}. Reply with only a JSON object with keys num_robots (1 to {}), \
                         search_strategy (NearestFirst or SectorSweep), transmission_scheme (SemCom or Raw) and rationale.",
                        brief.max_robots
                    ),
                ));
            }
            Err(e) => return fallback(brief, attempt, &e),
        }
    }
    unreachable!("loop returns on the second attempt")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::brief;
    use crate::semcom::PayloadKind;
    use crate::world::{ScenarioConfig, SearchStrategy};
    use std::cell::RefCell;

    struct Scripted {
        replies: RefCell<Vec<Result<String, AgentError>>>,
        seen: RefCell<Vec<Vec<ChatMessage>>>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<String, AgentError>>) -> Self {
            Self { replies: RefCell::new(replies), seen: RefCell::new(vec![]) }
        }
    }

    impl ChatBackend for Scripted {
        fn complete(&self, messages: &[ChatMessage]) -> Result<String, AgentError> {
            self.seen.borrow_mut().push(messages.to_vec());
            self.replies.borrow_mut().remove(0)
        }
    }

    const GOOD: &str =
        r#"{"num_robots": 3, "search_strategy": "SectorSweep", "transmission_scheme": "SemCom", "rationale": "ok"}"#;

    #[test]
    fn happy_path() {
        let b = brief(&ScenarioConfig::default());
        let backend = Scripted::new(vec![Ok(format!("```json\n{GOOD}\n```"))]);
        let plan = plan_llm(&b, &backend);
        assert_eq!(plan.source, PlanSource::Llm);
        assert_eq!(plan.recommendation.num_robots, 3);
        assert_eq!(plan.recommendation.search_strategy, SearchStrategy::SectorSweep);
        assert_eq!(plan.recommendation.transmission_scheme, PayloadKind::SemCom);
        assert_eq!(backend.seen.borrow()[0][1].content, b.render_prompt());
    }

    #[test]
    fn prose_then_fallback() {
        let b = brief(&ScenarioConfig::default());
        let backend = Scripted::new(vec![Ok("Use four robots.".into()), Ok("Still prose.".into())]);
        let plan = plan_llm(&b, &backend);
        assert_eq!(plan.source, PlanSource::RuleFallback);
        assert_eq!(plan.attempts, 2);
        assert_eq!(plan.recommendation, plan_rule_based(&b));
        let seen = backend.seen.borrow();
        assert_eq!(seen.len(), 2);
        assert!(seen[1].last().unwrap().content.contains("rejected"));
    }

    #[test]
    fn invalid_then_valid() {
        let b = brief(&ScenarioConfig::default());
        let too_many = GOOD.replace("3", "99");
        let plan = plan_llm(&b, &Scripted::new(vec![Ok(too_many), Ok(GOOD.into())]));
        assert_eq!(plan.source, PlanSource::Llm);
        assert_eq!(plan.attempts, 2);
    }

    #[test]
    fn transport_failure_falls_back_immediately() {
        let b = brief(&ScenarioConfig::default());
        let backend = Scripted::new(vec![Err(AgentError::EndpointUnreachable("refused".into()))]);
        let plan = plan_llm(&b, &backend);
        assert_eq!(plan.source, PlanSource::RuleFallback);
        assert_eq!(plan.attempts, 1);
        let plan = plan_llm(&b, &Scripted::new(vec![Err(AgentError::Timeout)]));
        assert_eq!(plan.source, PlanSource::RuleFallback);
    }

    #[test]
    fn unknown_enum_is_rejected() {
        let b = brief(&ScenarioConfig::default());
        assert!(parse_recommendation(&GOOD.replace("SectorSweep", "Spiral"), &b).is_err());
        assert!(parse_recommendation("} {", &b).is_err());
    }

    #[test]
    fn redaction() {
        let h = HttpChatBackend { api_key: Some("sk-secret".into()), ..HttpChatBackend::new("http://x/v1/") };
        assert_eq!(h.redact("key=sk-secret"), "key=[redacted]");
        assert_eq!(h.endpoint(), "http://x/v1/chat/completions");
    }
}
