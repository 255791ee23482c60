use std::time::Duration;

use liverkg::dss::TextRefiner;
use serde_json::{json, Value};

/// Remote text-generation client. Sends `{"prompt": text}` with a bearer
/// key and reads `{"text": ...}` back.
pub struct RemoteRefiner {
    url: String,
    key: String,
    agent: ureq::Agent,
}

impl RemoteRefiner {
    pub fn new(url: impl Into<String>, key: impl Into<String>) -> Self {
        RemoteRefiner {
            url: url.into(),
            key: key.into(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(20))
                .build(),
        }
    }

    /// `TEXTGEN_URL` and `TEXTGEN_KEY`; without a URL explanations stay
    /// template-only.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var("TEXTGEN_URL").ok().filter(|u| !u.is_empty())?;
        let key = std::env::var("TEXTGEN_KEY").unwrap_or_default();
        Some(Self::new(url, key))
    }
}

const INSTRUCTION: &str = "Rewrite this clinical decision-support summary in clear prose for a clinician. Keep every number, drug, dose and rule name unchanged.";

impl TextRefiner for RemoteRefiner {
    fn refine(&self, text: &str) -> Result<String, String> {
        let mut req = self.agent.post(&self.url);
        if !self.key.is_empty() {
            req = req.set("Authorization", &format!("Bearer {}", self.key));
        }
        let body: Value = req
            .send_json(json!({ "prompt": format!("{INSTRUCTION}\n\n{text}") }))
            .map_err(|e| e.to_string())?
            .into_json()
            .map_err(|e| e.to_string())?;
        body.get("text")
            .and_then(Value::as_str)
            .filter(|t| !t.trim().is_empty())
            .map(str::to_string)
            .ok_or_else(|| "response has no text field".to_string())
    }
}
