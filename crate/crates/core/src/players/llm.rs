//! LLM-backed players.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{parse_response, Decision, DecisionContext, DecisionError};
use crate::gateway::{ChatRequest, Gateway};
use crate::prompts::PromptTemplate;
use crate::transcript::LlmTrace;

fn default_temperature() -> f64 {
    1.0
}

fn default_max_retries() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Opaque provider model id.
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Re-asks with the identical prompt after an unparseable reply.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

impl ModelParams {
    pub fn new(model: &str) -> Self {
        ModelParams {
            model: model.to_string(),
            temperature: default_temperature(),
            max_retries: default_max_retries(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LlmPlayer {
    pub template: Arc<PromptTemplate>,
    pub model: ModelParams,
    pub gateway: Arc<Gateway>,
    /// Record the rendered prompt in each round's trace.
    pub audit_prompts: bool,
}

impl LlmPlayer {
    pub fn decide(&self, ctx: &DecisionContext<'_>) -> Result<Decision, DecisionError> {
        let fail = |reason: String, raw: Vec<String>| DecisionError {
            seat: ctx.seat,
            reason,
            raw_responses: raw,
        };
        let prompt = self.template.render(ctx).map_err(|e| fail(e.to_string(), Vec::new()))?;
        let request = ChatRequest {
            model: self.model.model.clone(),
            temperature: self.model.temperature,
            prompt,
            seat: Some(ctx.seat),
            ticket: ctx.ticket,
        };
        let mut exchanges = Vec::new();
        let mut last_error = None;
        for _ in 0..=self.model.max_retries {
            let exchange = match self.gateway.complete(&request) {
                Ok(x) => x,
                Err(e) => {
                    let raw = exchanges.iter().map(|x: &crate::transcript::ExchangeRecord| x.raw.clone()).collect();
                    return Err(fail(format!("gateway error: {e}"), raw));
                }
            };
            let parsed = parse_response(&exchange.raw, ctx.game);
            exchanges.push(exchange.record());
            match parsed {
                Ok(action) => {
                    return Ok(Decision {
                        action,
                        trace: Some(LlmTrace {
                            prompt: self.audit_prompts.then(|| request.prompt.clone()),
                            exchanges,
                        }),
                    })
                }
                Err(e) => last_error = Some(e),
            }
        }
        let raw = exchanges.into_iter().map(|x| x.raw).collect::<Vec<_>>();
        let last = last_error.map(|e| e.to_string()).unwrap_or_default();
        Err(fail(format!("parse failure after {} attempt(s): {last}", raw.len()), raw))
    }
}
