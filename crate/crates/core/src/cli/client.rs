//! Thin HTTP client over the node API, plus the printing for the client
//! subcommands.

use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::Exit;
use crate::ledger::{url_id, Verdict};

pub const DEFAULT_API: &str = "http://127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach {0}")]
    Connection(String),
    #[error("{code}")]
    Api { status: u16, code: String, body: Value },
    #[error("unexpected response: {0}")]
    Decode(String),
}

pub struct ApiClient {
    base: String,
    agent: ureq::Agent,
}

impl ApiClient {
    pub fn new(base: &str) -> Self {
        let base = base.trim_end_matches('/');
        let base = if base.contains("://") { base.to_string() } else { format!("http://{base}") };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        ApiClient { base, agent }
    }

    fn finish(&self, result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Value, ClientError> {
        let mut resp = result.map_err(|e| ClientError::Connection(format!("{}: {e}", self.base)))?;
        let status = resp.status().as_u16();
        let body: Value = resp.body_mut().read_json().map_err(|e| ClientError::Decode(e.to_string()))?;
        if status >= 400 {
            let code = body.get("error").and_then(Value::as_str).unwrap_or("HttpError").to_string();
            return Err(ClientError::Api { status, code, body });
        }
        Ok(body)
    }

    pub fn get(&self, path: &str) -> Result<Value, ClientError> {
        self.finish(self.agent.get(&format!("{}{path}", self.base)).call())
    }

    pub fn post(&self, path: &str, body: &Value) -> Result<Value, ClientError> {
        self.finish(self.agent.post(&format!("{}{path}", self.base)).send_json(body))
    }

    pub fn register(&self, id: &str, name: &str) -> Result<Value, ClientError> {
        self.post("/api/v1/users", &json!({ "verifier_id": id, "display_name": name }))
    }

    pub fn submit(&self, sender: &str, url: &str, evidence: &str) -> Result<Value, ClientError> {
        self.post("/api/v1/urls", &json!({ "sender": sender, "url": url, "evidence_email": evidence }))
    }

    pub fn vote(&self, sender: &str, url_id: &str, verdict: Verdict) -> Result<Value, ClientError> {
        self.post(&format!("/api/v1/urls/{url_id}/votes"), &json!({ "sender": sender, "verdict": verdict }))
    }

    pub fn lookup(&self, url_id: &str) -> Result<Value, ClientError> {
        self.get(&format!("/api/v1/urls/{url_id}"))
    }

    pub fn blacklist(&self) -> Result<Value, ClientError> {
        self.get("/api/v1/blacklist")
    }
}

/// A URL is turned into its id; anything else is taken as an id.
fn resolve_target(target: &str) -> String {
    if target.contains("://") {
        if let Some(id) = url_id(target) {
            return id;
        }
    }
    target.to_string()
}

fn fail(err: ClientError, json: bool) -> Exit {
    match err {
        ClientError::Api { code, body, .. } => {
            if json {
                println!("{body}");
            } else {
                println!("{code}");
            }
            Exit::Rejected
        }
        e => {
            eprintln!("error: {e}");
            Exit::Usage
        }
    }
}

pub(super) fn report(result: Result<Value, ClientError>, json: bool) -> Exit {
    match result {
        Ok(v) => {
            if json {
                println!("{v}");
            } else {
                let field = |k: &str| v.get(k).map(|x| x.to_string().trim_matches('"').to_string()).unwrap_or_default();
                println!("{} tx_id={} nonce={}", field("status"), field("tx_id"), field("nonce"));
            }
            Exit::Success
        }
        Err(e) => fail(e, json),
    }
}

pub(super) fn cmd_vote(api: &str, sender: &str, target: &str, verdict: &str, json: bool) -> Exit {
    let verdict: Verdict = match verdict.parse() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    };
    report(ApiClient::new(api).vote(sender, &resolve_target(target), verdict), json)
}

fn score_text(v: &Value) -> String {
    if v.is_null() {
        "-".to_string()
    } else {
        v.to_string()
    }
}

pub(super) fn cmd_lookup(api: &str, target: &str, json: bool) -> Exit {
    let view = match ApiClient::new(api).lookup(&resolve_target(target)) {
        Ok(v) => v,
        Err(e) => return fail(e, json),
    };
    if json {
        println!("{view}");
        return Exit::Success;
    }
    let s = |k: &str| view[k].as_str().unwrap_or_default().to_string();
    println!("url_id       {}", s("url_id"));
    println!("url          {}", s("url"));
    println!("submitter    {}", s("submitter"));
    println!("status       {}", s("status"));
    println!("phish_score  {}", score_text(&view["phish_score"]));
    println!("first block  {}", view["first_block_height"]);
    let empty = Vec::new();
    let votes = view["votes"].as_array().unwrap_or(&empty);
    if !votes.is_empty() {
        println!("\n{:>3}  {:<16} {:<12} {:>10} {:>6}  score after", "#", "verifier", "verdict", "rank", "skill");
        let timeline = view["timeline"].as_array().unwrap_or(&empty);
        for (i, v) in votes.iter().enumerate() {
            let rank = v["rank"].as_f64().unwrap_or(0.0);
            let after = timeline.get(i).map(|p| score_text(&p["score"])).unwrap_or_default();
            println!(
                "{:>3}  {:<16} {:<12} {:>10.6} {:>6}  {}",
                v["ordinal"],
                v["verifier_id"].as_str().unwrap_or_default(),
                v["verdict"].as_str().unwrap_or_default(),
                rank,
                v["skill_points"],
                after
            );
        }
    }
    Exit::Success
}

pub(super) fn cmd_blacklist(api: &str, json: bool) -> Exit {
    let list = match ApiClient::new(api).blacklist() {
        Ok(v) => v,
        Err(e) => return fail(e, json),
    };
    if json {
        println!("{list}");
        return Exit::Success;
    }
    for entry in list.as_array().into_iter().flatten() {
        println!("{}  {}", score_text(&entry["phish_score"]), entry["url"].as_str().unwrap_or_default());
    }
    Exit::Success
}
