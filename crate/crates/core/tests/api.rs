mod common;

use serde_json::{json, Value};

use common::{serve_cluster, PHISH_URL};
use phishlist::cli::{ApiClient, ClientError};
use phishlist::ledger::{url_id, Verdict};

fn code(r: Result<Value, ClientError>) -> (u16, String) {
    match r {
        Err(ClientError::Api { status, code, .. }) => (status, code),
        other => panic!("expected an API error, got {other:?}"),
    }
}

fn evidence(url: &str) -> String {
    format!("From: security@bank.example\n\nPlease confirm your account at {url} today.")
}

#[test]
fn write_path_and_rejections() {
    let served = serve_cluster(4, 1, None);
    let api = ApiClient::new(&served.urls[0]);

    let acc = api.register("alice", "Alice").unwrap();
    assert_eq!(acc["status"], "accepted");
    assert_eq!(acc["nonce"], 1);
    assert_eq!(code(api.register("alice", "Again")), (400, "DuplicateUser".into()));

    assert_eq!(code(api.submit("mallory", PHISH_URL, &evidence(PHISH_URL))), (400, "UnknownUser".into()));
    assert_eq!(code(api.submit("alice", PHISH_URL, "no link here")), (400, "EvidenceMismatch".into()));
    assert_eq!(code(api.submit("alice", "not a url", "not a url")), (400, "MalformedUrl".into()));
    // rejections do not consume a nonce
    let acc = api.submit("alice", PHISH_URL, &evidence(PHISH_URL)).unwrap();
    assert_eq!(acc["nonce"], 2);
    assert_eq!(code(api.submit("alice", PHISH_URL, &evidence(PHISH_URL))), (400, "DuplicateUrl".into()));

    let id = url_id(PHISH_URL).unwrap();
    assert_eq!(code(api.vote("alice", &"0".repeat(64), Verdict::Phishing)), (400, "UnknownUrl".into()));
    api.vote("alice", &id, Verdict::Phishing).unwrap();
    assert_eq!(code(api.vote("alice", &id, Verdict::NotPhishing)), (400, "DuplicateVote".into()));

    // the write went through one node and is visible on every other
    for url in &served.urls {
        let view = ApiClient::new(url).lookup(&id).unwrap();
        assert_eq!(view["status"], "Unverified");
        assert_eq!(view["votes"].as_array().unwrap().len(), 1);
        assert_eq!(view["submitter"], "alice");
    }
}

#[test]
fn malformed_bodies_and_missing_resources() {
    let served = serve_cluster(4, 0, None);
    let api = ApiClient::new(&served.urls[1]);
    assert_eq!(code(api.post("/api/v1/users", &json!({"verifier_id": "a"}))), (400, "MalformedRequest".into()));
    assert_eq!(
        code(api.post("/api/v1/users", &json!({"verifier_id": "a", "display_name": "A", "extra": 1}))),
        (400, "MalformedRequest".into())
    );
    api.register("a", "A").unwrap();
    assert_eq!(
        code(api.post(&format!("/api/v1/urls/{}/votes", "1".repeat(64)), &json!({"sender": "a", "verdict": "Maybe"}))),
        (400, "MalformedRequest".into())
    );
    assert_eq!(code(api.lookup(&"f".repeat(64))), (404, "NotFound".into()));
    assert_eq!(code(api.get(&format!("/api/v1/urls/{}/timeline", "f".repeat(64)))), (404, "NotFound".into()));
    assert_eq!(code(api.get("/api/v1/verifiers/nobody")), (404, "NotFound".into()));

    let account = api.get("/api/v1/verifiers/a").unwrap();
    assert_eq!(account["display_name"], "A");
    assert_eq!(account["skill_points"], 0);
}

#[test]
fn read_endpoints() {
    let served = serve_cluster(4, 1, None);
    let api = ApiClient::new(&served.urls[2]);
    for v in ["a", "b", "c"] {
        api.register(v, &v.to_uppercase()).unwrap();
    }
    api.submit("a", PHISH_URL, &evidence(PHISH_URL)).unwrap();
    let id = url_id(PHISH_URL).unwrap();
    for v in ["a", "b", "c"] {
        api.vote(v, &id, Verdict::Phishing).unwrap();
    }

    let graph = api.get("/api/v1/graph").unwrap();
    let edges: Vec<(String, String, u64)> = graph["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["from"].as_str().unwrap().into(), e["to"].as_str().unwrap().into(), e["weight"].as_u64().unwrap()))
        .collect();
    let expect: Vec<(String, String, u64)> =
        [("a", "b"), ("a", "c"), ("b", "c")].iter().map(|(f, t)| (f.to_string(), t.to_string(), 1)).collect();
    assert_eq!(edges, expect);
    let total: f64 = graph["nodes"].as_array().unwrap().iter().map(|n| n["rank"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let timeline = api.get(&format!("/api/v1/urls/{id}/timeline")).unwrap();
    let scores: Vec<Value> = timeline["timeline"].as_array().unwrap().iter().map(|p| p["score"].clone()).collect();
    assert_eq!(scores, vec![Value::Null, Value::Null, json!(1.0)]);

    let list = api.blacklist().unwrap();
    assert_eq!(list, json!([{ "url_id": id, "url": PHISH_URL, "phish_score": 1.0 }]));

    let blocks = api.get("/api/v1/chain/blocks?from=1&to=2").unwrap();
    let heights: Vec<u64> = blocks.as_array().unwrap().iter().map(|b| b["height"].as_u64().unwrap()).collect();
    assert_eq!(heights, vec![1, 2]);
    let all = api.get("/api/v1/chain/blocks").unwrap();
    assert_eq!(all[0]["block_hash"].as_str().unwrap().len(), 64);

    // byte-identical reads on every node, the normal node included
    let body =
        |u: &str| ureq::get(&format!("{u}/api/v1/urls/{id}")).call().unwrap().body_mut().read_to_string().unwrap();
    let first = body(&served.urls[0]);
    for u in &served.urls[1..] {
        assert_eq!(body(u), first);
    }
}

#[test]
fn cross_origin_reads_are_allowed() {
    let served = serve_cluster(1, 0, None);
    let resp = ureq::get(&format!("{}/api/v1/blacklist", served.urls[0]))
        .header("Origin", "http://dashboard.example")
        .call()
        .unwrap();
    assert_eq!(resp.headers().get("access-control-allow-origin").unwrap(), "*");
}
