use std::ffi::{c_char, CStr, CString};
use std::ptr;

use phishlist_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { pl_string_free(s) };
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pl_last_error_message()) }.to_str().unwrap().to_string()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

const URL: &str = "https://login-bank.example/verify";

fn txs() -> String {
    let id = phishlist::ledger::url_id(URL).unwrap();
    let mut v = vec![
        serde_json::json!({"sender":"sub","nonce":1,"kind":"RegisterUser","payload":{"display_name":"s"}}),
        serde_json::json!({"sender":"sub","nonce":2,"kind":"SubmitUrl","payload":{"url":URL,"evidence_email":format!("click {URL}")}}),
    ];
    for (i, who) in ["a", "b", "c"].iter().enumerate() {
        v.push(serde_json::json!({"sender":who,"nonce":1,"kind":"RegisterUser","payload":{"display_name":who}}));
        let verdict = if i == 2 { "NotPhishing" } else { "Phishing" };
        v.push(serde_json::json!({"sender":who,"nonce":2,"kind":"CastVote","payload":{"url_id":id,"verdict":verdict}}));
    }
    serde_json::to_string(&v).unwrap()
}

#[test]
fn ledger_handle_lifecycle() {
    let ledger = pl_ledger_new();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pl_ledger_state_digest(ledger, &mut out) }, PlStatus::Ok);
    let empty = take(out);
    assert_eq!(empty, phishlist::ledger::ChainState::new().digest().to_hex());

    let body = c(&txs());
    let mut hash = ptr::null_mut();
    assert_eq!(unsafe { pl_ledger_commit(ledger, body.as_ptr(), &mut hash) }, PlStatus::Ok);
    assert_eq!(take(hash).len(), 64);
    assert_eq!(unsafe { pl_ledger_height(ledger) }, 1);

    let id = c(&phishlist::ledger::url_id(URL).unwrap());
    assert_eq!(unsafe { pl_ledger_lookup(ledger, id.as_ptr(), &mut out) }, PlStatus::Ok);
    let view: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(view["votes"].as_array().unwrap().len(), 3);
    assert!(view["phish_score"].is_number());

    // Replaying the same transactions is rejected and leaves the ledger alone.
    assert_eq!(unsafe { pl_ledger_commit(ledger, body.as_ptr(), ptr::null_mut()) }, PlStatus::Rejected);
    assert_eq!(last_error(), "0:DuplicateUser");
    assert_eq!(unsafe { pl_ledger_height(ledger) }, 1);

    let missing = c("nope");
    assert_eq!(unsafe { pl_ledger_lookup(ledger, missing.as_ptr(), &mut out) }, PlStatus::NotFound);
    unsafe { pl_ledger_free(ledger) };
}

#[test]
fn validate_reports_reason_codes() {
    let ledger = pl_ledger_new();
    let vote = c(r#"{"sender":"x","nonce":1,"kind":"CastVote","payload":{"url_id":"u","verdict":"Phishing"}}"#);
    assert_eq!(unsafe { pl_ledger_validate(ledger, vote.as_ptr()) }, PlStatus::Rejected);
    assert_eq!(last_error(), "UnknownUser");
    let garbage = c("{");
    assert_eq!(unsafe { pl_ledger_validate(ledger, garbage.as_ptr()) }, PlStatus::InvalidJson);
    unsafe { pl_ledger_free(ledger) };
}

#[test]
fn null_arguments_are_rejected() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pl_ledger_state_digest(ptr::null(), &mut out) }, PlStatus::NullPointer);
    assert_eq!(unsafe { pl_url_id(ptr::null(), &mut out) }, PlStatus::NullPointer);
    let url = c("http://a.example/");
    assert_eq!(unsafe { pl_url_id(url.as_ptr(), ptr::null_mut()) }, PlStatus::NullPointer);
    unsafe { pl_string_free(ptr::null_mut()) };
    unsafe { pl_ledger_free(ptr::null_mut()) };
}

#[test]
fn stateless_helpers() {
    let mut out = ptr::null_mut();
    let url = c("HTTP://Example.COM:80/a");
    assert_eq!(unsafe { pl_url_id(url.as_ptr(), &mut out) }, PlStatus::Ok);
    assert_eq!(take(out), phishlist::ledger::url_id("http://example.com/a").unwrap());
    assert_eq!(pl_quorum_size(7), 5);
    assert_eq!(pl_quorum_size(0), 0);

    let graph = c(r#"{"nodes":["A","B"],"edges":[{"from":"A","to":"B","weight":1}]}"#);
    assert_eq!(unsafe { pl_pagerank(graph.as_ptr(), 0.85, 1e-9, 200, &mut out) }, PlStatus::Ok);
    let ranks: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert!((ranks["ranks"]["A"].as_f64().unwrap() - 0.5 / 1.425).abs() < 1e-6);
    assert_eq!(unsafe { pl_pagerank(graph.as_ptr(), 1.5, 1e-9, 200, &mut out) }, PlStatus::InvalidParams);

    let (mut score, mut has) = (0.0, false);
    let r = c(r#"{"a":1,"b":1,"c":1,"d":1}"#);
    let v = c(r#"[["a","Phishing"],["b","Phishing"],["c","Phishing"],["d","NotPhishing"]]"#);
    assert_eq!(unsafe { pl_phish_score(r.as_ptr(), v.as_ptr(), &mut score, &mut has) }, PlStatus::Ok);
    assert!(has && (score - 0.5).abs() < 1e-12);
    let two = c(r#"[["a","Phishing"],["b","Phishing"]]"#);
    assert_eq!(unsafe { pl_phish_score(r.as_ptr(), two.as_ptr(), &mut score, &mut has) }, PlStatus::Ok);
    assert!(!has);
}

#[test]
fn simulation_and_bench_round_trip_json() {
    let scenario =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios/7-honest.json")).unwrap();
    let s = c(&scenario);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pl_run_simulation(s.as_ptr(), &mut out) }, PlStatus::Ok);
    let report: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(report["stalled"], false);

    let spec = c(r#"{"n_urls":50,"n_verifiers":10,"seeds":[1],"algorithms":["pagerank"]}"#);
    assert_eq!(unsafe { pl_run_bench(spec.as_ptr(), &mut out) }, PlStatus::Ok);
    let bench: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(bench["rows"].as_array().unwrap().len(), 2);

    let bad = c(r#"{"seed":1}"#);
    assert_eq!(unsafe { pl_run_simulation(bad.as_ptr(), &mut out) }, PlStatus::InvalidParams);
}
