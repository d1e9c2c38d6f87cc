//! C ABI over phishlist-core.
//!
//! Conventions: every fallible call returns a [`PlStatus`]. Strings handed
//! back through `out` pointers are NUL-terminated, heap-allocated by Rust,
//! and must be released with [`pl_string_free`]. After a failure,
//! [`pl_last_error_message`] describes it.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use phishlist::consensus::{quorum_size, run_simulation, Scenario};
use phishlist::ledger::{self, Block, ChainState, Transaction, Verdict};
use phishlist::node::views;
use phishlist::pipeline::{execute_transactions, replay, DeriveParams};
use phishlist::truth::{pagerank, phish_score, run_bench, BenchSpec, Edge, VerifierGraph};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    /// A transaction failed validation; the message holds the reason code.
    Rejected = 4,
    InvalidParams = 5,
    NotFound = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque ledger handle: committed state plus its block chain.
pub struct PlLedger {
    state: ChainState,
    chain: Vec<Block>,
    params: DeriveParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

type FfiResult<T> = Result<T, (PlStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PlStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside phishlist");
            PlStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err((PlStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (PlStatus::InvalidUtf8, e.to_string()))
}

unsafe fn read_json<T: serde::de::DeserializeOwned>(p: *const c_char) -> FfiResult<T> {
    serde_json::from_str(read_str(p)?).map_err(|e| (PlStatus::InvalidJson, e.to_string()))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    if out.is_null() {
        return Err((PlStatus::NullPointer, "null output pointer".into()));
    }
    let c = CString::new(s).map_err(|e| (PlStatus::InvalidParams, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn write_json<T: serde::Serialize>(out: *mut *mut c_char, v: &T) -> FfiResult<()> {
    write_string(out, serde_json::to_string(v).map_err(|e| (PlStatus::InvalidJson, e.to_string()))?)
}

unsafe fn ledger_ref<'a>(p: *const PlLedger) -> FfiResult<&'a PlLedger> {
    p.as_ref().ok_or((PlStatus::NullPointer, "null ledger handle".into()))
}

unsafe fn ledger_mut<'a>(p: *mut PlLedger) -> FfiResult<&'a mut PlLedger> {
    p.as_mut().ok_or((PlStatus::NullPointer, "null ledger handle".into()))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next phishlist call on the same thread. Never NULL.
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must come from a phishlist `out` string and not be freed yet. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// New ledger at genesis with default derivation parameters.
#[no_mangle]
pub extern "C" fn pl_ledger_new() -> *mut PlLedger {
    Box::into_raw(Box::new(PlLedger {
        state: ChainState::new(),
        chain: vec![Block::genesis()],
        params: DeriveParams::default(),
    }))
}

/// # Safety
/// `ledger` must come from `pl_ledger_new` or `pl_ledger_open` and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn pl_ledger_free(ledger: *mut PlLedger) {
    if !ledger.is_null() {
        drop(Box::from_raw(ledger));
    }
}

/// Replays a `chain.jsonl` block log into a new ledger.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pl_ledger_open(path: *const c_char, out: *mut *mut PlLedger) -> PlStatus {
    guard(|| {
        if out.is_null() {
            return Err((PlStatus::NullPointer, "null output pointer".into()));
        }
        let path = read_str(path)?;
        let blocks = ledger::read_blocks(path).map_err(|e| (PlStatus::Io, e.to_string()))?;
        let params = DeriveParams::default();
        let state = replay(&blocks, &params).map_err(|e| (PlStatus::InvalidParams, e.to_string()))?;
        let chain = if blocks.is_empty() { vec![Block::genesis()] } else { blocks };
        *out = Box::into_raw(Box::new(PlLedger { state, chain, params }));
        Ok(())
    })
}

/// Commits a block holding the given transactions (a JSON array, or a
/// single transaction object) on top of the ledger. On `Rejected` the
/// error message is `<index>:<ReasonCode>` and the ledger is unchanged.
/// Writes the new block hash (hex) to `out_hash` when it is non-NULL.
///
/// # Safety
/// `ledger` is a live handle, `txs_json` a NUL-terminated string, and
/// `out_hash` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn pl_ledger_commit(
    ledger: *mut PlLedger,
    txs_json: *const c_char,
    out_hash: *mut *mut c_char,
) -> PlStatus {
    guard(|| {
        let l = ledger_mut(ledger)?;
        let value: serde_json::Value = read_json(txs_json)?;
        let txs: Vec<Transaction> = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|t| vec![t])
        }
        .map_err(|e| (PlStatus::InvalidJson, e.to_string()))?;
        if txs.is_empty() {
            return Err((PlStatus::InvalidParams, "a block needs at least one transaction".into()));
        }
        let height = l.chain.len() as u64;
        let next = execute_transactions(&l.state, height, &txs, &l.params)
            .map_err(|(i, r)| (PlStatus::Rejected, format!("{i}:{}", r.code())))?;
        let parent = l.chain.last().expect("genesis").block_hash;
        let block = Block::new(height, parent, txs, "ffi".to_string(), 0, next.digest());
        let hash = block.block_hash.to_hex();
        l.chain.push(block);
        l.state = next;
        if !out_hash.is_null() {
            write_string(out_hash, hash)?;
        }
        Ok(())
    })
}

/// Validates one transaction against the current state without applying it.
/// Returns `Rejected` with the reason code as the error message.
///
/// # Safety
/// `ledger` is a live handle and `tx_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pl_ledger_validate(ledger: *const PlLedger, tx_json: *const c_char) -> PlStatus {
    guard(|| {
        let l = ledger_ref(ledger)?;
        let tx: Transaction = read_json(tx_json)?;
        ledger::validate_transaction(&l.state, &tx).map_err(|r| (PlStatus::Rejected, r.code().to_string()))
    })
}

/// Height of the ledger tip (0 at genesis).
///
/// # Safety
/// `ledger` is a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn pl_ledger_height(ledger: *const PlLedger) -> u64 {
    ledger.as_ref().map_or(0, |l| l.state.height)
}

/// SHA-256 state digest, lowercase hex.
///
/// # Safety
/// `ledger` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pl_ledger_state_digest(ledger: *const PlLedger, out: *mut *mut c_char) -> PlStatus {
    guard(|| write_string(out, ledger_ref(ledger)?.state.digest().to_hex()))
}

/// URL detail view as JSON, or `NotFound`.
///
/// # Safety
/// `ledger` is a live handle, `url_id` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_ledger_lookup(
    ledger: *const PlLedger,
    url_id: *const c_char,
    out: *mut *mut c_char,
) -> PlStatus {
    guard(|| {
        let l = ledger_ref(ledger)?;
        let id = read_str(url_id)?;
        let view = views::url_view(&l.state, id).ok_or((PlStatus::NotFound, format!("unknown url_id {id}")))?;
        write_json(out, &view)
    })
}

/// Blacklist as a JSON array, highest score first.
///
/// # Safety
/// `ledger` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pl_ledger_blacklist(ledger: *const PlLedger, out: *mut *mut c_char) -> PlStatus {
    guard(|| write_json(out, &views::blacklist(&ledger_ref(ledger)?.state)))
}

/// url_id (hex SHA-256 of the normalized URL), or `InvalidParams` for a
/// malformed URL.
///
/// # Safety
/// `url` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pl_url_id(url: *const c_char, out: *mut *mut c_char) -> PlStatus {
    guard(|| {
        let url = read_str(url)?;
        let id = ledger::url_id(url).ok_or((PlStatus::InvalidParams, format!("malformed URL {url:?}")))?;
        write_string(out, id)
    })
}

/// `2 * floor((n - 1) / 3) + 1`, or 0 when `n` is 0.
#[no_mangle]
pub extern "C" fn pl_quorum_size(n: usize) -> usize {
    quorum_size(n).unwrap_or(0)
}

#[derive(serde::Deserialize)]
struct GraphInput {
    #[serde(default)]
    nodes: Vec<String>,
    #[serde(default)]
    edges: Vec<Edge>,
}

/// PageRank over `{"nodes": [...], "edges": [{"from","to","weight"}]}`.
/// Writes `{"ranks": {...}, "iterations_used": n, "converged": b, ...}`.
///
/// # Safety
/// `graph_json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pl_pagerank(
    graph_json: *const c_char,
    damping: f64,
    tol: f64,
    max_iter: u32,
    out: *mut *mut c_char,
) -> PlStatus {
    guard(|| {
        let input: GraphInput = read_json(graph_json)?;
        let mut g = VerifierGraph::new().with_nodes(input.nodes);
        for e in &input.edges {
            g.add_edge(&e.from, &e.to, e.weight);
        }
        let ranks = pagerank(&g, damping, tol, max_iter).map_err(|e| (PlStatus::InvalidParams, e.to_string()))?;
        write_json(out, &ranks)
    })
}

/// Phish score of `votes_json` (`[["verifier", "Phishing"], ...]`) under
/// `ranks_json` (`{"verifier": rank}`). `*has_score` is false while there
/// are fewer than three votes.
///
/// # Safety
/// Strings are NUL-terminated; `score` and `has_score` are writable.
#[no_mangle]
pub unsafe extern "C" fn pl_phish_score(
    ranks_json: *const c_char,
    votes_json: *const c_char,
    score: *mut f64,
    has_score: *mut bool,
) -> PlStatus {
    guard(|| {
        if score.is_null() || has_score.is_null() {
            return Err((PlStatus::NullPointer, "null output pointer".into()));
        }
        let ranks: BTreeMap<String, f64> = read_json(ranks_json)?;
        let votes: Vec<(String, Verdict)> = read_json(votes_json)?;
        let s = phish_score(&ranks, votes.iter().map(|(v, d)| (v.as_str(), *d)))
            .map_err(|e| (PlStatus::InvalidParams, e.to_string()))?;
        *has_score = s.value().is_some();
        *score = s.value().unwrap_or(0.0);
        Ok(())
    })
}

/// Runs the truth-discovery benchmark; `spec_json` may be `{}` for defaults.
///
/// # Safety
/// `spec_json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pl_run_bench(spec_json: *const c_char, out: *mut *mut c_char) -> PlStatus {
    guard(|| {
        let spec: BenchSpec = read_json(spec_json)?;
        let report = run_bench(&spec).map_err(|e| (PlStatus::InvalidParams, e.to_string()))?;
        write_json(out, &report)
    })
}

/// Runs a consensus scenario; writes the simulation report as JSON.
///
/// # Safety
/// `scenario_json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pl_run_simulation(scenario_json: *const c_char, out: *mut *mut c_char) -> PlStatus {
    guard(|| {
        let scenario =
            Scenario::from_json(read_str(scenario_json)?).map_err(|e| (PlStatus::InvalidParams, e.to_string()))?;
        let report = run_simulation(&scenario).map_err(|e| (PlStatus::InvalidParams, e.to_string()))?;
        write_json(out, &report)
    })
}
