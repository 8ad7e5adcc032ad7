use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use namebias::embed::{BackendSpec, DiskCache, Embedder};
use namebias::http::RetryPolicy;
use namebias::Error;
use serde_json::{json, Value};
use stub_http::{StubRequest, StubResponse, StubServer};

fn vector_for(text: &str) -> Vec<f64> {
    vec![text.len() as f64, text.bytes().map(f64::from).sum::<f64>(), 0.25]
}

fn inputs(req: &StubRequest) -> Vec<String> {
    let v: Value = serde_json::from_str(req.body_str()).unwrap();
    v["input"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
}

fn answer(req: &StubRequest) -> StubResponse {
    let embs: Vec<Vec<f64>> = inputs(req).iter().map(|t| vector_for(t)).collect();
    StubResponse::json(200, json!({ "embeddings": embs }).to_string())
}

fn fast_retry(max_retries: u32) -> RetryPolicy {
    RetryPolicy { max_retries, base_delay_ms: 5, max_delay_ms: 20 }
}

fn spec(server: &StubServer) -> BackendSpec {
    BackendSpec { retry: fast_retry(2), ..BackendSpec::remote(server.url(), "stub-model") }
}

#[test]
fn vectors_pass_through_and_cache_files_appear() {
    let server = StubServer::start(answer);
    let dir = tempfile::tempdir().unwrap();
    let s = BackendSpec { cache_dir: Some(dir.path().into()), ..spec(&server) };
    let e = Embedder::new(s).unwrap();
    let out = e.embed_batch(&["alpha", "beta"]).unwrap();
    assert_eq!(out[0].values(), vector_for("alpha").as_slice());
    assert_eq!(out[1].values(), vector_for("beta").as_slice());
    let files = walk(dir.path());
    assert_eq!(files.len(), 2);
    assert!(files.iter().all(|f| f.extension().unwrap() == "vec"));
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn warm_cache_makes_no_upstream_calls() {
    let server = StubServer::start(answer);
    let dir = tempfile::tempdir().unwrap();
    let s = BackendSpec { cache_dir: Some(dir.path().into()), ..spec(&server) };
    let texts = ["one", "two", "three", "two"];
    let cold = Embedder::new(s.clone()).unwrap().embed_batch(&texts).unwrap();
    let hits = server.hits();
    assert_eq!(hits, 1);

    let warm = Embedder::new(s).unwrap();
    let again = warm.embed_batch(&texts).unwrap();
    assert_eq!(server.hits(), hits);
    assert_eq!(warm.upstream_requests(), 0);
    for (a, b) in cold.iter().zip(&again) {
        let bits = |e: &namebias::Embedding| e.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn duplicate_texts_are_fetched_once() {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let server = StubServer::start(move |r| {
        log.lock().unwrap().extend(inputs(r));
        answer(r)
    });
    let e = Embedder::new(spec(&server)).unwrap();
    let out = e.embed_batch(&["same", "same", "other"]).unwrap();
    assert_eq!(out[0], out[1]);
    assert_eq!(*seen.lock().unwrap(), ["same", "other"]);
}

#[test]
fn survives_one_server_error() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = Arc::clone(&calls);
    let server = StubServer::start(move |r| {
        if c.fetch_add(1, Ordering::SeqCst) == 0 {
            StubResponse::json(503, r#"{"error":"busy"}"#)
        } else {
            answer(r)
        }
    });
    let out = Embedder::new(spec(&server)).unwrap().embed_batch(&["x"]).unwrap();
    assert_eq!(out[0].values(), vector_for("x").as_slice());
    assert_eq!(server.hits(), 2);
}

#[test]
fn errors_with_indices_after_retries_run_out() {
    let server = StubServer::start(|_| StubResponse::json(500, "{}"));
    let s = BackendSpec { retry: fast_retry(3), ..BackendSpec::remote(server.url(), "m") };
    let err = Embedder::new(s).unwrap().embed_batch(&["a", "b", "a"]).unwrap_err();
    match err {
        Error::Remote { indices, attempts, .. } => {
            assert_eq!(indices, vec![0, 1, 2]);
            assert_eq!(attempts, 4);
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(server.hits(), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let server = StubServer::start(|_| StubResponse::json(401, r#"{"error":"bad key"}"#));
    let err = Embedder::new(spec(&server)).unwrap().embed_batch(&["a"]).unwrap_err();
    assert!(err.to_string().contains("401"), "{err}");
    assert_eq!(server.hits(), 1);
}

#[test]
fn sub_batches_concatenate_to_one_logical_request() {
    let server = StubServer::start(answer);
    let texts: Vec<String> = (0..23).map(|i| format!("text number {i}")).collect();
    let whole = Embedder::new(BackendSpec { batch_size: 64, ..spec(&server) }).unwrap();
    let one = whole.embed_batch(&texts).unwrap();
    assert_eq!(whole.upstream_requests(), 1);
    let split = Embedder::new(BackendSpec { batch_size: 5, max_in_flight: 3, ..spec(&server) }).unwrap();
    let many = split.embed_batch(&texts).unwrap();
    assert_eq!(split.upstream_requests(), 5);
    assert_eq!(one, many);
}

#[test]
fn dimension_changes_are_rejected() {
    let server = StubServer::start(|r| {
        let embs: Vec<Vec<f64>> =
            inputs(r).iter().map(|t| if t == "odd" { vec![1.0] } else { vec![1.0, 2.0] }).collect();
        StubResponse::json(200, json!({ "embeddings": embs }).to_string())
    });
    let e = Embedder::new(spec(&server)).unwrap();
    let err = e.embed_batch(&["even", "odd"]).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 1 }), "{err}");
}

#[test]
fn wrong_embedding_count_is_an_error() {
    let server = StubServer::start(|_| StubResponse::json(200, r#"{"embeddings":[[1.0]]}"#));
    let err = Embedder::new(spec(&server)).unwrap().embed_batch(&["a", "b"]).unwrap_err();
    assert!(matches!(err, Error::Remote { .. }), "{err}");
}

#[test]
fn request_shape_and_bearer_token() {
    let captured = Arc::new(Mutex::new(None));
    let cap = Arc::clone(&captured);
    let server = StubServer::start(move |r| {
        *cap.lock().unwrap() = Some(r.clone());
        answer(r)
    });
    let e = Embedder::new(spec(&server)).unwrap().with_api_key(Some("s3cret".into()));
    e.embed_batch(&["hello"]).unwrap();
    let req = captured.lock().unwrap().clone().unwrap();
    assert_eq!(req.method, "POST");
    assert_eq!(req.header("authorization"), Some("Bearer s3cret"));
    let body: Value = serde_json::from_str(req.body_str()).unwrap();
    assert_eq!(body, json!({ "model": "stub-model", "input": ["hello"] }));
    assert!(!format!("{e:?}").contains("s3cret"));
}

#[test]
fn cache_is_shared_between_backends_only_by_key() {
    let server = StubServer::start(answer);
    let dir = tempfile::tempdir().unwrap();
    let a = BackendSpec { cache_dir: Some(dir.path().into()), ..spec(&server) };
    let b = BackendSpec { model_id: "other-model".into(), ..a.clone() };
    Embedder::new(a).unwrap().embed_batch(&["t"]).unwrap();
    let eb = Embedder::new(b).unwrap();
    eb.embed_batch(&["t"]).unwrap();
    assert_eq!(eb.upstream_requests(), 1);
    assert_eq!(walk(DiskCache::open(dir.path()).unwrap().root()).len(), 2);
}
