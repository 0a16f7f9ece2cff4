//! HTTP provider clients against an in-process JSON server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use hybridqa_core::providers::{
    Embedder, GenRequest, Generator, HttpEmbedder, HttpGenerator, HttpReranker, HttpSettings,
    ProviderError, RerankRequest, Reranker, RetryPolicy,
};
use hybridqa_core::ranking::Granularity;
use serde_json::{json, Value};

type Handler = dyn Fn(&str, &Value, usize) -> (u16, Value, Duration) + Send + Sync;

struct Server {
    url: String,
    log: Arc<Mutex<Vec<(String, Value)>>>,
}

impl Server {
    /// `handler(path, body, nth_request_to_path)` → (status, body, delay).
    fn start(
        handler: impl Fn(&str, &Value, usize) -> (u16, Value, Duration) + Send + Sync + 'static,
    ) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let log = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let server_log = Arc::clone(&log);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let handler = Arc::clone(&handler);
                let log = Arc::clone(&server_log);
                thread::spawn(move || serve(stream, &*handler, &log));
            }
        });
        Server { url, log }
    }

    fn requests(&self, path: &str) -> Vec<Value> {
        self.log
            .lock()
            .unwrap()
            .iter()
            .filter(|(p, _)| p == path)
            .map(|(_, b)| b.clone())
            .collect()
    }
}

fn serve(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<(String, Value)>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let path = request_line
        .split_whitespace()
        .nth(1)
        .unwrap_or("")
        .to_owned();
    let mut content_length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; content_length];
    reader.read_exact(&mut body).unwrap();
    let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let nth = {
        let mut log = log.lock().unwrap();
        log.push((path.clone(), body.clone()));
        log.iter().filter(|(p, _)| *p == path).count() - 1
    };
    let (status, reply, delay) = handler(&path, &body, nth);
    thread::sleep(delay);
    let payload = reply.to_string();
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
}

fn settings(retries: u32, timeout_ms: u64) -> HttpSettings {
    HttpSettings {
        timeout: Duration::from_millis(timeout_ms),
        retry: RetryPolicy {
            max_retries: retries,
            base_backoff: Duration::from_millis(5),
        },
        max_in_flight: 4,
    }
}

fn ok(v: Value) -> (u16, Value, Duration) {
    (200, v, Duration::ZERO)
}

#[test]
fn embed_round_trip_normalizes_and_batches() {
    let server = Server::start(|path, body, _| match path {
        "/v1/capabilities" => ok(json!({"max_batch": 2, "dim": 3})),
        "/v1/embed" => {
            let texts = body["texts"].as_array().unwrap();
            let vectors: Vec<Value> = texts
                .iter()
                .map(|t| json!([t.as_str().unwrap().chars().count() as f32, 0.0, 1.0]))
                .collect();
            ok(json!({"dim": 3, "vectors": vectors}))
        }
        _ => (404, json!({}), Duration::ZERO),
    });
    let e = HttpEmbedder::connect(&server.url, &settings(0, 2000)).unwrap();
    assert_eq!((e.dim(), e.max_batch()), (3, 2));
    let texts: Vec<String> = ["abc", "", "abcd", "a", "xy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let vs = e.embed_all(&texts, true).unwrap();
    assert_eq!(vs.len(), 5);
    assert!(vs.iter().all(|v| v.is_normalized()));
    let reqs = server.requests("/v1/embed");
    assert_eq!(reqs.len(), 3);
    assert_eq!(reqs[0]["contextual"], true);
    assert_eq!(reqs[2]["texts"], json!(["xy"]));
}

#[test]
fn embed_dimension_mismatch_is_an_error() {
    let server = Server::start(|path, _, _| match path {
        "/v1/capabilities" => ok(json!({"max_batch": 8, "dim": 4})),
        _ => ok(json!({"dim": 3, "vectors": [[1.0, 0.0, 0.0]]})),
    });
    let e = HttpEmbedder::connect(&server.url, &settings(0, 2000)).unwrap();
    let err = e.embed_batch(&["x".to_string()], false).unwrap_err();
    assert!(
        matches!(
            err,
            ProviderError::DimensionMismatch {
                expected: 4,
                got: 3
            }
        ),
        "{err:?}"
    );
}

#[test]
fn rerank_orders_by_returned_scores() {
    let server = Server::start(|_, body, _| {
        let scores: Vec<Value> = body["candidates"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| json!({"id": c["id"], "score": c["text"].as_str().unwrap().len() as f64}))
            .collect();
        ok(json!({"scores": scores}))
    });
    let r = HttpReranker::new(&server.url, &settings(0, 2000));
    let req = RerankRequest::new("q", [("a", "x"), ("b", "xxx"), ("c", "xx")]);
    let ranked = r.rerank(&req, Granularity::Chunk).unwrap();
    assert_eq!(ranked.ids().collect::<Vec<_>>(), vec!["b", "c", "a"]);
    assert_eq!(server.requests("/v1/rerank")[0]["query"], "q");
}

#[test]
fn generate_sends_parameters() {
    let server = Server::start(|_, _, _| ok(json!({"text": "B 2"})));
    let g = HttpGenerator::new(&server.url, &settings(0, 2000));
    let req = GenRequest {
        prompt: "p".into(),
        max_tokens: 16,
        temperature: 0.0,
    };
    assert_eq!(g.generate(&req).unwrap(), "B 2");
    let sent = &server.requests("/v1/generate")[0];
    assert_eq!(
        (sent["prompt"].as_str(), sent["max_tokens"].as_u64()),
        (Some("p"), Some(16))
    );
    assert_eq!(sent["temperature"], 0.0);
}

#[test]
fn transient_errors_are_retried() {
    let server = Server::start(|_, _, nth| match nth {
        0 => (503, json!({"error": "busy"}), Duration::ZERO),
        1 => (429, json!({"error": "slow down"}), Duration::ZERO),
        _ => ok(json!({"text": "C 4"})),
    });
    let g = HttpGenerator::new(&server.url, &settings(3, 2000));
    let req = GenRequest {
        prompt: "p".into(),
        max_tokens: 16,
        temperature: 0.0,
    };
    assert_eq!(g.generate(&req).unwrap(), "C 4");
    assert_eq!(server.requests("/v1/generate").len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = Server::start(|_, _, nth| match nth {
        0 => (400, json!({"error": "bad"}), Duration::ZERO),
        _ => (413, json!({"error": "too long"}), Duration::ZERO),
    });
    let g = HttpGenerator::new(&server.url, &settings(3, 2000));
    let req = GenRequest {
        prompt: "p".into(),
        max_tokens: 16,
        temperature: 0.0,
    };
    assert!(matches!(
        g.generate(&req),
        Err(ProviderError::Http { status: 400, .. })
    ));
    assert_eq!(server.requests("/v1/generate").len(), 1);
    assert!(matches!(
        g.generate(&req),
        Err(ProviderError::ContextOverflow(_))
    ));
    assert_eq!(server.requests("/v1/generate").len(), 2);
}

#[test]
fn retries_are_bounded_on_timeouts() {
    let server =
        Server::start(|_, _, _| (200, json!({"text": "A 1"}), Duration::from_millis(1500)));
    let g = HttpGenerator::new(&server.url, &settings(1, 200));
    let req = GenRequest {
        prompt: "p".into(),
        max_tokens: 16,
        temperature: 0.0,
    };
    let err = g.generate(&req).unwrap_err();
    assert!(err.is_transient(), "{err:?}");
    thread::sleep(Duration::from_millis(50));
    assert_eq!(server.requests("/v1/generate").len(), 2);
}

#[test]
fn unreachable_host_fails_loudly() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let err =
        HttpEmbedder::connect(&format!("http://127.0.0.1:{port}"), &settings(2, 500)).unwrap_err();
    assert!(matches!(err, ProviderError::Unreachable { .. }), "{err:?}");
}
