use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::Value;

use crate::taxonomy::CanonicalQuestion;

/// What the stub sends back for one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubReply {
    /// `200` with `{"<text field>": text}`.
    Text(String),
    /// Empty reply with the given status.
    Status(u16),
    /// `200` with this exact body.
    Raw(String),
}

type Handler = dyn Fn(&Value) -> StubReply + Send + Sync;

#[derive(Default)]
struct Log {
    bodies: Mutex<Vec<Value>>,
    auth: Mutex<Vec<Option<String>>>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

/// In-process completion server speaking the remote backend protocol.
/// Shuts down when dropped.
pub struct StubServer {
    server: Arc<tiny_http::Server>,
    port: u16,
    prompt_field: String,
    log: Arc<Log>,
    worker: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for StubServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StubServer").field("port", &self.port).finish()
    }
}

impl StubServer {
    pub fn start(handler: impl Fn(&Value) -> StubReply + Send + Sync + 'static) -> Self {
        Self::start_with_fields("prompt", "text", handler)
    }

    pub fn start_with_fields(
        prompt_field: &str,
        text_field: &str,
        handler: impl Fn(&Value) -> StubReply + Send + Sync + 'static,
    ) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind stub server"));
        let port = server
            .server_addr()
            .to_ip()
            .expect("stub server listens on TCP")
            .port();
        let log = Arc::new(Log::default());
        let handler: Arc<Handler> = Arc::new(handler);
        let text_field = text_field.to_string();

        let worker = {
            let server = server.clone();
            let log = log.clone();
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    let log = log.clone();
                    let handler = handler.clone();
                    let text_field = text_field.clone();
                    std::thread::spawn(move || serve(request, &*handler, &text_field, &log));
                }
            })
        };
        Self {
            server,
            port,
            prompt_field: prompt_field.to_string(),
            log,
            worker: Some(worker),
        }
    }

    /// Always answers with `text`.
    pub fn scripted(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::start(move |_| StubReply::Text(text.clone()))
    }

    /// Answers with canonical questions chosen pseudo-randomly. A request
    /// carrying `seed` always gets the same reply for that seed; unseeded
    /// requests draw from an advancing counter.
    pub fn seeded() -> Self {
        let counter = AtomicU64::new(0x9e37_79b9);
        Self::start(move |body| {
            let seed = body
                .get("seed")
                .and_then(Value::as_u64)
                .unwrap_or_else(|| counter.fetch_add(1, Ordering::Relaxed).wrapping_mul(2_654_435_761));
            StubReply::Text(pick_questions(seed))
        })
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}/v1/complete", self.port)
    }

    /// JSON bodies received so far, in arrival order.
    pub fn requests(&self) -> Vec<Value> {
        self.log.bodies.lock().unwrap().clone()
    }

    /// Prompt field of each received body.
    pub fn prompts(&self) -> Vec<String> {
        self.requests()
            .iter()
            .filter_map(|b| b.get(&self.prompt_field).and_then(Value::as_str).map(String::from))
            .collect()
    }

    pub fn auth_headers(&self) -> Vec<Option<String>> {
        self.log.auth.lock().unwrap().clone()
    }

    /// Highest number of requests handled at once.
    pub fn max_in_flight(&self) -> usize {
        self.log.max_in_flight.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

fn pick_questions(seed: u64) -> String {
    // splitmix64
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let count = (next() % 4) as usize;
    if count == 0 {
        return "NO_QUESTION".to_string();
    }
    (0..count)
        .map(|_| CanonicalQuestion::QUESTIONS[(next() % 10) as usize].surface())
        .collect::<Vec<_>>()
        .join("\n")
}

fn serve(mut request: tiny_http::Request, handler: &Handler, text_field: &str, log: &Log) {
    let now = log.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    log.max_in_flight.fetch_max(now, Ordering::SeqCst);

    let auth = request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Authorization"))
        .map(|h| h.value.as_str().to_string());
    let mut raw = String::new();
    let parsed = request
        .as_reader()
        .read_to_string(&mut raw)
        .ok()
        .and_then(|_| serde_json::from_str::<Value>(&raw).ok());

    let response = match parsed {
        Some(body) if *request.method() == tiny_http::Method::Post => {
            log.bodies.lock().unwrap().push(body.clone());
            log.auth.lock().unwrap().push(auth);
            match handler(&body) {
                StubReply::Text(text) => json_response(200, serde_json::json!({ text_field: text }).to_string()),
                StubReply::Status(code) => tiny_http::Response::from_string(String::new()).with_status_code(code),
                StubReply::Raw(body) => json_response(200, body),
            }
        }
        _ => tiny_http::Response::from_string("expected a JSON POST").with_status_code(400),
    };
    log.in_flight.fetch_sub(1, Ordering::SeqCst);
    let _ = request.respond(response);
}

fn json_response(code: u16, body: String) -> tiny_http::Response<std::io::Cursor<Vec<u8>>> {
    let header = tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
        .expect("static header");
    tiny_http::Response::from_string(body)
        .with_status_code(code)
        .with_header(header)
}
