//! Shared helpers for integration tests: scripted HTTP stubs and image fixtures.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::Router;

pub type Responder = Arc<dyn Fn(&[u8]) -> (u16, String) + Send + Sync>;

struct StubState {
    script: Mutex<VecDeque<(u16, String)>>,
    fallback: Responder,
    requests: Arc<Mutex<Vec<Vec<u8>>>>,
    delay: Duration,
}

/// HTTP server on 127.0.0.1 that records every request body and answers from a
/// script first, then from `fallback`.
pub struct StubServer {
    pub base: String,
    requests: Arc<Mutex<Vec<Vec<u8>>>>,
    task: tokio::task::JoinHandle<()>,
}

impl StubServer {
    pub async fn start(script: Vec<(u16, String)>, fallback: Responder) -> Self {
        Self::start_with_delay(script, fallback, Duration::ZERO).await
    }

    pub async fn start_with_delay(script: Vec<(u16, String)>, fallback: Responder, delay: Duration) -> Self {
        let requests = Arc::new(Mutex::new(Vec::new()));
        let state = Arc::new(StubState {
            script: Mutex::new(script.into()),
            fallback,
            requests: requests.clone(),
            delay,
        });
        let app = Router::new().fallback(handle).with_state(state);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let task = tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        StubServer { base, requests, task }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn requests(&self) -> Vec<Vec<u8>> {
        self.requests.lock().unwrap().clone()
    }

    pub fn request_json(&self, i: usize) -> serde_json::Value {
        serde_json::from_slice(&self.requests()[i]).unwrap()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn handle(State(st): State<Arc<StubState>>, body: Bytes) -> impl IntoResponse {
    st.requests.lock().unwrap().push(body.to_vec());
    if !st.delay.is_zero() {
        tokio::time::sleep(st.delay).await;
    }
    let scripted = st.script.lock().unwrap().pop_front();
    let (status, text) = scripted.unwrap_or_else(|| (st.fallback)(&body));
    (
        StatusCode::from_u16(status).unwrap(),
        [(axum::http::header::CONTENT_TYPE, "application/json")],
        text,
    )
}

pub fn chat_reply(content: &str) -> String {
    serde_json::json!({
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 10, "completion_tokens": 5}
    })
    .to_string()
}

/// Chat stub that answers with the question followed by the system message,
/// so the retrieved context shows up verbatim in the answer.
pub fn echo_chat() -> Responder {
    Arc::new(|body: &[u8]| {
        let req: serde_json::Value = serde_json::from_slice(body).unwrap();
        let msgs = req["messages"].as_array().unwrap();
        let system = msgs[0]["content"].as_str().unwrap_or_default();
        let question = msgs.last().unwrap()["content"].as_str().unwrap_or_default();
        (200, chat_reply(&format!("Q: {question}\n{system}")))
    })
}

/// Embedding stub returning `dim`-length vectors derived from each input's bytes.
pub fn fake_embeddings(dim: usize) -> Responder {
    Arc::new(move |body: &[u8]| {
        let req: serde_json::Value = serde_json::from_slice(body).unwrap();
        let data: Vec<serde_json::Value> = req["input"]
            .as_array()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let t = t.as_str().unwrap();
                let v: Vec<f64> = (0..dim).map(|j| ((t.len() + j * 7) % 11) as f64 + 1.0).collect();
                serde_json::json!({"index": i, "embedding": v})
            })
            .collect();
        (200, serde_json::json!({"data": data}).to_string())
    })
}

pub fn png_bytes(w: u32, h: u32) -> Vec<u8> {
    let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, 90]));
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

/// PNG filled with pseudo-random pixels, so it barely compresses.
pub fn noisy_png(w: u32, h: u32) -> Vec<u8> {
    let mut state = 0x9e37_79b9_u32;
    let img = image::RgbImage::from_fn(w, h, |_, _| {
        state ^= state << 13;
        state ^= state >> 17;
        state ^= state << 5;
        let [a, b, c, _] = state.to_le_bytes();
        image::Rgb([a, b, c])
    });
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn sample_kb() -> PathBuf {
    repo_root().join("kb")
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_leafdx")
}

/// Runs a CLI subcommand to completion, panicking on failure. Returns stdout.
pub fn run_cli(config: &Path, args: &[&str]) -> String {
    let out = Command::new(bin())
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "leafdx {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// A `leafdx serve` child process, killed on drop.
pub struct ServerProcess {
    child: Child,
    pub base: String,
}

impl ServerProcess {
    pub fn spawn(config: &Path) -> Self {
        let mut child = Command::new(bin())
            .arg("--config")
            .arg(config)
            .arg("serve")
            .env("RUST_LOG", "warn")
            .env_remove("GROQ_API_KEY")
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .unwrap();
        let stdout = child.stdout.take().unwrap();
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected server banner {line:?}"))
            .to_string();
        ServerProcess { child, base }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Config file for a loopback-only deployment: fixture detector, hash embeddings,
/// and the given chat endpoint.
pub fn write_config(dir: &Path, llm_endpoint: &str, window_size: usize, extra: &str) -> PathBuf {
    let labels = dir.join("labels");
    std::fs::create_dir_all(&labels).unwrap();
    let text = format!(
        r#"bind = "127.0.0.1:0"
store_path = "{store}"
session_seed = "replay"
frozen_time_ms = 0
{extra}

[detector]
mode = "fixture"
labels_dir = "{labels}"

[embedding]
kind = "hash"
dim = 384

[llm]
endpoint = "{llm_endpoint}"
model = "stub-model"
api_key_env = "LEAFDX_TEST_NO_SUCH_KEY"

[llm.retry]
max_retries = 2
base_delay_ms = 5
max_delay_ms = 20

[rag]
window_size = {window_size}
"#,
        store = dir.join("store.jsonl").display(),
        labels = labels.display(),
    );
    let path = dir.join("leafdx.toml");
    std::fs::write(&path, text).unwrap();
    path
}
