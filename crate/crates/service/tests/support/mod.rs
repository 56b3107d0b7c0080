#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::time::{Duration, Instant};

use matec_core::domain::CaseDocument;
use matec_core::PatientCase;
use matec_service::config::{BackendConfig, ServiceConfig};
use matec_service::{api, AppState};
use serde_json::Value;

pub fn config(store_dir: &Path) -> ServiceConfig {
    ServiceConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        backend: BackendConfig::default(),
        roster: None,
        store_dir: store_dir.to_path_buf(),
        parallelism: 5,
        agent_timeout_ms: 5_000,
        monitor_interval_secs: 60,
        synthesis_sees_all_roles: true,
        digest_recipients: vec!["Medical director".into()],
    }
}

pub struct Server {
    pub base: String,
    pub state: AppState,
    pub http: reqwest::Client,
    task: tokio::task::JoinHandle<()>,
}

impl Drop for Server {
    fn drop(&mut self) {
        self.task.abort();
    }
}

impl Server {
    pub async fn start(config: ServiceConfig) -> Server {
        let (state, _) = AppState::open(&config).await.expect("state opens");
        let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
        let base = format!("http://{}/api/v1", listener.local_addr().unwrap());
        let router = api::router(state.clone());
        let task = tokio::spawn(async move {
            axum::serve(listener, router).await.unwrap();
        });
        Server { base, state, http: reqwest::Client::new(), task }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        decode(self.http.get(self.url(path)).send().await.unwrap()).await
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        decode(self.http.post(self.url(path)).json(body).send().await.unwrap()).await
    }

    pub async fn create_case(&self, case: PatientCase, unit: Option<&str>) -> u16 {
        let path = match unit {
            Some(u) => format!("/cases?unit={u}"),
            None => "/cases".to_string(),
        };
        self.post(&path, &serde_json::to_value(CaseDocument::new(case)).unwrap()).await.0
    }

    /// Polls a consultation until it leaves `Pending`.
    pub async fn wait(&self, transcript_id: &str, within: Duration) -> Value {
        let start = Instant::now();
        loop {
            let (status, view) = self.get(&format!("/consultations/{transcript_id}")).await;
            assert_eq!(status, 200, "{view}");
            if view["status"] != "pending" {
                return view;
            }
            assert!(start.elapsed() < within, "consultation {transcript_id} still pending after {within:?}");
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }
}

pub async fn decode(resp: reqwest::Response) -> (u16, Value) {
    let status = resp.status().as_u16();
    let bytes = resp.bytes().await.unwrap();
    let body = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, body)
}

/// A `matec serve` child process.
pub struct Process {
    pub base: String,
    pub http: reqwest::Client,
    child: tokio::process::Child,
}

impl Process {
    /// Starts the binary and waits for its `listening on` line.
    pub async fn spawn(config_path: &Path) -> Process {
        use tokio::io::AsyncBufReadExt;
        let mut child = tokio::process::Command::new(env!("CARGO_BIN_EXE_matec"))
            .args(["serve", "--config"])
            .arg(config_path)
            .env("RUST_LOG", "error")
            .stdout(std::process::Stdio::piped())
            .kill_on_drop(true)
            .spawn()
            .expect("matec starts");
        let mut lines = tokio::io::BufReader::new(child.stdout.take().unwrap()).lines();
        let line = tokio::time::timeout(Duration::from_secs(20), lines.next_line())
            .await
            .expect("server announces its address")
            .unwrap()
            .expect("server exited before listening");
        let addr = line.strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected first line {line:?}"));
        Process { base: format!("http://{addr}/api/v1"), http: reqwest::Client::new(), child }
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        decode(self.http.get(format!("{}{path}", self.base)).send().await.unwrap()).await
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        decode(self.http.post(format!("{}{path}", self.base)).json(body).send().await.unwrap()).await
    }

    /// SIGKILL, no shutdown path runs.
    pub async fn kill(mut self) {
        self.child.kill().await.unwrap();
    }
}

/// Writes a config whose store is the config's own directory.
pub fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("matec.toml");
    std::fs::write(&path, format!("listen = \"127.0.0.1:0\"\nstore_dir = \".\"\n{extra}")).unwrap();
    path
}

/// Registers `count` consultations on one case and waits for all of them.
pub async fn commit_consultations(p: &Process, count: usize) -> Vec<String> {
    let case = serde_json::to_value(CaseDocument::new(matec_core::fixtures::endocarditis())).unwrap();
    assert_eq!(p.post("/cases", &case).await.0, 201);
    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        let resp = p
            .http
            .post(format!("{}/consultations", p.base))
            .header("Idempotency-Key", format!("key-{i}"))
            .json(&serde_json::json!({"case_id": "endocarditis", "question": format!("round {i}")}))
            .send()
            .await
            .unwrap();
        let (status, body) = decode(resp).await;
        assert_eq!(status, 202, "{body}");
        ids.push(body["transcript_id"].as_str().unwrap().to_string());
    }
    let start = Instant::now();
    for id in &ids {
        loop {
            let (_, view) = p.get(&format!("/consultations/{id}")).await;
            if view["status"] == "complete" {
                break;
            }
            assert_eq!(view["status"], "pending", "{view}");
            assert!(start.elapsed() < Duration::from_secs(60), "consultations did not finish");
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }
    ids
}

pub async fn statuses(p: &Process, ids: &[String]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for id in ids {
        let (_, view) = p.get(&format!("/consultations/{id}")).await;
        *counts.entry(view["status"].as_str().unwrap_or("missing").to_string()).or_insert(0) += 1;
    }
    counts
}
