//! Starts the HTTP service on a free port and walks through a session.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::time::Duration;

use gloss_core::ProviderHandle;
use gloss_service::{serve, AppState, DocumentStore};
use serde_json::{json, Value};

fn request(addr: SocketAddr, method: &str, path: &str, body: Option<Value>) -> (u16, Value) {
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    let mut stream = TcpStream::connect(addr).expect("server is up");
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status = raw[9..12].parse().unwrap();
    let payload = raw.split_once("\r\n\r\n").map(|(_, b)| b).unwrap_or("");
    (status, serde_json::from_str(payload).unwrap_or(Value::Null))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let addr = TcpListener::bind("127.0.0.1:0")?.local_addr()?;
    let state = AppState::new(DocumentStore::open(dir.path())?, ProviderHandle::mock());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.spawn(serve(state, addr));
    while TcpStream::connect(addr).is_err() {
        std::thread::sleep(Duration::from_millis(10));
    }

    let (status, graph) = request(addr, "POST", "/templates/customer-service/instantiate", None);
    println!("POST instantiate -> {status}, graph {}", graph["id"]);
    let (status, started) = request(addr, "POST", "/sessions", Some(json!({ "graph_id": graph["id"] })));
    let sid = started["session"]["id"].as_str().unwrap_or_default().to_string();
    println!("POST /sessions -> {status}: {}", started["avatar_utterance"]);

    for line in ["I am sorry for the inconvenience", "let me get you a replacement"] {
        let (status, turn) = request(addr, "POST", &format!("/sessions/{sid}/turns"), Some(json!({ "utterance": line })));
        println!("turn -> {status}: {} / {}", turn["decision"]["kind"], turn["avatar_reply"]);
    }
    let (_, report) = request(addr, "GET", &format!("/sessions/{sid}/report"), None);
    println!("report: matched {} path {}", report["matched_count"], report["path"]);
    let (status, err) = request(addr, "GET", "/graphs/nope", None);
    println!("GET /graphs/nope -> {status} {}", err["code"]);
    Ok(())
}
