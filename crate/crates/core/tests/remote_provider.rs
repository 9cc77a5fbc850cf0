use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use gloss_core::authoring::generate_graph;
use gloss_core::llm::{complete, ApiKey, PromptRequest, ProviderConfig, ProviderError, ProviderHandle, RemoteConfig, Task};
use serde_json::{json, Value};

struct Captured {
    authorization: String,
    body: Value,
}

enum Reply {
    Status(u16, String),
    Hang,
}

fn ok(content: &str) -> Reply {
    Reply::Status(200, json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
}

fn read_request(stream: &mut TcpStream) -> Captured {
    let mut reader = BufReader::new(stream);
    let mut authorization = String::new();
    let mut length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let (name, value) = line.split_once(':').unwrap_or((line, ""));
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().unwrap(),
            "authorization" => authorization = value.trim().to_string(),
            _ => {}
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    Captured {
        authorization,
        body: serde_json::from_slice(&body).unwrap(),
    }
}

/// Serves `replies` in order, one per connection, and reports each request.
fn stub(replies: Vec<Reply>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for reply in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let captured = read_request(&mut stream);
            let _ = tx.send(captured);
            match reply {
                Reply::Status(code, body) => {
                    let head = format!(
                        "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                        body.len()
                    );
                    let _ = stream.write_all(head.as_bytes());
                    let _ = stream.write_all(body.as_bytes());
                }
                Reply::Hang => thread::sleep(Duration::from_secs(2)),
            }
        }
    });
    (url, rx)
}

fn config(url: &str, retries: u32) -> ProviderConfig {
    let mut c = RemoteConfig::new(url, ApiKey::new("sk-test"), "test-model");
    c.max_retries = retries;
    c.timeout = Duration::from_millis(500);
    ProviderConfig::RemoteChatCompletion(c)
}

fn request() -> PromptRequest {
    PromptRequest::new(Task::Feedback, "be kind", "{\"x\":1}")
}

#[test]
fn sends_chat_completion_and_reads_content() {
    let (url, rx) = stub(vec![ok("hello there")]);
    assert_eq!(complete(&config(&url, 0), &request()).unwrap(), "hello there");
    let got = rx.recv().unwrap();
    assert_eq!(got.authorization, "Bearer sk-test");
    assert_eq!(got.body["model"], "test-model");
    assert_eq!(got.body["temperature"], 0);
    assert_eq!(got.body["messages"][0], json!({"role": "system", "content": "be kind"}));
    assert_eq!(got.body["messages"][1], json!({"role": "user", "content": "{\"x\":1}"}));
}

#[test]
fn server_errors_are_retried() {
    let (url, rx) = stub(vec![Reply::Status(503, "{}".into()), ok("second time")]);
    assert_eq!(complete(&config(&url, 1), &request()).unwrap(), "second time");
    assert_eq!(rx.try_iter().count(), 2);
}

#[test]
fn retries_are_bounded() {
    let (url, rx) = stub(vec![Reply::Status(500, "{}".into()), Reply::Status(502, "{}".into())]);
    assert_eq!(complete(&config(&url, 1), &request()), Err(ProviderError::Http(502)));
    assert_eq!(rx.try_iter().count(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, rx) = stub(vec![Reply::Status(401, "{}".into())]);
    assert_eq!(complete(&config(&url, 3), &request()), Err(ProviderError::Http(401)));
    assert_eq!(rx.try_iter().count(), 1);
}

#[test]
fn unexpected_body_is_bad_response() {
    let (url, _rx) = stub(vec![Reply::Status(200, "{\"choices\": []}".into())]);
    assert!(matches!(complete(&config(&url, 0), &request()), Err(ProviderError::BadResponse(_))));
}

#[test]
fn unreachable_host_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/v1");
    assert!(matches!(complete(&config(&url, 0), &request()), Err(ProviderError::Unavailable(_))));
}

#[test]
fn silent_server_times_out() {
    let (url, _rx) = stub(vec![Reply::Hang]);
    assert_eq!(complete(&config(&url, 0), &request()), Err(ProviderError::Timeout));
}

#[test]
fn generation_goes_through_remote() {
    let scenario = json!({
        "title": "Noisy neighbour",
        "nodes": [
            {"id": "s", "avatar_utterance": "Your music is too loud."},
            {"id": "t", "avatar_utterance": "Thanks.", "terminal": true}
        ],
        "edges": [{"id": "e", "from": "s", "to": "t", "intent": {"label": "apologise"}}]
    });
    let (url, rx) = stub(vec![ok(&format!("```json\n{scenario}\n```"))]);
    let g = generate_graph(&ProviderHandle::from_config(&config(&url, 0)), "neighbour dispute").unwrap();
    assert_eq!(g.title, "Noisy neighbour");
    assert_eq!(g.nodes.len(), 2);
    let sent = rx.recv().unwrap();
    assert!(sent.body["messages"][1]["content"].as_str().unwrap().contains("neighbour dispute"));
}
