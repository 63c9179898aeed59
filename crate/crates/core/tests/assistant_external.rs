//! The external assistant backend against a local HTTP stub.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use patternwise_core::assistant::{ask, AssistantConfig, BackendKind};
use patternwise_core::dsl::parse_kb;
use patternwise_core::model::ContextAssignment;

const KB: &str = r#"
control demo
property site context
  values office, field
  description "Where the system is used."
property strength pattern
  values low, high
pattern pin
  strength = low
pattern card
  strength = high
filter F1
  when site = field
  then strength = high
  message "Field use needs strong credentials."
"#;

/// Serves one request with `body` and returns the request body it received.
fn serve_once(body: &'static str) -> (String, thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/ask", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line.trim().is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    length = v.trim().parse().unwrap();
                }
            }
        }
        let mut request = vec![0; length];
        reader.read_exact(&mut request).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        String::from_utf8(request).unwrap()
    });
    (url, handle)
}

#[test]
fn external_answer_keeps_only_known_citations() {
    let (url, server) = serve_once(
        r#"{"answer": "Use a card in the field.", "cited_elements": ["F1", "card", "made-up"]}"#,
    );
    let config = AssistantConfig {
        backend: BackendKind::External,
        endpoint: Some(url),
        timeout: Duration::from_secs(5),
        api_key: None,
    };
    let kb = parse_kb(KB).unwrap();
    let mut ctx = ContextAssignment::new();
    ctx.set("site", "field");
    let ex = ask(&config, &kb, &ctx, "which credential in the field?");
    assert_eq!(ex.source, BackendKind::External);
    assert_eq!(ex.answer, "Use a card in the field.");
    assert_eq!(ex.cited_elements, vec!["F1", "card"]);
    assert_eq!(ex.fallback_reason, None);

    let request: serde_json::Value = serde_json::from_str(&server.join().unwrap()).unwrap();
    assert_eq!(request["question"], "which credential in the field?");
    assert_eq!(request["context"]["site"], "field");
    assert!(request["kb_excerpt"]
        .as_str()
        .unwrap()
        .contains("filter F1"));
}

#[test]
fn malformed_external_response_falls_back_to_stub() {
    let (url, server) = serve_once(r#"{"text": "no answer field"}"#);
    let config = AssistantConfig {
        backend: BackendKind::External,
        endpoint: Some(url),
        timeout: Duration::from_secs(5),
        api_key: None,
    };
    let kb = parse_kb(KB).unwrap();
    let mut ctx = ContextAssignment::new();
    ctx.set("site", "field");
    let ex = ask(&config, &kb, &ctx, "why is pin excluded?");
    server.join().unwrap();
    assert_eq!(ex.source, BackendKind::Stub);
    assert!(ex.fallback_reason.unwrap().contains("malformed"));
    assert_eq!(ex.cited_elements, vec!["pin", "F1"]);
}
