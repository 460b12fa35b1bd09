mod common;

use std::sync::{Mutex, Once};

use common::{completion, serve};
use ifl_core::answer::{Document, DocumentSet, Question};
use ifl_core::critic::CriticParams;
use ifl_core::feedback::BandThresholds;
use ifl_core::gateway::{
    chat_generate, ChatClient, ClientConfig, DecodeParams, Embedder, GatewayError, GenerationRequest, Generator,
    HttpEmbedder, RetryPolicy,
};
use ifl_core::ifl::{run_ifl, write_run_log, IflConfig};

static LOGS: Mutex<Vec<String>> = Mutex::new(Vec::new());

struct Capture;

impl log::Log for Capture {
    fn enabled(&self, _: &log::Metadata) -> bool {
        true
    }
    fn log(&self, record: &log::Record) {
        LOGS.lock()
            .unwrap()
            .push(format!("{} {}", record.level(), record.args()));
    }
    fn flush(&self) {}
}

fn capture_logs() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        log::set_boxed_logger(Box::new(Capture)).unwrap();
        log::set_max_level(log::LevelFilter::Trace);
    });
}

fn config(url: &str, retries: u32) -> ClientConfig {
    let mut c = ClientConfig::new(url, "stub-model");
    c.retry = RetryPolicy {
        max_retries: retries,
        backoff_base_ms: 1,
    };
    c.timeout_secs = 5.0;
    c
}

fn request(user: &str) -> GenerationRequest {
    GenerationRequest {
        system: "sys".into(),
        user: user.into(),
        in_context: Some(("demo question".into(), "demo answer [1].".into())),
        decode: DecodeParams::default(),
    }
}

#[test]
fn two_rate_limits_then_success() {
    capture_logs();
    let stub = serve(vec![
        (429, "{\"error\":\"slow down\"}".into()),
        (429, "{\"error\":\"slow down\"}".into()),
        (200, completion("Alpha [1].")),
    ]);
    let client = ChatClient::new(config(&stub.url, 3)).unwrap();
    let response = client.complete(&request("hello")).unwrap();
    assert_eq!(response.content, "Alpha [1].");
    assert_eq!(response.retries, 2);
    assert_eq!(stub.join().len(), 3);
}

#[test]
fn persistent_server_errors_exhaust_retries() {
    capture_logs();
    let stub = serve((0..5).map(|_| (500, "{\"error\":\"boom\"}".to_string())).collect());
    let client = ChatClient::new(config(&stub.url, 3)).unwrap();
    match client.complete(&request("hello")) {
        Err(GatewayError::Transport { attempts, detail }) => {
            assert_eq!(attempts, 4);
            assert!(detail.contains("500"), "{detail}");
        }
        other => panic!("expected transport error, got {other:?}"),
    }
    assert_eq!(stub.requests.lock().unwrap().len(), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = serve(vec![(400, "{\"error\":\"bad request body\"}".into())]);
    let client = ChatClient::new(config(&stub.url, 3)).unwrap();
    match client.complete(&request("hello")) {
        Err(GatewayError::Status { status, excerpt }) => {
            assert_eq!(status, 400);
            assert!(excerpt.contains("bad request body"));
        }
        other => panic!("expected status error, got {other:?}"),
    }
    assert_eq!(stub.join().len(), 1);
}

#[test]
fn malformed_body_is_a_decode_error() {
    let stub = serve(vec![(200, "{\"choices\": []}".into())]);
    let res = chat_generate(&config(&stub.url, 0), &request("hello"));
    assert!(matches!(res, Err(GatewayError::Decode(_))), "{res:?}");
    stub.join();
}

#[test]
fn zero_temperature_replies_are_stable_and_body_has_chat_shape() {
    let stub = serve(vec![(200, completion("Same [1].")), (200, completion("Same [1]."))]);
    let client = ChatClient::new(config(&stub.url, 0)).unwrap();
    let a = client.generate(&request("q")).unwrap();
    let b = client.generate(&request("q")).unwrap();
    assert_eq!(a, b);
    let requests = stub.join();
    let body = requests[0].split("\r\n\r\n").nth(1).unwrap();
    let v: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(v["model"], "stub-model");
    assert_eq!(v["temperature"], 0.0);
    assert_eq!(v["max_tokens"], 512);
    let roles: Vec<&str> = v["messages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["role"].as_str().unwrap())
        .collect();
    assert_eq!(roles, ["system", "user", "assistant", "user"]);
    assert_eq!(v["messages"][3]["content"], "q");
}

#[test]
fn embedder_reads_vectors() {
    let stub = serve(vec![(
        200,
        r#"{"data":[{"embedding":[0.5,1.5]},{"embedding":[2,3]}]}"#.into(),
    )]);
    let e = HttpEmbedder::new(config(&stub.url, 0)).unwrap();
    let v = e.embed(&["a".to_string(), "b".to_string()]).unwrap();
    assert_eq!(v, vec![vec![0.5, 1.5], vec![2.0, 3.0]]);
    let requests = stub.join();
    assert!(requests[0].contains("\"input\":[\"a\",\"b\"]"));
}

#[test]
fn auth_token_never_reaches_logs_or_run_files() {
    capture_logs();
    const SECRET: &str = "sk-test-0123456789abcdef";
    std::env::set_var("IFL_STUB_TEST_KEY", SECRET);
    let stub = serve(vec![
        (503, "{\"error\":\"warming up\"}".into()),
        (200, completion("Alpha is a letter [1].")),
        (200, completion("Alpha is a letter [1].")),
        (200, completion("Alpha is a letter [1].")),
    ]);
    let mut cfg = config(&stub.url, 2);
    cfg.api_key_env = Some("IFL_STUB_TEST_KEY".into());
    let client = ChatClient::new(cfg).unwrap();
    assert!(!format!("{client:?}").contains(SECRET));

    let question = Question {
        id: "q".into(),
        text: "What is alpha?".into(),
        gold_aspects: vec![vec!["letter".into()]],
    };
    let docs = DocumentSet::new(vec![Document::new(1, "Alpha", "Alpha is a letter.")]).unwrap();
    let mut critic = CriticParams::default();
    critic.head_mut(ifl_core::corpus::Aspect::Citation).bias = -5.0;
    let run = run_ifl(
        &question,
        &docs,
        &client,
        &critic,
        &BandThresholds::default(),
        &IflConfig::default(),
    )
    .unwrap();
    assert_eq!(run.records.len(), 3);

    let dir = tempdir();
    let path = dir.join("runs.jsonl");
    write_run_log(&path, &[run]).unwrap();
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(!written.contains(SECRET));

    let requests = stub.join();
    assert!(requests.iter().all(|r| r.contains(&format!("Bearer {SECRET}"))));
    let logs = LOGS.lock().unwrap();
    assert!(logs.iter().any(|l| l.contains("retry")), "retry should be logged");
    assert!(logs.iter().all(|l| !l.contains(SECRET)));
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("ifl-gateway-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
