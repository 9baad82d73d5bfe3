mod common;

use std::time::Duration;

use aui_core::catalog::Period;
use aui_core::http::{HttpClient, RetryPolicy};
use aui_core::raster::{encode_jpeg, CompositeImage};
use aui_core::scoring::{
    assemble_prompt, score, ModelBackend, PreviousObservation, RemoteBackend, ScoreOptions, ScoringRequest,
};
use aui_core::synth::default_reference_set;
use aui_core::Error;
use common::{Response, Server};
use serde_json::{json, Value};

fn jpeg(level: u8) -> Vec<u8> {
    encode_jpeg(&CompositeImage::new(8, 8, vec![level; 8 * 8 * 3]).unwrap()).unwrap()
}

fn backend(server: &Server, retries: u32) -> RemoteBackend {
    let client = HttpClient::new(
        RetryPolicy {
            retries,
            base_delay: Duration::from_millis(2),
        },
        2,
        Duration::from_secs(5),
    );
    RemoteBackend::new(&format!("{}/v1/", server.base), "vision-mini", Some("sk-test".into()), client)
}

fn completion(content: &str) -> Response {
    Response::json(
        200,
        json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string(),
    )
}

#[test]
fn request_shape_and_reply_extraction() {
    let server = Server::start(|_, _| completion(r#"{"aui": 3.46, "rationale": "ring road"}"#));
    let refs = default_reference_set(16).unwrap();
    let req = ScoringRequest {
        cell: "tdr70".into(),
        period: "2018-07".parse().unwrap(),
        current: jpeg(120),
        previous: Some(PreviousObservation {
            period: "2018-01".parse().unwrap(),
            aui: 3.2,
            jpeg: jpeg(110),
        }),
        references: &refs,
    };
    let b = backend(&server, 0);
    let s = score(&req, &b, ScoreOptions::default()).unwrap();
    assert_eq!(s.value, 3.5);
    assert_eq!(s.model_id, "vision-mini");
    assert_eq!(s.rationale.as_deref(), Some("ring road"));
    assert_eq!(s.prompt_digest, assemble_prompt(&req).unwrap().digest());

    let sent = &server.requests()[0];
    assert_eq!(sent.method, "POST");
    assert_eq!(sent.path(), "/v1/chat/completions");
    assert_eq!(sent.header("authorization"), Some("Bearer sk-test"));
    let body: Value = serde_json::from_slice(&sent.body).unwrap();
    assert_eq!(body["model"], "vision-mini");
    assert_eq!(body["temperature"], 0);
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages[0]["role"], "system");
    let user = messages[1]["content"].as_array().unwrap();
    let images: Vec<&str> = user
        .iter()
        .filter(|p| p["type"] == "image_url")
        .map(|p| p["image_url"]["url"].as_str().unwrap())
        .collect();
    // six references, previous, current
    assert_eq!(images.len(), refs.len() + 2);
    assert!(images.iter().all(|u| u.starts_with("data:image/jpeg;base64,")));
    let texts: Vec<&str> = user.iter().filter_map(|p| p["text"].as_str()).collect();
    assert!(texts.iter().any(|t| t.contains("previous period AUI = 3.2")));
    assert!(texts.last().unwrap().contains("2018-07"));
}

#[test]
fn malformed_replies_are_reasked_then_fail() {
    let server = Server::start(|_, _| completion("I'd say fairly urban."));
    let refs = default_reference_set(16).unwrap();
    let req = ScoringRequest {
        cell: "tdr70".into(),
        period: Period::new(2019, aui_core::catalog::Half::H1),
        current: jpeg(90),
        previous: None,
        references: &refs,
    };
    let err = score(&req, &backend(&server, 0), ScoreOptions { reasks: 2 }).unwrap_err();
    assert!(matches!(err, Error::Scoring { attempts: 3, .. }), "{err:?}");
    assert_eq!(server.count(), 3);
}

#[test]
fn server_errors_retry_then_surface_as_backend_errors() {
    let server = Server::start(|_, seq| {
        if seq == 0 {
            Response::json(502, "{}")
        } else {
            completion(r#"{"aui": 7}"#)
        }
    });
    let refs = default_reference_set(16).unwrap();
    let payload = assemble_prompt(&ScoringRequest {
        cell: "tdr0t".into(),
        period: "2024-07".parse().unwrap(),
        current: jpeg(200),
        previous: None,
        references: &refs,
    })
    .unwrap();
    assert_eq!(backend(&server, 1).complete(&payload).unwrap(), r#"{"aui": 7}"#);

    let down = Server::start(|_, _| Response::json(503, "{}"));
    let err = backend(&down, 2).complete(&payload).unwrap_err();
    assert!(matches!(err, Error::Backend(_)), "{err:?}");
    assert_eq!(down.count(), 3);

    let denied = Server::start(|_, _| Response::json(401, "{}"));
    assert!(matches!(backend(&denied, 3).complete(&payload), Err(Error::Backend(_))));
    assert_eq!(denied.count(), 1);

    let odd = Server::start(|_, _| Response::json(200, r#"{"choices": []}"#));
    assert!(matches!(backend(&odd, 0).complete(&payload), Err(Error::Backend(_))));
}
