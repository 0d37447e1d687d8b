//! Conductor client behavior against a scripted local endpoint.

use std::time::Duration;

use vocalplan_core::conductor::{
    ConductorClient, ConductorError, ConductorRequest, EndpointConfig, ProtocolError,
};
use vocalplan_core::features::SpeakerBaseline;
use vocalplan_core::testing::{wrap_in_fence, MockChatServer, MockReply};

const PLAN_JSON: &str = r#"[
  {
    "word": "hello there",
    "pitch_mean": 230,
    "pitch_slope": -5,
    "energy_rms": 0.012,
    "energy_slope": 2,
    "spectral_centroid": 1900
  }
]"#;

fn request() -> ConductorRequest {
    ConductorRequest {
        text: "hello there".into(),
        instruction: "speak warmly".into(),
        baseline: SpeakerBaseline::default(),
    }
}

fn config(base_url: &str) -> EndpointConfig {
    let mut cfg = EndpointConfig::new(base_url, "test-model");
    cfg.timeout = Duration::from_secs(5);
    cfg.max_retries = 3;
    cfg.backoff = Duration::from_millis(1);
    cfg
}

#[test]
fn valid_fenced_plan_roundtrips() {
    let content = format!("Here you go!\n{}\nEnjoy.", wrap_in_fence(PLAN_JSON));
    let server = MockChatServer::start(vec![MockReply::Content(content)]);
    let client = ConductorClient::new(config(&server.base_url)).unwrap();
    let plan = client.request_plan(&request()).unwrap();
    assert_eq!(plan.segments.len(), 1);
    assert_eq!(plan.segments[0].pitch_mean, 230);
    assert_eq!(server.finish(), 1);
}

#[test]
fn malformed_json_is_schema_error_without_retry() {
    let content = wrap_in_fence("[{not json");
    let server = MockChatServer::start(vec![MockReply::Content(content)]);
    let client = ConductorClient::new(config(&server.base_url)).unwrap();
    let err = client.request_plan(&request()).unwrap_err();
    assert!(matches!(err, ConductorError::Schema(_)), "{err:?}");
    assert_eq!(server.finish(), 1, "schema errors must not retry");
}

#[test]
fn missing_fence_is_protocol_error() {
    let server = MockChatServer::start(vec![MockReply::Content("no fence at all".into())]);
    let client = ConductorClient::new(config(&server.base_url)).unwrap();
    let err = client.request_plan(&request()).unwrap_err();
    assert!(matches!(
        err,
        ConductorError::Protocol(ProtocolError::NoFence)
    ));
    assert_eq!(server.finish(), 1);
}

#[test]
fn double_fence_is_protocol_error() {
    let content = format!("{}\n{}", wrap_in_fence(PLAN_JSON), wrap_in_fence(PLAN_JSON));
    let server = MockChatServer::start(vec![MockReply::Content(content)]);
    let client = ConductorClient::new(config(&server.base_url)).unwrap();
    let err = client.request_plan(&request()).unwrap_err();
    assert!(matches!(
        err,
        ConductorError::Protocol(ProtocolError::MultipleFences)
    ));
    assert_eq!(server.finish(), 1);
}

#[test]
fn transient_failures_retry_until_success() {
    let server = MockChatServer::start(vec![
        MockReply::Status(503),
        MockReply::Status(503),
        MockReply::Content(wrap_in_fence(PLAN_JSON)),
    ]);
    let client = ConductorClient::new(config(&server.base_url)).unwrap();
    let plan = client.request_plan(&request()).unwrap();
    assert_eq!(plan.segments[0].spectral_centroid, 1900);
    assert_eq!(server.finish(), 3);
}

#[test]
fn timeouts_retry_until_success() {
    let slow = Duration::from_millis(400);
    let server = MockChatServer::start(vec![
        MockReply::DelayedContent(slow, wrap_in_fence(PLAN_JSON)),
        MockReply::DelayedContent(slow, wrap_in_fence(PLAN_JSON)),
        MockReply::Content(wrap_in_fence(PLAN_JSON)),
    ]);
    let mut cfg = config(&server.base_url);
    cfg.timeout = Duration::from_millis(100);
    let client = ConductorClient::new(cfg).unwrap();
    let plan = client.request_plan(&request()).unwrap();
    assert_eq!(plan.segments.len(), 1);
    assert_eq!(server.finish(), 3);
}

#[test]
fn retry_budget_exhaustion_is_transport_error() {
    let server = MockChatServer::start(vec![
        MockReply::Status(503),
        MockReply::Status(503),
        MockReply::Status(503),
    ]);
    let mut cfg = config(&server.base_url);
    cfg.max_retries = 2;
    let client = ConductorClient::new(cfg).unwrap();
    let err = client.request_plan(&request()).unwrap_err();
    match err {
        ConductorError::Transport { attempts, .. } => assert_eq!(attempts, 3),
        other => panic!("unexpected: {other:?}"),
    }
    assert_eq!(server.finish(), 3);
}

#[test]
fn non_transient_status_fails_immediately() {
    let server = MockChatServer::start(vec![MockReply::Status(401)]);
    let client = ConductorClient::new(config(&server.base_url)).unwrap();
    let err = client.request_plan(&request()).unwrap_err();
    match err {
        ConductorError::Transport { attempts, .. } => assert_eq!(attempts, 1),
        other => panic!("unexpected: {other:?}"),
    }
    assert_eq!(server.finish(), 1);
}
