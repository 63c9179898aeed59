use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use patternwise_core::assistant::AssistantConfig;
use patternwise_core::KbCatalog;
use patternwise_service::{router, AppState, SessionStore};
use serde_json::{json, Value};
use tower::ServiceExt;

fn kb_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../kbs")
}

struct Api {
    app: Router,
    state: Arc<AppState>,
    _dir: tempfile::TempDir,
}

impl Api {
    fn new() -> Api {
        let dir = tempfile::tempdir().unwrap();
        let catalog = KbCatalog::load_dir(&kb_dir()).unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let state = Arc::new(AppState::new(catalog, store, AssistantConfig::default()));
        Api {
            app: router(state.clone()),
            state,
            _dir: dir,
        }
    }

    async fn raw(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self
            .app
            .clone()
            .oneshot(req.body(body).unwrap())
            .await
            .unwrap();
        let status = resp.status();
        let bytes = resp
            .into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec();
        (status, bytes)
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.raw(method, uri, body).await;
        (status, serde_json::from_slice(&bytes).unwrap())
    }

    async fn start(&self) -> String {
        let (status, v) = self
            .call(
                Method::POST,
                "/sessions",
                Some(json!({"requirement": "users must authenticate", "kb": "authn"})),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        v["id"].as_str().unwrap().to_string()
    }

    async fn answer(&self, id: &str, property: &str, value: &str) -> Value {
        let (status, v) = self
            .call(
                Method::POST,
                &format!("/sessions/{id}/answers"),
                Some(json!({"property": property, "value": value})),
            )
            .await;
        assert_eq!(status, StatusCode::OK, "{v}");
        v
    }

    async fn answer_all(&self, id: &str, pairs: &[(&str, &str)]) {
        for (p, v) in pairs {
            self.answer(id, p, v).await;
        }
        let (status, q) = self
            .call(Method::GET, &format!("/sessions/{id}/question"), None)
            .await;
        assert_eq!(status, StatusCode::OK);
        assert!(q["question"].is_null(), "{q}");
        assert_eq!(q["state"], "recommending");
    }
}

const RC6: &[(&str, &str)] = &[
    ("sec-lev", "high"),
    ("use-lev", "high"),
    ("budget", "low"),
    ("no-users", "high"),
    ("intern-extern", "internal"),
    ("shared-device", "yes"),
];

const RC4: &[(&str, &str)] = &[
    ("sec-lev", "low"),
    ("use-lev", "low"),
    ("budget", "low"),
    ("no-users", "high"),
    ("intern-extern", "internal"),
    ("shared-device", "no"),
];

#[tokio::test]
async fn lists_knowledge_bases() {
    let api = Api::new();
    let (status, v) = api.call(Method::GET, "/kbs", None).await;
    assert_eq!(status, StatusCode::OK);
    let authn = v
        .as_array()
        .unwrap()
        .iter()
        .find(|k| k["id"] == "authn")
        .unwrap();
    assert_eq!(authn["patterns"], 6);
    assert_eq!(authn["context_properties"], 6);
    assert_eq!(authn["level"], "control");

    let (status, kb) = api.call(Method::GET, "/kbs/authn", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(kb["filter_conditions"].as_array().unwrap().len(), 3);

    let (status, err) = api.call(Method::GET, "/kbs/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "unknown_kb");
}

#[tokio::test]
async fn first_question_and_answer() {
    let api = Api::new();
    let id = api.start().await;
    let (_, q) = api
        .call(Method::GET, &format!("/sessions/{id}/question"), None)
        .await;
    assert_eq!(q["question"]["property_id"], "sec-lev");
    assert_eq!(q["question"]["impact_preview"]["high"], 5);

    let out = api.answer(&id, "sec-lev", "high").await;
    assert_eq!(out["accepted"], true);
    assert_eq!(out["feasible_count"], 5);
    assert!(out["conflict"].is_null());

    // persisted before the response
    let stored = api.state.store.load(&id).unwrap();
    assert_eq!(stored.ctx.get("sec-lev"), Some("high"));

    let (_, view) = api
        .call(Method::GET, &format!("/sessions/{id}"), None)
        .await;
    assert_eq!(view["feasible_count"], 5);
    assert!(!view["feasible"]
        .as_array()
        .unwrap()
        .contains(&json!("password")));
}

#[tokio::test]
async fn rc6_flow_recommends_biom_profile() {
    let api = Api::new();
    let id = api.start().await;
    api.answer_all(&id, RC6).await;
    let (status, e) = api
        .call(
            Method::GET,
            &format!("/sessions/{id}/recommendations"),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{e}");
    assert_eq!(e["recommendations"][0]["pattern_id"], "biom-profile");
    let excluded: Vec<&str> = e["excluded"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["pattern_id"].as_str().unwrap())
        .collect();
    assert_eq!(excluded, vec!["password", "passkey", "biom-device"]);

    let (status, view) = api
        .call(
            Method::POST,
            &format!("/sessions/{id}/selection"),
            Some(json!({"pattern": "biom-profile"})),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["session"]["state"], "done");
}

#[tokio::test]
async fn selecting_password_enters_design_stage() {
    let api = Api::new();
    let id = api.start().await;
    api.answer_all(&id, RC4).await;
    let (_, e) = api
        .call(
            Method::GET,
            &format!("/sessions/{id}/recommendations"),
            None,
        )
        .await;
    assert_eq!(e["recommendations"][0]["pattern_id"], "password");
    let (status, view) = api
        .call(
            Method::POST,
            &format!("/sessions/{id}/selection"),
            Some(json!({"pattern": "password"})),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{view}");
    assert_eq!(view["session"]["stage"], "sdp_stage");
    assert_eq!(view["session"]["state"], "eliciting");
    assert_eq!(view["session"]["active_kb"], "password");
    // no-users is shared with the control KB and pre-filled
    assert_eq!(view["session"]["ctx"]["no-users"], "high");

    let (_, q) = api
        .call(Method::GET, &format!("/sessions/{id}/question"), None)
        .await;
    assert_eq!(q["question"]["property_id"], "architecture");
}

#[tokio::test]
async fn errors_use_the_envelope() {
    let api = Api::new();
    let (status, err) = api
        .call(Method::GET, "/sessions/does-not-exist", None)
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "session_not_found");

    let (status, err) = api.call(Method::GET, "/sessions/..%2Fetc", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "invalid_session_id");

    let (status, err) = api
        .call(
            Method::POST,
            "/sessions",
            Some(json!({"requirement": "x", "kb": "nope"})),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "unknown_kb");

    let id = api.start().await;
    let (status, err) = api
        .call(
            Method::POST,
            &format!("/sessions/{id}/answers"),
            Some(json!({"property": "sec-lev", "value": "ultra"})),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"]["code"], "value_out_of_domain");
    assert_eq!(err["error"]["details"]["domain"], json!(["low", "high"]));

    let (status, err) = api
        .call(
            Method::POST,
            &format!("/sessions/{id}/answers"),
            Some(json!({"nonsense": 1})),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "invalid_request");

    let (status, err) = api
        .call(
            Method::GET,
            &format!("/sessions/{id}/recommendations"),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "wrong_state");

    let (status, err) = api
        .call(
            Method::DELETE,
            &format!("/sessions/{id}/answers/budget"),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "not_answered");

    let (status, err) = api.call(Method::GET, "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "not_found");
}

#[tokio::test]
async fn retract_restores_feasibility() {
    let api = Api::new();
    let id = api.start().await;
    api.answer(&id, "shared-device", "yes").await;
    api.answer(&id, "intern-extern", "external").await;
    let (status, view) = api
        .call(
            Method::DELETE,
            &format!("/sessions/{id}/answers/shared-device"),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["feasible_count"], 5);
    assert!(view["session"]["ctx"].get("shared-device").is_none());
}

#[tokio::test]
async fn assistant_explains_exclusion() {
    let api = Api::new();
    let id = api.start().await;
    api.answer(&id, "intern-extern", "external").await;
    let (status, ex) = api
        .call(
            Method::POST,
            &format!("/sessions/{id}/assistant"),
            Some(json!({"question": "why is hardware token excluded?"})),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{ex}");
    assert_eq!(ex["source"], "stub");
    assert_eq!(ex["cited_elements"], json!(["hrdw-token", "F2"]));
    assert!(ex["answer"].as_str().unwrap().contains("additional device"));

    let stored = api.state.store.load(&id).unwrap();
    let exchanges = stored
        .transcript
        .iter()
        .filter(|e| {
            matches!(
                e,
                patternwise_core::session::TranscriptEvent::Assistant { .. }
            )
        })
        .count();
    assert_eq!(exchanges, 1);
}

#[tokio::test]
async fn replayed_requests_give_identical_payloads() {
    async fn run() -> Vec<u8> {
        let api = Api::new();
        let id = api.start().await;
        api.answer_all(&id, RC6).await;
        let (status, bytes) = api
            .raw(
                Method::GET,
                &format!("/sessions/{id}/recommendations"),
                None,
            )
            .await;
        assert_eq!(status, StatusCode::OK);
        bytes
    }
    let a = run().await;
    let b = run().await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn concurrent_answers_on_one_session_are_serialized() {
    let api = Arc::new(Api::new());
    let id = api.start().await;
    let mut handles = Vec::new();
    for (p, v) in RC6 {
        let api = api.clone();
        let id = id.clone();
        handles.push(tokio::spawn(async move {
            api.answer(&id, p, v).await;
        }));
    }
    for h in handles {
        h.await.unwrap();
    }
    let stored = api.state.store.load(&id).unwrap();
    assert_eq!(stored.ctx.len(), 6);
    assert_eq!(stored.answer_log.len(), 6);
}
