use std::sync::Arc;

use reqwest::StatusCode;
use serde_json::{json, Value};
use sqlia_core::pattern_store::SEED_FILE;
use sqlia_core::DetectorConfig;
use sqlia_server::{AlarmPolicy, AppState};

const ATTACK: &str = "Select * from login where user='hacker' or '1'='1' —' and pass='something'";
const LEGAL: &str = "SELECT * FROM user_account WHERE login='John' AND pass='xyz'";
const TAUTOLOGY_ONLY: &str = "#sqlia-spl v1\n1\tseed\t2024-01-01T00:00:00Z\t' or '1'='1\n";
const PARTIAL: &str = "SELECT * FROM users WHERE name='x' or '1 LIMIT 1";

struct Service {
    base: String,
    client: reqwest::Client,
    dir: tempfile::TempDir,
    _shutdown: tokio::sync::oneshot::Sender<()>,
}

impl Service {
    async fn start(seed: &str, policy: AlarmPolicy) -> Service {
        let dir = tempfile::tempdir().unwrap();
        if !seed.is_empty() {
            std::fs::write(dir.path().join("patterns.spl"), seed).unwrap();
        }
        let state = AppState::open(
            dir.path().join("patterns.spl"),
            dir.path().join("alarms.jsonl"),
            DetectorConfig::default(),
            policy,
        )
        .unwrap();
        let listener = sqlia_server::bind("127.0.0.1:0".parse().unwrap())
            .await
            .unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        tokio::spawn(sqlia_server::serve(listener, Arc::new(state), async {
            let _ = rx.await;
        }));
        Service {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
            dir,
            _shutdown: tx,
        }
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let resp = self
            .client
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }

    async fn post_raw(&self, path: &str, body: &'static str) -> StatusCode {
        let resp = self
            .client
            .post(format!("{}{path}", self.base))
            .body(body)
            .send()
            .await
            .unwrap();
        let status = resp.status();
        let body: Value = resp.json().await.unwrap();
        assert!(body["error"].is_string());
        status
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let resp = self
            .client
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .unwrap();
        (resp.status(), resp.json().await.unwrap())
    }

    async fn check(&self, query: &str) -> Value {
        let (status, body) = self.post("/v1/check", json!({ "query": query })).await;
        assert_eq!(status, StatusCode::OK);
        body
    }
}

#[tokio::test]
async fn check_verdicts() {
    let svc = Service::start(SEED_FILE, AlarmPolicy::AllowAndLog).await;
    let legal = svc.check(LEGAL).await;
    assert_eq!(legal["verdict"], "accepted");

    let attack = svc.check(ATTACK).await;
    assert_eq!(attack["verdict"], "rejected");
    assert_eq!(attack["pattern_id"], 1);
    assert_eq!(attack["score"], "100.000000");

    // "' or ''='" reaches depth 6 of 9 in the seed list
    let partial = svc.check(PARTIAL).await;
    assert_eq!(partial["verdict"], "alarm");
    assert_eq!(partial["score"], "66.666667");
    assert_eq!(partial["pattern_id"], 3);

    let single = Service::start(TAUTOLOGY_ONLY, AlarmPolicy::AllowAndLog).await;
    let partial = single.check(PARTIAL).await;
    assert_eq!(partial["verdict"], "alarm");
    assert_eq!(partial["score"], "63.636364");
    assert_eq!(partial["pattern_id"], 1);
    assert_eq!(partial["alarm_id"], 1);

    let empty = Service::start("", AlarmPolicy::AllowAndLog).await;
    assert_eq!(
        empty.check("x").await,
        json!({"verdict": "accepted", "score": "0.000000"})
    );
}

#[tokio::test]
async fn malformed_requests() {
    let svc = Service::start(SEED_FILE, AlarmPolicy::AllowAndLog).await;
    assert_eq!(
        svc.post_raw("/v1/check", "not json").await,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        svc.post_raw("/v1/check", r#"{"query": null}"#).await,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        svc.post_raw("/v1/check", r#"{}"#).await,
        StatusCode::BAD_REQUEST
    );
    let (status, body) = svc
        .post("/v1/check", json!({"query": LEGAL, "extra": [1, 2]}))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["verdict"], "accepted");
}

#[tokio::test]
async fn pattern_endpoints() {
    let svc = Service::start(SEED_FILE, AlarmPolicy::AllowAndLog).await;
    let (status, body) = svc.get("/v1/patterns").await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<u64> = body["patterns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, (1..=14).collect::<Vec<_>>());
    assert_eq!(body["patterns"][0]["source"], "seed");
    assert_eq!(body["patterns"][0]["created_at"], "2024-01-01T00:00:00Z");

    let (s1, first) = svc
        .post("/v1/patterns", json!({"text": "UNION  select null"}))
        .await;
    assert_eq!(s1, StatusCode::CREATED);
    assert_eq!(first["created"], true);
    assert_eq!(first["text"], "union select null");
    assert_eq!(first["source"], "admin");
    let (s2, second) = svc
        .post("/v1/patterns", json!({"text": "union select null"}))
        .await;
    assert_eq!(s2, StatusCode::OK);
    assert_eq!(second["created"], false);
    assert_eq!(first["id"], second["id"]);

    let (s3, _) = svc.post("/v1/patterns", json!({"text": "  "})).await;
    assert_eq!(s3, StatusCode::BAD_REQUEST);

    let (_, health) = svc.get("/v1/health").await;
    assert_eq!(
        health,
        json!({"status": "ok", "patterns": 15, "pending_alarms": 0})
    );
}

#[tokio::test]
async fn alarm_review_flow() {
    let svc = Service::start(TAUTOLOGY_ONLY, AlarmPolicy::AllowAndLog).await;
    let alarm_id = svc.check(PARTIAL).await["alarm_id"].as_u64().unwrap();

    let (_, pending) = svc.get("/v1/alarms?status=pending").await;
    let list = pending["alarms"].as_array().unwrap();
    assert_eq!(list.len(), 1);
    let view = &list[0];
    assert_eq!(view["score"], "63.636364");
    assert_eq!(view["status"], "pending");
    assert_eq!(view["suggested_pattern"], view["normalized_query"]);
    assert_eq!(view["best_pattern_text"], "' or '1'='1");
    let normalized = view["normalized_query"].as_str().unwrap();
    let (start, end) = (
        view["highlight_start"].as_u64().unwrap() as usize,
        view["highlight_end"].as_u64().unwrap() as usize,
    );
    assert_eq!(&normalized[start..end], "' or '1");

    let (status, _) = svc.get("/v1/alarms?status=bogus").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let path = format!("/v1/alarms/{alarm_id}/decision");
    let (s, _) = svc.post(&path, json!({"action": "confirm"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = svc.post(&path, json!({"action": "maybe"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = svc
        .post(&path, json!({"action": "confirm", "pattern_text": " "}))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = svc
        .post("/v1/alarms/99/decision", json!({"action": "dismiss"}))
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, decided) = svc
        .post(
            &path,
            json!({"action": "confirm", "pattern_text": "' or '1 limit"}),
        )
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(decided["status"], "confirmed");
    assert_eq!(decided["new_pattern_id"], 2);
    assert!(decided["decided_at"].is_string());

    let (s, _) = svc
        .post(
            &path,
            json!({"action": "confirm", "pattern_text": "' or '1 limit"}),
        )
        .await;
    assert_eq!(s, StatusCode::CONFLICT);

    let recheck = svc.check(PARTIAL).await;
    assert_eq!(recheck["verdict"], "rejected");
    assert_eq!(recheck["pattern_id"], 2);

    let (_, confirmed) = svc.get("/v1/alarms?status=confirmed").await;
    assert_eq!(confirmed["alarms"].as_array().unwrap().len(), 1);
    let (_, pending) = svc.get("/v1/alarms?status=pending").await;
    assert!(pending["alarms"].as_array().unwrap().is_empty());

    let (_, patterns) = svc.get("/v1/patterns").await;
    assert_eq!(patterns["patterns"][1]["text"], "' or '1 limit");
    assert_eq!(patterns["patterns"][1]["source"], "admin");
}

#[tokio::test]
async fn dismiss_keeps_pattern_file() {
    let svc = Service::start(SEED_FILE, AlarmPolicy::AllowAndLog).await;
    let alarm_id = svc.check(PARTIAL).await["alarm_id"].as_u64().unwrap();
    let spl = svc.dir.path().join("patterns.spl");
    let before = std::fs::read(&spl).unwrap();
    let (s, body) = svc
        .post(
            &format!("/v1/alarms/{alarm_id}/decision"),
            json!({"action": "dismiss"}),
        )
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["status"], "dismissed");
    assert_eq!(std::fs::read(&spl).unwrap(), before);
}

#[tokio::test]
async fn block_policy_rejects_but_records() {
    let svc = Service::start(SEED_FILE, AlarmPolicy::Block).await;
    let body = svc.check(PARTIAL).await;
    assert_eq!(body["verdict"], "rejected");
    assert_eq!(body["alarm_id"], 1);
    let (_, health) = svc.get("/v1/health").await;
    assert_eq!(health["pending_alarms"], 1);
}

#[tokio::test]
async fn cors_headers() {
    let svc = Service::start(SEED_FILE, AlarmPolicy::AllowAndLog).await;
    let resp = svc
        .client
        .get(format!("{}/v1/health", svc.base))
        .header("Origin", "http://console.local")
        .send()
        .await
        .unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}
