use std::sync::Arc;

use base64::Engine;
use prnu_authd::http::{serve, HttpOptions};
use prnu_authd::{load_store, Gateway, MeetingPolicy};
use prnu_core::frame_io::{write_y4m, Y4mChroma};
use prnu_core::sensor_sim::{render_sequence, SequenceRole};
use prnu_core::{make_camera, DenoiserConfig, SceneSchedule};
use serde_json::{json, Value};

fn inline(cam_seed: u64, role: SequenceRole, n: usize) -> String {
    let cam = make_camera("c", 48, 48, 0.02, 2.0, cam_seed).unwrap();
    let seq = render_sequence(&cam, role, n, SceneSchedule::default(), true).unwrap();
    let mut bytes = Vec::new();
    write_y4m(&seq, Y4mChroma::C420, &mut bytes).unwrap();
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn register_join_password_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let policy = MeetingPolicy {
        query_frame_count: 30,
        registration_frame_count: 30,
        ..MeetingPolicy::default()
    };
    let gw = Arc::new(Gateway::open(policy, DenoiserConfig::default(), dir.path(), None).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(gw, listener, HttpOptions::default(), async {
        let _ = stop_rx.await;
    }));
    let client = reqwest::Client::new();
    let post = |path: &str, body: Value| client.post(format!("{base}{path}")).json(&body).send();

    let reg = inline(1, SequenceRole::Registration, 30);
    let r = post("/register", json!({"user_id": "ann", "password": "hunter22", "frames_ref": reg})).await.unwrap();
    assert_eq!(r.status(), 201);
    let body: Value = r.json().await.unwrap();
    assert_eq!(body["frames_used"], 30);

    let r = post("/register", json!({"user_id": "ann", "password": "x", "frames_ref": reg})).await.unwrap();
    assert_eq!(r.status(), 409);
    let short = inline(1, SequenceRole::Registration, 5);
    let r = post("/register", json!({"user_id": "ben", "password": "x", "frames_ref": short})).await.unwrap();
    assert_eq!(r.status(), 422);
    let r = post("/register", json!({"user_id": "ben"})).await.unwrap();
    assert_eq!(r.status(), 400);

    let r: Value = post("/join", json!({"user_id": "ann", "frames_ref": inline(1, SequenceRole::Query, 30)}))
        .await.unwrap().json().await.unwrap();
    assert_eq!(r["decision"], "admitted_prnu");
    assert!(r["pce"].as_f64().unwrap() > 60.0);
    assert!(r["challenge_token"].is_null());

    let r: Value = post("/join", json!({"user_id": "ann", "frames_ref": inline(2, SequenceRole::Query, 30)}))
        .await.unwrap().json().await.unwrap();
    assert_eq!(r["decision"], "password_required");
    let token = r["challenge_token"].as_str().unwrap().to_string();

    let r: Value = post("/password", json!({"challenge_token": token, "password": "hunter22"}))
        .await.unwrap().json().await.unwrap();
    assert_eq!(r["decision"], "admitted_password");
    let r = post("/password", json!({"challenge_token": token, "password": "hunter22"})).await.unwrap();
    assert_eq!(r.status(), 401);

    let r: Value = post("/join", json!({"user_id": "nobody", "frames_ref": reg})).await.unwrap().json().await.unwrap();
    assert_eq!(r["decision"], "rejected");

    let audit = client.get(format!("{base}/audit")).send().await.unwrap();
    assert_eq!(audit.headers()["content-type"], "application/x-ndjson");
    let text = audit.text().await.unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    // 3 register attempts reach the gateway; the malformed body does not.
    assert_eq!(lines.len(), 3 + 3 + 2);
    assert!(!text.contains("hunter22"));

    stop_tx.send(()).unwrap();
    server.await.unwrap().unwrap();
    assert_eq!(load_store(dir.path()).unwrap().len(), 1);
}
