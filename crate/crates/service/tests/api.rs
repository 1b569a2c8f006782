use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use spcdt::fixtures;
use spcdt_service::{router, SessionStore, StoreConfig};

fn app() -> Router {
    router(Arc::new(SessionStore::new(StoreConfig::default())), None)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn iris_session(app: &Router) -> String {
    let (status, body) = call(
        app,
        Method::POST,
        "/sessions",
        Some(json!({ "dataset_id": "iris", "tree_text": fixtures::IRIS_TREE })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_and_read_scene() {
    let app = app();
    let id = iris_session(&app).await;
    let (status, scene) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(scene["plots"].as_array().unwrap().len(), 3);
    assert_eq!(scene["polylines"].as_array().unwrap().len(), 150);
    let (_, eval) = call(&app, Method::GET, &format!("/sessions/{id}/evaluation"), None).await;
    assert_eq!(eval["errors"], 4);
    assert_eq!(eval["total"], 150);
}

#[tokio::test]
async fn threshold_edit_and_undo() {
    let app = app();
    let id = iris_session(&app).await;
    let (_, original) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;

    // anywhere in the empty gap between the setosa and the rest
    let (status, body) = call(
        &app,
        Method::PATCH,
        &format!("/sessions/{id}/threshold"),
        Some(json!({ "node_id": 0, "value": 2.7 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["delta"]["changed_cases"], json!([]));
    assert_eq!(body["delta"]["error_rate_before"], body["delta"]["error_rate_after"]);
    assert_eq!(body["scene"]["evaluation"]["confusion"], original["evaluation"]["confusion"]);

    let (_, body) = call(
        &app,
        Method::PATCH,
        &format!("/sessions/{id}/threshold"),
        Some(json!({ "node_id": 0, "value": 5.0 })),
    )
    .await;
    let after = body["delta"]["error_rate_after"].as_f64().unwrap();
    assert!(after > body["delta"]["error_rate_before"].as_f64().unwrap());
    assert!(!body["delta"]["changed_cases"].as_array().unwrap().is_empty());

    for _ in 0..2 {
        let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/undo"), None).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, restored) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    assert_eq!(restored, original);
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn layout_edits() {
    let app = app();
    let id = iris_session(&app).await;
    let uri = format!("/sessions/{id}/layout");
    let (_, original) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;

    let (status, scene) = call(&app, Method::PATCH, &uri, Some(json!({ "swap": { "plot": 0 } }))).await;
    assert_eq!(status, StatusCode::OK, "{scene}");
    assert_eq!(scene["plots"][0]["swapped"], true);
    assert_eq!(scene["plots"][0]["axes"]["h"]["attr"], original["plots"][0]["axes"]["v"]["attr"]);

    let (status, scene) = call(&app, Method::PATCH, &uri, Some(json!({ "flip": { "plot": 1, "axis": "v" } }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(scene["plots"][1]["axes"]["v"]["flipped"], true);

    let (status, scene) = call(
        &app,
        Method::PATCH,
        &uri,
        Some(json!({ "relocate": { "plot": 2, "origin": [9.0, 9.0] } })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(scene["plots"][2]["origin"], json!([9.0, 9.0]));

    let (status, scene) = call(&app, Method::PATCH, &uri, Some(json!({ "trace_mode": "full" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(scene["options"]["trace_mode"], "full");

    let (status, scene) = call(&app, Method::PATCH, &uri, Some(json!({ "case_selection": [0, 1, 2] }))).await;
    assert_eq!(status, StatusCode::OK);
    let shown = scene["polylines"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["muted"] == false)
        .count();
    assert_eq!(shown, 3);

    let (status, scene) = call(
        &app,
        Method::PATCH,
        &uri,
        Some(json!({ "condense": { "regions": [{ "plot": 0, "region": 0 }] } })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(scene["options"]["condensed_regions"], json!([{ "plot": 0, "region": 0 }]));

    // the tree never moves under layout edits
    assert_eq!(scene["evaluation"], original["evaluation"]);

    for _ in 0..6 {
        call(&app, Method::POST, &format!("/sessions/{id}/undo"), None).await;
    }
    let (_, restored) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    assert_eq!(restored, original);
}

#[tokio::test]
async fn bad_requests() {
    let app = app();
    let id = iris_session(&app).await;
    let cases = [
        (Method::GET, "/sessions/nope/scene".to_string(), None, StatusCode::NOT_FOUND),
        (
            Method::PATCH,
            format!("/sessions/{id}/threshold"),
            Some(json!({ "node_id": 1, "value": 1.0 })),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::PATCH,
            format!("/sessions/{id}/threshold"),
            Some(json!({ "node_id": 500, "value": 1.0 })),
            StatusCode::NOT_FOUND,
        ),
        (
            Method::PATCH,
            format!("/sessions/{id}/layout"),
            Some(json!({ "swap": { "plot": 40 } })),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::PATCH,
            format!("/sessions/{id}/layout"),
            Some(json!({ "spin": true })),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::PATCH,
            format!("/sessions/{id}/layout"),
            Some(json!({ "case_selection": [1000] })),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::POST,
            "/sessions".to_string(),
            Some(json!({ "dataset_id": "iris", "tree_text": "- bogus" })),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::POST,
            "/sessions".to_string(),
            Some(json!({ "dataset_id": "missing", "induce_params": {} })),
            StatusCode::NOT_FOUND,
        ),
        (Method::GET, format!("/sessions/{id}/reports/other"), None, StatusCode::NOT_FOUND),
        (Method::GET, "/elsewhere".to_string(), None, StatusCode::NOT_FOUND),
    ];
    for (method, uri, body, expected) in cases {
        let (status, reply) = call(&app, method, &uri, body).await;
        assert_eq!(status, expected, "{uri}: {reply}");
        assert!(reply["error"].is_string(), "{uri}: {reply}");
    }
    // none of the failures left an undo entry behind
    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn reports() {
    let app = app();
    let id = iris_session(&app).await;
    let (status, over) = call(&app, Method::GET, &format!("/sessions/{id}/reports/overgen"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(over["leaves"].as_array().unwrap().len(), 7);

    let (_, m) = call(&app, Method::GET, &format!("/sessions/{id}/reports/margins?epsilon=0.2"), None).await;
    let root = &m["nodes"][0];
    assert_eq!(root["node_id"], 0);
    assert_eq!(root["epsilon"], 0.2);

    let uri = format!("/sessions/{id}/reports/split-compare?train_fraction=0.8&seed=3");
    let (status, a) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, b) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(a, b);
    assert_eq!(a["train_eval"]["total"], 120);
    assert_eq!(a["validation_eval"]["total"], 30);
}

#[tokio::test]
async fn induced_and_inline_sessions() {
    let app = app();
    let csv = "x,y,class\n1,1,A\n2,1,A\n3,1,A\n7,1,B\n8,1,B\n9,1,B\n";
    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({ "csv": csv, "induce_params": {} })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["session_id"].as_str().unwrap().to_string();
    let (_, ws) = call(&app, Method::GET, &format!("/sessions/{id}/workspace"), None).await;
    let tree = &ws["tree"];
    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({ "csv": csv, "tree_json": tree, "placements": ws["placements"], "options": ws["options"] })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let copy = body["session_id"].as_str().unwrap().to_string();
    let (_, a) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    let (_, b) = call(&app, Method::GET, &format!("/sessions/{copy}/scene"), None).await;
    assert_eq!(a, b);
    assert_eq!(a["evaluation"]["errors"], 0);

    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_fallback() {
    let dir = std::env::temp_dir().join(format!("spcdt-static-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("index.html"), "<html></html>").unwrap();
    let app = router(Arc::new(SessionStore::default()), Some(dir.clone()));
    let res = app
        .oneshot(Request::get("/index.html").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    std::fs::remove_dir_all(dir).unwrap();
}

async fn raw_scene(app: &Router, id: &str) -> Vec<u8> {
    let req = Request::get(format!("/sessions/{id}/scene")).body(Body::empty()).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    res.into_body().collect().await.unwrap().to_bytes().to_vec()
}

#[tokio::test]
async fn no_op_edits() {
    let app = app();
    let id = iris_session(&app).await;
    let before = raw_scene(&app, &id).await;

    let (_, body) = call(
        &app,
        Method::PATCH,
        &format!("/sessions/{id}/threshold"),
        Some(json!({ "node_id": 0, "value": 2.45 })),
    )
    .await;
    assert_eq!(body["delta"]["changed_cases"], json!([]));
    assert_eq!(raw_scene(&app, &id).await, before);

    for _ in 0..2 {
        call(&app, Method::PATCH, &format!("/sessions/{id}/layout"), Some(json!({ "flip": { "plot": 0, "axis": "h" } }))).await;
    }
    assert_eq!(raw_scene(&app, &id).await, before);

    let (_, body) = call(
        &app,
        Method::PATCH,
        &format!("/sessions/{id}/threshold"),
        Some(json!({ "node_id": 3, "value": 5.15 })),
    )
    .await;
    assert!(!body["delta"]["changed_cases"].as_array().unwrap().is_empty());
    call(&app, Method::POST, &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(raw_scene(&app, &id).await, before);
}

#[test]
fn readers_see_whole_states() {
    let store = SessionStore::default();
    let session = store
        .create(spcdt_service::CreateSession {
            dataset_id: Some("iris".into()),
            tree_text: Some(fixtures::IRIS_TREE.into()),
            ..Default::default()
        })
        .unwrap();
    let plain = session.scene();
    let swapped = session.edit_layout(spcdt_service::LayoutEdit::Swap { plot: 0 }).unwrap();
    session.undo().unwrap();
    std::thread::scope(|s| {
        let writer = s.spawn(|| {
            for _ in 0..20 {
                session.edit_layout(spcdt_service::LayoutEdit::Swap { plot: 0 }).unwrap();
            }
        });
        for _ in 0..4 {
            s.spawn(|| {
                for _ in 0..200 {
                    let seen = session.scene();
                    assert!(*seen == *plain || *seen == *swapped);
                }
            });
        }
        writer.join().unwrap();
    });
    assert_eq!(*session.scene(), *plain);
    assert_eq!(session.undo_depth(), 20);
}
