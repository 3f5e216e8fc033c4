use std::future::{Future, IntoFuture};
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use acap_core::{AdherenceEvent, ConsentRecord};

use super::{CalleeService, ServiceError};
use crate::card::{
    ADHERENCE_PATH, AGENT_CARD_PATH, AUDIT_PATH, CONSENT_PATH, SKILLS_PATH, USAGE_POLICY_PATH,
};
use crate::wire::SkillRequest;

type Shared = State<Arc<CalleeService>>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

fn parsed<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    body.map(|Json(v)| v)
        .map_err(|e| ServiceError::Malformed(e.body_text()))
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    (
        [(header::CONTENT_TYPE, "application/json")],
        Body::from(bytes),
    )
        .into_response()
}

async fn agent_card(State(s): Shared) -> Result<Response, ServiceError> {
    Ok(json_bytes(s.current()?.card_bytes.clone()))
}

async fn usage_policy(State(s): Shared) -> Result<Response, ServiceError> {
    Ok(json_bytes(s.current()?.policy_bytes.clone()))
}

async fn consent(
    State(s): Shared,
    body: Result<Json<ConsentRecord>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let ack = s.handle_consent(parsed(body)?)?;
    Ok(Json(ack).into_response())
}

async fn adherence(
    State(s): Shared,
    body: Result<Json<AdherenceEvent>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let ack = s.handle_adherence(parsed(body)?)?;
    Ok(Json(ack).into_response())
}

#[derive(Deserialize)]
struct AuditQuery {
    caller: String,
}

async fn audit(State(s): Shared, Query(q): Query<AuditQuery>) -> Response {
    Json(s.audit(&q.caller)).into_response()
}

async fn skill(
    State(s): Shared,
    Path(name): Path<String>,
    body: Result<Json<SkillRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let response = s.invoke_skill(&name, parsed(body)?)?;
    Ok(Json(response).into_response())
}

async fn log_request(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let uri = request.uri().clone();
    let response = next.run(request).await;
    tracing::info!(target: "acap::callee", "{method} {uri} {}", response.status().as_u16());
    response
}

/// Routes of the callee: the two well-known documents, the three
/// protocol endpoints and the gated skill endpoint.
pub fn router(service: Arc<CalleeService>) -> Router {
    Router::new()
        .route(AGENT_CARD_PATH, get(agent_card))
        .route(USAGE_POLICY_PATH, get(usage_policy))
        .route(CONSENT_PATH, post(consent))
        .route(ADHERENCE_PATH, post(adherence))
        .route(AUDIT_PATH, get(audit))
        .route(&format!("{SKILLS_PATH}/{{name}}"), post(skill))
        .layer(middleware::from_fn(log_request))
        .with_state(service)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    service: Arc<CalleeService>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .into_future()
        .await
}

/// A callee serving in a background task.
pub struct RunningCallee {
    pub addr: SocketAddr,
    pub service: Arc<CalleeService>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<io::Result<()>>,
}

impl RunningCallee {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        (&mut self.task)
            .await
            .map_err(|e| io::Error::other(e.to_string()))?
    }
}

impl Drop for RunningCallee {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// Spawns `service` on `listener`.
pub fn spawn(listener: TcpListener, service: Arc<CalleeService>) -> io::Result<RunningCallee> {
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(serve(listener, service.clone(), async {
        let _ = rx.await;
    }));
    Ok(RunningCallee {
        addr,
        service,
        shutdown: Some(tx),
        task,
    })
}
