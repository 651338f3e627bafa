//! HTTP API and server-push event stream.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use rfid_attendance::{Actor, Error, Role, SessionId, StudentChanges, StudentFields, StudentId, TagId};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast;

use crate::events::{ApiEvent, EventBody, StudentSummary};
use crate::state::{lock, Clock, SharedCore};

/// Static bearer tokens, one per role.
#[derive(Debug, Clone, Default)]
pub struct Tokens {
    pub admin: Option<String>,
    pub operator: Option<String>,
}

impl Tokens {
    fn actor(&self, headers: &HeaderMap) -> Result<Actor, ApiError> {
        let token = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ApiError::Unauthorized)?;
        if self.admin.as_deref() == Some(token) {
            Ok(Actor::admin("admin"))
        } else if self.operator.as_deref() == Some(token) {
            Ok(Actor::operator("operator"))
        } else {
            Err(ApiError::Unauthorized)
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub core: SharedCore,
    pub clock: Arc<dyn Clock>,
    pub tokens: Arc<Tokens>,
}

#[derive(Debug)]
pub enum ApiError {
    Core(Error),
    BadRequest(String),
    Unauthorized,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::Validation(_) => StatusCode::BAD_REQUEST,
        Error::Forbidden => StatusCode::FORBIDDEN,
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::TagAlreadyBound(_)
        | Error::SessionAlreadyOpen(_)
        | Error::SessionClosed
        | Error::NoPendingRecord(_) => StatusCode::CONFLICT,
        Error::CorruptStore { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::Core(e) => (status_for(&e), e.to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "missing or unknown token".into()),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { StatusCode::OK }))
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/close", post(close_session))
        .route("/sessions/{id}/report.csv", get(report_csv))
        .route("/students", post(register_student))
        .route("/students/{id}", patch(update_student))
        .route("/events", get(events))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
pub struct OpenSessionBody {
    pub course: String,
    #[serde(default)]
    pub stream: String,
    #[serde(default)]
    pub trimester: String,
}

async fn open_session(
    State(app): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<OpenSessionBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let actor = app.tokens.actor(&headers)?;
    let Json(body) = body?;
    let mut core = lock(&app.core);
    let session = core
        .attendance
        .open_session(&actor, &body.course, &body.stream, &body.trimester, app.clock.now())?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn close_session(
    State(app): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<u64>,
) -> ApiResult<impl IntoResponse> {
    let actor = app.tokens.actor(&headers)?;
    let mut core = lock(&app.core);
    let session = core.attendance.close_session(&actor, SessionId(id), app.clock.now())?;
    let closed_s = session.closed_s.unwrap_or_default();
    core.hub.publish(session.id, EventBody::SessionClosed { closed_s });
    Ok(Json(session))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    let core = lock(&app.core);
    Ok(Json(core.session_view(SessionId(id))?))
}

async fn report_csv(State(app): State<AppState>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    let bytes = lock(&app.core).report_csv(SessionId(id))?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"session-{id}.csv\"")),
        ],
        bytes,
    ))
}

#[derive(Debug, Deserialize)]
pub struct RegisterBody {
    #[serde(flatten)]
    pub fields: StudentFields,
    pub tag_id: String,
}

async fn register_student(
    State(app): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<RegisterBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let actor = app.tokens.actor(&headers)?;
    let Json(body) = body?;
    let tag: TagId = body.tag_id.parse().map_err(|e: rfid_attendance::tag_protocol::TagIdError| {
        ApiError::Core(Error::Validation(e.to_string()))
    })?;
    let mut core = lock(&app.core);
    let (id, promoted) = core.attendance.register_student(&actor, body.fields, tag, app.clock.now())?;
    let student = core.attendance.store().student(id).cloned().expect("just created");
    for record in &promoted {
        core.hub.publish(
            record.session_ref,
            EventBody::Registration { tag_id: tag, student: StudentSummary::from(&student) },
        );
    }
    Ok((StatusCode::CREATED, Json(json!({ "student": student, "promoted": promoted }))))
}

async fn update_student(
    State(app): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<u64>,
    body: Result<Json<StudentChanges>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let actor = app.tokens.actor(&headers)?;
    if actor.role != Role::Admin {
        return Err(Error::Forbidden.into());
    }
    let Json(changes) = body?;
    let mut core = lock(&app.core);
    let student = core
        .attendance
        .store_mut()
        .update_student(&actor, StudentId(id), changes, app.clock.now())?;
    Ok(Json(student))
}

fn sse_event(event: &ApiEvent) -> Event {
    Event::default()
        .event("event")
        .id(event.seq.to_string())
        .json_data(event)
        .expect("events serialize")
}

/// Snapshot (or resume replay) followed by the live tail.
///
/// Resume with `Last-Event-ID` or `?since=`; otherwise the stream opens with
/// a `snapshot` event carrying the session view and its `seq`.
async fn events(
    State(app): State<AppState>,
    headers: HeaderMap,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let session = query
        .get("session")
        .and_then(|s| s.parse().ok())
        .map(SessionId)
        .ok_or_else(|| ApiError::BadRequest("session query parameter required".into()))?;
    let since = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .or(query.get("since").map(String::as_str))
        .and_then(|s| s.parse::<u64>().ok());

    let (head, last_seq, rx) = {
        let mut core = lock(&app.core);
        let view = core.session_view(session)?;
        let sub = core.hub.subscribe(session, since);
        let head: Vec<Event> = match sub.replay {
            Some(events) => events.iter().map(sse_event).collect(),
            None => vec![Event::default()
                .event("snapshot")
                .id(view.seq.to_string())
                .json_data(&view)
                .expect("snapshot serializes")],
        };
        (head, sub.last_seq, sub.rx)
    };

    let tail = stream::unfold((rx, last_seq), |(mut rx, last)| async move {
        loop {
            match rx.recv().await {
                Ok(ev) if ev.seq <= last => continue,
                Ok(ev) => {
                    let seq = ev.seq;
                    return Some((sse_event(&ev), (rx, seq)));
                }
                // lagging clients are cut off and resume by sequence number
                Err(broadcast::error::RecvError::Lagged(_)) | Err(broadcast::error::RecvError::Closed) => {
                    return None
                }
            }
        }
    });
    let stream = stream::iter(head).chain(tail).map(Ok);
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
