#![allow(dead_code)]

use std::time::Duration;

use futures::StreamExt;
use rfid_attendance_gateway::ApiEvent;
use serde_json::Value;

pub const ADMIN: &str = "admin-secret";
pub const OPERATOR: &str = "operator-secret";

/// One server-sent event.
#[derive(Debug, Clone)]
pub struct Sse {
    pub event: String,
    pub id: Option<u64>,
    pub data: String,
}

impl Sse {
    pub fn api_event(&self) -> ApiEvent {
        assert_eq!(self.event, "event");
        serde_json::from_str(&self.data).unwrap()
    }

    pub fn json(&self) -> Value {
        serde_json::from_str(&self.data).unwrap()
    }
}

/// Incremental `text/event-stream` reader over a reqwest response.
pub struct SseClient {
    body: futures::stream::BoxStream<'static, reqwest::Result<bytes::Bytes>>,
    buf: String,
}

impl SseClient {
    pub async fn connect(base: &str, session: u64, last_event_id: Option<u64>) -> SseClient {
        let mut req = reqwest::Client::new().get(format!("{base}/events?session={session}"));
        if let Some(id) = last_event_id {
            req = req.header("Last-Event-ID", id.to_string());
        }
        let resp = req.send().await.unwrap();
        assert_eq!(resp.status(), 200);
        SseClient { body: resp.bytes_stream().boxed(), buf: String::new() }
    }

    /// Next non-comment event, or `None` when the stream ends or stalls.
    pub async fn next(&mut self) -> Option<Sse> {
        loop {
            if let Some(pos) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..pos + 2).collect();
                let mut ev = Sse { event: "message".into(), id: None, data: String::new() };
                let mut any = false;
                for line in block.lines() {
                    if let Some(v) = line.strip_prefix("event:") {
                        ev.event = v.trim().to_string();
                        any = true;
                    } else if let Some(v) = line.strip_prefix("id:") {
                        ev.id = v.trim().parse().ok();
                    } else if let Some(v) = line.strip_prefix("data:") {
                        ev.data.push_str(v.strip_prefix(' ').unwrap_or(v));
                        any = true;
                    }
                }
                if any {
                    return Some(ev);
                }
                continue;
            }
            match tokio::time::timeout(Duration::from_secs(10), self.body.next()).await {
                Ok(Some(Ok(chunk))) => self.buf.push_str(std::str::from_utf8(&chunk).unwrap()),
                _ => return None,
            }
        }
    }

    /// Reads tail events until `pred` holds for one of them.
    pub async fn until(&mut self, mut pred: impl FnMut(&ApiEvent) -> bool) -> Vec<ApiEvent> {
        let mut out = Vec::new();
        while let Some(ev) = self.next().await {
            let ev = ev.api_event();
            let done = pred(&ev);
            out.push(ev);
            if done {
                return out;
            }
        }
        panic!("stream ended before the expected event; got {out:?}");
    }
}
