use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::{to_bytes, Body as AxumBody};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::IntoResponse;
use axum::Router;

use crate::api::{Body, Request, Service};

const MAX_BODY_BYTES: usize = 1 << 20;

/// Routes every request through [`Service::handle_request`].
pub fn router(service: Arc<Service>) -> Router {
    Router::new().fallback(move |req: axum::extract::Request| {
        let service = Arc::clone(&service);
        async move { forward(service, req).await }
    })
}

async fn forward(service: Arc<Service>, req: axum::extract::Request) -> axum::response::Response {
    let (parts, body) = req.into_parts();
    let body = match to_bytes(body, MAX_BODY_BYTES).await {
        Ok(b) => b.to_vec(),
        Err(_) => {
            return (StatusCode::PAYLOAD_TOO_LARGE, "request body too large").into_response();
        }
    };
    let request = Request {
        method: parts.method.as_str().to_string(),
        path: parts.uri.path_and_query().map_or("/".to_string(), |pq| pq.as_str().to_string()),
        headers: parts
            .headers
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_string(), v.to_str().ok()?.to_string())))
            .collect(),
        body,
    };
    // Password hashing and file writes block, so keep them off the async workers.
    let response = match tokio::task::spawn_blocking(move || service.handle_request(&request)).await {
        Ok(r) => r,
        Err(_) => return StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    };
    let status = StatusCode::from_u16(response.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let (content_type, bytes) = match response.body {
        Body::Json(v) => ("application/json", serde_json::to_vec(&v).expect("json response")),
        Body::Bytes { content_type, data } => (content_type, data),
    };
    let mut out = axum::response::Response::new(AxumBody::from(bytes));
    *out.status_mut() = status;
    out.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    out
}

pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("pecs: listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
