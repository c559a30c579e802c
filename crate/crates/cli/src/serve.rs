//! `tag-serve`: local HTTP service for the tagging tool.
//!
//! Routes:
//! - `GET /page/{id}`: the snapshot with the tagging script injected before `</body>`
//! - `GET /api/blocks/{id}`: the server-side block list, for parity checks
//! - `POST /truth/{id}`: ground-truth JSON, validated and written to the output directory
//! - `GET /ui/tagger.js`: the tagging script, when one was configured

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use harmonic_extract::dom::{decode_html, extract_text_blocks, parse_document};
use harmonic_extract::eval::GroundTruthPage;
use harmonic_extract::json::to_canonical_string;
use serde::Serialize;
use serde_json::json;

use crate::args::ServeArgs;
use crate::fsio::write_atomic;
use crate::{CliError, CliResult};

/// Attribute marking elements the server or tagging UI added to a page.
pub const RESERVED_ATTR: &str = "data-harmonic-tagger";
pub const SCRIPT_PATH: &str = "/ui/tagger.js";

pub struct ServeState {
    pub pages_dir: PathBuf,
    pub truth_dir: PathBuf,
    pub ui_script: Option<PathBuf>,
    write_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl ServeState {
    pub fn new(pages_dir: PathBuf, truth_dir: PathBuf, ui_script: Option<PathBuf>) -> Self {
        Self {
            pages_dir,
            truth_dir,
            ui_script,
            write_locks: Mutex::new(HashMap::new()),
        }
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.write_locks.lock().expect("lock map poisoned");
        locks.entry(id.to_owned()).or_default().clone()
    }
}

/// Block entry returned by `/api/blocks/{id}`.
#[derive(Debug, Clone, Serialize)]
pub struct BlockInfo {
    pub index: usize,
    pub dom_path: String,
    pub text_hash: String,
    pub text: String,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    let body = json!({ "error": message.into() }).to_string();
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn read_snapshot(state: &ServeState, id: &str) -> Result<String, Response> {
    if !valid_id(id) {
        return Err(error(StatusCode::BAD_REQUEST, "invalid page id"));
    }
    let path = state.pages_dir.join(format!("{id}.html"));
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| error(StatusCode::NOT_FOUND, format!("no snapshot {id}")))?;
    decode_html(&bytes).map_err(|e| error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
}

/// Insert the tagging script tag before the last `</body>`, or append it.
pub fn inject_script(html: &str, page_id: &str) -> String {
    let tag = format!(
        "<script src=\"{SCRIPT_PATH}\" {RESERVED_ATTR}=\"\" data-page-id=\"{page_id}\"></script>"
    );
    let lower = html.to_ascii_lowercase();
    match lower.rfind("</body") {
        Some(pos) => format!("{}{tag}{}", &html[..pos], &html[pos..]),
        None => format!("{html}{tag}"),
    }
}

async fn get_page(State(state): State<Arc<ServeState>>, Path(id): Path<String>) -> Response {
    match read_snapshot(&state, &id).await {
        Ok(html) => (
            [(header::CONTENT_TYPE, "text/html; charset=utf-8")],
            inject_script(&html, &id),
        )
            .into_response(),
        Err(r) => r,
    }
}

/// Server-side block list for a snapshot.
pub fn block_list(html: &str) -> Vec<BlockInfo> {
    extract_text_blocks(&parse_document(html))
        .into_iter()
        .map(|b| BlockInfo {
            index: b.index,
            dom_path: b.dom_path,
            text_hash: b.text_hash,
            text: b.text,
        })
        .collect()
}

async fn get_blocks(State(state): State<Arc<ServeState>>, Path(id): Path<String>) -> Response {
    match read_snapshot(&state, &id).await {
        Ok(html) => {
            let body = to_canonical_string(&block_list(&html)).expect("blocks serialize");
            ([(header::CONTENT_TYPE, "application/json")], body).into_response()
        }
        Err(r) => r,
    }
}

async fn post_truth(
    State(state): State<Arc<ServeState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Response {
    if !valid_id(&id) {
        return error(StatusCode::BAD_REQUEST, "invalid page id");
    }
    let Ok(text) = std::str::from_utf8(&body) else {
        return error(StatusCode::BAD_REQUEST, "body is not UTF-8");
    };
    let page = match GroundTruthPage::from_json(text) {
        Ok(p) => p,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    if page.page_id != id {
        return error(
            StatusCode::BAD_REQUEST,
            format!("page_id {:?} does not match URL id {id:?}", page.page_id),
        );
    }
    let canonical = to_canonical_string(&page).expect("truth serializes");
    let dest = state.truth_dir.join(format!("{id}.json"));

    let lock = state.lock_for(&id);
    let _guard = lock.lock().await;
    let written =
        tokio::task::spawn_blocking(move || write_atomic(&dest, canonical.as_bytes())).await;
    match written {
        Ok(Ok(())) => StatusCode::NO_CONTENT.into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn get_ui(State(state): State<Arc<ServeState>>) -> Response {
    let Some(path) = &state.ui_script else {
        return error(StatusCode::NOT_FOUND, "no tagging script configured (--ui)");
    };
    match tokio::fs::read(path).await {
        Ok(js) => (
            [(header::CONTENT_TYPE, "text/javascript; charset=utf-8")],
            js,
        )
            .into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, e.to_string()),
    }
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/page/{id}", get(get_page))
        .route("/api/blocks/{id}", get(get_blocks))
        .route("/truth/{id}", post(post_truth))
        .route(SCRIPT_PATH, get(get_ui))
        .with_state(state)
}

pub fn run(args: &ServeArgs) -> CliResult<()> {
    if !args.pages.is_dir() {
        return Err(CliError::usage(format!(
            "{} is not a directory",
            args.pages.display()
        )));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(format!("{}: {e}", args.out.display())))?;
    let state = Arc::new(ServeState::new(
        args.pages.clone(),
        args.out.clone(),
        args.ui.clone(),
    ));
    let addr = format!("{}:{}", args.bind, args.port);

    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::data(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::data(format!("cannot bind {addr}: {e}")))?;
        log::info!("tagging server on http://{addr}/page/<id>");
        eprintln!("serving {} on http://{addr}", args.pages.display());
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::data(e.to_string()))
    })
}
