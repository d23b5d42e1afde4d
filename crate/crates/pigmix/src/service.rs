//! HTTP facade over loaded, immutable artifacts.
//!
//! | route              | method | success | errors        |
//! |--------------------|--------|---------|---------------|
//! | `/api/health`      | GET    | 200     |               |
//! | `/api/pigments`    | GET    | 200     | 409           |
//! | `/api/match`       | POST   | 200     | 400, 409      |
//! | `/api/mix`         | POST   | 200     | 400, 409      |
//! | `/api/eval`        | GET    | 200     | 409           |
//!
//! Any other failure is a 500 whose body carries a correlation id that also
//! appears in the log.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use pigmix_core::colorimetry::{Colorimeter, Srgb8};
use serde::{Deserialize, Serialize};
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::error::{read_to_string, AppError, AppResult};
use crate::lut_file::{load_lut, LoadedLut};
use crate::model_file::{load_model, LoadedModel};
use crate::spectra_csv::{parse_pigments, PigmentFile};
use crate::wire::{self, ArtifactStatus, ErrorBody, ErrorResponse, HealthResponse, MatchRequest, MixRequest};

/// `serve --config` file. Relative paths are resolved against the config
/// file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Pigment CSV, or a corpus directory containing `pigments.csv`.
    #[serde(default)]
    pub pigments: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub lut: Option<PathBuf>,
    /// Directory written by `pigmix eval`; enables `/api/eval`.
    #[serde(default)]
    pub eval_dir: Option<PathBuf>,
    /// Allowed browser origins, e.g. `http://localhost:5173`.
    #[serde(default)]
    pub cors_allow: Vec<String>,
    /// Built UI to serve at `/`.
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: default_listen(),
            pigments: None,
            model: None,
            lut: None,
            eval_dir: None,
            cors_allow: Vec::new(),
            static_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> AppResult<Self> {
        let mut cfg: ServiceConfig =
            serde_json::from_str(&read_to_string(path)?).map_err(|e| AppError::format(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.pigments,
            &mut cfg.model,
            &mut cfg.lut,
            &mut cfg.eval_dir,
            &mut cfg.static_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Everything the handlers read. Absent artifacts keep the reason.
pub struct Artifacts {
    pub pigments: Result<PigmentFile, String>,
    pub model: Result<LoadedModel, String>,
    pub lut: Result<LoadedLut, String>,
    pub eval_dir: Option<PathBuf>,
    pub colorimeter: Colorimeter,
}

fn attempt<T>(what: &str, path: Option<&Path>, load: impl FnOnce(&Path) -> AppResult<T>) -> Result<T, String> {
    let Some(path) = path else {
        return Err(format!("no {what} configured"));
    };
    load(path).map_err(|e| {
        tracing::warn!(error = %e, "{what} not loaded");
        e.to_string()
    })
}

/// Pigment CSV, or the one inside a corpus directory.
pub fn load_pigments(path: &Path) -> AppResult<PigmentFile> {
    let path = if path.is_dir() {
        path.join(crate::corpus::PIGMENTS_FILE)
    } else {
        path.to_path_buf()
    };
    parse_pigments(&read_to_string(&path)?, &path)
}

impl Artifacts {
    pub fn load(cfg: &ServiceConfig) -> Self {
        let model = attempt("model", cfg.model.as_deref(), load_model);
        let lut = attempt("lut", cfg.lut.as_deref(), load_lut);
        if let (Ok(m), Ok(l)) = (&model, &lut) {
            if m.hash != l.lut.provenance().model_hash {
                tracing::warn!("LUT was built from a different model file than the one loaded");
            }
        }
        Artifacts {
            pigments: attempt("pigment file", cfg.pigments.as_deref(), load_pigments),
            model,
            lut,
            eval_dir: cfg.eval_dir.clone(),
            colorimeter: Colorimeter::standard(),
        }
    }

    pub fn health(&self) -> HealthResponse {
        fn status<T>(r: &Result<T, String>, hash: impl Fn(&T) -> Option<String>) -> ArtifactStatus {
            match r {
                Ok(v) => ArtifactStatus {
                    ready: true,
                    hash: hash(v),
                    detail: None,
                },
                Err(e) => ArtifactStatus {
                    ready: false,
                    hash: None,
                    detail: Some(e.clone()),
                },
            }
        }
        let pigments = status(&self.pigments, |_| None);
        let model = status(&self.model, |m| Some(m.hash_hex()));
        let lut = status(&self.lut, |l| Some(hex::encode(l.hash)));
        let all = pigments.ready && model.ready && lut.ready;
        HealthResponse {
            schema_version: wire::SCHEMA_VERSION,
            status: if all { "ok" } else { "degraded" }.into(),
            pigments,
            model,
            lut,
            lut_entries: self.lut.as_ref().ok().map(|l| l.lut.len()),
        }
    }
}

fn ready<'a, T>(what: &str, r: &'a Result<T, String>) -> Result<&'a T, ApiError> {
    r.as_ref()
        .map_err(|e| ApiError::from(AppError::NotReady(format!("{what}: {e}"))))
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn correlation_id() -> String {
    let n = NEXT_ID.fetch_add(1, Ordering::Relaxed);
    format!("{:08x}-{n:06}", std::process::id())
}

pub struct ApiError(AppError);

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        ApiError(e)
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(status: StatusCode, code: &str, message: String, correlation_id: Option<String>) -> Response {
    let body = ErrorResponse {
        schema_version: wire::SCHEMA_VERSION,
        error: ErrorBody {
            code: code.into(),
            message,
            correlation_id,
        },
    };
    json_response(status, wire::to_json(&body))
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let status = match &e {
            AppError::Usage(_) | AppError::Core(_) | AppError::Parse { .. } | AppError::Format { .. } => {
                StatusCode::BAD_REQUEST
            }
            AppError::NotReady(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            let id = correlation_id();
            tracing::error!(correlation_id = %id, error = %e, "request failed");
            return error_response(status, "internal", "internal error".into(), Some(id));
        }
        error_response(status, e.code(), e.to_string(), None)
    }
}

type Shared = Arc<Artifacts>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(AppError::Usage(format!("malformed request body: {e}"))))
}

async fn health(State(a): State<Shared>) -> Response {
    json_response(StatusCode::OK, wire::to_json(&a.health()))
}

async fn pigments(State(a): State<Shared>) -> Result<Response, ApiError> {
    let p = ready("pigments", &a.pigments)?;
    let r = wire::pigments_response(&p.records, &p.substrate, &a.colorimeter)?;
    Ok(json_response(StatusCode::OK, wire::to_json(&r)))
}

async fn match_color(State(a): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: MatchRequest = parse_body(&body)?;
    let k = wire::check_top_k(req.top_k.unwrap_or(wire::DEFAULT_TOP_K))?;
    let lut = ready("lut", &a.lut)?;
    let [r, g, b] = req.rgb;
    let resp = wire::match_response(lut, &a.colorimeter, Srgb8::new(r, g, b), k)?;
    Ok(json_response(StatusCode::OK, wire::to_json(&resp)))
}

async fn mix(State(a): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: MixRequest = parse_body(&body)?;
    req.resolve()?;
    let model = ready("model", &a.model)?;
    let p = ready("pigments", &a.pigments)?;
    let resp = wire::mix_response(model, &p.records, &p.substrate, &a.colorimeter, &req)?;
    Ok(json_response(StatusCode::OK, wire::to_json(&resp)))
}

async fn eval(State(a): State<Shared>) -> Result<Response, ApiError> {
    let dir = a
        .eval_dir
        .as_ref()
        .ok_or_else(|| AppError::NotReady("no eval_dir configured".into()))?;
    let path = dir.join(crate::report::EVAL_JSON);
    let text = tokio::fs::read_to_string(&path)
        .await
        .map_err(|e| AppError::NotReady(format!("{}: {e}", path.display())))?;
    Ok(json_response(StatusCode::OK, text))
}

fn panic_response(_: Box<dyn std::any::Any + Send + 'static>) -> Response {
    let id = correlation_id();
    tracing::error!(correlation_id = %id, "handler panicked");
    error_response(
        StatusCode::INTERNAL_SERVER_ERROR,
        "internal",
        "internal error".into(),
        Some(id),
    )
}

pub fn router(artifacts: Artifacts, cfg: &ServiceConfig) -> AppResult<Router> {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/pigments", get(pigments))
        .route("/api/match", post(match_color))
        .route("/api/mix", post(mix))
        .route("/api/eval", get(eval))
        .with_state(Arc::new(artifacts));
    if let Some(dir) = &cfg.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    if !cfg.cors_allow.is_empty() {
        let origins = cfg
            .cors_allow
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| AppError::Usage(format!("bad CORS origin {o:?}"))))
            .collect::<AppResult<Vec<_>>>()?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    Ok(app.layer(CatchPanicLayer::custom(panic_response)))
}

/// Bind, load artifacts, and serve until Ctrl-C.
pub async fn serve(cfg: ServiceConfig) -> AppResult<()> {
    let addr: SocketAddr = cfg
        .listen
        .parse()
        .map_err(|_| AppError::Usage(format!("bad listen address {:?}", cfg.listen)))?;
    let artifacts = Artifacts::load(&cfg);
    let h = artifacts.health();
    tracing::info!(status = %h.status, %addr, "serving");
    let app = router(artifacts, &cfg)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::Internal(format!("bind {addr}: {e}")))?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::Internal(e.to_string()))
}
