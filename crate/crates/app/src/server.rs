//! Read-only HTTP service over one CAE + PCA pair and, optionally, the corpus
//! they were fitted on.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use convpca_core::io::encode_png;
use convpca_core::latent::{component_extremes, decode_components, load_pca, PcaModel};
use convpca_core::neural::{load_cae, CaeModel, ImageTensor};
use convpca_core::synthdata::Corpus;
use convpca_core::FORMAT_VERSION;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::{AppError, AppResult};

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub model: PathBuf,
    pub pca: PathBuf,
    pub corpus: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

/// Corpus items with their component values.
pub struct Items {
    pub ids: Vec<String>,
    pub coords: Vec<(f64, f64)>,
    pub images: Vec<ImageTensor>,
    pub components: Array2<f64>,
    index: HashMap<String, usize>,
}

pub struct AppState {
    pub cae: CaeModel,
    pub pca: PcaModel,
    pub items: Option<Items>,
}

fn startup(what: &str, path: &Path, e: impl std::fmt::Display) -> AppError {
    AppError::Server(format!("cannot load {what} from {}: {e}", path.display()))
}

impl AppState {
    /// Loads and cross-checks everything the service needs; any failure here
    /// keeps the service from starting.
    pub fn load(config: &ServeConfig) -> AppResult<Self> {
        let cae = load_cae(&config.model).map_err(|e| startup("model", &config.model, e))?;
        let pca = load_pca(&config.pca).map_err(|e| startup("pca", &config.pca, e))?;
        if cae.latent_dim() != pca.dim() {
            return Err(AppError::Server(format!(
                "model latent width {} does not match pca width {}",
                cae.latent_dim(),
                pca.dim()
            )));
        }
        let items = match &config.corpus {
            None => None,
            Some(dir) => {
                let corpus = Corpus::read(dir).map_err(|e| startup("corpus", dir, e))?;
                let z = cae.encode_all(&corpus.images).map_err(|e| startup("corpus", dir, e))?;
                let components = pca.project(z.view())?;
                let index = corpus.ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
                Some(Items {
                    ids: corpus.ids,
                    coords: corpus.coords,
                    images: corpus.images,
                    components,
                    index,
                })
            }
        };
        Ok(AppState { cae, pca, items })
    }

    fn items(&self) -> Result<&Items, ApiError> {
        self.items
            .as_ref()
            .ok_or_else(|| ApiError::not_found("no corpus loaded"))
    }

    fn component(&self, k: usize) -> Result<usize, ApiError> {
        if k == 0 || k > self.pca.dim() {
            return Err(ApiError::bad_request(format!("component {k} outside 1..={}", self.pca.dim())));
        }
        Ok(k - 1)
    }
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl From<convpca_core::Error> for ApiError {
    fn from(e: convpca_core::Error) -> Self {
        use convpca_core::Error as E;
        let status = match e {
            E::Shape { .. } | E::InvalidInput(_) | E::ZeroVariance(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/components", get(components))
        .route("/api/latents", get(latents))
        .route("/api/extremes/{k}", get(extremes))
        .route("/api/decode", post(decode))
        .route("/api/map/{k}", get(map))
        .route("/api/items/{id}/image", get(item_image))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Loads the state, binds and serves until interrupted.
pub async fn serve(config: ServeConfig, host: &str, port: u16) -> AppResult<()> {
    let state = Arc::new(AppState::load(&config)?);
    let app = router(state, config.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .map_err(|e| AppError::Server(format!("cannot bind {host}:{port}: {e}")))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn health(State(s): Shared) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "version": FORMAT_VERSION,
        "latent_dim": s.pca.dim(),
        "items": s.items.as_ref().map_or(0, |i| i.ids.len()),
    }))
}

#[derive(Serialize)]
struct ComponentsResponse {
    count: usize,
    eigenvalues: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
}

async fn components(State(s): Shared) -> Json<ComponentsResponse> {
    Json(ComponentsResponse {
        count: s.pca.dim(),
        eigenvalues: s.pca.eigenvalues.to_vec(),
        explained_variance_ratio: s.pca.explained_variance_ratio().to_vec(),
    })
}

#[derive(Deserialize)]
struct LatentsQuery {
    limit: Option<usize>,
    /// Leading components per row.
    components: Option<usize>,
}

#[derive(Serialize)]
struct LatentRow<'a> {
    id: &'a str,
    x: f64,
    y: f64,
    values: Vec<f64>,
}

async fn latents(State(s): Shared, Query(q): Query<LatentsQuery>) -> Result<Response, ApiError> {
    let items = s.items()?;
    let width = q.components.unwrap_or(items.components.ncols()).min(items.components.ncols());
    let rows: Vec<LatentRow> = items
        .ids
        .iter()
        .enumerate()
        .take(q.limit.unwrap_or(usize::MAX))
        .map(|(i, id)| LatentRow {
            id,
            x: items.coords[i].0,
            y: items.coords[i].1,
            values: items.components.row(i).iter().take(width).copied().collect(),
        })
        .collect();
    Ok(Json(serde_json::json!({ "total": items.ids.len(), "components": width, "rows": rows })).into_response())
}

#[derive(Deserialize)]
struct ExtremesQuery {
    n: Option<usize>,
}

#[derive(Serialize)]
struct ExtremeItem {
    id: String,
    value: f64,
    thumbnail: String,
}

fn data_url(img: &ImageTensor) -> Result<String, ApiError> {
    Ok(format!("data:image/png;base64,{}", BASE64.encode(encode_png(img)?)))
}

async fn extremes(State(s): Shared, UrlPath(k): UrlPath<usize>, Query(q): Query<ExtremesQuery>) -> Result<Response, ApiError> {
    let items = s.items()?;
    let col = s.component(k)?;
    let (lowest, highest) = component_extremes(items.components.view(), k, q.n.unwrap_or(5))?;
    let describe = |rows: Vec<usize>| -> Result<Vec<ExtremeItem>, ApiError> {
        rows.into_iter()
            .map(|i| {
                Ok(ExtremeItem {
                    id: items.ids[i].clone(),
                    value: items.components[[i, col]],
                    thumbnail: data_url(&items.images[i])?,
                })
            })
            .collect()
    };
    Ok(Json(serde_json::json!({
        "component": k,
        "lowest": describe(lowest)?,
        "highest": describe(highest)?,
    }))
    .into_response())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Units {
    /// Component values as produced by the projection.
    #[default]
    Raw,
    /// Multiples of √λ_k.
    Sigma,
}

#[derive(Deserialize)]
struct DecodeRequest {
    values: Vec<f64>,
    #[serde(default)]
    units: Units,
}

#[derive(Deserialize)]
struct DecodeQuery {
    fmt: Option<String>,
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn decode(State(s): Shared, Query(q): Query<DecodeQuery>, Json(req): Json<DecodeRequest>) -> Result<Response, ApiError> {
    let d = s.pca.dim();
    if req.values.len() > d {
        return Err(ApiError::bad_request(format!("{} values for {d} components", req.values.len())));
    }
    let as_b64 = match q.fmt.as_deref() {
        None | Some("png") => false,
        Some("b64") => true,
        Some(other) => return Err(ApiError::bad_request(format!("unknown fmt '{other}'"))),
    };
    let mut values = vec![0.0; d];
    for (k, v) in req.values.iter().enumerate() {
        values[k] = match req.units {
            Units::Raw => *v,
            Units::Sigma => v * s.pca.eigenvalues[k].max(0.0).sqrt(),
        };
    }
    let state = s.clone();
    let img = tokio::task::spawn_blocking(move || decode_components(&state.pca, &state.cae, &values))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
        })??;
    let bytes = encode_png(&img)?;
    if as_b64 {
        return Ok(Json(serde_json::json!({
            "width": img.width(),
            "height": img.height(),
            "channels": img.channels(),
            "png": BASE64.encode(bytes),
        }))
        .into_response());
    }
    Ok(png(bytes))
}

async fn map(State(s): Shared, UrlPath(k): UrlPath<usize>) -> Result<Response, ApiError> {
    let items = s.items()?;
    let col = s.component(k)?;
    let points: Vec<serde_json::Value> = items
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            serde_json::json!({
                "id": id,
                "x": items.coords[i].0,
                "y": items.coords[i].1,
                "value": items.components[[i, col]],
            })
        })
        .collect();
    Ok(Json(serde_json::json!({ "component": k, "points": points })).into_response())
}

async fn item_image(State(s): Shared, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let items = s.items()?;
    let i = *items
        .index
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no item '{id}'")))?;
    Ok(png(encode_png(&items.images[i])?))
}
