//! JSON API used by the elicitation front end.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use paci_core::aggregator::{aggregate, run_series, ModelConfig};
use paci_core::dcm::{
    build_weights, check_consistency, PairwiseTable, ScaleJudgements, SwingRanking,
};
use paci_core::epicriteria::{CriteriaMatrix, PerformanceVector};
use paci_core::sensitivity::{envelope_from_matrix, PerturbationSpec};
use paci_core::valuemodel::DEFAULT_CAP;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::cli::scale_preview;
use crate::data::{load_config, load_matrix};
use crate::error::{AppError, AppResult};

pub struct AppState {
    config: RwLock<ModelConfig>,
    config_path: Option<PathBuf>,
    /// Serialises config writes, including the file on disk.
    write_gate: Mutex<()>,
    matrix: Option<CriteriaMatrix>,
}

impl AppState {
    pub fn new(
        config: ModelConfig,
        config_path: Option<PathBuf>,
        matrix: Option<CriteriaMatrix>,
    ) -> Self {
        Self {
            config: RwLock::new(config),
            config_path,
            write_gate: Mutex::new(()),
            matrix,
        }
    }

    /// Starts from the config file if it exists; PUT /config writes back to it.
    pub fn load(config_path: Option<PathBuf>, input: Option<&Path>) -> AppResult<Self> {
        let config = match &config_path {
            Some(p) if p.exists() => load_config(Some(p))?,
            _ => ModelConfig::default(),
        };
        let matrix = input.map(|p| load_matrix(p, None, None)).transpose()?;
        Ok(Self::new(config, config_path, matrix))
    }

    fn config(&self) -> ModelConfig {
        self.config
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }
}

struct ApiError(StatusCode, AppError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e)
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let mut err = AppError::new("json", e.to_string());
        err.violations = vec![e.to_string()];
        ApiError(StatusCode::BAD_REQUEST, err)
    })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/config", get(get_config).put(put_config))
        .route("/preview/scale", post(preview_scale))
        .route("/preview/weights", post(preview_weights))
        .route("/preview/aggregate", post(preview_aggregate))
        .route("/series", get(get_series))
        .route("/envelope", get(get_envelope))
        .with_state(Arc::new(state))
}

pub async fn serve(addr: SocketAddr, state: AppState) -> AppResult<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn get_config(State(state): State<Arc<AppState>>) -> Json<ModelConfig> {
    Json(state.config())
}

async fn put_config(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<ModelConfig> {
    let value: Value = parse(&body)?;
    let cfg = ModelConfig::from_value(value).map_err(AppError::from)?;
    let _gate = state.write_gate.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(path) = &state.config_path {
        let tmp = path.with_extension("json.tmp");
        let text = cfg.to_json_pretty().map_err(AppError::from)?;
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, path))
            .map_err(AppError::from)?;
    }
    *state.config.write().unwrap_or_else(|e| e.into_inner()) = cfg.clone();
    Ok(Json(cfg))
}

#[derive(Deserialize)]
struct ScaleRequest {
    #[serde(flatten)]
    judgements: ScaleJudgements,
    cap: Option<f64>,
    /// Expert-filled pairwise table to check alongside the cards.
    table: Option<PairwiseTable>,
}

async fn preview_scale(body: Bytes) -> ApiResult<Value> {
    let req: ScaleRequest = parse(&body)?;
    if let Some(table) = &req.table {
        let report = check_consistency(table);
        if !report.is_consistent() {
            let err = AppError::new(
                "inconsistent-judgements",
                format!("{} violated triple(s)", report.violations.len()),
            )
            .with_details(json!({
                "violations": report.violations,
                "suspect_entries": report.suspect_entries(),
            }));
            return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, err));
        }
    }
    Ok(Json(scale_preview(
        req.judgements,
        req.cap.unwrap_or(DEFAULT_CAP),
    )?))
}

async fn preview_weights(body: Bytes) -> ApiResult<Value> {
    let ranking: SwingRanking = parse(&body)?;
    let weights = build_weights(&ranking).map_err(AppError::from)?;
    Ok(Json(json!({ "weights": weights })))
}

#[derive(Deserialize)]
struct AggregateRequest {
    date: Option<NaiveDate>,
    incidence: f64,
    transmission: f64,
    lethality: f64,
    wards: f64,
    icu: f64,
}

async fn preview_aggregate(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Value> {
    let req: AggregateRequest = parse(&body)?;
    let x = PerformanceVector::new(
        req.date.unwrap_or_default(),
        [
            req.incidence,
            req.transmission,
            req.lethality,
            req.wards,
            req.icu,
        ],
    );
    let violations = x.violations();
    if !violations.is_empty() {
        let mut err = AppError::new("invalid-performance", "performance vector rejected");
        err.violations = violations;
        return Err(err.into());
    }
    Ok(Json(
        serde_json::to_value(aggregate(&x, &state.config())).map_err(AppError::from)?,
    ))
}

#[derive(Deserialize)]
struct RangeQuery {
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
}

fn loaded_matrix(
    state: &AppState,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> Result<CriteriaMatrix, ApiError> {
    match &state.matrix {
        Some(m) => Ok(m.slice_dates(from, to)),
        None => Err(ApiError(
            StatusCode::NOT_FOUND,
            AppError::new("no-data", "the server was started without --input"),
        )),
    }
}

async fn get_series(
    State(state): State<Arc<AppState>>,
    Query(q): Query<RangeQuery>,
) -> ApiResult<Value> {
    let matrix = loaded_matrix(&state, q.from, q.to)?;
    let series = run_series(&matrix, &state.config());
    Ok(Json(serde_json::to_value(series).map_err(AppError::from)?))
}

#[derive(Deserialize)]
struct EnvelopeQuery {
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    delta_perf: Option<f64>,
    delta_value: Option<f64>,
    delta_weight: Option<f64>,
}

async fn get_envelope(
    State(state): State<Arc<AppState>>,
    Query(q): Query<EnvelopeQuery>,
) -> ApiResult<Value> {
    let matrix = loaded_matrix(&state, q.from, q.to)?;
    let spec = PerturbationSpec {
        perf_delta: q.delta_perf.unwrap_or(0.1),
        value_delta: q.delta_value.unwrap_or(0.1),
        weight_delta: q.delta_weight.unwrap_or(0.1),
        ..PerturbationSpec::default()
    };
    let env = envelope_from_matrix(&matrix, &state.config(), &spec).map_err(AppError::from)?;
    Ok(Json(json!({ "days": env.days, "summary": env.summary() })))
}
