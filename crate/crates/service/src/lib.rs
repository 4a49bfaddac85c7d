//! HTTP/JSON front end for `htd-core`.
//!
//! | method | path | body | response |
//! |--------|------|------|----------|
//! | GET  | `/health` | | `{"status":"ok"}` |
//! | POST | `/v1/evaluate` | `EvaluateRequest` | `RateResponse` |
//! | POST | `/v1/final-rate` | `CurveRequest` | `RateResponse` |
//! | POST | `/v1/curve` | `CurveRequest` | `LearningRateCurve` |
//! | POST | `/v1/ratio` | `RatioQuery` | `RatioResponse` |
//! | POST | `/v1/geometry` | `GeometryRequest` | `GeometryResponse` |
//! | POST | `/v1/diff` | `DiffRequest` | `ProximityReport` |
//! | POST | `/v1/train` | `ExperimentConfig` | `TrainResponse` |
//! | POST | `/v1/sweep` | `SweepConfig` | `SweepResponse` |
//!
//! `curve`, `diff`, `train` and `sweep` accept `?format=csv` and then answer
//! with the same CSV the CLI writes. Errors come back as `{"error": "..."}`
//! with status 422 for rejected inputs, 400 for malformed JSON and 500 for
//! server-side failures such as unreadable IDX files.

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Query, Request};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use htd_core::analysis::{self, ProximityReport, RatioQuery};
use htd_core::api::{
    CurveRequest, DiffRequest, ErrorBody, EvaluateRequest, GeometryRequest, GeometryResponse,
    RateResponse, RatioResponse, SweepResponse, TrainResponse,
};
use htd_core::harness::{self, ExperimentConfig, SweepConfig};
use htd_core::schedule::LearningRateCurve;
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/evaluate", post(evaluate))
        .route("/v1/final-rate", post(final_rate))
        .route("/v1/curve", post(curve))
        .route("/v1/ratio", post(ratio))
        .route("/v1/geometry", post(geometry))
        .route("/v1/diff", post(diff))
        .route("/v1/train", post(train))
        .route("/v1/sweep", post(sweep))
}

#[derive(Debug)]
pub struct AppError {
    status: StatusCode,
    message: String,
}

impl From<htd_core::Error> for AppError {
    fn from(err: htd_core::Error) -> Self {
        let status = match &err {
            htd_core::Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            htd_core::Error::Training { source, .. }
                if matches!(**source, htd_core::Error::Io { .. }) =>
            {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self {
            status,
            message: err.to_string(),
        }
    }
}

impl From<JsonRejection> for AppError {
    fn from(rejection: JsonRejection) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: rejection.body_text(),
        }
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(ErrorBody {
                error: self.message,
            }),
        )
            .into_response()
    }
}

/// JSON body extractor that reports rejections as [`ErrorBody`].
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = AppError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(value) = Json::<T>::from_request(req, state).await?;
        Ok(Body(value))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Default, Deserialize)]
pub struct FormatQuery {
    #[serde(default)]
    format: Format,
}

fn csv(text: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], text).into_response()
}

/// Runs CPU-heavy work off the async executor.
async fn blocking<T, F>(work: F) -> Result<T, AppError>
where
    F: FnOnce() -> htd_core::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| AppError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {e}"),
        })?
        .map_err(AppError::from)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn evaluate(Body(req): Body<EvaluateRequest>) -> Result<Json<RateResponse>, AppError> {
    req.schedule.validate()?;
    let lr = req.schedule.evaluate(req.t, req.horizon)?;
    Ok(Json(RateResponse { lr }))
}

async fn final_rate(Body(req): Body<CurveRequest>) -> Result<Json<RateResponse>, AppError> {
    req.schedule.validate()?;
    let lr = req.schedule.final_rate(req.horizon)?;
    Ok(Json(RateResponse { lr }))
}

async fn curve(
    Query(q): Query<FormatQuery>,
    Body(req): Body<CurveRequest>,
) -> Result<Response, AppError> {
    req.schedule.validate()?;
    let curve: LearningRateCurve = req.schedule.curve(req.horizon)?;
    Ok(match q.format {
        Format::Json => Json(curve).into_response(),
        Format::Csv => csv(curve.to_csv()),
    })
}

async fn ratio(Body(q): Body<RatioQuery>) -> Result<Json<RatioResponse>, AppError> {
    let q = RatioQuery::new(q.x, q.delta)?;
    Ok(Json(RatioResponse {
        ratio: analysis::decreasing_ratio(q),
        identity_gap: analysis::ratio_identity_check(q).ok(),
    }))
}

async fn geometry(Body(req): Body<GeometryRequest>) -> Result<Json<GeometryResponse>, AppError> {
    Ok(Json(GeometryResponse {
        inflection_fraction: analysis::inflection_fraction(req.lower, req.upper)?,
        ratio_r: analysis::ratio_r(req.lower, req.upper)?,
    }))
}

async fn diff(
    Query(q): Query<FormatQuery>,
    Body(req): Body<DiffRequest>,
) -> Result<Response, AppError> {
    req.a.validate()?;
    req.b.validate()?;
    let report: ProximityReport =
        blocking(move || analysis::sup_difference(&req.a, &req.b, req.grid_points)).await?;
    Ok(match q.format {
        Format::Json => Json(report).into_response(),
        Format::Csv => csv(format!(
            "{}\n{}\n",
            ProximityReport::CSV_HEADER,
            report.csv_row()
        )),
    })
}

async fn train(
    Query(q): Query<FormatQuery>,
    Body(cfg): Body<ExperimentConfig>,
) -> Result<Response, AppError> {
    let records = blocking(move || harness::run_experiment(&cfg)).await?;
    Ok(match q.format {
        Format::Json => Json(TrainResponse { records }).into_response(),
        Format::Csv => csv(harness::metrics_csv(&records)),
    })
}

async fn sweep(
    Query(q): Query<FormatQuery>,
    Body(cfg): Body<SweepConfig>,
) -> Result<Response, AppError> {
    let rows = blocking(move || harness::run_sweep(&cfg)).await?;
    Ok(match q.format {
        Format::Json => Json(SweepResponse { rows }).into_response(),
        Format::Csv => csv(harness::sweep_csv(&rows)),
    })
}

/// Serves the router on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router())
        .with_graceful_shutdown(shutdown)
        .await
}
