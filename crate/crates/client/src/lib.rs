//! Thin async client for `htd-service`.
//!
//! ```no_run
//! # async fn demo() -> Result<(), htd_client::ClientError> {
//! use htd_core::schedule::ScheduleSpec;
//!
//! let client = htd_client::Client::new("http://127.0.0.1:8080")?;
//! let htd = ScheduleSpec::htd(-6.0, 3.0, 0.0, 0.1, 200).unwrap();
//! let csv = client.curve_csv(&htd, 200).await?;
//! # Ok(()) }
//! ```

use htd_core::analysis::{ProximityReport, RatioQuery};
use htd_core::api::{
    CurveRequest, DiffRequest, ErrorBody, EvaluateRequest, GeometryRequest, GeometryResponse,
    RateResponse, RatioResponse, SweepResponse, TrainResponse,
};
use htd_core::harness::{ExperimentConfig, MetricsRecord, SweepConfig, SweepRow};
use htd_core::schedule::{LearningRateCurve, ScheduleSpec};
use reqwest::{StatusCode, Url};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid server url `{0}`")]
    Url(String),

    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),

    /// The server answered with an error status.
    #[error("server returned {status}: {message}")]
    Server { status: StatusCode, message: String },
}

impl ClientError {
    /// True when the server rejected the request contents (4xx).
    pub fn is_rejected(&self) -> bool {
        matches!(self, ClientError::Server { status, .. } if status.is_client_error())
    }
}

pub type Result<T, E = ClientError> = std::result::Result<T, E>;

#[derive(Debug, Clone)]
pub struct Client {
    base: Url,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: &str) -> Result<Self> {
        let mut base = Url::parse(base_url).map_err(|_| ClientError::Url(base_url.to_string()))?;
        if base.cannot_be_a_base() {
            return Err(ClientError::Url(base_url.to_string()));
        }
        if !base.path().ends_with('/') {
            let path = format!("{}/", base.path());
            base.set_path(&path);
        }
        Ok(Self {
            base,
            http: reqwest::Client::new(),
        })
    }

    fn url(&self, path: &str) -> Result<Url> {
        self.base
            .join(path)
            .map_err(|_| ClientError::Url(format!("{}{path}", self.base)))
    }

    async fn send(&self, path: &str, body: &impl Serialize) -> Result<reqwest::Response> {
        let response = self.http.post(self.url(path)?).json(body).send().await?;
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let text = response.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text)
            .map(|b| b.error)
            .unwrap_or(text);
        Err(ClientError::Server { status, message })
    }

    async fn post_json<T: DeserializeOwned>(&self, path: &str, body: &impl Serialize) -> Result<T> {
        Ok(self.send(path, body).await?.json().await?)
    }

    async fn post_csv(&self, path: &str, body: &impl Serialize) -> Result<String> {
        Ok(self
            .send(&format!("{path}?format=csv"), body)
            .await?
            .text()
            .await?)
    }

    pub async fn health(&self) -> Result<bool> {
        let response = self.http.get(self.url("health")?).send().await?;
        Ok(response.status().is_success())
    }

    pub async fn evaluate(&self, schedule: &ScheduleSpec, t: u32, horizon: u32) -> Result<f64> {
        let body = EvaluateRequest {
            schedule: schedule.clone(),
            t,
            horizon,
        };
        let r: RateResponse = self.post_json("v1/evaluate", &body).await?;
        Ok(r.lr)
    }

    pub async fn final_rate(&self, schedule: &ScheduleSpec, horizon: u32) -> Result<f64> {
        let body = CurveRequest {
            schedule: schedule.clone(),
            horizon,
        };
        let r: RateResponse = self.post_json("v1/final-rate", &body).await?;
        Ok(r.lr)
    }

    pub async fn curve(&self, schedule: &ScheduleSpec, horizon: u32) -> Result<LearningRateCurve> {
        let body = CurveRequest {
            schedule: schedule.clone(),
            horizon,
        };
        self.post_json("v1/curve", &body).await
    }

    pub async fn curve_csv(&self, schedule: &ScheduleSpec, horizon: u32) -> Result<String> {
        let body = CurveRequest {
            schedule: schedule.clone(),
            horizon,
        };
        self.post_csv("v1/curve", &body).await
    }

    pub async fn ratio(&self, x: f64, delta: f64) -> Result<RatioResponse> {
        self.post_json("v1/ratio", &RatioQuery { x, delta }).await
    }

    pub async fn geometry(&self, lower: f64, upper: f64) -> Result<GeometryResponse> {
        self.post_json("v1/geometry", &GeometryRequest { lower, upper })
            .await
    }

    fn diff_body(a: &ScheduleSpec, b: &ScheduleSpec, grid_points: usize) -> DiffRequest {
        DiffRequest {
            a: a.clone(),
            b: b.clone(),
            grid_points,
        }
    }

    pub async fn diff(
        &self,
        a: &ScheduleSpec,
        b: &ScheduleSpec,
        grid_points: usize,
    ) -> Result<ProximityReport> {
        self.post_json("v1/diff", &Self::diff_body(a, b, grid_points))
            .await
    }

    pub async fn diff_csv(
        &self,
        a: &ScheduleSpec,
        b: &ScheduleSpec,
        grid_points: usize,
    ) -> Result<String> {
        self.post_csv("v1/diff", &Self::diff_body(a, b, grid_points))
            .await
    }

    pub async fn train(&self, cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
        let r: TrainResponse = self.post_json("v1/train", cfg).await?;
        Ok(r.records)
    }

    pub async fn train_csv(&self, cfg: &ExperimentConfig) -> Result<String> {
        self.post_csv("v1/train", cfg).await
    }

    pub async fn sweep(&self, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
        let r: SweepResponse = self.post_json("v1/sweep", cfg).await?;
        Ok(r.rows)
    }

    pub async fn sweep_csv(&self, cfg: &SweepConfig) -> Result<String> {
        self.post_csv("v1/sweep", cfg).await
    }
}
