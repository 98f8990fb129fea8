//! Typed client for the capgen HTTP/JSON service.

use std::time::Duration;

use capgen_core::api::{
    ApiError, CaptionRequest, CaptionResponse, EvaluateRequest, EvaluateResponse, GenerateRequest, GenerateResponse,
    Health, JobAccepted, JobProgress, JobState, JobStatus, ParamsRequest, ParamsResponse, PrepRequest, PrepResponse,
    ReportRequest, ReportResponse, TrainRequest, TrainResponse,
};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request to {url} failed: {source}")]
    Http {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("server returned {status}: {error}")]
    Api { status: StatusCode, error: ApiError },
    #[error("could not decode response from {url}: {source}")]
    Decode {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("training job {job_id} failed: {error}")]
    JobFailed { job_id: u64, error: ApiError },
}

pub type Result<T> = std::result::Result<T, ClientError>;

const POLL_INTERVAL: Duration = Duration::from_millis(200);

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn finish<T: DeserializeOwned>(url: String, response: reqwest::Response) -> Result<T> {
        let status = response.status();
        if status.is_success() {
            return response
                .json()
                .await
                .map_err(|source| ClientError::Decode { url, source });
        }
        let error = response
            .json::<ApiError>()
            .await
            .map_err(|source| ClientError::Decode { url, source })?;
        Err(ClientError::Api { status, error })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let response = self.http.get(&url).send().await.map_err(|source| ClientError::Http {
            url: url.clone(),
            source,
        })?;
        Self::finish(url, response).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let response = self
            .http
            .post(&url)
            .json(body)
            .send()
            .await
            .map_err(|source| ClientError::Http {
                url: url.clone(),
                source,
            })?;
        Self::finish(url, response).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/v1/health").await
    }

    pub async fn params(&self, req: &ParamsRequest) -> Result<ParamsResponse> {
        self.post("/v1/params", req).await
    }

    pub async fn prep(&self, req: &PrepRequest) -> Result<PrepResponse> {
        self.post("/v1/prep", req).await
    }

    /// Starts a training job and returns its id.
    pub async fn train(&self, req: &TrainRequest) -> Result<u64> {
        let accepted: JobAccepted = self.post("/v1/train", req).await?;
        Ok(accepted.job_id)
    }

    pub async fn job(&self, job_id: u64) -> Result<JobStatus> {
        self.get(&format!("/v1/jobs/{job_id}")).await
    }

    /// Polls a job until it finishes, passing each new progress entry to `on_progress`.
    pub async fn wait_job(&self, job_id: u64, mut on_progress: impl FnMut(&JobProgress)) -> Result<TrainResponse> {
        let mut seen = 0;
        loop {
            let status = self.job(job_id).await?;
            for entry in status.progress.iter().skip(seen) {
                on_progress(entry);
            }
            seen = seen.max(status.progress.len());
            match status.state {
                JobState::Running => tokio::time::sleep(POLL_INTERVAL).await,
                JobState::Succeeded => {
                    if let Some(result) = status.result {
                        return Ok(result);
                    }
                    return Err(ClientError::JobFailed {
                        job_id,
                        error: ApiError {
                            kind: capgen_core::api::ErrorKind::Internal,
                            error: "job succeeded without a result".into(),
                        },
                    });
                }
                JobState::Failed => {
                    let error = status.error.unwrap_or(ApiError {
                        kind: capgen_core::api::ErrorKind::Internal,
                        error: "job failed without an error".into(),
                    });
                    return Err(ClientError::JobFailed { job_id, error });
                }
            }
        }
    }

    pub async fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse> {
        self.post("/v1/generate", req).await
    }

    pub async fn evaluate(&self, req: &EvaluateRequest) -> Result<EvaluateResponse> {
        self.post("/v1/evaluate", req).await
    }

    pub async fn report(&self, req: &ReportRequest) -> Result<ReportResponse> {
        self.post("/v1/report", req).await
    }

    pub async fn caption(&self, req: &CaptionRequest) -> Result<CaptionResponse> {
        self.post("/v1/caption", req).await
    }
}
