//! JSON-over-HTTP clients. Every endpoint is a POST:
//!
//! | path               | request                                   | response                       |
//! |--------------------|-------------------------------------------|--------------------------------|
//! | `/v1/embed`        | `{"texts":[..],"contextual":bool}`        | `{"dim":n,"vectors":[[..]]}`   |
//! | `/v1/rerank`       | `{"query":..,"candidates":[{"id","text"}]}` | `{"scores":[{"id","score"}]}` |
//! | `/v1/generate`     | `{"prompt":..,"max_tokens":n,"temperature":t}` | `{"text":..}`             |
//! | `/v1/capabilities` | `{}`                                      | `{"max_batch":n,"dim":n}`      |

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    ConcurrencyLimit, Embedder, GenRequest, Generator, ProviderError, RerankCandidate,
    RerankRequest, Reranker, RetryPolicy,
};

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone)]
struct JsonClient {
    agent: ureq::Agent,
    base_url: String,
    retry: RetryPolicy,
    limit: ConcurrencyLimit,
}

impl JsonClient {
    fn new(base_url: &str, settings: &HttpSettings) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            base_url: base_url.trim_end_matches('/').to_owned(),
            retry: settings.retry,
            limit: ConcurrencyLimit::new(settings.max_in_flight),
        }
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ProviderError> {
        let url = format!("{}{}", self.base_url, path);
        self.retry.run(|| {
            let _permit = self.limit.acquire();
            let mut resp =
                self.agent
                    .post(&url)
                    .send_json(body)
                    .map_err(|e| ProviderError::Unreachable {
                        attempts: 1,
                        message: format!("{url}: {e}"),
                    })?;
            let status = resp.status().as_u16();
            if !(200..300).contains(&status) {
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(if status == 413 {
                    ProviderError::ContextOverflow(body)
                } else {
                    ProviderError::Http { status, body }
                });
            }
            resp.body_mut()
                .with_config()
                .limit(256 * 1024 * 1024)
                .read_json::<Resp>()
                .map_err(|e| ProviderError::Protocol(format!("{url}: {e}")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub max_batch: usize,
    pub dim: usize,
}

#[derive(Serialize)]
struct EmbedBody<'a> {
    texts: &'a [String],
    contextual: bool,
}

#[derive(Deserialize)]
struct EmbedReply {
    dim: usize,
    vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: JsonClient,
    caps: Capabilities,
}

impl HttpEmbedder {
    /// Connects and reads batch/dimension limits from `/v1/capabilities`.
    pub fn connect(base_url: &str, settings: &HttpSettings) -> Result<Self, ProviderError> {
        let client = JsonClient::new(base_url, settings);
        let caps: Capabilities = client.post("/v1/capabilities", &serde_json::json!({}))?;
        if caps.max_batch == 0 || caps.dim == 0 {
            return Err(ProviderError::Protocol(format!(
                "unusable capabilities {caps:?}"
            )));
        }
        Ok(Self { client, caps })
    }

    pub fn capabilities(&self) -> Capabilities {
        self.caps
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.caps.dim
    }

    fn max_batch(&self) -> usize {
        self.caps.max_batch
    }

    fn embed_raw(
        &self,
        texts: &[String],
        contextual: bool,
    ) -> Result<Vec<Vec<f32>>, ProviderError> {
        let reply: EmbedReply = self
            .client
            .post("/v1/embed", &EmbedBody { texts, contextual })?;
        if reply.dim != self.caps.dim {
            return Err(ProviderError::DimensionMismatch {
                expected: self.caps.dim,
                got: reply.dim,
            });
        }
        Ok(reply.vectors)
    }
}

#[derive(Serialize)]
struct RerankBody<'a> {
    query: &'a str,
    candidates: &'a [RerankCandidate],
}

#[derive(Deserialize)]
struct ScoreItem {
    id: String,
    score: f64,
}

#[derive(Deserialize)]
struct RerankReply {
    scores: Vec<ScoreItem>,
}

#[derive(Debug, Clone)]
pub struct HttpReranker {
    client: JsonClient,
}

impl HttpReranker {
    pub fn new(base_url: &str, settings: &HttpSettings) -> Self {
        Self {
            client: JsonClient::new(base_url, settings),
        }
    }
}

impl Reranker for HttpReranker {
    fn score_candidates(&self, req: &RerankRequest) -> Result<Vec<(String, f64)>, ProviderError> {
        let reply: RerankReply = self.client.post(
            "/v1/rerank",
            &RerankBody {
                query: &req.query,
                candidates: &req.candidates,
            },
        )?;
        Ok(reply.scores.into_iter().map(|s| (s.id, s.score)).collect())
    }
}

#[derive(Deserialize)]
struct GenerateReply {
    text: String,
}

#[derive(Debug, Clone)]
pub struct HttpGenerator {
    client: JsonClient,
}

impl HttpGenerator {
    pub fn new(base_url: &str, settings: &HttpSettings) -> Self {
        Self {
            client: JsonClient::new(base_url, settings),
        }
    }
}

impl Generator for HttpGenerator {
    fn complete(&self, req: &GenRequest) -> Result<String, ProviderError> {
        let reply: GenerateReply = self.client.post("/v1/generate", req)?;
        Ok(reply.text)
    }
}
