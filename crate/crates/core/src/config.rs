//! Engine configuration: one TOML file, with provider URLs and the run
//! budget overridable from the environment.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bm25::Bm25Params;
use crate::chunking::ChunkingConfig;
use crate::doc_router::RouterConfig;
use crate::error::Error;
use crate::generation::GenerationConfig;
use crate::page_retriever::{FusionConfig, WindowConfig};
use crate::par::Execution;
use crate::providers::{HttpSettings, RetryPolicy};
use crate::synth_qa::SynthConfig;
use crate::text_prep::{
    IdentityLemmatizer, Lemmatizer, LookupLemmatizer, NormalizerConfig, NormalizerSettings,
    TextPrep,
};

pub const ENV_EMBED_URL: &str = "ENGINE_EMBED_URL";
pub const ENV_RERANK_URL: &str = "ENGINE_RERANK_URL";
pub const ENV_GEN_URL: &str = "ENGINE_GEN_URL";
pub const ENV_BUDGET_SECS: &str = "ENGINE_BUDGET_SECS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Deterministic in-process stand-ins; no network.
    #[default]
    Builtin,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub embed_url: Option<String>,
    pub rerank_url: Option<String>,
    pub generate_url: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub backoff_secs: f64,
    /// Maximum in-flight requests per provider.
    pub concurrency: usize,
    /// Vector size of the builtin embedder.
    pub builtin_dim: usize,
    /// Persist embeddings in the index directory and reuse them.
    pub cache: bool,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Builtin,
            embed_url: None,
            rerank_url: None,
            generate_url: None,
            timeout_secs: 60.0,
            max_retries: 3,
            backoff_secs: 1.0,
            concurrency: 4,
            builtin_dim: 256,
            cache: true,
        }
    }
}

impl ProviderConfig {
    pub fn http_settings(&self) -> HttpSettings {
        HttpSettings {
            timeout: Duration::from_secs_f64(self.timeout_secs),
            retry: RetryPolicy {
                max_retries: self.max_retries,
                base_backoff: Duration::from_secs_f64(self.backoff_secs),
            },
            max_in_flight: self.concurrency,
        }
    }

    fn validate(&self) -> Result<(), Error> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(Error::Config(
                "providers.timeout_secs must be positive".into(),
            ));
        }
        if !(self.backoff_secs.is_finite() && self.backoff_secs >= 0.0) {
            return Err(Error::Config("providers.backoff_secs must be >= 0".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config(
                "providers.concurrency must be positive".into(),
            ));
        }
        if self.builtin_dim < 8 {
            return Err(Error::Config(
                "providers.builtin_dim must be at least 8".into(),
            ));
        }
        if self.kind == ProviderKind::Http {
            for (name, url) in [
                ("embed_url", &self.embed_url),
                ("rerank_url", &self.rerank_url),
                ("generate_url", &self.generate_url),
            ] {
                if url.as_deref().is_none_or(str::is_empty) {
                    return Err(Error::Config(format!(
                        "providers.{name} is required for http providers"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub corpus: PathBuf,
    pub index_dir: PathBuf,
    /// Wall-clock budget for a run, in seconds.
    pub budget_secs: Option<f64>,
    pub execution: Execution,
    pub providers: ProviderConfig,
    pub normalizer: NormalizerSettings,
    pub bm25: Bm25Params,
    pub chunking: ChunkingConfig,
    pub window: WindowConfig,
    pub router: RouterConfig,
    pub fusion: FusionConfig,
    pub generation: GenerationConfig,
    pub synth: SynthConfig,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("corpus.jsonl"),
            index_dir: PathBuf::from("index"),
            budget_secs: None,
            execution: Execution::default(),
            providers: ProviderConfig::default(),
            normalizer: NormalizerSettings::default(),
            bm25: Bm25Params::default(),
            chunking: ChunkingConfig::default(),
            window: WindowConfig::default(),
            router: RouterConfig::default(),
            fusion: FusionConfig::default(),
            generation: GenerationConfig::default(),
            synth: SynthConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl EngineConfig {
    /// Reads a TOML config, applies environment overrides and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut cfg = Self::from_toml(&text, base)?;
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str, base_dir: PathBuf) -> Result<Self, Error> {
        let mut cfg: EngineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir;
        Ok(cfg)
    }

    /// Overrides from `ENGINE_*` variables. Setting any provider URL does
    /// not switch the provider kind; that stays a config decision.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), Error> {
        if let Some(v) = lookup(ENV_EMBED_URL) {
            self.providers.embed_url = Some(v);
        }
        if let Some(v) = lookup(ENV_RERANK_URL) {
            self.providers.rerank_url = Some(v);
        }
        if let Some(v) = lookup(ENV_GEN_URL) {
            self.providers.generate_url = Some(v);
        }
        if let Some(v) = lookup(ENV_BUDGET_SECS) {
            let secs = v.trim().parse::<f64>().map_err(|_| {
                Error::Config(format!("{ENV_BUDGET_SECS} must be a number, got {v:?}"))
            })?;
            self.budget_secs = Some(secs);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        if let Some(b) = self.budget_secs {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::Config(format!("budget_secs must be >= 0, got {b}")));
            }
        }
        self.providers.validate()?;
        self.bm25
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.chunking.validate()?;
        self.window.validate()?;
        self.router.validate()?;
        self.fusion.validate()?;
        self.generation.validate()?;
        self.synth.validate()?;
        NormalizerConfig::from_settings(&self.normalizer, &self.base_dir)?;
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.corpus)
    }

    pub fn index_path(&self) -> PathBuf {
        self.resolve(&self.index_dir)
    }

    pub fn text_prep(&self) -> Result<TextPrep, Error> {
        let config = NormalizerConfig::from_settings(&self.normalizer, &self.base_dir)?;
        let lemmatizer: Arc<dyn Lemmatizer> = match &self.normalizer.lemma_file {
            Some(f) => Arc::new(LookupLemmatizer::from_tsv(self.base_dir.join(f))?),
            None => Arc::new(IdentityLemmatizer),
        };
        Ok(TextPrep::new(config, lemmatizer))
    }
}
