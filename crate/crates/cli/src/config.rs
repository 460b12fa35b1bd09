//! Optional configuration file. Command-line flags override it; anything it
//! leaves out keeps the built-in default.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ifl_core::critic::TrainConfig;
use ifl_core::feedback::BandThresholds;
use ifl_core::gateway::{ClientConfig, DecodeParams, Embedder, HashEmbedder, HttpEmbedder};
use ifl_core::ifl::IflConfig;
use ifl_core::metrics::MauveConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub generator: GeneratorConfig,
    pub embedder: EmbedderConfig,
    pub decode: DecodeParams,
    pub ifl: IflConfig,
    pub train: TrainConfig,
    pub thresholds: BandThresholds,
    pub mauve: MauveConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorConfig {
    /// Chat-completion endpoint.
    Chat(ClientConfig),
    /// Scripted mock that repairs answers in response to feedback.
    #[default]
    MockFeedback,
    /// Scripted mock that returns reference answers unchanged.
    MockEcho,
    /// Mock driven by a script file.
    MockScript { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbedderConfig {
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Http(ClientConfig),
}

fn default_dim() -> usize {
    16
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hash { dim: 16, seed: 0 }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<Box<dyn Embedder>> {
        Ok(match self {
            EmbedderConfig::Hash { dim, seed } => Box::new(HashEmbedder { dim: *dim, seed: *seed }),
            EmbedderConfig::Http(c) => Box::new(HttpEmbedder::new(c.clone()).context("embedding client")?),
        })
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .with_context(|| format!("schema violation in config file {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("schema violation in config file {}", path.display()))?
        };
        config
            .thresholds
            .validate()
            .with_context(|| format!("invalid thresholds in {}", path.display()))?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections_parse() {
        let c: FileConfig = toml::from_str(
            r#"
            seed = 7
            [generator]
            kind = "chat"
            endpoint = "http://localhost:8000/v1/chat/completions"
            model = "local"
            api_key_env = "KEY"
            [ifl]
            max_iterations = 3
            [thresholds.citation]
            avg_positive = 1.0
            avg_negative = -1.0
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert!(matches!(c.generator, GeneratorConfig::Chat(ref cc) if cc.model == "local"));
        assert_eq!(c.ifl.max_iterations, 3);
        assert_eq!(c.ifl.parallelism, IflConfig::default().parallelism);
        assert_eq!(c.thresholds.citation.avg_positive, 1.0);
        assert_eq!(c.thresholds.fluency, BandThresholds::default().fluency);
    }

    #[test]
    fn book_example_parses() {
        let chapter = include_str!("../../../book/src/cli.md");
        let block = chapter.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
        let c: FileConfig = toml::from_str(block).unwrap();
        assert_eq!(c.seed, Some(7));
        assert!(matches!(c.generator, GeneratorConfig::Chat(ref cc) if cc.retry.max_retries == 3));
        assert_eq!(c.train.epochs, 200);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}
