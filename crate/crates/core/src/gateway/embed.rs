use std::fmt;

use serde_json::{json, Value};

use super::chat::post_with_retries;
use super::{ClientConfig, Embedder, GatewayError, InflightLimiter};
use crate::text::tokens;

/// Deterministic offline embedder: every normalized token hashes to a
/// pseudo-random direction, a text is the normalized sum over its token
/// multiset. Texts sharing most tokens land close together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: 16, seed: 0 }
    }
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl HashEmbedder {
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let mut toks = tokens(text);
        toks.sort_unstable();
        for token in toks {
            let mut state = fnv1a(token.as_bytes(), self.seed);
            for x in v.iter_mut() {
                let bits = splitmix(&mut state) >> 11;
                *x += (bits as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn model_id(&self) -> String {
        format!("hash-embedder-{}d-seed{}", self.dim, self.seed)
    }
}

/// Client for embedding endpoints speaking `{"model", "input": [...]}` and
/// answering `{"data": [{"embedding": [...]}, ...]}`.
pub struct HttpEmbedder {
    config: ClientConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    limiter: InflightLimiter,
}

impl fmt::Debug for HttpEmbedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpEmbedder")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl HttpEmbedder {
    pub fn new(config: ClientConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let api_key = config.resolve_key()?;
        Ok(Self {
            agent: config.agent(),
            limiter: InflightLimiter::new(config.max_in_flight),
            api_key,
            config,
        })
    }
}

fn decode_embeddings(text: &str, expected: usize) -> Result<Vec<Vec<f64>>, GatewayError> {
    let value: Value = serde_json::from_str(text).map_err(|e| GatewayError::Decode(e.to_string()))?;
    let data = value["data"]
        .as_array()
        .ok_or_else(|| GatewayError::Decode("missing data array".into()))?;
    if data.len() != expected {
        return Err(GatewayError::Decode(format!(
            "expected {expected} embeddings, got {}",
            data.len()
        )));
    }
    data.iter()
        .map(|item| {
            item["embedding"]
                .as_array()
                .ok_or_else(|| GatewayError::Decode("missing embedding".into()))?
                .iter()
                .map(|x| {
                    x.as_f64()
                        .ok_or_else(|| GatewayError::Decode("non-numeric embedding value".into()))
                })
                .collect()
        })
        .collect()
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let body = json!({"model": self.config.model, "input": texts});
        let (vectors, _) = post_with_retries(
            &self.agent,
            &self.config,
            self.api_key.as_deref(),
            &self.limiter,
            &body,
            |text| decode_embeddings(text, texts.len()),
        )?;
        Ok(vectors)
    }

    fn model_id(&self) -> String {
        self.config.model.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_embeddings_are_deterministic_and_unit_length() {
        let e = HashEmbedder::default();
        let a = e.embed_one("Seoul has 9.41 million people");
        assert_eq!(a, e.embed_one("Seoul has 9.41 million people"));
        assert_eq!(a.len(), 16);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        // token multiset, not order
        assert_eq!(a, e.embed_one("people million 9.41 has Seoul"));
        assert!(e.embed_one("").iter().all(|x| *x == 0.0));
    }

    #[test]
    fn decodes_embedding_payload() {
        let body = r#"{"data":[{"embedding":[1.0,2.0]},{"embedding":[3,4]}]}"#;
        assert_eq!(
            decode_embeddings(body, 2).unwrap(),
            vec![vec![1.0, 2.0], vec![3.0, 4.0]]
        );
        assert!(decode_embeddings(body, 3).is_err());
        assert!(decode_embeddings("{}", 1).is_err());
    }
}
