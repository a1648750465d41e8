use async_trait::async_trait;

use super::{EmbedError, EmbeddingProvider, EmbeddingVector};

pub const DEFAULT_HASH_SEED: u64 = 0x5eed_1eaf;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET ^ seed, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Hashed bag-of-words: each token adds one count to bucket `fnv1a(token) % dim`,
/// and the count vector is L2-normalized. Pure function of the input string.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        Self::with_seed(dim, DEFAULT_HASH_SEED)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::Config("dim must be positive".into()));
        }
        Ok(HashEmbedder { dim, seed })
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0f64; self.dim];
        for tok in tokenize(text) {
            let bucket = (fnv1a(self.seed, tok.as_bytes()) % self.dim as u64) as usize;
            counts[bucket] += 1.0;
        }
        EmbeddingVector::new(counts).normalized()
    }
}

#[async_trait]
impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> &'static str {
        "hash"
    }

    async fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::cosine_similarity;
    use proptest::prelude::*;

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64 test vectors (seed 0 leaves the offset basis untouched)
        assert_eq!(fnv1a(0, b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(0, b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(0, b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn tokens() {
        let t: Vec<_> = tokenize("Leaf-Rust, 2x spots!").collect();
        assert_eq!(t, vec!["leaf", "rust", "2x", "spots"]);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let e = HashEmbedder::new(16).unwrap();
        assert_eq!(e.embed_one(""), EmbeddingVector::zeros(16));
        assert_eq!(e.embed_one(" ,.; "), EmbeddingVector::zeros(16));
    }

    #[test]
    fn norm_matches_independent_count() {
        // "rust rust leaf": counts are 2 and 1 in distinct buckets (or 3 in one)
        let e = HashEmbedder::new(384).unwrap();
        let v = e.embed_one("rust rust leaf");
        let nz: Vec<f64> = v.values().iter().copied().filter(|x| *x != 0.0).collect();
        if nz.len() == 2 {
            let mut s = nz.clone();
            s.sort_by(f64::total_cmp);
            assert!((s[0] - 1.0 / 5f64.sqrt()).abs() < 1e-12);
            assert!((s[1] - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        } else {
            assert_eq!(nz, vec![1.0]);
        }
    }

    #[test]
    fn case_and_punctuation_insensitive() {
        let e = HashEmbedder::new(64).unwrap();
        assert_eq!(e.embed_one("Coffee RUST."), e.embed_one("coffee rust"));
    }

    #[test]
    fn similar_texts_score_higher() {
        let e = HashEmbedder::new(384).unwrap();
        let q = e.embed_one("coffee leaf rust orange pustules");
        let near = e.embed_one("rust causes orange pustules on the coffee leaf underside");
        let far = e.embed_one("leaf miner larvae dig tunnels");
        assert!(cosine_similarity(&q, &near).unwrap() > cosine_similarity(&q, &far).unwrap());
    }

    #[tokio::test]
    async fn batch_order_preserved() {
        let e = HashEmbedder::new(32).unwrap();
        let texts = vec!["a".to_string(), "b".into(), "".into()];
        let out = e.embed_texts(&texts).await.unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[1], e.embed_one("b"));
        assert!(e.embed_texts(&[]).await.unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn unit_norm_or_zero(text in "\\PC{0,80}", dim in 1usize..512) {
            let e = HashEmbedder::new(dim).unwrap();
            let v = e.embed_one(&text);
            prop_assert_eq!(v.dim(), dim);
            let n = v.norm();
            if tokenize(&text).next().is_some() {
                prop_assert!((n - 1.0).abs() < 1e-6);
            } else {
                prop_assert_eq!(n, 0.0);
            }
            prop_assert_eq!(v, e.embed_one(&text));
        }
    }
}
