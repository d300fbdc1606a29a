//! Feature-hashing embedder.
//!
//! Features are the lowercased word unigrams and space-joined word bigrams of
//! a text, where a word is a maximal run of alphanumeric characters. Each
//! feature is hashed with 64-bit FNV-1a over its UTF-8 bytes; the bucket is
//! `hash % dim` and the sign is `-1` when bit 63 is set, `+1` otherwise. The
//! accumulated vector is L2-normalized. A text with no features, or whose
//! features cancel exactly, maps to the basis vector `e_0`.

use super::{EmbedError, Embedder, EmbeddingVector};

pub const MIN_HASH_DIM: usize = 8;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect()
}

fn add_feature(acc: &mut [f64], feature: &str) {
    let h = fnv1a64(feature.as_bytes());
    let bucket = (h % acc.len() as u64) as usize;
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    acc[bucket] += sign;
}

pub fn hash_embed(text: &str, dim: usize) -> Result<EmbeddingVector, EmbedError> {
    if dim < MIN_HASH_DIM {
        return Err(EmbedError::Input(format!(
            "hash embedding dimension must be at least {MIN_HASH_DIM}, got {dim}"
        )));
    }
    let mut acc = vec![0.0f64; dim];
    let words = words(text);
    for w in &words {
        add_feature(&mut acc, w);
    }
    for pair in words.windows(2) {
        add_feature(&mut acc, &format!("{} {}", pair[0], pair[1]));
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        acc[0] = 1.0;
    } else {
        acc.iter_mut().for_each(|v| *v /= norm);
    }
    EmbeddingVector::new(acc)
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim < MIN_HASH_DIM {
            return Err(EmbedError::Input(format!(
                "hash embedding dimension must be at least {MIN_HASH_DIM}, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Embedder for HashEmbedder {
    fn identity(&self) -> String {
        format!("hash:fnv1a64:uni+bi:dim={}", self.dim)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| hash_embed(t, self.dim)).collect()
    }
}
