use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_TOKENS: usize = 256;
pub const MIN_MAX_TOKENS: usize = 16;
pub const DEFAULT_ENCODER: &str = "tiny-hash-64";

/// Number of special tokens in the `<s> A </s></s> B </s>` pair layout.
const PAIR_SPECIALS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    FirstToken,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    #[serde(default = "default_model_id")]
    pub model_id: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    #[serde(default = "default_pooling")]
    pub pooling: Pooling,
}

fn default_model_id() -> String {
    DEFAULT_ENCODER.into()
}
fn default_max_tokens() -> usize {
    DEFAULT_MAX_TOKENS
}
fn default_pooling() -> Pooling {
    Pooling::FirstToken
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec {
            model_id: default_model_id(),
            max_tokens: DEFAULT_MAX_TOKENS,
            pooling: Pooling::FirstToken,
        }
    }
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens < MIN_MAX_TOKENS {
            return Err(Error::Config(format!(
                "max_tokens must be at least {MIN_MAX_TOKENS}, got {}",
                self.max_tokens
            )));
        }
        Ok(())
    }
}

/// Maps an argument pair to a fixed-width embedding.
pub trait Encoder: Send + Sync {
    fn width(&self) -> usize;
    fn encode(&self, arg1: &str, arg2: &str) -> Result<Vec<f64>>;
}

/// Resolves an encoder by id. Only the bundled `tiny-hash-<width>` family is
/// available without network access.
pub fn load_encoder(spec: &EncoderSpec) -> Result<Box<dyn Encoder>> {
    spec.validate()?;
    let width = spec
        .model_id
        .strip_prefix("tiny-hash-")
        .and_then(|w| w.parse::<usize>().ok())
        .filter(|w| (4..=4096).contains(w))
        .ok_or_else(|| {
            Error::EncoderUnavailable(format!(
                "no provider for {:?}; available: tiny-hash-<width> (e.g. {DEFAULT_ENCODER})",
                spec.model_id
            ))
        })?;
    Ok(Box::new(HashEncoder::new(width, spec.max_tokens, spec.pooling)))
}

/// Splits into lowercase alphanumeric runs and single punctuation marks.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Truncates both arguments from their ends so that the pair fits `budget`
/// tokens, keeping their relative lengths.
pub fn truncate_pair(a: &mut Vec<String>, b: &mut Vec<String>, budget: usize) {
    let total = a.len() + b.len();
    if total <= budget {
        return;
    }
    let share = ((budget as f64) * a.len() as f64 / total as f64).round() as usize;
    let keep_a = share.max(1).min(a.len()).min(budget.saturating_sub(1).max(1));
    let keep_b = (budget - keep_a).min(b.len());
    a.truncate(keep_a);
    b.truncate(keep_b);
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A frozen contextual encoder with hashed token embeddings and one mixing
/// layer: `h_i = tanh(W x_i + U mean(x))`. Fully deterministic.
pub struct HashEncoder {
    width: usize,
    max_tokens: usize,
    pooling: Pooling,
    w: Vec<f64>,
    u: Vec<f64>,
    segments: [Vec<f64>; 2],
}

const ENCODER_SEED: u64 = 0x1d22_e5c0_de00_0001;
const CONTEXT_GAIN: f64 = 3.0;
const TOKEN_GAIN: f64 = 0.3;

impl HashEncoder {
    pub fn new(width: usize, max_tokens: usize, pooling: Pooling) -> HashEncoder {
        let mut rng = ChaCha8Rng::seed_from_u64(ENCODER_SEED ^ width as u64);
        let scale = 1.0 / (width as f64).sqrt();
        let mut matrix = |gain: f64| -> Vec<f64> {
            (0..width * width).map(|_| rng.gen_range(-1.0..1.0) * scale * gain).collect()
        };
        let w = matrix(TOKEN_GAIN);
        let u = matrix(CONTEXT_GAIN);
        let segments = [Self::vector(width, "<segment:a>", 0.5), Self::vector(width, "<segment:b>", 0.5)];
        HashEncoder {
            width,
            max_tokens,
            pooling,
            w,
            u,
            segments,
        }
    }

    fn vector(width: usize, token: &str, scale: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token) ^ ENCODER_SEED);
        let r = 3f64.sqrt() * scale;
        (0..width).map(|_| rng.gen_range(-r..r)).collect()
    }

    fn embed(&self, token: &str, segment: usize) -> Vec<f64> {
        let mut v = Self::vector(self.width, token, 1.0);
        for (x, s) in v.iter_mut().zip(&self.segments[segment]) {
            *x += s;
        }
        v
    }

    fn matvec(&self, m: &[f64], x: &[f64]) -> Vec<f64> {
        m.chunks(self.width).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

impl Encoder for HashEncoder {
    fn width(&self) -> usize {
        self.width
    }

    fn encode(&self, arg1: &str, arg2: &str) -> Result<Vec<f64>> {
        if arg1.trim().is_empty() || arg2.trim().is_empty() {
            return Err(Error::Input("both arguments must be nonempty".into()));
        }
        let mut a = tokenize(arg1);
        let mut b = tokenize(arg2);
        truncate_pair(&mut a, &mut b, self.max_tokens - PAIR_SPECIALS);

        let mut inputs = Vec::with_capacity(a.len() + b.len() + PAIR_SPECIALS);
        inputs.push(self.embed("<s>", 0));
        inputs.extend(a.iter().map(|t| self.embed(t, 0)));
        inputs.push(self.embed("</s>", 0));
        inputs.push(self.embed("</s>", 1));
        inputs.extend(b.iter().map(|t| self.embed(t, 1)));
        inputs.push(self.embed("</s>", 1));

        // Context is the mean over argument tokens; the special tokens are
        // identical for every input and would only dilute it.
        let args = &inputs[1..inputs.len() - 1];
        let argument_tokens: Vec<&Vec<f64>> = args[..a.len()].iter().chain(&args[a.len() + 2..]).collect();
        let mut context = vec![0.0; self.width];
        for x in &argument_tokens {
            for (c, v) in context.iter_mut().zip(x.iter()) {
                *c += v / argument_tokens.len() as f64;
            }
        }
        let shared = self.matvec(&self.u, &context);
        let hidden = |x: &[f64]| -> Vec<f64> {
            self.matvec(&self.w, x)
                .iter()
                .zip(&shared)
                .map(|(a, b)| (a + b).tanh())
                .collect()
        };
        Ok(match self.pooling {
            Pooling::FirstToken => hidden(&inputs[0]),
            Pooling::Mean => {
                let mut pooled = vec![0.0; self.width];
                for x in &inputs {
                    for (p, h) in pooled.iter_mut().zip(hidden(x)) {
                        *p += h / inputs.len() as f64;
                    }
                }
                pooled
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let enc = load_encoder(&EncoderSpec::default()).unwrap();
        let v = enc.encode("The sky darkened.", "It rained.").unwrap();
        assert_eq!(v.len(), 64);
        assert_eq!(v, enc.encode("The sky darkened.", "It rained.").unwrap());
        assert_ne!(v, enc.encode("It rained.", "The sky darkened.").unwrap());
    }

    #[test]
    fn long_input_is_truncated() {
        let enc = load_encoder(&EncoderSpec::default()).unwrap();
        let long = "word ".repeat(10_000);
        assert_eq!(enc.encode(&long, "short one").unwrap().len(), 64);
    }

    #[test]
    fn proportional_truncation() {
        let mut a: Vec<String> = (0..300).map(|i| i.to_string()).collect();
        let mut b: Vec<String> = (0..100).map(|i| i.to_string()).collect();
        truncate_pair(&mut a, &mut b, 252);
        assert_eq!((a.len(), b.len()), (189, 63));
        assert_eq!(a[0], "0");
        let mut a = vec!["x".to_string()];
        let mut b: Vec<String> = (0..1000).map(|i| i.to_string()).collect();
        truncate_pair(&mut a, &mut b, 12);
        assert_eq!((a.len(), b.len()), (1, 11));
    }

    #[test]
    fn errors() {
        let enc = load_encoder(&EncoderSpec::default()).unwrap();
        assert!(matches!(enc.encode("", "b"), Err(Error::Input(_))));
        let spec = EncoderSpec {
            model_id: "roberta-base".into(),
            ..EncoderSpec::default()
        };
        assert!(matches!(load_encoder(&spec), Err(Error::EncoderUnavailable(_))));
        let spec = EncoderSpec {
            max_tokens: 8,
            ..EncoderSpec::default()
        };
        assert!(matches!(load_encoder(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn tokens() {
        assert_eq!(tokenize("It rained, hard."), vec!["it", "rained", ",", "hard", "."]);
    }
}
