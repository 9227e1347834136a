use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{load_encoder, Encoder, EncoderSpec};
use crate::distribution::{softmax, LabelDistribution};
use crate::error::{Error, Result};
use crate::hierarchy::{Level, SenseHierarchy};
use crate::prediction::Prediction;

pub const DEFAULT_DROPOUT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub encoder: EncoderSpec,
    /// Defaults to the encoder width.
    #[serde(default)]
    pub trunk_width: Option<usize>,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    /// Seeds parameter initialization and dropout masks. Overridden per run
    /// by the training seed.
    #[serde(default)]
    pub seed: u64,
}

fn default_dropout() -> f64 {
    DEFAULT_DROPOUT
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderSpec::default(),
            trunk_width: None,
            dropout: DEFAULT_DROPOUT,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.trunk_width == Some(0) {
            return Err(Error::Config("trunk_width must be positive".into()));
        }
        Ok(())
    }
}

/// Dense layer `y = W x + b` with `W` stored row-major, one row per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Linear {
        let bound = 1.0 / (inputs as f64).sqrt();
        Linear {
            inputs,
            outputs,
            weight: (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect(),
            bias: (0..outputs).map(|_| rng.gen_range(-bound..bound)).collect(),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Linear {
        Linear {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.weight.len() != self.inputs * self.outputs || self.bias.len() != self.outputs {
            return Err(Error::Shape(format!("{name} layer has inconsistent parameter sizes")));
        }
        Ok(())
    }
}

/// Trunk and head parameters. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub trunk: Linear,
    pub heads: [Linear; 3],
}

impl Parameters {
    pub fn zeros_like(&self) -> Parameters {
        Parameters {
            trunk: Linear::zeros(self.trunk.inputs, self.trunk.outputs),
            heads: self.heads.each_ref().map(|h| Linear::zeros(h.inputs, h.outputs)),
        }
    }

    pub fn tensors(&self) -> [&Vec<f64>; 8] {
        let [h1, h2, h3] = &self.heads;
        [
            &self.trunk.weight,
            &self.trunk.bias,
            &h1.weight,
            &h1.bias,
            &h2.weight,
            &h2.bias,
            &h3.weight,
            &h3.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        let [h1, h2, h3] = &mut self.heads;
        [
            &mut self.trunk.weight,
            &mut self.trunk.bias,
            &mut h1.weight,
            &mut h1.bias,
            &mut h2.weight,
            &mut h2.bias,
            &mut h3.weight,
            &mut h3.bias,
        ]
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Raw per-level scores for a batch, one row per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs {
    pub scores: [Vec<Vec<f64>>; 3],
}

impl HeadOutputs {
    pub fn rows(&self) -> usize {
        self.scores[0].len()
    }

    pub fn level(&self, level: Level) -> &[Vec<f64>] {
        &self.scores[level.slot()]
    }

    /// Softmax distributions of row `row` at every level.
    pub fn distributions(&self, row: usize) -> Result<[LabelDistribution; 3]> {
        let mut out = Vec::with_capacity(3);
        for level in Level::ALL {
            out.push(to_distribution(level, &self.scores[level.slot()][row])?);
        }
        Ok(out.try_into().expect("three levels"))
    }
}

/// Softmax of one score vector.
pub fn to_distribution(level: Level, scores: &[f64]) -> Result<LabelDistribution> {
    Ok(LabelDistribution {
        level,
        values: softmax(scores)?,
    })
}

/// The single label selected from a distribution: highest probability,
/// lowest index on ties.
pub fn pool_single_label(dist: &LabelDistribution) -> usize {
    dist.majority()
}

/// Intermediate values kept from a training-mode forward pass.
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    /// Trunk output after dropout.
    hidden: Vec<Vec<f64>>,
    /// Per-unit dropout multiplier, `0` or `1 / (1 - rate)`.
    masks: Vec<Vec<f64>>,
}

/// Encoder, linear trunk with dropout, and three linear heads.
pub struct MultiTaskModel {
    config: ModelConfig,
    sizes: [usize; 3],
    params: Parameters,
    encoder: Box<dyn Encoder>,
}

impl std::fmt::Debug for MultiTaskModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiTaskModel")
            .field("config", &self.config)
            .field("sizes", &self.sizes)
            .field("parameters", &self.params.count())
            .finish()
    }
}

impl MultiTaskModel {
    pub fn new(config: ModelConfig, hierarchy: &SenseHierarchy) -> Result<MultiTaskModel> {
        config.validate()?;
        let encoder = load_encoder(&config.encoder)?;
        let width = encoder.width();
        let trunk_width = config.trunk_width.unwrap_or(width);
        let sizes = hierarchy.sizes();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let trunk = Linear::init(width, trunk_width, &mut rng);
        let heads = sizes.map(|n| Linear::init(trunk_width, n, &mut rng));
        Self::from_parts(config, hierarchy, Parameters { trunk, heads })
    }

    /// Assembles a model from existing parameters, checking every layer
    /// against the encoder width and the hierarchy's label spaces.
    pub fn from_parts(config: ModelConfig, hierarchy: &SenseHierarchy, params: Parameters) -> Result<MultiTaskModel> {
        config.validate()?;
        let encoder = load_encoder(&config.encoder)?;
        let sizes = hierarchy.sizes();
        params.trunk.check("trunk")?;
        if params.trunk.inputs != encoder.width() {
            return Err(Error::Shape(format!(
                "trunk expects {} inputs, encoder produces {}",
                params.trunk.inputs,
                encoder.width()
            )));
        }
        if let Some(w) = config.trunk_width {
            if w != params.trunk.outputs {
                return Err(Error::Shape(format!("trunk width {} != configured {w}", params.trunk.outputs)));
            }
        }
        for (level, (head, n)) in Level::ALL.iter().zip(params.heads.iter().zip(sizes)) {
            head.check(&format!("{level} head"))?;
            if head.outputs != n || head.inputs != params.trunk.outputs {
                return Err(Error::Shape(format!(
                    "{level} head is {}x{}, expected {n}x{}",
                    head.outputs, head.inputs, params.trunk.outputs
                )));
            }
        }
        Ok(MultiTaskModel {
            config,
            sizes,
            params,
            encoder,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn sizes(&self) -> [usize; 3] {
        self.sizes
    }

    pub fn parameters(&self) -> &Parameters {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    pub fn encoder_width(&self) -> usize {
        self.encoder.width()
    }

    pub fn encode(&self, arg1: &str, arg2: &str) -> Result<Vec<f64>> {
        self.encoder.encode(arg1, arg2)
    }

    fn check_inputs(&self, embeddings: &[Vec<f64>]) -> Result<()> {
        if embeddings.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        if let Some(e) = embeddings.iter().find(|e| e.len() != self.params.trunk.inputs) {
            return Err(Error::Shape(format!(
                "embedding of width {}, expected {}",
                e.len(),
                self.params.trunk.inputs
            )));
        }
        Ok(())
    }

    fn heads(&self, hidden: &[Vec<f64>]) -> Result<HeadOutputs> {
        let scores = self
            .params
            .heads
            .each_ref()
            .map(|head| hidden.iter().map(|h| head.forward(h)).collect::<Vec<_>>());
        if scores.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite head score".into()));
        }
        Ok(HeadOutputs { scores })
    }

    /// Evaluation-mode forward pass; dropout is inactive.
    pub fn forward(&self, embeddings: &[Vec<f64>]) -> Result<HeadOutputs> {
        self.check_inputs(embeddings)?;
        let hidden: Vec<Vec<f64>> = embeddings.iter().map(|e| self.params.trunk.forward(e)).collect();
        self.heads(&hidden)
    }

    /// Training-mode forward pass with inverted dropout on the trunk output.
    pub fn forward_train(&self, embeddings: &[Vec<f64>], rng: &mut impl Rng) -> Result<(HeadOutputs, ForwardCache)> {
        self.check_inputs(embeddings)?;
        let rate = self.config.dropout;
        let keep = 1.0 / (1.0 - rate);
        let mut hidden = Vec::with_capacity(embeddings.len());
        let mut masks = Vec::with_capacity(embeddings.len());
        for e in embeddings {
            let z = self.params.trunk.forward(e);
            let mask: Vec<f64> = z
                .iter()
                .map(|_| if rate > 0.0 && rng.gen::<f64>() < rate { 0.0 } else { keep })
                .collect();
            hidden.push(z.iter().zip(&mask).map(|(v, m)| v * m).collect());
            masks.push(mask);
        }
        let outputs = self.heads(&hidden)?;
        Ok((
            outputs,
            ForwardCache {
                inputs: embeddings.to_vec(),
                hidden,
                masks,
            },
        ))
    }

    /// Parameter gradients given the gradient of the loss with respect to
    /// each head's scores.
    pub fn backward(&self, cache: &ForwardCache, score_grads: &[Vec<Vec<f64>>; 3]) -> Parameters {
        let mut grads = self.params.zeros_like();
        let width = self.params.trunk.outputs;
        for (row, (x, h)) in cache.inputs.iter().zip(&cache.hidden).enumerate() {
            let mut dh = vec![0.0; width];
            for (slot, head) in self.params.heads.iter().enumerate() {
                let g = &score_grads[slot][row];
                let gh = &mut grads.heads[slot];
                for (o, &go) in g.iter().enumerate() {
                    gh.bias[o] += go;
                    let wrow = &head.weight[o * width..(o + 1) * width];
                    let grow = &mut gh.weight[o * width..(o + 1) * width];
                    for j in 0..width {
                        grow[j] += go * h[j];
                        dh[j] += go * wrow[j];
                    }
                }
            }
            let inputs = self.params.trunk.inputs;
            for (j, (d, m)) in dh.iter().zip(&cache.masks[row]).enumerate() {
                let dz = d * m;
                if dz == 0.0 {
                    continue;
                }
                grads.trunk.bias[j] += dz;
                for (gw, xi) in grads.trunk.weight[j * inputs..(j + 1) * inputs].iter_mut().zip(x) {
                    *gw += dz * xi;
                }
            }
        }
        grads
    }

    /// Evaluation-mode predictions for `(id, embedding)` pairs.
    pub fn predict_embeddings(&self, ids: &[String], embeddings: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        if ids.len() != embeddings.len() {
            return Err(Error::Shape(format!("{} ids for {} embeddings", ids.len(), embeddings.len())));
        }
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let outputs = self.forward(embeddings)?;
        ids.iter()
            .enumerate()
            .map(|(row, id)| Ok(Prediction::from_distributions(id.clone(), outputs.distributions(row)?)))
            .collect()
    }

    /// Encodes and predicts `(id, arg1, arg2)` triples.
    pub fn predict<'a>(&self, items: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> Result<Vec<Prediction>> {
        let mut ids = Vec::new();
        let mut embeddings = Vec::new();
        for (id, a1, a2) in items {
            ids.push(id.to_string());
            embeddings.push(self.encode(a1, a2)?);
        }
        self.predict_embeddings(&ids, &embeddings)
    }
}
