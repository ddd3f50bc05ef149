//! The recommender slate: popularity ranking, bias-only, matrix
//! factorization, and its neural variant.
//!
//! All learned models share the parameter container [`ModelParams`]; the
//! neural variant adds a small ReLU network over the concatenated user
//! factors, item factors, and their elementwise product. Scores are
//! user-item relevance for ranking and predicted ratings for the explicit
//! scenario.

mod train;

pub use train::{
    loss_and_grad_bpr, loss_and_grad_explicit, train, train_bpr, train_explicit, train_with,
};
pub(crate) use train::{draw_negative, positive_items};

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Hyper-parameter search space used when nothing narrower is configured.
pub const LATENT_SIZE_GRID: [usize; 5] = [4, 8, 16, 32, 50];
pub const LEARNING_RATE_GRID: [f64; 3] = [0.001, 0.006, 0.02];
pub const DROPOUT_GRID: [f64; 3] = [0.0, 0.3, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    #[serde(rename = "poprec")]
    PopRec,
    #[serde(rename = "bias-only")]
    BiasOnly,
    #[serde(rename = "mf")]
    Mf,
    #[serde(rename = "neumf")]
    NeuMf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::PopRec => "poprec",
            ModelKind::BiasOnly => "bias-only",
            ModelKind::Mf => "mf",
            ModelKind::NeuMf => "neumf",
        }
    }

    pub fn is_learned(self) -> bool {
        self != ModelKind::PopRec
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poprec" => Ok(ModelKind::PopRec),
            "bias-only" => Ok(ModelKind::BiasOnly),
            "mf" => Ok(ModelKind::Mf),
            "neumf" => Ok(ModelKind::NeuMf),
            other => Err(Error::Parameter(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Training hyper-parameters for one run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub learning_rate: f64,
    /// Dropout on the neural net's hidden activations, training only.
    pub dropout: f64,
    pub l2_reg: f64,
    pub epochs: usize,
    /// Negatives sampled per positive per epoch under the pairwise loss.
    pub n_neg: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            learning_rate: 0.006,
            dropout: 0.0,
            l2_reg: 0.01,
            epochs: 10,
            n_neg: 4,
            seed: 0,
        }
    }
}

/// Weights of the neural scoring head: `3d -> 2d -> d -> 1` with ReLU.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Mlp {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    /// `hidden1 x input`, row major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `hidden2 x hidden1`, row major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// `1 x hidden2`.
    pub w3: Vec<f64>,
    pub b3: f64,
}

/// Global, per-user, and per-item biases plus latent factors, and the MLP
/// for the neural variant.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub num_users: usize,
    pub num_items: usize,
    pub latent_dim: usize,
    pub alpha: f64,
    pub beta_user: Vec<f64>,
    pub beta_item: Vec<f64>,
    /// `num_users x latent_dim`, row major; empty for bias-only.
    pub gamma_user: Vec<f64>,
    pub gamma_item: Vec<f64>,
    pub mlp: Option<Mlp>,
}

impl ModelParams {
    /// Fresh parameters: biases zero, factors and net weights drawn from
    /// Normal(0, 0.01).
    pub fn init(
        kind: ModelKind,
        num_users: usize,
        num_items: usize,
        latent_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if !kind.is_learned() {
            return Err(Error::Parameter("poprec has no trainable parameters".into()));
        }
        if latent_dim == 0 && kind != ModelKind::BiasOnly {
            return Err(Error::Parameter("latent_dim must be positive".into()));
        }
        let mut rng = crate::rng::rng_from_seed(seed);
        let mut normal = Normal001::new();
        let d = if kind == ModelKind::BiasOnly { 0 } else { latent_dim };
        let draw = |n: usize, rng: &mut rand_chacha::ChaCha8Rng, normal: &mut Normal001| {
            (0..n).map(|_| normal.sample(rng)).collect::<Vec<f64>>()
        };
        let gamma_user = draw(num_users * d, &mut rng, &mut normal);
        let gamma_item = draw(num_items * d, &mut rng, &mut normal);
        let mlp = if kind == ModelKind::NeuMf {
            let (input, hidden1, hidden2) = (3 * d, 2 * d, d);
            Some(Mlp {
                input,
                hidden1,
                hidden2,
                w1: draw(hidden1 * input, &mut rng, &mut normal),
                b1: draw(hidden1, &mut rng, &mut normal),
                w2: draw(hidden2 * hidden1, &mut rng, &mut normal),
                b2: draw(hidden2, &mut rng, &mut normal),
                w3: draw(hidden2, &mut rng, &mut normal),
                b3: normal.sample(&mut rng),
            })
        } else {
            None
        };
        Ok(Self {
            kind,
            num_users,
            num_items,
            latent_dim: d,
            alpha: 0.0,
            beta_user: vec![0.0; num_users],
            beta_item: vec![0.0; num_items],
            gamma_user,
            gamma_item,
            mlp,
        })
    }

    pub fn user_factors(&self, u: usize) -> &[f64] {
        &self.gamma_user[u * self.latent_dim..(u + 1) * self.latent_dim]
    }

    pub fn item_factors(&self, i: usize) -> &[f64] {
        &self.gamma_item[i * self.latent_dim..(i + 1) * self.latent_dim]
    }

    /// Relevance of item `i` for user `u`, without dropout.
    pub fn score(&self, u: usize, i: usize) -> Result<f64> {
        if u >= self.num_users {
            return Err(Error::UnknownIndex { entity: "user", index: u });
        }
        if i >= self.num_items {
            return Err(Error::UnknownIndex { entity: "item", index: i });
        }
        Ok(self.score_unchecked(u, i))
    }

    pub(crate) fn score_unchecked(&self, u: usize, i: usize) -> f64 {
        let base = self.alpha + self.beta_user[u] + self.beta_item[i];
        match self.kind {
            ModelKind::BiasOnly => base,
            ModelKind::Mf => base + dot(self.user_factors(u), self.item_factors(i)),
            ModelKind::NeuMf => {
                let mlp = self.mlp.as_ref().expect("neumf params carry an mlp");
                base + mlp_forward_score(mlp, self.user_factors(u), self.item_factors(i))
            }
            ModelKind::PopRec => unreachable!(),
        }
    }

    /// Flat view of all parameters; layout matches [`loss_and_grad_explicit`]
    /// and [`loss_and_grad_bpr`] gradients.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.push(self.alpha);
        out.extend_from_slice(&self.beta_user);
        out.extend_from_slice(&self.beta_item);
        out.extend_from_slice(&self.gamma_user);
        out.extend_from_slice(&self.gamma_item);
        if let Some(mlp) = &self.mlp {
            out.extend_from_slice(&mlp.w1);
            out.extend_from_slice(&mlp.b1);
            out.extend_from_slice(&mlp.w2);
            out.extend_from_slice(&mlp.b2);
            out.extend_from_slice(&mlp.w3);
            out.push(mlp.b3);
        }
        out
    }

    /// Inverse of [`ModelParams::flatten`].
    pub fn unflatten_into(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &flat[pos..pos + n];
            pos += n;
            s
        };
        self.alpha = take(1)[0];
        let bu = self.beta_user.len();
        self.beta_user.copy_from_slice(take(bu));
        let bi = self.beta_item.len();
        self.beta_item.copy_from_slice(take(bi));
        let gu = self.gamma_user.len();
        let gi = self.gamma_item.len();
        self.gamma_user.copy_from_slice(take(gu));
        self.gamma_item.copy_from_slice(take(gi));
        if let Some(mlp) = &mut self.mlp {
            let w1 = mlp.w1.len();
            mlp.w1.copy_from_slice(take(w1));
            let b1 = mlp.b1.len();
            mlp.b1.copy_from_slice(take(b1));
            let w2 = mlp.w2.len();
            mlp.w2.copy_from_slice(take(w2));
            let b2 = mlp.b2.len();
            mlp.b2.copy_from_slice(take(b2));
            let w3 = mlp.w3.len();
            mlp.w3.copy_from_slice(take(w3));
            mlp.b3 = take(1)[0];
        }
    }

    pub fn param_count(&self) -> usize {
        let mlp = self
            .mlp
            .as_ref()
            .map(|m| m.w1.len() + m.b1.len() + m.w2.len() + m.b2.len() + m.w3.len() + 1)
            .unwrap_or(0);
        1 + self.beta_user.len()
            + self.beta_item.len()
            + self.gamma_user.len()
            + self.gamma_item.len()
            + mlp
    }

    pub fn all_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn mlp_forward_score(mlp: &Mlp, gu: &[f64], gi: &[f64]) -> f64 {
    let d = gu.len();
    let mut x = vec![0.0; 3 * d];
    x[..d].copy_from_slice(gu);
    x[d..2 * d].copy_from_slice(gi);
    for k in 0..d {
        x[2 * d + k] = gu[k] * gi[k];
    }
    let mut h1 = vec![0.0; mlp.hidden1];
    for (r, h) in h1.iter_mut().enumerate() {
        *h = (dot(&mlp.w1[r * mlp.input..(r + 1) * mlp.input], &x) + mlp.b1[r]).max(0.0);
    }
    let mut h2 = vec![0.0; mlp.hidden2];
    for (r, h) in h2.iter_mut().enumerate() {
        *h = (dot(&mlp.w2[r * mlp.hidden1..(r + 1) * mlp.hidden1], &h1) + mlp.b2[r]).max(0.0);
    }
    dot(&mlp.w3, &h2) + mlp.b3
}

/// Standard-normal sampler (Box-Muller) scaled to sigma 0.01.
struct Normal001 {
    spare: Option<f64>,
}

impl Normal001 {
    fn new() -> Self {
        Self { spare: None }
    }

    fn sample(&mut self, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
        use rand::Rng;
        if let Some(z) = self.spare.take() {
            return 0.01 * z;
        }
        let u1: f64 = loop {
            let v = rng.gen::<f64>();
            if v > 0.0 {
                break v;
            }
        };
        let u2: f64 = rng.gen();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare = Some(radius * sin);
        0.01 * radius * cos
    }
}

/// Train-set item popularity; the ranking is the same for every user.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PopularityModel {
    pub counts: Vec<f64>,
    pub num_users: usize,
}

impl PopularityModel {
    pub fn from_train(train: &crate::data::Dataset) -> Self {
        let counts = train.item_counts().into_iter().map(f64::from).collect();
        Self { counts, num_users: train.num_users() as usize }
    }

    pub fn score(&self, i: usize) -> Result<f64> {
        self.counts
            .get(i)
            .copied()
            .ok_or(Error::UnknownIndex { entity: "item", index: i })
    }
}

/// A scoreable model of either family.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub enum Model {
    Popularity(PopularityModel),
    Learned(ModelParams),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Popularity(_) => ModelKind::PopRec,
            Model::Learned(p) => p.kind,
        }
    }

    pub fn num_items(&self) -> usize {
        match self {
            Model::Popularity(p) => p.counts.len(),
            Model::Learned(p) => p.num_items,
        }
    }

    pub fn score(&self, u: usize, i: usize) -> Result<f64> {
        match self {
            Model::Popularity(p) => {
                if u >= p.num_users {
                    return Err(Error::UnknownIndex { entity: "user", index: u });
                }
                p.score(i)
            }
            Model::Learned(p) => p.score(u, i),
        }
    }

    /// Scores of every item for one user.
    pub fn scores_for_user(&self, u: usize) -> Result<Vec<f64>> {
        match self {
            Model::Popularity(p) => {
                if u >= p.num_users {
                    return Err(Error::UnknownIndex { entity: "user", index: u });
                }
                Ok(p.counts.clone())
            }
            Model::Learned(p) => {
                if u >= p.num_users {
                    return Err(Error::UnknownIndex { entity: "user", index: u });
                }
                Ok((0..p.num_items).map(|i| p.score_unchecked(u, i)).collect())
            }
        }
    }
}

/// All items except `exclude`, best score first; ties break on the lower
/// item index.
pub fn rank_all_items(model: &Model, user: usize, exclude: &HashSet<u32>) -> Result<Vec<u32>> {
    let scores = model.scores_for_user(user)?;
    let mut items: Vec<u32> =
        (0..model.num_items() as u32).filter(|i| !exclude.contains(i)).collect();
    items.sort_by(|&a, &b| {
        scores[b as usize]
            .total_cmp(&scores[a as usize])
            .then(a.cmp(&b))
    });
    Ok(items)
}
