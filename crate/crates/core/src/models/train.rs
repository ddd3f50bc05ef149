//! Per-interaction SGD under the squared-error and pairwise-ranking losses.
//!
//! One backward pass feeds both consumers: SGD applies the emitted
//! `(parameter, gradient)` pairs in place, while the dense
//! [`loss_and_grad_explicit`] / [`loss_and_grad_bpr`] views scatter the same
//! pairs into a flat vector for finite-difference verification. The two can
//! therefore never drift apart.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Scenario};
use crate::error::{Error, Result};
use crate::models::{dot, Model, ModelKind, ModelParams, PopularityModel, TrainConfig};
use crate::rng::{child_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq)]
enum ParamRef {
    Alpha,
    BetaUser(usize),
    BetaItem(usize),
    GammaUser(usize, usize),
    GammaItem(usize, usize),
    W1(usize),
    B1(usize),
    W2(usize),
    B2(usize),
    W3(usize),
    B3,
}

/// Forward-pass cache for one `(user, item)` score, reused across samples.
struct Forward {
    score: f64,
    x: Vec<f64>,
    h1pre: Vec<f64>,
    h1: Vec<f64>,
    h2pre: Vec<f64>,
    h2: Vec<f64>,
    /// Dropout scale per hidden unit; all ones outside training.
    m1: Vec<f64>,
    m2: Vec<f64>,
    dh1pre: Vec<f64>,
    dh2pre: Vec<f64>,
    dx: Vec<f64>,
}

impl Forward {
    fn new(d: usize) -> Self {
        Self {
            score: 0.0,
            x: vec![0.0; 3 * d],
            h1pre: vec![0.0; 2 * d],
            h1: vec![0.0; 2 * d],
            h2pre: vec![0.0; d],
            h2: vec![0.0; d],
            m1: vec![1.0; 2 * d],
            m2: vec![1.0; d],
            dh1pre: vec![0.0; 2 * d],
            dh2pre: vec![0.0; d],
            dx: vec![0.0; 3 * d],
        }
    }

    fn reset_masks(&mut self) {
        self.m1.iter_mut().for_each(|m| *m = 1.0);
        self.m2.iter_mut().for_each(|m| *m = 1.0);
    }

    fn sample_masks(&mut self, dropout: f64, rng: &mut ChaCha8Rng) {
        let keep = 1.0 - dropout;
        for m in self.m1.iter_mut().chain(self.m2.iter_mut()) {
            *m = if rng.gen::<f64>() < dropout { 0.0 } else { 1.0 / keep };
        }
    }
}

fn forward(params: &ModelParams, u: usize, i: usize, fwd: &mut Forward) {
    let base = params.alpha + params.beta_user[u] + params.beta_item[i];
    fwd.score = match params.kind {
        ModelKind::BiasOnly => base,
        ModelKind::Mf => base + dot(params.user_factors(u), params.item_factors(i)),
        ModelKind::NeuMf => {
            let d = params.latent_dim;
            let mlp = params.mlp.as_ref().expect("neumf params carry an mlp");
            let (gu, gi) = (params.user_factors(u), params.item_factors(i));
            fwd.x[..d].copy_from_slice(gu);
            fwd.x[d..2 * d].copy_from_slice(gi);
            for k in 0..d {
                fwd.x[2 * d + k] = gu[k] * gi[k];
            }
            for r in 0..mlp.hidden1 {
                let pre = dot(&mlp.w1[r * mlp.input..(r + 1) * mlp.input], &fwd.x) + mlp.b1[r];
                fwd.h1pre[r] = pre;
                fwd.h1[r] = pre.max(0.0) * fwd.m1[r];
            }
            for r in 0..mlp.hidden2 {
                let pre =
                    dot(&mlp.w2[r * mlp.hidden1..(r + 1) * mlp.hidden1], &fwd.h1) + mlp.b2[r];
                fwd.h2pre[r] = pre;
                fwd.h2[r] = pre.max(0.0) * fwd.m2[r];
            }
            base + dot(&mlp.w3, &fwd.h2) + mlp.b3
        }
        ModelKind::PopRec => unreachable!(),
    };
}

/// Emit `upstream * d(score)/d(theta)` for every parameter the score touches.
fn backprop(
    params: &ModelParams,
    u: usize,
    i: usize,
    fwd: &mut Forward,
    upstream: f64,
    entries: &mut Vec<(ParamRef, f64)>,
) {
    entries.push((ParamRef::Alpha, upstream));
    entries.push((ParamRef::BetaUser(u), upstream));
    entries.push((ParamRef::BetaItem(i), upstream));
    let d = params.latent_dim;
    match params.kind {
        ModelKind::BiasOnly => {}
        ModelKind::Mf => {
            let (gu, gi) = (params.user_factors(u), params.item_factors(i));
            for k in 0..d {
                entries.push((ParamRef::GammaUser(u, k), upstream * gi[k]));
                entries.push((ParamRef::GammaItem(i, k), upstream * gu[k]));
            }
        }
        ModelKind::NeuMf => {
            let mlp = params.mlp.as_ref().expect("neumf params carry an mlp");
            for r in 0..mlp.hidden2 {
                let relu = if fwd.h2pre[r] > 0.0 { 1.0 } else { 0.0 };
                fwd.dh2pre[r] = upstream * mlp.w3[r] * fwd.m2[r] * relu;
                entries.push((ParamRef::W3(r), upstream * fwd.h2[r]));
            }
            entries.push((ParamRef::B3, upstream));
            for r in 0..mlp.hidden1 {
                let mut dh1 = 0.0;
                for k in 0..mlp.hidden2 {
                    dh1 += fwd.dh2pre[k] * mlp.w2[k * mlp.hidden1 + r];
                }
                let relu = if fwd.h1pre[r] > 0.0 { 1.0 } else { 0.0 };
                fwd.dh1pre[r] = dh1 * fwd.m1[r] * relu;
            }
            for k in 0..mlp.hidden2 {
                for r in 0..mlp.hidden1 {
                    entries.push((ParamRef::W2(k * mlp.hidden1 + r), fwd.dh2pre[k] * fwd.h1[r]));
                }
                entries.push((ParamRef::B2(k), fwd.dh2pre[k]));
            }
            for t in 0..mlp.input {
                let mut dx = 0.0;
                for r in 0..mlp.hidden1 {
                    dx += fwd.dh1pre[r] * mlp.w1[r * mlp.input + t];
                }
                fwd.dx[t] = dx;
            }
            for r in 0..mlp.hidden1 {
                for t in 0..mlp.input {
                    entries.push((ParamRef::W1(r * mlp.input + t), fwd.dh1pre[r] * fwd.x[t]));
                }
                entries.push((ParamRef::B1(r), fwd.dh1pre[r]));
            }
            let (gu, gi) = (params.user_factors(u), params.item_factors(i));
            for k in 0..d {
                entries.push((ParamRef::GammaUser(u, k), fwd.dx[k] + fwd.dx[2 * d + k] * gi[k]));
                entries.push((ParamRef::GammaItem(i, k), fwd.dx[d + k] + fwd.dx[2 * d + k] * gu[k]));
            }
        }
        ModelKind::PopRec => unreachable!(),
    }
}

/// L2 penalty over a sample's touched biases and factors plus the net
/// weights; the global bias and net biases stay unregularized.
fn l2_penalty(
    params: &ModelParams,
    l2: f64,
    users: &[usize],
    items: &[usize],
    reg_beta_user: bool,
    entries: &mut Vec<(ParamRef, f64)>,
) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    if reg_beta_user {
        for &u in users {
            acc += params.beta_user[u] * params.beta_user[u];
            entries.push((ParamRef::BetaUser(u), 2.0 * l2 * params.beta_user[u]));
        }
    }
    for &i in items {
        acc += params.beta_item[i] * params.beta_item[i];
        entries.push((ParamRef::BetaItem(i), 2.0 * l2 * params.beta_item[i]));
    }
    let d = params.latent_dim;
    for &u in users {
        for k in 0..d {
            let v = params.gamma_user[u * d + k];
            acc += v * v;
            entries.push((ParamRef::GammaUser(u, k), 2.0 * l2 * v));
        }
    }
    for &i in items {
        for k in 0..d {
            let v = params.gamma_item[i * d + k];
            acc += v * v;
            entries.push((ParamRef::GammaItem(i, k), 2.0 * l2 * v));
        }
    }
    if let Some(mlp) = &params.mlp {
        for (idx, &v) in mlp.w1.iter().enumerate() {
            acc += v * v;
            entries.push((ParamRef::W1(idx), 2.0 * l2 * v));
        }
        for (idx, &v) in mlp.w2.iter().enumerate() {
            acc += v * v;
            entries.push((ParamRef::W2(idx), 2.0 * l2 * v));
        }
        for (idx, &v) in mlp.w3.iter().enumerate() {
            acc += v * v;
            entries.push((ParamRef::W3(idx), 2.0 * l2 * v));
        }
    }
    l2 * acc
}

/// Squared-error sample loss with gradients; returns the loss value.
fn sample_explicit(
    params: &ModelParams,
    u: usize,
    i: usize,
    rating: f64,
    l2: f64,
    fwd: &mut Forward,
    entries: &mut Vec<(ParamRef, f64)>,
) -> f64 {
    forward(params, u, i, fwd);
    let err = fwd.score - rating;
    backprop(params, u, i, fwd, 2.0 * err, entries);
    err * err + l2_penalty(params, l2, &[u], &[i], true, entries)
}

/// Pairwise sample loss `-ln sigmoid(s_ui - s_uj)` with gradients.
///
/// The global bias and the user bias cancel in the score difference, so
/// they receive no gradient and no regularization here.
fn sample_bpr(
    params: &ModelParams,
    u: usize,
    pos: usize,
    neg: usize,
    l2: f64,
    fwd_pos: &mut Forward,
    fwd_neg: &mut Forward,
    entries: &mut Vec<(ParamRef, f64)>,
) -> f64 {
    forward(params, u, pos, fwd_pos);
    forward(params, u, neg, fwd_neg);
    let diff = fwd_pos.score - fwd_neg.score;
    let upstream = sigmoid(diff) - 1.0;
    let mark = entries.len();
    backprop(params, u, pos, fwd_pos, upstream, entries);
    backprop(params, u, neg, fwd_neg, -upstream, entries);
    // drop the cancelling alpha / beta_user contributions
    entries.retain_with_offset(mark, |(r, _)| {
        !matches!(r, ParamRef::Alpha | ParamRef::BetaUser(_))
    });
    softplus(-diff) + l2_penalty(params, l2, &[u], &[pos, neg], false, entries)
}

trait RetainFrom {
    fn retain_with_offset<F: FnMut(&(ParamRef, f64)) -> bool>(&mut self, from: usize, keep: F);
}

impl RetainFrom for Vec<(ParamRef, f64)> {
    fn retain_with_offset<F: FnMut(&(ParamRef, f64)) -> bool>(&mut self, from: usize, mut keep: F) {
        let mut write = from;
        for read in from..self.len() {
            if keep(&self[read]) {
                self[write] = self[read];
                write += 1;
            }
        }
        self.truncate(write);
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn apply(params: &mut ModelParams, entries: &[(ParamRef, f64)], lr: f64) {
    for &(r, g) in entries {
        *param_mut(params, r) -= lr * g;
    }
}

fn param_mut(params: &mut ModelParams, r: ParamRef) -> &mut f64 {
    let d = params.latent_dim;
    match r {
        ParamRef::Alpha => &mut params.alpha,
        ParamRef::BetaUser(u) => &mut params.beta_user[u],
        ParamRef::BetaItem(i) => &mut params.beta_item[i],
        ParamRef::GammaUser(u, k) => &mut params.gamma_user[u * d + k],
        ParamRef::GammaItem(i, k) => &mut params.gamma_item[i * d + k],
        ParamRef::W1(idx) => &mut params.mlp.as_mut().unwrap().w1[idx],
        ParamRef::B1(idx) => &mut params.mlp.as_mut().unwrap().b1[idx],
        ParamRef::W2(idx) => &mut params.mlp.as_mut().unwrap().w2[idx],
        ParamRef::B2(idx) => &mut params.mlp.as_mut().unwrap().b2[idx],
        ParamRef::W3(idx) => &mut params.mlp.as_mut().unwrap().w3[idx],
        ParamRef::B3 => &mut params.mlp.as_mut().unwrap().b3,
    }
}

fn flat_index(params: &ModelParams, r: ParamRef) -> usize {
    let d = params.latent_dim;
    let (nu, ni) = (params.num_users, params.num_items);
    let gamma_user_off = 1 + nu + ni;
    let gamma_item_off = gamma_user_off + nu * d;
    let mlp_off = gamma_item_off + ni * d;
    match r {
        ParamRef::Alpha => 0,
        ParamRef::BetaUser(u) => 1 + u,
        ParamRef::BetaItem(i) => 1 + nu + i,
        ParamRef::GammaUser(u, k) => gamma_user_off + u * d + k,
        ParamRef::GammaItem(i, k) => gamma_item_off + i * d + k,
        ParamRef::W1(idx) => mlp_off + idx,
        ParamRef::B1(idx) => {
            let m = params.mlp.as_ref().unwrap();
            mlp_off + m.w1.len() + idx
        }
        ParamRef::W2(idx) => {
            let m = params.mlp.as_ref().unwrap();
            mlp_off + m.w1.len() + m.b1.len() + idx
        }
        ParamRef::B2(idx) => {
            let m = params.mlp.as_ref().unwrap();
            mlp_off + m.w1.len() + m.b1.len() + m.w2.len() + idx
        }
        ParamRef::W3(idx) => {
            let m = params.mlp.as_ref().unwrap();
            mlp_off + m.w1.len() + m.b1.len() + m.w2.len() + m.b2.len() + idx
        }
        ParamRef::B3 => {
            let m = params.mlp.as_ref().unwrap();
            mlp_off + m.w1.len() + m.b1.len() + m.w2.len() + m.b2.len() + m.w3.len()
        }
    }
}

/// Squared-error sample loss and its dense gradient, laid out like
/// [`ModelParams::flatten`]. Dropout is off here.
pub fn loss_and_grad_explicit(
    params: &ModelParams,
    u: usize,
    i: usize,
    rating: f64,
    l2: f64,
) -> Result<(f64, Vec<f64>)> {
    check_indices(params, &[u], &[i])?;
    let mut fwd = Forward::new(params.latent_dim);
    let mut entries = Vec::new();
    let loss = sample_explicit(params, u, i, rating, l2, &mut fwd, &mut entries);
    Ok((loss, scatter(params, &entries)))
}

/// Pairwise sample loss and its dense gradient for the triple `(u, pos, neg)`.
pub fn loss_and_grad_bpr(
    params: &ModelParams,
    u: usize,
    pos: usize,
    neg: usize,
    l2: f64,
) -> Result<(f64, Vec<f64>)> {
    check_indices(params, &[u], &[pos, neg])?;
    if pos == neg {
        return Err(Error::Parameter("positive and negative item coincide".into()));
    }
    let mut fwd_pos = Forward::new(params.latent_dim);
    let mut fwd_neg = Forward::new(params.latent_dim);
    let mut entries = Vec::new();
    let loss = sample_bpr(params, u, pos, neg, l2, &mut fwd_pos, &mut fwd_neg, &mut entries);
    Ok((loss, scatter(params, &entries)))
}

fn scatter(params: &ModelParams, entries: &[(ParamRef, f64)]) -> Vec<f64> {
    let mut grad = vec![0.0; params.param_count()];
    for &(r, g) in entries {
        grad[flat_index(params, r)] += g;
    }
    grad
}

fn check_indices(params: &ModelParams, users: &[usize], items: &[usize]) -> Result<()> {
    for &u in users {
        if u >= params.num_users {
            return Err(Error::UnknownIndex { entity: "user", index: u });
        }
    }
    for &i in items {
        if i >= params.num_items {
            return Err(Error::UnknownIndex { entity: "item", index: i });
        }
    }
    Ok(())
}

/// Train any model kind for a scenario; the popularity baseline just counts.
pub fn train(
    train_set: &Dataset,
    kind: ModelKind,
    scenario: Scenario,
    cfg: &TrainConfig,
) -> Result<Model> {
    if kind == ModelKind::PopRec {
        return Ok(Model::Popularity(PopularityModel::from_train(train_set)));
    }
    Ok(Model::Learned(train_with(train_set, kind, scenario, cfg, |_, _| Ok(()))?))
}

/// Squared-error training for the explicit scenario.
pub fn train_explicit(train_set: &Dataset, kind: ModelKind, cfg: &TrainConfig) -> Result<ModelParams> {
    train_with(train_set, kind, Scenario::Explicit, cfg, |_, _| Ok(()))
}

/// Pairwise-ranking training for implicit or sequential feedback.
pub fn train_bpr(train_set: &Dataset, kind: ModelKind, cfg: &TrainConfig) -> Result<ModelParams> {
    train_with(train_set, kind, Scenario::Implicit, cfg, |_, _| Ok(()))
}

/// Core SGD loop with an epoch hook (used for proxy tracing and best-epoch
/// selection). The hook sees the parameters after each completed epoch.
pub fn train_with<F>(
    train_set: &Dataset,
    kind: ModelKind,
    scenario: Scenario,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<ModelParams>
where
    F: FnMut(usize, &ModelParams) -> Result<()>,
{
    if !kind.is_learned() {
        return Err(Error::Parameter("poprec is not trained by SGD".into()));
    }
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("cannot train on an empty set".into()));
    }
    let mut params = ModelParams::init(
        kind,
        train_set.num_users() as usize,
        train_set.num_items() as usize,
        cfg.latent_dim,
        child_seed(cfg.seed, "init"),
    )?;
    let mut rng = rng_from_seed(child_seed(cfg.seed, "sgd"));
    match scenario {
        Scenario::Explicit => sgd_explicit(train_set, &mut params, cfg, &mut rng, &mut on_epoch)?,
        Scenario::Implicit | Scenario::Sequential => {
            sgd_bpr(train_set, &mut params, cfg, &mut rng, &mut on_epoch)?
        }
    }
    Ok(params)
}

fn sgd_explicit<F>(
    train_set: &Dataset,
    params: &mut ModelParams,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    on_epoch: &mut F,
) -> Result<()>
where
    F: FnMut(usize, &ModelParams) -> Result<()>,
{
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut fwd = Forward::new(params.latent_dim);
    let mut entries: Vec<(ParamRef, f64)> = Vec::new();
    let use_dropout = cfg.dropout > 0.0 && params.kind == ModelKind::NeuMf;
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let it = train_set.interaction(idx);
            if use_dropout {
                fwd.sample_masks(cfg.dropout, rng);
            }
            entries.clear();
            epoch_loss += sample_explicit(
                params,
                it.user as usize,
                it.item as usize,
                it.rating,
                cfg.l2_reg,
                &mut fwd,
                &mut entries,
            );
            apply(params, &entries, cfg.learning_rate);
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        fwd.reset_masks();
        on_epoch(epoch, params)?;
    }
    Ok(())
}

fn sgd_bpr<F>(
    train_set: &Dataset,
    params: &mut ModelParams,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    on_epoch: &mut F,
) -> Result<()>
where
    F: FnMut(usize, &ModelParams) -> Result<()>,
{
    let positives = positive_items(train_set);
    let num_items = train_set.num_items() as usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut fwd_pos = Forward::new(params.latent_dim);
    let mut fwd_neg = Forward::new(params.latent_dim);
    let mut entries: Vec<(ParamRef, f64)> = Vec::new();
    let use_dropout = cfg.dropout > 0.0 && params.kind == ModelKind::NeuMf;
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let it = train_set.interaction(idx);
            let user_pos = &positives[it.user as usize];
            for _ in 0..cfg.n_neg {
                let Some(neg) = draw_negative(rng, num_items, user_pos) else {
                    break;
                };
                if use_dropout {
                    fwd_pos.sample_masks(cfg.dropout, rng);
                    fwd_neg.sample_masks(cfg.dropout, rng);
                }
                entries.clear();
                epoch_loss += sample_bpr(
                    params,
                    it.user as usize,
                    it.item as usize,
                    neg,
                    cfg.l2_reg,
                    &mut fwd_pos,
                    &mut fwd_neg,
                    &mut entries,
                );
                apply(params, &entries, cfg.learning_rate);
            }
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        fwd_pos.reset_masks();
        fwd_neg.reset_masks();
        on_epoch(epoch, params)?;
    }
    Ok(())
}

/// Sorted distinct item ids each user interacted with.
pub(crate) fn positive_items(train_set: &Dataset) -> Vec<Vec<u32>> {
    let mut positives = vec![Vec::new(); train_set.num_users() as usize];
    for it in train_set.interactions() {
        positives[it.user as usize].push(it.item);
    }
    for list in &mut positives {
        list.sort_unstable();
        list.dedup();
    }
    positives
}

/// Uniform draw from the user's non-interacted items; `None` when there are
/// none.
pub(crate) fn draw_negative(
    rng: &mut ChaCha8Rng,
    num_items: usize,
    positives: &[u32],
) -> Option<usize> {
    if positives.len() >= num_items {
        return None;
    }
    loop {
        let j = rng.gen_range(0..num_items) as u32;
        if positives.binary_search(&j).is_err() {
            return Some(j as usize);
        }
    }
}
