//! Forward pass and backpropagation through time for the single-layer
//! GRU classifier: embedding → GRU → dropout → linear → softmax.
//!
//! Gate equations (row-vector form):
//!
//! ```text
//! z  = σ(x·W_z + h·U_z + b_z)
//! r  = σ(x·W_r + h·U_r + b_r)
//! h̃  = tanh(x·W_h + (r ⊙ h)·U_h + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{sigmoid, Scalar};
use crate::textprep::EncodedSequence;

use super::params::GruParams;

/// Inverted dropout applied to the final hidden state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
struct Step<T> {
    id: usize,
    h_prev: Vec<T>,
    z: Vec<T>,
    r: Vec<T>,
    h_cand: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct SequenceCache<T> {
    steps: Vec<Step<T>>,
    h_final: Vec<T>,
    mask: Option<Vec<T>>,
    probs: Vec<T>,
}

impl<T: Scalar> SequenceCache<T> {
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn final_hidden(&self) -> &[T] {
        &self.h_final
    }
}

/// Everything the backward pass needs, one entry per batch element.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pub sequences: Vec<SequenceCache<T>>,
}

struct Gates<T> {
    z: Vec<T>,
    r: Vec<T>,
    h_cand: Vec<T>,
    h: Vec<T>,
}

fn step_gates<T: Scalar>(x: &[T], h_prev: &[T], p: &GruParams<T>) -> Gates<T> {
    let mut z = p.b_z.clone();
    p.w_z.add_vec_mul(x, &mut z);
    p.u_z.add_vec_mul(h_prev, &mut z);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut r = p.b_r.clone();
    p.w_r.add_vec_mul(x, &mut r);
    p.u_r.add_vec_mul(h_prev, &mut r);
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let rh: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
    let mut h_cand = p.b_h.clone();
    p.w_h.add_vec_mul(x, &mut h_cand);
    p.u_h.add_vec_mul(&rh, &mut h_cand);
    h_cand.iter_mut().for_each(|v| *v = v.tanh());

    let h = h_prev
        .iter()
        .zip(&z)
        .zip(&h_cand)
        .map(|((&hp, &zi), &hc)| (T::one() - zi) * hp + zi * hc)
        .collect();
    Gates { z, r, h_cand, h }
}

/// One GRU update of the hidden state.
pub fn gru_cell<T: Scalar>(x: &[T], h_prev: &[T], params: &GruParams<T>) -> Result<Vec<T>> {
    if x.len() != params.embed_dim() || h_prev.len() != params.hidden() {
        return Err(Error::Shape(format!(
            "gru_cell expects x of {} and h of {}, got {} and {}",
            params.embed_dim(),
            params.hidden(),
            x.len(),
            h_prev.len()
        )));
    }
    Ok(step_gates(x, h_prev, params).h)
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// Inverted-dropout mask: each unit kept with probability `1 − rate` and
/// scaled by `1 / (1 − rate)`.
pub fn dropout_mask<T: Scalar>(len: usize, rate: f64, rng: &mut rng::Rng) -> Vec<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

fn check_ids<T: Scalar>(params: &GruParams<T>, seq: &EncodedSequence) -> Result<()> {
    let vocab = params.vocab_size();
    if seq.true_length > seq.ids.len() {
        return Err(Error::Shape(format!(
            "true_length {} exceeds sequence length {}",
            seq.true_length,
            seq.ids.len()
        )));
    }
    match seq.content().iter().find(|&&id| id as usize >= vocab) {
        Some(id) => Err(Error::InvalidArgument(format!(
            "token id {id} out of range for vocabulary of {vocab}"
        ))),
        None => Ok(()),
    }
}

fn forward_one<T: Scalar>(
    params: &GruParams<T>,
    seq: &EncodedSequence,
    mask: Option<Vec<T>>,
) -> (Vec<T>, SequenceCache<T>) {
    let mut h = vec![T::zero(); params.hidden()];
    let mut steps = Vec::with_capacity(seq.true_length);
    for &id in seq.content() {
        let id = id as usize;
        let g = step_gates(params.embedding.row(id), &h, params);
        let h_prev = std::mem::replace(&mut h, g.h);
        steps.push(Step {
            id,
            h_prev,
            z: g.z,
            r: g.r,
            h_cand: g.h_cand,
        });
    }
    let dropped: Vec<T> = match &mask {
        Some(m) => h.iter().zip(m).map(|(&a, &b)| a * b).collect(),
        None => h.clone(),
    };
    let mut logits = params.b_out.clone();
    params.w_out.add_vec_mul(&dropped, &mut logits);
    let probs = softmax(&logits);
    (
        logits,
        SequenceCache {
            steps,
            h_final: h,
            mask,
            probs,
        },
    )
}

/// Runs the network over a batch. PAD positions past `true_length` are
/// skipped; an empty sequence has a zero final hidden state.
pub fn forward<T: Scalar>(
    params: &GruParams<T>,
    batch: &[EncodedSequence],
    dropout: Option<Dropout>,
) -> Result<(Vec<Vec<T>>, ForwardCache<T>)> {
    let (_, probs, cache) = forward_with_logits(params, batch, dropout)?;
    Ok((probs, cache))
}

/// Probabilities, logits and the cache for backprop.
type ForwardOutput<T> = (Vec<Vec<T>>, Vec<Vec<T>>, ForwardCache<T>);

fn forward_with_logits<T: Scalar>(
    params: &GruParams<T>,
    batch: &[EncodedSequence],
    dropout: Option<Dropout>,
) -> Result<ForwardOutput<T>> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    for seq in batch {
        check_ids(params, seq)?;
    }
    let mut mask_rng = dropout.map(|d| rng::seeded(d.seed));
    let mut logits = Vec::with_capacity(batch.len());
    let mut probs = Vec::with_capacity(batch.len());
    let mut sequences = Vec::with_capacity(batch.len());
    for seq in batch {
        let mask = match (&dropout, mask_rng.as_mut()) {
            (Some(d), Some(r)) if d.rate > 0.0 => Some(dropout_mask(params.hidden(), d.rate, r)),
            _ => None,
        };
        let (l, cache) = forward_one(params, seq, mask);
        logits.push(l);
        probs.push(cache.probs.clone());
        sequences.push(cache);
    }
    Ok((logits, probs, ForwardCache { sequences }))
}

/// Mean cross-entropy over the batch and its gradient for every parameter.
pub fn loss_and_grads<T: Scalar>(
    params: &GruParams<T>,
    batch: &[EncodedSequence],
    labels: &[usize],
    dropout: Option<Dropout>,
) -> Result<(T, GruParams<T>)> {
    if labels.len() != batch.len() {
        return Err(Error::Shape(format!(
            "{} labels for a batch of {}",
            labels.len(),
            batch.len()
        )));
    }
    let k = params.n_classes();
    if let Some(bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {k} classes"
        )));
    }
    let (logits, _, cache) = forward_with_logits(params, batch, dropout)?;
    let n = T::lit(batch.len() as f64);
    let loss = logits
        .iter()
        .zip(labels)
        .map(|(l, &y)| -log_softmax(l)[y])
        .sum::<T>()
        / n;

    let mut grads = params.zeros_like();
    for (seq, &y) in cache.sequences.iter().zip(labels) {
        backward_one(params, seq, y, n, &mut grads);
    }
    Ok((loss, grads))
}

fn backward_one<T: Scalar>(
    p: &GruParams<T>,
    seq: &SequenceCache<T>,
    label: usize,
    batch_len: T,
    grads: &mut GruParams<T>,
) {
    let hidden = p.hidden();
    let one = T::one();

    let mut d_logits = seq.probs.clone();
    d_logits[label] -= one;
    d_logits.iter_mut().for_each(|d| *d /= batch_len);

    let dropped: Vec<T> = match &seq.mask {
        Some(m) => seq.h_final.iter().zip(m).map(|(&a, &b)| a * b).collect(),
        None => seq.h_final.clone(),
    };
    grads.w_out.add_outer(&dropped, &d_logits);
    grads
        .b_out
        .iter_mut()
        .zip(&d_logits)
        .for_each(|(g, &d)| *g += d);

    let mut dh = vec![T::zero(); hidden];
    p.w_out.add_mul_vec(&d_logits, &mut dh);
    if let Some(m) = &seq.mask {
        dh.iter_mut().zip(m).for_each(|(d, &mi)| *d *= mi);
    }

    let mut da_z = vec![T::zero(); hidden];
    let mut da_r = vec![T::zero(); hidden];
    let mut da_h = vec![T::zero(); hidden];
    let mut rh = vec![T::zero(); hidden];
    let mut d_rh = vec![T::zero(); hidden];
    let mut dx = vec![T::zero(); p.embed_dim()];

    for step in seq.steps.iter().rev() {
        let x = p.embedding.row(step.id);
        let mut dh_prev = vec![T::zero(); hidden];
        for j in 0..hidden {
            let (z, hc, hp) = (step.z[j], step.h_cand[j], step.h_prev[j]);
            da_h[j] = dh[j] * z * (one - hc * hc);
            da_z[j] = dh[j] * (hc - hp) * z * (one - z);
            dh_prev[j] = dh[j] * (one - z);
            rh[j] = step.r[j] * hp;
        }

        d_rh.iter_mut().for_each(|v| *v = T::zero());
        p.u_h.add_mul_vec(&da_h, &mut d_rh);
        for j in 0..hidden {
            let r = step.r[j];
            da_r[j] = d_rh[j] * step.h_prev[j] * r * (one - r);
            dh_prev[j] += d_rh[j] * r;
        }

        grads.w_z.add_outer(x, &da_z);
        grads.w_r.add_outer(x, &da_r);
        grads.w_h.add_outer(x, &da_h);
        grads.u_z.add_outer(&step.h_prev, &da_z);
        grads.u_r.add_outer(&step.h_prev, &da_r);
        grads.u_h.add_outer(&rh, &da_h);
        for j in 0..hidden {
            grads.b_z[j] += da_z[j];
            grads.b_r[j] += da_r[j];
            grads.b_h[j] += da_h[j];
        }

        p.u_z.add_mul_vec(&da_z, &mut dh_prev);
        p.u_r.add_mul_vec(&da_r, &mut dh_prev);

        dx.iter_mut().for_each(|v| *v = T::zero());
        p.w_z.add_mul_vec(&da_z, &mut dx);
        p.w_r.add_mul_vec(&da_r, &mut dx);
        p.w_h.add_mul_vec(&da_h, &mut dx);
        grads
            .embedding
            .row_mut(step.id)
            .iter_mut()
            .zip(&dx)
            .for_each(|(g, &d)| *g += d);

        dh = dh_prev;
    }
}
