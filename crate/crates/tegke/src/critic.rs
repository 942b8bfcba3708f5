//! Convolutional Wasserstein critic with gradient penalty.
//!
//! The critic sees one matrix per sample: one-hot topic rows stacked on top of
//! essay rows (one-hot for real essays, decoder probability rows for generated
//! ones). Rows are soft-embedded through a critic-owned matrix, passed through
//! 1-D convolutions of widths 3, 4 and 5 with max-over-time pooling, and
//! reduced to a scalar by an affine layer.
//!
//! Kernels are stored per row offset: `critic.conv{w}.k{r}` holds the r-th
//! rows of all filters of width `w` as an `F x d_cemb` matrix, so one
//! convolution is `w` shifted matrix products.

use crate::nn::{ParamStore, ParamVars};
use crate::tape::{Tape, Var};
use crate::{Result, TegkeError};
use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;

pub const CONV_WIDTHS: [usize; 3] = [3, 4, 5];

pub fn init_critic(
    params: &mut ParamStore,
    vocab_size: usize,
    d_cemb: usize,
    filters: usize,
    rng: &mut ChaCha8Rng,
) {
    params.init_matrix("critic.emb", vocab_size, d_cemb, rng);
    for w in CONV_WIDTHS {
        for r in 0..w {
            params.init_matrix(&format!("critic.conv{w}.k{r}"), filters, d_cemb, rng);
        }
        params.init_zeros_vec(&format!("critic.conv{w}.b"), filters);
    }
    params.init_matrix("critic.out.w", 1, CONV_WIDTHS.len() * filters, rng);
    params.init_zeros_scalar("critic.out.b");
}

/// Constant matrix of one-hot rows for `ids`.
pub fn one_hot_rows(tape: &mut Tape, ids: &[usize], vocab_size: usize) -> Result<Var> {
    let mut m = Array2::<f64>::zeros((ids.len(), vocab_size));
    for (r, &id) in ids.iter().enumerate() {
        if id >= vocab_size {
            return Err(TegkeError::Shape(format!(
                "token id {id} out of range for vocabulary of size {vocab_size}"
            )));
        }
        m[[r, id]] = 1.0;
    }
    Ok(tape.constant(m.into_dyn()))
}

/// Score the full input matrix (topic rows already prepended). Rows are
/// distributions over the vocabulary.
pub fn score_rows(tape: &mut Tape, pv: &ParamVars, rows: Var) -> Result<Var> {
    let shape = tape.value(rows).shape().to_vec();
    if shape.len() != 2 {
        return Err(TegkeError::Shape("critic input must be a matrix".into()));
    }
    let vocab = tape.value(pv.get("critic.emb")).shape()[0];
    if shape[1] != vocab {
        return Err(TegkeError::Shape(format!(
            "critic input has {} columns but the vocabulary has {vocab} entries",
            shape[1]
        )));
    }
    let mut embedded = tape.matmul(rows, pv.get("critic.emb"));
    let mut n = shape[0];
    let widest = *CONV_WIDTHS.iter().max().unwrap();
    if n < widest {
        embedded = tape.pad_rows(embedded, 0, widest);
        n = widest;
    }
    let mut pooled = Vec::with_capacity(CONV_WIDTHS.len());
    for w in CONV_WIDTHS {
        let m = n - w + 1;
        let mut feat: Option<Var> = None;
        for r in 0..w {
            let window = tape.slice_rows(embedded, r, m);
            let k = pv.get(&format!("critic.conv{w}.k{r}"));
            let kt = tape.transpose(k);
            let contrib = tape.matmul(window, kt);
            feat = Some(match feat {
                Some(acc) => tape.add(acc, contrib),
                None => contrib,
            });
        }
        let feat = feat.unwrap();
        let ones = tape.constant(Array1::<f64>::ones(m).into_dyn());
        let bias = tape.outer(ones, pv.get(&format!("critic.conv{w}.b")));
        let feat = tape.add(feat, bias);
        let feat = tape.relu(feat);
        pooled.push(tape.max_axis0(feat));
    }
    let feats = tape.concat1(&pooled);
    let out = tape.matvec(pv.get("critic.out.w"), feats);
    let out = tape.sum_all(out);
    let b = pv.get("critic.out.b");
    Ok(tape.add(out, b))
}

/// Score an essay (probability or one-hot rows) conditioned on topic ids.
pub fn critic_score(
    tape: &mut Tape,
    pv: &ParamVars,
    topic_ids: &[usize],
    essay_rows: Var,
) -> Result<Var> {
    let vocab = tape.value(pv.get("critic.emb")).shape()[0];
    let topics = one_hot_rows(tape, topic_ids, vocab)?;
    let rows = tape.concat_rows(&[topics, essay_rows]);
    score_rows(tape, pv, rows)
}

/// Zero-pad `rows` at the bottom so real and generated inputs share a length.
pub fn pad_to_rows(tape: &mut Tape, rows: Var, n: usize) -> Var {
    if tape.value(rows).shape()[0] >= n {
        rows
    } else {
        tape.pad_rows(rows, 0, n)
    }
}

/// (||grad_{y_hat} D(y_hat)|| - 1)^2 where y_hat = alpha*y_real +
/// (1-alpha)*y_gen enters the critic as a fresh leaf. The returned scalar is
/// still differentiable with respect to the critic parameters because the
/// backward pass itself is recorded on the tape.
pub fn gradient_penalty<F>(
    tape: &mut Tape,
    y_real: Var,
    y_gen: Var,
    alpha: f64,
    critic: F,
) -> Result<Var>
where
    F: FnOnce(&mut Tape, Var) -> Result<Var>,
{
    let a = tape.value(y_real);
    let b = tape.value(y_gen);
    if a.shape() != b.shape() {
        return Err(TegkeError::Shape(format!(
            "interpolation endpoints differ in shape: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mixed = a * alpha + b * (1.0 - alpha);
    let y_hat = tape.leaf(mixed);
    let score = critic(tape, y_hat)?;
    let grads = tape.backward(score);
    let g = grads.wrt(y_hat).ok_or_else(|| {
        TegkeError::Shape("critic output does not depend on its input".into())
    })?;
    let gnorm = tape.norm(g);
    let shifted = tape.add_const(gnorm, -1.0);
    Ok(tape.pow_const(shifted, 2.0))
}

/// Critic loss for one sample: D(gen) - D(real) + lambda * penalty.
pub fn critic_loss(
    tape: &mut Tape,
    pv: &ParamVars,
    topic_ids: &[usize],
    real_rows: Var,
    gen_rows: Var,
    alpha: f64,
    lambda: f64,
) -> Result<Var> {
    let n = tape
        .value(real_rows)
        .shape()[0]
        .max(tape.value(gen_rows).shape()[0]);
    let real_rows = pad_to_rows(tape, real_rows, n);
    let gen_rows = pad_to_rows(tape, gen_rows, n);
    let d_real = critic_score(tape, pv, topic_ids, real_rows)?;
    let d_gen = critic_score(tape, pv, topic_ids, gen_rows)?;
    let gp = gradient_penalty(tape, real_rows, gen_rows, alpha, |t, y| {
        critic_score(t, pv, topic_ids, y)
    })?;
    let diff = tape.sub(d_gen, d_real);
    let gp = tape.mul_const(gp, lambda);
    Ok(tape.add(diff, gp))
}

/// Generator loss: -score_gen - beta * log_likelihood, where the
/// log-likelihood of the ground truth is the negated reconstruction loss.
pub fn generator_adv_loss(tape: &mut Tape, score_gen: Var, log_likelihood: Var, beta: f64) -> Var {
    let neg = tape.neg(score_gen);
    let ll = tape.mul_const(log_likelihood, beta);
    tape.sub(neg, ll)
}
