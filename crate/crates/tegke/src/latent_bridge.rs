//! Teacher and student latent networks and the KL knowledge-transfer loss.
//!
//! The teacher sees both the topic summary and the essay summary; the student
//! sees topics alone. Each network is two affine heads, one per latent slot,
//! producing the mean and log-variance of a diagonal Gaussian. Knowledge is
//! transferred by minimizing KL(student ‖ teacher) per slot, with the teacher
//! treated as a constant so its training stays independent.

use crate::nn::{affine, ParamStore, ParamVars};
use crate::tape::{Tape, Var};
use crate::{Result, TegkeError};
use rand_chacha::ChaCha8Rng;

/// Mean and log-variance of a diagonal Gaussian over the latent space.
#[derive(Debug, Clone, Copy)]
pub struct GaussianParams {
    pub mu: Var,
    pub log_var: Var,
}

/// Which latent slot a sample fills: z1 seeds the decoder state, z2 is fed at
/// every decoding step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentSlot {
    Z1,
    Z2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentSource {
    Teacher,
    Student,
}

#[derive(Debug, Clone, Copy)]
pub struct LatentSample {
    pub z: Var,
    pub source: LatentSource,
    pub slot: LatentSlot,
}

pub fn init_latent_heads(
    params: &mut ParamStore,
    d_enc: usize,
    d_z: usize,
    rng: &mut ChaCha8Rng,
) {
    for slot in ["z1", "z2"] {
        params.init_matrix(&format!("teacher.{slot}.w"), 2 * d_z, 2 * d_enc, rng);
        params.init_zeros_vec(&format!("teacher.{slot}.b"), 2 * d_z);
    }
    for slot in ["z1", "z2"] {
        params.init_matrix(&format!("student.{slot}.w"), 2 * d_z, d_enc, rng);
        params.init_zeros_vec(&format!("student.{slot}.b"), 2 * d_z);
    }
}

fn head(tape: &mut Tape, pv: &ParamVars, name: &str, input: Var, d_z: usize) -> GaussianParams {
    let out = affine(
        tape,
        pv.get(&format!("{name}.w")),
        input,
        pv.get(&format!("{name}.b")),
    );
    GaussianParams {
        mu: tape.slice1(out, 0, d_z),
        log_var: tape.slice1(out, d_z, d_z),
    }
}

/// Teacher heads over `concat(x_enc, y_enc)`. The teacher requires the essay
/// summary by construction.
pub fn teacher_params(
    tape: &mut Tape,
    pv: &ParamVars,
    x_enc: Var,
    y_enc: Var,
    d_z: usize,
) -> (GaussianParams, GaussianParams) {
    let joint = tape.concat1(&[x_enc, y_enc]);
    (
        head(tape, pv, "teacher.z1", joint, d_z),
        head(tape, pv, "teacher.z2", joint, d_z),
    )
}

/// Student heads over `x_enc` alone.
pub fn student_params(
    tape: &mut Tape,
    pv: &ParamVars,
    x_enc: Var,
    d_z: usize,
) -> (GaussianParams, GaussianParams) {
    (
        head(tape, pv, "student.z1", x_enc, d_z),
        head(tape, pv, "student.z2", x_enc, d_z),
    )
}

/// Reparametrized draw: z = mu + exp(log_var / 2) ⊙ eps.
pub fn sample(
    tape: &mut Tape,
    params: GaussianParams,
    eps: Var,
    source: LatentSource,
    slot: LatentSlot,
) -> Result<LatentSample> {
    let d = tape.value(params.mu).len();
    if tape.value(eps).len() != d {
        return Err(TegkeError::Shape(format!(
            "eps length {} does not match latent dimension {d}",
            tape.value(eps).len()
        )));
    }
    let half_lv = tape.mul_const(params.log_var, 0.5);
    let sigma = tape.exp(half_lv);
    let noise = tape.mul(sigma, eps);
    let z = tape.add(params.mu, noise);
    Ok(LatentSample { z, source, slot })
}

/// KL(N(mu_s, var_s) ‖ N(mu_t, var_t)) for diagonal Gaussians, closed form,
/// summed over dimensions. The teacher side is detached: gradients flow to
/// the student only.
pub fn kl_student_to_teacher(
    tape: &mut Tape,
    student: GaussianParams,
    teacher: GaussianParams,
) -> Var {
    let mu_t = tape.detach(teacher.mu);
    let lv_t = tape.detach(teacher.log_var);
    // log(sigma_t / sigma_s) = (lv_t - lv_s) / 2
    let lv_gap = tape.sub(lv_t, student.log_var);
    let log_ratio = tape.mul_const(lv_gap, 0.5);
    let var_s = tape.exp(student.log_var);
    let diff = tape.sub(student.mu, mu_t);
    let diff2 = tape.mul(diff, diff);
    let num = tape.add(var_s, diff2);
    let neg_lv_t = tape.neg(lv_t);
    let inv_var_t = tape.exp(neg_lv_t);
    let ratio = tape.mul(num, inv_var_t);
    let half_ratio = tape.mul_const(ratio, 0.5);
    let per_dim = tape.add(log_ratio, half_ratio);
    let per_dim = tape.add_const(per_dim, -0.5);
    tape.sum_all(per_dim)
}

/// Sum of per-slot KL(student ‖ teacher).
pub fn transfer_loss(
    tape: &mut Tape,
    student: (GaussianParams, GaussianParams),
    teacher: (GaussianParams, GaussianParams),
) -> Var {
    let k1 = kl_student_to_teacher(tape, student.0, teacher.0);
    let k2 = kl_student_to_teacher(tape, student.1, teacher.1);
    tape.add(k1, k2)
}
