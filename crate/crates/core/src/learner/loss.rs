//! Weighted cross-entropy plus the exponential face loss.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::inputs::SampleInputs;
use super::model::{ModelParams, Prediction};
use crate::error::{Error, Result};

/// Probabilities are clamped to this before taking logs.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Include the exponential face term.
    pub face_loss: bool,
    /// `+1` penalises confidence in the wrong class; `-1` is the literal form.
    pub face_loss_sign: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            face_loss: true,
            face_loss_sign: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub classification: f64,
    pub face: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn scaled(self, s: f64) -> Self {
        Self {
            classification: self.classification * s,
            face: self.face * s,
            total: self.total * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.classification.is_finite() && self.face.is_finite() && self.total.is_finite()
    }
}

/// Summed loss over all candidates and its gradient w.r.t. the two logits.
pub fn loss_and_logit_grad(pred: &Prediction, labels: &[u8], w: f64, cfg: &LossConfig) -> Result<(LossBreakdown, Array2<f64>)> {
    if pred.len() != labels.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), labels.len())));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidInput(format!("class weight must be positive, got {w}")));
    }
    let mut lc = 0.0;
    let mut lf = 0.0;
    let mut d = Array2::zeros((labels.len(), 2));
    for (i, (&[p0, p1], &y)) in pred.probs.iter().zip(labels).enumerate() {
        // dp1/dz1 = -dp1/dz0 = p0 p1
        let (right, wrong) = if y == 1 { (1, 0) } else { (0, 1) };
        let pr = [p0, p1][right];
        let pw = [p0, p1][wrong];
        let weight = if y == 1 { w } else { 1.0 };
        lc -= weight * pr.max(PROB_EPS).ln();
        if pr > PROB_EPS {
            // d(-log p_r)/dz_r = -(1 - p_r) = -p_w
            d[[i, right]] -= weight * pw;
            d[[i, wrong]] += weight * pw;
        }
        if cfg.face_loss {
            let e = pw.exp();
            lf += cfg.face_loss_sign * e;
            let g = cfg.face_loss_sign * e * p0 * p1;
            d[[i, wrong]] += g;
            d[[i, right]] -= g;
        }
    }
    Ok((
        LossBreakdown {
            classification: lc,
            face: lf,
            total: lc + lf,
        },
        d,
    ))
}

/// Loss of a training-mode forward pass and its gradient for every
/// parameter block (sum over candidates).
pub fn compound_loss(
    params: &ModelParams,
    inputs: &SampleInputs,
    labels: &[u8],
    w: f64,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, ModelParams)> {
    let (pred, cache) = params.forward(inputs, true)?;
    let (loss, dlogits) = loss_and_logit_grad(&pred, labels, w, cfg)?;
    Ok((loss, params.backward(inputs, &cache, &dlogits)))
}
