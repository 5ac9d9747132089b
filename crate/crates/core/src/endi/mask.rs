//! Per-entity Gumbel-Softmax selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::tape::{sigmoid, Tape, Var};

/// Gumbel perturbations, one pair (not selected, selected) per entity.
pub type GumbelNoise = Vec<[f64; 2]>;

pub fn sample_noise(n: usize, rng: &mut Rng) -> GumbelNoise {
    (0..n).map(|_| [rng.gumbel(), rng.gumbel()]).collect()
}

/// One sampled subgoal division.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgoalState {
    /// (not selected, selected) per entity
    pub logits: Vec<[f64; 2]>,
    /// Selection probability per entity.
    pub rho: Vec<f64>,
    /// Relaxed two-way sample per entity; rows sum to one.
    pub relaxed: Vec<[f64; 2]>,
    /// Hard selection.
    pub mask: Vec<bool>,
    pub tau: f64,
}

impl SubgoalState {
    pub fn complement(&self) -> Vec<bool> {
        self.mask.iter().map(|m| !m).collect()
    }

    pub fn selected(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Mask as 0/1 reals.
    pub fn hard(&self) -> Vec<f64> {
        self.mask.iter().map(|&m| f64::from(u8::from(m))).collect()
    }
}

pub fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(tau))
    }
}

/// Tape nodes for a relaxed sample. Returns (relaxed n×2, hard selection).
pub(crate) fn relaxed_on_tape(tape: &mut Tape, logits: Var, noise: &[[f64; 2]], tau: f64) -> (Var, Vec<bool>) {
    let (n, _) = tape.shape(logits);
    let g = tape.leaf(n, 2, noise.iter().flatten().copied().collect());
    let perturbed = tape.add(logits, g);
    let hard = (0..n)
        .map(|i| {
            let r = tape.row(perturbed, i);
            r[1] > r[0]
        })
        .collect();
    let scaled = tape.scale(perturbed, 1.0 / tau);
    (tape.softmax_rows(scaled), hard)
}

pub fn gumbel_mask_with_noise(logits: &[[f64; 2]], noise: &[[f64; 2]], tau: f64) -> Result<SubgoalState> {
    check_tau(tau)?;
    if noise.len() != logits.len() {
        return Err(Error::Shape(format!(
            "{} noise pairs for {} entities",
            noise.len(),
            logits.len()
        )));
    }
    let mut tape = Tape::new();
    let l = tape.leaf(logits.len(), 2, logits.iter().flatten().copied().collect());
    let (y, mask) = relaxed_on_tape(&mut tape, l, noise, tau);
    let relaxed = (0..logits.len()).map(|i| [tape.row(y, i)[0], tape.row(y, i)[1]]).collect();
    Ok(SubgoalState {
        logits: logits.to_vec(),
        rho: logits.iter().map(|l| sigmoid(l[1] - l[0])).collect(),
        relaxed,
        mask,
        tau,
    })
}

pub fn gumbel_mask(logits: &[[f64; 2]], tau: f64, rng: &mut Rng) -> Result<SubgoalState> {
    check_tau(tau)?;
    let noise = sample_noise(logits.len(), rng);
    gumbel_mask_with_noise(logits, &noise, tau)
}
