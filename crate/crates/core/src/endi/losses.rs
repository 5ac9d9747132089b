//! Regularizers and the opponent-modelling loss, each available as tape
//! nodes and as a standalone value-plus-gradient function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{manhattan, Action, GridPos};

use super::tape::{Tape, Var};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// A scalar with its gradient against each input vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub value: f64,
    pub grads: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NllReport {
    pub value: f64,
    /// Gradient against each predicted distribution.
    pub grads: Vec<Vec<f64>>,
    /// How many actual-action probabilities hit the floor.
    pub floored: usize,
}

fn column(tape: &mut Tape, xs: &[f64]) -> Var {
    tape.leaf(xs.len(), 1, xs.to_vec())
}

fn target_prob(n_agents: usize) -> Result<f64> {
    if n_agents == 0 {
        return Err(Error::NotEnoughAgents(0));
    }
    Ok(1.0 / n_agents as f64)
}

/// Σ_e KL(Bernoulli(ρ_e) ‖ Bernoulli(1/n)) from selection probabilities.
pub fn kl_on_tape(tape: &mut Tape, rho: Var, n_agents: usize) -> Result<Var> {
    let q = target_prob(n_agents)?;
    let ln_rho = tape.log(rho, 0.0);
    let not_rho = tape.one_minus(rho);
    let ln_not = tape.log(not_rho, 0.0);
    let a = tape.add_scalar(ln_rho, -q.ln());
    let b = tape.add_scalar(ln_not, -(1.0 - q).ln());
    let pa = tape.mul(rho, a);
    let pb = tape.mul(not_rho, b);
    let s = tape.add(pa, pb);
    Ok(tape.sum(s))
}

/// The same divergence from selection logits, stable for saturated ρ.
pub fn kl_from_logits_on_tape(tape: &mut Tape, selection: Var, n_agents: usize) -> Result<Var> {
    let q = target_prob(n_agents)?;
    let rho = tape.sigmoid(selection);
    let not_rho = tape.one_minus(rho);
    // ln ρ = −softplus(−ℓ), ln(1−ρ) = −softplus(ℓ)
    let neg = tape.scale(selection, -1.0);
    let sp_neg = tape.softplus(neg);
    let sp_pos = tape.softplus(selection);
    let ln_rho = tape.scale(sp_neg, -1.0);
    let ln_not = tape.scale(sp_pos, -1.0);
    let a = tape.add_scalar(ln_rho, -q.ln());
    let b = tape.add_scalar(ln_not, -(1.0 - q).ln());
    let pa = tape.mul(rho, a);
    let pb = tape.mul(not_rho, b);
    let s = tape.add(pa, pb);
    Ok(tape.sum(s))
}

pub fn kl_to_target(rho: &[f64], n_agents: usize) -> Result<Objective> {
    if let Some(&bad) = rho.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::ProbabilityOutOfRange(bad));
    }
    let mut tape = Tape::new();
    let r = column(&mut tape, rho);
    let kl = kl_on_tape(&mut tape, r, n_agents)?;
    let g = tape.backward(kl)?;
    Ok(Objective {
        value: tape.item(kl),
        grads: vec![g.of(r).to_vec()],
    })
}

/// |Σ self − Σ others / (n − 1)|.
pub fn reg_num_on_tape(tape: &mut Tape, m_self: Var, m_others: Var, n_agents: usize) -> Result<Var> {
    if n_agents < 2 {
        return Err(Error::NotEnoughAgents(n_agents));
    }
    let cs = tape.sum(m_self);
    let co = tape.sum(m_others);
    let share = tape.scale(co, 1.0 / (n_agents - 1) as f64);
    let diff = tape.sub(cs, share);
    Ok(tape.abs(diff))
}

fn check_masks(m_self: &[f64], m_others: &[f64]) -> Result<()> {
    if m_self.len() != m_others.len() {
        return Err(Error::Shape(format!(
            "self mask has {} entries, others mask {}",
            m_self.len(),
            m_others.len()
        )));
    }
    Ok(())
}

/// Balanced-count regularizer. Inputs may be hard 0/1 masks or relaxed
/// weights; gradients are against both.
pub fn reg_num(m_self: &[f64], m_others: &[f64], n_agents: usize) -> Result<Objective> {
    check_masks(m_self, m_others)?;
    let mut tape = Tape::new();
    let s = column(&mut tape, m_self);
    let o = column(&mut tape, m_others);
    let r = reg_num_on_tape(&mut tape, s, o, n_agents)?;
    let g = tape.backward(r)?;
    Ok(Objective {
        value: tape.item(r),
        grads: vec![g.of(s).to_vec(), g.of(o).to_vec()],
    })
}

/// Per-entity distances to the agent itself and to the closest other agent.
pub fn entity_distances(
    entity_pos: &[GridPos],
    agent_pos: GridPos,
    other_pos: &[GridPos],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if other_pos.is_empty() {
        return Err(Error::NoOtherAgents);
    }
    let own = entity_pos.iter().map(|&e| manhattan(e, agent_pos) as f64).collect();
    let other = entity_pos
        .iter()
        .map(|&e| other_pos.iter().map(|&o| manhattan(e, o)).min().unwrap_or(0) as f64)
        .collect();
    Ok((own, other))
}

/// Σ self-weight · own distance + Σ others-weight · closest-other distance.
pub fn reg_dis_on_tape(tape: &mut Tape, m_self: Var, m_others: Var, own: &[f64], other: &[f64]) -> Var {
    let d_own = column(tape, own);
    let d_other = column(tape, other);
    let a = tape.mul(m_self, d_own);
    let b = tape.mul(m_others, d_other);
    let s = tape.add(a, b);
    tape.sum(s)
}

pub fn reg_dis(
    m_self: &[f64],
    m_others: &[f64],
    entity_pos: &[GridPos],
    agent_pos: GridPos,
    other_pos: &[GridPos],
) -> Result<Objective> {
    check_masks(m_self, m_others)?;
    if entity_pos.len() != m_self.len() {
        return Err(Error::Shape(format!(
            "{} positions for {} mask entries",
            entity_pos.len(),
            m_self.len()
        )));
    }
    let (own, other) = entity_distances(entity_pos, agent_pos, other_pos)?;
    let mut tape = Tape::new();
    let s = column(&mut tape, m_self);
    let o = column(&mut tape, m_others);
    let r = reg_dis_on_tape(&mut tape, s, o, &own, &other);
    let g = tape.backward(r)?;
    Ok(Objective {
        value: tape.item(r),
        grads: vec![g.of(s).to_vec(), g.of(o).to_vec()],
    })
}

/// −Σ_k ln p_k(a_k) over rows of `probs` (k × 5). Returns the node and how
/// many picked probabilities were floored.
pub fn nll_on_tape(tape: &mut Tape, probs: Var, actions: &[Action]) -> Result<(Var, usize)> {
    let (k, c) = tape.shape(probs);
    if k != actions.len() || c != Action::COUNT {
        return Err(Error::BadActions {
            expected: k,
            got: actions.len(),
        });
    }
    let index = actions.iter().enumerate().map(|(i, a)| Some(i * c + a.index())).collect();
    let picked = tape.gather(probs, index, k, 1);
    let floored = tape.value(picked).iter().filter(|&&p| p <= PROB_FLOOR).count();
    let logs = tape.log(picked, PROB_FLOOR);
    let s = tape.sum(logs);
    Ok((tape.scale(s, -1.0), floored))
}

pub fn opponent_nll(pred: &[Vec<f64>], actual: &[Action]) -> Result<NllReport> {
    if pred.len() != actual.len() {
        return Err(Error::BadActions {
            expected: pred.len(),
            got: actual.len(),
        });
    }
    for p in pred {
        if p.len() != Action::COUNT {
            return Err(Error::Shape(format!("distribution over {} actions", p.len())));
        }
        if let Some(&bad) = p.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::ProbabilityOutOfRange(bad));
        }
    }
    let mut tape = Tape::new();
    let probs = tape.leaf(pred.len(), Action::COUNT, pred.iter().flatten().copied().collect());
    let (nll, floored) = nll_on_tape(&mut tape, probs, actual)?;
    let g = tape.backward(nll)?;
    let flat = g.of(probs);
    Ok(NllReport {
        value: tape.item(nll),
        grads: flat.chunks(Action::COUNT).map(<[f64]>::to_vec).collect(),
        floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_vanishes_at_target() {
        let k = kl_to_target(&[0.5, 0.5, 0.5], 2).unwrap();
        assert_eq!(k.value, 0.0);
        assert!(kl_to_target(&[1.0], 2).is_err());
        assert!(kl_to_target(&[0.0], 2).is_err());
    }

    #[test]
    fn nll_floors_zero_probability() {
        let r = opponent_nll(&[vec![1.0, 0.0, 0.0, 0.0, 0.0]], &[Action::Down]).unwrap();
        assert_eq!(r.floored, 1);
        assert!((r.value + PROB_FLOOR.ln()).abs() < 1e-12);
        assert!(r.value.is_finite());
    }

    #[test]
    fn dis_needs_other_agents() {
        let p = GridPos::new(0, 0);
        assert!(reg_dis(&[1.0], &[0.0], &[p], p, &[]).is_err());
    }
}
