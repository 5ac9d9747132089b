use crate::error::{Error, Result};
use crate::geom::Action;
use crate::rng::Rng;

use super::tape::{Tape, Var};
use super::tensor::Tensor;

pub const DEFAULT_WIDTH: usize = 16;
/// Positional channels fed to the goal representations.
pub const POSITION_CHANNELS: usize = 1;

/// Weights of the toy grounding stage.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundParams {
    /// vocab × d
    pub embed: Tensor,
    /// d × d, applied to the bag of an item's own tokens
    pub cell: Tensor,
    /// d × d, applied to manual sentences that share words with the item
    pub manual: Tensor,
    /// d × d, applied to the goal when it shares words with the item
    pub goal: Tensor,
    /// channels × d
    pub position: Tensor,
    /// 1 × d
    pub bias: Tensor,
}

/// All trainable weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EndiParams {
    pub ground: GroundParams,
    /// (9 · 2d) × 2 over the stacked self/others goal maps
    pub mix: Tensor,
    /// 1 × 2
    pub mix_bias: Tensor,
    /// d × 5
    pub self_head: Tensor,
    /// 1 × 5
    pub self_bias: Tensor,
    /// (n − 1) × d × 5, one slab per other agent
    pub others_head: Tensor,
    /// (n − 1) × 5
    pub others_bias: Tensor,
}

pub const PARAM_NAMES: [&str; 12] = [
    "ground.embed",
    "ground.cell",
    "ground.manual",
    "ground.goal",
    "ground.position",
    "ground.bias",
    "mix.weight",
    "mix.bias",
    "self_head.weight",
    "self_head.bias",
    "others_head.weight",
    "others_head.bias",
];

impl EndiParams {
    pub fn zeros(vocab: usize, width: usize, n_agents: usize) -> Result<Self> {
        Self::build(vocab, width, n_agents, Tensor::zeros)
    }

    /// Uniform in `[-scale, scale]`, drawn in `PARAM_NAMES` order.
    pub fn random(vocab: usize, width: usize, n_agents: usize, scale: f64, rng: &mut Rng) -> Result<Self> {
        Self::build(vocab, width, n_agents, |shape| Tensor::uniform(shape, scale, rng))
    }

    fn build(vocab: usize, d: usize, n_agents: usize, mut make: impl FnMut(&[usize]) -> Tensor) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::NotEnoughAgents(n_agents));
        }
        if vocab == 0 || d == 0 {
            return Err(Error::Shape("vocabulary and width must be positive".into()));
        }
        let a = Action::COUNT;
        Ok(Self {
            ground: GroundParams {
                embed: make(&[vocab, d]),
                cell: make(&[d, d]),
                manual: make(&[d, d]),
                goal: make(&[d, d]),
                position: make(&[POSITION_CHANNELS, d]),
                bias: make(&[1, d]),
            },
            mix: make(&[9 * 2 * d, 2]),
            mix_bias: make(&[1, 2]),
            self_head: make(&[d, a]),
            self_bias: make(&[1, a]),
            others_head: make(&[n_agents - 1, d, a]),
            others_bias: make(&[n_agents - 1, a]),
        })
    }

    pub fn width(&self) -> usize {
        self.ground.embed.shape()[1]
    }

    pub fn vocab_size(&self) -> usize {
        self.ground.embed.shape()[0]
    }

    pub fn n_agents(&self) -> usize {
        self.others_head.shape()[0] + 1
    }

    pub fn tensors(&self) -> [&Tensor; 12] {
        let g = &self.ground;
        [
            &g.embed,
            &g.cell,
            &g.manual,
            &g.goal,
            &g.position,
            &g.bias,
            &self.mix,
            &self.mix_bias,
            &self.self_head,
            &self.self_bias,
            &self.others_head,
            &self.others_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 12] {
        let g = &mut self.ground;
        [
            &mut g.embed,
            &mut g.cell,
            &mut g.manual,
            &mut g.goal,
            &mut g.position,
            &mut g.bias,
            &mut self.mix,
            &mut self.mix_bias,
            &mut self.self_head,
            &mut self.self_bias,
            &mut self.others_head,
            &mut self.others_bias,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        PARAM_NAMES.into_iter().zip(self.tensors())
    }

    /// Rebuilds from tensors in `PARAM_NAMES` order, checking that the
    /// shapes agree with each other.
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        let [embed, cell, manual, goal, position, bias, mix, mix_bias, self_head, self_bias, others_head, others_bias]: [Tensor; 12] =
            tensors
                .try_into()
                .map_err(|v: Vec<Tensor>| Error::Shape(format!("expected 12 tensors, got {}", v.len())))?;
        let (v, d) = match embed.shape() {
            [v, d] => (*v, *d),
            s => return Err(Error::Shape(format!("embedding shape {s:?}"))),
        };
        let n = match others_head.shape() {
            [k, _, _] => k + 1,
            s => return Err(Error::Shape(format!("others head shape {s:?}"))),
        };
        let out = Self {
            ground: GroundParams {
                embed,
                cell,
                manual,
                goal,
                position,
                bias,
            },
            mix,
            mix_bias,
            self_head,
            self_bias,
            others_head,
            others_bias,
        };
        let expect = Self::zeros(v, d, n)?;
        for ((name, t), e) in out.named().zip(expect.tensors()) {
            if t.shape() != e.shape() {
                return Err(Error::Shape(format!(
                    "{name}: expected {:?}, got {:?}",
                    e.shape(),
                    t.shape()
                )));
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Records every tensor as a tape leaf.
    pub fn bind(&self, tape: &mut Tape) -> ParamVars {
        let t = self.tensors();
        let all = std::array::from_fn(|i| tape.tensor(t[i]));
        let heads = (0..self.n_agents() - 1)
            .map(|k| {
                let w = tape.tensor(&self.others_head.slab(k).expect("slab in range"));
                let b = tape.leaf(1, Action::COUNT, self.others_bias.data()[k * Action::COUNT..(k + 1) * Action::COUNT].to_vec());
                (w, b)
            })
            .collect();
        ParamVars { all, heads }
    }
}

/// Tape handles for one bound parameter set.
#[derive(Clone, Debug)]
pub struct ParamVars {
    /// Everything except the other-agent heads, in `PARAM_NAMES` order.
    pub all: [Var; 10],
    /// Per-other-agent head slabs, bound separately so gradients can be
    /// folded back into the rank-3 tensor.
    pub heads: Vec<(Var, Var)>,
}

impl ParamVars {
    pub fn embed(&self) -> Var {
        self.all[0]
    }
    pub fn cell(&self) -> Var {
        self.all[1]
    }
    pub fn manual(&self) -> Var {
        self.all[2]
    }
    pub fn goal(&self) -> Var {
        self.all[3]
    }
    pub fn position(&self) -> Var {
        self.all[4]
    }
    pub fn bias(&self) -> Var {
        self.all[5]
    }
    pub fn mix(&self) -> Var {
        self.all[6]
    }
    pub fn mix_bias(&self) -> Var {
        self.all[7]
    }
    pub fn self_head(&self) -> Var {
        self.all[8]
    }
    pub fn self_bias(&self) -> Var {
        self.all[9]
    }

    /// Gradients in the same layout as the parameters.
    pub fn gradients(&self, params: &EndiParams, grads: &super::tape::Grads) -> EndiParams {
        let mut out = params.clone();
        for (t, v) in out.tensors_mut().into_iter().zip(self.all) {
            t.data_mut().copy_from_slice(grads.of(v));
        }
        let slab = params.width() * Action::COUNT;
        for (k, &(w, b)) in self.heads.iter().enumerate() {
            out.others_head.data_mut()[k * slab..(k + 1) * slab].copy_from_slice(grads.of(w));
            out.others_bias.data_mut()[k * Action::COUNT..(k + 1) * Action::COUNT].copy_from_slice(grads.of(b));
        }
        out
    }
}
