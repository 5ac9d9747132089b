//! Entity-level subgoal division: toy grounding, Gumbel-Softmax entity
//! masks, the two policy heads, regularizers and the opponent-modelling loss,
//! all on a small reverse-mode tape.

pub mod checkpoint;
pub mod gradcheck;
pub mod losses;
pub mod mask;
pub mod model;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod view;

pub use losses::{kl_to_target, opponent_nll, reg_dis, reg_num, NllReport, Objective, PROB_FLOOR};
pub use mask::{gumbel_mask, gumbel_mask_with_noise, sample_noise, GumbelNoise, SubgoalState};
pub use model::{
    endi_loss, endi_step, endi_step_with_noise, ground_toy, greedy, self_logits_with_mask, subgoal_logits,
    EndiConfig, LossReport, MaskMode, Regularizer, StepOutput, Targets,
};
pub use params::{EndiParams, GroundParams, DEFAULT_WIDTH};
pub use tensor::Tensor;
pub use view::{mask_apply, AgentView, ViewItem, Vocabulary};
