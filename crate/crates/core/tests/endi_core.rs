use endi::endi::gradcheck::{check, check_params};
use endi::endi::model::policy_head;
use endi::endi::*;
use endi::geom::GridPos;
use endi::manualgen::Split;
use endi::{Action, EnvKind, Episode, EpisodeConfig, Rng, Stage};

fn view(env: EnvKind, stage: Stage, seed: u64, n: usize) -> (AgentView, Vocabulary) {
    let vocab = Vocabulary::for_split(Split::Train);
    let ep = Episode::new(EpisodeConfig::new(env, stage, Split::Train, seed, n)).unwrap();
    (AgentView::from_episode(&ep, 0, &vocab).unwrap(), vocab)
}

fn random_params(vocab: &Vocabulary, n: usize, seed: u64) -> EndiParams {
    let mut rng = Rng::split(seed, "params");
    EndiParams::random(vocab.len(), DEFAULT_WIDTH, n, 0.3, &mut rng).unwrap()
}

#[test]
fn zero_params_ground_to_zero() {
    let (v, vocab) = view(EnvKind::Rtfm, Stage::S1, 7, 2);
    let p = EndiParams::zeros(vocab.len(), 16, 2).unwrap();
    let x = ground_toy(&v, &p).unwrap();
    assert_eq!(x.shape(), &[8, 8, 16]);
    assert!(x.data().iter().all(|&z| z == 0.0));
    assert!(subgoal_logits(&v, &p).unwrap().iter().all(|l| *l == [0.0, 0.0]));
}

#[test]
fn sentence_order_does_not_matter() {
    let (v, vocab) = view(EnvKind::Rtfm, Stage::S5, 3, 2);
    let p = random_params(&vocab, 2, 1);
    let mut shuffled = v.clone();
    shuffled.manual.reverse();
    shuffled.manual.rotate_left(1);
    assert_eq!(ground_toy(&v, &p).unwrap(), ground_toy(&shuffled, &p).unwrap());
}

#[test]
fn unknown_tokens_are_rejected() {
    let vocab = Vocabulary::for_split(Split::Train);
    assert!(vocab.id("zorblax").is_err());
    let (v, _) = view(EnvKind::Rtfm, Stage::S1, 1, 2);
    let small = EndiParams::zeros(3, 4, 2).unwrap();
    assert!(ground_toy(&v, &small).is_err());
    // new-word episodes need the new-word vocabulary
    let ep = Episode::new(EpisodeConfig::new(EnvKind::Rtfm, Stage::S2, Split::EvalNew, 1, 2)).unwrap();
    assert!(AgentView::from_episode(&ep, 0, &vocab).is_err());
    assert!(AgentView::from_episode(&ep, 0, &Vocabulary::for_split(Split::EvalNew)).is_ok());
}

#[test]
fn reordering_entities_permutes_logits() {
    let (v, vocab) = view(EnvKind::Rtfm, Stage::S2, 11, 2);
    let p = random_params(&vocab, 2, 2);
    let base = subgoal_logits(&v, &p).unwrap();
    let mut swapped = v.clone();
    swapped.entities.swap(0, 3);
    let after = subgoal_logits(&swapped, &p).unwrap();
    assert_eq!(after[0], base[3]);
    assert_eq!(after[3], base[0]);
    assert_eq!(after[1], base[1]);
}

#[test]
fn off_grid_entity_is_an_error() {
    let (mut v, vocab) = view(EnvKind::Rtfm, Stage::S1, 2, 2);
    v.entities[0].pos = GridPos::new(8, 0);
    assert!(subgoal_logits(&v, &random_params(&vocab, 2, 0)).is_err());
}

#[test]
fn mask_apply_partitions_entities() {
    let (v, _) = view(EnvKind::Rtfm, Stage::S2, 4, 2);
    let n = v.n_entities();
    let (all, none) = mask_apply(&v, &vec![true; n]).unwrap();
    assert_eq!(all.entities, v.entities);
    assert!(none.entities.is_empty());
    assert_eq!(none.fixed, v.fixed);
    let mask: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let (a, b) = mask_apply(&v, &mask).unwrap();
    assert_eq!(a.entities.len() + b.entities.len(), n);
    for e in &v.entities {
        assert!(a.entities.contains(e) != b.entities.contains(e));
    }
    assert!(mask_apply(&v, &[true]).is_err());
}

#[test]
fn masked_grounding_matches_removed_entities() {
    let (v, vocab) = view(EnvKind::Rtfm, Stage::S3, 8, 2);
    let p = random_params(&vocab, 2, 3);
    let mask: Vec<bool> = (0..v.n_entities()).map(|i| i != 1).collect();
    let (kept, _) = mask_apply(&v, &mask).unwrap();
    // π_self on the full view with entity 1 masked equals π_self on a view
    // where entity 1 does not exist
    let a = self_logits_with_mask(&v, &p, &mask).unwrap();
    let b = self_logits_with_mask(&kept, &p, &vec![true; kept.n_entities()]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn kl_closed_forms() {
    assert_eq!(kl_to_target(&[0.5; 4], 2).unwrap().value, 0.0);
    assert!(kl_to_target(&[1.0 / 3.0; 5], 3).unwrap().value.abs() < 1e-15);
    let near_one = kl_to_target(&[1.0 - 1e-12; 4], 2).unwrap().value;
    assert!((near_one - 4.0 * 2f64.ln()).abs() < 1e-9, "{near_one}");
}

#[test]
fn reg_num_closed_forms() {
    let m = |k: usize, n: usize| (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let inv = |v: &[f64]| v.iter().map(|x| 1.0 - x).collect::<Vec<f64>>();
    let a = m(3, 6);
    assert_eq!(reg_num(&a, &inv(&a), 2).unwrap().value, 0.0);
    let b = m(4, 6);
    assert_eq!(reg_num(&b, &inv(&b), 2).unwrap().value, 2.0);
    let c = m(2, 6);
    assert_eq!(reg_num(&c, &inv(&c), 3).unwrap().value, 0.0);
    assert!(reg_num(&c, &inv(&c), 1).is_err());
}

#[test]
fn reg_dis_closed_forms() {
    let p = GridPos::new;
    let v = reg_dis(&[1.0, 0.0], &[0.0, 1.0], &[p(1, 2), p(3, 4)], p(0, 0), &[p(3, 3)]).unwrap();
    assert_eq!(v.value, 4.0);
    let z = reg_dis(&[1.0, 0.0], &[0.0, 1.0], &[p(0, 0), p(3, 3)], p(0, 0), &[p(3, 3)]).unwrap();
    assert_eq!(z.value, 0.0);
    let farther = reg_dis(&[1.0, 0.0], &[0.0, 1.0], &[p(1, 3), p(3, 4)], p(0, 0), &[p(3, 3)]).unwrap();
    assert_eq!(farther.value, 5.0);
    // closest of several others
    let multi = reg_dis(&[0.0], &[1.0], &[p(5, 5)], p(0, 0), &[p(9, 9), p(5, 6)]).unwrap();
    assert_eq!(multi.value, 1.0);
}

#[test]
fn opponent_nll_closed_forms() {
    let uniform = vec![0.2; 5];
    let one = opponent_nll(&[uniform.clone()], &[Action::Left]).unwrap();
    assert!((one.value - 5f64.ln()).abs() < 1e-15);
    assert_eq!(one.floored, 0);
    let two = opponent_nll(&[uniform.clone(), uniform], &[Action::Up, Action::Stay]).unwrap();
    assert!((two.value - 2.0 * 5f64.ln()).abs() < 1e-15);
    let hit = opponent_nll(&[vec![0.0, 0.0, 1.0, 0.0, 0.0]], &[Action::ALL[2]]).unwrap();
    assert_eq!(hit.value, 0.0);
    assert!(opponent_nll(&[vec![0.5; 4]], &[Action::Up]).is_err());
}

#[test]
fn endi_step_shapes_and_determinism() {
    for (n, heads) in [(2, 1), (3, 2)] {
        let (v, vocab) = view(EnvKind::Rtfm, Stage::S1, 5, n);
        let p = random_params(&vocab, n, 4);
        let cfg = EndiConfig::default();
        let a = endi_step(&v, &p, &cfg, &mut Rng::split(9, "step")).unwrap();
        let b = endi_step(&v, &p, &cfg, &mut Rng::split(9, "step")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.others.len(), heads);
        for d in &a.others {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(a.subgoal.mask.len(), v.n_entities());
    }
}

#[test]
fn endi_step_checks_inputs() {
    let (v, vocab) = view(EnvKind::Rtfm, Stage::S1, 5, 2);
    let p3 = random_params(&vocab, 3, 4);
    let mut rng = Rng::split(0, "x");
    assert!(endi_step(&v, &p3, &EndiConfig::default(), &mut rng).is_err());
    let p = random_params(&vocab, 2, 4);
    let cold = EndiConfig {
        tau: 0.0,
        ..EndiConfig::default()
    };
    assert!(endi_step(&v, &p, &cold, &mut rng).is_err());
}

#[test]
fn messenger_views_work_end_to_end() {
    let (v, vocab) = view(EnvKind::Messenger, Stage::S2, 6, 2);
    assert_eq!(v.n_entities(), 5);
    let p = random_params(&vocab, 2, 5);
    let noise = sample_noise(5, &mut Rng::split(1, "n"));
    let t = Targets {
        self_action: Action::Up,
        advantage: 1.0,
        others_actions: vec![Action::Stay],
    };
    let r = endi_loss(&v, &p, &EndiConfig::default(), &noise, &t).unwrap();
    assert!(r.is_finite());
    assert!(r.key_values().contains("opponent_nll="));
}

#[test]
fn loss_is_weighted_sum_of_parts() {
    let (v, vocab) = view(EnvKind::Rtfm, Stage::S2, 12, 2);
    let p = random_params(&vocab, 2, 6);
    let noise = sample_noise(v.n_entities(), &mut Rng::split(2, "n"));
    let t = Targets {
        self_action: Action::Down,
        advantage: -0.4,
        others_actions: vec![Action::Left],
    };
    for reg in [Regularizer::None, Regularizer::Num, Regularizer::Dis] {
        let cfg = EndiConfig {
            regularizer: reg,
            ..EndiConfig::default()
        };
        let r = endi_loss(&v, &p, &cfg, &noise, &t).unwrap();
        let sum = cfg.policy_weight * r.policy + cfg.opponent_weight * r.opponent_nll + cfg.kl_weight * r.kl + cfg.reg_weight * r.reg;
        assert!((r.total - sum).abs() < 1e-12);
    }
}

#[test]
fn straight_through_reaches_the_mixer() {
    let (v, vocab) = view(EnvKind::Rtfm, Stage::S2, 13, 2);
    let p = random_params(&vocab, 2, 7);
    let noise = sample_noise(v.n_entities(), &mut Rng::split(3, "n"));
    let t = Targets {
        self_action: Action::Right,
        advantage: 1.0,
        others_actions: vec![Action::Up],
    };
    let cfg = EndiConfig {
        kl_weight: 0.0,
        reg_weight: 0.0,
        ..EndiConfig::default()
    };
    let r = endi_loss(&v, &p, &cfg, &noise, &t).unwrap();
    // with no regularizer the only path into the mixer is through the mask
    assert!(r.grads.mix.norm() > 0.0);
}

#[test]
fn argmax_survives_rescaling() {
    let mut rng = Rng::split(4, "scale");
    for _ in 0..100 {
        let feats: Vec<f64> = (0..16).map(|_| rng.uniform() * 2.0 - 1.0).collect();
        let w = Tensor::uniform(&[16, 5], 1.0, &mut rng);
        let b = Tensor::uniform(&[1, 5], 1.0, &mut rng);
        let c = 0.1 + 10.0 * rng.uniform();
        let scaled: Vec<f64> = feats.iter().map(|f| f * c).collect();
        let w_inv = Tensor::new(vec![16, 5], w.data().iter().map(|x| x / c).collect()).unwrap();
        let a = policy_head(&feats, &w, &b).unwrap();
        let z = policy_head(&scaled, &w_inv, &b).unwrap();
        assert_eq!(greedy(&a), greedy(&z));
    }
}

#[test]
fn hidden_entities_do_not_leak_into_self_policy() {
    let (v, vocab) = view(EnvKind::Rtfm, Stage::S2, 14, 2);
    let p = random_params(&vocab, 2, 8);
    let none = vec![false; v.n_entities()];
    let base = self_logits_with_mask(&v, &p, &none).unwrap();
    let mut moved = v.clone();
    for (i, e) in moved.entities.iter_mut().enumerate() {
        e.pos = GridPos::new(i % 8, 7 - i % 8);
        e.tokens = vec![vocab.id("goblin").unwrap(), vocab.id("fire").unwrap()];
    }
    let after = self_logits_with_mask(&moved, &p, &none).unwrap();
    assert_eq!(base.map(f64::to_bits), after.map(f64::to_bits));
}

#[test]
fn standalone_gradients_match_differences() {
    let mut rng = Rng::split(5, "fd");
    for _ in 0..20 {
        let n = 2 + rng.below(2);
        let rho: Vec<f64> = (0..5).map(|_| 0.05 + 0.9 * rng.uniform()).collect();
        let k = kl_to_target(&rho, n).unwrap();
        let f = |x: &[Vec<f64>]| kl_to_target(&x[0], n).unwrap().value;
        assert!(check(&f, &[rho.clone()], &k.grads, None, &mut rng).max_rel_err < 1e-6);

        let other: Vec<f64> = rho.iter().map(|r| 1.0 - r).collect();
        let g = reg_num(&rho, &other, n).unwrap();
        let f = |x: &[Vec<f64>]| reg_num(&x[0], &x[1], n).unwrap().value;
        assert!(check(&f, &[rho.clone(), other.clone()], &g.grads, None, &mut rng).max_rel_err < 1e-6);
    }
}

#[test]
fn full_loss_gradients_match_differences() {
    let (v, vocab) = view(EnvKind::Rtfm, Stage::S3, 21, 2);
    let mut rng = Rng::split(6, "fd");
    for draw in 0..3 {
        let p = random_params(&vocab, 2, 100 + draw);
        let noise = sample_noise(v.n_entities(), &mut rng);
        let cfg = EndiConfig {
            mask_mode: MaskMode::Relaxed,
            ..EndiConfig::default()
        };
        let t = Targets {
            self_action: Action::Left,
            advantage: 0.5,
            others_actions: vec![Action::Down],
        };
        let r = endi_loss(&v, &p, &cfg, &noise, &t).unwrap();
        let loss = |q: &EndiParams| endi_loss(&v, q, &cfg, &noise, &t).unwrap().total;
        let c = check_params(&loss, &p, &r.grads, Some(10), &mut rng);
        assert!(c.max_rel_err < 1e-6, "{c:?}");
    }
}
