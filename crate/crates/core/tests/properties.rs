use proptest::prelude::*;

use endi::endi::checkpoint;
use endi::endi::{gumbel_mask_with_noise, mask_apply, AgentView, EndiParams, Vocabulary, DEFAULT_WIDTH};
use endi::manualgen::Split;
use endi::transcript::Transcript;
use endi::{Action, EnvKind, Episode, EpisodeConfig, Rng, Stage};

fn env_stage() -> impl Strategy<Value = (EnvKind, Stage)> {
    prop_oneof![
        (1u8..=5).prop_map(|s| (EnvKind::Rtfm, Stage::new(s).unwrap())),
        (1u8..=3).prop_map(|s| (EnvKind::Messenger, Stage::new(s).unwrap())),
    ]
}

fn action() -> impl Strategy<Value = Action> {
    (0usize..5).prop_map(|i| Action::ALL[i])
}

fn drive(cfg: EpisodeConfig, script: &[Action]) -> Episode {
    let mut ep = Episode::new(cfg).unwrap();
    let n = ep.n_agents();
    for chunk in script.chunks(n) {
        if ep.is_done() || chunk.len() < n {
            break;
        }
        ep.step(chunk).unwrap();
    }
    ep
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relaxed_rows_lie_on_the_simplex(
        logits in prop::collection::vec((-8.0f64..8.0, -8.0f64..8.0), 1..12),
        noise in prop::collection::vec((-3.0f64..6.0, -3.0f64..6.0), 12),
        tau in 0.05f64..5.0,
    ) {
        let l: Vec<[f64; 2]> = logits.iter().map(|&(a, b)| [a, b]).collect();
        let g: Vec<[f64; 2]> = noise[..l.len()].iter().map(|&(a, b)| [a, b]).collect();
        let s = gumbel_mask_with_noise(&l, &g, tau).unwrap();
        for (i, row) in s.relaxed.iter().enumerate() {
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
            // Gumbel-max: the hard pick is the argmax of the perturbed logits.
            prop_assert_eq!(s.mask[i], l[i][1] + g[i][1] > l[i][0] + g[i][0]);
            let expect_rho = 1.0 / (1.0 + (l[i][0] - l[i][1]).exp());
            prop_assert!((s.rho[i] - expect_rho).abs() < 1e-12);
        }
        prop_assert_eq!(s.selected() + s.complement().iter().filter(|&&m| m).count(), l.len());
    }

    #[test]
    fn masks_partition_view_entities(
        (env, stage) in env_stage(),
        seed in 0u64..10_000,
        bits in prop::collection::vec(any::<bool>(), 16),
    ) {
        let vocab = Vocabulary::for_split(Split::Train);
        let ep = Episode::new(EpisodeConfig::new(env, stage, Split::Train, seed, 2)).unwrap();
        let view = AgentView::from_episode(&ep, 0, &vocab).unwrap();
        let mask = &bits[..view.n_entities()];
        let (mine, theirs) = mask_apply(&view, mask).unwrap();
        prop_assert_eq!(mine.n_entities() + theirs.n_entities(), view.n_entities());
        for e in &mine.entities {
            prop_assert!(!theirs.entities.contains(e));
        }
        prop_assert_eq!(&mine.fixed, &view.fixed);
        prop_assert_eq!(&theirs.fixed, &view.fixed);
    }

    #[test]
    fn same_inputs_same_transcript(
        (env, stage) in env_stage(),
        seed in any::<u64>(),
        script in prop::collection::vec(action(), 0..200),
    ) {
        let cfg = EpisodeConfig::new(env, stage, Split::Train, seed, 2);
        let a = drive(cfg, &script);
        let b = drive(cfg, &script);
        let text = a.transcript().to_text();
        prop_assert_eq!(&text, &b.transcript().to_text());
        let parsed = Transcript::parse(&text).unwrap();
        prop_assert_eq!(&parsed.to_text(), &text);
        prop_assert_eq!(parsed.replay().unwrap().to_text(), text);
    }

    #[test]
    fn step_rewards_add_up_to_returns(
        (env, stage) in env_stage(),
        seed in any::<u64>(),
        script in prop::collection::vec(action(), 0..300),
    ) {
        let ep = drive(EpisodeConfig::new(env, stage, Split::Train, seed, 2), &script);
        let mut sums = vec![0.0; ep.n_agents()];
        for s in &ep.transcript().steps {
            for (acc, r) in sums.iter_mut().zip(&s.rewards) {
                *acc += r;
            }
        }
        for (s, r) in sums.iter().zip(ep.returns()) {
            prop_assert!((s - r).abs() < 1e-9, "{} vs {}", s, r);
        }
    }

    #[test]
    fn agents_stay_on_the_grid(
        (env, stage) in env_stage(),
        seed in any::<u64>(),
        script in prop::collection::vec(action(), 0..200),
    ) {
        let ep = drive(EpisodeConfig::new(env, stage, Split::Train, seed, 2), &script);
        let size = ep.size();
        prop_assert!(ep.agents().iter().all(|a| a.pos.on_grid(size, size)));
        prop_assert!(ep.entities().iter().all(|e| e.pos.on_grid(size, size)));
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), vocab in 1usize..40, width in 1usize..8, n in 2usize..4) {
        let mut rng = Rng::split(seed, "ckpt");
        let p = EndiParams::random(vocab, width, n, 1.0, &mut rng).unwrap();
        let bytes = checkpoint::encode(&p).unwrap();
        prop_assert_eq!(checkpoint::decode(&bytes).unwrap(), p);
    }
}

#[test]
fn default_width_checkpoint_is_bit_exact_on_disk() {
    let vocab = Vocabulary::for_split(Split::Train);
    let p = EndiParams::random(vocab.len(), DEFAULT_WIDTH, 3, 0.2, &mut Rng::split(1, "p")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.ckpt");
    checkpoint::save(&p, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    for (a, b) in p.tensors().iter().zip(back.tensors()) {
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
