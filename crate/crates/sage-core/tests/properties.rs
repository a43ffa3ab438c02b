//! Property tests for the library-wide invariants: softmax algebra,
//! determinism, file-format round trips, vote/rerank tie rules, gate and
//! cost-ledger behavior, and estimator convergence.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sage_core::checkpoint::{load_checkpoint, save_checkpoint};
use sage_core::config::ModelConfig;
use sage_core::estimator::{inverse_gradient_estimate, CategoricalSeqPolicy, ScorePolicy};
use sage_core::gate::{cost_account, gate, step_entropy};
use sage_core::graph::Graph;
use sage_core::model::rmsnorm;
use sage_core::rerank::{ir_guided_vote, rerank_candidates, Candidate, VoteSample};
use sage_core::tensor::Tensor;

fn tensor_strategy() -> impl Strategy<Value = Tensor<f64>> {
    ((1usize..=4, 1usize..=5)).prop_flat_map(|(n, c)| {
        prop::collection::vec(-5.0f64..5.0, n * c)
            .prop_map(move |data| Tensor::new(vec![n, c], data).unwrap())
    })
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(t in tensor_strategy()) {
        let mut g = Graph::new();
        let x = g.leaf(t.clone(), false);
        let sm = g.softmax_rows(x);
        let lsm = g.log_softmax_rows(x);
        let n = t.shape()[0];
        let c = t.shape()[1];
        for i in 0..n {
            let row_sum: f64 = (0..c).map(|j| g.value(sm).at2(i, j)).sum();
            prop_assert!((row_sum - 1.0).abs() < 1e-12);
            let lse: f64 = (0..c).map(|j| g.value(lsm).at2(i, j).exp()).sum();
            prop_assert!((lse - 1.0).abs() < 1e-12);
            for j in 0..c {
                let p = g.value(sm).at2(i, j);
                prop_assert!(p > 0.0 && p < 1.0 + 1e-12);
                prop_assert!((p.ln() - g.value(lsm).at2(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn forward_is_bit_deterministic(t in tensor_strategy()) {
        let run = || {
            let mut g = Graph::new();
            let x = g.leaf(t.clone(), true);
            let e = g.exp(x);
            let s = g.sigmoid(e);
            let m = g.mul(s, x);
            let root = g.mean_all(m);
            let grads = g.backward(root);
            (g.value(root).item(), grads.wrt(x).data().to_vec())
        };
        let (v1, g1) = run();
        let (v2, g2) = run();
        prop_assert_eq!(v1.to_bits(), v2.to_bits());
        for (a, b) in g1.iter().zip(&g2) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly(
        tensors in prop::collection::vec(tensor_strategy(), 1..4),
    ) {
        let named: Vec<(String, Tensor<f64>)> = tensors
            .into_iter()
            .enumerate()
            .map(|(i, t)| (format!("t{i}"), t))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_checkpoint(&path, &named).unwrap();
        let loaded: Vec<(String, Tensor<f64>)> = load_checkpoint(&path).unwrap();
        prop_assert_eq!(loaded.len(), named.len());
        for ((ln, lt), (n, t)) in loaded.iter().zip(&named) {
            prop_assert_eq!(ln, n);
            prop_assert_eq!(lt.shape(), t.shape());
            for (a, b) in lt.data().iter().zip(t.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn config_text_round_trips(
        l_layers in 1usize..=4,
        n_heads in prop::sample::select(vec![1usize, 2, 4]),
        width_per_head in 2usize..=8,
        d_ff in 4usize..=64,
        vocab_nl in 2usize..=64,
        vocab_code in 2usize..=64,
        k_landmark in 1usize..=32,
        local_window in 1usize..=32,
        max_seq_len in 8usize..=256,
        eps_rms in 1e-8f64..1e-3,
        beta_swish in 0.1f64..10.0,
        lambda in 0.0f64..2.0,
        tau in -1.0f64..5.0,
        d_critic in 1usize..=8,
        inv_w in 0.0f64..1.0,
    ) {
        let config = ModelConfig {
            l_layers,
            d_model: n_heads * width_per_head,
            n_heads,
            d_ff,
            vocab_nl,
            vocab_code,
            k_landmark,
            local_window,
            max_seq_len,
            eps_rms,
            beta_swish,
            lambda_skepticism: lambda,
            tau_uncertainty: tau,
            d_critic,
            inv_loss_weight: inv_w,
        };
        config.validate().unwrap();
        let back = ModelConfig::from_text(&config.to_text()).unwrap();
        prop_assert_eq!(back, config);
    }

    #[test]
    fn rerank_winner_is_order_independent(
        seed in 0u64..1000,
        n in 1usize..8,
        rotation in 0usize..8,
        lambda in 0.0f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cands = Vec::new();
        for _ in 0..n {
            // coarse grid keeps ties common enough to exercise tie rules
            let logp = -(rng.random_range(0..4) as f64) / 2.0;
            let ics = -(rng.random_range(0..4) as f64) / 2.0;
            let tokens = vec![rng.random_range(0..3usize)];
            cands.push(Candidate::new(tokens, logp, ics, lambda).unwrap());
        }
        let w1 = rerank_candidates(&cands, lambda).unwrap();
        cands.rotate_left(rotation % n);
        let w2 = rerank_candidates(&cands, lambda).unwrap();
        prop_assert_eq!(w1.tokens, w2.tokens);
        prop_assert_eq!(w1.energy, w2.energy);
    }

    #[test]
    fn vote_partitions_every_sample(
        seed in 0u64..1000,
        k in 1usize..=12,
        floor in -3.0f64..0.5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<VoteSample> = (0..k)
            .map(|_| VoteSample {
                answer: vec![rng.random_range(0..3usize)],
                ics: -rng.random_range(0.0..3.0f64),
            })
            .collect();
        let res = ir_guided_vote(&samples, floor).unwrap();
        let counted: usize = res.tally.values().sum();
        prop_assert_eq!(counted + res.filtered_out.len(), k);
        prop_assert!(res.tally.contains_key(&res.winner));
    }

    #[test]
    fn entropy_bounded_and_gate_strict(
        logits in prop::collection::vec(-10.0f64..10.0, 1..=16),
    ) {
        let h = step_entropy(&logits).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (logits.len() as f64).ln() + 1e-12);
        let d = gate(h, h);
        prop_assert_eq!(d.mode, sage_core::gate::Mode::Normal);
        let d = gate(h, h - 1e-9);
        prop_assert_eq!(d.mode, sage_core::gate::Mode::Reasoning);
    }

    #[test]
    fn rmsnorm_is_scale_invariant_without_eps(
        data in prop::collection::vec(0.05f64..4.0, 1..=8),
        signs in prop::collection::vec(prop::bool::ANY, 8),
        c in 0.1f64..10.0,
    ) {
        let x: Vec<f64> = data
            .iter()
            .zip(signs.iter().chain(std::iter::repeat(&false)))
            .map(|(v, &s)| if s { -v } else { *v })
            .collect();
        let gamma = vec![1.0; x.len()];
        let base = rmsnorm(&x, &gamma, 0.0).unwrap();
        let scaled_in: Vec<f64> = x.iter().map(|v| c * v).collect();
        let scaled = rmsnorm(&scaled_in, &gamma, 0.0).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }
}

/// Independent reference vote: untouched by the ICS floor, same tie rules.
fn vanilla_vote(samples: &[VoteSample]) -> Vec<usize> {
    let mut groups: BTreeMap<Vec<usize>, (usize, f64)> = BTreeMap::new();
    for s in samples {
        let e = groups.entry(s.answer.clone()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += s.ics;
    }
    let mut best: Option<(&Vec<usize>, usize, f64)> = None;
    for (ans, &(count, ics_sum)) in &groups {
        let better = match best {
            None => true,
            Some((_, bc, bs)) => count > bc || (count == bc && ics_sum > bs),
        };
        if better {
            best = Some((ans, count, ics_sum));
        }
    }
    best.expect("non-empty samples").0.clone()
}

#[test]
fn inert_floor_equals_vanilla_vote_exhaustively() {
    // all assignments of up to 6 samples onto 3 answers
    for k in 1..=6usize {
        let total = 3usize.pow(k as u32);
        for code in 0..total {
            let mut c = code;
            let samples: Vec<VoteSample> = (0..k)
                .map(|i| {
                    let a = c % 3;
                    c /= 3;
                    VoteSample {
                        answer: vec![a],
                        ics: -(((i * 37 + a * 13) % 11) as f64) / 7.0,
                    }
                })
                .collect();
            let res = ir_guided_vote(&samples, f64::NEG_INFINITY).unwrap();
            assert!(res.filtered_out.is_empty());
            assert_eq!(
                res.winner,
                vanilla_vote(&samples),
                "k={k} assignment={code}"
            );
        }
    }
}

#[test]
fn cost_bound_holds_on_ten_thousand_random_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=50usize);
        let tau: f64 = rng.random_range(0.0..2.0);
        let decisions: Vec<_> = (0..n)
            .map(|_| gate(rng.random_range(0.0..2.5f64), tau))
            .collect();
        let c_base: f64 = rng.random_range(0.1..5.0);
        let c_mch: f64 = rng.random_range(0.0..5.0);
        let ledger = cost_account(&decisions, c_base, c_mch).unwrap();
        assert!(ledger.c_total <= ledger.bound() + 1e-9);
        assert_eq!(ledger.n_steps, n);
    }
}

#[test]
fn raising_tau_never_raises_mu() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let entropies: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..2.0)).collect();
    let mu_at = |tau: f64| {
        let ds: Vec<_> = entropies.iter().map(|&h| gate(h, tau)).collect();
        cost_account(&ds, 1.0, 1.0).unwrap().mu
    };
    let mut prev = mu_at(-0.5);
    for i in 0..30 {
        let cur = mu_at(-0.5 + 0.1 * i as f64);
        assert!(cur <= prev + 1e-15);
        prev = cur;
    }
}

#[test]
fn estimator_error_shrinks_with_sample_count() {
    let policy =
        CategoricalSeqPolicy::new(vec![vec![0.3, -0.2, 0.1], vec![0.0, 0.5, -0.5]]).unwrap();
    let reward = |z: &[usize]| ((z[0] * 3 + z[1]) as f64) / 8.0;

    let mut exact = vec![0.0; policy.param_len()];
    for (z, p) in policy.enumerate() {
        policy.add_grad_log_prob(&z, p * reward(&z), &mut exact);
    }
    // single runs are noisy; the 1/sqrt(N) trend shows in the seed average
    let mean_err = |n: usize| {
        (0..10)
            .map(|seed| {
                let est = inverse_gradient_estimate(&policy, reward, n, 0.0, 404 + seed).unwrap();
                est.iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / 10.0
    };
    let (e3, e4, e5) = (mean_err(1_000), mean_err(10_000), mean_err(100_000));
    assert!(e4 < e3, "1e4 samples should beat 1e3: {e4} vs {e3}");
    assert!(e5 < e4, "1e5 samples should beat 1e4: {e5} vs {e4}");
    assert!(e5 < 0.3 * e3, "two decades should shrink the error well");
}
