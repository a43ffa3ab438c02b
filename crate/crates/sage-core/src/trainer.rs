//! Minibatch training loop for the dual-loss objective.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, CoreResult};
use crate::graph::Graph;
use crate::model::SageModel;
use crate::optim::{clip_global_norm, Adam};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct TrainStats {
    pub step: usize,
    pub total: f64,
    pub fwd: f64,
    pub inv: f64,
}

pub struct TrainOptions {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 500,
            batch_size: 8,
            lr: 3e-3,
            clip_norm: 1.0,
            seed: 0,
        }
    }
}

/// Runs Adam on the dual loss over random minibatches of `corpus`.
/// Each corpus item is (tokens, reasoning_mask). Returns per-step stats.
pub fn train_model<S: Scalar>(
    model: &mut SageModel<S>,
    corpus: &[(Vec<usize>, Vec<bool>)],
    opts: &TrainOptions,
) -> CoreResult<Vec<TrainStats>> {
    if corpus.is_empty() {
        return Err(CoreError::InvalidArgument("train: empty corpus".into()));
    }
    if opts.batch_size == 0 {
        return Err(CoreError::InvalidArgument("train: batch_size 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut opt = Adam::new(opts.lr);
    let mut stats = Vec::with_capacity(opts.steps);

    for step in 0..opts.steps {
        let bsz = opts.batch_size.min(corpus.len());
        let batch: Vec<(Vec<usize>, Vec<bool>)> = sample(&mut rng, corpus.len(), bsz)
            .into_iter()
            .map(|i| corpus[i].clone())
            .collect();

        let mut g = Graph::new();
        let nodes = model.bind(&mut g, true);
        let (total, fwd, inv) = model.dual_loss_graph(&mut g, &nodes, &batch)?;
        let grads = g.backward(total);

        let ids = nodes.ordered();
        let mut grad_list: Vec<Option<Tensor<S>>> =
            ids.iter().map(|&id| grads.get(id).cloned()).collect();
        clip_global_norm(&mut grad_list, opts.clip_norm);
        opt.step(model.params.tensors_mut(), &grad_list);

        stats.push(TrainStats {
            step,
            total: g.value(total).item().as_f64(),
            fwd: g.value(fwd).item().as_f64(),
            inv: g.value(inv).item().as_f64(),
        });
    }
    Ok(stats)
}

/// Mean of `values` over trailing windows of `width`; used to smooth
/// stochastic loss curves before asserting monotone decrease.
pub fn window_means(values: &[f64], width: usize) -> Vec<f64> {
    assert!(width > 0);
    values
        .chunks(width)
        .filter(|c| c.len() == width)
        .map(|c| c.iter().sum::<f64>() / width as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;

    #[test]
    fn training_reduces_loss_on_a_repetitive_corpus() {
        let cfg = ModelConfig {
            l_layers: 2,
            d_model: 16,
            n_heads: 2,
            d_ff: 32,
            vocab_nl: 8,
            vocab_code: 8,
            max_seq_len: 16,
            k_landmark: 4,
            local_window: 16,
            ..ModelConfig::default()
        };
        let mut model = SageModel::<f64>::new(cfg, 1).unwrap();
        // deterministic cycle: 0 1 2 3 0 1 2 3
        let seq: Vec<usize> = (0..8).map(|i| i % 4).collect();
        let corpus = vec![(seq, vec![false; 8]); 4];
        let opts = TrainOptions {
            steps: 120,
            batch_size: 4,
            lr: 1e-2,
            ..TrainOptions::default()
        };
        let stats = train_model(&mut model, &corpus, &opts).unwrap();
        let first = stats[..20].iter().map(|s| s.fwd).sum::<f64>() / 20.0;
        let last = stats[stats.len() - 20..].iter().map(|s| s.fwd).sum::<f64>() / 20.0;
        assert!(
            last < first * 0.5,
            "loss should at least halve: {first} -> {last}"
        );
    }

    #[test]
    fn window_means_drops_partial_tail() {
        assert_eq!(window_means(&[1.0, 3.0, 5.0, 7.0, 9.0], 2), vec![2.0, 6.0]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let mut model = SageModel::<f64>::new(ModelConfig::default(), 0).unwrap();
        assert!(train_model(&mut model, &[], &TrainOptions::default()).is_err());
    }
}
