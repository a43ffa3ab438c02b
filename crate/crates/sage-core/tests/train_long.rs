//! Long-haul training check: 500 steps on a fixed corpus must decrease the
//! smoothed forward loss monotonically across 50-step windows.

use sage_core::config::ModelConfig;
use sage_core::model::SageModel;
use sage_core::tasks::{echo_training_corpus, EchoDifficulty, EchoVocab};
use sage_core::trainer::{train_model, window_means, TrainOptions};

#[test]
fn five_hundred_steps_decrease_smoothed_forward_loss() {
    let v = EchoVocab {
        n_fillers: 6,
        n_constraints: 5,
    };
    let config = ModelConfig {
        l_layers: 2,
        d_model: 16,
        n_heads: 2,
        d_ff: 32,
        vocab_nl: v.size(),
        vocab_code: v.size(),
        k_landmark: 4,
        local_window: 16,
        max_seq_len: 32,
        ..ModelConfig::default()
    };
    let corpus = echo_training_corpus(
        &v,
        &[
            (EchoDifficulty::Easy, 0.1, 32),
            (EchoDifficulty::Hard, 0.1, 32),
        ],
        10,
        11,
    )
    .unwrap();
    let mut model = SageModel::<f64>::new(config, 3).unwrap();
    let stats = train_model(
        &mut model,
        &corpus,
        &TrainOptions {
            steps: 500,
            ..TrainOptions::default()
        },
    )
    .unwrap();
    assert_eq!(stats.len(), 500);

    let fwd: Vec<f64> = stats.iter().map(|s| s.fwd).collect();
    let means = window_means(&fwd, 50);
    assert_eq!(means.len(), 10);
    for pair in means.windows(2) {
        assert!(
            pair[1] < pair[0],
            "smoothed forward loss must strictly decrease: {means:?}"
        );
    }
}
