//! Backward gradients against central finite differences.

mod common;

use libu::data::{generate_synthetic_corpus, CorpusSpec, PackedSplit, Vocabulary};
use libu::model::{Model, ModelConfig, SequenceObjective};
use libu::parallel::Execution;
use libu::unlearn::batch_gradient_with;

use common::{gradient_check, randomize_trainable, toy_examples, toy_model};

const H: f64 = 1e-5;

fn desk_lora_model() -> (Model, PackedSplit) {
    let corpus = generate_synthetic_corpus(&CorpusSpec::default(), 3).unwrap();
    let vocab = Vocabulary::from_examples(corpus.all_examples()).unwrap();
    let mut model = Model::build(ModelConfig::desk(vocab.len())).unwrap();
    model.attach_lora(8, 16.0, 3).unwrap();
    randomize_trainable(&mut model, 3, 0.1);
    let packed = PackedSplit::new(&corpus.split, &vocab, 64).unwrap();
    (model, packed)
}

#[test]
fn toy_cross_entropy_gradient() {
    let model = toy_model(11);
    let ex = &toy_examples(1, 12)[0];
    let (err, i) = gradient_check(&model, H, |m| {
        let (l, g) = m.loss_and_gradient(ex).unwrap();
        (l, g.into_values())
    });
    assert!(err <= 1e-4, "coordinate {i}: relative error {err}");
}

#[test]
fn toy_full_model_gradient_without_lora() {
    let mut config = toy_model(0).config().clone();
    config.lora_enabled = false;
    let mut model = Model::build(config).unwrap();
    randomize_trainable(&mut model, 13, 0.5);
    assert!(model.trainable_count() > 100);
    let ex = &toy_examples(1, 14)[0];
    let (err, i) = gradient_check(&model, H, |m| {
        let (l, g) = m.loss_and_gradient(ex).unwrap();
        (l, g.into_values())
    });
    assert!(err <= 1e-4, "coordinate {i}: relative error {err}");
}

#[test]
fn toy_kl_gradient() {
    let model = toy_model(15);
    let ex = &toy_examples(1, 16)[0];
    let reference = toy_model(17).next_token_log_probs(ex).unwrap();
    let (err, i) = gradient_check(&model, H, |m| {
        let (l, g) = m
            .objective_and_gradient(ex, SequenceObjective::KlToReference(&reference))
            .unwrap();
        (l, g.into_values())
    });
    assert!(err <= 1e-4, "coordinate {i}: relative error {err}");
}

#[test]
fn desk_batch_gradient() {
    let (model, packed) = desk_lora_model();
    let batch: Vec<_> = packed.forget.iter().take(2).collect();
    let (err, i) = gradient_check(&model, H, |m| {
        let (l, g) = batch_gradient_with(Execution::Sequential, m, &batch).unwrap();
        (l, g.into_values())
    });
    assert!(err <= 1e-4, "coordinate {i}: relative error {err}");
}

#[test]
fn sequential_and_parallel_are_bitwise_equal() {
    let (model, packed) = desk_lora_model();
    let batch: Vec<_> = packed.retain.iter().take(8).collect();
    let (ls, gs) = batch_gradient_with(Execution::Sequential, &model, &batch).unwrap();
    let (lp, gp) = batch_gradient_with(Execution::Parallel, &model, &batch).unwrap();
    assert_eq!(ls.to_bits(), lp.to_bits());
    assert!(gs.iter().zip(gp.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
}
