//! Brute-force oracles for the Fisher diagonal, batch means and
//! gradient accumulation.

mod common;

use libu::data::PackedExample;
use libu::unlearn::{
    accumulate_gradients, batch_gradient, estimate_fisher_diagonal, estimate_fisher_diagonal_with, mean_forget_gradient,
};

use common::{toy_examples, toy_model};

/// Mean over the batch of per-example gradients, summed by hand.
fn brute_batch_gradient(model: &libu::model::Model, batch: &[&PackedExample]) -> Vec<f64> {
    let mut sum = vec![0.0; model.trainable_count()];
    for e in batch {
        let (_, g) = model.loss_and_gradient(e).unwrap();
        for (s, v) in sum.iter_mut().zip(g.iter()) {
            *s += v;
        }
    }
    sum.iter().map(|s| s / batch.len() as f64).collect()
}

#[test]
fn fisher_matches_brute_force_on_toy_transformer() {
    let model = toy_model(1);
    assert!(model.trainable_count() <= 50);
    let exs = toy_examples(9, 2);
    let batches: Vec<Vec<&PackedExample>> = exs.chunks(3).map(|c| c.iter().collect()).collect();
    let fisher = estimate_fisher_diagonal(&model, &batches).unwrap();

    let mut oracle = vec![0.0; model.trainable_count()];
    for b in &batches {
        for (o, g) in oracle.iter_mut().zip(brute_batch_gradient(&model, b)) {
            *o += g * g;
        }
    }
    for o in &mut oracle {
        *o /= batches.len() as f64;
    }
    for (i, (f, o)) in fisher.iter().zip(&oracle).enumerate() {
        assert!((f - o).abs() <= 1e-12, "coordinate {i}: {f} vs {o}");
        assert!(*f >= 0.0);
    }
}

#[test]
fn fisher_on_two_parameter_quadratic() {
    // loss_b(θ) = ½ Σ (θ − x_b)², gradient θ − x_b
    let theta = [0.5, -1.0];
    let data = [[1.0, 2.0], [-3.0, 0.0], [0.25, 4.0]];
    let f = estimate_fisher_diagonal_with(&data, |x| {
        Ok(libu::model::ParameterVector::from_values(
            theta.iter().zip(x).map(|(t, x)| t - x).collect(),
        ))
    })
    .unwrap();
    for i in 0..2 {
        let mut want = 0.0;
        for x in &data {
            want += (theta[i] - x[i]) * (theta[i] - x[i]);
        }
        want /= 3.0;
        assert!((f[i] - want).abs() <= 1e-12);
    }
}

#[test]
fn mean_forget_gradient_matches_accumulate_then_divide() {
    let model = toy_model(3);
    let exs = toy_examples(8, 4);
    let batches: Vec<Vec<&PackedExample>> = exs.chunks(2).map(|c| c.iter().collect()).collect();
    let mean = mean_forget_gradient(&model, &batches).unwrap();
    let mut acc = vec![0.0; model.trainable_count()];
    for b in &batches {
        for (a, g) in acc.iter_mut().zip(brute_batch_gradient(&model, b)) {
            *a += g;
        }
    }
    for (m, a) in mean.iter().zip(&acc) {
        assert!((m - a / batches.len() as f64).abs() <= 1e-12);
    }
    // duplicating the batch list leaves the mean unchanged
    let doubled: Vec<_> = batches.iter().chain(&batches).cloned().collect();
    let again = mean_forget_gradient(&model, &doubled).unwrap();
    for (x, y) in mean.iter().zip(again.iter()) {
        assert!((x - y).abs() <= 1e-15);
    }
}

#[test]
fn accumulation_equals_concatenated_batch() {
    let model = toy_model(5);
    let exs = toy_examples(12, 6);
    let micro: Vec<Vec<&PackedExample>> = exs.chunks(3).map(|c| c.iter().collect()).collect();
    let groups = accumulate_gradients(&model, &micro, 4).unwrap();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0].effective_k, 4);
    let all: Vec<&PackedExample> = exs.iter().collect();
    let (_, whole) = batch_gradient(&model, &all).unwrap();
    for (a, b) in groups[0].gradient.iter().zip(whole.iter()) {
        assert!((a - b).abs() <= 1e-10);
    }
}

#[test]
fn accumulation_with_k1_is_single_batch() {
    let model = toy_model(7);
    let exs = toy_examples(4, 8);
    let micro: Vec<Vec<&PackedExample>> = vec![exs.iter().collect()];
    let groups = accumulate_gradients(&model, &micro, 1).unwrap();
    let (_, g) = batch_gradient(&model, &micro[0]).unwrap();
    assert_eq!(groups[0].gradient, g);
}

#[test]
fn accumulation_remainder_group() {
    let model = toy_model(9);
    let exs = toy_examples(10, 10);
    let micro: Vec<Vec<&PackedExample>> = exs.chunks(2).map(|c| c.iter().collect()).collect();
    let groups = accumulate_gradients(&model, &micro, 3).unwrap();
    assert_eq!(groups.iter().map(|g| g.effective_k).collect::<Vec<_>>(), vec![3, 2]);
}
