#![allow(dead_code)]

use std::sync::OnceLock;

use libu::data::{generate_synthetic_corpus, CorpusSpec, PackedSplit, SyntheticCorpus, UnlearningExample, Vocabulary};
use libu::model::{Model, ModelConfig};
use libu::parallel::Execution;
use libu::unlearn::{memorize, Budget, MemorizeConfig, MemorizeReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DESK_SEED: u64 = 0;

/// Corpus, vocabulary, packed splits and the memorized model every
/// desk-scale test starts from.
pub struct Desk {
    pub corpus: SyntheticCorpus,
    pub vocab: Vocabulary,
    pub packed: PackedSplit,
    pub initial: Model,
    pub memorized: Model,
    pub report: MemorizeReport,
}

pub fn desk_with_seed(seed: u64) -> Desk {
    let corpus = generate_synthetic_corpus(&CorpusSpec::default(), seed).unwrap();
    let vocab = Vocabulary::from_examples(corpus.all_examples()).unwrap();
    let mut config = ModelConfig::desk(vocab.len());
    config.seed = seed;
    let initial = Model::build(config).unwrap();
    let packed = PackedSplit::new(&corpus.split, &vocab, initial.config().max_length).unwrap();
    let mut memorized = initial.clone();
    let cfg = MemorizeConfig {
        seed,
        ..MemorizeConfig::default()
    };
    let report = memorize(&mut memorized, &packed, &cfg, &Budget::unlimited()).unwrap();
    Desk {
        corpus,
        vocab,
        packed,
        initial,
        memorized,
        report,
    }
}

pub fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| desk_with_seed(DESK_SEED))
}

/// A transformer small enough for brute-force oracles: width 4, one
/// layer, rank-1 adapters on q and v (16 trainable scalars).
pub fn toy_model(seed: u64) -> Model {
    let config = ModelConfig {
        vocab_size: 6,
        d_model: 4,
        n_layers: 1,
        n_heads: 2,
        mlp_ratio: 1,
        max_length: 8,
        lora_enabled: true,
        lora_rank: 1,
        lora_alpha: 2.0,
        lora_targets: vec![libu::model::LoraTarget::Query, libu::model::LoraTarget::Value],
        seed,
    };
    let mut m = Model::build(config).unwrap();
    randomize_trainable(&mut m, seed, 0.3);
    m
}

/// Overwrite every trainable scalar with N(0, std)-ish noise so no
/// gradient is structurally zero (fresh adapters have `up = 0`).
pub fn randomize_trainable(model: &mut Model, seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let theta: Vec<f64> = (0..model.trainable_count())
        .map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0))
        .collect();
    model.set_trainable(&theta).unwrap();
}

/// Toy examples over the toy model's four real tokens.
pub fn toy_examples(n: usize, seed: u64) -> Vec<libu::data::PackedExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = ["a", "b", "c", "d"];
    let mut exs = Vec::new();
    for i in 0..n {
        let mut pick = |k: usize| -> String {
            (0..k)
                .map(|_| words[rng.random_range(0..4)])
                .collect::<Vec<_>>()
                .join(" ")
        };
        exs.push(UnlearningExample::new(format!("t{i}"), pick(2), pick(3), "toy"));
    }
    let all: Vec<UnlearningExample> = ["a", "b", "c", "d"]
        .iter()
        .enumerate()
        .map(|(i, w)| UnlearningExample::new(format!("v{i}"), *w, *w, "toy"))
        .collect();
    let vocab = Vocabulary::from_examples(&all).unwrap();
    assert_eq!(vocab.len(), 6);
    libu::data::pack_all(&exs, &vocab, 8).unwrap()
}

/// Denominator floor for relative error: coordinates whose analytic and
/// numeric gradients are both below it are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Worst relative error between the backward gradient and central finite
/// differences, over every trainable coordinate. Returns `(max_rel, index)`.
pub fn gradient_check<F>(model: &Model, h: f64, objective: F) -> (f64, usize)
where
    F: Fn(&Model) -> (f64, Vec<f64>) + Sync,
{
    let (_, analytic) = objective(model);
    let theta = model.trainable().into_values();
    let idx: Vec<usize> = (0..theta.len()).collect();
    let errs = libu::parallel::map_ordered(Execution::default(), &idx, |&i| {
        let mut m = model.clone();
        let mut t = theta.clone();
        t[i] = theta[i] + h;
        m.set_trainable(&t).unwrap();
        let up = objective(&m).0;
        t[i] = theta[i] - h;
        m.set_trainable(&t).unwrap();
        let down = objective(&m).0;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR)
    });
    errs.iter()
        .enumerate()
        .fold((0.0, 0), |best, (i, &e)| if e > best.0 { (e, i) } else { best })
}
