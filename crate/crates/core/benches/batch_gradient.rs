use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use libu::data::{generate_synthetic_corpus, pack_all, CorpusSpec, Vocabulary};
use libu::model::{Model, ModelConfig};
use libu::parallel::Execution;
use libu::unlearn::batch_gradient_with;

fn bench(c: &mut Criterion) {
    let corpus = generate_synthetic_corpus(&CorpusSpec::with_counts(16, 16, 4, 4, 4), 7).unwrap();
    let vocab = Vocabulary::from_examples(corpus.all_examples()).unwrap();
    let model = Model::build(ModelConfig::desk(vocab.len())).unwrap();
    let packed = pack_all(&corpus.split.retain, &vocab, model.config().max_length).unwrap();
    let mut group = c.benchmark_group("batch_gradient");
    group.sample_size(10);
    for size in [4usize, 16] {
        let batch: Vec<_> = packed.iter().take(size).collect();
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, size), &batch, |b, batch| {
                b.iter(|| batch_gradient_with(exec, &model, batch).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
