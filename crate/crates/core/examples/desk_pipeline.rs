//! Generate the desk corpus, memorize it, run every unlearning method
//! from the same checkpoint and print the comparison table.
//!
//! Knobs come from the environment: SEED, ETA_SCALE, MEM_EPOCHS, MEM_LR,
//! ALGOS (comma list of libu,ga,gd,kl), and for LIBU only P1, P2
//! (per-phase epochs) and RW (Phase-2 retain weight).
//!
//!     cargo run --release --example desk_pipeline

use std::env;
use std::time::Instant;

use libu::baselines::{run_baseline, Algorithm, BaselineConfig};
use libu::data::{generate_synthetic_corpus, CorpusSpec, PackedSplit, Vocabulary};
use libu::evaluate::{evaluate_model, render_table};
use libu::model::{Model, ModelConfig};
use libu::unlearn::{memorize, run_libu, Budget, MemorizeConfig, UnlearnConfig};

fn knob<T: std::str::FromStr>(name: &str, default: T) -> T {
    env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() -> libu::Result<()> {
    let seed: u64 = knob("SEED", 0);
    let t0 = Instant::now();
    let corpus = generate_synthetic_corpus(&CorpusSpec::default(), seed)?;
    let vocab = Vocabulary::from_examples(corpus.all_examples())?;
    let mut config = ModelConfig::desk(vocab.len());
    config.seed = seed;
    let mut model = Model::build(config)?;
    let packed = PackedSplit::new(&corpus.split, &vocab, model.config().max_length)?;
    let mem = MemorizeConfig {
        epochs: knob("MEM_EPOCHS", MemorizeConfig::default().epochs),
        learning_rate: knob("MEM_LR", MemorizeConfig::default().learning_rate),
        seed,
        ..MemorizeConfig::default()
    };
    let report = memorize(&mut model, &packed, &mem, &Budget::unlimited())?;
    eprintln!(
        "memorized in {} epochs: retain {:.3} forget {:.3} ({:.1}s)",
        report.epochs_run,
        report.retain_recall,
        report.forget_recall,
        t0.elapsed().as_secs_f64()
    );
    let mut rows = vec![("memorized".to_string(), evaluate_model(&model, &vocab, &corpus)?)];
    let eta_scale: f64 = knob("ETA_SCALE", libu::unlearn::DEFAULT_ETA_SCALE);
    let algos = env::var("ALGOS").unwrap_or_else(|_| "libu,ga,gd,kl".into());
    for name in algos.split(',') {
        let t = Instant::now();
        let mut m = model.clone();
        let log = if name == "libu" {
            let mut cfg = UnlearnConfig::default();
            cfg.eta_scale = eta_scale;
            cfg.seed = seed;
            cfg.phase1_epochs = env::var("P1").ok().and_then(|v| v.parse().ok());
            cfg.phase2_epochs = env::var("P2").ok().and_then(|v| v.parse().ok());
            cfg.phase2_retain_weight = knob("RW", cfg.phase2_retain_weight);
            run_libu(&mut m, &packed, &cfg, &Budget::unlimited())?
        } else {
            let algo = Algorithm::parse(name).expect("unknown algorithm");
            let mut cfg = BaselineConfig::new(algo);
            cfg.eta_scale = eta_scale;
            cfg.seed = seed;
            run_baseline(&mut m, &packed, &cfg, &Budget::unlimited())?
        };
        for r in &log.records {
            eprintln!(
                "  {name} {} {}: retain {:.3} forget {:.3} |d| {:.3}",
                r.phase, r.epoch, r.retain_loss, r.forget_loss, r.update_norm
            );
        }
        let rep = evaluate_model(&m, &vocab, &corpus)?;
        eprintln!(
            "{name}: forget EM {:.3} retain EM {:.3} mia {:.3} util {:.3} ({:.1}s)",
            rep.forget_exact_match,
            rep.retain_exact_match,
            rep.mia_score,
            rep.utility,
            t.elapsed().as_secs_f64()
        );
        for c in rep.forget.constituents.iter().chain(&rep.retain.constituents) {
            eprintln!("    {} {} {:.3}", c.task, c.metric, c.score);
        }
        rows.push((name.to_string(), rep));
    }
    print!("{}", render_table(&rows)?);
    eprintln!("total {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
