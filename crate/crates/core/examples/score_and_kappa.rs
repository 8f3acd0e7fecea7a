//! Scores two simulated responders on a small corpus and reports their
//! agreement per ability.
//!
//! Run with `cargo run -p sceneqa --example score_and_kappa`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sceneqa::qa::corpus::{generate_all, Quotas};
use sceneqa::qa::{Answer, GeneratorConfig, QAItem};
use sceneqa::scoring::{build_report, cohen_kappa, kappa_by_ability, PredictionRecord};
use sceneqa::synthetic::prepared_pool;

/// Answers correctly with probability `skill`, otherwise guesses.
fn responder(items: &[QAItem], name: &str, skill: f64, seed: u64) -> Vec<PredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items
        .iter()
        .map(|it| {
            let answer = if rng.random_bool(skill) {
                it.answer
            } else {
                match it.answer {
                    Answer::Index(_) => {
                        Answer::Index(rng.random_range(0..it.options.as_ref().unwrap().len()))
                    }
                    Answer::Value(v) => {
                        Answer::Value((v + rng.random_range(-5.0..5.0_f64)).max(0.0).round())
                    }
                }
            };
            PredictionRecord::from_answer(it, name, answer)
        })
        .collect()
}

fn main() {
    let scenes = prepared_pool(7);
    let (items, _) = generate_all(
        &scenes,
        &Quotas::uniform(20),
        &GeneratorConfig::with_seed(7),
    );
    let a = responder(&items, "careful", 0.8, 1);
    let b = responder(&items, "hasty", 0.5, 2);
    for preds in [&a, &b] {
        let r = build_report(&items, preds, &scenes, 10).expect("predictions cover the corpus");
        println!(
            "{:<8} average {:>6.2}  abilities {:?}",
            r.responder_id,
            r.average.unwrap_or(f64::NAN),
            r.ability_accuracy
        );
    }
    let all = cohen_kappa(&a, &b).expect("shared items");
    println!(
        "kappa {:.3} ({:?}) over {} items",
        all.kappa, all.band, all.shared
    );
    for (ability, k) in kappa_by_ability(&items, &a, &b) {
        println!("  {ability:?}: {:.3}", k.kappa);
    }
}
