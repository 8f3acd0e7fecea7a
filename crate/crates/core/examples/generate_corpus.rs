//! Generates a QA corpus over the prepared fixture pool and prints the generation report.
//!
//! Run with `cargo run -p sceneqa --release --example generate_corpus [per_task] [seed]`.

use sceneqa::qa::corpus::{generate_all, write_jsonl, Quotas};
use sceneqa::qa::GeneratorConfig;
use sceneqa::synthetic::prepared_pool;

fn main() {
    let mut args = std::env::args().skip(1);
    let per_task = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let scenes = prepared_pool(seed);
    let cfg = GeneratorConfig::with_seed(seed);
    let (items, report) = generate_all(&scenes, &Quotas::uniform(per_task), &cfg);
    for (task, r) in &report.tasks {
        println!(
            "{:<28} {:>4}/{:<4} attempts {:>5} dup {:>3} {:?}",
            task.as_str(),
            r.successes,
            r.quota,
            r.attempts,
            r.duplicates,
            r.rejections
        );
    }
    println!("items {}  mix {:?}", items.len(), report.ability_mix);
    if let Ok(path) = std::env::var("SCENEQA_CORPUS_OUT") {
        let file = std::fs::File::create(&path).expect("create corpus file");
        write_jsonl(&items, std::io::BufWriter::new(file)).expect("write corpus");
        println!("wrote {path}");
    }
}
