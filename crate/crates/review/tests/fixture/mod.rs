//! Shared corpus, scenes and verdict builders for the service tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use sceneqa::qa::corpus::{generate_all, Quotas};
use sceneqa::qa::{GeneratorConfig, QAItem, ReviewOutcome};
use sceneqa::schema::Scene;
use sceneqa::synthetic::prepared_pool;
use sceneqa_review::{CriterionFlags, Store, Target, Verdict, VerificationRecord};

pub fn scenes() -> &'static [Scene] {
    static S: OnceLock<Vec<Scene>> = OnceLock::new();
    S.get_or_init(|| prepared_pool(7))
}

pub fn corpus() -> Vec<QAItem> {
    static C: OnceLock<Vec<QAItem>> = OnceLock::new();
    C.get_or_init(|| {
        generate_all(
            scenes(),
            &Quotas::uniform(7),
            &GeneratorConfig::with_seed(7),
        )
        .0
    })
    .clone()
}

pub fn store() -> Store {
    Store::new(corpus(), scenes().to_vec(), 1)
}

fn qa(item_id: &str) -> Target {
    Target::Qa {
        item_id: item_id.into(),
    }
}

pub fn accept(item_id: &str, who: &str) -> VerificationRecord {
    VerificationRecord {
        target: qa(item_id),
        verdict: Verdict::Accept,
        criteria: Some(CriterionFlags {
            answer_correct: true,
            option_unique: true,
            plausible: true,
            objects_visible: true,
        }),
        edited_value: None,
        annotator_id: who.into(),
        started_at: 100.0,
        submitted_at: 130.0,
    }
}

/// A reject failing the criterion `k % 4`, plus `answer_correct` when `k % 5 == 0`.
pub fn reject(item_id: &str, who: &str, k: usize) -> VerificationRecord {
    let mut flags = [true; 4];
    flags[k % 4] = false;
    if k % 5 == 0 {
        flags[0] = false;
    }
    VerificationRecord {
        verdict: Verdict::Reject,
        criteria: Some(CriterionFlags {
            answer_correct: flags[0],
            option_unique: flags[1],
            plausible: flags[2],
            objects_visible: flags[3],
        }),
        ..accept(item_id, who)
    }
}

pub fn edit(item: &QAItem, who: &str) -> VerificationRecord {
    let mut revised = item.clone();
    revised.question = format!("{} (revised)", item.question);
    VerificationRecord {
        verdict: Verdict::Edit,
        criteria: None,
        edited_value: Some(json!(revised)),
        ..accept(&item.item_id, who)
    }
}

/// 100 reviewed items checked against hand counts under both edit interpretations.
pub fn qc_accounting() -> String {
    // 100 reviewed items: 68 accepted, 9 edited, 23 rejected, shuffled across the corpus.
    let items = corpus();
    assert!(
        items.len() >= 120,
        "fixture corpus has {} items",
        items.len()
    );
    let mut plan: Vec<Verdict> = [
        (Verdict::Accept, 68),
        (Verdict::Edit, 9),
        (Verdict::Reject, 23),
    ]
    .into_iter()
    .flat_map(|(v, n)| std::iter::repeat_n(v, n))
    .collect();
    plan.shuffle(&mut ChaCha8Rng::seed_from_u64(3));

    let mut s = store();
    let mut manual = std::collections::BTreeMap::<&str, usize>::new();
    let mut flag_fails = [0usize; 4];
    for (k, (item, verdict)) in items.iter().zip(&plan).enumerate() {
        let record = match verdict {
            Verdict::Accept => accept(&item.item_id, "ann-1"),
            Verdict::Edit => edit(item, "ann-1"),
            Verdict::Reject => {
                let r = reject(&item.item_id, "ann-1", k);
                for (slot, ok) in r.criteria.unwrap().values().iter().enumerate() {
                    flag_fails[slot] += usize::from(!ok);
                }
                r
            }
        };
        *manual.entry(format!("{verdict:?}").leak()).or_default() += 1;
        s.submit_verdict(record).unwrap();
    }
    assert_eq!(s.verdicts().len(), 100);

    let st = s.stats();
    assert_eq!(
        (st.accepted, st.edited, st.rejected),
        (manual["Accept"], manual["Edit"], manual["Reject"])
    );
    assert_eq!(st.reviewed, 100);
    assert_eq!(st.pending, items.len() - 100);
    assert_eq!(st.pass_rate_edit_as_pass, Some(77.0));
    assert_eq!(st.pass_rate_edit_as_fail, Some(68.0));
    assert!(!st.pass_rate_undefined);
    let counted: Vec<usize> = CriterionFlags::NAMES
        .iter()
        .map(|n| st.criterion_rejects[*n])
        .collect();
    assert_eq!(counted, flag_fails);
    // every verdict in the fixture took 30 s
    assert!((st.review_seconds - 3000.0).abs() < 1e-9);
    assert!((st.annotator_seconds["ann-1"] - 3000.0).abs() < 1e-9);

    let exported = s.export(None, None, None).unwrap();
    assert_eq!(exported.len(), 77);
    assert!(exported.iter().all(|i| i.review.is_some()));
    assert_eq!(
        exported
            .iter()
            .filter(|i| i.review.as_ref().unwrap().outcome == ReviewOutcome::Edited)
            .count(),
        9
    );
    assert!(exported
        .iter()
        .filter(|i| i.review.as_ref().unwrap().outcome == ReviewOutcome::Edited)
        .all(|i| i.question.ends_with("(revised)")));

    // the strict interpretation drops edited items from the export
    let mut strict = store().with_edits_pass(false);
    for (item, verdict) in items.iter().zip(&plan).take(100) {
        let r = match verdict {
            Verdict::Accept => accept(&item.item_id, "ann-1"),
            Verdict::Edit => edit(item, "ann-1"),
            Verdict::Reject => reject(&item.item_id, "ann-1", 0),
        };
        strict.submit_verdict(r).unwrap();
    }
    assert_eq!(strict.export(None, None, None).unwrap().len(), 68);
    assert_eq!(strict.stats().pass_rate_edit_as_pass, Some(77.0));
    format!(
        "100 verdicts (68/9/23), pass rate {:.1}% with edits passing, {:.1}% with edits failing",
        st.pass_rate_edit_as_pass.unwrap(),
        st.pass_rate_edit_as_fail.unwrap()
    )
}
