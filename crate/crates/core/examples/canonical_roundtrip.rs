//! Serializes a scene to its canonical JSON form, parses it back and shows
//! what validation reports for a broken document.
//!
//! Run with `cargo run -p sceneqa --example canonical_roundtrip`.

use sceneqa::schema::{parse_canonical, to_canonical_string, Source};
use sceneqa::synthetic::{SceneSpec, SyntheticScene};

fn main() {
    let scene = SyntheticScene::build(&SceneSpec::new("demo", Source::Nuscenes, 1).frames(2));
    let text = to_canonical_string(&scene);
    println!("{} bytes, {} frames", text.len(), scene.frames.len());
    let back = parse_canonical(text.as_bytes()).expect("canonical output parses");
    assert_eq!(to_canonical_string(&back), text);
    println!("round trip is byte-identical");

    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["frames"][0]["objects"][0]["size"] = serde_json::json!([4.0, -1.0, 1.5]);
    match parse_canonical(doc.to_string().as_bytes()) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
}
