//! Manifest text format: lossless round trips and schema enforcement.

use fkl_core::manifest::{content_hash, format_f64, RunManifest, Section};
use proptest::prelude::*;

fn key() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_.-]{1,12}"
}

fn leaf_value() -> impl Strategy<Value = String> {
    prop_oneof![
        "[ -~]{0,20}",
        any::<f64>().prop_map(format_f64),
        "[a-z \"\\\\\t\n\r]{0,10}",
    ]
}

fn section(depth: u32) -> BoxedStrategy<Section> {
    let leaf = prop::collection::vec((key(), leaf_value()), 0..5).prop_map(|kv| {
        let mut s = Section::new();
        for (k, v) in kv {
            s.set(&k, v);
        }
        s
    });
    if depth == 0 {
        return leaf.boxed();
    }
    (leaf, prop::collection::vec((key(), section(depth - 1)), 0..3))
        .prop_map(|(mut s, subs)| {
            for (k, sub) in subs {
                s.set_section(&format!("sub_{k}"), sub);
            }
            s
        })
        .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn text_round_trip(
        params in section(2),
        results in section(2),
        files in prop::collection::vec((key(), "[a-z0-9_]{1,8}\\.(csv|field)"), 0..4),
        wall in 0.0f64..1e6,
        seed in "[ -~]{0,30}",
    ) {
        let mut m = RunManifest::new("sweep", &content_hash(&[&seed]));
        m.wall_clock_seconds = wall;
        m.params = params;
        m.results = results;
        m.grid.set("n", 1024).set_f64("L", 100.0);
        m.solver.set_f64("tol", 1e-12);
        for (k, f) in &files {
            m.outputs.set(k, f);
        }
        let text = m.to_text();
        let back = RunManifest::from_text(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn floats_survive_formatting(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let mut s = Section::new();
        s.set_f64("x", v);
        prop_assert_eq!(s.get_f64("x"), Some(v));
    }
}

#[test]
fn content_hash_is_sha256_of_length_prefixed_parts() {
    let h = content_hash(&[]);
    // sha-256 of the empty message.
    assert_eq!(h, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    assert_eq!(content_hash(&["a", "b"]), content_hash(&["a", "b"]));
    assert_ne!(content_hash(&["a", "b"]), content_hash(&["b", "a"]));
    assert_ne!(content_hash(&["", "ab"]), content_hash(&["ab"]));
}

#[test]
fn invalid_manifests_are_rejected() {
    let mut m = RunManifest::new("ground-state", "abc");
    assert!(m.validate().is_err());
    m.input_hash = content_hash(&["x"]);
    assert!(m.validate().is_ok());
    m.wall_clock_seconds = f64::NAN;
    assert!(m.validate().is_err());
    m.wall_clock_seconds = 1.0;
    m.outputs.set("q", "dir/q.field");
    assert!(m.validate().is_err());
    assert!(RunManifest::from_text("").is_err());
    let text = RunManifest::new("x", &content_hash(&[])).to_text();
    assert!(RunManifest::from_text(&text.replace("command: x\n", "")).is_err());
}
