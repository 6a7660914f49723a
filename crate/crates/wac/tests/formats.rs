use std::io::Cursor;
use std::path::Path;

use proptest::prelude::*;
use wac::format::{
    ledger_to_string, lexicon_to_string, load_lexicon, parse_lexicon, read_ledger, save_lexicon, FormatError,
};
use wac::{simulate, SimulationConfig};
use wac_core::classifier::{Example, WordClassifier};
use wac_core::{FeatureVector, Lexicon, Mode, FEATURE_DIM, SCHEMA_VERSION};

fn path() -> &'static Path {
    Path::new("lex.json")
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(-0.0),
        Just(f64::MIN_POSITIVE / 3.0),
        Just(f64::MAX),
    ]
}

fn unit() -> impl Strategy<Value = FeatureVector> {
    (prop::array::uniform4(0.0..=1.0f64), -1.0..=1.0f64, 0.0..=1.0f64)
        .prop_map(|(a, lat, d)| FeatureVector::new([a[0], a[1], a[2], a[3], lat, d]).unwrap())
}

fn classifier(token: String) -> impl Strategy<Value = WordClassifier> {
    (
        prop::array::uniform6(finite()),
        finite(),
        any::<u64>(),
        any::<u64>(),
        prop::collection::vec((unit(), 0u8..=1), 0..8),
    )
        .prop_map(move |(w, b, p, n, buf)| {
            let buffer = buf.into_iter().map(|(x, y)| Example::new(x, y).unwrap());
            WordClassifier::from_parts(token.clone(), w, b, p, n, buffer).unwrap()
        })
}

fn lexicon() -> impl Strategy<Value = Lexicon> {
    (any::<u64>(), prop::collection::btree_set("[a-z]{1,8}", 0..6)).prop_flat_map(|(seed, tokens)| {
        let words: Vec<_> = tokens.into_iter().map(classifier).collect();
        words.prop_map(move |ws| Lexicon::from_parts(SCHEMA_VERSION, seed, ws).unwrap())
    })
}

proptest! {
    #[test]
    fn lexicon_text_round_trips_bit_for_bit(lex in lexicon()) {
        let text = lexicon_to_string(&lex);
        let back = parse_lexicon(&text, path()).unwrap();
        prop_assert_eq!(back.rng_seed(), lex.rng_seed());
        prop_assert_eq!(back.len(), lex.len());
        for (a, b) in lex.words().zip(back.words()) {
            prop_assert_eq!(a.token(), b.token());
            for (x, y) in a.weights().iter().zip(b.weights()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            prop_assert_eq!(a.bias().to_bits(), b.bias().to_bits());
            prop_assert_eq!(a.buffer(), b.buffer());
            prop_assert_eq!((a.pos_count(), a.neg_count()), (b.pos_count(), b.neg_count()));
        }
        prop_assert_eq!(lexicon_to_string(&back), text);
    }
}

#[test]
fn empty_lexicon_round_trips() {
    let lex = Lexicon::new(42);
    let text = lexicon_to_string(&lex);
    assert!(text.ends_with('\n'));
    let back = parse_lexicon(&text, path()).unwrap();
    assert!(back.is_empty());
    assert_eq!(back.rng_seed(), 42);
}

#[test]
fn file_round_trip_is_atomic_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(&SimulationConfig::default(), 40, 2, Mode::Learning, None).unwrap();
    let file = dir.path().join("lexicon.json");
    save_lexicon(&sim.lexicon, &file).unwrap();
    assert!(!dir.path().join("lexicon.json.tmp").exists());
    let back = load_lexicon(&file).unwrap();
    let x = FeatureVector::new([0.3, 0.1, 0.9, 0.2, -0.4, 0.7]).unwrap();
    for token in sim.lexicon.tokens() {
        assert_eq!(sim.lexicon.response(token, &x).to_bits(), back.response(token, &x).to_bits());
    }
}

#[test]
fn parse_errors_carry_positions() {
    let text = "{\n  \"schema_version\": 1,\n  \"rng_seed\": 0,\n  \"words\": {\"big\": {\"weights\": [NaN, 0, 0, 0, 0, 0],";
    match parse_lexicon(text, path()) {
        Err(FormatError::Parse { line, column, .. }) => {
            assert_eq!(line, 4);
            assert!(column > 1);
        }
        other => panic!("expected parse error, got {other:?}"),
    }
    let short = r#"{"schema_version": 1, "rng_seed": 0, "words": {"big": {"weights": [0, 0], "bias": 0, "pos_count": 0, "neg_count": 0}}}"#;
    assert!(matches!(parse_lexicon(short, path()), Err(FormatError::Parse { line: 1, .. })));
    let unknown = r#"{"schema_version": 1, "rng_seed": 0, "words": {}, "extra": true}"#;
    assert!(matches!(parse_lexicon(unknown, path()), Err(FormatError::Parse { .. })));
}

#[test]
fn bad_contents_are_rejected() {
    let label = r#"{"schema_version": 1, "rng_seed": 0, "words": {"big": {"weights": [0,0,0,0,0,0], "bias": 0,
        "pos_count": 1, "neg_count": 0, "buffer": [{"x": [0.5,0.5,0.5,0.5,0,0.5], "y": 2}]}}}"#;
    assert!(parse_lexicon(label, path()).is_err());
    let feature = r#"{"schema_version": 1, "rng_seed": 0, "words": {"big": {"weights": [0,0,0,0,0,0], "bias": 0,
        "pos_count": 1, "neg_count": 0, "buffer": [{"x": [1.5,0.5,0.5,0.5,0,0.5], "y": 1}]}}}"#;
    assert!(parse_lexicon(feature, path()).is_err());
    let token = r#"{"schema_version": 1, "rng_seed": 0, "words": {"Big": {"weights": [0,0,0,0,0,0], "bias": 0,
        "pos_count": 0, "neg_count": 0}}}"#;
    assert!(matches!(parse_lexicon(token, path()), Err(FormatError::Invalid { .. })));
}

#[test]
fn newer_schema_is_a_version_error() {
    let text = r#"{"schema_version": 2, "rng_seed": 0, "words": {}, "layout": "future"}"#;
    match parse_lexicon(text, path()) {
        Err(FormatError::Version { expected, found, .. }) => assert_eq!((expected, found), (SCHEMA_VERSION, 2)),
        other => panic!("expected version error, got {other:?}"),
    }
}

#[test]
fn ledger_ndjson_round_trips() {
    let sim = simulate(&SimulationConfig::default(), 25, 6, Mode::Learning, None).unwrap();
    let text = ledger_to_string(&sim.ledger);
    assert_eq!(text.lines().count(), sim.ledger.len());
    assert!(text.lines().all(|l| l.starts_with("{\"type\":")));
    let back = read_ledger(Cursor::new(format!("\n{text}\n")), Path::new("l.jsonl")).unwrap();
    assert_eq!(back, sim.ledger);
    assert_eq!(ledger_to_string(&back), text);
}

#[test]
fn ledger_errors_name_the_line() {
    let sim = simulate(&SimulationConfig::default(), 3, 6, Mode::Learning, None).unwrap();
    let mut lines: Vec<String> = ledger_to_string(&sim.ledger).lines().map(String::from).collect();
    lines[2] = String::from("{\"type\":\"Nonsense\"}");
    let err = read_ledger(Cursor::new(lines.join("\n")), Path::new("l.jsonl")).unwrap_err();
    assert!(matches!(err, FormatError::Parse { line: 3, .. }), "{err:?}");

    let mut swapped: Vec<String> = ledger_to_string(&sim.ledger).lines().map(String::from).collect();
    swapped.swap(0, 1);
    let err = read_ledger(Cursor::new(swapped.join("\n")), Path::new("l.jsonl")).unwrap_err();
    assert!(matches!(err, FormatError::Invalid { .. }), "{err:?}");
}

#[test]
fn weights_have_fixed_width() {
    let lex = simulate(&SimulationConfig::default(), 5, 0, Mode::Learning, None).unwrap().lexicon;
    let doc: serde_json::Value = serde_json::from_str(&lexicon_to_string(&lex)).unwrap();
    for (_, word) in doc["words"].as_object().unwrap() {
        assert_eq!(word["weights"].as_array().unwrap().len(), FEATURE_DIM);
    }
}

#[test]
fn shipped_configs_are_the_defaults() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
    let sim: wac::SimulationConfig = serde_json::from_str(&read("simulation.json")).unwrap();
    assert_eq!(sim, wac::SimulationConfig::default());
    let arena: wac_core::ArenaConfig = serde_json::from_str(&read("arena.json")).unwrap();
    assert_eq!(arena, sim.arena);
    let grammar: wac_core::speaker::Grammar = serde_json::from_str(&read("grammar.json")).unwrap();
    assert_eq!(grammar, sim.grammar);
}
