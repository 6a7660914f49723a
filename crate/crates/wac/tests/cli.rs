use std::path::Path;
use std::process::{Command, Output};

use wac::format::{load_lexicon, save_lexicon};
use wac_core::speaker::Grammar;
use wac_core::{build_arena, ArenaConfig, FeatureVector, Lexicon};

fn wac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wac")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_outputs_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = wac(&["simulate", "--episodes", "60", "--seed", "3", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "lexicon.json", "ledger.jsonl"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let table = stdout(&out);
    assert!(table.starts_with("episodes 60  seed 3  mode learning"));
    assert!(table.contains("    1-50 "));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["episodes"], 60);
    assert_eq!(report["results"].as_array().unwrap().len(), 60);
    assert_eq!(report["learning_curve"].as_array().unwrap().len(), 2);
}

#[test]
fn frozen_simulation_leaves_lexicon_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let out = wac(&["simulate", "--episodes", "10", "--mode", "frozen", "--out", s(dir.path()), "--quiet"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).is_empty());
    assert!(load_lexicon(&dir.path().join("lexicon.json")).unwrap().is_empty());
}

#[test]
fn zero_episodes_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = wac(&["simulate", "--episodes", "0", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("episodes"));
}

#[test]
fn bad_configs_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("malformed.json", "{\"arena\": "),
        ("unknown.json", "{\"arena_size\": 3}"),
        ("negative_noise.json", r#"{"arena": {"objects": [{"shape": "any", "area_range": [0.4, 4.0], "albedo_range": [0.1, 0.9]}], "bounds": [10, 10], "noise_sigma": -1}}"#),
        ("thresholds.json", r#"{"thresholds": {"commit": 1.5, "raw": 0.5}}"#),
        ("training.json", r#"{"training": {"online_lr": 0}}"#),
    ];
    for (name, text) in cases {
        let config = dir.path().join(name);
        std::fs::write(&config, text).unwrap();
        let out = wac(&["simulate", "--config", s(&config), "--episodes", "5", "--out", s(&dir.path().join("o"))]);
        assert_eq!(code(&out), 2, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = wac(&["simulate", "--config", s(&dir.path().join("absent.json")), "--episodes", "5", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn empty_config_means_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.json");
    std::fs::write(&config, "{}").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&wac(&["simulate", "--config", s(&config), "--episodes", "20", "--out", s(&a), "--quiet"])), 0);
    assert_eq!(code(&wac(&["simulate", "--episodes", "20", "--out", s(&b), "--quiet"])), 0);
    assert_eq!(std::fs::read(a.join("report.json")).unwrap(), std::fs::read(b.join("report.json")).unwrap());
}

#[test]
fn unwritable_output_is_an_output_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = wac(&["simulate", "--episodes", "5", "--out", s(&blocker.join("sub"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn newer_lexicon_is_a_version_error() {
    let dir = tempfile::tempdir().unwrap();
    let lex = dir.path().join("lex.json");
    std::fs::write(&lex, r#"{"schema_version": 9, "rng_seed": 0, "words": {}}"#).unwrap();
    assert_eq!(code(&wac(&["lexicon", "inspect", s(&lex)])), 4);
    let out = wac(&["simulate", "--episodes", "5", "--lexicon", s(&lex), "--out", s(dir.path())]);
    assert_eq!(code(&out), 4);
}

#[test]
fn bind_failures_exit_five() {
    assert_eq!(code(&wac(&["serve", "--bind", "not-an-address"])), 5);
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    assert_eq!(code(&wac(&["serve", "--bind", &addr])), 5);
}

/// Lexicon where "dark" was batch-trained on labelled objects.
fn dark_lexicon() -> Lexicon {
    let grammar = Grammar::default();
    let dark = grammar.predicate("dark").unwrap();
    let mut features = Vec::new();
    for seed in 0..60 {
        let arena = build_arena(&ArenaConfig::default(), seed).unwrap();
        for o in arena.objects() {
            features.push(arena.framed_features(o.object_id).unwrap());
        }
    }
    let pos: Vec<FeatureVector> = features.iter().filter(|f| dark.holds(f, None)).map(|f| f.speaker).take(100).collect();
    let neg: Vec<FeatureVector> = features.iter().filter(|f| !dark.holds(f, None)).map(|f| f.speaker).collect();
    let mut lex = Lexicon::new(1);
    lex.train_word("dark", &pos, &neg).unwrap();
    lex
}

#[test]
fn inspect_shows_dark_prefers_low_intensity() {
    let dir = tempfile::tempdir().unwrap();
    let lex = dir.path().join("lex.json");
    save_lexicon(&dark_lexicon(), &lex).unwrap();
    let out = wac(&["lexicon", "inspect", s(&lex), "--word", "dark"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let header = text.lines().next().unwrap();
    assert!(header.contains("intensity") && header.ends_with("top"));
    let row = text.lines().find(|l| l.starts_with("dark")).unwrap();
    assert!(row.ends_with("-intensity"), "{row}");

    let unknown = stdout(&wac(&["lexicon", "inspect", s(&lex), "--word", "zebra"]));
    assert!(unknown.lines().nth(1).unwrap().starts_with("zebra"));
}

#[test]
fn merge_with_empty_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let empty = dir.path().join("empty.json");
    let merged = dir.path().join("m.json");
    save_lexicon(&dark_lexicon(), &a).unwrap();
    save_lexicon(&Lexicon::new(1), &empty).unwrap();
    assert_eq!(code(&wac(&["lexicon", "merge", s(&a), s(&empty), "--out", s(&merged)])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&merged).unwrap());
}

#[test]
fn export_and_import_are_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    save_lexicon(&dark_lexicon(), &a).unwrap();
    let exported = wac(&["lexicon", "export", s(&a)]);
    assert_eq!(code(&exported), 0);
    assert_eq!(exported.stdout, std::fs::read(&a).unwrap());

    // Reformatted input comes back in canonical form.
    let loose = dir.path().join("loose.json");
    let value: serde_json::Value = serde_json::from_slice(&exported.stdout).unwrap();
    std::fs::write(&loose, serde_json::to_string(&value).unwrap()).unwrap();
    let installed = dir.path().join("installed.json");
    assert_eq!(code(&wac(&["lexicon", "import", s(&loose), s(&installed)])), 0);
    assert_eq!(std::fs::read(&installed).unwrap(), std::fs::read(&a).unwrap());

    std::fs::write(&loose, "{\"schema_version\": 1").unwrap();
    assert_eq!(code(&wac(&["lexicon", "import", s(&loose), s(&installed)])), 2);
}

#[test]
fn replaying_a_run_rebuilds_its_lexicon() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&wac(&["simulate", "--episodes", "80", "--seed", "5", "--out", s(dir.path()), "--quiet"])), 0);
    let rebuilt = dir.path().join("rebuilt.json");
    let out = wac(&["lexicon", "replay", s(&dir.path().join("ledger.jsonl")), "--seed", "5", "--out", s(&rebuilt)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&rebuilt).unwrap(), std::fs::read(dir.path().join("lexicon.json")).unwrap());

    let broken = dir.path().join("broken.jsonl");
    let text = std::fs::read_to_string(dir.path().join("ledger.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(1);
    std::fs::write(&broken, lines.join("\n")).unwrap();
    assert_eq!(code(&wac(&["lexicon", "replay", s(&broken), "--out", s(&rebuilt)])), 2);
}

#[test]
fn gen_arena_is_deterministic() {
    let a = wac(&["gen-arena", "--seed", "12"]);
    let b = wac(&["gen-arena", "--seed", "12"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let arena: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(arena["objects"].as_array().unwrap().len(), 4);
    assert_ne!(a.stdout, wac(&["gen-arena", "--seed", "13"]).stdout);
}
