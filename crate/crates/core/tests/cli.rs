use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tagunify");
const GEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/pipeline/gen.toml");

fn tagunify(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[&str])] = &[
        (
            "train",
            &["--mode", "--data", "--hierarchy", "--learning-rate"],
        ),
        ("distill", &["--config", "--alpha", "--temperature"]),
        ("merge", &["--teacher", "--input"]),
        ("tag", &["--model", "--input"]),
        ("eval", &["--gold", "--pred", "--coarse"]),
        ("generate", &["--spec", "--keep", "--tokens-only"]),
        ("hierarchy-check", &["--hierarchy"]),
    ];
    for (cmd, flags) in cases {
        let o = tagunify(dir.path(), &[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}");
        let text = stdout(&o);
        for f in *flags {
            assert!(text.contains(f), "{cmd} help lacks {f}");
        }
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tagunify(dir.path(), &["--bogus"]).status.code(), Some(1));
    assert_eq!(tagunify(dir.path(), &["train"]).status.code(), Some(1));
    let missing = tagunify(dir.path(), &["eval", "--gold", "nope", "--pred", "nope"]);
    assert_eq!(missing.status.code(), Some(1));
    let o = tagunify(
        dir.path(),
        &["--workers", "0", "hierarchy-check", "--hierarchy", "h"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("one.conll"), "lonely\n\n").unwrap();
    let o = tagunify(
        dir.path(),
        &["eval", "--gold", "one.conll", "--pred", "one.conll"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("one.conll:1"));

    fs::write(dir.path().join("h.txt"), "tagset a: X\nedge X -> Y\n").unwrap();
    let o = tagunify(dir.path(), &["hierarchy-check", "--hierarchy", "h.txt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hierarchy_check_lists_leaves() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("h.txt"),
        "tagset coarse: PERSON,DATE\n\
         tagset fine: DOCTOR,PATIENT,CITY\n\
         edge PERSON -> DOCTOR\n\
         edge PERSON -> PATIENT\n\
         open PERSON\n",
    )
    .unwrap();
    let o = tagunify(dir.path(), &["hierarchy-check", "--hierarchy", "h.txt"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("5 leaves"), "{text}");
    assert!(
        text.contains("PERSON: DOCTOR, PATIENT, PERSON-OTHER"),
        "{text}"
    );
}

#[test]
fn generate_eval_and_train_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = |seed: &str, n: &str, extra: &[&str], out: &str| {
        let mut args = vec!["--seed", seed, "generate", "--spec", GEN, "--sentences", n];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out]);
        let o = tagunify(d, &args);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    };
    gen("1", "60", &["--keep", "PER,LOC"], "a.conll");
    gen("2", "60", &["--keep", "ORG,MISC"], "b.conll");
    gen("3", "40", &[], "test.conll");

    let a = fs::read_to_string(d.join("a.conll")).unwrap();
    assert!(!a.contains("ORG") && !a.contains("MISC"));

    let o = tagunify(d, &["eval", "--gold", "test.conll", "--pred", "test.conll"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("F1 = 1.000"));

    fs::write(d.join("h.txt"), "tagset a: PER,LOC\ntagset b: ORG,MISC\n").unwrap();
    let o = tagunify(
        d,
        &[
            "--seed",
            "9",
            "train",
            "--mode",
            "marginal",
            "--hierarchy",
            "h.txt",
            "--data",
            "a=a.conll",
            "--data",
            "b=b.conll",
            "--epochs",
            "2",
            "--learning-rate",
            "0.5",
            "--out",
            "m.model",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = tagunify(
        d,
        &[
            "tag",
            "--model",
            "m.model",
            "--input",
            "test.conll",
            "--out",
            "pred.conll",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = tagunify(
        d,
        &[
            "eval",
            "--gold",
            "test.conll",
            "--pred",
            "pred.conll",
            "--json",
            "m.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    assert!(json.is_object());
}
