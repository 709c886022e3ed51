use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
mode = zeroshot_softalign
target = pseudo
pseudo_window = 2
pseudo_fertility = 0.2
train_size = 60
dev_size = 20
test_size = 20
epochs = 1
batch_size = 16
d_e = 8
d_h = 4
seeds = 1
align_eval_pairs = 10
";

fn xnlu(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_xnlu")).args(args).env("RUST_LOG", "warn").output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn train_writes_a_report_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let reports: Vec<serde_json::Value> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            xnlu(&["train", "--config", p(&cfg), "--out", p(&out), "--seed", "3"]);
            let mut r: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(out.join("zeroshot_softalign.json")).unwrap()).unwrap();
            r.as_object_mut().unwrap().remove("timing");
            r
        })
        .collect();
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0]["seeds"][0]["seed"], 3);
    assert!(reports[0]["mean"]["target"]["slot_f1"].is_number());

    let out = dir.path().join("m");
    xnlu(&["train", "--config", p(&cfg), "--out", p(&out), "--mode", "zeroshot_hardalign", "--no-joint-src"]);
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("zeroshot_hardalign.json")).unwrap()).unwrap();
    assert_eq!(r["config"]["no_joint_src"], true);
    assert_eq!(r["config"]["selection"], "last_epoch");
}

#[test]
fn curve_and_ablate_write_one_file_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("curve");
    let stdout = xnlu(&["curve", "--config", p(&cfg), "--out", p(&out), "--sizes", "0,10"]).stdout;
    assert!(out.join("curve-0.json").exists() && out.join("curve-10.json").exists());
    assert!(String::from_utf8(stdout).unwrap().contains("monotone:"));
    let out = dir.path().join("ablate");
    let stdout = String::from_utf8(xnlu(&["ablate", "--config", p(&cfg), "--out", p(&out)]).stdout).unwrap();
    assert!(out.join("ablation.json").exists());
    assert_eq!(stdout.lines().count(), 3);
}

#[test]
fn bitext_align_and_score_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let bitext = dir.path().join("bitext");
    xnlu(&["gen-bitext", "--size", "80", "--window", "1", "--out", p(&bitext)]);
    for f in ["source.tsv", "target.tsv", "translations.tsv", "gold.align"] {
        assert!(bitext.join(f).exists(), "{f}");
    }
    let aligned = dir.path().join("aligned");
    xnlu(&[
        "align",
        "--source",
        p(&bitext.join("source.tsv")),
        "--translations",
        p(&bitext.join("translations.tsv")),
        "--out",
        p(&aligned),
    ]);
    let gold_links = fs::read_to_string(bitext.join("gold.align")).unwrap();
    let viterbi = fs::read_to_string(aligned.join("viterbi.align")).unwrap();
    assert_eq!(gold_links.lines().count(), viterbi.lines().count());

    let conll = dir.path().join("dump.txt");
    let stdout = xnlu(&[
        "score",
        "--gold",
        p(&bitext.join("target.tsv")),
        "--pred",
        p(&aligned.join("projected.tsv")),
        "--conll",
        p(&conll),
    ])
    .stdout;
    let scores: serde_json::Value = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(scores["intent_accuracy"], 1.0);
    assert!(scores["slot_f1"].as_f64().unwrap() > 0.9);
    let dump = fs::read_to_string(conll).unwrap();
    assert_eq!(dump.matches("\n\n").count(), 80);
    assert!(dump.lines().all(|l| l.is_empty() || l.split(' ').count() == 3));
}

#[test]
fn bad_input_fails_with_a_message() {
    let out = Command::new(env!("CARGO_BIN_EXE_xnlu"))
        .args(["train", "--config", "/no/such.cfg"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such.cfg"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_xnlu"))
        .args(["train", "--config", p(&cfg), "--out", p(dir.path()), "--mode", "zeroshot_nomt", "--no-joint-src"])
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to train on"));
}
