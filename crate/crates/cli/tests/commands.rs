use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const TABLE: &str = "story 1.0 0.0\nnews 0.9 0.1\nlegal 0.0 1.0\nterms 0.1 0.9\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_harmonic-extract"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Temp workspace with `pages/`, `embeddings.txt` and the given pages.
fn workspace(pages: &[(&str, &str)]) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("pages")).unwrap();
    fs::write(dir.path().join("embeddings.txt"), TABLE).unwrap();
    for (id, html) in pages {
        fs::write(dir.path().join("pages").join(format!("{id}.html")), html).unwrap();
    }
    dir
}

fn extract(dir: &Path, extra: &[&str]) -> Output {
    let pages = dir.join("pages");
    let emb = dir.join("embeddings.txt");
    let out = dir.join("pred");
    let mut args = vec![
        "extract",
        pages.to_str().unwrap(),
        "--embeddings",
        emb.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn truth(id: &str, blocks: &[(&str, &str, u8)]) -> Value {
    json!({
        "page_id": id,
        "blocks": blocks.iter().map(|(p, h, l)| json!({"dom_path": p, "text_hash": h, "label": l})).collect::<Vec<_>>(),
    })
}

fn prediction(id: &str, blocks: &[(&str, &str, u8)]) -> Value {
    json!({
        "page_id": id,
        "config": {},
        "blocks": blocks.iter().map(|(p, h, l)| json!({
            "dom_path": p, "text_hash": h, "label": l, "score": f64::from(*l), "seed": false,
        })).collect::<Vec<_>>(),
    })
}

fn write_value(path: &Path, v: &Value) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

#[test]
fn article_and_footer_are_both_seeds() {
    let dir = workspace(&[(
        "p1",
        "<html><body><article><p>story news</p></article><footer><p>legal terms</p></footer></body></html>",
    )]);
    let out = extract(dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pred = read_json(&dir.path().join("pred/p1.json"));
    let blocks = pred["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 2);
    assert_eq!(blocks[0]["label"], 1);
    assert_eq!(blocks[1]["label"], 0);
    assert!(blocks.iter().all(|b| b["seed"] == true));
    assert_eq!(pred["page_id"], "p1");
    assert_eq!(pred["config"]["kernel"], "rbf");
}

#[test]
fn unseeded_twin_takes_the_relevant_side() {
    let dir = workspace(&[(
        "p2",
        "<body><article><p>story</p></article><div><p>story</p></div><footer><p>legal</p></footer></body>",
    )]);
    assert_eq!(code(&extract(dir.path(), &[])), 0);
    let pred = read_json(&dir.path().join("pred/p2.json"));
    let b = &pred["blocks"][1];
    assert_eq!(b["seed"], false);
    assert_eq!(b["label"], 1);
    let score = b["score"].as_f64().unwrap();
    let hand = 1.0 / (1.0 + (-0.5f64).exp());
    assert!((score - hand).abs() < 1e-8, "{score}");
}

#[test]
fn empty_html_gives_empty_blocks() {
    let dir = workspace(&[("blank", "")]);
    let out = extract(dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pred = read_json(&dir.path().join("pred/blank.json"));
    assert_eq!(pred["blocks"], json!([]));
}

#[test]
fn prediction_files_are_canonical() {
    let dir = workspace(&[(
        "p1",
        "<article><p>story</p></article><footer><p>legal</p></footer>",
    )]);
    assert_eq!(code(&extract(dir.path(), &[])), 0);
    let text = fs::read_to_string(dir.path().join("pred/p1.json")).unwrap();
    assert!(text.ends_with("}\n"));
    let value: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(text, serde_json::to_string_pretty(&value).unwrap() + "\n");
}

#[test]
fn extract_is_byte_deterministic() {
    let dir = workspace(&[
        (
            "a",
            "<article><p>story news</p></article><div>news story</div><nav><a>terms</a></nav>",
        ),
        (
            "b",
            "<article><p>news</p></article><p>legal story</p><footer><p>legal</p></footer>",
        ),
    ]);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert_eq!(code(&extract(dir.path(), &["--jobs", "1"])), 0);
    fs::rename(dir.path().join("pred"), &first).unwrap();
    assert_eq!(code(&extract(dir.path(), &["--jobs", "4"])), 0);
    fs::rename(dir.path().join("pred"), &second).unwrap();
    for id in ["a", "b"] {
        let name = format!("{id}.json");
        assert_eq!(
            fs::read(first.join(&name)).unwrap(),
            fs::read(second.join(&name)).unwrap()
        );
    }
}

#[test]
fn exit_codes() {
    let dir = workspace(&[("plain", "<p>story</p>")]);
    // no rule fires and no truth to fall back on
    let out = extract(dir.path(), &[]);
    assert_eq!(code(&out), 2);
    let line = String::from_utf8_lossy(&out.stderr);
    assert!(line.contains("\"page\":\"plain\""), "{line}");

    assert_eq!(code(&extract(dir.path(), &["--seed-fraction", "1.5"])), 1);
    assert_eq!(code(&extract(dir.path(), &["--kernel", "cosine"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);

    let missing = run(&[
        "extract",
        dir.path().join("pages").to_str().unwrap(),
        "--embeddings",
        "/nonexistent/table.txt",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_ne!(code(&missing), 0);
}

#[test]
fn convergence_failure_exits_3() {
    let dir = workspace(&[(
        "slow",
        "<article><p>story</p></article><div>news</div><div>story news</div><p>terms legal</p><footer><p>legal</p></footer>",
    )]);
    let out = extract(dir.path(), &["--max-iters", "1", "--tol", "1e-15"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn continue_on_error_writes_the_good_pages() {
    let dir = workspace(&[
        ("bad", "<p>story</p>"),
        (
            "good",
            "<article><p>story</p></article><footer><p>legal</p></footer>",
        ),
    ]);
    let out = extract(dir.path(), &["--continue-on-error"]);
    assert_eq!(code(&out), 2);
    assert!(dir.path().join("pred/good.json").exists());
    assert!(!dir.path().join("pred/bad.json").exists());
}

#[test]
fn truth_seeding_from_cli() {
    let dir = workspace(&[(
        "t",
        "<div><p>story</p><p>news</p><p>legal</p><p>terms</p></div>",
    )]);
    let extracted = {
        let doc = harmonic_extract::parse_document(
            "<div><p>story</p><p>news</p><p>legal</p><p>terms</p></div>",
        );
        harmonic_extract::extract_text_blocks(&doc)
    };
    let labels = [1u8, 1, 0, 0];
    let blocks: Vec<(&str, &str, u8)> = extracted
        .iter()
        .zip(labels)
        .map(|(b, l)| (b.dom_path.as_str(), b.text_hash.as_str(), l))
        .collect();
    write_value(&dir.path().join("truth/t.json"), &truth("t", &blocks));
    let t = dir.path().join("truth");
    let out = extract(
        dir.path(),
        &[
            "--seed-mode",
            "truth",
            "--seed-fraction",
            "0.5",
            "--seed-strategy",
            "random",
            "--seed-rng",
            "3",
            "--truth",
            t.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pred = read_json(&dir.path().join("pred/t.json"));
    let seeds = pred["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|b| b["seed"] == true)
        .count();
    assert_eq!(seeds, 2);
}

#[test]
fn evaluate_identical_dirs() {
    let dir = TempDir::new().unwrap();
    let blocks = [
        ("/p[1]/#text[1]", "0123456789abcdef", 1),
        ("/p[2]/#text[1]", "fedcba9876543210", 0),
    ];
    write_value(&dir.path().join("pred/x.json"), &prediction("x", &blocks));
    write_value(&dir.path().join("truth/x.json"), &truth("x", &blocks));
    let report = dir.path().join("report.json");
    let out = run(&[
        "evaluate",
        "--pred",
        dir.path().join("pred").to_str().unwrap(),
        "--truth",
        dir.path().join("truth").to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&report);
    assert_eq!(r["summary"]["accuracy"]["mean"], 1.0);
    assert_eq!(r["pages"][0]["fn"], 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("macro-avg"));
}

#[test]
fn evaluate_disjoint_ids_fails() {
    let dir = TempDir::new().unwrap();
    let blocks = [("/p[1]/#text[1]", "0123456789abcdef", 1)];
    write_value(&dir.path().join("pred/x.json"), &prediction("x", &blocks));
    write_value(&dir.path().join("truth/y.json"), &truth("y", &blocks));
    let out = run(&[
        "evaluate",
        "--pred",
        dir.path().join("pred").to_str().unwrap(),
        "--truth",
        dir.path().join("truth").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn evaluate_macro_mean_of_two_pages() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<String> = (1..=5)
        .map(|k| format!("/div[1]/p[{k}]/#text[1]"))
        .collect();
    let hash = "00000000000000aa";
    // page a: 3 of 5 right, page b: 4 of 5 right
    for (id, wrong) in [("a", 2), ("b", 1)] {
        let t: Vec<_> = paths.iter().map(|p| (p.as_str(), hash, 1)).collect();
        let p: Vec<_> = paths
            .iter()
            .enumerate()
            .map(|(k, p)| (p.as_str(), hash, u8::from(k >= wrong)))
            .collect();
        write_value(&dir.path().join(format!("truth/{id}.json")), &truth(id, &t));
        write_value(
            &dir.path().join(format!("pred/{id}.json")),
            &prediction(id, &p),
        );
    }
    let report = dir.path().join("r.json");
    let out = run(&[
        "evaluate",
        "--pred",
        dir.path().join("pred").to_str().unwrap(),
        "--truth",
        dir.path().join("truth").to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let r = read_json(&report);
    let mean = r["summary"]["accuracy"]["mean"].as_f64().unwrap();
    assert!((mean - 0.7).abs() < 1e-12, "{mean}");
}

#[test]
fn evaluate_rejects_bad_truth_schema() {
    let dir = TempDir::new().unwrap();
    write_value(
        &dir.path().join("pred/x.json"),
        &prediction("x", &[("/p[1]/#text[1]", "0123456789abcdef", 1)]),
    );
    write_value(
        &dir.path().join("truth/x.json"),
        &truth("x", &[("/p[1]/#text[1]", "0123456789abcdef", 2)]),
    );
    let out = run(&[
        "evaluate",
        "--pred",
        dir.path().join("pred").to_str().unwrap(),
        "--truth",
        dir.path().join("truth").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn real_page_through_the_binary() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "extract",
        fixtures().join("real").to_str().unwrap(),
        "--embeddings",
        fixtures()
            .join("synthetic/embeddings.txt")
            .to_str()
            .unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pred = read_json(&dir.path().join("harbour-bridge.json"));
    let blocks = pred["blocks"].as_array().unwrap();
    assert!(blocks.len() > 20);
    let body = blocks
        .iter()
        .find(|b| b["dom_path"] == "/html[1]/body[1]/main[1]/article[1]/p[2]/#text[1]")
        .expect("article paragraph present");
    assert_eq!(body["label"], 1);
    assert!(!blocks
        .iter()
        .any(|b| b["dom_path"].as_str().unwrap().contains("script")));
}

#[test]
fn synth_matches_bundled_corpus() {
    let dir = TempDir::new().unwrap();
    let out = run(&["synth", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let bundled = fixtures().join("synthetic");
    let mut rels = vec![PathBuf::from("embeddings.txt")];
    for sub in ["pages", "truth"] {
        let mut names: Vec<_> = fs::read_dir(bundled.join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names.len(), 10);
        rels.extend(names.into_iter().map(|n| Path::new(sub).join(n)));
    }
    for rel in rels {
        assert_eq!(
            fs::read(dir.path().join(&rel)).unwrap(),
            fs::read(bundled.join(&rel)).unwrap(),
            "{}",
            rel.display()
        );
    }
}
