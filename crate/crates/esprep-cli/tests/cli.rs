use std::process::Command;

fn esprep() -> Command {
    Command::new(env!("CARGO_BIN_EXE_esprep"))
}

fn write(path: &std::path::Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

const DOCS: &str = concat!(
    r#"{"source":"a","text":"Una frase bastante larga con muchas palabras distintas aquí. Otra frase igualmente razonable para pasar los filtros."}"#,
    "\n",
    r#"{"source":"a","text":"Una frase bastante larga con muchas palabras distintas aquí. Otra frase igualmente razonable para pasar los filtros."}"#,
    "\n",
    r#"{"source":"a","text":"El segundo documento habla de cosas totalmente diferentes al resto. También tiene dos frases completas para el filtro."}"#,
    "\n",
);

#[test]
fn ingest_clean_dedup_chain() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.jsonl");
    write(&raw, DOCS);

    let corpus = dir.path().join("corpus.jsonl");
    let st = esprep().args(["ingest"]).arg(&raw).arg("-o").arg(&corpus).status().unwrap();
    assert!(st.success());

    let cleaned = dir.path().join("clean.jsonl");
    let st = esprep().args(["clean"]).arg(&corpus).arg("-o").arg(&cleaned).status().unwrap();
    assert!(st.success());

    let deduped = dir.path().join("dedup.jsonl");
    let st = esprep().args(["dedup"]).arg(&cleaned).arg("-o").arg(&deduped).status().unwrap();
    assert!(st.success());
    let out = std::fs::read_to_string(&deduped).unwrap();
    assert_eq!(out.lines().count(), 2, "exact duplicate not removed");
}

#[test]
fn exit_codes_match_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.jsonl");

    // I/O error -> 3.
    let st = esprep()
        .args(["clean"])
        .arg(dir.path().join("missing.jsonl"))
        .arg("-o")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(3));

    // Config error -> 1.
    let input = dir.path().join("in.jsonl");
    write(&input, DOCS);
    let st = esprep()
        .args(["clean"])
        .arg(&input)
        .arg("-o")
        .arg(&out)
        .args(["--max-symbol-ratio", "7"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));

    // Data error -> 2.
    let bad = dir.path().join("bad.jsonl");
    write(&bad, "not json\n");
    let st = esprep().args(["clean"]).arg(&bad).arg("-o").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn evaluate_reports_identity_scores() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.txt");
    let refs = dir.path().join("ref.txt");
    write(&pred, "el gato come pescado fresco\n");
    write(&refs, "el gato come pescado fresco\n");
    let out = esprep()
        .args(["evaluate", "--metric", "rouge,bleu,f1", "--pred"])
        .arg(&pred)
        .arg("--ref")
        .arg(&refs)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("\"metric\": \"bleu\""), "{stdout}");
    assert!(stdout.contains("100.0"), "{stdout}");
}

#[test]
fn run_pipeline_from_toml() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    write(&input, DOCS);
    let workdir = dir.path().join("work");
    let cfg = dir.path().join("pipe.toml");
    write(
        &cfg,
        &format!(
            "seed = 1\nworkers = 2\ninput = {:?}\nworkdir = {:?}\nstages = [\"clean\", \"dedup\"]\n",
            input, workdir
        ),
    );
    let out = esprep().args(["run"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert!(workdir.join("manifest.json").exists());
    assert!(workdir.join("dedup.jsonl").exists());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("clean"), "{stdout}");

    // Out-of-order stages are refused up front.
    let bad_cfg = dir.path().join("bad.toml");
    write(
        &bad_cfg,
        &format!(
            "input = {:?}\nworkdir = {:?}\nstages = [\"dedup\", \"clean\"]\n",
            input, workdir
        ),
    );
    let out = esprep().args(["run"]).arg(&bad_cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
