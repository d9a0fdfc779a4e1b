use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/two_algorithms")
}

fn manifest() -> String {
    fixture().join("manifest.toml").to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stn-insight"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn analyze_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = run(&["analyze", "-m", &manifest(), "-o", out]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for name in ["features.csv", "stn.dot", "stn.graphml", "partition.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert!(stdout(&res).contains("algo_2 has 0.62 connectivity among all the nodes."));
    let features = std::fs::read_to_string(dir.path().join("features.csv")).unwrap();
    assert_eq!(features, "algorithm,best_performance,average_performance\nalgo_1,100,110\nalgo_2,1,78.081\n");
}

#[test]
fn cluster_number_outside_limits_exits_3_with_limits() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&["analyze", "-m", &manifest(), "-o", dir.path().to_str().unwrap(), "--cluster-number", "2"]);
    assert_eq!(code(&res), 3);
    let err = stderr(&res);
    assert!(err.contains("minimum 27"), "{err}");
    assert!(err.contains("maximum 53"), "{err}");
}

#[test]
fn invalid_percentage_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&["analyze", "-m", &manifest(), "-o", dir.path().to_str().unwrap(), "--volume-size", "150"]);
    assert_eq!(code(&res), 3);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing = run(&["analyze", "--sense", "min", "--input", "a=/does/not/exist.tsv", "-o", out]);
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("/does/not/exist.tsv"));

    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "1\t3\t0,0\n1\tnope\t1,1\n").unwrap();
    let arg = format!("a={}", bad.display());
    let malformed = run(&["analyze", "--sense", "min", "--input", &arg, "-o", out]);
    assert_eq!(code(&malformed), 2);
    assert!(stderr(&malformed).contains(":2:"), "{}", stderr(&malformed));

    let no_sense = run(&["analyze", "--input", &arg, "-o", out]);
    assert_eq!(code(&no_sense), 2);
}

#[test]
fn offline_refuses_remote_endpoint_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "ask",
        "-m",
        &manifest(),
        "-o",
        dir.path().to_str().unwrap(),
        "--task",
        "a",
        "--offline",
        "--endpoint",
        "https://api.example.com/v1/chat/completions",
    ]);
    assert_eq!(code(&res), 4);
    assert!(!dir.path().join("transcripts.jsonl").exists());
}

#[test]
fn unreachable_endpoint_exits_4_and_logs_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let endpoint = format!("http://127.0.0.1:{port}/v1/chat/completions");
    let res = run(&[
        "ask",
        "-m",
        &manifest(),
        "-o",
        dir.path().to_str().unwrap(),
        "--task",
        "b",
        "--endpoint",
        &endpoint,
        "--retries",
        "0",
    ]);
    assert_eq!(code(&res), 4);
    let transcript = std::fs::read_to_string(dir.path().join("transcripts.jsonl")).unwrap();
    let entry: serde_json::Value = serde_json::from_str(transcript.lines().next().unwrap()).unwrap();
    assert_eq!(entry["task"], "B");
    assert!(entry["reply"].is_null());
    assert!(entry["error"].as_str().unwrap().contains("network"));
}

#[test]
fn dump_prompt_prints_exact_text() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&["prompt", "-m", &manifest(), "-o", dir.path().to_str().unwrap(), "--task", "b", "--dump-prompt"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let written = std::fs::read_to_string(dir.path().join("prompt_B.txt")).unwrap();
    assert_eq!(stdout(&res), written);
    assert!(written.contains("- minimum possible number of clusters: 27\n"));
}

#[test]
fn task_c_needs_suggestions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = run(&["prompt", "-m", &manifest(), "-o", out, "--task", "c"]);
    assert_eq!(code(&res), 2);
    std::fs::write(dir.path().join("reply_B.txt"), "[cluster_number=40] [volume_size=8]").unwrap();
    let res = run(&["prompt", "-m", &manifest(), "-o", out, "--task", "c"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let config = std::fs::read_to_string(dir.path().join("config.csv")).unwrap();
    assert_eq!(
        config,
        "configuration,cluster_size,volume_size,cluster_number\nold_configuration,5,5,53\nnew_configuration,5,8,40\n"
    );
    let c2 = std::fs::read_to_string(dir.path().join("prompt_C2.txt")).unwrap();
    assert!(c2.contains("```csv\nconfiguration,cluster_size"));
}

#[test]
fn stub_echo_ask_records_violation() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&["ask", "-m", &manifest(), "-o", dir.path().to_str().unwrap(), "--task", "a", "--offline"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verdict_A.json")).unwrap()).unwrap();
    // The echoed prompt names both answer forms, which is not a single declaration.
    assert_eq!(verdict["kind"], "format_violation");
}

#[test]
fn evaluate_with_votes() {
    let dir = tempfile::tempdir().unwrap();
    let cases = dir.path().join("cases");
    std::fs::create_dir(&cases).unwrap();
    std::fs::write(
        cases.join("a1.toml"),
        r#"id = "a1"
task = "A"
difficulty = "easy"
sense = "minimize"

[[features]]
algorithm = "algo_1"
total_best_global_fitness = 0
connectivity = 0.0
avg_fitness = 110.0
trajectory_count = 10
best_fitness = 100.0

[[features]]
algorithm = "algo_2"
total_best_global_fitness = 1
connectivity = 0.62
avg_fitness = 78.081
trajectory_count = 10
best_fitness = 1.0
"#,
    )
    .unwrap();
    let votes = dir.path().join("votes.csv");
    std::fs::write(
        &votes,
        "evaluator,case_id,repetition,winning_model\nE1,a1,1,m1\nE2,a1,1,m1\nE1,a1,2,m2\nE1,a1,3,m1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "evaluate",
        "--cases",
        cases.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--endpoint",
        "stub://echo",
        "--models",
        "m1,m2",
        "--trials",
        "5",
        "--votes",
        votes.to_str().unwrap(),
        "--offline",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let csv = std::fs::read_to_string(out.join("scorecards.csv")).unwrap();
    assert_eq!(
        csv,
        "task,prompt_type,model,system_score,human_score\nA,1/Easy,m1,0,0.4\nA,1/Easy,m2,0,0.2\n"
    );
}

#[test]
fn conflicting_votes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cases = dir.path().join("cases");
    std::fs::create_dir(&cases).unwrap();
    std::fs::write(
        cases.join("b.toml"),
        "id = \"b\"\ntask = \"B\"\ndifficulty = \"hard\"\n[config]\ncluster_size_pct = 5.0\nvolume_size_pct = 5.0\nmeasure = \"Euclidean\"\ncluster_number = 400\n[limits]\nmin_clusters = 207\nmax_clusters = 574\n",
    )
    .unwrap();
    let votes = dir.path().join("votes.csv");
    std::fs::write(&votes, "evaluator,case_id,repetition,winning_model\nE1,b,1,m1\nE2,b,1,m2\n").unwrap();
    let res = run(&[
        "evaluate",
        "--cases",
        cases.to_str().unwrap(),
        "-o",
        dir.path().join("out").to_str().unwrap(),
        "--endpoint",
        "stub://echo",
        "--models",
        "m1,m2",
        "--votes",
        votes.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("two winners"), "{}", stderr(&res));
}

#[test]
fn render_single_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("features.csv");
    std::fs::write(&csv, "algorithm,best_performance,average_performance\na,-2,3\nb,4,5\n").unwrap();
    let res = run(&["render", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let svg = std::fs::read_to_string(dir.path().join("features.svg")).unwrap();
    assert_eq!(svg.matches("class=\"bar\"").count(), 4);

    std::fs::write(&csv, "x,y\n1,2\n").unwrap();
    assert_eq!(code(&run(&["render", "--csv", csv.to_str().unwrap()])), 2);
}

#[test]
fn export_to_stdout() {
    let res = run(&["export", "-m", &manifest(), "--format", "graphml"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let doc = stdout(&res);
    let parsed = roxmltree::Document::parse(&doc).unwrap();
    assert_eq!(parsed.descendants().filter(|n| n.has_tag_name("node")).count(), 53);
    assert_eq!(code(&run(&["export", "-m", &manifest(), "--format", "png"])), 2);
}

#[test]
fn synth_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let res = run(&["synth", "--seed", "7", "--out", d.to_str().unwrap(), "--algorithms", "3"]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
    }
    for name in ["manifest.toml", "algo_1.tsv", "algo_3.tsv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let res = run(&["analyze", "-m", a.join("manifest.toml").to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(a.join("out/stn.dot").exists());
}
