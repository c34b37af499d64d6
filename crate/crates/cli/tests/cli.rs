use std::path::Path;
use std::process::{Command, Output};

fn cactus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cactus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

#[test]
fn tables_match() {
    let o = cactus(&["verify-tables"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("16/16 rows match, aggregates (3,5,5,8)/(0,3,3,8)"));
}

#[test]
fn injected_fault_names_the_row() {
    let o = cactus(&["verify-tables", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("row 2-3-2"));
    let j = json(&cactus(&["--json", "verify-tables", "--inject-fault"]));
    assert_eq!(j["diffs"][0]["row"], "2-3-2");
}

#[test]
fn brute_count_and_exit_codes() {
    let o = cactus(&["brute-count", "--ball", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("recurrent 16 of 27"));
    let j = json(&cactus(&[
        "--json",
        "brute-count",
        "--ball",
        "1",
        "--chain",
        "0,1,2",
    ]));
    assert_eq!(j["recurrent"], "25088");
    assert_eq!(j["decomposition"], "25088");
    assert_eq!(
        cactus(&["brute-count", "--ball", "2"]).status.code(),
        Some(2)
    );
}

#[test]
fn malformed_graph_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    std::fs::write(&path, "{\"cells\": [0], \"inter_edges\": ").unwrap();
    let o = cactus(&["brute-count", "--graph", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn graph_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b0.json");
    let o = cactus(&["--out", path.to_str().unwrap(), "ball", "--radius", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let o = cactus(&["brute-count", "--graph", path.to_str().unwrap()]);
    assert!(stdout(&o).contains("recurrent 16 of 27"));
}

#[test]
fn fill_check_reports() {
    let j = json(&cactus(&[
        "--json",
        "fill-check",
        "--shape",
        "(()())",
        "--cluster",
        "0,1",
    ]));
    assert_eq!(j["passed"], true);
    assert_eq!(j["missing"], 0);
    let j = json(&cactus(&[
        "--json",
        "fill-check",
        "--ball",
        "1",
        "--cluster",
        "0",
        "--first-wave",
    ]));
    assert_eq!(j["passed"], true);
    assert_eq!(j["rules_only"], 0);
}

#[test]
fn first_wave_histogram() {
    let j = json(&cactus(&["--json", "first-wave-dist", "--ball", "1"]));
    let h = &j["histogram"];
    let waves: u64 = (1..=4).map(|k| h[k.to_string()].as_u64().unwrap()).sum();
    assert_eq!(waves, 15360);
    assert_eq!(j["recurrent"], 25088);
}

#[test]
fn sampling_is_reproducible() {
    let args = [
        "--json",
        "--seed",
        "9",
        "--budget",
        "5000",
        "first-wave-dist",
        "--ball",
        "1",
        "--mode",
        "sampled",
    ];
    let a = cactus(&args);
    let b = cactus(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 9);
}

#[test]
fn manifest_records_digest_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.json");
    let o = cactus(&[
        "--json",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
        "witness",
        "--ball",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let manifest_path = format!("{}.manifest.json", out.display());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(m["command"], "witness");
    assert_eq!(m["seed"], 7);
    let body = std::fs::read(&out).unwrap();
    let again = dir.path().join("w2.json");
    cactus(&[
        "--json",
        "--seed",
        "7",
        "--out",
        again.to_str().unwrap(),
        "witness",
        "--ball",
        "1",
    ]);
    assert_eq!(std::fs::read(&again).unwrap(), body);
    assert_eq!(m["output_digest"].as_str().unwrap().len(), 64);
    assert!(Path::new(&manifest_path).exists());
}

#[test]
fn witness_edge_cases() {
    assert!(stdout(&cactus(&["witness", "--ball", "0"])).contains("none possible"));
    assert!(
        stdout(&cactus(&["--budget", "0", "witness", "--ball", "2"]))
            .contains("none found within budget")
    );
    let j = json(&cactus(&["--json", "witness", "--ball", "1"]));
    assert_eq!(j["found"], true);
}

#[test]
fn series_and_fit() {
    let o = cactus(&["series", "--n", "3"]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,b_n,c_n,c_n_n1.5");
    assert!(rows[1].starts_with("1,12,"));
    assert!(rows[2].starts_with("2,240,"));
    let j = json(&cactus(&["exponent-fit"]));
    assert!((j["slope"].as_f64().unwrap() + 1.5).abs() < 0.01);
    assert_eq!(j["window"], serde_json::json!([2000, 10000]));
    assert_eq!(
        cactus(&["exponent-fit", "--n-min", "10", "--n-max", "5"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn phi_and_census() {
    let j = json(&cactus(&["--json", "phi", "--n", "1"]));
    assert_eq!(j["clusters"].as_array().unwrap().len(), 1);
    assert_eq!(cactus(&["phi", "--n", "40"]).status.code(), Some(2));
    let text = stdout(&cactus(&["radical-census", "--max-depth", "2"]));
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows[1].starts_with("0,1,1,"));
    assert!(rows[2].starts_with("1,3,3/2,"));
    assert!(rows[3].starts_with("2,7,7/4,"));
}
