//! End-to-end tests of the binary: spawned as a child process, exercising
//! the verb/format matrix, the exit-code contract, and the canonical JSON
//! guarantees.

use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_padic-stirling"));
    // Keep runs hermetic even if the ambient environment configures a
    // default precision.
    cmd.env_remove("PADIC_STIRLING_PRECISION");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

fn parse_json(output: &Output) -> Value {
    serde_json::from_str(&stdout(output)).expect("stdout is JSON")
}

#[test]
fn stirling_exact_example() {
    let out = run(&["stirling", "8", "5"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "1050");
}

#[test]
fn stirling_modular_residue() {
    // 1050 = 1024 + 26.
    let out = run(&["stirling", "8", "5", "--mod", "2", "10"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "26");
}

#[test]
fn stirling_json_reports_value_and_invocation() {
    let out = run(&["stirling", "8", "5", "--format", "json"]);
    let v = parse_json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["verb"], "stirling");
    assert_eq!(v["value"], "1050");
    assert_eq!(v["invocation"][0], "stirling");
}

#[test]
fn valuation_example() {
    let out = run(&["valuation", "2", "8", "5"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "1");
}

#[test]
fn valuation_of_zero_prints_inf() {
    // S(3, 5) = 0.
    let out = run(&["valuation", "2", "3", "5"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "inf");
    let v = parse_json(&run(&["valuation", "2", "3", "5", "--format", "json"]));
    assert_eq!(v["v"], "inf");
}

#[test]
fn valuation_handles_huge_n() {
    // v_2(S(2^40, 5)) = v_2(k!·S) − v_2(5!) = 4 − 3 = 1.
    let n = (1u64 << 40).to_string();
    let out = run(&["valuation", "2", &n, "5"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "1");
}

#[test]
fn valuation_csv_table() {
    let out = run(&["valuation", "2", "5", "5", "--to", "12", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,valuation");
    assert_eq!(lines.len(), 1 + 8); // header + n = 5..=12
    assert!(lines.contains(&"8,1"), "v_2(S(8,5)) = 1 missing: {text}");
    assert!(lines.contains(&"12,3"), "v_2(S(12,5)) = 3 missing: {text}");
}

#[test]
fn unknown_verb_is_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_prime_is_usage_error() {
    let out = run(&["valuation", "4", "8", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not a prime"));
    // The error goes to stderr only; stdout stays machine-clean.
    assert!(stdout(&out).is_empty());
}

#[test]
fn unsupported_format_is_usage_error() {
    assert_eq!(run(&["stirling", "8", "5", "--format", "dot"]).status.code(), Some(2));
    assert_eq!(run(&["tree", "2", "5", "--depth", "4", "--format", "csv"]).status.code(), Some(2));
    assert_eq!(run(&["valuation", "2", "8", "5", "--format", "dot"]).status.code(), Some(2));
}

#[test]
fn empty_tree_serializes_with_mu_zero() {
    // k = 1: S(n, 1) = 1, no active chains at all.
    let out = run(&["tree", "2", "1", "--depth", "3", "--format", "json"]);
    assert!(out.status.success());
    let v = parse_json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["mu"], 0);
    assert_eq!(v["chains"], Value::Array(vec![]));
}

#[test]
fn tree_json_round_trip_is_byte_identical() {
    let out = run(&["tree", "2", "5", "--depth", "6", "--format", "json"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let parsed: Value = serde_json::from_str(&text).expect("valid JSON");
    let re_exported = format!("{}\n", serde_json::to_string_pretty(&parsed).unwrap());
    assert_eq!(re_exported, text);
}

#[test]
fn tree_json_matches_schema() {
    let out = run(&["tree", "2", "5", "--depth", "6", "--format", "json"]);
    let v = parse_json(&out);
    for key in ["p", "k", "mu", "m0_observed", "chains", "schema_version"] {
        assert!(v.get(key).is_some(), "missing key {key}");
    }
    let chains = v["chains"].as_array().unwrap();
    assert_eq!(chains.len(), 2);
    for chain in chains {
        for key in ["a0", "alpha", "l", "x0_digits", "levels"] {
            assert!(chain.get(key).is_some(), "missing chain key {key}");
        }
        assert_eq!(chain["l"], 1);
        let digits = chain["x0_digits"].as_array().unwrap();
        assert_eq!(digits.len(), 6, "one digit per level");
        assert!(digits.iter().all(|d| d == 0 || d == 1));
        let levels = chain["levels"].as_array().unwrap();
        assert!(!levels.is_empty());
        for level in levels {
            for key in ["m", "n_modulus", "least_valuation", "status"] {
                assert!(level.get(key).is_some(), "missing level key {key}");
            }
            // Moduli are decimal strings (arbitrary size), valuations integers.
            assert!(level["n_modulus"].is_string());
            assert!(level["least_valuation"].is_u64());
        }
    }
}

#[test]
fn tree_dot_matches_the_split_law() {
    let out = run(&["tree", "3", "2", "--depth", "3", "--format", "dot"]);
    assert!(out.status.success());
    let dot = stdout(&out);
    let node_lines = dot.lines().filter(|l| l.contains("shape=")).count();

    // Independent check through the library: total nodes, and the split law
    // "every expanded node contributes exactly p children".
    let tree = padic_stirling::tree::build_tree(3, 2, 3, None).unwrap();
    fn walk(node: &padic_stirling::tree::ClassNode, nodes: &mut usize, expanded: &mut usize) {
        *nodes += 1;
        if !node.children.is_empty() {
            *expanded += 1;
        }
        for child in &node.children {
            walk(child, nodes, expanded);
        }
    }
    let (mut nodes, mut expanded) = (0usize, 0usize);
    for root in &tree.roots {
        walk(root, &mut nodes, &mut expanded);
    }
    assert_eq!(node_lines, nodes);
    assert_eq!(nodes, tree.roots.len() + 3 * expanded);

    // Constant classes are boxed, active classes circled.
    assert!(dot.contains("shape=box"));
    assert!(dot.contains("shape=ellipse"));
    assert!(dot.contains("mod 2 : "), "labels carry the class modulus");
}

#[test]
fn precision_env_var_and_flag() {
    let out = bin()
        .args(["tree", "2", "1", "--depth", "3", "--format", "json"])
        .env("PADIC_STIRLING_PRECISION", "96")
        .output()
        .unwrap();
    assert_eq!(parse_json(&out)["precision"], 96);

    // The explicit flag wins over the environment.
    let out = bin()
        .args(["tree", "2", "1", "--depth", "3", "--format", "json", "--precision", "80"])
        .env("PADIC_STIRLING_PRECISION", "96")
        .output()
        .unwrap();
    assert_eq!(parse_json(&out)["precision"], 80);

    // A malformed value is a configuration error, loudly.
    let out = bin()
        .args(["tree", "2", "1", "--depth", "3"])
        .env("PADIC_STIRLING_PRECISION", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_refines_to_requested_digits() {
    let out = run(&["zero", "7", "3", "--a0", "1", "--prec", "10", "--format", "json"]);
    assert!(out.status.success());
    let v = parse_json(&out);
    let zeros = v["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 1);
    assert_eq!(zeros[0]["digits"].as_array().unwrap().len(), 10);
    // The zero of branch a = 1 sits at x = 0 (n = 1 has S(1, 3) = 0).
    assert_eq!(zeros[0]["residue"], "0");
    assert_eq!(zeros[0]["l"], 1);
}

#[test]
fn zero_on_constant_branch_fails_with_exit_1() {
    let out = run(&["zero", "7", "3", "--a0", "0", "--prec", "6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("no active chain"));
}

#[test]
fn verify_lengwan_example_passes() {
    let out = run(&["verify", "lengwan", "--kmax", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("result: PASS"));
}

#[test]
fn verify_json_carries_the_report() {
    let out = run(&["verify", "structure", "7", "3", "--depth", "6", "--format", "json"]);
    assert!(out.status.success());
    let v = parse_json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["verb"], "verify");
    assert_eq!(v["claim_id"], "structure");
    assert_eq!(v["pass"], true);
    assert_eq!(v["derived"]["mu"], "2");
}

#[test]
fn sweep_csv_lists_every_cell() {
    let out = run(&["sweep", "--p-range", "5", "7", "--k-range", "3", "4", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,k,mu,max_slope,slopes,error");
    assert_eq!(lines.len(), 1 + 4, "primes {{5,7}} × k {{3,4}}: {text}");
    assert!(lines.contains(&"5,3,3,1,1;1;1,"), "mu(5,3) = 3: {text}");
    // The progress line stays on stderr, out of the machine stream.
    assert!(stderr(&out).contains("sweeping 4 cells"));
}

#[test]
fn out_flag_writes_the_file_and_keeps_stdout_empty() {
    let path = std::env::temp_dir().join(format!("padic-stirling-cli-test-{}", std::process::id()));
    let out = run(&["stirling", "8", "5", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "1050\n");
    std::fs::remove_file(&path).ok();
}
