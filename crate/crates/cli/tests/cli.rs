use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coulomb-hs"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("COULOMB_HS_THREADS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("coulomb-hs-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn generated(kind: &str, n: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["generate", kind, "--n", n];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    scratch(&format!("{kind}-{n}{}.json", extra.join("")), &stdout(&o))
}

const FIG2_D2: &str = r#"{"nodes":[
  {"id":"g","kind":"gauge","group":{"family":"U","n":1}},
  {"id":"f","kind":"flavor","group":{"family":"U","n":2}}],
  "edges":[["g","f"]]}"#;

#[test]
fn nilpotent_report_names_su6() {
    let p = generated("nilpotent", "6", &[]);
    let o = run(&["report", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("A_5 balanced; predicted SU(6)\n"), "{}", stdout(&o));
}

#[test]
fn bouquet_report_has_abelian_part() {
    let p = generated("bouquet", "6", &[]);
    let out = stdout(&run(&["report", p.to_str().unwrap()]));
    assert!(out.starts_with("A_5 balanced; predicted SU(6) + abelian rank 5"), "{out}");
    assert!(out.contains("decoupled U(1): yes"));
}

#[test]
fn lone_node_has_no_symmetry() {
    let p = scratch(
        "lone.json",
        r#"{"nodes":[{"id":"x","kind":"gauge","group":{"family":"U","n":3}}],"edges":[]}"#,
    );
    let out = stdout(&run(&["report", p.to_str().unwrap()]));
    assert!(out.starts_with("no balanced subquiver"), "{out}");
    assert!(out.contains("x          -6"));
}

#[test]
fn hs_fig2_closed_form() {
    let p = scratch("fig2.json", FIG2_D2);
    let o = run(&["hs", p.to_str().unwrap(), "--order", "4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("1 + 3*t^2 + 5*t^4"));
}

#[test]
fn hs_bouquet2_linear_term() {
    let p = generated("bouquet", "2", &[]);
    let o = run(&["hs", p.to_str().unwrap(), "--order", "1", "--ungauge", "b1", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["series"]["coeffs"]["1"], "4");
}

#[test]
fn missing_ungauge_is_a_computational_error_naming_the_flag() {
    let p = generated("bouquet", "3", &[]);
    let o = run(&["hs", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--ungauge"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn malformed_quiver_points_at_the_edge() {
    let p = scratch(
        "bad.json",
        r#"{"nodes":[{"id":"a","kind":"gauge","group":{"family":"U","n":1}}],"edges":[["a","z"]]}"#,
    );
    let o = run(&["hs", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("edge #0"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(run(&["hs"]).status.code(), Some(1));
    assert_eq!(run(&["generate", "nilpotent", "--n", "1"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn manifest_is_reproducible_and_threads_do_not_change_output() {
    let p = generated("bouquet", "4", &[]);
    let path = p.to_str().unwrap();
    let get = |threads: &str| -> Value {
        let o =
            run(&["hs", path, "--order", "4", "--ungauge", "b1", "--json", "--threads", threads]);
        assert!(o.status.success());
        let mut v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        v["manifest"].as_object_mut().unwrap().remove("wall_time_ms");
        v
    };
    let one = get("1");
    assert_eq!(one, get("1"));
    assert_eq!(one, get("4"));
    assert_eq!(one["series"]["coeffs"]["2"], "18");
    assert_eq!(one["manifest"]["order"], 4);
}

#[test]
fn series_json_round_trips() {
    let p = generated("nilpotent", "3", &[]);
    let o = run(&["hs", p.to_str().unwrap(), "--pl", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let s = coulomb_core::series::TruncatedSeries::<num_bigint::BigInt>::from_json(&v["series"])
        .unwrap();
    assert_eq!(s.to_json(), v["series"]);
    assert_eq!(v["pl"]["coeffs"]["2"], "8");
}

#[test]
fn gale_of_one_one() {
    let p = scratch("m.json", r#"{"n":1,"d":2,"columns":[[1],[1]]}"#);
    let o = run(&["gale", p.to_str().unwrap(), "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let cols = &v["dual"]["columns"];
    assert!(cols == &serde_json::json!([[1], [-1]]) || cols == &serde_json::json!([[-1], [1]]));
    assert_eq!(v["report"]["dim_primal"], 4);
    assert_eq!(v["report"]["dim_dual"], 4);
}

#[test]
fn gale_rank_deficient_is_rejected() {
    let p = scratch("rd.json", r#"{"n":2,"d":2,"columns":[[1,2],[2,4]]}"#);
    assert_eq!(run(&["gale", p.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn implosion_check_and_negative_control() {
    let o = run(&["implosion-check", "--n", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("PASS t^2 coefficient: 28"));
    let o = run(&["implosion-check", "--n", "3", "--prefactor-exponent", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL refined integral"));
}

#[test]
fn dn_generator_shapes() {
    let b: Value =
        serde_json::from_str(&stdout(&run(&["generate", "dn", "--n", "3", "--bouquet"]))).unwrap();
    let f: Value =
        serde_json::from_str(&stdout(&run(&["generate", "dn", "--n", "3", "--flavor"]))).unwrap();
    let flavors =
        |v: &Value| v["nodes"].as_array().unwrap().iter().filter(|n| n["kind"] == "flavor").count();
    assert_eq!(flavors(&b), 0);
    assert_eq!(flavors(&f), 1);
}

#[test]
fn check_suite_passes_and_is_deterministic() {
    let a = run(&["check-suite", "--json"]);
    assert!(a.status.success(), "{}", stdout(&a));
    let b = run(&["check-suite", "--json"]);
    let va: Value = serde_json::from_str(&stdout(&a)).unwrap();
    let vb: Value = serde_json::from_str(&stdout(&b)).unwrap();
    assert_eq!(va["result_sha256"], vb["result_sha256"]);
    let d3 = va["checks"].as_array().unwrap().iter().find(|c| c["id"] == 7).unwrap();
    assert!(d3["computed"].as_str().unwrap().contains("D_3:18"));
}
