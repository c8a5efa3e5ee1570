use std::path::PathBuf;
use std::process::{Command, Output};

fn gfol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfol"))
        .args(args)
        .env_remove("GFOL_SEED")
        .output()
        .expect("gfol runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn model_file(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn models_lists_five_families() {
    let o = gfol(&["models"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 6);

    let o = gfol(&["models", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&gfol(&["models", "--bogus"])), 64);
    assert_eq!(code(&gfol(&["verify"])), 64);
    assert_eq!(code(&gfol(&["closed-form", "--mu0", "1", "--t", "-1"])), 64);
    assert_eq!(code(&gfol(&["--help"])), 0);
}

#[test]
fn input_errors_exit_65() {
    assert_eq!(code(&gfol(&["verify", "--builtin", "nosuch"])), 65);
    assert_eq!(code(&gfol(&["verify", "--model", "/nonexistent.json"])), 65);
    assert_eq!(
        code(&gfol(&[
            "closed-form",
            "--mu0",
            "-1",
            "--phi",
            "1",
            "--t",
            "-1"
        ])),
        65
    );
    assert_eq!(
        code(&gfol(&[
            "flow",
            "--builtin",
            "heisenberg:1",
            "--phi",
            "1",
            "--dt",
            "0.5"
        ])),
        65
    );
}

#[test]
fn verify_labels_and_expectations() {
    let o = gfol(&["verify", "--builtin", "heisenberg:2,3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("class: weak contact metric, non-normal"));

    assert_eq!(
        code(&gfol(&[
            "verify",
            "--builtin",
            "heisenberg:1",
            "--expect",
            "sasakian-classical"
        ])),
        0
    );
    assert_eq!(
        code(&gfol(&[
            "verify",
            "--builtin",
            "heisenberg:2",
            "--expect",
            "sasakian-classical"
        ])),
        1
    );
    assert_eq!(
        code(&gfol(&[
            "verify",
            "--model",
            &model_file("sasakian3.json"),
            "--expect",
            "Sasakian (classical)"
        ])),
        0
    );
}

#[test]
fn verify_p_contact_residuals_vanish() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = gfol(&[
        "verify",
        "--builtin",
        "quat_heisenberg:1",
        "--kind",
        "p_contact",
        "--json",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let res = v["classification"]["residuals"].as_object().unwrap();
    for key in [
        "composition",
        "phi_xi",
        "eta_phi",
        "eta_xi",
        "q_xi",
        "q_phi_commutator",
        "rank",
    ] {
        assert_eq!(res[&format!("axioms.{key}")], 0.0, "{key}");
    }
}

#[test]
fn perturbation_runs_record_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    let o = Command::new(env!("CARGO_BIN_EXE_gfol"))
        .args([
            "--manifest",
            manifest.to_str().unwrap(),
            "verify",
            "--builtin",
            "heisenberg:1",
            "--perturb",
            "20",
        ])
        .env("GFOL_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("20/20 pass (seed 77"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(v["seed"], 77);
    assert_eq!(v["command"], "verify");
    assert_eq!(v["inputs"][0], "heisenberg:1");

    let a = gfol(&[
        "verify",
        "--builtin",
        "heisenberg:1",
        "--perturb",
        "5",
        "--seed",
        "3",
    ]);
    let b = gfol(&[
        "verify",
        "--builtin",
        "heisenberg:1",
        "--perturb",
        "5",
        "--seed",
        "3",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn geometry_reports_both_routes() {
    let o = gfol(&["geometry", "--builtin", "heisenberg:2,3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("route discrepancy: 0"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    gfol(&[
        "geometry",
        "--builtin",
        "su2",
        "--json",
        out.to_str().unwrap(),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let ric: Vec<f64> = serde_json::from_value(v["ric_perp"].clone()).unwrap();
    for (k, r) in ric.iter().enumerate() {
        let want = if k % 3 == 0 { 1.0 } else { 0.0 };
        assert!((r - want).abs() <= 1e-12);
    }

    let o = gfol(&["geometry", "--model", &model_file("abelian3.json")]);
    assert_eq!(code(&o), 0);
}

#[test]
fn flow_exit_codes() {
    let o = gfol(&[
        "flow",
        "--builtin",
        "heisenberg:2,3",
        "--phi",
        "1",
        "--t-end",
        "-5",
        "--retract",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("at limit:   Sasakian (classical)"));
    assert!(text.contains("verified: yes"));

    assert_eq!(
        code(&gfol(&[
            "flow",
            "--builtin",
            "heisenberg:2",
            "--phi",
            "1",
            "--t-end",
            "-0.2"
        ])),
        2
    );
    assert_eq!(
        code(&gfol(&[
            "flow",
            "--builtin",
            "para_model:1,1",
            "--phi",
            "1"
        ])),
        3
    );
    assert_eq!(
        code(&gfol(&[
            "flow",
            "--builtin",
            "heisenberg:2",
            "--phi",
            "1",
            "--t-end",
            "1"
        ])),
        3
    );

    let o = gfol(&["flow", "--builtin", "heisenberg:1", "--phi", "1"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("first within tol at t = 0"));
}

#[test]
fn flow_outputs_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("t.json");
    let o = gfol(&[
        "flow",
        "--builtin",
        "quat_heisenberg:2",
        "--phi",
        "3",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    for key in [
        "model",
        "phi",
        "dt",
        "samples",
        "converged",
        "rate_estimate",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let s0 = &v["samples"][0];
    for key in ["t", "G", "ric_eigs", "residuals"] {
        assert!(s0.get(key).is_some(), "{key}");
    }

    let manifest = dir.path().join("m.json");
    let csv = dir.path().join("t.csv");
    let o = gfol(&[
        "--manifest",
        manifest.to_str().unwrap(),
        "flow",
        "--builtin",
        "heisenberg:2,3",
        "--sweep-phi",
        "2,3",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    for phi in ["2", "3"] {
        let text = std::fs::read_to_string(dir.path().join(format!("t-phi{phi}.csv"))).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t,mu_1,mu_2,mu_3,mu_4,res_ode,res_tsharp,res_commutator,res_compat"
        );
    }
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["config"]["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn closed_form_values() {
    let o = gfol(&[
        "closed-form",
        "--mu0",
        "4",
        "--p",
        "1",
        "--t",
        "-0.5",
        "--csv",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "mu0,t,mu\n4,-0.5,1.11296786604\n");

    let o = gfol(&[
        "closed-form",
        "--mu0",
        "1",
        "--phi",
        "1",
        "--alpha",
        "0",
        "--t",
        "-1",
        "--csv",
    ]);
    assert!(stdout(&o).contains("1.96402758008"));

    let o = gfol(&[
        "closed-form",
        "--psi1",
        "0",
        "--psi2",
        "4",
        "--stationary",
        "--csv",
    ]);
    assert_eq!(stdout(&o), "mu_plus,mu_minus\n1,-1\n");
}
