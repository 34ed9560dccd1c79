use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_junction"))
}

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a copy of `name` with one textual replacement.
fn edited(dir: &Path, name: &str, from: &str, to: &str) -> PathBuf {
    let text = std::fs::read_to_string(problem(name)).unwrap();
    assert!(text.contains(from), "{from}");
    let out = dir.join(format!("edited_{name}"));
    std::fs::write(&out, text.replacen(from, to, 1)).unwrap();
    out
}

/// `(plane, xi, value, flagged)` rows of a value CSV.
fn read_values(p: &Path) -> Vec<(usize, f64, f64, bool)> {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "plane,i0,ii,x0,xi,value,flagged");
    lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].parse().unwrap(), c[4].parse().unwrap(), c[5].parse().unwrap(), c[6] == "1")
        })
        .collect()
}

#[test]
fn solve_constant_cost() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", path(&problem("constant_cost.json")), "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_values(&dir.path().join("values.csv"));
    assert_eq!(rows.len(), 41 * (1 + 2 * 20));
    for (_, _, v, _) in &rows {
        assert!((v - 1.0).abs() <= 1e-10, "{v}");
    }
    assert_eq!(read_values(&dir.path().join("plane_2.csv")).len(), 41 * 21);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
    assert!(report["residual"].as_f64().unwrap() <= report["tol"].as_f64().unwrap());
    assert_eq!(report["problem_hash"].as_str().unwrap().len(), 64);
    assert!(report["assumption_reports"]["h3_tilde"].is_array());
}

#[test]
fn solve_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", path(&problem("closed_form.json")), "--out", path(dir.path()), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["grid"]["n0"], 201);
    let mut worst: f64 = 0.0;
    for (plane, xi, v, flagged) in read_values(&dir.path().join("plane_1.csv")) {
        assert!(plane <= 1 && !flagged);
        worst = worst.max((v - (1.0 - (-xi).exp())).abs());
    }
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn same_problem_same_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(run(&["solve", path(&problem("constant_cost.json")), "--out", path(d.path())]).status.success());
    }
    let hash = |d: &Path| {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
        v["problem_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash(a.path()), hash(b.path()));
    assert_eq!(
        std::fs::read(a.path().join("values.csv")).unwrap(),
        std::fs::read(b.path().join("values.csv")).unwrap()
    );
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = edited(dir.path(), "constant_cost.json", r#""lambda": 1.0"#, r#""lambda": 0.0"#);
    let o = run(&["solve", path(&bad), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda"), "{}", stderr(&o));

    let bad = edited(dir.path(), "constant_cost.json", r#""lambda": 1.0"#, r#""lambda": 1.0, "gamma": 2"#);
    let o = run(&["check", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let o = run(&["check", "/nonexistent/problem.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = edited(dir.path(), "constant_cost.json", r#""max_iter": 100000"#, r#""max_iter": 3"#);
    let o = run(&["solve", path(&bad), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn check_reports() {
    let o = run(&["check", path(&problem("closed_form.json")), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let cos = (std::f64::consts::PI / 64.0).cos();
    for k in 0..2 {
        assert!((r["h3"][k].as_f64().unwrap() - cos).abs() < 1e-12);
        assert!((r["h3_tilde"][k].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    assert_eq!(r["h0_h1"]["m_f_violated"], false);

    let dir = tempfile::tempdir().unwrap();
    let one_sided = edited(dir.path(), "normal_only.json", r#""f": [0.0, -1.0]"#, r#""f": [0.0, 0.0]"#);
    let o = run(&["check", path(&one_sided)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("plane 1: normal controllability fails"), "{}", stdout(&o));

    let under = edited(dir.path(), "closed_form.json", r#""M_f": 1.0"#, r#""M_f": 0.5"#);
    let o = run(&["check", path(&under)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("VIOLATED"), "{}", stdout(&o));
}

#[test]
fn rollout_tangential_and_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let law = dir.path().join("law.json");
    let traj = dir.path().join("traj.csv");

    std::fs::write(&law, r#"{"schedule": [{"duration": 1.0, "atom": "b#0"}]}"#).unwrap();
    let o = run(&["rollout", path(&problem("closed_form.json")), "--start", "0,-0.5,0", "--law", path(&law), "--out", path(&traj), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&traj).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,plane,x0,xi,atom_id,event");
    for l in lines {
        let c: Vec<&str> = l.split(',').collect();
        assert_eq!(c[1], "0");
        assert_eq!(c[3].parse::<f64>().unwrap(), 0.0);
        assert!((c[2].parse::<f64>().unwrap() - (-0.5 + c[0].parse::<f64>().unwrap())).abs() < 1e-9);
    }
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["cost"], 0.0);

    // Descent then entry into plane 2.
    std::fs::write(&law, r#"{"schedule": [{"duration": 0.5, "atom": "a#48"}, {"duration": 0.5, "atom": "b#16"}]}"#).unwrap();
    let o = run(&["rollout", path(&problem("closed_form.json")), "--start", "1,0,0.5", "--law", path(&law), "--out", path(&traj)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&traj).unwrap();
    assert!(text.contains(",hit_gamma") && text.contains(",enter_plane_2"), "{text}");
    assert!(stderr(&o).contains("cost 0.39346"), "{}", stderr(&o));

    // A plane-1 atom pointing into Γ cannot be used on Γ.
    std::fs::write(&law, r#"{"schedule": [{"duration": 1.0, "atom": "a#48"}]}"#).unwrap();
    let o = run(&["rollout", path(&problem("closed_form.json")), "--start", "0,0,0", "--law", path(&law), "--out", path(&traj)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("infeasible at t = 0"), "{}", stderr(&o));
    assert!(std::fs::read_to_string(&traj).unwrap().contains("infeasible"));
}

#[test]
fn rollout_descend_example() {
    let o = run(&["rollout", path(&problem("closed_form.json")), "--start", "1,0.3,1", "--law", path(&problem("descend.json")), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    let json_start = s.find("\n{").unwrap() + 1;
    let r: serde_json::Value = serde_json::from_str(&s[json_start..]).unwrap();
    assert!((r["cost"].as_f64().unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    assert_eq!(r["crossings"][0][1], "hit_gamma");
}

#[test]
fn compare_passes_on_reference_problems() {
    let o = run(&["compare", path(&problem("constant_cost.json")), "--point", "1,0,0.5", "--point", "0,-0.5,0", "--point", "2,0.5,0.5", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for r in rows.as_array().unwrap() {
        assert_eq!(r["pass"], true);
        assert!((r["solver"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    }

    let mut args = vec!["compare".to_string(), path(&problem("closed_form.json")).to_string()];
    for j in 0..10 {
        let p = match j % 3 {
            0 => format!("1,{},1", -1.0 + 0.2 * j as f64),
            1 => format!("0,{},0", -1.0 + 0.2 * j as f64),
            _ => format!("2,{},1", -1.0 + 0.2 * j as f64),
        };
        args.extend(["--point".to_string(), p]);
    }
    args.extend(["--slack", "0.05", "--oracle-dt", "0.05"].map(String::from));
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 11);

    let o = run(&["compare", path(&problem("interface.json")), "--point", "0,0,0", "--point", "0,0.5,0", "--json", "--slack", "1e-3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for r in rows.as_array().unwrap() {
        assert!((r["solver"].as_f64().unwrap() - 0.25).abs() < 1e-3);
        assert!((r["oracle"].as_f64().unwrap() - 0.25).abs() <= r["bracket"].as_f64().unwrap());
    }
}

#[test]
fn compare_budget_exceeded_exits_5() {
    let o = run(&["compare", path(&problem("closed_form.json")), "--point", "1,0,1", "--segments", "6", "--budget", "1000"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn eval_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.json");
    std::fs::write(
        &single,
        r#"{
          "schema_version": 1, "lambda": 1.0,
          "planes": [
            { "name": "A", "controls": [ { "id": "a", "dynamics": { "type": "constant", "f": [0.5, -0.25] }, "cost": { "type": "constant", "value": 0.3 } } ] },
            { "name": "B", "controls": [ { "id": "b", "dynamics": { "type": "constant", "f": [0.0, 1.0] }, "cost": { "type": "constant", "value": 0.0 } } ] }
          ],
          "domain": { "x0": [-1, 1], "xi_max": 1 }, "grid": { "n0": 3, "ni": 3 },
          "scheme": { "dt": 0.1, "tol": 1e-6, "max_iter": 100 },
          "declared": { "M_f": 1, "M_ell": 1, "L_f": 0 }
        }"#,
    )
    .unwrap();
    let o = run(&["eval-hamiltonian", path(&single), "--point", "1,0.2,0.4", "--covector", "-2,3", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let expected = 2.0 * 0.5 - 3.0 * -0.25 - 0.3;
    assert!((r["planes"][0]["h_i"].as_f64().unwrap() - expected).abs() < 1e-15);

    let o = run(&["eval-hamiltonian", path(&problem("closed_form.json")), "--point", "0,0,0", "--covector", "0.5,-0.2", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for k in 0..2 {
        let e = &r["planes"][k];
        let d = &e["delta"];
        assert!(d["delta_min"].as_f64().unwrap() < d["delta_max"].as_f64().unwrap());
        assert!(e["identity_gap"].as_f64().unwrap() < 1e-12);
    }
    // Disc of radius 1 sampled at 64 angles: Δ = -pi ± |p0| tan(π/64).
    let half = 0.5 * (std::f64::consts::PI / 64.0).tan();
    assert!((r["planes"][0]["delta"]["delta_min"].as_f64().unwrap() - (0.2 - half)).abs() < 1e-12);

    let o = run(&["eval-hamiltonian", path(&problem("closed_form.json")), "--point", "1,0,0.5", "--covector", "1,1", "--gamma"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Γ"), "{}", stderr(&o));
}
