use std::fs;
use std::path::Path;
use std::process::Command;

fn roughheat(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_roughheat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stdout).into_owned())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn region_polygon_has_the_rational_vertex() {
    let d = tempfile::tempdir().unwrap();
    let (code, stdout) = roughheat(&["region", "--n", "3", "--rho", "1.2", "--Q", "1.4286"], d.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("(0.2525, -1.0000)"), "{stdout}");
    let csv = fs::read_to_string(d.path().join("region_vertices.csv")).unwrap();
    assert!(csv.starts_with("run_id,vertex,inv_p,alpha,inv_p_exact,alpha_exact"));
    assert!(csv.contains(",25/99,-1"));
    let seg = fs::read_to_string(d.path().join("region_segment.csv")).unwrap();
    assert!(seg.contains("right,0.5555555555555556,0.0,5/9,0"), "{seg}");
    let m = json(&d.path().join("manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["exit_code"], 0);
    assert!(m["outputs"].as_array().unwrap().iter().any(|o| o == "region_mask.csv"));
}

#[test]
fn malformed_config_exits_one_with_the_field() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.json");
    fs::write(&cfg, r#"{"nonlinearity": {"rho": "three"}}"#).unwrap();
    let (code, _) = roughheat(&["solve", "--config", cfg.to_str().unwrap()], d.path());
    assert_eq!(code, 1);
    let e = json(&d.path().join("error.json"));
    assert_eq!(e["kind"], "invalid_config");
    assert!(e["message"].as_str().unwrap().contains("nonlinearity.rho"), "{e}");

    fs::write(&cfg, r#"{"grid_points": 60}"#).unwrap();
    assert_eq!(roughheat(&["norms", "--config", cfg.to_str().unwrap()], d.path()).0, 1);
    assert_eq!(roughheat(&["norms", "--profile", "slow"], d.path()).0, 1);
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["hyper", "--p", "2", "--q", "2", "--r", "inf", "--beta=-0.25", "--count", "6", "--N", "32", "--seed", "4"];
    assert_eq!(roughheat(&args, a.path()).0, 0);
    assert_eq!(roughheat(&args, b.path()).0, 0);
    let read = |d: &Path| fs::read(d.join("probes.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let csv = String::from_utf8(read(a.path())).unwrap();
    assert!(csv.starts_with("run_id,scenario,seed,probe_id,op,p,q,r,beta,kappa,input_norm,output_norm,ratio,grid_tag"));
    assert!(csv.contains(",N32") && csv.contains(",N64"));
}

#[test]
fn solve_writes_every_table() {
    let d = tempfile::tempdir().unwrap();
    let (code, stdout) = roughheat(&["solve", "--N", "32"], d.path());
    assert_eq!(code, 0, "{stdout}");
    let runs = fs::read_to_string(d.path().join("runs.csv")).unwrap();
    assert!(runs.starts_with("run_id,n,N,rho,mu,coeff_kind,T,iterations,contraction_max,residual"));
    let id = json(&d.path().join("manifest.json"))["run_id"].as_str().unwrap().to_string();
    for name in ["runs.csv", "residuals.csv", "rh.csv", "rh_improved.csv", "bootstrap.csv"] {
        let text = fs::read_to_string(d.path().join(name)).unwrap();
        assert!(text.lines().skip(1).all(|l| l.starts_with(&id)), "{name}");
    }
    assert!(fs::read_to_string(d.path().join("rh.csv")).unwrap().starts_with("run_id,box_id,t,lhs,rhs1,rhs2,ratio,theta,q"));
}

#[test]
fn lifespan_of_constant_data() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"grid_points": 16, "data": {"kind": "constant", "amplitude": 1.0}}"#).unwrap();
    let (code, _) = roughheat(&["lifespan", "--config", cfg.to_str().unwrap(), "--amplitudes", "0,1,2"], d.path());
    assert_eq!(code, 0);
    let rows: Vec<Vec<String>> = fs::read_to_string(d.path().join("lifespan.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows[0][3], "true");
    let tau: f64 = rows[1][2].parse().unwrap();
    assert!((tau - 1.0 / 3.0).abs() < 1e-4, "{tau}");
    let tau2: f64 = rows[2][2].parse().unwrap();
    assert!((tau2 - 1.0 / 24.0).abs() < 1e-5, "{tau2}");
}

#[test]
fn failed_check_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let (code, _) = roughheat(&["solve", "--N", "32", "--amplitude", "40"], d.path());
    assert_eq!(code, 2);
    assert_eq!(json(&d.path().join("manifest.json"))["status"], "check_failed");
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        roughheat::pipeline::ScenarioConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
