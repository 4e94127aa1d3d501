use std::path::Path;
use std::process::{Command, Output};

use nbesov::domains::io::load_basis;
use nbesov::norms::EstimateReport;

fn nbesov(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbesov"))
        .args(args)
        .current_dir(dir)
        .env_remove("NB_OUT")
        .output()
        .expect("run nbesov")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_value(o: &Output) -> f64 {
    let text = stdout(o);
    let row = text.lines().nth(1).expect("csv row");
    let fields: Vec<&str> = row.rsplitn(3, ',').collect();
    fields[1].parse().expect("value")
}

#[test]
fn interval_basis_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["basis", "--shape", "interval", "--L", "3.14159265", "--K", "64", "--N", "1024", "--out"];
    let a = nbesov(&[&args[..], &["a.nbb"]].concat(), dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout(&a).contains("lambda_2 = 1.0000000"), "{}", stdout(&a));
    let b = nbesov(&[&args[..], &["b.nbb"]].concat(), dir.path());
    assert_eq!(b.status.code(), Some(0));
    let (x, y) = (std::fs::read(dir.path().join("a.nbb")).unwrap(), std::fs::read(dir.path().join("b.nbb")).unwrap());
    assert_eq!(x, y);
    let basis = load_basis(dir.path().join("a.nbb")).unwrap();
    assert!((basis.eigenvalues()[1] - 1.0).abs() < 1e-7);
}

#[test]
fn lshape_basis_has_zero_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = nbesov(&["basis", "--shape", "lshape", "--h", "0.03125", "--K", "200", "--out", "l.nbb"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let basis = load_basis(dir.path().join("l.nbb")).unwrap();
    assert!(basis.eigenvalues()[0].abs() < 1e-8);
    assert!(basis.eigenvalues()[1] > 1e-3);
}

#[test]
fn basis_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // More modes than the grid resolves.
    let o = nbesov(&["basis", "--shape", "interval", "--L", "1", "--K", "64", "--N", "32"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    let o = nbesov(&["basis", "--shape", "circle", "--K", "4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn basis_goes_to_nb_out_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nbesov"))
        .args(["basis", "--shape", "interval", "--L", "1", "--K", "8", "--N", "32"])
        .current_dir(dir.path())
        .env("NB_OUT", dir.path().join("env_out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("env_out/basis.nbb").exists());
}

#[test]
fn norm_command_examples() {
    let dir = tempfile::tempdir().unwrap();
    let interval = ["--shape", "interval", "--L", "3.141592653589793", "--K", "32", "--N", "128"];
    std::fs::write(dir.path().join("const.json"), format!("{{\"values\": {:?}}}", vec![2.5; 128])).unwrap();

    let o = nbesov(&[&["norm"], &interval[..], &["--input", "const.json", "--kind", "besov-hom", "--s", "0.5"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("norm_id,params,value,tail_bound"));
    assert!(csv_value(&o) < 1e-12);

    // e_2 has lambda_2 = 1, so only phi_0(1) and phi_{-1}(1) can be nonzero.
    let pou = nbesov::make_partition(nbesov::PartitionVariant::Standard);
    let want = (-1..=1).map(|j| pou.phi_j(j, 1.0).powi(2)).sum::<f64>().sqrt();
    let o = nbesov(&[&["norm"], &interval[..], &["--mode", "2", "--kind", "besov", "--s", "0", "--p", "2", "--q", "2"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!((csv_value(&o) - want).abs() < 1e-12, "{} {want}", csv_value(&o));

    let o = nbesov(&[&["norm"], &interval[..], &["--mode", "3", "--kind", "besov", "--q", "inf", "--append", "t.csv"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("q=inf"));
    let table = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);

    let o = nbesov(&[&["norm"], &interval[..], &["--input", "const.json", "--kind", "qm", "--m", "2"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(csv_value(&o).is_infinite());
    assert!(stdout(&o).contains("in_class=false"));

    std::fs::write(dir.path().join("short.json"), "{\"values\": [1.0, 2.0]}").unwrap();
    let o = nbesov(&[&["norm"], &interval[..], &["--input", "short.json", "--kind", "lebesgue"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = nbesov(&[&["norm"], &interval[..], &["--mode", "2", "--kind", "besov", "--p", "0.5"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn multiplier_and_heat_commands() {
    let dir = tempfile::tempdir().unwrap();
    let interval = ["--shape", "interval", "--L", "3.141592653589793", "--K", "32", "--N", "128"];
    let o = nbesov(&[&["multiplier"], &interval[..], &["--symbol", "one"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let l2: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((l2 - 1.0).abs() < 1e-14);

    let o = nbesov(&[&["multiplier"], &interval[..], &["--symbol", "heat:0.1", "--mode", "2", "--out", "g.json"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let g: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(g["values"].as_array().unwrap().len(), 128);

    let o = nbesov(&[&["multiplier"], &interval[..], &["--symbol", "gauss:1"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = nbesov(&[&["heat"], &interval[..], &["--t-min", "0.01", "--t-max", "1", "--count", "4"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[3] - v[4]).abs() < 1e-12 * v[4]);
    }
}

#[test]
fn verify_only_writes_one_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = nbesov(&["verify", "--only", "exp_reconstruction", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let jsons: Vec<_> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
        .collect();
    assert_eq!(jsons.len(), 1);
    let r: EstimateReport = serde_json::from_str(&std::fs::read_to_string(jsons[0].path()).unwrap()).unwrap();
    assert_eq!(r.id, "exp_reconstruction");
    assert!(stdout(&o).contains("exp_reconstruction"));
    assert!(dir.path().join("out/exp_reconstruction.csv").exists());

    let o = nbesov(&["report", "--dir", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("overall: pass"));
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = nbesov(&["verify", "--only", "partition,projected_semigroup", "--seed", "11", "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["exp_partition.json", "exp_projected_semigroup.json", "exp_partition.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn config_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"seed\": 3,\n  \"experimnts\": []\n}\n").unwrap();
    let o = nbesov(&["verify", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");

    std::fs::write(dir.path().join("broken.json"), "{\"seed\": ").unwrap();
    assert_eq!(nbesov(&["verify", "--config", "broken.json"], dir.path()).status.code(), Some(1));
    assert_eq!(nbesov(&["verify", "--only", "exp_nothing"], dir.path()).status.code(), Some(1));
    assert_eq!(nbesov(&["verify", "--config", "missing.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn config_drives_the_run_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"seed": 5, "output_dir": "from_config", "experiments": [{"id": "exp_reconstruction", "samples": 5}]}"#,
    )
    .unwrap();
    let o = nbesov(&["verify", "--config", "run.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: EstimateReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("from_config/exp_reconstruction.json")).unwrap()).unwrap();
    assert_eq!(r.seed, 5);
    assert_eq!(r.params["samples"], 5);

    let o = nbesov(&["verify", "--config", "run.json", "--seed", "9", "--out", "flag"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r: EstimateReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("flag/exp_reconstruction.json")).unwrap()).unwrap();
    assert_eq!(r.seed, 9);
}

#[test]
fn negative_control_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = nbesov(&["verify", "--only", "partition", "--negative-control", "--out", "neg"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = nbesov(&["verify", "--only", "partition", "--pou", "broken", "--out", "neg2"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn schema_is_published() {
    let dir = tempfile::tempdir().unwrap();
    let o = nbesov(&["schema"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ids = v["$defs"]["experiment_id"]["enum"].as_array().unwrap();
    assert_eq!(ids.len(), nbesov::verify::ExperimentId::ALL.len());
}
