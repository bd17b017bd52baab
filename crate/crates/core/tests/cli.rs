use std::fs;
use std::process::Command;

fn landmarkbm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landmarkbm"))
}

fn stdout_of(args: &[&str]) -> (i32, String) {
    let out = landmarkbm().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn classify_lines() {
    let (code, out) = stdout_of(&["classify", "--kernel", "matern:0.5", "--dim", "1"]);
    assert_eq!(code, 0);
    assert!(out.contains("kind=Type2 collision=true complete=false"), "{out}");

    let (code, out) = stdout_of(&["classify", "--kernel", "gauss", "--dim", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("kind=Type4") && out.contains("complete=true"), "{out}");

    let (_, out) = stdout_of(&["classify", "--kernel", "asymptotic:1:2:log", "--dim", "1"]);
    assert!(out.contains("kind=Type5"), "{out}");
}

#[test]
fn classify_detail_is_json() {
    let (code, out) = stdout_of(&["classify", "--kernel", "matern:3/2", "--dim", "3", "--detail"]);
    assert_eq!(code, 0);
    let json = out.split_once('\n').unwrap().1;
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["kind"], "Type4");
    assert_eq!(v["brownian_complete"], true);
}

#[test]
fn verify_reports_agreement() {
    let (code, out) = stdout_of(&["verify", "--kernel", "matern:0.5", "--dim", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("analytic=Type1 numerical=Type1 agreement=true"), "{out}");
}

#[test]
fn usage_and_domain_errors() {
    assert_eq!(stdout_of(&["frobnicate"]).0, 2);
    assert_eq!(stdout_of(&["classify", "--bogus"]).0, 2);
    assert_eq!(stdout_of(&["classify", "--kernel", "matern:0.7"]).0, 2);
    // asymptotic data has no evaluator to simulate with
    assert_eq!(stdout_of(&["verify", "--kernel", "asymptotic:1:1"]).0, 1);
    assert_eq!(stdout_of(&["experiment", "--preset", "fig9"]).0, 1);
}

#[test]
fn experiment_into_unwritable_outdir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let out = landmarkbm()
        .args(["experiment", "--preset", "fig1", "--outdir"])
        .arg(blocker.join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("file/x") || err.contains("file"), "{err}");
}

#[test]
fn experiment_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("quick.cfg");
    fs::write(&config, "# short run\npreset=fig2\nname=quick\nsteps=50\npaths=2\nkernels=gauss\n").unwrap();
    let out = landmarkbm()
        .args(["experiment", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["quick_gauss_mindist.csv", "quick_gauss_logdist.svg", "quick_gauss_positions.svg", "quick_meta.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(dir.path().join("quick_gauss_trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "path_id,step,t,x_1_1,x_1_2,x_2_1,x_2_2,min_dist,stop_reason");
}

#[test]
fn simulate_and_distance_sde_write_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out) = stdout_of(&[
        "simulate", "--kernel", "gauss", "--dim", "2", "--landmarks", "3", "--steps", "20",
        "--paths", "3", "--trajectories", "--seed", "4", "--outdir", d,
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 2);
    let traj = fs::read_to_string(dir.path().join("simulate_gauss_trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 3 * 21);

    let (code, _) = stdout_of(&[
        "distance-sde", "--kernel", "matern:0.5", "--dim", "2", "--steps", "10", "--paths", "2",
        "--outdir", d,
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("distance_matern-0.5_d2.csv")).unwrap();
    assert!(csv.starts_with("path_id,step,t,r,absorbed\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 11);
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = landmarkbm()
            .env("LANDMARKBM_THREADS", threads)
            .args(["simulate", "--kernel", "matern:0.5", "--landmarks", "3", "--steps", "300", "--paths", "8", "--outdir"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success());
        fs::read(dir.path().join("simulate_matern-0.5_mindist.csv")).unwrap()
    };
    assert_eq!(run("1"), run("0"));
    assert_eq!(run("3"), run("1"));
}
