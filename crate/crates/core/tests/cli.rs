use std::path::Path;
use std::process::Command;

fn run(dir: &Path, threads: &str, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_bundlechoice"))
        .current_dir(dir)
        .env("BUNDLECHOICE_THREADS", threads)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, "1", &["simulate", "--n", "300", "--seed", "5", "--out", "p1.csv"]);
    run(d, "3", &["simulate", "--n", "300", "--seed", "5", "--out", "p3.csv"]);
    assert_eq!(std::fs::read(d.join("p1.csv")).unwrap(), std::fs::read(d.join("p3.csv")).unwrap());
    let tasks: [&[&str]; 4] = [
        &["estimate", "--method", "fe-logit", "--data", "p1.csv"],
        &["bounds", "--data", "p1.csv"],
        &["test", "--hypothesis", "sub", "--data", "p1.csv", "--bootstrap", "50"],
        &["montecarlo", "--n", "200", "--b", "3", "--estimators", "fe-logit,semi-nb"],
    ];
    for args in tasks {
        assert_eq!(run(d, "1", args), run(d, "3", args), "{args:?}");
    }
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "id,t,y,xa_1,xb_1,z_1\n0,0,A,NaN,0,0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bundlechoice"))
        .current_dir(dir.path())
        .args(["bounds", "--data", "bad.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));
}
