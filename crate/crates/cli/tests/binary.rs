use std::process::Command;

fn abcmle() -> Command {
    Command::new(env!("CARGO_BIN_EXE_abcmle"))
}

fn configs() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn simulate_prints_one_value_per_line() {
    let out = abcmle()
        .args(["simulate", "g_and_k", "2", "0.5", "10", "2", "25", "7"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let ys: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(ys.len(), 25);
    let again = abcmle()
        .args(["simulate", "g_and_k", "2", "0.5", "10", "2", "25", "7"])
        .output()
        .unwrap();
    assert_eq!(text.as_bytes(), &again.stdout[..]);
}

#[test]
fn simulate_rejects_bad_parameters() {
    let out = abcmle().args(["simulate", "g_and_k", "2", "-1", "10", "2", "25", "7"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = abcmle().args(["simulate", "no_such_model", "1", "10", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn disabled_config_is_refused() {
    let out = abcmle()
        .arg("run")
        .arg(configs().join("sv_alpha_r_batch_real.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disabled"));
}

#[test]
fn gradient_check_passes_for_shipped_model() {
    let out = abcmle()
        .arg("check-gradients")
        .arg(configs().join("gaussian_surrogate_batch.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
