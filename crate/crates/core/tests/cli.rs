use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn onestep(args: &[&str], cwd: &Path, env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_onestep"));
    cmd.args(args).current_dir(cwd).env_remove("ONESTEP_OUT");
    if let Some(dir) = env_out {
        cmd.env("ONESTEP_OUT", dir);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const PATH_CONFIG: &str = "[grid]\nm = 512\n[path]\ntarget = \"beta22\"\ninitial = [\"linear\"]\n";

#[test]
fn path_writes_its_files_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PATH_CONFIG);
    let out = dir.path().join("out");
    let o = onestep(&["path", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path(), None);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["fig1_densities.csv", "fig1_vcurve.csv", "fig1.svg"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let first = fs::read(out.join("fig1.svg")).unwrap();
    let o = onestep(&["path", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path(), None);
    assert!(o.status.success());
    assert_eq!(first, fs::read(out.join("fig1.svg")).unwrap());
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from_env");
    let cfg = write_config(dir.path(), PATH_CONFIG);
    let o = onestep(&["path", "--config", &cfg], dir.path(), Some(&env_dir));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env_dir.join("fig1_vcurve.csv").exists());

    let key_dir = dir.path().join("from_key");
    let cfg = write_config(dir.path(), &format!("out = {:?}\n{PATH_CONFIG}", key_dir));
    let flag_dir = dir.path().join("from_flag");
    let o = onestep(&["path", "--config", &cfg], dir.path(), Some(&env_dir));
    assert!(o.status.success());
    assert!(key_dir.join("fig1_vcurve.csv").exists());
    let o = onestep(&["path", "--config", &cfg, "--out", flag_dir.to_str().unwrap()], dir.path(), Some(&env_dir));
    assert!(o.status.success());
    assert!(flag_dir.join("fig1_vcurve.csv").exists());
}

#[test]
fn config_errors_exit_2_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nm = 64\n[path]\ntarget = \"nonesuch\"\ninitial = [\"linear\"]\n");
    let o = onestep(&["path", "--config", &cfg], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "[grid]\nm = 64\nbogus = 1\n");
    let o = onestep(&["path", "--config", &cfg], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = onestep(&["path", "--config", "missing.toml"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(dir.path(), PATH_CONFIG);
    let o = onestep(&["path", "--config", &cfg, "--functional", "median"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));

    let o = onestep(&["path"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stochastic_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nm = 128\n[simulate]\nn = [40]\nreps = 3\n");
    let o = onestep(&["simulate", "--config", &cfg], dir.path(), Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn simulate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[grid]\nm = 128\n[simulate]\nn = [40, 80]\nreps = 4\n");
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = onestep(&["simulate", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()], dir.path(), None);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out.join("sim_table.csv")).unwrap()
    };
    let a = run("5", "a");
    assert_eq!(a, run("5", "b"));
    assert_ne!(a, run("6", "c"));
    assert!(a.starts_with("n,estimator,mean_bias,bias_se,variance,mse,coverage,efficiency_bound\n"));
    assert_eq!(a.lines().count(), 1 + 2 * 2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/sim_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 5);
    assert!(summary["studies"][0]["efficiency_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn numeric_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[grid]\nm = 128\n[simulate]\nn = [40]\nreps = 1\n");
    let o = onestep(&["simulate", "--config", &cfg], dir.path(), Some(dir.path()));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "[simplex]\ntarget = [0.25, 0.25, 0.25, 0.25]\n");
    let o = onestep(&["simplex", "--config", &cfg], dir.path(), Some(dir.path()));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unsupported"));

    let cfg = write_config(dir.path(), "[rates]\nt = [0.5, 1.5]\n[grid]\nm = 64\n");
    let o = onestep(&["rates", "--config", &cfg], dir.path(), Some(dir.path()));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn multipath_skips_degenerate_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nm = 256\n[path]\ntarget = \"beta22\"\ninitial = [\"uniform\", \"beta22\", \"linear\"]\neps_points = 11\n",
    );
    let o = onestep(&["multipath", "--config", &cfg], dir.path(), Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("path 1"));
    let text = fs::read_to_string(dir.path().join("fig2_curves.csv")).unwrap();
    let ids: std::collections::BTreeSet<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["0", "2"]);
}

#[test]
fn rates_direction_and_mean_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nm = 1024\n");
    let o = onestep(&["rates", "--config", &cfg], dir.path(), Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("rates.json")).unwrap()).unwrap();
    assert!((v["slope_one_step"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!(fs::read_to_string(dir.path().join("rates.csv"))
        .unwrap()
        .starts_with("t,distance,plug_in_error,one_step_bias\n"));

    let o = onestep(&["rates", "--config", &cfg, "--functional", "mean"], dir.path(), Some(dir.path()));
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("rates.json")).unwrap()).unwrap();
    assert_eq!(v["one_step_exact_zero"], true);
    assert!(v["slope_one_step"].is_null());
}

#[test]
fn rates_kde_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 4\n[grid]\nm = 256\n[rates]\nmode = \"kde\"\nn = [50, 100]\nreps = 2\n");
    let o = onestep(&["rates", "--config", &cfg], dir.path(), Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert!(csv.starts_with("n,distance,"));
    assert_eq!(csv.lines().count(), 3);
}
