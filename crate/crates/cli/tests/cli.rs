use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ergodic_core::env::{delivery_mdp, DeliveryParams};
use ergodic_core::process::MdpSpec;

fn ergo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergo"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ERGO_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn crate_path(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "stdout:\n{}\nstderr:\n{}", stdout(o), stderr(o));
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let i = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[i].parse().unwrap()).collect()
}

fn summary(path: &Path) -> Vec<(String, String)> {
    rows(path).iter().map(|r| (r[0].to_string(), r[1].to_string())).collect()
}

fn metric(path: &Path, name: &str) -> f64 {
    summary(path).into_iter().find(|(k, _)| k == name).unwrap().1.parse().unwrap()
}

fn files_under(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out.sort();
    out
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL_GROWTH_Q: &str = r#"
name = "small"
seeds = [1, 2]
emit_plots = true

[environment]
name = "coin_toss"

[algorithm]
name = "growth_q"
total_steps = 40000
"#;

#[test]
fn analyze_chain_fixtures() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ergo(&["analyze-chain", &crate_path("fixtures/ergodic.toml")], tmp.path());
    assert_ok(&o);
    assert!(stdout(&o).contains("classification: ErgodicChain"), "{}", stdout(&o));

    let o = ergo(&["chainlint", &crate_path("fixtures/periodic.toml")], tmp.path());
    assert_ok(&o);
    let text = stdout(&o);
    assert!(text.contains("classification: UnichainPeriodic"), "{text}");
    assert!(text.contains("period 2"), "{text}");

    let dot = tmp.path().join("c.dot");
    let o = ergo(
        &[
            "analyze-chain",
            &crate_path("fixtures/delivery.toml"),
            "--policy",
            &crate_path("fixtures/always_direct.toml"),
            "--dot",
            dot.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_ok(&o);
    let text = stdout(&o);
    assert!(text.contains("recurrent_class[0]: {1} period 1 (absorbing)"), "{text}");
    assert!(text.contains("transient: {0}"), "{text}");
    assert!(fs::read_to_string(dot).unwrap().starts_with("digraph"));

    let o = ergo(&["analyze-chain", &crate_path("fixtures/delivery.toml")], tmp.path());
    assert_ok(&o);
    assert!(stdout(&o).contains("mdp: not ergodic"), "{}", stdout(&o));
}

#[test]
fn delivery_fixture_matches_library_model() {
    let text = fs::read_to_string(crate_path("fixtures/delivery.toml")).unwrap();
    let fixture = MdpSpec::from_toml_str(&text).unwrap();
    let built = delivery_mdp(&DeliveryParams::default()).unwrap();
    for s in 0..2 {
        for a in 0..2 {
            for t in 0..2 {
                assert!((fixture.kernel_row(s, a)[t] - built.kernel_row(s, a)[t]).abs() < 1e-12);
                assert!((fixture.reward(s, a, t) - built.reward(s, a, t)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn malformed_spec_reports_line_and_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "n_states = 2\nn_actions = 1\nkernel = [0.5, \n");
    let o = ergo(&["analyze-chain", &bad], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let rows_bad = write_config(
        tmp.path(),
        "rows.toml",
        "n_states = 2\nn_actions = 1\nkernel = [0.5, 0.4, 0.0, 1.0]\nreward = [0.0, 0.0, 0.0, 0.0]\ninitial_dist = [1.0, 0.0]\n",
    );
    let o = ergo(&["analyze-chain", &rows_bad], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fig1_trajectories_collapse() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ergo(&["run", &crate_path("configs/fig1_coin_toss_alpha1.toml"), "--out", "fig1"], tmp.path());
    assert_ok(&o);
    let seed_dir = tmp.path().join("fig1/seed_1");
    let trajs: Vec<PathBuf> = fs::read_dir(&seed_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("trajectory_"))
        .collect();
    assert_eq!(trajs.len(), 10);
    for t in &trajs {
        let returns = column(t, "return");
        assert_eq!(returns.len(), 1000);
        assert!(*returns.last().unwrap() < 10.0, "{}: {}", t.display(), returns.last().unwrap());
    }
    let expected = metric(&seed_dir.join("summary.csv"), "expected_final_return");
    assert!((expected / (100.0 * 1.05f64.powi(1000)) - 1.0).abs() < 1e-9);
    assert!(seed_dir.join("plots/trajectories.svg").exists());
}

#[test]
fn fig3_evaluation_grows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ergo(&["run", &crate_path("configs/fig3_transform.toml"), "--out", "fig3"], tmp.path());
    assert_ok(&o);
    let dir = tmp.path().join("fig3/seed_7");
    let mut growth = column(&dir.join("eval_growth.csv"), "per_step_log_growth");
    growth.sort_by(f64::total_cmp);
    let median = (growth[49] + growth[50]) / 2.0;
    assert!(median > 0.0, "median growth {median}");
    assert!(metric(&dir.join("summary.csv"), "correlation_with_log") >= 0.99);
}

#[test]
fn runs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL_GROWTH_Q);
    for out in ["a", "b"] {
        assert_ok(&ergo(&["run", &cfg, "--out", out], tmp.path()));
    }
    let a = files_under(&tmp.path().join("a"));
    assert_eq!(a, files_under(&tmp.path().join("b")));
    let mut compared = 0;
    for f in a.iter().filter(|f| f.ends_with(".csv") || f.ends_with(".svg")) {
        let x = fs::read(tmp.path().join("a").join(f)).unwrap();
        let y = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
        compared += 1;
    }
    assert!(compared >= 6);
}

#[test]
fn manifest_lists_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL_GROWTH_Q);
    assert_ok(&ergo(&["run", &cfg, "--out", "out"], tmp.path()));
    let dir = tmp.path().join("out");
    let m = manifest(&dir);
    let mut listed: Vec<String> = m["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().into()).collect();
    listed.sort();
    let mut present = files_under(&dir);
    present.retain(|f| f != "manifest.json");
    assert_eq!(listed, present);
    assert_eq!(m["runs"].as_array().unwrap().len(), 2);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    for run in m["runs"].as_array().unwrap() {
        assert!(run["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
        assert!(!run["files"].as_array().unwrap().is_empty());
    }

    // A second run into the same directory replaces the first.
    assert_ok(&ergo(&["run", &cfg, "--out", "out"], tmp.path()));
    assert_eq!(files_under(&dir).len(), present.len() + 1);
}

#[test]
fn foreign_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL_GROWTH_Q);
    fs::create_dir(tmp.path().join("busy")).unwrap();
    fs::write(tmp.path().join("busy/keep.txt"), "x").unwrap();
    let o = ergo(&["run", &cfg, "--out", "busy"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(tmp.path().join("busy/keep.txt").exists());
}

#[test]
fn hash_is_stable_under_reordering() {
    let tmp = tempfile::tempdir().unwrap();
    let reordered = r#"
emit_plots = true
seeds = [1, 2]

[algorithm]
total_steps = 40000
name = "growth_q"

[environment]
name = "coin_toss"
"#;
    let reordered = format!("name = \"small\"\n{reordered}");
    let a = write_config(tmp.path(), "a.toml", SMALL_GROWTH_Q);
    let b = write_config(tmp.path(), "b.toml", &reordered);
    assert_ok(&ergo(&["run", &a, "--out", "a"], tmp.path()));
    assert_ok(&ergo(&["run", &b, "--out", "b"], tmp.path()));
    let ha = manifest(&tmp.path().join("a"))["config_hash"].clone();
    let hb = manifest(&tmp.path().join("b"))["config_hash"].clone();
    assert_eq!(ha, hb);
}

#[test]
fn config_errors_exit_2_and_unknown_names_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write_config(tmp.path(), "e.toml", &SMALL_GROWTH_Q.replace("[1, 2]", "[]"));
    let o = ergo(&["run", &empty, "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!tmp.path().join("x").exists());

    let typo = write_config(tmp.path(), "t.toml", &SMALL_GROWTH_Q.replace("\"growth_q\"", "\"growthq\""));
    let o = ergo(&["run", &typo, "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("growth_q"), "{}", stderr(&o));

    let env = write_config(tmp.path(), "v.toml", &SMALL_GROWTH_Q.replace("\"coin_toss\"", "\"roulette\""));
    let o = ergo(&["run", &env, "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("coin_toss"), "{}", stderr(&o));

    let param = write_config(tmp.path(), "p.toml", &SMALL_GROWTH_Q.replace("total_steps", "total_stepz"));
    let o = ergo(&["run", &param, "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("total_stepz"), "{}", stderr(&o));

    let syntax = write_config(tmp.path(), "s.toml", "name = \"x\"\nseeds = [1\n");
    let o = ergo(&["run", &syntax], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn p_sweep_has_a_row_per_point_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "p.toml",
        r#"
name = "p"
seeds = [1, 2, 3]

[environment]
name = "bandit"

[algorithm]
name = "preference"
rule = "temporal"
replicates = 3
episodes = 50

[sweep]
"environment.p_loss" = [0.2, 0.26, 0.32, 0.38, 0.44, 0.5, 0.56, 0.62, 0.68, 0.74, 0.8]
"#,
    );
    assert_ok(&ergo(&["sweep", &cfg, "--out", "s"], tmp.path()));
    let path = tmp.path().join("s/sweep.csv");
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["environment.p_loss", "seed", "metric", "value"]
    );
    let all = rows(&path);
    assert!(all.len() >= 33, "{} rows", all.len());
    let pref: Vec<&csv::StringRecord> = all.iter().filter(|r| &r[2] == "safe_preference_temporal").collect();
    assert_eq!(pref.len(), 33);
    let mean_at = |p: &str| {
        let v: Vec<f64> = pref.iter().filter(|r| &r[0] == p).map(|r| r[3].parse::<f64>().unwrap()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean_at("0.2") < mean_at("0.8"));
}

#[test]
fn lambda_sweep_medians_do_not_increase() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ergo(&["sweep", &crate_path("configs/fig4_lambda_sweep.toml"), "--out", "l"], tmp.path());
    assert_ok(&o);
    let all = rows(&tmp.path().join("l/sweep.csv"));
    let median_at = |lambda: &str| {
        let mut v: Vec<f64> = all
            .iter()
            .filter(|r| &r[0] == lambda && &r[2] == "greedy_alpha")
            .map(|r| r[3].parse().unwrap())
            .collect();
        assert_eq!(v.len(), 3);
        v.sort_by(f64::total_cmp);
        v[1]
    };
    let medians = [median_at("0"), median_at("0.5"), median_at("1")];
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
    assert!(medians[0] >= 0.9 && (0.15..=0.35).contains(&medians[2]), "{medians:?}");
}

#[test]
fn single_point_sweep_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_GROWTH_Q.replace("seeds = [1, 2]", "seeds = [4]");
    let run_cfg = write_config(tmp.path(), "r.toml", &body);
    let sweep_cfg = write_config(tmp.path(), "s.toml", &format!("{body}\n[sweep]\n\"algorithm.lambda\" = [1.0]\n"));
    assert_ok(&ergo(&["run", &run_cfg, "--out", "r"], tmp.path()));
    assert_ok(&ergo(&["sweep", &sweep_cfg, "--out", "s"], tmp.path()));
    let from_run = summary(&tmp.path().join("r/seed_4/summary.csv"));
    let from_sweep: Vec<(String, String)> = rows(&tmp.path().join("s/sweep.csv"))
        .iter()
        .map(|r| {
            assert_eq!((&r[0], &r[1]), ("1", "4"));
            (r[2].to_string(), r[3].to_string())
        })
        .collect();
    assert_eq!(from_run, from_sweep);
}

#[test]
fn empty_sweep_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", &format!("{SMALL_GROWTH_Q}\n[sweep]\n\"algorithm.lambda\" = []\n"));
    assert_eq!(ergo(&["sweep", &cfg, "--out", "s"], tmp.path()).status.code(), Some(2));
}

#[test]
fn plot_schema_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let o = ergo(&["plot", "--kind", "trajectory", "-o", "x.svg", empty.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("missing column `step`"), "{}", stderr(&o));

    let wrong = tmp.path().join("wrong.csv");
    fs::write(&wrong, "p,ci\n0.5,0.1\n").unwrap();
    let o = ergo(&["plot", "--kind", "preference", "-o", "x.svg", wrong.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("`safe_preference`"), "{}", stderr(&o));
    assert!(!tmp.path().join("x.svg").exists());
}

#[test]
fn plot_is_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("pref.csv");
    fs::write(&csv, "p,safe_preference,ci\n0.3,0.0,0.0\n0.5,0.4,0.1\n0.7,1.0,0.0\n").unwrap();
    for out in ["a.svg", "b.svg"] {
        let o = ergo(
            &["plot", "--kind", "preference", "--vline", "0.4425", "--vline", "0.5556", "-o", out, csv.to_str().unwrap()],
            tmp.path(),
        );
        assert_ok(&o);
    }
    let a = fs::read(tmp.path().join("a.svg")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b.svg")).unwrap());
    assert!(String::from_utf8(a).unwrap().contains("0.5556"));
}

#[test]
fn output_root_variable_is_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &SMALL_GROWTH_Q.replace("emit_plots = true", "emit_plots = false\noutput_dir = \"rel\""),
    );
    let root = tmp.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_ergo"))
        .args(["run", &cfg])
        .current_dir(tmp.path())
        .env("ERGO_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert_ok(&o);
    assert!(root.join("rel/manifest.json").exists());
    assert!(!root.join("rel/seed_1/plots").exists());
}

#[test]
fn list_shows_registered_components() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ergo(&["list"], tmp.path());
    assert_ok(&o);
    let text = stdout(&o);
    for name in ["coin_toss", "bandit", "delivery", "mdp_file", "growth_q", "learn_and_train", "preference"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn every_bundled_config_runs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for required in [
        "fig1_coin_toss_alpha1.toml",
        "fig3_transform.toml",
        "fig4_growth_q.toml",
        "fig6_indifference.toml",
        "fig7_temporal.toml",
        "theorem1_check.toml",
        "theorem2_check.toml",
    ] {
        assert!(names.iter().any(|n| n == required), "{required} missing");
    }
    let tmp = tempfile::tempdir().unwrap();
    for name in &names {
        let cmd = if name.contains("sweep") { "sweep" } else { "run" };
        let path = dir.join(name).display().to_string();
        let o = ergo(&[cmd, &path, "--out", name.trim_end_matches(".toml")], tmp.path());
        assert_ok(&o);
        assert!(tmp.path().join(name.trim_end_matches(".toml")).join("manifest.json").exists());
    }
}
