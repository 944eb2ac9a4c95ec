use std::path::Path;
use std::process::{Command, Output};

use aggbandit_harness::records::{read_csv, read_summary, summary_path};
use aggbandit_harness::SweepReport;

fn aggbandit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggbandit"))
        .args(args)
        .current_dir(dir)
        .env_remove("AGG_BANDIT_SEED")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const CONFIG: &str = r#"
algorithm = "po_known"
episodes = 64
seeds = [3, 4]
mdp = "random"
num_states = 3
num_actions = 2
horizon = 3
adversary = "switching"
switch_period = 8
output = "out/run.csv"
"#;

#[test]
fn validate_accepts_a_good_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    let out = aggbandit(&["validate", "--config", "c.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: po_known"));
}

#[test]
fn missing_config_fails_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = aggbandit(&["run", "--config", "nowhere.toml"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nowhere.toml"));
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("typo.toml"), format!("{CONFIG}\nepisdoes = 3\n")).unwrap();
    let out = aggbandit(&["validate", "--config", "typo.toml"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("episdoes"));

    std::fs::write(dir.path().join("delta.toml"), CONFIG.replace("episodes = 64", "episodes = 64\ndelta = 2.0")).unwrap();
    let out = aggbandit(&["validate", "--config", "delta.toml"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("delta"));
}

#[test]
fn run_writes_csv_and_summary_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("conf")).unwrap();
    std::fs::write(dir.path().join("conf/c.toml"), CONFIG).unwrap();
    let out = aggbandit(&["run", "--config", "conf/c.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = dir.path().join("conf/out/run.csv");
    let records = read_csv(&csv).unwrap();
    assert_eq!(records.len(), 128);
    assert_eq!(records[0].seed, 3);
    assert_eq!(records[64].seed, 4);
    let summary = read_summary(&summary_path(&csv)).unwrap();
    assert_eq!(summary.seeds.len(), 2);
    assert_eq!(summary.seeds[1].final_regret, records[127].cum_regret);
}

#[test]
fn seed_flags_override_and_env_fills_in() {
    let dir = tempfile::tempdir().unwrap();
    let no_seeds = CONFIG.replace("seeds = [3, 4]\n", "");
    std::fs::write(dir.path().join("c.toml"), &no_seeds).unwrap();

    let out = aggbandit(&["run", "--config", "c.toml", "--out", "none.csv"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("AGG_BANDIT_SEED"));

    let out = Command::new(env!("CARGO_BIN_EXE_aggbandit"))
        .args(["run", "--config", "c.toml", "--out", "env.csv"])
        .current_dir(dir.path())
        .env("AGG_BANDIT_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let records = read_csv(&dir.path().join("env.csv")).unwrap();
    assert!(records.iter().all(|r| r.seed == 9));

    let out = aggbandit(
        &["run", "--config", "c.toml", "--seed", "1", "--seed", "2", "--episodes", "10", "--out", "flags.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let records = read_csv(&dir.path().join("flags.csv")).unwrap();
    assert_eq!(records.len(), 20);
    assert_eq!((records[0].seed, records[19].seed), (1, 2));
}

#[test]
fn sweep_points_match_individual_runs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    let out = aggbandit(
        &["sweep", "--config", "c.toml", "--ks", "16,32,64,128", "--out", "sweep.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("sweep.json")).unwrap();
    let report: SweepReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.points.len(), 4);
    assert!(report.fit.is_some() || report.fit_error.is_some());

    let out = aggbandit(&["run", "--config", "c.toml", "--episodes", "32", "--out", "k32.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = read_summary(&summary_path(&dir.path().join("k32.csv"))).unwrap();
    let point = &report.points[1];
    assert_eq!(point.episodes, 32);
    for (run, seed) in point.runs.iter().zip(&summary.seeds) {
        assert_eq!(run.seed, seed.seed);
        assert_eq!(run.final_regret, seed.final_regret);
    }
}

#[test]
fn gen_instance_output_drives_a_file_based_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = aggbandit(
        &[
            "gen-instance", "--kind", "lower-bound", "--states", "2", "--actions", "3", "--horizon", "3",
            "--seed", "5", "--episodes", "40", "--out", "mdp.json", "--losses", "losses.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    std::fs::write(
        dir.path().join("file.toml"),
        "algorithm = \"po_unknown\"\nepisodes = 40\nseeds = [0]\nmdp = \"file\"\nmdp_file = \"mdp.json\"\n\
         adversary = \"fixed_sequence\"\nloss_file = \"losses.json\"\n",
    )
    .unwrap();
    let out = aggbandit(&["run", "--config", "file.toml", "--out", "f.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(read_csv(&dir.path().join("f.csv")).unwrap().len(), 40);

    // more episodes than the file holds
    let out = aggbandit(&["run", "--config", "file.toml", "--episodes", "41", "--out", "g.csv"], dir.path());
    assert!(!out.status.success());
}
