use std::path::Path;
use std::process::Command;

use clap::Parser;
use eddy_mlmc_cli::commands::{COMPARE_COLUMNS, RUN_COLUMNS, SCREENING_COLUMNS};
use eddy_mlmc_cli::{effective_config, execute, Cli, CliError, RunConfig};

const BIN: &str = env!("CARGO_BIN_EXE_eddy-mlmc");

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("eddy-mlmc").chain(args.iter().copied())).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Data rows of a CSV, skipping the comment header and the column line.
fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column_line(text: &str) -> &str {
    text.lines().find(|l| !l.starts_with('#')).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn csv_header_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let config = write_config(dir.path(), "[mesh]\nn_theta = 12\n[experiment]\nn_warm = 8\nlevels = 2\n");
    let args = ["--config", &config, "--seed", "9", "--out", out.to_str().unwrap(), "screen"];
    let first = execute(&cli(&args)).unwrap();
    let text = read(&first.files[0]);
    assert_eq!(column_line(&text), SCREENING_COLUMNS);

    let recovered = RunConfig::from_csv_header(&text).unwrap();
    assert_eq!(recovered, effective_config(&cli(&args)).unwrap());
    assert_eq!(recovered.rng.master_seed, 9);
    assert_eq!(recovered.mesh.n_theta, 12);

    let again = dir.path().join("again.toml");
    std::fs::write(&again, recovered.to_toml()).unwrap();
    let second = execute(&cli(&["--config", again.to_str().unwrap(), "screen"])).unwrap();
    assert_eq!(read(&second.files[0]), text);
}

#[test]
fn compare_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = || {
        let o = execute(&cli(&["--seed", "3", "--out", out.to_str().unwrap(), "compare", "--eps", "0.1,0.05"])).unwrap();
        read(&o.files[0])
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(column_line(&a), COMPARE_COLUMNS);
    let rows = data_rows(&a);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.len(), 6);
        let cost_mc: f64 = r[1].parse().unwrap();
        let cost_mlmc: f64 = r[2].parse().unwrap();
        assert!(cost_mc > 0.0 && cost_mlmc > 0.0);
        assert!(r[5] == "0" || r[5] == "1");
    }
    assert!(a.lines().last().unwrap().starts_with("# eps_star = "));
}

#[test]
fn seed_changes_the_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = dir.path().join(seed);
        let o = execute(&cli(&["--seed", seed, "--out", out.to_str().unwrap(), "run", "--eps", "0.05"])).unwrap();
        data_rows(&read(&o.files[0])).last().unwrap()[3].clone()
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn run_rows_and_sample_growth() {
    let dir = tempfile::tempdir().unwrap();
    let run = |eps: &str| {
        let out = dir.path().join(eps);
        let o = execute(&cli(&["--out", out.to_str().unwrap(), "run", "--eps", eps])).unwrap();
        let text = read(&o.files[0]);
        assert_eq!(column_line(&text), RUN_COLUMNS);
        let rows = data_rows(&text);
        let (summary, levels) = rows.split_last().unwrap();
        assert_eq!(summary[1], "all");
        assert!(summary[5] == "converged" || summary[5] == "bias-unconverged");
        let n: Vec<usize> = levels.iter().map(|r| r[2].parse().unwrap()).collect();
        for (l, r) in levels.iter().enumerate() {
            assert_eq!(r[1], l.to_string());
        }
        assert_eq!(summary[2].parse::<usize>().unwrap(), n.iter().sum::<usize>());
        n
    };
    let coarse = run("0.03");
    let fine = run("0.01");
    assert!(fine.len() >= coarse.len());
    assert!(fine[0] > coarse[0]);
    assert!(fine.iter().sum::<usize>() > coarse.iter().sum::<usize>());
    assert!(fine.windows(2).skip(1).all(|w| w[1] <= w[0]), "{fine:?}");
}

#[test]
fn degenerate_distributions_run_to_completion() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[dist]\nr1_halfwidth = 0.0\ni0_halfwidth = 0.0\nmu3_halfwidth = 0.0\n");
    let out = dir.path().join("out");
    let o = execute(&cli(&["--config", &config, "--out", out.to_str().unwrap(), "run", "--eps", "0.01"])).unwrap();
    let rows = data_rows(&read(&o.files[0]));
    let y: f64 = rows.last().unwrap()[3].parse().unwrap();
    let q = execute(&cli(&["--config", &config, "--out", out.to_str().unwrap(), "qoi", "--level", "2"])).unwrap();
    let w: f64 = data_rows(&read(&q.files[0]))[0][4].parse().unwrap();
    assert!(y > 0.0 && (y - w).abs() < 0.05 * w, "{y} vs {w}");
}

#[test]
fn solve_log_lists_every_solve() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[experiment]\nn_warm = 4\nlevels = 1\nsolve_log = true\n");
    let out = dir.path().join("out");
    let o = execute(&cli(&["--config", &config, "--out", out.to_str().unwrap(), "screen"])).unwrap();
    assert_eq!(o.files.len(), 2);
    let log = read(&o.files[1]);
    assert_eq!(column_line(&log), "sample_id,level,n_dof,residual,w");
    // 4 level-0 solves plus 4 coupled pairs on level 1.
    assert_eq!(data_rows(&log).len(), 12);
}

#[test]
fn invalid_input_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["[experiment]\nn_warm = 1\n", "[geometry]\nr3 = 1.0\n", "[dist]\nr1_halfwidth = 0.5\n"] {
        let config = write_config(dir.path(), text);
        assert!(matches!(execute(&cli(&["--config", &config, "screen"])), Err(CliError::Config(_))), "{text}");
    }
    let out = dir.path().join("out");
    assert!(matches!(
        execute(&cli(&["--out", out.to_str().unwrap(), "run", "--eps=-1"])),
        Err(CliError::Config(_))
    ));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = |args: &[&str]| Command::new(BIN).args(args).output().unwrap();

    let ok = status(&["--out", out.to_str().unwrap(), "qoi", "--level", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(out.join("qoi.csv").exists());

    let config = write_config(dir.path(), "[experiment]\nn_warm = 1\n");
    let bad = status(&["--config", &config, "--out", out.to_str().unwrap(), "screen"]);
    assert_eq!(bad.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert_eq!(msg.matches("configuration error").count(), 1, "{msg}");

    let missing = dir.path().join("nope.toml");
    assert_eq!(status(&["--config", missing.to_str().unwrap(), "screen"]).status.code(), Some(1));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let unwritable = blocker.join("sub");
    assert_eq!(status(&["--out", unwritable.to_str().unwrap(), "qoi", "--level", "0"]).status.code(), Some(1));
}

#[test]
fn mesh_dump_matches_dof_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = execute(&cli(&["--out", out.to_str().unwrap(), "mesh", "--level", "1"])).unwrap();
    assert!(o.summary.ends_with("609 DoF"), "{}", o.summary);
    assert!(o.files[0].ends_with("mesh_l1.txt"));
}
